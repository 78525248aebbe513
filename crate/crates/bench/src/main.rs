#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use dicod_bench::config::{apply_config, parse_config};
use dicod_bench::experiment::write_trace_csv;
use dicod_bench::plot::{Plot, Series};
use dicod_bench::{
    generate_instance, lambda_max, run_comparison, run_speedup_sweep, theoretical_speedup_bound,
    write_speedup_csv, BenchError, ComparisonReport, GenerationSpec, Instance, LambdaSpec,
    SolverSpec,
};
use dicod_core::dicod::InterferenceStats;
use dicod_core::io::{load_code, load_dictionary, load_signal, save, Record};
use dicod_core::objective::{check_h1, H1Report};
use dicod_core::SparseCode;

#[derive(Parser)]
#[command(
    name = "dicod",
    version,
    about = "Convolutional sparse coding experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw a synthetic instance and write `x.csc`, `d.csc` and `z.csc` into a directory.
    Generate {
        #[command(flatten)]
        instance: InstanceArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run one solver and write its trace as CSV.
    Solve {
        #[command(flatten)]
        instance: InstanceArgs,
        #[arg(long, default_value = "greedy")]
        solver: SolverSpec,
        #[command(flatten)]
        stop: StopArgs,
        /// Record the cost every this many updates.
        #[arg(long, default_value_t = 100)]
        log_every: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    Bench {
        #[command(subcommand)]
        command: BenchCommand,
    },
    Check {
        #[command(subcommand)]
        command: CheckCommand,
    },
    /// Evaluate the lower bound on the expected speedup.
    Bound {
        /// Ratio W / T.
        #[arg(long)]
        alpha: f64,
        /// Worker counts, comma separated. More than one prints a CSV table.
        #[arg(long, value_delimiter = ',', required = true)]
        m: Vec<usize>,
    },
}

#[derive(Subcommand)]
enum BenchCommand {
    /// Run several solvers on one instance.
    Compare {
        #[command(flatten)]
        instance: InstanceArgs,
        #[arg(
            long,
            value_delimiter = ',',
            default_value = "greedy,rcd,seq:30,dicod:4,prox"
        )]
        solvers: Vec<SolverSpec>,
        #[command(flatten)]
        stop: StopArgs,
        /// Trace CSV; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Cost-gap plot against updates.
        #[arg(long)]
        svg: Option<PathBuf>,
        /// Interference statistics of the DICOD runs.
        #[arg(long)]
        stats: Option<PathBuf>,
    },
    /// Wall-clock speedup of threaded DICOD over one worker.
    Speedup {
        #[command(flatten)]
        instance: InstanceArgs,
        #[arg(long, value_delimiter = ',', default_value = "1,2,4")]
        m: Vec<usize>,
        #[arg(long, default_value_t = 3)]
        repeats: usize,
        #[arg(long, default_value_t = 1e-6)]
        eps: f64,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        svg: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum CheckCommand {
    /// Report the worst normalized correlation between distinct coordinates.
    H1 {
        #[command(flatten)]
        instance: InstanceArgs,
    },
}

#[derive(Args)]
struct StopArgs {
    #[arg(long, default_value_t = 1e-6)]
    eps: f64,
    #[arg(long, default_value_t = 10_000_000)]
    max_iter: usize,
}

#[derive(Args)]
struct InstanceArgs {
    /// Directory written by `generate`; replaces the generation flags.
    #[arg(long, conflicts_with_all = ["t", "w", "k", "p", "config", "paper_scale"])]
    data: Option<PathBuf>,
    /// `key=value` file overriding the base instance.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Start from W = 200, K = 25, P = 7, T = 600 W, λ = 1.
    #[arg(long)]
    paper_scale: bool,
    #[arg(long = "T")]
    t: Option<usize>,
    #[arg(long = "W")]
    w: Option<usize>,
    #[arg(long = "K")]
    k: Option<usize>,
    #[arg(long = "P")]
    p: Option<usize>,
    /// Fixed λ.
    #[arg(long, conflicts_with = "lambda_rel")]
    lambda: Option<f64>,
    /// λ as a fraction of max |correlate(D, X)|.
    #[arg(long)]
    lambda_rel: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

impl InstanceArgs {
    fn spec(&self) -> Result<GenerationSpec, BenchError> {
        let mut spec = if self.paper_scale {
            GenerationSpec::paper_scale()
        } else {
            GenerationSpec::desk_default()
        };
        spec.seed = self.seed;
        if let Some(path) = &self.config {
            spec = apply_config(spec, &parse_config(&fs::read_to_string(path)?)?)?;
        }
        spec.t = self.t.unwrap_or(spec.t);
        spec.w = self.w.unwrap_or(spec.w);
        spec.k = self.k.unwrap_or(spec.k);
        spec.p = self.p.unwrap_or(spec.p);
        if let Some(l) = self.lambda {
            spec.lambda = LambdaSpec::Fixed(l);
        }
        if let Some(f) = self.lambda_rel {
            spec.lambda = LambdaSpec::RelativeToMax(f);
        }
        spec.validate()?;
        Ok(spec)
    }

    fn load(&self) -> Result<Instance, BenchError> {
        let Some(dir) = &self.data else {
            return generate_instance(&self.spec()?);
        };
        let x = load_signal(dir.join("x.csc"))?;
        let dict = load_dictionary(dir.join("d.csc"))?;
        let z_path = dir.join("z.csc");
        let z_true = if z_path.exists() {
            load_code(z_path)?
        } else {
            SparseCode::zeros(dict.n_atoms(), dict.code_len(x.len())?)
        };
        let lambda = match (self.lambda, self.lambda_rel) {
            (Some(l), _) => l,
            (None, f) => f.unwrap_or(0.1) * lambda_max(&x, &dict)?,
        };
        if !(lambda > 0.0) {
            return Err(BenchError::Config("lambda must be positive".into()));
        }
        Ok(Instance {
            x,
            dict,
            z_true,
            lambda,
        })
    }
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>, BenchError> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(io::stdout().lock()),
    })
}

fn cost_gap_plot(report: &ComparisonReport) -> Plot {
    let best = report
        .runs
        .iter()
        .map(|r| r.final_cost)
        .fold(f64::INFINITY, f64::min);
    let mut plot = Plot::new(&format!("λ = {:.4}", report.lambda), "updates", "E - E*");
    plot.log_y = true;
    for run in &report.runs {
        plot.series.push(Series {
            label: run.solver.to_string(),
            points: run
                .trajectory
                .iter()
                .map(|p| (p.updates as f64, p.cost - best))
                .collect(),
        });
    }
    plot
}

fn run(cli: Cli) -> Result<(), BenchError> {
    match cli.command {
        Command::Generate { instance, out } => {
            let inst = generate_instance(&instance.spec()?)?;
            fs::create_dir_all(&out)?;
            save(out.join("x.csc"), &Record::Signal(inst.x))?;
            save(out.join("d.csc"), &Record::Dictionary(inst.dict))?;
            save(out.join("z.csc"), &Record::Code(inst.z_true))?;
            println!("lambda={}", inst.lambda);
        }
        Command::Solve {
            instance,
            solver,
            stop,
            log_every,
            out,
        } => {
            let inst = instance.load()?;
            if log_every == 0 {
                return Err(BenchError::Config("log_every must be positive".into()));
            }
            let run = dicod_bench::experiment::run_solver(
                &inst,
                solver,
                stop.eps,
                stop.max_iter,
                instance.seed,
                log_every,
            )?;
            if !run.converged {
                eprintln!("warning: {solver} stopped before convergence");
            }
            let report = ComparisonReport {
                lambda: inst.lambda,
                eps: stop.eps,
                seed: instance.seed,
                runs: vec![run],
            };
            write_trace_csv(output(out.as_deref())?, &report)?;
        }
        Command::Bench {
            command:
                BenchCommand::Compare {
                    instance,
                    solvers,
                    stop,
                    out,
                    svg,
                    stats,
                },
        } => {
            let inst = instance.load()?;
            let report = run_comparison(&inst, &solvers, stop.eps, stop.max_iter, instance.seed)?;
            for r in report.runs.iter().filter(|r| !r.converged) {
                eprintln!("warning: {} stopped before convergence", r.solver);
            }
            write_trace_csv(output(out.as_deref())?, &report)?;
            if let Some(path) = svg {
                fs::write(path, cost_gap_plot(&report).to_svg())?;
            }
            if let Some(path) = stats {
                let mut f = BufWriter::new(File::create(path)?);
                writeln!(f, "solver,{}", InterferenceStats::CSV_HEADER)?;
                for r in &report.runs {
                    if let Some(s) = &r.interference {
                        writeln!(f, "{},{}", r.solver, s.csv_row())?;
                    }
                }
                f.flush()?;
            }
        }
        Command::Bench {
            command:
                BenchCommand::Speedup {
                    instance,
                    m,
                    repeats,
                    eps,
                    out,
                    svg,
                },
        } => {
            let inst = instance.load()?;
            let report = run_speedup_sweep(&inst, &m, repeats, eps)?;
            for w in &report.warnings {
                eprintln!("warning: {w}");
            }
            write_speedup_csv(output(out.as_deref())?, &report)?;
            if let Some(path) = svg {
                let mut plot = Plot::new(&format!("α = {:.5}", report.alpha), "M", "speedup");
                plot.series.push(Series {
                    label: "median".into(),
                    points: report
                        .median_speedups
                        .iter()
                        .map(|&(m, s)| (m as f64, s))
                        .collect(),
                });
                plot.series.push(Series {
                    label: "bound".into(),
                    points: report
                        .median_speedups
                        .iter()
                        .map(|&(m, _)| (m as f64, theoretical_speedup_bound(m, report.alpha).value))
                        .collect(),
                });
                plot.markers.push((0.5 / report.alpha, "αM = 1/2".into()));
                fs::write(path, plot.to_svg())?;
            }
        }
        Command::Check {
            command: CheckCommand::H1 { instance },
        } => {
            let inst = instance.load()?;
            let report = check_h1(&inst.dict);
            println!("{}", H1Report::<f64>::CSV_HEADER);
            println!("{}", report.csv_row());
        }
        Command::Bound { alpha, m } => {
            if !(alpha >= 0.0) || m.contains(&0) {
                return Err(BenchError::Config("need alpha >= 0 and positive M".into()));
            }
            if let [single] = m.as_slice() {
                println!("{}", theoretical_speedup_bound(*single, alpha).value);
            } else {
                println!("M,bound,expansion,hypothesis_holds");
                for m in m {
                    let b = theoretical_speedup_bound(m, alpha);
                    println!("{m},{},{},{}", b.value, b.expansion, b.hypothesis_holds);
                }
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
