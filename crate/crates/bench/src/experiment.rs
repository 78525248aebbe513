//! Solver comparisons and speedup measurements.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use dicod_core::dicod::{dicod_solve, InterferenceStats};
use dicod_core::solvers::{prox_gradient_baseline, solve, ProxConfig, TracePoint};
use dicod_core::{DicodConfig, SolverConfig};

use crate::bound::theoretical_speedup_bound;
use crate::generate::Instance;
use crate::BenchError;

/// A solver and its parameters, written `name[:n]` on the command line.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolverSpec {
    Greedy,
    Randomized,
    /// Locally greedy CD over `segments` segments.
    SeqDicod {
        segments: usize,
    },
    /// DICOD under the stepped scheduler with `d_max = 1`.
    Dicod {
        workers: usize,
    },
    /// DICOD with one thread per worker.
    DicodThreads {
        workers: usize,
    },
    /// Accelerated proximal gradient.
    Prox {
        iters: usize,
    },
}

impl fmt::Display for SolverSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SolverSpec::Greedy => write!(f, "greedy"),
            SolverSpec::Randomized => write!(f, "rcd"),
            SolverSpec::SeqDicod { segments } => write!(f, "seq:{segments}"),
            SolverSpec::Dicod { workers } => write!(f, "dicod:{workers}"),
            SolverSpec::DicodThreads { workers } => write!(f, "dicod-threads:{workers}"),
            SolverSpec::Prox { iters } => write!(f, "prox:{iters}"),
        }
    }
}

impl FromStr for SolverSpec {
    type Err = BenchError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (name, arg) = match s.split_once(':') {
            Some((n, a)) => (n, Some(a)),
            None => (s, None),
        };
        let count = |default: Option<usize>| -> Result<usize, BenchError> {
            match arg {
                Some(a) => a
                    .parse::<usize>()
                    .ok()
                    .filter(|&n| n > 0)
                    .ok_or_else(|| BenchError::Config(format!("bad count in solver `{s}`"))),
                None => {
                    default.ok_or_else(|| BenchError::Config(format!("solver `{s}` needs `:n`")))
                }
            }
        };
        let no_arg = |spec| match arg {
            None => Ok(spec),
            Some(_) => Err(BenchError::Config(format!(
                "solver `{name}` takes no argument"
            ))),
        };
        match name {
            "greedy" => no_arg(SolverSpec::Greedy),
            "rcd" => no_arg(SolverSpec::Randomized),
            "seq" => Ok(SolverSpec::SeqDicod {
                segments: count(None)?,
            }),
            "dicod" => Ok(SolverSpec::Dicod {
                workers: count(None)?,
            }),
            "dicod-threads" => Ok(SolverSpec::DicodThreads {
                workers: count(None)?,
            }),
            "prox" => Ok(SolverSpec::Prox {
                iters: count(Some(100_000))?,
            }),
            _ => Err(BenchError::Config(format!("unknown solver `{s}`"))),
        }
    }
}

/// Trajectory and outcome of one solver run.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceSummary {
    pub solver: SolverSpec,
    pub trajectory: Vec<TracePoint<f64>>,
    pub final_cost: f64,
    pub converged: bool,
    pub updates: usize,
    pub evaluations: u64,
    pub seconds: f64,
    pub interference: Option<InterferenceStats>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonReport {
    pub lambda: f64,
    pub eps: f64,
    pub seed: u64,
    pub runs: Vec<TraceSummary>,
}

impl ComparisonReport {
    /// Largest relative gap between the final costs of converged runs.
    pub fn max_relative_gap(&self) -> f64 {
        let costs: Vec<f64> = self
            .runs
            .iter()
            .filter(|r| r.converged)
            .map(|r| r.final_cost)
            .collect();
        let lo = costs.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = costs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if costs.is_empty() {
            0.0
        } else {
            (hi - lo) / lo.abs().max(f64::MIN_POSITIVE)
        }
    }
}

/// Runs one solver on `inst`. Non-convergence is recorded, errors are not
/// swallowed.
pub fn run_solver(
    inst: &Instance,
    solver: SolverSpec,
    eps: f64,
    max_iter: usize,
    seed: u64,
    log_every: usize,
) -> Result<TraceSummary, BenchError> {
    let start = std::time::Instant::now();
    let base = |cfg: SolverConfig| {
        cfg.with_eps(eps)
            .with_max_iter(max_iter)
            .with_log_every(log_every)
    };
    let (trace, interference) = match solver {
        SolverSpec::Greedy => (
            solve(
                &inst.x,
                &inst.dict,
                &base(SolverConfig::greedy(inst.lambda)),
            )?
            .1,
            None,
        ),
        SolverSpec::Randomized => (
            solve(
                &inst.x,
                &inst.dict,
                &base(SolverConfig::randomized(inst.lambda, seed)),
            )?
            .1,
            None,
        ),
        SolverSpec::SeqDicod { segments } => (
            solve(
                &inst.x,
                &inst.dict,
                &base(SolverConfig::seq_dicod(inst.lambda, segments, seed)),
            )?
            .1,
            None,
        ),
        SolverSpec::Dicod { workers } => {
            let cfg = DicodConfig::stepped(inst.lambda, workers, seed, 1)
                .with_eps(eps)
                .with_log_every(log_every as u64);
            let res = dicod_solve(&inst.x, &inst.dict, &cfg)?;
            (res.trace, Some(res.stats))
        }
        SolverSpec::DicodThreads { workers } => {
            let cfg = DicodConfig::free_running(inst.lambda, workers).with_eps(eps);
            let res = dicod_solve(&inst.x, &inst.dict, &cfg)?;
            (res.trace, Some(res.stats))
        }
        SolverSpec::Prox { iters } => {
            let cfg = ProxConfig {
                tol: eps * 1e-3,
                log_every,
                ..ProxConfig::new(inst.lambda, iters)
            };
            (prox_gradient_baseline(&inst.x, &inst.dict, &cfg)?.1, None)
        }
    };
    Ok(TraceSummary {
        solver,
        final_cost: trace.final_cost(),
        converged: trace.converged,
        updates: trace.iterations,
        evaluations: trace.evaluations,
        trajectory: trace.trajectory,
        seconds: start.elapsed().as_secs_f64(),
        interference,
    })
}

/// Runs every solver on the same instance, `λ` and `eps`.
pub fn run_comparison(
    inst: &Instance,
    solvers: &[SolverSpec],
    eps: f64,
    max_iter: usize,
    seed: u64,
) -> Result<ComparisonReport, BenchError> {
    let runs = solvers
        .iter()
        .map(|&s| run_solver(inst, s, eps, max_iter, seed, 100))
        .collect::<Result<_, _>>()?;
    Ok(ComparisonReport {
        lambda: inst.lambda,
        eps,
        seed,
        runs,
    })
}

pub const TRACE_CSV_HEADER: &str = "solver,updates,seconds,cost";

/// One row per `(solver, checkpoint)`.
pub fn write_trace_csv<W: Write>(mut out: W, report: &ComparisonReport) -> Result<(), BenchError> {
    writeln!(out, "{TRACE_CSV_HEADER}")?;
    for run in &report.runs {
        for p in &run.trajectory {
            writeln!(
                out,
                "{},{},{:.6},{}",
                run.solver, p.updates, p.seconds, p.cost
            )?;
        }
    }
    out.flush()?;
    Ok(())
}

/// One free-running DICOD run in a speedup sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpeedupRow {
    pub m: usize,
    pub run: usize,
    /// Wall-clock to termination, worker spawn included.
    pub seconds: f64,
    /// Median `M = 1` time divided by this run's time.
    pub speedup: f64,
    pub bound: f64,
    /// Wall-clock from the moment all workers were ready.
    pub warm_seconds: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepReport {
    pub alpha: f64,
    pub rows: Vec<SpeedupRow>,
    /// `(M, median speedup)`.
    pub median_speedups: Vec<(usize, f64)>,
    pub warnings: Vec<String>,
}

pub fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    match n {
        0 => f64::NAN,
        _ if n % 2 == 1 => values[n / 2],
        _ => 0.5 * (values[n / 2 - 1] + values[n / 2]),
    }
}

/// Wall-clock speedup of free-running DICOD over its single-worker run.
///
/// `M = 1` is always measured first as the reference. The time is taken to
/// termination; the cost at intermediate times cannot be observed without
/// stopping the workers.
pub fn run_speedup_sweep(
    inst: &Instance,
    m_values: &[usize],
    repeats: usize,
    eps: f64,
) -> Result<SweepReport, BenchError> {
    if repeats == 0 || m_values.is_empty() || m_values.contains(&0) {
        return Err(BenchError::Config(
            "need at least one repeat and positive M values".into(),
        ));
    }
    let alpha = inst.dict.width() as f64 / inst.x.len() as f64;
    let cores = std::thread::available_parallelism().map_or(1, |n| n.get());
    let mut warnings = Vec::new();
    let mut ms = vec![1];
    ms.extend(m_values.iter().copied().filter(|&m| m != 1));
    let mut timings: Vec<(usize, Vec<(f64, f64)>)> = Vec::new();
    for &m in &ms {
        if m > cores {
            warnings.push(format!("M = {m} oversubscribes {cores} available cores"));
        }
        let cfg = DicodConfig::free_running(inst.lambda, m).with_eps(eps);
        let runs = (0..repeats)
            .map(|_| dicod_solve(&inst.x, &inst.dict, &cfg).map(|r| (r.seconds, r.warm_seconds)))
            .collect::<Result<Vec<_>, _>>()?;
        timings.push((m, runs));
    }
    let mut reference: Vec<f64> = timings[0].1.iter().map(|r| r.0).collect();
    let t1 = median(&mut reference);
    let mut rows = Vec::new();
    let mut median_speedups = Vec::new();
    for (m, runs) in &timings {
        if *m == 1 && !m_values.contains(&1) {
            continue;
        }
        let bound = theoretical_speedup_bound(*m, alpha).value;
        for (run, &(seconds, warm_seconds)) in runs.iter().enumerate() {
            rows.push(SpeedupRow {
                m: *m,
                run,
                seconds,
                speedup: t1 / seconds,
                bound,
                warm_seconds,
            });
        }
        let mut secs: Vec<f64> = runs.iter().map(|r| r.0).collect();
        median_speedups.push((*m, t1 / median(&mut secs)));
    }
    Ok(SweepReport {
        alpha,
        rows,
        median_speedups,
        warnings,
    })
}

pub const SPEEDUP_CSV_HEADER: &str = "M,run,seconds,speedup,bound,warm_seconds";

pub fn write_speedup_csv<W: Write>(mut out: W, report: &SweepReport) -> Result<(), BenchError> {
    writeln!(out, "{SPEEDUP_CSV_HEADER}")?;
    for r in &report.rows {
        writeln!(
            out,
            "{},{},{:.6},{:.4},{},{:.6}",
            r.m, r.run, r.seconds, r.speedup, r.bound, r.warm_seconds
        )?;
    }
    out.flush()?;
    Ok(())
}

/// Machine-independent speedup estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpeedupProxy {
    pub m: usize,
    /// Cost level both solvers must reach, `E* + δ`.
    pub target: f64,
    /// Greedy CD updates to reach the target.
    pub cd_updates: usize,
    /// DICOD rounds to reach the target.
    pub dicod_rounds: u64,
    /// Selection work on the DICOD critical path up to the target.
    pub dicod_critical_evaluations: u64,
    /// `cd_updates · K L / dicod_critical_evaluations`.
    pub speedup: f64,
}

/// Compares the selection work of greedy CD, `K L` candidate evaluations per
/// update, with the per-round maximum over DICOD workers (stepped mode,
/// `d_max = 1`) up to the cost `E* + delta_frac · E(0)`. `E*` is the cost of a
/// greedy run with tolerance `eps / 100`.
pub fn update_count_speedup(
    inst: &Instance,
    m: usize,
    eps: f64,
    delta_frac: f64,
    seed: u64,
) -> Result<SpeedupProxy, BenchError> {
    let reference = solve(
        &inst.x,
        &inst.dict,
        &SolverConfig::greedy(inst.lambda)
            .with_eps(eps / 100.0)
            .with_log_every(1_000_000),
    )?
    .1;
    let e0 = 0.5 * inst.x.sq_norm();
    let target = reference.final_cost() + delta_frac * e0;
    let cd = solve(
        &inst.x,
        &inst.dict,
        &SolverConfig::greedy(inst.lambda)
            .with_eps(eps)
            .with_log_every(1),
    )?
    .1;
    let cd_updates = cd
        .updates_to_reach(target)
        .ok_or_else(|| BenchError::Config("greedy CD never reached the target cost".into()))?;
    let cfg = DicodConfig::stepped(inst.lambda, m, seed, 1)
        .with_eps(eps)
        .with_log_every(1);
    let res = dicod_solve(&inst.x, &inst.dict, &cfg)?;
    let hit = res.checkpoint_reaching(target).ok_or_else(|| {
        BenchError::Config(format!("DICOD with M = {m} never reached the target cost"))
    })?;
    let l = inst.z_true.len();
    let cd_work = cd_updates as f64 * (inst.dict.n_atoms() * l) as f64;
    Ok(SpeedupProxy {
        m,
        target,
        cd_updates,
        dicod_rounds: hit.round,
        dicod_critical_evaluations: hit.critical_evaluations,
        speedup: cd_work / hit.critical_evaluations.max(1) as f64,
    })
}
