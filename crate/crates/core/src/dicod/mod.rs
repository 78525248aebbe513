//! Distributed convolutional coordinate descent.
//!
//! `M` workers own contiguous segments of the code. Each keeps β on its
//! segment plus a `W - 1` halo, applies its locally greedy update and forwards
//! border updates to its neighbors. A controller detects global termination
//! with the counting protocol in [`termination`].
//!
//! Two runtimes share [`Worker::step`]:
//! - [`ScheduleMode::Stepped`]: single-threaded rounds with seeded per-link
//!   delays, used for correctness checks and reproducible logs.
//! - [`ScheduleMode::FreeRunning`]: one thread per worker over FIFO channels,
//!   used for wall-clock measurements.

mod partition;
mod stats;
mod stepped;
mod termination;
mod threaded;
mod worker;

use std::time::Duration;

pub use partition::{partition, SegmentAssignment};
pub use stats::{
    interference_rate, read_update_log, simulate_uniform_interference, write_update_log,
    InterferenceRate, InterferenceStats, UpdateLogRow, UPDATE_LOG_HEADER,
};
pub use stepped::{RoundReport, SteppedRunner};
pub use termination::{ProbeReply, TerminationDetector};
pub use worker::{AppliedUpdate, LocalLogEntry, StepOutcome, UpdateMessage, Worker, WorkerStats};

use crate::error::{CscError, Result};
use crate::objective::{beta_init, CoordinateUpdate};
use crate::scalar::Scalar;
use crate::signal::{check_problem, Dictionary, MultivariateSignal, SparseCode};
use crate::solvers::SolveTrace;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScheduleMode {
    /// Deterministic rounds; each message is delivered `1..=d_max` rounds
    /// after it was sent, FIFO per link.
    Stepped { d_max: u32 },
    /// Real threads; delays are whatever the host produces.
    FreeRunning,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ScheduleScript {
    pub seed: u64,
    pub mode: ScheduleMode,
}

impl ScheduleScript {
    /// Every message reaches its receiver before the receiver's next update.
    pub fn satisfies_h3(&self) -> bool {
        matches!(self.mode, ScheduleMode::Stepped { d_max } if d_max <= 1)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DicodConfig<F> {
    pub lambda: F,
    pub eps: F,
    pub workers: usize,
    pub schedule: ScheduleScript,
    /// Stepped mode: give up after this many rounds.
    pub max_rounds: u64,
    /// Each worker stops updating after this many updates.
    pub max_updates_per_worker: u64,
    /// Stepped mode: record the global cost every `log_every` rounds.
    pub log_every: u64,
    /// Keep the per-update log.
    pub record_log: bool,
    /// Free-running mode: pause between probe waves.
    pub probe_interval: Duration,
    /// Worker that panics on its first step. Test hook.
    #[doc(hidden)]
    pub fail_worker: Option<usize>,
}

impl<F: Scalar> DicodConfig<F> {
    pub fn new(lambda: F, workers: usize, schedule: ScheduleScript) -> Self {
        Self {
            lambda,
            eps: F::lit(1e-6),
            workers,
            schedule,
            max_rounds: 10_000_000,
            max_updates_per_worker: 10_000_000,
            log_every: 100,
            record_log: false,
            probe_interval: Duration::from_micros(200),
            fail_worker: None,
        }
    }

    pub fn stepped(lambda: F, workers: usize, seed: u64, d_max: u32) -> Self {
        Self::new(
            lambda,
            workers,
            ScheduleScript {
                seed,
                mode: ScheduleMode::Stepped { d_max },
            },
        )
    }

    pub fn free_running(lambda: F, workers: usize) -> Self {
        Self::new(
            lambda,
            workers,
            ScheduleScript {
                seed: 0,
                mode: ScheduleMode::FreeRunning,
            },
        )
    }

    pub fn with_eps(mut self, eps: F) -> Self {
        self.eps = eps;
        self
    }

    pub fn with_log_every(mut self, rounds: u64) -> Self {
        self.log_every = rounds;
        self
    }

    pub fn with_record_log(mut self, record: bool) -> Self {
        self.record_log = record;
        self
    }

    pub fn with_max_rounds(mut self, rounds: u64) -> Self {
        self.max_rounds = rounds;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda > F::zero()) {
            return Err(CscError::config("lambda must be positive"));
        }
        if !(self.eps > F::zero()) {
            return Err(CscError::config("eps must be positive"));
        }
        if self.workers == 0 {
            return Err(CscError::config("at least one worker is required"));
        }
        if self.max_rounds == 0 || self.max_updates_per_worker == 0 || self.log_every == 0 {
            return Err(CscError::config(
                "max_rounds, max_updates_per_worker and log_every must be positive",
            ));
        }
        if let ScheduleMode::Stepped { d_max } = self.schedule.mode {
            if d_max == 0 {
                return Err(CscError::config("d_max must be at least 1"));
            }
        }
        Ok(())
    }
}

/// Global state after a stepped round.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RoundCheckpoint<F> {
    pub round: u64,
    /// Updates applied so far, all workers together.
    pub updates: u64,
    /// Sum over rounds of the largest per-worker evaluation count: the
    /// selection work on the critical path.
    pub critical_evaluations: u64,
    pub cost: F,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DicodResult<F> {
    pub code: SparseCode<F>,
    pub trace: SolveTrace<F>,
    pub stats: InterferenceStats,
    /// Applied updates ordered by round then worker (empty unless requested).
    pub log: Vec<UpdateLogRow<F>>,
    /// Stepped mode only.
    pub checkpoints: Vec<RoundCheckpoint<F>>,
    /// Probe waves that reported termination (0 if the run was cut short).
    pub terminations: usize,
    /// Wall-clock time including worker setup.
    pub seconds: f64,
    /// Wall-clock time from the moment all workers were ready.
    pub warm_seconds: f64,
}

impl<F: Scalar> DicodResult<F> {
    /// First checkpoint at or below `target`.
    pub fn checkpoint_reaching(&self, target: F) -> Option<&RoundCheckpoint<F>> {
        self.checkpoints.iter().find(|c| c.cost <= target)
    }
}

/// Runs DICOD under the configured schedule.
///
/// Errors: configuration problems (including segments shorter than `W`),
/// [`CscError::Protocol`] when a message breaks the neighbor contract, and
/// [`CscError::WorkerFailure`] when a free-running worker dies.
pub fn dicod_solve<F: Scalar>(
    x: &MultivariateSignal<F>,
    dict: &Dictionary<F>,
    cfg: &DicodConfig<F>,
) -> Result<DicodResult<F>> {
    match cfg.schedule.mode {
        ScheduleMode::Stepped { .. } => SteppedRunner::new(x, dict, cfg)?.run(),
        ScheduleMode::FreeRunning => threaded::run(x, dict, cfg),
    }
}

/// Validates the configuration and the problem, and partitions the code.
fn plan<F: Scalar>(
    x: &MultivariateSignal<F>,
    dict: &Dictionary<F>,
    cfg: &DicodConfig<F>,
) -> Result<Vec<SegmentAssignment>> {
    cfg.validate()?;
    if cfg.fail_worker.is_some_and(|f| f >= cfg.workers) {
        return Err(CscError::config("fail_worker out of range"));
    }
    let l = dict.code_len(x.len())?;
    check_problem(x, dict, &SparseCode::zeros(dict.n_atoms(), l))?;
    partition(l, cfg.workers, dict.width())
}

fn build_workers<'d, F: Scalar>(
    x: &MultivariateSignal<F>,
    dict: &'d Dictionary<F>,
    cfg: &DicodConfig<F>,
) -> Result<Vec<Worker<'d, F>>> {
    plan(x, dict, cfg)?
        .into_iter()
        .map(|seg| {
            Worker::new(
                seg,
                cfg.workers,
                x,
                dict,
                cfg.lambda,
                cfg.eps,
                cfg.max_updates_per_worker,
            )
        })
        .collect()
}

fn gather<F: Scalar>(workers: &[Worker<'_, F>], n_atoms: usize, len: usize) -> SparseCode<F> {
    let mut z = SparseCode::zeros(n_atoms, len);
    for w in workers {
        let seg = w.segment();
        z.codes_mut()
            .slice_mut(ndarray::s![.., seg.start..=seg.end])
            .assign(w.code());
    }
    z
}

fn collect_stats<F: Scalar>(workers: &[Worker<'_, F>], rounds: u64) -> InterferenceStats {
    let mut stats = InterferenceStats {
        rounds,
        ..Default::default()
    };
    for w in workers {
        let s = w.stats();
        stats.total_updates += s.updates;
        stats.border_updates += s.border_updates;
        stats.interfering_pairs += s.interfering_pairs;
        stats.multi_interference += s.multi_interference;
        stats.messages += s.messages_sent;
    }
    stats
}

fn collect_log<F: Scalar>(workers: &[Worker<'_, F>]) -> Vec<UpdateLogRow<F>> {
    let mut rows: Vec<UpdateLogRow<F>> = workers
        .iter()
        .flat_map(|w| {
            let m = w.segment().m;
            w.log().iter().map(move |e| UpdateLogRow {
                round: e.step,
                worker: m,
                k: e.update.k0,
                t: e.update.t0,
                old: e.update.old_value,
                new: e.update.new_value,
                interfering: e.interfering,
            })
        })
        .collect();
    rows.sort_by_key(|r| (r.round, r.worker));
    rows
}

/// Outcome of replaying an update log on a single sequential state.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplayReport<F> {
    pub code: SparseCode<F>,
    /// Largest `|new - target|` where `target` is the optimal value of the
    /// coordinate in the sequential state just before the update.
    pub max_target_gap: F,
    /// Largest `|old - current|`.
    pub max_old_gap: F,
}

/// Applies `rows` in order on one β, checking that each logged value is what
/// a sequential coordinate update would have produced. A run whose log has no
/// interfering entries replays with gaps at rounding level.
pub fn replay_log<F: Scalar>(
    x: &MultivariateSignal<F>,
    dict: &Dictionary<F>,
    lambda: F,
    rows: &[UpdateLogRow<F>],
) -> Result<ReplayReport<F>> {
    let l = dict.code_len(x.len())?;
    let mut z = SparseCode::zeros(dict.n_atoms(), l);
    let mut beta = beta_init(x, dict, &z)?;
    let mut max_target_gap = F::zero();
    let mut max_old_gap = F::zero();
    for r in rows {
        if r.k >= dict.n_atoms() || r.t >= l {
            return Err(CscError::Index(format!(
                "log entry ({}, {}) outside the code",
                r.k, r.t
            )));
        }
        let current = z.get(r.k, r.t as isize);
        let target = beta.target(r.k, r.t, lambda, dict.sq_norms());
        max_target_gap = max_target_gap.max((r.new - target).abs());
        max_old_gap = max_old_gap.max((r.old - current).abs());
        let upd = CoordinateUpdate::new(r.k, r.t, current, r.new);
        beta.apply_update(&upd, dict.cross_corr())?;
        z.set(r.k, r.t, r.new);
    }
    Ok(ReplayReport {
        code: z,
        max_target_gap,
        max_old_gap,
    })
}
