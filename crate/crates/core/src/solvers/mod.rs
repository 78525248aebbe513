//! Sequential solvers.
//!
//! All coordinate solvers start from `Z = 0` and keep β consistent with the
//! current code incrementally. A run is a pure function of its inputs and
//! configuration (seed included); only the wall-clock column of the trace
//! varies between runs.

mod greedy;
mod prox;
mod randomized;
mod select;
mod seq_dicod;

use std::time::Instant;

pub use greedy::greedy_cd;
pub use prox::{estimate_lipschitz, prox_gradient_baseline, ProxConfig};
pub use randomized::randomized_cd;
pub use select::{balanced_ranges, scan_best, BlockMax, Candidate};
pub use seq_dicod::seq_dicod;

use crate::error::{CscError, Result};
use crate::objective::{beta_init, delta_cost_single, BetaState, CoordinateUpdate};
use crate::scalar::Scalar;
use crate::signal::{check_problem, cost, Dictionary, MultivariateSignal, SparseCode};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Strategy {
    Greedy,
    Randomized,
    SeqDicod,
}

/// How greedy CD finds the best coordinate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GreedyScan {
    /// Cached per-block maxima, refreshed around each update.
    #[default]
    Blocked,
    /// Full rescan of all `K L` coordinates at every iteration.
    Naive,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig<F> {
    pub lambda: F,
    /// Stopping tolerance on `|ΔZ|`.
    pub eps: F,
    /// Greedy: updates. Randomized and seq-dicod: draws.
    pub max_iter: usize,
    pub strategy: Strategy,
    /// Number of segments, seq-dicod only.
    pub segments: usize,
    pub seed: u64,
    /// Exact cost is recorded every `log_every` updates.
    pub log_every: usize,
    /// Keep every applied update in [`SolveTrace::updates`].
    pub record_updates: bool,
    pub scan: GreedyScan,
}

impl<F: Scalar> SolverConfig<F> {
    pub fn new(lambda: F, strategy: Strategy) -> Self {
        Self {
            lambda,
            eps: F::lit(1e-6),
            max_iter: 10_000_000,
            strategy,
            segments: 1,
            seed: 0,
            log_every: 100,
            record_updates: false,
            scan: GreedyScan::default(),
        }
    }

    pub fn greedy(lambda: F) -> Self {
        Self::new(lambda, Strategy::Greedy)
    }

    pub fn randomized(lambda: F, seed: u64) -> Self {
        Self {
            seed,
            ..Self::new(lambda, Strategy::Randomized)
        }
    }

    pub fn seq_dicod(lambda: F, segments: usize, seed: u64) -> Self {
        Self {
            segments,
            seed,
            ..Self::new(lambda, Strategy::SeqDicod)
        }
    }

    pub fn with_eps(mut self, eps: F) -> Self {
        self.eps = eps;
        self
    }

    pub fn with_max_iter(mut self, max_iter: usize) -> Self {
        self.max_iter = max_iter;
        self
    }

    pub fn with_log_every(mut self, log_every: usize) -> Self {
        self.log_every = log_every;
        self
    }

    pub fn with_record_updates(mut self, record: bool) -> Self {
        self.record_updates = record;
        self
    }

    pub fn with_scan(mut self, scan: GreedyScan) -> Self {
        self.scan = scan;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda > F::zero()) {
            return Err(CscError::config("lambda must be positive"));
        }
        if !(self.eps > F::zero()) {
            return Err(CscError::config("eps must be positive"));
        }
        if self.max_iter == 0 || self.log_every == 0 {
            return Err(CscError::config("max_iter and log_every must be positive"));
        }
        if self.segments == 0 {
            return Err(CscError::config("segment count must be positive"));
        }
        Ok(())
    }
}

/// One checkpoint of a solver trajectory.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TracePoint<F> {
    pub updates: usize,
    pub seconds: f64,
    pub cost: F,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveTrace<F> {
    /// Coordinate updates applied (prox-gradient: iterations).
    pub iterations: usize,
    pub trajectory: Vec<TracePoint<F>>,
    /// `max |ΔZ|` when the solver stopped.
    pub final_max_dz: F,
    pub converged: bool,
    /// Candidate coordinates evaluated by the selection rule. Full scans made
    /// only to confirm termination are not counted.
    pub evaluations: u64,
    /// Applied updates, when requested.
    pub updates: Vec<CoordinateUpdate<F>>,
}

impl<F: Scalar> SolveTrace<F> {
    pub fn final_cost(&self) -> F {
        self.trajectory
            .last()
            .map(|p| p.cost)
            .unwrap_or_else(F::nan)
    }

    pub fn initial_cost(&self) -> F {
        self.trajectory
            .first()
            .map(|p| p.cost)
            .unwrap_or_else(F::nan)
    }

    /// Update count of the first checkpoint at or below `target`.
    pub fn updates_to_reach(&self, target: F) -> Option<usize> {
        self.trajectory
            .iter()
            .find(|p| p.cost <= target)
            .map(|p| p.updates)
    }
}

/// Records exact costs every `log_every` updates.
pub(crate) struct Recorder<F> {
    start: Instant,
    log_every: usize,
    points: Vec<TracePoint<F>>,
}

impl<F: Scalar> Recorder<F> {
    pub(crate) fn new(log_every: usize) -> Self {
        Self {
            start: Instant::now(),
            log_every,
            points: Vec::new(),
        }
    }

    pub(crate) fn maybe(&mut self, updates: usize, cost: impl FnOnce() -> Result<F>) -> Result<()> {
        if updates.is_multiple_of(self.log_every) {
            self.force(updates, cost)?;
        }
        Ok(())
    }

    pub(crate) fn force(&mut self, updates: usize, cost: impl FnOnce() -> Result<F>) -> Result<()> {
        if self.points.last().is_some_and(|p| p.updates == updates) {
            return Ok(());
        }
        let cost = cost()?;
        self.points.push(TracePoint {
            updates,
            seconds: self.start.elapsed().as_secs_f64(),
            cost,
        });
        Ok(())
    }

    pub(crate) fn finish(self) -> Vec<TracePoint<F>> {
        self.points
    }
}

/// Code, β and bookkeeping shared by the coordinate solvers.
pub(crate) struct CdState<'a, F> {
    pub x: &'a MultivariateSignal<F>,
    pub dict: &'a Dictionary<F>,
    pub lambda: F,
    pub z: SparseCode<F>,
    pub beta: BetaState<F>,
    pub updates: usize,
    pub log: Option<Vec<CoordinateUpdate<F>>>,
    pub recorder: Recorder<F>,
}

impl<'a, F: Scalar> CdState<'a, F> {
    pub(crate) fn new(
        x: &'a MultivariateSignal<F>,
        dict: &'a Dictionary<F>,
        cfg: &SolverConfig<F>,
    ) -> Result<Self> {
        cfg.validate()?;
        let l = dict.code_len(x.len())?;
        let z = SparseCode::zeros(dict.n_atoms(), l);
        check_problem(x, dict, &z)?;
        let mut recorder = Recorder::new(cfg.log_every);
        let beta = beta_init(x, dict, &z)?;
        recorder.force(0, || Ok(F::lit(0.5) * x.sq_norm()))?;
        Ok(Self {
            x,
            dict,
            lambda: cfg.lambda,
            z,
            beta,
            updates: 0,
            log: cfg.record_updates.then(Vec::new),
            recorder,
        })
    }

    pub(crate) fn n_atoms(&self) -> usize {
        self.z.n_atoms()
    }

    pub(crate) fn code_len(&self) -> usize {
        self.z.len()
    }

    #[inline]
    pub(crate) fn target(&self, k: usize, t: usize) -> F {
        self.beta.target(k, t, self.lambda, self.dict.sq_norms())
    }

    #[inline]
    pub(crate) fn abs_dz(&self, k: usize, t: usize) -> F {
        (self.z.get(k, t as isize) - self.target(k, t)).abs()
    }

    /// Moves `(k, t)` to its optimal value. Returns the cost decrease.
    pub(crate) fn apply(&mut self, k: usize, t: usize) -> Result<F> {
        let old = self.z.get(k, t as isize);
        let new = self.target(k, t);
        let gain = delta_cost_single(
            old,
            new,
            self.beta.get(k, t),
            self.dict.sq_norms()[k],
            self.lambda,
        );
        let upd = CoordinateUpdate::new(k, t, old, new);
        self.beta.apply_update(&upd, self.dict.cross_corr())?;
        self.z.set(k, t, new);
        self.updates += 1;
        if let Some(log) = self.log.as_mut() {
            log.push(upd);
        }
        let (x, dict, z, lambda) = (self.x, self.dict, &self.z, self.lambda);
        self.recorder
            .maybe(self.updates, || cost(x, dict, z, lambda))?;
        Ok(gain)
    }

    /// Global `max |ΔZ|` by full scan.
    pub(crate) fn max_dz(&self) -> F {
        scan_best(self.n_atoms(), 0..self.code_len(), |k, t| self.abs_dz(k, t)).abs_dz
    }

    pub(crate) fn finish(
        mut self,
        converged: bool,
        final_max_dz: F,
        evaluations: u64,
    ) -> Result<(SparseCode<F>, SolveTrace<F>)> {
        let (x, dict, z, lambda) = (self.x, self.dict, &self.z, self.lambda);
        self.recorder
            .force(self.updates, || cost(x, dict, z, lambda))?;
        let trace = SolveTrace {
            iterations: self.updates,
            trajectory: self.recorder.finish(),
            final_max_dz,
            converged,
            evaluations,
            updates: self.log.unwrap_or_default(),
        };
        Ok((self.z, trace))
    }
}

/// Runs the coordinate solver selected by `cfg.strategy`.
pub fn solve<F: Scalar>(
    x: &MultivariateSignal<F>,
    dict: &Dictionary<F>,
    cfg: &SolverConfig<F>,
) -> Result<(SparseCode<F>, SolveTrace<F>)> {
    match cfg.strategy {
        Strategy::Greedy => greedy_cd(x, dict, cfg),
        Strategy::Randomized => randomized_cd(x, dict, cfg),
        Strategy::SeqDicod => seq_dicod(x, dict, cfg),
    }
}
