use std::collections::VecDeque;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::termination::{ProbeReply, TerminationDetector};
use super::worker::{AppliedUpdate, UpdateMessage, Worker};
use super::{
    build_workers, collect_log, collect_stats, gather, DicodConfig, DicodResult, RoundCheckpoint,
    ScheduleMode,
};
use crate::error::{CscError, Result};
use crate::scalar::Scalar;
use crate::signal::{cost, Dictionary, MultivariateSignal, SparseCode};
use crate::solvers::{SolveTrace, TracePoint};

const LEFT: usize = 0;
const RIGHT: usize = 1;

/// What happened in one scheduler round.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundReport<F> {
    pub round: u64,
    /// `(worker, update)` in the order the workers stepped.
    pub updates: Vec<(usize, AppliedUpdate<F>)>,
    /// Largest evaluation count of a single worker in this round.
    pub critical_evaluations: u64,
}

/// Queued `(deliver_at, message)` pairs of one directed link.
type Link<F> = VecDeque<(u64, UpdateMessage<F>)>;

/// Single-threaded DICOD scheduler.
///
/// Every round steps each worker once in a seeded random order. A message sent
/// in round `r` gets a seeded delay `d ∈ [1, d_max]` and is delivered at the
/// receiver's first step in round `r + d` or later, never before an earlier
/// message on the same link. With `d_max = 1` every message is consumed before
/// the receiver's next update.
#[derive(Debug)]
pub struct SteppedRunner<'a, F> {
    x: &'a MultivariateSignal<F>,
    dict: &'a Dictionary<F>,
    cfg: DicodConfig<F>,
    d_max: u32,
    workers: Vec<Worker<'a, F>>,
    /// Per receiver, per side: `(deliver_at, message)`.
    links: Vec<[Link<F>; 2]>,
    rng: ChaCha8Rng,
    detector: TerminationDetector,
    round: u64,
    active_rounds: u64,
    updates: u64,
    evaluations: u64,
    critical_evaluations: u64,
}

impl<'a, F: Scalar> SteppedRunner<'a, F> {
    pub fn new(
        x: &'a MultivariateSignal<F>,
        dict: &'a Dictionary<F>,
        cfg: &DicodConfig<F>,
    ) -> Result<Self> {
        let ScheduleMode::Stepped { d_max } = cfg.schedule.mode else {
            return Err(CscError::config("stepped runner needs a stepped schedule"));
        };
        let workers = build_workers(x, dict, cfg)?;
        Ok(Self {
            x,
            dict,
            cfg: cfg.clone(),
            d_max,
            links: (0..workers.len())
                .map(|_| [VecDeque::new(), VecDeque::new()])
                .collect(),
            workers,
            rng: ChaCha8Rng::seed_from_u64(cfg.schedule.seed),
            detector: TerminationDetector::new(),
            round: 0,
            active_rounds: 0,
            updates: 0,
            evaluations: 0,
            critical_evaluations: 0,
        })
    }

    pub fn workers(&self) -> &[Worker<'a, F>] {
        &self.workers
    }

    /// Rounds executed so far.
    pub fn rounds(&self) -> u64 {
        self.round
    }

    pub fn in_flight(&self) -> usize {
        self.links
            .iter()
            .map(|l| l[LEFT].len() + l[RIGHT].len())
            .sum()
    }

    pub fn gather(&self) -> SparseCode<F> {
        gather(
            &self.workers,
            self.dict.n_atoms(),
            self.dict.code_len(self.x.len()).unwrap_or(0),
        )
    }

    pub fn cost(&self) -> Result<F> {
        cost(self.x, self.dict, &self.gather(), self.cfg.lambda)
    }

    pub fn probe(&self) -> Vec<ProbeReply> {
        self.workers.iter().map(Worker::probe_reply).collect()
    }

    /// Runs one probe wave through the termination detector.
    pub fn detect(&mut self) -> bool {
        let replies = self.probe();
        self.detector.observe(&replies)
    }

    /// Ground truth for the detector: nothing in flight and no worker has a
    /// coordinate to move by `eps` or more.
    pub fn is_quiescent(&self) -> bool {
        self.in_flight() == 0
            && self
                .workers
                .iter()
                .all(|w| w.exhausted() || w.local_max_dz() < self.cfg.eps)
    }

    /// Queues `msg` for worker `to` in the next round, bypassing the sender.
    #[doc(hidden)]
    pub fn inject(&mut self, to: usize, msg: UpdateMessage<F>) {
        let side = if msg.sender < to { LEFT } else { RIGHT };
        self.links[to][side].push_back((self.round + 1, msg));
    }

    fn take_inbox(&mut self, m: usize) -> Vec<UpdateMessage<F>> {
        let mut inbox = Vec::new();
        for side in [LEFT, RIGHT] {
            let link = &mut self.links[m][side];
            while link.front().is_some_and(|(at, _)| *at <= self.round) {
                inbox.extend(link.pop_front().map(|(_, msg)| msg));
            }
        }
        inbox
    }

    pub fn round(&mut self) -> Result<RoundReport<F>> {
        self.round += 1;
        let mut order: Vec<usize> = (0..self.workers.len()).collect();
        order.shuffle(&mut self.rng);
        if let Some(f) = self.cfg.fail_worker {
            if order.contains(&f) {
                return Err(CscError::WorkerFailure {
                    worker: f,
                    reason: "injected failure".into(),
                });
            }
        }
        let mut report = RoundReport {
            round: self.round,
            updates: Vec::new(),
            critical_evaluations: 0,
        };
        for m in order {
            let inbox = self.take_inbox(m);
            let outcome = self.workers[m].step(&inbox)?;
            report.critical_evaluations = report.critical_evaluations.max(outcome.evaluations);
            self.evaluations += outcome.evaluations;
            if let Some(applied) = outcome.update {
                report.updates.push((m, applied));
            }
            for (to, msg) in outcome.outbound {
                let side = if msg.sender < to { LEFT } else { RIGHT };
                let delay = u64::from(self.rng.random_range(1..=self.d_max));
                let link = &mut self.links[to][side];
                let at = link.back().map_or(0, |(at, _)| *at).max(self.round + delay);
                link.push_back((at, msg));
            }
        }
        self.updates += report.updates.len() as u64;
        if !report.updates.is_empty() {
            self.active_rounds += 1;
        }
        self.critical_evaluations += report.critical_evaluations;
        Ok(report)
    }

    fn checkpoint(
        &self,
        start: &Instant,
        points: &mut Vec<TracePoint<F>>,
        out: &mut Vec<RoundCheckpoint<F>>,
    ) -> Result<()> {
        if out.last().is_some_and(|c| c.round == self.round) {
            return Ok(());
        }
        let cost = self.cost()?;
        out.push(RoundCheckpoint {
            round: self.round,
            updates: self.updates,
            critical_evaluations: self.critical_evaluations,
            cost,
        });
        points.push(TracePoint {
            updates: self.updates as usize,
            seconds: start.elapsed().as_secs_f64(),
            cost,
        });
        Ok(())
    }

    /// Steps until the detector fires or `max_rounds` is reached.
    pub fn run(mut self) -> Result<DicodResult<F>> {
        let start = Instant::now();
        let mut points = Vec::new();
        let mut checkpoints = Vec::new();
        self.checkpoint(&start, &mut points, &mut checkpoints)?;
        let mut terminated = false;
        while self.round < self.cfg.max_rounds {
            self.round()?;
            if self.round.is_multiple_of(self.cfg.log_every) {
                self.checkpoint(&start, &mut points, &mut checkpoints)?;
            }
            if self.detect() {
                terminated = true;
                break;
            }
        }
        self.checkpoint(&start, &mut points, &mut checkpoints)?;
        let seconds = start.elapsed().as_secs_f64();
        let exhausted = self.workers.iter().any(Worker::exhausted);
        let final_max_dz = self
            .workers
            .iter()
            .map(Worker::local_max_dz)
            .fold(F::zero(), F::max);
        let log = if self.cfg.record_log {
            collect_log(&self.workers)
        } else {
            Vec::new()
        };
        Ok(DicodResult {
            code: self.gather(),
            trace: SolveTrace {
                iterations: self.updates as usize,
                trajectory: points,
                final_max_dz,
                converged: terminated && !exhausted,
                evaluations: self.evaluations,
                updates: Vec::new(),
            },
            stats: collect_stats(&self.workers, self.active_rounds),
            log,
            checkpoints,
            terminations: self.detector.fired(),
            seconds,
            warm_seconds: seconds,
        })
    }
}
