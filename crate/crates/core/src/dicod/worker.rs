use std::collections::VecDeque;

use ndarray::Array2;

use super::partition::SegmentAssignment;
use super::termination::ProbeReply;
use crate::error::{CscError, Result};
use crate::objective::{delta_cost_single, BetaState, CoordinateUpdate};
use crate::scalar::Scalar;
use crate::signal::{Dictionary, MultivariateSignal};
use crate::solvers::scan_best;

const LEFT: usize = 0;
const RIGHT: usize = 1;

/// Border update forwarded to a neighbor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UpdateMessage<F> {
    pub k0: usize,
    /// Absolute time index of the updated coordinate.
    pub t0: usize,
    /// `ΔZ = old - new`.
    pub delta: F,
    pub sender: usize,
    /// Per-link sequence number, starting at 1.
    pub seq: u64,
    /// Messages the sender had consumed from the receiver when it made the update.
    pub seen: u64,
}

/// Update applied by a worker together with its single-update cost decrease.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AppliedUpdate<F> {
    pub update: CoordinateUpdate<F>,
    pub gain: F,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome<F> {
    pub update: Option<AppliedUpdate<F>>,
    pub outbound: Vec<(usize, UpdateMessage<F>)>,
    pub local_converged: bool,
    /// Candidate coordinates evaluated in this step.
    pub evaluations: u64,
}

/// One entry of a worker's local update log.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalLogEntry<F> {
    /// Step counter of the worker (the scheduler round in stepped mode).
    pub step: u64,
    pub update: CoordinateUpdate<F>,
    pub interfering: bool,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct WorkerStats {
    pub updates: u64,
    /// Updates that produced at least one message.
    pub border_updates: u64,
    /// Interfering pairs, counted by the right-hand worker of each pair.
    pub interfering_pairs: u64,
    /// Received messages that interfered with more than one local update.
    pub multi_interference: u64,
    pub evaluations: u64,
    pub messages_sent: u64,
    pub messages_received: u64,
}

#[derive(Debug, Clone, Copy)]
struct Unacknowledged {
    seq: u64,
    t: usize,
    log_index: usize,
}

/// State of one DICOD worker: the code on its segment, β on the segment plus
/// halo, and the counters used by termination and interference accounting.
///
/// Halo entries of β are kept up to date from messages but never used for the
/// coordinate choice.
#[derive(Debug, Clone)]
pub struct Worker<'d, F> {
    seg: SegmentAssignment,
    n_workers: usize,
    dict: &'d Dictionary<F>,
    lambda: F,
    eps: F,
    max_updates: u64,
    z: Array2<F>,
    beta: BetaState<F>,
    paused: bool,
    local_converged: bool,
    exhausted: bool,
    epoch: u64,
    step_count: u64,
    sent: [u64; 2],
    received: [u64; 2],
    unacked: [VecDeque<Unacknowledged>; 2],
    log: Vec<LocalLogEntry<F>>,
    stats: WorkerStats,
}

impl<'d, F: Scalar> Worker<'d, F> {
    pub fn new(
        seg: SegmentAssignment,
        n_workers: usize,
        x: &MultivariateSignal<F>,
        dict: &'d Dictionary<F>,
        lambda: F,
        eps: F,
        max_updates: u64,
    ) -> Result<Self> {
        let l = dict.code_len(x.len())?;
        if seg.end >= l {
            return Err(CscError::config(format!(
                "segment end {} beyond code length {l}",
                seg.end
            )));
        }
        let lo = seg.start.saturating_sub(seg.halo);
        let hi = (seg.end + 1 + seg.halo).min(l);
        Ok(Self {
            seg,
            n_workers,
            dict,
            lambda,
            eps,
            max_updates,
            z: Array2::zeros((dict.n_atoms(), seg.len())),
            beta: BetaState::at_zero(x, dict, lo, hi)?,
            paused: false,
            local_converged: false,
            exhausted: false,
            epoch: 0,
            step_count: 0,
            sent: [0; 2],
            received: [0; 2],
            unacked: [VecDeque::new(), VecDeque::new()],
            log: Vec::new(),
            stats: WorkerStats::default(),
        })
    }

    pub fn segment(&self) -> &SegmentAssignment {
        &self.seg
    }

    pub fn code(&self) -> &Array2<F> {
        &self.z
    }

    pub fn beta(&self) -> &BetaState<F> {
        &self.beta
    }

    pub fn is_paused(&self) -> bool {
        self.paused
    }

    pub fn local_converged(&self) -> bool {
        self.local_converged
    }

    /// Hit the update cap before converging.
    pub fn exhausted(&self) -> bool {
        self.exhausted
    }

    pub fn log(&self) -> &[LocalLogEntry<F>] {
        &self.log
    }

    pub fn steps(&self) -> u64 {
        self.step_count
    }

    pub fn stats(&self) -> WorkerStats {
        self.stats
    }

    pub fn probe_reply(&self) -> ProbeReply {
        ProbeReply {
            worker: self.seg.m,
            epoch: self.epoch,
            local_converged: self.local_converged,
            sent: self.sent[LEFT] + self.sent[RIGHT],
            received: self.received[LEFT] + self.received[RIGHT],
        }
    }

    #[inline]
    fn abs_dz(&self, k: usize, t: usize) -> F {
        let target = self.beta.target(k, t, self.lambda, self.dict.sq_norms());
        (self.z[[k, t - self.seg.start]] - target).abs()
    }

    /// Consumes messages without stepping. A consumed message unpauses the worker.
    pub fn absorb(&mut self, inbox: &[UpdateMessage<F>]) -> Result<()> {
        inbox.iter().try_for_each(|msg| self.receive(msg))
    }

    /// `max |ΔZ|` over the owned segment, from the current local β.
    pub fn local_max_dz(&self) -> F {
        scan_best(self.dict.n_atoms(), self.seg.range(), |k, t| {
            self.abs_dz(k, t)
        })
        .abs_dz
    }

    /// Consumes one message: checks it against the protocol, applies it to β
    /// and records interference with local updates the sender had not seen.
    fn receive(&mut self, msg: &UpdateMessage<F>) -> Result<()> {
        let m = self.seg.m;
        let side = if msg.sender + 1 == m {
            LEFT
        } else if msg.sender == m + 1 {
            RIGHT
        } else {
            return Err(CscError::Protocol(format!(
                "worker {m} got a message from non-neighbor {}",
                msg.sender
            )));
        };
        if msg.seq != self.received[side] + 1 {
            return Err(CscError::Protocol(format!(
                "worker {m} expected seq {} from {}, got {}",
                self.received[side] + 1,
                msg.sender,
                msg.seq
            )));
        }
        let w = self.dict.width();
        let in_halo = if side == LEFT {
            msg.t0 < self.seg.start && msg.t0 + w >= self.seg.start
        } else {
            msg.t0 > self.seg.end && msg.t0 <= self.seg.end + w
        };
        if msg.k0 >= self.dict.n_atoms() || !in_halo {
            return Err(CscError::Protocol(format!(
                "worker {m} owning [{}, {}] got update ({}, {}) outside its halo on that side",
                self.seg.start, self.seg.end, msg.k0, msg.t0
            )));
        }
        self.received[side] += 1;
        self.stats.messages_received += 1;
        self.epoch += 1;
        self.paused = false;
        self.local_converged = false;
        self.beta
            .apply_delta(msg.k0, msg.t0, msg.delta, self.dict.cross_corr());

        let pending = &mut self.unacked[side];
        while pending.front().is_some_and(|u| u.seq <= msg.seen) {
            pending.pop_front();
        }
        let mut hits = 0;
        for u in pending.iter() {
            if u.t.abs_diff(msg.t0) < w {
                self.log[u.log_index].interfering = true;
                hits += 1;
            }
        }
        if msg.sender < m {
            self.stats.interfering_pairs += hits;
        }
        if hits > 1 {
            self.stats.multi_interference += 1;
        }
        Ok(())
    }

    /// One iteration of the worker loop: consume `inbox` (FIFO per link), then
    /// apply the locally greedy update if it is at least `eps`. A paused worker
    /// that consumed nothing since pausing does nothing.
    pub fn step(&mut self, inbox: &[UpdateMessage<F>]) -> Result<StepOutcome<F>> {
        self.step_count += 1;
        self.absorb(inbox)?;
        let idle = |w: &Self, evaluations| StepOutcome {
            update: None,
            outbound: Vec::new(),
            local_converged: w.local_converged,
            evaluations,
        };
        if self.paused {
            return Ok(idle(self, 0));
        }
        if self.stats.updates >= self.max_updates {
            self.exhausted = true;
            self.paused = true;
            self.local_converged = true;
            return Ok(idle(self, 0));
        }

        let k_count = self.dict.n_atoms();
        let evaluations = (k_count * self.seg.len()) as u64;
        self.stats.evaluations += evaluations;
        let best = scan_best(k_count, self.seg.range(), |k, t| self.abs_dz(k, t));
        if best.abs_dz < self.eps {
            self.paused = true;
            self.local_converged = true;
            return Ok(idle(self, evaluations));
        }

        let (k, t) = (best.k, best.t);
        let old = self.z[[k, t - self.seg.start]];
        let beta = self.beta.get(k, t);
        let sq_norm = self.dict.sq_norms()[k];
        let new = self.beta.target(k, t, self.lambda, self.dict.sq_norms());
        let update = CoordinateUpdate::new(k, t, old, new);
        let gain = delta_cost_single(old, new, beta, sq_norm, self.lambda);
        self.beta.apply_update(&update, self.dict.cross_corr())?;
        self.z[[k, t - self.seg.start]] = new;
        self.epoch += 1;
        self.paused = false;
        self.local_converged = false;
        self.stats.updates += 1;
        let log_index = self.log.len();
        self.log.push(LocalLogEntry {
            step: self.step_count,
            update,
            interfering: false,
        });

        let w = self.dict.width();
        let mut outbound = Vec::new();
        let m = self.seg.m;
        if m > 0 && t - self.seg.start < w {
            outbound.push((m - 1, self.message(LEFT, &update, log_index)));
        }
        if m + 1 < self.n_workers && self.seg.end + 1 - t <= w {
            outbound.push((m + 1, self.message(RIGHT, &update, log_index)));
        }
        if !outbound.is_empty() {
            self.stats.border_updates += 1;
        }
        Ok(StepOutcome {
            update: Some(AppliedUpdate { update, gain }),
            outbound,
            local_converged: false,
            evaluations,
        })
    }

    fn message(
        &mut self,
        side: usize,
        update: &CoordinateUpdate<F>,
        log_index: usize,
    ) -> UpdateMessage<F> {
        self.sent[side] += 1;
        self.stats.messages_sent += 1;
        self.unacked[side].push_back(Unacknowledged {
            seq: self.sent[side],
            t: update.t0,
            log_index,
        });
        UpdateMessage {
            k0: update.k0,
            t0: update.t0,
            delta: update.delta,
            sender: self.seg.m,
            seq: self.sent[side],
            seen: self.received[side],
        }
    }
}
