use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{CscError, Result};
use crate::scalar::Scalar;

/// Interference accounting for one DICOD run.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct InterferenceStats {
    pub total_updates: u64,
    /// Updates that produced at least one message.
    pub border_updates: u64,
    /// Pairs of updates on neighboring workers within lag `W` where neither had
    /// seen the other's message when it was applied.
    pub interfering_pairs: u64,
    /// Messages that interfered with two or more updates of the receiver.
    pub multi_interference: u64,
    /// Parallel rounds in which at least one update was applied.
    pub rounds: u64,
    pub messages: u64,
}

impl InterferenceStats {
    pub const CSV_HEADER: &'static str =
        "total_updates,border_updates,interfering_pairs,multi_interference,rounds,messages";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{}",
            self.total_updates,
            self.border_updates,
            self.interfering_pairs,
            self.multi_interference,
            self.rounds,
            self.messages
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InterferenceRate {
    /// Interfering pairs per round and per neighboring pair of workers.
    pub observed: f64,
    /// `(M α)^2` with `α = W / T`.
    pub predicted: f64,
}

pub fn interference_rate(
    stats: &InterferenceStats,
    workers: usize,
    alpha: f64,
) -> InterferenceRate {
    let predicted = (workers as f64 * alpha).powi(2);
    let observed = if workers < 2 || stats.rounds == 0 {
        0.0
    } else {
        stats.interfering_pairs as f64 / (stats.rounds as f64 * (workers - 1) as f64)
    };
    InterferenceRate {
        observed,
        predicted,
    }
}

/// Monte-Carlo run of the uniform-spread model: every round, each of the
/// `workers` segments of length `W / (workers α)` updates one uniformly drawn
/// coordinate, and neighbors interfere when their coordinates are closer than `W`.
pub fn simulate_uniform_interference(
    workers: usize,
    alpha: f64,
    width: usize,
    rounds: u64,
    seed: u64,
) -> Result<InterferenceStats> {
    if workers == 0 || width == 0 || !(alpha > 0.0) {
        return Err(CscError::config(
            "workers, width and alpha must be positive",
        ));
    }
    let seg = (width as f64 / (workers as f64 * alpha)).round() as usize;
    if seg < width {
        return Err(CscError::config(format!(
            "segment length {seg} shorter than W = {width}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut stats = InterferenceStats {
        rounds,
        ..Default::default()
    };
    let mut picks = vec![0usize; workers];
    for _ in 0..rounds {
        for (m, t) in picks.iter_mut().enumerate() {
            *t = m * seg + rng.random_range(0..seg);
        }
        stats.total_updates += workers as u64;
        for (m, &t) in picks.iter().enumerate() {
            let left = m > 0 && t - m * seg < width;
            let right = m + 1 < workers && (m + 1) * seg - t <= width;
            if left || right {
                stats.border_updates += 1;
                stats.messages += u64::from(left) + u64::from(right);
            }
        }
        for m in 1..workers {
            if picks[m] - picks[m - 1] < width {
                stats.interfering_pairs += 1;
            }
        }
    }
    Ok(stats)
}

/// One applied update in a DICOD run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UpdateLogRow<F> {
    /// Scheduler round (stepped mode) or worker step (free-running mode).
    pub round: u64,
    pub worker: usize,
    pub k: usize,
    pub t: usize,
    pub old: F,
    pub new: F,
    pub interfering: bool,
}

pub const UPDATE_LOG_HEADER: &str = "round,worker,k,t,old,new,interfering";

pub fn write_update_log<F: Scalar, W: Write>(mut out: W, rows: &[UpdateLogRow<F>]) -> Result<()> {
    writeln!(out, "{UPDATE_LOG_HEADER}")?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.round,
            r.worker,
            r.k,
            r.t,
            r.old,
            r.new,
            u8::from(r.interfering)
        )?;
    }
    Ok(())
}

pub fn read_update_log<F: Scalar>(text: &str) -> Result<Vec<UpdateLogRow<F>>> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h.trim() == UPDATE_LOG_HEADER => {}
        _ => {
            return Err(CscError::Format(format!(
                "update log must start with `{UPDATE_LOG_HEADER}`"
            )))
        }
    }
    let bad =
        |n: usize, what: &str| CscError::Format(format!("update log line {}: bad {what}", n + 2));
    lines
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(n, line)| {
            let f: Vec<&str> = line.trim().split(',').collect();
            if f.len() != 7 {
                return Err(bad(n, "field count"));
            }
            let int = |i: usize, what: &str| f[i].parse::<u64>().map_err(|_| bad(n, what));
            let real =
                |i: usize, what: &str| f[i].parse::<f64>().map(F::lit).map_err(|_| bad(n, what));
            Ok(UpdateLogRow {
                round: int(0, "round")?,
                worker: int(1, "worker")? as usize,
                k: int(2, "k")? as usize,
                t: int(3, "t")? as usize,
                old: real(4, "old")?,
                new: real(5, "new")?,
                interfering: match f[6] {
                    "0" => false,
                    "1" => true,
                    _ => return Err(bad(n, "interfering flag")),
                },
            })
        })
        .collect()
}
