use std::panic::{self, AssertUnwindSafe};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError, Sender};
use std::sync::Barrier;
use std::thread;
use std::time::{Duration, Instant};

use super::termination::{ProbeReply, TerminationDetector};
use super::worker::{UpdateMessage, Worker};
use super::{collect_log, collect_stats, gather, plan, DicodConfig, DicodResult};
use crate::error::{CscError, Result};
use crate::scalar::Scalar;
use crate::signal::{cost, Dictionary, MultivariateSignal};
use crate::solvers::{SolveTrace, TracePoint};

enum Envelope<F> {
    Update(UpdateMessage<F>),
    Probe(u64),
    Shutdown,
}

enum Event {
    Reply(u64, ProbeReply),
    Failed(CscError),
}

/// Longest wait for a probe wave before the controller gives up.
const PROBE_TIMEOUT: Duration = Duration::from_secs(60);

struct Links<F> {
    inbox: Receiver<Envelope<F>>,
    left: Option<Sender<Envelope<F>>>,
    right: Option<Sender<Envelope<F>>>,
    events: Sender<Event>,
}

fn panic_reason(payload: Box<dyn std::any::Any + Send>) -> String {
    payload
        .downcast_ref::<&str>()
        .map(|s| s.to_string())
        .or_else(|| payload.downcast_ref::<String>().cloned())
        .unwrap_or_else(|| "panic".into())
}

/// Worker loop: drain the inbox, answer probes with the state reached after
/// consuming everything before them, then step. Blocks while paused.
fn worker_loop<F: Scalar>(worker: &mut Worker<'_, F>, links: &Links<F>, fail: bool) -> Result<()> {
    let mut batch = Vec::new();
    loop {
        let mut pending = Vec::new();
        if worker.is_paused() {
            match links.inbox.recv() {
                Ok(env) => pending.push(env),
                Err(_) => return Ok(()),
            }
        }
        pending.extend(links.inbox.try_iter());
        for env in pending {
            match env {
                Envelope::Update(msg) => batch.push(msg),
                Envelope::Probe(id) => {
                    worker.absorb(&batch)?;
                    batch.clear();
                    let _ = links.events.send(Event::Reply(id, worker.probe_reply()));
                }
                Envelope::Shutdown => return Ok(()),
            }
        }
        worker.absorb(&batch)?;
        batch.clear();
        if worker.is_paused() {
            continue;
        }
        if fail {
            panic!("injected failure");
        }
        let outcome = worker.step(&[])?;
        for (to, msg) in outcome.outbound {
            let link = if to < msg.sender {
                &links.left
            } else {
                &links.right
            };
            if let Some(tx) = link {
                let _ = tx.send(Envelope::Update(msg));
            }
        }
    }
}

/// Free-running DICOD: one scoped thread per worker, one FIFO channel per
/// worker inbox, and the calling thread as the probe controller.
pub(super) fn run<F: Scalar>(
    x: &MultivariateSignal<F>,
    dict: &Dictionary<F>,
    cfg: &DicodConfig<F>,
) -> Result<DicodResult<F>> {
    let start = Instant::now();
    let m_count = cfg.workers;
    let segments = plan(x, dict, cfg)?;

    let (txs, rxs): (Vec<_>, Vec<_>) = (0..m_count).map(|_| mpsc::channel::<Envelope<F>>()).unzip();
    let (event_tx, event_rx) = mpsc::channel();
    let barrier = Barrier::new(m_count + 1);

    let outcome = thread::scope(|scope| {
        let handles: Vec<_> = rxs
            .into_iter()
            .zip(&segments)
            .map(|(inbox, seg)| {
                let m = seg.m;
                let links = Links {
                    inbox,
                    left: (m > 0).then(|| txs[m - 1].clone()),
                    right: (m + 1 < m_count).then(|| txs[m + 1].clone()),
                    events: event_tx.clone(),
                };
                let seg = *seg;
                let barrier = &barrier;
                let fail = cfg.fail_worker == Some(m);
                scope.spawn(move || -> Option<Worker<'_, F>> {
                    let built = Worker::new(
                        seg,
                        m_count,
                        x,
                        dict,
                        cfg.lambda,
                        cfg.eps,
                        cfg.max_updates_per_worker,
                    );
                    barrier.wait();
                    let mut worker = match built {
                        Ok(w) => w,
                        Err(e) => {
                            let _ = links.events.send(Event::Failed(e));
                            return None;
                        }
                    };
                    match panic::catch_unwind(AssertUnwindSafe(|| {
                        worker_loop(&mut worker, &links, fail)
                    })) {
                        Ok(Ok(())) => Some(worker),
                        Ok(Err(e)) => {
                            let _ = links.events.send(Event::Failed(e));
                            None
                        }
                        Err(payload) => {
                            let _ = links.events.send(Event::Failed(CscError::WorkerFailure {
                                worker: m,
                                reason: panic_reason(payload),
                            }));
                            None
                        }
                    }
                })
            })
            .collect();
        drop(event_tx);

        barrier.wait();
        let warm = Instant::now();
        let result = control(&txs, &event_rx, m_count, cfg.probe_interval);
        let warm_seconds = warm.elapsed().as_secs_f64();
        for tx in &txs {
            let _ = tx.send(Envelope::Shutdown);
        }
        let workers: Vec<Option<Worker<'_, F>>> = handles
            .into_iter()
            .map(|h| h.join().unwrap_or(None))
            .collect();
        (result, workers, warm_seconds)
    });

    let (result, workers, warm_seconds) = outcome;
    let probes = result?;
    let workers: Vec<Worker<'_, F>> = workers
        .into_iter()
        .enumerate()
        .map(|(m, w)| {
            w.ok_or_else(|| CscError::WorkerFailure {
                worker: m,
                reason: "worker exited without its state".into(),
            })
        })
        .collect::<Result<_>>()?;
    let seconds = start.elapsed().as_secs_f64();

    let l = dict.code_len(x.len())?;
    let code = gather(&workers, dict.n_atoms(), l);
    let initial = F::lit(0.5) * x.sq_norm();
    let final_cost = cost(x, dict, &code, cfg.lambda)?;
    let updates: u64 = workers.iter().map(|w| w.stats().updates).sum();
    let evaluations = workers.iter().map(|w| w.stats().evaluations).sum();
    let rounds = workers.iter().map(|w| w.stats().updates).max().unwrap_or(0);
    let exhausted = workers.iter().any(Worker::exhausted);
    let final_max_dz = workers
        .iter()
        .map(Worker::local_max_dz)
        .fold(F::zero(), F::max);
    let log = if cfg.record_log {
        collect_log(&workers)
    } else {
        Vec::new()
    };
    let stats = collect_stats(&workers, rounds);
    Ok(DicodResult {
        code,
        trace: SolveTrace {
            iterations: updates as usize,
            trajectory: vec![
                TracePoint {
                    updates: 0,
                    seconds: 0.0,
                    cost: initial,
                },
                TracePoint {
                    updates: updates as usize,
                    seconds,
                    cost: final_cost,
                },
            ],
            final_max_dz,
            converged: !exhausted,
            evaluations,
            updates: Vec::new(),
        },
        stats,
        log,
        checkpoints: Vec::new(),
        terminations: probes,
        seconds,
        warm_seconds,
    })
}

/// Probe waves until the detector fires. Returns the number of firing waves.
fn control<F>(
    txs: &[Sender<Envelope<F>>],
    events: &Receiver<Event>,
    m_count: usize,
    interval: Duration,
) -> Result<usize> {
    let mut detector = TerminationDetector::new();
    let mut wave = 0u64;
    loop {
        wave += 1;
        for tx in txs {
            let _ = tx.send(Envelope::Probe(wave));
        }
        let mut replies: Vec<Option<ProbeReply>> = vec![None; m_count];
        let mut missing = m_count;
        let deadline = Instant::now() + PROBE_TIMEOUT;
        while missing > 0 {
            let timeout = deadline.saturating_duration_since(Instant::now());
            match events.recv_timeout(timeout) {
                Ok(Event::Reply(id, reply)) if id == wave => {
                    if replies[reply.worker].replace(reply).is_none() {
                        missing -= 1;
                    }
                }
                Ok(Event::Reply(..)) => {}
                Ok(Event::Failed(e)) => return Err(e),
                Err(RecvTimeoutError::Timeout) => {
                    return Err(CscError::WorkerFailure {
                        worker: replies.iter().position(Option::is_none).unwrap_or(0),
                        reason: "no probe reply".into(),
                    })
                }
                Err(RecvTimeoutError::Disconnected) => {
                    return Err(CscError::WorkerFailure {
                        worker: replies.iter().position(Option::is_none).unwrap_or(0),
                        reason: "event channel closed".into(),
                    })
                }
            }
        }
        let replies: Vec<ProbeReply> = replies.into_iter().flatten().collect();
        if detector.observe(&replies) {
            return Ok(detector.fired());
        }
        thread::sleep(interval);
    }
}
