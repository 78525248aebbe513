mod common;

use common::{problem, random_dict, rel, rng, Problem};
use dicod_core::dicod::{
    dicod_solve, interference_rate, partition, replay_log, DicodConfig, InterferenceStats,
    ScheduleMode, ScheduleScript, SteppedRunner, UpdateMessage, Worker,
};
use dicod_core::objective::{beta_init, delta_cost_pair};
use dicod_core::signal::{reconstruct, SparseCode};
use dicod_core::solvers::{greedy_cd, SolverConfig};
use dicod_core::CscError;
use rand::Rng;

fn medium() -> Problem {
    problem(404, 1200, 10, 3, 2, 0.02)
}

/// Strong activations straddling every border of an `m`-way partition, so
/// that neighbors keep updating close coordinates at the same time.
fn border_problem(seed: u64, m: usize) -> Problem {
    let mut r = rng(seed);
    let (t_len, w) = (800, 8);
    let dict = random_dict(&mut r, 2, w, 2);
    let l = t_len - w + 1;
    let mut z = SparseCode::zeros(2, l);
    for seg in partition(l, m, w).unwrap().iter().skip(1) {
        z.set(r.random_range(0..2), seg.start - 2, 8.0);
        z.set(r.random_range(0..2), seg.start + 1, -8.0);
    }
    let x = reconstruct(&dict, &z).unwrap();
    Problem {
        x,
        dict,
        z_true: z,
        lambda: 0.5,
    }
}

fn greedy_cost(pb: &Problem) -> f64 {
    greedy_cd(&pb.x, &pb.dict, &SolverConfig::greedy(pb.lambda))
        .unwrap()
        .1
        .final_cost()
}

#[test]
fn one_worker_reproduces_greedy_updates() {
    let pb = medium();
    let cfg = SolverConfig::greedy(pb.lambda).with_record_updates(true);
    let (z, greedy) = greedy_cd(&pb.x, &pb.dict, &cfg).unwrap();
    let res = dicod_solve(
        &pb.x,
        &pb.dict,
        &DicodConfig::stepped(pb.lambda, 1, 3, 1).with_record_log(true),
    )
    .unwrap();
    assert!(res.trace.converged);
    assert_eq!(res.log.len(), greedy.updates.len());
    for (row, upd) in res.log.iter().zip(&greedy.updates) {
        assert_eq!((row.k, row.t, row.new), (upd.k0, upd.t0, upd.new_value));
        assert!(!row.interfering);
    }
    assert_eq!(res.code, z);
    assert_eq!(res.stats.messages, 0);
}

#[test]
fn stepped_runs_agree_with_greedy_for_several_worker_counts() {
    let pb = medium();
    let e = greedy_cost(&pb);
    for (m, d_max) in [(2, 1), (4, 1), (4, 3), (8, 2)] {
        let res = dicod_solve(
            &pb.x,
            &pb.dict,
            &DicodConfig::stepped(pb.lambda, m, 11, d_max),
        )
        .unwrap();
        assert!(res.trace.converged, "M = {m}");
        assert_eq!(res.terminations, 1);
        assert!(res.trace.final_max_dz < 1e-6);
        assert!(
            rel(e, res.trace.final_cost()) < 1e-4,
            "M = {m}: {e} vs {}",
            res.trace.final_cost()
        );
        let fresh = beta_init(&pb.x, &pb.dict, &res.code).unwrap();
        let mut worst = 0.0f64;
        for k in 0..res.code.n_atoms() {
            for t in 0..res.code.len() {
                let target = fresh.target(k, t, pb.lambda, pb.dict.sq_norms());
                worst = worst.max((res.code.get(k, t as isize) - target).abs());
            }
        }
        assert!(worst < 1e-6, "M = {m}: gathered code is off by {worst}");
    }
}

#[test]
fn free_running_agrees_with_greedy() {
    let pb = medium();
    let e = greedy_cost(&pb);
    for m in [1, 3, 6] {
        let res = dicod_solve(&pb.x, &pb.dict, &DicodConfig::free_running(pb.lambda, m)).unwrap();
        assert!(res.trace.converged, "M = {m}");
        assert!(res.terminations >= 1);
        assert!(
            rel(e, res.trace.final_cost()) < 1e-4,
            "M = {m}: {e} vs {}",
            res.trace.final_cost()
        );
        assert!(res.warm_seconds <= res.seconds);
    }
}

#[test]
fn stepped_logs_are_deterministic() {
    let pb = medium();
    let cfg = DicodConfig::stepped(pb.lambda, 5, 77, 3).with_record_log(true);
    let a = dicod_solve(&pb.x, &pb.dict, &cfg).unwrap();
    let b = dicod_solve(&pb.x, &pb.dict, &cfg).unwrap();
    assert!(!a.log.is_empty());
    assert_eq!(a.log, b.log);
    assert_eq!(a.stats, b.stats);
    assert_eq!(a.code, b.code);
}

#[test]
fn messages_only_go_to_neighbors_about_border_coordinates() {
    let pb = medium();
    let w = pb.dict.width();
    let l = pb.dict.code_len(pb.x.len()).unwrap();
    let segs = partition(l, 4, w).unwrap();
    let mut workers: Vec<Worker<f64>> = segs
        .iter()
        .map(|s| Worker::new(*s, 4, &pb.x, &pb.dict, pb.lambda, 1e-6, u64::MAX).unwrap())
        .collect();
    let mut inboxes: Vec<Vec<UpdateMessage<f64>>> = vec![Vec::new(); 4];
    let mut updates = 0;
    let mut messages = 0;
    for _ in 0..400 {
        let mut next: Vec<Vec<UpdateMessage<f64>>> = vec![Vec::new(); 4];
        for (m, worker) in workers.iter_mut().enumerate() {
            let out = worker.step(&std::mem::take(&mut inboxes[m])).unwrap();
            let Some(applied) = out.update else {
                assert!(out.outbound.is_empty());
                continue;
            };
            updates += 1;
            assert!(out.outbound.len() <= 2);
            let seg = worker.segment();
            for (to, msg) in out.outbound {
                messages += 1;
                assert_eq!(to.abs_diff(m), 1);
                assert_eq!(
                    (msg.k0, msg.t0, msg.sender),
                    (applied.update.k0, applied.update.t0, m)
                );
                let dist = if to < m {
                    msg.t0 - seg.start
                } else {
                    seg.end - msg.t0
                };
                assert!(
                    dist < w,
                    "t0 = {} is {dist} away from the shared border",
                    msg.t0
                );
                next[to].push(msg);
            }
        }
        inboxes = next;
    }
    assert!(updates > 100);
    assert!(messages > 0);
}

#[test]
fn non_neighbor_message_is_a_protocol_violation() {
    let pb = medium();
    let l = pb.dict.code_len(pb.x.len()).unwrap();
    let segs = partition(l, 4, pb.dict.width()).unwrap();
    let new_worker =
        |m: usize| Worker::new(segs[m], 4, &pb.x, &pb.dict, pb.lambda, 1e-6, u64::MAX).unwrap();
    let msg = |sender, t0, seq| UpdateMessage {
        k0: 0,
        t0,
        delta: 1.0,
        sender,
        seq,
        seen: 0,
    };

    let mut w0 = new_worker(0);
    assert!(matches!(
        w0.step(&[msg(2, segs[0].end, 1)]),
        Err(CscError::Protocol(_))
    ));
    let mut w1 = new_worker(1);
    assert!(matches!(
        w1.step(&[msg(1, segs[1].start, 1)]),
        Err(CscError::Protocol(_))
    ));
    let mut w1 = new_worker(1);
    assert!(matches!(
        w1.step(&[msg(0, segs[1].end, 1)]),
        Err(CscError::Protocol(_))
    ));
    let mut w1 = new_worker(1);
    assert!(matches!(
        w1.step(&[msg(0, segs[0].end, 2)]),
        Err(CscError::Protocol(_))
    ));
    let mut w1 = new_worker(1);
    assert!(w1.step(&[msg(0, segs[0].end, 1)]).is_ok());

    let cfg = DicodConfig::stepped(pb.lambda, 4, 0, 1);
    let mut runner = SteppedRunner::new(&pb.x, &pb.dict, &cfg).unwrap();
    runner.inject(3, msg(0, segs[0].end, 1));
    assert!(matches!(runner.round(), Err(CscError::Protocol(_))));
}

#[test]
fn injected_failures_surface_as_worker_failure() {
    let pb = medium();
    for schedule in [
        ScheduleMode::Stepped { d_max: 2 },
        ScheduleMode::FreeRunning,
    ] {
        let mut cfg = DicodConfig::new(
            pb.lambda,
            3,
            ScheduleScript {
                seed: 1,
                mode: schedule,
            },
        );
        cfg.fail_worker = Some(1);
        match dicod_solve(&pb.x, &pb.dict, &cfg) {
            Err(CscError::WorkerFailure { worker, .. }) => assert_eq!(worker, 1),
            other => panic!("{schedule:?}: expected a worker failure, got {other:?}"),
        }
    }
}

#[test]
fn too_many_workers_is_a_config_error() {
    let pb = medium();
    let err =
        dicod_solve(&pb.x, &pb.dict, &DicodConfig::stepped(pb.lambda, 200, 0, 1)).unwrap_err();
    assert!(matches!(err, CscError::Config(_)));
    let err = dicod_solve(&pb.x, &pb.dict, &DicodConfig::stepped(pb.lambda, 0, 0, 1)).unwrap_err();
    assert!(matches!(err, CscError::Config(_)));
}

#[test]
fn non_interfering_logs_replay_sequentially() {
    let mut replayed = 0;
    for seed in 0..12 {
        let pb = problem(900 + seed, 1200, 10, 3, 2, 0.02);
        let cfg = DicodConfig::stepped(pb.lambda, 4, seed, 1).with_record_log(true);
        let res = dicod_solve(&pb.x, &pb.dict, &cfg).unwrap();
        if res.log.iter().any(|r| r.interfering) {
            continue;
        }
        let report = replay_log(&pb.x, &pb.dict, pb.lambda, &res.log).unwrap();
        let scale = res.log.iter().map(|r| r.new.abs()).fold(1.0f64, f64::max);
        assert!(
            report.max_target_gap <= 1e-12 * scale,
            "seed {seed}: {}",
            report.max_target_gap
        );
        assert!(report.max_old_gap <= 1e-12 * scale);
        assert_eq!(report.code, res.code);
        replayed += 1;
    }
    assert!(replayed > 0);
}

/// With one-round delays every update sees all earlier rounds, so the cost drop of a
/// round is the sum of single gains plus one correction per close pair.
#[test]
fn round_cost_changes_match_single_and_pair_formulas() {
    let mut checked = 0;
    let mut pairs = 0;
    for seed in 0..5 {
        let pb = border_problem(seed, 6);
        let cfg = DicodConfig::stepped(pb.lambda, 6, seed, 1);
        let mut runner = SteppedRunner::new(&pb.x, &pb.dict, &cfg).unwrap();
        let w = pb.dict.width();
        let mut before = runner.cost().unwrap();
        while runner.rounds() < 5000 && !runner.detect() {
            let report = runner.round().unwrap();
            let after = runner.cost().unwrap();
            let drop = before - after;
            before = after;
            if report.updates.is_empty() {
                continue;
            }
            let mut predicted: f64 = report.updates.iter().map(|(_, a)| a.gain).sum();
            for (i, (_, a)) in report.updates.iter().enumerate() {
                for (_, b) in &report.updates[i + 1..] {
                    if a.update.t0.abs_diff(b.update.t0) < w {
                        let pair = delta_cost_pair(
                            &a.update,
                            &b.update,
                            pb.dict.cross_corr(),
                            a.gain,
                            b.gain,
                        )
                        .unwrap();
                        predicted += pair - a.gain - b.gain;
                        pairs += 1;
                    }
                }
            }
            assert!(
                (drop - predicted).abs() <= 1e-9 * after.abs().max(1.0),
                "{drop} vs {predicted}"
            );
            checked += 1;
        }
    }
    assert!(checked > 10);
    assert!(pairs > 0);
}

#[test]
fn interference_rate_examples() {
    let stats = InterferenceStats {
        interfering_pairs: 6,
        rounds: 100,
        ..Default::default()
    };
    let r = interference_rate(&stats, 4, 0.01);
    assert!((r.observed - 0.02).abs() < 1e-15);
    assert!((r.predicted - 0.0016).abs() < 1e-15);
    let r = interference_rate(&stats, 1, 0.01);
    assert_eq!(r.observed, 0.0);
    let empty = InterferenceStats::default();
    assert_eq!(interference_rate(&empty, 4, 0.01).observed, 0.0);
}

#[test]
fn partition_examples() {
    let segs = partition(10, 3, 3).unwrap();
    let bounds: Vec<_> = segs.iter().map(|s| (s.start, s.end)).collect();
    assert_eq!(bounds, vec![(0, 3), (4, 6), (7, 9)]);
    assert!(segs.iter().all(|s| s.halo == 2));
    assert!(partition(10, 4, 3).is_err());
    assert!(partition(10, 0, 3).is_err());
}

#[test]
fn checkpoints_are_ordered_by_round() {
    let pb = medium();
    let res = dicod_solve(
        &pb.x,
        &pb.dict,
        &DicodConfig::stepped(pb.lambda, 4, 2, 1).with_log_every(1),
    )
    .unwrap();
    assert!(res.checkpoints.len() > 10);
    for pair in res.checkpoints.windows(2) {
        assert!(pair[1].round > pair[0].round);
        assert!(pair[1].critical_evaluations >= pair[0].critical_evaluations);
    }
    let target = res.trace.final_cost() + 1.0;
    let hit = res.checkpoint_reaching(target).unwrap();
    assert!(hit.cost <= target);
}
