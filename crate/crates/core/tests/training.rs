use hcspinn::ansatz::{Mode, TimeWindowPartition};
use hcspinn::network::NetworkConfig;
use hcspinn::problems::ProblemSpec;
use hcspinn::training::{
    initial_window, train_sequential, train_window, LossWeights, OptimizerSchedule, Phase, SamplingConfig,
    TimeInputPolicy, TrainConfig,
};

fn small_config(problem: &ProblemSpec, adam: usize, lbfgs: usize) -> TrainConfig {
    TrainConfig {
        network: NetworkConfig::new(2, 8, problem.spatial_input().unwrap()).unwrap(),
        sampling: SamplingConfig {
            n_pde_per_window: 200,
            batch_size: 32,
            eval_batch_size: 128,
            rng_seed: 7,
            full_batch: false,
            n_interface: 16,
        },
        schedule: OptimizerSchedule {
            adam_step: 5e-3,
            adam_iters: adam,
            lbfgs_max_iters: lbfgs,
            ..OptimizerSchedule::default()
        },
        weights: LossWeights {
            lambda_p: 1.0,
            lambda_i: 1.0,
            lambda_b: 0.0,
            causal_c_t: 10.0,
            causal_t_max: problem.horizon,
            causal_per_window: problem.is_ode(),
        },
        time_input: TimeInputPolicy::Raw,
        telemetry_every: 10,
    }
}

fn xs(problem: &ProblemSpec) -> Vec<f64> {
    match problem.spatial_domain {
        Some((a, b)) => (0..17).map(|i| a + (b - a) * i as f64 / 16.0).collect(),
        None => vec![0.0],
    }
}

#[test]
fn earlier_windows_stay_frozen() {
    let p = ProblemSpec::advection(30.0).unwrap();
    let part = TimeWindowPartition::new(0.0, 1.0, 3).unwrap();
    let cfg = small_config(&p, 20, 5);
    let mut w1 = initial_window(&p, &part, Mode::Hard, &cfg, 1, None).unwrap();
    train_window(&p, &mut w1, &cfg, &mut |_| {}).unwrap();
    let snapshot = w1.net.params.values().to_vec();
    let mut w2 = initial_window(&p, &part, Mode::Hard, &cfg, 2, Some(&w1)).unwrap();
    train_window(&p, &mut w2, &cfg, &mut |_| {}).unwrap();
    assert_eq!(w1.net.params.values(), &snapshot[..]);
    match &w2.predecessor {
        hcspinn::ansatz::Predecessor::Frozen(net) => assert_eq!(net.params.values(), &snapshot[..]),
        other => panic!("unexpected predecessor {other:?}"),
    }
}

#[test]
fn hard_runs_are_continuous_and_match_the_initial_data() {
    for p in [
        ProblemSpec::advection(30.0).unwrap(),
        ProblemSpec::wave(10.0).unwrap(),
        ProblemSpec::kdv().unwrap(),
        ProblemSpec::jerk().unwrap(),
    ] {
        let part = TimeWindowPartition::new(0.0, p.horizon, 4).unwrap();
        let mut cfg = small_config(&p, 10, 3);
        if p.is_ode() {
            cfg.sampling = SamplingConfig {
                n_pde_per_window: 64,
                batch_size: 64,
                eval_batch_size: 64,
                full_batch: true,
                ..cfg.sampling
            };
        }
        let out = train_sequential(&p, &part, Mode::Hard, &cfg).unwrap();
        assert!(out.failure.is_none(), "{}: {:?}", p.name(), out.failure);
        let m = p.required_continuity().m();
        let jumps = out.solution.interface_mismatch(&xs(&p), m).unwrap();
        assert_eq!(jumps.len(), 3);
        assert!(jumps.iter().all(|j| *j < 1e-10), "{}: {jumps:?}", p.name());
        assert!(out.solution.ic_error(&p, &xs(&p)).unwrap() < 1e-12, "{}", p.name());
    }
}

#[test]
fn untrained_runs_keep_the_construction_guarantees() {
    let p = ProblemSpec::wave(1.0).unwrap();
    let part = TimeWindowPartition::new(0.0, p.horizon, 10).unwrap();
    let out = train_sequential(&p, &part, Mode::Hard, &small_config(&p, 0, 0)).unwrap();
    assert_eq!(out.solution.windows.len(), 10);
    assert!(out.telemetry.is_empty());
    let jumps = out.solution.interface_mismatch(&xs(&p), 1).unwrap();
    assert!(jumps.iter().all(|j| *j < 1e-10), "{jumps:?}");
    assert!(out.solution.ic_error(&p, &xs(&p)).unwrap() < 1e-12);
}

#[test]
fn soft_runs_leave_visible_jumps() {
    let p = ProblemSpec::advection(30.0).unwrap();
    let part = TimeWindowPartition::new(0.0, 1.0, 2).unwrap();
    let out = train_sequential(&p, &part, Mode::Soft, &small_config(&p, 10, 0)).unwrap();
    let jumps = out.solution.interface_mismatch(&xs(&p), 0).unwrap();
    assert!(jumps[0] > 1e-8, "{jumps:?}");
}

#[test]
fn same_seed_same_parameters() {
    let p = ProblemSpec::allen_cahn().unwrap();
    let part = TimeWindowPartition::new(0.0, 1.0, 2).unwrap();
    let cfg = small_config(&p, 15, 5);
    let a = train_sequential(&p, &part, Mode::Hard, &cfg).unwrap();
    let b = train_sequential(&p, &part, Mode::Hard, &cfg).unwrap();
    for (x, y) in a.solution.windows.iter().zip(&b.solution.windows) {
        assert_eq!(x.net.params.values(), y.net.params.values());
    }
    let mut other = cfg;
    other.sampling.rng_seed = 8;
    let c = train_sequential(&p, &part, Mode::Hard, &other).unwrap();
    assert_ne!(a.solution.windows[0].net.params.values(), c.solution.windows[0].net.params.values());
}

#[test]
fn lbfgs_losses_never_increase() {
    let p = ProblemSpec::advection(30.0).unwrap();
    let part = TimeWindowPartition::new(0.0, 1.0, 2).unwrap();
    let mut cfg = small_config(&p, 30, 40);
    cfg.schedule.loss_tolerance = 1e-14;
    let out = train_sequential(&p, &part, Mode::Hard, &cfg).unwrap();
    for w in 1..=2 {
        let losses: Vec<f64> = out
            .telemetry
            .iter()
            .filter(|r| r.window == w && r.phase == Phase::Lbfgs)
            .map(|r| r.train_loss)
            .collect();
        assert!(!losses.is_empty());
        for pair in losses.windows(2) {
            assert!(pair[1] <= pair[0] + 1e-14, "window {w}: {pair:?}");
        }
    }
}

#[test]
fn mismatched_network_input_is_rejected() {
    let p = ProblemSpec::advection(30.0).unwrap();
    let part = TimeWindowPartition::new(0.0, 1.0, 2).unwrap();
    let cfg = small_config(&ProblemSpec::wave(1.0).unwrap(), 1, 0);
    assert!(train_sequential(&p, &part, Mode::Hard, &cfg).is_err());
}
