use mtsvm::data::{generate_synthetic, split_train_test, SyntheticSpec};
use mtsvm::federation::{
    aggregate, calibrate_t_wait, participant_rng, run, run_global_baseline, run_local_baseline,
    run_simulation, write_trace_csv, DelayModel, Mode, SimConfig, Simulation, Stream,
};
use mtsvm::masking::MaskSpec;
use mtsvm::solver::{apply_global, sweep, ParticipantState};
use mtsvm::{Hyperparams, Problem, TaskData};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn dataset(problem: Problem, k: usize, n: usize, d: usize, seed: u64) -> (Vec<TaskData>, Vec<TaskData>) {
    let spec = SyntheticSpec {
        problem,
        num_tasks: k,
        n_per_task: n,
        d,
        feature_mean_range: (-1.0, 1.0),
        feature_std_range: (0.5, 1.5),
        task_component_scale: 0.5,
        snr_db: 20.0,
        class_separation: 2.0,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data = generate_synthetic(&spec, &mut rng).unwrap();
    data.tasks
        .iter()
        .map(|t| split_train_test(t, 0.7, problem, &mut rng).unwrap())
        .unzip()
}

fn config(problem: Problem, k: usize, seed: u64) -> SimConfig {
    let mut c = SimConfig::new(Mode::Mtl, problem, Hyperparams::new(1.0, 0.05, 0.1).unwrap(), k, seed);
    c.max_epochs = 30;
    c.sum_time = 1e-6;
    c
}

#[test]
fn aggregate_adds_updates() {
    let w = aggregate(&[1.0, 1.0], &[vec![0.5, 0.0], vec![0.0, 0.5]]).unwrap();
    assert_eq!(w, vec![1.5, 1.5]);
    assert_eq!(aggregate(&[1.0, 2.0], &[]).unwrap(), vec![1.0, 2.0]);
    assert!(aggregate(&[1.0], &[vec![1.0, 2.0]]).is_err());
}

#[test]
fn identical_configs_give_identical_traces() {
    let (train, test) = dataset(Problem::Classification, 5, 40, 4, 1);
    let mut c = config(Problem::Classification, 5, 9);
    c.mask = MaskSpec::beta(2.0, 0.5, 0.25);
    let t_wait = calibrate_t_wait(&c.delays, &[28; 5], 4, 0.5, 10_000, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
    c.t_wait = t_wait;
    let a = run_simulation(&c, &train, &test).unwrap();
    let b = run_simulation(&c, &train, &test).unwrap();
    assert_eq!(a, b);
    let (mut ca, mut cb) = (Vec::new(), Vec::new());
    write_trace_csv(&a, &mut ca).unwrap();
    write_trace_csv(&b, &mut cb).unwrap();
    assert_eq!(ca, cb);
}

#[test]
fn epochs_respect_the_window_and_partition_participants() {
    let (train, test) = dataset(Problem::Regression, 6, 30, 3, 2);
    let mut c = config(Problem::Regression, 6, 3);
    c.delays = (0..6).map(|k| DelayModel::default().with_hw_factor(1.0 + k as f64)).collect();
    c.t_wait = calibrate_t_wait(&c.delays, &[21; 6], 3, 0.5, 10_000, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
    let trace = run_simulation(&c, &train, &test).unwrap();
    let mut prev = 0.0;
    for e in &trace.epochs {
        assert!(e.virtual_time > prev);
        assert!(e.virtual_time - prev <= c.t_wait + c.sum_time + 1e-15);
        prev = e.virtual_time;
        assert!(e.responders.windows(2).all(|p| p[0] < p[1]));
        assert!(e.responders.iter().all(|id| trace.task_ids.contains(id)));
        assert_eq!(e.responder_fraction, e.responders.len() as f64 / 6.0);
    }
}

#[test]
fn unbounded_window_hears_everyone() {
    let (train, test) = dataset(Problem::Classification, 4, 20, 3, 3);
    let trace = run_simulation(&config(Problem::Classification, 4, 1), &train, &test).unwrap();
    assert!(trace.epochs.iter().all(|e| e.responders.len() == 4));
}

#[test]
fn window_below_deterministic_delay_freezes_w() {
    let (train, test) = dataset(Problem::Classification, 3, 20, 3, 4);
    let mut c = config(Problem::Classification, 3, 1);
    c.delays = vec![DelayModel { sigma_ratio: 0.0, ..DelayModel::default() }; 3];
    c.t_wait = 0.5 * c.delays[0].mean(14, 3);
    let mut sim = Simulation::new(&c, &train, &test).unwrap();
    while let Some(e) = sim.step().unwrap() {
        assert!(e.responders.is_empty());
        assert!(sim.coordinator_w().iter().all(|&x| x == 0.0));
    }
    assert!(sim.participants().iter().any(|p| p.v.iter().any(|&x| x != 0.0)));
}

#[test]
fn calibrated_window_hits_target_fraction() {
    let (train, test) = dataset(Problem::Classification, 20, 20, 3, 5);
    let mut c = config(Problem::Classification, 20, 21);
    c.max_epochs = 200;
    let sizes: Vec<usize> = train.iter().map(TaskData::n).collect();
    c.t_wait = calibrate_t_wait(&c.delays, &sizes, 3, 0.45, 10_000, &mut ChaCha8Rng::seed_from_u64(2)).unwrap();
    let trace = run_simulation(&c, &train, &test).unwrap();
    assert!((trace.mean_responder_fraction() - 0.45).abs() <= 0.05, "{}", trace.mean_responder_fraction());
}

#[test]
fn longer_windows_never_lose_responders() {
    let (train, test) = dataset(Problem::Regression, 8, 20, 3, 6);
    let mut c = config(Problem::Regression, 8, 4);
    let sizes: Vec<usize> = train.iter().map(TaskData::n).collect();
    let mut previous: Option<Vec<Vec<usize>>> = None;
    for rho in [0.1, 0.3, 0.5, 0.8, 1.0] {
        c.t_wait = calibrate_t_wait(&c.delays, &sizes, 3, rho, 10_000, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        let sets: Vec<Vec<usize>> = run_simulation(&c, &train, &test).unwrap().epochs.into_iter().map(|e| e.responders).collect();
        if let Some(prev) = &previous {
            for (small, large) in prev.iter().zip(&sets) {
                assert!(small.iter().all(|k| large.contains(k)));
            }
        }
        previous = Some(sets);
    }
}

fn round_robin_reference(problem: Problem) {
    let k = 4;
    let (train, test) = dataset(problem, k, 25, 3, 7);
    let mut c = config(problem, k, 11);
    c.delays = vec![DelayModel::instant(); k];
    let mut sim = Simulation::new(&c, &train, &test).unwrap();
    let mut states: Vec<ParticipantState> = train.iter().map(|t| ParticipantState::zeros(problem, t)).collect();
    let mut rngs: Vec<ChaCha8Rng> = (0..k).map(|j| participant_rng(11, Stream::Order, j)).collect();
    let mut w = vec![0.0; 3];
    while sim.step().unwrap().is_some() {
        let mut updates = Vec::new();
        for j in 0..k {
            apply_global(&mut states[j], &w).unwrap();
            updates.push(sweep(&mut states[j], &train[j], &c.params, &mut rngs[j]).unwrap().delta_w);
        }
        w = aggregate(&w, &updates).unwrap();
        for s in &mut states {
            apply_global(s, &w).unwrap();
        }
        assert_eq!(sim.coordinator_w(), &w[..]);
        assert_eq!(sim.participants(), &states[..]);
    }
}

#[test]
fn matches_round_robin_reference_classification() {
    round_robin_reference(Problem::Classification);
}

#[test]
fn matches_round_robin_reference_regression() {
    round_robin_reference(Problem::Regression);
}

#[test]
fn single_participant_coordinator_tracks_local_solver() {
    let (train, test) = dataset(Problem::Classification, 1, 40, 3, 8);
    let c = config(Problem::Classification, 1, 5);
    let mut sim = Simulation::new(&c, &train, &test).unwrap();
    let mut state = ParticipantState::zeros(Problem::Classification, &train[0]);
    let mut rng = participant_rng(5, Stream::Order, 0);
    while sim.step().unwrap().is_some() {
        sweep(&mut state, &train[0], &c.params, &mut rng).unwrap();
        assert_eq!(sim.coordinator_w(), &state.w[..]);
    }
}

#[test]
fn global_baseline_is_the_pooled_limit() {
    let (train, test) = dataset(Problem::Regression, 3, 20, 3, 9);
    let c = config(Problem::Regression, 3, 6);
    let global = run_global_baseline(&c, &train, &test).unwrap();
    let pooled = vec![TaskData::pool(0, &train).unwrap()];
    let mut mtl = config(Problem::Regression, 1, 6);
    mtl.params.c2 = 1e9;
    let mut sim = Simulation::new(&mtl, &pooled, &[TaskData::pool(0, &test).unwrap()]).unwrap();
    while sim.step().unwrap().is_some() {}
    let p = &sim.participants()[0];
    let g = &global.final_models[0];
    for (a, b) in p.w.iter().zip(&g.w) {
        assert!((a - b).abs() <= 1e-6);
    }
    assert_eq!(global.epochs.len(), sim.model_state().epoch);
}

#[test]
fn local_baseline_with_one_task_equals_mtl() {
    let (train, test) = dataset(Problem::Classification, 1, 30, 3, 10);
    let c = config(Problem::Classification, 1, 7);
    let local = run_local_baseline(&c, &train, &test).unwrap();
    let mtl = run_simulation(&c, &train, &test).unwrap();
    assert_eq!(local.final_models, mtl.final_models);
    let metrics = |t: &mtsvm::federation::SimTrace| t.epochs.iter().map(|e| e.task_metrics.clone()).collect::<Vec<_>>();
    assert_eq!(metrics(&local), metrics(&mtl));
}

#[test]
fn unit_bernoulli_mask_is_bit_identical() {
    let (train, test) = dataset(Problem::Regression, 4, 25, 3, 11);
    let plain = config(Problem::Regression, 4, 8);
    let mut masked = plain.clone();
    masked.mask = MaskSpec::bernoulli(1.0);
    let a = run_simulation(&plain, &train, &test).unwrap();
    let b = run_simulation(&masked, &train, &test).unwrap();
    assert_eq!(a.epochs, b.epochs);
    assert_eq!(a.final_models, b.final_models);
}

#[test]
fn invalid_configurations_are_rejected() {
    let (train, test) = dataset(Problem::Classification, 2, 10, 2, 12);
    let mut c = config(Problem::Classification, 2, 1);
    c.t_wait = 0.0;
    assert!(run(&c, &train, &test).is_err());
    let mut c = config(Problem::Classification, 2, 1);
    c.delays.pop();
    assert!(run(&c, &train, &test).is_err());
    let mut c = config(Problem::Classification, 2, 1);
    c.delays = vec![DelayModel::instant(); 2];
    c.sum_time = 0.0;
    assert!(run(&c, &train, &test).is_err());
    assert!(run(&config(Problem::Classification, 2, 1), &train, &test[..1]).is_err());
}

#[test]
fn stops_after_three_quiet_epochs() {
    let x = TaskData::from_rows(0, &[vec![1.0, 0.0], vec![-1.0, 0.0]], vec![1.0, -1.0]).unwrap();
    let mut c = config(Problem::Classification, 1, 1);
    c.params = Hyperparams::new(10.0, 1.0, 0.0).unwrap();
    c.stop_tolerance = 1e-12;
    c.max_epochs = 100;
    let trace = run(&c, std::slice::from_ref(&x), std::slice::from_ref(&x)).unwrap();
    assert!(trace.converged);
    assert!(trace.epochs.len() < 100);
    let tail = &trace.epochs[trace.epochs.len() - 3..];
    assert!(tail.iter().all(|e| e.update_norm <= 1e-12));
}

#[test]
fn masking_breaks_the_shared_representation_only() {
    let (train, test) = dataset(Problem::Classification, 2, 30, 3, 13);
    let mut c = config(Problem::Classification, 2, 4);
    c.mask = MaskSpec::beta(2.0, 0.5, 0.0);
    c.max_epochs = 5;
    let mut sim = Simulation::new(&c, &train, &test).unwrap();
    while sim.step().unwrap().is_some() {}
    let state = sim.model_state();
    let (w, v) = mtsvm::oracle::reconstruct_weights(&state.duals, &train, &c.params);
    for (a, b) in v.iter().flatten().zip(state.v.iter().flatten()) {
        assert!((a - b).abs() <= 1e-9);
    }
    let gap = w.iter().zip(sim.coordinator_w()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    assert!(gap > 1e-3);
}
