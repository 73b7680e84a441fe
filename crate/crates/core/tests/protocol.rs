use proptest::prelude::*;

use coco_ef::harness::{Replication, TrialSetup};
use coco_ef::linalg;
use coco_ef::protocol::{
    device_step_cocoef, device_step_unbiased, encode_local, sample_stragglers, server_aggregate, MethodKind, Simulation,
};
use coco_ef::{AllocationMatrix, CompressorSpec, ExperimentConfig, LinearRegressionTask, MethodSpec, RandomStream};

fn biased(dim: usize) -> impl Strategy<Value = CompressorSpec> {
    prop_oneof![
        (1..=dim).prop_map(move |g| CompressorSpec::grouped_sign(dim, g).unwrap()),
        (1..=dim).prop_map(move |k| CompressorSpec::top_k(k, dim).unwrap()),
        Just(CompressorSpec::Identity),
    ]
}

fn vector(dim: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1e3f64..1e3, dim)
}

proptest! {
    #[test]
    fn error_feedback_conserves_input(
        spec in biased(10), g in vector(10), e in vector(10), gamma in 1e-6f64..1.0,
    ) {
        let (m, e_next) = device_step_cocoef(&g, &e, gamma, &spec, &mut RandomStream::new(0)).unwrap();
        let mut input = linalg::scale(gamma, &g);
        linalg::add_assign(&mut input, &e);
        let mut back = m.clone();
        linalg::add_assign(&mut back, &e_next);
        prop_assert!(linalg::relative_diff(&back, &input) <= 1e-12);
    }

    #[test]
    fn encoding_identity_holds(
        seed in any::<u64>(), n in 1usize..20, m in 1usize..20, dim in 1usize..8, p in 0.0f64..0.95,
    ) {
        let mut rng = RandomStream::new(seed);
        let reps: Vec<usize> = (0..m).map(|_| 1 + (rng.uniform() * n as f64) as usize).collect();
        let alloc = AllocationMatrix::uniform_random_heterogeneous(n, &reps, &mut rng).unwrap();
        let task = LinearRegressionTask::generate(m, dim, &mut rng).unwrap();
        let theta = rng.normal_vector(dim, 0.0, 1.0);
        let grads: Vec<_> = (0..m).map(|k| task.subset_gradient(k, &theta).unwrap()).collect();
        let mut total = vec![0.0; dim];
        for i in 0..n {
            let local: Vec<(usize, &[f64])> = alloc.subsets_of(i).into_iter().map(|k| (k, grads[k].as_slice())).collect();
            linalg::add_assign(&mut total, &encode_local(dim, &local, alloc.replication(), p).unwrap());
        }
        let lhs = linalg::scale(1.0 - p, &total);
        prop_assert!(linalg::relative_diff(&lhs, &task.full_gradient(&theta)) <= 1e-9);
    }

    #[test]
    fn virtual_iterate_recursion(seed in any::<u64>(), p in 0.0f64..0.9, k in 1usize..=6) {
        let cfg = ExperimentConfig {
            devices: 8,
            subsets: 6,
            dim: 6,
            replication: Replication::Uniform(2),
            p,
            method: MethodSpec::new(MethodKind::CocoEf, CompressorSpec::top_k(k, 6).unwrap()).unwrap(),
            seed,
            ..ExperimentConfig::default()
        };
        let s = TrialSetup::new(&cfg, 0).unwrap();
        let mut sim = Simulation::new(&s.task, &s.allocation, cfg.method.clone(), p, s.theta0.clone(), seed, 0).unwrap();
        for _ in 0..20 {
            let r = sim.step(1e-4).unwrap();
            prop_assert!(r.virtual_residual.unwrap() <= 1e-9);
        }
    }
}

fn setup(method: MethodSpec, devices: usize, d: usize, p: f64) -> (ExperimentConfig, TrialSetup) {
    let cfg = ExperimentConfig {
        devices,
        subsets: 10,
        dim: 6,
        replication: Replication::Uniform(d),
        p,
        method,
        seed: 5,
        ..ExperimentConfig::default()
    };
    let s = TrialSetup::new(&cfg, 0).unwrap();
    (cfg, s)
}

#[test]
fn all_straggler_round_changes_nothing() {
    let method = MethodSpec::new(MethodKind::CocoEf, CompressorSpec::sign(6).unwrap()).unwrap();
    let (cfg, s) = setup(method, 2, 1, 0.9);
    let mut sim = Simulation::new(&s.task, &s.allocation, cfg.method.clone(), cfg.p, s.theta0.clone(), 5, 0).unwrap();
    let mut empty_rounds = 0;
    for _ in 0..200 {
        let theta = sim.theta().to_vec();
        let errors = sim.errors();
        let report = sim.step(1e-4).unwrap();
        if report.responders == 0 {
            empty_rounds += 1;
            assert_eq!(sim.theta(), theta.as_slice());
            assert_eq!(sim.errors(), errors);
        }
    }
    assert!(empty_rounds > 100, "{empty_rounds}");
}

#[test]
fn coco_never_accumulates_error() {
    let method = MethodSpec::new(MethodKind::Coco, CompressorSpec::top_k(2, 6).unwrap()).unwrap();
    let (cfg, s) = setup(method, 8, 3, 0.3);
    let mut sim = Simulation::new(&s.task, &s.allocation, cfg.method.clone(), cfg.p, s.theta0.clone(), 5, 0).unwrap();
    for _ in 0..100 {
        sim.step(1e-4).unwrap();
        assert!(sim.errors().iter().flatten().all(|&v| v == 0.0));
    }
}

#[test]
fn uncompressed_matches_gradient_descent() {
    // full replication, no stragglers: every round is a full-batch step
    let (cfg, s) = setup(MethodSpec::uncompressed(), 5, 5, 0.0);
    let mut sim = Simulation::new(&s.task, &s.allocation, cfg.method.clone(), 0.0, s.theta0.clone(), 5, 0).unwrap();
    let mut theta = s.theta0.clone();
    let gamma = 1e-4;
    for _ in 0..200 {
        sim.step(gamma).unwrap();
        let g = s.task.full_gradient(&theta);
        linalg::axpy(-gamma, &g, &mut theta);
        assert!(linalg::relative_diff(sim.theta(), &theta) <= 1e-12);
    }
}

#[test]
fn unbiased_aggregate_is_unbiased() {
    let mut rng = RandomStream::new(17);
    let (n, m, dim, p) = (10, 10, 5, 0.3);
    let task = LinearRegressionTask::generate(m, dim, &mut rng).unwrap();
    let alloc = AllocationMatrix::uniform_random(n, m, 3, &mut rng).unwrap();
    let theta = rng.normal_vector(dim, 0.0, 1.0);
    let grads: Vec<_> = (0..m).map(|k| task.subset_gradient(k, &theta).unwrap()).collect();
    let coded: Vec<_> = (0..n)
        .map(|i| {
            let local: Vec<(usize, &[f64])> = alloc.subsets_of(i).into_iter().map(|k| (k, grads[k].as_slice())).collect();
            encode_local(dim, &local, alloc.replication(), p).unwrap()
        })
        .collect();
    let target = task.full_gradient(&theta);
    for spec in [CompressorSpec::StochasticSignBit, CompressorSpec::rand_k(2, dim).unwrap()] {
        let draws = 10_000;
        let mut sum = vec![0.0; dim];
        let mut sum_sq = vec![0.0; dim];
        for _ in 0..draws {
            let on = sample_stragglers(n, p, &mut rng);
            let msgs: Vec<_> = coded
                .iter()
                .zip(&on.indicators)
                .filter(|(_, &b)| b)
                .map(|(g, _)| device_step_unbiased(g, &spec, &mut rng).unwrap())
                .collect();
            let agg = server_aggregate(dim, &msgs).unwrap();
            for j in 0..dim {
                sum[j] += agg[j];
                sum_sq[j] += agg[j] * agg[j];
            }
        }
        let nd = draws as f64;
        for j in 0..dim {
            let mean = sum[j] / nd;
            let se = ((sum_sq[j] / nd - mean * mean) / nd).sqrt();
            assert!((mean - target[j]).abs() <= 4.0 * se, "{} coord {j}: {mean} vs {}", spec.name(), target[j]);
        }
    }
}
