use coalflow::estimators::StreamStats;
use coalflow::parallel::map_replicas;
use coalflow::splitting::{jump_bound_check, trotter_simulate};
use coalflow::{DriftModel, Partition, Purpose, RngSpec, StreamLabel};
use proptest::prelude::*;

#[test]
fn linear_drift_mean_regression() {
    // Noise is centred, so E X_1 = u e^{C (N-1)/N}: N - 1 exact drift maps.
    let spec = RngSpec::new(11);
    let (u, c) = (0.7, 0.8);
    for n in [2usize, 4, 8] {
        let part = Partition::uniform(n).unwrap();
        let vals = map_replicas(8_000, |i| {
            let rng = spec.stream(StreamLabel::new(Purpose::TROTTER.indexed(n as u64), i));
            trotter_simulate(&[u], &part, &DriftModel::Linear { c }, 1.0 / 256.0, rng)
                .unwrap()
                .terminal(0)
        });
        let s = StreamStats::from_slice(&vals);
        let target = u * (c * (n - 1) as f64 / n as f64).exp();
        assert!((s.mean() - target).abs() <= 4.0 * s.stderr(), "N = {n}: {} vs {target}", s.mean());
    }
}

#[test]
fn zero_drift_has_no_jumps() {
    let part = Partition::uniform(8).unwrap();
    let rng = RngSpec::new(5).stream(StreamLabel::new(Purpose::TROTTER, 0));
    let rec = trotter_simulate(&[-0.2, 0.0, 0.6], &part, &DriftModel::Zero, 1.0 / 128.0, rng).unwrap();
    for p in 0..3 {
        assert!(rec.jumps[p].iter().all(|&j| j == 0.0));
        assert_eq!(rec.x[p], rec.m[p]);
    }
}

#[test]
fn partition_points_are_on_the_grid() {
    let part = Partition::new(vec![0.0, 0.1, 0.35, 1.0]).unwrap();
    let rng = RngSpec::new(5).stream(StreamLabel::new(Purpose::TROTTER, 1));
    let rec = trotter_simulate(&[0.0], &part, &DriftModel::Cosine, 1.0 / 64.0, rng).unwrap();
    for (k, &t) in part.breakpoints().iter().enumerate() {
        assert_eq!(rec.times[rec.partition_index[k]], t);
    }
    assert!(jump_bound_check(&rec, &DriftModel::Cosine).iter().all(|&b| b));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn order_and_jump_bound(
        mut starts in prop::collection::vec(-1.5f64..1.5, 1..5),
        n in 1usize..12,
        scale in -2.0f64..2.0,
        seed in any::<u64>(),
    ) {
        starts.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let part = Partition::uniform(n).unwrap();
        for model in [DriftModel::Cosine, DriftModel::ScaledTanh { scale }, DriftModel::Linear { c: scale }] {
            let rng = RngSpec::new(seed).stream(StreamLabel::new(Purpose::TROTTER, 0));
            let rec = trotter_simulate(&starts, &part, &model, 1.0 / 128.0, rng).unwrap();
            for j in 0..rec.times.len() {
                for p in 1..starts.len() {
                    prop_assert!(rec.x[p - 1][j] <= rec.x[p][j]);
                }
            }
            prop_assert!(jump_bound_check(&rec, &model).iter().all(|&b| b));
        }
    }
}
