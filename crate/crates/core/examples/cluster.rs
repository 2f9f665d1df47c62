//! Expected size of the cluster containing the particle started at 0, by the
//! pair-quadrature and fan estimators.

use coalflow::direct::{cluster_size_estimate, ClusterMethod};
use coalflow::oracles::{expected_cluster_size_linear, expected_cluster_size_ou};
use coalflow::{DriftModel, RngSpec};

fn main() -> coalflow::Result<()> {
    let model = DriftModel::Linear { c: 1.0 };
    let spec = RngSpec::new(8);
    for t in [0.04, 0.01] {
        for (method, reps) in [(ClusterMethod::PairQuadrature, 2_000), (ClusterMethod::Fan, 1_000)] {
            let e = cluster_size_estimate(&model, t, 50, reps, t / 200.0, &spec, method)?;
            println!("t = {t}, {method}: {:.5} ± {:.5}", e.value, e.stderr);
        }
        println!(
            "t = {t}: closed form {:.5}, OU clock {:.5}",
            expected_cluster_size_linear(1.0, t)?,
            expected_cluster_size_ou(1.0, t)?
        );
    }
    Ok(())
}
