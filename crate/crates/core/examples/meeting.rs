//! Pair meeting times from the direct simulator compared with the exact laws.

use coalflow::direct::meeting_samples;
use coalflow::estimators::ks_against_cdf;
use coalflow::oracles::{meeting_cdf_zero_drift, meeting_survival_linear, meeting_survival_ou};
use coalflow::{DriftModel, RngSpec};

fn main() -> coalflow::Result<()> {
    let spec = RngSpec::new(1);
    let s = meeting_samples(0.0, 0.5, &DriftModel::Zero, 1.0, 1e-3, &spec, 20_000)?;
    let ks = ks_against_cdf(&s, |t| meeting_cdf_zero_drift(0.5, t), 1.0);
    println!(
        "zero drift: meet {:.4} vs {:.4} (z {:+.2}), KS {:.4}",
        ks.atom.empirical,
        ks.atom.oracle,
        ks.atom.z,
        ks.statistic.unwrap()
    );

    for c in [-1.0, 0.5] {
        let s = meeting_samples(0.0, 0.5, &DriftModel::Linear { c }, 1.0, 1e-3, &spec, 20_000)?;
        let surv = s.iter().filter(|m| !m.met).count() as f64 / s.len() as f64;
        println!(
            "C = {c:+}: P(tau > 1) empirical {surv:.4}, root-two clock {:.4}, OU clock {:.4}",
            meeting_survival_linear(c, 0.0, 0.5, 1.0)?,
            meeting_survival_ou(c, 0.0, 0.5, 1.0)?
        );
    }
    Ok(())
}
