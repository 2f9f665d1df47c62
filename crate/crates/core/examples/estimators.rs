//! Streaming statistics and the goodness-of-fit helpers used by the
//! experiments, on synthetic data.

use coalflow::estimators::{bm_diagnostics, ks_statistic_sorted, ks_two_sample, StreamStats};
use coalflow::model::gaussian_stream;
use coalflow::oracles::normal_cdf;
use coalflow::{Purpose, RngSpec, StreamLabel};

fn main() -> coalflow::Result<()> {
    let spec = RngSpec::new(2);
    let a = gaussian_stream(&spec, StreamLabel::new(Purpose::GAUSSIAN, 0), 10_000);
    let b = gaussian_stream(&spec, StreamLabel::new(Purpose::GAUSSIAN, 1), 10_000);

    // Merging two halves equals one pass over everything.
    let whole = StreamStats::from_slice(&a);
    let merged = StreamStats::from_slice(&a[..3_000]).merge(&StreamStats::from_slice(&a[3_000..]));
    println!(
        "mean {:.5} / {:.5}, variance {:.5} / {:.5}",
        whole.mean(),
        merged.mean(),
        whole.variance(),
        merged.variance()
    );

    let mut sorted = a.clone();
    sorted.sort_by(|x, y| x.partial_cmp(y).unwrap());
    println!("one-sample KS vs N(0,1): {:.4}", ks_statistic_sorted(&sorted, normal_cdf));
    println!("two-sample KS: {:.4}", ks_two_sample(&a, &b)?);

    let incs: Vec<(f64, f64)> = a.iter().map(|&z| (0.1 * z, 0.01)).collect();
    let bm = bm_diagnostics(&incs)?;
    println!(
        "Brownian increments: var ratio {:.4}, lag-1 {:+.4}, passes {}",
        bm.var_ratio,
        bm.lag1_corr,
        bm.passes()
    );
    Ok(())
}
