//! Correlation decay of the web: the sum over a grid of starting points
//! shrinks as the grid refines, tracking its exact expectation.

use coalflow::estimators::prop1_sum_estimate;
use coalflow::oracles::prop1_expectation;
use coalflow::RngSpec;

fn main() -> coalflow::Result<()> {
    let spec = RngSpec::new(4);
    for n in [4usize, 16, 64] {
        let e = prop1_sum_estimate(n, 0.25, 0.75, 0.5, 5_000, 1.0 / 256.0, &spec)?;
        let exact = prop1_expectation(n, 0.25, 0.75, 0.5)?;
        println!("n = {n:>2}: {:.4} ± {:.4} (exact {exact:.4})", e.value, e.stderr);
    }
    Ok(())
}
