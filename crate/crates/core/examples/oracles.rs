//! Closed-form and quadrature oracles: the meeting clock, survival laws, the
//! coalescence defect `l(t, u)` and the expected cluster size.

use coalflow::oracles::{
    expected_cluster_size_linear, expected_cluster_size_ou, expected_cluster_size_quadrature, l_defect, l_defect_hitting_route,
    l_upper_bound, meeting_cdf_zero_drift, meeting_survival_linear, meeting_survival_ou, phi_c, TimeChange,
};

fn main() -> coalflow::Result<()> {
    println!("phi_C(1) for C = 0.5: {:.12}", phi_c(0.5, 1.0)?);
    println!("zero drift, gap 0.5: P(meet by 1) = {:.6}", meeting_cdf_zero_drift(0.5, 1.0));
    for c in [-1.0, 0.5] {
        println!(
            "C = {c:+}: P(tau > 1) root-two clock {:.6}, OU clock {:.6}",
            meeting_survival_linear(c, 0.0, 0.5, 1.0)?,
            meeting_survival_ou(c, 0.0, 0.5, 1.0)?
        );
    }
    for u in [0.1, 0.5, 1.0] {
        println!(
            "l(1, {u}) = {:.10} (hitting route {:.10}, bound {:.4})",
            l_defect(1.0, u)?,
            l_defect_hitting_route(1.0, u)?,
            l_upper_bound(1.0, u)?
        );
    }
    for t in [0.04, 0.01, 0.0025] {
        let closed = expected_cluster_size_linear(1.0, t)?;
        let quad = expected_cluster_size_quadrature(TimeChange::RootTwoRate, 1.0, t)?;
        println!(
            "E nu_{t}: closed form {closed:.6}, quadrature {quad:.6}, OU clock {:.6}, ratio to sqrt t {:.4}",
            expected_cluster_size_ou(1.0, t)?,
            closed / t.sqrt()
        );
    }
    Ok(())
}
