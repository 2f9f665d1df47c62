//! Closed forms and quadrature ground truth.
//!
//! Everything here is a pure function. Where two routes to the same number
//! exist (density vs. hitting-time form of `l(t, u)`, closed form vs. 2-D
//! quadrature of the cluster expectation) both are exposed so callers can
//! check one against the other.
//!
//! Two time changes appear for the linear drift `a(u) = C u`:
//!
//! * [`TimeChange::RootTwoRate`]: `(1 - e^{-2√2 C t}) / (2√2 C)`, the clock
//!   behind the widely quoted closed form of the meeting law ([`phi_c`],
//!   [`meeting_survival_linear`]).
//! * [`TimeChange::OrnsteinUhlenbeck`]: `(1 - e^{-2 C t}) / (2 C)`. The gap of
//!   two unit-diffusion particles satisfies `dD = C D dt + √2 dβ`, so `D/√2` is
//!   an OU process with rate `C` and this is the clock of its driving
//!   martingale. Simulations agree with this one.
//!
//! Both reduce to `t` at `C = 0`.

use std::f64::consts::{FRAC_1_SQRT_2, PI, SQRT_2};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Settings for [`adaptive_simpson`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuadratureConfig {
    pub abs_tol: f64,
    pub max_depth: u32,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        QuadratureConfig {
            abs_tol: 1e-10,
            max_depth: 48,
        }
    }
}

impl QuadratureConfig {
    pub fn with_tol(abs_tol: f64) -> Self {
        QuadratureConfig {
            abs_tol,
            ..Default::default()
        }
    }
}

/// Adaptive Simpson quadrature of `f` over `[a, b]` with Richardson
/// correction. Fails if the recursion depth is exhausted before the local
/// error estimate drops below its share of the tolerance.
pub fn adaptive_simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, cfg: QuadratureConfig) -> Result<f64> {
    if !(cfg.abs_tol > 0.0) {
        return Err(Error::invalid("quadrature tolerance must be positive"));
    }
    if a == b {
        return Ok(0.0);
    }
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson_step(&f, a, b, fa, fm, fb, whole, cfg.abs_tol, cfg.max_depth)
}

#[allow(clippy::too_many_arguments)]
fn simpson_step<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> Result<f64> {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if delta.abs() <= 15.0 * tol {
        return Ok(left + right + delta / 15.0);
    }
    if depth == 0 {
        return Err(Error::Quadrature(format!("no convergence on [{a}, {b}] (local error {delta:e})")));
    }
    let l = simpson_step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)?;
    let r = simpson_step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)?;
    Ok(l + r)
}

/// Integrates over consecutive panels `[edges[i], edges[i+1]]`, splitting
/// the tolerance evenly.
fn panel_simpson<F: Fn(f64) -> f64>(f: &F, edges: &[f64], abs_tol: f64) -> Result<f64> {
    let panels = edges.len().saturating_sub(1).max(1);
    let cfg = QuadratureConfig::with_tol(abs_tol / panels as f64);
    edges.windows(2).map(|w| adaptive_simpson(f, w[0], w[1], cfg)).sum()
}

/// Standard normal CDF `Φ(x)`.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x * FRAC_1_SQRT_2)
}

/// Upper tail `1 - Φ(x)` without cancellation.
pub fn normal_sf(x: f64) -> f64 {
    0.5 * libm::erfc(x * FRAC_1_SQRT_2)
}

fn check_nonneg_time(t: f64) -> Result<()> {
    if !(t >= 0.0) || !t.is_finite() {
        return Err(Error::invalid(format!("time must be finite and >= 0, got {t}")));
    }
    Ok(())
}

fn check_pos_time(t: f64) -> Result<()> {
    if !(t > 0.0) || !t.is_finite() {
        return Err(Error::invalid(format!("time must be finite and > 0, got {t}")));
    }
    Ok(())
}

/// Deterministic clock turning the linear-drift gap into a time-changed
/// Brownian motion.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TimeChange {
    /// `∫_0^t e^{-2√2 C s} ds`.
    RootTwoRate,
    /// `∫_0^t e^{-2 C s} ds`.
    OrnsteinUhlenbeck,
}

impl TimeChange {
    fn rate(self, c: f64) -> f64 {
        match self {
            TimeChange::RootTwoRate => 2.0 * SQRT_2 * c,
            TimeChange::OrnsteinUhlenbeck => 2.0 * c,
        }
    }

    /// The clock at time `t`; `t` itself when `c = 0`.
    pub fn eval(self, c: f64, t: f64) -> f64 {
        let k = self.rate(c);
        if k == 0.0 {
            return t;
        }
        -(-k * t).exp_m1() / k
    }

    /// Limit of the clock as `t → ∞` (infinite unless `c > 0`).
    pub fn limit(self, c: f64) -> f64 {
        if c > 0.0 {
            1.0 / self.rate(c)
        } else {
            f64::INFINITY
        }
    }
}

/// `φ_C(t) = (1 - e^{-2√2 C t}) / (2√2 C)`.
///
/// `C = 0` is rejected; the zero-drift limit is `t` and is available through
/// [`TimeChange::eval`].
pub fn phi_c(c: f64, t: f64) -> Result<f64> {
    if c == 0.0 || !c.is_finite() {
        return Err(Error::invalid("phi_C needs a finite nonzero C; use t for C = 0"));
    }
    check_nonneg_time(t)?;
    Ok(TimeChange::RootTwoRate.eval(c, t))
}

/// `P{τ > t}` for a time-changed Brownian motion started at `u = (u2 - u1)/√2`
/// with the given clock: `√(2/π) ∫_0^{u/√φ(t)} e^{-v²/2} dv`.
pub fn meeting_survival_with(clock: TimeChange, c: f64, u1: f64, u2: f64, t: f64) -> Result<f64> {
    if u1 > u2 {
        return Err(Error::invalid("meeting survival needs u1 <= u2"));
    }
    check_pos_time(t)?;
    let u = (u2 - u1) * FRAC_1_SQRT_2;
    let phi = clock.eval(c, t);
    Ok(libm::erf(u / (2.0 * phi).sqrt()))
}

/// Survival of the meeting time under `a(u) = C u` in the closed form built
/// on [`phi_c`] (the zero-drift law when `C = 0`).
pub fn meeting_survival_linear(c: f64, u1: f64, u2: f64, t: f64) -> Result<f64> {
    meeting_survival_with(TimeChange::RootTwoRate, c, u1, u2, t)
}

/// Survival of the meeting time under `a(u) = C u` for the OU gap.
pub fn meeting_survival_ou(c: f64, u1: f64, u2: f64, t: f64) -> Result<f64> {
    meeting_survival_with(TimeChange::OrnsteinUhlenbeck, c, u1, u2, t)
}

/// Zero-drift meeting CDF from the reflection principle:
/// `P{τ ≤ t} = 2(1 - Φ(gap/√(2t)))`.
pub fn meeting_cdf_zero_drift(gap: f64, t: f64) -> f64 {
    if t <= 0.0 {
        return if gap <= 0.0 { 1.0 } else { 0.0 };
    }
    2.0 * normal_sf(gap / (2.0 * t).sqrt())
}

/// `P{τ = ∞}` under `a(u) = C u`: the `t → ∞` limit of the survival. Zero
/// when `C ≤ 0` (the clock diverges and the particles meet a.s.).
pub fn meeting_never_prob_with(clock: TimeChange, c: f64, u1: f64, u2: f64) -> Result<f64> {
    if u1 > u2 {
        return Err(Error::invalid("meeting probability needs u1 <= u2"));
    }
    if !(c > 0.0) {
        return Ok(0.0);
    }
    let u = (u2 - u1) * FRAC_1_SQRT_2;
    Ok(libm::erf(u / (2.0 * clock.limit(c)).sqrt()))
}

/// `√(2/π) ∫_0^{u √(2√2 C)} e^{-v²/2} dv`.
pub fn meeting_never_prob_linear(c: f64, u1: f64, u2: f64) -> Result<f64> {
    meeting_never_prob_with(TimeChange::RootTwoRate, c, u1, u2)
}

/// Coalescence defect `l(t, u) = E (t - τ) 1{τ ≤ t}` for two coalescing
/// Brownian motions started `u` apart, by quadrature of the hitting-time
/// density `u s^{-3/2} e^{-u²/(4s)} / (2√π)` against `(t - s)`.
///
/// `l(t, 0) = t` (immediate coalescence). For `u < 1e-3` the substitution
/// `s = u²/(4v²)` removes the spike at the origin.
pub fn l_defect(t: f64, u: f64) -> Result<f64> {
    check_pos_time(t)?;
    if !(u >= 0.0) {
        return Err(Error::invalid("l(t, u) needs u >= 0"));
    }
    if u == 0.0 {
        return Ok(t);
    }
    let tol = QuadratureConfig::default().abs_tol;
    if u < 1e-3 {
        // 2/√π ∫_{u/(2√t)}^∞ (t - u²/(4v²)) e^{-v²} dv
        let v0 = u / (2.0 * t.sqrt());
        let f = |v: f64| {
            if v <= 0.0 {
                return 0.0;
            }
            (t - u * u / (4.0 * v * v)) * (-v * v).exp() * 2.0 / PI.sqrt()
        };
        let mut edges = vec![v0];
        let mut e = v0;
        for step in [0.05, 0.1, 0.25, 0.5, 1.0, 2.0, 4.0, 8.0, 16.0, 30.0] {
            if step > e {
                e = step;
                edges.push(e);
            }
        }
        return panel_simpson(&f, &edges, tol);
    }
    let dens = |s: f64| {
        if s <= 0.0 {
            return 0.0;
        }
        (t - s) * u * s.powf(-1.5) / (2.0 * PI.sqrt()) * (-u * u / (4.0 * s)).exp()
    };
    panel_simpson(&dens, &dyadic_edges(t, u), tol)
}

/// Second route to `l(t, u)`: `∫_0^t P{τ ≤ s} ds` with
/// `P{τ ≤ s} = 2(1 - Φ(u/√(2s)))`.
pub fn l_defect_hitting_route(t: f64, u: f64) -> Result<f64> {
    check_pos_time(t)?;
    if !(u >= 0.0) {
        return Err(Error::invalid("l(t, u) needs u >= 0"));
    }
    if u == 0.0 {
        return Ok(t);
    }
    let cdf = |s: f64| if s <= 0.0 { 0.0 } else { meeting_cdf_zero_drift(u, s) };
    panel_simpson(&cdf, &dyadic_edges(t, u), QuadratureConfig::default().abs_tol)
}

/// Antiderivative form of the hitting route:
/// `(t + u²/2) erfc(u/(2√t)) - u √t e^{-u²/(4t)} / √π`.
pub fn l_defect_closed_form(t: f64, u: f64) -> f64 {
    let u = u.abs();
    if u == 0.0 {
        return t;
    }
    let z = u / (2.0 * t.sqrt());
    (t + 0.5 * u * u) * libm::erfc(z) - u * t.sqrt() * (-z * z).exp() / PI.sqrt()
}

/// Panel edges `0, t/2^K, ..., t/2, t`, stopping where `e^{-u²/(4s)}`
/// underflows.
fn dyadic_edges(t: f64, u: f64) -> Vec<f64> {
    let floor = u * u / 3000.0;
    let mut edges = vec![t];
    let mut s = t;
    while s > floor && edges.len() < 200 {
        s *= 0.5;
        edges.push(s);
    }
    edges.push(0.0);
    edges.reverse();
    edges
}

/// `K = sup_{s∈(0,1]} e^{-1/(4s)} s^{-3/2} / (2√π)`, attained at `s = 1/6`.
pub fn l_bound_constant() -> f64 {
    (-1.5f64).exp() * 6f64.powf(1.5) / (2.0 * PI.sqrt())
}

/// `t² u^{-2} K`, an upper bound on `l(t, u)`.
pub fn l_upper_bound(t: f64, u: f64) -> Result<f64> {
    check_nonneg_time(t)?;
    if !(u > 0.0) {
        return Err(Error::invalid("l upper bound needs u > 0"));
    }
    Ok(t * t / (u * u) * l_bound_constant())
}

/// `E ν_t` for `a(u) = C u` with the given clock, closed form.
///
/// With `ψ = 2 φ(t)` (the factor 2 is the `1/√2` in the gap substitution):
/// `√(2/π) √ψ (1 - e^{-1/(2ψ)}) + 2(1 - Φ(1/√ψ))`. This is exactly
/// `∫_0^1 (1 - survival(0, r, t)) dr`.
pub fn expected_cluster_size_with(clock: TimeChange, c: f64, t: f64) -> Result<f64> {
    check_pos_time(t)?;
    let psi = 2.0 * clock.eval(c, t);
    let root = psi.sqrt();
    Ok((2.0 / PI).sqrt() * root * -(-0.5 / psi).exp_m1() + 2.0 * normal_sf(1.0 / root))
}

/// `E ν_t` under `a(u) = C u`, consistent with [`meeting_survival_linear`].
pub fn expected_cluster_size_linear(c: f64, t: f64) -> Result<f64> {
    if c == 0.0 {
        return Err(Error::invalid("expected_cluster_size_linear needs C != 0"));
    }
    expected_cluster_size_with(TimeChange::RootTwoRate, c, t)
}

/// `E ν_t` under `a(u) = C u` with the OU clock.
pub fn expected_cluster_size_ou(c: f64, t: f64) -> Result<f64> {
    expected_cluster_size_with(TimeChange::OrnsteinUhlenbeck, c, t)
}

/// Second route to `E ν_t`: nested quadrature of
/// `∫_0^1 dr (1 - √(2/π) ∫_0^{r/√(2φ)} e^{-v²/2} dv)` with no special
/// functions.
pub fn expected_cluster_size_quadrature(clock: TimeChange, c: f64, t: f64) -> Result<f64> {
    check_pos_time(t)?;
    let phi = clock.eval(c, t);
    let scale = (2.0 * phi).sqrt();
    let norm = (2.0 / PI).sqrt();
    let inner_cfg = QuadratureConfig::with_tol(1e-13);
    let gauss = |v: f64| (-0.5 * v * v).exp();
    // 1 - survival, integrated over whichever side is shorter
    let miss = |r: f64| -> f64 {
        let upper = r / scale;
        if upper <= 1.0 {
            1.0 - norm * adaptive_simpson(gauss, 0.0, upper, inner_cfg).unwrap_or(f64::NAN)
        } else if upper < 40.0 {
            norm * adaptive_simpson(gauss, upper, 40.0, inner_cfg).unwrap_or(f64::NAN)
        } else {
            0.0
        }
    };
    let mut edges = vec![0.0];
    let mut r = 0.0;
    while r < 1.0 && edges.len() < 400 {
        r = (r + 0.25 * scale).min(1.0);
        edges.push(r);
    }
    if *edges.last().unwrap() < 1.0 {
        edges.push(1.0);
    }
    let value = panel_simpson(&miss, &edges, 1e-11)?;
    if !value.is_finite() {
        return Err(Error::Quadrature("inner integral failed".into()));
    }
    Ok(value)
}

/// Exact `E Σ_k φ_{k/n,(k+1)/n}(0) φ_{s,t}(r)` for coalescing Brownian
/// motions, when `s` and `t` are multiples of `1/n`.
///
/// Only intervals inside `[s, t]` contribute; each contributes
/// `E l(1/n, |Z|)` with `Z ~ N(r, k/n - s)` the position at `k/n` of the
/// particle born at `(r, s)`.
pub fn prop1_expectation(n: usize, s: f64, t: f64, r: f64) -> Result<f64> {
    if n == 0 {
        return Err(Error::invalid("n must be >= 1"));
    }
    if !(0.0 <= s && s <= t) {
        return Err(Error::invalid("need 0 <= s <= t"));
    }
    let nf = n as f64;
    let (ks, kt) = ((s * nf).round(), (t * nf).round());
    if (ks - s * nf).abs() > 1e-9 || (kt - t * nf).abs() > 1e-9 {
        return Err(Error::invalid("exact expectation is implemented for s and t on the 1/n grid"));
    }
    let h = 1.0 / nf;
    let mut total = 0.0;
    for k in (ks as usize)..(kt as usize).min(n) {
        let var = k as f64 / nf - s;
        if var <= 0.0 {
            total += l_defect_closed_form(h, r);
            continue;
        }
        let sd = var.sqrt();
        let pdf = |z: f64| {
            let x = (z - r) / sd;
            (-0.5 * x * x).exp() / (sd * (2.0 * PI).sqrt())
        };
        let f = |z: f64| l_defect_closed_form(h, z) * pdf(z);
        let (lo, hi) = (r - 12.0 * sd, r + 12.0 * sd);
        let mut edges = vec![lo, hi];
        let w = h.sqrt();
        for m in [0.0, 1.0, 2.0, 4.0, 8.0, 16.0] {
            for z in [m * w, -m * w] {
                if z > lo && z < hi {
                    edges.push(z);
                }
            }
        }
        edges.sort_by(|a, b| a.partial_cmp(b).unwrap());
        edges.dedup();
        total += panel_simpson(&f, &edges, 1e-12)?;
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;

    // Independent reference: composite Gauss-Legendre (20-point) on many
    // panels, no adaptivity shared with the code under test.
    fn gauss_legendre<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, panels: usize) -> f64 {
        const X: [f64; 10] = [
            0.076_526_521_133_497_33,
            0.227_785_851_141_645_08,
            0.373_706_088_715_419_56,
            0.510_867_001_950_827_1,
            0.636_053_680_726_515,
            0.746_331_906_460_150_8,
            0.839_116_971_822_218_8,
            0.912_234_428_251_326,
            0.963_971_927_277_913_8,
            0.993_128_599_185_094_9,
        ];
        const W: [f64; 10] = [
            0.152_753_387_130_725_85,
            0.149_172_986_472_603_75,
            0.142_096_109_318_382_05,
            0.131_688_638_449_176_63,
            0.118_194_531_961_518_42,
            0.101_930_119_817_240_43,
            0.083_276_741_576_704_75,
            0.062_672_048_334_109_06,
            0.040_601_429_800_386_94,
            0.017_614_007_139_152_12,
        ];
        let h = (b - a) / panels as f64;
        let mut total = 0.0;
        for p in 0..panels {
            let lo = a + p as f64 * h;
            let mid = lo + 0.5 * h;
            for i in 0..10 {
                let dx = 0.5 * h * X[i];
                total += 0.5 * h * W[i] * (f(mid - dx) + f(mid + dx));
            }
        }
        total
    }

    #[test]
    fn simpson_polynomial_and_errors() {
        let v = adaptive_simpson(|x| x * x * x - 2.0 * x, 0.0, 2.0, QuadratureConfig::default()).unwrap();
        assert!((v - 0.0).abs() < 1e-12);
        let v = adaptive_simpson(f64::sin, 0.0, PI, QuadratureConfig::default()).unwrap();
        assert!((v - 2.0).abs() < 1e-10);
        assert!(adaptive_simpson(|x| x, 0.0, 1.0, QuadratureConfig::with_tol(0.0)).is_err());
        let nasty = adaptive_simpson(
            |x: f64| if x > 0.0 { x.powf(-0.9) } else { 0.0 },
            0.0,
            1.0,
            QuadratureConfig {
                abs_tol: 1e-14,
                max_depth: 8,
            },
        );
        assert!(matches!(nasty, Err(Error::Quadrature(_))));
    }

    #[test]
    fn normal_cdf_values() {
        assert_eq!(normal_cdf(0.0), 0.5);
        // Φ(1.96) from the series Φ(x) = 1/2 + φ(x) Σ x^{2k+1}/(1·3·...·(2k+1))
        let x: f64 = 1.96;
        let mut term = x;
        let mut sum = x;
        for k in 1..200 {
            term *= x * x / (2 * k + 1) as f64;
            sum += term;
        }
        let series = 0.5 + (-0.5 * x * x).exp() / (2.0 * PI).sqrt() * sum;
        assert!((normal_cdf(1.96) - series).abs() < 1e-13);
        assert!((normal_cdf(1.96) - 0.975_002_104_851_780).abs() < 1e-12);
        for i in -80..=80 {
            let x = i as f64 * 0.1;
            assert!((normal_cdf(-x) - (1.0 - normal_cdf(x))).abs() < 1e-15);
        }
    }

    #[test]
    fn phi_c_values() {
        assert_eq!(phi_c(0.7, 0.0).unwrap(), 0.0);
        assert!((phi_c(1e-8, 0.5).unwrap() - 0.5).abs() < 1e-7);
        let closed = phi_c(0.5, 1.0).unwrap();
        let expect = FRAC_1_SQRT_2 * (1.0 - (-SQRT_2).exp());
        assert!((closed - expect).abs() < 1e-15);
        assert!((closed - 0.535_197_289_648_185_6).abs() < 1e-15);
        let quad = adaptive_simpson(|s| (-SQRT_2 * s).exp(), 0.0, 1.0, QuadratureConfig::default()).unwrap();
        assert!((closed - quad).abs() < 1e-10);
        assert!(phi_c(0.0, 1.0).is_err());
        assert!(phi_c(1.0, -1.0).is_err());
    }

    #[test]
    fn phi_c_tends_to_t_as_c_vanishes() {
        for &c in &[1e-3, 1e-5, 1e-7] {
            let worst = (0..=100)
                .map(|i| i as f64 / 100.0)
                .map(|t| (phi_c(c, t).unwrap() - t).abs())
                .fold(0.0, f64::max);
            assert!(worst <= 2.0 * SQRT_2 * c, "c = {c}: {worst}");
        }
    }

    #[test]
    fn survival_examples() {
        assert_eq!(meeting_survival_linear(0.5, 0.3, 0.3, 1.0).unwrap(), 0.0);
        assert!((meeting_survival_linear(0.5, 0.0, 0.5, 1e-8).unwrap() - 1.0).abs() < 1e-12);
        // quadrature route: √(2/π)∫_0^{u/√φ} e^{-v²/2}dv with φ_C(1) from phi_c
        let upper = 0.5 * FRAC_1_SQRT_2 / phi_c(0.5, 1.0).unwrap().sqrt();
        let quad = (2.0 / PI).sqrt() * adaptive_simpson(|v| (-0.5 * v * v).exp(), 0.0, upper, QuadratureConfig::with_tol(1e-13)).unwrap();
        let closed = meeting_survival_linear(0.5, 0.0, 0.5, 1.0).unwrap();
        assert!((closed - quad).abs() < 1e-10);
        assert!((closed - 0.371_10).abs() < 5e-5, "{closed}");
        assert!(meeting_survival_linear(0.5, 1.0, 0.0, 1.0).is_err());
        assert!(meeting_survival_linear(0.5, 0.0, 1.0, 0.0).is_err());
        // C = 0 is the reflection-principle law
        let z = meeting_survival_linear(0.0, 0.0, 0.5, 1.0).unwrap();
        assert!((1.0 - z - meeting_cdf_zero_drift(0.5, 1.0)).abs() < 1e-14);
        assert!((meeting_cdf_zero_drift(0.5, 1.0) - 0.723_674).abs() < 1e-5);
    }

    #[test]
    fn ou_survival_value() {
        // OU clock at C = 0.5, t = 1 is 1 - e^{-1}
        let s = meeting_survival_ou(0.5, 0.0, 0.5, 1.0).unwrap();
        let expect = libm::erf(0.5 * FRAC_1_SQRT_2 / (2.0 * (1.0 - (-1.0f64).exp())).sqrt());
        assert!((s - expect).abs() < 1e-15);
        assert!((s - 0.343_45).abs() < 5e-5);
    }

    #[test]
    fn survival_monotone() {
        for &c in &[-1.0, 0.0, 0.5, 2.0] {
            let mut prev = f64::INFINITY;
            for i in 1..=50 {
                let t = i as f64 * 0.04;
                let v = meeting_survival_linear(c, 0.0, 0.5, t).unwrap();
                assert!(v <= prev);
                prev = v;
            }
            let mut prev = -1.0;
            for i in 0..=50 {
                let v = meeting_survival_linear(c, 0.0, i as f64 * 0.05, 0.7).unwrap();
                assert!(v >= prev);
                prev = v;
            }
        }
    }

    #[test]
    fn never_meet_probability() {
        assert_eq!(meeting_never_prob_linear(1.0, 0.2, 0.2).unwrap(), 0.0);
        assert_eq!(meeting_never_prob_linear(0.0, 0.0, 1.0).unwrap(), 0.0);
        assert_eq!(meeting_never_prob_linear(-2.0, 0.0, 1.0).unwrap(), 0.0);
        // t → ∞ limit of the survival
        let lim = meeting_never_prob_linear(0.5, 0.0, 0.5).unwrap();
        let far = meeting_survival_linear(0.5, 0.0, 0.5, 60.0).unwrap();
        assert!((lim - far).abs() < 1e-12);
        let mut prev_c = 0.0;
        for i in 1..=40 {
            let v = meeting_never_prob_linear(i as f64 * 0.1, 0.0, 0.5).unwrap();
            assert!(v > prev_c);
            prev_c = v;
        }
        let mut prev_u = 0.0;
        for i in 1..=40 {
            let v = meeting_never_prob_linear(0.5, 0.0, i as f64 * 0.05).unwrap();
            assert!(v > prev_u);
            prev_u = v;
        }
    }

    #[test]
    fn l_defect_limits() {
        assert_eq!(l_defect(0.7, 0.0).unwrap(), 0.7);
        assert_eq!(l_defect_hitting_route(0.7, 0.0).unwrap(), 0.7);
        assert!(l_defect(1.0, 50.0).unwrap() < 1e-12);
        let mut prev = 1.0;
        for i in 1..=30 {
            let v = l_defect(1.0, i as f64 * 0.2).unwrap();
            assert!(v < prev && v <= 1.0);
            prev = v;
        }
        assert!(l_defect(0.0, 1.0).is_err());
        assert!(l_defect(1.0, -1.0).is_err());
    }

    #[test]
    fn l_defect_routes_agree() {
        let ts = [0.05, 0.25, 0.5, 1.0, 2.0];
        let us = [1e-4, 5e-3, 0.3, 1.0, 3.0];
        for &t in &ts {
            for &u in &us {
                let a = l_defect(t, u).unwrap();
                let b = l_defect_hitting_route(t, u).unwrap();
                let c = l_defect_closed_form(t, u);
                assert!((a - b).abs() <= 1e-8, "t={t} u={u}: {a} vs {b}");
                assert!((b - c).abs() <= 1e-9, "t={t} u={u}: {b} vs {c}");
            }
        }
    }

    #[test]
    fn l_defect_against_gauss_legendre() {
        let (t, u) = (1.0, 1.0);
        let reference = gauss_legendre(
            |s| {
                if s <= 0.0 {
                    0.0
                } else {
                    (t - s) * u * s.powf(-1.5) / (2.0 * PI.sqrt()) * (-u * u / (4.0 * s)).exp()
                }
            },
            0.0,
            t,
            400,
        );
        assert!((l_defect(t, u).unwrap() - reference).abs() < 1e-10);
    }

    #[test]
    fn bound_constant_is_the_maximum() {
        let g = |s: f64| (-1.0 / (4.0 * s)).exp() * s.powf(-1.5) / (2.0 * PI.sqrt());
        // golden-section search on (0, 1]
        let (mut a, mut b) = (1e-3, 1.0);
        let r = (5f64.sqrt() - 1.0) / 2.0;
        for _ in 0..200 {
            let c = b - r * (b - a);
            let d = a + r * (b - a);
            if g(c) > g(d) {
                b = d;
            } else {
                a = c;
            }
        }
        let s_star = 0.5 * (a + b);
        assert!((s_star - 1.0 / 6.0).abs() < 1e-6);
        assert!((g(s_star) - l_bound_constant()).abs() < 1e-12);
        assert!((l_bound_constant() - 0.9251).abs() < 1e-4);
    }

    #[test]
    fn l_below_both_bounds() {
        for i in 1..=10 {
            for j in 1..=10 {
                let t = i as f64 * 0.1;
                let u = j as f64 * 0.3;
                let l = l_defect(t, u).unwrap();
                assert!(l <= t);
                assert!(l <= l_upper_bound(t, u).unwrap());
            }
        }
        // the bound blows up as u → 0 while l → t
        assert!(l_upper_bound(1.0, 1e-3).unwrap() > 1e5);
        assert!(l_upper_bound(1.0, 0.0).is_err());
    }

    #[test]
    fn cluster_closed_form_matches_quadrature() {
        for &t in &[0.01, 0.1, 1.0] {
            for &c in &[-1.0, 0.5, 2.0] {
                let closed = expected_cluster_size_linear(c, t).unwrap();
                let quad = expected_cluster_size_quadrature(TimeChange::RootTwoRate, c, t).unwrap();
                assert!((closed - quad).abs() <= 1e-8, "t={t} c={c}: {closed} vs {quad}");
                assert!(closed > 0.0 && closed < 1.0);
                let ou = expected_cluster_size_ou(c, t).unwrap();
                let ou_quad = expected_cluster_size_quadrature(TimeChange::OrnsteinUhlenbeck, c, t).unwrap();
                assert!((ou - ou_quad).abs() <= 1e-8);
            }
        }
    }

    #[test]
    fn cluster_small_time_ratio() {
        // E ν_t ~ √(2 φ(t)) √(2/π) = 2 √(t/π) as t → 0
        let t = 1e-6;
        let ratio = expected_cluster_size_linear(1.0, t).unwrap() / t.sqrt();
        assert!((ratio - 2.0 / PI.sqrt()).abs() < 1e-3, "{ratio}");
    }

    #[test]
    fn cluster_monotone_in_t() {
        for &c in &[-1.0, 1.0, 3.0] {
            let mut prev = 0.0;
            for i in 1..=100 {
                let v = expected_cluster_size_linear(c, i as f64 * 0.01).unwrap();
                assert!(v >= prev);
                prev = v;
            }
        }
        assert!(expected_cluster_size_linear(0.0, 1.0).is_err());
        assert!(expected_cluster_size_linear(1.0, 0.0).is_err());
    }

    #[test]
    fn prop1_expectation_values() {
        // n = 1, r = 0, s = 0, t = 1: E φ_{0,1}(0)^2 = 1
        assert!((prop1_expectation(1, 0.0, 1.0, 0.0).unwrap() - 1.0).abs() < 1e-12);
        let e4 = prop1_expectation(4, 0.25, 0.75, 0.5).unwrap();
        let e16 = prop1_expectation(16, 0.25, 0.75, 0.5).unwrap();
        let e64 = prop1_expectation(64, 0.25, 0.75, 0.5).unwrap();
        assert!(e4 > e16 && e16 > e64 && e64 > 0.0);
        // values from an independent scipy nested-quad evaluation
        assert!((e4 - 0.15453).abs() < 2e-4, "{e4}");
        assert!((e64 - 0.03793).abs() < 1e-4, "{e64}");
        assert!(prop1_expectation(3, 0.25, 0.75, 0.5).is_err());
        assert!(prop1_expectation(4, 0.75, 0.25, 0.5).is_err());
    }
}
