//! Monte Carlo statistics.
//!
//! Streaming moments ([`StreamStats`]), Kolmogorov–Smirnov tests that
//! respect the atom at `+∞` in meeting-time samples, Brownian-motion
//! diagnostics for martingale increments, and two web experiments: the
//! correlation-decay sum and the product-moment defect.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Purpose, RngSpec, StreamLabel};
use crate::parallel::try_map_replicas;
use crate::web::{run_with_births, Birth, MeetingSample, WebEngine};

/// Count, mean and sum of squared deviations (Welford), mergeable with
/// Chan's pairwise formula.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct StreamStats {
    pub n: u64,
    pub mean: f64,
    pub m2: f64,
}

impl StreamStats {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_slice(xs: &[f64]) -> Self {
        let mut s = Self::new();
        xs.iter().for_each(|&x| s.update(x));
        s
    }

    pub fn update(&mut self, x: f64) {
        self.n += 1;
        let d = x - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (x - self.mean);
    }

    pub fn merge(&self, other: &StreamStats) -> StreamStats {
        if self.n == 0 {
            return *other;
        }
        if other.n == 0 {
            return *self;
        }
        let n = self.n + other.n;
        let d = other.mean - self.mean;
        let (na, nb, nf) = (self.n as f64, other.n as f64, n as f64);
        StreamStats {
            n,
            mean: self.mean + d * nb / nf,
            m2: self.m2 + other.m2 + d * d * na * nb / nf,
        }
    }

    pub fn count(&self) -> u64 {
        self.n
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Unbiased sample variance (0 for fewer than two points).
    pub fn variance(&self) -> f64 {
        if self.n < 2 {
            0.0
        } else {
            self.m2 / (self.n - 1) as f64
        }
    }

    pub fn stderr(&self) -> f64 {
        if self.n == 0 {
            0.0
        } else {
            (self.variance() / self.n as f64).sqrt()
        }
    }
}

pub fn stats_update(mut s: StreamStats, x: f64) -> StreamStats {
    s.update(x);
    s
}

pub fn stats_merge(a: &StreamStats, b: &StreamStats) -> StreamStats {
    a.merge(b)
}

/// Replica mean and its standard error.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimateResult {
    pub value: f64,
    pub stderr: f64,
    pub reps: u64,
}

impl EstimateResult {
    pub fn from_stats(s: &StreamStats) -> Self {
        EstimateResult {
            value: s.mean(),
            stderr: s.stderr(),
            reps: s.count(),
        }
    }

    /// `(value - target) / stderr`.
    pub fn z(&self, target: f64) -> f64 {
        (self.value - target) / self.stderr
    }
}

/// Meet fraction versus the oracle's meet probability at the horizon.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AtomComparison {
    pub empirical: f64,
    pub oracle: f64,
    pub z: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KsResult {
    /// KS distance of the met-conditioned sample; `None` when nothing met.
    pub statistic: Option<f64>,
    pub n: usize,
    pub n_met: usize,
    pub atom: AtomComparison,
}

impl KsResult {
    pub fn passes(&self, d_max: f64, z_max: f64) -> bool {
        self.statistic.is_some_and(|d| d <= d_max) && self.atom.z.abs() <= z_max
    }
}

/// 1% critical value of the one-sample KS statistic, `1.63 / √n`.
pub fn ks_critical_1pct(n: usize) -> f64 {
    1.628 / (n as f64).sqrt()
}

/// One-sample KS distance of sorted `xs` against `cdf`.
pub fn ks_statistic_sorted<F: Fn(f64) -> f64>(xs: &[f64], cdf: F) -> f64 {
    let n = xs.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in xs.iter().enumerate() {
        let f = cdf(x);
        d = d.max((i + 1) as f64 / n - f).max(f - i as f64 / n);
    }
    d
}

/// Compares meeting samples with a CDF `P{τ <= t}` that has mass
/// `1 - cdf(horizon)` at `+∞`: a binomial z-score for the meet fraction, and
/// KS of the met times against `cdf(t) / cdf(horizon)`.
pub fn ks_against_cdf<F: Fn(f64) -> f64>(samples: &[MeetingSample], cdf: F, horizon: f64) -> KsResult {
    let n = samples.len();
    let mut met: Vec<f64> = samples.iter().filter(|s| s.met && s.time <= horizon).map(|s| s.time).collect();
    met.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let p = cdf(horizon);
    let empirical = if n == 0 { f64::NAN } else { met.len() as f64 / n as f64 };
    let se = (p * (1.0 - p) / n as f64).sqrt();
    let z = if se > 0.0 {
        (empirical - p) / se
    } else if empirical == p {
        0.0
    } else {
        f64::INFINITY
    };
    let statistic = if met.is_empty() || !(p > 0.0) {
        None
    } else {
        Some(ks_statistic_sorted(&met, |t| (cdf(t) / p).clamp(0.0, 1.0)))
    };
    KsResult {
        statistic,
        n,
        n_met: met.len(),
        atom: AtomComparison { empirical, oracle: p, z },
    }
}

/// Two-sample KS distance `sup |F_a - F_b|`.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::invalid("two-sample KS needs non-empty samples"));
    }
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(|x, y| x.partial_cmp(y).unwrap());
    b.sort_by(|x, y| x.partial_cmp(y).unwrap());
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    Ok(d)
}

/// Diagnostics of `(value, span)` increments against Brownian motion.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BmReport {
    pub n: usize,
    /// `Σ v / √(Σ span)`, standard normal under the null.
    pub mean_z: f64,
    /// Mean of `v² / span`; 1 under the null.
    pub var_ratio: f64,
    /// `√(2/n)`.
    pub var_ratio_se: f64,
    /// Lag-1 correlation of the standardised increments.
    pub lag1_corr: f64,
    /// `3/√n`.
    pub lag1_bound: f64,
    /// `Σ v²`.
    pub quadratic_variation: f64,
    /// `Σ span`.
    pub elapsed: f64,
}

impl BmReport {
    pub fn qv_ratio(&self) -> f64 {
        self.quadratic_variation / self.elapsed
    }

    pub fn mean_ok(&self) -> bool {
        self.mean_z.abs() <= 3.0
    }

    pub fn variance_ok(&self) -> bool {
        (self.var_ratio - 1.0).abs() <= 3.0 * self.var_ratio_se
    }

    pub fn independence_ok(&self) -> bool {
        self.lag1_corr.abs() <= self.lag1_bound
    }

    pub fn passes(&self) -> bool {
        self.mean_ok() && self.variance_ok() && self.independence_ok()
    }
}

pub fn bm_diagnostics(increments: &[(f64, f64)]) -> Result<BmReport> {
    if increments.len() < 2 {
        return Err(Error::invalid("bm_diagnostics needs at least two increments"));
    }
    if increments.iter().any(|&(_, s)| !(s > 0.0)) {
        return Err(Error::invalid("increment spans must be positive"));
    }
    let n = increments.len();
    let sum_v: f64 = increments.iter().map(|p| p.0).sum();
    let elapsed: f64 = increments.iter().map(|p| p.1).sum();
    let qv: f64 = increments.iter().map(|p| p.0 * p.0).sum();
    let std: Vec<f64> = increments.iter().map(|&(v, s)| v / s.sqrt()).collect();
    let var_ratio = std.iter().map(|z| z * z).sum::<f64>() / n as f64;
    let mean = std.iter().sum::<f64>() / n as f64;
    let (mut num, mut den) = (0.0, 0.0);
    for w in std.windows(2) {
        num += (w[0] - mean) * (w[1] - mean);
    }
    for z in &std {
        den += (z - mean).powi(2);
    }
    Ok(BmReport {
        n,
        mean_z: sum_v / elapsed.sqrt(),
        var_ratio,
        var_ratio_se: (2.0 / n as f64).sqrt(),
        lag1_corr: num / den,
        lag1_bound: 3.0 / (n as f64).sqrt(),
        quadratic_variation: qv,
        elapsed,
    })
}

/// One web realisation of `S = Σ_k X_k((k+1)/n) · Y(t)` where `X_k` is born
/// at `(0, k/n)` and `Y` at `(r, s)`.
fn prop1_replica(n: usize, s: f64, t: f64, r: f64, dt: f64, engine: &mut WebEngine) -> Result<f64> {
    let nf = n as f64;
    let mut births: Vec<(Birth, f64)> = (0..n).map(|k| (Birth::new(0.0, k as f64 / nf), (k + 1) as f64 / nf)).collect();
    births.push((Birth::new(r, s), t));
    // stable: at equal times the grid paths keep index order
    births.sort_by(|a, b| a.0.time.partial_cmp(&b.0.time).unwrap());
    let target = births.iter().position(|b| b.0 == Birth::new(r, s) && b.1 == t).unwrap();
    let only: Vec<Birth> = births.iter().map(|b| b.0).collect();
    let marks: Vec<f64> = births.iter().map(|b| b.1).collect();
    let horizon = marks.iter().copied().fold(0.0, f64::max);
    let mut values = vec![f64::NAN; births.len()];
    run_with_births(engine, &only, &marks, horizon, dt, |now, state| {
        for (id, &(_, at)) in births.iter().enumerate() {
            if at == now {
                values[id] = state.position(id).unwrap();
            }
        }
    })?;
    let y = values[target];
    let sum: f64 = values.iter().enumerate().filter(|&(i, _)| i != target).map(|(_, v)| v).sum();
    Ok(sum * y)
}

/// Replica mean of the correlation-decay sum on streams `(PROP1, i)`.
#[allow(clippy::too_many_arguments)]
pub fn prop1_sum_estimate(n: usize, s: f64, t: f64, r: f64, reps: u64, dt: f64, spec: &RngSpec) -> Result<EstimateResult> {
    if n == 0 || reps == 0 {
        return Err(Error::invalid("need n >= 1 and reps >= 1"));
    }
    if !(0.0 <= s && s <= t && t <= 1.0) {
        return Err(Error::invalid("need 0 <= s <= t <= 1"));
    }
    if !r.is_finite() {
        return Err(Error::invalid("r must be finite"));
    }
    let vals = try_map_replicas(reps, |i| {
        let mut engine = WebEngine::new(0.0, spec.stream(StreamLabel::new(Purpose::PROP1, i)));
        prop1_replica(n, s, t, r, dt, &mut engine)
    })?;
    Ok(EstimateResult::from_stats(&StreamStats::from_slice(&vals)))
}

/// Estimates `E[X_t Y_t] - x y` for coalescing paths from `x` and `y` at
/// time 0 (streams `(WEBTEST, i)`); the exact value is `l(t, |x - y|)`.
pub fn product_defect_estimate(x: f64, y: f64, t: f64, reps: u64, dt: f64, spec: &RngSpec) -> Result<EstimateResult> {
    if !(t > 0.0) || reps == 0 {
        return Err(Error::invalid("need t > 0 and reps >= 1"));
    }
    let (lo, hi) = if x <= y { (x, y) } else { (y, x) };
    let vals = try_map_replicas(reps, |i| -> Result<f64> {
        let mut engine = WebEngine::new(0.0, spec.stream(StreamLabel::new(Purpose::WEBTEST, i)));
        run_with_births(&mut engine, &[Birth::new(lo, 0.0), Birth::new(hi, 0.0)], &[], t, dt, |_, _| {})?;
        let st = engine.state();
        Ok(st.position(0).unwrap() * st.position(1).unwrap() - lo * hi)
    })?;
    Ok(EstimateResult::from_stats(&StreamStats::from_slice(&vals)))
}
