//! Reference simulator: independent diffusions `dY = a(Y) dt + dW` that move
//! together after they meet, integrated by Euler–Maruyama with the same
//! crossing-plus-bridge coalescence test as the drift-free engine.
//!
//! Also hosts the meeting-time, cluster-size and comparison ("sandwich")
//! experiments.

use std::io::Write;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::StreamStats;
use crate::model::{DriftModel, Purpose, RngSpec, SimRng, StreamLabel};
use crate::web::{run_with_births, time_grid, Birth, MeetingSample, PathRecord, WebEngine, BRIDGE_EXPONENT_CUTOFF};

/// Gap at which a pair is declared never to meet: the meet probability
/// before the horizon is below `2 * sf(PRUNE_SIGMAS)` ≈ 2e-19.
pub const PRUNE_SIGMAS: f64 = 9.0;

/// Simulates all starts from time 0 to `horizon` and records every particle
/// at every grid time.
pub fn direct_simulate(starts: &[f64], model: &DriftModel, horizon: f64, dt: f64, rng: SimRng) -> Result<PathRecord> {
    if starts.is_empty() {
        return Err(Error::invalid("direct_simulate needs at least one start"));
    }
    if starts.windows(2).any(|w| !(w[0] <= w[1])) {
        return Err(Error::invalid("starts must be sorted ascending"));
    }
    if !(horizon > 0.0) {
        return Err(Error::invalid("horizon must be positive"));
    }
    let grid = time_grid(0.0, horizon, dt, &[])?;
    let births: Vec<Birth> = starts.iter().map(|&u| Birth::new(u, 0.0)).collect();
    let n = starts.len();
    let mut positions = vec![Vec::with_capacity(grid.len()); n];
    let mut reps = vec![Vec::with_capacity(grid.len()); n];
    let mut engine = WebEngine::with_drift(0.0, rng, *model);
    run_with_births(&mut engine, &births, &grid, horizon, dt, |_, s| {
        for p in 0..n {
            positions[p].push(s.position(p).unwrap());
            reps[p].push(s.cluster_rep(p).unwrap());
        }
    })?;
    Ok(PathRecord {
        times: grid,
        positions,
        cluster_reps: reps,
        events: engine.events().to_vec(),
    })
}

/// Terminal positions only; same law and stream consumption as
/// [`direct_simulate`].
pub fn direct_terminal(starts: &[f64], model: &DriftModel, horizon: f64, dt: f64, rng: SimRng) -> Result<Vec<f64>> {
    if starts.windows(2).any(|w| !(w[0] <= w[1])) {
        return Err(Error::invalid("starts must be sorted ascending"));
    }
    let births: Vec<Birth> = starts.iter().map(|&u| Birth::new(u, 0.0)).collect();
    let mut engine = WebEngine::with_drift(0.0, rng, *model);
    run_with_births(&mut engine, &births, &[], horizon, dt, |_, _| {})?;
    Ok((0..starts.len()).map(|p| engine.state().position(p).unwrap()).collect())
}

/// First meeting time of the particles started at `u1 <= u2`, or not met by
/// `horizon`. The reported time is the end of the step in which they met.
pub fn pair_meeting_time(u1: f64, u2: f64, model: &DriftModel, horizon: f64, dt: f64, rng: &mut SimRng) -> Result<MeetingSample> {
    if !(u1 <= u2) {
        return Err(Error::invalid("pair_meeting_time needs u1 <= u2"));
    }
    if !(dt > 0.0) || !(horizon > 0.0) {
        return Err(Error::invalid("dt and horizon must be positive"));
    }
    if u1 == u2 {
        return Ok(MeetingSample::met_at(0.0));
    }
    let steps = (horizon / dt).ceil() as u64;
    let h = horizon / steps as f64;
    let sqrt_h = h.sqrt();
    // The gap dominates an OU process with rate C_a, so with T left
    // P{meet} <= 2 sf(g / (sqrt(2T) e^{C_a T})); refreshed every 32 steps.
    let ca = model.lipschitz();
    let prune_at = |left: f64| PRUNE_SIGMAS * (2.0 * left).sqrt() * (ca * left).exp();
    let mut prune = prune_at(horizon);
    let drift = !model.is_zero();
    let (mut x1, mut x2) = (u1, u2);
    let mut d0 = u2 - u1;
    for i in 1..=steps {
        if i % 32 == 0 {
            prune = prune_at(horizon - (i - 1) as f64 * h);
        }
        if d0 > prune {
            return Ok(MeetingSample::not_met());
        }
        let z1: f64 = rng.sample(StandardNormal);
        let z2: f64 = rng.sample(StandardNormal);
        let (y1, y2) = if drift {
            (x1 + model.eval(x1) * h + sqrt_h * z1, x2 + model.eval(x2) * h + sqrt_h * z2)
        } else {
            (x1 + sqrt_h * z1, x2 + sqrt_h * z2)
        };
        let d1 = y2 - y1;
        let met = d1 <= 0.0 || (d0 * d1 / h <= BRIDGE_EXPONENT_CUTOFF && rng.random::<f64>() < (-d0 * d1 / h).exp());
        let t = if i == steps { horizon } else { i as f64 * h };
        if met {
            return Ok(MeetingSample::met_at(t));
        }
        x1 = y1;
        x2 = y2;
        d0 = d1;
    }
    Ok(MeetingSample::not_met())
}

/// `reps` independent meeting experiments on streams `(MEET, i)`.
pub fn meeting_samples(
    u1: f64,
    u2: f64,
    model: &DriftModel,
    horizon: f64,
    dt: f64,
    spec: &RngSpec,
    reps: u64,
) -> Result<Vec<MeetingSample>> {
    crate::parallel::try_map_replicas(reps, |i| {
        let mut rng = spec.stream(StreamLabel::new(Purpose::MEET, i));
        pair_meeting_time(u1, u2, model, horizon, dt, &mut rng)
    })
}

/// Columns `replica, met, time`.
pub fn write_meeting_csv<W: Write>(samples: &[MeetingSample], mut w: W) -> std::io::Result<()> {
    writeln!(w, "{}", crate::CSV_SCHEMA_HEADER)?;
    writeln!(w, "replica,met,time")?;
    for (i, s) in samples.iter().enumerate() {
        writeln!(w, "{},{},{}", i, s.met as u8, s.time)?;
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ClusterMethod {
    /// `∫_0^1 P{τ_{0,r} <= t} dr` by the midpoint rule over pair experiments.
    PairQuadrature,
    /// Joint simulation from `{0, 1/m, ..., 1}`; trapezoid rule over the
    /// coalesced indicators.
    Fan,
}

impl std::str::FromStr for ClusterMethod {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pair-quadrature" | "pair" => Ok(ClusterMethod::PairQuadrature),
            "fan" => Ok(ClusterMethod::Fan),
            other => Err(Error::invalid(format!("unknown cluster method '{other}'"))),
        }
    }
}

impl std::fmt::Display for ClusterMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ClusterMethod::PairQuadrature => "pair-quadrature",
            ClusterMethod::Fan => "fan",
        })
    }
}

/// Estimate of `E ν_t`, the expected Lebesgue measure of starting points in
/// `[0, 1]` whose particle has merged with the one from 0 by time `t`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClusterEstimate {
    pub t: f64,
    pub method: ClusterMethod,
    pub value: f64,
    pub stderr: f64,
    /// Pair experiments per node (pair-quadrature) or joint replicas (fan).
    pub reps: u64,
}

pub fn cluster_size_estimate(
    model: &DriftModel,
    t: f64,
    grid_m: usize,
    reps: u64,
    dt: f64,
    spec: &RngSpec,
    method: ClusterMethod,
) -> Result<ClusterEstimate> {
    if !(t > 0.0) || !t.is_finite() {
        return Err(Error::invalid("cluster time must be positive"));
    }
    if grid_m < 2 || reps == 0 {
        return Err(Error::invalid("need grid_m >= 2 and reps >= 1"));
    }
    let m = grid_m as f64;
    match method {
        ClusterMethod::PairQuadrature => {
            // one parallel task per (node, replica) pair keeps streams fixed
            let total = grid_m as u64 * reps;
            let met = crate::parallel::try_map_replicas(total, |idx| {
                let (node, i) = (idx / reps, idx % reps);
                let r = (node as f64 + 0.5) / m;
                let label = StreamLabel::new(Purpose::CLUSTER_PAIR.indexed(node), i);
                let mut rng = spec.stream(label);
                pair_meeting_time(0.0, r, model, t, dt, &mut rng).map(|s| s.met)
            })?;
            let mut value = 0.0;
            let mut var = 0.0;
            for node in met.chunks(reps as usize) {
                let p = node.iter().filter(|&&b| b).count() as f64 / reps as f64;
                value += p;
                var += p * (1.0 - p) / reps as f64;
            }
            Ok(ClusterEstimate {
                t,
                method,
                value: value / m,
                stderr: var.sqrt() / m,
                reps,
            })
        }
        ClusterMethod::Fan => {
            let births: Vec<Birth> = (0..=grid_m).map(|j| Birth::new(j as f64 / m, 0.0)).collect();
            let values = crate::parallel::try_map_replicas(reps, |i| -> Result<f64> {
                let rng = spec.stream(StreamLabel::new(Purpose::CLUSTER_FAN, i));
                let mut engine = WebEngine::with_drift(0.0, rng, *model);
                run_with_births(&mut engine, &births, &[], t, dt, |_, _| {})?;
                let s = engine.state();
                let root = s.cluster_rep(0).unwrap();
                let mut acc = 0.0;
                for j in 0..=grid_m {
                    if s.cluster_rep(j).unwrap() == root {
                        acc += if j == 0 || j == grid_m { 0.5 } else { 1.0 };
                    }
                }
                Ok(acc / m)
            })?;
            let mut st = StreamStats::new();
            for v in values {
                st.update(v);
            }
            Ok(ClusterEstimate {
                t,
                method,
                value: st.mean(),
                stderr: st.stderr(),
                reps,
            })
        }
    }
}

/// Columns `t, method, value, stderr, reps`.
pub fn write_cluster_csv<W: Write>(rows: &[ClusterEstimate], mut w: W) -> std::io::Result<()> {
    writeln!(w, "{}", crate::CSV_SCHEMA_HEADER)?;
    writeln!(w, "t,method,value,stderr,reps")?;
    for r in rows {
        writeln!(w, "{},{},{},{},{}", r.t, r.method, r.value, r.stderr, r.reps)?;
    }
    Ok(())
}

/// How the bounding processes take a step.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundStep {
    /// `η + C_α η h + N`; the discrete sandwich then holds exactly whenever
    /// `C_α h <= 1`.
    #[default]
    Euler,
    /// `η e^{C_α h} + N`. Exact for the bounding SDE but can break the
    /// discrete ordering by `O(h²)`.
    Exponential,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SandwichConfig {
    /// Lipschitz constant of the bounds; defaults to the drift's.
    pub c_alpha: Option<f64>,
    /// Noise amplitude per component.
    pub gamma: f64,
    pub step: BoundStep,
}

impl Default for SandwichConfig {
    fn default() -> Self {
        SandwichConfig {
            c_alpha: None,
            gamma: 1.0,
            step: BoundStep::Euler,
        }
    }
}

/// The pair `ξ1 <= ξ2` and the bounds `η̃ <= ξ2 - ξ1 <= η`, all driven by
/// the same noise difference.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SandwichRecord {
    pub c_alpha: f64,
    pub times: Vec<f64>,
    pub xi1: Vec<f64>,
    pub delta_xi: Vec<f64>,
    pub eta: Vec<f64>,
    pub eta_tilde: Vec<f64>,
    pub meeting: MeetingSample,
}

impl SandwichRecord {
    pub fn xi2(&self, j: usize) -> f64 {
        self.xi1[j] + self.delta_xi[j]
    }

    /// First grid index at which the ordering fails.
    pub fn first_violation(&self) -> Option<usize> {
        (0..self.times.len()).find(|&j| !(self.eta_tilde[j] <= self.delta_xi[j] && self.delta_xi[j] <= self.eta[j]))
    }

    pub fn holds(&self) -> bool {
        self.first_violation().is_none()
    }

    /// Columns `time, xi1, delta_xi, eta, eta_tilde`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "{}", crate::CSV_SCHEMA_HEADER)?;
        writeln!(w, "time,xi1,delta_xi,eta,eta_tilde")?;
        for j in 0..self.times.len() {
            writeln!(
                w,
                "{},{},{},{},{}",
                self.times[j], self.xi1[j], self.delta_xi[j], self.eta[j], self.eta_tilde[j]
            )?;
        }
        Ok(())
    }
}

pub fn sandwich_simulate(model: &DriftModel, u1: f64, u2: f64, horizon: f64, dt: f64, rng: &mut SimRng) -> Result<SandwichRecord> {
    sandwich_simulate_with(model, u1, u2, horizon, dt, rng, &SandwichConfig::default())
}

/// Euler steps for `ξ1` and the gap; the gap's noise is `N = n2 - n1`. At
/// the meeting step the effective noise is chosen to land the gap exactly on
/// 0; from then on the pair shares its noise and `N = 0`.
pub fn sandwich_simulate_with(
    model: &DriftModel,
    u1: f64,
    u2: f64,
    horizon: f64,
    dt: f64,
    rng: &mut SimRng,
    cfg: &SandwichConfig,
) -> Result<SandwichRecord> {
    if !(u1 <= u2) {
        return Err(Error::invalid("sandwich needs u1 <= u2"));
    }
    if !(dt > 0.0) || !(horizon > 0.0) {
        return Err(Error::invalid("dt and horizon must be positive"));
    }
    let ca = cfg.c_alpha.unwrap_or_else(|| model.lipschitz());
    if !(ca >= 0.0) {
        return Err(Error::invalid("C_alpha must be nonnegative"));
    }
    let steps = (horizon / dt).ceil() as usize;
    let h = horizon / steps as f64;
    let sh = h.sqrt() * cfg.gamma;
    let grow = (ca * h).exp();
    let shrink = (-ca * h).exp();

    let mut rec = SandwichRecord {
        c_alpha: ca,
        times: Vec::with_capacity(steps + 1),
        xi1: Vec::with_capacity(steps + 1),
        delta_xi: Vec::with_capacity(steps + 1),
        eta: Vec::with_capacity(steps + 1),
        eta_tilde: Vec::with_capacity(steps + 1),
        meeting: MeetingSample::not_met(),
    };
    let (mut xi1, mut d) = (u1, u2 - u1);
    let (mut eta, mut eta_t) = (d, d);
    let mut met = d == 0.0;
    if met {
        rec.meeting = MeetingSample::met_at(0.0);
    }
    let push = |rec: &mut SandwichRecord, t, xi1, d, eta, eta_t| {
        rec.times.push(t);
        rec.xi1.push(xi1);
        rec.delta_xi.push(d);
        rec.eta.push(eta);
        rec.eta_tilde.push(eta_t);
    };
    push(&mut rec, 0.0, xi1, d, eta, eta_t);
    for i in 1..=steps {
        let t = if i == steps { horizon } else { i as f64 * h };
        let z1: f64 = rng.sample(StandardNormal);
        let z2: f64 = rng.sample(StandardNormal);
        let n1 = sh * z1;
        let drift_gap = gap_drift(model, xi1, d);
        let mut noise = if met { 0.0 } else { sh * z2 - n1 };
        let mut d_next = d + drift_gap * h + noise;
        if !met {
            let hit = d_next <= 0.0 || (d * d_next / h <= BRIDGE_EXPONENT_CUTOFF && rng.random::<f64>() < (-d * d_next / h).exp());
            if hit {
                met = true;
                rec.meeting = MeetingSample::met_at(t);
                noise = -(d + drift_gap * h);
                d_next = 0.0;
            }
        }
        let (eta_next, eta_t_next) = match cfg.step {
            BoundStep::Euler => (eta + ca * eta * h + noise, eta_t + (-ca) * eta_t * h + noise),
            BoundStep::Exponential => (eta * grow + noise, eta_t * shrink + noise),
        };
        xi1 = xi1 + model.eval(xi1) * h + n1;
        d = d_next;
        eta = eta_next;
        eta_t = eta_t_next;
        push(&mut rec, t, xi1, d, eta, eta_t);
    }
    Ok(rec)
}

// `a(ξ1 + d) - a(ξ1)`, exact for linear drifts so that the linear
// equality case η = Δξ holds without rounding.
#[inline]
fn gap_drift(model: &DriftModel, xi1: f64, d: f64) -> f64 {
    match *model {
        DriftModel::Linear { c } => c * d,
        _ => model.eval(xi1 + d) - model.eval(xi1),
    }
}

/// Fraction of `reps` sandwich replicas (streams `(SANDWICH, i)`) on which
/// the ordering holds at every grid time.
#[allow(clippy::too_many_arguments)]
pub fn sandwich_pass_count(
    model: &DriftModel,
    u1: f64,
    u2: f64,
    horizon: f64,
    dt: f64,
    spec: &RngSpec,
    reps: u64,
    cfg: &SandwichConfig,
) -> Result<u64> {
    let ok = crate::parallel::try_map_replicas(reps, |i| {
        let mut rng = spec.stream(StreamLabel::new(Purpose::SANDWICH, i));
        sandwich_simulate_with(model, u1, u2, horizon, dt, &mut rng, cfg).map(|r| r.holds())
    })?;
    Ok(ok.into_iter().filter(|&b| b).count() as u64)
}

/// Replica terminal positions from the direct simulator on streams
/// `(DIRECT, i)`.
pub fn direct_terminal_batch(
    starts: &[f64],
    model: &DriftModel,
    horizon: f64,
    dt: f64,
    spec: &RngSpec,
    reps: u64,
) -> Result<Vec<Vec<f64>>> {
    crate::parallel::try_map_replicas(reps, |i| {
        direct_terminal(starts, model, horizon, dt, spec.stream(StreamLabel::new(Purpose::DIRECT, i)))
    })
}
