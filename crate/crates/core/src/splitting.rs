//! Fractional-step (Trotter) construction of the flow with drift.
//!
//! On each partition interval `[t_{k-1}, t_k)` the particles move as
//! drift-free coalescing Brownian motions. At every interior partition point
//! `t_k`, `k = 1..N-1`, all positions are pushed through the drift ODE flow
//! `A_h` with `h = t_k - t_{k-1}`. The terminal value is the left limit at
//! `t_N = 1` (no map there).
//!
//! Each push is recorded as a jump `Δ_k = X_{t_k} - X_{t_k-}`; the martingale
//! part is `m_t = X_t - Σ_{t_k ≤ t} Δ_k`.

use std::io::Write;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{DriftModel, Partition, SimRng};
use crate::web::{time_grid, Birth, WebEngine};

/// Largest `h_sub * C_a` used by the RK4 drift map.
pub const RK4_STEP_LIPSCHITZ: f64 = 0.01;

/// `A_h(u)`: the solution at time `h` of `dA/dt = a(A)`, `A_0 = u`.
///
/// Exact for zero and linear drifts; classical RK4 with substeps
/// `h_sub * C_a <= 0.01` otherwise, which keeps the numerical map strictly
/// increasing in `u`.
pub fn drift_flow_map(model: &DriftModel, h: f64, u: f64) -> Result<f64> {
    if !(h >= 0.0) || !h.is_finite() {
        return Err(Error::invalid("drift map duration must be finite and nonnegative"));
    }
    Ok(flow_map(model, h, u))
}

pub(crate) fn flow_map(model: &DriftModel, h: f64, u: f64) -> f64 {
    if h == 0.0 || model.is_zero() {
        return u;
    }
    match *model {
        DriftModel::Linear { c } => u * (c * h).exp(),
        _ => {
            let n = ((h * model.lipschitz()) / RK4_STEP_LIPSCHITZ).ceil().max(1.0) as usize;
            let dh = h / n as f64;
            let mut x = u;
            for _ in 0..n {
                let k1 = model.eval(x);
                let k2 = model.eval(x + 0.5 * dh * k1);
                let k3 = model.eval(x + 0.5 * dh * k2);
                let k4 = model.eval(x + dh * k3);
                x += dh / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
            }
            x
        }
    }
}

/// One realisation of the splitting scheme for a set of starting points.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SplitPathRecord {
    pub partition: Partition,
    pub starts: Vec<f64>,
    /// Simulation grid; contains every partition point exactly.
    pub times: Vec<f64>,
    /// Grid index of each partition point `t_0..t_N`.
    pub partition_index: Vec<usize>,
    /// `x[particle][grid]`, right-continuous values.
    pub x: Vec<Vec<f64>>,
    /// `m[particle][grid]`.
    pub m: Vec<Vec<f64>>,
    /// `left_limits[particle][k] = X_{t_k-}` for `k = 0..=N` (`k = 0` is the
    /// start).
    pub left_limits: Vec<Vec<f64>>,
    /// `jumps[particle][k]` for `k = 0..=N`; zero at both ends.
    pub jumps: Vec<Vec<f64>>,
    /// `sup_t |a(X_t)|` over grid values and left limits.
    pub sup_abs_drift: Vec<f64>,
}

impl SplitPathRecord {
    pub fn particle_count(&self) -> usize {
        self.x.len()
    }

    /// `X_1` (which equals `X_{1-}`).
    pub fn terminal(&self, particle: usize) -> f64 {
        *self.x[particle].last().unwrap()
    }

    /// Sum of squared grid increments of `m` for one particle.
    pub fn quadratic_variation(&self, particle: usize) -> f64 {
        self.m[particle].windows(2).map(|w| (w[1] - w[0]).powi(2)).sum()
    }

    /// Columns `time, particle_id, X, m, is_partition_point, jump`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "{}", crate::CSV_SCHEMA_HEADER)?;
        writeln!(w, "time,particle_id,X,m,is_partition_point,jump")?;
        let mut k = 0;
        for (j, t) in self.times.iter().enumerate() {
            let at_point = self.partition_index.get(k) == Some(&j);
            for p in 0..self.x.len() {
                let jump = if at_point { self.jumps[p][k] } else { 0.0 };
                writeln!(w, "{},{},{},{},{},{}", t, p, self.x[p][j], self.m[p][j], at_point as u8, jump)?;
            }
            if at_point {
                k += 1;
            }
        }
        Ok(())
    }
}

/// Runs the splitting scheme on `[0, 1]` for particles started at `starts`
/// (sorted ascending) at time 0.
pub fn trotter_simulate(starts: &[f64], partition: &Partition, model: &DriftModel, dt: f64, rng: SimRng) -> Result<SplitPathRecord> {
    if starts.is_empty() {
        return Err(Error::invalid("trotter_simulate needs at least one start"));
    }
    if starts.windows(2).any(|w| !(w[0] <= w[1])) {
        return Err(Error::invalid("starts must be sorted ascending"));
    }
    if !(dt > 0.0) || dt > partition.mesh() {
        return Err(Error::invalid("dt must be positive and at most the partition mesh"));
    }
    let bp = partition.breakpoints();
    let n_int = partition.intervals();
    let times = time_grid(0.0, 1.0, dt, bp)?;
    let np = starts.len();

    let mut engine = WebEngine::new(0.0, rng);
    for &u in starts {
        engine.spawn(Birth::new(u, 0.0))?;
    }

    let mut x = vec![Vec::with_capacity(times.len()); np];
    let mut m = vec![Vec::with_capacity(times.len()); np];
    let mut left_limits = vec![vec![0.0; n_int + 1]; np];
    let mut jumps = vec![vec![0.0; n_int + 1]; np];
    let mut sup = vec![0.0f64; np];
    let mut cum = vec![0.0f64; np];
    let mut partition_index = vec![0usize; n_int + 1];

    for p in 0..np {
        let v = starts[p];
        x[p].push(v);
        m[p].push(v);
        left_limits[p][0] = v;
        sup[p] = model.eval(v).abs();
    }
    let mut k = 1;
    let mut cur = vec![0.0; np];
    for (j, &t) in times.iter().enumerate().skip(1) {
        engine.step_to(t);
        for (p, c) in cur.iter_mut().enumerate() {
            *c = engine.state().position(p).unwrap();
            sup[p] = sup[p].max(model.eval(*c).abs());
        }
        if k <= n_int && t == bp[k] {
            partition_index[k] = j;
            for p in 0..np {
                left_limits[p][k] = cur[p];
            }
            if k < n_int {
                let h = bp[k] - bp[k - 1];
                engine.map_positions(|v| flow_map(model, h, v));
                for p in 0..np {
                    let after = engine.state().position(p).unwrap();
                    jumps[p][k] = after - cur[p];
                    cum[p] += jumps[p][k];
                    cur[p] = after;
                    sup[p] = sup[p].max(model.eval(after).abs());
                }
            }
            k += 1;
        }
        for p in 0..np {
            x[p].push(cur[p]);
            m[p].push(cur[p] - cum[p]);
        }
    }
    debug_assert_eq!(k, n_int + 1);

    Ok(SplitPathRecord {
        partition: partition.clone(),
        starts: starts.to_vec(),
        times,
        partition_index,
        x,
        m,
        left_limits,
        jumps,
        sup_abs_drift: sup,
    })
}

/// Upper bound for the jump at interior point `k` of a path whose drift
/// magnitude never exceeds `sup`: `sup * e^{C_a * mesh} * (t_k - t_{k-1})`,
/// the duration of the drift map that produced the jump.
pub fn jump_bound(partition: &Partition, model: &DriftModel, sup: f64, k: usize) -> f64 {
    let bp = partition.breakpoints();
    sup * (model.lipschitz() * partition.mesh()).exp() * (bp[k] - bp[k - 1])
}

/// Per particle: does every recorded jump satisfy [`jump_bound`]?
///
/// A relative allowance of `1e-9` plus `1e-14` absolute covers floating-point
/// rounding in the RK4 map (where `a(X_{t_k-}) = 0` the exact jump is 0).
pub fn jump_bound_check(record: &SplitPathRecord, model: &DriftModel) -> Vec<bool> {
    let n_int = record.partition.intervals();
    (0..record.particle_count())
        .map(|p| {
            (1..n_int).all(|k| {
                let bound = jump_bound(&record.partition, model, record.sup_abs_drift[p], k);
                record.jumps[p][k].abs() <= bound * (1.0 + 1e-9) + 1e-14
            })
        })
        .collect()
}

/// Increments of `m` between consecutive partition points, as
/// `(value, span)` pairs: per record, per particle, in time order.
pub fn martingale_diagnostics_input(records: &[SplitPathRecord]) -> Result<Vec<(f64, f64)>> {
    let Some(first) = records.first() else {
        return Err(Error::invalid("no records"));
    };
    let mut out = Vec::new();
    for r in records {
        if r.times != first.times || r.partition != first.partition {
            return Err(Error::invalid("records do not share a partition and grid"));
        }
        let bp = r.partition.breakpoints();
        for path in &r.m {
            for k in 1..bp.len() {
                let (a, b) = (r.partition_index[k - 1], r.partition_index[k]);
                out.push((path[b] - path[a], bp[k] - bp[k - 1]));
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Purpose, RngSpec, StreamLabel};
    use proptest::prelude::*;

    fn rng(i: u64) -> SimRng {
        RngSpec::new(2024).stream(StreamLabel::new(Purpose::TROTTER, i))
    }

    #[test]
    fn flow_map_examples() {
        assert_eq!(drift_flow_map(&DriftModel::Zero, 0.7, 1.25).unwrap(), 1.25);
        let lin = drift_flow_map(&DriftModel::Linear { c: 1.0 }, 0.5, 2.0).unwrap();
        assert!((lin - 2.0 * 0.5f64.exp()).abs() < 1e-15);
        assert!((lin - 3.29744).abs() < 1e-5);
        assert!(drift_flow_map(&DriftModel::Cosine, -0.1, 0.0).is_err());
    }

    #[test]
    fn rk4_matches_exact_solutions() {
        // tanh(s u)' = s tanh(u) has no elementary closed form, but a linear
        // drift pushed through the generic integrator does.
        let h = 0.8;
        let c = 1.3;
        let mut x = 0.7;
        let n = ((h * c) / RK4_STEP_LIPSCHITZ).ceil() as usize;
        let dh = h / n as f64;
        for _ in 0..n {
            let f = |y: f64| c * y;
            let (k1, k2) = (f(x), f(x + 0.5 * dh * f(x)));
            let k3 = f(x + 0.5 * dh * k2);
            let k4 = f(x + dh * k3);
            x += dh / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        }
        assert!((x - 0.7 * (c * h).exp()).abs() < 1e-9);
        // cosine: exact flow is x(h) = 2 atan(tanh((h + c0)/2)) with
        // c0 = 2 atanh(tan(u/2))
        let u: f64 = 0.4;
        let c0 = 2.0 * (u / 2.0).tan().atanh();
        let exact = 2.0 * (((h + c0) / 2.0).tanh()).atan();
        assert!((flow_map(&DriftModel::Cosine, h, u) - exact).abs() < 1e-10);
    }

    proptest! {
        #[test]
        fn flow_map_is_monotone(u in -20.0f64..20.0, d in 0.0f64..5.0, h in 0.0f64..1.0, s in -3.0f64..3.0) {
            for m in [DriftModel::Cosine, DriftModel::ScaledTanh { scale: s }, DriftModel::Linear { c: s }] {
                prop_assert!(flow_map(&m, h, u) <= flow_map(&m, h, u + d));
            }
        }
    }

    #[test]
    fn zero_drift_has_no_jumps() {
        let part = Partition::uniform(8).unwrap();
        let rec = trotter_simulate(&[0.0, 0.3], &part, &DriftModel::Zero, 1.0 / 256.0, rng(0)).unwrap();
        assert!(rec.jumps.iter().flatten().all(|&j| j == 0.0));
        for p in 0..2 {
            assert_eq!(rec.m[p], rec.x[p]);
        }
    }

    #[test]
    fn bookkeeping_identity_is_exact() {
        let part = Partition::new(vec![0.0, 0.1, 0.45, 0.5, 1.0]).unwrap();
        let rec = trotter_simulate(&[-0.2, 0.0, 0.4], &part, &DriftModel::Cosine, 0.01, rng(1)).unwrap();
        for p in 0..3 {
            let mut cum = 0.0;
            let mut k = 0;
            for j in 0..rec.times.len() {
                if rec.partition_index.get(k) == Some(&j) {
                    cum += rec.jumps[p][k];
                    k += 1;
                }
                assert_eq!((rec.x[p][j] - cum).to_bits(), rec.m[p][j].to_bits());
            }
            // X_1 is the left limit at 1
            assert_eq!(rec.terminal(p), rec.left_limits[p][4]);
            assert_eq!(rec.jumps[p][4], 0.0);
            // jumps are right value minus left limit
            for k in 1..4 {
                let j = rec.partition_index[k];
                assert_eq!(rec.x[p][j] - rec.left_limits[p][k], rec.jumps[p][k]);
            }
        }
    }

    #[test]
    fn order_preserved_and_bound_holds() {
        let part = Partition::uniform(4).unwrap();
        for i in 0..40 {
            for model in [
                DriftModel::Cosine,
                DriftModel::Linear { c: -1.5 },
                DriftModel::ScaledTanh { scale: 2.0 },
            ] {
                let rec = trotter_simulate(&[0.0, 0.3], &part, &model, 1.0 / 128.0, rng(10 + i)).unwrap();
                for j in 0..rec.times.len() {
                    assert!(rec.x[0][j] <= rec.x[1][j]);
                }
                assert!(jump_bound_check(&rec, &model).iter().all(|&b| b));
            }
        }
    }

    #[test]
    fn jump_checker_detects_inflated_jump() {
        let part = Partition::uniform(4).unwrap();
        let model = DriftModel::Linear { c: 1.0 };
        let rec = trotter_simulate(&[1.0], &part, &model, 1.0 / 64.0, rng(3)).unwrap();
        assert_eq!(jump_bound_check(&rec, &model), vec![true]);
        let mut bad = rec.clone();
        let bound = jump_bound(&part, &model, rec.sup_abs_drift[0], 2);
        bad.jumps[0][2] = 2.0 * bound.max(rec.jumps[0][2].abs());
        assert_eq!(jump_bound_check(&bad, &model), vec![false]);
    }

    #[test]
    fn rejects_bad_input() {
        let part = Partition::uniform(4).unwrap();
        assert!(trotter_simulate(&[0.3, 0.0], &part, &DriftModel::Zero, 0.01, rng(0)).is_err());
        assert!(trotter_simulate(&[0.0], &part, &DriftModel::Zero, 0.5, rng(0)).is_err());
        assert!(martingale_diagnostics_input(&[]).is_err());
        let a = trotter_simulate(&[0.0], &part, &DriftModel::Zero, 0.01, rng(0)).unwrap();
        let b = trotter_simulate(&[0.0], &part, &DriftModel::Zero, 0.02, rng(0)).unwrap();
        assert!(martingale_diagnostics_input(&[a.clone(), b]).is_err());
        let inc = martingale_diagnostics_input(&[a.clone(), a]).unwrap();
        assert_eq!(inc.len(), 8);
        assert!(inc.iter().all(|&(_, s)| s == 0.25));
    }

    #[test]
    fn csv_has_one_row_per_particle_and_time() {
        let part = Partition::uniform(2).unwrap();
        let rec = trotter_simulate(&[0.0, 1.0], &part, &DriftModel::Cosine, 0.25, rng(4)).unwrap();
        let mut buf = Vec::new();
        rec.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 2 + 2 * rec.times.len());
        assert_eq!(text.lines().nth(1).unwrap(), "time,particle_id,X,m,is_partition_point,jump");
        assert_eq!(text.lines().filter(|l| l.contains(",1,") && l.starts_with("0.5,")).count(), 2);
    }
}
