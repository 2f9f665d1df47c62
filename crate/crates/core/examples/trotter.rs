//! Trotter splitting of the drifted flow: jumps at partition points, the jump
//! bound, and Brownian diagnostics of the martingale part.

use coalflow::estimators::bm_diagnostics;
use coalflow::parallel::map_replicas;
use coalflow::splitting::{jump_bound_check, martingale_diagnostics_input, trotter_simulate};
use coalflow::{DriftModel, Partition, Purpose, RngSpec, StreamLabel};

fn main() -> coalflow::Result<()> {
    let spec = RngSpec::new(3);
    let model = DriftModel::Cosine;
    for n in [4usize, 16, 64] {
        let part = Partition::uniform(n)?;
        let recs = map_replicas(2_000, |i| {
            trotter_simulate(
                &[0.0, 0.3],
                &part,
                &model,
                1.0 / 1024.0,
                spec.stream(StreamLabel::new(Purpose::TROTTER, i)),
            )
            .unwrap()
        });
        let bound_ok = recs.iter().all(|r| jump_bound_check(r, &model).iter().all(|&b| b));
        let max_jump = recs
            .iter()
            .flat_map(|r| r.jumps.iter().flatten())
            .fold(0.0f64, |m, j| m.max(j.abs()));
        let bm = bm_diagnostics(&martingale_diagnostics_input(&recs)?)?;
        let met = recs.iter().filter(|r| r.terminal(0) == r.terminal(1)).count();
        println!(
            "N = {n:>2}: max |jump| {max_jump:.4}, bound holds {bound_ok}, met by 1 {met}/2000, m: var ratio {:.3}, lag-1 {:+.4}, passes {}",
            bm.var_ratio,
            bm.lag1_corr,
            bm.passes()
        );
    }
    Ok(())
}
