//! Coalescing web with staggered births: run the engine, watch clusters form,
//! and write the path and coalescence-event tables.

use coalflow::web::{evaluate_flow, Birth};
use coalflow::{Purpose, RngSpec, StreamLabel};

fn main() -> coalflow::Result<()> {
    let births: Vec<Birth> = (0..8)
        .map(|k| Birth::new(k as f64 * 0.15, if k % 2 == 0 { 0.0 } else { 0.25 }))
        .collect();
    let times: Vec<f64> = (1..=8).map(|k| 0.25 + k as f64 * 0.09375).collect();
    let rng = RngSpec::new(42).stream(StreamLabel::new(Purpose::WEB, 0));
    let rec = evaluate_flow(&births, &times, 1.0, 1.0 / 512.0, rng)?;

    for (j, t) in rec.times.iter().enumerate() {
        let mut reps: Vec<usize> = rec.cluster_reps.iter().map(|r| r[j]).collect();
        reps.dedup();
        println!("t = {t:.4}: {} clusters", reps.len());
    }
    for e in &rec.events {
        println!(
            "step {:>4} t = {:.4}: particle {} absorbed by {}",
            e.step, e.time, e.absorbed, e.survivor
        );
    }
    rec.write_csv(std::io::stdout().lock())?;
    Ok(())
}
