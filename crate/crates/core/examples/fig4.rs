//! The same two sweeps under the scheduled read-out, next to policy A with
//! identical seeds.
//!
//! `cargo run --release --example fig4 -- [rounds_per_point]`

use halflink::scenario::{self, SweepOptions};
use halflink::ReadoutPolicy;

fn main() -> halflink::Result<()> {
    let rounds: u64 = std::env::args()
        .nth(1)
        .map_or(Ok(200_000), |s| s.parse())
        .expect("rounds");
    let fig4b = scenario::scenario("fig4b")?;
    let b = scenario::run_sweep(&fig4b, &SweepOptions::new(rounds))?;
    let a = scenario::run_sweep(
        &fig4b,
        &SweepOptions {
            policy: Some(ReadoutPolicy::Immediate),
            ..SweepOptions::new(rounds)
        },
    )?;
    println!(
        "{:>10} {:>15} {:>15}",
        "p_bar", "g (scheduled)", "g (immediate)"
    );
    for (pb, pa) in b.points.iter().zip(&a.points) {
        let fmt = |r: &halflink::stats::LinkReport| {
            format!(
                "{:.2}±{:.2}",
                r.g.unwrap_or(f64::NAN),
                r.g_err.unwrap_or(f64::NAN)
            )
        };
        println!(
            "{:>10.2e} {:>15} {:>15}",
            pb.report.row.p_bar,
            fmt(&pb.report.row),
            fmt(&pa.report.row)
        );
    }

    let fig4c = scenario::run_sweep(&scenario::scenario("fig4c")?, &SweepOptions::new(rounds))?;
    println!("\np_total vs N_modes (scheduled)");
    for p in &fig4c.points {
        println!("{:>4} {:.5}", p.report.row.n_modes, p.report.row.p_total);
    }
    if let Some(fit) = fig4c.fit {
        println!("slope {:.4e} per mode, R² {:.5}", fit.slope, fit.r_squared);
    }
    Ok(())
}
