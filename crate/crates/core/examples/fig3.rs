//! Policy A sweeps at 12 km: g against p̄ with 280 modes, and p_total
//! against the number of modes at fixed p̄.
//!
//! `cargo run --release --example fig3 -- [rounds_per_point]`

use halflink::scenario::{self, BoundCrossing, SweepOptions};

fn main() -> halflink::Result<()> {
    let rounds: u64 = std::env::args()
        .nth(1)
        .map_or(Ok(200_000), |s| s.parse())
        .expect("rounds");
    let options = SweepOptions::new(rounds);

    let fig3b = scenario::run_sweep(&scenario::scenario("fig3b")?, &options)?;
    println!("g vs p_bar, {rounds} rounds per point");
    println!(
        "{:>10} {:>9} {:>9} {:>8}",
        "p_bar", "g_mc", "g_err", "g_oracle"
    );
    for p in &fig3b.points {
        let row = &p.report.row;
        println!(
            "{:>10.2e} {:>9.3} {:>9.3} {:>8.3}",
            row.p_bar,
            row.g.unwrap_or(f64::NAN),
            row.g_err.unwrap_or(f64::NAN),
            p.oracle_g
        );
    }
    match fig3b.crossing {
        Some(BoundCrossing::Simulated { p_bar }) => println!("g = 2 at p_bar = {p_bar:.3e}"),
        Some(BoundCrossing::Analytic { p_bar, chi }) => {
            println!("g = 2 beyond the sweep at p_bar = {p_bar:.3e} (chi = {chi:.4})")
        }
        Some(BoundCrossing::None { min_g }) => {
            println!("g stays above 2 for every chi < 0.5; minimum {min_g:.3}")
        }
        None => {}
    }

    let fig3c = scenario::run_sweep(&scenario::scenario("fig3c")?, &options)?;
    println!("\np_total vs N_modes");
    for p in &fig3c.points {
        let row = &p.report.row;
        println!(
            "{:>4} {:.5} ± {:.5}  (analytic {:.5})",
            row.n_modes, row.p_total, row.p_total_err, p.report.p_total_analytic
        );
    }
    if let Some(fit) = fig3c.fit {
        println!("slope {:.4e} per mode, R² {:.5}", fit.slope, fit.r_squared);
    }
    Ok(())
}
