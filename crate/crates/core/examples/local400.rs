//! 400 modes with local heralding: no fiber, no feedforward wait, read-out
//! at 170 µs.

use halflink::scenario;

fn main() -> halflink::Result<()> {
    let run = scenario::local400_scenario(1_000_000)?;
    let row = &run.report.row;
    println!("modes        {}", row.n_modes);
    println!("chi          {:.5}", row.chi);
    println!("p_bar        {:.3e}", row.p_bar);
    println!("p_total      {:.4} ± {:.4}", row.p_total, row.p_total_err);
    println!(
        "g            {:.2} ± {:.2}",
        row.g.unwrap_or(f64::NAN),
        row.g_err.unwrap_or(f64::NAN)
    );
    println!("g (oracle)   {:.2}", run.oracle.g);
    println!(
        "rate         {:.0} Hz in protocol, {:.0} Hz averaged",
        row.rate_hz, row.rate_avg_hz
    );
    Ok(())
}
