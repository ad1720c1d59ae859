//! Twelve modes over 1 km of lossy fiber, heralded directly.

use halflink::scenario;

fn main() -> halflink::Result<()> {
    let run = scenario::onekm_scenario(500_000)?;
    let row = &run.report.row;
    println!("p_bar            {:.3e}", row.p_bar);
    println!(
        "no-signal rounds {:.5} (expected {:.5})",
        run.nosig_fraction, run.nosig_fraction_expected
    );
    println!(
        "g                {:.2} ± {:.2}",
        row.g.unwrap_or(f64::NAN),
        row.g_err.unwrap_or(f64::NAN)
    );
    println!("g (oracle)       {:.2}", run.oracle.g);
    println!(
        "retrieval        {:.4}",
        run.oracle.mean_retrieval_efficiency
    );
    Ok(())
}
