//! Recovers the memory coherence time from simulated coincidences: vary the
//! scheduled read-out time, measure p(i|s) with its binomial error, and fit
//! a decay with a free floor.

use halflink::engine;
use halflink::scenario;
use halflink::stats::{self, DecayPoint, Floor};
use halflink::LinkConfig;

fn main() -> halflink::Result<()> {
    let base = LinkConfig {
        n_cells: 1,
        chi: 0.05,
        retrieval_efficiency_0: 0.3,
        herald_cap: None,
        ..scenario::local400_config()
    };
    let mut points = Vec::new();
    println!("{:>8} {:>10} {:>10}", "t_us", "p(i|s)", "sigma");
    for us in [20.0, 60.0, 100.0, 150.0, 200.0, 300.0, 400.0, 550.0] {
        let config = LinkConfig {
            scheduled_read_time_s: Some(us * 1e-6),
            ..base.clone()
        };
        let ledger = engine::run_batch(&config, 400_000)?;
        let s = ledger.registered_heralds as f64;
        let p = ledger.coincidences as f64 / s;
        let sigma = (p * (1.0 - p) / s).sqrt();
        println!("{us:>8.0} {p:>10.5} {sigma:>10.5}");
        points.push(DecayPoint {
            t: us * 1e-6,
            value: p,
            sigma: Some(sigma),
        });
    }
    let fit = stats::fit_decay(&points, base.decay_shape, Floor::Free).expect("fit converges");
    println!(
        "tau = {:.1} ± {:.1} µs (true {:.1} µs), amplitude {:.4}, floor {:.2e}",
        fit.tau * 1e6,
        fit.tau_sigma * 1e6,
        base.coherence_time_s.mean() * 1e6,
        fit.amplitude,
        fit.floor
    );
    Ok(())
}
