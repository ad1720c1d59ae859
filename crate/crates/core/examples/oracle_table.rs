//! Closed-form probabilities along the p̄ axis, without sampling.

use halflink::oracle;
use halflink::scenario;
use halflink::LinkConfig;

fn main() -> halflink::Result<()> {
    let base = LinkConfig::default();
    println!(
        "{:>10} {:>9} {:>10} {:>12} {:>12} {:>8}",
        "p_bar", "chi", "p_total", "p(i|s)", "p(i|nosig)", "g"
    );
    for p_bar in scenario::p_bar_grid() {
        let Some(chi) = oracle::chi_for_p_bar(&base, p_bar) else {
            println!("{p_bar:>10.2e}  unreachable");
            continue;
        };
        let o = oracle::analytic_for_config(&LinkConfig {
            chi,
            ..base.clone()
        })?;
        println!(
            "{:>10.2e} {:>9.5} {:>10.5} {:>12.4e} {:>12.4e} {:>8.3}",
            p_bar, chi, o.p_total, o.mean_p_si_given_s, o.mean_p_i_given_nosig, o.g
        );
    }
    println!("\nstorage-time dependence at the operating point");
    for us in [0.0, 50.0, 130.0, 190.0, 250.0, 400.0] {
        let p = oracle::analytic_probs(&base, us * 1e-6);
        println!(
            "{us:>6.0} µs  g = {:.3} (first order {:.3})",
            p.g_exact, p.g_analytic
        );
    }
    Ok(())
}
