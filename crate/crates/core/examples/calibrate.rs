//! Fits the retrieval and noise parameters to the three (p̄, g) anchors and
//! the 1 km retrieval efficiency, then prints the fitted model at each anchor.

use halflink::oracle;
use halflink::scenario::{anchor_targets, calibration_start, retrieval_anchors};

fn main() -> halflink::Result<()> {
    let cal = oracle::calibrate(&anchor_targets(), &retrieval_anchors(), calibration_start())?;
    let p = cal.params;
    println!("retrieval_efficiency_0 = {:?}", p.retrieval_efficiency_0);
    println!("noise_click_prob       = {:?}", p.noise_click_prob);
    println!("idler_noise_prob       = {:?}", p.idler_noise_prob);
    println!();
    println!(
        "{:<14} {:>10} {:>12} {:>9} {:>9} {:>7}",
        "anchor", "p_bar", "chi", "g_model", "g_meas", "pull"
    );
    for t in &cal.targets {
        println!(
            "{:<14} {:>10.3e} {:>12.6e} {:>9.3} {:>9.2} {:>7.2}",
            t.name, t.p_bar_model, t.chi, t.g_model, t.g_target, t.pull
        );
    }
    for (name, model, measured) in &cal.retrieval {
        println!("retrieval {name}: model {model:.4} measured {measured:.4}");
    }
    println!("residual norm {:.3e}", cal.residual_norm);
    for t in &cal.targets {
        println!("chi[{}] = {:?}", t.name, t.chi);
    }
    Ok(())
}
