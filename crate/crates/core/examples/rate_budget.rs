//! Where the entanglement rate goes: trial rate, click probability, duty
//! cycle and the gain over a single mode that waits for its herald.

use halflink::engine;
use halflink::schedule::build_schedule;
use halflink::stats::{self, LinkReport};
use halflink::LinkConfig;

fn main() -> halflink::Result<()> {
    let config = LinkConfig::default();
    let schedule = build_schedule(&config, config.used_modes())?;
    let ledger = engine::run_batch(&config, 1_000_000)?;
    let rates = stats::rates(&ledger)?;
    let detail = LinkReport::from_ledger(&ledger, &config)?;
    let round_s = schedule.round_duration().as_secs();
    let gain = stats::multiplex_gain(&config, config.used_modes(), round_s);

    println!("round              {:.1} µs", round_s * 1e6);
    println!("cycle              {:.2} ms", ledger.cycle_duration_s * 1e3);
    println!("duty cycle         {:.4}", rates.duty_cycle);
    println!("p_total            {:.4}", detail.row.p_total);
    println!("rate in protocol   {:.0} Hz", rates.in_protocol_hz);
    println!("rate averaged      {:.0} Hz", rates.averaged_hz);
    println!("trial rate         {:.3e} Hz", gain.effective_trial_rate_hz);
    println!("single-mode limit  {:.0} Hz", gain.single_mode_rate_hz);
    println!("multiplexing gain  {:.1}", gain.ratio);
    println!(
        "link efficiency    {:.3} (t_coh {:.0} µs)",
        detail.row.eta_link,
        detail.t_coh_s * 1e6
    );
    println!(
        "expected pairs within t_coh  {:.3}",
        detail.expected_corr_within_tcoh
    );
    Ok(())
}
