//! Emission, detection, herald and read-out times of the time-bin train
//! under both read-out policies.

use halflink::schedule::build_schedule;
use halflink::{LinkConfig, ReadoutPolicy};

fn main() -> halflink::Result<()> {
    let config = LinkConfig {
        readout_policy: ReadoutPolicy::Scheduled,
        ..LinkConfig::default()
    };
    let s = build_schedule(&config, config.used_modes())?;
    println!("modes              {}", s.n_used_modes());
    println!(
        "excitation         {:.1} µs",
        s.excitation_duration().as_micros()
    );
    println!("fiber delay        {:.1} µs", s.fiber_delay().as_micros());
    println!("herald delay       {:.1} µs", s.herald_delay().as_micros());
    let (start, end) = s.herald_window();
    println!(
        "herald window      {:.1} .. {:.1} µs",
        start.as_micros(),
        end.as_micros()
    );
    println!(
        "scheduled read     {:.1} µs",
        s.scheduled_read_time().as_micros()
    );
    println!(
        "round              {:.1} µs",
        s.round_duration().as_micros()
    );
    println!();
    println!(
        "{:>4} {:>5} {:>6} {:>10} {:>10} {:>10} {:>9} {:>9}",
        "bin", "cell", "angle", "emit_us", "detect_us", "herald_us", "storeA_us", "storeB_us"
    );
    let n = s.n_used_modes();
    let shown: Vec<usize> = (0..8).chain(n - 4..n).collect();
    for bin in shown {
        let mode = s.mode(bin);
        println!(
            "{:>4} {:>5} {:>6} {:>10.2} {:>10.2} {:>10.2} {:>9.2} {:>9.2}",
            bin,
            mode.cell_index,
            mode.angle_label(),
            s.emission_time(bin).as_micros(),
            s.detect_time(bin).as_micros(),
            s.herald_time(bin).as_micros(),
            s.storage_immediate(bin).as_micros(),
            s.storage_scheduled(bin).as_micros(),
        );
    }
    Ok(())
}
