//! Batch Monte Carlo driver and the counts ledger.
//!
//! Round `r` of a run draws from its own ChaCha8 stream: the generator is
//! seeded with `rng_seed` and switched to stream `r`. A round's outcome is
//! therefore a function of (config, r) alone, and any partition of the round
//! range merges back to the monolithic ledger exactly, provided the shards
//! start on macro-cycle boundaries (each shard books the cycles it touches).

use std::ops::Range;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::controller::{RoundOutcome, RoundRunner, SamplerKind};
use crate::error::{MergeError, Result};
use crate::model::{LinkConfig, ReadoutPolicy};
use crate::schedule::{build_schedule, ModeSchedule};

/// Aggregated counters of a run. Serializes to a flat JSON object.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CountsLedger {
    pub config_hash: String,
    pub policy: ReadoutPolicy,
    pub n_modes: usize,
    pub n_rounds: u64,
    /// Every signal click, registered or not.
    #[serde(rename = "signal_clicks_S")]
    pub signal_clicks: u64,
    /// Heralds that produced a read-out; the denominator of the conditional
    /// idler probability.
    pub registered_heralds: u64,
    #[serde(rename = "coincidences_C")]
    pub coincidences: u64,
    #[serde(rename = "nosig_rounds_R0")]
    pub nosig_rounds: u64,
    #[serde(rename = "nosig_idler_clicks_I")]
    pub nosig_idler_clicks: u64,
    /// Heralds dropped by the registration cap.
    pub excess_heralds: u64,
    /// Heralds that could not be mapped to a mode.
    pub protocol_faults: u64,
    pub per_mode_signal_clicks: Vec<u64>,
    pub per_mode_registered: Vec<u64>,
    pub per_mode_coincidences: Vec<u64>,
    pub per_mode_nosig_reads: Vec<u64>,
    pub per_mode_nosig_idler_clicks: Vec<u64>,
    /// Resolved herald arrivals per time bin.
    pub herald_histogram: Vec<u64>,
    /// Rounds by number of signal clicks; the last bucket collects the overflow.
    pub clicks_per_round: Vec<u64>,
    pub macro_cycles: u64,
    pub cycle_duration_s: f64,
    pub round_duration_s: f64,
    pub wall_clock_s: f64,
}

/// Buckets in `clicks_per_round`; the last one means "this many or more".
pub const CLICK_BUCKETS: usize = 8;

impl CountsLedger {
    /// A ledger with no rounds for `config` run on `schedule`.
    pub fn empty(config: &LinkConfig, schedule: &ModeSchedule) -> Self {
        let n = schedule.n_used_modes();
        let round = schedule.round_duration().as_secs();
        CountsLedger {
            config_hash: ledger_hash(config, n),
            policy: schedule.policy(),
            n_modes: n,
            n_rounds: 0,
            signal_clicks: 0,
            registered_heralds: 0,
            coincidences: 0,
            nosig_rounds: 0,
            nosig_idler_clicks: 0,
            excess_heralds: 0,
            protocol_faults: 0,
            per_mode_signal_clicks: vec![0; n],
            per_mode_registered: vec![0; n],
            per_mode_coincidences: vec![0; n],
            per_mode_nosig_reads: vec![0; n],
            per_mode_nosig_idler_clicks: vec![0; n],
            herald_histogram: vec![0; n],
            clicks_per_round: vec![0; CLICK_BUCKETS],
            macro_cycles: 0,
            cycle_duration_s: cycle_duration_s(config, round),
            round_duration_s: round,
            wall_clock_s: 0.0,
        }
    }

    pub fn record(&mut self, outcome: &RoundOutcome) {
        self.n_rounds += 1;
        let clicks = outcome.signal_clicks.len();
        self.signal_clicks += clicks as u64;
        self.clicks_per_round[clicks.min(CLICK_BUCKETS - 1)] += 1;
        for &bin in &outcome.signal_clicks {
            self.per_mode_signal_clicks[bin] += 1;
        }
        for herald in &outcome.heralds {
            self.herald_histogram[herald.mode.bin_index] += 1;
        }
        self.excess_heralds += outcome.excess_heralds as u64;
        self.protocol_faults += outcome.faults.len() as u64;
        for read in &outcome.readouts {
            let bin = read.order.mode.bin_index;
            self.registered_heralds += 1;
            self.per_mode_registered[bin] += 1;
            if read.idler_click {
                self.coincidences += 1;
                self.per_mode_coincidences[bin] += 1;
            }
        }
        if outcome.is_no_signal() {
            self.nosig_rounds += 1;
            if let Some(read) = &outcome.nosig_readout {
                let bin = read.order.mode.bin_index;
                self.per_mode_nosig_reads[bin] += 1;
                if read.idler_click {
                    self.nosig_idler_clicks += 1;
                    self.per_mode_nosig_idler_clicks[bin] += 1;
                }
            }
        }
    }

    fn set_cycles(&mut self, cycles: u64) {
        self.macro_cycles = cycles;
        self.wall_clock_s = cycles as f64 * self.cycle_duration_s;
    }

    /// Time spent inside rounds, excluding loading and pumping.
    pub fn in_protocol_time_s(&self) -> f64 {
        self.n_rounds as f64 * self.round_duration_s
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("ledger serializes")
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

fn ledger_hash(config: &LinkConfig, n_used: usize) -> String {
    let mut c = config.clone();
    c.n_used_modes = Some(n_used);
    c.fingerprint()
}

/// One macro-cycle: MOT loading, then `rounds_per_cycle` of pumping plus a round.
pub fn cycle_duration_s(config: &LinkConfig, round_duration_s: f64) -> f64 {
    config.mot_load_time_s
        + config.rounds_per_cycle as f64 * (config.pump_time_s + round_duration_s)
}

/// Generator for round `round` of a run seeded with `seed`.
pub fn round_rng(seed: u64, round: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(round);
    rng
}

/// Macro-cycles touched by the rounds in `range`.
fn cycles_touched(range: &Range<u64>, rounds_per_cycle: u64) -> u64 {
    if range.is_empty() {
        0
    } else {
        (range.end - 1) / rounds_per_cycle - range.start / rounds_per_cycle + 1
    }
}

/// Runs the rounds with indices in `range` on a prebuilt schedule.
pub fn run_rounds(
    config: &LinkConfig,
    schedule: &ModeSchedule,
    range: Range<u64>,
    sampler: SamplerKind,
) -> CountsLedger {
    let mut ledger = CountsLedger::empty(config, schedule);
    let mut runner = RoundRunner::new(config, schedule, sampler);
    let base = ChaCha8Rng::seed_from_u64(config.rng_seed);
    for r in range.clone() {
        let mut rng = base.clone();
        rng.set_stream(r);
        ledger.record(&runner.run(&mut rng));
    }
    ledger.set_cycles(cycles_touched(&range, config.rounds_per_cycle as u64));
    ledger
}

/// Options for [`run_batch_with`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BatchOptions {
    pub sampler: SamplerKind,
    /// Number of cycle-aligned shards run on the rayon pool; 1 runs inline.
    pub shards: usize,
}

impl Default for BatchOptions {
    fn default() -> Self {
        BatchOptions {
            sampler: SamplerKind::default(),
            shards: 1,
        }
    }
}

/// Runs `n_rounds` rounds over the config's used modes with default options.
pub fn run_batch(config: &LinkConfig, n_rounds: u64) -> Result<CountsLedger> {
    run_batch_with(config, n_rounds, BatchOptions::default())
}

pub fn run_batch_with(
    config: &LinkConfig,
    n_rounds: u64,
    options: BatchOptions,
) -> Result<CountsLedger> {
    config.validate().into_result()?;
    let schedule = build_schedule(config, config.used_modes())?;
    Ok(run_on_schedule(config, &schedule, n_rounds, options))
}

/// Runs a batch on an explicit schedule, e.g. a prefix selection of modes.
pub fn run_on_schedule(
    config: &LinkConfig,
    schedule: &ModeSchedule,
    n_rounds: u64,
    options: BatchOptions,
) -> CountsLedger {
    let ranges = shard_ranges(
        n_rounds,
        config.rounds_per_cycle as u64,
        options.shards.max(1),
    );
    if ranges.len() <= 1 {
        return run_rounds(config, schedule, 0..n_rounds, options.sampler);
    }
    let parts: Vec<CountsLedger> = ranges
        .into_par_iter()
        .map(|range| run_rounds(config, schedule, range, options.sampler))
        .collect();
    merge(&parts).expect("shards share one config")
}

/// Splits `0..n_rounds` into at most `shards` contiguous ranges starting on
/// cycle boundaries.
pub fn shard_ranges(n_rounds: u64, rounds_per_cycle: u64, shards: usize) -> Vec<Range<u64>> {
    let cycles = n_rounds.div_ceil(rounds_per_cycle);
    let shards = (shards as u64).clamp(1, cycles.max(1));
    let per_shard = cycles.div_ceil(shards);
    (0..shards)
        .map(|k| {
            let start = (k * per_shard * rounds_per_cycle).min(n_rounds);
            let end = ((k + 1) * per_shard * rounds_per_cycle).min(n_rounds);
            start..end
        })
        .filter(|r| !r.is_empty())
        .collect()
}

fn add(into: &mut [u64], from: &[u64]) {
    into.iter_mut().zip(from).for_each(|(a, b)| *a += b);
}

/// Field-wise sum of ledgers produced under the same config.
pub fn merge(ledgers: &[CountsLedger]) -> Result<CountsLedger, MergeError> {
    let (first, rest) = ledgers.split_first().ok_or(MergeError::Empty)?;
    let mut out = first.clone();
    for l in rest {
        if l.config_hash != out.config_hash
            || l.n_modes != out.n_modes
            || l.policy != out.policy
            || l.cycle_duration_s != out.cycle_duration_s
        {
            return Err(MergeError::ConfigMismatch {
                expected: out.config_hash.clone(),
                found: l.config_hash.clone(),
            });
        }
        out.n_rounds += l.n_rounds;
        out.signal_clicks += l.signal_clicks;
        out.registered_heralds += l.registered_heralds;
        out.coincidences += l.coincidences;
        out.nosig_rounds += l.nosig_rounds;
        out.nosig_idler_clicks += l.nosig_idler_clicks;
        out.excess_heralds += l.excess_heralds;
        out.protocol_faults += l.protocol_faults;
        add(&mut out.per_mode_signal_clicks, &l.per_mode_signal_clicks);
        add(&mut out.per_mode_registered, &l.per_mode_registered);
        add(&mut out.per_mode_coincidences, &l.per_mode_coincidences);
        add(&mut out.per_mode_nosig_reads, &l.per_mode_nosig_reads);
        add(
            &mut out.per_mode_nosig_idler_clicks,
            &l.per_mode_nosig_idler_clicks,
        );
        add(&mut out.herald_histogram, &l.herald_histogram);
        add(&mut out.clicks_per_round, &l.clicks_per_round);
        out.macro_cycles += l.macro_cycles;
    }
    let cycles = out.macro_cycles;
    out.set_cycles(cycles);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn busy_config() -> LinkConfig {
        LinkConfig {
            chi: 0.05,
            signal_path_efficiency: 0.05,
            ..LinkConfig::default()
        }
    }

    #[test]
    fn ten_rounds_take_one_25_ms_cycle() {
        let ledger = run_batch(&LinkConfig::default(), 10).unwrap();
        assert_eq!(ledger.macro_cycles, 1);
        assert_relative_eq!(ledger.wall_clock_s, 0.025, max_relative = 1e-12);
        assert_relative_eq!(ledger.round_duration_s, 240e-6, max_relative = 1e-12);
        let ledger = run_batch(&LinkConfig::default(), 11).unwrap();
        assert_eq!(ledger.macro_cycles, 2);
    }

    #[test]
    fn counters_are_consistent() {
        let ledger = run_batch(&busy_config(), 3000).unwrap();
        assert!(ledger.coincidences <= ledger.registered_heralds);
        assert!(ledger.registered_heralds <= ledger.signal_clicks);
        assert!(ledger.nosig_idler_clicks <= ledger.nosig_rounds);
        assert!(ledger.nosig_rounds <= ledger.n_rounds);
        let hist: u64 = ledger.herald_histogram.iter().sum();
        assert_eq!(hist + ledger.protocol_faults, ledger.signal_clicks);
        assert_eq!(ledger.registered_heralds + ledger.excess_heralds, hist);
        assert_eq!(
            ledger.per_mode_signal_clicks.iter().sum::<u64>(),
            ledger.signal_clicks
        );
        assert_eq!(ledger.clicks_per_round.iter().sum::<u64>(), ledger.n_rounds);
        assert_eq!(ledger.clicks_per_round[0], ledger.nosig_rounds);
        assert_eq!(
            ledger.per_mode_nosig_reads.iter().sum::<u64>(),
            ledger.nosig_rounds
        );
    }

    #[test]
    fn same_seed_same_ledger() {
        let a = run_batch(&busy_config(), 500).unwrap();
        let b = run_batch(&busy_config(), 500).unwrap();
        assert_eq!(a.to_json_pretty(), b.to_json_pretty());
        let c = run_batch(
            &LinkConfig {
                rng_seed: 99,
                ..busy_config()
            },
            500,
        )
        .unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn shards_merge_to_the_monolithic_run() {
        let config = busy_config();
        let whole = run_batch(&config, 1234).unwrap();
        for shards in [2, 3, 7] {
            let sharded = run_batch_with(
                &config,
                1234,
                BatchOptions {
                    shards,
                    ..BatchOptions::default()
                },
            )
            .unwrap();
            assert_eq!(sharded, whole, "{shards} shards");
        }
    }

    #[test]
    fn merge_is_commutative_with_identity() {
        let config = busy_config();
        let schedule = build_schedule(&config, 280).unwrap();
        let a = run_rounds(&config, &schedule, 0..100, SamplerKind::SkipSilent);
        let b = run_rounds(&config, &schedule, 100..250, SamplerKind::SkipSilent);
        let empty = CountsLedger::empty(&config, &schedule);
        assert_eq!(merge(&[a.clone(), empty]).unwrap(), a);
        assert_eq!(
            merge(&[a.clone(), b.clone()]).unwrap(),
            merge(&[b, a]).unwrap()
        );
        assert_eq!(merge(&[]), Err(MergeError::Empty));
    }

    #[test]
    fn merge_rejects_other_configs() {
        let a = run_batch(&busy_config(), 10).unwrap();
        let b = run_batch(
            &LinkConfig {
                chi: 0.06,
                ..busy_config()
            },
            10,
        )
        .unwrap();
        assert!(matches!(
            merge(&[a, b]),
            Err(MergeError::ConfigMismatch { .. })
        ));
    }

    #[test]
    fn ledger_json_uses_counter_names() {
        let ledger = run_batch(&busy_config(), 20).unwrap();
        let json = ledger.to_json_pretty();
        for key in [
            "\"n_rounds\"",
            "\"signal_clicks_S\"",
            "\"coincidences_C\"",
            "\"nosig_rounds_R0\"",
            "\"nosig_idler_clicks_I\"",
            "\"herald_histogram\"",
            "\"wall_clock_s\"",
        ] {
            assert!(json.contains(key), "missing {key}");
        }
        assert_eq!(CountsLedger::from_json_str(&json).unwrap(), ledger);
    }

    #[test]
    fn shard_ranges_cover_and_align() {
        let ranges = shard_ranges(1234, 10, 4);
        assert_eq!(ranges.first().unwrap().start, 0);
        assert_eq!(ranges.last().unwrap().end, 1234);
        for w in ranges.windows(2) {
            assert_eq!(w[0].end, w[1].start);
            assert_eq!(w[1].start % 10, 0);
        }
        assert_eq!(shard_ranges(5, 10, 8), vec![0..5]);
    }
}
