//! Heralding and feedforward logic.
//!
//! The controller sees herald pulses arriving during the heralding stage,
//! maps each arrival time back to the mode that produced it, registers up to
//! the configured cap and issues read-out orders according to the policy.

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::channel::{self, ChannelBudget, ModeStatistics, PairDistribution, PairSample};
use crate::error::ProtocolFault;
use crate::model::{LinkConfig, ModeId, ReadoutPolicy};
use crate::schedule::ModeSchedule;
use crate::time::Picos;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HeraldEvent {
    pub arrival: Picos,
    pub mode: ModeId,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ReadoutOrder {
    pub mode: ModeId,
    pub read_time: Picos,
    pub storage_time: Picos,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Registration {
    pub orders: Vec<ReadoutOrder>,
    /// Heralds received after the cap was reached, or repeating an already
    /// registered mode. They produce no read-out.
    pub excess: Vec<HeraldEvent>,
}

/// Maps a herald arrival time to the mode whose nominal herald time is nearest.
///
/// The arrival must lie inside the heralding window and within half the
/// local bin gap of that mode.
pub fn resolve_mode(schedule: &ModeSchedule, arrival: Picos) -> Result<ModeId, ProtocolFault> {
    let arrival_us = arrival.as_micros();
    let (start, end) = schedule.herald_window();
    if arrival < start || arrival > end {
        return Err(ProtocolFault::OutOfWindow { arrival_us });
    }
    let heralds = schedule.herald_times();
    let idx = heralds.partition_point(|&t| t < arrival);
    let after = heralds.get(idx).copied();
    let before = idx.checked_sub(1).map(|i| heralds[i]);
    let half_default = schedule.bin_gap().0 / 2;

    let (bin, distance, half_gap) = match (before, after) {
        (Some(b), Some(a)) => {
            let db = (arrival - b).0;
            let da = (a - arrival).0;
            let half = (a - b).0 / 2;
            if db == da {
                return Err(ProtocolFault::Ambiguous { arrival_us });
            }
            if db < da {
                (idx - 1, db, half)
            } else {
                (idx, da, half)
            }
        }
        (None, Some(a)) => (idx, (a - arrival).0, half_default),
        (Some(b), None) => (idx - 1, (arrival - b).0, half_default),
        (None, None) => return Err(ProtocolFault::OutOfWindow { arrival_us }),
    };
    if distance > half_gap {
        return Err(ProtocolFault::Unresolvable { arrival_us });
    }
    Ok(schedule.mode(bin))
}

/// Registers heralds in arrival order until `limit` orders exist.
pub fn register_heralds(
    events: &[HeraldEvent],
    schedule: &ModeSchedule,
    limit: Option<usize>,
) -> Registration {
    let cap = limit.unwrap_or(usize::MAX);
    let mut reg = Registration::default();
    for &event in events {
        let duplicate = reg.orders.iter().any(|o| o.mode == event.mode);
        if reg.orders.len() >= cap || duplicate {
            reg.excess.push(event);
            continue;
        }
        let read_time = match schedule.policy() {
            ReadoutPolicy::Immediate => event.arrival + schedule.feedforward_latency(),
            ReadoutPolicy::Scheduled => schedule.scheduled_read_time(),
        };
        reg.orders.push(ReadoutOrder {
            mode: event.mode,
            read_time,
            storage_time: read_time - schedule.emission_time(event.mode.bin_index),
        });
    }
    reg
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Readout {
    pub order: ReadoutOrder,
    pub spin_wave_present: bool,
    pub idler_click: bool,
}

/// Everything that happened in one round.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RoundOutcome {
    /// Bins whose signal detector clicked, in emission order.
    pub signal_clicks: Vec<usize>,
    pub heralds: Vec<HeraldEvent>,
    pub readouts: Vec<Readout>,
    pub excess_heralds: usize,
    pub faults: Vec<ProtocolFault>,
    /// Random read-out performed when no signal clicked.
    pub nosig_readout: Option<Readout>,
}

impl RoundOutcome {
    pub fn is_no_signal(&self) -> bool {
        self.signal_clicks.is_empty()
    }
}

/// How the per-mode write and detection step is drawn.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum SamplerKind {
    /// Jump between signal clicks with geometric gaps on the marginal click
    /// probability, then draw the pair number from its posterior.
    #[default]
    SkipSilent,
    /// Draw the pair number and the detector outcome of every mode.
    PerMode,
}

/// Reusable per-round state for one config and schedule.
pub struct RoundRunner<'a> {
    config: &'a LinkConfig,
    schedule: &'a ModeSchedule,
    kind: SamplerKind,
    pairs: PairDistribution,
    budget: ChannelBudget,
    stats: ModeStatistics,
    log_silence: f64,
    jitter: Option<Normal<f64>>,
    mode_pairs: Vec<u8>,
    clicked: Vec<(usize, u8)>,
}

impl<'a> RoundRunner<'a> {
    pub fn new(config: &'a LinkConfig, schedule: &'a ModeSchedule, kind: SamplerKind) -> Self {
        let budget = ChannelBudget::from_config(config);
        let stats = ModeStatistics::new(config.chi, &budget, config.noise_click_prob);
        let jitter = (config.herald_jitter_s > 0.0)
            .then(|| Normal::new(0.0, config.herald_jitter_s * 1e12).expect("finite jitter"));
        RoundRunner {
            config,
            schedule,
            kind,
            pairs: PairDistribution::new(config.chi),
            budget,
            log_silence: (-stats.click_prob).ln_1p(),
            stats,
            jitter,
            mode_pairs: vec![0; schedule.n_used_modes()],
            clicked: Vec::new(),
        }
    }

    pub fn schedule(&self) -> &ModeSchedule {
        self.schedule
    }

    fn sample_clicks<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        self.clicked.clear();
        let n = self.schedule.n_used_modes();
        match self.kind {
            SamplerKind::PerMode => {
                for bin in 0..n {
                    let pair = self.pairs.sample(rng);
                    self.mode_pairs[bin] = pair.n_pairs;
                    if channel::detect_signal(pair, &self.budget, self.config.noise_click_prob, rng)
                    {
                        self.clicked.push((bin, pair.n_pairs));
                    }
                }
            }
            SamplerKind::SkipSilent => {
                let p = self.stats.click_prob;
                if p <= 0.0 {
                    return;
                }
                let mut bin = 0usize;
                while bin < n {
                    if p < 1.0 {
                        let u: f64 = rng.random();
                        let gap = ((1.0 - u).ln() / self.log_silence).floor();
                        if gap >= (n - bin) as f64 {
                            break;
                        }
                        bin += gap as usize;
                    }
                    let pair = self.stats.sample_pairs_given_click(rng);
                    self.clicked.push((bin, pair.n_pairs));
                    bin += 1;
                }
            }
        }
    }

    /// Pair number of a mode that did not click (or whose click is not at hand).
    fn pairs_of<R: Rng + ?Sized>(&self, bin: usize, rng: &mut R) -> PairSample {
        if let Some(&(_, n_pairs)) = self.clicked.iter().find(|(b, _)| *b == bin) {
            return PairSample { n_pairs };
        }
        match self.kind {
            SamplerKind::PerMode => PairSample {
                n_pairs: self.mode_pairs[bin],
            },
            SamplerKind::SkipSilent => self.stats.sample_pairs_given_silence(rng),
        }
    }

    fn read<R: Rng + ?Sized>(&self, order: ReadoutOrder, pair: PairSample, rng: &mut R) -> Readout {
        let spin = pair.spin_wave_present();
        let tau = self.config.coherence_time_for(order.mode.bin_index);
        let idler_click =
            channel::sample_readout(spin, order.storage_time.as_secs(), tau, self.config, rng);
        Readout {
            order,
            spin_wave_present: spin,
            idler_click,
        }
    }

    /// Runs one complete round.
    ///
    /// Draw order: mode writes and signal detection, herald jitter (if any),
    /// one idler draw per registered read-out, then for a no-signal round the
    /// random mode and its idler draw.
    pub fn run<R: Rng + ?Sized>(&mut self, rng: &mut R) -> RoundOutcome {
        self.sample_clicks(rng);
        let mut outcome = RoundOutcome {
            signal_clicks: self.clicked.iter().map(|&(bin, _)| bin).collect(),
            ..RoundOutcome::default()
        };

        for &(bin, _) in &self.clicked {
            let mut arrival = self.schedule.herald_time(bin);
            if let Some(jitter) = &self.jitter {
                arrival += Picos(jitter.sample(rng).round() as i64);
            }
            match resolve_mode(self.schedule, arrival) {
                Ok(mode) => outcome.heralds.push(HeraldEvent { arrival, mode }),
                Err(fault) => outcome.faults.push(fault),
            }
        }
        outcome.heralds.sort_by_key(|h| h.arrival);

        let registration = register_heralds(
            &outcome.heralds,
            self.schedule,
            self.config.registration_limit(),
        );
        outcome.excess_heralds = registration.excess.len();
        for order in registration.orders {
            let pair = self.pairs_of(order.mode.bin_index, rng);
            outcome.readouts.push(self.read(order, pair, rng));
        }

        if outcome.is_no_signal() {
            let bin = rng.random_range(0..self.schedule.n_used_modes());
            let mode = self.schedule.mode(bin);
            let storage_time = self.schedule.nominal_storage(bin);
            let order = ReadoutOrder {
                mode,
                read_time: self.schedule.emission_time(bin) + storage_time,
                storage_time,
            };
            let pair = self.pairs_of(bin, rng);
            outcome.nosig_readout = Some(self.read(order, pair, rng));
        }
        outcome
    }
}

/// Runs one round with the default sampler.
pub fn run_round<R: Rng + ?Sized>(
    config: &LinkConfig,
    schedule: &ModeSchedule,
    rng: &mut R,
) -> RoundOutcome {
    RoundRunner::new(config, schedule, SamplerKind::default()).run(rng)
}
