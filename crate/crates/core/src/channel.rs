//! Photonic channel: pair generation, signal detection and memory retrieval.
//!
//! Pair number per mode and write trial follows truncated thermal statistics,
//! `P(n) ∝ chi^n` for `n <= 2`. Signal clicks come from any of the `n` photons
//! surviving the path, or from an independent noise floor. Idler clicks come
//! from the retrieved spin wave, or from an independent idler noise floor.

use rand::Rng;

use crate::model::{DecayShape, LinkConfig};

pub const MAX_PAIRS: usize = 2;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PairSample {
    pub n_pairs: u8,
}

impl PairSample {
    pub fn spin_wave_present(&self) -> bool {
        self.n_pairs >= 1
    }
}

/// Truncated thermal pair-number distribution.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PairDistribution {
    probs: [f64; MAX_PAIRS + 1],
}

impl PairDistribution {
    pub fn new(chi: f64) -> Self {
        debug_assert!((0.0..0.5).contains(&chi), "chi = {chi}");
        let norm = 1.0 + chi + chi * chi;
        PairDistribution {
            probs: [1.0 / norm, chi / norm, chi * chi / norm],
        }
    }

    pub fn probs(&self) -> [f64; MAX_PAIRS + 1] {
        self.probs
    }

    pub fn prob(&self, n: usize) -> f64 {
        self.probs[n]
    }

    /// Probability that at least one spin wave is stored.
    pub fn spin_wave_prob(&self) -> f64 {
        self.probs[1] + self.probs[2]
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> PairSample {
        PairSample {
            n_pairs: pick(&self.probs, rng.random::<f64>()) as u8,
        }
    }
}

fn pick(weights: &[f64; MAX_PAIRS + 1], u: f64) -> usize {
    let mut acc = 0.0;
    for (n, w) in weights.iter().enumerate().take(MAX_PAIRS) {
        acc += w;
        if u < acc {
            return n;
        }
    }
    MAX_PAIRS
}

pub fn sample_write<R: Rng + ?Sized>(chi: f64, rng: &mut R) -> PairSample {
    PairDistribution::new(chi).sample(rng)
}

/// Loss budget of the signal path.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ChannelBudget {
    pub fiber_transmission: f64,
    pub signal_detect_prob_per_photon: f64,
}

impl ChannelBudget {
    pub fn new(signal_path_efficiency: f64, attenuation_db_per_km: f64, length_m: f64) -> Self {
        let fiber_transmission = 10f64.powf(-attenuation_db_per_km * (length_m / 1000.0) / 10.0);
        ChannelBudget {
            fiber_transmission,
            signal_detect_prob_per_photon: signal_path_efficiency * fiber_transmission,
        }
    }

    pub fn from_config(config: &LinkConfig) -> Self {
        Self::new(
            config.signal_path_efficiency,
            config.fiber_attenuation_db_per_km,
            config.fiber_length_m,
        )
    }
}

/// Probability of a signal click given `n_pairs` photons in the mode.
pub fn signal_click_prob(n_pairs: u8, budget: &ChannelBudget, noise_click_prob: f64) -> f64 {
    let miss = (1.0 - budget.signal_detect_prob_per_photon).powi(n_pairs as i32);
    1.0 - (1.0 - noise_click_prob) * miss
}

pub fn detect_signal<R: Rng + ?Sized>(
    pair: PairSample,
    budget: &ChannelBudget,
    noise_click_prob: f64,
    rng: &mut R,
) -> bool {
    rng.random::<f64>() < signal_click_prob(pair.n_pairs, budget, noise_click_prob)
}

/// Marginal signal click probability per mode.
pub fn mode_click_prob(chi: f64, budget: &ChannelBudget, noise_click_prob: f64) -> f64 {
    let dist = PairDistribution::new(chi);
    (0..=MAX_PAIRS)
        .map(|n| dist.prob(n) * signal_click_prob(n as u8, budget, noise_click_prob))
        .sum()
}

/// Click probability with excitation over the noise-only click probability.
pub fn signal_to_noise(chi: f64, budget: &ChannelBudget, noise_click_prob: f64) -> f64 {
    mode_click_prob(chi, budget, noise_click_prob) / noise_click_prob
}

pub fn retrieval_efficiency(t_storage_s: f64, eta0: f64, tau_s: f64, shape: DecayShape) -> f64 {
    let x = t_storage_s / tau_s;
    match shape {
        DecayShape::Exponential => eta0 * (-x).exp(),
        DecayShape::Gaussian => eta0 * (-x * x).exp(),
    }
}

/// Idler click probability for one read-out.
pub fn idler_click_prob(
    spin_wave_present: bool,
    t_storage_s: f64,
    tau_s: f64,
    config: &LinkConfig,
) -> f64 {
    let retrieved = if spin_wave_present {
        retrieval_efficiency(
            t_storage_s,
            config.retrieval_efficiency_0,
            tau_s,
            config.decay_shape,
        )
    } else {
        0.0
    };
    1.0 - (1.0 - config.idler_noise_prob) * (1.0 - retrieved)
}

pub fn sample_readout<R: Rng + ?Sized>(
    spin_wave_present: bool,
    t_storage_s: f64,
    tau_s: f64,
    config: &LinkConfig,
    rng: &mut R,
) -> bool {
    rng.random::<f64>() < idler_click_prob(spin_wave_present, t_storage_s, tau_s, config)
}

/// Per-mode write-and-detect statistics with the pair-number posteriors the
/// round sampler needs.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ModeStatistics {
    pub click_prob: f64,
    pub pairs_given_click: [f64; MAX_PAIRS + 1],
    pub pairs_given_silence: [f64; MAX_PAIRS + 1],
}

impl ModeStatistics {
    pub fn new(chi: f64, budget: &ChannelBudget, noise_click_prob: f64) -> Self {
        let dist = PairDistribution::new(chi);
        let mut click = [0.0; MAX_PAIRS + 1];
        let mut silence = [0.0; MAX_PAIRS + 1];
        for n in 0..=MAX_PAIRS {
            let s = signal_click_prob(n as u8, budget, noise_click_prob);
            click[n] = dist.prob(n) * s;
            silence[n] = dist.prob(n) * (1.0 - s);
        }
        let click_prob: f64 = click.iter().sum();
        let silence_prob: f64 = silence.iter().sum();
        if click_prob > 0.0 {
            click.iter_mut().for_each(|p| *p /= click_prob);
        }
        if silence_prob > 0.0 {
            silence.iter_mut().for_each(|p| *p /= silence_prob);
        }
        ModeStatistics {
            click_prob,
            pairs_given_click: click,
            pairs_given_silence: silence,
        }
    }

    pub fn from_config(config: &LinkConfig) -> Self {
        Self::new(
            config.chi,
            &ChannelBudget::from_config(config),
            config.noise_click_prob,
        )
    }

    pub fn sample_pairs_given_click<R: Rng + ?Sized>(&self, rng: &mut R) -> PairSample {
        PairSample {
            n_pairs: pick(&self.pairs_given_click, rng.random::<f64>()) as u8,
        }
    }

    pub fn sample_pairs_given_silence<R: Rng + ?Sized>(&self, rng: &mut R) -> PairSample {
        PairSample {
            n_pairs: pick(&self.pairs_given_silence, rng.random::<f64>()) as u8,
        }
    }
}
