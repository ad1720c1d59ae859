//! Configuration and shared value types.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::ConfigError;
use crate::time::Picos;

/// Side length of the square memory-cell grid.
pub const GRID_SIDE: usize = 10;

/// Noise and retrieval constants fit by [`crate::oracle::calibrate`] against the
/// preset anchors in [`crate::scenario::anchor_targets`].
pub mod calibrated {
    pub const RETRIEVAL_EFFICIENCY_0: f64 = 0.028033393721655277;
    /// The fit drives this to zero (1e-16); stored as exactly zero.
    pub const NOISE_CLICK_PROB: f64 = 0.0;
    pub const IDLER_NOISE_PROB: f64 = 5.719916482039718e-4;
    /// Signal path efficiency of the converted 12 km link.
    pub const SIGNAL_PATH_EFFICIENCY_TELECOM: f64 = 0.0064;
    /// Pair-excitation parameter giving a mean success probability of 0.167 %
    /// on the default 12 km link.
    pub const CHI_FIXED_STORAGE_OPERATING_POINT: f64 = 0.3932119926023805;
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecayShape {
    #[default]
    Exponential,
    Gaussian,
}

/// When heralded spin waves are retrieved.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReadoutPolicy {
    /// Read each heralded mode a fixed feedforward latency after its herald.
    #[default]
    Immediate,
    /// Read every heralded mode at one predefined timestamp.
    Scheduled,
}

impl fmt::Display for ReadoutPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ReadoutPolicy::Immediate => "immediate",
            ReadoutPolicy::Scheduled => "scheduled",
        })
    }
}

impl std::str::FromStr for ReadoutPolicy {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "immediate" | "A" | "a" => Ok(ReadoutPolicy::Immediate),
            "scheduled" | "B" | "b" => Ok(ReadoutPolicy::Scheduled),
            other => Err(format!("unknown policy `{other}`")),
        }
    }
}

/// Memory coherence time, either shared by all modes or listed per bin.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CoherenceTime {
    Shared(f64),
    PerMode(Vec<f64>),
}

impl CoherenceTime {
    pub fn for_bin(&self, bin: usize) -> f64 {
        match self {
            CoherenceTime::Shared(tau) => *tau,
            CoherenceTime::PerMode(taus) => taus[bin],
        }
    }

    pub fn mean(&self) -> f64 {
        match self {
            CoherenceTime::Shared(tau) => *tau,
            CoherenceTime::PerMode(taus) => taus.iter().sum::<f64>() / taus.len() as f64,
        }
    }
}

/// All physical and protocol parameters of one half-link scenario.
///
/// Field names are the on-disk JSON keys; unknown keys are rejected.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LinkConfig {
    pub fiber_length_m: f64,
    pub fiber_light_speed_mps: f64,
    pub n_cells: usize,
    pub angles_per_cell: usize,
    pub cell_switch_time_s: f64,
    pub intra_cell_bin_gap_s: f64,
    pub inter_cell_bin_gap_s: f64,
    pub feedforward_latency_s: f64,
    pub chi: f64,
    pub signal_path_efficiency: f64,
    pub fiber_attenuation_db_per_km: f64,
    pub noise_click_prob: f64,
    pub retrieval_efficiency_0: f64,
    pub idler_noise_prob: f64,
    pub coherence_time_s: CoherenceTime,
    pub decay_shape: DecayShape,
    pub readout_policy: ReadoutPolicy,
    /// Maximum heralds registered per round; `null` registers all of them.
    pub herald_cap: Option<usize>,
    /// Stop the heralding stage at the first herald.
    pub first_only: bool,
    pub mot_load_time_s: f64,
    pub pump_time_s: f64,
    pub rounds_per_cycle: usize,
    pub rng_seed: u64,
    /// Modes excited per round; `null` uses every mode.
    pub n_used_modes: Option<usize>,
    /// Standard deviation of herald arrival jitter.
    pub herald_jitter_s: f64,
    /// Heralds travel back over a second fiber of the same length.
    pub herald_via_return_fiber: bool,
    /// Overrides the derived policy-B read-out timestamp.
    pub scheduled_read_time_s: Option<f64>,
    /// Accept cell timing that does not add up to the cell switching time.
    pub allow_timing_mismatch: bool,
}

impl Default for LinkConfig {
    fn default() -> Self {
        LinkConfig {
            fiber_length_m: 12_000.0,
            fiber_light_speed_mps: 2.0e8,
            n_cells: 70,
            angles_per_cell: 4,
            cell_switch_time_s: 1.7e-6,
            intra_cell_bin_gap_s: 400e-9,
            inter_cell_bin_gap_s: 500e-9,
            feedforward_latency_s: 10e-6,
            chi: calibrated::CHI_FIXED_STORAGE_OPERATING_POINT,
            signal_path_efficiency: calibrated::SIGNAL_PATH_EFFICIENCY_TELECOM,
            fiber_attenuation_db_per_km: 0.2,
            noise_click_prob: calibrated::NOISE_CLICK_PROB,
            retrieval_efficiency_0: calibrated::RETRIEVAL_EFFICIENCY_0,
            idler_noise_prob: calibrated::IDLER_NOISE_PROB,
            coherence_time_s: CoherenceTime::Shared(235e-6),
            decay_shape: DecayShape::Exponential,
            readout_policy: ReadoutPolicy::Immediate,
            herald_cap: Some(3),
            first_only: false,
            mot_load_time_s: 22e-3,
            pump_time_s: 60e-6,
            rounds_per_cycle: 10,
            rng_seed: 0x5EED_0000_0000_0001,
            n_used_modes: None,
            herald_jitter_s: 0.0,
            herald_via_return_fiber: true,
            scheduled_read_time_s: None,
            allow_timing_mismatch: false,
        }
    }
}

/// A single failed invariant.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Violation {
    pub field: &'static str,
    pub message: String,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ValidationResult {
    pub violations: Vec<Violation>,
}

impl ValidationResult {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn into_result(self) -> Result<(), ConfigError> {
        if self.violations.is_empty() {
            Ok(())
        } else {
            Err(ConfigError::Invalid(self.violations))
        }
    }

    fn push(&mut self, field: &'static str, message: impl Into<String>) {
        self.violations.push(Violation {
            field,
            message: message.into(),
        });
    }
}

/// Checks every invariant of `config` without modifying it.
pub fn validate(config: &LinkConfig) -> ValidationResult {
    let mut out = ValidationResult::default();

    let non_negative = [
        ("fiber_length_m", config.fiber_length_m),
        ("cell_switch_time_s", config.cell_switch_time_s),
        ("intra_cell_bin_gap_s", config.intra_cell_bin_gap_s),
        ("inter_cell_bin_gap_s", config.inter_cell_bin_gap_s),
        ("feedforward_latency_s", config.feedforward_latency_s),
        (
            "fiber_attenuation_db_per_km",
            config.fiber_attenuation_db_per_km,
        ),
        ("mot_load_time_s", config.mot_load_time_s),
        ("pump_time_s", config.pump_time_s),
        ("herald_jitter_s", config.herald_jitter_s),
    ];
    for (field, value) in non_negative {
        if !(value.is_finite() && value >= 0.0) {
            out.push(field, format!("must be finite and >= 0, got {value}"));
        }
    }

    let probabilities = [
        ("signal_path_efficiency", config.signal_path_efficiency),
        ("noise_click_prob", config.noise_click_prob),
        ("retrieval_efficiency_0", config.retrieval_efficiency_0),
        ("idler_noise_prob", config.idler_noise_prob),
    ];
    for (field, value) in probabilities {
        if !(0.0..=1.0).contains(&value) {
            out.push(
                field,
                format!("must be a probability in [0, 1], got {value}"),
            );
        }
    }
    if config.signal_path_efficiency <= 0.0 {
        out.push("signal_path_efficiency", "must be > 0");
    }
    if config.retrieval_efficiency_0 <= 0.0 {
        out.push("retrieval_efficiency_0", "must be > 0");
    }

    if !(config.chi >= 0.0 && config.chi < 0.5) {
        out.push(
            "chi",
            format!("requires 0 <= chi < 0.5, got {}", config.chi),
        );
    }
    if !(config.fiber_light_speed_mps.is_finite() && config.fiber_light_speed_mps > 0.0) {
        out.push("fiber_light_speed_mps", "must be > 0");
    }
    if config.n_cells == 0 {
        out.push("n_cells", "must be >= 1");
    }
    if config.n_cells > GRID_SIDE * GRID_SIDE {
        out.push(
            "n_cells",
            format!("exceeds the {}-cell grid", GRID_SIDE * GRID_SIDE),
        );
    }
    if config.angles_per_cell == 0 {
        out.push("angles_per_cell", "must be >= 1");
    }
    if config.rounds_per_cycle == 0 {
        out.push("rounds_per_cycle", "must be >= 1");
    }
    if config.herald_cap == Some(0) {
        out.push("herald_cap", "must be >= 1 or null");
    }

    if config.n_cells > 1 && config.angles_per_cell > 0 && !config.allow_timing_mismatch {
        let span = Picos::from_secs(config.intra_cell_bin_gap_s)
            * (config.angles_per_cell as i64 - 1)
            + Picos::from_secs(config.inter_cell_bin_gap_s);
        let switch = Picos::from_secs(config.cell_switch_time_s);
        if span != switch {
            out.push(
                "cell_switch_time_s",
                format!(
                    "(angles_per_cell - 1) * intra gap + inter gap = {} ns must equal the cell switch time {} ns",
                    span.as_nanos(),
                    switch.as_nanos()
                ),
            );
        }
    }

    let total = config.n_cells * config.angles_per_cell;
    if let Some(n) = config.n_used_modes {
        if n == 0 || n > total {
            out.push("n_used_modes", format!("must be in 1..={total}, got {n}"));
        } else if config.angles_per_cell > 0 && n % config.angles_per_cell != 0 {
            out.push(
                "n_used_modes",
                format!(
                    "must be a multiple of angles_per_cell ({})",
                    config.angles_per_cell
                ),
            );
        }
    }

    match &config.coherence_time_s {
        CoherenceTime::Shared(tau) => {
            if !(tau.is_finite() && *tau > 0.0) {
                out.push("coherence_time_s", "must be > 0");
            }
        }
        CoherenceTime::PerMode(taus) => {
            if taus.len() != total {
                out.push(
                    "coherence_time_s",
                    format!("per-mode list has {} entries, expected {total}", taus.len()),
                );
            }
            if taus.iter().any(|t| !(t.is_finite() && *t > 0.0)) {
                out.push("coherence_time_s", "every entry must be > 0");
            }
        }
    }

    if let Some(t) = config.scheduled_read_time_s {
        if !(t.is_finite() && t >= 0.0) {
            out.push("scheduled_read_time_s", "must be finite and >= 0");
        }
    }

    out
}

/// Number of time-bin modes the memory array can produce per round.
pub fn total_modes(config: &LinkConfig) -> usize {
    config.n_cells * config.angles_per_cell
}

impl LinkConfig {
    pub fn from_json_str(text: &str) -> Result<Self, ConfigError> {
        Ok(serde_json::from_str(text)?)
    }

    /// Reads and validates a JSON config file.
    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.display().to_string(),
            source,
        })?;
        let config = Self::from_json_str(&text)?;
        validate(&config).into_result()?;
        Ok(config)
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> ValidationResult {
        validate(self)
    }

    pub fn total_modes(&self) -> usize {
        total_modes(self)
    }

    pub fn used_modes(&self) -> usize {
        self.n_used_modes.unwrap_or_else(|| self.total_modes())
    }

    /// One-way fiber transit time L/c.
    pub fn fiber_delay(&self) -> Picos {
        Picos::from_secs(self.fiber_length_m / self.fiber_light_speed_mps)
    }

    /// Emission-to-herald delay: 2L/c, or L/c when the herald skips the return fiber.
    pub fn herald_delay(&self) -> Picos {
        if self.herald_via_return_fiber {
            self.fiber_delay() * 2
        } else {
            self.fiber_delay()
        }
    }

    pub fn coherence_time_for(&self, bin: usize) -> f64 {
        self.coherence_time_s.for_bin(bin)
    }

    pub fn mean_coherence_time(&self) -> f64 {
        self.coherence_time_s.mean()
    }

    /// Effective per-round registration limit.
    pub fn registration_limit(&self) -> Option<usize> {
        if self.first_only {
            Some(1)
        } else {
            self.herald_cap
        }
    }

    /// Stable hex digest of the config, used to refuse merging unrelated ledgers.
    ///
    /// The seed is excluded so that shards run with different seeds can still merge.
    pub fn fingerprint(&self) -> String {
        let mut unseeded = self.clone();
        unseeded.rng_seed = 0;
        let json = serde_json::to_string(&unseeded).expect("config serializes");
        let digest = Sha256::digest(json.as_bytes());
        digest[..8].iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// Position of a mode in the cell/angle grid and in the time-bin train.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ModeId {
    pub cell_index: usize,
    pub angle_index: usize,
    pub bin_index: usize,
}

impl ModeId {
    pub fn new(cell_index: usize, angle_index: usize, angles_per_cell: usize) -> Self {
        debug_assert!(angle_index < angles_per_cell);
        ModeId {
            cell_index,
            angle_index,
            bin_index: cell_index * angles_per_cell + angle_index,
        }
    }

    pub fn from_bin(bin_index: usize, angles_per_cell: usize) -> Self {
        ModeId {
            cell_index: bin_index / angles_per_cell,
            angle_index: bin_index % angles_per_cell,
            bin_index,
        }
    }

    /// Angle label A, B, C, ...
    pub fn angle_label(&self) -> char {
        (b'A' + (self.angle_index % 26) as u8) as char
    }
}
