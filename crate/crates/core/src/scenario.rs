//! Named presets and sweeps over them.
//!
//! The telecom presets run the 12 km link; `local400` excites the whole
//! 10 × 10 grid with the detector next to the memory; `onekm` sends three
//! cells over 1 km of unconverted fiber with the herald returned directly.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::controller::SamplerKind;
use crate::engine::{self, BatchOptions, CountsLedger};
use crate::error::{Error, Result};
use crate::model::{LinkConfig, ReadoutPolicy};
use crate::oracle::{self, CalibrationParams, CalibrationTarget, RetrievalAnchor, CHI_MAX};
use crate::stats::{LinkReport, ReportDetail};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioName {
    Fig3b,
    Fig3c,
    Fig4b,
    Fig4c,
    Local400,
    Onekm,
    Custom,
}

impl ScenarioName {
    pub const ALL: [ScenarioName; 7] = [
        ScenarioName::Fig3b,
        ScenarioName::Fig3c,
        ScenarioName::Fig4b,
        ScenarioName::Fig4c,
        ScenarioName::Local400,
        ScenarioName::Onekm,
        ScenarioName::Custom,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ScenarioName::Fig3b => "fig3b",
            ScenarioName::Fig3c => "fig3c",
            ScenarioName::Fig4b => "fig4b",
            ScenarioName::Fig4c => "fig4c",
            ScenarioName::Local400 => "local400",
            ScenarioName::Onekm => "onekm",
            ScenarioName::Custom => "custom",
        }
    }
}

impl fmt::Display for ScenarioName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ScenarioName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ScenarioName::ALL
            .into_iter()
            .find(|n| n.as_str() == s)
            .ok_or_else(|| Error::UnknownScenario(s.to_owned()))
    }
}

/// What a sweep varies.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum SweepAxis {
    /// Per-mode success probabilities; chi is solved for each.
    PBar(Vec<f64>),
    /// Numbers of excited modes, taken as prefixes of the cell order.
    Modes(Vec<usize>),
    None,
}

impl SweepAxis {
    pub fn label(&self) -> &'static str {
        match self {
            SweepAxis::PBar(_) => "p_bar",
            SweepAxis::Modes(_) => "N_modes",
            SweepAxis::None => "none",
        }
    }

    pub fn values(&self) -> Vec<f64> {
        match self {
            SweepAxis::PBar(v) => v.clone(),
            SweepAxis::Modes(v) => v.iter().map(|&n| n as f64).collect(),
            SweepAxis::None => Vec::new(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Scenario {
    pub name: ScenarioName,
    pub base_config: LinkConfig,
    pub axis: SweepAxis,
}

/// Success probability of the fixed-storage operating point on the 12 km link.
pub const P_BAR_OPERATING: f64 = 0.00167;
/// Ends of the p̄ range swept on the 12 km link.
pub const P_BAR_SWEEP_RANGE: (f64, f64) = (4e-5, 1.7e-3);
pub const P_BAR_FIG3C: f64 = 4.2e-4;
pub const P_BAR_FIG4C: f64 = 4.3e-4;
pub const P_BAR_LOCAL: f64 = 0.0017;
pub const P_BAR_ONEKM: f64 = 0.001;
pub const MODE_GRID: [usize; 5] = [4, 40, 80, 160, 280];

/// Signal path efficiency (excluding fiber) of the local detection setup.
pub const SIGNAL_PATH_EFFICIENCY_LOCAL: f64 = 0.04;
/// Signal path efficiency (excluding fiber) of the unconverted 1 km setup.
pub const SIGNAL_PATH_EFFICIENCY_ONEKM: f64 = 0.06;
/// Mode-averaged retrieval efficiency measured in the 1 km setup.
pub const RETRIEVAL_EFFICIENCY_ONEKM: f64 = 0.026;

/// Six log-spaced values spanning [`P_BAR_SWEEP_RANGE`].
pub fn p_bar_grid() -> Vec<f64> {
    let (lo, hi) = P_BAR_SWEEP_RANGE;
    let ratio = (hi / lo).ln() / 5.0;
    (0..6).map(|k| lo * (ratio * k as f64).exp()).collect()
}

fn with_p_bar(mut config: LinkConfig, p_bar: f64) -> LinkConfig {
    config.chi = oracle::chi_for_p_bar(&config, p_bar).expect("preset p_bar is reachable");
    config
}

/// The 12 km link with the calibrated parameters.
pub fn telecom_base(policy: ReadoutPolicy) -> LinkConfig {
    LinkConfig {
        readout_policy: policy,
        ..LinkConfig::default()
    }
}

/// Whole-grid excitation without fiber; all 400 modes read when the scan ends.
pub fn local400_config() -> LinkConfig {
    with_p_bar(
        LinkConfig {
            n_cells: 100,
            fiber_length_m: 0.0,
            signal_path_efficiency: SIGNAL_PATH_EFFICIENCY_LOCAL,
            feedforward_latency_s: 0.0,
            readout_policy: ReadoutPolicy::Scheduled,
            scheduled_read_time_s: Some(170e-6),
            ..LinkConfig::default()
        },
        P_BAR_LOCAL,
    )
}

/// Three cells over 1 km of fiber at 4 dB/km, herald returned directly.
pub fn onekm_config() -> LinkConfig {
    with_p_bar(
        LinkConfig {
            n_cells: 3,
            fiber_length_m: 1000.0,
            fiber_attenuation_db_per_km: 4.0,
            signal_path_efficiency: SIGNAL_PATH_EFFICIENCY_ONEKM,
            herald_via_return_fiber: false,
            readout_policy: ReadoutPolicy::Scheduled,
            ..LinkConfig::default()
        },
        P_BAR_ONEKM,
    )
}

impl Scenario {
    pub fn preset(name: ScenarioName) -> Scenario {
        use ReadoutPolicy::*;
        let (base_config, axis) = match name {
            ScenarioName::Fig3b => (telecom_base(Immediate), SweepAxis::PBar(p_bar_grid())),
            ScenarioName::Fig4b => (telecom_base(Scheduled), SweepAxis::PBar(p_bar_grid())),
            ScenarioName::Fig3c => (
                with_p_bar(telecom_base(Immediate), P_BAR_FIG3C),
                SweepAxis::Modes(MODE_GRID.to_vec()),
            ),
            ScenarioName::Fig4c => (
                with_p_bar(telecom_base(Scheduled), P_BAR_FIG4C),
                SweepAxis::Modes(MODE_GRID.to_vec()),
            ),
            ScenarioName::Local400 => (local400_config(), SweepAxis::None),
            ScenarioName::Onekm => (onekm_config(), SweepAxis::None),
            ScenarioName::Custom => (LinkConfig::default(), SweepAxis::None),
        };
        Scenario {
            name,
            base_config,
            axis,
        }
    }

    pub fn custom(config: LinkConfig) -> Scenario {
        Scenario {
            name: ScenarioName::Custom,
            base_config: config,
            axis: SweepAxis::None,
        }
    }

    /// Configs of the sweep points in axis order; a single point without an axis.
    pub fn point_configs(&self) -> Vec<(f64, LinkConfig)> {
        match &self.axis {
            SweepAxis::PBar(values) => values
                .iter()
                .map(|&p| (p, with_p_bar(self.base_config.clone(), p)))
                .collect(),
            SweepAxis::Modes(values) => values
                .iter()
                .map(|&n| {
                    let mut c = self.base_config.clone();
                    c.n_used_modes = Some(n);
                    (n as f64, c)
                })
                .collect(),
            SweepAxis::None => vec![(f64::NAN, self.base_config.clone())],
        }
    }
}

pub fn scenario(name: &str) -> Result<Scenario> {
    Ok(Scenario::preset(name.parse()?))
}

/// The three measured (p̄, g) anchors.
pub fn anchor_targets() -> Vec<CalibrationTarget> {
    vec![
        CalibrationTarget {
            name: "telecom_12km".into(),
            config: telecom_base(ReadoutPolicy::Immediate),
            p_bar: P_BAR_OPERATING,
            g: 2.67,
            g_sigma: 0.15,
        },
        CalibrationTarget {
            name: "local400".into(),
            config: local400_config(),
            p_bar: P_BAR_LOCAL,
            g: 14.8,
            g_sigma: 1.7,
        },
        CalibrationTarget {
            name: "onekm".into(),
            config: onekm_config(),
            p_bar: P_BAR_ONEKM,
            g: 17.1,
            g_sigma: 1.6,
        },
    ]
}

pub fn retrieval_anchors() -> Vec<RetrievalAnchor> {
    vec![RetrievalAnchor {
        name: "onekm".into(),
        config: onekm_config(),
        efficiency: RETRIEVAL_EFFICIENCY_ONEKM,
    }]
}

/// Starting point for calibration, deliberately away from the stored values.
pub fn calibration_start() -> CalibrationParams {
    CalibrationParams {
        retrieval_efficiency_0: 0.04,
        noise_click_prob: 1e-6,
        idler_noise_prob: 1e-3,
    }
}

/// Ordinary least-squares line.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

pub fn linear_fit(xs: &[f64], ys: &[f64]) -> Option<LinearFit> {
    let n = xs.len();
    if n < 2 || ys.len() != n {
        return None;
    }
    let nf = n as f64;
    let mx = xs.iter().sum::<f64>() / nf;
    let my = ys.iter().sum::<f64>() / nf;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    let r_squared = if syy == 0.0 {
        1.0
    } else {
        sxy * sxy / (sxx * syy)
    };
    Some(LinearFit {
        slope,
        intercept: my - slope * mx,
        r_squared,
    })
}

/// Where g falls to the classical bound of 2 along a p̄ sweep.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum BoundCrossing {
    /// Simulated g crosses 2 between two sweep points; p̄ by log-linear interpolation.
    Simulated { p_bar: f64 },
    /// The oracle crosses 2 at this p̄, beyond the sweep.
    Analytic { p_bar: f64, chi: f64 },
    /// The oracle stays above 2 for every chi the model admits.
    None { min_g: f64 },
}

pub const CLASSICAL_BOUND: f64 = 2.0;

/// Oracle search for the g = 2 crossing along chi for `config`'s schedule.
pub fn analytic_crossing(config: &LinkConfig) -> Result<BoundCrossing> {
    let g_at = |chi: f64| -> Result<f64> {
        Ok(oracle::analytic_for_config(&LinkConfig {
            chi,
            ..config.clone()
        })?
        .g)
    };
    let g_max_chi = g_at(CHI_MAX)?;
    if g_max_chi > CLASSICAL_BOUND {
        return Ok(BoundCrossing::None { min_g: g_max_chi });
    }
    let (mut lo, mut hi) = (1e-9, CHI_MAX);
    if g_at(lo)? <= CLASSICAL_BOUND {
        hi = lo;
    }
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if g_at(mid)? > CLASSICAL_BOUND {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let chi = 0.5 * (lo + hi);
    let budget = crate::channel::ChannelBudget::from_config(config);
    Ok(BoundCrossing::Analytic {
        p_bar: crate::channel::mode_click_prob(chi, &budget, config.noise_click_prob),
        chi,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepPoint {
    pub axis_value: f64,
    pub config: LinkConfig,
    pub ledger: CountsLedger,
    pub report: ReportDetail,
    pub oracle_g: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepResult {
    pub scenario: ScenarioName,
    pub axis_label: &'static str,
    pub points: Vec<SweepPoint>,
    /// p_total against the axis value.
    pub fit: Option<LinearFit>,
    pub crossing: Option<BoundCrossing>,
}

impl SweepResult {
    pub fn rows(&self) -> Vec<LinkReport> {
        self.points.iter().map(|p| p.report.row.clone()).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SweepOptions {
    pub rounds_per_point: u64,
    pub seed: Option<u64>,
    pub policy: Option<ReadoutPolicy>,
    pub sampler: SamplerKind,
}

impl SweepOptions {
    pub fn new(rounds_per_point: u64) -> Self {
        SweepOptions {
            rounds_per_point,
            seed: None,
            policy: None,
            sampler: SamplerKind::default(),
        }
    }
}

fn run_point(
    axis_value: f64,
    mut config: LinkConfig,
    options: &SweepOptions,
) -> Result<SweepPoint> {
    if let Some(seed) = options.seed {
        config.rng_seed = seed;
    }
    if let Some(policy) = options.policy {
        config.readout_policy = policy;
    }
    let ledger = engine::run_batch_with(
        &config,
        options.rounds_per_point,
        BatchOptions {
            sampler: options.sampler,
            shards: 1,
        },
    )?;
    let report = LinkReport::from_ledger(&ledger, &config)?;
    let oracle_g = oracle::analytic_for_config(&config)?.g;
    Ok(SweepPoint {
        axis_value,
        config,
        ledger,
        report,
        oracle_g,
    })
}

/// Runs every point of the scenario. Points run concurrently; the result is
/// in axis order.
pub fn run_sweep(scenario: &Scenario, options: &SweepOptions) -> Result<SweepResult> {
    let points: Vec<SweepPoint> = scenario
        .point_configs()
        .into_par_iter()
        .map(|(x, config)| run_point(x, config, options))
        .collect::<Result<_>>()?;
    let xs: Vec<f64> = points.iter().map(|p| p.axis_value).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.report.row.p_total).collect();
    let fit = linear_fit(&xs, &ys);
    let crossing = match scenario.axis {
        SweepAxis::PBar(_) => Some(simulated_crossing(&points).map_or_else(
            || {
                let mut c = scenario.base_config.clone();
                if let Some(policy) = options.policy {
                    c.readout_policy = policy;
                }
                analytic_crossing(&c)
            },
            Ok,
        )?),
        _ => None,
    };
    Ok(SweepResult {
        scenario: scenario.name,
        axis_label: scenario.axis.label(),
        points,
        fit,
        crossing,
    })
}

fn simulated_crossing(points: &[SweepPoint]) -> Option<BoundCrossing> {
    points.windows(2).find_map(|w| {
        let (a, b) = (&w[0], &w[1]);
        let (ga, gb) = (a.report.row.g?, b.report.row.g?);
        if ga > CLASSICAL_BOUND && gb <= CLASSICAL_BOUND {
            let f = (ga - CLASSICAL_BOUND) / (ga - gb);
            let p_bar = (a.axis_value.ln() + f * (b.axis_value.ln() - a.axis_value.ln())).exp();
            Some(BoundCrossing::Simulated { p_bar })
        } else {
            None
        }
    })
}

/// Outcome of a single-point scenario run.
#[derive(Clone, Debug, PartialEq)]
pub struct ScenarioRun {
    pub config: LinkConfig,
    pub ledger: CountsLedger,
    pub report: ReportDetail,
    pub nosig_fraction: f64,
    /// `(1 − p̄)^N` from the oracle.
    pub nosig_fraction_expected: f64,
    pub oracle: oracle::ScheduleOracle,
}

pub fn run_single(config: &LinkConfig, n_rounds: u64) -> Result<ScenarioRun> {
    let ledger = engine::run_batch(config, n_rounds)?;
    let report = LinkReport::from_ledger(&ledger, config)?;
    let oracle = oracle::analytic_for_config(config)?;
    Ok(ScenarioRun {
        config: config.clone(),
        nosig_fraction: ledger.nosig_rounds as f64 / ledger.n_rounds as f64,
        nosig_fraction_expected: (1.0 - oracle.p_s).powi(oracle.n_modes as i32),
        ledger,
        report,
        oracle,
    })
}

pub fn onekm_scenario(n_rounds: u64) -> Result<ScenarioRun> {
    run_single(&onekm_config(), n_rounds)
}

pub fn local400_scenario(n_rounds: u64) -> Result<ScenarioRun> {
    run_single(&local400_config(), n_rounds)
}
