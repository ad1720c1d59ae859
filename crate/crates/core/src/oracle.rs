//! Closed-form expectations of the Monte Carlo observables, and calibration
//! of the noise and retrieval parameters against measured anchor points.

use serde::{Deserialize, Serialize};

use crate::channel::{self, ChannelBudget, PairDistribution, MAX_PAIRS};
use crate::error::{CalibrationError, Result};
use crate::lsq;
use crate::model::LinkConfig;
use crate::schedule::{build_schedule, ModeSchedule};

/// Per-mode probabilities at one storage time.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OraclePoint {
    pub storage_time_s: f64,
    pub p_s: f64,
    pub p_si_given_s: f64,
    pub p_i_given_nosig: f64,
    /// Unconditional idler click probability.
    pub p_i: f64,
    /// `p_si_given_s / p_i_given_nosig`, the limit of the counts estimator.
    pub g_analytic: f64,
    /// `p_si / (p_s · p_i)`.
    pub g_exact: f64,
}

/// Analytic probabilities with an explicit coherence time.
pub fn analytic_probs_with_tau(
    config: &LinkConfig,
    storage_time_s: f64,
    tau_s: f64,
) -> OraclePoint {
    let dist = PairDistribution::new(config.chi);
    let budget = ChannelBudget::from_config(config);
    let (mut p_s, mut p_si, mut p_nosig_i, mut p_i) = (0.0, 0.0, 0.0, 0.0);
    for n in 0..=MAX_PAIRS {
        let p = dist.prob(n);
        let s = channel::signal_click_prob(n as u8, &budget, config.noise_click_prob);
        let r = channel::idler_click_prob(n >= 1, storage_time_s, tau_s, config);
        p_s += p * s;
        p_si += p * s * r;
        p_nosig_i += p * (1.0 - s) * r;
        p_i += p * r;
    }
    let p_si_given_s = if p_s > 0.0 { p_si / p_s } else { 0.0 };
    let p_i_given_nosig = if p_s < 1.0 {
        p_nosig_i / (1.0 - p_s)
    } else {
        0.0
    };
    OraclePoint {
        storage_time_s,
        p_s,
        p_si_given_s,
        p_i_given_nosig,
        p_i,
        g_analytic: ratio(p_si_given_s, p_i_given_nosig),
        g_exact: ratio(p_si, p_s * p_i),
    }
}

fn ratio(num: f64, den: f64) -> f64 {
    if den > 0.0 {
        num / den
    } else if num > 0.0 {
        f64::INFINITY
    } else {
        f64::NAN
    }
}

/// Analytic probabilities at `storage_time_s` using the mean coherence time.
pub fn analytic_probs(config: &LinkConfig, storage_time_s: f64) -> OraclePoint {
    analytic_probs_with_tau(config, storage_time_s, config.mean_coherence_time())
}

/// Mode-averaged expectations for a schedule under its read-out policy.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScheduleOracle {
    pub n_modes: usize,
    pub p_s: f64,
    pub p_total: f64,
    pub mean_p_si_given_s: f64,
    pub mean_p_i_given_nosig: f64,
    /// Ratio of the mode averages; what the counts estimator converges to
    /// when heralded and random read-outs are spread uniformly over modes.
    pub g: f64,
    pub mean_retrieval_efficiency: f64,
    pub points: Vec<OraclePoint>,
}

pub fn analytic_for_schedule(config: &LinkConfig, schedule: &ModeSchedule) -> ScheduleOracle {
    let n = schedule.n_used_modes();
    let points: Vec<OraclePoint> = (0..n)
        .map(|bin| {
            analytic_probs_with_tau(
                config,
                schedule.nominal_storage(bin).as_secs(),
                config.coherence_time_for(bin),
            )
        })
        .collect();
    let mean = |f: &dyn Fn(&OraclePoint) -> f64| points.iter().map(f).sum::<f64>() / n as f64;
    let m_si = mean(&|p| p.p_si_given_s);
    let m_ni = mean(&|p| p.p_i_given_nosig);
    let eta = (0..n)
        .map(|bin| {
            channel::retrieval_efficiency(
                schedule.nominal_storage(bin).as_secs(),
                config.retrieval_efficiency_0,
                config.coherence_time_for(bin),
                config.decay_shape,
            )
        })
        .sum::<f64>()
        / n as f64;
    let p_s = points[0].p_s;
    ScheduleOracle {
        n_modes: n,
        p_s,
        p_total: p_s * n as f64,
        mean_p_si_given_s: m_si,
        mean_p_i_given_nosig: m_ni,
        g: ratio(m_si, m_ni),
        mean_retrieval_efficiency: eta,
        points,
    }
}

/// Builds the config's own schedule and evaluates it.
pub fn analytic_for_config(config: &LinkConfig) -> Result<ScheduleOracle> {
    let schedule = build_schedule(config, config.used_modes())?;
    Ok(analytic_for_schedule(config, &schedule))
}

/// Largest chi the pair model accepts.
pub const CHI_MAX: f64 = 0.5 - 1e-12;

/// The chi whose per-mode click probability equals `p_bar`, holding the
/// rest of `config` fixed. `None` when `p_bar` is below the noise floor or
/// above what chi < 0.5 can reach.
pub fn chi_for_p_bar(config: &LinkConfig, p_bar: f64) -> Option<f64> {
    let budget = ChannelBudget::from_config(config);
    let q = config.noise_click_prob;
    let f = |chi: f64| channel::mode_click_prob(chi, &budget, q) - p_bar;
    let (mut lo, mut hi) = (0.0, CHI_MAX);
    let (flo, fhi) = (f(lo), f(hi));
    if flo > 0.0 || fhi < 0.0 {
        return None;
    }
    if flo == 0.0 {
        return Some(0.0);
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-17 {
            break;
        }
    }
    Some(0.5 * (lo + hi))
}

/// `E[min(X, cap)]` for `X ~ Binomial(n, p)`, by exact summation.
pub fn expected_min_binomial(n: usize, p: f64, cap: Option<usize>) -> f64 {
    let Some(cap) = cap else {
        return n as f64 * p;
    };
    if p <= 0.0 {
        return 0.0;
    }
    if p >= 1.0 {
        return n.min(cap) as f64;
    }
    // E[min(X, c)] = Σ_{k<c} k·P(k) + c·(1 − Σ_{k<c} P(k))
    let mut pk = (1.0 - p).powi(n as i32);
    let (mut below, mut mass) = (0.0, 0.0);
    for k in 0..cap.min(n + 1) {
        below += k as f64 * pk;
        mass += pk;
        pk *= (n - k) as f64 / (k + 1) as f64 * p / (1.0 - p);
    }
    below + cap.min(n) as f64 * (1.0 - mass).max(0.0)
}

/// Expected heralds read out per round, given the registration cap.
pub fn expected_registered_heralds(config: &LinkConfig) -> f64 {
    let p = channel::mode_click_prob(
        config.chi,
        &ChannelBudget::from_config(config),
        config.noise_click_prob,
    );
    expected_min_binomial(config.used_modes(), p, config.registration_limit())
}

/// One measured (p̄, g) pair and the scenario it was measured in.
#[derive(Clone, Debug, PartialEq)]
pub struct CalibrationTarget {
    pub name: String,
    /// Scenario config; its chi is re-solved to hit `p_bar`.
    pub config: LinkConfig,
    pub p_bar: f64,
    pub g: f64,
    pub g_sigma: f64,
}

/// A measured mode-averaged retrieval efficiency.
#[derive(Clone, Debug, PartialEq)]
pub struct RetrievalAnchor {
    pub name: String,
    pub config: LinkConfig,
    pub efficiency: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CalibrationParams {
    pub retrieval_efficiency_0: f64,
    pub noise_click_prob: f64,
    pub idler_noise_prob: f64,
}

impl CalibrationParams {
    pub fn apply(&self, config: &LinkConfig) -> LinkConfig {
        LinkConfig {
            retrieval_efficiency_0: self.retrieval_efficiency_0,
            noise_click_prob: self.noise_click_prob,
            idler_noise_prob: self.idler_noise_prob,
            ..config.clone()
        }
    }

    pub fn of(config: &LinkConfig) -> Self {
        CalibrationParams {
            retrieval_efficiency_0: config.retrieval_efficiency_0,
            noise_click_prob: config.noise_click_prob,
            idler_noise_prob: config.idler_noise_prob,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TargetFit {
    pub name: String,
    pub chi: f64,
    pub p_bar_model: f64,
    pub p_bar_target: f64,
    pub g_model: f64,
    pub g_target: f64,
    pub g_sigma: f64,
    /// `(g_model − g_target) / g_sigma`.
    pub pull: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub params: CalibrationParams,
    pub targets: Vec<TargetFit>,
    pub retrieval: Vec<(String, f64, f64)>,
    pub residual_norm: f64,
}

impl Calibration {
    /// `config` with the fitted parameters and the chi that reproduces the
    /// named target's p̄.
    pub fn config_for(&self, target: &CalibrationTarget) -> LinkConfig {
        let mut c = self.params.apply(&target.config);
        if let Some(fit) = self.targets.iter().find(|t| t.name == target.name) {
            c.chi = fit.chi;
        }
        c
    }
}

/// Residual returned when a parameter set cannot reach a target's p̄.
const UNREACHABLE: f64 = 1e3;

fn decode(x: &[f64]) -> CalibrationParams {
    CalibrationParams {
        retrieval_efficiency_0: x[0] * x[0],
        noise_click_prob: x[1] * x[1],
        idler_noise_prob: x[2] * x[2],
    }
}

fn target_model(target: &CalibrationTarget, params: &CalibrationParams) -> Option<(f64, f64, f64)> {
    let mut config = params.apply(&target.config);
    let chi = chi_for_p_bar(&config, target.p_bar)?;
    config.chi = chi;
    let schedule = build_schedule(&config, config.used_modes()).ok()?;
    let oracle = analytic_for_schedule(&config, &schedule);
    Some((chi, oracle.p_s, oracle.g))
}

fn anchor_model(anchor: &RetrievalAnchor, params: &CalibrationParams) -> Option<f64> {
    let config = params.apply(&anchor.config);
    let schedule = build_schedule(&config, config.used_modes()).ok()?;
    Some(analytic_for_schedule(&config, &schedule).mean_retrieval_efficiency)
}

/// Fits (eta0, noise_click_prob, idler_noise_prob) to the targets.
///
/// Each target's chi is solved so that its p̄ is met exactly; the residuals
/// are the relative g errors, plus relative retrieval-efficiency errors for
/// the anchors. `start` seeds the search.
pub fn calibrate(
    targets: &[CalibrationTarget],
    anchors: &[RetrievalAnchor],
    start: CalibrationParams,
) -> Result<Calibration, CalibrationError> {
    if targets.is_empty() {
        return Err(CalibrationError::NoTargets);
    }
    let n_params = 3;
    let residuals = |x: &[f64]| -> Vec<f64> {
        let params = decode(x);
        let mut out: Vec<f64> = targets
            .iter()
            .map(|t| match target_model(t, &params) {
                Some((_, _, g)) if g.is_finite() => (g - t.g) / t.g,
                _ => UNREACHABLE,
            })
            .collect();
        out.extend(anchors.iter().map(|a| match anchor_model(a, &params) {
            Some(eta) => (eta - a.efficiency) / a.efficiency,
            None => UNREACHABLE,
        }));
        // keep the problem at least square; the padding does not move the optimum
        out.resize(out.len().max(n_params), 0.0);
        out
    };
    let x0 = [
        start.retrieval_efficiency_0.max(0.0).sqrt(),
        start.noise_click_prob.max(0.0).sqrt(),
        start.idler_noise_prob.max(0.0).sqrt(),
    ];
    let sol = lsq::minimize(residuals, &x0);
    if !sol.converged || sol.residuals.iter().any(|r| r.abs() >= UNREACHABLE) {
        return Err(CalibrationError::NotConverged {
            reason: sol.termination,
            residuals: sol.residuals,
        });
    }
    let params = decode(&sol.params);
    let fits = targets
        .iter()
        .map(|t| {
            let (chi, p_bar_model, g_model) =
                target_model(t, &params).expect("converged fit reaches every target");
            TargetFit {
                name: t.name.clone(),
                chi,
                p_bar_model,
                p_bar_target: t.p_bar,
                g_model,
                g_target: t.g,
                g_sigma: t.g_sigma,
                pull: (g_model - t.g) / t.g_sigma,
            }
        })
        .collect();
    let retrieval = anchors
        .iter()
        .map(|a| {
            let eta = anchor_model(a, &params).unwrap_or(f64::NAN);
            (a.name.clone(), eta, a.efficiency)
        })
        .collect();
    Ok(Calibration {
        params,
        targets: fits,
        retrieval,
        residual_norm: sol.residual_norm(),
    })
}
