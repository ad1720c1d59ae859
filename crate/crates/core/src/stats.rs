//! Figures of merit derived from a counts ledger.

use serde::{Deserialize, Serialize};

use crate::channel::{self, ChannelBudget};
use crate::engine::CountsLedger;
use crate::error::{FitError, StatsError};
use crate::lsq;
use crate::model::{DecayShape, LinkConfig, ReadoutPolicy};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GEstimate {
    pub value: f64,
    pub sigma: f64,
}

/// `g = C·R0 / (S·I)` with Poisson errors added in quadrature.
///
/// With no coincidences the estimate is 0 and the error is that of a single
/// count.
pub fn estimate_g_from_counts(
    coincidences: u64,
    signals: u64,
    nosig_idlers: u64,
    nosig_rounds: u64,
) -> Result<GEstimate, StatsError> {
    if signals == 0 || nosig_idlers == 0 || nosig_rounds == 0 {
        return Err(StatsError::InsufficientData {
            coincidences,
            signals,
            nosig_idlers,
            nosig_rounds,
        });
    }
    let (c, s, i, r0) = (
        coincidences as f64,
        signals as f64,
        nosig_idlers as f64,
        nosig_rounds as f64,
    );
    let scale = r0 / (s * i);
    if coincidences == 0 {
        return Ok(GEstimate {
            value: 0.0,
            sigma: scale,
        });
    }
    let value = c * scale;
    let sigma = value * (1.0 / c + 1.0 / s + 1.0 / i + 1.0 / r0).sqrt();
    Ok(GEstimate { value, sigma })
}

/// Cross-correlation of a ledger. The signal count is the number of heralds
/// that were actually read out.
pub fn estimate_g(ledger: &CountsLedger) -> Result<GEstimate, StatsError> {
    estimate_g_from_counts(
        ledger.coincidences,
        ledger.registered_heralds,
        ledger.nosig_idler_clicks,
        ledger.nosig_rounds,
    )
}

/// Twice the expected number of correlations generated within `t_coh_s`.
pub fn link_efficiency(rate_in_protocol_hz: f64, t_coh_s: f64) -> f64 {
    2.0 * rate_in_protocol_hz * t_coh_s
}

/// `(c / 2L) · T_coh · p̄ · N`, equal to [`link_efficiency`] when the round
/// lasts two round trips.
pub fn link_efficiency_product(
    light_speed_mps: f64,
    length_m: f64,
    t_coh_s: f64,
    p_bar: f64,
    n_modes: usize,
) -> f64 {
    light_speed_mps / (2.0 * length_m) * t_coh_s * p_bar * n_modes as f64
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Rates {
    pub in_protocol_hz: f64,
    pub averaged_hz: f64,
    pub duty_cycle: f64,
}

pub fn rates(ledger: &CountsLedger) -> Result<Rates, StatsError> {
    if ledger.n_rounds == 0 || ledger.wall_clock_s <= 0.0 {
        return Err(StatsError::EmptyLedger);
    }
    let s = ledger.signal_clicks as f64;
    let busy = ledger.in_protocol_time_s();
    Ok(Rates {
        in_protocol_hz: s / busy,
        averaged_hz: s / ledger.wall_clock_s,
        duty_cycle: busy / ledger.wall_clock_s,
    })
}

/// Trial rates with and without multiplexing.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MultiplexGain {
    /// Modes per round divided by the round duration.
    pub effective_trial_rate_hz: f64,
    /// `c / 2L`, the best a single mode waiting for its herald can do.
    pub single_mode_rate_hz: f64,
    pub ratio: f64,
}

pub fn multiplex_gain(config: &LinkConfig, n_modes: usize, round_duration_s: f64) -> MultiplexGain {
    let effective = n_modes as f64 / round_duration_s;
    let single = config.fiber_light_speed_mps / (2.0 * config.fiber_length_m);
    MultiplexGain {
        effective_trial_rate_hz: effective,
        single_mode_rate_hz: single,
        ratio: effective / single,
    }
}

/// One operating point, as written to the report CSV.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinkReport {
    pub policy: ReadoutPolicy,
    #[serde(rename = "N_modes")]
    pub n_modes: usize,
    pub chi: f64,
    pub p_bar: f64,
    pub p_total: f64,
    pub p_total_err: f64,
    pub g: Option<f64>,
    pub g_err: Option<f64>,
    pub rate_hz: f64,
    pub rate_avg_hz: f64,
    pub duty: f64,
    pub eta_link: f64,
}

/// A report plus the quantities not in the CSV row.
#[derive(Clone, Debug, PartialEq)]
pub struct ReportDetail {
    pub row: LinkReport,
    pub p_total_analytic: f64,
    pub expected_corr_within_tcoh: f64,
    pub t_coh_s: f64,
}

impl LinkReport {
    pub fn from_ledger(
        ledger: &CountsLedger,
        config: &LinkConfig,
    ) -> Result<ReportDetail, StatsError> {
        let r = rates(ledger)?;
        let n = ledger.n_rounds as f64;
        let p_total = ledger.signal_clicks as f64 / n;
        let var: f64 = ledger
            .per_mode_signal_clicks
            .iter()
            .map(|&k| {
                let p = k as f64 / n;
                p * (1.0 - p)
            })
            .sum();
        let g = estimate_g(ledger).ok();
        let t_coh_s = config.mean_coherence_time();
        let expected = r.in_protocol_hz * t_coh_s;
        let p_mode = channel::mode_click_prob(
            config.chi,
            &ChannelBudget::from_config(config),
            config.noise_click_prob,
        );
        Ok(ReportDetail {
            row: LinkReport {
                policy: ledger.policy,
                n_modes: ledger.n_modes,
                chi: config.chi,
                p_bar: p_total / ledger.n_modes as f64,
                p_total,
                p_total_err: (var / n).sqrt(),
                g: g.map(|g| g.value),
                g_err: g.map(|g| g.sigma),
                rate_hz: r.in_protocol_hz,
                rate_avg_hz: r.averaged_hz,
                duty: r.duty_cycle,
                eta_link: link_efficiency(r.in_protocol_hz, t_coh_s),
            },
            p_total_analytic: p_mode * ledger.n_modes as f64,
            expected_corr_within_tcoh: expected,
            t_coh_s,
        })
    }
}

/// How the constant offset of a decay curve is treated in a fit.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Floor {
    Free,
    Fixed(f64),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DecayPoint {
    pub t: f64,
    pub value: f64,
    /// One-sigma error; when every point has one the fit is weighted and the
    /// reported errors are absolute.
    pub sigma: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CoherenceFit {
    pub tau: f64,
    pub tau_sigma: f64,
    pub amplitude: f64,
    pub amplitude_sigma: f64,
    pub floor: f64,
    pub floor_sigma: f64,
    pub residual_norm: f64,
}

fn decay(shape: DecayShape, t: f64, tau: f64) -> f64 {
    let x = t / tau;
    match shape {
        DecayShape::Exponential => (-x).exp(),
        DecayShape::Gaussian => (-x * x).exp(),
    }
}

/// Start values from a log-linear regression with the floor at its fixed
/// value, or just below the smallest sample.
fn initial_guess(points: &[DecayPoint], shape: DecayShape, floor: Floor) -> [f64; 3] {
    let min = points.iter().map(|p| p.value).fold(f64::INFINITY, f64::min);
    let f0 = match floor {
        Floor::Fixed(f) => f,
        Floor::Free => 0.0f64.min(min - 1e-9 * min.abs().max(1.0)),
    };
    let xy: Vec<(f64, f64)> = points
        .iter()
        .filter(|p| p.value - f0 > 0.0)
        .map(|p| {
            let x = match shape {
                DecayShape::Exponential => p.t,
                DecayShape::Gaussian => p.t * p.t,
            };
            (x, (p.value - f0).ln())
        })
        .collect();
    let t_span = points
        .iter()
        .map(|p| p.t.abs())
        .fold(0.0, f64::max)
        .max(1e-12);
    let (mut a, mut tau) = (points[0].value - f0, t_span);
    if xy.len() >= 2 {
        let n = xy.len() as f64;
        let mx = xy.iter().map(|p| p.0).sum::<f64>() / n;
        let my = xy.iter().map(|p| p.1).sum::<f64>() / n;
        let sxx: f64 = xy.iter().map(|p| (p.0 - mx).powi(2)).sum();
        let sxy: f64 = xy.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        if sxx > 0.0 {
            let slope = sxy / sxx;
            a = (my - slope * mx).exp();
            if slope < 0.0 {
                tau = match shape {
                    DecayShape::Exponential => -1.0 / slope,
                    DecayShape::Gaussian => (-1.0 / slope).sqrt(),
                };
            }
        }
    }
    [a, tau.ln(), f0]
}

/// Least-squares fit of `a·D(t/τ) + floor`.
pub fn fit_decay(
    points: &[DecayPoint],
    shape: DecayShape,
    floor: Floor,
) -> Result<CoherenceFit, FitError> {
    let needed = match floor {
        Floor::Free => 3,
        Floor::Fixed(_) => 2,
    };
    let mut times: Vec<f64> = points.iter().map(|p| p.t).collect();
    times.sort_by(f64::total_cmp);
    times.dedup();
    if times.len() < needed || times.len() != points.len() {
        return Err(FitError::TooFewPoints {
            needed,
            got: times.len(),
        });
    }
    let weighted = points.iter().all(|p| p.sigma.is_some_and(|s| s > 0.0));
    let weights: Vec<f64> = points
        .iter()
        .map(|p| {
            if weighted {
                1.0 / p.sigma.unwrap()
            } else {
                1.0
            }
        })
        .collect();
    let guess = initial_guess(points, shape, floor);
    let x0: Vec<f64> = match floor {
        Floor::Free => guess.to_vec(),
        Floor::Fixed(_) => guess[..2].to_vec(),
    };
    let residuals = |p: &[f64]| -> Vec<f64> {
        let tau = p[1].exp();
        let f = match floor {
            Floor::Free => p[2],
            Floor::Fixed(f) => f,
        };
        points
            .iter()
            .zip(&weights)
            .map(|(pt, w)| (p[0] * decay(shape, pt.t, tau) + f - pt.value) * w)
            .collect()
    };
    let sol = lsq::minimize(residuals, &x0);
    let residual_norm = sol.residual_norm();
    let tau = sol.params[1].exp();
    if !sol.converged || !tau.is_finite() {
        return Err(FitError::NotConverged {
            reason: sol.termination,
            residual_norm,
        });
    }
    let sd = |i: usize| -> f64 {
        match sol.covariance(!weighted) {
            Some(cov) => cov[(i, i)].max(0.0).sqrt(),
            // an exact fit leaves no residual scatter to scale by
            None if residual_norm == 0.0 => 0.0,
            None => f64::NAN,
        }
    };
    let (floor_value, floor_sigma) = match floor {
        Floor::Free => (sol.params[2], sd(2)),
        Floor::Fixed(f) => (f, 0.0),
    };
    Ok(CoherenceFit {
        tau,
        tau_sigma: tau * sd(1),
        amplitude: sol.params[0],
        amplitude_sigma: sd(0),
        floor: floor_value,
        floor_sigma,
        residual_norm,
    })
}

/// Fits `(t, value)` pairs with a free floor and unit weights.
pub fn fit_coherence(points: &[(f64, f64)], shape: DecayShape) -> Result<CoherenceFit, FitError> {
    let pts: Vec<DecayPoint> = points
        .iter()
        .map(|&(t, value)| DecayPoint {
            t,
            value,
            sigma: None,
        })
        .collect();
    fit_decay(&pts, shape, Floor::Free)
}
