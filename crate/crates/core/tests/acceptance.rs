//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any fails.

use std::process::ExitCode;

use halflink::controller::SamplerKind;
use halflink::engine::{self, merge, run_rounds, BatchOptions, CountsLedger};
use halflink::model::CoherenceTime;
use halflink::oracle::{self, analytic_probs};
use halflink::scenario::{
    self, anchor_targets, calibration_start, retrieval_anchors, BoundCrossing, Scenario,
    ScenarioName, SweepOptions,
};
use halflink::schedule::build_schedule;
use halflink::stats::{self, fit_decay, DecayPoint, Floor, LinkReport};
use halflink::{DecayShape, LinkConfig, Picos, ReadoutPolicy};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

type Outcome = Result<Vec<String>, String>;
type Criterion<'a> = (&'a str, Box<dyn Fn() -> Outcome>);

fn ensure(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn within(value: f64, target: f64, tol: f64, what: &str) -> Result<String, String> {
    let line = format!("{what} = {value:.6} (target {target}, tol {tol:.3e})");
    ensure(
        (value - target).abs() <= tol,
        format!("{line} out of tolerance"),
    )?;
    Ok(line)
}

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn timing_identities() -> Outcome {
    let config = LinkConfig::default();
    let s = build_schedule(&config, 280).map_err(err)?;
    let mut lines = Vec::new();
    ensure(
        config.herald_delay() == Picos::from_micros(120),
        "2L/c != 120 us",
    )?;
    lines.push("2L/c = 120 us".into());
    let period = s.emission_time(4) - s.emission_time(0);
    ensure(
        period == Picos::from_nanos(1700),
        format!("cell period {period}"),
    )?;
    ensure(
        Picos::from_secs(config.intra_cell_bin_gap_s) * 3
            + Picos::from_secs(config.inter_cell_bin_gap_s)
            == Picos::from_nanos(1700),
        "3*400 + 500 != 1700 ns",
    )?;
    lines.push("cell period = 1700 ns".into());
    ensure(
        s.excitation_duration() == Picos::from_micros(119),
        "excitation span != 119 us",
    )?;
    lines.push("excitation span = 119 us".into());
    let all_130 = (0..280).all(|b| s.storage_immediate(b) == Picos::from_micros(130));
    ensure(all_130, "policy-A storage not 130 us everywhere")?;
    lines.push("policy A storage = 130 us for all 280 modes".into());
    let b: Vec<Picos> = (0..280).map(|b| s.storage_scheduled(b)).collect();
    let (lo, hi) = (*b.iter().min().unwrap(), *b.iter().max().unwrap());
    ensure(
        lo == Picos::from_nanos(131_500) && hi == Picos::from_micros(250),
        format!("policy-B range [{lo}, {hi}]"),
    )?;
    lines.push(format!("policy B storage range [{lo}, {hi}]"));
    Ok(lines)
}

fn rate_chain(ledger: &CountsLedger, config: &LinkConfig) -> Outcome {
    let p_analytic = oracle::analytic_for_config(config).map_err(err)?.p_total;
    let d = LinkReport::from_ledger(ledger, config).map_err(err)?;
    let r = &d.row;
    let mut lines = vec![within(p_analytic, 0.4676, 0.01, "p_total analytic")?];
    lines.push(within(
        r.p_total,
        p_analytic,
        3.0 * r.p_total_err,
        "p_total MC (1e6 rounds)",
    )?);
    lines.push(within(r.rate_hz, 1950.0, 19.5, "in-protocol rate [Hz]")?);
    lines.push(within(r.duty, 0.096, 1e-12, "duty cycle")?);
    lines.push(within(r.rate_avg_hz, 187.0, 1.87, "averaged rate [Hz]")?);
    lines.push(within(
        d.expected_corr_within_tcoh,
        0.458,
        0.458 * 0.01,
        "correlations within T_coh",
    )?);
    lines.push(within(r.eta_link, 0.92, 0.01, "eta_link")?);
    let analytic_eta = stats::link_efficiency(p_analytic / 240e-6, 235e-6);
    let product = stats::link_efficiency_product(2e8, 12_000.0, 235e-6, p_analytic / 280.0, 280);
    ensure(
        ((analytic_eta - product) / product).abs() < 1e-12,
        "eta_link forms disagree",
    )?;
    lines.push(format!(
        "eta_link analytic {analytic_eta:.5} (both forms agree)"
    ));
    Ok(lines)
}

fn multiplexing() -> Outcome {
    let config = LinkConfig::default();
    let s = build_schedule(&config, 280).map_err(err)?;
    let m = stats::multiplex_gain(&config, 280, s.round_duration().as_secs());
    let lines = vec![
        within(
            m.effective_trial_rate_hz,
            280.0 / 240e-6,
            1e-6,
            "effective trial rate [Hz]",
        )?,
        within(m.single_mode_rate_hz, 2e8 / 24_000.0, 1e-9, "c/2L [Hz]")?,
        within(m.ratio, 140.0, 1e-9, "ratio")?,
    ];
    ensure(m.ratio >= 100.0, "ratio below 100")?;
    Ok(lines)
}

fn nosig_statistics() -> Outcome {
    let config = scenario::onekm_config();
    let n_rounds = 454_252;
    let ledger = engine::run_batch(&config, n_rounds).map_err(err)?;
    let expected = (1.0f64 - 0.001).powi(12);
    let frac = ledger.nosig_rounds as f64 / n_rounds as f64;
    let sigma = (expected * (1.0 - expected) / n_rounds as f64).sqrt();
    let measured = 448_848.0 / 454_252.0;
    Ok(vec![
        within(frac, expected, 3.0 * sigma, "simulated no-signal fraction")?,
        within(measured, expected, 3.0 * sigma, "measured 448848/454252")?,
    ])
}

fn calibration_anchors() -> Outcome {
    let targets = anchor_targets();
    let cal =
        oracle::calibrate(&targets, &retrieval_anchors(), calibration_start()).map_err(err)?;
    let mut lines = vec![format!(
        "fit: eta0 = {:.5}, noise_click_prob = {:.2e}, idler_noise_prob = {:.4e}",
        cal.params.retrieval_efficiency_0, cal.params.noise_click_prob, cal.params.idler_noise_prob
    )];
    for t in &targets {
        let config = cal.config_for(t);
        let ledger = engine::run_batch(&config, 2_000_000).map_err(err)?;
        let g = stats::estimate_g(&ledger).map_err(err)?;
        let fit = cal.targets.iter().find(|f| f.name == t.name).unwrap();
        ensure(
            fit.pull.abs() <= 1.0,
            format!("{} analytic pull {}", t.name, fit.pull),
        )?;
        let tol = 3.0 * (g.sigma.powi(2) + t.g_sigma.powi(2)).sqrt();
        lines.push(within(
            g.value,
            t.g,
            tol,
            &format!(
                "{} g MC ± {:.3} (analytic {:.3})",
                t.name, g.sigma, fit.g_model
            ),
        )?);
    }
    Ok(lines)
}

fn linearity() -> Outcome {
    let mut lines = Vec::new();
    let fig3c = Scenario::preset(ScenarioName::Fig3c);
    let sweep = scenario::run_sweep(&fig3c, &SweepOptions::new(1_000_000)).map_err(err)?;
    let fit = sweep.fit.ok_or("no fit")?;
    ensure(fit.r_squared > 0.99, format!("R^2 = {}", fit.r_squared))?;
    lines.push(format!("fig3c p_total vs N: R^2 = {:.5}", fit.r_squared));
    lines.push(within(
        fit.slope,
        scenario::P_BAR_FIG3C,
        0.05 * scenario::P_BAR_FIG3C,
        "fig3c slope",
    )?);

    let fig3b = Scenario::preset(ScenarioName::Fig3b);
    let sweep = scenario::run_sweep(&fig3b, &SweepOptions::new(4_000_000)).map_err(err)?;
    let gs: Vec<f64> = sweep
        .points
        .iter()
        .map(|p| p.report.row.g.unwrap_or(f64::NAN))
        .collect();
    let oracle_gs: Vec<f64> = sweep.points.iter().map(|p| p.oracle_g).collect();
    ensure(
        oracle_gs.windows(2).all(|w| w[0] > w[1]),
        format!("oracle g not decreasing: {oracle_gs:?}"),
    )?;
    ensure(
        gs.windows(2).all(|w| w[0] > w[1]),
        format!("simulated g not decreasing: {gs:?}"),
    )?;
    lines.push(format!(
        "fig3b g (MC) = [{}]",
        gs.iter()
            .map(|g| format!("{g:.3}"))
            .collect::<Vec<_>>()
            .join(", ")
    ));
    lines.push(match sweep.crossing {
        Some(BoundCrossing::Simulated { p_bar }) => {
            format!("g = 2 crossing at p_bar = {p_bar:.3e}")
        }
        Some(BoundCrossing::Analytic { p_bar, chi }) => {
            format!("g = 2 crossing beyond the sweep: p_bar = {p_bar:.3e} (chi = {chi:.4})")
        }
        Some(BoundCrossing::None { min_g }) => format!(
            "g = 2 crossing: none; g stays above the bound for all chi < 0.5 (minimum {min_g:.3})"
        ),
        None => return Err("no crossing report".into()),
    });
    Ok(lines)
}

fn policy_ordering() -> Outcome {
    let a = scenario::telecom_base(ReadoutPolicy::Immediate);
    let b = scenario::telecom_base(ReadoutPolicy::Scheduled);
    let la = engine::run_batch(&a, 4_000_000).map_err(err)?;
    let lb = engine::run_batch(&b, 4_000_000).map_err(err)?;
    let ga = stats::estimate_g(&la).map_err(err)?;
    let gb = stats::estimate_g(&lb).map_err(err)?;
    ensure(
        gb.value <= ga.value,
        format!("MC g_B {} > g_A {}", gb.value, ga.value),
    )?;
    let oa = oracle::analytic_for_config(&a).map_err(err)?.g;
    let ob = oracle::analytic_for_config(&b).map_err(err)?.g;
    ensure(ob <= oa, "schedule oracle g_B > g_A")?;
    let g130 = analytic_probs(&a, 130e-6).g_analytic;
    let g250 = analytic_probs(&a, 250e-6).g_analytic;
    ensure(g250 < g130, "g(250 us) >= g(130 us)")?;
    Ok(vec![
        format!(
            "MC (same seed, 4e6 rounds): g_A = {:.4} ± {:.4}, g_B = {:.4} ± {:.4}",
            ga.value, ga.sigma, gb.value, gb.sigma
        ),
        format!("oracle schedule average: g_A = {oa:.4}, g_B = {ob:.4}"),
        format!("oracle at fixed storage: g(130 us) = {g130:.4} > g(250 us) = {g250:.4}"),
    ])
}

fn binomial_sigma(p: f64, n: u64) -> f64 {
    (p * (1.0 - p) / n as f64).sqrt()
}

fn oracle_equivalence() -> Outcome {
    let mut lines = Vec::new();
    let mut worst: f64 = 0.0;
    for (k, &chi) in [0.005, 0.02, 0.08].iter().enumerate() {
        for (j, &ff_us) in [10i64, 70, 130].iter().enumerate() {
            let config = LinkConfig {
                n_cells: 1,
                chi,
                signal_path_efficiency: 0.5,
                fiber_attenuation_db_per_km: 0.0,
                noise_click_prob: 1e-4,
                idler_noise_prob: 2e-3,
                retrieval_efficiency_0: 0.05,
                herald_cap: None,
                feedforward_latency_s: ff_us as f64 * 1e-6,
                rng_seed: 1000 + (3 * k + j) as u64,
                ..LinkConfig::default()
            };
            let storage = 120e-6 + ff_us as f64 * 1e-6;
            let o = analytic_probs(&config, storage);
            let n = 1_000_000;
            let l = engine::run_batch(&config, n).map_err(err)?;
            let modes = l.n_modes as u64;
            let p_s = l.signal_clicks as f64 / (n * modes) as f64;
            let p_si = l.coincidences as f64 / l.registered_heralds as f64;
            let p_ni = l.nosig_idler_clicks as f64 / l.nosig_rounds as f64;
            let g = stats::estimate_g(&l).map_err(err)?;
            let pulls = [
                (p_s - o.p_s) / binomial_sigma(o.p_s, n * modes),
                (p_si - o.p_si_given_s) / binomial_sigma(o.p_si_given_s, l.registered_heralds),
                (p_ni - o.p_i_given_nosig) / binomial_sigma(o.p_i_given_nosig, l.nosig_rounds),
                (g.value - o.g_analytic) / g.sigma,
            ];
            let max_pull = pulls.iter().fold(0.0f64, |m, p| m.max(p.abs()));
            worst = worst.max(max_pull);
            let line = format!(
                "chi {chi}, storage {:.0} us: g MC {:.3} ± {:.3} vs {:.3}; max |pull| {max_pull:.2}",
                storage * 1e6,
                g.value,
                g.sigma,
                o.g_analytic
            );
            ensure(max_pull <= 3.0, format!("{line} exceeds 3 sigma"))?;
            lines.push(line);
        }
    }
    lines.push(format!("worst |pull| over 36 comparisons: {worst:.2}"));
    Ok(lines)
}

fn synthetic_decay(seed: u64, tau: f64, rel_noise: f64) -> Vec<DecayPoint> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, 1.0).unwrap();
    (0..10)
        .map(|k| {
            let t = 10e-6 + 40e-6 * k as f64;
            let clean = 0.05 * (-t / tau).exp();
            let sigma = rel_noise * 0.05;
            DecayPoint {
                t,
                value: clean + sigma * normal.sample(&mut rng),
                sigma: Some(sigma),
            }
        })
        .collect()
}

fn error_law() -> Outcome {
    let config = LinkConfig::default();
    let small = engine::run_batch(&config, 100_000).map_err(err)?;
    let large = engine::run_batch(
        &LinkConfig {
            rng_seed: 77,
            ..config.clone()
        },
        400_000,
    )
    .map_err(err)?;
    let s1 = stats::estimate_g(&small).map_err(err)?.sigma;
    let s4 = stats::estimate_g(&large).map_err(err)?.sigma;
    let mut lines = vec![within(s1 / s4, 2.0, 0.2, "g_sigma(1e5) / g_sigma(4e5)")?];

    let exact = fit_decay(
        &synthetic_decay(0, 235e-6, 0.0),
        DecayShape::Exponential,
        Floor::Free,
    )
    .map_err(err)?;
    lines.push(within(
        exact.tau * 1e6,
        235.0,
        235e-6,
        "tau from noise-free data [us]",
    )?);

    let fit = fit_decay(
        &synthetic_decay(2024, 235e-6, 0.02),
        DecayShape::Exponential,
        Floor::Fixed(0.0),
    )
    .map_err(err)?;
    lines.push(within(
        fit.tau * 1e6,
        235.0,
        fit.tau_sigma * 1e6,
        "tau from noisy data, within its 1 sigma [us]",
    )?);

    let trials = 400;
    let covered = (0..trials)
        .filter(|&seed| {
            fit_decay(
                &synthetic_decay(10_000 + seed, 235e-6, 0.02),
                DecayShape::Exponential,
                Floor::Fixed(0.0),
            )
            .map(|f| (f.tau - 235e-6).abs() <= f.tau_sigma)
            .unwrap_or(false)
        })
        .count();
    let coverage = covered as f64 / trials as f64;
    lines.push(within(
        coverage,
        0.6827,
        0.07,
        "1 sigma coverage over 400 noisy fits",
    )?);
    Ok(lines)
}

fn determinism_and_merge() -> Outcome {
    let config = LinkConfig {
        chi: 0.1,
        ..LinkConfig::default()
    };
    let a = engine::run_batch(&config, 20_000).map_err(err)?;
    let b = engine::run_batch(&config, 20_000).map_err(err)?;
    ensure(
        a.to_json_pretty() == b.to_json_pretty(),
        "same seed, different ledgers",
    )?;
    let schedule = build_schedule(&config, 280).map_err(err)?;
    let halves = [
        run_rounds(&config, &schedule, 0..10_000, SamplerKind::SkipSilent),
        run_rounds(&config, &schedule, 10_000..20_000, SamplerKind::SkipSilent),
    ];
    ensure(merge(&halves).map_err(err)? == a, "two-shard merge differs")?;
    let sharded = engine::run_batch_with(
        &config,
        20_000,
        BatchOptions {
            shards: 7,
            ..Default::default()
        },
    )
    .map_err(err)?;
    ensure(sharded == a, "7-shard run differs")?;
    let per_mode = CoherenceTime::PerMode(vec![235e-6; 280]);
    let c2 = LinkConfig {
        coherence_time_s: per_mode,
        ..config.clone()
    };
    let l2 = engine::run_batch(&c2, 10).map_err(err)?;
    ensure(
        merge(&[a.clone(), l2]).is_err(),
        "merge accepted a different config",
    )?;
    Ok(vec![
        "identical seeds give byte-identical ledger JSON".into(),
        "merge of rounds 0..1e4 and 1e4..2e4 equals the 2e4-round run".into(),
        "7 cycle-aligned shards equal the monolithic run".into(),
    ])
}

fn main() -> ExitCode {
    let default = LinkConfig::default();
    let criteria: Vec<Criterion> = vec![
        ("Timing identities", Box::new(timing_identities)),
        (
            "Rate chain",
            Box::new(move || {
                let ledger = engine::run_batch(&default, 1_000_000).map_err(err)?;
                rate_chain(&ledger, &default)
            }),
        ),
        ("Multiplexing enhancement", Box::new(multiplexing)),
        (
            "No-signal statistics (12 modes, 1 km)",
            Box::new(nosig_statistics),
        ),
        ("Calibration anchors", Box::new(calibration_anchors)),
        ("Linearity and g decay", Box::new(linearity)),
        ("Policy ordering", Box::new(policy_ordering)),
        (
            "Oracle / Monte Carlo equivalence",
            Box::new(oracle_equivalence),
        ),
        ("Estimator error law and coherence fit", Box::new(error_law)),
        ("Determinism and merge", Box::new(determinism_and_merge)),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        match check() {
            Ok(lines) => {
                println!("PASS [{}] {name}", i + 1);
                for l in lines {
                    println!("       {l}");
                }
            }
            Err(reason) => {
                failed += 1;
                println!("FAIL [{}] {name}: {reason}", i + 1);
            }
        }
    }
    println!(
        "{} of {} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
