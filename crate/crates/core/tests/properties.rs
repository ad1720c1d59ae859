use proptest::prelude::*;

use halflink::channel::{self, ChannelBudget, PairDistribution};
use halflink::controller::{register_heralds, resolve_mode, HeraldEvent, SamplerKind};
use halflink::engine::{merge, run_rounds};
use halflink::oracle;
use halflink::schedule::build_schedule;
use halflink::{LinkConfig, ModeId, Picos, ReadoutPolicy};

fn policy() -> impl Strategy<Value = ReadoutPolicy> {
    prop_oneof![
        Just(ReadoutPolicy::Immediate),
        Just(ReadoutPolicy::Scheduled)
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn pair_distribution_is_normalised(chi in 0.0f64..0.5) {
        let d = PairDistribution::new(chi);
        let total: f64 = d.probs().iter().sum();
        prop_assert!((total - 1.0).abs() < 1e-12);
        prop_assert!(d.probs().windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn click_prob_grows_with_chi(a in 0.0f64..0.49, d in 0.001f64..0.01, q in 0.0f64..1e-3) {
        let budget = ChannelBudget::new(0.06, 0.2, 10_000.0);
        let lo = channel::mode_click_prob(a, &budget, q);
        let hi = channel::mode_click_prob(a + d, &budget, q);
        prop_assert!(hi > lo);
        prop_assert!(lo >= q - 1e-15);
    }

    #[test]
    fn chi_inversion_round_trips(chi in 0.001f64..0.49) {
        let c = LinkConfig { chi, ..LinkConfig::default() };
        let p = channel::mode_click_prob(chi, &ChannelBudget::from_config(&c), c.noise_click_prob);
        let back = oracle::chi_for_p_bar(&c, p).unwrap();
        prop_assert!((back - chi).abs() < 1e-9 * chi.max(1e-3));
    }

    #[test]
    fn capped_binomial_is_bounded(n in 1usize..400, p in 0.0f64..1.0, cap in 1usize..8) {
        let m = oracle::expected_min_binomial(n, p, Some(cap));
        let uncapped = oracle::expected_min_binomial(n, p, None);
        prop_assert!(m >= -1e-12);
        prop_assert!(m <= uncapped + 1e-9);
        prop_assert!(m <= cap as f64 + 1e-9);
        if cap >= n { prop_assert!((m - uncapped).abs() < 1e-9); }
    }

    #[test]
    fn g_decreases_with_storage(t in 0.0f64..400e-6, dt in 1e-6f64..100e-6, chi in 0.005f64..0.45) {
        let c = LinkConfig { chi, ..LinkConfig::default() };
        let a = oracle::analytic_probs(&c, t);
        let b = oracle::analytic_probs(&c, t + dt);
        prop_assert!(b.g_exact <= a.g_exact + 1e-12);
        prop_assert!(b.p_si_given_s <= a.p_si_given_s);
    }

    #[test]
    fn resolve_inverts_the_schedule(
        n_cells in 1usize..=70,
        policy in policy(),
        jitter_frac in -0.49f64..0.49,
        bin_seed in any::<prop::sample::Index>(),
    ) {
        let config = LinkConfig { n_cells, readout_policy: policy, ..LinkConfig::default() };
        let s = build_schedule(&config, config.used_modes()).unwrap();
        let bin = bin_seed.index(s.n_used_modes());
        let herald = s.herald_time(bin);
        // stay strictly inside half the gap to the nearer neighbour
        let gaps: Vec<i64> = [bin.checked_sub(1), Some(bin + 1).filter(|&b| b < s.n_used_modes())]
            .into_iter()
            .flatten()
            .map(|b| (s.herald_time(b) - herald).0.abs())
            .collect();
        let gap = gaps.into_iter().min().unwrap_or(s.bin_gap().0).min(s.bin_gap().0);
        let offset = Picos((jitter_frac * gap as f64) as i64);
        let arrival = herald + offset;
        let (start, end) = s.herald_window();
        prop_assume!(arrival >= start && arrival <= end);
        prop_assert_eq!(resolve_mode(&s, arrival).unwrap(), s.mode(bin));
    }

    #[test]
    fn schedule_prefix_is_stable(n_cells in 1usize..=70) {
        let config = LinkConfig { n_cells, ..LinkConfig::default() };
        let full = build_schedule(&LinkConfig::default(), 280).unwrap();
        let part = build_schedule(&config, config.used_modes()).unwrap();
        for bin in 0..part.n_used_modes() {
            prop_assert_eq!(part.mode(bin), full.mode(bin));
            prop_assert_eq!(part.emission_time(bin), full.emission_time(bin));
            prop_assert_eq!(part.storage_immediate(bin), full.storage_immediate(bin));
        }
    }

    #[test]
    fn registration_respects_cap_and_uniqueness(
        bins in prop::collection::vec(0usize..280, 0..12),
        cap in prop::option::of(1usize..6),
        policy in policy(),
    ) {
        let config = LinkConfig { readout_policy: policy, ..LinkConfig::default() };
        let s = build_schedule(&config, 280).unwrap();
        let mut sorted = bins.clone();
        sorted.sort_unstable();
        let events: Vec<HeraldEvent> = sorted
            .iter()
            .map(|&b| HeraldEvent { arrival: s.herald_time(b), mode: ModeId::from_bin(b, 4) })
            .collect();
        let reg = register_heralds(&events, &s, cap);
        prop_assert_eq!(reg.orders.len() + reg.excess.len(), events.len());
        prop_assert!(reg.orders.len() <= cap.unwrap_or(usize::MAX));
        let mut modes: Vec<usize> = reg.orders.iter().map(|o| o.mode.bin_index).collect();
        modes.dedup();
        prop_assert_eq!(modes.len(), reg.orders.len());
        for o in &reg.orders {
            let b = o.mode.bin_index;
            let expected = match policy {
                ReadoutPolicy::Immediate => s.storage_immediate(b),
                ReadoutPolicy::Scheduled => s.storage_scheduled(b),
            };
            prop_assert_eq!(o.storage_time, expected);
            prop_assert!(o.storage_time > Picos(0));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn merge_is_split_invariant(
        cuts in prop::collection::vec(0u64..600, 0..5),
        seed in any::<u64>(),
        reverse in any::<bool>(),
    ) {
        let config = LinkConfig { rng_seed: seed, chi: 0.2, ..LinkConfig::default() };
        let s = build_schedule(&config, 280).unwrap();
        let whole = run_rounds(&config, &s, 0..600, SamplerKind::SkipSilent);
        let mut points = cuts.clone();
        points.extend([0, 600]);
        points.sort_unstable();
        points.dedup();
        let mut parts: Vec<_> = points
            .windows(2)
            .map(|w| run_rounds(&config, &s, w[0]..w[1], SamplerKind::SkipSilent))
            .collect();
        if reverse {
            parts.reverse();
        }
        let merged = merge(&parts).unwrap();
        prop_assert_eq!(merged.signal_clicks, whole.signal_clicks);
        prop_assert_eq!(merged.coincidences, whole.coincidences);
        prop_assert_eq!(merged.nosig_idler_clicks, whole.nosig_idler_clicks);
        prop_assert_eq!(&merged.per_mode_signal_clicks, &whole.per_mode_signal_clicks);
        prop_assert_eq!(merged.n_rounds, 600);
        // grouping does not matter either
        if parts.len() >= 3 {
            let left = merge(&parts[..2]).unwrap();
            let mut regrouped = vec![left];
            regrouped.extend(parts[2..].iter().cloned());
            prop_assert_eq!(merge(&regrouped).unwrap(), merged);
        }
    }
}
