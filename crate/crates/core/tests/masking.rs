use proptest::prelude::*;
use smae_core::masking::{informative_set, mask_count, mask_priorities, plan_mask, schedule_k, select_mask};
use smae_core::rng::{stream, Role};
use smae_core::{MaskSchedule, Strategy};

fn schedule(percent: usize, epochs: usize, warmup: f64, beta: f64) -> MaskSchedule {
    MaskSchedule { p: percent as f64 / 100.0, beta, epochs, warmup_ratio: warmup, strategy: Strategy::EasyToHard, noise: true }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    // Integer percentages keep floor(p·n) and ceil(p·n) exact in the oracle.
    #[test]
    fn schedule_grows_from_zero_to_full(percent in 1usize..100, n in 2usize..300, epochs in 1usize..200, warmup in 0.0f64..=1.0) {
        let s = schedule(percent, epochs, warmup, 0.5);
        let full = percent * n / 100;
        prop_assert_eq!(schedule_k(0, &s, n).unwrap(), 0);
        prop_assert_eq!(schedule_k(epochs, &s, n).unwrap(), full);
        let mut prev = 0;
        for t in 0..=epochs {
            let k = schedule_k(t, &s, n).unwrap();
            prop_assert!(k >= prev && k <= full);
            if t < epochs && (t as f64) <= warmup * epochs as f64 {
                prop_assert_eq!(k, 0);
            }
            prev = k;
        }
        prop_assert!(schedule_k(epochs + 1, &s, n).is_err());
    }

    #[test]
    fn mask_count_is_clamped_ceiling(percent in 1usize..100, n in 2usize..500) {
        let expected = (percent * n).div_ceil(100).clamp(1, n - 1);
        prop_assert_eq!(mask_count(percent as f64 / 100.0, n).unwrap(), expected);
    }

    #[test]
    fn plans_are_deterministic_and_sized(percent in 1usize..100, n in 2usize..40, seed in any::<u64>(), epoch in 0usize..=20) {
        let s = schedule(percent, 20, 0.0, 0.7);
        let scores: Vec<f64> = (0..n).map(|i| ((i * 7919) % 13) as f64).collect();
        let a = plan_mask(&scores, &s, epoch, seed, 3).unwrap();
        let b = plan_mask(&scores, &s, epoch, seed, 3).unwrap();
        prop_assert_eq!(&a, &b);
        prop_assert_eq!(a.masked.len(), mask_count(s.p, n).unwrap());
        prop_assert_eq!(a.informative_set.len(), a.k_used);
        prop_assert!(a.masked.windows(2).all(|w| w[0] < w[1]) && a.masked.iter().all(|&i| i < n));
        for i in 0..n {
            let boosted = a.informative_set.contains(&i);
            let (lo, hi) = if boosted { (0.7, 1.7) } else { (0.0, 1.0) };
            prop_assert!(a.priorities[i] >= lo && a.priorities[i] < hi);
        }
    }

    #[test]
    fn raising_beta_never_drops_a_boosted_node(n in 2usize..30, k in 0usize..30, seed in any::<u64>(), b1 in 0.0f64..2.0, extra in 0.0f64..2.0) {
        let k = k.min(n);
        let scores: Vec<f64> = (0..n).map(|i| i as f64).collect();
        let y = informative_set(&scores, k, &mut stream(seed, Role::TopKTieBreak, 0, 0)).unwrap();
        let s = schedule(50, 10, 0.0, 0.0);
        let lo = mask_priorities(n, &y, b1, true, &mut stream(seed, Role::MaskNoise, 0, 0)).unwrap();
        let hi = mask_priorities(n, &y, b1 + extra, true, &mut stream(seed, Role::MaskNoise, 0, 0)).unwrap();
        let m_lo = select_mask(&lo, &scores, &s).unwrap();
        let m_hi = select_mask(&hi, &scores, &s).unwrap();
        for i in &y {
            if m_lo.contains(i) {
                prop_assert!(m_hi.contains(i));
            }
        }
    }

    #[test]
    fn mask_size_is_fixed_across_epochs(n in 2usize..40, seed in any::<u64>()) {
        let s = schedule(37, 12, 0.25, 1.0);
        let scores: Vec<f64> = (0..n).map(|i| (i % 5) as f64).collect();
        let sizes: Vec<usize> = (0..=12).map(|t| plan_mask(&scores, &s, t, seed, 0).unwrap().masked.len()).collect();
        prop_assert!(sizes.iter().all(|&m| m == sizes[0]));
    }
}

#[test]
fn full_boost_always_masks_the_informative_set() {
    let mut violations = 0;
    for trial in 0..10_000u64 {
        let n = 2 + (trial % 30) as usize;
        let s = schedule(1 + (trial * 37 % 98) as usize, 10, 0.0, 1.0);
        let m = mask_count(s.p, n).unwrap();
        let k = (trial as usize * 13) % (m + 1);
        let scores: Vec<f64> = (0..n).map(|i| ((i * 31 + trial as usize) % 7) as f64).collect();
        let y = informative_set(&scores, k, &mut stream(trial, Role::TopKTieBreak, 0, 0)).unwrap();
        let gamma = mask_priorities(n, &y, 1.0, true, &mut stream(trial, Role::MaskNoise, 0, 0)).unwrap();
        let masked = select_mask(&gamma, &scores, &s).unwrap();
        violations += usize::from(!y.iter().all(|i| masked.contains(i)));
    }
    assert_eq!(violations, 0);
}

#[test]
fn unboosted_masking_is_uniform() {
    let (n, trials) = (8, 20_000u64);
    let s = MaskSchedule { p: 3.0 / 8.0, beta: 0.0, ..MaskSchedule::default() };
    let scores: Vec<f64> = (0..n).map(|i| i as f64).collect();
    let mut hits = [0usize; 8];
    for t in 0..trials {
        let plan = plan_mask(&scores, &s, 100, 42, t).unwrap();
        assert_eq!(plan.masked.len(), 3);
        for i in plan.masked {
            hits[i] += 1;
        }
    }
    for h in hits {
        assert!((h as f64 / trials as f64 - 3.0 / 8.0).abs() <= 0.02, "{hits:?}");
    }
}

#[test]
fn ties_in_the_informative_set_are_broken_fairly() {
    let (n, trials) = (5, 10_000u64);
    let mut hits = [0usize; 5];
    for t in 0..trials {
        let y = informative_set(&[2.0; 5], 1, &mut stream(t, Role::TopKTieBreak, 0, 0)).unwrap();
        hits[y[0]] += 1;
    }
    for h in hits {
        assert!((h as f64 / trials as f64 - 1.0 / n as f64).abs() <= 0.02, "{hits:?}");
    }
}

#[test]
fn zero_beta_curriculum_matches_random_masking() {
    let scores: Vec<f64> = (0..15).map(|i| (i * i % 11) as f64).collect();
    let curriculum = schedule(40, 30, 0.0, 0.0);
    let random = MaskSchedule { strategy: Strategy::Random, ..curriculum };
    for t in 0..=30 {
        let a = plan_mask(&scores, &curriculum, t, 9, 2).unwrap();
        let b = plan_mask(&scores, &random, t, 9, 2).unwrap();
        assert_eq!(a.masked, b.masked);
    }
}
