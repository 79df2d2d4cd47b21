use cfprobe_core::metrics::{ame_table, mutation_correlation, pearson, wilson_interval, MEffectRecord, OperatorCounts, OperatorFrequencyReport};
use cfprobe_core::mutations::MutationKind;
use proptest::prelude::*;

fn records() -> impl Strategy<Value = Vec<MEffectRecord>> {
    prop::collection::vec((0usize..20, 0usize..5, 0u8..2, 0u8..2, prop::bool::ANY), 1..120).prop_map(|v| {
        v.into_iter()
            .enumerate()
            .map(|(i, (p, k, a, b, mbpp))| {
                let mut r = MEffectRecord::new(&format!("pr{i}"), &format!("P{p}"), MutationKind::ALL[k], a, b);
                r.dataset = if mbpp { "mbpp" } else { "humaneval" }.into();
                r.model = "m".into();
                r
            })
            .collect()
    })
}

proptest! {
    #[test]
    fn ame_rows_are_bounded(recs in records()) {
        let (rows, _) = ame_table(&recs);
        for r in rows {
            prop_assert!((0.0..=100.0).contains(&r.ame));
            prop_assert!(r.n_informative <= r.n_total);
            prop_assert!(r.ci_low <= r.ame + 1e-9 && r.ame <= r.ci_high + 1e-9);
            prop_assert!((0.0..=100.0).contains(&r.original_accuracy));
        }
    }

    #[test]
    fn wilson_interval_contains_the_estimate(n in 1usize..500, k in 0usize..500) {
        let k = k % (n + 1);
        let (lo, hi) = wilson_interval(k, n);
        let p = k as f64 / n as f64;
        prop_assert!(0.0 <= lo && lo <= p + 1e-12 && p <= hi + 1e-12 && hi <= 1.0);
    }

    #[test]
    fn correlation_is_symmetric_and_bounded(recs in records()) {
        let (a, b) = (MutationKind::VarRenameRandom, MutationKind::IfElseFlip);
        match (mutation_correlation(&recs, a, b), mutation_correlation(&recs, b, a)) {
            (Ok(x), Ok(y)) => {
                prop_assert!((-1.0..=1.0).contains(&x.r));
                prop_assert!((x.r - y.r).abs() < 1e-12);
                prop_assert_eq!(x.n, y.n);
            }
            (Err(_), Err(_)) => {}
            (x, y) => prop_assert!(false, "asymmetric outcome {:?} / {:?}", x, y),
        }
    }

    #[test]
    fn pearson_is_affine_invariant(xs in prop::collection::vec(0u8..4, 3..40), scale in 1u8..5, shift in 0u8..5) {
        let x: Vec<f64> = xs.iter().map(|&v| v as f64).collect();
        let y: Vec<f64> = x.iter().map(|v| v * scale as f64 + shift as f64).collect();
        if let Ok(r) = pearson(&x, &y) {
            prop_assert_eq!(r, 1.0);
        }
    }

    #[test]
    fn ratio_is_count_quotient(eq in 0u64..200, ne in 0u64..200, lt in 0u64..50, ge in 0u64..50) {
        let mut c = OperatorCounts::default();
        c.counts.insert("==".into(), eq);
        c.counts.insert("!=".into(), ne);
        c.counts.insert("<".into(), lt);
        c.counts.insert(">=".into(), ge);
        let rep = OperatorFrequencyReport::from_counts(c);
        for p in &rep.pairs {
            let expected = (p.count_a > 0 && p.count_b > 0).then(|| p.count_a as f64 / p.count_b as f64);
            prop_assert_eq!(p.ratio, expected);
        }
        prop_assert_eq!((rep.pairs[0].count_a, rep.pairs[0].count_b), (eq, ne));
    }
}
