use proptest::prelude::*;
use puk_core::classify::{
    classify, score, score_sequences, BoundaryRule, ClassBoundaries, ErrorClass, ScoreReport,
};
use puk_core::rpe::{ErrorSeries, SeriesRole};

/// Per-class metrics counted by enumerating every (predicted, actual) pair.
fn oracle(predicted: &[ErrorClass], actual: &[ErrorClass]) -> (f64, f64, f64, f64) {
    let n = predicted.len();
    let mut correct = 0u64;
    let (mut recalls, mut specs, mut f1s) = (vec![], vec![], vec![]);
    for c in ErrorClass::ALL {
        let (mut tp, mut fp, mut fn_, mut tn) = (0u64, 0u64, 0u64, 0u64);
        for i in 0..n {
            match (predicted[i] == c, actual[i] == c) {
                (true, true) => tp += 1,
                (true, false) => fp += 1,
                (false, true) => fn_ += 1,
                (false, false) => tn += 1,
            }
        }
        if tp + fn_ > 0 {
            recalls.push(tp as f64 / (tp + fn_) as f64);
            f1s.push(2.0 * tp as f64 / (2 * tp + fp + fn_) as f64);
        }
        if tn + fp > 0 {
            specs.push(tn as f64 / (tn + fp) as f64);
        }
    }
    for i in 0..n {
        if predicted[i] == actual[i] {
            correct += 1;
        }
    }
    let avg = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    (correct as f64 / n as f64, avg(&f1s), avg(&recalls), avg(&specs))
}

fn labels(len: usize) -> impl Strategy<Value = Vec<ErrorClass>> {
    prop::collection::vec(prop::sample::select(ErrorClass::ALL.to_vec()), len)
}

fn expand(confusion: [[u64; 3]; 3]) -> (Vec<ErrorClass>, Vec<ErrorClass>) {
    let (mut p, mut a) = (vec![], vec![]);
    for (ai, row) in confusion.iter().enumerate() {
        for (pi, &count) in row.iter().enumerate() {
            for _ in 0..count {
                a.push(ErrorClass::ALL[ai]);
                p.push(ErrorClass::ALL[pi]);
            }
        }
    }
    (p, a)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn score_matches_enumeration((p, a) in (1usize..80).prop_flat_map(|n| (labels(n), labels(n)))) {
        let r = score(&p, &a).unwrap();
        let (acc, f1, sens, spec) = oracle(&p, &a);
        prop_assert_eq!(r.accuracy, acc);
        prop_assert_eq!(r.f1_macro, f1);
        prop_assert_eq!(r.sensitivity_avg, sens);
        prop_assert_eq!(r.specificity_avg, spec);
        for (c, row) in r.confusion.iter().enumerate() {
            let support = a.iter().filter(|&&x| x == ErrorClass::ALL[c]).count() as u64;
            prop_assert_eq!(row.iter().sum::<u64>(), support);
        }
    }

    #[test]
    fn classify_is_monotone(e in 0.0..0.5f64, de in 0.0..0.5f64, c1 in 0.001..0.2f64, gap in 0.001..0.2f64) {
        let b = ClassBoundaries::new(c1, c1 + gap).unwrap();
        for rule in [BoundaryRule::PromoteUp, BoundaryRule::KeepLow] {
            prop_assert!(b.class_of(e, rule) <= b.class_of(e + de, rule));
        }
    }
}

#[test]
fn worked_example() {
    let (p, a) = expand([[8, 1, 1], [1, 7, 2], [0, 1, 9]]);
    let r = score(&p, &a).unwrap();
    assert!((r.accuracy - 0.8).abs() < 1e-12);
    assert!((r.sensitivity_avg - 0.8).abs() < 1e-12);
    assert!((r.specificity_avg - 0.9).abs() < 1e-12);
    assert_eq!(r.confusion, [[8, 1, 1], [1, 7, 2], [0, 1, 9]]);
}

#[test]
fn over_predicting_rare_class_keeps_specificity() {
    // 90 low, 10 high; the estimator flags 10 extra lows as high
    let mut conf = [[0u64; 3]; 3];
    conf[0][0] = 80;
    conf[0][2] = 10;
    conf[2][2] = 10;
    let (p, a) = expand(conf);
    let r = score(&p, &a).unwrap();
    assert!(r.specificity_avg > 0.85, "{r:?}");
    assert!(r.f1_macro < 0.85, "{r:?}");
}

#[test]
fn sequence_average_matches_independent_mean() {
    let mut reports: Vec<ScoreReport> = Vec::new();
    let mut seed = 0x2545f4914f6cdd1du64;
    let mut next = || {
        seed ^= seed << 13;
        seed ^= seed >> 7;
        seed ^= seed << 17;
        ErrorClass::ALL[(seed % 3) as usize]
    };
    for _ in 0..30 {
        let p: Vec<_> = (0..20).map(|_| next()).collect();
        let a: Vec<_> = (0..20).map(|_| next()).collect();
        reports.push(score(&p, &a).unwrap());
    }
    let avg = score_sequences(&reports).unwrap();
    let mut acc = 0.0;
    let mut f1 = 0.0;
    for r in &reports {
        acc += r.accuracy;
        f1 += r.f1_macro;
    }
    assert!((avg.accuracy - acc / 30.0).abs() < 1e-12);
    assert!((avg.f1_macro - f1 / 30.0).abs() < 1e-12);
    assert_eq!(avg.confusion.iter().flatten().sum::<u64>(), 600);
}

#[test]
fn classify_examples() {
    let s = ErrorSeries::new(vec![0.07, 0.05, 0.0, 0.10, 0.2], SeriesRole::Estimate);
    let c = classify(&s, &ClassBoundaries::FIVE_TEN);
    use ErrorClass::*;
    assert_eq!(c, vec![Medium, Medium, Low, High, High]);
    for b in [ClassBoundaries::FIVE_TEN, ClassBoundaries::TWO_TEN, ClassBoundaries::TWO_FIVE] {
        assert_eq!(b.class_of(0.0, BoundaryRule::PromoteUp), Low);
    }
}
