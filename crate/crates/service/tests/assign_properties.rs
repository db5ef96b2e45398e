use proptest::prelude::*;
use puk_service::{assign, wait_time};

fn workers(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("w{i}")).collect()
}

proptest! {
    #[test]
    fn plan_invariants(d in 1u32..=200, t in 2usize..=100, n in 1usize..=8) {
        let plan = assign(f64::from(d), t, &workers(n)).unwrap();
        prop_assert_eq!(plan.total_trials(), t);
        let counts: Vec<usize> = (0..n).map(|i| plan.count_for(&format!("w{i}"))).collect();
        let (lo, hi) = (counts.iter().min().unwrap(), counts.iter().max().unwrap());
        prop_assert!(hi - lo <= 1);
        prop_assert_eq!(plan.wait_time_s, f64::from(d) * t.div_ceil(n) as f64);
        prop_assert!(plan.wait_time_s >= f64::from(d));

        let mut indices: Vec<u64> = plan.assignments.iter().flat_map(|a| a.trials.clone()).collect();
        indices.sort_unstable();
        prop_assert_eq!(indices, (0..t as u64).collect::<Vec<_>>());
    }
}

#[test]
fn exhaustive_grid() {
    for d in 1..=200u32 {
        for t in 2..=100usize {
            for n in 1..=8usize {
                let expected = f64::from(d) * t.div_ceil(n) as f64;
                assert_eq!(wait_time(f64::from(d), t, n), expected, "d={d} T={t} D={n}");
            }
        }
    }
}
