use noiserise::density::{schedule_density, schedule_density_capped, ShannonAdaptation};
use noiserise::model::UserLink;
use noiserise::simnet::{quantize_allocation, update_pf, PFState};
use noiserise::solver::{bandwidth_step, lambda2_bounds, power_step, shares_for_lambda2, solve_joint, SolverConfig};
use proptest::collection::vec;
use proptest::prelude::*;

fn link() -> impl Strategy<Value = (f64, f64, f64)> {
    (0.1f64..20.0, 0.1f64..20.0, 0.1f64..20.0)
}

fn links(max: usize) -> impl Strategy<Value = Vec<UserLink>> {
    vec(link(), 1..=max).prop_map(|v| {
        v.into_iter()
            .enumerate()
            .map(|(i, (w, e, l))| UserLink::new(i, w, e, l).unwrap())
            .collect()
    })
}

fn shares(n: usize) -> impl Strategy<Value = Vec<f64>> {
    vec(0.01f64..1.0, n).prop_map(|v| {
        let s: f64 = v.iter().sum();
        v.into_iter().map(|x| x / s).collect()
    })
}

proptest! {
    #[test]
    fn power_step_spends_the_budget(ls in links(8), budget in 0.5f64..10.0, seed in any::<u64>()) {
        let x: Vec<f64> = (0..ls.len()).map(|i| 0.1 + ((seed >> (i % 60)) & 7) as f64).collect();
        let s: f64 = x.iter().sum();
        let x: Vec<f64> = x.iter().map(|v| v / s).collect();
        let ps = power_step(&x, &ls, budget).unwrap();
        let egress: f64 = ls.iter().zip(&ps.p).map(|(l, p)| l.norm_interference * p).sum();
        prop_assert!((egress - budget).abs() <= 1e-9 * budget);
        prop_assert!(ps.lambda1 > 0.0);
        for (i, l) in ls.iter().enumerate() {
            let formula = x[i] * (l.weight / (ps.lambda1 * l.norm_interference) - 1.0 / l.norm_sinr).max(0.0);
            prop_assert!((ps.p[i] - formula).abs() <= 1e-12 * (1.0 + formula));
        }
    }

    #[test]
    fn multiplier_bounds_and_monotone_shares(ls in links(8), p in vec(0.01f64..5.0, 8)) {
        let p = &p[..ls.len()];
        let (lo, hi) = lambda2_bounds(p, &ls).unwrap();
        prop_assert!(lo <= hi && hi <= 0.0);
        let bs = bandwidth_step(p, &ls, 1e-9).unwrap();
        prop_assert!(bs.lambda2 >= lo - 1e-12 * lo.abs() && bs.lambda2 <= hi + 1e-12 * hi.abs());
        prop_assert!((bs.x.iter().sum::<f64>() - 1.0).abs() <= 1e-9);
        let mut last = 0.0;
        for k in 0..100 {
            let l2 = lo + (hi - lo) * k as f64 / 99.0;
            let s: f64 = shares_for_lambda2(l2, p, &ls).iter().sum();
            prop_assert!(s >= last - 1e-12 * s.abs());
            last = s;
        }
    }

    #[test]
    fn joint_solution_is_feasible(ls in links(10), budget in 0.5f64..10.0) {
        let sol = solve_joint(&ls, budget, &SolverConfig::default()).unwrap();
        prop_assert!(sol.allocation.is_feasible(&ls, budget, 1e-9));
        let egress: f64 = ls.iter().zip(&sol.allocation.p).map(|(l, p)| l.norm_interference * p).sum();
        prop_assert!((egress - budget).abs() <= 1e-9 * budget);
        prop_assert!(!sol.is_certified() || sol.kkt_residual <= 1e-6);
    }

    #[test]
    fn density_schedulers_respect_their_caps(
        raw in vec((0.0f64..20.0, 0.0f64..20.0, 0.01f64..20.0, 0.001f64..5.0), 1..12),
        budget in 0.01f64..10.0,
    ) {
        let ls: Vec<UserLink> = raw
            .iter()
            .enumerate()
            .map(|(i, &(w, e, l, cap))| UserLink::new(i, w, e, l).unwrap().with_max_power(cap).unwrap())
            .collect();
        for a in [schedule_density(&ls, budget, &ShannonAdaptation), schedule_density_capped(&ls, budget)] {
            let egress: f64 = ls.iter().zip(&a.p).map(|(l, p)| l.norm_interference * p).sum();
            prop_assert!(egress <= budget * (1.0 + 1e-12));
            prop_assert!(a.bandwidth_used() <= 1.0 + 1e-12);
            for (i, l) in ls.iter().enumerate() {
                if a.p[i] > 0.0 {
                    prop_assert!(l.norm_interference * a.p[i] <= budget * a.x[i] * (1.0 + 1e-12));
                }
            }
        }
        let capped = schedule_density_capped(&ls, budget);
        for (l, &p) in ls.iter().zip(&capped.p) {
            prop_assert!(p <= l.max_power.unwrap() * (1.0 + 1e-12));
        }
    }

    #[test]
    fn largest_remainder_stays_within_one_unit(x in shares(12), n in 1usize..200) {
        let units = quantize_allocation(&x, n);
        prop_assert!(units.iter().sum::<usize>() <= n);
        for (u, xi) in units.iter().zip(&x) {
            prop_assert!((*u as f64 / n as f64 - xi).abs() <= 1.0 / n as f64 + 1e-12);
        }
    }

    #[test]
    fn pf_weights_only_fall_for_served_mobiles(
        bits in vec(0.0f64..1e6, 1..30),
        beta in 0.0f64..=1.0,
    ) {
        let s = PFState::new(bits.len(), 10.0, beta);
        let next = update_pf(&s, &bits);
        for (i, &b) in bits.iter().enumerate() {
            prop_assert!(next.throughput[i] > 0.0);
            prop_assert!(next.weight(i) <= s.weight(i));
            if b == 0.0 || beta == 1.0 {
                prop_assert_eq!(next.weight(i), s.weight(i));
            }
        }
    }
}
