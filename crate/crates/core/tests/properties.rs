mod common;

use cohdeals::geometry::{allocate, contribution, generator_polygon, support_value, Generator};
use cohdeals::hedging::superhedge;
use cohdeals::markets::{check_ngd, na_interval, ngd_interval, raroc_interval, MarketModel, NgdCheck};
use cohdeals::risk::is_member;
use cohdeals::txcost::{txcost_interval, txcost_solve, TreeModel, TreeNode};
use cohdeals::{extreme_measure, utility, CoreError, Pnl, RiskSpec};
use common::*;
use proptest::prelude::*;
use rand::Rng;

fn config(cases: u32) -> ProptestConfig {
    ProptestConfig { cases, ..ProptestConfig::default() }
}

proptest! {
    #![proptest_config(config(64))]

    #[test]
    fn coherence_axioms(seed in any::<u64>(), fam in 0usize..5) {
        let mut rng = rng(seed);
        let n = rng.gen_range(1..=30);
        let s = random_space(&mut rng, n);
        let spec = random_spec(&mut rng, FAMILIES[fam], &s);
        let x = random_pnl(&mut rng, &s, 4.0);
        let y = random_pnl(&mut rng, &s, 4.0);
        let u = |v: &Pnl| utility(&spec, v).unwrap();
        prop_assert!(u(&x.add(&y).unwrap()) >= u(&x) + u(&y) - 1e-9);
        let up = x.map(|v| v + 0.5);
        prop_assert!(u(&up) >= u(&x) - 1e-9);
        prop_assert!((u(&x.scale(2.5)) - 2.5 * u(&x)).abs() <= 1e-9);
        prop_assert!((u(&x.shift(-3.0)) - u(&x) + 3.0).abs() <= 1e-9);
    }

    #[test]
    fn extreme_measures_attain_the_utility(seed in any::<u64>(), fam in 0usize..5) {
        let mut rng = rng(seed);
        let n = rng.gen_range(1..=25);
        let s = random_space(&mut rng, n);
        let spec = random_spec(&mut rng, FAMILIES[fam], &s);
        let x = random_pnl(&mut rng, &s, 4.0);
        let r = extreme_measure(&spec, &x).unwrap();
        prop_assert!((r.density.expect(&x).unwrap() - r.utility).abs() <= 1e-9);
        prop_assert!(is_member(&spec, &r.density, 1e-9).unwrap());
    }

    #[test]
    fn tail_utility_never_exceeds_the_mean(seed in any::<u64>()) {
        let mut rng = rng(seed);
        let n = rng.gen_range(1..=40);
        let s = random_space(&mut rng, n);
        let x = random_pnl(&mut rng, &s, 4.0);
        let spec = random_tail(&mut rng);
        prop_assert!(utility(&spec, &x).unwrap() <= x.mean() + 1e-12);
    }

    #[test]
    fn support_function_is_the_utility_of_the_combination(seed in any::<u64>(), fam in 0usize..5) {
        let mut rng = rng(seed);
        let n = rng.gen_range(1..=20);
        let s = random_space(&mut rng, n);
        let spec = random_spec(&mut rng, FAMILIES[fam], &s);
        let d = rng.gen_range(1..=3);
        let xs: Vec<Pnl> = (0..d).map(|_| random_pnl(&mut rng, &s, 2.0)).collect();
        let g = Generator::new(spec.clone(), xs.clone()).unwrap();
        for _ in 0..10 {
            let h: Vec<f64> = (0..d).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let direct = utility(&spec, &Pnl::combination(&xs, &h).unwrap()).unwrap();
            prop_assert!((support_value(&g, &h).unwrap() - direct).abs() <= 1e-9);
        }
    }

    #[test]
    fn polygon_reproduces_the_support_function(seed in any::<u64>(), fam in 0usize..5) {
        let mut rng = rng(seed);
        let n = rng.gen_range(1..=15);
        let s = random_space(&mut rng, n);
        let spec = random_spec(&mut rng, FAMILIES[fam], &s);
        let xs = vec![random_pnl(&mut rng, &s, 2.0), random_pnl(&mut rng, &s, 2.0)];
        let g = Generator::new(spec, xs).unwrap();
        let poly = generator_polygon(&g).unwrap();
        for k in 0..72 {
            let a = k as f64 * std::f64::consts::PI / 36.0;
            let h = [a.cos(), a.sin()];
            let from_poly = poly.iter().map(|v| h[0] * v[0] + h[1] * v[1]).fold(f64::INFINITY, f64::min);
            prop_assert!((from_poly - support_value(&g, &h).unwrap()).abs() <= 1e-7);
        }
    }

    #[test]
    fn allocations_satisfy_the_diversification_inequalities(seed in any::<u64>(), fam in 0usize..5) {
        let mut rng = rng(seed);
        let n = rng.gen_range(2..=20);
        let s = random_space(&mut rng, n);
        let spec = random_spec(&mut rng, FAMILIES[fam], &s);
        let d = rng.gen_range(1..=3);
        let xs: Vec<Pnl> = (0..d).map(|_| random_pnl(&mut rng, &s, 2.0)).collect();
        let a = allocate(&spec, &xs).unwrap();
        let total = Pnl::combination(&xs, &vec![1.0; d]).unwrap();
        prop_assert!((a.allocation.iter().sum::<f64>() - utility(&spec, &total).unwrap()).abs() <= 1e-8);
        for (x, (lo, hi)) in a.allocation.iter().zip(&a.ranges) {
            prop_assert!(*lo <= x + 1e-9 && *x <= hi + 1e-9);
        }
        for _ in 0..16 {
            let h: Vec<f64> = (0..d).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let lhs: f64 = h.iter().zip(&a.allocation).map(|(h, x)| h * x).sum();
            prop_assert!(lhs >= utility(&spec, &Pnl::combination(&xs, &h).unwrap()).unwrap() - 1e-8);
        }
    }

    #[test]
    fn difference_quotients_rise_to_the_contribution(seed in any::<u64>(), weighted in any::<bool>()) {
        let mut rng = rng(seed);
        let n = rng.gen_range(2..=40);
        let s = random_space(&mut rng, n);
        let spec = if weighted { random_weighted(&mut rng) } else { random_tail(&mut rng) };
        let x = random_pnl(&mut rng, &s, 1.0);
        let y = random_pnl(&mut rng, &s, 1.0);
        let uy = utility(&spec, &y).unwrap();
        let uc = contribution(&spec, &x, &y).unwrap();
        let mut last = f64::NEG_INFINITY;
        for eps in [1e-2, 1e-3, 1e-4] {
            let q = (utility(&spec, &y.add(&x.scale(eps)).unwrap()).unwrap() - uy) / eps;
            // Rounding in u is amplified by 1/eps.
            let tol = 1e-11 / eps;
            prop_assert!(q >= last - tol, "eps {} q {} last {} uc {}", eps, q, last, uc);
            last = q;
        }
        prop_assert!((uc - last).abs() < 1e-3);
    }
}

/// Single-asset market with `S0` drawn anywhere, so both outcomes of the
/// no-good-deal test occur.
fn loose_market(rng: &mut rand_chacha::ChaCha8Rng, d: usize) -> MarketModel {
    let n = rng.gen_range(2..=10);
    let s = random_space(rng, n);
    let s1: Vec<Pnl> = (0..d).map(|_| random_pnl(rng, &s, 1.0)).collect();
    let s0 = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
    MarketModel::new(&s, s0, s1).unwrap()
}

proptest! {
    #![proptest_config(config(64))]

    #[test]
    fn ngd_matches_the_generator_test(seed in any::<u64>()) {
        let mut rng = rng(seed);
        let m = loose_market(&mut rng, 1);
        let spec = random_tail(&mut rng);
        // For one asset G = [u(S1), -u(-S1)].
        let lo = utility(&spec, &m.s1()[0]).unwrap();
        let hi = -utility(&spec, &m.s1()[0].scale(-1.0)).unwrap();
        let s0 = m.s0()[0];
        prop_assume!((s0 - lo).abs() > 1e-7 && (s0 - hi).abs() > 1e-7);
        let inside = lo < s0 && s0 < hi;
        match check_ngd(&m, &spec).unwrap() {
            NgdCheck::Holds { witness } => {
                prop_assert!(inside);
                prop_assert!((witness.expect(&m.s1()[0]).unwrap() - s0).abs() <= 1e-9);
            }
            NgdCheck::Violated(v) => {
                prop_assert!(!inside);
                prop_assert!(utility(&spec, &m.gain(&v.portfolio).unwrap()).unwrap() > 0.0);
            }
        }
    }

    #[test]
    fn ngd_matches_the_polygon_test(seed in any::<u64>()) {
        let mut rng = rng(seed);
        let m = loose_market(&mut rng, 2);
        let spec = random_tail(&mut rng);
        let g = Generator::new(spec.clone(), m.s1().to_vec()).unwrap();
        let poly = generator_polygon(&g).unwrap();
        let s0 = m.s0();
        // Signed distance to the polygon boundary via its support function.
        let mut margin = f64::INFINITY;
        for k in 0..360 {
            let a = k as f64 * std::f64::consts::PI / 180.0;
            let h = [a.cos(), a.sin()];
            let sup = poly.iter().map(|v| h[0] * v[0] + h[1] * v[1]).fold(f64::INFINITY, f64::min);
            margin = margin.min(h[0] * s0[0] + h[1] * s0[1] - sup);
        }
        prop_assume!(margin.abs() > 1e-3 && poly.len() >= 3);
        match check_ngd(&m, &spec).unwrap() {
            NgdCheck::Holds { .. } => prop_assert!(margin > 0.0),
            NgdCheck::Violated(v) => {
                prop_assert!(margin < 0.0);
                prop_assert!(utility(&spec, &m.gain(&v.portfolio).unwrap()).unwrap() > 0.0);
            }
        }
    }

    #[test]
    fn raroc_intervals_grow_with_the_limit(seed in any::<u64>()) {
        let mut rng = rng(seed);
        let m = loose_market(&mut rng, 1);
        let f = random_pnl(&mut rng, m.space(), 1.0);
        let lam_rd = rng.gen_range(0.05..0.9);
        let (pd, rd) = (RiskSpec::tail_var(rng.gen_range(lam_rd..=1.0)), RiskSpec::tail_var(lam_rd));
        let Ok(ngd) = ngd_interval(&m, &rd, &f) else { return Ok(()) };
        let na = na_interval(&m, &f).unwrap();
        prop_assert!(na.contains(&ngd, 1e-9));
        let mut prev: Option<cohdeals::markets::PriceInterval> = None;
        for r in [0.25, 1.0, 4.0] {
            match raroc_interval(&m, &pd, &rd, r, &f) {
                Ok(iv) => {
                    prop_assert!(ngd.contains(&iv, 1e-9));
                    if let Some(p) = &prev {
                        prop_assert!(iv.contains(p, 1e-9));
                    }
                    prev = Some(iv);
                }
                Err(CoreError::Violated(_)) => prop_assert!(prev.is_none()),
                Err(e) => return Err(TestCaseError::fail(e.to_string())),
            }
        }
    }

    #[test]
    fn every_hedge_in_the_range_certifies(seed in any::<u64>()) {
        let mut rng = rng(seed);
        let m = loose_market(&mut rng, 1);
        let spec = random_tail(&mut rng);
        let f = random_pnl(&mut rng, m.space(), 1.0);
        let Ok(r) = superhedge(&m, &spec, &f) else { return Ok(()) };
        let mut hs = vec![r.super_h[0]];
        if let Some((a, b)) = r.super_h_range {
            hs.extend([a, b, 0.5 * (a + b)]);
        }
        for h in hs {
            let pos = m.gain(&[h]).unwrap().add(&f.scale(-1.0)).unwrap().shift(r.upper_price);
            let u = utility(&spec, &pos).unwrap();
            prop_assert!((-1e-7..=1e-6).contains(&u), "h {} gives {}", h, u);
        }
        let mut hs = vec![r.sub_h[0]];
        if let Some((a, b)) = r.sub_h_range {
            hs.extend([a, b]);
        }
        for h in hs {
            let pos = m.gain(&[h]).unwrap().add(&f).unwrap().shift(-r.lower_price);
            let u = utility(&spec, &pos).unwrap();
            prop_assert!((-1e-7..=1e-6).contains(&u), "sub h {} gives {}", h, u);
        }
    }

    #[test]
    fn dominating_payoffs_cost_more(seed in any::<u64>()) {
        let mut rng = rng(seed);
        let m = loose_market(&mut rng, 1);
        let spec = random_tail(&mut rng);
        let f = random_pnl(&mut rng, m.space(), 1.0);
        let bumps: Vec<f64> = f.values().iter().map(|v| v + rng.gen_range(0.0..0.5)).collect();
        let g = m.space().pnl(bumps).unwrap();
        let (Ok(a), Ok(b)) = (superhedge(&m, &spec, &f), superhedge(&m, &spec, &g)) else { return Ok(()) };
        prop_assert!(a.upper_price <= b.upper_price + 1e-9);
        prop_assert!(a.lower_price <= b.lower_price + 1e-9);
    }
}

/// Random tree with one or two assets, two or three branches per node.
fn random_tree(rng: &mut rand_chacha::ChaCha8Rng) -> TreeModel {
    let d = rng.gen_range(1..=2);
    let depth = rng.gen_range(1..=3);
    let mut nodes = vec![TreeNode { parent: None, prob: 1.0, ask: vec![1.0; d], bid: None, payoff: None }];
    let mut level = vec![0usize];
    for _ in 0..depth {
        let mut next = Vec::new();
        for &v in &level {
            let k = rng.gen_range(2..=3);
            let w = simplex_weights(rng, k);
            for p in w {
                let ask = nodes[v].ask.iter().map(|a| a * rng.gen_range(0.8..1.25)).collect();
                nodes.push(TreeNode { parent: Some(v), prob: p, ask, bid: None, payoff: None });
                next.push(nodes.len() - 1);
            }
        }
        level = next;
    }
    for &v in &level {
        nodes[v].payoff = Some(rng.gen_range(0.0..1.0));
    }
    let lambda = rng.gen_range(0.1..=1.0);
    TreeModel { nodes, risk_spec: RiskSpec::tail_var(lambda), cost_weights: None }
}

proptest! {
    #![proptest_config(config(32))]

    #[test]
    fn narrower_bands_give_narrower_intervals(seed in any::<u64>()) {
        let mut rng = rng(seed);
        let tree = random_tree(&mut rng);
        let mut prev: Option<cohdeals::markets::PriceInterval> = None;
        for lambda in [0.3, 0.1, 0.03, 0.0] {
            match txcost_interval(&tree, lambda) {
                Ok(iv) => {
                    if let Some(p) = &prev {
                        prop_assert!(p.contains(&iv, 1e-8), "{:?} then {:?}", p, iv);
                    }
                    prev = Some(iv);
                }
                Err(CoreError::Violated(v)) => prop_assert!(v.value > 0.0),
                Err(e) => return Err(TestCaseError::fail(e.to_string())),
            }
        }
    }

    #[test]
    fn shadow_prices_stay_in_the_band(seed in any::<u64>()) {
        let mut rng = rng(seed);
        let tree = random_tree(&mut rng);
        let lambda = 0.2;
        let Ok(sol) = txcost_solve(&tree, lambda) else { return Ok(()) };
        for end in [&sol.lo, &sol.hi] {
            for (node, m) in tree.nodes.iter().zip(&end.shadow) {
                let Some(m) = m else { continue };
                for (mi, ask) in m.iter().zip(&node.ask) {
                    prop_assert!(*mi <= ask + 1e-7 && *mi >= (1.0 - lambda) * ask - 1e-7);
                }
            }
        }
    }

    #[test]
    fn risk_specs_round_trip_through_json(seed in any::<u64>(), fam in 0usize..5) {
        let mut rng = rng(seed);
        let s = random_space(&mut rng, 4);
        let spec = random_spec(&mut rng, FAMILIES[fam], &s);
        let text = serde_json::to_string(&spec).unwrap();
        let back: RiskSpec = serde_json::from_str(&text).unwrap();
        prop_assert_eq!(back, spec);
    }
}
