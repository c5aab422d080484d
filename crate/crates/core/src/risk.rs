//! Coherent utility, risk and extreme measures.

use cohdeals_linprog::{solve, LinearProgram, LpStatus};

use crate::error::{CoreError, Result};
use crate::ground::ground;
use crate::space::{Density, Pnl, ScenarioSpace};
use crate::spec::RiskSpec;

/// Utility value together with a density attaining it.
#[derive(Debug, Clone)]
pub struct ExtremeResult {
    pub utility: f64,
    pub density: Density,
}

/// `u(X) = inf_{Q in D} E_Q X`, evaluated structurally (no LP).
pub fn utility(spec: &RiskSpec, x: &Pnl) -> Result<f64> {
    spec.validate(x.space())?;
    Ok(utility_values(spec, x.space(), x.values()))
}

/// `rho(X) = -u(X)`.
pub fn risk(spec: &RiskSpec, x: &Pnl) -> Result<f64> {
    utility(spec, x).map(|u| -u)
}

/// A minimizer of `E_Q X` over the determining set.
pub fn extreme_measure(spec: &RiskSpec, x: &Pnl) -> Result<ExtremeResult> {
    spec.validate(x.space())?;
    let z = extreme_values(spec, x.space(), x.values());
    let density = Density::from_solver(x.space(), z)?;
    let utility = density.expect_values(x.values());
    Ok(ExtremeResult { utility, density })
}

/// The same infimum computed by linear programming over the grounded set.
pub fn utility_lp(spec: &RiskSpec, x: &Pnl) -> Result<ExtremeResult> {
    let space = x.space();
    let g = ground(spec, space)?;
    let mut lp = LinearProgram::new(0);
    let dens = g.embed(&mut lp);
    for (i, row) in dens.iter().enumerate() {
        let w = space.probs()[i] * x.values()[i];
        for &(j, a) in row {
            lp.objective[j] += w * a;
        }
    }
    let sol = solve(&lp)?;
    if sol.status != LpStatus::Optimal {
        return Err(CoreError::Numerical(format!("utility LP ended {:?}", sol.status)));
    }
    let z = eval_rows(&dens, &sol.x);
    let density = Density::from_solver(space, z)?;
    Ok(ExtremeResult { utility: sol.objective, density })
}

/// Whether `q` lies in the grounded determining set, up to `tolerance` in the
/// sup norm of the density.
pub fn is_member(spec: &RiskSpec, q: &Density, tolerance: f64) -> Result<bool> {
    Ok(membership_distance(spec, q)? <= tolerance)
}

/// `min ||z(v) - q||_1` over the grounded set, an LP.
pub fn membership_distance(spec: &RiskSpec, q: &Density) -> Result<f64> {
    let space = q.space();
    let g = ground(spec, space)?;
    let mut lp = LinearProgram::new(0);
    let dens = g.embed(&mut lp);
    for (i, row) in dens.iter().enumerate() {
        let sp = lp.add_var(1.0, 0.0, f64::INFINITY);
        let sm = lp.add_var(1.0, 0.0, f64::INFINITY);
        let mut r = row.clone();
        r.push((sp, 1.0));
        r.push((sm, -1.0));
        lp.add_eq(r, q.values()[i]);
    }
    let sol = solve(&lp)?;
    match sol.status {
        LpStatus::Optimal => Ok(sol.objective.max(0.0)),
        s => Err(CoreError::Numerical(format!("membership LP ended {s:?}"))),
    }
}

pub(crate) fn eval_rows(rows: &[cohdeals_linprog::Row], x: &[f64]) -> Vec<f64> {
    rows.iter().map(|r| LinearProgram::row_value(r, x)).collect()
}

pub(crate) fn utility_values(spec: &RiskSpec, space: &ScenarioSpace, x: &[f64]) -> f64 {
    match spec {
        RiskSpec::TailVar { lambda } => {
            let z = tail_density(space.probs(), x, *lambda);
            space.probs().iter().zip(&z).zip(x).map(|((p, z), v)| p * z * v).sum()
        }
        RiskSpec::WeightedVar { atoms } => atoms
            .iter()
            .map(|a| a.weight * utility_values(&RiskSpec::tail_var(a.lambda), space, x))
            .sum(),
        RiskSpec::Mixture { terms } => {
            terms.iter().map(|t| t.weight * utility_values(&t.spec, space, x)).sum()
        }
        RiskSpec::Polytope { vertices } => vertices
            .iter()
            .map(|v| expect(space.probs(), v, x))
            .fold(f64::INFINITY, f64::min),
        RiskSpec::ConvHull { specs } => specs
            .iter()
            .map(|s| utility_values(s, space, x))
            .fold(f64::INFINITY, f64::min),
    }
}

pub(crate) fn extreme_values(spec: &RiskSpec, space: &ScenarioSpace, x: &[f64]) -> Vec<f64> {
    match spec {
        RiskSpec::TailVar { lambda } => tail_density(space.probs(), x, *lambda),
        RiskSpec::WeightedVar { atoms } => weighted_sum(
            space.len(),
            atoms
                .iter()
                .map(|a| (a.weight, tail_density(space.probs(), x, a.lambda))),
        ),
        RiskSpec::Mixture { terms } => weighted_sum(
            space.len(),
            terms.iter().map(|t| (t.weight, extreme_values(&t.spec, space, x))),
        ),
        RiskSpec::Polytope { vertices } => {
            let best = argmin(vertices.iter().map(|v| expect(space.probs(), v, x)));
            vertices[best].clone()
        }
        RiskSpec::ConvHull { specs } => {
            let best = argmin(specs.iter().map(|s| utility_values(s, space, x)));
            extreme_values(&specs[best], space, x)
        }
    }
}

fn expect(p: &[f64], z: &[f64], x: &[f64]) -> f64 {
    p.iter().zip(z).zip(x).map(|((p, z), v)| p * z * v).sum()
}

fn argmin(values: impl Iterator<Item = f64>) -> usize {
    let mut best = (0, f64::INFINITY);
    for (k, v) in values.enumerate() {
        if v < best.1 {
            best = (k, v);
        }
    }
    best.0
}

fn weighted_sum(n: usize, parts: impl Iterator<Item = (f64, Vec<f64>)>) -> Vec<f64> {
    let mut z = vec![0.0; n];
    for (w, part) in parts {
        for (acc, v) in z.iter_mut().zip(part) {
            *acc += w * v;
        }
    }
    z
}

/// Extreme density of Tail V@R: `1/lambda` on outcomes below the lambda-quantile,
/// a shared fraction on the outcomes tied at the quantile, zero above.
///
/// lambda = 0 returns `P` conditioned on the set of minimal outcomes.
pub fn tail_density(probs: &[f64], x: &[f64], lambda: f64) -> Vec<f64> {
    let n = x.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let mut z = vec![0.0; n];
    if lambda <= 0.0 {
        let lo = x[order[0]];
        let ties: Vec<usize> = order.iter().copied().take_while(|&i| x[i] == lo).collect();
        let mass: f64 = ties.iter().map(|&i| probs[i]).sum();
        for i in ties {
            z[i] = 1.0 / mass;
        }
        return z;
    }
    let mut filled = 0.0;
    let mut k = 0;
    while k < n && filled < lambda {
        let v = x[order[k]];
        let mut end = k;
        let mut mass = 0.0;
        while end < n && x[order[end]] == v {
            mass += probs[order[end]];
            end += 1;
        }
        // Fraction of the tied group that fits into the remaining tail mass.
        let share = ((lambda - filled) / mass).min(1.0);
        for &i in &order[k..end] {
            z[i] = share / lambda;
        }
        filled += mass;
        k = end;
    }
    z
}

#[cfg(test)]
mod tests {
    use super::*;

    fn three() -> (ScenarioSpace, Pnl) {
        let s = ScenarioSpace::uniform(3).unwrap();
        let x = s.pnl(vec![1.0, 2.0, 3.0]).unwrap();
        (s, x)
    }

    #[test]
    fn essential_infimum() {
        let s = ScenarioSpace::uniform(2).unwrap();
        let x = s.pnl(vec![0.0, 1000.0]).unwrap();
        assert_eq!(utility(&RiskSpec::tail_var(0.0), &x).unwrap(), 0.0);
        assert_eq!(risk(&RiskSpec::tail_var(0.0), &x).unwrap(), 0.0);
        let e = extreme_measure(&RiskSpec::tail_var(0.0), &x).unwrap();
        assert_eq!(e.density.values(), &[2.0, 0.0]);
    }

    #[test]
    fn tail_values_on_three_points() {
        let (_, x) = three();
        assert!((utility(&RiskSpec::tail_var(1.0), &x).unwrap() - 2.0).abs() < 1e-15);
        assert!((risk(&RiskSpec::tail_var(1.0), &x).unwrap() + 2.0).abs() < 1e-15);
        assert!((utility(&RiskSpec::tail_var(0.5), &x).unwrap() - 4.0 / 3.0).abs() < 1e-15);
        assert!((risk(&RiskSpec::tail_var(0.5), &x).unwrap() + 4.0 / 3.0).abs() < 1e-15);
        let e = extreme_measure(&RiskSpec::tail_var(0.5), &x).unwrap();
        for (a, b) in e.density.values().iter().zip([2.0, 1.0, 0.0]) {
            assert!((a - b).abs() < 1e-14);
        }
        let one = extreme_measure(&RiskSpec::tail_var(1.0), &x).unwrap();
        assert!(one.density.values().iter().all(|&z| (z - 1.0).abs() < 1e-14));
    }

    #[test]
    fn weighted_and_polytope() {
        let (s, x) = three();
        let w = RiskSpec::weighted_var(&[(0.5, 0.5), (1.0, 0.5)]);
        assert!((utility(&w, &x).unwrap() - 5.0 / 3.0).abs() < 1e-15);
        let s2 = ScenarioSpace::uniform(2).unwrap();
        let poly = RiskSpec::Polytope { vertices: vec![vec![2.0, 0.0], vec![0.0, 2.0]] };
        let y = s2.pnl(vec![5.0, 1.0]).unwrap();
        let e = extreme_measure(&poly, &y).unwrap();
        assert_eq!(e.density.values(), &[0.0, 2.0]);
        assert!((e.utility - 1.0).abs() < 1e-15);
        assert!(utility(&poly, &x).is_err());
        let _ = s;
    }

    #[test]
    fn ties_share_the_boundary_atom() {
        let s = ScenarioSpace::uniform(4).unwrap();
        let x = s.pnl(vec![1.0, 2.0, 2.0, 5.0]).unwrap();
        let e = extreme_measure(&RiskSpec::tail_var(0.5), &x).unwrap();
        // Tail mass 1/2: outcome 0 takes 1/4, the tied pair shares the other 1/4.
        assert_eq!(e.density.values(), &[2.0, 1.0, 1.0, 0.0]);
        let lp = utility_lp(&RiskSpec::tail_var(0.5), &x).unwrap();
        assert!((lp.utility - e.utility).abs() < 1e-12);
    }

    #[test]
    fn lp_matches_structural_values() {
        let (s, x) = three();
        let specs = [
            RiskSpec::tail_var(0.5),
            RiskSpec::tail_var(0.0),
            RiskSpec::weighted_var(&[(0.5, 0.5), (1.0, 0.5)]),
            RiskSpec::ConvHull {
                specs: vec![
                    RiskSpec::tail_var(0.9),
                    RiskSpec::Polytope { vertices: vec![vec![0.0, 3.0, 0.0]] },
                ],
            },
        ];
        for spec in &specs {
            let a = utility(spec, &x).unwrap();
            let b = utility_lp(spec, &x).unwrap();
            assert!((a - b.utility).abs() < 1e-9, "{spec:?}: {a} vs {}", b.utility);
            assert!(is_member(spec, &b.density, 1e-9).unwrap());
            let e = extreme_measure(spec, &x).unwrap();
            assert!(is_member(spec, &e.density, 1e-9).unwrap());
        }
        let outside = Density::new(&s, vec![3.0, 0.0, 0.0]).unwrap();
        assert!(!is_member(&RiskSpec::tail_var(0.5), &outside, 1e-9).unwrap());
    }

    #[test]
    fn space_mismatch_is_rejected() {
        let (_, x) = three();
        let other = ScenarioSpace::uniform(3).unwrap();
        let q = Density::reference(&other);
        assert!(q.expect(&x).is_err());
    }
}
