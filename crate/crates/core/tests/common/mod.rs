//! Random instances and independent oracles shared by the integration tests.
#![allow(dead_code)]

use cohdeals::spec::{MixtureTerm, VarAtom};
use cohdeals::{Pnl, RiskSpec, ScenarioSpace};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{Continuous, ContinuousCDF, Normal};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    TailVar,
    WeightedVar,
    Polytope,
    Mixture,
    ConvHull,
}

pub const FAMILIES: [Family; 5] =
    [Family::TailVar, Family::WeightedVar, Family::Polytope, Family::Mixture, Family::ConvHull];

/// Positive probabilities summing to one within the space tolerance.
pub fn random_space(rng: &mut ChaCha8Rng, n: usize) -> ScenarioSpace {
    let w: Vec<f64> = (0..n).map(|_| rng.gen_range(0.2..1.0)).collect();
    let total: f64 = w.iter().sum();
    let mut p: Vec<f64> = w.iter().map(|x| x / total).collect();
    let rest: f64 = p[..n - 1].iter().sum();
    p[n - 1] = 1.0 - rest;
    ScenarioSpace::from_probs(p).unwrap()
}

pub fn random_pnl(rng: &mut ChaCha8Rng, space: &ScenarioSpace, scale: f64) -> Pnl {
    space.pnl((0..space.len()).map(|_| rng.gen_range(-scale..scale)).collect()).unwrap()
}

/// Weights summing to one with the residue on the last entry.
pub fn simplex_weights(rng: &mut ChaCha8Rng, k: usize) -> Vec<f64> {
    let w: Vec<f64> = (0..k).map(|_| rng.gen_range(0.05..1.0)).collect();
    let total: f64 = w.iter().sum();
    let mut w: Vec<f64> = w.iter().map(|x| x / total).collect();
    let rest: f64 = w[..k - 1].iter().sum();
    w[k - 1] = 1.0 - rest;
    w
}

pub fn random_density(rng: &mut ChaCha8Rng, space: &ScenarioSpace) -> Vec<f64> {
    let w: Vec<f64> = (0..space.len()).map(|_| rng.gen_range(0.0..1.0)).collect();
    let mass = space.mean(&w);
    w.iter().map(|x| x / mass).collect()
}

pub fn random_tail(rng: &mut ChaCha8Rng) -> RiskSpec {
    RiskSpec::TailVar { lambda: rng.gen_range(0.02..=1.0) }
}

pub fn random_weighted(rng: &mut ChaCha8Rng) -> RiskSpec {
    let k = rng.gen_range(1..=4);
    let w = simplex_weights(rng, k);
    RiskSpec::WeightedVar {
        atoms: w.into_iter().map(|weight| VarAtom { lambda: rng.gen_range(0.02..=1.0), weight }).collect(),
    }
}

pub fn random_polytope(rng: &mut ChaCha8Rng, space: &ScenarioSpace) -> RiskSpec {
    let k = rng.gen_range(1..=5);
    RiskSpec::Polytope { vertices: (0..k).map(|_| random_density(rng, space)).collect() }
}

pub fn random_spec(rng: &mut ChaCha8Rng, family: Family, space: &ScenarioSpace) -> RiskSpec {
    match family {
        Family::TailVar => random_tail(rng),
        Family::WeightedVar => random_weighted(rng),
        Family::Polytope => random_polytope(rng, space),
        Family::Mixture | Family::ConvHull => {
            let k = rng.gen_range(2..=3);
            let members: Vec<RiskSpec> = (0..k)
                .map(|_| match rng.gen_range(0..3) {
                    0 => random_tail(rng),
                    1 => random_weighted(rng),
                    _ => random_polytope(rng, space),
                })
                .collect();
            if family == Family::ConvHull {
                RiskSpec::ConvHull { specs: members }
            } else {
                let w = simplex_weights(rng, k);
                RiskSpec::Mixture {
                    terms: w.into_iter().zip(members).map(|(weight, spec)| MixtureTerm { weight, spec }).collect(),
                }
            }
        }
    }
}

/// Mean of the worst `lambda`-fraction of outcomes, computed directly from
/// the sorted values; `lambda = 0` gives the minimum.
pub fn tail_mean(probs: &[f64], x: &[f64], lambda: f64) -> f64 {
    let mut idx: Vec<usize> = (0..x.len()).collect();
    idx.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    if lambda == 0.0 {
        return x[idx[0]];
    }
    let mut left = lambda;
    let mut acc = 0.0;
    for i in idx {
        let take = probs[i].min(left);
        acc += take * x[i];
        left -= take;
        if left <= 0.0 {
            break;
        }
    }
    acc / lambda
}

/// Conditional means of a standard normal on `n` equiprobable cells:
/// `n (phi(a_k) - phi(b_k))` with `a_k, b_k` the cell's quantile bounds.
pub fn normal_cells(n: usize) -> Vec<f64> {
    let z = Normal::new(0.0, 1.0).unwrap();
    let bound = |k: usize| {
        if k == 0 {
            f64::NEG_INFINITY
        } else if k == n {
            f64::INFINITY
        } else {
            z.inverse_cdf(k as f64 / n as f64)
        }
    };
    let pdf = |x: f64| if x.is_finite() { z.pdf(x) } else { 0.0 };
    (0..n).map(|k| n as f64 * (pdf(bound(k)) - pdf(bound(k + 1)))).collect()
}

/// Conditional means of `exp(mu + sigma Z)` on `n` equiprobable cells.
pub fn lognormal_cells(n: usize, mu: f64, sigma: f64) -> Vec<f64> {
    let z = Normal::new(0.0, 1.0).unwrap();
    let bound = |k: usize| {
        if k == 0 {
            f64::NEG_INFINITY
        } else if k == n {
            f64::INFINITY
        } else {
            z.inverse_cdf(k as f64 / n as f64)
        }
    };
    let cdf = |x: f64| z.cdf(x);
    let scale = (mu + 0.5 * sigma * sigma).exp();
    (0..n)
        .map(|k| n as f64 * scale * (cdf(bound(k + 1) - sigma) - cdf(bound(k) - sigma)))
        .collect()
}

/// `n x n` product grid of independent standard normal cell means.
pub fn normal_grid(n: usize) -> (ScenarioSpace, Vec<f64>, Vec<f64>) {
    let cells = normal_cells(n);
    let mut z = Vec::with_capacity(n * n);
    let mut w = Vec::with_capacity(n * n);
    for &a in &cells {
        for &b in &cells {
            z.push(a);
            w.push(b);
        }
    }
    (ScenarioSpace::uniform(n * n).unwrap(), z, w)
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}
