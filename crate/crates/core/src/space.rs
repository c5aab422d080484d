//! Finite outcome sets, random variables and densities.

use std::collections::HashSet;
use std::sync::Arc;

use serde::{Serialize, Serializer};

use crate::error::{CoreError, Result};
use crate::tol;

#[derive(Debug)]
struct SpaceData {
    labels: Vec<String>,
    probs: Vec<f64>,
}

/// Finite outcome set with a strictly positive reference measure `P`.
///
/// Cloning shares the underlying data; two spaces are the same space only if
/// they come from one constructor call.
#[derive(Debug, Clone)]
pub struct ScenarioSpace(Arc<SpaceData>);

impl ScenarioSpace {
    pub fn new(labels: Vec<String>, probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(CoreError::Structural("scenario space needs at least one outcome".into()));
        }
        if labels.len() != probs.len() {
            return Err(CoreError::Structural(format!(
                "{} labels for {} probabilities",
                labels.len(),
                probs.len()
            )));
        }
        if let Some(i) = probs.iter().position(|p| !(p.is_finite() && *p > 0.0)) {
            return Err(CoreError::Structural(format!(
                "probability of outcome {i} is {}, must be positive",
                probs[i]
            )));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(CoreError::Structural(format!("probabilities sum to {total}")));
        }
        let mut seen = HashSet::new();
        for l in &labels {
            if !seen.insert(l.as_str()) {
                return Err(CoreError::Structural(format!("duplicate outcome label {l:?}")));
            }
        }
        Ok(Self(Arc::new(SpaceData { labels, probs })))
    }

    /// Outcomes labelled `w0, w1, ...`.
    pub fn from_probs(probs: Vec<f64>) -> Result<Self> {
        let labels = (0..probs.len()).map(|i| format!("w{i}")).collect();
        Self::new(labels, probs)
    }

    pub fn uniform(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(CoreError::Structural("scenario space needs at least one outcome".into()));
        }
        let p = 1.0 / n as f64;
        let mut probs = vec![p; n];
        // Put the rounding residue on the last outcome so the sum check passes
        // for any n.
        let rest: f64 = probs[..n - 1].iter().sum();
        probs[n - 1] = 1.0 - rest;
        Self::from_probs(probs)
    }

    pub fn len(&self) -> usize {
        self.0.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.probs.is_empty()
    }

    pub fn probs(&self) -> &[f64] {
        &self.0.probs
    }

    pub fn labels(&self) -> &[String] {
        &self.0.labels
    }

    pub fn same(&self, other: &ScenarioSpace) -> bool {
        Arc::ptr_eq(&self.0, &other.0)
    }

    pub(crate) fn check_same(&self, other: &ScenarioSpace, what: &str) -> Result<()> {
        if self.same(other) {
            Ok(())
        } else {
            Err(CoreError::Structural(format!("{what} lives on a different scenario space")))
        }
    }

    pub fn pnl(&self, values: Vec<f64>) -> Result<Pnl> {
        Pnl::new(self, values)
    }

    pub fn constant(&self, m: f64) -> Pnl {
        Pnl { space: self.clone(), values: vec![m; self.len()] }
    }

    /// `E_P X`.
    pub fn mean(&self, values: &[f64]) -> f64 {
        self.probs().iter().zip(values).map(|(p, x)| p * x).sum()
    }
}

/// Discounted P&L or payoff, one value per outcome.
#[derive(Debug, Clone)]
pub struct Pnl {
    space: ScenarioSpace,
    values: Vec<f64>,
}

impl Pnl {
    pub fn new(space: &ScenarioSpace, values: Vec<f64>) -> Result<Self> {
        if values.len() != space.len() {
            return Err(CoreError::Structural(format!(
                "{} values on a space of {} outcomes",
                values.len(),
                space.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(CoreError::Structural(format!("value at outcome {i} is not finite")));
        }
        Ok(Self { space: space.clone(), values })
    }

    pub fn space(&self) -> &ScenarioSpace {
        &self.space
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn mean(&self) -> f64 {
        self.space.mean(&self.values)
    }

    pub fn scale(&self, c: f64) -> Pnl {
        self.map(|v| c * v)
    }

    pub fn shift(&self, m: f64) -> Pnl {
        self.map(|v| v + m)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Pnl {
        Pnl { space: self.space.clone(), values: self.values.iter().map(|&v| f(v)).collect() }
    }

    pub fn add(&self, other: &Pnl) -> Result<Pnl> {
        self.space.check_same(&other.space, "summand")?;
        let values = self.values.iter().zip(&other.values).map(|(a, b)| a + b).collect();
        Ok(Pnl { space: self.space.clone(), values })
    }

    /// `sum_i h_i X_i` over components sharing one space.
    pub fn combination(xs: &[Pnl], h: &[f64]) -> Result<Pnl> {
        let first = xs
            .first()
            .ok_or_else(|| CoreError::Structural("empty list of random variables".into()))?;
        if xs.len() != h.len() {
            return Err(CoreError::Structural(format!(
                "{} weights for {} components",
                h.len(),
                xs.len()
            )));
        }
        let mut values = vec![0.0; first.space.len()];
        for (x, &w) in xs.iter().zip(h) {
            first.space.check_same(&x.space, "component")?;
            for (acc, v) in values.iter_mut().zip(&x.values) {
                *acc += w * v;
            }
        }
        Ok(Pnl { space: first.space.clone(), values })
    }
}

/// Density `dQ/dP` of a probability measure on a scenario space.
#[derive(Debug, Clone)]
pub struct Density {
    space: ScenarioSpace,
    z: Vec<f64>,
}

impl Density {
    /// Checks nonnegativity and `sum p_i z_i = 1` within the feasibility tolerance.
    pub fn new(space: &ScenarioSpace, z: Vec<f64>) -> Result<Self> {
        if z.len() != space.len() {
            return Err(CoreError::Structural(format!(
                "density has {} entries on a space of {} outcomes",
                z.len(),
                space.len()
            )));
        }
        if let Some(i) = z.iter().position(|v| !v.is_finite() || *v < -tol::FEASIBILITY) {
            return Err(CoreError::Structural(format!("density entry {i} is {}", z[i])));
        }
        let mass = space.mean(&z);
        if (mass - 1.0).abs() > tol::FEASIBILITY {
            return Err(CoreError::Structural(format!("density integrates to {mass}")));
        }
        Ok(Self { space: space.clone(), z })
    }

    /// Builds a density from LP output, clipping round-off below zero.
    pub(crate) fn from_solver(space: &ScenarioSpace, z: Vec<f64>) -> Result<Self> {
        let z = z.into_iter().map(|v| if v < 0.0 && v > -tol::FEASIBILITY { 0.0 } else { v }).collect();
        Self::new(space, z)
    }

    pub fn reference(space: &ScenarioSpace) -> Self {
        Self { space: space.clone(), z: vec![1.0; space.len()] }
    }

    pub fn space(&self) -> &ScenarioSpace {
        &self.space
    }

    pub fn values(&self) -> &[f64] {
        &self.z
    }

    /// Outcome probabilities under `Q`.
    pub fn probabilities(&self) -> Vec<f64> {
        self.space.probs().iter().zip(&self.z).map(|(p, z)| p * z).collect()
    }

    /// `E_Q X`.
    pub fn expect(&self, x: &Pnl) -> Result<f64> {
        self.space.check_same(x.space(), "random variable")?;
        Ok(self.expect_values(x.values()))
    }

    pub(crate) fn expect_values(&self, x: &[f64]) -> f64 {
        self.space
            .probs()
            .iter()
            .zip(&self.z)
            .zip(x)
            .map(|((p, z), v)| p * z * v)
            .sum()
    }
}

/// Serializes as the plain vector of density values.
impl Serialize for Density {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.z.serialize(s)
    }
}
