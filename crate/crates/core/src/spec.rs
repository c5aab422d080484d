//! Symbolic descriptions of determining sets.
//!
//! JSON encoding is a tagged union:
//!
//! ```text
//! {"tail_var": {"lambda": 0.5}}            // or {"tail_var": 0.5}
//! {"weighted_var": {"atoms": [{"lambda": 0.5, "weight": 1.0}]}}
//! {"polytope": {"vertices": [[2, 0], [0, 2]]}}
//! {"mixture": {"terms": [{"weight": 0.5, "spec": {...}}, ...]}}
//! {"conv_hull": {"specs": [{...}, ...]}}
//! ```

use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::space::ScenarioSpace;
use crate::tol;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VarAtom {
    pub lambda: f64,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixtureTerm {
    pub weight: f64,
    pub spec: RiskSpec,
}

/// Determining set `D` of a coherent utility `u(X) = inf_{Q in D} E_Q X`.
///
/// Polytope vertices are raw density vectors; they are checked against a
/// concrete space when the spec is validated or grounded.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", from = "SpecRepr")]
pub enum RiskSpec {
    /// `{Z : 0 <= Z <= 1/lambda}`; lambda = 0 means all densities.
    TailVar { lambda: f64 },
    WeightedVar { atoms: Vec<VarAtom> },
    Polytope { vertices: Vec<Vec<f64>> },
    Mixture { terms: Vec<MixtureTerm> },
    ConvHull { specs: Vec<RiskSpec> },
}

#[derive(Deserialize)]
#[serde(untagged)]
enum TailRepr {
    Bare(f64),
    Full { lambda: f64 },
}

#[derive(Deserialize)]
#[serde(rename_all = "snake_case")]
enum SpecRepr {
    TailVar(TailRepr),
    WeightedVar { atoms: Vec<VarAtom> },
    Polytope { vertices: Vec<Vec<f64>> },
    Mixture { terms: Vec<MixtureTerm> },
    ConvHull { specs: Vec<RiskSpec> },
}

impl From<SpecRepr> for RiskSpec {
    fn from(r: SpecRepr) -> Self {
        match r {
            SpecRepr::TailVar(TailRepr::Bare(lambda) | TailRepr::Full { lambda }) => {
                RiskSpec::TailVar { lambda }
            }
            SpecRepr::WeightedVar { atoms } => RiskSpec::WeightedVar { atoms },
            SpecRepr::Polytope { vertices } => RiskSpec::Polytope { vertices },
            SpecRepr::Mixture { terms } => RiskSpec::Mixture { terms },
            SpecRepr::ConvHull { specs } => RiskSpec::ConvHull { specs },
        }
    }
}

impl RiskSpec {
    pub fn tail_var(lambda: f64) -> Self {
        RiskSpec::TailVar { lambda }
    }

    pub fn weighted_var(atoms: &[(f64, f64)]) -> Self {
        RiskSpec::WeightedVar {
            atoms: atoms.iter().map(|&(lambda, weight)| VarAtom { lambda, weight }).collect(),
        }
    }

    pub fn mixture(terms: Vec<(f64, RiskSpec)>) -> Self {
        RiskSpec::Mixture {
            terms: terms.into_iter().map(|(weight, spec)| MixtureTerm { weight, spec }).collect(),
        }
    }

    /// The singleton `{P}`.
    pub fn reference() -> Self {
        RiskSpec::TailVar { lambda: 1.0 }
    }

    /// Checks parameter ranges and, for polytopes, the vertices against `space`.
    pub fn validate(&self, space: &ScenarioSpace) -> Result<()> {
        match self {
            RiskSpec::TailVar { lambda } => {
                if !(0.0..=1.0).contains(lambda) {
                    return Err(CoreError::Structural(format!(
                        "tail lambda {lambda} outside [0, 1]"
                    )));
                }
            }
            RiskSpec::WeightedVar { atoms } => {
                if atoms.is_empty() {
                    return Err(CoreError::Structural("weighted tail spec without atoms".into()));
                }
                for a in atoms {
                    if !(a.lambda > 0.0 && a.lambda <= 1.0) {
                        return Err(CoreError::Structural(format!(
                            "atom lambda {} outside (0, 1]",
                            a.lambda
                        )));
                    }
                }
                check_weights(atoms.iter().map(|a| a.weight))?;
            }
            RiskSpec::Polytope { vertices } => {
                if vertices.is_empty() {
                    return Err(CoreError::Structural("polytope without vertices".into()));
                }
                for (k, v) in vertices.iter().enumerate() {
                    crate::space::Density::new(space, v.clone()).map_err(|e| {
                        CoreError::Structural(format!("polytope vertex {k}: {e}"))
                    })?;
                }
            }
            RiskSpec::Mixture { terms } => {
                if terms.is_empty() {
                    return Err(CoreError::Structural("mixture without terms".into()));
                }
                check_weights(terms.iter().map(|t| t.weight))?;
                for t in terms {
                    t.spec.validate(space)?;
                }
            }
            RiskSpec::ConvHull { specs } => {
                if specs.is_empty() {
                    return Err(CoreError::Structural("convex hull of no sets".into()));
                }
                for s in specs {
                    s.validate(space)?;
                }
            }
        }
        Ok(())
    }
}

fn check_weights(weights: impl Iterator<Item = f64>) -> Result<()> {
    let mut total = 0.0;
    for w in weights {
        if !(w.is_finite() && w > 0.0) {
            return Err(CoreError::Structural(format!("weight {w} must be positive")));
        }
        total += w;
    }
    if (total - 1.0).abs() > tol::FEASIBILITY {
        return Err(CoreError::Structural(format!("weights sum to {total}, not 1")));
    }
    Ok(())
}
