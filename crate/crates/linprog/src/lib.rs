//! Dense linear programming with duals and certificates.
//!
//! [`solve`] runs a two-phase bounded-variable simplex. Optimal solutions come
//! with row duals and reduced costs under the Lagrangian convention
//!
//! ```text
//! L(x) = c·x - y_eq·(A_eq x - b_eq) + y_ub·(A_ub x - b_ub),   y_ub >= 0
//! ```
//!
//! so `d objective / d b_eq = y_eq` and `dual_ub` is reported nonnegative.
//! Infeasible problems return a [`FarkasCertificate`], unbounded ones a ray.

mod problem;
mod simplex;

pub use problem::{LinearProgram, Row};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LpError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("non-finite input: {0}")]
    NonFinite(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

/// Row multipliers proving `{x in bounds : A_eq x = b_eq, A_ub x <= b_ub}` is empty.
///
/// With `ub >= 0`, every `x` inside the variable bounds satisfies
/// `(eq·A_eq - ub·A_ub) x <= sup`, and `eq·b_eq - ub·b_ub - sup > 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct FarkasCertificate {
    pub eq: Vec<f64>,
    pub ub: Vec<f64>,
}

impl FarkasCertificate {
    /// `eq·b_eq - ub·b_ub - sup over the bound box of the combined row`.
    /// Positive for a valid certificate.
    ///
    /// Combined coefficients that cancel to rounding level (relative to the
    /// magnitudes that were summed) count as zero, so an unbounded variable
    /// does not turn cancellation noise into an infinite supremum.
    pub fn gap(&self, lp: &LinearProgram) -> f64 {
        let n = lp.num_vars();
        let mut combo = vec![0.0; n];
        let mut mass = vec![0.0; n];
        let mut rhs = 0.0;
        for ((row, b), y) in lp.eq_rows.iter().zip(&lp.eq_rhs).zip(&self.eq) {
            for &(j, v) in row {
                combo[j] += y * v;
                mass[j] += (y * v).abs();
            }
            rhs += y * b;
        }
        for ((row, b), mu) in lp.ub_rows.iter().zip(&lp.ub_rhs).zip(&self.ub) {
            for &(j, v) in row {
                combo[j] -= mu * v;
                mass[j] += (mu * v).abs();
            }
            rhs -= mu * b;
        }
        let mut sup = 0.0;
        for j in 0..n {
            let g = if combo[j].abs() <= 1e-12 * mass[j] { 0.0 } else { combo[j] };
            if g > 0.0 {
                sup += g * lp.upper[j];
            } else if g < 0.0 {
                sup += g * lp.lower[j];
            }
        }
        rhs - sup
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub status: LpStatus,
    /// Primal point (meaningful when `Optimal`).
    pub x: Vec<f64>,
    pub objective: f64,
    pub dual_eq: Vec<f64>,
    pub dual_ub: Vec<f64>,
    /// `c - A_eq^T y_eq + A_ub^T y_ub`, the multipliers of the variable bounds.
    pub reduced_costs: Vec<f64>,
    pub farkas: Option<FarkasCertificate>,
    /// Improving direction along which the objective decreases without bound.
    pub ray: Option<Vec<f64>>,
    pub iterations: usize,
}

impl LpSolution {
    fn infeasible(n: usize, cert: FarkasCertificate, iterations: usize) -> Self {
        Self {
            status: LpStatus::Infeasible,
            x: vec![f64::NAN; n],
            objective: f64::INFINITY,
            dual_eq: Vec::new(),
            dual_ub: Vec::new(),
            reduced_costs: Vec::new(),
            farkas: Some(cert),
            ray: None,
            iterations,
        }
    }

    fn unbounded(n: usize, ray: Vec<f64>, iterations: usize) -> Self {
        Self {
            status: LpStatus::Unbounded,
            x: vec![f64::NAN; n],
            objective: f64::NEG_INFINITY,
            dual_eq: Vec::new(),
            dual_ub: Vec::new(),
            reduced_costs: Vec::new(),
            farkas: None,
            ray: Some(ray),
            iterations,
        }
    }

    pub fn is_optimal(&self) -> bool {
        self.status == LpStatus::Optimal
    }

    /// Dual objective `b_eq·y_eq - b_ub·y_ub + sum of bound terms`.
    pub fn dual_objective(&self, lp: &LinearProgram) -> f64 {
        let mut v: f64 = lp.eq_rhs.iter().zip(&self.dual_eq).map(|(b, y)| b * y).sum();
        v -= lp.ub_rhs.iter().zip(&self.dual_ub).map(|(b, y)| b * y).sum::<f64>();
        for (j, &r) in self.reduced_costs.iter().enumerate() {
            if r > 0.0 {
                v += r * finite_or_zero(lp.lower[j]);
            } else if r < 0.0 {
                v += r * finite_or_zero(lp.upper[j]);
            }
        }
        v
    }

    /// Largest complementary-slackness product over rows and bounds.
    pub fn complementarity_gap(&self, lp: &LinearProgram) -> f64 {
        let mut worst: f64 = 0.0;
        for ((row, b), mu) in lp.ub_rows.iter().zip(&lp.ub_rhs).zip(&self.dual_ub) {
            let slack = b - LinearProgram::row_value(row, &self.x);
            worst = worst.max((slack * mu).abs());
        }
        for (j, &r) in self.reduced_costs.iter().enumerate() {
            let gap = if r > 0.0 {
                r * (self.x[j] - lp.lower[j])
            } else if r < 0.0 {
                -r * (lp.upper[j] - self.x[j])
            } else {
                0.0
            };
            if gap.is_finite() {
                worst = worst.max(gap.abs());
            } else {
                worst = f64::INFINITY;
            }
        }
        worst
    }

    /// Largest violation of dual sign conditions (`dual_ub >= 0`, bound multipliers
    /// consistent with which bounds are finite).
    pub fn dual_infeasibility(&self, lp: &LinearProgram) -> f64 {
        let mut worst: f64 = 0.0;
        for mu in &self.dual_ub {
            worst = worst.max(-mu);
        }
        for (j, &r) in self.reduced_costs.iter().enumerate() {
            if r > 0.0 && !lp.lower[j].is_finite() {
                worst = worst.max(r);
            }
            if r < 0.0 && !lp.upper[j].is_finite() {
                worst = worst.max(-r);
            }
        }
        worst
    }
}

fn finite_or_zero(v: f64) -> f64 {
    if v.is_finite() {
        v
    } else {
        0.0
    }
}

/// Solves `lp`. A numerical breakdown under the default pivoting retries once
/// with Bland's rule from the start before giving up.
pub fn solve(lp: &LinearProgram) -> Result<LpSolution, LpError> {
    lp.validate()?;
    match simplex::Simplex::new(lp, false).solve(lp) {
        Ok(sol) => Ok(sol),
        Err(LpError::Numerical(_)) => simplex::Simplex::new(lp, true).solve(lp),
        Err(e) => Err(e),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_equality() {
        let mut lp = LinearProgram::new(1);
        lp.objective[0] = 1.0;
        lp.set_free(0);
        lp.add_eq(vec![(0, 1.0)], 3.0);
        let sol = solve(&lp).unwrap();
        assert_eq!(sol.status, LpStatus::Optimal);
        assert!((sol.x[0] - 3.0).abs() < 1e-12);
        assert!((sol.objective - 3.0).abs() < 1e-12);
        assert!((sol.dual_eq[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn tail_half_of_three_points() {
        let mut lp = LinearProgram::new(3);
        lp.objective = vec![1.0, 2.0, 3.0];
        for j in 0..3 {
            lp.set_bounds(j, 0.0, 2.0 / 3.0);
        }
        lp.add_eq_dense(&[1.0, 1.0, 1.0], 1.0);
        let sol = solve(&lp).unwrap();
        assert!((sol.objective - 4.0 / 3.0).abs() < 1e-12);
        assert!((sol.x[0] - 2.0 / 3.0).abs() < 1e-12);
        assert!((sol.x[1] - 1.0 / 3.0).abs() < 1e-12);
        assert!(sol.x[2].abs() < 1e-12);
        assert!((sol.dual_objective(&lp) - sol.objective).abs() < 1e-12);
    }

    #[test]
    fn contradictory_equalities() {
        let mut lp = LinearProgram::new(1);
        lp.set_free(0);
        lp.add_eq(vec![(0, 1.0)], 1.0);
        lp.add_eq(vec![(0, 1.0)], 2.0);
        let sol = solve(&lp).unwrap();
        assert_eq!(sol.status, LpStatus::Infeasible);
        let cert = sol.farkas.unwrap();
        assert!(cert.gap(&lp) > 0.5);
    }

    #[test]
    fn unbounded_ray() {
        let mut lp = LinearProgram::new(2);
        lp.objective = vec![-1.0, 0.0];
        lp.add_le(vec![(0, 1.0), (1, -1.0)], 1.0);
        let sol = solve(&lp).unwrap();
        assert_eq!(sol.status, LpStatus::Unbounded);
        let ray = sol.ray.unwrap();
        assert!(ray[0] > 0.0 && ray[0] - ray[1] <= 1e-12);
    }

    #[test]
    fn redundant_rows_are_tolerated() {
        let mut lp = LinearProgram::new(2);
        lp.objective = vec![1.0, 2.0];
        lp.add_eq_dense(&[1.0, 1.0], 1.0);
        lp.add_eq_dense(&[2.0, 2.0], 2.0);
        let sol = solve(&lp).unwrap();
        assert!(sol.is_optimal());
        assert!((sol.objective - 1.0).abs() < 1e-12);
        assert!((sol.dual_objective(&lp) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn inequality_duals_are_nonnegative() {
        // min -x - y  s.t. x + 2y <= 4, 3x + y <= 6
        let mut lp = LinearProgram::new(2);
        lp.objective = vec![-1.0, -1.0];
        lp.add_le_dense(&[1.0, 2.0], 4.0);
        lp.add_le_dense(&[3.0, 1.0], 6.0);
        let sol = solve(&lp).unwrap();
        assert!((sol.objective + 2.8).abs() < 1e-12);
        assert!(sol.dual_ub.iter().all(|&m| m >= -1e-12));
        assert!((sol.dual_objective(&lp) - sol.objective).abs() < 1e-12);
        assert!(sol.complementarity_gap(&lp) < 1e-12);
    }

    #[test]
    fn rejects_bad_dimensions() {
        let mut lp = LinearProgram::new(1);
        lp.add_eq(vec![(3, 1.0)], 0.0);
        assert!(matches!(solve(&lp), Err(LpError::Dimension(_))));
        let mut lp = LinearProgram::new(1);
        lp.objective[0] = f64::NAN;
        assert!(matches!(solve(&lp), Err(LpError::NonFinite(_))));
    }

    #[test]
    fn no_rows_goes_to_bounds() {
        let mut lp = LinearProgram::new(2);
        lp.objective = vec![1.0, -1.0];
        lp.set_bounds(0, -2.0, 5.0);
        lp.set_bounds(1, -2.0, 5.0);
        let sol = solve(&lp).unwrap();
        assert_eq!(sol.x, vec![-2.0, 5.0]);
        assert!((sol.dual_objective(&lp) - sol.objective).abs() < 1e-12);
    }
}
