//! Bounded-variable revised simplex on a dense basis inverse.
//!
//! Columns are laid out as `[structural | ub slacks | artificials]`, rows as
//! `[equalities | inequalities]`. Phase 1 minimizes the sum of artificials;
//! phase 2 keeps any surviving basic artificial fixed at zero, which absorbs
//! redundant equality rows without explicit rank detection.

use crate::{FarkasCertificate, LinearProgram, LpError, LpSolution, LpStatus};

const PIVOT_TOL: f64 = 1e-9;
const REFACTOR_EVERY: usize = 64;
const DEGENERATE_SWITCH: usize = 50;
const BLAND_PIVOT_RATIO: f64 = 1e-2;

enum Outcome {
    Optimal,
    Unbounded { entering: usize, dir: f64, alpha: Vec<f64> },
}

pub(crate) struct Simplex {
    m: usize,
    m_eq: usize,
    n: usize,
    ntot: usize,
    a: Vec<f64>,
    b: Vec<f64>,
    lo: Vec<f64>,
    hi: Vec<f64>,
    cost: Vec<f64>,
    x: Vec<f64>,
    basis: Vec<usize>,
    in_basis: Vec<bool>,
    binv: Vec<f64>,
    since_refactor: usize,
    degenerate_run: usize,
    bland: bool,
    iterations: usize,
    max_iterations: usize,
    opt_tol: f64,
    feas_tol: f64,
}

impl Simplex {
    pub(crate) fn new(lp: &LinearProgram, bland: bool) -> Self {
        let n = lp.num_vars();
        let m_eq = lp.eq_rows.len();
        let m_ub = lp.ub_rows.len();
        let m = m_eq + m_ub;
        let ntot = n + m_ub + m;
        let mut a = vec![0.0; m * ntot];
        let mut b = Vec::with_capacity(m);
        for (i, (row, rhs)) in lp
            .eq_rows
            .iter()
            .zip(&lp.eq_rhs)
            .chain(lp.ub_rows.iter().zip(&lp.ub_rhs))
            .enumerate()
        {
            for &(j, v) in row {
                a[j * m + i] += v;
            }
            b.push(*rhs);
        }
        for k in 0..m_ub {
            a[(n + k) * m + m_eq + k] = 1.0;
        }

        let mut lo = lp.lower.clone();
        let mut hi = lp.upper.clone();
        lo.extend(std::iter::repeat(0.0).take(m_ub + m));
        hi.extend(std::iter::repeat(f64::INFINITY).take(m_ub + m));

        let mut x = vec![0.0; ntot];
        for j in 0..n {
            x[j] = if lo[j].is_finite() {
                lo[j]
            } else if hi[j].is_finite() {
                hi[j]
            } else {
                0.0
            };
        }
        let mut resid = b.clone();
        for j in 0..n {
            if x[j] != 0.0 {
                for i in 0..m {
                    resid[i] -= a[j * m + i] * x[j];
                }
            }
        }

        let mut basis = Vec::with_capacity(m);
        let mut in_basis = vec![false; ntot];
        let mut binv = vec![0.0; m * m];
        for i in 0..m {
            let art = n + m_ub + i;
            if i >= m_eq && resid[i] >= 0.0 {
                let slack = n + i - m_eq;
                x[slack] = resid[i];
                basis.push(slack);
                in_basis[slack] = true;
                a[art * m + i] = 1.0;
                hi[art] = 0.0;
                binv[i * m + i] = 1.0;
            } else {
                let s = if resid[i] >= 0.0 { 1.0 } else { -1.0 };
                a[art * m + i] = s;
                x[art] = resid[i].abs();
                basis.push(art);
                in_basis[art] = true;
                binv[i * m + i] = s;
            }
        }

        let bmax = b.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
        let cmax = lp.objective.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
        Self {
            m,
            m_eq,
            n,
            ntot,
            a,
            b,
            lo,
            hi,
            cost: vec![0.0; ntot],
            x,
            basis,
            in_basis,
            binv,
            since_refactor: 0,
            degenerate_run: 0,
            bland,
            iterations: 0,
            max_iterations: 200 * (m + n) + 10_000,
            opt_tol: 1e-11 * cmax.max(1.0),
            feas_tol: 1e-9 * bmax.max(1.0),
        }
    }

    fn col(&self, j: usize) -> &[f64] {
        &self.a[j * self.m..(j + 1) * self.m]
    }

    fn duals(&self) -> Vec<f64> {
        let m = self.m;
        let mut y = vec![0.0; m];
        for (k, &bk) in self.basis.iter().enumerate() {
            let c = self.cost[bk];
            if c != 0.0 {
                let row = &self.binv[k * m..(k + 1) * m];
                for i in 0..m {
                    y[i] += c * row[i];
                }
            }
        }
        y
    }

    fn reduced_cost(&self, j: usize, y: &[f64]) -> f64 {
        let col = self.col(j);
        self.cost[j] - col.iter().zip(y).map(|(a, y)| a * y).sum::<f64>()
    }

    fn ftran(&self, j: usize) -> Vec<f64> {
        let m = self.m;
        let col = self.col(j);
        (0..m)
            .map(|k| {
                let row = &self.binv[k * m..(k + 1) * m];
                row.iter().zip(col).map(|(b, a)| b * a).sum()
            })
            .collect()
    }

    /// Entering candidate with its reduced cost, or `None` at optimality.
    fn price(&self, y: &[f64]) -> Option<(usize, f64)> {
        let mut best: Option<(usize, f64)> = None;
        let mut best_score = 0.0;
        for j in 0..self.ntot {
            if self.in_basis[j] || self.lo[j] == self.hi[j] {
                continue;
            }
            let d = self.reduced_cost(j, y);
            let can_up = self.x[j] < self.hi[j];
            let can_down = self.x[j] > self.lo[j];
            let eligible = (d < -self.opt_tol && can_up) || (d > self.opt_tol && can_down);
            if !eligible {
                continue;
            }
            if self.bland {
                return Some((j, d));
            }
            if d.abs() > best_score {
                best_score = d.abs();
                best = Some((j, d));
            }
        }
        best
    }

    /// Step length and leaving position (`None` means a bound flip of the entering variable).
    fn ratio_test(&self, alpha: &[f64], dir: f64, flip: f64) -> (f64, Option<(usize, bool)>) {
        let tol = self.feas_tol;
        let exact = |k: usize| -> Option<(f64, bool)> {
            let bk = self.basis[k];
            let delta = -dir * alpha[k];
            if delta < -PIVOT_TOL && self.lo[bk].is_finite() {
                Some((((self.x[bk] - self.lo[bk]) / -delta).max(0.0), false))
            } else if delta > PIVOT_TOL && self.hi[bk].is_finite() {
                Some((((self.hi[bk] - self.x[bk]) / delta).max(0.0), true))
            } else {
                None
            }
        };

        // Harris two-pass: relaxed bound first, then a pivot among the
        // candidates. A basic variable already past its bound by more than
        // the tolerance caps the relaxed step at zero rather than below it.
        let mut relaxed = f64::INFINITY;
        for k in 0..self.m {
            let bk = self.basis[k];
            let delta = -dir * alpha[k];
            if delta < -PIVOT_TOL && self.lo[bk].is_finite() {
                relaxed = relaxed.min(((self.x[bk] - self.lo[bk]).max(0.0) + tol) / -delta);
            } else if delta > PIVOT_TOL && self.hi[bk].is_finite() {
                relaxed = relaxed.min(((self.hi[bk] - self.x[bk]).max(0.0) + tol) / delta);
            }
        }
        if flip <= relaxed {
            return (flip, None);
        }
        let candidates: Vec<(f64, usize, bool)> = (0..self.m)
            .filter_map(|k| exact(k).filter(|&(r, _)| r <= relaxed).map(|(r, up)| (r, k, up)))
            .collect();
        let best_piv = candidates.iter().fold(0.0f64, |acc, &(_, k, _)| acc.max(alpha[k].abs()));
        // Under Bland's rule the smallest basic index leaves, restricted to
        // pivots within a modest factor of the largest so that degenerate
        // stretches do not drive the basis toward singularity.
        let best = if self.bland {
            candidates
                .into_iter()
                .filter(|&(_, k, _)| alpha[k].abs() >= BLAND_PIVOT_RATIO * best_piv)
                .min_by_key(|&(_, k, _)| self.basis[k])
        } else {
            candidates.into_iter().find(|&(_, k, _)| alpha[k].abs() == best_piv)
        };
        match best {
            Some((r, k, up)) => (r, Some((k, up))),
            None => (flip, None),
        }
    }

    fn pivot(&mut self, r: usize, alpha: &[f64]) {
        let m = self.m;
        let piv = alpha[r];
        for i in 0..m {
            self.binv[r * m + i] /= piv;
        }
        for k in 0..m {
            if k != r && alpha[k] != 0.0 {
                let f = alpha[k];
                for i in 0..m {
                    self.binv[k * m + i] -= f * self.binv[r * m + i];
                }
            }
        }
    }

    /// Rebuilds the basis inverse from scratch and recomputes basic values.
    fn refactor(&mut self) -> Result<(), LpError> {
        let m = self.m;
        let mut work = vec![0.0; m * m];
        for (k, &bk) in self.basis.iter().enumerate() {
            for i in 0..m {
                work[i * m + k] = self.a[bk * m + i];
            }
        }
        let mut inv = vec![0.0; m * m];
        for i in 0..m {
            inv[i * m + i] = 1.0;
        }
        for c in 0..m {
            let (p, pv) = (c..m)
                .map(|r| (r, work[r * m + c].abs()))
                .fold((c, -1.0), |acc, v| if v.1 > acc.1 { v } else { acc });
            if pv < 1e-13 {
                return Err(LpError::Numerical("singular basis during refactorization".into()));
            }
            if p != c {
                for i in 0..m {
                    work.swap(p * m + i, c * m + i);
                    inv.swap(p * m + i, c * m + i);
                }
            }
            let d = work[c * m + c];
            for i in 0..m {
                work[c * m + i] /= d;
                inv[c * m + i] /= d;
            }
            for r in 0..m {
                if r != c {
                    let f = work[r * m + c];
                    if f != 0.0 {
                        for i in 0..m {
                            work[r * m + i] -= f * work[c * m + i];
                            inv[r * m + i] -= f * inv[c * m + i];
                        }
                    }
                }
            }
        }
        self.binv = inv;
        self.since_refactor = 0;

        let mut rhs = self.b.clone();
        for j in 0..self.ntot {
            if !self.in_basis[j] && self.x[j] != 0.0 {
                let xj = self.x[j];
                for i in 0..m {
                    rhs[i] -= self.a[j * m + i] * xj;
                }
            }
        }
        for k in 0..m {
            let row = &self.binv[k * m..(k + 1) * m];
            let v: f64 = row.iter().zip(&rhs).map(|(b, r)| b * r).sum();
            self.x[self.basis[k]] = v;
        }
        Ok(())
    }

    fn run(&mut self) -> Result<Outcome, LpError> {
        loop {
            if self.iterations >= self.max_iterations {
                return Err(LpError::Numerical(format!(
                    "iteration limit {} reached",
                    self.max_iterations
                )));
            }
            let y = self.duals();
            let Some((j, d)) = self.price(&y) else {
                return Ok(Outcome::Optimal);
            };
            let dir = if d < 0.0 { 1.0 } else { -1.0 };
            let alpha = self.ftran(j);
            let flip = self.hi[j] - self.lo[j];
            let (t, leave) = self.ratio_test(&alpha, dir, flip);
            if t.is_infinite() {
                return Ok(Outcome::Unbounded { entering: j, dir, alpha });
            }
            self.iterations += 1;
            if t <= 1e-12 {
                self.degenerate_run += 1;
                if self.degenerate_run > DEGENERATE_SWITCH {
                    self.bland = true;
                }
            } else {
                self.degenerate_run = 0;
            }

            self.x[j] += dir * t;
            for k in 0..self.m {
                let bk = self.basis[k];
                self.x[bk] -= dir * t * alpha[k];
            }
            match leave {
                None => {
                    self.x[j] = if dir > 0.0 { self.hi[j] } else { self.lo[j] };
                }
                Some((r, at_upper)) => {
                    let out = self.basis[r];
                    self.x[out] = if at_upper { self.hi[out] } else { self.lo[out] };
                    self.pivot(r, &alpha);
                    self.in_basis[out] = false;
                    self.in_basis[j] = true;
                    self.basis[r] = j;
                    self.since_refactor += 1;
                    if self.since_refactor >= REFACTOR_EVERY {
                        self.refactor()?;
                    }
                }
            }
        }
    }

    /// Runs to optimality, re-checking after a clean refactorization.
    fn optimize(&mut self) -> Result<Outcome, LpError> {
        for _ in 0..8 {
            let outcome = self.run()?;
            self.refactor()?;
            match outcome {
                Outcome::Unbounded { .. } => return Ok(outcome),
                Outcome::Optimal => {
                    let y = self.duals();
                    if self.price(&y).is_none() {
                        return Ok(Outcome::Optimal);
                    }
                }
            }
        }
        Err(LpError::Numerical("optimality not confirmed after refactorization".into()))
    }

    pub(crate) fn solve(mut self, lp: &LinearProgram) -> Result<LpSolution, LpError> {
        let first_art = self.n + (self.m - self.m_eq);
        let needs_phase1 = (first_art..self.ntot).any(|j| self.in_basis[j] && self.x[j] > 0.0);
        if needs_phase1 {
            for j in first_art..self.ntot {
                self.cost[j] = if self.hi[j] > 0.0 { 1.0 } else { 0.0 };
            }
            self.opt_tol = 1e-12;
            match self.optimize()? {
                Outcome::Unbounded { .. } => {
                    return Err(LpError::Numerical("phase 1 reported unbounded".into()));
                }
                Outcome::Optimal => {}
            }
            let infeasibility: f64 = (first_art..self.ntot).map(|j| self.x[j].max(0.0)).sum();
            if infeasibility > self.feas_tol {
                let y = self.duals();
                return Ok(LpSolution::infeasible(
                    self.n,
                    FarkasCertificate {
                        eq: y[..self.m_eq].to_vec(),
                        ub: y[self.m_eq..].iter().map(|v| -v).collect(),
                    },
                    self.iterations,
                ));
            }
        }

        for j in first_art..self.ntot {
            self.hi[j] = 0.0;
            self.cost[j] = 0.0;
            if !self.in_basis[j] {
                self.x[j] = 0.0;
            }
        }
        self.cost[..self.n].copy_from_slice(&lp.objective);
        let cmax = lp.objective.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
        self.opt_tol = 1e-11 * cmax.max(1.0);

        match self.optimize()? {
            Outcome::Unbounded { entering, dir, alpha } => {
                let mut ray = vec![0.0; self.n];
                if entering < self.n {
                    ray[entering] = dir;
                }
                for (k, &bk) in self.basis.iter().enumerate() {
                    if bk < self.n {
                        ray[bk] = -dir * alpha[k];
                    }
                }
                Ok(LpSolution::unbounded(self.n, ray, self.iterations))
            }
            Outcome::Optimal => {
                let x: Vec<f64> = self.x[..self.n].to_vec();
                let scale = 1.0 + self.b.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
                let viol = lp.max_violation(&x);
                if viol > 1e-7 * scale {
                    return Err(LpError::Numerical(format!(
                        "final primal violation {viol:.3e}"
                    )));
                }
                let y = self.duals();
                // Basic columns and sub-tolerance noise report exactly zero so
                // infinite bounds never meet a stray 1e-16 multiplier.
                let reduced_costs = (0..self.n)
                    .map(|j| {
                        let d = self.reduced_cost(j, &y);
                        if self.in_basis[j] || d.abs() <= self.opt_tol {
                            0.0
                        } else {
                            d
                        }
                    })
                    .collect();
                Ok(LpSolution {
                    status: LpStatus::Optimal,
                    objective: lp.objective_value(&x),
                    x,
                    dual_eq: y[..self.m_eq].to_vec(),
                    dual_ub: y[self.m_eq..].iter().map(|v| -v).collect(),
                    reduced_costs,
                    farkas: None,
                    ray: None,
                    iterations: self.iterations,
                })
            }
        }
    }
}
