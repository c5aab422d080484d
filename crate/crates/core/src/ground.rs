//! Compiles a [`RiskSpec`] into linear constraints on density variables.

use cohdeals_linprog::{LinearProgram, Row};

use crate::error::Result;
use crate::space::ScenarioSpace;
use crate::spec::RiskSpec;

/// Linear description of a determining set.
///
/// The feasible set of `(rows, bounds)` maps onto the determining set through
/// `density`: outcome `i` has density `sum_{(j, a) in density[i]} a * v_j`.
#[derive(Debug, Clone)]
pub struct GroundedSet {
    pub num_vars: usize,
    pub eq_rows: Vec<Row>,
    pub eq_rhs: Vec<f64>,
    pub ub_rows: Vec<Row>,
    pub ub_rhs: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub density: Vec<Row>,
}

impl GroundedSet {
    fn empty(n: usize) -> Self {
        Self {
            num_vars: 0,
            eq_rows: Vec::new(),
            eq_rhs: Vec::new(),
            ub_rows: Vec::new(),
            ub_rhs: Vec::new(),
            lower: Vec::new(),
            upper: Vec::new(),
            density: vec![Vec::new(); n],
        }
    }

    fn add_var(&mut self, lo: f64, hi: f64) -> usize {
        self.lower.push(lo);
        self.upper.push(hi);
        self.num_vars += 1;
        self.num_vars - 1
    }

    /// Copies the block into `self` with variables shifted, returning the
    /// shifted density rows.
    fn absorb(&mut self, other: &GroundedSet) -> Vec<Row> {
        let off = self.num_vars;
        let shift = |r: &Row| -> Row { r.iter().map(|&(j, a)| (j + off, a)).collect() };
        self.eq_rows.extend(other.eq_rows.iter().map(shift));
        self.eq_rhs.extend_from_slice(&other.eq_rhs);
        self.ub_rows.extend(other.ub_rows.iter().map(shift));
        self.ub_rhs.extend_from_slice(&other.ub_rhs);
        self.lower.extend_from_slice(&other.lower);
        self.upper.extend_from_slice(&other.upper);
        self.num_vars += other.num_vars;
        other.density.iter().map(shift).collect()
    }

    /// Appends the set's variables and rows to `lp`; returns the density rows
    /// in `lp` column indices.
    pub fn embed(&self, lp: &mut LinearProgram) -> Vec<Row> {
        let off = lp.num_vars();
        for j in 0..self.num_vars {
            lp.add_var(0.0, self.lower[j], self.upper[j]);
        }
        let shift = |r: &Row| -> Row { r.iter().map(|&(j, a)| (j + off, a)).collect() };
        for (r, b) in self.eq_rows.iter().zip(&self.eq_rhs) {
            lp.add_eq(shift(r), *b);
        }
        for (r, b) in self.ub_rows.iter().zip(&self.ub_rhs) {
            lp.add_le(shift(r), *b);
        }
        self.density.iter().map(shift).collect()
    }

    /// Density values at a variable vector in the set's own indexing.
    pub fn density_at(&self, v: &[f64]) -> Vec<f64> {
        self.density.iter().map(|r| r.iter().map(|&(j, a)| a * v[j]).sum()).collect()
    }

    /// Perspective of the set: `{(y, t) : y in t * self, t >= 0}` with `t`
    /// as the last variable. Valid because every grounded set is bounded.
    fn homogenize(&self) -> GroundedSet {
        let mut h = GroundedSet::empty(self.density.len());
        let t = self.num_vars;
        for j in 0..self.num_vars {
            let (lo, hi) = (self.lower[j], self.upper[j]);
            let lo_h = if lo >= 0.0 { 0.0 } else { f64::NEG_INFINITY };
            let hi_h = if hi <= 0.0 { 0.0 } else { f64::INFINITY };
            h.add_var(lo_h, hi_h);
        }
        h.add_var(0.0, f64::INFINITY);
        for (r, b) in self.eq_rows.iter().zip(&self.eq_rhs) {
            let mut r = r.clone();
            r.push((t, -b));
            h.eq_rows.push(r);
            h.eq_rhs.push(0.0);
        }
        for (r, b) in self.ub_rows.iter().zip(&self.ub_rhs) {
            let mut r = r.clone();
            r.push((t, -b));
            h.ub_rows.push(r);
            h.ub_rhs.push(0.0);
        }
        for j in 0..self.num_vars {
            let (lo, hi) = (self.lower[j], self.upper[j]);
            if hi.is_finite() && hi != 0.0 {
                h.ub_rows.push(vec![(j, 1.0), (t, -hi)]);
                h.ub_rhs.push(0.0);
            }
            if lo.is_finite() && lo != 0.0 {
                h.ub_rows.push(vec![(j, -1.0), (t, lo)]);
                h.ub_rhs.push(0.0);
            }
        }
        h.density = self.density.clone();
        h
    }
}

/// Grounds `spec` on `space` after validating it.
pub fn ground(spec: &RiskSpec, space: &ScenarioSpace) -> Result<GroundedSet> {
    spec.validate(space)?;
    Ok(ground_unchecked(spec, space))
}

fn ground_unchecked(spec: &RiskSpec, space: &ScenarioSpace) -> GroundedSet {
    let n = space.len();
    let probs = space.probs();
    match spec {
        RiskSpec::TailVar { lambda } => {
            let mut g = GroundedSet::empty(n);
            let cap = if *lambda > 0.0 { 1.0 / lambda } else { f64::INFINITY };
            for i in 0..n {
                let j = g.add_var(0.0, cap);
                g.density[i] = vec![(j, 1.0)];
            }
            g.eq_rows.push(probs.iter().copied().enumerate().collect());
            g.eq_rhs.push(1.0);
            g
        }
        RiskSpec::WeightedVar { atoms } => {
            let terms: Vec<(f64, RiskSpec)> =
                atoms.iter().map(|a| (a.weight, RiskSpec::tail_var(a.lambda))).collect();
            mixture(space, terms.iter().map(|(w, s)| (*w, s)))
        }
        RiskSpec::Mixture { terms } => mixture(space, terms.iter().map(|t| (t.weight, &t.spec))),
        RiskSpec::Polytope { vertices } => {
            let mut g = GroundedSet::empty(n);
            let mut norm = Vec::new();
            for v in vertices {
                let j = g.add_var(0.0, f64::INFINITY);
                norm.push((j, 1.0));
                for i in 0..n {
                    if v[i] != 0.0 {
                        g.density[i].push((j, v[i]));
                    }
                }
            }
            g.eq_rows.push(norm);
            g.eq_rhs.push(1.0);
            g
        }
        RiskSpec::ConvHull { specs } => {
            let mut g = GroundedSet::empty(n);
            let mut thetas = Vec::new();
            for s in specs {
                let member = ground_unchecked(s, space).homogenize();
                let off = g.num_vars;
                let dens = g.absorb(&member);
                thetas.push((off + member.num_vars - 1, 1.0));
                for i in 0..n {
                    g.density[i].extend(dens[i].iter().copied());
                }
            }
            g.eq_rows.push(thetas);
            g.eq_rhs.push(1.0);
            g
        }
    }
}

fn mixture<'a>(
    space: &ScenarioSpace,
    terms: impl Iterator<Item = (f64, &'a RiskSpec)>,
) -> GroundedSet {
    let n = space.len();
    let mut g = GroundedSet::empty(n);
    for (w, s) in terms {
        let block = ground_unchecked(s, space);
        let dens = g.absorb(&block);
        for i in 0..n {
            g.density[i].extend(dens[i].iter().map(|&(j, a)| (j, w * a)));
        }
    }
    g
}
