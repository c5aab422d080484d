//! Generators, capital allocation and risk contribution.
//!
//! For components `X = (X^1, ..., X^d)` the generator is
//! `G = {E_Q X : Q in D}`; its support function is `h -> u(<h, X>)`.

use std::sync::OnceLock;

use cohdeals_linprog::{solve, LinearProgram, LpStatus, Row};

use crate::error::{CoreError, Result};
use crate::ground::ground;
use crate::risk::{eval_rows, extreme_values, utility_values};
use crate::space::{Density, Pnl, ScenarioSpace};
use crate::spec::RiskSpec;
use crate::tol;

/// The set `{E_Q X : Q in D}` for a spec and a list of components.
#[derive(Debug)]
pub struct Generator {
    spec: RiskSpec,
    xs: Vec<Pnl>,
    polygon: OnceLock<Vec<[f64; 2]>>,
}

impl Generator {
    pub fn new(spec: RiskSpec, xs: Vec<Pnl>) -> Result<Self> {
        let first = xs
            .first()
            .ok_or_else(|| CoreError::Structural("generator needs at least one component".into()))?;
        for x in &xs[1..] {
            first.space().check_same(x.space(), "component")?;
        }
        spec.validate(first.space())?;
        Ok(Self { spec, xs, polygon: OnceLock::new() })
    }

    pub fn dim(&self) -> usize {
        self.xs.len()
    }

    pub fn spec(&self) -> &RiskSpec {
        &self.spec
    }

    pub fn components(&self) -> &[Pnl] {
        &self.xs
    }

    fn space(&self) -> &ScenarioSpace {
        self.xs[0].space()
    }

    fn combine(&self, h: &[f64]) -> Result<Vec<f64>> {
        if h.len() != self.dim() {
            return Err(CoreError::Structural(format!(
                "direction has {} entries for {} components",
                h.len(),
                self.dim()
            )));
        }
        if h.iter().any(|v| !v.is_finite()) {
            return Err(CoreError::Structural("direction is not finite".into()));
        }
        Ok(Pnl::combination(&self.xs, h)?.values().to_vec())
    }

    /// `u(<h, X>) = min over G of <h, x>`.
    pub fn support_value(&self, h: &[f64]) -> Result<f64> {
        let v = self.combine(h)?;
        Ok(utility_values(&self.spec, self.space(), &v))
    }

    /// A point of `G` attaining the support value in direction `h`.
    pub fn support_point(&self, h: &[f64]) -> Result<Vec<f64>> {
        let v = self.combine(h)?;
        let z = extreme_values(&self.spec, self.space(), &v);
        let q = Density::from_solver(self.space(), z)?;
        Ok(self.xs.iter().map(|x| q.expect_values(x.values())).collect())
    }

    /// Vertices of `G` counterclockwise (two components only). A segment is
    /// returned as its two endpoints and a point as a single vertex.
    pub fn polygon(&self) -> Result<&[[f64; 2]]> {
        if self.dim() != 2 {
            return Err(CoreError::Domain(format!(
                "polygon needs exactly 2 components, got {}",
                self.dim()
            )));
        }
        if self.polygon.get().is_none() {
            let poly = self.build_polygon()?;
            let _ = self.polygon.set(poly);
        }
        Ok(self.polygon.get().expect("set above"))
    }

    fn build_polygon(&self) -> Result<Vec<[f64; 2]>> {
        let scale = 1.0
            + self
                .xs
                .iter()
                .map(|x| tol::max_abs(x.values()))
                .fold(0.0, f64::max);
        let eps = 1e-11 * scale;
        let mut seeds = Vec::new();
        for h in [[1.0, 0.0], [0.0, 1.0], [-1.0, 0.0], [0.0, -1.0]] {
            let p = self.support_point(&h)?;
            seeds.push([p[0], p[1]]);
        }
        let mut poly = convex_hull(seeds, eps);
        if poly.len() == 1 {
            return Ok(poly);
        }
        let mut i = 0;
        let mut inserted = 0;
        while i < poly.len() {
            let a = poly[i];
            let b = poly[(i + 1) % poly.len()];
            let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
            let len = dx.hypot(dy);
            // Left normal of a counterclockwise edge points into the polygon;
            // the support point in that direction lies beyond the edge unless
            // the edge is already a face of G.
            let h = [-dy / len, dx / len];
            let p = self.support_point(&h)?;
            let p = [p[0], p[1]];
            let edge_level = h[0] * a[0] + h[1] * a[1];
            let level = h[0] * p[0] + h[1] * p[1];
            if level < edge_level - eps {
                poly.insert(i + 1, p);
                inserted += 1;
                if inserted > 100_000 {
                    return Err(CoreError::Numerical("polygon refinement did not settle".into()));
                }
            } else {
                i += 1;
            }
        }
        Ok(drop_collinear(poly, eps))
    }
}

fn cross(o: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
}

/// Monotone chain hull, counterclockwise, starting at the lowest-leftmost point.
fn convex_hull(mut pts: Vec<[f64; 2]>, eps: f64) -> Vec<[f64; 2]> {
    pts.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
    pts.dedup_by(|a, b| (a[0] - b[0]).abs() <= eps && (a[1] - b[1]).abs() <= eps);
    if pts.len() <= 2 {
        return pts;
    }
    let mut lower: Vec<[f64; 2]> = Vec::new();
    for &p in &pts {
        while lower.len() >= 2 && cross(lower[lower.len() - 2], lower[lower.len() - 1], p) <= 0.0 {
            lower.pop();
        }
        lower.push(p);
    }
    let mut upper: Vec<[f64; 2]> = Vec::new();
    for &p in pts.iter().rev() {
        while upper.len() >= 2 && cross(upper[upper.len() - 2], upper[upper.len() - 1], p) <= 0.0 {
            upper.pop();
        }
        upper.push(p);
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    lower
}

fn drop_collinear(poly: Vec<[f64; 2]>, eps: f64) -> Vec<[f64; 2]> {
    // Re-running the hull removes duplicates and points interior to edges.
    let hull = convex_hull(poly, eps);
    if hull.len() < 3 {
        return hull;
    }
    let mut out: Vec<[f64; 2]> = Vec::new();
    let n = hull.len();
    for i in 0..n {
        let prev = hull[(i + n - 1) % n];
        let next = hull[(i + 1) % n];
        let span = (next[0] - prev[0]).hypot(next[1] - prev[1]).max(1.0);
        if cross(prev, hull[i], next).abs() > eps * span {
            out.push(hull[i]);
        }
    }
    if out.len() < 3 {
        // Everything lies on one line: keep the two extreme points.
        let lo = hull[0];
        let hi = hull.iter().copied().max_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
        return std::iter::once(lo).chain(hi.filter(|h| *h != lo)).collect();
    }
    out
}

pub fn support_value(gen: &Generator, h: &[f64]) -> Result<f64> {
    gen.support_value(h)
}

pub fn generator_polygon(gen: &Generator) -> Result<Vec<[f64; 2]>> {
    gen.polygon().map(|p| p.to_vec())
}

/// Capital allocation of `u(sum X^i)` among the components.
#[derive(Debug, Clone)]
pub struct AllocationResult {
    pub allocation: Vec<f64>,
    /// Extreme measure of the total used for `allocation`.
    pub witness: Density,
    pub unique: bool,
    /// Per-coordinate range of the allocation set.
    pub ranges: Vec<(f64, f64)>,
    /// Endpoints of the allocation set when it is a segment (two components).
    pub segment: Option<[Vec<f64>; 2]>,
}

/// Density LP over the grounded set of `spec`, with the density rows.
struct DensityLp {
    lp: LinearProgram,
    density: Vec<Row>,
}

impl DensityLp {
    fn new(spec: &RiskSpec, space: &ScenarioSpace) -> Result<Self> {
        let g = ground(spec, space)?;
        let mut lp = LinearProgram::new(0);
        let density = g.embed(&mut lp);
        Ok(Self { lp, density })
    }

    /// Row `sum_i p_i x_i z_i` in LP columns.
    fn expectation_row(&self, probs: &[f64], x: &[f64]) -> Row {
        let mut row = Vec::new();
        for (i, r) in self.density.iter().enumerate() {
            let w = probs[i] * x[i];
            if w != 0.0 {
                row.extend(r.iter().map(|&(j, a)| (j, w * a)));
            }
        }
        row
    }

    fn minimize(&self, objective: &Row) -> Result<Vec<f64>> {
        let mut lp = self.lp.clone();
        lp.objective.iter_mut().for_each(|c| *c = 0.0);
        for &(j, a) in objective {
            lp.objective[j] += a;
        }
        let sol = solve(&lp)?;
        if sol.status != LpStatus::Optimal {
            return Err(CoreError::Numerical(format!("face LP ended {:?}", sol.status)));
        }
        Ok(eval_rows(&self.density, &sol.x))
    }
}

/// Allocation `E_Q X^i` for an extreme measure `Q` of the total, together with
/// the exact range of the allocation set obtained from face LPs.
pub fn allocate(spec: &RiskSpec, xs: &[Pnl]) -> Result<AllocationResult> {
    let gen = Generator::new(spec.clone(), xs.to_vec())?;
    let space = gen.space().clone();
    let d = xs.len();
    let total = Pnl::combination(xs, &vec![1.0; d])?;
    let z = extreme_values(spec, &space, total.values());
    let witness = Density::from_solver(&space, z)?;
    let allocation: Vec<f64> = xs.iter().map(|x| witness.expect_values(x.values())).collect();
    let u = utility_values(spec, &space, total.values());

    // The allocation set is the face of G minimizing the coordinate sum:
    // densities in D with E_Q (sum X) = u.
    let mut face = DensityLp::new(spec, &space)?;
    let row = face.expectation_row(space.probs(), total.values());
    let slack = tol::scaled(tol::FEASIBILITY, u.abs().max(tol::max_abs(total.values())));
    face.lp.add_le(row, u + slack);
    let mut ranges = Vec::with_capacity(d);
    let mut ends: Vec<[Vec<f64>; 2]> = Vec::with_capacity(d);
    for x in xs {
        let obj = face.expectation_row(space.probs(), x.values());
        let neg: Row = obj.iter().map(|&(j, a)| (j, -a)).collect();
        let zlo = face.minimize(&obj)?;
        let zhi = face.minimize(&neg)?;
        let point = |zv: &[f64]| -> Vec<f64> {
            xs.iter()
                .map(|y| {
                    space
                        .probs()
                        .iter()
                        .zip(zv)
                        .zip(y.values())
                        .map(|((p, z), v)| p * z * v)
                        .sum()
                })
                .collect()
        };
        let (plo, phi) = (point(&zlo), point(&zhi));
        let k = ranges.len();
        ranges.push((plo[k].min(allocation[k]), phi[k].max(allocation[k])));
        ends.push([plo, phi]);
    }
    let unique = ranges.iter().all(|(lo, hi)| hi - lo <= tol::REPORTING);
    let segment = if d == 2 && !unique { Some(ends.swap_remove(0)) } else { None };
    Ok(AllocationResult { allocation, witness, unique, ranges, segment })
}

/// Utility contribution `u^c(X; Y) = min E_Q X` over the extreme measures of `Y`.
/// The risk contribution is its negation.
pub fn contribution(spec: &RiskSpec, x: &Pnl, y: &Pnl) -> Result<f64> {
    x.space().check_same(y.space(), "contributing position")?;
    let space = x.space().clone();
    spec.validate(&space)?;
    let uy = utility_values(spec, &space, y.values());
    let mut face = DensityLp::new(spec, &space)?;
    let row = face.expectation_row(space.probs(), y.values());
    let slack = tol::scaled(1e-10, uy.abs().max(tol::max_abs(y.values())));
    face.lp.add_le(row, uy + slack);
    let obj = face.expectation_row(space.probs(), x.values());
    let z = face.minimize(&obj)?;
    Ok(space.probs().iter().zip(&z).zip(x.values()).map(|((p, z), v)| p * z * v).sum())
}
