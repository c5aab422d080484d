//! Event trees with bid/ask prices and proportional transaction costs.
//!
//! A measure `Q` prices consistently with the bid/ask band when some process
//! `M` with `bid <= M <= ask` is a `Q`-martingale along the tree. Writing
//! `q` for the mass reaching a node and `n = q M` turns that bilinear
//! condition into linear rows, so each price interval is a pair of LPs.

use cohdeals_linprog::{solve, LinearProgram, LpSolution, LpStatus};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result, Violation, ViolationKind};
use crate::ground::ground;
use crate::markets::{ngd_interval, MarketModel, PriceInterval};
use crate::risk::eval_rows;
use crate::space::{Density, Pnl, ScenarioSpace};
use crate::spec::RiskSpec;
use crate::tol;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeNode {
    /// `None` only for the root, which must be node 0. Parents precede
    /// their children.
    #[serde(default)]
    pub parent: Option<usize>,
    /// Conditional probability of reaching this node from its parent.
    #[serde(default = "one")]
    pub prob: f64,
    /// Ask price per asset.
    pub ask: Vec<f64>,
    /// Explicit bid per asset. When absent the bid is `(1 - lambda w_i) ask_i`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bid: Option<Vec<f64>>,
    /// Discounted claim payoff; required on leaves, forbidden elsewhere.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub payoff: Option<f64>,
}

fn one() -> f64 {
    1.0
}

/// Finite event tree with per-node asset prices, a claim on the leaves and
/// a determining set for the leaf measure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeModel {
    pub nodes: Vec<TreeNode>,
    pub risk_spec: RiskSpec,
    /// Per-asset cost multipliers `w_i`, so asset `i` pays `lambda w_i`.
    /// Defaults to 1 for every asset.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cost_weights: Option<Vec<f64>>,
}

/// Cached structure of a validated tree.
struct Shape {
    children: Vec<Vec<usize>>,
    leaves: Vec<usize>,
    leaf_probs: Vec<f64>,
    dim: usize,
}

impl TreeModel {
    /// Full (non-recombining) binomial tree with one asset, up/down factors
    /// and up probability `p`; the claim pays `payoff(S_T)`.
    pub fn binomial(
        periods: usize,
        s0: f64,
        up: f64,
        down: f64,
        p: f64,
        payoff: impl Fn(f64) -> f64,
        risk_spec: RiskSpec,
    ) -> Self {
        let mut nodes = vec![TreeNode { parent: None, prob: 1.0, ask: vec![s0], bid: None, payoff: None }];
        let mut level = vec![0usize];
        for _ in 0..periods {
            let mut next = Vec::with_capacity(2 * level.len());
            for &v in &level {
                let s = nodes[v].ask[0];
                for (f, pr) in [(up, p), (down, 1.0 - p)] {
                    nodes.push(TreeNode { parent: Some(v), prob: pr, ask: vec![s * f], bid: None, payoff: None });
                    next.push(nodes.len() - 1);
                }
            }
            level = next;
        }
        for &v in &level {
            nodes[v].payoff = Some(payoff(nodes[v].ask[0]));
        }
        Self { nodes, risk_spec, cost_weights: None }
    }

    fn shape(&self) -> Result<Shape> {
        let n = self.nodes.len();
        let root = self.nodes.first().ok_or_else(|| CoreError::Structural("tree has no nodes".into()))?;
        if root.parent.is_some() {
            return Err(CoreError::Structural("node 0 must be the root".into()));
        }
        let dim = root.ask.len();
        let mut children = vec![Vec::new(); n];
        for (v, node) in self.nodes.iter().enumerate() {
            if node.ask.len() != dim || node.bid.as_ref().is_some_and(|b| b.len() != dim) {
                return Err(CoreError::Structural(format!("node {v} does not quote {dim} assets")));
            }
            if node.ask.iter().chain(node.bid.iter().flatten()).any(|x| !x.is_finite()) {
                return Err(CoreError::Structural(format!("node {v} has non-finite prices")));
            }
            if v == 0 {
                continue;
            }
            match node.parent {
                Some(p) if p < v => children[p].push(v),
                Some(p) => {
                    return Err(CoreError::Structural(format!(
                        "node {v} has parent {p}; parents must come first"
                    )))
                }
                None => return Err(CoreError::Structural(format!("node {v} is a second root"))),
            }
            if !(node.prob.is_finite() && node.prob > 0.0) {
                return Err(CoreError::Structural(format!("branch probability of node {v} is {}", node.prob)));
            }
        }
        if let Some(w) = &self.cost_weights {
            if w.len() != dim || w.iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
                return Err(CoreError::Structural(format!("cost weights must be {dim} nonnegative reals")));
            }
        }
        let mut reach = vec![0.0; n];
        reach[0] = 1.0;
        let mut leaves = Vec::new();
        for v in 0..n {
            if children[v].is_empty() {
                if self.nodes[v].payoff.is_none() {
                    return Err(CoreError::Structural(format!("leaf {v} has no payoff")));
                }
                leaves.push(v);
                continue;
            }
            if self.nodes[v].payoff.is_some() {
                return Err(CoreError::Structural(format!("internal node {v} carries a payoff")));
            }
            let total: f64 = children[v].iter().map(|&c| self.nodes[c].prob).sum();
            if (total - 1.0).abs() > 1e-9 {
                return Err(CoreError::Structural(format!(
                    "branch probabilities below node {v} sum to {total}"
                )));
            }
            for &c in &children[v] {
                reach[c] = reach[v] * self.nodes[c].prob / total;
            }
        }
        if let Some(p) = self.nodes.iter().find_map(|n| n.payoff).filter(|x| !x.is_finite()) {
            return Err(CoreError::Structural(format!("payoff {p} is not finite")));
        }
        let mut leaf_probs: Vec<f64> = leaves.iter().map(|&v| reach[v]).collect();
        let total: f64 = leaf_probs.iter().sum();
        leaf_probs.iter_mut().for_each(|p| *p /= total);
        Ok(Shape { children, leaves, leaf_probs, dim })
    }

    /// Checks the structural invariants and that the band is well ordered at
    /// `lambda = 0`.
    pub fn validate(&self) -> Result<()> {
        let shape = self.shape()?;
        self.band(&shape, 0.0)?;
        self.risk_spec.validate(&self.leaf_space_from(&shape)?)
    }

    pub fn dim(&self) -> usize {
        self.nodes.first().map_or(0, |n| n.ask.len())
    }

    fn leaf_space_from(&self, shape: &Shape) -> Result<ScenarioSpace> {
        let labels = shape.leaves.iter().map(|v| format!("n{v}")).collect();
        ScenarioSpace::new(labels, shape.leaf_probs.clone())
    }

    /// Leaf outcomes labelled `n<index>` with their path probabilities.
    pub fn leaf_space(&self) -> Result<ScenarioSpace> {
        self.leaf_space_from(&self.shape()?)
    }

    /// `(bid, ask)` per node at cost level `lambda`.
    fn band(&self, shape: &Shape, lambda: f64) -> Result<Vec<(Vec<f64>, Vec<f64>)>> {
        if !(0.0..1.0).contains(&lambda) {
            return Err(CoreError::Domain(format!("cost level {lambda} outside [0, 1)")));
        }
        let weights = self.cost_weights.clone().unwrap_or_else(|| vec![1.0; shape.dim]);
        if let Some(w) = weights.iter().find(|w| lambda * **w >= 1.0) {
            return Err(CoreError::Domain(format!("cost {lambda} x {w} leaves no positive bid")));
        }
        self.nodes
            .iter()
            .enumerate()
            .map(|(v, node)| {
                let bid = match &node.bid {
                    Some(b) => b.clone(),
                    None => node.ask.iter().zip(&weights).map(|(a, w)| (1.0 - lambda * w) * a).collect(),
                };
                if bid.iter().zip(&node.ask).any(|(b, a)| b > a) {
                    return Err(CoreError::Model(format!("bid exceeds ask at node {v}")));
                }
                Ok((bid, node.ask.clone()))
            })
            .collect()
    }

    /// Frictionless one-period model on the leaves: for every internal node
    /// `k` and asset `i`, the asset `1{path passes k} (S^i_next - S^i_k)`
    /// priced at 0. Its martingale measures are exactly the measures under
    /// which the ask process is a martingale along the tree.
    pub fn induced_market(&self) -> Result<(MarketModel, Pnl)> {
        let shape = self.shape()?;
        let space = self.leaf_space_from(&shape)?;
        let n = self.nodes.len();
        // Ancestor chain of every leaf, as (node, child on the path).
        let mut steps = Vec::with_capacity(shape.leaves.len());
        for &leaf in &shape.leaves {
            let mut path = Vec::new();
            let mut c = leaf;
            while let Some(p) = self.nodes[c].parent {
                path.push((p, c));
                c = p;
            }
            steps.push(path);
        }
        let mut s1 = Vec::new();
        for k in (0..n).filter(|&k| !shape.children[k].is_empty()) {
            for i in 0..shape.dim {
                let vals = steps
                    .iter()
                    .map(|path| {
                        path.iter()
                            .find(|(p, _)| *p == k)
                            .map_or(0.0, |&(_, c)| self.nodes[c].ask[i] - self.nodes[k].ask[i])
                    })
                    .collect();
                s1.push(space.pnl(vals)?);
            }
        }
        let s0 = vec![0.0; s1.len()];
        let payoff = space.pnl(shape.leaves.iter().map(|&v| self.nodes[v].payoff.unwrap_or(0.0)).collect())?;
        Ok((MarketModel::new(&space, s0, s1)?, payoff))
    }
}

/// One endpoint of a tree interval with the shadow price process `M = n/q`.
#[derive(Debug, Clone, Serialize)]
pub struct TreeEndpoint {
    pub price: f64,
    pub density: Density,
    /// Per node, `M` where the node carries mass above `1e-12`, else `None`.
    pub shadow: Vec<Option<Vec<f64>>>,
}

#[derive(Debug, Clone, Serialize)]
pub struct TreeInterval {
    pub lambda: f64,
    pub lo: TreeEndpoint,
    pub hi: TreeEndpoint,
}

impl TreeInterval {
    pub fn interval(&self) -> PriceInterval {
        PriceInterval {
            lo: self.lo.price,
            hi: self.hi.price.max(self.lo.price),
            lo_closed: true,
            hi_closed: true,
            lo_witness: Some(self.lo.density.clone()),
            hi_witness: Some(self.hi.density.clone()),
        }
    }
}

struct TreeLp {
    lp: LinearProgram,
    density: Vec<cohdeals_linprog::Row>,
    /// Column of `q` per node; `n` for node `v`, asset `i` is `n0 + v d + i`.
    n0: usize,
    martingale_rows: Vec<usize>,
}

fn tree_lp(tree: &TreeModel, shape: &Shape, space: &ScenarioSpace, lambda: f64) -> Result<TreeLp> {
    let band = tree.band(shape, lambda)?;
    let nn = tree.nodes.len();
    let d = shape.dim;
    let g = ground(&tree.risk_spec, space)?;
    let mut lp = LinearProgram::new(0);
    for _ in 0..nn {
        lp.add_var(0.0, 0.0, f64::INFINITY);
    }
    let n0 = lp.num_vars();
    for _ in 0..nn * d {
        let j = lp.add_var(0.0, 0.0, 0.0);
        lp.set_free(j);
    }
    lp.add_eq(vec![(0, 1.0)], 1.0);
    let mut martingale_rows = Vec::new();
    for (v, kids) in shape.children.iter().enumerate().filter(|(_, k)| !k.is_empty()) {
        let mut row: Vec<_> = kids.iter().map(|&c| (c, 1.0)).collect();
        row.push((v, -1.0));
        lp.add_eq(row, 0.0);
        for i in 0..d {
            let mut row: Vec<_> = kids.iter().map(|&c| (n0 + c * d + i, 1.0)).collect();
            row.push((n0 + v * d + i, -1.0));
            martingale_rows.push(lp.add_eq(row, 0.0));
        }
    }
    for (v, (bid, ask)) in band.iter().enumerate() {
        for i in 0..d {
            let n = n0 + v * d + i;
            lp.add_le(vec![(n, 1.0), (v, -ask[i])], 0.0);
            lp.add_le(vec![(v, bid[i]), (n, -1.0)], 0.0);
        }
    }
    let density = g.embed(&mut lp);
    for ((&leaf, &p), row) in shape.leaves.iter().zip(&shape.leaf_probs).zip(&density) {
        let mut r: Vec<_> = row.iter().map(|&(j, a)| (j, -p * a)).collect();
        r.push((leaf, 1.0));
        lp.add_eq(r, 0.0);
    }
    Ok(TreeLp { lp, density, n0, martingale_rows })
}

fn endpoint(tree: &TreeModel, tl: &TreeLp, space: &ScenarioSpace, sol: &LpSolution, price: f64) -> Result<TreeEndpoint> {
    let d = tree.dim();
    let density = Density::from_solver(space, eval_rows(&tl.density, &sol.x))?;
    let shadow = (0..tree.nodes.len())
        .map(|v| {
            let q = sol.x[v];
            (q > 1e-12).then(|| (0..d).map(|i| sol.x[tl.n0 + v * d + i] / q).collect())
        })
        .collect();
    Ok(TreeEndpoint { price, density, shadow })
}

/// Least total violation of the martingale rows. Its row duals give a
/// position per internal node and asset, held to the next date and traded
/// at the quoted bid and ask; the optimum is the smallest expected net gain
/// of that strategy over `D`, which is positive.
fn tree_good_deal(mut tl: TreeLp) -> Result<Violation> {
    for &r in &tl.martingale_rows {
        let sp = tl.lp.add_var(1.0, 0.0, f64::INFINITY);
        let sm = tl.lp.add_var(1.0, 0.0, f64::INFINITY);
        tl.lp.eq_rows[r].push((sp, 1.0));
        tl.lp.eq_rows[r].push((sm, -1.0));
    }
    tl.lp.objective.iter_mut().take(tl.n0).for_each(|c| *c = 0.0);
    let sol = solve(&tl.lp)?;
    if sol.status != LpStatus::Optimal || sol.objective <= 0.0 {
        return Err(CoreError::Numerical(format!(
            "band LP infeasible but the violation LP ended {:?} at {}",
            sol.status, sol.objective
        )));
    }
    let portfolio = tl.martingale_rows.iter().map(|&r| -sol.dual_eq[r]).collect();
    Ok(Violation { portfolio, value: sol.objective, kind: ViolationKind::GoodDeal })
}

/// Both endpoints of `{E_Q F : Q in D, some Q-martingale lies in the band}`
/// with the attaining measures and shadow prices.
pub fn txcost_solve(tree: &TreeModel, lambda: f64) -> Result<TreeInterval> {
    let shape = tree.shape()?;
    let space = tree.leaf_space_from(&shape)?;
    let mut tl = tree_lp(tree, &shape, &space, lambda)?;
    let payoff: Vec<f64> = shape.leaves.iter().map(|&v| tree.nodes[v].payoff.unwrap_or(0.0)).collect();
    let mut ends = Vec::with_capacity(2);
    for sign in [1.0, -1.0] {
        tl.lp.objective.iter_mut().for_each(|c| *c = 0.0);
        for (&leaf, f) in shape.leaves.iter().zip(&payoff) {
            tl.lp.objective[leaf] = sign * f;
        }
        let sol = solve(&tl.lp)?;
        match sol.status {
            LpStatus::Optimal => ends.push(endpoint(tree, &tl, &space, &sol, sign * sol.objective)?),
            LpStatus::Infeasible => {
                let fresh = tree_lp(tree, &shape, &space, lambda)?;
                return Err(CoreError::Violated(Box::new(tree_good_deal(fresh)?)));
            }
            LpStatus::Unbounded => {
                return Err(CoreError::Numerical("tree pricing LP unbounded over a bounded set".into()))
            }
        }
    }
    let hi = ends.pop().expect("two endpoints");
    let lo = ends.pop().expect("two endpoints");
    Ok(TreeInterval { lambda, lo, hi })
}

pub fn txcost_interval(tree: &TreeModel, lambda: f64) -> Result<PriceInterval> {
    txcost_solve(tree, lambda).map(|t| t.interval())
}

/// Frictionless interval through the induced static market.
pub fn frictionless_interval(tree: &TreeModel) -> Result<PriceInterval> {
    let (model, payoff) = tree.induced_market()?;
    ngd_interval(&model, &tree.risk_spec, &payoff)
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub lambda: f64,
    pub lo: f64,
    pub hi: f64,
    /// Set when this cost level has no consistent measure or the LP failed.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
    pub lo0: f64,
    pub hi0: f64,
    /// Every row contains the next one and the frictionless interval.
    pub nested: bool,
}

impl SweepResult {
    /// Whether every row contains the next one and the frictionless
    /// interval, allowing `tolerance` scaled by the frictionless endpoints.
    pub fn nested_within(&self, tolerance: f64) -> bool {
        let scale = tol::scaled(tolerance, self.lo0.abs().max(self.hi0.abs()));
        self.rows.iter().all(|r| r.error.is_none())
            && self.rows.windows(2).all(|w| w[0].lo <= w[1].lo + scale && w[1].hi <= w[0].hi + scale)
            && self.rows.iter().all(|r| r.lo <= self.lo0 + scale && self.hi0 <= r.hi + scale)
    }

    /// Rows as `lambda,lo,hi,kind` with 12 significant digits, one per cost
    /// level and a final `frictionless` row; failed rows carry empty endpoints.
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let io = |e: csv::Error| CoreError::Numerical(format!("csv: {e}"));
        w.write_record(["lambda", "lo", "hi", "kind"]).map_err(io)?;
        for r in &self.rows {
            let (lo, hi) = if r.error.is_some() { (String::new(), String::new()) } else { (sig12(r.lo), sig12(r.hi)) };
            w.write_record([sig12(r.lambda), lo, hi, "cost".into()]).map_err(io)?;
        }
        w.write_record(["0".into(), sig12(self.lo0), sig12(self.hi0), "frictionless".to_string()]).map_err(io)?;
        let bytes = w.into_inner().map_err(|e| CoreError::Numerical(format!("csv: {e}")))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }
}

/// Shortest decimal form of `x` rounded to 12 significant digits.
fn sig12(x: f64) -> String {
    let r: f64 = format!("{x:.11e}").parse().unwrap_or(x);
    if r == 0.0 {
        "0".into()
    } else if (1e-4..1e15).contains(&r.abs()) {
        r.to_string()
    } else {
        format!("{r:e}")
    }
}

/// Intervals at each cost level, solved in parallel, plus the frictionless
/// interval. `lambdas` must be strictly decreasing and nonnegative.
pub fn convergence_sweep(tree: &TreeModel, lambdas: &[f64]) -> Result<SweepResult> {
    if lambdas.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(CoreError::Domain("cost levels must be strictly decreasing".into()));
    }
    if let Some(l) = lambdas.iter().find(|l| !(0.0..1.0).contains(*l)) {
        return Err(CoreError::Domain(format!("cost level {l} outside [0, 1)")));
    }
    tree.validate()?;
    let base = frictionless_interval(tree)?;
    let rows: Vec<SweepRow> = lambdas
        .par_iter()
        .map(|&lambda| match txcost_interval(tree, lambda) {
            Ok(iv) => SweepRow { lambda, lo: iv.lo, hi: iv.hi, error: None },
            Err(e) => SweepRow { lambda, lo: f64::NAN, hi: f64::NAN, error: Some(e.to_string()) },
        })
        .collect();
    let mut out = SweepResult { rows, lo0: base.lo, hi0: base.hi, nested: false };
    out.nested = out.nested_within(tol::REPORTING);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one_period(spec: RiskSpec) -> TreeModel {
        TreeModel::binomial(1, 1.0, 1.2, 0.8, 0.5, |s| (s - 1.0f64).max(0.0), spec)
    }

    #[test]
    fn frictionless_one_period_call() {
        let t = one_period(RiskSpec::tail_var(0.5));
        let iv = txcost_interval(&t, 0.0).unwrap();
        assert!((iv.lo - 0.1).abs() < 1e-12 && (iv.hi - 0.1).abs() < 1e-12);
    }

    #[test]
    fn costs_widen_the_interval() {
        let t = one_period(RiskSpec::tail_var(0.5));
        let sol = txcost_solve(&t, 0.1).unwrap();
        assert!(sol.lo.price < 0.1 - 1e-6 && sol.hi.price > 0.1 + 1e-6);
        let band = t.band(&t.shape().unwrap(), 0.1).unwrap();
        for end in [&sol.lo, &sol.hi] {
            for (m, (bid, ask)) in end.shadow.iter().zip(&band) {
                let m = m.as_ref().expect("every node carries mass");
                assert!(m[0] >= bid[0] - 1e-9 && m[0] <= ask[0] + 1e-9);
            }
        }
    }

    #[test]
    fn flat_prices_ignore_costs() {
        let mut t = TreeModel::binomial(2, 1.0, 1.0, 1.0, 0.5, |_| 0.0, RiskSpec::tail_var(0.5));
        for (k, v) in t.nodes.iter_mut().filter(|n| n.payoff.is_some()).enumerate() {
            v.payoff = Some(k as f64);
        }
        let a = txcost_interval(&t, 0.0).unwrap();
        for l in [0.05, 0.3] {
            let b = txcost_interval(&t, l).unwrap();
            assert!((a.lo - b.lo).abs() < 1e-10 && (a.hi - b.hi).abs() < 1e-10);
        }
    }

    #[test]
    fn matches_induced_market() {
        let t = TreeModel::binomial(3, 1.0, 1.2, 0.9, 0.5, |s| (s - 1.0f64).max(0.0), RiskSpec::tail_var(0.25));
        let a = txcost_interval(&t, 0.0).unwrap();
        let b = frictionless_interval(&t).unwrap();
        assert!((a.lo - b.lo).abs() < 1e-8 && (a.hi - b.hi).abs() < 1e-8);
        // The binomial tree is complete, so only costs open the interval.
        assert!(a.width() < 1e-8);
        assert!(txcost_interval(&t, 0.05).unwrap().width() > 1e-3);
    }

    #[test]
    fn structural_errors() {
        let mut t = one_period(RiskSpec::tail_var(0.5));
        t.nodes[1].prob = 0.7;
        assert!(matches!(t.validate(), Err(CoreError::Structural(_))));
        let mut t = one_period(RiskSpec::tail_var(0.5));
        t.nodes[1].payoff = None;
        assert!(t.validate().is_err());
        let t = one_period(RiskSpec::tail_var(0.5));
        assert!(matches!(txcost_interval(&t, 1.0), Err(CoreError::Domain(_))));
        let mut t = one_period(RiskSpec::tail_var(0.5));
        t.nodes[0].bid = Some(vec![1.1]);
        assert!(matches!(txcost_interval(&t, 0.0), Err(CoreError::Model(_))));
    }

    #[test]
    fn no_consistent_measure_yields_a_strategy() {
        // Both branches go up: only costs large enough to cover the drift
        // leave a consistent measure.
        let mut t = one_period(RiskSpec::tail_var(0.5));
        t.nodes[2].ask = vec![1.1];
        match txcost_interval(&t, 0.01) {
            Err(CoreError::Violated(v)) => {
                assert!(v.value > 0.0);
                assert!(v.portfolio[0] > 0.0);
            }
            other => panic!("{other:?}"),
        }
        assert!(txcost_interval(&t, 0.2).is_ok());
    }

    #[test]
    fn sweep_is_nested() {
        let t = TreeModel::binomial(2, 1.0, 1.2, 0.9, 0.5, |s| (s - 1.0f64).max(0.0), RiskSpec::tail_var(0.5));
        let ls: Vec<f64> = (1..=6).map(|n| 0.5f64.powi(n)).collect();
        let s = convergence_sweep(&t, &ls).unwrap();
        assert!(s.nested);
        let csv = s.to_csv().unwrap();
        assert_eq!(csv.lines().count(), 8);
        assert!(csv.lines().last().unwrap().ends_with(",frictionless"));
        assert!(convergence_sweep(&t, &[0.1, 0.2]).is_err());
    }
}
