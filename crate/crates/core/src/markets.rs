//! Static market `(S0, S1)`, no-good-deal checks and price intervals.

use cohdeals_linprog::{solve, LinearProgram, LpSolution, LpStatus, Row};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use crate::error::{CoreError, Result, Violation, ViolationKind};
use crate::ground::ground;
use crate::risk::{eval_rows, utility_values};
use crate::space::{Density, Pnl, ScenarioSpace};
use crate::spec::RiskSpec;
use crate::tol;

/// `d` traded assets with discounted prices `S0` today and `S1` at the horizon.
#[derive(Debug, Clone)]
pub struct MarketModel {
    space: ScenarioSpace,
    s0: Vec<f64>,
    s1: Vec<Pnl>,
}

impl MarketModel {
    pub fn new(space: &ScenarioSpace, s0: Vec<f64>, s1: Vec<Pnl>) -> Result<Self> {
        if s0.len() != s1.len() {
            return Err(CoreError::Structural(format!(
                "{} initial prices for {} assets",
                s0.len(),
                s1.len()
            )));
        }
        if s0.iter().any(|v| !v.is_finite()) {
            return Err(CoreError::Structural("initial prices must be finite".into()));
        }
        for s in &s1 {
            space.check_same(s.space(), "asset price")?;
        }
        Ok(Self { space: space.clone(), s0, s1 })
    }

    /// Pure claim pricing: no traded assets, only the normalization constraint.
    pub fn without_assets(space: &ScenarioSpace) -> Self {
        Self { space: space.clone(), s0: Vec::new(), s1: Vec::new() }
    }

    pub fn space(&self) -> &ScenarioSpace {
        &self.space
    }

    pub fn dim(&self) -> usize {
        self.s0.len()
    }

    pub fn s0(&self) -> &[f64] {
        &self.s0
    }

    pub fn s1(&self) -> &[Pnl] {
        &self.s1
    }

    /// `S1^j - S0^j` per asset.
    pub fn increments(&self) -> Vec<Pnl> {
        self.s1.iter().zip(&self.s0).map(|(s, &p)| s.shift(-p)).collect()
    }

    /// `<h, S1 - S0>`.
    pub fn gain(&self, h: &[f64]) -> Result<Pnl> {
        if h.len() != self.dim() {
            return Err(CoreError::Structural(format!(
                "portfolio has {} entries for {} assets",
                h.len(),
                self.dim()
            )));
        }
        let mut v = vec![0.0; self.space.len()];
        for ((s, &p), &w) in self.s1.iter().zip(&self.s0).zip(h) {
            for (acc, x) in v.iter_mut().zip(s.values()) {
                *acc += w * (x - p);
            }
        }
        Pnl::new(&self.space, v)
    }
}

/// Linear rows over the density vector `z` (one column per outcome).
#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintSystem {
    pub rows: Vec<Vec<f64>>,
    pub rhs: Vec<f64>,
}

/// Normalization `sum p_i z_i = 1` followed by `E_Q S1^j = S0^j` per asset.
pub fn risk_neutral_constraints(model: &MarketModel) -> ConstraintSystem {
    let p = model.space.probs();
    let mut rows = vec![p.to_vec()];
    let mut rhs = vec![1.0];
    for (s, &s0) in model.s1.iter().zip(&model.s0) {
        rows.push(p.iter().zip(s.values()).map(|(p, v)| p * v).collect());
        rhs.push(s0);
    }
    ConstraintSystem { rows, rhs }
}

/// Endpoints of a set of prices with attainment information.
#[derive(Debug, Clone, Serialize)]
pub struct PriceInterval {
    pub lo: f64,
    pub hi: f64,
    pub lo_closed: bool,
    pub hi_closed: bool,
    pub lo_witness: Option<Density>,
    pub hi_witness: Option<Density>,
}

impl PriceInterval {
    pub fn point(v: f64) -> Self {
        Self { lo: v, hi: v, lo_closed: true, hi_closed: true, lo_witness: None, hi_witness: None }
    }

    pub fn contains(&self, other: &PriceInterval, tolerance: f64) -> bool {
        self.lo <= other.lo + tolerance && other.hi <= self.hi + tolerance
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }
}

/// Outcome of the no-good-deals test.
#[derive(Debug, Clone)]
pub enum NgdCheck {
    /// A measure in `D` under which the assets are martingales.
    Holds { witness: Density },
    Violated(Violation),
}

impl NgdCheck {
    pub fn holds(&self) -> bool {
        matches!(self, NgdCheck::Holds { .. })
    }
}

/// Density LP of `spec` with martingale rows for every asset.
pub(crate) struct PricingLp {
    pub lp: LinearProgram,
    pub density: Vec<Row>,
    /// Index of the first martingale row among the equality rows.
    pub first_martingale: usize,
}

impl PricingLp {
    pub fn new(model: &MarketModel, spec: &RiskSpec) -> Result<Self> {
        let g = ground(spec, &model.space)?;
        let mut lp = LinearProgram::new(0);
        let density = g.embed(&mut lp);
        let first_martingale = lp.eq_rows.len();
        let p = model.space.probs();
        for (s, &s0) in model.s1.iter().zip(&model.s0) {
            lp.add_eq(weighted_row(&density, p, s.values()), s0);
        }
        Ok(Self { lp, density, first_martingale })
    }

    pub fn set_objective(&mut self, probs: &[f64], f: &[f64], sign: f64) {
        self.lp.objective.iter_mut().for_each(|c| *c = 0.0);
        for &(j, a) in &weighted_row(&self.density, probs, f) {
            self.lp.objective[j] += sign * a;
        }
    }

    pub fn martingale_duals(&self, sol: &LpSolution) -> Vec<f64> {
        sol.dual_eq[self.first_martingale..].to_vec()
    }
}

/// `sum_i p_i x_i z_i` expressed in LP columns.
pub(crate) fn weighted_row(density: &[Row], probs: &[f64], x: &[f64]) -> Row {
    let mut row = Vec::new();
    for (i, r) in density.iter().enumerate() {
        let w = probs[i] * x[i];
        if w != 0.0 {
            row.extend(r.iter().map(|&(j, a)| (j, w * a)));
        }
    }
    row
}

/// Tests `D ∩ M ≠ ∅`. On failure returns a portfolio `h` with
/// `u(<h, S1 - S0>) > 0`, read off the duals of the least-violation LP.
pub fn check_ngd(model: &MarketModel, spec: &RiskSpec) -> Result<NgdCheck> {
    let pricing = PricingLp::new(model, spec)?;
    let sol = solve(&pricing.lp)?;
    if sol.status == LpStatus::Optimal {
        let z = eval_rows(&pricing.density, &sol.x);
        return Ok(NgdCheck::Holds { witness: Density::from_solver(&model.space, z)? });
    }
    good_deal(model, spec, pricing).map(NgdCheck::Violated)
}

/// Minimizes the l1 violation of the martingale rows over `D`. The optimum is
/// `min_{Q in D} -y·(E_Q S1 - S0) = u(<-y, S1 - S0>)` for the row duals `y`.
fn good_deal(model: &MarketModel, spec: &RiskSpec, mut pricing: PricingLp) -> Result<Violation> {
    let d = model.dim();
    for k in 0..d {
        let row = pricing.first_martingale + k;
        let sp = pricing.lp.add_var(1.0, 0.0, f64::INFINITY);
        let sm = pricing.lp.add_var(1.0, 0.0, f64::INFINITY);
        pricing.lp.eq_rows[row].push((sp, 1.0));
        pricing.lp.eq_rows[row].push((sm, -1.0));
    }
    let sol = solve(&pricing.lp)?;
    if sol.status != LpStatus::Optimal {
        return Err(CoreError::Numerical(format!("violation LP ended {:?}", sol.status)));
    }
    let h: Vec<f64> = pricing.martingale_duals(&sol).iter().map(|y| -y).collect();
    let value = utility_values(spec, &model.space, model.gain(&h)?.values());
    if value <= 0.0 {
        return Err(CoreError::Numerical(format!(
            "no-good-deal check failed but the recovered portfolio has utility {value:.3e}"
        )));
    }
    Ok(Violation { portfolio: h, value, kind: ViolationKind::GoodDeal })
}

fn check_payoff(model: &MarketModel, f: &Pnl) -> Result<()> {
    model.space.check_same(f.space(), "payoff")
}

/// `{E_Q F : Q in D ∩ M}`, both endpoints attained.
pub fn ngd_interval(model: &MarketModel, spec: &RiskSpec, f: &Pnl) -> Result<PriceInterval> {
    check_payoff(model, f)?;
    let mut pricing = PricingLp::new(model, spec)?;
    let p = model.space.probs().to_vec();
    let mut ends = Vec::with_capacity(2);
    for sign in [1.0, -1.0] {
        pricing.set_objective(&p, f.values(), sign);
        let sol = solve(&pricing.lp)?;
        match sol.status {
            LpStatus::Optimal => {}
            LpStatus::Infeasible => {
                let v = good_deal(model, spec, PricingLp::new(model, spec)?)?;
                return Err(CoreError::Violated(Box::new(v)));
            }
            LpStatus::Unbounded => {
                return Err(CoreError::Numerical("pricing LP unbounded over a bounded set".into()))
            }
        }
        let z = eval_rows(&pricing.density, &sol.x);
        ends.push((sign * sol.objective, Density::from_solver(&model.space, z)?));
    }
    let (hi, hi_w) = ends.pop().expect("two endpoints");
    let (lo, lo_w) = ends.pop().expect("two endpoints");
    Ok(PriceInterval {
        lo,
        hi: hi.max(lo),
        lo_closed: true,
        hi_closed: true,
        lo_witness: Some(lo_w),
        hi_witness: Some(hi_w),
    })
}

const CONTAINMENT_DIRECTIONS: usize = 200;
const CONTAINMENT_SEED: u64 = 0x5eed_c0de;

/// Sampled check that `PD ⊆ RD`: `u_PD(h) >= u_RD(h)` on random directions.
pub fn check_containment(pd: &RiskSpec, rd: &RiskSpec, space: &ScenarioSpace) -> Result<()> {
    check_containment_seeded(pd, rd, space, CONTAINMENT_SEED)
}

/// [`check_containment`] with the directions drawn from `seed`.
pub fn check_containment_seeded(pd: &RiskSpec, rd: &RiskSpec, space: &ScenarioSpace, seed: u64) -> Result<()> {
    pd.validate(space)?;
    rd.validate(space)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..CONTAINMENT_DIRECTIONS {
        let h: Vec<f64> = (0..space.len()).map(|_| StandardNormal.sample(&mut rng)).collect();
        let a = utility_values(pd, space, &h);
        let b = utility_values(rd, space, &h);
        if a < b - tol::scaled(tol::FEASIBILITY, tol::max_abs(&h)) {
            return Err(CoreError::Model(format!(
                "profit set is not contained in the risk set: {a} < {b} in a sampled direction"
            )));
        }
    }
    Ok(())
}

/// Risk-adjusted return on capital: profit `inf_PD E_Q X` over risk
/// `-inf_RD E_Q X`, with `0/0 = 0` and `+inf` when both are nonnegative and
/// the profit is positive.
pub fn raroc(pd: &RiskSpec, rd: &RiskSpec, x: &Pnl) -> Result<f64> {
    let space = x.space();
    check_containment(pd, rd, space)?;
    let eps = tol::scaled(1e-12, tol::max_abs(x.values()));
    let clean = |v: f64| if v.abs() <= eps { 0.0 } else { v };
    let profit = clean(utility_values(pd, space, x.values()));
    let worst = clean(utility_values(rd, space, x.values()));
    if profit > 0.0 && worst >= 0.0 {
        return Ok(f64::INFINITY);
    }
    if worst == 0.0 {
        // profit <= 0 here and containment forces profit >= worst.
        return Ok(0.0);
    }
    Ok(profit / -worst)
}

/// The mixture `PD/(1+R) + R·RD/(1+R)` whose intersection with `M` prices at
/// RAROC level `R`.
pub fn raroc_set(pd: &RiskSpec, rd: &RiskSpec, big_r: f64) -> Result<RiskSpec> {
    if !(big_r.is_finite() && big_r >= 0.0) {
        return Err(CoreError::Domain(format!("RAROC limit {big_r} must be a nonnegative number")));
    }
    if big_r == 0.0 {
        return Ok(pd.clone());
    }
    Ok(RiskSpec::mixture(vec![
        (1.0 / (1.0 + big_r), pd.clone()),
        (big_r / (1.0 + big_r), rd.clone()),
    ]))
}

/// RAROC-based fair price interval. `R = 0` prices with `PD` alone.
pub fn raroc_interval(
    model: &MarketModel,
    pd: &RiskSpec,
    rd: &RiskSpec,
    big_r: f64,
    f: &Pnl,
) -> Result<PriceInterval> {
    check_containment(pd, rd, &model.space)?;
    let set = raroc_set(pd, rd, big_r)?;
    ngd_interval(model, &set, f)
}

/// Maximizes the smallest outcome probability over martingale measures,
/// writing `q_i = t + w_i` with `w >= 0` so only the `1 + d` market rows remain.
/// Returns `(t, q)` or `None` when no martingale measure exists.
fn most_interior_measure(model: &MarketModel) -> Result<Option<(f64, Vec<f64>)>> {
    let n = model.space.len();
    let mut lp = LinearProgram::new(n + 1);
    let t = n;
    lp.set_bounds(t, f64::NEG_INFINITY, f64::INFINITY);
    lp.objective[t] = -1.0;
    let mut norm: Row = (0..n).map(|i| (i, 1.0)).collect();
    norm.push((t, n as f64));
    lp.add_eq(norm, 1.0);
    for (s, &s0) in model.s1.iter().zip(&model.s0) {
        let mut row: Row = s.values().iter().copied().enumerate().collect();
        row.push((t, s.values().iter().sum()));
        lp.add_eq(row, s0);
    }
    let sol = solve(&lp)?;
    match sol.status {
        LpStatus::Optimal => {
            let tv = sol.x[t];
            Ok(Some((tv, (0..n).map(|i| tv + sol.x[i]).collect())))
        }
        LpStatus::Infeasible => Ok(None),
        LpStatus::Unbounded => Err(CoreError::Numerical("interior-measure LP unbounded".into())),
    }
}

/// `max sum p_i w_i` with `0 <= w_i <= <h, S1 - S0>(w_i)`, `w_i <= 1`: positive
/// exactly when `h` is an arbitrage.
fn arbitrage(model: &MarketModel) -> Result<Violation> {
    let n = model.space.len();
    let d = model.dim();
    let mut lp = LinearProgram::new(d + n);
    for k in 0..d {
        lp.set_free(k);
    }
    let incs = model.increments();
    for i in 0..n {
        lp.set_bounds(d + i, 0.0, 1.0);
        lp.objective[d + i] = -model.space.probs()[i];
        let mut row: Row = vec![(d + i, 1.0)];
        row.extend(incs.iter().enumerate().map(|(k, s)| (k, -s.values()[i])));
        lp.add_le(row, 0.0);
    }
    let sol = solve(&lp)?;
    if sol.status != LpStatus::Optimal {
        return Err(CoreError::Numerical(format!("arbitrage LP ended {:?}", sol.status)));
    }
    Ok(Violation {
        portfolio: sol.x[..d].to_vec(),
        value: -sol.objective,
        kind: ViolationKind::Arbitrage,
    })
}

/// No-arbitrage interval: `E_Q F` over strictly positive martingale measures.
/// Endpoints are open unless the claim is priced uniquely.
pub fn na_interval(model: &MarketModel, f: &Pnl) -> Result<PriceInterval> {
    check_payoff(model, f)?;
    let interior = most_interior_measure(model)?;
    let (t, q) = match interior {
        Some((t, q)) if t > tol::FEASIBILITY => (t, q),
        _ => return Err(CoreError::Violated(Box::new(arbitrage(model)?))),
    };
    debug_assert!(t > 0.0);
    // The strictly positive measures are the relative interior of M, so the
    // endpoints are those of the closure.
    let closure = ngd_interval(model, &RiskSpec::tail_var(0.0), f)?;
    let probs = model.space.probs();
    let z: Vec<f64> = q.iter().zip(probs).map(|(q, p)| q / p).collect();
    let inner = Density::from_solver(&model.space, z)?;
    let scale = tol::scaled(tol::REPORTING, closure.lo.abs().max(closure.hi.abs()));
    let closed = closure.width() <= scale;
    let witness = if closed { Some(inner) } else { None };
    Ok(PriceInterval {
        lo: closure.lo,
        hi: closure.hi,
        lo_closed: closed,
        hi_closed: closed,
        lo_witness: witness.clone(),
        hi_witness: witness,
    })
}

/// Utility family of an agent.
#[derive(Debug, Clone, Copy, PartialEq, serde::Deserialize, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum UtilityKind {
    /// `-exp(-alpha w)`.
    Exponential { alpha: f64 },
    /// `w^eta / eta`, `eta in (0, 1)`.
    Power { eta: f64 },
    Log,
}

impl UtilityKind {
    fn marginal(&self, w: f64) -> Result<f64> {
        match *self {
            UtilityKind::Exponential { alpha } => {
                if !(alpha > 0.0 && alpha.is_finite()) {
                    return Err(CoreError::Domain(format!("risk aversion {alpha} must be positive")));
                }
                Ok((-alpha * w).exp())
            }
            UtilityKind::Power { eta } => {
                if !(eta > 0.0 && eta < 1.0) {
                    return Err(CoreError::Domain(format!("power {eta} outside (0, 1)")));
                }
                positive_wealth(w)?;
                Ok(w.powf(eta - 1.0))
            }
            UtilityKind::Log => {
                positive_wealth(w)?;
                Ok(1.0 / w)
            }
        }
    }
}

fn positive_wealth(w: f64) -> Result<()> {
    if w > 0.0 {
        Ok(())
    } else {
        Err(CoreError::Domain(format!("wealth {w} must be positive for this utility")))
    }
}

#[derive(Debug, Clone)]
pub struct AgentSpec {
    pub subjective: Density,
    pub utility: UtilityKind,
    pub wealth: Pnl,
}

/// Valuation density `c · z_subjective · u'(W)` of one agent.
pub fn valuation_density(agent: &AgentSpec) -> Result<Density> {
    let space = agent.wealth.space();
    space.check_same(agent.subjective.space(), "subjective measure")?;
    let mut z = Vec::with_capacity(space.len());
    for (s, &w) in agent.subjective.values().iter().zip(agent.wealth.values()) {
        z.push(s * agent.utility.marginal(w)?);
    }
    let mass = space.mean(&z);
    if !(mass > 0.0 && mass.is_finite()) {
        return Err(CoreError::Domain("valuation density cannot be normalized".into()));
    }
    Density::new(space, z.into_iter().map(|v| v / mass).collect())
}

/// Polytope spanned by the agents' valuation densities.
pub fn valuation_measures(agents: &[AgentSpec]) -> Result<RiskSpec> {
    if agents.is_empty() {
        return Err(CoreError::Structural("no agents given".into()));
    }
    let first = agents[0].wealth.space();
    let mut vertices = Vec::with_capacity(agents.len());
    for a in agents {
        first.check_same(a.wealth.space(), "agent wealth")?;
        vertices.push(valuation_density(a)?.values().to_vec());
    }
    Ok(RiskSpec::Polytope { vertices })
}
