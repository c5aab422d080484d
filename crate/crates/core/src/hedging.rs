//! Upper and lower good-deal prices, super- and subhedges, and the closed
//! form for convex claims under Tail V@R with an atomless price law.

use std::fmt;
use std::sync::Arc;

use cohdeals_linprog::{solve, LpStatus};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{CoreError, Result};
use crate::geometry::Generator;
use crate::markets::{check_ngd, MarketModel, NgdCheck, PricingLp};
use crate::quadrature::integrate_smooth;
use crate::space::Pnl;
use crate::spec::RiskSpec;
use crate::tol;

/// `(V_upper, V_lower)`. With no good deals violated the pair is
/// `(-inf, +inf)`: every price is then "acceptable" in both directions.
pub fn upper_lower(model: &MarketModel, spec: &RiskSpec, f: &Pnl) -> Result<(f64, f64)> {
    match crate::markets::ngd_interval(model, spec, f) {
        Ok(i) => Ok((i.hi, i.lo)),
        Err(CoreError::Violated(_)) => Ok((f64::NEG_INFINITY, f64::INFINITY)),
        Err(e) => Err(e),
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct HedgeReport {
    pub upper_price: f64,
    pub lower_price: f64,
    pub super_h: Vec<f64>,
    pub sub_h: Vec<f64>,
    /// Every `h` in the range superhedges (single asset, non-unique case).
    pub super_h_range: Option<(f64, f64)>,
    pub sub_h_range: Option<(f64, f64)>,
}

/// Prices and hedges from the two pricing LPs. The hedge is minus the dual of
/// the martingale rows: with `y` optimal,
/// `E_Q F - y·(E_Q S1 - S0) <= V_upper` for all `Q in D`, so
/// `u(<-y, S1 - S0> - F + V_upper) >= 0`.
pub fn superhedge(model: &MarketModel, spec: &RiskSpec, f: &Pnl) -> Result<HedgeReport> {
    model.space().check_same(f.space(), "payoff")?;
    if let NgdCheck::Violated(v) = check_ngd(model, spec)? {
        return Err(CoreError::Violated(Box::new(v)));
    }
    let mut pricing = PricingLp::new(model, spec)?;
    let probs = model.space().probs().to_vec();
    let mut prices = [0.0; 2];
    let mut hedges = [Vec::new(), Vec::new()];
    for (k, sign) in [-1.0, 1.0].into_iter().enumerate() {
        pricing.set_objective(&probs, f.values(), sign);
        let sol = solve(&pricing.lp)?;
        if sol.status != LpStatus::Optimal {
            return Err(CoreError::Numerical(format!("hedging LP ended {:?}", sol.status)));
        }
        prices[k] = sign * sol.objective;
        hedges[k] = pricing.martingale_duals(&sol).iter().map(|y| -y).collect();
    }
    let [upper_price, lower_price] = prices;
    let [super_h, sub_h] = hedges;
    let (super_h_range, sub_h_range) = if model.dim() == 1 {
        hedge_ranges(model, spec, f, upper_price, lower_price)?
    } else {
        (None, None)
    };
    Ok(HedgeReport { upper_price, lower_price, super_h, sub_h, super_h_range, sub_h_range })
}

/// Single-asset ranges read off the polygon of `{(E_Q S1, E_Q F)}`: `h`
/// superhedges iff `h (x1 - S0) >= x2 - V_upper` at every vertex.
fn hedge_ranges(
    model: &MarketModel,
    spec: &RiskSpec,
    f: &Pnl,
    upper: f64,
    lower: f64,
) -> Result<(Option<(f64, f64)>, Option<(f64, f64)>)> {
    let gen = Generator::new(spec.clone(), vec![model.s1()[0].clone(), f.clone()])?;
    let poly = gen.polygon()?;
    let s0 = model.s0()[0];
    let eps = tol::scaled(1e-12, s0);
    let mut sup = (f64::NEG_INFINITY, f64::INFINITY);
    let mut sub = (f64::NEG_INFINITY, f64::INFINITY);
    for v in poly {
        let dx = v[0] - s0;
        if dx.abs() <= eps {
            continue;
        }
        let a = (v[1] - upper) / dx;
        let b = (lower - v[1]) / dx;
        if dx > 0.0 {
            sup.0 = sup.0.max(a);
            sub.0 = sub.0.max(b);
        } else {
            sup.1 = sup.1.min(a);
            sub.1 = sub.1.min(b);
        }
    }
    let keep = |r: (f64, f64)| {
        if r.1 - r.0 > tol::REPORTING {
            Some(r)
        } else {
            None
        }
    };
    Ok((keep(sup), keep(sub)))
}

/// Quantile function of an atomless law on `[0, inf)`.
#[derive(Clone)]
pub enum PriceLaw {
    Lognormal { meanlog: f64, sdlog: f64 },
    Quantile(Arc<dyn Fn(f64) -> f64 + Send + Sync>),
}

impl fmt::Debug for PriceLaw {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PriceLaw::Lognormal { meanlog, sdlog } => f
                .debug_struct("Lognormal")
                .field("meanlog", meanlog)
                .field("sdlog", sdlog)
                .finish(),
            PriceLaw::Quantile(_) => f.write_str("Quantile(..)"),
        }
    }
}

impl PriceLaw {
    fn quantile_fn(&self) -> Result<Box<dyn Fn(f64) -> f64 + Send + Sync>> {
        match self {
            PriceLaw::Lognormal { meanlog, sdlog } => {
                let normal = Normal::new(*meanlog, *sdlog)
                    .map_err(|e| CoreError::Domain(format!("lognormal parameters: {e}")))?;
                Ok(Box::new(move |u: f64| normal.inverse_cdf(u).exp()))
            }
            PriceLaw::Quantile(q) => {
                let q = q.clone();
                Ok(Box::new(move |u| q(u)))
            }
        }
    }
}

/// Convex payoff of linear growth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Payoff {
    Call(f64),
    Put(f64),
    /// Breakpoints `(x, f(x))` in increasing `x`, extended linearly beyond both ends.
    PiecewiseLinear(Vec<(f64, f64)>),
}

impl Payoff {
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            Payoff::Call(k) => (x - k).max(0.0),
            Payoff::Put(k) => (k - x).max(0.0),
            Payoff::PiecewiseLinear(pts) => {
                if pts.len() == 1 {
                    return pts[0].1;
                }
                let seg = pts.windows(2).position(|w| x <= w[1].0).unwrap_or(pts.len() - 2);
                let (a, b) = (pts[seg], pts[seg + 1]);
                a.1 + (b.1 - a.1) * (x - a.0) / (b.0 - a.0)
            }
        }
    }

    fn validate(&self) -> Result<()> {
        if let Payoff::PiecewiseLinear(pts) = self {
            if pts.is_empty() {
                return Err(CoreError::Structural("payoff without breakpoints".into()));
            }
            if pts.windows(2).any(|w| w[1].0 <= w[0].0) {
                return Err(CoreError::Structural("payoff breakpoints must increase".into()));
            }
            if pts.iter().any(|p| !(p.0.is_finite() && p.1.is_finite())) {
                return Err(CoreError::Structural("payoff breakpoints must be finite".into()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct ContinuousClaimSpec {
    pub law: PriceLaw,
    pub lambda: f64,
    pub s0: f64,
    pub payoff: Payoff,
}

#[derive(Debug, Clone, Serialize)]
pub struct Ex1Result {
    pub upper: f64,
    pub lower: f64,
    pub super_h: f64,
    pub sub_h: f64,
    /// Mass of the lower tail carried by the upper-price measure.
    pub a: f64,
    /// Mass of its upper tail, `lambda - a`.
    pub b: f64,
    /// Left end of the window carried by the lower-price measure.
    pub c: f64,
    pub d: f64,
}

const QUAD_TOL: f64 = 1e-10;

/// Upper and lower prices with hedges for `F = f(S1)`, `f` convex, under Tail
/// V@R of order `lambda`:
///
/// * the upper measure has density `1/lambda` on `{S1 < q_a} ∪ {S1 > q_{1-b}}`
///   with `a + b = lambda` fixed by the martingale condition;
/// * the lower measure has density `1/lambda` on `{q_c < S1 < q_d}`, `d - c = lambda`.
pub fn ex1_closed_form(claim: &ContinuousClaimSpec) -> Result<Ex1Result> {
    let lambda = claim.lambda;
    if !(lambda > 0.0 && lambda <= 1.0) {
        return Err(CoreError::Domain(format!("tail order {lambda} outside (0, 1]")));
    }
    claim.payoff.validate()?;
    check_convex(&claim.payoff)?;
    let q = claim.law.quantile_fn()?;
    let s0 = claim.s0;
    // Tail means of the identity in quantile coordinates.
    let mean_on = |lo: f64, hi: f64| -> Result<f64> { integrate_smooth(|u| q(u), lo, hi, QUAD_TOL) };
    let lower_tail = mean_on(0.0, lambda)? / lambda;
    let upper_tail = mean_on(1.0 - lambda, 1.0)? / lambda;
    if !(lower_tail < s0 && s0 < upper_tail) {
        return Err(CoreError::Domain(format!(
            "need u(S1) < S0 < -u(-S1), got {lower_tail} < {s0} < {upper_tail}"
        )));
    }

    // Two-sided tail mean, decreasing in a from upper_tail to lower_tail.
    let two_sided = |a: f64| -> Result<f64> {
        Ok((mean_on(0.0, a)? + mean_on(1.0 - lambda + a, 1.0)?) / lambda)
    };
    let a = bisect(|a| Ok(two_sided(a)? - s0), 0.0, lambda, false)?;
    let b = lambda - a;
    // Window mean, increasing in c from lower_tail to upper_tail.
    let window = |c: f64| -> Result<f64> { Ok(mean_on(c, c + lambda)? / lambda) };
    let c = bisect(|c| Ok(window(c)? - s0), 0.0, 1.0 - lambda, true)?;
    let d = c + lambda;

    let f = |x: f64| claim.payoff.eval(x);
    let upper = (integrate_smooth(|u| f(q(u)), 0.0, a, QUAD_TOL)?
        + integrate_smooth(|u| f(q(u)), 1.0 - b, 1.0, QUAD_TOL)?)
        / lambda;
    let lower = integrate_smooth(|u| f(q(u)), c, d, QUAD_TOL)? / lambda;
    let (qa, qb) = (q(a), q(1.0 - b));
    let (qc, qd) = (q(c), q(d));
    let super_h = slope(&f, qa, qb);
    let sub_h = -slope(&f, qc, qd);
    Ok(Ex1Result { upper, lower, super_h, sub_h, a, b, c, d })
}

fn slope(f: &impl Fn(f64) -> f64, x0: f64, x1: f64) -> f64 {
    if (x1 - x0).abs() <= 1e-14 * x0.abs().max(1.0) {
        // Degenerate window: one-sided difference quotient.
        let h = 1e-6 * x0.abs().max(1.0);
        return (f(x0 + h) - f(x0 - h)) / (2.0 * h);
    }
    (f(x1) - f(x0)) / (x1 - x0)
}

/// Root of a monotone function on `[lo, hi]`; `increasing` states the
/// direction, which is verified at the bracket ends.
fn bisect(g: impl Fn(f64) -> Result<f64>, lo: f64, hi: f64, increasing: bool) -> Result<f64> {
    let (mut a, mut b) = (lo, hi);
    let (ga, gb) = (g(a)?, g(b)?);
    let sign_ok = if increasing { ga <= 0.0 && gb >= 0.0 } else { ga >= 0.0 && gb <= 0.0 };
    if !sign_ok {
        return Err(CoreError::Numerical(format!(
            "no sign change on [{lo}, {hi}]: g = {ga:.3e}, {gb:.3e}"
        )));
    }
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if m <= a || m >= b {
            break;
        }
        let gm = g(m)?;
        if (gm > 0.0) == increasing {
            b = m;
        } else {
            a = m;
        }
        if b - a < 1e-15 {
            break;
        }
    }
    Ok(0.5 * (a + b))
}

fn check_convex(p: &Payoff) -> Result<()> {
    if let Payoff::PiecewiseLinear(pts) = p {
        let slopes: Vec<f64> =
            pts.windows(2).map(|w| (w[1].1 - w[0].1) / (w[1].0 - w[0].0)).collect();
        if slopes.windows(2).any(|s| s[1] < s[0] - 1e-12 * s[0].abs().max(1.0)) {
            return Err(CoreError::Domain("payoff is not convex".into()));
        }
    }
    Ok(())
}
