//! Closed forms for jointly Gaussian models under law-invariant coherent
//! utilities, where `u(xi) = m - gamma * sigma` for Gaussian `xi`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};
use statrs::distribution::{Continuous, ContinuousCDF, Normal};

use crate::error::{CoreError, Result, Violation, ViolationKind};
use crate::spec::RiskSpec;

/// `phi(Phi^{-1}(lambda)) / lambda`, the Gaussian tail factor of Tail V@R.
fn tail_gamma(lambda: f64) -> Result<f64> {
    if !(lambda > 0.0 && lambda <= 1.0) {
        return Err(CoreError::Domain(format!(
            "gamma needs a tail order in (0, 1], got {lambda}"
        )));
    }
    if lambda == 1.0 {
        return Ok(0.0);
    }
    let n = Normal::new(0.0, 1.0).expect("standard normal");
    Ok(n.pdf(n.inverse_cdf(lambda)) / lambda)
}

/// Factor `gamma` with `u(xi) = E xi - gamma * sd(xi)` for Gaussian `xi`.
///
/// Mixtures average the factors; a convex hull takes the largest one since
/// its utility is the smallest member utility. Polytopes are not law
/// invariant and are rejected.
pub fn gamma_of(spec: &RiskSpec) -> Result<f64> {
    match spec {
        RiskSpec::TailVar { lambda } => tail_gamma(*lambda),
        RiskSpec::WeightedVar { atoms } => {
            atoms.iter().map(|a| Ok(a.weight * tail_gamma(a.lambda)?)).sum()
        }
        RiskSpec::Mixture { terms } => terms.iter().map(|t| Ok(t.weight * gamma_of(&t.spec)?)).sum(),
        RiskSpec::ConvHull { specs } => {
            specs.iter().map(gamma_of).try_fold(0.0f64, |m, g| Ok(m.max(g?)))
        }
        RiskSpec::Polytope { .. } => Err(CoreError::Domain(
            "a polytope of densities is not law invariant; supply gamma directly".into(),
        )),
    }
}

/// Spectral pseudo-inverse of a symmetric positive semidefinite matrix.
#[derive(Debug, Clone)]
struct PseudoInverse {
    pinv: DMatrix<f64>,
    cutoff: f64,
    eig: SymmetricEigen<f64, nalgebra::Dyn>,
}

impl PseudoInverse {
    fn new(c: &DMatrix<f64>) -> Result<Self> {
        let eig = SymmetricEigen::new(c.clone());
        let top = eig.eigenvalues.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let cutoff = 1e-10 * top.max(f64::MIN_POSITIVE);
        if let Some(v) = eig.eigenvalues.iter().find(|v| **v < -cutoff.max(1e-10)) {
            return Err(CoreError::Model(format!("covariance has negative eigenvalue {v}")));
        }
        let d = c.nrows();
        let mut pinv = DMatrix::zeros(d, d);
        for (k, &l) in eig.eigenvalues.iter().enumerate() {
            if l > cutoff {
                let v = eig.eigenvectors.column(k);
                pinv += (v * v.transpose()) / l;
            }
        }
        Ok(Self { pinv, cutoff, eig })
    }

    fn apply(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.pinv * x
    }

    /// Norm of the part of `x` outside the image of the matrix.
    fn off_image(&self, x: &DVector<f64>) -> f64 {
        let mut r = x.clone();
        for (k, &l) in self.eig.eigenvalues.iter().enumerate() {
            if l > self.cutoff {
                let v = self.eig.eigenvectors.column(k);
                r -= v * v.dot(x);
            }
        }
        r.norm()
    }
}

fn square(cov: &[Vec<f64>], d: usize, what: &str) -> Result<DMatrix<f64>> {
    if cov.len() != d || cov.iter().any(|r| r.len() != d) {
        return Err(CoreError::Structural(format!("{what} must be {d}x{d}")));
    }
    let m = DMatrix::from_fn(d, d, |i, j| cov[i][j]);
    if m.iter().any(|v| !v.is_finite()) {
        return Err(CoreError::Structural(format!("{what} has non-finite entries")));
    }
    let scale = m.iter().fold(1.0f64, |a, v| a.max(v.abs()));
    for i in 0..d {
        for j in 0..i {
            if (m[(i, j)] - m[(j, i)]).abs() > 1e-10 * scale {
                return Err(CoreError::Model(format!("{what} is not symmetric")));
            }
        }
    }
    Ok(m)
}

/// Result of the Gaussian allocation.
#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum GaussianAllocation {
    Unique { allocation: Vec<f64> },
    /// `Ce = 0`: every point of the generator
    /// `a + {x in image C : <x, C^+ x> <= gamma^2}` is an allocation.
    Ellipsoid { center: Vec<f64>, cov: Vec<Vec<f64>>, gamma: f64 },
}

/// `a - gamma <e, Ce>^{-1/2} Ce`.
pub fn gaussian_allocate(a: &[f64], cov: &[Vec<f64>], gamma: f64) -> Result<GaussianAllocation> {
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(CoreError::Domain(format!("gamma must be positive, got {gamma}")));
    }
    let d = a.len();
    let c = square(cov, d, "covariance")?;
    PseudoInverse::new(&c)?;
    let ce = &c * DVector::from_element(d, 1.0);
    let ece: f64 = ce.sum();
    let scale = c.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    if ece <= 1e-12 * scale * d as f64 {
        return Ok(GaussianAllocation::Ellipsoid { center: a.to_vec(), cov: cov.to_vec(), gamma });
    }
    let k = gamma / ece.sqrt();
    Ok(GaussianAllocation::Unique {
        allocation: a.iter().zip(ce.iter()).map(|(a, ce)| a - k * ce).collect(),
    })
}

/// `u^c(X; Y) = E X - gamma cov(X, Y) / sd(Y)`, checked against the
/// equivalent form `E X + (u(X) - E X) corr(X, Y)`.
pub fn gaussian_contribution(
    mean_x: f64,
    mean_y: f64,
    cov_xy: f64,
    var_x: f64,
    var_y: f64,
    gamma: f64,
) -> Result<f64> {
    let _ = mean_y;
    if !(var_x > 0.0 && var_y > 0.0) {
        return Err(CoreError::Domain(format!(
            "variances must be positive, got {var_x} and {var_y}"
        )));
    }
    if !(gamma >= 0.0 && gamma.is_finite()) {
        return Err(CoreError::Domain(format!("gamma must be nonnegative, got {gamma}")));
    }
    let sx = var_x.sqrt();
    let sy = var_y.sqrt();
    let corr = cov_xy / (sx * sy);
    if corr.abs() > 1.0 + 1e-12 {
        return Err(CoreError::Domain(format!("correlation {corr} outside [-1, 1]")));
    }
    let direct = mean_x - gamma * cov_xy / sy;
    let u_x = mean_x - gamma * sx;
    let via_corr = mean_x + (u_x - mean_x) * corr;
    let scale = mean_x.abs() + gamma * sx + 1.0;
    if (direct - via_corr).abs() > 1e-12 * scale {
        return Err(CoreError::Numerical(format!(
            "contribution forms disagree: {direct} vs {via_corr}"
        )));
    }
    Ok(direct)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianClaim {
    pub mean: f64,
    /// `cov(S1, F)`.
    pub cov_with_assets: Vec<f64>,
    pub var: f64,
}

/// Gaussian `(S1, F)` with mean `a`, covariance `C`, prices `S0` and the
/// utility factor `gamma`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianMarket {
    pub mean: Vec<f64>,
    pub cov: Vec<Vec<f64>>,
    pub s0: Vec<f64>,
    pub claim: GaussianClaim,
    pub gamma: f64,
}

/// Decomposition `F = <b, S1 - a> + E F + F~` with `F~` independent of `S1`.
#[derive(Debug, Clone, Serialize)]
pub struct GaussianDecomposition {
    pub b: Vec<f64>,
    /// `var F~`.
    pub sigma2: f64,
    /// `<S0 - a, C^+ (S0 - a)>`; infinite if `S0 - a` leaves the image of `C`.
    pub quad: f64,
    /// `<b, S0 - a> + E F`.
    pub center: f64,
    /// `C^+ (S0 - a)`.
    pub tilt: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct GaussianInterval {
    pub lo: f64,
    pub hi: f64,
    pub center: f64,
    pub alpha: f64,
    /// Effective factor: `gamma`, or `gamma R / (1 + R)` for RAROC pricing.
    pub gamma: f64,
    pub sigma2: f64,
}

impl GaussianMarket {
    pub fn validate(&self) -> Result<()> {
        let d = self.mean.len();
        if self.s0.len() != d || self.claim.cov_with_assets.len() != d {
            return Err(CoreError::Structural(format!(
                "mean, s0 and claim covariances must all have length {d}"
            )));
        }
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return Err(CoreError::Domain(format!("gamma must be positive, got {}", self.gamma)));
        }
        let mut joint = square(&self.cov, d, "covariance")?.resize(d + 1, d + 1, 0.0);
        for i in 0..d {
            joint[(i, d)] = self.claim.cov_with_assets[i];
            joint[(d, i)] = self.claim.cov_with_assets[i];
        }
        joint[(d, d)] = self.claim.var;
        PseudoInverse::new(&joint)
            .map_err(|e| CoreError::Model(format!("joint covariance of assets and claim: {e}")))?;
        Ok(())
    }

    pub fn decompose(&self) -> Result<GaussianDecomposition> {
        self.validate()?;
        let d = self.mean.len();
        let c = square(&self.cov, d, "covariance")?;
        let pinv = PseudoInverse::new(&c)?;
        let cvec = DVector::from_column_slice(&self.claim.cov_with_assets);
        let scale = 1.0 + c.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if pinv.off_image(&cvec) > 1e-9 * scale {
            return Err(CoreError::Model(
                "claim covariance is not in the image of the asset covariance".into(),
            ));
        }
        let b = pinv.apply(&cvec);
        let explained = b.dot(&cvec);
        let mut sigma2 = self.claim.var - explained;
        if sigma2 < -1e-10 * (1.0 + self.claim.var.abs()) {
            return Err(CoreError::Model(format!("residual claim variance {sigma2} is negative")));
        }
        // Cancellation leaves a few ulps behind when F is replicable.
        if sigma2 <= 1e-12 * (self.claim.var.abs() + explained.abs()) {
            sigma2 = 0.0;
        }
        let shift = DVector::from_iterator(d, self.s0.iter().zip(&self.mean).map(|(s, a)| s - a));
        let tilt = pinv.apply(&shift);
        let quad = if pinv.off_image(&shift) > 1e-9 * (1.0 + shift.norm()) {
            f64::INFINITY
        } else {
            shift.dot(&tilt)
        };
        let center = b.dot(&shift) + self.claim.mean;
        Ok(GaussianDecomposition {
            b: b.iter().copied().collect(),
            sigma2,
            quad,
            center,
            tilt: tilt.iter().copied().collect(),
        })
    }
}

/// Fair price interval `center ± alpha`, with
/// `alpha = (sigma^2 gamma^2 - sigma^2 <S0 - a, C^+(S0 - a)>)^{1/2}`;
/// `big_r` replaces `gamma` by `gamma R / (1 + R)`.
pub fn gaussian_ngd_interval(mkt: &GaussianMarket, big_r: Option<f64>) -> Result<GaussianInterval> {
    let dec = mkt.decompose()?;
    let gamma = match big_r {
        None => mkt.gamma,
        Some(r) if r.is_finite() && r >= 0.0 => mkt.gamma * r / (1.0 + r),
        Some(r) => return Err(CoreError::Domain(format!("RAROC limit {r} must be nonnegative"))),
    };
    let g2 = gamma * gamma;
    if dec.quad > g2 * (1.0 + 1e-12) + 1e-15 {
        // h = -C^+(S0 - a) earns u = quad - gamma sqrt(quad) > 0.
        let portfolio: Vec<f64> = dec.tilt.iter().map(|v| -v).collect();
        let value = if dec.quad.is_finite() { dec.quad - gamma * dec.quad.sqrt() } else { f64::INFINITY };
        return Err(CoreError::Violated(Box::new(Violation {
            portfolio,
            value,
            kind: ViolationKind::GoodDeal,
        })));
    }
    let alpha = (dec.sigma2 * (g2 - dec.quad)).max(0.0).sqrt();
    Ok(GaussianInterval {
        lo: dec.center - alpha,
        hi: dec.center + alpha,
        center: dec.center,
        alpha,
        gamma,
        sigma2: dec.sigma2,
    })
}

/// No-arbitrage interval: the whole line when the claim carries independent
/// noise, otherwise the replication price.
pub fn gaussian_na_interval(mkt: &GaussianMarket) -> Result<(f64, f64)> {
    let dec = mkt.decompose()?;
    if dec.sigma2 > 0.0 {
        Ok((f64::NEG_INFINITY, f64::INFINITY))
    } else {
        Ok((dec.center, dec.center))
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct GaussianHedges {
    pub super_h: Vec<f64>,
    pub sub_h: Vec<f64>,
}

/// `H_upper = b - sigma^2 alpha^{-1} C^+(S0 - a)`,
/// `H_lower = -b - sigma^2 alpha^{-1} C^+(S0 - a)`.
pub fn gaussian_hedges(mkt: &GaussianMarket) -> Result<GaussianHedges> {
    let dec = mkt.decompose()?;
    let iv = gaussian_ngd_interval(mkt, None)?;
    let correction: Vec<f64> = if dec.sigma2 == 0.0 {
        vec![0.0; dec.b.len()]
    } else {
        if iv.alpha <= 1e-12 * (1.0 + dec.sigma2.sqrt() * mkt.gamma) {
            return Err(CoreError::Domain(
                "prices sit on the no-good-deal boundary (alpha = 0); hedges are undefined".into(),
            ));
        }
        dec.tilt.iter().map(|t| dec.sigma2 / iv.alpha * t).collect()
    };
    Ok(GaussianHedges {
        super_h: dec.b.iter().zip(&correction).map(|(b, c)| b - c).collect(),
        sub_h: dec.b.iter().zip(&correction).map(|(b, c)| -b - c).collect(),
    })
}
