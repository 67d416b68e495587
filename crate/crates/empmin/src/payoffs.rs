//! Black-Scholes basket Call/Put payoffs, a 1-D closed-form pricing oracle
//! and a numeric probe of the exponential growth condition on the payoff.

use crate::error::{Error, Result};
use crate::quadrature::{normal_cdf, GaussianSplitRule};
use crate::rng::GaussianSource;
use nalgebra::DMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OptionFlavor {
    Call,
    Put,
}

/// Parameters of a basket option on a d-asset Black-Scholes model.
///
/// The basket value against a standard normal z is
/// `Σ_i a_i s0_i exp[(r - Σ_j σ_ij²/2) T + sqrt(T) Σ_j σ_ij z_j]`;
/// note the per-entry squares `σ_ij²` in the drift correction (row-wise
/// squared entries, not the row norm — other conventions differ).
#[derive(Debug, Clone, PartialEq)]
pub struct BasketOptionSpec {
    rate: f64,
    maturity: f64,
    strike: f64,
    /// d x d row-major volatility matrix, symmetric positive definite.
    sigma: Vec<f64>,
    spot: Vec<f64>,
    weights: Vec<f64>,
    flavor: OptionFlavor,
}

impl BasketOptionSpec {
    pub fn new(
        rate: f64,
        maturity: f64,
        strike: f64,
        sigma: Vec<f64>,
        spot: Vec<f64>,
        weights: Vec<f64>,
        flavor: OptionFlavor,
    ) -> Result<Self> {
        let d = spot.len();
        if d == 0 {
            return Err(Error::invalid("basket needs at least one asset"));
        }
        if weights.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: weights.len(),
            });
        }
        if sigma.len() != d * d {
            return Err(Error::DimensionMismatch {
                expected: d * d,
                found: sigma.len(),
            });
        }
        if !(maturity >= 0.0) || !(strike >= 0.0) {
            return Err(Error::invalid("maturity and strike must be nonnegative"));
        }
        if !rate.is_finite()
            || sigma.iter().any(|x| !x.is_finite())
            || spot.iter().any(|x| !x.is_finite())
            || weights.iter().any(|x| !x.is_finite())
        {
            return Err(Error::invalid("basket parameters must be finite"));
        }
        for i in 0..d {
            for j in 0..i {
                if (sigma[i * d + j] - sigma[j * d + i]).abs() > 1e-12 {
                    return Err(Error::invalid(format!(
                        "sigma is not symmetric at ({i},{j}) within 1e-12"
                    )));
                }
            }
        }
        let m = DMatrix::from_row_slice(d, d, &sigma);
        if m.cholesky().is_none() {
            return Err(Error::invalid("sigma must be positive definite"));
        }
        Ok(BasketOptionSpec {
            rate,
            maturity,
            strike,
            sigma,
            spot,
            weights,
            flavor,
        })
    }

    /// 1-D convenience constructor.
    pub fn single_asset(
        rate: f64,
        maturity: f64,
        strike: f64,
        sigma: f64,
        spot: f64,
        flavor: OptionFlavor,
    ) -> Result<Self> {
        Self::new(
            rate,
            maturity,
            strike,
            vec![sigma],
            vec![spot],
            vec![1.0],
            flavor,
        )
    }

    pub fn dim(&self) -> usize {
        self.spot.len()
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }

    pub fn maturity(&self) -> f64 {
        self.maturity
    }

    pub fn strike(&self) -> f64 {
        self.strike
    }

    pub fn sigma(&self) -> &[f64] {
        &self.sigma
    }

    pub fn spot(&self) -> &[f64] {
        &self.spot
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn flavor(&self) -> OptionFlavor {
        self.flavor
    }

    /// Basket value before the positive part.
    fn basket_value(&self, z: &[f64]) -> f64 {
        let d = self.dim();
        let mut total = 0.0;
        for i in 0..d {
            let row = &self.sigma[i * d..(i + 1) * d];
            let drift_corr: f64 = row.iter().map(|s| s * s).sum::<f64>() / 2.0;
            let diffusion: f64 = row.iter().zip(z).map(|(s, zj)| s * zj).sum();
            let log_growth =
                (self.rate - drift_corr) * self.maturity + self.maturity.sqrt() * diffusion;
            total += self.weights[i] * self.spot[i] * log_growth.exp();
        }
        total
    }
}

/// Payoff φ(z): `(basket - K)_+` for calls, `(K - basket)_+` for puts.
pub fn payoff_eval(spec: &BasketOptionSpec, z: &[f64]) -> Result<f64> {
    if z.len() != spec.dim() {
        return Err(Error::DimensionMismatch {
            expected: spec.dim(),
            found: z.len(),
        });
    }
    if z.iter().any(|x| !x.is_finite()) {
        return Err(Error::invalid("payoff argument must be finite"));
    }
    let basket = spec.basket_value(z);
    Ok(match spec.flavor {
        OptionFlavor::Call => (basket - spec.strike).max(0.0),
        OptionFlavor::Put => (spec.strike - basket).max(0.0),
    })
}

/// Closed-form undiscounted expectation E[φ(Z)], Z ~ N(0,1), for the 1-D
/// payoff with unit basket weight.
///
/// With F = s0 e^{rT}: call = F Φ(d1) - K Φ(d2), put = K Φ(-d2) - F Φ(-d1),
/// d1 = [ln(s0/K) + (r + σ²/2)T] / (σ√T), d2 = d1 - σ√T. No discount factor
/// is applied: the quantity priced is the plain expectation of the payoff
/// as written.
pub fn bs_price_1d(spec: &BasketOptionSpec) -> Result<f64> {
    if spec.dim() != 1 {
        return Err(Error::UnsupportedDimension {
            dim: spec.dim(),
            context: "bs_price_1d requires a single asset",
        });
    }
    if (spec.weights[0] - 1.0).abs() > 1e-12 {
        return Err(Error::invalid("bs_price_1d requires basket weight a = 1"));
    }
    let sigma = spec.sigma[0];
    if !(spec.maturity > 0.0) || !(spec.strike > 0.0) || !(sigma > 0.0) {
        return Err(Error::invalid(
            "bs_price_1d requires T > 0, K > 0, sigma > 0",
        ));
    }
    let (s0, k, r, t) = (spec.spot[0], spec.strike, spec.rate, spec.maturity);
    let vol = sigma * t.sqrt();
    let forward = s0 * (r * t).exp();
    let d1 = ((s0 / k).ln() + (r + sigma * sigma / 2.0) * t) / vol;
    let d2 = d1 - vol;
    Ok(match spec.flavor {
        OptionFlavor::Call => forward * normal_cdf(d1) - k * normal_cdf(d2),
        OptionFlavor::Put => k * normal_cdf(-d2) - forward * normal_cdf(-d1),
    })
}

/// The z where the 1-D payoff kinks (basket equals strike), if any.
pub fn payoff_kink_1d(spec: &BasketOptionSpec) -> Option<f64> {
    if spec.dim() != 1 || spec.strike <= 0.0 {
        return None;
    }
    let scale = spec.weights[0] * spec.spot[0];
    let sigma = spec.sigma[0];
    if scale <= 0.0 || sigma * spec.maturity.sqrt() <= 0.0 {
        return None;
    }
    let drift = (spec.rate - sigma * sigma / 2.0) * spec.maturity;
    Some(((spec.strike / scale).ln() - drift) / (sigma * spec.maturity.sqrt()))
}

/// Numeric quadrature of E[φ(Z)] for the 1-D payoff: composite Gaussian
/// rule split at the payoff kink, `nodes_per_panel` Legendre nodes per
/// panel (total node count from [`GaussianSplitRule`]'s fixed geometry).
/// Independent of the Φ-based closed form; serves as its oracle.
pub fn quadrature_price_1d(spec: &BasketOptionSpec, nodes_per_panel: usize) -> Result<f64> {
    if spec.dim() != 1 {
        return Err(Error::UnsupportedDimension {
            dim: spec.dim(),
            context: "quadrature_price_1d requires a single asset",
        });
    }
    let breakpoints: Vec<f64> = payoff_kink_1d(spec).into_iter().collect();
    let rule = GaussianSplitRule::new(&breakpoints, nodes_per_panel)?;
    let mut err = None;
    let price = rule.expect(|z| match payoff_eval(spec, &[z]) {
        Ok(v) => v,
        Err(e) => {
            err = Some(e);
            0.0
        }
    });
    match err {
        Some(e) => Err(e),
        None => Ok(price),
    }
}

/// Result of probing `|φ(z)| ≤ A e^{B|z|}` numerically.
///
/// A violation ≤ 0 means the fitted bound held on every held-out probe
/// point (values and finite-difference Lipschitz ratios alike).
#[derive(Debug, Clone)]
pub struct GrowthProbeReport {
    pub fitted_a: f64,
    pub fitted_b: f64,
    /// Largest relative excess of |φ| (or of a local Lipschitz ratio) over
    /// the fitted envelope on the held-out set; nonpositive when the bound
    /// held everywhere.
    pub max_violation: f64,
    pub radii: Vec<f64>,
}

/// Samples the payoff on spheres of the given radii, fits the exponential
/// envelope and reports held-out violations.
///
/// The slope B comes from least squares of log|φ| against |z| over probe
/// points with φ > 1e-12 (clamped at 0); A is then the smallest constant
/// making the bound hold on the fit set. A held-out sample (fresh stream,
/// radii midpoints included) checks both |φ| and central-difference
/// Lipschitz ratios against A e^{B|z|}.
pub fn growth_probe(
    spec: &BasketOptionSpec,
    radii: &[f64],
    samples_per_radius: usize,
    seed: u64,
) -> Result<GrowthProbeReport> {
    if radii.is_empty() {
        return Err(Error::invalid("growth probe needs at least one radius"));
    }
    if radii.windows(2).any(|w| w[1] <= w[0]) || radii[0] <= 0.0 {
        return Err(Error::invalid("radii must be positive and increasing"));
    }
    if samples_per_radius == 0 {
        return Err(Error::invalid("samples_per_radius must be >= 1"));
    }
    let d = spec.dim();

    let sphere_points = |radii: &[f64], seed: u64| -> Result<Vec<Vec<f64>>> {
        let mut src = GaussianSource::new(seed);
        let mut pts = Vec::new();
        for &r in radii {
            for _ in 0..samples_per_radius {
                let mut dir: Vec<f64> = (0..d).map(|_| src.next_normal()).collect();
                let norm = dir.iter().map(|x| x * x).sum::<f64>().sqrt();
                if norm < 1e-12 {
                    dir = vec![0.0; d];
                    dir[0] = 1.0;
                }
                let norm = dir.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-12);
                pts.push(dir.iter().map(|x| r * x / norm).collect());
            }
        }
        Ok(pts)
    };

    // Fit set.
    let fit_points = sphere_points(radii, seed)?;
    let mut pairs: Vec<(f64, f64)> = Vec::new(); // (|z|, log|phi|)
    for p in &fit_points {
        let v = payoff_eval(spec, p)?;
        if v > 1e-12 {
            let norm = p.iter().map(|x| x * x).sum::<f64>().sqrt();
            pairs.push((norm, v.ln()));
        }
    }
    if pairs.len() < 2 {
        return Err(Error::invalid(
            "growth probe found fewer than two points with positive payoff",
        ));
    }
    let n = pairs.len() as f64;
    let sx: f64 = pairs.iter().map(|p| p.0).sum();
    let sy: f64 = pairs.iter().map(|p| p.1).sum();
    let sxx: f64 = pairs.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = pairs.iter().map(|p| p.0 * p.1).sum();
    let denom = n * sxx - sx * sx;
    let slope = if denom.abs() < 1e-30 {
        0.0
    } else {
        (n * sxy - sx * sy) / denom
    };
    let fitted_b = slope.max(0.0);
    // Minimal A for this B on the fit set.
    let log_a = pairs
        .iter()
        .map(|&(r, logv)| logv - fitted_b * r)
        .fold(f64::NEG_INFINITY, f64::max);
    let fitted_a = log_a.exp();

    // Held-out set: fresh stream, original radii plus midpoints.
    let mut held_radii = radii.to_vec();
    for w in radii.windows(2) {
        held_radii.push(0.5 * (w[0] + w[1]));
    }
    held_radii.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let held = sphere_points(&held_radii, seed ^ 0x9E37_79B9_7F4A_7C15)?;

    let envelope = |r: f64| fitted_a * (fitted_b * r).exp();
    let mut max_violation = f64::NEG_INFINITY;
    let mut dir_src = GaussianSource::new(seed ^ 0x5851_F42D_4C95_7F2D);
    for p in &held {
        let r = p.iter().map(|x| x * x).sum::<f64>().sqrt();
        let bound = envelope(r);
        let v = payoff_eval(spec, p)?;
        max_violation = max_violation.max((v - bound) / bound);

        // Local Lipschitz ratio by central differences along a random
        // direction, checked against the envelope at the outer radius.
        let mut dir: Vec<f64> = (0..d).map(|_| dir_src.next_normal()).collect();
        let norm = dir.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-12);
        dir.iter_mut().for_each(|x| *x /= norm);
        let h = 1e-5 * (1.0 + r);
        let plus: Vec<f64> = p.iter().zip(&dir).map(|(a, b)| a + h * b).collect();
        let minus: Vec<f64> = p.iter().zip(&dir).map(|(a, b)| a - h * b).collect();
        let ratio = (payoff_eval(spec, &plus)? - payoff_eval(spec, &minus)?).abs() / (2.0 * h);
        let lip_bound = envelope(r + h);
        max_violation = max_violation.max((ratio - lip_bound) / lip_bound);
    }

    Ok(GrowthProbeReport {
        fitted_a,
        fitted_b,
        max_violation,
        radii: radii.to_vec(),
    })
}
