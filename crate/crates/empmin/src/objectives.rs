//! Objective families v(x, z) with analytic gradients, the empirical
//! objective V_n, and the importance-sampling estimator machinery.

use crate::error::{Error, Result};
use crate::measures::EmpiricalMeasure;
use crate::payoffs::{payoff_eval, BasketOptionSpec};
use nalgebra::DMatrix;

/// Exponents beyond this magnitude are rejected instead of producing
/// infinities, so line searches can detect the overflow and backtrack.
pub const EXP_GUARD: f64 = 700.0;

#[inline]
fn guarded_exp(e: f64) -> Result<f64> {
    if e.abs() > EXP_GUARD {
        Err(Error::ExponentOverflow {
            exponent: e,
            limit: EXP_GUARD,
        })
    } else {
        Ok(e.exp())
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
fn norm_sq(a: &[f64]) -> f64 {
    a.iter().map(|x| x * x).sum()
}

/// Fully connected network shape: layer sizes d_0, ..., d_K (K ≥ 1 layers)
/// and the ridge weight λ > 0.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpSpec {
    layer_sizes: Vec<usize>,
    ridge: f64,
}

impl MlpSpec {
    pub fn new(layer_sizes: Vec<usize>, ridge: f64) -> Result<Self> {
        if layer_sizes.len() < 2 {
            return Err(Error::invalid("network needs K >= 1 layers (>= 2 sizes)"));
        }
        if layer_sizes.iter().any(|&s| s == 0) {
            return Err(Error::invalid("all layer sizes must be >= 1"));
        }
        if !(ridge > 0.0) {
            return Err(Error::invalid("ridge weight must be > 0"));
        }
        Ok(MlpSpec { layer_sizes, ridge })
    }

    pub fn layer_sizes(&self) -> &[usize] {
        &self.layer_sizes
    }

    pub fn ridge(&self) -> f64 {
        self.ridge
    }

    /// Number of layers K.
    pub fn layers(&self) -> usize {
        self.layer_sizes.len() - 1
    }

    pub fn input_dim(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.layer_sizes.last().unwrap()
    }

    /// Dimension of the optimization problem: Σ d_{k-1} d_k.
    pub fn weight_dim(&self) -> usize {
        self.layer_sizes.windows(2).map(|w| w[0] * w[1]).sum()
    }
}

#[inline]
fn sigmoid(t: f64) -> f64 {
    1.0 / (1.0 + (-t).exp())
}

/// Network output ψ(x, u): K-1 sigmoid layers followed by a final linear
/// map, no bias terms. Weights are packed layer-major, each layer matrix
/// (d_k x d_{k-1}) row-major.
pub fn mlp_forward(spec: &MlpSpec, weights: &[f64], input: &[f64]) -> Result<Vec<f64>> {
    if weights.len() != spec.weight_dim() {
        return Err(Error::DimensionMismatch {
            expected: spec.weight_dim(),
            found: weights.len(),
        });
    }
    if input.len() != spec.input_dim() {
        return Err(Error::DimensionMismatch {
            expected: spec.input_dim(),
            found: input.len(),
        });
    }
    let sizes = &spec.layer_sizes;
    let k_layers = spec.layers();
    let mut act = input.to_vec();
    let mut offset = 0usize;
    for k in 0..k_layers {
        let (rows, cols) = (sizes[k + 1], sizes[k]);
        let mat = &weights[offset..offset + rows * cols];
        offset += rows * cols;
        let mut next = vec![0.0; rows];
        for (r, out) in next.iter_mut().enumerate() {
            *out = dot(&mat[r * cols..(r + 1) * cols], &act);
        }
        if k + 1 < k_layers {
            next.iter_mut().for_each(|t| *t = sigmoid(*t));
        }
        act = next;
    }
    Ok(act)
}

#[derive(Debug, Clone)]
enum FamilyKind {
    /// v(x, z) = φ²(z) exp(-<x,z> + |x|²/2) from importance sampling by
    /// translation.
    ImportanceSampling { spec: BasketOptionSpec },
    /// v(x, (u,y)) = ½|ψ(x,u) - y|² + (λ/2)|x|².
    Mlp { spec: MlpSpec },
    /// v(x, z) = |x - z|²; closed-form everything, used by the synthetic
    /// rate studies.
    Quadratic,
}

/// An objective family: the integrand v(x, z) ≥ 0 with decision dimension
/// d, noise dimension q and an analytic gradient in x.
#[derive(Debug, Clone)]
pub struct ObjectiveFamily {
    name: &'static str,
    d: usize,
    q: usize,
    kind: FamilyKind,
}

/// IS family from a basket spec: d = q = spec dimension.
pub fn make_is_family(spec: &BasketOptionSpec) -> ObjectiveFamily {
    let d = spec.dim();
    ObjectiveFamily {
        name: "importance-sampling",
        d,
        q: d,
        kind: FamilyKind::ImportanceSampling { spec: spec.clone() },
    }
}

/// NN regression family; the dataset fixes q = d_0 + d_K and is validated
/// against the network shape. Samples are concatenated (u, y) vectors.
pub fn make_nn_family(spec: &MlpSpec, dataset: &EmpiricalMeasure) -> Result<ObjectiveFamily> {
    let q = spec.input_dim() + spec.output_dim();
    if dataset.dim() != q {
        return Err(Error::DimensionMismatch {
            expected: q,
            found: dataset.dim(),
        });
    }
    Ok(ObjectiveFamily {
        name: "nn-regression",
        d: spec.weight_dim(),
        q,
        kind: FamilyKind::Mlp { spec: spec.clone() },
    })
}

/// Quadratic test family v(x, z) = |x - z|² with d = q.
pub fn make_quadratic_family(dim: usize) -> ObjectiveFamily {
    ObjectiveFamily {
        name: "quadratic",
        d: dim,
        q: dim,
        kind: FamilyKind::Quadratic,
    }
}

impl ObjectiveFamily {
    pub fn name(&self) -> &str {
        self.name
    }

    /// Decision dimension d.
    pub fn dim(&self) -> usize {
        self.d
    }

    /// Noise dimension q.
    pub fn noise_dim(&self) -> usize {
        self.q
    }

    pub fn is_importance_sampling(&self) -> bool {
        matches!(self.kind, FamilyKind::ImportanceSampling { .. })
    }

    fn check_dims(&self, x: &[f64], z: &[f64]) -> Result<()> {
        if x.len() != self.d {
            return Err(Error::DimensionMismatch {
                expected: self.d,
                found: x.len(),
            });
        }
        if z.len() != self.q {
            return Err(Error::DimensionMismatch {
                expected: self.q,
                found: z.len(),
            });
        }
        Ok(())
    }

    /// v(x, z).
    pub fn eval(&self, x: &[f64], z: &[f64]) -> Result<f64> {
        self.check_dims(x, z)?;
        match &self.kind {
            FamilyKind::ImportanceSampling { spec } => {
                let phi = payoff_eval(spec, z)?;
                let phi2 = phi * phi;
                if phi2 == 0.0 {
                    return Ok(0.0);
                }
                Ok(phi2 * guarded_exp(-dot(x, z) + norm_sq(x) / 2.0)?)
            }
            FamilyKind::Mlp { spec } => {
                let (u, y) = z.split_at(spec.input_dim());
                let psi = mlp_forward(spec, x, u)?;
                let fit: f64 = psi.iter().zip(y).map(|(p, t)| (p - t) * (p - t)).sum();
                Ok(0.5 * fit + 0.5 * spec.ridge() * norm_sq(x))
            }
            FamilyKind::Quadratic => Ok(x.iter().zip(z).map(|(a, b)| (a - b) * (a - b)).sum()),
        }
    }

    /// ∇_x v(x, z).
    pub fn grad(&self, x: &[f64], z: &[f64]) -> Result<Vec<f64>> {
        self.check_dims(x, z)?;
        match &self.kind {
            FamilyKind::ImportanceSampling { spec } => {
                let phi = payoff_eval(spec, z)?;
                let phi2 = phi * phi;
                if phi2 == 0.0 {
                    return Ok(vec![0.0; self.d]);
                }
                let w = phi2 * guarded_exp(-dot(x, z) + norm_sq(x) / 2.0)?;
                Ok(x.iter().zip(z).map(|(xi, zi)| w * (xi - zi)).collect())
            }
            FamilyKind::Mlp { spec } => {
                let (u, y) = z.split_at(spec.input_dim());
                Ok(mlp_backprop(spec, x, u, y))
            }
            FamilyKind::Quadratic => Ok(x.iter().zip(z).map(|(a, b)| 2.0 * (a - b)).collect()),
        }
    }
}

/// Reverse-mode gradient of ½|ψ(x,u) - y|² + (λ/2)|x|² in the weights.
fn mlp_backprop(spec: &MlpSpec, weights: &[f64], u: &[f64], y: &[f64]) -> Vec<f64> {
    let sizes = spec.layer_sizes();
    let k_layers = spec.layers();

    // Forward pass keeping activations (input counts as layer 0).
    let mut acts: Vec<Vec<f64>> = Vec::with_capacity(k_layers + 1);
    acts.push(u.to_vec());
    let mut offsets = Vec::with_capacity(k_layers);
    let mut offset = 0usize;
    for k in 0..k_layers {
        offsets.push(offset);
        let (rows, cols) = (sizes[k + 1], sizes[k]);
        let mat = &weights[offset..offset + rows * cols];
        offset += rows * cols;
        let prev = &acts[k];
        let mut next = vec![0.0; rows];
        for (r, out) in next.iter_mut().enumerate() {
            *out = dot(&mat[r * cols..(r + 1) * cols], prev);
        }
        if k + 1 < k_layers {
            next.iter_mut().for_each(|t| *t = sigmoid(*t));
        }
        acts.push(next);
    }

    // Ridge term contributes λ x everywhere.
    let mut grad: Vec<f64> = weights.iter().map(|w| spec.ridge() * w).collect();

    // delta = ψ - y at the output (final layer is linear).
    let mut delta: Vec<f64> = acts[k_layers].iter().zip(y).map(|(p, t)| p - t).collect();
    for k in (0..k_layers).rev() {
        let (rows, cols) = (sizes[k + 1], sizes[k]);
        let off = offsets[k];
        let prev = &acts[k];
        for r in 0..rows {
            let dr = delta[r];
            let grow = &mut grad[off + r * cols..off + (r + 1) * cols];
            for (g, &p) in grow.iter_mut().zip(prev) {
                *g += dr * p;
            }
        }
        if k > 0 {
            let mat = &weights[off..off + rows * cols];
            let mut back = vec![0.0; cols];
            for (r, &dr) in delta.iter().enumerate() {
                for (b, &m) in back.iter_mut().zip(&mat[r * cols..(r + 1) * cols]) {
                    *b += dr * m;
                }
            }
            // Chain through the sigmoid of layer k (activation a_k).
            let a = &acts[k];
            delta = back
                .iter()
                .zip(a)
                .map(|(&b, &ak)| b * ak * (1.0 - ak))
                .collect();
        }
    }
    grad
}

/// Empirical objective V_n(x) = (1/n) Σ v(x, Z_i) over a fixed sample set.
///
/// For the IS family the x-independent factor φ²(Z_i) is computed once at
/// construction and cached; it dominates the cost of rate studies. The
/// value is immutable afterwards and safe to share across threads.
#[derive(Debug, Clone)]
pub struct EmpiricalObjective {
    family: ObjectiveFamily,
    samples: EmpiricalMeasure,
    /// φ²(Z_i) for the IS family, empty otherwise.
    phi_sq: Vec<f64>,
}

impl EmpiricalObjective {
    pub fn new(family: ObjectiveFamily, samples: EmpiricalMeasure) -> Result<Self> {
        if samples.dim() != family.noise_dim() {
            return Err(Error::DimensionMismatch {
                expected: family.noise_dim(),
                found: samples.dim(),
            });
        }
        let phi_sq = match &family.kind {
            FamilyKind::ImportanceSampling { spec } => {
                let mut cache = Vec::with_capacity(samples.len());
                for z in samples.points() {
                    let phi = payoff_eval(spec, z)?;
                    cache.push(phi * phi);
                }
                cache
            }
            _ => Vec::new(),
        };
        Ok(EmpiricalObjective {
            family,
            samples,
            phi_sq,
        })
    }

    pub fn family(&self) -> &ObjectiveFamily {
        &self.family
    }

    pub fn samples(&self) -> &EmpiricalMeasure {
        &self.samples
    }

    pub fn dim(&self) -> usize {
        self.family.dim()
    }

    /// Value, gradient and (for families exposing one) Hessian in a single
    /// pass over the samples; the minimizer's inner loop.
    pub(crate) fn value_grad_hess(
        &self,
        x: &[f64],
        want_hess: bool,
    ) -> Result<(f64, Vec<f64>, Option<DMatrix<f64>>)> {
        let d = self.family.dim();
        if x.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: x.len(),
            });
        }
        let n = self.samples.len() as f64;
        match &self.family.kind {
            FamilyKind::ImportanceSampling { .. } => {
                let half_sq = norm_sq(x) / 2.0;
                let mut value = 0.0;
                let mut grad = vec![0.0; d];
                let mut hess = if want_hess {
                    Some(DMatrix::<f64>::zeros(d, d))
                } else {
                    None
                };
                let mut diff = vec![0.0; d];
                for (z, &p2) in self.samples.points().zip(&self.phi_sq) {
                    if p2 == 0.0 {
                        continue;
                    }
                    let w = p2 * guarded_exp(-dot(x, z) + half_sq)?;
                    value += w;
                    for (k, (xi, zi)) in x.iter().zip(z).enumerate() {
                        diff[k] = xi - zi;
                        grad[k] += w * diff[k];
                    }
                    if let Some(h) = hess.as_mut() {
                        for a in 0..d {
                            h[(a, a)] += w * (1.0 + diff[a] * diff[a]);
                            for b in 0..a {
                                let t = w * diff[a] * diff[b];
                                h[(a, b)] += t;
                                h[(b, a)] += t;
                            }
                        }
                    }
                }
                value /= n;
                grad.iter_mut().for_each(|g| *g /= n);
                if let Some(h) = hess.as_mut() {
                    *h /= n;
                }
                Ok((value, grad, hess))
            }
            FamilyKind::Quadratic => {
                let mut value = 0.0;
                let mut grad = vec![0.0; d];
                for z in self.samples.points() {
                    for (k, (xi, zi)) in x.iter().zip(z).enumerate() {
                        let dk = xi - zi;
                        value += dk * dk;
                        grad[k] += 2.0 * dk;
                    }
                }
                value /= n;
                grad.iter_mut().for_each(|g| *g /= n);
                let hess = want_hess.then(|| DMatrix::<f64>::identity(d, d) * 2.0);
                Ok((value, grad, hess))
            }
            FamilyKind::Mlp { .. } => {
                if want_hess {
                    return Err(Error::invalid(
                        "the NN family exposes no analytic Hessian; use gradient descent",
                    ));
                }
                let mut value = 0.0;
                let mut grad = vec![0.0; d];
                for z in self.samples.points() {
                    value += self.family.eval(x, z)?;
                    for (g, t) in grad.iter_mut().zip(self.family.grad(x, z)?) {
                        *g += t;
                    }
                }
                value /= n;
                grad.iter_mut().for_each(|g| *g /= n);
                Ok((value, grad, None))
            }
        }
    }
}

/// V_n(x): arithmetic mean of the family over the samples.
pub fn eval_empirical(obj: &EmpiricalObjective, x: &[f64]) -> Result<f64> {
    Ok(obj.value_grad_hess(x, false)?.0)
}

/// ∇V_n(x): mean of the family gradient.
pub fn grad_empirical(obj: &EmpiricalObjective, x: &[f64]) -> Result<Vec<f64>> {
    Ok(obj.value_grad_hess(x, false)?.1)
}

/// Translated importance-sampling estimator of E[φ(Z)]:
/// `(1/n) Σ φ(Z_i + x) exp(-|x|²/2 - <x, Z_i>)`, unbiased for every x.
pub fn translated_estimator(
    spec: &BasketOptionSpec,
    x: &[f64],
    samples: &EmpiricalMeasure,
) -> Result<f64> {
    let terms = translated_terms(spec, x, samples)?;
    Ok(terms.iter().sum::<f64>() / terms.len() as f64)
}

/// Population variance `(1/n) Σ (t_i - mean)²` of the per-sample translated
/// estimator terms; 0 for a single sample.
///
/// Consistency: with t = φ(Z+x) e^{-|x|²/2 - <x,Z>} a change of variables
/// gives E[t²] = E[φ²(Z+x) e^{-|x|² - 2<x,Z>}] = E[φ²(Z) e^{-<x,Z>+|x|²/2}],
/// the IS objective V(x); hence Var[t] = V(x) - E[φ(Z)]², and the empirical
/// variance approaches V_n(x) minus the squared plain Monte Carlo price on
/// the same samples at the usual 1/sqrt(n) rate.
pub fn estimator_variance(
    spec: &BasketOptionSpec,
    x: &[f64],
    samples: &EmpiricalMeasure,
) -> Result<f64> {
    let terms = translated_terms(spec, x, samples)?;
    let n = terms.len() as f64;
    let mean = terms.iter().sum::<f64>() / n;
    Ok(terms.iter().map(|t| (t - mean) * (t - mean)).sum::<f64>() / n)
}

fn translated_terms(
    spec: &BasketOptionSpec,
    x: &[f64],
    samples: &EmpiricalMeasure,
) -> Result<Vec<f64>> {
    let d = spec.dim();
    if x.len() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: x.len(),
        });
    }
    if samples.dim() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: samples.dim(),
        });
    }
    let half_sq = norm_sq(x) / 2.0;
    let mut shifted = vec![0.0; d];
    let mut terms = Vec::with_capacity(samples.len());
    for z in samples.points() {
        for (s, (zi, xi)) in shifted.iter_mut().zip(z.iter().zip(x)) {
            *s = zi + xi;
        }
        let w = guarded_exp(-half_sq - dot(x, z))?;
        terms.push(payoff_eval(spec, &shifted)? * w);
    }
    Ok(terms)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::{sample_iid, DistributionSpec};
    use crate::payoffs::OptionFlavor;
    use crate::rng::GaussianSource;

    fn atm_spec() -> BasketOptionSpec {
        BasketOptionSpec::single_asset(0.05, 1.0, 100.0, 0.2, 100.0, OptionFlavor::Call).unwrap()
    }

    fn gaussian_samples(n: usize, q: usize, seed: u64) -> EmpiricalMeasure {
        sample_iid(&DistributionSpec::standard_gaussian(q).unwrap(), n, seed).unwrap()
    }

    #[test]
    fn is_family_at_zero_is_phi_squared() {
        let spec = atm_spec();
        let fam = make_is_family(&spec);
        for z in [-1.0, 0.3, 2.0] {
            let phi = payoff_eval(&spec, &[z]).unwrap();
            assert!((fam.eval(&[0.0], &[z]).unwrap() - phi * phi).abs() < 1e-12);
        }
    }

    #[test]
    fn is_family_is_zero_where_payoff_vanishes_regardless_of_exponent() {
        let spec = atm_spec();
        let fam = make_is_family(&spec);
        // Deep OTM point: phi = 0; the huge exponent must not matter.
        assert_eq!(fam.eval(&[50.0], &[-8.0]).unwrap(), 0.0);
        assert_eq!(fam.grad(&[50.0], &[-8.0]).unwrap(), vec![0.0]);
    }

    #[test]
    fn is_family_overflow_surfaces_as_error() {
        let spec = atm_spec();
        let fam = make_is_family(&spec);
        // phi(2) > 0 and the exponent at x = 60 is |x|^2/2 - 2x = 1680.
        assert!(matches!(
            fam.eval(&[60.0], &[2.0]),
            Err(Error::ExponentOverflow { .. })
        ));
        let obj =
            EmpiricalObjective::new(fam, EmpiricalMeasure::from_points(&[vec![2.0]]).unwrap())
                .unwrap();
        assert!(matches!(
            eval_empirical(&obj, &[60.0]),
            Err(Error::ExponentOverflow { .. })
        ));
    }

    #[test]
    fn is_family_is_convex_along_random_segments() {
        let spec = atm_spec();
        let fam = make_is_family(&spec);
        let mut src = GaussianSource::new(12);
        let mut checked = 0;
        while checked < 100 {
            let z = [src.next_normal()];
            if payoff_eval(&spec, &z).unwrap() <= 0.0 {
                continue;
            }
            let x1 = [2.0 * src.next_normal()];
            let x2 = [2.0 * src.next_normal()];
            let mid = [(x1[0] + x2[0]) / 2.0];
            let lhs = fam.eval(&mid, &z).unwrap();
            let rhs = 0.5 * fam.eval(&x1, &z).unwrap() + 0.5 * fam.eval(&x2, &z).unwrap();
            assert!(lhs <= rhs + 1e-10 * rhs.abs().max(1.0));
            checked += 1;
        }
    }

    #[test]
    fn empirical_mean_properties() {
        let spec = atm_spec();
        let fam = make_is_family(&spec);
        // n = 1 equals the family value.
        let z1 = EmpiricalMeasure::from_points(&[vec![0.7]]).unwrap();
        let obj1 = EmpiricalObjective::new(fam.clone(), z1).unwrap();
        let x = [0.4];
        assert!((eval_empirical(&obj1, &x).unwrap() - fam.eval(&x, &[0.7]).unwrap()).abs() < 1e-14);

        // duplicated sample set {z, z} has the same mean as {z}.
        let z2 = EmpiricalMeasure::from_points(&[vec![0.7], vec![0.7]]).unwrap();
        let obj2 = EmpiricalObjective::new(fam.clone(), z2).unwrap();
        assert!(
            (eval_empirical(&obj1, &x).unwrap() - eval_empirical(&obj2, &x).unwrap()).abs() < 1e-14
        );

        // x = 0 collapses to the mean of phi^2.
        let zs = gaussian_samples(500, 1, 5);
        let obj = EmpiricalObjective::new(fam, zs.clone()).unwrap();
        let mean_phi2: f64 = zs
            .points()
            .map(|z| {
                let p = payoff_eval(&spec, z).unwrap();
                p * p
            })
            .sum::<f64>()
            / zs.len() as f64;
        assert!((eval_empirical(&obj, &[0.0]).unwrap() - mean_phi2).abs() < 1e-10);
    }

    #[test]
    fn family_gradients_match_finite_differences_pointwise() {
        // The family-level invariant, independent of any sample set.
        let is = make_is_family(&atm_spec());
        let quad = make_quadratic_family(2);
        let mut src = GaussianSource::new(99);
        let mut checked = 0;
        while checked < 20 {
            let z = [src.next_normal()];
            let x = [1.5 * src.next_normal()];
            if is.eval(&x, &z).unwrap() < 1e-8 {
                continue; // flat region: nothing to compare
            }
            let h = 1e-5 * (1.0 + x[0].abs());
            let fd =
                (is.eval(&[x[0] + h], &z).unwrap() - is.eval(&[x[0] - h], &z).unwrap()) / (2.0 * h);
            let g = is.grad(&x, &z).unwrap()[0];
            assert!(((g - fd) / fd.abs().max(1e-12)).abs() < 1e-5, "{g} vs {fd}");
            checked += 1;
        }
        for _ in 0..20 {
            let z = [src.next_normal(), src.next_normal()];
            let x = [src.next_normal(), src.next_normal()];
            let g = quad.grad(&x, &z).unwrap();
            for k in 0..2 {
                let mut xp = x;
                let mut xm = x;
                xp[k] += 1e-6;
                xm[k] -= 1e-6;
                let fd = (quad.eval(&xp, &z).unwrap() - quad.eval(&xm, &z).unwrap()) / 2e-6;
                assert!((g[k] - fd).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn quadratic_family_gradient_is_closed_form() {
        let fam = make_quadratic_family(2);
        let zs = gaussian_samples(64, 2, 8);
        let obj = EmpiricalObjective::new(fam, zs.clone()).unwrap();
        let x = [0.3, -1.1];
        let g = grad_empirical(&obj, &x).unwrap();
        let m = zs.mean();
        for k in 0..2 {
            assert!((g[k] - 2.0 * (x[k] - m[k])).abs() < 1e-12);
        }
    }

    #[test]
    fn mlp_forward_shapes_and_bounds() {
        // K = 1 is a pure linear map, no sigmoid.
        let lin = MlpSpec::new(vec![3, 2], 0.5).unwrap();
        assert_eq!(lin.weight_dim(), 6);
        let w = [1.0, 0.0, 2.0, 0.0, 1.0, -1.0];
        let out = mlp_forward(&lin, &w, &[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(out, vec![7.0, -1.0]);

        // Hidden activations live in (0,1): |psi| <= ||x_K||_F sqrt(d_{K-1}).
        let deep = MlpSpec::new(vec![3, 4, 2], 0.5).unwrap();
        let mut src = GaussianSource::new(3);
        for _ in 0..50 {
            let w: Vec<f64> = (0..deep.weight_dim()).map(|_| src.next_normal()).collect();
            let u: Vec<f64> = (0..3).map(|_| 2.0 * src.next_normal()).collect();
            let psi = mlp_forward(&deep, &w, &u).unwrap();
            let last = &w[12..20]; // x_K is 2 x 4
            let frob = last.iter().map(|x| x * x).sum::<f64>().sqrt();
            let norm = psi.iter().map(|x| x * x).sum::<f64>().sqrt();
            assert!(norm <= frob * 2.0 + 1e-12); // sqrt(d_{K-1}) = 2
        }
    }

    #[test]
    fn mlp_zero_weights_zero_targets_give_zero_value() {
        let spec = MlpSpec::new(vec![2, 3, 1], 0.7).unwrap();
        let dataset = EmpiricalMeasure::from_points(&[vec![0.4, -0.2, 0.0]]).unwrap();
        let fam = make_nn_family(&spec, &dataset).unwrap();
        let zeros = vec![0.0; spec.weight_dim()];
        assert_eq!(fam.eval(&zeros, dataset.point(0)).unwrap(), 0.0);
    }

    #[test]
    fn mlp_ridge_decomposes_additively_and_bounds_below() {
        let lam = 0.9;
        let spec = MlpSpec::new(vec![2, 3, 1], lam).unwrap();
        let spec0 = MlpSpec::new(vec![2, 3, 1], 1e-300).unwrap();
        let dataset = EmpiricalMeasure::from_points(&[vec![0.4, -0.2, 1.5]]).unwrap();
        let fam = make_nn_family(&spec, &dataset).unwrap();
        let fam0 = make_nn_family(&spec0, &dataset).unwrap();
        let mut src = GaussianSource::new(21);
        for _ in 0..50 {
            let w: Vec<f64> = (0..spec.weight_dim()).map(|_| src.next_normal()).collect();
            let z = dataset.point(0);
            let with = fam.eval(&w, z).unwrap();
            let without = fam0.eval(&w, z).unwrap();
            let ridge = 0.5 * lam * w.iter().map(|x| x * x).sum::<f64>();
            assert!((with - without - ridge).abs() < 1e-12);
            assert!(with >= ridge); // coercivity floor v >= (λ/2)|x|²
        }
    }

    #[test]
    fn nn_family_rejects_mismatched_dataset() {
        let spec = MlpSpec::new(vec![3, 4, 1], 0.1).unwrap();
        let bad = EmpiricalMeasure::from_points(&[vec![0.0; 3]]).unwrap();
        assert!(make_nn_family(&spec, &bad).is_err());
    }

    #[test]
    fn translated_estimator_at_zero_is_plain_monte_carlo() {
        let spec = atm_spec();
        let zs = gaussian_samples(200, 1, 77);
        let est = translated_estimator(&spec, &[0.0], &zs).unwrap();
        let plain: f64 = zs
            .points()
            .map(|z| payoff_eval(&spec, z).unwrap())
            .sum::<f64>()
            / zs.len() as f64;
        assert!((est - plain).abs() < 1e-12);
    }

    #[test]
    fn translation_weights_have_unit_mean() {
        // With phi ≡ c the estimator reduces to c times the empirical mean
        // of exp(-|x|²/2 - <x,Z>), whose expectation is 1.
        let x = [0.8];
        let zs = gaussian_samples(200_000, 1, 13);
        let mean_w: f64 = zs
            .points()
            .map(|z| (-0.5 * x[0] * x[0] - x[0] * z[0]).exp())
            .sum::<f64>()
            / zs.len() as f64;
        // Var of the weight is e^{|x|^2} - 1; 4 standard errors.
        let se = (((x[0] * x[0]).exp() - 1.0) / zs.len() as f64).sqrt();
        assert!((mean_w - 1.0).abs() < 4.0 * se, "mean {mean_w} se {se}");
    }

    #[test]
    fn estimator_variance_single_sample_is_zero() {
        let spec = atm_spec();
        let z1 = EmpiricalMeasure::from_points(&[vec![0.3]]).unwrap();
        assert_eq!(estimator_variance(&spec, &[0.5], &z1).unwrap(), 0.0);
    }

    #[test]
    fn variance_identity_consistency() {
        // estimator_variance ~ V_n(x) - price² as n grows (same samples).
        let spec = atm_spec();
        let fam = make_is_family(&spec);
        let x = [0.7];
        for (n, seed) in [(10_000usize, 4u64), (100_000, 5)] {
            let zs = gaussian_samples(n, 1, seed);
            let var = estimator_variance(&spec, &x, &zs).unwrap();
            let obj = EmpiricalObjective::new(fam.clone(), zs.clone()).unwrap();
            let vn = eval_empirical(&obj, &x).unwrap();
            let price: f64 = zs
                .points()
                .map(|z| payoff_eval(&spec, z).unwrap())
                .sum::<f64>()
                / n as f64;
            let scale = vn + price * price;
            let tol = 5.0 / (n as f64).sqrt() * scale;
            assert!(
                (var - (vn - price * price)).abs() < tol,
                "n={n}: var {var} vs {} (tol {tol})",
                vn - price * price
            );
        }
    }

    #[test]
    fn estimator_dimension_checks() {
        let spec = atm_spec();
        let zs = gaussian_samples(10, 1, 1);
        assert!(translated_estimator(&spec, &[0.0, 0.0], &zs).is_err());
        let zs2 = gaussian_samples(10, 2, 1);
        assert!(translated_estimator(&spec, &[0.0], &zs2).is_err());
    }
}
