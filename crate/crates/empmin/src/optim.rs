//! Deterministic minimization of empirical objectives: damped Newton for
//! families with an analytic Hessian, gradient descent with Armijo
//! backtracking otherwise, both with optional seeded multistart.

use crate::error::{Error, Result};
use crate::objectives::EmpiricalObjective;
use crate::rng::{seeded_rng, splitmix64, uniform_f64};
use nalgebra::{DMatrix, DVector};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Newton,
    GradientDescent,
}

/// Options for [`minimize`]. Defaults: 500 iterations, gradient tolerance
/// 1e-8, Newton, Armijo (c = 1e-4, shrink 0.5, initial step 1), single
/// start. `start_seed` drives the uniform multistart draws so identical
/// options reproduce identical results bit for bit.
#[derive(Debug, Clone, PartialEq)]
pub struct MinimizeOptions {
    pub max_iters: usize,
    pub grad_tol: f64,
    pub method: Method,
    pub armijo_c: f64,
    pub armijo_shrink: f64,
    pub initial_step: f64,
    pub multistart: usize,
    pub start_box_radius: f64,
    pub start_seed: u64,
    pub record_trace: bool,
}

impl Default for MinimizeOptions {
    fn default() -> Self {
        MinimizeOptions {
            max_iters: 500,
            grad_tol: 1e-8,
            method: Method::Newton,
            armijo_c: 1e-4,
            armijo_shrink: 0.5,
            initial_step: 1.0,
            multistart: 1,
            start_box_radius: 1.0,
            start_seed: 0,
            record_trace: true,
        }
    }
}

impl MinimizeOptions {
    pub fn gradient_descent() -> Self {
        MinimizeOptions {
            method: Method::GradientDescent,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_iters == 0 {
            return Err(Error::invalid("max_iters must be >= 1"));
        }
        if !(self.grad_tol > 0.0) {
            return Err(Error::invalid("grad_tol must be > 0"));
        }
        if !(self.armijo_c > 0.0 && self.armijo_c < 1.0) {
            return Err(Error::invalid("armijo c must be in (0,1)"));
        }
        if !(self.armijo_shrink > 0.0 && self.armijo_shrink < 1.0) {
            return Err(Error::invalid("armijo shrink must be in (0,1)"));
        }
        if !(self.initial_step > 0.0) {
            return Err(Error::invalid("initial step must be > 0"));
        }
        if self.multistart == 0 {
            return Err(Error::invalid("multistart count must be >= 1"));
        }
        if !(self.start_box_radius > 0.0) {
            return Err(Error::invalid("start box radius must be > 0"));
        }
        Ok(())
    }
}

/// Outcome of a minimization run. `converged` means the gradient norm
/// reached the tolerance; `value` is re-evaluated at `x_star`.
#[derive(Debug, Clone, PartialEq)]
pub struct MinimizeResult {
    pub x_star: Vec<f64>,
    pub value: f64,
    pub grad_norm: f64,
    pub iters: usize,
    pub converged: bool,
    pub trace: Option<Vec<(usize, f64)>>,
}

/// Anything the descent loop can drive: value, gradient, optional analytic
/// Hessian. Implemented by empirical objectives and by the experiments
/// module's quadrature objectives.
pub(crate) trait SmoothObjective {
    fn dim(&self) -> usize;
    fn value(&self, x: &[f64]) -> Result<f64>;
    fn value_grad(&self, x: &[f64]) -> Result<(f64, Vec<f64>)>;
    /// None when the family has no analytic Hessian.
    fn value_grad_hess(&self, x: &[f64]) -> Option<Result<(f64, Vec<f64>, DMatrix<f64>)>>;
}

impl SmoothObjective for EmpiricalObjective {
    fn dim(&self) -> usize {
        self.dim()
    }

    fn value(&self, x: &[f64]) -> Result<f64> {
        Ok(self.value_grad_hess(x, false)?.0)
    }

    fn value_grad(&self, x: &[f64]) -> Result<(f64, Vec<f64>)> {
        let (v, g, _) = self.value_grad_hess(x, false)?;
        Ok((v, g))
    }

    fn value_grad_hess(&self, x: &[f64]) -> Option<Result<(f64, Vec<f64>, DMatrix<f64>)>> {
        match EmpiricalObjective::value_grad_hess(self, x, true) {
            Ok((v, g, Some(h))) => Some(Ok((v, g, h))),
            Ok((_, _, None)) => None,
            Err(Error::Invalid(_)) => None, // family without Hessian
            Err(e) => Some(Err(e)),
        }
    }
}

/// Minimizes V_n from `x0`. With `multistart > 1` the run is repeated from
/// seeded uniform starts in the box of radius `start_box_radius` (start 0
/// is `x0` itself) and the best value wins; ties within 1e-12 go to the
/// lowest start index. Line-search overflows shrink the step rather than
/// failing; a non-finite `x0` is rejected.
pub fn minimize(
    obj: &EmpiricalObjective,
    x0: &[f64],
    opts: &MinimizeOptions,
) -> Result<MinimizeResult> {
    minimize_smooth(obj, x0, opts)
}

pub(crate) fn minimize_smooth<O: SmoothObjective + ?Sized>(
    obj: &O,
    x0: &[f64],
    opts: &MinimizeOptions,
) -> Result<MinimizeResult> {
    opts.validate()?;
    let d = obj.dim();
    if x0.len() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: x0.len(),
        });
    }
    if x0.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("x0 must be finite"));
    }

    let mut best: Option<MinimizeResult> = None;
    let mut rng = seeded_rng(splitmix64(opts.start_seed));
    let mut last_err = None;
    for start_idx in 0..opts.multistart {
        let start: Vec<f64> = if start_idx == 0 {
            x0.to_vec()
        } else {
            (0..d)
                .map(|_| opts.start_box_radius * (2.0 * uniform_f64(&mut rng) - 1.0))
                .collect()
        };
        match run_single(obj, &start, opts) {
            Ok(res) => {
                let better = match &best {
                    None => true,
                    Some(b) => res.value < b.value - 1e-12,
                };
                if better {
                    best = Some(res);
                }
            }
            Err(e) => last_err = Some(e), // e.g. overflow right at a random start
        }
    }
    match best {
        Some(res) => Ok(res),
        None => Err(last_err.unwrap_or_else(|| Error::invalid("no start produced a result"))),
    }
}

fn run_single<O: SmoothObjective + ?Sized>(
    obj: &O,
    start: &[f64],
    opts: &MinimizeOptions,
) -> Result<MinimizeResult> {
    // One pass per iterate: value + gradient, plus the Hessian under Newton.
    let eval_state = |x: &[f64]| -> Result<(f64, Vec<f64>, Option<DMatrix<f64>>)> {
        match opts.method {
            Method::GradientDescent => {
                let (v, g) = obj.value_grad(x)?;
                Ok((v, g, None))
            }
            Method::Newton => match obj.value_grad_hess(x) {
                None => Err(Error::invalid(
                    "Newton requires a family with an analytic Hessian",
                )),
                Some(res) => {
                    let (v, g, h) = res?;
                    Ok((v, g, Some(h)))
                }
            },
        }
    };

    let mut x = start.to_vec();
    let (mut fx, mut grad, mut hess) = eval_state(&x)?;
    let mut trace = opts.record_trace.then(|| vec![(0usize, fx)]);
    let mut iters = 0usize;
    let mut grad_norm = norm(&grad);

    while iters < opts.max_iters {
        if grad_norm <= opts.grad_tol {
            break;
        }
        // Guarantee descent; fall back to steepest descent otherwise.
        let mut dir = match &hess {
            Some(h) => newton_direction(h, &grad),
            None => grad.iter().map(|g| -g).collect::<Vec<f64>>(),
        };
        let mut slope = dot(&grad, &dir);
        if !(slope < 0.0) {
            dir = grad.iter().map(|g| -g).collect();
            slope = dot(&grad, &dir);
            if !(slope < 0.0) {
                break; // gradient numerically zero
            }
        }

        // Armijo backtracking; overflow during a trial evaluation counts as
        // a rejected step. Once the model decrease t|slope| falls below the
        // floating-point resolution of the value, f carries no signal about
        // the step, so acceptance switches to "the gradient norm must not
        // grow": this lets Newton polish the gradient to its noise floor
        // instead of stalling one ulp above it, without admitting the
        // reflected steps a value-only epsilon test would let through.
        let flat_tol = 4.0 * f64::EPSILON * fx.abs();
        let mut t = opts.initial_step;
        let mut accepted = None;
        for _ in 0..200 {
            let cand: Vec<f64> = x.iter().zip(&dir).map(|(xi, di)| xi + t * di).collect();
            match obj.value(&cand) {
                Ok(fc) if fc <= fx + opts.armijo_c * t * slope => {
                    accepted = Some(cand);
                    break;
                }
                Ok(fc) if t * slope.abs() <= flat_tol && fc <= fx + flat_tol => {
                    // Strict decrease: a zero-length step must not count as
                    // progress, or the loop would idle until max_iters.
                    if let Ok((_, gc)) = obj.value_grad(&cand) {
                        if norm(&gc) < grad_norm {
                            accepted = Some(cand);
                            break;
                        }
                    }
                    t *= opts.armijo_shrink;
                }
                _ => t *= opts.armijo_shrink,
            }
        }
        let Some(cand) = accepted else {
            break; // step underflow: stalled
        };
        x = cand;
        iters += 1;
        let (nfx, ngrad, nhess) = eval_state(&x)?;
        fx = nfx;
        grad = ngrad;
        hess = nhess;
        grad_norm = norm(&grad);
        if let Some(tr) = trace.as_mut() {
            tr.push((iters, fx));
        }
    }

    let value = obj.value(&x)?; // contract: value re-evaluated at x_star
    Ok(MinimizeResult {
        x_star: x,
        value,
        grad_norm,
        iters,
        converged: grad_norm <= opts.grad_tol,
        trace,
    })
}

/// Solves (H + τI) p = -g by Cholesky, escalating the Levenberg ridge τ
/// geometrically from 0 on factorization failure.
fn newton_direction(hess: &DMatrix<f64>, grad: &[f64]) -> Vec<f64> {
    let d = grad.len();
    let g = DVector::from_column_slice(grad);
    let scale = (0..d).map(|i| hess[(i, i)].abs()).fold(0.0f64, f64::max);
    let mut tau = 0.0f64;
    for _ in 0..60 {
        let mut m = hess.clone();
        for i in 0..d {
            m[(i, i)] += tau;
        }
        if let Some(chol) = m.cholesky() {
            let p = chol.solve(&(-&g));
            if p.iter().all(|v| v.is_finite()) {
                return p.iter().copied().collect();
            }
        }
        tau = if tau == 0.0 {
            1e-10 * (1.0 + scale)
        } else {
            tau * 10.0
        };
    }
    grad.iter().map(|g| -g).collect()
}

/// Analytic Hessian of the IS empirical objective:
/// `(1/n) Σ φ²(Z_i) e^{-<x,Z_i>+|x|²/2} (I + (x - Z_i)(x - Z_i)ᵀ)`.
/// Positive definite as soon as one φ(Z_i) > 0.
pub fn hessian_is(obj: &EmpiricalObjective, x: &[f64]) -> Result<DMatrix<f64>> {
    if !obj.family().is_importance_sampling() {
        return Err(Error::invalid(
            "hessian_is applies to the importance-sampling family only",
        ));
    }
    let (_, _, hess) = obj.value_grad_hess(x, true)?;
    Ok(hess.expect("IS family always produces a Hessian"))
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::{sample_iid, DistributionSpec, EmpiricalMeasure};
    use crate::objectives::{
        eval_empirical, grad_empirical, make_is_family, make_quadratic_family,
    };
    use crate::payoffs::{BasketOptionSpec, OptionFlavor};

    fn gaussian_samples(n: usize, q: usize, seed: u64) -> EmpiricalMeasure {
        sample_iid(&DistributionSpec::standard_gaussian(q).unwrap(), n, seed).unwrap()
    }

    #[test]
    fn newton_finds_the_sample_mean_of_the_quadratic_family() {
        let zs = gaussian_samples(100, 3, 2);
        let obj = EmpiricalObjective::new(make_quadratic_family(3), zs.clone()).unwrap();
        let res = minimize(&obj, &[5.0, -3.0, 1.0], &MinimizeOptions::default()).unwrap();
        assert!(res.converged);
        assert!(res.iters <= 2, "iters {}", res.iters);
        let m = zs.mean();
        for k in 0..3 {
            assert!((res.x_star[k] - m[k]).abs() < 1e-10);
        }
        // Contract: value is the re-evaluated objective at x_star.
        assert_eq!(res.value, eval_empirical(&obj, &res.x_star).unwrap());
    }

    #[test]
    fn minimize_is_bitwise_deterministic() {
        let spec = BasketOptionSpec::single_asset(0.05, 1.0, 100.0, 0.2, 100.0, OptionFlavor::Call)
            .unwrap();
        let obj =
            EmpiricalObjective::new(make_is_family(&spec), gaussian_samples(500, 1, 3)).unwrap();
        let opts = MinimizeOptions::default();
        let a = minimize(&obj, &[0.0], &opts).unwrap();
        let b = minimize(&obj, &[0.0], &opts).unwrap();
        assert_eq!(a, b);
        assert!(a.converged);
    }

    #[test]
    fn armijo_trace_is_nonincreasing() {
        let spec = BasketOptionSpec::single_asset(0.05, 1.0, 120.0, 0.2, 100.0, OptionFlavor::Call)
            .unwrap();
        let obj =
            EmpiricalObjective::new(make_is_family(&spec), gaussian_samples(2000, 1, 9)).unwrap();
        for method in [Method::Newton, Method::GradientDescent] {
            let opts = MinimizeOptions {
                method,
                max_iters: 200,
                grad_tol: 1e-6,
                ..Default::default()
            };
            let res = minimize(&obj, &[0.0], &opts).unwrap();
            let trace = res.trace.as_ref().unwrap();
            for w in trace.windows(2) {
                let flat = 1e-12 * (1.0 + w[0].1.abs());
                assert!(w[1].1 <= w[0].1 + flat, "trace rose: {:?}", w);
            }
        }
    }

    #[test]
    fn gradient_descent_recovers_from_overflowing_steps() {
        // One deep ITM sample: v(x) = phi^2 e^{-4x + x^2/2}. At x = -4 the
        // gradient is astronomically large, so the first trial steps
        // overflow the exponent guard until the backtracking tames them.
        let spec = BasketOptionSpec::single_asset(0.05, 1.0, 100.0, 0.2, 100.0, OptionFlavor::Call)
            .unwrap();
        let z = EmpiricalMeasure::from_points(&[vec![4.0]]).unwrap();
        let obj = EmpiricalObjective::new(make_is_family(&spec), z).unwrap();
        let opts = MinimizeOptions {
            method: Method::GradientDescent,
            max_iters: 5000,
            grad_tol: 1e-6,
            ..Default::default()
        };
        let res = minimize(&obj, &[-4.0], &opts).unwrap();
        assert!(res.converged, "grad_norm {}", res.grad_norm);
        // The minimizer of -<x,z> + |x|^2/2 is x = z.
        assert!((res.x_star[0] - 4.0).abs() < 1e-3, "x* {}", res.x_star[0]);
    }

    #[test]
    fn non_converged_runs_report_it() {
        // One gradient-descent step on the IS objective cannot reach the
        // stationary point, unlike on an exact quadratic.
        let spec = BasketOptionSpec::single_asset(0.05, 1.0, 100.0, 0.2, 100.0, OptionFlavor::Call)
            .unwrap();
        let obj =
            EmpiricalObjective::new(make_is_family(&spec), gaussian_samples(200, 1, 4)).unwrap();
        let opts = MinimizeOptions {
            method: Method::GradientDescent,
            max_iters: 1,
            grad_tol: 1e-10,
            ..Default::default()
        };
        let res = minimize(&obj, &[0.0], &opts).unwrap();
        assert!(!res.converged);
        assert_eq!(res.iters, 1);
    }

    #[test]
    fn rejects_bad_inputs() {
        let zs = gaussian_samples(10, 1, 1);
        let obj = EmpiricalObjective::new(make_quadratic_family(1), zs).unwrap();
        assert!(minimize(&obj, &[f64::NAN], &MinimizeOptions::default()).is_err());
        assert!(minimize(&obj, &[0.0, 0.0], &MinimizeOptions::default()).is_err());
        let bad = MinimizeOptions {
            armijo_shrink: 1.5,
            ..Default::default()
        };
        assert!(minimize(&obj, &[0.0], &bad).is_err());
    }

    #[test]
    fn multistart_ties_keep_the_lowest_start_index() {
        // Strictly convex problem: every start converges to the same point,
        // so the winner must be start 0 = the x0 run.
        let zs = gaussian_samples(64, 2, 6);
        let obj = EmpiricalObjective::new(make_quadratic_family(2), zs).unwrap();
        let single = minimize(&obj, &[0.5, 0.5], &MinimizeOptions::default()).unwrap();
        let multi = minimize(
            &obj,
            &[0.5, 0.5],
            &MinimizeOptions {
                multistart: 6,
                start_seed: 42,
                start_box_radius: 3.0,
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(single.x_star, multi.x_star);
        assert_eq!(single.iters, multi.iters);
    }

    #[test]
    fn hessian_is_guards_family_kind() {
        let zs = gaussian_samples(10, 1, 1);
        let obj = EmpiricalObjective::new(make_quadratic_family(1), zs).unwrap();
        assert!(hessian_is(&obj, &[0.0]).is_err());
    }

    #[test]
    fn hessian_is_zero_when_all_payoffs_vanish() {
        let spec = BasketOptionSpec::single_asset(0.05, 1.0, 100.0, 0.2, 100.0, OptionFlavor::Call)
            .unwrap();
        // Deep OTM samples: phi = 0 on all of them.
        let zs = EmpiricalMeasure::from_points(&[vec![-6.0], vec![-7.0]]).unwrap();
        let obj = EmpiricalObjective::new(make_is_family(&spec), zs).unwrap();
        let h = hessian_is(&obj, &[0.3]).unwrap();
        assert_eq!(h[(0, 0)], 0.0);
    }

    #[test]
    fn newton_on_two_dimensional_is_problem_is_fast_and_positive() {
        // Deep-ish OTM basket: the optimal drift moves into the money and
        // Newton needs only a handful of iterations at desk scale.
        let spec = BasketOptionSpec::new(
            0.05,
            1.0,
            32.0,
            vec![0.2, 0.05, 0.05, 0.25],
            vec![30.0, 25.0],
            vec![0.5, 0.5],
            OptionFlavor::Call,
        )
        .unwrap();
        let obj =
            EmpiricalObjective::new(make_is_family(&spec), gaussian_samples(3000, 2, 17)).unwrap();
        let res = minimize(&obj, &[0.0, 0.0], &MinimizeOptions::default()).unwrap();
        assert!(res.converged && res.iters <= 30, "iters {}", res.iters);
        // Positive payoffs need large z, so the drift is componentwise up.
        assert!(
            res.x_star[0] > 0.0 && res.x_star[1] > 0.0,
            "{:?}",
            res.x_star
        );
    }

    #[test]
    fn newton_on_is_problem_certifies_optimality() {
        let spec = BasketOptionSpec::single_asset(0.05, 1.0, 100.0, 0.2, 100.0, OptionFlavor::Call)
            .unwrap();
        let obj =
            EmpiricalObjective::new(make_is_family(&spec), gaussian_samples(5000, 1, 11)).unwrap();
        let res = minimize(&obj, &[0.0], &MinimizeOptions::default()).unwrap();
        assert!(res.converged && res.iters <= 30);
        let g = grad_empirical(&obj, &res.x_star).unwrap();
        assert!(g.iter().map(|v| v * v).sum::<f64>().sqrt() <= 1e-8);
        let h = hessian_is(&obj, &res.x_star).unwrap();
        assert!(h.cholesky().is_some(), "Hessian not PD at the optimum");
    }
}
