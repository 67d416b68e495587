//! The `check` command: a fast run of the library's cross-cutting
//! invariants, one result row per check.

use empmin::experiments::{lemma1_check, Problem};
use empmin::measures::{
    moment, rate_r_q, sample_iid, wasserstein1_assignment, wasserstein1_sorted_1d,
    DistributionSpec, EmpiricalMeasure,
};
use empmin::objectives::{
    estimator_variance, eval_empirical, grad_empirical, make_is_family, make_nn_family,
    translated_estimator, EmpiricalObjective, MlpSpec,
};
use empmin::optim::{hessian_is, minimize, MinimizeOptions};
use empmin::payoffs::{bs_price_1d, quadrature_price_1d, BasketOptionSpec, OptionFlavor};
use empmin::rng::{derive_seed, seeded_rng, uniform_f64, GaussianSource};

pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &'static str, run: impl FnOnce() -> Result<String, String>) -> CheckResult {
    match run() {
        Ok(detail) => CheckResult {
            name,
            passed: true,
            detail,
        },
        Err(detail) => CheckResult {
            name,
            passed: false,
            detail,
        },
    }
}

fn atm_call() -> BasketOptionSpec {
    BasketOptionSpec::single_asset(0.05, 1.0, 100.0, 0.2, 100.0, OptionFlavor::Call).unwrap()
}

pub fn run_all(master_seed: u64) -> Vec<CheckResult> {
    vec![
        check("is-gradient-finite-differences", || {
            let obj = EmpiricalObjective::new(
                make_is_family(&atm_call()),
                sample_iid(
                    &DistributionSpec::standard_gaussian(1).unwrap(),
                    200,
                    master_seed ^ 1,
                )
                .map_err(|e| e.to_string())?,
            )
            .map_err(|e| e.to_string())?;
            let mut src = GaussianSource::new(master_seed ^ 2);
            let mut worst: f64 = 0.0;
            for _ in 0..10 {
                let x = [src.next_normal()];
                let g = grad_empirical(&obj, &x).map_err(|e| e.to_string())?;
                let h = 1e-5 * (1.0 + x[0].abs());
                let fp = eval_empirical(&obj, &[x[0] + h]).map_err(|e| e.to_string())?;
                let fm = eval_empirical(&obj, &[x[0] - h]).map_err(|e| e.to_string())?;
                let fd = (fp - fm) / (2.0 * h);
                worst = worst.max((g[0] - fd).abs() / fd.abs().max(1e-12));
            }
            if worst < 1e-5 {
                Ok(format!("max rel err {worst:.2e}"))
            } else {
                Err(format!("rel err {worst:.2e} >= 1e-5"))
            }
        }),
        check("nn-gradient-finite-differences", || {
            let spec = MlpSpec::new(vec![3, 4, 1], 0.3).map_err(|e| e.to_string())?;
            let dataset = crate::runner::generate_nn_dataset(&spec, 12, master_seed ^ 3);
            let family = make_nn_family(&spec, &dataset).map_err(|e| e.to_string())?;
            let obj = EmpiricalObjective::new(family, dataset).map_err(|e| e.to_string())?;
            let mut src = GaussianSource::new(master_seed ^ 4);
            let mut worst: f64 = 0.0;
            for _ in 0..5 {
                let x: Vec<f64> = (0..spec.weight_dim()).map(|_| src.next_normal()).collect();
                let g = grad_empirical(&obj, &x).map_err(|e| e.to_string())?;
                let h = 1e-5 * (1.0 + x.iter().map(|v| v * v).sum::<f64>().sqrt());
                let mut err2 = 0.0;
                let mut scale2 = 0.0;
                for k in 0..x.len() {
                    let mut xp = x.clone();
                    let mut xm = x.clone();
                    xp[k] += h;
                    xm[k] -= h;
                    let fd = (eval_empirical(&obj, &xp).map_err(|e| e.to_string())?
                        - eval_empirical(&obj, &xm).map_err(|e| e.to_string())?)
                        / (2.0 * h);
                    err2 += (g[k] - fd) * (g[k] - fd);
                    scale2 += fd * fd;
                }
                worst = worst.max((err2 / scale2.max(1e-20)).sqrt());
            }
            if worst < 1e-4 {
                Ok(format!("max rel err {worst:.2e}"))
            } else {
                Err(format!("rel err {worst:.2e} >= 1e-4"))
            }
        }),
        check("w1-assignment-vs-brute-force", || {
            let mut rng = seeded_rng(master_seed ^ 5);
            for case in 0..10 {
                let n = 2 + (case % 5);
                let q = 1 + (case % 3);
                let draw = |rng: &mut _, n: usize| -> EmpiricalMeasure {
                    let pts: Vec<Vec<f64>> = (0..n)
                        .map(|_| (0..q).map(|_| 4.0 * uniform_f64(rng) - 2.0).collect())
                        .collect();
                    EmpiricalMeasure::from_points(&pts).unwrap()
                };
                let a = draw(&mut rng, n);
                let b = draw(&mut rng, n);
                let fast = wasserstein1_assignment(&a, &b).map_err(|e| e.to_string())?;
                let slow = brute_force_w1(&a, &b);
                if (fast - slow).abs() > 1e-10 {
                    return Err(format!("case {case}: {fast} vs {slow}"));
                }
            }
            Ok("10 instances".into())
        }),
        check("w1-sorted-agrees-with-assignment", || {
            let mut rng = seeded_rng(master_seed ^ 6);
            for case in 0..10 {
                let n = 32;
                let draw = |rng: &mut _| -> EmpiricalMeasure {
                    let pts: Vec<Vec<f64>> =
                        (0..n).map(|_| vec![8.0 * uniform_f64(rng) - 4.0]).collect();
                    EmpiricalMeasure::from_points(&pts).unwrap()
                };
                let a = draw(&mut rng);
                let b = draw(&mut rng);
                let s = wasserstein1_sorted_1d(&a, &b).map_err(|e| e.to_string())?;
                let m = wasserstein1_assignment(&a, &b).map_err(|e| e.to_string())?;
                if (s - m).abs() > 1e-10 {
                    return Err(format!("case {case}: sorted {s} vs assignment {m}"));
                }
            }
            Ok("10 instances".into())
        }),
        check("pricing-closed-form-vs-quadrature", || {
            let mut worst: f64 = 0.0;
            for flavor in [OptionFlavor::Call, OptionFlavor::Put] {
                for k in [80.0, 100.0, 125.0] {
                    let spec = BasketOptionSpec::single_asset(0.05, 1.0, k, 0.2, 100.0, flavor)
                        .map_err(|e| e.to_string())?;
                    let cf = bs_price_1d(&spec).map_err(|e| e.to_string())?;
                    let q = quadrature_price_1d(&spec, 20).map_err(|e| e.to_string())?;
                    worst = worst.max((cf - q).abs() / cf.abs().max(1e-12));
                }
            }
            if worst < 1e-8 {
                Ok(format!("max rel err {worst:.2e}"))
            } else {
                Err(format!("rel err {worst:.2e} >= 1e-8"))
            }
        }),
        check("estimator-unbiasedness", || {
            let spec = atm_call();
            let n = 100_000;
            let zs = sample_iid(
                &DistributionSpec::standard_gaussian(1).unwrap(),
                n,
                master_seed ^ 7,
            )
            .map_err(|e| e.to_string())?;
            let price = bs_price_1d(&spec).map_err(|e| e.to_string())?;
            for x in [[0.0], [0.7]] {
                let est = translated_estimator(&spec, &x, &zs).map_err(|e| e.to_string())?;
                let var = estimator_variance(&spec, &x, &zs).map_err(|e| e.to_string())?;
                let se = (var / n as f64).sqrt();
                if (est - price).abs() > 4.0 * se {
                    return Err(format!("x={}: {est} vs {price} (se {se})", x[0]));
                }
            }
            Ok("two translations within 4 se".into())
        }),
        check("optimizer-certificate", || {
            let obj = EmpiricalObjective::new(
                make_is_family(&atm_call()),
                sample_iid(
                    &DistributionSpec::standard_gaussian(1).unwrap(),
                    2000,
                    master_seed ^ 8,
                )
                .map_err(|e| e.to_string())?,
            )
            .map_err(|e| e.to_string())?;
            let res =
                minimize(&obj, &[0.0], &MinimizeOptions::default()).map_err(|e| e.to_string())?;
            if !res.converged {
                return Err(format!("not converged, grad norm {}", res.grad_norm));
            }
            let h = hessian_is(&obj, &res.x_star).map_err(|e| e.to_string())?;
            if h.cholesky().is_none() {
                return Err("Hessian not positive definite at optimum".into());
            }
            Ok(format!("converged in {} iterations", res.iters))
        }),
        check("lemma1-inequality", || {
            let problem = Problem::SyntheticQuadratic {
                law: DistributionSpec::standard_gaussian(1).unwrap(),
            };
            let grid = vec![vec![-2.0], vec![0.0], vec![2.0]];
            for idx in 0..20 {
                let seed = derive_seed(master_seed ^ 9, 32, idx);
                let rep = lemma1_check(&problem, 32, seed, &grid).map_err(|e| e.to_string())?;
                if !rep.holds {
                    return Err(format!("seed {idx}: lhs {} > rhs {}", rep.lhs, rep.rhs));
                }
            }
            Ok("20 seeds".into())
        }),
        check("rate-function-values", || {
            if (rate_r_q(1, 100) - 0.1).abs() > 1e-12 {
                return Err("R_1(100) != 0.1".into());
            }
            if (rate_r_q(3, 1000) - 0.1).abs() > 1e-12 {
                return Err("R_3(1000) != 0.1".into());
            }
            let expected = (99.0f64).powf(-0.5) * (100.0f64).ln();
            if (rate_r_q(2, 99) - expected).abs() > 1e-12 {
                return Err("R_2(99) mismatch".into());
            }
            Ok("3 reference values".into())
        }),
        check("moment-scaling", || {
            let m = EmpiricalMeasure::from_points(&[vec![1.0, 2.0], vec![-0.5, 3.0]]).unwrap();
            let scaled = EmpiricalMeasure::from_points(&[vec![2.0, 4.0], vec![-1.0, 6.0]]).unwrap();
            let lhs = moment(&scaled, 1.7).map_err(|e| e.to_string())?;
            let rhs = 2.0f64.powf(1.7) * moment(&m, 1.7).map_err(|e| e.to_string())?;
            if (lhs - rhs).abs() > 1e-12 * rhs {
                return Err(format!("{lhs} vs {rhs}"));
            }
            Ok("lambda^r scaling exact".into())
        }),
    ]
}

fn brute_force_w1(a: &EmpiricalMeasure, b: &EmpiricalMeasure) -> f64 {
    fn euclid(a: &[f64], b: &[f64]) -> f64 {
        a.iter()
            .zip(b)
            .map(|(x, y)| (x - y) * (x - y))
            .sum::<f64>()
            .sqrt()
    }
    fn permute(p: &mut Vec<usize>, k: usize, f: &mut impl FnMut(&[usize])) {
        if k == p.len() {
            f(p);
            return;
        }
        for i in k..p.len() {
            p.swap(k, i);
            permute(p, k + 1, f);
            p.swap(k, i);
        }
    }
    let n = a.len();
    let mut perm: Vec<usize> = (0..n).collect();
    let mut best = f64::INFINITY;
    permute(&mut perm, 0, &mut |p| {
        let c: f64 = (0..n).map(|i| euclid(a.point(i), b.point(p[i]))).sum();
        if c < best {
            best = c;
        }
    });
    best / n as f64
}
