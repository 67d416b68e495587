//! Empirical measures over R^q: sampling, moments, exact Wasserstein-1
//! distances and the dimension-dependent rate function.

mod assignment;

pub use assignment::{
    wasserstein1_assignment, wasserstein1_assignment_capped, wasserstein1_split_assignment,
    DEFAULT_ASSIGNMENT_CAP,
};

use crate::error::{Error, Result};
use crate::rng::{seeded_rng, uniform_f64, GaussianSource};

/// Uniform empirical measure `(1/n) Σ δ_{z_i}` on `n ≥ 1` points of R^q.
///
/// Points are stored flat, point-major. The `seed` records provenance when
/// the measure came out of [`sample_iid`]; measures built from explicit
/// points carry seed 0. Values are immutable after construction and safe to
/// share across threads.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalMeasure {
    data: Vec<f64>,
    q: usize,
    seed: u64,
}

impl EmpiricalMeasure {
    /// Builds a measure from explicit points (provenance seed 0).
    pub fn from_points(points: &[Vec<f64>]) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::invalid("empirical measure needs at least one point"));
        }
        let q = points[0].len();
        if q == 0 {
            return Err(Error::invalid("points must have dimension >= 1"));
        }
        let mut data = Vec::with_capacity(points.len() * q);
        for p in points {
            if p.len() != q {
                return Err(Error::DimensionMismatch {
                    expected: q,
                    found: p.len(),
                });
            }
            data.extend_from_slice(p);
        }
        Ok(EmpiricalMeasure { data, q, seed: 0 })
    }

    /// Builds a measure from a flat point-major buffer of length `n * q`.
    pub fn from_flat(data: Vec<f64>, q: usize, seed: u64) -> Result<Self> {
        if q == 0 {
            return Err(Error::invalid("dimension q must be >= 1"));
        }
        if data.is_empty() || data.len() % q != 0 {
            return Err(Error::invalid(format!(
                "flat buffer of length {} is not a positive multiple of q={q}",
                data.len()
            )));
        }
        Ok(EmpiricalMeasure { data, q, seed })
    }

    /// Single Dirac mass δ_x.
    pub fn dirac(x: &[f64]) -> Result<Self> {
        Self::from_points(std::slice::from_ref(&x.to_vec()))
    }

    /// Number of sample points n.
    pub fn len(&self) -> usize {
        self.data.len() / self.q
    }

    pub fn is_empty(&self) -> bool {
        false // n >= 1 by construction
    }

    /// Ambient dimension q.
    pub fn dim(&self) -> usize {
        self.q
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.data[i * self.q..(i + 1) * self.q]
    }

    pub fn points(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.q)
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.data
    }

    /// Per-coordinate sample mean.
    pub fn mean(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.q];
        for p in self.points() {
            for (mj, &pj) in m.iter_mut().zip(p) {
                *mj += pj;
            }
        }
        let n = self.len() as f64;
        m.iter_mut().for_each(|v| *v /= n);
        m
    }

    /// Splits every atom into `k` copies of equal mass. The resulting
    /// measure is identical as a probability measure; used to express a
    /// transport problem against a `k·n`-point measure as an equal-size
    /// assignment.
    pub fn replicate(&self, k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::invalid("replication factor must be >= 1"));
        }
        let mut data = Vec::with_capacity(self.data.len() * k);
        for p in self.points() {
            for _ in 0..k {
                data.extend_from_slice(p);
            }
        }
        Ok(EmpiricalMeasure {
            data,
            q: self.q,
            seed: self.seed,
        })
    }
}

/// Law of the latent variable Z.
#[derive(Debug, Clone, PartialEq)]
pub enum DistributionSpec {
    /// N(0, I_q).
    StandardGaussian { q: usize },
    /// Uniform on the cube [0, 1]^q.
    UniformCube { q: usize },
    /// Finite measure Σ w_k δ_{a_k}; weights nonnegative, summing to one
    /// within 1e-12.
    Discrete {
        points: Vec<Vec<f64>>,
        weights: Vec<f64>,
    },
}

impl DistributionSpec {
    pub fn standard_gaussian(q: usize) -> Result<Self> {
        if q == 0 {
            return Err(Error::invalid("gaussian dimension must be >= 1"));
        }
        Ok(DistributionSpec::StandardGaussian { q })
    }

    pub fn uniform_cube(q: usize) -> Result<Self> {
        if q == 0 {
            return Err(Error::invalid("cube dimension must be >= 1"));
        }
        Ok(DistributionSpec::UniformCube { q })
    }

    pub fn discrete(points: Vec<Vec<f64>>, weights: Vec<f64>) -> Result<Self> {
        if points.is_empty() || points.len() != weights.len() {
            return Err(Error::invalid(
                "discrete law needs matching nonempty points and weights",
            ));
        }
        let q = points[0].len();
        if q == 0 || points.iter().any(|p| p.len() != q) {
            return Err(Error::invalid("discrete atoms must share a dimension >= 1"));
        }
        if weights.iter().any(|&w| !(w >= 0.0)) {
            return Err(Error::invalid("discrete weights must be nonnegative"));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::invalid(format!(
                "discrete weights sum to {total}, expected 1 within 1e-12"
            )));
        }
        Ok(DistributionSpec::Discrete { points, weights })
    }

    pub fn dim(&self) -> usize {
        match self {
            DistributionSpec::StandardGaussian { q } | DistributionSpec::UniformCube { q } => *q,
            DistributionSpec::Discrete { points, .. } => points[0].len(),
        }
    }

    /// Mean of the law, exact per kind.
    pub fn mean(&self) -> Vec<f64> {
        match self {
            DistributionSpec::StandardGaussian { q } => vec![0.0; *q],
            DistributionSpec::UniformCube { q } => vec![0.5; *q],
            DistributionSpec::Discrete { points, weights } => {
                let q = points[0].len();
                let mut m = vec![0.0; q];
                for (p, &w) in points.iter().zip(weights) {
                    for (mj, &pj) in m.iter_mut().zip(p) {
                        *mj += w * pj;
                    }
                }
                m
            }
        }
    }

    /// E|Z - E Z|^2, the total variance, exact per kind.
    pub fn total_variance(&self) -> f64 {
        match self {
            DistributionSpec::StandardGaussian { q } => *q as f64,
            DistributionSpec::UniformCube { q } => *q as f64 / 12.0,
            DistributionSpec::Discrete { points, weights } => {
                let m = self.mean();
                points
                    .iter()
                    .zip(weights)
                    .map(|(p, &w)| {
                        w * p
                            .iter()
                            .zip(&m)
                            .map(|(&pj, &mj)| (pj - mj) * (pj - mj))
                            .sum::<f64>()
                    })
                    .sum()
            }
        }
    }
}

/// Draws `n` i.i.d. samples from the law. Deterministic per
/// `(spec, n, seed)`: gaussians come from the polar method, uniforms from
/// the top 53 bits of the ChaCha8 stream, discrete draws by inverse CDF;
/// coordinates are filled point-major.
pub fn sample_iid(spec: &DistributionSpec, n: usize, seed: u64) -> Result<EmpiricalMeasure> {
    if n == 0 {
        return Err(Error::invalid("sample count n must be >= 1"));
    }
    let q = spec.dim();
    let mut data = Vec::with_capacity(n * q);
    match spec {
        DistributionSpec::StandardGaussian { .. } => {
            let mut src = GaussianSource::new(seed);
            for _ in 0..n * q {
                data.push(src.next_normal());
            }
        }
        DistributionSpec::UniformCube { .. } => {
            let mut rng = seeded_rng(seed);
            for _ in 0..n * q {
                data.push(uniform_f64(&mut rng));
            }
        }
        DistributionSpec::Discrete { points, weights } => {
            let mut rng = seeded_rng(seed);
            for _ in 0..n {
                let u = uniform_f64(&mut rng);
                let mut acc = 0.0;
                let mut chosen = points.len() - 1;
                for (k, &w) in weights.iter().enumerate() {
                    acc += w;
                    if u < acc {
                        chosen = k;
                        break;
                    }
                }
                data.extend_from_slice(&points[chosen]);
            }
        }
    }
    EmpiricalMeasure::from_flat(data, q, seed)
}

/// Moment of order `r > 0`: `(1/n) Σ |z_i|^r` with the Euclidean norm.
pub fn moment(m: &EmpiricalMeasure, r: f64) -> Result<f64> {
    if !(r > 0.0) {
        return Err(Error::invalid(format!("moment order r={r} must be > 0")));
    }
    let sum: f64 = m
        .points()
        .map(|p| p.iter().map(|x| x * x).sum::<f64>().sqrt().powf(r))
        .sum();
    Ok(sum / m.len() as f64)
}

/// Exact W1 between two equal-size 1-D empirical measures via the monotone
/// coupling: `(1/n) Σ |a_(i) - b_(i)|` over sorted order statistics.
pub fn wasserstein1_sorted_1d(a: &EmpiricalMeasure, b: &EmpiricalMeasure) -> Result<f64> {
    if a.dim() != 1 || b.dim() != 1 {
        return Err(Error::UnsupportedDimension {
            dim: a.dim().max(b.dim()),
            context: "wasserstein1_sorted_1d requires q = 1",
        });
    }
    if a.len() != b.len() {
        return Err(Error::SampleCountMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    let mut xa: Vec<f64> = a.as_flat().to_vec();
    let mut xb: Vec<f64> = b.as_flat().to_vec();
    // Stable sort; ties contribute zero cost either way.
    xa.sort_by(|u, v| u.partial_cmp(v).expect("non-finite sample"));
    xb.sort_by(|u, v| u.partial_cmp(v).expect("non-finite sample"));
    let sum: f64 = xa.iter().zip(&xb).map(|(u, v)| (u - v).abs()).sum();
    Ok(sum / a.len() as f64)
}

/// Exact W1 between a 1-D empirical measure and the uniform law on [0, 1]:
/// `∫ |F_n(t) - F(t)| dt` integrated piecewise on the sorted breakpoints,
/// extended outside [0, 1] where F is constant.
pub fn wasserstein1_to_uniform_1d(m: &EmpiricalMeasure) -> Result<f64> {
    if m.dim() != 1 {
        return Err(Error::UnsupportedDimension {
            dim: m.dim(),
            context: "wasserstein1_to_uniform_1d requires q = 1",
        });
    }
    let n = m.len();
    let mut xs: Vec<f64> = m.as_flat().to_vec();
    if xs.iter().any(|x| !x.is_finite()) {
        return Err(Error::invalid("samples must be finite"));
    }
    xs.sort_by(|u, v| u.partial_cmp(v).unwrap());

    // Breakpoints of the integrand: the sample points plus the endpoints of
    // the uniform support. Between consecutive breakpoints F_n is constant
    // and F is linear, so each piece integrates in closed form.
    let mut bps = xs.clone();
    bps.push(0.0);
    bps.push(1.0);
    bps.sort_by(|u, v| u.partial_cmp(v).unwrap());

    let fn_at = |t: f64| -> f64 {
        // F_n(t) = #{x_i <= t} / n; evaluate via binary search on xs.
        let k = xs.partition_point(|&x| x <= t);
        k as f64 / n as f64
    };
    let funif = |t: f64| -> f64 { t.clamp(0.0, 1.0) };

    let mut total = 0.0;
    for w in bps.windows(2) {
        let (a, b) = (w[0], w[1]);
        if b <= a {
            continue;
        }
        let c = fn_at(0.5 * (a + b)); // F_n constant on (a, b)
        if b <= 0.0 || a >= 1.0 {
            // F constant (0 or 1) on this piece.
            total += (c - funif(a)).abs() * (b - a);
        } else {
            // F(t) = t on (a, b) ⊂ [0, 1]; ∫ |c - t| dt with a sign change
            // at t = c when it falls inside.
            if c <= a {
                total += (a + b) / 2.0 * (b - a) - c * (b - a);
            } else if c >= b {
                total += c * (b - a) - (a + b) / 2.0 * (b - a);
            } else {
                total += ((c - a) * (c - a) + (b - c) * (b - c)) / 2.0;
            }
        }
    }
    Ok(total)
}

/// Dimension-dependent convergence rate: `n^{-1/2}` for q = 1,
/// `n^{-1/2} log(1+n)` for q = 2, `n^{-1/q}` for q > 2 (natural log).
pub fn rate_r_q(q: usize, n: usize) -> f64 {
    assert!(q >= 1 && n >= 1, "rate_r_q needs q >= 1 and n >= 1");
    let nf = n as f64;
    match q {
        1 => nf.powf(-0.5),
        2 => nf.powf(-0.5) * (1.0 + nf).ln(),
        _ => nf.powf(-1.0 / q as f64),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_atom_law_yields_constant_sample() {
        let spec = DistributionSpec::discrete(vec![vec![5.0]], vec![1.0]).unwrap();
        let m = sample_iid(&spec, 3, 0xDEAD).unwrap();
        assert_eq!(m.len(), 3);
        assert!(m.points().all(|p| p == [5.0]));
    }

    #[test]
    fn gaussian_sample_mean_is_near_origin() {
        // CLT bound 3/sqrt(1000) ~ 0.095 per coordinate.
        let spec = DistributionSpec::standard_gaussian(2).unwrap();
        let m = sample_iid(&spec, 1000, 7).unwrap();
        for c in m.mean() {
            assert!(c.abs() < 0.1, "coordinate mean {c}");
        }
    }

    #[test]
    fn uniform_sample_mean_is_near_half() {
        // 3σ/sqrt(n) with σ^2 = 1/12 gives 0.0027 < 0.005.
        let spec = DistributionSpec::uniform_cube(1).unwrap();
        let m = sample_iid(&spec, 100_000, 1).unwrap();
        assert!((m.mean()[0] - 0.5).abs() < 0.005);
    }

    #[test]
    fn sampling_is_deterministic_per_seed() {
        let spec = DistributionSpec::standard_gaussian(3).unwrap();
        let a = sample_iid(&spec, 50, 9).unwrap();
        let b = sample_iid(&spec, 50, 9).unwrap();
        assert_eq!(a, b);
        let c = sample_iid(&spec, 50, 10).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn moment_examples() {
        let m = EmpiricalMeasure::from_points(&[vec![3.0], vec![-3.0]]).unwrap();
        assert_eq!(moment(&m, 2.0).unwrap(), 9.0);

        let origin = EmpiricalMeasure::from_points(&[vec![0.0, 0.0]]).unwrap();
        assert_eq!(moment(&origin, 1.0).unwrap(), 0.0);

        let m3 = EmpiricalMeasure::from_points(&[vec![1.0], vec![2.0], vec![3.0]]).unwrap();
        assert!((moment(&m3, 1.0).unwrap() - 2.0).abs() < 1e-15);

        assert!(moment(&m3, 0.0).is_err());
        assert!(moment(&m3, -1.0).is_err());
    }

    #[test]
    fn sorted_w1_examples() {
        let d0 = EmpiricalMeasure::dirac(&[0.0]).unwrap();
        let d1 = EmpiricalMeasure::dirac(&[1.0]).unwrap();
        assert_eq!(wasserstein1_sorted_1d(&d0, &d1).unwrap(), 1.0);

        let a = EmpiricalMeasure::from_points(&[vec![0.0], vec![2.0]]).unwrap();
        let b = EmpiricalMeasure::from_points(&[vec![1.0], vec![3.0]]).unwrap();
        assert!((wasserstein1_sorted_1d(&a, &b).unwrap() - 1.0).abs() < 1e-15);

        assert_eq!(wasserstein1_sorted_1d(&a, &a).unwrap(), 0.0);
    }

    #[test]
    fn sorted_w1_rejects_mismatches() {
        let a = EmpiricalMeasure::from_points(&[vec![0.0], vec![2.0]]).unwrap();
        let b = EmpiricalMeasure::dirac(&[1.0]).unwrap();
        assert!(matches!(
            wasserstein1_sorted_1d(&a, &b),
            Err(Error::SampleCountMismatch { .. })
        ));
        let c = EmpiricalMeasure::from_points(&[vec![0.0, 0.0], vec![1.0, 1.0]]).unwrap();
        assert!(wasserstein1_sorted_1d(&a, &c).is_err());
    }

    #[test]
    fn w1_to_uniform_examples() {
        let m = EmpiricalMeasure::dirac(&[0.5]).unwrap();
        assert!((wasserstein1_to_uniform_1d(&m).unwrap() - 0.25).abs() < 1e-15);

        let m2 = EmpiricalMeasure::from_points(&[vec![0.0], vec![1.0]]).unwrap();
        assert!((wasserstein1_to_uniform_1d(&m2).unwrap() - 0.25).abs() < 1e-15);
    }

    #[test]
    fn w1_to_uniform_handles_points_outside_unit_interval() {
        // Single point at 2: transport everything from [0,1] to 2.
        // W1 = ∫ |0 or 1 - F| = mean distance = E|U - 2| = 1.5.
        let m = EmpiricalMeasure::dirac(&[2.0]).unwrap();
        assert!((wasserstein1_to_uniform_1d(&m).unwrap() - 1.5).abs() < 1e-12);
    }

    #[test]
    fn w1_to_uniform_matches_riemann_oracle() {
        let spec = DistributionSpec::uniform_cube(1).unwrap();
        for seed in 0..5 {
            let m = sample_iid(&spec, 37, seed).unwrap();
            let exact = wasserstein1_to_uniform_1d(&m).unwrap();
            // Midpoint Riemann sum of |F_n - F| over [-0.5, 1.5].
            let mut xs: Vec<f64> = m.as_flat().to_vec();
            xs.sort_by(|u, v| u.partial_cmp(v).unwrap());
            let grid = 2_000_000;
            let (lo, hi) = (-0.5, 1.5);
            let h = (hi - lo) / grid as f64;
            let mut acc = 0.0;
            for k in 0..grid {
                let t = lo + (k as f64 + 0.5) * h;
                let fnv = xs.partition_point(|&x| x <= t) as f64 / xs.len() as f64;
                acc += (fnv - t.clamp(0.0, 1.0)).abs() * h;
            }
            assert!(
                (exact - acc).abs() < 1e-5,
                "seed {seed}: exact {exact} vs riemann {acc}"
            );
        }
    }

    #[test]
    fn w1_to_uniform_scales_like_inverse_sqrt_n() {
        let spec = DistributionSpec::uniform_cube(1).unwrap();
        for seed in 0..20 {
            for n in [100, 400, 1600] {
                let m = sample_iid(&spec, n, 1000 + seed).unwrap();
                let w = wasserstein1_to_uniform_1d(&m).unwrap();
                assert!(
                    w <= 2.0 / (n as f64).sqrt(),
                    "n={n} seed={seed}: W1={w} exceeds 2/sqrt(n)"
                );
            }
        }
    }

    #[test]
    fn rate_examples() {
        assert!((rate_r_q(1, 100) - 0.1).abs() < 1e-15);
        assert!((rate_r_q(3, 1000) - 0.1).abs() < 1e-15);
        let expected = (99.0f64).powf(-0.5) * (100.0f64).ln();
        assert!((rate_r_q(2, 99) - expected).abs() < 1e-15);
        assert!((rate_r_q(2, 99) - 0.46284).abs() < 1e-5);
    }

    #[test]
    fn rate_is_strictly_decreasing_in_n() {
        // The q = 2 branch n^{-1/2} log(1+n) peaks at n ~ 3.9 and decreases
        // only from n = 4 on; all other branches decrease from n = 2.
        for q in [1usize, 2, 3, 5] {
            let start = if q == 2 { 4 } else { 2 };
            let mut prev = rate_r_q(q, start);
            let mut n = start;
            while n < 1_000_000 {
                let next_n = n + 1 + n / 64; // dense at the low end, sparse later
                let cur = rate_r_q(q, next_n);
                assert!(cur < prev, "q={q}: R({next_n}) >= R({n})");
                prev = cur;
                n = next_n;
            }
        }
        assert!(rate_r_q(2, 2) < rate_r_q(2, 4), "the q=2 bump is real");
    }

    #[test]
    fn moment_scaling_is_exact_in_lambda_pow_r() {
        let m = EmpiricalMeasure::from_points(&[vec![1.0, -2.0], vec![0.5, 3.0]]).unwrap();
        for &(lambda, r) in &[(1.5f64, 2.0f64), (2.0, 1.0), (3.0, 0.5)] {
            let scaled: Vec<Vec<f64>> = m
                .points()
                .map(|p| p.iter().map(|x| lambda * x).collect())
                .collect();
            let ms = EmpiricalMeasure::from_points(&scaled).unwrap();
            let lhs = moment(&ms, r).unwrap();
            let rhs = lambda.powf(r) * moment(&m, r).unwrap();
            assert!((lhs - rhs).abs() <= 1e-12 * rhs.abs().max(1.0));
        }
    }

    #[test]
    fn discrete_spec_validation() {
        assert!(DistributionSpec::discrete(vec![vec![1.0]], vec![0.5]).is_err());
        assert!(DistributionSpec::discrete(vec![vec![1.0]], vec![-1.0]).is_err());
        assert!(
            DistributionSpec::discrete(vec![vec![1.0], vec![2.0, 3.0]], vec![0.5, 0.5]).is_err()
        );
        assert!(DistributionSpec::discrete(vec![vec![1.0], vec![2.0]], vec![0.25, 0.75]).is_ok());
    }

    #[test]
    fn discrete_sampling_hits_expected_frequencies() {
        let spec =
            DistributionSpec::discrete(vec![vec![0.0], vec![1.0]], vec![0.25, 0.75]).unwrap();
        let m = sample_iid(&spec, 100_000, 3).unwrap();
        let ones = m.points().filter(|p| p[0] == 1.0).count() as f64 / m.len() as f64;
        assert!((ones - 0.75).abs() < 0.01, "frequency {ones}");
    }

    #[test]
    fn replicate_preserves_the_measure() {
        let m = EmpiricalMeasure::from_points(&[vec![0.0], vec![1.0]]).unwrap();
        let r = m.replicate(3).unwrap();
        assert_eq!(r.len(), 6);
        // As a measure nothing moved: W1 distance between m (replicated to
        // match sizes) and r is zero.
        assert_eq!(
            wasserstein1_sorted_1d(&r, &m.replicate(3).unwrap()).unwrap(),
            0.0
        );
    }
}
