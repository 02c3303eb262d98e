//! Eigenvalues, weighted norms and numerical checks of the mixing algebra.
//!
//! All hub and worker operators here are reversible with respect to a
//! weight vector `w` (`M diag(w)` is symmetric), so
//! `diag(w)^{-1/2} M diag(w)^{1/2}` is symmetric and the spectrum is real.
//! The eigensolver is cyclic Jacobi on that symmetric similar matrix.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::topology::{column_stochastic_residual, detailed_balance_residual, MixingSet, Operator};

const JACOBI_TOL: f64 = 1e-13;
const JACOBI_MAX_SWEEPS: usize = 100;
const SYMMETRY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SpectrumMethod {
    SymmetricSimilar,
    PowerIteration,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Spectrum {
    /// Sorted descending by value.
    pub eigenvalues: Vec<f64>,
    pub method: SpectrumMethod,
}

/// Eigen-decomposition of a symmetric matrix: `S = Q diag(values) Qᵀ`.
#[derive(Debug, Clone)]
pub struct SymmetricEigen {
    /// Sorted descending; `vectors` columns follow the same order.
    pub values: Vec<f64>,
    pub vectors: Matrix,
    pub sweeps: usize,
}

fn off_diagonal_norm(a: &Matrix) -> f64 {
    let n = a.rows();
    let mut s = 0.0;
    for j in 0..n {
        for i in 0..n {
            if i != j {
                s += a[(i, j)] * a[(i, j)];
            }
        }
    }
    s.sqrt()
}

/// Cyclic Jacobi eigensolver for symmetric matrices.
///
/// Sweeps over all `(p, q)` pairs with a rotation that annihilates `a[p][q]`
/// until the off-diagonal Frobenius norm drops below `1e-13 * ||S||_F`.
pub fn symmetric_eigen(s: &Matrix) -> Result<SymmetricEigen> {
    if !s.is_square() {
        return Err(Error::Dimension(format!(
            "eigensolver needs a square matrix, got {}x{}",
            s.rows(),
            s.cols()
        )));
    }
    if !s.is_finite() {
        return Err(Error::Eigen("non-finite entry".into()));
    }
    let n = s.rows();
    let scale = s.frobenius();
    let asym = (0..n)
        .flat_map(|i| (0..i).map(move |j| (i, j)))
        .fold(0.0f64, |m, (i, j)| m.max((s[(i, j)] - s[(j, i)]).abs()));
    if asym > SYMMETRY_TOL * scale.max(1.0) {
        return Err(Error::Eigen(format!(
            "matrix is not symmetric (residual {asym:.3e})"
        )));
    }

    let mut a = s.clone();
    let mut q = Matrix::identity(n);
    let threshold = JACOBI_TOL * scale;
    let mut sweeps = 0;
    while sweeps < JACOBI_MAX_SWEEPS && off_diagonal_norm(&a) > threshold {
        sweeps += 1;
        for p in 0..n {
            for r in p + 1..n {
                let apr = a[(p, r)];
                if apr == 0.0 {
                    continue;
                }
                let app = a[(p, p)];
                let arr = a[(r, r)];
                let theta = (arr - app) / (2.0 * apr);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let sn = t * c;

                for k in 0..n {
                    let akp = a[(k, p)];
                    let akr = a[(k, r)];
                    a[(k, p)] = c * akp - sn * akr;
                    a[(k, r)] = sn * akp + c * akr;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let ark = a[(r, k)];
                    a[(p, k)] = c * apk - sn * ark;
                    a[(r, k)] = sn * apk + c * ark;
                }
                a[(p, r)] = 0.0;
                a[(r, p)] = 0.0;
                for k in 0..n {
                    let qkp = q[(k, p)];
                    let qkr = q[(k, r)];
                    q[(k, p)] = c * qkp - sn * qkr;
                    q[(k, r)] = sn * qkp + c * qkr;
                }
            }
        }
    }
    if off_diagonal_norm(&a) > threshold {
        return Err(Error::Eigen(format!(
            "Jacobi did not converge in {JACOBI_MAX_SWEEPS} sweeps"
        )));
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(j, j)].total_cmp(&a[(i, i)]));
    let values = order.iter().map(|&i| a[(i, i)]).collect();
    let vectors = Matrix::from_fn(n, n, |i, j| q[(i, order[j])]);
    Ok(SymmetricEigen {
        values,
        vectors,
        sweeps,
    })
}

/// `diag(w)^{-1/2} M diag(w)^{1/2}`, symmetric when `M` is reversible w.r.t. `w`.
pub fn symmetrize(m: &Matrix, w: &[f64]) -> Result<Matrix> {
    if !m.is_square() || m.rows() != w.len() {
        return Err(Error::Dimension(format!(
            "{}x{} matrix with weight vector of length {}",
            m.rows(),
            m.cols(),
            w.len()
        )));
    }
    if let Some(k) = w.iter().position(|&x| x.is_nan() || x <= 0.0) {
        return Err(Error::Dimension(format!("weight {k} is not positive")));
    }
    let sq: Vec<f64> = w.iter().map(|x| x.sqrt()).collect();
    Ok(Matrix::from_fn(m.rows(), m.cols(), |i, j| {
        m[(i, j)] * sq[j] / sq[i]
    }))
}

/// Real spectrum of a matrix reversible with respect to `w`.
pub fn eigen_reversible(m: &Matrix, w: &[f64]) -> Result<Spectrum> {
    let s = symmetrize(m, w)?;
    let n = s.rows();
    let mut asym: f64 = 0.0;
    for i in 0..n {
        for j in 0..i {
            asym = asym.max((s[(i, j)] - s[(j, i)]).abs());
        }
    }
    if asym > SYMMETRY_TOL {
        return Err(Error::Eigen(format!(
            "symmetrized matrix has asymmetry {asym:.3e}; matrix and weights are not in detailed balance"
        )));
    }
    let eig = symmetric_eigen(&s)?;
    Ok(Spectrum {
        eigenvalues: eig.values,
        method: SpectrumMethod::SymmetricSimilar,
    })
}

pub fn eigen_detailed_balance(h: &Matrix, b: &[f64]) -> Result<Spectrum> {
    eigen_reversible(h, b)
}

/// Largest magnitude among the non-principal eigenvalues; 0 for a single hub.
pub fn zeta(spectrum: &Spectrum) -> f64 {
    let ev = &spectrum.eigenvalues;
    match ev.len() {
        0 | 1 => 0.0,
        n => ev[1].abs().max(ev[n - 1].abs()),
    }
}

/// `sum_j a_j ||x_j||^2` over the columns of `x`.
pub fn weighted_frobenius_sq(x: &Matrix, a: &[f64]) -> Result<f64> {
    if x.cols() != a.len() {
        return Err(Error::Dimension(format!(
            "{} columns weighted by vector of length {}",
            x.cols(),
            a.len()
        )));
    }
    Ok(x.columns()
        .zip(a)
        .map(|(c, &w)| w * c.iter().map(|v| v * v).sum::<f64>())
        .sum())
}

/// Largest singular value, `sqrt(lambda_max(QᵀQ))`.
pub fn operator_norm(q: &Matrix) -> Result<f64> {
    let gram = &q.transpose() * q;
    // Jacobi runs on the exactly symmetric part; the product is symmetric up to rounding
    let n = gram.rows();
    let sym = Matrix::from_fn(n, n, |i, j| 0.5 * (gram[(i, j)] + gram[(j, i)]));
    let eig = symmetric_eigen(&sym)?;
    Ok(eig.values.first().copied().unwrap_or(0.0).max(0.0).sqrt())
}

/// Operator norm induced by the `a`-weighted Euclidean norm on row vectors:
/// `||diag(a)^{-1/2} Q diag(a)^{1/2}||_op`. Coincides with [`operator_norm`]
/// when `a` is uniform.
pub fn weighted_operator_norm(q: &Matrix, a: &[f64]) -> Result<f64> {
    operator_norm(&symmetrize(q, a)?)
}

/// Power iteration estimate of the dominant non-principal eigenvalue
/// magnitude, for cross-checking [`zeta`] on large hub graphs.
pub fn power_iteration_zeta(h: &Matrix, b: &[f64], iters: usize, seed: u64) -> Result<Spectrum> {
    let s = symmetrize(h, b)?;
    let n = s.rows();
    if n < 2 {
        return Ok(Spectrum {
            eigenvalues: vec![1.0],
            method: SpectrumMethod::PowerIteration,
        });
    }
    // principal eigenvector of the symmetrized matrix is sqrt(b)
    let principal: Vec<f64> = b.iter().map(|x| x.sqrt()).collect();
    let deflate = |x: &mut Vec<f64>| {
        let c = crate::matrix::dot(x, &principal);
        for (xi, pi) in x.iter_mut().zip(&principal) {
            *xi -= c * pi;
        }
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x: Vec<f64> = (0..n).map(|_| rng.gen::<f64>() - 0.5).collect();
    deflate(&mut x);
    let mut lambda = 0.0;
    for _ in 0..iters {
        let norm = crate::matrix::norm_sq(&x).sqrt();
        if norm == 0.0 {
            break;
        }
        x.iter_mut().for_each(|v| *v /= norm);
        let mut y = s.mul_vec(&x)?;
        deflate(&mut y);
        lambda = crate::matrix::dot(&x, &y);
        x = y;
    }
    Ok(Spectrum {
        eigenvalues: vec![1.0, lambda.abs()],
        method: SpectrumMethod::PowerIteration,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct PropertyCheck {
    pub name: String,
    pub residual: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl PropertyCheck {
    fn new(name: impl Into<String>, residual: f64, tolerance: f64) -> Self {
        Self {
            name: name.into(),
            residual,
            tolerance,
            passed: residual <= tolerance,
        }
    }
}

/// Which operator norm the projector identities are checked in.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NormKind {
    /// Plain spectral norm.
    Plain,
    /// Norm induced by the `a`-weighted inner product.
    Weighted,
}

#[derive(Debug, Clone)]
pub struct VerifyOptions {
    pub tolerance: f64,
    pub power_tolerance: f64,
    pub max_power: u32,
    pub norm: NormKind,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self {
            tolerance: 1e-10,
            power_tolerance: 1e-7,
            max_power: 8,
            norm: NormKind::Plain,
        }
    }
}

/// Checks every algebraic property of a mixing set: stochasticity and
/// reversibility of `H`, `V`, `Z`, the Perron vectors, `ZV = VZ = Z`,
/// `TA = AT = A`, the spectrum relation between `Z` and `H`, `V² = V`, and
/// the operator-norm identities for powers of `Z`.
pub fn verify_mixing_set(mix: &MixingSet, opts: &VerifyOptions) -> Result<Vec<PropertyCheck>> {
    let tol = opts.tolerance;
    let n = mix.num_workers();
    let d = mix.num_subnets();
    let ones_n = vec![1.0; n];
    let mut checks = Vec::new();

    let nonneg = |m: &Matrix| (-m.min_entry()).max(0.0);
    let vec_res = |x: &[f64], y: &[f64]| {
        x.iter()
            .zip(y)
            .fold(0.0f64, |r, (p, q)| r.max((p - q).abs()))
    };

    checks.push(PropertyCheck::new("H nonnegative", nonneg(&mix.h), tol));
    checks.push(PropertyCheck::new(
        "H column stochastic",
        column_stochastic_residual(&mix.h),
        tol,
    ));
    checks.push(PropertyCheck::new(
        "H detailed balance w.r.t. b",
        detailed_balance_residual(&mix.h, &mix.b),
        tol,
    ));
    checks.push(PropertyCheck::new(
        "H b = b",
        vec_res(&mix.h.mul_vec(&mix.b)?, &mix.b),
        tol,
    ));
    for (name, m) in [("V", &mix.v_matrix), ("Z", &mix.z)] {
        checks.push(PropertyCheck::new(
            format!("{name} nonnegative"),
            nonneg(m),
            tol,
        ));
        checks.push(PropertyCheck::new(
            format!("{name} column stochastic"),
            column_stochastic_residual(m),
            tol,
        ));
        checks.push(PropertyCheck::new(
            format!("{name} a = a"),
            vec_res(&m.mul_vec(&mix.a)?, &mix.a),
            tol,
        ));
        checks.push(PropertyCheck::new(
            format!("1ᵀ {name} = 1ᵀ"),
            vec_res(&m.vec_mul(&ones_n)?, &ones_n),
            tol,
        ));
        checks.push(PropertyCheck::new(
            format!("{name} detailed balance w.r.t. a"),
            detailed_balance_residual(m, &mix.a),
            tol,
        ));
    }
    let simplex = |x: &[f64]| (x.iter().sum::<f64>() - 1.0).abs();
    checks.push(PropertyCheck::new(
        "a, b, v sum to one",
        simplex(&mix.a).max(simplex(&mix.b)).max(
            mix.members
                .iter()
                .map(|m| (m.iter().map(|&i| mix.v[i]).sum::<f64>() - 1.0).abs())
                .fold(0.0, f64::max),
        ),
        tol,
    ));
    checks.push(PropertyCheck::new(
        "a_i = b_d(i) v_i",
        (0..n).fold(0.0f64, |r, i| {
            r.max((mix.a[i] - mix.b[mix.subnet_of[i]] * mix.v[i]).abs())
        }),
        tol,
    ));

    let zv = &mix.z * &mix.v_matrix;
    let vz = &mix.v_matrix * &mix.z;
    checks.push(PropertyCheck::new(
        "ZV = VZ = Z",
        zv.max_abs_diff(&mix.z).max(vz.max_abs_diff(&mix.z)),
        tol,
    ));
    checks.push(PropertyCheck::new(
        "V V = V",
        (&mix.v_matrix * &mix.v_matrix).max_abs_diff(&mix.v_matrix),
        tol,
    ));

    let a_proj = mix.consensus_projector();
    let mut ta_res: f64 = 0.0;
    for op in [Operator::Identity, Operator::V, Operator::Z] {
        let t = mix.operator(op);
        ta_res = ta_res
            .max((&t * &a_proj).max_abs_diff(&a_proj))
            .max((&a_proj * &t).max_abs_diff(&a_proj));
    }
    checks.push(PropertyCheck::new("T A = A T = A", ta_res, tol));

    // nonzero spectrum of Z against spectrum of H
    let h_spec = eigen_detailed_balance(&mix.h, &mix.b)?;
    let z_spec = eigen_reversible(&mix.z, &mix.a)?;
    let mut by_mag = z_spec.eigenvalues.clone();
    by_mag.sort_by(|x, y| y.abs().total_cmp(&x.abs()));
    let mut top: Vec<f64> = by_mag[..d].to_vec();
    top.sort_by(|x, y| y.total_cmp(x));
    let spec_res = vec_res(&top, &h_spec.eigenvalues)
        .max(by_mag[d..].iter().fold(0.0f64, |r, x| r.max(x.abs())));
    checks.push(PropertyCheck::new("spec(Z) = spec(H) ∪ {0}", spec_res, tol));
    checks.push(PropertyCheck::new(
        "leading eigenvalue of H is 1",
        (h_spec.eigenvalues[0] - 1.0).abs(),
        tol,
    ));
    if d > 1 {
        checks.push(PropertyCheck::new(
            "zeta < 1",
            (mix.zeta - (1.0 - 1e-12)).max(0.0),
            0.0,
        ));
    }

    let norm = |m: &Matrix| match opts.norm {
        NormKind::Plain => operator_norm(m),
        NormKind::Weighted => weighted_operator_norm(m, &mix.a),
    };
    let tag = match opts.norm {
        NormKind::Plain => "op",
        NormKind::Weighted => "op,a",
    };
    let mut zj = Matrix::identity(n);
    let mut pow_res: f64 = 0.0;
    for j in 1..=opts.max_power {
        zj = &zj * &mix.z;
        let got = norm(&(&zj - &a_proj))?;
        pow_res = pow_res.max((got - mix.zeta.powi(j as i32)).abs());
    }
    checks.push(PropertyCheck::new(
        format!("||Z^j - A||_{tag} = zeta^j, j <= {}", opts.max_power),
        pow_res,
        opts.power_tolerance,
    ));
    let i_res = (norm(&(&Matrix::identity(n) - &a_proj))? - 1.0).abs();
    if n > 1 {
        checks.push(PropertyCheck::new(
            format!("||I - A||_{tag} = 1"),
            i_res,
            opts.power_tolerance,
        ));
    }
    if d > 1 {
        let v_res = (norm(&(&mix.v_matrix - &a_proj))? - 1.0).abs();
        checks.push(PropertyCheck::new(
            format!("||V - A||_{tag} = 1"),
            v_res,
            opts.power_tolerance,
        ));
    }
    Ok(checks)
}

#[derive(Debug, Clone, Serialize)]
pub struct Counterexample {
    pub trial: usize,
    pub inequality: &'static str,
    pub lhs: f64,
    pub rhs: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct NormInequalityReport {
    pub trials: usize,
    /// Smallest `rhs - lhs` seen for the weighted Frobenius product bound.
    pub min_slack_product: f64,
    /// Smallest `rhs - lhs` seen for the trace bound.
    pub min_slack_trace: f64,
    pub violations: Vec<Counterexample>,
}

impl NormInequalityReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

fn random_simplex<R: Rng>(n: usize, rng: &mut R) -> Vec<f64> {
    // Exp(1) draws normalized give a uniform point on the simplex
    let e: Vec<f64> = (0..n).map(|_| rng.sample(Exp1)).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|x| x / s).collect()
}

fn random_matrix<R: Rng>(rows: usize, cols: usize, rng: &mut R) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| rng.gen_range(-1.0..1.0))
}

/// Randomized check of
///
/// * `||C D||_{F_a} <= ||C||_{F_a} ||D||_op` for `D` reversible with respect
///   to `a` (`D diag(a)` symmetric, the class of `T - A` operators), and
///   `||C D||_{F_a} <= ||C||_{F_a} ||D||_{op,a}` for arbitrary `D`;
/// * `|tr(diag(a)^{1/2} C D diag(a)^{1/2})| <= ||C||_F ||D||_F`.
///
/// Dimensions are drawn from `1..=8`.
pub fn verify_norm_inequalities(trials: usize, seed: u64) -> Result<NormInequalityReport> {
    if trials == 0 {
        return Err(Error::Dimension("at least one trial required".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = NormInequalityReport {
        trials,
        min_slack_product: f64::INFINITY,
        min_slack_trace: f64::INFINITY,
        violations: Vec::new(),
    };
    let rel = 1e-12;
    for trial in 0..trials {
        let m = rng.gen_range(1..=8);
        let n = rng.gen_range(1..=8);
        let a = random_simplex(n, &mut rng);
        let c = random_matrix(m, n, &mut rng);
        let fa = |x: &Matrix| weighted_frobenius_sq(x, &a).map(f64::sqrt);

        // reversible D = diag(a)^{1/2} S diag(a)^{-1/2} with S symmetric
        let s = random_matrix(n, n, &mut rng);
        let s = Matrix::from_fn(n, n, |i, j| 0.5 * (s[(i, j)] + s[(j, i)]));
        let sq: Vec<f64> = a.iter().map(|x| x.sqrt()).collect();
        let d_rev = Matrix::from_fn(n, n, |i, j| sq[i] * s[(i, j)] / sq[j]);
        let d_gen = random_matrix(n, n, &mut rng);

        let cases = [
            (
                "||CD||_Fa <= ||C||_Fa ||D||_op (reversible D)",
                fa(&(&c * &d_rev))?,
                fa(&c)? * operator_norm(&d_rev)?,
            ),
            (
                "||CD||_Fa <= ||C||_Fa ||D||_op,a",
                fa(&(&c * &d_gen))?,
                fa(&c)? * weighted_operator_norm(&d_gen, &a)?,
            ),
        ];
        for (name, lhs, rhs) in cases {
            report.min_slack_product = report.min_slack_product.min(rhs - lhs);
            if lhs > rhs * (1.0 + rel) + 1e-300 {
                report.violations.push(Counterexample {
                    trial,
                    inequality: name,
                    lhs,
                    rhs,
                });
            }
        }

        // trace bound with C in R^{n x m}, D in R^{m x n}
        let ct = random_matrix(n, m, &mut rng);
        let dt = random_matrix(m, n, &mut rng);
        let cd = &ct * &dt;
        let tr: f64 = (0..n).map(|i| a[i] * cd[(i, i)]).sum();
        let rhs = ct.frobenius() * dt.frobenius();
        report.min_slack_trace = report.min_slack_trace.min(rhs - tr.abs());
        if tr.abs() > rhs * (1.0 + rel) {
            report.violations.push(Counterexample {
                trial,
                inequality: "|tr(diag(a)^1/2 C D diag(a)^1/2)| <= ||C||_F ||D||_F",
                lhs: tr.abs(),
                rhs,
            });
        }
    }
    Ok(report)
}
