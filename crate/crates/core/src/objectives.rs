//! Datasets, losses and gradient oracles.
//!
//! The objective is the plain average of per-sample losses over the whole
//! training set. Two losses are provided: a separable quadratic
//! `f(x; s) = 1/2 sum_j h_j (x_j - s_j)^2` whose constants are known in
//! closed form, and binary logistic regression. Both accept an L2 term
//! `lambda/2 ||x||^2`.

use std::path::Path;

use rand::seq::index;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{dot, norm_sq, Matrix};
use crate::spectral;

const IDX_IMAGES_MAGIC: u32 = 0x0000_0803;
const IDX_LABELS_MAGIC: u32 = 0x0000_0801;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    SyntheticQuadratic,
    SyntheticLogreg,
    IdxFile,
}

/// Row-major sample matrix with one label per sample.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    dim: usize,
    features: Vec<f64>,
    labels: Vec<f64>,
    pub provenance: Provenance,
}

impl Dataset {
    pub fn new(
        dim: usize,
        features: Vec<f64>,
        labels: Vec<f64>,
        provenance: Provenance,
    ) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Objective("zero-dimensional samples".into()));
        }
        if labels.is_empty() {
            return Err(Error::Objective("empty dataset".into()));
        }
        if features.len() != dim * labels.len() {
            return Err(Error::Dimension(format!(
                "{} feature values for {} samples of dimension {dim}",
                features.len(),
                labels.len()
            )));
        }
        if features.iter().chain(&labels).any(|x| !x.is_finite()) {
            return Err(Error::Objective("non-finite entry".into()));
        }
        if provenance != Provenance::SyntheticQuadratic
            && labels.iter().any(|&y| y != 0.0 && y != 1.0)
        {
            return Err(Error::Objective("binary labels must be 0 or 1".into()));
        }
        Ok(Self {
            dim,
            features,
            labels,
            provenance,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn sample(&self, i: usize) -> &[f64] {
        &self.features[i * self.dim..(i + 1) * self.dim]
    }

    pub fn label(&self, i: usize) -> f64 {
        self.labels[i]
    }

    pub fn labels(&self) -> &[f64] {
        &self.labels
    }

    /// Samples at the given indices, in order.
    pub fn subset(&self, indices: &[usize]) -> Result<Dataset> {
        let mut features = Vec::with_capacity(indices.len() * self.dim);
        let mut labels = Vec::with_capacity(indices.len());
        for &i in indices {
            features.extend_from_slice(self.sample(i));
            labels.push(self.labels[i]);
        }
        Dataset::new(self.dim, features, labels, self.provenance)
    }

    /// Random train/test split; returns `(train, test)`.
    pub fn split(&self, test_fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
        if !(0.0..1.0).contains(&test_fraction) {
            return Err(Error::Objective(format!(
                "test fraction {test_fraction} outside [0, 1)"
            )));
        }
        let mut idx: Vec<usize> = (0..self.len()).collect();
        idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let n_test = ((self.len() as f64) * test_fraction).round() as usize;
        let (test, train) = idx.split_at(n_test.min(self.len() - 1));
        Ok((self.subset(train)?, self.subset(test)?))
    }

    pub fn mean_sample(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.dim];
        for i in 0..self.len() {
            for (mj, sj) in m.iter_mut().zip(self.sample(i)) {
                *mj += sj;
            }
        }
        let n = self.len() as f64;
        m.iter_mut().for_each(|x| *x /= n);
        m
    }
}

/// Local data of one worker as indices into the training set.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Shard {
    pub worker: usize,
    pub indices: Vec<usize>,
}

impl Shard {
    pub fn full(dataset: &Dataset) -> Self {
        Self {
            worker: 0,
            indices: (0..dataset.len()).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Loss {
    /// Per-coordinate curvature `h_j > 0`.
    Quadratic {
        curvature: Vec<f64>,
    },
    Logistic,
}

#[derive(Debug, Clone)]
pub struct Objective {
    pub loss: Loss,
    pub dataset: Dataset,
    pub regularization: f64,
    pub analytic_l: Option<f64>,
    pub analytic_sigma_sq: Option<f64>,
    pub analytic_beta: Option<f64>,
    /// Held-out samples for classification accuracy.
    pub test: Option<Dataset>,
}

impl Objective {
    pub fn quadratic(dataset: Dataset, curvature: Vec<f64>, regularization: f64) -> Result<Self> {
        if curvature.len() != dataset.dim() {
            return Err(Error::Dimension(format!(
                "{} curvatures for dimension {}",
                curvature.len(),
                dataset.dim()
            )));
        }
        if curvature.iter().any(|&h| !(h > 0.0 && h.is_finite())) {
            return Err(Error::Objective("curvatures must be positive".into()));
        }
        check_regularization(regularization)?;
        let l = curvature.iter().fold(0.0f64, |m, &h| m.max(h)) + regularization;
        Ok(Self {
            loss: Loss::Quadratic { curvature },
            dataset,
            regularization,
            analytic_l: Some(l),
            analytic_sigma_sq: None,
            analytic_beta: Some(0.0),
            test: None,
        })
    }

    pub fn logistic(dataset: Dataset, regularization: f64) -> Result<Self> {
        check_regularization(regularization)?;
        let mut obj = Self {
            loss: Loss::Logistic,
            dataset,
            regularization,
            analytic_l: None,
            analytic_sigma_sq: None,
            analytic_beta: None,
            test: None,
        };
        obj.analytic_l = Some(logistic_smoothness(&obj.dataset)? + regularization);
        Ok(obj)
    }

    pub fn with_test_set(mut self, test: Dataset) -> Result<Self> {
        if test.dim() != self.dataset.dim() {
            return Err(Error::Dimension(
                "test set dimension differs from training set".into(),
            ));
        }
        self.test = Some(test);
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.dataset.dim()
    }

    fn sample_loss(&self, x: &[f64], i: usize) -> f64 {
        let s = self.dataset.sample(i);
        match &self.loss {
            Loss::Quadratic { curvature } => {
                0.5 * x
                    .iter()
                    .zip(s)
                    .zip(curvature)
                    .map(|((xj, sj), h)| h * (xj - sj) * (xj - sj))
                    .sum::<f64>()
            }
            Loss::Logistic => {
                let z = dot(x, s);
                softplus(z) - self.dataset.label(i) * z
            }
        }
    }

    /// Adds `grad f(x; s_i)` (without the L2 term) into `out`.
    fn add_sample_gradient(&self, x: &[f64], i: usize, out: &mut [f64]) {
        let s = self.dataset.sample(i);
        match &self.loss {
            Loss::Quadratic { curvature } => {
                for (((o, xj), sj), h) in out.iter_mut().zip(x).zip(s).zip(curvature) {
                    *o += h * (xj - sj);
                }
            }
            Loss::Logistic => {
                let r = sigmoid(dot(x, s)) - self.dataset.label(i);
                for (o, sj) in out.iter_mut().zip(s) {
                    *o += r * sj;
                }
            }
        }
    }

    /// Average gradient over `indices` (which must be non-empty), L2 term included.
    fn average_gradient(
        &self,
        x: &[f64],
        indices: impl ExactSizeIterator<Item = usize>,
    ) -> Vec<f64> {
        let count = indices.len() as f64;
        let mut g = vec![0.0; x.len()];
        for i in indices {
            self.add_sample_gradient(x, i, &mut g);
        }
        for (gj, xj) in g.iter_mut().zip(x) {
            *gj = *gj / count + self.regularization * xj;
        }
        g
    }

    fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::Dimension(format!(
                "model has dimension {}, objective expects {}",
                x.len(),
                self.dim()
            )));
        }
        Ok(())
    }

    pub fn value(&self, x: &[f64]) -> Result<f64> {
        self.check_dim(x)?;
        let n = self.dataset.len();
        let total: f64 = (0..n).map(|i| self.sample_loss(x, i)).sum();
        Ok(total / n as f64 + 0.5 * self.regularization * norm_sq(x))
    }

    pub fn gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(x)?;
        Ok(self.average_gradient(x, 0..self.dataset.len()))
    }

    /// Value and gradient of the full training objective.
    pub fn full_objective(&self, x: &[f64]) -> Result<(f64, Vec<f64>)> {
        Ok((self.value(x)?, self.gradient(x)?))
    }

    pub fn shard_gradient(&self, shard: &Shard, x: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(x)?;
        if shard.is_empty() {
            return Err(Error::Objective(format!(
                "worker {} has an empty shard",
                shard.worker
            )));
        }
        Ok(self.average_gradient(x, shard.indices.iter().copied()))
    }

    /// Mini-batch gradient on a uniformly drawn batch without replacement.
    ///
    /// Selected positions are visited in shard order, so a batch covering
    /// the whole shard reproduces [`Objective::shard_gradient`] bit for bit.
    pub fn minibatch_gradient<R: Rng + ?Sized>(
        &self,
        shard: &Shard,
        x: &[f64],
        batch_size: usize,
        rng: &mut R,
    ) -> Result<Vec<f64>> {
        self.check_dim(x)?;
        if shard.is_empty() {
            return Err(Error::Objective(format!(
                "worker {} has an empty shard",
                shard.worker
            )));
        }
        if batch_size == 0 || batch_size > shard.len() {
            return Err(Error::Objective(format!(
                "batch size {batch_size} invalid for shard of {} samples",
                shard.len()
            )));
        }
        let mut pos = index::sample(rng, shard.len(), batch_size).into_vec();
        pos.sort_unstable();
        Ok(self.average_gradient(x, pos.into_iter().map(|p| shard.indices[p])))
    }

    /// Fraction of held-out samples classified correctly at threshold 0.5.
    pub fn accuracy(&self, x: &[f64]) -> Option<f64> {
        let test = self.test.as_ref()?;
        if !matches!(self.loss, Loss::Logistic) || x.len() != test.dim() {
            return None;
        }
        let correct = (0..test.len())
            .filter(|&i| {
                let predicted = if sigmoid(dot(x, test.sample(i))) >= 0.5 {
                    1.0
                } else {
                    0.0
                };
                predicted == test.label(i)
            })
            .count();
        Some(correct as f64 / test.len() as f64)
    }

    /// Closed-form minimizer and minimum for the quadratic loss.
    pub fn quadratic_minimum(&self) -> Option<(Vec<f64>, f64)> {
        let Loss::Quadratic { curvature } = &self.loss else {
            return None;
        };
        let mean = self.dataset.mean_sample();
        let x: Vec<f64> = mean
            .iter()
            .zip(curvature)
            .map(|(m, h)| h * m / (h + self.regularization))
            .collect();
        let f = self.value(&x).ok()?;
        Some((x, f))
    }

    /// Lower estimate of `F_inf`: closed form for the quadratic, otherwise
    /// the best value found by full-batch gradient descent from zero with
    /// step `1/L`.
    pub fn f_inf(&self, gd_iters: usize) -> Result<f64> {
        if let Some((_, f)) = self.quadratic_minimum() {
            return Ok(f);
        }
        let l = self.analytic_l.unwrap_or(1.0).max(1e-12);
        let mut x = vec![0.0; self.dim()];
        let mut best = self.value(&x)?;
        for _ in 0..gd_iters {
            let g = self.gradient(&x)?;
            for (xj, gj) in x.iter_mut().zip(&g) {
                *xj -= gj / l;
            }
            best = best.min(self.value(&x)?);
        }
        Ok(best)
    }
}

fn check_regularization(lambda: f64) -> Result<()> {
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::Objective(format!(
            "regularization {lambda} must be nonnegative"
        )));
    }
    Ok(())
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

/// `lambda_max((1/n) sum_i s_i s_iᵀ) / 4`, the gradient Lipschitz constant
/// of the unregularized logistic loss.
pub fn logistic_smoothness(dataset: &Dataset) -> Result<f64> {
    let d = dataset.dim();
    let mut gram = Matrix::zeros(d, d);
    for i in 0..dataset.len() {
        let s = dataset.sample(i);
        for c in 0..d {
            for r in 0..d {
                gram[(r, c)] += s[r] * s[c];
            }
        }
    }
    let n = dataset.len() as f64;
    let gram = Matrix::from_fn(d, d, |r, c| gram[(r, c)] / n);
    let eig = spectral::symmetric_eigen(&gram)?;
    Ok(eig.values[0].max(0.0) / 4.0)
}

/// `max_i ||s_i||^2 / 4`, a looser bound on the logistic smoothness.
pub fn logistic_smoothness_crude(dataset: &Dataset) -> f64 {
    (0..dataset.len())
        .map(|i| norm_sq(dataset.sample(i)))
        .fold(0.0, f64::max)
        / 4.0
}

/// Exact worst-case mini-batch noise `E||g - grad F||^2` for the quadratic
/// loss over the given shards. The noise does not depend on `x`, so `beta = 0`.
///
/// For shard `S_i` with mean `m_i`, batches drawn without replacement give
/// `||h (m_i - m)||^2 + (n_i - b)/((n_i - 1) b) * (1/n_i) sum ||h (s - m_i)||^2`.
pub fn quadratic_noise(obj: &Objective, shards: &[Shard], batch_size: usize) -> Result<f64> {
    let Loss::Quadratic { curvature } = &obj.loss else {
        return Err(Error::Objective(
            "closed-form noise needs the quadratic loss".into(),
        ));
    };
    let global = obj.dataset.mean_sample();
    let mut worst: f64 = 0.0;
    for shard in shards {
        let ni = shard.len();
        if ni == 0 || batch_size > ni {
            return Err(Error::Objective(format!(
                "batch size {batch_size} invalid for shard of {ni} samples"
            )));
        }
        let local = obj.dataset.subset(&shard.indices)?;
        let m = local.mean_sample();
        let bias: f64 = m
            .iter()
            .zip(&global)
            .zip(curvature)
            .map(|((a, b), h)| (h * (a - b)).powi(2))
            .sum();
        let spread: f64 = (0..ni)
            .map(|k| {
                local
                    .sample(k)
                    .iter()
                    .zip(&m)
                    .zip(curvature)
                    .map(|((s, mj), h)| (h * (s - mj)).powi(2))
                    .sum::<f64>()
            })
            .sum::<f64>()
            / ni as f64;
        let fpc = if ni > 1 {
            (ni - batch_size) as f64 / ((ni - 1) as f64 * batch_size as f64)
        } else {
            0.0
        };
        worst = worst.max(bias + fpc * spread);
    }
    Ok(worst)
}

/// Random disjoint shards with sizes proportional to `fractions`.
///
/// The target total is `round(n * sum(fractions))`; sizes are the floors of
/// `n * f_i` plus one extra sample for the largest remainders.
pub fn partition_iid(n_samples: usize, fractions: &[f64], seed: u64) -> Result<Vec<Shard>> {
    if fractions.iter().any(|&f| !(f >= 0.0 && f.is_finite())) {
        return Err(Error::Objective("fractions must be nonnegative".into()));
    }
    let total_frac: f64 = fractions.iter().sum();
    if total_frac > 1.0 + 1e-9 {
        return Err(Error::Objective(format!(
            "fractions sum to {total_frac} > 1"
        )));
    }
    let n = n_samples as f64;
    let target = ((n * total_frac).round() as usize).min(n_samples);
    let mut sizes: Vec<usize> = fractions.iter().map(|f| (n * f).floor() as usize).collect();
    let assigned: usize = sizes.iter().sum();
    let mut order: Vec<usize> = (0..fractions.len()).collect();
    order.sort_by(|&i, &j| {
        let ri = n * fractions[i] - sizes[i] as f64;
        let rj = n * fractions[j] - sizes[j] as f64;
        rj.total_cmp(&ri).then(i.cmp(&j))
    });
    for &i in order.iter().take(target.saturating_sub(assigned)) {
        sizes[i] += 1;
    }

    let mut perm: Vec<usize> = (0..n_samples).collect();
    perm.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut start = 0;
    Ok(sizes
        .iter()
        .enumerate()
        .map(|(worker, &size)| {
            let indices = perm[start..start + size].to_vec();
            start += size;
            Shard { worker, indices }
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Constants {
    pub l: f64,
    pub sigma_sq: f64,
    pub beta: f64,
}

/// Empirical estimates of the smoothness constant and the noise model
/// `E||g - grad F||^2 <= beta ||grad F||^2 + sigma^2`.
///
/// Probe points are standard normal. `L` is the largest gradient difference
/// quotient over probe pairs (or the closed form for the quadratic loss).
/// The noise at each probe is averaged over `draws` mini-batches from
/// `shard`, then `(beta, sigma^2)` are fitted by least squares and clipped
/// at zero.
pub fn estimate_constants(
    obj: &Objective,
    shard: &Shard,
    batch_size: usize,
    probe_count: usize,
    draws: usize,
    seed: u64,
) -> Result<Constants> {
    if probe_count < 2 {
        return Err(Error::Objective(
            "at least two probe points required".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dim = obj.dim();
    let probes: Vec<Vec<f64>> = (0..probe_count)
        .map(|_| (0..dim).map(|_| standard_normal(&mut rng)).collect())
        .collect();
    let grads: Vec<Vec<f64>> = probes
        .iter()
        .map(|x| obj.gradient(x))
        .collect::<Result<_>>()?;

    let l = match (&obj.loss, obj.analytic_l) {
        (Loss::Quadratic { .. }, Some(l)) => l,
        _ => {
            let mut best: f64 = 0.0;
            for i in 0..probe_count {
                for j in i + 1..probe_count {
                    let dx: f64 = probes[i]
                        .iter()
                        .zip(&probes[j])
                        .map(|(a, b)| (a - b).powi(2))
                        .sum();
                    let dg: f64 = grads[i]
                        .iter()
                        .zip(&grads[j])
                        .map(|(a, b)| (a - b).powi(2))
                        .sum();
                    if dx > 0.0 {
                        best = best.max((dg / dx).sqrt());
                    }
                }
            }
            best
        }
    };

    let draws = draws.max(1);
    let mut xs = Vec::with_capacity(probe_count);
    let mut ys = Vec::with_capacity(probe_count);
    for (x, g) in probes.iter().zip(&grads) {
        let mut var = 0.0;
        for _ in 0..draws {
            let gb = obj.minibatch_gradient(shard, x, batch_size, &mut rng)?;
            var += gb.iter().zip(g).map(|(a, b)| (a - b).powi(2)).sum::<f64>();
        }
        xs.push(norm_sq(g));
        ys.push(var / draws as f64);
    }
    let (beta, sigma_sq) = fit_nonnegative_line(&xs, &ys);
    Ok(Constants { l, sigma_sq, beta })
}

/// Least-squares `y = slope x + intercept` with both coefficients clipped to >= 0.
fn fit_nonnegative_line(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let intercept = my - slope * mx;
    if slope < 0.0 {
        (0.0, my.max(0.0))
    } else if intercept < 0.0 {
        let sxx0: f64 = xs.iter().map(|x| x * x).sum();
        let sxy0: f64 = xs.iter().zip(ys).map(|(x, y)| x * y).sum();
        (
            if sxx0 > 0.0 {
                (sxy0 / sxx0).max(0.0)
            } else {
                0.0
            },
            0.0,
        )
    } else {
        (slope, intercept)
    }
}

/// Gaussian samples around a random center; feature `j` has scale
/// `1 + spread * j / dim`.
pub fn synthetic_quadratic(n: usize, dim: usize, spread: f64, seed: u64) -> Result<Dataset> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let center: Vec<f64> = (0..dim).map(|_| standard_normal(&mut rng)).collect();
    let mut features = Vec::with_capacity(n * dim);
    for _ in 0..n {
        for (j, c) in center.iter().enumerate() {
            let scale = 1.0 + spread * j as f64 / dim as f64;
            features.push(c + scale * standard_normal(&mut rng));
        }
    }
    Dataset::new(dim, features, vec![0.0; n], Provenance::SyntheticQuadratic)
}

/// Binary labels from a planted logistic model.
///
/// Features are Gaussian with geometrically decaying scales (ratio
/// `condition^(-j/(dim-1))`) and the last coordinate is a constant bias
/// feature. Labels are Bernoulli(sigmoid(w*ᵀ s)) with `||w*|| = signal`.
pub fn synthetic_logistic(
    n: usize,
    dim: usize,
    condition: f64,
    signal: f64,
    seed: u64,
) -> Result<Dataset> {
    if dim < 2 {
        return Err(Error::Objective(
            "logistic surrogate needs dimension >= 2".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let informative = dim - 1;
    let scales: Vec<f64> = (0..informative)
        .map(|j| {
            if informative == 1 {
                1.0
            } else {
                condition.powf(-(j as f64) / (informative - 1) as f64)
            }
        })
        .collect();
    let mut w: Vec<f64> = (0..dim).map(|_| standard_normal(&mut rng)).collect();
    let wn = norm_sq(&w).sqrt();
    w.iter_mut().for_each(|x| *x *= signal / wn);

    let mut features = Vec::with_capacity(n * dim);
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        let start = features.len();
        for s in &scales {
            features.push(s * standard_normal(&mut rng));
        }
        features.push(1.0);
        let z = dot(&w, &features[start..]);
        labels.push(if rng.gen::<f64>() < sigmoid(z) {
            1.0
        } else {
            0.0
        });
    }
    Dataset::new(dim, features, labels, Provenance::SyntheticLogreg)
}

fn read_u32(bytes: &[u8], offset: usize) -> Option<u32> {
    bytes
        .get(offset..offset + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
}

/// Parses an IDX3 image file into flattened pixel rows scaled to `[0, 1]`.
/// Returns `(count, rows * cols, pixels)`.
pub fn parse_idx_images(bytes: &[u8]) -> std::result::Result<(usize, usize, Vec<f64>), String> {
    let magic = read_u32(bytes, 0).ok_or("truncated header")?;
    if magic != IDX_IMAGES_MAGIC {
        return Err(format!("bad image magic {magic:#010x}"));
    }
    let count = read_u32(bytes, 4).ok_or("truncated header")? as usize;
    let rows = read_u32(bytes, 8).ok_or("truncated header")? as usize;
    let cols = read_u32(bytes, 12).ok_or("truncated header")? as usize;
    let pixels = count * rows * cols;
    let body = bytes.get(16..16 + pixels).ok_or_else(|| {
        format!(
            "truncated body: expected {pixels} pixel bytes, found {}",
            bytes.len().saturating_sub(16)
        )
    })?;
    Ok((
        count,
        rows * cols,
        body.iter().map(|&p| p as f64 / 255.0).collect(),
    ))
}

/// Parses an IDX1 label file, mapping classes 0-4 to 0 and 5-9 to 1.
pub fn parse_idx_labels(bytes: &[u8]) -> std::result::Result<Vec<f64>, String> {
    let magic = read_u32(bytes, 0).ok_or("truncated header")?;
    if magic != IDX_LABELS_MAGIC {
        return Err(format!("bad label magic {magic:#010x}"));
    }
    let count = read_u32(bytes, 4).ok_or("truncated header")? as usize;
    let body = bytes
        .get(8..8 + count)
        .ok_or_else(|| format!("truncated body: expected {count} labels"))?;
    Ok(body
        .iter()
        .map(|&c| if c < 5 { 0.0 } else { 1.0 })
        .collect())
}

/// Loads a binary classification dataset from an IDX image/label pair.
pub fn load_idx(images: &Path, labels: &Path) -> Result<Dataset> {
    let read = |p: &Path| {
        std::fs::read(p).map_err(|source| Error::Io {
            path: p.to_path_buf(),
            source,
        })
    };
    let idx_err = |p: &Path, reason: String| Error::Idx {
        path: p.to_path_buf(),
        reason,
    };
    let (count, dim, features) =
        parse_idx_images(&read(images)?).map_err(|r| idx_err(images, r))?;
    let ys = parse_idx_labels(&read(labels)?).map_err(|r| idx_err(labels, r))?;
    if ys.len() != count {
        return Err(idx_err(
            labels,
            format!("{} labels for {count} images", ys.len()),
        ));
    }
    Dataset::new(dim, features, ys, Provenance::IdxFile)
}

pub fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.sample(StandardNormal)
}
