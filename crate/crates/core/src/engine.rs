//! The simulation loop `X_{k+1} = (X_k - eta G_k) T_k`.
//!
//! Step `k` (zero-based, so the state before it is `X_k` with `X_0` the
//! common initialization) applies the operator `select_t(k + 1, tau, q)`.
//! Each worker owns two ChaCha streams derived from `(seed, worker)`: one
//! Bernoulli gate draw per step, and mini-batch draws that are consumed
//! only when the gate fires. Per-worker work may run on the rayon pool;
//! results never depend on the thread count.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::objectives::{standard_normal, Objective, Shard};
use crate::spectral;
use crate::topology::{select_t, MixingSet, Operator};

/// Models beyond this magnitude abort the run.
pub const DIVERGENCE_LIMIT: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Init {
    Zeros,
    Gaussian { scale: f64, seed: u64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub eta: f64,
    pub tau: usize,
    pub q: usize,
    /// Total steps `K`.
    pub steps: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub eval_every: usize,
    pub init: Init,
    /// Evaluate worker gradients on the rayon pool.
    pub parallel: bool,
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.eta >= 0.0 && self.eta.is_finite()) {
            return Err(Error::Config(format!(
                "step size {} must be finite and nonnegative",
                self.eta
            )));
        }
        if self.tau == 0 || self.q == 0 {
            return Err(Error::Config("tau and q must be at least 1".into()));
        }
        if !self.steps.is_multiple_of(self.q * self.tau) {
            return Err(Error::Config(format!(
                "K = {} is not a multiple of q*tau = {}",
                self.steps,
                self.q * self.tau
            )));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch size must be at least 1".into()));
        }
        if self.eval_every == 0 {
            return Err(Error::Config("eval_every must be at least 1".into()));
        }
        Ok(())
    }
}

/// Gate and batch streams of one worker.
#[derive(Debug, Clone)]
pub struct WorkerStreams {
    pub gate: ChaCha8Rng,
    pub batch: ChaCha8Rng,
}

impl WorkerStreams {
    pub fn new(seed: u64, worker: usize) -> Self {
        let mut gate = ChaCha8Rng::seed_from_u64(seed);
        gate.set_stream(2 * worker as u64);
        let mut batch = ChaCha8Rng::seed_from_u64(seed);
        batch.set_stream(2 * worker as u64 + 1);
        Self { gate, batch }
    }
}

/// Everything a run reads but never mutates.
#[derive(Debug, Clone, Copy)]
pub struct Setup<'a> {
    pub mixing: &'a MixingSet,
    pub step_probs: &'a [f64],
    pub objective: &'a Objective,
    pub shards: &'a [Shard],
}

impl Setup<'_> {
    pub fn validate(&self, cfg: &SimConfig) -> Result<()> {
        let n = self.mixing.num_workers();
        if self.step_probs.len() != n || self.shards.len() != n {
            return Err(Error::Dimension(format!(
                "{n} workers but {} step probabilities and {} shards",
                self.step_probs.len(),
                self.shards.len()
            )));
        }
        for (i, shard) in self.shards.iter().enumerate() {
            if shard.len() < cfg.batch_size {
                return Err(Error::Config(format!(
                    "worker {i} holds {} samples, fewer than the batch size {}",
                    shard.len(),
                    cfg.batch_size
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct SimState {
    pub x: Matrix,
    pub k: usize,
    pub streams: Vec<WorkerStreams>,
    pub grad_steps: Vec<u64>,
}

impl SimState {
    pub fn new(setup: &Setup<'_>, cfg: &SimConfig) -> Self {
        let n = setup.mixing.num_workers();
        let dim = setup.objective.dim();
        let x0: Vec<f64> = match cfg.init {
            Init::Zeros => vec![0.0; dim],
            Init::Gaussian { scale, seed } => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                (0..dim)
                    .map(|_| scale * standard_normal(&mut rng))
                    .collect()
            }
        };
        Self {
            x: Matrix::from_fn(dim, n, |r, _| x0[r]),
            k: 0,
            streams: (0..n).map(|i| WorkerStreams::new(cfg.seed, i)).collect(),
            grad_steps: vec![0; n],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceRecord {
    pub k: usize,
    pub time_slot: usize,
    pub loss_full: f64,
    pub grad_norm_sq: f64,
    pub consensus_err: f64,
    pub test_acc: Option<f64>,
    pub grad_steps: Vec<u64>,
}

/// What happened in one step, for observers.
#[derive(Debug)]
pub struct StepInfo<'a> {
    /// Index of the state the step started from.
    pub k: usize,
    pub x_before: &'a Matrix,
    pub x_after: &'a Matrix,
    /// Gradient of each worker, `None` when its gate did not fire.
    pub gradients: &'a [Option<Vec<f64>>],
    pub operator: Operator,
}

/// Mini-batch gradient with probability `p`, otherwise `None`. The gate is
/// drawn every call; the batch stream advances only on success.
pub fn gated_gradient(
    objective: &Objective,
    shard: &Shard,
    x: &[f64],
    p: f64,
    batch_size: usize,
    streams: &mut WorkerStreams,
) -> Result<Option<Vec<f64>>> {
    if streams.gate.gen::<f64>() < p {
        objective
            .minibatch_gradient(shard, x, batch_size, &mut streams.batch)
            .map(Some)
    } else {
        Ok(None)
    }
}

/// `u = X a`.
pub fn weighted_average(x: &Matrix, a: &[f64]) -> Result<Vec<f64>> {
    x.mul_vec(a)
}

/// `||X (I - A)||^2_{F_a} = sum_i a_i ||x_i - u||^2`.
pub fn consensus_error(x: &Matrix, a: &[f64]) -> Result<f64> {
    let u = weighted_average(x, a)?;
    let dev = Matrix::from_fn(x.rows(), x.cols(), |r, c| x[(r, c)] - u[r]);
    spectral::weighted_frobenius_sq(&dev, a)
}

fn subnet_averages(x: &Matrix, mixing: &MixingSet) -> Vec<Vec<f64>> {
    mixing
        .members
        .iter()
        .map(|members| {
            let mut z = vec![0.0; x.rows()];
            for &i in members {
                let vi = mixing.v[i];
                for (zr, xr) in z.iter_mut().zip(x.col(i)) {
                    *zr += vi * xr;
                }
            }
            z
        })
        .collect()
}

/// Right-multiplies `x` by the operator without forming `N x N` matrices.
pub fn apply_operator(x: &mut Matrix, mixing: &MixingSet, op: Operator) {
    let targets = match op {
        Operator::Identity => return,
        Operator::V => subnet_averages(x, mixing),
        Operator::Z => {
            let z = subnet_averages(x, mixing);
            let d = mixing.num_subnets();
            (0..d)
                .map(|target| {
                    let mut y = vec![0.0; x.rows()];
                    for (e, ze) in z.iter().enumerate() {
                        let w = mixing.h[(e, target)];
                        if w != 0.0 {
                            for (yr, zr) in y.iter_mut().zip(ze) {
                                *yr += w * zr;
                            }
                        }
                    }
                    y
                })
                .collect()
        }
    };
    for (members, t) in mixing.members.iter().zip(&targets) {
        for &i in members {
            x.col_mut(i).copy_from_slice(t);
        }
    }
}

/// Advances the state by one step and returns the gradients taken.
pub fn step(
    state: &mut SimState,
    cfg: &SimConfig,
    setup: &Setup<'_>,
) -> Result<(Vec<Option<Vec<f64>>>, Operator)> {
    let n = setup.mixing.num_workers();
    let x = &state.x;
    let eval = |(i, streams): (usize, &mut WorkerStreams)| {
        gated_gradient(
            setup.objective,
            &setup.shards[i],
            x.col(i),
            setup.step_probs[i],
            cfg.batch_size,
            streams,
        )
    };
    let gradients: Vec<Option<Vec<f64>>> = if cfg.parallel {
        state
            .streams
            .par_iter_mut()
            .enumerate()
            .map(eval)
            .collect::<Result<_>>()?
    } else {
        state
            .streams
            .iter_mut()
            .enumerate()
            .map(eval)
            .collect::<Result<_>>()?
    };

    for (i, g) in gradients.iter().enumerate() {
        if let Some(g) = g {
            state.grad_steps[i] += 1;
            for (xr, gr) in state.x.col_mut(i).iter_mut().zip(g) {
                *xr -= cfg.eta * gr;
            }
        }
    }
    let op = select_t(state.k + 1, cfg.tau, cfg.q);
    apply_operator(&mut state.x, setup.mixing, op);
    state.k += 1;
    debug_assert_eq!(state.x.cols(), n);

    if !state.x.is_finite() {
        return Err(Error::Divergence {
            step: state.k,
            reason: "non-finite model entry".into(),
        });
    }
    let peak = state.x.max_abs();
    if peak > DIVERGENCE_LIMIT {
        return Err(Error::Divergence {
            step: state.k,
            reason: format!("model magnitude {peak:e} exceeds {DIVERGENCE_LIMIT:e}"),
        });
    }
    Ok((gradients, op))
}

pub fn record(state: &SimState, setup: &Setup<'_>) -> Result<TraceRecord> {
    let u = weighted_average(&state.x, &setup.mixing.a)?;
    let (loss_full, grad) = setup.objective.full_objective(&u)?;
    Ok(TraceRecord {
        k: state.k,
        time_slot: state.k,
        loss_full,
        grad_norm_sq: grad.iter().map(|g| g * g).sum(),
        consensus_err: consensus_error(&state.x, &setup.mixing.a)?,
        test_acc: setup.objective.accuracy(&u),
        grad_steps: state.grad_steps.clone(),
    })
}

/// Runs `K` steps, emitting a record at `k = 0`, every `eval_every` steps,
/// and at `k = K`. The observer sees every step.
pub fn run_observed(
    setup: &Setup<'_>,
    cfg: &SimConfig,
    mut observer: impl FnMut(&StepInfo<'_>),
) -> Result<Vec<TraceRecord>> {
    cfg.validate()?;
    setup.validate(cfg)?;
    let mut state = SimState::new(setup, cfg);
    let mut trace = vec![record(&state, setup)?];
    while state.k < cfg.steps {
        let before = state.x.clone();
        let (gradients, operator) = step(&mut state, cfg, setup)?;
        observer(&StepInfo {
            k: state.k - 1,
            x_before: &before,
            x_after: &state.x,
            gradients: &gradients,
            operator,
        });
        if state.k.is_multiple_of(cfg.eval_every) || state.k == cfg.steps {
            trace.push(record(&state, setup)?);
        }
    }
    Ok(trace)
}

pub fn run(setup: &Setup<'_>, cfg: &SimConfig) -> Result<Vec<TraceRecord>> {
    run_observed(setup, cfg, |_| {})
}

/// `(1/K) sum_{k<K} ||grad F(u_k)||^2` together with the trace.
pub fn run_average_gradient(setup: &Setup<'_>, cfg: &SimConfig) -> Result<(f64, Vec<TraceRecord>)> {
    let mut total = 0.0;
    let mut failure = None;
    let a = &setup.mixing.a;
    let trace = run_observed(setup, cfg, |info| {
        let g = weighted_average(info.x_before, a).and_then(|u| setup.objective.gradient(&u));
        match g {
            Ok(g) => total += g.iter().map(|v| v * v).sum::<f64>(),
            Err(e) => failure = Some(e),
        }
    })?;
    if let Some(e) = failure {
        return Err(e);
    }
    Ok((total / cfg.steps.max(1) as f64, trace))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::objectives::{partition_iid, synthetic_logistic, synthetic_quadratic};
    use crate::topology::{HubMatrixSource, HubTopology, NetworkSpec};

    struct Fixture {
        net: NetworkSpec,
        mixing: MixingSet,
        objective: Objective,
        shards: Vec<Shard>,
        p: Vec<f64>,
    }

    impl Fixture {
        fn setup(&self) -> Setup<'_> {
            Setup {
                mixing: &self.mixing,
                step_probs: &self.p,
                objective: &self.objective,
                shards: &self.shards,
            }
        }
    }

    fn fixture(
        hubs: usize,
        per_hub: usize,
        topo: HubTopology,
        p: f64,
        weights: Option<Vec<f64>>,
    ) -> Fixture {
        let mut net = NetworkSpec::uniform(hubs, per_hub, &topo);
        let n = net.num_workers();
        net = net.with_step_probs(&vec![p; n]).unwrap();
        if let Some(w) = weights {
            net = net.with_weights(&w).unwrap();
        }
        let mixing = MixingSet::build(&net, &HubMatrixSource::Metropolis).unwrap();
        let ds = synthetic_logistic(40 * n, 5, 3.0, 2.0, 11).unwrap();
        let objective = Objective::logistic(ds, 0.01).unwrap();
        let shards = partition_iid(objective.dataset.len(), &vec![1.0 / n as f64; n], 3).unwrap();
        Fixture {
            p: net.step_probs(),
            net,
            mixing,
            objective,
            shards,
        }
    }

    fn config(tau: usize, q: usize, steps: usize) -> SimConfig {
        SimConfig {
            eta: 0.1,
            tau,
            q,
            steps,
            batch_size: 4,
            seed: 42,
            eval_every: 1,
            init: Init::Zeros,
            parallel: false,
        }
    }

    #[test]
    fn weighted_average_oracle() {
        let x = Matrix::from_rows(&[vec![1.0, 2.0, 4.0], vec![-1.0, 0.0, 3.0]]).unwrap();
        let a = [0.2, 0.3, 0.5];
        let u = weighted_average(&x, &a).unwrap();
        for r in 0..2 {
            let mut oracle = 0.0;
            for c in 0..3 {
                oracle += a[c] * x[(r, c)];
            }
            assert!((u[r] - oracle).abs() < 1e-15);
        }
        assert_eq!(
            weighted_average(&x, &[0.0, 1.0, 0.0]).unwrap(),
            x.col(1).to_vec()
        );
        let same = Matrix::from_fn(2, 3, |r, _| r as f64 + 0.5);
        assert_eq!(weighted_average(&same, &a).unwrap(), vec![0.5, 1.5]);
    }

    #[test]
    fn consensus_error_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let x = Matrix::from_fn(3, 5, |_, _| standard_normal(&mut rng));
        let a = [0.1, 0.2, 0.3, 0.25, 0.15];
        let u = weighted_average(&x, &a).unwrap();
        let oracle: f64 = (0..5)
            .map(|i| a[i] * (0..3).map(|r| (x[(r, i)] - u[r]).powi(2)).sum::<f64>())
            .sum();
        assert!((consensus_error(&x, &a).unwrap() - oracle).abs() < 1e-13);

        // X (I - A) by explicit matrices
        let amat = Matrix::outer(&a, &[1.0; 5]);
        let dev = &x * &(&Matrix::identity(5) - &amat);
        let dense = spectral::weighted_frobenius_sq(&dev, &a).unwrap();
        assert!((dense - oracle).abs() < 1e-13);

        let cons = Matrix::from_fn(3, 5, |r, _| r as f64);
        assert_eq!(consensus_error(&cons, &a).unwrap(), 0.0);
    }

    #[test]
    fn structured_operators_match_dense_products() {
        let weights: Vec<f64> = (0..12).map(|i| 1.0 + (i % 5) as f64).collect();
        let f = fixture(4, 3, HubTopology::Path, 1.0, Some(weights));
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = Matrix::from_fn(3, 12, |_, _| standard_normal(&mut rng));
        for op in [Operator::Identity, Operator::V, Operator::Z] {
            let mut y = x.clone();
            apply_operator(&mut y, &f.mixing, op);
            let dense = &x * &f.mixing.operator(op);
            assert!(y.max_abs_diff(&dense) < 1e-12, "{op:?}");
        }
    }

    #[test]
    fn z_step_complete_uniform_gives_consensus() {
        let f = fixture(3, 4, HubTopology::Complete, 1.0, None);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut x = Matrix::from_fn(2, 12, |_, _| standard_normal(&mut rng));
        apply_operator(&mut x, &f.mixing, Operator::Z);
        assert!(consensus_error(&x, &f.mixing.a).unwrap() < 1e-24);
    }

    #[test]
    fn gate_frequency_binomial() {
        let f = fixture(1, 1, HubTopology::Complete, 0.5, None);
        let mut streams = WorkerStreams::new(9, 0);
        let x = vec![0.0; f.objective.dim()];
        let trials = 100_000;
        let mut fired = 0;
        for _ in 0..trials {
            if gated_gradient(&f.objective, &f.shards[0], &x, 0.5, 1, &mut streams)
                .unwrap()
                .is_some()
            {
                fired += 1;
            }
        }
        let sd = (trials as f64 * 0.25).sqrt();
        assert!(
            (fired as f64 - 0.5 * trials as f64).abs() <= 3.0 * sd,
            "{fired}"
        );

        let mut streams = WorkerStreams::new(9, 0);
        for _ in 0..1000 {
            assert!(
                gated_gradient(&f.objective, &f.shards[0], &x, 1.0, 1, &mut streams)
                    .unwrap()
                    .is_some()
            );
        }
    }

    #[test]
    fn expected_local_steps_per_period() {
        // tau = 10, p = 0.5: five steps per period on average
        let f = fixture(1, 2, HubTopology::Complete, 0.5, None);
        let mut cfg = config(10, 1, 20_000);
        cfg.eta = 0.0;
        cfg.eval_every = cfg.steps;
        let trace = run(&f.setup(), &cfg).unwrap();
        let last = trace.last().unwrap();
        let periods = (cfg.steps / 10) as f64;
        for &s in &last.grad_steps {
            let per_period = s as f64 / periods;
            let sd = (10.0 * 0.25 / periods).sqrt();
            assert!((per_period - 5.0).abs() <= 3.0 * sd, "{per_period}");
        }
    }

    #[test]
    fn gate_stream_independent_of_batch_consumption() {
        // changing p must not change the gate sequence
        let mut a = WorkerStreams::new(5, 3);
        let mut b = WorkerStreams::new(5, 3);
        let ga: Vec<f64> = (0..20).map(|_| a.gate.gen()).collect();
        let _: u64 = b.batch.gen();
        let gb: Vec<f64> = (0..20).map(|_| b.gate.gen()).collect();
        assert_eq!(ga, gb);
        let mut other = WorkerStreams::new(5, 4);
        assert_ne!(ga[0], other.gate.gen::<f64>());
    }

    #[test]
    fn zero_step_size_keeps_common_init() {
        let f = fixture(3, 2, HubTopology::Ring, 0.7, None);
        let mut cfg = config(2, 2, 40);
        cfg.eta = 0.0;
        cfg.init = Init::Gaussian {
            scale: 1.0,
            seed: 3,
        };
        let setup = f.setup();
        let init = SimState::new(&setup, &cfg).x;
        let mut state = SimState::new(&setup, &cfg);
        for _ in 0..cfg.steps {
            step(&mut state, &cfg, &setup).unwrap();
        }
        // mixing weights like 1/3 reproduce the column only up to rounding
        assert!(state.x.max_abs_diff(&init) <= 1e-14 * init.max_abs());
    }

    #[test]
    fn single_worker_is_plain_sgd() {
        let f = fixture(1, 1, HubTopology::Complete, 1.0, None);
        let cfg = config(1, 1, 30);
        let setup = f.setup();
        let mut state = SimState::new(&setup, &cfg);
        let mut x = vec![0.0; f.objective.dim()];
        let mut streams = WorkerStreams::new(cfg.seed, 0);
        for _ in 0..cfg.steps {
            step(&mut state, &cfg, &setup).unwrap();
            let _: f64 = streams.gate.gen();
            let g = f
                .objective
                .minibatch_gradient(&f.shards[0], &x, cfg.batch_size, &mut streams.batch)
                .unwrap();
            for (xj, gj) in x.iter_mut().zip(&g) {
                *xj -= cfg.eta * gj;
            }
            assert_eq!(state.x.col(0), &x[..]);
        }
    }

    #[test]
    fn u_recurrence_holds() {
        let weights: Vec<f64> = (0..12).map(|i| 0.5 + (i * 7 % 5) as f64).collect();
        let f = fixture(4, 3, HubTopology::Path, 0.8, Some(weights));
        let cfg = config(3, 2, 60);
        let a = f.mixing.a.clone();
        let mut worst: f64 = 0.0;
        run_observed(&f.setup(), &cfg, |info| {
            let u0 = weighted_average(info.x_before, &a).unwrap();
            let u1 = weighted_average(info.x_after, &a).unwrap();
            let mut pred = u0.clone();
            for (i, g) in info.gradients.iter().enumerate() {
                if let Some(g) = g {
                    for (p, gj) in pred.iter_mut().zip(g) {
                        *p -= cfg.eta * a[i] * gj;
                    }
                }
            }
            let err = pred
                .iter()
                .zip(&u1)
                .map(|(x, y)| (x - y).powi(2))
                .sum::<f64>()
                .sqrt();
            worst = worst.max(err);
        })
        .unwrap();
        assert!(worst <= 1e-10, "{worst}");
    }

    #[test]
    fn full_batch_u_recurrence_on_quadratic() {
        let mut net = NetworkSpec::uniform(2, 2, &HubTopology::Complete);
        net = net.with_weights(&[1.0, 2.0, 3.0, 4.0]).unwrap();
        let mixing = MixingSet::build(&net, &HubMatrixSource::Metropolis).unwrap();
        let ds = synthetic_quadratic(16, 3, 1.0, 4).unwrap();
        let objective = Objective::quadratic(ds, vec![1.0, 2.0, 0.5], 0.0).unwrap();
        let shards = vec![Shard::full(&objective.dataset); 4];
        let p = vec![1.0; 4];
        let setup = Setup {
            mixing: &mixing,
            step_probs: &p,
            objective: &objective,
            shards: &shards,
        };
        let mut cfg = config(2, 2, 16);
        cfg.batch_size = 16;
        cfg.init = Init::Gaussian {
            scale: 1.0,
            seed: 1,
        };
        let a = mixing.a.clone();
        run_observed(&setup, &cfg, |info| {
            let u0 = weighted_average(info.x_before, &a).unwrap();
            let u1 = weighted_average(info.x_after, &a).unwrap();
            // independent side: full gradients at each worker's pre-step model
            for r in 0..3 {
                let drift: f64 = (0..4)
                    .map(|i| a[i] * objective.gradient(info.x_before.col(i)).unwrap()[r])
                    .sum();
                assert!((u1[r] - (u0[r] - cfg.eta * drift)).abs() < 1e-12);
            }
        })
        .unwrap();
    }

    #[test]
    fn v_steps_produce_subnet_consensus() {
        let f = fixture(3, 4, HubTopology::Path, 0.9, None);
        let cfg = config(2, 3, 36);
        let mut checked = 0;
        run_observed(&f.setup(), &cfg, |info| {
            if info.operator == Operator::V {
                checked += 1;
                for members in &f.mixing.members {
                    for &i in members {
                        for &j in members {
                            let d: f64 = info
                                .x_after
                                .col(i)
                                .iter()
                                .zip(info.x_after.col(j))
                                .map(|(x, y)| (x - y).abs())
                                .fold(0.0, f64::max);
                            assert!(d <= 1e-12);
                        }
                    }
                }
            }
            if info.operator == Operator::Z {
                let z = subnet_averages(
                    &{
                        let mut y = info.x_before.clone();
                        for (i, g) in info.gradients.iter().enumerate() {
                            if let Some(g) = g {
                                for (yr, gr) in y.col_mut(i).iter_mut().zip(g) {
                                    *yr -= cfg.eta * gr;
                                }
                            }
                        }
                        y
                    },
                    &f.mixing,
                );
                for (i, &d) in f.mixing.subnet_of.iter().enumerate() {
                    for r in 0..info.x_after.rows() {
                        let expect: f64 = (0..z.len()).map(|e| f.mixing.h[(e, d)] * z[e][r]).sum();
                        assert!((info.x_after[(r, i)] - expect).abs() <= 1e-12);
                    }
                }
            }
        })
        .unwrap();
        assert_eq!(checked, 12);
    }

    #[test]
    fn record_count_and_determinism() {
        let f = fixture(2, 2, HubTopology::Complete, 0.7, None);
        let mut cfg = config(4, 2, 8);
        cfg.eval_every = 8;
        assert_eq!(run(&f.setup(), &cfg).unwrap().len(), 2);
        cfg.eval_every = 2;
        assert_eq!(run(&f.setup(), &cfg).unwrap().len(), 5);
        cfg.eval_every = 3;
        let t = run(&f.setup(), &cfg).unwrap();
        assert_eq!(t.iter().map(|r| r.k).collect::<Vec<_>>(), vec![0, 3, 6, 8]);

        cfg.steps = 64;
        cfg.eval_every = 4;
        let a = run(&f.setup(), &cfg).unwrap();
        let b = run(&f.setup(), &cfg).unwrap();
        assert_eq!(a, b);
        cfg.parallel = true;
        let c = run(&f.setup(), &cfg).unwrap();
        assert_eq!(a, c);
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap();
        let d = pool.install(|| run(&f.setup(), &cfg).unwrap());
        assert_eq!(a, d);
    }

    #[test]
    fn loss_decreases_on_convex_quadratic() {
        let net = NetworkSpec::uniform(2, 2, &HubTopology::Complete);
        let mixing = MixingSet::build(&net, &HubMatrixSource::Metropolis).unwrap();
        let ds = synthetic_quadratic(200, 4, 1.0, 2).unwrap();
        let objective = Objective::quadratic(ds, vec![1.0, 0.5, 2.0, 1.5], 0.0).unwrap();
        let shards = partition_iid(200, &[0.25; 4], 1).unwrap();
        let p = vec![1.0; 4];
        let setup = Setup {
            mixing: &mixing,
            step_probs: &p,
            objective: &objective,
            shards: &shards,
        };
        let mut cfg = config(4, 2, 400);
        cfg.eta = 0.05;
        cfg.init = Init::Gaussian {
            scale: 3.0,
            seed: 0,
        };
        let t = run(&setup, &cfg).unwrap();
        let quarter = t.len() / 4;
        let mean = |r: &[TraceRecord]| r.iter().map(|x| x.loss_full).sum::<f64>() / r.len() as f64;
        assert!(mean(&t[t.len() - quarter..]) < mean(&t[..quarter]));
        assert!(t
            .iter()
            .all(|r| r.consensus_err >= 0.0 && r.loss_full.is_finite()));
    }

    #[test]
    fn divergence_detected() {
        let f = fixture(1, 2, HubTopology::Complete, 1.0, None);
        let net = f.net.clone();
        let ds = synthetic_quadratic(40, 2, 0.0, 1).unwrap();
        let objective = Objective::quadratic(ds, vec![1.0, 1.0], 0.0).unwrap();
        let shards = partition_iid(40, &[0.5, 0.5], 0).unwrap();
        let p = net.step_probs();
        let setup = Setup {
            mixing: &f.mixing,
            step_probs: &p,
            objective: &objective,
            shards: &shards,
        };
        let mut cfg = config(1, 1, 200);
        cfg.eta = 5.0;
        cfg.init = Init::Gaussian {
            scale: 1.0,
            seed: 0,
        };
        match run(&setup, &cfg) {
            Err(Error::Divergence { step, .. }) => assert!(step > 1 && step <= 200),
            other => panic!("expected divergence, got {other:?}"),
        }
    }

    #[test]
    fn config_validation() {
        let mut cfg = config(4, 2, 12);
        assert!(cfg.validate().is_err());
        cfg.steps = 16;
        assert!(cfg.validate().is_ok());
        cfg.eval_every = 0;
        assert!(cfg.validate().is_err());
        let f = fixture(1, 2, HubTopology::Complete, 1.0, None);
        let mut cfg = config(1, 1, 1);
        cfg.batch_size = 1000;
        assert!(matches!(run(&f.setup(), &cfg), Err(Error::Config(_))));
    }
}
