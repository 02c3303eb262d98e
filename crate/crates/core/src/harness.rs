//! Baseline presets, the time-slot straggler comparison, sweeps, and the
//! statistics used to compare runs across seeds.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::engine::{self, Init, Setup, SimConfig, SimState, TraceRecord};
use crate::error::{Error, Result};
use crate::objectives::{synthetic_logistic, Objective, Shard};
use crate::topology::{select_t, HubMatrixSource, HubTopology, MixingSet, NetworkSpec, Operator};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Preset {
    DistributedSgd,
    LocalSgd,
    HlSgd,
    MllSgd,
}

impl Preset {
    pub const ALL: [Preset; 4] = [
        Preset::DistributedSgd,
        Preset::LocalSgd,
        Preset::HlSgd,
        Preset::MllSgd,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Preset::DistributedSgd => "distributed-sgd",
            Preset::LocalSgd => "local-sgd",
            Preset::HlSgd => "hl-sgd",
            Preset::MllSgd => "mll-sgd",
        }
    }

    /// Rewrites the network to the preset's structure. Schedule parameters
    /// are not rewritten; a conflicting `q` or `tau` is an error. Baselines
    /// run every worker at `p = 1` and keep the configured weights.
    pub fn apply(self, net: &NetworkSpec, cfg: &SimConfig) -> Result<NetworkSpec> {
        let n = net.num_workers();
        let mut out = net.clone();
        match self {
            Preset::MllSgd => {}
            Preset::DistributedSgd => {
                if cfg.q != 1 || cfg.tau != 1 {
                    return Err(Error::Config(format!(
                        "distributed-sgd requires q = tau = 1, got q = {}, tau = {}",
                        cfg.q, cfg.tau
                    )));
                }
                for w in &mut out.workers {
                    w.sub_network = 0;
                }
                out.num_subnets = 1;
                out.hub_edges.clear();
            }
            Preset::LocalSgd | Preset::HlSgd => {
                if self == Preset::LocalSgd && cfg.q != 1 {
                    return Err(Error::Config(format!(
                        "local-sgd requires q = 1, got q = {}",
                        cfg.q
                    )));
                }
                out.hub_edges = HubTopology::Complete.edges(out.num_subnets);
            }
        }
        if self != Preset::MllSgd {
            out = out.with_step_probs(&vec![1.0; n])?;
        }
        out.validate()?;
        Ok(out)
    }
}

/// Everything needed to execute one configuration.
#[derive(Debug, Clone, Copy)]
pub struct RunSpec<'a> {
    pub preset: Preset,
    pub net: &'a NetworkSpec,
    pub hub: &'a HubMatrixSource,
    pub objective: &'a Objective,
    pub shards: &'a [Shard],
    pub cfg: &'a SimConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PresetTrace {
    pub preset: Preset,
    pub seed: u64,
    pub records: Vec<TraceRecord>,
}

pub fn run_preset(spec: &RunSpec<'_>) -> Result<PresetTrace> {
    let net = spec.preset.apply(spec.net, spec.cfg)?;
    let hub = match spec.preset {
        Preset::MllSgd => spec.hub.clone(),
        _ => HubMatrixSource::Metropolis,
    };
    let mixing = MixingSet::build(&net, &hub)?;
    let p = net.step_probs();
    let setup = Setup {
        mixing: &mixing,
        step_probs: &p,
        objective: spec.objective,
        shards: spec.shards,
    };
    Ok(PresetTrace {
        preset: spec.preset,
        seed: spec.cfg.seed,
        records: engine::run(&setup, spec.cfg)?,
    })
}

/// Per-run seed derived from an experiment seed and a run index.
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    splitmix64(seed ^ splitmix64(index.wrapping_add(0x5eed)))
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub fn fan_out(seed: u64, runs: usize) -> Vec<u64> {
    (0..runs as u64).map(|i| derive_seed(seed, i)).collect()
}

/// Named operating-rate distributions. Minority workers are those whose
/// position inside their sub-network is 9 modulo 10, which is one in ten.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum PDistribution {
    Fixed {
        p: f64,
    },
    /// Position `j` inside the sub-network gets `0.1 * (j mod 10 + 1)`.
    UniformGrid,
    /// 90% at 0.5, 10% at 1.
    #[serde(rename = "skewed-1")]
    Skewed1,
    /// 90% at 0.6, 10% at 0.1.
    #[serde(rename = "skewed-2")]
    Skewed2,
    /// 90% at `majority`, 10% at `minority`.
    Mixed {
        majority: f64,
        minority: f64,
    },
}

impl PDistribution {
    pub fn name(&self) -> String {
        match self {
            PDistribution::Fixed { p } => format!("fixed-{p}"),
            PDistribution::UniformGrid => "uniform-grid".into(),
            PDistribution::Skewed1 => "skewed-1".into(),
            PDistribution::Skewed2 => "skewed-2".into(),
            PDistribution::Mixed { majority, minority } => format!("mixed-{majority}-{minority}"),
        }
    }

    pub fn probabilities(&self, net: &NetworkSpec) -> Vec<f64> {
        let mut position = vec![0usize; net.num_subnets];
        net.workers
            .iter()
            .map(|w| {
                let j = position[w.sub_network];
                position[w.sub_network] += 1;
                let minority = j % 10 == 9;
                match *self {
                    PDistribution::Fixed { p } => p,
                    PDistribution::UniformGrid => 0.1 * ((j % 10) + 1) as f64,
                    PDistribution::Skewed1 => {
                        if minority {
                            1.0
                        } else {
                            0.5
                        }
                    }
                    PDistribution::Skewed2 => {
                        if minority {
                            0.1
                        } else {
                            0.6
                        }
                    }
                    PDistribution::Mixed {
                        majority,
                        minority: m,
                    } => {
                        if minority {
                            m
                        } else {
                            majority
                        }
                    }
                }
            })
            .collect()
    }
}

/// Splits each sub-network's workers into `shares.len()` groups by position
/// modulo the group count. Groups receive the given fractions of the data,
/// divided evenly among their members, and worker weights are set to the
/// resulting shard fractions. Returns the reweighted network and the
/// per-worker fractions.
pub fn data_share_groups(net: &NetworkSpec, shares: &[f64]) -> Result<(NetworkSpec, Vec<f64>)> {
    if shares.is_empty() {
        return Err(Error::Config("no data shares given".into()));
    }
    let mut position = vec![0usize; net.num_subnets];
    let groups: Vec<usize> = net
        .workers
        .iter()
        .map(|w| {
            let j = position[w.sub_network];
            position[w.sub_network] += 1;
            j % shares.len()
        })
        .collect();
    let mut counts = vec![0usize; shares.len()];
    for &g in &groups {
        counts[g] += 1;
    }
    if counts.contains(&0) {
        return Err(Error::Config("some data-share group has no workers".into()));
    }
    let fractions: Vec<f64> = groups
        .iter()
        .map(|&g| shares[g] / counts[g] as f64)
        .collect();
    Ok((net.clone().with_weights(&fractions)?, fractions))
}

/// Logistic workload on a planted model: Gaussian features with decaying
/// scales plus a bias feature, and a held-out test split.
pub fn logistic_surrogate(
    n_train: usize,
    n_test: usize,
    dim: usize,
    condition: f64,
    signal: f64,
    seed: u64,
) -> Result<Objective> {
    let all = synthetic_logistic(n_train + n_test, dim, condition, signal, seed)?;
    let test_fraction = n_test as f64 / (n_train + n_test) as f64;
    let (train, test) = all.split(test_fraction, seed ^ 0xda7a)?;
    Objective::logistic(train, 0.0)?.with_test_set(test)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WaitPolicy {
    /// Average every `tau` slots regardless of progress.
    FixedPeriod,
    /// Average once every worker has taken `tau` steps in the round;
    /// workers that reach the quota idle until then.
    WaitForSteps,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlotSimSpec {
    pub tau: usize,
    pub q: usize,
    pub p: Vec<f64>,
    pub slots: usize,
    pub eta: f64,
    pub batch_size: usize,
    pub eval_every: usize,
    pub seed: u64,
    pub init: Init,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SlotTrace {
    pub policy: WaitPolicy,
    pub records: Vec<TraceRecord>,
    /// Slot after which each averaging happened.
    pub averaging: Vec<(usize, Operator)>,
}

fn slot_config(spec: &SlotSimSpec) -> SimConfig {
    SimConfig {
        eta: spec.eta,
        tau: spec.tau,
        q: spec.q,
        steps: spec.slots,
        batch_size: spec.batch_size,
        seed: spec.seed,
        eval_every: spec.eval_every,
        init: spec.init,
        parallel: false,
    }
}

pub fn run_slot_policy(
    policy: WaitPolicy,
    spec: &SlotSimSpec,
    mixing: &MixingSet,
    objective: &Objective,
    shards: &[Shard],
) -> Result<SlotTrace> {
    if spec.tau == 0 || spec.q == 0 || spec.eval_every == 0 || spec.batch_size == 0 {
        return Err(Error::Config(
            "tau, q, eval_every and batch size must be positive".into(),
        ));
    }
    if spec.p.iter().any(|&p| !(p > 0.0 && p <= 1.0)) {
        return Err(Error::Config("operating rates must lie in (0, 1]".into()));
    }
    let cfg = slot_config(spec);
    let setup = Setup {
        mixing,
        step_probs: &spec.p,
        objective,
        shards,
    };
    setup.validate(&cfg)?;
    let n = mixing.num_workers();
    let mut state = SimState::new(&setup, &cfg);
    let mut records = vec![engine::record(&state, &setup)?];
    let mut averaging = Vec::new();
    let mut round_steps = vec![0usize; n];
    let mut rounds = 0usize;

    for slot in 1..=spec.slots {
        for i in 0..n {
            if policy == WaitPolicy::WaitForSteps && round_steps[i] >= spec.tau {
                continue;
            }
            let g = engine::gated_gradient(
                objective,
                &shards[i],
                state.x.col(i),
                spec.p[i],
                spec.batch_size,
                &mut state.streams[i],
            )?;
            if let Some(g) = g {
                round_steps[i] += 1;
                state.grad_steps[i] += 1;
                for (xr, gr) in state.x.col_mut(i).iter_mut().zip(&g) {
                    *xr -= spec.eta * gr;
                }
            }
        }
        let op = match policy {
            WaitPolicy::FixedPeriod => select_t(slot, spec.tau, spec.q),
            WaitPolicy::WaitForSteps => {
                if round_steps.iter().all(|&s| s >= spec.tau) {
                    rounds += 1;
                    round_steps.iter_mut().for_each(|s| *s = 0);
                    if rounds.is_multiple_of(spec.q) {
                        Operator::Z
                    } else {
                        Operator::V
                    }
                } else {
                    Operator::Identity
                }
            }
        };
        engine::apply_operator(&mut state.x, mixing, op);
        if op != Operator::Identity {
            averaging.push((slot, op));
        }
        state.k = slot;
        if !state.x.is_finite() || state.x.max_abs() > engine::DIVERGENCE_LIMIT {
            return Err(Error::Divergence {
                step: slot,
                reason: "model left the finite range".into(),
            });
        }
        if slot % spec.eval_every == 0 || slot == spec.slots {
            records.push(engine::record(&state, &setup)?);
        }
    }
    Ok(SlotTrace {
        policy,
        records,
        averaging,
    })
}

/// Runs both policies on the same network, streams and slot budget;
/// returns `(fixed_period, wait_for_steps)`.
pub fn run_slot_comparison(
    spec: &SlotSimSpec,
    mixing: &MixingSet,
    objective: &Objective,
    shards: &[Shard],
) -> Result<(SlotTrace, SlotTrace)> {
    Ok((
        run_slot_policy(WaitPolicy::FixedPeriod, spec, mixing, objective, shards)?,
        run_slot_policy(WaitPolicy::WaitForSteps, spec, mixing, objective, shards)?,
    ))
}

/// Mean training loss over the last `fraction` of the records (at least one).
pub fn tail_mean_loss(records: &[TraceRecord], fraction: f64) -> f64 {
    let take = ((records.len() as f64 * fraction).ceil() as usize).clamp(1, records.len().max(1));
    let tail = &records[records.len() - take..];
    tail.iter().map(|r| r.loss_full).sum::<f64>() / tail.len() as f64
}

/// Mean training loss over all records.
pub fn trace_mean_loss(records: &[TraceRecord]) -> f64 {
    records.iter().map(|r| r.loss_full).sum::<f64>() / records.len() as f64
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub label: String,
    pub q: usize,
    pub tau: usize,
    pub seeds: Vec<u64>,
    pub final_losses: Vec<f64>,
    pub mean: f64,
    pub stddev: f64,
}

/// Runs every `(q, tau)` pair over the shared seeds, `jobs` runs at a time.
/// The final loss of a run is the mean over the last 10% of its records.
pub fn sweep_q_tau(
    product: usize,
    pairs: &[(usize, usize)],
    base: &RunSpec<'_>,
    seeds: &[u64],
    jobs: usize,
) -> Result<Vec<SweepRow>> {
    if seeds.is_empty() {
        return Err(Error::Config("sweep needs at least one seed".into()));
    }
    for &(q, tau) in pairs {
        if q * tau != product {
            return Err(Error::Config(format!(
                "pair q = {q}, tau = {tau} does not multiply to {product}"
            )));
        }
    }
    let cfgs: Vec<SimConfig> = pairs
        .iter()
        .flat_map(|&(q, tau)| {
            seeds.iter().map(move |&seed| SimConfig {
                q,
                tau,
                seed,
                ..base.cfg.clone()
            })
        })
        .collect();
    let finals = with_jobs(jobs, || {
        cfgs.par_iter()
            .map(|cfg| {
                let spec = RunSpec { cfg, ..*base };
                run_preset(&spec).map(|t| tail_mean_loss(&t.records, 0.1))
            })
            .collect::<Result<Vec<f64>>>()
    })?;
    Ok(pairs
        .iter()
        .zip(finals.chunks(seeds.len()))
        .map(|(&(q, tau), f)| SweepRow {
            label: format!("{} q={q} tau={tau}", base.preset.name()),
            q,
            tau,
            seeds: seeds.to_vec(),
            final_losses: f.to_vec(),
            mean: mean(f),
            stddev: sample_stddev(f),
        })
        .collect())
}

/// Runs `f` on a pool with `jobs` threads (the global pool when `jobs == 0`).
pub fn with_jobs<T: Send>(jobs: usize, f: impl FnOnce() -> Result<T> + Send) -> Result<T> {
    if jobs == 0 {
        return f();
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    pool.install(f)
}

pub fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

pub fn sample_stddev(x: &[f64]) -> f64 {
    if x.len() < 2 {
        return 0.0;
    }
    let m = mean(x);
    (x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (x.len() - 1) as f64).sqrt()
}

/// `sqrt((s_a^2 + s_b^2) / 2)` for equal-size samples.
pub fn pooled_stddev(a: &[f64], b: &[f64]) -> f64 {
    ((sample_stddev(a).powi(2) + sample_stddev(b).powi(2)) / 2.0).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PairedTest {
    pub mean_diff: f64,
    pub t: f64,
    /// One-sided p-value for `mean(x - y) < 0`.
    pub p_value: f64,
}

pub fn paired_t_less(x: &[f64], y: &[f64]) -> Result<PairedTest> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(Error::Config(
            "paired test needs two equal samples of size >= 2".into(),
        ));
    }
    let d: Vec<f64> = x.iter().zip(y).map(|(a, b)| a - b).collect();
    let m = mean(&d);
    let se = sample_stddev(&d) / (d.len() as f64).sqrt();
    if se == 0.0 {
        let p_value = if m < 0.0 { 0.0 } else { 1.0 };
        return Ok(PairedTest {
            mean_diff: m,
            t: if m < 0.0 {
                f64::NEG_INFINITY
            } else {
                f64::INFINITY
            },
            p_value,
        });
    }
    let t = m / se;
    let dist =
        StudentsT::new(0.0, 1.0, (d.len() - 1) as f64).map_err(|e| Error::Config(e.to_string()))?;
    Ok(PairedTest {
        mean_diff: m,
        t,
        p_value: dist.cdf(t),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::Matrix;
    use crate::objectives::partition_iid;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn small_objective() -> Objective {
        logistic_surrogate(800, 200, 6, 3.0, 3.0, 1).unwrap()
    }

    fn cfg(tau: usize, q: usize, steps: usize) -> SimConfig {
        SimConfig {
            eta: 0.2,
            tau,
            q,
            steps,
            batch_size: 4,
            seed: 7,
            eval_every: 8,
            init: Init::Zeros,
            parallel: false,
        }
    }

    #[test]
    fn preset_structure() {
        let net = NetworkSpec::uniform(3, 4, &HubTopology::Path)
            .with_step_probs(&[0.5; 12])
            .unwrap()
            .with_weights(&(1..=12).map(|w| w as f64).collect::<Vec<_>>())
            .unwrap();
        let d = Preset::DistributedSgd.apply(&net, &cfg(1, 1, 8)).unwrap();
        assert_eq!(d.num_subnets, 1);
        assert!(d.workers.iter().all(|w| w.step_prob == 1.0));
        // weights are kept: one hub averages with Z_ij = a_i
        let mix = MixingSet::build(&d, &HubMatrixSource::Metropolis).unwrap();
        assert!(
            mix.z
                .max_abs_diff(&Matrix::from_fn(12, 12, |i, _| (i + 1) as f64 / 78.0))
                <= 1e-12
        );

        let net = net.with_weights(&[1.0; 12]).unwrap();
        let d = Preset::DistributedSgd.apply(&net, &cfg(1, 1, 8)).unwrap();
        let mix = MixingSet::build(&d, &HubMatrixSource::Metropolis).unwrap();
        let avg = Matrix::from_fn(12, 12, |_, _| 1.0 / 12.0);
        for k in 1..=5 {
            assert_eq!(select_t(k, 1, 1), Operator::Z);
        }
        assert!(mix.z.max_abs_diff(&avg) <= 1e-12);

        let l = Preset::LocalSgd.apply(&net, &cfg(32, 1, 32)).unwrap();
        assert_eq!(l.hub_edges.len(), 3);
        let mix = MixingSet::build(&l, &HubMatrixSource::Metropolis).unwrap();
        assert!(mix.z.max_abs_diff(&avg) <= 1e-12);
        assert!(Preset::LocalSgd.apply(&net, &cfg(16, 2, 32)).is_err());
        assert!(Preset::HlSgd.apply(&net, &cfg(16, 2, 32)).is_ok());
        assert!(Preset::DistributedSgd.apply(&net, &cfg(2, 1, 8)).is_err());
        assert_eq!(Preset::MllSgd.apply(&net, &cfg(4, 2, 8)).unwrap(), net);
    }

    #[test]
    fn distributed_preset_on_one_worker_is_sgd() {
        let obj = small_objective();
        let net = NetworkSpec::uniform(1, 1, &HubTopology::Complete);
        let shards = vec![Shard::full(&obj.dataset)];
        let c = cfg(1, 1, 40);
        let spec = RunSpec {
            preset: Preset::DistributedSgd,
            net: &net,
            hub: &HubMatrixSource::Metropolis,
            objective: &obj,
            shards: &shards,
            cfg: &c,
        };
        let t = run_preset(&spec).unwrap();
        assert_eq!(t.preset, Preset::DistributedSgd);

        let mut x = vec![0.0; obj.dim()];
        let mut streams = engine::WorkerStreams::new(c.seed, 0);
        for _ in 0..40 {
            let _: f64 = streams.gate.gen();
            let g = obj
                .minibatch_gradient(&shards[0], &x, 4, &mut streams.batch)
                .unwrap();
            for (xj, gj) in x.iter_mut().zip(&g) {
                *xj -= c.eta * gj;
            }
        }
        assert_eq!(t.records.last().unwrap().loss_full, obj.value(&x).unwrap());
    }

    #[test]
    fn local_sgd_averages_every_tau() {
        let obj = small_objective();
        let net = NetworkSpec::uniform(2, 4, &HubTopology::Path);
        let shards = partition_iid(obj.dataset.len(), &[0.125; 8], 0).unwrap();
        let mut c = cfg(32, 1, 96);
        c.eval_every = 32;
        let spec = RunSpec {
            preset: Preset::LocalSgd,
            net: &net,
            hub: &HubMatrixSource::Metropolis,
            objective: &obj,
            shards: &shards,
            cfg: &c,
        };
        let t = run_preset(&spec).unwrap();
        assert!(t.records.iter().all(|r| r.consensus_err < 1e-20));
        let mut c2 = c.clone();
        c2.eval_every = 31;
        let t = run_preset(&RunSpec { cfg: &c2, ..spec }).unwrap();
        assert!(t.records[1].consensus_err > 0.0);
    }

    #[test]
    fn p_distributions_have_common_average() {
        let net = NetworkSpec::uniform(10, 10, &HubTopology::Complete);
        for d in [
            PDistribution::Fixed { p: 0.55 },
            PDistribution::UniformGrid,
            PDistribution::Skewed1,
            PDistribution::Skewed2,
        ] {
            let p = d.probabilities(&net);
            assert!((mean(&p) - 0.55).abs() < 1e-12, "{}", d.name());
        }
        let p = PDistribution::Skewed2.probabilities(&net);
        assert_eq!(p.iter().filter(|&&v| v == 0.1).count(), 10);
        let p = PDistribution::Mixed {
            majority: 0.9,
            minority: 0.6,
        }
        .probabilities(&net);
        assert_eq!(p.iter().filter(|&&v| v == 0.6).count(), 10);
    }

    #[test]
    fn data_share_groups_keep_hubs_balanced() {
        let net = NetworkSpec::uniform(10, 10, &HubTopology::Complete);
        let (weighted, fractions) =
            data_share_groups(&net, &[0.05, 0.10, 0.20, 0.25, 0.40]).unwrap();
        assert!((fractions.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!((fractions[0] - 0.05 / 20.0).abs() < 1e-15);
        let mix = MixingSet::build(&weighted, &HubMatrixSource::Metropolis).unwrap();
        assert!(mix.zeta < 1e-12);
        assert!(mix.b.iter().all(|&b| (b - 0.1).abs() < 1e-12));
        let shards = partition_iid(10_000, &fractions, 0).unwrap();
        assert_eq!(shards[4].len(), 200);
    }

    fn slot_fixture(
        p: Vec<f64>,
        tau: usize,
        q: usize,
        slots: usize,
    ) -> (MixingSet, Objective, Vec<Shard>, SlotSimSpec) {
        let n = p.len();
        let net = NetworkSpec::uniform(2, n / 2, &HubTopology::Complete)
            .with_step_probs(&p)
            .unwrap();
        let mix = MixingSet::build(&net, &HubMatrixSource::Metropolis).unwrap();
        let obj = small_objective();
        let shards = partition_iid(obj.dataset.len(), &vec![1.0 / n as f64; n], 2).unwrap();
        let spec = SlotSimSpec {
            tau,
            q,
            p,
            slots,
            eta: 0.2,
            batch_size: 4,
            eval_every: 4,
            seed: 3,
            init: Init::Zeros,
        };
        (mix, obj, shards, spec)
    }

    #[test]
    fn policies_agree_without_stragglers() {
        let (mix, obj, shards, spec) = slot_fixture(vec![1.0; 4], 4, 2, 64);
        let (fixed, wait) = run_slot_comparison(&spec, &mix, &obj, &shards).unwrap();
        assert_eq!(fixed.averaging, wait.averaging);
        assert_eq!(fixed.records, wait.records);
    }

    #[test]
    fn fixed_period_matches_engine() {
        let (mix, obj, shards, spec) = slot_fixture(vec![0.9, 0.6, 0.8, 1.0], 4, 2, 64);
        let fixed = run_slot_policy(WaitPolicy::FixedPeriod, &spec, &mix, &obj, &shards).unwrap();
        let setup = Setup {
            mixing: &mix,
            step_probs: &spec.p,
            objective: &obj,
            shards: &shards,
        };
        let engine_trace = engine::run(&setup, &slot_config(&spec)).unwrap();
        assert_eq!(fixed.records, engine_trace);
    }

    #[test]
    fn wait_interval_tracks_slowest_worker() {
        // two workers, p = (1, 0.5), tau = 4: rounds last tau / 0.5 = 8 slots on average
        let (mix, obj, shards, spec) = slot_fixture(vec![1.0, 0.5], 4, 1, 40_000);
        let mut spec = spec;
        spec.eta = 0.0;
        spec.eval_every = 40_000;
        let wait = run_slot_policy(WaitPolicy::WaitForSteps, &spec, &mix, &obj, &shards).unwrap();
        let rounds = wait.averaging.len() as f64;
        let interval = wait.averaging.last().unwrap().0 as f64 / rounds;
        // negative binomial: variance tau (1 - p) / p^2 = 8 per round
        let se = (8.0f64 / rounds).sqrt();
        assert!((interval - 8.0).abs() <= 3.0 * se, "{interval}");
        let fast = wait.records.last().unwrap().grad_steps[0] as f64;
        assert!(fast <= 4.0 * rounds + 4.0);
    }

    #[test]
    fn fixed_period_conserves_expected_work() {
        let p = vec![0.9, 0.9, 0.6, 0.9];
        let (mix, obj, shards, mut spec) = slot_fixture(p.clone(), 8, 2, 4_000);
        spec.eta = 0.0;
        spec.eval_every = 4_000;
        let fixed = run_slot_policy(WaitPolicy::FixedPeriod, &spec, &mix, &obj, &shards).unwrap();
        let total: u64 = fixed.records.last().unwrap().grad_steps.iter().sum();
        let expect: f64 = p.iter().sum::<f64>() * 4_000.0;
        let sd: f64 = p
            .iter()
            .map(|q| 4_000.0 * q * (1.0 - q))
            .sum::<f64>()
            .sqrt();
        assert!((total as f64 - expect).abs() <= 3.0 * sd);
        assert_eq!(fixed.averaging.len(), 4_000 / 8);
        assert_eq!(
            fixed
                .averaging
                .iter()
                .filter(|a| a.1 == Operator::Z)
                .count(),
            4_000 / 16
        );
    }

    #[test]
    fn sweep_rows_and_validation() {
        let obj = small_objective();
        let net = NetworkSpec::uniform(2, 2, &HubTopology::Complete);
        let shards = partition_iid(obj.dataset.len(), &[0.25; 4], 0).unwrap();
        let c = cfg(1, 1, 32);
        let base = RunSpec {
            preset: Preset::MllSgd,
            net: &net,
            hub: &HubMatrixSource::Metropolis,
            objective: &obj,
            shards: &shards,
            cfg: &c,
        };
        let rows = sweep_q_tau(
            32,
            &[(1, 32), (4, 8), (8, 4), (32, 1)],
            &base,
            &fan_out(1, 2),
            2,
        )
        .unwrap();
        assert_eq!(rows.len(), 4);
        assert!(rows
            .iter()
            .all(|r| r.final_losses.len() == 2 && r.mean.is_finite()));
        let same = sweep_q_tau(1, &[(1, 1), (1, 1)], &base, &[5], 1).unwrap();
        assert_eq!(same[0].final_losses, same[1].final_losses);
        let again = sweep_q_tau(
            32,
            &[(1, 32), (4, 8), (8, 4), (32, 1)],
            &base,
            &fan_out(1, 2),
            0,
        )
        .unwrap();
        assert_eq!(rows, again);
        assert!(sweep_q_tau(32, &[(3, 10)], &base, &[1], 1).is_err());
        assert!(sweep_q_tau(32, &[(4, 8)], &base, &[], 1).is_err());
    }

    #[test]
    fn statistics() {
        assert_eq!(mean(&[1.0, 2.0, 3.0]), 2.0);
        assert!((sample_stddev(&[1.0, 2.0, 3.0]) - 1.0).abs() < 1e-15);
        assert!((pooled_stddev(&[1.0, 2.0, 3.0], &[0.0, 2.0, 4.0]) - 2.5f64.sqrt()).abs() < 1e-15);
        // differences -1, -2, -3: t = -2 / (1 / sqrt 3), 2 dof
        let t = paired_t_less(&[0.0, 0.0, 0.0], &[1.0, 2.0, 3.0]).unwrap();
        assert!((t.t + 2.0 * 3.0f64.sqrt()).abs() < 1e-12);
        // Student t with 2 dof: F(t) = 1/2 + t / (2 sqrt(2 + t^2))
        let oracle = 0.5 + t.t / (2.0 * (2.0 + t.t * t.t).sqrt());
        assert!((t.p_value - oracle).abs() < 1e-12);
        assert_eq!(
            paired_t_less(&[1.0, 2.0], &[0.0, 1.0]).unwrap().p_value,
            1.0
        );
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let seeds: Vec<u64> = (0..5).map(|_| rng.gen()).collect();
        assert_eq!(fan_out(9, 5), fan_out(9, 5));
        assert_ne!(fan_out(9, 5), seeds);
        assert_ne!(derive_seed(9, 0), derive_seed(9, 1));
    }
}
