//! Command-line front end: config schema, experiment construction, and the
//! `simulate`, `check-matrices`, `bound` and `sweep` subcommands.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bounds::{self, BoundInputs, BoundReport, RateTerms};
use crate::engine::{Init, Setup, SimConfig, SimState, TraceRecord};
use crate::error::{Error, Result};
use crate::harness::{self, PDistribution, Preset, RunSpec};
use crate::matrix::Matrix;
use crate::objectives::{
    estimate_constants, load_idx, partition_iid, quadratic_noise, synthetic_logistic,
    synthetic_quadratic, Dataset, Objective, Shard,
};
use crate::spectral::{self, NormKind, PropertyCheck, VerifyOptions};
use crate::topology::{self, HubMatrixSource, HubTopology, MixingSet, NetworkSpec};

pub const CSV_HEADER: &str =
    "k,time_slot,loss_full,grad_norm_sq,consensus_err,test_acc,preset,seed";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub network: NetworkSection,
    pub objective: ObjectiveSection,
    pub run: RunSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bound: Option<BoundSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSection>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkSection {
    pub sub_networks: usize,
    pub workers_per_hub: usize,
    pub topology: HubTopology,
    #[serde(default)]
    pub weights: WeightSpec,
    #[serde(default)]
    pub p: ProbSpec,
    /// Explicit hub matrix, rows of `H`; replaces the Metropolis weights.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hub_matrix: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub enum WeightSpec {
    #[default]
    Uniform,
    /// Proportional to shard sizes.
    DataSize,
    Explicit(Vec<f64>),
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub enum ProbSpec {
    #[default]
    Ones,
    Distribution(PDistribution),
    Explicit(Vec<f64>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LossKind {
    Quadratic,
    Logistic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub enum DatasetSpec {
    SyntheticLogistic {
        n: usize,
        dim: usize,
        condition: f64,
        signal: f64,
        seed: u64,
    },
    SyntheticQuadratic {
        n: usize,
        dim: usize,
        spread: f64,
        seed: u64,
    },
    /// Paths are relative to the config file.
    Idx { images: PathBuf, labels: PathBuf },
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub enum FractionSpec {
    #[default]
    Equal,
    /// Shares per group, groups taken by position inside each sub-network.
    Groups(Vec<f64>),
    Explicit(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectiveSection {
    pub kind: LossKind,
    pub dataset: DatasetSpec,
    pub batch_size: usize,
    #[serde(default)]
    pub regularization: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub curvature: Option<Vec<f64>>,
    #[serde(default)]
    pub fractions: FractionSpec,
    #[serde(default)]
    pub partition_seed: u64,
    /// Held-out share for test accuracy (logistic only).
    #[serde(default)]
    pub test_fraction: f64,
}

fn default_preset() -> Preset {
    Preset::MllSgd
}

fn default_init() -> Init {
    Init::Zeros
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    pub eta: f64,
    pub tau: usize,
    pub q: usize,
    pub steps: usize,
    pub seed: u64,
    pub eval_every: usize,
    #[serde(default = "default_preset")]
    pub preset: Preset,
    #[serde(default = "default_init")]
    pub init: Init,
}

fn default_probes() -> usize {
    8
}

fn default_gd_iters() -> usize {
    2000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub l: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma_sq: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(default = "default_probes")]
    pub probes: usize,
    #[serde(default = "default_probes")]
    pub draws: usize,
    #[serde(default = "default_gd_iters")]
    pub gd_iters: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub q_tau: Vec<(usize, usize)>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub p_distributions: Vec<PDistribution>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub topologies: Vec<HubTopology>,
    pub seeds: Vec<u64>,
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }
}

/// A config resolved into runnable parts.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub preset: Preset,
    /// Network before the preset is applied.
    pub net: NetworkSpec,
    pub hub: HubMatrixSource,
    pub objective: Objective,
    pub shards: Vec<Shard>,
    pub cfg: SimConfig,
}

impl Experiment {
    pub fn spec(&self) -> RunSpec<'_> {
        RunSpec {
            preset: self.preset,
            net: &self.net,
            hub: &self.hub,
            objective: &self.objective,
            shards: &self.shards,
            cfg: &self.cfg,
        }
    }

    /// Network and mixing set after the preset is applied.
    pub fn resolved(&self) -> Result<(NetworkSpec, MixingSet)> {
        let net = self.preset.apply(&self.net, &self.cfg)?;
        let hub = if self.preset == Preset::MllSgd {
            self.hub.clone()
        } else {
            HubMatrixSource::Metropolis
        };
        let mixing = MixingSet::build(&net, &hub)?;
        Ok((net, mixing))
    }
}

fn build_dataset(spec: &DatasetSpec, base_dir: &Path) -> Result<Dataset> {
    match spec {
        DatasetSpec::SyntheticLogistic {
            n,
            dim,
            condition,
            signal,
            seed,
        } => synthetic_logistic(*n, *dim, *condition, *signal, *seed),
        DatasetSpec::SyntheticQuadratic {
            n,
            dim,
            spread,
            seed,
        } => synthetic_quadratic(*n, *dim, *spread, *seed),
        DatasetSpec::Idx { images, labels } => {
            load_idx(&base_dir.join(images), &base_dir.join(labels))
        }
    }
}

pub fn build_experiment(config: &ConfigFile, base_dir: &Path) -> Result<Experiment> {
    let ns = &config.network;
    if ns.sub_networks == 0 || ns.workers_per_hub == 0 {
        return Err(Error::Config(
            "sub_networks and workers_per_hub must be positive".into(),
        ));
    }
    let mut net = NetworkSpec::uniform(ns.sub_networks, ns.workers_per_hub, &ns.topology);
    let n = net.num_workers();

    let os = &config.objective;
    let fractions = match &os.fractions {
        FractionSpec::Equal => vec![1.0 / n as f64; n],
        FractionSpec::Groups(shares) => harness::data_share_groups(&net, shares)?.1,
        FractionSpec::Explicit(f) => f.clone(),
    };
    if fractions.len() != n {
        return Err(Error::Config(format!(
            "{} data fractions for {n} workers",
            fractions.len()
        )));
    }
    let weights = match &ns.weights {
        WeightSpec::Uniform => vec![1.0; n],
        WeightSpec::DataSize => fractions.clone(),
        WeightSpec::Explicit(w) => w.clone(),
    };
    net = net.with_weights(&weights)?;
    let p = match &ns.p {
        ProbSpec::Ones => vec![1.0; n],
        ProbSpec::Distribution(d) => d.probabilities(&net),
        ProbSpec::Explicit(p) => p.clone(),
    };
    net = net.with_step_probs(&p)?;
    net.validate()?;

    let hub = match &ns.hub_matrix {
        None => HubMatrixSource::Metropolis,
        Some(rows) => HubMatrixSource::Explicit(Matrix::from_rows(rows)?),
    };

    let dataset = build_dataset(&os.dataset, base_dir)?;
    let (train, test) = if os.test_fraction > 0.0 {
        let (tr, te) = dataset.split(os.test_fraction, os.partition_seed ^ 0x7e57)?;
        (tr, Some(te))
    } else {
        (dataset, None)
    };
    let mut objective = match os.kind {
        LossKind::Quadratic => {
            let h = os
                .curvature
                .clone()
                .unwrap_or_else(|| vec![1.0; train.dim()]);
            Objective::quadratic(train, h, os.regularization)?
        }
        LossKind::Logistic => Objective::logistic(train, os.regularization)?,
    };
    if let Some(te) = test {
        objective = objective.with_test_set(te)?;
    }
    let shards = partition_iid(objective.dataset.len(), &fractions, os.partition_seed)?;

    let rs = &config.run;
    let cfg = SimConfig {
        eta: rs.eta,
        tau: rs.tau,
        q: rs.q,
        steps: rs.steps,
        batch_size: os.batch_size,
        seed: rs.seed,
        eval_every: rs.eval_every,
        init: rs.init,
        parallel: false,
    };
    cfg.validate()?;
    let exp = Experiment {
        preset: rs.preset,
        net,
        hub,
        objective,
        shards,
        cfg,
    };
    // surface preset conflicts and shard/batch problems before any run
    exp.preset.apply(&exp.net, &exp.cfg)?;
    let (rnet, mixing) = exp.resolved()?;
    let p = rnet.step_probs();
    Setup {
        mixing: &mixing,
        step_probs: &p,
        objective: &exp.objective,
        shards: &exp.shards,
    }
    .validate(&exp.cfg)?;
    Ok(exp)
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn trace_csv(records: &[TraceRecord], preset: Preset, seed: u64) -> String {
    let mut s = String::with_capacity(64 * (records.len() + 1));
    s.push_str(CSV_HEADER);
    s.push('\n');
    for r in records {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{}",
            r.k,
            r.time_slot,
            r.loss_full,
            r.grad_norm_sq,
            r.consensus_err,
            fmt_opt(r.test_acc),
            preset.name(),
            seed
        );
    }
    s
}

/// Writes through a sibling temp file and a rename.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let io = |source| Error::Io {
        path: path.to_path_buf(),
        source,
    };
    let dir = path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    let name = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    let tmp = dir.join(format!(".{name}.tmp-{}", std::process::id()));
    {
        let mut f = std::fs::File::create(&tmp).map_err(io)?;
        f.write_all(contents).map_err(io)?;
        f.sync_all().map_err(io)?;
    }
    std::fs::rename(&tmp, path).map_err(io)
}

fn emit(out: Option<&Path>, contents: &str) -> Result<()> {
    match out {
        Some(p) => write_atomic(p, contents.as_bytes()),
        None => write_stdout(contents),
    }
}

/// Writes to stdout, treating a closed pipe (`mllsgd ... | head`) as success.
fn write_stdout(contents: &str) -> Result<()> {
    let mut out = std::io::stdout().lock();
    match out.write_all(contents.as_bytes()).and_then(|_| out.flush()) {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(Error::Io {
            path: PathBuf::from("<stdout>"),
            source: e,
        }),
        _ => Ok(()),
    }
}

#[derive(Debug, Parser)]
#[command(name = "mllsgd", version, about = "Multi-level local SGD simulator")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Common {
    /// JSON experiment config.
    #[arg(long)]
    pub config: PathBuf,
    /// Overrides `run.seed`.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads; 0 uses all cores.
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
    /// Machine-readable output.
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one simulation and write its trace as CSV.
    Simulate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Verify the mixing-matrix properties of the configured network.
    CheckMatrices {
        #[command(flatten)]
        common: Common,
        /// Measure operator norms in the weight-adapted norm.
        #[arg(long)]
        weighted_norm: bool,
    },
    /// Evaluate the convergence bound and the step-size condition.
    Bound {
        #[command(flatten)]
        common: Common,
    },
    /// Run the sweep axes of the config (or of `--sweep`) over its seeds.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// JSON file holding a sweep section; defaults to the config's own.
        #[arg(long)]
        sweep: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Divergence { .. } => 3,
        Error::Eigen(_) | Error::Bound(_) => 1,
        _ => 2,
    }
}

/// Parses arguments, runs the command and returns the process exit code.
pub fn run_cli(args: impl IntoIterator<Item = String>) -> i32 {
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let result = match cli.command {
        Command::Simulate { common, out } => cmd_simulate(&common, out.as_deref()),
        Command::CheckMatrices {
            common,
            weighted_norm,
        } => cmd_check_matrices(&common, weighted_norm),
        Command::Bound { common } => cmd_bound(&common),
        Command::Sweep { common, sweep, out } => {
            cmd_sweep(&common, sweep.as_deref(), out.as_deref())
        }
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn load(common: &Common) -> Result<(ConfigFile, Experiment)> {
    let mut config = ConfigFile::load(&common.config)?;
    if let Some(seed) = common.seed {
        config.run.seed = seed;
    }
    let base = common.config.parent().unwrap_or(Path::new("."));
    let mut exp = build_experiment(&config, base)?;
    exp.cfg.parallel = common.jobs != 1;
    Ok((config, exp))
}

pub fn cmd_simulate(common: &Common, out: Option<&Path>) -> Result<i32> {
    let (_, exp) = load(common)?;
    let trace = harness::with_jobs(common.jobs, || harness::run_preset(&exp.spec()))?;
    emit(out, &trace_csv(&trace.records, trace.preset, trace.seed))?;
    Ok(0)
}

fn hub_matrix_checks(h: &Matrix, b: &[f64], tol: f64) -> Vec<PropertyCheck> {
    let neg = (-h.min_entry()).max(0.0);
    [
        ("H nonnegative", neg),
        ("H column sums", topology::column_stochastic_residual(h)),
        (
            "H detailed balance",
            topology::detailed_balance_residual(h, b),
        ),
    ]
    .into_iter()
    .map(|(name, r)| PropertyCheck {
        name: name.into(),
        residual: r,
        tolerance: tol,
        passed: r <= tol,
    })
    .collect()
}

#[derive(Debug, Serialize)]
struct MatrixReport {
    zeta: Option<f64>,
    checks: Vec<PropertyCheck>,
    passed: bool,
}

pub fn cmd_check_matrices(common: &Common, weighted_norm: bool) -> Result<i32> {
    let (_, exp) = load_for_matrices(common)?;
    let opts = VerifyOptions {
        norm: if weighted_norm {
            NormKind::Weighted
        } else {
            NormKind::Plain
        },
        ..VerifyOptions::default()
    };
    let net = exp.preset.apply(&exp.net, &exp.cfg)?;
    let report = match (&exp.hub, exp.preset) {
        (HubMatrixSource::Explicit(h), Preset::MllSgd) => {
            let b = topology::build_weight_vectors(&net)?.b;
            let checks = hub_matrix_checks(h, &b, opts.tolerance);
            if checks.iter().all(|c| c.passed) {
                full_report(&net, &exp.hub, &opts)?
            } else {
                MatrixReport {
                    zeta: None,
                    passed: false,
                    checks,
                }
            }
        }
        _ => full_report(&net, &HubMatrixSource::Metropolis, &opts)?,
    };
    let mut s = String::new();
    if common.json {
        s.push_str(&serde_json::to_string_pretty(&report).expect("report serializes"));
        s.push('\n');
    } else {
        if let Some(z) = report.zeta {
            let _ = writeln!(s, "zeta = {z}");
        }
        for c in &report.checks {
            let _ = writeln!(
                s,
                "{}  {:<40} residual={:.3e} tol={:.1e}",
                if c.passed { "PASS" } else { "FAIL" },
                c.name,
                c.residual,
                c.tolerance
            );
        }
    }
    write_stdout(&s)?;
    Ok(if report.passed { 0 } else { 1 })
}

fn full_report(
    net: &NetworkSpec,
    hub: &HubMatrixSource,
    opts: &VerifyOptions,
) -> Result<MatrixReport> {
    let mixing = MixingSet::build(net, hub)?;
    let checks = spectral::verify_mixing_set(&mixing, opts)?;
    Ok(MatrixReport {
        zeta: Some(mixing.zeta),
        passed: checks.iter().all(|c| c.passed),
        checks,
    })
}

/// Like [`load`], but an explicit hub matrix that fails validation is kept
/// so its residuals can be reported.
fn load_for_matrices(common: &Common) -> Result<(ConfigFile, Experiment)> {
    match load(common) {
        Err(Error::InvalidHubMatrix(_)) => {
            let mut config = ConfigFile::load(&common.config)?;
            let rows = config.network.hub_matrix.take();
            let base = common.config.parent().unwrap_or(Path::new("."));
            let mut exp = build_experiment(&config, base)?;
            if let Some(rows) = rows {
                exp.hub = HubMatrixSource::Explicit(Matrix::from_rows(&rows)?);
            }
            Ok((config, exp))
        }
        other => other,
    }
}

#[derive(Debug, Serialize)]
pub struct Constants {
    pub l: f64,
    pub sigma_sq: f64,
    pub beta: f64,
    pub f_gap: f64,
}

#[derive(Debug, Serialize)]
struct BoundOutput {
    zeta: f64,
    constants: Constants,
    report: BoundReport,
    rate: Option<RateTerms>,
    rate_error: Option<String>,
    warnings: Vec<String>,
}

pub fn problem_constants(exp: &Experiment, section: Option<&BoundSection>) -> Result<Constants> {
    let obj = &exp.objective;
    let defaults = BoundSection {
        l: None,
        sigma_sq: None,
        beta: None,
        probes: default_probes(),
        draws: default_probes(),
        gd_iters: default_gd_iters(),
    };
    let s = section.unwrap_or(&defaults);
    let l = s.l.or(obj.analytic_l).unwrap_or(0.0);
    let (sigma_sq, beta) = match (s.sigma_sq, s.beta) {
        (Some(sg), Some(b)) => (sg, b),
        (sg, b) => {
            let (est_s, est_b) = if obj.quadratic_minimum().is_some() {
                (quadratic_noise(obj, &exp.shards, exp.cfg.batch_size)?, 0.0)
            } else {
                let mut worst = (0.0f64, 0.0f64);
                for (i, shard) in exp.shards.iter().enumerate() {
                    let c = estimate_constants(
                        obj,
                        shard,
                        exp.cfg.batch_size,
                        s.probes.max(2),
                        s.draws,
                        harness::derive_seed(exp.cfg.seed, i as u64),
                    )?;
                    worst = (worst.0.max(c.sigma_sq), worst.1.max(c.beta));
                }
                worst
            };
            (sg.unwrap_or(est_s), b.unwrap_or(est_b))
        }
    };
    let rnet_mixing = exp.resolved()?;
    let p = rnet_mixing.0.step_probs();
    let state = SimState::new(
        &Setup {
            mixing: &rnet_mixing.1,
            step_probs: &p,
            objective: obj,
            shards: &exp.shards,
        },
        &exp.cfg,
    );
    let f_init = obj.value(state.x.col(0))?;
    let f_gap = (f_init - obj.f_inf(s.gd_iters)?).max(0.0);
    Ok(Constants {
        l,
        sigma_sq,
        beta,
        f_gap,
    })
}

pub fn cmd_bound(common: &Common) -> Result<i32> {
    let (config, exp) = load(common)?;
    let (net, mixing) = exp.resolved()?;
    let c = problem_constants(&exp, config.bound.as_ref())?;
    let inputs = BoundInputs {
        l: c.l,
        sigma_sq: c.sigma_sq,
        beta: c.beta,
        eta: exp.cfg.eta,
        q: exp.cfg.q,
        tau: exp.cfg.tau,
        steps: exp.cfg.steps,
        zeta: mixing.zeta,
        a: mixing.a.clone(),
        p: net.step_probs(),
        f_gap: c.f_gap,
    };
    let report = bounds::convergence_bound(&inputs)?;
    let mut warnings = Vec::new();
    for (i, (&ok, &p)) in report.feasible_per_worker.iter().zip(&inputs.p).enumerate() {
        if ok {
            continue;
        }
        if p <= bounds::P_THRESHOLD {
            warnings.push(format!(
                "worker {i}: p = {p} is at or below 2 - sqrt(2) = {:.4}; no step size satisfies the condition",
                bounds::P_THRESHOLD
            ));
        } else {
            warnings.push(format!(
                "worker {i}: step size {} violates the condition at p = {p}",
                inputs.eta
            ));
        }
    }
    let (rate, rate_error) =
        match bounds::tuned_rate(c.l, inputs.steps, inputs.q, inputs.tau, c.f_gap, c.sigma_sq) {
            Ok(r) => (Some(r), None),
            Err(e) => (None, Some(e.to_string())),
        };
    let out = BoundOutput {
        zeta: mixing.zeta,
        constants: c,
        report,
        rate,
        rate_error,
        warnings,
    };
    if common.json {
        let json = serde_json::to_string_pretty(&out).expect("bound serializes");
        write_stdout(&format!("{json}\n"))?;
        return Ok(0);
    }
    let r = &out.report;
    let mut s = String::new();
    let _ = writeln!(s, "zeta                 {}", out.zeta);
    let _ = writeln!(s, "gamma (tight)        {}", r.gamma.tight);
    let _ = writeln!(s, "gamma (conservative) {}", r.gamma.conservative);
    let _ = writeln!(s, "p_bar                {}", r.p_bar);
    let _ = writeln!(s, "L                    {}", out.constants.l);
    let _ = writeln!(s, "sigma^2              {}", out.constants.sigma_sq);
    let _ = writeln!(s, "beta                 {}", out.constants.beta);
    let _ = writeln!(s, "F(x1) - F_inf        {}", out.constants.f_gap);
    let _ = writeln!(s, "term1                {}", r.term1);
    let _ = writeln!(s, "term2                {}", r.term2);
    let _ = writeln!(s, "term3                {}", r.term3);
    let _ = writeln!(s, "term4                {}", r.term4);
    let _ = writeln!(s, "total                {}", r.total);
    let _ = writeln!(s, "asymptotic total     {}", r.asymptotic_total);
    let ok = r.feasible_per_worker.iter().filter(|&&f| f).count();
    let _ = writeln!(
        s,
        "step size            {}: condition holds for {ok} of {} workers",
        if r.feasible { "feasible" } else { "INFEASIBLE" },
        r.feasible_per_worker.len()
    );
    for w in &out.warnings {
        let _ = writeln!(s, "warning: {w}");
    }
    match (&out.rate, &out.rate_error) {
        (Some(c), _) => {
            let _ = writeln!(
                s,
                "rate                 eta = {}, gap term = {}, noise term = {}",
                c.eta, c.gap_term, c.noise_term
            );
        }
        (None, Some(e)) => {
            let _ = writeln!(s, "rate                 not applicable: {e}");
        }
        _ => {}
    }
    write_stdout(&s)?;
    Ok(0)
}

#[derive(Debug, Clone)]
struct SweepPoint {
    label: String,
    q: usize,
    tau: usize,
    p_name: String,
    topology: String,
    config: ConfigFile,
}

fn topology_name(t: &HubTopology) -> String {
    match t {
        HubTopology::Complete => "complete".into(),
        HubTopology::Path => "path".into(),
        HubTopology::Ring => "ring".into(),
        HubTopology::CustomEdgeList(e) => format!("custom-{}-edges", e.len()),
    }
}

fn p_name(p: &ProbSpec) -> String {
    match p {
        ProbSpec::Ones => "ones".into(),
        ProbSpec::Distribution(d) => d.name(),
        ProbSpec::Explicit(_) => "explicit".into(),
    }
}

fn sweep_points(base: &ConfigFile, sweep: &SweepSection) -> Result<Vec<SweepPoint>> {
    if sweep.seeds.is_empty() {
        return Err(Error::Config("sweep seed list is empty".into()));
    }
    let q_tau = if sweep.q_tau.is_empty() {
        vec![(base.run.q, base.run.tau)]
    } else {
        sweep.q_tau.clone()
    };
    let ps: Vec<ProbSpec> = if sweep.p_distributions.is_empty() {
        vec![base.network.p.clone()]
    } else {
        sweep
            .p_distributions
            .iter()
            .map(|d| ProbSpec::Distribution(*d))
            .collect()
    };
    let topologies = if sweep.topologies.is_empty() {
        vec![base.network.topology.clone()]
    } else {
        sweep.topologies.clone()
    };
    let mut points = Vec::new();
    for &(q, tau) in &q_tau {
        if q == 0 || tau == 0 || !base.run.steps.is_multiple_of(q * tau) {
            return Err(Error::Config(format!(
                "sweep pair q = {q}, tau = {tau} does not divide K = {}",
                base.run.steps
            )));
        }
        for p in &ps {
            for t in &topologies {
                let mut config = base.clone();
                config.run.q = q;
                config.run.tau = tau;
                config.network.p = p.clone();
                config.network.topology = t.clone();
                config.sweep = None;
                let (pn, tn) = (p_name(p), topology_name(t));
                points.push(SweepPoint {
                    label: format!(
                        "{} q={q} tau={tau} p={pn} topology={tn}",
                        base.run.preset.name()
                    ),
                    q,
                    tau,
                    p_name: pn,
                    topology: tn,
                    config,
                });
            }
        }
    }
    Ok(points)
}

pub fn cmd_sweep(common: &Common, sweep_path: Option<&Path>, out: Option<&Path>) -> Result<i32> {
    let mut config = ConfigFile::load(&common.config)?;
    if let Some(seed) = common.seed {
        config.run.seed = seed;
    }
    let sweep = match sweep_path {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|source| Error::Io {
                path: p.to_path_buf(),
                source,
            })?;
            serde_json::from_str::<SweepSection>(&text)
                .map_err(|e| Error::Config(format!("{}: {e}", p.display())))?
        }
        None => config.sweep.clone().ok_or_else(|| {
            Error::Config("no sweep section in config and no --sweep file".into())
        })?,
    };
    let base_dir = common
        .config
        .parent()
        .unwrap_or(Path::new("."))
        .to_path_buf();
    let points = sweep_points(&config, &sweep)?;
    let mut experiments = Vec::with_capacity(points.len());
    for pt in &points {
        experiments.push(build_experiment(&pt.config, &base_dir)?);
    }
    let jobs: Vec<(usize, u64)> = (0..points.len())
        .flat_map(|i| sweep.seeds.iter().map(move |&s| (i, s)))
        .collect();
    let results = harness::with_jobs(common.jobs, || {
        jobs.par_iter()
            .map(|&(i, seed)| {
                let cfg = SimConfig {
                    seed,
                    ..experiments[i].cfg.clone()
                };
                let spec = RunSpec {
                    cfg: &cfg,
                    ..experiments[i].spec()
                };
                let trace = harness::run_preset(&spec)?;
                let last = trace.records.last().expect("trace has a final record");
                Ok((
                    harness::tail_mean_loss(&trace.records, 0.1),
                    last.grad_norm_sq,
                ))
            })
            .collect::<Result<Vec<(f64, f64)>>>()
    })?;

    let mut rows =
        String::from("config,q,tau,p_distribution,topology,seed,final_loss,final_grad_norm_sq\n");
    let mut summary = String::from(
        "config,q,tau,p_distribution,topology,runs,mean_final_loss,stddev_final_loss\n",
    );
    for (i, pt) in points.iter().enumerate() {
        let mine: Vec<f64> = jobs
            .iter()
            .zip(&results)
            .filter(|((j, _), _)| *j == i)
            .map(|((_, seed), (loss, grad))| {
                let _ = writeln!(
                    rows,
                    "{},{},{},{},{},{seed},{loss},{grad}",
                    pt.label, pt.q, pt.tau, pt.p_name, pt.topology
                );
                *loss
            })
            .collect();
        let _ = writeln!(
            summary,
            "{},{},{},{},{},{},{},{}",
            pt.label,
            pt.q,
            pt.tau,
            pt.p_name,
            pt.topology,
            mine.len(),
            harness::mean(&mine),
            harness::sample_stddev(&mine)
        );
    }
    match out {
        Some(p) => {
            write_atomic(p, rows.as_bytes())?;
            let mut name = p.as_os_str().to_owned();
            name.push(".summary.csv");
            write_atomic(Path::new(&name), summary.as_bytes())?;
            if !common.json {
                write_stdout(&summary)?;
            }
        }
        None => write_stdout(&format!("{rows}\n{summary}"))?,
    }
    Ok(0)
}
