//! Experiment runner behind the `lclab` binary.
//!
//! Configuration is plain `key = value` text; `--set key=value` and the
//! global flags override the file. Every CSV starts with
//! `# config_hash=<hex> seed=<u64>`.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use sha2::{Digest, Sha256};

use crate::distributions::{DistributionSpec, Family};
use crate::error::{Error, Result};
use crate::linalg::Mat;
use crate::localization::{self, Backend, Halfspace, LocalizationTrace, RunConfig};
use crate::metrics::{self, Empirical1D, MetricReport};
use crate::moments;
use crate::rng::{derive_seed, stream};
use crate::tensorcheck::{
    self, EnsembleKind, IneqTrialReport, MatrixEnsemble, StochasticBudget, TinqParams,
};

pub const EXIT_OK: u8 = 0;
pub const EXIT_VIOLATION: u8 = 1;
pub const EXIT_USAGE: u8 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum CommandKind {
    /// W1/W2 distance of ⟨x,y⟩ to N(0, n).
    GenClt,
    /// E⟨x,y⟩³ per family and dimension.
    ThirdMoment,
    /// Localization traces with oracle, martingale and norm summaries.
    Localize,
    /// Matrix and pair-tensor inequality trials.
    TensorSuite,
    /// Halfspace Cheeger estimates with Poincaré checks.
    CheegerScan,
    /// Fast battery of internal consistency checks.
    Selftest,
}

impl CommandKind {
    pub fn name(self) -> &'static str {
        match self {
            CommandKind::GenClt => "gen-clt",
            CommandKind::ThirdMoment => "third-moment",
            CommandKind::Localize => "localize",
            CommandKind::TensorSuite => "tensor-suite",
            CommandKind::CheegerScan => "cheeger-scan",
            CommandKind::Selftest => "selftest",
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "lclab",
    version,
    about = "Monte-Carlo experiments on isotropic log-concave measures"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: CommandKind,
    /// key = value configuration file.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Master seed for every random stream.
    #[arg(long, global = true, value_name = "U64")]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Worker threads (0 = all cores).
    #[arg(long, global = true, value_name = "K")]
    pub threads: Option<usize>,
    /// Override one configuration key.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    pub set: Vec<String>,
}

/// Localization backend selection.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BackendChoice {
    Particles,
    GaussianExact,
}

/// Every tunable of every command. All fields have defaults.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub command: CommandKind,
    pub families: Vec<Family>,
    pub family_pairs: Vec<(Family, Family)>,
    pub dims: Vec<usize>,
    pub samples: usize,
    pub pairs: usize,
    pub particles: usize,
    pub runs: usize,
    pub seed: u64,
    pub dt: f64,
    pub horizon: f64,
    pub q: u32,
    pub backend: BackendChoice,
    pub ess_fraction: f64,
    pub potential_u: f64,
    pub c_tv: f64,
    pub c_ws: f64,
    pub tinq_alpha: f64,
    pub tinq_beta: f64,
    pub tinq_constant: f64,
    pub tinq_s: f64,
    pub trials: usize,
    /// Empty means the default kinds for each dimension.
    pub ensembles: Vec<EnsembleKind>,
    pub stochastic_families: Vec<Family>,
    pub stochastic_dims: Vec<usize>,
    pub stochastic_trials: usize,
    pub stochastic_pairs: usize,
    pub directions: usize,
    pub poincare_c: f64,
    pub poincare_trials: usize,
    pub out_dir: PathBuf,
    pub threads: usize,
}

pub const DEFAULT_SEED: u64 = 20240601;

/// Required share of runs whose final set measure lies in [1/4, 3/4].
pub const BAND_FLOOR: f64 = 0.85;

impl ExperimentConfig {
    pub fn defaults(command: CommandKind) -> Self {
        let mut cfg = ExperimentConfig {
            command,
            families: Family::ALL.to_vec(),
            family_pairs: vec![
                (Family::Cube, Family::Cube),
                (Family::Gaussian, Family::Gaussian),
            ],
            dims: vec![8, 32, 128],
            samples: 200_000,
            pairs: 1_000_000,
            particles: 100_000,
            runs: 100,
            seed: DEFAULT_SEED,
            dt: 1e-3,
            horizon: 1.0,
            q: 2,
            backend: BackendChoice::Particles,
            ess_fraction: localization::DEFAULT_ESS_FRACTION,
            potential_u: 4.0,
            c_tv: metrics::DEFAULT_C_TV,
            c_ws: metrics::DEFAULT_C_WS,
            tinq_alpha: 1.0,
            tinq_beta: 0.0,
            tinq_constant: 1.0,
            tinq_s: 2.0,
            trials: 1000,
            ensembles: Vec::new(),
            stochastic_families: vec![Family::ShiftedExpProd],
            stochastic_dims: vec![4],
            stochastic_trials: 200,
            stochastic_pairs: 20_000,
            directions: 64,
            poincare_c: 4.0,
            poincare_trials: 20,
            out_dir: PathBuf::from("out"),
            threads: 0,
        };
        match command {
            CommandKind::ThirdMoment => cfg.dims = vec![4, 16, 64],
            CommandKind::Localize => {
                cfg.families = vec![Family::Gaussian];
                cfg.dims = vec![8];
            }
            CommandKind::TensorSuite => cfg.dims = vec![2, 4, 8, 16],
            CommandKind::CheegerScan => cfg.dims = vec![4, 64],
            CommandKind::GenClt | CommandKind::Selftest => {}
        }
        cfg
    }

    /// Canonical `key = value` lines in a fixed order.
    pub fn entries(&self) -> Vec<(&'static str, String)> {
        let list = |v: &[usize]| join(v.iter().map(|d| d.to_string()));
        let fams = |v: &[Family]| join(v.iter().map(|f| f.name().to_string()));
        vec![
            ("command", self.command.name().to_string()),
            ("families", fams(&self.families)),
            (
                "family_pairs",
                join(self.family_pairs.iter().map(|(p, q)| format!("{p}:{q}"))),
            ),
            ("dims", list(&self.dims)),
            ("samples", self.samples.to_string()),
            ("pairs", self.pairs.to_string()),
            ("particles", self.particles.to_string()),
            ("runs", self.runs.to_string()),
            ("seed", self.seed.to_string()),
            ("dt", fmt_f64(self.dt)),
            ("horizon", fmt_f64(self.horizon)),
            ("q", self.q.to_string()),
            (
                "backend",
                match self.backend {
                    BackendChoice::Particles => "particles".into(),
                    BackendChoice::GaussianExact => "gaussian_exact".into(),
                },
            ),
            ("ess_fraction", fmt_f64(self.ess_fraction)),
            ("potential_u", fmt_f64(self.potential_u)),
            ("c_tv", fmt_f64(self.c_tv)),
            ("c_ws", fmt_f64(self.c_ws)),
            ("tinq_alpha", fmt_f64(self.tinq_alpha)),
            ("tinq_beta", fmt_f64(self.tinq_beta)),
            ("tinq_constant", fmt_f64(self.tinq_constant)),
            ("tinq_s", fmt_f64(self.tinq_s)),
            ("trials", self.trials.to_string()),
            (
                "ensembles",
                if self.ensembles.is_empty() {
                    "default".into()
                } else {
                    join(self.ensembles.iter().map(EnsembleKind::name))
                },
            ),
            ("stochastic_families", fams(&self.stochastic_families)),
            ("stochastic_dims", list(&self.stochastic_dims)),
            ("stochastic_trials", self.stochastic_trials.to_string()),
            ("stochastic_pairs", self.stochastic_pairs.to_string()),
            ("directions", self.directions.to_string()),
            ("poincare_c", fmt_f64(self.poincare_c)),
            ("poincare_trials", self.poincare_trials.to_string()),
            ("out_dir", self.out_dir.display().to_string()),
            ("threads", self.threads.to_string()),
        ]
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        match key.trim() {
            "command" => {
                if v != self.command.name() {
                    return Err(Error::Config(format!(
                        "config is for {v:?} but the command is {:?}",
                        self.command.name()
                    )));
                }
            }
            "families" => self.families = parse_list(v, parse_family)?,
            "family_pairs" => {
                self.family_pairs = parse_list(v, |s| {
                    let (p, q) = s
                        .split_once(':')
                        .ok_or_else(|| Error::Config(format!("expected p:q, got {s:?}")))?;
                    Ok((parse_family(p)?, parse_family(q)?))
                })?
            }
            "dims" => self.dims = parse_list(v, parse_dim)?,
            "samples" => self.samples = parse_count(key, v)?,
            "pairs" => self.pairs = parse_count(key, v)?,
            "particles" => self.particles = parse_count(key, v)?,
            "runs" => self.runs = parse_count(key, v)?,
            "seed" => self.seed = parse_num(key, v)?,
            "dt" => self.dt = parse_positive(key, v)?,
            "horizon" => self.horizon = parse_positive(key, v)?,
            "q" => {
                let q: u32 = parse_num(key, v)?;
                if q < 2 || !q.is_multiple_of(2) {
                    return Err(Error::Config(format!("q must be even and >= 2, got {q}")));
                }
                self.q = q;
            }
            "backend" => {
                self.backend = match v {
                    "particles" => BackendChoice::Particles,
                    "gaussian_exact" => BackendChoice::GaussianExact,
                    _ => return Err(Error::Config(format!("unknown backend {v:?}"))),
                }
            }
            "ess_fraction" => {
                let f: f64 = parse_num(key, v)?;
                if !(0.0..1.0).contains(&f) {
                    return Err(Error::Config(format!("ess_fraction {f} outside [0, 1)")));
                }
                self.ess_fraction = f;
            }
            "potential_u" => self.potential_u = parse_positive(key, v)?,
            "c_tv" => self.c_tv = parse_positive(key, v)?,
            "c_ws" => self.c_ws = parse_positive(key, v)?,
            "tinq_alpha" => self.tinq_alpha = parse_positive(key, v)?,
            "tinq_beta" => self.tinq_beta = parse_num(key, v)?,
            "tinq_constant" => self.tinq_constant = parse_positive(key, v)?,
            "tinq_s" => self.tinq_s = parse_positive(key, v)?,
            "trials" => self.trials = parse_count(key, v)?,
            "ensembles" => {
                self.ensembles = if v == "default" {
                    Vec::new()
                } else {
                    parse_list(v, |s| {
                        s.parse().map_err(|e: Error| Error::Config(e.to_string()))
                    })?
                }
            }
            "stochastic_families" => self.stochastic_families = parse_list(v, parse_family)?,
            "stochastic_dims" => self.stochastic_dims = parse_list(v, parse_dim)?,
            "stochastic_trials" => self.stochastic_trials = parse_count(key, v)?,
            "stochastic_pairs" => self.stochastic_pairs = parse_count(key, v)?,
            "directions" => self.directions = parse_count(key, v)?,
            "poincare_c" => self.poincare_c = parse_positive(key, v)?,
            "poincare_trials" => self.poincare_trials = parse_count(key, v)?,
            "out_dir" => self.out_dir = PathBuf::from(v),
            "threads" => self.threads = parse_num(key, v)?,
            other => return Err(Error::Config(format!("unknown key {other:?}"))),
        }
        Ok(())
    }

    /// Apply a `key = value` document (`#` starts a comment).
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!("line {}: expected key = value", lineno + 1))
            })?;
            self.set(k, v)?;
        }
        Ok(())
    }

    /// Echo of the resolved configuration.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for (k, v) in self.entries() {
            let _ = writeln!(s, "{k} = {v}");
        }
        s
    }

    /// SHA-256 of the entries that affect results (everything except the
    /// output directory and thread count).
    pub fn hash_hex(&self) -> String {
        let mut h = Sha256::new();
        for (k, v) in self.entries() {
            if k == "out_dir" || k == "threads" {
                continue;
            }
            h.update(format!("{k} = {v}\n").as_bytes());
        }
        h.finalize().iter().fold(String::new(), |mut s, b| {
            let _ = write!(s, "{b:02x}");
            s
        })
    }

    pub fn csv_preamble(&self) -> String {
        format!("# config_hash={} seed={}\n", self.hash_hex(), self.seed)
    }

    /// Build from parsed flags: defaults, then the file, then `--set`,
    /// then the global flags.
    pub fn from_cli(cli: &Cli) -> Result<Self> {
        let mut cfg = ExperimentConfig::defaults(cli.command);
        if let Some(path) = &cli.config {
            let text = fs::read_to_string(path)
                .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
            cfg.apply_text(&text)?;
        }
        for kv in &cli.set {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("--set expects KEY=VALUE, got {kv:?}")))?;
            cfg.set(k, v)?;
        }
        if let Some(seed) = cli.seed {
            cfg.seed = seed;
        }
        if let Some(out) = &cli.out {
            cfg.out_dir = out.clone();
        }
        if let Some(t) = cli.threads {
            cfg.threads = t;
        }
        Ok(cfg)
    }

    fn specs(&self, families: &[Family], dims: &[usize]) -> Result<Vec<DistributionSpec>> {
        let mut out = Vec::new();
        for &f in families {
            for &n in dims {
                out.push(DistributionSpec::new(f, n)?);
            }
        }
        Ok(out)
    }

    fn run_config(&self) -> RunConfig {
        RunConfig {
            horizon: self.horizon,
            dt: self.dt,
            q: self.q,
            backend: match self.backend {
                BackendChoice::Particles => Backend::Particles(self.particles),
                BackendChoice::GaussianExact => Backend::GaussianExact,
            },
            ess_fraction: self.ess_fraction,
            refinement: 1,
            decompose: false,
        }
    }

    fn tinq_params(&self) -> TinqParams {
        TinqParams {
            alpha: self.tinq_alpha,
            beta: self.tinq_beta,
            constant: self.tinq_constant,
            s: self.tinq_s,
            ..TinqParams::default()
        }
    }
}

fn join(items: impl Iterator<Item = String>) -> String {
    items.collect::<Vec<_>>().join(",")
}

/// Shortest round-trip representation.
fn fmt_f64(v: f64) -> String {
    format!("{v:?}")
}

fn parse_num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse()
        .map_err(|_| Error::Config(format!("{key}: cannot parse {v:?}")))
}

fn parse_count(key: &str, v: &str) -> Result<usize> {
    let n: usize = parse_num(key, v)?;
    if n == 0 {
        return Err(Error::Config(format!("{key} must be at least 1")));
    }
    Ok(n)
}

fn parse_positive(key: &str, v: &str) -> Result<f64> {
    let x: f64 = parse_num(key, v)?;
    if !(x > 0.0 && x.is_finite()) {
        return Err(Error::Config(format!("{key} must be positive, got {v:?}")));
    }
    Ok(x)
}

fn parse_family(s: &str) -> Result<Family> {
    s.trim()
        .parse()
        .map_err(|e: Error| Error::Config(e.to_string()))
}

fn parse_dim(s: &str) -> Result<usize> {
    parse_count("dims", s.trim())
}

fn parse_list<T>(v: &str, f: impl Fn(&str) -> Result<T>) -> Result<Vec<T>> {
    let items = v
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(f)
        .collect::<Result<Vec<_>>>()?;
    if items.is_empty() {
        return Err(Error::Config(format!("empty list {v:?}")));
    }
    Ok(items)
}

/// Whether a command found a mathematical violation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Outcome {
    pub violation: bool,
}

struct Output<'a> {
    cfg: &'a ExperimentConfig,
}

impl Output<'_> {
    fn write_csv(&self, rel: &str, header: &str, rows: &[String]) -> Result<PathBuf> {
        let path = self.cfg.out_dir.join(rel);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        let mut text = self.cfg.csv_preamble();
        text.push_str(header);
        text.push('\n');
        for r in rows {
            text.push_str(r);
            text.push('\n');
        }
        fs::write(&path, text)?;
        Ok(path)
    }
}

/// Run one command with a resolved configuration, writing its artifacts.
pub fn run_command(cfg: &ExperimentConfig) -> Result<Outcome> {
    fs::create_dir_all(&cfg.out_dir)?;
    fs::write(cfg.out_dir.join("config.txt"), cfg.to_text())?;
    let out = Output { cfg };
    match cfg.command {
        CommandKind::GenClt => run_gen_clt(cfg, &out),
        CommandKind::ThirdMoment => run_third_moment(cfg, &out),
        CommandKind::Localize => run_localize(cfg, &out),
        CommandKind::TensorSuite => run_tensor_suite(cfg, &out),
        CommandKind::CheegerScan => run_cheeger_scan(cfg, &out),
        CommandKind::Selftest => run_selftest(cfg, &out),
    }
}

fn run_gen_clt(cfg: &ExperimentConfig, out: &Output) -> Result<Outcome> {
    let mut rows = Vec::new();
    for &(fp, fq) in &cfg.family_pairs {
        for &n in &cfg.dims {
            let p = DistributionSpec::new(fp, n)?;
            let q = DistributionSpec::new(fq, n)?;
            let seed = derive_seed(cfg.seed, &format!("gen-clt:{fp}:{fq}"), n as u64);
            let ips = Empirical1D::new(moments::inner_products(&p, &q, cfg.pairs, seed)?)?;
            let w1 = metrics::w_p_vs_normal(&ips, n as f64, 1.0)?;
            let w2 = metrics::w_p_vs_normal(&ips, n as f64, 2.0)?;
            rows.push(format!(
                "{fp},{fq},{n},{w1:e},{w2:e},{:e},{seed}",
                w2 * w2 / n as f64
            ));
        }
    }
    out.write_csv(
        "gen_clt.csv",
        "family_p,family_q,n,w1,w2,w2_sq_over_n,seed",
        &rows,
    )?;
    Ok(Outcome::default())
}

/// Exact `E⟨x,y⟩³` for the built-in families.
pub fn exact_third_moment(spec: &DistributionSpec) -> f64 {
    if spec.family().is_symmetric() {
        0.0
    } else {
        4.0 * spec.dim() as f64
    }
}

fn run_third_moment(cfg: &ExperimentConfig, out: &Output) -> Result<Outcome> {
    let mut rows = Vec::new();
    for spec in cfg.specs(&cfg.families, &cfg.dims)? {
        let n = spec.dim() as f64;
        let seed = derive_seed(
            cfg.seed,
            &format!("third-moment:{}", spec.family()),
            spec.dim() as u64,
        );
        let e = moments::third_moment_inner(&spec, &spec, cfg.pairs, seed)?;
        let exact = exact_third_moment(&spec);
        rows.push(format!(
            "{},{},{:e},{:e},{:e},{:e},{:e},{},{},{}",
            spec.family(),
            spec.dim(),
            e.value,
            e.std_error,
            e.value / n,
            e.value / n.powf(1.5),
            exact,
            e.within(exact, 3.0),
            e.n_samples,
            seed
        ));
    }
    out.write_csv(
        "third_moment.csv",
        "family,n,estimate,std_error,estimate_over_n,estimate_over_n_1_5,exact,within_3se,n_samples,seed",
        &rows,
    )?;
    Ok(Outcome::default())
}

fn run_localize(cfg: &ExperimentConfig, out: &Output) -> Result<Outcome> {
    let run_cfg = cfg.run_config();
    run_cfg
        .validate()
        .map_err(|e| Error::Config(e.to_string()))?;
    let mut summary = Vec::new();
    let mut checks = Vec::new();
    let (mut total, mut degenerate) = (0usize, 0usize);
    for spec in cfg.specs(&cfg.families, &cfg.dims)? {
        let tag = format!("{}_n{}", spec.family(), spec.dim());
        let seed = derive_seed(cfg.seed, &format!("localize:{tag}"), 0);
        let h = Halfspace::axis(spec.dim(), 0)?;
        let traces =
            localization::run_many(&spec, &run_cfg, std::slice::from_ref(&h), cfg.runs, seed)?;
        for (k, tr) in traces.iter().enumerate() {
            let rel = format!("traces/{tag}_run{k:04}.csv");
            let path = cfg.out_dir.join(&rel);
            if let Some(parent) = path.parent() {
                fs::create_dir_all(parent)?;
            }
            fs::write(&path, format!("{}{}", cfg.csv_preamble(), tr.to_csv()))?;
            summary.push(summary_row(&spec, k, tr));
        }
        total += traces.len();
        degenerate += traces.iter().filter(|t| t.halted.is_some()).count();
        let worst_oracle = traces
            .iter()
            .map(LocalizationTrace::max_oracle_a_dev)
            .fold(0.0, f64::max);
        if spec.family() == Family::Gaussian {
            checks.push(check_row(
                &tag,
                &MetricReport::new("oracle_a_dev", worst_oracle, 0.05, 0.0),
            ));
        }
        let mart = localization::martingale_from_traces(&traces, seed)?;
        checks.push(check_row(&tag, &mart.mean_report()));
        checks.push(check_row(&tag, &mart.band_report()));
        checks.push(check_row(
            &tag,
            &MetricReport::new("band_frequency_floor", BAND_FLOOR, mart.band_frequency, 0.0),
        ));
        if let Some(decay) = traces
            .iter()
            .filter_map(|t| t.max_t_a_op(1.0))
            .reduce(f64::max)
        {
            checks.push(check_row(
                &tag,
                &MetricReport::new("t_times_a_op", decay, 2.0, 0.0),
            ));
        }
    }
    out.write_csv(
        "localize_summary.csv",
        "family,n,run,degenerate,final_t,max_oracle_a_dev,max_oracle_mu_dev,max_a_op,g0,g_final,phi_final",
        &summary,
    )?;
    out.write_csv(
        "localize_checks.csv",
        &format!("case,{}", MetricReport::CSV_HEADER),
        &checks,
    )?;
    Ok(Outcome {
        violation: total > 0 && degenerate == total,
    })
}

fn summary_row(spec: &DistributionSpec, run: usize, tr: &LocalizationTrace) -> String {
    let last = tr.final_row();
    format!(
        "{},{},{},{},{:e},{:e},{:e},{:e},{:e},{:e},{:e}",
        spec.family(),
        spec.dim(),
        run,
        tr.halted.is_some(),
        last.t,
        tr.max_oracle_a_dev(),
        tr.max_oracle_mu_dev(),
        tr.max_a_op(),
        tr.rows[0].g[0],
        last.g[0],
        last.phi
    )
}

fn check_row(case: &str, r: &MetricReport) -> String {
    format!("{case},{}", r.to_csv_row())
}

fn ensembles_for(cfg: &ExperimentConfig, n: usize) -> Vec<EnsembleKind> {
    if cfg.ensembles.is_empty() {
        EnsembleKind::defaults(n)
    } else {
        cfg.ensembles.clone()
    }
}

fn run_tensor_suite(cfg: &ExperimentConfig, out: &Output) -> Result<Outcome> {
    const HEADER: &str =
        "section,ensemble,family,n,lemma_id,trials,violations,worst_slack,ci_flagged";
    let mut rows = Vec::new();
    let mut violation = false;
    let mut push =
        |section: &str, ens: &str, fam: &str, n: usize, r: &IneqTrialReport, hard: bool| {
            if hard && !r.passed() {
                violation = true;
            }
            rows.push(format!("{section},{ens},{fam},{n},{}", r.to_csv_row()));
        };
    for &n in &cfg.dims {
        for kind in ensembles_for(cfg, n) {
            if let EnsembleKind::LowRank(r) | EnsembleKind::Projection(r) = kind {
                if r > n {
                    continue;
                }
            }
            let seed = derive_seed(cfg.seed, &format!("tensor-det:{kind}"), n as u64);
            let ens = MatrixEnsemble::new(kind, n, seed)?;
            for r in tensorcheck::deterministic_suite(&ens, cfg.trials)? {
                push("deterministic", &kind.name(), "", n, &r, true);
            }
        }
    }
    let budget = StochasticBudget {
        trials: cfg.stochastic_trials,
        pairs: cfg.stochastic_pairs,
        ..StochasticBudget::default()
    };
    for spec in cfg.specs(&cfg.stochastic_families, &cfg.stochastic_dims)? {
        let kind = EnsembleKind::SymmetricGoe;
        let seed = derive_seed(
            cfg.seed,
            &format!("tensor-stoch:{}", spec.family()),
            spec.dim() as u64,
        );
        let ens = MatrixEnsemble::new(kind, spec.dim(), seed)?;
        for r in tensorcheck::stochastic_suite(&spec, &ens, &budget, &cfg.tinq_params())? {
            let hard = tensorcheck::is_hard_check(&r.lemma_id);
            push(
                "stochastic",
                &kind.name(),
                spec.family().name(),
                spec.dim(),
                &r,
                hard,
            );
        }
    }
    out.write_csv("tensor_suite.csv", HEADER, &rows)?;
    Ok(Outcome { violation })
}

fn run_cheeger_scan(cfg: &ExperimentConfig, out: &Output) -> Result<Outcome> {
    let mut rows = Vec::new();
    let mut violation = false;
    for spec in cfg.specs(&cfg.families, &cfg.dims)? {
        let n = spec.dim();
        let seed = derive_seed(cfg.seed, &format!("cheeger:{}", spec.family()), n as u64);
        let est = moments::halfspace_cheeger(&spec, cfg.directions, cfg.samples, seed)?;
        let axis = moments::axis_cheeger(&spec, cfg.samples, seed)?;
        let ens = MatrixEnsemble::new(
            EnsembleKind::SymmetricGoe,
            n,
            derive_seed(seed, "poincare", 0),
        )?;
        let (mut passed, mut worst) = (0usize, 0.0f64);
        for k in 0..cfg.poincare_trials {
            let mut rng = ens.trial_rng("poincare", k as u64);
            let a: Mat = ens.draw(&mut rng);
            let r = moments::poincare_check(
                &spec,
                &a,
                cfg.samples,
                est.value,
                cfg.poincare_c,
                derive_seed(seed, "poincare-samples", k as u64),
            )?;
            passed += usize::from(r.satisfied);
            if r.rhs > 0.0 {
                worst = worst.max(r.lhs / r.rhs);
            }
        }
        violation |= passed < cfg.poincare_trials;
        rows.push(format!(
            "{},{},{:e},{},{:e},{},{},{},{:e},{}",
            spec.family(),
            n,
            est.value,
            est.direction_count,
            axis.value,
            cfg.samples,
            cfg.poincare_trials,
            passed,
            worst,
            seed
        ));
    }
    out.write_csv(
        "cheeger.csv",
        "family,n,value,direction_count,axis_value,samples,poincare_trials,poincare_satisfied,poincare_worst_ratio,seed",
        &rows,
    )?;
    Ok(Outcome { violation })
}

fn run_selftest(cfg: &ExperimentConfig, out: &Output) -> Result<Outcome> {
    let seed = cfg.seed;
    let mut rows = Vec::new();
    let mut failed = false;
    let mut record = |name: &str, ok: bool, detail: String| {
        failed |= !ok;
        rows.push(format!("{name},{ok},{detail}"));
    };

    for f in Family::ALL {
        let spec = DistributionSpec::new(f, 4)?;
        let s = crate::distributions::sample(&spec, 40_000, derive_seed(seed, "self-iso", 0))?;
        let mean = s.mean().iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let dev = crate::linalg::op_norm(&(s.covariance() - Mat::identity(4, 4)));
        record(
            &format!("isotropy_{f}"),
            mean < 0.05 && dev < 0.12,
            format!("{mean:e};{dev:e}"),
        );
    }

    let a = Empirical1D::new(vec![0.0, 1.0])?;
    let b = Empirical1D::new(vec![1.0, 2.0])?;
    let w = metrics::w_p_empirical(&a, &b, 1.0)?;
    record("unit_shift_w1", (w - 1.0).abs() < 1e-12, format!("{w:e}"));

    let spec = DistributionSpec::new(Family::ShiftedExpProd, 3)?;
    let ens = MatrixEnsemble::new(EnsembleKind::SymmetricGoe, 3, seed)?;
    let mut rng = ens.trial_rng("self", 0);
    let (m1, m2) = (ens.draw(&mut rng), ens.draw(&mut rng));
    let r = tensorcheck::check_tequ_identity(&spec, &m1, &m2, 200, seed)?;
    record("tequ", r.passed(), format!("{:e}", r.worst_slack));

    let det = MatrixEnsemble::new(EnsembleKind::PsdWishart, 4, seed)?;
    let reports = tensorcheck::deterministic_suite(&det, 50)?;
    record(
        "deterministic_inequalities",
        reports.iter().all(IneqTrialReport::passed),
        format!("{}", reports.iter().map(|r| r.violations).sum::<usize>()),
    );

    let g = DistributionSpec::new(Family::Gaussian, 3)?;
    let run = RunConfig {
        horizon: 0.2,
        dt: 0.01,
        backend: Backend::GaussianExact,
        ..RunConfig::default()
    };
    let tr = localization::run_trace(&g, &run, &[], seed)?;
    record(
        "gaussian_backend",
        tr.max_oracle_a_dev() < 1e-12,
        format!("{:e}", tr.max_oracle_a_dev()),
    );

    let e = moments::third_moment_inner(&spec, &spec, 100_000, seed)?;
    record(
        "third_moment_product",
        e.within(12.0, 4.0),
        format!("{:e};{:e}", e.value, e.std_error),
    );

    let mut srng = stream(seed, 0);
    let mut gen = |n: usize| -> Result<Vec<f64>> {
        Ok((0..n)
            .map(|_| rand::Rng::random::<f64>(&mut srng))
            .collect())
    };
    let (x, y) = (Empirical1D::new(gen(5)?)?, Empirical1D::new(gen(5)?)?);
    let ok = metrics::w_p_empirical(&x.scaled(-2.0), &y.scaled(-2.0), 2.0)?
        - 2.0 * metrics::w_p_empirical(&x, &y, 2.0)?;
    record("scale_equivariance", ok.abs() < 1e-12, format!("{ok:e}"));

    out.write_csv("selftest.csv", "check,passed,detail", &rows)?;
    Ok(Outcome { violation: failed })
}

fn configure_threads(threads: usize) {
    if threads > 0 {
        // Fails only if a pool already exists, in which case it is kept.
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global();
    }
}

/// Parse arguments, run, and map the outcome to the exit-code contract.
pub fn main_with_args<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let cfg = match ExperimentConfig::from_cli(&cli) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("lclab: {e}");
            return ExitCode::from(EXIT_USAGE);
        }
    };
    configure_threads(cfg.threads);
    match run_command(&cfg) {
        Ok(o) if o.violation => {
            eprintln!("lclab: {} detected a violation", cfg.command.name());
            ExitCode::from(EXIT_VIOLATION)
        }
        Ok(_) => ExitCode::from(EXIT_OK),
        Err(e) => {
            eprintln!("lclab: {e}");
            ExitCode::from(EXIT_USAGE)
        }
    }
}

/// Directory listing of CSV artifacts under `dir`, sorted, relative paths.
pub fn list_csv(dir: &Path) -> Result<Vec<PathBuf>> {
    fn walk(base: &Path, dir: &Path, out: &mut Vec<PathBuf>) -> Result<()> {
        for entry in fs::read_dir(dir)? {
            let path = entry?.path();
            if path.is_dir() {
                walk(base, &path, out)?;
            } else if path.extension().is_some_and(|e| e == "csv") {
                out.push(path.strip_prefix(base).unwrap_or(&path).to_path_buf());
            }
        }
        Ok(())
    }
    let mut out = Vec::new();
    walk(dir, dir, &mut out)?;
    out.sort();
    Ok(out)
}
