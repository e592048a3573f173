//! Command-line front end.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use floatnorm::cascade::{
    extract, train_forward, train_inverse, ConstraintMap, ExtractionRequest, InverseModel, ModelSet,
};
use floatnorm::experiments::report::{
    convergence_curve_table, convergence_table, derivative_table, hash_file, study_table,
};
use floatnorm::experiments::{
    convergence_study, default_constraint_sets, derivative_report, emit_json, emit_report, held_out_devices,
    multi_range_study, ReportMeta, RunConfig,
};
use floatnorm::neural::{load_model, save_model};
use floatnorm::sampling::{augment_with_ranges, build_dataset, read_dataset, write_dataset, SamplingOptions};
use floatnorm::surrogate::{unscale_curve, IdParams, Surrogate};
use floatnorm::{Error, Scheme, Stage};

use crate::service;
use crate::wire::{self, ErrorBody, SimulateRequest};

/// Environment variable that overrides `serve --models`.
pub const MODELS_ENV: &str = "FLOATNORM_MODELS";

#[derive(Debug, Parser)]
#[command(
    name = "floatnorm",
    version,
    about = "Constrained parameter extraction with floating normalization"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum StageArg {
    Cgg,
    Id,
}

impl From<StageArg> for Stage {
    fn from(s: StageArg) -> Self {
        match s {
            StageArg::Cgg => Stage::Cgg,
            StageArg::Id => Stage::Id,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SchemeArg {
    Fixed,
    Custom,
}

impl From<SchemeArg> for Scheme {
    fn from(s: SchemeArg) -> Self {
        match s {
            SchemeArg::Fixed => Scheme::Fixed,
            SchemeArg::Custom => Scheme::Custom,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum StudyKind {
    Convergence,
    Multirange,
}

#[derive(Debug, Args)]
pub struct SamplingArgs {
    /// Probability of a zero-width range per parameter (custom scheme).
    #[arg(long, default_value_t = floatnorm::sampling::dataset::DEFAULT_P_FIXED)]
    pub p_fixed: f64,
    /// Draw positive parameters log-uniformly.
    #[arg(long)]
    pub log_uniform: bool,
}

impl SamplingArgs {
    fn options(&self) -> SamplingOptions {
        SamplingOptions {
            p_fixed: self.p_fixed,
            log_uniform: self.log_uniform,
            ..Default::default()
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate a random dataset.
    GenData {
        #[arg(long)]
        stage: StageArg,
        #[arg(long)]
        scheme: SchemeArg,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        sampling: SamplingArgs,
    },
    /// Derive custom-range samples from a fixed-range dataset.
    Augment {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        k: usize,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        sampling: SamplingArgs,
    },
    /// Train a forward net on a dataset.
    TrainForward {
        #[arg(long)]
        stage: StageArg,
        #[arg(long)]
        data: PathBuf,
        /// Run configuration; defaults apply when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train an inverse net through a frozen forward net.
    TrainInverse {
        #[arg(long)]
        stage: StageArg,
        #[arg(long)]
        forward: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Extract parameters from one curve.
    Extract {
        #[arg(long)]
        stage: StageArg,
        #[arg(long)]
        inverse: PathBuf,
        /// JSON array of physical values, `simulate` output, or a dataset CSV.
        #[arg(long)]
        curve: PathBuf,
        /// Row to use when `--curve` is a dataset CSV.
        #[arg(long)]
        row: Option<usize>,
        /// JSON object `{name: [min, max]}`; missing names use global ranges.
        #[arg(long)]
        ranges: Option<PathBuf>,
        /// Work function for the id stage. Taken from the curve file when omitted.
        #[arg(long)]
        fixed_phig: Option<f64>,
        /// Output file; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a study and write its reports.
    Study {
        kind: StudyKind,
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Simulate one device on the canonical grid.
    Simulate {
        #[arg(long)]
        stage: StageArg,
        /// JSON object `{name: value}`; for id, PHIG may be included.
        #[arg(long)]
        params: PathBuf,
        #[arg(long)]
        phig: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Serve the HTTP API.
    Serve {
        #[arg(long)]
        models: Option<PathBuf>,
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: std::net::IpAddr,
        /// Directory served at `/`.
        #[arg(long = "static")]
        static_dir: Option<PathBuf>,
    },
}

#[derive(Debug)]
pub enum CliError {
    /// Missing or contradictory flags.
    Usage(String),
    Domain(Error),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Domain(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Domain(e.into())
    }
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Domain(_) => 1,
        }
    }

    pub fn body(&self) -> ErrorBody {
        match self {
            CliError::Usage(m) => ErrorBody::new("usage", m.clone()),
            CliError::Domain(e) => ErrorBody::from(e),
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

/// Parses `args` and runs the command; returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return 0;
        }
        Err(e) => {
            let body = ErrorBody::new("usage", e.to_string().trim_end());
            eprintln!("{}", serde_json::to_string(&body).expect("error body serializes"));
            return 2;
        }
    };
    match execute(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("{}", serde_json::to_string(&e.body()).expect("error body serializes"));
            e.exit_code()
        }
    }
}

fn write_json(out: Option<&Path>, value: &impl Serialize) -> CliResult<()> {
    let text = serde_json::to_string_pretty(value).map_err(Error::from)? + "\n";
    match out {
        Some(p) => fs::write(p, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> CliResult<T> {
    let text = fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| {
        CliError::Domain(Error::Parse {
            path: path.to_path_buf(),
            line: e.line(),
            message: e.to_string(),
        })
    })
}

fn load_config(path: Option<&Path>) -> CliResult<RunConfig> {
    Ok(match path {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    })
}

fn check_stage(expected: Stage, found: Stage, what: &str) -> CliResult<()> {
    if expected != found {
        return Err(CliError::Domain(Error::InvalidInput(format!(
            "{what} is for the {found} stage, --stage says {expected}"
        ))));
    }
    Ok(())
}

/// A curve file and any PHIG it carries.
struct CurveInput {
    curve: Vec<f64>,
    phig: Option<f64>,
}

fn read_curve(path: &Path, stage: Stage, row: Option<usize>) -> CliResult<CurveInput> {
    let is_csv = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv"));
    if is_csv {
        let ds = read_dataset(path)?;
        check_stage(stage, ds.stage(), "dataset")?;
        let row = row.ok_or_else(|| CliError::Usage("--row is required with a dataset CSV".into()))?;
        let sample = ds.samples.get(row).ok_or_else(|| {
            CliError::Domain(Error::InvalidInput(format!(
                "row {row} out of range ({} rows)",
                ds.len()
            )))
        })?;
        let curve = unscale_curve(stage, &sample.curve)?;
        return Ok(CurveInput {
            curve: curve.values,
            phig: sample.phig,
        });
    }
    if row.is_some() {
        return Err(CliError::Usage("--row only applies to dataset CSV curves".into()));
    }
    let value: serde_json::Value = read_json(path)?;
    let malformed = || {
        CliError::Domain(Error::InvalidInput(format!(
            "{}: expected a curve array",
            path.display()
        )))
    };
    let (curve, phig) = match &value {
        serde_json::Value::Array(_) => (value.clone(), None),
        serde_json::Value::Object(m) => {
            if let Some(s) = m.get("stage").and_then(|s| s.as_str()) {
                check_stage(stage, s.parse()?, "curve file")?;
            }
            (
                m.get("curve").cloned().ok_or_else(malformed)?,
                m.get("phig").and_then(|p| p.as_f64()),
            )
        }
        _ => return Err(malformed()),
    };
    let curve: Vec<f64> = serde_json::from_value(curve).map_err(|_| malformed())?;
    Ok(CurveInput { curve, phig })
}

fn execute(cmd: Command) -> CliResult<()> {
    let sim = Surrogate::new();
    match cmd {
        Command::GenData {
            stage,
            scheme,
            n,
            seed,
            out,
            sampling,
        } => {
            let ds = build_dataset(stage.into(), scheme.into(), n, seed, &sim, &sampling.options())?;
            write_dataset(&ds, &out)?;
            log::info!("wrote {} samples to {}", ds.len(), out.display());
        }
        Command::Augment {
            input,
            k,
            seed,
            out,
            sampling,
        } => {
            let ds = read_dataset(&input)?;
            let aug = augment_with_ranges(&ds, k, seed, &sampling.options())?;
            write_dataset(&aug, &out)?;
        }
        Command::TrainForward {
            stage,
            data,
            config,
            out,
        } => {
            let stage = Stage::from(stage);
            let cfg = load_config(config.as_deref())?;
            let ds = read_dataset(&data)?;
            check_stage(stage, ds.stage(), "dataset")?;
            let (mut net, report) = train_forward::<f64>(stage, &ds, cfg.nets.forward(stage))?;
            net.freeze();
            save_model(&net, &out)?;
            write_json(Some(&report_path(&out)), &report)?;
        }
        Command::TrainInverse {
            stage,
            forward,
            data,
            config,
            out,
        } => {
            let stage = Stage::from(stage);
            let cfg = load_config(config.as_deref())?;
            let ds = read_dataset(&data)?;
            check_stage(stage, ds.stage(), "dataset")?;
            let loaded = load_model::<f64>(&forward)?;
            for w in &loaded.warnings {
                log::warn!("{}: {w}", forward.display());
            }
            let mut fwd = loaded.net;
            fwd.freeze();
            let (net, report) = train_inverse(&fwd, &ds, cfg.nets.inverse(stage))?;
            save_model(&net, &out)?;
            write_json(Some(&report_path(&out)), &report)?;
        }
        Command::Extract {
            stage,
            inverse,
            curve,
            row,
            ranges,
            fixed_phig,
            out,
        } => {
            let stage = Stage::from(stage);
            let input = read_curve(&curve, stage, row)?;
            let fixed_phig = match stage {
                Stage::Cgg if fixed_phig.is_some() => {
                    return Err(CliError::Usage("--fixed-phig only applies to the id stage".into()))
                }
                Stage::Cgg => None,
                Stage::Id => Some(fixed_phig.or(input.phig).ok_or_else(|| {
                    CliError::Usage("id extraction needs --fixed-phig (or a curve file carrying phig)".into())
                })?),
            };
            let constraints: ConstraintMap = match ranges {
                Some(p) => read_json(&p)?,
                None => ConstraintMap::new(),
            };
            let loaded = load_model::<f64>(&inverse)?;
            let model = InverseModel::new(loaded.net)?;
            let req = ExtractionRequest {
                stage,
                curve: input.curve,
                constraints,
                fixed_phig,
            };
            let cfg = RunConfig::default();
            let result = extract(&req, &model, &sim, &cfg.saturation)?;
            write_json(out.as_deref(), &result)?;
        }
        Command::Simulate {
            stage,
            params,
            phig,
            out,
        } => {
            let stage = Stage::from(stage);
            let params: BTreeMap<String, f64> = read_json(&params)?;
            let req = SimulateRequest {
                stage: stage.to_string(),
                params,
                phig,
            };
            let resp = wire::simulate(&sim, stage, &req)?;
            write_json(out.as_deref(), &resp)?;
        }
        Command::Study { kind, config, out } => {
            let cfg = RunConfig::load(&config)?;
            match kind {
                StudyKind::Convergence => convergence(&cfg, &out, &sim)?,
                StudyKind::Multirange => multirange(&cfg, &config, &out, &sim)?,
            }
        }
        Command::Serve {
            models,
            port,
            host,
            static_dir,
        } => {
            let models = std::env::var_os(MODELS_ENV).map(PathBuf::from).or(models);
            let set = match &models {
                Some(dir) => ModelSet::load_dir(dir)?,
                None => ModelSet::default(),
            };
            for w in &set.warnings {
                log::warn!("{w}");
            }
            let app = service::router(service::AppState::new(set), static_dir.as_deref());
            let addr = SocketAddr::new(host, port);
            let rt = tokio::runtime::Runtime::new()?;
            rt.block_on(async move {
                let listener = tokio::net::TcpListener::bind(addr).await?;
                log::info!("listening on {}", listener.local_addr()?);
                axum::serve(listener, app).await
            })?;
        }
    }
    Ok(())
}

/// `model.json` -> `model.report.json`.
pub fn report_path(model: &Path) -> PathBuf {
    model.with_extension("report.json")
}

fn convergence(cfg: &RunConfig, out: &Path, sim: &Surrogate) -> CliResult<()> {
    for &stage in &cfg.convergence.stages {
        let study = cfg.convergence.for_stage(stage, cfg.sampling);
        let summary = convergence_study(&study, sim)?;
        let mut meta = ReportMeta::new("convergence", study.seeds.clone(), &study)?;
        meta.extra.insert("stage".into(), stage.as_str().into());
        meta.extra.insert("target_mse".into(), summary.target_mse.into());
        meta.extra.insert("ratio".into(), summary.ratio.into());
        emit_report(
            out,
            &format!("convergence_{stage}"),
            &convergence_table(&summary.rows),
            &meta,
        )?;
        emit_report(
            out,
            &format!("convergence_{stage}_curve"),
            &convergence_curve_table(&summary),
            &meta,
        )?;
        emit_json(out, &format!("convergence_{stage}_summary.json"), &summary)?;
    }
    Ok(())
}

/// Gate biases of the output-conductance overlays.
const GD_VG: [f64; 2] = [0.4, 0.7];

fn multirange(cfg: &RunConfig, config_path: &Path, out: &Path, sim: &Surrogate) -> CliResult<()> {
    let dir = cfg
        .models
        .as_ref()
        .map(|m| config_path.parent().unwrap_or(Path::new(".")).join(m))
        .ok_or_else(|| CliError::Usage("multirange study needs \"models\" in the config".into()))?;
    let set = ModelSet::load_dir(&dir)?;
    let (cgg, id) = match (&set.cgg, &set.id) {
        (Some(c), Some(i)) => (c, i),
        _ => {
            return Err(CliError::Domain(Error::InvalidInput(format!(
                "{} must hold both inverse models",
                dir.display()
            ))))
        }
    };
    let m = &cfg.multirange;
    let device = held_out_devices(1, m.device_seed, Some(m.device_phig), sim)?.remove(0);
    let sets = default_constraint_sets(&device, m.n_feasible, m.constraint_seed, m.infeasible_phig)?;
    let rows = multi_range_study(&device, &sets, (cgg, id), sim, &cfg.saturation)?;

    let mut meta = ReportMeta::new("multirange", vec![m.device_seed, m.constraint_seed], &(m, &sets))?;
    for stage in Stage::ALL {
        let p = floatnorm::cascade::models::inverse_path(&dir, stage);
        let name = p
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_default();
        meta.model_hashes.insert(name, hash_file(&p)?);
    }
    emit_report(out, "multirange", &study_table(&rows), &meta)?;

    let target = IdParams::from_slice(&device.id_params, device.phig())?;
    let global = &rows[0];
    let fit = IdParams::from_slice(&global.id_params, global.cgg_params[0])?;
    let sweeps = derivative_report(&target, &fit, &GD_VG)?;
    let mut dmeta = meta.clone();
    dmeta.study = "derivatives".into();
    dmeta.extra.insert("label".into(), global.label.clone().into());
    emit_report(out, "derivatives", &derivative_table(&sweeps), &dmeta)?;
    emit_json(out, "device.json", &device)?;
    Ok(())
}
