//! Command-line front end: `sabc run` executes an experiment and writes its
//! artifacts, `sabc oracle` exposes the reference computations.
//!
//! Run settings are resolved in increasing precedence: built-in defaults,
//! the model preset, the `--config` file, `SABC_*` environment variables,
//! and finally command-line flags.

use std::ffi::OsString;
use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::driver::{run, Algorithm, RunConfig, RunResult, RunTotals};
use crate::ensemble::write_particles_csv;
use crate::error::{Error, Result};
use crate::models::{tb_model, toy1_model, toy2_model, Model, TbData, TbModel};
use crate::oracle::{bisect_quartic, rejection_sample_pi_eps, toy1_posterior_cdf};
use crate::rng::RngStream;

const DEFAULT_TOY2_Y: f64 = 3.0;

#[derive(Debug, Parser)]
#[command(name = "sabc", version, about = "Simulated-annealing ABC sampler")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run a sampler and write particles, diagnostics and a summary.
    Run(Box<RunArgs>),
    /// Reference computations for checking results by hand.
    #[command(subcommand)]
    Oracle(OracleCommand),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Switch {
    On,
    Off,
}

#[derive(Debug, Args)]
struct RunArgs {
    /// toy1, toy2, tb, or file:<path> for the tuberculosis model on a
    /// `cluster_size,count` table.
    #[arg(long, env = "SABC_MODEL")]
    model: Option<String>,
    /// Observation for toy2.
    #[arg(long, env = "SABC_Y")]
    y: Option<f64>,
    /// TOML experiment file.
    #[arg(long, env = "SABC_CONFIG")]
    config: Option<PathBuf>,
    /// Output directory; `sabc-out` unless set here or in the config file.
    #[arg(long, env = "SABC_OUT_DIR")]
    out_dir: Option<PathBuf>,
    #[arg(long, env = "SABC_ALGORITHM")]
    algorithm: Option<Algorithm>,
    #[arg(long, env = "SABC_N")]
    n: Option<usize>,
    #[arg(long, env = "SABC_EPS_INIT")]
    eps_init: Option<f64>,
    #[arg(long, env = "SABC_V")]
    v: Option<f64>,
    #[arg(long, env = "SABC_V_OVER_GAMMA")]
    v_over_gamma: Option<f64>,
    #[arg(long, env = "SABC_BETA")]
    beta: Option<f64>,
    #[arg(long, env = "SABC_S")]
    s: Option<f64>,
    #[arg(long, env = "SABC_A")]
    a: Option<f64>,
    #[arg(long, env = "SABC_DELTA")]
    delta: Option<f64>,
    #[arg(long, env = "SABC_ADAPT_JUMP")]
    adapt_jump: Option<Switch>,
    #[arg(long, env = "SABC_MEAN_FIELD_FRACTION")]
    mean_field_fraction: Option<f64>,
    #[arg(long, env = "SABC_STOP_ACCEPT_RATE")]
    stop_accept_rate: Option<f64>,
    #[arg(long, env = "SABC_MAX_SIMS")]
    max_sims: Option<u64>,
    #[arg(long, env = "SABC_SEED")]
    seed: Option<u64>,
    #[arg(long, env = "SABC_WORKERS")]
    workers: Option<usize>,
    /// Explicit schedule scale `c` in `c * k^(-alpha/n)`.
    #[arg(long, env = "SABC_SCHEDULE_C")]
    schedule_c: Option<f64>,
    #[arg(long, env = "SABC_SCHEDULE_ALPHA")]
    schedule_alpha: Option<f64>,
    #[arg(long, env = "SABC_SCHEDULE_N")]
    schedule_n: Option<usize>,
    /// Sweep cap for the explicit schedule.
    #[arg(long, env = "SABC_MAX_SWEEPS")]
    max_sweeps: Option<u64>,
}

#[derive(Debug, Subcommand)]
enum OracleCommand {
    /// Exact draws from the tempered target, written as a particle CSV.
    PiEps {
        #[arg(long)]
        model: String,
        #[arg(long)]
        eps: f64,
        #[arg(long, default_value_t = 10_000)]
        count: usize,
        #[arg(long)]
        y: Option<f64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output file; standard output when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Control temperature of the flat schedule, by bisection.
    Quartic {
        #[arg(long)]
        u: f64,
        #[arg(long)]
        v_over_gamma: f64,
    },
    /// Exact posterior CDF.
    PosteriorCdf {
        #[arg(long)]
        model: String,
        #[arg(long)]
        theta: f64,
    },
}

/// Model selection as written on the command line or in a config file.
#[derive(Clone, Debug, PartialEq)]
pub enum ModelSpec {
    Toy1,
    Toy2,
    Tb,
    TbFile(PathBuf),
}

impl ModelSpec {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "toy1" => Ok(Self::Toy1),
            "toy2" => Ok(Self::Toy2),
            "tb" => Ok(Self::Tb),
            _ => match s.strip_prefix("file:") {
                Some(p) if !p.is_empty() => Ok(Self::TbFile(PathBuf::from(p))),
                _ => Err(Error::Config(format!(
                    "unknown model {s:?}; expected toy1, toy2, tb or file:<path>"
                ))),
            },
        }
    }

    pub fn label(&self) -> String {
        match self {
            Self::Toy1 => "toy1".into(),
            Self::Toy2 => "toy2".into(),
            Self::Tb => "tb".into(),
            Self::TbFile(p) => format!("file:{}", p.display()),
        }
    }

    /// Builds the model; `y` only applies to toy2.
    pub fn build(&self, y: Option<f64>) -> Result<Box<dyn Model>> {
        if y.is_some() && *self != Self::Toy2 {
            return Err(Error::Config(format!(
                "y is only used by toy2, not {}",
                self.label()
            )));
        }
        Ok(match self {
            Self::Toy1 => Box::new(toy1_model()),
            Self::Toy2 => Box::new(toy2_model(y.unwrap_or(DEFAULT_TOY2_Y))),
            Self::Tb => Box::new(tb_model()),
            Self::TbFile(p) => {
                let data = TbData::from_csv_path(p)
                    .map_err(|e| Error::Config(format!("reading {}: {e}", p.display())))?;
                Box::new(TbModel::with_data(data))
            }
        })
    }

    /// Per-model defaults layered under the config file and flags.
    pub fn preset(&self) -> RunConfig {
        let base = RunConfig::default();
        match self {
            Self::Toy1 => RunConfig {
                max_sims: 40_000,
                ..base
            },
            Self::Toy2 => RunConfig {
                max_sims: 40_000,
                eps_init: 4.0,
                ..base
            },
            Self::Tb | Self::TbFile(_) => RunConfig {
                n: 200,
                max_sims: 2_000,
                ..base
            },
        }
    }
}

/// Experiment file layout. Keys under `[run]` are the fields of
/// [`RunConfig`]; anything unrecognised is rejected.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub y: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<PathBuf>,
    #[serde(default)]
    pub run: toml::Table,
}

impl ExperimentFile {
    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("reading {}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }
}

/// Overlays the keys of `table` on `base`.
pub fn merge_run_table(base: &RunConfig, table: &toml::Table) -> Result<RunConfig> {
    let mut merged =
        toml::Table::try_from(base).map_err(|e| Error::Config(format!("config: {e}")))?;
    for (k, v) in table {
        merged.insert(k.clone(), v.clone());
    }
    toml::Value::Table(merged)
        .try_into()
        .map_err(|e| Error::Config(format!("[run]: {e}")))
}

/// A fully resolved experiment.
#[derive(Clone, Debug)]
pub struct Experiment {
    pub model: ModelSpec,
    pub y: Option<f64>,
    pub out_dir: PathBuf,
    pub config: RunConfig,
}

impl Experiment {
    /// The resolved settings as an experiment file that reproduces this run.
    pub fn to_file(&self) -> Result<ExperimentFile> {
        Ok(ExperimentFile {
            model: Some(self.model.label()),
            y: self.y,
            out_dir: None,
            run: toml::Table::try_from(&self.config)
                .map_err(|e| Error::Config(format!("config: {e}")))?,
        })
    }
}

fn resolve(args: &RunArgs) -> Result<Experiment> {
    let file = match &args.config {
        Some(p) => ExperimentFile::read(p)?,
        None => ExperimentFile::default(),
    };
    let name = args
        .model
        .clone()
        .or(file.model.clone())
        .ok_or_else(|| Error::Config("no model given; use --model".into()))?;
    let model = ModelSpec::parse(&name)?;
    let mut cfg = merge_run_table(&model.preset(), &file.run)?;

    macro_rules! set {
        ($($field:ident),*) => {$(
            if let Some(v) = args.$field {
                cfg.$field = v;
            }
        )*};
    }
    set!(
        algorithm,
        n,
        eps_init,
        v,
        beta,
        s,
        a,
        delta,
        mean_field_fraction,
        stop_accept_rate,
        max_sims,
        seed,
        workers
    );
    if let Some(c) = args.v_over_gamma {
        cfg.v_over_gamma = Some(c);
    }
    if let Some(sw) = args.adapt_jump {
        cfg.adapt_jump = sw == Switch::On;
    }
    if let Some(c) = args.schedule_c {
        cfg.schedule.c = c;
    }
    if let Some(a) = args.schedule_alpha {
        cfg.schedule.alpha = a;
    }
    if let Some(n) = args.schedule_n {
        cfg.schedule.n = n;
    }
    if let Some(m) = args.max_sweeps {
        cfg.max_sweeps = Some(m);
    }
    cfg.validate()?;
    Ok(Experiment {
        model,
        y: args.y.or(file.y),
        out_dir: args
            .out_dir
            .clone()
            .or(file.out_dir)
            .unwrap_or_else(|| PathBuf::from("sabc-out")),
        config: cfg,
    })
}

#[derive(Serialize)]
struct Summary<'a> {
    model: String,
    algorithm: Algorithm,
    seed: u64,
    #[serde(flatten)]
    totals: &'a RunTotals,
    theta_mean: Vec<f64>,
    initial_mean_rho: f64,
    final_mean_rho: f64,
    wall_time_s: f64,
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(dir.join(name))?))
}

/// Writes `particles.csv`, `weighted_particles.csv`, `diagnostics.csv`,
/// `config.toml` and `summary.json` into `exp.out_dir`.
pub fn write_artifacts(exp: &Experiment, res: &RunResult, wall_time_s: f64) -> Result<()> {
    let dir = &exp.out_dir;
    fs::create_dir_all(dir)?;
    write_particles_csv(create(dir, "particles.csv")?, &res.ensemble.particles, None)?;
    write_particles_csv(
        create(dir, "weighted_particles.csv")?,
        &res.weighted.particles,
        Some(&res.weights),
    )?;
    res.trace.write_csv(create(dir, "diagnostics.csv")?)?;
    let toml_text =
        toml::to_string(&exp.to_file()?).map_err(|e| Error::Config(format!("config: {e}")))?;
    fs::write(dir.join("config.toml"), toml_text)?;
    let summary = Summary {
        model: exp.model.label(),
        algorithm: exp.config.algorithm,
        seed: exp.config.seed,
        totals: &res.totals,
        theta_mean: (0..res.ensemble.dim())
            .map(|i| res.ensemble.mean_theta(i))
            .collect(),
        initial_mean_rho: res.initial_mean_rho,
        final_mean_rho: res.ensemble.mean_rho(),
        wall_time_s,
    };
    let mut out = create(dir, "summary.json")?;
    serde_json::to_writer_pretty(&mut out, &summary)?;
    writeln!(out)?;
    out.flush()?;
    Ok(())
}

fn run_command(args: &RunArgs) -> std::result::Result<(), (i32, Error)> {
    let exp = resolve(args).map_err(|e| (2, e))?;
    let model = exp.model.build(exp.y).map_err(|e| (2, e))?;
    let start = Instant::now();
    let res = run(model.as_ref(), &exp.config).map_err(|e| (1, e))?;
    let wall = start.elapsed().as_secs_f64();
    write_artifacts(&exp, &res, wall).map_err(|e| (1, e))?;
    eprintln!(
        "{}: {} sims, ESS {:.1}, stop {:?}, {:.2}s -> {}",
        exp.model.label(),
        res.totals.sims,
        res.totals.ess,
        res.totals.stop,
        wall,
        exp.out_dir.display()
    );
    Ok(())
}

fn oracle_command(cmd: &OracleCommand) -> std::result::Result<(), (i32, Error)> {
    let config = |e: Error| (2, e);
    match cmd {
        OracleCommand::PiEps {
            model,
            eps,
            count,
            y,
            seed,
            out,
        } => {
            let spec = ModelSpec::parse(model).map_err(config)?;
            let m = spec.build(*y).map_err(config)?;
            let mut rng = RngStream::new(*seed, 0);
            let sample = rejection_sample_pi_eps(m.as_ref(), *eps, *count, &mut rng).map_err(
                |e| match e {
                    Error::InvalidArgument(_) => (2, e),
                    e => (1, e),
                },
            )?;
            let sink: Box<dyn Write> = match out {
                Some(p) => Box::new(BufWriter::new(File::create(p).map_err(|e| (1, e.into()))?)),
                None => Box::new(io::stdout().lock()),
            };
            write_particles_csv(sink, &sample.particles, Some(&sample.weights))
                .map_err(|e| (1, e))?;
        }
        OracleCommand::Quartic { u, v_over_gamma } => {
            if !(*u > 0.0 && *u <= 0.5) || !(*v_over_gamma >= 0.0) {
                return Err((
                    2,
                    Error::InvalidArgument(format!(
                        "need 0 < u <= 0.5 and v_over_gamma >= 0, got {u} and {v_over_gamma}"
                    )),
                ));
            }
            println!("{:e}", bisect_quartic(*u, *v_over_gamma));
        }
        OracleCommand::PosteriorCdf { model, theta } => {
            if ModelSpec::parse(model).map_err(config)? != ModelSpec::Toy1 {
                return Err((
                    2,
                    Error::Config(format!("no closed-form posterior CDF for {model}")),
                ));
            }
            println!("{}", toy1_posterior_cdf(*theta));
        }
    }
    Ok(())
}

/// Entry point of the `sabc` binary. Returns the process exit status:
/// 0 on success, 2 for invalid arguments or configuration, 1 when the run
/// itself fails.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let outcome = match &cli.command {
        Command::Run(a) => run_command(a),
        Command::Oracle(o) => oracle_command(o),
    };
    match outcome {
        Ok(()) => 0,
        Err((code, e)) => {
            eprintln!("error: {e}");
            code
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn model_names() {
        assert_eq!(ModelSpec::parse("toy2").unwrap(), ModelSpec::Toy2);
        assert_eq!(
            ModelSpec::parse("file:data/x.csv").unwrap(),
            ModelSpec::TbFile("data/x.csv".into())
        );
        assert!(ModelSpec::parse("file:").is_err());
        assert!(ModelSpec::parse("toy3").is_err());
    }

    #[test]
    fn file_overlays_preset() {
        let table: toml::Table = toml::from_str("n = 50\nv_over_gamma = 2.5").unwrap();
        let cfg = merge_run_table(&ModelSpec::Toy1.preset(), &table).unwrap();
        assert_eq!(
            (cfg.n, cfg.max_sims, cfg.v_over_gamma),
            (50, 40_000, Some(2.5))
        );
    }

    #[test]
    fn unknown_keys_rejected() {
        let table: toml::Table = toml::from_str("nn = 50").unwrap();
        assert!(merge_run_table(&RunConfig::default(), &table).is_err());
        assert!(toml::from_str::<ExperimentFile>("modle = \"toy1\"").is_err());
    }

    #[test]
    fn config_survives_toml() {
        let exp = Experiment {
            model: ModelSpec::Toy2,
            y: Some(2.0),
            out_dir: "x".into(),
            config: ModelSpec::Tb.preset(),
        };
        let text = toml::to_string(&exp.to_file().unwrap()).unwrap();
        let back: ExperimentFile = toml::from_str(&text).unwrap();
        let cfg = merge_run_table(&RunConfig::default(), &back.run).unwrap();
        assert_eq!(cfg, exp.config);
        assert!(cfg.eps_init.is_infinite());
    }
}
