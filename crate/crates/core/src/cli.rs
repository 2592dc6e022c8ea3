//! `psz` command line: `simulate-atf`, `design` and `ablate`.
//!
//! Flags override the values from `--config`.

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::ablation::{emit_report, read_report_json, run_ablation, ReportFormat};
use crate::archive::{read_atf, write_atf};
use crate::atf::{build_atf_set, scene_digest, Stage};
use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::filters::{design_pressure_matching, BandMasks, FilterBank};

pub const LOCK_NAME: &str = ".psz.lock";

#[derive(Debug, Parser)]
#[command(name = "psz", version, about = "Personal sound zone ATF synthesis, filter design and ablation")]
pub struct Cli {
    /// Run configuration (TOML). Defaults apply when omitted.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub overrides: Overrides,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Default, Args)]
pub struct Overrides {
    /// Comma-separated stages, e.g. `C0,C1`.
    #[arg(long, global = true, value_delimiter = ',')]
    pub stages: Option<Vec<Stage>>,
    #[arg(long, global = true)]
    pub eval_stage: Option<Stage>,
    #[arg(long, global = true)]
    pub lambda: Option<f64>,
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true)]
    pub fr_dir: Option<PathBuf>,
    /// Use synthetic loudspeaker responses when no FR directory is given.
    #[arg(long, global = true, num_args = 0..=1, default_missing_value = "true")]
    pub synthetic_fr: Option<bool>,
    #[arg(long, global = true)]
    pub nfft: Option<usize>,
    #[arg(long, global = true)]
    pub fs: Option<f64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write one ATF archive per requested stage.
    SimulateAtf,
    /// Design a filter bank from an ATF archive.
    Design {
        #[arg(long)]
        atf: PathBuf,
    },
    /// Run the cumulative ablation and write CSV and JSON reports.
    Ablate,
}

impl Overrides {
    pub fn apply(&self, cfg: &mut RunConfig) {
        if let Some(s) = &self.stages {
            cfg.ablation.stages = s.clone();
        }
        if let Some(s) = self.eval_stage {
            cfg.ablation.eval_stage = s;
        }
        if let Some(l) = self.lambda {
            cfg.filters.lambda = l;
        }
        if let Some(o) = &self.out {
            cfg.out = o.clone();
        }
        if let Some(d) = &self.fr_dir {
            cfg.fr_dir = Some(d.clone());
        }
        if let Some(s) = self.synthetic_fr {
            cfg.atf.synthetic_fr = s;
        }
        if let Some(n) = self.nfft {
            cfg.atf.n_fft = n;
        }
        if let Some(fs) = self.fs {
            cfg.atf.fs = Some(fs);
        }
    }
}

/// Exclusive claim on an output directory, released on drop.
#[derive(Debug)]
pub struct OutputLock {
    path: PathBuf,
}

impl OutputLock {
    pub fn acquire(dir: &Path) -> Result<Self> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let path = dir.join(LOCK_NAME);
        match std::fs::OpenOptions::new().write(true).create_new(true).open(&path) {
            Ok(_) => Ok(OutputLock { path }),
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => Err(Error::io(
                &path,
                std::io::Error::new(e.kind(), "another psz run holds this output directory"),
            )),
            Err(e) => Err(Error::io(&path, e)),
        }
    }
}

impl Drop for OutputLock {
    fn drop(&mut self) {
        let _ = std::fs::remove_file(&self.path);
    }
}

pub fn resolve_config(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    cli.overrides.apply(&mut cfg);
    cfg.validate()?;
    Ok(cfg)
}

/// Run a parsed command and return the files it wrote.
pub fn execute(cli: &Cli) -> Result<Vec<PathBuf>> {
    let cfg = resolve_config(cli)?;
    let _lock = OutputLock::acquire(&cfg.out)?;
    match &cli.command {
        Command::SimulateAtf => simulate_atf(&cfg),
        Command::Design { atf } => design(&cfg, atf),
        Command::Ablate => ablate(&cfg),
    }
}

pub fn atf_path(cfg: &RunConfig, stage: Stage) -> PathBuf {
    cfg.out.join(format!("{}_{stage}.atf", cfg.ablation.plan_id))
}

pub fn simulate_atf(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    let scene = cfg.load_scene()?;
    let grid = cfg.grid(&scene)?;
    let frs = cfg.fr_bank(&scene, &grid)?;
    let mut written = Vec::new();
    for &stage in &cfg.ablation.stages {
        let set = build_atf_set(&scene, stage, &frs, &grid, &cfg.atf_options())?;
        let path = atf_path(cfg, stage);
        write_atf(&set, &path)?;
        if read_atf(&path)? != set {
            return Err(Error::Archive {
                path,
                reason: "read-back differs from the written set".into(),
            });
        }
        written.push(path);
    }
    Ok(written)
}

pub fn design(cfg: &RunConfig, atf: &Path) -> Result<Vec<PathBuf>> {
    let set = read_atf(atf)?;
    let scene = cfg.load_scene()?;
    if !set.scene_digest.is_empty() && set.scene_digest != scene_digest(&scene) {
        return Err(Error::Archive {
            path: atf.to_path_buf(),
            reason: "built from a different scene than the configured one".into(),
        });
    }
    if set.n_speakers != scene.n_speakers() {
        return Err(Error::Dimension(format!(
            "archive has {} speakers, scene has {}",
            set.n_speakers,
            scene.n_speakers()
        )));
    }
    let masks = BandMasks::from_speakers(&scene.speakers, &set.grid, cfg.filters.crossover_bins);
    let bank = design_pressure_matching(&set, &masks, &cfg.design())?;
    let stem = atf.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "design".into());
    let path = cfg.out.join(format!("{stem}.filters"));
    bank.write(&path)?;
    if FilterBank::read(&path)? != bank {
        return Err(Error::parse(&path, "read-back differs from the written filter bank"));
    }
    Ok(vec![path])
}

pub fn ablate(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    let plan = cfg.plan()?;
    let report = run_ablation(&plan)?;
    let mut written = emit_report(&report, &cfg.out, ReportFormat::Csv)?;
    written.extend(emit_report(&report, &cfg.out, ReportFormat::Json)?);
    let json = written.last().expect("json path").clone();
    if read_report_json(&json)? != report {
        return Err(Error::parse(&json, "read-back differs from the report"));
    }
    Ok(written)
}

fn report_error(e: &Error) {
    eprintln!("error: {e}");
}

/// Parse `args` (including the program name), run, and map the outcome
/// to an exit status.
pub fn run_with_args<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    match execute(&cli) {
        Ok(paths) => {
            for p in paths {
                println!("{}", p.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            report_error(&e);
            ExitCode::FAILURE
        }
    }
}

pub fn main() -> ExitCode {
    run_with_args(std::env::args_os())
}
