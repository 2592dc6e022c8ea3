//! Run configuration: one TOML file with a section per pipeline stage.
//! Unknown keys are rejected.
//!
//! ```toml
//! scene = "builtin:testbed"   # or a scene TOML path, relative to this file
//! fr_dir = "fr"               # optional measured responses
//! out = "out"
//!
//! [atf]
//! n_fft = 16384
//! synthetic_fr = true
//!
//! [filters]
//! lambda = 1e-3
//!
//! [metrics]
//! epsilon_rel = 1e-12
//!
//! [ablation]
//! plan_id = "testbed"
//! stages = ["C0", "C1", "C2", "C3"]
//! eval_stage = "C3"
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::ablation::AblationPlan;
use crate::atf::{AtfOptions, FrBank, FrequencyGrid, Stage};
use crate::error::{Error, Result};
use crate::filters::{DesignConfig, LambdaMode};
use crate::geometry::Scene;
use crate::specfun::SeriesControl;

pub const BUILTIN_TESTBED: &str = "builtin:testbed";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "builtin")]
    pub scene: String,
    #[serde(default)]
    pub fr_dir: Option<PathBuf>,
    #[serde(default = "default_out")]
    pub out: PathBuf,
    #[serde(default)]
    pub atf: AtfSection,
    #[serde(default)]
    pub filters: FiltersSection,
    #[serde(default)]
    pub metrics: MetricsSection,
    #[serde(default)]
    pub ablation: AblationSection,
}

fn builtin() -> String {
    BUILTIN_TESTBED.into()
}

fn default_out() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AtfSection {
    pub n_fft: usize,
    /// Overrides the scene's sample rate when set.
    pub fs: Option<f64>,
    pub max_order: usize,
    pub term_tol: f64,
    pub synthetic_fr: bool,
    pub directivity: bool,
    pub head_scattering: bool,
}

impl Default for AtfSection {
    fn default() -> Self {
        let series = SeriesControl::default();
        AtfSection {
            n_fft: FrequencyGrid::default().n_fft,
            fs: None,
            max_order: series.max_order,
            term_tol: series.term_tol,
            synthetic_fr: true,
            directivity: true,
            head_scattering: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FiltersSection {
    pub lambda: f64,
    pub lambda_mode: LambdaMode,
    pub filter_length: usize,
    /// Defaults to half the filter length.
    pub modeling_delay: Option<usize>,
    pub crossover_bins: f64,
}

impl Default for FiltersSection {
    fn default() -> Self {
        let d = DesignConfig::default();
        FiltersSection {
            lambda: d.lambda,
            lambda_mode: d.lambda_mode,
            filter_length: d.filter_length,
            modeling_delay: None,
            crossover_bins: d.crossover_bins,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MetricsSection {
    pub epsilon_rel: f64,
}

impl Default for MetricsSection {
    fn default() -> Self {
        MetricsSection { epsilon_rel: 1e-12 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AblationSection {
    pub plan_id: String,
    pub stages: Vec<Stage>,
    pub eval_stage: Stage,
}

impl Default for AblationSection {
    fn default() -> Self {
        AblationSection {
            plan_id: "psz".into(),
            stages: Stage::ALL.to_vec(),
            eval_stage: Stage::C3,
        }
    }
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            scene: builtin(),
            fr_dir: None,
            out: default_out(),
            atf: AtfSection::default(),
            filters: FiltersSection::default(),
            metrics: MetricsSection::default(),
            ablation: AblationSection::default(),
        }
    }
}

impl RunConfig {
    pub fn parse(text: &str, origin: &Path) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::parse(origin, e))
    }

    /// Parse `path` and resolve relative paths against its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::parse(&text, path)?;
        let base = path.parent().unwrap_or(Path::new(""));
        if cfg.scene != BUILTIN_TESTBED && Path::new(&cfg.scene).is_relative() {
            cfg.scene = base.join(&cfg.scene).to_string_lossy().into_owned();
        }
        if let Some(dir) = &cfg.fr_dir {
            if dir.is_relative() {
                cfg.fr_dir = Some(base.join(dir));
            }
        }
        if cfg.out.is_relative() {
            cfg.out = base.join(&cfg.out);
        }
        Ok(cfg)
    }

    /// Referenced paths exist and values satisfy each module's invariants.
    pub fn validate(&self) -> Result<()> {
        if self.scene != BUILTIN_TESTBED && !Path::new(&self.scene).is_file() {
            return Err(Error::io(
                &self.scene,
                std::io::Error::new(std::io::ErrorKind::NotFound, "scene file not found"),
            ));
        }
        if let Some(dir) = &self.fr_dir {
            if !dir.is_dir() {
                return Err(Error::io(
                    dir,
                    std::io::Error::new(std::io::ErrorKind::NotFound, "FR directory not found"),
                ));
            }
        }
        let grid = FrequencyGrid::new(self.atf.fs.unwrap_or(48_000.0), self.atf.n_fft)
            .map_err(|e| e.context("[atf]"))?;
        self.series().validate().map_err(|e| e.context("[atf]"))?;
        self.design().validate(&grid).map_err(|e| e.context("[filters]"))?;
        if !(self.metrics.epsilon_rel > 0.0) {
            return Err(Error::InvalidArgument("epsilon_rel must be positive".into()).context("[metrics]"));
        }
        if self.ablation.stages.is_empty() {
            return Err(Error::InvalidArgument("stages must not be empty".into()).context("[ablation]"));
        }
        Ok(())
    }

    pub fn series(&self) -> SeriesControl {
        SeriesControl {
            max_order: self.atf.max_order,
            term_tol: self.atf.term_tol,
        }
    }

    pub fn atf_options(&self) -> AtfOptions {
        AtfOptions {
            series: self.series(),
            directivity: self.atf.directivity,
            head_scattering: self.atf.head_scattering,
        }
    }

    pub fn design(&self) -> DesignConfig {
        DesignConfig {
            lambda: self.filters.lambda,
            lambda_mode: self.filters.lambda_mode,
            filter_length: self.filters.filter_length,
            modeling_delay: self.filters.modeling_delay.unwrap_or(self.filters.filter_length / 2),
            crossover_bins: self.filters.crossover_bins,
        }
    }

    /// The scene, with its sample rate replaced by `[atf] fs` when given.
    pub fn load_scene(&self) -> Result<Scene> {
        let mut scene = if self.scene == BUILTIN_TESTBED {
            Scene::testbed()
        } else {
            read_scene(Path::new(&self.scene))?
        };
        if let Some(fs) = self.atf.fs {
            scene.sample_rate = fs;
        }
        scene.validate()?;
        Ok(scene)
    }

    pub fn grid(&self, scene: &Scene) -> Result<FrequencyGrid> {
        FrequencyGrid::new(scene.sample_rate, self.atf.n_fft)
    }

    /// Measured responses from `fr_dir`, else synthetic ones when allowed,
    /// else an empty bank.
    pub fn fr_bank(&self, scene: &Scene, grid: &FrequencyGrid) -> Result<FrBank> {
        match &self.fr_dir {
            Some(dir) => FrBank::load_dir(dir, &scene.speakers, grid),
            None if self.atf.synthetic_fr => Ok(FrBank::synthetic(&scene.speakers, grid)),
            None => Ok(FrBank::default()),
        }
    }

    pub fn plan(&self) -> Result<AblationPlan> {
        let scene = self.load_scene()?;
        let grid = self.grid(&scene)?;
        let frs = self.fr_bank(&scene, &grid)?;
        Ok(AblationPlan {
            plan_id: self.ablation.plan_id.clone(),
            scene,
            design_stages: self.ablation.stages.clone(),
            eval_stage: self.ablation.eval_stage,
            design: self.design(),
            epsilon_rel: self.metrics.epsilon_rel,
            grid,
            atf: self.atf_options(),
            frs,
        })
    }
}

pub fn read_scene(path: &Path) -> Result<Scene> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let scene: Scene = toml::from_str(&text).map_err(|e| Error::parse(path, e))?;
    scene.validate().map_err(|e| e.context(path.display().to_string()))?;
    Ok(scene)
}

pub fn write_scene(scene: &Scene, path: &Path) -> Result<()> {
    let text = toml::to_string(scene).map_err(|e| Error::parse(path, e))?;
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        let cfg = RunConfig::parse("", Path::new("x.toml")).unwrap();
        assert_eq!(cfg, RunConfig::default());
        assert_eq!(cfg.design(), DesignConfig::default());
        cfg.validate().unwrap();
    }

    #[test]
    fn unknown_keys_fail_with_location() {
        let err = RunConfig::parse("[filters]\nlamda = 0.1\n", Path::new("run.toml")).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("run.toml") && msg.contains("lamda") && msg.contains("line 2"), "{msg}");
    }

    #[test]
    fn sections_parse() {
        let text = r#"
            out = "results"
            [atf]
            n_fft = 4096
            synthetic_fr = false
            [filters]
            lambda = 0.01
            lambda_mode = "absolute"
            filter_length = 2048
            [ablation]
            plan_id = "t"
            stages = ["C0", "C2"]
            eval_stage = "C2"
        "#;
        let cfg = RunConfig::parse(text, Path::new("x")).unwrap();
        assert_eq!(cfg.atf.n_fft, 4096);
        assert_eq!(cfg.design().modeling_delay, 1024);
        assert_eq!(cfg.design().lambda_mode, LambdaMode::Absolute);
        assert_eq!(cfg.ablation.stages, vec![Stage::C0, Stage::C2]);
        assert!(!cfg.atf.synthetic_fr);
    }

    #[test]
    fn missing_scene_names_path() {
        let cfg = RunConfig {
            scene: "/nonexistent/scene.toml".into(),
            ..RunConfig::default()
        };
        assert!(cfg.validate().unwrap_err().to_string().contains("/nonexistent/scene.toml"));
    }

    #[test]
    fn scene_toml_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("scene.toml");
        write_scene(&Scene::testbed(), &path).unwrap();
        assert_eq!(read_scene(&path).unwrap(), Scene::testbed());
    }
}
