//! Cumulative ablation: design filters on each requested stage, score every
//! design against one evaluation stage, and report absolute values and
//! consecutive increments.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::atf::{build_atf_set, AtfOptions, AtfSet, FrBank, FrSource, FrequencyGrid, Stage};
use crate::error::{Error, Result};
use crate::filters::{design_pressure_matching, BandMasks, DesignConfig, FilterBank};
use crate::geometry::Scene;
use crate::metrics::{broadband, evaluate, program_pressures, Metric, MetricCurve, ProgramPressures};

#[derive(Debug, Clone)]
pub struct AblationPlan {
    pub plan_id: String,
    pub scene: Scene,
    pub design_stages: Vec<Stage>,
    pub eval_stage: Stage,
    pub design: DesignConfig,
    /// `ε` as a fraction of the largest per-bin target energy.
    pub epsilon_rel: f64,
    pub grid: FrequencyGrid,
    pub atf: AtfOptions,
    pub frs: FrBank,
}

impl AblationPlan {
    /// All four stages on `scene`, evaluated under C3 with synthetic FRs.
    pub fn new(plan_id: impl Into<String>, scene: Scene) -> Result<Self> {
        let grid = FrequencyGrid::new(scene.sample_rate, FrequencyGrid::default().n_fft)?;
        let frs = FrBank::synthetic(&scene.speakers, &grid);
        Ok(AblationPlan {
            plan_id: plan_id.into(),
            scene,
            design_stages: Stage::ALL.to_vec(),
            eval_stage: Stage::C3,
            design: DesignConfig::default(),
            epsilon_rel: 1e-12,
            grid,
            atf: AtfOptions::default(),
            frs,
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.plan_id.is_empty() || !self.plan_id.chars().all(|c| c.is_ascii_alphanumeric() || "-_.".contains(c)) {
            return Err(Error::InvalidArgument(format!(
                "plan id {:?} must be non-empty ASCII letters, digits, '-', '_' or '.'",
                self.plan_id
            )));
        }
        if self.design_stages.is_empty() {
            return Err(Error::InvalidArgument("no design stages requested".into()));
        }
        if self.design_stages.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidArgument(format!(
                "design stages must be distinct and ordered C0 to C3, got {}",
                stage_list(&self.design_stages)
            )));
        }
        if !(self.epsilon_rel > 0.0 && self.epsilon_rel.is_finite()) {
            return Err(Error::InvalidArgument(format!("epsilon_rel must be positive, got {}", self.epsilon_rel)));
        }
        if self.scene.n_listeners() < 2 {
            return Err(Error::InvalidArgument("the ablation needs at least two listeners".into()));
        }
        self.design.validate(&self.grid)?;
        self.scene.validate()
    }
}

pub fn stage_list(stages: &[Stage]) -> String {
    stages.iter().map(Stage::to_string).collect::<Vec<_>>().join(";")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub stage: Stage,
    /// 1-based.
    pub listener: usize,
    pub metric: Metric,
    pub broadband_db: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveRecord {
    pub stage: Stage,
    pub listener: usize,
    pub metric: Metric,
    pub curve: MetricCurve,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeltaRow {
    pub from: Stage,
    pub to: Stage,
    pub listener: usize,
    pub metric: Metric,
    pub delta_db: f64,
}

impl DeltaRow {
    /// Layers added between the two stages, e.g. `DIR+RS-HRTF`.
    pub fn component(&self) -> String {
        Stage::ALL[self.from.index() + 1..=self.to.index()]
            .iter()
            .map(|s| s.component())
            .collect::<Vec<_>>()
            .join("+")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationReport {
    pub plan_id: String,
    pub eval_stage: Stage,
    pub fr_source: FrSource,
    pub stages: Vec<Stage>,
    pub n_listeners: usize,
    pub rows: Vec<SummaryRow>,
    pub deltas: Vec<DeltaRow>,
    pub curves: Vec<CurveRecord>,
}

impl AblationReport {
    pub fn broadband(&self, stage: Stage, listener: usize, metric: Metric) -> Option<f64> {
        self.rows
            .iter()
            .find(|r| r.stage == stage && r.listener == listener && r.metric == metric)
            .map(|r| r.broadband_db)
    }

    pub fn delta(&self, to: Stage, listener: usize, metric: Metric) -> Option<f64> {
        self.deltas
            .iter()
            .find(|d| d.to == to && d.listener == listener && d.metric == metric)
            .map(|d| d.delta_db)
    }

    pub fn curve(&self, stage: Stage, listener: usize, metric: Metric) -> Option<&MetricCurve> {
        self.curves
            .iter()
            .find(|c| c.stage == stage && c.listener == listener && c.metric == metric)
            .map(|c| &c.curve)
    }
}

/// Intermediate products of one design stage.
#[derive(Debug, Clone)]
pub struct StageOutcome {
    pub stage: Stage,
    pub bank: FilterBank,
    pub pressures: ProgramPressures,
}

pub fn run_ablation(plan: &AblationPlan) -> Result<AblationReport> {
    run_ablation_detailed(plan).map(|(report, _)| report)
}

/// As [`run_ablation`], also returning each stage's filters and pressures.
pub fn run_ablation_detailed(plan: &AblationPlan) -> Result<(AblationReport, Vec<StageOutcome>)> {
    plan.validate()?;
    let eval_scene = plan.scene.with_single_ear_points();
    let design_on_eval_points = plan.scene.listeners.iter().all(|l| l.control_points_per_ear == 1);
    let eval_set = build_atf_set(&eval_scene, plan.eval_stage, &plan.frs, &plan.grid, &plan.atf)
        .map_err(|e| e.context(format!("evaluation set {}", plan.eval_stage)))?;
    let masks = BandMasks::from_speakers(&plan.scene.speakers, &plan.grid, plan.design.crossover_bins);

    let mut outcomes = Vec::with_capacity(plan.design_stages.len());
    for &stage in &plan.design_stages {
        let built;
        let design_set: &AtfSet = if stage == plan.eval_stage && design_on_eval_points {
            &eval_set
        } else {
            built = build_atf_set(&plan.scene, stage, &plan.frs, &plan.grid, &plan.atf)?;
            &built
        };
        let bank = design_pressure_matching(design_set, &masks, &plan.design)
            .map_err(|e| e.context(format!("designing on {stage}")))?;
        let pressures = program_pressures(&bank, &eval_set)?;
        outcomes.push(StageOutcome { stage, bank, pressures });
    }

    let n_listeners = plan.scene.n_listeners();
    let mut rows = Vec::new();
    let mut curves = Vec::new();
    for o in &outcomes {
        let eps = plan.epsilon_rel * max_target_energy(&o.pressures);
        let eps = if eps > 0.0 { eps } else { f64::MIN_POSITIVE };
        let per_listener = evaluate(&o.pressures, Some(eps))?;
        for (k, lm) in per_listener.iter().enumerate() {
            for metric in Metric::ALL {
                let curve = lm.curve(metric).clone();
                rows.push(SummaryRow {
                    stage: o.stage,
                    listener: k + 1,
                    metric,
                    broadband_db: broadband(&curve)?,
                });
                curves.push(CurveRecord {
                    stage: o.stage,
                    listener: k + 1,
                    metric,
                    curve,
                });
            }
        }
    }

    let mut report = AblationReport {
        plan_id: plan.plan_id.clone(),
        eval_stage: plan.eval_stage,
        fr_source: if plan.design_stages.iter().chain([&plan.eval_stage]).any(|s| s.uses_fr()) {
            plan.frs.source
        } else {
            FrSource::Identity
        },
        stages: plan.design_stages.clone(),
        n_listeners,
        rows,
        deltas: Vec::new(),
        curves,
    };
    report.deltas = compute_deltas(&report);
    Ok((report, outcomes))
}

fn max_target_energy(pp: &ProgramPressures) -> f64 {
    (0..pp.n_listeners.min(pp.n_programs))
        .flat_map(|k| (0..pp.grid.n_bins()).map(move |b| pp.target_energy(k, b)))
        .fold(0.0, f64::max)
}

/// Consecutive differences of the absolute rows, per listener and metric.
pub fn compute_deltas(report: &AblationReport) -> Vec<DeltaRow> {
    let mut out = Vec::new();
    for pair in report.stages.windows(2) {
        for k in 1..=report.n_listeners {
            for metric in Metric::ALL {
                if let (Some(a), Some(b)) = (
                    report.broadband(pair[0], k, metric),
                    report.broadband(pair[1], k, metric),
                ) {
                    out.push(DeltaRow {
                        from: pair[0],
                        to: pair[1],
                        listener: k,
                        metric,
                        delta_db: b - a,
                    });
                }
            }
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Json,
}

pub fn summary_path(dir: &Path, plan_id: &str) -> PathBuf {
    dir.join(format!("{plan_id}_summary.csv"))
}

pub fn deltas_path(dir: &Path, plan_id: &str) -> PathBuf {
    dir.join(format!("{plan_id}_deltas.csv"))
}

pub fn json_path(dir: &Path, plan_id: &str) -> PathBuf {
    dir.join(format!("{plan_id}_report.json"))
}

pub fn curve_path(dir: &Path, plan_id: &str, stage: Stage, listener: usize, metric: Metric) -> PathBuf {
    dir.join(format!("{plan_id}_{stage}_listener{listener}_{metric}.csv"))
}

fn write(path: PathBuf, contents: &str, written: &mut Vec<PathBuf>) -> Result<()> {
    std::fs::write(&path, contents).map_err(|e| Error::io(&path, e))?;
    written.push(path);
    Ok(())
}

/// Summary text; the `#` header records the plan so the CSV set is
/// self-describing.
pub fn summary_csv(report: &AblationReport) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "# plan_id={} eval_stage={} fr={} stages={} listeners={} deltas={}",
        report.plan_id,
        report.eval_stage,
        report.fr_source.label(),
        stage_list(&report.stages),
        report.n_listeners,
        if report.deltas.is_empty() { "none" } else { "file" }
    );
    s.push_str("stage,listener,metric,broadband_db\n");
    for r in &report.rows {
        let _ = writeln!(s, "{},listener{},{},{:?}", r.stage, r.listener, r.metric, r.broadband_db);
    }
    s
}

pub fn deltas_csv(report: &AblationReport) -> String {
    let mut s = String::from("step,component,listener,metric,delta_db\n");
    for d in &report.deltas {
        let _ = writeln!(
            s,
            "{}-{},{},listener{},{},{:?}",
            d.to,
            d.from,
            d.component(),
            d.listener,
            d.metric,
            d.delta_db
        );
    }
    s
}

pub fn report_json(report: &AblationReport) -> String {
    let mut s = serde_json::to_string_pretty(report).expect("report serializes");
    s.push('\n');
    s
}

/// Write the report into `dir` and return the paths written.
pub fn emit_report(report: &AblationReport, dir: &Path, format: ReportFormat) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut written = Vec::new();
    let id = &report.plan_id;
    match format {
        ReportFormat::Json => write(json_path(dir, id), &report_json(report), &mut written)?,
        ReportFormat::Csv => {
            write(summary_path(dir, id), &summary_csv(report), &mut written)?;
            if !report.deltas.is_empty() {
                write(deltas_path(dir, id), &deltas_csv(report), &mut written)?;
            }
            for c in &report.curves {
                write(
                    curve_path(dir, id, c.stage, c.listener, c.metric),
                    &c.curve.to_csv(),
                    &mut written,
                )?;
            }
        }
    }
    Ok(written)
}

pub fn read_report_json(path: &Path) -> Result<AblationReport> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::parse(path, e))
}

fn parse_listener(s: &str) -> std::result::Result<usize, String> {
    s.strip_prefix("listener")
        .and_then(|n| n.parse().ok())
        .ok_or_else(|| format!("bad listener label {s:?}"))
}

fn parse_metric(s: &str) -> std::result::Result<Metric, String> {
    Metric::from_label(s).ok_or_else(|| format!("bad metric {s:?}"))
}

fn parse_stage(s: &str) -> std::result::Result<Stage, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

/// Rebuild a report from its CSV files in `dir`.
pub fn read_report_csv(dir: &Path, plan_id: &str) -> Result<AblationReport> {
    let path = summary_path(dir, plan_id);
    let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let err = |line: usize, msg: String| Error::parse(&path, format!("line {line}: {msg}"));

    let mut lines = text.lines();
    let header = lines.next().and_then(|l| l.strip_prefix("# ")).ok_or_else(|| err(1, "missing header".into()))?;
    let fields: BTreeMap<&str, &str> = header.split_whitespace().filter_map(|kv| kv.split_once('=')).collect();
    let field = |k: &str| fields.get(k).copied().ok_or_else(|| err(1, format!("header lacks {k}")));
    let eval_stage = parse_stage(field("eval_stage")?).map_err(|m| err(1, m))?;
    let fr_source = match field("fr")? {
        "measured" => FrSource::Measured,
        "synthetic" => FrSource::Synthetic,
        "identity" => FrSource::Identity,
        other => return Err(err(1, format!("unknown fr source {other:?}"))),
    };
    let stages = field("stages")?
        .split(';')
        .map(parse_stage)
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(|m| err(1, m))?;
    let n_listeners: usize = field("listeners")?.parse().map_err(|_| err(1, "bad listener count".into()))?;
    let has_deltas = field("deltas")? == "file";

    if lines.next() != Some("stage,listener,metric,broadband_db") {
        return Err(err(2, "missing column header".into()));
    }
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        let no = i + 3;
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 4 {
            return Err(err(no, "expected 4 columns".into()));
        }
        rows.push(SummaryRow {
            stage: parse_stage(cols[0]).map_err(|m| err(no, m))?,
            listener: parse_listener(cols[1]).map_err(|m| err(no, m))?,
            metric: parse_metric(cols[2]).map_err(|m| err(no, m))?,
            broadband_db: cols[3].parse().map_err(|e| err(no, format!("{e}")))?,
        });
    }

    let mut deltas = Vec::new();
    if has_deltas {
        let path = deltas_path(dir, plan_id);
        let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let err = |line: usize, msg: String| Error::parse(&path, format!("line {line}: {msg}"));
        for (i, line) in text.lines().enumerate().skip(1) {
            let cols: Vec<&str> = line.split(',').collect();
            if cols.len() != 5 {
                return Err(err(i + 1, "expected 5 columns".into()));
            }
            let (to, from) = cols[0].split_once('-').ok_or_else(|| err(i + 1, "bad step".into()))?;
            deltas.push(DeltaRow {
                from: parse_stage(from).map_err(|m| err(i + 1, m))?,
                to: parse_stage(to).map_err(|m| err(i + 1, m))?,
                listener: parse_listener(cols[2]).map_err(|m| err(i + 1, m))?,
                metric: parse_metric(cols[3]).map_err(|m| err(i + 1, m))?,
                delta_db: cols[4].parse().map_err(|e| err(i + 1, format!("{e}")))?,
            });
        }
    }

    let mut curves = Vec::new();
    for r in &rows {
        let path = curve_path(dir, plan_id, r.stage, r.listener, r.metric);
        let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        curves.push(CurveRecord {
            stage: r.stage,
            listener: r.listener,
            metric: r.metric,
            curve: MetricCurve::from_csv(&text).map_err(|m| Error::parse(&path, m))?,
        });
    }

    Ok(AblationReport {
        plan_id: plan_id.to_string(),
        eval_stage,
        fr_source,
        stages,
        n_listeners,
        rows,
        deltas,
        curves,
    })
}
