//! File formats: panel JSON, run configuration, fit reports and CSV tables.
//!
//! Panels are written canonically: keys sorted, two-space indentation, every
//! real as `{:.16e}` (17 significant digits), so parse/serialize round-trips
//! exactly and reruns are byte-identical.

use std::collections::{BTreeMap, BTreeSet};
use std::io;

use serde::{Deserialize, Serialize};
use serde_json::ser::{Formatter, PrettyFormatter};
use serde_json::{json, Value};

use crate::error::{Result, SteppError};
use crate::inference::{p_value, Alternative, FitResult, GofRow, ParamStatus, RescaledReport, StdError};
use crate::model::{parameter_names, CovariateLevel, ForceMode, MigrationParams, ModelConfig, Panel, ParamVector, WaveState};
use crate::simulation::{Intervention, ScenarioReport, Selector};

/// JSON formatter: pretty layout, fixed 17-significant-digit reals.
struct CanonicalFormatter<'a> {
    pretty: PrettyFormatter<'a>,
}

impl Formatter for CanonicalFormatter<'_> {
    fn write_f64<W: ?Sized + io::Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        write!(writer, "{value:.16e}")
    }
    fn write_f32<W: ?Sized + io::Write>(&mut self, writer: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(writer, value as f64)
    }
    fn begin_array<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.pretty.begin_array(w)
    }
    fn end_array<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.pretty.end_array(w)
    }
    fn begin_array_value<W: ?Sized + io::Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.pretty.begin_array_value(w, first)
    }
    fn end_array_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.pretty.end_array_value(w)
    }
    fn begin_object<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.pretty.begin_object(w)
    }
    fn end_object<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.pretty.end_object(w)
    }
    fn begin_object_key<W: ?Sized + io::Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.pretty.begin_object_key(w, first)
    }
    fn begin_object_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.pretty.begin_object_value(w)
    }
    fn end_object_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.pretty.end_object_value(w)
    }
}

/// Canonical JSON text of any serializable value, newline-terminated.
pub fn to_canonical_json<S: Serialize>(value: &S) -> Result<String> {
    // Going through `Value` sorts object keys.
    let value = serde_json::to_value(value).map_err(|e| SteppError::InvalidPanel(e.to_string()))?;
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, CanonicalFormatter { pretty: PrettyFormatter::new() });
    value.serialize(&mut ser).map_err(|e| SteppError::InvalidPanel(e.to_string()))?;
    buf.push(b'\n');
    Ok(String::from_utf8(buf).expect("serde_json writes UTF-8"))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ActorRecord {
    pub id: String,
    pub z: Vec<f64>,
    pub x: Vec<CovariateLevel>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WaveRecord {
    pub t: u64,
    pub actors: Vec<ActorRecord>,
}

/// On-disk panel.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PanelFile {
    pub d: usize,
    pub q: usize,
    pub supports: Vec<Vec<CovariateLevel>>,
    pub waves: Vec<WaveRecord>,
}

impl PanelFile {
    pub fn from_panel(panel: &Panel<f64>) -> Self {
        let cfg = &panel.config;
        let waves = panel
            .waves
            .iter()
            .map(|w| WaveRecord {
                t: w.t,
                actors: w
                    .actors
                    .iter()
                    .map(|id| ActorRecord {
                        id: id.clone(),
                        z: w.positions.get(id).cloned().unwrap_or_default(),
                        x: w.covariates
                            .get(id)
                            .map(|x| x.iter().enumerate().map(|(m, &v)| cfg.supports[m][v].clone()).collect())
                            .unwrap_or_default(),
                    })
                    .collect(),
            })
            .collect();
        Self { d: cfg.d, q: cfg.q(), supports: cfg.supports.clone(), waves }
    }

    pub fn parse(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| SteppError::InvalidConfig(format!("panel file: {e}")))
    }

    /// Builds a validated panel. `settings` supplies `k`, `c` and the force
    /// modes; its `d` and `supports`, if set, must agree with the file.
    pub fn into_panel(self, settings: &ModelSection) -> Result<Panel<f64>> {
        if self.supports.len() != self.q {
            return Err(SteppError::InvalidPanel(format!(
                "q = {} but {} supports are declared",
                self.q,
                self.supports.len()
            )));
        }
        let cfg = settings.build(Some((self.d, &self.supports)))?;
        let mut waves = Vec::with_capacity(self.waves.len());
        for (w, record) in self.waves.into_iter().enumerate() {
            let mut wave = WaveState::new(record.t);
            for a in record.actors {
                if wave.actors.contains(&a.id) {
                    return Err(SteppError::InvalidPanel(format!("wave {w}: duplicate actor `{}`", a.id)));
                }
                if a.x.len() != cfg.q() {
                    return Err(SteppError::InvalidPanel(format!(
                        "wave {w}, actor `{}`: expected {} covariates, found {}",
                        a.id,
                        cfg.q(),
                        a.x.len()
                    )));
                }
                let x = a
                    .x
                    .iter()
                    .enumerate()
                    .map(|(m, level)| {
                        cfg.level_index(m, level).ok_or_else(|| {
                            SteppError::InvalidPanel(format!(
                                "wave {w}, actor `{}`: value {level} not in the support of covariate {m}",
                                a.id
                            ))
                        })
                    })
                    .collect::<Result<Vec<usize>>>()?;
                wave.insert(a.id, a.z, x);
            }
            waves.push(wave);
        }
        Panel::validated(cfg, waves)
    }

    pub fn to_json(&self) -> Result<String> {
        to_canonical_json(self)
    }
}

pub fn read_panel(text: &str, settings: &ModelSection) -> Result<Panel<f64>> {
    PanelFile::parse(text)?.into_panel(settings)
}

pub fn write_panel(panel: &Panel<f64>) -> Result<String> {
    PanelFile::from_panel(panel).to_json()
}

/// Model settings. Everything is optional so a panel file can supply the
/// shape; `q` alone declares binary covariates with levels `0` and `1`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub d: Option<usize>,
    pub q: Option<usize>,
    pub supports: Option<Vec<Vec<CovariateLevel>>>,
    pub k: Option<usize>,
    pub c: Option<f64>,
    pub homophily: Option<Vec<ForceMode>>,
    pub heterophily: Option<Vec<ForceMode>>,
}

impl ModelSection {
    /// Resolves a full config, checking against a panel's `(d, supports)`
    /// when one is given.
    pub fn build(&self, shape: Option<(usize, &Vec<Vec<CovariateLevel>>)>) -> Result<ModelConfig<f64>> {
        let bad = |msg: String| Err(SteppError::InvalidConfig(msg));
        let d = match (self.d, shape) {
            (Some(d), Some((pd, _))) if d != pd => return bad(format!("model.d = {d} but the panel has d = {pd}")),
            (Some(d), _) => d,
            (None, Some((pd, _))) => pd,
            (None, None) => return bad("model.d: required".into()),
        };
        let declared = match (&self.supports, self.q) {
            (Some(s), Some(q)) if s.len() != q => {
                return bad(format!("model.q = {q} but model.supports has {} entries", s.len()))
            }
            (Some(s), _) => Some(s.clone()),
            (None, Some(q)) => Some(vec![vec![CovariateLevel::Int(0), CovariateLevel::Int(1)]; q]),
            (None, None) => None,
        };
        let supports = match (declared, shape) {
            (Some(s), Some((_, ps))) if &s != ps => {
                return bad("model.supports: does not match the panel's supports".into())
            }
            (Some(s), _) => s,
            (None, Some((_, ps))) => ps.clone(),
            (None, None) => return bad("model.supports: required (or model.q for binary covariates)".into()),
        };
        let q = supports.len();
        let mut cfg = ModelConfig::new(d, supports);
        if let Some(k) = self.k {
            cfg.k = k;
        }
        if let Some(c) = self.c {
            cfg.c = c;
        }
        if let Some(h) = &self.homophily {
            if h.len() != q {
                return bad(format!("model.homophily: need {q} modes, found {}", h.len()));
            }
            cfg.homophily = h.clone();
        }
        if let Some(h) = &self.heterophily {
            if h.len() != q {
                return bad(format!("model.heterophily: need {q} modes, found {}", h.len()));
            }
            cfg.heterophily = h.clone();
        }
        cfg.validate().map_err(|e| SteppError::InvalidConfig(format!("model: {e}")))?;
        Ok(cfg)
    }
}

/// Non-migration parameters. Omitted force coefficients are zero.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThetaSection {
    pub delta0: f64,
    #[serde(default)]
    pub delta1: f64,
    pub rho: Vec<f64>,
    #[serde(default)]
    pub homophily: Option<Vec<f64>>,
    #[serde(default)]
    pub heterophily: Option<Vec<f64>>,
}

impl ThetaSection {
    pub fn from_theta(theta: &ParamVector<f64>) -> Self {
        Self {
            delta0: theta.delta0,
            delta1: theta.delta1,
            rho: theta.rho.clone(),
            homophily: Some(theta.homo.clone()),
            heterophily: Some(theta.hetero.clone()),
        }
    }

    pub fn build(&self, cfg: &ModelConfig<f64>, migration: MigrationParams<f64>, field: &str) -> Result<ParamVector<f64>> {
        let q = cfg.q();
        let theta = ParamVector {
            delta0: self.delta0,
            delta1: self.delta1,
            rho: self.rho.clone(),
            homo: self.homophily.clone().unwrap_or_else(|| vec![0.0; q]),
            hetero: self.heterophily.clone().unwrap_or_else(|| vec![0.0; q]),
            migration,
        };
        theta.validate(cfg).map_err(|e| SteppError::InvalidConfig(format!("{field}: {e}")))?;
        Ok(theta)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MigrationSection {
    #[serde(default)]
    pub emigration_prob: f64,
    #[serde(default)]
    pub immigration_rate: f64,
    #[serde(default)]
    pub immigrant_position_spread: Option<f64>,
    #[serde(default)]
    pub immigrant_covariate_probs: Option<Vec<Vec<f64>>>,
}

impl MigrationSection {
    pub fn build(&self, cfg: &ModelConfig<f64>) -> Result<MigrationParams<f64>> {
        let mut m = MigrationParams::closed(cfg);
        m.emigration_prob = self.emigration_prob;
        m.immigration_rate = self.immigration_rate;
        if let Some(s) = self.immigrant_position_spread {
            m.immigrant_position_spread = s;
        }
        if let Some(p) = &self.immigrant_covariate_probs {
            m.immigrant_covariate_probs = p.clone();
        }
        m.validate(cfg).map_err(|e| SteppError::InvalidConfig(format!("migration: {e}")))?;
        Ok(m)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RandomInitial {
    pub actors: usize,
    #[serde(default = "one")]
    pub spread: f64,
    /// Per-covariate pmf over the support; uniform when omitted.
    #[serde(default)]
    pub covariate_probs: Option<Vec<Vec<f64>>>,
}

fn one() -> f64 {
    1.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PanelInitial {
    /// Panel file, relative to the config file.
    pub path: String,
    /// Wave to start from; the last one when omitted.
    #[serde(default)]
    pub wave: Option<usize>,
}

/// Starting wave of a simulation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialSection {
    Random(RandomInitial),
    Panel(PanelInitial),
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitSection {
    pub starts: Option<usize>,
    pub seed: Option<u64>,
    pub max_iterations: Option<usize>,
    #[serde(default)]
    pub fit_migration: bool,
    /// Parameters held at given values, by name (`delta1`, `alpha1`, ...).
    #[serde(default)]
    pub fixed: BTreeMap<String, f64>,
    /// Test force coefficients one-sided (`H1: theta > null`).
    #[serde(default)]
    pub one_sided: bool,
    /// Starting values tried before the built-in starts.
    #[serde(default)]
    pub init: Option<ThetaSection>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SelectorSection {
    All,
    Ids { ids: Vec<String> },
    Having { covariate: usize, level: CovariateLevel },
    MostCentral { count: usize },
    Random { count: usize },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InterventionSection {
    pub time: u64,
    pub select: SelectorSection,
    pub covariate: usize,
    pub value: CovariateLevel,
    pub success_prob: f64,
}

impl InterventionSection {
    pub fn build(&self, cfg: &ModelConfig<f64>, index: usize) -> Result<Intervention<f64>> {
        let field = format!("interventions[{index}]");
        let level = |m: usize, v: &CovariateLevel, what: &str| {
            if m >= cfg.q() {
                return Err(SteppError::InvalidConfig(format!("{field}.{what}: covariate {m} does not exist")));
            }
            cfg.level_index(m, v).ok_or_else(|| {
                SteppError::InvalidConfig(format!("{field}.{what}: {v} not in the support of covariate {m}"))
            })
        };
        let selector = match &self.select {
            SelectorSection::All => Selector::All,
            SelectorSection::Ids { ids } => Selector::Ids(ids.clone()),
            SelectorSection::Having { covariate, level: v } => {
                Selector::Having { covariate: *covariate, level: level(*covariate, v, "select.level")? }
            }
            SelectorSection::MostCentral { count } => Selector::MostCentral { count: *count },
            SelectorSection::Random { count } => Selector::Random { count: *count },
        };
        Ok(Intervention {
            time: self.time,
            selector,
            covariate: self.covariate,
            value: level(self.covariate, &self.value, "value")?,
            success_prob: self.success_prob,
        })
    }
}

/// Configuration file shared by every command; each command reads the
/// sections it needs.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub model: ModelSection,
    pub theta: Option<ThetaSection>,
    pub migration: Option<MigrationSection>,
    pub initial: Option<InitialSection>,
    pub seed: Option<u64>,
    pub replicates: Option<usize>,
    /// Number of transitions to simulate.
    pub horizon: Option<usize>,
    pub fit: Option<FitSection>,
    /// Null hypothesis for deviance and p-values.
    pub null: Option<ThetaSection>,
    #[serde(default)]
    pub interventions: Vec<InterventionSection>,
    /// Output path used when no `--out` is given.
    pub out: Option<String>,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| SteppError::InvalidConfig(format!("config: {e}")))
    }

    pub fn migration(&self, cfg: &ModelConfig<f64>) -> Result<MigrationParams<f64>> {
        match &self.migration {
            Some(m) => m.build(cfg),
            None => Ok(MigrationParams::closed(cfg)),
        }
    }

    /// `theta` with the migration section attached.
    pub fn theta(&self, cfg: &ModelConfig<f64>) -> Result<ParamVector<f64>> {
        let section = self.theta.as_ref().ok_or_else(|| SteppError::InvalidConfig("theta: required".into()))?;
        section.build(cfg, self.migration(cfg)?, "theta")
    }

    /// The configured null, or basic drift with fair-coin persistence.
    pub fn null(&self, cfg: &ModelConfig<f64>) -> Result<ParamVector<f64>> {
        match &self.null {
            Some(n) => n.build(cfg, MigrationParams::closed(cfg), "null"),
            None => Ok(ParamVector::drift_null(cfg)),
        }
    }

    pub fn interventions(&self, cfg: &ModelConfig<f64>) -> Result<Vec<Intervention<f64>>> {
        self.interventions.iter().enumerate().map(|(i, s)| s.build(cfg, i)).collect()
    }
}

/// Resolves `fit.fixed` names to flat indices.
pub fn fixed_parameters(fixed: &BTreeMap<String, f64>, cfg: &ModelConfig<f64>) -> Result<Vec<(usize, f64)>> {
    let names = parameter_names(cfg);
    fixed
        .iter()
        .map(|(name, &v)| {
            names
                .iter()
                .position(|n| n == name)
                .map(|i| (i, v))
                .ok_or_else(|| SteppError::InvalidConfig(format!("fit.fixed: unknown parameter `{name}` (known: {})", names.join(", "))))
        })
        .collect()
}

/// One row of a fit table.
#[derive(Clone, Debug, PartialEq)]
pub struct ReportRow {
    pub name: String,
    pub estimate: f64,
    pub std_error: StdError<f64>,
    pub null_value: f64,
    pub p_value: Option<f64>,
}

/// Estimates, SEs and nominal-normal p-values against `null`. Force
/// coefficients use `force_alternative`; persistence is always two-sided.
pub fn report_rows(fit: &FitResult<f64>, null: &ParamVector<f64>, force_alternative: Alternative) -> Vec<ReportRow> {
    let est = fit.estimates();
    let nulls = crate::inference::params::to_flat(null);
    let q = fit.theta_hat.q();
    fit.parameter_names
        .iter()
        .enumerate()
        .map(|(i, name)| {
            let is_rho = (2..2 + q).contains(&i);
            let alt = if is_rho { Alternative::TwoSided } else { force_alternative };
            let se = fit.std_errors[i].clone();
            let p = match (&se, fit.status[i]) {
                (StdError::Value(s), ParamStatus::Free) => p_value(est[i], *s, nulls[i], alt),
                _ => None,
            };
            ReportRow { name: name.clone(), estimate: est[i], std_error: se, null_value: nulls[i], p_value: p }
        })
        .collect()
}

fn finite_or_null(v: f64) -> Value {
    if v.is_finite() {
        json!(v)
    } else {
        Value::Null
    }
}

fn se_json(se: &StdError<f64>) -> (Value, Value) {
    match se {
        StdError::Value(v) => (json!(v), Value::Null),
        StdError::Boundary => (Value::Null, json!("boundary")),
        StdError::Fixed => (Value::Null, json!("fixed")),
        StdError::Unavailable(why) => (Value::Null, json!(format!("unavailable: {why}"))),
    }
}

fn migration_json(m: &MigrationParams<f64>) -> Value {
    json!({
        "emigration_prob": m.emigration_prob,
        "immigration_rate": m.immigration_rate,
        "immigrant_position_spread": m.immigrant_position_spread,
        "immigrant_covariate_probs": m.immigrant_covariate_probs,
    })
}

/// Everything the fit command reports, ready for JSON and text output.
pub struct FitReport<'a> {
    pub fit: &'a FitResult<f64>,
    pub config: &'a ModelConfig<f64>,
    pub null: &'a ParamVector<f64>,
    pub null_log_lik: f64,
    pub deviance: Result<f64>,
    pub rescaled: Result<RescaledReport<f64>>,
    pub force_alternative: Alternative,
}

impl FitReport<'_> {
    pub fn rows(&self) -> Vec<ReportRow> {
        report_rows(self.fit, self.null, self.force_alternative)
    }

    pub fn to_json(&self) -> Value {
        let fit = self.fit;
        let parameters: Vec<Value> = self
            .rows()
            .iter()
            .map(|r| {
                let (se, flag) = se_json(&r.std_error);
                json!({
                    "name": r.name,
                    "estimate": r.estimate,
                    "std_error": se,
                    "flag": flag,
                    "null_value": r.null_value,
                    "p_value": r.p_value,
                })
            })
            .collect();
        let names = parameter_names(self.config);
        let q = self.config.q();
        let spatial: Vec<&String> = names[..2].iter().chain(&names[2 + q..]).collect();
        let rescaled = match &self.rescaled {
            Ok(r) => json!({
                "tau": r.tau,
                "starred": spatial.iter().zip(&r.starred).map(|(n, v)| ((*n).clone(), json!(v))).collect::<serde_json::Map<_, _>>(),
                "rho": r.rho,
            }),
            Err(e) => json!({ "error": e.to_string() }),
        };
        let deviance = match &self.deviance {
            Ok(d) => json!({ "value": d, "df": names.len() }),
            Err(e) => json!({ "error": e.to_string() }),
        };
        json!({
            "parameters": parameters,
            "log_lik": finite_or_null(fit.log_lik),
            "migration_log_lik": fit.migration_log_lik,
            "null": {
                "theta": ThetaSection::from_theta(self.null),
                "log_lik": finite_or_null(self.null_log_lik),
            },
            "deviance": deviance,
            "rescaled": rescaled,
            "migration": migration_json(&fit.theta_hat.migration),
            "converged": fit.converged,
            "iterations": fit.iterations,
            "boundary_params": fit.boundary_params.iter().collect::<BTreeSet<_>>(),
            "pairs": fit.pairs,
            "starts": fit.starts.iter().map(|s| json!({
                "label": s.label,
                "log_lik": finite_or_null(s.log_lik),
                "iterations": s.iterations,
                "converged": s.converged,
            })).collect::<Vec<_>>(),
        })
    }

    /// Aligned plain-text table: Parameter, Estimate, Std. Error, p-value.
    pub fn to_text(&self) -> String {
        let rows: Vec<[String; 4]> = self
            .rows()
            .iter()
            .map(|r| {
                let se = match &r.std_error {
                    StdError::Value(v) => format!("({v:.4})"),
                    StdError::Boundary => "(boundary)".into(),
                    StdError::Fixed => "(fixed)".into(),
                    StdError::Unavailable(_) => "(n/a)".into(),
                };
                let p = match (&r.std_error, r.p_value) {
                    (StdError::Boundary, _) => "n/a (boundary)".into(),
                    (_, Some(p)) if p < 1e-4 => "< 0.0001".into(),
                    (_, Some(p)) => format!("{p:.4}"),
                    (_, None) => "n/a".into(),
                };
                [r.name.clone(), format!("{:.4}", r.estimate), se, p]
            })
            .collect();
        let header = ["Parameter", "Estimate", "Std. Error", "p-value"].map(String::from);
        let mut widths = header.clone().map(|h| h.len());
        for r in &rows {
            for (w, c) in widths.iter_mut().zip(r) {
                *w = (*w).max(c.len());
            }
        }
        let line = |r: &[String; 4]| {
            format!("{:<w0$}  {:>w1$}  {:>w2$}  {:>w3$}\n", r[0], r[1], r[2], r[3], w0 = widths[0], w1 = widths[1], w2 = widths[2], w3 = widths[3])
        };
        let mut out = line(&header);
        out.push_str(&"-".repeat(widths.iter().sum::<usize>() + 6));
        out.push('\n');
        for r in &rows {
            out.push_str(&line(r));
        }
        out.push_str(&format!("\nlog-likelihood: {:.4}\n", self.fit.log_lik));
        match &self.deviance {
            Ok(d) => out.push_str(&format!("deviance vs null: {d:.4}\n")),
            Err(e) => out.push_str(&format!("deviance vs null: {e}\n")),
        }
        if let Ok(r) = &self.rescaled {
            out.push_str(&format!("tau: {:.4}\n", r.tau));
        }
        out.push_str(&format!("converged: {} ({} iterations)\n", self.fit.converged, self.fit.iterations));
        out
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x}")).unwrap_or_default()
}

/// Header of a goodness-of-fit table; rows follow via [`push_gof_rows`].
pub fn gof_csv_header(q: usize) -> String {
    let mut out = String::from("replicate,transition,t,actors_before,actors_after,persistent,immigrants,emigrants,mean_sq_displacement");
    for m in 1..=q {
        out.push_str(&format!(",persistence{m},homophily{m}"));
    }
    out.push('\n');
    out
}

/// Appends the rows of one replicate to a table started by [`gof_csv_header`].
pub fn push_gof_rows(out: &mut String, replicate: usize, rows: &[GofRow]) {
    for r in rows {
        out.push_str(&format!(
            "{replicate},{},{},{},{},{},{},{},{}",
            r.transition,
            r.t,
            r.actors_before,
            r.actors_after,
            r.persistent,
            r.immigrants,
            r.emigrants,
            opt(r.mean_sq_displacement)
        ));
        for (p, h) in r.persistence.iter().zip(&r.homophily) {
            out.push_str(&format!(",{},{}", opt(*p), opt(*h)));
        }
        out.push('\n');
    }
}

/// Per-wave prevalence table of a scenario run.
pub fn scenario_csv(report: &ScenarioReport, cfg: &ModelConfig<f64>) -> String {
    let mut out = String::from(
        "wave,t,covariate,level,control_mean,control_sd,intervention_mean,intervention_sd\n",
    );
    for r in &report.rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            r.wave,
            r.t,
            r.covariate,
            cfg.supports[r.covariate][r.level],
            r.control_mean,
            opt(r.control_sd),
            r.intervention_mean,
            opt(r.intervention_sd)
        ));
    }
    out
}
