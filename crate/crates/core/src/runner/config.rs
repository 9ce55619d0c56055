//! Run configuration: TOML sections with defaults, `key=value` overrides and
//! Cartesian sweeps over any list-valued scalar key.

use serde::{Deserialize, Serialize};
use toml::Value;

use crate::bath::{Scheme, SpectralDensity};
use crate::chain::CouplingKind;
use crate::error::{Error, Result};
use crate::experiment::ProbeSet;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    #[default]
    Rwa,
    Full,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChainMethod {
    #[default]
    Lanczos,
    Stieltjes,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelSection {
    pub kind: ModelKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BathSection {
    pub h: f64,
    pub eta: f64,
    pub omega0: f64,
    pub omega_max: f64,
    pub coupling_scale: f64,
    pub n_omega: usize,
    pub omega_s: f64,
    pub scheme: Scheme,
}

impl Default for BathSection {
    fn default() -> Self {
        let d = SpectralDensity::default();
        Self {
            h: d.h,
            eta: d.eta,
            omega0: d.omega0,
            omega_max: d.omega_max,
            coupling_scale: d.coupling_scale,
            n_omega: 2000,
            omega_s: 1.0,
            scheme: Scheme::Midpoint,
        }
    }
}

impl BathSection {
    pub fn density(&self) -> SpectralDensity {
        SpectralDensity {
            coupling_scale: self.coupling_scale,
            h: self.h,
            omega0: self.omega0,
            eta: self.eta,
            omega_max: self.omega_max,
            clamp_negative: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RwaSection {
    pub dt: f64,
    pub horizon: f64,
    pub rate_floor: f64,
    /// Every `output_stride`-th solver step is kept for analysis and output.
    pub output_stride: usize,
}

impl Default for RwaSection {
    fn default() -> Self {
        Self { dt: 1e-3, horizon: 200.0, rate_floor: 1e-6, output_stride: 10 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ChainSection {
    pub length: usize,
    pub coupling: CouplingKind,
    pub method: ChainMethod,
}

impl Default for ChainSection {
    fn default() -> Self {
        Self { length: 120, coupling: CouplingKind::SigmaX, method: ChainMethod::Lanczos }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MpsSection {
    pub n_max: usize,
    /// Bond dimension cap; 0 leaves bonds uncapped.
    pub max_bond: usize,
    pub cutoff: f64,
    pub dt: f64,
    pub horizon: f64,
    pub sample_stride: usize,
    pub probes: ProbeSet,
}

impl Default for MpsSection {
    fn default() -> Self {
        Self { n_max: 4, max_bond: 60, cutoff: 1e-8, dt: 0.01, horizon: 100.0, sample_stride: 10, probes: ProbeSet::Basis }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MeasureSection {
    pub theta_samples: usize,
    pub phi_samples: usize,
}

impl Default for MeasureSection {
    fn default() -> Self {
        Self { theta_samples: 31, phi_samples: 16 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FitSection {
    pub t_start: f64,
    /// End of the fit window; the end of the run when absent.
    pub t_end: Option<f64>,
    pub noise_floor: f64,
}

impl Default for FitSection {
    fn default() -> Self {
        Self { t_start: 5.0, t_end: None, noise_floor: 1e-6 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunSection {
    /// Worker threads; 0 lets the pool pick.
    pub threads: usize,
    pub out: String,
}

impl Default for RunSection {
    fn default() -> Self {
        Self { threads: 0, out: "runs".into() }
    }
}

/// One fully resolved run point.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub model: ModelSection,
    pub bath: BathSection,
    pub rwa: RwaSection,
    pub chain: ChainSection,
    pub mps: MpsSection,
    pub measure: MeasureSection,
    pub fit: FitSection,
    pub run: RunSection,
}

fn config_err(path: impl Into<String>, message: impl Into<String>) -> Error {
    Error::Config { path: path.into(), message: message.into() }
}

impl RunConfig {
    /// Range checks that the type system does not cover.
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("bath.eta", self.bath.eta),
            ("bath.omega_max", self.bath.omega_max),
            ("rwa.dt", self.rwa.dt),
            ("rwa.horizon", self.rwa.horizon),
            ("mps.dt", self.mps.dt),
            ("mps.horizon", self.mps.horizon),
        ];
        for (path, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(config_err(path, format!("must be positive and finite, got {v}")));
            }
        }
        let nonneg = [
            ("bath.h", self.bath.h),
            ("bath.coupling_scale", self.bath.coupling_scale),
            ("bath.omega0", self.bath.omega0),
            ("rwa.rate_floor", self.rwa.rate_floor),
            ("mps.cutoff", self.mps.cutoff),
            ("fit.t_start", self.fit.t_start),
            ("fit.noise_floor", self.fit.noise_floor),
        ];
        for (path, v) in nonneg {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(config_err(path, format!("must be nonnegative and finite, got {v}")));
            }
        }
        if !self.bath.omega_s.is_finite() {
            return Err(config_err("bath.omega_s", "must be finite"));
        }
        let counts = [
            ("bath.n_omega", self.bath.n_omega, 2),
            ("mps.n_max", self.mps.n_max, 1),
            ("mps.sample_stride", self.mps.sample_stride, 1),
            ("measure.theta_samples", self.measure.theta_samples, 2),
            ("measure.phi_samples", self.measure.phi_samples, 1),
            ("rwa.output_stride", self.rwa.output_stride, 1),
        ];
        for (path, v, min) in counts {
            if v < min {
                return Err(config_err(path, format!("must be at least {min}, got {v}")));
            }
        }
        if self.mps.cutoff >= 1.0 {
            return Err(config_err("mps.cutoff", "relative cutoff must be below 1"));
        }
        if self.chain.length > self.bath.n_omega {
            return Err(config_err("chain.length", "cannot exceed bath.n_omega"));
        }
        if let Some(end) = self.fit.t_end {
            if !(end > self.fit.t_start) {
                return Err(config_err("fit.t_end", "must exceed fit.t_start"));
            }
        }
        Ok(())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}

/// A parsed configuration file, possibly describing a sweep.
#[derive(Debug, Clone)]
pub struct ConfigTemplate {
    table: toml::Table,
}

/// A resolved sweep point with the swept keys that produced it.
#[derive(Debug, Clone)]
pub struct SweepPoint {
    pub index: usize,
    pub label: Vec<(String, String)>,
    pub config: RunConfig,
}

impl SweepPoint {
    /// Directory name of the point, e.g. `p001_bath.h=0.4`.
    pub fn dir_name(&self) -> String {
        let mut s = format!("p{:03}", self.index);
        for (k, v) in &self.label {
            s.push('_');
            s.push_str(k);
            s.push('=');
            s.extend(v.chars().map(|c| if c.is_ascii_alphanumeric() || ".-+".contains(c) { c } else { '_' }));
        }
        s
    }
}

impl ConfigTemplate {
    pub fn parse(text: &str) -> Result<Self> {
        let table: toml::Table = text.parse().map_err(|e: toml::de::Error| {
            config_err(e.span().map_or("<document>".into(), |s| format!("byte {}", s.start)), e.message().to_string())
        })?;
        Ok(Self { table })
    }

    pub fn from_file(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| config_err(path.display().to_string(), e.to_string()))?;
        Self::parse(&text)
    }

    pub fn empty() -> Self {
        Self { table: toml::Table::new() }
    }

    pub fn table(&self) -> &toml::Table {
        &self.table
    }

    /// Applies `section.key=value`; the value is read as a TOML literal and
    /// falls back to a bare string.
    pub fn apply_override(&mut self, spec: &str) -> Result<()> {
        let (path, raw) = spec
            .split_once('=')
            .ok_or_else(|| config_err(spec, "override must look like section.key=value"))?;
        let path = path.trim();
        let value = match format!("v = {}", raw.trim()).parse::<toml::Table>() {
            Ok(mut t) => t.remove("v").unwrap(),
            Err(_) => Value::String(raw.trim().to_string()),
        };
        let keys: Vec<&str> = path.split('.').collect();
        if keys.iter().any(|k| k.is_empty()) {
            return Err(config_err(path, "empty key in override path"));
        }
        let mut cur = &mut self.table;
        for k in &keys[..keys.len() - 1] {
            let entry = cur.entry(k.to_string()).or_insert_with(|| Value::Table(toml::Table::new()));
            cur = entry.as_table_mut().ok_or_else(|| config_err(path, format!("`{k}` is not a section")))?;
        }
        cur.insert(keys[keys.len() - 1].to_string(), value);
        Ok(())
    }

    /// Expands list-valued keys into the Cartesian product of run points, in
    /// row-major order of the keys as they appear in the file.
    pub fn expand(&self) -> Result<Vec<SweepPoint>> {
        let mut axes: Vec<(Vec<String>, Vec<Value>)> = Vec::new();
        collect_axes(&self.table, &mut Vec::new(), &mut axes)?;
        let total: usize = axes.iter().map(|a| a.1.len()).product();
        let mut points = Vec::with_capacity(total);
        for index in 0..total {
            let mut table = self.table.clone();
            let mut label = Vec::new();
            let mut rem = index;
            let mut picks = vec![0; axes.len()];
            for (i, (_, vals)) in axes.iter().enumerate().rev() {
                picks[i] = rem % vals.len();
                rem /= vals.len();
            }
            for ((path, vals), pick) in axes.iter().zip(picks) {
                let v = vals[pick].clone();
                label.push((path.join("."), value_label(&v)));
                set_path(&mut table, path, v);
            }
            let config = deserialize(table)?;
            config.validate()?;
            points.push(SweepPoint { index, label, config });
        }
        Ok(points)
    }
}

fn value_label(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        // Debug switches to exponent notation for very large or small values
        Value::Float(f) => format!("{f:?}"),
        other => other.to_string(),
    }
}

fn collect_axes(table: &toml::Table, prefix: &mut Vec<String>, axes: &mut Vec<(Vec<String>, Vec<Value>)>) -> Result<()> {
    for (k, v) in table {
        prefix.push(k.clone());
        match v {
            Value::Table(t) => collect_axes(t, prefix, axes)?,
            Value::Array(items) => {
                if items.is_empty() {
                    return Err(config_err(prefix.join("."), "sweep list is empty"));
                }
                if items.iter().any(|i| matches!(i, Value::Array(_) | Value::Table(_))) {
                    return Err(config_err(prefix.join("."), "sweep lists must hold scalars"));
                }
                axes.push((prefix.clone(), items.clone()));
            }
            _ => {}
        }
        prefix.pop();
    }
    Ok(())
}

fn set_path(table: &mut toml::Table, path: &[String], v: Value) {
    let mut cur = table;
    for k in &path[..path.len() - 1] {
        cur = cur.get_mut(k).and_then(Value::as_table_mut).expect("path exists");
    }
    cur.insert(path[path.len() - 1].clone(), v);
}

fn deserialize(table: toml::Table) -> Result<RunConfig> {
    let text = toml::to_string(&table).map_err(|e| config_err("<document>", e.to_string()))?;
    let de = toml::Deserializer::new(&text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        config_err(path, inner.message().to_string())
    })
}

/// Default h sweep used by the reproduction configs.
pub const DEFAULT_H_SWEEP: [f64; 6] = [0.1, 0.4, 0.7, 1.0, 1.2, 1.4];
