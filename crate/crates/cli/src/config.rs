//! Run configuration: one JSON document, every field optional.

use std::fs;
use std::path::{Path, PathBuf};

use ratchet_core::engine::logspace;
use ratchet_core::experiments::{DisorderConfig, ImperfectionKind};
use ratchet_core::model::default_site_energy;
use ratchet_core::{
    BathSpec, CellSpec, ExtractionMode, ImperfectionSpec, RingSpec, ScenarioKind, TrapSearch, TrapSpec,
};
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::Failure;

pub const DEFAULT_SEED: u64 = 20240601;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub scenario: ScenarioKind,
    pub seed: u64,
    pub ring: RingConfig,
    pub bath: BathConfig,
    pub trap: TrapConfig,
    pub imperfections: ImperfectionsConfig,
    pub experiment: ExperimentConfig,
    pub output: OutputConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            scenario: ScenarioKind::Ratchets,
            seed: DEFAULT_SEED,
            ring: RingConfig::default(),
            bath: BathConfig::default(),
            trap: TrapConfig::default(),
            imperfections: ImperfectionsConfig::default(),
            experiment: ExperimentConfig::default(),
            output: OutputConfig::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RingConfig {
    pub n_sites: usize,
    /// Hopping S (eV).
    pub hopping: f64,
    /// Uniform site energy (eV); by default the bright state sits at 1.8 eV.
    pub site_energy: Option<f64>,
    /// Per-site energies (eV); overrides `n_sites` and `site_energy`.
    pub site_energies: Option<Vec<f64>>,
}

impl Default for RingConfig {
    fn default() -> Self {
        RingConfig {
            n_sites: 4,
            hopping: 0.02,
            site_energy: None,
            site_energies: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BathConfig {
    pub gamma_o: f64,
    pub t_o: f64,
    pub gamma_p: f64,
    pub t_p: f64,
}

impl Default for BathConfig {
    fn default() -> Self {
        let b = BathSpec::default();
        BathConfig {
            gamma_o: b.gamma_o,
            t_o: b.t_o,
            gamma_p: b.gamma_p,
            t_p: b.t_p,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrapConfig {
    /// Trap energy (eV); by default resonant with the scenario's extraction level.
    pub omega_t: Option<f64>,
    pub gamma_t: f64,
    pub gamma_x: f64,
    pub extraction: ExtractionMode,
}

impl Default for TrapConfig {
    fn default() -> Self {
        let t = TrapSpec::default();
        TrapConfig {
            omega_t: t.omega_t,
            gamma_t: t.gamma_t,
            gamma_x: t.gamma_x,
            extraction: t.extraction,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ImperfectionsConfig {
    pub gamma_nr: f64,
    pub gamma_eea: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    /// Scenarios for multi-scenario subcommands; `None` uses the subcommand default.
    pub scenarios: Option<Vec<ScenarioKind>>,
    /// Trap rates (eV) for load curves.
    pub gamma_t: Vec<f64>,
    pub temperature: TemperatureGrid,
    pub surface: SurfaceGrid,
    pub disorder: DisorderSettings,
    pub imperfection: ImperfectionSweep,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            scenarios: None,
            gamma_t: TrapSearch::default().grid(BathSpec::default().gamma_o),
            temperature: TemperatureGrid::default(),
            surface: SurfaceGrid::default(),
            disorder: DisorderSettings::default(),
            imperfection: ImperfectionSweep::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TemperatureGrid {
    pub t_o: Vec<f64>,
    pub t_p: Vec<f64>,
}

impl Default for TemperatureGrid {
    fn default() -> Self {
        let d = ratchet_core::experiments::TempMapConfig::default();
        TemperatureGrid { t_o: d.t_o, t_p: d.t_p }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SurfaceGrid {
    pub hopping: Vec<f64>,
    pub gamma_x: Vec<f64>,
    pub search: TrapSearch,
}

impl Default for SurfaceGrid {
    fn default() -> Self {
        let d = ratchet_core::experiments::SurfaceConfig::default();
        SurfaceGrid {
            hopping: d.hopping,
            gamma_x: d.gamma_x,
            search: d.search,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DisorderSettings {
    pub sigma: f64,
    pub n_realizations: usize,
    pub center: Option<f64>,
}

impl Default for DisorderSettings {
    fn default() -> Self {
        DisorderSettings {
            sigma: 0.01,
            n_realizations: 100,
            center: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ImperfectionSweep {
    pub kind: ImperfectionKind,
    pub rates: Vec<f64>,
}

impl Default for ImperfectionSweep {
    fn default() -> Self {
        let mut rates = vec![0.0];
        rates.extend(logspace(1e-9, 1e-5, 5));
        ImperfectionSweep {
            kind: ImperfectionKind::NonRadiative,
            rates,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub dir: PathBuf,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            dir: PathBuf::from("ratchet-out"),
        }
    }
}

/// Command-line overrides, applied on top of the file in order.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub set: Vec<String>,
    pub scenarios: Vec<ScenarioKind>,
    pub out: Option<PathBuf>,
}

pub fn load(path: Option<&Path>, overrides: &Overrides) -> Result<RunConfig, Failure> {
    let mut doc = match path {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| Failure::Io(format!("{}: {e}", p.display())))?;
            serde_json::from_str(&text).map_err(|e| Failure::Config(format!("{}: {e}", p.display())))?
        }
        None => Value::Object(Map::new()),
    };
    if !doc.is_object() {
        return Err(Failure::Config("config must be a JSON object".into()));
    }
    for item in &overrides.set {
        let (key, raw) = item
            .split_once('=')
            .ok_or_else(|| Failure::Config(format!("--set expects key=value, got `{item}`")))?;
        let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
        assign(&mut doc, key, value)?;
    }
    if let Some(first) = overrides.scenarios.first() {
        assign(&mut doc, "scenario", Value::String(first.short_name().into()))?;
        let list = overrides.scenarios.iter().map(|s| Value::String(s.short_name().into())).collect();
        assign(&mut doc, "experiment.scenarios", Value::Array(list))?;
    }
    if let Some(dir) = &overrides.out {
        assign(&mut doc, "output.dir", Value::String(dir.display().to_string()))?;
    }
    let config: RunConfig = serde_path_to_error::deserialize(doc).map_err(|e| {
        let path = e.path().to_string();
        Failure::Config(format!("`{path}`: {}", e.into_inner()))
    })?;
    config.validate()?;
    Ok(config)
}

fn assign(doc: &mut Value, key: &str, value: Value) -> Result<(), Failure> {
    let parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(Failure::Config(format!("malformed key `{key}`")));
    }
    let mut node = doc;
    for (depth, part) in parts.iter().enumerate() {
        let map = node
            .as_object_mut()
            .ok_or_else(|| Failure::Config(format!("`{}` is not an object", parts[..depth].join("."))))?;
        if depth + 1 == parts.len() {
            map.insert(part.to_string(), value);
            return Ok(());
        }
        node = map.entry(part.to_string()).or_insert_with(|| Value::Object(Map::new()));
    }
    unreachable!("key has at least one part")
}

impl RunConfig {
    pub fn ring_spec(&self) -> RingSpec {
        let s = self.ring.hopping;
        let energies = match &self.ring.site_energies {
            Some(e) => e.clone(),
            None => vec![self.ring.site_energy.unwrap_or_else(|| default_site_energy(s)); self.ring.n_sites],
        };
        RingSpec {
            site_energies: energies,
            hopping: s,
        }
    }

    pub fn cell_spec(&self) -> CellSpec {
        CellSpec {
            scenario: self.scenario,
            ring: self.ring_spec(),
            bath: BathSpec {
                gamma_o: self.bath.gamma_o,
                t_o: self.bath.t_o,
                gamma_p: self.bath.gamma_p,
                t_p: self.bath.t_p,
            },
            trap: TrapSpec {
                omega_t: self.trap.omega_t,
                gamma_t: self.trap.gamma_t,
                gamma_x: self.trap.gamma_x,
                extraction: self.trap.extraction,
            },
            imperfections: ImperfectionSpec {
                gamma_nr: self.imperfections.gamma_nr,
                gamma_eea: self.imperfections.gamma_eea,
            },
        }
    }

    pub fn scenarios_or(&self, default: &[ScenarioKind]) -> Vec<ScenarioKind> {
        self.experiment.scenarios.clone().unwrap_or_else(|| default.to_vec())
    }

    pub fn disorder(&self) -> DisorderConfig {
        DisorderConfig {
            sigma: self.experiment.disorder.sigma,
            n_realizations: self.experiment.disorder.n_realizations,
            rng_seed: self.seed,
            center: self.experiment.disorder.center,
        }
    }

    pub fn validate(&self) -> Result<(), Failure> {
        positive("bath.t_o", self.bath.t_o)?;
        positive("bath.t_p", self.bath.t_p)?;
        if self.ring.site_energies.is_none() {
            if let Some(e) = self.ring.site_energy {
                positive("ring.site_energy", e)?;
            }
        }
        self.cell_spec().validate().map_err(|e| Failure::Config(e.to_string()))?;

        let ex = &self.experiment;
        if let Some(s) = &ex.scenarios {
            if s.is_empty() {
                return Err(Failure::Config("`experiment.scenarios`: list is empty".into()));
            }
        }
        non_negative_list("experiment.gamma_t", &ex.gamma_t)?;
        positive_list("experiment.temperature.t_o", &ex.temperature.t_o)?;
        positive_list("experiment.temperature.t_p", &ex.temperature.t_p)?;
        non_negative_list("experiment.surface.hopping", &ex.surface.hopping)?;
        non_negative_list("experiment.surface.gamma_x", &ex.surface.gamma_x)?;
        non_negative_list("experiment.imperfection.rates", &ex.imperfection.rates)?;
        ex.surface
            .search
            .validate()
            .map_err(|e| Failure::Config(format!("experiment.surface.{}", e)))?;
        self.disorder()
            .validate()
            .map_err(|e| Failure::Config(format!("experiment.{}", e)))?;
        Ok(())
    }
}

fn positive(key: &str, x: f64) -> Result<(), Failure> {
    if x.is_finite() && x > 0.0 {
        Ok(())
    } else {
        Err(Failure::Config(format!("`{key}`: must be finite and positive, got {x}")))
    }
}

fn positive_list(key: &str, xs: &[f64]) -> Result<(), Failure> {
    if xs.is_empty() {
        return Err(Failure::Config(format!("`{key}`: list is empty")));
    }
    xs.iter().enumerate().try_for_each(|(i, &x)| positive(&format!("{key}[{i}]"), x))
}

fn non_negative_list(key: &str, xs: &[f64]) -> Result<(), Failure> {
    if xs.is_empty() {
        return Err(Failure::Config(format!("`{key}`: list is empty")));
    }
    for (i, &x) in xs.iter().enumerate() {
        if !x.is_finite() || x < 0.0 {
            return Err(Failure::Config(format!("`{key}[{i}]`: must be finite and non-negative, got {x}")));
        }
    }
    Ok(())
}
