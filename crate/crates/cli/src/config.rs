//! Run configuration: one TOML file, every section optional.

use std::path::Path;

use serde::Deserialize;

use fdi_core::case_study::CaseStudy;
use fdi_core::causal::IndependenceTest;
use fdi_core::{
    CircuitParams, FaultSpec, FaultTarget, ForestConfig, Label, Method, NoiseSpec, SimConfig, SwitchSchedule,
    Thresholds,
};

use crate::error::CliError;

pub const DEFAULT_SEED: u64 = 42;
pub const SEED_ENV: &str = "FDI_SEED";

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub seed: Option<u64>,
    #[serde(default)]
    pub circuit: CircuitSection,
    #[serde(default)]
    pub switch: SwitchSection,
    pub fault: Option<FaultSection>,
    #[serde(default)]
    pub noise: NoiseSection,
    #[serde(default)]
    pub sim: SimSection,
    #[serde(default)]
    pub thresholds: ThresholdSection,
    #[serde(default)]
    pub forest: ForestSection,
    #[serde(default)]
    pub dataset: DatasetSection,
    #[serde(default)]
    pub fsm: FsmSection,
    #[serde(default)]
    pub independence: IndependenceSection,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CircuitSection {
    pub r0: f64,
    pub r1: f64,
    pub elastance: f64,
    pub amplitude: f64,
}

impl Default for CircuitSection {
    fn default() -> Self {
        let p = CircuitParams::nominal();
        Self {
            r0: p.r0,
            r1: p.r1,
            elastance: p.elastance,
            amplitude: p.source_amplitude,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SwitchSection {
    pub period: f64,
    pub duty: f64,
    pub start_state: u8,
}

impl Default for SwitchSection {
    fn default() -> Self {
        let s = SwitchSchedule::default();
        Self {
            period: s.period,
            duty: s.duty,
            start_state: s.start_state,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FaultSection {
    /// `R0` or `C`.
    pub target: String,
    pub factor: f64,
    #[serde(default)]
    pub onset: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NoiseSection {
    pub sigma: f64,
    /// Defaults to the run seed.
    pub seed: Option<u64>,
}

impl Default for NoiseSection {
    fn default() -> Self {
        Self { sigma: 0.0, seed: None }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimSection {
    pub duration: f64,
    pub sample_rate: f64,
    /// `closed-form` or `rk4`.
    pub method: String,
    pub rk_step: f64,
}

impl Default for SimSection {
    fn default() -> Self {
        let s = SimConfig::default();
        Self {
            duration: s.duration,
            sample_rate: s.sample_rate,
            method: "closed-form".into(),
            rk_step: s.rk_step,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ThresholdSection {
    /// Fixed thresholds; when absent they are calibrated on healthy traces.
    pub thr1: Option<f64>,
    pub thr2: Option<f64>,
    pub debounce: usize,
    pub k: f64,
}

impl Default for ThresholdSection {
    fn default() -> Self {
        Self {
            thr1: None,
            thr2: None,
            debounce: 3,
            k: fdi_core::case_study::DEFAULT_K,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ForestSection {
    pub n_trees: usize,
    /// 0 means unbounded.
    pub max_depth: usize,
    pub min_leaf: usize,
    pub feature_subsample: usize,
    pub bootstrap: bool,
    /// Defaults to the run seed.
    pub seed: Option<u64>,
}

impl Default for ForestSection {
    fn default() -> Self {
        let f = ForestConfig::default();
        Self {
            n_trees: f.n_trees,
            max_depth: f.max_depth,
            min_leaf: f.min_leaf,
            feature_subsample: f.feature_subsample,
            bootstrap: f.bootstrap,
            seed: None,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DatasetSection {
    pub sigma: f64,
    pub train_per_class: usize,
    pub validation_per_class: usize,
}

impl Default for DatasetSection {
    fn default() -> Self {
        let c = CaseStudy::default();
        Self {
            sigma: c.sigma,
            train_per_class: c.train_per_class,
            validation_per_class: c.validation_per_class,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FsmSection {
    /// Scores above this become 1 when an experience-based FSM is analysed.
    pub binarize: f64,
}

impl Default for FsmSection {
    fn default() -> Self {
        Self { binarize: 0.05 }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IndependenceSection {
    pub alpha: f64,
    pub bins: usize,
}

impl Default for IndependenceSection {
    fn default() -> Self {
        let t = IndependenceTest::default();
        Self {
            alpha: t.alpha,
            bins: t.bins,
        }
    }
}

/// Validated settings for one invocation.
#[derive(Debug, Clone)]
pub struct Settings {
    pub seed: u64,
    pub params: CircuitParams,
    pub schedule: SwitchSchedule,
    pub fault: Option<FaultSpec>,
    pub noise: Option<NoiseSpec>,
    pub sim: SimConfig,
    pub thresholds: Option<Thresholds>,
    pub debounce: usize,
    pub k: f64,
    pub forest: ForestConfig,
    pub case_study: CaseStudy,
    pub binarize: f64,
    pub independence: IndependenceTest,
}

fn invalid(e: impl std::fmt::Display) -> CliError {
    CliError::Config(e.to_string())
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    /// Validates every section. `seed` is the already-resolved run seed.
    pub fn settings(&self, seed: u64) -> Result<Settings, CliError> {
        let c = &self.circuit;
        let params = CircuitParams::new(c.r0, c.r1, c.elastance, c.amplitude).map_err(invalid)?;
        let s = &self.switch;
        let schedule = SwitchSchedule::new(s.period, s.duty, s.start_state).map_err(invalid)?;
        let fault = self.fault.as_ref().map(|f| f.spec()).transpose()?;
        let noise = if self.noise.sigma == 0.0 {
            None
        } else {
            Some(NoiseSpec::new(self.noise.sigma, self.noise.seed.unwrap_or(seed)).map_err(invalid)?)
        };
        let method = match self.sim.method.as_str() {
            "closed-form" => Method::ClosedForm,
            "rk4" => Method::RungeKutta4,
            other => return Err(invalid(format!("unknown sim.method `{other}` (closed-form, rk4)"))),
        };
        let sim = SimConfig {
            duration: self.sim.duration,
            sample_rate: self.sim.sample_rate,
            method,
            rk_step: self.sim.rk_step,
        };
        sim.validate().map_err(invalid)?;

        let t = &self.thresholds;
        let thresholds = match (t.thr1, t.thr2) {
            (Some(a), Some(b)) => Some(Thresholds::new(a, b, t.debounce).map_err(invalid)?),
            (None, None) => None,
            _ => return Err(invalid("thresholds.thr1 and thresholds.thr2 must be given together")),
        };
        if t.debounce == 0 {
            return Err(invalid("thresholds.debounce must be >= 1"));
        }
        if !(t.k.is_finite() && t.k > 0.0) {
            return Err(invalid(format!("thresholds.k must be > 0, got {}", t.k)));
        }

        let f = &self.forest;
        let forest = ForestConfig {
            n_trees: f.n_trees,
            max_depth: if f.max_depth == 0 { usize::MAX } else { f.max_depth },
            min_leaf: f.min_leaf,
            feature_subsample: f.feature_subsample,
            bootstrap: f.bootstrap,
            seed: f.seed.unwrap_or(seed),
        };
        forest.validate(fdi_core::eb::FEATURE_NAMES.len()).map_err(invalid)?;

        let d = &self.dataset;
        if !(d.sigma.is_finite() && d.sigma >= 0.0) {
            return Err(invalid(format!("dataset.sigma must be >= 0, got {}", d.sigma)));
        }
        if d.train_per_class == 0 {
            return Err(invalid("dataset.train_per_class must be >= 1"));
        }
        let case_study = CaseStudy {
            params,
            schedule,
            sim,
            sigma: d.sigma,
            seed,
            train_per_class: d.train_per_class,
            validation_per_class: d.validation_per_class,
        };

        if !(self.fsm.binarize.is_finite() && self.fsm.binarize >= 0.0) {
            return Err(invalid("fsm.binarize must be >= 0"));
        }
        let i = &self.independence;
        if !(i.alpha > 0.0 && i.alpha < 1.0) {
            return Err(invalid(format!("independence.alpha must be in (0,1), got {}", i.alpha)));
        }
        if i.bins < 2 {
            return Err(invalid("independence.bins must be >= 2"));
        }

        Ok(Settings {
            seed,
            params,
            schedule,
            fault,
            noise,
            sim,
            thresholds,
            debounce: t.debounce,
            k: t.k,
            forest,
            case_study,
            binarize: self.fsm.binarize,
            independence: IndependenceTest {
                alpha: i.alpha,
                bins: i.bins,
                ..IndependenceTest::default()
            },
        })
    }
}

impl FaultSection {
    fn spec(&self) -> Result<FaultSpec, CliError> {
        let target = match self.target.as_str() {
            "R0" | "r0" => FaultTarget::R0,
            "C" | "c" => FaultTarget::Elastance,
            other => return Err(invalid(format!("unknown fault.target `{other}` (R0, C)"))),
        };
        FaultSpec::new(target, self.factor, self.onset).map_err(invalid)
    }
}

/// Seed precedence: `--seed`, then the config file, then `FDI_SEED`, then 42.
pub fn resolve_seed(flag: Option<u64>, file: Option<u64>, env: Option<&str>) -> Result<u64, CliError> {
    if let Some(s) = flag.or(file) {
        return Ok(s);
    }
    match env {
        Some(v) => v
            .trim()
            .parse()
            .map_err(|_| invalid(format!("{SEED_ENV} must be an unsigned integer, got `{v}`"))),
        None => Ok(DEFAULT_SEED),
    }
}

/// The label whose default fault equals `fault`, if any.
pub fn label_for(fault: Option<&FaultSpec>) -> Option<Label> {
    Label::ALL.into_iter().find(|l| l.default_fault().as_ref() == fault)
}
