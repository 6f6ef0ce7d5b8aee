//! The RRC-circuit case study: scenario runs, labeled datasets, calibrated thresholds.

use crate::mb::{calibrate_thresholds, Thresholds};
use crate::model::{CircuitParams, Label, NoiseSpec, SwitchSchedule, Trace};
use crate::sim::{simulate, SimConfig};
use crate::Error;

pub const DEFAULT_SIGMA: f64 = 0.02;
pub const DEFAULT_SEED: u64 = 42;
pub const DEFAULT_K: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Split {
    Train = 1,
    Validation = 2,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CaseStudy {
    pub params: CircuitParams,
    pub schedule: SwitchSchedule,
    pub sim: SimConfig,
    pub sigma: f64,
    pub seed: u64,
    pub train_per_class: usize,
    pub validation_per_class: usize,
}

impl Default for CaseStudy {
    fn default() -> Self {
        Self {
            params: CircuitParams::nominal(),
            schedule: SwitchSchedule::default(),
            sim: SimConfig::default(),
            sigma: DEFAULT_SIGMA,
            seed: DEFAULT_SEED,
            train_per_class: 4,
            validation_per_class: 3,
        }
    }
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

impl CaseStudy {
    /// One run of `label`'s default scenario, with or without noise.
    pub fn scenario(&self, label: Label, noise: Option<&NoiseSpec>) -> Result<Trace, Error> {
        let fault = label.default_fault();
        let trace = simulate(&self.params, &self.schedule, fault.as_ref(), noise, &self.sim)?;
        Ok(trace.with_label(label))
    }

    fn trace_seed(&self, split: Split, label: Label, index: usize) -> u64 {
        let class = Label::ALL.iter().position(|l| *l == label).expect("label in ALL") as u64;
        splitmix64(self.seed ^ splitmix64(((split as u64) << 48) | (class << 32) | index as u64))
    }

    fn traces(&self, split: Split, per_class: usize, labels: &[Label]) -> Result<Vec<Trace>, Error> {
        let mut out = Vec::with_capacity(per_class * labels.len());
        for &label in labels {
            for i in 0..per_class {
                let noise = NoiseSpec::new(self.sigma, self.trace_seed(split, label, i))?;
                out.push(self.scenario(label, Some(&noise))?);
            }
        }
        Ok(out)
    }

    /// Labeled noisy training traces, class by class.
    pub fn training_traces(&self) -> Result<Vec<Trace>, Error> {
        self.traces(Split::Train, self.train_per_class, &Label::ALL)
    }

    /// Labeled noisy validation traces, with noise seeds disjoint from training.
    pub fn validation_traces(&self) -> Result<Vec<Trace>, Error> {
        self.traces(Split::Validation, self.validation_per_class, &Label::ALL)
    }

    /// Thresholds at `k` standard deviations of the healthy training residuals.
    pub fn calibrated_thresholds(&self, k: f64) -> Result<Thresholds, Error> {
        let healthy = self.traces(Split::Train, self.train_per_class, &[Label::Healthy])?;
        Ok(calibrate_thresholds(&healthy, &self.params, k)?)
    }
}
