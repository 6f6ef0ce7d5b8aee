//! Trace generation for the RRC circuit.
//!
//! The state is the storage voltage `Vc`, with
//! `dVc/dt = (u_Se(t) - Vc)·E/(r0 + r1)` and `Vc(0) = 0`. Outputs are
//! `V0 = u_Se`, `i = (V0 - Vc)/(r0 + r1)`, `V1 = V0 - i·r0`, `V2 = Vc`.
//!
//! Two solvers are provided. `ClosedForm` holds the source and parameters at
//! their value at the start of each sample interval and propagates the exact
//! exponential. `RungeKutta4` integrates with fixed substeps and evaluates the
//! source and parameters pointwise at each substep midpoint.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use thiserror::Error;

use crate::model::{
    effective_params, source_voltage, CircuitParams, FaultSpec, ModelError, NoiseSpec, Sample, SwitchSchedule, Trace,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("invalid simulation config: {0}")]
    Config(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    ClosedForm,
    RungeKutta4,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimConfig {
    pub duration: f64,
    pub sample_rate: f64,
    pub method: Method,
    /// Integrator step, only used by [`Method::RungeKutta4`].
    pub rk_step: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            duration: 40.0,
            sample_rate: 10.0,
            method: Method::ClosedForm,
            rk_step: 0.01,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        if !(self.duration.is_finite() && self.duration > 0.0) {
            return Err(SimError::Config(format!("duration must be > 0, got {}", self.duration)));
        }
        if !(self.sample_rate.is_finite() && self.sample_rate > 0.0) {
            return Err(SimError::Config(format!(
                "sample_rate must be > 0, got {}",
                self.sample_rate
            )));
        }
        if !(self.rk_step.is_finite() && self.rk_step > 0.0) {
            return Err(SimError::Config(format!("rk_step must be > 0, got {}", self.rk_step)));
        }
        if self.rk_step > 1.0 / self.sample_rate + 1e-12 {
            return Err(SimError::Config(format!(
                "rk_step {} exceeds the sample interval {}",
                self.rk_step,
                1.0 / self.sample_rate
            )));
        }
        Ok(())
    }

    /// Number of sample intervals; samples are taken at `k / sample_rate` for `k = 0..=n`.
    pub fn intervals(&self) -> usize {
        (self.duration * self.sample_rate + 1e-9).floor() as usize
    }
}

/// Exact storage voltage after `dt` seconds with a constant source `v_src`.
pub fn closed_form_segment(v_c_start: f64, v_src: f64, params: &CircuitParams, dt: f64) -> f64 {
    v_src + (v_c_start - v_src) * (-dt * params.elastance / (params.r0 + params.r1)).exp()
}

fn derivative(vc: f64, u: f64, p: &CircuitParams) -> f64 {
    (u - vc) * p.elastance / (p.r0 + p.r1)
}

fn observe(t: f64, s1: u8, u: f64, vc: f64, p: &CircuitParams) -> Sample {
    let i = (u - vc) / (p.r0 + p.r1);
    Sample {
        t,
        v0: u,
        v1: u - i * p.r0,
        v2: vc,
        s1,
    }
}

/// Simulates the circuit and returns a sampled trace.
pub fn simulate(
    params: &CircuitParams,
    schedule: &SwitchSchedule,
    fault: Option<&FaultSpec>,
    noise: Option<&NoiseSpec>,
    cfg: &SimConfig,
) -> Result<Trace, SimError> {
    cfg.validate()?;
    params.validate()?;
    schedule.validate()?;
    if let Some(f) = fault {
        f.validate()?;
    }

    let plant_at = |t: f64| match fault {
        Some(f) => effective_params(params, f, t),
        None => *params,
    };

    let n = cfg.intervals();
    let time = |k: usize| k as f64 / cfg.sample_rate;
    let mut samples = Vec::with_capacity(n + 1);
    let mut vc = 0.0;

    for k in 0..=n {
        let t = time(k);
        let p = plant_at(t);
        let u = source_voltage(schedule, &p, t);
        samples.push(observe(t, schedule.state_at(t), u, vc, &p));
        if k == n {
            break;
        }
        let t_next = time(k + 1);
        let dt = t_next - t;
        vc = match cfg.method {
            Method::ClosedForm => closed_form_segment(vc, u, &p, dt),
            Method::RungeKutta4 => {
                let steps = ((dt / cfg.rk_step) - 1e-9).ceil().max(1.0) as usize;
                let h = dt / steps as f64;
                let mut y = vc;
                for j in 0..steps {
                    let mid = t + (j as f64 + 0.5) * h;
                    let p = plant_at(mid);
                    let u = source_voltage(schedule, &p, mid);
                    let k1 = derivative(y, u, &p);
                    let k2 = derivative(y + 0.5 * h * k1, u, &p);
                    let k3 = derivative(y + 0.5 * h * k2, u, &p);
                    let k4 = derivative(y + h * k3, u, &p);
                    y += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
                }
                y
            }
        };
    }

    if let Some(noise) = noise {
        add_noise(&mut samples, noise)?;
    }

    let mut trace = Trace::new(samples, None)?;
    trace.meta.insert(
        "method".into(),
        match cfg.method {
            Method::ClosedForm => "closed_form".into(),
            Method::RungeKutta4 => "rk4".into(),
        },
    );
    if let Some(f) = fault {
        trace
            .meta
            .insert("fault".into(), format!("{}x{}@{}", f.target, f.factor, f.onset));
    }
    if let Some(nz) = noise {
        trace.meta.insert("sigma".into(), nz.sigma_volts.to_string());
        trace.meta.insert("seed".into(), nz.seed.to_string());
    }
    Ok(trace)
}

fn add_noise(samples: &mut [Sample], noise: &NoiseSpec) -> Result<(), SimError> {
    if noise.sigma_volts == 0.0 {
        return Ok(());
    }
    let normal = Normal::new(0.0, noise.sigma_volts).map_err(|e| SimError::Config(format!("noise: {e}")))?;
    let mut rng = ChaCha8Rng::seed_from_u64(noise.seed);
    for s in samples {
        s.v0 += normal.sample(&mut rng);
        s.v1 += normal.sample(&mut rng);
        s.v2 += normal.sample(&mut rng);
    }
    Ok(())
}
