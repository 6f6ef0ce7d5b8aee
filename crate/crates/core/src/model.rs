//! Engineering model of the switched RRC circuit and the shared trace data model.
//!
//! The circuit is a source `u_Se = A·x(t)` feeding `R0` and `R1` in series with a
//! storage element. The storage element is parameterised by its elastance
//! `E = 1/C`, so the time constant is `τ = (R0 + R1) / E`.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

/// Errors raised while validating model values or traces.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("trace is empty")]
    EmptyTrace,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("trace samples are not uniformly spaced at index {index} (dt = {dt}, expected {expected})")]
    NonUniformSpacing { index: usize, dt: f64, expected: f64 },
    #[error("trace time is not strictly increasing at index {0}")]
    NonMonotonicTime(usize),
    #[error("unknown label `{0}`")]
    UnknownLabel(String),
}

/// Spacing tolerance for uniformly sampled traces, in seconds.
pub const SPACING_TOLERANCE: f64 = 1e-9;

/// Physical parameters of the circuit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CircuitParams {
    /// Resistance between the source and the middle node, ohms.
    pub r0: f64,
    /// Resistance between the middle node and the storage element, ohms.
    pub r1: f64,
    /// Inverse capacitance, 1/F.
    pub elastance: f64,
    /// Source voltage while the switch is closed, volts.
    pub source_amplitude: f64,
}

impl CircuitParams {
    /// Design values: 10 kΩ, 10 kΩ, 100 µF (elastance 1e4), 5 V.
    pub const fn nominal() -> Self {
        Self {
            r0: 1.0e4,
            r1: 1.0e4,
            elastance: 1.0e4,
            source_amplitude: 5.0,
        }
    }

    pub fn new(r0: f64, r1: f64, elastance: f64, source_amplitude: f64) -> Result<Self, ModelError> {
        let p = Self {
            r0,
            r1,
            elastance,
            source_amplitude,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let positive = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(ModelError::InvalidParameter(format!("{name} must be > 0, got {v}")))
            }
        };
        positive("r0", self.r0)?;
        positive("r1", self.r1)?;
        positive("elastance", self.elastance)?;
        if !(self.source_amplitude.is_finite() && self.source_amplitude >= 0.0) {
            return Err(ModelError::InvalidParameter(format!(
                "source_amplitude must be >= 0, got {}",
                self.source_amplitude
            )));
        }
        Ok(())
    }

    pub fn capacitance(&self) -> f64 {
        1.0 / self.elastance
    }

    /// `τ = (r0 + r1) / E`, seconds.
    pub fn time_constant(&self) -> f64 {
        (self.r0 + self.r1) / self.elastance
    }
}

impl Default for CircuitParams {
    fn default() -> Self {
        Self::nominal()
    }
}

/// Pulse train driving the switch `S1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SwitchSchedule {
    pub period: f64,
    /// Fraction of the period spent in the closed (`x = 1`) state.
    pub duty: f64,
    pub start_state: u8,
}

impl Default for SwitchSchedule {
    fn default() -> Self {
        Self {
            period: 20.0,
            duty: 0.5,
            start_state: 1,
        }
    }
}

impl SwitchSchedule {
    pub fn new(period: f64, duty: f64, start_state: u8) -> Result<Self, ModelError> {
        let s = Self {
            period,
            duty,
            start_state,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if !(self.period.is_finite() && self.period > 0.0) {
            return Err(ModelError::InvalidParameter(format!(
                "period must be > 0, got {}",
                self.period
            )));
        }
        if !(self.duty > 0.0 && self.duty < 1.0) {
            return Err(ModelError::InvalidParameter(format!(
                "duty must lie in (0, 1), got {}",
                self.duty
            )));
        }
        if self.start_state > 1 {
            return Err(ModelError::InvalidParameter(format!(
                "start_state must be 0 or 1, got {}",
                self.start_state
            )));
        }
        Ok(())
    }

    /// Switch position `x(t)`.
    ///
    /// Starting in state 1 the pulse is high for `duty·period`, then low. Starting
    /// in state 0 it is low for `(1 - duty)·period`, then high. Phases within 1e-9 s
    /// of an edge snap onto the edge so that the value is periodic on floating grids.
    pub fn state_at(&self, t: f64) -> u8 {
        let mut phase = t.rem_euclid(self.period);
        if self.period - phase < SPACING_TOLERANCE {
            phase = 0.0;
        }
        let first_len = if self.start_state == 1 {
            self.duty * self.period
        } else {
            (1.0 - self.duty) * self.period
        };
        let in_first = phase < first_len - SPACING_TOLERANCE;
        if in_first {
            self.start_state
        } else {
            1 - self.start_state
        }
    }
}

/// `u_Se(t) = A·x(t)`.
pub fn source_voltage(schedule: &SwitchSchedule, params: &CircuitParams, t: f64) -> f64 {
    f64::from(schedule.state_at(t)) * params.source_amplitude
}

/// Which physical parameter a fault drifts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum FaultTarget {
    R0,
    /// Storage element. The factor is applied to the capacitance, so the
    /// elastance is divided by it.
    Elastance,
}

impl fmt::Display for FaultTarget {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FaultTarget::R0 => f.write_str("R0"),
            FaultTarget::Elastance => f.write_str("C"),
        }
    }
}

/// A parameter drift starting at `onset`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FaultSpec {
    pub target: FaultTarget,
    pub factor: f64,
    pub onset: f64,
}

impl FaultSpec {
    pub fn new(target: FaultTarget, factor: f64, onset: f64) -> Result<Self, ModelError> {
        let f = Self { target, factor, onset };
        f.validate()?;
        Ok(f)
    }

    /// Default decreased-resistance treatment: `R0 × 0.5` from t = 0.
    pub fn r0_down() -> Self {
        Self {
            target: FaultTarget::R0,
            factor: 0.5,
            onset: 0.0,
        }
    }

    /// Default increased-capacitance treatment: `C × 2` from t = 0.
    pub fn cap_up() -> Self {
        Self {
            target: FaultTarget::Elastance,
            factor: 2.0,
            onset: 0.0,
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if !(self.factor.is_finite() && self.factor > 0.0) {
            return Err(ModelError::InvalidParameter(format!(
                "fault factor must be > 0, got {}",
                self.factor
            )));
        }
        if !(self.onset.is_finite() && self.onset >= 0.0) {
            return Err(ModelError::InvalidParameter(format!(
                "fault onset must be >= 0, got {}",
                self.onset
            )));
        }
        Ok(())
    }

    pub fn is_active(&self, t: f64) -> bool {
        t >= self.onset
    }
}

/// Parameters of the plant at time `t` under `fault`.
pub fn effective_params(nominal: &CircuitParams, fault: &FaultSpec, t: f64) -> CircuitParams {
    let mut p = *nominal;
    if fault.is_active(t) {
        match fault.target {
            FaultTarget::R0 => p.r0 *= fault.factor,
            FaultTarget::Elastance => p.elastance /= fault.factor,
        }
    }
    p
}

/// Additive Gaussian measurement noise on the three voltage channels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseSpec {
    pub sigma_volts: f64,
    pub seed: u64,
}

impl NoiseSpec {
    pub fn new(sigma_volts: f64, seed: u64) -> Result<Self, ModelError> {
        if !(sigma_volts.is_finite() && sigma_volts >= 0.0) {
            return Err(ModelError::InvalidParameter(format!(
                "sigma_volts must be >= 0, got {sigma_volts}"
            )));
        }
        Ok(Self { sigma_volts, seed })
    }
}

/// One measurement instant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample {
    pub t: f64,
    pub v0: f64,
    pub v1: f64,
    pub v2: f64,
    pub s1: u8,
}

/// Ground-truth condition of a trace.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Label {
    Healthy,
    R0Down,
    CapUp,
}

impl Label {
    pub const ALL: [Label; 3] = [Label::Healthy, Label::R0Down, Label::CapUp];

    pub fn as_str(&self) -> &'static str {
        match self {
            Label::Healthy => "Healthy",
            Label::R0Down => "R0Down",
            Label::CapUp => "CapUp",
        }
    }

    /// Fault treatment that produces this label, if any.
    pub fn default_fault(&self) -> Option<FaultSpec> {
        match self {
            Label::Healthy => None,
            Label::R0Down => Some(FaultSpec::r0_down()),
            Label::CapUp => Some(FaultSpec::cap_up()),
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Label {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "Healthy" => Ok(Label::Healthy),
            "R0Down" => Ok(Label::R0Down),
            "CapUp" => Ok(Label::CapUp),
            other => Err(ModelError::UnknownLabel(other.to_string())),
        }
    }
}

/// A uniformly sampled measurement history.
#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    samples: Vec<Sample>,
    pub label: Option<Label>,
    /// Generation settings (seed, noise, fault), informational only.
    pub meta: BTreeMap<String, String>,
}

impl Trace {
    /// Builds a trace, checking it is non-empty, strictly increasing in time and
    /// uniformly spaced.
    pub fn new(samples: Vec<Sample>, label: Option<Label>) -> Result<Self, ModelError> {
        if samples.is_empty() {
            return Err(ModelError::EmptyTrace);
        }
        if samples.len() > 1 {
            let expected = samples[1].t - samples[0].t;
            for (i, w) in samples.windows(2).enumerate() {
                let dt = w[1].t - w[0].t;
                if dt.is_nan() || dt <= 0.0 {
                    return Err(ModelError::NonMonotonicTime(i + 1));
                }
                if (dt - expected).abs() > SPACING_TOLERANCE {
                    return Err(ModelError::NonUniformSpacing {
                        index: i + 1,
                        dt,
                        expected,
                    });
                }
            }
        }
        Ok(Self {
            samples,
            label,
            meta: BTreeMap::new(),
        })
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Sample spacing in seconds (0 for a single-sample trace).
    pub fn dt(&self) -> f64 {
        if self.samples.len() < 2 {
            0.0
        } else {
            self.samples[1].t - self.samples[0].t
        }
    }

    pub fn with_label(mut self, label: Label) -> Self {
        self.label = Some(label);
        self
    }

    /// Indices at which `s1` differs from the previous sample.
    pub fn transition_indices(&self) -> Vec<usize> {
        self.samples
            .windows(2)
            .enumerate()
            .filter(|(_, w)| w[0].s1 != w[1].s1)
            .map(|(i, _)| i + 1)
            .collect()
    }
}

/// Every switch change in `trace`, as `(time of first sample in new state, new state)`.
pub fn switch_transitions(trace: &Trace) -> Result<Vec<(f64, u8)>, ModelError> {
    if trace.is_empty() {
        return Err(ModelError::EmptyTrace);
    }
    Ok(trace
        .transition_indices()
        .into_iter()
        .map(|i| {
            let s = trace.samples()[i];
            (s.t, s.s1)
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn square_wave(duration: f64, rate: f64) -> Trace {
        let sched = SwitchSchedule::default();
        let n = (duration * rate).round() as usize;
        let samples = (0..n)
            .map(|k| {
                let t = k as f64 / rate;
                Sample {
                    t,
                    v0: 0.0,
                    v1: 0.0,
                    v2: 0.0,
                    s1: sched.state_at(t),
                }
            })
            .collect();
        Trace::new(samples, None).unwrap()
    }

    #[test]
    fn source_voltage_examples() {
        let s = SwitchSchedule::new(20.0, 0.5, 1).unwrap();
        let p = CircuitParams::nominal();
        assert_eq!(source_voltage(&s, &p, 3.0), 5.0);
        assert_eq!(source_voltage(&s, &p, 15.0), 0.0);
        assert_eq!(source_voltage(&s, &p, 20.0), 5.0);
        assert_eq!(source_voltage(&s, &p, 10.0), 0.0);
    }

    #[test]
    fn start_state_zero_is_low_first() {
        let s = SwitchSchedule::new(20.0, 0.25, 0).unwrap();
        assert_eq!(s.state_at(0.0), 0);
        assert_eq!(s.state_at(14.9), 0);
        assert_eq!(s.state_at(15.0), 1);
        assert_eq!(s.state_at(19.9), 1);
        assert_eq!(s.state_at(20.0), 0);
    }

    #[test]
    fn source_voltage_is_periodic_on_grid() {
        let p = CircuitParams::nominal();
        for sched in [
            SwitchSchedule::default(),
            SwitchSchedule::new(7.3, 0.3, 0).unwrap(),
            SwitchSchedule::new(0.9, 0.77, 1).unwrap(),
        ] {
            for k in 0..1000 {
                let t = k as f64 * 0.04;
                assert_eq!(
                    source_voltage(&sched, &p, t),
                    source_voltage(&sched, &p, t + sched.period),
                    "t = {t}, {sched:?}"
                );
            }
        }
    }

    #[test]
    fn effective_params_examples() {
        let n = CircuitParams::nominal();
        let p = effective_params(&n, &FaultSpec::new(FaultTarget::R0, 0.5, 0.0).unwrap(), 1.0);
        assert_eq!(p.r0, 5.0e3);
        assert_eq!(
            (p.r1, p.elastance, p.source_amplitude),
            (n.r1, n.elastance, n.source_amplitude)
        );

        let p = effective_params(&n, &FaultSpec::new(FaultTarget::Elastance, 2.0, 0.0).unwrap(), 1.0);
        assert_eq!(p.elastance, 5.0e3);
        assert_eq!(p.r0, n.r0);

        let p = effective_params(&n, &FaultSpec::new(FaultTarget::R0, 1.0, 0.0).unwrap(), 1.0);
        assert_eq!(p, n);
    }

    #[test]
    fn effective_params_before_and_after_onset() {
        let n = CircuitParams::nominal();
        let f = FaultSpec::new(FaultTarget::R0, 0.8, 5.0).unwrap();
        assert_eq!(effective_params(&n, &f, 4.9), n);
        let a = effective_params(&n, &f, 5.0);
        for t in [5.0, 7.5, 100.0, 1e6] {
            assert_eq!(effective_params(&n, &f, t), a);
        }
    }

    #[test]
    fn invalid_values_rejected() {
        assert!(CircuitParams::new(0.0, 1.0, 1.0, 5.0).is_err());
        assert!(CircuitParams::new(1.0, 1.0, 1.0, -1.0).is_err());
        assert!(SwitchSchedule::new(0.0, 0.5, 1).is_err());
        assert!(SwitchSchedule::new(20.0, 1.0, 1).is_err());
        assert!(SwitchSchedule::new(20.0, 0.5, 2).is_err());
        assert!(FaultSpec::new(FaultTarget::R0, 0.0, 0.0).is_err());
        assert!(FaultSpec::new(FaultTarget::R0, 1.0, -1.0).is_err());
        assert!(NoiseSpec::new(-0.1, 0).is_err());
    }

    #[test]
    fn trace_validation() {
        assert_eq!(Trace::new(vec![], None), Err(ModelError::EmptyTrace));
        let s = |t| Sample {
            t,
            v0: 0.0,
            v1: 0.0,
            v2: 0.0,
            s1: 0,
        };
        assert!(Trace::new(vec![s(0.0), s(0.1), s(0.3)], None).is_err());
        assert!(Trace::new(vec![s(0.0), s(0.0)], None).is_err());
        assert!(Trace::new(vec![s(0.0), s(0.1), s(0.2 + 1e-12)], None).is_ok());
    }

    #[test]
    fn transitions_constant_switch() {
        let samples = (0..50)
            .map(|k| Sample {
                t: k as f64 / 10.0,
                v0: 5.0,
                v1: 5.0,
                v2: 5.0,
                s1: 1,
            })
            .collect();
        let tr = Trace::new(samples, None).unwrap();
        assert!(switch_transitions(&tr).unwrap().is_empty());
    }

    #[test]
    fn transitions_single_drop() {
        let tr = square_wave(20.0, 10.0);
        assert_eq!(switch_transitions(&tr).unwrap(), vec![(10.0, 0)]);
    }

    #[test]
    fn transitions_square_wave() {
        let tr = square_wave(40.0, 10.0);
        assert_eq!(switch_transitions(&tr).unwrap(), vec![(10.0, 0), (20.0, 1), (30.0, 0)]);
    }

    #[test]
    fn label_round_trip() {
        for l in Label::ALL {
            assert_eq!(l.as_str().parse::<Label>().unwrap(), l);
        }
        assert!("Broken".parse::<Label>().is_err());
    }
}
