//! Model-based diagnosis with analytical redundancy relations (ARRs).
//!
//! Two relations follow from the design model once `V0`, `V1` and `V2` are measured:
//!
//! * ARR_1, a current balance: `(V0 - V1)/R0 - (V1 - V2)/R1 = 0`.
//! * ARR_2, the first-order decay since the last switch transition:
//!   `(V0 - V2) - (V0x - V2x)·exp(-(t - t_s)·E/(R0 + R1)) = 0`, where `V0x`, `V2x`
//!   are measured at the transition instant `t_s`.
//!
//! Residuals are always evaluated against the nominal parameters. A residual is
//! active once `|r|` exceeds its threshold for `debounce` consecutive samples.

use std::collections::BTreeSet;

use thiserror::Error;

use crate::fsm::{FaultSignatureMatrix, FsmError, FsmKind, Isolation};
use crate::model::{CircuitParams, Label, ModelError, Sample, Trace};

/// Smallest threshold handed out by calibration.
pub const THRESHOLD_FLOOR: f64 = 1e-9;
/// Minimum number of residual samples required per relation during calibration.
pub const MIN_CALIBRATION_SAMPLES: usize = 100;
/// Samples with `|V1 - V2|` below this are skipped by [`identify_r0`].
pub const R0_GUARD_VOLTS: f64 = 1e-3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MbError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Fsm(#[from] FsmError),
    #[error("ARR_2 is not valid: no switch transition observed yet")]
    NotValid,
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("calibration needs at least {needed} residual samples, got {got}")]
    InsufficientCalibration { needed: usize, got: usize },
    #[error("calibration trace is labeled {0}, expected Healthy")]
    NotHealthy(Label),
    #[error("no active ARR_1 window")]
    NoActiveWindow,
    #[error("every active sample was guarded out")]
    DegenerateWindow,
    #[error("window must start at a switch transition (t = {0})")]
    NotAtTransition(f64),
    #[error("window contains another switch transition at t = {0}")]
    WindowSpansTransition(f64),
    #[error("V0 - V2 = {value} at t = {t}; log-linear fit needs strictly positive values")]
    LogDomainError { t: f64, value: f64 },
    #[error("window has too few samples or the signal is not decaying")]
    NotDecaying,
}

/// The parameter names an ARR depends on.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ArrDef {
    pub name: String,
    pub parameters: BTreeSet<String>,
}

impl ArrDef {
    pub fn new(name: &str, parameters: &[&str]) -> Self {
        Self {
            name: name.to_string(),
            parameters: parameters.iter().map(|p| p.to_string()).collect(),
        }
    }
}

/// ARR_1 and ARR_2 of the RRC circuit.
pub fn case_study_arrs() -> Vec<ArrDef> {
    vec![
        ArrDef::new("ARR_1", &["R0", "R1"]),
        ArrDef::new("ARR_2", &["R0", "R1", "C"]),
    ]
}

/// Row name used for a drift in `parameter`.
pub fn drift_row(parameter: &str) -> String {
    format!("Drift in {parameter}")
}

/// Indicator matrix of parameter presence: row per fault, column per ARR.
pub fn build_mb_fsm(arrs: &[ArrDef], faults: &[&str]) -> FaultSignatureMatrix {
    let fields = faults
        .iter()
        .map(|f| {
            arrs.iter()
                .map(|a| if a.parameters.contains(*f) { 1.0 } else { 0.0 })
                .collect()
        })
        .collect();
    FaultSignatureMatrix::new(
        faults.iter().map(|f| drift_row(f)).collect(),
        arrs.iter().map(|a| a.name.clone()).collect(),
        fields,
        FsmKind::ModelBased,
    )
    .expect("indicator matrix is well-formed by construction")
}

/// MB_FSM for drifts in R0 and C.
pub fn case_study_mb_fsm() -> FaultSignatureMatrix {
    build_mb_fsm(&case_study_arrs(), &["R0", "C"])
}

/// ARR_1 residual in amperes.
pub fn arr1(sample: &Sample, params: &CircuitParams) -> f64 {
    (sample.v0 - sample.v1) / params.r0 - (sample.v1 - sample.v2) / params.r1
}

/// Measurements at the most recent switch transition.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Anchor {
    pub t_s: f64,
    pub v0x: f64,
    pub v2x: f64,
}

impl Anchor {
    pub fn from_sample(s: &Sample) -> Self {
        Self {
            t_s: s.t,
            v0x: s.v0,
            v2x: s.v2,
        }
    }
}

/// ARR_2 residual in volts. Undefined until a transition has been observed.
pub fn arr2(sample: &Sample, params: &CircuitParams, anchor: Option<&Anchor>) -> Result<f64, MbError> {
    let a = anchor.ok_or(MbError::NotValid)?;
    if sample.t < a.t_s {
        return Err(MbError::NotValid);
    }
    let decay = (-(sample.t - a.t_s) * params.elastance / (params.r0 + params.r1)).exp();
    Ok((sample.v0 - sample.v2) - (a.v0x - a.v2x) * decay)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Thresholds {
    /// ARR_1 threshold, amperes.
    pub thr1: f64,
    /// ARR_2 threshold, volts.
    pub thr2: f64,
    pub debounce: usize,
}

impl Thresholds {
    pub fn new(thr1: f64, thr2: f64, debounce: usize) -> Result<Self, MbError> {
        let t = Self { thr1, thr2, debounce };
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<(), MbError> {
        if !(self.thr1 > 0.0 && self.thr2 > 0.0) {
            return Err(MbError::InvalidArgument(format!(
                "thresholds must be > 0, got thr1 = {}, thr2 = {}",
                self.thr1, self.thr2
            )));
        }
        if self.debounce == 0 {
            return Err(MbError::InvalidArgument("debounce must be >= 1".into()));
        }
        Ok(())
    }
}

/// One evaluated sample. `r2` is NaN until the first transition.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResidualPoint {
    pub t: f64,
    pub r1: f64,
    pub r2: f64,
    pub valid2: bool,
    pub active1: bool,
    pub active2: bool,
}

/// Residual evaluation carried one sample at a time.
///
/// ARR_2 is re-anchored at the first sample of every new switch state. That
/// anchor sample itself is marked invalid (the residual is zero there by
/// construction).
#[derive(Debug, Clone)]
pub struct ResidualEvaluator {
    params: CircuitParams,
    thresholds: Thresholds,
    prev_s1: Option<u8>,
    anchor: Option<Anchor>,
    run1: usize,
    run2: usize,
}

impl ResidualEvaluator {
    pub fn new(params: CircuitParams, thresholds: Thresholds) -> Self {
        Self {
            params,
            thresholds,
            prev_s1: None,
            anchor: None,
            run1: 0,
            run2: 0,
        }
    }

    pub fn anchor(&self) -> Option<&Anchor> {
        self.anchor.as_ref()
    }

    pub fn push(&mut self, s: &Sample) -> ResidualPoint {
        let transition = matches!(self.prev_s1, Some(p) if p != s.s1);
        self.prev_s1 = Some(s.s1);
        if transition {
            self.anchor = Some(Anchor::from_sample(s));
        }

        let r1 = arr1(s, &self.params);
        self.run1 = if r1.abs() > self.thresholds.thr1 {
            self.run1 + 1
        } else {
            0
        };

        let (r2, valid2) = match arr2(s, &self.params, self.anchor.as_ref()) {
            Ok(r) => (r, !transition),
            Err(_) => (f64::NAN, false),
        };
        self.run2 = if valid2 && r2.abs() > self.thresholds.thr2 {
            self.run2 + 1
        } else {
            0
        };

        ResidualPoint {
            t: s.t,
            r1,
            r2,
            valid2,
            active1: self.run1 >= self.thresholds.debounce,
            active2: self.run2 >= self.thresholds.debounce,
        }
    }
}

/// Per-window summary: a window runs from one switch transition to the next.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransitionWindow {
    pub t_start: f64,
    /// Time of the last sample in the window.
    pub t_end: f64,
    pub start_index: usize,
    pub end_index: usize,
    pub active1: bool,
    pub active2: bool,
}

impl TransitionWindow {
    pub fn activation(&self) -> [bool; 2] {
        [self.active1, self.active2]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResidualTrace {
    pub points: Vec<ResidualPoint>,
    /// Indices of samples at which the switch changed.
    pub transitions: Vec<usize>,
}

impl ResidualTrace {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn max_abs_r1(&self) -> f64 {
        self.points.iter().map(|p| p.r1.abs()).fold(0.0, f64::max)
    }

    /// Largest `|r2|` over valid samples.
    pub fn max_abs_r2(&self) -> f64 {
        self.points
            .iter()
            .filter(|p| p.valid2)
            .map(|p| p.r2.abs())
            .fold(0.0, f64::max)
    }

    /// Whether each residual was active anywhere in the trace.
    pub fn activation(&self) -> [bool; 2] {
        [
            self.points.iter().any(|p| p.active1),
            self.points.iter().any(|p| p.active2),
        ]
    }

    /// Windows starting at each observed transition.
    pub fn windows(&self) -> Vec<TransitionWindow> {
        let n = self.points.len();
        self.transitions
            .iter()
            .enumerate()
            .map(|(w, &start)| {
                let end = self.transitions.get(w + 1).map_or(n, |&next| next) - 1;
                let slice = &self.points[start..=end];
                TransitionWindow {
                    t_start: self.points[start].t,
                    t_end: self.points[end].t,
                    start_index: start,
                    end_index: end,
                    active1: slice.iter().any(|p| p.active1),
                    active2: slice.iter().any(|p| p.active2),
                }
            })
            .collect()
    }

    /// Isolation verdict for the whole trace against `fsm` (columns ARR_1, ARR_2).
    pub fn isolate(&self, fsm: &FaultSignatureMatrix) -> Result<Isolation, MbError> {
        Ok(fsm.isolate(&self.activation())?)
    }
}

/// Evaluates both residuals at every sample of `trace`.
pub fn evaluate_residuals(trace: &Trace, params: &CircuitParams, thr: &Thresholds) -> Result<ResidualTrace, MbError> {
    if trace.is_empty() {
        return Err(ModelError::EmptyTrace.into());
    }
    thr.validate()?;
    let mut eval = ResidualEvaluator::new(*params, *thr);
    let points = trace.samples().iter().map(|s| eval.push(s)).collect();
    Ok(ResidualTrace {
        points,
        transitions: trace.transition_indices(),
    })
}

fn std_dev(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt()
}

/// Sets each threshold to `k` standard deviations of the residual over healthy
/// data, floored at [`THRESHOLD_FLOOR`]. Debounce is 3 samples.
pub fn calibrate_thresholds(healthy_traces: &[Trace], params: &CircuitParams, k: f64) -> Result<Thresholds, MbError> {
    if !(k.is_finite() && k > 0.0) {
        return Err(MbError::InvalidArgument(format!("k must be > 0, got {k}")));
    }
    let mut r1 = Vec::new();
    let mut r2 = Vec::new();
    // Activation does not matter here, only the raw residuals.
    let probe = Thresholds {
        thr1: f64::INFINITY,
        thr2: f64::INFINITY,
        debounce: 1,
    };
    for trace in healthy_traces {
        if let Some(l) = trace.label {
            if l != Label::Healthy {
                return Err(MbError::NotHealthy(l));
            }
        }
        let res = evaluate_residuals(trace, params, &probe)?;
        for p in &res.points {
            r1.push(p.r1);
            if p.valid2 {
                r2.push(p.r2);
            }
        }
    }
    let got = r1.len().min(r2.len());
    if got < MIN_CALIBRATION_SAMPLES {
        return Err(MbError::InsufficientCalibration {
            needed: MIN_CALIBRATION_SAMPLES,
            got,
        });
    }
    Ok(Thresholds {
        thr1: (k * std_dev(&r1)).max(THRESHOLD_FLOOR),
        thr2: (k * std_dev(&r2)).max(THRESHOLD_FLOOR),
        debounce: 3,
    })
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Estimates the drifted R0 as the median, over samples where ARR_1 is active,
/// of the value of R0 that zeroes ARR_1: `(V0 - V1)·R1/(V1 - V2)`.
pub fn identify_r0(trace: &Trace, residuals: &ResidualTrace, params: &CircuitParams) -> Result<f64, MbError> {
    if residuals.len() != trace.len() {
        return Err(MbError::InvalidArgument(format!(
            "residual trace has {} points, trace has {} samples",
            residuals.len(),
            trace.len()
        )));
    }
    let mut any_active = false;
    let estimates: Vec<f64> = trace
        .samples()
        .iter()
        .zip(&residuals.points)
        .filter(|(_, p)| p.active1)
        .inspect(|_| any_active = true)
        .filter(|(s, _)| (s.v1 - s.v2).abs() >= R0_GUARD_VOLTS)
        .map(|(s, _)| (s.v0 - s.v1) * params.r1 / (s.v1 - s.v2))
        .collect();
    if !any_active {
        return Err(MbError::NoActiveWindow);
    }
    if estimates.is_empty() {
        return Err(MbError::DegenerateWindow);
    }
    Ok(median(estimates))
}

/// Fits `ln(V0 - V2) = a + b·t` over `window` (inclusive, seconds) and returns
/// `τ = -1/b`.
///
/// The window must start at the first sample of a switch state and must not
/// contain another transition.
pub fn identify_time_constant(trace: &Trace, window: (f64, f64)) -> Result<f64, MbError> {
    const EPS: f64 = 1e-9;
    let (t_s, t_end) = window;
    let samples = trace.samples();
    let start = samples
        .iter()
        .position(|s| (s.t - t_s).abs() <= EPS)
        .ok_or(MbError::NotAtTransition(t_s))?;
    if start == 0 || samples[start - 1].s1 == samples[start].s1 {
        return Err(MbError::NotAtTransition(t_s));
    }
    let state = samples[start].s1;
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for s in samples[start..].iter().take_while(|s| s.t <= t_end + EPS) {
        if s.s1 != state {
            return Err(MbError::WindowSpansTransition(s.t));
        }
        let y = s.v0 - s.v2;
        if y.is_nan() || y <= 0.0 {
            return Err(MbError::LogDomainError { t: s.t, value: y });
        }
        xs.push(s.t - t_s);
        ys.push(y.ln());
    }
    if xs.len() < 2 {
        return Err(MbError::NotDecaying);
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let slope = sxy / sxx;
    if slope.is_nan() || slope >= 0.0 {
        return Err(MbError::NotDecaying);
    }
    Ok(-1.0 / slope)
}

/// Capacitance implied by a time constant with nominal resistances, farads.
pub fn capacitance_from_time_constant(tau: f64, params: &CircuitParams) -> f64 {
    tau / (params.r0 + params.r1)
}

/// Outcome of the full model-based pipeline on one trace.
#[derive(Debug, Clone, PartialEq)]
pub struct MbReport {
    pub residuals: ResidualTrace,
    pub isolation: Isolation,
    /// Estimated R0 in ohms, when the verdict is a drift in R0.
    pub r0_estimate: Option<f64>,
    /// Estimated time constant in seconds, when the verdict is a drift in C.
    pub tau_estimate: Option<f64>,
}

impl MbReport {
    /// Verdict mapped onto a trace label; `None` for unknown or ambiguous outcomes.
    pub fn label(&self) -> Option<Label> {
        match &self.isolation {
            Isolation::NoFault => Some(Label::Healthy),
            Isolation::Isolated(c) if c.len() == 1 => {
                if c[0] == drift_row("R0") {
                    Some(Label::R0Down)
                } else if c[0] == drift_row("C") {
                    Some(Label::CapUp)
                } else {
                    None
                }
            }
            _ => None,
        }
    }
}

/// Detects, isolates against the case-study MB_FSM, and identifies the fault magnitude.
///
/// For a drift in C the time constant is fitted on the first window after a
/// rising transition, truncated to three nominal time constants.
pub fn diagnose(trace: &Trace, params: &CircuitParams, thr: &Thresholds) -> Result<MbReport, MbError> {
    let residuals = evaluate_residuals(trace, params, thr)?;
    let fsm = case_study_mb_fsm();
    let isolation = residuals.isolate(&fsm)?;
    let mut report = MbReport {
        residuals,
        isolation,
        r0_estimate: None,
        tau_estimate: None,
    };
    match report.label() {
        Some(Label::R0Down) => {
            report.r0_estimate = Some(identify_r0(trace, &report.residuals, params)?);
        }
        Some(Label::CapUp) => {
            let span = 3.0 * params.time_constant();
            let window = report
                .residuals
                .windows()
                .into_iter()
                .find(|w| trace.samples()[w.start_index].s1 == 1 && w.end_index > w.start_index)
                .map(|w| (w.t_start, w.t_end.min(w.t_start + span)));
            if let Some(w) = window {
                report.tau_estimate = Some(identify_time_constant(trace, w)?);
            }
        }
        _ => {}
    }
    Ok(report)
}
