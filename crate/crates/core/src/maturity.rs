//! Maturity assessment of a diagnosis pipeline along the maintenance control loop.

use std::collections::BTreeSet;
use std::fmt;
use std::fmt::Write as _;
use std::str::FromStr;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MaturityError {
    #[error("invalid profile: {0}")]
    InvalidProfile(String),
    #[error("unknown {what} `{value}`")]
    Unknown { what: &'static str, value: String },
}

/// Steps of the maintenance control loop, in order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Decision {
    Detect,
    Isolate,
    Identify,
    Prognose,
    Recover,
}

impl Decision {
    pub const ALL: [Decision; 5] = [
        Decision::Detect,
        Decision::Isolate,
        Decision::Identify,
        Decision::Prognose,
        Decision::Recover,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Decision::Detect => "Detect",
            Decision::Isolate => "Isolate",
            Decision::Identify => "Identify",
            Decision::Prognose => "Prognose",
            Decision::Recover => "Recover",
        }
    }
}

impl fmt::Display for Decision {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Decision {
    type Err = MaturityError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Decision::ALL
            .into_iter()
            .find(|d| d.as_str().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| MaturityError::Unknown {
                what: "decision",
                value: s.to_string(),
            })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub enum CausalityMode {
    #[default]
    None,
    Associational,
    ModelBased,
}

impl CausalityMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            CausalityMode::None => "None",
            CausalityMode::Associational => "Associational",
            CausalityMode::ModelBased => "ModelBased",
        }
    }
}

impl fmt::Display for CausalityMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for CausalityMode {
    type Err = MaturityError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        [
            CausalityMode::None,
            CausalityMode::Associational,
            CausalityMode::ModelBased,
        ]
        .into_iter()
        .find(|m| m.as_str().eq_ignore_ascii_case(s.trim()))
        .ok_or_else(|| MaturityError::Unknown {
            what: "causality mode",
            value: s.to_string(),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Level {
    None,
    Monitoring,
    Understanding,
    Predicting,
    Deciding,
}

impl Level {
    pub fn as_str(&self) -> &'static str {
        match self {
            Level::None => "None",
            Level::Monitoring => "Monitoring",
            Level::Understanding => "Understanding",
            Level::Predicting => "Predicting",
            Level::Deciding => "Deciding",
        }
    }

    /// Decisions a level adds on top of the one below it.
    fn requires(&self) -> &'static [Decision] {
        match self {
            Level::None => &[],
            Level::Monitoring => &[Decision::Detect],
            Level::Understanding => &[Decision::Isolate, Decision::Identify],
            Level::Predicting => &[Decision::Prognose],
            Level::Deciding => &[Decision::Recover],
        }
    }

    const TIERS: [Level; 4] = [
        Level::Monitoring,
        Level::Understanding,
        Level::Predicting,
        Level::Deciding,
    ];
}

impl fmt::Display for Level {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct CapabilityProfile {
    pub computed_decisions: BTreeSet<Decision>,
    pub causality_mode: CausalityMode,
    pub translation_notes: Vec<String>,
    pub computability_notes: Vec<String>,
}

impl CapabilityProfile {
    pub fn new(decisions: &[Decision], mode: CausalityMode) -> Self {
        Self {
            computed_decisions: decisions.iter().copied().collect(),
            causality_mode: mode,
            ..Default::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Aspect {
    Translation,
    Computability,
    Causality,
    Maturity,
}

impl Aspect {
    pub fn as_str(&self) -> &'static str {
        match self {
            Aspect::Translation => "translation",
            Aspect::Computability => "computability",
            Aspect::Causality => "causality",
            Aspect::Maturity => "maturity",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AspectStatus {
    Satisfied,
    Partial,
    Missing,
}

impl AspectStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            AspectStatus::Satisfied => "satisfied",
            AspectStatus::Partial => "partial",
            AspectStatus::Missing => "missing",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AspectReport {
    pub aspect: Aspect,
    pub status: AspectStatus,
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MaturityReport {
    pub level: Level,
    pub gaps: Vec<Decision>,
    pub aspects: Vec<AspectReport>,
}

const ASSOCIATIONAL_CAVEATS: [&str; 4] = [
    "detection and isolation beyond the range of the training history is risky",
    "observed associations are not causal explanations; a DAG must state them",
    "features such as time since the switch associate with faults without causing them",
    "features do not necessarily indicate the magnitude of the fault",
];

const MODEL_BASED_NOTES: [&str; 3] = [
    "residuals follow from engineering relations, so extrapolation beyond recorded data is grounded",
    "causal structure is given by the model equations",
    "residual magnitudes carry the size of the fault, enabling identification",
];

/// Level is the highest tier whose decisions are all present contiguously
/// from Detect; gaps are the decisions of the loop that are not computed.
pub fn assess(profile: &CapabilityProfile) -> MaturityReport {
    let have = &profile.computed_decisions;
    let mut level = Level::None;
    for tier in Level::TIERS {
        if tier.requires().iter().all(|d| have.contains(d)) {
            level = tier;
        } else {
            break;
        }
    }
    let covered: BTreeSet<Decision> = Level::TIERS
        .iter()
        .filter(|t| **t <= level)
        .flat_map(|t| t.requires().iter().copied())
        .collect();
    let gaps: Vec<Decision> = Decision::ALL.into_iter().filter(|d| !have.contains(d)).collect();

    let mut translation = profile.translation_notes.clone();
    let translation_status = if translation.is_empty() {
        translation.push("no assumptions recorded about how measurements represent the system".into());
        AspectStatus::Partial
    } else {
        AspectStatus::Satisfied
    };

    let mut computability = profile.computability_notes.clone();
    computability.extend(
        have.iter()
            .filter(|d| !covered.contains(d))
            .map(|d| format!("{d} is computed but does not count until every decision of its tier and the tiers below is computed")),
    );
    let computability_status = match level {
        Level::None => AspectStatus::Missing,
        Level::Deciding => AspectStatus::Satisfied,
        _ => AspectStatus::Partial,
    };

    let (causality_status, causality) = match profile.causality_mode {
        CausalityMode::None => (
            AspectStatus::Missing,
            vec!["no causal account of the computed decisions".to_string()],
        ),
        CausalityMode::Associational => (
            AspectStatus::Partial,
            ASSOCIATIONAL_CAVEATS.iter().map(|s| s.to_string()).collect(),
        ),
        CausalityMode::ModelBased => (
            AspectStatus::Satisfied,
            MODEL_BASED_NOTES.iter().map(|s| s.to_string()).collect(),
        ),
    };

    let maturity_note = match gaps.first() {
        Some(next) => format!("level {level}; next missing decision: {next}"),
        None => format!("level {level}; every decision of the loop is computed"),
    };
    let maturity_status = match level {
        Level::None => AspectStatus::Missing,
        Level::Deciding => AspectStatus::Satisfied,
        _ => AspectStatus::Partial,
    };

    MaturityReport {
        level,
        gaps,
        aspects: vec![
            AspectReport {
                aspect: Aspect::Translation,
                status: translation_status,
                notes: translation,
            },
            AspectReport {
                aspect: Aspect::Computability,
                status: computability_status,
                notes: computability,
            },
            AspectReport {
                aspect: Aspect::Causality,
                status: causality_status,
                notes: causality,
            },
            AspectReport {
                aspect: Aspect::Maturity,
                status: maturity_status,
                notes: vec![maturity_note],
            },
        ],
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PipelineKind {
    ModelBased,
    ExperienceBased,
}

impl FromStr for PipelineKind {
    type Err = MaturityError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "mb" | "model-based" => Ok(PipelineKind::ModelBased),
            "eb" | "experience-based" => Ok(PipelineKind::ExperienceBased),
            _ => Err(MaturityError::Unknown {
                what: "pipeline",
                value: s.to_string(),
            }),
        }
    }
}

/// Which artefacts a pipeline has produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PipelineArtifacts {
    pub fsm: bool,
    pub thresholds: bool,
    pub identifiers: bool,
    pub trained_model: bool,
}

impl PipelineArtifacts {
    /// Everything the given pipeline kind can produce.
    pub fn full(kind: PipelineKind) -> Self {
        match kind {
            PipelineKind::ModelBased => Self {
                fsm: true,
                thresholds: true,
                identifiers: true,
                trained_model: false,
            },
            PipelineKind::ExperienceBased => Self {
                fsm: true,
                thresholds: false,
                identifiers: false,
                trained_model: true,
            },
        }
    }
}

pub fn profile_from_pipeline(kind: PipelineKind, a: PipelineArtifacts) -> Result<CapabilityProfile, MaturityError> {
    if a.identifiers && !a.thresholds {
        return Err(MaturityError::InvalidProfile("identifiers require thresholds".into()));
    }
    let mut decisions = Vec::new();
    let profile = match kind {
        PipelineKind::ModelBased => {
            if a.trained_model {
                return Err(MaturityError::InvalidProfile(
                    "a model-based pipeline has no trained model".into(),
                ));
            }
            if a.thresholds {
                decisions.push(Decision::Detect);
                if a.fsm {
                    decisions.push(Decision::Isolate);
                }
                if a.identifiers {
                    decisions.push(Decision::Identify);
                }
            }
            let mut p = CapabilityProfile::new(&decisions, CausalityMode::ModelBased);
            p.translation_notes = vec![
                "measured voltages are taken as the bond-graph efforts of the circuit".into(),
                "ARR_2 assumes piecewise-constant source voltage between switch transitions".into(),
            ];
            p.computability_notes =
                vec!["identification is only possible while power is exchanged after a switch".into()];
            p
        }
        PipelineKind::ExperienceBased => {
            if a.thresholds || a.identifiers {
                return Err(MaturityError::InvalidProfile(
                    "an experience-based pipeline has no thresholds or identifiers".into(),
                ));
            }
            if a.trained_model {
                decisions.push(Decision::Detect);
                if a.fsm {
                    decisions.push(Decision::Isolate);
                }
            }
            let mut p = CapabilityProfile::new(&decisions, CausalityMode::Associational);
            p.translation_notes = vec!["labeled training traces are assumed to cover the operating range".into()];
            p.computability_notes = vec!["the classifier reports a class, not a fault magnitude".into()];
            p
        }
    };
    Ok(profile)
}

impl MaturityReport {
    /// `key: value` blocks.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "level: {}", self.level);
        let gaps: Vec<&str> = self.gaps.iter().map(Decision::as_str).collect();
        let _ = writeln!(
            out,
            "gaps: {}",
            if gaps.is_empty() {
                "none".into()
            } else {
                gaps.join(", ")
            }
        );
        for a in &self.aspects {
            let _ = writeln!(out);
            let _ = writeln!(out, "aspect: {}", a.aspect.as_str());
            let _ = writeln!(out, "status: {}", a.status.as_str());
            for n in &a.notes {
                let _ = writeln!(out, "note: {n}");
            }
        }
        out
    }

    /// Indented tree of `key = value` lines, one leaf per line, stable order.
    pub fn to_tree(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "report.level = {}", self.level);
        for (i, g) in self.gaps.iter().enumerate() {
            let _ = writeln!(out, "report.gaps.{i} = {g}");
        }
        for a in &self.aspects {
            let key = a.aspect.as_str();
            let _ = writeln!(out, "report.aspects.{key}.status = {}", a.status.as_str());
            for (i, n) in a.notes.iter().enumerate() {
                let _ = writeln!(out, "report.aspects.{key}.notes.{i} = {n}");
            }
        }
        out
    }
}
