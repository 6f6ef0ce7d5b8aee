//! Fault detection and isolation workbench for a switched RRC circuit.
//!
//! Two diagnosis pipelines share one fault signature matrix type:
//! the model-based one evaluates analytical redundancy relations on measured
//! voltages ([`mb`]); the experience-based one learns a random forest and reads
//! fault signatures off permutation importances ([`eb`]). Around them sit a
//! circuit simulator ([`sim`]), causal DAG tools ([`causal`]) and a maturity
//! assessment ([`maturity`]).

pub mod case_study;
pub mod causal;
pub mod eb;
pub mod fsm;
pub mod io;
pub mod maturity;
pub mod mb;
pub mod model;
pub mod sim;

pub use causal::{CausalError, Dag};
pub use eb::{EbError, FeatureMatrix, Forest, ForestConfig};
pub use fsm::{FaultSignatureMatrix, FsmError, FsmKind, Isolation};
pub use io::FormatError;
pub use maturity::{assess, CapabilityProfile, Level, MaturityError, MaturityReport};
pub use mb::{MbError, Thresholds};
pub use model::{CircuitParams, FaultSpec, FaultTarget, Label, ModelError, NoiseSpec, Sample, SwitchSchedule, Trace};
pub use sim::{simulate, Method, SimConfig, SimError};

/// Any error raised by this crate.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Fsm(#[from] FsmError),
    #[error(transparent)]
    Mb(#[from] MbError),
    #[error(transparent)]
    Eb(#[from] EbError),
    #[error(transparent)]
    Causal(#[from] CausalError),
    #[error(transparent)]
    Maturity(#[from] MaturityError),
    #[error(transparent)]
    Format(#[from] FormatError),
}
