//! Behavioral models of the analog blocks in the signal chain: stimulus
//! sources, the attenuator/OTA/compliance front end, the transimpedance
//! stage, the output diplexer and the logarithmic detector.

pub mod detector;
pub mod diplexer;
pub mod front_end;
pub mod tia;
pub mod waveform;

pub use detector::{detector_step, DetectorParams, DetectorState};
pub use diplexer::{diplexer_step, DiplexerParams, DiplexerState};
pub use front_end::{front_end_current, FrontEndOutput, FrontEndParams};
pub use tia::{
    tia_step, FeedbackElement, FeedbackNetwork, OpAmpParams, Orientation, TiaDrive, TiaOutput, TiaStage,
    TiaState,
};
pub use waveform::{WaveKind, WaveformSpec};
