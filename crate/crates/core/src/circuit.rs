//! The complete test chain: device, amplifier, feedback network, front end,
//! output diplexer, detector, controller, stimulus sources and noise model.

use crate::analysis;
use crate::blocks::{
    DetectorParams, DiplexerParams, FeedbackNetwork, FrontEndParams, OpAmpParams, TiaStage, WaveformSpec,
};
use crate::controller::ControllerConfig;
use crate::error::{InvalidParam, SimError};
use crate::memristor::{MemristorParams, Mode};
use crate::metrics::NoiseModel;

/// What the input waveform represents.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Drive {
    /// Voltage from the test equipment, through attenuator, OTA and the
    /// compliance buffer.
    Voltage,
    /// Current injected straight into the summing node. Only the compliance
    /// clamp applies.
    Current,
}

impl Drive {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "voltage" => Some(Self::Voltage),
            "current" => Some(Self::Current),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Voltage => "voltage",
            Self::Current => "current",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sources {
    pub input: WaveformSpec,
    pub drive: Drive,
    /// Tone on the non-inverting input used to read the gain state.
    pub reading: WaveformSpec,
    /// Times at which a RESET command is handed to the controller.
    pub reset_commands: Vec<f64>,
}

impl Default for Sources {
    fn default() -> Self {
        Self {
            input: WaveformSpec::constant(0.0),
            drive: Drive::Voltage,
            reading: WaveformSpec::sine(0.0, 1.0),
            reset_commands: Vec::new(),
        }
    }
}

/// Reading tone amplitude used when the tone is on.
pub const DEFAULT_READING_AMPLITUDE: f64 = 10e-3;
/// Reading frequency as a multiple of the HRS bandwidth.
pub const READING_BW_MULTIPLE: f64 = 2.5;

#[derive(Debug, Clone, PartialEq)]
pub struct CircuitConfig {
    pub memristor: MemristorParams,
    pub initial_mode: Mode,
    /// When false the device is frozen in its initial state.
    pub switching_enabled: bool,
    pub opamp: OpAmpParams,
    pub feedback: FeedbackNetwork,
    pub front_end: FrontEndParams,
    pub diplexer: DiplexerParams,
    pub detector: DetectorParams,
    pub controller: ControllerConfig,
    pub sources: Sources,
    pub noise: NoiseModel,
    /// Ground-leg resistance assumed by the closed-form reading gain.
    pub r_c: f64,
}

impl CircuitConfig {
    /// Nominal chain with the reading tone on and every frequency-dependent
    /// default derived from the HRS response.
    pub fn nominal() -> Self {
        let mut c = Self::undetermined();
        c.sources.reading = WaveformSpec::sine(DEFAULT_READING_AMPLITUDE, 1.0);
        c.derive_defaults(DerivedFields::all())
            .expect("nominal configuration is valid");
        c
    }

    /// Nominal blocks with placeholder values in the derived fields.
    pub fn undetermined() -> Self {
        Self {
            memristor: MemristorParams::default(),
            initial_mode: Mode::Hrs,
            switching_enabled: true,
            opamp: OpAmpParams::default(),
            feedback: FeedbackNetwork::default(),
            front_end: FrontEndParams::default(),
            diplexer: DiplexerParams { f_cross: 1.0 },
            detector: DetectorParams::default(),
            controller: ControllerConfig::default(),
            sources: Sources::default(),
            noise: NoiseModel::default(),
            r_c: 1e3,
        }
    }

    pub fn stage(&self) -> TiaStage<'_> {
        TiaStage {
            opamp: &self.opamp,
            network: &self.feedback,
            c_in: self.front_end.c_in,
            r_reset_in: self.front_end.r_reset_in,
        }
    }

    /// Nominal feedback resistance in each device state.
    pub fn r_eff_nominal(&self, mode: Mode) -> f64 {
        self.feedback.r_eff(match mode {
            Mode::Hrs => self.memristor.r_off,
            Mode::Lrs => self.memristor.r_on,
        })
    }

    pub fn reading_enabled(&self) -> bool {
        self.sources.reading.amplitude != 0.0
    }

    /// Fills the fields selected in `which` from the rest of the chain:
    /// reading frequency, diplexer crossover, detector thresholds.
    pub fn derive_defaults(&mut self, which: DerivedFields) -> Result<(), SimError> {
        let bw_hrs = analysis::hrs_bandwidth(self)?;
        if which.reading_frequency {
            self.sources.reading.frequency = READING_BW_MULTIPLE * bw_hrs;
        }
        if which.f_cross {
            self.diplexer.f_cross = (bw_hrs * self.sources.reading.frequency).sqrt();
        }
        if which.thresholds {
            let (hrs, lrs) = analysis::detector_levels(self);
            let mid = 0.5 * (hrs + lrs);
            let half = (0.1 * (hrs - lrs).abs()).max(1e-3);
            self.controller.v_det_hi = mid + half;
            self.controller.v_det_lo = mid - half;
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), InvalidParam> {
        self.memristor.validate()?;
        self.opamp.validate()?;
        self.feedback.validate()?;
        self.front_end.validate()?;
        self.diplexer.validate()?;
        self.detector.validate()?;
        self.controller.validate()?;
        self.sources.input.validate("sources.input")?;
        self.sources.reading.validate("sources.reading")?;
        if self.sources.reset_commands.iter().any(|t| !(*t >= 0.0)) {
            return Err(InvalidParam::new("sources", "reset command times >= 0"));
        }
        if !(self.r_c > 0.0) {
            return Err(InvalidParam::new("analysis", "r_c > 0"));
        }
        Ok(())
    }
}

/// Selects which derived defaults [`CircuitConfig::derive_defaults`] fills.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct DerivedFields {
    pub reading_frequency: bool,
    pub f_cross: bool,
    pub thresholds: bool,
}

impl DerivedFields {
    pub fn all() -> Self {
        Self {
            reading_frequency: true,
            f_cross: true,
            thresholds: true,
        }
    }
}
