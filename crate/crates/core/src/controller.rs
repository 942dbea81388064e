//! Gain-state monitor and RESET pulse sequencer.
//!
//! The controller never inspects the device directly. It classifies the
//! memristor from the detector level with a hysteresis band, issues a
//! rectangular RESET pulse on command, and afterwards holds the line quiet
//! for a verification window before reporting whether the device reads HRS.

use std::fmt;

use crate::error::InvalidParam;

#[derive(Debug, Clone, PartialEq)]
pub struct ControllerConfig {
    pub v_det_hi: f64,
    pub v_det_lo: f64,
    /// Pulse level applied at the reset injection resistor (negative).
    pub reset_amplitude: f64,
    pub reset_max_width: f64,
    /// End the pulse as soon as the detector reads HRS.
    pub auto_terminate: bool,
    pub verify_window: f64,
    /// Issue a RESET on its own after this long classified LRS. Off if `None`.
    pub auto_reset_after: Option<f64>,
}

impl Default for ControllerConfig {
    fn default() -> Self {
        Self {
            v_det_hi: 0.6,
            v_det_lo: 0.4,
            reset_amplitude: -7.5,
            reset_max_width: 5e-6,
            auto_terminate: false,
            verify_window: 10e-6,
            auto_reset_after: None,
        }
    }
}

impl ControllerConfig {
    pub fn validate(&self) -> Result<(), InvalidParam> {
        let ctx = "controller";
        if !(self.v_det_lo < self.v_det_hi) {
            return Err(InvalidParam::new(ctx, "v_det_lo < v_det_hi"));
        }
        if !(self.reset_amplitude < 0.0) {
            return Err(InvalidParam::new(ctx, "reset_amplitude < 0"));
        }
        if !(self.reset_max_width > 0.0) {
            return Err(InvalidParam::new(ctx, "reset_max_width > 0"));
        }
        if !(self.verify_window >= 0.0) {
            return Err(InvalidParam::new(ctx, "verify_window >= 0"));
        }
        if let Some(t) = self.auto_reset_after {
            if !(t > 0.0) {
                return Err(InvalidParam::new(ctx, "auto_reset_after > 0"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Monitor,
    ApplyReset,
    Verify,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Classification {
    Hrs,
    Lrs,
    Unknown,
}

impl fmt::Display for Classification {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Hrs => "HRS",
            Self::Lrs => "LRS",
            Self::Unknown => "UNKNOWN",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ControllerEvent {
    ResetCmd,
    PulseStart,
    PulseEnd,
    VerifyOk,
    VerifyFail,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControllerState {
    pub phase: Phase,
    pub classified: Classification,
    pub pulse_elapsed: f64,
    pub verify_elapsed: f64,
    /// Time spent classified LRS while monitoring.
    pub lrs_elapsed: f64,
}

impl Default for ControllerState {
    fn default() -> Self {
        Self {
            phase: Phase::Monitor,
            classified: Classification::Unknown,
            pulse_elapsed: 0.0,
            verify_elapsed: 0.0,
            lrs_elapsed: 0.0,
        }
    }
}

pub fn classify_state(v_det: f64, prior: Classification, cfg: &ControllerConfig) -> Classification {
    if v_det >= cfg.v_det_hi {
        Classification::Hrs
    } else if v_det <= cfg.v_det_lo {
        Classification::Lrs
    } else {
        prior
    }
}

/// Advances the controller by one step and returns the reset-line voltage
/// for the next step. Events raised during the step are appended to `events`.
pub fn controller_step(
    state: &mut ControllerState,
    v_det: f64,
    reset_command: bool,
    dt: f64,
    cfg: &ControllerConfig,
    events: &mut Vec<ControllerEvent>,
) -> f64 {
    state.classified = classify_state(v_det, state.classified, cfg);
    match state.phase {
        Phase::Monitor => {
            if state.classified == Classification::Lrs {
                state.lrs_elapsed += dt;
            } else {
                state.lrs_elapsed = 0.0;
            }
            let auto = cfg
                .auto_reset_after
                .is_some_and(|limit| state.lrs_elapsed >= limit);
            if reset_command || auto {
                events.push(ControllerEvent::ResetCmd);
                events.push(ControllerEvent::PulseStart);
                state.phase = Phase::ApplyReset;
                state.lrs_elapsed = 0.0;
                state.pulse_elapsed = dt;
                cfg.reset_amplitude
            } else {
                0.0
            }
        }
        Phase::ApplyReset => {
            let detected = cfg.auto_terminate && state.classified == Classification::Hrs;
            let exhausted = state.pulse_elapsed + dt > cfg.reset_max_width * (1.0 + 1e-9);
            if detected || exhausted {
                events.push(ControllerEvent::PulseEnd);
                state.phase = Phase::Verify;
                state.pulse_elapsed = 0.0;
                state.verify_elapsed = 0.0;
                0.0
            } else {
                state.pulse_elapsed += dt;
                cfg.reset_amplitude
            }
        }
        Phase::Verify => {
            state.verify_elapsed += dt;
            if state.verify_elapsed >= cfg.verify_window * (1.0 - 1e-9) {
                events.push(if state.classified == Classification::Hrs {
                    ControllerEvent::VerifyOk
                } else {
                    ControllerEvent::VerifyFail
                });
                state.phase = Phase::Monitor;
                state.verify_elapsed = 0.0;
            }
            0.0
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> ControllerConfig {
        ControllerConfig {
            v_det_hi: 0.8,
            v_det_lo: 0.4,
            reset_max_width: 10e-9,
            verify_window: 5e-9,
            ..ControllerConfig::default()
        }
    }

    #[test]
    fn classification_thresholds_and_hold() {
        let c = cfg();
        assert_eq!(classify_state(0.9, Classification::Lrs, &c), Classification::Hrs);
        assert_eq!(classify_state(0.6, Classification::Lrs, &c), Classification::Lrs);
        assert_eq!(classify_state(0.6, Classification::Hrs, &c), Classification::Hrs);
        assert_eq!(classify_state(0.1, Classification::Hrs, &c), Classification::Lrs);
    }

    #[test]
    fn idle_without_command() {
        let c = cfg();
        let mut s = ControllerState::default();
        let mut ev = Vec::new();
        for _ in 0..1000 {
            assert_eq!(controller_step(&mut s, 0.1, false, 1e-9, &c, &mut ev), 0.0);
            assert_eq!(s.phase, Phase::Monitor);
        }
        assert!(ev.is_empty());
    }

    #[test]
    fn full_width_pulse_then_verify_fail() {
        let c = cfg();
        let mut s = ControllerState::default();
        let mut ev = Vec::new();
        let mut levels = vec![controller_step(&mut s, 0.1, true, 1e-9, &c, &mut ev)];
        for _ in 0..30 {
            levels.push(controller_step(&mut s, 0.1, false, 1e-9, &c, &mut ev));
        }
        let on = levels.iter().filter(|&&v| v != 0.0).count();
        assert_eq!(on, 10);
        assert!(levels.iter().all(|&v| v == 0.0 || v == c.reset_amplitude));
        assert_eq!(
            ev,
            vec![
                ControllerEvent::ResetCmd,
                ControllerEvent::PulseStart,
                ControllerEvent::PulseEnd,
                ControllerEvent::VerifyFail
            ]
        );
        assert_eq!(s.phase, Phase::Monitor);
    }

    #[test]
    fn auto_terminate_ends_pulse_on_hrs() {
        let c = ControllerConfig {
            auto_terminate: true,
            ..cfg()
        };
        let mut s = ControllerState::default();
        let mut ev = Vec::new();
        controller_step(&mut s, 0.1, true, 1e-9, &c, &mut ev);
        controller_step(&mut s, 0.1, false, 1e-9, &c, &mut ev);
        assert_eq!(s.phase, Phase::ApplyReset);
        let v = controller_step(&mut s, 0.9, false, 1e-9, &c, &mut ev);
        assert_eq!(v, 0.0);
        assert_eq!(s.phase, Phase::Verify);
        for _ in 0..5 {
            controller_step(&mut s, 0.9, false, 1e-9, &c, &mut ev);
        }
        assert_eq!(ev.last(), Some(&ControllerEvent::VerifyOk));
    }

    #[test]
    fn pulse_elapsed_only_while_applying() {
        let c = cfg();
        let mut s = ControllerState::default();
        let mut ev = Vec::new();
        for k in 0..40 {
            controller_step(&mut s, 0.1, k == 3, 1e-9, &c, &mut ev);
            if s.phase != Phase::ApplyReset {
                assert_eq!(s.pulse_elapsed, 0.0);
            }
            assert!(s.pulse_elapsed <= c.reset_max_width * (1.0 + 1e-9));
        }
    }

    #[test]
    fn auto_reset_policy() {
        let c = ControllerConfig {
            auto_reset_after: Some(5e-9),
            ..cfg()
        };
        let mut s = ControllerState::default();
        let mut ev = Vec::new();
        for _ in 0..6 {
            controller_step(&mut s, 0.1, false, 1e-9, &c, &mut ev);
        }
        assert_eq!(ev.first(), Some(&ControllerEvent::ResetCmd));
    }
}
