use crate::error::InvalidParam;

/// Logarithmic RF power detector: peak envelope follower, log transfer with
/// a clamp, and a first-order settling filter on the output.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectorParams {
    /// Output volts per decade of input amplitude.
    pub k_log: f64,
    /// Amplitude that maps to 0 V.
    pub v_ref: f64,
    pub v_floor: f64,
    pub tau_attack: f64,
    pub tau_decay: f64,
    pub tau_settle: f64,
    pub v_det_max: f64,
}

impl Default for DetectorParams {
    fn default() -> Self {
        Self {
            k_log: 0.5,
            v_ref: 1e-3,
            v_floor: 1e-4,
            tau_attack: 1e-9,
            tau_decay: 1e-6,
            tau_settle: 1e-6,
            v_det_max: 2.5,
        }
    }
}

impl DetectorParams {
    pub fn validate(&self) -> Result<(), InvalidParam> {
        let ctx = "detector";
        if !(self.tau_attack > 0.0 && self.tau_decay > 0.0 && self.tau_settle > 0.0) {
            return Err(InvalidParam::new(ctx, "all time constants > 0"));
        }
        if !(self.tau_attack < self.tau_decay) {
            return Err(InvalidParam::new(ctx, "tau_attack < tau_decay"));
        }
        if !(self.v_floor > 0.0) {
            return Err(InvalidParam::new(ctx, "v_floor > 0"));
        }
        if !(self.v_ref > 0.0) {
            return Err(InvalidParam::new(ctx, "v_ref > 0"));
        }
        if !(self.k_log > 0.0 && self.v_det_max > 0.0) {
            return Err(InvalidParam::new(ctx, "k_log > 0, v_det_max > 0"));
        }
        Ok(())
    }

    /// Static transfer from a steady envelope to the settled output.
    pub fn transfer(&self, envelope: f64) -> f64 {
        (self.k_log * (envelope.max(self.v_floor) / self.v_ref).log10()).clamp(0.0, self.v_det_max)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct DetectorState {
    pub envelope: f64,
    pub v_det: f64,
}

pub fn detector_step(v_hp: f64, state: &mut DetectorState, p: &DetectorParams, dt: f64) -> f64 {
    let a = v_hp.abs();
    let tau = if a > state.envelope {
        p.tau_attack
    } else {
        p.tau_decay
    };
    state.envelope += (a - state.envelope) * -(-dt / tau).exp_m1();
    let raw = p.transfer(state.envelope);
    state.v_det += (raw - state.v_det) * -(-dt / p.tau_settle).exp_m1();
    state.v_det
}
