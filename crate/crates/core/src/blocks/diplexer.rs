use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::InvalidParam;

/// Complementary first-order low-pass / high-pass pair sharing one corner.
#[derive(Debug, Clone, PartialEq)]
pub struct DiplexerParams {
    pub f_cross: f64,
}

impl DiplexerParams {
    pub fn validate(&self) -> Result<(), InvalidParam> {
        if !(self.f_cross > 0.0) || !self.f_cross.is_finite() {
            return Err(InvalidParam::new("diplexer", "f_cross > 0"));
        }
        Ok(())
    }

    pub fn lowpass(&self, f: f64) -> Complex64 {
        Complex64::new(1.0, 0.0) / Complex64::new(1.0, f / self.f_cross)
    }

    pub fn highpass(&self, f: f64) -> Complex64 {
        let jx = Complex64::new(0.0, f / self.f_cross);
        jx / (1.0 + jx)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct DiplexerState {
    x_prev: f64,
    lp: f64,
}

/// Trapezoidal update of the low-pass branch; the high-pass branch is the
/// exact complement so the two outputs always sum to the input.
pub fn diplexer_step(v_in: f64, state: &mut DiplexerState, p: &DiplexerParams, dt: f64) -> (f64, f64) {
    let k = PI * p.f_cross * dt;
    let lp = ((1.0 - k) * state.lp + k * (state.x_prev + v_in)) / (1.0 + k);
    state.lp = lp;
    state.x_prev = v_in;
    (lp, v_in - lp)
}
