use crate::error::InvalidParam;

/// Attenuator, OTA and compliance-limited current buffer feeding the TIA
/// summing node, plus the passive elements that load that node.
#[derive(Debug, Clone, PartialEq)]
pub struct FrontEndParams {
    pub atten_gain: f64,
    /// OTA transconductance (S).
    pub gm: f64,
    pub ota_i_max: f64,
    pub i_compliance: f64,
    /// Resistor between the reset pulse source and the inverting input. With
    /// the pulse idle it also sets the non-inverting gain of the reading tone.
    pub r_reset_in: f64,
    /// Capacitance from the summing node to ground.
    pub c_in: f64,
    /// Series output resistor into the 50 ohm diplexer port.
    pub r_out: f64,
    pub compliance_enabled: bool,
}

impl Default for FrontEndParams {
    fn default() -> Self {
        Self {
            atten_gain: 0.01,
            gm: 0.01,
            ota_i_max: 5e-3,
            i_compliance: 500e-6,
            r_reset_in: 1e3,
            c_in: 2e-12,
            r_out: 50.0,
            compliance_enabled: true,
        }
    }
}

/// Port impedance seen by the output resistor.
pub const DIPLEXER_PORT_OHMS: f64 = 50.0;

impl FrontEndParams {
    pub fn validate(&self) -> Result<(), InvalidParam> {
        let ctx = "front_end";
        if !(self.atten_gain > 0.0 && self.atten_gain <= 1.0) {
            return Err(InvalidParam::new(ctx, "0 < atten_gain <= 1"));
        }
        if !(self.gm > 0.0) {
            return Err(InvalidParam::new(ctx, "gm > 0"));
        }
        if !(self.ota_i_max > 0.0) {
            return Err(InvalidParam::new(ctx, "ota_i_max > 0"));
        }
        if !(self.i_compliance > 0.0) {
            return Err(InvalidParam::new(ctx, "i_compliance > 0"));
        }
        if !(self.r_reset_in > 0.0) {
            return Err(InvalidParam::new(ctx, "r_reset_in > 0"));
        }
        if !(self.c_in >= 0.0) {
            return Err(InvalidParam::new(ctx, "c_in >= 0"));
        }
        if !(self.r_out >= 0.0) {
            return Err(InvalidParam::new(ctx, "r_out >= 0"));
        }
        Ok(())
    }

    /// Voltage division from the TIA output into the diplexer port.
    pub fn output_divider(&self) -> f64 {
        DIPLEXER_PORT_OHMS / (self.r_out + DIPLEXER_PORT_OHMS)
    }

    /// Applies the compliance clamp to an already formed current.
    pub fn limit(&self, i: f64) -> FrontEndOutput {
        if self.compliance_enabled && i.abs() > self.i_compliance {
            FrontEndOutput {
                current: self.i_compliance.copysign(i),
                compliance: true,
            }
        } else {
            FrontEndOutput {
                current: i,
                compliance: false,
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrontEndOutput {
    pub current: f64,
    /// True while the compliance clamp binds.
    pub compliance: bool,
}

/// Converts the test-equipment voltage into the summing-node current.
pub fn front_end_current(v_in: f64, p: &FrontEndParams) -> FrontEndOutput {
    let raw = (p.gm * p.atten_gain * v_in).clamp(-p.ota_i_max, p.ota_i_max);
    p.limit(raw)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_gm() -> FrontEndParams {
        // gm * atten = 1 S so the input voltage reads directly as amps.
        FrontEndParams {
            gm: 1.0,
            atten_gain: 1.0,
            ota_i_max: 1.0,
            ..FrontEndParams::default()
        }
    }

    #[test]
    fn zero_in_zero_out() {
        let out = front_end_current(0.0, &FrontEndParams::default());
        assert_eq!(out.current, 0.0);
        assert!(!out.compliance);
    }

    #[test]
    fn below_compliance_is_identity() {
        let out = front_end_current(400e-6, &unit_gm());
        assert_eq!(out.current, 400e-6);
        assert!(!out.compliance);
    }

    #[test]
    fn compliance_clamps_and_flags() {
        let out = front_end_current(2e-3, &unit_gm());
        assert_eq!(out.current, 500e-6);
        assert!(out.compliance);
        let neg = front_end_current(-2e-3, &unit_gm());
        assert_eq!(neg.current, -500e-6);
    }

    #[test]
    fn clamp_is_idempotent() {
        let p = unit_gm();
        let once = front_end_current(3e-3, &p).current;
        assert_eq!(p.limit(once).current, once);
    }

    #[test]
    fn default_maps_one_volt_to_100_microamps() {
        let out = front_end_current(1.0, &FrontEndParams::default());
        assert!((out.current - 100e-6).abs() < 1e-15);
    }

    #[test]
    fn linear_below_clamps() {
        let p = FrontEndParams::default();
        let a = front_end_current(0.3, &p).current;
        let b = front_end_current(0.7, &p).current;
        let ab = front_end_current(1.0, &p).current;
        assert!((a + b - ab).abs() < 1e-18);
    }
}
