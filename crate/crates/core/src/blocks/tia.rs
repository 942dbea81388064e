use std::f64::consts::PI;

use crate::error::{InvalidParam, SimError};

/// Single-pole op-amp with a hard output clamp.
#[derive(Debug, Clone, PartialEq)]
pub struct OpAmpParams {
    pub a0: f64,
    /// Gain-bandwidth product (Hz).
    pub gbw: f64,
    pub v_out_min: f64,
    pub v_out_max: f64,
}

impl Default for OpAmpParams {
    fn default() -> Self {
        Self {
            a0: 1e5,
            gbw: 250e6,
            v_out_min: -1.2,
            v_out_max: 1.2,
        }
    }
}

impl OpAmpParams {
    pub fn validate(&self) -> Result<(), InvalidParam> {
        let ctx = "opamp";
        if !(self.a0 > 1.0) || !self.a0.is_finite() {
            return Err(InvalidParam::new(ctx, "a0 > 1"));
        }
        if !(self.gbw > 0.0) || !self.gbw.is_finite() {
            return Err(InvalidParam::new(ctx, "gbw > 0"));
        }
        if !(self.v_out_min < 0.0 && 0.0 < self.v_out_max) {
            return Err(InvalidParam::new(ctx, "v_out_min < 0 < v_out_max"));
        }
        Ok(())
    }

    /// Open-loop pole time constant.
    pub fn tau(&self) -> f64 {
        self.a0 / (2.0 * PI * self.gbw)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FeedbackElement {
    Memristor,
    Fixed,
    MemristorParallelFixed,
}

impl FeedbackElement {
    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "memristor" => Self::Memristor,
            "fixed" => Self::Fixed,
            "memristor_parallel_fixed" => Self::MemristorParallelFixed,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Memristor => "memristor",
            Self::Fixed => "fixed",
            Self::MemristorParallelFixed => "memristor_parallel_fixed",
        }
    }
}

/// How the two feedback nodes map onto the memristor terminals.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Orientation {
    /// Device voltage is `v_n - v_o`: a large positive input current (negative
    /// output) drives SET, a negative reset pulse (positive output) drives RESET.
    Standard,
    /// Device voltage is `v_o - v_n`.
    Reversed,
}

impl Orientation {
    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "standard" => Self::Standard,
            "reversed" => Self::Reversed,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Standard => "standard",
            Self::Reversed => "reversed",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeedbackNetwork {
    pub element: FeedbackElement,
    pub r_fixed: f64,
    pub c_f: f64,
    pub orientation: Orientation,
}

impl Default for FeedbackNetwork {
    fn default() -> Self {
        Self {
            element: FeedbackElement::Memristor,
            r_fixed: 10e3,
            c_f: 1e-12,
            orientation: Orientation::Standard,
        }
    }
}

impl FeedbackNetwork {
    pub fn validate(&self) -> Result<(), InvalidParam> {
        let ctx = "feedback";
        if self.element != FeedbackElement::Memristor && !(self.r_fixed > 0.0) {
            return Err(InvalidParam::new(ctx, "r_fixed > 0 when used"));
        }
        if !(self.c_f >= 0.0) {
            return Err(InvalidParam::new(ctx, "c_f >= 0"));
        }
        Ok(())
    }

    /// Resistance between output and summing node for a given device value.
    pub fn r_eff(&self, r_mem: f64) -> f64 {
        match self.element {
            FeedbackElement::Memristor => r_mem,
            FeedbackElement::Fixed => self.r_fixed,
            FeedbackElement::MemristorParallelFixed => r_mem * self.r_fixed / (r_mem + self.r_fixed),
        }
    }

    pub fn has_memristor(&self) -> bool {
        self.element != FeedbackElement::Fixed
    }

    pub fn device_voltage(&self, v_n: f64, v_o: f64) -> f64 {
        match self.orientation {
            Orientation::Standard => v_n - v_o,
            Orientation::Reversed => v_o - v_n,
        }
    }
}

/// Everything the two-node TIA solve needs besides its inputs.
#[derive(Debug, Clone, Copy)]
pub struct TiaStage<'a> {
    pub opamp: &'a OpAmpParams,
    pub network: &'a FeedbackNetwork,
    pub c_in: f64,
    pub r_reset_in: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct TiaState {
    pub v_o: f64,
    pub v_n: f64,
}

/// Sources evaluated at one end of a step.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct TiaDrive {
    pub i_in: f64,
    pub v_read: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TiaOutput {
    pub state: TiaState,
    pub v_dev: f64,
    /// Current through the resistive feedback path, output to summing node.
    pub i_feedback: f64,
    /// Current through the memristor alone (zero for a fixed resistor).
    pub i_mem: f64,
    pub i_reset: f64,
    /// Output the op-amp would reach without the clamp.
    pub v_o_unclamped: f64,
    pub saturated: bool,
}

/// Advances the summing-node/output pair by one trapezoidal step.
///
/// Unknowns `x = [v_o, v_n]` obey `M x' = A x + b(t)` with
///
/// ```text
/// M = [[tau, 0], [c_f, -(c_f + c_in)]]
/// A = [[-1, -a0], [-g, g + g_r]]
/// b = [a0 v_read, -i_in - g_r v_rst]
/// ```
///
/// The reset voltage `v_rst` is held over the step. When neither capacitor is
/// present the node row is algebraic and is imposed at the end point. A
/// clamped output is treated as a voltage source at the rail and the node
/// row is re-solved with it.
pub fn tia_step(
    prev: TiaState,
    start: TiaDrive,
    end: TiaDrive,
    v_rst: f64,
    stage: &TiaStage<'_>,
    r_mem: f64,
    dt: f64,
) -> Result<TiaOutput, SimError> {
    let inputs = [
        prev.v_o,
        prev.v_n,
        start.i_in,
        start.v_read,
        end.i_in,
        end.v_read,
        v_rst,
        r_mem,
        dt,
    ];
    if inputs.iter().any(|x| !x.is_finite()) {
        return Err(InvalidParam::new("tia_step", "non-finite input").into());
    }
    if !(dt > 0.0) {
        return Err(InvalidParam::new("tia_step", "dt > 0").into());
    }
    let op = stage.opamp;
    let tau = op.tau();
    let a0 = op.a0;
    let c_f = stage.network.c_f;
    let c_in = stage.c_in;
    let r_eff = stage.network.r_eff(r_mem);
    let g = 1.0 / r_eff;
    let g_r = 1.0 / stage.r_reset_in;
    let h2 = 0.5 * dt;

    let m = [[tau, 0.0], [c_f, -(c_f + c_in)]];
    let a = [[-1.0, -a0], [-g, g + g_r]];
    let b = |d: TiaDrive| [a0 * d.v_read, -d.i_in - g_r * v_rst];
    let (b0, b1) = (b(start), b(end));
    let x0 = [prev.v_o, prev.v_n];

    let mut lhs = [[0.0; 2]; 2];
    let mut rhs = [0.0; 2];
    for r in 0..2 {
        for c in 0..2 {
            lhs[r][c] = m[r][c] - h2 * a[r][c];
        }
        rhs[r] = (0..2).map(|c| (m[r][c] + h2 * a[r][c]) * x0[c]).sum::<f64>() + h2 * (b0[r] + b1[r]);
    }
    if c_f + c_in == 0.0 {
        // Purely resistive node: A_2 x_1 + b_2(t_1) = 0.
        lhs[1] = a[1];
        rhs[1] = -b1[1];
    }

    let det = lhs[0][0] * lhs[1][1] - lhs[0][1] * lhs[1][0];
    let scale = (lhs[0][0].abs() + lhs[0][1].abs()) * (lhs[1][0].abs() + lhs[1][1].abs());
    if !(det.abs() > 1e-14 * scale) || det == 0.0 {
        return Err(SimError::SingularCompanion { det, dt });
    }
    let v_o_free = (rhs[0] * lhs[1][1] - lhs[0][1] * rhs[1]) / det;
    let v_n_free = (lhs[0][0] * rhs[1] - rhs[0] * lhs[1][0]) / det;

    let clamped = v_o_free.clamp(op.v_out_min, op.v_out_max);
    let saturated = clamped != v_o_free;
    let (v_o, v_n) = if saturated {
        (clamped, (rhs[1] - lhs[1][0] * clamped) / lhs[1][1])
    } else {
        (v_o_free, v_n_free)
    };

    let i_feedback = (v_o - v_n) * g;
    let i_mem = if stage.network.has_memristor() {
        (v_o - v_n) / r_mem
    } else {
        0.0
    };
    Ok(TiaOutput {
        state: TiaState { v_o, v_n },
        v_dev: stage.network.device_voltage(v_n, v_o),
        i_feedback,
        i_mem,
        i_reset: (v_rst - v_n) * g_r,
        v_o_unclamped: v_o_free,
        saturated,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn stage<'a>(op: &'a OpAmpParams, net: &'a FeedbackNetwork) -> TiaStage<'a> {
        TiaStage {
            opamp: op,
            network: net,
            c_in: 2e-12,
            r_reset_in: 1e3,
        }
    }

    fn settle(st: &TiaStage<'_>, drive: TiaDrive, v_rst: f64, r_mem: f64, steps: usize) -> TiaOutput {
        let mut s = TiaState::default();
        let mut out = None;
        for _ in 0..steps {
            let o = tia_step(s, drive, drive, v_rst, st, r_mem, 1e-9).unwrap();
            s = o.state;
            out = Some(o);
        }
        out.unwrap()
    }

    /// Closed-form DC solution of the two-node network.
    fn dc_oracle(i_in: f64, r: f64, a0: f64, r_rst: f64) -> (f64, f64) {
        let v_n = i_in / ((a0 + 1.0) / r + 1.0 / r_rst);
        (-a0 * v_n, v_n)
    }

    #[test]
    fn quiescent_stays_at_zero() {
        let (op, net) = (OpAmpParams::default(), FeedbackNetwork::default());
        let o = settle(&stage(&op, &net), TiaDrive::default(), 0.0, 15e3, 100);
        assert_eq!(o.state, TiaState::default());
        assert!(!o.saturated);
    }

    #[test]
    fn dc_transimpedance_matches_nodal_solution() {
        let (op, net) = (OpAmpParams::default(), FeedbackNetwork::default());
        let drive = TiaDrive {
            i_in: 10e-6,
            v_read: 0.0,
        };
        let o = settle(&stage(&op, &net), drive, 0.0, 15e3, 20_000);
        let (v_o, v_n) = dc_oracle(10e-6, 15e3, 1e5, 1e3);
        assert!((o.state.v_o - v_o).abs() / v_o.abs() < 1e-9);
        assert!((o.state.v_n - v_n).abs() < 1e-12);
        // Error against the ideal -i R is one over the loop gain a0 / (1 + R / r_rst).
        let inv_loop_gain = (1.0 + 15e3 / 1e3) / op.a0;
        assert!((o.state.v_o + 0.15).abs() / 0.15 <= inv_loop_gain * 1.001);
        // Virtual ground.
        assert!(o.state.v_n.abs() <= o.state.v_o.abs() / op.a0 * (1.0 + 1e-9));
    }

    #[test]
    fn overdrive_pins_negative_rail() {
        let (op, net) = (OpAmpParams::default(), FeedbackNetwork::default());
        let drive = TiaDrive {
            i_in: 200e-6,
            v_read: 0.0,
        };
        let o = settle(&stage(&op, &net), drive, 0.0, 15e3, 2_000);
        assert_eq!(o.state.v_o, op.v_out_min);
        assert!(o.saturated);
        assert!(o.v_o_unclamped < op.v_out_min);
    }

    #[test]
    fn positive_input_gives_negative_output_and_set_polarity() {
        let (op, net) = (OpAmpParams::default(), FeedbackNetwork::default());
        let drive = TiaDrive {
            i_in: 1e-6,
            v_read: 0.0,
        };
        let o = settle(&stage(&op, &net), drive, 0.0, 15e3, 2_000);
        assert!(o.state.v_o < 0.0);
        assert!(o.v_dev > 0.0);
    }

    #[test]
    fn reset_pulse_gain_is_inverting() {
        let (op, net) = (OpAmpParams::default(), FeedbackNetwork::default());
        let o = settle(&stage(&op, &net), TiaDrive::default(), -1.0, 120.0, 2_000);
        assert!((o.state.v_o - 0.12).abs() < 1e-4);
        assert!(o.v_dev < 0.0);
    }

    #[test]
    fn resistive_only_node_is_algebraic() {
        let op = OpAmpParams::default();
        let net = FeedbackNetwork {
            c_f: 0.0,
            ..FeedbackNetwork::default()
        };
        let st = TiaStage {
            c_in: 0.0,
            ..stage(&op, &net)
        };
        let drive = TiaDrive {
            i_in: 10e-6,
            v_read: 0.0,
        };
        let o = settle(&st, drive, 0.0, 15e3, 5_000);
        let (v_o, _) = dc_oracle(10e-6, 15e3, 1e5, 1e3);
        assert!((o.state.v_o - v_o).abs() / v_o.abs() < 1e-9);
    }

    #[test]
    fn rejects_non_finite() {
        let (op, net) = (OpAmpParams::default(), FeedbackNetwork::default());
        let bad = TiaDrive {
            i_in: f64::NAN,
            v_read: 0.0,
        };
        assert!(tia_step(TiaState::default(), bad, bad, 0.0, &stage(&op, &net), 1e3, 1e-9).is_err());
    }

    #[test]
    fn superposition_below_clamps() {
        let (op, net) = (OpAmpParams::default(), FeedbackNetwork::default());
        let st = stage(&op, &net);
        let run = |i: f64, vr: f64| {
            let mut s = TiaState::default();
            for k in 0..500 {
                let t0 = k as f64 * 1e-9;
                let d = |t: f64| TiaDrive {
                    i_in: i * (1e7 * t).sin(),
                    v_read: vr * (3e7 * t).sin(),
                };
                s = tia_step(s, d(t0), d(t0 + 1e-9), 0.0, &st, 15e3, 1e-9)
                    .unwrap()
                    .state;
            }
            s
        };
        let a = run(5e-6, 0.0);
        let b = run(0.0, 0.01);
        let ab = run(5e-6, 0.01);
        assert!((a.v_o + b.v_o - ab.v_o).abs() < 1e-12);
        assert!((a.v_n + b.v_n - ab.v_n).abs() < 1e-12);
    }

    #[test]
    fn parallel_network_resistance() {
        let net = FeedbackNetwork {
            element: FeedbackElement::MemristorParallelFixed,
            r_fixed: 10e3,
            ..FeedbackNetwork::default()
        };
        assert!((net.r_eff(15e3) - 6e3).abs() < 1e-9);
    }
}
