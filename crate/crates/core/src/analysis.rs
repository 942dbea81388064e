//! Small-signal phasor analysis of the transimpedance stage with the device
//! frozen, plus the closed-form gain and bandwidth expressions.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::circuit::CircuitConfig;
use crate::error::{InvalidParam, SimError};
use crate::memristor::Mode;

/// Injection point of the small-signal source.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AcPort {
    /// Current into the summing node; the transfer is a transimpedance (ohm).
    Input,
    /// Reading tone at the non-inverting input (V/V).
    Reading,
    /// Reset line behind the injection resistor (V/V).
    Reset,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AcResult {
    pub port: AcPort,
    pub freqs: Vec<f64>,
    pub response: Vec<Complex64>,
    /// Magnitude at the lowest grid point, in dB (dBohm for the input port).
    pub dc_gain_db: f64,
    pub bw_3db: f64,
}

impl AcResult {
    pub fn magnitude_db(&self) -> Vec<f64> {
        self.response.iter().map(|z| 20.0 * z.norm().log10()).collect()
    }

    pub fn phase_deg(&self) -> Vec<f64> {
        self.response.iter().map(|z| z.arg().to_degrees()).collect()
    }
}

/// Output phasor per unit source at `port`, clamps ignored.
pub fn transfer(circuit: &CircuitConfig, r_mem: f64, port: AcPort, f: f64) -> Complex64 {
    let w = 2.0 * PI * f;
    let s = Complex64::new(0.0, w);
    let op = &circuit.opamp;
    let a = op.a0 / (1.0 + s * op.tau());
    let y_f = 1.0 / circuit.feedback.r_eff(r_mem) + s * circuit.feedback.c_f;
    let g_r = 1.0 / circuit.front_end.r_reset_in;
    let (i, v_read, v_rst) = match port {
        AcPort::Input => (1.0, 0.0, 0.0),
        AcPort::Reading => (0.0, 1.0, 0.0),
        AcPort::Reset => (0.0, 0.0, 1.0),
    };
    let denom = y_f * (1.0 + a) + g_r + s * circuit.front_end.c_in;
    let v_n = (i + a * y_f * v_read + g_r * v_rst) / denom;
    a * (v_read - v_n)
}

/// Log-spaced sweep of the transimpedance with the device frozen at `r_mem`.
pub fn ac_sweep(
    circuit: &CircuitConfig,
    r_mem: f64,
    f_min: f64,
    f_max: f64,
    points: usize,
) -> Result<AcResult, SimError> {
    ac_sweep_port(circuit, r_mem, AcPort::Input, f_min, f_max, points)
}

pub fn ac_sweep_port(
    circuit: &CircuitConfig,
    r_mem: f64,
    port: AcPort,
    f_min: f64,
    f_max: f64,
    points: usize,
) -> Result<AcResult, SimError> {
    if !(f_min > 0.0 && f_min < f_max && f_max.is_finite()) {
        return Err(InvalidParam::new("ac", "0 < f_min < f_max").into());
    }
    if points < 50 {
        return Err(InvalidParam::new("ac", "points >= 50").into());
    }
    if !(r_mem > 0.0) {
        return Err(InvalidParam::new("ac", "r_mem > 0").into());
    }
    let ratio = (f_max / f_min).ln();
    let freqs: Vec<f64> = (0..points)
        .map(|k| {
            if k + 1 == points {
                f_max
            } else {
                f_min * (ratio * k as f64 / (points - 1) as f64).exp()
            }
        })
        .collect();
    let response: Vec<Complex64> = freqs.iter().map(|&f| transfer(circuit, r_mem, port, f)).collect();
    let ref_mag = response[0].norm();
    let target = ref_mag / 2f64.sqrt();
    let k = response.iter().position(|z| z.norm() < target).ok_or_else(|| {
        SimError::Measurement(format!(
            "response never falls 3 dB below its low-frequency value inside [{f_min:e}, {f_max:e}] Hz"
        ))
    })?;
    // Bisect in log-frequency between the bracketing grid points.
    let (mut lo, mut hi) = (freqs[k - 1].ln(), freqs[k].ln());
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if transfer(circuit, r_mem, port, mid.exp()).norm() < target {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo < 1e-12 {
            break;
        }
    }
    Ok(AcResult {
        port,
        freqs,
        response,
        dc_gain_db: 20.0 * ref_mag.log10(),
        bw_3db: (0.5 * (lo + hi)).exp(),
    })
}

/// Upper bound on the closed-loop bandwidth, sqrt(2) / (2 pi r_f c_f).
pub fn bw_bound(r_f: f64, c_f: f64) -> f64 {
    2f64.sqrt() / (2.0 * PI * r_f * c_f)
}

/// Non-inverting gain seen by the reading tone.
pub fn reading_gain(r_mem: f64, r_c: f64) -> f64 {
    1.0 + r_mem / r_c
}

/// Resistance of the reset injection resistor assumed by [`reset_gain`].
pub const RESET_INJECTION_OHMS: f64 = 1e3;

/// Inverting gain from the reset line to the output.
pub fn reset_gain(r_mem: f64) -> f64 {
    -r_mem / RESET_INJECTION_OHMS
}

const BW_SEARCH_F_MIN: f64 = 1e2;
const BW_SEARCH_F_MAX: f64 = 1e12;
const BW_SEARCH_POINTS: usize = 400;

/// Bandwidth of the transimpedance with the device in a nominal state.
pub fn state_bandwidth(circuit: &CircuitConfig, mode: Mode) -> Result<f64, SimError> {
    let r = match mode {
        Mode::Hrs => circuit.memristor.r_off,
        Mode::Lrs => circuit.memristor.r_on,
    };
    Ok(ac_sweep(circuit, r, BW_SEARCH_F_MIN, BW_SEARCH_F_MAX, BW_SEARCH_POINTS)?.bw_3db)
}

pub fn hrs_bandwidth(circuit: &CircuitConfig) -> Result<f64, SimError> {
    state_bandwidth(circuit, Mode::Hrs)
}

/// Peak reading-tone amplitude reaching the detector with the device in
/// `mode`.
pub fn reading_amplitude_at_detector(circuit: &CircuitConfig, mode: Mode) -> f64 {
    let r = match mode {
        Mode::Hrs => circuit.memristor.r_off,
        Mode::Lrs => circuit.memristor.r_on,
    };
    let f = circuit.sources.reading.frequency;
    circuit.sources.reading.amplitude.abs()
        * transfer(circuit, r, AcPort::Reading, f).norm()
        * circuit.front_end.output_divider()
        * circuit.diplexer.highpass(f).norm()
}

/// Settled detector output for the reading tone in HRS and in LRS.
pub fn detector_levels(circuit: &CircuitConfig) -> (f64, f64) {
    let level = |m| {
        circuit
            .detector
            .transfer(reading_amplitude_at_detector(circuit, m))
    };
    (level(Mode::Hrs), level(Mode::Lrs))
}

/// Amplitude of the `f` component of `values` over `[t0, t1]`, from a
/// Hann-windowed single-bin DFT. Samples are assumed uniformly spaced.
pub fn tone_amplitude(times: &[f64], values: &[f64], t0: f64, t1: f64, f: f64) -> Option<f64> {
    let idx: Vec<usize> = (0..times.len())
        .filter(|&k| times[k] >= t0 && times[k] <= t1)
        .collect();
    if idx.len() < 8 {
        return None;
    }
    let n = idx.len();
    let (mut acc, mut wsum) = (Complex64::new(0.0, 0.0), 0.0);
    for (j, &k) in idx.iter().enumerate() {
        let w = 0.5 - 0.5 * (2.0 * PI * j as f64 / (n - 1) as f64).cos();
        acc += w * values[k] * Complex64::from_polar(1.0, -2.0 * PI * f * times[k]);
        wsum += w;
    }
    Some(2.0 * acc.norm() / wsum)
}
