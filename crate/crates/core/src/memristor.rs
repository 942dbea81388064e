//! Two-state valence-change memristor.
//!
//! The device sits in either the high-resistance state (HRS, `r_off`) or the
//! low-resistance state (LRS, `r_on`). A SET (HRS to LRS) needs the device
//! voltage to stay at or above `+v_set` for `t_set`; a RESET needs it at or
//! below `-v_reset` for `t_reset`. Below threshold nothing is remembered: a
//! lapse of the driving condition clears the stress timer.
//!
//! Every SET starts a new switching cycle and draws fresh per-cycle
//! thresholds and resistances, which is how cycle-to-cycle variability
//! enters the rest of the simulator.

use std::fmt;

use rand::Rng;
use rand_distr::{Distribution, LogNormal, Normal};

use crate::error::{InvalidParam, SimError};

/// Maximum redraws when a sampled cycle violates `r_off > r_on`.
pub const MAX_RESAMPLE_ATTEMPTS: u32 = 100;

/// Relative slack when comparing accumulated stress against a hold time.
/// Sub-stepping to an exact deadline can leave the sum a few ulps short.
const HOLD_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Mode {
    Hrs,
    Lrs,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Hrs => "HRS",
            Mode::Lrs => "LRS",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MemristorParams {
    pub r_off: f64,
    pub r_on: f64,
    /// SET threshold magnitude, applied with positive device polarity.
    pub v_set: f64,
    /// RESET threshold magnitude, applied with negative device polarity.
    pub v_reset: f64,
    pub t_set: f64,
    pub t_reset: f64,
    /// Relative spread of both switching thresholds.
    pub sigma_vset_rel: f64,
    pub sigma_roff_rel: f64,
    pub sigma_ron_rel: f64,
}

impl Default for MemristorParams {
    fn default() -> Self {
        Self {
            r_off: 15e3,
            r_on: 120.0,
            v_set: 0.8,
            v_reset: 0.8,
            t_set: 5e-9,
            t_reset: 100e-9,
            sigma_vset_rel: 0.2,
            sigma_roff_rel: 0.3,
            sigma_ron_rel: 0.05,
        }
    }
}

impl MemristorParams {
    /// Same device with every spread set to zero.
    pub fn nominal_only(&self) -> Self {
        Self {
            sigma_vset_rel: 0.0,
            sigma_roff_rel: 0.0,
            sigma_ron_rel: 0.0,
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<(), InvalidParam> {
        let ctx = "memristor";
        if !(self.r_off > self.r_on && self.r_on > 0.0) || !self.r_off.is_finite() {
            return Err(InvalidParam::new(ctx, "r_off > r_on > 0"));
        }
        if !(self.v_set > 0.0 && self.v_reset > 0.0) {
            return Err(InvalidParam::new(ctx, "v_set > 0, v_reset > 0"));
        }
        if !(self.t_set > 0.0 && self.t_reset > 0.0) {
            return Err(InvalidParam::new(ctx, "t_set > 0, t_reset > 0"));
        }
        for (name, s) in [
            ("sigma_vset_rel", self.sigma_vset_rel),
            ("sigma_roff_rel", self.sigma_roff_rel),
            ("sigma_ron_rel", self.sigma_ron_rel),
        ] {
            if !(0.0..1.0).contains(&s) {
                return Err(InvalidParam::new(ctx, format!("0 <= {name} < 1")));
            }
        }
        Ok(())
    }
}

/// Values drawn once per switching cycle.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CycleSample {
    pub v_set: f64,
    pub v_reset: f64,
    pub r_off: f64,
    pub r_on: f64,
}

impl CycleSample {
    pub fn nominal(params: &MemristorParams) -> Self {
        Self {
            v_set: params.v_set,
            v_reset: params.v_reset,
            r_off: params.r_off,
            r_on: params.r_on,
        }
    }
}

/// Normal draw truncated to `[0.5, 1.5] * mean` by rejection.
fn truncated_threshold<R: Rng + ?Sized>(mean: f64, sigma_rel: f64, rng: &mut R) -> f64 {
    if sigma_rel == 0.0 {
        return mean;
    }
    let dist = Normal::new(mean, sigma_rel * mean).expect("finite std-dev");
    let (lo, hi) = (0.5 * mean, 1.5 * mean);
    loop {
        let x = dist.sample(rng);
        if (lo..=hi).contains(&x) {
            return x;
        }
    }
}

/// Log-normal draw with the given median and relative standard deviation.
fn lognormal_resistance<R: Rng + ?Sized>(median: f64, sigma_rel: f64, rng: &mut R) -> f64 {
    if sigma_rel == 0.0 {
        return median;
    }
    let sigma_ln = (1.0 + sigma_rel * sigma_rel).ln().sqrt();
    LogNormal::new(median.ln(), sigma_ln)
        .expect("finite log-space std-dev")
        .sample(rng)
}

/// Draws one cycle's thresholds and resistances.
pub fn sample_cycle<R: Rng + ?Sized>(params: &MemristorParams, rng: &mut R) -> Result<CycleSample, SimError> {
    let v_set = truncated_threshold(params.v_set, params.sigma_vset_rel, rng);
    let v_reset = truncated_threshold(params.v_reset, params.sigma_vset_rel, rng);
    for _ in 0..MAX_RESAMPLE_ATTEMPTS {
        let r_off = lognormal_resistance(params.r_off, params.sigma_roff_rel, rng);
        let r_on = lognormal_resistance(params.r_on, params.sigma_ron_rel, rng);
        if r_off > r_on {
            return Ok(CycleSample {
                v_set,
                v_reset,
                r_off,
                r_on,
            });
        }
    }
    Err(SimError::Resample {
        attempts: MAX_RESAMPLE_ATTEMPTS,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SwitchKind {
    Set,
    Reset,
}

/// A completed transition. `offset` is the time into the step at which the
/// hold time was satisfied.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Switch {
    pub kind: SwitchKind,
    pub offset: f64,
    pub r_before: f64,
    pub r_after: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MemristorState {
    pub mode: Mode,
    pub resistance_now: f64,
    pub set_stress: f64,
    pub reset_stress: f64,
    pub cycle_count: u64,
    pub sample: CycleSample,
}

impl MemristorState {
    pub fn new(mode: Mode, sample: CycleSample) -> Self {
        let resistance_now = match mode {
            Mode::Hrs => sample.r_off,
            Mode::Lrs => sample.r_on,
        };
        Self {
            mode,
            resistance_now,
            set_stress: 0.0,
            reset_stress: 0.0,
            cycle_count: 0,
            sample,
        }
    }

    pub fn sampled<R: Rng + ?Sized>(
        mode: Mode,
        params: &MemristorParams,
        rng: &mut R,
    ) -> Result<Self, SimError> {
        Ok(Self::new(mode, sample_cycle(params, rng)?))
    }

    pub fn conductance(&self) -> f64 {
        1.0 / self.resistance_now
    }

    /// Whether `v_dev` satisfies the driving condition for the transition
    /// available from the current mode.
    pub fn drive_active(&self, v_dev: f64) -> bool {
        match self.mode {
            Mode::Hrs => v_dev >= self.sample.v_set,
            Mode::Lrs => v_dev <= -self.sample.v_reset,
        }
    }

    /// Remaining hold time before the active stress timer completes, if one
    /// is running.
    pub fn hold_remaining(&self, params: &MemristorParams) -> Option<f64> {
        if self.set_stress > 0.0 {
            Some((params.t_set - self.set_stress).max(0.0))
        } else if self.reset_stress > 0.0 {
            Some((params.t_reset - self.reset_stress).max(0.0))
        } else {
            None
        }
    }

    /// Advances the device by `dt` with the device voltage held at `v_dev`.
    pub fn step<R: Rng + ?Sized>(
        &mut self,
        params: &MemristorParams,
        v_dev: f64,
        dt: f64,
        rng: &mut R,
    ) -> Result<Option<Switch>, SimError> {
        debug_assert!(dt > 0.0);
        if !self.drive_active(v_dev) {
            self.set_stress = 0.0;
            self.reset_stress = 0.0;
            return Ok(None);
        }
        match self.mode {
            Mode::Hrs => {
                self.reset_stress = 0.0;
                self.set_stress += dt;
                if self.set_stress >= params.t_set * (1.0 - HOLD_SLACK) {
                    let offset = (dt - (self.set_stress - params.t_set)).clamp(0.0, dt);
                    let r_before = self.resistance_now;
                    // A SET opens the next cycle.
                    self.sample = sample_cycle(params, rng)?;
                    self.mode = Mode::Lrs;
                    self.resistance_now = self.sample.r_on;
                    self.cycle_count += 1;
                    self.set_stress = 0.0;
                    return Ok(Some(Switch {
                        kind: SwitchKind::Set,
                        offset,
                        r_before,
                        r_after: self.resistance_now,
                    }));
                }
            }
            Mode::Lrs => {
                self.set_stress = 0.0;
                self.reset_stress += dt;
                if self.reset_stress >= params.t_reset * (1.0 - HOLD_SLACK) {
                    let offset = (dt - (self.reset_stress - params.t_reset)).clamp(0.0, dt);
                    let r_before = self.resistance_now;
                    self.mode = Mode::Hrs;
                    self.resistance_now = self.sample.r_off;
                    self.reset_stress = 0.0;
                    return Ok(Some(Switch {
                        kind: SwitchKind::Reset,
                        offset,
                        r_before,
                        r_after: self.resistance_now,
                    }));
                }
            }
        }
        Ok(None)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IvPoint {
    pub v: f64,
    pub i: f64,
    pub mode: Mode,
}

/// Triangle 0 -> +peak -> -peak -> 0 sampled at point `k` of `n` per cycle.
fn triangle_point(peak: f64, k: usize, n: usize) -> f64 {
    let x = 4 * k;
    let num = if x < n {
        x as f64
    } else if x < 3 * n {
        (2 * n) as f64 - x as f64
    } else {
        x as f64 - (4 * n) as f64
    };
    peak * num / n as f64
}

/// Quasi-static triangular sweep applied directly across a device that
/// starts in HRS. Each point dwells long enough for either transition to
/// complete, so a threshold crossing switches at the point where it occurs.
pub fn iv_sweep<R: Rng + ?Sized>(
    params: &MemristorParams,
    v_peak: f64,
    points_per_cycle: usize,
    cycles: usize,
    rng: &mut R,
) -> Result<Vec<IvPoint>, SimError> {
    params.validate()?;
    if !(v_peak > params.v_set.max(params.v_reset)) {
        return Err(InvalidParam::new("iv_sweep", "v_peak > max(v_set, v_reset)").into());
    }
    if points_per_cycle < 100 {
        return Err(InvalidParam::new("iv_sweep", "points_per_cycle >= 100").into());
    }
    let dwell = params.t_set.max(params.t_reset);
    let mut state = MemristorState::sampled(Mode::Hrs, params, rng)?;
    let mut out = Vec::with_capacity(points_per_cycle * cycles + 1);
    let apply = |v: f64, state: &mut MemristorState, rng: &mut R| -> Result<IvPoint, SimError> {
        state.step(params, v, dwell, rng)?;
        Ok(IvPoint {
            v,
            i: v / state.resistance_now,
            mode: state.mode,
        })
    };
    for _ in 0..cycles {
        for k in 0..points_per_cycle {
            let v = triangle_point(v_peak, k, points_per_cycle);
            out.push(apply(v, &mut state, rng)?);
        }
    }
    out.push(apply(0.0, &mut state, rng)?);
    Ok(out)
}

/// Voltages at which an I-V trace switched from HRS to LRS.
pub fn set_voltages(trace: &[IvPoint]) -> Vec<f64> {
    trace
        .windows(2)
        .filter(|w| w[0].mode == Mode::Hrs && w[1].mode == Mode::Lrs)
        .map(|w| w[1].v)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    #[test]
    fn zero_sigma_samples_are_nominal() {
        let p = MemristorParams::default().nominal_only();
        let s = sample_cycle(&p, &mut rng(1)).unwrap();
        assert_eq!(s, CycleSample::nominal(&p));
    }

    #[test]
    fn same_seed_same_sequence() {
        let p = MemristorParams::default();
        let a: Vec<_> = {
            let mut r = rng(42);
            (0..50).map(|_| sample_cycle(&p, &mut r).unwrap()).collect()
        };
        let b: Vec<_> = {
            let mut r = rng(42);
            (0..50).map(|_| sample_cycle(&p, &mut r).unwrap()).collect()
        };
        assert_eq!(a, b);
    }

    /// Moments of a normal truncated at +-2.5 sigma, by midpoint quadrature.
    fn truncated_moments(mean: f64, sigma: f64, lo: f64, hi: f64) -> (f64, f64) {
        let n = 200_000;
        let h = (hi - lo) / n as f64;
        let (mut z, mut m1, mut m2) = (0.0, 0.0, 0.0);
        for k in 0..n {
            let x = lo + (k as f64 + 0.5) * h;
            let w = (-0.5 * ((x - mean) / sigma).powi(2)).exp();
            z += w;
            m1 += w * x;
            m2 += w * x * x;
        }
        let m = m1 / z;
        (m, (m2 / z - m * m).sqrt())
    }

    #[test]
    fn threshold_moments_match_truncated_normal() {
        let p = MemristorParams {
            sigma_roff_rel: 0.0,
            sigma_ron_rel: 0.0,
            ..MemristorParams::default()
        };
        let mut r = rng(7);
        let xs: Vec<f64> = (0..10_000)
            .map(|_| sample_cycle(&p, &mut r).unwrap().v_set)
            .collect();
        let mean = xs.iter().sum::<f64>() / xs.len() as f64;
        let sd = (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (xs.len() - 1) as f64).sqrt();
        let (om, osd) = truncated_moments(0.8, 0.16, 0.4, 1.2);
        assert!((mean - 0.8).abs() / 0.8 < 0.02, "mean {mean}");
        assert!((sd - 0.16).abs() / 0.16 < 0.10, "sd {sd}");
        assert!((mean - om).abs() / om < 0.01);
        assert!((sd - osd).abs() / osd < 0.03, "sd {sd} oracle {osd}");
        assert!(xs.iter().all(|&x| (0.4..=1.2).contains(&x)));
    }

    #[test]
    fn absurd_spread_fails_resampling() {
        // Medians inverted: r_off median far below r_on with tiny spread.
        let p = MemristorParams {
            r_off: 100.0,
            r_on: 120.0,
            sigma_roff_rel: 0.01,
            sigma_ron_rel: 0.01,
            ..MemristorParams::default()
        };
        assert_eq!(
            sample_cycle(&p, &mut rng(3)),
            Err(SimError::Resample { attempts: 100 })
        );
    }

    fn nominal_state(mode: Mode) -> (MemristorParams, MemristorState) {
        let p = MemristorParams::default().nominal_only();
        let s = MemristorState::new(mode, CycleSample::nominal(&p));
        (p, s)
    }

    #[test]
    fn zero_voltage_never_switches() {
        let (p, mut s) = nominal_state(Mode::Hrs);
        let before = s.clone();
        let mut r = rng(0);
        for _ in 0..1000 {
            assert!(s.step(&p, 0.0, 1e-6, &mut r).unwrap().is_none());
        }
        assert_eq!(s, before);
    }

    #[test]
    fn set_after_hold_time() {
        let (p, mut s) = nominal_state(Mode::Hrs);
        let mut r = rng(0);
        let mut event = None;
        for _ in 0..5 {
            if let Some(e) = s.step(&p, 0.9, 1e-9, &mut r).unwrap() {
                event = Some(e);
            }
        }
        let e = event.expect("SET after 5 ns");
        assert_eq!(e.kind, SwitchKind::Set);
        assert_eq!(e.r_before, 15e3);
        assert_eq!(e.r_after, 120.0);
        assert_eq!(s.mode, Mode::Lrs);
        assert_eq!(s.cycle_count, 1);
    }

    #[test]
    fn reset_after_hold_time() {
        let (p, mut s) = nominal_state(Mode::Lrs);
        let mut r = rng(0);
        let e = s.step(&p, -0.9, p.t_reset, &mut r).unwrap().unwrap();
        assert_eq!(e.kind, SwitchKind::Reset);
        assert_eq!(s.resistance_now, 15e3);
        assert_eq!(s.cycle_count, 0);
    }

    #[test]
    fn lapse_clears_stress() {
        let (p, mut s) = nominal_state(Mode::Hrs);
        let mut r = rng(0);
        s.step(&p, 0.9, 4e-9, &mut r).unwrap();
        assert!(s.set_stress > 0.0);
        s.step(&p, 0.5, 1e-9, &mut r).unwrap();
        assert_eq!(s.set_stress, 0.0);
        assert!(s.step(&p, 0.9, 4e-9, &mut r).unwrap().is_none());
        assert_eq!(s.mode, Mode::Hrs);
    }

    #[test]
    fn switch_offset_inside_step() {
        let (p, mut s) = nominal_state(Mode::Hrs);
        let mut r = rng(0);
        s.step(&p, 0.9, 3e-9, &mut r).unwrap();
        let e = s.step(&p, 0.9, 4e-9, &mut r).unwrap().unwrap();
        assert!((e.offset - 2e-9).abs() < 1e-18);
    }

    #[test]
    fn conductance_is_reciprocal() {
        let (_, on) = nominal_state(Mode::Lrs);
        let (_, off) = nominal_state(Mode::Hrs);
        assert_eq!(on.conductance(), 1.0 / 120.0);
        assert_eq!(off.conductance(), 1.0 / 15000.0);
    }

    #[test]
    fn iv_single_cycle_switches_once_each_way() {
        let p = MemristorParams::default().nominal_only();
        let trace = iv_sweep(&p, 1.2, 480, 1, &mut rng(0)).unwrap();
        let sets = set_voltages(&trace);
        assert_eq!(sets.len(), 1);
        assert!((sets[0] - 0.8).abs() < 1e-9);
        let resets = trace
            .windows(2)
            .filter(|w| w[0].mode == Mode::Lrs && w[1].mode == Mode::Hrs)
            .map(|w| w[1].v)
            .collect::<Vec<_>>();
        assert_eq!(resets.len(), 1);
        assert!((resets[0] + 0.8).abs() < 1e-9);

        let near = |target: f64| {
            trace
                .iter()
                .take(130)
                .find(|pt| (pt.v - target).abs() < 1e-9)
                .copied()
                .unwrap()
        };
        let below = near(0.79);
        assert!((below.i - 0.79 / 15000.0).abs() < 1e-15);
        let above = near(0.81);
        assert!((above.i - 0.81 / 120.0).abs() < 1e-15);
        for pt in &trace {
            if pt.v == 0.0 {
                assert_eq!(pt.i, 0.0);
            }
        }
    }

    #[test]
    fn iv_rejects_subthreshold_peak() {
        let p = MemristorParams::default();
        assert!(iv_sweep(&p, 0.8, 200, 1, &mut rng(0)).is_err());
        assert!(iv_sweep(&p, 1.2, 50, 1, &mut rng(0)).is_err());
    }

    #[test]
    fn param_validation_names_invariant() {
        let p = MemristorParams {
            r_on: 0.0,
            ..MemristorParams::default()
        };
        assert!(p.validate().unwrap_err().message.contains("r_off > r_on > 0"));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn subthreshold_sweep_keeps_hrs(peak in 0.0f64..0.79, n in 1usize..200) {
                let (p, mut s) = nominal_state(Mode::Hrs);
                let mut r = rng(0);
                for k in 0..=2 * n {
                    let x = if k <= n { k } else { 2 * n - k };
                    let v = peak * x as f64 / n as f64;
                    prop_assert!(s.step(&p, v, 1e-6, &mut r).unwrap().is_none());
                }
                prop_assert_eq!(s.mode, Mode::Hrs);
            }

            #[test]
            fn resistance_two_valued(volts in proptest::collection::vec(-1.5f64..1.5, 1..300), seed in 0u64..1000) {
                let p = MemristorParams::default();
                let mut r = rng(seed);
                let mut s = MemristorState::sampled(Mode::Hrs, &p, &mut r).unwrap();
                for v in volts {
                    let cycle_before = s.cycle_count;
                    s.step(&p, v, 20e-9, &mut r).unwrap();
                    let expect = match s.mode { Mode::Hrs => s.sample.r_off, Mode::Lrs => s.sample.r_on };
                    prop_assert_eq!(s.resistance_now, expect);
                    prop_assert!(!(s.set_stress > 0.0 && s.reset_stress > 0.0));
                    prop_assert!(s.cycle_count - cycle_before <= 1);
                }
            }
        }
    }
}
