//! Fixed-step transient simulation of the full chain with sub-step event
//! location.
//!
//! Each grid step is integrated as one or more trapezoidal sub-steps. Three
//! conditions are monitored at sub-step ends: whether the device sees its
//! switching drive, whether the op-amp output is clamped, and whether the
//! compliance limit binds. When one of them changes inside a trial sub-step
//! the sub-step is shortened by bisection until the change is bracketed to
//! within the event tolerance. A running hold timer additionally caps the
//! sub-step at its deadline, so switches land at crossing + hold time
//! independent of the grid.

use std::f64::consts::PI;
use std::fmt;
use std::fmt::Write as _;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::blocks::{
    detector_step, diplexer_step, front_end_current, tia_step, DetectorState, DiplexerState, TiaDrive,
    TiaOutput, TiaState,
};
use crate::circuit::{CircuitConfig, Drive};
use crate::controller::{controller_step, Classification, ControllerEvent, ControllerState, Phase};
use crate::error::{InvalidParam, SimError};
use crate::memristor::{CycleSample, MemristorState, Mode, SwitchKind};

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub dt: f64,
    pub duration: f64,
    pub event_tolerance: f64,
    pub max_bisections: u32,
    pub record_decimation: usize,
    /// End the run after the grid step in which this event occurs.
    pub stop_on: Option<EventKind>,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            dt: 1e-9,
            duration: 1e-6,
            event_tolerance: 1e-12,
            max_bisections: 40,
            record_decimation: 1,
            stop_on: None,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), InvalidParam> {
        let ctx = "sim";
        if !(self.dt > 0.0 && self.dt <= self.duration) || !self.duration.is_finite() {
            return Err(InvalidParam::new(ctx, "0 < dt <= duration"));
        }
        if !(self.event_tolerance > 0.0 && self.event_tolerance < self.dt) {
            return Err(InvalidParam::new(ctx, "0 < event_tolerance < dt"));
        }
        if self.max_bisections < 8 {
            return Err(InvalidParam::new(ctx, "max_bisections >= 8"));
        }
        if self.record_decimation < 1 {
            return Err(InvalidParam::new(ctx, "record_decimation >= 1"));
        }
        Ok(())
    }

    pub fn steps(&self) -> u64 {
        (self.duration / self.dt - 1e-9).ceil().max(1.0) as u64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EventKind {
    Set,
    Reset,
    SatEnter,
    SatExit,
    ComplianceEnter,
    ComplianceExit,
    ResetCmd,
    ResetPulseStart,
    ResetPulseEnd,
    VerifyOk,
    VerifyFail,
}

impl EventKind {
    pub const ALL: [EventKind; 11] = [
        Self::Set,
        Self::Reset,
        Self::SatEnter,
        Self::SatExit,
        Self::ComplianceEnter,
        Self::ComplianceExit,
        Self::ResetCmd,
        Self::ResetPulseStart,
        Self::ResetPulseEnd,
        Self::VerifyOk,
        Self::VerifyFail,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::Set => "SET",
            Self::Reset => "RESET",
            Self::SatEnter => "SAT_ENTER",
            Self::SatExit => "SAT_EXIT",
            Self::ComplianceEnter => "COMPLIANCE_ENTER",
            Self::ComplianceExit => "COMPLIANCE_EXIT",
            Self::ResetCmd => "RESET_CMD",
            Self::ResetPulseStart => "RESET_PULSE_START",
            Self::ResetPulseEnd => "RESET_PULSE_END",
            Self::VerifyOk => "VERIFY_OK",
            Self::VerifyFail => "VERIFY_FAIL",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.name() == s)
    }
}

impl fmt::Display for EventKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Event {
    pub time: f64,
    pub kind: EventKind,
    /// `key=value` pairs separated by `;`.
    pub payload: String,
}

impl Event {
    /// Looks up a numeric payload field.
    pub fn field(&self, key: &str) -> Option<f64> {
        self.payload.split(';').find_map(|kv| {
            let (k, v) = kv.split_once('=')?;
            (k == key).then(|| v.parse().ok()).flatten()
        })
    }
}

fn payload(fields: &[(&str, f64)]) -> String {
    let mut s = String::new();
    for (i, (k, v)) in fields.iter().enumerate() {
        if i > 0 {
            s.push(';');
        }
        let _ = write!(s, "{k}={v:.8e}");
    }
    s
}

/// Recorded waveforms plus the event log.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TraceSet {
    pub time: Vec<f64>,
    /// Input waveform in volts. Under current drive this is the test voltage
    /// that would produce the same current through the front end.
    pub v_in: Vec<f64>,
    pub i_in: Vec<f64>,
    pub v_n: Vec<f64>,
    pub v_o: Vec<f64>,
    pub r_mem: Vec<f64>,
    pub v_dev: Vec<f64>,
    pub v_lp: Vec<f64>,
    pub v_hp: Vec<f64>,
    pub v_det: Vec<f64>,
    /// Reset-line level applied during the step ending at each sample.
    pub v_rst: Vec<f64>,
    pub events: Vec<Event>,
    /// Device parameters of the cycle in force at t = 0.
    pub device_initial: CycleSample,
}

impl TraceSet {
    pub fn len(&self) -> usize {
        self.time.len()
    }

    pub fn is_empty(&self) -> bool {
        self.time.is_empty()
    }

    pub fn events_of(&self, kind: EventKind) -> impl Iterator<Item = &Event> {
        self.events.iter().filter(move |e| e.kind == kind)
    }

    pub fn count(&self, kind: EventKind) -> usize {
        self.events_of(kind).count()
    }

    pub fn first(&self, kind: EventKind) -> Option<&Event> {
        self.events_of(kind).next()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Conditions {
    drive: bool,
    saturated: bool,
    compliance: bool,
}

#[derive(Debug, Clone, Copy)]
struct SourceSample {
    v_in: f64,
    drive: TiaDrive,
    compliance: bool,
}

#[derive(Debug, Clone, Copy)]
struct Trial {
    out: TiaOutput,
    src: SourceSample,
    cond: Conditions,
}

/// Transient simulator that can be advanced incrementally.
pub struct Transient<'a> {
    circuit: &'a CircuitConfig,
    sim: &'a SimConfig,
    rng: ChaCha8Rng,
    step: u64,
    t: f64,
    tia: TiaState,
    src: SourceSample,
    cond: Conditions,
    last: Option<TiaOutput>,
    device: MemristorState,
    dip: DiplexerState,
    det: DetectorState,
    ctrl: ControllerState,
    v_rst: f64,
    lp: f64,
    hp: f64,
    reset_times: Vec<f64>,
    reset_cursor: usize,
    sat_since: f64,
    crossing: Option<(f64, f64)>,
    pulse_started: f64,
    stopped: bool,
    trace: TraceSet,
    ctrl_events: Vec<ControllerEvent>,
}

impl<'a> Transient<'a> {
    pub fn new(circuit: &'a CircuitConfig, sim: &'a SimConfig, seed: u64) -> Result<Self, SimError> {
        circuit.validate()?;
        sim.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let device = MemristorState::sampled(circuit.initial_mode, &circuit.memristor, &mut rng)?;
        Self::with_device(circuit, sim, rng, device)
    }

    /// Starts from an explicit device state; `rng` drives later resampling.
    pub fn with_device(
        circuit: &'a CircuitConfig,
        sim: &'a SimConfig,
        rng: ChaCha8Rng,
        device: MemristorState,
    ) -> Result<Self, SimError> {
        circuit.validate()?;
        sim.validate()?;
        let mut reset_times = circuit.sources.reset_commands.clone();
        reset_times.sort_by(f64::total_cmp);
        let mut me = Self {
            circuit,
            sim,
            rng,
            step: 0,
            t: 0.0,
            tia: TiaState::default(),
            src: SourceSample {
                v_in: 0.0,
                drive: TiaDrive::default(),
                compliance: false,
            },
            cond: Conditions {
                drive: false,
                saturated: false,
                compliance: false,
            },
            last: None,
            trace: TraceSet {
                device_initial: device.sample,
                ..TraceSet::default()
            },
            device,
            dip: DiplexerState::default(),
            det: DetectorState::default(),
            ctrl: ControllerState::default(),
            v_rst: 0.0,
            lp: 0.0,
            hp: 0.0,
            reset_times,
            reset_cursor: 0,
            sat_since: 0.0,
            crossing: None,
            pulse_started: 0.0,
            stopped: false,
            ctrl_events: Vec::new(),
        };
        me.src = me.sources_at(0.0);
        // Consistent initial point: the DC-free state is the origin, so only
        // the source-dependent flags need evaluating.
        me.cond.compliance = me.src.compliance;
        if me.src.compliance {
            me.push(
                0.0,
                EventKind::ComplianceEnter,
                payload(&[("i_in_a", me.src.drive.i_in)]),
            );
        }
        me.cond.drive = me.drive_condition(0.0);
        me.record_row(0.0);
        Ok(me)
    }

    pub fn time(&self) -> f64 {
        self.t
    }

    pub fn device(&self) -> &MemristorState {
        &self.device
    }

    pub fn tia_state(&self) -> TiaState {
        self.tia
    }

    pub fn v_det(&self) -> f64 {
        self.det.v_det
    }

    pub fn v_hp(&self) -> f64 {
        self.hp
    }

    pub fn controller(&self) -> &ControllerState {
        &self.ctrl
    }

    pub fn classification(&self) -> Classification {
        self.ctrl.classified
    }

    pub fn trace(&self) -> &TraceSet {
        &self.trace
    }

    pub fn is_stopped(&self) -> bool {
        self.stopped
    }

    pub fn into_trace(self) -> TraceSet {
        self.trace
    }

    /// Advances whole grid steps until `t_stop` (or the configured duration)
    /// is reached or a stop event fires.
    pub fn advance_to(&mut self, t_stop: f64) -> Result<(), SimError> {
        let n = self.sim.steps();
        while !self.stopped
            && self.step < n
            && (self.step as f64 + 1.0) * self.sim.dt <= t_stop * (1.0 + 1e-12)
        {
            self.grid_step()?;
        }
        Ok(())
    }

    pub fn run(mut self) -> Result<TraceSet, SimError> {
        self.advance_to(f64::INFINITY)?;
        Ok(self.trace)
    }

    fn sources_at(&self, t: f64) -> SourceSample {
        let s = &self.circuit.sources;
        let fe = &self.circuit.front_end;
        let w = s.input.eval(t);
        let (v_in, out) = match s.drive {
            Drive::Voltage => (w, front_end_current(w, fe)),
            Drive::Current => (w / (fe.gm * fe.atten_gain), fe.limit(w)),
        };
        SourceSample {
            v_in,
            drive: TiaDrive {
                i_in: out.current,
                v_read: s.reading.eval(t),
            },
            compliance: out.compliance,
        }
    }

    fn switching_live(&self) -> bool {
        self.circuit.switching_enabled && self.circuit.feedback.has_memristor()
    }

    fn drive_condition(&self, v_dev: f64) -> bool {
        self.switching_live() && self.device.drive_active(v_dev)
    }

    fn trial(&self, t0: f64, h: f64) -> Result<Trial, SimError> {
        let src = self.sources_at(t0 + h);
        let out = tia_step(
            self.tia,
            self.src.drive,
            src.drive,
            self.v_rst,
            &self.circuit.stage(),
            self.device.resistance_now,
            h,
        )?;
        if !(out.state.v_o.is_finite() && out.state.v_n.is_finite()) {
            let (name, tau) = self.fastest_time_constant();
            return Err(SimError::NonFinite {
                time: t0 + h,
                name,
                tau,
                dt: h,
            });
        }
        Ok(Trial {
            out,
            src,
            cond: Conditions {
                drive: self.drive_condition(out.v_dev),
                saturated: out.saturated,
                compliance: src.compliance,
            },
        })
    }

    fn fastest_time_constant(&self) -> (&'static str, f64) {
        let c = self.circuit;
        let r = c.feedback.r_eff(self.device.resistance_now);
        let candidates = [
            ("op-amp unity-gain pole", 1.0 / (2.0 * PI * c.opamp.gbw)),
            ("feedback r_eff*c_f", r * c.feedback.c_f),
            (
                "summing node (c_f+c_in)/(g_f+g_reset)",
                (c.feedback.c_f + c.front_end.c_in) / (1.0 / r + 1.0 / c.front_end.r_reset_in),
            ),
            ("detector tau_attack", c.detector.tau_attack),
            ("diplexer 1/(2*pi*f_cross)", 1.0 / (2.0 * PI * c.diplexer.f_cross)),
        ];
        candidates
            .into_iter()
            .filter(|(_, tau)| *tau > 0.0)
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .unwrap_or(("op-amp unity-gain pole", 0.0))
    }

    fn push(&mut self, time: f64, kind: EventKind, payload: String) {
        if self.sim.stop_on == Some(kind) {
            self.stopped = true;
        }
        self.trace.events.push(Event { time, kind, payload });
    }

    fn grid_step(&mut self) -> Result<(), SimError> {
        let dt = self.sim.dt;
        let t_end = (self.step + 1) as f64 * dt;
        let tol = self.sim.event_tolerance;
        while self.t < t_end {
            let t0 = self.t;
            let mut h = t_end - t0;
            if self.switching_live() {
                if let Some(rem) = self.device.hold_remaining(&self.circuit.memristor) {
                    h = h.min(rem.max(1e-18));
                }
            }
            let mut trial = self.trial(t0, h)?;
            // Time during this sub-step for which the drive was present.
            let mut active = h;
            if trial.cond != self.cond && h > tol {
                let (mut lo, mut hi) = (0.0, h);
                let mut n = 0;
                while hi - lo > tol {
                    n += 1;
                    let mid = 0.5 * (lo + hi);
                    if n > self.sim.max_bisections || mid <= lo || mid >= hi {
                        return Err(SimError::BisectionDiverged {
                            time: t0 + lo,
                            tolerance: tol,
                            max_bisections: self.sim.max_bisections,
                        });
                    }
                    if self.trial(t0, mid)?.cond != self.cond {
                        hi = mid;
                    } else {
                        lo = mid;
                    }
                }
                h = hi;
                trial = self.trial(t0, h)?;
                if trial.cond.drive && !self.cond.drive {
                    active = hi - lo;
                    if self.device.mode == Mode::Hrs {
                        self.crossing = Some((t0 + lo, trial.src.drive.i_in));
                    }
                }
            } else if trial.cond.drive && !self.cond.drive {
                // Change inside a sub-step already shorter than the tolerance.
                if self.device.mode == Mode::Hrs {
                    self.crossing = Some((t0, trial.src.drive.i_in));
                }
            }
            let t1 = if t_end - (t0 + h) <= 1e-6 * tol {
                t_end
            } else {
                t0 + h
            };
            self.commit(trial, t0, t1, active)?;
        }
        self.t = t_end;
        self.step += 1;
        let applied = self.v_rst;
        self.control_step(t_end);
        let last_step = self.step >= self.sim.steps();
        if self.step.is_multiple_of(self.sim.record_decimation as u64) || last_step || self.stopped {
            self.record_row(applied);
        }
        if last_step {
            self.stopped = true;
        }
        Ok(())
    }

    fn commit(&mut self, trial: Trial, t0: f64, t1: f64, active: f64) -> Result<(), SimError> {
        let h = t1 - t0;
        let out = trial.out;
        self.tia = out.state;
        self.src = trial.src;
        self.last = Some(out);

        if trial.cond.saturated != self.cond.saturated {
            if trial.cond.saturated {
                self.sat_since = t1;
                self.push(
                    t1,
                    EventKind::SatEnter,
                    payload(&[("v_o_unclamped", out.v_o_unclamped)]),
                );
            } else {
                let d = t1 - self.sat_since;
                self.push(t1, EventKind::SatExit, payload(&[("duration_s", d)]));
            }
        }
        if trial.cond.compliance != self.cond.compliance {
            let kind = if trial.cond.compliance {
                EventKind::ComplianceEnter
            } else {
                EventKind::ComplianceExit
            };
            self.push(t1, kind, payload(&[("i_in_a", trial.src.drive.i_in)]));
        }
        self.cond = trial.cond;

        if self.switching_live() {
            let dt_dev = if trial.cond.drive { active.min(h) } else { h };
            if let Some(sw) = self
                .device
                .step(&self.circuit.memristor, out.v_dev, dt_dev, &mut self.rng)?
            {
                let at = t1;
                match sw.kind {
                    SwitchKind::Set => {
                        let (t_x, i_x) = self.crossing.take().unwrap_or((at, trial.src.drive.i_in));
                        self.push(
                            at,
                            EventKind::Set,
                            payload(&[
                                ("r_before", sw.r_before),
                                ("r_after", sw.r_after),
                                ("crossing_s", t_x),
                                ("i_in_a", i_x),
                            ]),
                        );
                    }
                    SwitchKind::Reset => {
                        self.push(
                            at,
                            EventKind::Reset,
                            payload(&[("r_before", sw.r_before), ("r_after", sw.r_after)]),
                        );
                    }
                }
                self.cond.drive = self.drive_condition(out.v_dev);
            } else if !trial.cond.drive {
                self.crossing = None;
            }
        }

        let v_port = out.state.v_o * self.circuit.front_end.output_divider();
        let (lp, hp) = diplexer_step(v_port, &mut self.dip, &self.circuit.diplexer, h);
        self.lp = lp;
        self.hp = hp;
        detector_step(hp, &mut self.det, &self.circuit.detector, h);
        if !(lp.is_finite() && self.det.v_det.is_finite()) {
            let (name, tau) = self.fastest_time_constant();
            return Err(SimError::NonFinite {
                time: t1,
                name,
                tau,
                dt: h,
            });
        }
        self.t = t1;
        Ok(())
    }

    fn control_step(&mut self, t_end: f64) {
        let dt = self.sim.dt;
        let mut command = false;
        while self.reset_cursor < self.reset_times.len()
            && self.reset_times[self.reset_cursor] <= t_end + 1e-6 * dt
        {
            command = true;
            self.reset_cursor += 1;
        }
        let cfg = &self.circuit.controller;
        let mut events = std::mem::take(&mut self.ctrl_events);
        events.clear();
        let v_rst = controller_step(&mut self.ctrl, self.det.v_det, command, dt, cfg, &mut events);
        for ev in &events {
            let (kind, p) = match ev {
                ControllerEvent::ResetCmd => (EventKind::ResetCmd, String::new()),
                ControllerEvent::PulseStart => {
                    self.pulse_started = t_end;
                    (
                        EventKind::ResetPulseStart,
                        payload(&[("amplitude_v", cfg.reset_amplitude)]),
                    )
                }
                ControllerEvent::PulseEnd => (
                    EventKind::ResetPulseEnd,
                    payload(&[("width_s", t_end - self.pulse_started)]),
                ),
                ControllerEvent::VerifyOk => (EventKind::VerifyOk, payload(&[("v_det_v", self.det.v_det)])),
                ControllerEvent::VerifyFail => {
                    (EventKind::VerifyFail, payload(&[("v_det_v", self.det.v_det)]))
                }
            };
            self.push(t_end, kind, p);
        }
        self.ctrl_events = events;
        debug_assert!(self.ctrl.phase == Phase::ApplyReset || v_rst == 0.0);
        self.v_rst = v_rst;
    }

    fn record_row(&mut self, v_rst_applied: f64) {
        let v_dev = match self.last {
            Some(o) => o.v_dev,
            None => self.circuit.feedback.device_voltage(self.tia.v_n, self.tia.v_o),
        };
        let tr = &mut self.trace;
        tr.time.push(self.t);
        tr.v_in.push(self.src.v_in);
        tr.i_in.push(self.src.drive.i_in);
        tr.v_n.push(self.tia.v_n);
        tr.v_o.push(self.tia.v_o);
        tr.r_mem.push(self.device.resistance_now);
        tr.v_dev.push(v_dev);
        tr.v_lp.push(self.lp);
        tr.v_hp.push(self.hp);
        tr.v_det.push(self.det.v_det);
        tr.v_rst.push(v_rst_applied);
    }
}

pub fn run_transient(circuit: &CircuitConfig, sim: &SimConfig, seed: u64) -> Result<TraceSet, SimError> {
    Transient::new(circuit, sim, seed)?.run()
}

/// Amplitude staircase used by [`measure_dynamic_range`].
#[derive(Debug, Clone, PartialEq)]
pub struct Staircase {
    pub i_start: f64,
    pub i_stop: f64,
    pub step_db: f64,
    /// Dwell per level; the output is judged at the end of each level.
    pub level_time: f64,
    /// Linear transition between adjacent levels.
    pub edge: f64,
}

impl Default for Staircase {
    fn default() -> Self {
        Self {
            i_start: 1e-6,
            i_stop: 100e-3,
            step_db: 1.0,
            level_time: 300e-9,
            edge: 5e-9,
        }
    }
}

impl Staircase {
    pub fn validate(&self) -> Result<(), InvalidParam> {
        let ctx = "dr";
        if !(self.i_start > 0.0 && self.i_start < self.i_stop) {
            return Err(InvalidParam::new(ctx, "0 < i_start < i_stop"));
        }
        if !(self.step_db > 0.0) {
            return Err(InvalidParam::new(ctx, "step_db > 0"));
        }
        if !(self.edge > 0.0 && self.edge < self.level_time) {
            return Err(InvalidParam::new(ctx, "0 < edge < level_time"));
        }
        Ok(())
    }

    pub fn levels(&self) -> Vec<f64> {
        let n = (20.0 * (self.i_stop / self.i_start).log10() / self.step_db + 1e-9).floor() as usize;
        (0..=n)
            .map(|k| self.i_start * 10f64.powf(k as f64 * self.step_db / 20.0))
            .collect()
    }

    /// Piecewise-linear current waveform; level `k` holds on
    /// `[k*level_time + edge, (k+1)*level_time]`.
    pub fn waveform(&self) -> crate::blocks::WaveformSpec {
        let mut pts = vec![(0.0, 0.0)];
        for (k, i) in self.levels().into_iter().enumerate() {
            let t0 = k as f64 * self.level_time;
            pts.push((t0 + self.edge, i));
            pts.push((t0 + self.level_time, i));
        }
        crate::blocks::WaveformSpec::pwl(pts).expect("staircase breakpoints are ordered")
    }
}

/// Rail-limited input range of one staircase run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RangeRun {
    /// Last level whose output stayed off the rail.
    pub i_last_linear: f64,
    pub i_first_clipped: f64,
    /// Transimpedance magnitude measured at the last linear level.
    pub z_t: f64,
    pub i_max: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DrMeasurement {
    pub fixed: RangeRun,
    pub agc: RangeRun,
    /// HRS feedback resistance used to refer the noise to the input.
    pub r_hrs: f64,
    pub i_n: f64,
    pub dr_fixed_db: f64,
    pub dr_agc_db: f64,
}

impl DrMeasurement {
    /// Re-expresses the result against a different noise model.
    pub fn with_noise(&self, noise: &crate::metrics::NoiseModel) -> Self {
        let i_n = crate::metrics::input_referred_noise(noise, self.r_hrs);
        Self {
            i_n,
            dr_fixed_db: crate::metrics::dynamic_range_db(self.fixed.i_max, i_n),
            dr_agc_db: crate::metrics::dynamic_range_db(self.agc.i_max, i_n),
            ..self.clone()
        }
    }

    pub fn extension_db(&self) -> f64 {
        self.dr_agc_db - self.dr_fixed_db
    }
}

fn range_run(
    circuit: &CircuitConfig,
    sim: &SimConfig,
    stairs: &Staircase,
    seed: u64,
) -> Result<RangeRun, SimError> {
    let levels = stairs.levels();
    let sim = SimConfig {
        duration: levels.len() as f64 * stairs.level_time,
        stop_on: None,
        ..sim.clone()
    };
    let mut tr = Transient::new(circuit, &sim, seed)?;
    let rail = circuit.opamp.v_out_min.abs();
    let mut last_linear: Option<(f64, f64)> = None;
    for (k, &i) in levels.iter().enumerate() {
        tr.advance_to((k + 1) as f64 * stairs.level_time)?;
        if tr.cond.saturated {
            let (i_lin, z_t) = last_linear.ok_or_else(|| {
                SimError::Measurement(format!("output already clipped at the first level {i:e} A"))
            })?;
            let i_max = rail / z_t;
            if !(i_lin <= i_max * (1.0 + 1e-9) && i_max <= i * (1.0 + 1e-9)) {
                return Err(SimError::Measurement(format!(
                    "rail-limited current {i_max:e} A is outside the bracket [{i_lin:e}, {i:e}] A"
                )));
            }
            return Ok(RangeRun {
                i_last_linear: i_lin,
                i_first_clipped: i,
                z_t,
                i_max,
            });
        }
        last_linear = Some((i, tr.tia.v_o.abs() / i));
    }
    Err(SimError::Measurement(format!(
        "staircase up to {:e} A never clipped the output",
        stairs.i_stop
    )))
}

/// Measures the rail-limited dynamic range with a fixed HRS feedback element
/// and with the device free to switch.
///
/// The input is replaced by a current staircase; the reading tone, reset
/// commands and compliance clamp are removed for the measurement.
pub fn measure_dynamic_range(
    circuit: &CircuitConfig,
    sim: &SimConfig,
    noise: &crate::metrics::NoiseModel,
    stairs: &Staircase,
    seed: u64,
) -> Result<DrMeasurement, SimError> {
    stairs.validate()?;
    let mut base = circuit.clone();
    base.sources.input = stairs.waveform();
    base.sources.drive = Drive::Current;
    base.sources.reading.amplitude = 0.0;
    base.sources.reset_commands.clear();
    base.front_end.compliance_enabled = false;
    base.initial_mode = Mode::Hrs;

    let mut fixed_cfg = base.clone();
    fixed_cfg.switching_enabled = false;
    let fixed = range_run(&fixed_cfg, sim, stairs, seed)?;
    let agc = range_run(&base, sim, stairs, seed)?;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sample = crate::memristor::sample_cycle(&circuit.memristor, &mut rng)?;
    let r_hrs = circuit.feedback.r_eff(sample.r_off);
    let m = DrMeasurement {
        fixed,
        agc,
        r_hrs,
        i_n: 0.0,
        dr_fixed_db: 0.0,
        dr_agc_db: 0.0,
    };
    Ok(m.with_noise(noise))
}

/// Ratio of the output amplitude at test frequency `f` after a RESET to the
/// amplitude before it.
///
/// The "before" window is the `periods` periods ending at the reset command;
/// the "after" window starts at the verify decision, once the pulse and its
/// recovery are over. `None` if either window does not fit in the trace.
pub fn reset_gain_ratio(trace: &TraceSet, f: f64, periods: f64) -> Option<f64> {
    let span = periods / f;
    let t_cmd = trace.first(EventKind::ResetCmd)?.time;
    let t_after = trace
        .events
        .iter()
        .find(|e| matches!(e.kind, EventKind::VerifyOk | EventKind::VerifyFail))?
        .time;
    if t_cmd - span < 0.0 || t_after + span > *trace.time.last()? * (1.0 + 1e-12) {
        return None;
    }
    let before = crate::analysis::tone_amplitude(&trace.time, &trace.v_o, t_cmd - span, t_cmd, f)?;
    let after = crate::analysis::tone_amplitude(&trace.time, &trace.v_o, t_after, t_after + span, f)?;
    Some(after / before)
}
