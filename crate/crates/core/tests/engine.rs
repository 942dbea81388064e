use memtia::blocks::{FeedbackElement, WaveformSpec};
use memtia::circuit::{CircuitConfig, Drive};
use memtia::config::load;
use memtia::engine::{measure_dynamic_range, run_transient, EventKind, SimConfig, Transient};
use memtia::error::SimError;
use memtia::memristor::Mode;
use memtia::metrics::NoiseModel;

fn quiet() -> CircuitConfig {
    let mut c = CircuitConfig::undetermined();
    c.memristor = c.memristor.nominal_only();
    c.front_end.compliance_enabled = false;
    c.sources.drive = Drive::Current;
    c
}

#[test]
fn zero_stimulus_is_silent() {
    let c = quiet();
    let sim = SimConfig {
        duration: 2e-6,
        ..SimConfig::default()
    };
    let tr = run_transient(&c, &sim, 5).unwrap();
    assert_eq!(tr.len(), 2001);
    for col in [
        &tr.v_in, &tr.i_in, &tr.v_n, &tr.v_o, &tr.v_dev, &tr.v_lp, &tr.v_hp, &tr.v_det, &tr.v_rst,
    ] {
        assert!(col.iter().all(|&x| x == 0.0));
    }
    assert!(tr.r_mem.iter().all(|&r| r == 15e3));
    assert!(tr.events.is_empty());
}

#[test]
fn set_lands_one_hold_time_after_crossing() {
    let cfg = load("fig12_set_transition").unwrap();
    let tr = run_transient(&cfg.circuit, &cfg.sim, cfg.seed).unwrap();
    assert_eq!(tr.count(EventKind::Set), 1);
    let e = tr.first(EventKind::Set).unwrap();
    let crossing = e.field("crossing_s").unwrap();
    let lag = e.time - crossing;
    assert!(
        (lag - cfg.circuit.memristor.t_set).abs() <= cfg.sim.event_tolerance + 1e-15,
        "{lag}"
    );
    assert_eq!(e.field("r_before"), Some(15e3));
    assert_eq!(e.field("r_after"), Some(120.0));
    // The crossing found by bisection sits inside the grid step where the
    // recorded device voltage first reaches the threshold.
    let k = (0..tr.len()).find(|&k| tr.v_dev[k] >= 0.8).unwrap();
    assert!(crossing <= tr.time[k] && crossing > tr.time[k - 1]);
}

#[test]
fn reset_raises_gain_by_resistance_ratio() {
    let cfg = load("fig13_reset").unwrap();
    let tr = run_transient(&cfg.circuit, &cfg.sim, cfg.seed).unwrap();
    assert_eq!(tr.count(EventKind::Reset), 1);
    let r = memtia::engine::reset_gain_ratio(&tr, cfg.circuit.sources.input.frequency, 2.0).unwrap();
    assert!((r / 125.0 - 1.0).abs() < 0.05, "{r}");
}

#[test]
fn switches_alternate_with_mode() {
    let mut c = quiet();
    // Large triangle current sets the device; periodic reset commands clear it.
    c.sources.input = WaveformSpec::triangle(120e-6, 100e3);
    c.sources.reset_commands = vec![12e-6, 32e-6];
    c.controller.auto_terminate = false;
    let sim = SimConfig {
        duration: 50e-6,
        ..SimConfig::default()
    };
    let tr = run_transient(&c, &sim, 2).unwrap();
    let mut mode = Mode::Hrs;
    let mut n = 0;
    for e in &tr.events {
        match e.kind {
            EventKind::Set => {
                assert_eq!(mode, Mode::Hrs);
                mode = Mode::Lrs;
                n += 1;
            }
            EventKind::Reset => {
                assert_eq!(mode, Mode::Lrs);
                mode = Mode::Hrs;
                n += 1;
            }
            _ => {}
        }
    }
    assert!(n >= 3, "{n} switches");
    assert!(tr.r_mem.iter().all(|&r| r == 15e3 || r == 120.0));
    assert!(tr.events.windows(2).all(|w| w[0].time <= w[1].time));
}

#[test]
fn identical_inputs_identical_traces() {
    let cfg = load("fig13_reset").unwrap();
    let a = run_transient(&cfg.circuit, &cfg.sim, 11).unwrap();
    let b = run_transient(&cfg.circuit, &cfg.sim, 11).unwrap();
    assert_eq!(a, b);
}

#[test]
fn incremental_advance_matches_single_run() {
    let cfg = load("fig12_set_transition").unwrap();
    let whole = run_transient(&cfg.circuit, &cfg.sim, 3).unwrap();
    let mut tr = Transient::new(&cfg.circuit, &cfg.sim, 3).unwrap();
    for k in 1..=30 {
        tr.advance_to(k as f64 * 1e-6).unwrap();
    }
    assert!(tr.is_stopped());
    assert_eq!(tr.into_trace(), whole);
}

#[test]
fn decimation_keeps_grid_rows_and_the_end() {
    let mut c = quiet();
    c.sources.input = WaveformSpec::sine(10e-6, 1e6);
    let full = SimConfig {
        duration: 1.05e-6,
        ..SimConfig::default()
    };
    let dec = SimConfig {
        record_decimation: 100,
        ..full.clone()
    };
    let a = run_transient(&c, &full, 1).unwrap();
    let b = run_transient(&c, &dec, 1).unwrap();
    assert_eq!(b.len(), 1 + 10 + 1);
    for (k, &t) in b.time.iter().enumerate() {
        let j = a.time.iter().position(|&x| x == t).unwrap();
        assert_eq!(a.v_o[j], b.v_o[k]);
    }
    assert_eq!(b.time.last(), a.time.last());
}

#[test]
fn stop_on_ends_the_run() {
    let cfg = load("fig12_set_transition").unwrap();
    let mut sim = cfg.sim.clone();
    sim.stop_on = Some(EventKind::Set);
    let tr = run_transient(&cfg.circuit, &sim, cfg.seed).unwrap();
    let t_set = tr.first(EventKind::Set).unwrap().time;
    let t_end = *tr.time.last().unwrap();
    assert!(t_end >= t_set && t_end - t_set < sim.dt + 1e-15);
}

#[test]
fn response_decays_after_sources_stop() {
    let mut c = quiet();
    c.switching_enabled = false;
    c.sources.input = WaveformSpec::pulse(40e-6, 0.0, 1e-6);
    let sim = SimConfig {
        duration: 3e-6,
        ..SimConfig::default()
    };
    let tr = run_transient(&c, &sim, 1).unwrap();
    let start = tr.time.iter().position(|&t| t >= 1.2e-6).unwrap();
    let window = 100;
    let envelope = |col: &[f64]| -> Vec<f64> {
        col[start..]
            .chunks(window)
            .map(|w| w.iter().fold(0.0f64, |m, x| m.max(x.abs())))
            .collect()
    };
    for col in [&tr.v_o, &tr.v_n, &tr.v_lp] {
        let env = envelope(col);
        assert!(env.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-9)), "{env:?}");
        assert!(*env.last().unwrap() < 1e-3 * tr.v_o.iter().fold(0.0f64, |m, x| m.max(x.abs())));
    }
}

#[test]
fn saturation_outlasts_the_overdrive() {
    let cfg = load("fig3_saturation").unwrap();
    let tr = run_transient(&cfg.circuit, &cfg.sim, cfg.seed).unwrap();
    let limit = cfg.circuit.opamp.v_out_max / cfg.circuit.memristor.r_off;
    let last_over = (0..tr.len())
        .filter(|&k| tr.i_in[k].abs() > limit)
        .map(|k| tr.time[k])
        .next_back()
        .unwrap();
    let exit = tr.first(EventKind::SatExit).unwrap().time;
    assert_eq!(tr.count(EventKind::SatEnter), 1);
    assert!(
        exit > last_over,
        "exit {exit} vs input back below limit after {last_over}"
    );
    assert_eq!(tr.count(EventKind::Set), 0);
}

#[test]
fn no_switching_means_no_extension() {
    let cfg = load("dr_measurement").unwrap();
    let mut c = cfg.circuit.clone();
    c.switching_enabled = false;
    let noise = NoiseModel::new(1e-4, "test").unwrap();
    let m = measure_dynamic_range(&c, &cfg.sim, &noise, &cfg.dr.staircase, 1).unwrap();
    assert!(m.extension_db().abs() < 1e-9, "{}", m.extension_db());
}

#[test]
fn starved_bisection_reports_divergence() {
    let cfg = load("fig3_saturation").unwrap();
    let mut sim = cfg.sim.clone();
    sim.event_tolerance = 1e-18;
    sim.max_bisections = 8;
    let err = run_transient(&cfg.circuit, &sim, 1).unwrap_err();
    match err {
        SimError::BisectionDiverged {
            time, max_bisections, ..
        } => {
            assert_eq!(max_bisections, 8);
            assert!(time > 1.9e-6 && time < 2.1e-6, "{time}");
        }
        e => panic!("unexpected {e}"),
    }
}

#[test]
fn invalid_configuration_is_rejected_up_front() {
    let c = quiet();
    let bad_dt = SimConfig {
        dt: 0.0,
        ..SimConfig::default()
    };
    assert!(run_transient(&c, &bad_dt, 1).is_err());
    let mut bad = quiet();
    bad.feedback.element = FeedbackElement::Fixed;
    bad.feedback.r_fixed = -1.0;
    assert!(run_transient(&bad, &SimConfig::default(), 1).is_err());
}
