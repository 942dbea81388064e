//! Monte Carlo over cycle-to-cycle device variation.
//!
//! Every trial gets its own generator seeded from `(master_seed, index)`, so
//! a trial's result does not depend on how many trials run or in what order.

use std::fmt::Write as _;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::blocks::WaveformSpec;
use crate::circuit::{CircuitConfig, Drive};
use crate::engine::{EventKind, SimConfig, Transient};
use crate::error::{InvalidParam, SimError};
use crate::memristor::{sample_cycle, CycleSample, MemristorParams, Mode};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum McScenario {
    /// Input current at which the device first sees its SET voltage.
    SetThreshold,
    /// HRS/LRS transimpedance ratio in dB, measured at a small input.
    DrExtension,
    /// RESET latency after the pulse starts, with the verify outcome.
    ResetVerify,
}

impl McScenario {
    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "set_threshold" => Self::SetThreshold,
            "dr_extension" => Self::DrExtension,
            "reset_verify" => Self::ResetVerify,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::SetThreshold => "set_threshold",
            Self::DrExtension => "dr_extension",
            Self::ResetVerify => "reset_verify",
        }
    }

    fn metric_unit(self) -> &'static str {
        match self {
            Self::SetThreshold => "A",
            Self::DrExtension => "dB",
            Self::ResetVerify => "s",
        }
    }
}

/// Counter-mode child seed: the SplitMix64 output for position `index` of
/// the stream keyed by `master`.
pub fn child_seed(master: u64, index: u64) -> u64 {
    let mut z = master.wrapping_add(index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// First cycle sample a trial will use, drawn without simulating.
pub fn trial_sample(params: &MemristorParams, seed: u64) -> Result<CycleSample, SimError> {
    sample_cycle(params, &mut ChaCha8Rng::seed_from_u64(seed))
}

#[derive(Debug, Clone, PartialEq)]
pub struct McTrial {
    pub trial: u64,
    pub seed: u64,
    pub sample: CycleSample,
    /// `None` when the trial produced no value for the metric.
    pub metric: Option<f64>,
    pub outcome: String,
    /// True if the simulation itself failed.
    pub failed: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Summary {
    pub n: usize,
    pub mean: f64,
    pub std_dev: f64,
    pub p5: f64,
    pub p50: f64,
    pub p95: f64,
}

impl Summary {
    /// Sample statistics; percentiles by linear interpolation between order
    /// statistics.
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let n = values.len();
        let mean = values.iter().sum::<f64>() / n as f64;
        let var = if n > 1 {
            values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64
        } else {
            0.0
        };
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        let pct = |p: f64| {
            let x = p * (n - 1) as f64;
            let (i, frac) = (x.floor() as usize, x.fract());
            if i + 1 < n {
                sorted[i] + frac * (sorted[i + 1] - sorted[i])
            } else {
                sorted[i]
            }
        };
        Some(Self {
            n,
            mean,
            std_dev: var.sqrt(),
            p5: pct(0.05),
            p50: pct(0.50),
            p95: pct(0.95),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct McReport {
    pub scenario: McScenario,
    pub master_seed: u64,
    pub records: Vec<McTrial>,
    pub summary: Option<Summary>,
    pub failures: usize,
}

impl McReport {
    pub fn trials(&self) -> usize {
        self.records.len()
    }

    pub fn metrics(&self) -> Vec<f64> {
        self.records.iter().filter_map(|r| r.metric).collect()
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("trial,seed,v_set,r_off,r_on,metric,outcome\n");
        for r in &self.records {
            let metric = r
                .metric
                .map(|m| format!("{m:.8e}"))
                .unwrap_or_else(|| "nan".into());
            let _ = writeln!(
                s,
                "{},{},{:.8e},{:.8e},{:.8e},{},{}",
                r.trial, r.seed, r.sample.v_set, r.sample.r_off, r.sample.r_on, metric, r.outcome
            );
        }
        s
    }

    pub fn summary_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "scenario      {}", self.scenario.name());
        let _ = writeln!(s, "master_seed   {}", self.master_seed);
        let _ = writeln!(s, "trials        {}", self.trials());
        let _ = writeln!(s, "failed        {}", self.failures);
        match &self.summary {
            Some(m) => {
                let u = self.scenario.metric_unit();
                let _ = writeln!(s, "with_metric   {}", m.n);
                let _ = writeln!(s, "mean          {:.8e} {u}", m.mean);
                let _ = writeln!(s, "std_dev       {:.8e} {u}", m.std_dev);
                let _ = writeln!(s, "p5            {:.8e} {u}", m.p5);
                let _ = writeln!(s, "p50           {:.8e} {u}", m.p50);
                let _ = writeln!(s, "p95           {:.8e} {u}", m.p95);
            }
            None => s.push_str("no trial produced a metric\n"),
        }
        if self.scenario == McScenario::ResetVerify {
            for tag in ["VERIFY_OK", "VERIFY_FAIL", "no_reset", "no_verify"] {
                let n = self.records.iter().filter(|r| r.outcome == tag).count();
                let _ = writeln!(s, "{tag:<13} {n}");
            }
        }
        s
    }
}

/// Stimulus windows of the built-in scenarios.
pub const SET_RAMP_TIME: f64 = 200e-6;
pub const SET_RAMP_TOP: f64 = 1e-3;
pub const DR_PROBE_CURRENT: f64 = 5e-6;
pub const DR_SET_CURRENT: f64 = 2e-3;
pub const RESET_COMMAND_AT: f64 = 10e-6;

fn scenario_setup(base: &CircuitConfig, sim: &SimConfig, scenario: McScenario) -> (CircuitConfig, SimConfig) {
    let mut c = base.clone();
    let mut s = sim.clone();
    c.switching_enabled = true;
    c.sources.reset_commands.clear();
    match scenario {
        McScenario::SetThreshold => {
            c.initial_mode = Mode::Hrs;
            c.sources.drive = Drive::Current;
            c.sources.reading.amplitude = 0.0;
            c.front_end.compliance_enabled = false;
            c.sources.input =
                WaveformSpec::pwl(vec![(0.0, 0.0), (SET_RAMP_TIME, SET_RAMP_TOP)]).expect("ordered");
            s.duration = SET_RAMP_TIME;
            s.stop_on = Some(EventKind::Set);
        }
        McScenario::DrExtension => {
            c.initial_mode = Mode::Hrs;
            c.sources.drive = Drive::Current;
            c.sources.reading.amplitude = 0.0;
            c.front_end.compliance_enabled = false;
            let p = DR_PROBE_CURRENT;
            c.sources.input = WaveformSpec::pwl(vec![
                (0.0, 0.0),
                (0.1e-6, p),
                (2e-6, p),
                (6e-6, DR_SET_CURRENT),
                (7e-6, p),
                (9e-6, p),
            ])
            .expect("ordered");
            s.duration = 9e-6;
            s.stop_on = None;
        }
        McScenario::ResetVerify => {
            c.initial_mode = Mode::Lrs;
            c.sources.input = WaveformSpec::constant(0.0);
            c.sources.reset_commands = vec![RESET_COMMAND_AT];
            s.duration = RESET_COMMAND_AT + c.controller.reset_max_width + c.controller.verify_window + 2e-6;
            s.stop_on = Some(EventKind::VerifyOk);
        }
    }
    (c, s)
}

fn run_trial(
    c: &CircuitConfig,
    s: &SimConfig,
    scenario: McScenario,
    seed: u64,
) -> Result<(Option<f64>, String), SimError> {
    let mut tr = Transient::new(c, s, seed)?;
    match scenario {
        McScenario::SetThreshold => {
            tr.advance_to(f64::INFINITY)?;
            let trace = tr.into_trace();
            Ok(
                match trace.first(EventKind::Set).and_then(|e| e.field("i_in_a")) {
                    Some(i) => (Some(i), "SET".into()),
                    None => (None, "no_set".into()),
                },
            )
        }
        McScenario::DrExtension => {
            tr.advance_to(2e-6)?;
            let z_hrs = tr.tia_state().v_o.abs() / DR_PROBE_CURRENT;
            tr.advance_to(f64::INFINITY)?;
            let z_lrs = tr.tia_state().v_o.abs() / DR_PROBE_CURRENT;
            let trace = tr.into_trace();
            if trace.count(EventKind::Set) != 1 || trace.count(EventKind::SatEnter) != 0 {
                return Ok((None, "no_clean_set".into()));
            }
            Ok((Some(20.0 * (z_hrs / z_lrs).log10()), "SET".into()))
        }
        McScenario::ResetVerify => {
            tr.advance_to(f64::INFINITY)?;
            let trace = tr.into_trace();
            let start = trace.first(EventKind::ResetPulseStart).map(|e| e.time);
            let reset = trace.first(EventKind::Reset).map(|e| e.time);
            let latency = match (start, reset) {
                (Some(a), Some(b)) => Some(b - a),
                _ => None,
            };
            let outcome = if reset.is_none() {
                "no_reset"
            } else if trace.count(EventKind::VerifyOk) > 0 {
                "VERIFY_OK"
            } else if trace.count(EventKind::VerifyFail) > 0 {
                "VERIFY_FAIL"
            } else {
                "no_verify"
            };
            Ok((latency, outcome.into()))
        }
    }
}

/// Runs `trials` independent trials of `scenario`.
///
/// The scenario replaces the stimulus and run length; `sim` supplies the
/// step, event tolerance and bisection limit.
pub fn run_monte_carlo(
    circuit: &CircuitConfig,
    sim: &SimConfig,
    scenario: McScenario,
    trials: u64,
    master_seed: u64,
) -> Result<McReport, SimError> {
    if trials < 1 {
        return Err(InvalidParam::new("mc", "trials >= 1").into());
    }
    let (c, s) = scenario_setup(circuit, sim, scenario);
    c.validate()?;
    s.validate()?;
    let records: Vec<McTrial> = (0..trials)
        .into_par_iter()
        .map(|k| {
            let seed = child_seed(master_seed, k);
            let sample = trial_sample(&c.memristor, seed).unwrap_or_default();
            match run_trial(&c, &s, scenario, seed) {
                Ok((metric, outcome)) => McTrial {
                    trial: k,
                    seed,
                    sample,
                    metric,
                    outcome,
                    failed: false,
                },
                Err(e) => McTrial {
                    trial: k,
                    seed,
                    sample,
                    metric: None,
                    outcome: format!("failed: {}", e.to_string().replace(',', ";")),
                    failed: true,
                },
            }
        })
        .collect();
    let failures = records.iter().filter(|r| r.failed).count();
    let values: Vec<f64> = records.iter().filter_map(|r| r.metric).collect();
    Ok(McReport {
        scenario,
        master_seed,
        summary: Summary::of(&values),
        records,
        failures,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn child_seeds_are_distinct_and_stable() {
        let a: Vec<u64> = (0..1000).map(|k| child_seed(42, k)).collect();
        let mut b = a.clone();
        b.sort_unstable();
        b.dedup();
        assert_eq!(b.len(), a.len());
        assert_eq!(child_seed(42, 7), a[7]);
        assert_ne!(child_seed(43, 7), a[7]);
    }

    #[test]
    fn summary_statistics() {
        let v: Vec<f64> = (1..=101).map(f64::from).collect();
        let s = Summary::of(&v).unwrap();
        assert_eq!(s.mean, 51.0);
        assert_eq!(s.p50, 51.0);
        assert_eq!(s.p5, 6.0);
        assert_eq!(s.p95, 96.0);
        let want = (v.iter().map(|x| (x - 51.0f64).powi(2)).sum::<f64>() / 100.0).sqrt();
        assert!((s.std_dev - want).abs() < 1e-12);
        assert!(Summary::of(&[]).is_none());
    }

    #[test]
    fn zero_sigma_gives_zero_spread() {
        let mut c = CircuitConfig::undetermined();
        c.memristor = c.memristor.nominal_only();
        let r = run_monte_carlo(&c, &SimConfig::default(), McScenario::SetThreshold, 8, 3).unwrap();
        let s = r.summary.unwrap();
        assert_eq!(s.n, 8);
        assert_eq!(s.std_dev, 0.0);
        assert!((s.mean - 0.8 / 15e3).abs() / (0.8 / 15e3) < 0.02);
    }

    #[test]
    fn extending_trials_keeps_earlier_records() {
        let c = CircuitConfig::undetermined();
        let sim = SimConfig::default();
        let a = run_monte_carlo(&c, &sim, McScenario::SetThreshold, 4, 9).unwrap();
        let b = run_monte_carlo(&c, &sim, McScenario::SetThreshold, 6, 9).unwrap();
        assert_eq!(a.records[..], b.records[..4]);
    }

    #[test]
    fn zero_trials_rejected() {
        let c = CircuitConfig::undetermined();
        assert!(run_monte_carlo(&c, &SimConfig::default(), McScenario::SetThreshold, 0, 1).is_err());
    }
}
