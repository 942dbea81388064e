//! Configuration documents.
//!
//! A configuration is a TOML document of optional sections; every key is
//! optional and falls back to a documented default. The accepted sections and
//! keys are listed in [`SCHEMA`]. Parsing records where each value came from
//! (`file`, `default`, or `derived` for the frequency plan and detector
//! thresholds computed from the rest of the chain).

use std::fmt::{self, Write as _};

use toml::{Table, Value};

use crate::blocks::{FeedbackElement, Orientation, WaveKind, WaveformSpec};
use crate::circuit::{CircuitConfig, DerivedFields, Drive, DEFAULT_READING_AMPLITUDE};
use crate::engine::{EventKind, SimConfig, Staircase};
use crate::error::{ConfigError, InvalidParam};
use crate::memristor::Mode;
use crate::metrics::NoiseModel;
use crate::variability::McScenario;

/// Sections and the keys each accepts.
pub const SCHEMA: &[(&str, &[&str])] = &[
    (
        "sim",
        &[
            "dt",
            "duration",
            "event_tolerance",
            "max_bisections",
            "record_decimation",
            "stop_on",
            "seed",
        ],
    ),
    (
        "memristor",
        &[
            "r_off",
            "r_on",
            "v_set",
            "v_reset",
            "t_set",
            "t_reset",
            "sigma_vset_rel",
            "sigma_roff_rel",
            "sigma_ron_rel",
            "initial_mode",
            "switching_enabled",
        ],
    ),
    ("opamp", &["a0", "gbw", "v_out_min", "v_out_max"]),
    ("feedback", &["element", "r_fixed", "c_f", "orientation"]),
    (
        "front_end",
        &[
            "atten_gain",
            "gm",
            "ota_i_max",
            "i_compliance",
            "r_reset_in",
            "c_in",
            "r_out",
            "compliance_enabled",
        ],
    ),
    ("diplexer", &["f_cross"]),
    (
        "detector",
        &[
            "k_log",
            "v_ref",
            "v_floor",
            "tau_attack",
            "tau_decay",
            "tau_settle",
            "v_det_max",
        ],
    ),
    (
        "controller",
        &[
            "v_det_hi",
            "v_det_lo",
            "reset_amplitude",
            "reset_max_width",
            "auto_terminate",
            "verify_window",
            "auto_reset_after",
        ],
    ),
    ("reading", &["amplitude", "frequency"]),
    (
        "input",
        &[
            "drive",
            "kind",
            "amplitude",
            "frequency",
            "offset",
            "delay",
            "width",
            "points",
        ],
    ),
    ("reset", &["commands"]),
    ("noise", &["v_no", "target_db"]),
    ("ac", &["f_min", "f_max", "points", "r_c"]),
    ("iv", &["v_peak", "points_per_cycle", "cycles"]),
    ("mc", &["scenario", "trials"]),
    ("dr", &["i_start", "i_stop", "step_db", "level_time", "edge"]),
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Source {
    File,
    Default,
    Derived,
}

impl fmt::Display for Source {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::File => "file",
            Self::Default => "default",
            Self::Derived => "derived",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProvenanceEntry {
    pub key: String,
    pub value: String,
    pub source: Source,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AcSettings {
    pub f_min: f64,
    pub f_max: f64,
    pub points: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IvSettings {
    pub v_peak: f64,
    pub points_per_cycle: usize,
    pub cycles: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct McSettings {
    pub scenario: McScenario,
    pub trials: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DrSettings {
    pub staircase: Staircase,
    /// Fixed-resistor dynamic range the noise is calibrated to when no
    /// explicit `v_no` is given.
    pub target_db: f64,
    /// True if `noise.v_no` came from the document.
    pub explicit_noise: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    pub circuit: CircuitConfig,
    pub sim: SimConfig,
    pub seed: u64,
    pub ac: AcSettings,
    pub iv: IvSettings,
    pub mc: McSettings,
    pub dr: DrSettings,
    pub provenance: Vec<ProvenanceEntry>,
}

impl Config {
    pub fn provenance_text(&self) -> String {
        let width = self.provenance.iter().map(|p| p.key.len()).max().unwrap_or(0);
        let mut s = String::new();
        for p in &self.provenance {
            let _ = writeln!(s, "{:<width$} = {}  ({})", p.key, p.value, p.source);
        }
        s
    }

    pub fn source_of(&self, key: &str) -> Option<Source> {
        self.provenance.iter().find(|p| p.key == key).map(|p| p.source)
    }
}

/// Shipped scenario documents, by name.
pub const SCENARIOS: &[(&str, &str)] = &[
    ("default", include_str!("../scenarios/default.toml")),
    (
        "fig3_saturation",
        include_str!("../scenarios/fig3_saturation.toml"),
    ),
    ("fig5_iv", include_str!("../scenarios/fig5_iv.toml")),
    ("fig11_ac", include_str!("../scenarios/fig11_ac.toml")),
    (
        "fig12_set_transition",
        include_str!("../scenarios/fig12_set_transition.toml"),
    ),
    ("fig13_reset", include_str!("../scenarios/fig13_reset.toml")),
    ("dr_measurement", include_str!("../scenarios/dr_measurement.toml")),
    ("mc_variability", include_str!("../scenarios/mc_variability.toml")),
];

pub fn scenario_text(name: &str) -> Option<&'static str> {
    SCENARIOS.iter().find(|(n, _)| *n == name).map(|(_, t)| *t)
}

/// Resolves a shipped scenario name or a file path to document text.
pub fn resolve(name_or_path: &str) -> Result<String, ConfigError> {
    if let Some(t) = scenario_text(name_or_path) {
        return Ok(t.to_string());
    }
    std::fs::read_to_string(name_or_path).map_err(|_| ConfigError::NotFound(name_or_path.to_string()))
}

pub fn load(name_or_path: &str) -> Result<Config, ConfigError> {
    parse_config(&resolve(name_or_path)?)
}

fn nearest<'a>(needle: &str, candidates: impl Iterator<Item = &'a str>) -> Option<String> {
    candidates
        .map(|c| (strsim::jaro_winkler(needle, c), c))
        .filter(|(score, _)| *score > 0.7)
        .max_by(|a, b| a.0.total_cmp(&b.0))
        .map(|(_, c)| c.to_string())
}

fn check_keys(doc: &Table) -> Result<(), ConfigError> {
    for (section, body) in doc {
        let Some((_, keys)) = SCHEMA.iter().find(|(s, _)| s == section) else {
            return Err(ConfigError::UnknownKey {
                key: section.clone(),
                suggestion: nearest(section, SCHEMA.iter().map(|(s, _)| *s)),
            });
        };
        let Value::Table(t) = body else {
            return Err(ConfigError::WrongType {
                key: section.clone(),
                expected: "a [section] table",
            });
        };
        for key in t.keys() {
            if !keys.contains(&key.as_str()) {
                let full = |k: &str| format!("{section}.{k}");
                return Err(ConfigError::UnknownKey {
                    key: full(key),
                    suggestion: nearest(key, keys.iter().copied()).map(|k| full(&k)),
                });
            }
        }
    }
    Ok(())
}

struct Reader<'a> {
    doc: &'a Table,
    prov: Vec<ProvenanceEntry>,
}

impl Reader<'_> {
    fn raw(&self, section: &str, key: &str) -> Option<&Value> {
        self.doc.get(section)?.as_table()?.get(key)
    }

    fn has(&self, section: &str, key: &str) -> bool {
        self.raw(section, key).is_some()
    }

    fn note(&mut self, section: &str, key: &str, value: String, source: Source) {
        self.prov.push(ProvenanceEntry {
            key: format!("{section}.{key}"),
            value,
            source,
        });
    }

    fn get<T: fmt::Debug>(
        &mut self,
        section: &str,
        key: &str,
        default: T,
        expected: &'static str,
        conv: impl Fn(&Value) -> Option<T>,
        show: impl Fn(&T) -> String,
    ) -> Result<T, ConfigError> {
        let (v, src) = match self.raw(section, key) {
            Some(raw) => (
                conv(raw).ok_or_else(|| ConfigError::WrongType {
                    key: format!("{section}.{key}"),
                    expected,
                })?,
                Source::File,
            ),
            None => (default, Source::Default),
        };
        self.note(section, key, show(&v), src);
        Ok(v)
    }

    fn f64(&mut self, section: &str, key: &str, default: f64) -> Result<f64, ConfigError> {
        self.get(section, key, default, "a number", as_f64, |v| format!("{v:e}"))
    }

    fn opt_f64(&mut self, section: &str, key: &str) -> Result<Option<f64>, ConfigError> {
        self.get(
            section,
            key,
            None,
            "a number",
            |v| as_f64(v).map(Some),
            |v| match v {
                Some(x) => format!("{x:e}"),
                None => "none".into(),
            },
        )
    }

    fn int(&mut self, section: &str, key: &str, default: i64) -> Result<i64, ConfigError> {
        self.get(section, key, default, "an integer", Value::as_integer, |v| {
            v.to_string()
        })
    }

    fn uint(&mut self, section: &str, key: &str, default: u64, min: u64) -> Result<u64, ConfigError> {
        let v = self.int(section, key, default as i64)?;
        if v < min as i64 {
            return Err(ConfigError::OutOfRange {
                key: format!("{section}.{key}"),
                invariant: format!("{key} >= {min}"),
            });
        }
        Ok(v as u64)
    }

    fn bool(&mut self, section: &str, key: &str, default: bool) -> Result<bool, ConfigError> {
        self.get(section, key, default, "a boolean", Value::as_bool, |v| {
            v.to_string()
        })
    }

    fn choice<T: Copy + fmt::Debug>(
        &mut self,
        section: &str,
        key: &str,
        default: T,
        expected: &'static str,
        parse: impl Fn(&str) -> Option<T>,
        name: impl Fn(T) -> String,
    ) -> Result<T, ConfigError> {
        self.get(
            section,
            key,
            default,
            expected,
            |v| v.as_str().and_then(&parse),
            |v| name(*v),
        )
    }

    fn f64_list(&mut self, section: &str, key: &str) -> Result<Vec<f64>, ConfigError> {
        self.get(
            section,
            key,
            Vec::new(),
            "an array of numbers",
            |v| v.as_array()?.iter().map(as_f64).collect(),
            |v| format!("{v:?}"),
        )
    }

    fn points(&mut self, section: &str, key: &str) -> Result<Vec<(f64, f64)>, ConfigError> {
        self.get(
            section,
            key,
            Vec::new(),
            "an array of [time, value] pairs",
            |v| {
                v.as_array()?
                    .iter()
                    .map(|p| match p.as_array()?.as_slice() {
                        [t, y] => Some((as_f64(t)?, as_f64(y)?)),
                        _ => None,
                    })
                    .collect()
            },
            |v| format!("{v:?}"),
        )
    }
}

fn as_f64(v: &Value) -> Option<f64> {
    match v {
        Value::Float(x) => Some(*x),
        Value::Integer(i) => Some(*i as f64),
        _ => None,
    }
}

fn out_of_range(section: &str, e: InvalidParam) -> ConfigError {
    ConfigError::OutOfRange {
        key: section.to_string(),
        invariant: e.message,
    }
}

/// Parses and validates a configuration document.
pub fn parse_config(text: &str) -> Result<Config, ConfigError> {
    let doc: Table = text
        .parse()
        .map_err(|e: toml::de::Error| ConfigError::Syntax(e.to_string()))?;
    check_keys(&doc)?;
    let mut r = Reader {
        doc: &doc,
        prov: Vec::new(),
    };

    let sim_d = SimConfig::default();
    let sim = SimConfig {
        dt: r.f64("sim", "dt", sim_d.dt)?,
        duration: r.f64("sim", "duration", sim_d.duration)?,
        event_tolerance: r.f64("sim", "event_tolerance", sim_d.event_tolerance)?,
        max_bisections: r.uint("sim", "max_bisections", sim_d.max_bisections as u64, 0)? as u32,
        record_decimation: r.uint("sim", "record_decimation", sim_d.record_decimation as u64, 0)? as usize,
        stop_on: r.get(
            "sim",
            "stop_on",
            None,
            "an event kind such as \"SET\"",
            |v| v.as_str().and_then(EventKind::parse).map(Some),
            |v| v.map_or("none".into(), |k| k.name().to_string()),
        )?,
    };
    sim.validate().map_err(|e| out_of_range("sim", e))?;
    let seed = r.uint("sim", "seed", 1, 0)?;

    let mut c = CircuitConfig::undetermined();
    let m = c.memristor.clone();
    c.memristor.r_off = r.f64("memristor", "r_off", m.r_off)?;
    c.memristor.r_on = r.f64("memristor", "r_on", m.r_on)?;
    c.memristor.v_set = r.f64("memristor", "v_set", m.v_set)?;
    c.memristor.v_reset = r.f64("memristor", "v_reset", m.v_reset)?;
    c.memristor.t_set = r.f64("memristor", "t_set", m.t_set)?;
    c.memristor.t_reset = r.f64("memristor", "t_reset", m.t_reset)?;
    c.memristor.sigma_vset_rel = r.f64("memristor", "sigma_vset_rel", m.sigma_vset_rel)?;
    c.memristor.sigma_roff_rel = r.f64("memristor", "sigma_roff_rel", m.sigma_roff_rel)?;
    c.memristor.sigma_ron_rel = r.f64("memristor", "sigma_ron_rel", m.sigma_ron_rel)?;
    c.initial_mode = r.choice(
        "memristor",
        "initial_mode",
        Mode::Hrs,
        "\"HRS\" or \"LRS\"",
        |s| match s {
            "HRS" => Some(Mode::Hrs),
            "LRS" => Some(Mode::Lrs),
            _ => None,
        },
        |m| m.to_string(),
    )?;
    c.switching_enabled = r.bool("memristor", "switching_enabled", true)?;
    c.memristor.validate().map_err(|e| out_of_range("memristor", e))?;

    let o = c.opamp.clone();
    c.opamp.a0 = r.f64("opamp", "a0", o.a0)?;
    c.opamp.gbw = r.f64("opamp", "gbw", o.gbw)?;
    c.opamp.v_out_min = r.f64("opamp", "v_out_min", o.v_out_min)?;
    c.opamp.v_out_max = r.f64("opamp", "v_out_max", o.v_out_max)?;
    c.opamp.validate().map_err(|e| out_of_range("opamp", e))?;

    let f = c.feedback.clone();
    c.feedback.element = r.choice(
        "feedback",
        "element",
        f.element,
        "\"memristor\", \"fixed\" or \"memristor_parallel_fixed\"",
        FeedbackElement::parse,
        |e| e.name().to_string(),
    )?;
    c.feedback.r_fixed = r.f64("feedback", "r_fixed", f.r_fixed)?;
    c.feedback.c_f = r.f64("feedback", "c_f", f.c_f)?;
    c.feedback.orientation = r.choice(
        "feedback",
        "orientation",
        f.orientation,
        "\"standard\" or \"reversed\"",
        Orientation::parse,
        |o| o.name().to_string(),
    )?;
    c.feedback.validate().map_err(|e| out_of_range("feedback", e))?;

    let fe = c.front_end.clone();
    c.front_end.atten_gain = r.f64("front_end", "atten_gain", fe.atten_gain)?;
    c.front_end.gm = r.f64("front_end", "gm", fe.gm)?;
    c.front_end.ota_i_max = r.f64("front_end", "ota_i_max", fe.ota_i_max)?;
    c.front_end.i_compliance = r.f64("front_end", "i_compliance", fe.i_compliance)?;
    c.front_end.r_reset_in = r.f64("front_end", "r_reset_in", fe.r_reset_in)?;
    c.front_end.c_in = r.f64("front_end", "c_in", fe.c_in)?;
    c.front_end.r_out = r.f64("front_end", "r_out", fe.r_out)?;
    c.front_end.compliance_enabled = r.bool("front_end", "compliance_enabled", fe.compliance_enabled)?;
    c.front_end.validate().map_err(|e| out_of_range("front_end", e))?;

    let d = c.detector.clone();
    c.detector.k_log = r.f64("detector", "k_log", d.k_log)?;
    c.detector.v_ref = r.f64("detector", "v_ref", d.v_ref)?;
    c.detector.v_floor = r.f64("detector", "v_floor", d.v_floor)?;
    c.detector.tau_attack = r.f64("detector", "tau_attack", d.tau_attack)?;
    c.detector.tau_decay = r.f64("detector", "tau_decay", d.tau_decay)?;
    c.detector.tau_settle = r.f64("detector", "tau_settle", d.tau_settle)?;
    c.detector.v_det_max = r.f64("detector", "v_det_max", d.v_det_max)?;
    c.detector.validate().map_err(|e| out_of_range("detector", e))?;

    let k = c.controller.clone();
    c.controller.reset_amplitude = r.f64("controller", "reset_amplitude", k.reset_amplitude)?;
    c.controller.reset_max_width = r.f64("controller", "reset_max_width", k.reset_max_width)?;
    c.controller.auto_terminate = r.bool("controller", "auto_terminate", k.auto_terminate)?;
    c.controller.verify_window = r.f64("controller", "verify_window", k.verify_window)?;
    c.controller.auto_reset_after = r.opt_f64("controller", "auto_reset_after")?;

    c.sources.reading = WaveformSpec::sine(r.f64("reading", "amplitude", DEFAULT_READING_AMPLITUDE)?, 1.0);

    c.sources.drive = r.choice(
        "input",
        "drive",
        Drive::Voltage,
        "\"voltage\" or \"current\"",
        Drive::parse,
        |d| d.name().to_string(),
    )?;
    let kind = r.choice(
        "input",
        "kind",
        WaveKind::Constant,
        "\"constant\", \"sine\", \"triangle\", \"pulse\" or \"pwl\"",
        WaveKind::parse,
        |k| k.name().to_string(),
    )?;
    c.sources.input = WaveformSpec {
        kind,
        amplitude: r.f64("input", "amplitude", 0.0)?,
        frequency: r.f64("input", "frequency", 0.0)?,
        offset: r.f64("input", "offset", 0.0)?,
        delay: r.f64("input", "delay", 0.0)?,
        width: r.f64("input", "width", 0.0)?,
        points: r.points("input", "points")?,
    };
    c.sources
        .input
        .validate("input")
        .map_err(|e| out_of_range("input", e))?;
    c.sources.reset_commands = r.f64_list("reset", "commands")?;

    let explicit_noise = r.has("noise", "v_no");
    let nd = NoiseModel::default();
    let v_no = r.f64("noise", "v_no", nd.v_no)?;
    c.noise = if explicit_noise {
        NoiseModel::new(v_no, "from configuration").map_err(|e| out_of_range("noise", e))?
    } else {
        nd
    };
    let target_db = r.f64("noise", "target_db", 86.3)?;

    let ac = AcSettings {
        f_min: r.f64("ac", "f_min", 1e3)?,
        f_max: r.f64("ac", "f_max", 1e10)?,
        points: r.uint("ac", "points", 400, 50)? as usize,
    };
    if !(ac.f_min > 0.0 && ac.f_min < ac.f_max) {
        return Err(ConfigError::CrossField {
            first: "ac.f_min".into(),
            second: "ac.f_max".into(),
            message: "0 < f_min < f_max".into(),
        });
    }
    c.r_c = r.f64("ac", "r_c", c.r_c)?;

    let iv = IvSettings {
        v_peak: r.f64("iv", "v_peak", 1.2)?,
        points_per_cycle: r.uint("iv", "points_per_cycle", 400, 100)? as usize,
        cycles: r.uint("iv", "cycles", 1, 1)? as usize,
    };
    let mc = McSettings {
        scenario: r.choice(
            "mc",
            "scenario",
            McScenario::SetThreshold,
            "\"set_threshold\", \"dr_extension\" or \"reset_verify\"",
            McScenario::parse,
            |s| s.name().to_string(),
        )?,
        trials: r.uint("mc", "trials", 1000, 1)?,
    };
    let sd = Staircase::default();
    let staircase = Staircase {
        i_start: r.f64("dr", "i_start", sd.i_start)?,
        i_stop: r.f64("dr", "i_stop", sd.i_stop)?,
        step_db: r.f64("dr", "step_db", sd.step_db)?,
        level_time: r.f64("dr", "level_time", sd.level_time)?,
        edge: r.f64("dr", "edge", sd.edge)?,
    };
    staircase.validate().map_err(|e| out_of_range("dr", e))?;

    // Frequency plan and thresholds.
    let f_read = r.opt_f64("reading", "frequency")?;
    let f_cross = r.opt_f64("diplexer", "f_cross")?;
    let hi = r.opt_f64("controller", "v_det_hi")?;
    let lo = r.opt_f64("controller", "v_det_lo")?;
    if hi.is_some() != lo.is_some() {
        return Err(ConfigError::CrossField {
            first: "controller.v_det_hi".into(),
            second: "controller.v_det_lo".into(),
            message: "give both thresholds or neither".into(),
        });
    }
    if let Some(f) = f_read {
        c.sources.reading.frequency = f;
    }
    if let Some(f) = f_cross {
        c.diplexer.f_cross = f;
    }
    if let (Some(h), Some(l)) = (hi, lo) {
        c.controller.v_det_hi = h;
        c.controller.v_det_lo = l;
    }
    let which = DerivedFields {
        reading_frequency: f_read.is_none(),
        f_cross: f_cross.is_none(),
        thresholds: hi.is_none(),
    };
    let bw_hrs = crate::analysis::hrs_bandwidth(&c).map_err(|e| ConfigError::OutOfRange {
        key: "reading.frequency".into(),
        invariant: format!("cannot derive the HRS bandwidth: {e}"),
    })?;
    c.derive_defaults(which).map_err(|e| ConfigError::OutOfRange {
        key: "reading.frequency".into(),
        invariant: e.to_string(),
    })?;
    let mut mark = |key: &str, v: f64| {
        if let Some(p) = r.prov.iter_mut().find(|p| p.key == key) {
            p.value = format!("{v:e}");
            p.source = Source::Derived;
        }
    };
    if which.reading_frequency {
        mark("reading.frequency", c.sources.reading.frequency);
    }
    if which.f_cross {
        mark("diplexer.f_cross", c.diplexer.f_cross);
    }
    if which.thresholds {
        mark("controller.v_det_hi", c.controller.v_det_hi);
        mark("controller.v_det_lo", c.controller.v_det_lo);
    }
    c.diplexer.validate().map_err(|e| out_of_range("diplexer", e))?;
    c.controller
        .validate()
        .map_err(|e| out_of_range("controller", e))?;
    c.sources
        .reading
        .validate("reading")
        .map_err(|e| out_of_range("reading", e))?;

    if c.reading_enabled() {
        if !(c.sources.reading.frequency > bw_hrs) {
            return Err(ConfigError::CrossField {
                first: "reading.frequency".into(),
                second: "memristor.r_off".into(),
                message: format!(
                    "reading frequency {:e} Hz must exceed the HRS bandwidth {bw_hrs:e} Hz",
                    c.sources.reading.frequency
                ),
            });
        }
        if !(bw_hrs < c.diplexer.f_cross && c.diplexer.f_cross < c.sources.reading.frequency) {
            return Err(ConfigError::CrossField {
                first: "diplexer.f_cross".into(),
                second: "reading.frequency".into(),
                message: format!(
                    "crossover {:e} Hz must lie between the HRS bandwidth {bw_hrs:e} Hz and the reading tone",
                    c.diplexer.f_cross
                ),
            });
        }
    }
    c.validate().map_err(|e| out_of_range(&e.context, e.clone()))?;

    Ok(Config {
        circuit: c,
        sim,
        seed,
        ac,
        iv,
        mc,
        dr: DrSettings {
            staircase,
            target_db,
            explicit_noise,
        },
        provenance: r.prov,
    })
}
