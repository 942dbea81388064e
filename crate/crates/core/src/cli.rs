//! Command-line front end.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::analysis::{ac_sweep, reading_gain, reset_gain};
use crate::config::{self, Config};
use crate::engine::{self, EventKind};
use crate::error::Error;
use crate::memristor::{iv_sweep, set_voltages};
use crate::metrics::{self, FomTable, NoiseModel};
use crate::output::{self, write_atomic};
use crate::variability::{run_monte_carlo, McScenario};

pub const EXIT_OK: i32 = 0;
pub const EXIT_IO: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_SIM: i32 = 3;
pub const EXIT_CHECK: i32 = 4;

/// Tolerances applied by the `--check` flags.
pub const DR_CHECK_DB: f64 = 0.1;
pub const AC_GAP_CHECK_DB: f64 = 0.2;
pub const FOM_CHECK_REL: f64 = 0.02;
pub const FOM_FLAGGED_CHECK_REL: f64 = 0.15;
/// Window, in input periods, for the post-RESET gain ratio.
pub const GAIN_PROBE_PERIODS: f64 = 2.0;

#[derive(Parser, Debug)]
#[command(name = "memtia", version, about = "Memristor-feedback TIA simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct Common {
    /// Shipped scenario name or path to a TOML configuration.
    #[arg(long, default_value = "default")]
    config: String,
    /// Output directory (defaults to $MEMTIA_OUT, then ./out).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Seed for the device generator (overrides sim.seed).
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Time-domain run: trace and event CSVs.
    Transient(Common),
    /// Small-signal transimpedance in HRS and LRS.
    Ac {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        check: bool,
    },
    /// Quasi-static I-V loops of the bare device.
    Iv(Common),
    /// Monte Carlo over cycle-to-cycle variation.
    Mc {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        scenario: Option<String>,
        #[arg(long)]
        trials: Option<u64>,
    },
    /// Figure-of-merit comparison table.
    Fom {
        #[command(flatten)]
        common: Common,
        /// Print the aligned table.
        #[arg(long)]
        table: bool,
        #[arg(long)]
        check: bool,
    },
    /// Dynamic range with a fixed resistor and with gain switching.
    Dr {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        check: bool,
    },
}

enum Failure {
    Error(Error),
    Check(String),
}

impl<E: Into<Error>> From<E> for Failure {
    fn from(e: E) -> Self {
        Self::Error(e.into())
    }
}

/// Parses `args` (including the program name), runs the command and returns
/// the process exit status. Human-readable output goes to `out`.
pub fn run_command<I, T>(args: I, out: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = write!(out, "{e}");
            return code;
        }
    };
    let mut text = String::new();
    let result = dispatch(cli.command, &mut text);
    let _ = out.write_all(text.as_bytes());
    match result {
        Ok(()) => EXIT_OK,
        Err(Failure::Check(msg)) => {
            let _ = writeln!(out, "check failed: {msg}");
            EXIT_CHECK
        }
        Err(Failure::Error(e)) => {
            let _ = writeln!(out, "error: {e}");
            match e {
                Error::Config(_) | Error::Invalid(_) => EXIT_CONFIG,
                Error::Sim(_) => EXIT_SIM,
                Error::Io { .. } => EXIT_IO,
            }
        }
    }
}

fn load(common: &Common) -> Result<(Config, u64, PathBuf), Failure> {
    let cfg = config::load(&common.config)?;
    let seed = common.seed.unwrap_or(cfg.seed);
    let dir = common.out.clone().unwrap_or_else(output::default_out_dir);
    Ok((cfg, seed, dir))
}

fn provenance(cfg: &Config, common: &Common, seed: u64) -> String {
    let seed_src = if common.seed.is_some() {
        "command line"
    } else {
        "configuration"
    };
    format!(
        "config = {}\nseed = {seed}  ({seed_src})\n{}",
        common.config,
        cfg.provenance_text()
    )
}

fn write(dir: &Path, name: &str, contents: &str) -> Result<(), Failure> {
    write_atomic(&dir.join(name), contents)?;
    Ok(())
}

fn dispatch(cmd: Command, out: &mut String) -> Result<(), Failure> {
    match cmd {
        Command::Transient(common) => transient(&common, out),
        Command::Ac { common, check } => ac(&common, check, out),
        Command::Iv(common) => iv(&common, out),
        Command::Mc {
            common,
            scenario,
            trials,
        } => mc(&common, scenario, trials, out),
        Command::Fom { common, table, check } => fom(&common, table, check, out),
        Command::Dr { common, check } => dr(&common, check, out),
    }
}

fn transient(common: &Common, out: &mut String) -> Result<(), Failure> {
    let (cfg, seed, dir) = load(common)?;
    let trace = engine::run_transient(&cfg.circuit, &cfg.sim, seed)?;
    write(&dir, "trace.csv", &output::trace_csv(&trace))?;
    write(&dir, "events.csv", &output::events_csv(&trace))?;
    write(&dir, "provenance.txt", &provenance(&cfg, common, seed))?;
    let _ = writeln!(out, "samples  {}", trace.len());
    for kind in EventKind::ALL {
        let n = trace.count(kind);
        if n > 0 {
            let _ = writeln!(out, "{:<18} {n}", kind.name());
        }
    }
    if let Some(e) = trace.first(EventKind::Set) {
        if let (Some(tx), Some(i)) = (e.field("crossing_s"), e.field("i_in_a")) {
            let _ = writeln!(
                out,
                "SET latency        {:.3e} s after threshold crossing",
                e.time - tx
            );
            let _ = writeln!(out, "SET input current  {i:.6e} A");
        }
    }
    let input = &cfg.circuit.sources.input;
    if input.kind == crate::blocks::WaveKind::Sine {
        if let Some(r) = engine::reset_gain_ratio(&trace, input.frequency, GAIN_PROBE_PERIODS) {
            let _ = writeln!(out, "gain ratio after/before RESET  {r:.4}");
        }
    }
    let _ = writeln!(out, "wrote {}", dir.display());
    Ok(())
}

fn ac(common: &Common, check: bool, out: &mut String) -> Result<(), Failure> {
    let (cfg, seed, dir) = load(common)?;
    let c = &cfg.circuit;
    let s = &cfg.ac;
    let hrs = ac_sweep(c, c.memristor.r_off, s.f_min, s.f_max, s.points)?;
    let lrs = ac_sweep(c, c.memristor.r_on, s.f_min, s.f_max, s.points)?;
    let gap = hrs.dc_gain_db - lrs.dc_gain_db;
    let want = metrics::dr_extension_db(c.memristor.r_off, c.memristor.r_on);
    let mut summary = String::new();
    let _ = writeln!(summary, "state  dc_gain_dbohm  bw_3db_hz");
    let _ = writeln!(summary, "HRS    {:.8e}  {:.8e}", hrs.dc_gain_db, hrs.bw_3db);
    let _ = writeln!(summary, "LRS    {:.8e}  {:.8e}", lrs.dc_gain_db, lrs.bw_3db);
    let _ = writeln!(summary, "gain gap {gap:.4} dB (ratio predicts {want:.4} dB)");
    let _ = writeln!(
        summary,
        "reading gain HRS {:.4}  LRS {:.4}  reset gain HRS {:.4}  LRS {:.4}",
        reading_gain(c.memristor.r_off, c.r_c),
        reading_gain(c.memristor.r_on, c.r_c),
        reset_gain(c.memristor.r_off),
        reset_gain(c.memristor.r_on)
    );
    write(&dir, "ac_hrs.csv", &output::ac_csv(&hrs))?;
    write(&dir, "ac_lrs.csv", &output::ac_csv(&lrs))?;
    write(&dir, "ac_summary.txt", &summary)?;
    write(&dir, "provenance.txt", &provenance(&cfg, common, seed))?;
    out.push_str(&summary);
    if check {
        if !(lrs.bw_3db > hrs.bw_3db) {
            return Err(Failure::Check(
                "LRS bandwidth does not exceed HRS bandwidth".into(),
            ));
        }
        if (gap - want).abs() > AC_GAP_CHECK_DB {
            return Err(Failure::Check(format!("gain gap {gap:.4} dB vs {want:.4} dB")));
        }
        let _ = writeln!(out, "check passed");
    }
    Ok(())
}

fn iv(common: &Common, out: &mut String) -> Result<(), Failure> {
    let (cfg, seed, dir) = load(common)?;
    let s = &cfg.iv;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let trace = iv_sweep(
        &cfg.circuit.memristor,
        s.v_peak,
        s.points_per_cycle,
        s.cycles,
        &mut rng,
    )
    .map_err(Error::from)?;
    write(&dir, "iv.csv", &output::iv_csv(&trace))?;
    write(&dir, "provenance.txt", &provenance(&cfg, common, seed))?;
    let sv = set_voltages(&trace);
    let _ = writeln!(out, "points {}  SET transitions {}", trace.len(), sv.len());
    if let Some(sm) = crate::variability::Summary::of(&sv) {
        let _ = writeln!(
            out,
            "SET voltage mean {:.4} V  std-dev {:.4} V ({:.1}%)",
            sm.mean,
            sm.std_dev,
            100.0 * sm.std_dev / sm.mean
        );
    }
    Ok(())
}

fn mc(
    common: &Common,
    scenario: Option<String>,
    trials: Option<u64>,
    out: &mut String,
) -> Result<(), Failure> {
    let (cfg, seed, dir) = load(common)?;
    let scenario = match scenario {
        Some(s) => McScenario::parse(&s).ok_or_else(|| {
            Error::Config(crate::error::ConfigError::OutOfRange {
                key: "--scenario".into(),
                invariant: "one of set_threshold, dr_extension, reset_verify".into(),
            })
        })?,
        None => cfg.mc.scenario,
    };
    let trials = trials.unwrap_or(cfg.mc.trials);
    let report = run_monte_carlo(&cfg.circuit, &cfg.sim, scenario, trials, seed)?;
    write(&dir, "mc_trials.csv", &report.to_csv())?;
    write(&dir, "mc_summary.txt", &report.summary_text())?;
    write(&dir, "provenance.txt", &provenance(&cfg, common, seed))?;
    out.push_str(&report.summary_text());
    Ok(())
}

fn fom(common: &Common, table: bool, check: bool, out: &mut String) -> Result<(), Failure> {
    let dir = common.out.clone().unwrap_or_else(output::default_out_dir);
    let rows = metrics::fom_table_report(&FomTable::embedded());
    write(&dir, "fom.csv", &metrics::fom_report_csv(&rows))?;
    let text = metrics::fom_report_text(&rows);
    write(&dir, "fom.txt", &text)?;
    if table {
        out.push_str(&text);
    } else {
        let flagged = rows.iter().filter(|r| r.rounding_limited).count();
        let _ = writeln!(
            out,
            "{} rows recomputed, {flagged} flagged as input-rounding limited",
            rows.len()
        );
    }
    if check {
        for r in &rows {
            let tol = if r.rounding_limited {
                FOM_FLAGGED_CHECK_REL
            } else {
                FOM_CHECK_REL
            };
            if r.rel_err > tol {
                return Err(Failure::Check(format!(
                    "row {} off by {:.2}% (limit {:.0}%)",
                    r.name,
                    100.0 * r.rel_err,
                    100.0 * tol
                )));
            }
        }
        let _ = writeln!(out, "check passed");
    }
    Ok(())
}

fn dr(common: &Common, check: bool, out: &mut String) -> Result<(), Failure> {
    let (cfg, seed, dir) = load(common)?;
    let c = &cfg.circuit;
    let raw = engine::measure_dynamic_range(c, &cfg.sim, &c.noise, &cfg.dr.staircase, seed)?;
    let noise = if cfg.dr.explicit_noise {
        c.noise.clone()
    } else {
        NoiseModel::calibrated(cfg.dr.target_db, raw.fixed.i_max, raw.r_hrs).map_err(Error::from)?
    };
    let m = raw.with_noise(&noise);
    let mut s = String::new();
    let _ = writeln!(s, "noise v_no        {:.8e} V rms ({})", noise.v_no, noise.note);
    let _ = writeln!(s, "i_n               {:.8e} A rms", m.i_n);
    let _ = writeln!(
        s,
        "fixed  i_max {:.8e} A  z_t {:.8e} ohm  DR {:.4} dB",
        m.fixed.i_max, m.fixed.z_t, m.dr_fixed_db
    );
    let _ = writeln!(
        s,
        "agc    i_max {:.8e} A  z_t {:.8e} ohm  DR {:.4} dB",
        m.agc.i_max, m.agc.z_t, m.dr_agc_db
    );
    let _ = writeln!(s, "extension         {:.4} dB", m.extension_db());
    write(&dir, "dr.txt", &s)?;
    write(&dir, "provenance.txt", &provenance(&cfg, common, seed))?;
    out.push_str(&s);
    if check {
        let want = metrics::dr_extension_db(c.memristor.r_off, c.memristor.r_on);
        if (m.extension_db() - want).abs() > DR_CHECK_DB {
            return Err(Failure::Check(format!(
                "extension {:.4} dB vs {want:.4} dB from the configured r_off/r_on",
                m.extension_db()
            )));
        }
        if !cfg.dr.explicit_noise && (m.dr_fixed_db - cfg.dr.target_db).abs() > DR_CHECK_DB {
            return Err(Failure::Check(format!(
                "fixed DR {:.4} dB vs {}",
                m.dr_fixed_db, cfg.dr.target_db
            )));
        }
        let _ = writeln!(out, "check passed");
    }
    Ok(())
}
