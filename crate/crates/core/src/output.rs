//! CSV emission and atomic file writes.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::analysis::AcResult;
use crate::engine::TraceSet;
use crate::error::Error;
use crate::memristor::IvPoint;

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "MEMTIA_OUT";
pub const DEFAULT_OUT_DIR: &str = "out";

pub fn default_out_dir() -> PathBuf {
    std::env::var_os(OUT_DIR_ENV)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR))
}

fn io_err(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Writes `contents` to a temporary sibling and renames it over `path`, so
/// readers never observe a partial file.
pub fn write_atomic(path: &Path, contents: &str) -> Result<(), Error> {
    let dir = path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    let name = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    let tmp = dir.join(format!(".{name}.tmp-{}", std::process::id()));
    fs::write(&tmp, contents).map_err(|e| io_err(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| {
        let _ = fs::remove_file(&tmp);
        io_err(path, e)
    })
}

pub const TRACE_HEADER: &str = "time_s,v_in_v,i_in_a,v_n_v,v_o_v,r_mem_ohm,v_dev_v,v_lp_v,v_hp_v,v_det_v";

pub fn trace_csv(t: &TraceSet) -> String {
    let mut s = String::with_capacity(t.len() * 160);
    s.push_str(TRACE_HEADER);
    s.push('\n');
    for k in 0..t.len() {
        let row = [
            t.time[k], t.v_in[k], t.i_in[k], t.v_n[k], t.v_o[k], t.r_mem[k], t.v_dev[k], t.v_lp[k],
            t.v_hp[k], t.v_det[k],
        ];
        for (j, v) in row.iter().enumerate() {
            if j > 0 {
                s.push(',');
            }
            let _ = write!(s, "{v:.8e}");
        }
        s.push('\n');
    }
    s
}

pub fn events_csv(t: &TraceSet) -> String {
    let mut s = String::from("time_s,kind,payload\n");
    for e in &t.events {
        let _ = writeln!(s, "{:.8e},{},{}", e.time, e.kind, e.payload);
    }
    s
}

pub fn ac_csv(ac: &AcResult) -> String {
    let mut s = String::from("freq_hz,mag_db_ohm,phase_deg\n");
    for ((f, m), p) in ac.freqs.iter().zip(ac.magnitude_db()).zip(ac.phase_deg()) {
        let _ = writeln!(s, "{f:.8e},{m:.8e},{p:.8e}");
    }
    s
}

pub fn iv_csv(points: &[IvPoint]) -> String {
    let mut s = String::from("v_volts,i_amps,mode\n");
    for p in points {
        let _ = writeln!(s, "{:.8e},{:.8e},{}", p.v, p.i, p.mode);
    }
    s
}
