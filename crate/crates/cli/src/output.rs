//! File emission. Every file is written to a temporary sibling and renamed
//! into place, so a path holds either a complete file or nothing.

use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;

use blendchaos::units;
use blendchaos::Trajectory;

pub const TRAJECTORY_HEADER: &str = "t_hr,rho1_out,rho2_out,p_out_mpa,phi_in,u";

pub fn write_atomic(path: &Path, contents: &[u8]) -> std::io::Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(contents)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

/// One trajectory row in output units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Row {
    pub t_hr: f64,
    pub rho1_out: f64,
    pub rho2_out: f64,
    pub p_out_mpa: f64,
    pub phi_in: f64,
    pub u: f64,
}

pub fn rows(t: &Trajectory) -> Vec<Row> {
    (0..t.len())
        .map(|k| Row {
            t_hr: units::s_to_hr(t.sample_times_s[k]),
            rho1_out: t.rho1_out[k],
            rho2_out: t.rho2_out[k],
            p_out_mpa: units::pa_to_mpa(t.p_out[k]),
            phi_in: t.phi_in[k],
            u: t.u[k],
        })
        .collect()
}

/// CSV text with shortest round-trip float formatting.
pub fn trajectory_csv(rows: &[Row]) -> String {
    let mut s = String::with_capacity(rows.len() * 120);
    s.push_str(TRAJECTORY_HEADER);
    s.push('\n');
    for r in rows {
        writeln!(
            s,
            "{},{},{},{},{},{}",
            r.t_hr, r.rho1_out, r.rho2_out, r.p_out_mpa, r.phi_in, r.u
        )
        .expect("writing to a string");
    }
    s
}

pub fn parse_trajectory_csv(text: &str) -> Result<Vec<Row>, String> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h.trim() == TRAJECTORY_HEADER => {}
        Some(h) => return Err(format!("unexpected header `{h}`")),
        None => return Err("empty trajectory file".into()),
    }
    let mut out = Vec::new();
    for (i, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let v: Vec<f64> = line
            .split(',')
            .map(|f| f.trim().parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|e| format!("line {}: {e}", i + 2))?;
        if v.len() != 6 {
            return Err(format!("line {}: expected 6 fields, got {}", i + 2, v.len()));
        }
        out.push(Row {
            t_hr: v[0],
            rho1_out: v[1],
            rho2_out: v[2],
            p_out_mpa: v[3],
            phi_in: v[4],
            u: v[5],
        });
    }
    Ok(out)
}
