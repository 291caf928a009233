//! Reproducible run outputs: energy/ledger CSVs, field snapshots as grid CSV
//! and 8-bit binary graymaps, and the run manifest.
//!
//! Floats are written with Rust's shortest round-trip formatting, so parsing
//! a value back yields the identical bits. No output file is ever partially
//! valid: every write goes to a temporary name in the same directory and is
//! renamed into place on completion.

use std::fmt::Write as _;
use std::path::Path;

use crate::config::Manifest;
use crate::error::{Error, Result};
use crate::grid::CellField;
use crate::params::GridGeometry;
use crate::stepper::{StepRecord, Trajectory};

/// Shortest decimal that parses back to the identical f64.
fn fmt_f64(x: f64) -> String {
    format!("{x:?}")
}

/// Writes bytes to `path` atomically (temp file + rename).
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension(match path.extension() {
        Some(e) => format!("{}.tmp", e.to_string_lossy()),
        None => "tmp".to_string(),
    });
    std::fs::write(&tmp, bytes).map_err(|e| Error::io(&tmp, e))?;
    std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

pub const ENERGY_CSV_HEADER: &str =
    "k,t,s,F,Fc,Fe,Uprime,Udoubleprime,alpha,newton_iters,gmres_iters";

/// Full per-step series: energy, split parts, decay estimators, controller
/// factor, and solver iteration counts.
pub fn energy_csv(records: &[StepRecord]) -> String {
    let mut out = String::with_capacity(64 * (records.len() + 1));
    out.push_str(ENERGY_CSV_HEADER);
    out.push('\n');
    for r in records {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{}",
            r.k,
            fmt_f64(r.t),
            fmt_f64(r.dt),
            fmt_f64(r.energy.f),
            fmt_f64(r.energy.fc),
            fmt_f64(r.energy.fe),
            fmt_f64(r.uprime),
            fmt_f64(r.udoubleprime),
            fmt_f64(r.alpha),
            r.newton_iters,
            r.gmres_iters
        );
    }
    out
}

/// Solver-focused view of the step ledger.
pub fn ledger_csv(records: &[StepRecord]) -> String {
    let mut out = String::from("k,t,s,newton_iters,gmres_iters\n");
    for r in records {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            r.k,
            fmt_f64(r.t),
            fmt_f64(r.dt),
            r.newton_iters,
            r.gmres_iters
        );
    }
    out
}

/// Mean energy series of an ensemble; `t` comes from the first member (all
/// members share the uniform time grid).
pub fn mean_energy_csv(records: &[StepRecord], mean_energy: &[f64]) -> String {
    let mut out = String::from("k,t,mean_F\n");
    for (r, &f) in records.iter().zip(mean_energy.iter()) {
        let _ = writeln!(out, "{},{},{}", r.k, fmt_f64(r.t), fmt_f64(f));
    }
    out
}

/// Grid CSV of a field: a `#` header with the capture time and geometry,
/// then `m` rows of `n` comma-separated values (row `i` is the x index).
pub fn snapshot_csv(field: &CellField, t: f64) -> String {
    let g = field.geometry();
    let mut out = String::with_capacity(18 * g.cells());
    let _ = writeln!(
        out,
        "# t={} m={} n={} Lx={} Ly={}",
        fmt_f64(t),
        g.nx(),
        g.ny(),
        fmt_f64(g.lx()),
        fmt_f64(g.ly())
    );
    for i in 0..g.nx() {
        for j in 0..g.ny() {
            if j > 0 {
                out.push(',');
            }
            out.push_str(&fmt_f64(field.get(i, j)));
        }
        out.push('\n');
    }
    out
}

/// Parses a snapshot CSV back into the capture time and the field,
/// bit-exactly.
pub fn parse_snapshot_csv(text: &str, path: &Path) -> Result<(f64, CellField)> {
    let bad = |message: String| Error::SnapshotParse {
        path: path.to_path_buf(),
        message,
    };
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| bad("empty file".into()))?;
    let header = header
        .strip_prefix("# ")
        .ok_or_else(|| bad("missing `# t=... m=... n=...` header".into()))?;
    let mut t = None;
    let mut m = None;
    let mut n = None;
    let mut lx = None;
    let mut ly = None;
    for tok in header.split_whitespace() {
        let (key, val) = tok
            .split_once('=')
            .ok_or_else(|| bad(format!("malformed header token `{tok}`")))?;
        match key {
            "t" => t = Some(val.parse::<f64>().map_err(|e| bad(format!("t: {e}")))?),
            "m" => m = Some(val.parse::<usize>().map_err(|e| bad(format!("m: {e}")))?),
            "n" => n = Some(val.parse::<usize>().map_err(|e| bad(format!("n: {e}")))?),
            "Lx" => lx = Some(val.parse::<f64>().map_err(|e| bad(format!("Lx: {e}")))?),
            "Ly" => ly = Some(val.parse::<f64>().map_err(|e| bad(format!("Ly: {e}")))?),
            other => return Err(bad(format!("unknown header key `{other}`"))),
        }
    }
    let (t, m, n) = match (t, m, n) {
        (Some(t), Some(m), Some(n)) => (t, m, n),
        _ => return Err(bad("header must carry t, m and n".into())),
    };
    let geom = GridGeometry::new(
        lx.ok_or_else(|| bad("header must carry Lx".into()))?,
        ly.ok_or_else(|| bad("header must carry Ly".into()))?,
        m,
        n,
    )?;
    let mut field = CellField::zeros(geom);
    let mut rows = 0usize;
    for (i, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        if i >= m {
            return Err(bad(format!("more than {m} rows")));
        }
        let mut cols = 0usize;
        for (j, cell) in line.split(',').enumerate() {
            if j >= n {
                return Err(bad(format!("row {i} has more than {n} columns")));
            }
            let v = cell
                .parse::<f64>()
                .map_err(|e| bad(format!("row {i} col {j}: {e}")))?;
            field.set(i, j, v);
            cols += 1;
        }
        if cols != n {
            return Err(bad(format!("row {i} has {cols} columns, expected {n}")));
        }
        rows += 1;
    }
    if rows != m {
        return Err(bad(format!("found {rows} rows, expected {m}")));
    }
    Ok((t, field))
}

/// 8-bit binary graymap (P5) of a field. Concentrations map linearly from
/// `[0, phi_max]` to `[0, 255]` — a fixed range, so frames of one run are
/// comparable. Pixel columns follow x; rows run top-down with y increasing
/// upward.
pub fn graymap(field: &CellField, phi_max: f64) -> Vec<u8> {
    let g = field.geometry();
    let (w, h) = (g.nx(), g.ny());
    let mut out = format!("P5\n{w} {h}\n255\n").into_bytes();
    out.reserve(w * h);
    for row in 0..h {
        let j = h - 1 - row;
        for i in 0..w {
            let v = (field.get(i, j) / phi_max * 255.0)
                .round()
                .clamp(0.0, 255.0);
            out.push(v as u8);
        }
    }
    out
}

/// Current wall time as seconds since the Unix epoch.
pub fn unix_now() -> f64 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs_f64())
        .unwrap_or(0.0)
}

pub fn write_manifest(path: &Path, manifest: &Manifest) -> Result<()> {
    let text = toml::to_string_pretty(manifest).map_err(|e| Error::ConfigParse {
        path: path.to_path_buf(),
        message: format!("serialize: {e}"),
    })?;
    write_atomic(path, text.as_bytes())
}

/// Stable snapshot file stem for a scheduled time, e.g. `snapshot_t2.5`.
pub fn snapshot_stem(scheduled_t: f64) -> String {
    format!("snapshot_t{}", fmt_f64(scheduled_t))
}

/// Writes all files of a finished (or partially finished) trajectory into
/// `dir`; returns the relative names written.
pub fn write_trajectory(dir: &Path, trajectory: &Trajectory, phi_max: f64) -> Result<Vec<String>> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut written = Vec::new();

    write_atomic(
        &dir.join("energy.csv"),
        energy_csv(&trajectory.records).as_bytes(),
    )?;
    written.push("energy.csv".to_string());
    write_atomic(
        &dir.join("ledger.csv"),
        ledger_csv(&trajectory.records).as_bytes(),
    )?;
    written.push("ledger.csv".to_string());

    for snap in &trajectory.snapshots {
        let stem = snapshot_stem(snap.scheduled_t);
        let csv_name = format!("{stem}.csv");
        write_atomic(
            &dir.join(&csv_name),
            snapshot_csv(&snap.field, snap.t).as_bytes(),
        )?;
        written.push(csv_name);
        let pgm_name = format!("{stem}.pgm");
        write_atomic(&dir.join(&pgm_name), &graymap(&snap.field, phi_max))?;
        written.push(pgm_name);
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::energy::EnergyReport;

    fn record(k: usize, f: f64) -> StepRecord {
        StepRecord {
            k,
            t: k as f64 * 0.1,
            dt: if k == 0 { 0.0 } else { 0.1 },
            energy: EnergyReport {
                f,
                fc: f * 0.5,
                fe: -f * 0.5,
            },
            uprime: -1e-7,
            udoubleprime: 0.0,
            alpha: f64::NAN,
            newton_iters: 2,
            gmres_iters: 11,
        }
    }

    #[test]
    fn csv_floats_round_trip() {
        let recs = vec![record(0, 29.352956577352256), record(1, 1e-300)];
        let text = energy_csv(&recs);
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), ENERGY_CSV_HEADER);
        let row: Vec<&str> = lines.next().unwrap().split(',').collect();
        assert_eq!(row[3].parse::<f64>().unwrap(), 29.352956577352256);
        let row: Vec<&str> = lines.next().unwrap().split(',').collect();
        assert_eq!(row[3].parse::<f64>().unwrap(), 1e-300);
        // NaN alpha must survive the trip too.
        assert!(row[8].parse::<f64>().unwrap().is_nan());
    }

    #[test]
    fn snapshot_round_trips_bit_exactly() {
        let g = GridGeometry::new(3.0, 2.0, 5, 4).unwrap();
        let mut state = 1u64;
        let field = CellField::from_fn(g, |_, _| {
            state = state
                .wrapping_mul(6364136223846793005)
                .wrapping_add(1442695040888963407);
            (state >> 11) as f64 / (1u64 << 53) as f64 * 1e3 - 500.0
        });
        let text = snapshot_csv(&field, 0.30000000000000004);
        let (t, parsed) = parse_snapshot_csv(&text, Path::new("test.csv")).unwrap();
        assert_eq!(t.to_bits(), 0.30000000000000004f64.to_bits());
        assert_eq!(parsed.geometry(), g);
        for (a, b) in parsed.as_slice().iter().zip(field.as_slice()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn truncated_snapshot_is_rejected() {
        let g = GridGeometry::new(3.0, 2.0, 4, 4).unwrap();
        let text = snapshot_csv(&CellField::constant(g, 0.5), 1.0);
        let cut: String = text.lines().take(3).collect::<Vec<_>>().join("\n");
        assert!(parse_snapshot_csv(&cut, Path::new("x.csv")).is_err());
    }

    #[test]
    fn constant_field_graymap_has_one_level() {
        let g = GridGeometry::new(4.0, 4.0, 6, 3).unwrap();
        let phi_max = 0.950571209684394;
        let bytes = graymap(&CellField::constant(g, 0.3), phi_max);
        let header_end = bytes.windows(4).position(|w| w == b"255\n").unwrap() + 4;
        assert_eq!(&bytes[..header_end], b"P5\n6 3\n255\n");
        let pixels = &bytes[header_end..];
        assert_eq!(pixels.len(), 18);
        let level = (0.3f64 / phi_max * 255.0).round() as u8;
        assert!(pixels.iter().all(|&p| p == level));
    }

    #[test]
    fn atomic_write_replaces_and_leaves_no_temp() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("out.csv");
        write_atomic(&path, b"first").unwrap();
        write_atomic(&path, b"second").unwrap();
        assert_eq!(std::fs::read(&path).unwrap(), b"second");
        let entries: Vec<_> = std::fs::read_dir(dir.path()).unwrap().collect();
        assert_eq!(entries.len(), 1);
    }
}
