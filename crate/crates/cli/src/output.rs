//! CSV rendering and all-or-nothing file output.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use kimura::diagnostics::DiagnosticsRecord;
use kimura::integrator::Snapshot;
use kimura::GridSpec;

use crate::error::{CliError, CliResult};

pub const TIMESERIES_HEADER: &str = "t,a,b,mass,moment1,energy,rho_delta,rho_one_minus_delta,min_entry,l2_bulk";

/// Rows whose mass is further than this from 1 are refused by the writer.
pub const ROW_MASS_TOLERANCE: f64 = 1e-9;

/// Shortest decimal that parses back to the same `f64`. Plain notation for
/// moderate magnitudes, exponent notation otherwise.
pub fn format_float(x: f64) -> String {
    let m = x.abs();
    if x == 0.0 || (1e-5..1e16).contains(&m) {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

fn validate_record(r: &DiagnosticsRecord) -> CliResult<()> {
    if !r.is_finite() {
        return Err(CliError::InvalidRow(format!("non-finite field at t = {}", r.time)));
    }
    if (r.mass - 1.0).abs() > ROW_MASS_TOLERANCE {
        return Err(CliError::InvalidRow(format!("mass {} at t = {} is not 1", r.mass, r.time)));
    }
    Ok(())
}

/// The `timeseries.csv` body. `generated_at` adds a leading comment line.
pub fn render_timeseries(records: &[DiagnosticsRecord], generated_at: Option<&str>) -> CliResult<String> {
    let mut out = String::new();
    if let Some(stamp) = generated_at {
        writeln!(out, "# generated-at {stamp}").unwrap();
    }
    out.push_str(TIMESERIES_HEADER);
    out.push('\n');
    for r in records {
        validate_record(r)?;
        let energy = r.energy.map(format_float).unwrap_or_default();
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{}",
            format_float(r.time),
            format_float(r.a),
            format_float(r.b),
            format_float(r.mass),
            format_float(r.first_moment),
            energy,
            format_float(r.rho_at_delta),
            format_float(r.rho_at_one_minus_delta),
            format_float(r.min_entry),
            format_float(r.l2_bulk),
        )
        .unwrap();
    }
    Ok(out)
}

pub fn snapshot_file_name(requested: f64) -> String {
    format!("snapshot_{}.csv", format_float(requested))
}

/// `# a=`, `# b=` preamble followed by `x,rho` over the bulk nodes.
pub fn render_snapshot(snapshot: &Snapshot, grid: &GridSpec) -> CliResult<String> {
    let p = &snapshot.state;
    if !p.is_finite() {
        return Err(CliError::InvalidRow(format!("non-finite snapshot at t = {}", snapshot.time)));
    }
    let mut out = String::new();
    writeln!(out, "# a={}", format_float(p.a())).unwrap();
    writeln!(out, "# b={}", format_float(p.b())).unwrap();
    out.push_str("x,rho\n");
    for (x, r) in grid.nodes().iter().zip(p.rho()) {
        writeln!(out, "{},{}", format_float(*x), format_float(*r)).unwrap();
    }
    Ok(out)
}

/// Writes every file or none. Contents go to hidden temporaries first, which
/// are renamed into place once all of them are on disk.
pub fn write_all_or_nothing(dir: &Path, files: &[(String, String)]) -> CliResult<()> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let mut staged: Vec<(PathBuf, PathBuf)> = Vec::with_capacity(files.len());
    let cleanup = |staged: &[(PathBuf, PathBuf)]| {
        for (tmp, _) in staged {
            let _ = fs::remove_file(tmp);
        }
    };
    for (name, body) in files {
        let target = dir.join(name);
        let tmp = dir.join(format!(".{name}.tmp"));
        if let Err(e) = fs::write(&tmp, body) {
            let _ = fs::remove_file(&tmp);
            cleanup(&staged);
            return Err(CliError::io(&tmp, e));
        }
        staged.push((tmp, target));
    }
    for (i, (tmp, target)) in staged.iter().enumerate() {
        if let Err(e) = fs::rename(tmp, target) {
            cleanup(&staged[i..]);
            return Err(CliError::io(target, e));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use kimura::integrator::{simulate, SolverConfig};
    use kimura::InitialCondition;

    #[test]
    fn floats_round_trip() {
        for x in [0.0, 1.0, -2.5, 0.1, 1e-5, 9.99e-6, 1e-300, 5e-324, 1e16, 123456.789, f64::MAX, -1e-12, 0.30000000000000004]
        {
            let s = format_float(x);
            assert_eq!(s.parse::<f64>().unwrap(), x, "{s}");
        }
        assert_eq!(format_float(0.5), "0.5");
        assert_eq!(format_float(10.0), "10");
        assert_eq!(format_float(2.5e-7), "2.5e-7");
        assert_eq!(format_float(1e20), "1e20");
    }

    fn small_run() -> (GridSpec, kimura::integrator::Trajectory) {
        let grid = GridSpec::new(0.1, 8).unwrap();
        let config = SolverConfig::new(0.1, 0.3, 1).unwrap();
        let traj = simulate(&grid, 0.5, &InitialCondition::Uniform, &config, &[0.2]).unwrap();
        (grid, traj)
    }

    #[test]
    fn timeseries_layout() {
        let (_, traj) = small_run();
        let text = render_timeseries(&traj.records, None).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], TIMESERIES_HEADER);
        assert_eq!(lines.len(), 1 + traj.records.len());
        for line in &lines[1..] {
            let fields: Vec<&str> = line.split(',').collect();
            assert_eq!(fields.len(), 10);
            assert!(fields.iter().all(|f| f.parse::<f64>().is_ok()), "{line}");
        }
        let stamped = render_timeseries(&traj.records, Some("2026-01-01T00:00:00Z")).unwrap();
        assert_eq!(stamped.lines().next().unwrap(), "# generated-at 2026-01-01T00:00:00Z");
        assert_eq!(stamped.lines().skip(1).collect::<Vec<_>>(), lines);
    }

    #[test]
    fn writer_rejects_bad_rows() {
        let (_, traj) = small_run();
        let mut records = traj.records.clone();
        records[1].mass = 1.5;
        assert!(matches!(render_timeseries(&records, None), Err(CliError::InvalidRow(_))));
        let mut records = traj.records.clone();
        records[0].l2_bulk = f64::NAN;
        assert!(matches!(render_timeseries(&records, None), Err(CliError::InvalidRow(_))));
    }

    #[test]
    fn snapshot_layout() {
        let (grid, traj) = small_run();
        let snap = &traj.snapshots[0];
        assert_eq!(snapshot_file_name(snap.requested), "snapshot_0.2.csv");
        let text = render_snapshot(snap, &grid).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert!(lines[0].starts_with("# a=") && lines[1].starts_with("# b="));
        assert_eq!(lines[2], "x,rho");
        assert_eq!(lines.len(), 3 + 9);
        assert_eq!(lines[3], "0.1,".to_string() + &format_float(snap.state.rho()[0]));
    }

    #[test]
    fn atomic_write_places_all_files() {
        let dir = tempfile::tempdir().unwrap();
        let files = vec![("a.csv".to_string(), "1\n".to_string()), ("b.csv".to_string(), "2\n".to_string())];
        write_all_or_nothing(dir.path(), &files).unwrap();
        let mut names: Vec<String> =
            fs::read_dir(dir.path()).unwrap().map(|e| e.unwrap().file_name().into_string().unwrap()).collect();
        names.sort();
        assert_eq!(names, vec!["a.csv", "b.csv"]);
        assert_eq!(fs::read_to_string(dir.path().join("b.csv")).unwrap(), "2\n");
    }

    #[test]
    fn atomic_write_leaves_nothing_on_failure() {
        let dir = tempfile::tempdir().unwrap();
        // the second name points into a missing directory, so its write fails
        let files = vec![("a.csv".to_string(), "1\n".to_string()), ("missing/b.csv".to_string(), "2\n".to_string())];
        assert!(write_all_or_nothing(dir.path(), &files).is_err());
        assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 0);
    }
}
