//! Single simulation runs and the files they produce.

use std::path::Path;

use kimura::integrator::{simulate, Trajectory};
use kimura::GridSpec;

use crate::config::RunConfig;
use crate::error::CliResult;
use crate::output::{render_snapshot, render_timeseries, snapshot_file_name, write_all_or_nothing};
use crate::svg::{LineChart, Series};

/// Renders `timeseries.csv`, one `snapshot_<t>.csv` per snapshot and the two
/// charts, in memory.
pub fn render_run(
    title: &str,
    grid: &GridSpec,
    traj: &Trajectory,
    generated_at: Option<&str>,
) -> CliResult<Vec<(String, String)>> {
    let mut files = vec![("timeseries.csv".to_string(), render_timeseries(&traj.records, generated_at)?)];
    for snap in &traj.snapshots {
        files.push((snapshot_file_name(snap.requested), render_snapshot(snap, grid)?));
    }
    let boundary = LineChart::new(&format!("{title}: boundary masses"), "t", "mass")
        .with_series(Series::new("a(t)", traj.series(|r| r.a)))
        .with_series(Series::new("b(t)", traj.series(|r| r.b)));
    files.push(("timeseries.svg".to_string(), boundary.render()));

    let mut profile = LineChart::new(&format!("{title}: bulk density"), "x", "rho");
    for snap in &traj.snapshots {
        let points = grid.nodes().iter().copied().zip(snap.state.rho().iter().copied()).collect();
        profile = profile.with_series(Series::new(format!("t = {}", snap.time), points));
    }
    files.push(("snapshot.svg".to_string(), profile.render()));
    Ok(files)
}

pub fn execute_run(config: &RunConfig, output_dir: &Path, generated_at: Option<&str>) -> CliResult<Trajectory> {
    let grid = config.grid();
    let traj = simulate(&grid, config.epsilon, &config.ic, &config.solver, &config.snapshots)?;
    let files = render_run("run", &grid, &traj, generated_at)?;
    write_all_or_nothing(output_dir, &files)?;
    Ok(traj)
}
