//! Writes run artefacts: `report.txt`, CSV tables, VTK snapshots and matrix dumps.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use evolve_surf::{Chart, ConditionReport, GridSpec};

use crate::config::RunConfig;
use crate::pipeline::RunReport;

/// Flat `key = value` summary of a run.
pub fn report_text(report: &RunReport) -> String {
    let mut s = String::new();
    let command = report.command.map(|c| c.name()).unwrap_or("none");
    let _ = writeln!(s, "command = {command}");
    let _ = writeln!(s, "passed = {}", report.passed());
    for c in &report.checks {
        let kind = if c.hard { "hard" } else { "soft" };
        let status = if c.passed { "PASS" } else { "FAIL" };
        let _ = writeln!(s, "check.{} = {:e} [{}; {}; {}]", c.name, c.value, c.limit, kind, status);
    }
    if let Some(cond) = &report.conditions {
        s.push_str(&cond.to_key_values());
    }
    if let Some(a) = report.agreement {
        let _ = writeln!(s, "picard_direct_agreement = {a:e}");
    }
    if let Some(h) = &report.picard {
        let _ = writeln!(s, "picard_iterations = {}", h.iterations);
        let _ = writeln!(s, "picard_converged = {}", h.converged);
        let _ = writeln!(s, "picard_max_ratio = {:e}", h.max_ratio());
    }
    if let Some(e) = &report.energy {
        let _ = writeln!(s, "energy_residual_rel_max = {:e}", e.max_residual_rel());
        let _ = writeln!(s, "energy_residual_abs_max = {:e}", e.max_residual_abs());
    }
    if let Some(d) = &report.decay {
        let _ = writeln!(s, "decay_sup_bound = {:e}", d.sup_bound);
        let _ = writeln!(s, "decay_monotone = {}", d.monotone);
        let _ = writeln!(s, "initial_w12 = {:e}", d.initial_w12);
    }
    if let Some(r) = &report.regularity {
        let _ = writeln!(s, "regularity_material_norm = {:e}", r.material_norm);
        let _ = writeln!(s, "regularity_diffusion_norm = {:e}", r.diffusion_norm);
        let _ = writeln!(s, "regularity_ratio = {:e}", r.ratio);
    }
    if let Some(t) = &report.convergence {
        let _ = writeln!(s, "space_order = {:e}, {:e}", t.fitted_space_order[0], t.fitted_space_order[1]);
        let _ = writeln!(s, "time_order = {:e}, {:e}", t.fitted_time_order[0], t.fitted_time_order[1]);
    }
    for (label, d) in &report.timings {
        let _ = writeln!(s, "time.{label}_s = {:.6}", d.as_secs_f64());
    }
    s
}

/// VTK legacy structured grid of one state, embedded at its time. Boundary values are zero.
pub fn vtk_snapshot(chart: &Chart, grid: &GridSpec, values: &[f64], time: f64) -> Result<String> {
    if values.len() != grid.len() {
        bail!("snapshot has {} values, grid has {}", values.len(), grid.len());
    }
    let (e1, e2) = grid.ext_dims();
    let mut s = String::new();
    let _ = writeln!(s, "# vtk DataFile Version 3.0");
    let _ = writeln!(s, "evolve-surf t={time:e}");
    let _ = writeln!(s, "ASCII");
    let _ = writeln!(s, "DATASET STRUCTURED_GRID");
    let _ = writeln!(s, "DIMENSIONS {e1} {e2} 1");
    let _ = writeln!(s, "POINTS {} double", e1 * e2);
    for x in grid.closure_nodes() {
        let p = chart.eval(x, time).context("geometry: embedding snapshot point")?;
        let _ = writeln!(s, "{:e} {:e} {:e}", p[0], p[1], p[2]);
    }
    let _ = writeln!(s, "POINT_DATA {}", e1 * e2);
    let _ = writeln!(s, "SCALARS u double 1");
    let _ = writeln!(s, "LOOKUP_TABLE default");
    for q in 0..e2 {
        for p in 0..e1 {
            let _ = writeln!(s, "{:e}", grid.ext_value(values, p, q));
        }
    }
    Ok(s)
}

/// Indices of the states written as snapshots: every `stride`-th plus the last.
pub fn snapshot_indices(len: usize, stride: usize) -> Result<Vec<usize>> {
    if stride == 0 {
        bail!("snapshot stride must be positive");
    }
    let mut idx: Vec<usize> = (0..len).step_by(stride).collect();
    if len > 0 && idx.last() != Some(&(len - 1)) {
        idx.push(len - 1);
    }
    Ok(idx)
}

fn write(dir: &Path, name: &str, body: &str, manifest: &mut Vec<PathBuf>) -> Result<()> {
    let path = dir.join(name);
    fs::write(&path, body).with_context(|| format!("output: writing {}", path.display()))?;
    manifest.push(path);
    Ok(())
}

/// Writes every artefact for `report` into `dir` and returns the written paths.
pub fn write_outputs(report: &RunReport, config: &RunConfig, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).with_context(|| format!("output: creating {}", dir.display()))?;
    let mut manifest = Vec::new();
    write(dir, "report.txt", &report_text(report), &mut manifest)?;
    if let Some(cond) = &report.conditions {
        let body = format!("{}\n{}\n", ConditionReport::csv_header(), cond.csv_row());
        write(dir, "conditions.csv", &body, &mut manifest)?;
    }
    if let Some(e) = &report.energy {
        write(dir, "energy.csv", &e.csv(), &mut manifest)?;
    }
    if let Some(h) = &report.picard {
        write(dir, "picard.csv", &h.csv(), &mut manifest)?;
    }
    if let Some(t) = &report.convergence {
        write(dir, "convergence.csv", &t.csv(), &mut manifest)?;
    }
    if let Some(traj) = &report.trajectory {
        let s = &config.surface;
        let chart = Chart::preset(s.preset, s.domain, s.horizon).context("geometry: building chart")?;
        for k in snapshot_indices(traj.len(), config.output.stride)? {
            let body = vtk_snapshot(&chart, &traj.grid, &traj.states[k], traj.times[k])?;
            write(dir, &format!("snapshot_{k:05}.vtk"), &body, &mut manifest)?;
        }
    }
    for (name, m) in &report.matrices {
        write(dir, &format!("matrix_{name}.txt"), &m.to_coordinate_text(), &mut manifest)?;
    }
    Ok(manifest)
}
