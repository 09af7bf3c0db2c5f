//! Plot-ready CSV and the JSON metadata sidecar. Every file starts with a
//! `# format: name/version` line. Numbers are printed with a fixed format so
//! repeated runs are byte-identical.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde_json::{json, Value};

use crate::bath::BathModel;
use crate::error::Result;
use crate::generators::GeneratorSpec;
use crate::propagate::Trajectory;
use crate::rdm::{hermitian_eigenvalues, CMatrix, SystemHamiltonian};
use crate::representability::ConstraintReport;
use crate::scenario::{RunOutcome, Scenario};

pub const TRAJECTORY_FORMAT: &str = "onerdm-trajectory/1";
pub const RUN_FORMAT: &str = "onerdm-run/1";
pub const SPECTRA_FORMAT: &str = "onerdm-spectra/1";
pub const SUPEROPERATOR_FORMAT: &str = "onerdm-superoperator/1";
pub const SWEEP_FORMAT: &str = "onerdm-sweep/1";

pub const DEFAULT_SPECTRA_POINTS: usize = 401;

fn num(x: f64) -> String {
    format!("{x:.12e}")
}

/// One row per recorded time: populations in the eigenbasis of H, extreme
/// eigenvalues, trace, and the hole defect when it was co-propagated.
pub fn trajectory_csv(traj: &Trajectory) -> Result<String> {
    let d = traj.states.first().map_or(0, |s| s.dim());
    let defects = traj.hole_defects();
    let mut out = format!("# format: {TRAJECTORY_FORMAT}\ntime");
    for k in 0..d {
        write!(out, ",pop_{k}").unwrap();
    }
    out.push_str(",min_eig,max_eig,trace");
    if defects.is_some() {
        out.push_str(",hole_defect");
    }
    out.push('\n');
    for (step, t) in traj.times.iter().enumerate() {
        let eig = hermitian_eigenvalues(traj.states[step].data())?;
        out.push_str(&num(*t));
        for p in &traj.populations[step] {
            write!(out, ",{}", num(*p)).unwrap();
        }
        let lo = eig.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = eig.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        write!(out, ",{},{},{}", num(lo), num(hi), num(traj.states[step].trace())).unwrap();
        if let Some(defects) = &defects {
            write!(out, ",{}", num(defects[step])).unwrap();
        }
        out.push('\n');
    }
    Ok(out)
}

fn constraint_json(c: &ConstraintReport) -> Value {
    json!({
        "residual_norm": c.residual_norm,
        "direct_norm": c.direct_norm,
        "cross_term_norm": c.cross_term_norm,
        "satisfied": c.satisfied,
        "channels": c.per_channel.iter().map(|ch| json!({
            "omega": ch.omega,
            "rate": ch.rate,
            "asymmetry": ch.asymmetry,
        })).collect::<Vec<_>>(),
    })
}

fn generator_json(spec: &GeneratorSpec) -> Value {
    let clusters = spec.clusters().map(|cl| {
        cl.clusters()
            .iter()
            .map(|c| json!({ "members": c.members, "center": c.center }))
            .collect::<Vec<_>>()
    });
    json!({
        "kind": spec.kind().as_str(),
        "pauli_blocked": spec.is_blocked(),
        "lamb_shift": spec.options().lamb_shift,
        "chi": spec.chi(),
        "frequencies": spec.frequencies(),
        "clusters": clusters,
    })
}

/// Metadata for a full run: config echo, schedule rule, audit and checks.
pub fn run_metadata(scenario: &Scenario, outcome: &RunOutcome) -> Value {
    let traj = &outcome.trajectory;
    json!({
        "format": RUN_FORMAT,
        "name": scenario.name(),
        "scenario": scenario.source,
        "generator": generator_json(&outcome.spec),
        "schedule": {
            "t_end": traj.times.last().copied().unwrap_or(0.0),
            "t_end_rule": outcome.t_end_rule,
            "samples": traj.times.len(),
            "rtol": scenario.control.rtol,
            "atol": scenario.control.atol,
        },
        "integrator": {
            "accepted": traj.stats.accepted,
            "rejected": traj.stats.rejected,
            "evaluations": traj.stats.evaluations,
        },
        "final_populations": traj.final_populations(),
        "audit": outcome.audit,
        "unitality_residual": outcome.unitality,
        "constraint": constraint_json(&outcome.constraint),
        "oracle": outcome.oracle,
    })
}

/// Metadata for `audit`: the checks that need no propagation.
pub fn audit_metadata(scenario: &Scenario, spec: &GeneratorSpec, constraint: &ConstraintReport, unitality: f64) -> Value {
    json!({
        "format": RUN_FORMAT,
        "name": scenario.name(),
        "scenario": scenario.source,
        "generator": generator_json(spec),
        "unitality_residual": unitality,
        "constraint": constraint_json(constraint),
    })
}

/// Symmetric grid covering twice the largest Bohr frequency.
pub fn default_spectra_grid(h: &SystemHamiltonian, bath: &BathModel, points: usize) -> Vec<f64> {
    let w_max = h.bohr_frequencies().iter().fold(0.0_f64, |m, w| m.max(w.abs()));
    let half = if w_max > 0.0 { 2.0 * w_max } else { 10.0 * bath.lambda() };
    let n = points.max(2);
    (0..n).map(|k| -half + 2.0 * half * k as f64 / (n - 1) as f64).collect()
}

/// J, Γ̂, Re Γ and ξ on a frequency grid. ξ needs a principal-value
/// integral per point, so the grid is evaluated in parallel.
pub fn spectra_csv(bath: &BathModel, omegas: &[f64]) -> Result<String> {
    let rows: Vec<String> = omegas
        .par_iter()
        .map(|&w| {
            let g = bath.spectral_function_redfield(w)?;
            Ok(format!(
                "{},{},{},{},{}\n",
                num(w),
                num(bath.spectral_density(w)),
                num(bath.spectral_function_ule(w)),
                num(g.re),
                num(bath.xi_integral(w)?)
            ))
        })
        .collect::<Result<_>>()?;
    let mut out = format!(
        "# format: {SPECTRA_FORMAT}\n# lambda = {:e}, temperature = {:e}\nomega,J,gamma_hat,re_gamma,xi\n",
        bath.lambda(),
        bath.temperature()
    );
    out.extend(rows);
    Ok(out)
}

/// Nonzero entries of a superoperator in column-stacked convention.
pub fn superoperator_csv(l: &CMatrix) -> String {
    let mut out = format!("# format: {SUPEROPERATOR_FORMAT}\n# dim = {}\nrow,col,re,im\n", l.nrows());
    for c in 0..l.ncols() {
        for r in 0..l.nrows() {
            let z = l[(r, c)];
            if z.re != 0.0 || z.im != 0.0 {
                writeln!(out, "{r},{c},{},{}", num(z.re), num(z.im)).unwrap();
            }
        }
    }
    out
}

/// One summary row per sweep point, in input order.
pub fn sweep_csv(parameter: &str, rows: &[(f64, Result<RunOutcome>)]) -> String {
    let dim = rows
        .iter()
        .find_map(|(_, r)| r.as_ref().ok().map(|o| o.trajectory.final_populations().len()))
        .unwrap_or(0);
    let mut out = format!("# format: {SWEEP_FORMAT}\n{parameter}");
    for k in 0..dim {
        write!(out, ",pop_{k}").unwrap();
    }
    out.push_str(",min_eig,max_eig,violation,unitality,residual_norm,status\n");
    for (value, r) in rows {
        out.push_str(&num(*value));
        match r {
            Ok(o) => {
                for p in o.trajectory.final_populations() {
                    write!(out, ",{}", num(*p)).unwrap();
                }
                writeln!(
                    out,
                    ",{},{},{},{},{},ok",
                    num(o.audit.min_eigenvalue),
                    num(o.audit.max_eigenvalue),
                    o.audit.violation,
                    num(o.unitality),
                    num(o.constraint.residual_norm)
                )
                .unwrap();
            }
            Err(e) => {
                out.push_str(&",".repeat(dim + 5));
                writeln!(out, ",\"{}\"", e.to_string().replace('"', "'")).unwrap();
            }
        }
    }
    out
}

/// Writes `<stem>.csv`, `<stem>.json`, `<stem>.channels.csv` and
/// `<stem>.constraint.csv` into `dir`.
pub fn write_run(dir: &Path, stem: &str, scenario: &Scenario, outcome: &RunOutcome) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    let mut put = |name: String, body: String| -> Result<()> {
        let path = dir.join(name);
        fs::write(&path, body)?;
        written.push(path);
        Ok(())
    };
    put(format!("{stem}.csv"), trajectory_csv(&outcome.trajectory)?)?;
    put(format!("{stem}.json"), pretty(&run_metadata(scenario, outcome)))?;
    put(format!("{stem}.channels.csv"), channels_csv(&outcome.spec))?;
    put(format!("{stem}.constraint.csv"), outcome.constraint.to_csv())?;
    Ok(written)
}

/// Channel tables of every coupling operator, one after another.
pub fn channels_csv(spec: &GeneratorSpec) -> String {
    spec.channel_sets()
        .iter()
        .map(|set| set.to_csv(spec.clusters()))
        .collect::<Vec<_>>()
        .join("\n")
}

pub fn pretty(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("json values always serialize");
    s.push('\n');
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{execute, Builtin};

    fn short_run() -> (Scenario, RunOutcome) {
        let mut file = Builtin::ThreeLevel.file();
        file.schedule.t_end = Some(50.0);
        file.schedule.samples = 5;
        file.schedule.hole = true;
        let s = Scenario::from_file(file).unwrap();
        let o = execute(&s).unwrap();
        (s, o)
    }

    #[test]
    fn trajectory_csv_layout() {
        let (_, o) = short_run();
        let csv = trajectory_csv(&o.trajectory).unwrap();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "# format: onerdm-trajectory/1");
        assert_eq!(lines[1], "time,pop_0,pop_1,pop_2,min_eig,max_eig,trace,hole_defect");
        assert_eq!(lines.len(), 2 + 6);
        assert!(lines[2].starts_with("0.000000000000e0,0.000000000000e0,0.000000000000e0,1.000000000000e0"));
        assert!(lines.iter().skip(2).all(|l| l.split(',').count() == 8));
    }

    #[test]
    fn metadata_has_audit_and_rule() {
        let (s, o) = short_run();
        let v = run_metadata(&s, &o);
        assert_eq!(v["format"], RUN_FORMAT);
        assert_eq!(v["schedule"]["t_end_rule"], "given");
        assert_eq!(v["generator"]["kind"], "ule");
        assert!(v["audit"]["violation"].is_boolean());
        assert!(v["scenario"]["bath"]["temperature"].as_f64().unwrap() == 50.0);
    }

    #[test]
    fn spectra_grid_and_columns() {
        let s = Builtin::ThreeLevel.scenario();
        let grid = default_spectra_grid(&s.hamiltonian, &s.bath, 5);
        assert_eq!(grid, vec![-2.0, -1.0, 0.0, 1.0, 2.0]);
        let csv = spectra_csv(&s.bath, &grid).unwrap();
        let rows: Vec<&str> = csv.lines().skip(3).collect();
        assert_eq!(rows.len(), 5);
        let mid: Vec<f64> = rows[2].split(',').map(|x| x.parse().unwrap()).collect();
        assert_eq!(mid[1], 0.0);
        assert!((mid[3] - std::f64::consts::PI * mid[2]).abs() < 1e-18);
    }

    #[test]
    fn superoperator_entries_round_trip() {
        let s = Builtin::ThreeLevel.scenario();
        let l = s.generator().unwrap().superoperator_matrix().unwrap();
        let csv = superoperator_csv(&l);
        let mut rebuilt = CMatrix::zeros(9, 9);
        for line in csv.lines().skip(3) {
            let f: Vec<&str> = line.split(',').collect();
            let (r, c): (usize, usize) = (f[0].parse().unwrap(), f[1].parse().unwrap());
            rebuilt[(r, c)] = num_complex::Complex64::new(f[2].parse().unwrap(), f[3].parse().unwrap());
        }
        assert!(crate::rdm::max_norm(&(rebuilt - &l)) < 1e-12 * crate::rdm::max_norm(&l).max(1.0));
    }

    #[test]
    fn sweep_rows_keep_errors() {
        let (_, o) = short_run();
        let rows = vec![
            (1.0, Ok(o)),
            (2.0, Err(crate::error::Error::Config("bad \"x\"".into()))),
        ];
        let csv = sweep_csv("temperature", &rows);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[1].split(',').count(), lines[2].split(',').count());
        assert_eq!(lines[3].split(',').count(), lines[2].split(',').count());
        assert!(lines[3].ends_with("'x'\""));
    }
}
