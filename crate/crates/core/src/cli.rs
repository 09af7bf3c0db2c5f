//! Command-line front end. `run_cli` returns the process exit status:
//! 0 on success (including runs whose audit flags a violation), 2 for usage
//! errors, 3 for configuration errors and 4 for numerical failures.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::generators::MasterEquation;
use crate::output;
use crate::representability::CONSTRAINT_TOL;
use crate::scenario::{self, Builtin, RunOutcome, Scenario, ScenarioFile};

pub const OUTPUT_DIR_ENV: &str = "ONERDM_OUTPUT_DIR";
pub const DEFAULT_OUTPUT_DIR: &str = "out";

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_CONFIG: i32 = 3;
pub const EXIT_NUMERICAL: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "onerdm", version, about = "Propagate and audit one-particle reduced density matrices in a bosonic bath")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Propagate a scenario file, audit the trajectory and write CSV output.
    Run {
        file: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
        #[command(flatten)]
        out: OutDir,
    },
    /// Constraint and unitality report only, without propagation.
    Audit {
        file: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
        #[command(flatten)]
        out: OutDir,
    },
    /// Dump J, Γ̂, Re Γ and ξ on a frequency grid.
    Spectra {
        file: PathBuf,
        /// Number of grid points.
        #[arg(long, default_value_t = output::DEFAULT_SPECTRA_POINTS)]
        points: usize,
        /// Half-width of the grid in Eh (default: twice the largest Bohr frequency).
        #[arg(long)]
        omega_max: Option<f64>,
        #[command(flatten)]
        out: OutDir,
    },
    /// Run a built-in benchmark.
    Bench {
        #[arg(value_enum)]
        system: BenchSystem,
        #[command(flatten)]
        overrides: Overrides,
        #[command(flatten)]
        out: OutDir,
    },
    /// Run a grid of temperatures or clustering thresholds and summarize.
    Sweep {
        /// Scenario file to sweep (or use --bench).
        #[arg(required_unless_present = "bench", conflicts_with = "bench")]
        file: Option<PathBuf>,
        #[arg(long, value_enum)]
        bench: Option<BenchSystem>,
        /// Temperatures in K, comma separated.
        #[arg(long, value_delimiter = ',', num_args = 1.., required_unless_present = "threshold", conflicts_with = "threshold")]
        temperature: Vec<f64>,
        /// Clustering thresholds in Eh, comma separated.
        #[arg(long, value_delimiter = ',', num_args = 1..)]
        threshold: Vec<f64>,
        /// Also write the trajectory of every point.
        #[arg(long)]
        trajectories: bool,
        #[command(flatten)]
        overrides: SweepOverrides,
        #[command(flatten)]
        out: OutDir,
    },
    /// Write the built-in scenarios as editable files.
    Export {
        #[command(flatten)]
        out: OutDir,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum BenchSystem {
    ThreeLevel,
    Benzene,
}

impl From<BenchSystem> for Builtin {
    fn from(b: BenchSystem) -> Self {
        match b {
            BenchSystem::ThreeLevel => Builtin::ThreeLevel,
            BenchSystem::Benzene => Builtin::Benzene,
        }
    }
}

#[derive(Debug, Clone, Args)]
struct OutDir {
    /// Output directory (default: $ONERDM_OUTPUT_DIR, then ./out).
    #[arg(long)]
    out: Option<PathBuf>,
}

impl OutDir {
    fn resolve(&self) -> PathBuf {
        self.out
            .clone()
            .or_else(|| std::env::var_os(OUTPUT_DIR_ENV).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from(DEFAULT_OUTPUT_DIR))
    }
}

/// Settings that replace the corresponding scenario entries.
#[derive(Debug, Clone, Default, Args)]
struct Overrides {
    /// Master equation: rme, ume or ule.
    #[arg(long = "me")]
    kind: Option<MasterEquation>,
    /// Enable Pauli blocking.
    #[arg(long)]
    blocked: bool,
    /// Clustering threshold in Eh (unified equation).
    #[arg(long)]
    threshold: Option<f64>,
    /// Include the Lamb-shift Hamiltonian.
    #[arg(long)]
    lamb_shift: bool,
    /// Bath temperature in K.
    #[arg(long)]
    temperature: Option<f64>,
    /// Co-propagate the hole matrix.
    #[arg(long)]
    hole: bool,
    /// Final time in atomic units.
    #[arg(long)]
    t_end: Option<f64>,
    /// Number of output intervals.
    #[arg(long)]
    samples: Option<usize>,
    /// Compare against matrix-exponential propagation (linear generators).
    #[arg(long)]
    verify: bool,
    /// Also write the superoperator matrix (linear generators).
    #[arg(long)]
    superoperator: bool,
}

/// Sweeps set temperature or threshold themselves.
#[derive(Debug, Clone, Default, Args)]
struct SweepOverrides {
    /// Master equation: rme, ume or ule.
    #[arg(long = "me")]
    kind: Option<MasterEquation>,
    /// Enable Pauli blocking.
    #[arg(long)]
    blocked: bool,
    /// Include the Lamb-shift Hamiltonian.
    #[arg(long)]
    lamb_shift: bool,
    /// Final time in atomic units.
    #[arg(long)]
    t_end: Option<f64>,
    /// Number of output intervals.
    #[arg(long)]
    samples: Option<usize>,
}

impl Overrides {
    fn apply(&self, file: &mut ScenarioFile) {
        if let Some(kind) = self.kind {
            file.generator.kind = kind;
        }
        file.generator.pauli_blocked |= self.blocked;
        file.generator.lamb_shift |= self.lamb_shift;
        if let Some(t) = self.threshold {
            file.generator.threshold = t;
        }
        if let Some(t) = self.temperature {
            file.bath.temperature = t;
        }
        file.schedule.hole |= self.hole;
        if let Some(t) = self.t_end {
            file.schedule.t_end = Some(t);
        }
        if let Some(n) = self.samples {
            file.schedule.samples = n;
            file.schedule.output_stride = None;
        }
        file.schedule.verify_expm |= self.verify;
    }
}

impl From<&SweepOverrides> for Overrides {
    fn from(s: &SweepOverrides) -> Self {
        Overrides {
            kind: s.kind,
            blocked: s.blocked,
            lamb_shift: s.lamb_shift,
            t_end: s.t_end,
            samples: s.samples,
            ..Default::default()
        }
    }
}

/// Where a failure happened decides the exit status.
enum Failure {
    Config(Error),
    Numerical(Error),
}

impl Failure {
    fn code(&self) -> i32 {
        match self {
            Failure::Config(_) => EXIT_CONFIG,
            Failure::Numerical(_) => EXIT_NUMERICAL,
        }
    }

    fn error(&self) -> &Error {
        match self {
            Failure::Config(e) | Failure::Numerical(e) => e,
        }
    }
}

fn config<T>(r: Result<T>) -> std::result::Result<T, Failure> {
    r.map_err(Failure::Config)
}

fn numerical<T>(r: Result<T>) -> std::result::Result<T, Failure> {
    r.map_err(|e| match e {
        Error::Io(_) => Failure::Config(e),
        e => Failure::Numerical(e),
    })
}

pub fn run_cli<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match dispatch(cli.command) {
        Ok(()) => EXIT_OK,
        Err(f) => {
            eprintln!("error: {}", f.error());
            if matches!(f.error(), Error::StepSizeUnderflow { .. }) {
                eprintln!("hint: loosen the tolerances or shorten t_end; rotating-frame integration is not available");
            }
            f.code()
        }
    }
}

fn dispatch(command: Command) -> std::result::Result<(), Failure> {
    match command {
        Command::Run { file, overrides, out } => {
            let mut source = config(ScenarioFile::load(&file))?;
            overrides.apply(&mut source);
            run_and_report(source, &overrides, &out.resolve(), None)
        }
        Command::Bench { system, overrides, out } => {
            let mut source = Builtin::from(system).file();
            overrides.apply(&mut source);
            let stem = bench_stem(&source);
            run_and_report(source, &overrides, &out.resolve(), Some(stem))
        }
        Command::Audit { file, overrides, out } => {
            let mut source = config(ScenarioFile::load(&file))?;
            overrides.apply(&mut source);
            let s = config(Scenario::from_file(source))?;
            let (spec, constraint, unitality) = numerical(scenario::audit_only(&s))?;
            let dir = out.resolve();
            let stem = sanitize(s.name());
            config(fs::create_dir_all(&dir).map_err(Error::from))?;
            let meta = output::audit_metadata(&s, &spec, &constraint, unitality);
            config(fs::write(dir.join(format!("{stem}.audit.json")), output::pretty(&meta)).map_err(Error::from))?;
            config(fs::write(dir.join(format!("{stem}.constraint.csv")), constraint.to_csv()).map_err(Error::from))?;
            config(fs::write(dir.join(format!("{stem}.channels.csv")), output::channels_csv(&spec)).map_err(Error::from))?;
            println!("name = {}", s.name());
            println!("kind = {}", spec.kind());
            println!("pauli_blocked = {}", spec.is_blocked());
            print!("{}", constraint.to_key_value());
            println!("unitality_residual = {unitality:e}");
            println!("non_unital = {}", unitality > CONSTRAINT_TOL);
            Ok(())
        }
        Command::Spectra { file, points, omega_max, out } => {
            let s = config(Scenario::load(&file))?;
            let grid = match omega_max {
                Some(w) if w > 0.0 => {
                    let n = points.max(2);
                    (0..n).map(|k| -w + 2.0 * w * k as f64 / (n - 1) as f64).collect()
                }
                Some(w) => {
                    return Err(Failure::Config(Error::InvalidParameter(format!(
                        "--omega-max must be positive, got {w}"
                    ))))
                }
                None => output::default_spectra_grid(&s.hamiltonian, &s.bath, points),
            };
            let csv = numerical(output::spectra_csv(&s.bath, &grid))?;
            let dir = out.resolve();
            config(fs::create_dir_all(&dir).map_err(Error::from))?;
            let path = dir.join(format!("{}.spectra.csv", sanitize(s.name())));
            config(fs::write(&path, csv).map_err(Error::from))?;
            println!("wrote {}", path.display());
            Ok(())
        }
        Command::Sweep {
            file,
            bench,
            temperature,
            threshold,
            trajectories,
            overrides,
            out,
        } => {
            let mut source = match (file, bench) {
                (Some(f), _) => config(ScenarioFile::load(&f))?,
                (None, Some(b)) => Builtin::from(b).file(),
                (None, None) => unreachable!("clap requires one of file or --bench"),
            };
            Overrides::from(&overrides).apply(&mut source);
            let (parameter, values) = if temperature.is_empty() {
                ("threshold", threshold)
            } else {
                ("temperature", temperature)
            };
            sweep(source, parameter, &values, trajectories, &out.resolve())
        }
        Command::Export { out } => {
            let dir = out.resolve();
            let written = config(scenario::export_builtins(&dir))?;
            for p in written {
                println!("wrote {}", p.display());
            }
            Ok(())
        }
    }
}

fn sanitize(name: &str) -> String {
    let s: String = name
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' || c == '.' { c } else { '_' })
        .collect();
    if s.is_empty() {
        "scenario".into()
    } else {
        s
    }
}

fn bench_stem(file: &ScenarioFile) -> String {
    let g = &file.generator;
    let mut stem = format!("{}-{}", file.name, g.kind);
    if g.kind == MasterEquation::Unified && g.threshold > 0.0 {
        stem.push_str(&format!("-t{}", g.threshold));
    }
    if g.pauli_blocked {
        stem.push_str("-blocked");
    }
    if g.lamb_shift {
        stem.push_str("-lamb");
    }
    sanitize(&stem)
}

fn run_and_report(source: ScenarioFile, overrides: &Overrides, dir: &Path, stem: Option<String>) -> std::result::Result<(), Failure> {
    let s = config(Scenario::from_file(source))?;
    let outcome = numerical(scenario::execute(&s))?;
    let stem = stem.unwrap_or_else(|| sanitize(s.name()));
    let mut written = numerical(output::write_run(dir, &stem, &s, &outcome))?;
    if overrides.superoperator {
        let l = numerical(outcome.spec.superoperator_matrix())?;
        let path = dir.join(format!("{stem}.superoperator.csv"));
        config(fs::write(&path, output::superoperator_csv(&l)).map_err(Error::from))?;
        written.push(path);
    }
    print_summary(&s, &outcome);
    for p in written {
        println!("wrote {}", p.display());
    }
    Ok(())
}

fn print_summary(s: &Scenario, o: &RunOutcome) {
    let traj = &o.trajectory;
    println!("name = {}", s.name());
    println!("kind = {}", o.spec.kind());
    println!("pauli_blocked = {}", o.spec.is_blocked());
    println!("t_end = {:e} ({})", traj.times.last().copied().unwrap_or(0.0), o.t_end_rule);
    let pops: Vec<String> = traj.final_populations().iter().map(|p| format!("{p:.6}")).collect();
    println!("final_populations = [{}]", pops.join(", "));
    print!("{}", o.audit.to_key_value());
    println!("unitality_residual = {:e}", o.unitality);
    println!("non_unital = {}", o.unitality > CONSTRAINT_TOL);
    println!("constraint_residual = {:e}", o.constraint.residual_norm);
    if let Some(oracle) = &o.oracle {
        println!("expm_max_population_deviation = {:e}", oracle.max_population_deviation);
    }
    if o.audit.violation {
        println!("warning: the trajectory leaves the N-representable set");
    }
}

fn sweep(source: ScenarioFile, parameter: &str, values: &[f64], trajectories: bool, dir: &Path) -> std::result::Result<(), Failure> {
    // every point is validated up front so a bad grid fails before any work
    let scenarios: Vec<Scenario> = values
        .iter()
        .map(|&v| {
            let mut f = source.clone();
            match parameter {
                "temperature" => f.bath.temperature = v,
                _ => f.generator.threshold = v,
            }
            f.name = format!("{}-{parameter}-{v}", source.name);
            Scenario::from_file(f)
        })
        .collect::<Result<_>>()
        .map_err(Failure::Config)?;
    let outcomes: Vec<Result<RunOutcome>> = scenarios.par_iter().map(scenario::execute).collect();
    config(fs::create_dir_all(dir).map_err(Error::from))?;
    if trajectories {
        for (s, o) in scenarios.iter().zip(&outcomes) {
            if let Ok(o) = o {
                numerical(output::write_run(dir, &sanitize(s.name()), s, o))?;
            }
        }
    }
    let rows: Vec<(f64, Result<RunOutcome>)> = values.iter().copied().zip(outcomes).collect();
    let path = dir.join(format!("{}.sweep-{parameter}.csv", sanitize(&source.name)));
    config(fs::write(&path, output::sweep_csv(parameter, &rows)).map_err(Error::from))?;
    for (v, r) in &rows {
        match r {
            Ok(o) => println!(
                "{parameter} = {v}: violation = {}, unitality_residual = {:e}",
                o.audit.violation, o.unitality
            ),
            Err(e) => println!("{parameter} = {v}: failed: {e}"),
        }
    }
    println!("wrote {}", path.display());
    Ok(())
}
