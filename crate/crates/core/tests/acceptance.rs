//! Acceptance checks. Each test prints one `[PASS]`/`[FAIL]` line with the
//! measured quantity and the tolerance, then asserts.
//!
//! Run with `cargo test -p onerdm --test acceptance -- --nocapture
//! --test-threads=1` for readable output.

use std::f64::consts::PI;
use std::sync::OnceLock;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use onerdm::bath::BathModel;
use onerdm::channels;
use onerdm::generators::{vectorize, GeneratorOptions, GeneratorSpec, MasterEquation};
use onerdm::integrator::StepControl;
use onerdm::propagate::{self, Trajectory};
use onerdm::rdm::{hermitize, identity, max_norm, CMatrix, CouplingOperator, SystemHamiltonian};
use onerdm::representability::{audit_trajectory, constraint_residual, copropagate_hole, unitality_residual};
use onerdm::scenario::{Builtin, Scenario};

const K_B: f64 = 3.166_811_563e-6;
const LAMBDA: f64 = 0.01;

fn report(ok: bool, what: &str, detail: String) {
    println!("[{}] {what}: {detail}", if ok { "PASS" } else { "FAIL" });
}

// Independent closed forms for the bath, written out from the definitions.
fn drude(w: f64) -> f64 {
    w * LAMBDA * LAMBDA / (w * w + LAMBDA * LAMBDA)
}

fn gamma_hat(w: f64, temperature: f64) -> f64 {
    let beta = 1.0 / (K_B * temperature);
    if w > 0.0 {
        drude(w) * (1.0 / ((beta * w).exp() - 1.0) + 1.0)
    } else if w < 0.0 {
        drude(-w) / ((-beta * w).exp() - 1.0)
    } else {
        K_B * temperature
    }
}

fn ket_bra(d: usize, entries: &[(usize, usize)]) -> CMatrix {
    let mut m = CMatrix::zeros(d, d);
    for &(i, j) in entries {
        m[(i, j)] += Complex64::new(1.0, 0.0);
    }
    m
}

fn variant(b: Builtin, kind: MasterEquation, blocked: bool, threshold: f64) -> Scenario {
    let mut file = b.file();
    file.generator.kind = kind;
    file.generator.pauli_blocked = blocked;
    file.generator.threshold = threshold;
    Scenario::from_file(file).unwrap()
}

fn run(s: &Scenario, hole: bool) -> (GeneratorSpec, Trajectory) {
    let spec = s.generator().unwrap();
    let (times, _) = s.output_times(&spec).unwrap();
    let traj = propagate::propagate(&spec, &s.initial_state, &times, StepControl::default(), hole).unwrap();
    (spec, traj)
}

/// Same output grid for every variant so populations compare time by time.
fn run_on_grid(s: &Scenario, times: &[f64]) -> (GeneratorSpec, Trajectory) {
    let spec = s.generator().unwrap();
    let traj = propagate::propagate(&spec, &s.initial_state, times, StepControl::default(), false).unwrap();
    (spec, traj)
}

struct BenzeneRuns {
    times: Vec<f64>,
    rme: Trajectory,
    ume_secular: Trajectory,
    ume_clustered: Trajectory,
    ule: Trajectory,
}

fn benzene_unblocked() -> &'static BenzeneRuns {
    static RUNS: OnceLock<BenzeneRuns> = OnceLock::new();
    RUNS.get_or_init(|| {
        let base = variant(Builtin::Benzene, MasterEquation::Redfield, false, 0.0);
        let spec = base.generator().unwrap();
        let (times, _) = base.output_times(&spec).unwrap();
        let go = |kind, threshold| run_on_grid(&variant(Builtin::Benzene, kind, false, threshold), &times).1;
        BenzeneRuns {
            rme: go(MasterEquation::Redfield, 0.0),
            ume_secular: go(MasterEquation::Unified, 0.0),
            ume_clustered: go(MasterEquation::Unified, 0.091),
            ule: go(MasterEquation::Universal, 0.0),
            times,
        }
    })
}

type BlockedRun = (String, GeneratorSpec, Result<Trajectory, onerdm::error::Error>);

fn benzene_blocked() -> &'static Vec<BlockedRun> {
    static RUNS: OnceLock<Vec<BlockedRun>> = OnceLock::new();
    RUNS.get_or_init(|| {
        [
            ("rme", MasterEquation::Redfield, 0.0),
            ("ume", MasterEquation::Unified, 0.0),
            ("ume(0.091)", MasterEquation::Unified, 0.091),
            ("ule", MasterEquation::Universal, 0.0),
        ]
        .into_iter()
        .map(|(name, kind, threshold)| {
            let s = variant(Builtin::Benzene, kind, true, threshold);
            let spec = s.generator().unwrap();
            let (times, _) = s.output_times(&spec).unwrap();
            let traj = propagate::propagate(&spec, &s.initial_state, &times, StepControl::default(), false);
            (name.to_string(), spec, traj)
        })
        .collect()
    })
}

#[test]
fn three_equations_agree_on_ladder() {
    let base = variant(Builtin::ThreeLevel, MasterEquation::Redfield, false, 0.0);
    let (times, _) = base.output_times(&base.generator().unwrap()).unwrap();
    let trajs: Vec<Trajectory> = MasterEquation::ALL
        .iter()
        .map(|&k| run_on_grid(&variant(Builtin::ThreeLevel, k, false, 0.0), &times).1)
        .collect();
    let mut worst: f64 = 0.0;
    for step in 0..times.len() {
        for k in 0..3 {
            let p: Vec<f64> = trajs.iter().map(|t| t.populations[step][k]).collect();
            worst = worst.max((p[0] - p[1]).abs()).max((p[0] - p[2]).abs()).max((p[1] - p[2]).abs());
        }
    }
    let ok = worst < 1e-3;
    report(
        ok,
        "ladder populations under rme, ume (threshold 0) and ule agree",
        format!("max deviation {worst:.3e} over {} times (tol 1e-3)", times.len()),
    );
    assert!(ok);
}

#[test]
fn hole_evolution_exposes_non_unital_map() {
    let unblocked = variant(Builtin::ThreeLevel, MasterEquation::Universal, false, 0.0);
    let blocked = variant(Builtin::ThreeLevel, MasterEquation::Universal, true, 0.0);
    let spec_u = unblocked.generator().unwrap();
    let (times_u, _) = unblocked.output_times(&spec_u).unwrap();
    let (_, hole_u) = copropagate_hole(&spec_u, &unblocked.initial_state, &times_u, StepControl::default()).unwrap();
    let spec_b = blocked.generator().unwrap();
    let (times_b, _) = blocked.output_times(&spec_b).unwrap();
    let (_, hole_b) = copropagate_hole(&spec_b, &blocked.initial_state, &times_b, StepControl::default()).unwrap();

    let final_u = *hole_u.defects.last().unwrap();
    let max_b = hole_b.max_defect();
    let ok_u = final_u > 0.05;
    let ok_b = max_b < 1e-6;
    report(
        ok_u,
        "unblocked ule hole matrix departs from 1 - rho",
        format!("steady-state defect {final_u:.3e} (need > 0.05)"),
    );
    report(
        ok_b,
        "blocked ule hole matrix stays equal to 1 - rho",
        format!("max defect {max_b:.3e} (tol 1e-6)"),
    );
    assert!(ok_u && ok_b);
}

#[test]
fn ladder_constraint_residual_structure() {
    let spec = variant(Builtin::ThreeLevel, MasterEquation::Universal, false, 0.0)
        .generator()
        .unwrap();
    let r = constraint_residual(&spec);
    let c = 2.0 * PI * (gamma_hat(0.5, 50.0) - gamma_hat(-0.5, 50.0));
    let mut expected = CMatrix::zeros(3, 3);
    expected[(0, 0)] = Complex64::new(c, 0.0);
    expected[(2, 2)] = Complex64::new(-c, 0.0);
    let dev = max_norm(&(&r.residual_matrix - expected));
    let ok = dev < 1e-12 && c > 0.0;
    report(
        ok,
        "ladder ule residual equals c diag(1, 0, -1)",
        format!("c = {c:.6e}, deviation {dev:.3e} (tol 1e-12)"),
    );
    assert!(ok);
}

#[test]
fn benzene_constraint_residual_structure() {
    let spec = variant(Builtin::Benzene, MasterEquation::Redfield, false, 0.0)
        .generator()
        .unwrap();
    let r = constraint_residual(&spec);
    let asym = |w: f64| 2.0 * PI * (gamma_hat(w, 50.0) - gamma_hat(-w, 50.0));
    let (c1, c2, c3) = (asym(0.169), asym(0.491), asym(0.260));

    // downhill channel operators built by hand
    let a1 = ket_bra(6, &[(0, 1), (0, 2)]);
    let a2 = ket_bra(6, &[(1, 3), (1, 4), (2, 3), (2, 4)]);
    let a3 = ket_bra(6, &[(3, 5), (4, 5)]);
    let comm = |a: &CMatrix| a * a.adjoint() - a.adjoint() * a;
    let full = comm(&a1) * Complex64::new(c1, 0.0) + comm(&a2) * Complex64::new(c2, 0.0) + comm(&a3) * Complex64::new(c3, 0.0);
    let full_dev = max_norm(&(&r.residual_matrix - &full));

    // projector pattern on the diagonal
    let pattern = [
        [2.0, -1.0, -1.0, 0.0, 0.0, 0.0],
        [0.0, 2.0, 2.0, -2.0, -2.0, 0.0],
        [0.0, 0.0, 0.0, 1.0, 1.0, -2.0],
    ];
    let mut diag_dev: f64 = 0.0;
    for i in 0..6 {
        let expected = c1 * pattern[0][i] + c2 * pattern[1][i] + c3 * pattern[2][i];
        diag_dev = diag_dev.max((r.residual_matrix[(i, i)].re - expected).abs());
    }
    let ok = full_dev < 1e-12 && diag_dev < 1e-12;
    report(
        ok,
        "benzene rme residual has the three-channel projector structure",
        format!(
            "coefficients ({c1:.4e}, {c2:.4e}, {c3:.4e}); matrix deviation {full_dev:.3e}, diagonal deviation {diag_dev:.3e} (tol 1e-12)"
        ),
    );
    assert!(ok);
}

#[test]
fn symmetrized_rates_satisfy_constraints() {
    let mut worst: f64 = 0.0;
    for b in [Builtin::ThreeLevel, Builtin::Benzene] {
        for (kind, threshold) in [
            (MasterEquation::Redfield, 0.0),
            (MasterEquation::Unified, 0.0),
            (MasterEquation::Unified, 0.091),
            (MasterEquation::Universal, 0.0),
        ] {
            let spec = variant(b, kind, false, threshold).generator().unwrap();
            let sym = spec.with_rates(spec.rates().symmetrized()).unwrap();
            let r = constraint_residual(&sym);
            worst = worst
                .max(r.residual_norm)
                .max(r.direct_norm)
                .max(unitality_residual(&sym).unwrap());
        }
    }
    let ok = worst < 1e-12;
    report(
        ok,
        "symmetrized rates zero every constraint residual",
        format!("max residual {worst:.3e} (tol 1e-12)"),
    );
    assert!(ok);
}

#[test]
fn benzene_unblocked_overfills_ground_orbital() {
    let runs = benzene_unblocked();
    let mut peak: f64 = 0.0;
    let mut ok = true;
    for (name, t) in [
        ("rme", &runs.rme),
        ("ume", &runs.ume_secular),
        ("ume(0.091)", &runs.ume_clustered),
        ("ule", &runs.ule),
    ] {
        let p = t.population_series(0).into_iter().fold(0.0, f64::max);
        let violated = audit_trajectory(t).violation;
        peak = peak.max(p);
        ok &= p > 2.0 && violated;
        report(
            p > 2.0 && violated,
            &format!("benzene {name} pushes the ground orbital past 2"),
            format!("peak ground population {p:.6}, audit violation {violated}"),
        );
    }
    assert!(ok, "peak {peak}");
}

#[test]
fn benzene_unblocked_ground_population_approaches_six() {
    let runs = benzene_unblocked();
    let mut ok = true;
    for (name, t) in [
        ("rme", &runs.rme),
        ("ume", &runs.ume_secular),
        ("ume(0.091)", &runs.ume_clustered),
        ("ule", &runs.ule),
    ] {
        let p = t.final_populations()[0];
        ok &= p >= 5.9;
        report(
            p >= 5.9,
            &format!("benzene {name} ground population at t_end"),
            format!("{p:.6} at t = {:.4e} (need >= 5.9)", t.times.last().unwrap()),
        );
    }
    assert!(ok);
}

#[test]
fn benzene_clustered_unified_relaxes_slower() {
    let runs = benzene_unblocked();
    let rme = runs.rme.population_series(0);
    let ule = runs.ule.population_series(0);
    let ume = runs.ume_clustered.population_series(0);
    // first time the rme ground population is halfway to its final value
    let target = 0.5 * (rme[0] + rme[rme.len() - 1]);
    let k = rme.iter().position(|&p| p >= target).unwrap();
    let ok = ume[k] < rme[k] && ume[k] < ule[k];
    report(
        ok,
        "benzene ume(0.091) ground population lags rme and ule",
        format!(
            "at t = {:.4e}: ume {:.6}, rme {:.6}, ule {:.6}",
            runs.times[k], ume[k], rme[k], ule[k]
        ),
    );
    assert!(ok);
}

#[test]
fn benzene_blocked_stays_within_bounds() {
    let mut ok = true;
    for (name, _, traj) in benzene_blocked() {
        let traj = match traj {
            Ok(t) => t,
            Err(e) => {
                ok = false;
                report(false, &format!("blocked benzene {name} populations within [0, 2]"), format!("propagation stopped: {e}"));
                continue;
            }
        };
        let lo = traj.populations.iter().flatten().copied().fold(f64::INFINITY, f64::min);
        let hi = traj.populations.iter().flatten().copied().fold(f64::NEG_INFINITY, f64::max);
        let audit = audit_trajectory(traj);
        let this = lo >= -1e-6 && hi <= 2.0 + 1e-6 && !audit.violation;
        ok &= this;
        report(
            this,
            &format!("blocked benzene {name} populations within [0, 2]"),
            format!(
                "populations span [{lo:.3e}, {hi:.9}], eigenvalues span [{:.3e}, {:.9}]",
                audit.min_eigenvalue, audit.max_eigenvalue
            ),
        );
    }
    assert!(ok);
}

#[test]
fn benzene_blocked_reaches_closed_shell() {
    let expected = [2.0, 2.0, 2.0, 0.0, 0.0, 0.0];
    let mut ok = true;
    for (name, _, traj) in benzene_blocked() {
        let traj = match traj {
            Ok(t) => t,
            Err(e) => {
                ok = false;
                report(false, &format!("blocked benzene {name} steady state is (2, 2, 2, 0, 0, 0)"), format!("propagation stopped: {e}"));
                continue;
            }
        };
        let p = traj.final_populations();
        let dev = p.iter().zip(expected).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        ok &= dev < 1e-3;
        let eig = onerdm::rdm::hermitian_eigenvalues(traj.final_state().data()).unwrap();
        report(
            dev < 1e-3,
            &format!("blocked benzene {name} steady state is (2, 2, 2, 0, 0, 0)"),
            format!(
                "populations {:?}, occupation numbers {:?}, deviation {dev:.3e} (tol 1e-3)",
                p.iter().map(|x| (x * 1e6).round() / 1e6).collect::<Vec<_>>(),
                eig.iter().map(|x| (x * 1e6).round() / 1e6).collect::<Vec<_>>()
            ),
        );
    }
    assert!(ok);
}

#[test]
fn benzene_blocked_conserves_trace_and_is_unital() {
    let mut ok = true;
    for (name, spec, traj) in benzene_blocked() {
        let u = unitality_residual(spec).unwrap();
        let drift = match traj {
            Ok(t) => audit_trajectory(t).max_trace_drift,
            Err(e) => {
                ok = false;
                report(false, &format!("blocked benzene {name} trace and unitality"), format!("propagation stopped: {e}; unitality residual {u:.3e}"));
                continue;
            }
        };
        let this = drift < 1e-8 && u < 1e-12;
        ok &= this;
        report(
            this,
            &format!("blocked benzene {name} trace and unitality"),
            format!("trace drift {drift:.3e} (tol 1e-8), unitality residual {u:.3e} (tol 1e-12)"),
        );
    }
    assert!(ok);
}

#[test]
fn spectral_function_properties() {
    let mut ok = true;

    let mut kms_worst: f64 = 0.0;
    for t in [10.0, 50.0, 300.0] {
        let bath = BathModel::new(LAMBDA, t).unwrap();
        for w in [0.169, 0.260, 0.491, 0.5] {
            // log form: the uphill rate underflows at low temperature
            let log_ratio = bath.log_spectral_function_ule(w) - bath.log_spectral_function_ule(-w);
            let expected = w / (K_B * t);
            kms_worst = kms_worst.max(((log_ratio - expected) / expected).abs());
            let up = bath.spectral_function_ule(-w);
            if up > 1e-250 {
                let ratio = bath.spectral_function_ule(w) / up;
                kms_worst = kms_worst.max((ratio / expected.exp() - 1.0).abs());
            }
        }
    }
    let this = kms_worst < 1e-9;
    ok &= this;
    report(this, "detailed balance of the spectral function", format!("max relative error {kms_worst:.3e} (tol 1e-9)"));

    let mut closed_worst: f64 = 0.0;
    for t in [10.0, 50.0, 300.0] {
        let bath = BathModel::new(LAMBDA, t).unwrap();
        for w in [-0.5, -0.491, -0.26, -0.169, -1e-3, 0.0, 1e-3, 0.169, 0.26, 0.491, 0.5] {
            let exact = gamma_hat(w, t);
            if exact > 1e-300 {
                closed_worst = closed_worst.max((bath.spectral_function_ule(w) - exact).abs() / exact);
            }
        }
    }
    let this = closed_worst < 1e-12;
    ok &= this;
    report(this, "spectral function matches the closed form", format!("max relative error {closed_worst:.3e} (tol 1e-12)"));

    let mut cont_worst: f64 = 0.0;
    for t in [10.0, 50.0, 300.0] {
        let bath = BathModel::new(LAMBDA, t).unwrap();
        let at0 = bath.spectral_function_ule(0.0);
        for d in [1e-9, -1e-9] {
            cont_worst = cont_worst.max((bath.spectral_function_ule(d) - at0).abs());
        }
        cont_worst = cont_worst.max((at0 - gamma_hat(0.0, t)).abs());
    }
    let this = cont_worst < 1e-8;
    ok &= this;
    report(this, "spectral function continuous at zero", format!("max |G(+-1e-9) - G(0)| {cont_worst:.3e} (tol 1e-8)"));

    let mut re_worst: f64 = 0.0;
    let bath = BathModel::new(LAMBDA, 50.0).unwrap();
    for w in [-0.5, -0.169, 0.0, 0.169, 0.26, 0.491, 0.5] {
        let g = bath.spectral_function_redfield(w).unwrap();
        re_worst = re_worst.max((g.re - PI * bath.spectral_function_ule(w)).abs());
    }
    let this = re_worst <= 1e-15;
    ok &= this;
    report(this, "real part of the one-sided transform is pi times the full one", format!("max deviation {re_worst:.3e} (tol 1e-15)"));

    let mut pv_worst: f64 = 0.0;
    for t in [10.0, 50.0, 300.0] {
        let bath = BathModel::new(LAMBDA, t).unwrap();
        let n = bath.pv_points();
        for w in [-0.5, -0.491, -0.26, -0.169, 0.0, 0.169, 0.26, 0.491, 0.5] {
            let coarse = bath.xi_integral_at(w, n).unwrap();
            let fine = bath.xi_integral_at(w, 2 * n).unwrap();
            pv_worst = pv_worst.max((coarse - fine).abs());
        }
        for (a, b) in [(0.5, 0.5), (0.5, -0.5), (0.169, 0.26), (-0.491, 0.169)] {
            let coarse = bath.ule_lamb_coefficient_at(a, b, n).unwrap();
            let fine = bath.ule_lamb_coefficient_at(a, b, 2 * n).unwrap();
            pv_worst = pv_worst.max((coarse - fine).abs());
        }
    }
    let this = pv_worst < 1e-8;
    ok &= this;
    report(this, "principal-value integrals converge under grid doubling", format!("max change {pv_worst:.3e} (tol 1e-8)"));

    assert!(ok);
}

#[test]
fn integrator_matches_matrix_exponential() {
    let cases = [
        (Builtin::ThreeLevel, MasterEquation::Redfield, 0.0),
        (Builtin::ThreeLevel, MasterEquation::Unified, 0.0),
        (Builtin::ThreeLevel, MasterEquation::Universal, 0.0),
        (Builtin::Benzene, MasterEquation::Redfield, 0.0),
        (Builtin::Benzene, MasterEquation::Unified, 0.0),
        (Builtin::Benzene, MasterEquation::Unified, 0.091),
        (Builtin::Benzene, MasterEquation::Universal, 0.0),
    ];
    let mut ok = true;
    for (b, kind, threshold) in cases {
        let s = variant(b, kind, false, threshold);
        let (spec, traj) = run(&s, false);
        let cmp = propagate::verify_against_expm(&spec, &traj).unwrap();

        let l = spec.superoperator_matrix().unwrap();
        let d = spec.dim();
        let mut trace_worst: f64 = 0.0;
        for col in 0..d * d {
            let s: Complex64 = (0..d).map(|i| l[(i * d + i, col)]).sum();
            trace_worst = trace_worst.max(s.norm());
        }
        let image = &l * vectorize(&(identity(d) * Complex64::new(spec.chi(), 0.0)));
        let image_norm = image.iter().map(|z| z.norm()).fold(0.0, f64::max);
        let unital_gap = (image_norm - unitality_residual(&spec).unwrap()).abs();

        let this = cmp.max_population_deviation < 1e-8 && trace_worst < 1e-12 && unital_gap < 1e-12;
        ok &= this;
        report(
            this,
            &format!("{:?} {kind}{} against the matrix exponential", b, if threshold > 0.0 { format!("({threshold})") } else { String::new() }),
            format!(
                "population deviation {:.3e} (tol 1e-8), trace functional {trace_worst:.3e}, L vec(chi 1) vs unitality {unital_gap:.3e} (tol 1e-12)",
                cmp.max_population_deviation
            ),
        );
    }
    assert!(ok);
}

fn random_hermitian(rng: &mut ChaCha8Rng, d: usize) -> CMatrix {
    let m = DMatrix::from_fn(d, d, |_, _| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
    hermitize(&m).unwrap()
}

fn random_state(rng: &mut ChaCha8Rng, d: usize, chi: f64) -> CMatrix {
    let basis = SystemHamiltonian::from_matrix(&random_hermitian(rng, d)).unwrap();
    let v = basis.eigenvectors();
    let occ: Vec<f64> = (0..d).map(|_| rng.random_range(0.0..chi)).collect();
    hermitize(&(v * onerdm::rdm::real_diagonal(&occ) * v.adjoint())).unwrap()
}

#[test]
fn structural_properties_on_random_systems() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x1_4d3);
    let mut completeness: f64 = 0.0;
    let mut herm: f64 = 0.0;
    let mut trace: f64 = 0.0;
    let mut secular: f64 = 0.0;
    let mut jump: f64 = 0.0;
    let mut blocked_unital: f64 = 0.0;
    let temperatures = [10.0, 50.0, 300.0, 3000.0];
    for case in 0..1000 {
        let d = 2 + case % 5;
        let chi = if case % 2 == 0 { 1.0 } else { 2.0 };
        let h = SystemHamiltonian::from_matrix(&random_hermitian(&mut rng, d)).unwrap();
        let a = CouplingOperator::new("A", random_hermitian(&mut rng, d)).unwrap();
        let rho = random_state(&mut rng, d, chi);
        let bath = BathModel::new(LAMBDA, temperatures[case % 4]).unwrap();

        let set = channels::decompose(&h, &a).unwrap();
        completeness = completeness.max(max_norm(&(set.reconstruct() - a.matrix())));

        let couplings = [a];
        let build = |kind, blocked| {
            GeneratorSpec::build(&h, &couplings, &bath, GeneratorOptions::new(kind, chi).blocked(blocked)).unwrap()
        };
        let rme = build(MasterEquation::Redfield, false);
        let ume = build(MasterEquation::Unified, false);
        let ule = build(MasterEquation::Universal, false);
        for spec in [&rme, &ume, &ule] {
            let out = spec.dissipator(&rho).unwrap();
            herm = herm.max(max_norm(&(&out - out.adjoint())));
            trace = trace.max(out.trace().norm());
        }
        let truncated = rme.secular_truncation();
        secular = secular
            .max(max_norm(&(truncated.coefficients() - ume.coefficients())))
            .max(max_norm(&(truncated.superoperator_matrix().unwrap() - ume.superoperator_matrix().unwrap())));
        jump = jump.max(max_norm(&(ule.dissipator_ule(&rho).unwrap() - ule.dissipator_ule_jump(&rho).unwrap())));

        for kind in MasterEquation::ALL {
            let spec = build(kind, true);
            let out = spec.liouvillian_action(&(identity(d) * Complex64::new(chi, 0.0))).unwrap();
            blocked_unital = blocked_unital.max(max_norm(&out));
            let b = spec.dissipator(&rho).unwrap();
            herm = herm.max(max_norm(&(&b - b.adjoint())));
            trace = trace.max(b.trace().norm());
        }
    }
    let checks = [
        ("channel decomposition reconstructs the coupling", completeness, 1e-10),
        ("dissipators are Hermitian", herm, 1e-12),
        ("dissipators are traceless", trace, 1e-12),
        ("ume at threshold 0 equals the secular rme", secular, 1e-12),
        ("ule double sum equals its jump-operator form", jump, 1e-12),
        ("blocked generators annihilate chi 1", blocked_unital, 1e-12),
    ];
    let mut ok = true;
    for (what, value, tol) in checks {
        let this = value < tol;
        ok &= this;
        report(this, &format!("1000 random systems: {what}"), format!("max {value:.3e} (tol {tol:.0e})"));
    }
    assert!(ok);
}
