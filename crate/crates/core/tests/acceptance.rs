//! End-to-end acceptance checks. Run with `--nocapture` to see one
//! PASS/FAIL line per criterion.

use std::f64::consts::{E, PI};
use std::time::Instant;

use hotspot_core::certificates;
use hotspot_core::dynamics::{advance, Params, RunOutcome, State};
use hotspot_core::functionals::{self, EstimateConstants, FunctionalContext, InitialSummary};
use hotspot_core::grid::{Bc, Field, Grid1D};
use hotspot_core::io;
use hotspot_core::material::CoefficientLaw;
use hotspot_core::verify::{self, AuditResult, InequalityId, TrajectoryRecord};
use sha2::{Digest, Sha256};

fn report(criterion: u32, ok: bool, detail: String) {
    println!("{} criterion {criterion}: {detail}", if ok { "PASS" } else { "FAIL" });
}

type Profile = Box<dyn Fn(f64) -> f64 + Send + Sync>;

struct Case {
    name: &'static str,
    law: CoefficientLaw,
    a: f64,
    d: f64,
    u0: Profile,
    u0t: Profile,
    theta0: Profile,
}

fn hat(center: f64, width: f64, height: f64) -> Profile {
    Box::new(move |x| height * (1.0 - (x - center).abs() / (0.5 * width)).max(0.0))
}

fn zero() -> Profile {
    Box::new(|_| 0.0)
}

fn initial_state(case: &Case, n: usize) -> State {
    let g = Grid1D::unit(n).unwrap();
    let u0 = Field::from_fn(&g, Bc::DirichletZero, &*case.u0).unwrap();
    let u0t = Field::from_fn(&g, Bc::DirichletZero, &*case.u0t).unwrap();
    let th = Field::from_fn(&g, Bc::NeumannZero, &*case.theta0).unwrap();
    State::from_initial_data(g, u0, u0t, th, case.a).unwrap()
}

fn params(case: &Case, horizon: f64) -> Params {
    let mut p = Params::new(case.a, case.d, case.law.clone(), horizon);
    p.checkpoint_every = horizon / 50.0;
    p
}

fn quadratic(f_star: f64) -> CoefficientLaw {
    CoefficientLaw::power_law(1.0, 2.0, f_star)
}

#[test]
fn criterion_1_ode_comparison() {
    let start = Instant::now();
    let law = quadratic(0.0);
    let quad = certificates::ode_blowup_time(&law, 1.0, 0.0);
    let int = certificates::ode_blowup_time_integrated(&law, 1.0, 0.0).unwrap();
    let flat = CoefficientLaw::power_law(1.0, 0.0, 0.0);
    let flat_quad = certificates::ode_blowup_time(&flat, 1.0, 0.0);
    let flat_int = certificates::ode_blowup_time_integrated(&flat, 1.0, 0.0).unwrap();
    let elapsed = start.elapsed().as_secs_f64();
    let ok = (quad - 1.0).abs() <= 5e-3
        && (int - 1.0).abs() <= 5e-3
        && flat_quad == f64::INFINITY
        && flat_int == f64::INFINITY
        && elapsed < 1.0;
    report(1, ok, format!("T* quadrature {quad:.12}, integration {int:.12}, gamma=1 -> {flat_quad}/{flat_int}, {elapsed:.3}s"));
    assert!(ok);
}

#[test]
fn criterion_2_explicit_constants() {
    let c65 = certificates::theorem65_constant(&quadratic(0.0), 1.0, 1.0, 1.0).unwrap();
    let target = 12.0 * E * E;
    let data = InitialSummary { psi_integral: 1.0, l2_u0: 0.0, l2_u0t: 0.0, grad_u0_sq: 0.0, theta0_inf: 0.0, omega_measure: 1.0 };
    let l64 = functionals::lemma64_rhs(&data, 1.0, &EstimateConstants::new(1.0, 0.0, 1.0), 1.0).unwrap();
    let ok = ((c65 - target) / target).abs() <= 1e-9 && l64 == 12.0;
    report(2, ok, format!("theorem65 C = {c65:.15} (12e^2 = {target:.15}), lemma64 rhs = {l64}"));
    assert!(ok);
}

fn soundness_cases() -> Vec<(Case, f64)> {
    vec![
        (Case { name: "narrow hat, f=0", law: quadratic(0.0), a: 1.0, d: 1.0, u0: hat(0.5, 0.1, 1.0), u0t: zero(), theta0: zero() }, 1.0),
        (Case { name: "narrow hat, f*=0.5", law: quadratic(0.5), a: 1.0, d: 1.0, u0: hat(0.5, 0.1, 1.0), u0t: zero(), theta0: zero() }, 1.0),
        (
            Case { name: "off-centre hat, mu=3", law: CoefficientLaw::power_law(1.0, 3.0, 0.0), a: 1.0, d: 1.0, u0: hat(0.3, 0.05, 0.5), u0t: zero(), theta0: zero() },
            1.0,
        ),
        (
            Case {
                name: "tall hat, warm ramp, f*=0.3",
                law: quadratic(0.3),
                a: 1.0,
                d: 1.0,
                u0: hat(0.5, 0.2, 2.0),
                u0t: zero(),
                theta0: Box::new(|x| 0.5 + x),
            },
            1.0,
        ),
        (
            Case {
                name: "hot sine, f=0",
                law: quadratic(0.0),
                a: 1.0,
                d: 1.0,
                u0: Box::new(|x| 0.5 * (PI * x).sin()),
                u0t: zero(),
                theta0: Box::new(|_| 60.0),
            },
            1.0,
        ),
        (
            Case {
                name: "hot sine, f*=0.3",
                law: quadratic(0.3),
                a: 1.0,
                d: 1.0,
                u0: Box::new(|x| 0.5 * (PI * x).sin()),
                u0t: Box::new(|x| 0.2 * (2.0 * PI * x).sin()),
                theta0: Box::new(|x| 80.0 + (PI * x).cos()),
            },
            1.0,
        ),
        (
            Case { name: "hat, T=0.5, a=2", law: CoefficientLaw::power_law(2.0, 2.0, 0.0), a: 2.0, d: 0.5, u0: hat(0.5, 0.05, 1.0), u0t: zero(), theta0: zero() },
            0.5,
        ),
    ]
}

#[test]
fn criterion_3_certificate_soundness() {
    let mut all_ok = true;
    let mut certified = 0;
    for (case, t) in soundness_cases() {
        let s = initial_state(&case, 256);
        let p = params(&case, 1.05 * t);
        let ctx = FunctionalContext::new(&p).unwrap();
        let data = InitialSummary::from_state(&s, case.a, Some(ctx.psi()));
        let l64 = certificates::check_lemma64(&data, &case.law, case.a, t);
        let t66 = certificates::check_theorem66(&data, &case.law, case.a, t, None, None);
        let guaranteed = l64.is_guaranteed() || t66.is_guaranteed();
        let start = Instant::now();
        let out = advance(s, &p).unwrap();
        let elapsed = start.elapsed().as_secs_f64();
        let t_detect = out.t_detect();
        let ok = guaranteed && t_detect.is_some_and(|td| td <= 1.05 * t) && elapsed < 30.0;
        certified += guaranteed as usize;
        all_ok &= ok;
        println!(
            "  {}: lemma64 margin {:.4e}, theorem66 {:?}, outcome {}, t_detect {:?}, {:.2}s",
            case.name,
            l64.margin,
            t66.verdict,
            out.label(),
            t_detect,
            elapsed
        );
    }
    let ok = all_ok && certified >= 5;
    report(3, ok, format!("{certified} certified configurations, all detected by 1.05 T"));
    assert!(ok);
}

fn audit_cases() -> Vec<(Case, f64)> {
    let mut cases = vec![
        (Case { name: "zero data", law: quadratic(0.0), a: 1.0, d: 1.0, u0: zero(), u0t: zero(), theta0: Box::new(|_| 1.0) }, 0.5),
        (
            Case {
                name: "smooth window",
                law: quadratic(0.1),
                a: 1.0,
                d: 1.0,
                u0: Box::new(|x| 0.2 * (PI * x).sin()),
                u0t: zero(),
                theta0: Box::new(|x| 1.0 + 0.5 * (PI * x).cos()),
            },
            1.0,
        ),
        (
            Case {
                name: "unit lambda, small data",
                law: quadratic(1.0),
                a: 1.0,
                d: 1.0,
                u0: Box::new(|x| 0.1 * (PI * x).sin()),
                u0t: Box::new(|x| 0.3 * (3.0 * PI * x).sin()),
                theta0: Box::new(|x| 0.5 + 0.5 * (2.0 * PI * x).cos()),
            },
            1.0,
        ),
        (
            Case {
                name: "slow relaxation, weak diffusion",
                law: CoefficientLaw::power_law(0.5, 3.0, 0.2),
                a: 0.5,
                d: 0.1,
                u0: Box::new(|x| 0.3 * (2.0 * PI * x).sin()),
                u0t: Box::new(|x| 0.2 * (PI * x).sin()),
                theta0: Box::new(|x| 1.0 + x * x),
            },
            1.0,
        ),
        (
            Case {
                name: "coupled sine blow-up",
                law: quadratic(1.0),
                a: 1.0,
                d: 1.0,
                u0: Box::new(|x| 0.5 * (PI * x).sin()),
                u0t: Box::new(|x| 0.25 * (2.0 * PI * x).sin()),
                theta0: Box::new(|x| 2.0 + (PI * x).cos()),
            },
            0.5,
        ),
    ];
    cases.extend(soundness_cases().into_iter().take(4));
    cases
}

const ROUNDING_FLOOR: f64 = 1e-12;

const AUDITED: [InequalityId; 5] = [InequalityId::L601, InequalityId::L63, InequalityId::L61, InequalityId::L62, InequalityId::L99];

fn audited(case: &Case, n: usize, horizon: f64, tol_scale: f64) -> (RunOutcome, Vec<AuditResult>) {
    let mut p = params(case, horizon);
    p.step_rel_tol *= tol_scale;
    let out = advance(initial_state(case, n), &p).unwrap();
    let rec = TrajectoryRecord::from_outcome(&out, case.a);
    let audits = verify::audit_all(&rec, &case.law, verify::DEFAULT_AUDIT_TOL)
        .into_iter()
        .filter(|r| AUDITED.contains(&r.inequality_id))
        .collect();
    (out, audits)
}

#[test]
fn criterion_4_inequality_audits() {
    let mut all_ok = true;
    let (mut completed, mut blown) = (0, 0);
    let cases = audit_cases();
    for (case, t) in &cases {
        let (out, audits) = audited(case, 128, *t, 1.0);
        completed += out.is_completed() as usize;
        blown += out.is_blowup() as usize;
        let mut line = format!("  {} ({}):", case.name, out.label());
        for r in &audits {
            let ok = r.unavailable.is_none() && r.worst_margin >= -verify::DEFAULT_AUDIT_TOL;
            all_ok &= ok;
            line += &format!(" {:?} {:+.3e}", r.inequality_id, r.worst_margin);
            // Margins at rounding level cannot improve under refinement.
            if r.worst_margin < -ROUNDING_FLOOR {
                let (_, fine) = audited(case, 256, *t, 0.5);
                let refined = fine.iter().find(|f| f.inequality_id == r.inequality_id).unwrap().worst_margin;
                let improved = refined >= -ROUNDING_FLOOR || refined.abs() * 1.5 <= r.worst_margin.abs();
                all_ok &= improved;
                line += &format!(" (refined {refined:+.3e})");
            }
        }
        println!("{line}");
    }
    let ok = all_ok && cases.len() >= 8 && completed > 0 && blown > 0;
    report(4, ok, format!("{} runs ({completed} completed, {blown} blow-up), audits within -0.02", cases.len()));
    assert!(ok);
}

#[test]
fn criterion_5_minimum_principle() {
    let law = quadratic(1.0);
    let runs: Vec<Case> = vec![
        Case { name: "cold, shearing", law: law.clone(), a: 1.0, d: 1.0, u0: zero(), u0t: Box::new(|x| 0.5 * (PI * x).sin()), theta0: Box::new(|_| 0.3) },
        Case {
            name: "warm, mixed modes",
            law: law.clone(),
            a: 2.0,
            d: 0.2,
            u0: Box::new(|x| 0.1 * (2.0 * PI * x).sin()),
            u0t: Box::new(|x| 0.4 * (PI * x).sin() - 0.2 * (3.0 * PI * x).sin()),
            theta0: Box::new(|x| 1.0 + 0.5 * (PI * x).cos()),
        },
        Case { name: "zero temperature", law: law.clone(), a: 0.5, d: 0.05, u0: zero(), u0t: Box::new(|x| 0.3 * (4.0 * PI * x).sin()), theta0: zero() },
    ];
    let mut all_ok = true;
    for case in &runs {
        let p = params(case, 1.0);
        let s = initial_state(case, 128);
        let inf0 = s.theta.min();
        let out = advance(s, &p).unwrap();
        let eps = 10.0 * p.step_rel_tol * (1.0 + inf0);
        let traj = out.trajectory();
        let lambda = traj.lambda;
        let floor = traj.last().state.theta_running_min;
        let mut ok = (lambda - 1.0).abs() < 1e-9 && floor >= inf0 - 0.25 - eps;
        for ck in &traj.checkpoints {
            ok &= ck.snapshot.theta_min >= inf0 - lambda * ck.state.t / 4.0 - eps;
        }
        all_ok &= ok;
        println!("  {} ({}): inf theta0 {inf0}, running min {floor:.6}, bound {:.6}", case.name, out.label(), inf0 - 0.25 - eps);
    }
    report(5, all_ok, format!("{} runs with Lambda = 1 stay above inf theta0 - t/4", runs.len()));
    assert!(all_ok);
}

#[test]
fn criterion_6_solver_convergence() {
    let case = Case {
        name: "smooth window",
        law: quadratic(0.1),
        a: 1.0,
        d: 1.0,
        u0: Box::new(|x| 0.2 * (PI * x).sin()),
        u0t: zero(),
        theta0: Box::new(|x| 1.0 + 0.5 * (PI * x).cos()),
    };
    let mut sols = vec![];
    let mut t512 = 0.0;
    for n in [128, 256, 512] {
        let start = Instant::now();
        let out = advance(initial_state(&case, n), &params(&case, 1.0)).unwrap();
        if n == 512 {
            t512 = start.elapsed().as_secs_f64();
        }
        assert!(out.is_completed(), "{} on N = {n}", case.name);
        sols.push(out.trajectory().last().state.theta.values.clone());
    }
    let diff = |c: &[f64], f: &[f64]| (0..c.len()).map(|i| (c[i] - f[2 * i]).abs()).fold(0.0, f64::max);
    let d1 = diff(&sols[0], &sols[1]);
    let d2 = diff(&sols[1], &sols[2]);
    let order = (d1 / d2).log2();
    let ok = order >= 1.9 && t512 < 10.0;
    report(6, ok, format!("self-convergence order {order:.3} (differences {d1:.3e}, {d2:.3e}), N=512 in {t512:.2}s"));
    assert!(ok);
}

#[test]
fn criterion_7_equilibrium_fidelity() {
    let case = Case { name: "rest", law: quadratic(0.7), a: 1.0, d: 1.0, u0: zero(), u0t: zero(), theta0: Box::new(|_| 1.7) };
    let out = advance(initial_state(&case, 128), &params(&case, 1.0)).unwrap();
    let mut worst: f64 = 0.0;
    for ck in &out.trajectory().checkpoints {
        for &th in &ck.state.theta.values {
            worst = worst.max((th - 1.7).abs());
        }
        for &x in ck.state.u.values.iter().chain(&ck.state.v.values) {
            worst = worst.max(x.abs());
        }
    }
    let ok = out.is_completed() && worst <= 1e-12;
    report(7, ok, format!("max deviation from rest {worst:.3e} over horizon 1"));
    assert!(ok);
}

#[test]
fn criterion_8_determinism() {
    let (case, _) = &audit_cases()[4];
    let hash = || {
        let dir = tempfile::tempdir().unwrap();
        let out = advance(initial_state(case, 128), &params(case, 0.5)).unwrap();
        io::write_run(dir.path(), &out, case.a).unwrap();
        let bytes = std::fs::read(dir.path().join(io::TRACE_FILE)).unwrap();
        format!("{:x}", Sha256::digest(bytes))
    };
    let (h1, h2) = (hash(), hash());
    let ok = h1 == h2;
    report(8, ok, format!("trace.csv sha256 {h1} on both runs"));
    assert!(ok);
}
