//! The limit Neumann problem on a rectangle in the weighted weak form
//! `int a11 u_x1 phi_x1 + a22 u_x2 phi_x2 + m u phi = int m f_bar phi`,
//! plus manufactured-solution convergence studies.

use std::sync::Arc;

use serde::Serialize;

use crate::meshfem::assembly::point;
use crate::meshfem::{assemble, rectangle_mesh, solve_cg, FemField};
use crate::profile::{gauss_legendre, TriangleRule};
use crate::regime::EffectiveCoefficients;
use crate::{Error, Rect, Result};

pub type Field2 = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

/// Limit problem on `omega` with its coefficients and transformed source.
#[derive(Clone)]
pub struct HomogenizedProblem {
    pub omega: Rect,
    pub coefficients: EffectiveCoefficients,
    pub f_bar: Field2,
}

impl HomogenizedProblem {
    /// Applies the regime's source transform to an `x3`-independent `f`.
    pub fn new(omega: Rect, coefficients: EffectiveCoefficients, f: Field2) -> Result<Self> {
        omega.validate()?;
        let t = coefficients.rhs_transform;
        let f_bar: Field2 = Arc::new(move |x1, x2| t.apply(f(x1, x2)));
        Ok(HomogenizedProblem {
            omega,
            coefficients,
            f_bar,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HomSettings {
    pub n1: usize,
    pub n2: usize,
    pub tol: f64,
    pub max_iter: usize,
    pub rule: TriangleRule,
}

impl HomSettings {
    pub fn new(n1: usize, n2: usize) -> Self {
        HomSettings {
            n1,
            n2,
            tol: 1e-12,
            max_iter: 100_000,
            rule: TriangleRule::EdgeMidpoints,
        }
    }
}

/// P1 solution of the limit problem with solver diagnostics.
#[derive(Debug, Clone)]
pub struct HomSolution {
    pub field: FemField,
    /// `u^T A u = int a grad u . grad u + m u^2`.
    pub energy: f64,
    /// `int m f_bar u`, equal to `energy` up to the solver tolerance.
    pub load_work: f64,
    pub iterations: usize,
    pub residual: f64,
    pub n1: usize,
    pub n2: usize,
}

impl HomSolution {
    /// Value at `(x1, x2)`; `None` outside the rectangle.
    pub fn evaluate(&self, x1: f64, x2: f64) -> Option<f64> {
        self.field.evaluate([x1, x2])
    }
}

/// Solves the limit problem on a structured `n1 x n2` triangulation with
/// natural boundary conditions.
pub fn solve_homogenized(problem: &HomogenizedProblem, settings: &HomSettings) -> Result<HomSolution> {
    if settings.n1 < 2 || settings.n2 < 2 {
        return Err(Error::InvalidInput(format!(
            "homogenized mesh needs n1, n2 >= 2, got {} x {}",
            settings.n1, settings.n2
        )));
    }
    let mesh = Arc::new(rectangle_mesh(&problem.omega, settings.n1, settings.n2)?);
    let c = &problem.coefficients;
    let mut samples = Vec::new();
    for t in 0..mesh.n_triangles() {
        let v = mesh.vertices(t);
        for (lam, _) in settings.rule.points() {
            samples.push(point(v, lam));
        }
    }
    c.check_positive(&samples)?;
    let a11 = |p: [f64; 2]| c.a11.eval(p[0], p[1]);
    let a22 = |p: [f64; 2]| c.a22.eval(p[0], p[1]);
    let m = |p: [f64; 2]| c.m.eval(p[0], p[1]);
    let f = |p: [f64; 2]| (problem.f_bar)(p[0], p[1]);
    let sys = assemble(&mesh, &a11, &a22, &m, &f, settings.rule)?;
    let sol = solve_cg(&sys.matrix, &sys.rhs, settings.tol, settings.max_iter, None)?;
    let au = sys.matrix.mul(&sol.x);
    let energy = crate::meshfem::sparse::dot(&sol.x, &au);
    let load_work = crate::meshfem::sparse::dot(&sol.x, &sys.rhs);
    let values = sys.dofs.expand(&sol.x);
    Ok(HomSolution {
        field: FemField::new(mesh, values)?,
        energy,
        load_work,
        iterations: sol.iterations,
        residual: sol.residual,
        n1: settings.n1,
        n2: settings.n2,
    })
}

/// P1 solution of `-(a u')' + m u = m f` on `(lo, hi)` with natural
/// boundary conditions, for constant `a, m > 0`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Solution1D {
    pub nodes: Vec<f64>,
    pub values: Vec<f64>,
}

impl Solution1D {
    /// Piecewise-linear interpolation; clamps to the end values outside.
    pub fn evaluate(&self, x: f64) -> f64 {
        let n = self.nodes.len();
        if x <= self.nodes[0] {
            return self.values[0];
        }
        if x >= self.nodes[n - 1] {
            return self.values[n - 1];
        }
        let k = self.nodes.partition_point(|&t| t <= x).saturating_sub(1).min(n - 2);
        let s = (x - self.nodes[k]) / (self.nodes[k + 1] - self.nodes[k]);
        (1.0 - s) * self.values[k] + s * self.values[k + 1]
    }
}

pub fn solve_neumann_1d(a: f64, m: f64, f: &dyn Fn(f64) -> f64, lo: f64, hi: f64, n: usize) -> Result<Solution1D> {
    if n < 1 || !(hi > lo) || !(a > 0.0) || !(m > 0.0) {
        return Err(Error::InvalidInput(format!(
            "1D Neumann problem needs n >= 1, lo < hi, a > 0, m > 0 (got n = {n}, ({lo}, {hi}), a = {a}, m = {m})"
        )));
    }
    let h = (hi - lo) / n as f64;
    let nodes: Vec<f64> = (0..=n).map(|i| lo + h * i as f64).collect();
    let (gx, gw) = gauss_legendre(3);
    let mut diag = vec![0.0; n + 1];
    let mut off = vec![0.0; n];
    let mut rhs = vec![0.0; n + 1];
    for e in 0..n {
        diag[e] += a / h + m * h / 3.0;
        diag[e + 1] += a / h + m * h / 3.0;
        off[e] += -a / h + m * h / 6.0;
        for (x, w) in gx.iter().zip(&gw) {
            let s = 0.5 * (1.0 + x);
            let fx = f(nodes[e] + s * h);
            rhs[e] += 0.5 * h * w * m * fx * (1.0 - s);
            rhs[e + 1] += 0.5 * h * w * m * fx * s;
        }
    }
    // Thomas algorithm on the symmetric tridiagonal system
    let mut c = vec![0.0; n + 1];
    let mut d = vec![0.0; n + 1];
    c[0] = if n > 0 { off[0] / diag[0] } else { 0.0 };
    d[0] = rhs[0] / diag[0];
    for i in 1..=n {
        let denom = diag[i] - off[i - 1] * c[i - 1];
        if i < n {
            c[i] = off[i] / denom;
        }
        d[i] = (rhs[i] - off[i - 1] * d[i - 1]) / denom;
    }
    let mut values = vec![0.0; n + 1];
    values[n] = d[n];
    for i in (0..n).rev() {
        values[i] = d[i] - c[i] * values[i + 1];
    }
    Ok(Solution1D { nodes, values })
}

/// Rate fitted to a convergence table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Rate {
    /// All errors at rounding level; the discrete solution is exact.
    Exact,
    Fitted(f64),
}

impl Rate {
    /// `true` if exact or at least `min`.
    pub fn at_least(&self, min: f64) -> bool {
        match self {
            Rate::Exact => true,
            Rate::Fitted(r) => *r >= min,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceRow {
    pub n: usize,
    pub h: f64,
    pub l2_error: f64,
    pub h1_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceTable {
    pub rows: Vec<ConvergenceRow>,
    /// `None` with fewer than two levels.
    pub l2_rate: Option<Rate>,
    pub h1_rate: Option<Rate>,
}

impl ConvergenceTable {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("n,h,l2_error,h1_error\n");
        for r in &self.rows {
            s.push_str(&format!("{},{},{},{}\n", r.n, r.h, r.l2_error, r.h1_error));
        }
        s
    }
}

/// Least-squares slope of `log e` against `log h`.
pub fn fitted_rate(h: &[f64], e: &[f64]) -> Option<Rate> {
    if h.len() < 2 {
        return None;
    }
    if e.iter().all(|&v| v < 1e-12) {
        return Some(Rate::Exact);
    }
    let xs: Vec<f64> = h.iter().map(|v| v.ln()).collect();
    let ys: Vec<f64> = e.iter().map(|v| v.max(1e-300).ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    Some(Rate::Fitted(sxy / sxx))
}

/// Solves on `n0 * 2^k` meshes, `k < levels`, and measures errors against
/// the exact solution.
pub fn convergence_study(
    problem: &HomogenizedProblem,
    exact: &dyn Fn([f64; 2]) -> f64,
    gradient_exact: &dyn Fn([f64; 2]) -> [f64; 2],
    n0: usize,
    levels: usize,
) -> Result<ConvergenceTable> {
    let mut rows = Vec::with_capacity(levels);
    for k in 0..levels {
        let n = n0 << k;
        let sol = solve_homogenized(problem, &HomSettings::new(n, n))?;
        let (l2, h1) = sol.field.errors(exact, gradient_exact, TriangleRule::Degree5);
        rows.push(ConvergenceRow {
            n,
            h: problem.omega.width().max(problem.omega.height()) / n as f64,
            l2_error: l2,
            h1_error: h1,
        });
    }
    let h: Vec<f64> = rows.iter().map(|r| r.h).collect();
    let l2: Vec<f64> = rows.iter().map(|r| r.l2_error).collect();
    let h1: Vec<f64> = rows.iter().map(|r| r.h1_error).collect();
    Ok(ConvergenceTable {
        l2_rate: fitted_rate(&h, &l2),
        h1_rate: fitted_rate(&h, &h1),
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::regime::{CoefficientField, Origin, Provenance, RegimeClass, RhsTransform};
    use std::f64::consts::PI;

    fn coeffs(a11: CoefficientField, a22: CoefficientField, m: CoefficientField) -> EffectiveCoefficients {
        EffectiveCoefficients {
            a11,
            a22,
            m,
            rhs_transform: RhsTransform::CellAverage,
            provenance: Provenance {
                regime: RegimeClass::WeakWeak,
                a11: Origin::ClosedForm,
                a22: Origin::ClosedForm,
                m: Origin::ClosedForm,
                notes: vec![],
            },
            resonant: None,
            q2_table: None,
        }
    }

    fn unit() -> EffectiveCoefficients {
        use CoefficientField::Constant;
        coeffs(Constant(1.0), Constant(1.0), Constant(1.0))
    }

    #[test]
    fn constants_are_reproduced() {
        let p = HomogenizedProblem::new(Rect::unit(), unit(), Arc::new(|_, _| 1.0)).unwrap();
        let s = solve_homogenized(&p, &HomSettings::new(6, 5)).unwrap();
        assert!(s.field.values.iter().all(|v| (v - 1.0).abs() < 1e-12));
    }

    #[test]
    fn manufactured_cos_cos_converges_at_second_order() {
        let f = Arc::new(|x1: f64, x2: f64| (2.0 * PI * PI + 1.0) * (PI * x1).cos() * (PI * x2).cos());
        let p = HomogenizedProblem::new(Rect::unit(), unit(), f).unwrap();
        let exact = |p: [f64; 2]| (PI * p[0]).cos() * (PI * p[1]).cos();
        let grad = |p: [f64; 2]| {
            [
                -PI * (PI * p[0]).sin() * (PI * p[1]).cos(),
                -PI * (PI * p[0]).cos() * (PI * p[1]).sin(),
            ]
        };
        let t = convergence_study(&p, &exact, &grad, 8, 3).unwrap();
        assert!(t.l2_rate.unwrap().at_least(1.9), "{t:?}");
        assert!(t.h1_rate.unwrap().at_least(0.95), "{t:?}");
    }

    #[test]
    fn x1_weight_cancels_for_x1_independent_solution() {
        let q2 = 0.7;
        let pw = |x1: f64| 1.5 + 0.5 * (2.0 * PI * x1).sin();
        let c = coeffs(
            CoefficientField::along_x1("p", pw),
            CoefficientField::along_x1("p q2", move |x1| pw(x1) * q2),
            CoefficientField::along_x1("p", pw),
        );
        let f = Arc::new(move |_x1: f64, x2: f64| (q2 * PI * PI + 1.0) * (PI * x2).cos());
        let p = HomogenizedProblem::new(Rect::unit(), c, f).unwrap();
        let s = solve_homogenized(&p, &HomSettings::new(32, 32)).unwrap();
        let (l2, _) = s.field.errors(&|p| (PI * p[1]).cos(), &|p| [0.0, -PI * (PI * p[1]).sin()], TriangleRule::Degree5);
        assert!(l2 < 2e-3, "{l2}");
    }

    #[test]
    fn weighted_mean_bound_and_energy_identity() {
        let f = Arc::new(|x1: f64, x2: f64| 1.0 + x1 * x2);
        let p = HomogenizedProblem::new(Rect::unit(), unit(), f.clone()).unwrap();
        let s = solve_homogenized(&p, &HomSettings::new(10, 10)).unwrap();
        let mean_u = s.field.integral(&|_| 1.0, TriangleRule::EdgeMidpoints);
        assert!(mean_u <= 1.25 + 1e-10);
        assert!((s.energy - s.load_work).abs() < 1e-10 * s.energy);
    }

    #[test]
    fn neumann_1d_matches_cosine() {
        let q = 0.6;
        // -(q u')' + 2u = 2f with u = cos(pi x)
        let f = |x: f64| (q * PI * PI / 2.0 + 1.0) * (PI * x).cos();
        let s = solve_neumann_1d(q, 2.0, &f, 0.0, 1.0, 200).unwrap();
        for k in 0..=10 {
            let x = k as f64 / 10.0;
            assert!((s.evaluate(x) - (PI * x).cos()).abs() < 1e-4);
        }
    }

    #[test]
    fn single_level_has_no_rate() {
        let p = HomogenizedProblem::new(Rect::unit(), unit(), Arc::new(|_, _| 2.0)).unwrap();
        let t = convergence_study(&p, &|_| 2.0, &|_| [0.0, 0.0], 4, 1).unwrap();
        assert!(t.l2_rate.is_none() && t.h1_rate.is_none());
        let t = convergence_study(&p, &|_| 2.0, &|_| [0.0, 0.0], 4, 2).unwrap();
        assert_eq!(t.l2_rate, Some(Rate::Exact));
    }
}
