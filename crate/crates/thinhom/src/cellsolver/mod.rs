//! Periodic cell (corrector) problems and the resonant coefficients they
//! produce.
//!
//! Two problem families are solved:
//!
//! * the slice problem on `Y*(y1) = {0 < y2 < L2, 0 < y3 < g(y1, y2)}`,
//!   periodic in `y2`, forced by `d/dy2`;
//! * the constrained problem for `y2`-independent correctors, reduced to a
//!   weighted problem in `(y1, y3)` with the slice measure
//!   `w(y1, y3) = |{y2 : g(y1, y2) > y3}|` as weight, periodic in `y1`.

use std::cell::Cell;
use std::fmt::Write as _;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::meshfem::{
    assemble_form, build_cell_mesh, solve_cg, solve_direct, CgSolution, FemField, SparseMatrixCSR, TriMesh2D, WeakForm,
};
use crate::meshfem::assembly::point;
use crate::profile::{bar_g, mean_g, ProfileFunction, ProfileKind, Quadrature1D, Quadrature2D, TriangleRule};
use crate::regime::RegimeClass;
use crate::{Error, Result};

mod mapped;

use mapped::{solve_mapped_slice, MappedSlice};

/// Mesh and solver settings shared by all cell problems.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CellResolution {
    pub n_h: usize,
    pub n_v: usize,
    pub tol: f64,
    pub max_iter: usize,
    /// Initial number of Gauss nodes in `y1` for the slice family.
    pub n_y1: usize,
    pub n_y1_cap: usize,
    /// Stop doubling `n_y1` once the coefficient moves less than this.
    pub n_y1_tol: f64,
    pub rule: TriangleRule,
    pub solver: LinearSolver,
}

/// Linear solver for the cell systems.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LinearSolver {
    /// Sparse Cholesky; `tol` bounds the relative residual.
    #[default]
    Direct,
    /// Jacobi-preconditioned conjugate gradients to `tol` within `max_iter`.
    Cg,
}

impl Default for CellResolution {
    fn default() -> Self {
        CellResolution {
            n_h: 64,
            n_v: 64,
            tol: 1e-12,
            max_iter: 20_000,
            n_y1: 8,
            n_y1_cap: 64,
            n_y1_tol: 1e-6,
            rule: TriangleRule::EdgeMidpoints,
            solver: LinearSolver::Direct,
        }
    }
}

impl CellResolution {
    pub fn with_mesh(n_h: usize, n_v: usize) -> Self {
        CellResolution {
            n_h,
            n_v,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_h < 4 || self.n_v < 4 {
            return Err(Error::InvalidInput(format!(
                "cell resolution must be at least 4x4, got {}x{}",
                self.n_h, self.n_v
            )));
        }
        if self.n_y1 < 1 || self.n_y1_cap < self.n_y1 {
            return Err(Error::InvalidInput(format!(
                "need 1 <= n_y1 <= n_y1_cap, got {} and {}",
                self.n_y1, self.n_y1_cap
            )));
        }
        if !(self.tol > 0.0) || self.max_iter == 0 {
            return Err(Error::InvalidInput("cell solver tolerance and iteration cap must be positive".into()));
        }
        Ok(())
    }

    fn solve(&self, a: &SparseMatrixCSR, b: &[f64], weights: &[f64]) -> Result<CgSolution> {
        match self.solver {
            LinearSolver::Cg => solve_cg(a, b, self.tol, self.max_iter, Some(weights)),
            LinearSolver::Direct => {
                let sol = solve_direct(a, b, Some(weights))?;
                // a factorization cannot beat rounding on large systems
                if sol.residual > self.tol.max(1e-10) {
                    return Err(Error::NonConvergence {
                        iterations: 0,
                        residual: sol.residual,
                    });
                }
                Ok(sol)
            }
        }
    }

    /// Same settings on a mesh refined by two in each direction.
    pub fn refined(&self) -> Self {
        CellResolution {
            n_h: 2 * self.n_h,
            n_v: 2 * self.n_v,
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CellKind {
    /// Slice `Y*(y1)` in `(y2, y3)`, periodic in `y2`.
    Resonant2D,
    /// Reduced `(y1, y3)` problem for `y2`-independent correctors.
    ConstrainedY2,
}

/// A cell problem ready to be solved.
#[derive(Debug, Clone)]
pub struct CellProblemSpec {
    pub kind: CellKind,
    pub profile: ProfileFunction,
    pub resolution: CellResolution,
}

impl CellProblemSpec {
    pub fn new(kind: CellKind, profile: ProfileFunction, resolution: CellResolution) -> Result<Self> {
        resolution.validate()?;
        Ok(CellProblemSpec {
            kind,
            profile,
            resolution,
        })
    }

    /// The homogenized coefficient this problem produces: `q2` from the
    /// slice family or `q1` from the constrained problem.
    pub fn coefficient(&self) -> Result<f64> {
        match self.kind {
            CellKind::Resonant2D => Ok(q2_resonant(&self.profile, &self.resolution)?.value),
            CellKind::ConstrainedY2 => Ok(solve_cell_constrained(&self.profile, &self.resolution)?.1),
        }
    }
}

/// Solution `X` of a cell problem with the integrals that enter the
/// coefficients. `rho` below is the problem weight (1 on slices, `w` on the
/// constrained domain).
#[derive(Debug, Clone)]
pub struct CorrectorField {
    pub kind: CellKind,
    pub field: FemField,
    /// Elementwise gradient in the mesh coordinates.
    pub gradients: Vec<[f64; 2]>,
    /// `y1` (or `x1`) of the slice; `None` for the constrained problem.
    pub parameter: Option<f64>,
    /// `int_T rho` per triangle.
    pub element_weights: Vec<f64>,
    /// `int rho phi_i` per node, the zero-mean weights.
    pub node_weights: Vec<f64>,
    pub iterations: usize,
    pub residual: f64,
    totals: Totals,
    mapped: Option<Arc<MappedSlice>>,
}

#[derive(Debug, Clone, Copy)]
struct Totals {
    measure: f64,
    forcing: f64,
    energy: f64,
}

impl CorrectorField {
    fn new(
        kind: CellKind,
        field: FemField,
        parameter: Option<f64>,
        element_weights: Vec<f64>,
        node_weights: Vec<f64>,
        iterations: usize,
        residual: f64,
    ) -> Self {
        let gradients = field.gradients();
        let mut totals = Totals {
            measure: element_weights.iter().sum(),
            forcing: 0.0,
            energy: 0.0,
        };
        for (g, w) in gradients.iter().zip(&element_weights) {
            totals.forcing += w * g[0];
            totals.energy += w * (g[0] * g[0] + g[1] * g[1]);
        }
        CorrectorField {
            kind,
            field,
            gradients,
            parameter,
            element_weights,
            node_weights,
            iterations,
            residual,
            totals,
            mapped: None,
        }
    }

    /// Whether the field comes from the quadratic mapped slice solver.
    pub fn is_quadratic(&self) -> bool {
        self.mapped.is_some()
    }

    pub fn mesh(&self) -> &TriMesh2D {
        &self.field.mesh
    }

    /// `int rho` over the cell.
    pub fn measure(&self) -> f64 {
        self.totals.measure
    }

    /// `int rho dX/du` along the horizontal (forcing) direction.
    pub fn forcing_integral(&self) -> f64 {
        self.totals.forcing
    }

    /// `int rho |grad X|^2`.
    pub fn energy(&self) -> f64 {
        self.totals.energy
    }

    /// `(1/|cell|) int rho X`.
    pub fn mean(&self) -> f64 {
        let total: f64 = self.node_weights.iter().sum();
        let s: f64 = self.node_weights.iter().zip(&self.field.values).map(|(w, x)| w * x).sum();
        s / total
    }

    /// `|X|_H1` with the problem weight.
    pub fn h1_norm(&self) -> f64 {
        let l2: f64 = match &self.mapped {
            Some(m) => m.totals().l2,
            None => self.node_weights.iter().zip(&self.field.values).map(|(w, x)| w * x * x).sum(),
        };
        (l2.max(0.0) + self.energy()).sqrt()
    }

    /// `1 - (1/measure) int rho dX/du`, the coefficient for a given `|Y*|`.
    pub fn coefficient(&self, cell_measure: f64) -> f64 {
        1.0 - self.forcing_integral() / cell_measure
    }

    /// The same field shifted by a constant.
    pub fn shifted(&self, c: f64) -> CorrectorField {
        let mut out = self.clone();
        for v in &mut out.field.values {
            *v += c;
        }
        if let Some(m) = &self.mapped {
            let mut m = (**m).clone();
            for v in &mut m.values {
                *v += c;
            }
            out.mapped = Some(Arc::new(m));
        }
        out
    }

    /// Zero weighted mean and `int rho |grad X|^2 = int rho dX/du`.
    pub fn check_invariants(&self) -> Result<()> {
        let mean = self.mean();
        if mean.abs() > 1e-10 {
            return Err(Error::CheckFailed(format!("corrector mean {mean:e} is not zero")));
        }
        let e = self.energy();
        let f = self.forcing_integral();
        let scale = e.abs().max(f.abs());
        if (e - f).abs() > 1e-8 * scale + 1e-14 * self.measure() {
            return Err(Error::CheckFailed(format!(
                "energy identity violated: energy {e:e}, forcing {f:e}"
            )));
        }
        Ok(())
    }

    /// Corrector gradient at `p` in mesh coordinates.
    pub fn gradient_at(&self, p: [f64; 2]) -> Result<[f64; 2]> {
        let found = match &self.mapped {
            Some(m) => m.gradient_at(p),
            None => self.field.gradient_at(p),
        };
        found
            .ok_or_else(|| Error::Domain(format!("point ({}, {}) is outside the cell mesh", p[0], p[1])))
    }
}

struct SliceForm;

impl WeakForm for SliceForm {
    fn a_uu(&self, _p: [f64; 2]) -> f64 {
        1.0
    }
    fn flux(&self, _p: [f64; 2]) -> [f64; 2] {
        [1.0, 0.0]
    }
}

/// The slice measure `w(y1, y3) = |{y2 in (0, L2) : g(y1, y2) > y3}|`.
pub struct SliceWeight<'a> {
    g: &'a ProfileFunction,
    samples: usize,
    tol: f64,
}

impl<'a> SliceWeight<'a> {
    pub fn new(g: &'a ProfileFunction) -> Self {
        SliceWeight {
            g,
            samples: 128,
            tol: 1e-10,
        }
    }

    pub fn eval(&self, y1: f64, y3: f64) -> f64 {
        let l2 = self.g.periods()[1];
        if let Some(pieces) = self.g.slice_pieces_y2(y1) {
            return pieces
                .iter()
                .filter(|p| p.2 > y3)
                .map(|p| p.1 - p.0)
                .sum();
        }
        let f = |t: f64| self.g.eval(y1, t) - y3;
        let n = self.samples;
        let h = l2 / n as f64;
        let mut total = 0.0;
        let mut a = 0.0;
        let mut fa = f(a);
        for j in 1..=n {
            let b = if j == n { l2 } else { j as f64 * h };
            let fb = f(b);
            match (fa > 0.0, fb > 0.0) {
                (true, true) => total += b - a,
                (false, false) => {}
                (left_in, _) => {
                    let r = self.root(&f, a, b, fa);
                    total += if left_in { r - a } else { b - r };
                }
            }
            a = b;
            fa = fb;
        }
        total.clamp(0.0, l2)
    }

    fn root(&self, f: &dyn Fn(f64) -> f64, mut a: f64, mut b: f64, fa: f64) -> f64 {
        let sign_a = fa > 0.0;
        while b - a > self.tol {
            let m = 0.5 * (a + b);
            if (f(m) > 0.0) == sign_a {
                a = m;
            } else {
                b = m;
            }
        }
        0.5 * (a + b)
    }
}

/// Weighted form of the constrained problem; caches the last weight since
/// every coefficient of the form is `w`.
struct ConstrainedForm<'a> {
    weight: SliceWeight<'a>,
    last: Cell<([f64; 2], f64)>,
}

impl ConstrainedForm<'_> {
    fn w(&self, p: [f64; 2]) -> f64 {
        let (q, v) = self.last.get();
        if q == p {
            return v;
        }
        let v = self.weight.eval(p[0], p[1]);
        self.last.set((p, v));
        v
    }
}

impl WeakForm for ConstrainedForm<'_> {
    fn a_uu(&self, p: [f64; 2]) -> f64 {
        self.w(p)
    }
    fn flux(&self, p: [f64; 2]) -> [f64; 2] {
        [self.w(p), 0.0]
    }
    fn mean_weight(&self, p: [f64; 2]) -> f64 {
        self.w(p)
    }
}

fn element_integrals(mesh: &TriMesh2D, rho: &dyn Fn([f64; 2]) -> f64, rule: TriangleRule) -> Vec<f64> {
    let points = rule.points();
    (0..mesh.n_triangles())
        .map(|t| {
            let v = mesh.vertices(t);
            let area = mesh.area(t);
            points.iter().map(|(lam, w)| w * area * rho(point(v, *lam))).sum()
        })
        .collect()
}

fn node_weights_from(sys_weights: &[f64], dofs: &crate::meshfem::DofMap, n_nodes: usize) -> Vec<f64> {
    // spread each unknown's weight over the nodes sharing it so sums match
    let mut count = vec![0usize; sys_weights.len()];
    for &d in &dofs.node_to_dof {
        count[d] += 1;
    }
    (0..n_nodes)
        .map(|i| {
            let d = dofs.node_to_dof[i];
            sys_weights[d] / count[d] as f64
        })
        .collect()
}

/// Solves the slice problem on `Y*(y1)`:
/// `int grad X . grad psi = int d psi / dy2`, `X` periodic in `y2`, zero mean.
///
/// Smooth profiles use quadratic elements on the mapped slice with the
/// same node grid as the linear mesh; step profiles use linear elements on
/// a mesh that follows the jumps.
pub fn solve_cell_2d(g: &ProfileFunction, y1: f64, res: &CellResolution) -> Result<CorrectorField> {
    res.validate()?;
    if g.kind() == ProfileKind::Smooth {
        return solve_cell_2d_quadratic(g, y1, res);
    }
    let mesh = Arc::new(build_cell_mesh(g, Some(y1), res.n_h, res.n_v, true)?);
    let sys = assemble_form(&mesh, &SliceForm, res.rule)?;
    let sol = res.solve(&sys.matrix, &sys.rhs, &sys.mean_weights)?;
    let values = sys.dofs.expand(&sol.x);
    let element_weights = (0..mesh.n_triangles()).map(|t| mesh.area(t)).collect();
    let node_weights = node_weights_from(&sys.mean_weights, &sys.dofs, mesh.n_nodes());
    let field = FemField::new(mesh, values)?;
    let x = CorrectorField::new(
        CellKind::Resonant2D,
        field,
        Some(y1),
        element_weights,
        node_weights,
        sol.iterations,
        sol.residual,
    );
    x.check_invariants()?;
    Ok(x)
}

fn solve_cell_2d_quadratic(g: &ProfileFunction, y1: f64, res: &CellResolution) -> Result<CorrectorField> {
    let sol = solve_mapped_slice(g, y1, res.n_h, res.n_v, res)?;
    let field = FemField::new(sol.mesh, sol.slice.values.clone())?;
    let gradients = field.gradients();
    let element_weights = (0..field.mesh.n_triangles()).map(|t| field.mesh.area(t)).collect();
    let x = CorrectorField {
        kind: CellKind::Resonant2D,
        field,
        gradients,
        parameter: Some(y1),
        element_weights,
        node_weights: sol.node_weights,
        iterations: sol.cg.iterations,
        residual: sol.cg.residual,
        totals: Totals {
            measure: sol.totals.measure,
            forcing: sol.totals.forcing,
            energy: sol.totals.energy,
        },
        mapped: Some(sol.slice),
    };
    x.check_invariants()?;
    Ok(x)
}

/// Per-slice coefficient `q2(x1) = 1 - (1/|Y*(x1)|) int dX/dy2` with
/// `|Y*(x1)| = int_0^L2 g(x1, y2) dy2`.
pub fn q2_per_x1(g: &ProfileFunction, x1: f64, res: &CellResolution) -> Result<f64> {
    let x = solve_cell_2d(g, x1, res)?;
    let measure = bar_g(g, x1, &Quadrature1D::default())?;
    Ok(x.coefficient(measure))
}

/// One `y1` node of the slice family.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SliceRecord {
    pub y1: f64,
    pub weight: f64,
    /// `int_0^L2 g(y1, y2) dy2`.
    pub slice_measure: f64,
    /// `int_{Y*(y1)} dX/dy2`.
    pub forcing: f64,
    /// Slice coefficient `1 - forcing / slice_measure`.
    pub q_slice: f64,
    pub iterations: usize,
}

/// `q2` of the resonant-weak regime with its per-slice provenance.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResonantCoefficient {
    pub value: f64,
    pub n_y1: usize,
    /// Change from the previous `n_y1` level (`None` at the first level).
    pub last_change: Option<f64>,
    pub slices: Vec<SliceRecord>,
}

impl ResonantCoefficient {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("y1,weight,slice_measure,forcing,q_slice,iterations\n");
        for r in &self.slices {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{}",
                r.y1, r.weight, r.slice_measure, r.forcing, r.q_slice, r.iterations
            );
        }
        s
    }
}

fn slice_family(g: &ProfileFunction, n_y1: usize, res: &CellResolution) -> Result<(f64, Vec<SliceRecord>)> {
    let l1 = g.periods()[0];
    let nodes = Quadrature1D::new(n_y1, 1)?.rule(0.0, l1, &g.breaks_y1());
    let quad = Quadrature1D::default();
    let records = nodes
        .par_iter()
        .map(|&(y1, weight)| {
            let x = solve_cell_2d(g, y1, res)?;
            let slice_measure = bar_g(g, y1, &quad)?;
            let forcing = x.forcing_integral();
            Ok(SliceRecord {
                y1,
                weight,
                slice_measure,
                forcing,
                q_slice: 1.0 - forcing / slice_measure,
                iterations: x.iterations,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let [l1, l2] = g.periods();
    let measure = l1 * l2 * mean_g(g, &Quadrature2D::default())?;
    let forcing: f64 = records.iter().map(|r| r.weight * r.forcing).sum();
    Ok((1.0 - forcing / measure, records))
}

/// `q2 = (1/|Y*|) int_{Y*} (1 - dX/dy2) dy` with `X` solved slice by slice
/// at Gauss nodes in `y1`; the node count doubles until the value settles.
pub fn q2_resonant(g: &ProfileFunction, res: &CellResolution) -> Result<ResonantCoefficient> {
    res.validate()?;
    let mut n = res.n_y1;
    let (mut value, mut slices) = slice_family(g, n, res)?;
    let mut last_change = None;
    while 2 * n <= res.n_y1_cap {
        let (next, next_slices) = slice_family(g, 2 * n, res)?;
        let change = (next - value).abs();
        n *= 2;
        value = next;
        slices = next_slices;
        last_change = Some(change);
        if change < res.n_y1_tol {
            break;
        }
    }
    Ok(ResonantCoefficient {
        value,
        n_y1: n,
        last_change,
        slices,
    })
}

/// Solves the constrained problem reduced to `(y1, y3)`:
/// `int w grad X . grad psi = int w d psi / dy1`, periodic in `y1`, zero
/// `w`-weighted mean, and returns `X` with
/// `q1 = 1 - (1/|Y*|) int w dX/dy1`.
pub fn solve_cell_constrained(g: &ProfileFunction, res: &CellResolution) -> Result<(CorrectorField, f64)> {
    res.validate()?;
    let [l1, l2] = g.periods();
    let full = build_cell_mesh(g, None, res.n_h, res.n_v, true)?;
    let weight = SliceWeight::new(g);
    let cutoff = 1e-12 * l2;
    let keep: Vec<bool> = (0..full.n_triangles())
        .map(|t| {
            let v = full.vertices(t);
            weight.eval(
                (v[0][0] + v[1][0] + v[2][0]) / 3.0,
                (v[0][1] + v[1][1] + v[2][1]) / 3.0,
            ) >= cutoff
        })
        .collect();
    if !keep.iter().any(|&k| k) {
        return Err(Error::Mesh("constrained cell has no element with positive weight".into()));
    }
    let mesh = if keep.iter().all(|&k| k) {
        full
    } else {
        full.retain_triangles(&keep)?
    };
    let mesh = Arc::new(mesh);
    let form = ConstrainedForm {
        weight: SliceWeight::new(g),
        last: Cell::new(([f64::NAN; 2], 0.0)),
    };
    let rule = TriangleRule::Degree5;
    let sys = assemble_form(&mesh, &form, rule)?;
    let sol = res.solve(&sys.matrix, &sys.rhs, &sys.mean_weights)?;
    let values = sys.dofs.expand(&sol.x);
    let element_weights = element_integrals(&mesh, &|p| weight.eval(p[0], p[1]), rule);
    let node_weights = node_weights_from(&sys.mean_weights, &sys.dofs, mesh.n_nodes());
    let field = FemField::new(mesh, values)?;
    let x = CorrectorField::new(
        CellKind::ConstrainedY2,
        field,
        None,
        element_weights,
        node_weights,
        sol.iterations,
        sol.residual,
    );
    x.check_invariants()?;
    let measure = l1 * l2 * mean_g(g, &Quadrature2D::default())?;
    let q1 = x.coefficient(measure);
    Ok((x, q1))
}

/// Gradient of the first-order corrector in cell variables `(y1, y2, y3)`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct CorrectorGradient {
    pub d_y1: f64,
    pub d_y2: f64,
    pub d_y3: f64,
}

/// `1 / (<1/h> h(t)) - 1` for a profile functional `h`.
fn closed_form_factor(value: f64, mean_inverse: f64) -> f64 {
    1.0 / (mean_inverse * value) - 1.0
}

fn bar_g_mean_inverse(g: &ProfileFunction) -> Result<f64> {
    let l1 = g.periods()[0];
    let quad = Quadrature2D::default();
    let mut acc = 0.0;
    for (t, w) in quad.axis1.rule(0.0, l1, &g.breaks_y1()) {
        acc += w * g.periods()[1] / bar_g(g, t, &quad.axis2)?;
    }
    Ok(acc / l1)
}

fn slice_mean_inverse(g: &ProfileFunction, y1: f64) -> Result<f64> {
    let l2 = g.periods()[1];
    let mut acc = 0.0;
    for (t, w) in Quadrature1D::default().rule(0.0, l2, &g.breaks_y2()) {
        acc += w / g.eval_checked(y1, t)?;
    }
    Ok(acc / l2)
}

/// Closed-form corrector factors of the weak directions with the period
/// means computed once.
pub struct WeakCorrector<'a> {
    g: &'a ProfileFunction,
    bar_mean_inverse: f64,
}

/// The weak factors on one `y1` slice.
pub struct WeakSlice<'a> {
    g: &'a ProfileFunction,
    y1: f64,
    /// `d_y1` of the corrector for a unit `du/dx1`.
    d_y1_unit: f64,
    slice_mean_inverse: f64,
}

impl<'a> WeakCorrector<'a> {
    pub fn new(g: &'a ProfileFunction) -> Result<Self> {
        Ok(WeakCorrector {
            g,
            bar_mean_inverse: bar_g_mean_inverse(g)?,
        })
    }

    pub fn slice(&self, y1: f64) -> Result<WeakSlice<'a>> {
        let hat = bar_g(self.g, y1, &Quadrature1D::default())? / self.g.periods()[1];
        Ok(WeakSlice {
            g: self.g,
            y1,
            d_y1_unit: closed_form_factor(hat, self.bar_mean_inverse),
            slice_mean_inverse: slice_mean_inverse(self.g, y1)?,
        })
    }
}

impl WeakSlice<'_> {
    pub fn d_y1(&self, du_dx1: f64) -> f64 {
        self.d_y1_unit * du_dx1
    }

    pub fn d_y2(&self, y2: f64, du_dx2: f64) -> Result<f64> {
        let v = self.g.eval_checked(self.y1, y2)?;
        Ok(closed_form_factor(v, self.slice_mean_inverse) * du_dx2)
    }
}

/// First-order corrector gradient at the cell point `y = (y1, y2, y3)` for
/// a limit gradient `grad_u = (du/dx1, du/dx2)`.
///
/// For `alpha = 0` regimes `y[0]` is the macroscopic `x1`. Cell-based
/// regimes need the matching `cell`: the slice at `y1` for
/// `A0_ResonantBeta` and `ResonantWeak`, the constrained solution for
/// `ResonantStrong`. Closed-form factors use the slice average of `g`.
pub fn corrector_gradient(
    regime: RegimeClass,
    g: &ProfileFunction,
    grad_u: [f64; 2],
    y: [f64; 3],
    cell: Option<&CorrectorField>,
) -> Result<CorrectorGradient> {
    let weak_y1 = || -> Result<f64> { Ok(WeakCorrector::new(g)?.slice(y[0])?.d_y1(grad_u[0])) };
    let weak_y2 = || -> Result<f64> {
        let v = g.eval_checked(y[0], y[1])?;
        Ok(closed_form_factor(v, slice_mean_inverse(g, y[0])?) * grad_u[1])
    };
    let need = |kind: CellKind| -> Result<&CorrectorField> {
        let c = cell.ok_or_else(|| {
            Error::UnsupportedCorrector(format!("regime {regime} needs a solved cell problem"))
        })?;
        if c.kind != kind {
            return Err(Error::UnsupportedCorrector(format!(
                "regime {regime} needs a {kind:?} cell, got {:?}",
                c.kind
            )));
        }
        if let (CellKind::Resonant2D, Some(p)) = (kind, c.parameter) {
            if (p - y[0]).abs() > 1e-12 * (1.0 + p.abs()) {
                return Err(Error::InvalidInput(format!(
                    "cell slice belongs to y1 = {p}, requested y1 = {}",
                    y[0]
                )));
            }
        }
        Ok(c)
    };
    match regime {
        RegimeClass::A0WeakBeta => Ok(CorrectorGradient {
            d_y2: weak_y2()?,
            ..Default::default()
        }),
        RegimeClass::WeakWeak => Ok(CorrectorGradient {
            d_y1: weak_y1()?,
            d_y2: weak_y2()?,
            d_y3: 0.0,
        }),
        RegimeClass::WeakStrong => Ok(CorrectorGradient {
            d_y1: weak_y1()?,
            ..Default::default()
        }),
        RegimeClass::A0ResonantBeta => {
            let x = need(CellKind::Resonant2D)?;
            let gx = x.gradient_at([y[1], y[2]])?;
            Ok(CorrectorGradient {
                d_y1: 0.0,
                d_y2: -grad_u[1] * gx[0],
                d_y3: -grad_u[1] * gx[1],
            })
        }
        RegimeClass::ResonantWeak => {
            let x = need(CellKind::Resonant2D)?;
            let gx = x.gradient_at([y[1], y[2]])?;
            Ok(CorrectorGradient {
                d_y1: weak_y1()?,
                d_y2: -grad_u[1] * gx[0],
                d_y3: -grad_u[1] * gx[1],
            })
        }
        RegimeClass::ResonantStrong => {
            let x = need(CellKind::ConstrainedY2)?;
            let gx = x.gradient_at([y[0], y[2]])?;
            Ok(CorrectorGradient {
                d_y1: -grad_u[0] * gx[0],
                d_y2: 0.0,
                d_y3: -grad_u[0] * gx[1],
            })
        }
        RegimeClass::A0StrongBeta | RegimeClass::StrongStrong => Err(Error::UnsupportedCorrector(format!(
            "regime {regime} has no first-order corrector"
        ))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profile::{harmonic_factor, min_profile};

    fn coarse() -> CellResolution {
        CellResolution::with_mesh(16, 16)
    }

    #[test]
    fn weak_slice_matches_pointwise_gradient() {
        let g = ProfileFunction::separable(2.0, 0.5, 2.0, 0.7).unwrap();
        let slice = WeakCorrector::new(&g).unwrap().slice(0.3).unwrap();
        let c = corrector_gradient(RegimeClass::WeakWeak, &g, [0.4, -1.1], [0.3, 0.65, 0.2], None).unwrap();
        assert!((slice.d_y1(0.4) - c.d_y1).abs() < 1e-15);
        assert!((slice.d_y2(0.65, -1.1).unwrap() - c.d_y2).abs() < 1e-15);
    }

    #[test]
    fn flat_slice_has_zero_corrector() {
        let g = ProfileFunction::constant(1.5).unwrap();
        let x = solve_cell_2d(&g, 0.3, &coarse()).unwrap();
        assert!(x.h1_norm() < 1e-9, "{}", x.h1_norm());
        assert!((q2_per_x1(&g, 0.3, &coarse()).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn sin_slice_lies_in_the_bracket() {
        let g = ProfileFunction::sin_y2(2.0, 1.0).unwrap();
        let q = q2_per_x1(&g, 0.0, &CellResolution::with_mesh(32, 32)).unwrap();
        assert!(q > 0.5 && q < 3f64.sqrt() / 2.0, "{q}");
    }

    #[test]
    fn even_profile_gives_odd_corrector() {
        let g = ProfileFunction::cos_cos(2.0, 1.0).unwrap();
        let x = solve_cell_2d(&g, 0.1, &coarse()).unwrap();
        let mesh = x.mesh();
        for (i, p) in mesh.nodes.iter().enumerate() {
            let mirror = mesh
                .nodes
                .iter()
                .position(|q| (q[0] - (1.0 - p[0])).abs() < 1e-12 && (q[1] - p[1]).abs() < 1e-12);
            if let Some(j) = mirror {
                let s = x.field.values[i] + x.field.values[j];
                assert!(s.abs() < 1e-9, "node {i}: {s:e}");
            }
        }
    }

    #[test]
    fn slice_weight_matches_closed_form() {
        // 2 + sin(2 pi y2) > t  on a set of measure 1/2 + asin(2 - t)/pi
        let g = ProfileFunction::sin_y2(2.0, 1.0).unwrap();
        let w = SliceWeight::new(&g);
        for t in [0.5f64, 1.2, 2.0, 2.7, 3.5] {
            let exact = if t <= 1.0 {
                1.0
            } else if t >= 3.0 {
                0.0
            } else {
                0.5 + (2.0 - t).asin() / std::f64::consts::PI
            };
            assert!((w.eval(0.3, t) - exact).abs() < 1e-9, "t={t}");
        }
        let steps = ProfileFunction::stripes_y2(1.0, 3.0).unwrap();
        let w = SliceWeight::new(&steps);
        assert_eq!(w.eval(0.2, 0.5), 1.0);
        assert_eq!(w.eval(0.2, 2.0), 0.5);
        assert_eq!(w.eval(0.2, 3.5), 0.0);
    }

    #[test]
    fn constrained_problem_without_y1_dependence_is_trivial() {
        for g in [
            ProfileFunction::constant(2.0).unwrap(),
            ProfileFunction::sin_y2(2.0, 1.0).unwrap(),
            ProfileFunction::stripes_y2(1.0, 3.0).unwrap(),
        ] {
            let (x, q1) = solve_cell_constrained(&g, &coarse()).unwrap();
            assert!((q1 - 1.0).abs() < 1e-6, "{}: {q1}", g.name());
            assert!(x.h1_norm() < 1e-6);
        }
    }

    #[test]
    fn constrained_cos_cos_lies_in_the_bracket() {
        let g = ProfileFunction::cos_cos(2.0, 1.0).unwrap();
        let (_, q1) = solve_cell_constrained(&g, &CellResolution::with_mesh(32, 32)).unwrap();
        let strong = min_profile(&g, None) / 2.0;
        assert!(q1 > strong && q1 <= 1.0 + 1e-12, "{q1}");
    }

    #[test]
    fn gauge_shift_leaves_coefficient_unchanged() {
        let g = ProfileFunction::cos_cos(2.0, 1.0).unwrap();
        let x = solve_cell_2d(&g, 0.2, &coarse()).unwrap();
        let shifted = x.shifted(3.75);
        assert!((x.coefficient(2.0) - shifted.coefficient(2.0)).abs() < 1e-14);
    }

    #[test]
    fn resonant_q2_of_y1_only_profile_is_one() {
        let g = ProfileFunction::sin_y1(2.0, 1.0).unwrap();
        let r = q2_resonant(&g, &coarse()).unwrap();
        assert!((r.value - 1.0).abs() < 1e-10, "{}", r.value);
        assert!(r.to_csv().lines().count() == r.slices.len() + 1);
    }

    #[test]
    fn closed_form_corrector_factors() {
        let g = ProfileFunction::stripes_y1(1.0, 3.0).unwrap();
        let lo = corrector_gradient(RegimeClass::WeakStrong, &g, [1.0, 0.0], [0.25, 0.5, 0.1], None).unwrap();
        let hi = corrector_gradient(RegimeClass::WeakStrong, &g, [1.0, 0.0], [0.75, 0.5, 0.1], None).unwrap();
        assert!((lo.d_y1 - 0.5).abs() < 1e-12 && (hi.d_y1 + 0.5).abs() < 1e-12);
        let h = |t: f64| 2.0 + (2.0 * std::f64::consts::PI * t).sin();
        assert!(harmonic_factor(h, 1.0, &[], &Quadrature1D::default()).unwrap() < 1.0);
        assert!(matches!(
            corrector_gradient(RegimeClass::StrongStrong, &g, [1.0, 1.0], [0.0; 3], None),
            Err(Error::UnsupportedCorrector(_))
        ));
    }
}
