//! Direct trilinear finite elements for `-Lap u + u = f` with natural
//! boundary conditions on the thin domain
//! `{x in omega, 0 < x3 < eps g(x1/eps^alpha, x2/eps^beta)}`, the vertical
//! average of the result, and the `eps`-sweep comparison against a
//! homogenized solution. A two-dimensional strip solver covers profiles that
//! depend on `y2` only.

use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::homsolver::{Field2, HomSolution, Solution1D};
use crate::meshfem::sparse::dot;
use crate::meshfem::{assemble, graded_mesh, solve_cg, FemField, TopBoundary};
use crate::profile::{gauss_legendre, min_profile, ProfileFunction, TriangleRule};
use crate::regime::{classify, RegimeClass};
use crate::{Error, Rect, Result};

/// Problem data of one thin-domain solve.
#[derive(Clone)]
pub struct ThinDomainSpec {
    pub epsilon: f64,
    pub alpha: f64,
    pub beta: f64,
    pub profile: ProfileFunction,
    pub omega: Rect,
    pub source: Field2,
    pub regime: RegimeClass,
}

impl fmt::Debug for ThinDomainSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ThinDomainSpec")
            .field("epsilon", &self.epsilon)
            .field("alpha", &self.alpha)
            .field("beta", &self.beta)
            .field("profile", &self.profile.name())
            .field("omega", &self.omega)
            .field("regime", &self.regime)
            .finish()
    }
}

impl ThinDomainSpec {
    pub fn new(
        epsilon: f64,
        alpha: f64,
        beta: f64,
        profile: ProfileFunction,
        omega: Rect,
        source: Field2,
    ) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon < 1.0) {
            return Err(Error::InvalidInput(format!("epsilon must lie in (0, 1), got {epsilon}")));
        }
        omega.validate()?;
        let regime = classify(alpha, beta)?;
        Ok(ThinDomainSpec {
            epsilon,
            alpha,
            beta,
            profile,
            omega,
            source,
            regime,
        })
    }

    /// Oscillation periods `(eps^alpha L1, eps^beta L2)`.
    pub fn periods(&self) -> [f64; 2] {
        let [l1, l2] = self.profile.periods();
        [l1 * self.epsilon.powf(self.alpha), l2 * self.epsilon.powf(self.beta)]
    }

    /// `eps g(x1/eps^alpha, x2/eps^beta)`.
    pub fn top(&self, x1: f64, x2: f64) -> f64 {
        self.epsilon
            * self
                .profile
                .eval(x1 / self.epsilon.powf(self.alpha), x2 / self.epsilon.powf(self.beta))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MeshSettings {
    pub cells_per_period: usize,
    pub nz: usize,
    /// Largest admissible element count.
    pub budget: u64,
}

impl Default for MeshSettings {
    fn default() -> Self {
        MeshSettings {
            cells_per_period: 8,
            nz: 6,
            budget: 2_000_000,
        }
    }
}

/// Structured trilinear mesh with node `(i, j, k)` at
/// `(x1_i, x2_j, k/nz * eps g(x1_i/eps^alpha, x2_j/eps^beta))`.
#[derive(Debug, Clone)]
pub struct HexMesh3D {
    pub x1: Vec<f64>,
    pub x2: Vec<f64>,
    pub nz: usize,
    /// Top height per lattice column, index `i * (n2 + 1) + j`.
    pub top: Vec<f64>,
}

/// Corner `a` of a hexahedron sits at `(a & 1, (a >> 1) & 1, a >> 2)`.
const CORNERS: [[usize; 3]; 8] = [
    [0, 0, 0],
    [1, 0, 0],
    [0, 1, 0],
    [1, 1, 0],
    [0, 0, 1],
    [1, 0, 1],
    [0, 1, 1],
    [1, 1, 1],
];

impl HexMesh3D {
    pub fn n1(&self) -> usize {
        self.x1.len() - 1
    }

    pub fn n2(&self) -> usize {
        self.x2.len() - 1
    }

    pub fn n_nodes(&self) -> usize {
        self.x1.len() * self.x2.len() * (self.nz + 1)
    }

    pub fn n_elements(&self) -> usize {
        self.n1() * self.n2() * self.nz
    }

    pub fn node(&self, i: usize, j: usize, k: usize) -> usize {
        (i * self.x2.len() + j) * (self.nz + 1) + k
    }

    pub fn coords(&self, id: usize) -> [f64; 3] {
        let k = id % (self.nz + 1);
        let column = id / (self.nz + 1);
        let (i, j) = (column / self.x2.len(), column % self.x2.len());
        [self.x1[i], self.x2[j], self.top[column] * k as f64 / self.nz as f64]
    }

    /// Element `e = (i * n2 + j) * nz + k`.
    pub fn element_nodes(&self, e: usize) -> [usize; 8] {
        let k = e % self.nz;
        let column = e / self.nz;
        let (i, j) = (column / self.n2(), column % self.n2());
        CORNERS.map(|c| self.node(i + c[0], j + c[1], k + c[2]))
    }

    fn element_coords(&self, e: usize) -> [[f64; 3]; 8] {
        self.element_nodes(e).map(|n| self.coords(n))
    }

    /// Smallest Jacobian determinant over all 2x2x2 Gauss points.
    pub fn min_jacobian(&self) -> (usize, f64) {
        let pts = gauss_points();
        let mut worst = (0, f64::INFINITY);
        for e in 0..self.n_elements() {
            let x = self.element_coords(e);
            for (xi, _) in &pts {
                let (_, _, det) = trilinear(&x, *xi);
                if det < worst.1 {
                    worst = (e, det);
                }
            }
        }
        worst
    }

    pub fn validate(&self) -> Result<()> {
        let (index, det) = self.min_jacobian();
        if !(det > 0.0) {
            return Err(Error::NonPositiveJacobian { index, det });
        }
        Ok(())
    }

    /// Lattice cell and local coordinates of `(x1, x2)`.
    fn locate(&self, x: [f64; 2]) -> Option<(usize, usize, f64, f64)> {
        let find = |xs: &[f64], v: f64| -> Option<(usize, f64)> {
            let tol = 1e-12 * (xs[xs.len() - 1] - xs[0]);
            if v < xs[0] - tol || v > xs[xs.len() - 1] + tol {
                return None;
            }
            let c = xs.partition_point(|&t| t <= v).clamp(1, xs.len() - 1) - 1;
            Some((c, ((v - xs[c]) / (xs[c + 1] - xs[c])).clamp(0.0, 1.0)))
        };
        let (i, s) = find(&self.x1, x[0])?;
        let (j, t) = find(&self.x2, x[1])?;
        Some((i, j, s, t))
    }
}

fn gauss_points() -> Vec<([f64; 3], f64)> {
    let a = 0.5 - 0.5 / 3f64.sqrt();
    let b = 1.0 - a;
    let mut out = Vec::with_capacity(8);
    for z in [a, b] {
        for y in [a, b] {
            for x in [a, b] {
                out.push(([x, y, z], 0.125));
            }
        }
    }
    out
}

/// Shape values, physical gradients and Jacobian determinant of the
/// trilinear map at reference point `xi` in `[0, 1]^3`.
fn trilinear(x: &[[f64; 3]; 8], xi: [f64; 3]) -> ([f64; 8], [[f64; 3]; 8], f64) {
    let mut n = [0.0; 8];
    let mut dn = [[0.0; 3]; 8];
    for (a, c) in CORNERS.iter().enumerate() {
        let f = |d: usize| if c[d] == 1 { xi[d] } else { 1.0 - xi[d] };
        let df = |d: usize| if c[d] == 1 { 1.0 } else { -1.0 };
        n[a] = f(0) * f(1) * f(2);
        dn[a] = [df(0) * f(1) * f(2), f(0) * df(1) * f(2), f(0) * f(1) * df(2)];
    }
    // j[r][c] = d x_r / d xi_c
    let mut j = [[0.0; 3]; 3];
    for a in 0..8 {
        for r in 0..3 {
            for c in 0..3 {
                j[r][c] += x[a][r] * dn[a][c];
            }
        }
    }
    let det = j[0][0] * (j[1][1] * j[2][2] - j[1][2] * j[2][1]) - j[0][1] * (j[1][0] * j[2][2] - j[1][2] * j[2][0])
        + j[0][2] * (j[1][0] * j[2][1] - j[1][1] * j[2][0]);
    let inv = [
        [
            (j[1][1] * j[2][2] - j[1][2] * j[2][1]) / det,
            (j[0][2] * j[2][1] - j[0][1] * j[2][2]) / det,
            (j[0][1] * j[1][2] - j[0][2] * j[1][1]) / det,
        ],
        [
            (j[1][2] * j[2][0] - j[1][0] * j[2][2]) / det,
            (j[0][0] * j[2][2] - j[0][2] * j[2][0]) / det,
            (j[0][2] * j[1][0] - j[0][0] * j[1][2]) / det,
        ],
        [
            (j[1][0] * j[2][1] - j[1][1] * j[2][0]) / det,
            (j[0][1] * j[2][0] - j[0][0] * j[2][1]) / det,
            (j[0][0] * j[1][1] - j[0][1] * j[1][0]) / det,
        ],
    ];
    let mut grad = [[0.0; 3]; 8];
    for a in 0..8 {
        for r in 0..3 {
            grad[a][r] = (0..3).map(|c| dn[a][c] * inv[c][r]).sum();
        }
    }
    (n, grad, det)
}

fn lattice(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..=n).map(|i| lo + (hi - lo) * i as f64 / n as f64).collect()
}

fn cells_across(width: f64, period: f64, per_period: usize) -> u64 {
    per_period as u64 * ((width / period) * (1.0 - 1e-12)).ceil().max(1.0) as u64
}

/// Tensor mesh with `cells_per_period` cells per oscillation period along
/// each horizontal axis and `nz` layers.
pub fn build_thin_mesh(spec: &ThinDomainSpec, settings: &MeshSettings) -> Result<HexMesh3D> {
    if settings.cells_per_period < 4 {
        return Err(Error::InvalidInput(format!(
            "cells_per_period must be at least 4, got {}",
            settings.cells_per_period
        )));
    }
    if settings.nz < 1 {
        return Err(Error::InvalidInput("nz must be positive".into()));
    }
    let [p1, p2] = spec.periods();
    let n1 = cells_across(spec.omega.width(), p1, settings.cells_per_period);
    let n2 = cells_across(spec.omega.height(), p2, settings.cells_per_period);
    let required = n1.saturating_mul(n2).saturating_mul(settings.nz as u64);
    if required > settings.budget {
        return Err(Error::BudgetExceeded {
            required,
            available: settings.budget,
            detail: format!(
                "eps = {}: periods ({p1:.4e}, {p2:.4e}) need {n1} x {n2} x {} cells",
                spec.epsilon, settings.nz
            ),
        });
    }
    let o = &spec.omega;
    let x1 = lattice(o.x1_lo, o.x1_hi, n1 as usize);
    let x2 = lattice(o.x2_lo, o.x2_hi, n2 as usize);
    let top = x1.iter().flat_map(|&a| x2.iter().map(move |&b| (a, b))).map(|(a, b)| spec.top(a, b)).collect();
    let mesh = HexMesh3D {
        x1,
        x2,
        nz: settings.nz,
        top,
    };
    mesh.validate()?;
    Ok(mesh)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolveSettings {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SolveSettings {
    fn default() -> Self {
        SolveSettings {
            tol: 1e-10,
            max_iter: 200_000,
        }
    }
}

/// Trilinear solution on a [`HexMesh3D`].
#[derive(Debug, Clone)]
pub struct DirectSolution {
    pub mesh: Arc<HexMesh3D>,
    pub values: Vec<f64>,
    pub epsilon: f64,
    pub iterations: usize,
    pub residual: f64,
    /// `(int |grad u|^2 + u^2)^(1/2)`.
    pub energy_norm: f64,
    /// `(int f^2)^(1/2)` by the assembly rule.
    pub load_norm: f64,
    pub min_jacobian: f64,
}

/// Galerkin solve with 2x2x2 Gauss quadrature and Jacobi-preconditioned CG.
/// Fails with [`Error::CheckFailed`] if the energy bound
/// `|u|_H1 <= |f|_L2` is violated.
pub fn solve_direct(spec: &ThinDomainSpec, mesh: Arc<HexMesh3D>, settings: &SolveSettings) -> Result<DirectSolution> {
    let pts = gauss_points();
    let n = mesh.n_nodes();
    let mut triplets = Vec::with_capacity(64 * mesh.n_elements());
    let mut rhs = vec![0.0; n];
    let mut f_sq = 0.0;
    let mut min_jacobian = f64::INFINITY;
    for e in 0..mesh.n_elements() {
        let nodes = mesh.element_nodes(e);
        let x = mesh.element_coords(e);
        let mut k = [[0.0; 8]; 8];
        for (xi, w) in &pts {
            let (phi, grad, det) = trilinear(&x, *xi);
            if !(det > 0.0) {
                return Err(Error::NonPositiveJacobian { index: e, det });
            }
            min_jacobian = min_jacobian.min(det);
            let wd = w * det;
            let p: [f64; 3] = std::array::from_fn(|r| (0..8).map(|a| phi[a] * x[a][r]).sum());
            let fv = (spec.source)(p[0], p[1]);
            f_sq += wd * fv * fv;
            for a in 0..8 {
                rhs[nodes[a]] += wd * fv * phi[a];
                for b in 0..8 {
                    k[a][b] += wd * (dot(&grad[a], &grad[b]) + phi[a] * phi[b]);
                }
            }
        }
        for a in 0..8 {
            for b in 0..8 {
                triplets.push((nodes[a], nodes[b], k[a][b]));
            }
        }
    }
    let matrix = crate::meshfem::SparseMatrixCSR::from_triplets(n, triplets);
    let sol = solve_cg(&matrix, &rhs, settings.tol, settings.max_iter, None)?;
    let energy = dot(&sol.x, &matrix.mul(&sol.x)).max(0.0).sqrt();
    let load_norm = f_sq.sqrt();
    if energy > load_norm * (1.0 + 1e-8) + 1e-14 {
        return Err(Error::CheckFailed(format!(
            "energy bound violated: |u|_H1 = {energy:e} > |f|_L2 = {load_norm:e}"
        )));
    }
    Ok(DirectSolution {
        mesh,
        values: sol.x,
        epsilon: spec.epsilon,
        iterations: sol.iterations,
        residual: sol.residual,
        energy_norm: energy,
        load_norm,
        min_jacobian,
    })
}

impl DirectSolution {
    /// `(1/h) int_0^h u(x1, x2, x3) dx3` with `h = eps g0`, exact for the
    /// trilinear field: along a vertical line it is piecewise linear with
    /// kinks at the layer heights.
    pub fn vertical_average(&self, x: [f64; 2], g0: f64) -> Result<f64> {
        let m = &self.mesh;
        let (i, j, s, t) = m
            .locate(x)
            .ok_or_else(|| Error::Domain(format!("({}, {}) is outside the mesh", x[0], x[1])))?;
        let w = [(1.0 - s) * (1.0 - t), s * (1.0 - t), (1.0 - s) * t, s * t];
        let cols = [(i, j), (i + 1, j), (i, j + 1), (i + 1, j + 1)];
        let top: f64 = cols.iter().zip(&w).map(|(&(a, b), w)| w * m.top[a * m.x2.len() + b]).sum();
        let h = self.epsilon * g0;
        if !(h > 0.0) || h > top * (1.0 + 1e-12) {
            return Err(Error::Domain(format!("averaging strip {h} exceeds the local height {top}")));
        }
        let level = |k: usize| -> f64 { cols.iter().zip(&w).map(|(&(a, b), w)| w * self.values[m.node(a, b, k)]).sum() };
        let mut acc = 0.0;
        let mut lo = (0.0, level(0));
        for k in 1..=m.nz {
            let z = top * k as f64 / m.nz as f64;
            let u = level(k);
            if z >= h {
                let uh = lo.1 + (u - lo.1) * (h - lo.0) / (z - lo.0);
                acc += 0.5 * (lo.1 + uh) * (h - lo.0);
                break;
            }
            acc += 0.5 * (lo.1 + u) * (z - lo.0);
            lo = (z, u);
        }
        Ok(acc / h)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// `(|V - u_hom|_L2, |u_hom|_L2)` over the lattice with 3x3 Gauss per cell.
pub fn average_error(sol: &DirectSolution, g0: f64, reference: &dyn Fn(f64, f64) -> Option<f64>) -> Result<(f64, f64)> {
    let (gx, gw) = gauss_legendre(3);
    let m = &sol.mesh;
    let mut err = 0.0;
    let mut norm = 0.0;
    for i in 0..m.n1() {
        for j in 0..m.n2() {
            let (h1, h2) = (m.x1[i + 1] - m.x1[i], m.x2[j + 1] - m.x2[j]);
            for (a, wa) in gx.iter().zip(&gw) {
                for (b, wb) in gx.iter().zip(&gw) {
                    let p = [m.x1[i] + 0.5 * h1 * (1.0 + a), m.x2[j] + 0.5 * h2 * (1.0 + b)];
                    let u = reference(p[0], p[1])
                        .ok_or_else(|| Error::Domain(format!("reference undefined at ({}, {})", p[0], p[1])))?;
                    let v = sol.vertical_average(p, g0)?;
                    let w = 0.25 * h1 * h2 * wa * wb;
                    err += w * (v - u).powi(2);
                    norm += w * u * u;
                }
            }
        }
    }
    Ok((err.sqrt(), norm.sqrt()))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationRow {
    pub epsilon: f64,
    pub n1: usize,
    pub n2: usize,
    pub nz: usize,
    pub elements: usize,
    pub iterations: usize,
    pub residual: f64,
    pub min_jacobian: f64,
    pub energy_norm: f64,
    pub load_norm: f64,
    pub error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub regime: RegimeClass,
    pub alpha: f64,
    pub beta: f64,
    pub profile: String,
    pub rows: Vec<ValidationRow>,
    /// Errors strictly decrease as `eps` decreases.
    pub monotone: bool,
}

impl ValidationReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("epsilon,n1,n2,nz,elements,iterations,residual,min_jacobian,energy_norm,load_norm,error\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{},{:e},{:e},{:e},{:e},{:e}\n",
                r.epsilon, r.n1, r.n2, r.nz, r.elements, r.iterations, r.residual, r.min_jacobian, r.energy_norm, r.load_norm, r.error
            ));
        }
        out
    }
}

fn monotone_decreasing(rows: &[(f64, f64)]) -> bool {
    let mut sorted = rows.to_vec();
    sorted.sort_by(|a, b| b.0.total_cmp(&a.0));
    sorted.windows(2).all(|w| w[1].1 < w[0].1)
}

/// Direct solves over the `eps` list and the relative error of their
/// vertical averages against `hom`. All meshes are budget-checked before
/// any solve; `parallel` runs the solves concurrently, rows stay in input order.
pub fn validate(
    specs: &[ThinDomainSpec],
    hom: &HomSolution,
    mesh: &MeshSettings,
    solve: &SolveSettings,
    parallel: bool,
) -> Result<ValidationReport> {
    let first = specs
        .first()
        .ok_or_else(|| Error::InvalidInput("the epsilon list is empty".into()))?;
    let meshes = specs
        .iter()
        .map(|s| build_thin_mesh(s, mesh).map(Arc::new))
        .collect::<Result<Vec<_>>>()?;
    let g0 = min_profile(&first.profile, None);
    let run = |(spec, m): (&ThinDomainSpec, &Arc<HexMesh3D>)| -> Result<ValidationRow> {
        let sol = solve_direct(spec, m.clone(), solve)?;
        let (err, norm) = average_error(&sol, g0, &|a, b| hom.evaluate(a, b))?;
        Ok(ValidationRow {
            epsilon: spec.epsilon,
            n1: m.n1(),
            n2: m.n2(),
            nz: m.nz,
            elements: m.n_elements(),
            iterations: sol.iterations,
            residual: sol.residual,
            min_jacobian: sol.min_jacobian,
            energy_norm: sol.energy_norm,
            load_norm: sol.load_norm,
            error: if norm > 0.0 { err / norm } else { err },
        })
    };
    let rows: Vec<ValidationRow> = if parallel {
        specs.par_iter().zip(meshes.par_iter()).map(run).collect::<Result<_>>()?
    } else {
        specs.iter().zip(meshes.iter()).map(run).collect::<Result<_>>()?
    };
    let pairs: Vec<(f64, f64)> = rows.iter().map(|r| (r.epsilon, r.error)).collect();
    Ok(ValidationReport {
        regime: first.regime,
        alpha: first.alpha,
        beta: first.beta,
        profile: first.profile.name().to_string(),
        monotone: monotone_decreasing(&pairs),
        rows,
    })
}

/// Thin strip `{0 < x3 < eps g(x2 / eps^beta)}` over `x2 in (lo, hi)` for a
/// profile independent of `y1`, with source `f(x2)`.
#[derive(Clone)]
pub struct StripSpec {
    pub epsilon: f64,
    pub beta: f64,
    pub profile: ProfileFunction,
    pub range: (f64, f64),
    pub source: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
}

/// P1 solution on the strip, mesh coordinates `(x2, x3)`.
#[derive(Debug, Clone)]
pub struct StripSolution {
    pub field: FemField,
    pub epsilon: f64,
    pub iterations: usize,
}

/// Sparse Cholesky solve on a graded strip mesh; stepped profiles get a
/// stepped top.
pub fn solve_strip(spec: &StripSpec, cells_per_period: usize, n_v: usize, settings: &SolveSettings) -> Result<StripSolution> {
    if !spec.profile.is_independent_of_y1() {
        return Err(Error::InvalidInput(format!(
            "strip reduction needs a profile independent of y1, got {}",
            spec.profile.name()
        )));
    }
    if !(spec.epsilon > 0.0 && spec.epsilon < 1.0) || cells_per_period < 4 {
        return Err(Error::InvalidInput(format!(
            "strip solve needs eps in (0, 1) and cells_per_period >= 4, got {} and {cells_per_period}",
            spec.epsilon
        )));
    }
    let (lo, hi) = spec.range;
    let period = spec.profile.periods()[1] * spec.epsilon.powf(spec.beta);
    let n_h = cells_across(hi - lo, period, cells_per_period) as usize;
    let scale = spec.epsilon.powf(spec.beta);
    let top = |x2: f64| spec.epsilon * spec.profile.eval(0.0, x2 / scale);
    let boundary = match spec.profile.slice_pieces_y2(0.0) {
        Some(pieces) => {
            // absolute pieces clipped to the range, one per period and step
            let first = (lo / period).floor() as i64;
            let last = (hi / period).ceil() as i64;
            let mut edges = vec![lo];
            let mut heights = Vec::new();
            for p in first..last {
                for &(a, b, v) in &pieces {
                    let (a, b) = (p as f64 * period + a * scale, p as f64 * period + b * scale);
                    if b <= lo || a >= hi {
                        continue;
                    }
                    edges.push(b.min(hi));
                    heights.push(spec.epsilon * v);
                }
            }
            TopBoundary::Steps {
                edges,
                heights,
                extra_levels: Vec::new(),
            }
        }
        None => TopBoundary::Smooth(&top),
    };
    let mesh = Arc::new(graded_mesh(lo, hi, &boundary, n_h, n_v, false)?);
    let one = |_: [f64; 2]| 1.0;
    let f = |p: [f64; 2]| (spec.source)(p[0]);
    let sys = assemble(&mesh, &one, &one, &one, &f, TriangleRule::Degree5)?;
    let sol = crate::meshfem::solve_direct(&sys.matrix, &sys.rhs, None)?;
    // a factorization's residual scales with the condition number, not with tol
    if sol.residual > settings.tol.max(1e-8) {
        return Err(Error::NonConvergence {
            iterations: 0,
            residual: sol.residual,
        });
    }
    let values = sys.dofs.expand(&sol.x);
    Ok(StripSolution {
        field: FemField::new(mesh, values)?,
        epsilon: spec.epsilon,
        iterations: sol.iterations,
    })
}

impl StripSolution {
    /// `(1/h) int_0^h u(x2, x3) dx3`, `h = eps g0`, by composite Gauss.
    pub fn vertical_average(&self, x2: f64, g0: f64, panels: usize) -> Result<f64> {
        let h = self.epsilon * g0;
        let (gx, gw) = gauss_legendre(2);
        let mut acc = 0.0;
        for p in 0..panels {
            let (a, b) = (h * p as f64 / panels as f64, h * (p + 1) as f64 / panels as f64);
            for (x, w) in gx.iter().zip(&gw) {
                let z = 0.5 * (a + b) + 0.5 * (b - a) * x;
                let u = self
                    .field
                    .evaluate([x2, z])
                    .ok_or_else(|| Error::Domain(format!("({x2}, {z}) is outside the strip mesh")))?;
                acc += 0.5 * (b - a) * w * u;
            }
        }
        Ok(acc / h)
    }

    /// `|V - u_1d|_L2 / |u_1d|_L2` over `(lo, hi)`.
    pub fn relative_error(&self, reference: &Solution1D, g0: f64, range: (f64, f64), n: usize) -> Result<f64> {
        let (gx, gw) = gauss_legendre(3);
        let (lo, hi) = range;
        let mut err = 0.0;
        let mut norm = 0.0;
        for c in 0..n {
            let (a, b) = (lo + (hi - lo) * c as f64 / n as f64, lo + (hi - lo) * (c + 1) as f64 / n as f64);
            for (x, w) in gx.iter().zip(&gw) {
                let p = 0.5 * (a + b) + 0.5 * (b - a) * x;
                let u = reference.evaluate(p);
                let v = self.vertical_average(p, g0, 8)?;
                err += 0.5 * (b - a) * w * (v - u).powi(2);
                norm += 0.5 * (b - a) * w * u * u;
            }
        }
        Ok((err / norm).sqrt())
    }
}
