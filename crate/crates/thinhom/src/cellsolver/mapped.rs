//! Quadratic elements for the slice problem on a smooth slice. The mesh
//! lives on the reference strip `(0, L2) x (0, 1)` and is carried onto
//! `Y*(y1)` by the exact map `(s, t) -> (s, t G(s))`, `G = g(y1, .)`.
//!
//! The fine node grid (half steps of the element grid) coincides with the
//! nodes of the P1 graded mesh of twice the resolution, which is what the
//! field is exported on.

use std::sync::Arc;

use crate::meshfem::{graded_mesh_on, shape_gradients, CgSolution, DofMap, SparseMatrixCSR, TopBoundary, TriMesh2D};
use crate::profile::{ProfileFunction, TriangleRule};
use super::CellResolution;
use crate::Result;

/// Weighted integrals of a solved slice.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SliceTotals {
    pub measure: f64,
    pub forcing: f64,
    pub energy: f64,
    pub l2: f64,
}

#[derive(Debug, Clone)]
pub struct MappedSlice {
    g: ProfileFunction,
    y1: f64,
    period: f64,
    n_s: usize,
    n_t: usize,
    s_edges: Vec<f64>,
    t_edges: Vec<f64>,
    /// Per element quad: rising or falling diagonal.
    rising: Vec<bool>,
    pub values: Vec<f64>,
}

struct Element {
    /// Reference vertex coordinates `(s, t)`.
    v: [[f64; 2]; 3],
    /// Fine-grid node ids: three vertices, then midpoints 01, 12, 20.
    nodes: [usize; 6],
}

struct Point {
    weight: f64,
    phi: [f64; 6],
    grad: [[f64; 2]; 6],
}

impl MappedSlice {
    fn height(&self, s: f64) -> f64 {
        self.g.eval(self.y1, s)
    }

    fn id(&self, a: usize, b: usize) -> usize {
        a * (2 * self.n_t + 1) + b
    }

    fn element(&self, c: usize, k: usize, upper: bool) -> Element {
        let corner = |da: usize, db: usize| ([self.s_edges[c + da], self.t_edges[k + db]], (2 * (c + da), 2 * (k + db)));
        let (a, b, cc, d) = (corner(0, 0), corner(1, 0), corner(1, 1), corner(0, 1));
        let tri = match (self.rising[c * self.n_t + k], upper) {
            (true, false) => [a, b, cc],
            (true, true) => [a, cc, d],
            (false, false) => [a, b, d],
            (false, true) => [b, cc, d],
        };
        let mid = |p: (usize, usize), q: (usize, usize)| self.id((p.0 + q.0) / 2, (p.1 + q.1) / 2);
        let (p0, p1, p2) = (tri[0].1, tri[1].1, tri[2].1);
        Element {
            v: [tri[0].0, tri[1].0, tri[2].0],
            nodes: [
                self.id(p0.0, p0.1),
                self.id(p1.0, p1.1),
                self.id(p2.0, p2.1),
                mid(p0, p1),
                mid(p1, p2),
                mid(p2, p0),
            ],
        }
    }

    fn elements(&self) -> impl Iterator<Item = Element> + '_ {
        (0..self.n_s).flat_map(move |c| {
            (0..self.n_t).flat_map(move |k| [false, true].into_iter().map(move |u| self.element(c, k, u)))
        })
    }

    /// Physical basis values and gradients at barycentric point `lam`,
    /// and the map data `(weight factor G, y-point)`.
    fn basis(&self, e: &Element, lam: [f64; 3]) -> ([f64; 6], [[f64; 2]; 6], f64) {
        let (dl, _) = shape_gradients(e.v);
        let s = lam[0] * e.v[0][0] + lam[1] * e.v[1][0] + lam[2] * e.v[2][0];
        let t = lam[0] * e.v[0][1] + lam[1] * e.v[1][1] + lam[2] * e.v[2][1];
        let big_g = self.height(s);
        let shear = t * self.g.d_y2(self.y1, s) / big_g;
        let mut phi = [0.0; 6];
        let mut grad = [[0.0; 2]; 6];
        let mut set = |i: usize, v: f64, d: [f64; 2]| {
            phi[i] = v;
            grad[i] = [d[0] - shear * d[1], d[1] / big_g];
        };
        for i in 0..3 {
            let f = 4.0 * lam[i] - 1.0;
            set(i, lam[i] * (2.0 * lam[i] - 1.0), [f * dl[i][0], f * dl[i][1]]);
        }
        for (m, (i, j)) in [(0, 1), (1, 2), (2, 0)].into_iter().enumerate() {
            set(
                3 + m,
                4.0 * lam[i] * lam[j],
                [
                    4.0 * (lam[i] * dl[j][0] + lam[j] * dl[i][0]),
                    4.0 * (lam[i] * dl[j][1] + lam[j] * dl[i][1]),
                ],
            );
        }
        (phi, grad, big_g)
    }

    fn points(&self, e: &Element, rule: TriangleRule) -> Vec<Point> {
        let (_, area) = shape_gradients(e.v);
        rule.points()
            .into_iter()
            .map(|(lam, w)| {
                let (phi, grad, big_g) = self.basis(e, lam);
                Point {
                    weight: w * area * big_g,
                    phi,
                    grad,
                }
            })
            .collect()
    }

    pub fn totals(&self) -> SliceTotals {
        let mut out = SliceTotals {
            measure: 0.0,
            forcing: 0.0,
            energy: 0.0,
            l2: 0.0,
        };
        for e in self.elements() {
            for p in self.points(&e, TriangleRule::Degree5) {
                let mut x = 0.0;
                let mut dx = [0.0; 2];
                for (i, &n) in e.nodes.iter().enumerate() {
                    let v = self.values[n];
                    x += v * p.phi[i];
                    dx[0] += v * p.grad[i][0];
                    dx[1] += v * p.grad[i][1];
                }
                out.measure += p.weight;
                out.forcing += p.weight * dx[0];
                out.energy += p.weight * (dx[0] * dx[0] + dx[1] * dx[1]);
                out.l2 += p.weight * x * x;
            }
        }
        out
    }

    /// Gradient of the solution at a physical point `(y2, y3)`.
    pub fn gradient_at(&self, p: [f64; 2]) -> Option<[f64; 2]> {
        let s = p[0].rem_euclid(self.period);
        let t = p[1] / self.height(s);
        let tol = 1e-9;
        if !(t >= -tol && t <= 1.0 + tol) {
            return None;
        }
        let t = t.clamp(0.0, 1.0);
        let c = self.s_edges.partition_point(|&e| e <= s).clamp(1, self.n_s) - 1;
        let k = self.t_edges.partition_point(|&e| e <= t).clamp(1, self.n_t) - 1;
        for upper in [false, true] {
            let e = self.element(c, k, upper);
            let lam = crate::meshfem::mesh::barycentric(e.v, [s, t]);
            if lam.iter().all(|&l| l >= -1e-10) || upper {
                let (_, grad, _) = self.basis(&e, lam);
                let mut dx = [0.0; 2];
                for (i, &n) in e.nodes.iter().enumerate() {
                    dx[0] += self.values[n] * grad[i][0];
                    dx[1] += self.values[n] * grad[i][1];
                }
                return Some(dx);
            }
        }
        None
    }
}

/// Result of [`solve_mapped_slice`].
pub struct MappedSolution {
    pub slice: Arc<MappedSlice>,
    /// P1 mesh on the fine node grid.
    pub mesh: Arc<TriMesh2D>,
    /// `int phi_i` per fine node.
    pub node_weights: Vec<f64>,
    pub totals: SliceTotals,
    pub cg: CgSolution,
}

fn with_midpoints(edges: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(2 * edges.len() - 1);
    for w in edges.windows(2) {
        out.push(w[0]);
        out.push(0.5 * (w[0] + w[1]));
    }
    out.push(edges[edges.len() - 1]);
    out
}

/// Solves the slice problem with `n_s x n_t` quadratic element pairs.
pub fn solve_mapped_slice(
    g: &ProfileFunction,
    y1: f64,
    n_s: usize,
    n_t: usize,
    res: &CellResolution,
) -> Result<MappedSolution> {
    let period = g.periods()[1];
    let top = |s: f64| g.eval(y1, s);
    let s_edges: Vec<f64> = (0..=n_s).map(|c| period * c as f64 / n_s as f64).collect();
    let t_edges: Vec<f64> = (0..=n_t).map(|k| k as f64 / n_t as f64).collect();
    let mesh = Arc::new(graded_mesh_on(
        &with_midpoints(&s_edges),
        &TopBoundary::SmoothLevels(&top, with_midpoints(&t_edges)),
        2 * n_t,
        true,
    )?);
    let dofs = DofMap::new(&mesh);

    let mut rising = Vec::with_capacity(n_s * n_t);
    for c in 0..n_s {
        let hs = s_edges[c + 1] - s_edges[c];
        let (g0, g1) = (top(s_edges[c]), top(s_edges[c + 1]));
        for k in 0..n_t {
            let (t0, t1) = (t_edges[k], t_edges[k + 1]);
            let up = (t1 * g1 - t0 * g0).powi(2);
            let down = (t0 * g1 - t1 * g0).powi(2);
            let (r, f) = (hs * hs + up, hs * hs + down);
            rising.push(if (r - f).abs() <= 1e-12 * (r + f) { 2 * c < n_s } else { r < f });
        }
    }
    let mut slice = MappedSlice {
        g: g.clone(),
        y1,
        period,
        n_s,
        n_t,
        s_edges,
        t_edges,
        rising,
        values: Vec::new(),
    };

    let n = dofs.n_dof;
    let mut triplets = Vec::with_capacity(36 * 2 * n_s * n_t);
    let mut rhs = vec![0.0; n];
    let mut mean = vec![0.0; n];
    for e in slice.elements() {
        let pts = slice.points(&e, TriangleRule::Degree5);
        let d: Vec<usize> = e.nodes.iter().map(|&i| dofs.node_to_dof[i]).collect();
        for i in 0..6 {
            for j in 0..6 {
                let k: f64 = pts
                    .iter()
                    .map(|p| p.weight * (p.grad[i][0] * p.grad[j][0] + p.grad[i][1] * p.grad[j][1]))
                    .sum();
                triplets.push((d[i], d[j], k));
            }
            rhs[d[i]] += pts.iter().map(|p| p.weight * p.grad[i][0]).sum::<f64>();
            mean[d[i]] += pts.iter().map(|p| p.weight * p.phi[i]).sum::<f64>();
        }
    }
    let matrix = SparseMatrixCSR::from_triplets(n, triplets);
    let cg = res.solve(&matrix, &rhs, &mean)?;
    slice.values = dofs.expand(&cg.x);
    let node_weights = super::node_weights_from(&mean, &dofs, mesh.n_nodes());
    let totals = slice.totals();
    Ok(MappedSolution {
        slice: Arc::new(slice),
        mesh,
        node_weights,
        totals,
        cg,
    })
}
