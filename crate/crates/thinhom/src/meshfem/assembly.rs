use std::sync::Arc;

use super::mesh::{barycentric, TriMesh2D};
use super::sparse::SparseMatrixCSR;
use crate::profile::TriangleRule;
use crate::{Error, Result};

/// Coefficients of a scalar P1 weak form
/// `int a_uu u_u phi_u + a_vv u_v phi_v + mass u phi = int mass source phi + flux . grad phi`.
pub trait WeakForm {
    fn a_uu(&self, p: [f64; 2]) -> f64;
    fn a_vv(&self, p: [f64; 2]) -> f64 {
        self.a_uu(p)
    }
    fn mass(&self, _p: [f64; 2]) -> f64 {
        0.0
    }
    fn source(&self, _p: [f64; 2]) -> f64 {
        0.0
    }
    fn flux(&self, _p: [f64; 2]) -> [f64; 2] {
        [0.0, 0.0]
    }
    /// Density of the mean used by the zero-mean gauge.
    fn mean_weight(&self, _p: [f64; 2]) -> f64 {
        1.0
    }
}

/// A weak form built from plain closures.
pub struct ClosureForm<'a> {
    pub a_uu: &'a dyn Fn([f64; 2]) -> f64,
    pub a_vv: &'a dyn Fn([f64; 2]) -> f64,
    pub mass: &'a dyn Fn([f64; 2]) -> f64,
    pub source: &'a dyn Fn([f64; 2]) -> f64,
}

impl WeakForm for ClosureForm<'_> {
    fn a_uu(&self, p: [f64; 2]) -> f64 {
        (self.a_uu)(p)
    }
    fn a_vv(&self, p: [f64; 2]) -> f64 {
        (self.a_vv)(p)
    }
    fn mass(&self, p: [f64; 2]) -> f64 {
        (self.mass)(p)
    }
    fn source(&self, p: [f64; 2]) -> f64 {
        (self.source)(p)
    }
}

/// Node-to-unknown numbering after periodic folding.
#[derive(Debug, Clone)]
pub struct DofMap {
    pub node_to_dof: Vec<usize>,
    pub n_dof: usize,
}

impl DofMap {
    pub fn new(mesh: &TriMesh2D) -> Self {
        let n = mesh.n_nodes();
        let mut master: Vec<usize> = (0..n).collect();
        for &(m, s) in &mesh.periodic_pairs {
            master[s] = m;
        }
        // resolve chains (corner nodes)
        for i in 0..n {
            let mut j = i;
            while master[j] != j {
                j = master[j];
            }
            master[i] = j;
        }
        let mut node_to_dof = vec![usize::MAX; n];
        let mut n_dof = 0;
        for i in 0..n {
            if master[i] == i {
                node_to_dof[i] = n_dof;
                n_dof += 1;
            }
        }
        for i in 0..n {
            node_to_dof[i] = node_to_dof[master[i]];
        }
        DofMap { node_to_dof, n_dof }
    }

    pub fn expand(&self, dofs: &[f64]) -> Vec<f64> {
        self.node_to_dof.iter().map(|&d| dofs[d]).collect()
    }
}

/// Local P1 data of one triangle.
#[derive(Debug, Clone, Copy)]
pub struct ElementMatrices {
    pub stiffness: [[f64; 3]; 3],
    pub mass: [[f64; 3]; 3],
    pub load: [f64; 3],
    pub mean_weight: [f64; 3],
}

/// Constant gradients of the three P1 shape functions and the area.
pub fn shape_gradients(v: [[f64; 2]; 3]) -> ([[f64; 2]; 3], f64) {
    let det = (v[1][0] - v[0][0]) * (v[2][1] - v[0][1]) - (v[2][0] - v[0][0]) * (v[1][1] - v[0][1]);
    let g = [
        [(v[1][1] - v[2][1]) / det, (v[2][0] - v[1][0]) / det],
        [(v[2][1] - v[0][1]) / det, (v[0][0] - v[2][0]) / det],
        [(v[0][1] - v[1][1]) / det, (v[1][0] - v[0][0]) / det],
    ];
    (g, 0.5 * det)
}

pub fn element_matrices(
    v: [[f64; 2]; 3],
    form: &dyn WeakForm,
    rule: TriangleRule,
) -> ElementMatrices {
    let (grad, area) = shape_gradients(v);
    let mut int_auu = 0.0;
    let mut int_avv = 0.0;
    let mut int_flux = [0.0; 2];
    let mut mass = [[0.0; 3]; 3];
    let mut load = [0.0; 3];
    let mut mean_weight = [0.0; 3];
    for (lam, w) in rule.points() {
        let p = [
            lam[0] * v[0][0] + lam[1] * v[1][0] + lam[2] * v[2][0],
            lam[0] * v[0][1] + lam[1] * v[1][1] + lam[2] * v[2][1],
        ];
        let wa = w * area;
        int_auu += wa * form.a_uu(p);
        int_avv += wa * form.a_vv(p);
        let fl = form.flux(p);
        int_flux[0] += wa * fl[0];
        int_flux[1] += wa * fl[1];
        let m = form.mass(p);
        let src = m * form.source(p);
        let rho = form.mean_weight(p);
        for i in 0..3 {
            load[i] += wa * src * lam[i];
            mean_weight[i] += wa * rho * lam[i];
            for j in 0..3 {
                mass[i][j] += wa * m * lam[i] * lam[j];
            }
        }
    }
    let mut stiffness = [[0.0; 3]; 3];
    for i in 0..3 {
        load[i] += int_flux[0] * grad[i][0] + int_flux[1] * grad[i][1];
        for j in 0..3 {
            stiffness[i][j] = int_auu * grad[i][0] * grad[j][0] + int_avv * grad[i][1] * grad[j][1];
        }
    }
    ElementMatrices {
        stiffness,
        mass,
        load,
        mean_weight,
    }
}

/// Folded global system.
#[derive(Debug, Clone)]
pub struct AssembledSystem {
    pub matrix: SparseMatrixCSR,
    pub rhs: Vec<f64>,
    pub dofs: DofMap,
    /// `int rho phi_i` per unknown, the weights of the zero-mean gauge.
    pub mean_weights: Vec<f64>,
}

/// Assembles stiffness + mass and the load over the mesh, folding periodic
/// pairs onto their masters. Traversal order is fixed.
pub fn assemble_form(
    mesh: &TriMesh2D,
    form: &dyn WeakForm,
    rule: TriangleRule,
) -> Result<AssembledSystem> {
    let dofs = DofMap::new(mesh);
    let mut triplets = Vec::with_capacity(9 * mesh.n_triangles());
    let mut rhs = vec![0.0; dofs.n_dof];
    let mut mean_weights = vec![0.0; dofs.n_dof];
    for (t, tri) in mesh.triangles.iter().enumerate() {
        let v = mesh.vertices(t);
        let area = super::mesh::signed_area(v[0], v[1], v[2]);
        if !(area > 0.0) {
            return Err(Error::DegenerateElement { index: t, area });
        }
        let em = element_matrices(v, form, rule);
        let d = [
            dofs.node_to_dof[tri[0]],
            dofs.node_to_dof[tri[1]],
            dofs.node_to_dof[tri[2]],
        ];
        for i in 0..3 {
            rhs[d[i]] += em.load[i];
            mean_weights[d[i]] += em.mean_weight[i];
            for j in 0..3 {
                triplets.push((d[i], d[j], em.stiffness[i][j] + em.mass[i][j]));
            }
        }
    }
    Ok(AssembledSystem {
        matrix: SparseMatrixCSR::from_triplets(dofs.n_dof, triplets),
        rhs,
        dofs,
        mean_weights,
    })
}

/// `A = stiffness(a_uu, a_vv) + mass(mass_weight)`, `b = load(mass_weight * source)`.
pub fn assemble(
    mesh: &TriMesh2D,
    a_uu: &dyn Fn([f64; 2]) -> f64,
    a_vv: &dyn Fn([f64; 2]) -> f64,
    mass_weight: &dyn Fn([f64; 2]) -> f64,
    source: &dyn Fn([f64; 2]) -> f64,
    rule: TriangleRule,
) -> Result<AssembledSystem> {
    let form = ClosureForm {
        a_uu,
        a_vv,
        mass: mass_weight,
        source,
    };
    assemble_form(mesh, &form, rule)
}

/// Nodal P1 field on a shared mesh.
#[derive(Debug, Clone)]
pub struct FemField {
    pub mesh: Arc<TriMesh2D>,
    pub values: Vec<f64>,
}

impl FemField {
    pub fn new(mesh: Arc<TriMesh2D>, values: Vec<f64>) -> Result<Self> {
        if values.len() != mesh.n_nodes() {
            return Err(Error::InvalidInput(format!(
                "field has {} values for {} nodes",
                values.len(),
                mesh.n_nodes()
            )));
        }
        Ok(FemField { mesh, values })
    }

    pub fn gradient(&self, t: usize) -> [f64; 2] {
        let (g, _) = shape_gradients(self.mesh.vertices(t));
        let tri = self.mesh.triangles[t];
        let mut out = [0.0; 2];
        for k in 0..3 {
            out[0] += self.values[tri[k]] * g[k][0];
            out[1] += self.values[tri[k]] * g[k][1];
        }
        out
    }

    pub fn gradients(&self) -> Vec<[f64; 2]> {
        (0..self.mesh.n_triangles()).map(|t| self.gradient(t)).collect()
    }

    pub fn evaluate(&self, p: [f64; 2]) -> Option<f64> {
        let (t, _) = self.mesh.locate(p)?;
        let v = self.mesh.vertices(t);
        let lam = barycentric(v, self.wrap(p));
        let tri = self.mesh.triangles[t];
        Some((0..3).map(|k| lam[k] * self.values[tri[k]]).sum())
    }

    /// Gradient of the triangle containing `p`.
    pub fn gradient_at(&self, p: [f64; 2]) -> Option<[f64; 2]> {
        let (t, _) = self.mesh.locate(p)?;
        Some(self.gradient(t))
    }

    fn wrap(&self, p: [f64; 2]) -> [f64; 2] {
        match self.mesh.period {
            Some(per) => {
                let lo = self.mesh.nodes.iter().map(|n| n[0]).fold(f64::INFINITY, f64::min);
                [lo + (p[0] - lo).rem_euclid(per), p[1]]
            }
            None => p,
        }
    }

    /// Exact P1 integral of the field times a weight sampled by `rule`.
    pub fn integral(&self, weight: &dyn Fn([f64; 2]) -> f64, rule: TriangleRule) -> f64 {
        let mut acc = 0.0;
        for (t, tri) in self.mesh.triangles.iter().enumerate() {
            let v = self.mesh.vertices(t);
            let area = self.mesh.area(t);
            for (lam, w) in rule.points() {
                let p = point(v, lam);
                let u: f64 = (0..3).map(|k| lam[k] * self.values[tri[k]]).sum();
                acc += w * area * weight(p) * u;
            }
        }
        acc
    }

    /// `(|u_h - u|_L2, |grad u_h - grad u|_L2)`.
    pub fn errors(
        &self,
        exact: &dyn Fn([f64; 2]) -> f64,
        grad_exact: &dyn Fn([f64; 2]) -> [f64; 2],
        rule: TriangleRule,
    ) -> (f64, f64) {
        let mut l2 = 0.0;
        let mut h1 = 0.0;
        for (t, tri) in self.mesh.triangles.iter().enumerate() {
            let v = self.mesh.vertices(t);
            let area = self.mesh.area(t);
            let g = self.gradient(t);
            for (lam, w) in rule.points() {
                let p = point(v, lam);
                let u: f64 = (0..3).map(|k| lam[k] * self.values[tri[k]]).sum();
                let e = u - exact(p);
                let ge = grad_exact(p);
                l2 += w * area * e * e;
                h1 += w * area * ((g[0] - ge[0]).powi(2) + (g[1] - ge[1]).powi(2));
            }
        }
        (l2.sqrt(), h1.sqrt())
    }
}

pub fn point(v: [[f64; 2]; 3], lam: [f64; 3]) -> [f64; 2] {
    [
        lam[0] * v[0][0] + lam[1] * v[1][0] + lam[2] * v[2][0],
        lam[0] * v[0][1] + lam[1] * v[1][1] + lam[2] * v[2][1],
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::meshfem::mesh::{graded_mesh, rectangle_mesh, TopBoundary};
    use crate::meshfem::sparse::solve_cg;
    use crate::Rect;

    const UNIT: [[f64; 2]; 3] = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];

    #[test]
    fn reference_element_stiffness() {
        let one = |_: [f64; 2]| 1.0;
        let zero = |_: [f64; 2]| 0.0;
        let form = ClosureForm {
            a_uu: &one,
            a_vv: &one,
            mass: &zero,
            source: &zero,
        };
        let em = element_matrices(UNIT, &form, TriangleRule::EdgeMidpoints);
        let want = [[1.0, -0.5, -0.5], [-0.5, 0.5, 0.0], [-0.5, 0.0, 0.5]];
        for i in 0..3 {
            for j in 0..3 {
                assert!((em.stiffness[i][j] - want[i][j]).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn reference_element_mass() {
        let one = |_: [f64; 2]| 1.0;
        let zero = |_: [f64; 2]| 0.0;
        let form = ClosureForm {
            a_uu: &zero,
            a_vv: &zero,
            mass: &one,
            source: &zero,
        };
        let em = element_matrices(UNIT, &form, TriangleRule::EdgeMidpoints);
        for i in 0..3 {
            for j in 0..3 {
                let want = if i == j { 2.0 / 24.0 } else { 1.0 / 24.0 };
                assert!((em.mass[i][j] - want).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn mass_system_reproduces_constants() {
        let r = Rect::unit();
        let mesh = rectangle_mesh(&r, 5, 7).unwrap();
        let one = |_: [f64; 2]| 1.0;
        let zero = |_: [f64; 2]| 0.0;
        let sys = assemble(&mesh, &zero, &zero, &one, &one, TriangleRule::EdgeMidpoints).unwrap();
        let s = solve_cg(&sys.matrix, &sys.rhs, 1e-14, 500, None).unwrap();
        for x in s.x {
            assert!((x - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn periodic_stiffness_annihilates_constants_and_is_symmetric() {
        let top = |u: f64| 2.0 + (2.0 * std::f64::consts::PI * u).sin();
        let mesh = graded_mesh(0.0, 1.0, &TopBoundary::Smooth(&top), 12, 6, true).unwrap();
        let one = |_: [f64; 2]| 1.0;
        let zero = |_: [f64; 2]| 0.0;
        let sys = assemble(&mesh, &one, &one, &zero, &zero, TriangleRule::EdgeMidpoints).unwrap();
        assert_eq!(sys.dofs.n_dof, mesh.n_nodes() - 7);
        let ones = vec![1.0; sys.dofs.n_dof];
        let a1 = sys.matrix.mul(&ones);
        assert!(a1.iter().all(|v| v.abs() < 1e-10));
        assert!(sys.matrix.asymmetry() < 1e-12);
    }
}
