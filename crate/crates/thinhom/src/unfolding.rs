//! The unfolding operator `T_eps`, the vertical rescaling `Pi_eps` and the
//! vertical average `V^eps`, evaluated on closed-form fields, together with
//! two-path numerical checks of their identities.
//!
//! Cells are `[i L1 eps^alpha, (i+1) L1 eps^alpha) x [j L2 eps^beta, (j+1) L2 eps^beta)`;
//! `S_eps` holds the cells whose closure lies in the closed rectangle, their
//! union is `omega_eps` and the rest of `omega` is `Lambda_eps`.

use serde::{Deserialize, Serialize};

use crate::profile::{gauss_legendre, ProfileFunction, Quadrature1D};
use crate::{Error, Rect, Result};

/// A closed-form field on the thin domain.
pub type Field3<'a> = &'a (dyn Fn([f64; 3]) -> f64 + Sync);

/// `(floor(x / (scale L)), x / scale - index L)`, with the fraction in `[0, L)`.
pub fn cell_decompose(x: f64, scale: f64, l: f64) -> (i64, f64) {
    let mut index = (x / (scale * l)).floor();
    let mut fraction = x / scale - index * l;
    if fraction < 0.0 {
        // x / scale sits a rounding error below an integer multiple of L
        if fraction > -1e-12 * l.max(1.0) {
            fraction = 0.0;
        } else {
            index -= 1.0;
            fraction += l;
        }
    }
    if fraction >= l {
        index += 1.0;
        fraction -= l;
    }
    (index as i64, fraction)
}

/// Quadrature settings: `y_*` for `Y*` (unfolded path), `x_*` for the
/// physical path. The two are kept different on purpose.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct UnfoldResolution {
    pub y_panels: usize,
    pub y_order: usize,
    pub t_order: usize,
    pub x_panels: usize,
    pub x_order: usize,
}

impl Default for UnfoldResolution {
    fn default() -> Self {
        UnfoldResolution {
            y_panels: 4,
            y_order: 8,
            t_order: 8,
            x_panels: 3,
            x_order: 10,
        }
    }
}

impl UnfoldResolution {
    pub fn validate(&self) -> Result<()> {
        if [self.y_panels, self.y_order, self.t_order, self.x_panels, self.x_order].contains(&0) {
            return Err(Error::InvalidInput("unfolding quadrature sizes must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct UnfoldGrid {
    pub epsilon: f64,
    pub alpha: f64,
    pub beta: f64,
    pub profile: ProfileFunction,
    pub omega: Rect,
    /// Cell sizes `(L1 eps^alpha, L2 eps^beta)`.
    pub cell: [f64; 2],
    /// `S_eps = [i_lo, i_hi) x [j_lo, j_hi)`.
    pub i_range: (i64, i64),
    pub j_range: (i64, i64),
    pub resolution: UnfoldResolution,
}

impl UnfoldGrid {
    pub fn new(
        epsilon: f64,
        alpha: f64,
        beta: f64,
        profile: ProfileFunction,
        omega: Rect,
        resolution: UnfoldResolution,
    ) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon < 1.0) {
            return Err(Error::InvalidInput(format!("epsilon must lie in (0, 1), got {epsilon}")));
        }
        if !(alpha >= 0.0 && beta >= 0.0 && alpha.is_finite() && beta.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "exponents must be finite and non-negative, got ({alpha}, {beta})"
            )));
        }
        omega.validate()?;
        resolution.validate()?;
        let [l1, l2] = profile.periods();
        let cell = [l1 * epsilon.powf(alpha), l2 * epsilon.powf(beta)];
        let range = |lo: f64, hi: f64, s: f64| {
            let tol = 1e-9;
            let first = (lo / s - tol).ceil() as i64;
            let end = (hi / s + tol).floor() as i64;
            (first, end.max(first))
        };
        Ok(UnfoldGrid {
            epsilon,
            alpha,
            beta,
            i_range: range(omega.x1_lo, omega.x1_hi, cell[0]),
            j_range: range(omega.x2_lo, omega.x2_hi, cell[1]),
            cell,
            profile,
            omega,
            resolution,
        })
    }

    pub fn n_cells(&self) -> usize {
        ((self.i_range.1 - self.i_range.0) * (self.j_range.1 - self.j_range.0)) as usize
    }

    pub fn contains(&self, i: i64, j: i64) -> bool {
        i >= self.i_range.0 && i < self.i_range.1 && j >= self.j_range.0 && j < self.j_range.1
    }

    pub fn cells(&self) -> impl Iterator<Item = (i64, i64)> + '_ {
        (self.i_range.0..self.i_range.1).flat_map(move |i| (self.j_range.0..self.j_range.1).map(move |j| (i, j)))
    }

    pub fn cell_rect(&self, i: i64, j: i64) -> Rect {
        Rect {
            x1_lo: i as f64 * self.cell[0],
            x1_hi: (i + 1) as f64 * self.cell[0],
            x2_lo: j as f64 * self.cell[1],
            x2_hi: (j + 1) as f64 * self.cell[1],
        }
    }

    /// Bounding box of `omega_eps`, `None` when no cell fits.
    fn covered_box(&self) -> Option<Rect> {
        if self.n_cells() == 0 {
            return None;
        }
        Some(Rect {
            x1_lo: self.i_range.0 as f64 * self.cell[0],
            x1_hi: self.i_range.1 as f64 * self.cell[0],
            x2_lo: self.j_range.0 as f64 * self.cell[1],
            x2_hi: self.j_range.1 as f64 * self.cell[1],
        })
    }

    /// `|omega_eps|`.
    pub fn covered_area(&self) -> f64 {
        self.covered_box().map_or(0.0, |r| r.area())
    }

    /// `|Lambda_eps| = |omega| - |omega_eps|`.
    pub fn residual_area(&self) -> f64 {
        (self.omega.area() - self.covered_area()).max(0.0)
    }

    /// Rectangles tiling `Lambda_eps`.
    pub fn residual_rects(&self) -> Vec<Rect> {
        let o = self.omega;
        let Some(c) = self.covered_box() else {
            return vec![o];
        };
        let c = Rect {
            x1_lo: c.x1_lo.max(o.x1_lo),
            x1_hi: c.x1_hi.min(o.x1_hi),
            x2_lo: c.x2_lo.max(o.x2_lo),
            x2_hi: c.x2_hi.min(o.x2_hi),
        };
        [
            (o.x1_lo, c.x1_lo, o.x2_lo, o.x2_hi),
            (c.x1_hi, o.x1_hi, o.x2_lo, o.x2_hi),
            (c.x1_lo, c.x1_hi, o.x2_lo, c.x2_lo),
            (c.x1_lo, c.x1_hi, c.x2_hi, o.x2_hi),
        ]
        .into_iter()
        .filter(|r| r.1 - r.0 > 1e-14 && r.3 - r.2 > 1e-14)
        .map(|(a, b, c, d)| Rect {
            x1_lo: a,
            x1_hi: b,
            x2_lo: c,
            x2_hi: d,
        })
        .collect()
    }

    /// Cell index of `x`, `None` on `Lambda_eps`.
    pub fn locate(&self, x: [f64; 2]) -> Option<(i64, i64)> {
        let [l1, l2] = self.profile.periods();
        let (i, _) = cell_decompose(x[0], self.cell[0] / l1, l1);
        let (j, _) = cell_decompose(x[1], self.cell[1] / l2, l2);
        self.contains(i, j).then_some((i, j))
    }

    fn scales(&self) -> [f64; 3] {
        let [l1, l2] = self.profile.periods();
        [self.cell[0] / l1, self.cell[1] / l2, self.epsilon]
    }

    /// Physical point of cell `(i, j)` at cell coordinates `y`.
    fn physical(&self, i: i64, j: i64, y: [f64; 3]) -> [f64; 3] {
        let [l1, l2] = self.profile.periods();
        let s = self.scales();
        [
            s[0] * (i as f64 * l1 + y[0]),
            s[1] * (j as f64 * l2 + y[1]),
            s[2] * y[2],
        ]
    }

    fn check_in_cell(&self, y: [f64; 3]) -> Result<()> {
        let [l1, l2] = self.profile.periods();
        let top = self.profile.eval(y[0], y[1]);
        let tol = 1e-12 * top.max(1.0);
        let inside = (0.0..l1).contains(&y[0]) && (0.0..l2).contains(&y[1]) && y[2] >= -tol && y[2] <= top + tol;
        if !inside {
            return Err(Error::Domain(format!(
                "cell point ({}, {}, {}) is outside Y* (top {top})",
                y[0], y[1], y[2]
            )));
        }
        Ok(())
    }

    /// Quadrature nodes and weights of `Y*`: composite Gauss in `(y1, y2)`
    /// aligned with the profile's jumps, Gauss in `y3 = t g(y1, y2)`.
    pub fn y_rule(&self) -> Vec<([f64; 3], f64)> {
        let r = &self.resolution;
        let [l1, l2] = self.profile.periods();
        let q = Quadrature1D {
            order: r.y_order,
            panels: r.y_panels,
        };
        let (breaks1, breaks2) = self.profile.jump_lines();
        let (ts, tw) = gauss_legendre(r.t_order);
        let mut out = Vec::new();
        for (y1, w1) in q.rule(0.0, l1, &breaks1) {
            for &(y2, w2) in &q.rule(0.0, l2, &breaks2) {
                let top = self.profile.eval(y1, y2);
                for (t, wt) in ts.iter().zip(&tw) {
                    out.push(([y1, y2, 0.5 * (1.0 + t) * top], w1 * w2 * 0.5 * wt * top));
                }
            }
        }
        out
    }
}

/// `T_eps(phi)(x, y)`; zero on `Lambda_eps`.
pub fn unfold(phi: Field3<'_>, grid: &UnfoldGrid, x: [f64; 2], y: [f64; 3]) -> Result<f64> {
    grid.check_in_cell(y)?;
    Ok(match grid.locate(x) {
        Some((i, j)) => phi(grid.physical(i, j, y)),
        None => 0.0,
    })
}

/// `T_eps(phi)` on the quadrature nodes of `omega x Y*`. Because the
/// unfolded field is constant in `x` on each cell, every cell carries one
/// `x` node (its centre, weighted by its area); every rectangle of
/// `Lambda_eps` carries one node with value zero.
#[derive(Debug, Clone)]
pub struct UnfoldedField {
    pub x_nodes: Vec<([f64; 2], f64)>,
    pub y_nodes: Vec<([f64; 3], f64)>,
    /// Row-major in `(x node, y node)`.
    pub values: Vec<f64>,
}

impl UnfoldedField {
    pub fn new(phi: Field3<'_>, grid: &UnfoldGrid) -> Result<Self> {
        let y_nodes = grid.y_rule();
        let mut x_nodes = Vec::with_capacity(grid.n_cells() + 4);
        let mut values = Vec::with_capacity((grid.n_cells() + 4) * y_nodes.len());
        for (i, j) in grid.cells() {
            let r = grid.cell_rect(i, j);
            let centre = [0.5 * (r.x1_lo + r.x1_hi), 0.5 * (r.x2_lo + r.x2_hi)];
            x_nodes.push((centre, r.area()));
            for &(y, _) in &y_nodes {
                values.push(unfold(phi, grid, centre, y)?);
            }
        }
        for r in grid.residual_rects() {
            x_nodes.push(([0.5 * (r.x1_lo + r.x1_hi), 0.5 * (r.x2_lo + r.x2_hi)], r.area()));
            values.extend(std::iter::repeat_n(0.0, y_nodes.len()));
        }
        Ok(UnfoldedField { x_nodes, y_nodes, values })
    }

    /// `int_{omega x Y*} F(T_eps(phi))`.
    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        let ny = self.y_nodes.len();
        self.x_nodes
            .iter()
            .enumerate()
            .map(|(a, &(_, wx))| {
                let row = &self.values[a * ny..(a + 1) * ny];
                wx * row.iter().zip(&self.y_nodes).map(|(v, (_, wy))| wy * f(*v)).sum::<f64>()
            })
            .sum()
    }

    /// Largest value on the `Lambda_eps` nodes (zero by construction).
    pub fn max_on_residual(&self, grid: &UnfoldGrid) -> f64 {
        let ny = self.y_nodes.len();
        self.values[grid.n_cells() * ny..].iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// `int_{R^eps_0} F(phi) dx` by physical quadrature, cell by cell, with the
/// vertical direction scaled to `eps g(x1/eps^alpha, x2/eps^beta)`.
pub fn physical_integral(phi: Field3<'_>, grid: &UnfoldGrid, f: impl Fn(f64) -> f64) -> f64 {
    let r = &grid.resolution;
    let q = Quadrature1D {
        order: r.x_order,
        panels: r.x_panels,
    };
    let [l1, l2] = grid.profile.periods();
    let s = grid.scales();
    let (b1, b2) = grid.profile.jump_lines();
    let (ts, tw) = gauss_legendre(r.x_order);
    let mut total = 0.0;
    for (i, j) in grid.cells() {
        let c = grid.cell_rect(i, j);
        let breaks1: Vec<f64> = b1.iter().map(|b| s[0] * (i as f64 * l1 + b)).collect();
        let breaks2: Vec<f64> = b2.iter().map(|b| s[1] * (j as f64 * l2 + b)).collect();
        let rule2 = q.rule(c.x2_lo, c.x2_hi, &breaks2);
        for (x1, w1) in q.rule(c.x1_lo, c.x1_hi, &breaks1) {
            for &(x2, w2) in &rule2 {
                let h = grid.epsilon * grid.profile.eval(x1 / s[0], x2 / s[1]);
                for (t, wt) in ts.iter().zip(&tw) {
                    total += w1 * w2 * 0.5 * h * wt * f(phi([x1, x2, 0.5 * (1.0 + t) * h]));
                }
            }
        }
    }
    total
}

/// One numerical identity check, as written to the JSON report.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IdentityReport {
    pub identity: String,
    pub lhs: f64,
    pub rhs: f64,
    pub discrepancy: f64,
    pub epsilon: f64,
    pub resolution: UnfoldResolution,
}

fn relative(lhs: f64, rhs: f64) -> f64 {
    let scale = lhs.abs().max(rhs.abs());
    if scale == 0.0 {
        0.0
    } else {
        (lhs - rhs).abs() / scale
    }
}

/// `(1/(L1 L2)) int_{omega x Y*} T_eps(phi) = (1/eps) int_{R^eps_0} phi`.
pub fn check_integral_identity(phi: Field3<'_>, grid: &UnfoldGrid) -> Result<IdentityReport> {
    let [l1, l2] = grid.profile.periods();
    let lhs = UnfoldedField::new(phi, grid)?.integrate(|v| v) / (l1 * l2);
    let rhs = physical_integral(phi, grid, |v| v) / grid.epsilon;
    Ok(IdentityReport {
        identity: "integral".into(),
        lhs,
        rhs,
        discrepancy: relative(lhs, rhs),
        epsilon: grid.epsilon,
        resolution: grid.resolution,
    })
}

/// `|T_eps(phi)|_{L2(omega x Y*)} = (L1 L2 / eps)^(1/2) |phi|_{L2(R^eps_0)}`.
pub fn check_norm_identity(phi: Field3<'_>, grid: &UnfoldGrid) -> Result<IdentityReport> {
    let [l1, l2] = grid.profile.periods();
    let lhs = UnfoldedField::new(phi, grid)?.integrate(|v| v * v).max(0.0).sqrt();
    let rhs = (l1 * l2 / grid.epsilon * physical_integral(phi, grid, |v| v * v)).max(0.0).sqrt();
    Ok(IdentityReport {
        identity: "norm".into(),
        lhs,
        rhs,
        discrepancy: relative(lhs, rhs),
        epsilon: grid.epsilon,
        resolution: grid.resolution,
    })
}

/// For `phi(x) = psi(x1/eps^alpha, x2/eps^beta, x3/eps)` with `psi` periodic,
/// `T_eps(phi) = psi` on `omega_eps x Y*`. Reports the largest pointwise gap.
pub fn check_oscillating(psi: Field3<'_>, grid: &UnfoldGrid) -> Result<IdentityReport> {
    let s = grid.scales();
    let phi = |x: [f64; 3]| psi([x[0] / s[0], x[1] / s[1], x[2] / s[2]]);
    let field = UnfoldedField::new(&phi, grid)?;
    let ny = field.y_nodes.len();
    let mut gap = 0.0f64;
    let mut scale = 0.0f64;
    for a in 0..grid.n_cells() {
        for (b, &(y, _)) in field.y_nodes.iter().enumerate() {
            let want = psi(y);
            gap = gap.max((field.values[a * ny + b] - want).abs());
            scale = scale.max(want.abs());
        }
    }
    Ok(IdentityReport {
        identity: "oscillating".into(),
        lhs: gap,
        rhs: scale,
        discrepancy: gap,
        epsilon: grid.epsilon,
        resolution: grid.resolution,
    })
}

/// Largest residuals of `d/dy_k T_eps(phi) = s_k T_eps(d phi / dx_k)`,
/// `s = (eps^alpha, eps^beta, eps)`, with centred differences of step `h`
/// on a fixed set of interior cell points.
pub fn check_derivative_scaling(
    phi: Field3<'_>,
    gradient: &(dyn Fn([f64; 3]) -> [f64; 3] + Sync),
    grid: &UnfoldGrid,
    h: f64,
) -> Result<[f64; 3]> {
    let [l1, l2] = grid.profile.periods();
    if !(h > 0.0 && h < 0.2 * l1.min(l2)) {
        return Err(Error::InvalidInput(format!("finite-difference step {h} is out of range")));
    }
    // stencils stay below min g, so they never cross the top
    let floor = crate::profile::min_profile(&grid.profile, None);
    if h >= floor / 3.0 {
        return Err(Error::InvalidInput(format!(
            "finite-difference step {h} exceeds a third of min g = {floor}"
        )));
    }
    let s = grid.scales();
    let mut residual = [0.0f64; 3];
    let cells: Vec<(i64, i64)> = grid.cells().step_by(grid.n_cells().div_ceil(4).max(1)).collect();
    for &(i, j) in &cells {
        let r = grid.cell_rect(i, j);
        let x = [0.5 * (r.x1_lo + r.x1_hi), 0.5 * (r.x2_lo + r.x2_hi)];
        for a in 1..4 {
            for b in 1..4 {
                let (y1, y2) = (l1 * a as f64 / 4.0, l2 * b as f64 / 4.0);
                for c in 1..3 {
                    let y = [y1, y2, floor * c as f64 / 3.0];
                    let d = gradient(grid.physical(i, j, y));
                    for k in 0..3 {
                        let (mut up, mut down) = (y, y);
                        up[k] += h;
                        down[k] -= h;
                        let fd = (unfold(phi, grid, x, up)? - unfold(phi, grid, x, down)?) / (2.0 * h);
                        residual[k] = residual[k].max((fd - s[k] * d[k]).abs());
                    }
                }
            }
        }
    }
    Ok(residual)
}

/// `Pi_eps(phi)(x1, x2, x3) = phi(x1, x2, eps x3)` on `omega x (0, g0)`.
pub struct Rescaled<'a> {
    pub phi: Field3<'a>,
    pub epsilon: f64,
    pub g0: f64,
}

impl Rescaled<'_> {
    pub fn eval(&self, x: [f64; 3]) -> Result<f64> {
        let tol = 1e-12 * self.g0;
        if !(x[2] >= -tol && x[2] <= self.g0 + tol) {
            return Err(Error::Domain(format!("x3 = {} is outside (0, {})", x[2], self.g0)));
        }
        Ok((self.phi)([x[0], x[1], self.epsilon * x[2]]))
    }
}

pub fn rescale_pi<'a>(phi: Field3<'a>, epsilon: f64, g0: f64) -> Result<Rescaled<'a>> {
    if !(epsilon > 0.0 && epsilon < 1.0) || !(g0 > 0.0 && g0.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "rescaling needs eps in (0, 1) and g0 > 0, got {epsilon} and {g0}"
        )));
    }
    Ok(Rescaled { phi, epsilon, g0 })
}

fn box_integral(omega: &Rect, height: f64, order: usize, panels: usize, f: &dyn Fn([f64; 3]) -> Result<f64>) -> Result<f64> {
    let q = Quadrature1D { order, panels };
    let r1 = q.rule(omega.x1_lo, omega.x1_hi, &[]);
    let r2 = q.rule(omega.x2_lo, omega.x2_hi, &[]);
    let r3 = q.rule(0.0, height, &[]);
    let mut total = 0.0;
    for &(x1, w1) in &r1 {
        for &(x2, w2) in &r2 {
            for &(x3, w3) in &r3 {
                total += w1 * w2 * w3 * f([x1, x2, x3])?;
            }
        }
    }
    Ok(total)
}

/// `|Pi_eps phi|_{L2(omega x (0, g0))} = eps^(-1/2) |phi|_{L2(omega x (0, eps g0))}`,
/// each side by its own tensor Gauss rule.
pub fn check_pi_norm_identity(
    phi: Field3<'_>,
    omega: &Rect,
    epsilon: f64,
    g0: f64,
    resolution: &UnfoldResolution,
) -> Result<IdentityReport> {
    let pi = rescale_pi(phi, epsilon, g0)?;
    let lhs = box_integral(omega, g0, resolution.y_order, resolution.y_panels, &|x| {
        pi.eval(x).map(|v| v * v)
    })?
    .sqrt();
    let rhs = (box_integral(omega, epsilon * g0, resolution.x_order, resolution.x_panels, &|x| {
        let v = phi(x);
        Ok(v * v)
    })? / epsilon)
        .sqrt();
    Ok(IdentityReport {
        identity: "pi_norm".into(),
        lhs,
        rhs,
        discrepancy: relative(lhs, rhs),
        epsilon,
        resolution: *resolution,
    })
}

/// `V(x1, x2) = (1/(eps g0)) int_0^{eps g0} u(x1, x2, x3) dx3` by an
/// `order`-point Gauss rule.
pub fn vertical_average(u: &dyn Fn([f64; 3]) -> f64, epsilon: f64, g0: f64, x: [f64; 2], order: usize) -> Result<f64> {
    if !(epsilon > 0.0) || !(g0 > 0.0) || order == 0 {
        return Err(Error::InvalidInput(format!(
            "vertical average needs eps > 0, g0 > 0 and a positive order, got {epsilon}, {g0}, {order}"
        )));
    }
    let h = epsilon * g0;
    let (ts, ws) = gauss_legendre(order);
    Ok(ts
        .iter()
        .zip(&ws)
        .map(|(t, w)| 0.5 * w * u([x[0], x[1], 0.5 * (1.0 + t) * h]))
        .sum())
}

/// `|T_eps(phi) - phi|_{L2(omega x Y*)}` for a field on `omega`.
pub fn unfolding_defect(phi: &(dyn Fn([f64; 2]) -> f64 + Sync), grid: &UnfoldGrid) -> f64 {
    let r = &grid.resolution;
    let [l1, l2] = grid.profile.periods();
    let s = grid.scales();
    let q = Quadrature1D {
        order: r.y_order,
        panels: r.y_panels,
    };
    let (b1, b2) = grid.profile.jump_lines();
    // y3-independent integrand: integrate g over the (y1, y2) rule
    let mut y2d = Vec::new();
    for (y1, w1) in q.rule(0.0, l1, &b1) {
        for &(y2, w2) in &q.rule(0.0, l2, &b2) {
            y2d.push(([y1, y2], w1 * w2 * grid.profile.eval(y1, y2)));
        }
    }
    let measure: f64 = y2d.iter().map(|p| p.1).sum();
    let qx = Quadrature1D { order: 4, panels: 1 };
    let mut total = 0.0;
    for (i, j) in grid.cells() {
        let c = grid.cell_rect(i, j);
        let r2 = qx.rule(c.x2_lo, c.x2_hi, &[]);
        for (x1, w1) in qx.rule(c.x1_lo, c.x1_hi, &[]) {
            for &(x2, w2) in &r2 {
                let here = phi([x1, x2]);
                for &(y, wy) in &y2d {
                    let t = phi([s[0] * (i as f64 * l1 + y[0]), s[1] * (j as f64 * l2 + y[1])]);
                    total += w1 * w2 * wy * (t - here).powi(2);
                }
            }
        }
    }
    let qr = Quadrature1D {
        order: r.x_order,
        panels: r.x_panels,
    };
    for rect in grid.residual_rects() {
        let r2 = qr.rule(rect.x2_lo, rect.x2_hi, &[]);
        for (x1, w1) in qr.rule(rect.x1_lo, rect.x1_hi, &[]) {
            for &(x2, w2) in &r2 {
                total += w1 * w2 * measure * phi([x1, x2]).powi(2);
            }
        }
    }
    total.max(0.0).sqrt()
}

/// Tolerances of the unfolding suite.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct UnfoldTolerances {
    /// Integral identity for constants and polynomials.
    pub exact: f64,
    /// Integral identity for smooth non-polynomial fields.
    pub smooth: f64,
    pub norm: f64,
    pub pi_norm: f64,
    pub oscillating: f64,
    /// Allowed relative deviation of the step-halving ratio from 4.
    pub derivative_ratio: f64,
    pub h_fd: f64,
}

impl Default for UnfoldTolerances {
    fn default() -> Self {
        UnfoldTolerances {
            exact: 1e-10,
            smooth: 1e-6,
            norm: 1e-8,
            pi_norm: 1e-10,
            oscillating: 1e-10,
            derivative_ratio: 0.25,
            h_fd: 0.02,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckOutcome {
    pub field: String,
    #[serde(flatten)]
    pub report: IdentityReport,
    pub tolerance: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DefectRow {
    pub epsilon: f64,
    pub defect: f64,
    pub residual_area: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UnfoldSuiteReport {
    pub checks: Vec<CheckOutcome>,
    pub defect_sweep: Vec<DefectRow>,
    pub defect_monotone: bool,
    pub residual_area_monotone: bool,
    pub all_passed: bool,
}

/// The unfolding property suite over `epsilons`: identities for a fixed
/// family of closed-form fields, the `Pi_eps` norm identity and the
/// `|T_eps phi - phi|` sweep.
pub fn run_suite(
    profile: &ProfileFunction,
    alpha: f64,
    beta: f64,
    omega: Rect,
    epsilons: &[f64],
    resolution: UnfoldResolution,
    tol: &UnfoldTolerances,
) -> Result<UnfoldSuiteReport> {
    if epsilons.is_empty() {
        return Err(Error::InvalidInput("the epsilon list is empty".into()));
    }
    let [l1, l2] = profile.periods();
    let two_pi = 2.0 * std::f64::consts::PI;
    let one = |_: [f64; 3]| 1.0;
    let poly = |x: [f64; 3]| x[0] * x[0] * x[1] + 2.0 * x[2] - x[0] * x[2];
    let smooth = |x: [f64; 3]| (x[0] + 0.3 * x[1]).exp() * (1.0 + x[2]).cos() + (3.0 * x[1]).sin();
    let psi = move |y: [f64; 3]| (two_pi * y[0] / l1).cos() * (two_pi * y[1] / l2).sin() + y[2] * y[2];
    let wave = |x: [f64; 3]| x[0].sin() + (2.0 * x[1]).cos() + (3.0 * x[2]).sin();
    let wave_grad = |x: [f64; 3]| [x[0].cos(), -2.0 * (2.0 * x[1]).sin(), 3.0 * (3.0 * x[2]).cos()];
    let mixed = |x: [f64; 3]| x[0] * x[2];
    let lipschitz = |x: [f64; 2]| (std::f64::consts::PI * x[0]).sin() * (std::f64::consts::PI * x[1]).cos() + x[0];
    let g0 = crate::profile::min_profile(profile, None);

    let mut checks = Vec::new();
    let mut push = |field: &str, report: IdentityReport, tolerance: f64| {
        let passed = report.discrepancy.is_finite() && report.discrepancy <= tolerance;
        checks.push(CheckOutcome {
            field: field.into(),
            report,
            tolerance,
            passed,
        });
    };
    let mut defect_sweep = Vec::new();
    for &eps in epsilons {
        let grid = UnfoldGrid::new(eps, alpha, beta, profile.clone(), omega, resolution)?;
        let fields: [(&str, Field3<'_>, f64); 3] =
            [("one", &one, tol.exact), ("polynomial", &poly, tol.exact), ("smooth", &smooth, tol.smooth)];
        for (name, f, t) in fields {
            push(name, check_integral_identity(f, &grid)?, t);
        }
        for (name, f) in [("polynomial", &poly as Field3<'_>), ("smooth", &smooth)] {
            push(name, check_norm_identity(f, &grid)?, tol.norm);
        }
        push("oscillating", check_oscillating(&psi, &grid)?, tol.oscillating);

        let coarse = check_derivative_scaling(&wave, &wave_grad, &grid, tol.h_fd)?;
        let fine = check_derivative_scaling(&wave, &wave_grad, &grid, 0.5 * tol.h_fd)?;
        for k in 0..3 {
            // residuals at rounding level carry no rate
            let exact = coarse[k] < 1e-13;
            let ratio = if exact { 4.0 } else { coarse[k] / fine[k] };
            push(
                "wave",
                IdentityReport {
                    identity: format!("derivative_y{}", k + 1),
                    lhs: coarse[k],
                    rhs: fine[k],
                    discrepancy: (ratio / 4.0 - 1.0).abs(),
                    epsilon: eps,
                    resolution,
                },
                tol.derivative_ratio,
            );
        }
        push(
            "x1_x3",
            check_pi_norm_identity(&mixed, &omega, eps, g0, &resolution)?,
            tol.pi_norm,
        );
        defect_sweep.push(DefectRow {
            epsilon: eps,
            defect: unfolding_defect(&lipschitz, &grid),
            residual_area: grid.residual_area(),
        });
    }
    let mut order: Vec<&DefectRow> = defect_sweep.iter().collect();
    order.sort_by(|a, b| b.epsilon.total_cmp(&a.epsilon));
    let defect_monotone = order.windows(2).all(|w| w[1].defect < w[0].defect);
    let residual_area_monotone = order.windows(2).all(|w| w[1].residual_area <= w[0].residual_area + 1e-12);
    let all_passed = checks.iter().all(|c| c.passed) && defect_monotone;
    Ok(UnfoldSuiteReport {
        checks,
        defect_sweep,
        defect_monotone,
        residual_area_monotone,
        all_passed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(eps: f64) -> UnfoldGrid {
        UnfoldGrid::new(
            eps,
            0.5,
            0.75,
            ProfileFunction::cos_cos(2.0, 1.0).unwrap(),
            Rect::unit(),
            UnfoldResolution::default(),
        )
        .unwrap()
    }

    #[test]
    fn decompose_examples() {
        let (i, f) = cell_decompose(0.35, 0.1, 1.0);
        assert_eq!(i, 3);
        assert!((f - 0.5).abs() < 1e-12);
        assert_eq!(cell_decompose(0.4, 0.1, 1.0), (4, 0.0));
        let (i, f) = cell_decompose(-0.05, 0.1, 1.0);
        assert_eq!(i, -1);
        assert!((f - 0.5).abs() < 1e-12);
    }

    #[test]
    fn cells_lie_inside_omega() {
        let g = grid(0.1);
        for (i, j) in g.cells() {
            let r = g.cell_rect(i, j);
            assert!(r.x1_lo >= -1e-12 && r.x1_hi <= 1.0 + 1e-12);
            assert!(r.x2_lo >= -1e-12 && r.x2_hi <= 1.0 + 1e-12);
        }
        let lambda: f64 = g.residual_rects().iter().map(|r| r.area()).sum();
        assert!((lambda - g.residual_area()).abs() < 1e-12);
        assert!(g.residual_area() >= 0.0);
    }

    #[test]
    fn unfolding_a_constant_gives_the_constant() {
        let g = grid(0.1);
        let one = |_: [f64; 3]| 1.0;
        let field = UnfoldedField::new(&one, &g).unwrap();
        let ny = field.y_nodes.len();
        assert!(field.values[..g.n_cells() * ny].iter().all(|&v| v == 1.0));
        assert_eq!(field.max_on_residual(&g), 0.0);
    }

    #[test]
    fn unfolding_x1_stays_within_a_cell_width() {
        let g = grid(0.05);
        let x1 = |x: [f64; 3]| x[0];
        for &x in &[[0.3, 0.4], [0.61, 0.2]] {
            let v = unfold(&x1, &g, x, [0.7, 0.2, 0.5]).unwrap();
            assert!((v - x[0]).abs() <= g.cell[0]);
        }
    }

    #[test]
    fn points_above_the_profile_are_rejected() {
        let g = grid(0.1);
        let one = |_: [f64; 3]| 1.0;
        assert!(matches!(unfold(&one, &g, [0.5, 0.5], [0.0, 0.0, 3.5]), Err(Error::Domain(_))));
    }

    #[test]
    fn integral_identity_for_one_equals_int_g() {
        let g = grid(0.1);
        let one = |_: [f64; 3]| 1.0;
        let r = check_integral_identity(&one, &g).unwrap();
        // both sides are int_{omega_eps} g(x1/eps^alpha, x2/eps^beta) / eps * eps
        let expect = g.covered_area() * 2.0;
        assert!(r.discrepancy < 1e-10, "{r:?}");
        assert!((r.lhs - expect).abs() < 1e-10 * expect);
    }

    #[test]
    fn zero_field_gives_zero() {
        let g = grid(0.1);
        let zero = |_: [f64; 3]| 0.0;
        let r = check_integral_identity(&zero, &g).unwrap();
        assert_eq!((r.lhs, r.rhs, r.discrepancy), (0.0, 0.0, 0.0));
    }

    #[test]
    fn derivative_residual_is_exact_for_linear_fields() {
        let g = grid(0.1);
        let lin = |x: [f64; 3]| 2.0 * x[0] - x[1] + 3.0 * x[2];
        let grad = |_: [f64; 3]| [2.0, -1.0, 3.0];
        let r = check_derivative_scaling(&lin, &grad, &g, 0.01).unwrap();
        assert!(r.iter().all(|&v| v < 1e-12), "{r:?}");
        let c = |_: [f64; 3]| 4.0;
        let zero = |_: [f64; 3]| [0.0; 3];
        assert_eq!(check_derivative_scaling(&c, &zero, &g, 0.01).unwrap(), [0.0; 3]);
    }

    #[test]
    fn derivative_residual_halves_quadratically() {
        let g = grid(0.1);
        let f = |x: [f64; 3]| x[0].sin();
        let grad = |x: [f64; 3]| [x[0].cos(), 0.0, 0.0];
        let a = check_derivative_scaling(&f, &grad, &g, 0.04).unwrap()[0];
        let b = check_derivative_scaling(&f, &grad, &g, 0.02).unwrap()[0];
        assert!((a / b - 4.0).abs() < 0.2, "ratio {}", a / b);
    }

    #[test]
    fn rescaling_examples() {
        let flat = |x: [f64; 3]| x[0] + 2.0 * x[1];
        let pi = rescale_pi(&flat, 0.1, 1.0).unwrap();
        assert_eq!(pi.eval([0.3, 0.2, 0.7]).unwrap(), flat([0.3, 0.2, 0.0]));
        let x3 = |x: [f64; 3]| x[2];
        let pi = rescale_pi(&x3, 0.1, 1.0).unwrap();
        assert!((pi.eval([0.0, 0.0, 0.5]).unwrap() - 0.05).abs() < 1e-15);
        assert!(pi.eval([0.0, 0.0, 1.5]).is_err());
    }

    #[test]
    fn vertical_average_examples() {
        let flat = |x: [f64; 3]| x[0] * x[1];
        assert!((vertical_average(&flat, 0.1, 2.0, [0.3, 0.5], 4).unwrap() - 0.15).abs() < 1e-15);
        let x3 = |x: [f64; 3]| x[2];
        assert!((vertical_average(&x3, 0.1, 2.0, [0.3, 0.5], 4).unwrap() - 0.1).abs() < 1e-15);
    }

    #[test]
    fn residual_area_shrinks() {
        let areas: Vec<f64> = [0.2, 0.1, 0.05].iter().map(|&e| grid(e).residual_area()).collect();
        assert!(areas[0] >= areas[1] && areas[1] >= areas[2], "{areas:?}");
    }
}
