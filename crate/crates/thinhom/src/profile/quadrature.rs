//! Composite Gauss–Legendre rules.

use crate::{Error, Result};

/// Gauss–Legendre nodes and weights on `[-1, 1]` with `n` points.
///
/// Newton iteration on the three-term recurrence; exact for polynomials of
/// degree `2n - 1`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "Gauss rule needs at least one point");
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Composite Gauss rule on one axis: `panels` equal panels per period, each
/// carrying an `order`-point Gauss rule. Extra break points (jump lines of a
/// piecewise-constant profile) split panels so no panel straddles a jump.
#[derive(Debug, Clone, PartialEq)]
pub struct Quadrature1D {
    pub order: usize,
    pub panels: usize,
}

impl Default for Quadrature1D {
    fn default() -> Self {
        Quadrature1D {
            order: 5,
            panels: 32,
        }
    }
}

impl Quadrature1D {
    pub fn new(order: usize, panels: usize) -> Result<Self> {
        if order == 0 || panels == 0 {
            return Err(Error::InvalidInput(format!(
                "quadrature needs order >= 1 and panels >= 1 (got {order}, {panels})"
            )));
        }
        Ok(Quadrature1D { order, panels })
    }

    /// Nodes and weights on `[a, b]` with panels aligned to `breaks`
    /// (break points outside `(a, b)` are ignored).
    pub fn rule(&self, a: f64, b: f64, breaks: &[f64]) -> Vec<(f64, f64)> {
        let edges = panel_edges(a, b, self.panels, breaks);
        let (xs, ws) = gauss_legendre(self.order);
        let mut out = Vec::with_capacity((edges.len() - 1) * self.order);
        for pair in edges.windows(2) {
            let (lo, hi) = (pair[0], pair[1]);
            let half = 0.5 * (hi - lo);
            let mid = 0.5 * (hi + lo);
            for (x, w) in xs.iter().zip(&ws) {
                out.push((mid + half * x, half * w));
            }
        }
        out
    }

    pub fn integrate(&self, a: f64, b: f64, breaks: &[f64], f: impl Fn(f64) -> f64) -> f64 {
        self.rule(a, b, breaks).iter().map(|&(x, w)| w * f(x)).sum()
    }

    pub fn doubled(&self) -> Self {
        Quadrature1D {
            order: self.order,
            panels: 2 * self.panels,
        }
    }
}

/// Sorted panel edges: `panels` uniform pieces of `[a, b]` merged with the
/// interior break points. Edges closer than `1e-13 * (b - a)` are merged.
pub fn panel_edges(a: f64, b: f64, panels: usize, breaks: &[f64]) -> Vec<f64> {
    let len = b - a;
    let mut edges: Vec<f64> = (0..=panels)
        .map(|i| a + len * i as f64 / panels as f64)
        .collect();
    edges.extend(breaks.iter().copied().filter(|&t| t > a && t < b));
    edges.sort_by(|x, y| x.total_cmp(y));
    let tol = 1e-13 * len.abs().max(1.0);
    let mut merged: Vec<f64> = Vec::with_capacity(edges.len());
    for e in edges {
        match merged.last() {
            Some(&last) if (e - last).abs() <= tol => {}
            _ => merged.push(e),
        }
    }
    // keep the exact end point
    if let Some(last) = merged.last_mut() {
        *last = b;
    }
    merged
}

/// Tensor-product composite rule over a period cell.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Quadrature2D {
    pub axis1: Quadrature1D,
    pub axis2: Quadrature1D,
}

impl Quadrature2D {
    pub fn uniform(order: usize, panels: usize) -> Result<Self> {
        let q = Quadrature1D::new(order, panels)?;
        Ok(Quadrature2D {
            axis1: q.clone(),
            axis2: q,
        })
    }

    pub fn doubled(&self) -> Self {
        Quadrature2D {
            axis1: self.axis1.doubled(),
            axis2: self.axis2.doubled(),
        }
    }
}

/// Points of the symmetric triangle rules used by the element kernels,
/// given as barycentric coordinates and weights summing to one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TriangleRule {
    /// One-point centroid rule, exact for degree 1.
    Centroid,
    /// Edge-midpoint rule, exact for degree 2.
    #[default]
    EdgeMidpoints,
    /// Seven-point rule with positive weights, exact for degree 5.
    Degree5,
}

impl TriangleRule {
    pub fn points(&self) -> Vec<([f64; 3], f64)> {
        match self {
            TriangleRule::Centroid => vec![([1.0 / 3.0; 3], 1.0)],
            TriangleRule::EdgeMidpoints => vec![
                ([0.5, 0.5, 0.0], 1.0 / 3.0),
                ([0.0, 0.5, 0.5], 1.0 / 3.0),
                ([0.5, 0.0, 0.5], 1.0 / 3.0),
            ],
            TriangleRule::Degree5 => {
                let s15 = 15f64.sqrt();
                let a1 = (6.0 - s15) / 21.0;
                let b1 = (9.0 + 2.0 * s15) / 21.0;
                let a2 = (6.0 + s15) / 21.0;
                let b2 = (9.0 - 2.0 * s15) / 21.0;
                let w1 = (155.0 - s15) / 1200.0;
                let w2 = (155.0 + s15) / 1200.0;
                vec![
                    ([1.0 / 3.0; 3], 9.0 / 40.0),
                    ([a1, a1, b1], w1),
                    ([a1, b1, a1], w1),
                    ([b1, a1, a1], w1),
                    ([a2, a2, b2], w2),
                    ([a2, b2, a2], w2),
                    ([b2, a2, a2], w2),
                ]
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_integrates_monomials_up_to_degree_2n_minus_1() {
        for n in 1..=10 {
            let (x, w) = gauss_legendre(n);
            for deg in 0..(2 * n) {
                let approx: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(deg as i32)).sum();
                let exact = if deg % 2 == 1 { 0.0 } else { 2.0 / (deg as f64 + 1.0) };
                assert!((approx - exact).abs() < 1e-13, "n={n} deg={deg}: {approx} vs {exact}");
            }
        }
    }

    #[test]
    fn composite_rule_is_exact_on_each_panel() {
        let q = Quadrature1D::new(3, 4).unwrap();
        // degree-5 polynomial on [0, 2]
        let v = q.integrate(0.0, 2.0, &[], |t| t.powi(5) - 2.0 * t * t + 1.0);
        let exact = 64.0 / 6.0 - 16.0 / 3.0 + 2.0;
        assert!((v - exact).abs() < 1e-12);
    }

    #[test]
    fn breaks_align_panels_and_make_step_functions_exact() {
        let q = Quadrature1D::new(2, 3).unwrap();
        let step = |t: f64| if t < 0.37 { 1.0 } else { 5.0 };
        let v = q.integrate(0.0, 1.0, &[0.37], step);
        assert!((v - (0.37 + 5.0 * 0.63)).abs() < 1e-15);
    }

    #[test]
    fn triangle_rules_reach_their_degree() {
        // integrate x^a y^b over the reference triangle: a! b! / (a + b + 2)!
        let fact = |n: u32| (1..=n).map(f64::from).product::<f64>();
        for (rule, deg) in [
            (TriangleRule::Centroid, 1),
            (TriangleRule::EdgeMidpoints, 2),
            (TriangleRule::Degree5, 5),
        ] {
            for a in 0..=deg {
                for b in 0..=(deg - a) {
                    let approx: f64 = rule
                        .points()
                        .iter()
                        .map(|(l, w)| 0.5 * w * l[1].powi(a as i32) * l[2].powi(b as i32))
                        .sum();
                    let exact = fact(a) * fact(b) / fact(a + b + 2);
                    assert!((approx - exact).abs() < 1e-15, "{rule:?} x^{a} y^{b}");
                }
            }
        }
    }
}
