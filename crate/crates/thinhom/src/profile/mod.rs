//! Periodic boundary profiles `g(y1, y2)` and the scalar functionals of `g`
//! that enter the effective coefficients: slice integrals, cell means,
//! harmonic factors and minima.
//!
//! Averages `<.>` are always integrals divided by the measure of the domain.

pub mod quadrature;

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use quadrature::{gauss_legendre, Quadrature1D, Quadrature2D, TriangleRule};

use crate::{Error, Result};

/// Smoothness class of a profile.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProfileKind {
    Smooth,
    PiecewiseConstant,
}

/// One Fourier mode `amplitude * cos(2 pi (k1 y1 / L1 + k2 y2 / L2) + phase)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FourierMode {
    pub amplitude: f64,
    pub k1: i32,
    pub k2: i32,
    pub phase: f64,
}

/// Piecewise-constant table on a tensor grid of jump lines.
#[derive(Debug, Clone, PartialEq)]
pub struct StepTable {
    /// Panel edges in `y1`, starting at 0 and ending at `L1`.
    pub edges1: Vec<f64>,
    /// Panel edges in `y2`, starting at 0 and ending at `L2`.
    pub edges2: Vec<f64>,
    /// Values, row-major in `(i1, i2)`.
    pub values: Vec<f64>,
}

impl StepTable {
    fn n2(&self) -> usize {
        self.edges2.len() - 1
    }

    pub fn value(&self, i1: usize, i2: usize) -> f64 {
        self.values[i1 * self.n2() + i2]
    }

    /// Half-open panel lookup on a reduced coordinate in `[0, L)`.
    fn panel(edges: &[f64], t: f64) -> usize {
        let n = edges.len() - 1;
        // first edge strictly greater than t, minus one
        let idx = edges.partition_point(|&e| e <= t);
        idx.saturating_sub(1).min(n - 1)
    }

    fn eval(&self, t1: f64, t2: f64) -> f64 {
        self.value(Self::panel(&self.edges1, t1), Self::panel(&self.edges2, t2))
    }
}

#[derive(Clone)]
enum Shape {
    Constant(f64),
    CosCos { mean: f64, amplitude: f64 },
    SinY1 { mean: f64, amplitude: f64 },
    SinY2 { mean: f64, amplitude: f64 },
    Separable { a1: f64, b1: f64, a2: f64, b2: f64 },
    Fourier { mean: f64, modes: Vec<FourierMode> },
    Steps(StepTable),
    Custom(Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>),
}

/// A strictly positive, bounded, doubly periodic boundary profile.
#[derive(Clone)]
pub struct ProfileFunction {
    name: String,
    periods: [f64; 2],
    shape: Shape,
    declared_bounds: Option<(f64, f64)>,
}

impl fmt::Debug for ProfileFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ProfileFunction")
            .field("name", &self.name)
            .field("periods", &self.periods)
            .field("kind", &self.kind())
            .finish()
    }
}

/// Catalog identifiers understood by [`ProfileFunction::from_catalog`].
pub const CATALOG: &[(&str, &str, &[f64])] = &[
    ("constant", "g = c; params [c]", &[1.0]),
    (
        "cos_cos",
        "g = m + a cos(2 pi y1/L1) cos(2 pi y2/L2); params [m, a]",
        &[2.0, 1.0],
    ),
    ("sin_y1", "g = m + a sin(2 pi y1/L1); params [m, a]", &[2.0, 1.0]),
    ("sin_y2", "g = m + a sin(2 pi y2/L2); params [m, a]", &[2.0, 1.0]),
    (
        "separable",
        "g = (a1 + b1 sin(2 pi y1/L1)) (a2 + b2 sin(2 pi y2/L2)); params [a1, b1, a2, b2]",
        &[2.0, 0.5, 1.5, 0.5],
    ),
    (
        "fourier",
        "g = m + sum_k a_k cos(2 pi (k1 y1/L1 + k2 y2/L2) + phi_k); params [m, (a, k1, k2, phi)*]",
        &[2.0, 0.5, 1.0, 1.0, 0.0],
    ),
    (
        "checkerboard",
        "two-valued checkerboard on half periods; params [a, b]",
        &[1.0, 3.0],
    ),
    (
        "stripes_y1",
        "a on y1 < L1/2, b otherwise; params [a, b]",
        &[1.0, 3.0],
    ),
    (
        "stripes_y2",
        "a on y2 < L2/2, b otherwise; params [a, b]",
        &[1.0, 3.0],
    ),
];

impl ProfileFunction {
    fn build(name: impl Into<String>, periods: [f64; 2], shape: Shape) -> Result<Self> {
        if !(periods[0] > 0.0 && periods[1] > 0.0 && periods.iter().all(|p| p.is_finite())) {
            return Err(Error::InvalidProfile(format!(
                "periods must be positive, got {periods:?}"
            )));
        }
        let g = ProfileFunction {
            name: name.into(),
            periods,
            shape,
            declared_bounds: None,
        };
        g.check_positive()?;
        Ok(g)
    }

    pub fn constant(c: f64) -> Result<Self> {
        Self::build(format!("constant({c})"), [1.0, 1.0], Shape::Constant(c))
    }

    /// `mean + amplitude * cos(2 pi y1) cos(2 pi y2)` on the unit cell.
    pub fn cos_cos(mean: f64, amplitude: f64) -> Result<Self> {
        Self::build(
            format!("cos_cos({mean},{amplitude})"),
            [1.0, 1.0],
            Shape::CosCos { mean, amplitude },
        )
    }

    pub fn sin_y1(mean: f64, amplitude: f64) -> Result<Self> {
        Self::build(
            format!("sin_y1({mean},{amplitude})"),
            [1.0, 1.0],
            Shape::SinY1 { mean, amplitude },
        )
    }

    pub fn sin_y2(mean: f64, amplitude: f64) -> Result<Self> {
        Self::build(
            format!("sin_y2({mean},{amplitude})"),
            [1.0, 1.0],
            Shape::SinY2 { mean, amplitude },
        )
    }

    pub fn separable(a1: f64, b1: f64, a2: f64, b2: f64) -> Result<Self> {
        Self::build(
            format!("separable({a1},{b1},{a2},{b2})"),
            [1.0, 1.0],
            Shape::Separable { a1, b1, a2, b2 },
        )
    }

    pub fn fourier(mean: f64, modes: Vec<FourierMode>) -> Result<Self> {
        Self::build(
            format!("fourier({mean};{} modes)", modes.len()),
            [1.0, 1.0],
            Shape::Fourier { mean, modes },
        )
    }

    /// Random smooth Fourier profile with mean `mean` and modes of wave
    /// numbers up to 2, total amplitude at most `0.6 * mean`. Deterministic
    /// in `seed`.
    pub fn random_fourier(seed: u64, n_modes: usize, mean: f64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut raw: Vec<FourierMode> = Vec::with_capacity(n_modes);
        while raw.len() < n_modes {
            let k1: i32 = rng.random_range(-2..=2);
            let k2: i32 = rng.random_range(0..=2);
            if k1 == 0 && k2 == 0 {
                continue;
            }
            raw.push(FourierMode {
                amplitude: rng.random_range(0.1..1.0),
                k1,
                k2,
                phase: rng.random_range(0.0..(2.0 * PI)),
            });
        }
        let budget: f64 = rng.random_range(0.2..0.6) * mean;
        let total: f64 = raw.iter().map(|m| m.amplitude).sum();
        for m in &mut raw {
            m.amplitude *= budget / total;
        }
        let mut g = Self::fourier(mean, raw)?;
        g.name = format!("random_fourier(seed={seed},modes={n_modes},mean={mean})");
        Ok(g)
    }

    /// Two-valued checkerboard: `a` on the squares where `y1 < L1/2` and
    /// `y2 < L2/2` or both are in the upper half, `b` elsewhere.
    pub fn checkerboard(a: f64, b: f64) -> Result<Self> {
        let table = StepTable {
            edges1: vec![0.0, 0.5, 1.0],
            edges2: vec![0.0, 0.5, 1.0],
            values: vec![a, b, b, a],
        };
        Self::build(format!("checkerboard({a},{b})"), [1.0, 1.0], Shape::Steps(table))
    }

    /// Stripes depending on `y1` only.
    pub fn stripes_y1(a: f64, b: f64) -> Result<Self> {
        let table = StepTable {
            edges1: vec![0.0, 0.5, 1.0],
            edges2: vec![0.0, 1.0],
            values: vec![a, b],
        };
        Self::build(format!("stripes_y1({a},{b})"), [1.0, 1.0], Shape::Steps(table))
    }

    /// Stripes depending on `y2` only.
    pub fn stripes_y2(a: f64, b: f64) -> Result<Self> {
        let table = StepTable {
            edges1: vec![0.0, 1.0],
            edges2: vec![0.0, 0.5, 1.0],
            values: vec![a, b],
        };
        Self::build(format!("stripes_y2({a},{b})"), [1.0, 1.0], Shape::Steps(table))
    }

    /// Piecewise-constant table from rows `(y1_lo, y1_hi, y2_lo, y2_hi, value)`
    /// that tile one period cell exactly.
    pub fn from_table(periods: [f64; 2], rows: &[[f64; 5]]) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::InvalidProfile("empty piecewise table".into()));
        }
        let collect = |lo: usize, hi: usize, period: f64| -> Result<Vec<f64>> {
            let mut e: Vec<f64> = vec![0.0, period];
            for r in rows {
                if !(r[lo] >= 0.0 && r[hi] <= period && r[lo] < r[hi]) {
                    return Err(Error::InvalidProfile(format!(
                        "table row {r:?} leaves the period cell or is empty"
                    )));
                }
                e.push(r[lo]);
                e.push(r[hi]);
            }
            e.sort_by(|a, b| a.total_cmp(b));
            e.dedup();
            Ok(e)
        };
        let edges1 = collect(0, 1, periods[0])?;
        let edges2 = collect(2, 3, periods[1])?;
        let mut values = Vec::with_capacity((edges1.len() - 1) * (edges2.len() - 1));
        for w1 in edges1.windows(2) {
            for w2 in edges2.windows(2) {
                let c1 = 0.5 * (w1[0] + w1[1]);
                let c2 = 0.5 * (w2[0] + w2[1]);
                let hits: Vec<&[f64; 5]> = rows
                    .iter()
                    .filter(|r| r[0] <= c1 && c1 < r[1] && r[2] <= c2 && c2 < r[3])
                    .collect();
                if hits.len() != 1 {
                    return Err(Error::InvalidProfile(format!(
                        "table covers point ({c1}, {c2}) {} times; rows must tile the cell exactly",
                        hits.len()
                    )));
                }
                values.push(hits[0][4]);
            }
        }
        Self::build(
            "table",
            periods,
            Shape::Steps(StepTable {
                edges1,
                edges2,
                values,
            }),
        )
    }

    /// Arbitrary smooth profile from a closure.
    pub fn custom(
        name: impl Into<String>,
        periods: [f64; 2],
        f: impl Fn(f64, f64) -> f64 + Send + Sync + 'static,
    ) -> Result<Self> {
        Self::build(name, periods, Shape::Custom(Arc::new(f)))
    }

    /// Profile from a catalog identifier and parameter list.
    pub fn from_catalog(name: &str, params: &[f64]) -> Result<Self> {
        let want = |n: usize| -> Result<()> {
            if params.len() != n {
                Err(Error::InvalidProfile(format!(
                    "profile '{name}' takes {n} parameters, got {}",
                    params.len()
                )))
            } else {
                Ok(())
            }
        };
        match name {
            "constant" => {
                want(1)?;
                Self::constant(params[0])
            }
            "cos_cos" => {
                want(2)?;
                Self::cos_cos(params[0], params[1])
            }
            "sin_y1" => {
                want(2)?;
                Self::sin_y1(params[0], params[1])
            }
            "sin_y2" => {
                want(2)?;
                Self::sin_y2(params[0], params[1])
            }
            "separable" => {
                want(4)?;
                Self::separable(params[0], params[1], params[2], params[3])
            }
            "fourier" => {
                if params.is_empty() || (params.len() - 1) % 4 != 0 {
                    return Err(Error::InvalidProfile(
                        "profile 'fourier' takes [mean, (amplitude, k1, k2, phase)*]".into(),
                    ));
                }
                let modes = params[1..]
                    .chunks(4)
                    .map(|c| {
                        if c[1].fract() != 0.0 || c[2].fract() != 0.0 {
                            return Err(Error::InvalidProfile(format!(
                                "wave numbers must be integers, got ({}, {})",
                                c[1], c[2]
                            )));
                        }
                        Ok(FourierMode {
                            amplitude: c[0],
                            k1: c[1] as i32,
                            k2: c[2] as i32,
                            phase: c[3],
                        })
                    })
                    .collect::<Result<Vec<_>>>()?;
                Self::fourier(params[0], modes)
            }
            "checkerboard" => {
                want(2)?;
                Self::checkerboard(params[0], params[1])
            }
            "stripes_y1" => {
                want(2)?;
                Self::stripes_y1(params[0], params[1])
            }
            "stripes_y2" => {
                want(2)?;
                Self::stripes_y2(params[0], params[1])
            }
            other => Err(Error::InvalidProfile(format!(
                "unknown catalog profile '{other}'"
            ))),
        }
    }

    /// Attach declared bounds `(g0, g1)`; checked against a dense scan.
    pub fn with_declared_bounds(mut self, g0: f64, g1: f64) -> Result<Self> {
        let (lo, hi) = self.scan_bounds(128);
        if lo < g0 - 1e-12 || hi > g1 + 1e-12 || g0 <= 0.0 {
            return Err(Error::InvalidProfile(format!(
                "declared bounds ({g0}, {g1}) violated: sampled range ({lo}, {hi})"
            )));
        }
        self.declared_bounds = Some((g0, g1));
        Ok(self)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn periods(&self) -> [f64; 2] {
        self.periods
    }

    pub fn declared_bounds(&self) -> Option<(f64, f64)> {
        self.declared_bounds
    }

    pub fn kind(&self) -> ProfileKind {
        match self.shape {
            Shape::Steps(_) => ProfileKind::PiecewiseConstant,
            _ => ProfileKind::Smooth,
        }
    }

    pub fn step_table(&self) -> Option<&StepTable> {
        match &self.shape {
            Shape::Steps(t) => Some(t),
            _ => None,
        }
    }

    /// Interior jump ordinates in `[0, L1)` and `[0, L2)` (empty for smooth kinds).
    pub fn jump_lines(&self) -> (Vec<f64>, Vec<f64>) {
        match &self.shape {
            Shape::Steps(t) => (
                t.edges1[..t.edges1.len() - 1].to_vec(),
                t.edges2[..t.edges2.len() - 1].to_vec(),
            ),
            _ => (Vec::new(), Vec::new()),
        }
    }

    /// True when `g` does not depend on `y2`.
    pub fn is_independent_of_y2(&self) -> bool {
        match &self.shape {
            Shape::Constant(_) | Shape::SinY1 { .. } => true,
            Shape::CosCos { amplitude, .. } => *amplitude == 0.0,
            Shape::SinY2 { amplitude, .. } => *amplitude == 0.0,
            Shape::Separable { b2, .. } => *b2 == 0.0,
            Shape::Fourier { modes, .. } => modes.iter().all(|m| m.k2 == 0 || m.amplitude == 0.0),
            Shape::Steps(t) => {
                let n2 = t.n2();
                t.values.chunks(n2).all(|row| row.iter().all(|&v| v == row[0]))
            }
            Shape::Custom(_) => false,
        }
    }

    /// True when `g` does not depend on `y1`.
    pub fn is_independent_of_y1(&self) -> bool {
        match &self.shape {
            Shape::Constant(_) | Shape::SinY2 { .. } => true,
            Shape::CosCos { amplitude, .. } => *amplitude == 0.0,
            Shape::SinY1 { amplitude, .. } => *amplitude == 0.0,
            Shape::Separable { b1, .. } => *b1 == 0.0,
            Shape::Fourier { modes, .. } => modes.iter().all(|m| m.k1 == 0 || m.amplitude == 0.0),
            Shape::Steps(t) => {
                let n2 = t.n2();
                let first = &t.values[..n2];
                t.values.chunks(n2).all(|row| row == first)
            }
            Shape::Custom(_) => false,
        }
    }

    /// Value at an arbitrary point; arguments are reduced to the period cell.
    pub fn eval(&self, y1: f64, y2: f64) -> f64 {
        let t1 = y1.rem_euclid(self.periods[0]);
        let t2 = y2.rem_euclid(self.periods[1]);
        let (l1, l2) = (self.periods[0], self.periods[1]);
        match &self.shape {
            Shape::Constant(c) => *c,
            Shape::CosCos { mean, amplitude } => {
                mean + amplitude * (2.0 * PI * t1 / l1).cos() * (2.0 * PI * t2 / l2).cos()
            }
            Shape::SinY1 { mean, amplitude } => mean + amplitude * (2.0 * PI * t1 / l1).sin(),
            Shape::SinY2 { mean, amplitude } => mean + amplitude * (2.0 * PI * t2 / l2).sin(),
            Shape::Separable { a1, b1, a2, b2 } => {
                (a1 + b1 * (2.0 * PI * t1 / l1).sin()) * (a2 + b2 * (2.0 * PI * t2 / l2).sin())
            }
            Shape::Fourier { mean, modes } => {
                mean + modes
                    .iter()
                    .map(|m| {
                        m.amplitude
                            * (2.0 * PI * (m.k1 as f64 * t1 / l1 + m.k2 as f64 * t2 / l2)
                                + m.phase)
                                .cos()
                    })
                    .sum::<f64>()
            }
            Shape::Steps(t) => t.eval(t1, t2),
            Shape::Custom(f) => f(t1, t2),
        }
    }

    /// Partial derivative in `y2`. Zero away from the jumps of a step
    /// table; central differences for custom profiles.
    pub fn d_y2(&self, y1: f64, y2: f64) -> f64 {
        let t1 = y1.rem_euclid(self.periods[0]);
        let t2 = y2.rem_euclid(self.periods[1]);
        let (l1, l2) = (self.periods[0], self.periods[1]);
        let k2 = 2.0 * PI / l2;
        match &self.shape {
            Shape::Constant(_) | Shape::SinY1 { .. } | Shape::Steps(_) => 0.0,
            Shape::CosCos { amplitude, .. } => {
                -amplitude * k2 * (2.0 * PI * t1 / l1).cos() * (k2 * t2).sin()
            }
            Shape::SinY2 { amplitude, .. } => amplitude * k2 * (k2 * t2).cos(),
            Shape::Separable { a1, b1, b2, .. } => {
                (a1 + b1 * (2.0 * PI * t1 / l1).sin()) * b2 * k2 * (k2 * t2).cos()
            }
            Shape::Fourier { modes, .. } => -modes
                .iter()
                .map(|m| {
                    m.amplitude
                        * m.k2 as f64
                        * k2
                        * (2.0 * PI * (m.k1 as f64 * t1 / l1 + m.k2 as f64 * t2 / l2) + m.phase)
                            .sin()
                })
                .sum::<f64>(),
            Shape::Custom(_) => {
                let h = 1e-4 * l2;
                let at = |d: f64| self.eval(t1, t2 + d);
                (8.0 * (at(h) - at(-h)) - (at(2.0 * h) - at(-2.0 * h))) / (12.0 * h)
            }
        }
    }

    /// Checked evaluation: non-positive or non-finite values are an error.
    pub fn eval_checked(&self, y1: f64, y2: f64) -> Result<f64> {
        let v = self.eval(y1, y2);
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::InvalidProfile(format!(
                "{} evaluates to {v} at ({y1}, {y2})",
                self.name
            )));
        }
        Ok(v)
    }

    /// Sample points of one period: an `n x n` grid plus jump-panel midpoints.
    fn sample_points(&self, n: usize) -> Vec<(f64, f64)> {
        let mut pts = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                pts.push((
                    self.periods[0] * i as f64 / n as f64,
                    self.periods[1] * j as f64 / n as f64,
                ));
            }
        }
        if let Shape::Steps(t) = &self.shape {
            for w1 in t.edges1.windows(2) {
                for w2 in t.edges2.windows(2) {
                    pts.push((0.5 * (w1[0] + w1[1]), 0.5 * (w2[0] + w2[1])));
                }
            }
        }
        pts
    }

    fn scan_bounds(&self, n: usize) -> (f64, f64) {
        self.sample_points(n)
            .into_iter()
            .map(|(a, b)| self.eval(a, b))
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
                (lo.min(v), hi.max(v))
            })
    }

    fn check_positive(&self) -> Result<()> {
        for (a, b) in self.sample_points(128) {
            self.eval_checked(a, b)?;
        }
        Ok(())
    }

    /// Restriction `t -> g(y1, t)` at fixed `y1`.
    pub fn slice_y2(&self, y1: f64) -> impl Fn(f64) -> f64 + '_ {
        move |t| self.eval(y1, t)
    }

    /// Panel breaks of `g(y1, .)` (jump lines in `y2`).
    pub fn breaks_y2(&self) -> Vec<f64> {
        self.jump_lines().1
    }

    pub fn breaks_y1(&self) -> Vec<f64> {
        self.jump_lines().0
    }

    /// Exact piece structure of `g(y1, .)` for piecewise-constant kinds:
    /// `(y2_lo, y2_hi, value)` triples.
    pub fn slice_pieces_y2(&self, y1: f64) -> Option<Vec<(f64, f64, f64)>> {
        let t = self.step_table()?;
        let i1 = StepTable::panel(&t.edges1, y1.rem_euclid(self.periods[0]));
        Some(
            t.edges2
                .windows(2)
                .enumerate()
                .map(|(i2, w)| (w[0], w[1], t.value(i1, i2)))
                .collect(),
        )
    }
}

/// `bar_g(y1) = int_0^L2 g(y1, y2) dy2` (an integral, not an average).
pub fn bar_g(g: &ProfileFunction, y1: f64, quad: &Quadrature1D) -> Result<f64> {
    if !y1.is_finite() {
        return Err(Error::InvalidInput(format!("y1 must be finite, got {y1}")));
    }
    let l2 = g.periods()[1];
    let mut acc = 0.0;
    for (t, w) in quad.rule(0.0, l2, &g.breaks_y2()) {
        acc += w * g.eval_checked(y1, t)?;
    }
    Ok(acc)
}

/// Slice average `<g(y1, .)>_(0, L2)`.
pub fn slice_mean(g: &ProfileFunction, y1: f64, quad: &Quadrature1D) -> Result<f64> {
    Ok(bar_g(g, y1, quad)? / g.periods()[1])
}

/// Cell average `<g>_(0,L1)x(0,L2)`.
pub fn mean_g(g: &ProfileFunction, quad: &Quadrature2D) -> Result<f64> {
    let [l1, l2] = g.periods();
    let r1 = quad.axis1.rule(0.0, l1, &g.breaks_y1());
    let r2 = quad.axis2.rule(0.0, l2, &g.breaks_y2());
    let mut acc = 0.0;
    for &(a, wa) in &r1 {
        let mut inner = 0.0;
        for &(b, wb) in &r2 {
            inner += wb * g.eval_checked(a, b)?;
        }
        acc += wa * inner;
    }
    Ok(acc / (l1 * l2))
}

/// `1 / (<h> <1/h>)` over `[0, period)`, which lies in `(0, 1]`.
pub fn harmonic_factor(
    h: impl Fn(f64) -> f64,
    period: f64,
    breaks: &[f64],
    quad: &Quadrature1D,
) -> Result<f64> {
    let mut mean = 0.0;
    let mut mean_inv = 0.0;
    for (t, w) in quad.rule(0.0, period, breaks) {
        let v = h(t);
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::InvalidProfile(format!(
                "harmonic factor needs a positive function, got {v} at {t}"
            )));
        }
        mean += w * v;
        mean_inv += w / v;
    }
    mean /= period;
    mean_inv /= period;
    Ok((1.0 / (mean * mean_inv)).min(1.0))
}

/// `harmonic_factor` of `bar_g` along `y1`, the weak-direction coefficient in `x1`.
pub fn harmonic_factor_bar_g(g: &ProfileFunction, quad: &Quadrature2D) -> Result<f64> {
    let breaks = g.breaks_y1();
    let l1 = g.periods()[0];
    // precompute to surface profile errors before the closure
    let rule = quad.axis1.rule(0.0, l1, &breaks);
    let mut mean = 0.0;
    let mut mean_inv = 0.0;
    for (t, w) in rule {
        let v = bar_g(g, t, &quad.axis2)?;
        mean += w * v;
        mean_inv += w / v;
    }
    mean /= l1;
    mean_inv /= l1;
    Ok((1.0 / (mean * mean_inv)).min(1.0))
}

/// Minimum of `g` over the period cell, or over `y2` at a fixed `y1`.
pub fn min_profile(g: &ProfileFunction, fixed_y1: Option<f64>) -> f64 {
    extremum(g, fixed_y1, 1.0)
}

/// Maximum of `g` over the period cell, or over `y2` at a fixed `y1`.
pub fn max_profile(g: &ProfileFunction, fixed_y1: Option<f64>) -> f64 {
    -extremum(g, fixed_y1, -1.0)
}

/// Minimum of `sign * g`; dense scan plus pattern-search refinement for
/// smooth kinds, piece enumeration for piecewise-constant kinds.
fn extremum(g: &ProfileFunction, fixed_y1: Option<f64>, sign: f64) -> f64 {
    let f = |a: f64, b: f64| sign * g.eval(a, b);
    if let Some(t) = g.step_table() {
        return match fixed_y1 {
            Some(y1) => g
                .slice_pieces_y2(y1)
                .unwrap_or_default()
                .iter()
                .map(|p| sign * p.2)
                .fold(f64::INFINITY, f64::min),
            None => t.values.iter().map(|v| sign * v).fold(f64::INFINITY, f64::min),
        };
    }
    let [l1, l2] = g.periods();
    match fixed_y1 {
        Some(y1) => {
            let n = 1024;
            let (mut best_t, mut best) = (0.0, f64::INFINITY);
            for j in 0..n {
                let t = l2 * j as f64 / n as f64;
                let v = f(y1, t);
                if v < best {
                    best = v;
                    best_t = t;
                }
            }
            let h = l2 / n as f64;
            let (_, v) = golden_min(|t| f(y1, t), best_t - h, best_t + h);
            v.min(best)
        }
        None => {
            let n = 256;
            let mut best = (0.0, 0.0, f64::INFINITY);
            for i in 0..n {
                for j in 0..n {
                    let a = l1 * i as f64 / n as f64;
                    let b = l2 * j as f64 / n as f64;
                    let v = f(a, b);
                    if v < best.2 {
                        best = (a, b, v);
                    }
                }
            }
            pattern_search(&f, best, l1.min(l2) / n as f64)
        }
    }
}

fn golden_min(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> (f64, f64) {
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while (b - a).abs() > 1e-13 {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d);
        }
    }
    let x = 0.5 * (a + b);
    (x, f(x).min(fc).min(fd))
}

fn pattern_search(f: &impl Fn(f64, f64) -> f64, start: (f64, f64, f64), step: f64) -> f64 {
    let (mut a, mut b, mut best) = start;
    let mut h = step;
    while h > 1e-13 {
        let mut improved = false;
        for (da, db) in [(h, 0.0), (-h, 0.0), (0.0, h), (0.0, -h)] {
            let v = f(a + da, b + db);
            if v < best {
                best = v;
                a += da;
                b += db;
                improved = true;
                break;
            }
        }
        if !improved {
            h *= 0.5;
        }
    }
    best
}

/// Global bounds `(g0, g1)`.
pub fn bounds(g: &ProfileFunction) -> (f64, f64) {
    (min_profile(g, None), max_profile(g, None))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q1() -> Quadrature1D {
        Quadrature1D::default()
    }

    fn q2() -> Quadrature2D {
        Quadrature2D::default()
    }

    #[test]
    fn bar_g_examples() {
        let g = ProfileFunction::constant(2.0).unwrap();
        assert!((bar_g(&g, 0.7, &q1()).unwrap() - 2.0).abs() < 1e-14);
        let g = ProfileFunction::cos_cos(2.0, 1.0).unwrap();
        assert!((bar_g(&g, 0.3, &q1()).unwrap() - 2.0).abs() < 1e-13);
        let g = ProfileFunction::stripes_y2(1.0, 3.0).unwrap();
        assert!((bar_g(&g, 0.3, &q1()).unwrap() - 2.0).abs() < 1e-14);
    }

    #[test]
    fn mean_g_examples() {
        for (g, want) in [
            (ProfileFunction::constant(1.7).unwrap(), 1.7),
            (ProfileFunction::cos_cos(2.0, 1.0).unwrap(), 2.0),
            (ProfileFunction::stripes_y2(1.0, 3.0).unwrap(), 2.0),
            (ProfileFunction::checkerboard(1.0, 3.0).unwrap(), 2.0),
        ] {
            assert!((mean_g(&g, &q2()).unwrap() - want).abs() < 1e-13, "{g:?}");
        }
    }

    #[test]
    fn harmonic_factor_examples() {
        let q = q1();
        assert!((harmonic_factor(|_| 3.0, 1.0, &[], &q).unwrap() - 1.0).abs() < 1e-14);
        let two = |t: f64| if t < 0.5 { 1.0 } else { 3.0 };
        assert!((harmonic_factor(two, 1.0, &[0.5], &q).unwrap() - 0.75).abs() < 1e-14);
        let s = |t: f64| 2.0 + (2.0 * PI * t).sin();
        let v = harmonic_factor(s, 1.0, &[], &q).unwrap();
        assert!((v - 3f64.sqrt() / 2.0).abs() < 1e-12, "{v}");
    }

    #[test]
    fn harmonic_factor_rejects_non_positive() {
        let q = q1();
        assert!(matches!(
            harmonic_factor(|t| t - 0.5, 1.0, &[], &q),
            Err(Error::InvalidProfile(_))
        ));
    }

    #[test]
    fn min_profile_examples() {
        assert_eq!(min_profile(&ProfileFunction::constant(1.3).unwrap(), None), 1.3);
        let g = ProfileFunction::cos_cos(2.0, 1.0).unwrap();
        assert!((min_profile(&g, None) - 1.0).abs() < 1e-12);
        assert!((max_profile(&g, None) - 3.0).abs() < 1e-12);
        // at y1 = 0.1 the slice is 2 + cos(0.2 pi) cos(2 pi y2)
        let c = (0.2 * PI).cos();
        assert!((min_profile(&g, Some(0.1)) - (2.0 - c)).abs() < 1e-12);
        let g = ProfileFunction::stripes_y2(1.0, 3.0).unwrap();
        assert_eq!(min_profile(&g, None), 1.0);
        assert_eq!(min_profile(&g, Some(0.4)), 1.0);
    }

    #[test]
    fn non_positive_profile_is_rejected() {
        assert!(ProfileFunction::cos_cos(1.0, 1.5).is_err());
        assert!(ProfileFunction::constant(0.0).is_err());
        assert!(ProfileFunction::from_catalog("nope", &[]).is_err());
    }

    #[test]
    fn table_must_tile_the_cell() {
        let ok = ProfileFunction::from_table(
            [1.0, 2.0],
            &[[0.0, 0.5, 0.0, 2.0, 1.0], [0.5, 1.0, 0.0, 2.0, 2.0]],
        )
        .unwrap();
        assert_eq!(ok.eval(0.75, 1.9), 2.0);
        assert_eq!(ok.eval(0.5, 0.0), 2.0);
        let gap = ProfileFunction::from_table([1.0, 1.0], &[[0.0, 0.5, 0.0, 1.0, 1.0]]);
        assert!(gap.is_err());
        let overlap = ProfileFunction::from_table(
            [1.0, 1.0],
            &[[0.0, 1.0, 0.0, 1.0, 1.0], [0.0, 0.5, 0.0, 1.0, 2.0]],
        );
        assert!(overlap.is_err());
    }

    #[test]
    fn periodicity_is_exact_on_dyadic_samples() {
        let catalog = catalog_for_tests();
        for g in &catalog {
            let [l1, l2] = g.periods();
            for i in 0..16 {
                for j in 0..16 {
                    let (a, b) = (i as f64 / 16.0, j as f64 / 16.0);
                    assert_eq!(g.eval(a + l1, b), g.eval(a, b), "{g:?}");
                    assert_eq!(g.eval(a, b + l2), g.eval(a, b), "{g:?}");
                }
            }
        }
    }

    #[test]
    fn mean_lies_between_bounds_and_equals_them_for_constants() {
        for g in catalog_for_tests() {
            let (g0, g1) = bounds(&g);
            let m = mean_g(&g, &q2()).unwrap();
            assert!(g0 <= m + 1e-14 && m <= g1 + 1e-14, "{g:?}");
            if g0 == g1 {
                assert!((m - g0).abs() < 1e-14);
            } else {
                assert!(g0 < m && m < g1);
            }
        }
    }

    #[test]
    fn quadrature_doubling_is_stable_for_smooth_profiles() {
        for g in catalog_for_tests() {
            let a = mean_g(&g, &q2()).unwrap();
            let b = mean_g(&g, &q2().doubled()).unwrap();
            assert!((a - b).abs() < 1e-10, "{g:?}");
            let a = bar_g(&g, 0.23, &q1()).unwrap();
            let b = bar_g(&g, 0.23, &q1().doubled()).unwrap();
            assert!((a - b).abs() < 1e-10, "{g:?}");
        }
    }

    #[test]
    fn jump_aligned_quadrature_is_exact_for_tables() {
        let g = ProfileFunction::from_table(
            [1.0, 1.0],
            &[
                [0.0, 0.3, 0.0, 0.7, 1.25],
                [0.3, 1.0, 0.0, 0.7, 2.5],
                [0.0, 1.0, 0.7, 1.0, 4.0],
            ],
        )
        .unwrap();
        let exact = 0.3 * 0.7 * 1.25 + 0.7 * 0.7 * 2.5 + 0.3 * 4.0;
        let coarse = Quadrature2D::uniform(1, 1).unwrap();
        assert!((mean_g(&g, &coarse).unwrap() - exact).abs() < 1e-14);
        assert!((bar_g(&g, 0.1, &Quadrature1D::new(1, 1).unwrap()).unwrap() - (0.7 * 1.25 + 1.2)).abs() < 1e-14);
    }

    #[test]
    fn random_fourier_is_deterministic_and_positive() {
        let a = ProfileFunction::random_fourier(7, 4, 2.0).unwrap();
        let b = ProfileFunction::random_fourier(7, 4, 2.0).unwrap();
        assert_eq!(a.eval(0.123, 0.456), b.eval(0.123, 0.456));
        assert!(min_profile(&a, None) >= 0.8 - 1e-12);
    }

    pub(crate) fn catalog_for_tests() -> Vec<ProfileFunction> {
        vec![
            ProfileFunction::constant(1.5).unwrap(),
            ProfileFunction::cos_cos(2.0, 1.0).unwrap(),
            ProfileFunction::sin_y1(2.0, 1.0).unwrap(),
            ProfileFunction::sin_y2(2.0, 1.0).unwrap(),
            ProfileFunction::separable(2.0, 0.5, 1.5, 0.5).unwrap(),
            ProfileFunction::checkerboard(1.0, 3.0).unwrap(),
            ProfileFunction::stripes_y1(1.0, 3.0).unwrap(),
            ProfileFunction::stripes_y2(1.0, 3.0).unwrap(),
            ProfileFunction::random_fourier(3, 3, 2.0).unwrap(),
        ]
    }
}
