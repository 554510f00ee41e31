//! Classification of the oscillation exponents `(alpha, beta)` and
//! assembly of the effective coefficients of the limit problem.
//!
//! Every regime is written in the weighted weak form
//! `int a11 u_x1 phi_x1 + a22 u_x2 phi_x2 + m u phi = int m f_bar phi`.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::cellsolver::{
    q2_per_x1, q2_resonant, solve_cell_constrained, CellResolution, ResonantCoefficient, WeakCorrector,
};
use crate::profile::{
    bar_g, harmonic_factor, harmonic_factor_bar_g, mean_g, min_profile, slice_mean, ProfileFunction,
    ProfileKind, Quadrature1D, Quadrature2D,
};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum RegimeClass {
    #[serde(rename = "A0_WeakBeta")]
    A0WeakBeta,
    #[serde(rename = "A0_ResonantBeta")]
    A0ResonantBeta,
    #[serde(rename = "A0_StrongBeta")]
    A0StrongBeta,
    WeakWeak,
    ResonantWeak,
    ResonantStrong,
    WeakStrong,
    StrongStrong,
}

impl RegimeClass {
    pub const ALL: [RegimeClass; 8] = [
        RegimeClass::A0WeakBeta,
        RegimeClass::A0ResonantBeta,
        RegimeClass::A0StrongBeta,
        RegimeClass::WeakWeak,
        RegimeClass::ResonantWeak,
        RegimeClass::ResonantStrong,
        RegimeClass::WeakStrong,
        RegimeClass::StrongStrong,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            RegimeClass::A0WeakBeta => "A0_WeakBeta",
            RegimeClass::A0ResonantBeta => "A0_ResonantBeta",
            RegimeClass::A0StrongBeta => "A0_StrongBeta",
            RegimeClass::WeakWeak => "WeakWeak",
            RegimeClass::ResonantWeak => "ResonantWeak",
            RegimeClass::ResonantStrong => "ResonantStrong",
            RegimeClass::WeakStrong => "WeakStrong",
            RegimeClass::StrongStrong => "StrongStrong",
        }
    }

    pub fn needs_cell_solve(&self) -> bool {
        matches!(
            self,
            RegimeClass::A0ResonantBeta | RegimeClass::ResonantWeak | RegimeClass::ResonantStrong
        )
    }

    /// A representative `(alpha, beta)` inside the class.
    pub fn sample_exponents(&self) -> (f64, f64) {
        match self {
            RegimeClass::A0WeakBeta => (0.0, 0.5),
            RegimeClass::A0ResonantBeta => (0.0, 1.0),
            RegimeClass::A0StrongBeta => (0.0, 1.5),
            RegimeClass::WeakWeak => (0.5, 0.75),
            RegimeClass::ResonantWeak => (0.5, 1.0),
            RegimeClass::ResonantStrong => (1.0, 1.5),
            RegimeClass::WeakStrong => (0.5, 1.5),
            RegimeClass::StrongStrong => (1.2, 1.5),
        }
    }
}

impl fmt::Display for RegimeClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Oscillation exponents with their class.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Regime {
    pub alpha: f64,
    pub beta: f64,
    pub class: RegimeClass,
}

impl Regime {
    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        Ok(Regime {
            alpha,
            beta,
            class: classify(alpha, beta)?,
        })
    }
}

/// The supported class of `(alpha, beta)`. Comparisons with 0 and 1 are exact.
pub fn classify(alpha: f64, beta: f64) -> Result<RegimeClass> {
    if !(alpha.is_finite() && beta.is_finite()) || alpha < 0.0 || beta <= 0.0 {
        return Err(Error::InvalidInput(format!(
            "exponents need alpha >= 0 and beta > 0, got alpha = {alpha}, beta = {beta}"
        )));
    }
    if alpha == beta {
        return Err(Error::UnsupportedRegime {
            alpha,
            beta,
            reason: "alpha = beta has no effective problem; alpha < beta is required".into(),
        });
    }
    if beta < alpha {
        return Err(Error::UnsupportedRegime {
            alpha,
            beta,
            reason: "alpha < beta is required".into(),
        });
    }
    let class = if alpha == 0.0 {
        if beta < 1.0 {
            RegimeClass::A0WeakBeta
        } else if beta == 1.0 {
            RegimeClass::A0ResonantBeta
        } else {
            RegimeClass::A0StrongBeta
        }
    } else if alpha < 1.0 {
        if beta < 1.0 {
            RegimeClass::WeakWeak
        } else if beta == 1.0 {
            RegimeClass::ResonantWeak
        } else {
            RegimeClass::WeakStrong
        }
    } else if alpha == 1.0 {
        RegimeClass::ResonantStrong
    } else {
        RegimeClass::StrongStrong
    };
    Ok(class)
}

/// Periodic table of values along `x1` with its interpolation rule.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PeriodicTable {
    pub period: f64,
    /// Sample abscissae; uniform for smooth tables, piece midpoints for steps.
    pub abscissae: Vec<f64>,
    pub values: Vec<f64>,
    /// Piece edges for piecewise-constant tables.
    pub edges: Option<Vec<f64>>,
}

impl PeriodicTable {
    /// Periodic Catmull-Rom interpolation on the uniform grid, or piece lookup.
    pub fn eval(&self, x: f64) -> f64 {
        let t = x.rem_euclid(self.period);
        if let Some(edges) = &self.edges {
            let k = edges.partition_point(|&e| e <= t).saturating_sub(1);
            return self.values[k.min(self.values.len() - 1)];
        }
        let n = self.values.len();
        let s = t / self.period * n as f64;
        let i = (s.floor() as usize).min(n - 1);
        let u = s - i as f64;
        let p = |k: isize| self.values[(i as isize + k).rem_euclid(n as isize) as usize];
        let (p0, p1, p2, p3) = (p(-1), p(0), p(1), p(2));
        p1 + 0.5
            * u
            * (p2 - p0 + u * (2.0 * p0 - 5.0 * p1 + 4.0 * p2 - p3 + u * (3.0 * (p1 - p2) + p3 - p0)))
    }
}

/// A coefficient of the limit problem as a function of `(x1, x2)`.
#[derive(Clone)]
pub enum CoefficientField {
    Constant(f64),
    /// Depends on `x1` only (the `alpha = 0` regimes).
    AlongX1 {
        description: String,
        f: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    },
}

impl fmt::Debug for CoefficientField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CoefficientField::Constant(c) => write!(f, "Constant({c})"),
            CoefficientField::AlongX1 { description, .. } => write!(f, "AlongX1({description})"),
        }
    }
}

impl CoefficientField {
    pub fn along_x1(description: impl Into<String>, f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        CoefficientField::AlongX1 {
            description: description.into(),
            f: Arc::new(f),
        }
    }

    pub fn eval(&self, x1: f64, _x2: f64) -> f64 {
        match self {
            CoefficientField::Constant(c) => *c,
            CoefficientField::AlongX1 { f, .. } => f(x1),
        }
    }

    pub fn constant_value(&self) -> Option<f64> {
        match self {
            CoefficientField::Constant(c) => Some(*c),
            CoefficientField::AlongX1 { .. } => None,
        }
    }

    pub fn describe(&self) -> String {
        match self {
            CoefficientField::Constant(c) => format!("constant {c}"),
            CoefficientField::AlongX1 { description, .. } => description.clone(),
        }
    }
}

/// How a coefficient was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Origin {
    ClosedForm,
    CellSolve,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Provenance {
    pub regime: RegimeClass,
    pub a11: Origin,
    pub a22: Origin,
    pub m: Origin,
    pub notes: Vec<String>,
}

/// Rule turning the user's `x3`-independent source `f` into `f_bar`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RhsTransform {
    /// `f_bar = f`, cell average of a `y`-independent source.
    CellAverage,
    /// `f_bar = F / <g>` with `F` the limit of `(1/eps) int f dx3`,
    /// which is `<g> f` for `x3`-independent sources.
    VerticalIntegralOverMean { mean_g: f64 },
}

impl RhsTransform {
    pub fn apply(&self, f: f64) -> f64 {
        match self {
            RhsTransform::CellAverage => f,
            RhsTransform::VerticalIntegralOverMean { mean_g } => mean_g * f / mean_g,
        }
    }
}

/// Coefficients of the limit problem with their provenance.
#[derive(Debug, Clone)]
pub struct EffectiveCoefficients {
    pub a11: CoefficientField,
    pub a22: CoefficientField,
    pub m: CoefficientField,
    pub rhs_transform: RhsTransform,
    pub provenance: Provenance,
    /// Slice-family provenance of a resonant `q2`.
    pub resonant: Option<ResonantCoefficient>,
    /// Tabulated `q2(x1)` of the `alpha = 0`, `beta = 1` regime.
    pub q2_table: Option<PeriodicTable>,
}

/// Serializable digest of [`EffectiveCoefficients`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoefficientSummary {
    pub regime: RegimeClass,
    pub q1: Option<f64>,
    pub q2: Option<f64>,
    pub a11: String,
    pub a22: String,
    pub m: String,
    pub rhs_transform: RhsTransform,
    pub provenance: Provenance,
}

impl EffectiveCoefficients {
    pub fn regime(&self) -> RegimeClass {
        self.provenance.regime
    }

    /// `q1 = a11 / m` and `q2 = a22 / m` when all three are constant.
    pub fn q1(&self) -> Option<f64> {
        Some(self.a11.constant_value()? / self.m.constant_value()?)
    }

    pub fn q2(&self) -> Option<f64> {
        Some(self.a22.constant_value()? / self.m.constant_value()?)
    }

    pub fn summary(&self) -> CoefficientSummary {
        CoefficientSummary {
            regime: self.regime(),
            q1: self.q1(),
            q2: self.q2(),
            a11: self.a11.describe(),
            a22: self.a22.describe(),
            m: self.m.describe(),
            rhs_transform: self.rhs_transform,
            provenance: self.provenance.clone(),
        }
    }

    /// Fails unless `a11`, `a22` and `m` are positive at the given points.
    pub fn check_positive(&self, points: &[[f64; 2]]) -> Result<()> {
        for p in points {
            for field in [&self.a11, &self.a22, &self.m] {
                let v = field.eval(p[0], p[1]);
                if !(v > 0.0 && v.is_finite()) {
                    return Err(Error::NonPositiveCoefficient {
                        value: v,
                        x1: p[0],
                        x2: p[1],
                    });
                }
            }
        }
        Ok(())
    }
}

fn strong_ratio(g: &ProfileFunction, quad: &Quadrature2D) -> Result<f64> {
    Ok(min_profile(g, None) / mean_g(g, quad)?)
}

/// `(1/L1) int 1 / (<g> <1/g(y1, .)>) dy1`, the weak `x2` coefficient.
pub fn weak_weak_q2(g: &ProfileFunction, quad: &Quadrature2D) -> Result<f64> {
    let [l1, l2] = g.periods();
    let mean = mean_g(g, quad)?;
    let mut acc = 0.0;
    for (y1, w) in quad.axis1.rule(0.0, l1, &g.breaks_y1()) {
        let mut inv = 0.0;
        for (y2, w2) in quad.axis2.rule(0.0, l2, &g.breaks_y2()) {
            inv += w2 / g.eval_checked(y1, y2)?;
        }
        acc += w / (mean * inv / l2);
    }
    Ok(acc / l1)
}

/// Slice harmonic factor `1 / (<g(x1, .)> <1/g(x1, .)>)`.
fn slice_harmonic(g: &ProfileFunction, x1: f64, quad: &Quadrature1D) -> f64 {
    harmonic_factor(|t| g.eval(x1, t), g.periods()[1], &g.breaks_y2(), quad).unwrap_or(f64::NAN)
}

fn provenance(regime: RegimeClass, a11: Origin, a22: Origin) -> Provenance {
    Provenance {
        regime,
        a11,
        a22,
        m: Origin::ClosedForm,
        notes: Vec::new(),
    }
}

/// Coefficients of the regimes with closed forms.
pub fn closed_form_coeffs(
    class: RegimeClass,
    g: &ProfileFunction,
    quad: &Quadrature2D,
) -> Result<EffectiveCoefficients> {
    if class.needs_cell_solve() {
        return Err(Error::NeedsCellSolve(class));
    }
    let closed = |a11, a22, m, rhs| EffectiveCoefficients {
        a11,
        a22,
        m,
        rhs_transform: rhs,
        provenance: provenance(class, Origin::ClosedForm, Origin::ClosedForm),
        resonant: None,
        q2_table: None,
    };
    let c = match class {
        RegimeClass::A0WeakBeta | RegimeClass::A0StrongBeta => {
            let strong = class == RegimeClass::A0StrongBeta;
            if g.is_independent_of_y1() {
                let m = slice_mean(g, 0.0, &quad.axis2)?;
                let a22 = if strong {
                    min_profile(g, Some(0.0))
                } else {
                    m * slice_harmonic(g, 0.0, &quad.axis2)
                };
                closed(
                    CoefficientField::Constant(m),
                    CoefficientField::Constant(a22),
                    CoefficientField::Constant(m),
                    RhsTransform::CellAverage,
                )
            } else {
                let q = quad.axis2.clone();
                let gm = g.clone();
                let m = move |x1: f64| slice_mean(&gm, x1, &q).unwrap_or(f64::NAN);
                let m = Arc::new(m);
                let (m1, m2, m3) = (Arc::clone(&m), Arc::clone(&m), Arc::clone(&m));
                let a22 = if strong {
                    let gs = g.clone();
                    CoefficientField::along_x1("g0(x1) = min over y2 of g(x1, y2)", move |x1| {
                        min_profile(&gs, Some(x1))
                    })
                } else {
                    let gs = g.clone();
                    let q = quad.axis2.clone();
                    CoefficientField::along_x1("<g(x1,.)> / <1/g(x1,.)> harmonic slice factor", move |x1| {
                        m3(x1) * slice_harmonic(&gs, x1, &q)
                    })
                };
                closed(
                    CoefficientField::along_x1("<g(x1,.)> slice mean", move |x1| m1(x1)),
                    a22,
                    CoefficientField::along_x1("<g(x1,.)> slice mean", move |x1| m2(x1)),
                    RhsTransform::CellAverage,
                )
            }
        }
        RegimeClass::WeakWeak => closed(
            CoefficientField::Constant(harmonic_factor_bar_g(g, quad)?),
            CoefficientField::Constant(weak_weak_q2(g, quad)?),
            CoefficientField::Constant(1.0),
            RhsTransform::CellAverage,
        ),
        RegimeClass::WeakStrong => closed(
            CoefficientField::Constant(harmonic_factor_bar_g(g, quad)?),
            CoefficientField::Constant(strong_ratio(g, quad)?),
            CoefficientField::Constant(1.0),
            RhsTransform::CellAverage,
        ),
        RegimeClass::StrongStrong => {
            let s = strong_ratio(g, quad)?;
            closed(
                CoefficientField::Constant(s),
                CoefficientField::Constant(s),
                CoefficientField::Constant(1.0),
                RhsTransform::VerticalIntegralOverMean {
                    mean_g: mean_g(g, quad)?,
                },
            )
        }
        _ => unreachable!("cell-solve regimes return early"),
    };
    Ok(c)
}

/// Settings of the `x1` tabulation of `q2(x1)` for the `alpha = 0`, `beta = 1` regime.
pub const Q2_TABLE_POINTS: usize = 32;

fn bracket_check(name: &str, value: f64, lower: f64, upper: f64) -> Result<()> {
    if value < lower - 1e-6 || value > upper + 1e-6 {
        return Err(Error::CheckFailed(format!(
            "{name} = {value} outside the bracket [{lower}, {upper}]"
        )));
    }
    Ok(())
}

/// Runs `solve` at `res`; on a bracket failure repeats once on a refined mesh.
fn with_refinement<T>(
    res: &CellResolution,
    solve: impl Fn(&CellResolution) -> Result<T>,
    check: impl Fn(&T) -> Result<()>,
) -> Result<T> {
    let first = solve(res)?;
    match check(&first) {
        Ok(()) => Ok(first),
        Err(_) => {
            let second = solve(&res.refined())?;
            check(&second)?;
            Ok(second)
        }
    }
}

/// `q2(x1)` sampled over one period: per piece for stepped profiles,
/// uniformly otherwise.
pub fn tabulate_q2(g: &ProfileFunction, res: &CellResolution, points: usize) -> Result<PeriodicTable> {
    use rayon::prelude::*;
    let l1 = g.periods()[0];
    let (abscissae, edges) = match g.kind() {
        ProfileKind::PiecewiseConstant => {
            let mut e: Vec<f64> = vec![0.0];
            e.extend(g.breaks_y1());
            e.push(l1);
            e.dedup();
            let mids: Vec<f64> = e.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
            (mids, Some(e))
        }
        ProfileKind::Smooth => ((0..points).map(|i| l1 * i as f64 / points as f64).collect(), None),
    };
    let quad = Quadrature1D::default();
    let values = abscissae
        .par_iter()
        .map(|&x1| {
            let mean = slice_mean(g, x1, &quad)?;
            let lower = min_profile(g, Some(x1)) / mean;
            let upper = slice_harmonic(g, x1, &quad);
            with_refinement(
                res,
                |r| q2_per_x1(g, x1, r),
                |&q| bracket_check(&format!("q2({x1})"), q, lower, upper),
            )
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(PeriodicTable {
        period: l1,
        abscissae,
        values,
        edges,
    })
}

/// Effective coefficients of any supported regime, running cell solves
/// where the regime needs them. Cell-solve coefficients outside their
/// strong/weak bracket trigger one refinement, then an error.
pub fn effective_coefficients(
    class: RegimeClass,
    g: &ProfileFunction,
    quad: &Quadrature2D,
    res: &CellResolution,
) -> Result<EffectiveCoefficients> {
    if !class.needs_cell_solve() {
        return closed_form_coeffs(class, g, quad);
    }
    let strong = strong_ratio(g, quad)?;
    match class {
        RegimeClass::ResonantWeak => {
            let upper = weak_weak_q2(g, quad)?;
            let r = with_refinement(res, |r| q2_resonant(g, r), |c| bracket_check("q2", c.value, strong, upper))?;
            let mut p = provenance(class, Origin::ClosedForm, Origin::CellSolve);
            p.notes.push(format!("q2 from {} slice problems in y1", r.n_y1));
            Ok(EffectiveCoefficients {
                a11: CoefficientField::Constant(harmonic_factor_bar_g(g, quad)?),
                a22: CoefficientField::Constant(r.value),
                m: CoefficientField::Constant(1.0),
                rhs_transform: RhsTransform::CellAverage,
                provenance: p,
                resonant: Some(r),
                q2_table: None,
            })
        }
        RegimeClass::ResonantStrong => {
            let upper = harmonic_factor_bar_g(g, quad)?;
            let (_, q1) = with_refinement(
                res,
                |r| solve_cell_constrained(g, r),
                |c| bracket_check("q1", c.1, strong, upper),
            )?;
            let mut p = provenance(class, Origin::CellSolve, Origin::ClosedForm);
            p.notes.push("q1 from the y2-independent cell problem".into());
            Ok(EffectiveCoefficients {
                a11: CoefficientField::Constant(q1),
                a22: CoefficientField::Constant(strong),
                m: CoefficientField::Constant(1.0),
                rhs_transform: RhsTransform::CellAverage,
                provenance: p,
                resonant: None,
                q2_table: None,
            })
        }
        RegimeClass::A0ResonantBeta => {
            let mut p = provenance(class, Origin::ClosedForm, Origin::CellSolve);
            if g.is_independent_of_y1() {
                let table = tabulate_q2(g, res, 1)?;
                let q = table.values[0];
                let m = slice_mean(g, 0.0, &quad.axis2)?;
                p.notes.push("profile independent of y1: one slice problem".into());
                return Ok(EffectiveCoefficients {
                    a11: CoefficientField::Constant(m),
                    a22: CoefficientField::Constant(m * q),
                    m: CoefficientField::Constant(m),
                    rhs_transform: RhsTransform::CellAverage,
                    provenance: p,
                    resonant: None,
                    q2_table: Some(table),
                });
            }
            let table = tabulate_q2(g, res, Q2_TABLE_POINTS)?;
            p.notes.push(format!(
                "q2(x1) tabulated at {} points per period and interpolated",
                table.values.len()
            ));
            let q = Arc::new(table.clone());
            let qa = quad.axis2.clone();
            let (g1, g2, g3) = (g.clone(), g.clone(), g.clone());
            let qb = qa.clone();
            let qc = qa.clone();
            Ok(EffectiveCoefficients {
                a11: CoefficientField::along_x1("<g(x1,.)> slice mean", move |x1| {
                    slice_mean(&g1, x1, &qa).unwrap_or(f64::NAN)
                }),
                a22: CoefficientField::along_x1("<g(x1,.)> q2(x1) from slice problems", move |x1| {
                    slice_mean(&g2, x1, &qb).unwrap_or(f64::NAN) * q.eval(x1)
                }),
                m: CoefficientField::along_x1("<g(x1,.)> slice mean", move |x1| {
                    slice_mean(&g3, x1, &qc).unwrap_or(f64::NAN)
                }),
                rhs_transform: RhsTransform::CellAverage,
                provenance: p,
                resonant: None,
                q2_table: Some(table),
            })
        }
        _ => unreachable!("closed-form regimes return early"),
    }
}

/// Strong and weak reference values `(g0/<g>, harmonic)` along each axis:
/// `[(x1 strong, x1 weak), (x2 strong, x2 weak)]`.
pub fn ordering_values(g: &ProfileFunction, quad: &Quadrature2D) -> Result<[(f64, f64); 2]> {
    let s = strong_ratio(g, quad)?;
    Ok([(s, harmonic_factor_bar_g(g, quad)?), (s, weak_weak_q2(g, quad)?)])
}

/// The weak-weak coefficients recomputed by integrating the corrector
/// substituted integrands over `Y*`:
/// `(1/|Y*|) int (1 + d_y1 u1)` and `(1/|Y*|) int (1 + d_y2 u2)` for unit
/// macroscopic gradients.
pub fn weak_weak_by_correctors(g: &ProfileFunction, quad: &Quadrature2D) -> Result<(f64, f64)> {
    let [l1, l2] = g.periods();
    let (mut q1, mut q2, mut vol) = (0.0, 0.0, 0.0);
    let vertical = Quadrature1D::new(2, 1)?;
    let weak = WeakCorrector::new(g)?;
    for (y1, w1) in quad.axis1.rule(0.0, l1, &g.breaks_y1()) {
        let slice = weak.slice(y1)?;
        for (y2, w2) in quad.axis2.rule(0.0, l2, &g.breaks_y2()) {
            let top = g.eval_checked(y1, y2)?;
            let d1 = slice.d_y1(1.0);
            let d2 = slice.d_y2(y2, 1.0)?;
            // the weak correctors do not depend on y3
            for (_, w3) in vertical.rule(0.0, top, &[]) {
                let w = w1 * w2 * w3;
                q1 += w * (1.0 + d1);
                q2 += w * (1.0 + d2);
                vol += w;
            }
        }
    }
    Ok((q1 / vol, q2 / vol))
}

/// `int_0^L2 g(x1, .)`: the slice measure `|Y*(x1)|`.
pub fn slice_measure(g: &ProfileFunction, x1: f64) -> Result<f64> {
    bar_g(g, x1, &Quadrature1D::default())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn classify_examples() {
        assert_eq!(classify(0.0, 0.5).unwrap(), RegimeClass::A0WeakBeta);
        assert_eq!(classify(0.5, 1.0).unwrap(), RegimeClass::ResonantWeak);
        assert_eq!(classify(1.2, 1.5).unwrap(), RegimeClass::StrongStrong);
        assert!(matches!(classify(0.5, 0.5), Err(Error::UnsupportedRegime { .. })));
        assert!(matches!(classify(0.7, 0.5), Err(Error::UnsupportedRegime { .. })));
        for c in RegimeClass::ALL {
            let (a, b) = c.sample_exponents();
            assert_eq!(classify(a, b).unwrap(), c);
        }
    }

    proptest! {
        #[test]
        fn classify_is_total_above_the_diagonal(alpha in 0.0f64..3.0, gap in 1e-6f64..3.0) {
            let beta = alpha + gap;
            let c = classify(alpha, beta).unwrap();
            let again = classify(alpha, beta).unwrap();
            prop_assert_eq!(c, again);
            let a0 = matches!(c, RegimeClass::A0WeakBeta | RegimeClass::A0ResonantBeta | RegimeClass::A0StrongBeta);
            prop_assert_eq!(a0, alpha == 0.0);
            if alpha > 1.0 {
                prop_assert_eq!(c, RegimeClass::StrongStrong);
            }
        }

        #[test]
        fn classify_rejects_the_diagonal_and_below(alpha in 0.0f64..3.0, gap in 0.0f64..3.0) {
            prop_assume!(alpha - gap > 0.0);
            prop_assert!(classify(alpha, alpha - gap).is_err());
        }
    }

    #[test]
    fn strong_strong_constant_is_one() {
        let g = ProfileFunction::constant(3.0).unwrap();
        let c = closed_form_coeffs(RegimeClass::StrongStrong, &g, &Quadrature2D::default()).unwrap();
        assert!((c.q1().unwrap() - 1.0).abs() < 1e-14);
        assert!((c.q2().unwrap() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn weak_weak_y1_only_profile() {
        let g = ProfileFunction::sin_y1(2.0, 1.0).unwrap();
        let quad = Quadrature2D::default();
        let c = closed_form_coeffs(RegimeClass::WeakWeak, &g, &quad).unwrap();
        assert!((c.q2().unwrap() - 1.0).abs() < 1e-12);
        assert!((c.q1().unwrap() - 3f64.sqrt() / 2.0).abs() < 1e-10);
    }

    #[test]
    fn weak_strong_stripes() {
        let g = ProfileFunction::stripes_y2(1.0, 3.0).unwrap();
        let c = closed_form_coeffs(RegimeClass::WeakStrong, &g, &Quadrature2D::default()).unwrap();
        assert!((c.q1().unwrap() - 1.0).abs() < 1e-14);
        assert!((c.q2().unwrap() - 0.5).abs() < 1e-14);
    }

    #[test]
    fn cell_regimes_are_refused_by_the_closed_form_path() {
        let g = ProfileFunction::constant(1.0).unwrap();
        assert!(matches!(
            closed_form_coeffs(RegimeClass::ResonantWeak, &g, &Quadrature2D::default()),
            Err(Error::NeedsCellSolve(RegimeClass::ResonantWeak))
        ));
    }

    #[test]
    fn a0_regimes_weight_by_slice_mean() {
        let g = ProfileFunction::sin_y1(2.0, 1.0).unwrap();
        let c = closed_form_coeffs(RegimeClass::A0StrongBeta, &g, &Quadrature2D::default()).unwrap();
        let x1 = 0.3;
        let expected = 2.0 + (2.0 * std::f64::consts::PI * x1).sin();
        assert!((c.m.eval(x1, 0.0) - expected).abs() < 1e-12);
        assert!((c.a22.eval(x1, 0.0) - expected).abs() < 1e-9);
    }

    #[test]
    fn catmull_rom_reproduces_smooth_periodic_data() {
        let n = 32;
        let f = |x: f64| 1.0 + 0.3 * (2.0 * std::f64::consts::PI * x).cos();
        let table = PeriodicTable {
            period: 1.0,
            abscissae: (0..n).map(|i| i as f64 / n as f64).collect(),
            values: (0..n).map(|i| f(i as f64 / n as f64)).collect(),
            edges: None,
        };
        for k in 0..50 {
            let x = k as f64 / 49.0 * 1.7 - 0.3;
            assert!((table.eval(x) - f(x)).abs() < 1e-4, "{x}");
        }
    }

    #[test]
    fn resonant_weak_constant_profile() {
        let g = ProfileFunction::constant(2.0).unwrap();
        let res = CellResolution::with_mesh(8, 8);
        let c = effective_coefficients(RegimeClass::ResonantWeak, &g, &Quadrature2D::default(), &res).unwrap();
        assert!((c.q2().unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(c.provenance.a22, Origin::CellSolve);
    }
}
