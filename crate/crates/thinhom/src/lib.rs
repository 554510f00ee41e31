//! Homogenization toolkit for reaction-diffusion problems posed on thin
//! three-dimensional domains whose top boundary oscillates with two
//! independent frequencies.
//!
//! The domain is `{(x1, x2) in omega, 0 < x3 < eps * g(x1 / eps^alpha, x2 / eps^beta)}`.
//! Depending on `(alpha, beta)` the limit `eps -> 0` is a two-dimensional
//! Neumann problem whose diffusion coefficients are either closed-form
//! functionals of `g` or come from periodic cell problems.
//!
//! Module map:
//!
//! * [`profile`] periodic boundary profiles and the scalar functionals of `g`.
//! * [`regime`] classification of `(alpha, beta)` and effective coefficients.
//! * [`meshfem`] P1 triangles, sparse assembly and preconditioned CG.
//! * [`cellsolver`] cell (corrector) problems and resonant coefficients.
//! * [`homsolver`] the limit Neumann problem on a rectangle.
//! * [`unfolding`] the discrete unfolding, rescaling and averaging operators.
//! * [`direct3d`] direct trilinear solves on the thin domain for validation.
//! * [`cli`] the command-line front end.

pub mod cellsolver;
pub mod cli;
pub mod direct3d;
pub mod error;
pub mod homsolver;
pub mod io;
pub mod meshfem;
pub mod profile;
pub mod regime;
pub mod unfolding;

pub use error::{Error, Result};

/// Axis-aligned rectangle `(x1_lo, x1_hi) x (x2_lo, x2_hi)`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Rect {
    pub x1_lo: f64,
    pub x1_hi: f64,
    pub x2_lo: f64,
    pub x2_hi: f64,
}

impl Rect {
    pub fn new(x1_lo: f64, x1_hi: f64, x2_lo: f64, x2_hi: f64) -> Result<Self> {
        let r = Rect {
            x1_lo,
            x1_hi,
            x2_lo,
            x2_hi,
        };
        r.validate()?;
        Ok(r)
    }

    pub fn unit() -> Self {
        Rect {
            x1_lo: 0.0,
            x1_hi: 1.0,
            x2_lo: 0.0,
            x2_hi: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.x1_lo, self.x1_hi, self.x2_lo, self.x2_hi]
            .iter()
            .all(|v| v.is_finite());
        if !finite || self.x1_hi <= self.x1_lo || self.x2_hi <= self.x2_lo {
            return Err(Error::InvalidInput(format!(
                "degenerate rectangle ({}, {}) x ({}, {})",
                self.x1_lo, self.x1_hi, self.x2_lo, self.x2_hi
            )));
        }
        Ok(())
    }

    pub fn width(&self) -> f64 {
        self.x1_hi - self.x1_lo
    }

    pub fn height(&self) -> f64 {
        self.x2_hi - self.x2_lo
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }
}
