use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Parameters of the problem −Δu + λu = |u|^{p−1}u on the annulus
/// a < |x| < b in R^{2m}, and of its reduced counterpart downstairs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProblemParams {
    /// Half-dimension: the ambient space upstairs is R^{2m}.
    pub m: u32,
    /// Inner radius of the upstairs annulus.
    pub a: f64,
    /// Outer radius of the upstairs annulus.
    pub b: f64,
    /// Nonlinearity power.
    pub p: f64,
    /// Coefficient of the linear term.
    pub lambda: f64,
}

impl ProblemParams {
    pub fn new(m: u32, a: f64, b: f64, p: f64, lambda: f64) -> Result<Self> {
        if m < 2 {
            return Err(Error::Param(format!("m must be ≥ 2, got {m}")));
        }
        if !(a.is_finite() && b.is_finite() && a > 0.0 && a < b) {
            return Err(Error::Param(format!(
                "annulus radii must satisfy 0 < a < b, got a={a}, b={b}"
            )));
        }
        if !(p.is_finite() && p > 1.0) {
            return Err(Error::Param(format!("power must satisfy p > 1, got {p}")));
        }
        let p_crit = Self::critical_power(m);
        if p >= p_crit {
            return Err(Error::Param(format!(
                "power p={p} is not subcritical in dimension {}: requires p < {p_crit}",
                m + 1
            )));
        }
        if !(lambda.is_finite() && lambda > 0.0) {
            return Err(Error::Param(format!("lambda must be > 0, got {lambda}")));
        }
        Ok(Self { m, a, b, p, lambda })
    }

    /// Critical Sobolev exponent in the reduced dimension N = m+1:
    /// (N+2)/(N−2) = (m+3)/(m−1).
    pub fn critical_power(m: u32) -> f64 {
        (m as f64 + 3.0) / (m as f64 - 1.0)
    }

    /// Same problem at a different λ.
    pub fn with_lambda(&self, lambda: f64) -> Result<Self> {
        Self::new(self.m, self.a, self.b, self.p, lambda)
    }

    pub fn reduced(&self) -> ReducedDomain {
        ReducedDomain::from_radii(self.m, self.a, self.b)
    }
}

/// The annulus R1 < |z| < R2 in R^N that hosts the reduced problem.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReducedDomain {
    pub r1: f64,
    pub r2: f64,
    /// Ambient dimension downstairs, N = m + 1.
    pub n_dim: u32,
}

impl ReducedDomain {
    pub fn from_radii(m: u32, a: f64, b: f64) -> Self {
        Self {
            r1: 0.5 * a * a,
            r2: 0.5 * b * b,
            n_dim: m + 1,
        }
    }

    pub fn width(&self) -> f64 {
        self.r2 - self.r1
    }
}

/// Surface area of the unit sphere S^{k} ⊂ R^{k+1}, i.e. |S^k| = 2π^{(k+1)/2}/Γ((k+1)/2).
pub fn unit_sphere_area(k: u32) -> f64 {
    // Γ at integer and half-integer arguments by the recursion Γ(x+1) = xΓ(x).
    let dim = k + 1; // sphere lives in R^dim
    let half = dim as f64 / 2.0;
    let mut gamma = if dim % 2 == 0 { 1.0 } else { std::f64::consts::PI.sqrt() };
    let mut x = if dim % 2 == 0 { 1.0 } else { 0.5 };
    while x < half - 0.25 {
        gamma *= x;
        x += 1.0;
    }
    2.0 * std::f64::consts::PI.powf(half) / gamma
}
