//! Physical model of the porous medium equation: free energy density,
//! exact Barenblatt-Pattle solutions and the benchmark initial data used
//! by the experiment harness.

use std::fmt;

/// Errors for the checked model evaluations.
#[derive(Debug, Clone, PartialEq)]
pub enum ModelError {
    /// Density argument was negative where only nonnegative values are defined.
    NegativeDensity(f64),
    /// Exponent/dimension combination outside the supported range.
    InvalidParameter(String),
}

impl fmt::Display for ModelError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModelError::NegativeDensity(r) => write!(f, "negative density {r}"),
            ModelError::InvalidParameter(msg) => write!(f, "invalid parameter: {msg}"),
        }
    }
}

impl std::error::Error for ModelError {}

/// The porous medium equation `d/dt rho = Laplace(rho^m)` with exponent
/// `m > 1` in spatial dimension `d` (1 or 2).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PmeModel {
    pub m: f64,
    pub d: usize,
}

impl PmeModel {
    pub fn new(m: f64, d: usize) -> Result<Self, ModelError> {
        if !(m > 1.0) || !m.is_finite() {
            return Err(ModelError::InvalidParameter(format!("m = {m}, need m > 1")));
        }
        if d != 1 && d != 2 {
            return Err(ModelError::InvalidParameter(format!("d = {d}, need 1 or 2")));
        }
        Ok(PmeModel { m, d })
    }

    /// Free energy density `f(rho) = rho^m / (m - 1)`.
    pub fn free_energy_density(&self, rho: f64) -> Result<f64, ModelError> {
        if rho < 0.0 {
            return Err(ModelError::NegativeDensity(rho));
        }
        Ok(pow_nonneg(rho, self.m) / (self.m - 1.0))
    }

    /// Pressure `f'(rho) = m rho^(m-1) / (m - 1)`.
    pub fn free_energy_density_prime(&self, rho: f64) -> Result<f64, ModelError> {
        if rho < 0.0 {
            return Err(ModelError::NegativeDensity(rho));
        }
        Ok(self.m / (self.m - 1.0) * pow_nonneg(rho, self.m - 1.0))
    }

    /// `f(rho)` extended to small negative densities when the power is a
    /// polynomial (integer exponent). The assumption monitors report negative
    /// nodal values; the assembly keeps evaluating through them instead of
    /// aborting mid-step. Returns NaN where the power is genuinely undefined.
    pub(crate) fn f_extended(&self, rho: f64) -> f64 {
        pow_extended(rho, self.m) / (self.m - 1.0)
    }

    /// `f'(rho)` with the same extension rule as [`Self::f_extended`].
    pub(crate) fn f_prime_extended(&self, rho: f64) -> f64 {
        self.m / (self.m - 1.0) * pow_extended(rho, self.m - 1.0)
    }
}

fn pow_nonneg(rho: f64, e: f64) -> f64 {
    if rho == 0.0 {
        // 0^0 = 1 would be wrong for the e = 0 edge (m = 1 is excluded anyway);
        // for e > 0 the limit is 0.
        return if e == 0.0 { 1.0 } else { 0.0 };
    }
    if e == e.round() && e.abs() < 64.0 {
        rho.powi(e as i32)
    } else {
        rho.powf(e)
    }
}

fn pow_extended(rho: f64, e: f64) -> f64 {
    if rho >= 0.0 {
        pow_nonneg(rho, e)
    } else if e == e.round() && e.abs() < 64.0 {
        rho.powi(e as i32)
    } else {
        f64::NAN
    }
}

/// Parameters of the Barenblatt-Pattle solution
/// `B(x,t) = t^(-alpha) (C - k |x|^2 t^(-2 beta))_+^(1/(m-1))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BarenblattParams {
    pub m: f64,
    pub d: usize,
    /// Mass constant `C > 0`.
    pub c: f64,
    pub alpha: f64,
    pub beta: f64,
    pub k: f64,
}

impl BarenblattParams {
    pub fn new(m: f64, d: usize, c: f64) -> Result<Self, ModelError> {
        let model = PmeModel::new(m, d)?;
        if !(c > 0.0) {
            return Err(ModelError::InvalidParameter(format!("C = {c}, need C > 0")));
        }
        let df = model.d as f64;
        let alpha = df / (df * (m - 1.0) + 2.0);
        let beta = alpha / df;
        let k = alpha * (m - 1.0) / (2.0 * m * df);
        Ok(BarenblattParams { m, d, c, alpha, beta, k })
    }

    /// Evaluate `B` at a point given by its coordinates. Exactly zero outside
    /// the support (plain `max(., 0)` clamp, no epsilon).
    pub fn value(&self, point: &[f64], t: f64) -> f64 {
        debug_assert!(t > 0.0);
        let r2: f64 = point.iter().map(|x| x * x).sum();
        let s = self.c - self.k * r2 * t.powf(-2.0 * self.beta);
        if s <= 0.0 {
            0.0
        } else {
            t.powf(-self.alpha) * pow_nonneg(s, 1.0 / (self.m - 1.0))
        }
    }

    /// Radius of the support at time `t`: `r(t) = sqrt(C/k) t^beta`.
    pub fn support_radius(&self, t: f64) -> f64 {
        debug_assert!(t > 0.0);
        (self.c / self.k).sqrt() * t.powf(self.beta)
    }
}

/// 1D waiting-time initial data
/// `rho0 = ((m-1)/m ((1-theta) sin^2 x + theta sin^4 x))^(1/(m-1))` on
/// `[-pi, 0]`, zero elsewhere.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WaitingTimeParams1D {
    pub theta: f64,
    pub m: f64,
}

impl WaitingTimeParams1D {
    pub fn new(theta: f64, m: f64) -> Result<Self, ModelError> {
        if !(0.0..=1.0).contains(&theta) {
            return Err(ModelError::InvalidParameter(format!(
                "theta = {theta}, need theta in [0, 1]"
            )));
        }
        if !(m > 1.0) {
            return Err(ModelError::InvalidParameter(format!("m = {m}, need m > 1")));
        }
        Ok(WaitingTimeParams1D { theta, m })
    }

    pub fn initial_value(&self, x: f64) -> f64 {
        if !(-std::f64::consts::PI..=0.0).contains(&x) {
            return 0.0;
        }
        let s2 = x.sin() * x.sin();
        let base = (self.m - 1.0) / self.m * ((1.0 - self.theta) * s2 + self.theta * s2 * s2);
        pow_nonneg(base.max(0.0), 1.0 / (self.m - 1.0))
    }

    /// The critical waiting time `t* = 1 / (2 (m+1) (1-theta))`, valid for
    /// `theta in [0, 1/4]`; outside that interval the closed form is not
    /// claimed and an error is returned.
    pub fn critical_waiting_time(&self) -> Result<f64, ModelError> {
        if self.theta > 0.25 {
            return Err(ModelError::InvalidParameter(format!(
                "theta = {} outside [0, 1/4] where the waiting time formula holds",
                self.theta
            )));
        }
        Ok(1.0 / (2.0 * (self.m + 1.0) * (1.0 - self.theta)))
    }
}

/// 2D waiting-time initial data `1/2 sin^2(sqrt(x^2+y^2) - pi)` on the disk
/// of radius pi, zero elsewhere.
pub fn waiting_time_initial_2d(x: f64, y: f64) -> f64 {
    let r = x.hypot(y);
    if r > std::f64::consts::PI {
        return 0.0;
    }
    let s = (r - std::f64::consts::PI).sin();
    0.5 * s * s
}

/// Horseshoe-shaped compactly supported initial data: a three-quarter
/// annulus capped with two half-disks, quartic profile with coefficient 50.
/// Branches are tested in the order written; adjacent branches agree on the
/// seams so first-match is well defined.
pub fn horseshoe_initial(x: f64, y: f64) -> f64 {
    let r = x.hypot(y);
    if r > 0.5 && r < 1.0 && (x < 0.0 || y < 0.0) {
        let s = 0.25 * 0.25 - (r - 0.75) * (r - 0.75);
        return 50.0 * s * s;
    }
    let d_top = x * x + (y - 0.75) * (y - 0.75);
    if d_top <= 0.25 * 0.25 && x >= 0.0 {
        let s = 0.25 * 0.25 - d_top;
        return 50.0 * s * s;
    }
    let d_right = (x - 0.75) * (x - 0.75) + y * y;
    if d_right <= 0.25 * 0.25 && y <= 0.0 {
        let s = 0.25 * 0.25 - d_right;
        return 50.0 * s * s;
    }
    0.0
}

/// Two Gaussian peaks connected by a thin positive floor, used to follow a
/// merging topology through the regularized problem.
pub fn two_peak_initial(x: f64, y: f64) -> f64 {
    let a = (-20.0 * ((x - 0.3) * (x - 0.3) + (y - 0.3) * (y - 0.3))).exp();
    let b = (-20.0 * ((x + 0.3) * (x + 0.3) + (y + 0.3) * (y + 0.3))).exp();
    a + b + 0.001
}
