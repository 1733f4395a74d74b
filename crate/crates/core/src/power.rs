//! Optimal uplink powers for fixed phases under optimal receive combining.
//!
//! With the combiner at its optimum the two QoS constraints become a line and
//! a concave increasing curve in the `(p_D, p_C)` plane:
//!
//! ```text
//! D2D:     p_C <= p_D / (α k0) − σ_D² / k0
//! uplink:  p_C >= β (p_D + k2) / (k̄1 p_D + k2)
//! ```
//!
//! The sum rate `log R(p_D, p_C)` grows along every ray from the origin, so
//! the optimum lies on the vertical border `p_D = p_D_max` or on the
//! horizontal border `p_C = p_C_max` of the feasible region. Restricted to
//! either border, `R` is increasing or convex, so only the border endpoints
//! need to be compared.

use serde::{Deserialize, Serialize};

use crate::beamforming::channel_correlation;
use crate::channel::{EffectiveChannels, SystemConfig};
use crate::error::{Error, Result};

/// Lower bound on a transmit power, relative to its budget.
pub const MIN_POWER_FRACTION: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerCoefficients {
    /// `γ_D,min / |h_D|²`.
    pub alpha: f64,
    /// `σ_B² γ_C,min / ‖h_C‖²`.
    pub beta: f64,
    /// `|h_C|²`, the CU → DR gain.
    pub k0: f64,
    /// `ρ²`.
    pub k1: f64,
    /// `σ_B² / ‖h_D‖²`; infinite when the DT is invisible at the BS.
    pub k2: f64,
    /// `‖h_C‖² / σ_B²`.
    pub nu1: f64,
    /// `|h_D|²`.
    pub nu2: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerLimits {
    pub p_d_max: f64,
    pub p_c_max: f64,
}

impl From<&SystemConfig> for PowerLimits {
    fn from(c: &SystemConfig) -> Self {
        Self { p_d_max: c.p_d_max, p_c_max: c.p_c_max }
    }
}

/// Which ordering of `I_Cy`, `I_Ly` and `p_C_max` the instance falls into.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PowerCase {
    /// `I_Cy < I_Ly <= p_C_max`: the region touches the vertical border only.
    VerticalBorder,
    /// `I_Cy <= p_C_max < I_Ly`: the box corner belongs to the region.
    Corner,
    /// `p_C_max < I_Cy < I_Ly`: the region touches the horizontal border only.
    HorizontalBorder,
    Infeasible,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerPair {
    pub p_d: f64,
    pub p_c: f64,
    pub case: PowerCase,
    /// `log R(p_D, p_C)` in nats; zero when infeasible.
    pub sum_rate: f64,
}

impl PowerPair {
    pub fn is_feasible(&self) -> bool {
        self.case != PowerCase::Infeasible
    }
}

impl PowerCoefficients {
    pub fn new(eff: &EffectiveChannels, config: &SystemConfig) -> Self {
        let hd2 = eff.h_d.norm_sqr();
        let hc_vec2 = eff.h_c_vec.norm_squared();
        let hd_vec2 = eff.h_d_vec.norm_squared();
        let rho = channel_correlation(&eff.h_c_vec, &eff.h_d_vec);
        Self {
            alpha: config.gamma_d_min / hd2,
            beta: config.sigma2_b * config.gamma_c_min / hc_vec2,
            k0: eff.h_c.norm_sqr(),
            k1: rho * rho,
            k2: config.sigma2_b / hd_vec2,
            nu1: hc_vec2 / config.sigma2_b,
            nu2: hd2,
        }
    }

    pub fn k1_bar(&self) -> f64 {
        (1.0 - self.k1).max(0.0)
    }

    /// Uplink SINR per unit `p_C` at a given `p_D`, divided by `ν1`: `(k2 + k̄1 p_D) / (k2 + p_D)`.
    fn uplink_factor(&self, p_d: f64) -> f64 {
        if self.k2.is_infinite() {
            1.0
        } else {
            (self.k2 + self.k1_bar() * p_d) / (self.k2 + p_d)
        }
    }

    pub fn d2d_sinr(&self, p_d: f64, p_c: f64, sigma2_d: f64) -> f64 {
        self.nu2 * p_d / (self.k0 * p_c + sigma2_d)
    }

    pub fn uplink_sinr(&self, p_d: f64, p_c: f64) -> f64 {
        self.nu1 * p_c * self.uplink_factor(p_d)
    }

    /// Smallest `p_D` meeting the D2D target at `p_C` (the line, solved for `p_D`).
    fn line_p_d(&self, p_c: f64, sigma2_d: f64) -> f64 {
        self.alpha * (self.k0 * p_c + sigma2_d)
    }

    /// Largest `p_C` meeting the D2D target at `p_D` (the line).
    fn line_p_c(&self, p_d: f64, sigma2_d: f64) -> f64 {
        if self.alpha.is_infinite() {
            return f64::NEG_INFINITY;
        }
        let excess = p_d - self.alpha * sigma2_d;
        if self.k0 == 0.0 {
            return if excess >= 0.0 { f64::INFINITY } else { f64::NEG_INFINITY };
        }
        excess / (self.alpha * self.k0)
    }

    /// Smallest `p_C` meeting the uplink target at `p_D` (the curve).
    fn curve_p_c(&self, p_d: f64) -> f64 {
        self.beta / self.uplink_factor(p_d)
    }

    /// Largest `p_D` meeting the uplink target at `p_C` (the curve, solved for `p_D`),
    /// `None` when no `p_D >= 0` works.
    fn curve_p_d(&self, p_c: f64) -> Option<f64> {
        if !(p_c >= self.beta) {
            return None;
        }
        let k1_bar = self.k1_bar();
        if self.k2.is_infinite() || k1_bar * p_c >= self.beta {
            return Some(f64::INFINITY);
        }
        Some(self.k2 * (p_c - self.beta) / (self.beta - k1_bar * p_c))
    }

    /// Signed slacks of the D2D and uplink constraints, in power units
    /// (`p_D − α(k0 p_C + σ_D²)` and `p_C − β / factor(p_D)`).
    pub fn constraint_slacks(&self, p_d: f64, p_c: f64, sigma2_d: f64) -> (f64, f64) {
        (p_d - self.line_p_d(p_c, sigma2_d), p_c - self.curve_p_c(p_d))
    }

    pub fn satisfies(&self, p_d: f64, p_c: f64, limits: &PowerLimits, sigma2_d: f64, rel_tol: f64) -> bool {
        let (sd, sc) = self.constraint_slacks(p_d, p_c, sigma2_d);
        p_d <= limits.p_d_max * (1.0 + rel_tol)
            && p_c <= limits.p_c_max * (1.0 + rel_tol)
            && p_d > 0.0
            && p_c > 0.0
            && sd >= -rel_tol * p_d
            && sc >= -rel_tol * p_c
    }
}

/// `log R(p_D, p_C) = log(1 + γ_C) + log(1 + γ_D)` in nats, with `γ_C` at the optimal combiner.
pub fn rate_objective(p_d: f64, p_c: f64, co: &PowerCoefficients, sigma2_d: f64) -> f64 {
    co.uplink_sinr(p_d, p_c).ln_1p() + co.d2d_sinr(p_d, p_c, sigma2_d).ln_1p()
}

/// Heights at `p_D = p_D_max` of the D2D line (`I_Ly`) and the uplink curve (`I_Cy`).
pub fn boundary_intersections(co: &PowerCoefficients, limits: &PowerLimits, sigma2_d: f64) -> Result<(f64, f64)> {
    if !(limits.p_d_max > 0.0) {
        return Err(Error::invalid("p_D_max must be positive"));
    }
    if !(co.alpha.is_finite() && co.alpha > 0.0) || co.k0 == 0.0 {
        return Err(Error::DegenerateCoefficient(format!(
            "line intersection undefined for alpha={}, k0={}",
            co.alpha, co.k0
        )));
    }
    Ok((co.line_p_c(limits.p_d_max, sigma2_d), co.curve_p_c(limits.p_d_max)))
}

/// Closed-form optimal power pair.
///
/// Candidates are the endpoints of the feasible parts of the two borders
/// `p_D = p_D_max` and `p_C = p_C_max`; the one with the largest rate wins,
/// ties going to the smaller `p_D`.
pub fn optimal_power(co: &PowerCoefficients, limits: &PowerLimits, sigma2_d: f64) -> PowerPair {
    let infeasible = PowerPair { p_d: 0.0, p_c: 0.0, case: PowerCase::Infeasible, sum_rate: 0.0 };
    let (p_d_max, p_c_max) = (limits.p_d_max, limits.p_c_max);
    let (lo_d, lo_c) = (MIN_POWER_FRACTION * p_d_max, MIN_POWER_FRACTION * p_c_max);

    let i_ly = co.line_p_c(p_d_max, sigma2_d);
    let i_cy = co.curve_p_c(p_d_max);

    let mut candidates: Vec<(f64, f64)> = Vec::with_capacity(4);
    let (v_lo, v_hi) = (i_cy.max(lo_c), i_ly.min(p_c_max));
    if v_lo <= v_hi {
        candidates.push((p_d_max, v_hi));
        candidates.push((p_d_max, v_lo));
    }
    if let Some(curve_d) = co.curve_p_d(p_c_max) {
        let (h_lo, h_hi) = (co.line_p_d(p_c_max, sigma2_d).max(lo_d), curve_d.min(p_d_max));
        if h_lo <= h_hi {
            candidates.push((h_hi, p_c_max));
            candidates.push((h_lo, p_c_max));
        }
    }

    let best = candidates
        .into_iter()
        .filter(|&(d, c)| co.satisfies(d, c, limits, sigma2_d, 1e-12))
        .map(|(d, c)| (d, c, rate_objective(d, c, co, sigma2_d)))
        .fold(None::<(f64, f64, f64)>, |best, cand| match best {
            None => Some(cand),
            Some(b) if cand.2 > b.2 || (cand.2 == b.2 && cand.0 < b.0) => Some(cand),
            keep => keep,
        });

    let Some((p_d, p_c, sum_rate)) = best else {
        return infeasible;
    };
    let case = if i_ly <= p_c_max {
        PowerCase::VerticalBorder
    } else if i_cy <= p_c_max {
        PowerCase::Corner
    } else {
        PowerCase::HorizontalBorder
    };
    PowerPair { p_d, p_c, case, sum_rate }
}
