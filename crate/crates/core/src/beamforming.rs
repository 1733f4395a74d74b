//! Closed-form receive combining at the BS.
//!
//! For fixed powers and phases the uplink SINR is a generalized Rayleigh
//! quotient in `w`; its maximizer is `A⁻¹ h_C` normalized, with
//! `A = p_D h_D h_Dᴴ + σ_B² I`, and the maximum has the closed form
//!
//! `γ_C = p_C ‖h_C‖² / σ_B² · (1 − ρ² · p_D‖h_D‖² / (p_D‖h_D‖² + σ_B²))`,
//!
//! with `ρ = |h_Cᴴ h_D| / (‖h_C‖ ‖h_D‖)`.

use crate::channel::EffectiveChannels;
use crate::error::{Error, Result};
use crate::linalg::{sherman_morrison_inv, CVector};

#[derive(Debug, Clone, PartialEq)]
pub struct BeamformerResult {
    /// Unit-norm combining vector.
    pub w: CVector,
    /// Achieved uplink SINR (linear).
    pub gamma_c: f64,
    /// Magnitude of the normalized correlation between the CU and DT channels at the BS.
    pub rho: f64,
}

/// `|h_Cᴴ h_D| / (‖h_C‖ ‖h_D‖)`, or 0 when either vector vanishes.
pub fn channel_correlation(h_c: &CVector, h_d: &CVector) -> f64 {
    let denom = h_c.norm() * h_d.norm();
    if denom == 0.0 {
        0.0
    } else {
        (h_c.dotc(h_d).norm() / denom).min(1.0)
    }
}

/// Achievable uplink SINR under optimal combining, via the closed form.
pub fn max_uplink_sinr(eff: &EffectiveChannels, p_d: f64, p_c: f64, sigma2_b: f64) -> f64 {
    let rho = channel_correlation(&eff.h_c_vec, &eff.h_d_vec);
    let interference = p_d * eff.h_d_vec.norm_squared();
    p_c * eff.h_c_vec.norm_squared() / sigma2_b * (1.0 - rho * rho * interference / (interference + sigma2_b))
}

pub fn optimal_receiver(eff: &EffectiveChannels, p_d: f64, p_c: f64, sigma2_b: f64) -> Result<BeamformerResult> {
    if !(p_d >= 0.0 && p_c >= 0.0) {
        return Err(Error::invalid(format!("powers must be non-negative, got p_D={p_d}, p_C={p_c}")));
    }
    if eff.h_c_vec.norm() == 0.0 {
        return Err(Error::DegenerateChannel("CU channel at the BS is zero".into()));
    }
    let a_inv = sherman_morrison_inv(p_d, &eff.h_d_vec, sigma2_b)?;
    let x = a_inv * &eff.h_c_vec;
    let w = x.unscale(x.norm());
    let rho = channel_correlation(&eff.h_c_vec, &eff.h_d_vec);
    let gamma_c = max_uplink_sinr(eff, p_d, p_c, sigma2_b);

    #[cfg(debug_assertions)]
    {
        let direct = eff.uplink_sinr(&w, p_d, p_c, sigma2_b);
        debug_assert!(
            (direct - gamma_c).abs() <= 1e-9 * gamma_c.abs().max(direct.abs()).max(f64::MIN_POSITIVE),
            "closed-form SINR {gamma_c} disagrees with direct evaluation {direct}"
        );
    }

    Ok(BeamformerResult { w, gamma_c, rho })
}
