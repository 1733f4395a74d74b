//! System geometry, channel realizations and composite (effective) channels.
//!
//! Channel coefficients are i.i.d. circularly-symmetric complex Gaussian with
//! total variance `(d / d0)^-exponent`, where `d` is the link distance.
//!
//! Realizations are reproducible across implementations: the generator is
//! ChaCha20 (`rand_chacha::ChaCha20Rng::seed_from_u64`), uniforms are the
//! 53-bit `f64` draws of `rand`, and each complex coefficient consumes one
//! Box–Muller pair `(u1, u2)`:
//! `re + j·im = sqrt(var/2) · sqrt(-2 ln(1 - u1)) · (cos 2πu2 + j sin 2πu2)`.
//! Channels are drawn in the order g_C, g_D, f_C, f_D, s_C, S_B (row-major),
//! s_T, s_R.

use std::f64::consts::PI;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{CMatrix, CVector, C64};

/// 2-D node coordinates in meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Positions {
    pub bs: [f64; 2],
    pub cu: [f64; 2],
    pub dt: [f64; 2],
    pub dr: [f64; 2],
    pub ris: [f64; 2],
}

/// Static description of one cell: geometry, array sizes, budgets and QoS targets.
///
/// All quantities are linear (watts, linear SINR).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemConfig {
    /// BS antenna count `M`.
    pub antennas: usize,
    /// RIS element count `N`.
    pub elements: usize,
    /// Cell radius `d0` in meters; the path-loss reference distance.
    pub cell_radius: f64,
    /// D2D pair separation in meters.
    pub d2d_distance: f64,
    pub positions: Positions,
    pub p_d_max: f64,
    pub p_c_max: f64,
    /// Minimum SINR of the D2D link.
    pub gamma_d_min: f64,
    /// Minimum SINR of the cellular uplink.
    pub gamma_c_min: f64,
    /// Noise power at the BS.
    pub sigma2_b: f64,
    /// Noise power at the D2D receiver.
    pub sigma2_d: f64,
    pub pathloss_exponent: f64,
}

/// Decibels to a linear power ratio.
pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

impl SystemConfig {
    /// Reference layout: BS at the origin, CU at `(0, 0.5 d0)`, the D2D pair
    /// centred at `(0, -0.75 d0)` with separation `0.2 d0`, `M = 4`, `N = 8`,
    /// unit noise powers, 3 dB SINR targets and 10 W power budgets.
    ///
    /// `ris_position` is given in units of `d0`.
    pub fn default_geometry(d0: f64, ris_position: [f64; 2]) -> Self {
        let d_d = 0.2 * d0;
        let gamma = db_to_linear(3.0);
        Self {
            antennas: 4,
            elements: 8,
            cell_radius: d0,
            d2d_distance: d_d,
            positions: Positions {
                bs: [0.0, 0.0],
                cu: [0.0, 0.5 * d0],
                dt: [0.0, -0.75 * d0 - 0.5 * d_d],
                dr: [0.0, -0.75 * d0 + 0.5 * d_d],
                ris: [ris_position[0] * d0, ris_position[1] * d0],
            },
            p_d_max: 10.0,
            p_c_max: 10.0,
            gamma_d_min: gamma,
            gamma_c_min: gamma,
            sigma2_b: 1.0,
            sigma2_d: 1.0,
            pathloss_exponent: 4.0,
        }
    }

    pub fn with_elements(mut self, n: usize) -> Self {
        self.elements = n;
        self
    }

    pub fn with_max_power(mut self, watts: f64) -> Self {
        self.p_d_max = watts;
        self.p_c_max = watts;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.antennas == 0 {
            return Err(Error::invalid("antenna count must be at least 1"));
        }
        let positive = [
            ("cell_radius", self.cell_radius),
            ("p_d_max", self.p_d_max),
            ("p_c_max", self.p_c_max),
            ("gamma_d_min", self.gamma_d_min),
            ("gamma_c_min", self.gamma_c_min),
            ("sigma2_b", self.sigma2_b),
            ("sigma2_d", self.sigma2_d),
            ("pathloss_exponent", self.pathloss_exponent),
        ];
        for (name, value) in positive {
            if !(value.is_finite() && value > 0.0) {
                return Err(Error::invalid(format!("{name} must be positive and finite, got {value}")));
            }
        }
        let p = &self.positions;
        let nodes = [("BS", p.bs), ("CU", p.cu), ("DT", p.dt), ("DR", p.dr), ("RIS", p.ris)];
        for (i, (a, pa)) in nodes.iter().enumerate() {
            if !pa.iter().all(|c| c.is_finite()) {
                return Err(Error::Geometry(format!("{a} position is not finite")));
            }
            for (b, pb) in &nodes[i + 1..] {
                if pa == pb {
                    return Err(Error::Geometry(format!("{a} and {b} are co-located")));
                }
            }
        }
        Ok(())
    }

    /// Per-coefficient variance `(d/d0)^-exponent` of the link between two points.
    pub fn link_variance(&self, from: [f64; 2], to: [f64; 2]) -> Result<f64> {
        let d = (from[0] - to[0]).hypot(from[1] - to[1]);
        if !(d > 0.0) {
            return Err(Error::Geometry(format!("link endpoints coincide at {from:?}")));
        }
        Ok((d / self.cell_radius).powf(-self.pathloss_exponent))
    }
}

/// One realization of every channel in the system.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSet {
    /// CU → BS.
    pub g_c: CVector,
    /// DT → DR.
    pub g_d: C64,
    /// CU → DR.
    pub f_c: C64,
    /// DT → BS.
    pub f_d: CVector,
    /// CU → RIS.
    pub s_c: CVector,
    /// RIS → BS, `M × N`.
    pub s_b: CMatrix,
    /// DT → RIS.
    pub s_t: CVector,
    /// RIS → DR.
    pub s_r: CVector,
    pub seed: u64,
}

impl ChannelSet {
    pub fn antennas(&self) -> usize {
        self.g_c.len()
    }

    pub fn elements(&self) -> usize {
        self.s_c.len()
    }

    pub fn check_dims(&self) -> Result<()> {
        let (m, n) = (self.antennas(), self.elements());
        let ok = self.f_d.len() == m
            && self.s_b.nrows() == m
            && self.s_b.ncols() == n
            && self.s_t.len() == n
            && self.s_r.len() == n;
        if ok {
            Ok(())
        } else {
            Err(Error::DimensionMismatch(format!(
                "inconsistent channel set: g_C {m}, f_D {}, S_B {}x{}, s_C {n}, s_T {}, s_R {}",
                self.f_d.len(),
                self.s_b.nrows(),
                self.s_b.ncols(),
                self.s_t.len(),
                self.s_r.len()
            )))
        }
    }

    /// Direct links only (`N = 0`).
    pub fn without_ris(&self) -> Self {
        let m = self.antennas();
        Self {
            s_c: CVector::zeros(0),
            s_b: CMatrix::zeros(m, 0),
            s_t: CVector::zeros(0),
            s_r: CVector::zeros(0),
            ..self.clone()
        }
    }
}

/// Draw a channel realization. Deterministic in `(config, seed)`.
pub fn generate_channels(config: &SystemConfig, seed: u64) -> Result<ChannelSet> {
    config.validate()?;
    let p = &config.positions;
    let (m, n) = (config.antennas, config.elements);
    let var = |a, b| config.link_variance(a, b);
    let (v_cb, v_dd, v_cd, v_db) = (var(p.cu, p.bs)?, var(p.dt, p.dr)?, var(p.cu, p.dr)?, var(p.dt, p.bs)?);
    let (v_cs, v_sb, v_ts, v_sr) = (var(p.cu, p.ris)?, var(p.ris, p.bs)?, var(p.dt, p.ris)?, var(p.ris, p.dr)?);

    let mut gen = GaussianSource::new(seed);
    let g_c = gen.vector(m, v_cb);
    let g_d = gen.sample(v_dd);
    let f_c = gen.sample(v_cd);
    let f_d = gen.vector(m, v_db);
    let s_c = gen.vector(n, v_cs);
    let s_b_rows: Vec<C64> = (0..m * n).map(|_| gen.sample(v_sb)).collect();
    let s_b = CMatrix::from_row_slice(m, n, &s_b_rows);
    let s_t = gen.vector(n, v_ts);
    let s_r = gen.vector(n, v_sr);
    Ok(ChannelSet { g_c, g_d, f_c, f_d, s_c, s_b, s_t, s_r, seed })
}

/// Circularly-symmetric complex Gaussian draws from a ChaCha20 stream.
pub struct GaussianSource {
    rng: ChaCha20Rng,
}

impl GaussianSource {
    pub fn new(seed: u64) -> Self {
        Self { rng: ChaCha20Rng::seed_from_u64(seed) }
    }

    /// One draw with total variance `variance`.
    pub fn sample(&mut self, variance: f64) -> C64 {
        let u1: f64 = self.rng.random();
        let u2: f64 = self.rng.random();
        let r = (-2.0 * (1.0 - u1).ln()).sqrt() * (0.5 * variance).sqrt();
        C64::from_polar(r, 2.0 * PI * u2)
    }

    pub fn vector(&mut self, len: usize, variance: f64) -> CVector {
        CVector::from_fn(len, |_, _| self.sample(variance))
    }
}

/// RIS reflection coefficients `e^{jθ_n}`, stored as angles in `[0, 2π)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseVector {
    theta: Vec<f64>,
}

impl PhaseVector {
    pub fn zeros(n: usize) -> Self {
        Self { theta: vec![0.0; n] }
    }

    pub fn from_angles(angles: impl IntoIterator<Item = f64>) -> Self {
        Self { theta: angles.into_iter().map(wrap_angle).collect() }
    }

    /// Phases of arbitrary complex numbers; a zero entry maps to phase 0.
    pub fn from_phasors(z: impl IntoIterator<Item = C64>) -> Self {
        Self::from_angles(z.into_iter().map(|c| c.arg()))
    }

    /// Uniform phases.
    pub fn random<R: Rng>(n: usize, rng: &mut R) -> Self {
        Self::from_angles((0..n).map(|_| 2.0 * PI * rng.random::<f64>()))
    }

    pub fn len(&self) -> usize {
        self.theta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.theta.is_empty()
    }

    pub fn angles(&self) -> &[f64] {
        &self.theta
    }

    pub fn coefficients(&self) -> CVector {
        CVector::from_iterator(self.theta.len(), self.theta.iter().map(|&t| C64::from_polar(1.0, t)))
    }
}

fn wrap_angle(t: f64) -> f64 {
    let w = t.rem_euclid(2.0 * PI);
    // rem_euclid can round up to exactly 2π for tiny negative inputs
    if w >= 2.0 * PI {
        0.0
    } else {
        w
    }
}

/// Composite channels seen through the RIS for a fixed phase configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct EffectiveChannels {
    /// DT → DR: `g_D + s_Rᴴ Θ s_T`.
    pub h_d: C64,
    /// CU → DR: `f_C + s_Rᴴ Θ s_C`.
    pub h_c: C64,
    /// CU → BS: `g_C + S_B Θ s_C`.
    pub h_c_vec: CVector,
    /// DT → BS: `f_D + S_B Θ s_T`.
    pub h_d_vec: CVector,
}

pub fn effective_channels(ch: &ChannelSet, phi: &PhaseVector) -> Result<EffectiveChannels> {
    ch.check_dims()?;
    if phi.len() != ch.elements() {
        return Err(Error::DimensionMismatch(format!(
            "phase vector has {} entries, RIS has {} elements",
            phi.len(),
            ch.elements()
        )));
    }
    let theta = phi.coefficients();
    let theta_s_t = theta.component_mul(&ch.s_t);
    let theta_s_c = theta.component_mul(&ch.s_c);
    Ok(EffectiveChannels {
        h_d: ch.g_d + ch.s_r.dotc(&theta_s_t),
        h_c: ch.f_c + ch.s_r.dotc(&theta_s_c),
        h_c_vec: &ch.g_c + &ch.s_b * theta_s_c,
        h_d_vec: &ch.f_d + &ch.s_b * theta_s_t,
    })
}

impl EffectiveChannels {
    /// SINR at the D2D receiver.
    pub fn d2d_sinr(&self, p_d: f64, p_c: f64, sigma2_d: f64) -> f64 {
        p_d * self.h_d.norm_sqr() / (p_c * self.h_c.norm_sqr() + sigma2_d)
    }

    /// SINR of the cellular uplink after combining with `w`.
    pub fn uplink_sinr(&self, w: &CVector, p_d: f64, p_c: f64, sigma2_b: f64) -> f64 {
        let signal = w.dotc(&self.h_c_vec).norm_sqr();
        let interference = w.dotc(&self.h_d_vec).norm_sqr();
        p_c * signal / (p_d * interference + sigma2_b)
    }
}

/// Channel file layout. Complex numbers are `[re, im]`, `S_B` is a flat row-major list.
#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ChannelFile {
    config: SystemConfig,
    seed: u64,
    #[serde(rename = "g_C")]
    g_c: Vec<[f64; 2]>,
    #[serde(rename = "g_D")]
    g_d: [f64; 2],
    #[serde(rename = "f_C")]
    f_c: [f64; 2],
    #[serde(rename = "f_D")]
    f_d: Vec<[f64; 2]>,
    #[serde(rename = "s_C")]
    s_c: Vec<[f64; 2]>,
    #[serde(rename = "S_B")]
    s_b: Vec<[f64; 2]>,
    #[serde(rename = "s_T")]
    s_t: Vec<[f64; 2]>,
    #[serde(rename = "s_R")]
    s_r: Vec<[f64; 2]>,
}

fn pair(z: C64) -> [f64; 2] {
    [z.re, z.im]
}

fn pairs(v: &CVector) -> Vec<[f64; 2]> {
    v.iter().map(|&z| pair(z)).collect()
}

fn unpair(p: [f64; 2]) -> C64 {
    C64::new(p[0], p[1])
}

fn unpairs(v: &[[f64; 2]]) -> CVector {
    CVector::from_iterator(v.len(), v.iter().map(|&p| unpair(p)))
}

/// Serialize a configuration and realization to the channel JSON format.
///
/// Floats are written in shortest round-trip form, so reading the file back
/// reproduces every coefficient bit for bit.
pub fn channels_to_json(config: &SystemConfig, ch: &ChannelSet) -> Result<String> {
    ch.check_dims()?;
    if config.antennas != ch.antennas() || config.elements != ch.elements() {
        return Err(Error::DimensionMismatch(format!(
            "config is {}x{} but channels are {}x{}",
            config.antennas,
            config.elements,
            ch.antennas(),
            ch.elements()
        )));
    }
    let s_b = (0..ch.s_b.nrows())
        .flat_map(|r| (0..ch.s_b.ncols()).map(move |c| (r, c)))
        .map(|(r, c)| pair(ch.s_b[(r, c)]))
        .collect();
    let file = ChannelFile {
        config: config.clone(),
        seed: ch.seed,
        g_c: pairs(&ch.g_c),
        g_d: pair(ch.g_d),
        f_c: pair(ch.f_c),
        f_d: pairs(&ch.f_d),
        s_c: pairs(&ch.s_c),
        s_b,
        s_t: pairs(&ch.s_t),
        s_r: pairs(&ch.s_r),
    };
    Ok(serde_json::to_string_pretty(&file)?)
}

pub fn channels_from_json(text: &str) -> Result<(SystemConfig, ChannelSet)> {
    let file: ChannelFile = serde_json::from_str(text)?;
    file.config.validate()?;
    let (m, n) = (file.config.antennas, file.config.elements);
    if file.s_b.len() != m * n {
        return Err(Error::DimensionMismatch(format!("S_B has {} entries, expected {}", file.s_b.len(), m * n)));
    }
    let s_b_flat: Vec<C64> = file.s_b.iter().map(|&p| unpair(p)).collect();
    let ch = ChannelSet {
        g_c: unpairs(&file.g_c),
        g_d: unpair(file.g_d),
        f_c: unpair(file.f_c),
        f_d: unpairs(&file.f_d),
        s_c: unpairs(&file.s_c),
        s_b: CMatrix::from_row_slice(m, n, &s_b_flat),
        s_t: unpairs(&file.s_t),
        s_r: unpairs(&file.s_r),
        seed: file.seed,
    };
    ch.check_dims()?;
    if ch.antennas() != m || ch.elements() != n {
        return Err(Error::DimensionMismatch(format!(
            "config declares {m}x{n} but channels are {}x{}",
            ch.antennas(),
            ch.elements()
        )));
    }
    Ok((file.config, ch))
}

pub fn write_channel_file(path: impl AsRef<Path>, config: &SystemConfig, ch: &ChannelSet) -> Result<()> {
    let mut text = channels_to_json(config, ch)?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

pub fn read_channel_file(path: impl AsRef<Path>) -> Result<(SystemConfig, ChannelSet)> {
    channels_from_json(&std::fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn reference() -> SystemConfig {
        SystemConfig::default_geometry(1.0, [-0.5, 0.35])
    }

    #[test]
    fn default_geometry_layout() {
        let cfg = reference();
        assert_eq!(cfg.d2d_distance, 0.2);
        let close = |a: [f64; 2], b: [f64; 2]| (a[0] - b[0]).abs() < 1e-15 && (a[1] - b[1]).abs() < 1e-15;
        assert!(close(cfg.positions.dt, [0.0, -0.85]));
        assert!(close(cfg.positions.dr, [0.0, -0.65]));
        assert_eq!(cfg.positions.cu, [0.0, 0.5]);
        assert_eq!(cfg.positions.bs, [0.0, 0.0]);
        assert_eq!(cfg.antennas, 4);
        assert!((cfg.gamma_d_min - 1.9952623149688795).abs() < 1e-15);
        cfg.validate().unwrap();
    }

    #[test]
    fn default_geometry_scales_with_radius() {
        let a = reference();
        let b = SystemConfig::default_geometry(2.0, [-0.5, 0.35]);
        let pa = [a.positions.bs, a.positions.cu, a.positions.dt, a.positions.dr, a.positions.ris];
        let pb = [b.positions.bs, b.positions.cu, b.positions.dt, b.positions.dr, b.positions.ris];
        for (x, y) in pa.iter().zip(pb.iter()) {
            assert!((2.0 * x[0] - y[0]).abs() < 1e-15 && (2.0 * x[1] - y[1]).abs() < 1e-15);
        }
        assert_eq!(b.d2d_distance, 0.4);
    }

    #[test]
    fn link_variance_examples() {
        let cfg = reference();
        assert_eq!(cfg.link_variance([0.0, 0.0], [1.0, 0.0]).unwrap(), 1.0);
        assert!((cfg.link_variance([0.0, 0.0], [0.5, 0.0]).unwrap() - 16.0).abs() < 1e-12);
        assert!(matches!(cfg.link_variance([0.3, 0.3], [0.3, 0.3]), Err(Error::Geometry(_))));
    }

    #[test]
    fn colocated_nodes_are_rejected() {
        let mut cfg = reference();
        cfg.positions.ris = cfg.positions.cu;
        assert!(matches!(generate_channels(&cfg, 1), Err(Error::Geometry(_))));
    }

    #[test]
    fn unit_distance_sample_variance() {
        let mut src = GaussianSource::new(99);
        let n = 100_000;
        let mut power = 0.0;
        let mut mean = C64::new(0.0, 0.0);
        let mut re2 = 0.0;
        for _ in 0..n {
            let z = src.sample(1.0);
            power += z.norm_sqr();
            mean += z;
            re2 += z.re * z.re;
        }
        let var = power / n as f64;
        assert!((var - 1.0).abs() < 0.02, "sample variance {var}");
        assert!((mean / n as f64).norm() < 0.01);
        // circular symmetry: half the power in the real part
        assert!((re2 / n as f64 - 0.5).abs() < 0.01);
    }

    #[test]
    fn doubling_distance_divides_power_by_sixteen() {
        let mut near = GaussianSource::new(1);
        let mut far = GaussianSource::new(2);
        let cfg = reference();
        let v1 = cfg.link_variance([0.0, 0.0], [0.4, 0.0]).unwrap();
        let v2 = cfg.link_variance([0.0, 0.0], [0.8, 0.0]).unwrap();
        let n = 100_000;
        let p1: f64 = (0..n).map(|_| near.sample(v1).norm_sqr()).sum::<f64>() / n as f64;
        let p2: f64 = (0..n).map(|_| far.sample(v2).norm_sqr()).sum::<f64>() / n as f64;
        assert!(((p2 / p1) * 16.0 - 1.0).abs() < 0.05, "ratio {}", p2 / p1);
    }

    #[test]
    fn generation_is_deterministic_and_sized() {
        let cfg = reference();
        let a = generate_channels(&cfg, 7).unwrap();
        let b = generate_channels(&cfg, 7).unwrap();
        let c = generate_channels(&cfg, 8).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_eq!(a.s_b.shape(), (4, 8));
        assert_eq!(a.s_r.len(), 8);
    }

    #[test]
    fn direct_links_do_not_depend_on_ris_size() {
        let a = generate_channels(&reference().with_elements(4), 3).unwrap();
        let b = generate_channels(&reference().with_elements(32), 3).unwrap();
        assert_eq!(a.g_c, b.g_c);
        assert_eq!(a.g_d, b.g_d);
        assert_eq!(a.f_c, b.f_c);
        assert_eq!(a.f_d, b.f_d);
    }

    #[test]
    fn no_ris_effective_channels_are_direct() {
        let cfg = reference().with_elements(0);
        let ch = generate_channels(&cfg, 3).unwrap();
        let eff = effective_channels(&ch, &PhaseVector::zeros(0)).unwrap();
        assert_eq!(eff.h_d, ch.g_d);
        assert_eq!(eff.h_c, ch.f_c);
        assert_eq!(eff.h_c_vec, ch.g_c);
        assert_eq!(eff.h_d_vec, ch.f_d);
    }

    #[test]
    fn zero_phases_give_plain_inner_products() {
        let ch = generate_channels(&reference(), 4).unwrap();
        let eff = effective_channels(&ch, &PhaseVector::zeros(8)).unwrap();
        let expected = ch.g_d + ch.s_r.dotc(&ch.s_t);
        assert!((eff.h_d - expected).norm() < 1e-12);
    }

    #[test]
    fn effective_channels_match_naive_expansion() {
        let ch = generate_channels(&reference(), 5).unwrap();
        let phi = PhaseVector::from_angles((0..8).map(|i| 0.37 * i as f64 + 0.1));
        let eff = effective_channels(&ch, &phi).unwrap();
        let (m, n) = (4, 8);
        let t = phi.angles();
        let e = |k: usize| C64::new(t[k].cos(), t[k].sin());
        let mut h_d = ch.g_d;
        let mut h_c = ch.f_c;
        for k in 0..n {
            h_d += ch.s_r[k].conj() * e(k) * ch.s_t[k];
            h_c += ch.s_r[k].conj() * e(k) * ch.s_c[k];
        }
        assert!((eff.h_d - h_d).norm() < 1e-12);
        assert!((eff.h_c - h_c).norm() < 1e-12);
        for i in 0..m {
            let mut hc = ch.g_c[i];
            let mut hd = ch.f_d[i];
            for k in 0..n {
                hc += ch.s_b[(i, k)] * e(k) * ch.s_c[k];
                hd += ch.s_b[(i, k)] * e(k) * ch.s_t[k];
            }
            assert!((eff.h_c_vec[i] - hc).norm() < 1e-10);
            assert!((eff.h_d_vec[i] - hd).norm() < 1e-10);
        }
    }

    #[test]
    fn effective_channels_reject_wrong_phase_length() {
        let ch = generate_channels(&reference(), 5).unwrap();
        assert!(matches!(effective_channels(&ch, &PhaseVector::zeros(3)), Err(Error::DimensionMismatch(_))));
    }

    #[test]
    fn phase_vector_wraps_and_is_unit_modulus() {
        let phi = PhaseVector::from_angles([-0.5, 7.0, 2.0 * PI, -1e-20]);
        for &t in phi.angles() {
            assert!((0.0..2.0 * PI).contains(&t));
        }
        for z in phi.coefficients().iter() {
            assert!((z.norm() - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn empty_ris_file_is_valid() {
        let cfg = reference().with_elements(0);
        let ch = generate_channels(&cfg, 1).unwrap();
        let text = channels_to_json(&cfg, &ch).unwrap();
        assert!(text.contains("\"S_B\": []"));
        let (cfg2, ch2) = channels_from_json(&text).unwrap();
        assert_eq!(cfg, cfg2);
        assert_eq!(ch, ch2);
    }

    #[test]
    fn channel_file_rejects_unknown_fields_and_bad_shapes() {
        let cfg = reference();
        let ch = generate_channels(&cfg, 1).unwrap();
        let text = channels_to_json(&cfg, &ch).unwrap();
        let extra = text.replacen('{', "{\"bogus\": 1,", 1);
        assert!(matches!(channels_from_json(&extra), Err(Error::Json(_))));
        let mut value: serde_json::Value = serde_json::from_str(&text).unwrap();
        value["S_B"].as_array_mut().unwrap().pop();
        assert!(matches!(channels_from_json(&value.to_string()), Err(Error::DimensionMismatch(_))));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn channel_file_round_trips_bit_exactly(seed in any::<u64>(), n in 0usize..6, m in 1usize..5) {
            let mut cfg = reference().with_elements(n);
            cfg.antennas = m;
            let ch = generate_channels(&cfg, seed).unwrap();
            let text = channels_to_json(&cfg, &ch).unwrap();
            let (cfg2, ch2) = channels_from_json(&text).unwrap();
            prop_assert_eq!(&cfg, &cfg2);
            let bits = |v: &CVector| v.iter().flat_map(|z| [z.re.to_bits(), z.im.to_bits()]).collect::<Vec<_>>();
            prop_assert_eq!(bits(&ch.g_c), bits(&ch2.g_c));
            prop_assert_eq!(bits(&ch.s_r), bits(&ch2.s_r));
            prop_assert_eq!(ch, ch2);
        }
    }
}
