//! File formats of the command line, in engineering units.

use anyhow::{bail, ensure, Result};
use ris_d2d::bcd::BcdOptions;
use ris_d2d::channel::{db_to_linear, SystemConfig};
use ris_d2d::sweep::{Scheme, SweepPlan, SweepPoint};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConfigFile {
    pub antennas: usize,
    pub elements: usize,
    pub d0_m: f64,
    /// RIS location as a multiple of `d0_m`.
    pub ris_position_d0: [f64; 2],
    pub p_max_dbw: f64,
    pub p_d_max_dbw: Option<f64>,
    pub p_c_max_dbw: Option<f64>,
    pub gamma_d_min_db: f64,
    pub gamma_c_min_db: f64,
    pub noise_bs_dbw: f64,
    pub noise_dr_dbw: f64,
    pub pathloss_exponent: f64,
}

impl Default for ConfigFile {
    fn default() -> Self {
        Self {
            antennas: 4,
            elements: 8,
            d0_m: 100.0,
            ris_position_d0: [-0.5, 0.35],
            p_max_dbw: 10.0,
            p_d_max_dbw: None,
            p_c_max_dbw: None,
            gamma_d_min_db: 3.0,
            gamma_c_min_db: 3.0,
            noise_bs_dbw: 0.0,
            noise_dr_dbw: 0.0,
            pathloss_exponent: 4.0,
        }
    }
}

impl ConfigFile {
    pub fn to_system(&self) -> Result<SystemConfig> {
        let mut cfg = SystemConfig::default_geometry(self.d0_m, self.ris_position_d0);
        cfg.antennas = self.antennas;
        cfg.elements = self.elements;
        cfg.p_d_max = db_to_linear(self.p_d_max_dbw.unwrap_or(self.p_max_dbw));
        cfg.p_c_max = db_to_linear(self.p_c_max_dbw.unwrap_or(self.p_max_dbw));
        cfg.gamma_d_min = db_to_linear(self.gamma_d_min_db);
        cfg.gamma_c_min = db_to_linear(self.gamma_c_min_db);
        cfg.sigma2_b = db_to_linear(self.noise_bs_dbw);
        cfg.sigma2_d = db_to_linear(self.noise_dr_dbw);
        cfg.pathloss_exponent = self.pathloss_exponent;
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SweepVariable {
    N,
    #[serde(rename = "P_m_dBW")]
    PmDbw,
}

impl SweepVariable {
    fn name(self) -> &'static str {
        match self {
            SweepVariable::N => "N",
            SweepVariable::PmDbw => "P_m_dBW",
        }
    }
}

fn default_schemes() -> Vec<Scheme> {
    Scheme::ALL.to_vec()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepFile {
    pub variable: SweepVariable,
    pub values: Vec<f64>,
    pub trials: usize,
    #[serde(default)]
    pub base_config: ConfigFile,
    #[serde(default = "default_schemes")]
    pub schemes: Vec<Scheme>,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default)]
    pub options: BcdOptions,
}

impl SweepFile {
    pub fn to_plan(&self) -> Result<SweepPlan> {
        ensure!(!self.values.is_empty(), "sweep values must not be empty");
        ensure!(self.trials >= 1, "trials must be at least 1");
        let mut points = Vec::with_capacity(self.values.len());
        for &value in &self.values {
            let mut file = self.base_config.clone();
            match self.variable {
                SweepVariable::N => {
                    if !(value >= 0.0 && value.fract() == 0.0 && value <= u32::MAX as f64) {
                        bail!("N values must be non-negative integers, got {value}");
                    }
                    file.elements = value as usize;
                }
                SweepVariable::PmDbw => {
                    file.p_max_dbw = value;
                    file.p_d_max_dbw = None;
                    file.p_c_max_dbw = None;
                }
            }
            points.push(SweepPoint { value, config: file.to_system()? });
        }
        let mut schemes = Vec::new();
        for s in &self.schemes {
            if !schemes.contains(s) {
                schemes.push(*s);
            }
        }
        Ok(SweepPlan {
            variable: self.variable.name().to_string(),
            points,
            trials: self.trials,
            schemes,
            master_seed: self.master_seed,
            options: self.options,
        })
    }
}
