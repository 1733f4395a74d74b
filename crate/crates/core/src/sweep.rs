//! Monte-Carlo sweeps over one system parameter, with baselines and CSV output.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::bcd::{run_bcd, solve_baseline_no_ris, solve_baseline_random_phase, BcdOptions, BcdStatus, SolutionReport};
use crate::channel::{generate_channels, SystemConfig};
use crate::error::{Error, Result};
use crate::exec::{derive_seed, Execution};

pub const CSV_HEADER: &str = "variable,value,trial,scheme,sum_rate_nats,gamma_D,gamma_C,p_D,p_C,iterations,status";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    RisBcd,
    NoRis,
    RandomPhase,
}

impl Scheme {
    pub const ALL: [Scheme; 3] = [Scheme::RisBcd, Scheme::NoRis, Scheme::RandomPhase];

    pub fn name(self) -> &'static str {
        match self {
            Scheme::RisBcd => "ris_bcd",
            Scheme::NoRis => "no_ris",
            Scheme::RandomPhase => "random_phase",
        }
    }
}

/// One value of the swept variable and the configuration it produces.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    /// Printed in the `value` column.
    pub value: f64,
    pub config: SystemConfig,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepPlan {
    /// Printed in the `variable` column.
    pub variable: String,
    pub points: Vec<SweepPoint>,
    pub trials: usize,
    pub schemes: Vec<Scheme>,
    pub master_seed: u64,
    pub options: BcdOptions,
}

impl SweepPlan {
    pub fn validate(&self) -> Result<()> {
        if self.points.is_empty() {
            return Err(Error::invalid("sweep needs at least one value"));
        }
        if self.trials == 0 {
            return Err(Error::invalid("sweep needs at least one trial"));
        }
        if self.schemes.is_empty() {
            return Err(Error::invalid("sweep needs at least one scheme"));
        }
        if self.variable.contains([',', '\n']) {
            return Err(Error::invalid("variable name must not contain commas or newlines"));
        }
        for p in &self.points {
            p.config.validate()?;
        }
        Ok(())
    }

    /// Channel realization of a trial. Shared across values and schemes.
    pub fn channel_seed(&self, trial: usize) -> u64 {
        derive_seed(self.master_seed, trial as u64)
    }
}

#[derive(Debug, Clone)]
pub struct TrialResult {
    pub point: usize,
    pub trial: usize,
    pub scheme: Scheme,
    pub outcome: std::result::Result<SolutionReport, String>,
}

impl TrialResult {
    /// Sum rate counted toward the mean; infeasible or failed trials count as zero.
    pub fn achieved_rate(&self) -> f64 {
        match &self.outcome {
            Ok(r) if r.feasible => r.sum_rate,
            _ => 0.0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SweepOutcome {
    pub plan: SweepPlan,
    /// Ordered by point, then trial, then scheme as listed in the plan.
    pub trials: Vec<TrialResult>,
}

fn solve_trial(plan: &SweepPlan, point: &SweepPoint, trial: usize, scheme: Scheme) -> Result<SolutionReport> {
    let seed = plan.channel_seed(trial);
    let ch = generate_channels(&point.config, seed)?;
    let mut opts = plan.options;
    opts.phase.seed = derive_seed(seed, 2);
    match scheme {
        Scheme::RisBcd => run_bcd(&point.config, &ch, &opts),
        Scheme::NoRis => solve_baseline_no_ris(&point.config, &ch, &opts),
        Scheme::RandomPhase => solve_baseline_random_phase(&point.config, &ch, derive_seed(seed, 1), &opts),
    }
}

/// Runs every (value, trial, scheme) combination. Failures are recorded, not propagated.
pub fn run_sweep(plan: &SweepPlan, exec: Execution) -> Result<SweepOutcome> {
    plan.validate()?;
    let per_point = plan.trials * plan.schemes.len();
    let trials = exec.map_range(plan.points.len() * per_point, |i| {
        let point = i / per_point;
        let trial = (i % per_point) / plan.schemes.len();
        let scheme = plan.schemes[i % plan.schemes.len()];
        let outcome = solve_trial(plan, &plan.points[point], trial, scheme).map_err(|e| e.to_string());
        if let Err(e) = &outcome {
            log::warn!("{} = {}, trial {trial}, {}: {e}", plan.variable, plan.points[point].value, scheme.name());
        }
        TrialResult { point, trial, scheme, outcome }
    });
    Ok(SweepOutcome { plan: plan.clone(), trials })
}

fn status_name(s: BcdStatus) -> &'static str {
    match s {
        BcdStatus::Converged => "converged",
        BcdStatus::MaxIters => "max_iters",
        BcdStatus::Infeasible => "infeasible",
    }
}

/// Twelve significant digits, fixed-point where the magnitude allows.
pub fn format_number(x: f64) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    if !x.is_finite() {
        return if x.is_nan() { "nan" } else if x > 0.0 { "inf" } else { "-inf" }.to_string();
    }
    let mag = x.abs();
    if (1e-6..1e15).contains(&mag) {
        let decimals = (11 - mag.log10().floor() as i32).max(0) as usize;
        format!("{x:.decimals$}")
    } else {
        format!("{x:.11e}")
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SchemeMean {
    pub sum_rate: f64,
    pub gamma_d: f64,
    pub gamma_c: f64,
    pub p_d: f64,
    pub p_c: f64,
    pub iterations: f64,
    pub feasible: usize,
    pub failed: usize,
}

impl SweepOutcome {
    pub fn results(&self, point: usize, scheme: Scheme) -> impl Iterator<Item = &TrialResult> {
        self.trials.iter().filter(move |t| t.point == point && t.scheme == scheme)
    }

    /// Per-trial achieved rates of one scheme at one value, in trial order.
    pub fn rates(&self, point: usize, scheme: Scheme) -> Vec<f64> {
        self.results(point, scheme).map(TrialResult::achieved_rate).collect()
    }

    pub fn mean(&self, point: usize, scheme: Scheme) -> SchemeMean {
        let mut m = SchemeMean { sum_rate: 0.0, gamma_d: 0.0, gamma_c: 0.0, p_d: 0.0, p_c: 0.0, iterations: 0.0, feasible: 0, failed: 0 };
        let mut solved = 0usize;
        let mut total = 0usize;
        for t in self.results(point, scheme) {
            total += 1;
            m.sum_rate += t.achieved_rate();
            match &t.outcome {
                Ok(r) => {
                    solved += 1;
                    m.gamma_d += r.gamma_d;
                    m.gamma_c += r.gamma_c;
                    m.p_d += r.p_d;
                    m.p_c += r.p_c;
                    m.iterations += r.outer_iterations() as f64;
                    m.feasible += usize::from(r.feasible);
                }
                Err(_) => m.failed += 1,
            }
        }
        m.sum_rate /= total.max(1) as f64;
        let k = solved.max(1) as f64;
        m.gamma_d /= k;
        m.gamma_c /= k;
        m.p_d /= k;
        m.p_c /= k;
        m.iterations /= k;
        m
    }

    pub fn to_csv(&self) -> String {
        let plan = &self.plan;
        let mut out = String::new();
        out.push_str(CSV_HEADER);
        out.push('\n');
        for (pi, point) in plan.points.iter().enumerate() {
            let prefix = format!("{},{}", plan.variable, point.value);
            for t in self.trials.iter().filter(|t| t.point == pi) {
                let _ = match &t.outcome {
                    Ok(r) => writeln!(
                        out,
                        "{prefix},{},{},{},{},{},{},{},{},{}",
                        t.trial,
                        t.scheme.name(),
                        format_number(r.sum_rate),
                        format_number(r.gamma_d),
                        format_number(r.gamma_c),
                        format_number(r.p_d),
                        format_number(r.p_c),
                        r.outer_iterations(),
                        status_name(r.status)
                    ),
                    Err(_) => writeln!(out, "{prefix},{},{},nan,nan,nan,nan,nan,0,error", t.trial, t.scheme.name()),
                };
            }
            for &scheme in &plan.schemes {
                let m = self.mean(pi, scheme);
                let _ = writeln!(
                    out,
                    "{prefix},mean,{},{},{},{},{},{},{},mean",
                    scheme.name(),
                    format_number(m.sum_rate),
                    format_number(m.gamma_d),
                    format_number(m.gamma_c),
                    format_number(m.p_d),
                    format_number(m.p_c),
                    format_number(m.iterations)
                );
            }
        }
        out
    }
}
