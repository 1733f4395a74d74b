//! Block coordinate ascent over the combiner, the power pair and the RIS phases.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::beamforming::optimal_receiver;
use crate::channel::{effective_channels, ChannelSet, PhaseVector, SystemConfig};
use crate::error::{Error, Result};
use crate::exec::derive_seed;
use crate::linalg::{CVector, C64};
use crate::phase::{improves, meets_target, optimize_phases, scalarize, LinkBudget, PhaseOptions, PhaseTrace, QOS_TOL};
use crate::power::{optimal_power, PowerCase, PowerCoefficients, PowerLimits};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InfeasiblePolicy {
    /// Keep the previous powers and carry on; a later phase update may restore feasibility.
    #[default]
    KeepPrevious,
    Abort,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BlockOrder {
    /// Combiner, powers, phases.
    #[default]
    ReceiverPowerPhase,
    /// Phases first, then combiner and powers.
    PhaseReceiverPower,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhaseInit {
    #[default]
    Zeros,
    Random {
        seed: u64,
    },
}

impl PhaseInit {
    pub fn phases(self, n: usize) -> PhaseVector {
        match self {
            PhaseInit::Zeros => PhaseVector::zeros(n),
            PhaseInit::Random { seed } => PhaseVector::random(n, &mut ChaCha20Rng::seed_from_u64(seed)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BcdOptions {
    pub max_outer: usize,
    /// Stop once an outer iteration gains less than this (nats).
    pub tol_rate: f64,
    pub phase: PhaseOptions,
    pub on_infeasible: InfeasiblePolicy,
    pub order: BlockOrder,
    pub phase_init: PhaseInit,
}

impl Default for BcdOptions {
    fn default() -> Self {
        Self {
            max_outer: 30,
            tol_rate: 1e-4,
            phase: PhaseOptions::default(),
            on_infeasible: InfeasiblePolicy::default(),
            order: BlockOrder::default(),
            phase_init: PhaseInit::default(),
        }
    }
}

impl BcdOptions {
    fn validate(&self) -> Result<()> {
        if self.max_outer == 0 || self.phase.max_inner == 0 || self.phase.samples == 0 {
            return Err(Error::invalid("iteration caps and sample counts must be positive"));
        }
        if !(self.tol_rate > 0.0 && self.phase.tol_rate > 0.0) {
            return Err(Error::invalid("rate tolerances must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BcdStatus {
    Converged,
    MaxIters,
    Infeasible,
}

/// Relative constraint slacks of a solution; all are `>= 0` for a feasible point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConstraintAudit {
    /// `γ_D / γ_D^min − 1`
    pub d2d_sinr: f64,
    /// `γ_C / γ_C^min − 1`
    pub uplink_sinr: f64,
    /// `1 − p_D / p_D^max`, and the same for the CU.
    pub p_d_budget: f64,
    pub p_c_budget: f64,
    /// `min(p_D, p_C)`
    pub power_nonnegative: f64,
    /// `1 − |‖w‖ − 1|` offset to a slack: `−|‖w‖ − 1|`.
    pub combiner_norm: f64,
    /// `−max_n ||θ_n| − 1|`.
    pub unit_modulus: f64,
}

impl ConstraintAudit {
    pub fn min_slack(&self) -> f64 {
        [
            self.d2d_sinr,
            self.uplink_sinr,
            self.p_d_budget,
            self.p_c_budget,
            self.power_nonnegative,
            self.combiner_norm,
            self.unit_modulus,
        ]
        .into_iter()
        .fold(f64::INFINITY, f64::min)
    }

    pub fn passes(&self, tol: f64) -> bool {
        self.min_slack() >= -tol
    }
}

fn relative_slack(value: f64, target: f64) -> f64 {
    if target > 0.0 {
        value / target - 1.0
    } else {
        value
    }
}

fn complex_pairs(v: &CVector) -> Vec<[f64; 2]> {
    v.iter().map(|z| [z.re, z.im]).collect()
}

/// Per-outer-iteration snapshot, taken after all three blocks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub sum_rate: f64,
    pub feasible: bool,
    pub gamma_d: f64,
    pub gamma_c: f64,
    pub p_d: f64,
    pub p_c: f64,
    pub power_case: PowerCase,
    pub power_accepted: bool,
    pub w: Vec<[f64; 2]>,
    pub theta: Vec<f64>,
    pub phase: Option<PhaseTrace>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolutionReport {
    pub status: BcdStatus,
    pub sum_rate: f64,
    pub feasible: bool,
    pub gamma_d: f64,
    pub gamma_c: f64,
    pub p_d: f64,
    pub p_c: f64,
    pub w: Vec<[f64; 2]>,
    pub theta: Vec<f64>,
    pub initial_rate: f64,
    pub channel_seed: u64,
    pub audit: ConstraintAudit,
    pub iterations: Vec<IterationRecord>,
}

impl SolutionReport {
    pub fn outer_iterations(&self) -> usize {
        self.iterations.len()
    }

    /// Rates are non-decreasing while feasibility is unchanged, and feasibility is never lost.
    pub fn is_monotone(&self) -> bool {
        self.iterations.windows(2).all(|p| {
            let (a, b) = (&p[0], &p[1]);
            (b.feasible && !a.feasible) || (a.feasible == b.feasible && b.sum_rate >= a.sum_rate)
        })
    }

    pub fn combiner(&self) -> CVector {
        CVector::from_iterator(self.w.len(), self.w.iter().map(|p| C64::new(p[0], p[1])))
    }
}

#[derive(Debug, Clone)]
struct State {
    w: CVector,
    p_d: f64,
    p_c: f64,
    phi: PhaseVector,
    gamma_d: f64,
    gamma_c: f64,
    rate: f64,
    feasible: bool,
}

struct Problem<'a> {
    config: &'a SystemConfig,
    ch: &'a ChannelSet,
    budget: LinkBudget,
    limits: PowerLimits,
}

impl Problem<'_> {
    fn evaluate(&self, w: CVector, p_d: f64, p_c: f64, phi: PhaseVector) -> Result<State> {
        let eff = effective_channels(self.ch, &phi)?;
        let gamma_d = eff.d2d_sinr(p_d, p_c, self.config.sigma2_d);
        let gamma_c = eff.uplink_sinr(&w, p_d, p_c, self.config.sigma2_b);
        let feasible = meets_target(gamma_d, self.budget.gamma_d_min, QOS_TOL)
            && meets_target(gamma_c, self.budget.gamma_c_min, QOS_TOL)
            && p_d <= self.limits.p_d_max * (1.0 + QOS_TOL)
            && p_c <= self.limits.p_c_max * (1.0 + QOS_TOL);
        Ok(State { w, p_d, p_c, phi, gamma_d, gamma_c, rate: gamma_d.ln_1p() + gamma_c.ln_1p(), feasible })
    }

    fn receiver(&self, s: &State) -> Result<State> {
        let eff = effective_channels(self.ch, &s.phi)?;
        let bf = optimal_receiver(&eff, s.p_d, s.p_c, self.config.sigma2_b)?;
        let next = self.evaluate(bf.w, s.p_d, s.p_c, s.phi.clone())?;
        Ok(if improves((s.feasible, s.rate), (next.feasible, next.rate)) { s.clone() } else { next })
    }

    /// Power update followed by the matching combiner. Returns the power case and
    /// whether the update was kept; `None` for the case when the region is empty.
    fn power(&self, s: &State) -> Result<(State, Option<PowerCase>, bool)> {
        let eff = effective_channels(self.ch, &s.phi)?;
        let co = PowerCoefficients::new(&eff, self.config);
        let pair = optimal_power(&co, &self.limits, self.config.sigma2_d);
        if !pair.is_feasible() {
            return Ok((s.clone(), None, false));
        }
        let bf = optimal_receiver(&eff, pair.p_d, pair.p_c, self.config.sigma2_b)?;
        let next = self.evaluate(bf.w, pair.p_d, pair.p_c, s.phi.clone())?;
        if improves((s.feasible, s.rate), (next.feasible, next.rate)) {
            Ok((s.clone(), Some(pair.case), false))
        } else {
            Ok((next, Some(pair.case), true))
        }
    }

    fn phases(&self, s: &State, opts: &PhaseOptions) -> Result<(State, PhaseTrace)> {
        let sc = scalarize(self.ch, &s.w, s.p_d, s.p_c)?;
        let (phi, trace) = optimize_phases(&sc, &self.budget, &s.phi, opts)?;
        let next = self.evaluate(s.w.clone(), s.p_d, s.p_c, phi)?;
        Ok(if improves((s.feasible, s.rate), (next.feasible, next.rate)) { (s.clone(), trace) } else { (next, trace) })
    }

    fn audit(&self, s: &State) -> ConstraintAudit {
        let unit = s.phi.coefficients().iter().map(|z| (z.norm() - 1.0).abs()).fold(0.0, f64::max);
        ConstraintAudit {
            d2d_sinr: relative_slack(s.gamma_d, self.budget.gamma_d_min),
            uplink_sinr: relative_slack(s.gamma_c, self.budget.gamma_c_min),
            p_d_budget: 1.0 - s.p_d / self.limits.p_d_max,
            p_c_budget: 1.0 - s.p_c / self.limits.p_c_max,
            power_nonnegative: s.p_d.min(s.p_c),
            combiner_norm: -(s.w.norm() - 1.0).abs(),
            unit_modulus: -unit,
        }
    }
}

fn record(iteration: usize, s: &State, case: Option<PowerCase>, power_accepted: bool, phase: Option<PhaseTrace>) -> IterationRecord {
    IterationRecord {
        iteration,
        sum_rate: s.rate,
        feasible: s.feasible,
        gamma_d: s.gamma_d,
        gamma_c: s.gamma_c,
        p_d: s.p_d,
        p_c: s.p_c,
        power_case: case.unwrap_or(PowerCase::Infeasible),
        power_accepted,
        w: complex_pairs(&s.w),
        theta: s.phi.angles().to_vec(),
        phase,
    }
}

fn run(config: &SystemConfig, ch: &ChannelSet, opts: &BcdOptions, phi0: PhaseVector, optimize_theta: bool) -> Result<SolutionReport> {
    config.validate()?;
    ch.check_dims()?;
    opts.validate()?;
    if ch.antennas() != config.antennas {
        return Err(Error::DimensionMismatch(format!(
            "channels have {} BS antennas, config has {}",
            ch.antennas(),
            config.antennas
        )));
    }
    let problem = Problem { config, ch, budget: LinkBudget::from(config), limits: PowerLimits::from(config) };
    let n = ch.elements();
    let optimize_theta = optimize_theta && n > 0;

    let eff = effective_channels(ch, &phi0)?;
    let w0 = optimal_receiver(&eff, config.p_d_max, config.p_c_max, config.sigma2_b)?.w;
    let mut state = problem.evaluate(w0, config.p_d_max, config.p_c_max, phi0)?;
    let initial_rate = state.rate;
    let mut iterations = Vec::new();
    let mut status = BcdStatus::MaxIters;

    for k in 0..opts.max_outer {
        let before = (state.feasible, state.rate);
        let phase_opts = PhaseOptions { seed: derive_seed(opts.phase.seed, k as u64), ..opts.phase };
        let mut trace = None;
        if optimize_theta && opts.order == BlockOrder::PhaseReceiverPower {
            let (next, t) = problem.phases(&state, &phase_opts)?;
            state = next;
            trace = Some(t);
        }
        state = problem.receiver(&state)?;
        let (next, case, accepted) = problem.power(&state)?;
        state = next;
        if case.is_none() && opts.on_infeasible == InfeasiblePolicy::Abort {
            iterations.push(record(k, &state, case, accepted, trace));
            status = BcdStatus::Infeasible;
            break;
        }
        if optimize_theta && opts.order == BlockOrder::ReceiverPowerPhase {
            let (next, t) = problem.phases(&state, &phase_opts)?;
            state = next;
            trace = Some(t);
        }
        log::debug!("bcd outer {k}: rate {:.6} feasible {} case {case:?}", state.rate, state.feasible);
        iterations.push(record(k, &state, case, accepted, trace));
        let gained_feasibility = state.feasible && !before.0;
        if k > 0 && !gained_feasibility && state.rate - before.1 < opts.tol_rate {
            status = BcdStatus::Converged;
            break;
        }
    }
    if !state.feasible {
        status = BcdStatus::Infeasible;
    }
    Ok(SolutionReport {
        status,
        sum_rate: state.rate,
        feasible: state.feasible,
        gamma_d: state.gamma_d,
        gamma_c: state.gamma_c,
        p_d: state.p_d,
        p_c: state.p_c,
        w: complex_pairs(&state.w),
        theta: state.phi.angles().to_vec(),
        initial_rate,
        channel_seed: ch.seed,
        audit: problem.audit(&state),
        iterations,
    })
}

/// Jointly optimize combiner, powers and RIS phases.
pub fn run_bcd(config: &SystemConfig, ch: &ChannelSet, opts: &BcdOptions) -> Result<SolutionReport> {
    run(config, ch, opts, opts.phase_init.phases(ch.elements()), true)
}

/// Same alternation on the direct links only.
pub fn solve_baseline_no_ris(config: &SystemConfig, ch: &ChannelSet, opts: &BcdOptions) -> Result<SolutionReport> {
    let direct = ch.without_ris();
    let config = SystemConfig { elements: 0, ..config.clone() };
    run(&config, &direct, opts, PhaseVector::zeros(0), false)
}

/// Uniformly random phases drawn once from `seed` and held fixed.
pub fn solve_baseline_random_phase(config: &SystemConfig, ch: &ChannelSet, seed: u64, opts: &BcdOptions) -> Result<SolutionReport> {
    let phi = PhaseVector::random(ch.elements(), &mut ChaCha20Rng::seed_from_u64(seed));
    run(config, ch, opts, phi, false)
}
