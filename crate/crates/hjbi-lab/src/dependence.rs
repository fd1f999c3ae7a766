//! Explicit continuous dependence bounds and paired experiments.
//!
//! Parabolic bound: with `s = (2 K_H)^{1/(2 - gamma)}` built from the
//! Hoelder data of the solutions and `G = 2 L_sigma^2 s^2 + 2 + L_f s^2 + s`
//! from the coefficient Lipschitz constants,
//!
//! ```text
//! sup |u_1(t) - u_2(t)| <= t G (d_sigma^gamma + d_f^{gamma/2})
//!                        + t (d_l + omega(s (d_sigma + d_f^{1/2})))
//! ```
//!
//! Ergodic bound: with `M = 2 K (1 + max|l|) (2 L_sigma^2 + 2 + L_f)` where
//! `K` bounds the Lipschitz seminorms of normalized correctors uniformly in
//! the discount,
//!
//! ```text
//! |U_1 - U_2| <= M (d_sigma + d_f) + omega(d_sigma) + d_l
//! ```
//!
//! Experiments solve both problems on a shared grid and time step, compare
//! the measured gap against the bound plus an explicit discretization slack,
//! and never blame the estimate for scheme error: a violation verdict is
//! only issued when the gap exceeds the slack.

use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::ergodic::{
    corrector_regularity_check, discounted_schedule_with_scheme, DiscountedOptions,
    DEFAULT_DELTA_SCHEDULE,
};
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::operator::{
    coefficient_distance, CoefficientDistance, HjbiOperator, RegularityCertificate, SampleSpec,
};
use crate::parabolic::{solve_with_scheme, ParabolicOptions, ParabolicTrajectory};
use crate::scheme::{hoelder_seminorm, Scheme};

/// Where the corrector-regularity constant in the ergodic bound comes from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum RegularitySource {
    Declared { value: f64 },
    Empirical { measured: f64, safety: f64 },
}

impl RegularitySource {
    pub fn value(&self) -> f64 {
        match self {
            RegularitySource::Declared { value } => *value,
            RegularitySource::Empirical { measured, safety } => measured * safety,
        }
    }
}

/// The explicit constants entering the bounds, derived from a certificate.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BoundConstants {
    /// `(2 K_H)^{1/(2 - gamma)}`: scale of the modulus argument.
    pub shift_scale: f64,
    /// `2 L_sigma^2 s^2 + 2 + L_f s^2 + s`: growth factor of the parabolic
    /// bound.
    pub parabolic_factor: f64,
    /// `2 K (1 + max|l|) (2 L_sigma^2 + 2 + L_f)`: factor of the ergodic
    /// bound; present when the regularity constant is known.
    pub ergodic_factor: Option<f64>,
    pub regularity_source: Option<RegularitySource>,
}

impl BoundConstants {
    /// Derives the parabolic constants from a certificate.
    pub fn parabolic(cert: &RegularityCertificate) -> Result<BoundConstants> {
        let gamma = cert.hoelder_exponent;
        if !(gamma > 0.0 && gamma <= 1.0) {
            return Err(Error::config("hoelder exponent must lie in (0, 1]"));
        }
        let shift_scale = (2.0 * cert.hoelder_seminorm).powf(1.0 / (2.0 - gamma));
        let s2 = shift_scale * shift_scale;
        let parabolic_factor =
            2.0 * cert.lip_sigma * cert.lip_sigma * s2 + 2.0 + cert.lip_drift * s2 + shift_scale;
        Ok(BoundConstants {
            shift_scale,
            parabolic_factor,
            ergodic_factor: None,
            regularity_source: None,
        })
    }

    /// Adds the ergodic factor given a regularity constant and the larger
    /// of the two sampled cost sup-norms.
    pub fn with_ergodic(
        mut self,
        cert: &RegularityCertificate,
        source: RegularitySource,
        max_cost: f64,
    ) -> BoundConstants {
        let k = source.value();
        self.ergodic_factor = Some(
            2.0 * k
                * (1.0 + max_cost)
                * (2.0 * cert.lip_sigma * cert.lip_sigma + 2.0 + cert.lip_drift),
        );
        self.regularity_source = Some(source);
        self
    }
}

/// Right-hand side of the parabolic dependence bound at time `t`.
pub fn parabolic_bound_rhs(
    dist: &CoefficientDistance,
    cert: &RegularityCertificate,
    t: f64,
) -> Result<f64> {
    let constants = BoundConstants::parabolic(cert)?;
    Ok(parabolic_bound_rhs_with(dist, cert, &constants, t))
}

fn parabolic_bound_rhs_with(
    dist: &CoefficientDistance,
    cert: &RegularityCertificate,
    constants: &BoundConstants,
    t: f64,
) -> f64 {
    let gamma = cert.hoelder_exponent;
    let growth =
        constants.parabolic_factor * (dist.sigma.powf(gamma) + dist.drift.powf(gamma / 2.0));
    let modulus_arg = constants.shift_scale * (dist.sigma + dist.drift.sqrt());
    t * growth + t * (dist.cost + cert.cost_modulus.eval(modulus_arg))
}

/// Right-hand side of the ergodic dependence bound.
pub fn ergodic_bound_rhs(
    dist: &CoefficientDistance,
    cert: &RegularityCertificate,
    regularity: RegularitySource,
    max_cost: f64,
) -> Result<f64> {
    let constants = BoundConstants::parabolic(cert)?.with_ergodic(cert, regularity, max_cost);
    Ok(ergodic_bound_rhs_with(dist, cert, &constants))
}

fn ergodic_bound_rhs_with(
    dist: &CoefficientDistance,
    cert: &RegularityCertificate,
    constants: &BoundConstants,
) -> f64 {
    let factor = constants
        .ergodic_factor
        .expect("ergodic factor requires a regularity source");
    factor * (dist.sigma + dist.drift) + cert.cost_modulus.eval(dist.sigma) + dist.cost
}

/// Outcome of a dependence experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum Verdict {
    /// Measured gap stays below bound + slack at every stored time.
    Holds,
    /// Gap exceeds bound + slack and the bound dominates the slack there.
    Violated { witness_time: f64 },
    /// Gap exceeds bound + slack but the slack dominates the bound at the
    /// witness: the discretization, not the estimate, is in question.
    Inconclusive { witness_time: f64 },
}

impl Verdict {
    pub fn holds(&self) -> bool {
        matches!(self, Verdict::Holds)
    }
}

fn render_verdict(times: &[f64], empirical: &[f64], bound: &[f64], slack: f64) -> Verdict {
    for ((&t, &e), &b) in times.iter().zip(empirical).zip(bound) {
        if e > b + slack {
            return if b <= slack {
                Verdict::Inconclusive { witness_time: t }
            } else {
                Verdict::Violated { witness_time: t }
            };
        }
    }
    Verdict::Holds
}

/// Paired parabolic experiment: curves of measured gap vs theoretical bound.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ParabolicDependenceReport {
    pub distances: CoefficientDistance,
    pub constants: BoundConstants,
    /// Certificate the bound was evaluated with (shared by both operators).
    pub certificate: RegularityCertificate,
    pub times: Vec<f64>,
    pub empirical: Vec<f64>,
    pub bound: Vec<f64>,
    /// `bound - empirical` per stored time.
    pub margin: Vec<f64>,
    pub slack: f64,
    pub verdict: Verdict,
}

impl ParabolicDependenceReport {
    pub fn write_json(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).map_err(|e| Error::Serde(e.to_string()))?;
        std::fs::write(path, text)?;
        Ok(())
    }

    /// CSV of `(t, empirical, bound, margin)` rows.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut out = String::from("t,empirical,bound,margin\n");
        for k in 0..self.times.len() {
            out.push_str(&format!(
                "{},{},{},{}\n",
                self.times[k], self.empirical[k], self.bound[k], self.margin[k]
            ));
        }
        std::fs::write(path, out)?;
        Ok(())
    }
}

/// Options for [`parabolic_dependence_experiment`].
#[derive(Debug, Clone)]
pub struct ParabolicExperimentOptions {
    /// Number of comparison times (exact checkpoints in `(0, T]`).
    pub checkpoints: usize,
    /// Discretization slack coefficient: `slack = c (h + dt) T`. The default
    /// is calibrated so the heat benchmark's scheme error stays below it.
    pub slack_coefficient: f64,
    /// Estimate the solutions' Hoelder seminorm from stored layers instead
    /// of trusting the certificate value.
    pub estimate_hoelder: bool,
    pub dt_max: f64,
}

impl Default for ParabolicExperimentOptions {
    fn default() -> Self {
        ParabolicExperimentOptions {
            checkpoints: 16,
            slack_coefficient: 5.0,
            estimate_hoelder: true,
            dt_max: 0.1,
        }
    }
}

/// Resolves the shared certificate of a pair: the declared one, or the
/// componentwise max of the operators' certificates.
pub fn shared_certificate(
    op1: &HjbiOperator,
    op2: &HjbiOperator,
    declared: Option<&RegularityCertificate>,
) -> Result<RegularityCertificate> {
    if let Some(cert) = declared {
        return Ok(cert.clone());
    }
    match (&op1.certificate, &op2.certificate) {
        (Some(a), Some(b)) => Ok(RegularityCertificate::pairwise_max(a, b)),
        (Some(a), None) => Ok(a.clone()),
        (None, Some(b)) => Ok(b.clone()),
        (None, None) => Err(Error::config(
            "dependence experiments need a certificate on at least one operator",
        )),
    }
}

/// Solves both Cauchy problems on the same grid and time step and renders a
/// verdict for the parabolic dependence bound.
pub fn parabolic_dependence_experiment(
    op1: &HjbiOperator,
    op2: &HjbiOperator,
    grid: Arc<Grid>,
    horizon: f64,
    declared_cert: Option<&RegularityCertificate>,
    opts: &ParabolicExperimentOptions,
) -> Result<ParabolicDependenceReport> {
    let spec = SampleSpec::on_grid(grid.clone());
    let distances = coefficient_distance(op1, op2, &spec)?;
    let mut cert = shared_certificate(op1, op2, declared_cert)?;

    let scheme1 = Scheme::new(op1, grid.clone())?;
    let scheme2 = Scheme::new(op2, grid.clone())?;
    let dt = scheme1
        .cfl_timestep(0.0, opts.dt_max)
        .min(scheme2.cfl_timestep(0.0, opts.dt_max));
    let checkpoints: Vec<f64> = (1..=opts.checkpoints.max(1))
        .map(|k| horizon * k as f64 / opts.checkpoints.max(1) as f64)
        .collect();
    let solver_opts = ParabolicOptions {
        store_every: usize::MAX,
        dt_max: opts.dt_max,
        dt_override: Some(dt),
        checkpoints,
    };
    let traj1 = solve_with_scheme(&scheme1, horizon, None, &solver_opts)?;
    let traj2 = solve_with_scheme(&scheme2, horizon, None, &solver_opts)?;
    debug_assert_eq!(traj1.times, traj2.times);

    if opts.estimate_hoelder {
        cert.hoelder_seminorm = estimated_hoelder(&traj1, &traj2, cert.hoelder_exponent);
    }
    let constants = BoundConstants::parabolic(&cert)?;

    let mut times = Vec::new();
    let mut empirical = Vec::new();
    let mut bound = Vec::new();
    let mut margin = Vec::new();
    for (k, &t) in traj1.times.iter().enumerate() {
        let e = traj1.layers[k].sup_distance(&traj2.layers[k]);
        let b = parabolic_bound_rhs_with(&distances, &cert, &constants, t);
        times.push(t);
        empirical.push(e);
        bound.push(b);
        margin.push(b - e);
    }
    let h = grid.max_spacing();
    let slack = opts.slack_coefficient * (h + dt) * horizon;
    let verdict = render_verdict(&times, &empirical, &bound, slack);
    Ok(ParabolicDependenceReport {
        distances,
        constants,
        certificate: cert,
        times,
        empirical,
        bound,
        margin,
        slack,
        verdict,
    })
}

fn estimated_hoelder(t1: &ParabolicTrajectory, t2: &ParabolicTrajectory, gamma: f64) -> f64 {
    let mut best = 0.0f64;
    for layer in t1.layers.iter().chain(&t2.layers) {
        best = best.max(hoelder_seminorm(layer, gamma));
    }
    best
}

/// Paired ergodic experiment.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ErgodicDependenceReport {
    pub distances: CoefficientDistance,
    pub constants: BoundConstants,
    pub certificate: RegularityCertificate,
    pub ergodic_constants: (f64, f64),
    /// `|U_1 - U_2|`.
    pub empirical: f64,
    pub bound: f64,
    pub margin: f64,
    /// Sum of the two estimators' internal agreement gaps.
    pub slack: f64,
    pub verdict: Verdict,
}

impl ErgodicDependenceReport {
    pub fn write_json(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).map_err(|e| Error::Serde(e.to_string()))?;
        std::fs::write(path, text)?;
        Ok(())
    }
}

/// Options for [`ergodic_dependence_experiment`].
#[derive(Debug, Clone)]
pub struct ErgodicExperimentOptions {
    pub schedule: Vec<f64>,
    pub discounted: DiscountedOptions,
    /// Declared regularity constant; when absent it is measured via the
    /// corrector regularity check and doubled.
    pub declared_regularity: Option<f64>,
}

impl Default for ErgodicExperimentOptions {
    fn default() -> Self {
        ErgodicExperimentOptions {
            schedule: DEFAULT_DELTA_SCHEDULE.to_vec(),
            discounted: DiscountedOptions::default(),
            declared_regularity: None,
        }
    }
}

/// Runs the vanishing-discount pipeline on both operators and renders a
/// verdict for the ergodic dependence bound.
pub fn ergodic_dependence_experiment(
    op1: &HjbiOperator,
    op2: &HjbiOperator,
    grid: Arc<Grid>,
    declared_cert: Option<&RegularityCertificate>,
    opts: &ErgodicExperimentOptions,
) -> Result<ErgodicDependenceReport> {
    let spec = SampleSpec::on_grid(grid.clone());
    let distances = coefficient_distance(op1, op2, &spec)?;
    let cert = shared_certificate(op1, op2, declared_cert)?;

    let scheme1 = Scheme::new(op1, grid.clone())?;
    let scheme2 = Scheme::new(op2, grid.clone())?;
    let solves1 = discounted_schedule_with_scheme(&scheme1, &opts.schedule, &opts.discounted)?;
    let solves2 = discounted_schedule_with_scheme(&scheme2, &opts.schedule, &opts.discounted)?;

    let extract = |solves: &[crate::ergodic::DiscountedSolve]| -> (f64, f64) {
        let last = solves.last().unwrap();
        let u = -last.delta * last.w.values()[0];
        let gap = if solves.len() >= 2 {
            let prev = &solves[solves.len() - 2];
            (u - (-prev.delta * prev.w.values()[0])).abs()
        } else {
            0.0
        };
        (u, gap)
    };
    let (u1, gap1) = extract(&solves1);
    let (u2, gap2) = extract(&solves2);

    let regularity = match opts.declared_regularity {
        Some(value) => RegularitySource::Declared { value },
        None => {
            let r1 = corrector_regularity_check(&solves1, f64::INFINITY)?;
            let r2 = corrector_regularity_check(&solves2, f64::INFINITY)?;
            RegularitySource::Empirical {
                measured: r1.empirical_constant.max(r2.empirical_constant),
                safety: 2.0,
            }
        }
    };
    let max_cost = scheme1.sup_cost().max(scheme2.sup_cost());
    let constants = BoundConstants::parabolic(&cert)?.with_ergodic(&cert, regularity, max_cost);

    let empirical = (u1 - u2).abs();
    let bound = ergodic_bound_rhs_with(&distances, &cert, &constants);
    let slack = gap1 + gap2;
    let verdict = render_verdict(&[0.0], &[empirical], &[bound], slack);
    Ok(ErgodicDependenceReport {
        distances,
        constants,
        certificate: cert,
        ergodic_constants: (u1, u2),
        empirical,
        bound,
        margin: bound - empirical,
        slack,
        verdict,
    })
}
