//! Ergodic constants via the discounted approximation and via long-time
//! parabolic slopes.
//!
//! Sign convention: the ergodic constant `U` is the unique constant such
//! that `H(x, Dv, D^2 v) = U` admits a periodic solution `v`. The
//! discounted problem `delta w + H(x, Dw, D^2 w) = 0` then satisfies
//! `delta w -> -U`, and the Cauchy solution `u(t)/t -> -U`; both signed
//! limits are recorded in the diagnostics.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Grid, GridFunction};
use crate::operator::HjbiOperator;
use crate::parabolic::{long_time_slope, solve_with_scheme, ParabolicOptions};
use crate::scheme::{hoelder_seminorm, Scheme};

/// Default discount schedule for the vanishing-discount estimator.
pub const DEFAULT_DELTA_SCHEDULE: [f64; 5] = [1e-1, 3e-2, 1e-2, 3e-3, 1e-3];

/// Options for [`solve_discounted`].
#[derive(Debug, Clone)]
pub struct DiscountedOptions {
    /// Sup-norm residual tolerance on `delta w + H_h(w)`.
    pub tolerance: f64,
    pub max_iterations: usize,
    pub dt_max: f64,
    /// Eliminate the constant mode each sweep (the discrete Hamiltonian is
    /// invariant under constants, so the shift `-mean(r)/delta` zeroes the
    /// residual mean exactly). Without it the constant mode contracts only
    /// by `(1 - tau delta)` per sweep.
    pub mean_shift: bool,
}

impl Default for DiscountedOptions {
    fn default() -> Self {
        DiscountedOptions {
            tolerance: 1e-9,
            max_iterations: 1_000_000,
            dt_max: 0.1,
            mean_shift: true,
        }
    }
}

/// Converged discounted solve `delta w + H_h(w) = 0`.
#[derive(Debug, Clone)]
pub struct DiscountedSolve {
    pub delta: f64,
    pub w: GridFunction,
    pub iterations: usize,
    /// Final sup-norm of the residual `delta w + H_h(w)`.
    pub residual: f64,
    /// Sampled `max_{x,a,b} |l|` of the operator on this grid.
    pub sup_cost: f64,
}

impl DiscountedSolve {
    /// Corrector candidate `w - w(node 0)`.
    pub fn normalized_corrector(&self) -> GridFunction {
        let base = self.w.values()[0];
        let values = self.w.values().iter().map(|v| v - base).collect();
        GridFunction::from_values(self.w.grid().clone(), values).expect("finite corrector")
    }
}

/// Solves the discounted equation by damped pseudo-time marching
/// `w <- w - tau (delta w + H_h(w))` with `tau` from the CFL rule at the
/// given discount; terminates when the sup-residual drops below tolerance.
pub fn solve_discounted(
    op: &HjbiOperator,
    grid: Arc<Grid>,
    delta: f64,
    opts: &DiscountedOptions,
) -> Result<DiscountedSolve> {
    let scheme = Scheme::new(op, grid)?;
    solve_discounted_with_scheme(&scheme, delta, None, opts)
}

pub(crate) fn solve_discounted_with_scheme(
    scheme: &Scheme,
    delta: f64,
    warm_start: Option<&GridFunction>,
    opts: &DiscountedOptions,
) -> Result<DiscountedSolve> {
    if delta <= 0.0 {
        return Err(Error::config("discount must be positive"));
    }
    let grid = scheme.grid().clone();
    let nodes = grid.node_count();
    let tau = scheme.cfl_timestep(delta, opts.dt_max);
    let mut w: Vec<f64> = match warm_start {
        Some(w0) => {
            if w0.grid().sizes() != grid.sizes() {
                return Err(Error::dimension("warm start lives on a different grid"));
            }
            w0.values().to_vec()
        }
        None => vec![0.0; nodes],
    };
    let mut residual_vec = vec![0.0; nodes];
    let mut tail: Vec<f64> = Vec::new();
    for iteration in 0..opts.max_iterations {
        // residual r = delta w + H_h(w)
        let mut sup_res = 0.0f64;
        for node in 0..nodes {
            let r = delta * w[node] + scheme.hamiltonian_at(&w, node);
            residual_vec[node] = r;
            sup_res = sup_res.max(r.abs());
        }
        if sup_res <= opts.tolerance {
            return Ok(DiscountedSolve {
                delta,
                w: GridFunction::from_values(grid, w)?,
                iterations: iteration,
                residual: sup_res,
                sup_cost: scheme.sup_cost(),
            });
        }
        tail.push(sup_res);
        if tail.len() > 10 {
            tail.remove(0);
        }
        if opts.mean_shift {
            let mean = residual_vec.iter().sum::<f64>() / nodes as f64;
            let shift = mean / delta;
            for node in 0..nodes {
                w[node] -= tau * (residual_vec[node] - mean) + shift;
            }
        } else {
            for node in 0..nodes {
                w[node] -= tau * residual_vec[node];
            }
        }
        if w.iter().any(|v| !v.is_finite()) {
            return Err(Error::Divergence {
                step: iteration,
                time: iteration as f64 * tau,
            });
        }
    }
    Err(Error::NonConvergence {
        delta,
        iterations: opts.max_iterations,
        tail,
    })
}

/// Which estimator produced an [`ErgodicResult`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorMethod {
    VanishingDiscount,
    LongTime,
}

/// Per-discount diagnostics of the vanishing-discount schedule.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DeltaDiagnostic {
    pub delta: f64,
    /// `delta * w(reference node)`; converges to `-U`.
    pub scaled_value: f64,
    /// Spread of `delta * w` across nodes (tends to 0).
    pub node_spread: f64,
    pub residual: f64,
    pub iterations: usize,
}

/// Diagnostics of the long-time slope estimator.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WindowDiagnostic {
    pub horizon: f64,
    pub window_start: f64,
    pub layers_used: usize,
    pub slope_spread: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ErgodicDiagnostics {
    pub schedule: Vec<DeltaDiagnostic>,
    pub window: Option<WindowDiagnostic>,
    /// Internal agreement gap of the estimator (successive-delta gap, or
    /// slope spread for the long-time method).
    pub agreement_gap: f64,
    /// `sup_x |H_h(corrector) - U|` on the grid.
    pub cell_residual: f64,
    pub sup_cost: f64,
}

/// Ergodic constant estimate with its normalized corrector.
#[derive(Debug, Clone)]
pub struct ErgodicResult {
    /// The constant `U` with `H(x, Dv, D^2 v) = U`.
    pub ergodic_constant: f64,
    /// Corrector normalized to vanish at node 0.
    pub corrector: GridFunction,
    pub method: EstimatorMethod,
    pub diagnostics: ErgodicDiagnostics,
}

/// Vanishing-discount estimator: solves the schedule with warm starts and
/// extracts `U = -delta_last * w(node 0)`.
pub fn ergodic_vanishing_discount(
    op: &HjbiOperator,
    grid: Arc<Grid>,
    schedule: &[f64],
    opts: &DiscountedOptions,
) -> Result<ErgodicResult> {
    let scheme = Scheme::new(op, grid)?;
    ergodic_vanishing_discount_with_scheme(&scheme, schedule, opts)
}

/// Runs the whole discount schedule with warm starts and returns every
/// converged solve (smallest discount last).
pub fn discounted_schedule(
    op: &HjbiOperator,
    grid: Arc<Grid>,
    schedule: &[f64],
    opts: &DiscountedOptions,
) -> Result<Vec<DiscountedSolve>> {
    let scheme = Scheme::new(op, grid)?;
    discounted_schedule_with_scheme(&scheme, schedule, opts)
}

pub(crate) fn discounted_schedule_with_scheme(
    scheme: &Scheme,
    schedule: &[f64],
    opts: &DiscountedOptions,
) -> Result<Vec<DiscountedSolve>> {
    if schedule.is_empty() {
        return Err(Error::config("discount schedule must not be empty"));
    }
    if schedule.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::config("discount schedule must be strictly decreasing"));
    }
    let mut solves = Vec::with_capacity(schedule.len());
    let mut warm: Option<GridFunction> = None;
    for &delta in schedule {
        let solve = solve_discounted_with_scheme(scheme, delta, warm.as_ref(), opts)?;
        warm = Some(solve.w.clone());
        solves.push(solve);
    }
    Ok(solves)
}

pub(crate) fn ergodic_vanishing_discount_with_scheme(
    scheme: &Scheme,
    schedule: &[f64],
    opts: &DiscountedOptions,
) -> Result<ErgodicResult> {
    let solves = discounted_schedule_with_scheme(scheme, schedule, opts)?;
    let mut diagnostics = Vec::with_capacity(schedule.len());
    let mut extractions: Vec<f64> = Vec::new();
    for solve in &solves {
        let delta = solve.delta;
        let scaled_ref = delta * solve.w.values()[0];
        let scaled_max = solve.w.values().iter().copied().fold(f64::NEG_INFINITY, f64::max) * delta;
        let scaled_min = solve.w.values().iter().copied().fold(f64::INFINITY, f64::min) * delta;
        diagnostics.push(DeltaDiagnostic {
            delta,
            scaled_value: scaled_ref,
            node_spread: scaled_max - scaled_min,
            residual: solve.residual,
            iterations: solve.iterations,
        });
        extractions.push(-scaled_ref);
    }
    let last = solves.into_iter().last().unwrap();
    let ergodic_constant = *extractions.last().unwrap();
    let corrector = last.normalized_corrector();
    let agreement_gap = if extractions.len() >= 2 {
        (extractions[extractions.len() - 1] - extractions[extractions.len() - 2]).abs()
    } else {
        0.0
    };
    let cell_residual = cell_equation_residual(scheme, &corrector, ergodic_constant);
    Ok(ErgodicResult {
        ergodic_constant,
        corrector,
        method: EstimatorMethod::VanishingDiscount,
        diagnostics: ErgodicDiagnostics {
            schedule: diagnostics,
            window: None,
            agreement_gap,
            cell_residual,
            sup_cost: last.sup_cost,
        },
    })
}

/// Options for the long-time estimator.
#[derive(Debug, Clone)]
pub struct LongTimeOptions {
    /// Trailing window fraction used for the slope fit.
    pub window: f64,
    /// Maximum admissible slope spread across nodes.
    pub spread_tolerance: f64,
    /// Approximate number of stored layers.
    pub stored_layers: usize,
    pub dt_max: f64,
}

impl Default for LongTimeOptions {
    fn default() -> Self {
        LongTimeOptions {
            window: 0.5,
            spread_tolerance: 1e-3,
            stored_layers: 400,
            dt_max: 0.1,
        }
    }
}

/// Long-time estimator: runs the Cauchy problem from zero data and reads
/// `U = -(mean long-time slope)`; the corrector is recovered as
/// `u(T, .) + U T`, normalized at node 0.
pub fn ergodic_long_time(
    op: &HjbiOperator,
    grid: Arc<Grid>,
    horizon: f64,
    opts: &LongTimeOptions,
) -> Result<ErgodicResult> {
    let scheme = Scheme::new(op, grid.clone())?;
    let dt = scheme.cfl_timestep(0.0, opts.dt_max);
    let steps = (horizon / dt).ceil() as usize;
    let store_every = (steps / opts.stored_layers.max(2)).max(1);
    let traj = solve_with_scheme(
        &scheme,
        horizon,
        None,
        &ParabolicOptions {
            store_every,
            dt_max: opts.dt_max,
            ..Default::default()
        },
    )?;
    let slopes = long_time_slope(&traj, opts.window)?;
    if slopes.spread > opts.spread_tolerance {
        return Err(Error::Inconclusive {
            spread: slopes.spread,
            threshold: opts.spread_tolerance,
        });
    }
    let ergodic_constant = -slopes.mean;
    let final_layer = traj.final_layer();
    let t_final = traj.final_time();
    let raw: Vec<f64> = final_layer
        .values()
        .iter()
        .map(|v| v + ergodic_constant * t_final)
        .collect();
    let base = raw[0];
    let corrector =
        GridFunction::from_values(grid, raw.iter().map(|v| v - base).collect())?;
    let cell_residual = cell_equation_residual(&scheme, &corrector, ergodic_constant);
    Ok(ErgodicResult {
        ergodic_constant,
        corrector,
        method: EstimatorMethod::LongTime,
        diagnostics: ErgodicDiagnostics {
            schedule: Vec::new(),
            window: Some(WindowDiagnostic {
                horizon,
                window_start: slopes.window_start,
                layers_used: slopes.layers_used,
                slope_spread: slopes.spread,
            }),
            agreement_gap: slopes.spread,
            cell_residual,
            sup_cost: scheme.sup_cost(),
        },
    })
}

fn cell_equation_residual(scheme: &Scheme, corrector: &GridFunction, u_const: f64) -> f64 {
    let vals = corrector.values();
    (0..vals.len()).fold(0.0f64, |m, node| {
        m.max((scheme.hamiltonian_at(vals, node) - u_const).abs())
    })
}

/// Uniform-in-delta regularity of the normalized correctors.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CorrectorRegularityReport {
    /// Lipschitz seminorm of the normalized corrector per discount.
    pub seminorms: Vec<(f64, f64)>,
    /// `max / min` of the seminorms over the schedule.
    pub ratio: f64,
    pub bound_factor: f64,
    pub passed: bool,
    /// `max seminorm / (1 + max |l|)`.
    pub empirical_constant: f64,
}

/// Checks that the Lipschitz seminorms of normalized correctors stay
/// uniformly bounded across the discount schedule, and reports the
/// empirical regularity constant.
pub fn corrector_regularity_check(
    solves: &[DiscountedSolve],
    bound_factor: f64,
) -> Result<CorrectorRegularityReport> {
    if solves.len() < 2 {
        return Err(Error::config(
            "corrector regularity needs at least two discounted solves",
        ));
    }
    let mut seminorms = Vec::with_capacity(solves.len());
    let mut sup_cost = 0.0f64;
    for solve in solves {
        let corrector = solve.normalized_corrector();
        seminorms.push((solve.delta, hoelder_seminorm(&corrector, 1.0)));
        sup_cost = sup_cost.max(solve.sup_cost);
    }
    let max = seminorms.iter().map(|&(_, s)| s).fold(f64::NEG_INFINITY, f64::max);
    let min = seminorms.iter().map(|&(_, s)| s).fold(f64::INFINITY, f64::min);
    let ratio = if max == 0.0 {
        1.0
    } else if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    };
    Ok(CorrectorRegularityReport {
        seminorms,
        ratio,
        bound_factor,
        passed: ratio <= bound_factor,
        empirical_constant: max / (1.0 + sup_cost),
    })
}
