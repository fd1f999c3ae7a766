//! Explicit monotone time stepping for the Cauchy problem
//! `du/dt + H(x, Du, D^2 u) = 0` with configurable initial datum.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Grid, GridFunction};
use crate::operator::HjbiOperator;
use crate::scheme::Scheme;

/// Options for [`solve_parabolic`].
#[derive(Debug, Clone)]
pub struct ParabolicOptions {
    /// Keep every k-th layer (the final layer is always kept).
    pub store_every: usize,
    /// Cap on the CFL step (also the step when all coefficients vanish).
    pub dt_max: f64,
    /// Overrides the CFL step when set (must not exceed it).
    pub dt_override: Option<f64>,
    /// Additional times to land on exactly (truncated steps).
    pub checkpoints: Vec<f64>,
}

impl Default for ParabolicOptions {
    fn default() -> Self {
        ParabolicOptions {
            store_every: 1,
            dt_max: 0.1,
            dt_override: None,
            checkpoints: Vec::new(),
        }
    }
}

impl ParabolicOptions {
    pub fn stored_every(store_every: usize) -> ParabolicOptions {
        ParabolicOptions {
            store_every: store_every.max(1),
            ..Default::default()
        }
    }
}

/// Time layers of one explicit solve.
#[derive(Debug, Clone)]
pub struct ParabolicTrajectory {
    pub times: Vec<f64>,
    pub layers: Vec<GridFunction>,
    pub initial: GridFunction,
    pub operator: HjbiOperator,
    /// Unconstrained CFL step actually used (last partial steps excluded).
    pub dt: f64,
}

impl ParabolicTrajectory {
    pub fn final_layer(&self) -> &GridFunction {
        self.layers.last().expect("trajectory stores the final layer")
    }

    pub fn final_time(&self) -> f64 {
        *self.times.last().expect("trajectory stores the final time")
    }

    /// Layer value closest to time `t` (exact when `t` was a checkpoint).
    pub fn layer_at(&self, t: f64) -> &GridFunction {
        let (k, _) = self
            .times
            .iter()
            .enumerate()
            .min_by(|(_, a), (_, b)| {
                (*a - t).abs().partial_cmp(&(*b - t).abs()).unwrap()
            })
            .unwrap();
        &self.layers[k]
    }
}

/// Runs `u^{k+1} = u^k - dt * H_h(u^k)` from `initial` up to time `horizon`,
/// truncating the last step to land exactly on the horizon.
pub fn solve_parabolic(
    op: &HjbiOperator,
    grid: Arc<Grid>,
    horizon: f64,
    initial: Option<GridFunction>,
    options: &ParabolicOptions,
) -> Result<ParabolicTrajectory> {
    if horizon <= 0.0 {
        return Err(Error::config("time horizon must be positive"));
    }
    let scheme = Scheme::new(op, grid.clone())?;
    solve_with_scheme(&scheme, horizon, initial, options)
}

pub(crate) fn solve_with_scheme(
    scheme: &Scheme,
    horizon: f64,
    initial: Option<GridFunction>,
    options: &ParabolicOptions,
) -> Result<ParabolicTrajectory> {
    let grid = scheme.grid().clone();
    let initial = match initial {
        Some(u) => {
            if u.grid().sizes() != grid.sizes() {
                return Err(Error::dimension("initial datum lives on a different grid"));
            }
            u
        }
        None => GridFunction::zeros(grid.clone()),
    };
    let dt_cfl = scheme.cfl_timestep(0.0, options.dt_max);
    let dt = match options.dt_override {
        Some(dt) => {
            if dt > dt_cfl * (1.0 + 1e-12) {
                return Err(Error::config(format!(
                    "dt override {dt:.3e} exceeds the CFL step {dt_cfl:.3e}"
                )));
            }
            dt
        }
        None => dt_cfl,
    };

    let mut checkpoints: Vec<f64> = options
        .checkpoints
        .iter()
        .copied()
        .filter(|&t| t > 0.0 && t < horizon)
        .collect();
    checkpoints.sort_by(|a, b| a.partial_cmp(b).unwrap());
    checkpoints.push(horizon);

    let store_every = options.store_every.max(1);
    let mut u = initial.values().to_vec();
    let mut next = vec![0.0; u.len()];
    let mut t = 0.0f64;
    let mut step = 0usize;
    let mut times = vec![0.0];
    let mut layers = vec![initial.clone()];
    let mut checkpoint_iter = checkpoints.into_iter();
    let mut next_checkpoint = checkpoint_iter.next();

    while let Some(target) = next_checkpoint {
        let remaining = target - t;
        let (step_dt, landed) = if remaining <= dt * (1.0 + 1e-12) {
            (remaining, true)
        } else {
            (dt, false)
        };
        scheme.explicit_step(&u, step_dt, &mut next);
        std::mem::swap(&mut u, &mut next);
        step += 1;
        t = if landed { target } else { t + step_dt };
        if !u.iter().all(|v| v.is_finite()) {
            return Err(Error::Divergence { step, time: t });
        }
        let store = landed || step % store_every == 0;
        if store {
            times.push(t);
            layers.push(GridFunction::from_values(grid.clone(), u.clone())?);
        }
        if landed {
            next_checkpoint = checkpoint_iter.next();
        }
    }

    Ok(ParabolicTrajectory {
        times,
        layers,
        initial,
        operator: scheme.operator().clone(),
        dt,
    })
}

/// Verdict of the time-Lipschitz check over stored consecutive layers.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TimeLipschitzReport {
    pub constant: f64,
    pub passed: bool,
    /// Worst `||u(t+h) - u(t)|| / (C h)` over stored pairs.
    pub worst_ratio: f64,
    pub witness: Option<(f64, f64)>,
}

/// Checks `||u(t+h, .) - u(t, .)|| <= C h (1 + slack)` on all stored
/// consecutive layer pairs.
pub fn time_lipschitz_check(
    traj: &ParabolicTrajectory,
    constant: f64,
    slack: f64,
) -> TimeLipschitzReport {
    let mut worst_ratio = 0.0f64;
    let mut witness = None;
    for k in 1..traj.layers.len() {
        let dh = traj.times[k] - traj.times[k - 1];
        if dh <= 0.0 {
            continue;
        }
        let diff = traj.layers[k].sup_distance(&traj.layers[k - 1]);
        let ratio = if constant > 0.0 {
            diff / (constant * dh)
        } else if diff == 0.0 {
            0.0
        } else {
            f64::INFINITY
        };
        if ratio > worst_ratio {
            worst_ratio = ratio;
            witness = Some((traj.times[k - 1], traj.times[k]));
        }
    }
    TimeLipschitzReport {
        constant,
        passed: worst_ratio <= 1.0 + slack,
        worst_ratio,
        witness,
    }
}

/// Per-node least-squares slopes of `t -> u(t, x)` over the trailing window.
#[derive(Debug, Clone)]
pub struct SlopeEstimate {
    /// Slope per node.
    pub slopes: Vec<f64>,
    /// `max - min` slope across nodes; a flatness diagnostic.
    pub spread: f64,
    /// Mean slope across nodes.
    pub mean: f64,
    pub window_start: f64,
    pub layers_used: usize,
}

/// Least-squares slope of each node's time trace over the trailing
/// `window` fraction of the trajectory. Needs at least 3 stored layers in
/// the window.
pub fn long_time_slope(traj: &ParabolicTrajectory, window: f64) -> Result<SlopeEstimate> {
    if !(window > 0.0 && window <= 1.0) {
        return Err(Error::config("window must be a fraction in (0, 1]"));
    }
    let t_end = traj.final_time();
    let t_start = t_end * (1.0 - window);
    let selected: Vec<usize> = (0..traj.times.len())
        .filter(|&k| traj.times[k] >= t_start - 1e-14)
        .collect();
    if selected.len() < 3 {
        return Err(Error::config(format!(
            "window [{t_start:.3}, {t_end:.3}] holds {} stored layers; need at least 3",
            selected.len()
        )));
    }
    let ts: Vec<f64> = selected.iter().map(|&k| traj.times[k]).collect();
    let t_mean = ts.iter().sum::<f64>() / ts.len() as f64;
    let denom: f64 = ts.iter().map(|t| (t - t_mean) * (t - t_mean)).sum();
    if denom == 0.0 {
        return Err(Error::config("degenerate time window"));
    }
    let nodes = traj.layers[0].values().len();
    let mut slopes = vec![0.0; nodes];
    for node in 0..nodes {
        let mut cov = 0.0;
        let mut u_mean = 0.0;
        for &k in &selected {
            u_mean += traj.layers[k].values()[node];
        }
        u_mean /= selected.len() as f64;
        for (&k, &t) in selected.iter().zip(&ts) {
            cov += (t - t_mean) * (traj.layers[k].values()[node] - u_mean);
        }
        slopes[node] = cov / denom;
    }
    let max = slopes.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = slopes.iter().copied().fold(f64::INFINITY, f64::min);
    let mean = slopes.iter().sum::<f64>() / nodes as f64;
    Ok(SlopeEstimate {
        slopes,
        spread: max - min,
        mean,
        window_start: t_start,
        layers_used: selected.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;
    use crate::operator::HjbiOperator;
    use approx::assert_relative_eq;

    fn constant_cost_op(c: f64) -> HjbiOperator {
        HjbiOperator::builder(1, 1)
            .sigma(&[&["0"]])
            .drift(&["0"])
            .cost(&format!("{c}"))
            .build()
            .unwrap()
    }

    #[test]
    fn constant_cost_is_exact() {
        let op = constant_cost_op(0.7);
        let grid = Grid::new(&[8]).unwrap();
        let traj = solve_parabolic(&op, grid, 2.0, None, &ParabolicOptions::default()).unwrap();
        for (t, layer) in traj.times.iter().zip(&traj.layers) {
            for v in layer.values() {
                assert!((v + 0.7 * t).abs() <= 1e-12, "u({t}) = {v}");
            }
        }
        assert_relative_eq!(traj.final_time(), 2.0);
    }

    #[test]
    fn heat_solution_matches_fourier_decay() {
        let op = HjbiOperator::builder(1, 1)
            .sigma(&[&["1"]])
            .drift(&["0"])
            .cost("0")
            .build()
            .unwrap();
        let grid = Grid::new(&[128]).unwrap();
        let two_pi = 2.0 * std::f64::consts::PI;
        let initial = GridFunction::sample(grid.clone(), |x| (two_pi * x[0]).sin());
        let traj = solve_parabolic(
            &op,
            grid.clone(),
            0.05,
            Some(initial),
            &ParabolicOptions::stored_every(64),
        )
        .unwrap();
        let t = traj.final_time();
        let exact = GridFunction::sample(grid, |x| {
            (-4.0 * std::f64::consts::PI.powi(2) * t).exp() * (two_pi * x[0]).sin()
        });
        let err = traj.final_layer().sup_distance(&exact);
        assert!(err <= 1e-2, "sup error {err}");
    }

    #[test]
    fn isaacs_zero_initial_stays_zero() {
        let op = HjbiOperator::builder(1, 1)
            .control_a(vec![vec![-1.0], vec![1.0]])
            .sigma(&[&["0"]])
            .drift(&["a1"])
            .cost("0")
            .build()
            .unwrap();
        let grid = Grid::new(&[32]).unwrap();
        let traj = solve_parabolic(&op, grid, 0.5, None, &ParabolicOptions::default()).unwrap();
        assert_eq!(traj.final_layer().sup_norm(), 0.0);
    }

    #[test]
    fn a_priori_bound_holds_exactly() {
        let op = HjbiOperator::builder(1, 1)
            .control_a(vec![vec![-1.0], vec![1.0]])
            .sigma(&[&["1"]])
            .drift(&["a1"])
            .cost("cos(2*pi*x1) * a1 + 0.25")
            .build()
            .unwrap();
        let grid = Grid::new(&[64]).unwrap();
        let initial = GridFunction::sample(grid.clone(), |x| 0.3 * (2.0 * std::f64::consts::PI * x[0]).cos());
        let sup_cost = 1.25; // max |cos * a1 + 0.25|
        let init_sup = initial.sup_norm();
        let traj = solve_parabolic(&op, grid, 0.4, Some(initial), &ParabolicOptions::stored_every(16)).unwrap();
        for (t, layer) in traj.times.iter().zip(&traj.layers) {
            assert!(
                layer.sup_norm() <= t * sup_cost + init_sup + 1e-10,
                "bound violated at t = {t}"
            );
        }
    }

    #[test]
    fn discrete_comparison_principle() {
        let op = HjbiOperator::builder(1, 1)
            .control_a(vec![vec![-1.0], vec![1.0]])
            .sigma(&[&["1"]])
            .drift(&["a1"])
            .cost("sin(2*pi*x1)")
            .build()
            .unwrap();
        let grid = Grid::new(&[32]).unwrap();
        let lo = GridFunction::sample(grid.clone(), |x| (2.0 * std::f64::consts::PI * x[0]).sin() - 0.2);
        let hi = GridFunction::sample(grid.clone(), |x| (2.0 * std::f64::consts::PI * x[0]).sin() + 0.1);
        let t1 = solve_parabolic(&op, grid.clone(), 0.3, Some(lo), &ParabolicOptions::stored_every(8)).unwrap();
        let t2 = solve_parabolic(&op, grid, 0.3, Some(hi), &ParabolicOptions::stored_every(8)).unwrap();
        for (l1, l2) in t1.layers.iter().zip(&t2.layers) {
            for (a, b) in l1.values().iter().zip(l2.values()) {
                assert!(a <= &(b + 1e-12));
            }
        }
    }

    #[test]
    fn cost_shift_translates_solution() {
        let base = HjbiOperator::builder(1, 1)
            .sigma(&[&["1"]])
            .drift(&["0"])
            .cost("cos(2*pi*x1)")
            .build()
            .unwrap();
        let shifted = HjbiOperator::builder(1, 1)
            .sigma(&[&["1"]])
            .drift(&["0"])
            .cost("cos(2*pi*x1) + 0.4")
            .build()
            .unwrap();
        let grid = Grid::new(&[32]).unwrap();
        let opts = ParabolicOptions::stored_every(16);
        let t1 = solve_parabolic(&base, grid.clone(), 0.2, None, &opts).unwrap();
        let t2 = solve_parabolic(&shifted, grid, 0.2, None, &opts).unwrap();
        for ((t, l1), l2) in t1.times.iter().zip(&t1.layers).zip(&t2.layers) {
            for (a, b) in l1.values().iter().zip(l2.values()) {
                assert!((b - (a - 0.4 * t)).abs() <= 1e-10);
            }
        }
    }

    #[test]
    fn refinement_decreases_heat_error() {
        let op = HjbiOperator::builder(1, 1)
            .sigma(&[&["1"]])
            .drift(&["0"])
            .cost("0")
            .build()
            .unwrap();
        let two_pi = 2.0 * std::f64::consts::PI;
        let mut errors = Vec::new();
        for size in [32usize, 64, 128] {
            let grid = Grid::new(&[size]).unwrap();
            let initial = GridFunction::sample(grid.clone(), |x| (two_pi * x[0]).sin());
            let traj = solve_parabolic(&op, grid.clone(), 0.02, Some(initial), &ParabolicOptions::stored_every(1000)).unwrap();
            let t = traj.final_time();
            let exact = GridFunction::sample(grid, |x| {
                (-4.0 * std::f64::consts::PI.powi(2) * t).exp() * (two_pi * x[0]).sin()
            });
            errors.push(traj.final_layer().sup_distance(&exact));
        }
        assert!(errors[0] > errors[1] && errors[1] > errors[2], "{errors:?}");
    }

    #[test]
    fn time_lipschitz_constant_cost() {
        let op = constant_cost_op(0.7);
        let grid = Grid::new(&[8]).unwrap();
        let traj = solve_parabolic(&op, grid, 1.0, None, &ParabolicOptions::default()).unwrap();
        let rep = time_lipschitz_check(&traj, 0.7, 1e-9);
        assert!(rep.passed);
        assert_relative_eq!(rep.worst_ratio, 1.0, epsilon = 1e-9);
        // C = 0 on a nonconstant trajectory fails with a witness
        let rep = time_lipschitz_check(&traj, 0.0, 1e-9);
        assert!(!rep.passed);
        assert!(rep.witness.is_some());
    }

    #[test]
    fn time_lipschitz_heat_via_initial_hamiltonian() {
        let op = HjbiOperator::builder(1, 1)
            .sigma(&[&["1"]])
            .drift(&["0"])
            .cost("0")
            .build()
            .unwrap();
        let grid = Grid::new(&[64]).unwrap();
        let initial = GridFunction::sample(grid.clone(), |x| (2.0 * std::f64::consts::PI * x[0]).sin());
        let scheme = Scheme::new(&op, grid.clone()).unwrap();
        let c = scheme.sup_hamiltonian(initial.values());
        let traj = solve_parabolic(&op, grid, 0.05, Some(initial), &ParabolicOptions::stored_every(16)).unwrap();
        let rep = time_lipschitz_check(&traj, c, 1e-9);
        assert!(rep.passed, "{rep:?}");
    }

    #[test]
    fn slope_of_linear_decay_is_exact() {
        let op = constant_cost_op(0.7);
        let grid = Grid::new(&[8]).unwrap();
        let traj = solve_parabolic(&op, grid, 2.0, None, &ParabolicOptions::default()).unwrap();
        let est = long_time_slope(&traj, 0.5).unwrap();
        assert!(est.spread <= 1e-12);
        assert_relative_eq!(est.mean, -0.7, epsilon = 1e-12);
    }

    #[test]
    fn short_window_errors_out() {
        let op = constant_cost_op(1.0);
        let grid = Grid::new(&[8]).unwrap();
        let traj = solve_parabolic(&op, grid, 0.3, None, &ParabolicOptions::default()).unwrap();
        assert!(long_time_slope(&traj, 1e-6).is_err());
    }

    #[test]
    fn checkpoints_are_exact() {
        let op = constant_cost_op(1.0);
        let grid = Grid::new(&[8]).unwrap();
        let opts = ParabolicOptions {
            checkpoints: vec![0.33, 0.77],
            store_every: usize::MAX,
            ..Default::default()
        };
        let traj = solve_parabolic(&op, grid, 1.0, None, &opts).unwrap();
        for t in [0.33f64, 0.77, 1.0] {
            assert!(traj.times.iter().any(|&s| (s - t).abs() < 1e-14), "{:?}", traj.times);
        }
    }
}
