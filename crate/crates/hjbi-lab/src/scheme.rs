//! Monotone finite-difference discretization of min-max operators on
//! periodic grids.
//!
//! Second derivatives use centered differences, cross derivatives the
//! sign-split diagonal stencil (admissible under diagonal dominance of the
//! diffusion matrix), and the drift is upwinded:
//!
//! ```text
//! f . D_h u = sum_i [ f_i+ (u(x) - u(x - h e_i)) / h_i
//!                   - f_i- (u(x + h e_i) - u(x)) / h_i ]
//! ```
//!
//! Under the CFL restriction from [`Scheme::cfl_timestep`] the explicit
//! update `u - dt * H_h(u)` is nondecreasing in every neighbor value.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Grid, GridFunction};
use crate::operator::HjbiOperator;

/// Explicit-scheme CFL safety factor.
pub const CFL_SAFETY: f64 = 0.9;

/// Node sweeps go parallel above this node count.
const PAR_THRESHOLD: usize = 8192;

/// Worst-case stencil coefficient sums for one control pair, maximized over
/// grid nodes. `diffusion_sum = sum_i 2 a_ii / h_i^2 + sum_{i != j} |a_ij| /
/// (h_i h_j)`, `drift_sum = sum_i |f_i| / h_i`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct StencilBudget {
    pub diffusion_sum: f64,
    pub drift_sum: f64,
}

/// Tabulated monotone scheme for one operator on one grid.
///
/// Construction evaluates all coefficients on the grid, verifies the
/// diagonal-dominance admissibility condition and precomputes the CFL
/// budget, so Hamiltonian evaluations in the time loop are pure arithmetic.
pub struct Scheme {
    op: HjbiOperator,
    grid: Arc<Grid>,
    // tabulated coefficients, node-major then control-pair

    pairs_a: usize,
    pairs_b: usize,
    diff: Vec<f64>,
    drift: Vec<f64>,
    cost: Vec<f64>,
    axis_nb: Vec<u32>,
    diag_nb: Vec<u32>,
    inv_h: Vec<f64>,
    inv_h2: Vec<f64>,
    budgets: Vec<StencilBudget>,
    max_combined_budget: f64,
    sup_cost: f64,
    has_cross: bool,
}

impl std::fmt::Debug for Scheme {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Scheme")
            .field("operator", &self.op.name)
            .field("grid", &self.grid.sizes())
            .field("max_combined_budget", &self.max_combined_budget)
            .finish_non_exhaustive()
    }
}

impl Scheme {
    pub fn new(op: &HjbiOperator, grid: Arc<Grid>) -> Result<Scheme> {
        if grid.dim() != op.dim {
            return Err(Error::dimension(format!(
                "grid dimension {} does not match operator dimension {}",
                grid.dim(),
                op.dim
            )));
        }
        let n = op.dim;
        let nodes = grid.node_count();
        let na = op.control_a.len();
        let nb = op.control_b.len();
        let pairs = na * nb;
        let inv_h: Vec<f64> = (0..n).map(|i| 1.0 / grid.spacing(i)).collect();
        let inv_h2: Vec<f64> = inv_h.iter().map(|v| v * v).collect();

        let mut diff = vec![0.0; nodes * pairs * n * n];
        let mut drift = vec![0.0; nodes * pairs * n];
        let mut cost = vec![0.0; nodes * pairs];
        let mut budgets = vec![
            StencilBudget {
                diffusion_sum: 0.0,
                drift_sum: 0.0
            };
            pairs
        ];
        let mut max_combined = 0.0f64;
        let mut sup_cost = 0.0f64;
        let mut has_cross = false;

        for node in 0..nodes {
            let x = grid.coords(node);
            for (bi, beta) in op.control_b.points.iter().enumerate() {
                for (ai, alpha) in op.control_a.points.iter().enumerate() {
                    let pair = bi * na + ai;
                    let a = op.diffusion(&x, alpha, beta);
                    let f = op.drift_at(&x, alpha, beta);
                    let l = op.cost_at(&x, alpha, beta);
                    if !l.is_finite()
                        || f.iter().any(|v| !v.is_finite())
                        || a.iter().any(|v| !v.is_finite())
                    {
                        return Err(Error::config(format!(
                            "non-finite coefficient at x = {x:?} (controls {ai}, {bi})"
                        )));
                    }
                    let base = (node * pairs + pair) * n * n;
                    let dbase = (node * pairs + pair) * n;
                    let mut diffusion_sum = 0.0;
                    let mut drift_sum = 0.0;
                    for i in 0..n {
                        for j in 0..n {
                            diff[base + i * n + j] = a[(i, j)];
                        }
                        drift[dbase + i] = f[i];
                        diffusion_sum += 2.0 * a[(i, i)] * inv_h2[i];
                        drift_sum += f[i].abs() * inv_h[i];
                    }
                    for i in 0..n {
                        let mut cross = 0.0;
                        for j in 0..n {
                            if j != i {
                                cross += a[(i, j)].abs() * inv_h[i] * inv_h[j];
                                if a[(i, j)] != 0.0 {
                                    has_cross = true;
                                }
                            }
                        }
                        diffusion_sum += cross;
                        // monotonicity: the axis-neighbor weight must stay
                        // nonnegative after the cross-stencil correction
                        if a[(i, i)] * inv_h2[i] - cross < -1e-12 {
                            return Err(Error::Admissibility {
                                node: x.clone(),
                                alpha: ai,
                                beta: bi,
                                axis: i,
                                diag: a[(i, i)] * inv_h2[i],
                                cross,
                            });
                        }
                    }
                    cost[node * pairs + pair] = l;
                    sup_cost = sup_cost.max(l.abs());
                    budgets[pair].diffusion_sum = budgets[pair].diffusion_sum.max(diffusion_sum);
                    budgets[pair].drift_sum = budgets[pair].drift_sum.max(drift_sum);
                    max_combined = max_combined.max(diffusion_sum + drift_sum);
                }
            }
        }

        // neighbor tables
        let mut axis_nb = vec![0u32; nodes * 2 * n];
        for node in 0..nodes {
            for axis in 0..n {
                axis_nb[node * 2 * n + 2 * axis] = grid.shift(node, axis, -1) as u32;
                axis_nb[node * 2 * n + 2 * axis + 1] = grid.shift(node, axis, 1) as u32;
            }
        }
        let cross_pairs = n * (n - 1) / 2;
        let mut diag_nb = vec![0u32; if has_cross { nodes * 4 * cross_pairs } else { 0 }];
        if has_cross {
            for node in 0..nodes {
                let mut k = 0;
                for i in 0..n {
                    for j in (i + 1)..n {
                        let pp = grid.shift(grid.shift(node, i, 1), j, 1);
                        let mm = grid.shift(grid.shift(node, i, -1), j, -1);
                        let pm = grid.shift(grid.shift(node, i, 1), j, -1);
                        let mp = grid.shift(grid.shift(node, i, -1), j, 1);
                        let base = (node * cross_pairs + k) * 4;
                        diag_nb[base] = pp as u32;
                        diag_nb[base + 1] = mm as u32;
                        diag_nb[base + 2] = pm as u32;
                        diag_nb[base + 3] = mp as u32;
                        k += 1;
                    }
                }
            }
        }

        Ok(Scheme {
            op: op.clone(),
            grid,
            pairs_a: na,
            pairs_b: nb,
            diff,
            drift,
            cost,
            axis_nb,
            diag_nb,
            inv_h,
            inv_h2,
            budgets,
            max_combined_budget: max_combined,
            sup_cost,
            has_cross,
        })
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn operator(&self) -> &HjbiOperator {
        &self.op
    }

    /// Sampled `max_{x,a,b} |l|` from the tabulation.
    pub fn sup_cost(&self) -> f64 {
        self.sup_cost
    }

    /// Per-control-pair worst-case budgets (maximized over nodes).
    pub fn stencil_budgets(&self) -> &[StencilBudget] {
        &self.budgets
    }

    /// Explicit time step `dt = 0.9 / (max +combined budget+ + discount)`,
    /// capped at `dt_max`; `dt_max` when all coefficients and the discount
    /// vanish.
    pub fn cfl_timestep(&self, discount: f64, dt_max: f64) -> f64 {
        let denom = self.max_combined_budget + discount;
        if denom > 0.0 {
            (CFL_SAFETY / denom).min(dt_max)
        } else {
            dt_max
        }
    }

    /// Discrete Hamiltonian `min_b max_a` of the monotone stencil at a node.
    pub fn hamiltonian_at(&self, u: &[f64], node: usize) -> f64 {
        let n = self.op.dim;
        let pairs = self.pairs_a * self.pairs_b;
        let u0 = u[node];
        let nb = &self.axis_nb[node * 2 * n..node * 2 * n + 2 * n];
        let cross_pairs = n * (n - 1) / 2;
        let mut outer = f64::INFINITY;
        for bi in 0..self.pairs_b {
            let mut inner = f64::NEG_INFINITY;
            for ai in 0..self.pairs_a {
                let pair = bi * self.pairs_a + ai;
                let base = (node * pairs + pair) * n * n;
                let dbase = (node * pairs + pair) * n;
                let mut val = self.cost[node * pairs + pair];
                for i in 0..n {
                    let um = u[nb[2 * i] as usize];
                    let up = u[nb[2 * i + 1] as usize];
                    let aii = self.diff[base + i * n + i];
                    val -= aii * (up - 2.0 * u0 + um) * self.inv_h2[i];
                    let fi = self.drift[dbase + i];
                    if fi >= 0.0 {
                        val += fi * (u0 - um) * self.inv_h[i];
                    } else {
                        val -= -fi * (up - u0) * self.inv_h[i];
                    }
                }
                if self.has_cross {
                    let mut k = 0;
                    for i in 0..n {
                        for j in (i + 1)..n {
                            let aij = self.diff[base + i * n + j];
                            if aij != 0.0 {
                                let dbase4 = (node * cross_pairs + k) * 4;
                                let (d1, d2) = if aij >= 0.0 {
                                    (
                                        u[self.diag_nb[dbase4] as usize],
                                        u[self.diag_nb[dbase4 + 1] as usize],
                                    )
                                } else {
                                    (
                                        u[self.diag_nb[dbase4 + 2] as usize],
                                        u[self.diag_nb[dbase4 + 3] as usize],
                                    )
                                };
                                let axis_sum = u[nb[2 * i] as usize]
                                    + u[nb[2 * i + 1] as usize]
                                    + u[nb[2 * j] as usize]
                                    + u[nb[2 * j + 1] as usize];
                                val -= aij.abs()
                                    * self.inv_h[i]
                                    * self.inv_h[j]
                                    * (2.0 * u0 + d1 + d2 - axis_sum);
                            }
                            k += 1;
                        }
                    }
                }
                if val > inner {
                    inner = val;
                }
            }
            if inner < outer {
                outer = inner;
            }
        }
        outer
    }

    /// One explicit Euler step `out = u - dt * H_h(u)`, parallel over nodes
    /// on large grids.
    pub fn explicit_step(&self, u: &[f64], dt: f64, out: &mut [f64]) {
        if u.len() >= PAR_THRESHOLD {
            out.par_iter_mut().enumerate().for_each(|(node, o)| {
                *o = u[node] - dt * self.hamiltonian_at(u, node);
            });
        } else {
            for (node, o) in out.iter_mut().enumerate() {
                *o = u[node] - dt * self.hamiltonian_at(u, node);
            }
        }
    }

    /// `sup_x |H_h(u)(x)|`; the discrete time-Lipschitz constant of the
    /// evolution started from `u`.
    pub fn sup_hamiltonian(&self, u: &[f64]) -> f64 {
        (0..u.len()).fold(0.0f64, |m, node| m.max(self.hamiltonian_at(u, node).abs()))
    }
}

/// Discrete Hamiltonian at one node (convenience wrapper; builds the full
/// tabulation, so prefer [`Scheme`] in loops).
pub fn discrete_hamiltonian(op: &HjbiOperator, u: &GridFunction, node: usize) -> Result<f64> {
    let scheme = Scheme::new(op, u.grid().clone())?;
    Ok(scheme.hamiltonian_at(u.values(), node))
}

/// Pair-sampling plan for the Hoelder seminorm estimator.
#[derive(Debug, Clone)]
pub struct SeminormEstimator {
    /// Use exhaustive pair enumeration up to this node count.
    pub exhaustive_limit: usize,
    /// Above the limit: all pairs within this many cells per axis...
    pub local_radius: usize,
    /// ...plus this many random pairs.
    pub random_pairs: usize,
    pub seed: u64,
}

impl Default for SeminormEstimator {
    fn default() -> Self {
        SeminormEstimator {
            exhaustive_limit: 4096,
            local_radius: 4,
            random_pairs: 20_000,
            seed: 0x5e119,
        }
    }
}

/// Discrete gamma-Hoelder seminorm `max |u(x) - u(y)| / d_T(x, y)^gamma`
/// over sampled node pairs (torus metric).
///
/// Exhaustive below [`SeminormEstimator::exhaustive_limit`] nodes; above it
/// the estimator restricts to local pairs plus a random sample and is a
/// lower bound of the discrete seminorm.
pub fn hoelder_seminorm(u: &GridFunction, gamma: f64) -> f64 {
    hoelder_seminorm_with(u, gamma, &SeminormEstimator::default())
}

pub fn hoelder_seminorm_with(u: &GridFunction, gamma: f64, est: &SeminormEstimator) -> f64 {
    assert!(
        gamma > 0.0 && gamma <= 1.0,
        "hoelder exponent must lie in (0, 1]"
    );
    let grid = u.grid();
    let nodes = grid.node_count();
    let vals = u.values();
    let quotient = |i: usize, j: usize| -> f64 {
        let d = Grid::torus_distance(&grid.coords(i), &grid.coords(j));
        if d == 0.0 {
            return 0.0;
        }
        let dg = if gamma == 1.0 { d } else { d.powf(gamma) };
        (vals[i] - vals[j]).abs() / dg
    };
    let mut best = 0.0f64;
    if nodes <= est.exhaustive_limit {
        for i in 0..nodes {
            for j in (i + 1)..nodes {
                best = best.max(quotient(i, j));
            }
        }
        return best;
    }
    // local offsets within the radius (one representative per +/- pair)
    let n = grid.dim();
    let radius = est.local_radius as isize;
    let mut offsets: Vec<Vec<isize>> = vec![vec![0; n]];
    for axis in 0..n {
        let mut extended = Vec::new();
        for base in &offsets {
            for o in -radius..=radius {
                let mut v = base.clone();
                v[axis] = o;
                extended.push(v);
            }
        }
        offsets = extended;
    }
    offsets.retain(|o| o.iter().any(|&c| c != 0));
    for node in 0..nodes {
        for off in &offsets {
            let mut other = node;
            for (axis, &o) in off.iter().enumerate() {
                other = grid.shift(other, axis, o);
            }
            if other != node {
                best = best.max(quotient(node, other));
            }
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(est.seed);
    for _ in 0..est.random_pairs {
        let i = rng.gen_range(0..nodes);
        let j = rng.gen_range(0..nodes);
        if i != j {
            best = best.max(quotient(i, j));
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;
    use crate::operator::HjbiOperator;
    use approx::assert_relative_eq;
    use nalgebra::DMatrix;
    use rand::Rng;

    fn heat_op() -> HjbiOperator {
        HjbiOperator::builder(1, 1)
            .sigma(&[&["1"]])
            .drift(&["0"])
            .cost("0")
            .build()
            .unwrap()
    }

    #[test]
    fn constant_function_gives_min_max_cost() {
        let op = HjbiOperator::builder(1, 1)
            .control_a(vec![vec![-1.0], vec![1.0]])
            .control_b(vec![vec![-1.0], vec![1.0]])
            .sigma(&[&["0.4"]])
            .drift(&["a1"])
            .cost("a1 * b1 + 0.5")
            .build()
            .unwrap();
        let grid = Grid::new(&[32]).unwrap();
        let scheme = Scheme::new(&op, grid.clone()).unwrap();
        let u = vec![3.25; grid.node_count()];
        for node in [0, 5, 31] {
            // difference terms vanish; min_b max_a (a1*b1 + 0.5) = 1.5
            assert_relative_eq!(scheme.hamiltonian_at(&u, node), 1.5, epsilon = 1e-13);
        }
    }

    #[test]
    fn indicator_reproduces_three_point_laplacian() {
        let grid = Grid::new(&[16]).unwrap();
        let scheme = Scheme::new(&heat_op(), grid.clone()).unwrap();
        let h2 = grid.spacing(0) * grid.spacing(0);
        let j = 8;
        let mut u = vec![0.0; grid.node_count()];
        u[j] = 1.0;
        // hand-computed 3-point stencil of -u''
        assert_relative_eq!(scheme.hamiltonian_at(&u, j), 2.0 / h2, epsilon = 1e-9);
        assert_relative_eq!(scheme.hamiltonian_at(&u, j - 1), -1.0 / h2, epsilon = 1e-9);
        assert_relative_eq!(scheme.hamiltonian_at(&u, j + 1), -1.0 / h2, epsilon = 1e-9);
        assert_relative_eq!(scheme.hamiltonian_at(&u, j + 2), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn upwind_takes_backward_quotient() {
        let op = HjbiOperator::builder(1, 1)
            .sigma(&[&["0"]])
            .drift(&["1"])
            .cost("0")
            .build()
            .unwrap();
        let grid = Grid::new(&[16]).unwrap();
        let scheme = Scheme::new(&op, grid.clone()).unwrap();
        let u: Vec<f64> = (0..16).map(|i| i as f64 / 16.0).collect();
        for node in 2..14 {
            assert_relative_eq!(scheme.hamiltonian_at(&u, node), 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn cfl_heat_transport_and_mixed() {
        let grid = Grid::new(&[64]).unwrap();
        let h = grid.spacing(0);
        let scheme = Scheme::new(&heat_op(), grid.clone()).unwrap();
        assert_relative_eq!(
            scheme.cfl_timestep(0.0, 1.0),
            0.9 * h * h / 2.0,
            epsilon = 1e-15
        );

        let transport = HjbiOperator::builder(1, 1)
            .sigma(&[&["0"]])
            .drift(&["1"])
            .cost("0")
            .build()
            .unwrap();
        let scheme = Scheme::new(&transport, grid).unwrap();
        assert_relative_eq!(scheme.cfl_timestep(0.0, 1.0), 0.9 * h, epsilon = 1e-15);

        let grid32 = Grid::new(&[32]).unwrap();
        let mixed = HjbiOperator::builder(1, 1)
            .sigma(&[&["1"]])
            .drift(&["2"])
            .cost("0")
            .build()
            .unwrap();
        let scheme = Scheme::new(&mixed, grid32.clone()).unwrap();
        let h32 = grid32.spacing(0);
        let expect = CFL_SAFETY / (2.0 / (h32 * h32) + 2.0 / h32);
        assert_relative_eq!(scheme.cfl_timestep(0.0, 1.0), expect, epsilon = 1e-15);
    }

    #[test]
    fn cfl_zero_denominator_returns_dt_max() {
        let op = HjbiOperator::builder(1, 1)
            .sigma(&[&["0"]])
            .drift(&["0"])
            .cost("0.7")
            .build()
            .unwrap();
        let grid = Grid::new(&[8]).unwrap();
        let scheme = Scheme::new(&op, grid).unwrap();
        assert_eq!(scheme.cfl_timestep(0.0, 0.125), 0.125);
    }

    #[test]
    fn admissibility_rejects_dominance_violation() {
        // sigma = [[1, 1], [0, 0]] gives a = [[2, 0], [0, 0]]: fine.
        // sigma rows correlated: a = [[1, 1], [1, 1]] has a_22 = 1 = |a_12|: fine.
        // Force a genuine violation: a = [[1, 0.6], [0.6, 0.25]] via explicit rows.
        let op = HjbiOperator::builder(2, 2)
            .sigma(&[&["1", "0"], &["0.6", "-0.8"]])
            .drift(&["0", "0"])
            .cost("0")
            .build()
            .unwrap();
        // a = [[1, 0.6], [0.6, 1.0]]: dominant, builds fine
        let grid = Grid::new(&[8, 8]).unwrap();
        assert!(Scheme::new(&op, grid.clone()).is_ok());

        let bad = HjbiOperator::builder(2, 2)
            .sigma(&[&["1", "0"], &["0.6", "0.1"]])
            .drift(&["0", "0"])
            .cost("0")
            .build()
            .unwrap();
        // a = [[1, 0.6], [0.6, 0.37]]: 0.37 < 0.6 violates dominance
        let err = Scheme::new(&bad, grid).unwrap_err();
        match err {
            Error::Admissibility { axis, .. } => assert_eq!(axis, 1),
            other => panic!("expected admissibility error, got {other}"),
        }
    }

    #[test]
    fn update_is_monotone_in_neighbors() {
        let op = HjbiOperator::builder(2, 2)
            .control_a(vec![vec![-1.0], vec![1.0]])
            .sigma(&[&["1", "0"], &["0.5 * a1", "1"]])
            .drift(&["a1", "0.5"])
            .cost("cos(2*pi*x1) * a1")
            .build()
            .unwrap();
        let grid = Grid::new(&[8, 8]).unwrap();
        let scheme = Scheme::new(&op, grid.clone()).unwrap();
        let dt = scheme.cfl_timestep(0.0, 1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let u: Vec<f64> = (0..grid.node_count())
            .map(|_| rng.gen_range(-1.0..1.0))
            .collect();
        let update = |u: &[f64], node: usize| u[node] - dt * scheme.hamiltonian_at(u, node);
        for node in [0usize, 9, 27, 63] {
            let baseline = update(&u, node);
            for other in 0..grid.node_count() {
                if other == node {
                    continue;
                }
                let mut bumped = u.clone();
                bumped[other] += 0.1;
                assert!(
                    update(&bumped, node) >= baseline - 1e-12,
                    "raising node {other} lowered the update at {node}"
                );
            }
        }
    }

    #[test]
    fn consistency_on_quadratics_first_order() {
        // operator with drift so the upwind bias is the leading error
        let op = HjbiOperator::builder(1, 1)
            .control_a(vec![vec![-1.0], vec![1.0]])
            .sigma(&[&["1"]])
            .drift(&["a1 + 0.25"])
            .cost("0.5")
            .build()
            .unwrap();
        let mut errors = Vec::new();
        for size in [16usize, 32, 64] {
            let grid = Grid::new(&[size]).unwrap();
            let scheme = Scheme::new(&op, grid.clone()).unwrap();
            // phi(x) = 0.8 (x - 1/2)^2 + 0.3 x, evaluated at the center node
            let u: Vec<f64> = (0..size)
                .map(|i| {
                    let x = i as f64 / size as f64;
                    0.8 * (x - 0.5) * (x - 0.5) + 0.3 * x
                })
                .collect();
            let node = size / 2;
            let x = grid.coords(node);
            let grad = [1.6 * (x[0] - 0.5) + 0.3];
            let hess = DMatrix::from_element(1, 1, 1.6);
            let exact = op.evaluate_hamiltonian(&x, &grad, &hess);
            errors.push((scheme.hamiltonian_at(&u, node) - exact).abs());
        }
        let r1 = errors[0] / errors[1];
        let r2 = errors[1] / errors[2];
        assert!(r1 >= 1.9_f64.min(2.0_f64.powf(0.9)), "{errors:?}");
        assert!(r2 >= 2.0_f64.powf(0.9), "{errors:?}");
    }

    #[test]
    fn translation_equivariance_on_periodic_coefficients() {
        // constant-in-x coefficients: shifting u by one node commutes exactly
        let op = HjbiOperator::builder(1, 1)
            .control_a(vec![vec![-1.0], vec![1.0]])
            .sigma(&[&["1"]])
            .drift(&["a1"])
            .cost("a1 * 0.5")
            .build()
            .unwrap();
        let grid = Grid::new(&[32]).unwrap();
        let scheme = Scheme::new(&op, grid.clone()).unwrap();
        let u = GridFunction::sample(grid.clone(), |x| (2.0 * std::f64::consts::PI * x[0]).sin());
        let shifted = u.shifted(0, 1);
        for node in 0..grid.node_count() {
            let lhs = scheme.hamiltonian_at(shifted.values(), node);
            let rhs = scheme.hamiltonian_at(u.values(), grid.shift(node, 0, 1));
            assert_eq!(lhs, rhs, "shifting by one node must commute exactly");
        }

        // grid-periodic coefficients (period 8 nodes): shift by one period
        let op = HjbiOperator::builder(1, 1)
            .control_a(vec![vec![-1.0], vec![1.0]])
            .sigma(&[&["1 + 0.2 * cos(8*pi*x1)"]])
            .drift(&["a1 * sin(8*pi*x1)"])
            .cost("cos(8*pi*x1)")
            .build()
            .unwrap();
        let scheme = Scheme::new(&op, grid.clone()).unwrap();
        let shifted = u.shifted(0, 8);
        for node in 0..grid.node_count() {
            let lhs = scheme.hamiltonian_at(shifted.values(), node);
            let rhs = scheme.hamiltonian_at(u.values(), grid.shift(node, 0, 8));
            assert!((lhs - rhs).abs() <= 1e-9, "node {node}: {lhs} vs {rhs}");
        }
    }

    #[test]
    fn seminorm_constant_is_zero() {
        let grid = Grid::new(&[16]).unwrap();
        let u = GridFunction::sample(grid, |_| 4.2);
        assert_eq!(hoelder_seminorm(&u, 1.0), 0.0);
        assert_eq!(hoelder_seminorm(&u, 0.5), 0.0);
    }

    #[test]
    fn seminorm_sawtooth_sees_wrap_jump() {
        // u = x on a 16-node torus: the wrap pair (15/16, 0) has quotient
        // (15/16) / (1/16) = 15, dominating the slope 1.
        let grid = Grid::new(&[16]).unwrap();
        let u = GridFunction::sample(grid.clone(), |x| x[0]);
        let got = hoelder_seminorm(&u, 1.0);
        // exhaustive oracle
        let mut expect = 0.0f64;
        for i in 0..16 {
            for j in (i + 1)..16 {
                let d = Grid::torus_distance(&grid.coords(i), &grid.coords(j));
                expect = expect.max((u.values()[i] - u.values()[j]).abs() / d);
            }
        }
        assert_relative_eq!(got, expect, epsilon = 1e-12);
        assert_relative_eq!(got, 15.0, epsilon = 1e-12);
    }

    #[test]
    fn seminorm_sine_close_to_two_pi() {
        let grid = Grid::new(&[64]).unwrap();
        let u = GridFunction::sample(grid, |x| (2.0 * std::f64::consts::PI * x[0]).sin());
        let got = hoelder_seminorm(&u, 1.0);
        let two_pi = 2.0 * std::f64::consts::PI;
        assert!((got - two_pi).abs() / two_pi < 0.05, "got {got}");
    }

    #[test]
    fn seminorm_estimator_is_lower_bound() {
        let grid = Grid::new(&[128]).unwrap();
        let u = GridFunction::sample(grid, |x| {
            (2.0 * std::f64::consts::PI * x[0]).sin() + 0.3 * (6.0 * std::f64::consts::PI * x[0]).cos()
        });
        let exhaustive = hoelder_seminorm_with(
            &u,
            1.0,
            &SeminormEstimator {
                exhaustive_limit: usize::MAX,
                ..Default::default()
            },
        );
        let estimated = hoelder_seminorm_with(
            &u,
            1.0,
            &SeminormEstimator {
                exhaustive_limit: 0,
                local_radius: 3,
                random_pairs: 500,
                seed: 9,
            },
        );
        assert!(estimated <= exhaustive + 1e-12);
        assert!(estimated >= 0.5 * exhaustive, "estimator too loose: {estimated} vs {exhaustive}");
    }
}
