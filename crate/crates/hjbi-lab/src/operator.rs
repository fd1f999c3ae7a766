//! Min-max operators: control sets, coefficient fields, regularity
//! certificates, pointwise Hamiltonian evaluation and coefficient distances.
//!
//! An operator is the map `(x, p, X) -> min_b max_a { -tr(a(x,a,b) X) +
//! f(x,a,b) . p + l(x,a,b) }` with `a = sigma sigma^T`, over finite control
//! sets. Coefficients are closed-form expressions (see [`crate::expr`]) so
//! operators serialize, hash and re-evaluate exactly.

use std::sync::Arc;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::expr::{EvalCtx, Expr};
use crate::grid::Grid;

/// Finite discretization of a compact control space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlSet {
    pub label: String,
    pub points: Vec<Vec<f64>>,
}

impl ControlSet {
    pub fn new(label: impl Into<String>, points: Vec<Vec<f64>>) -> Result<ControlSet> {
        if points.is_empty() {
            return Err(Error::config("control set must be non-empty"));
        }
        let dim = points[0].len();
        if points.iter().any(|p| p.len() != dim) {
            return Err(Error::config(
                "all control points must have the same dimension",
            ));
        }
        Ok(ControlSet {
            label: label.into(),
            points,
        })
    }

    /// Singleton control set `{0}`.
    pub fn trivial(label: impl Into<String>) -> ControlSet {
        ControlSet {
            label: label.into(),
            points: vec![vec![0.0]],
        }
    }

    pub fn point_dim(&self) -> usize {
        self.points[0].len()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Shape of a coefficient field.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FieldKind {
    Matrix { rows: usize, cols: usize },
    Vector { len: usize },
    Scalar,
}

/// A coefficient field: expression entries in row-major order, with a
/// periodicity flag (period lattice = unit lattice).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientField {
    pub kind: FieldKind,
    pub entries: Vec<Expr>,
    pub periodic: bool,
}

impl CoefficientField {
    pub fn matrix(rows: usize, cols: usize, entries: Vec<Expr>) -> Result<CoefficientField> {
        if entries.len() != rows * cols {
            return Err(Error::dimension(format!(
                "matrix field expects {} entries, got {}",
                rows * cols,
                entries.len()
            )));
        }
        Ok(CoefficientField {
            kind: FieldKind::Matrix { rows, cols },
            entries,
            periodic: true,
        })
    }

    pub fn vector(len: usize, entries: Vec<Expr>) -> Result<CoefficientField> {
        if entries.len() != len {
            return Err(Error::dimension(format!(
                "vector field expects {len} entries, got {}",
                entries.len()
            )));
        }
        Ok(CoefficientField {
            kind: FieldKind::Vector { len },
            entries,
            periodic: true,
        })
    }

    pub fn scalar(entry: Expr) -> CoefficientField {
        CoefficientField {
            kind: FieldKind::Scalar,
            entries: vec![entry],
            periodic: true,
        }
    }
}

/// Modulus of continuity: nonnegative, nondecreasing, zero at zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Modulus {
    Linear { slope: f64 },
    Hoelder { coeff: f64, exponent: f64 },
    /// Piecewise-linear through `(r, value)` points starting at `(0, 0)`;
    /// extrapolated with the last segment's slope.
    Tabulated { points: Vec<(f64, f64)> },
}

impl Modulus {
    pub fn eval(&self, r: f64) -> f64 {
        let r = r.max(0.0);
        match self {
            Modulus::Linear { slope } => slope * r,
            Modulus::Hoelder { coeff, exponent } => coeff * r.powf(*exponent),
            Modulus::Tabulated { points } => {
                if points.is_empty() || r == 0.0 {
                    return 0.0;
                }
                let mut prev = (0.0, 0.0);
                for &(rp, vp) in points {
                    if r <= rp {
                        let t = (r - prev.0) / (rp - prev.0);
                        return prev.1 + t * (vp - prev.1);
                    }
                    prev = (rp, vp);
                }
                let (rl, vl) = *points.last().unwrap();
                let slope = if points.len() >= 2 {
                    let (rp, vp) = points[points.len() - 2];
                    (vl - vp) / (rl - rp)
                } else {
                    vl / rl
                };
                vl + slope * (r - rl)
            }
        }
    }

    /// Adds a linear term `slope * r` to the modulus, staying in the family
    /// when possible.
    pub fn plus_linear(&self, slope: f64) -> Modulus {
        match self {
            Modulus::Linear { slope: s } => Modulus::Linear { slope: s + slope },
            other => {
                let points = (1..=32)
                    .map(|k| {
                        let r = k as f64 / 16.0;
                        (r, other.eval(r) + slope * r)
                    })
                    .collect();
                Modulus::Tabulated { points }
            }
        }
    }

    /// Pointwise maximum of two moduli (exact for same-kind linear, sampled
    /// piecewise-linear otherwise).
    pub fn max_of(a: &Modulus, b: &Modulus) -> Modulus {
        match (a, b) {
            (Modulus::Linear { slope: s1 }, Modulus::Linear { slope: s2 }) => Modulus::Linear {
                slope: s1.max(*s2),
            },
            _ => {
                let points = (1..=32)
                    .map(|k| {
                        let r = k as f64 / 16.0;
                        (r, a.eval(r).max(b.eval(r)))
                    })
                    .collect();
                Modulus::Tabulated { points }
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Modulus::Linear { slope } if *slope >= 0.0 => Ok(()),
            Modulus::Hoelder { coeff, exponent } if *coeff >= 0.0 && *exponent > 0.0 => Ok(()),
            Modulus::Tabulated { points } => {
                let mut prev = (0.0, 0.0);
                for &(r, v) in points {
                    if r <= prev.0 || v < prev.1 {
                        return Err(Error::config(
                            "tabulated modulus must be increasing in r and nondecreasing in value",
                        ));
                    }
                    prev = (r, v);
                }
                Ok(())
            }
            _ => Err(Error::config("invalid modulus parameters")),
        }
    }
}

/// Quantitative regularity data for an operator: sup bounds, Lipschitz
/// constants, cost modulus, ellipticity lower bound and Hoelder data of the
/// associated solutions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegularityCertificate {
    /// Common sup bound on `||sigma||`, `|f|`, `|l|`.
    pub sup_bound: f64,
    /// Lipschitz constant of `sigma` in the state, uniform in controls.
    pub lip_sigma: f64,
    /// Lipschitz constant of `f` in the state, uniform in controls.
    pub lip_drift: f64,
    /// Modulus of continuity of the running cost.
    pub cost_modulus: Modulus,
    /// Ellipticity lower bound on the eigenvalues of `a`; 0 if degenerate.
    pub ellipticity: f64,
    /// Hoelder exponent of the solutions in space, in `(0, 1]`.
    pub hoelder_exponent: f64,
    /// Hoelder seminorm bound of the solutions, uniform in time.
    pub hoelder_seminorm: f64,
}

impl RegularityCertificate {
    pub fn validate(&self) -> Result<()> {
        if self.sup_bound < 0.0 || self.lip_sigma < 0.0 || self.lip_drift < 0.0 {
            return Err(Error::config("certificate constants must be nonnegative"));
        }
        if self.ellipticity < 0.0 {
            return Err(Error::config("ellipticity bound must be nonnegative"));
        }
        if !(self.hoelder_exponent > 0.0 && self.hoelder_exponent <= 1.0) {
            return Err(Error::config("hoelder exponent must lie in (0, 1]"));
        }
        if self.hoelder_seminorm < 0.0 {
            return Err(Error::config("hoelder seminorm must be nonnegative"));
        }
        self.cost_modulus.validate()
    }

    /// Componentwise maximum: the certificate under which both operators'
    /// hypotheses hold.
    pub fn pairwise_max(a: &RegularityCertificate, b: &RegularityCertificate) -> RegularityCertificate {
        RegularityCertificate {
            sup_bound: a.sup_bound.max(b.sup_bound),
            lip_sigma: a.lip_sigma.max(b.lip_sigma),
            lip_drift: a.lip_drift.max(b.lip_drift),
            cost_modulus: Modulus::max_of(&a.cost_modulus, &b.cost_modulus),
            // the shared hypothesis needs the weaker ellipticity
            ellipticity: a.ellipticity.min(b.ellipticity),
            hoelder_exponent: a.hoelder_exponent.min(b.hoelder_exponent),
            hoelder_seminorm: a.hoelder_seminorm.max(b.hoelder_seminorm),
        }
    }
}

/// A min-max operator over finite control sets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HjbiOperator {
    pub name: String,
    /// State dimension.
    pub dim: usize,
    /// Noise dimension (columns of sigma).
    pub noise_dim: usize,
    pub sigma: CoefficientField,
    pub drift: CoefficientField,
    pub cost: CoefficientField,
    pub control_a: ControlSet,
    pub control_b: ControlSet,
    pub certificate: Option<RegularityCertificate>,
}

/// Builder accepting expression source strings.
pub struct OperatorBuilder {
    name: String,
    dim: usize,
    noise_dim: usize,
    sigma: Vec<Vec<String>>,
    drift: Vec<String>,
    cost: String,
    control_a: Option<ControlSet>,
    control_b: Option<ControlSet>,
    certificate: Option<RegularityCertificate>,
}

impl HjbiOperator {
    pub fn builder(dim: usize, noise_dim: usize) -> OperatorBuilder {
        OperatorBuilder {
            name: String::new(),
            dim,
            noise_dim,
            sigma: vec![vec!["0".to_string(); noise_dim]; dim],
            drift: vec!["0".to_string(); dim],
            cost: "0".to_string(),
            control_a: None,
            control_b: None,
            certificate: None,
        }
    }

    pub fn control_pairs(&self) -> usize {
        self.control_a.len() * self.control_b.len()
    }

    fn ctx<'a>(&self, x: &'a [f64], alpha: &'a [f64], beta: &'a [f64]) -> EvalCtx<'a> {
        EvalCtx {
            x,
            y: &[],
            a: alpha,
            b: beta,
        }
    }

    /// Dispersion matrix `sigma(x, alpha, beta)`, `dim x noise_dim`.
    pub fn dispersion(&self, x: &[f64], alpha: &[f64], beta: &[f64]) -> DMatrix<f64> {
        let ctx = self.ctx(x, alpha, beta);
        DMatrix::from_fn(self.dim, self.noise_dim, |i, j| {
            self.sigma.entries[i * self.noise_dim + j].eval(&ctx)
        })
    }

    /// Diffusion matrix `a = sigma sigma^T`; symmetric positive semidefinite.
    pub fn diffusion(&self, x: &[f64], alpha: &[f64], beta: &[f64]) -> DMatrix<f64> {
        let s = self.dispersion(x, alpha, beta);
        &s * s.transpose()
    }

    pub fn drift_at(&self, x: &[f64], alpha: &[f64], beta: &[f64]) -> Vec<f64> {
        let ctx = self.ctx(x, alpha, beta);
        self.drift.entries.iter().map(|e| e.eval(&ctx)).collect()
    }

    pub fn cost_at(&self, x: &[f64], alpha: &[f64], beta: &[f64]) -> f64 {
        let ctx = self.ctx(x, alpha, beta);
        self.cost.entries[0].eval(&ctx)
    }

    fn linear_value(&self, x: &[f64], alpha: &[f64], beta: &[f64], grad: &[f64], hess: &DMatrix<f64>) -> f64 {
        let a = self.diffusion(x, alpha, beta);
        let f = self.drift_at(x, alpha, beta);
        let l = self.cost_at(x, alpha, beta);
        let mut trace = 0.0;
        for i in 0..self.dim {
            for j in 0..self.dim {
                trace += a[(i, j)] * hess[(i, j)];
            }
        }
        let advect: f64 = f.iter().zip(grad).map(|(fi, pi)| fi * pi).sum();
        -trace + advect + l
    }

    /// Pointwise Hamiltonian `min_b max_a { -tr(a X) + f . p + l }`.
    /// Ties are resolved by the first index in declared control order.
    pub fn evaluate_hamiltonian(&self, x: &[f64], grad: &[f64], hess: &DMatrix<f64>) -> f64 {
        self.saddle(x, grad, hess).0
    }

    /// Hamiltonian value together with the (first-index) optimizing pair.
    pub fn saddle(&self, x: &[f64], grad: &[f64], hess: &DMatrix<f64>) -> (f64, usize, usize) {
        let mut outer: Option<(f64, usize, usize)> = None;
        for (bi, beta) in self.control_b.points.iter().enumerate() {
            let mut inner: Option<(f64, usize)> = None;
            for (ai, alpha) in self.control_a.points.iter().enumerate() {
                let v = self.linear_value(x, alpha, beta, grad, hess);
                if inner.map_or(true, |(m, _)| v > m) {
                    inner = Some((v, ai));
                }
            }
            let (v, ai) = inner.expect("control set A is non-empty");
            if outer.map_or(true, |(m, _, _)| v < m) {
                outer = Some((v, ai, bi));
            }
        }
        outer.expect("control set B is non-empty")
    }

    /// Sampled `max_{x,a,b} |l|` over grid nodes.
    pub fn sampled_sup_cost(&self, grid: &Grid) -> f64 {
        let mut sup = 0.0f64;
        for idx in 0..grid.node_count() {
            let x = grid.coords(idx);
            for alpha in &self.control_a.points {
                for beta in &self.control_b.points {
                    sup = sup.max(self.cost_at(&x, alpha, beta).abs());
                }
            }
        }
        sup
    }

    /// Sampled minimum eigenvalue of `a` over grid nodes and controls.
    pub fn sampled_min_ellipticity(&self, grid: &Grid) -> f64 {
        let mut min_eig = f64::INFINITY;
        for idx in 0..grid.node_count() {
            let x = grid.coords(idx);
            for alpha in &self.control_a.points {
                for beta in &self.control_b.points {
                    let a = self.diffusion(&x, alpha, beta);
                    min_eig = min_eig.min(min_eigenvalue(&a));
                }
            }
        }
        min_eig
    }

    /// Spot-checks `Z^n`-periodicity of the coefficient expressions: shifts
    /// each axis by one period on sample points.
    pub fn check_periodicity(&self, samples: usize, seed: u64) -> Result<()> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..samples {
            let x: Vec<f64> = (0..self.dim).map(|_| rng.gen_range(0.0..1.0)).collect();
            for axis in 0..self.dim {
                let mut shifted = x.clone();
                shifted[axis] += 1.0;
                for alpha in &self.control_a.points {
                    for beta in &self.control_b.points {
                        let base = self.dispersion(&x, alpha, beta);
                        let moved = self.dispersion(&shifted, alpha, beta);
                        let df = (base - moved).norm();
                        let fv: f64 = self
                            .drift_at(&x, alpha, beta)
                            .iter()
                            .zip(self.drift_at(&shifted, alpha, beta))
                            .map(|(a, b)| (a - b).abs())
                            .fold(0.0, f64::max);
                        let lv = (self.cost_at(&x, alpha, beta) - self.cost_at(&shifted, alpha, beta)).abs();
                        if df > 1e-9 || fv > 1e-9 || lv > 1e-9 {
                            return Err(Error::config(format!(
                                "coefficients of `{}` are not periodic along axis {} (deviation sigma={df:.2e}, f={fv:.2e}, l={lv:.2e})",
                                self.name, axis + 1
                            )));
                        }
                    }
                }
            }
        }
        Ok(())
    }

    /// Content hash of the full operator definition (hex SHA-256).
    pub fn content_hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("operator serializes");
        let mut hasher = Sha256::new();
        hasher.update(&bytes);
        hex::encode(hasher.finalize())
    }
}

impl OperatorBuilder {
    pub fn name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn control_a(mut self, points: Vec<Vec<f64>>) -> Self {
        self.control_a = ControlSet::new("A", points).ok();
        self
    }

    pub fn control_b(mut self, points: Vec<Vec<f64>>) -> Self {
        self.control_b = ControlSet::new("B", points).ok();
        self
    }

    /// Row-major `dim x noise_dim` matrix of expression sources.
    pub fn sigma(mut self, rows: &[&[&str]]) -> Self {
        self.sigma = rows
            .iter()
            .map(|r| r.iter().map(|s| s.to_string()).collect())
            .collect();
        self
    }

    pub fn drift(mut self, entries: &[&str]) -> Self {
        self.drift = entries.iter().map(|s| s.to_string()).collect();
        self
    }

    pub fn cost(mut self, src: &str) -> Self {
        self.cost = src.to_string();
        self
    }

    pub fn certificate(mut self, cert: RegularityCertificate) -> Self {
        self.certificate = Some(cert);
        self
    }

    pub fn build(self) -> Result<HjbiOperator> {
        let control_a = self
            .control_a
            .unwrap_or_else(|| ControlSet::trivial("A"));
        let control_b = self
            .control_b
            .unwrap_or_else(|| ControlSet::trivial("B"));
        if self.sigma.len() != self.dim {
            return Err(Error::dimension(format!(
                "sigma must have {} rows, got {}",
                self.dim,
                self.sigma.len()
            )));
        }
        let mut sigma_entries = Vec::with_capacity(self.dim * self.noise_dim);
        for (i, row) in self.sigma.iter().enumerate() {
            if row.len() != self.noise_dim {
                return Err(Error::dimension(format!(
                    "sigma row {} must have {} columns, got {}",
                    i + 1,
                    self.noise_dim,
                    row.len()
                )));
            }
            for src in row {
                sigma_entries.push(Expr::parse(src)?);
            }
        }
        if self.drift.len() != self.dim {
            return Err(Error::dimension(format!(
                "drift must have {} entries, got {}",
                self.dim,
                self.drift.len()
            )));
        }
        let drift_entries = self
            .drift
            .iter()
            .map(|s| Expr::parse(s))
            .collect::<Result<Vec<_>>>()?;
        let cost_entry = Expr::parse(&self.cost)?;

        let op = HjbiOperator {
            name: self.name,
            dim: self.dim,
            noise_dim: self.noise_dim,
            sigma: CoefficientField::matrix(self.dim, self.noise_dim, sigma_entries)?,
            drift: CoefficientField::vector(self.dim, drift_entries)?,
            cost: CoefficientField::scalar(cost_entry),
            control_a,
            control_b,
            certificate: self.certificate,
        };
        validate_operator(&op)?;
        Ok(op)
    }
}

/// Construction-time consistency checks shared by the builder and the
/// config loader.
pub fn validate_operator(op: &HjbiOperator) -> Result<()> {
    if op.dim == 0 || op.noise_dim == 0 {
        return Err(Error::config("state and noise dimensions must be positive"));
    }
    let a_dim = op.control_a.point_dim();
    let b_dim = op.control_b.point_dim();
    for (what, field) in [("sigma", &op.sigma), ("drift", &op.drift), ("cost", &op.cost)] {
        for e in &field.entries {
            let (x, y, a, b) = e.var_extents();
            if x > op.dim {
                return Err(Error::dimension(format!(
                    "{what} expression uses x{x} but the operator dimension is {}",
                    op.dim
                )));
            }
            if y > 0 {
                return Err(Error::dimension(format!(
                    "{what} expression uses fast variables; only two-scale operators may"
                )));
            }
            if a > a_dim {
                return Err(Error::dimension(format!(
                    "{what} expression uses a{a} but control points in A have {a_dim} components"
                )));
            }
            if b > b_dim {
                return Err(Error::dimension(format!(
                    "{what} expression uses b{b} but control points in B have {b_dim} components"
                )));
            }
        }
    }
    if let Some(cert) = &op.certificate {
        cert.validate()?;
    }
    Ok(())
}

/// Smallest eigenvalue of a symmetric matrix.
pub fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    match m.nrows() {
        1 => m[(0, 0)],
        2 => {
            let tr = m[(0, 0)] + m[(1, 1)];
            let det = m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)];
            let disc = (tr * tr / 4.0 - det).max(0.0).sqrt();
            tr / 2.0 - disc
        }
        _ => m
            .clone()
            .symmetric_eigen()
            .eigenvalues
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min),
    }
}

/// Sampling plan shared by the certification and distance routines.
#[derive(Debug, Clone)]
pub struct SampleSpec {
    pub grid: Arc<Grid>,
    /// Extra random node pairs for seminorm/Lipschitz checks.
    pub random_pairs: usize,
    pub seed: u64,
}

impl SampleSpec {
    pub fn on_grid(grid: Arc<Grid>) -> SampleSpec {
        SampleSpec {
            grid,
            random_pairs: 256,
            seed: 0x4a5b,
        }
    }
}

/// Where the sampled suprema were taken.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SampleDescriptor {
    pub grid_sizes: Vec<usize>,
    pub control_counts: (usize, usize),
}

/// Sampled sup-distances between two operators' coefficients.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CoefficientDistance {
    /// `sup ||sigma_1 - sigma_2||` (Frobenius norm per sample).
    pub sigma: f64,
    /// `sup |f_1 - f_2|` (Euclidean norm per sample).
    pub drift: f64,
    /// `sup |l_1 - l_2|`.
    pub cost: f64,
    pub sample: SampleDescriptor,
}

/// Sampled sup-distances over grid nodes and the full control sets.
///
/// Errors if the operators do not share dimensions and control sets (the
/// comparison only makes sense over identical `A`, `B`).
pub fn coefficient_distance(
    op1: &HjbiOperator,
    op2: &HjbiOperator,
    spec: &SampleSpec,
) -> Result<CoefficientDistance> {
    if op1.dim != op2.dim || op1.noise_dim != op2.noise_dim {
        return Err(Error::dimension(
            "operators must share state and noise dimensions",
        ));
    }
    if op1.control_a != op2.control_a || op1.control_b != op2.control_b {
        return Err(Error::config(
            "operators must share identical control sets for a coefficient distance",
        ));
    }
    let grid = &spec.grid;
    if grid.dim() != op1.dim {
        return Err(Error::dimension("sample grid dimension mismatch"));
    }
    let mut d_sigma = 0.0f64;
    let mut d_drift = 0.0f64;
    let mut d_cost = 0.0f64;
    for idx in 0..grid.node_count() {
        let x = grid.coords(idx);
        for alpha in &op1.control_a.points {
            for beta in &op1.control_b.points {
                let ds = (op1.dispersion(&x, alpha, beta) - op2.dispersion(&x, alpha, beta)).norm();
                let f1 = op1.drift_at(&x, alpha, beta);
                let f2 = op2.drift_at(&x, alpha, beta);
                let df = f1
                    .iter()
                    .zip(&f2)
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>()
                    .sqrt();
                let dl = (op1.cost_at(&x, alpha, beta) - op2.cost_at(&x, alpha, beta)).abs();
                d_sigma = d_sigma.max(ds);
                d_drift = d_drift.max(df);
                d_cost = d_cost.max(dl);
            }
        }
    }
    Ok(CoefficientDistance {
        sigma: d_sigma,
        drift: d_drift,
        cost: d_cost,
        sample: SampleDescriptor {
            grid_sizes: grid.sizes().to_vec(),
            control_counts: (op1.control_a.len(), op1.control_b.len()),
        },
    })
}

/// How coercivity in the gradient is established.
#[derive(Debug, Clone)]
pub enum CoercivityMode {
    /// Verify `min_b max_a {...} >= nu |p| - C` over sampled `(x, p)` with
    /// the listed Hessian samples (default `X = 0`).
    Sampled {
        gradient_radius: f64,
        directions: usize,
        radii: usize,
        hessians: Vec<DMatrix<f64>>,
    },
    /// Structural test: `sigma = 0` on the designated subset of `A` and the
    /// ball of radius `nu` lies in the convex hull of the drifts over that
    /// subset (support-function minimization over sampled directions).
    Structural {
        a_prime: Vec<usize>,
        directions: usize,
    },
}

impl CoercivityMode {
    pub fn sampled(gradient_radius: f64) -> CoercivityMode {
        CoercivityMode::Sampled {
            gradient_radius,
            directions: 16,
            radii: 8,
            hessians: Vec::new(),
        }
    }

    pub fn structural(a_prime: Vec<usize>) -> CoercivityMode {
        CoercivityMode::Structural {
            a_prime,
            directions: 64,
        }
    }
}

/// Outcome of a coercivity check.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CoercivityReport {
    pub mode: String,
    pub nu: f64,
    pub passed: bool,
    /// Smallest slack observed; negative values witness failure.
    pub worst_margin: f64,
    pub witness: Option<String>,
}

/// Checks the gradient coercivity `min_b max_a {...} >= nu |p| - C`.
pub fn check_coercivity(
    op: &HjbiOperator,
    nu: f64,
    mode: &CoercivityMode,
    spec: &SampleSpec,
) -> Result<CoercivityReport> {
    if nu <= 0.0 {
        return Err(Error::config("coercivity constant nu must be positive"));
    }
    match mode {
        CoercivityMode::Structural { a_prime, directions } => {
            if a_prime.is_empty() {
                return Err(Error::config(
                    "structural coercivity needs a declared non-empty subset of A",
                ));
            }
            if op.dim > 2 {
                return Err(Error::config(
                    "structural coercivity is implemented for state dimension <= 2",
                ));
            }
            structural_coercivity(op, nu, a_prime, *directions, spec)
        }
        CoercivityMode::Sampled {
            gradient_radius,
            directions,
            radii,
            hessians,
        } => sampled_coercivity(op, nu, *gradient_radius, *directions, *radii, hessians, spec),
    }
}

fn structural_coercivity(
    op: &HjbiOperator,
    nu: f64,
    a_prime: &[usize],
    directions: usize,
    spec: &SampleSpec,
) -> Result<CoercivityReport> {
    for &ai in a_prime {
        if ai >= op.control_a.len() {
            return Err(Error::config(format!(
                "A' index {ai} out of range (|A| = {})",
                op.control_a.len()
            )));
        }
    }
    let grid = &spec.grid;
    let dirs: Vec<Vec<f64>> = if op.dim == 1 {
        vec![vec![1.0], vec![-1.0]]
    } else {
        (0..directions.max(4))
            .map(|k| {
                let th = 2.0 * std::f64::consts::PI * k as f64 / directions.max(4) as f64;
                vec![th.cos(), th.sin()]
            })
            .collect()
    };
    let mut worst = f64::INFINITY;
    let mut witness = None;
    for idx in 0..grid.node_count() {
        let x = grid.coords(idx);
        for beta in &op.control_b.points {
            for &ai in a_prime {
                let alpha = &op.control_a.points[ai];
                let s = op.dispersion(&x, alpha, beta).norm();
                if s > 1e-12 {
                    return Ok(CoercivityReport {
                        mode: "structural".into(),
                        nu,
                        passed: false,
                        worst_margin: -s,
                        witness: Some(format!(
                            "sigma nonzero ({s:.3e}) on A' at x = {x:?}, alpha index {ai}"
                        )),
                    });
                }
            }
            for d in &dirs {
                // support function of conv{f(x, a', beta)} in direction d
                let support = a_prime
                    .iter()
                    .map(|&ai| {
                        let f = op.drift_at(&x, &op.control_a.points[ai], beta);
                        f.iter().zip(d).map(|(fi, di)| fi * di).sum::<f64>()
                    })
                    .fold(f64::NEG_INFINITY, f64::max);
                let margin = support - nu;
                if margin < worst {
                    worst = margin;
                    witness = Some(format!("x = {x:?}, direction = {d:?}"));
                }
            }
        }
    }
    Ok(CoercivityReport {
        mode: "structural".into(),
        nu,
        passed: worst >= -1e-12,
        worst_margin: worst,
        witness,
    })
}

fn sampled_coercivity(
    op: &HjbiOperator,
    nu: f64,
    gradient_radius: f64,
    directions: usize,
    radii: usize,
    hessians: &[DMatrix<f64>],
    spec: &SampleSpec,
) -> Result<CoercivityReport> {
    let grid = &spec.grid;
    let c = op
        .certificate
        .as_ref()
        .map(|c| c.sup_bound)
        .unwrap_or_else(|| op.sampled_sup_cost(grid));
    let dirs: Vec<Vec<f64>> = if op.dim == 1 {
        vec![vec![1.0], vec![-1.0]]
    } else {
        (0..directions.max(4))
            .map(|k| {
                let th = 2.0 * std::f64::consts::PI * k as f64 / directions.max(4) as f64;
                let mut d = vec![0.0; op.dim];
                d[0] = th.cos();
                d[1] = th.sin();
                d
            })
            .collect()
    };
    let default_hessian = DMatrix::zeros(op.dim, op.dim);
    let hessians: Vec<&DMatrix<f64>> = if hessians.is_empty() {
        vec![&default_hessian]
    } else {
        hessians.iter().collect()
    };
    let mut worst = f64::INFINITY;
    let mut witness = None;
    for idx in 0..grid.node_count() {
        let x = grid.coords(idx);
        for d in &dirs {
            for k in 1..=radii {
                let r = gradient_radius * k as f64 / radii as f64;
                let p: Vec<f64> = d.iter().map(|di| di * r).collect();
                for hess in &hessians {
                    let h = op.evaluate_hamiltonian(&x, &p, hess);
                    let margin = h - (nu * r - c);
                    if margin < worst {
                        worst = margin;
                        witness = Some(format!("x = {x:?}, p = {p:?}"));
                    }
                }
            }
        }
    }
    Ok(CoercivityReport {
        mode: "sampled".into(),
        nu,
        passed: worst >= -1e-12,
        worst_margin: worst,
        witness,
    })
}

/// One line of a certificate verification report.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CertificateCheck {
    pub name: String,
    pub passed: bool,
    /// Worst observed value (sup, quotient or eigenvalue depending on check).
    pub observed: f64,
    pub bound: f64,
    pub witness: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CertificateReport {
    pub checks: Vec<CertificateCheck>,
}

impl CertificateReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

/// Verifies the sup bounds, Lipschitz quotients, cost modulus and
/// ellipticity of an operator against a certificate on sampled nodes and
/// node pairs. Lipschitz quotients get a 1.01 slack factor.
pub fn verify_certificate(
    op: &HjbiOperator,
    cert: &RegularityCertificate,
    spec: &SampleSpec,
) -> CertificateReport {
    let grid = &spec.grid;
    let mut checks = Vec::new();

    // sup bounds
    let mut sup_sigma = 0.0f64;
    let mut sup_drift = 0.0f64;
    let mut sup_cost = 0.0f64;
    let mut min_eig = f64::INFINITY;
    let mut eig_witness = String::new();
    for idx in 0..grid.node_count() {
        let x = grid.coords(idx);
        for alpha in &op.control_a.points {
            for beta in &op.control_b.points {
                sup_sigma = sup_sigma.max(op.dispersion(&x, alpha, beta).norm());
                let f = op.drift_at(&x, alpha, beta);
                sup_drift = sup_drift.max(f.iter().map(|v| v * v).sum::<f64>().sqrt());
                sup_cost = sup_cost.max(op.cost_at(&x, alpha, beta).abs());
                let eig = min_eigenvalue(&op.diffusion(&x, alpha, beta));
                if eig < min_eig {
                    min_eig = eig;
                    eig_witness = format!("x = {x:?}");
                }
            }
        }
    }
    for (name, observed) in [
        ("sup bound: dispersion", sup_sigma),
        ("sup bound: drift", sup_drift),
        ("sup bound: cost", sup_cost),
    ] {
        checks.push(CertificateCheck {
            name: name.into(),
            passed: observed <= cert.sup_bound * (1.0 + 1e-12) + 1e-12,
            observed,
            bound: cert.sup_bound,
            witness: None,
        });
    }

    // pair sampling: axis-adjacent pairs plus random pairs
    let mut pairs: Vec<(usize, usize)> = Vec::new();
    for idx in 0..grid.node_count() {
        for axis in 0..grid.dim() {
            pairs.push((idx, grid.shift(idx, axis, 1)));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    for _ in 0..spec.random_pairs {
        let i = rng.gen_range(0..grid.node_count());
        let j = rng.gen_range(0..grid.node_count());
        if i != j {
            pairs.push((i, j));
        }
    }

    let mut worst_sigma = 0.0f64;
    let mut worst_drift = 0.0f64;
    let mut sigma_witness = None;
    let mut drift_witness = None;
    let mut cost_excess = f64::NEG_INFINITY;
    let mut cost_witness = None;
    for &(i, j) in &pairs {
        let xi = grid.coords(i);
        let xj = grid.coords(j);
        let dist = Grid::torus_distance(&xi, &xj);
        if dist == 0.0 {
            continue;
        }
        for alpha in &op.control_a.points {
            for beta in &op.control_b.points {
                let ds = (op.dispersion(&xi, alpha, beta) - op.dispersion(&xj, alpha, beta)).norm();
                let q = ds / dist;
                if q > worst_sigma {
                    worst_sigma = q;
                    sigma_witness = Some(format!("x = {xi:?}, y = {xj:?}"));
                }
                let fi = op.drift_at(&xi, alpha, beta);
                let fj = op.drift_at(&xj, alpha, beta);
                let dfv = fi
                    .iter()
                    .zip(&fj)
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>()
                    .sqrt();
                let q = dfv / dist;
                if q > worst_drift {
                    worst_drift = q;
                    drift_witness = Some(format!("x = {xi:?}, y = {xj:?}"));
                }
                let dl = (op.cost_at(&xi, alpha, beta) - op.cost_at(&xj, alpha, beta)).abs();
                let excess = dl - cert.cost_modulus.eval(dist);
                if excess > cost_excess {
                    cost_excess = excess;
                    cost_witness = Some(format!("x = {xi:?}, y = {xj:?}, |dl| = {dl:.4e}"));
                }
            }
        }
    }
    checks.push(CertificateCheck {
        name: "lipschitz: dispersion".into(),
        passed: worst_sigma <= cert.lip_sigma * 1.01 + 1e-12,
        observed: worst_sigma,
        bound: cert.lip_sigma,
        witness: sigma_witness,
    });
    checks.push(CertificateCheck {
        name: "lipschitz: drift".into(),
        passed: worst_drift <= cert.lip_drift * 1.01 + 1e-12,
        observed: worst_drift,
        bound: cert.lip_drift,
        witness: drift_witness,
    });
    checks.push(CertificateCheck {
        name: "cost modulus".into(),
        passed: cost_excess <= 1e-12,
        observed: cost_excess,
        bound: 0.0,
        witness: cost_witness,
    });
    checks.push(CertificateCheck {
        name: "ellipticity".into(),
        passed: min_eig >= cert.ellipticity - 1e-12,
        observed: min_eig,
        bound: cert.ellipticity,
        witness: Some(eig_witness),
    });
    CertificateReport { checks }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::Rng;

    fn singleton_op(sigma: &[&[&str]], drift: &[&str], cost: &str, dim: usize, p: usize) -> HjbiOperator {
        HjbiOperator::builder(dim, p)
            .sigma(sigma)
            .drift(drift)
            .cost(cost)
            .build()
            .unwrap()
    }

    #[test]
    fn diffusion_identity() {
        let op = singleton_op(&[&["1", "0"], &["0", "1"]], &["0", "0"], "0", 2, 2);
        let a = op.diffusion(&[0.3, 0.4], &[0.0], &[0.0]);
        assert_relative_eq!(a[(0, 0)], 1.0);
        assert_relative_eq!(a[(1, 1)], 1.0);
        assert_relative_eq!(a[(0, 1)], 0.0);
    }

    #[test]
    fn diffusion_rank_one_column() {
        // sigma = (1, 0)^T, n = 2, p = 1 -> a = [[1, 0], [0, 0]]
        let op = singleton_op(&[&["1"], &["0"]], &["0", "0"], "0", 2, 1);
        let a = op.diffusion(&[0.0, 0.0], &[0.0], &[0.0]);
        assert_eq!(a[(0, 0)], 1.0);
        assert_eq!(a[(0, 1)], 0.0);
        assert_eq!(a[(1, 0)], 0.0);
        assert_eq!(a[(1, 1)], 0.0);
    }

    #[test]
    fn diffusion_matches_brute_force_product() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let entries: Vec<f64> = (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let strs: Vec<String> = entries.iter().map(|v| format!("{v}")).collect();
            let op = HjbiOperator::builder(2, 2)
                .sigma(&[&[&strs[0], &strs[1]], &[&strs[2], &strs[3]]])
                .drift(&["0", "0"])
                .cost("0")
                .build()
                .unwrap();
            let a = op.diffusion(&[0.0, 0.0], &[0.0], &[0.0]);
            // independent oracle: direct sum over the shared index
            for i in 0..2 {
                for j in 0..2 {
                    let expect: f64 = (0..2).map(|k| entries[i * 2 + k] * entries[j * 2 + k]).sum();
                    assert_relative_eq!(a[(i, j)], expect, epsilon = 1e-14);
                }
            }
            assert!((a.clone() - a.transpose()).norm() <= 1e-12);
            assert!(min_eigenvalue(&a) >= -1e-12);
        }
    }

    #[test]
    fn hamiltonian_constant_cost() {
        let op = singleton_op(&[&["0"]], &["0"], "0.7", 1, 1);
        let hess = DMatrix::from_element(1, 1, 3.0);
        assert_eq!(op.evaluate_hamiltonian(&[0.1], &[2.0], &hess), 0.7);
    }

    #[test]
    fn hamiltonian_max_alpha_gives_abs() {
        // A = {-1, +1}, f = alpha, sigma = 0, l = 0, X = 0, p = 3 -> 3
        let op = HjbiOperator::builder(1, 1)
            .control_a(vec![vec![-1.0], vec![1.0]])
            .drift(&["a1"])
            .cost("0")
            .build()
            .unwrap();
        let z = DMatrix::zeros(1, 1);
        assert_eq!(op.evaluate_hamiltonian(&[0.0], &[3.0], &z), 3.0);
        assert_eq!(op.evaluate_hamiltonian(&[0.0], &[-3.0], &z), 3.0);
    }

    #[test]
    fn hamiltonian_two_by_two_game() {
        // payoff alpha * beta over {-1, +1}^2; oracle: exhaustive enumeration
        let op = HjbiOperator::builder(1, 1)
            .control_a(vec![vec![-1.0], vec![1.0]])
            .control_b(vec![vec![-1.0], vec![1.0]])
            .cost("a1 * b1")
            .build()
            .unwrap();
        let z = DMatrix::zeros(1, 1);
        let got = op.evaluate_hamiltonian(&[0.0], &[0.0], &z);
        let mut expect = f64::INFINITY;
        for b in [-1.0f64, 1.0] {
            let mut inner = f64::NEG_INFINITY;
            for a in [-1.0f64, 1.0] {
                inner = inner.max(a * b);
            }
            expect = expect.min(inner);
        }
        assert_eq!(got, expect);
        assert_eq!(got, 1.0);
    }

    #[test]
    fn isaacs_ordering_and_monotonicity_in_hessian() {
        let op = HjbiOperator::builder(1, 1)
            .control_a(vec![vec![-1.0], vec![1.0]])
            .control_b(vec![vec![-1.0], vec![1.0]])
            .sigma(&[&["0.5 + 0.25 * a1 * b1"]])
            .drift(&["a1 + 0.5 * b1"])
            .cost("a1 * b1 + cos(2 * pi * x1)")
            .build()
            .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            let x = [rng.gen_range(0.0..1.0)];
            let p = [rng.gen_range(-3.0..3.0)];
            let x2a = rng.gen_range(-2.0..2.0);
            let bump = rng.gen_range(0.0..2.0);
            let hess1 = DMatrix::from_element(1, 1, x2a + bump); // X1 >= X2
            let hess2 = DMatrix::from_element(1, 1, x2a);
            // degenerate ellipticity
            assert!(
                op.evaluate_hamiltonian(&x, &p, &hess1) <= op.evaluate_hamiltonian(&x, &p, &hess2) + 1e-12
            );
            // min-max >= max-min
            let minmax = op.evaluate_hamiltonian(&x, &p, &hess2);
            let mut maxmin = f64::NEG_INFINITY;
            for alpha in &op.control_a.points {
                let mut inner = f64::INFINITY;
                for beta in &op.control_b.points {
                    inner = inner.min(op.linear_value(&x, alpha, beta, &p, &hess2));
                }
                maxmin = maxmin.max(inner);
            }
            assert!(minmax >= maxmin - 1e-12);
        }
    }

    #[test]
    fn cost_shift_moves_hamiltonian_exactly() {
        let base = HjbiOperator::builder(1, 1)
            .control_a(vec![vec![-1.0], vec![1.0]])
            .sigma(&[&["1"]])
            .drift(&["a1"])
            .cost("cos(2 * pi * x1)")
            .build()
            .unwrap();
        let shifted = HjbiOperator::builder(1, 1)
            .control_a(vec![vec![-1.0], vec![1.0]])
            .sigma(&[&["1"]])
            .drift(&["a1"])
            .cost("cos(2 * pi * x1) + 0.35")
            .build()
            .unwrap();
        let hess = DMatrix::from_element(1, 1, -1.2);
        for k in 0..16 {
            let x = [k as f64 / 16.0];
            let p = [(k as f64 - 8.0) / 3.0];
            let d = shifted.evaluate_hamiltonian(&x, &p, &hess) - base.evaluate_hamiltonian(&x, &p, &hess);
            assert!((d - 0.35).abs() <= 1e-12);
        }
    }

    #[test]
    fn distance_identical_and_shift() {
        let grid = Grid::new(&[64]).unwrap();
        let spec = SampleSpec::on_grid(grid);
        let op = singleton_op(&[&["1"]], &["0"], "cos(2*pi*x1)", 1, 1);
        let d = coefficient_distance(&op, &op, &spec).unwrap();
        assert_eq!((d.sigma, d.drift, d.cost), (0.0, 0.0, 0.0));

        let shifted = singleton_op(&[&["1"]], &["0"], "cos(2*pi*x1) + 0.25", 1, 1);
        let d = coefficient_distance(&op, &shifted, &spec).unwrap();
        assert_eq!(d.sigma, 0.0);
        assert_eq!(d.drift, 0.0);
        assert_relative_eq!(d.cost, 0.25, epsilon = 1e-12);
    }

    #[test]
    fn distance_dense_sampling_of_sine_perturbation() {
        let grid = Grid::new(&[256]).unwrap();
        let spec = SampleSpec::on_grid(grid);
        let op1 = singleton_op(&[&["1"]], &["0.5"], "0", 1, 1);
        let op2 = singleton_op(&[&["1"]], &["0.5 + 0.1 * sin(2*pi*x1)"], "0", 1, 1);
        let d = coefficient_distance(&op1, &op2, &spec).unwrap();
        assert!((d.drift - 0.1).abs() <= 1e-6);
    }

    #[test]
    fn distance_rejects_control_mismatch() {
        let grid = Grid::new(&[16]).unwrap();
        let spec = SampleSpec::on_grid(grid);
        let op1 = singleton_op(&[&["1"]], &["0"], "0", 1, 1);
        let op2 = HjbiOperator::builder(1, 1)
            .control_a(vec![vec![-1.0], vec![1.0]])
            .sigma(&[&["1"]])
            .drift(&["0"])
            .cost("0")
            .build()
            .unwrap();
        assert!(coefficient_distance(&op1, &op2, &spec).is_err());
    }

    #[test]
    fn coercivity_structural_one_dimensional() {
        let op = HjbiOperator::builder(1, 1)
            .control_a(vec![vec![-1.0], vec![1.0]])
            .drift(&["a1"])
            .cost("cos(2*pi*x1)")
            .build()
            .unwrap();
        let grid = Grid::new(&[16]).unwrap();
        let spec = SampleSpec::on_grid(grid);
        let ok = check_coercivity(&op, 1.0, &CoercivityMode::structural(vec![0, 1]), &spec).unwrap();
        assert!(ok.passed, "hull [-1,1] contains the unit ball: {ok:?}");
        let too_big = check_coercivity(&op, 1.5, &CoercivityMode::structural(vec![0, 1]), &spec).unwrap();
        assert!(!too_big.passed);
        assert!((too_big.worst_margin + 0.5).abs() < 1e-12);
    }

    #[test]
    fn coercivity_structural_needs_subset() {
        let op = singleton_op(&[&["0"]], &["0"], "0", 1, 1);
        let grid = Grid::new(&[8]).unwrap();
        let spec = SampleSpec::on_grid(grid);
        assert!(check_coercivity(&op, 1.0, &CoercivityMode::structural(vec![]), &spec).is_err());
    }

    #[test]
    fn coercivity_sampled_viscous_example() {
        let op = HjbiOperator::builder(1, 1)
            .control_a(vec![vec![-1.0], vec![1.0]])
            .sigma(&[&["1"]])
            .drift(&["a1"])
            .cost("cos(2*pi*x1)")
            .certificate(RegularityCertificate {
                sup_bound: 1.0,
                lip_sigma: 0.0,
                lip_drift: 0.0,
                cost_modulus: Modulus::Linear {
                    slope: 2.0 * std::f64::consts::PI,
                },
                ellipticity: 1.0,
                hoelder_exponent: 1.0,
                hoelder_seminorm: 1.0,
            })
            .build()
            .unwrap();
        let grid = Grid::new(&[32]).unwrap();
        let spec = SampleSpec::on_grid(grid);
        let rep = check_coercivity(&op, 1.0, &CoercivityMode::sampled(10.0), &spec).unwrap();
        assert!(rep.passed, "{rep:?}");
    }

    #[test]
    fn certificate_constant_coefficients_pass() {
        let op = singleton_op(&[&["1"]], &["0.5"], "0.25", 1, 1);
        let cert = RegularityCertificate {
            sup_bound: 1.0,
            lip_sigma: 0.0,
            lip_drift: 0.0,
            cost_modulus: Modulus::Linear { slope: 0.0 },
            ellipticity: 1.0,
            hoelder_exponent: 1.0,
            hoelder_seminorm: 1.0,
        };
        let grid = Grid::new(&[32]).unwrap();
        let rep = verify_certificate(&op, &cert, &SampleSpec::on_grid(grid));
        assert!(rep.all_passed(), "{rep:?}");
    }

    #[test]
    fn certificate_cosine_cost_modulus() {
        let op = singleton_op(&[&["1"]], &["0"], "cos(2*pi*x1)", 1, 1);
        let grid = Grid::new(&[128]).unwrap();
        let mut cert = RegularityCertificate {
            sup_bound: 1.0,
            lip_sigma: 0.0,
            lip_drift: 0.0,
            cost_modulus: Modulus::Linear {
                slope: 2.0 * std::f64::consts::PI,
            },
            ellipticity: 1.0,
            hoelder_exponent: 1.0,
            hoelder_seminorm: 1.0,
        };
        let rep = verify_certificate(&op, &cert, &SampleSpec::on_grid(grid.clone()));
        assert!(rep.all_passed(), "{rep:?}");

        cert.cost_modulus = Modulus::Linear { slope: 1.0 };
        let rep = verify_certificate(&op, &cert, &SampleSpec::on_grid(grid));
        let modulus_check = rep.checks.iter().find(|c| c.name == "cost modulus").unwrap();
        assert!(!modulus_check.passed);
        assert!(modulus_check.witness.is_some());
    }

    #[test]
    fn certificate_ellipticity_boundary() {
        let op = singleton_op(&[&["1", "0"], &["0", "1"]], &["0", "0"], "0", 2, 2);
        let cert = RegularityCertificate {
            sup_bound: 2.0,
            lip_sigma: 0.0,
            lip_drift: 0.0,
            cost_modulus: Modulus::Linear { slope: 0.0 },
            ellipticity: 1.0001,
            hoelder_exponent: 1.0,
            hoelder_seminorm: 1.0,
        };
        let grid = Grid::new(&[8, 8]).unwrap();
        let rep = verify_certificate(&op, &cert, &SampleSpec::on_grid(grid));
        let eig = rep.checks.iter().find(|c| c.name == "ellipticity").unwrap();
        assert!(!eig.passed);
    }

    proptest! {
        #[test]
        fn distance_triangle_inequality(c1 in -2.0f64..2.0, c2 in -2.0f64..2.0, c3 in -2.0f64..2.0) {
            let grid = Grid::new(&[16]).unwrap();
            let spec = SampleSpec::on_grid(grid);
            let mk = |c: f64| {
                HjbiOperator::builder(1, 1)
                    .sigma(&[&[format!("{c}").as_str()]])
                    .drift(&[format!("{} * sin(2*pi*x1)", c / 2.0).as_str()])
                    .cost(format!("{c} * cos(2*pi*x1)").as_str())
                    .build()
                    .unwrap()
            };
            let (o1, o2, o3) = (mk(c1), mk(c2), mk(c3));
            let d12 = coefficient_distance(&o1, &o2, &spec).unwrap();
            let d23 = coefficient_distance(&o2, &o3, &spec).unwrap();
            let d13 = coefficient_distance(&o1, &o3, &spec).unwrap();
            prop_assert!(d13.sigma <= d12.sigma + d23.sigma + 1e-12);
            prop_assert!(d13.drift <= d12.drift + d23.drift + 1e-12);
            prop_assert!(d13.cost <= d12.cost + d23.cost + 1e-12);
            // vanishes iff coefficients coincide on samples
            let d11 = coefficient_distance(&o1, &o1, &spec).unwrap();
            prop_assert_eq!((d11.sigma, d11.drift, d11.cost), (0.0, 0.0, 0.0));
        }
    }
}
