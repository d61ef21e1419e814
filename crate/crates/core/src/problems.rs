//! Convex test objectives with analytic gradients and minimizer oracles.
//!
//! Three families:
//!
//! * `quadratic`: `e(w) = 1/2 w^T A w - b^T w`, the same for every `t`.
//! * `logistic`: `e(w) = (1/n) sum_k ln(1 + exp(-y_k x_k^T w)) + mu/2 |w|^2`,
//!   the same for every `t`.
//! * `noisy-quadratic`: `e_t(w) = 1/2 (w - c_t)^T A (w - c_t)` with
//!   `c_t = c + noise_scale * xi_t`, `xi_t` standard normal drawn from the
//!   sub-stream `t` of the problem seed. This is the online setting.
//!
//! Generated quadratics use `A = B^T B / n + mu I` with `B` an `n x d`
//! standard normal matrix, which is positive semidefinite by construction.
//!
//! # Problem spec files
//!
//! A problem is described by a small TOML document:
//!
//! ```toml
//! kind = "noisy-quadratic"   # quadratic | logistic | noisy-quadratic
//! d = 10
//! seed = 1
//! n_samples = 20             # rows of B, or logistic samples
//! mu = 0.1                   # ridge term added to A, or l2 weight for logistic
//! noise_scale = 1.0          # noisy-quadratic only
//! ```
//!
//! Defaults: `n_samples = 2 d`, `mu = 1e-4`, `noise_scale = 1`, `seed = 0`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{derive_seed, seeded_rng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProblemKind {
    Quadratic,
    Logistic,
    NoisyQuadratic,
}

impl ProblemKind {
    pub fn name(&self) -> &'static str {
        match self {
            ProblemKind::Quadratic => "quadratic",
            ProblemKind::Logistic => "logistic",
            ProblemKind::NoisyQuadratic => "noisy-quadratic",
        }
    }
}

fn default_mu() -> f64 {
    1e-4
}

fn default_noise() -> f64 {
    1.0
}

/// Parsed problem spec file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSpec {
    pub kind: ProblemKind,
    pub d: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub n_samples: Option<usize>,
    #[serde(default = "default_mu")]
    pub mu: f64,
    #[serde(default = "default_noise")]
    pub noise_scale: f64,
}

impl ProblemSpec {
    pub fn parse(text: &str) -> Result<Self> {
        let spec: ProblemSpec = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        spec.check()?;
        Ok(spec)
    }

    pub fn samples(&self) -> usize {
        self.n_samples.unwrap_or(2 * self.d)
    }

    fn check(&self) -> Result<()> {
        if self.d == 0 {
            return Err(Error::InvalidProblem("d must be positive".into()));
        }
        if !(self.mu >= 0.0 && self.mu.is_finite()) {
            return Err(Error::InvalidProblem(format!("mu = {} must be >= 0", self.mu)));
        }
        if !(self.noise_scale >= 0.0 && self.noise_scale.is_finite()) {
            return Err(Error::InvalidProblem(format!(
                "noise_scale = {} must be >= 0",
                self.noise_scale
            )));
        }
        if self.kind == ProblemKind::Logistic && self.samples() == 0 {
            return Err(Error::InvalidProblem("logistic needs n_samples >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
enum ProblemData {
    Quadratic {
        a: DMatrix<f64>,
        b: DVector<f64>,
    },
    Logistic {
        /// one sample per row
        x: DMatrix<f64>,
        y: DVector<f64>,
        mu: f64,
    },
    NoisyQuadratic {
        a: DMatrix<f64>,
        center: DVector<f64>,
        noise_scale: f64,
        seed: u64,
    },
}

/// A convex differentiable objective sequence `e_1, e_2, ...`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvexProblem {
    d: usize,
    data: ProblemData,
}

fn check_psd(a: &DMatrix<f64>) -> Result<()> {
    if !a.is_square() {
        return Err(Error::InvalidProblem("A must be square".into()));
    }
    let scale = a.amax().max(1.0);
    if (a - a.transpose()).amax() > 1e-12 * scale {
        return Err(Error::InvalidProblem("A must be symmetric".into()));
    }
    let min_eig = a.clone().symmetric_eigenvalues().min();
    if min_eig < -1e-12 * scale {
        return Err(Error::InvalidProblem(format!(
            "A must be positive semidefinite (min eigenvalue {min_eig})"
        )));
    }
    Ok(())
}

fn gram(b: &DMatrix<f64>, mu: f64, d: usize) -> DMatrix<f64> {
    let n = b.nrows();
    let mut a = if n == 0 {
        DMatrix::zeros(d, d)
    } else {
        b.transpose() * b / n as f64
    };
    for i in 0..d {
        a[(i, i)] += mu;
    }
    // exact symmetry
    let at = a.transpose();
    (a + at) * 0.5
}

fn normal_matrix(rng: &mut crate::rng::SeededRng, rows: usize, cols: usize) -> DMatrix<f64> {
    // row-major fill so the stream order is independent of storage order
    let mut m = DMatrix::zeros(rows, cols);
    for r in 0..rows {
        for c in 0..cols {
            m[(r, c)] = rng.standard_normal();
        }
    }
    m
}

fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

impl ConvexProblem {
    /// `e(w) = 1/2 w^T A w - b^T w` with `A` symmetric PSD.
    pub fn quadratic(a: DMatrix<f64>, b: DVector<f64>) -> Result<Self> {
        check_psd(&a)?;
        if b.len() != a.nrows() {
            return Err(Error::LengthMismatch {
                expected: a.nrows(),
                got: b.len(),
            });
        }
        Ok(Self {
            d: b.len(),
            data: ProblemData::Quadratic { a, b },
        })
    }

    /// Mean logistic loss over rows of `x` plus `mu/2 |w|^2`. Labels must be `+1` or `-1`.
    pub fn logistic(x: DMatrix<f64>, y: Vec<f64>, mu: f64) -> Result<Self> {
        if x.nrows() == 0 || x.ncols() == 0 {
            return Err(Error::InvalidProblem(
                "logistic needs at least one sample and feature".into(),
            ));
        }
        if y.len() != x.nrows() {
            return Err(Error::LengthMismatch {
                expected: x.nrows(),
                got: y.len(),
            });
        }
        if let Some(bad) = y.iter().find(|&&l| l != 1.0 && l != -1.0) {
            return Err(Error::InvalidProblem(format!("label {bad} is not +1 or -1")));
        }
        if !(mu >= 0.0 && mu.is_finite()) {
            return Err(Error::InvalidProblem(format!("mu = {mu} must be >= 0")));
        }
        Ok(Self {
            d: x.ncols(),
            data: ProblemData::Logistic {
                x,
                y: DVector::from_vec(y),
                mu,
            },
        })
    }

    /// `e_t(w) = 1/2 (w - c_t)^T A (w - c_t)`, `c_t = center + noise_scale * xi_t`.
    pub fn noisy_quadratic(a: DMatrix<f64>, center: DVector<f64>, noise_scale: f64, seed: u64) -> Result<Self> {
        check_psd(&a)?;
        if center.len() != a.nrows() {
            return Err(Error::LengthMismatch {
                expected: a.nrows(),
                got: center.len(),
            });
        }
        Ok(Self {
            d: center.len(),
            data: ProblemData::NoisyQuadratic {
                a,
                center,
                noise_scale,
                seed,
            },
        })
    }

    /// Synthetic logistic data: standard normal features, a true weight
    /// vector drawn once, labels sampled from the logistic model.
    pub fn synthetic_logistic(seed: u64, n: usize, d: usize, mu: f64) -> Result<Self> {
        let mut rng = seeded_rng(derive_seed(seed, 0));
        let w_true: Vec<f64> = (0..d).map(|_| rng.standard_normal()).collect();
        let x = normal_matrix(&mut rng, n, d);
        let y = (0..n)
            .map(|k| {
                let z: f64 = (0..d).map(|j| x[(k, j)] * w_true[j]).sum();
                if rng.bernoulli(sigmoid(z)) {
                    1.0
                } else {
                    -1.0
                }
            })
            .collect();
        Self::logistic(x, y, mu)
    }

    pub fn from_spec(spec: &ProblemSpec) -> Result<Self> {
        spec.check()?;
        let d = spec.d;
        let n = spec.samples();
        match spec.kind {
            ProblemKind::Logistic => Self::synthetic_logistic(spec.seed, n, d, spec.mu),
            ProblemKind::Quadratic => {
                let mut rng = seeded_rng(derive_seed(spec.seed, 0));
                let b_factor = normal_matrix(&mut rng, n, d);
                let b = DVector::from_iterator(d, (0..d).map(|_| rng.standard_normal()));
                Self::quadratic(gram(&b_factor, spec.mu, d), b)
            }
            ProblemKind::NoisyQuadratic => {
                let mut rng = seeded_rng(derive_seed(spec.seed, 0));
                let b_factor = normal_matrix(&mut rng, n, d);
                let center = DVector::from_iterator(d, (0..d).map(|_| rng.standard_normal()));
                Self::noisy_quadratic(gram(&b_factor, spec.mu, d), center, spec.noise_scale, spec.seed)
            }
        }
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn kind(&self) -> ProblemKind {
        match self.data {
            ProblemData::Quadratic { .. } => ProblemKind::Quadratic,
            ProblemData::Logistic { .. } => ProblemKind::Logistic,
            ProblemData::NoisyQuadratic { .. } => ProblemKind::NoisyQuadratic,
        }
    }

    /// Whether `e_t` is the same function for every `t`.
    pub fn is_batch(&self) -> bool {
        !matches!(self.data, ProblemData::NoisyQuadratic { .. })
    }

    /// The noisy center `c_t`; `None` for batch problems.
    pub fn center_at(&self, t: usize) -> Option<DVector<f64>> {
        match &self.data {
            ProblemData::NoisyQuadratic {
                center,
                noise_scale,
                seed,
                ..
            } => {
                let mut rng = seeded_rng(derive_seed(*seed, t as u64));
                Some(DVector::from_iterator(
                    self.d,
                    center.iter().map(|c| c + noise_scale * rng.standard_normal()),
                ))
            }
            _ => None,
        }
    }

    /// `(e_t(w), grad e_t(w))`.
    pub fn evaluate(&self, w: &[f64], t: usize) -> Result<(f64, Vec<f64>)> {
        if w.len() != self.d {
            return Err(Error::LengthMismatch {
                expected: self.d,
                got: w.len(),
            });
        }
        if let Some(index) = w.iter().position(|x| !x.is_finite()) {
            return Err(Error::NonFinite { what: "weight", index });
        }
        let wv = DVector::from_column_slice(w);
        match &self.data {
            ProblemData::Quadratic { a, b } => {
                let aw = a * &wv;
                let value = 0.5 * wv.dot(&aw) - b.dot(&wv);
                Ok((value, (aw - b).as_slice().to_vec()))
            }
            ProblemData::NoisyQuadratic { a, .. } => {
                let c = self.center_at(t).expect("noisy problem has centers");
                let r = wv - c;
                let ar = a * &r;
                Ok((0.5 * r.dot(&ar), ar.as_slice().to_vec()))
            }
            ProblemData::Logistic { x, y, mu } => {
                let n = x.nrows() as f64;
                let margins = (x * &wv).component_mul(y);
                let mut value = 0.0;
                let mut coef = DVector::zeros(x.nrows());
                for k in 0..x.nrows() {
                    value += softplus(-margins[k]);
                    coef[k] = -y[k] * sigmoid(-margins[k]) / n;
                }
                value = value / n + 0.5 * mu * wv.norm_squared();
                let grad = x.transpose() * coef + &wv * *mu;
                Ok((value, grad.as_slice().to_vec()))
            }
        }
    }

    pub fn value(&self, w: &[f64], t: usize) -> Result<f64> {
        self.evaluate(w, t).map(|(v, _)| v)
    }

    fn logistic_hessian(x: &DMatrix<f64>, y: &DVector<f64>, mu: f64, w: &DVector<f64>) -> DMatrix<f64> {
        let n = x.nrows() as f64;
        let margins = (x * w).component_mul(y);
        let weights = DVector::from_iterator(x.nrows(), margins.iter().map(|&m| sigmoid(m) * sigmoid(-m) / n));
        let mut weighted = x.clone();
        for (k, mut row) in weighted.row_iter_mut().enumerate() {
            row *= weights[k];
        }
        let mut h = x.transpose() * weighted;
        for i in 0..h.nrows() {
            h[(i, i)] += mu;
        }
        h
    }
}

/// `(e_t(w), grad e_t(w))` for `p`.
pub fn evaluate(p: &ConvexProblem, w: &[f64], t: usize) -> Result<(f64, Vec<f64>)> {
    p.evaluate(w, t)
}

/// Minimizer of `sum_{t=1}^T e_t` over all of R^d.
#[derive(Debug, Clone, PartialEq)]
pub struct Minimizer {
    pub w: Vec<f64>,
    /// The `T` the sum ran over.
    pub horizon: usize,
    /// `|grad sum_t e_t(w)|_2` at the returned point.
    pub residual: f64,
    /// `1e-10 * max(1, sum_t |grad e_t(0)|_2)`
    pub tolerance: f64,
}

pub const STATIONARITY_RTOL: f64 = 1e-10;

/// Gradient of `sum_{t=1}^T e_t` at `w` and `sum_t |grad e_t(w)|`.
pub fn summed_gradient(p: &ConvexProblem, w: &[f64], horizon: usize) -> Result<(Vec<f64>, f64)> {
    if p.is_batch() {
        let (_, g) = p.evaluate(w, 1)?;
        let norm = g.iter().map(|x| x * x).sum::<f64>().sqrt();
        return Ok((g.iter().map(|x| x * horizon as f64).collect(), norm * horizon as f64));
    }
    let mut total = vec![0.0; p.dim()];
    let mut norm_sum = 0.0;
    for t in 1..=horizon {
        let (_, g) = p.evaluate(w, t)?;
        norm_sum += g.iter().map(|x| x * x).sum::<f64>().sqrt();
        for (acc, x) in total.iter_mut().zip(&g) {
            *acc += x;
        }
    }
    Ok((total, norm_sum))
}

fn solve_spd(h: &DMatrix<f64>, rhs: &DVector<f64>) -> Result<DVector<f64>> {
    let chol = h.clone().cholesky().ok_or(Error::UnboundedMinimizer)?;
    let mut x = chol.solve(rhs);
    // one round of iterative refinement
    let r = rhs - h * &x;
    x += chol.solve(&r);
    Ok(x)
}

/// Computes `argmin_w sum_{t=1}^T e_t(w)`.
///
/// Quadratic families are solved in closed form; logistic by damped Newton
/// from the origin. Returns [`Error::UnboundedMinimizer`] when the minimum
/// is not attained and [`Error::NotStationary`] if the returned point fails
/// the stationarity tolerance.
pub fn minimizer_oracle(p: &ConvexProblem, horizon: usize) -> Result<Minimizer> {
    if horizon == 0 {
        return Err(Error::InvalidParams("horizon T must be at least 1".into()));
    }
    let d = p.dim();
    let origin = vec![0.0; d];
    let (_, start_norm_sum) = summed_gradient(p, &origin, horizon)?;
    let tolerance = STATIONARITY_RTOL * start_norm_sum.max(1.0);

    let w = match &p.data {
        ProblemData::Quadratic { a, b } => solve_spd(a, b)?,
        ProblemData::NoisyQuadratic { a, .. } => {
            // sum_t A (w - c_t) = 0  <=>  T A w = A sum_t c_t
            let mut c_sum = DVector::zeros(d);
            for t in 1..=horizon {
                c_sum += p.center_at(t).expect("noisy problem has centers");
            }
            let h = a * horizon as f64;
            solve_spd(&h, &(a * c_sum))?
        }
        ProblemData::Logistic { x, y, mu } => logistic_newton(p, x, y, *mu, tolerance / horizon as f64)?,
    };
    let w = w.as_slice().to_vec();
    let (g, _) = summed_gradient(p, &w, horizon)?;
    let residual = g.iter().map(|x| x * x).sum::<f64>().sqrt();
    if residual > tolerance {
        return Err(Error::NotStationary { residual, tolerance });
    }
    Ok(Minimizer {
        w,
        horizon,
        residual,
        tolerance,
    })
}

const NEWTON_MAX_ITER: usize = 200;

fn logistic_newton(
    p: &ConvexProblem,
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    mu: f64,
    grad_tol: f64,
) -> Result<DVector<f64>> {
    let d = p.dim();
    let mut w = DVector::zeros(d);
    let (mut value, g) = p.evaluate(w.as_slice(), 1)?;
    let mut g = DVector::from_vec(g);
    for _ in 0..NEWTON_MAX_ITER {
        if g.norm() <= grad_tol {
            return Ok(w);
        }
        if mu == 0.0 {
            // Every margin positive: scaling w up lowers the loss forever.
            let margins = (x * &w).component_mul(y);
            if margins.iter().all(|&m| m > 0.0) {
                return Err(Error::UnboundedMinimizer);
            }
        }
        let h = ConvexProblem::logistic_hessian(x, y, mu, &w);
        let dir = match h.cholesky() {
            Some(c) => -c.solve(&g),
            None => return Err(Error::UnboundedMinimizer),
        };
        let slope = g.dot(&dir);
        let mut step = 1.0;
        let mut accepted = false;
        for _ in 0..60 {
            let cand = &w + &dir * step;
            let (v, gc) = p.evaluate(cand.as_slice(), 1)?;
            if v <= value + 1e-4 * step * slope || (v <= value && step < 1e-8) {
                w = cand;
                value = v;
                g = DVector::from_vec(gc);
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            // Line search stalls only at rounding level; take the full step.
            w += &dir;
            let (v, gc) = p.evaluate(w.as_slice(), 1)?;
            value = v;
            g = DVector::from_vec(gc);
        }
        if w.norm() > 1e8 {
            return Err(Error::UnboundedMinimizer);
        }
    }
    if g.norm() <= grad_tol {
        Ok(w)
    } else if mu == 0.0 {
        Err(Error::UnboundedMinimizer)
    } else {
        Err(Error::NotStationary {
            residual: g.norm(),
            tolerance: grad_tol,
        })
    }
}

/// `f(y) - f(x) - grad f(x)^T (y - x)` for `f = e_t`; nonnegative for convex `f`.
pub fn convexity_gap(p: &ConvexProblem, x: &[f64], y: &[f64], t: usize) -> Result<f64> {
    let (fx, gx) = p.evaluate(x, t)?;
    let fy = p.value(y, t)?;
    let lin: f64 = gx.iter().zip(y.iter().zip(x)).map(|(g, (yi, xi))| g * (yi - xi)).sum();
    Ok(fy - fx - lin)
}
