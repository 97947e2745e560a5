//! Rank-1 directional approximations `u ⊗ v^m` of (1,m)-tensors.
//!
//! The SVD-based variant takes `v` from the STM's dominant right singular
//! vector. The optimal variant maximizes `‖Φ v^m‖²` over the unit sphere with
//! a shifted power iteration on the implicit square of `Φ`:
//!
//! ```text
//! G(x) = Jᵀ c,   c = Φ x^m,   J = Φ x^(m-1)
//! x ← normalize(G(x) + α x)
//! ```

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stt::SttHistory;
use crate::tensor::TensorOneM;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Dstt,
    Odstt,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Rank1Factors {
    pub order: usize,
    pub u: DVector<f64>,
    pub v: DVector<f64>,
    pub method: Method,
    pub epoch: usize,
}

impl Rank1Factors {
    pub fn outer(&self) -> TensorOneM {
        TensorOneM::rank1_outer(&self.u, &self.v, self.order)
    }

    /// `‖Φ − u ⊗ v^m‖_F` computed entrywise.
    pub fn frobenius_error(&self, phi: &TensorOneM) -> Result<f64> {
        Ok(phi.sub(&self.outer())?.frobenius_norm())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EigenResult {
    pub lambda: f64,
    pub vector: DVector<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub restarts_used: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ShiftMode {
    /// Fixed `(2m − 1) ‖Φ‖_F²`.
    Conservative,
    /// Halve after every accepted step, double after an ascent failure.
    Reduced,
    /// Smallest shift that makes the local Hessian of the shifted objective
    /// positive definite, recomputed every step.
    Adaptive,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EigenSettings {
    pub shift_mode: ShiftMode,
    /// Random unit starts, in addition to any caller-supplied ones.
    pub restarts: usize,
    pub tol: f64,
    pub max_iter: usize,
    pub rng_seed: u64,
}

impl Default for EigenSettings {
    fn default() -> Self {
        Self {
            shift_mode: ShiftMode::Adaptive,
            restarts: 20,
            tol: 1e-12,
            max_iter: 5000,
            rng_seed: 1,
        }
    }
}

impl EigenSettings {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0 && self.tol < 1.0) {
            return Err(Error::Config(format!("eigen tol {} outside (0, 1)", self.tol)));
        }
        if self.max_iter == 0 {
            return Err(Error::Config("eigen max_iter must be positive".into()));
        }
        Ok(())
    }
}

const ANGLE_TOL: f64 = 1e-10;
const ADAPTIVE_MARGIN: f64 = 1e-6;

/// Flip `v` so its largest-magnitude entry is positive (first on ties).
pub fn canonical_sign(v: &DVector<f64>) -> DVector<f64> {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if x.abs() > v[best].abs() {
            best = i;
        }
    }
    if !v.is_empty() && v[best] < 0.0 {
        -v
    } else {
        v.clone()
    }
}

fn lex_greater(a: &DVector<f64>, b: &DVector<f64>) -> bool {
    for (x, y) in a.iter().zip(b.iter()) {
        if x != y {
            return x > y;
        }
    }
    false
}

/// `G(x) = Jᵀ Φ x^m` and `λ = ‖Φ x^m‖²`.
pub fn square_apply(phi: &TensorOneM, x: &DVector<f64>) -> Result<(DVector<f64>, f64)> {
    let j = phi.contract_all_but_one_input(x)?;
    // Φ x^m = J x
    let c = &j * x;
    Ok((j.transpose() * &c, c.norm_squared()))
}

/// `∂G/∂x = m JᵀJ + (m − 1) Σ_i c_i Φ_i(·, ·, x^(m−2))`.
pub fn square_jacobian(phi: &TensorOneM, x: &DVector<f64>) -> Result<DMatrix<f64>> {
    let m = phi.order();
    let j = phi.contract_all_but_one_input(x)?;
    let mut h = j.transpose() * &j * m as f64;
    if m >= 2 {
        let c = &j * x;
        let n = phi.n_in();
        let row = phi.row_len();
        let mut t = vec![0.0; row];
        for (i, ci) in c.iter().enumerate() {
            for (d, a) in t.iter_mut().zip(&phi.entries()[i * row..(i + 1) * row]) {
                *d += ci * a;
            }
        }
        for _ in 2..m {
            t = t.chunks_exact(n).map(|ch| ch.iter().zip(x.iter()).map(|(a, b)| a * b).sum()).collect();
        }
        h += DMatrix::from_row_slice(n, n, &t) * (m - 1) as f64;
    }
    Ok(h)
}

/// Conservative shift `(2m − 1) ‖Φ‖_F²`.
pub fn conservative_shift(phi: &TensorOneM) -> f64 {
    let m = phi.order() as f64;
    (2.0 * m - 1.0) * phi.frobenius_norm().powi(2)
}

fn angle_step(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    2.0 * ((a - b).norm() / 2.0).min(1.0).asin()
}

/// Single-start shifted power iteration. Returns the result and the sequence
/// of accepted objective values `λ_k` (starting with the initial point).
pub fn sshopm_trace(
    phi: &TensorOneM,
    x0: &DVector<f64>,
    settings: &EigenSettings,
) -> Result<(EigenResult, Vec<f64>)> {
    if phi.n_in() != x0.len() {
        return Err(Error::Dimension("start vector length differs from tensor input dimension".into()));
    }
    let nrm = x0.norm();
    if !(nrm > 0.0 && nrm.is_finite()) {
        return Err(Error::Solver("start vector is zero or non-finite".into()));
    }
    let alpha_max = conservative_shift(phi);
    let mut alpha = alpha_max;
    let mut x = x0 / nrm;
    let (mut g, mut lambda) = square_apply(phi, &x)?;
    let mut history = vec![lambda];
    let mut converged = alpha_max == 0.0;
    let mut iterations = 0;
    let mut fallback = false;
    while !converged && iterations < settings.max_iter {
        iterations += 1;
        if settings.shift_mode == ShiftMode::Adaptive {
            alpha = if fallback {
                alpha_max
            } else {
                let h = square_jacobian(phi, &x)?;
                let sym = (&h + h.transpose()) * 0.5;
                let lmin = sym.symmetric_eigenvalues().min();
                ((-lmin).max(0.0) + ADAPTIVE_MARGIN * lambda.max(f64::MIN_POSITIVE)).min(alpha_max)
            };
        }
        let y = &g + &x * alpha;
        let ny = y.norm();
        if !(ny > 0.0 && ny.is_finite()) {
            return Err(Error::Solver("power iterate vanished".into()));
        }
        let x_new = y / ny;
        let (g_new, lambda_new) = square_apply(phi, &x_new)?;
        if settings.shift_mode != ShiftMode::Conservative
            && lambda_new < lambda * (1.0 - 4.0 * f64::EPSILON)
            && alpha < alpha_max
        {
            match settings.shift_mode {
                ShiftMode::Reduced => alpha = (alpha * 2.0).min(alpha_max),
                _ => fallback = true,
            }
            continue;
        }
        fallback = false;
        let d_lambda = (lambda_new - lambda).abs();
        let d_angle = angle_step(&x, &x_new);
        x = x_new;
        g = g_new;
        lambda = lambda_new;
        history.push(lambda);
        let scale = settings.tol * lambda.max(1.0);
        if d_lambda < scale && d_angle < ANGLE_TOL && (&g - &x * lambda).norm() <= scale {
            converged = true;
        }
        if settings.shift_mode == ShiftMode::Reduced {
            alpha *= 0.5;
        }
    }
    Ok((
        EigenResult {
            lambda,
            vector: canonical_sign(&x),
            iterations,
            converged,
            restarts_used: 0,
        },
        history,
    ))
}

/// Random unit vectors from normalized standard normal draws.
pub fn random_unit_vectors(n: usize, count: usize, seed: u64) -> Vec<DVector<f64>> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| loop {
            let v = DVector::from_fn(n, |_, _| StandardNormal.sample(&mut rng));
            let nv: f64 = v.norm();
            if nv > 0.0 {
                break v / nv;
            }
        })
        .collect()
}

/// Maximal z-eigenpair of the square of `phi`, over random starts plus
/// `extra_starts`. Largest `λ` wins; near-ties go to the lexicographically
/// largest canonical vector.
pub fn sshopm_squared_with_starts(
    phi: &TensorOneM,
    settings: &EigenSettings,
    extra_starts: &[DVector<f64>],
) -> Result<EigenResult> {
    settings.validate()?;
    let n = phi.n_in();
    if n == 0 {
        return Err(Error::Dimension("empty tensor".into()));
    }
    let mut starts: Vec<DVector<f64>> = extra_starts.iter().filter(|s| s.norm() > 0.0).cloned().collect();
    starts.extend(random_unit_vectors(n, settings.restarts, settings.rng_seed));
    if starts.is_empty() {
        starts.push(DVector::from_element(n, 1.0));
    }
    let mut best: Option<EigenResult> = None;
    let mut total_iter = 0;
    for s in &starts {
        let (r, _) = sshopm_trace(phi, s, settings)?;
        total_iter += r.iterations;
        best = Some(match best {
            None => r,
            Some(b) => {
                let tie = (r.lambda - b.lambda).abs() <= settings.tol * b.lambda.max(1.0);
                if (tie && lex_greater(&r.vector, &b.vector)) || (!tie && r.lambda > b.lambda) {
                    r
                } else {
                    b
                }
            }
        });
    }
    let mut best = best.expect("at least one start");
    best.iterations = total_iter;
    best.restarts_used = starts.len();
    Ok(best)
}

pub fn sshopm_squared(phi: &TensorOneM, settings: &EigenSettings) -> Result<EigenResult> {
    sshopm_squared_with_starts(phi, settings, &[])
}

/// `max_{‖x‖=1} ‖Φ x^m‖`.
pub fn induced_2norm(phi: &TensorOneM, settings: &EigenSettings) -> Result<f64> {
    induced_2norm_with_starts(phi, settings, &[])
}

pub fn induced_2norm_with_starts(
    phi: &TensorOneM,
    settings: &EigenSettings,
    extra_starts: &[DVector<f64>],
) -> Result<f64> {
    Ok(sshopm_squared_with_starts(phi, settings, extra_starts)?.lambda.max(0.0).sqrt())
}

fn factors_from(phi: &TensorOneM, v: DVector<f64>, method: Method, epoch: usize) -> Result<Rank1Factors> {
    let u = phi.contract_full(&v)?;
    Ok(Rank1Factors {
        order: phi.order(),
        u,
        v,
        method,
        epoch,
    })
}

/// Optimal rank-1 factors of a bare tensor.
pub fn odstt_factors(
    phi: &TensorOneM,
    settings: &EigenSettings,
    extra_starts: &[DVector<f64>],
    epoch: usize,
) -> Result<Rank1Factors> {
    let r = sshopm_squared_with_starts(phi, settings, extra_starts)?;
    if !r.converged {
        return Err(Error::Solver(format!(
            "shifted power iteration did not converge in {} iterations per start",
            settings.max_iter
        )));
    }
    factors_from(phi, r.vector, Method::Odstt, epoch)
}

/// Dominant right singular vector of `m`, canonicalized. Tied top singular
/// values resolve to the lexicographically largest candidate.
pub fn dominant_right_singular_vector(m: &DMatrix<f64>) -> Result<DVector<f64>> {
    let svd = m.clone().svd(false, true);
    let vt = svd.v_t.ok_or_else(|| Error::Solver("SVD did not produce V".into()))?;
    let s = &svd.singular_values;
    let top = s.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !top.is_finite() {
        return Err(Error::Solver("non-finite singular values".into()));
    }
    let tol = 1e-12 * top.max(f64::MIN_POSITIVE);
    let mut best: Option<DVector<f64>> = None;
    for (i, &si) in s.iter().enumerate() {
        if top - si <= tol {
            let cand = canonical_sign(&vt.row(i).transpose());
            if best.as_ref().is_none_or(|b| lex_greater(&cand, b)) {
                best = Some(cand);
            }
        }
    }
    Ok(best.expect("nonempty SVD"))
}

/// SVD-based factors at epoch `k`: `v` is the STM's dominant right singular
/// vector, `u = Φ^[m] v^m`.
pub fn build_r1dstt(h: &SttHistory, k: usize, m: usize) -> Result<Rank1Factors> {
    let phi = h.stt_ref(k, m)?;
    let v = dominant_right_singular_vector(&h.stm[k])?;
    factors_from(phi, v, Method::Dstt, k)
}

/// Optimal factors at epoch `k`, seeding the solver with the STM direction
/// in addition to the random starts.
pub fn build_r1odstt(h: &SttHistory, k: usize, m: usize, settings: &EigenSettings) -> Result<Rank1Factors> {
    let phi = h.stt_ref(k, m)?;
    let v = dominant_right_singular_vector(&h.stm[k])?;
    odstt_factors(phi, settings, &[v], k)
}

/// Angle in degrees between two unit directions, folded to `[0, 90]`.
pub fn angle_between(v1: &DVector<f64>, v2: &DVector<f64>) -> f64 {
    let c = v1.dot(v2).abs().min(1.0);
    // asin of the half chord keeps accuracy near 0 and 90 degrees
    let d = (v1 - v2).norm().min((v1 + v2).norm());
    let a = 2.0 * (d / 2.0).min(1.0).asin();
    if c > 0.5 {
        a.to_degrees()
    } else {
        c.acos().to_degrees()
    }
}
