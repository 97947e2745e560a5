//! Gaussian mean and covariance propagation through full STTs and through
//! rank-1 factors, for zero initial mean.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::rank1::Rank1Factors;
use crate::stt::SttHistory;

#[derive(Clone, Debug, PartialEq)]
pub struct GaussianState {
    pub dmean: DVector<f64>,
    pub cov: DMatrix<f64>,
}

impl GaussianState {
    pub fn zero_mean(cov: DMatrix<f64>) -> Result<Self> {
        let g = Self {
            dmean: DVector::zeros(cov.nrows()),
            cov,
        };
        g.validate()?;
        Ok(g)
    }

    pub fn dim(&self) -> usize {
        self.dmean.len()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.dmean.len();
        if self.cov.nrows() != n || self.cov.ncols() != n {
            return Err(Error::Dimension("covariance shape differs from mean length".into()));
        }
        if self.cov.iter().chain(self.dmean.iter()).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("Gaussian state".into()));
        }
        let scale = self.cov.amax();
        if (&self.cov - self.cov.transpose()).amax() > 1e-14 * scale {
            return Err(Error::Invalid("covariance is not symmetric".into()));
        }
        if self.min_eigenvalue() < -1e-14 * self.cov.trace().abs() {
            return Err(Error::Invalid("covariance is not positive semidefinite".into()));
        }
        Ok(())
    }

    /// Smallest eigenvalue of the symmetric part; negative values flag a
    /// truncated-series covariance that lost definiteness.
    pub fn min_eigenvalue(&self) -> f64 {
        if self.cov.is_empty() {
            return 0.0;
        }
        let sym = (&self.cov + self.cov.transpose()) * 0.5;
        sym.symmetric_eigenvalues().min()
    }

    fn require_zero_mean(&self) -> Result<()> {
        if self.dmean.iter().any(|&v| v != 0.0) {
            return Err(Error::Invalid("nonzero initial mean is not supported".into()));
        }
        Ok(())
    }
}

/// Dense symmetric moment tensor `E[δx_γ1 .. δx_γp]`, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct MomentTensor {
    pub n: usize,
    pub order: usize,
    pub data: Vec<f64>,
}

/// All perfect matchings of `0..2k`, as index pairs.
fn pairings(len: usize) -> Vec<Vec<(usize, usize)>> {
    if len == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for partner in 1..len {
        let rest: Vec<usize> = (1..len).filter(|&i| i != partner).collect();
        for sub in pairings(len - 2) {
            let mut p = vec![(0, partner)];
            p.extend(sub.iter().map(|&(a, b)| (rest[a], rest[b])));
            out.push(p);
        }
    }
    out
}

/// Zero-mean Gaussian moments of the given order by Isserlis pairing sums.
/// Odd orders give the zero tensor.
pub fn gaussian_moment_tensors(p: &DMatrix<f64>, order: usize) -> Result<MomentTensor> {
    let n = p.nrows();
    if p.ncols() != n {
        return Err(Error::Dimension("covariance must be square".into()));
    }
    if order > 6 {
        return Err(Error::Invalid(format!("moment order {order} above 6")));
    }
    let size = n.pow(order as u32);
    let mut data = vec![0.0; size];
    if order % 2 == 1 {
        return Ok(MomentTensor { n, order, data });
    }
    let pairs = pairings(order);
    let mut idx = vec![0usize; order];
    for (flat, slot) in data.iter_mut().enumerate() {
        let mut r = flat;
        for d in (0..order).rev() {
            idx[d] = r % n;
            r /= n;
        }
        *slot = pairs
            .iter()
            .map(|pr| pr.iter().map(|&(a, b)| p[(idx[a], idx[b])]).product::<f64>())
            .sum();
    }
    Ok(MomentTensor { n, order, data })
}

/// Initial moment tensors up to order `2M`, reusable across epochs.
#[derive(Clone, Debug)]
pub struct InitialMoments {
    order: usize,
    tensors: Vec<MomentTensor>,
}

impl InitialMoments {
    pub fn new(g0: &GaussianState, order: usize) -> Result<Self> {
        g0.validate()?;
        g0.require_zero_mean()?;
        if !(1..=3).contains(&order) {
            return Err(Error::Invalid(format!("expansion order {order} outside 1..=3")));
        }
        let tensors = (0..=2 * order)
            .map(|q| gaussian_moment_tensors(&g0.cov, q))
            .collect::<Result<_>>()?;
        Ok(Self { order, tensors })
    }
}

const INV_FACTORIAL: [f64; 4] = [1.0, 1.0, 0.5, 1.0 / 6.0];

fn flat_matrix(h: &SttHistory, k: usize, p: usize) -> Result<DMatrix<f64>> {
    let n = h.dim();
    Ok(match p {
        1 => h.stm[k].clone(),
        _ => DMatrix::from_row_slice(n, n.pow(p as u32), h.stt_ref(k, p)?.entries()),
    })
}

/// Mean and covariance of the order-`M` truncated series at epoch `k`.
pub fn propagate_moments_stt(h: &SttHistory, k: usize, g0: &GaussianState, order: usize) -> Result<GaussianState> {
    let init = InitialMoments::new(g0, order)?;
    propagate_moments_stt_with(h, k, &init)
}

pub fn propagate_moments_stt_with(h: &SttHistory, k: usize, init: &InitialMoments) -> Result<GaussianState> {
    h.check_epoch(k)?;
    let order = init.order;
    if order > h.order {
        return Err(Error::Invalid(format!(
            "expansion order {order} not available (history stores up to {})",
            h.order
        )));
    }
    let n = h.dim();
    if init.tensors[2].n != n {
        return Err(Error::Dimension("covariance dimension differs from state dimension".into()));
    }
    let phis = (1..=order).map(|p| flat_matrix(h, k, p)).collect::<Result<Vec<_>>>()?;

    let mut mean = DVector::zeros(n);
    for p in 1..=order {
        let e = DVector::from_column_slice(&init.tensors[p].data);
        mean += &phis[p - 1] * e * INV_FACTORIAL[p];
    }
    let mut cov = DMatrix::zeros(n, n);
    for p in 1..=order {
        for q in 1..=order {
            if (p + q) % 2 == 1 {
                continue;
            }
            let e = DMatrix::from_row_slice(n.pow(p as u32), n.pow(q as u32), &init.tensors[p + q].data);
            cov += &phis[p - 1] * e * phis[q - 1].transpose() * (INV_FACTORIAL[p] * INV_FACTORIAL[q]);
        }
    }
    cov -= &mean * mean.transpose();
    let cov = (&cov + cov.transpose()) * 0.5;
    Ok(GaussianState { dmean: mean, cov })
}

/// `sqrt(vᵀ P v)`.
pub fn sigma_projection(p: &DMatrix<f64>, v: &DVector<f64>) -> f64 {
    (v.transpose() * p * v)[(0, 0)].max(0.0).sqrt()
}

/// Mean and covariance with the full STM and rank-1 higher-order terms;
/// omitting `f3` gives the second-order result.
pub fn propagate_moments_r1(
    h: &SttHistory,
    k: usize,
    g0: &GaussianState,
    f2: &Rank1Factors,
    f3: Option<&Rank1Factors>,
) -> Result<GaussianState> {
    h.check_epoch(k)?;
    g0.validate()?;
    g0.require_zero_mean()?;
    for f in std::iter::once(f2).chain(f3) {
        if f.epoch != k {
            return Err(Error::Invalid(format!(
                "factors built at epoch {} used at epoch {k}",
                f.epoch
            )));
        }
    }
    let p0 = &g0.cov;
    let phi1 = &h.stm[k];
    let s2 = sigma_projection(p0, &f2.v).powi(2);
    let mean = &f2.u * (0.5 * s2);
    let mut cov = phi1 * p0 * phi1.transpose() + &f2.u * f2.u.transpose() * (0.5 * s2 * s2);
    if let Some(f3) = f3 {
        let s3 = sigma_projection(p0, &f3.v).powi(2);
        let w = phi1 * p0 * &f3.v;
        let cross = &w * f3.u.transpose();
        cov += (&cross + cross.transpose()) * (0.5 * s3);
        cov += &f3.u * f3.u.transpose() * (5.0 / 12.0 * s3 * s3 * s3);
    }
    let cov = (&cov + cov.transpose()) * 0.5;
    Ok(GaussianState { dmean: mean, cov })
}

/// `‖P_stt − P_r1‖_F / ‖P_stt‖_F`.
pub fn covariance_error_metric(p_stt: &DMatrix<f64>, p_r1: &DMatrix<f64>) -> Result<f64> {
    if p_stt.shape() != p_r1.shape() {
        return Err(Error::Dimension("covariance shapes differ".into()));
    }
    let den = p_stt.norm();
    if den == 0.0 {
        return Err(Error::Invalid("reference covariance has zero norm".into()));
    }
    Ok((p_stt - p_r1).norm() / den)
}
