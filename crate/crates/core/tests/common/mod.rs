#![allow(dead_code)]

use std::path::PathBuf;

use dstt_kit::config::ScenarioConfig;
use dstt_kit::stt::SttHistory;
use dstt_kit::TensorOneM;
use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

pub fn config_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("configs").join(format!("{name}.json"))
}

pub fn load(name: &str) -> ScenarioConfig {
    ScenarioConfig::from_path(&config_path(name)).unwrap()
}

pub fn rng(seed: u64) -> ChaCha20Rng {
    ChaCha20Rng::seed_from_u64(seed)
}

pub fn normal(rng: &mut ChaCha20Rng) -> f64 {
    StandardNormal.sample(rng)
}

/// Input-symmetric tensor with N(0,1) entries before symmetrization.
pub fn random_symmetric(n: usize, m: usize, rng: &mut ChaCha20Rng) -> TensorOneM {
    let data = (0..n * n.pow(m as u32)).map(|_| normal(rng)).collect();
    TensorOneM::from_entries(n, m, data).unwrap()
}

/// Fibonacci lattice on the unit 2-sphere.
pub fn sphere_points(count: usize) -> impl Iterator<Item = DVector<f64>> {
    let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
    (0..count).map(move |i| {
        let z = 1.0 - 2.0 * (i as f64 + 0.5) / count as f64;
        let r = (1.0 - z * z).sqrt();
        let t = golden * i as f64;
        DVector::from_vec(vec![r * t.cos(), r * t.sin(), z])
    })
}

/// `max ‖Φ x^m‖²` over the lattice.
pub fn grid_max(phi: &TensorOneM, count: usize) -> f64 {
    sphere_points(count)
        .map(|x| phi.contract_full(&x).unwrap().norm_squared())
        .fold(0.0, f64::max)
}

/// Brute-force `Σ Φ_{i;j..} x_j ..` over explicit index loops.
pub fn contract_loop(phi: &TensorOneM, x: &DVector<f64>) -> DVector<f64> {
    let n = phi.n_in();
    let m = phi.order();
    let mut out = DVector::zeros(phi.n_out());
    for i in 0..phi.n_out() {
        for flat in 0..n.pow(m as u32) {
            let mut idx = vec![0; m];
            let mut r = flat;
            for d in (0..m).rev() {
                idx[d] = r % n;
                r /= n;
            }
            out[i] += phi.get(i, &idx) * idx.iter().map(|&j| x[j]).product::<f64>();
        }
    }
    out
}

/// Sample moments of the truncated series map `Σ Φ^[p] x^p / p!` at epoch
/// `k` for `x ~ N(0, P)`, with per-entry standard errors.
pub struct McMoments {
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
    pub mean_se: DVector<f64>,
    pub cov_se: DMatrix<f64>,
}

pub fn mc_truncated_moments(
    h: &SttHistory,
    k: usize,
    p: &DMatrix<f64>,
    order: usize,
    samples: usize,
    seed: u64,
    center: &DVector<f64>,
) -> McMoments {
    let n = p.nrows();
    let l = p.clone().cholesky().expect("positive definite covariance").l();
    let chunks = 64;
    let per = samples / chunks;
    assert_eq!(per * chunks, samples);
    // sums of y, (y−c), (y−c)(y−c)ᵀ and its square, y²
    let partial: Vec<[Vec<f64>; 4]> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut r = ChaCha20Rng::seed_from_u64(seed);
            r.set_stream(c as u64);
            let mut s1 = vec![0.0; n];
            let mut s2 = vec![0.0; n];
            let mut z1 = vec![0.0; n * n];
            let mut z2 = vec![0.0; n * n];
            for _ in 0..per {
                let x = &l * DVector::from_fn(n, |_, _| normal(&mut r));
                let mut y = &h.stm[k] * &x;
                if order >= 2 {
                    y += h.stt2[k].contract_full(&x).unwrap() * 0.5;
                }
                if order >= 3 {
                    y += h.stt3[k].contract_full(&x).unwrap() / 6.0;
                }
                let d = y - center;
                for i in 0..n {
                    s1[i] += d[i];
                    s2[i] += d[i] * d[i];
                    for j in 0..n {
                        let z = d[i] * d[j];
                        z1[i * n + j] += z;
                        z2[i * n + j] += z * z;
                    }
                }
            }
            [s1, s2, z1, z2]
        })
        .collect();
    let mut tot = [vec![0.0; n], vec![0.0; n], vec![0.0; n * n], vec![0.0; n * n]];
    for part in &partial {
        for (t, s) in tot.iter_mut().zip(part) {
            for (a, b) in t.iter_mut().zip(s) {
                *a += b;
            }
        }
    }
    let nf = samples as f64;
    let dm = DVector::from_fn(n, |i, _| tot[0][i] / nf);
    let mean_se = DVector::from_fn(n, |i, _| ((tot[1][i] / nf - dm[i] * dm[i]) / nf).sqrt());
    let cov = DMatrix::from_fn(n, n, |i, j| tot[2][i * n + j] / nf - dm[i] * dm[j]);
    let cov_se = DMatrix::from_fn(n, n, |i, j| {
        let m1 = tot[2][i * n + j] / nf;
        ((tot[3][i * n + j] / nf - m1 * m1) / nf).sqrt()
    });
    McMoments {
        mean: center + dm,
        cov,
        mean_se,
        cov_se,
    }
}

/// Largest `|a − b| / se` over entries, skipping entries with zero spread.
pub fn max_se_ratio(a: &[f64], b: &[f64], se: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .zip(se)
        .filter(|(_, s)| **s > 0.0)
        .map(|((x, y), s)| (x - y).abs() / s)
        .fold(0.0, f64::max)
}
