mod common;

use dstt_kit::moments::{
    gaussian_moment_tensors, propagate_moments_r1, propagate_moments_stt, propagate_moments_stt_with, GaussianState,
    InitialMoments,
};
use dstt_kit::rank1::{build_r1dstt, Rank1Factors};
use dstt_kit::stt::{integrate_stts, SttHistory};
use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;

fn aero_history() -> (SttHistory, DMatrix<f64>) {
    let cfg = common::load("uranus_aerocapture");
    let model = cfg.build_model().unwrap();
    let (h, _) = integrate_stts(&model, &cfg.initial_state().unwrap(), &cfg.grid().unwrap(), 3, &cfg.integrator).unwrap();
    (h, cfg.initial_covariance().unwrap().unwrap())
}

#[test]
fn fourth_moments_match_sampling() {
    let p = DMatrix::from_row_slice(2, 2, &[1.3, -0.4, -0.4, 0.7]);
    let e4 = gaussian_moment_tensors(&p, 4).unwrap();
    let l = p.clone().cholesky().unwrap().l();
    let samples = 10_000_000usize;
    let chunks = 50;
    let sums: Vec<(Vec<f64>, Vec<f64>)> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = ChaCha20Rng::seed_from_u64(5);
            rng.set_stream(c);
            let mut s = vec![0.0; 16];
            let mut s2 = vec![0.0; 16];
            for _ in 0..samples / chunks as usize {
                let x = &l * DVector::from_fn(2, |_, _| common::normal(&mut rng));
                for f in 0..16 {
                    let v = x[f >> 3 & 1] * x[f >> 2 & 1] * x[f >> 1 & 1] * x[f & 1];
                    s[f] += v;
                    s2[f] += v * v;
                }
            }
            (s, s2)
        })
        .collect();
    let nf = samples as f64;
    for f in 0..16 {
        let m1: f64 = sums.iter().map(|s| s.0[f]).sum::<f64>() / nf;
        let m2: f64 = sums.iter().map(|s| s.1[f]).sum::<f64>() / nf;
        let se = ((m2 - m1 * m1) / nf).sqrt();
        assert!((m1 - e4.data[f]).abs() < 3.0 * se, "entry {f}: {m1} vs {}", e4.data[f]);
    }
}

fn substitute_rank1(h: &SttHistory, k: usize) -> (SttHistory, [Rank1Factors; 2]) {
    let f2 = build_r1dstt(h, k, 2).unwrap();
    let f3 = build_r1dstt(h, k, 3).unwrap();
    let mut exact = h.clone();
    exact.stt2[k] = f2.outer();
    exact.stt3[k] = f3.outer();
    (exact, [f2, f3])
}

#[test]
fn rank1_substitution_matches_full_machinery_every_epoch() {
    let (h, p0) = aero_history();
    let g0 = GaussianState::zero_mean(p0).unwrap();
    let init3 = InitialMoments::new(&g0, 3).unwrap();
    let init2 = InitialMoments::new(&g0, 2).unwrap();
    let mut worst: f64 = 0.0;
    for k in 0..h.len() {
        let (exact, [f2, f3]) = substitute_rank1(&h, k);
        for (init, f3) in [(&init3, Some(&f3)), (&init2, None)] {
            let full = propagate_moments_stt_with(&exact, k, init).unwrap();
            let r1 = propagate_moments_r1(&exact, k, &g0, &f2, f3).unwrap();
            let cov_rel = (&full.cov - &r1.cov).norm() / full.cov.norm();
            let mean_rel = (&full.dmean - &r1.dmean).norm() / full.dmean.norm().max(f64::MIN_POSITIVE);
            worst = worst.max(cov_rel).max(if k == 0 { 0.0 } else { mean_rel });
        }
    }
    assert!(worst < 1e-12, "{worst:e}");
}

#[test]
fn isotropic_mean_magnitude() {
    let (h, _) = aero_history();
    let sigma2 = 5e-7;
    let g0 = GaussianState::zero_mean(DMatrix::identity(7, 7) * sigma2).unwrap();
    for k in [50, 250, 449] {
        let f2 = build_r1dstt(&h, k, 2).unwrap();
        let r1 = propagate_moments_r1(&h, k, &g0, &f2, None).unwrap();
        let want = 0.5 * f2.u.norm() * sigma2;
        assert!((r1.dmean.norm() - want).abs() < 1e-14 * want.max(1.0));
    }
}

#[test]
fn truncated_map_moments_match_sampling() {
    let (h, _) = aero_history();
    let p0 = DMatrix::identity(7, 7) * 5e-7;
    let g0 = GaussianState::zero_mean(p0.clone()).unwrap();
    let k = 260;
    let want = propagate_moments_stt(&h, k, &g0, 3).unwrap();
    let mc = common::mc_truncated_moments(&h, k, &p0, 3, 1_000_000, 9, &want.dmean);
    let rm = common::max_se_ratio(want.dmean.as_slice(), mc.mean.as_slice(), mc.mean_se.as_slice());
    let rc = common::max_se_ratio(want.cov.as_slice(), mc.cov.as_slice(), mc.cov_se.as_slice());
    assert!(rm < 3.0 && rc < 3.0, "mean {rm:.2} SE, cov {rc:.2} SE");
}

#[test]
fn order_one_is_linear_transport() {
    let (h, p0) = aero_history();
    let g0 = GaussianState::zero_mean(p0.clone()).unwrap();
    let k = 300;
    let out = propagate_moments_stt(&h, k, &g0, 1).unwrap();
    let lin = &h.stm[k] * &p0 * h.stm[k].transpose();
    assert!((&out.cov - &lin).norm() <= 1e-15 * lin.norm());
    assert_eq!(out.dmean.norm(), 0.0);
    // zero higher-order factors reduce the rank-1 path to the same transport
    let zero = Rank1Factors {
        u: DVector::zeros(7),
        ..build_r1dstt(&h, k, 2).unwrap()
    };
    let zero3 = Rank1Factors { order: 3, ..zero.clone() };
    let r1 = propagate_moments_r1(&h, k, &g0, &zero, Some(&zero3)).unwrap();
    assert!((&r1.cov - &lin).norm() <= 1e-15 * lin.norm());
}
