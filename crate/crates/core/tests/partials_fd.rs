mod common;

use dstt_kit::dynamics::{AerocaptureParams, Cr3bpParams, Model, TwoBodyParams};
use dstt_kit::jets::{extract_partials, seed, TaylorJet};
use rand::Rng;

/// Mixed central difference of order `idx.len()` built by composing
/// first-order central differences, Richardson-extrapolated once.
fn mixed_fd(f: &dyn Fn(&[f64]) -> Vec<f64>, x: &[f64], idx: &[usize], h: f64) -> Vec<f64> {
    let raw = |h: f64| {
        let k = idx.len();
        let mut acc = vec![0.0; x.len()];
        for signs in 0..(1 << k) {
            let mut p = x.to_vec();
            let mut sgn = 1.0;
            for (b, &j) in idx.iter().enumerate() {
                if signs >> b & 1 == 1 {
                    p[j] -= h;
                    sgn = -sgn;
                } else {
                    p[j] += h;
                }
            }
            for (a, v) in acc.iter_mut().zip(f(&p)) {
                *a += sgn * v;
            }
        }
        let d = (2.0 * h).powi(k as i32);
        acc.into_iter().map(|a| a / d).collect::<Vec<_>>()
    };
    let a = raw(h);
    let b = raw(h / 2.0);
    a.iter().zip(&b).map(|(a, b)| (4.0 * b - a) / 3.0).collect()
}

/// Full order-`k` derivative array (outputs slowest) at the step whose
/// estimate agrees best with the next smaller one.
fn fd_tensor(f: &dyn Fn(&[f64]) -> Vec<f64>, x: &[f64], k: usize) -> Vec<f64> {
    let n = x.len();
    let build = |h: f64| {
        let mut out = vec![0.0; n * n.pow(k as u32)];
        let row = n.pow(k as u32);
        for flat in 0..row {
            let mut idx = vec![0; k];
            let mut r = flat;
            for d in (0..k).rev() {
                idx[d] = r % n;
                r /= n;
            }
            for (i, v) in mixed_fd(f, x, &idx, h).into_iter().enumerate() {
                out[i * row + flat] = v;
            }
        }
        out
    };
    let steps: Vec<f64> = (0..9).map(|e| 0.2 * 0.5f64.powi(e)).collect();
    let ests: Vec<Vec<f64>> = steps.iter().map(|&h| build(h)).collect();
    let mut best = (f64::INFINITY, 0);
    for i in 0..ests.len() - 1 {
        let d = ests[i].iter().zip(&ests[i + 1]).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        if d < best.0 {
            best = (d, i + 1);
        }
    }
    ests[best.1].clone()
}

fn max_rel(a: &[f64], b: &[f64]) -> f64 {
    let scale = a.iter().map(|v| v.abs()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max) / scale
}

fn check(model: &Model, x: &[f64]) {
    let jets: Vec<TaylorJet> = model.rhs(&seed(x, 3));
    let p = extract_partials(&jets, 3).unwrap();
    let f = |y: &[f64]| model.rhs(y);
    let a1: Vec<f64> = p.a1.transpose().iter().cloned().collect();
    let e1 = max_rel(&a1, &fd_tensor(&f, x, 1));
    let e2 = max_rel(p.a2.as_ref().unwrap().entries(), &fd_tensor(&f, x, 2));
    let e3 = max_rel(p.a3.as_ref().unwrap().entries(), &fd_tensor(&f, x, 3));
    assert!(e1 < 1e-8, "{} A1 rel err {e1:e} at {x:?}", model.name());
    assert!(e2 < 1e-6, "{} A2 rel err {e2:e} at {x:?}", model.name());
    assert!(e3 < 1e-4, "{} A3 rel err {e3:e} at {x:?}", model.name());
    assert!(p.a2.as_ref().unwrap().symmetry_defect() == 0.0);
    assert!(p.a3.as_ref().unwrap().symmetry_defect() == 0.0);
}

#[test]
fn two_body_partials_match_finite_differences() {
    let model = Model::two_body(TwoBodyParams { mu: 398600.4418 }, 6378.137).unwrap();
    check(&model, &[7000.0 / 6378.137, 0.0, 0.0, 0.1, 0.9, -0.2]);
    let mut rng = common::rng(11);
    for _ in 0..3 {
        let x: Vec<f64> = (0..6)
            .map(|i| if i < 3 { rng.random_range(0.6..1.5) } else { rng.random_range(-1.0..1.0) })
            .collect();
        check(&model, &x);
    }
}

#[test]
fn cr3bp_partials_match_finite_differences() {
    let model = Model::cr3bp(Cr3bpParams { mu_star: 0.012150581180523735 }).unwrap();
    check(&model, &[1.022022, 0.0, -0.182097, 0.0, -0.103256, 0.0]);
    let mut rng = common::rng(12);
    for _ in 0..3 {
        let x = [
            rng.random_range(0.3..0.7),
            rng.random_range(-0.5..0.5),
            rng.random_range(-0.3..0.3),
            rng.random_range(-0.5..0.5),
            rng.random_range(-0.5..0.5),
            rng.random_range(-0.5..0.5),
        ];
        check(&model, &x);
    }
}

#[test]
fn aerocapture_partials_match_finite_differences() {
    let model = Model::aerocapture(AerocaptureParams::uranus()).unwrap();
    let mut rng = common::rng(13);
    for _ in 0..3 {
        let x = [
            rng.random_range(1.005..1.04),
            rng.random_range(2.0..4.0),
            rng.random_range(-0.5..0.5),
            rng.random_range(1.2..1.7),
            rng.random_range(-0.2..0.2),
            rng.random_range(0.3..1.2),
            rng.random_range(-16.0..-12.0),
        ];
        check(&model, &x);
    }
}
