//! Joint integration of a reference trajectory with its first-, second- and
//! third-order state transition tensors, and deterministic perturbation
//! propagation through them.
//!
//! The variational equations are assembled from jet partials of the vector
//! field, so any [`VectorField`] gets STTs without hand-written Jacobians:
//!
//! ```text
//! Φ¹' = A1 Φ¹
//! Φ²' = A1 Φ² + A2 (Φ¹, Φ¹)
//! Φ³' = A1 Φ³ + 3 sym A2 (Φ¹, Φ²) + A3 (Φ¹, Φ¹, Φ¹)
//! ```

use std::fs;
use std::path::Path;

use nalgebra::{DMatrix, DVector};

use crate::dynamics::Model;
use crate::error::{Error, Result};
use crate::integrator::{integrate, IntegratorSettings, Stats};
use crate::jets::{extract_partials, seed, Scalar, TaylorJet};
use crate::rank1::Rank1Factors;
use crate::tensor::TensorOneM;

/// An autonomous vector field that can be evaluated on plain states and jets.
pub trait VectorField: Sync {
    fn dim(&self) -> usize;
    fn rhs<S: Scalar>(&self, x: &[S]) -> Vec<S>;
    fn check_domain(&self, _x: &[f64]) -> Result<()> {
        Ok(())
    }
}

impl VectorField for Model {
    fn dim(&self) -> usize {
        Model::dim(self)
    }
    fn rhs<S: Scalar>(&self, x: &[S]) -> Vec<S> {
        Model::rhs(self, x)
    }
    fn check_domain(&self, x: &[f64]) -> Result<()> {
        Model::check_domain(self, x)
    }
}

/// Reference trajectory samples with their STTs mapping from `times[0]`.
#[derive(Clone, Debug, PartialEq)]
pub struct SttHistory {
    pub times: Vec<f64>,
    pub states: Vec<DVector<f64>>,
    pub stm: Vec<DMatrix<f64>>,
    /// Empty when `order < 2`.
    pub stt2: Vec<TensorOneM>,
    /// Empty when `order < 3`.
    pub stt3: Vec<TensorOneM>,
    pub order: usize,
}

impl SttHistory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.states.first().map_or(0, |s| s.len())
    }

    /// The order-`p` tensor at epoch `k` (the STM for `p = 1`).
    pub fn tensor(&self, k: usize, p: usize) -> Result<TensorOneM> {
        self.check_epoch(k)?;
        match p {
            1 => Ok(TensorOneM::from_matrix(&self.stm[k])),
            2 if self.order >= 2 => Ok(self.stt2[k].clone()),
            3 if self.order >= 3 => Ok(self.stt3[k].clone()),
            _ => Err(Error::Invalid(format!(
                "order {p} requested, history stores up to {}",
                self.order
            ))),
        }
    }

    pub(crate) fn stt_ref(&self, k: usize, p: usize) -> Result<&TensorOneM> {
        self.check_epoch(k)?;
        match p {
            2 if self.order >= 2 => Ok(&self.stt2[k]),
            3 if self.order >= 3 => Ok(&self.stt3[k]),
            _ => Err(Error::Invalid(format!(
                "order {p} requested, history stores up to {}",
                self.order
            ))),
        }
    }

    pub fn check_epoch(&self, k: usize) -> Result<()> {
        if k >= self.len() {
            return Err(Error::Invalid(format!(
                "epoch {k} out of range (history has {})",
                self.len()
            )));
        }
        Ok(())
    }

    /// Write `times.csv` (epoch, time and reference state) and one
    /// `stm_k.csv` / `stt2_k.csv` / `stt3_k.csv` per epoch, `k` 0-based.
    pub fn write_csv_dir(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        let n = self.dim();
        let mut header = vec!["k".to_string(), "t".to_string()];
        header.extend((1..=n).map(|i| format!("x{i}")));
        let mut s = header.join(",");
        s.push('\n');
        for (k, (t, x)) in self.times.iter().zip(&self.states).enumerate() {
            let mut row = vec![k.to_string(), crate::csv::fmt_f64(*t)];
            row.extend(x.iter().map(|v| crate::csv::fmt_f64(*v)));
            s.push_str(&row.join(","));
            s.push('\n');
        }
        fs::write(dir.join("times.csv"), s)?;
        for k in 0..self.len() {
            self.write_epoch_csv(dir, k)?;
        }
        Ok(())
    }

    /// Tensor dumps of a single epoch.
    pub fn write_epoch_csv(&self, dir: &Path, k: usize) -> Result<()> {
        self.check_epoch(k)?;
        fs::create_dir_all(dir)?;
        fs::write(
            dir.join(format!("stm_{k}.csv")),
            TensorOneM::from_matrix(&self.stm[k]).to_csv(),
        )?;
        if self.order >= 2 {
            fs::write(dir.join(format!("stt2_{k}.csv")), self.stt2[k].to_csv())?;
        }
        if self.order >= 3 {
            fs::write(dir.join(format!("stt3_{k}.csv")), self.stt3[k].to_csv())?;
        }
        Ok(())
    }

    /// Inverse of [`write_csv_dir`](Self::write_csv_dir).
    pub fn read_csv_dir(dir: &Path) -> Result<Self> {
        let text = fs::read_to_string(dir.join("times.csv"))?;
        let mut times = Vec::new();
        let mut states = Vec::new();
        for (ln, line) in text.lines().enumerate().skip(1) {
            if line.is_empty() {
                continue;
            }
            let vals = line
                .split(',')
                .skip(1)
                .map(|f| f.parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| Error::Parse(format!("times.csv line {}: {e}", ln + 1)))?;
            times.push(vals[0]);
            states.push(DVector::from_column_slice(&vals[1..]));
        }
        let mut stm = Vec::new();
        let mut stt2 = Vec::new();
        let mut stt3 = Vec::new();
        for k in 0..times.len() {
            stm.push(TensorOneM::from_csv(&fs::read_to_string(dir.join(format!("stm_{k}.csv")))?)?.to_matrix());
            let p2 = dir.join(format!("stt2_{k}.csv"));
            if p2.exists() {
                stt2.push(TensorOneM::from_csv(&fs::read_to_string(p2)?)?);
            }
            let p3 = dir.join(format!("stt3_{k}.csv"));
            if p3.exists() {
                stt3.push(TensorOneM::from_csv(&fs::read_to_string(p3)?)?);
            }
        }
        let order = if !stt3.is_empty() {
            3
        } else if !stt2.is_empty() {
            2
        } else {
            1
        };
        Ok(Self {
            times,
            states,
            stm,
            stt2,
            stt3,
            order,
        })
    }
}

fn flat_len(n: usize, order: usize) -> usize {
    (0..=order).map(|p| n.pow(p as u32 + 1)).sum()
}

/// `Σ_α A1_{iα} T_{α;...}` written into `out` (same layout as `t`).
fn left_mul(a1: &DMatrix<f64>, t: &[f64], row: usize, out: &mut [f64]) {
    let n = a1.nrows();
    for i in 0..n {
        let dst = &mut out[i * row..(i + 1) * row];
        dst.iter_mut().for_each(|v| *v = 0.0);
        for alpha in 0..n {
            let a = a1[(i, alpha)];
            if a == 0.0 {
                continue;
            }
            let src = &t[alpha * row..(alpha + 1) * row];
            for (d, s) in dst.iter_mut().zip(src) {
                *d += a * s;
            }
        }
    }
}

/// Right-hand side of the augmented state `[x, Φ¹, Φ², Φ³]`.
fn variational_rhs<F: VectorField>(
    field: &F,
    order: usize,
    y: &[f64],
    dy: &mut [f64],
) -> Result<()> {
    let n = field.dim();
    let x = &y[..n];
    field.check_domain(x)?;
    let jets = seed(x, order);
    let out: Vec<TaylorJet> = field.rhs(&jets);
    if out.iter().any(|j| !j.is_finite()) {
        return Err(Error::Domain("vector field produced non-finite derivatives".into()));
    }
    for (d, j) in dy[..n].iter_mut().zip(&out) {
        *d = j.value();
    }
    let partials = extract_partials(&out, order)?;
    let a1 = &partials.a1;

    let o1 = n;
    let o2 = o1 + n * n;
    let o3 = o2 + n * n * n;
    let phi1_flat = &y[o1..o2];
    let phi1 = DMatrix::from_row_slice(n, n, phi1_flat);
    left_mul(a1, phi1_flat, n, &mut dy[o1..o2]);

    if order >= 2 {
        let a2 = partials.a2.as_ref().expect("order >= 2 jets carry A2");
        let phi1_t = phi1.transpose();
        let phi2 = &y[o2..o3];
        left_mul(a1, phi2, n * n, &mut dy[o2..o3]);
        let quad = a2.change_basis(&phi1_t)?;
        for (d, q) in dy[o2..o3].iter_mut().zip(quad.entries()) {
            *d += q;
        }

        if order >= 3 {
            let o4 = o3 + n.pow(4);
            let a3 = partials.a3.as_ref().expect("order 3 jets carry A3");
            let phi3 = &y[o3..o4];
            left_mul(a1, phi3, n * n * n, &mut dy[o3..o4]);
            let cubic = a3.change_basis(&phi1_t)?;
            for (d, c) in dy[o3..o4].iter_mut().zip(cubic.entries()) {
                *d += c;
            }
            // W_{i;aβ} = Σ_α A2_{i;αβ} Φ¹_{αa}
            let mut w = vec![0.0; n * n * n];
            for i in 0..n {
                for alpha in 0..n {
                    for beta in 0..n {
                        let a = a2.get(i, &[alpha, beta]);
                        if a == 0.0 {
                            continue;
                        }
                        for aa in 0..n {
                            w[(i * n + aa) * n + beta] += a * phi1[(alpha, aa)];
                        }
                    }
                }
            }
            // X_{i;abc} = Σ_β W_{i;aβ} Φ²_{β;bc}, added in its three slot
            // rotations.
            let nn = n * n;
            let mut xt = vec![0.0; n.pow(4)];
            for i in 0..n {
                for aa in 0..n {
                    let dst = &mut xt[(i * n + aa) * nn..(i * n + aa + 1) * nn];
                    for beta in 0..n {
                        let wv = w[(i * n + aa) * n + beta];
                        if wv == 0.0 {
                            continue;
                        }
                        for (d, p) in dst.iter_mut().zip(&phi2[beta * nn..(beta + 1) * nn]) {
                            *d += wv * p;
                        }
                    }
                }
            }
            let d3 = &mut dy[o3..o4];
            for i in 0..n {
                for a in 0..n {
                    for b in 0..n {
                        for c in 0..n {
                            let at = |p: usize, q: usize, r: usize| xt[((i * n + p) * n + q) * n + r];
                            d3[((i * n + a) * n + b) * n + c] += at(a, b, c) + at(b, a, c) + at(c, a, b);
                        }
                    }
                }
            }
        }
    }
    Ok(())
}

/// Integrate the reference state and its STTs up to `order` over `grid`
/// (first entry is the initial epoch).
pub fn integrate_stts<F: VectorField>(
    field: &F,
    x0: &DVector<f64>,
    grid: &[f64],
    order: usize,
    settings: &IntegratorSettings,
) -> Result<(SttHistory, Stats)> {
    if !(1..=3).contains(&order) {
        return Err(Error::Invalid(format!("STT order {order} outside 1..=3")));
    }
    let n = field.dim();
    if x0.len() != n {
        return Err(Error::Dimension(format!(
            "initial state has {} components, model expects {n}",
            x0.len()
        )));
    }
    field.check_domain(x0.as_slice())?;
    let mut y0 = vec![0.0; flat_len(n, order)];
    y0[..n].copy_from_slice(x0.as_slice());
    for i in 0..n {
        y0[n + i * n + i] = 1.0;
    }
    let (ys, stats) = integrate(
        |_, y, dy| variational_rhs(field, order, y, dy),
        &y0,
        grid,
        settings,
    )?;

    let o1 = n;
    let o2 = o1 + n * n;
    let o3 = o2 + n * n * n;
    let o4 = o3 + n.pow(4);
    let mut hist = SttHistory {
        times: grid.to_vec(),
        states: Vec::with_capacity(ys.len()),
        stm: Vec::with_capacity(ys.len()),
        stt2: Vec::new(),
        stt3: Vec::new(),
        order,
    };
    for y in ys {
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::Integration("non-finite STT entries".into()));
        }
        hist.states.push(DVector::from_column_slice(&y[..n]));
        hist.stm.push(DMatrix::from_row_slice(n, n, &y[o1..o2]));
        if order >= 2 {
            hist.stt2.push(TensorOneM::from_entries(n, 2, y[o2..o3].to_vec())?);
        }
        if order >= 3 {
            hist.stt3.push(TensorOneM::from_entries(n, 3, y[o3..o4].to_vec())?);
        }
    }
    Ok((hist, stats))
}

/// Plain trajectory integration (no variational equations).
pub fn integrate_state<F: VectorField>(
    field: &F,
    x0: &DVector<f64>,
    grid: &[f64],
    settings: &IntegratorSettings,
) -> Result<Vec<DVector<f64>>> {
    field.check_domain(x0.as_slice())?;
    let (ys, _) = integrate(
        |_, y, dy| {
            field.check_domain(y)?;
            let f = field.rhs(y);
            dy.copy_from_slice(&f);
            Ok(())
        },
        x0.as_slice(),
        grid,
        settings,
    )?;
    Ok(ys.into_iter().map(DVector::from_vec).collect())
}

const INV_FACTORIAL: [f64; 4] = [1.0, 1.0, 0.5, 1.0 / 6.0];

/// `δx(t_k) = Σ_{p=1..M} Φ^[p] δx₀^p / p!`.
pub fn propagate_perturbation_stt(
    h: &SttHistory,
    k: usize,
    dx0: &DVector<f64>,
    order: usize,
) -> Result<DVector<f64>> {
    h.check_epoch(k)?;
    if order == 0 || order > h.order {
        return Err(Error::Invalid(format!(
            "expansion order {order} not available (history stores up to {})",
            h.order
        )));
    }
    if dx0.len() != h.dim() {
        return Err(Error::Dimension("perturbation length differs from state dimension".into()));
    }
    let mut dx = &h.stm[k] * dx0;
    for p in 2..=order {
        dx += h.stt_ref(k, p)?.contract_full(dx0)? * INV_FACTORIAL[p];
    }
    Ok(dx)
}

/// Full STM plus rank-1 higher-order terms:
/// `δx = Φ¹ δx₀ + u² (v²·δx₀)² / 2 + u³ (v³·δx₀)³ / 6`.
pub fn propagate_perturbation_r1(
    h: &SttHistory,
    k: usize,
    dx0: &DVector<f64>,
    factors2: &Rank1Factors,
    factors3: Option<&Rank1Factors>,
) -> Result<DVector<f64>> {
    h.check_epoch(k)?;
    if dx0.len() != h.dim() {
        return Err(Error::Dimension("perturbation length differs from state dimension".into()));
    }
    let mut dx = &h.stm[k] * dx0;
    for f in std::iter::once(factors2).chain(factors3) {
        if f.epoch != k {
            return Err(Error::Invalid(format!(
                "factors built at epoch {} used at epoch {k}",
                f.epoch
            )));
        }
        let y = f.v.dot(dx0);
        dx += &f.u * (y.powi(f.order as i32) * INV_FACTORIAL[f.order]);
    }
    Ok(dx)
}
