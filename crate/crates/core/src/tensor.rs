//! Dense (1,m)-tensors: one output index followed by `m` input indices that
//! are symmetric under permutation.
//!
//! Storage is row-major with the output index slowest, so entry
//! `(i; j1, .., jm)` lives at `i * n_in^m + j1 * n_in^(m-1) + .. + jm`.
//! A tensor with `m = 1` is an ordinary `n_out x n_in` matrix.

use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};

use crate::csv::fmt_f64;
use crate::error::{Error, Result};

/// Highest input order supported.
pub const MAX_ORDER: usize = 3;

#[derive(Clone, Debug, PartialEq)]
pub struct TensorOneM {
    n_out: usize,
    n_in: usize,
    order: usize,
    data: Vec<f64>,
}

impl TensorOneM {
    /// Zero tensor with `n` outputs, `n` inputs per slot and `order` input slots.
    pub fn zeros(n: usize, order: usize) -> Self {
        Self::zeros_rect(n, n, order)
    }

    pub fn zeros_rect(n_out: usize, n_in: usize, order: usize) -> Self {
        assert!(
            (1..=MAX_ORDER).contains(&order),
            "input order {order} outside 1..={MAX_ORDER}"
        );
        Self {
            n_out,
            n_in,
            order,
            data: vec![0.0; n_out * n_in.pow(order as u32)],
        }
    }

    /// Wrap raw entries in the documented layout. Entries are symmetrized over
    /// the input slots and must be finite.
    pub fn from_entries(n: usize, order: usize, data: Vec<f64>) -> Result<Self> {
        Self::from_entries_rect(n, n, order, data).map(|t| t.symmetrized())
    }

    /// Like [`from_entries`](Self::from_entries) without symmetrizing. Used for
    /// tensors that are already symmetric by construction.
    pub fn from_entries_rect(
        n_out: usize,
        n_in: usize,
        order: usize,
        data: Vec<f64>,
    ) -> Result<Self> {
        if !(1..=MAX_ORDER).contains(&order) {
            return Err(Error::Dimension(format!(
                "input order {order} outside 1..={MAX_ORDER}"
            )));
        }
        let expected = n_out * n_in.pow(order as u32);
        if data.len() != expected {
            return Err(Error::Dimension(format!(
                "expected {expected} entries for ({n_out}; {n_in}^{order}), got {}",
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("tensor entries".into()));
        }
        Ok(Self {
            n_out,
            n_in,
            order,
            data,
        })
    }

    pub fn from_matrix(m: &DMatrix<f64>) -> Self {
        let (rows, cols) = m.shape();
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(m[(i, j)]);
            }
        }
        Self {
            n_out: rows,
            n_in: cols,
            order: 1,
            data,
        }
    }

    pub fn n_out(&self) -> usize {
        self.n_out
    }

    pub fn n_in(&self) -> usize {
        self.n_in
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn entries(&self) -> &[f64] {
        &self.data
    }

    pub fn entries_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_entries(self) -> Vec<f64> {
        self.data
    }

    /// Number of entries spanned by one output row.
    pub fn row_len(&self) -> usize {
        self.n_in.pow(self.order as u32)
    }

    pub fn offset(&self, i: usize, inputs: &[usize]) -> usize {
        debug_assert_eq!(inputs.len(), self.order);
        inputs
            .iter()
            .fold(i, |acc, &j| acc * self.n_in + j)
    }

    pub fn get(&self, i: usize, inputs: &[usize]) -> f64 {
        self.data[self.offset(i, inputs)]
    }

    pub fn set(&mut self, i: usize, inputs: &[usize], value: f64) {
        let k = self.offset(i, inputs);
        self.data[k] = value;
    }

    /// Input multi-index of flat position `flat` within one output row.
    pub fn input_index(&self, mut flat: usize) -> [usize; MAX_ORDER] {
        let mut idx = [0; MAX_ORDER];
        for slot in (0..self.order).rev() {
            idx[slot] = flat % self.n_in;
            flat /= self.n_in;
        }
        idx
    }

    fn same_shape(&self, other: &Self) -> Result<()> {
        if (self.n_out, self.n_in, self.order) != (other.n_out, other.n_in, other.order) {
            return Err(Error::Dimension(format!(
                "tensor shapes differ: ({}; {}^{}) vs ({}; {}^{})",
                self.n_out, self.n_in, self.order, other.n_out, other.n_in, other.order
            )));
        }
        Ok(())
    }

    pub fn frobenius_inner(&self, other: &Self) -> Result<f64> {
        self.same_shape(other)?;
        Ok(self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a * b)
            .sum())
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|a| a * a).sum::<f64>().sqrt()
    }

    /// `u ⊗ v ⊗ .. ⊗ v` with `order` copies of `v`.
    pub fn rank1_outer(u: &DVector<f64>, v: &DVector<f64>, order: usize) -> Self {
        let mut t = Self::zeros_rect(u.len(), v.len(), order);
        let row = t.row_len();
        for flat in 0..row {
            let mut idx = t.input_index(flat);
            idx[..order].sort_unstable();
            let w: f64 = idx[..order].iter().map(|&j| v[j]).product();
            for i in 0..u.len() {
                t.data[i * row + flat] = u[i] * w;
            }
        }
        t
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.same_shape(other)?;
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect();
        Ok(Self { data, ..*self })
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            data: self.data.iter().map(|a| a * factor).collect(),
            ..*self
        }
    }

    /// Contract the last input slot with `x`, lowering the order by one.
    /// Returns the reduced entries as a flat buffer.
    fn contract_last(data: &[f64], n_in: usize, x: &[f64]) -> Vec<f64> {
        data.chunks_exact(n_in)
            .map(|c| c.iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }

    fn check_input(&self, x: &DVector<f64>) -> Result<()> {
        if x.len() != self.n_in {
            return Err(Error::Dimension(format!(
                "input vector has length {}, tensor expects {}",
                x.len(),
                self.n_in
            )));
        }
        Ok(())
    }

    /// `Φ x^m`: all input slots contracted with `x`.
    pub fn contract_full(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        self.check_input(x)?;
        let mut buf = Self::contract_last(&self.data, self.n_in, x.as_slice());
        for _ in 1..self.order {
            buf = Self::contract_last(&buf, self.n_in, x.as_slice());
        }
        Ok(DVector::from_vec(buf))
    }

    /// `M_{ij} = Φ_{i; j, x, .., x}`; for `m = 1` this is the matrix itself.
    pub fn contract_all_but_one_input(&self, x: &DVector<f64>) -> Result<DMatrix<f64>> {
        self.check_input(x)?;
        let mut buf = self.data.clone();
        for _ in 1..self.order {
            buf = Self::contract_last(&buf, self.n_in, x.as_slice());
        }
        Ok(DMatrix::from_row_slice(self.n_out, self.n_in, &buf))
    }

    /// Apply `basis` (k x n_in) to every input slot.
    pub fn change_basis(&self, basis: &DMatrix<f64>) -> Result<Self> {
        if basis.ncols() != self.n_in {
            return Err(Error::Dimension(format!(
                "basis has {} columns, tensor input dimension is {}",
                basis.ncols(),
                self.n_in
            )));
        }
        let k = basis.nrows();
        // Transform slot by slot; after `s` slots the leading `s` inputs have
        // dimension k and the trailing ones n_in.
        let mut cur = self.data.clone();
        for slot in 0..self.order {
            let lead = self.n_out * k.pow(slot as u32);
            let trail = self.n_in.pow((self.order - slot - 1) as u32);
            let mut next = vec![0.0; lead * k * trail];
            for a in 0..lead {
                for g in 0..k {
                    for kappa in 0..self.n_in {
                        let r = basis[(g, kappa)];
                        if r == 0.0 {
                            continue;
                        }
                        let src = (a * self.n_in + kappa) * trail;
                        let dst = (a * k + g) * trail;
                        for t in 0..trail {
                            next[dst + t] += r * cur[src + t];
                        }
                    }
                }
            }
            cur = next;
        }
        Ok(Self {
            n_out: self.n_out,
            n_in: k,
            order: self.order,
            data: cur,
        })
    }

    /// Average over all permutations of the input slots.
    pub fn symmetrized(&self) -> Self {
        if self.order == 1 {
            return self.clone();
        }
        let perms = permutations(self.order);
        let row = self.row_len();
        let mut out = self.clone();
        for i in 0..self.n_out {
            for flat in 0..row {
                let mut idx = self.input_index(flat);
                idx[..self.order].sort_unstable();
                let mut acc = 0.0;
                for p in &perms {
                    let mut permuted = [0; MAX_ORDER];
                    for (s, &ps) in p.iter().enumerate() {
                        permuted[s] = idx[ps];
                    }
                    acc += self.get(i, &permuted[..self.order]);
                }
                out.data[i * row + flat] = acc / perms.len() as f64;
            }
        }
        out
    }

    /// Largest absolute difference between an entry and any input permutation
    /// of it.
    pub fn symmetry_defect(&self) -> f64 {
        if self.order == 1 {
            return 0.0;
        }
        let perms = permutations(self.order);
        let row = self.row_len();
        let mut worst = 0.0_f64;
        for i in 0..self.n_out {
            for flat in 0..row {
                let idx = self.input_index(flat);
                let base = self.data[i * row + flat];
                for p in &perms {
                    let mut permuted = [0; MAX_ORDER];
                    for (s, &ps) in p.iter().enumerate() {
                        permuted[s] = idx[ps];
                    }
                    worst = worst.max((self.get(i, &permuted[..self.order]) - base).abs());
                }
            }
        }
        worst
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Matrix view for `m = 1`.
    pub fn to_matrix(&self) -> DMatrix<f64> {
        assert_eq!(self.order, 1, "to_matrix needs an order-1 tensor");
        DMatrix::from_row_slice(self.n_out, self.n_in, &self.data)
    }

    /// Flat CSV dump: header then one `i,j1..jm,value` row per entry, 1-based
    /// indices, 17 significant digits.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("i");
        for slot in 1..=self.order {
            let _ = write!(s, ",j{slot}");
        }
        s.push_str(",value\n");
        let row = self.row_len();
        for i in 0..self.n_out {
            for flat in 0..row {
                let idx = self.input_index(flat);
                let _ = write!(s, "{}", i + 1);
                for j in &idx[..self.order] {
                    let _ = write!(s, ",{}", j + 1);
                }
                let _ = writeln!(s, ",{}", fmt_f64(self.data[i * row + flat]));
            }
        }
        s
    }

    /// Parse the format written by [`to_csv`](Self::to_csv).
    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::Parse("empty tensor csv".into()))?;
        let order = header.split(',').count().saturating_sub(2);
        let mut rows: Vec<(Vec<usize>, f64)> = Vec::new();
        for (ln, line) in lines.enumerate() {
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != order + 2 {
                return Err(Error::Parse(format!("line {}: wrong field count", ln + 2)));
            }
            let idx = fields[..=order]
                .iter()
                .map(|f| f.trim().parse::<usize>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| Error::Parse(format!("line {}: {e}", ln + 2)))?;
            if idx.contains(&0) {
                return Err(Error::Parse(format!("line {}: indices are 1-based", ln + 2)));
            }
            let value = fields[order + 1]
                .trim()
                .parse::<f64>()
                .map_err(|e| Error::Parse(format!("line {}: {e}", ln + 2)))?;
            rows.push((idx, value));
        }
        let n_out = rows.iter().map(|(i, _)| i[0]).max().unwrap_or(0);
        let n_in = rows
            .iter()
            .flat_map(|(i, _)| i[1..].iter().copied())
            .max()
            .unwrap_or(0);
        let mut t = Self::zeros_rect(n_out, n_in, order);
        if rows.len() != t.data.len() {
            return Err(Error::Parse(format!(
                "expected {} rows, found {}",
                t.data.len(),
                rows.len()
            )));
        }
        for (idx, value) in rows {
            let inputs: Vec<usize> = idx[1..].iter().map(|j| j - 1).collect();
            t.set(idx[0] - 1, &inputs, value);
        }
        Ok(t)
    }
}

/// All permutations of `0..k` for `k <= 6`, in lexicographic order.
pub(crate) fn permutations(k: usize) -> Vec<Vec<usize>> {
    fn rec(prefix: &mut Vec<usize>, used: &mut [bool], out: &mut Vec<Vec<usize>>) {
        if prefix.len() == used.len() {
            out.push(prefix.clone());
            return;
        }
        for i in 0..used.len() {
            if !used[i] {
                used[i] = true;
                prefix.push(i);
                rec(prefix, used, out);
                prefix.pop();
                used[i] = false;
            }
        }
    }
    let mut out = Vec::new();
    rec(&mut Vec::with_capacity(k), &mut vec![false; k], &mut out);
    out
}

/// The symmetrized square `sym(Φ̃)` of a (1,m)-tensor, an order-2m tensor
/// with `Φ̃_{j1..jm,k1..km} = Σ_i Φ_{i;j1..jm} Φ_{i;k1..km}`.
///
/// Only meant for checking the implicit power-iteration operator on small
/// instances; it has `n^(2m)` entries and costs `(2m)!` per entry.
#[derive(Clone, Debug)]
pub struct SymmetricEvenTensor {
    dim: usize,
    order: usize,
    data: Vec<f64>,
}

impl SymmetricEvenTensor {
    pub fn square_of(phi: &TensorOneM) -> Self {
        let n = phi.n_in();
        let m = phi.order();
        let order = 2 * m;
        let row = phi.row_len();
        let mut square = vec![0.0; row * row];
        for i in 0..phi.n_out() {
            let r = &phi.entries()[i * row..(i + 1) * row];
            for a in 0..row {
                for b in 0..row {
                    square[a * row + b] += r[a] * r[b];
                }
            }
        }
        let perms = permutations(order);
        let total = n.pow(order as u32);
        let mut data = vec![0.0; total];
        let mut idx = vec![0; order];
        let mut permuted = vec![0; order];
        for (flat, slot) in data.iter_mut().enumerate() {
            let mut f = flat;
            for s in (0..order).rev() {
                idx[s] = f % n;
                f /= n;
            }
            let mut acc = 0.0;
            for p in &perms {
                for (s, &ps) in p.iter().enumerate() {
                    permuted[s] = idx[ps];
                }
                let pos = permuted.iter().fold(0, |acc, &j| acc * n + j);
                acc += square[pos];
            }
            *slot = acc / perms.len() as f64;
        }
        Self {
            dim: n,
            order,
            data,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn entries(&self) -> &[f64] {
        &self.data
    }

    /// `Φ̄ x^(2m-1)`: contract every slot but the first with `x`.
    pub fn contract_all_but_one(&self, x: &DVector<f64>) -> DVector<f64> {
        let mut buf = self.data.clone();
        for _ in 1..self.order {
            buf = TensorOneM::contract_last(&buf, self.dim, x.as_slice());
        }
        DVector::from_vec(buf)
    }
}
