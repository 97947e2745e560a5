//! Truncated multivariate Taylor polynomials ("jets") up to total degree 3.
//!
//! A jet in `n` variables truncated at order `K` stores `C(n + K, K)`
//! coefficients of the monomials `δx^α` with `|α| <= K`. Coefficients are
//! normalized Taylor coefficients, i.e. `∂^α f / α!`.
//!
//! Monomials are kept in graded lexicographic order: by total degree first,
//! then by the sorted variable tuple. For two variables and `K = 2` the
//! order is `1, x0, x1, x0², x0 x1, x1²`.

use std::collections::HashMap;
use std::ops::{Add, Div, Mul, Neg, Sub};
use std::sync::{Arc, Mutex, OnceLock};

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::tensor::TensorOneM;

pub const MAX_JET_ORDER: usize = 3;

/// Monomial bookkeeping shared by every jet with the same `(nvars, order)`.
#[derive(Debug)]
pub struct JetLayout {
    nvars: usize,
    order: usize,
    /// Sorted variable tuple of each monomial, e.g. `[0, 0, 2]` for x0² x2.
    monomials: Vec<Vec<usize>>,
    lookup: HashMap<Vec<usize>, usize>,
    /// `(a, b, c)`: monomial a times monomial b is monomial c.
    products: Vec<(u32, u32, u32)>,
}

impl JetLayout {
    fn build(nvars: usize, order: usize) -> Self {
        let mut monomials: Vec<Vec<usize>> = vec![Vec::new()];
        let mut prev: Vec<Vec<usize>> = vec![Vec::new()];
        for _ in 1..=order {
            let mut next = Vec::new();
            for m in &prev {
                let start = m.last().copied().unwrap_or(0);
                for v in start..nvars {
                    let mut t = m.clone();
                    t.push(v);
                    next.push(t);
                }
            }
            monomials.extend(next.iter().cloned());
            prev = next;
        }
        let lookup: HashMap<Vec<usize>, usize> = monomials
            .iter()
            .enumerate()
            .map(|(k, m)| (m.clone(), k))
            .collect();
        let mut products = Vec::new();
        for (a, ma) in monomials.iter().enumerate() {
            for (b, mb) in monomials.iter().enumerate() {
                if ma.len() + mb.len() > order {
                    continue;
                }
                let mut prod: Vec<usize> = ma.iter().chain(mb).copied().collect();
                prod.sort_unstable();
                products.push((a as u32, b as u32, lookup[&prod] as u32));
            }
        }
        Self {
            nvars,
            order,
            monomials,
            lookup,
            products,
        }
    }

    /// Shared layout for `(nvars, order)`.
    pub fn get(nvars: usize, order: usize) -> Arc<JetLayout> {
        assert!(
            (1..=MAX_JET_ORDER).contains(&order),
            "jet order {order} outside 1..={MAX_JET_ORDER}"
        );
        static CACHE: OnceLock<Mutex<HashMap<(usize, usize), Arc<JetLayout>>>> = OnceLock::new();
        let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
        let mut guard = cache.lock().expect("jet layout cache poisoned");
        guard
            .entry((nvars, order))
            .or_insert_with(|| Arc::new(JetLayout::build(nvars, order)))
            .clone()
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn len(&self) -> usize {
        self.monomials.len()
    }

    pub fn is_empty(&self) -> bool {
        self.monomials.is_empty()
    }

    /// Position of the monomial given as a (not necessarily sorted) variable list.
    pub fn index_of(&self, vars: &[usize]) -> Option<usize> {
        let mut key = vars.to_vec();
        key.sort_unstable();
        self.lookup.get(&key).copied()
    }

    pub fn monomial(&self, k: usize) -> &[usize] {
        &self.monomials[k]
    }
}

#[derive(Clone, Debug)]
pub struct TaylorJet {
    layout: Arc<JetLayout>,
    coeffs: Vec<f64>,
}

impl PartialEq for TaylorJet {
    fn eq(&self, other: &Self) -> bool {
        self.layout.nvars == other.layout.nvars
            && self.layout.order == other.layout.order
            && self.coeffs == other.coeffs
    }
}

/// One jet per state component, each the identity in its own variable.
pub fn seed(values: &[f64], order: usize) -> Vec<TaylorJet> {
    let layout = JetLayout::get(values.len(), order);
    values
        .iter()
        .enumerate()
        .map(|(i, &v)| TaylorJet::variable(&layout, i, v))
        .collect()
}

impl TaylorJet {
    pub fn constant(layout: &Arc<JetLayout>, value: f64) -> Self {
        let mut coeffs = vec![0.0; layout.len()];
        coeffs[0] = value;
        Self {
            layout: layout.clone(),
            coeffs,
        }
    }

    pub fn variable(layout: &Arc<JetLayout>, var: usize, value: f64) -> Self {
        let mut j = Self::constant(layout, value);
        j.coeffs[1 + var] = 1.0;
        j
    }

    pub fn from_coeffs(layout: &Arc<JetLayout>, coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.len() != layout.len() {
            return Err(Error::Dimension(format!(
                "jet needs {} coefficients, got {}",
                layout.len(),
                coeffs.len()
            )));
        }
        Ok(Self {
            layout: layout.clone(),
            coeffs,
        })
    }

    pub fn layout(&self) -> &Arc<JetLayout> {
        &self.layout
    }

    pub fn value(&self) -> f64 {
        self.coeffs[0]
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    /// Normalized coefficient of the monomial `Π x_v` over `vars`.
    pub fn coeff(&self, vars: &[usize]) -> f64 {
        self.layout
            .index_of(vars)
            .map(|k| self.coeffs[k])
            .unwrap_or(0.0)
    }

    pub fn is_finite(&self) -> bool {
        self.coeffs.iter().all(|c| c.is_finite())
    }

    fn check_compatible(&self, other: &Self) {
        assert!(
            Arc::ptr_eq(&self.layout, &other.layout)
                || (self.layout.nvars == other.layout.nvars
                    && self.layout.order == other.layout.order),
            "jets with different layouts combined"
        );
    }

    fn map_coeffs(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            layout: self.layout.clone(),
            coeffs: self.coeffs.iter().map(|&c| f(c)).collect(),
        }
    }

    fn zip_coeffs(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Self {
        self.check_compatible(other);
        Self {
            layout: self.layout.clone(),
            coeffs: self
                .coeffs
                .iter()
                .zip(&other.coeffs)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }

    fn mul_jet(&self, other: &Self) -> Self {
        self.check_compatible(other);
        let mut out = vec![0.0; self.coeffs.len()];
        for &(a, b, c) in &self.layout.products {
            let x = self.coeffs[a as usize];
            if x != 0.0 {
                out[c as usize] += x * other.coeffs[b as usize];
            }
        }
        Self {
            layout: self.layout.clone(),
            coeffs: out,
        }
    }

    /// `f(self)` given the normalized derivatives `f^(k)(a0) / k!` at the
    /// constant term `a0`, for `k = 0..=order`.
    fn compose(&self, series: [f64; MAX_JET_ORDER + 1]) -> Self {
        let mut h = self.clone();
        h.coeffs[0] = 0.0;
        let mut out = Self::constant(&self.layout, series[0]);
        let mut power = h.clone();
        for (k, &d) in series.iter().enumerate().take(self.layout.order + 1).skip(1) {
            if k > 1 {
                power = power.mul_jet(&h);
            }
            if d != 0.0 {
                for (o, p) in out.coeffs.iter_mut().zip(&power.coeffs) {
                    *o += d * p;
                }
            }
        }
        out
    }

    pub fn recip(&self) -> Self {
        let a = self.value();
        self.compose([1.0 / a, -1.0 / (a * a), 1.0 / (a * a * a), -1.0 / (a * a * a * a)])
    }

    pub fn checked_div(&self, other: &Self) -> Result<Self> {
        if other.value() == 0.0 {
            return Err(Error::JetDomain("division by a jet with zero constant term".into()));
        }
        Ok(self / other)
    }

    pub fn checked_sqrt(&self) -> Result<Self> {
        if self.value() <= 0.0 {
            return Err(Error::JetDomain(format!(
                "sqrt needs a positive constant term, got {}",
                self.value()
            )));
        }
        Ok(self.sqrt())
    }

    pub fn checked_ln(&self) -> Result<Self> {
        if self.value() <= 0.0 {
            return Err(Error::JetDomain(format!(
                "ln needs a positive constant term, got {}",
                self.value()
            )));
        }
        Ok(self.ln())
    }

    pub fn sin(&self) -> Self {
        let (s, c) = self.value().sin_cos();
        self.compose([s, c, -s / 2.0, -c / 6.0])
    }

    pub fn cos(&self) -> Self {
        let (s, c) = self.value().sin_cos();
        self.compose([c, -s, -c / 2.0, s / 6.0])
    }

    pub fn tan(&self) -> Self {
        let t = self.value().tan();
        let sec2 = 1.0 + t * t;
        self.compose([
            t,
            sec2,
            t * sec2,
            sec2 * (1.0 + 3.0 * t * t) / 3.0,
        ])
    }

    pub fn sqrt(&self) -> Self {
        let a = self.value();
        let r = a.sqrt();
        self.compose([
            r,
            0.5 / r,
            -0.125 / (a * r),
            1.0 / (16.0 * a * a * r),
        ])
    }

    pub fn exp(&self) -> Self {
        let e = self.value().exp();
        self.compose([e, e, e / 2.0, e / 6.0])
    }

    pub fn ln(&self) -> Self {
        let a = self.value();
        self.compose([a.ln(), 1.0 / a, -0.5 / (a * a), 1.0 / (3.0 * a * a * a)])
    }

    pub fn powf(&self, p: f64) -> Self {
        let a = self.value();
        let f0 = a.powf(p);
        self.compose([
            f0,
            p * a.powf(p - 1.0),
            p * (p - 1.0) / 2.0 * a.powf(p - 2.0),
            p * (p - 1.0) * (p - 2.0) / 6.0 * a.powf(p - 3.0),
        ])
    }
}

macro_rules! jet_binop {
    ($tr:ident, $method:ident, $body:expr) => {
        impl $tr<&TaylorJet> for &TaylorJet {
            type Output = TaylorJet;
            fn $method(self, rhs: &TaylorJet) -> TaylorJet {
                let f: fn(&TaylorJet, &TaylorJet) -> TaylorJet = $body;
                f(self, rhs)
            }
        }
        impl $tr<TaylorJet> for TaylorJet {
            type Output = TaylorJet;
            fn $method(self, rhs: TaylorJet) -> TaylorJet {
                (&self).$method(&rhs)
            }
        }
        impl $tr<&TaylorJet> for TaylorJet {
            type Output = TaylorJet;
            fn $method(self, rhs: &TaylorJet) -> TaylorJet {
                (&self).$method(rhs)
            }
        }
        impl $tr<TaylorJet> for &TaylorJet {
            type Output = TaylorJet;
            fn $method(self, rhs: TaylorJet) -> TaylorJet {
                self.$method(&rhs)
            }
        }
    };
}

jet_binop!(Add, add, |a, b| a.zip_coeffs(b, |x, y| x + y));
jet_binop!(Sub, sub, |a, b| a.zip_coeffs(b, |x, y| x - y));
jet_binop!(Mul, mul, |a, b| a.mul_jet(b));
jet_binop!(Div, div, |a, b| {
    let mut q = a.mul_jet(&b.recip());
    q.coeffs[0] = a.coeffs[0] / b.coeffs[0];
    q
});

macro_rules! jet_scalar_op {
    ($tr:ident, $method:ident, $jet_first:expr, $scalar_first:expr) => {
        impl $tr<f64> for &TaylorJet {
            type Output = TaylorJet;
            fn $method(self, rhs: f64) -> TaylorJet {
                let f: fn(&TaylorJet, f64) -> TaylorJet = $jet_first;
                f(self, rhs)
            }
        }
        impl $tr<f64> for TaylorJet {
            type Output = TaylorJet;
            fn $method(self, rhs: f64) -> TaylorJet {
                (&self).$method(rhs)
            }
        }
        impl $tr<&TaylorJet> for f64 {
            type Output = TaylorJet;
            fn $method(self, rhs: &TaylorJet) -> TaylorJet {
                let f: fn(f64, &TaylorJet) -> TaylorJet = $scalar_first;
                f(self, rhs)
            }
        }
        impl $tr<TaylorJet> for f64 {
            type Output = TaylorJet;
            fn $method(self, rhs: TaylorJet) -> TaylorJet {
                self.$method(&rhs)
            }
        }
    };
}

jet_scalar_op!(
    Add,
    add,
    |a, s| {
        let mut r = a.clone();
        r.coeffs[0] += s;
        r
    },
    |s, a| a + s
);
jet_scalar_op!(
    Sub,
    sub,
    |a, s| {
        let mut r = a.clone();
        r.coeffs[0] -= s;
        r
    },
    |s, a| {
        let mut r = a.map_coeffs(|c| -c);
        r.coeffs[0] += s;
        r
    }
);
jet_scalar_op!(Mul, mul, |a, s| a.map_coeffs(|c| c * s), |s, a| a * s);
jet_scalar_op!(
    Div,
    div,
    |a, s| a.map_coeffs(|c| c / s),
    |s, a| {
        let mut q = a.recip() * s;
        q.coeffs[0] = s / a.coeffs[0];
        q
    }
);

impl Neg for TaylorJet {
    type Output = TaylorJet;
    fn neg(self) -> TaylorJet {
        self.map_coeffs(|c| -c)
    }
}

impl Neg for &TaylorJet {
    type Output = TaylorJet;
    fn neg(self) -> TaylorJet {
        self.map_coeffs(|c| -c)
    }
}

/// Number type the dynamics right-hand sides are written against: plain
/// `f64` for state evaluation and [`TaylorJet`] for derivative extraction.
pub trait Scalar:
    Clone
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + Add<f64, Output = Self>
    + Sub<f64, Output = Self>
    + Mul<f64, Output = Self>
    + Div<f64, Output = Self>
    + for<'a> Add<&'a Self, Output = Self>
    + for<'a> Sub<&'a Self, Output = Self>
    + for<'a> Mul<&'a Self, Output = Self>
    + for<'a> Div<&'a Self, Output = Self>
{
    fn value(&self) -> f64;
    /// A constant sharing `self`'s variable layout.
    fn constant_like(&self, c: f64) -> Self;
    fn sin(&self) -> Self;
    fn cos(&self) -> Self;
    fn tan(&self) -> Self;
    fn sqrt(&self) -> Self;
    fn exp(&self) -> Self;
    fn ln(&self) -> Self;
    fn powf(&self, p: f64) -> Self;
}

impl Scalar for f64 {
    fn value(&self) -> f64 {
        *self
    }
    fn constant_like(&self, c: f64) -> Self {
        c
    }
    fn sin(&self) -> Self {
        f64::sin(*self)
    }
    fn cos(&self) -> Self {
        f64::cos(*self)
    }
    fn tan(&self) -> Self {
        f64::tan(*self)
    }
    fn sqrt(&self) -> Self {
        f64::sqrt(*self)
    }
    fn exp(&self) -> Self {
        f64::exp(*self)
    }
    fn ln(&self) -> Self {
        f64::ln(*self)
    }
    fn powf(&self, p: f64) -> Self {
        f64::powf(*self, p)
    }
}

impl Scalar for TaylorJet {
    fn value(&self) -> f64 {
        TaylorJet::value(self)
    }
    fn constant_like(&self, c: f64) -> Self {
        TaylorJet::constant(&self.layout, c)
    }
    fn sin(&self) -> Self {
        TaylorJet::sin(self)
    }
    fn cos(&self) -> Self {
        TaylorJet::cos(self)
    }
    fn tan(&self) -> Self {
        TaylorJet::tan(self)
    }
    fn sqrt(&self) -> Self {
        TaylorJet::sqrt(self)
    }
    fn exp(&self) -> Self {
        TaylorJet::exp(self)
    }
    fn ln(&self) -> Self {
        TaylorJet::ln(self)
    }
    fn powf(&self, p: f64) -> Self {
        TaylorJet::powf(self, p)
    }
}

/// Raw partial derivatives of a vector field at the seed point.
#[derive(Clone, Debug)]
pub struct Partials {
    /// `∂F_i/∂x_j`
    pub a1: DMatrix<f64>,
    /// `∂²F_i/∂x_j∂x_k`, present when the jets carry order >= 2.
    pub a2: Option<TensorOneM>,
    /// `∂³F_i/∂x_j∂x_k∂x_l`, present when the jets carry order 3.
    pub a3: Option<TensorOneM>,
}

/// Turn output jets into derivative tensors up to order `up_to`, undoing the
/// `1/α!` normalization of the coefficients.
pub fn extract_partials(outputs: &[TaylorJet], up_to: usize) -> Result<Partials> {
    let first = outputs
        .first()
        .ok_or_else(|| Error::Invalid("no output jets".into()))?;
    let layout = first.layout.clone();
    if up_to == 0 || up_to > layout.order {
        return Err(Error::Invalid(format!(
            "requested order {up_to} but jets are truncated at {}",
            layout.order
        )));
    }
    let n_out = outputs.len();
    let n = layout.nvars;
    let a1 = DMatrix::from_fn(n_out, n, |i, j| outputs[i].coeffs[1 + j]);

    let a2 = (up_to >= 2).then(|| {
        let mut t = TensorOneM::zeros_rect(n_out, n, 2);
        for (i, jet) in outputs.iter().enumerate() {
            for j in 0..n {
                for k in 0..n {
                    let c = jet.coeff(&[j, k]);
                    let fact = if j == k { 2.0 } else { 1.0 };
                    t.set(i, &[j, k], c * fact);
                }
            }
        }
        t
    });

    let a3 = (up_to >= 3).then(|| {
        let mut t = TensorOneM::zeros_rect(n_out, n, 3);
        for (i, jet) in outputs.iter().enumerate() {
            for j in 0..n {
                for k in 0..n {
                    for l in 0..n {
                        let c = jet.coeff(&[j, k, l]);
                        t.set(i, &[j, k, l], c * multi_factorial(&[j, k, l]));
                    }
                }
            }
        }
        t
    });

    Ok(Partials { a1, a2, a3 })
}

/// `α!` for the multi-index counting repeated variables in `vars`.
fn multi_factorial(vars: &[usize]) -> f64 {
    let mut sorted = vars.to_vec();
    sorted.sort_unstable();
    let mut out = 1.0;
    let mut run = 1;
    for w in sorted.windows(2) {
        if w[0] == w[1] {
            run += 1;
            out *= run as f64;
        } else {
            run = 1;
        }
    }
    out
}
