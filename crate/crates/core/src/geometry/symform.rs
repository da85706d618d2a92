//! Differential forms with symbolic coefficient expressions on a flat chart.
//!
//! A `SymForm` of degree k on an m-dimensional chart is a finite sum
//! `Σ_I c_I(x, t) dx_I` over strictly increasing multi-indices I (stored as
//! bitmasks). Coefficients are [`Expr`] trees in the chart variables (slots
//! `0..m`) and time (slot `m`), so the exterior derivative, time derivative,
//! wedge product, and interior product are all exact symbolic operations.
//!
//! Evaluation is pointwise on chart vectors; embedded-sphere ambient
//! coordinates count as a chart here.

use std::collections::BTreeMap;

use crate::expr::Expr;
use crate::util::{mask_indices, shuffle_sign};

#[derive(Debug, Clone)]
pub struct SymForm {
    pub dim: usize,
    pub degree: usize,
    pub terms: BTreeMap<u32, Expr>,
}

impl SymForm {
    pub fn zero(dim: usize, degree: usize) -> SymForm {
        SymForm {
            dim,
            degree,
            terms: BTreeMap::new(),
        }
    }

    /// Single term `c · dx_I` for the index set `mask`.
    pub fn term(dim: usize, mask: u32, c: Expr) -> SymForm {
        let degree = mask.count_ones() as usize;
        let mut terms = BTreeMap::new();
        if !c.is_zero() {
            terms.insert(mask, c);
        }
        SymForm { dim, degree, terms }
    }

    /// 1-form `Σ coeffs[i] dx_i`.
    pub fn one_form(dim: usize, coeffs: Vec<Expr>) -> SymForm {
        assert_eq!(coeffs.len(), dim);
        let mut out = SymForm::zero(dim, 1);
        for (i, c) in coeffs.into_iter().enumerate() {
            out.accumulate(1 << i, c);
        }
        out
    }

    /// 0-form (scalar function).
    pub fn scalar(dim: usize, c: Expr) -> SymForm {
        SymForm::term(dim, 0, c)
    }

    fn accumulate(&mut self, mask: u32, c: Expr) {
        if c.is_zero() {
            return;
        }
        match self.terms.remove(&mask) {
            Some(prev) => {
                let sum = Expr::add(prev, c);
                if !sum.is_zero() {
                    self.terms.insert(mask, sum);
                }
            }
            None => {
                self.terms.insert(mask, c);
            }
        }
    }

    pub fn add(&self, other: &SymForm) -> SymForm {
        assert_eq!(self.degree, other.degree);
        assert_eq!(self.dim, other.dim);
        let mut out = self.clone();
        for (m, c) in &other.terms {
            out.accumulate(*m, c.clone());
        }
        out
    }

    pub fn sub(&self, other: &SymForm) -> SymForm {
        self.add(&other.scale(Expr::constant(-1.0)))
    }

    pub fn scale(&self, f: Expr) -> SymForm {
        let mut out = SymForm::zero(self.dim, self.degree);
        for (m, c) in &self.terms {
            out.accumulate(*m, Expr::mul(f.clone(), c.clone()));
        }
        out
    }

    pub fn wedge(&self, other: &SymForm) -> SymForm {
        assert_eq!(self.dim, other.dim);
        let mut out = SymForm::zero(self.dim, self.degree + other.degree);
        for (ma, ca) in &self.terms {
            for (mb, cb) in &other.terms {
                if ma & mb != 0 {
                    continue;
                }
                let sign = shuffle_sign(*ma, *mb);
                let c = Expr::mul(
                    Expr::constant(sign),
                    Expr::mul(ca.clone(), cb.clone()),
                );
                out.accumulate(ma | mb, c);
            }
        }
        out
    }

    /// Exterior derivative in the chart variables.
    pub fn d(&self) -> SymForm {
        let mut out = SymForm::zero(self.dim, self.degree + 1);
        for (mask, c) in &self.terms {
            for j in 0..self.dim {
                let bit = 1u32 << j;
                if mask & bit != 0 {
                    continue;
                }
                let dc = c.diff(j);
                if dc.is_zero() {
                    continue;
                }
                let sign = shuffle_sign(bit, *mask);
                out.accumulate(mask | bit, Expr::mul(Expr::constant(sign), dc));
            }
        }
        out
    }

    /// Derivative with respect to the time slot.
    pub fn dt(&self) -> SymForm {
        let mut out = SymForm::zero(self.dim, self.degree);
        for (mask, c) in &self.terms {
            out.accumulate(*mask, c.diff(self.dim));
        }
        out
    }

    /// Interior product with the vector field whose components are `v`.
    pub fn interior(&self, v: &[Expr]) -> SymForm {
        assert!(self.degree >= 1, "interior product needs degree >= 1");
        assert_eq!(v.len(), self.dim);
        let mut out = SymForm::zero(self.dim, self.degree - 1);
        for (mask, c) in &self.terms {
            for (pos, i) in mask_indices(*mask).into_iter().enumerate() {
                if v[i].is_zero() {
                    continue;
                }
                let sign = if pos % 2 == 0 { 1.0 } else { -1.0 };
                let coeff = Expr::mul(
                    Expr::constant(sign),
                    Expr::mul(v[i].clone(), c.clone()),
                );
                out.accumulate(mask & !(1u32 << i), coeff);
            }
        }
        out
    }

    /// Evaluate on chart vectors. `vars` holds the chart coordinates followed
    /// by the time value (length `dim + 1`).
    pub fn eval(&self, vars: &[f64], vectors: &[&[f64]]) -> f64 {
        debug_assert_eq!(vectors.len(), self.degree);
        let mut total = 0.0;
        for (mask, c) in &self.terms {
            let cv = c.eval(vars);
            if cv == 0.0 {
                continue;
            }
            total += cv * minor_det(*mask, vectors);
        }
        total
    }

    /// Largest coefficient magnitude at a chart point (coarse size gauge).
    pub fn coeff_sup(&self, vars: &[f64]) -> f64 {
        self.terms
            .values()
            .map(|c| c.eval(vars).abs())
            .fold(0.0, f64::max)
    }
}

/// det of the k×k minor picking the rows in `mask` from the column vectors.
fn minor_det(mask: u32, vectors: &[&[f64]]) -> f64 {
    let k = vectors.len();
    if k == 0 {
        return 1.0;
    }
    let rows = mask_indices(mask);
    debug_assert_eq!(rows.len(), k);
    let mut m = [0.0f64; 36];
    for (c, v) in vectors.iter().enumerate() {
        for (r, &row) in rows.iter().enumerate() {
            m[r * k + c] = v[row];
        }
    }
    det_in_place(&mut m, k)
}

/// Gaussian elimination with partial pivoting on a k×k buffer.
pub(crate) fn det_in_place(m: &mut [f64], k: usize) -> f64 {
    let mut det = 1.0;
    for col in 0..k {
        let mut piv = col;
        let mut best = m[col * k + col].abs();
        for r in (col + 1)..k {
            let v = m[r * k + col].abs();
            if v > best {
                best = v;
                piv = r;
            }
        }
        if best == 0.0 {
            return 0.0;
        }
        if piv != col {
            for c in 0..k {
                m.swap(col * k + c, piv * k + c);
            }
            det = -det;
        }
        let d = m[col * k + col];
        det *= d;
        for r in (col + 1)..k {
            let f = m[r * k + col] / d;
            if f == 0.0 {
                continue;
            }
            for c in col..k {
                m[r * k + c] -= f * m[col * k + c];
            }
        }
    }
    det
}
