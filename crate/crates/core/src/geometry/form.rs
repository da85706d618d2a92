//! Pointwise-evaluable differential forms and the exterior algebra on them.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::util::{k_subsets, mask_indices, shuffle_sign};

use super::manifold::Manifold;
use super::point::Point;
use super::symform::SymForm;

/// Vector field evaluation hook used by the interior product (the full
/// `VectorField` type lives in `fields`; this keeps the exterior algebra
/// independent of it).
pub type PointFn = dyn Fn(&Point) -> Vec<f64> + Send + Sync;

type EvalFn = dyn Fn(&Point, &[&[f64]]) -> f64 + Send + Sync;

/// A degree-k differential form given by a pointwise evaluator on chart
/// tangent vectors, with an optional closed-form exterior derivative.
#[derive(Clone)]
pub struct FormField {
    manifold: Manifold,
    degree: usize,
    name: String,
    eval: Arc<EvalFn>,
    d_eval: Option<Arc<EvalFn>>,
}

impl std::fmt::Debug for FormField {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FormField")
            .field("name", &self.name)
            .field("degree", &self.degree)
            .field("manifold", &self.manifold)
            .field("has_d", &self.d_eval.is_some())
            .finish()
    }
}

impl FormField {
    pub fn new(
        manifold: Manifold,
        degree: usize,
        name: impl Into<String>,
        eval: impl Fn(&Point, &[&[f64]]) -> f64 + Send + Sync + 'static,
    ) -> FormField {
        assert!(degree <= manifold.dim(), "degree exceeds dimension");
        FormField {
            manifold,
            degree,
            name: name.into(),
            eval: Arc::new(eval),
            d_eval: None,
        }
    }

    /// Attach a closed-form exterior derivative evaluator.
    pub fn with_d(
        mut self,
        d_eval: impl Fn(&Point, &[&[f64]]) -> f64 + Send + Sync + 'static,
    ) -> FormField {
        self.d_eval = Some(Arc::new(d_eval));
        self
    }

    pub fn zero(manifold: Manifold, degree: usize) -> FormField {
        FormField::new(manifold, degree, "0", |_, _| 0.0).with_d(|_, _| 0.0)
    }

    /// Wrap a symbolic chart form at a fixed time value. The whole derivative
    /// chain is symbolic, so `d()` is closed-form at every level.
    pub fn from_sym(
        manifold: Manifold,
        sym: &SymForm,
        t: f64,
        name: impl Into<String>,
    ) -> FormField {
        assert_eq!(sym.dim, manifold.coord_len());
        let name = name.into();
        let mut field = FormField::sym_eval_only(manifold, sym, t, name.clone());
        if sym.degree < manifold.dim() {
            let ds = sym.d();
            let d_field = FormField::sym_eval_only(manifold, &ds, t, format!("d({name})"));
            field.d_eval = Some(d_field.eval);
        } else {
            field.d_eval = Some(Arc::new(|_, _| 0.0));
        }
        field
    }

    fn sym_eval_only(manifold: Manifold, sym: &SymForm, t: f64, name: String) -> FormField {
        let sym = sym.clone();
        let dim = sym.dim;
        FormField::new(manifold, sym.degree, name, move |p, vs| {
            let mut vars = [0.0f64; 16];
            vars[..dim].copy_from_slice(&p.coords);
            vars[dim] = t;
            sym.eval(&vars[..=dim], vs)
        })
    }

    pub fn from_scalar(
        manifold: Manifold,
        name: impl Into<String>,
        f: impl Fn(&Point) -> f64 + Send + Sync + 'static,
    ) -> FormField {
        let name = name.into();
        FormField::new(manifold, 0, name, move |p, _| f(p))
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn manifold(&self) -> Manifold {
        self.manifold
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn has_closed_form_d(&self) -> bool {
        self.d_eval.is_some()
    }

    /// Evaluate on `degree` tangent vectors at `p`.
    pub fn eval(&self, p: &Point, vs: &[&[f64]]) -> f64 {
        debug_assert_eq!(vs.len(), self.degree);
        (self.eval)(p, vs)
    }

    /// Exterior derivative: closed form when available, otherwise a
    /// Richardson-extrapolated central difference.
    pub fn d(&self) -> FormField {
        if self.degree == self.manifold.dim() {
            return FormField::zero(self.manifold, self.degree + 1 - 1);
        }
        match &self.d_eval {
            Some(d) => {
                let d = Arc::clone(d);
                // d² = 0, so the derivative of a derivative is the zero form.
                FormField {
                    manifold: self.manifold,
                    degree: self.degree + 1,
                    name: format!("d({})", self.name),
                    eval: d,
                    d_eval: Some(Arc::new(|_, _| 0.0)),
                }
            }
            None => numeric_d_richardson(self, 1e-4),
        }
    }

    /// Pointwise scaling by a constant.
    pub fn scale(&self, c: f64) -> FormField {
        let eval = Arc::clone(&self.eval);
        let d_eval = self.d_eval.as_ref().map(Arc::clone);
        FormField {
            manifold: self.manifold,
            degree: self.degree,
            name: format!("{c}*{}", self.name),
            eval: Arc::new(move |p, vs| c * eval(p, vs)),
            d_eval: d_eval.map(|d| {
                Arc::new(move |p: &Point, vs: &[&[f64]]| c * d(p, vs)) as Arc<EvalFn>
            }),
        }
    }

    /// Pointwise sum of two forms of equal degree.
    pub fn add(&self, other: &FormField) -> FormField {
        assert_eq!(self.degree, other.degree);
        assert_eq!(self.manifold, other.manifold);
        let (e1, e2) = (Arc::clone(&self.eval), Arc::clone(&other.eval));
        let d_eval = match (&self.d_eval, &other.d_eval) {
            (Some(a), Some(b)) => {
                let (a, b) = (Arc::clone(a), Arc::clone(b));
                Some(Arc::new(move |p: &Point, vs: &[&[f64]]| a(p, vs) + b(p, vs)) as Arc<EvalFn>)
            }
            _ => None,
        };
        FormField {
            manifold: self.manifold,
            degree: self.degree,
            name: format!("{}+{}", self.name, other.name),
            eval: Arc::new(move |p, vs| e1(p, vs) + e2(p, vs)),
            d_eval,
        }
    }
}

/// Wedge product with the (k, l)-shuffle sign convention.
pub fn wedge(a: &FormField, b: &FormField) -> Result<FormField> {
    assert_eq!(a.manifold, b.manifold);
    let (k, l) = (a.degree, b.degree);
    let dim = a.manifold.dim();
    if k + l > dim {
        return Err(Error::DegreeOverflow { k, l, dim });
    }
    let name = format!("{}∧{}", a.name, b.name);
    let eval = wedge_eval(Arc::clone(&a.eval), Arc::clone(&b.eval), k, l);

    // d(a∧b) = da∧b + (-1)^k a∧db when both sides are closed-form.
    let d_eval = if k + l < dim {
        match (&a.d_eval, &b.d_eval) {
            (Some(da), Some(db)) => {
                let left = wedge_eval(Arc::clone(da), Arc::clone(&b.eval), k + 1, l);
                let right = wedge_eval(Arc::clone(&a.eval), Arc::clone(db), k, l + 1);
                let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
                Some(Arc::new(move |p: &Point, vs: &[&[f64]]| {
                    left(p, vs) + sign * right(p, vs)
                }) as Arc<EvalFn>)
            }
            _ => None,
        }
    } else {
        Some(Arc::new(|_: &Point, _: &[&[f64]]| 0.0) as Arc<EvalFn>)
    };

    Ok(FormField {
        manifold: a.manifold,
        degree: k + l,
        name,
        eval,
        d_eval,
    })
}

fn wedge_eval(a: Arc<EvalFn>, b: Arc<EvalFn>, k: usize, l: usize) -> Arc<EvalFn> {
    let subsets = k_subsets(k + l, k);
    let full: u32 = if k + l == 0 { 0 } else { (1 << (k + l)) - 1 };
    Arc::new(move |p: &Point, vs: &[&[f64]]| {
        debug_assert_eq!(vs.len(), k + l);
        let mut total = 0.0;
        let mut left: Vec<&[f64]> = Vec::with_capacity(k);
        let mut right: Vec<&[f64]> = Vec::with_capacity(l);
        for &s in &subsets {
            left.clear();
            right.clear();
            for i in mask_indices(s) {
                left.push(vs[i]);
            }
            for i in mask_indices(full & !s) {
                right.push(vs[i]);
            }
            total += shuffle_sign(s, full & !s) * a(p, &left) * b(p, &right);
        }
        total
    })
}

/// Interior product `i_X a` for a vector field evaluator `x`.
pub fn interior_product(
    x: Arc<PointFn>,
    a: &FormField,
    name: impl Into<String>,
) -> Result<FormField> {
    if a.degree == 0 {
        return Err(Error::InteriorOfScalar);
    }
    let eval = Arc::clone(&a.eval);
    let degree = a.degree;
    Ok(FormField::new(
        a.manifold,
        degree - 1,
        name,
        move |p, vs| {
            let xv = x(p);
            let mut all: Vec<&[f64]> = Vec::with_capacity(degree);
            all.push(&xv);
            all.extend_from_slice(vs);
            eval(p, &all)
        },
    ))
}

/// Central-difference exterior derivative at step `h`.
///
/// Uses constant coordinate extensions of the argument vectors, so the
/// commutator terms vanish and
/// `(da)(v_0..v_k) = Σ_i (-1)^i ∂_{v_i} [a(v_0..v̂_i..v_k)]`.
pub fn numeric_d(a: &FormField, h: f64) -> FormField {
    let eval = Arc::clone(&a.eval);
    let degree = a.degree;
    FormField::new(
        a.manifold,
        degree + 1,
        format!("d_h({})", a.name),
        move |p, vs| numeric_d_value(&eval, p, vs, h),
    )
}

/// Richardson-extrapolated central difference: error O(h^4).
pub fn numeric_d_richardson(a: &FormField, h: f64) -> FormField {
    let eval = Arc::clone(&a.eval);
    let degree = a.degree;
    FormField::new(
        a.manifold,
        degree + 1,
        format!("d_rich({})", a.name),
        move |p, vs| {
            let coarse = numeric_d_value(&eval, p, vs, h);
            let fine = numeric_d_value(&eval, p, vs, h / 2.0);
            (4.0 * fine - coarse) / 3.0
        },
    )
}

fn numeric_d_value(eval: &Arc<EvalFn>, p: &Point, vs: &[&[f64]], h: f64) -> f64 {
    let mut total = 0.0;
    let mut rest: Vec<&[f64]> = Vec::with_capacity(vs.len().saturating_sub(1));
    for (i, vi) in vs.iter().enumerate() {
        rest.clear();
        for (j, vj) in vs.iter().enumerate() {
            if j != i {
                rest.push(vj);
            }
        }
        let hi = p.offset(vi, h);
        let lo = p.offset(vi, -h);
        let deriv = (eval(&hi, &rest) - eval(&lo, &rest)) / (2.0 * h);
        total += if i % 2 == 0 { deriv } else { -deriv };
    }
    total
}

// ---- Volume and symplectic forms on the model manifolds --------------------

impl Manifold {
    /// The oriented Riemannian volume form: +1 on positively oriented
    /// orthonormal frames.
    pub fn volume_form(self) -> FormField {
        match self {
            Manifold::Sphere3 => {
                FormField::from_sym(self, &sphere_volume_sym(4, 0), 0.0, "mu_S3")
            }
            Manifold::Sphere3xSphere3 => {
                let m1 = sphere_volume_sym_in(8, 0, 4);
                let m2 = sphere_volume_sym_in(8, 4, 4);
                FormField::from_sym(self, &m1.wedge(&m2), 0.0, "mu_S3xS3")
            }
            Manifold::Sphere2xSphere2 => {
                let m1 = sphere_volume_sym_in(6, 0, 3);
                let m2 = sphere_volume_sym_in(6, 3, 3);
                FormField::from_sym(self, &m1.wedge(&m2), 0.0, "mu_S2xS2")
            }
            Manifold::Torus(n) => {
                let full = (1u32 << n) - 1;
                let sym = SymForm::term(n as usize, full, crate::expr::Expr::one());
                FormField::from_sym(self, &sym, 0.0, "mu_torus")
            }
            Manifold::CP2 => FormField::new(self, 4, "mu_FS", |p, vs| {
                let r2: f64 = p.coords.iter().map(|x| x * x).sum();
                let density = (1.0 + r2).powi(-3);
                let mut m = [0.0f64; 16];
                for (c, v) in vs.iter().enumerate() {
                    for r in 0..4 {
                        m[r * 4 + c] = v[r];
                    }
                }
                density * det4(&m)
            })
            .with_d(|_, _| 0.0),
        }
    }

    /// Factor volume forms of a sphere product, extended to the product.
    pub fn factor_volume_sym(self, factor: usize) -> SymForm {
        let factors = self.sphere_factors().expect("sphere product");
        let total = self.coord_len();
        let offset: usize = factors[..factor].iter().sum();
        sphere_volume_sym_in(total, offset, factors[factor])
    }

    /// Fubini–Study Kähler form on CP2: ω(u, v) = g(Ju, v).
    pub fn fs_kahler_form(self) -> FormField {
        assert_eq!(self, Manifold::CP2);
        FormField::new(self, 2, "omega_FS", |p, vs| {
            let ju = [-vs[0][1], vs[0][0], -vs[0][3], vs[0][2]];
            Manifold::CP2.metric(p, &ju, vs[1])
        })
        .with_d(|_, _| 0.0)
    }
}

/// Volume form of the unit sphere S^{fd-1} occupying slots
/// `offset..offset+fd` of a `total`-dimensional ambient chart, as the
/// interior product of the ambient volume by the position field.
fn sphere_volume_sym_in(total: usize, offset: usize, fd: usize) -> SymForm {
    use crate::expr::Expr;
    let mut mask = 0u32;
    for i in 0..fd {
        mask |= 1 << (offset + i);
    }
    let vol = SymForm::term(total, mask, Expr::one());
    let euler: Vec<Expr> = (0..total)
        .map(|i| {
            if i >= offset && i < offset + fd {
                Expr::var(i)
            } else {
                Expr::zero()
            }
        })
        .collect();
    vol.interior(&euler)
}

fn sphere_volume_sym(total: usize, offset: usize) -> SymForm {
    sphere_volume_sym_in(total, offset, total)
}

fn det4(m: &[f64; 16]) -> f64 {
    let mut buf = *m;
    super::symform::det_in_place(&mut buf, 4)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Manifold::*;

    #[test]
    fn volume_form_is_plus_one_on_oriented_frames() {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for m in [Sphere3, Sphere3xSphere3, Sphere2xSphere2, CP2, Torus(3)] {
            let mu = m.volume_form();
            for _ in 0..20 {
                let p = m.sample_uniform(&mut rng);
                let frame = m.orthonormal_frame(&p);
                let refs: Vec<&[f64]> = frame.iter().map(|v| v.as_slice()).collect();
                let v = mu.eval(&p, &refs);
                assert!(
                    (v - 1.0).abs() < 1e-10,
                    "{m:?}: volume on oriented orthonormal frame = {v}"
                );
            }
        }
    }

    #[test]
    fn wedge_rejects_degree_overflow() {
        let m = Torus(2);
        let mu = m.volume_form();
        assert!(matches!(
            wedge(&mu, &mu),
            Err(crate::error::Error::DegreeOverflow { .. })
        ));
    }
}
