//! Divergence-free vector field constructors and divergence verification.
//!
//! Sign conventions: Hamiltonian fields satisfy `dH = i_{X_H} ω` (note that
//! some texts use the opposite sign); Reeb fields satisfy `α(X) = 1` and
//! `i_X dα = 0`. Divergence is checked as `d(i_X μ) = 0` (Cartan formula for
//! `L_X μ` on closed forms), not through the metric divergence.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::geometry::{
    interior_product, numeric_d_richardson, FormField, Manifold, Point, PointFn, SymForm,
};

type FieldFn = dyn Fn(&Point, f64) -> Vec<f64> + Send + Sync;

/// A (possibly time-dependent) vector field on one of the model manifolds.
#[derive(Clone)]
pub struct VectorField {
    pub name: String,
    pub time_dependent: bool,
    manifold: Manifold,
    eval: Arc<FieldFn>,
}

impl std::fmt::Debug for VectorField {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("VectorField")
            .field("name", &self.name)
            .field("manifold", &self.manifold)
            .field("time_dependent", &self.time_dependent)
            .finish()
    }
}

impl VectorField {
    pub fn stationary(
        manifold: Manifold,
        name: impl Into<String>,
        f: impl Fn(&Point) -> Vec<f64> + Send + Sync + 'static,
    ) -> VectorField {
        VectorField {
            name: name.into(),
            time_dependent: false,
            manifold,
            eval: Arc::new(move |p, _| f(p)),
        }
    }

    pub fn time_varying(
        manifold: Manifold,
        name: impl Into<String>,
        f: impl Fn(&Point, f64) -> Vec<f64> + Send + Sync + 'static,
    ) -> VectorField {
        VectorField {
            name: name.into(),
            time_dependent: true,
            manifold,
            eval: Arc::new(f),
        }
    }

    pub fn zero(manifold: Manifold) -> VectorField {
        let len = manifold.coord_len();
        VectorField::stationary(manifold, "0", move |_| vec![0.0; len])
    }

    pub fn manifold(&self) -> Manifold {
        self.manifold
    }

    pub fn eval(&self, p: &Point) -> Vec<f64> {
        (self.eval)(p, 0.0)
    }

    pub fn eval_at(&self, p: &Point, t: f64) -> Vec<f64> {
        (self.eval)(p, t)
    }

    /// Freeze time for use in pointwise exterior algebra.
    pub fn at_time(&self, t: f64) -> Arc<PointFn> {
        let eval = Arc::clone(&self.eval);
        Arc::new(move |p: &Point| eval(p, t))
    }

    /// Interior product `i_X a` (at time 0 for time-dependent fields).
    pub fn interior(&self, a: &FormField) -> Result<FormField> {
        interior_product(
            self.at_time(0.0),
            a,
            format!("i_{}({})", self.name, a.name()),
        )
    }
}

// ---- Hopf-type fields -------------------------------------------------------

/// Rotation of an ambient complex pair: (x, y) slots advance by speed·(-y, x).
fn rotate_pairs(coords: &[f64], speeds: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; coords.len()];
    for (pair, &s) in speeds.iter().enumerate() {
        let i = 2 * pair;
        out[i] = -s * coords[i + 1];
        out[i + 1] = s * coords[i];
    }
    out
}

/// The Hopf field on the unit 3-sphere: p ↦ i·p in complex coordinates.
pub fn hopf_field_s3() -> VectorField {
    VectorField::stationary(Manifold::Sphere3, "hopf", |p| {
        rotate_pairs(&p.coords, &[1.0, 1.0])
    })
}

/// `a·H1 + b·H2` on S³×S³: the first factor rotates with speed `a`, the
/// second with speed `b`. The time-t flow maps (z, w) to (e^{iat} z, e^{ibt} w).
pub fn hopf_pair_field(a: f64, b: f64) -> VectorField {
    VectorField::stationary(
        Manifold::Sphere3xSphere3,
        format!("{a}*H1+{b}*H2"),
        move |p| rotate_pairs(&p.coords, &[a, a, b, b]),
    )
}

/// Closed-form flow of [`hopf_pair_field`], for validating the integrator.
pub fn hopf_pair_flow(a: f64, b: f64, p: &Point, t: f64) -> Point {
    let mut coords = p.coords.clone();
    for (pair, &s) in [a, a, b, b].iter().enumerate() {
        let i = 2 * pair;
        let (c, sn) = ((s * t).cos(), (s * t).sin());
        let (x, y) = (coords[i], coords[i + 1]);
        coords[i] = c * x - sn * y;
        coords[i + 1] = sn * x + c * y;
    }
    Point::raw(p.manifold, 0, coords)
}

/// The standard contact form on S³ ⊂ R⁴ (dual of the Hopf field), as an
/// ambient 1-form with exact symbolic derivative.
pub fn contact_form_s3() -> FormField {
    FormField::from_sym(Manifold::Sphere3, &contact_sym(4, 0), 0.0, "alpha_std")
}

/// Ambient contact-form expression `x dy - y dx` summed over the complex
/// pairs of one sphere factor occupying `offset..offset+4` of `total` slots.
fn contact_sym(total: usize, offset: usize) -> SymForm {
    let mut coeffs = vec![Expr::zero(); total];
    for pair in 0..2 {
        let i = offset + 2 * pair;
        coeffs[i] = Expr::neg(Expr::var(i + 1));
        coeffs[i + 1] = Expr::var(i);
    }
    SymForm::one_form(total, coeffs)
}

/// Closed-form primitive of `i_{aH1 + bH2} μ` on S³×S³:
/// `(a/2)·α₁∧μ₂ + (b/2)·μ₁∧α₂`, where α_i is the contact form and μ_i the
/// volume form of the i-th factor. Validated by the d-check in tests.
pub fn hopf_pair_primitive(a: f64, b: f64) -> FormField {
    let m = Manifold::Sphere3xSphere3;
    let alpha1 = contact_sym(8, 0);
    let alpha2 = contact_sym(8, 4);
    let mu1 = m.factor_volume_sym(0);
    let mu2 = m.factor_volume_sym(1);
    let sym = alpha1
        .wedge(&mu2)
        .scale(Expr::constant(a / 2.0))
        .add(&mu1.wedge(&alpha2).scale(Expr::constant(b / 2.0)));
    FormField::from_sym(m, &sym, 0.0, format!("alpha_({a},{b})"))
}

// ---- CP2: projective unitary rotations --------------------------------------

/// Vector field on CP2 generated by the anti-Hermitian matrix `gen` acting on
/// homogeneous coordinates. Works in every affine chart.
pub fn pu3_field(name: impl Into<String>, gen: [[Complex64; 3]; 3]) -> VectorField {
    VectorField::stationary(Manifold::CP2, name, move |p| {
        let z = p.cp2_lift();
        let mut w = [Complex64::new(0.0, 0.0); 3];
        for i in 0..3 {
            for j in 0..3 {
                w[i] += gen[i][j] * z[j];
            }
        }
        let k = p.chart as usize;
        let (a, b) = cp2_slots(k);
        // ζ_i = Z_{a_i}/Z_k  ⇒  ζ̇_i = (W_{a_i} - ζ_i W_k) / Z_k.
        let (_, za, zb) = p.cp2_chart_parts();
        let va = (w[a] - za * w[k]) / z[k];
        let vb = (w[b] - zb * w[k]) / z[k];
        vec![va.re, va.im, vb.re, vb.im]
    })
}

fn cp2_slots(k: usize) -> (usize, usize) {
    match k {
        0 => (1, 2),
        1 => (0, 2),
        2 => (0, 1),
        _ => unreachable!(),
    }
}

/// Generator of the rotation of the projective line {Z₂ = 0} about its points
/// [1:1:0] and [1:-1:0], with angular speed `s`; the third homogeneous
/// coordinate is untouched. Divergence-free for the Fubini–Study volume.
pub fn cp2_rotation_generator(s: f64) -> [[Complex64; 3]; 3] {
    let h = Complex64::new(0.0, s / 2.0);
    let zero = Complex64::new(0.0, 0.0);
    [[zero, h, zero], [h, zero, zero], [zero, zero, zero]]
}

pub fn cp2_rotation_field(s: f64) -> VectorField {
    pu3_field(format!("cp2_rot({s})"), cp2_rotation_generator(s))
}

/// Closed-form flow of [`cp2_rotation_field`].
pub fn cp2_rotation_flow(s: f64, p: &Point, t: f64) -> Point {
    let z = p.cp2_lift();
    let (c, sn) = ((s * t / 2.0).cos(), (s * t / 2.0).sin());
    let i = Complex64::new(0.0, 1.0);
    let out = [z[0] * c + i * z[1] * sn, i * z[0] * sn + z[1] * c, z[2]];
    Point::cp2_from_homogeneous(&out)
}

/// Moment map of the PU(3) rotation: `H([Z]) = ½ Z*(i·gen)Z` on unit lifts,
/// satisfying `dH = i_X ω_FS`.
pub fn pu3_moment_map(name: impl Into<String>, gen: [[Complex64; 3]; 3]) -> FormField {
    FormField::from_scalar(Manifold::CP2, name, move |p| {
        let z = p.cp2_lift();
        let mut acc = Complex64::new(0.0, 0.0);
        let i = Complex64::new(0.0, 1.0);
        for r in 0..3 {
            for c in 0..3 {
                acc += z[r].conj() * i * gen[r][c] * z[c];
            }
        }
        0.5 * acc.re
    })
}

// ---- Pointwise solves --------------------------------------------------------

const CONDITION_LIMIT: f64 = 1e12;

/// Solve `ω(X, ·) = dH(·)` on the tangent space at `p`.
pub fn hamiltonian_vector_at(h: &FormField, omega: &FormField, p: &Point) -> Result<Vec<f64>> {
    let m = omega.manifold();
    let frame = m.orthonormal_frame(p);
    let n = frame.len();
    let dh = h.d();
    let mut a = DMatrix::zeros(n, n);
    let mut b = DVector::zeros(n);
    for j in 0..n {
        b[j] = dh.eval(p, &[&frame[j]]);
        for i in 0..n {
            a[(j, i)] = omega.eval(p, &[&frame[i], &frame[j]]);
        }
    }
    let svd = a.svd(true, true);
    let (smax, smin) = singular_range(&svd.singular_values);
    if smin <= 0.0 || smax / smin > CONDITION_LIMIT {
        return Err(Error::SingularSolve {
            point: p.coords.clone(),
            cond: if smin > 0.0 { smax / smin } else { f64::INFINITY },
        });
    }
    let x = svd.solve(&b, 0.0).expect("svd solve");
    Ok(combine_frame(&frame, x.as_slice()))
}

/// The Hamiltonian vector field of `h` with respect to the symplectic form
/// `omega`: the unique field with `dH = i_{X_H} ω`.
///
/// Panics at evaluation points where ω is singular beyond condition 1e12;
/// use [`hamiltonian_vector_at`] for a fallible probe.
pub fn hamiltonian_field(h: &FormField, omega: &FormField, name: impl Into<String>) -> VectorField {
    let (h, omega) = (h.clone(), omega.clone());
    VectorField::stationary(omega.manifold(), name, move |p| {
        hamiltonian_vector_at(&h, &omega, p).expect("nondegenerate symplectic form")
    })
}

/// Solve `α(X) = 1`, `i_X dα = 0` on the tangent space at `p`.
pub fn reeb_vector_at(alpha: &FormField, p: &Point) -> Result<Vec<f64>> {
    let m = alpha.manifold();
    let frame = m.orthonormal_frame(p);
    let n = frame.len();
    let da = alpha.d();
    // Overdetermined consistent system: one pairing row and n interior rows.
    let mut a = DMatrix::zeros(n + 1, n);
    let mut b = DVector::zeros(n + 1);
    for i in 0..n {
        a[(0, i)] = alpha.eval(p, &[&frame[i]]);
    }
    b[0] = 1.0;
    for j in 0..n {
        for i in 0..n {
            a[(j + 1, i)] = da.eval(p, &[&frame[i], &frame[j]]);
        }
    }
    let svd = a.clone().svd(true, true);
    let (smax, smin) = singular_range(&svd.singular_values);
    if smin <= 1e-10 || smax / smin > CONDITION_LIMIT {
        return Err(Error::ContactCondition {
            point: p.coords.clone(),
            value: smin,
        });
    }
    let x = svd.solve(&b, 0.0).expect("svd solve");
    let sol = combine_frame(&frame, x.as_slice());
    // Check the system was consistent (contact condition).
    let resid = (&a * DVector::from_column_slice(x.as_slice()) - &b).norm();
    if resid > 1e-8 {
        return Err(Error::ContactCondition {
            point: p.coords.clone(),
            value: resid,
        });
    }
    Ok(sol)
}

/// The Reeb field of the contact form `alpha`.
///
/// Panics at points violating the contact condition; use
/// [`reeb_vector_at`] for a fallible probe.
pub fn reeb_field(alpha: &FormField, name: impl Into<String>) -> VectorField {
    let alpha = alpha.clone();
    VectorField::stationary(alpha.manifold(), name, move |p| {
        reeb_vector_at(&alpha, p).expect("contact condition")
    })
}

fn singular_range(sv: &nalgebra::DVector<f64>) -> (f64, f64) {
    let mut smax: f64 = 0.0;
    let mut smin = f64::INFINITY;
    for &s in sv.iter() {
        smax = smax.max(s);
        smin = smin.min(s);
    }
    (smax, smin)
}

fn combine_frame(frame: &[Vec<f64>], coeffs: &[f64]) -> Vec<f64> {
    let len = frame[0].len();
    let mut out = vec![0.0; len];
    for (c, f) in coeffs.iter().zip(frame) {
        for (o, fi) in out.iter_mut().zip(f) {
            *o += c * fi;
        }
    }
    out
}

/// Max of `|d(i_X μ)|` on orthonormal frames over the probe set, evaluated by
/// Richardson central differences. Zero (to discretisation error) exactly for
/// μ-preserving fields.
pub fn divergence_residual(x: &VectorField, mu: &FormField, probes: &[Point]) -> f64 {
    let ixmu = x.interior(mu).expect("top form has positive degree");
    let d = numeric_d_richardson(&ixmu, 1e-4);
    let m = mu.manifold();
    let mut worst = 0.0f64;
    for p in probes {
        let frame = m.orthonormal_frame(p);
        let refs: Vec<&[f64]> = frame.iter().map(|v| v.as_slice()).collect();
        worst = worst.max(d.eval(p, &refs).abs());
    }
    worst
}
