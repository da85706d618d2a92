//! Vector-field constructors and the symplectic/contact pointwise identities.

use linkflow_core::expr::Expr;
use linkflow_core::fields::*;
use linkflow_core::geometry::{
    numeric_d_richardson, wedge, FormField, Manifold, Point, SymForm,
};
use linkflow_core::Error;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn sample_points(m: Manifold, n: usize, seed: u64) -> Vec<Point> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| m.sample_uniform(&mut rng)).collect()
}

// ---- Hopf-type fields --------------------------------------------------------

#[test]
fn hopf_pair_field_values() {
    assert!(hopf_pair_field(0.0, 0.0)
        .eval(&Point::new(
            Manifold::Sphere3xSphere3,
            vec![1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0],
        ))
        .iter()
        .all(|&v| v == 0.0));

    // speed (1, 0) at ((1,0),(1,0)): first factor velocity is i, second 0.
    let v = hopf_pair_field(1.0, 0.0).eval(&Point::new(
        Manifold::Sphere3xSphere3,
        vec![1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0],
    ));
    assert_eq!(v, vec![0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]);

    // Closed-form flow for a quarter period.
    let p = hopf_pair_flow(
        1.0,
        0.0,
        &Point::new(
            Manifold::Sphere3xSphere3,
            vec![1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0],
        ),
        std::f64::consts::FRAC_PI_2,
    );
    let expect = [0.0, 1.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0];
    for (a, b) in p.coords.iter().zip(&expect) {
        assert!((a - b).abs() < 1e-15);
    }
}

#[test]
fn hopf_fields_are_tangent() {
    let m = Manifold::Sphere3xSphere3;
    for p in sample_points(m, 50, 3) {
        let v = hopf_pair_field(1.3, -0.8).eval(&p);
        for f in 0..2 {
            let dot: f64 = (0..4).map(|i| v[4 * f + i] * p.coords[4 * f + i]).sum();
            assert!(dot.abs() < 1e-12, "tangency violation {dot}");
        }
    }
}

#[test]
fn divergence_residuals() {
    // Hopf pair fields preserve the product volume.
    let m = Manifold::Sphere3xSphere3;
    let mu = m.volume_form();
    let probes = sample_points(m, 30, 5);
    let r = divergence_residual(&hopf_pair_field(1.0, std::f64::consts::E), &mu, &probes);
    assert!(r < 1e-8, "hopf pair divergence {r}");

    // Zero field: exactly divergence-free.
    let rz = divergence_residual(&VectorField::zero(m), &mu, &probes);
    assert_eq!(rz, 0.0);

    // The gradient-like field x ∂x on a torus chart has d(i_X μ) = dx∧dy:
    // residual of order one.
    let t2 = Manifold::Torus(2);
    let mu2 = t2.volume_form();
    let x_dx = VectorField::stationary(t2, "x∂x", |p| vec![p.coords[0], 0.0]);
    let probes2: Vec<Point> = sample_points(t2, 20, 6)
        .into_iter()
        // keep clear of the wrap discontinuity of the chart coordinate
        .filter(|p| p.coords[0] > 0.5 && p.coords[0] < 5.5)
        .collect();
    let r1 = divergence_residual(&x_dx, &mu2, &probes2);
    assert!((0.5..2.0).contains(&r1), "expected O(1) residual, got {r1}");
}

// ---- Hamiltonian fields --------------------------------------------------------

#[test]
fn hamiltonian_field_of_constant_is_zero() {
    let t2 = Manifold::Torus(2);
    let omega = t2.volume_form();
    let h = FormField::from_scalar(t2, "c", |_| 4.2);
    let x = hamiltonian_field(&h, &omega, "X_c");
    for p in sample_points(t2, 10, 7) {
        assert!(x.eval(&p).iter().all(|v| v.abs() < 1e-9));
    }
}

#[test]
fn hamiltonian_field_sign_convention_on_flat_chart() {
    // ω = dx∧dy, H = x ⇒ dH = i_X ω forces X = -∂y.
    let t2 = Manifold::Torus(2);
    let omega = t2.volume_form();
    let h = FormField::from_scalar(t2, "x", |p| p.coords[0]);
    let x = hamiltonian_field(&h, &omega, "X_x");
    let p = Point::new(t2, vec![2.0, 3.0]);
    let v = x.eval(&p);
    assert!(v[0].abs() < 1e-10 && (v[1] + 1.0).abs() < 1e-10, "{v:?}");
}

#[test]
fn hamiltonian_defining_equation_residual_on_s2xs2() {
    // 1e3 random points: |i_{X_H} ω - dH| < 1e-10 on frames.
    let m = Manifold::Sphere2xSphere2;
    let omega = s2xs2_symplectic_form();
    let h = FormField::from_scalar(m, "height", |p| p.coords[2]);
    let x = hamiltonian_field(&h, &omega, "X_h");
    let dh = h.d();
    let ixo = x.interior(&omega).unwrap();
    let mut worst = 0.0f64;
    for p in sample_points(m, 1000, 8) {
        let frame = m.orthonormal_frame(&p);
        for v in &frame {
            worst = worst.max((ixo.eval(&p, &[v]) - dh.eval(&p, &[v])).abs());
        }
    }
    assert!(worst < 1e-10, "defining equation residual {worst}");
}

#[test]
fn degenerate_two_form_is_rejected() {
    // On T⁴ the 2-form dx1∧dx2 has a two-dimensional kernel.
    let t4 = Manifold::Torus(4);
    let omega = FormField::from_sym(t4, &SymForm::term(4, 0b0011, Expr::one()), 0.0, "rank2");
    let h = FormField::from_scalar(t4, "x", |p| p.coords[0]);
    let p = Point::new(t4, vec![1.0, 2.0, 3.0, 4.0]);
    match hamiltonian_vector_at(&h, &omega, &p) {
        Err(Error::SingularSolve { .. }) => {}
        other => panic!("expected singular solve, got {other:?}"),
    }
}

// ---- Reeb fields ------------------------------------------------------------------

#[test]
fn reeb_field_of_standard_contact_form_is_the_hopf_field() {
    let alpha = contact_form_s3();
    let reeb = reeb_field(&alpha, "reeb");
    let hopf = hopf_field_s3();
    for p in sample_points(Manifold::Sphere3, 50, 9) {
        let r = reeb.eval(&p);
        let h = hopf.eval(&p);
        for (a, b) in r.iter().zip(&h) {
            assert!((a - b).abs() < 1e-10, "reeb {r:?} vs hopf {h:?}");
        }
    }
}

#[test]
fn reeb_defining_properties() {
    let alpha = contact_form_s3();
    let reeb = reeb_field(&alpha, "reeb");
    let da = alpha.d();
    let m = Manifold::Sphere3;
    for p in sample_points(m, 200, 10) {
        let x = reeb.eval(&p);
        let pairing = alpha.eval(&p, &[&x]);
        assert!((pairing - 1.0).abs() < 1e-12, "alpha(X) = {pairing}");
        let frame = m.orthonormal_frame(&p);
        for v in &frame {
            let ixda = da.eval(&p, &[&x, v]);
            assert!(ixda.abs() < 1e-10, "i_X dalpha = {ixda}");
        }
    }
}

#[test]
fn non_contact_form_is_rejected() {
    // α = dx3 on T³ has dα = 0; the Reeb system is rank degenerate.
    let t3 = Manifold::Torus(3);
    let alpha = FormField::from_sym(t3, &SymForm::term(3, 0b100, Expr::one()), 0.0, "dz");
    let p = Point::new(t3, vec![0.3, 0.6, 0.9]);
    assert!(matches!(
        reeb_vector_at(&alpha, &p),
        Err(Error::ContactCondition { .. })
    ));
}

// ---- Pointwise example identities (acceptance criterion material) ------------------

/// d(nHω^{n-1}) = i_{X_H}(ω^n) on S²×S² (n = 2).
#[test]
fn symplectic_identity_pointwise() {
    let m = Manifold::Sphere2xSphere2;
    let omega = s2xs2_symplectic_form();
    let h = FormField::from_scalar(m, "height", |p| p.coords[2]);
    let x = hamiltonian_field(&h, &omega, "X_h");
    let omega2 = wedge(&omega, &omega).unwrap();
    let lhs_form = wedge(&h, &omega).unwrap().scale(2.0);
    let d_lhs = numeric_d_richardson(&lhs_form, 1e-3);
    let rhs = x.interior(&omega2).unwrap();
    let mut worst = 0.0f64;
    for p in sample_points(m, 1000, 11) {
        let frame = m.orthonormal_frame(&p);
        for tuple in [[0, 1, 2], [0, 1, 3], [0, 2, 3], [1, 2, 3]] {
            let refs: Vec<&[f64]> = tuple.iter().map(|&i| frame[i].as_slice()).collect();
            let r = (d_lhs.eval(&p, &refs) - rhs.eval(&p, &refs)).abs();
            worst = worst.max(r);
        }
    }
    assert!(worst < 1e-8, "symplectic identity residual {worst}");
}

/// On S³ (n = 1): α is a primitive of i_X(α∧dα), i.e. dα = i_X(α∧dα), and
/// the numeric d of α reproduces the closed form.
#[test]
fn contact_identity_pointwise() {
    let m = Manifold::Sphere3;
    let alpha = contact_form_s3();
    let x = reeb_field(&alpha, "reeb");
    let vol_contact = wedge(&alpha, &alpha.d()).unwrap();
    let ix = x.interior(&vol_contact).unwrap();
    let da_closed = alpha.d();
    let da_num = numeric_d_richardson(&alpha, 1e-3);
    let mut worst = 0.0f64;
    for p in sample_points(m, 1000, 12) {
        let frame = m.orthonormal_frame(&p);
        for tuple in [[0, 1], [0, 2], [1, 2]] {
            let refs: Vec<&[f64]> = tuple.iter().map(|&i| frame[i].as_slice()).collect();
            let a = ix.eval(&p, &refs);
            let b = da_closed.eval(&p, &refs);
            let c = da_num.eval(&p, &refs);
            worst = worst.max((a - b).abs()).max((c - b).abs());
        }
    }
    assert!(worst < 1e-8, "contact identity residual {worst}");
}

/// The contact volume α∧dα is twice the round volume on S³.
#[test]
fn contact_volume_normalisation() {
    let m = Manifold::Sphere3;
    let alpha = contact_form_s3();
    let vol_contact = wedge(&alpha, &alpha.d()).unwrap();
    let mu = m.volume_form();
    for p in sample_points(m, 50, 13) {
        let frame = m.orthonormal_frame(&p);
        let refs: Vec<&[f64]> = frame.iter().map(|v| v.as_slice()).collect();
        let ratio = vol_contact.eval(&p, &refs) / mu.eval(&p, &refs);
        assert!((ratio - 2.0).abs() < 1e-12);
    }
}

/// The closed-form primitive of i_{aH1+bH2}μ: exact d-check on tangent frames.
#[test]
fn hopf_pair_primitive_d_check() {
    let m = Manifold::Sphere3xSphere3;
    let mu = m.volume_form();
    for (a, b) in [(1.0, 0.0), (3.0, 1.0), (0.0, 2.0), (-1.4, 0.7)] {
        let alpha = hopf_pair_primitive(a, b);
        let x = hopf_pair_field(a, b);
        let da = alpha.d();
        let ixmu = x.interior(&mu).unwrap();
        let mut worst = 0.0f64;
        for p in sample_points(m, 60, 14) {
            let frame = m.orthonormal_frame(&p);
            for start in 0..2 {
                let tuple: Vec<&[f64]> = (0..5).map(|i| frame[start + i].as_slice()).collect();
                worst = worst.max((da.eval(&p, &tuple) - ixmu.eval(&p, &tuple)).abs());
            }
        }
        assert!(worst < 1e-12, "primitive d-check ({a},{b}): {worst}");
    }
}

/// Product symplectic form on S²×S²: the sum of the factor area forms.
fn s2xs2_symplectic_form() -> FormField {
    let m = Manifold::Sphere2xSphere2;
    let o1 = m.factor_volume_sym(0);
    let o2 = m.factor_volume_sym(1);
    FormField::from_sym(m, &o1.add(&o2), 0.0, "omega")
}

#[test]
fn moment_map_generates_cp2_rotation() {
    let s = 1.3;
    let x = cp2_rotation_field(s);
    let omega = Manifold::CP2.fs_kahler_form();
    let h = pu3_moment_map("H", cp2_rotation_generator(s));
    let dh = h.d();
    let ixo = x.interior(&omega).unwrap();
    let mut worst = 0.0f64;
    for p in sample_points(Manifold::CP2, 200, 15) {
        let frame = Manifold::CP2.orthonormal_frame(&p);
        for v in &frame {
            worst = worst.max((dh.eval(&p, &[v]) - ixo.eval(&p, &[v])).abs());
        }
    }
    assert!(worst < 1e-10, "moment map residual {worst}");
}

#[test]
fn cp2_rotation_is_divergence_free_and_matches_closed_flow() {
    let s = 0.9;
    let field = cp2_rotation_field(s);
    let mu = Manifold::CP2.volume_form();
    let probes = sample_points(Manifold::CP2, 40, 16);
    assert!(divergence_residual(&field, &mu, &probes) < 1e-8);

    let x0 = probes[0].clone();
    let t = 11.0;
    let traj = linkflow_core::flow::integrate(&field, &x0, t, 1e-11).unwrap();
    let exact = cp2_rotation_flow(s, &x0, t);
    let d = Manifold::CP2.distance(&traj.end, &exact);
    assert!(d < 1e-8, "flow deviation {d}");
}
