//! Quadrature and Ruelle–Sullivan pairing oracles: the closed-form Hopf
//! integrals and their invariance properties.

use linkflow_core::expr::Expr;
use linkflow_core::fields::*;
use linkflow_core::geometry::{wedge, FormField, Manifold, Point, SymForm};
use linkflow_core::ruelle::*;
use linkflow_core::Error;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;

fn sample_points(m: Manifold, n: usize, seed: u64) -> Vec<Point> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| m.sample_uniform(&mut rng)).collect()
}

#[test]
fn zero_form_integrates_to_zero() {
    let cycle = s3_fiber_cycle();
    let zero = FormField::zero(Manifold::Sphere3, 1);
    assert_eq!(hopf_integral_submanifold(&zero, &cycle).unwrap(), 0.0);
}

#[test]
fn s3xs3_hopf_integral_matches_closed_form() {
    let cycle = s3xs3_pairing_zero_cycle();
    assert!(cycle.min_jacobian_sv(4) > 1e-8, "immersion check");
    for (a, b) in [(1.0, 0.0), (3.0, 1.0), (0.0, 2.0)] {
        let alpha = hopf_pair_primitive(a, b);
        let value = hopf_integral_submanifold(&alpha, &cycle).unwrap();
        let target = 2.0 * (a - b) * PI.powi(3);
        assert!(
            (value - target).abs() <= 1e-6 * target.abs().max(1.0),
            "({a},{b}): {value} vs {target}"
        );
    }
}

#[test]
fn s3_fiber_integral_matches_crossing_rate_times_volume() {
    // For the Hopf field X with round volume: dα = i_X μ has α = α_std/2,
    // ∫_fiber α = π, matching (1/2π)·vol(S³).
    let alpha = contact_form_s3().scale(0.5);
    let mu = Manifold::Sphere3.volume_form();
    let x = hopf_field_s3();
    let probes = sample_points(Manifold::Sphere3, 40, 2);
    assert!(primitive_residual(&x, &alpha, &mu, &probes) < 1e-8);
    let fiber = s3_fiber_cycle();
    let v = hopf_integral_submanifold(&alpha, &fiber).unwrap();
    assert!((v - PI).abs() < 1e-9, "fiber integral {v}");

    // Contact normalisation: μ_contact = α∧dα = 2μ, primitive α_std,
    // integral 2π = (1/2π)·vol_contact.
    let v2 = hopf_integral_submanifold(&contact_form_s3(), &fiber).unwrap();
    assert!((v2 - 2.0 * PI).abs() < 1e-9);
}

#[test]
fn quadrature_refinement_rejects_rough_integrands() {
    // A kinked integrand defeats the two-level agreement rule.
    let m = Manifold::Torus(1);
    let rough = FormField::new(m, 1, "kink", |p, vs| {
        (p.coords[0] - 2.0).abs().sqrt() * vs[0][0]
    });
    let circle = ParametricCycle::new(
        m,
        "circle",
        vec![(0.0, 2.0 * PI)],
        |u| Point::raw(Manifold::Torus(1), 0, vec![u[0]]),
    )
    .with_jacobian(|_| vec![vec![1.0]]);
    match integrate_form_over_cycle(&rough, &circle) {
        Err(Error::QuadratureNonConvergence { prev, last, .. }) => {
            assert!(prev != 0.0 && last != 0.0);
        }
        other => panic!("expected non-convergence, got {other:?}"),
    }
}

// ---- Ruelle–Sullivan pairings -------------------------------------------------

#[test]
fn exact_form_pairs_to_zero_with_closed_payload() {
    // ∫_M dτ ∧ ν = 0 for closed ν on a closed manifold (Stokes).
    let t4 = Manifold::Torus(4);
    let tau = SymForm::one_form(
        4,
        vec![
            Expr::sin(Expr::var(1)),
            Expr::zero(),
            Expr::mul(Expr::cos(Expr::var(0)), Expr::sin(Expr::var(3))),
            Expr::zero(),
        ],
    );
    let omega = FormField::from_sym(t4, &tau, 0.0, "tau").d();
    // ν: a closed 2-form with both harmonic and exact pieces.
    let nu_sym = SymForm::term(4, 0b0011, Expr::one()).add(
        &SymForm::one_form(
            4,
            vec![Expr::zero(), Expr::sin(Expr::var(2)), Expr::zero(), Expr::zero()],
        )
        .d(),
    );
    let nu = FormField::from_sym(t4, &nu_sym, 0.0, "nu");
    let fol = MeasuredFoliation::SmoothForm { nu };
    fol.validate(&sample_points(t4, 10, 3)).unwrap();
    let opts = PairingOptions {
        mc_samples: 40_000,
        seed: 5,
    };
    let (value, stderr) = ruelle_sullivan_eval(&fol, &omega, opts).unwrap();
    assert!(
        value.abs() <= 3.0 * stderr.max(1e-12),
        "Stokes pairing {value} ± {stderr}"
    );
}

#[test]
fn disjointly_supported_bump_only_sees_its_leaf() {
    // ω is a 2-form concentrated near the leaf {z = 1}: the signed leaf sum
    // reduces to +∫_{L1} ω.
    let m = Manifold::CP2;
    let bump = FormField::new(m, 2, "bump", |p, vs| {
        let q = p.cp2_to_chart(0);
        let dz2 = (q.coords[0] - 1.0).powi(2) + q.coords[1].powi(2);
        if dz2 > 0.25 {
            return 0.0;
        }
        let w2 = q.coords[2].powi(2) + q.coords[3].powi(2);
        let amp = (-dz2 / (0.25 - dz2)).exp() * (-w2).exp();
        // w-area component (du ∧ dv in the chart).
        amp * (vs[0][2] * vs[1][3] - vs[0][3] * vs[1][2])
    });
    let leaves = MeasuredFoliation::SignedLeafSum {
        leaves: vec![
            (cp2_leaf_cycle(1.0, CP2_PSI_MAX), 1.0),
            (cp2_leaf_cycle(-1.0, CP2_PSI_MAX), -1.0),
        ],
    };
    let (total, _) = ruelle_sullivan_eval(&leaves, &bump, PairingOptions::default()).unwrap();
    let l1_alone = integrate_form_over_cycle(&bump, &cp2_leaf_cycle(1.0, CP2_PSI_MAX)).unwrap();
    assert!(
        (total - l1_alone.value).abs() < 1e-9,
        "bump leaked to the far leaf: {total} vs {}",
        l1_alone.value
    );
    assert!(total.abs() > 1e-3, "bump integral unexpectedly zero");
}

#[test]
fn cp2_flux_identity_and_primitive_invariance() {
    // lk(X, F, δ₁ - δ₋₁) = ∫_{L1} α - ∫_{L-1} α = ∫_N i_X μ (the flux).
    let s = 1.0;
    let m = Manifold::CP2;
    let x = cp2_rotation_field(s);
    let mu = m.volume_form();
    let omega = m.fs_kahler_form();
    let h = pu3_moment_map("H", cp2_rotation_generator(s));
    let alpha = wedge(&h, &omega).unwrap();
    let probes = sample_points(m, 40, 7);

    let leaves = MeasuredFoliation::SignedLeafSum {
        leaves: vec![
            (cp2_leaf_cycle(1.0, CP2_PSI_MAX), 1.0),
            (cp2_leaf_cycle(-1.0, CP2_PSI_MAX), -1.0),
        ],
    };
    let (lk_value, _) = hopf_integral_foliation(
        &x,
        &leaves,
        &alpha,
        &mu,
        &probes,
        PairingOptions::default(),
    )
    .unwrap();

    let ixmu = x.interior(&mu).unwrap();
    let flux = integrate_form_over_cycle(&ixmu, &cp2_wall_cycle(CP2_PSI_MAX)).unwrap();
    assert!(
        (lk_value - flux.value).abs() < 1e-7,
        "leaf difference {lk_value} vs flux {}",
        flux.value
    );
    // Hand value: s·π/4 with the chain-compatible orientation.
    assert!((flux.value - s * PI / 4.0).abs() < 1e-7, "flux {}", flux.value);

    // Primitive invariance: adding a closed 2-form (here the non-exact ω_FS
    // and an exact piece) leaves the pairing unchanged, because the signed
    // leaf cycle is null-homologous.
    let shifted = alpha.add(&omega.scale(0.05));
    let (v2, _) = ruelle_sullivan_eval(&leaves, &shifted, PairingOptions::default()).unwrap();
    assert!((v2 - lk_value).abs() < 1e-7, "{v2} vs {lk_value}");

    let exact_piece = FormField::new(m, 2, "d(bump)", |p, vs| {
        // d of a compactly supported 1-form, evaluated by closed form:
        // take τ = f du with f = exp(-|ζ|²), dτ = df ∧ du.
        let c = &p.coords;
        let f = (-(c[0] * c[0] + c[1] * c[1] + c[2] * c[2] + c[3] * c[3])).exp();
        let grad = [-2.0 * c[0] * f, -2.0 * c[1] * f, -2.0 * c[2] * f, -2.0 * c[3] * f];
        let df = |v: &[f64]| -> f64 { grad.iter().zip(v).map(|(g, vi)| g * vi).sum() };
        df(vs[0]) * vs[1][2] - df(vs[1]) * vs[0][2]
    });
    let shifted2 = alpha.add(&exact_piece.scale(0.3));
    let (v3, _) = ruelle_sullivan_eval(&leaves, &shifted2, PairingOptions::default()).unwrap();
    assert!((v3 - lk_value).abs() < 1e-6, "{v3} vs {lk_value}");
}

#[test]
fn hopf_integral_foliation_rejects_non_primitives() {
    let m = Manifold::CP2;
    let x = cp2_rotation_field(1.0);
    let mu = m.volume_form();
    let omega = m.fs_kahler_form();
    // ω alone is not a primitive of i_X μ.
    let leaves = MeasuredFoliation::SignedLeafSum {
        leaves: vec![(cp2_leaf_cycle(1.0, CP2_PSI_MAX), 1.0)],
    };
    let probes = sample_points(m, 10, 8);
    assert!(matches!(
        hopf_integral_foliation(&x, &leaves, &omega, &mu, &probes, PairingOptions::default()),
        Err(Error::PrimitiveCheck { .. })
    ));
}

#[test]
fn zero_field_has_zero_hopf_integral() {
    let m = Manifold::CP2;
    let x = VectorField::zero(m);
    let mu = m.volume_form();
    let alpha = FormField::zero(m, 2);
    let leaves = MeasuredFoliation::SignedLeafSum {
        leaves: vec![
            (cp2_leaf_cycle(1.0, CP2_PSI_MAX), 1.0),
            (cp2_leaf_cycle(-1.0, CP2_PSI_MAX), -1.0),
        ],
    };
    let probes = sample_points(m, 5, 9);
    let (v, _) =
        hopf_integral_foliation(&x, &leaves, &alpha, &mu, &probes, PairingOptions::default())
            .unwrap();
    assert_eq!(v, 0.0);
}

#[test]
fn hamiltonian_shift_invariance_on_null_homologous_cycle() {
    // A small round sphere inside a contractible ball of S²×S² is
    // null-homologous: ∫_N ω vanishes and ∫_N 2Hω is H-shift invariant.
    let m = Manifold::Sphere2xSphere2;
    let o1 = m.factor_volume_sym(0);
    let o2 = m.factor_volume_sym(1);
    let omega = FormField::from_sym(m, &o1.add(&o2), 0.0, "omega");
    let h = FormField::from_scalar(m, "height", |p| p.coords[2]);
    let h_shift = FormField::from_scalar(m, "height+c", |p| p.coords[2] + 0.37);

    let rho = 0.4;
    let wiggly = ParametricCycle::new(
        m,
        "small_sphere",
        vec![(0.0, PI), (0.0, 2.0 * PI)],
        move |u| {
            let (th, ph) = (u[0], u[1]);
            // Factor 1 moves on a small circle-of-latitude pattern; factor 2
            // closes the sphere: jointly an embedded S² in a ball.
            let a = [
                (rho * th.sin() * ph.cos()).sin(),
                (rho * th.sin() * ph.sin()).sin(),
                0.0,
            ];
            let b = [(rho * th.cos()).sin(), 0.0, 0.0];
            let p1 = normalize3([1.0 + a[0], a[1], a[2]]);
            let p2 = normalize3([1.0 + b[0], b[1], 0.3 * b[0]]);
            Point::new(m, vec![p1[0], p1[1], p1[2], p2[0], p2[1], p2[2]])
        },
    );
    let int_omega = integrate_form_over_cycle(&omega, &wiggly).unwrap().value;
    assert!(int_omega.abs() < 1e-8, "∫_N ω = {int_omega} should vanish");

    let a1 = hopf_integral_submanifold(&wedge(&h, &omega).unwrap().scale(2.0), &wiggly).unwrap();
    let a2 =
        hopf_integral_submanifold(&wedge(&h_shift, &omega).unwrap().scale(2.0), &wiggly).unwrap();
    assert!((a1 - a2).abs() < 1e-8, "H-shift changed the integral: {a1} vs {a2}");
}

fn normalize3(v: [f64; 3]) -> [f64; 3] {
    let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
    [v[0] / n, v[1] / n, v[2] / n]
}

#[test]
fn monte_carlo_top_form_integral_matches_quadrature() {
    // ∫_{T²} sin²(x) dx∧dy = 2π² via both routes.
    let t2 = Manifold::Torus(2);
    let tau = FormField::from_sym(
        t2,
        &SymForm::term(2, 0b11, Expr::pow(Expr::sin(Expr::var(0)), 2)),
        0.0,
        "sin²x vol",
    );
    let (mc, se) = integrate_top_form_mc(t2, &tau, 60_000, 11);
    let target = 2.0 * PI * PI;
    assert!(
        (mc - target).abs() < 4.0 * se,
        "MC {mc} ± {se} vs {target}"
    );
    assert!(se < 0.05 * target);
}
