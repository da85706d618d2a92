//! Experiment runners: each executes one named experiment, writes its
//! artifacts (per-sample CSV, summary JSON, optional plot), and returns the
//! summary.

use std::f64::consts::PI;
use std::path::Path;
use std::time::Instant;

use anyhow::Context;
use serde_json::json;

use linkflow_core::fields::*;
use linkflow_core::geometry::{numeric_d_richardson, wedge, FormField, Manifold, Point};
use linkflow_core::godbillon::{family_report, family_wavy, FoliationFamily};
use linkflow_core::hodge::{fundl_residual_with, linking_kernel, FourierForm};
use linkflow_core::linking::{
    average_lk, cp2_segment_chain, running_asymptotic_lk, s3xs3_hopf_chain, LinkingEstimate,
    PhaseChain,
};
use linkflow_core::records::{SampleRecord, Summary, SUMMARY_SCHEMA_VERSION};
use linkflow_core::ruelle::*;
use linkflow_core::shortpaths::ShortPathSystem;
use linkflow_core::util::rng_stream;

use crate::config::{Experiment, ExperimentConfig, FamilySpec};
use crate::plot::running_average_png;

pub fn run(cfg: &ExperimentConfig) -> anyhow::Result<Summary> {
    std::fs::create_dir_all(&cfg.out_dir)
        .with_context(|| format!("creating {}", cfg.out_dir.display()))?;
    let started = Instant::now();
    let mut summary = match cfg.experiment {
        Experiment::S3xs3Linking => s3xs3_linking(cfg)?,
        Experiment::Cp2Flux => cp2_flux(cfg)?,
        Experiment::HodgeSelftest => hodge_selftest(cfg)?,
        Experiment::GvFamily => gv_family(cfg)?,
        Experiment::IdentitySuite => identity_suite(cfg)?,
    };
    summary.schema_version = SUMMARY_SCHEMA_VERSION;
    summary.experiment = cfg.experiment.name().to_string();
    summary.seed = cfg.seed;
    summary.elapsed_sec = started.elapsed().as_secs_f64();
    let path = cfg.out_dir.join("summary.json");
    std::fs::write(&path, serde_json::to_string_pretty(&summary)?)
        .with_context(|| format!("writing {}", path.display()))?;
    Ok(summary)
}

fn empty_summary() -> Summary {
    Summary {
        schema_version: SUMMARY_SCHEMA_VERSION,
        experiment: String::new(),
        seed: 0,
        params: json!({}),
        estimate: 0.0,
        stderr: 0.0,
        target: None,
        tolerance: None,
        pass: false,
        elapsed_sec: 0.0,
        details: json!({}),
    }
}

/// CSV columns (stable): index, start (space-separated chart coordinates),
/// crossings_flow, crossings_closure, horizon, value.
fn write_sample_csv(path: &Path, records: &[SampleRecord]) -> anyhow::Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([
        "index",
        "start",
        "crossings_flow",
        "crossings_closure",
        "horizon",
        "value",
    ])?;
    for r in records {
        let start = r
            .start
            .iter()
            .map(|x| format!("{x:.17e}"))
            .collect::<Vec<_>>()
            .join(" ");
        w.write_record([
            r.index.to_string(),
            start,
            r.crossings_flow.to_string(),
            r.crossings_closure.to_string(),
            format!("{:.17e}", r.horizon),
            format!("{:.17e}", r.value),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn short_path_system(
    cfg: &ExperimentConfig,
    manifold: Manifold,
    chain: &PhaseChain,
) -> anyhow::Result<ShortPathSystem> {
    match cfg.params.short_paths.as_deref().unwrap_or("geodesic") {
        "geodesic" => Ok(ShortPathSystem::geodesic_system(manifold)),
        "covering" => {
            let radius = cfg
                .params
                .ball_radius
                .unwrap_or(0.48 * manifold.injectivity_radius());
            let chain = chain.clone();
            let avoid = move |p: &Point| chain.value(p).norm() < 1e-3;
            Ok(ShortPathSystem::covering_system(
                manifold,
                cfg.seed ^ 0x5353,
                radius,
                Some(&avoid),
            )?)
        }
        other => anyhow::bail!("unknown short-path system {other:?}"),
    }
}

fn linking_run(
    cfg: &ExperimentConfig,
    field: &VectorField,
    chain: &PhaseChain,
    t_end: f64,
    n_samples: usize,
    tol: f64,
    target: f64,
    rel_tolerance: f64,
) -> anyhow::Result<(Summary, LinkingEstimate)> {
    let manifold = field.manifold();
    let sys = short_path_system(cfg, manifold, chain)?;
    let (est, records) =
        average_lk(field, chain, &sys, t_end, n_samples, cfg.seed, tol)?;
    write_sample_csv(&cfg.out_dir.join("samples.csv"), &records)?;

    if cfg.plot {
        let mut traces = Vec::new();
        for k in 0..4u64 {
            let mut rng = rng_stream(cfg.seed, 1_000_000 + k);
            let x0 = manifold.sample_uniform(&mut rng);
            if chain.value(&x0).norm() < 1e-3 {
                continue;
            }
            traces.push(running_asymptotic_lk(
                field, &x0, chain, &sys, t_end, tol, 120,
            )?);
        }
        running_average_png(
            &cfg.out_dir.join("running_average.png"),
            &traces,
            target / manifold.total_volume(),
        )?;
    }

    let pass = if target != 0.0 {
        (est.value - target).abs() <= rel_tolerance * target.abs()
    } else {
        est.value == 0.0
    };
    let mut s = empty_summary();
    s.estimate = est.value;
    s.stderr = est.stderr;
    s.target = Some(target);
    s.tolerance = Some(rel_tolerance);
    s.pass = pass;
    s.details = json!({
        "samples": est.samples,
        "horizon": est.horizon_t,
        "crossings_flow_total": est.crossings_flow,
        "crossings_closure_total": est.crossings_closure,
        "short_paths": cfg.params.short_paths.clone().unwrap_or_else(|| "geodesic".into()),
    });
    Ok((s, est))
}

fn s3xs3_linking(cfg: &ExperimentConfig) -> anyhow::Result<Summary> {
    let a = cfg.params.a.unwrap_or(1.0);
    let b = cfg.params.b.unwrap_or(0.0);
    let t_end = cfg.params.t_end.unwrap_or(1e3);
    let n = cfg.params.n_samples.unwrap_or(10_000);
    let tol = cfg.params.tol.unwrap_or(1e-6);
    let rel = cfg.params.rel_tolerance.unwrap_or(0.02);
    let field = hopf_pair_field(a, b);
    let chain = s3xs3_hopf_chain();
    let target = 2.0 * (a - b) * PI.powi(3);
    let (mut summary, _) = linking_run(cfg, &field, &chain, t_end, n, tol, target, rel)?;

    // Cohomological cross-check: the quadrature of the closed-form primitive.
    let quad = hopf_integral_submanifold(&hopf_pair_primitive(a, b), &s3xs3_pairing_zero_cycle())?;
    summary.params = json!({
        "a": a, "b": b, "t_end": t_end, "n_samples": n, "tol": tol,
    });
    summary.details["hopf_integral_quadrature"] = json!(quad);
    summary.details["quadrature_rel_error"] =
        json!((quad - target).abs() / target.abs().max(1.0));
    Ok(summary)
}

fn cp2_flux(cfg: &ExperimentConfig) -> anyhow::Result<Summary> {
    let speed = cfg.params.speed.unwrap_or(1.0);
    let t_end = cfg.params.t_end.unwrap_or(300.0);
    let n = cfg.params.n_samples.unwrap_or(400);
    let tol = cfg.params.tol.unwrap_or(1e-8);
    let rel = cfg.params.rel_tolerance.unwrap_or(0.05);
    let field = cp2_rotation_field(speed);
    let chain = cp2_segment_chain();
    let mu = Manifold::CP2.volume_form();
    let ixmu = field.interior(&mu)?;
    let flux = integrate_form_over_cycle(&ixmu, &cp2_wall_cycle(CP2_PSI_MAX))?;
    let (mut summary, _) = linking_run(cfg, &field, &chain, t_end, n, tol, flux.value, rel)?;
    summary.params = json!({
        "speed": speed, "t_end": t_end, "n_samples": n, "tol": tol,
    });
    summary.details["flux_refinement_trace"] = json!(flux.trace);
    Ok(summary)
}

fn hodge_selftest(cfg: &ExperimentConfig) -> anyhow::Result<Summary> {
    let band = cfg.params.band_limit.unwrap_or(8);
    let n_forms = cfg.params.n_forms.unwrap_or(100);
    let mut worst_fundl = 0.0f64;
    let mut worst_dg = 0.0f64;
    let mut worst_hg = 0.0f64;
    for n in [2usize, 3] {
        let kernel = linking_kernel(n, band);
        let mut rng = rng_stream(cfg.seed, n as u64);
        for degree in 1..n {
            for _ in 0..n_forms.div_ceil(3) {
                let a = FourierForm::random_real(n, degree, band, &mut rng);
                worst_fundl = worst_fundl.max(fundl_residual_with(&kernel, &a));
                let dg = a
                    .greens_operator()
                    .laplacian()
                    .add(&a.harmonic_projection())
                    .sub(&a);
                worst_dg = worst_dg.max(dg.sup_coeff());
                worst_hg = worst_hg.max(a.greens_operator().harmonic_projection().sup_coeff());
            }
        }
    }
    let pass = worst_fundl < 1e-10 && worst_dg < 1e-13 && worst_hg < 1e-13;
    let mut s = empty_summary();
    s.params = json!({ "band_limit": band, "n_forms": n_forms });
    s.estimate = worst_fundl;
    s.target = Some(0.0);
    s.tolerance = Some(1e-10);
    s.pass = pass;
    s.details = json!({
        "fundl_residual_max": worst_fundl,
        "delta_g_identity_max": worst_dg,
        "hg_residual_max": worst_hg,
    });
    Ok(s)
}

fn family_from_spec(spec: &FamilySpec) -> anyhow::Result<FoliationFamily> {
    let alpha: Vec<&str> = spec.alpha.iter().map(String::as_str).collect();
    let v: Vec<&str> = spec.transversal.iter().map(String::as_str).collect();
    let lo = spec.probe_lo.clone().unwrap_or_else(|| vec![0.0; 4]);
    let hi = spec
        .probe_hi
        .clone()
        .unwrap_or_else(|| vec![2.0 * PI; 4]);
    anyhow::ensure!(lo.len() == 4 && hi.len() == 4, "probe box needs 4 bounds");
    Ok(FoliationFamily::from_expressions(
        spec.name.clone().unwrap_or_else(|| "config-family".into()),
        Manifold::Torus(4),
        &alpha,
        &v,
        lo,
        hi,
    )?)
}

fn gv_family(cfg: &ExperimentConfig) -> anyhow::Result<Summary> {
    let fam = match &cfg.family {
        Some(spec) => family_from_spec(spec)?,
        None => family_wavy(),
    };
    let t = cfg.params.family_time.unwrap_or(0.25);
    let probes = cfg.params.probe_count.unwrap_or(128);
    let report = family_report(&fam, t, probes, cfg.params.grid)?;
    let pass = report.beta_residual < 1e-8
        && report.gv_closedness < 1e-7
        && report.tgv_closedness < 1e-7
        && report.dbeta_wedge_dbeta < 1e-9
        && report.eq_alt_residual < 1e-5
        && report.derived_divergence_residual < 1e-7;
    let mut s = empty_summary();
    s.params = json!({ "family": fam.name, "t": t, "probe_count": probes, "grid": cfg.params.grid });
    s.estimate = report.tgv_integral.unwrap_or(0.0);
    s.pass = pass;
    s.details = serde_json::to_value(&report)?;
    Ok(s)
}

fn identity_suite(cfg: &ExperimentConfig) -> anyhow::Result<Summary> {
    let n_points = cfg.params.n_points.unwrap_or(1000);

    // Symplectic identity on S²×S².
    let m = Manifold::Sphere2xSphere2;
    let omega = {
        let o1 = m.factor_volume_sym(0);
        let o2 = m.factor_volume_sym(1);
        FormField::from_sym(m, &o1.add(&o2), 0.0, "omega")
    };
    let h = FormField::from_scalar(m, "height", |p| p.coords[2]);
    let x = hamiltonian_field(&h, &omega, "X_h");
    let omega2 = wedge(&omega, &omega)?;
    let d_lhs = numeric_d_richardson(&wedge(&h, &omega)?.scale(2.0), 1e-3);
    let rhs = x.interior(&omega2)?;
    let mut rng = rng_stream(cfg.seed, 1);
    let mut symplectic = 0.0f64;
    for _ in 0..n_points {
        let p = m.sample_uniform(&mut rng);
        let frame = m.orthonormal_frame(&p);
        let refs: Vec<&[f64]> = frame[..3].iter().map(|v| v.as_slice()).collect();
        symplectic = symplectic.max((d_lhs.eval(&p, &refs) - rhs.eval(&p, &refs)).abs());
    }

    // Contact identity on S³.
    let s3 = Manifold::Sphere3;
    let alpha = contact_form_s3();
    let reeb = reeb_field(&alpha, "reeb");
    let lhs_num = numeric_d_richardson(&alpha, 1e-3);
    let rhs_contact = reeb.interior(&wedge(&alpha, &alpha.d())?)?;
    let mut contact = 0.0f64;
    for _ in 0..n_points {
        let p = s3.sample_uniform(&mut rng);
        let frame = s3.orthonormal_frame(&p);
        for tuple in [[0, 1], [0, 2], [1, 2]] {
            let refs: Vec<&[f64]> = tuple.iter().map(|&i| frame[i].as_slice()).collect();
            contact =
                contact.max((lhs_num.eval(&p, &refs) - rhs_contact.eval(&p, &refs)).abs());
        }
    }

    // Moment map and closed-form primitive d-checks.
    let cp2 = Manifold::CP2;
    let speed = cfg.params.speed.unwrap_or(1.0);
    let field = cp2_rotation_field(speed);
    let hmm = pu3_moment_map("H", cp2_rotation_generator(speed));
    let omega_fs = cp2.fs_kahler_form();
    let dh = hmm.d();
    let ixo = field.interior(&omega_fs)?;
    let mut moment = 0.0f64;
    for _ in 0..(n_points / 4).max(50) {
        let p = cp2.sample_uniform(&mut rng);
        let frame = cp2.orthonormal_frame(&p);
        for v in &frame {
            moment = moment.max((dh.eval(&p, &[v]) - ixo.eval(&p, &[v])).abs());
        }
    }

    let s3x = Manifold::Sphere3xSphere3;
    let prim = hopf_pair_primitive(1.0, 0.0);
    let da = prim.d();
    let ixmu = hopf_pair_field(1.0, 0.0).interior(&s3x.volume_form())?;
    let mut primitive = 0.0f64;
    for _ in 0..(n_points / 10).max(30) {
        let p = s3x.sample_uniform(&mut rng);
        let frame = s3x.orthonormal_frame(&p);
        let tuple: Vec<&[f64]> = frame[..5].iter().map(|v| v.as_slice()).collect();
        primitive = primitive.max((da.eval(&p, &tuple) - ixmu.eval(&p, &tuple)).abs());
    }

    let worst = symplectic.max(contact).max(moment).max(primitive);
    let mut s = empty_summary();
    s.params = json!({ "n_points": n_points });
    s.estimate = worst;
    s.target = Some(0.0);
    s.tolerance = Some(1e-8);
    s.pass = worst < 1e-8;
    s.details = json!({
        "symplectic_residual": symplectic,
        "contact_residual": contact,
        "moment_map_residual": moment,
        "primitive_d_check": primitive,
    });
    Ok(s)
}

/// Quick built-in verification: a reduced Fourier-identity pass, the
/// pointwise identity suite, and a short ensemble run. Seconds, not minutes.
pub fn selftest() -> anyhow::Result<bool> {
    let mut ok = true;

    let kernel = linking_kernel(2, 4);
    let mut rng = rng_stream(1, 1);
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let a = FourierForm::random_real(2, 1, 4, &mut rng);
        worst = worst.max(fundl_residual_with(&kernel, &a));
    }
    let pass = worst < 1e-10;
    ok &= pass;
    println!(
        "selftest hodge (T², band 4, 20 forms): max residual {worst:.2e} — {}",
        if pass { "pass" } else { "FAIL" }
    );

    let cfg = ExperimentConfig {
        version: 1,
        experiment: Experiment::IdentitySuite,
        seed: 1,
        out_dir: std::env::temp_dir().join("linkflow-selftest"),
        plot: false,
        params: crate::config::Params {
            n_points: Some(200),
            ..Default::default()
        },
        family: None,
    };
    std::fs::create_dir_all(&cfg.out_dir)?;
    let s = identity_suite(&cfg)?;
    ok &= s.pass;
    println!(
        "selftest identities (200 points): worst residual {:.2e} — {}",
        s.estimate,
        if s.pass { "pass" } else { "FAIL" }
    );

    let field = hopf_pair_field(1.0, 0.0);
    let chain = s3xs3_hopf_chain();
    let sys = ShortPathSystem::geodesic_system(Manifold::Sphere3xSphere3);
    let (est, _) = average_lk(&field, &chain, &sys, 100.0, 50, 3, 1e-7)?;
    let target = 2.0 * PI.powi(3);
    let pass = (est.value - target).abs() / target < 0.05;
    ok &= pass;
    println!(
        "selftest linking (50 samples, t=100): {:.3} vs {target:.3} — {}",
        est.value,
        if pass { "pass" } else { "FAIL" }
    );
    Ok(ok)
}
