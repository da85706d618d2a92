//! Ergodic consistency: space averages of time averages, closure-path
//! contributions, and horizon refinement.

use linkflow_core::fields::hopf_pair_field;
use linkflow_core::flow::time_average;
use linkflow_core::geometry::Manifold;
use linkflow_core::linking::{asymptotic_lk, average_lk, s3xs3_hopf_chain};
use linkflow_core::shortpaths::ShortPathSystem;
use linkflow_core::util::{mean_stderr, rng_stream};
use rayon::prelude::*;

/// The spatial mean of orbitwise time averages equals the spatial mean of
/// the observable itself (measure preservation), here for f = (Re z₀)² with
/// ∫ f μ / vol = 1/4.
#[test]
fn space_average_of_time_averages_matches_space_average() {
    let m = Manifold::Sphere3xSphere3;
    let field = hopf_pair_field(1.0, 0.0);
    let f = |p: &linkflow_core::Point| p.coords[0] * p.coords[0];
    let n = 1000;
    let t = 1000.0;
    let values: Vec<f64> = (0..n as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = rng_stream(42, i);
            let x0 = m.sample_uniform(&mut rng);
            time_average(f, &field, &x0, t, 1e-7).unwrap()
        })
        .collect();
    let (mean, se) = mean_stderr(&values);
    let target = 0.25;
    assert!(
        (mean - target).abs() / target < 0.02,
        "mean of time averages {mean} ± {se} vs {target}"
    );
}

/// Closure paths contribute a bounded number of crossings per loop, so their
/// share of the count at t = 10³ is far below the flow part's.
#[test]
fn closure_contribution_is_below_one_percent_at_long_horizon() {
    let field = hopf_pair_field(1.0, 0.0);
    let chain = s3xs3_hopf_chain();
    let sys = ShortPathSystem::geodesic_system(Manifold::Sphere3xSphere3);
    let (_, records) = average_lk(&field, &chain, &sys, 1000.0, 50, 99, 1e-7).unwrap();
    let flow: i64 = records.iter().map(|r| r.crossings_flow.abs()).sum();
    let closure: i64 = records.iter().map(|r| r.crossings_closure.abs()).sum();
    assert!(
        (closure as f64) < 0.01 * flow as f64,
        "closure {closure} vs flow {flow}"
    );
}

/// Doubling the horizon changes the estimate by O(1/t): the closure bound.
#[test]
fn horizon_refinement_is_one_over_t() {
    let field = hopf_pair_field(1.0, 0.0);
    let chain = s3xs3_hopf_chain();
    let sys = ShortPathSystem::geodesic_system(Manifold::Sphere3xSphere3);
    let x0 = linkflow_core::Point::new(
        Manifold::Sphere3xSphere3,
        vec![0.3, -0.4, 0.5, 0.2, 0.1, 0.9, -0.2, 0.3],
    );
    let t = 250.0;
    let v1 = asymptotic_lk(&field, &x0, &chain, &sys, t, 1e-9)
        .unwrap()
        .value;
    let v2 = asymptotic_lk(&field, &x0, &chain, &sys, 2.0 * t, 1e-9)
        .unwrap()
        .value;
    assert!(
        (v1 - v2).abs() <= 4.0 / t,
        "estimates {v1} and {v2} differ by more than O(1/t)"
    );
}
