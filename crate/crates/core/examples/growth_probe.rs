use linkflow_core::fields::hopf_pair_field;
use linkflow_core::geometry::{Manifold, Point};
use linkflow_core::linking::{average_lk, s3xs3_hopf_chain};
use linkflow_core::shortpaths::ShortPathSystem;
use std::time::Instant;

fn main() {
    let m = Manifold::Sphere3xSphere3;
    let chain = s3xs3_hopf_chain();
    let geo = ShortPathSystem::geodesic_system(m);
    let avoid = |p: &Point| s3xs3_hopf_chain().value(p).norm() < 1e-3;
    let cov = ShortPathSystem::covering_system(m, 2024, 1.5, Some(&avoid)).unwrap();
    for (a, b) in [(1.0, 0.0), (3.0, 1.0), (0.0, 2.0)] {
        let t0 = Instant::now();
        let field = hopf_pair_field(a, b);
        let (g, recs) = average_lk(&field, &chain, &geo, 1000.0, 10_000, 7, 1e-6).unwrap();
        let (c, _) = average_lk(&field, &chain, &cov, 1000.0, 10_000, 7, 1e-6).unwrap();
        let target = 2.0 * (a - b) * std::f64::consts::PI.powi(3);
        let distinct: std::collections::BTreeMap<i64, usize> =
            recs.iter().fold(Default::default(), |mut m, r| {
                *m.entry(r.crossings_flow + r.crossings_closure).or_default() += 1;
                m
            });
        println!(
            "(a,b)=({a},{b}): geo {:.4} ± {:.5}, cov {:.4} ± {:.5}, target {target:.4}, gap {:.4}, bound2sig {:.4}, counts {distinct:?}, {:.0}s",
            g.value, g.stderr, c.value, c.stderr,
            (g.value - c.value).abs(),
            2.0 * (g.stderr + c.stderr),
            t0.elapsed().as_secs_f64()
        );
    }
}
