//! Systems of short paths: a coherent choice of connecting path σ(p, q) for
//! every ordered pair of points, used to close flow segments into loops.
//!
//! Two constructions:
//! * the geodesic system — σ(p, q) is the minimizing geodesic (with the
//!   deterministic cut-locus tie-break);
//! * the covering system — a finite cover by geodesic balls with a basepoint
//!   in each; σ(p, q) travels p → basepoint(p) → basepoint(q) → q along
//!   geodesics. Basepoint assignment takes the smallest ball index containing
//!   the point with a small margin, falling back to the nearest center, so it
//!   is locally constant off a measure-zero set.

use rand::Rng;

use crate::error::{Error, Result};
use crate::fields::VectorField;
use crate::flow::Trajectory;
use crate::geometry::{geodesic, Manifold, Path, Point};
use crate::util::rng_stream;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SystemKind {
    Geodesic,
    Covering,
}

/// A system of short paths on one manifold. Immutable after construction and
/// safe to share across workers.
#[derive(Debug, Clone)]
pub struct ShortPathSystem {
    pub kind: SystemKind,
    manifold: Manifold,
    cover: Option<Cover>,
}

#[derive(Debug, Clone)]
struct Cover {
    centers: Vec<Point>,
    basepoints: Vec<Point>,
    radius: f64,
    tie_guard: f64,
}

/// Margin subtracted from the ball radius in the first-index assignment rule.
const TIE_GUARD: f64 = 1e-6;

/// Rejection margin keeping basepoints away from the chain zero set
/// (measured through the chain's presentation function).
pub const BASEPOINT_CHAIN_GUARD: f64 = 1e-3;

impl ShortPathSystem {
    /// The system of length-minimizing geodesics.
    pub fn geodesic_system(manifold: Manifold) -> ShortPathSystem {
        ShortPathSystem {
            kind: SystemKind::Geodesic,
            manifold,
            cover: None,
        }
    }

    /// Covering-based system. `avoid` rejects basepoints too close to the
    /// active chain (pass the chain's guard predicate); `ball_radius` must be
    /// below the injectivity radius.
    pub fn covering_system(
        manifold: Manifold,
        seed: u64,
        ball_radius: f64,
        avoid: Option<&(dyn Fn(&Point) -> bool + Sync)>,
    ) -> Result<ShortPathSystem> {
        if !(ball_radius > 0.0) || ball_radius >= manifold.injectivity_radius() {
            return Err(Error::CoverConstruction {
                reason: format!(
                    "ball radius {ball_radius} outside (0, {})",
                    manifold.injectivity_radius()
                ),
            });
        }
        // Greedy net: stream probe points, adopt any probe not yet covered
        // at half the ball radius. The resulting centers cover the probe
        // cloud at radius/2, so the balls of full radius cover the manifold
        // with margin; the nearest-center fallback handles stragglers.
        let net_radius = ball_radius / 2.0;
        let mut rng = rng_stream(seed, 0);
        let n_probes = 6000;
        let mut centers: Vec<Point> = Vec::new();
        for _ in 0..n_probes {
            let probe = manifold.sample_uniform(&mut rng);
            let covered = centers
                .iter()
                .any(|c| manifold.distance(c, &probe) < net_radius);
            if !covered {
                centers.push(probe);
            }
        }
        if centers.is_empty() {
            return Err(Error::CoverConstruction {
                reason: "no centers adopted".into(),
            });
        }

        // One basepoint per ball, sampled in the half-radius tangent ball
        // and rejected while it sits too close to the chain.
        let dim = manifold.dim();
        let mut basepoints = Vec::with_capacity(centers.len());
        for (j, c) in centers.iter().enumerate() {
            let mut rng = rng_stream(seed, 1 + j as u64);
            let mut accepted = None;
            for _ in 0..200 {
                let frame = manifold.orthonormal_frame(c);
                let mut v = vec![0.0; manifold.coord_len()];
                let r = net_radius * rng.gen::<f64>().powf(1.0 / dim as f64);
                let dir: Vec<f64> = (0..dim).map(|_| rng.gen::<f64>() - 0.5).collect();
                let norm: f64 = dir.iter().map(|x| x * x).sum::<f64>().sqrt();
                for (k, f) in frame.iter().enumerate() {
                    for (vi, fi) in v.iter_mut().zip(f) {
                        *vi += r * dir[k] / norm * fi;
                    }
                }
                let u = manifold.exp_map(c, &v);
                if avoid.map(|a| a(&u)).unwrap_or(false) {
                    continue;
                }
                accepted = Some(u);
                break;
            }
            match accepted {
                Some(u) => basepoints.push(u),
                None => {
                    return Err(Error::CoverConstruction {
                        reason: format!("could not place basepoint clear of the chain in ball {j}"),
                    })
                }
            }
        }

        Ok(ShortPathSystem {
            kind: SystemKind::Covering,
            manifold,
            cover: Some(Cover {
                centers,
                basepoints,
                radius: ball_radius,
                tie_guard: TIE_GUARD,
            }),
        })
    }

    pub fn manifold(&self) -> Manifold {
        self.manifold
    }

    pub fn ball_count(&self) -> usize {
        self.cover.as_ref().map_or(0, |c| c.centers.len())
    }

    /// Ball index n(x): smallest index whose ball contains `x` with margin,
    /// else the nearest center.
    pub fn ball_assignment(&self, x: &Point) -> usize {
        let cover = self.cover.as_ref().expect("covering system");
        let mut nearest = 0usize;
        let mut best = f64::INFINITY;
        for (j, c) in cover.centers.iter().enumerate() {
            let d = self.manifold.distance(c, x);
            if d < cover.radius - cover.tie_guard {
                return j;
            }
            if d < best {
                best = d;
                nearest = j;
            }
        }
        nearest
    }

    /// The unique path σ(p, q) of the system, from `p` to `q`.
    pub fn connect(&self, p: &Point, q: &Point) -> Path {
        match self.kind {
            SystemKind::Geodesic => geodesic(p, q),
            SystemKind::Covering => {
                let cover = self.cover.as_ref().expect("covering system");
                let np = self.ball_assignment(p);
                let nq = self.ball_assignment(q);
                let first = geodesic(p, &cover.basepoints[np]);
                let last = geodesic(&cover.basepoints[nq], q);
                if np == nq {
                    first.join(last)
                } else {
                    // Connector between basepoints, evaluated lazily; pure
                    // function of the endpoints, so the system stays
                    // deterministic.
                    let mid = geodesic(&cover.basepoints[np], &cover.basepoints[nq]);
                    first.join(mid).join(last)
                }
            }
        }
    }
}

/// A flow segment closed up into a loop: flow part forward in time, then the
/// short path from φ_t(x) back to x.
#[derive(Debug, Clone)]
pub struct ClosedLoop {
    pub flow_part: Trajectory,
    pub closure_part: Path,
    pub basepoint: Point,
    pub horizon: f64,
    pub field: VectorField,
}

/// Close a trajectory with the system's path σ(φ_t(x), x).
pub fn close_loop(traj: &Trajectory, field: &VectorField, sys: &ShortPathSystem) -> ClosedLoop {
    let start = traj.samples.first().expect("nonempty trajectory").1.clone();
    let closure = sys.connect(&traj.end, &start);
    ClosedLoop {
        flow_part: traj.clone(),
        closure_part: closure,
        basepoint: start,
        horizon: traj.t_end,
        field: field.clone(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::hopf_pair_field;
    use crate::flow::integrate;
    use rand::SeedableRng;

    fn rnd_point(m: Manifold, rng: &mut impl Rng) -> Point {
        m.sample_uniform(rng)
    }

    #[test]
    fn sigma_p_p_is_constant() {
        let m = Manifold::Sphere3xSphere3;
        let sys = ShortPathSystem::geodesic_system(m);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let p = rnd_point(m, &mut rng);
        let path = sys.connect(&p, &p);
        assert!(path.length() < 1e-12);
    }

    #[test]
    fn geodesic_closure_length_bounded_by_diameter() {
        // diam(S³×S³) = π√2.
        let m = Manifold::Sphere3xSphere3;
        let sys = ShortPathSystem::geodesic_system(m);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4);
        let diam = std::f64::consts::PI * std::f64::consts::SQRT_2;
        for _ in 0..200 {
            let p = rnd_point(m, &mut rng);
            let q = rnd_point(m, &mut rng);
            let len = sys.connect(&p, &q).length();
            assert!(len <= diam + 1e-9, "length {len} exceeds diameter");
        }
    }

    fn coord_gap(p: &Point, q: &Point) -> f64 {
        p.coords
            .iter()
            .zip(&q.coords)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    #[test]
    fn covering_paths_hit_their_endpoints() {
        let m = Manifold::Sphere3xSphere3;
        let sys = ShortPathSystem::covering_system(m, 9, 1.5, None).unwrap();
        assert!(sys.ball_count() > 10, "cover too coarse");
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        for _ in 0..1000 {
            let p = rnd_point(m, &mut rng);
            let q = rnd_point(m, &mut rng);
            let path = sys.connect(&p, &q);
            let ds = coord_gap(&path.start(), &p);
            let de = coord_gap(&path.end(), &q);
            assert!(ds < 1e-10 && de < 1e-10, "endpoint errors {ds}, {de}");
        }
    }

    #[test]
    fn same_ball_paths_have_two_legs() {
        let m = Manifold::Sphere3;
        let sys = ShortPathSystem::covering_system(m, 2, 1.2, None).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(6);
        // Find a pair assigned to the same ball.
        loop {
            let p = rnd_point(m, &mut rng);
            let q = m.exp_map(&p, &{
                let f = m.orthonormal_frame(&p);
                f[0].iter().map(|x| 0.05 * x).collect::<Vec<_>>()
            });
            if sys.ball_assignment(&p) == sys.ball_assignment(&q) {
                let path = sys.connect(&p, &q);
                assert_eq!(path.segments.len(), 2);
                break;
            }
        }
    }

    #[test]
    fn covering_system_is_seed_deterministic() {
        let m = Manifold::Sphere3;
        let a = ShortPathSystem::covering_system(m, 42, 1.2, None).unwrap();
        let b = ShortPathSystem::covering_system(m, 42, 1.2, None).unwrap();
        assert_eq!(a.ball_count(), b.ball_count());
        let ca = a.cover.as_ref().unwrap();
        let cb = b.cover.as_ref().unwrap();
        for (x, y) in ca.basepoints.iter().zip(&cb.basepoints) {
            assert_eq!(x.coords, y.coords);
        }
        let c = ShortPathSystem::covering_system(m, 43, 1.2, None).unwrap();
        let cc = c.cover.as_ref().unwrap();
        assert_ne!(ca.basepoints[0].coords, cc.basepoints[0].coords);
    }

    #[test]
    fn closing_an_exact_period_orbit_is_degenerate() {
        let field = hopf_pair_field(1.0, 0.0);
        let x0 = Point::new(
            Manifold::Sphere3xSphere3,
            vec![0.3, -0.4, 0.5, 0.2, 0.1, 0.9, -0.2, 0.3],
        );
        let traj = integrate(&field, &x0, 2.0 * std::f64::consts::PI, 1e-12).unwrap();
        let sys = ShortPathSystem::geodesic_system(Manifold::Sphere3xSphere3);
        let lp = close_loop(&traj, &field, &sys);
        assert!(lp.closure_part.length() < 1e-8);
        let m = Manifold::Sphere3xSphere3;
        assert!(m.distance(&lp.closure_part.end(), &lp.basepoint) < 1e-10);
    }
}
