//! Minimizing geodesics on the model manifolds, with a deterministic
//! cut-locus tie-break.

use num_complex::Complex64;

use super::manifold::Manifold;
use super::point::Point;

const ANTIPODAL_TOL: f64 = 1e-12;

/// A piecewise-geodesic path (finitely many constant-speed arcs).
#[derive(Debug, Clone)]
pub struct Path {
    pub segments: Vec<GeodesicArc>,
    /// Set when any arc needed the cut-locus tie-break rule.
    pub cut_locus_tiebreak: bool,
}

impl Path {
    pub fn single(arc: GeodesicArc, flagged: bool) -> Path {
        Path {
            segments: vec![arc],
            cut_locus_tiebreak: flagged,
        }
    }

    pub fn constant(p: &Point) -> Path {
        Path::single(GeodesicArc::constant(p), false)
    }

    pub fn length(&self) -> f64 {
        self.segments.iter().map(|s| s.length).sum()
    }

    pub fn start(&self) -> Point {
        self.segments.first().expect("nonempty path").eval(0.0)
    }

    pub fn end(&self) -> Point {
        self.segments.last().expect("nonempty path").eval(1.0)
    }

    /// Concatenate, keeping the flag if either part carries it.
    pub fn join(mut self, mut other: Path) -> Path {
        self.segments.append(&mut other.segments);
        self.cut_locus_tiebreak |= other.cut_locus_tiebreak;
        self
    }
}

/// One constant-speed geodesic arc, parametrised by s ∈ [0, 1].
#[derive(Debug, Clone)]
pub struct GeodesicArc {
    pub manifold: Manifold,
    pub length: f64,
    kind: ArcKind,
}

#[derive(Debug, Clone)]
enum ArcKind {
    /// Great-circle arcs in each sphere factor, advanced simultaneously.
    SphereFactors(Vec<FactorArc>),
    TorusLine {
        from: Vec<f64>,
        delta: Vec<f64>,
    },
    Cp2Horizontal {
        zhat: [Complex64; 3],
        dir: [Complex64; 3],
        theta: f64,
    },
}

#[derive(Debug, Clone)]
struct FactorArc {
    offset: usize,
    start: Vec<f64>,
    tangent: Vec<f64>,
    angle: f64,
}

impl GeodesicArc {
    pub fn constant(p: &Point) -> GeodesicArc {
        match p.manifold {
            Manifold::Torus(_) => GeodesicArc {
                manifold: p.manifold,
                length: 0.0,
                kind: ArcKind::TorusLine {
                    from: p.coords.clone(),
                    delta: vec![0.0; p.coords.len()],
                },
            },
            Manifold::CP2 => GeodesicArc {
                manifold: p.manifold,
                length: 0.0,
                kind: ArcKind::Cp2Horizontal {
                    zhat: p.cp2_lift(),
                    dir: [Complex64::new(0.0, 0.0); 3],
                    theta: 0.0,
                },
            },
            _ => {
                let factors = p.manifold.sphere_factors().unwrap();
                let mut arcs = Vec::new();
                let mut offset = 0;
                for &fd in factors {
                    arcs.push(FactorArc {
                        offset,
                        start: p.coords[offset..offset + fd].to_vec(),
                        tangent: vec![0.0; fd],
                        angle: 0.0,
                    });
                    offset += fd;
                }
                GeodesicArc {
                    manifold: p.manifold,
                    length: 0.0,
                    kind: ArcKind::SphereFactors(arcs),
                }
            }
        }
    }

    pub fn eval(&self, s: f64) -> Point {
        match &self.kind {
            ArcKind::SphereFactors(arcs) => {
                let mut coords = vec![0.0; self.manifold.coord_len()];
                for arc in arcs {
                    let (c, sn) = ((arc.angle * s).cos(), (arc.angle * s).sin());
                    for i in 0..arc.start.len() {
                        coords[arc.offset + i] = c * arc.start[i] + sn * arc.tangent[i];
                    }
                }
                Point::raw(self.manifold, 0, coords)
            }
            ArcKind::TorusLine { from, delta } => {
                let coords = from.iter().zip(delta).map(|(f, d)| f + s * d).collect();
                Point::raw(self.manifold, 0, coords)
            }
            ArcKind::Cp2Horizontal { zhat, dir, theta } => {
                let (c, sn) = ((theta * s).cos(), (theta * s).sin());
                let z = [
                    zhat[0] * c + dir[0] * sn,
                    zhat[1] * c + dir[1] * sn,
                    zhat[2] * c + dir[2] * sn,
                ];
                Point::cp2_from_homogeneous(&z)
            }
        }
    }
}

/// The minimizing geodesic from `p` to `q`.
///
/// At the cut locus (antipodal sphere points; CP2 pairs at distance π/2) the
/// initial direction is not unique; the deterministic tie-break picks the
/// lexicographically smallest admissible tangent (spheres) or the canonical
/// phase representative (CP2) and flags the returned path.
pub fn geodesic(p: &Point, q: &Point) -> Path {
    assert_eq!(p.manifold, q.manifold, "points on different manifolds");
    match p.manifold {
        Manifold::Torus(n) => {
            let delta: Vec<f64> = (0..n as usize)
                .map(|i| {
                    let mut d = (q.coords[i] - p.coords[i]).rem_euclid(2.0 * std::f64::consts::PI);
                    if d > std::f64::consts::PI {
                        d -= 2.0 * std::f64::consts::PI;
                    }
                    d
                })
                .collect();
            let length = delta.iter().map(|d| d * d).sum::<f64>().sqrt();
            Path::single(
                GeodesicArc {
                    manifold: p.manifold,
                    length,
                    kind: ArcKind::TorusLine {
                        from: p.coords.clone(),
                        delta,
                    },
                },
                false,
            )
        }
        Manifold::CP2 => {
            let zp = p.cp2_lift();
            let zq = q.cp2_lift();
            let inner: Complex64 = zq.iter().zip(&zp).map(|(a, b)| a * b.conj()).sum();
            let r = inner.norm();
            if r > 1.0 - 1e-14 {
                return Path::constant(p);
            }
            let mut flagged = false;
            let aligned: [Complex64; 3] = if r < 1e-9 {
                // Cut locus: canonical phase — first sizeable homogeneous
                // coordinate of q made real positive.
                flagged = true;
                let j = (0..3).find(|&j| zq[j].norm() > 1e-9).unwrap();
                let phase = zq[j].conj() / zq[j].norm();
                [zq[0] * phase, zq[1] * phase, zq[2] * phase]
            } else {
                let phase = inner.conj() / r;
                [zq[0] * phase, zq[1] * phase, zq[2] * phase]
            };
            // Hermitian-orthogonal part of the aligned endpoint.
            let proj: Complex64 = aligned.iter().zip(&zp).map(|(a, b)| a * b.conj()).sum();
            let mut dir = [Complex64::new(0.0, 0.0); 3];
            let mut norm2 = 0.0;
            for i in 0..3 {
                dir[i] = aligned[i] - zp[i] * proj;
                norm2 += dir[i].norm_sqr();
            }
            let norm = norm2.sqrt();
            for d in dir.iter_mut() {
                *d /= norm;
            }
            let theta = r.clamp(-1.0, 1.0).acos();
            Path::single(
                GeodesicArc {
                    manifold: p.manifold,
                    length: theta,
                    kind: ArcKind::Cp2Horizontal {
                        zhat: zp,
                        dir,
                        theta,
                    },
                },
                flagged,
            )
        }
        _ => {
            let factors = p.manifold.sphere_factors().unwrap();
            let mut arcs = Vec::new();
            let mut flagged = false;
            let mut offset = 0;
            let mut len2 = 0.0;
            for &fd in factors {
                let a = &p.coords[offset..offset + fd];
                let b = &q.coords[offset..offset + fd];
                let (arc, f) = sphere_factor_arc(a, b, offset);
                flagged |= f;
                len2 += arc.angle * arc.angle;
                arcs.push(arc);
                offset += fd;
            }
            Path::single(
                GeodesicArc {
                    manifold: p.manifold,
                    length: len2.sqrt(),
                    kind: ArcKind::SphereFactors(arcs),
                },
                flagged,
            )
        }
    }
}

fn sphere_factor_arc(p: &[f64], q: &[f64], offset: usize) -> (FactorArc, bool) {
    let dot: f64 = p.iter().zip(q).map(|(a, b)| a * b).sum();
    let c = dot.clamp(-1.0, 1.0);
    if c > 1.0 - 1e-15 {
        return (
            FactorArc {
                offset,
                start: p.to_vec(),
                tangent: vec![0.0; p.len()],
                angle: 0.0,
            },
            false,
        );
    }
    let (tangent, flagged) = if 1.0 + c < ANTIPODAL_TOL {
        (lex_smallest_unit_tangent(p), true)
    } else {
        let mut u: Vec<f64> = q.iter().zip(p).map(|(qi, pi)| qi - c * pi).collect();
        let n = u.iter().map(|x| x * x).sum::<f64>().sqrt();
        u.iter_mut().for_each(|x| *x /= n);
        (u, false)
    };
    (
        FactorArc {
            offset,
            start: p.to_vec(),
            tangent,
            angle: c.acos(),
        },
        flagged,
    )
}

/// The lexicographically smallest unit vector orthogonal to `p`:
/// sequentially minimises the leading components over the unit tangent
/// sphere. For the first axis e_k not parallel to `p`, the unique minimiser
/// is the normalised negative projection of e_k.
pub fn lex_smallest_unit_tangent(p: &[f64]) -> Vec<f64> {
    for k in 0..p.len() {
        let mut v = vec![0.0; p.len()];
        v[k] = 1.0;
        let dot = p[k];
        for (vi, pi) in v.iter_mut().zip(p) {
            *vi -= dot * pi;
        }
        let n: f64 = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 1e-12 {
            v.iter_mut().for_each(|x| *x = -*x / n);
            return v;
        }
    }
    unreachable!("p has unit norm, some axis projection is nonzero")
}
