//! The model manifolds: round spheres and their products, the complex
//! projective plane with the Fubini–Study metric, and flat tori.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;

use super::point::Point;

/// Volume of the unit round 3-sphere.
pub const VOL_S3: f64 = 2.0 * PI * PI;
/// Volume of the product of two unit round 3-spheres.
pub const VOL_S3XS3: f64 = VOL_S3 * VOL_S3;
/// Volume of the product of two unit round 2-spheres.
pub const VOL_S2XS2: f64 = 16.0 * PI * PI;
/// Fubini–Study volume of the projective plane, normalised as the metric
/// quotient of the unit 5-sphere (sectional curvature in [1, 4]).
pub const VOL_CP2: f64 = PI * PI / 2.0;

/// A model manifold. Carries the chart layout, the Riemannian metric, and the
/// orientation/volume conventions used throughout the crate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Manifold {
    /// Unit 3-sphere in R^4, round metric, global ambient chart.
    Sphere3,
    /// Product of two unit 3-spheres in R^4 x R^4, product metric.
    Sphere3xSphere3,
    /// Product of two unit 2-spheres in R^3 x R^3.
    Sphere2xSphere2,
    /// Complex projective plane, three affine charts, Fubini–Study metric.
    CP2,
    /// Flat n-torus R^n / 2πZ^n with orthonormal angle coordinates.
    Torus(u8),
}

impl Manifold {
    pub fn dim(self) -> usize {
        match self {
            Manifold::Sphere3 => 3,
            Manifold::Sphere3xSphere3 => 6,
            Manifold::Sphere2xSphere2 => 4,
            Manifold::CP2 => 4,
            Manifold::Torus(n) => n as usize,
        }
    }

    /// Length of the coordinate vector of a point (ambient or chart).
    pub fn coord_len(self) -> usize {
        match self {
            Manifold::Sphere3 => 4,
            Manifold::Sphere3xSphere3 => 8,
            Manifold::Sphere2xSphere2 => 6,
            Manifold::CP2 => 4,
            Manifold::Torus(n) => n as usize,
        }
    }

    /// Ambient dimensions of the sphere factors, if this is a sphere product
    /// (or a single sphere).
    pub fn sphere_factors(self) -> Option<&'static [usize]> {
        match self {
            Manifold::Sphere3 => Some(&[4]),
            Manifold::Sphere3xSphere3 => Some(&[4, 4]),
            Manifold::Sphere2xSphere2 => Some(&[3, 3]),
            _ => None,
        }
    }

    pub fn total_volume(self) -> f64 {
        match self {
            Manifold::Sphere3 => VOL_S3,
            Manifold::Sphere3xSphere3 => VOL_S3XS3,
            Manifold::Sphere2xSphere2 => VOL_S2XS2,
            Manifold::CP2 => VOL_CP2,
            Manifold::Torus(n) => (2.0 * PI).powi(i32::from(n)),
        }
    }

    pub fn injectivity_radius(self) -> f64 {
        match self {
            Manifold::Sphere3 | Manifold::Sphere3xSphere3 | Manifold::Sphere2xSphere2 => PI,
            Manifold::CP2 => PI / 2.0,
            Manifold::Torus(_) => PI,
        }
    }

    /// Re-impose the manifold constraint in place (normalise sphere factors,
    /// wrap torus angles). CP2 chart coordinates are unconstrained.
    pub fn project(self, coords: &mut [f64]) {
        match self {
            Manifold::Sphere3 | Manifold::Sphere3xSphere3 | Manifold::Sphere2xSphere2 => {
                let mut offset = 0;
                for &fd in self.sphere_factors().unwrap() {
                    let s = &mut coords[offset..offset + fd];
                    let n = s.iter().map(|x| x * x).sum::<f64>().sqrt();
                    if n > 0.0 {
                        s.iter_mut().for_each(|x| *x /= n);
                    }
                    offset += fd;
                }
            }
            Manifold::Torus(_) => {
                for x in coords.iter_mut() {
                    *x = x.rem_euclid(2.0 * PI);
                }
            }
            Manifold::CP2 => {}
        }
    }

    /// Riemannian inner product of two tangent vectors at `p`.
    pub fn metric(self, p: &Point, u: &[f64], v: &[f64]) -> f64 {
        match self {
            // Embedded spheres and flat tori: the coordinate inner product.
            Manifold::Sphere3
            | Manifold::Sphere3xSphere3
            | Manifold::Sphere2xSphere2
            | Manifold::Torus(_) => u.iter().zip(v).map(|(a, b)| a * b).sum(),
            Manifold::CP2 => {
                let uh = cp2_horizontal_lift(p, u);
                let vh = cp2_horizontal_lift(p, v);
                uh.iter()
                    .zip(&vh)
                    .map(|(a, b)| (a * b.conj()).re)
                    .sum()
            }
        }
    }

    /// Project an arbitrary coordinate vector onto the tangent space at `p`.
    pub fn tangent_project(self, p: &Point, v: &[f64]) -> Vec<f64> {
        match self {
            Manifold::Sphere3 | Manifold::Sphere3xSphere3 | Manifold::Sphere2xSphere2 => {
                let mut out = v.to_vec();
                let mut offset = 0;
                for &fd in self.sphere_factors().unwrap() {
                    let pp = &p.coords[offset..offset + fd];
                    let dot: f64 = pp.iter().zip(&out[offset..offset + fd]).map(|(a, b)| a * b).sum();
                    for i in 0..fd {
                        out[offset + i] -= dot * pp[i];
                    }
                    offset += fd;
                }
                out
            }
            Manifold::Torus(_) | Manifold::CP2 => v.to_vec(),
        }
    }

    /// Positively oriented orthonormal tangent frame at `p`.
    ///
    /// Sphere factors orient by "position vector first" in the ambient space;
    /// CP2 by its complex structure; tori by increasing coordinate order.
    pub fn orthonormal_frame(self, p: &Point) -> Vec<Vec<f64>> {
        match self {
            Manifold::Torus(n) => (0..n as usize)
                .map(|i| {
                    let mut e = vec![0.0; n as usize];
                    e[i] = 1.0;
                    e
                })
                .collect(),
            Manifold::Sphere3 | Manifold::Sphere3xSphere3 | Manifold::Sphere2xSphere2 => {
                let total = self.coord_len();
                let mut frame: Vec<Vec<f64>> = Vec::with_capacity(self.dim());
                let mut offset = 0;
                for &fd in self.sphere_factors().unwrap() {
                    let pp = &p.coords[offset..offset + fd];
                    let factor = sphere_frame(pp);
                    for f in factor {
                        let mut v = vec![0.0; total];
                        v[offset..offset + fd].copy_from_slice(&f);
                        frame.push(v);
                    }
                    offset += fd;
                }
                frame
            }
            Manifold::CP2 => {
                // Gram–Schmidt of the chart basis under the FS metric. Chart
                // coordinates are positively oriented (complex orientation)
                // and Gram–Schmidt preserves orientation.
                let mut frame: Vec<Vec<f64>> = Vec::with_capacity(4);
                for i in 0..4 {
                    let mut v = vec![0.0; 4];
                    v[i] = 1.0;
                    for f in &frame {
                        let c = self.metric(p, &v, f);
                        for (vj, fj) in v.iter_mut().zip(f) {
                            *vj -= c * fj;
                        }
                    }
                    let n = self.metric(p, &v, &v).sqrt();
                    v.iter_mut().for_each(|x| *x /= n);
                    frame.push(v);
                }
                frame
            }
        }
    }

    /// Geodesic distance.
    pub fn distance(self, p: &Point, q: &Point) -> f64 {
        match self {
            Manifold::Sphere3 | Manifold::Sphere3xSphere3 | Manifold::Sphere2xSphere2 => {
                let mut sum = 0.0;
                let mut offset = 0;
                for &fd in self.sphere_factors().unwrap() {
                    let dot: f64 = p.coords[offset..offset + fd]
                        .iter()
                        .zip(&q.coords[offset..offset + fd])
                        .map(|(a, b)| a * b)
                        .sum();
                    let d = dot.clamp(-1.0, 1.0).acos();
                    sum += d * d;
                    offset += fd;
                }
                sum.sqrt()
            }
            Manifold::Torus(n) => {
                let mut sum = 0.0;
                for i in 0..n as usize {
                    let mut d = (p.coords[i] - q.coords[i]).rem_euclid(2.0 * PI);
                    if d > PI {
                        d = 2.0 * PI - d;
                    }
                    sum += d * d;
                }
                sum.sqrt()
            }
            Manifold::CP2 => {
                let zp = p.cp2_lift();
                let zq = q.cp2_lift();
                let inner: Complex64 = zp.iter().zip(&zq).map(|(a, b)| b * a.conj()).sum();
                inner.norm().clamp(-1.0, 1.0).acos()
            }
        }
    }

    /// Sample a point distributed by the normalised volume measure.
    pub fn sample_uniform<R: Rng>(self, rng: &mut R) -> Point {
        match self {
            Manifold::Sphere3 | Manifold::Sphere3xSphere3 | Manifold::Sphere2xSphere2 => {
                let mut coords = vec![0.0; self.coord_len()];
                for x in coords.iter_mut() {
                    *x = gaussian(rng);
                }
                self.project(&mut coords);
                Point::raw(self, 0, coords)
            }
            Manifold::Torus(n) => {
                let coords = (0..n as usize).map(|_| rng.gen::<f64>() * 2.0 * PI).collect();
                Point::raw(self, 0, coords)
            }
            Manifold::CP2 => {
                let z: Vec<Complex64> = (0..3)
                    .map(|_| Complex64::new(gaussian(rng), gaussian(rng)))
                    .collect();
                Point::cp2_from_homogeneous(&[z[0], z[1], z[2]])
            }
        }
    }

    /// Riemannian exponential: follow the geodesic from `p` with initial
    /// velocity `v` (a tangent vector in chart coordinates) for unit time.
    pub fn exp_map(self, p: &Point, v: &[f64]) -> Point {
        match self {
            Manifold::Torus(_) => {
                let mut coords: Vec<f64> = p.coords.iter().zip(v).map(|(x, d)| x + d).collect();
                self.project(&mut coords);
                Point::raw(self, 0, coords)
            }
            Manifold::Sphere3 | Manifold::Sphere3xSphere3 | Manifold::Sphere2xSphere2 => {
                let mut coords = vec![0.0; self.coord_len()];
                let mut offset = 0;
                for &fd in self.sphere_factors().unwrap() {
                    let pp = &p.coords[offset..offset + fd];
                    let vv = &v[offset..offset + fd];
                    let angle: f64 = vv.iter().map(|x| x * x).sum::<f64>().sqrt();
                    if angle < 1e-15 {
                        coords[offset..offset + fd].copy_from_slice(pp);
                    } else {
                        let (c, s) = (angle.cos(), angle.sin());
                        for i in 0..fd {
                            coords[offset + i] = c * pp[i] + s * vv[i] / angle;
                        }
                    }
                    offset += fd;
                }
                Point::raw(self, 0, coords)
            }
            Manifold::CP2 => {
                let zhat = p.cp2_lift();
                let u = cp2_horizontal_lift(p, v);
                let theta: f64 = u.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
                if theta < 1e-15 {
                    return p.clone();
                }
                let (c, s) = (theta.cos(), theta.sin());
                let z = [
                    zhat[0] * c + u[0] * (s / theta),
                    zhat[1] * c + u[1] * (s / theta),
                    zhat[2] * c + u[2] * (s / theta),
                ];
                Point::cp2_from_homogeneous(&z)
            }
        }
    }

    /// Closed-form density of the volume form against the chart coordinate
    /// frame, i.e. μ(e_1, …, e_n) at `p`.
    pub fn volume_density(self, p: &Point) -> f64 {
        match self {
            Manifold::Torus(_) => 1.0,
            Manifold::CP2 => {
                let r2: f64 = p.coords.iter().map(|x| x * x).sum();
                (1.0 + r2).powi(-3)
            }
            // Not a chart frame value for embedded spheres (their charts are
            // ambient); callers use the volume FormField instead.
            _ => unreachable!("volume_density is chart-based; spheres use ambient forms"),
        }
    }
}

/// Orthonormal tangent frame of S^{d-1} at unit vector `p`, positively
/// oriented so that det[p, f_1, …, f_{d-1}] = +1.
fn sphere_frame(p: &[f64]) -> Vec<Vec<f64>> {
    let d = p.len();
    let mut frame: Vec<Vec<f64>> = Vec::with_capacity(d - 1);
    for i in 0..d {
        if frame.len() == d - 1 {
            break;
        }
        let mut v = vec![0.0; d];
        v[i] = 1.0;
        let dot: f64 = p.iter().zip(&v).map(|(a, b)| a * b).sum();
        for (vj, pj) in v.iter_mut().zip(p) {
            *vj -= dot * pj;
        }
        for f in &frame {
            let c: f64 = f.iter().zip(&v).map(|(a, b)| a * b).sum();
            for (vj, fj) in v.iter_mut().zip(f) {
                *vj -= c * fj;
            }
        }
        let n: f64 = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 1e-8 {
            v.iter_mut().for_each(|x| *x /= n);
            frame.push(v);
        }
    }
    // Fix orientation: det[p, frame...] must be positive.
    let mut mat = nalgebra::DMatrix::zeros(d, d);
    for r in 0..d {
        mat[(r, 0)] = p[r];
        for (c, f) in frame.iter().enumerate() {
            mat[(r, c + 1)] = f[r];
        }
    }
    if mat.determinant() < 0.0 {
        if let Some(last) = frame.last_mut() {
            last.iter_mut().for_each(|x| *x = -*x);
        }
    }
    frame
}

/// Horizontal lift of a chart tangent vector at `p` on CP2 to C^3, with
/// respect to the unit-sphere submersion S^5 → CP2.
pub(crate) fn cp2_horizontal_lift(p: &Point, u: &[f64]) -> [Complex64; 3] {
    let (k, za, zb) = p.cp2_chart_parts();
    let u1 = Complex64::new(u[0], u[1]);
    let u2 = Complex64::new(u[2], u[3]);
    // Unnormalised lift Z has 1 in slot k; its chart differential is U.
    let mut z = [Complex64::new(0.0, 0.0); 3];
    let (a, b) = cp2_other_slots(k);
    z[k] = Complex64::new(1.0, 0.0);
    z[a] = za;
    z[b] = zb;
    let mut uamb = [Complex64::new(0.0, 0.0); 3];
    uamb[a] = u1;
    uamb[b] = u2;

    let norm2: f64 = z.iter().map(|c| c.norm_sqr()).sum();
    let norm = norm2.sqrt();
    let zu_re: f64 = z
        .iter()
        .zip(&uamb)
        .map(|(zi, ui)| (ui * zi.conj()).re)
        .sum();
    // d/dt (Z + tU)/|Z + tU| at t = 0.
    let mut v = [Complex64::new(0.0, 0.0); 3];
    for i in 0..3 {
        v[i] = uamb[i] / norm - z[i] * (zu_re / (norm2 * norm));
    }
    let zhat: Vec<Complex64> = z.iter().map(|c| c / norm).collect();
    // Remove the vertical component along i·Ẑ (the circle direction).
    let i_unit = Complex64::new(0.0, 1.0);
    let vert: f64 = v
        .iter()
        .zip(&zhat)
        .map(|(vi, zi)| (vi * (i_unit * zi).conj()).re)
        .sum();
    for i in 0..3 {
        v[i] -= i_unit * zhat[i] * vert;
    }
    v
}

pub(crate) fn cp2_other_slots(k: usize) -> (usize, usize) {
    match k {
        0 => (1, 2),
        1 => (0, 2),
        2 => (0, 1),
        _ => panic!("CP2 chart index out of range"),
    }
}

fn gaussian<R: Rng>(rng: &mut R) -> f64 {
    // Box–Muller; one value per call keeps the stream layout simple.
    loop {
        let u: f64 = rng.gen();
        let v: f64 = rng.gen();
        if u > f64::MIN_POSITIVE {
            return (-2.0 * u.ln()).sqrt() * (2.0 * PI * v).cos();
        }
    }
}
