//! Chart-coordinate points.

use num_complex::Complex64;

use super::manifold::{cp2_other_slots, Manifold};

/// A point on a model manifold, as chart coordinates.
///
/// Embedded spheres use their ambient coordinates (chart 0 only); CP2 uses one
/// of three affine charts; tori use angle coordinates. `coords` may be
/// slightly off the constraint set during numerical work — integrators
/// reproject after every step.
#[derive(Debug, Clone, PartialEq)]
pub struct Point {
    pub manifold: Manifold,
    pub chart: u8,
    pub coords: Vec<f64>,
}

impl Point {
    /// A point in chart 0, reprojected onto the manifold.
    pub fn new(manifold: Manifold, coords: Vec<f64>) -> Point {
        assert_eq!(coords.len(), manifold.coord_len(), "coordinate length");
        let mut coords = coords;
        manifold.project(&mut coords);
        Point {
            manifold,
            chart: 0,
            coords,
        }
    }

    /// A point taken as-is (no projection). Used for finite-difference probe
    /// points that deliberately sit off the manifold, and for samplers whose
    /// output already satisfies the constraint.
    pub fn raw(manifold: Manifold, chart: u8, coords: Vec<f64>) -> Point {
        Point {
            manifold,
            chart,
            coords,
        }
    }

    /// The raw point `self + h·v` in the same chart.
    pub fn offset(&self, v: &[f64], h: f64) -> Point {
        let coords = self
            .coords
            .iter()
            .zip(v)
            .map(|(x, d)| x + h * d)
            .collect();
        Point::raw(self.manifold, self.chart, coords)
    }

    /// Max deviation from the manifold constraint (0 for tori and CP2).
    pub fn constraint_violation(&self) -> f64 {
        match self.manifold.sphere_factors() {
            Some(factors) => {
                let mut worst = 0.0f64;
                let mut offset = 0;
                for &fd in factors {
                    let n: f64 = self.coords[offset..offset + fd]
                        .iter()
                        .map(|x| x * x)
                        .sum::<f64>()
                        .sqrt();
                    worst = worst.max((n - 1.0).abs());
                    offset += fd;
                }
                worst
            }
            None => 0.0,
        }
    }

    // ---- CP2 chart handling -------------------------------------------------

    /// Chart slot and the two complex chart coordinates.
    pub fn cp2_chart_parts(&self) -> (usize, Complex64, Complex64) {
        debug_assert_eq!(self.manifold, Manifold::CP2);
        (
            self.chart as usize,
            Complex64::new(self.coords[0], self.coords[1]),
            Complex64::new(self.coords[2], self.coords[3]),
        )
    }

    /// Unit homogeneous representative in C^3.
    pub fn cp2_lift(&self) -> [Complex64; 3] {
        let (k, za, zb) = self.cp2_chart_parts();
        let (a, b) = cp2_other_slots(k);
        let mut z = [Complex64::new(0.0, 0.0); 3];
        z[k] = Complex64::new(1.0, 0.0);
        z[a] = za;
        z[b] = zb;
        let norm: f64 = z.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        for c in z.iter_mut() {
            *c /= norm;
        }
        z
    }

    /// Point from homogeneous coordinates, in the chart where the pivot
    /// coordinate has the largest modulus.
    pub fn cp2_from_homogeneous(z: &[Complex64; 3]) -> Point {
        let k = (0..3)
            .max_by(|&i, &j| z[i].norm_sqr().partial_cmp(&z[j].norm_sqr()).unwrap())
            .unwrap();
        Self::cp2_in_chart(z, k)
    }

    /// Point from homogeneous coordinates in a specific chart.
    pub fn cp2_in_chart(z: &[Complex64; 3], k: usize) -> Point {
        let (a, b) = cp2_other_slots(k);
        let za = z[a] / z[k];
        let zb = z[b] / z[k];
        Point::raw(
            Manifold::CP2,
            k as u8,
            vec![za.re, za.im, zb.re, zb.im],
        )
    }

    /// Re-express this CP2 point in chart `k`.
    pub fn cp2_to_chart(&self, k: usize) -> Point {
        let z = self.cp2_lift();
        Self::cp2_in_chart(&z, k)
    }

    /// True when the working chart has become ill-conditioned.
    pub fn cp2_needs_chart_switch(&self) -> bool {
        self.manifold == Manifold::CP2
            && self.coords.iter().map(|x| x.abs()).fold(0.0, f64::max) > 2.0
    }

    /// Move to the best-conditioned chart (largest homogeneous pivot).
    pub fn cp2_best_chart(&self) -> Point {
        let z = self.cp2_lift();
        Point::cp2_from_homogeneous(&z)
    }
}
