//! Trajectory integration and ergodic time averages.
//!
//! The integrator is an adaptive Dormand–Prince 5(4) pair with the standard
//! quartic dense output. After every accepted step the state is reprojected
//! onto the manifold (sphere factors renormalised), and CP2 states switch to
//! the best-conditioned affine chart when coordinates grow. Event detection
//! (crossing counting) consumes the dense output through a streaming
//! observer, so long horizons never materialise full trajectories.

use crate::error::{Error, Result};
use crate::fields::VectorField;
use crate::geometry::{Manifold, Point};
use crate::util::gauss_legendre;

/// Default integrator tolerance.
pub const DEFAULT_TOL: f64 = 1e-10;

const MAX_STORED_SAMPLES: usize = 2048;

/// A solved flow line: subsampled states plus the integration metadata.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub samples: Vec<(f64, Point)>,
    pub field_name: String,
    pub t_end: f64,
    pub tol: f64,
    pub steps: usize,
    pub end: Point,
}

/// One accepted step's dense output on [t0, t0 + h], in a fixed chart.
pub struct DenseStep<'a> {
    pub t0: f64,
    pub h: f64,
    pub chart: u8,
    pub manifold: Manifold,
    rcont: &'a [Vec<f64>; 5],
}

impl DenseStep<'_> {
    /// State at `t0 + theta·h` for `theta` in [0, 1].
    pub fn eval(&self, theta: f64) -> Point {
        let n = self.rcont[0].len();
        let th1 = 1.0 - theta;
        let mut y = vec![0.0; n];
        for i in 0..n {
            y[i] = self.rcont[0][i]
                + theta
                    * (self.rcont[1][i]
                        + th1
                            * (self.rcont[2][i]
                                + theta * (self.rcont[3][i] + th1 * self.rcont[4][i])));
        }
        Point::raw(self.manifold, self.chart, y)
    }

    pub fn t_at(&self, theta: f64) -> f64 {
        self.t0 + theta * self.h
    }
}

// Dormand–Prince 5(4) coefficients.
const A: [[f64; 6]; 6] = [
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
const C: [f64; 6] = [1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
// Difference between the 5th-order weights and the embedded 4th-order ones.
const E: [f64; 7] = [
    35.0 / 384.0 - 5179.0 / 57600.0,
    0.0,
    500.0 / 1113.0 - 7571.0 / 16695.0,
    125.0 / 192.0 - 393.0 / 640.0,
    -2187.0 / 6784.0 + 92097.0 / 339200.0,
    11.0 / 84.0 - 187.0 / 2100.0,
    -1.0 / 40.0,
];
// Dense-output quartic coefficients.
const D: [f64; 7] = [
    -12715105075.0 / 11282082432.0,
    0.0,
    87487479700.0 / 32700410799.0,
    -10690763975.0 / 1880347072.0,
    701980252875.0 / 199316789632.0,
    -1453857185.0 / 822651844.0,
    69997945.0 / 29380423.0,
];

struct Stepper<'f> {
    field: &'f VectorField,
    manifold: Manifold,
    direction: f64,
    k: [Vec<f64>; 7],
    rcont: [Vec<f64>; 5],
    stage: Vec<f64>,
}

impl<'f> Stepper<'f> {
    fn new(field: &'f VectorField, n: usize) -> Self {
        Stepper {
            field,
            manifold: field.manifold(),
            direction: 1.0,
            k: std::array::from_fn(|_| vec![0.0; n]),
            rcont: std::array::from_fn(|_| vec![0.0; n]),
            stage: vec![0.0; n],
        }
    }

    fn rhs(&self, t: f64, chart: u8, y: &[f64], out: &mut [f64]) {
        let p = Point::raw(self.manifold, chart, y.to_vec());
        let v = self.field.eval_at(&p, t * self.direction);
        for (o, vi) in out.iter_mut().zip(&v) {
            *o = vi * self.direction;
        }
    }

    /// One attempted step; fills `ynew` and returns the scaled error estimate.
    fn try_step(&mut self, t: f64, chart: u8, y: &[f64], h: f64, ynew: &mut [f64]) -> f64 {
        let n = y.len();
        let mut k = std::mem::take(&mut self.k);
        self.rhs(t, chart, y, &mut k[0]);
        for s in 0..6 {
            for i in 0..n {
                let mut acc = 0.0;
                for (j, kj) in k.iter().enumerate().take(s + 1) {
                    let a = A[s][j];
                    if a != 0.0 {
                        acc += a * kj[i];
                    }
                }
                self.stage[i] = y[i] + h * acc;
            }
            if s == 5 {
                ynew.copy_from_slice(&self.stage);
            }
            let stage = std::mem::take(&mut self.stage);
            self.rhs(t + C[s] * h, chart, &stage, &mut k[s + 1]);
            self.stage = stage;
        }
        let mut err = 0.0;
        for i in 0..n {
            let mut e = 0.0;
            for (j, kj) in k.iter().enumerate() {
                if E[j] != 0.0 {
                    e += E[j] * kj[i];
                }
            }
            e *= h;
            let scale = 1.0 + y[i].abs().max(ynew[i].abs());
            err += (e / scale) * (e / scale);
        }
        self.k = k;
        (err / n as f64).sqrt()
    }

    fn fill_dense(&mut self, y: &[f64], ynew: &[f64], h: f64) {
        let n = y.len();
        for i in 0..n {
            let ydiff = ynew[i] - y[i];
            let bspl = h * self.k[0][i] - ydiff;
            self.rcont[0][i] = y[i];
            self.rcont[1][i] = ydiff;
            self.rcont[2][i] = bspl;
            self.rcont[3][i] = ydiff - h * self.k[6][i] - bspl;
            let mut acc = 0.0;
            for (j, kj) in self.k.iter().enumerate() {
                if D[j] != 0.0 {
                    acc += D[j] * kj[i];
                }
            }
            self.rcont[4][i] = h * acc;
        }
    }
}

/// Integrate the flow of `field` from `x0` for signed time `t_end`, streaming
/// each accepted step's dense output to `observer`.
pub fn integrate_observed(
    field: &VectorField,
    x0: &Point,
    t_end: f64,
    tol: f64,
    mut observer: impl FnMut(&DenseStep) -> Result<()>,
) -> Result<Trajectory> {
    assert!(t_end != 0.0, "zero-length integration interval");
    let manifold = field.manifold();
    let n = manifold.coord_len();
    let duration = t_end.abs();
    let mut stepper = Stepper::new(field, n);
    stepper.direction = t_end.signum();

    let mut chart = x0.chart;
    let mut y = x0.coords.clone();
    manifold.project(&mut y);
    let mut t = 0.0;
    let mut h = initial_step(&stepper, chart, &y, tol).min(duration);
    let mut ynew = vec![0.0; n];
    let mut steps = 0usize;
    let mut samples: Vec<(f64, Point)> = vec![(0.0, Point::raw(manifold, chart, y.clone()))];
    let mut stride = 1usize;

    while t < duration {
        if h < 1e-14 * duration.max(1.0) {
            return Err(Error::StepSizeUnderflow { t, h, state: y });
        }
        let mut is_last = false;
        if h >= duration - t {
            h = duration - t;
            is_last = true;
        }
        let err = stepper.try_step(t, chart, &y, h, &mut ynew);
        if err <= tol {
            stepper.fill_dense(&y, &ynew, h);
            let step = DenseStep {
                t0: t * stepper.direction,
                h: h * stepper.direction,
                chart,
                manifold,
                rcont: &stepper.rcont,
            };
            observer(&step)?;
            t = if is_last { duration } else { t + h };
            y.copy_from_slice(&ynew);
            manifold.project(&mut y);
            steps += 1;
            if steps % stride == 0 && t < duration {
                samples.push((t * stepper.direction, Point::raw(manifold, chart, y.clone())));
                if samples.len() > MAX_STORED_SAMPLES {
                    let mut idx = 0;
                    samples.retain(|_| {
                        idx += 1;
                        idx % 2 == 1
                    });
                    stride *= 2;
                }
            }
            // Chart hygiene on CP2: move to the best chart when the affine
            // coordinates grow.
            let p = Point::raw(manifold, chart, y.clone());
            if p.cp2_needs_chart_switch() {
                let q = p.cp2_best_chart();
                chart = q.chart;
                y.copy_from_slice(&q.coords);
            }
        }
        let factor = if err == 0.0 {
            5.0
        } else {
            (0.9 * (tol / err).powf(0.2)).clamp(0.2, 5.0)
        };
        h *= factor;
    }

    let end = Point::raw(manifold, chart, y);
    samples.push((t_end, end.clone()));
    Ok(Trajectory {
        samples,
        field_name: field.name.clone(),
        t_end,
        tol,
        steps,
        end,
    })
}

/// Integrate without an observer.
pub fn integrate(field: &VectorField, x0: &Point, t_end: f64, tol: f64) -> Result<Trajectory> {
    integrate_observed(field, x0, t_end, tol, |_| Ok(()))
}

fn initial_step(stepper: &Stepper, chart: u8, y: &[f64], tol: f64) -> f64 {
    let mut f0 = vec![0.0; y.len()];
    stepper.rhs(0.0, chart, y, &mut f0);
    let speed = f0.iter().map(|v| v * v).sum::<f64>().sqrt();
    if speed < 1e-12 {
        return 0.1;
    }
    (tol.powf(0.2) / speed).clamp(1e-8, 0.1)
}

/// Time average `(1/T) ∫_0^T f(φ_s(x)) ds` by per-step Gauss quadrature on
/// the dense output.
pub fn time_average(
    f: impl Fn(&Point) -> f64,
    field: &VectorField,
    x0: &Point,
    t_end: f64,
    tol: f64,
) -> Result<f64> {
    let (nodes, weights) = gauss_legendre(4);
    let mut total = 0.0;
    integrate_observed(field, x0, t_end, tol, |step| {
        let mut acc = 0.0;
        for (x, w) in nodes.iter().zip(&weights) {
            let theta = 0.5 * (x + 1.0);
            acc += 0.5 * w * f(&step.eval(theta));
        }
        total += acc * step.h;
        Ok(())
    })?;
    Ok(total / t_end)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{hopf_pair_field, hopf_pair_flow, VectorField};
    use crate::geometry::{Manifold, Point};

    fn start_point() -> Point {
        Point::new(
            Manifold::Sphere3xSphere3,
            vec![1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0],
        )
    }

    fn max_coord_diff(p: &Point, q: &Point) -> f64 {
        p.coords
            .iter()
            .zip(&q.coords)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    #[test]
    fn zero_field_stays_put() {
        let x0 = start_point();
        let traj = integrate(
            &VectorField::zero(Manifold::Sphere3xSphere3),
            &x0,
            5.0,
            1e-10,
        )
        .unwrap();
        assert!(max_coord_diff(&traj.end, &x0) < 1e-14);
    }

    #[test]
    fn hopf_flow_quarter_turn() {
        // speed (1,0) for t = π/2 maps ((1,0),(1,0)) to ((i,0),(1,0)).
        let x0 = start_point();
        let traj = integrate(
            &hopf_pair_field(1.0, 0.0),
            &x0,
            std::f64::consts::FRAC_PI_2,
            1e-10,
        )
        .unwrap();
        let expect = Point::new(
            Manifold::Sphere3xSphere3,
            vec![0.0, 1.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0],
        );
        assert!(max_coord_diff(&traj.end, &expect) < 1e-9);
    }

    #[test]
    fn closed_orbit_returns() {
        // a=1, b=0: all orbits close after t = 2π.
        let x0 = Point::new(
            Manifold::Sphere3xSphere3,
            vec![0.3, -0.4, 0.5, 0.2, 0.1, 0.9, -0.2, 0.3],
        );
        let traj = integrate(
            &hopf_pair_field(1.0, 0.0),
            &x0,
            2.0 * std::f64::consts::PI,
            1e-11,
        )
        .unwrap();
        assert!(max_coord_diff(&traj.end, &x0) < 1e-8);
    }

    #[test]
    fn long_horizon_matches_closed_form_flow() {
        let x0 = Point::new(
            Manifold::Sphere3xSphere3,
            vec![0.3, -0.4, 0.5, 0.2, 0.1, 0.9, -0.2, 0.3],
        );
        let (a, b) = (1.0, 0.5);
        let t = 100.0;
        let traj = integrate(&hopf_pair_field(a, b), &x0, t, 1e-12).unwrap();
        let exact = hopf_pair_flow(a, b, &x0, t);
        assert!(
            max_coord_diff(&traj.end, &exact) < 1e-9,
            "drift {}",
            max_coord_diff(&traj.end, &exact)
        );
    }

    #[test]
    fn trajectory_times_increase_and_stay_on_manifold() {
        let x0 = start_point();
        let traj = integrate(&hopf_pair_field(2.0, 1.0), &x0, 10.0, 1e-10).unwrap();
        for w in traj.samples.windows(2) {
            assert!(w[1].0 > w[0].0);
        }
        for (_, p) in &traj.samples {
            assert!(p.constraint_violation() < 1e-10);
        }
    }

    #[test]
    fn reversibility() {
        let x0 = Point::new(
            Manifold::Sphere3xSphere3,
            vec![0.3, -0.4, 0.5, 0.2, 0.1, 0.9, -0.2, 0.3],
        );
        let tol = 1e-10;
        let fwd = integrate(&hopf_pair_field(1.3, 0.7), &x0, 50.0, tol).unwrap();
        let back = integrate(&hopf_pair_field(1.3, 0.7), &fwd.end, -50.0, tol).unwrap();
        assert!(max_coord_diff(&back.end, &x0) < 10.0 * tol.max(1e-9));
    }

    #[test]
    fn time_average_of_constant_is_exact() {
        let x0 = start_point();
        let avg = time_average(|_| 3.25, &hopf_pair_field(1.0, 0.0), &x0, 7.0, 1e-10).unwrap();
        assert!((avg - 3.25).abs() < 1e-12);
    }

    #[test]
    fn time_average_of_oscillation_decays_as_one_over_t() {
        // f = Re z0 along the (1,0) rotation: exact average is sin(t)/t.
        let x0 = start_point();
        let f = |p: &Point| p.coords[0];
        let field = hopf_pair_field(1.0, 0.0);
        let a100 = time_average(f, &field, &x0, 100.0, 1e-10).unwrap();
        let a1000 = time_average(f, &field, &x0, 1000.0, 1e-10).unwrap();
        assert!((a100 - (100.0f64).sin() / 100.0).abs() < 1e-8);
        assert!((a1000 - (1000.0f64).sin() / 1000.0).abs() < 1e-8);
        assert!(a1000.abs() < 1e-3 && a100.abs() < 1e-2);
    }

    /// Liouville: the time-T flow map of a divergence-free field has unit
    /// Jacobian determinant on the tangent space (finite differences over a
    /// simplex of initial conditions).
    #[test]
    fn flow_map_preserves_volume() {
        let m = Manifold::Sphere3xSphere3;
        let x0 = Point::new(m, vec![0.3, -0.4, 0.5, 0.2, 0.1, 0.9, -0.2, 0.3]);
        let field = hopf_pair_field(1.0, std::f64::consts::SQRT_2);
        let t = 100.0;
        let tol = 1e-12;
        let eps = 1e-5;
        let frame0 = m.orthonormal_frame(&x0);
        let center = integrate(&field, &x0, t, tol).unwrap().end;
        let frame1 = m.orthonormal_frame(&center);
        let n = frame0.len();
        let mut jac = nalgebra::DMatrix::<f64>::zeros(n, n);
        for (i, v) in frame0.iter().enumerate() {
            let mut hi = x0.coords.clone();
            let mut lo = x0.coords.clone();
            for j in 0..hi.len() {
                hi[j] += eps * v[j];
                lo[j] -= eps * v[j];
            }
            let phi = integrate(&field, &Point::new(m, hi), t, tol).unwrap().end;
            let plo = integrate(&field, &Point::new(m, lo), t, tol).unwrap().end;
            let diff: Vec<f64> = phi
                .coords
                .iter()
                .zip(&plo.coords)
                .map(|(a, b)| (a - b) / (2.0 * eps))
                .collect();
            for (j, f) in frame1.iter().enumerate() {
                jac[(j, i)] = f.iter().zip(&diff).map(|(a, b)| a * b).sum();
            }
        }
        let det = jac.determinant();
        assert!((det - 1.0).abs() < 1e-6, "flow Jacobian det = {det}");
    }
}
