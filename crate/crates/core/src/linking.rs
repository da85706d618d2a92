//! Signed-crossing linking numbers of closed-up flow lines with
//! codimension-two chains, asymptotic estimators, and Monte Carlo averages.
//!
//! A chain is presented by a complex-valued function f with N = f⁻¹(0) and
//! Seifert chain f⁻¹([0, ∞)). A loop avoiding N crosses the chain wherever
//! arg f passes a multiple of 2π; the crossing sign is the sign of
//! d(arg f)/ds there. The total signed count over a closed loop equals the
//! winding number of f along the loop, which the tests use as an independent
//! consistency check on the event detector.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fields::VectorField;
use crate::flow::integrate_observed;
use crate::geometry::{Manifold, Point};
use crate::records::SampleRecord;
use crate::shortpaths::{ClosedLoop, ShortPathSystem};
use crate::util::{mean_stderr, rng_stream};

/// A codimension-two chain N = f⁻¹(0) with Seifert chain f⁻¹([0, ∞)),
/// supporting signed-crossing tests against loops.
#[derive(Clone)]
pub struct PhaseChain {
    pub name: String,
    manifold: Manifold,
    f: Arc<dyn Fn(&Point) -> Complex64 + Send + Sync>,
    pub orientation_sign: i8,
    /// Loops passing closer than this to f = 0 are rejected as degenerate.
    pub guard: f64,
}

impl std::fmt::Debug for PhaseChain {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("PhaseChain")
            .field("name", &self.name)
            .field("manifold", &self.manifold)
            .field("orientation_sign", &self.orientation_sign)
            .finish()
    }
}

impl PhaseChain {
    pub fn new(
        manifold: Manifold,
        name: impl Into<String>,
        f: impl Fn(&Point) -> Complex64 + Send + Sync + 'static,
    ) -> PhaseChain {
        PhaseChain {
            name: name.into(),
            manifold,
            f: Arc::new(f),
            orientation_sign: 1,
            guard: 1e-8,
        }
    }

    pub fn manifold(&self) -> Manifold {
        self.manifold
    }

    pub fn value(&self, p: &Point) -> Complex64 {
        (self.f)(p)
    }

    /// The same chain with reversed orientation.
    pub fn reversed(&self) -> PhaseChain {
        let mut c = self.clone();
        c.orientation_sign = -c.orientation_sign;
        c.name = format!("-{}", c.name);
        c
    }

    /// Predicate for basepoint rejection near the chain.
    pub fn too_close(&self, margin: f64) -> impl Fn(&Point) -> bool + Sync + '_ {
        move |p| self.value(p).norm() < margin
    }

    /// Smallest singular value of the numeric differential of (Re f, Im f)
    /// against an orthonormal frame — the regular-value check.
    pub fn min_differential_sv(&self, points: &[Point]) -> f64 {
        let h = 1e-5;
        let mut worst = f64::INFINITY;
        for p in points {
            let frame = self.manifold.orthonormal_frame(p);
            let mut jac = nalgebra::DMatrix::zeros(2, frame.len());
            for (i, v) in frame.iter().enumerate() {
                let hi = (self.f)(&p.offset(v, h));
                let lo = (self.f)(&p.offset(v, -h));
                jac[(0, i)] = (hi.re - lo.re) / (2.0 * h);
                jac[(1, i)] = (hi.im - lo.im) / (2.0 * h);
            }
            let sv = jac.svd(false, false).singular_values;
            worst = worst.min(sv[sv.len() - 1]);
        }
        worst
    }
}

// ---- Chain catalog -----------------------------------------------------------

/// On S³×S³: f(z, w) = ⟨z, w⟩ = z₀w̄₀ + z₁w̄₁. N = f⁻¹(0) is the
/// four-dimensional zero set of the Hermitian pairing; along the Hopf pair
/// flow, f rotates with angular speed a − b.
pub fn s3xs3_hopf_chain() -> PhaseChain {
    PhaseChain::new(Manifold::Sphere3xSphere3, "pairing_zero_set", |p| {
        let c = &p.coords;
        let z0 = Complex64::new(c[0], c[1]);
        let z1 = Complex64::new(c[2], c[3]);
        let w0 = Complex64::new(c[4], c[5]);
        let w1 = Complex64::new(c[6], c[7]);
        z0 * w0.conj() + z1 * w1.conj()
    })
}

/// On S³: f(z) = z₁, whose zero set is the Hopf fibre {(e^{iθ}, 0)}.
pub fn s3_fiber_chain() -> PhaseChain {
    PhaseChain::new(Manifold::Sphere3, "hopf_fiber", |p| {
        Complex64::new(p.coords[2], p.coords[3])
    })
}

/// On CP2: the real-segment wall. In the affine chart [1 : z : w] the chain
/// is {z ∈ [-1, 1]} × C_w, with boundary the two leaves {z = ±1}. The phase
/// function is the homogeneous-degree-zero expression
/// f = (|Z₀|² - |Z₁|²) + 2i·Im(Z₁ Z̄₀) on unit lifts, smooth across all
/// three charts; its zero set is the closure of the two leaves.
pub fn cp2_segment_chain() -> PhaseChain {
    PhaseChain::new(Manifold::CP2, "real_segment_wall", |p| {
        let z = p.cp2_lift();
        let re = z[0].norm_sqr() - z[1].norm_sqr();
        let im = 2.0 * (z[1] * z[0].conj()).im;
        Complex64::new(re, im)
    })
}

// ---- Crossing accumulation ----------------------------------------------------

const MAX_PHASE_STEP: f64 = 0.5;
const MAX_SPLIT_DEPTH: u32 = 48;
const EVENT_TIME_TOL: f64 = 1e-10;

/// Streaming signed-crossing counter along a piecewise-parametrised loop.
struct CrossingAccumulator<'c> {
    chain: &'c PhaseChain,
    unwrapped: f64,
    prev: Complex64,
    started: bool,
    min_abs: f64,
    signed: i64,
    events: usize,
}

impl<'c> CrossingAccumulator<'c> {
    fn new(chain: &'c PhaseChain) -> Self {
        CrossingAccumulator {
            chain,
            unwrapped: 0.0,
            prev: Complex64::new(0.0, 0.0),
            started: false,
            min_abs: f64::INFINITY,
            signed: 0,
            events: 0,
        }
    }

    fn start(&mut self, f0: Complex64) {
        self.unwrapped = f0.arg();
        self.prev = f0;
        self.started = true;
        self.min_abs = self.min_abs.min(f0.norm());
    }

    /// Consume one segment `s ∈ [0, 1] ↦ f(seg(s))`; `t0`, `t1` are the
    /// absolute times of its ends (for event localisation granularity).
    fn advance(&mut self, seg: &dyn Fn(f64) -> Complex64, t0: f64, t1: f64) -> Result<()> {
        if !self.started {
            self.start(seg(0.0));
        }
        let f0 = self.prev;
        self.walk(seg, 0.0, 1.0, f0, seg(1.0), t1 - t0, 0)?;
        Ok(())
    }

    fn walk(
        &mut self,
        seg: &dyn Fn(f64) -> Complex64,
        s0: f64,
        s1: f64,
        f0: Complex64,
        f1: Complex64,
        duration: f64,
        depth: u32,
    ) -> Result<()> {
        let d = phase_diff(f0, f1);
        if d.abs() > MAX_PHASE_STEP && depth < MAX_SPLIT_DEPTH {
            let sm = 0.5 * (s0 + s1);
            let fm = seg(sm);
            self.walk(seg, s0, sm, f0, fm, duration, depth + 1)?;
            self.walk(seg, sm, s1, fm, f1, duration, depth + 1)?;
            return Ok(());
        }
        let theta0 = self.unwrapped;
        let theta1 = theta0 + d;
        // Signed count of multiples of 2π in (theta0, theta1] (ascending)
        // or [theta1, theta0) (descending), refined by bisection.
        let two_pi = 2.0 * std::f64::consts::PI;
        if d > 0.0 {
            let mut m = (theta0 / two_pi).floor() + 1.0;
            while two_pi * m <= theta1 {
                self.locate_event(seg, s0, s1, f0, two_pi * m - theta0, duration);
                self.signed += 1;
                self.events += 1;
                m += 1.0;
            }
        } else if d < 0.0 {
            let mut m = (theta0 / two_pi).ceil() - 1.0;
            while two_pi * m >= theta1 {
                self.locate_event(seg, s0, s1, f0, two_pi * m - theta0, duration);
                self.signed -= 1;
                self.events += 1;
                m -= 1.0;
            }
        }
        self.unwrapped = theta1;
        self.prev = f1;
        let a = f1.norm();
        if a < self.min_abs {
            self.min_abs = a;
        }
        if self.min_abs < self.chain.guard {
            return Err(Error::DegenerateStart {
                min_abs: self.min_abs,
            });
        }
        Ok(())
    }

    /// Bisection-localise the crossing of relative phase level `target`
    /// (measured from the phase at s0) to EVENT_TIME_TOL in time.
    fn locate_event(
        &mut self,
        seg: &dyn Fn(f64) -> Complex64,
        s0: f64,
        s1: f64,
        f0: Complex64,
        target: f64,
        duration: f64,
    ) {
        let mut lo = s0;
        let mut hi = s1;
        let mut phase_lo = 0.0;
        let mut f_lo = f0;
        let span = duration.abs().max(1e-30);
        while (hi - lo) * span > EVENT_TIME_TOL {
            let mid = 0.5 * (lo + hi);
            let fm = seg(mid);
            let phase_mid = phase_lo + phase_diff(f_lo, fm);
            if (phase_mid - target).signum() == (phase_lo - target).signum() {
                lo = mid;
                phase_lo = phase_mid;
                f_lo = fm;
            } else {
                hi = mid;
            }
            let a = fm.norm();
            if a < self.min_abs {
                self.min_abs = a;
            }
        }
    }
}

/// Principal-value phase increment from `a` to `b`.
fn phase_diff(a: Complex64, b: Complex64) -> f64 {
    (b * a.conj()).arg()
}

/// Signed crossings of one closed loop with the chain, split into the flow
/// and closure contributions (orientation sign applied to both).
#[derive(Debug, Clone, Copy, Serialize)]
pub struct CrossingBreakdown {
    pub flow: i64,
    pub closure: i64,
    pub min_abs: f64,
}

impl CrossingBreakdown {
    pub fn total(&self) -> i64 {
        self.flow + self.closure
    }
}

/// Count signed crossings of a closed loop. Re-runs the flow part's
/// integration (deterministic for the stored start/tolerance) and walks the
/// closure path.
pub fn signed_crossings(lp: &ClosedLoop, chain: &PhaseChain) -> Result<CrossingBreakdown> {
    let start = &lp.flow_part.samples.first().expect("nonempty").1;
    count_loop(
        &lp.field,
        start,
        lp.horizon,
        lp.flow_part.tol,
        chain,
        |end| {
            // Reuse the stored closure rather than rebuilding from a system;
            // the re-integrated endpoint reproduces the stored one.
            debug_assert!(end
                .coords
                .iter()
                .zip(&lp.flow_part.end.coords)
                .all(|(a, b)| (a - b).abs() < 1e-9));
            lp.closure_part.clone()
        },
    )
}

/// Integrate, close, and count in one streaming pass.
fn count_loop(
    field: &VectorField,
    x0: &Point,
    t_end: f64,
    tol: f64,
    chain: &PhaseChain,
    closure_of: impl FnOnce(&Point) -> crate::geometry::Path,
) -> Result<CrossingBreakdown> {
    let mut acc = CrossingAccumulator::new(chain);
    let f_start = chain.value(x0);
    if f_start.norm() < chain.guard.max(1e-7) {
        return Err(Error::DegenerateStart {
            min_abs: f_start.norm(),
        });
    }
    acc.start(f_start);
    let traj = integrate_observed(field, x0, t_end, tol, |step| {
        let seg = |theta: f64| chain.value(&step.eval(theta));
        acc.advance(&seg, step.t0, step.t0 + step.h)
    })?;
    let flow_raw = acc.signed;

    let closure = closure_of(&traj.end);
    let mut offset = t_end;
    for arc in &closure.segments {
        let seg = |s: f64| chain.value(&arc.eval(s));
        acc.advance(&seg, offset, offset + arc.length.max(1e-9))?;
        offset += arc.length.max(1e-9);
    }
    let sign = chain.orientation_sign as i64;
    Ok(CrossingBreakdown {
        flow: sign * flow_raw,
        closure: sign * (acc.signed - flow_raw),
        min_abs: acc.min_abs,
    })
}

// ---- Estimators ---------------------------------------------------------------

/// A time-averaged or ensemble-averaged linking value.
#[derive(Debug, Clone, Serialize)]
pub struct LinkingEstimate {
    pub value: f64,
    pub horizon_t: f64,
    pub samples: usize,
    pub stderr: f64,
    pub crossings_flow: i64,
    pub crossings_closure: i64,
}

/// lk(x, N) estimated at horizon `t_end`: crossings of the closed-up flow
/// segment divided by the horizon.
pub fn asymptotic_lk(
    field: &VectorField,
    x0: &Point,
    chain: &PhaseChain,
    sys: &ShortPathSystem,
    t_end: f64,
    tol: f64,
) -> Result<LinkingEstimate> {
    let counts = count_loop(field, x0, t_end, tol, chain, |end| sys.connect(end, x0))?;
    Ok(LinkingEstimate {
        value: counts.total() as f64 / t_end,
        horizon_t: t_end,
        samples: 1,
        stderr: 0.0,
        crossings_flow: counts.flow,
        crossings_closure: counts.closure,
    })
}

/// The asymptotic estimate as a function of the horizon: at each checkpoint
/// the flow segment seen so far is closed with the system's short path and
/// recounted. Checkpoint times snap to integrator step boundaries.
pub fn running_asymptotic_lk(
    field: &VectorField,
    x0: &Point,
    chain: &PhaseChain,
    sys: &ShortPathSystem,
    t_end: f64,
    tol: f64,
    checkpoints: usize,
) -> Result<Vec<(f64, f64)>> {
    assert!(checkpoints >= 1);
    let mut acc = CrossingAccumulator::new(chain);
    acc.start(chain.value(x0));
    let mut snaps: Vec<(f64, i64, Point)> = Vec::with_capacity(checkpoints);
    let mut next = t_end / checkpoints as f64;
    integrate_observed(field, x0, t_end, tol, |step| {
        let seg = |theta: f64| chain.value(&step.eval(theta));
        acc.advance(&seg, step.t0, step.t0 + step.h)?;
        let t1 = step.t0 + step.h;
        if t1 >= next {
            snaps.push((t1, acc.signed, step.eval(1.0)));
            while next <= t1 {
                next += t_end / checkpoints as f64;
            }
        }
        Ok(())
    })?;
    let sign = chain.orientation_sign as i64;
    let mut out = Vec::with_capacity(snaps.len());
    for (t, flow_count, at) in snaps {
        let closure = sys.connect(&at, x0);
        let mut cacc = CrossingAccumulator::new(chain);
        cacc.start(chain.value(&at));
        let mut offset = t;
        for arc in &closure.segments {
            let seg = |s: f64| chain.value(&arc.eval(s));
            cacc.advance(&seg, offset, offset + arc.length.max(1e-9))?;
            offset += arc.length.max(1e-9);
        }
        out.push((t, (sign * (flow_count + cacc.signed)) as f64 / t));
    }
    Ok(out)
}

const MAX_RETRIES_PER_SAMPLE: usize = 20;
const DEGENERATE_FRACTION_LIMIT: f64 = 0.01;

/// Monte Carlo average of [`asymptotic_lk`] over volume-distributed starts,
/// scaled by `volume` (the total mass of the chosen invariant measure).
///
/// Per-sample RNG streams and an index-ordered pairwise reduction make the
/// output bit-reproducible for a fixed seed, independent of worker count.
pub fn average_lk_with_volume(
    field: &VectorField,
    chain: &PhaseChain,
    sys: &ShortPathSystem,
    t_end: f64,
    n_samples: usize,
    seed: u64,
    tol: f64,
    volume: f64,
) -> Result<(LinkingEstimate, Vec<SampleRecord>)> {
    assert!(n_samples >= 1);
    let manifold = field.manifold();
    let degenerate = AtomicUsize::new(0);
    let limit = ((n_samples as f64) * DEGENERATE_FRACTION_LIMIT).ceil() as usize;

    let results: Result<Vec<SampleRecord>> = (0..n_samples as u64)
        .into_par_iter()
        .map(|idx| {
            let mut rng = rng_stream(seed, idx);
            for _ in 0..MAX_RETRIES_PER_SAMPLE {
                let x0 = manifold.sample_uniform(&mut rng);
                match count_loop(field, &x0, t_end, tol, chain, |end| sys.connect(end, &x0)) {
                    Ok(counts) => {
                        return Ok(SampleRecord {
                            index: idx,
                            start: x0.coords.clone(),
                            crossings_flow: counts.flow,
                            crossings_closure: counts.closure,
                            horizon: t_end,
                            value: counts.total() as f64 / t_end,
                        });
                    }
                    Err(Error::DegenerateStart { .. }) => {
                        if degenerate.fetch_add(1, Ordering::Relaxed) + 1 > limit {
                            return Err(Error::DegenerateSampleOverflow {
                                failed: degenerate.load(Ordering::Relaxed),
                                total: n_samples,
                                limit: DEGENERATE_FRACTION_LIMIT * 100.0,
                            });
                        }
                    }
                    Err(e) => return Err(e),
                }
            }
            Err(Error::DegenerateSampleOverflow {
                failed: MAX_RETRIES_PER_SAMPLE,
                total: n_samples,
                limit: DEGENERATE_FRACTION_LIMIT * 100.0,
            })
        })
        .collect();
    let mut records = results?;
    records.sort_by_key(|r| r.index);

    let values: Vec<f64> = records.iter().map(|r| r.value).collect();
    let (mean, se) = mean_stderr(&values);
    let estimate = LinkingEstimate {
        value: volume * mean,
        horizon_t: t_end,
        samples: n_samples,
        stderr: volume * se,
        crossings_flow: records.iter().map(|r| r.crossings_flow).sum(),
        crossings_closure: records.iter().map(|r| r.crossings_closure).sum(),
    };
    Ok((estimate, records))
}

/// [`average_lk_with_volume`] against the Riemannian volume of the manifold.
pub fn average_lk(
    field: &VectorField,
    chain: &PhaseChain,
    sys: &ShortPathSystem,
    t_end: f64,
    n_samples: usize,
    seed: u64,
    tol: f64,
) -> Result<(LinkingEstimate, Vec<SampleRecord>)> {
    average_lk_with_volume(
        field,
        chain,
        sys,
        t_end,
        n_samples,
        seed,
        tol,
        field.manifold().total_volume(),
    )
}
