//! Ruelle–Sullivan cycle evaluation and Hopf-type integrals.
//!
//! The cohomological side of the linking theorems: `∫_N α` over a
//! parametrised cycle by tensor Gauss–Legendre quadrature with grid
//! refinement, and the pairing `ω ↦ ∫_M ω ∧ ν` of a measured foliation by
//! Monte Carlo over the volume measure (smooth payloads) or leafwise
//! quadrature (signed leaf sums).

use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fields::VectorField;
use crate::geometry::{FormField, Manifold, Point};
use crate::util::{gauss_legendre, mean_stderr, pairwise_sum, rng_stream};

/// Relative agreement between successive refinement levels.
pub const QUADRATURE_REL_TOL: f64 = 1e-8;

/// Nodes per dimension at each refinement level.
const LEVELS: [usize; 6] = [6, 10, 16, 24, 36, 54];

/// A parametrised k-cycle: an embedding of a rectangle into the manifold
/// with a definite orientation.
#[derive(Clone)]
pub struct ParametricCycle {
    pub name: String,
    manifold: Manifold,
    pub domain: Vec<(f64, f64)>,
    embedding: Arc<dyn Fn(&[f64]) -> Point + Send + Sync>,
    /// Closed-form partial derivatives of the embedding (columns per
    /// parameter). Without it, central differences are used; those require a
    /// chart-stable embedding.
    jacobian: Option<Arc<dyn Fn(&[f64]) -> Vec<Vec<f64>> + Send + Sync>>,
    pub orientation: f64,
}

impl std::fmt::Debug for ParametricCycle {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ParametricCycle")
            .field("name", &self.name)
            .field("domain", &self.domain)
            .field("orientation", &self.orientation)
            .finish()
    }
}

impl ParametricCycle {
    pub fn new(
        manifold: Manifold,
        name: impl Into<String>,
        domain: Vec<(f64, f64)>,
        embedding: impl Fn(&[f64]) -> Point + Send + Sync + 'static,
    ) -> ParametricCycle {
        ParametricCycle {
            name: name.into(),
            manifold,
            domain,
            embedding: Arc::new(embedding),
            jacobian: None,
            orientation: 1.0,
        }
    }

    pub fn with_jacobian(
        mut self,
        jac: impl Fn(&[f64]) -> Vec<Vec<f64>> + Send + Sync + 'static,
    ) -> ParametricCycle {
        self.jacobian = Some(Arc::new(jac));
        self
    }

    pub fn with_orientation(mut self, sign: f64) -> ParametricCycle {
        self.orientation = sign;
        self
    }

    pub fn dim(&self) -> usize {
        self.domain.len()
    }

    pub fn manifold(&self) -> Manifold {
        self.manifold
    }

    pub fn point(&self, u: &[f64]) -> Point {
        (self.embedding)(u)
    }

    /// Embedding point and tangent columns at parameter `u`.
    pub fn frame(&self, u: &[f64]) -> (Point, Vec<Vec<f64>>) {
        let p = (self.embedding)(u);
        let cols = match &self.jacobian {
            Some(j) => j(u),
            None => {
                let h = 1e-6;
                (0..u.len())
                    .map(|i| {
                        let mut hi = u.to_vec();
                        let mut lo = u.to_vec();
                        hi[i] += h;
                        lo[i] -= h;
                        let (ph, pl) = ((self.embedding)(&hi), (self.embedding)(&lo));
                        debug_assert_eq!(ph.chart, pl.chart, "chart-stable embedding required");
                        ph.coords
                            .iter()
                            .zip(&pl.coords)
                            .map(|(a, b)| (a - b) / (2.0 * h))
                            .collect()
                    })
                    .collect()
            }
        };
        (p, cols)
    }

    /// Smallest singular value of the parameter Jacobian over a coarse grid
    /// (immersion check).
    pub fn min_jacobian_sv(&self, per_dim: usize) -> f64 {
        let grid = interior_grid(&self.domain, per_dim);
        let mut worst = f64::INFINITY;
        for u in grid {
            let (_, cols) = self.frame(&u);
            let rows = cols[0].len();
            let mut m = nalgebra::DMatrix::zeros(rows, cols.len());
            for (c, col) in cols.iter().enumerate() {
                for (r, v) in col.iter().enumerate() {
                    m[(r, c)] = *v;
                }
            }
            let sv = m.svd(false, false).singular_values;
            worst = worst.min(sv[sv.len() - 1]);
        }
        worst
    }
}

fn interior_grid(domain: &[(f64, f64)], per_dim: usize) -> Vec<Vec<f64>> {
    let mut grid = vec![vec![]];
    for (lo, hi) in domain {
        let mut next = Vec::new();
        for base in &grid {
            for i in 0..per_dim {
                let s = (i as f64 + 0.5) / per_dim as f64;
                let mut u = base.clone();
                u.push(lo + s * (hi - lo));
                next.push(u);
            }
        }
        grid = next;
    }
    grid
}

/// Result of a refinement-controlled quadrature.
#[derive(Debug, Clone)]
pub struct QuadratureValue {
    pub value: f64,
    /// Value at each refinement level actually evaluated.
    pub trace: Vec<f64>,
}

/// Tensor Gauss–Legendre quadrature of the pullback of `form` over the
/// cycle, refining until two grid levels agree to [`QUADRATURE_REL_TOL`].
pub fn integrate_form_over_cycle(
    form: &FormField,
    cycle: &ParametricCycle,
) -> Result<QuadratureValue> {
    assert_eq!(form.degree(), cycle.dim(), "form degree must match cycle dim");
    let mut trace = Vec::new();
    for (level, &n) in LEVELS.iter().enumerate() {
        let value = quadrature_at_level(form, cycle, n);
        trace.push(value);
        if level > 0 {
            let prev = trace[level - 1];
            if (value - prev).abs() <= QUADRATURE_REL_TOL * value.abs().max(1.0) {
                return Ok(QuadratureValue { value, trace });
            }
        }
    }
    Err(Error::QuadratureNonConvergence {
        levels: LEVELS.len(),
        prev: trace[trace.len() - 2],
        last: trace[trace.len() - 1],
    })
}

fn quadrature_at_level(form: &FormField, cycle: &ParametricCycle, n: usize) -> f64 {
    let dim = cycle.dim();
    let (nodes, weights) = gauss_legendre(n);
    // Per-dimension affine maps to the domain intervals.
    let maps: Vec<(Vec<f64>, Vec<f64>)> = cycle
        .domain
        .iter()
        .map(|(lo, hi)| {
            let xs: Vec<f64> = nodes.iter().map(|x| lo + (x + 1.0) * 0.5 * (hi - lo)).collect();
            let ws: Vec<f64> = weights.iter().map(|w| w * 0.5 * (hi - lo)).collect();
            (xs, ws)
        })
        .collect();

    let total_points: usize = n.pow(dim as u32);
    let contributions: Vec<f64> = (0..total_points)
        .into_par_iter()
        .map(|flat| {
            let mut idx = flat;
            let mut u = vec![0.0; dim];
            let mut w = 1.0;
            for d in 0..dim {
                let i = idx % n;
                idx /= n;
                u[d] = maps[d].0[i];
                w *= maps[d].1[i];
            }
            let (p, cols) = cycle.frame(&u);
            let refs: Vec<&[f64]> = cols.iter().map(|c| c.as_slice()).collect();
            w * form.eval(&p, &refs)
        })
        .collect();
    cycle.orientation * pairwise_sum(&contributions)
}

/// Monte Carlo integral of a top-degree form over the whole manifold:
/// `∫_M τ = vol(M) · E[τ(frame)]` over volume-uniform samples, since the
/// frames are volume-orthonormal. Returns (value, stderr).
pub fn integrate_top_form_mc(
    manifold: Manifold,
    tau: &FormField,
    n_samples: usize,
    seed: u64,
) -> (f64, f64) {
    assert_eq!(tau.degree(), manifold.dim());
    let values: Vec<f64> = (0..n_samples as u64)
        .into_par_iter()
        .map(|idx| {
            let mut rng = rng_stream(seed, idx);
            let p = manifold.sample_uniform(&mut rng);
            let frame = manifold.orthonormal_frame(&p);
            let refs: Vec<&[f64]> = frame.iter().map(|v| v.as_slice()).collect();
            tau.eval(&p, &refs)
        })
        .collect();
    let (mean, se) = mean_stderr(&values);
    let vol = manifold.total_volume();
    (vol * mean, vol * se)
}

/// A codimension-two foliation with a holonomy-invariant transverse measure,
/// in one of the concrete payloads the pairing supports.
#[derive(Clone)]
pub enum MeasuredFoliation {
    /// Measure given by a closed 2-form.
    SmoothForm { nu: FormField },
    /// Measure given by dβ for an explicit 1-form β (exactness built in).
    ExactForm { beta: FormField },
    /// Finitely many parametrised leaves with ±1-type weights.
    SignedLeafSum {
        leaves: Vec<(ParametricCycle, f64)>,
    },
}

impl MeasuredFoliation {
    /// Closedness / integrability probe for the payload. For smooth payloads
    /// this checks `|dν|` on frames at the probe points.
    pub fn validate(&self, probes: &[Point]) -> Result<()> {
        match self {
            MeasuredFoliation::SmoothForm { nu } => {
                let dnu = nu.d();
                let m = nu.manifold();
                let k = dnu.degree();
                for p in probes {
                    let frame = m.orthonormal_frame(p);
                    let refs: Vec<&[f64]> = frame[..k].iter().map(|v| v.as_slice()).collect();
                    let r = dnu.eval(p, &refs).abs();
                    if r > 1e-8 {
                        return Err(Error::IntegrabilityResidual {
                            residual: r,
                            bound: 1e-8,
                        });
                    }
                }
                Ok(())
            }
            MeasuredFoliation::ExactForm { .. } => Ok(()),
            MeasuredFoliation::SignedLeafSum { leaves } => {
                for (leaf, _) in leaves {
                    let sv = leaf.min_jacobian_sv(4);
                    if sv <= 1e-8 {
                        return Err(Error::IntegrabilityResidual {
                            residual: sv,
                            bound: 1e-8,
                        });
                    }
                }
                Ok(())
            }
        }
    }
}

/// Options for the Ruelle–Sullivan pairing.
#[derive(Debug, Clone, Copy)]
pub struct PairingOptions {
    pub mc_samples: usize,
    pub seed: u64,
}

impl Default for PairingOptions {
    fn default() -> Self {
        PairingOptions {
            mc_samples: 100_000,
            seed: 1,
        }
    }
}

/// Evaluate the Ruelle–Sullivan current of the measured foliation on the
/// (n-2)-form ω: `∫_M ω ∧ ν` for form payloads (Monte Carlo, with stderr),
/// `Σ_i w_i ∫_{leaf_i} ω` for signed leaf sums (quadrature, stderr 0).
pub fn ruelle_sullivan_eval(
    foliation: &MeasuredFoliation,
    omega: &FormField,
    opts: PairingOptions,
) -> Result<(f64, f64)> {
    match foliation {
        MeasuredFoliation::SmoothForm { nu } => {
            let tau = crate::geometry::wedge(omega, nu)?;
            Ok(integrate_top_form_mc(
                omega.manifold(),
                &tau,
                opts.mc_samples,
                opts.seed,
            ))
        }
        MeasuredFoliation::ExactForm { beta } => {
            let nu = beta.d();
            let tau = crate::geometry::wedge(omega, &nu)?;
            Ok(integrate_top_form_mc(
                omega.manifold(),
                &tau,
                opts.mc_samples,
                opts.seed,
            ))
        }
        MeasuredFoliation::SignedLeafSum { leaves } => {
            let mut total = 0.0;
            for (leaf, weight) in leaves {
                total += weight * integrate_form_over_cycle(omega, leaf)?.value;
            }
            Ok((total, 0.0))
        }
    }
}

/// Hopf-type integral `H(X, N) = ∫_N α` for a primitive α of `i_X μ`.
/// The primitive property is the caller's responsibility; it is probed when
/// a closed-form dα is available.
pub fn hopf_integral_submanifold(alpha: &FormField, cycle: &ParametricCycle) -> Result<f64> {
    Ok(integrate_form_over_cycle(alpha, cycle)?.value)
}

/// Hopf-type integral `H(X, F, ν) = ∫_M α ∧ ν` after verifying
/// `dα = i_X μ` on a probe set.
pub fn hopf_integral_foliation(
    field: &VectorField,
    foliation: &MeasuredFoliation,
    alpha: &FormField,
    mu: &FormField,
    probes: &[Point],
    opts: PairingOptions,
) -> Result<(f64, f64)> {
    let residual = primitive_residual(field, alpha, mu, probes);
    if residual > 1e-8 {
        return Err(Error::PrimitiveCheck { residual });
    }
    ruelle_sullivan_eval(foliation, alpha, opts)
}

/// Max over probes of `|dα - i_X μ|` on orthonormal frames.
pub fn primitive_residual(
    field: &VectorField,
    alpha: &FormField,
    mu: &FormField,
    probes: &[Point],
) -> f64 {
    let da = alpha.d();
    let ixmu = field.interior(mu).expect("volume degree");
    let m = alpha.manifold();
    let k = da.degree();
    let mut worst = 0.0f64;
    for p in probes {
        let frame = m.orthonormal_frame(p);
        let refs: Vec<&[f64]> = frame[..k].iter().map(|v| v.as_slice()).collect();
        worst = worst.max((da.eval(p, &refs) - ixmu.eval(p, &refs)).abs());
    }
    worst
}

// ---- Cycle catalog -------------------------------------------------------------

/// The zero set of the Hermitian pairing on S³×S³, parametrised by Hopf
/// coordinates on the first factor and a circle phase:
/// ((θ, φ₁, φ₂), ψ) ↦ (z, (e^{iψ} z̄₁, -e^{iψ} z̄₀)).
///
/// Oriented so that the chain pairs positively with the crossing convention
/// (positive crossings for a > b).
pub fn s3xs3_pairing_zero_cycle() -> ParametricCycle {
    use std::f64::consts::PI;
    let embed = |u: &[f64]| -> (Point, Vec<Vec<f64>>) {
        let (th, p1, p2, ps) = (u[0], u[1], u[2], u[3]);
        let e1 = Complex64::from_polar(1.0, p1);
        let e2 = Complex64::from_polar(1.0, p2);
        let lam = Complex64::from_polar(1.0, ps);
        let (c2, s2) = ((th / 2.0).cos(), (th / 2.0).sin());
        let z0 = e1 * c2;
        let z1 = e2 * s2;
        let w0 = lam * z1.conj();
        let w1 = -lam * z0.conj();

        let dz0_dth = e1 * (-0.5 * s2);
        let dz1_dth = e2 * (0.5 * c2);
        let i = Complex64::new(0.0, 1.0);
        // Columns: ∂θ, ∂φ1, ∂φ2, ∂ψ of (z0, z1, w0, w1).
        let cols = vec![
            pack(&[dz0_dth, dz1_dth, lam * dz1_dth.conj(), -lam * dz0_dth.conj()]),
            pack(&[
                i * z0,
                Complex64::new(0.0, 0.0),
                Complex64::new(0.0, 0.0),
                -lam * (i * z0).conj(),
            ]),
            pack(&[
                Complex64::new(0.0, 0.0),
                i * z1,
                lam * (i * z1).conj(),
                Complex64::new(0.0, 0.0),
            ]),
            pack(&[
                Complex64::new(0.0, 0.0),
                Complex64::new(0.0, 0.0),
                i * w0,
                i * w1,
            ]),
        ];
        let point = Point::raw(
            Manifold::Sphere3xSphere3,
            0,
            pack(&[z0, z1, w0, w1]),
        );
        (point, cols)
    };
    let embed_pt = embed;
    ParametricCycle::new(
        Manifold::Sphere3xSphere3,
        "pairing_zero_set",
        vec![(0.0, PI), (0.0, 2.0 * PI), (0.0, 2.0 * PI), (0.0, 2.0 * PI)],
        move |u| embed_pt(u).0,
    )
    .with_jacobian(move |u| embed(u).1)
    .with_orientation(1.0)
}

fn pack(zs: &[Complex64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(zs.len() * 2);
    for z in zs {
        out.push(z.re);
        out.push(z.im);
    }
    out
}

/// A Hopf fibre of S³ (the zero set of z₁), parametrised by its circle phase.
pub fn s3_fiber_cycle() -> ParametricCycle {
    use std::f64::consts::PI;
    ParametricCycle::new(
        Manifold::Sphere3,
        "hopf_fiber",
        vec![(0.0, 2.0 * PI)],
        |u| {
            Point::raw(
                Manifold::Sphere3,
                0,
                vec![u[0].cos(), u[0].sin(), 0.0, 0.0],
            )
        },
    )
    .with_jacobian(|u| vec![vec![-u[0].sin(), u[0].cos(), 0.0, 0.0]])
}

/// Default angular truncation of the noncompact CP2 leaves/wall: |w| up to
/// tan(ψ_max). The Fubini–Study integrands decay like |w|^{-4} in area, so
/// the omitted tail is below 1e-9 relative for tan(ψ_max) ≳ 300.
pub const CP2_PSI_MAX: f64 = 1.567463; // atan(300)

/// The affine leaf {z = c} × C_w of CP2, in polar coordinates
/// (ψ, φ) ↦ [1 : c : tan(ψ) e^{iφ}].
///
/// Oriented compatibly with the chain crossing convention: the boundary
/// orientation the wall induces on {z = 1} is the negative of the
/// (ψ, φ)-parametrisation orientation.
pub fn cp2_leaf_cycle(c: f64, psi_max: f64) -> ParametricCycle {
    use std::f64::consts::PI;
    ParametricCycle::new(
        Manifold::CP2,
        format!("leaf_z={c}"),
        vec![(0.0, psi_max), (0.0, 2.0 * PI)],
        move |u| {
            let r = u[0].tan();
            Point::raw(
                Manifold::CP2,
                0,
                vec![c, 0.0, r * u[1].cos(), r * u[1].sin()],
            )
        },
    )
    .with_jacobian(move |u| {
        let (psi, phi) = (u[0], u[1]);
        let r = psi.tan();
        let dr = 1.0 / (psi.cos() * psi.cos());
        vec![
            vec![0.0, 0.0, dr * phi.cos(), dr * phi.sin()],
            vec![0.0, 0.0, -r * phi.sin(), r * phi.cos()],
        ]
    })
    .with_orientation(-1.0)
}

/// The wall {z = x ∈ [-1, 1]} × C_w of CP2 whose boundary is the difference
/// of the two leaves: (x, ψ, φ) ↦ [1 : x : tan(ψ) e^{iφ}].
///
/// Oriented so that positive chain crossings (arg f increasing through the
/// positive ray) count as positive intersections; against the
/// (x, ψ, φ)-parametrisation that is the negative orientation.
pub fn cp2_wall_cycle(psi_max: f64) -> ParametricCycle {
    use std::f64::consts::PI;
    ParametricCycle::new(
        Manifold::CP2,
        "real_segment_wall",
        vec![(-1.0, 1.0), (0.0, psi_max), (0.0, 2.0 * PI)],
        move |u| {
            let r = u[1].tan();
            Point::raw(
                Manifold::CP2,
                0,
                vec![u[0], 0.0, r * u[2].cos(), r * u[2].sin()],
            )
        },
    )
    .with_jacobian(move |u| {
        let (psi, phi) = (u[1], u[2]);
        let r = psi.tan();
        let dr = 1.0 / (psi.cos() * psi.cos());
        vec![
            vec![1.0, 0.0, 0.0, 0.0],
            vec![0.0, 0.0, dr * phi.cos(), dr * phi.sin()],
            vec![0.0, 0.0, -r * phi.sin(), r * phi.cos()],
        ]
    })
    .with_orientation(-1.0)
}
