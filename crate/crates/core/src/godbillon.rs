//! Godbillon–Vey machinery for time-dependent codimension-one foliations.
//!
//! A family is a time-indexed 1-form α(t) with α ∧ dα = 0 and a transversal
//! field V with α(V) = 1 on the working region. Since α is nowhere zero
//! there, the division step is the interior-product trick:
//! from α ∧ dα = 0 and α(V) = 1 follows dα = α ∧ β exactly for β = i_V dα,
//! and likewise for the higher divisions γ, δ obtained by differentiating the
//! defining relations. All constructions here are symbolic in the chart
//! coordinates and in t, so the exact identities hold to rounding error; the
//! reported closedness residuals use the independent finite-difference
//! exterior derivative.

use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::fields::VectorField;
use crate::geometry::{numeric_d_richardson, FormField, Manifold, Point, SymForm};
use crate::ruelle::MeasuredFoliation;
use crate::util::rng_stream;

/// Variable names for family expressions: chart coordinates then time.
pub const FAMILY_VARS: [&str; 5] = ["x1", "x2", "x3", "x4", "t"];

/// A smooth family of codimension-one foliations on a chart region,
/// presented by a defining 1-form and a transversal field.
#[derive(Debug, Clone)]
pub struct FoliationFamily {
    pub name: String,
    pub manifold: Manifold,
    /// Time-dependent defining 1-form (symbolic; slot `dim` is time).
    pub alpha: SymForm,
    /// Transversal field components with α(V) = 1; held fixed in t.
    pub transversal: Vec<Expr>,
    /// Probe box for residual checks (chart coordinates).
    pub probe_lo: Vec<f64>,
    pub probe_hi: Vec<f64>,
}

const INTEGRABILITY_BOUND: f64 = 1e-8;
const TRANSVERSAL_BOUND: f64 = 1e-10;
const DIVISION_BOUND: f64 = 1e-6;

impl FoliationFamily {
    pub fn dim(&self) -> usize {
        self.manifold.dim()
    }

    /// Build a family from expression strings in the variables
    /// x1..x4 and t.
    pub fn from_expressions(
        name: impl Into<String>,
        manifold: Manifold,
        alpha_coeffs: &[&str],
        transversal: &[&str],
        probe_lo: Vec<f64>,
        probe_hi: Vec<f64>,
    ) -> Result<FoliationFamily> {
        let dim = manifold.dim();
        assert_eq!(alpha_coeffs.len(), dim);
        assert_eq!(transversal.len(), dim);
        let names: Vec<&str> = FAMILY_VARS[..dim].iter().copied().chain(["t"]).collect();
        let coeffs = alpha_coeffs
            .iter()
            .map(|s| Expr::parse(s, &names))
            .collect::<Result<Vec<_>>>()?;
        let v = transversal
            .iter()
            .map(|s| Expr::parse(s, &names))
            .collect::<Result<Vec<_>>>()?;
        Ok(FoliationFamily {
            name: name.into(),
            manifold,
            alpha: SymForm::one_form(dim, coeffs),
            transversal: v,
            probe_lo,
            probe_hi,
        })
    }

    /// Probe points with their (coords, t) variable vectors.
    pub fn probes(&self, t: f64, count: usize, seed: u64) -> Vec<Vec<f64>> {
        let dim = self.dim();
        let mut rng = rng_stream(seed, 977);
        (0..count)
            .map(|_| {
                let mut vars: Vec<f64> = (0..dim)
                    .map(|i| {
                        let u: f64 = rng.gen();
                        self.probe_lo[i] + u * (self.probe_hi[i] - self.probe_lo[i])
                    })
                    .collect();
                vars.push(t);
                vars
            })
            .collect()
    }

    /// Integrability |α ∧ dα| and transversality |α(V) - 1| on the probe set.
    pub fn validate(&self, t: f64, probe_count: usize, seed: u64) -> Result<()> {
        let dim = self.dim();
        let ada = self.alpha.wedge(&self.alpha.d());
        let av = self.alpha.interior(&self.transversal);
        for vars in self.probes(t, probe_count, seed) {
            let r = sup_on_frames(&ada, &vars, dim);
            if r > INTEGRABILITY_BOUND {
                return Err(Error::IntegrabilityResidual {
                    residual: r,
                    bound: INTEGRABILITY_BOUND,
                });
            }
            let pairing = av.eval(&vars, &[]);
            if (pairing - 1.0).abs() > TRANSVERSAL_BOUND {
                return Err(Error::IntegrabilityResidual {
                    residual: (pairing - 1.0).abs(),
                    bound: TRANSVERSAL_BOUND,
                });
            }
        }
        Ok(())
    }

    /// Symbolic β = i_V dα, the division of dα by α.
    pub fn beta_sym(&self) -> SymForm {
        self.alpha.d().interior(&self.transversal)
    }

    /// β at time `t` as a form field, after validating the family and the
    /// residual |dα - α ∧ β| on the probe set.
    pub fn beta_from_alpha(&self, t: f64) -> Result<FormField> {
        self.validate(t, 64, 7)?;
        let beta = self.beta_sym();
        let resid = self.alpha.d().sub(&self.alpha.wedge(&beta));
        for vars in self.probes(t, 64, 11) {
            let r = sup_on_frames(&resid, &vars, self.dim());
            if r > INTEGRABILITY_BOUND {
                return Err(Error::IntegrabilityResidual {
                    residual: r,
                    bound: INTEGRABILITY_BOUND,
                });
            }
        }
        Ok(FormField::from_sym(
            self.manifold,
            &beta,
            t,
            format!("beta[{}]", self.name),
        ))
    }

    /// The Godbillon–Vey integrand β ∧ dβ at time `t`, with its closedness
    /// residual measured by the finite-difference exterior derivative.
    pub fn gv_integrand(&self, t: f64) -> Result<FormOutput> {
        self.validate(t, 64, 7)?;
        let beta = self.beta_sym();
        let gv = beta.wedge(&beta.d());
        self.packaged(gv, t, "gv")
    }

    /// The temporal Godbillon–Vey integrand β̇ ∧ β ∧ dβ at time `t`.
    pub fn tgv_integrand(&self, t: f64) -> Result<FormOutput> {
        self.validate(t, 64, 7)?;
        let beta = self.beta_sym();
        let tgv = beta.dt().wedge(&beta).wedge(&beta.d());
        self.packaged(tgv, t, "tgv")
    }

    fn packaged(&self, sym: SymForm, t: f64, tag: &str) -> Result<FormOutput> {
        let form = FormField::from_sym(self.manifold, &sym, t, format!("{tag}[{}]", self.name));
        let closedness = if sym.degree < self.dim() {
            let d_fd = numeric_d_richardson(&form, 1e-4);
            let mut worst = 0.0f64;
            for vars in self.probes(t, 128, 13) {
                let p = Point::raw(self.manifold, 0, vars[..self.dim()].to_vec());
                worst = worst.max(sup_form_on_frames(&d_fd, &p));
            }
            worst
        } else {
            0.0
        };
        Ok(FormOutput {
            form,
            sym,
            closedness_residual: closedness,
        })
    }

    /// Integral of the degree-4 TGV integrand over the torus fundamental
    /// domain, by the trapezoidal rule (spectrally accurate for smooth
    /// periodic integrands). Only meaningful for periodic families.
    pub fn tgv_integral(&self, t: f64, grid: usize) -> Result<f64> {
        use rayon::prelude::*;
        assert!(matches!(self.manifold, Manifold::Torus(4)));
        let beta = self.beta_sym();
        let tgv = beta.dt().wedge(&beta).wedge(&beta.d());
        let h = 2.0 * std::f64::consts::PI / grid as f64;
        let total_cells = grid * grid * grid * grid;
        let frame: Vec<Vec<f64>> = (0..4)
            .map(|i| {
                let mut e = vec![0.0; 4];
                e[i] = 1.0;
                e
            })
            .collect();
        let refs: Vec<&[f64]> = frame.iter().map(|v| v.as_slice()).collect();
        let sum: f64 = (0..total_cells)
            .into_par_iter()
            .map(|flat| {
                let mut idx = flat;
                let mut vars = [0.0f64; 5];
                for d in 0..4 {
                    vars[d] = (idx % grid) as f64 * h;
                    idx /= grid;
                }
                vars[4] = t;
                tgv.eval(&vars, &refs)
            })
            .sum();
        Ok(sum * h.powi(4))
    }

    /// The derived divergence-free field X with i_X μ = d(β̇ ∧ β) and the
    /// measured foliation carried by the exact 2-form dβ (the kernel
    /// distribution of dβ, integrable since dβ is closed and decomposable,
    /// is not itself integrated numerically).
    pub fn derived_field_and_foliation(
        &self,
        t: f64,
        mu: &FormField,
    ) -> Result<(VectorField, MeasuredFoliation)> {
        self.validate(t, 64, 7)?;
        let beta = self.beta_sym();
        let source = beta.dt().wedge(&beta).d();
        let manifold = self.manifold;
        let mu = mu.clone();
        let source_form =
            FormField::from_sym(manifold, &source, t, format!("d(tgv_primitive)[{}]", self.name));
        let name = format!("X[{}]", self.name);
        let field = VectorField::stationary(manifold, name, move |p| {
            solve_interior(&mu, &source_form, p).expect("nondegenerate volume form")
        });
        let beta_field = FormField::from_sym(manifold, &beta, t, format!("beta[{}]", self.name));
        Ok((field, MeasuredFoliation::ExactForm { beta: beta_field }))
    }

    /// Residual of the identity
    /// β̇ ∧ β ∧ dβ = d(α̇ ∧ β ∧ γ) - α̇ ∧ β ∧ α ∧ δ
    /// with γ, δ from the successive division steps
    /// dβ = α ∧ γ and dγ - β ∧ γ = α ∧ δ.
    pub fn eq_alt_residual(&self, t: f64, probe_count: usize) -> Result<f64> {
        self.validate(t, probe_count.min(64), 7)?;
        let alpha = &self.alpha;
        let v = &self.transversal;
        let beta = self.beta_sym();
        let gamma = beta.d().interior(v);
        let w = gamma.d().sub(&beta.wedge(&gamma));
        let delta = w.interior(v);

        // Division-step residuals must vanish before the identity makes sense.
        let div1 = beta.d().sub(&alpha.wedge(&gamma));
        let div2 = w.sub(&alpha.wedge(&delta));
        let dim = self.dim();
        for vars in self.probes(t, probe_count.min(64), 17) {
            let r1 = sup_on_frames(&div1, &vars, dim);
            let r2 = sup_on_frames(&div2, &vars, dim);
            if r1 > DIVISION_BOUND || r2 > DIVISION_BOUND {
                return Err(Error::DivisionStep {
                    residual: r1.max(r2),
                });
            }
        }

        let lhs = beta.dt().wedge(&beta).wedge(&beta.d());
        let alpha_dot = alpha.dt();
        let rhs = alpha_dot
            .wedge(&beta)
            .wedge(&gamma)
            .d()
            .sub(&alpha_dot.wedge(&beta).wedge(&alpha).wedge(&delta));
        let diff = lhs.sub(&rhs);
        let mut worst = 0.0f64;
        for vars in self.probes(t, probe_count, 19) {
            worst = worst.max(sup_on_frames(&diff, &vars, dim));
        }
        Ok(worst)
    }

    /// The family with α replaced by f·α (f nowhere zero) and V by V/f.
    pub fn rescaled(&self, f: Expr, label: &str) -> FoliationFamily {
        let mut out = self.clone();
        out.name = format!("{}·{label}", self.name);
        out.alpha = self.alpha.scale(f.clone());
        out.transversal = self
            .transversal
            .iter()
            .map(|vi| Expr::div(vi.clone(), f.clone()))
            .collect();
        out
    }

    /// The same family with a different transversal field (for gauge tests).
    pub fn with_transversal(&self, v: Vec<Expr>) -> FoliationFamily {
        let mut out = self.clone();
        out.transversal = v;
        out
    }
}

/// Solve `i_X μ = σ` for X on the tangent space at `p` (σ of degree n-1).
fn solve_interior(mu: &FormField, sigma: &FormField, p: &Point) -> Result<Vec<f64>> {
    let m = mu.manifold();
    let frame = m.orthonormal_frame(p);
    let n = frame.len();
    let mut a = nalgebra::DMatrix::zeros(n, n);
    let mut b = nalgebra::DVector::zeros(n);
    for row in 0..n {
        // Test tuple: frame with entry `row` removed.
        let tuple: Vec<&[f64]> = (0..n)
            .filter(|&i| i != row)
            .map(|i| frame[i].as_slice())
            .collect();
        b[row] = sigma.eval(p, &tuple);
        for col in 0..n {
            let mut all: Vec<&[f64]> = Vec::with_capacity(n);
            all.push(&frame[col]);
            all.extend_from_slice(&tuple);
            a[(row, col)] = mu.eval(p, &all);
        }
    }
    let svd = a.svd(true, true);
    let smin = svd
        .singular_values
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min);
    if smin < 1e-12 {
        return Err(Error::SingularSolve {
            point: p.coords.clone(),
            cond: f64::INFINITY,
        });
    }
    let x = svd.solve(&b, 0.0).expect("svd solve");
    let mut out = vec![0.0; frame[0].len()];
    for (c, f) in x.iter().zip(&frame) {
        for (o, fi) in out.iter_mut().zip(f) {
            *o += c * fi;
        }
    }
    Ok(out)
}

/// Sup of a symbolic form over all coordinate-frame tuples at one point.
fn sup_on_frames(form: &SymForm, vars: &[f64], dim: usize) -> f64 {
    let frame: Vec<Vec<f64>> = (0..dim)
        .map(|i| {
            let mut e = vec![0.0; dim];
            e[i] = 1.0;
            e
        })
        .collect();
    let mut worst = 0.0f64;
    for mask in crate::util::k_subsets(dim, form.degree) {
        let tuple: Vec<&[f64]> = crate::util::mask_indices(mask)
            .into_iter()
            .map(|i| frame[i].as_slice())
            .collect();
        worst = worst.max(form.eval(vars, &tuple).abs());
    }
    worst
}

/// Sup of a form field over all coordinate-frame tuples at one point.
fn sup_form_on_frames(form: &FormField, p: &Point) -> f64 {
    let dim = form.manifold().dim();
    let frame: Vec<Vec<f64>> = (0..dim)
        .map(|i| {
            let mut e = vec![0.0; dim];
            e[i] = 1.0;
            e
        })
        .collect();
    let mut worst = 0.0f64;
    for mask in crate::util::k_subsets(dim, form.degree()) {
        let tuple: Vec<&[f64]> = crate::util::mask_indices(mask)
            .into_iter()
            .map(|i| frame[i].as_slice())
            .collect();
        worst = worst.max(form.eval(p, &tuple).abs());
    }
    worst
}

/// A constructed integrand together with its independently measured
/// closedness residual.
pub struct FormOutput {
    pub form: FormField,
    pub sym: SymForm,
    pub closedness_residual: f64,
}

/// Residual report for one family at one time, emitted as JSON by the CLI.
#[derive(Debug, Clone, Serialize)]
pub struct FamilyReport {
    pub family: String,
    pub t: f64,
    pub beta_residual: f64,
    pub gv_closedness: f64,
    pub tgv_closedness: f64,
    pub dbeta_wedge_dbeta: f64,
    pub eq_alt_residual: f64,
    pub derived_divergence_residual: f64,
    pub tgv_integral: Option<f64>,
}

/// Run the full residual suite on a family.
pub fn family_report(
    fam: &FoliationFamily,
    t: f64,
    probe_count: usize,
    with_integral: Option<usize>,
) -> Result<FamilyReport> {
    let dim = fam.dim();
    let beta = fam.beta_sym();
    fam.beta_from_alpha(t)?;
    let beta_resid_form = fam.alpha.d().sub(&fam.alpha.wedge(&beta));
    let dbdb = beta.d().wedge(&beta.d());
    let mut beta_residual = 0.0f64;
    let mut dbeta_sq = 0.0f64;
    for vars in fam.probes(t, probe_count, 23) {
        beta_residual = beta_residual.max(sup_on_frames(&beta_resid_form, &vars, dim));
        dbeta_sq = dbeta_sq.max(sup_on_frames(&dbdb, &vars, dim));
    }
    let gv = fam.gv_integrand(t)?;
    let tgv = fam.tgv_integrand(t)?;
    let eq_alt = fam.eq_alt_residual(t, probe_count)?;

    let mu = fam.manifold.volume_form();
    let (x, _) = fam.derived_field_and_foliation(t, &mu)?;
    let mut rng = rng_stream(29, 0);
    let probes: Vec<Point> = fam
        .probes(t, 32, 31)
        .into_iter()
        .map(|vars| Point::raw(fam.manifold, 0, vars[..dim].to_vec()))
        .chain((0..8).map(|_| fam.manifold.sample_uniform(&mut rng)))
        .collect();
    let div = crate::fields::divergence_residual(&x, &mu, &probes);

    let tgv_integral = match with_integral {
        Some(grid) => Some(fam.tgv_integral(t, grid)?),
        None => None,
    };

    Ok(FamilyReport {
        family: fam.name.clone(),
        t,
        beta_residual,
        gv_closedness: gv.closedness_residual,
        tgv_closedness: tgv.closedness_residual,
        dbeta_wedge_dbeta: dbeta_sq,
        eq_alt_residual: eq_alt,
        derived_divergence_residual: div,
        tgv_integral,
    })
}

// ---- Family catalog -------------------------------------------------------------

/// The plane foliation α = dx3 on T⁴ (β = 0).
pub fn family_plane() -> FoliationFamily {
    let dim = 4;
    let mut coeffs = vec![Expr::zero(); dim];
    coeffs[2] = Expr::one();
    let mut v = vec![Expr::zero(); dim];
    v[2] = Expr::one();
    FoliationFamily {
        name: "plane".into(),
        manifold: Manifold::Torus(4),
        alpha: SymForm::one_form(dim, coeffs),
        transversal: v,
        probe_lo: vec![0.0; 4],
        probe_hi: vec![2.0 * std::f64::consts::PI; 4],
    }
}

/// α = e^{x3} dx1 on a chart box, V = e^{-x3} ∂1; by hand β = -dx3.
pub fn family_graph_exponential() -> FoliationFamily {
    let dim = 4;
    let z = Expr::var(2);
    let mut coeffs = vec![Expr::zero(); dim];
    coeffs[0] = Expr::exp(z.clone());
    let mut v = vec![Expr::zero(); dim];
    v[0] = Expr::exp(Expr::neg(z));
    FoliationFamily {
        name: "graph_exp".into(),
        manifold: Manifold::Torus(4),
        alpha: SymForm::one_form(dim, coeffs),
        transversal: v,
        probe_lo: vec![0.0; 4],
        probe_hi: vec![1.0; 4],
    }
}

/// α(t) = e^{t·x3} dx1 — every division form is computable by hand
/// (β = -t dx3, γ = δ = 0).
pub fn family_exponential_in_time() -> FoliationFamily {
    let dim = 4;
    let tz = Expr::mul(Expr::var(4), Expr::var(2));
    let mut coeffs = vec![Expr::zero(); dim];
    coeffs[0] = Expr::exp(tz.clone());
    let mut v = vec![Expr::zero(); dim];
    v[0] = Expr::exp(Expr::neg(tz));
    FoliationFamily {
        name: "exp_tz".into(),
        manifold: Manifold::Torus(4),
        alpha: SymForm::one_form(dim, coeffs),
        transversal: v,
        probe_lo: vec![0.0; 4],
        probe_hi: vec![1.0; 4],
    }
}

/// Periodic family with nonvanishing β̇, dβ, γ, δ: α = e^g dx3 with
/// g = 0.4(sin x1 cos x3 + sin x2 sin x3) + 0.3 t sin x4.
pub fn family_wavy() -> FoliationFamily {
    let dim = 4;
    let (x1, x2, x3, x4, t) = (
        Expr::var(0),
        Expr::var(1),
        Expr::var(2),
        Expr::var(3),
        Expr::var(4),
    );
    let g = Expr::add(
        Expr::mul(
            Expr::constant(0.4),
            Expr::add(
                Expr::mul(Expr::sin(x1), Expr::cos(x3.clone())),
                Expr::mul(Expr::sin(x2), Expr::sin(x3.clone())),
            ),
        ),
        Expr::mul(Expr::constant(0.3), Expr::mul(t, Expr::sin(x4))),
    );
    let mut coeffs = vec![Expr::zero(); dim];
    coeffs[2] = Expr::exp(g.clone());
    let mut v = vec![Expr::zero(); dim];
    v[2] = Expr::exp(Expr::neg(g));
    FoliationFamily {
        name: "wavy".into(),
        manifold: Manifold::Torus(4),
        alpha: SymForm::one_form(dim, coeffs),
        transversal: v,
        probe_lo: vec![0.0; 4],
        probe_hi: vec![2.0 * std::f64::consts::PI; 4],
    }
}
