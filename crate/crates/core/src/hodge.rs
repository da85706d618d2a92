//! Harmonic projection, Green's operator, and the linking form on flat tori,
//! realised exactly on band-limited Fourier forms.
//!
//! On the flat torus R^n / 2πZ^n with orthonormal coframe dx_i, the Hodge
//! Laplacian acts mode-wise as multiplication by |k|², so the harmonic
//! projection keeps the zero modes and the Green's operator divides the rest
//! by |k|². The linking kernel is assembled from the Green's kernel by
//! y-differentiation, the y-Hodge star, and the bidegree sign
//! (-1)^{(n-s)s}; all operator identities hold coefficientwise in the
//! truncated arithmetic, so residuals are at floating-point level.
//!
//! Sign conventions for *, d* and the bidegree sign are fixed in one place
//! (`hodge_star_sign`, `codifferential_sign`, `eps_sign`) by requiring
//! ΔG = Id - H and the kernel reproduction identity to hold; the test suite
//! pins both against brute-force grid quadrature.

use std::collections::HashMap;
use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;

use crate::util::{k_subsets, mask_indices, shuffle_sign};

/// Wavevector with up to 4 components (tori up to T⁴).
pub type Wave = [i16; 4];

fn wave_neg(k: &Wave) -> Wave {
    [-k[0], -k[1], -k[2], -k[3]]
}

fn wave_norm_sq(k: &Wave) -> f64 {
    k.iter().map(|&c| f64::from(c) * f64::from(c)).sum()
}

fn wave_is_zero(k: &Wave) -> bool {
    k.iter().all(|&c| c == 0)
}

/// A band-limited differential form on the flat n-torus stored as Fourier
/// coefficients per coframe component:
/// `α = Σ_{k, I} c_{k,I} e^{i k·x} dx_I`.
#[derive(Debug, Clone)]
pub struct FourierForm {
    pub n: usize,
    pub degree: usize,
    pub band_limit: i16,
    coeffs: HashMap<(Wave, u32), Complex64>,
}

const DROP_EPS: f64 = 0.0;

impl FourierForm {
    pub fn zero(n: usize, degree: usize, band_limit: i16) -> FourierForm {
        assert!(n <= 4, "tori up to dimension 4");
        FourierForm {
            n,
            degree,
            band_limit,
            coeffs: HashMap::new(),
        }
    }

    pub fn add_coeff(&mut self, k: Wave, mask: u32, c: Complex64) {
        debug_assert_eq!(mask.count_ones() as usize, self.degree);
        debug_assert!(k
            .iter()
            .all(|&ki| i32::from(ki).unsigned_abs() <= self.band_limit as u32));
        let entry = self.coeffs.entry((k, mask)).or_insert(Complex64::new(0.0, 0.0));
        *entry += c;
        if entry.norm() <= DROP_EPS {
            self.coeffs.remove(&(k, mask));
        }
    }

    pub fn coeff(&self, k: Wave, mask: u32) -> Complex64 {
        self.coeffs
            .get(&(k, mask))
            .copied()
            .unwrap_or(Complex64::new(0.0, 0.0))
    }

    pub fn iter(&self) -> impl Iterator<Item = (&(Wave, u32), &Complex64)> {
        self.coeffs.iter()
    }

    pub fn map_coeffs(&self, f: impl Fn(&Wave, u32, Complex64) -> Complex64) -> FourierForm {
        let mut out = FourierForm::zero(self.n, self.degree, self.band_limit);
        for ((k, mask), c) in &self.coeffs {
            let v = f(k, *mask, *c);
            if v.norm() > 0.0 {
                out.add_coeff(*k, *mask, v);
            }
        }
        out
    }

    pub fn scale(&self, s: f64) -> FourierForm {
        self.map_coeffs(|_, _, c| c * s)
    }

    pub fn add(&self, other: &FourierForm) -> FourierForm {
        assert_eq!(self.degree, other.degree);
        let mut out = self.clone();
        out.band_limit = out.band_limit.max(other.band_limit);
        for ((k, mask), c) in &other.coeffs {
            out.add_coeff(*k, *mask, *c);
        }
        out
    }

    pub fn sub(&self, other: &FourierForm) -> FourierForm {
        self.add(&other.scale(-1.0))
    }

    /// Largest coefficient magnitude.
    pub fn sup_coeff(&self) -> f64 {
        self.coeffs.values().map(|c| c.norm()).fold(0.0, f64::max)
    }

    /// Reality check residual: `|conj(c(k, I)) - c(-k, I)|` summed.
    pub fn reality_residual(&self) -> f64 {
        let mut worst = 0.0f64;
        for ((k, mask), c) in &self.coeffs {
            let mirror = self.coeff(wave_neg(k), *mask);
            worst = worst.max((c.conj() - mirror).norm());
        }
        worst
    }

    /// Random real band-limited form with coefficients of unit scale.
    pub fn random_real(
        n: usize,
        degree: usize,
        band_limit: i16,
        rng: &mut impl Rng,
    ) -> FourierForm {
        let mut out = FourierForm::zero(n, degree, band_limit);
        let masks = k_subsets(n, degree);
        for k in waves_up_to(n, band_limit) {
            // Fill each {k, -k} pair once, from the lexicographically
            // positive representative.
            if !lex_positive(&k) && !wave_is_zero(&k) {
                continue;
            }
            for &mask in &masks {
                let c = if wave_is_zero(&k) {
                    Complex64::new(rng.gen::<f64>() - 0.5, 0.0)
                } else {
                    Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5)
                };
                out.add_coeff(k, mask, c);
                if !wave_is_zero(&k) {
                    out.add_coeff(wave_neg(&k), mask, c.conj());
                }
            }
        }
        out
    }

    /// Pointwise evaluation on coordinate tangent vectors, for interop tests
    /// against the chart-form machinery.
    pub fn eval(&self, x: &[f64], vectors: &[&[f64]]) -> f64 {
        let mut total = Complex64::new(0.0, 0.0);
        for ((k, mask), c) in &self.coeffs {
            let phase: f64 = k
                .iter()
                .take(self.n)
                .enumerate()
                .map(|(i, &ki)| f64::from(ki) * x[i])
                .sum();
            total += c * Complex64::from_polar(1.0, phase) * minor(*mask, vectors);
        }
        total.re
    }

    // ---- Exterior calculus ----------------------------------------------------

    /// Exterior derivative: `d(c e^{ikx} dx_I) = Σ_j i k_j c e^{ikx} dx_j ∧ dx_I`.
    /// On top-degree forms this is the zero form (returned as an empty
    /// top-degree form to keep the degree arithmetic in range).
    pub fn d(&self) -> FourierForm {
        if self.degree == self.n {
            return FourierForm::zero(self.n, self.n, self.band_limit);
        }
        let mut out = FourierForm::zero(self.n, self.degree + 1, self.band_limit);
        for ((k, mask), c) in &self.coeffs {
            for j in 0..self.n {
                let bit = 1u32 << j;
                if mask & bit != 0 || k[j] == 0 {
                    continue;
                }
                let sign = shuffle_sign(bit, *mask);
                let v = Complex64::new(0.0, f64::from(k[j])) * c * sign;
                out.add_coeff(*k, mask | bit, v);
            }
        }
        out
    }

    /// Hodge star with the orthonormal-coframe convention
    /// `*(dx_I) = sign(I, I^c) dx_{I^c}` (so dx_I ∧ *dx_I = vol).
    pub fn hodge_star(&self) -> FourierForm {
        let full: u32 = (1 << self.n) - 1;
        let mut out = FourierForm::zero(self.n, self.n - self.degree, self.band_limit);
        for ((k, mask), c) in &self.coeffs {
            let comp = full & !mask;
            out.add_coeff(*k, comp, c * shuffle_sign(*mask, comp));
        }
        out
    }

    /// Codifferential δ = (-1)^{n(k+1)+1} * d * on k-forms (zero on 0-forms).
    pub fn codifferential(&self) -> FourierForm {
        if self.degree == 0 {
            return FourierForm::zero(self.n, 0, self.band_limit);
        }
        let sign = codifferential_sign(self.n, self.degree);
        self.hodge_star().d().hodge_star().scale(sign)
    }

    /// Hodge Laplacian Δ = dδ + δd (degenerate summands dropped at the
    /// bottom and top degree).
    pub fn laplacian(&self) -> FourierForm {
        let mut out = FourierForm::zero(self.n, self.degree, self.band_limit);
        if self.degree > 0 {
            out = out.add(&self.codifferential().d());
        }
        if self.degree < self.n {
            out = out.add(&self.d().codifferential());
        }
        out
    }

    /// Harmonic projection: keep only the zero modes (flat-torus harmonic
    /// forms have constant coefficients).
    pub fn harmonic_projection(&self) -> FourierForm {
        self.map_coeffs(|k, _, c| if wave_is_zero(k) { c } else { Complex64::new(0.0, 0.0) })
    }

    /// Green's operator: divide nonzero modes by |k|², kill the zero mode.
    pub fn greens_operator(&self) -> FourierForm {
        self.map_coeffs(|k, _, c| {
            if wave_is_zero(k) {
                Complex64::new(0.0, 0.0)
            } else {
                c / wave_norm_sq(k)
            }
        })
    }
}

pub(crate) fn codifferential_sign(n: usize, k: usize) -> f64 {
    if (n * (k + 1) + 1) % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

fn minor(mask: u32, vectors: &[&[f64]]) -> f64 {
    let rows = mask_indices(mask);
    let kdim = vectors.len();
    if kdim == 0 {
        return 1.0;
    }
    let mut m = [0.0f64; 16];
    for (c, v) in vectors.iter().enumerate() {
        for (r, &row) in rows.iter().enumerate() {
            m[r * kdim + c] = v[row];
        }
    }
    crate::geometry::symform::det_in_place(&mut m, kdim)
}

/// All wavevectors with sup-norm ≤ band in the first n slots.
pub fn waves_up_to(n: usize, band: i16) -> Vec<Wave> {
    let mut out = vec![[0i16; 4]];
    for dim in 0..n {
        let mut next = Vec::with_capacity(out.len() * (2 * band as usize + 1));
        for w in &out {
            for v in -band..=band {
                let mut w2 = *w;
                w2[dim] = v;
                next.push(w2);
            }
        }
        out = next;
    }
    out
}

fn lex_positive(k: &Wave) -> bool {
    for &c in k {
        if c > 0 {
            return true;
        }
        if c < 0 {
            return false;
        }
    }
    false
}

// ---- Double forms (kernels on M × M) -----------------------------------------

/// A convolution-type double form on Tⁿ × Tⁿ:
/// `K(x, y) = Σ_{k, I, J} c_{k,I,J} e^{i k·(x - y)} dx_I ⊗ dy_J`.
#[derive(Debug, Clone)]
pub struct DoubleFormKernel {
    pub n: usize,
    pub band_limit: i16,
    coeffs: HashMap<(Wave, u32, u32), Complex64>,
}

impl DoubleFormKernel {
    pub fn zero(n: usize, band_limit: i16) -> DoubleFormKernel {
        DoubleFormKernel {
            n,
            band_limit,
            coeffs: HashMap::new(),
        }
    }

    fn add(&mut self, k: Wave, xi: u32, yj: u32, c: Complex64) {
        let e = self
            .coeffs
            .entry((k, xi, yj))
            .or_insert(Complex64::new(0.0, 0.0));
        *e += c;
    }

    /// Bigrading bookkeeping: all stored components must have x-degree plus
    /// y-degree equal per diagonal block they came from; components outside
    /// the expected bigrading list are absent.
    pub fn bigradings(&self) -> Vec<(usize, usize)> {
        let mut grades: Vec<(usize, usize)> = self
            .coeffs
            .keys()
            .map(|(_, i, j)| (i.count_ones() as usize, j.count_ones() as usize))
            .collect();
        grades.sort_unstable();
        grades.dedup();
        grades
    }

    /// The Green's kernel g(x, y): for each nonzero mode and each coframe
    /// index set I, the component `(2π)^{-n} |k|^{-2} e^{ik(x-y)} dx_I ⊗ dy_I`.
    pub fn greens_kernel(n: usize, band: i16) -> DoubleFormKernel {
        let mut out = DoubleFormKernel::zero(n, band);
        let norm = (2.0 * PI).powi(-(n as i32));
        for k in waves_up_to(n, band) {
            if wave_is_zero(&k) {
                continue;
            }
            let c = Complex64::new(norm / wave_norm_sq(&k), 0.0);
            for deg in 0..=n {
                for mask in k_subsets(n, deg) {
                    out.add(k, mask, mask, c);
                }
            }
        }
        out
    }

    /// Exterior derivative in the y variable:
    /// `d_y (e^{-ik·y} dy_J) = Σ_j (-i k_j) e^{-ik·y} dy_j ∧ dy_J`.
    pub fn d_y(&self) -> DoubleFormKernel {
        let mut out = DoubleFormKernel::zero(self.n, self.band_limit);
        for ((k, xi, yj), c) in &self.coeffs {
            for j in 0..self.n {
                let bit = 1u32 << j;
                if yj & bit != 0 || k[j] == 0 {
                    continue;
                }
                let sign = shuffle_sign(bit, *yj);
                out.add(
                    *k,
                    *xi,
                    yj | bit,
                    c * Complex64::new(0.0, -f64::from(k[j])) * sign,
                );
            }
        }
        out
    }

    /// Hodge star in the y variable.
    pub fn star_y(&self) -> DoubleFormKernel {
        let full: u32 = (1 << self.n) - 1;
        let mut out = DoubleFormKernel::zero(self.n, self.band_limit);
        for ((k, xi, yj), c) in &self.coeffs {
            let comp = full & !yj;
            out.add(*k, *xi, comp, c * shuffle_sign(*yj, comp));
        }
        out
    }

    /// The bidegree sign operator: multiply the components whose y-degree is
    /// s by (-1)^{(n-s)s}.
    pub fn eps_sign(&self) -> DoubleFormKernel {
        let mut out = DoubleFormKernel::zero(self.n, self.band_limit);
        for ((k, xi, yj), c) in &self.coeffs {
            let s = yj.count_ones() as usize;
            let sign = if ((self.n - s) * s) % 2 == 0 { 1.0 } else { -1.0 };
            out.add(*k, *xi, *yj, c * sign);
        }
        out
    }

    /// Pair with a form in the y variable: `β ↦ ∫_y K(x, y) ∧ β(y)`, where
    /// the y-parts wedge to the top degree and integrate over the torus.
    pub fn pair_with(&self, beta: &FourierForm) -> FourierForm {
        assert_eq!(self.n, beta.n);
        assert!(beta.degree >= 1, "pairing needs a positive-degree form");
        let full: u32 = (1 << self.n) - 1;
        let vol = (2.0 * PI).powi(self.n as i32);
        // Our kernels have bigrading (r, n - r - 1), so the components whose
        // y-degree complements β have x-degree deg(β) - 1.
        let mut out = FourierForm::zero(
            self.n,
            beta.degree - 1,
            self.band_limit.max(beta.band_limit),
        );
        for ((k, xi, yj), c) in &self.coeffs {
            let comp = full & !yj;
            if comp.count_ones() as usize != beta.degree {
                continue;
            }
            let cb = beta.coeff(*k, comp);
            if cb.norm() == 0.0 {
                continue;
            }
            let sign = shuffle_sign(*yj, comp);
            debug_assert_eq!(xi.count_ones() as usize, out.degree, "mixed output degrees");
            out.add_coeff(*k, *xi, c * cb * sign * vol);
        }
        out
    }

    /// Pointwise Frobenius norm of the kernel at (x, y): the root sum of
    /// squares over all bigraded components.
    pub fn eval_norm(&self, x: &[f64], y: &[f64]) -> f64 {
        let mut per_component: HashMap<(u32, u32), Complex64> = HashMap::new();
        for ((k, xi, yj), c) in &self.coeffs {
            let phase: f64 = (0..self.n)
                .map(|i| f64::from(k[i]) * (x[i] - y[i]))
                .sum();
            let e = Complex64::from_polar(1.0, phase);
            *per_component
                .entry((*xi, *yj))
                .or_insert(Complex64::new(0.0, 0.0)) += c * e;
        }
        per_component
            .values()
            .map(|v| v.norm_sqr())
            .sum::<f64>()
            .sqrt()
    }
}

/// The linking kernel `L(x, y) = (-1)^ε *_y d_y g(x, y)` truncated at the
/// band limit.
pub fn linking_kernel(n: usize, band: i16) -> DoubleFormKernel {
    DoubleFormKernel::greens_kernel(n, band).d_y().star_y().eps_sign()
}

/// Residual of the kernel reproduction identity
/// `∫_y L(x,y) ∧ dα(y) = α - H(α) + dh`, with `h = -G(δα)` computed
/// explicitly. Exact in truncated Fourier arithmetic, so this returns a
/// floating-point-level number.
pub fn fundl_residual(alpha: &FourierForm) -> f64 {
    let kernel = linking_kernel(alpha.n, alpha.band_limit);
    fundl_residual_with(&kernel, alpha)
}

/// [`fundl_residual`] against a prebuilt kernel (reused across many forms).
pub fn fundl_residual_with(kernel: &DoubleFormKernel, alpha: &FourierForm) -> f64 {
    debug_assert!(kernel.band_limit >= alpha.band_limit);
    let lhs = kernel.pair_with(&alpha.d());
    let h = alpha.codifferential().greens_operator().scale(-1.0);
    let rhs = alpha.sub(&alpha.harmonic_projection()).add(&h.d());
    lhs.sub(&rhs).sup_coeff()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn sin_x_dx(n: usize, band: i16) -> FourierForm {
        // sin(x_0) dx_0 = (e^{ix_0} - e^{-ix_0})/(2i) dx_0.
        let mut f = FourierForm::zero(n, 1, band);
        let mut k = [0i16; 4];
        k[0] = 1;
        f.add_coeff(k, 0b1, Complex64::new(0.0, -0.5));
        f.add_coeff(wave_neg(&k), 0b1, Complex64::new(0.0, 0.5));
        f
    }

    #[test]
    fn harmonic_projection_examples() {
        let mut constant = FourierForm::zero(2, 1, 4);
        constant.add_coeff([0, 0, 0, 0], 0b1, Complex64::new(2.0, 0.0));
        assert_eq!(
            constant.harmonic_projection().coeff([0, 0, 0, 0], 0b1),
            Complex64::new(2.0, 0.0)
        );
        let s = sin_x_dx(2, 4);
        assert_eq!(s.harmonic_projection().sup_coeff(), 0.0);
        // Idempotence.
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let r = FourierForm::random_real(2, 1, 3, &mut rng);
        let h = r.harmonic_projection();
        assert!(h.harmonic_projection().sub(&h).sup_coeff() == 0.0);
    }

    #[test]
    fn greens_operator_examples() {
        let s = sin_x_dx(3, 4);
        // |k|² = 1 eigenform.
        assert!(s.greens_operator().sub(&s).sup_coeff() < 1e-15);
        // Harmonic input → 0.
        let mut constant = FourierForm::zero(3, 2, 4);
        constant.add_coeff([0, 0, 0, 0], 0b11, Complex64::new(1.5, 0.0));
        assert_eq!(constant.greens_operator().sup_coeff(), 0.0);
    }

    #[test]
    fn laplacian_is_mode_multiplication() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for n in [2usize, 3] {
            for degree in 0..=n {
                let a = FourierForm::random_real(n, degree, 3, &mut rng);
                let lap = a.laplacian();
                let expect = a.map_coeffs(|k, _, c| c * wave_norm_sq(k));
                assert!(
                    lap.sub(&expect).sup_coeff() < 1e-12,
                    "n={n} degree={degree}"
                );
            }
        }
    }

    #[test]
    fn delta_g_is_identity_minus_harmonic() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for n in [2usize, 3] {
            for degree in 0..=n {
                let a = FourierForm::random_real(n, degree, 3, &mut rng);
                let lhs = a.greens_operator().laplacian();
                let rhs = a.sub(&a.harmonic_projection());
                assert!(lhs.sub(&rhs).sup_coeff() < 1e-13);
                // HG = 0 and GH = 0 exactly.
                assert_eq!(a.greens_operator().harmonic_projection().sup_coeff(), 0.0);
                assert_eq!(a.harmonic_projection().greens_operator().sup_coeff(), 0.0);
            }
        }
    }

    #[test]
    fn g_commutes_with_d_and_laplacian() {
        let mut rng = ChaCha8Rng::seed_from_u64(29);
        let a = FourierForm::random_real(3, 1, 3, &mut rng);
        let gd = a.d().greens_operator();
        let dg = a.greens_operator().d();
        assert!(gd.sub(&dg).sup_coeff() < 1e-13);
        let gl = a.laplacian().greens_operator();
        let lg = a.greens_operator().laplacian();
        assert!(gl.sub(&lg).sup_coeff() < 1e-12);
    }

    #[test]
    fn random_real_forms_satisfy_reality() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let a = FourierForm::random_real(3, 2, 4, &mut rng);
        assert_eq!(a.reality_residual(), 0.0);
    }

    #[test]
    fn kernel_bigradings_are_consistent() {
        let kernel = linking_kernel(3, 2);
        // From degree-r blocks of g: x-degree r, y-degree n - r - 1.
        for (xd, yd) in kernel.bigradings() {
            assert_eq!(xd + yd, 2, "off-bigrading component ({xd},{yd})");
        }
    }

    #[test]
    fn fundl_residual_hand_cases() {
        // Harmonic form: both sides vanish.
        let mut constant = FourierForm::zero(3, 1, 2);
        constant.add_coeff([0, 0, 0, 0], 0b1, Complex64::new(0.7, 0.0));
        assert!(fundl_residual(&constant) < 1e-15);

        // Single-mode 1-form sin(x_0) dx_1 on T³.
        let mut a = FourierForm::zero(3, 1, 2);
        let mut k = [0i16; 4];
        k[0] = 1;
        a.add_coeff(k, 0b10, Complex64::new(0.0, -0.5));
        a.add_coeff(wave_neg(&k), 0b10, Complex64::new(0.0, 0.5));
        assert!(fundl_residual(&a) < 1e-12);
    }

    #[test]
    fn fundl_residual_random_band_limited() {
        let mut rng = ChaCha8Rng::seed_from_u64(37);
        for n in [2usize, 3] {
            for degree in 1..=(n - 1) {
                let a = FourierForm::random_real(n, degree, 3, &mut rng);
                let r = fundl_residual(&a);
                assert!(r < 1e-10, "n={n} degree={degree}: residual {r}");
            }
        }
    }

    /// Brute-force oracle: compare the coefficient-space pairing against a
    /// trapezoidal grid quadrature of `∫_y L(x,y) ∧ dα(y)` at a few x's.
    /// The trapezoid rule is exact for band-limited integrands once the grid
    /// beats the Nyquist rate.
    #[test]
    fn pairing_matches_grid_quadrature_on_t2() {
        let n = 2;
        let band = 2i16;
        let kernel = linking_kernel(n, band);
        let mut alpha = FourierForm::zero(n, 1, band);
        let k1 = [1i16, 0, 0, 0];
        alpha.add_coeff(k1, 0b1, Complex64::new(0.0, -0.5));
        alpha.add_coeff(wave_neg(&k1), 0b1, Complex64::new(0.0, 0.5));
        let k2 = [1i16, -2, 0, 0];
        alpha.add_coeff(k2, 0b10, Complex64::new(0.3, 0.1));
        alpha.add_coeff(wave_neg(&k2), 0b10, Complex64::new(0.3, -0.1));
        let da = alpha.d();
        let paired = kernel.pair_with(&da);

        // Grid quadrature: for output component dx_I at x, integrate
        // Σ_J K_{I,J}(x,y)·(dα)_J'(y)·sign, matching pair_with's convention.
        let grid = 12usize; // > 2·(2·band)+1 points per dim
        let full: u32 = (1 << n) - 1;
        let h = 2.0 * PI / grid as f64;
        for xpair in [(0.4f64, 1.1f64), (2.0, 5.3)] {
            let xv = [xpair.0, xpair.1, 0.0, 0.0];
            for mask_out in k_subsets(n, 1) {
                let mut acc = Complex64::new(0.0, 0.0);
                for gy0 in 0..grid {
                    for gy1 in 0..grid {
                        let y = [gy0 as f64 * h, gy1 as f64 * h, 0.0, 0.0];
                        for ((k, xi, yj), c) in kernel.coeffs.iter() {
                            if *xi != mask_out {
                                continue;
                            }
                            let comp = full & !yj;
                            let b = da.coeff(*k, comp);
                            if b.norm() == 0.0 {
                                continue;
                            }
                            // e^{ik(x-y)} · e^{iky} = e^{ikx}: assemble both
                            // factors explicitly for the quadrature.
                            let phase_k: f64 =
                                (0..n).map(|i| f64::from(k[i]) * (xv[i] - y[i])).sum();
                            let mut phase_b = 0.0;
                            for i in 0..n {
                                phase_b += f64::from(k[i]) * y[i];
                            }
                            acc += c
                                * Complex64::from_polar(1.0, phase_k)
                                * b
                                * Complex64::from_polar(1.0, phase_b)
                                * shuffle_sign(*yj, comp);
                        }
                    }
                }
                acc *= h * h;
                // Coefficient-space value at the same x.
                let mut expect = Complex64::new(0.0, 0.0);
                for ((k, mask), c) in paired.iter() {
                    if *mask != mask_out {
                        continue;
                    }
                    let phase: f64 = (0..n).map(|i| f64::from(k[i]) * xv[i]).sum();
                    expect += c * Complex64::from_polar(1.0, phase);
                }
                assert!(
                    (acc - expect).norm() < 1e-10,
                    "component {mask_out:#b}: grid {acc} vs coeff {expect}"
                );
            }
        }
    }

    /// Singularity growth: on T³ the kernel grows like r^{1-n} = r^{-2}
    /// towards the diagonal over the radii the band limit can resolve.
    /// The sharply truncated kernel rings in the sup norm (Gibbs lobes), so
    /// the radial profile is measured through the angular mean of |L|, which
    /// follows the power law cleanly.
    #[test]
    fn kernel_growth_rate_near_diagonal() {
        let kernel = linking_kernel(3, 12);
        let x = [0.9f64, 2.1, 4.2];
        let radii: Vec<f64> = (0..6).map(|i| 0.375 * 1.25f64.powi(i)).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        let dirs: Vec<[f64; 3]> = (0..120)
            .map(|_| {
                let mut d = [0.0f64; 3];
                let mut norm = 0.0;
                for v in d.iter_mut() {
                    *v = rng.gen::<f64>() - 0.5;
                    norm += *v * *v;
                }
                let norm = norm.sqrt();
                d.iter_mut().for_each(|v| *v /= norm);
                d
            })
            .collect();
        let mut logs = Vec::new();
        for &r in &radii {
            let mut mean = 0.0;
            for d in &dirs {
                let y = [x[0] + r * d[0], x[1] + r * d[1], x[2] + r * d[2]];
                mean += kernel.eval_norm(&x, &y);
            }
            mean /= dirs.len() as f64;
            logs.push((r.ln(), mean.ln()));
        }
        // Least-squares slope of log|L| vs log r.
        let n = logs.len() as f64;
        let sx: f64 = logs.iter().map(|(a, _)| a).sum();
        let sy: f64 = logs.iter().map(|(_, b)| b).sum();
        let sxx: f64 = logs.iter().map(|(a, _)| a * a).sum();
        let sxy: f64 = logs.iter().map(|(a, b)| a * b).sum();
        let slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
        assert!(
            (slope - (-2.0)).abs() < 0.2,
            "growth slope {slope}, expected -2 ± 0.2"
        );
    }
}
