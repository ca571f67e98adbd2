//! Density and potential spaces on the torus.
//!
//! Densities live in the affine space X = {ρ ∈ H¹(𝕋) | ∫ρ = N}; the
//! strictly positive ones (X_{>0}, gapped away from zero) are the
//! v-representable set. Potentials are equivalence classes [v] = {v + c}
//! in H⁻¹(𝕋) modulo constants, stored with the zero-mean representative
//! v̂_0 = 0: that is the unique member pairing to zero with constants.
//!
//! Every v = f + ∇g with f, g ∈ L²; the minimal-norm decomposition is
//! per-mode least squares and realizes ‖v‖²_{H⁻¹} = ‖f‖² + ‖g‖².

use num_complex::Complex64;
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::fourier::{self, Space, TorusFunction};
use crate::quadrature;

/// Strict-positivity threshold for the grid minimum. Band-limited
/// projections of nonnegative data can undershoot by rounding; values
/// below this are treated as touching zero.
pub const POSITIVITY_TOL: f64 = 1e-10;

/// One-particle density: band-limited profile with ∫ρ = N, together with
/// the cached grid minimum η and the von Weizsäcker integral
/// A = ‖∇√ρ‖²_{L²}.
#[derive(Debug, Clone)]
pub struct DensityField {
    n_particles: usize,
    profile: TorusFunction,
    eta: f64,
    vw_integral: f64,
}

/// Membership report for the sets X, X_{>0} and the physical set I.
#[derive(Debug, Clone)]
pub struct MembershipReport {
    pub in_x: bool,
    pub in_xpos: bool,
    pub eta: f64,
    pub vw_integral: f64,
    /// The bound ‖ρ‖²_{H¹}/(4η): when η > 0 it dominates A and certifies
    /// membership in I. Infinite when η ≤ 0.
    pub in_i_bound: f64,
    pub bound_satisfied: bool,
}

impl DensityField {
    /// Normalize a real profile to ∫ρ = N and cache η and A.
    ///
    /// The input may contain content beyond the cutoff; it is projected.
    /// Negative or non-finite samples and nonpositive mean are rejected.
    pub fn from_samples(samples: &[f64], cutoff: usize, n_particles: usize) -> Result<Self> {
        if samples.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidDensity("non-finite sample".into()));
        }
        if let Some(bad) = samples.iter().find(|&&x| x < 0.0) {
            return Err(Error::InvalidDensity(format!(
                "negative sample {bad}: densities must satisfy ρ ≥ 0"
            )));
        }
        let profile = TorusFunction::from_samples(samples, cutoff)?;
        Self::from_profile(profile, n_particles)
    }

    /// Build from coefficients ordered k = -K..=K; rescaled to ∫ρ = N.
    pub fn from_coeffs(coeffs: Vec<Complex64>, n_particles: usize) -> Result<Self> {
        Self::from_profile(TorusFunction::from_coeffs(coeffs), n_particles)
    }

    pub fn from_profile(profile: TorusFunction, n_particles: usize) -> Result<Self> {
        if n_particles == 0 {
            return Err(Error::parameter("n_particles", "must be positive"));
        }
        if !profile.is_real(1e-9 * (1.0 + profile.norm(Space::LInf))) {
            return Err(Error::InvalidDensity("profile is not real".into()));
        }
        let mean = profile.coeff(0).re;
        if mean <= 0.0 || !mean.is_finite() {
            return Err(Error::InvalidDensity(format!("nonpositive mean {mean}")));
        }
        let scale = n_particles as f64 / mean;
        let mut coeffs: Vec<Complex64> = profile.coeffs().iter().map(|c| c * scale).collect();
        // Pin ∫ρ = N exactly; rescaling alone can land one ulp off.
        let mid = coeffs.len() / 2;
        coeffs[mid] = Complex64::new(n_particles as f64, 0.0);
        let profile = TorusFunction::from_coeffs(coeffs);
        let eta = profile
            .samples()
            .iter()
            .map(|c| c.re)
            .fold(f64::INFINITY, f64::min);
        let vw_integral = vw_integral_spectral(&profile);
        Ok(DensityField {
            n_particles,
            profile,
            eta,
            vw_integral,
        })
    }

    pub fn n_particles(&self) -> usize {
        self.n_particles
    }

    pub fn profile(&self) -> &TorusFunction {
        &self.profile
    }

    pub fn cutoff(&self) -> usize {
        self.profile.cutoff()
    }

    /// Minimum of ρ over the oversampled grid.
    pub fn eta(&self) -> f64 {
        self.eta
    }

    /// A = ‖∇√ρ‖²_{L²}, computed spectrally from √ρ on the grid.
    pub fn vw_integral(&self) -> f64 {
        self.vw_integral
    }

    /// von Weizsäcker energy ½‖∇√ρ‖²: the exact N=1 kinetic functional
    /// and a universal lower bound for the Lieb functional.
    pub fn vw_energy(&self) -> f64 {
        0.5 * self.vw_integral
    }

    pub fn is_strictly_positive(&self) -> bool {
        self.eta > POSITIVITY_TOL
    }

    pub fn membership(&self) -> MembershipReport {
        let h1 = self.profile.norm(Space::H1);
        let in_xpos = self.is_strictly_positive();
        let in_i_bound = if in_xpos {
            h1 * h1 / (4.0 * self.eta)
        } else {
            f64::INFINITY
        };
        MembershipReport {
            in_x: true,
            in_xpos,
            eta: self.eta,
            vw_integral: self.vw_integral,
            in_i_bound,
            bound_satisfied: self.vw_integral <= in_i_bound * (1.0 + 1e-9) + 1e-12,
        }
    }

    /// L² distance between two densities (coefficient route).
    pub fn l2_distance(&self, other: &DensityField) -> f64 {
        let cutoff = self.cutoff().max(other.cutoff()) as i64;
        (-cutoff..=cutoff)
            .map(|k| (self.profile.coeff(k) - other.profile.coeff(k)).norm_sqr())
            .sum::<f64>()
            .sqrt()
    }
}

/// A = ‖∇√ρ‖²: sample √ρ on the stored oversampled grid, transform, and
/// sum 4π²k²|ŝ_k|² over the full discrete band.
fn vw_integral_spectral(profile: &TorusFunction) -> f64 {
    let sqrt_samples: Vec<Complex64> = profile
        .samples()
        .iter()
        .map(|c| Complex64::new(c.re.max(0.0).sqrt(), 0.0))
        .collect();
    let m = sqrt_samples.len() as i64;
    let bins = fourier::dft_forward(&sqrt_samples);
    bins.iter()
        .enumerate()
        .map(|(j, c)| {
            let k = if (j as i64) <= m / 2 { j as i64 } else { j as i64 - m };
            4.0 * PI * PI * (k * k) as f64 * c.norm_sqr()
        })
        .sum()
}

/// Gauge-fixed distributional one-body potential [v] ∈ X*: Fourier
/// coefficients with v̂_0 = 0 exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct PotentialClass {
    cutoff: usize,
    /// Index i holds v̂_{i-K}; the middle entry is always zero.
    coeffs: Vec<Complex64>,
}

impl PotentialClass {
    /// Store the zero-mean representative of {v + c}: the mean mode is
    /// dropped, which is exactly the gauge quotient.
    pub fn from_coeffs(mut coeffs: Vec<Complex64>) -> Self {
        assert!(coeffs.len() % 2 == 1, "coefficients must span k = -K..=K");
        let cutoff = coeffs.len() / 2;
        coeffs[cutoff] = Complex64::default();
        PotentialClass { cutoff, coeffs }
    }

    pub fn from_function(f: &TorusFunction) -> Self {
        Self::from_coeffs(f.coeffs().to_vec())
    }

    pub fn zero(cutoff: usize) -> Self {
        Self::from_coeffs(vec![Complex64::default(); 2 * cutoff + 1])
    }

    /// Truncated delta comb of strength γ at the origin: v̂_k = γ for all
    /// k ≠ 0 (the delta has unit coefficients; the mean mode is gauge).
    /// Pairing with smooth φ approaches γ(φ(0) - ∫φ) as K grows.
    pub fn delta(gamma: f64, cutoff: usize) -> Result<Self> {
        if cutoff < 1 {
            return Err(Error::parameter("cutoff", "delta needs cutoff ≥ 1"));
        }
        let coeffs = vec![Complex64::new(gamma, 0.0); 2 * cutoff + 1];
        Ok(Self::from_coeffs(coeffs))
    }

    pub fn cutoff(&self) -> usize {
        self.cutoff
    }

    pub fn coeff(&self, k: i64) -> Complex64 {
        let kk = k + self.cutoff as i64;
        if kk < 0 || kk >= self.coeffs.len() as i64 {
            Complex64::default()
        } else {
            self.coeffs[kk as usize]
        }
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|c| c.re == 0.0 && c.im == 0.0)
    }

    pub fn as_function(&self) -> TorusFunction {
        TorusFunction::from_coeffs(self.coeffs.clone())
    }

    pub fn with_cutoff(&self, cutoff: usize) -> Self {
        Self::from_coeffs(self.as_function().with_cutoff(cutoff).coeffs().to_vec())
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self::from_coeffs(self.coeffs.iter().map(|c| c * factor).collect())
    }

    pub fn add(&self, other: &Self) -> Self {
        let cutoff = self.cutoff.max(other.cutoff);
        let coeffs: Vec<Complex64> = (-(cutoff as i64)..=cutoff as i64)
            .map(|k| self.coeff(k) + other.coeff(k))
            .collect();
        Self::from_coeffs(coeffs)
    }

    pub fn norm(&self, space: Space) -> f64 {
        self.as_function().norm(space)
    }

    /// Minimal-norm decomposition v = f + ∇g: per mode the least-norm
    /// solution of f̂_k + 2πik ĝ_k = v̂_k is
    ///   f̂_k = v̂_k/(1+4π²k²),   ĝ_k = -2πik v̂_k/(1+4π²k²),
    /// and ‖f‖² + ‖g‖² = ‖v‖²_{H⁻¹}.
    pub fn decompose(&self) -> (TorusFunction, TorusFunction) {
        let n = self.coeffs.len();
        let mut f = vec![Complex64::default(); n];
        let mut g = vec![Complex64::default(); n];
        for (i, v) in self.coeffs.iter().enumerate() {
            let k = i as i64 - self.cutoff as i64;
            let w = fourier::sobolev_weight(k);
            f[i] = v / w;
            g[i] = -Complex64::new(0.0, 2.0 * PI * k as f64) * v / w;
        }
        (TorusFunction::from_coeffs(f), TorusFunction::from_coeffs(g))
    }

    /// Recombine a decomposition pair into the class of f + ∇g.
    pub fn recombine(f: &TorusFunction, g: &TorusFunction) -> Self {
        let cutoff = f.cutoff().max(g.cutoff());
        let coeffs: Vec<Complex64> = (-(cutoff as i64)..=cutoff as i64)
            .map(|k| f.coeff(k) + Complex64::new(0.0, 2.0 * PI * k as f64) * g.coeff(k))
            .collect();
        Self::from_coeffs(coeffs)
    }

    /// Dual pairing ⟨v, ρ⟩ = Σ_k conj(v̂_k) ρ̂_k (real for real v, ρ).
    pub fn pair_density(&self, rho: &DensityField) -> f64 {
        self.pair_function(rho.profile())
    }

    /// Pairing with an arbitrary band-limited test function.
    pub fn pair_function(&self, phi: &TorusFunction) -> f64 {
        fourier::dual_pair(&self.as_function(), phi).re
    }
}

/// Action of the strength-γ delta through its explicit L² decomposition
/// f ≡ γ, g(x) = -γx on [0,1): returns ⟨f, φ⟩ - ⟨g, ∇φ⟩ by composite
/// Gauss-Legendre quadrature. For periodic continuous φ this equals
/// γ·φ(0) up to quadrature error; the sawtooth g is not periodic, so the
/// integral is done on the cut interval rather than a Fourier grid.
pub fn delta_pairing_by_decomposition(phi: &TorusFunction, gamma: f64) -> f64 {
    let panels = (phi.cutoff().max(1)).min(64) * 2;
    let f_term = quadrature::integrate_gl(|x| phi.eval(x).re, 0.0, 1.0, panels, 16);
    let dphi = phi.differentiate();
    let g_term = quadrature::integrate_gl(|x| -x * dphi.eval(x).re, 0.0, 1.0, panels, 16);
    gamma * (f_term - g_term)
}

/// Englisch-type density on the torus:
/// ρ_raw(x) = (a + b·d(x)^{α+1/2})² with torus distance d(x) = min(x, 1-x),
/// normalized to N. Requires a > b > 0 and 0 < α < 1/2. The square root
/// has a cusp at the origin, so the representing single-particle
/// potential is genuinely distributional.
pub fn englisch_density(
    a: f64,
    b: f64,
    alpha: f64,
    n_particles: usize,
    cutoff: usize,
) -> Result<DensityField> {
    if !(a > b && b > 0.0) {
        return Err(Error::parameter("a,b", format!("need a > b > 0, got a={a}, b={b}")));
    }
    if !(alpha > 0.0 && alpha < 0.5) {
        return Err(Error::parameter("alpha", format!("need 0 < α < 1/2, got {alpha}")));
    }
    let m = TorusFunction::canonical_grid(cutoff);
    let samples: Vec<f64> = (0..m)
        .map(|i| {
            let x = i as f64 / m as f64;
            let d = x.min(1.0 - x);
            let v = a + b * d.powf(alpha + 0.5);
            v * v
        })
        .collect();
    DensityField::from_samples(&samples, cutoff, n_particles)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn assert_close(a: f64, b: f64, tol: f64) {
        assert!((a - b).abs() <= tol, "{a} vs {b} (tol {tol})");
    }

    fn cos_profile(amplitude: f64, mode: usize, cutoff: usize, mean: f64) -> Vec<f64> {
        let m = TorusFunction::canonical_grid(cutoff);
        (0..m)
            .map(|i| mean + amplitude * (2.0 * PI * mode as f64 * i as f64 / m as f64).cos())
            .collect()
    }

    #[test]
    fn constant_density() {
        let rho = DensityField::from_samples(&[1.0; 16], 1, 2).unwrap();
        assert_close(rho.profile().coeff(0).re, 2.0, 1e-12);
        assert_close(rho.eta(), 2.0, 1e-12);
        assert_close(rho.vw_integral(), 0.0, 1e-12);
    }

    #[test]
    fn cosine_density_eta_and_vw() {
        // ρ = 1 + 0.5 cos(2πx): η = 0.5; A cross-checked against the
        // quadrature oracle (1/4)∫(ρ')²/ρ at 4x the canonical resolution.
        let rho = DensityField::from_samples(&cos_profile(0.5, 1, 8, 1.0), 8, 1).unwrap();
        assert_close(rho.eta(), 0.5, 1e-10);
        let oracle = vw_quadrature_oracle(rho.profile());
        assert_close(rho.vw_integral(), oracle, 1e-9);
    }

    /// Independent route for A: (1/4) ∫ (ρ')²/ρ by uniform quadrature on a
    /// grid 4x finer than the stored one.
    fn vw_quadrature_oracle(profile: &TorusFunction) -> f64 {
        let m = profile.grid_len() * 4;
        let vals = profile.synthesize(m);
        let dvals = profile.differentiate().synthesize(m);
        let mut acc = 0.0;
        for (v, dv) in vals.iter().zip(&dvals) {
            acc += dv.re * dv.re / v.re.max(1e-300);
        }
        0.25 * acc / m as f64
    }

    #[test]
    fn negative_sample_rejected() {
        let err = DensityField::from_samples(&[1.0, -0.1, 1.0, 1.0, 1.0], 1, 1);
        assert!(matches!(err, Err(Error::InvalidDensity(_))));
    }

    #[test]
    fn nan_rejected() {
        let err = DensityField::from_samples(&[1.0, f64::NAN, 1.0], 1, 1);
        assert!(matches!(err, Err(Error::InvalidDensity(_))));
    }

    #[test]
    fn membership_constant() {
        // Constant N: in X_{>0}, A = 0 ≤ N²/(4N).
        let rho = DensityField::from_samples(&[3.0; 8], 1, 3).unwrap();
        let rep = rho.membership();
        assert!(rep.in_x && rep.in_xpos);
        assert_close(rep.in_i_bound, 9.0 / 12.0, 1e-10);
        assert!(rep.bound_satisfied);
    }

    #[test]
    fn membership_touching_zero() {
        // 1 + cos(2πx) touches zero: η = 0 within grid tolerance.
        let rho = DensityField::from_samples(&cos_profile(1.0, 1, 4, 1.0), 4, 1).unwrap();
        let rep = rho.membership();
        assert!(rep.eta.abs() < 1e-10);
        assert!(!rep.in_xpos);
    }

    #[test]
    fn membership_bound_strict() {
        let rho = DensityField::from_samples(&cos_profile(0.5, 1, 8, 1.0), 8, 1).unwrap();
        let rep = rho.membership();
        assert!(rep.in_xpos);
        assert!(rep.vw_integral < rep.in_i_bound);
        assert!(rep.bound_satisfied);
    }

    #[test]
    fn decompose_zero() {
        let (f, g) = PotentialClass::zero(5).decompose();
        assert_eq!(f.norm(Space::L2), 0.0);
        assert_eq!(g.norm(Space::L2), 0.0);
    }

    #[test]
    fn decompose_cosine_matches_per_mode_least_norm() {
        // For v = cos(2πx): ‖f‖² + ‖g‖² = 1/(2(1+4π²)), the H⁻¹ norm².
        let mut coeffs = vec![Complex64::default(); 3];
        coeffs[0] = Complex64::new(0.5, 0.0);
        coeffs[2] = Complex64::new(0.5, 0.0);
        let v = PotentialClass::from_coeffs(coeffs);
        let (f, g) = v.decompose();
        let total = f.norm(Space::L2).powi(2) + g.norm(Space::L2).powi(2);
        assert_close(total, 1.0 / (2.0 * (1.0 + 4.0 * PI * PI)), 1e-14);
        assert_close(total, v.norm(Space::HMinus1).powi(2), 1e-14);

        // Per-mode oracle: brute-force the 2-variable least-norm problem
        // min |f|²+|g|² s.t. f + 2πik g = v̂ on a fine grid of candidates.
        let k = 1i64;
        let vk = v.coeff(k);
        let (fk, gk) = (f.coeff(k), g.coeff(k));
        let best = least_norm_mode_oracle(vk, k);
        assert!((fk - best.0).norm() < 1e-6);
        assert!((gk - best.1).norm() < 1e-6);
    }

    /// Small quadratic-program oracle: parametrize the affine constraint
    /// f = v - 2πik g and minimize over g on a grid + local refinement.
    fn least_norm_mode_oracle(v: Complex64, k: i64) -> (Complex64, Complex64) {
        let ik = Complex64::new(0.0, 2.0 * PI * k as f64);
        let cost = |g: Complex64| (v - ik * g).norm_sqr() + g.norm_sqr();
        let mut best = (Complex64::default(), cost(Complex64::default()));
        let mut center = Complex64::default();
        let mut radius = 1.0;
        for _ in 0..40 {
            for i in -10..=10 {
                for j in -10..=10 {
                    let g = center + Complex64::new(i as f64, j as f64) * (radius / 10.0);
                    let c = cost(g);
                    if c < best.1 {
                        best = (g, c);
                    }
                }
            }
            center = best.0;
            radius *= 0.5;
        }
        (v - ik * best.0, best.0)
    }

    #[test]
    fn recombine_right_inverse() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for _ in 0..1000 {
            let cutoff = rng.gen_range(1..9);
            let mut coeffs = vec![Complex64::default(); 2 * cutoff + 1];
            for k in 1..=cutoff {
                let c = Complex64::new(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
                coeffs[cutoff + k] = c;
                coeffs[cutoff - k] = c.conj();
            }
            let v = PotentialClass::from_coeffs(coeffs);
            let (f, g) = v.decompose();
            let back = PotentialClass::recombine(&f, &g);
            for k in -(cutoff as i64)..=cutoff as i64 {
                assert!((back.coeff(k) - v.coeff(k)).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn gauge_quotient_invariance() {
        // Adding a constant before gauge fixing never changes the class.
        let mut coeffs = vec![Complex64::default(); 5];
        coeffs[3] = Complex64::new(1.0, -0.5);
        coeffs[1] = Complex64::new(1.0, 0.5);
        let v = PotentialClass::from_coeffs(coeffs.clone());
        coeffs[2] = Complex64::new(7.3, 0.0);
        let shifted = PotentialClass::from_coeffs(coeffs);
        assert_eq!(v, shifted);
        assert_close(v.norm(Space::HMinus1), shifted.norm(Space::HMinus1), 0.0);
    }

    #[test]
    fn delta_comb_defining_identity() {
        let v = PotentialClass::delta(1.0, 6).unwrap();
        let (f, g) = v.decompose();
        let back = PotentialClass::recombine(&f, &g);
        for k in -6i64..=6 {
            assert!((back.coeff(k) - v.coeff(k)).norm() < 1e-12);
        }
    }

    #[test]
    fn delta_gamma_zero_is_zero() {
        assert!(PotentialClass::delta(0.0, 8).unwrap().is_zero());
    }

    #[test]
    fn delta_sawtooth_pairing_is_point_evaluation() {
        // f ≡ 1, g = -x gives ⟨f,φ⟩ - ⟨g,∇φ⟩ = φ(0); for φ = 2 + cos(2πx)
        // the value is 3.
        let m = 32;
        let samples: Vec<f64> = (0..m)
            .map(|i| 2.0 + (2.0 * PI * i as f64 / m as f64).cos())
            .collect();
        let phi = TorusFunction::from_samples(&samples, 4).unwrap();
        assert_close(delta_pairing_by_decomposition(&phi, 1.0), 3.0, 1e-12);
    }

    #[test]
    fn delta_pairing_truncation() {
        // γ=1, K=32, φ = 1 + 0.3cos(4πx): pairing = φ(0) - ∫φ = 0.3, here
        // exact since φ is band-limited within the comb.
        let v = PotentialClass::delta(1.0, 32).unwrap();
        let m = 64;
        let samples: Vec<f64> = (0..m)
            .map(|i| 1.0 + 0.3 * (4.0 * PI * i as f64 / m as f64).cos())
            .collect();
        let phi = TorusFunction::from_samples(&samples, 8).unwrap();
        assert_close(v.pair_function(&phi), 0.3, 1e-12);

        // For a φ with slowly decaying modes (kink at 0, |φ̂_k| ~ 1/k²)
        // the truncation error decreases with the comb cutoff.
        let m = 4096;
        let kinked: Vec<f64> = (0..m)
            .map(|i| {
                let x = i as f64 / m as f64;
                1.0 + x.min(1.0 - x)
            })
            .collect();
        let phi = TorusFunction::from_samples(&kinked, 512).unwrap();
        let exact = phi.eval(0.0).re - phi.coeff(0).re;
        let mut last = f64::INFINITY;
        for cutoff in [8usize, 32, 128] {
            let v = PotentialClass::delta(1.0, cutoff).unwrap();
            let err = (v.pair_function(&phi) - exact).abs();
            assert!(err < last);
            last = err;
        }
        assert!(last < 1e-2);
    }

    #[test]
    fn pairing_examples() {
        // v = 0 pairs to zero.
        let rho = DensityField::from_samples(&cos_profile(0.5, 1, 4, 1.0), 4, 1).unwrap();
        assert_eq!(PotentialClass::zero(4).pair_density(&rho), 0.0);

        // v = cos(2πx), ρ = 1 + cos(2πx): ⟨v,ρ⟩ = 1/2.
        let mut coeffs = vec![Complex64::default(); 9];
        coeffs[3] = Complex64::new(0.5, 0.0);
        coeffs[5] = Complex64::new(0.5, 0.0);
        let v = PotentialClass::from_coeffs(coeffs);
        let rho = DensityField::from_samples(&cos_profile(1.0, 1, 4, 1.0), 4, 1).unwrap();
        assert_close(v.pair_density(&rho), 0.5, 1e-12);
    }

    #[test]
    fn pairing_matches_decomposition_route() {
        // ⟨v,ρ⟩ = ⟨f,ρ⟩ - ⟨g,∇ρ⟩ for the stored minimal decomposition.
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for _ in 0..100 {
            let cutoff = rng.gen_range(2..8);
            let mut coeffs = vec![Complex64::default(); 2 * cutoff + 1];
            for k in 1..=cutoff {
                let c = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
                coeffs[cutoff + k] = c;
                coeffs[cutoff - k] = c.conj();
            }
            let v = PotentialClass::from_coeffs(coeffs);
            let samples = cos_profile(rng.gen_range(0.0..0.4), rng.gen_range(1..3), cutoff, 1.0);
            let rho = DensityField::from_samples(&samples, cutoff, 1).unwrap();
            let direct = v.pair_density(&rho);
            let (f, g) = v.decompose();
            let via = fourier::dual_pair(&f, rho.profile()).re
                - fourier::dual_pair(&g, &rho.profile().differentiate()).re;
            assert_close(direct, via, 1e-12 * (1.0 + direct.abs()));
        }
    }

    #[test]
    fn englisch_basic() {
        let rho = englisch_density(1.0, 0.5, 0.25, 1, 32).unwrap();
        assert_close(rho.profile().coeff(0).re, 1.0, 1e-12);
        assert!(rho.is_strictly_positive());
        // η sits at the origin where d(x) = 0: direct-evaluation oracle.
        let m = TorusFunction::canonical_grid(32);
        let raw: f64 = (0..m)
            .map(|i| {
                let x = i as f64 / m as f64;
                let d = x.min(1.0 - x);
                (1.0 + 0.5 * d.powf(0.75)).powi(2)
            })
            .sum::<f64>()
            / m as f64;
        let eta_oracle = 1.0 / raw; // normalized a² at x = 0
        assert_close(rho.eta(), eta_oracle, 0.02 * eta_oracle);
        assert!(rho.membership().in_xpos);
    }

    #[test]
    fn englisch_b_to_zero_degenerates_to_constant() {
        let rho = englisch_density(1.0, 1e-12, 0.25, 2, 16).unwrap();
        assert_close(rho.eta(), 2.0, 1e-6);
        assert!(rho.vw_integral() < 1e-12);
    }

    #[test]
    fn englisch_rejects_bad_parameters() {
        assert!(englisch_density(0.5, 1.0, 0.25, 1, 8).is_err());
        assert!(englisch_density(1.0, 0.5, 0.7, 1, 8).is_err());
        assert!(englisch_density(1.0, -0.1, 0.25, 1, 8).is_err());
    }

    #[test]
    fn positivity_bound_random_densities() {
        // For every strictly positive ρ: A ≤ ‖ρ‖²_{H¹}/(4η).
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        for _ in 0..200 {
            let cutoff = 16;
            let m = TorusFunction::canonical_grid(cutoff);
            let k1 = rng.gen_range(1..4);
            let k2 = rng.gen_range(1..4);
            let (a1, a2) = (rng.gen_range(-0.8..0.8f64), rng.gen_range(-0.5..0.5f64));
            let samples: Vec<f64> = (0..m)
                .map(|i| {
                    let x = i as f64 / m as f64;
                    (a1 * (2.0 * PI * k1 as f64 * x).cos()
                        + a2 * (2.0 * PI * k2 as f64 * x).sin())
                    .exp()
                })
                .collect();
            let rho = DensityField::from_samples(&samples, cutoff, rng.gen_range(1..4)).unwrap();
            let rep = rho.membership();
            if rep.in_xpos {
                assert!(rep.bound_satisfied, "A={} bound={}", rep.vw_integral, rep.in_i_bound);
            }
        }
    }

    mod props {
        use super::super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn prop_decompose_recombine(re in proptest::collection::vec(-3.0f64..3.0, 4),
                                        im in proptest::collection::vec(-3.0f64..3.0, 4)) {
                let cutoff = 4;
                let mut coeffs = vec![Complex64::default(); 9];
                for k in 1..=4usize {
                    let c = Complex64::new(re[k-1], im[k-1]);
                    coeffs[cutoff + k] = c;
                    coeffs[cutoff - k] = c.conj();
                }
                let v = PotentialClass::from_coeffs(coeffs);
                let (f, g) = v.decompose();
                let back = PotentialClass::recombine(&f, &g);
                for k in -4i64..=4 {
                    prop_assert!((back.coeff(k) - v.coeff(k)).norm() < 1e-10);
                }
                let min_norm = f.norm(Space::L2).powi(2) + g.norm(Space::L2).powi(2);
                prop_assert!((min_norm - v.norm(Space::HMinus1).powi(2)).abs() < 1e-10 * (1.0 + min_norm));
            }
        }
    }
}
