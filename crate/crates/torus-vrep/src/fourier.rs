//! Spectral backbone on the unit torus 𝕋 ≅ [0, 1).
//!
//! A [`TorusFunction`] is a trigonometric polynomial
//! f(x) = Σ_{|k|≤K} c_k e^{2πikx} held both as Fourier coefficients and as
//! samples on a uniform grid, kept mutually consistent. With this convention
//! the Laplacian eigenvalues are -4π²k² and the Sobolev norms have the
//! per-mode closed forms
//!
//!   ‖f‖²_{H¹}  = Σ (1 + 4π²k²) |c_k|²,
//!   ‖f‖²_{H⁻¹} = Σ |c_k|² / (1 + 4π²k²).
//!
//! The H⁻¹ form is the minimum of ‖f‖²_{L²} + ‖g‖²_{L²} over decompositions
//! v = f + ∇g; see `spaces::PotentialClass::decompose` for the minimizer.

use std::cell::RefCell;
use std::f64::consts::PI;

use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};

/// Oversampling factor of the canonical sample grid relative to 2K+1.
/// L¹/L∞ norms and pointwise positivity checks are evaluated on this grid.
pub const OVERSAMPLE: usize = 8;

/// Norms available on [`TorusFunction::norm`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Space {
    L1,
    L2,
    LInf,
    H1,
    HMinus1,
}

impl std::str::FromStr for Space {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "l1" => Ok(Space::L1),
            "l2" => Ok(Space::L2),
            "linf" | "max" => Ok(Space::LInf),
            "h1" => Ok(Space::H1),
            "hminus1" | "h-1" => Ok(Space::HMinus1),
            other => Err(Error::parameter("space", format!("unknown space tag {other:?}"))),
        }
    }
}

/// Sobolev weight 1 + 4π²k².
pub fn sobolev_weight(k: i64) -> f64 {
    1.0 + 4.0 * PI * PI * (k * k) as f64
}

/// The sharp constant in ‖f‖_∞ ≤ C ‖f‖_{H¹} on the unit torus:
/// C² = Σ_{k∈ℤ} 1/(1+4π²k²) = (1/2)·coth(1/2).
pub fn embedding_constant() -> f64 {
    (0.5 / (0.5f64).tanh()).sqrt()
}

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

/// Forward DFT normalized so bin k equals c_k for band-limited input:
/// out[j] = (1/M) Σ_m in[m] e^{-2πij m/M}.
pub fn dft_forward(samples: &[Complex64]) -> Vec<Complex64> {
    let m = samples.len();
    let mut buf = samples.to_vec();
    PLANNER.with(|p| {
        let fft = p.borrow_mut().plan_fft_forward(m);
        fft.process(&mut buf);
    });
    let scale = 1.0 / m as f64;
    for c in &mut buf {
        *c *= scale;
    }
    buf
}

/// Inverse DFT matching [`dft_forward`] (no normalization).
pub fn dft_inverse(bins: &[Complex64]) -> Vec<Complex64> {
    let mut buf = bins.to_vec();
    PLANNER.with(|p| {
        let fft = p.borrow_mut().plan_fft_inverse(bins.len());
        fft.process(&mut buf);
    });
    buf
}

/// Band-limited function on the torus: coefficients c_k for k = -K..=K plus
/// samples on a uniform grid of at least 2K+1 points.
#[derive(Debug, Clone)]
pub struct TorusFunction {
    cutoff: usize,
    /// Index i holds c_{i-K}.
    coeffs: Vec<Complex64>,
    samples: Vec<Complex64>,
}

impl TorusFunction {
    /// Smallest canonical grid size for a given cutoff.
    pub fn canonical_grid(cutoff: usize) -> usize {
        OVERSAMPLE * (2 * cutoff + 1)
    }

    /// Build from complex samples at M uniform points x_m = m/M.
    ///
    /// Requires M ≥ 2K+1. Content beyond the cutoff is discarded (L²
    /// projection of the trigonometric interpolant), after which samples
    /// are re-synthesized on the canonical grid so that the stored pair
    /// is always transform-consistent.
    pub fn from_complex_samples(samples: &[Complex64], cutoff: usize) -> Result<Self> {
        let m = samples.len();
        let needed = 2 * cutoff + 1;
        if m < needed {
            return Err(Error::InsufficientResolution {
                samples: m,
                cutoff,
                needed,
            });
        }
        if samples.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
            return Err(Error::InvalidDensity("non-finite sample".into()));
        }
        let bins = dft_forward(samples);
        let mut coeffs = vec![Complex64::default(); needed];
        for (i, c) in coeffs.iter_mut().enumerate() {
            let k = i as i64 - cutoff as i64;
            let bin = k.rem_euclid(m as i64) as usize;
            *c = bins[bin];
        }
        Ok(Self::from_coeffs(coeffs))
    }

    /// Build from real samples; see [`Self::from_complex_samples`].
    pub fn from_samples(samples: &[f64], cutoff: usize) -> Result<Self> {
        let complex: Vec<Complex64> = samples.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        Self::from_complex_samples(&complex, cutoff)
    }

    /// Build from coefficients ordered k = -K..=K (length 2K+1, odd).
    pub fn from_coeffs(coeffs: Vec<Complex64>) -> Self {
        assert!(coeffs.len() % 2 == 1, "coefficient list must have odd length 2K+1");
        let cutoff = coeffs.len() / 2;
        let samples = synthesize(&coeffs, Self::canonical_grid(cutoff));
        TorusFunction {
            cutoff,
            coeffs,
            samples,
        }
    }

    pub fn zero(cutoff: usize) -> Self {
        Self::from_coeffs(vec![Complex64::default(); 2 * cutoff + 1])
    }

    pub fn constant(value: f64, cutoff: usize) -> Self {
        let mut coeffs = vec![Complex64::default(); 2 * cutoff + 1];
        coeffs[cutoff] = Complex64::new(value, 0.0);
        Self::from_coeffs(coeffs)
    }

    pub fn cutoff(&self) -> usize {
        self.cutoff
    }

    /// c_k, zero outside the stored band.
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

    /// Samples on the stored uniform grid (canonical size).
    pub fn samples(&self) -> &[Complex64] {
        &self.samples
    }

    pub fn grid_len(&self) -> usize {
        self.samples.len()
    }

    pub fn real_samples(&self) -> Vec<f64> {
        self.samples.iter().map(|c| c.re).collect()
    }

    /// Largest imaginary magnitude over the grid; ~0 for real functions.
    pub fn max_imag(&self) -> f64 {
        self.samples.iter().map(|c| c.im.abs()).fold(0.0, f64::max)
    }

    pub fn is_real(&self, tol: f64) -> bool {
        self.max_imag() <= tol
    }

    /// Evaluate Σ c_k e^{2πikx} at an arbitrary point.
    pub fn eval(&self, x: f64) -> Complex64 {
        let mut acc = Complex64::default();
        for (i, c) in self.coeffs.iter().enumerate() {
            let k = i as i64 - self.cutoff as i64;
            let phase = 2.0 * PI * k as f64 * x;
            acc += c * Complex64::new(phase.cos(), phase.sin());
        }
        acc
    }

    /// Samples on an arbitrary uniform grid of `m` points (m ≥ 2K+1).
    pub fn synthesize(&self, m: usize) -> Vec<Complex64> {
        synthesize(&self.coeffs, m)
    }

    /// Spectral derivative: coefficient k becomes 2πik·c_k.
    pub fn differentiate(&self) -> Self {
        let coeffs: Vec<Complex64> = self
            .coeffs
            .iter()
            .enumerate()
            .map(|(i, c)| {
                let k = i as i64 - self.cutoff as i64;
                c * Complex64::new(0.0, 2.0 * PI * k as f64)
            })
            .collect();
        Self::from_coeffs(coeffs)
    }

    /// Spectral antiderivative F with F(0) = 0; requires zero mean.
    /// F_k = c_k/(2πik) for k ≠ 0 and F_0 = -Σ_{k≠0} c_k/(2πik).
    pub fn antiderivative(&self) -> Result<Self> {
        if self.coeff(0).norm() > 1e-10 {
            return Err(Error::parameter(
                "antiderivative",
                "defined only for zero-mean functions",
            ));
        }
        let mut coeffs = vec![Complex64::default(); self.coeffs.len()];
        let mut at_zero = Complex64::default();
        for (i, c) in self.coeffs.iter().enumerate() {
            let k = i as i64 - self.cutoff as i64;
            if k != 0 {
                let f = c / Complex64::new(0.0, 2.0 * PI * k as f64);
                coeffs[i] = f;
                at_zero += f;
            }
        }
        coeffs[self.cutoff] = -at_zero;
        Ok(Self::from_coeffs(coeffs))
    }

    /// Re-band the function: pad with zeros or truncate to a new cutoff.
    pub fn with_cutoff(&self, cutoff: usize) -> Self {
        let mut coeffs = vec![Complex64::default(); 2 * cutoff + 1];
        for (i, c) in coeffs.iter_mut().enumerate() {
            let k = i as i64 - cutoff as i64;
            *c = self.coeff(k);
        }
        Self::from_coeffs(coeffs)
    }

    pub fn scaled(&self, factor: f64) -> Self {
        let coeffs: Vec<Complex64> = self.coeffs.iter().map(|c| c * factor).collect();
        Self::from_coeffs(coeffs)
    }

    pub fn add(&self, other: &Self) -> Self {
        let cutoff = self.cutoff.max(other.cutoff);
        let coeffs: Vec<Complex64> = (-(cutoff as i64)..=cutoff as i64)
            .map(|k| self.coeff(k) + other.coeff(k))
            .collect();
        Self::from_coeffs(coeffs)
    }

    /// L² inner product ⟨f, g⟩ = ∫ conj(f) g = Σ conj(f_k) g_k
    /// (the smaller band is zero-padded).
    pub fn inner_l2(&self, other: &Self) -> Complex64 {
        let cutoff = self.cutoff.max(other.cutoff) as i64;
        (-cutoff..=cutoff)
            .map(|k| self.coeff(k).conj() * other.coeff(k))
            .sum()
    }

    /// Norm in the requested space. L¹/L∞ are grid norms on the canonical
    /// (8x oversampled) grid; the rest are exact per-mode sums.
    pub fn norm(&self, space: Space) -> f64 {
        match space {
            Space::L2 => self.coeffs.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt(),
            Space::H1 => self
                .coeffs
                .iter()
                .enumerate()
                .map(|(i, c)| sobolev_weight(i as i64 - self.cutoff as i64) * c.norm_sqr())
                .sum::<f64>()
                .sqrt(),
            Space::HMinus1 => self
                .coeffs
                .iter()
                .enumerate()
                .map(|(i, c)| c.norm_sqr() / sobolev_weight(i as i64 - self.cutoff as i64))
                .sum::<f64>()
                .sqrt(),
            Space::L1 => {
                self.samples.iter().map(|c| c.norm()).sum::<f64>() / self.samples.len() as f64
            }
            Space::LInf => self.samples.iter().map(|c| c.norm()).fold(0.0, f64::max),
        }
    }

    /// L² norm computed from grid samples (quadrature route). Used as the
    /// Parseval cross-check against the coefficient route.
    pub fn l2_from_samples(&self) -> f64 {
        (self.samples.iter().map(|c| c.norm_sqr()).sum::<f64>() / self.samples.len() as f64).sqrt()
    }
}

/// Synthesize Σ c_k e^{2πik m/M} on an M-point grid via zero-padded
/// inverse FFT.
pub fn synthesize(coeffs: &[Complex64], m: usize) -> Vec<Complex64> {
    let cutoff = coeffs.len() / 2;
    assert!(
        m >= coeffs.len(),
        "synthesis grid ({m}) must resolve the band ({})",
        coeffs.len()
    );
    let mut bins = vec![Complex64::default(); m];
    for (i, c) in coeffs.iter().enumerate() {
        let k = i as i64 - cutoff as i64;
        bins[k.rem_euclid(m as i64) as usize] = *c;
    }
    dft_inverse(&bins)
}

/// Dual pairing Σ_k conj(a_k) b_k over the union band; real part returned
/// (the imaginary part vanishes for real f, g and is the caller's check).
pub fn dual_pair(a: &TorusFunction, b: &TorusFunction) -> Complex64 {
    a.inner_l2(b)
}
