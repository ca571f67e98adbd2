//! Density-to-potential inversion with verifiable certificates.
//!
//! The Lieb functional F(ρ) = sup_v {E(v) - ⟨v,ρ⟩} is concave in v for
//! each fixed ρ, and a maximizing v* has -v* in the subdifferential
//! ∂F(ρ): exactly the statement that ρ is the (ensemble) ground-state
//! density of H₀ + V*. The maximization runs quasi-Newton ascent over
//! the real degrees of freedom {Re v̂_k, Im v̂_k} with backtracking line
//! search; the supergradient of G(v) = E(v) - ⟨v,ρ⟩ is ρ_v - ρ, with the
//! ensemble-matched density substituted at degenerate points (the
//! minimal-residual element of the superdifferential).
//!
//! Every inversion carries a duality bracket: the dual value
//! D = E(v) - ⟨v,ρ⟩ never exceeds F(ρ), while any state (or ensemble)
//! with density ρ gives a primal upper bound P. Zero gap certifies
//! optimality; the bracket [D, P] is reported even when nonzero.

use num_complex::Complex64;
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::fourier::{self, TorusFunction};
use crate::groundstate::{self, GroundStateResult, SolveOptions};
use crate::manybody::{self, Basis, Interaction, ManyBodyState, ModelSpec, MomentumBlocks, Spin};
use crate::nrep;
use crate::spaces::{DensityField, PotentialClass};
use std::sync::Arc;

#[derive(Debug, Clone)]
pub enum InitialGuess {
    /// Analytic inversion for one particle on a strictly positive
    /// density, zero otherwise.
    Auto,
    Zero,
    Analytic,
    Given(PotentialClass),
}

#[derive(Debug, Clone)]
pub struct InversionOptions {
    /// Target L² density mismatch.
    pub tol_rho: f64,
    /// Duality-gap acceptance threshold for certificates.
    pub tol_cert: f64,
    pub max_iter: usize,
    /// Modes of the optimized potential; default 2K (every transfer the
    /// basis can see).
    pub potential_cutoff: Option<usize>,
    pub init: InitialGuess,
    /// Optional proximal damping -(μ/2)‖v‖²_{H⁻¹} added to the ascent
    /// objective; off by default and recorded in the result when used.
    pub proximal_mu: Option<f64>,
    /// Penalty strength for the primal bracket when W ≠ 0.
    pub penalty_mu: f64,
    pub record_trace: bool,
}

impl Default for InversionOptions {
    fn default() -> Self {
        InversionOptions {
            tol_rho: 1e-5,
            tol_cert: 1e-5,
            max_iter: 500,
            potential_cutoff: None,
            init: InitialGuess::Auto,
            proximal_mu: None,
            penalty_mu: 1e3,
            record_trace: true,
        }
    }
}

#[derive(Debug, Clone)]
pub struct TraceRow {
    pub iter: usize,
    pub g_value: f64,
    pub mismatch: f64,
    pub step: f64,
}

/// Outcome of a Lieb maximization: representing potential, duality
/// bracket [D, P] for F(ρ), ensemble weights and the iteration trace.
#[derive(Debug)]
pub struct InversionResult {
    pub potential: PotentialClass,
    /// D = E(v*) - ⟨v*, ρ⟩, a lower bracket of F(ρ).
    pub dual_value: f64,
    /// Primal upper bracket: kinetic energy of the determinant witness
    /// (W = 0) or the penalty-search value (W ≠ 0).
    pub primal_value: f64,
    pub gap: f64,
    /// Ensemble-matched ‖ρ_{v*} - ρ‖_{L²}.
    pub mismatch: f64,
    pub weights: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
    pub degeneracy: usize,
    pub trace: Vec<TraceRow>,
    pub warnings: Vec<String>,
    pub proximal_mu: Option<f64>,
}

/// Single-particle analytic inversion v = (Δ√ρ)/(2√ρ), computed
/// spectrally on the oversampled grid and gauge-fixed.
pub fn analytic_invert(rho: &DensityField, cutoff: usize) -> Result<PotentialClass> {
    if rho.n_particles() != 1 {
        return Err(Error::parameter(
            "n_particles",
            "analytic inversion is the single-particle formula",
        ));
    }
    if !rho.is_strictly_positive() {
        return Err(Error::InvalidDensity(format!(
            "analytic inversion needs ρ gapped away from zero; minimum {:.3e}",
            rho.eta()
        )));
    }
    let m = TorusFunction::canonical_grid(rho.cutoff().max(cutoff));
    let sqrt_samples: Vec<Complex64> = rho
        .profile()
        .synthesize(m)
        .iter()
        .map(|c| Complex64::new(c.re.max(0.0).sqrt(), 0.0))
        .collect();
    // Second spectral derivative of √ρ on the full grid band.
    let mut bins = fourier::dft_forward(&sqrt_samples);
    let m_i = m as i64;
    for (j, c) in bins.iter_mut().enumerate() {
        let k = if (j as i64) <= m_i / 2 {
            j as i64
        } else {
            j as i64 - m_i
        };
        *c *= -4.0 * PI * PI * (k * k) as f64;
    }
    let dd_sqrt = fourier::dft_inverse(&bins);
    let v_samples: Vec<Complex64> = dd_sqrt
        .iter()
        .zip(&sqrt_samples)
        .map(|(dd, s)| Complex64::new(dd.re / (2.0 * s.re.max(1e-300)), 0.0))
        .collect();
    let v_fun = TorusFunction::from_complex_samples(&v_samples, cutoff)?;
    Ok(PotentialClass::from_function(&v_fun))
}

/// Simplex-constrained least squares: min_λ ‖Σ λ_k ρ_k - target‖²_{L²}
/// with λ ≥ 0, Σλ = 1, by projected gradient with the exact sort-based
/// simplex projection. Deterministic.
#[derive(Debug, Clone)]
pub struct EnsembleMatch {
    pub weights: Vec<f64>,
    pub matched: DensityField,
    pub residual: f64,
}

pub fn ensemble_match(target: &DensityField, result: &GroundStateResult) -> Result<EnsembleMatch> {
    let densities = &result.densities;
    if densities.is_empty() {
        return Err(Error::InvalidModel("no eigenvectors to match".into()));
    }
    let m = densities.len();
    if m == 1 {
        return Ok(EnsembleMatch {
            weights: vec![1.0],
            matched: densities[0].clone(),
            residual: densities[0].l2_distance(target),
        });
    }
    let cutoff = densities
        .iter()
        .map(|d| d.cutoff())
        .chain(std::iter::once(target.cutoff()))
        .max()
        .unwrap();
    let coeff = |d: &DensityField, k: i64| d.profile().coeff(k);
    let inner = |a: &DensityField, b: &DensityField| -> f64 {
        (-(cutoff as i64)..=cutoff as i64)
            .map(|k| (coeff(a, k).conj() * coeff(b, k)).re)
            .sum()
    };
    let mut gram = vec![vec![0.0; m]; m];
    let mut lin = vec![0.0; m];
    for i in 0..m {
        for j in 0..m {
            gram[i][j] = inner(&densities[i], &densities[j]);
        }
        lin[i] = inner(&densities[i], target);
    }
    let lambda = solve_simplex_qp(&gram, &lin);
    // Matched density from the mixed coefficients.
    let mixed: Vec<Complex64> = (-(cutoff as i64)..=cutoff as i64)
        .map(|k| {
            densities
                .iter()
                .zip(&lambda)
                .map(|(d, &w)| coeff(d, k) * w)
                .sum()
        })
        .collect();
    let matched = DensityField::from_coeffs(mixed, target.n_particles())?;
    let residual = matched.l2_distance(target);
    Ok(EnsembleMatch {
        weights: lambda,
        matched,
        residual,
    })
}

/// Minimal-residual ensemble density over an entire ground space.
///
/// Ensembles Γ = Σ λ_k |Ψ_k⟩⟨Ψ_k| over a d-dimensional eigenspace reach
/// every density Σ_{ab} Γ_{ab} ρ_{ba}(x) with Γ Hermitian, PSD, trace 1
/// (ρ_{ba} are the transition densities of any orthonormal basis), which
/// is strictly more than convex combinations of the basis densities.
/// Minimizes ‖ρ_Γ - target‖²_{L²} by projected gradient on the
/// spectraplex; the projection is an eigendecomposition followed by the
/// simplex projection of the eigenvalues. Returns the eigenvalues of the
/// optimal Γ (descending) as ensemble weights.
pub fn ensemble_match_subspace(
    target: &DensityField,
    states: &[ManyBodyState],
) -> Result<EnsembleMatch> {
    if states.is_empty() {
        return Err(Error::InvalidModel("no eigenvectors to match".into()));
    }
    let d = states.len();
    if d == 1 {
        let rho = states[0].density();
        return Ok(EnsembleMatch {
            weights: vec![1.0],
            matched: rho.clone(),
            residual: rho.l2_distance(target),
        });
    }
    let cutoff2 = 2 * states[0].basis().spec().cutoff;
    let band = (cutoff2 as i64).max(target.cutoff() as i64);
    let n_modes = (2 * band + 1) as usize;
    let offset = |q: i64| (q + band) as usize;

    // Transition densities ρ̂_{ab,q}; the a > b entries follow from
    // Hermiticity: ρ̂_{ba,q} = conj(ρ̂_{ab,-q}).
    let mut trans = vec![vec![vec![Complex64::default(); n_modes]; d]; d];
    for a in 0..d {
        for b in a..d {
            let coeffs = manybody::transition_density_coeffs(&states[a], &states[b]);
            for (i, &c) in coeffs.iter().enumerate() {
                let q = i as i64 - cutoff2 as i64;
                trans[a][b][offset(q)] = c;
            }
            if a != b {
                for q in -band..=band {
                    trans[b][a][offset(q)] = trans[a][b][offset(-q)].conj();
                }
            }
        }
    }
    let target_coeffs: Vec<Complex64> =
        (-band..=band).map(|q| target.profile().coeff(q)).collect();

    let density_of = |gamma: &nalgebra::DMatrix<Complex64>| -> Vec<Complex64> {
        let mut out = vec![Complex64::default(); n_modes];
        for a in 0..d {
            for b in 0..d {
                let g = gamma[(a, b)];
                if g.norm_sqr() == 0.0 {
                    continue;
                }
                for (o, t) in out.iter_mut().zip(&trans[b][a]) {
                    *o += g * t;
                }
            }
        }
        out
    };
    let objective = |gamma: &nalgebra::DMatrix<Complex64>| -> f64 {
        density_of(gamma)
            .iter()
            .zip(&target_coeffs)
            .map(|(a, t)| (a - t).norm_sqr())
            .sum()
    };

    let project = |x: &nalgebra::DMatrix<Complex64>| -> nalgebra::DMatrix<Complex64> {
        let eig = x.clone().symmetric_eigen();
        let lambdas: Vec<f64> = eig.eigenvalues.iter().copied().collect();
        let projected = project_simplex(&lambdas);
        let mut out = nalgebra::DMatrix::<Complex64>::zeros(d, d);
        for (j, &l) in projected.iter().enumerate() {
            if l == 0.0 {
                continue;
            }
            let col = eig.eigenvectors.column(j);
            for r in 0..d {
                for c in 0..d {
                    out[(r, c)] += col[r] * col[c].conj() * l;
                }
            }
        }
        out
    };

    let mut gamma = nalgebra::DMatrix::<Complex64>::identity(d, d)
        * Complex64::new(1.0 / d as f64, 0.0);
    let mut f_val = objective(&gamma);
    let mut step = 0.5;
    for _ in 0..5000 {
        // Hermitian gradient M = B + B† with B_{ba} = Σ_q conj(Δ_q) ρ̂_{ba,q}.
        let delta: Vec<Complex64> = density_of(&gamma)
            .iter()
            .zip(&target_coeffs)
            .map(|(a, t)| a - t)
            .collect();
        let mut grad = nalgebra::DMatrix::<Complex64>::zeros(d, d);
        for b in 0..d {
            for a in 0..d {
                let bba: Complex64 = delta
                    .iter()
                    .zip(&trans[b][a])
                    .map(|(dq, t)| dq.conj() * t)
                    .sum();
                grad[(b, a)] += bba;
                grad[(a, b)] += bba.conj();
            }
        }
        let gnorm = grad.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        if gnorm < 1e-14 {
            break;
        }
        let mut improved = false;
        for _ in 0..40 {
            let trial = project(&(&gamma - &grad * Complex64::new(step, 0.0)));
            let f_trial = objective(&trial);
            if f_trial < f_val - 1e-18 {
                gamma = trial;
                f_val = f_trial;
                step = (step * 2.0).min(1e3);
                improved = true;
                break;
            }
            step *= 0.5;
        }
        if !improved {
            break;
        }
    }

    let eig = gamma.clone().symmetric_eigen();
    let mut weights: Vec<f64> = eig.eigenvalues.iter().map(|&l| l.max(0.0)).collect();
    weights.sort_by(|a, b| b.total_cmp(a));
    let total: f64 = weights.iter().sum();
    if total > 0.0 {
        for w in &mut weights {
            *w /= total;
        }
    }
    let matched = DensityField::from_coeffs(density_of(&gamma), target.n_particles())?;
    let residual = matched.l2_distance(target);
    Ok(EnsembleMatch {
        weights,
        matched,
        residual,
    })
}

/// min_λ λᵀGλ - 2bᵀλ subject to λ ≥ 0, Σλ = 1.
///
/// The simplex dimension equals the ground-space degeneracy, so it is
/// tiny; enumerate active sets exactly. Each support S gives the
/// equality-constrained KKT system
///   [2G_S  1] [λ]   [2b_S]
///   [1ᵀ    0] [ν] = [1   ]
/// solved by SVD (the Gram matrix of nearly parallel densities is close
/// to singular); feasible candidates compete on the exact objective.
/// Degenerate optima resolve deterministically by subset order. Beyond
/// 16 states, falls back to projected gradient with the sort-based
/// simplex projection.
fn solve_simplex_qp(gram: &[Vec<f64>], lin: &[f64]) -> Vec<f64> {
    let m = lin.len();
    if m > 16 {
        return simplex_qp_projected_gradient(gram, lin);
    }
    let objective = |lambda: &[f64]| -> f64 {
        let mut val = 0.0;
        for i in 0..m {
            for j in 0..m {
                val += lambda[i] * gram[i][j] * lambda[j];
            }
            val -= 2.0 * lin[i] * lambda[i];
        }
        val
    };
    let mut best: Option<(f64, Vec<f64>)> = None;
    for mask in 1u32..(1 << m) {
        let support: Vec<usize> = (0..m).filter(|i| mask & (1 << i) != 0).collect();
        let s = support.len();
        let mut kkt = nalgebra::DMatrix::<f64>::zeros(s + 1, s + 1);
        let mut rhs = nalgebra::DVector::<f64>::zeros(s + 1);
        for (a, &i) in support.iter().enumerate() {
            for (b, &j) in support.iter().enumerate() {
                kkt[(a, b)] = 2.0 * gram[i][j];
            }
            kkt[(a, s)] = 1.0;
            kkt[(s, a)] = 1.0;
            rhs[a] = 2.0 * lin[i];
        }
        rhs[s] = 1.0;
        let svd = kkt.svd(true, true);
        let sol = match svd.solve(&rhs, 1e-12) {
            Ok(sol) => sol,
            Err(_) => continue,
        };
        let mut lambda = vec![0.0; m];
        let mut feasible = true;
        let mut total = 0.0;
        for (a, &i) in support.iter().enumerate() {
            let l = sol[a];
            if l < -1e-10 {
                feasible = false;
                break;
            }
            lambda[i] = l.max(0.0);
            total += lambda[i];
        }
        if !feasible || total <= 0.0 {
            continue;
        }
        for l in &mut lambda {
            *l /= total;
        }
        let val = objective(&lambda);
        if best.as_ref().map_or(true, |(b, _)| val < b - 1e-15) {
            best = Some((val, lambda));
        }
    }
    best.map(|(_, l)| l)
        .unwrap_or_else(|| vec![1.0 / m as f64; m])
}

fn simplex_qp_projected_gradient(gram: &[Vec<f64>], lin: &[f64]) -> Vec<f64> {
    let m = lin.len();
    let lipschitz: f64 = (0..m).map(|i| gram[i][i]).sum::<f64>().max(1e-12);
    let mut lambda = vec![1.0 / m as f64; m];
    for _ in 0..100_000 {
        let mut grad = vec![0.0; m];
        for i in 0..m {
            grad[i] = (0..m).map(|j| gram[i][j] * lambda[j]).sum::<f64>() - lin[i];
        }
        let candidate: Vec<f64> = lambda
            .iter()
            .zip(&grad)
            .map(|(l, g)| l - g / lipschitz)
            .collect();
        let projected = project_simplex(&candidate);
        let delta: f64 = projected
            .iter()
            .zip(&lambda)
            .map(|(a, b)| (a - b).abs())
            .sum();
        lambda = projected;
        if delta < 1e-15 {
            break;
        }
    }
    lambda
}

/// Euclidean projection onto the probability simplex (sort-based).
fn project_simplex(x: &[f64]) -> Vec<f64> {
    let n = x.len();
    let mut sorted = x.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut cumulative = 0.0;
    let mut theta = 0.0;
    for (i, &v) in sorted.iter().enumerate() {
        cumulative += v;
        let candidate = (cumulative - 1.0) / (i + 1) as f64;
        if i + 1 == n || sorted[i + 1] <= candidate {
            theta = candidate;
            if sorted[i + 1..].iter().all(|&s| s <= candidate) {
                break;
            }
        }
    }
    x.iter().map(|&v| (v - theta).max(0.0)).collect()
}

#[derive(Debug, Clone)]
pub struct PenaltyResult {
    /// ⟨Ψ, H₀Ψ⟩ at the best iterate.
    pub value: f64,
    pub mismatch: f64,
    pub iterations: usize,
    pub stagnated: bool,
    /// 1 - ‖projection‖² when the determinant witness seeded a start.
    pub projection_loss: Option<f64>,
}

/// Upper estimate of the constrained-search value: minimize
/// ⟨Ψ,H₀Ψ⟩ + μ‖ρ_Ψ - ρ‖²_{L²} over normalized Ψ in the Galerkin basis
/// by deterministic multi-start projected-gradient descent; returns the
/// H₀ value at the best iterate. μ = 0 reduces to the plain ground state.
pub fn penalty_search(
    rho: &DensityField,
    spec: &ModelSpec,
    mu: f64,
    solve_opts: &SolveOptions,
) -> Result<PenaltyResult> {
    if mu < 0.0 {
        return Err(Error::parameter("mu", "penalty strength must be ≥ 0"));
    }
    let basis = Basis::build(spec)?;
    if mu == 0.0 {
        let ground = groundstate::solve_with_basis(basis, &PotentialClass::zero(1), solve_opts)?;
        let mismatch = ground.densities[0].l2_distance(rho);
        return Ok(PenaltyResult {
            value: ground.energy,
            mismatch,
            iterations: 0,
            stagnated: false,
            projection_loss: None,
        });
    }

    let mut starts: Vec<ManyBodyState> = Vec::new();
    let mut projection_loss = None;
    if spec.interaction.is_none() || rho.is_strictly_positive() {
        if let Ok((state, loss)) = project_nrep_state(rho, &basis) {
            projection_loss = Some(loss);
            starts.push(state);
        }
    }
    let ground = groundstate::solve_with_basis(basis.clone(), &PotentialClass::zero(1), solve_opts)?;
    starts.extend(ground.states.iter().cloned());

    let zero_v = PotentialClass::zero(1);
    let h0_apply = |amps: &[Complex64]| manybody::apply_hamiltonian(&basis, &zero_v, 0.0, amps);
    let objective = |state: &ManyBodyState| -> (f64, f64, f64) {
        let h0psi = h0_apply(state.amplitudes());
        let h0: f64 = state
            .amplitudes()
            .iter()
            .zip(&h0psi)
            .map(|(c, y)| (c.conj() * y).re)
            .sum();
        let mismatch = state.density().l2_distance(rho);
        (h0 + mu * mismatch * mismatch, h0, mismatch)
    };

    let mut best: Option<(f64, f64, f64)> = None; // (f, h0, mismatch)
    let mut total_iters = 0;
    let mut stagnated = false;
    for start in starts {
        let mut psi = start;
        let (mut f_val, mut h0_val, mut mm) = objective(&psi);
        let mut step = 1e-3;
        let mut iters = 0;
        loop {
            // Gradient of f on the sphere: 2(H₀ + μ V[δρ])Ψ, projected.
            let delta = density_difference_potential(&psi.density(), rho);
            let grad_full =
                manybody::apply_hamiltonian(&basis, &delta.scaled(mu), 0.0, psi.amplitudes());
            let overlap: Complex64 = psi
                .amplitudes()
                .iter()
                .zip(&grad_full)
                .map(|(c, y)| c.conj() * y)
                .sum();
            let tangent: Vec<Complex64> = grad_full
                .iter()
                .zip(psi.amplitudes())
                .map(|(g, c)| 2.0 * (g - overlap * c))
                .collect();
            let tnorm = tangent.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
            if tnorm < 1e-9 * (1.0 + f_val.abs()) || iters >= 2000 {
                stagnated = stagnated || (iters >= 2000);
                break;
            }
            // Backtracking along -tangent.
            let mut accepted = false;
            for _ in 0..40 {
                let trial: Vec<Complex64> = psi
                    .amplitudes()
                    .iter()
                    .zip(&tangent)
                    .map(|(c, t)| c - t * step)
                    .collect();
                let trial = ManyBodyState::new(basis.clone(), trial)?;
                let (f_new, h0_new, mm_new) = objective(&trial);
                if f_new <= f_val - 1e-4 * step * tnorm * tnorm {
                    psi = trial;
                    f_val = f_new;
                    h0_val = h0_new;
                    mm = mm_new;
                    step = (step * 2.0).min(1.0);
                    accepted = true;
                    break;
                }
                step *= 0.5;
            }
            iters += 1;
            if !accepted {
                stagnated = true;
                break;
            }
        }
        total_iters += iters;
        if best.is_none() || f_val < best.unwrap().0 {
            best = Some((f_val, h0_val, mm));
        }
    }
    let (_, h0_val, mismatch) = best.ok_or_else(|| {
        Error::EigensolverFailure("penalty search found no admissible start".into())
    })?;
    Ok(PenaltyResult {
        value: h0_val,
        mismatch,
        iterations: total_iters,
        stagnated,
        projection_loss,
    })
}

/// δρ = ρ_Ψ - ρ as a one-body potential (its mean mode is zero).
fn density_difference_potential(actual: &DensityField, target: &DensityField) -> PotentialClass {
    let cutoff = actual.cutoff().max(target.cutoff());
    let coeffs: Vec<Complex64> = (-(cutoff as i64)..=cutoff as i64)
        .map(|k| actual.profile().coeff(k) - target.profile().coeff(k))
        .collect();
    PotentialClass::from_coeffs(coeffs)
}

/// Project the determinant witness onto the plane-wave basis: amplitudes
/// are N×N determinants of one-particle overlaps ⟨e_k|φ_j⟩. Spinful
/// models host the witness in the fully polarized S_z sector.
fn project_nrep_state(rho: &DensityField, basis: &Arc<Basis>) -> Result<(ManyBodyState, f64)> {
    let spec = basis.spec();
    let construction = nrep::construct(rho)?;
    let n = spec.n_particles;
    let m = construction.orbitals[0].len();
    let needed = 2 * spec.cutoff + 1;
    if m < needed {
        return Err(Error::InsufficientResolution {
            samples: m,
            cutoff: spec.cutoff,
            needed,
        });
    }
    // ⟨e_k | φ_j⟩ = k-th DFT bin of the orbital grid values.
    let mut overlaps: Vec<Vec<Complex64>> = Vec::with_capacity(n);
    for orbital in &construction.orbitals {
        let bins = fourier::dft_forward(orbital);
        overlaps.push(bins);
    }
    let k_of = |p: u16| basis.orbitals()[p as usize].k;
    let up = |p: u16| basis.orbitals()[p as usize].sz2 >= 0;
    let mut amps = vec![Complex64::default(); basis.len()];
    let mut norm_sq = 0.0;
    for (i, det) in basis.dets().iter().enumerate() {
        if !det.iter().all(|&p| up(p)) {
            continue;
        }
        let mut sub = nalgebra::DMatrix::<Complex64>::zeros(n, n);
        for (row, &p) in det.iter().enumerate() {
            let k = k_of(p);
            let bin = (k as i64).rem_euclid(m as i64) as usize;
            for (col, ov) in overlaps.iter().enumerate() {
                sub[(row, col)] = ov[bin];
            }
        }
        let amp = sub.determinant();
        norm_sq += amp.norm_sqr();
        amps[i] = amp;
    }
    if norm_sq < 1e-12 {
        return Err(Error::InvalidModel(
            "witness projection vanishes in this basis".into(),
        ));
    }
    let state = ManyBodyState::new(basis.clone(), amps)?;
    Ok((state, (1.0 - norm_sq).max(0.0)))
}

/// Primal upper bracket for F(ρ): the determinant witness for W = 0,
/// the penalty search otherwise.
fn primal_bracket(
    rho: &DensityField,
    spec: &ModelSpec,
    opts: &InversionOptions,
    solve_opts: &SolveOptions,
) -> Result<f64> {
    if spec.interaction.is_none() {
        if rho.is_strictly_positive() {
            return Ok(nrep::construct(rho)?.kinetic_energy);
        }
        return Err(Error::InvalidDensity(
            "primal bracket needs ρ in X_{>0} for the determinant witness".into(),
        ));
    }
    Ok(penalty_search(rho, spec, opts.penalty_mu, solve_opts)?.value)
}

/// Maximize G(v) = E(v) - ⟨v,ρ⟩ over gauge-fixed potentials: quasi-Newton
/// (BFGS) ascent with backtracking line search. Returns a representing
/// potential with its duality bracket and certificate ingredients.
pub fn lieb_maximize(
    rho: &DensityField,
    spec: &ModelSpec,
    opts: &InversionOptions,
) -> Result<InversionResult> {
    let k_v = opts.potential_cutoff.unwrap_or(2 * spec.cutoff);
    if rho.cutoff() > k_v {
        return Err(Error::parameter(
            "potential_cutoff",
            format!(
                "density cutoff {} exceeds potential cutoff {k_v}",
                rho.cutoff()
            ),
        ));
    }
    let mut warnings = Vec::new();
    if rho.eta() < 0.05 * rho.n_particles() as f64 {
        warnings.push(format!(
            "density minimum η = {:.3e} is close to the boundary of X_>0; \
             inversion may be ill-conditioned",
            rho.eta()
        ));
    }

    let basis = Basis::build(spec)?;
    let solve_opts = SolveOptions {
        momentum_blocks: MomentumBlocks::Off,
        ..Default::default()
    };

    // θ packs (Re v̂_k, Im v̂_k) for k = 1..K_v.
    let dim = 2 * k_v;
    let theta_to_potential = |theta: &[f64]| -> PotentialClass {
        let mut coeffs = vec![Complex64::default(); 2 * k_v + 1];
        for k in 1..=k_v {
            let c = Complex64::new(theta[2 * (k - 1)], theta[2 * (k - 1) + 1]);
            coeffs[k_v + k] = c;
            coeffs[k_v - k] = c.conj();
        }
        PotentialClass::from_coeffs(coeffs)
    };
    let potential_to_theta = |v: &PotentialClass| -> Vec<f64> {
        let mut theta = vec![0.0; dim];
        for k in 1..=k_v {
            let c = v.coeff(k as i64);
            theta[2 * (k - 1)] = c.re;
            theta[2 * (k - 1) + 1] = c.im;
        }
        theta
    };

    // G, supergradient (ensemble-matched when degenerate), mismatch.
    struct Eval {
        g: f64,
        grad: Vec<f64>,
        mismatch: f64,
        weights: Vec<f64>,
        degeneracy: usize,
    }
    let evaluate = |theta: &[f64]| -> Result<Eval> {
        let v = theta_to_potential(theta);
        let ground = groundstate::solve_with_basis(basis.clone(), &v, &solve_opts)?;
        let matched = ensemble_match_subspace(rho, &ground.states)?;
        let mut g = ground.energy - v.pair_density(rho);
        let mut grad = vec![0.0; dim];
        for k in 1..=k_v {
            let delta =
                matched.matched.profile().coeff(k as i64) - rho.profile().coeff(k as i64);
            grad[2 * (k - 1)] = 2.0 * delta.re;
            grad[2 * (k - 1) + 1] = 2.0 * delta.im;
        }
        if let Some(mu) = opts.proximal_mu {
            // G_prox = G - (μ/2)‖v‖²_{H⁻¹}.
            let mut prox = 0.0;
            for k in 1..=k_v {
                let w = fourier::sobolev_weight(k as i64);
                let c = v.coeff(k as i64);
                prox += 2.0 * c.norm_sqr() / w;
                grad[2 * (k - 1)] -= 2.0 * mu * c.re / w;
                grad[2 * (k - 1) + 1] -= 2.0 * mu * c.im / w;
            }
            g -= 0.5 * mu * prox;
        }
        Ok(Eval {
            g,
            grad,
            mismatch: matched.residual,
            weights: matched.weights,
            degeneracy: ground.degeneracy(),
        })
    };

    // Initial guess; any constant shift dies in the gauge fix, making the
    // outcome invariant under shifted starts by construction.
    let v0 = match &opts.init {
        InitialGuess::Zero => PotentialClass::zero(k_v),
        InitialGuess::Analytic => analytic_invert(rho, k_v)?,
        InitialGuess::Given(v) => v.with_cutoff(k_v),
        InitialGuess::Auto => {
            if spec.n_particles == 1 && rho.is_strictly_positive() {
                analytic_invert(rho, k_v)?
            } else {
                PotentialClass::zero(k_v)
            }
        }
    };
    let mut theta = potential_to_theta(&v0);
    let mut eval = evaluate(&theta)?;
    let mut trace = Vec::new();
    if opts.record_trace {
        trace.push(TraceRow {
            iter: 0,
            g_value: eval.g,
            mismatch: eval.mismatch,
            step: 0.0,
        });
    }

    // BFGS approximation of (-Hess)⁻¹, seeded with the free-particle
    // linear response δv̂_k ≈ (π²k²/N) δρ̂_k.
    let n_f = spec.n_particles as f64;
    let h0_diag: Vec<f64> = (0..dim)
        .map(|j| {
            let k = (j / 2 + 1) as f64;
            PI * PI * k * k / (2.0 * n_f)
        })
        .collect();
    let mut h_inv = nalgebra::DMatrix::<f64>::from_diagonal(&nalgebra::DVector::from_vec(
        h0_diag.clone(),
    ));

    let mut converged = eval.mismatch <= opts.tol_rho;
    let mut iterations = 0;
    let mut resets = 0;
    while !converged && iterations < opts.max_iter {
        iterations += 1;
        let grad_vec = nalgebra::DVector::from_column_slice(&eval.grad);
        let mut direction = &h_inv * &grad_vec;
        let mut slope = direction.dot(&grad_vec);
        if slope <= 0.0 {
            // Indefinite update slipped in: fall back to the seed metric.
            h_inv = nalgebra::DMatrix::from_diagonal(&nalgebra::DVector::from_vec(
                h0_diag.clone(),
            ));
            direction = &h_inv * &grad_vec;
            slope = direction.dot(&grad_vec);
        }
        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..40 {
            let trial: Vec<f64> = theta
                .iter()
                .zip(direction.iter())
                .map(|(t, d)| t + step * d)
                .collect();
            let trial_eval = evaluate(&trial)?;
            if trial_eval.g >= eval.g + 1e-4 * step * slope {
                accepted = Some((trial, trial_eval));
                break;
            }
            step *= 0.5;
        }
        match accepted {
            Some((new_theta, new_eval)) => {
                // BFGS update on the ascent pair (s, y).
                let s = nalgebra::DVector::from_iterator(
                    dim,
                    new_theta.iter().zip(&theta).map(|(a, b)| a - b),
                );
                let y = nalgebra::DVector::from_iterator(
                    dim,
                    eval.grad.iter().zip(&new_eval.grad).map(|(o, n)| o - n),
                );
                let sy = s.dot(&y);
                if sy > 1e-12 {
                    let hy = &h_inv * &y;
                    let yhy = y.dot(&hy);
                    let rho_bfgs = 1.0 / sy;
                    // H ← (I - ρ s yᵀ) H (I - ρ y sᵀ) + ρ s sᵀ
                    let term1 = &h_inv - &hy * s.transpose() * rho_bfgs;
                    let h_new = &term1
                        - (&s * (y.transpose() * &term1)) * rho_bfgs
                        + &s * s.transpose() * (rho_bfgs * (1.0 + 0.0 * yhy));
                    h_inv = h_new;
                }
                theta = new_theta;
                eval = new_eval;
                resets = 0;
                if opts.record_trace {
                    trace.push(TraceRow {
                        iter: iterations,
                        g_value: eval.g,
                        mismatch: eval.mismatch,
                        step,
                    });
                }
                converged = eval.mismatch <= opts.tol_rho;
            }
            None => {
                resets += 1;
                h_inv = nalgebra::DMatrix::from_diagonal(&nalgebra::DVector::from_vec(
                    h0_diag.clone(),
                ));
                if resets >= 2 {
                    warnings.push(format!(
                        "ascent stagnated at iteration {iterations}; final mismatch {:.3e}",
                        eval.mismatch
                    ));
                    break;
                }
            }
        }
    }

    let v_star = theta_to_potential(&theta);
    // Dual bracket at the returned potential (no proximal term).
    let ground = groundstate::solve_with_basis(basis.clone(), &v_star, &solve_opts)?;
    let dual = ground.energy - v_star.pair_density(rho);
    let primal = primal_bracket(rho, spec, opts, &solve_opts)?;
    let gap = primal - dual;
    if gap < -1e-8 {
        warnings.push(format!(
            "weak duality violated beyond tolerance: D - P = {:.3e}",
            -gap
        ));
    }
    if !converged {
        warnings.push(format!(
            "did not reach tol_rho = {:.1e}; final mismatch {:.3e}",
            opts.tol_rho, eval.mismatch
        ));
    }

    Ok(InversionResult {
        potential: v_star,
        dual_value: dual,
        primal_value: primal,
        gap,
        mismatch: eval.mismatch,
        weights: eval.weights,
        converged,
        iterations,
        degeneracy: eval.degeneracy,
        trace,
        warnings,
        proximal_mu: opts.proximal_mu,
    })
}

/// Certificate for a proposed (ρ, v) pair: dual value, primal value,
/// duality gap and ensemble-matched density mismatch. Accepted when
/// gap ≤ tol_cert and mismatch ≤ tol_rho.
#[derive(Debug, Clone)]
pub struct Certificate {
    pub dual_value: f64,
    pub primal_value: f64,
    pub gap: f64,
    pub mismatch: f64,
    pub weights: Vec<f64>,
    pub accepted: bool,
}

pub fn certificate(
    rho: &DensityField,
    v: &PotentialClass,
    spec: &ModelSpec,
    opts: &InversionOptions,
) -> Result<Certificate> {
    let solve_opts = SolveOptions {
        momentum_blocks: MomentumBlocks::Off,
        ..Default::default()
    };
    let ground = groundstate::solve(spec, v, &solve_opts)?;
    let matched = ensemble_match_subspace(rho, &ground.states)?;
    let dual = ground.energy - v.pair_density(rho);
    let primal = primal_bracket(rho, spec, opts, &solve_opts)?;
    let gap = primal - dual;
    Ok(Certificate {
        dual_value: dual,
        primal_value: primal,
        gap,
        mismatch: matched.residual,
        weights: matched.weights,
        accepted: gap <= opts.tol_cert && matched.residual <= opts.tol_rho,
    })
}

/// The model space a density naturally inverts in: spinless fermions at
/// the density's own resolution unless the caller overrides.
pub fn default_spec(rho: &DensityField, cutoff: usize) -> ModelSpec {
    ModelSpec::new(rho.n_particles(), cutoff, Spin::Spinless, Interaction::None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fourier::{Space, TorusFunction};

    fn assert_close(a: f64, b: f64, tol: f64) {
        assert!((a - b).abs() <= tol, "{a} vs {b} (tol {tol})");
    }

    fn cosine_density(amplitude: f64, cutoff: usize, n: usize) -> DensityField {
        let m = TorusFunction::canonical_grid(cutoff);
        let samples: Vec<f64> = (0..m)
            .map(|i| 1.0 + amplitude * (2.0 * PI * i as f64 / m as f64).cos())
            .collect();
        DensityField::from_samples(&samples, cutoff, n).unwrap()
    }

    #[test]
    fn simplex_projection_basics() {
        let p = project_simplex(&[0.5, 0.5]);
        assert_close(p[0], 0.5, 1e-12);
        let p = project_simplex(&[2.0, 0.0]);
        assert_close(p[0], 1.0, 1e-12);
        assert_close(p[1], 0.0, 1e-12);
        let p = project_simplex(&[-1.0, -2.0, 3.0]);
        assert_close(p.iter().sum::<f64>(), 1.0, 1e-12);
        assert!(p.iter().all(|&x| x >= 0.0));
    }

    #[test]
    fn analytic_invert_constant_density_gives_zero() {
        let rho = DensityField::from_samples(&[1.0; 64], 4, 1).unwrap();
        let v = analytic_invert(&rho, 8).unwrap();
        assert!(v.norm(Space::L2) < 1e-10);
    }

    #[test]
    fn analytic_invert_rejects_n2() {
        let rho = DensityField::from_samples(&[2.0; 64], 4, 2).unwrap();
        assert!(analytic_invert(&rho, 8).is_err());
    }

    #[test]
    fn closed_loop_cosine_density() {
        // ρ = 1 + 0.5cos(2πx) → v = (Δ√ρ)/(2√ρ) → solve returns ρ.
        let rho = cosine_density(0.5, 32, 1);
        let v = analytic_invert(&rho, 64).unwrap();
        let spec = ModelSpec::spinless(1, 32);
        let r = groundstate::solve(&spec, &v, &SolveOptions::default()).unwrap();
        let mismatch = r.densities[0].l2_distance(&rho);
        assert!(mismatch < 1e-6, "mismatch {mismatch}");
    }

    #[test]
    fn ensemble_match_singleton() {
        let rho = cosine_density(0.3, 8, 1);
        let spec = ModelSpec::spinless(1, 8);
        let r = groundstate::solve(&spec, &PotentialClass::zero(16), &SolveOptions::default())
            .unwrap();
        let m = ensemble_match(&rho, &r).unwrap();
        assert_eq!(m.weights, vec![1.0]);
        assert!(m.residual > 0.0);
    }

    #[test]
    fn ensemble_match_midpoint() {
        // Two distinct densities ρ_a, ρ_b and target (ρ_a+ρ_b)/2:
        // λ = (½, ½) uniquely, residual ~ 0.
        let rho_a = cosine_density(0.4, 4, 1);
        let rho_b = cosine_density(-0.4, 4, 1);
        let mid: Vec<Complex64> = (-(4i64)..=4)
            .map(|k| (rho_a.profile().coeff(k) + rho_b.profile().coeff(k)) * 0.5)
            .collect();
        let target = DensityField::from_coeffs(mid, 1).unwrap();
        let fake = GroundStateResult {
            energy: 0.0,
            states: Vec::new(),
            densities: vec![rho_a, rho_b],
            gap: None,
            diagnostics: Default::default(),
        };
        let m = ensemble_match(&target, &fake).unwrap();
        assert_close(m.weights[0], 0.5, 1e-9);
        assert_close(m.weights[1], 0.5, 1e-9);
        assert!(m.residual < 1e-10);
    }

    #[test]
    fn ensemble_match_hull_member() {
        // Random 3-fold synthetic densities; a strict convex combination
        // must be matched to residual < 1e-10.
        use rand::prelude::*;
        use rand_chacha::ChaCha8Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let cutoff = 6;
        let mk = |rng: &mut ChaCha8Rng| -> DensityField {
            let m = TorusFunction::canonical_grid(cutoff);
            let (a, b) = (rng.gen_range(-0.3..0.3f64), rng.gen_range(-0.3..0.3f64));
            let samples: Vec<f64> = (0..m)
                .map(|i| {
                    let x = i as f64 / m as f64;
                    1.0 + a * (2.0 * PI * x).cos() + b * (4.0 * PI * x).sin()
                })
                .collect();
            DensityField::from_samples(&samples, cutoff, 1).unwrap()
        };
        for _ in 0..20 {
            let ds = [mk(&mut rng), mk(&mut rng), mk(&mut rng)];
            let w = {
                let raw: Vec<f64> = (0..3).map(|_| rng.gen_range(0.05..1.0)).collect();
                let s: f64 = raw.iter().sum();
                raw.iter().map(|x| x / s).collect::<Vec<f64>>()
            };
            let mixed: Vec<Complex64> = (-(cutoff as i64)..=cutoff as i64)
                .map(|k| {
                    ds.iter()
                        .zip(&w)
                        .map(|(d, &wi)| d.profile().coeff(k) * wi)
                        .sum()
                })
                .collect();
            let target = DensityField::from_coeffs(mixed, 1).unwrap();
            let fake = GroundStateResult {
                energy: 0.0,
                states: Vec::new(),
                densities: ds.to_vec(),
                gap: None,
                diagnostics: Default::default(),
            };
            let m = ensemble_match(&target, &fake).unwrap();
            assert!(m.residual < 1e-10, "residual {}", m.residual);
        }
    }

    #[test]
    fn lieb_constant_density_immediate() {
        // ρ ≡ N with translation-invariant W: v* = 0 at iteration 0.
        let rho = DensityField::from_samples(&[2.0; 32], 4, 2).unwrap();
        let spec = ModelSpec::new(2, 4, Spin::Spinless, Interaction::Delta { gamma: 1.0 });
        let opts = InversionOptions {
            init: InitialGuess::Zero,
            ..Default::default()
        };
        let r = lieb_maximize(&rho, &spec, &opts).unwrap();
        assert!(r.converged);
        assert_eq!(r.iterations, 0);
        assert!(r.potential.is_zero());
        assert!(r.mismatch < 1e-10);
    }

    #[test]
    fn lieb_n1_matches_analytic_and_vw() {
        // N=1, W=0: v* close to the analytic formula in H⁻¹; D = P to
        // 1e-6 with P = ½‖∇√ρ‖² (the von Weizsäcker value).
        let rho = cosine_density(0.5, 32, 1);
        let spec = ModelSpec::spinless(1, 32);
        let r = lieb_maximize(&rho, &spec, &InversionOptions::default()).unwrap();
        assert!(r.converged, "mismatch {}", r.mismatch);
        assert!(r.mismatch < 1e-5);
        assert_close(r.primal_value, rho.vw_energy(), 1e-9);
        assert!(r.gap.abs() < 1e-6, "gap {}", r.gap);
        let analytic = analytic_invert(&rho, 64).unwrap();
        let diff = r.potential.add(&analytic.scaled(-1.0));
        assert!(
            diff.norm(Space::HMinus1) < 1e-4,
            "H⁻¹ distance {}",
            diff.norm(Space::HMinus1)
        );
    }

    #[test]
    fn lieb_from_zero_start_converges() {
        let rho = cosine_density(0.3, 8, 1);
        let spec = ModelSpec::spinless(1, 8);
        let opts = InversionOptions {
            init: InitialGuess::Zero,
            ..Default::default()
        };
        let r = lieb_maximize(&rho, &spec, &opts).unwrap();
        assert!(r.converged, "mismatch {} after {}", r.mismatch, r.iterations);
        // Monotone ascent along accepted steps.
        for w in r.trace.windows(2) {
            assert!(w[1].g_value >= w[0].g_value - 1e-12);
        }
    }

    #[test]
    fn lieb_n2_forward_generated_target() {
        // Target built from a hand-made two-particle state in X_{>0}:
        // Slater(e_0, (e_1 + e_{-1})/√2) has ρ = 2 + cos(4πx).
        let cutoff = 8;
        let m = TorusFunction::canonical_grid(cutoff);
        let samples: Vec<f64> = (0..m)
            .map(|i| 2.0 + (4.0 * PI * i as f64 / m as f64).cos())
            .collect();
        let rho = DensityField::from_samples(&samples, cutoff, 2).unwrap();
        let spec = ModelSpec::spinless(2, 8);
        let opts = InversionOptions {
            init: InitialGuess::Zero,
            max_iter: 800,
            ..Default::default()
        };
        let r = lieb_maximize(&rho, &spec, &opts).unwrap();
        assert!(r.mismatch < 1e-5, "mismatch {}", r.mismatch);
    }

    #[test]
    fn supergradient_matches_finite_difference() {
        // Directional derivative of G at a generic (nondegenerate) v
        // equals ⟨direction, ρ_v - ρ⟩.
        let rho = cosine_density(0.4, 6, 1);
        let spec = ModelSpec::spinless(1, 6);
        let basis = Basis::build(&spec).unwrap();
        let solve_opts = SolveOptions {
            momentum_blocks: MomentumBlocks::Off,
            ..Default::default()
        };
        let mut coeffs = vec![Complex64::default(); 13];
        coeffs[7] = Complex64::new(0.3, 0.1);
        coeffs[5] = Complex64::new(0.3, -0.1);
        let v = PotentialClass::from_coeffs(coeffs);
        let g_at = |v: &PotentialClass| -> f64 {
            let gr = groundstate::solve_with_basis(basis.clone(), v, &solve_opts).unwrap();
            gr.energy - v.pair_density(&rho)
        };
        let ground = groundstate::solve_with_basis(basis.clone(), &v, &solve_opts).unwrap();
        assert_eq!(ground.degeneracy(), 1);
        let delta = ground.densities[0].l2_distance(&rho);
        assert!(delta > 0.0);
        // direction: cos(2πx)
        let mut dir_coeffs = vec![Complex64::default(); 13];
        dir_coeffs[7] = Complex64::new(0.5, 0.0);
        dir_coeffs[5] = Complex64::new(0.5, 0.0);
        let dir = PotentialClass::from_coeffs(dir_coeffs);
        let t = 1e-6;
        let fd = (g_at(&v.add(&dir.scaled(t))) - g_at(&v.add(&dir.scaled(-t)))) / (2.0 * t);
        let expected = dir.pair_density(&ground.densities[0]) - dir.pair_density(&rho);
        assert_close(fd, expected, 1e-5);
    }

    #[test]
    fn penalty_constant_density_matches_free_energy() {
        // ρ ≡ N, W = 0: the filled-shell state already has density N, so
        // the penalty value equals E(0).
        let rho = DensityField::from_samples(&[2.0; 32], 4, 2).unwrap();
        let spec = ModelSpec::spinless(2, 4);
        let solve_opts = SolveOptions::default();
        let e0 = groundstate::energy(&spec, &PotentialClass::zero(8)).unwrap();
        let p = penalty_search(&rho, &spec, 100.0, &solve_opts).unwrap();
        assert_close(p.value, e0, 1e-6);
        assert!(p.mismatch < 1e-6);
    }

    #[test]
    fn penalty_mu_zero_is_ground_energy() {
        let rho = cosine_density(0.3, 4, 1);
        let spec = ModelSpec::spinless(1, 4);
        let p = penalty_search(&rho, &spec, 0.0, &SolveOptions::default()).unwrap();
        assert_close(p.value, 0.0, 1e-12);
    }

    #[test]
    fn penalty_n1_approaches_vw() {
        // N=1: as μ grows the value approaches ½A from below-ish.
        let rho = cosine_density(0.4, 8, 1);
        let spec = ModelSpec::spinless(1, 8);
        let vw = rho.vw_energy();
        let p_lo = penalty_search(&rho, &spec, 1e2, &SolveOptions::default()).unwrap();
        let p_hi = penalty_search(&rho, &spec, 1e4, &SolveOptions::default()).unwrap();
        assert!(p_hi.mismatch < p_lo.mismatch);
        assert_close(p_hi.value, vw, 2e-3 * (1.0 + vw));
        assert!(p_hi.value <= vw + 1e-6);
    }

    #[test]
    fn certificate_trivial_and_falsification() {
        // (ρ ≡ 1, v = 0, N = 1): D = P = 0, gap 0, accepted.
        let rho = DensityField::from_samples(&[1.0; 32], 4, 1).unwrap();
        let spec = ModelSpec::spinless(1, 4);
        let opts = InversionOptions::default();
        let c = certificate(&rho, &PotentialClass::zero(8), &spec, &opts).unwrap();
        assert_close(c.dual_value, 0.0, 1e-10);
        assert_close(c.primal_value, 0.0, 1e-10);
        assert!(c.accepted);

        // Wrong potential: the gap must be strictly positive and the
        // certificate rejected.
        let wrong = PotentialClass::delta(1.0, 8).unwrap();
        let c = certificate(&rho, &wrong, &spec, &opts).unwrap();
        assert!(c.gap > 1e-3);
        assert!(!c.accepted);
    }

    #[test]
    fn certificate_closed_loop_analytic() {
        let rho = cosine_density(0.5, 24, 1);
        let v = analytic_invert(&rho, 48).unwrap();
        let spec = ModelSpec::spinless(1, 24);
        let c = certificate(&rho, &v, &spec, &InversionOptions::default()).unwrap();
        assert!(c.gap.abs() < 1e-6, "gap {}", c.gap);
        assert!(c.mismatch < 1e-6);
        assert!(c.accepted);
    }

    #[test]
    fn weak_duality_random_potentials() {
        use rand::prelude::*;
        use rand_chacha::ChaCha8Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let rho = cosine_density(0.4, 6, 1);
        let spec = ModelSpec::spinless(1, 6);
        let opts = InversionOptions::default();
        for _ in 0..20 {
            let mut coeffs = vec![Complex64::default(); 13];
            for k in 1..=4usize {
                let c = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
                coeffs[6 + k] = c;
                coeffs[6 - k] = c.conj();
            }
            let v = PotentialClass::from_coeffs(coeffs);
            let c = certificate(&rho, &v, &spec, &opts).unwrap();
            assert!(c.dual_value <= c.primal_value + 1e-8);
        }
    }

    #[test]
    fn gauge_invariant_under_shifted_initial_guess() {
        // Constant shifts of the initial guess die in the gauge fix, so
        // the ascent output is bitwise identical.
        let rho = cosine_density(0.3, 6, 1);
        let spec = ModelSpec::spinless(1, 6);
        let mut coeffs = vec![Complex64::default(); 13];
        coeffs[7] = Complex64::new(0.2, 0.0);
        coeffs[5] = Complex64::new(0.2, 0.0);
        let base = PotentialClass::from_coeffs(coeffs.clone());
        coeffs[6] = Complex64::new(123.456, 0.0); // constant shift
        let shifted = PotentialClass::from_coeffs(coeffs);
        let opts_a = InversionOptions {
            init: InitialGuess::Given(base),
            ..Default::default()
        };
        let opts_b = InversionOptions {
            init: InitialGuess::Given(shifted),
            ..Default::default()
        };
        let ra = lieb_maximize(&rho, &spec, &opts_a).unwrap();
        let rb = lieb_maximize(&rho, &spec, &opts_b).unwrap();
        assert_eq!(ra.potential.coeffs(), rb.potential.coeffs());
        assert_eq!(ra.dual_value.to_bits(), rb.dual_value.to_bits());
    }
}
