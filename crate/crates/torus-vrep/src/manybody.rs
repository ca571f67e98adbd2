//! Truncated antisymmetric plane-wave many-body space and exact assembly
//! of the quadratic form of H = -½Δ + W + V.
//!
//! One-particle orbitals are e_k(x) = e^{2πikx} with |k| ≤ K, optionally
//! tensored with a spin-½ label. Slater determinants over these orbitals
//! make antisymmetry structural, and the form of a distributional one-body
//! potential is exact: the matrix element between plane waves k and k' is
//! v̂_{k'-k}, no smoothing involved. Likewise a two-body kernel enters only
//! through its coefficient at the momentum transfer, so delta and
//! gradient-type interactions assemble exactly within the Galerkin space.
//!
//! The delta interaction is truncated at momentum transfer 2K, which is
//! every transfer the basis can realize; convergence in K is monitored by
//! callers rather than assumed.

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::spaces::{DensityField, PotentialClass};

/// Spin structure of the model space.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Spin {
    Spinless,
    /// Spin-½ with S_z eigenstates; no spin-orbit terms.
    Spinful,
}

/// Two-body interaction of the Hamiltonian, W = Σ_{i<j} w(x_i - x_j).
#[derive(Debug, Clone)]
pub enum Interaction {
    None,
    /// Multiplicative kernel with coefficients ŵ_q, q = -C..=C.
    Multiplicative { coeffs: Vec<Complex64> },
    /// Contact interaction γ δ(x_i - x_j): ŵ_q = γ at every transfer.
    Delta { gamma: f64 },
    /// Distributional kernel ∇g(x_i - x_j) for real g with coefficients
    /// ĝ_q: the transfer coefficient is 2πiq·ĝ_q.
    GradientPair { g_coeffs: Vec<Complex64> },
}

impl Interaction {
    /// Kernel coefficient at momentum transfer q.
    pub fn transfer_coeff(&self, q: i64) -> Complex64 {
        match self {
            Interaction::None => Complex64::default(),
            Interaction::Multiplicative { coeffs } => {
                let c = coeffs.len() as i64 / 2;
                let idx = q + c;
                if idx < 0 || idx >= coeffs.len() as i64 {
                    Complex64::default()
                } else {
                    coeffs[idx as usize]
                }
            }
            Interaction::Delta { gamma } => Complex64::new(*gamma, 0.0),
            Interaction::GradientPair { g_coeffs } => {
                let c = g_coeffs.len() as i64 / 2;
                let idx = q + c;
                if idx < 0 || idx >= g_coeffs.len() as i64 {
                    Complex64::default()
                } else {
                    Complex64::new(0.0, 2.0 * PI * q as f64) * g_coeffs[idx as usize]
                }
            }
        }
    }

    pub fn is_none(&self) -> bool {
        matches!(self, Interaction::None)
    }

    /// Rigorous lower bound for ⟨Ψ, WΨ⟩ over normalized states, when one
    /// is cheaply available. Used to prune momentum blocks by their
    /// kinetic floor; `None` disables pruning.
    pub fn form_lower_bound(&self, n_particles: usize) -> Option<f64> {
        let pairs = (n_particles * (n_particles - 1) / 2) as f64;
        match self {
            Interaction::None => Some(0.0),
            Interaction::Delta { gamma } if *gamma >= 0.0 => Some(0.0),
            Interaction::Delta { .. } => None,
            Interaction::Multiplicative { coeffs } => {
                let f = crate::fourier::TorusFunction::from_coeffs(coeffs.clone());
                let min = f
                    .samples()
                    .iter()
                    .map(|c| c.re)
                    .fold(f64::INFINITY, f64::min);
                Some(pairs * min.min(0.0))
            }
            Interaction::GradientPair { .. } => None,
        }
    }
}

/// Model space: N particles, momentum cutoff K, spin flag, interaction.
#[derive(Debug, Clone)]
pub struct ModelSpec {
    pub n_particles: usize,
    pub cutoff: usize,
    pub spin: Spin,
    pub interaction: Interaction,
}

impl ModelSpec {
    pub fn new(n_particles: usize, cutoff: usize, spin: Spin, interaction: Interaction) -> Self {
        ModelSpec {
            n_particles,
            cutoff,
            spin,
            interaction,
        }
    }

    pub fn spinless(n_particles: usize, cutoff: usize) -> Self {
        Self::new(n_particles, cutoff, Spin::Spinless, Interaction::None)
    }

    pub fn orbital_count(&self) -> usize {
        let spatial = 2 * self.cutoff + 1;
        match self.spin {
            Spin::Spinless => spatial,
            Spin::Spinful => 2 * spatial,
        }
    }
}

/// One spin-orbital (k, σ).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Orbital {
    pub k: i32,
    /// +1 or -1 in units of ħ/2; 0 for spinless.
    pub sz2: i8,
}

/// Conserved labels of a determinant block.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct BlockKey {
    /// Twice the total S_z; None for spinless models.
    pub sz2: Option<i32>,
    /// Total momentum Σk; None when the block is not momentum-resolved.
    pub momentum: Option<i32>,
}

/// A set of determinant indices sharing conserved quantum numbers.
#[derive(Debug, Clone)]
pub struct BasisBlock {
    pub key: BlockKey,
    /// Indices into the basis determinant list, ascending.
    pub det_indices: Vec<usize>,
    /// min over the block of the kinetic diagonal 2π²Σk².
    pub min_kinetic: f64,
}

/// Enumerated Slater-determinant basis with combinadic ranking.
#[derive(Debug)]
pub struct Basis {
    spec: ModelSpec,
    orbitals: Vec<Orbital>,
    dets: Vec<Vec<u16>>,
    /// binom[p][j] = C(p, j) for j ≤ N.
    binom: Vec<Vec<u64>>,
}

impl Basis {
    /// Enumerate all N-subsets of the spin-orbitals in colexicographic
    /// order, so that the subset rank Σ_i C(p_i, i+1) equals the position.
    pub fn build(spec: &ModelSpec) -> Result<Arc<Basis>> {
        let n = spec.n_particles;
        let n_orb = spec.orbital_count();
        if n == 0 {
            return Err(Error::InvalidModel("need at least one particle".into()));
        }
        if n > n_orb {
            return Err(Error::InvalidModel(format!(
                "{n} particles exceed {n_orb} available orbitals"
            )));
        }
        let cutoff = spec.cutoff as i32;
        let orbitals: Vec<Orbital> = (0..n_orb)
            .map(|p| match spec.spin {
                Spin::Spinless => Orbital {
                    k: p as i32 - cutoff,
                    sz2: 0,
                },
                Spin::Spinful => Orbital {
                    k: (p / 2) as i32 - cutoff,
                    sz2: if p % 2 == 0 { 1 } else { -1 },
                },
            })
            .collect();

        let mut binom = vec![vec![0u64; n + 2]; n_orb + 1];
        for (p, row) in binom.iter_mut().enumerate() {
            row[0] = 1;
            for j in 1..=(n + 1).min(p) {
                // C(p, j) = C(p-1, j-1) + C(p-1, j); fill row by row.
                row[j] = 0;
            }
        }
        for p in 0..=n_orb {
            for j in 0..=n + 1 {
                binom[p][j] = if j == 0 {
                    1
                } else if j > p {
                    0
                } else {
                    binom[p - 1][j - 1] + binom[p - 1][j]
                };
            }
        }

        let mut dets = Vec::with_capacity(binom[n_orb][n] as usize);
        let mut current: Vec<u16> = (0..n as u16).collect();
        loop {
            dets.push(current.clone());
            // Colex successor: bump the lowest slot that can move.
            let mut i = 0;
            loop {
                let limit = if i + 1 < n {
                    current[i + 1]
                } else {
                    n_orb as u16
                };
                if current[i] + 1 < limit {
                    current[i] += 1;
                    for (j, slot) in current.iter_mut().enumerate().take(i) {
                        *slot = j as u16;
                    }
                    break;
                }
                i += 1;
                if i == n {
                    return Ok(Arc::new(Basis {
                        spec: spec.clone(),
                        orbitals,
                        dets,
                        binom,
                    }));
                }
            }
        }
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn orbitals(&self) -> &[Orbital] {
        &self.orbitals
    }

    pub fn len(&self) -> usize {
        self.dets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dets.is_empty()
    }

    pub fn det(&self, i: usize) -> &[u16] {
        &self.dets[i]
    }

    pub fn dets(&self) -> &[Vec<u16>] {
        &self.dets
    }

    /// Combinadic rank of a sorted orbital subset.
    pub fn rank(&self, det: &[u16]) -> usize {
        det.iter()
            .enumerate()
            .map(|(i, &p)| self.binom[p as usize][i + 1])
            .sum::<u64>() as usize
    }

    pub fn total_momentum(&self, det: &[u16]) -> i32 {
        det.iter().map(|&p| self.orbitals[p as usize].k).sum()
    }

    pub fn total_sz2(&self, det: &[u16]) -> i32 {
        det.iter()
            .map(|&p| self.orbitals[p as usize].sz2 as i32)
            .sum()
    }

    /// Kinetic diagonal 2π²Σ k² of a determinant.
    pub fn kinetic_diag(&self, det: &[u16]) -> f64 {
        2.0 * PI
            * PI
            * det
                .iter()
                .map(|&p| {
                    let k = self.orbitals[p as usize].k as f64;
                    k * k
                })
                .sum::<f64>()
    }

    /// Partition into blocks keyed by total S_z (spinful) and, when
    /// requested, total momentum. Blocks are sorted by key.
    pub fn partition(&self, momentum_resolved: bool) -> Vec<BasisBlock> {
        use std::collections::BTreeMap;
        let mut map: BTreeMap<BlockKey, Vec<usize>> = BTreeMap::new();
        for (i, det) in self.dets.iter().enumerate() {
            let key = BlockKey {
                sz2: match self.spec.spin {
                    Spin::Spinless => None,
                    Spin::Spinful => Some(self.total_sz2(det)),
                },
                momentum: momentum_resolved.then(|| self.total_momentum(det)),
            };
            map.entry(key).or_default().push(i);
        }
        map.into_iter()
            .map(|(key, det_indices)| {
                let min_kinetic = det_indices
                    .iter()
                    .map(|&i| self.kinetic_diag(&self.dets[i]))
                    .fold(f64::INFINITY, f64::min);
                BasisBlock {
                    key,
                    det_indices,
                    min_kinetic,
                }
            })
            .collect()
    }
}

/// Normalized N-particle state over the full determinant basis.
#[derive(Debug, Clone)]
pub struct ManyBodyState {
    basis: Arc<Basis>,
    amplitudes: Vec<Complex64>,
}

impl ManyBodyState {
    pub fn new(basis: Arc<Basis>, amplitudes: Vec<Complex64>) -> Result<Self> {
        if amplitudes.len() != basis.len() {
            return Err(Error::InvalidModel(format!(
                "amplitude vector length {} does not match basis size {}",
                amplitudes.len(),
                basis.len()
            )));
        }
        let norm = amplitudes.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(Error::InvalidModel("state has no norm".into()));
        }
        let amplitudes = amplitudes.iter().map(|c| c / norm).collect();
        Ok(ManyBodyState { basis, amplitudes })
    }

    /// A single determinant state.
    pub fn determinant(basis: Arc<Basis>, det_index: usize) -> Result<Self> {
        let mut amps = vec![Complex64::default(); basis.len()];
        amps[det_index] = Complex64::new(1.0, 0.0);
        Self::new(basis, amps)
    }

    pub fn basis(&self) -> &Arc<Basis> {
        &self.basis
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    /// T(Ψ) = ½ Σ_j ‖∇_j Ψ‖² = Σ_D |c_D|² · 2π² Σ_{p∈D} k_p².
    pub fn kinetic_energy(&self) -> f64 {
        self.amplitudes
            .iter()
            .enumerate()
            .filter(|(_, c)| c.norm_sqr() > 0.0)
            .map(|(i, c)| c.norm_sqr() * self.basis.kinetic_diag(self.basis.det(i)))
            .sum()
    }

    /// One-particle density via the Slater-Condon contraction
    /// γ_{pr} = ⟨Ψ| a†_p a_r |Ψ⟩, ρ̂_q = Σ_{k_r - k_p = q, σ_p = σ_r} γ_{pr}.
    /// The result is band-limited at 2K and integrates exactly to N.
    pub fn density(&self) -> DensityField {
        let rho = transition_density_coeffs(self, self);
        DensityField::from_coeffs(rho, self.basis.spec().n_particles)
            .expect("density of a normalized state is a valid DensityField")
    }
}

/// Transition density ρ̂_{bra,ket;q} = Σ ⟨bra| a†_p a_r |ket⟩ over pairs
/// with σ_p = σ_r and k_r - k_p = q; coefficients ordered q = -2K..=2K.
/// The diagonal case is the ordinary one-particle density; off-diagonal
/// entries parametrize densities of arbitrary density matrices on a
/// ground space.
pub fn transition_density_coeffs(bra: &ManyBodyState, ket: &ManyBodyState) -> Vec<Complex64> {
    let basis = &ket.basis;
    assert!(
        Arc::ptr_eq(&bra.basis, &ket.basis),
        "transition density needs a shared basis"
    );
    let cutoff2 = 2 * basis.spec().cutoff;
    let mut rho = vec![Complex64::default(); 2 * cutoff2 + 1];
    let mut scratch: Vec<u16> = Vec::with_capacity(basis.spec().n_particles);
    for (i, c) in ket.amplitudes.iter().enumerate() {
        if c.norm_sqr() == 0.0 {
            continue;
        }
        let det = basis.det(i);
        for (pos, &r) in det.iter().enumerate() {
            let orb_r = basis.orbitals()[r as usize];
            let sign_r = if pos % 2 == 0 { 1.0 } else { -1.0 };
            // Candidate creations with the same spin.
            for p in same_spin_orbitals(basis, orb_r.sz2) {
                if p != r && det.binary_search(&p).is_ok() {
                    continue;
                }
                scratch.clear();
                scratch.extend(det.iter().filter(|&&q| q != r).copied());
                let before = scratch.iter().take_while(|&&q| q < p).count();
                let sign_p = if before % 2 == 0 { 1.0 } else { -1.0 };
                scratch.insert(before, p);
                let j = basis.rank(&scratch);
                let gamma = bra.amplitudes[j].conj() * c * sign_r * sign_p;
                let orb_p = basis.orbitals()[p as usize];
                let q = (orb_r.k - orb_p.k) as i64;
                rho[(q + cutoff2 as i64) as usize] += gamma;
            }
        }
    }
    rho
}

fn same_spin_orbitals(basis: &Basis, sz2: i8) -> impl Iterator<Item = u16> + '_ {
    basis
        .orbitals()
        .iter()
        .enumerate()
        .filter(move |(_, o)| o.sz2 == sz2)
        .map(|(p, _)| p as u16)
}

/// How to resolve momentum blocks during assembly.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MomentumBlocks {
    /// Resolve when the potential is exactly zero (momentum conserved).
    Auto,
    /// Never resolve; a single block per S_z sector.
    Off,
}

#[derive(Debug, Clone)]
pub struct AssembleOptions {
    pub momentum_blocks: MomentumBlocks,
    /// Explicit class representative v + c: adds c to the one-body
    /// diagonal, shifting the matrix by Nc·Identity.
    pub gauge_offset: f64,
}

impl Default for AssembleOptions {
    fn default() -> Self {
        AssembleOptions {
            momentum_blocks: MomentumBlocks::Auto,
            gauge_offset: 0.0,
        }
    }
}

/// One assembled Hermitian block of the form matrix.
#[derive(Debug, Clone)]
pub struct FormBlock {
    pub key: BlockKey,
    pub det_indices: Vec<usize>,
    pub matrix: DMatrix<Complex64>,
    pub min_kinetic: f64,
}

/// Dense Hermitian representation of ⟨Φ, HΨ⟩ over the determinant basis,
/// block-diagonal in the conserved quantum numbers.
#[derive(Debug)]
pub struct FormMatrix {
    pub basis: Arc<Basis>,
    pub blocks: Vec<FormBlock>,
    pub warnings: Vec<String>,
    pub gauge_offset: f64,
}

impl FormMatrix {
    /// Max row sum over all blocks: an exact ∞-norm of the assembled
    /// operator, used to scale residual tolerances.
    pub fn norm_inf(&self) -> f64 {
        self.blocks
            .iter()
            .map(|b| {
                (0..b.matrix.nrows())
                    .map(|i| b.matrix.row(i).iter().map(|c| c.norm()).sum::<f64>())
                    .fold(0.0, f64::max)
            })
            .fold(0.0, f64::max)
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn max_block_dim(&self) -> usize {
        self.blocks.iter().map(|b| b.det_indices.len()).max().unwrap_or(0)
    }
}

/// Largest block dimension assembled densely. Beyond this, callers must
/// use the matrix-free operator with the iterative eigensolver.
pub const MAX_DENSE_DIM: usize = 5000;

/// Collect warnings about silently truncated momentum transfers.
fn cutoff_warnings(spec: &ModelSpec, v: &PotentialClass) -> Vec<String> {
    let mut warnings = Vec::new();
    let needed = 2 * spec.cutoff;
    if !v.is_zero() && v.cutoff() < needed {
        warnings.push(format!(
            "potential cutoff {} < 2K = {}: momentum transfers beyond {} are truncated",
            v.cutoff(),
            needed,
            v.cutoff()
        ));
    }
    if let Interaction::Multiplicative { coeffs } | Interaction::GradientPair { g_coeffs: coeffs } =
        &spec.interaction
    {
        let c = coeffs.len() / 2;
        if c < needed {
            warnings.push(format!(
                "interaction cutoff {c} < 2K = {needed}: transfers beyond {c} are truncated"
            ));
        }
    }
    warnings
}

/// Enumerate the column `det_index` of H: calls `emit(row, value)` for
/// every nonzero ⟨D_row| H |D_col⟩. The enumeration applies
/// a†_p a_r (one-body) and ½ ⟨pq|w|rs⟩ a†_p a†_q a_s a_r (two-body) with
/// fermionic signs tracked through the sorted orbital lists.
pub fn for_each_element<F: FnMut(usize, Complex64)>(
    basis: &Basis,
    v: &PotentialClass,
    gauge_offset: f64,
    det_index: usize,
    mut emit: F,
) {
    let spec = basis.spec();
    let det = basis.det(det_index);
    let orbs = basis.orbitals();
    let cutoff = spec.cutoff as i64;

    // Kinetic diagonal plus gauge offset.
    let diag = basis.kinetic_diag(det) + spec.n_particles as f64 * gauge_offset;
    emit(det_index, Complex64::new(diag, 0.0));

    // One-body potential: ⟨e_{k_p}| v |e_{k_r}⟩ = v̂_{k_p - k_r}, spin diagonal.
    if !v.is_zero() {
        let mut scratch: Vec<u16> = Vec::with_capacity(spec.n_particles);
        for (pos, &r) in det.iter().enumerate() {
            let orb_r = orbs[r as usize];
            let sign_r = if pos % 2 == 0 { 1.0 } else { -1.0 };
            for kp in -cutoff..=cutoff {
                if kp == orb_r.k as i64 {
                    continue; // v̂_0 = 0 by gauge
                }
                let p = orbital_index(spec, kp, orb_r.sz2);
                let element = v.coeff(kp - orb_r.k as i64);
                if element.norm_sqr() == 0.0 {
                    continue;
                }
                if det.binary_search(&p).is_ok() {
                    continue;
                }
                scratch.clear();
                scratch.extend(det.iter().filter(|&&q| q != r).copied());
                let before = scratch.iter().take_while(|&&q| q < p).count();
                let sign_p = if before % 2 == 0 { 1.0 } else { -1.0 };
                scratch.insert(before, p);
                emit(basis.rank(&scratch), element * sign_r * sign_p);
            }
        }
    }

    // Two-body: for each ordered occupied pair (r, s), r ≠ s, and transfer t:
    // p = (k_r + t, σ_r), q = (k_s - t, σ_s); amplitude ½ ŵ_t.
    if !spec.interaction.is_none() {
        let n = det.len();
        let mut d2: Vec<u16> = Vec::with_capacity(n);
        let mut d3: Vec<u16> = Vec::with_capacity(n);
        for (pos_r, &r) in det.iter().enumerate() {
            let orb_r = orbs[r as usize];
            let sign_r = if pos_r % 2 == 0 { 1.0 } else { -1.0 };
            for &s in det.iter() {
                if s == r {
                    continue;
                }
                let orb_s = orbs[s as usize];
                // Position of s in det \ {r}.
                let pos_s = det
                    .iter()
                    .filter(|&&q| q != r)
                    .position(|&q| q == s)
                    .unwrap();
                let sign_s = if pos_s % 2 == 0 { 1.0 } else { -1.0 };
                d2.clear();
                d2.extend(det.iter().filter(|&&q| q != r && q != s).copied());
                for t in -(2 * cutoff)..=(2 * cutoff) {
                    let w = spec.interaction.transfer_coeff(t);
                    if w.norm_sqr() == 0.0 {
                        continue;
                    }
                    let kq = orb_s.k as i64 - t;
                    let kp = orb_r.k as i64 + t;
                    if kq < -cutoff || kq > cutoff || kp < -cutoff || kp > cutoff {
                        continue;
                    }
                    let q_orb = orbital_index(spec, kq, orb_s.sz2);
                    let p_orb = orbital_index(spec, kp, orb_r.sz2);
                    if p_orb == q_orb {
                        continue; // a†_p a†_p = 0
                    }
                    if d2.binary_search(&q_orb).is_ok() || d2.binary_search(&p_orb).is_ok() {
                        continue;
                    }
                    d3.clear();
                    d3.extend_from_slice(&d2);
                    let before_q = d3.iter().take_while(|&&u| u < q_orb).count();
                    let sign_q = if before_q % 2 == 0 { 1.0 } else { -1.0 };
                    d3.insert(before_q, q_orb);
                    if d3.binary_search(&p_orb).is_ok() {
                        continue;
                    }
                    let before_p = d3.iter().take_while(|&&u| u < p_orb).count();
                    let sign_p = if before_p % 2 == 0 { 1.0 } else { -1.0 };
                    d3.insert(before_p, p_orb);
                    let sign = sign_r * sign_s * sign_q * sign_p;
                    emit(basis.rank(&d3), w * 0.5 * sign);
                }
            }
        }
    }
}

fn orbital_index(spec: &ModelSpec, k: i64, sz2: i8) -> u16 {
    let base = (k + spec.cutoff as i64) as u16;
    match spec.spin {
        Spin::Spinless => base,
        Spin::Spinful => 2 * base + if sz2 > 0 { 0 } else { 1 },
    }
}

/// Matrix-free application y = H x over the full determinant basis.
pub fn apply_hamiltonian(
    basis: &Basis,
    v: &PotentialClass,
    gauge_offset: f64,
    x: &[Complex64],
) -> Vec<Complex64> {
    let mut y = vec![Complex64::default(); basis.len()];
    for i in 0..basis.len() {
        let xi = x[i];
        if xi.norm_sqr() == 0.0 {
            continue;
        }
        for_each_element(basis, v, gauge_offset, i, |j, h_ji| {
            y[j] += h_ji * xi;
        });
    }
    y
}

/// Assemble the dense block-diagonal form matrix of H = T + W + V.
///
/// Aborts if any block is non-Hermitian beyond rounding, or if an element
/// lands outside its block (conservation violated).
pub fn assemble(
    spec: &ModelSpec,
    v: &PotentialClass,
    options: &AssembleOptions,
) -> Result<FormMatrix> {
    let basis = Basis::build(spec)?;
    assemble_with_basis(basis, v, options)
}

pub fn assemble_with_basis(
    basis: Arc<Basis>,
    v: &PotentialClass,
    options: &AssembleOptions,
) -> Result<FormMatrix> {
    let spec = basis.spec().clone();
    let warnings = cutoff_warnings(&spec, v);
    let momentum_resolved = match options.momentum_blocks {
        MomentumBlocks::Auto => v.is_zero(),
        MomentumBlocks::Off => false,
    };
    let blocks_raw = basis.partition(momentum_resolved);

    let mut blocks = Vec::with_capacity(blocks_raw.len());
    for raw in blocks_raw {
        let dim = raw.det_indices.len();
        if dim > MAX_DENSE_DIM {
            return Err(Error::InvalidModel(format!(
                "block dimension {dim} exceeds the dense limit {MAX_DENSE_DIM}; \
                 use the iterative ground-state path"
            )));
        }
        let mut matrix = DMatrix::<Complex64>::zeros(dim, dim);
        for (col, &det_index) in raw.det_indices.iter().enumerate() {
            for_each_element(&basis, v, options.gauge_offset, det_index, |j, val| {
                match raw.det_indices.binary_search(&j) {
                    Ok(row) => matrix[(row, col)] += val,
                    Err(_) => {
                        // Conservation guarantees in-block targets; anything
                        // else is an internal inconsistency.
                        assert!(
                            val.norm() < 1e-14,
                            "element {val} escapes block {:?}",
                            raw.key
                        );
                    }
                }
            });
        }
        // Hermiticity is structural; deviations mean broken assembly.
        let mut max_dev = 0.0f64;
        let mut scale = 0.0f64;
        for i in 0..dim {
            for j in i..dim {
                let dev = (matrix[(i, j)] - matrix[(j, i)].conj()).norm();
                max_dev = max_dev.max(dev);
                scale = scale.max(matrix[(i, j)].norm());
            }
        }
        if max_dev > 1e-12 * (1.0 + scale) {
            return Err(Error::NonHermitian { max_dev });
        }
        blocks.push(FormBlock {
            key: raw.key,
            det_indices: raw.det_indices,
            matrix,
            min_kinetic: raw.min_kinetic,
        });
    }

    Ok(FormMatrix {
        basis,
        blocks,
        warnings,
        gauge_offset: options.gauge_offset,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fourier::TorusFunction;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn assert_close(a: f64, b: f64, tol: f64) {
        assert!((a - b).abs() <= tol, "{a} vs {b} (tol {tol})");
    }

    fn cos_potential(amplitude: f64, mode: i64, cutoff: usize) -> PotentialClass {
        let mut coeffs = vec![Complex64::default(); 2 * cutoff + 1];
        coeffs[(cutoff as i64 + mode) as usize] = Complex64::new(amplitude / 2.0, 0.0);
        coeffs[(cutoff as i64 - mode) as usize] = Complex64::new(amplitude / 2.0, 0.0);
        PotentialClass::from_coeffs(coeffs)
    }

    #[test]
    fn basis_counts() {
        let b = Basis::build(&ModelSpec::spinless(1, 1)).unwrap();
        assert_eq!(b.len(), 3);
        let b = Basis::build(&ModelSpec::spinless(2, 1)).unwrap();
        assert_eq!(b.len(), 3);
        let b = Basis::build(&ModelSpec::new(2, 2, Spin::Spinful, Interaction::None)).unwrap();
        assert_eq!(b.len(), 45);
    }

    #[test]
    fn too_many_particles_rejected() {
        assert!(Basis::build(&ModelSpec::spinless(4, 1)).is_err());
    }

    #[test]
    fn combinadic_rank_is_position() {
        let b = Basis::build(&ModelSpec::new(3, 2, Spin::Spinful, Interaction::None)).unwrap();
        for (i, det) in b.dets().iter().enumerate() {
            assert_eq!(b.rank(det), i);
        }
    }

    #[test]
    fn block_maps_are_deterministic_partitions() {
        let b = Basis::build(&ModelSpec::new(2, 2, Spin::Spinful, Interaction::None)).unwrap();
        let blocks = b.partition(true);
        let total: usize = blocks.iter().map(|bl| bl.det_indices.len()).sum();
        assert_eq!(total, b.len());
        // keys strictly increasing
        for w in blocks.windows(2) {
            assert!(w[0].key < w[1].key);
        }
    }

    #[test]
    fn free_spectrum_n1_k1() {
        // v = 0, W = none: diagonal kinetic matrix with eigenvalues
        // {0, 2π², 2π²}.
        let spec = ModelSpec::spinless(1, 1);
        let fm = assemble(&spec, &PotentialClass::zero(2), &AssembleOptions::default()).unwrap();
        let mut eigs: Vec<f64> = fm
            .blocks
            .iter()
            .flat_map(|b| (0..b.matrix.nrows()).map(|i| b.matrix[(i, i)].re).collect::<Vec<_>>())
            .collect();
        eigs.sort_by(f64::total_cmp);
        assert_close(eigs[0], 0.0, 1e-12);
        assert_close(eigs[1], 2.0 * PI * PI, 1e-12);
        assert_close(eigs[2], 2.0 * PI * PI, 1e-12);
    }

    #[test]
    fn cosine_couples_neighbor_modes() {
        // v = cos(2πx) couples k to k±1 with element 1/2.
        let spec = ModelSpec::spinless(1, 2);
        let v = cos_potential(1.0, 1, 4);
        let fm = assemble(&spec, &v, &AssembleOptions::default()).unwrap();
        assert_eq!(fm.blocks.len(), 1);
        let m = &fm.blocks[0].matrix;
        // dets are single orbitals ordered k = -2..2
        for i in 0..4 {
            assert_close(m[(i + 1, i)].re, 0.5, 1e-14);
            assert_close(m[(i, i + 1)].re, 0.5, 1e-14);
        }
        assert_close(m[(0, 2)].norm(), 0.0, 1e-14);
    }

    #[test]
    fn spinless_delta_vanishes() {
        // Fermionic wavefunctions vanish at coincidence: for any Slater
        // determinant of spinless plane waves, ⟨Ψ, WΨ⟩ = 0 for the delta.
        let spec = ModelSpec::new(2, 2, Spin::Spinless, Interaction::Delta { gamma: 3.0 });
        let fm = assemble(&spec, &PotentialClass::zero(4), &AssembleOptions::default()).unwrap();
        for b in &fm.blocks {
            for (local, &gi) in b.det_indices.iter().enumerate() {
                let kin = fm.basis.kinetic_diag(fm.basis.det(gi));
                assert_close(b.matrix[(local, local)].re, kin, 1e-10);
            }
        }
    }

    #[test]
    fn spinful_delta_diagonal() {
        // Opposite-spin pair (k↑, k↓): only the direct term survives and
        // every transfer conserving momentum contributes γ: ⟨W⟩ = γ·(#transfers)/...
        // here simply check Hermiticity and positivity of the assembled W.
        let spec = ModelSpec::new(2, 1, Spin::Spinful, Interaction::Delta { gamma: 1.0 });
        let fm = assemble(&spec, &PotentialClass::zero(2), &AssembleOptions::default()).unwrap();
        let total: usize = fm.blocks.iter().map(|b| b.det_indices.len()).sum();
        assert_eq!(total, 15); // C(6,2)
    }

    #[test]
    fn gauge_covariance_offset_shifts_diagonal() {
        // assemble(v, offset c) = assemble(v) + Nc·Identity, exactly.
        let spec = ModelSpec::new(2, 2, Spin::Spinful, Interaction::Delta { gamma: 0.7 });
        let v = cos_potential(0.9, 1, 4);
        let plain = assemble(&spec, &v, &AssembleOptions::default()).unwrap();
        let c = 1.37;
        let shifted = assemble(
            &spec,
            &v,
            &AssembleOptions {
                gauge_offset: c,
                ..Default::default()
            },
        )
        .unwrap();
        for (b0, b1) in plain.blocks.iter().zip(&shifted.blocks) {
            let dim = b0.matrix.nrows();
            for i in 0..dim {
                for j in 0..dim {
                    let expect = if i == j {
                        b0.matrix[(i, j)] + Complex64::new(2.0 * c, 0.0)
                    } else {
                        b0.matrix[(i, j)]
                    };
                    assert!((b1.matrix[(i, j)] - expect).norm() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn momentum_blocks_vanishing_couplings() {
        // With v = 0 and translation-invariant W the full (unblocked)
        // matrix has no elements between different total-momentum sets.
        let spec = ModelSpec::new(2, 2, Spin::Spinless, Interaction::Delta { gamma: 1.3 });
        let fm = assemble(
            &spec,
            &PotentialClass::zero(4),
            &AssembleOptions {
                momentum_blocks: MomentumBlocks::Off,
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(fm.blocks.len(), 1);
        let m = &fm.blocks[0].matrix;
        let b = &fm.basis;
        for i in 0..b.len() {
            for j in 0..b.len() {
                if b.total_momentum(b.det(i)) != b.total_momentum(b.det(j)) {
                    assert!(m[(i, j)].norm() < 1e-14);
                }
            }
        }
    }

    #[test]
    fn cutoff_warning_emitted() {
        let spec = ModelSpec::spinless(1, 4);
        let v = cos_potential(1.0, 1, 2); // cutoff 2 < 2K = 8
        let fm = assemble(&spec, &v, &AssembleOptions::default()).unwrap();
        assert_eq!(fm.warnings.len(), 1);
        assert!(fm.warnings[0].contains("truncated"));
    }

    #[test]
    fn density_of_plane_wave_is_constant() {
        let spec = ModelSpec::spinless(1, 2);
        let basis = Basis::build(&spec).unwrap();
        // det {4} is k = +2
        let psi = ManyBodyState::determinant(basis, 4).unwrap();
        let rho = psi.density();
        assert_close(rho.profile().coeff(0).re, 1.0, 1e-12);
        for k in 1..=4i64 {
            assert!(rho.profile().coeff(k).norm() < 1e-12);
        }
    }

    #[test]
    fn density_of_filled_slater_is_constant_two() {
        let spec = ModelSpec::spinless(2, 1);
        let basis = Basis::build(&spec).unwrap();
        // det {e_{-1}? } orbitals: p=0 ↔ k=-1, p=1 ↔ k=0, p=2 ↔ k=+1
        // choose {k=0, k=+1}: orbital indices {1,2} = last det
        let idx = basis.rank(&[1, 2]);
        let psi = ManyBodyState::determinant(basis, idx).unwrap();
        let rho = psi.density();
        assert_close(rho.profile().coeff(0).re, 2.0, 1e-12);
        for k in 1..=2i64 {
            assert!(rho.profile().coeff(k).norm() < 1e-12);
        }
    }

    #[test]
    fn density_of_superposition() {
        // Ψ = (e_0 + e_1)/√2 has ρ = 1 + cos(2πx).
        let spec = ModelSpec::spinless(1, 1);
        let basis = Basis::build(&spec).unwrap();
        let amps = vec![
            Complex64::default(),                  // k=-1
            Complex64::new(1.0 / 2f64.sqrt(), 0.0), // k=0
            Complex64::new(1.0 / 2f64.sqrt(), 0.0), // k=1
        ];
        let psi = ManyBodyState::new(basis, amps).unwrap();
        let rho = psi.density();
        assert_close(rho.profile().coeff(0).re, 1.0, 1e-12);
        assert_close(rho.profile().coeff(1).re, 0.5, 1e-12);
        assert_close(rho.profile().coeff(-1).re, 0.5, 1e-12);
    }

    #[test]
    fn kinetic_energy_examples() {
        let spec = ModelSpec::spinless(1, 1);
        let basis = Basis::build(&spec).unwrap();
        // e_0 → 0
        let psi = ManyBodyState::determinant(basis.clone(), 1).unwrap();
        assert_close(psi.kinetic_energy(), 0.0, 1e-14);
        // e_1 → 2π²
        let psi = ManyBodyState::determinant(basis, 2).unwrap();
        assert_close(psi.kinetic_energy(), 2.0 * PI * PI, 1e-12);
        // Slater(e_{-1}, e_0, e_1) → 4π²
        let spec = ModelSpec::spinless(3, 1);
        let basis = Basis::build(&spec).unwrap();
        let psi = ManyBodyState::determinant(basis, 0).unwrap();
        assert_close(psi.kinetic_energy(), 4.0 * PI * PI, 1e-12);
    }

    #[test]
    fn kinetic_matches_matrix_expectation() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let spec = ModelSpec::spinless(2, 2);
        let basis = Basis::build(&spec).unwrap();
        let amps: Vec<Complex64> = (0..basis.len())
            .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect();
        let psi = ManyBodyState::new(basis.clone(), amps).unwrap();
        let y = apply_hamiltonian(&basis, &PotentialClass::zero(4), 0.0, psi.amplitudes());
        let expect: Complex64 = psi
            .amplitudes()
            .iter()
            .zip(&y)
            .map(|(c, yc)| c.conj() * yc)
            .sum();
        assert_close(psi.kinetic_energy(), expect.re, 1e-10);
    }

    #[test]
    fn vw_kinetic_estimate_random_states() {
        // ‖∇√ρ_Ψ‖² ≤ 2T(Ψ) for random normalized states.
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for spec in [ModelSpec::spinless(1, 3), ModelSpec::spinless(2, 3)] {
            let basis = Basis::build(&spec).unwrap();
            for _ in 0..250 {
                let amps: Vec<Complex64> = (0..basis.len())
                    .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
                    .collect();
                let psi = ManyBodyState::new(basis.clone(), amps).unwrap();
                let rho = psi.density();
                assert!(
                    rho.vw_integral() <= 2.0 * psi.kinetic_energy() + 1e-8,
                    "A={} > 2T={}",
                    rho.vw_integral(),
                    2.0 * psi.kinetic_energy()
                );
            }
        }
    }

    #[test]
    fn gradient_pair_interaction_is_hermitian() {
        // ∇g kernel with real g: assembly must be Hermitian (checked
        // internally by assemble).
        let g = TorusFunction::from_samples(
            &(0..40)
                .map(|i| (2.0 * PI * i as f64 / 40.0).sin() * 0.3)
                .collect::<Vec<_>>(),
            4,
        )
        .unwrap();
        let spec = ModelSpec::new(
            2,
            2,
            Spin::Spinless,
            Interaction::GradientPair {
                g_coeffs: g.coeffs().to_vec(),
            },
        );
        assert!(assemble(&spec, &PotentialClass::zero(4), &AssembleOptions::default()).is_ok());
    }
}
