//! Exact finite-dimensional post-scattering states.
//!
//! The system is a qubit (two sphere locations), each of `N_t` photons is
//! scattered by `S_1` or `S_2` depending on the location. Only the 2x2 system
//! matrix and single-photon operators are stored; entropies are evaluated
//! through the tensor structure and dense matrices over the observed fraction
//! are built only on request.

mod schur;

use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qmath::{self, c, kron, kron_power, CMatrix, DensityMatrix};
#[cfg(test)]
use crate::qmath::CVector;

/// Dimension limits for the oracle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleCaps {
    /// Largest allowed `2 d^{f N_t}` for a state.
    #[serde(default = "default_assembled")]
    pub assembled: usize,
    /// Largest matrix handed to a dense eigensolver.
    #[serde(default = "default_dense")]
    pub dense: usize,
}

fn default_assembled() -> usize {
    1 << 14
}

fn default_dense() -> usize {
    1 << 10
}

impl Default for OracleCaps {
    fn default() -> Self {
        Self {
            assembled: default_assembled(),
            dense: default_dense(),
        }
    }
}

/// Mutual-information thresholds separating the three phases (bits).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhaseThresholds {
    pub product: f64,
    pub broadcast: f64,
}

impl Default for PhaseThresholds {
    fn default() -> Self {
        Self {
            product: 0.05,
            broadcast: 0.1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Product,
    Broadcasting,
    FullInformation,
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Phase::Product => "product",
            Phase::Broadcasting => "broadcasting",
            Phase::FullInformation => "full_information",
        })
    }
}

fn dim_power(d: usize, n: usize) -> u128 {
    (d as u128).checked_pow(n as u32).unwrap_or(u128::MAX)
}

fn check_cap(what: &str, needed: u128, cap: usize, limiting: &str) -> Result<()> {
    if needed > cap as u128 {
        return Err(Error::Capacity {
            what: what.to_string(),
            needed,
            cap,
            limiting: limiting.to_string(),
        });
    }
    Ok(())
}

fn integral(x: f64, what: &str) -> Result<usize> {
    let r = x.round();
    if (x - r).abs() > 1e-9 * x.abs().max(1.0) || r < 0.0 {
        return Err(Error::Domain(format!("{what} = {x} is not a nonnegative integer")));
    }
    Ok(r as usize)
}

fn check_unitary(u: &CMatrix, name: &str) -> Result<()> {
    if !u.is_square() {
        return Err(Error::Shape(format!("{name} is {}x{}", u.nrows(), u.ncols())));
    }
    let err = (u.adjoint() * u - CMatrix::identity(u.nrows(), u.ncols())).camax();
    if err > 1e-9 {
        return Err(Error::InvalidState(format!("{name} not unitary (error {err:e})")));
    }
    Ok(())
}

/// Post-scattering system/fraction state in factored form.
#[derive(Debug, Clone)]
pub struct OutState {
    /// Initial system state in the pointer basis.
    pub c: CMatrix,
    /// Decoherence-factor base `Tr S_1 rho S_2^dagger`.
    pub lambda: Complex64,
    pub n_t: usize,
    pub f: f64,
    pub m: f64,
    /// `S_i rho S_i^dagger`.
    pub block_same: [DensityMatrix; 2],
    /// `S_1 rho S_2^dagger`.
    pub block_cross: CMatrix,
    pub photon_dim: usize,
    env: DensityMatrix,
    scattering: [CMatrix; 2],
    caps: OracleCaps,
}

/// Scatter `n_t` photons in state `env` off a two-location system.
#[allow(clippy::too_many_arguments)]
pub fn evolve_out_state(
    rho_s0: &DensityMatrix,
    env: &DensityMatrix,
    s1: &CMatrix,
    s2: &CMatrix,
    n_t: usize,
    f: f64,
    m: f64,
    caps: OracleCaps,
) -> Result<OutState> {
    if rho_s0.dim() != 2 {
        return Err(Error::DimensionMismatch(format!("system must be a qubit, got dim {}", rho_s0.dim())));
    }
    let d = env.dim();
    if s1.nrows() != d || s2.nrows() != d {
        return Err(Error::DimensionMismatch(format!(
            "scattering matrices {}x{} / {}x{} on photon dim {d}",
            s1.nrows(),
            s1.ncols(),
            s2.nrows(),
            s2.ncols()
        )));
    }
    check_unitary(s1, "S1")?;
    check_unitary(s2, "S2")?;
    let rho = env.entries();
    let block_cross = s1 * rho * s2.adjoint();
    let lambda = block_cross.trace();
    let block_same = [env.conjugate_by(s1)?, env.conjugate_by(s2)?];
    let state = OutState {
        c: rho_s0.entries().clone(),
        lambda,
        n_t,
        f,
        m,
        block_same,
        block_cross,
        photon_dim: d,
        env: env.clone(),
        scattering: [s1.clone(), s2.clone()],
        caps,
    };
    state.validate()?;
    Ok(state)
}

impl OutState {
    fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.f) {
            return Err(Error::Domain(format!("f = {} outside [0, 1]", self.f)));
        }
        if !(self.m > 0.0 && self.m <= 1.0) {
            return Err(Error::Domain(format!("m = {} outside (0, 1]", self.m)));
        }
        integral(1.0 / self.m, "1/m")?;
        integral(self.f * self.n_t as f64, "f*N_t")?;
        integral(self.m * self.n_t as f64, "m*N_t")?;
        check_cap(
            "observed fraction (2 d^{f N_t})",
            2 * dim_power(self.photon_dim, self.observed_photons()),
            self.caps.assembled,
            "f*N_t",
        )
    }

    /// Photons in the observed fraction, `f N_t`.
    pub fn observed_photons(&self) -> usize {
        (self.f * self.n_t as f64).round() as usize
    }

    /// Photons per macrofraction, `m N_t`.
    pub fn macro_size(&self) -> usize {
        (self.m * self.n_t as f64).round() as usize
    }

    /// Number of macrofractions `M = 1/m`.
    pub fn macro_count(&self) -> usize {
        (1.0 / self.m).round() as usize
    }

    pub fn caps(&self) -> OracleCaps {
        self.caps
    }

    pub fn env(&self) -> &DensityMatrix {
        &self.env
    }

    pub fn scattering(&self) -> &[CMatrix; 2] {
        &self.scattering
    }

    /// Same physics with a different observed fraction.
    pub fn with_fraction(&self, f: f64) -> Result<OutState> {
        let s = OutState { f, ..self.clone() };
        s.validate()?;
        Ok(s)
    }

    /// Same physics after a different number of scattered photons.
    pub fn with_photon_count(&self, n_t: usize) -> Result<OutState> {
        let s = OutState { n_t, ..self.clone() };
        s.validate()?;
        Ok(s)
    }

    pub fn pointer_probs(&self) -> [f64; 2] {
        [self.c[(0, 0)].re, self.c[(1, 1)].re]
    }

    /// Pointer entropy `H_S`.
    pub fn h_s(&self) -> f64 {
        qmath::shannon_entropy(&self.pointer_probs())
    }

    /// `c_12 Lambda^k`: system coherence after tracing `k` photons.
    pub fn coherence_after(&self, k: usize) -> Complex64 {
        let mag = self.lambda.norm().powi(k as i32);
        let arg = self.lambda.arg() * k as f64;
        self.c[(0, 1)] * Complex64::from_polar(mag, arg)
    }

    fn unobserved(&self) -> usize {
        self.n_t - self.observed_photons()
    }
}

fn qubit_entropy(c11: f64, c22: f64, off: Complex64) -> f64 {
    let gap = ((c11 - c22).powi(2) + 4.0 * off.norm_sqr()).sqrt();
    let t = c11 + c22;
    qmath::shannon_entropy(&[((t + gap) / 2.0).max(0.0), ((t - gap) / 2.0).max(0.0)])
}

/// `2 |c_12| |Lambda|^{(1-f) N_t}`: trace norm of the off-diagonal blocks.
pub fn coherent_tail_norm(state: &OutState) -> f64 {
    2.0 * state.coherence_after(state.unobserved()).norm()
}

fn block_operator(state: &OutState, i: usize, j: usize) -> CMatrix {
    match (i, j) {
        (0, 0) => state.block_same[0].entries().clone(),
        (1, 1) => state.block_same[1].entries().clone(),
        (0, 1) => state.block_cross.clone(),
        _ => state.block_cross.adjoint(),
    }
}

fn system_factor(state: &OutState, i: usize, j: usize) -> Complex64 {
    match (i, j) {
        (0, 1) => state.coherence_after(state.unobserved()),
        (1, 0) => state.coherence_after(state.unobserved()).conj(),
        _ => state.c[(i, j)],
    }
}

fn assemble(state: &OutState, blocks: &[(usize, usize)]) -> Result<CMatrix> {
    let n = state.observed_photons();
    let dn = dim_power(state.photon_dim, n);
    check_cap("dense assembly (2 d^{f N_t})", 2 * dn, state.caps.dense, "f*N_t")?;
    let dn = dn as usize;
    let mut out = CMatrix::zeros(2 * dn, 2 * dn);
    for &(i, j) in blocks {
        let b = kron_power(&block_operator(state, i, j), n) * system_factor(state, i, j);
        out.view_mut((i * dn, j * dn), (dn, dn)).copy_from(&b);
    }
    Ok(out)
}

/// Dense `rho_{S:fE}` (system first, then observed photons).
pub fn assemble_dense(state: &OutState) -> Result<DensityMatrix> {
    let m = assemble(state, &[(0, 0), (0, 1), (1, 0), (1, 1)])?;
    DensityMatrix::with_tolerance(qmath::hermitian_part(&m), 1e-8)
}

/// Dense off-diagonal (`i != j`) part of `rho_{S:fE}`.
pub fn assemble_off_diagonal(state: &OutState) -> Result<CMatrix> {
    assemble(state, &[(0, 1), (1, 0)])
}

/// Reference evolution: the full controlled unitary on system and all
/// `n_t` photons, then the trace over the unobserved ones.
pub fn brute_force_out_state(
    rho_s0: &DensityMatrix,
    env: &DensityMatrix,
    s1: &CMatrix,
    s2: &CMatrix,
    n_t: usize,
    n_obs: usize,
    cap: usize,
) -> Result<DensityMatrix> {
    let d = env.dim();
    check_cap("full evolution (2 d^{N_t})", 2 * dim_power(d, n_t), cap, "N_t")?;
    let dn = d.pow(n_t as u32);
    let mut u = CMatrix::zeros(2 * dn, 2 * dn);
    u.view_mut((0, 0), (dn, dn)).copy_from(&kron_power(s1, n_t));
    u.view_mut((dn, dn), (dn, dn)).copy_from(&kron_power(s2, n_t));
    let mut rho = rho_s0.entries().clone();
    for _ in 0..n_t {
        rho = kron(&rho, env.entries());
    }
    let evolved = &u * rho * u.adjoint();
    let mut dims = vec![2];
    dims.extend(std::iter::repeat_n(d, n_t));
    let keep: Vec<usize> = (0..=n_obs).collect();
    let out = qmath::partial_trace_operator(&evolved, &dims, &keep)?;
    DensityMatrix::with_tolerance(qmath::hermitian_part(&out), 1e-8)
}

/// Macrofraction states `(S_i rho S_i^dagger)^{(x) m N_t}`.
pub fn macro_states(state: &OutState, index: usize) -> Result<(DensityMatrix, DensityMatrix)> {
    if index >= state.macro_count() {
        return Err(Error::Domain(format!(
            "macrofraction index {index} >= M = {}",
            state.macro_count()
        )));
    }
    let g = state.macro_size();
    check_cap("macro state (d^{m N_t})", dim_power(state.photon_dim, g), state.caps.dense, "m*N_t")?;
    let a = kron_power(state.block_same[0].entries(), g);
    let b = kron_power(state.block_same[1].entries(), g);
    Ok((
        DensityMatrix::with_tolerance(qmath::hermitian_part(&a), 1e-8)?,
        DensityMatrix::with_tolerance(qmath::hermitian_part(&b), 1e-8)?,
    ))
}

/// Single-photon overlap `B(S_1 rho S_1^dagger, S_2 rho S_2^dagger)`.
pub fn micro_overlap(state: &OutState) -> Result<f64> {
    qmath::generalized_overlap(&state.block_same[0], &state.block_same[1])
}

/// Macrofraction overlap `B_micro^{m N_t}` (overlap is multiplicative).
pub fn macro_overlap(state: &OutState) -> Result<f64> {
    Ok(micro_overlap(state)?.powi(state.macro_size() as i32))
}

/// `S(rho_S)` of the system after all photons are traced out.
pub fn system_entropy(state: &OutState) -> f64 {
    let p = state.pointer_probs();
    qubit_entropy(p[0], p[1], state.coherence_after(state.n_t))
}

/// `S(rho_{S:fE}) = f N_t S(rho) + S(C)` with `C` the system matrix damped
/// by the unobserved photons; the vectors `|i> S_i^{(x) n} |a>` are orthonormal.
pub fn joint_entropy(state: &OutState) -> Result<f64> {
    let p = state.pointer_probs();
    let s_env = qmath::von_neumann_entropy(&state.env)?;
    Ok(state.observed_photons() as f64 * s_env + qubit_entropy(p[0], p[1], state.coherence_after(state.unobserved())))
}

/// `S(rho_fE)` of `c_11 A^{(x) n} + c_22 B^{(x) n}`.
pub fn fraction_entropy(state: &OutState) -> Result<f64> {
    let n = state.observed_photons();
    if n == 0 {
        return Ok(0.0);
    }
    let p = state.pointer_probs();
    let a = state.block_same[0].entries();
    let b = state.block_same[1].entries();
    if state.photon_dim == 2 {
        return schur::qubit_mixture_entropy(&p, &[a.clone(), b.clone()], n);
    }
    // Either the dense d^n matrix or the 2 r^n Gram matrix of the purification.
    let (vals, vecs) = qmath::hermitian_eigen(state.env.entries());
    let vmax = vals.iter().copied().fold(0.0, f64::max);
    let support: Vec<usize> = (0..vals.len()).filter(|&i| vals[i] > 1e-14 * vmax).collect();
    let r = support.len();
    let dense_dim = dim_power(state.photon_dim, n);
    let gram_dim = 2 * dim_power(r, n);
    if gram_dim < dense_dim {
        check_cap("fraction Gram matrix (2 r^{f N_t})", gram_dim, state.caps.dense, "f*N_t")?;
        let mut root = CMatrix::zeros(state.photon_dim, r);
        for (col, &i) in support.iter().enumerate() {
            let s = vals[i].sqrt();
            for row in 0..state.photon_dim {
                root[(row, col)] = vecs[(row, i)] * s;
            }
        }
        let [s1, s2] = &state.scattering;
        let g11 = root.adjoint() * &root;
        let g12 = root.adjoint() * s1.adjoint() * s2 * &root;
        let rn = dim_power(r, n) as usize;
        let mut gram = CMatrix::zeros(2 * rn, 2 * rn);
        let cross = kron_power(&g12, n) * c((p[0] * p[1]).sqrt(), 0.0);
        let same = kron_power(&g11, n);
        gram.view_mut((0, 0), (rn, rn)).copy_from(&(&same * c(p[0], 0.0)));
        gram.view_mut((rn, rn), (rn, rn)).copy_from(&(&same * c(p[1], 0.0)));
        gram.view_mut((0, rn), (rn, rn)).copy_from(&cross);
        gram.view_mut((rn, 0), (rn, rn)).copy_from(&cross.adjoint());
        return qmath::spectrum_entropy(&qmath::hermitian_eigenvalues(&gram), 1e-9);
    }
    check_cap("fraction state (d^{f N_t})", dense_dim, state.caps.dense, "f*N_t")?;
    let m = kron_power(a, n) * c(p[0], 0.0) + kron_power(b, n) * c(p[1], 0.0);
    qmath::spectrum_entropy(&qmath::hermitian_eigenvalues(&m), 1e-9)
}

/// Exact `I(S : fE)` in bits.
pub fn mutual_information(state: &OutState) -> Result<f64> {
    if state.observed_photons() == 0 {
        return Ok(0.0);
    }
    Ok(system_entropy(state) + fraction_entropy(state)? - joint_entropy(state)?)
}

pub fn classify_phase(i_bits: f64, h_s: f64, thresholds: &PhaseThresholds) -> Phase {
    if i_bits < thresholds.product {
        Phase::Product
    } else if (i_bits - h_s).abs() < thresholds.broadcast {
        Phase::Broadcasting
    } else {
        Phase::FullInformation
    }
}

fn helstrom_pair(a: &CMatrix, b: &CMatrix) -> (CMatrix, CMatrix) {
    let diff = qmath::hermitian_part(&(a - b));
    let (vals, vecs) = qmath::hermitian_eigen(&diff);
    let scale = vals.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let n = a.nrows();
    let mut plus = CMatrix::zeros(n, n);
    for (k, &v) in vals.iter().enumerate() {
        if v > 1e-12 * scale && scale > 0.0 {
            let col = vecs.column(k);
            plus += col * col.adjoint();
        }
    }
    let minus = CMatrix::identity(n, n) - &plus;
    let project = |p: &CMatrix, x: &CMatrix| {
        let y = p * x * p;
        let t = y.trace().re;
        if t > 1e-12 {
            y * c(1.0 / t, 0.0)
        } else {
            x.clone()
        }
    };
    (project(&plus, a), project(&minus, b))
}

/// Trace distance `||rho_{S:fE} - sigma||_1` to the broadcast candidate
/// `sigma = sum_i c_ii |i><i| (x) (x)_groups sigma_i^group`, where each
/// macrofraction state is restricted to its side of the Helstrom split.
pub fn broadcast_distance(state: &OutState) -> Result<f64> {
    let n = state.observed_photons();
    let g = state.macro_size();
    let rho = assemble_dense(state)?;
    let mut groups = Vec::new();
    if n > 0 {
        let full = n / g;
        groups.extend(std::iter::repeat_n(g, full));
        if !n.is_multiple_of(g) {
            groups.push(n % g);
        }
    }
    let mut sizes: Vec<usize> = groups.clone();
    sizes.sort_unstable();
    sizes.dedup();
    let a = state.block_same[0].entries();
    let b = state.block_same[1].entries();
    let pairs: Vec<(usize, (CMatrix, CMatrix))> = sizes
        .iter()
        .map(|&s| (s, helstrom_pair(&kron_power(a, s), &kron_power(b, s))))
        .collect();
    let lookup = |s: usize| &pairs.iter().find(|(k, _)| *k == s).expect("size present").1;
    let mut side = [CMatrix::identity(1, 1), CMatrix::identity(1, 1)];
    for &s in &groups {
        let (sa, sb) = lookup(s);
        side[0] = kron(&side[0], sa);
        side[1] = kron(&side[1], sb);
    }
    let dn = side[0].nrows();
    let p = state.pointer_probs();
    let mut sigma = CMatrix::zeros(2 * dn, 2 * dn);
    sigma.view_mut((0, 0), (dn, dn)).copy_from(&(&side[0] * c(p[0], 0.0)));
    sigma.view_mut((dn, dn), (dn, dn)).copy_from(&(&side[1] * c(p[1], 0.0)));
    Ok(qmath::hermitian_trace_norm(&(rho.entries() - sigma)))
}

/// `I(f)` over a family of observed fractions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlateauCurve {
    pub f: Vec<f64>,
    pub i_bits: Vec<f64>,
    pub tail_norm: Vec<f64>,
    pub broadcast_distance: Vec<Option<f64>>,
    pub phase: Vec<Phase>,
    pub h_s: f64,
    pub b_macro: f64,
    pub b_micro: f64,
    pub t: Option<f64>,
    pub n_t: usize,
    pub m: f64,
}

impl PlateauCurve {
    /// Largest decrease of `I` between consecutive fractions (0 if monotone).
    pub fn max_decrease(&self) -> f64 {
        self.i_bits.windows(2).map(|w| w[0] - w[1]).fold(0.0, f64::max)
    }
}

/// Exact mutual information for each `f`; broadcast distances are computed
/// where the dense cap allows and left empty otherwise.
pub fn mutual_info_curve(
    state: &OutState,
    fs: &[f64],
    thresholds: &PhaseThresholds,
    t: Option<f64>,
    with_distance: bool,
) -> Result<PlateauCurve> {
    let b_micro = micro_overlap(state)?;
    let mut curve = PlateauCurve {
        f: Vec::with_capacity(fs.len()),
        i_bits: Vec::new(),
        tail_norm: Vec::new(),
        broadcast_distance: Vec::new(),
        phase: Vec::new(),
        h_s: state.h_s(),
        b_macro: b_micro.powi(state.macro_size() as i32),
        b_micro,
        t,
        n_t: state.n_t,
        m: state.m,
    };
    for &f in fs {
        let s = state.with_fraction(f)?;
        let i = mutual_information(&s)?;
        let distance = if with_distance {
            match broadcast_distance(&s) {
                Ok(v) => Some(v),
                Err(Error::Capacity { .. }) => None,
                Err(e) => return Err(e),
            }
        } else {
            None
        };
        curve.f.push(f);
        curve.i_bits.push(i);
        curve.tail_norm.push(coherent_tail_norm(&s));
        curve.broadcast_distance.push(distance);
        curve.phase.push(classify_phase(i, curve.h_s, thresholds));
    }
    Ok(curve)
}

/// Classical-classical broadcasting map: pinch the system in the pointer
/// basis and hand every observer `copies` macrofractions of the matching record.
#[derive(Debug, Clone)]
pub struct CcChannel {
    pub macro_states: Vec<DensityMatrix>,
    pub copies: usize,
    /// Overlap above which the records count as non-orthogonal.
    pub orthogonality_tol: f64,
}

impl CcChannel {
    pub fn new(macro_states: Vec<DensityMatrix>, copies: usize) -> Result<Self> {
        if macro_states.is_empty() {
            return Err(Error::Domain("channel needs at least one record state".into()));
        }
        let d = macro_states[0].dim();
        if macro_states.iter().any(|s| s.dim() != d) {
            return Err(Error::DimensionMismatch("record states differ in dimension".into()));
        }
        Ok(Self {
            macro_states,
            copies,
            orthogonality_tol: 1e-6,
        })
    }

    /// Records of an out-state: one macrofraction per copy, `f M` copies.
    pub fn from_out_state(state: &OutState) -> Result<Self> {
        let (a, b) = macro_states(state, 0)?;
        let copies = (state.f * state.macro_count() as f64).floor() as usize;
        Self::new(vec![a, b], copies)
    }
}

#[derive(Debug, Clone)]
pub struct BroadcastEnsemble {
    pub probs: Vec<f64>,
    pub macro_states: Vec<DensityMatrix>,
    pub copies: usize,
    /// Largest pairwise overlap of the full records, `B^copies`.
    pub max_overlap: f64,
    pub orthogonal: bool,
}

pub fn cc_channel_apply(rho_s0: &DensityMatrix, channel: &CcChannel) -> Result<BroadcastEnsemble> {
    if rho_s0.dim() != channel.macro_states.len() {
        return Err(Error::DimensionMismatch(format!(
            "system dim {} vs {} record states",
            rho_s0.dim(),
            channel.macro_states.len()
        )));
    }
    let probs: Vec<f64> = (0..rho_s0.dim()).map(|i| rho_s0.entries()[(i, i)].re).collect();
    let mut max_overlap: f64 = 0.0;
    let k = channel.macro_states.len();
    for i in 0..k {
        for j in (i + 1)..k {
            let b = qmath::generalized_overlap(&channel.macro_states[i], &channel.macro_states[j])?;
            max_overlap = max_overlap.max(b.powi(channel.copies as i32));
        }
    }
    let orthogonal = max_overlap <= channel.orthogonality_tol;
    if !orthogonal {
        log::warn!("record states are not orthogonal: overlap {max_overlap:e}");
    }
    Ok(BroadcastEnsemble {
        probs,
        macro_states: channel.macro_states.clone(),
        copies: channel.copies,
        max_overlap,
        orthogonal,
    })
}

#[cfg(test)]
mod tests;
