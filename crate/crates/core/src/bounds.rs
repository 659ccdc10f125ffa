//! Continuity bounds, the Bhattacharyya lower bound on accessible
//! information and the composite bound on `|H_S - I(S:fE)|`. All entropies
//! are in bits, so the `log 2` factor of the composite bound equals 1.

use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::asymptotics::{OverlapReport, Timescale};
use crate::error::{Error, Result};
use crate::oracle::{self, OracleCaps};
use crate::qmath::{self, c, random, CMatrix, DensityMatrix};

/// `h(p) = -p log p - (1-p) log(1-p)`.
pub fn binary_entropy(p: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::Domain(format!("binary entropy argument {p} outside [0, 1]")));
    }
    Ok(qmath::shannon_entropy(&[p, 1.0 - p]))
}

/// `(eps/2) log(d-1) + h(eps/2)` for trace-norm distance `eps`.
pub fn fannes_audenaert(eps: f64, d: usize) -> Result<f64> {
    if !(0.0..=2.0).contains(&eps) {
        return Err(Error::Domain(format!("trace distance {eps} outside [0, 2]")));
    }
    if d < 2 {
        return Err(Error::Domain(format!("dimension {d} < 2")));
    }
    Ok(0.5 * eps * ((d - 1) as f64).log2() + binary_entropy(0.5 * eps)?)
}

/// `4 eps log d_S + 2 h(eps)`, bounding the change of `S(A|B)`.
pub fn alicki_fannes(eps: f64, d_s: usize) -> Result<f64> {
    if !(0.0..=1.0).contains(&eps) {
        return Err(Error::Domain(format!("trace distance {eps} outside [0, 1]")));
    }
    if d_s < 1 {
        return Err(Error::Domain("dimension must be positive".into()));
    }
    Ok(4.0 * eps * (d_s as f64).log2() + 2.0 * binary_entropy(eps)?)
}

/// `H(p) - 2 sqrt(p1 p2) B^{fM}`; negative values are vacuous.
pub fn imax_lower_bound(p1: f64, p2: f64, b: f64, fm: f64) -> f64 {
    qmath::shannon_entropy(&[p1, p2]) - 2.0 * (p1 * p2).sqrt() * b.powf(fm)
}

/// `S(A|B) = S(AB) - S(B)`.
pub fn conditional_entropy(rho_ab: &DensityMatrix, dim_a: usize, dim_b: usize) -> Result<f64> {
    let rho_b = qmath::partial_trace(rho_ab, &[dim_a, dim_b], &[1])?;
    Ok(qmath::von_neumann_entropy(rho_ab)? - qmath::von_neumann_entropy(&rho_b)?)
}

/// Classical mutual information of the outcome of `povm` on the ensemble.
pub fn measured_information(probs: &[f64], states: &[DensityMatrix], povm: &[CMatrix]) -> Result<f64> {
    if probs.len() != states.len() {
        return Err(Error::DimensionMismatch("probabilities vs states".into()));
    }
    let joint: Vec<Vec<f64>> = probs
        .iter()
        .zip(states)
        .map(|(&p, s)| povm.iter().map(|e| p * (e * s.entries()).trace().re.max(0.0)).collect())
        .collect();
    let outcome: Vec<f64> = (0..povm.len()).map(|k| joint.iter().map(|row| row[k]).sum()).collect();
    let flat: Vec<f64> = joint.iter().flatten().copied().collect();
    Ok(qmath::shannon_entropy(probs) + qmath::shannon_entropy(&outcome) - qmath::shannon_entropy(&flat))
}

/// Projective measurement whose outcome statistics attain the quantum
/// overlap: eigenbasis of `rho1^{-1/2} sqrt(sqrt(rho1) rho2 sqrt(rho1)) rho1^{-1/2}`
/// (pseudo-inverse on the support of `rho1`).
pub fn fuchs_caves_measurement(rho1: &DensityMatrix, rho2: &DensityMatrix) -> Result<Vec<CMatrix>> {
    if rho1.dim() != rho2.dim() {
        return Err(Error::DimensionMismatch("measurement of unequal dimensions".into()));
    }
    let (vals, vecs) = qmath::hermitian_eigen(rho1.entries());
    let max = vals.iter().copied().fold(0.0, f64::max);
    let cut = 1e-12 * max;
    let sqrt1 = qmath::spectral_map(&vals, &vecs, |v| if v > cut { v.sqrt() } else { 0.0 });
    let inv_sqrt1 = qmath::spectral_map(&vals, &vecs, |v| if v > cut { 1.0 / v.sqrt() } else { 0.0 });
    let inner = qmath::hermitian_part(&(&sqrt1 * rho2.entries() * &sqrt1));
    let (iv, ivec) = qmath::hermitian_eigen(&inner);
    let root = qmath::spectral_map(&iv, &ivec, |v| v.max(0.0).sqrt());
    let m = qmath::hermitian_part(&(&inv_sqrt1 * root * &inv_sqrt1));
    let (_, basis) = qmath::hermitian_eigen(&m);
    Ok((0..basis.ncols())
        .map(|k| {
            let col = basis.column(k);
            col * col.adjoint()
        })
        .collect())
}

/// Projectors onto the positive and non-positive parts of `p1 rho1 - p2 rho2`.
pub fn helstrom_measurement(p1: f64, rho1: &DensityMatrix, p2: f64, rho2: &DensityMatrix) -> Vec<CMatrix> {
    let diff = qmath::hermitian_part(&(rho1.entries() * c(p1, 0.0) - rho2.entries() * c(p2, 0.0)));
    let (vals, vecs) = qmath::hermitian_eigen(&diff);
    let n = diff.nrows();
    let mut plus = CMatrix::zeros(n, n);
    for (k, &v) in vals.iter().enumerate() {
        if v > 0.0 {
            let col = vecs.column(k);
            plus += col * col.adjoint();
        }
    }
    let minus = CMatrix::identity(n, n) - &plus;
    vec![plus, minus]
}

/// Two-branch controlled-unitary instance.
#[derive(Debug, Clone)]
pub struct BoundInstance {
    pub p: [f64; 2],
    pub c12: Complex64,
    pub u1: CMatrix,
    pub u2: CMatrix,
    pub rho_e: DensityMatrix,
    pub n: usize,
    pub f: f64,
}

impl BoundInstance {
    pub fn validate(&self) -> Result<()> {
        if self.p.iter().any(|&p| !(0.0..=1.0).contains(&p)) || (self.p[0] + self.p[1] - 1.0).abs() > 1e-12 {
            return Err(Error::Domain(format!("pointer probabilities {:?} invalid", self.p)));
        }
        if self.c12.norm() > (self.p[0] * self.p[1]).sqrt() + 1e-12 {
            return Err(Error::Domain(format!("|c12| = {} exceeds sqrt(p1 p2)", self.c12.norm())));
        }
        Ok(())
    }

    pub fn system_state(&self) -> Result<DensityMatrix> {
        DensityMatrix::new(CMatrix::from_row_slice(
            2,
            2,
            &[c(self.p[0], 0.0), self.c12, self.c12.conj(), c(self.p[1], 0.0)],
        ))
    }

    /// `U_1 = U_2`, no coherence, equal weights: `|H_S - I| = rhs = 1`.
    pub fn saturation(d: usize, n: usize, f: f64) -> Self {
        Self {
            p: [0.5, 0.5],
            c12: c(0.0, 0.0),
            u1: CMatrix::identity(d, d),
            u2: CMatrix::identity(d, d),
            rho_e: DensityMatrix::maximally_mixed(d),
            n,
            f,
        }
    }

    /// Haar unitaries, random photon state and system coherence.
    pub fn random(seed: u64) -> Self {
        let mut rng = random::seeded(seed);
        let n = if rng.random_bool(0.5) { 4 } else { 8 };
        let f = [0.25, 0.5, 0.75][rng.random_range(0..3)];
        let p1: f64 = rng.random_range(0.05..0.95);
        let r: f64 = rng.random_range(0.0..1.0);
        let phase: f64 = rng.random_range(0.0..std::f64::consts::TAU);
        let rank = if rng.random_bool(0.25) { 1 } else { 2 };
        Self {
            p: [p1, 1.0 - p1],
            c12: Complex64::from_polar(r * (p1 * (1.0 - p1)).sqrt(), phase),
            u1: random::random_unitary(&mut rng, 2),
            u2: random::random_unitary(&mut rng, 2),
            rho_e: random::random_density(&mut rng, 2, rank),
            n,
            f,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub h_s: f64,
    pub i_exact: f64,
    pub rhs: f64,
    pub epsilon_e: f64,
    pub epsilon_fe: f64,
    pub b_single: f64,
    pub b_macro: f64,
    /// `rhs - |H_S - I|`.
    pub slack: f64,
    /// Both epsilons at most 1/2, where `h` is monotone.
    pub in_regime: bool,
    pub n: usize,
    pub f: f64,
}

pub fn theorem1_bound(inst: &BoundInstance, caps: OracleCaps) -> Result<BoundReport> {
    inst.validate()?;
    let m = if inst.n == 0 { 1.0 } else { 1.0 / inst.n as f64 };
    let state = oracle::evolve_out_state(&inst.system_state()?, &inst.rho_e, &inst.u1, &inst.u2, inst.n, inst.f, m, caps)?;
    let i_exact = oracle::mutual_information(&state)?;
    let h_s = state.h_s();
    let epsilon_e = 2.0 * state.coherence_after(inst.n).norm();
    let epsilon_fe = oracle::coherent_tail_norm(&state);
    let b_single = oracle::micro_overlap(&state)?;
    let b_macro = b_single.powi(state.observed_photons() as i32);
    let rhs = binary_entropy((0.5 * epsilon_e).min(1.0))?
        + 2.0 * binary_entropy(epsilon_fe.min(1.0))?
        + 4.0 * epsilon_fe
        + 2.0 * (inst.p[0] * inst.p[1]).sqrt() * b_macro;
    Ok(BoundReport {
        h_s,
        i_exact,
        rhs,
        epsilon_e,
        epsilon_fe,
        b_single,
        b_macro,
        slack: rhs - (h_s - i_exact).abs(),
        in_regime: epsilon_e <= 0.5 && epsilon_fe <= 0.5,
        n: inst.n,
        f: inst.f,
    })
}

/// One row of a verification batch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationRow {
    pub trial: usize,
    pub seed: u64,
    pub report: BoundReport,
}

/// `trials` instances from seeds derived from `base_seed`; trial 0 is the
/// saturation case. The result does not depend on thread scheduling.
pub fn verify_theorem1(base_seed: u64, trials: usize, caps: OracleCaps) -> Result<Vec<VerificationRow>> {
    (0..trials)
        .into_par_iter()
        .map(|trial| {
            let seed = random::derive_seed(base_seed, trial as u64);
            let inst = if trial == 0 {
                BoundInstance::saturation(2, 4, 0.5)
            } else {
                BoundInstance::random(seed)
            };
            Ok(VerificationRow {
                trial,
                seed,
                report: theorem1_bound(&inst, caps)?,
            })
        })
        .collect()
}

pub fn min_slack(rows: &[VerificationRow]) -> Option<f64> {
    rows.iter().map(|r| r.report.slack).reduce(f64::min)
}

/// The three right-hand-side terms in the thermodynamic limit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RhsTerms {
    /// `h(eps_E / 2)`.
    pub system: f64,
    /// `2 h(eps_fE) + 4 eps_fE`.
    pub fraction: f64,
    /// `2 sqrt(p1 p2) exp(-alpha f t / tau_D)`.
    pub records: f64,
    pub epsilon_e: f64,
    pub epsilon_fe: f64,
}

pub fn asymptotic_rhs_terms(report: &OverlapReport, p: [f64; 2], c12_abs: f64, f: f64, t: f64) -> Result<RhsTerms> {
    let tau = report.tau_d;
    let alpha = report.alpha_or_zero();
    let epsilon_e = 2.0 * c12_abs * tau.decay(t);
    let epsilon_fe = 2.0 * c12_abs * tau.decay((1.0 - f) * t);
    let records = match tau {
        Timescale::Finite(_) => 2.0 * (p[0] * p[1]).sqrt() * tau.decay(alpha * f * t),
        Timescale::Infinite => 2.0 * (p[0] * p[1]).sqrt(),
    };
    Ok(RhsTerms {
        system: binary_entropy((0.5 * epsilon_e).min(1.0))?,
        fraction: 2.0 * binary_entropy(epsilon_fe.min(1.0))? + 4.0 * epsilon_fe,
        records,
        epsilon_e,
        epsilon_fe,
    })
}

/// Least-squares slope of `-ln y` against `t`.
pub fn fitted_decay_rate(ts: &[f64], ys: &[f64]) -> f64 {
    let pts: Vec<(f64, f64)> = ts.iter().zip(ys).filter(|(_, &y)| y > 0.0).map(|(&t, &y)| (t, -y.ln())).collect();
    let n = pts.len() as f64;
    let mt = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let cov: f64 = pts.iter().map(|p| (p.0 - mt) * (p.1 - my)).sum();
    let var: f64 = pts.iter().map(|p| (p.0 - mt).powi(2)).sum();
    cov / var
}
