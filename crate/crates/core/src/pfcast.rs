//! Stationary spectra of unistochastic matrices and their faithful
//! broadcasting through the decoherence channel.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::oracle::{self, BroadcastEnsemble};
use crate::qmath::{c, CMatrix, CVector, DensityMatrix};

const ORTHONORMAL_TOL: f64 = 1e-10;
const STATIONARY_TOL: f64 = 1e-10;

/// Column-stochastic matrix acting on column probability vectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StochasticMatrix {
    n: usize,
    entries: Vec<f64>,
}

impl StochasticMatrix {
    /// Row-major entries; columns must sum to one.
    pub fn new(n: usize, entries: Vec<f64>) -> Result<Self> {
        if entries.len() != n * n || n == 0 {
            return Err(Error::Shape(format!("{} entries for a {n}x{n} matrix", entries.len())));
        }
        if let Some(v) = entries.iter().find(|&&v| !(v >= 0.0)) {
            return Err(Error::Domain(format!("negative or NaN entry {v}")));
        }
        let m = Self { n, entries };
        for j in 0..n {
            let s: f64 = (0..n).map(|i| m.get(i, j)).sum();
            if (s - 1.0).abs() > 1e-12 {
                return Err(Error::Domain(format!("column {j} sums to {s}")));
            }
        }
        Ok(m)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.n + j]
    }

    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        (0..self.n).map(|i| (0..self.n).map(|j| self.get(i, j) * v[j]).sum()).collect()
    }

    pub fn apply_transpose(&self, v: &[f64]) -> Vec<f64> {
        (0..self.n).map(|j| (0..self.n).map(|i| self.get(i, j) * v[i]).sum()).collect()
    }

    pub fn is_doubly_stochastic(&self, tol: f64) -> bool {
        (0..self.n).all(|i| ((0..self.n).map(|j| self.get(i, j)).sum::<f64>() - 1.0).abs() <= tol)
    }

    /// `max_i |(P v)_i - v_i|`.
    pub fn fixed_point_residual(&self, v: &[f64]) -> f64 {
        self.apply(v).iter().zip(v).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }

    fn as_matrix(&self) -> nalgebra::DMatrix<f64> {
        nalgebra::DMatrix::from_row_slice(self.n, self.n, &self.entries)
    }
}

fn check_orthonormal(basis: &[CVector], what: &str) -> Result<()> {
    let n = basis.len();
    for (i, v) in basis.iter().enumerate() {
        if v.len() != n {
            return Err(Error::Shape(format!("{what} vector {i} has length {} in a basis of {n}", v.len())));
        }
        for (j, w) in basis.iter().enumerate().skip(i) {
            let ip = v.dotc(w);
            let want = if i == j { 1.0 } else { 0.0 };
            if (ip - c(want, 0.0)).norm() > ORTHONORMAL_TOL {
                return Err(Error::InvalidState(format!("{what} basis not orthonormal at ({i}, {j}): {ip}")));
            }
        }
    }
    Ok(())
}

/// `P_ij = |<phi_i|x_j>|^2`.
pub fn unistochastic_from_bases(phi: &[CVector], pointer: &[CVector]) -> Result<StochasticMatrix> {
    if phi.len() != pointer.len() {
        return Err(Error::DimensionMismatch(format!("{} vs {} basis vectors", phi.len(), pointer.len())));
    }
    check_orthonormal(phi, "phi")?;
    check_orthonormal(pointer, "pointer")?;
    let n = phi.len();
    let mut entries: Vec<f64> = Vec::with_capacity(n * n);
    for p in phi {
        entries.extend(pointer.iter().map(|x| p.dotc(x).norm_sqr()));
    }
    // remove rounding drift so columns sum to one to machine precision
    for j in 0..n {
        let s: f64 = (0..n).map(|i| entries[i * n + j]).sum();
        (0..n).for_each(|i| entries[i * n + j] /= s);
    }
    StochasticMatrix::new(n, entries)
}

pub fn computational_basis(n: usize) -> Vec<CVector> {
    (0..n)
        .map(|i| {
            let mut v = CVector::zeros(n);
            v[i] = c(1.0, 0.0);
            v
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StationaryMethod {
    Eigensolve,
    PowerIteration,
    /// Several independent stationary vectors; the uniform one is returned.
    UniformTieBreak,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stationary {
    pub lambda: Vec<f64>,
    pub method: StationaryMethod,
    pub residual: f64,
}

/// Probability vector with `P lambda = lambda`. When the eigenvalue-one
/// space is degenerate and contains the uniform vector, that vector is
/// returned.
pub fn stationary_distribution(p: &StochasticMatrix) -> Stationary {
    let n = p.dim();
    let uniform = vec![1.0 / n as f64; n];
    let a = p.as_matrix() - nalgebra::DMatrix::<f64>::identity(n, n);
    let svd = a.clone().svd(true, true);
    let scale = svd.singular_values.max().max(1.0);
    let null: Vec<usize> = (0..n).filter(|&k| svd.singular_values[k] <= 1e-10 * scale).collect();
    if null.len() > 1 && p.fixed_point_residual(&uniform) <= STATIONARY_TOL {
        let residual = p.fixed_point_residual(&uniform);
        return Stationary { lambda: uniform, method: StationaryMethod::UniformTieBreak, residual };
    }
    if null.len() == 1 {
        if let Some(vt) = svd.v_t.as_ref() {
            let row = vt.row(null[0]);
            let total: f64 = row.iter().sum();
            if total.abs() > 1e-300 {
                let lambda: Vec<f64> = row.iter().map(|v| (v / total).max(0.0)).collect();
                let norm: f64 = lambda.iter().sum();
                let lambda: Vec<f64> = lambda.iter().map(|v| v / norm).collect();
                let residual = p.fixed_point_residual(&lambda);
                if residual <= STATIONARY_TOL {
                    return Stationary { lambda, method: StationaryMethod::Eigensolve, residual };
                }
            }
        }
    }
    // Cesaro-averaged power iteration also converges for periodic chains
    let mut v = uniform.clone();
    let mut avg = uniform;
    for k in 1..=100_000usize {
        v = p.apply(&v);
        avg.iter_mut().zip(&v).for_each(|(a, x)| *a += (x - *a) / (k as f64 + 1.0));
        if k % 64 == 0 && p.fixed_point_residual(&v) <= 1e-14 {
            avg = v.clone();
            break;
        }
    }
    let residual = p.fixed_point_residual(&avg);
    Stationary { lambda: avg, method: StationaryMethod::PowerIteration, residual }
}

/// `sum_i lambda_i |phi_i><phi_i|`.
pub fn spectral_state(phi: &[CVector], lambda: &[f64]) -> Result<DensityMatrix> {
    if phi.len() != lambda.len() || phi.is_empty() {
        return Err(Error::DimensionMismatch("basis vs spectrum length".into()));
    }
    let n = phi[0].len();
    let mut m = CMatrix::zeros(n, n);
    for (v, &l) in phi.iter().zip(lambda) {
        m += v * v.adjoint() * c(l, 0.0);
    }
    DensityMatrix::new(m)
}

#[derive(Debug, Clone, Serialize)]
pub struct PfReport {
    pub lambda: Vec<f64>,
    pub pointer_probs: Vec<f64>,
    pub max_deviation: f64,
    pub stationary_residual: f64,
    pub copies: usize,
    pub max_overlap: f64,
    pub orthogonal: bool,
}

/// Prepares `sum lambda_i |phi_i><phi_i|`, pushes it through `channel` and
/// compares the broadcast pointer spectrum with `lambda`. Pointer basis is
/// the computational basis.
pub fn verify_pf_broadcast<F>(phi: &[CVector], lambda: &[f64], channel: F) -> Result<PfReport>
where
    F: Fn(&DensityMatrix) -> Result<BroadcastEnsemble>,
{
    let p = unistochastic_from_bases(phi, &computational_basis(phi.len()))?;
    let stationary_residual = p.fixed_point_residual(lambda);
    if stationary_residual > STATIONARY_TOL {
        return Err(Error::Domain(format!("spectrum is not stationary: residual {stationary_residual:e}")));
    }
    let ensemble = channel(&spectral_state(phi, lambda)?)?;
    let max_deviation = ensemble.probs.iter().zip(lambda).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    Ok(PfReport {
        lambda: lambda.to_vec(),
        pointer_probs: ensemble.probs.clone(),
        max_deviation,
        stationary_residual,
        copies: ensemble.copies,
        max_overlap: ensemble.max_overlap,
        orthogonal: ensemble.orthogonal,
    })
}

/// Channel that runs the full oracle evolution for the given scattering
/// setup and returns the broadcast ensemble of its records.
pub fn oracle_channel<'a>(
    env: &'a DensityMatrix,
    s1: &'a CMatrix,
    s2: &'a CMatrix,
    n_t: usize,
    f: f64,
    m: f64,
    caps: oracle::OracleCaps,
) -> impl Fn(&DensityMatrix) -> Result<BroadcastEnsemble> + 'a {
    move |rho: &DensityMatrix| {
        let state = oracle::evolve_out_state(rho, env, s1, s2, n_t, f, m, caps)?;
        let channel = oracle::CcChannel::from_out_state(&state)?;
        let mut ens = oracle::cc_channel_apply(rho, &channel)?;
        ens.probs = state.pointer_probs().to_vec();
        Ok(ens)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qmath::random;
    use approx::assert_abs_diff_eq;

    fn hadamard_basis() -> Vec<CVector> {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        vec![CVector::from_vec(vec![c(s, 0.0), c(s, 0.0)]), CVector::from_vec(vec![c(s, 0.0), c(-s, 0.0)])]
    }

    fn random_basis(seed: u64, n: usize) -> Vec<CVector> {
        let u = random::random_unitary(&mut random::seeded(seed), n);
        (0..n).map(|k| u.column(k).into_owned()).collect()
    }

    #[test]
    fn unistochastic_examples() {
        let id = unistochastic_from_bases(&computational_basis(3), &computational_basis(3)).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(id.get(i, j), if i == j { 1.0 } else { 0.0 });
            }
        }
        let h = unistochastic_from_bases(&hadamard_basis(), &computational_basis(2)).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                assert_abs_diff_eq!(h.get(i, j), 0.5, epsilon = 1e-15);
            }
        }
        for seed in 0..10 {
            let p = unistochastic_from_bases(&random_basis(seed, 2), &computational_basis(2)).unwrap();
            assert!(p.is_doubly_stochastic(1e-12));
        }
        let bad = vec![CVector::from_vec(vec![c(1.0, 0.0), c(0.0, 0.0)]); 2];
        assert!(unistochastic_from_bases(&bad, &computational_basis(2)).is_err());
    }

    #[test]
    fn stationary_examples() {
        let id = StochasticMatrix::new(2, vec![1.0, 0.0, 0.0, 1.0]).unwrap();
        let s = stationary_distribution(&id);
        assert_eq!(s.lambda, vec![0.5, 0.5]);
        assert_eq!(s.method, StationaryMethod::UniformTieBreak);

        let p = StochasticMatrix::new(2, vec![0.9, 0.1, 0.1, 0.9]).unwrap();
        let s = stationary_distribution(&p);
        assert_abs_diff_eq!(s.lambda[0], 0.5, epsilon = 1e-12);
        assert_eq!(s.method, StationaryMethod::Eigensolve);

        for seed in 0..10 {
            let p = unistochastic_from_bases(&random_basis(seed, 4), &computational_basis(4)).unwrap();
            let s = stationary_distribution(&p);
            assert!(s.residual <= 1e-10);
            s.lambda.iter().for_each(|&l| assert_abs_diff_eq!(l, 0.25, epsilon = 1e-10));
        }

        // non-doubly-stochastic chain with a non-uniform fixed point
        let p = StochasticMatrix::new(2, vec![0.7, 0.2, 0.3, 0.8]).unwrap();
        let s = stationary_distribution(&p);
        assert_abs_diff_eq!(s.lambda[0], 0.4, epsilon = 1e-12);

        // periodic chain: eigenvalue -1 present, still unique fixed point
        let swap = StochasticMatrix::new(2, vec![0.0, 1.0, 1.0, 0.0]).unwrap();
        assert_abs_diff_eq!(stationary_distribution(&swap).lambda[1], 0.5, epsilon = 1e-12);
    }

    #[test]
    fn broadcast_examples() {
        let env = DensityMatrix::diagonal(&[0.999, 0.001]).unwrap();
        let s1 = CMatrix::identity(2, 2);
        let th = 0.475 * std::f64::consts::PI;
        let s2 = CMatrix::from_row_slice(2, 2, &[c(th.cos(), 0.0), c(-th.sin(), 0.0), c(th.sin(), 0.0), c(th.cos(), 0.0)]);
        let channel = oracle_channel(&env, &s1, &s2, 24, 0.5, 0.25, oracle::OracleCaps::default());

        let r = verify_pf_broadcast(&computational_basis(2), &[0.3, 0.7], &channel).unwrap();
        assert_abs_diff_eq!(r.pointer_probs[0], 0.3, epsilon = 1e-15);
        assert!(r.orthogonal);

        let r = verify_pf_broadcast(&hadamard_basis(), &[0.5, 0.5], &channel).unwrap();
        assert!(r.max_deviation < 1e-10);

        for seed in 0..5 {
            let phi = random_basis(100 + seed, 2);
            let p = unistochastic_from_bases(&phi, &computational_basis(2)).unwrap();
            let s = stationary_distribution(&p);
            let r = verify_pf_broadcast(&phi, &s.lambda, &channel).unwrap();
            assert!(r.max_deviation < 1e-10);
        }

        assert!(verify_pf_broadcast(&hadamard_basis(), &[0.3, 0.7], &channel).is_err());
    }
}
