//! Dense complex-matrix kernel and quantum-information measures.
//!
//! Everything is a pure function of its inputs. Entropies are in bits.
//! Eigenvalues in `[-EIGEN_TOL, 0]` are treated as numerical noise and
//! clamped to zero; anything more negative is rejected.

pub mod random;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;
/// A general (possibly non-Hermitian) square operator.
pub type Operator = CMatrix;

/// Slack for Hermiticity, trace and positivity checks.
pub const EIGEN_TOL: f64 = 1e-9;

pub(crate) fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn ensure_square(m: &CMatrix, what: &str) -> Result<()> {
    if m.nrows() != m.ncols() {
        return Err(Error::Shape(format!(
            "{what} must be square, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    Ok(())
}

/// `(M + M^dagger) / 2`.
pub fn hermitian_part(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()) * c(0.5, 0.0)
}

/// Eigenvalues of the Hermitian part of `m`, ascending.
pub fn hermitian_eigenvalues(m: &CMatrix) -> Vec<f64> {
    let mut ev: Vec<f64> = hermitian_part(m).symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev
}

/// Eigen-decomposition of the Hermitian part of `m`.
pub fn hermitian_eigen(m: &CMatrix) -> (Vec<f64>, CMatrix) {
    let eig = SymmetricEigen::new(hermitian_part(m));
    (eig.eigenvalues.iter().copied().collect(), eig.eigenvectors)
}

/// Rebuild `V diag(f(lambda)) V^dagger`.
pub(crate) fn spectral_map(values: &[f64], vectors: &CMatrix, f: impl Fn(f64) -> f64) -> CMatrix {
    let mut scaled = vectors.clone();
    for (j, &v) in values.iter().enumerate() {
        let s = f(v);
        scaled.column_mut(j).scale_mut(s);
    }
    scaled * vectors.adjoint()
}

/// Sum of singular values.
pub fn trace_norm(m: &Operator) -> Result<f64> {
    ensure_square(m, "trace_norm input")?;
    if m.is_empty() {
        return Ok(0.0);
    }
    Ok(m.singular_values().iter().sum())
}

/// Trace norm of a matrix known to be Hermitian: sum of absolute eigenvalues.
pub fn hermitian_trace_norm(m: &CMatrix) -> f64 {
    hermitian_eigenvalues(m).iter().map(|v| v.abs()).sum()
}

/// Kronecker product `a (x) b`.
pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.kronecker(b)
}

/// `a^{(x) n}`; the 1x1 identity for `n = 0`.
pub fn kron_power(a: &CMatrix, n: usize) -> CMatrix {
    let mut out = CMatrix::identity(1, 1);
    for _ in 0..n {
        out = out.kronecker(a);
    }
    out
}

/// Shannon entropy in bits of a probability vector; zero entries contribute 0.
pub fn shannon_entropy(probs: &[f64]) -> f64 {
    probs
        .iter()
        .filter(|&&p| p > 0.0)
        .map(|&p| -p * p.log2())
        .sum()
}

/// Entropy in bits of a spectrum, clamping values in `[-tol, 0]`.
pub fn spectrum_entropy(values: &[f64], tol: f64) -> Result<f64> {
    let mut s = 0.0;
    for &v in values {
        if v < -tol {
            return Err(Error::InvalidState(format!(
                "eigenvalue {v:e} below -{tol:e}"
            )));
        }
        if v > 0.0 {
            s -= v * v.log2();
        }
    }
    Ok(s)
}

/// A validated density matrix: Hermitian, unit trace, positive within tolerance.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    entries: CMatrix,
    tolerance: f64,
}

impl DensityMatrix {
    pub fn new(entries: CMatrix) -> Result<Self> {
        Self::with_tolerance(entries, EIGEN_TOL)
    }

    pub fn with_tolerance(entries: CMatrix, tolerance: f64) -> Result<Self> {
        ensure_square(&entries, "density matrix")?;
        let d = entries.nrows();
        if d == 0 {
            return Err(Error::Shape("density matrix must have dim >= 1".into()));
        }
        if entries.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::InvalidState("non-finite entry".into()));
        }
        let herm_err = (&entries - entries.adjoint()).camax();
        if herm_err > tolerance {
            return Err(Error::InvalidState(format!(
                "not Hermitian: max |M - M^dagger| = {herm_err:e}"
            )));
        }
        let tr = entries.trace();
        if (tr.re - 1.0).abs() > tolerance || tr.im.abs() > tolerance {
            return Err(Error::InvalidState(format!("trace {tr} differs from 1")));
        }
        let entries = hermitian_part(&entries);
        let min_eig = hermitian_eigenvalues(&entries)[0];
        if min_eig < -tolerance {
            return Err(Error::InvalidState(format!(
                "negative eigenvalue {min_eig:e}"
            )));
        }
        Ok(Self { entries, tolerance })
    }

    /// Wrap a matrix that is a density matrix by construction (no eigensolve).
    pub(crate) fn from_trusted(entries: CMatrix) -> Self {
        debug_assert_eq!(entries.nrows(), entries.ncols());
        Self {
            entries: hermitian_part(&entries),
            tolerance: EIGEN_TOL,
        }
    }

    /// `|psi><psi|` for the normalized `psi`.
    pub fn pure(psi: &CVector) -> Result<Self> {
        let n = psi.norm();
        if n == 0.0 || !n.is_finite() {
            return Err(Error::InvalidState("zero or non-finite state vector".into()));
        }
        let psi = psi / c(n, 0.0);
        Ok(Self::from_trusted(&psi * psi.adjoint()))
    }

    /// Diagonal state from a probability vector.
    pub fn diagonal(probs: &[f64]) -> Result<Self> {
        if probs.iter().any(|&p| p < 0.0 || !p.is_finite()) {
            return Err(Error::InvalidState("negative or non-finite probability".into()));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > EIGEN_TOL {
            return Err(Error::InvalidState(format!("probabilities sum to {total}")));
        }
        let diag = DVector::from_iterator(probs.len(), probs.iter().map(|&p| c(p, 0.0)));
        Ok(Self::from_trusted(CMatrix::from_diagonal(&diag)))
    }

    pub fn maximally_mixed(dim: usize) -> Self {
        Self::from_trusted(CMatrix::identity(dim, dim) * c(1.0 / dim as f64, 0.0))
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn tolerance(&self) -> f64 {
        self.tolerance
    }

    pub fn entries(&self) -> &CMatrix {
        &self.entries
    }

    pub fn into_inner(self) -> CMatrix {
        self.entries
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        hermitian_eigenvalues(&self.entries)
    }

    pub fn tensor(&self, other: &DensityMatrix) -> DensityMatrix {
        Self::from_trusted(kron(&self.entries, &other.entries))
    }

    /// `U rho U^dagger`.
    pub fn conjugate_by(&self, u: &CMatrix) -> Result<DensityMatrix> {
        if u.nrows() != self.dim() || u.ncols() != self.dim() {
            return Err(Error::DimensionMismatch(format!(
                "unitary is {}x{}, state has dim {}",
                u.nrows(),
                u.ncols(),
                self.dim()
            )));
        }
        Ok(Self::from_trusted(u * &self.entries * u.adjoint()))
    }

    /// Positive square root via the Hermitian eigendecomposition.
    pub fn sqrt(&self) -> Result<CMatrix> {
        let (vals, vecs) = hermitian_eigen(&self.entries);
        let max = vals.iter().copied().fold(0.0_f64, f64::max);
        // eigenvalues below the numerical rank threshold are exact zeros
        let cut = (self.dim() as f64) * f64::EPSILON * max;
        for &v in &vals {
            if v < -self.tolerance {
                return Err(Error::InvalidState(format!("negative eigenvalue {v:e}")));
            }
        }
        Ok(spectral_map(&vals, &vecs, |v| if v > cut { v.sqrt() } else { 0.0 }))
    }
}

/// Generalized overlap (Bhattacharyya coefficient / root fidelity)
/// `B = Tr sqrt(sqrt(rho1) rho2 sqrt(rho1)) = || sqrt(rho1) sqrt(rho2) ||_1`.
pub fn generalized_overlap(rho1: &DensityMatrix, rho2: &DensityMatrix) -> Result<f64> {
    if rho1.dim() != rho2.dim() {
        return Err(Error::DimensionMismatch(format!(
            "overlap of dim {} and {}",
            rho1.dim(),
            rho2.dim()
        )));
    }
    let prod = rho1.sqrt()? * rho2.sqrt()?;
    let b: f64 = prod.singular_values().iter().sum();
    Ok(b.clamp(0.0, 1.0))
}

/// Partial trace of an arbitrary square operator over the complement of `keep`.
pub fn partial_trace_operator(m: &CMatrix, dims: &[usize], keep: &[usize]) -> Result<CMatrix> {
    ensure_square(m, "partial trace input")?;
    let total: usize = dims.iter().product();
    if dims.is_empty() || total != m.nrows() {
        return Err(Error::DimensionMismatch(format!(
            "subsystem dims {dims:?} (product {total}) vs matrix dim {}",
            m.nrows()
        )));
    }
    let mut keep_sorted = keep.to_vec();
    keep_sorted.sort_unstable();
    keep_sorted.dedup();
    if keep_sorted.len() != keep.len() || keep_sorted.iter().any(|&k| k >= dims.len()) {
        return Err(Error::DimensionMismatch(format!(
            "keep set {keep:?} invalid for {} subsystems",
            dims.len()
        )));
    }
    let kept_dim: usize = keep_sorted.iter().map(|&k| dims[k]).product();
    let traced_dim = total / kept_dim;

    // split every full index into (kept, traced) mixed-radix parts
    let mut buckets: Vec<Vec<(usize, usize)>> = vec![Vec::with_capacity(kept_dim); traced_dim];
    for full in 0..total {
        let mut rem = full;
        let mut kept_idx = 0;
        let mut traced_idx = 0;
        let mut kept_stride = 1;
        let mut traced_stride = 1;
        for (s, &d) in dims.iter().enumerate().rev() {
            let digit = rem % d;
            rem /= d;
            if keep_sorted.binary_search(&s).is_ok() {
                kept_idx += digit * kept_stride;
                kept_stride *= d;
            } else {
                traced_idx += digit * traced_stride;
                traced_stride *= d;
            }
        }
        buckets[traced_idx].push((kept_idx, full));
    }
    let mut out = CMatrix::zeros(kept_dim, kept_dim);
    for bucket in &buckets {
        for &(a, i) in bucket {
            for &(b, j) in bucket {
                out[(a, b)] += m[(i, j)];
            }
        }
    }
    Ok(out)
}

/// Reduced state on the subsystems listed in `keep`.
pub fn partial_trace(rho: &DensityMatrix, dims: &[usize], keep: &[usize]) -> Result<DensityMatrix> {
    let reduced = partial_trace_operator(rho.entries(), dims, keep)?;
    Ok(DensityMatrix::from_trusted(reduced))
}

/// `-sum lambda log2 lambda`.
pub fn von_neumann_entropy(rho: &DensityMatrix) -> Result<f64> {
    spectrum_entropy(&rho.eigenvalues(), rho.tolerance())
}

/// `S(A) + S(B) - S(AB)` in bits.
pub fn mutual_information(rho_ab: &DensityMatrix, dim_a: usize, dim_b: usize) -> Result<f64> {
    if dim_a * dim_b != rho_ab.dim() {
        return Err(Error::DimensionMismatch(format!(
            "{dim_a} x {dim_b} != {}",
            rho_ab.dim()
        )));
    }
    let dims = [dim_a, dim_b];
    let s_a = von_neumann_entropy(&partial_trace(rho_ab, &dims, &[0])?)?;
    let s_b = von_neumann_entropy(&partial_trace(rho_ab, &dims, &[1])?)?;
    let s_ab = von_neumann_entropy(rho_ab)?;
    Ok(s_a + s_b - s_ab)
}

/// Holevo quantity `S(sum p_i rho_i) - sum p_i S(rho_i)` in bits.
pub fn holevo_chi(probs: &[f64], states: &[DensityMatrix]) -> Result<f64> {
    if probs.len() != states.len() || probs.is_empty() {
        return Err(Error::DimensionMismatch(format!(
            "{} probabilities for {} states",
            probs.len(),
            states.len()
        )));
    }
    let total: f64 = probs.iter().sum();
    if probs.iter().any(|&p| p < 0.0) || (total - 1.0).abs() > EIGEN_TOL {
        return Err(Error::InvalidState(format!(
            "ensemble probabilities not normalized (sum {total})"
        )));
    }
    let d = states[0].dim();
    if states.iter().any(|s| s.dim() != d) {
        return Err(Error::DimensionMismatch("ensemble states differ in dim".into()));
    }
    let mut avg = CMatrix::zeros(d, d);
    let mut conditional = 0.0;
    for (&p, s) in probs.iter().zip(states) {
        avg += s.entries() * c(p, 0.0);
        if p > 0.0 {
            conditional += p * von_neumann_entropy(s)?;
        }
    }
    let s_avg = von_neumann_entropy(&DensityMatrix::from_trusted(avg))?;
    Ok(s_avg - conditional)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn qubit(a: Complex64, b: Complex64) -> CVector {
        CVector::from_vec(vec![a, b])
    }

    #[test]
    fn trace_norm_trivial_cases() {
        let id = CMatrix::identity(2, 2);
        assert_abs_diff_eq!(trace_norm(&id).unwrap(), 2.0, epsilon = 1e-14);
        let z = CMatrix::from_diagonal(&CVector::from_vec(vec![c(1.0, 0.0), c(-1.0, 0.0)]));
        assert_abs_diff_eq!(trace_norm(&z).unwrap(), 2.0, epsilon = 1e-14);
    }

    #[test]
    fn trace_norm_rejects_non_square() {
        let m = CMatrix::zeros(2, 3);
        assert!(matches!(trace_norm(&m), Err(Error::Shape(_))));
    }

    #[test]
    fn overlap_of_identical_and_orthogonal_states() {
        let rho = DensityMatrix::diagonal(&[0.3, 0.7]).unwrap();
        assert_abs_diff_eq!(generalized_overlap(&rho, &rho).unwrap(), 1.0, epsilon = 1e-12);
        let up = DensityMatrix::pure(&qubit(c(1.0, 0.0), c(0.0, 0.0))).unwrap();
        let down = DensityMatrix::pure(&qubit(c(0.0, 0.0), c(1.0, 0.0))).unwrap();
        assert_abs_diff_eq!(generalized_overlap(&up, &down).unwrap(), 0.0, epsilon = 1e-14);
    }

    #[test]
    fn overlap_of_pure_states_is_amplitude_modulus() {
        let a = qubit(c(0.6, 0.0), c(0.0, 0.8));
        let b = qubit(c(0.28, 0.96), c(0.0, 0.0));
        let expected = a.dotc(&b).norm();
        let b_ov = generalized_overlap(&DensityMatrix::pure(&a).unwrap(), &DensityMatrix::pure(&b).unwrap()).unwrap();
        assert_abs_diff_eq!(b_ov, expected, epsilon = 1e-10);
    }

    #[test]
    fn overlap_dimension_mismatch() {
        let a = DensityMatrix::maximally_mixed(2);
        let b = DensityMatrix::maximally_mixed(3);
        assert!(matches!(generalized_overlap(&a, &b), Err(Error::DimensionMismatch(_))));
    }

    #[test]
    fn density_validation_rejects_bad_input() {
        let neg = CMatrix::from_diagonal(&CVector::from_vec(vec![c(1.5, 0.0), c(-0.5, 0.0)]));
        assert!(DensityMatrix::new(neg).is_err());
        let mut nh = CMatrix::identity(2, 2) * c(0.5, 0.0);
        nh[(0, 1)] = c(0.1, 0.0);
        assert!(DensityMatrix::new(nh).is_err());
        let tr = CMatrix::identity(2, 2);
        assert!(DensityMatrix::new(tr).is_err());
    }

    #[test]
    fn partial_trace_of_product_and_bell() {
        let a = DensityMatrix::diagonal(&[0.2, 0.8]).unwrap();
        let b = DensityMatrix::maximally_mixed(3);
        let ab = a.tensor(&b);
        let red = partial_trace(&ab, &[2, 3], &[0]).unwrap();
        assert_abs_diff_eq!((red.entries() - a.entries()).camax(), 0.0, epsilon = 1e-14);

        let s = 1.0 / 2f64.sqrt();
        let bell = CVector::from_vec(vec![c(s, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(s, 0.0)]);
        let bell = DensityMatrix::pure(&bell).unwrap();
        for keep in [0, 1] {
            let red = partial_trace(&bell, &[2, 2], &[keep]).unwrap();
            let half = DensityMatrix::maximally_mixed(2);
            assert_abs_diff_eq!((red.entries() - half.entries()).camax(), 0.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn partial_trace_inconsistent_dims() {
        let rho = DensityMatrix::maximally_mixed(4);
        assert!(partial_trace(&rho, &[2, 3], &[0]).is_err());
        assert!(partial_trace(&rho, &[2, 2], &[2]).is_err());
    }

    #[test]
    fn entropy_values() {
        let pure = DensityMatrix::pure(&qubit(c(0.6, 0.0), c(0.8, 0.0))).unwrap();
        assert_abs_diff_eq!(von_neumann_entropy(&pure).unwrap(), 0.0, epsilon = 1e-12);
        for d in [2, 3, 5] {
            let mm = DensityMatrix::maximally_mixed(d);
            assert_abs_diff_eq!(von_neumann_entropy(&mm).unwrap(), (d as f64).log2(), epsilon = 1e-12);
        }
        // h(0.25) evaluated as a scalar
        let h = -0.25 * 0.25f64.log2() - 0.75 * 0.75f64.log2();
        let rho = DensityMatrix::diagonal(&[0.25, 0.75]).unwrap();
        assert_abs_diff_eq!(von_neumann_entropy(&rho).unwrap(), h, epsilon = 1e-12);
        assert_abs_diff_eq!(h, 0.811278124459133, epsilon = 1e-12);
    }

    #[test]
    fn entropy_rejects_negative_spectrum() {
        assert!(spectrum_entropy(&[1.1, -0.1], EIGEN_TOL).is_err());
        assert_abs_diff_eq!(spectrum_entropy(&[1.0, -1e-12], EIGEN_TOL).unwrap(), 0.0);
    }

    #[test]
    fn mutual_information_examples() {
        let prod = DensityMatrix::diagonal(&[0.3, 0.7])
            .unwrap()
            .tensor(&DensityMatrix::diagonal(&[0.5, 0.5]).unwrap());
        assert_abs_diff_eq!(mutual_information(&prod, 2, 2).unwrap(), 0.0, epsilon = 1e-12);

        let s = 1.0 / 2f64.sqrt();
        let bell = CVector::from_vec(vec![c(s, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(s, 0.0)]);
        let bell = DensityMatrix::pure(&bell).unwrap();
        assert_abs_diff_eq!(mutual_information(&bell, 2, 2).unwrap(), 2.0, epsilon = 1e-12);

        // classical joint distribution {00: 1/2, 11: 1/2}: H(A) + H(B) - H(AB) = 1
        let classical = DensityMatrix::diagonal(&[0.5, 0.0, 0.0, 0.5]).unwrap();
        let joint = [0.5, 0.0, 0.0, 0.5];
        let expected = shannon_entropy(&[0.5, 0.5]) * 2.0 - shannon_entropy(&joint);
        assert_abs_diff_eq!(mutual_information(&classical, 2, 2).unwrap(), expected, epsilon = 1e-12);
        assert_abs_diff_eq!(expected, 1.0, epsilon = 1e-15);

        assert!(mutual_information(&classical, 2, 3).is_err());
    }

    #[test]
    fn holevo_examples() {
        let rho = DensityMatrix::diagonal(&[0.4, 0.6]).unwrap();
        let chi = holevo_chi(&[0.3, 0.7], &[rho.clone(), rho.clone()]).unwrap();
        assert_abs_diff_eq!(chi, 0.0, epsilon = 1e-12);

        let a = DensityMatrix::diagonal(&[0.5, 0.5, 0.0, 0.0]).unwrap();
        let b = DensityMatrix::diagonal(&[0.0, 0.0, 0.2, 0.8]).unwrap();
        let chi = holevo_chi(&[0.3, 0.7], &[a, b]).unwrap();
        assert_abs_diff_eq!(chi, shannon_entropy(&[0.3, 0.7]), epsilon = 1e-12);

        // pure qubit states at overlap cos(theta): closed-form 2x2 eigenvalues
        let theta: f64 = 0.7;
        let psi1 = qubit(c(1.0, 0.0), c(0.0, 0.0));
        let psi2 = qubit(c(theta.cos(), 0.0), c(theta.sin(), 0.0));
        let chi = holevo_chi(
            &[0.5, 0.5],
            &[DensityMatrix::pure(&psi1).unwrap(), DensityMatrix::pure(&psi2).unwrap()],
        )
        .unwrap();
        let lp = (1.0 + theta.cos()) / 2.0;
        let expected = shannon_entropy(&[lp, 1.0 - lp]);
        assert_abs_diff_eq!(chi, expected, epsilon = 1e-12);

        assert!(holevo_chi(&[1.0], &[]).is_err());
    }
}
