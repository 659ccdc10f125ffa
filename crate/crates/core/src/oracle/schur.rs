//! Entropy of `sum_i w_i X_i^{(x) n}` for qubit states `X_i` via the
//! Schur-Weyl decomposition `(C^2)^{(x) n} = (+)_j V_j (x) C^{mult_j}`.
//!
//! On the spin-`j` irrep a Hermitian `X = W diag(x1, x2) W^dagger` with
//! `W` in SU(2) acts as `pi_j(W) diag(x1^{j+m+e} x2^{j-m+e}) pi_j(W)^dagger`
//! with `e = n/2 - j`; `pi_j(W) = exp(-2i v.J)` when `W = exp(-i v.sigma)`.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::qmath::{self, c, CMatrix};

struct QubitDecomp {
    x1: f64,
    x2: f64,
    v: [f64; 3],
}

fn decompose(x: &CMatrix) -> QubitDecomp {
    let (vals, vecs) = qmath::hermitian_eigen(x);
    let (hi, lo) = if vals[0] >= vals[1] { (0, 1) } else { (1, 0) };
    let norm = (vecs[(0, hi)].norm_sqr() + vecs[(1, hi)].norm_sqr()).sqrt();
    let u1 = vecs[(0, hi)] / norm;
    let u2 = vecs[(1, hi)] / norm;
    let s = [-u2.im, u2.re, -u1.im];
    let s_norm = (s[0] * s[0] + s[1] * s[1] + s[2] * s[2]).sqrt();
    let half = s_norm.atan2(u1.re);
    let v = if s_norm > 0.0 {
        s.map(|x| x * half / s_norm)
    } else {
        [0.0; 3]
    };
    QubitDecomp {
        x1: vals[hi].max(0.0),
        x2: vals[lo].max(0.0),
        v,
    }
}

/// `v.J` for spin `k/2` in the basis `m = j, j-1, ..., -j`.
fn spin_generator(k: usize, v: [f64; 3]) -> CMatrix {
    let j = k as f64 / 2.0;
    let mut g = CMatrix::zeros(k + 1, k + 1);
    for l in 0..=k {
        let m = j - l as f64;
        g[(l, l)] = c(v[2] * m, 0.0);
        if l > 0 {
            // <m+1| J_+ |m>
            let a = ((j - m) * (j + m + 1.0)).sqrt();
            // J_x = (J+ + J-)/2, J_y = (J+ - J-)/(2i)
            let up = c(0.5 * a * v[0], -0.5 * a * v[1]);
            g[(l - 1, l)] = up;
            g[(l, l - 1)] = up.conj();
        }
    }
    g
}

fn irrep_block(d: &QubitDecomp, n: usize, k: usize) -> CMatrix {
    let e = ((n - k) / 2) as i32;
    let (vals, q) = qmath::hermitian_eigen(&spin_generator(k, d.v));
    let mut rot = q.clone();
    for (col, &mu) in vals.iter().enumerate() {
        let ph = Complex64::from_polar(1.0, -2.0 * mu);
        for r in 0..=k {
            rot[(r, col)] *= ph;
        }
    }
    let rot = rot * q.adjoint();
    let mut scaled = rot.clone();
    for l in 0..=k {
        let w = d.x1.powi((k - l) as i32 + e) * d.x2.powi(l as i32 + e);
        for r in 0..=k {
            scaled[(r, l)] *= w;
        }
    }
    scaled * rot.adjoint()
}

fn ln_binomial(n: usize, a: usize) -> f64 {
    (1..=a).map(|i| ((n - a + i) as f64 / i as f64).ln()).sum()
}

/// Von Neumann entropy (bits) of `sum_i weights[i] * states[i]^{(x) n}`.
pub(crate) fn qubit_mixture_entropy(weights: &[f64], states: &[CMatrix], n: usize) -> Result<f64> {
    if n == 0 {
        return Ok(0.0);
    }
    let decomps: Vec<QubitDecomp> = states.iter().map(decompose).collect();
    let mut entropy = 0.0;
    let mut total = 0.0;
    let mut k = n;
    loop {
        let a = (n - k) / 2;
        let ln_mult = ln_binomial(n, a) + ((k + 1) as f64 / (n - a + 1) as f64).ln();
        let mut h = CMatrix::zeros(k + 1, k + 1);
        for (w, d) in weights.iter().zip(&decomps) {
            if *w > 0.0 {
                h += irrep_block(d, n, k) * c(*w, 0.0);
            }
        }
        for lam in qmath::hermitian_eigenvalues(&h) {
            if lam > 0.0 {
                let ln_lam = lam.ln();
                let weight = (ln_mult + ln_lam).exp();
                entropy -= weight * ln_lam / std::f64::consts::LN_2;
                total += weight;
            }
        }
        if k < 2 {
            break;
        }
        k -= 2;
    }
    if (total - 1.0).abs() > 1e-8 {
        return Err(Error::InvalidState(format!(
            "irrep decomposition lost trace: total weight {total}"
        )));
    }
    Ok(entropy)
}
