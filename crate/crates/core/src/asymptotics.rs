//! Closed-form large-box tier: decoherence factor and time, the `eta`
//! parameters, micro/macro overlaps and the two timescales.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qmath::{self, c, CMatrix, DensityMatrix};
use crate::scatter::{PhotonDistribution, ScatteringGeometry, ShellUnitary};

/// A time that may be infinite (no decay at all).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Timescale {
    Finite(f64),
    Infinite,
}

impl Timescale {
    pub fn finite(self) -> Option<f64> {
        match self {
            Timescale::Finite(t) => Some(t),
            Timescale::Infinite => None,
        }
    }

    pub fn is_infinite(self) -> bool {
        matches!(self, Timescale::Infinite)
    }

    /// `exp(-x / tau)`, which is 1 for an infinite timescale.
    pub fn decay(self, x: f64) -> f64 {
        match self {
            Timescale::Finite(tau) => (-x / tau).exp(),
            Timescale::Infinite => 1.0,
        }
    }

    /// `f64::INFINITY` for the infinite case; handy for CSV output.
    pub fn as_f64(self) -> f64 {
        self.finite().unwrap_or(f64::INFINITY)
    }
}

/// Macrofraction partition of `n_t` scattered photons.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MacrofractionSpec {
    pub m: f64,
    pub f: f64,
    pub n_t: f64,
}

impl MacrofractionSpec {
    pub fn new(m: f64, f: f64, n_t: f64) -> Result<Self> {
        if !(m > 0.0 && m <= 1.0) {
            return Err(Error::Domain(format!("macrofraction size m = {m} outside (0, 1]")));
        }
        if !(0.0..=1.0).contains(&f) {
            return Err(Error::Domain(format!("observed fraction f = {f} outside [0, 1]")));
        }
        if !(n_t >= 0.0 && n_t.is_finite()) {
            return Err(Error::Domain(format!("photon count {n_t} must be finite and >= 0")));
        }
        let count = 1.0 / m;
        if (count - count.round()).abs() > 1e-9 * count {
            return Err(Error::Domain(format!("1/m = {count} is not an integer")));
        }
        Ok(Self { m, f, n_t })
    }

    pub fn at_time(m: f64, f: f64, geom: &ScatteringGeometry, t: f64) -> Result<Self> {
        Self::new(m, f, geom.photon_count(t))
    }

    /// Number of macrofractions `M = 1/m`.
    pub fn count(&self) -> usize {
        (1.0 / self.m).round() as usize
    }

    /// Observed macrofractions `f*M`, if integral.
    pub fn observed(&self) -> Result<usize> {
        let fm = self.f * self.count() as f64;
        if (fm - fm.round()).abs() > 1e-9 * fm.max(1.0) {
            return Err(Error::Domain(format!("f*M = {fm} is not an integer")));
        }
        Ok(fm.round() as usize)
    }
}

/// `sum_k p(k) k^6 (3 + 11 cos^2 theta_k)`.
pub fn angular_moment(dist: &PhotonDistribution) -> f64 {
    dist.expect(|n| n.k.powi(6) * (3.0 + 11.0 * n.cos_theta() * n.cos_theta()))
}

/// `kappa = (2 pi / 15) dx^2 at^6 <k^6 (3 + 11 cos^2)>`, so the single-photon
/// decoherence base is `1 - kappa / L^2` and `1/tau_D = (N/V) c kappa`.
pub fn decoherence_coefficient(dist: &PhotonDistribution, geom: &ScatteringGeometry) -> f64 {
    2.0 * PI / 15.0 * geom.displacement.powi(2) * geom.effective_radius().powi(6) * angular_moment(dist)
}

/// Finite-box decoherence factor `[1 - kappa/L^2]^{(1-f) N_t}`.
pub fn decoherence_factor(dist: &PhotonDistribution, geom: &ScatteringGeometry, f: f64, n_t: f64) -> Result<f64> {
    dist.check_soft(geom)?;
    if !(0.0..=1.0).contains(&f) {
        return Err(Error::Domain(format!("fraction f = {f} outside [0, 1]")));
    }
    if !(n_t >= 0.0) {
        return Err(Error::Domain(format!("photon count {n_t} < 0")));
    }
    let x = decoherence_coefficient(dist, geom) / geom.box_edge.powi(2);
    if x > 1.0 {
        return Err(Error::Domain(format!(
            "decoherence base 1 - {x} is negative: box edge too small for the expansion"
        )));
    }
    let exponent = (1.0 - f) * n_t;
    if exponent == 0.0 {
        return Ok(1.0);
    }
    Ok((exponent * (-x).ln_1p()).exp())
}

/// Thermodynamic-limit decoherence factor `exp(-(1-f) t / tau_D)`.
pub fn decoherence_factor_thermo(dist: &PhotonDistribution, geom: &ScatteringGeometry, f: f64, t: f64) -> Result<f64> {
    Ok(decoherence_time(dist, geom)?.decay((1.0 - f) * t))
}

/// Mixed-environment decoherence time `tau_D`.
pub fn decoherence_time(dist: &PhotonDistribution, geom: &ScatteringGeometry) -> Result<Timescale> {
    dist.check_soft(geom)?;
    let rate = geom.density * geom.light_speed * decoherence_coefficient(dist, geom);
    Ok(if rate > 0.0 {
        Timescale::Finite(1.0 / rate)
    } else {
        Timescale::Infinite
    })
}

/// How the exact single-photon overlap was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OverlapMethod {
    /// Per-block perturbative square root solved to machine precision.
    Riccati,
    /// Dense eigen-decomposition fallback.
    Dense,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlphaSource {
    Computed,
    Override,
}

/// Exact overlap `B(rho, U rho U^dagger)` of the scattered single-photon states.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MicroOverlap {
    pub b: f64,
    /// `1 - B`, computed without cancellation.
    pub one_minus_b: f64,
    pub method: OverlapMethod,
}

/// Distinguishing-power summary of one photon distribution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OverlapReport {
    pub eta_bar: f64,
    /// Effective `eta'` defined through the exact micro overlap,
    /// `eta_bar - L^2 (1 - B_micro)`.
    pub eta_prime: f64,
    /// `(eta_bar - eta_prime) / eta_bar` clamped to `[0, 1]`; `None` when
    /// `eta_bar <= 0`.
    pub alpha: Option<f64>,
    pub alpha_raw: Option<f64>,
    pub alpha_source: AlphaSource,
    /// Literal off-diagonal sum `(L^2/2) sum_k sum_{k' != k} p(k) |U_kk'|^2`.
    /// By unitarity it equals `eta_bar` for every distribution.
    pub eta_prime_rowsum: f64,
    pub alpha_rowsum: Option<f64>,
    /// Leading-order estimate of `1 - B_micro` from the off-diagonal amplitudes.
    pub one_minus_b_leading: f64,
    pub b_micro: f64,
    pub one_minus_b_micro: f64,
    pub overlap_method: OverlapMethod,
    pub tau_d: Timescale,
    /// `|eta_bar - 1/(tau_D (N/V) c)| / (1/(tau_D (N/V) c))`.
    pub eta_tau_deviation: Option<f64>,
    pub box_edge: f64,
    /// Photons per unit time, `L^2 (N/V) c`.
    pub photon_rate: f64,
    /// Non-injective `p` on its support (point, isotropic, ...).
    pub degenerate: bool,
    pub flags: Vec<String>,
}

impl OverlapReport {
    /// Replace the computed `alpha` by a model parameter.
    pub fn with_alpha(mut self, alpha: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&alpha) {
            return Err(Error::Domain(format!("alpha = {alpha} outside [0, 1]")));
        }
        self.alpha = Some(alpha);
        self.alpha_source = AlphaSource::Override;
        self.eta_prime = self.eta_bar * (1.0 - alpha);
        Ok(self)
    }

    pub fn alpha_or_zero(&self) -> f64 {
        self.alpha.unwrap_or(0.0)
    }

    pub fn photon_count(&self, t: f64) -> f64 {
        self.photon_rate * t
    }
}

fn delta_block_sq_leading(delta: &CMatrix, p: &[f64]) -> f64 {
    let n = p.len();
    let mut acc = 0.0;
    for i in 0..n {
        for j in 0..n {
            let s = p[i] + p[j];
            if i != j && s > 0.0 {
                acc += delta[(i, j)].norm_sqr() * (p[i] - p[j]).powi(2) / s;
            }
        }
    }
    acc / 4.0
}

/// `-Tr Y` for `(rho + Y)^2 = rho^2 + D` on one elastic block, or `None` when
/// the fixed point does not converge.
fn riccati_block(delta: &CMatrix, p: &[f64]) -> Option<f64> {
    let support: Vec<usize> = (0..p.len()).filter(|&i| p[i] > 0.0).collect();
    let n = support.len();
    if n == 0 {
        return Some(0.0);
    }
    let nb = p.len();
    // C = [rho, delta] restricted to support columns
    let mut comm = CMatrix::zeros(nb, n);
    for l in 0..nb {
        for (jj, &j) in support.iter().enumerate() {
            comm[(l, jj)] = delta[(l, j)] * (p[l] - p[j]);
        }
    }
    // D = sqrt(rho) U^dagger C sqrt(rho) on the support, U = 1 + delta
    let mut u_dag = CMatrix::zeros(n, nb);
    for (ii, &i) in support.iter().enumerate() {
        for l in 0..nb {
            u_dag[(ii, l)] = delta[(l, i)].conj();
        }
        u_dag[(ii, i)] += c(1.0, 0.0);
    }
    let mut d = u_dag * comm;
    let sq: Vec<f64> = support.iter().map(|&i| p[i].sqrt()).collect();
    let ps: Vec<f64> = support.iter().map(|&i| p[i]).collect();
    for i in 0..n {
        for j in 0..n {
            d[(i, j)] *= sq[i] * sq[j];
        }
    }
    let d = qmath::hermitian_part(&d);
    let scale = d.camax();
    if scale == 0.0 {
        return Some(0.0);
    }
    let mut y = CMatrix::zeros(n, n);
    for _ in 0..1000 {
        let rhs = &d - &y * &y;
        let mut next = rhs;
        for i in 0..n {
            for j in 0..n {
                next[(i, j)] /= ps[i] + ps[j];
            }
        }
        let next = qmath::hermitian_part(&next);
        let change = (&next - &y).camax();
        y = next;
        if !change.is_finite() {
            return None;
        }
        if change <= 1e-15 * y.camax() {
            let trace: f64 = (0..n).map(|i| y[(i, i)].re).sum();
            return Some(-trace);
        }
    }
    None
}

/// Exact `B(S_1 rho S_1^dagger, S_2 rho S_2^dagger)` from the relative unitary.
pub fn micro_overlap_exact(u_rel: &ShellUnitary, dist: &PhotonDistribution) -> Result<MicroOverlap> {
    if u_rel.grid() != dist.grid() {
        return Err(Error::DimensionMismatch("unitary and distribution grids differ".into()));
    }
    let mut one_minus = 0.0;
    let mut ok = true;
    let mut offset = 0;
    for delta in u_rel.delta_blocks() {
        let nb = delta.nrows();
        let p = &dist.probs()[offset..offset + nb];
        offset += nb;
        match riccati_block(delta, p) {
            Some(v) => one_minus += v,
            None => {
                ok = false;
                break;
            }
        }
    }
    if ok {
        let one_minus = one_minus.clamp(0.0, 1.0);
        return Ok(MicroOverlap {
            b: 1.0 - one_minus,
            one_minus_b: one_minus,
            method: OverlapMethod::Riccati,
        });
    }
    log::warn!("block square-root iteration did not converge; using the dense overlap");
    let rho = dist.density_matrix();
    let sigma = rho.conjugate_by(&u_rel.to_dense())?;
    let b = dense_overlap(&rho, &sigma)?;
    Ok(MicroOverlap {
        b,
        one_minus_b: 1.0 - b,
        method: OverlapMethod::Dense,
    })
}

fn dense_overlap(a: &DensityMatrix, b: &DensityMatrix) -> Result<f64> {
    qmath::generalized_overlap(a, b)
}

/// `eta_bar`, `eta'`, `alpha` and the consistency check against `tau_D`.
pub fn eta_bars(u_rel: &ShellUnitary, dist: &PhotonDistribution, geom: &ScatteringGeometry) -> Result<OverlapReport> {
    if u_rel.grid() != dist.grid() {
        return Err(Error::DimensionMismatch("unitary and distribution grids differ".into()));
    }
    let l2 = geom.box_edge * geom.box_edge;
    let probs = dist.probs();
    // 1 - |1 + d|^2 = -2 Re d - |d|^2
    let diag_loss: f64 = u_rel
        .delta_diagonal()
        .iter()
        .zip(probs)
        .map(|(d, &p)| p * (-2.0 * d.re - d.norm_sqr()))
        .sum();
    let eta_bar = 0.5 * l2 * diag_loss;
    let rows = u_rel.off_diagonal_row_norms();
    let eta_prime_rowsum = 0.5 * l2 * rows.iter().zip(probs).map(|(r, p)| r * p).sum::<f64>();

    let micro = micro_overlap_exact(u_rel, dist)?;
    let mut offset = 0;
    let mut leading = 0.0;
    for delta in u_rel.delta_blocks() {
        let nb = delta.nrows();
        leading += delta_block_sq_leading(delta, &probs[offset..offset + nb]);
        offset += nb;
    }

    let tau_d = decoherence_time(dist, geom)?;
    let photon_rate = geom.density * geom.light_speed * l2;
    let kappa = decoherence_coefficient(dist, geom);
    let eta_tau_deviation = (kappa > 0.0).then(|| (eta_bar - kappa).abs() / kappa);

    let mut flags = Vec::new();
    let degenerate = dist.is_degenerate();
    if degenerate {
        flags.push("degenerate distribution: alpha taken from the exact overlap".to_string());
    }
    if micro.method == OverlapMethod::Dense {
        flags.push("overlap from dense fallback".to_string());
    }
    let eta_prime = eta_bar - l2 * micro.one_minus_b;
    let (alpha_raw, alpha, alpha_rowsum) = if eta_bar > 0.0 {
        let raw = l2 * micro.one_minus_b / eta_bar;
        if !(-1e-9..=1.0 + 1e-9).contains(&raw) {
            flags.push(format!("alpha {raw} clamped to [0, 1]"));
        }
        (Some(raw), Some(raw.clamp(0.0, 1.0)), Some((eta_bar - eta_prime_rowsum) / eta_bar))
    } else {
        flags.push("eta_bar <= 0: alpha undefined".to_string());
        (None, None, None)
    };
    Ok(OverlapReport {
        eta_bar,
        eta_prime,
        alpha,
        alpha_raw,
        alpha_source: AlphaSource::Computed,
        eta_prime_rowsum,
        alpha_rowsum,
        one_minus_b_leading: leading,
        b_micro: micro.b,
        one_minus_b_micro: micro.one_minus_b,
        overlap_method: micro.method,
        tau_d,
        eta_tau_deviation,
        box_edge: geom.box_edge,
        photon_rate,
        degenerate,
        flags,
    })
}

/// `1 - (eta_bar - eta') / L^2`.
pub fn micro_overlap(report: &OverlapReport, box_edge: f64) -> f64 {
    (1.0 - (report.eta_bar - report.eta_prime) / (box_edge * box_edge)).clamp(0.0, 1.0)
}

/// Macrofraction overlap after time `t`: `(1 - alpha eta_bar / L^2)^{m N_t}`,
/// or `exp(-alpha m t / tau_D)` in the thermodynamic limit.
pub fn macro_overlap(t: f64, m: f64, report: &OverlapReport, thermodynamic: bool) -> Result<f64> {
    if !(t >= 0.0) {
        return Err(Error::Domain(format!("time {t} < 0")));
    }
    let alpha = report.alpha_or_zero();
    if t == 0.0 || alpha == 0.0 {
        return Ok(1.0);
    }
    if thermodynamic {
        return Ok(report.tau_d.decay(alpha * m * t));
    }
    let x = alpha * report.eta_bar / (report.box_edge * report.box_edge);
    if x >= 1.0 {
        return Ok(0.0);
    }
    Ok((m * report.photon_count(t) * (-x).ln_1p()).exp())
}

/// `(tau_D, tau_D / alpha)`: decoherence and broadcast timescales.
pub fn timescales(report: &OverlapReport) -> (Timescale, Timescale) {
    let broadcast = match (report.tau_d, report.alpha) {
        (Timescale::Finite(tau), Some(a)) if a > 0.0 => Timescale::Finite(tau / a),
        _ => Timescale::Infinite,
    };
    (report.tau_d, broadcast)
}

/// Decay rate of `-ln B_macro` per unit `m t` in the thermodynamic limit.
pub fn broadcast_rate(report: &OverlapReport) -> f64 {
    match report.tau_d {
        Timescale::Finite(tau) => report.alpha_or_zero() / tau,
        Timescale::Infinite => 0.0,
    }
}
