//! Discretized momentum-shell model of the photon environment.
//!
//! Photons are scalar plane waves on a finite set of momentum nodes grouped
//! into shells of equal `|k|`. Scattering is elastic, so every shell unitary
//! is block diagonal with one block per shell. The displacement `dx` of the
//! sphere points along `+z`, hence `cos(theta)` of a node is its `z`
//! component.

use std::f64::consts::PI;
use std::path::Path;

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qmath::{c, random, CMatrix, CVector, DensityMatrix};

/// `k*dx` above which a warning is logged.
pub const SOFT_WARN: f64 = 0.1;
/// `k*dx` above which the soft-scattering expansion is refused.
pub const SOFT_HARD: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScatteringGeometry {
    /// Sphere radius `a`.
    pub radius: f64,
    /// Relative permittivity `epsilon`.
    pub permittivity: f64,
    /// Separation `dx` of the two sphere locations.
    pub displacement: f64,
    /// Edge `L` of the quantization box.
    pub box_edge: f64,
    /// Photon number density `N/V`.
    pub density: f64,
    /// Speed of light `c`.
    pub light_speed: f64,
}

impl ScatteringGeometry {
    pub fn new(
        radius: f64,
        permittivity: f64,
        displacement: f64,
        box_edge: f64,
        density: f64,
        light_speed: f64,
    ) -> Result<Self> {
        let g = Self {
            radius,
            permittivity,
            displacement,
            box_edge,
            density,
            light_speed,
        };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("radius", self.radius),
            ("permittivity", self.permittivity),
            ("box_edge", self.box_edge),
            ("density", self.density),
            ("light_speed", self.light_speed),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::config(format!("geometry.{name}"), format!("must be positive, got {v}")));
            }
        }
        if !(self.displacement >= 0.0 && self.displacement.is_finite()) {
            return Err(Error::config(
                "geometry.displacement",
                format!("must be >= 0, got {}", self.displacement),
            ));
        }
        Ok(())
    }

    /// `a * cbrt((eps - 1) / (eps + 2))`.
    pub fn effective_radius(&self) -> f64 {
        self.radius * ((self.permittivity - 1.0) / (self.permittivity + 2.0)).cbrt()
    }

    /// Number of photons scattered up to time `t`: `L^2 (N/V) c t`.
    pub fn photon_count(&self, t: f64) -> f64 {
        self.box_edge * self.box_edge * self.density * self.light_speed * t
    }

    pub fn with_box_edge(&self, box_edge: f64) -> Self {
        Self { box_edge, ..*self }
    }

    pub fn with_displacement(&self, displacement: f64) -> Self {
        Self { displacement, ..*self }
    }
}

/// Directions sharing one wavenumber magnitude.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Shell {
    pub k: f64,
    pub directions: Vec<[f64; 3]>,
}

impl Shell {
    /// Degeneracy `Omega_k`.
    pub fn degeneracy(&self) -> usize {
        self.directions.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Node {
    pub shell: usize,
    pub k: f64,
    pub direction: [f64; 3],
}

impl Node {
    pub fn cos_theta(&self) -> f64 {
        self.direction[2]
    }

    pub fn momentum(&self) -> [f64; 3] {
        self.direction.map(|x| x * self.k)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShellGrid {
    shells: Vec<Shell>,
}

impl ShellGrid {
    pub fn new(shells: Vec<Shell>) -> Result<Self> {
        if shells.is_empty() {
            return Err(Error::Domain("shell grid has no shells".into()));
        }
        for (s, shell) in shells.iter().enumerate() {
            if !(shell.k > 0.0 && shell.k.is_finite()) {
                return Err(Error::Domain(format!("shell {s}: wavenumber {} not positive", shell.k)));
            }
            if shell.directions.is_empty() {
                return Err(Error::Domain(format!("shell {s} has no directions")));
            }
            for d in &shell.directions {
                let n = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt();
                if (n - 1.0).abs() > 1e-12 {
                    return Err(Error::Domain(format!("shell {s}: direction {d:?} not unit (|n| = {n})")));
                }
            }
        }
        Ok(Self { shells })
    }

    /// The same angular set on every wavenumber.
    pub fn uniform(ks: &[f64], directions: &[[f64; 3]]) -> Result<Self> {
        Self::new(
            ks.iter()
                .map(|&k| Shell {
                    k,
                    directions: directions.to_vec(),
                })
                .collect(),
        )
    }

    pub fn shells(&self) -> &[Shell] {
        &self.shells
    }

    pub fn len(&self) -> usize {
        self.shells.iter().map(Shell::degeneracy).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Global index of the first node of each shell.
    pub fn offsets(&self) -> Vec<usize> {
        let mut acc = 0;
        self.shells
            .iter()
            .map(|s| {
                let o = acc;
                acc += s.degeneracy();
                o
            })
            .collect()
    }

    pub fn nodes(&self) -> impl Iterator<Item = Node> + '_ {
        self.shells.iter().enumerate().flat_map(|(s, shell)| {
            shell.directions.iter().map(move |&direction| Node {
                shell: s,
                k: shell.k,
                direction,
            })
        })
    }

    pub fn node(&self, index: usize) -> Option<Node> {
        self.nodes().nth(index)
    }

    pub fn max_k(&self) -> f64 {
        self.shells.iter().map(|s| s.k).fold(0.0, f64::max)
    }
}

/// Angular discretization of one shell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum AngularGrid {
    /// Equal-area bands in `cos(theta)` times uniform azimuth. Every node
    /// carries the same solid angle; band nodes sit at the band's RMS
    /// `cos(theta)`, which makes the uniform node average of `cos^2` exactly 1/3.
    EqualArea { n_cos: usize, n_phi: usize },
    /// The 26 nearest-neighbour directions of a cubic lattice.
    Cube26,
}

impl Default for AngularGrid {
    fn default() -> Self {
        AngularGrid::EqualArea { n_cos: 8, n_phi: 8 }
    }
}

impl AngularGrid {
    pub fn directions(&self) -> Result<Vec<[f64; 3]>> {
        match *self {
            AngularGrid::EqualArea { n_cos, n_phi } => equal_area_directions(n_cos, n_phi),
            AngularGrid::Cube26 => Ok(cube26_directions()),
        }
    }
}

pub fn equal_area_directions(n_cos: usize, n_phi: usize) -> Result<Vec<[f64; 3]>> {
    if n_cos == 0 || !n_cos.is_multiple_of(2) || n_phi == 0 {
        return Err(Error::Domain(format!(
            "equal-area grid needs an even n_cos >= 2 and n_phi >= 1, got ({n_cos}, {n_phi})"
        )));
    }
    let mut dirs = Vec::with_capacity(n_cos * n_phi);
    for j in 0..n_cos {
        let a = -1.0 + 2.0 * j as f64 / n_cos as f64;
        let b = -1.0 + 2.0 * (j + 1) as f64 / n_cos as f64;
        let rms = ((a * a + a * b + b * b) / 3.0).sqrt();
        let x = if a + b < 0.0 { -rms } else { rms };
        let s = (1.0 - x * x).max(0.0).sqrt();
        let stagger = if j % 2 == 0 { 0.0 } else { PI / n_phi as f64 };
        for l in 0..n_phi {
            let phi = 2.0 * PI * l as f64 / n_phi as f64 + stagger;
            dirs.push([s * phi.cos(), s * phi.sin(), x]);
        }
    }
    Ok(dirs)
}

pub fn cube26_directions() -> Vec<[f64; 3]> {
    let mut dirs = Vec::with_capacity(26);
    for i in -1i32..=1 {
        for j in -1i32..=1 {
            for k in -1i32..=1 {
                if i == 0 && j == 0 && k == 0 {
                    continue;
                }
                let v = [i as f64, j as f64, k as f64];
                let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
                dirs.push(v.map(|x| x / n));
            }
        }
    }
    dirs
}

pub fn direction_from_angles(cos_theta: f64, phi: f64) -> [f64; 3] {
    let s = (1.0 - cos_theta * cos_theta).max(0.0).sqrt();
    [s * phi.cos(), s * phi.sin(), cos_theta]
}

/// Gauss-Legendre nodes and weights on `[lo, hi]`.
pub fn gauss_legendre(n: usize, lo: f64, hi: f64) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let half = 0.5 * (hi - lo);
    let mid = 0.5 * (hi + lo);
    for i in 0..n.div_ceil(2) {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for m in 2..=n {
                let p2 = ((2 * m - 1) as f64 * x * p1 - (m - 1) as f64 * p0) / m as f64;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 1 { x } else { p1 };
            let pm = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (x * pn - pm) / (x * x - 1.0);
            let dx = pn / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = mid - half * x;
        nodes[n - 1 - i] = mid + half * x;
        weights[i] = half * w;
        weights[n - 1 - i] = half * w;
    }
    (nodes, weights)
}

fn check_soft(score: f64) -> Result<()> {
    if score > SOFT_HARD {
        return Err(Error::Regime {
            score,
            limit: SOFT_HARD,
        });
    }
    if score > SOFT_WARN {
        log::warn!("k*dx = {score:.3} exceeds the soft-scattering warning level {SOFT_WARN}");
    }
    Ok(())
}

/// `A/L^2` and `B/L^2` of the dipole expansion at one node: the diagonal
/// element is `1 + i*a - b`.
pub(crate) fn dipole_terms(k: f64, cos_theta: f64, geom: &ScatteringGeometry) -> (f64, f64) {
    let at6 = geom.effective_radius().powi(6);
    let l2 = geom.box_edge * geom.box_edge;
    let dx = geom.displacement;
    let a = 8.0 * PI * dx * k.powi(5) * at6 / (3.0 * l2) * cos_theta;
    let b = 2.0 * PI * dx * dx * k.powi(6) * at6 / (15.0 * l2) * (3.0 + 11.0 * cos_theta * cos_theta);
    (a, b)
}

/// Forward matrix element `<k| S_2^dagger S_1 |k>` in the soft-scattering
/// regime, `theta` measured from the displacement axis.
pub fn dipole_element(k: f64, theta: f64, geom: &ScatteringGeometry) -> Result<Complex64> {
    geom.validate()?;
    check_soft(k * geom.displacement)?;
    let (a, b) = dipole_terms(k, theta.cos(), geom);
    let z = c(1.0 - b, a);
    if z.norm() > 1.0 + 1e-9 {
        return Err(Error::Domain(format!(
            "|dipole element| = {} > 1: box edge too small for the expansion",
            z.norm()
        )));
    }
    Ok(z)
}

/// Discrete momentum distribution `p(k)` over a shell grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhotonDistribution {
    grid: ShellGrid,
    probs: Vec<f64>,
}

impl PhotonDistribution {
    pub fn new(grid: ShellGrid, probs: Vec<f64>) -> Result<Self> {
        if probs.len() != grid.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} probabilities for {} nodes",
                probs.len(),
                grid.len()
            )));
        }
        if probs.iter().any(|&p| !(p >= 0.0) || !p.is_finite()) {
            return Err(Error::Domain("probabilities must be finite and >= 0".into()));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::Domain(format!("probabilities sum to {total}, not 1")));
        }
        Ok(Self { grid, probs })
    }

    pub fn grid(&self) -> &ShellGrid {
        &self.grid
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    /// `max k*dx` over the support.
    pub fn soft_score(&self, geom: &ScatteringGeometry) -> f64 {
        self.grid
            .nodes()
            .zip(&self.probs)
            .filter(|(_, &p)| p > 0.0)
            .map(|(n, _)| n.k * geom.displacement)
            .fold(0.0, f64::max)
    }

    pub fn check_soft(&self, geom: &ScatteringGeometry) -> Result<()> {
        check_soft(self.soft_score(geom))
    }

    /// `sum_k p(k) f(node)`.
    pub fn expect(&self, f: impl Fn(&Node) -> f64) -> f64 {
        self.grid.nodes().zip(&self.probs).map(|(n, &p)| p * f(&n)).sum()
    }

    pub fn mean_k(&self) -> f64 {
        self.expect(|n| n.k)
    }

    pub fn support_size(&self) -> usize {
        self.probs.iter().filter(|&&p| p > 0.0).count()
    }

    /// True when two support nodes carry the same weight (or the support is a
    /// single node), i.e. non-injective `p`.
    pub fn is_degenerate(&self) -> bool {
        let mut support: Vec<f64> = self.probs.iter().copied().filter(|&p| p > 0.0).collect();
        if support.len() <= 1 {
            return true;
        }
        support.sort_by(f64::total_cmp);
        support.windows(2).any(|w| (w[1] - w[0]).abs() <= 1e-12 * w[1])
    }

    /// Momentum-diagonal density matrix over the grid nodes.
    pub fn density_matrix(&self) -> DensityMatrix {
        DensityMatrix::diagonal(&self.probs).expect("validated distribution")
    }
}

/// One row of a custom distribution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CustomNode {
    pub k_magnitude: f64,
    pub cos_theta: f64,
    pub phi: f64,
    pub prob: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DistributionKind {
    /// All weight on one direction at wavenumber `k`. The node is added to
    /// an angular shell so the scattering block has room to leak.
    Point {
        k: f64,
        cos_theta: f64,
        #[serde(default)]
        phi: f64,
        #[serde(default)]
        angular: AngularGrid,
    },
    /// Uniform over the directions of a single shell.
    IsotropicMonochromatic {
        k: f64,
        #[serde(default)]
        angular: AngularGrid,
    },
    /// Planck occupation `k^2 / (exp(k/k_thermal) - 1)` on Gauss-Legendre
    /// shells in `(0, k_cutoff]`, isotropic within each shell.
    Thermal {
        k_thermal: f64,
        k_cutoff: f64,
        #[serde(default = "default_n_k")]
        n_k: usize,
        #[serde(default)]
        angular: AngularGrid,
    },
    Custom { nodes: Vec<CustomNode> },
    /// Custom nodes read from a CSV file (`k_magnitude,cos_theta,phi,prob`).
    CustomCsv { path: String },
}

fn default_n_k() -> usize {
    16
}

/// Planck photon-number spectrum per unit wavenumber, up to normalization.
pub fn planck_weight(k: f64, k_thermal: f64) -> f64 {
    k * k / (k / k_thermal).exp_m1()
}

pub fn make_distribution(kind: &DistributionKind, geom: &ScatteringGeometry) -> Result<PhotonDistribution> {
    let dist = match kind {
        DistributionKind::Point {
            k,
            cos_theta,
            phi,
            angular,
        } => {
            if !(-1.0..=1.0).contains(cos_theta) {
                return Err(Error::Domain(format!("cos_theta {cos_theta} outside [-1, 1]")));
            }
            let mut dirs = vec![direction_from_angles(*cos_theta, *phi)];
            dirs.extend(angular.directions()?);
            let grid = ShellGrid::uniform(&[*k], &dirs)?;
            let mut probs = vec![0.0; grid.len()];
            probs[0] = 1.0;
            PhotonDistribution::new(grid, probs)?
        }
        DistributionKind::IsotropicMonochromatic { k, angular } => {
            let grid = ShellGrid::uniform(&[*k], &angular.directions()?)?;
            let n = grid.len();
            PhotonDistribution::new(grid, vec![1.0 / n as f64; n])?
        }
        DistributionKind::Thermal {
            k_thermal,
            k_cutoff,
            n_k,
            angular,
        } => {
            if !(*k_thermal > 0.0) || !(*k_cutoff > 0.0) || *n_k == 0 {
                return Err(Error::Domain("thermal distribution needs k_thermal, k_cutoff > 0 and n_k >= 1".into()));
            }
            check_soft(k_cutoff * geom.displacement)?;
            let (ks, ws) = gauss_legendre(*n_k, 0.0, *k_cutoff);
            let dirs = angular.directions()?;
            let grid = ShellGrid::uniform(&ks, &dirs)?;
            let shell_w: Vec<f64> = ks.iter().zip(&ws).map(|(&k, &w)| w * planck_weight(k, *k_thermal)).collect();
            let total: f64 = shell_w.iter().sum();
            let omega = dirs.len() as f64;
            let probs = shell_w
                .iter()
                .flat_map(|&w| std::iter::repeat_n(w / total / omega, dirs.len()))
                .collect();
            renormalized(grid, probs)?
        }
        DistributionKind::Custom { nodes } => custom_distribution(nodes)?,
        DistributionKind::CustomCsv { path } => custom_distribution(&read_distribution_csv(path)?)?,
    };
    dist.check_soft(geom)?;
    Ok(dist)
}

fn renormalized(grid: ShellGrid, mut probs: Vec<f64>) -> Result<PhotonDistribution> {
    let total: f64 = probs.iter().sum();
    if !(total > 0.0) {
        return Err(Error::Domain("distribution has zero total weight".into()));
    }
    probs.iter_mut().for_each(|p| *p /= total);
    // fold the last rounding residue into the largest entry
    let residue = 1.0 - probs.iter().sum::<f64>();
    if let Some(i) = (0..probs.len()).max_by(|&a, &b| probs[a].total_cmp(&probs[b])) {
        probs[i] += residue;
    }
    PhotonDistribution::new(grid, probs)
}

fn custom_distribution(nodes: &[CustomNode]) -> Result<PhotonDistribution> {
    if nodes.is_empty() {
        return Err(Error::Domain("custom distribution has no nodes".into()));
    }
    let total: f64 = nodes.iter().map(|n| n.prob).sum();
    if (total - 1.0).abs() > 1e-6 {
        return Err(Error::Domain(format!("custom probabilities sum to {total}")));
    }
    let mut shells: Vec<(Shell, Vec<f64>)> = Vec::new();
    for n in nodes {
        if !(-1.0..=1.0).contains(&n.cos_theta) {
            return Err(Error::Domain(format!("cos_theta {} outside [-1, 1]", n.cos_theta)));
        }
        let dir = direction_from_angles(n.cos_theta, n.phi);
        match shells
            .iter_mut()
            .find(|(s, _)| (s.k - n.k_magnitude).abs() <= 1e-12 * s.k.abs().max(n.k_magnitude.abs()))
        {
            Some((s, p)) => {
                s.directions.push(dir);
                p.push(n.prob);
            }
            None => shells.push((
                Shell {
                    k: n.k_magnitude,
                    directions: vec![dir],
                },
                vec![n.prob],
            )),
        }
    }
    let (shells, probs): (Vec<Shell>, Vec<Vec<f64>>) = shells.into_iter().unzip();
    renormalized(ShellGrid::new(shells)?, probs.concat())
}

/// Read `k_magnitude,cos_theta,phi,prob` rows (header required).
pub fn read_distribution_csv(path: impl AsRef<Path>) -> Result<Vec<CustomNode>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_path(path)?;
    let headers = rdr.headers()?.clone();
    for col in ["k_magnitude", "cos_theta", "phi", "prob"] {
        if !headers.iter().any(|h| h.trim() == col) {
            return Err(Error::Domain(format!("distribution CSV is missing column `{col}`")));
        }
    }
    rdr.deserialize().map(|r| r.map_err(Error::from)).collect()
}

/// Which scattering operator a [`ShellUnitary`] represents.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum OperatorLabel {
    S0,
    S1,
    S2,
    /// `S_2^dagger S_1`, the operator whose forward element is the dipole element.
    Relative,
}

/// Block-diagonal unitary on a shell grid, one block per shell.
///
/// Blocks are stored as `U - 1` so that small scattering amplitudes keep
/// full relative precision.
#[derive(Debug, Clone, PartialEq)]
pub struct ShellUnitary {
    grid: ShellGrid,
    deltas: Vec<CMatrix>,
    label: OperatorLabel,
}

impl ShellUnitary {
    pub fn identity(grid: ShellGrid, label: OperatorLabel) -> Self {
        let deltas = grid
            .shells()
            .iter()
            .map(|s| CMatrix::zeros(s.degeneracy(), s.degeneracy()))
            .collect();
        Self { grid, deltas, label }
    }

    /// Build from per-shell `U - 1` blocks.
    pub fn from_deltas(grid: ShellGrid, deltas: Vec<CMatrix>, label: OperatorLabel) -> Result<Self> {
        if deltas.len() != grid.shells().len()
            || deltas
                .iter()
                .zip(grid.shells())
                .any(|(d, s)| d.nrows() != s.degeneracy() || d.ncols() != s.degeneracy())
        {
            return Err(Error::DimensionMismatch("blocks do not match shell degeneracies".into()));
        }
        let u = Self { grid, deltas, label };
        let err = u.unitarity_error();
        if err > 1e-9 {
            return Err(Error::InvalidState(format!("blocks not unitary (error {err:e})")));
        }
        Ok(u)
    }

    pub fn grid(&self) -> &ShellGrid {
        &self.grid
    }

    pub fn label(&self) -> OperatorLabel {
        self.label
    }

    pub fn dim(&self) -> usize {
        self.grid.len()
    }

    pub fn delta_blocks(&self) -> &[CMatrix] {
        &self.deltas
    }

    pub fn block(&self, shell: usize) -> CMatrix {
        let d = &self.deltas[shell];
        d + CMatrix::identity(d.nrows(), d.ncols())
    }

    /// Dense `U` over all nodes; entries across shells are exactly zero.
    pub fn to_dense(&self) -> CMatrix {
        self.dense_with(|d| d + CMatrix::identity(d.nrows(), d.ncols()))
    }

    /// Dense `U - 1`.
    pub fn delta_dense(&self) -> CMatrix {
        self.dense_with(|d| d.clone())
    }

    fn dense_with(&self, f: impl Fn(&CMatrix) -> CMatrix) -> CMatrix {
        let n = self.dim();
        let mut out = CMatrix::zeros(n, n);
        for (o, d) in self.grid.offsets().into_iter().zip(&self.deltas) {
            let b = f(d);
            out.view_mut((o, o), (b.nrows(), b.ncols())).copy_from(&b);
        }
        out
    }

    /// Diagonal elements `<k|U|k>`.
    pub fn diagonal(&self) -> Vec<Complex64> {
        self.deltas
            .iter()
            .flat_map(|d| (0..d.nrows()).map(move |i| d[(i, i)] + c(1.0, 0.0)))
            .collect()
    }

    /// Diagonal of `U - 1` without the rounding of `<k|U|k> - 1`.
    pub fn delta_diagonal(&self) -> Vec<Complex64> {
        self.deltas
            .iter()
            .flat_map(|d| (0..d.nrows()).map(move |i| d[(i, i)]))
            .collect()
    }

    /// `sum_{k' != k} |<k|U|k'>|^2` per node.
    pub fn off_diagonal_row_norms(&self) -> Vec<f64> {
        self.deltas
            .iter()
            .flat_map(|d| {
                (0..d.nrows()).map(move |i| {
                    (0..d.ncols()).filter(|&j| j != i).map(|j| d[(i, j)].norm_sqr()).sum::<f64>()
                })
            })
            .collect()
    }

    /// `max |U^dagger U - 1|`.
    pub fn unitarity_error(&self) -> f64 {
        self.deltas
            .iter()
            .map(|d| {
                // (1+d)^dagger (1+d) - 1 = d + d^dagger + d^dagger d
                (d + d.adjoint() + d.adjoint() * d).camax()
            })
            .fold(0.0, f64::max)
    }

    pub fn adjoint(&self) -> ShellUnitary {
        Self {
            grid: self.grid.clone(),
            deltas: self.deltas.iter().map(|d| d.adjoint()).collect(),
            label: self.label,
        }
    }

    /// `|| (U - 1) phi ||`.
    pub fn delta_norm_on(&self, phi: &CVector) -> Result<f64> {
        if phi.len() != self.dim() {
            return Err(Error::DimensionMismatch(format!("vector of len {} on dim {}", phi.len(), self.dim())));
        }
        Ok((self.delta_dense() * phi).norm())
    }
}

/// `e^{-i x.k} S e^{i x.k}`: entry `(k, k')` picks up `e^{-i x.(k - k')}`;
/// the diagonal is left untouched.
pub fn translate_conjugate(s0: &ShellUnitary, x: [f64; 3]) -> ShellUnitary {
    let mut deltas = s0.deltas.clone();
    for (shell, d) in s0.grid.shells().iter().zip(deltas.iter_mut()) {
        let mom: Vec<[f64; 3]> = shell.directions.iter().map(|dir| dir.map(|v| v * shell.k)).collect();
        for i in 0..d.nrows() {
            for j in 0..d.ncols() {
                if i == j {
                    continue;
                }
                let arg = -(x[0] * (mom[i][0] - mom[j][0]) + x[1] * (mom[i][1] - mom[j][1]) + x[2] * (mom[i][2] - mom[j][2]));
                d[(i, j)] *= Complex64::from_polar(1.0, arg);
            }
        }
    }
    ShellUnitary {
        grid: s0.grid.clone(),
        deltas,
        label: s0.label,
    }
}

/// `exp(iG) - 1` for Hermitian `G` by scaled Taylor series and the doubling
/// rule `E(2X) = E (E + 2)`; every term keeps full relative precision, so
/// `U^dagger U = 1` holds to rounding in the tiny second-order diagonal.
fn expi_minus_one(g: &CMatrix) -> CMatrix {
    let n = g.nrows();
    let norm = (0..n)
        .map(|i| g.row(i).iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max);
    let mut squarings = 0;
    while norm / 2f64.powi(squarings) > 0.25 {
        squarings += 1;
    }
    let x = g * c(0.0, 1.0 / 2f64.powi(squarings));
    let xnorm = x.camax();
    let mut e = x.clone();
    let mut term = x.clone();
    for k in 2..60 {
        term = &term * &x * c(1.0 / k as f64, 0.0);
        e += &term;
        if term.camax() <= 1e-20 * xnorm * xnorm {
            break;
        }
    }
    for _ in 0..squarings {
        e = &e * &e + &e * c(2.0, 0.0);
    }
    e
}

/// Symmetric diagonal scaling `W = diag(x) R diag(x)` with row sums `target`.
fn symmetric_scaling(r: &CMatrix, target: &[f64]) -> Option<Vec<f64>> {
    let n = target.len();
    let rr = |i: usize, j: usize| r[(i, j)].re;
    let mut x: Vec<f64> = (0..n)
        .map(|i| {
            let s: f64 = (0..n).map(|j| rr(i, j)).sum();
            if s > 0.0 { (target[i] / s).sqrt() } else { 0.0 }
        })
        .collect();
    for _ in 0..5000 {
        let mut worst: f64 = 0.0;
        for i in 0..n {
            if target[i] == 0.0 {
                x[i] = 0.0;
                continue;
            }
            let s: f64 = (0..n).map(|j| rr(i, j) * x[j]).sum();
            if !(s > 0.0) {
                return None;
            }
            worst = worst.max((x[i] * s / target[i] - 1.0).abs());
            x[i] = (x[i] * target[i] / s).sqrt();
        }
        if worst < 1e-15 {
            return Some(x);
        }
    }
    let ok = (0..n).all(|i| {
        let s: f64 = (0..n).map(|j| rr(i, j) * x[j]).sum();
        target[i] == 0.0 || (x[i] * s / target[i] - 1.0).abs() < 1e-10
    });
    ok.then_some(x)
}

/// Explicit `S_2^dagger S_1` on the grid: exactly unitary, block diagonal by
/// shell, with forward elements matching [`dipole_element`] and off-diagonal
/// row norms fixed by unitarity (`O(1/L^2)`). Off-diagonal magnitudes and
/// phases are drawn from `seed`; `U = exp(iG)` with `G` Hermitian is
/// iterated until the diagonal agrees with the dipole target.
pub fn build_relative_unitary(grid: &ShellGrid, geom: &ScatteringGeometry, seed: u64) -> Result<ShellUnitary> {
    geom.validate()?;
    check_soft(grid.max_k() * geom.displacement)?;
    if geom.displacement == 0.0 {
        return Ok(ShellUnitary::identity(grid.clone(), OperatorLabel::Relative));
    }
    let mut rng = random::seeded(seed);
    let offsets = grid.offsets();
    let mut deltas = Vec::with_capacity(grid.shells().len());
    for (s, shell) in grid.shells().iter().enumerate() {
        let n = shell.degeneracy();
        // target forward element 1 + i a - b, kept as (a, b) to avoid cancellation
        let terms: Vec<(f64, f64)> = shell.directions.iter().map(|d| dipole_terms(shell.k, d[2], geom)).collect();
        let leak: Vec<f64> = terms.iter().map(|&(a, b)| 2.0 * b - (a * a + b * b)).collect();
        if let Some(i) = leak.iter().position(|&r| r < 0.0) {
            return Err(Error::Calibration {
                node: offsets[s] + i,
                mismatch: -leak[i],
            });
        }
        if n == 1 {
            if leak[0] > 0.0 {
                return Err(Error::Calibration {
                    node: offsets[s],
                    mismatch: leak[0],
                });
            }
            deltas.push(CMatrix::zeros(1, 1));
            continue;
        }
        let target_phase: Vec<f64> = terms.iter().map(|&(a, b)| a.atan2(1.0 - b)).collect();

        let mut weights = CMatrix::zeros(n, n);
        let mut phases = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in (i + 1)..n {
                let w: f64 = rng.random_range(0.5..1.5);
                let ph: f64 = rng.random_range(0.0..(2.0 * PI));
                weights[(i, j)] = c(w, 0.0);
                weights[(j, i)] = c(w, 0.0);
                phases[i][j] = ph;
                phases[j][i] = -ph;
            }
        }

        let scale = terms.iter().map(|&(a, b)| a.abs() + b.abs()).fold(0.0, f64::max);
        let tol = 1e-12 * scale + 1e-300;
        let mut row_target = leak.clone();
        let mut theta = target_phase.clone();
        let mut best: Option<(f64, usize, CMatrix)> = None;
        for _ in 0..200 {
            let x = symmetric_scaling(&weights, &row_target).ok_or(Error::Calibration {
                node: offsets[s],
                mismatch: f64::NAN,
            })?;
            let mut g = CMatrix::zeros(n, n);
            for i in 0..n {
                g[(i, i)] = c(theta[i], 0.0);
                for j in 0..n {
                    if i != j {
                        let mag = (x[i] * x[j] * weights[(i, j)].re).sqrt();
                        g[(i, j)] = Complex64::from_polar(mag, phases[i][j]);
                    }
                }
            }
            let delta = expi_minus_one(&g);
            let mut worst = (0.0, 0usize);
            for i in 0..n {
                let (a, b) = terms[i];
                let miss = (delta[(i, i)] - c(-b, a)).norm();
                if miss > worst.0 {
                    worst = (miss, i);
                }
            }
            if best.as_ref().is_none_or(|b| worst.0 < b.0) {
                best = Some((worst.0, worst.1, delta.clone()));
            }
            if worst.0 <= tol {
                break;
            }
            for i in 0..n {
                let off: f64 = (0..n).filter(|&j| j != i).map(|j| delta[(i, j)].norm_sqr()).sum();
                if off > 0.0 && leak[i] > 0.0 {
                    row_target[i] *= leak[i] / off;
                }
                let got = (delta[(i, i)] + c(1.0, 0.0)).arg();
                theta[i] += target_phase[i] - got;
            }
        }
        let (miss, node, delta) = best.expect("at least one iteration");
        if miss > 1e-9 * scale.max(1e-300) && miss > 1e-14 {
            return Err(Error::Calibration {
                node: offsets[s] + node,
                mismatch: miss,
            });
        }
        deltas.push(delta);
    }
    ShellUnitary::from_deltas(grid.clone(), deltas, OperatorLabel::Relative)
}

/// Dense density matrix of `dist` pushed through a shell unitary: `U rho U^dagger`.
pub fn scattered_state(u: &ShellUnitary, dist: &PhotonDistribution) -> Result<DensityMatrix> {
    if u.grid() != dist.grid() {
        return Err(Error::DimensionMismatch("unitary and distribution live on different grids".into()));
    }
    dist.density_matrix().conjugate_by(&u.to_dense())
}
