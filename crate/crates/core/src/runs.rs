//! Configuration-driven pipelines behind the `sbs` binary.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;
use serde_json::Value;

use crate::asymptotics::{self, OverlapReport, Timescale};
use crate::bounds::{self, VerificationRow};
use crate::config::{set_dotted, Command, OracleModel, RunConfig};
use crate::error::{Error, Result};
use crate::oracle::{self, PlateauCurve};
use crate::output::{fmt_f64, fmt_opt, write_csv, write_json, Table};
use crate::pfcast::{self, StationaryMethod};
use crate::qmath::{c, random, CMatrix, CVector, DensityMatrix};
use crate::scatter::{self, PhotonDistribution, ScatteringGeometry};

fn geometry_and_distribution(cfg: &RunConfig) -> Result<(ScatteringGeometry, PhotonDistribution)> {
    let geom = *cfg.geometry()?;
    let dist = scatter::make_distribution(cfg.distribution()?, &geom)?;
    Ok((geom, dist))
}

/// Columns `t, gamma_finiteL, gamma_thermo, tau_D`.
pub fn decoherence_table(cfg: &RunConfig) -> Result<Table> {
    let (geom, dist) = geometry_and_distribution(cfg)?;
    let f = cfg.fractions.decoherence_f;
    let tau = asymptotics::decoherence_time(&dist, &geom)?;
    let mut table = Table::new(&["t", "gamma_finiteL", "gamma_thermo", "tau_D"]);
    for t in cfg.times()? {
        let finite = asymptotics::decoherence_factor(&dist, &geom, f, geom.photon_count(t))?;
        let thermo = asymptotics::decoherence_factor_thermo(&dist, &geom, f, t)?;
        table.push(vec![fmt_f64(t), fmt_f64(finite), fmt_f64(thermo), fmt_f64(tau.as_f64())]);
    }
    Ok(table)
}

#[derive(Debug, Clone, Serialize)]
pub struct MacroOverlapPoint {
    pub t: f64,
    pub finite: f64,
    pub thermodynamic: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct OverlapSummary {
    pub report: OverlapReport,
    pub tau_d: Option<f64>,
    /// `tau_D / alpha`; `None` when records never form.
    pub tau_broadcast: Option<f64>,
    pub m: f64,
    pub macro_overlap: Vec<MacroOverlapPoint>,
}

pub fn overlap_report(cfg: &RunConfig) -> Result<OverlapReport> {
    let (geom, dist) = geometry_and_distribution(cfg)?;
    let u = scatter::build_relative_unitary(dist.grid(), &geom, cfg.seed)?;
    let report = asymptotics::eta_bars(&u, &dist, &geom)?;
    match cfg.alpha_override {
        Some(a) => report.with_alpha(a),
        None => Ok(report),
    }
}

pub fn overlap_summary(cfg: &RunConfig) -> Result<OverlapSummary> {
    let report = overlap_report(cfg)?;
    let (tau_d, tau_b) = asymptotics::timescales(&report);
    let m = cfg.fractions.m;
    let times = if cfg.time.is_some() { cfg.times()? } else { Vec::new() };
    let macro_overlap = times
        .into_iter()
        .map(|t| {
            Ok(MacroOverlapPoint {
                t,
                finite: asymptotics::macro_overlap(t, m, &report, false)?,
                thermodynamic: asymptotics::macro_overlap(t, m, &report, true)?,
            })
        })
        .collect::<Result<_>>()?;
    Ok(OverlapSummary { report, tau_d: tau_d.finite(), tau_broadcast: tau_b.finite(), m, macro_overlap })
}

/// Photon state and scattering matrices of the configured oracle model.
pub fn oracle_model(cfg: &RunConfig) -> Result<(DensityMatrix, CMatrix, CMatrix)> {
    match &cfg.oracle.model {
        OracleModel::QubitRotation { env, angle } => {
            let (s, co) = (0.5 * angle).sin_cos();
            let s2 = CMatrix::from_row_slice(2, 2, &[c(co, 0.0), c(-s, 0.0), c(s, 0.0), c(co, 0.0)]);
            Ok((DensityMatrix::diagonal(env)?, CMatrix::identity(2, 2), s2))
        }
        OracleModel::Random { photon_dim, env_rank } => {
            let mut rng = random::seeded(cfg.seed);
            let s1 = random::random_unitary(&mut rng, *photon_dim);
            let s2 = random::random_unitary(&mut rng, *photon_dim);
            let env = random::random_density(&mut rng, *photon_dim, *env_rank);
            Ok((env, s1, s2))
        }
        OracleModel::ShellModel => {
            let (geom, dist) = geometry_and_distribution(cfg)?;
            let u = scatter::build_relative_unitary(dist.grid(), &geom, cfg.seed)?;
            let d = u.dim();
            Ok((dist.density_matrix(), CMatrix::identity(d, d), u.to_dense()))
        }
    }
}

/// Total photon number for the oracle: explicit, or the photon count at
/// the last configured time.
pub fn oracle_photons(cfg: &RunConfig) -> Result<(usize, Option<f64>)> {
    if let Some(n) = cfg.oracle.n_t {
        return Ok((n, cfg.time.as_ref().and_then(|g| g.values().last().copied())));
    }
    let t = *cfg.times()?.last().ok_or_else(|| Error::config("time", "empty time grid"))?;
    let n = cfg.geometry()?.photon_count(t).round();
    if n > u32::MAX as f64 {
        return Err(Error::Capacity {
            what: "photon count".into(),
            needed: n as u128,
            cap: u32::MAX as usize,
            limiting: "t or oracle.n_t".into(),
        });
    }
    Ok((n as usize, Some(t)))
}

pub fn plateau_curve(cfg: &RunConfig) -> Result<PlateauCurve> {
    let (env, s1, s2) = oracle_model(cfg)?;
    let (n_t, t) = oracle_photons(cfg)?;
    let rho = cfg.system.density_matrix()?;
    let state = oracle::evolve_out_state(&rho, &env, &s1, &s2, n_t, 0.0, cfg.fractions.m, cfg.oracle.caps)?;
    oracle::mutual_info_curve(&state, &cfg.fractions.f, &cfg.thresholds.phase, t, cfg.oracle.distance)
}

/// Columns `f, I_bits, H_S, tail_norm, B_macro, broadcast_distance, phase`.
pub fn plateau_table(curve: &PlateauCurve) -> Table {
    let mut table = Table::new(&["f", "I_bits", "H_S", "tail_norm", "B_macro", "broadcast_distance", "phase"]);
    for i in 0..curve.f.len() {
        table.push(vec![
            fmt_f64(curve.f[i]),
            fmt_f64(curve.i_bits[i]),
            fmt_f64(curve.h_s),
            fmt_f64(curve.tail_norm[i]),
            fmt_f64(curve.b_macro),
            fmt_opt(curve.broadcast_distance[i]),
            curve.phase[i].to_string(),
        ]);
    }
    table
}

pub fn bounds_rows(cfg: &RunConfig) -> Result<Vec<VerificationRow>> {
    bounds::verify_theorem1(cfg.seed, cfg.bounds.trials, cfg.oracle.caps)
}

pub fn bounds_table(rows: &[VerificationRow]) -> Table {
    let mut table = Table::new(&[
        "trial", "seed", "n", "f", "H_S", "I_bits", "rhs", "epsilon_E", "epsilon_fE", "B_single", "B_macro", "slack",
        "in_regime",
    ]);
    for row in rows {
        let r = &row.report;
        table.push(vec![
            row.trial.to_string(),
            row.seed.to_string(),
            r.n.to_string(),
            fmt_f64(r.f),
            fmt_f64(r.h_s),
            fmt_f64(r.i_exact),
            fmt_f64(r.rhs),
            fmt_f64(r.epsilon_e),
            fmt_f64(r.epsilon_fe),
            fmt_f64(r.b_single),
            fmt_f64(r.b_macro),
            fmt_f64(r.slack),
            r.in_regime.to_string(),
        ]);
    }
    table
}

#[derive(Debug, Clone, Serialize)]
pub struct BoundsSummary {
    pub seed: u64,
    pub trials: usize,
    pub min_slack: Option<f64>,
    pub violations: usize,
    pub slack_tol: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct PfEntry {
    pub basis: String,
    /// Basis vectors as `[[re, im], ...]`.
    pub phi: Vec<Vec<[f64; 2]>>,
    pub p: Vec<Vec<f64>>,
    pub lambda: Vec<f64>,
    pub method: StationaryMethod,
    pub pointer_probs: Vec<f64>,
    pub max_deviation: f64,
    pub copies: usize,
    pub max_overlap: f64,
    pub orthogonal: bool,
}

pub fn pfcast_entries(cfg: &RunConfig) -> Result<Vec<PfEntry>> {
    let (env, s1, s2) = oracle_model(cfg)?;
    let n_t = cfg.oracle.n_t.unwrap_or(24);
    let channel = pfcast::oracle_channel(&env, &s1, &s2, n_t, cfg.pfcast.f, cfg.fractions.m, cfg.oracle.caps);
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let mut bases: Vec<(String, Vec<CVector>)> = vec![
        ("pointer".into(), pfcast::computational_basis(2)),
        (
            "hadamard".into(),
            vec![CVector::from_vec(vec![c(h, 0.0), c(h, 0.0)]), CVector::from_vec(vec![c(h, 0.0), c(-h, 0.0)])],
        ),
    ];
    for i in 0..cfg.pfcast.bases {
        let mut rng = random::seeded(random::derive_seed(cfg.seed, i as u64));
        let u = random::random_unitary(&mut rng, 2);
        bases.push((format!("random_{i}"), (0..2).map(|k| u.column(k).into_owned()).collect()));
    }
    bases
        .into_iter()
        .map(|(name, phi)| {
            let p = pfcast::unistochastic_from_bases(&phi, &pfcast::computational_basis(2))?;
            let st = pfcast::stationary_distribution(&p);
            let rep = pfcast::verify_pf_broadcast(&phi, &st.lambda, &channel)?;
            Ok(PfEntry {
                basis: name,
                phi: phi.iter().map(|v| v.iter().map(|z| [z.re, z.im]).collect()).collect(),
                p: (0..2).map(|i| (0..2).map(|j| p.get(i, j)).collect()).collect(),
                lambda: st.lambda,
                method: st.method,
                pointer_probs: rep.pointer_probs,
                max_deviation: rep.max_deviation,
                copies: rep.copies,
                max_overlap: rep.max_overlap,
                orthogonal: rep.orthogonal,
            })
        })
        .collect()
}

/// Run one command and write its outputs into `out`; returns the files written.
pub fn run(command: Command, cfg: &RunConfig, out: &Path, workers: usize) -> Result<Vec<PathBuf>> {
    log::info!("running {} into {}", command.name(), out.display());
    match command {
        Command::Decoherence => {
            let path = out.join("decoherence.csv");
            write_csv(&path, &decoherence_table(cfg)?)?;
            Ok(vec![path])
        }
        Command::Overlap => {
            let path = out.join("overlap.json");
            write_json(&path, &overlap_summary(cfg)?)?;
            Ok(vec![path])
        }
        Command::Plateau => {
            let curve = plateau_curve(cfg)?;
            let csv = out.join("plateau.csv");
            let json = out.join("plateau.json");
            write_csv(&csv, &plateau_table(&curve))?;
            write_json(&json, &curve)?;
            Ok(vec![csv, json])
        }
        Command::Bounds => {
            let rows = bounds_rows(cfg)?;
            let tol = cfg.thresholds.slack_tol;
            let summary = BoundsSummary {
                seed: cfg.seed,
                trials: rows.len(),
                min_slack: bounds::min_slack(&rows),
                violations: rows.iter().filter(|r| r.report.slack < -tol).count(),
                slack_tol: tol,
            };
            let csv = out.join("bounds.csv");
            let json = out.join("bounds.json");
            write_csv(&csv, &bounds_table(&rows))?;
            write_json(&json, &summary)?;
            if summary.violations > 0 {
                return Err(Error::BoundViolation { min_slack: summary.min_slack.unwrap_or(f64::NAN) });
            }
            Ok(vec![csv, json])
        }
        Command::Pfcast => {
            let entries = pfcast_entries(cfg)?;
            let path = out.join("pfcast.json");
            write_json(&path, &entries)?;
            let worst = entries.iter().map(|e| e.max_deviation).fold(0.0, f64::max);
            if worst > cfg.thresholds.pf_tol {
                return Err(Error::InvalidState(format!("broadcast spectrum deviates by {worst:e}")));
            }
            Ok(vec![path])
        }
        Command::Sweep => run_sweep(cfg, out, workers),
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepCell {
    pub index: usize,
    pub dir: String,
    pub overrides: BTreeMap<String, Value>,
    pub config: Value,
    pub ok: bool,
    pub error: Option<String>,
    pub files: Vec<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepManifest {
    pub command: Command,
    pub cells: Vec<SweepCell>,
    pub failed: usize,
}

/// Cartesian product of the axes, first axis slowest.
pub fn sweep_points(cfg: &RunConfig) -> Result<Vec<BTreeMap<String, Value>>> {
    let sweep = cfg.sweep.as_ref().ok_or_else(|| Error::config("sweep", "required for the sweep command"))?;
    let mut points = vec![BTreeMap::new()];
    for axis in &sweep.axes {
        points = points
            .into_iter()
            .flat_map(|p| {
                axis.values.iter().map(move |v| {
                    let mut q = p.clone();
                    q.insert(axis.path.clone(), v.clone());
                    q
                })
            })
            .collect();
    }
    Ok(points)
}

fn run_cell(command: Command, base: &Value, index: usize, overrides: BTreeMap<String, Value>, out: &Path) -> SweepCell {
    let dir_name = format!("cell_{index:04}");
    let mut value = base.clone();
    let result = overrides
        .iter()
        .try_for_each(|(path, v)| set_dotted(&mut value, path, v.clone()))
        .and_then(|_| RunConfig::from_value(value.clone()))
        .and_then(|cell_cfg| run(command, &cell_cfg, &out.join(&dir_name), 1));
    let (ok, error, files) = match result {
        Ok(files) => (
            true,
            None,
            files.iter().filter_map(|f| f.file_name().map(|n| format!("{dir_name}/{}", n.to_string_lossy()))).collect(),
        ),
        Err(e) => {
            log::warn!("sweep cell {index} failed: {e}");
            (false, Some(e.to_string()), Vec::new())
        }
    };
    SweepCell { index, dir: dir_name, overrides, config: value, ok, error, files }
}

/// Runs every grid cell in its own subdirectory and writes `manifest.json`.
/// Failed cells are recorded, not fatal.
pub fn run_sweep(cfg: &RunConfig, out: &Path, workers: usize) -> Result<Vec<PathBuf>> {
    let sweep = cfg.sweep.as_ref().ok_or_else(|| Error::config("sweep", "required for the sweep command"))?;
    let command = sweep.command;
    let mut base = serde_json::to_value(cfg)?;
    if let Value::Object(map) = &mut base {
        map.remove("sweep");
        map.remove("out_dir");
    }
    let points = sweep_points(cfg)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::InvalidState(format!("thread pool: {e}")))?;
    let cells: Vec<SweepCell> = pool.install(|| {
        points.into_par_iter().enumerate().map(|(i, p)| run_cell(command, &base, i, p, out)).collect()
    });
    let manifest = SweepManifest { command, failed: cells.iter().filter(|c| !c.ok).count(), cells };
    let path = out.join("manifest.json");
    write_json(&path, &manifest)?;
    Ok(vec![path])
}

/// Broadcast timescale ordering `tau_D / alpha >= tau_D`.
pub fn timescale_ordering(report: &OverlapReport) -> bool {
    match asymptotics::timescales(report) {
        (Timescale::Finite(d), Timescale::Finite(b)) => b >= d,
        (_, Timescale::Infinite) => true,
        (Timescale::Infinite, Timescale::Finite(_)) => false,
    }
}
