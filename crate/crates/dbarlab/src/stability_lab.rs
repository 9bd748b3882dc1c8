//! Stability experiments: perturbation sweeps, exponent fits, energy sweeps and the intermediate-estimate checks.

use crate::core_types::{fourier_decay_norm, PotentialGrid};
use crate::dbar_reconstruct::{reconstruct_v, solve_rlinear, DbarOptions, DbarSolver, PolarCauchy, ReconOptions, Reconstruction};
use crate::error::{invalid, Error, Result};
use crate::faddeev::{k_of_lambda, psi_boundary_trace, LsGrid, LsOptions};
use crate::forward_dtn::{dtn_operator_norm, DtNMatrix, DtnOptions, DtnSolver};
use crate::core_types::EnergyContext;
use crate::io::write_atomic;
use crate::scattering::{b_diff_from_dtn, b_decay_envelope, lp_norm, scattering_b_at, scattering_transform, weighted_tail_norms, LambdaGrid, Region, ScatterOptions, ScatteringData};
use num_complex::Complex64;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::path::Path;

/// Diameter of the unit disk.
pub const DIAM: f64 = 2.0;
/// Free parameter in the energy-dependent bounds, any value in (0, 1/(l + 2)).
pub const KAPPA_PRIME: f64 = 0.2;

/// log(3 + 1/δ).
pub fn log_term(delta: f64) -> f64 {
    (3.0 + 1.0 / delta).ln()
}

fn log10_sum(a: f64, b: f64) -> f64 {
    let m = a.max(b);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + (10f64.powf(a - m) + 10f64.powf(b - m)).log10()
}

/// log₁₀ of L^{−(m−2)}.
pub fn est1_shape_log10(delta: f64, m: u32) -> f64 {
    -(m as f64 - 2.0) * log_term(delta).log10()
}

/// log₁₀ of (√|E| + κ′L)^{−(m−2)} + δ(3 + 1/δ)^{κ′(l+2)} e^{√|E|(l+3)}.
pub fn est2_shape_log10(delta: f64, energy: f64, m: u32) -> f64 {
    let k = (-energy).sqrt();
    let a = -(m as f64 - 2.0) * (k + KAPPA_PRIME * log_term(delta)).log10();
    let b = delta.log10() + KAPPA_PRIME * (DIAM + 2.0) * (3.0 + 1.0 / delta).log10() + k * (DIAM + 3.0) / std::f64::consts::LN_10;
    log10_sum(a, b)
}

/// log₁₀ of |E|^{−(m−2)/2} L^{−(m−2)} + δ e^{|E|(l+3)}.
pub fn est3_shape_log10(delta: f64, energy: f64, m: u32) -> f64 {
    let e = -energy;
    let a = -(m as f64 - 2.0) * (0.5 * e.log10() + log_term(delta).log10());
    let b = delta.log10() + e * (DIAM + 3.0) / std::f64::consts::LN_10;
    log10_sum(a, b)
}

/// Gate for the large-energy bound: √|E| > log(3 + 1/δ).
pub fn est3_eligible(delta: f64, energy: f64) -> bool {
    (-energy).sqrt() > log_term(delta)
}

/// Grids and solver settings for one forward-plus-inverse run.
#[derive(Debug, Clone, Copy)]
pub struct PipelineConfig {
    pub lambda_grid: LambdaGrid,
    pub scatter: ScatterOptions,
    pub recon: ReconOptions,
    pub dtn: DtnOptions,
    pub n_max: usize,
    /// When set, the λ-grid is refined from this energy to the run energy by [`resolution_for_energy`].
    pub resolution_reference: Option<f64>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            lambda_grid: LambdaGrid::default(),
            scatter: ScatterOptions::default(),
            recon: ReconOptions::default(),
            dtn: DtnOptions::default(),
            n_max: 16,
            resolution_reference: None,
        }
    }
}

impl PipelineConfig {
    /// Reduced grids for sweeps over many potentials.
    pub fn sweep() -> Self {
        let mut c = Self::default();
        c.lambda_grid = LambdaGrid { n_rho: 32, n_phi: 64, ..c.lambda_grid };
        c.recon.z_grid.n = 32;
        c.recon.checkpoints = 0;
        c
    }
}

/// λ-grid with node counts scaled by max(1, √(E/reference)), rounded up to multiples of 16.
///
/// The phase of r(z, λ) per cell grows like √|E| at fixed truncation; scaling both counts keeps it bounded.
pub fn resolution_for_energy(grid: &LambdaGrid, reference: f64, energy: f64) -> Result<LambdaGrid> {
    if !(reference < 0.0 && energy < 0.0) {
        return invalid("energies must be negative");
    }
    let f = (energy / reference).sqrt();
    if f <= 1.0 {
        return Ok(*grid);
    }
    let up = |n: usize| (n as f64 * f / 16.0).ceil() as usize * 16;
    LambdaGrid::new(up(grid.n_rho), up(grid.n_phi), grid.a1, grid.a2)
}

impl PipelineConfig {
    pub fn lambda_grid_at(&self, energy: f64) -> Result<LambdaGrid> {
        match self.resolution_reference {
            Some(e0) => resolution_for_energy(&self.lambda_grid, e0, energy),
            None => Ok(self.lambda_grid),
        }
    }
}

/// Φ(E), r and the reconstruction of one potential.
pub struct Pipeline {
    pub v: PotentialGrid,
    pub energy: f64,
    pub dtn: DtNMatrix,
    pub data: ScatteringData,
    pub rec: Reconstruction,
}

impl Pipeline {
    pub fn run(v: &PotentialGrid, energy: f64, cfg: &PipelineConfig) -> Result<Pipeline> {
        let e = EnergyContext::new(energy)?;
        let dtn = DtnSolver::new(v, &e, cfg.dtn)?.matrix(cfg.n_max)?;
        let data = scattering_transform(v, energy, &cfg.lambda_grid_at(energy)?, cfg.scatter)?;
        let rec = reconstruct_v(&data, cfg.recon)?;
        Ok(Pipeline { v: v.clone(), energy, dtn, data, rec })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityRecord {
    pub energy: f64,
    pub m_label: u32,
    pub t: f64,
    /// ‖Φ₂ − Φ₁‖_*.
    pub delta: f64,
    /// sup |v₂,rec − v₁,rec| on the z-grid.
    pub sup_error: f64,
    /// sup |(v₂,rec − v₁,rec) − (v₂ − v₁)|.
    pub rec_error: f64,
    /// sup |v₂ − v₁| at the z-grid nodes.
    pub direct_error: f64,
    pub a1: f64,
    pub a2: f64,
    pub n_rho: usize,
    pub n_phi: usize,
    pub z_n: usize,
    pub ls_n: usize,
    /// sup_error · log(3 + 1/δ)^{m−2}.
    pub c1_fit: f64,
    pub est3_eligible: bool,
}

/// Compares two pipelines at the same energy and grids.
pub fn pair_record(p1: &Pipeline, p2: &Pipeline, m_label: u32, t: f64) -> Result<StabilityRecord> {
    if p1.energy != p2.energy {
        return invalid("pipelines at different energies");
    }
    let delta = dtn_operator_norm(&p2.dtn.sub(&p1.dtn)?);
    let g = p1.rec.v.grid;
    let (mut sup, mut rec, mut direct): (f64, f64, f64) = (0.0, 0.0, 0.0);
    for i in 0..g.n {
        for j in 0..g.n {
            let (x, y) = (g.coord(i), g.coord(j));
            if x.hypot(y) >= 1.0 {
                continue;
            }
            let dr = p2.rec.v.at(i, j) - p1.rec.v.at(i, j);
            let dv = p2.v.sample(x, y) - p1.v.sample(x, y);
            sup = sup.max(dr.abs());
            rec = rec.max((dr - dv).abs());
            direct = direct.max(dv.abs());
        }
    }
    let lg = p1.data.grid;
    Ok(StabilityRecord {
        energy: p1.energy,
        m_label,
        t,
        delta,
        sup_error: sup,
        rec_error: rec,
        direct_error: direct,
        a1: lg.a1,
        a2: lg.a2,
        n_rho: lg.n_rho,
        n_phi: lg.n_phi,
        z_n: g.n,
        ls_n: 0,
        c1_fit: sup * log_term(delta).powf(m_label as f64 - 2.0),
        est3_eligible: est3_eligible(delta, p1.energy),
    })
}

/// One record for the pair (v₁, v₂), reusing the pipeline of v₁.
pub fn run_pair_experiment(base: &Pipeline, v2: &PotentialGrid, cfg: &PipelineConfig, m_label: u32, t: f64) -> Result<StabilityRecord> {
    let p2 = Pipeline::run(v2, base.energy, cfg)?;
    let mut r = pair_record(base, &p2, m_label, t)?;
    r.ls_n = cfg.scatter.ls.n;
    Ok(r)
}

/// Records for v₂ = v₁ + t·w over the given t values.
pub fn perturbation_sweep(v1: &PotentialGrid, w: &PotentialGrid, ts: &[f64], energy: f64, cfg: &PipelineConfig, m_label: u32) -> Result<Vec<StabilityRecord>> {
    let base = Pipeline::run(v1, energy, cfg)?;
    ts.iter().map(|&t| run_pair_experiment(&base, &v1.add_scaled(w, t)?, cfg, m_label, t)).collect()
}

/// One record per energy for a fixed pair.
pub fn energy_sweep(v1: &PotentialGrid, v2: &PotentialGrid, energies: &[f64], cfg: &PipelineConfig, m_label: u32) -> Result<Vec<StabilityRecord>> {
    energies
        .iter()
        .map(|&e| {
            let p1 = Pipeline::run(v1, e, cfg)?;
            run_pair_experiment(&p1, v2, cfg, m_label, f64::NAN)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LogFit {
    pub alpha: f64,
    pub intercept: f64,
    /// Root-mean-square residual of the fit in log(error).
    pub residual: f64,
}

fn least_squares(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let icpt = my - slope * mx;
    let rms = (x.iter().zip(y).map(|(a, b)| (b - icpt - slope * a).powi(2)).sum::<f64>() / n).sqrt();
    (slope, icpt, rms)
}

/// Minimum δ span, in decades, accepted by [`fit_log_exponent`].
pub const MIN_DECADES: f64 = 2.95;

/// Fits log(error) = c − α log(log(3 + 1/δ)) on `(δ, error)` pairs.
pub fn fit_log_exponent(points: &[(f64, f64)]) -> Result<LogFit> {
    if points.len() < 5 {
        return invalid("need at least 5 records");
    }
    if points.iter().any(|&(d, e)| !(d > 0.0) || !(e > 0.0)) {
        return invalid("δ and error must be positive");
    }
    let dmax = points.iter().map(|p| p.0).fold(0.0, f64::max);
    let dmin = points.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
    if (dmax / dmin).log10() < MIN_DECADES {
        return invalid(format!("δ spans only {:.2} decades", (dmax / dmin).log10()));
    }
    let x: Vec<f64> = points.iter().map(|p| log_term(p.0).ln()).collect();
    let y: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let (slope, intercept, residual) = least_squares(&x, &y);
    Ok(LogFit { alpha: -slope, intercept, residual })
}

/// max/min of error·log(3 + 1/δ)^α over the points.
pub fn ratio_band(points: &[(f64, f64)], alpha: f64) -> f64 {
    let r: Vec<f64> = points.iter().map(|&(d, e)| e * log_term(d).powf(alpha)).collect();
    r.iter().cloned().fold(0.0, f64::max) / r.iter().cloned().fold(f64::INFINITY, f64::min)
}

pub fn records_to_csv(records: &[StabilityRecord]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in records {
        w.serialize(r).map_err(|e| Error::Parse(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Parse(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Parse(e.to_string()))
}

pub fn records_from_csv(text: &str) -> Result<Vec<StabilityRecord>> {
    csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_reader(text.as_bytes())
        .deserialize()
        .map(|r| r.map_err(|e| Error::Parse(e.to_string())))
        .collect()
}

/// Appends records to a results store, rewriting it atomically.
pub fn append_records(path: &Path, records: &[StabilityRecord]) -> Result<()> {
    let mut all = if path.exists() { records_from_csv(&std::fs::read_to_string(path)?)? } else { Vec::new() };
    all.extend_from_slice(records);
    write_atomic(path, records_to_csv(&all)?.as_bytes())
}

/// Energy-sweep overlay: measured error against the evaluated bound shapes.
#[derive(Debug, Clone, Serialize)]
pub struct EnergyRow {
    pub energy: f64,
    pub delta: f64,
    pub sup_error: f64,
    pub rec_error: f64,
    pub est2_log10_shape: f64,
    pub est3_log10_shape: Option<f64>,
    pub est3_eligible: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct EnergyReport {
    pub rows: Vec<EnergyRow>,
    /// max over rows of log₁₀(rec_error) − log₁₀(shape).
    pub log10_c2: f64,
    pub log10_c3: Option<f64>,
    pub rec_error_non_increasing: bool,
}

pub fn energy_report(records: &[StabilityRecord]) -> EnergyReport {
    let rows: Vec<EnergyRow> = records
        .iter()
        .map(|r| EnergyRow {
            energy: r.energy,
            delta: r.delta,
            sup_error: r.sup_error,
            rec_error: r.rec_error,
            est2_log10_shape: est2_shape_log10(r.delta, r.energy, r.m_label),
            est3_log10_shape: r.est3_eligible.then(|| est3_shape_log10(r.delta, r.energy, r.m_label)),
            est3_eligible: r.est3_eligible,
        })
        .collect();
    let log10_c2 = rows.iter().map(|r| r.rec_error.log10() - r.est2_log10_shape).fold(f64::NEG_INFINITY, f64::max);
    let c3: Vec<f64> = rows.iter().filter_map(|r| r.est3_log10_shape.map(|s| r.rec_error.log10() - s)).collect();
    let mut by_e: Vec<&StabilityRecord> = records.iter().collect();
    by_e.sort_by(|a, b| b.energy.total_cmp(&a.energy));
    EnergyReport {
        rows,
        log10_c2,
        log10_c3: (!c3.is_empty()).then(|| c3.iter().cloned().fold(f64::NEG_INFINITY, f64::max)),
        rec_error_non_increasing: by_e.windows(2).all(|w| w[1].rec_error <= w[0].rec_error),
    }
}

/// Decay envelope of b over the outer region for two outer radii.
#[derive(Debug, Clone, Serialize)]
pub struct BDecayReport {
    pub energy: f64,
    pub m: u32,
    pub rho_min: f64,
    pub sup_to_8: f64,
    pub sup_to_16: f64,
    pub fourier_norm: f64,
    pub non_increasing: bool,
    pub within_fourier_bound: bool,
}

/// Envelope sup over 4 ≤ |λ| ≤ 8 and 4 ≤ |λ| ≤ 16 from one sweep on [4, 16].
pub fn verify_b_decay(v: &PotentialGrid, energy: f64, m: u32, n_rho: usize, n_phi: usize, opts: ScatterOptions) -> Result<BDecayReport> {
    if n_rho % 2 != 0 {
        return invalid("n_rho must be even so that |λ| = 8 is a cell edge");
    }
    let grid = LambdaGrid::new(n_rho, n_phi, 4.0, 16.0)?;
    let data = scattering_transform(v, energy, &grid, opts)?;
    let half = ScatteringData {
        grid: LambdaGrid { n_rho: n_rho / 2, a2: 8.0, ..grid },
        energy,
        b: data.b[..grid.len() / 2].to_vec(),
        r: data.r[..grid.len() / 2].to_vec(),
    };
    let sup_to_8 = b_decay_envelope(&half, m, 4.0);
    let sup_to_16 = b_decay_envelope(&data, m, 4.0);
    let fourier_norm = fourier_decay_norm(v, m);
    Ok(BDecayReport {
        energy,
        m,
        rho_min: 4.0,
        sup_to_8,
        sup_to_16,
        fourier_norm,
        non_increasing: sup_to_16 <= sup_to_8,
        within_fourier_bound: sup_to_16 <= 2.0 * fourier_norm * 3.0,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct TailSlope {
    pub j: i32,
    pub radii: Vec<f64>,
    pub norms: Vec<f64>,
    pub slope: f64,
    pub threshold: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct TailNormReport {
    pub energy: f64,
    pub m: u32,
    pub p: f64,
    pub slopes: Vec<TailSlope>,
}

/// Log-log slope of ‖|λ|^j r‖_{L^p(|λ| < a)} against a ∈ {1/2, 1/4, 1/8}, r computed on [1/16, 1].
pub fn verify_tail_norms(v: &PotentialGrid, energy: f64, m: u32, p: f64, n_rho: usize, n_phi: usize, opts: ScatterOptions) -> Result<TailNormReport> {
    if n_rho % 4 != 0 {
        return invalid("n_rho must be a multiple of 4 so that the radii are cell edges");
    }
    let grid = LambdaGrid::new(n_rho, n_phi, 1.0 / 16.0, 1.0)?;
    let data = scattering_transform(v, energy, &grid, opts)?;
    let radii = vec![0.5, 0.25, 0.125];
    let slopes = [-1, 0, 1]
        .iter()
        .map(|&j| {
            let norms: Vec<f64> = radii.iter().map(|&a| weighted_tail_norms(&data, j, p, Region::Inner(a))).collect::<Result<_>>()?;
            let x: Vec<f64> = radii.iter().map(|a: &f64| a.ln()).collect();
            let y: Vec<f64> = norms.iter().map(|n| n.ln()).collect();
            let slope = least_squares(&x, &y).0;
            let threshold = m as f64 - 1.0 + j as f64 + 2.0 / p - 0.5;
            Ok(TailSlope { j, radii: radii.clone(), norms, slope, threshold, passed: slope >= threshold })
        })
        .collect::<Result<_>>()?;
    Ok(TailNormReport { energy, m, p, slopes })
}

/// Settings for the boundary identity.
#[derive(Debug, Clone, Copy)]
pub struct IdentityConfig {
    pub ls: LsGrid,
    pub dtn: DtnOptions,
    pub n_max: usize,
    pub n_theta: usize,
}

impl Default for IdentityConfig {
    fn default() -> Self {
        IdentityConfig { ls: LsGrid::default(), dtn: DtnOptions::default(), n_max: 32, n_theta: 128 }
    }
}

impl IdentityConfig {
    pub fn coarse() -> Self {
        IdentityConfig { ls: LsGrid { n: 41, half_width: 1.0 }, dtn: DtnOptions { n_r: 16, n_theta: 64, ..Default::default() }, n_max: 16, n_theta: 64 }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct BDiffEntry {
    pub lambda: [f64; 2],
    pub forward: [f64; 2],
    pub identity: [f64; 2],
    pub rel_discrepancy: f64,
    /// |b₂ − b₁| / (e^{(l+1)√|E|(|λ|+1/|λ|)} δ).
    pub ratio: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct BDiffReport {
    pub energy: f64,
    pub delta: f64,
    pub entries: Vec<BDiffEntry>,
    pub max_discrepancy: f64,
    pub ratio_spread: f64,
}

/// b₂ − b₁ by the boundary identity and by forward transforms at each λ.
pub fn verify_b_diff(v1: &PotentialGrid, v2: &PotentialGrid, energy: f64, lambdas: &[Complex64], cfg: &IdentityConfig) -> Result<BDiffReport> {
    let e = EnergyContext::new(energy)?;
    let phi1 = DtnSolver::new(v1, &e, cfg.dtn)?.matrix(cfg.n_max)?;
    let phi2 = DtnSolver::new(v2, &e, cfg.dtn)?.matrix(cfg.n_max)?;
    let delta = dtn_operator_norm(&phi2.sub(&phi1)?);
    let kap = e.kappa();
    let entries: Vec<BDiffEntry> = lambdas
        .iter()
        .map(|&l| {
            let k = k_of_lambda(l, energy)?;
            let t1 = psi_boundary_trace(v1, &k.conjugate(), cfg.ls, cfg.n_theta, cfg.n_max)?;
            let t2 = psi_boundary_trace(v2, &k, cfg.ls, cfg.n_theta, cfg.n_max)?;
            let ident = b_diff_from_dtn(&t1, &t2, &phi1, &phi2)?;
            let fwd = scattering_b_at(v2, l, energy, cfg.ls, LsOptions::default())? - scattering_b_at(v1, l, energy, cfg.ls, LsOptions::default())?;
            let weight = ((DIAM + 1.0) * kap * (l.norm() + 1.0 / l.norm())).exp();
            Ok(BDiffEntry {
                lambda: [l.re, l.im],
                forward: [fwd.re, fwd.im],
                identity: [ident.re, ident.im],
                rel_discrepancy: (ident - fwd).norm() / fwd.norm().max(1e-300),
                ratio: ident.norm() / (weight * delta),
            })
        })
        .collect::<Result<_>>()?;
    let max_discrepancy = entries.iter().map(|e| e.rel_discrepancy).fold(0.0, f64::max);
    let rmax = entries.iter().map(|e| e.ratio).fold(0.0, f64::max);
    let rmin = entries.iter().map(|e| e.ratio).fold(f64::INFINITY, f64::min);
    Ok(BDiffReport { energy, delta, entries, max_discrepancy, ratio_spread: rmax / rmin })
}

#[derive(Debug, Clone, Serialize)]
pub struct RDiffRow {
    pub t: f64,
    pub delta: f64,
    /// ‖|λ|^j (r₂ − r₁)‖_{L^p} for j = −1, 0, 1.
    pub lhs: [f64; 3],
    pub log10_shape: [f64; 3],
    /// max_j log₁₀ lhs_j − log₁₀ shape_i for the three bounds.
    pub log10_theta: [f64; 3],
    pub large_energy_regime: bool,
    /// |Σ_regions ‖·‖^p − ‖·‖^p| / ‖·‖^p for the inner/middle/outer split.
    pub additivity_defect: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct RDiffReport {
    pub energy: f64,
    pub p: f64,
    pub m: u32,
    pub rows: Vec<RDiffRow>,
    pub theta1_spread: f64,
    pub lhs_decreasing: bool,
}

/// Weighted L^p norms of r₂ − r₁ against the three bound shapes for v₂ = v₁ + t w.
pub fn verify_r_diff(v1: &PotentialGrid, w: &PotentialGrid, ts: &[f64], energy: f64, p: f64, m: u32, cfg: &PipelineConfig) -> Result<RDiffReport> {
    let e = EnergyContext::new(energy)?;
    let g = cfg.lambda_grid;
    let phi1 = DtnSolver::new(v1, &e, cfg.dtn)?.matrix(cfg.n_max)?;
    let d1 = scattering_transform(v1, energy, &g, cfg.scatter)?;
    let (ea, ep) = (-energy, 1.0 / (2.0 * p));
    let rows: Vec<RDiffRow> = ts
        .iter()
        .map(|&t| {
            let v2 = v1.add_scaled(w, t)?;
            let phi2 = DtnSolver::new(&v2, &e, cfg.dtn)?.matrix(cfg.n_max)?;
            let delta = dtn_operator_norm(&phi2.sub(&phi1)?);
            let d2 = scattering_transform(&v2, energy, &g, cfg.scatter)?;
            let diff = ScatteringData { r: d2.r.iter().zip(&d1.r).map(|(a, b)| a - b).collect(), ..d2.clone() };
            let lhs = [-1, 0, 1].map(|j| weighted_tail_norms(&diff, j, p, Region::All).unwrap_or(f64::NAN));
            let lt = log_term(delta);
            let mm = m as f64 - 2.0;
            let s1 = -mm * lt.log10();
            let s2 = log10_sum(
                -ea.log10() - mm * (ea.sqrt() + KAPPA_PRIME * lt).log10(),
                delta.log10() + KAPPA_PRIME * (DIAM + 2.0) * (3.0 + 1.0 / delta).log10() - ep * ea.log10() + ea.sqrt() * (DIAM + 2.0) / std::f64::consts::LN_10,
            );
            let s3 = log10_sum(-(m as f64 / 2.0) * ea.log10() - mm * lt.log10(), delta.log10() - ep * ea.log10() + ea * (DIAM + 2.0) / std::f64::consts::LN_10);
            let lmax = lhs.iter().cloned().fold(0.0, f64::max).log10();
            let parts: f64 = [Region::Inner(1.0), Region::Annulus(1.0, 2.0), Region::Outer(2.0)]
                .iter()
                .map(|&reg| weighted_tail_norms(&diff, 0, p, reg).map(|x| x.powf(p)).unwrap_or(0.0))
                .sum();
            let whole = lhs[1].powf(p);
            Ok(RDiffRow {
                t,
                delta,
                lhs,
                log10_shape: [s1, s2, s3],
                log10_theta: [lmax - s1, lmax - s2, lmax - s3],
                large_energy_regime: ea.sqrt() > lt,
                additivity_defect: (parts - whole).abs() / whole.max(1e-300),
            })
        })
        .collect::<Result<_>>()?;
    let th: Vec<f64> = rows.iter().map(|r| r.log10_theta[0]).collect();
    let spread = 10f64.powf(th.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - th.iter().cloned().fold(f64::INFINITY, f64::min));
    let mut by_delta: Vec<&RDiffRow> = rows.iter().collect();
    by_delta.sort_by(|a, b| b.delta.total_cmp(&a.delta));
    let lhs_decreasing = by_delta.windows(2).all(|w| w[1].lhs.iter().zip(&w[0].lhs).all(|(a, b)| a < b));
    Ok(RDiffReport { energy, p, m, rows, theta1_spread: spread, lhs_decreasing })
}

/// Lebesgue exponents for the ∂̄ estimates; s̃ from 1/s̃ = 1/s − 1/2.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Exponents {
    pub s: f64,
    pub s1: f64,
    pub s2: f64,
}

impl Default for Exponents {
    fn default() -> Self {
        Exponents { s: 4.0 / 3.0, s1: 1.5, s2: 4.0 }
    }
}

impl Exponents {
    pub fn validate(&self) -> Result<()> {
        if !(1.0 < self.s && self.s < 2.0 && 1.0 < self.s1 && self.s1 < 2.0 && 2.0 < self.s2 && self.s2.is_finite()) {
            return invalid("need 1 < s < 2 and 1 < s1 < 2 < s2 < ∞");
        }
        Ok(())
    }

    pub fn s_tilde(&self) -> f64 {
        1.0 / (1.0 / self.s - 0.5)
    }
}

fn cnorm(grid: &LambdaGrid, f: &[Complex64], p: f64) -> f64 {
    let a: Vec<f64> = f.iter().map(|z| z.norm()).collect();
    lp_norm(grid, &a, p, Region::All)
}

#[derive(Debug, Clone, Serialize)]
pub struct MuDiffRow {
    pub t: f64,
    /// sup_z ‖μ₂ − μ₁‖_{L^s̃}.
    pub mu_lhs: f64,
    /// ‖r₂ − r₁‖_{L^s}.
    pub r_norm: f64,
    /// ‖(|λ| + 1/|λ|)(r₂ − r₁)‖_{L^s}.
    pub r_weighted: f64,
    /// sup_z ‖∂_z̄μ₂ − ∂_z̄μ₁‖_{L^s̃}.
    pub dzbar_lhs: f64,
    pub ratio_mu: f64,
    pub ratio_dzbar: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct MuDiffReport {
    pub energy: f64,
    pub exponents: Exponents,
    pub z_samples: Vec<[f64; 2]>,
    pub rows: Vec<MuDiffRow>,
    pub ratio_mu_spread: f64,
    pub ratio_dzbar_spread: f64,
}

fn spread(x: impl Iterator<Item = f64> + Clone) -> f64 {
    x.clone().fold(0.0, f64::max) / x.fold(f64::INFINITY, f64::min)
}

/// Compares μ₂ − μ₁ and its z̄-derivative with norms of r₂ − r₁ along v₂ = v₁ + t w.
pub fn verify_mu_diff(v1: &PotentialGrid, w: &PotentialGrid, ts: &[f64], energy: f64, ex: Exponents, z_samples: &[Complex64], cfg: &PipelineConfig) -> Result<MuDiffReport> {
    ex.validate()?;
    let g = cfg.lambda_grid;
    let st = ex.s_tilde();
    let kap = (-energy).sqrt();
    let d1 = scattering_transform(v1, energy, &g, cfg.scatter)?;
    let s1 = DbarSolver::new(&d1, DbarOptions::default())?;
    let step = 5e-4;
    let dzbar = |s: &DbarSolver, z: Complex64| -> Result<(Vec<Complex64>, Vec<Complex64>)> {
        let c = s.solve(z)?.mu;
        let px = s.solve(z + step)?.mu;
        let mx = s.solve(z - step)?.mu;
        let py = s.solve(z + Complex64::new(0.0, step))?.mu;
        let my = s.solve(z - Complex64::new(0.0, step))?.mu;
        let d = (0..c.len()).map(|i| 0.5 * ((px[i] - mx[i]) + Complex64::new(0.0, 1.0) * (py[i] - my[i])) / (2.0 * step)).collect();
        Ok((c, d))
    };
    let base: Vec<(Vec<Complex64>, Vec<Complex64>)> = z_samples.iter().map(|&z| dzbar(&s1, z)).collect::<Result<_>>()?;
    let rows: Vec<MuDiffRow> = ts
        .iter()
        .map(|&t| {
            let d2 = scattering_transform(&v1.add_scaled(w, t)?, energy, &g, cfg.scatter)?;
            let s2 = DbarSolver::new(&d2, DbarOptions::default())?;
            let dr: Vec<Complex64> = d2.r.iter().zip(&d1.r).map(|(a, b)| a - b).collect();
            let r_norm = cnorm(&g, &dr, ex.s);
            let nodes = g.nodes();
            let drw: Vec<Complex64> = dr.iter().zip(&nodes).map(|(d, l)| d * (l.norm() + 1.0 / l.norm())).collect();
            let r_weighted = cnorm(&g, &drw, ex.s);
            let (mut mu_lhs, mut dz_lhs): (f64, f64) = (0.0, 0.0);
            for (k, &z) in z_samples.iter().enumerate() {
                let (m2, dz2) = dzbar(&s2, z)?;
                let dm: Vec<Complex64> = m2.iter().zip(&base[k].0).map(|(a, b)| a - b).collect();
                let dd: Vec<Complex64> = dz2.iter().zip(&base[k].1).map(|(a, b)| a - b).collect();
                mu_lhs = mu_lhs.max(cnorm(&g, &dm, st));
                dz_lhs = dz_lhs.max(cnorm(&g, &dd, st));
            }
            let rhs2 = r_norm + kap * (r_weighted + r_norm);
            Ok(MuDiffRow { t, mu_lhs, r_norm, r_weighted, dzbar_lhs: dz_lhs, ratio_mu: mu_lhs / r_norm, ratio_dzbar: dz_lhs / rhs2 })
        })
        .collect::<Result<_>>()?;
    Ok(MuDiffReport {
        energy,
        exponents: ex,
        z_samples: z_samples.iter().map(|z| [z.re, z.im]).collect(),
        ratio_mu_spread: spread(rows.iter().map(|r| r.ratio_mu)),
        ratio_dzbar_spread: spread(rows.iter().map(|r| r.ratio_dzbar)),
        rows,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct DbarEstimateReport {
    pub exponents: Exponents,
    pub s_tilde: f64,
    pub q1_s1: f64,
    pub q1_s2: f64,
    pub q2_s: f64,
    pub u_s_tilde: f64,
    /// ‖u‖_{s̃} / (‖q₂‖_s exp(‖q₁‖_{s₁} + ‖q₁‖_{s₂})).
    pub c_tilde: f64,
    pub residual: f64,
}

/// Solves ∂u/∂λ̄ = q₁ conj(u) + q₂ on the grid and evaluates the norms of the a-priori bound.
pub fn verify_dbar_apriori(grid: &LambdaGrid, q1: &[Complex64], q2: &[Complex64], ex: Exponents) -> Result<(Vec<Complex64>, DbarEstimateReport)> {
    ex.validate()?;
    if q1.len() != grid.len() || q2.len() != grid.len() {
        return invalid("fields do not match the lambda grid");
    }
    let c = PolarCauchy::new(grid)?;
    let rhs = c.apply(q2);
    let (u, residual) = solve_rlinear(&c, q1, &rhs, DbarOptions::default())?;
    let st = ex.s_tilde();
    let (a, b, q) = (cnorm(grid, q1, ex.s1), cnorm(grid, q1, ex.s2), cnorm(grid, q2, ex.s));
    let un = cnorm(grid, &u, st);
    let c_tilde = if q > 0.0 { un / (q * (a + b).exp()) } else { 0.0 };
    Ok((u, DbarEstimateReport { exponents: ex, s_tilde: st, q1_s1: a, q1_s2: b, q2_s: q, u_s_tilde: un, c_tilde, residual }))
}

#[derive(Debug, Clone, Serialize)]
pub struct DbarFamilyReport {
    pub seed: u64,
    pub instances: Vec<DbarEstimateReport>,
    /// max over instances of sup |u − u₀| over the grid.
    pub max_recovery_error: f64,
    pub c_tilde_spread: f64,
}

/// Grid for the manufactured-solution family.
pub fn apriori_grid() -> LambdaGrid {
    LambdaGrid { n_rho: 192, n_phi: 256, a1: 0.2, a2: 5.0 }
}

/// Randomized manufactured solutions u₀ = A e^{−|λ−c|²/σ²} with Gaussian q₁ and q₂ := ∂̄u₀ − q₁ conj(u₀).
///
/// |c| ∈ [1.8, 2.2] and σ ∈ [0.25, 0.35] keep u₀ below e^{−20} off the grid annulus.
pub fn dbar_apriori_family(seed: u64, count: usize, ex: Exponents) -> Result<DbarFamilyReport> {
    let grid = apriori_grid();
    let nodes = grid.nodes();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut instances = Vec::new();
    let mut max_err: f64 = 0.0;
    for _ in 0..count {
        let mut pick = |lo: f64, hi: f64| lo + (hi - lo) * rng.random::<f64>();
        let c0 = Complex64::from_polar(pick(1.8, 2.2), pick(0.0, 2.0 * PI));
        let sig = pick(0.25, 0.35);
        let amp = Complex64::from_polar(pick(0.5, 1.5), pick(0.0, 2.0 * PI));
        let c1 = Complex64::from_polar(pick(1.4, 2.6), pick(0.0, 2.0 * PI));
        let sig1 = pick(0.3, 0.5);
        let b = Complex64::from_polar(pick(0.2, 1.0), pick(0.0, 2.0 * PI));
        let u0: Vec<Complex64> = nodes.iter().map(|&l| amp * (-(l - c0).norm_sqr() / (sig * sig)).exp()).collect();
        let q1: Vec<Complex64> = nodes.iter().map(|&l| b * (-(l - c1).norm_sqr() / (sig1 * sig1)).exp()).collect();
        // ∂̄ e^{−|λ−c|²/σ²} = −(λ − c)/σ² · e^{−|λ−c|²/σ²}
        let q2: Vec<Complex64> = nodes.iter().zip(&u0).zip(&q1).map(|((&l, &u), &q)| -(l - c0) / (sig * sig) * u - q * u.conj()).collect();
        let (u, rep) = verify_dbar_apriori(&grid, &q1, &q2, ex)?;
        let err = nodes.iter().zip(u.iter().zip(&u0)).map(|(_, (a, b))| (a - b).norm()).fold(0.0, f64::max);
        max_err = max_err.max(err);
        instances.push(rep);
    }
    let c_tilde_spread = spread(instances.iter().map(|r| r.c_tilde));
    Ok(DbarFamilyReport { seed, instances, max_recovery_error: max_err, c_tilde_spread })
}

fn render_svg(title: &str, x_label: &str, y_label: &str, series: &[(String, Vec<(f64, f64)>)]) -> Result<String> {
    use plotters::prelude::*;
    let pts: Vec<(f64, f64)> = series.iter().flat_map(|s| s.1.iter().cloned()).filter(|p| p.0.is_finite() && p.1.is_finite()).collect();
    if pts.is_empty() {
        return invalid("nothing to plot");
    }
    let pad = |lo: f64, hi: f64| {
        let d = ((hi - lo) * 0.05).max(1e-9);
        (lo - d)..(hi + d)
    };
    let xr = pad(pts.iter().map(|p| p.0).fold(f64::INFINITY, f64::min), pts.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max));
    let yr = pad(pts.iter().map(|p| p.1).fold(f64::INFINITY, f64::min), pts.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max));
    let mut out = String::new();
    {
        let err = |e: &dyn std::fmt::Display| Error::Solver(format!("plot: {e}"));
        let root = SVGBackend::with_string(&mut out, (640, 480)).into_drawing_area();
        root.fill(&WHITE).map_err(|e| err(&e))?;
        let mut chart = ChartBuilder::on(&root)
            .caption(title, ("sans-serif", 18))
            .margin(12)
            .x_label_area_size(40)
            .y_label_area_size(56)
            .build_cartesian_2d(xr, yr)
            .map_err(|e| err(&e))?;
        chart.configure_mesh().x_desc(x_label).y_desc(y_label).draw().map_err(|e| err(&e))?;
        for (k, (name, s)) in series.iter().enumerate() {
            let color = Palette99::pick(k).to_rgba();
            chart
                .draw_series(LineSeries::new(s.iter().cloned(), color.stroke_width(2)))
                .map_err(|e| err(&e))?
                .label(name.as_str())
                .legend(move |(x, y)| PathElement::new(vec![(x, y), (x + 16, y)], color));
            chart.draw_series(s.iter().map(|&p| Circle::new(p, 3, color.filled()))).map_err(|e| err(&e))?;
        }
        chart.configure_series_labels().background_style(WHITE.mix(0.8)).border_style(BLACK).draw().map_err(|e| err(&e))?;
        root.present().map_err(|e| err(&e))?;
    }
    Ok(out)
}

/// SVG of ln(error) against ln ln(3 + 1/δ), one series per (E, m).
pub fn plot_error_vs_delta(records: &[StabilityRecord]) -> Result<String> {
    let mut keys: Vec<(f64, u32)> = records.iter().map(|r| (r.energy, r.m_label)).collect();
    keys.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    keys.dedup();
    let series: Vec<(String, Vec<(f64, f64)>)> = keys
        .iter()
        .map(|&(e, m)| {
            let mut s: Vec<(f64, f64)> = records
                .iter()
                .filter(|r| r.energy == e && r.m_label == m && r.delta > 0.0 && r.sup_error > 0.0)
                .map(|r| (log_term(r.delta).ln(), r.sup_error.ln()))
                .collect();
            s.sort_by(|a, b| a.0.total_cmp(&b.0));
            (format!("E = {e}, m = {m}"), s)
        })
        .collect();
    render_svg("reconstruction difference vs delta", "ln ln(3 + 1/delta)", "ln sup error", &series)
}

/// SVG of log₁₀ errors against |E|.
pub fn plot_error_vs_energy(records: &[StabilityRecord]) -> Result<String> {
    let mut r: Vec<&StabilityRecord> = records.iter().collect();
    r.sort_by(|a, b| b.energy.total_cmp(&a.energy));
    let sup = r.iter().map(|x| (-x.energy, x.sup_error.log10())).collect();
    let rec = r.iter().map(|x| (-x.energy, x.rec_error.log10())).collect();
    render_svg("error vs energy", "|E|", "log10 error", &[("sup error".into(), sup), ("reconstruction error".into(), rec)])
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn planted_exponent_is_recovered() {
        let pts: Vec<(f64, f64)> = (0..6).map(|k| 10f64.powi(-k - 1)).map(|d| (d, log_term(d).powf(-4.0))).collect();
        let f = fit_log_exponent(&pts).unwrap();
        assert!((f.alpha - 4.0).abs() < 1e-6 && f.residual < 1e-9);
        assert!((ratio_band(&pts, f.alpha) - 1.0).abs() < 1e-6);
    }

    #[test]
    fn noisy_exponent_within_tolerance() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let pts: Vec<(f64, f64)> = (0..8)
                .map(|k| 10f64.powf(-1.0 - k as f64 * 0.6))
                .map(|d| (d, log_term(d).powf(-3.0) * (1.0 + 0.05 * (2.0 * rng.random::<f64>() - 1.0))))
                .collect();
            let f = fit_log_exponent(&pts).unwrap();
            assert!((f.alpha - 3.0).abs() < 0.3, "{}", f.alpha);
        }
    }

    #[test]
    fn fit_rejects_short_span() {
        let pts: Vec<(f64, f64)> = (0..5).map(|k| (1e-2 * (1.0 + k as f64), 1.0)).collect();
        assert!(fit_log_exponent(&pts).is_err());
        assert!(fit_log_exponent(&pts[..3]).is_err());
    }

    #[test]
    fn gate_matches_definition() {
        assert!(est3_eligible(1e-3, -100.0)); // 10 > log(1003) ≈ 6.91
        assert!(!est3_eligible(1e-3, -30.0)); // 5.48 < 6.91
        assert!(!est3_eligible(0.5, -0.9));
    }

    #[test]
    fn shapes_are_finite_in_log() {
        let s = est3_shape_log10(1e-4, -100.0, 5);
        assert!(s.is_finite() && s > 200.0);
        assert!(est2_shape_log10(1e-4, -30.0, 5).is_finite());
        assert!((est1_shape_log10(1e-2, 4) - (-2.0 * log_term(1e-2).log10())).abs() < 1e-15);
    }

    #[test]
    fn records_csv_roundtrip() {
        let r = StabilityRecord {
            energy: -30.0,
            m_label: 5,
            t: 1e-3,
            delta: 2.5e-4,
            sup_error: 1e-3,
            rec_error: 2e-5,
            direct_error: 1e-3,
            a1: 0.125,
            a2: 8.0,
            n_rho: 32,
            n_phi: 64,
            z_n: 32,
            ls_n: 81,
            c1_fit: 0.3,
            est3_eligible: false,
        };
        let text = format!("# generated 0\n{}", records_to_csv(&[r.clone(), r.clone()]).unwrap());
        assert_eq!(records_from_csv(&text).unwrap(), vec![r.clone(), r]);
    }

    #[test]
    fn plots_render() {
        let pts: Vec<StabilityRecord> = (0..5)
            .map(|k| StabilityRecord {
                energy: -30.0 - 10.0 * k as f64,
                m_label: 5,
                t: 0.1,
                delta: 10f64.powi(-k - 1),
                sup_error: 10f64.powi(-k - 2),
                rec_error: 1e-3,
                direct_error: 0.0,
                a1: 0.125,
                a2: 8.0,
                n_rho: 8,
                n_phi: 8,
                z_n: 8,
                ls_n: 41,
                c1_fit: 0.0,
                est3_eligible: false,
            })
            .collect();
        let a = plot_error_vs_delta(&pts).unwrap();
        assert!(a.starts_with("<svg") && a.contains("m = 5"));
        assert_eq!(a, plot_error_vs_delta(&pts).unwrap());
        assert!(plot_error_vs_energy(&pts).unwrap().contains("<svg"));
    }

    #[test]
    fn resolution_scaling() {
        let g = LambdaGrid { n_phi: 64, ..LambdaGrid::default() };
        assert_eq!(resolution_for_energy(&g, -30.0, -10.0).unwrap(), g);
        assert_eq!(resolution_for_energy(&g, -30.0, -30.0).unwrap(), g);
        let h = resolution_for_energy(&g, -30.0, -100.0).unwrap();
        assert_eq!((h.n_rho, h.n_phi, h.a1, h.a2), (128, 128, g.a1, g.a2));
    }

    #[test]
    fn exponent_relation() {
        let e = Exponents::default();
        assert!((1.0 / e.s_tilde() - (1.0 / e.s - 0.5)).abs() < 1e-15);
        assert!(Exponents { s: 2.5, ..e }.validate().is_err());
    }

    #[test]
    fn zero_data_gives_zero_solution() {
        let g = LambdaGrid::new(8, 8, 0.25, 4.0).unwrap();
        let z = vec![Complex64::default(); g.len()];
        let (u, rep) = verify_dbar_apriori(&g, &z, &z, Exponents::default()).unwrap();
        assert!(u.iter().all(|x| x.norm() == 0.0));
        assert_eq!(rep.c_tilde, 0.0);
    }
}
