//! Command-line front end: JSON config plus flag overrides, one pipeline per invocation.

use crate::core_types::{make_bump_potential_on, EnergyContext, GridSpec, PotentialGrid};
use crate::dbar_reconstruct::{reconstruct_v, DbarOptions, ReconOptions};
use crate::error::{invalid, Error, Result};
use crate::faddeev::{LsGrid, LsOptions};
use crate::forward_dtn::{DtnOptions, DtnSolver};
use crate::io::{stamp_line, write_atomic};
use crate::scattering::{scattering_transform, LambdaGrid, ScatterOptions, ScatteringData};
use crate::stability_lab::{
    append_records, dbar_apriori_family, energy_report, energy_sweep, fit_log_exponent, perturbation_sweep, plot_error_vs_delta,
    plot_error_vs_energy, ratio_band, records_to_csv, verify_b_decay, verify_b_diff, verify_mu_diff, verify_r_diff, verify_tail_norms,
    Exponents, IdentityConfig, PipelineConfig,
};
use clap::{Args, Parser, Subcommand, ValueEnum};
use num_complex::Complex64;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

/// Environment variable capping the number of worker threads.
pub const THREADS_ENV: &str = "DBARLAB_THREADS";

/// A(1 − |x − c|²/ρ²)^s₊.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BumpSpec {
    pub center: [f64; 2],
    pub radius: f64,
    pub amplitude: f64,
    pub power: u32,
}

impl BumpSpec {
    fn parse(s: &str) -> std::result::Result<BumpSpec, String> {
        let f: Vec<&str> = s.split(',').map(str::trim).collect();
        if f.len() != 5 {
            return Err("expected cx,cy,radius,amplitude,power".into());
        }
        let num = |t: &str| t.parse::<f64>().map_err(|e| format!("{t:?}: {e}"));
        Ok(BumpSpec {
            center: [num(f[0])?, num(f[1])?],
            radius: num(f[2])?,
            amplitude: num(f[3])?,
            power: f[4].parse().map_err(|e| format!("{:?}: {e}", f[4]))?,
        })
    }
}

/// Everything a run needs; loaded from JSON, then overridden by flags.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub potential: BumpSpec,
    pub potential_file: Option<PathBuf>,
    pub zero_potential: bool,
    /// Direction w of the perturbation v₂ = v₁ + t·w.
    pub perturbation: BumpSpec,
    /// Perturbation size for fixed-pair runs.
    pub t: f64,
    /// t values for sweeps.
    pub sweep: Vec<f64>,
    pub energies: Vec<f64>,
    pub grid_n: usize,
    pub grid_half_width: f64,
    pub n_max: usize,
    pub dtn_n_r: usize,
    pub dtn_n_theta: usize,
    pub n_rho: usize,
    pub n_phi: usize,
    pub a1: f64,
    pub a2: f64,
    pub ls_n: usize,
    pub ls_half_width: f64,
    pub ls_tol: f64,
    pub z_n: usize,
    pub dbar_tol: f64,
    pub checkpoints: usize,
    /// Refine the λ-grid like √|E| above E = −30 in energy sweeps.
    pub scale_resolution: bool,
    pub seed: u64,
    pub instances: usize,
    /// Scattering data input for `reconstruct`.
    pub data: Option<PathBuf>,
    pub out_dir: PathBuf,
    /// Results store the stability records are appended to.
    pub store: Option<PathBuf>,
    pub stamp: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            potential: BumpSpec { center: [0.1, -0.05], radius: 0.7, amplitude: 1.0, power: 5 },
            potential_file: None,
            zero_potential: false,
            perturbation: BumpSpec { center: [-0.2, 0.2], radius: 0.5, amplitude: 1.0, power: 5 },
            t: 1e-2,
            sweep: vec![1e-1, 1e-2, 1e-3, 1e-4, 1e-5],
            energies: vec![-30.0],
            grid_n: 256,
            grid_half_width: 1.25,
            n_max: 16,
            dtn_n_r: 32,
            dtn_n_theta: 128,
            n_rho: 64,
            n_phi: 128,
            a1: 0.125,
            a2: 8.0,
            ls_n: 81,
            ls_half_width: 1.0,
            ls_tol: 1e-10,
            z_n: 64,
            dbar_tol: 1e-12,
            checkpoints: 8,
            scale_resolution: true,
            seed: 1,
            instances: 20,
            data: None,
            out_dir: PathBuf::from("out"),
            store: None,
            stamp: true,
        }
    }
}

impl RunConfig {
    /// Checks every parameter before any solve starts.
    pub fn validate(&self) -> Result<()> {
        if self.energies.is_empty() || self.energies.iter().any(|e| !(*e < 0.0) || !e.is_finite()) {
            return invalid("energies must be finite and negative");
        }
        if self.sweep.iter().any(|t| !(*t > 0.0)) || !(self.t > 0.0) {
            return invalid("perturbation sizes must be positive");
        }
        if self.grid_n < 8 || !(self.grid_half_width >= 1.0) {
            return invalid("potential grid needs n >= 8 and L >= 1");
        }
        if self.n_max == 0 || self.dtn_n_r < 4 || self.dtn_n_theta < 2 * self.n_max + 1 {
            return invalid("DtN grid too small for the requested n_max");
        }
        if self.ls_n < 9 || self.ls_n % 2 == 0 || !(self.ls_half_width >= 1.0) {
            return invalid("LS grid needs an odd n >= 9 and half width >= 1");
        }
        if !(self.ls_tol > 0.0 && self.dbar_tol > 0.0) {
            return invalid("tolerances must be positive");
        }
        if self.z_n < 5 {
            return invalid("z-grid needs at least 5 nodes per side");
        }
        for b in [&self.potential, &self.perturbation] {
            if b.center[0].hypot(b.center[1]) + b.radius > 1.0 || !(b.radius > 0.0) || b.power < 3 {
                return invalid("bumps need power >= 3 and support inside the unit disk");
            }
        }
        self.lambda_grid()?;
        Ok(())
    }

    pub fn lambda_grid(&self) -> Result<LambdaGrid> {
        LambdaGrid::new(self.n_rho, self.n_phi, self.a1, self.a2)
    }

    fn grid(&self) -> GridSpec {
        GridSpec { n: self.grid_n, half_width: self.grid_half_width }
    }

    pub fn potential(&self) -> Result<PotentialGrid> {
        if self.zero_potential {
            return Ok(PotentialGrid::zeros(self.grid()));
        }
        if let Some(p) = &self.potential_file {
            return PotentialGrid::from_pgrid(&std::fs::read_to_string(p)?);
        }
        let b = self.potential;
        make_bump_potential_on(self.grid(), b.center, b.radius, b.amplitude, b.power)
    }

    pub fn perturbation(&self) -> Result<PotentialGrid> {
        let b = self.perturbation;
        let g = if let Some(p) = &self.potential_file { PotentialGrid::from_pgrid(&std::fs::read_to_string(p)?)?.grid } else { self.grid() };
        make_bump_potential_on(g, b.center, b.radius, b.amplitude, b.power)
    }

    /// Bump power used as the smoothness label of records.
    pub fn m_label(&self) -> u32 {
        self.potential.power.min(self.perturbation.power)
    }

    pub fn scatter_options(&self) -> ScatterOptions {
        ScatterOptions {
            ls: LsGrid { n: self.ls_n, half_width: self.ls_half_width },
            ls_opts: LsOptions { tol: self.ls_tol, ..Default::default() },
        }
    }

    pub fn dtn_options(&self) -> DtnOptions {
        DtnOptions { n_r: self.dtn_n_r, n_theta: self.dtn_n_theta, ..Default::default() }
    }

    pub fn pipeline(&self) -> Result<PipelineConfig> {
        Ok(PipelineConfig {
            lambda_grid: self.lambda_grid()?,
            scatter: self.scatter_options(),
            recon: ReconOptions {
                z_grid: GridSpec { n: self.z_n, half_width: 1.0 },
                checkpoints: self.checkpoints,
                dbar: DbarOptions { tol: self.dbar_tol, ..Default::default() },
                ..Default::default()
            },
            dtn: self.dtn_options(),
            n_max: self.n_max,
            resolution_reference: None,
        })
    }
}

/// Parses `t=1e-1..1e-5`, optionally with `:count`; by default one value per decade.
pub fn parse_sweep(s: &str) -> std::result::Result<Vec<f64>, String> {
    let body = s.strip_prefix("t=").unwrap_or(s);
    let (range, count) = match body.split_once(':') {
        Some((r, c)) => (r, Some(c.parse::<usize>().map_err(|e| format!("count {c:?}: {e}"))?)),
        None => (body, None),
    };
    let (a, b) = range.split_once("..").ok_or("expected t=A..B")?;
    let a: f64 = a.parse().map_err(|e| format!("{a:?}: {e}"))?;
    let b: f64 = b.parse().map_err(|e| format!("{b:?}: {e}"))?;
    if !(a > 0.0 && b > 0.0) {
        return Err("sweep endpoints must be positive".into());
    }
    let n = count.unwrap_or_else(|| (a / b).log10().abs().round() as usize + 1);
    if n < 2 {
        return Err("sweep needs at least two values".into());
    }
    let (la, lb) = (a.log10(), b.log10());
    Ok((0..n).map(|k| 10f64.powf(la + (lb - la) * k as f64 / (n - 1) as f64)).collect())
}

#[derive(Debug, Parser)]
#[command(name = "dbarlab", version, about = "DtN maps, scattering data, dbar reconstruction and stability experiments at negative energy")]
struct Cli {
    #[command(flatten)]
    over: Overrides,
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Debug, Args)]
struct Overrides {
    /// JSON run configuration; flags override its fields.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Omit the timestamp header line from text outputs.
    #[arg(long, global = true)]
    no_stamp: bool,
    /// Energies, comma separated.
    #[arg(short = 'E', long = "energy", global = true, allow_hyphen_values = true, value_delimiter = ',')]
    energy: Vec<f64>,
    /// Use v = 0.
    #[arg(long, global = true)]
    zero_potential: bool,
    /// Potential from a .pgrid file.
    #[arg(long, global = true)]
    potential: Option<PathBuf>,
    /// Bump potential cx,cy,radius,amplitude,power.
    #[arg(long, global = true, value_parser = BumpSpec::parse, allow_hyphen_values = true)]
    bump: Option<BumpSpec>,
    /// Perturbation direction cx,cy,radius,amplitude,power.
    #[arg(long, global = true, value_parser = BumpSpec::parse, allow_hyphen_values = true)]
    perturb: Option<BumpSpec>,
    /// Perturbation size for fixed-pair runs.
    #[arg(long, global = true)]
    t: Option<f64>,
    /// Perturbation sweep, e.g. t=1e-1..1e-5 or t=1e-1..1e-4:5.
    #[arg(long, global = true, value_parser = |s: &str| parse_sweep(s).map(SweepArg))]
    sweep: Option<SweepArg>,
    #[arg(long, global = true)]
    n_max: Option<usize>,
    #[arg(long, global = true)]
    n_rho: Option<usize>,
    #[arg(long, global = true)]
    n_phi: Option<usize>,
    #[arg(long, global = true)]
    a1: Option<f64>,
    #[arg(long, global = true)]
    a2: Option<f64>,
    #[arg(long, global = true)]
    ls_n: Option<usize>,
    #[arg(long, global = true)]
    z_n: Option<usize>,
    /// Explicit-formula checkpoints per reconstruction.
    #[arg(long, global = true)]
    checkpoints: Option<usize>,
    /// Keep the λ-grid node counts fixed across energies in energy sweeps.
    #[arg(long, global = true)]
    fixed_resolution: bool,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    instances: Option<usize>,
    /// Scattering data CSV for `reconstruct`.
    #[arg(long, global = true)]
    data: Option<PathBuf>,
    /// Results store CSV to append stability records to.
    #[arg(long, global = true)]
    store: Option<PathBuf>,
}

#[derive(Debug, Clone)]
struct SweepArg(Vec<f64>);

#[derive(Debug, Subcommand)]
enum Command {
    /// DtN matrix Φ(E) of the potential.
    Dtn,
    /// Scattering data b and r on the λ-grid.
    Scatter,
    /// Potential from scattering data by the dbar method.
    Reconstruct,
    /// Perturbation sweep v₂ = v₁ + t·w with fitted exponent.
    Stability,
    /// Fixed pair over several energies.
    EnergySweep,
    /// Intermediate-estimate checks.
    Verify { suite: Suite },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Suite {
    BDecay,
    TailNorms,
    BDiff,
    RDiff,
    MuDiff,
    DbarApriori,
}

impl Overrides {
    fn apply(self, mut c: RunConfig) -> RunConfig {
        if let Some(o) = self.out {
            c.out_dir = o;
        }
        if self.no_stamp {
            c.stamp = false;
        }
        if !self.energy.is_empty() {
            c.energies = self.energy;
        }
        if self.zero_potential {
            c.zero_potential = true;
        }
        if self.fixed_resolution {
            c.scale_resolution = false;
        }
        macro_rules! set {
            ($($f:ident => $g:ident),*) => { $(if let Some(x) = self.$f { c.$g = x; })* };
        }
        set!(bump => potential, perturb => perturbation, t => t, n_max => n_max, n_rho => n_rho, n_phi => n_phi,
             a1 => a1, a2 => a2, ls_n => ls_n, z_n => z_n, checkpoints => checkpoints, seed => seed, instances => instances);
        if let Some(SweepArg(v)) = self.sweep {
            c.sweep = v;
        }
        if self.potential.is_some() {
            c.potential_file = self.potential;
        }
        if self.data.is_some() {
            c.data = self.data;
        }
        if self.store.is_some() {
            c.store = self.store;
        }
        c
    }
}

/// Caps the rayon pool from the environment; an unparsable value is a usage error.
fn init_threads() -> Result<()> {
    if let Ok(s) = std::env::var(THREADS_ENV) {
        let n: usize = s.trim().parse().map_err(|_| Error::Validation(format!("{THREADS_ENV} must be a positive integer")))?;
        if n == 0 {
            return invalid(format!("{THREADS_ENV} must be a positive integer"));
        }
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    Ok(())
}

struct Out<'a> {
    dir: &'a Path,
    stamp: bool,
}

impl Out<'_> {
    fn text(&self, name: &str, body: &str) -> Result<()> {
        let p = self.dir.join(name);
        write_atomic(&p, format!("{}{body}", stamp_line(self.stamp)).as_bytes())?;
        println!("wrote {}", p.display());
        Ok(())
    }

    fn raw(&self, name: &str, body: &str) -> Result<()> {
        let p = self.dir.join(name);
        write_atomic(&p, body.as_bytes())?;
        println!("wrote {}", p.display());
        Ok(())
    }

    fn json<T: Serialize>(&self, name: &str, v: &T) -> Result<()> {
        let s = serde_json::to_string_pretty(v).map_err(|e| Error::Parse(e.to_string()))?;
        self.raw(name, &(s + "\n"))
    }
}

#[derive(Serialize)]
struct SweepReport<'a> {
    energy: f64,
    m_label: u32,
    records: usize,
    fit: Option<crate::stability_lab::LogFit>,
    ratio_band: Option<f64>,
    fit_error: Option<String>,
    delta_strictly_decreasing: bool,
    config: &'a RunConfig,
}

fn execute(cmd: Command, c: &RunConfig) -> Result<()> {
    c.validate()?;
    let out = Out { dir: &c.out_dir, stamp: c.stamp };
    let e0 = c.energies[0];
    match cmd {
        Command::Dtn => {
            let v = c.potential()?;
            let phi = DtnSolver::new(&v, &EnergyContext::new(e0)?, c.dtn_options())?.matrix(c.n_max)?;
            out.text("dtn.csv", &phi.to_csv())
        }
        Command::Scatter => {
            let v = c.potential()?;
            let data = scattering_transform(&v, e0, &c.lambda_grid()?, c.scatter_options())?;
            out.text("scattering.csv", &data.to_csv())
        }
        Command::Reconstruct => {
            let data = match &c.data {
                Some(p) => ScatteringData::from_csv(&std::fs::read_to_string(p)?)?,
                None => scattering_transform(&c.potential()?, e0, &c.lambda_grid()?, c.scatter_options())?,
            };
            let rec = reconstruct_v(&data, c.pipeline()?.recon)?;
            out.text("reconstruction.pgrid", &rec.v.to_pgrid())?;
            out.json("reconstruction.json", &rec.report)
        }
        Command::Stability => {
            let (v1, w) = (c.potential()?, c.perturbation()?);
            let recs = perturbation_sweep(&v1, &w, &c.sweep, e0, &c.pipeline()?, c.m_label())?;
            let pts: Vec<(f64, f64)> = recs.iter().map(|r| (r.delta, r.sup_error)).collect();
            let fit = fit_log_exponent(&pts);
            let mut sorted = recs.clone();
            sorted.sort_by(|a, b| b.t.total_cmp(&a.t));
            let report = SweepReport {
                energy: e0,
                m_label: c.m_label(),
                records: recs.len(),
                ratio_band: fit.as_ref().ok().map(|f| ratio_band(&pts, f.alpha)),
                fit_error: fit.as_ref().err().map(|e| e.to_string()),
                fit: fit.ok(),
                delta_strictly_decreasing: sorted.windows(2).all(|w| w[1].delta < w[0].delta),
                config: c,
            };
            out.text("stability.csv", &records_to_csv(&recs)?)?;
            out.json("stability.json", &report)?;
            out.raw("stability.svg", &plot_error_vs_delta(&recs)?)?;
            if let Some(s) = &c.store {
                append_records(s, &recs)?;
            }
            Ok(())
        }
        Command::EnergySweep => {
            let v1 = c.potential()?;
            let v2 = v1.add_scaled(&c.perturbation()?, c.t)?;
            let mut p = c.pipeline()?;
            if c.scale_resolution {
                p.resolution_reference = Some(-30.0);
            }
            let recs = energy_sweep(&v1, &v2, &c.energies, &p, c.m_label())?;
            out.text("energy_sweep.csv", &records_to_csv(&recs)?)?;
            out.json("energy_sweep.json", &energy_report(&recs))?;
            out.raw("energy_sweep.svg", &plot_error_vs_energy(&recs)?)?;
            if let Some(s) = &c.store {
                append_records(s, &recs)?;
            }
            Ok(())
        }
        Command::Verify { suite } => {
            let v1 = c.potential()?;
            let m = v1.smoothness_m;
            match suite {
                Suite::BDecay => out.json("verify_b_decay.json", &verify_b_decay(&v1, e0, 3, 16, c.n_phi, c.scatter_options())?),
                Suite::TailNorms => {
                    let opts = ScatterOptions { ls_opts: LsOptions { tol: 1e-12, ..Default::default() }, ..c.scatter_options() };
                    out.json("verify_tail_norms.json", &verify_tail_norms(&v1, e0, 3, 4.0 / 3.0, 16, c.n_phi, opts)?)
                }
                Suite::BDiff => {
                    let v2 = v1.add_scaled(&c.perturbation()?, c.t)?;
                    let lambdas: Vec<Complex64> = (0..16).map(|k| Complex64::from_polar(2.0, 2.0 * std::f64::consts::PI * k as f64 / 16.0)).collect();
                    let cfg = IdentityConfig { ls: c.scatter_options().ls, dtn: c.dtn_options(), n_max: c.n_max, ..Default::default() };
                    out.json("verify_b_diff.json", &verify_b_diff(&v1, &v2, e0, &lambdas, &cfg)?)
                }
                Suite::RDiff => out.json("verify_r_diff.json", &verify_r_diff(&v1, &c.perturbation()?, &c.sweep, e0, 4.0 / 3.0, m, &c.pipeline()?)?),
                Suite::MuDiff => {
                    let mut rng = ChaCha8Rng::seed_from_u64(c.seed);
                    let zs: Vec<Complex64> = (0..4).map(|_| Complex64::from_polar(0.8 * rng.random::<f64>(), 6.283185307179586 * rng.random::<f64>())).collect();
                    out.json("verify_mu_diff.json", &verify_mu_diff(&v1, &c.perturbation()?, &c.sweep, e0, Exponents::default(), &zs, &c.pipeline()?)?)
                }
                Suite::DbarApriori => out.json("verify_dbar_apriori.json", &dbar_apriori_family(c.seed, c.instances, Exponents::default())?),
            }
        }
    }
}

fn load(over: Overrides) -> Result<RunConfig> {
    let base = match &over.config {
        Some(p) => serde_json::from_str(&std::fs::read_to_string(p)?).map_err(|e| Error::Validation(format!("config {}: {e}", p.display())))?,
        None => RunConfig::default(),
    };
    Ok(over.apply(base))
}

/// Parses `argv` (program name first), runs the subcommand and returns the exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let result = init_threads().and_then(|_| load(cli.over)).and_then(|c| execute(cli.cmd, &c));
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sweep_one_per_decade() {
        let t = parse_sweep("t=1e-1..1e-5").unwrap();
        assert_eq!(t.len(), 5);
        assert!((t[2] - 1e-3).abs() < 1e-15);
        assert_eq!(parse_sweep("1e-1..1e-4:7").unwrap().len(), 7);
        assert!(parse_sweep("t=1e-1").is_err());
        assert!(parse_sweep("t=0..1").is_err());
    }

    #[test]
    fn bump_flag() {
        let b = BumpSpec::parse("0.1,-0.05,0.7,1,5").unwrap();
        assert_eq!(b, RunConfig::default().potential);
        assert!(BumpSpec::parse("1,2").is_err());
    }

    #[test]
    fn config_json_overrides() {
        let c: RunConfig = serde_json::from_str(r#"{"n_rho": 8, "energies": [-1.0]}"#).unwrap();
        assert_eq!((c.n_rho, c.energies.clone(), c.n_phi), (8, vec![-1.0], 128));
        assert!(serde_json::from_str::<RunConfig>(r#"{"bogus": 1}"#).is_err());
        let cli = Cli::try_parse_from(["dbarlab", "dtn", "-E", "-2,-3", "--n-rho", "16", "--sweep", "t=1e-1..1e-2"]).unwrap();
        let c = cli.over.apply(c);
        assert_eq!((c.n_rho, c.energies), (16, vec![-2.0, -3.0]));
        assert_eq!(c.sweep.len(), 2);
    }

    #[test]
    fn validation_rejects_bad_configs() {
        let ok = RunConfig::default();
        assert!(ok.validate().is_ok());
        assert!(RunConfig { energies: vec![1.0], ..ok.clone() }.validate().is_err());
        assert!(RunConfig { ls_n: 80, ..ok.clone() }.validate().is_err());
        assert!(RunConfig { n_rho: 64, a1: 0.5, a2: 2.0, ..ok }.validate().is_ok());
    }

    #[test]
    fn usage_errors_exit_2() {
        assert_eq!(run(["dbarlab", "--frobnicate", "dtn"]), 2);
        assert_eq!(run(["dbarlab", "verify", "nope"]), 2);
        assert_eq!(run(["dbarlab", "dtn", "-E", "1", "--out", "/nonexistent-unused"]), 2);
    }
}
