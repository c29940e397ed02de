//! Configuration-driven pipeline: solve → measure → analyze → report, with
//! every artifact checksummed in a run manifest.

mod config;

pub use config::{AnalysisConfig, IntegrandConfig, MeshConfig, RunConfig};

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::analysis::{
    default_radius_grid, exceptional_flux, gauge_comparison, local_dimension, log_density, mass_quantile_centers_from,
    measure_diameter, moment_bound_fit, winding_number, Branch, GaugeFunction, GaugeSign, MomentTable,
};
use crate::error::{Error, Result};
use crate::geometry::{extract_level_curve, hex_digest, make_domain, mesh, Mesh};
use crate::integrand::{quasiconformal_k, structure_constants, verify_delta_monotone, Integrand};
use crate::measure::{boundary_measure, level_flux, BoundaryMeasure};
use crate::solver::{fundamental_inequality, residual, solve_capacitary_with_log, ScalarField};

pub const MESH_FILE: &str = "mesh.txt";
pub const FIELD_FILE: &str = "field.txt";
pub const CONVERGENCE_FILE: &str = "convergence.csv";
pub const MEASURE_FILE: &str = "measure.csv";
pub const SUMMARY_FILE: &str = "summary.json";
pub const REPORT_FILE: &str = "report.txt";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const DIAGNOSTIC_FILE: &str = "diagnostic.log";

/// Process exit status for an error: 2 configuration, 3 numerical failure,
/// 4 consistency (stale or missing inputs, checksum mismatch).
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config { .. } | Error::InvalidInput(_) => 2,
        Error::Consistency(_) | Error::Parse(_) | Error::Io(_) => 4,
        Error::Singularity { .. }
        | Error::Numerical { .. }
        | Error::Mesh(_)
        | Error::NewtonDivergence { .. }
        | Error::MeasureExtraction { .. }
        | Error::Uncertifiable { .. } => 3,
    }
}

#[derive(Debug, Parser)]
#[command(name = "fharm", version, about = "Capacitary solutions, boundary measures and their dimensions")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Mesh the domain and solve for the capacitary function.
    Solve(RunArgs),
    /// Extract the boundary measure from a solved field.
    Measure(RunArgs),
    /// Moments, exceptional flux, windings, dimensions and gauge comparison.
    Analyze(RunArgs),
    /// Summarize a run into report.txt.
    Report(RunArgs),
    /// Run every stage in order.
    All(RunArgs),
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    #[arg(long, value_name = "PATH")]
    pub config: PathBuf,
    /// Output directory; overrides `output` in the config.
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
    #[arg(long, value_name = "N")]
    pub seed: Option<u64>,
    /// Gradient-norm tolerance of intermediate ε stages.
    #[arg(long = "stage-tolerance", value_name = "TOL")]
    pub stage_tolerance: Option<f64>,
}

impl Command {
    fn args(&self) -> &RunArgs {
        match self {
            Command::Solve(a) | Command::Measure(a) | Command::Analyze(a) | Command::Report(a) | Command::All(a) => a,
        }
    }
}

/// Parses arguments, runs the command and returns the exit status.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match run(&cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

pub fn run(cmd: &Command) -> Result<()> {
    let args = cmd.args();
    let mut cfg = RunConfig::load(&args.config)?;
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if let Some(t) = args.stage_tolerance {
        cfg.solve.stage_tol = t;
    }
    cfg.validate()?;
    let out = match &args.out {
        Some(o) => o.clone(),
        None => cfg.output_dir(),
    };
    let mut run = Run::new(cfg, out);
    match cmd {
        Command::Solve(_) => run.solve(),
        Command::Measure(_) => run.measure(),
        Command::Analyze(_) => run.analyze(),
        Command::Report(_) => run.report(),
        Command::All(_) => {
            run.solve()?;
            run.measure()?;
            run.analyze()?;
            run.report()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub name: String,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub software: String,
    pub config: RunConfig,
    pub seed: u64,
    /// SHA-256 of every emitted file, by file name.
    pub files: BTreeMap<String, String>,
    pub stages: Vec<StageRecord>,
    pub values: BTreeMap<String, f64>,
}

impl RunManifest {
    fn new(cfg: &RunConfig) -> Self {
        RunManifest {
            software: format!("{} {}", env!("CARGO_PKG_NAME"), env!("CARGO_PKG_VERSION")),
            config: cfg.clone(),
            seed: cfg.seed,
            files: BTreeMap::new(),
            stages: Vec::new(),
            values: BTreeMap::new(),
        }
    }

    pub fn read(path: &Path) -> Result<RunManifest> {
        let text = std::fs::read_to_string(path)
            .map_err(|_| Error::Consistency(format!("no manifest at {}; run `solve` first", path.display())))?;
        serde_json::from_str(&text).map_err(|e| Error::Parse(format!("manifest: {e}")))
    }
}

/// Per-branch results of the moment and exceptional-flux analysis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BranchSummary {
    pub branch: Branch,
    pub c_prime: f64,
    pub c_star_hat: f64,
    /// c_* used for 𝔇: the override, or c_star_hat raised to at least 1.
    pub c_star: f64,
    pub max_abs_slope: f64,
    /// flux(t)·log²(1/t) per exceptional level.
    pub exceptional_constants: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaugeSummary {
    pub sign: GaugeSign,
    pub a: f64,
    pub c_star: f64,
    pub increasing: f64,
    pub decreasing: f64,
    pub flat: f64,
    pub below_gauge_at_finest: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisSummary {
    pub p: f64,
    pub flux_mean: f64,
    /// (max − min)/mean of I₀ over the flux levels.
    pub flux_spread: f64,
    pub windings_all_minus_one: bool,
    pub winding_differences_zero: bool,
    pub excluded_area: f64,
    pub branches: Vec<BranchSummary>,
    pub local_dimension: f64,
    pub local_ci: (f64, f64),
    pub information_dimension: f64,
    pub information_ci: (f64, f64),
    pub boundary_box_dimension: f64,
    pub radii: Vec<f64>,
    pub gauge: Vec<GaugeSummary>,
}

struct Run {
    cfg: RunConfig,
    out: PathBuf,
    manifest: RunManifest,
}

fn as_config(field: &'static str) -> impl Fn(Error) -> Error {
    move |e| match e {
        Error::InvalidInput(m) => Error::config(field, m),
        other => other,
    }
}

impl Run {
    fn new(cfg: RunConfig, out: PathBuf) -> Self {
        let manifest = RunManifest::new(&cfg);
        Run { cfg, out, manifest }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    fn emit(&mut self, name: &str, contents: &str) -> Result<()> {
        std::fs::write(self.path(name), contents)?;
        self.manifest.files.insert(name.to_string(), hex_digest(contents.as_bytes()));
        Ok(())
    }

    fn finish_stage(&mut self, name: &str, start: Instant) -> Result<()> {
        let seconds = start.elapsed().as_secs_f64();
        self.manifest.stages.retain(|s| s.name != name);
        self.manifest.stages.push(StageRecord { name: name.to_string(), seconds });
        let json = serde_json::to_string_pretty(&self.manifest).expect("manifest serializes");
        std::fs::write(self.path(MANIFEST_FILE), json + "\n")?;
        Ok(())
    }

    /// Loads the manifest of an earlier stage and refuses inputs that do not
    /// match it.
    fn resume(&mut self, needed: &[&str]) -> Result<()> {
        let m = RunManifest::read(&self.path(MANIFEST_FILE))?;
        let (a, b) = (&m.config, &self.cfg);
        if a.integrand != b.integrand || a.domain != b.domain || a.mesh != b.mesh || a.solve != b.solve {
            return Err(Error::Consistency("config differs from the one that produced this run; rerun `solve`".into()));
        }
        for name in needed {
            let recorded = m
                .files
                .get(*name)
                .ok_or_else(|| Error::Consistency(format!("{name} is missing from the manifest; run the earlier stage first")))?;
            let bytes = std::fs::read(self.path(name))
                .map_err(|_| Error::Consistency(format!("missing input {}", self.path(name).display())))?;
            if hex_digest(&bytes) != *recorded {
                return Err(Error::Consistency(format!("{name} does not match its manifest checksum (stale or edited file)")));
            }
        }
        let config = self.cfg.clone();
        self.manifest = RunManifest { config, seed: self.cfg.seed, ..m };
        Ok(())
    }

    fn load_field(&self) -> Result<(Arc<Mesh>, ScalarField)> {
        let mesh = Arc::new(Mesh::read(&self.path(MESH_FILE))?);
        let u = ScalarField::read(&self.path(FIELD_FILE), mesh.clone())?;
        Ok((mesh, u))
    }

    fn solve(&mut self) -> Result<()> {
        let start = Instant::now();
        std::fs::create_dir_all(&self.out)?;
        self.manifest = RunManifest::new(&self.cfg);
        let f = self.cfg.build_integrand()?;
        let domain = make_domain(&self.cfg.domain).map_err(as_config("domain"))?;
        let m = Arc::new(mesh(&domain, self.cfg.mesh.h_max, self.cfg.mesh.grading)?);
        self.emit(MESH_FILE, &m.to_text())?;
        let report = match solve_capacitary_with_log(m.clone(), &f, &self.cfg.solve) {
            Ok(r) => r,
            Err(e) => {
                self.write_diagnostic(&e)?;
                return Err(e);
            }
        };
        self.emit(FIELD_FILE, &report.field.to_text())?;
        self.emit(CONVERGENCE_FILE, &report.log_csv())?;
        let res = residual(&report.field, &f.unmollified().mollify(report.field.epsilon())?);
        let v = &mut self.manifest.values;
        v.insert("vertices".into(), m.num_vertices() as f64);
        v.insert("triangles".into(), m.num_triangles() as f64);
        v.insert("stages".into(), report.schedule.len() as f64);
        v.insert("newton_iterations".into(), report.log.len() as f64);
        v.insert("final_epsilon".into(), report.field.epsilon());
        v.insert("final_residual".into(), res);
        self.finish_stage("solve", start)?;
        println!(
            "solve: {} vertices, {} stage(s), {} Newton steps, residual {res:.3e}, {:.2} s",
            m.num_vertices(),
            report.schedule.len(),
            report.log.len(),
            start.elapsed().as_secs_f64()
        );
        Ok(())
    }

    fn write_diagnostic(&self, e: &Error) -> Result<()> {
        let mut s = format!("error: {e}\n");
        if let Error::NewtonDivergence { residual_history, .. } = e {
            s.push_str("residual_history\n");
            for r in residual_history {
                let _ = writeln!(s, "{r:.16e}");
            }
        }
        std::fs::write(self.path(DIAGNOSTIC_FILE), s)?;
        Ok(())
    }

    fn measure(&mut self) -> Result<()> {
        let start = Instant::now();
        self.resume(&[MESH_FILE, FIELD_FILE])?;
        let (_, u) = self.load_field()?;
        let f = self.cfg.build_integrand()?;
        let mu = boundary_measure(&u, &f)?;
        self.emit(MEASURE_FILE, &mu.to_csv())?;
        let v = &mut self.manifest.values;
        v.insert("total_mass".into(), mu.total_mass);
        v.insert("clamp_total".into(), mu.clamp_total);
        v.insert("min_raw_weight".into(), mu.min_raw_weight);
        self.finish_stage("measure", start)?;
        println!("measure: {} arcs, total mass {:.6}, clamped {:.3e}", mu.len(), mu.total_mass, mu.clamp_total);
        Ok(())
    }

    fn analyze(&mut self) -> Result<()> {
        let start = Instant::now();
        self.resume(&[MESH_FILE, FIELD_FILE, MEASURE_FILE])?;
        let (_, u) = self.load_field()?;
        let mu = BoundaryMeasure::read(&self.path(MEASURE_FILE))?;
        if mu.field_checksum != u.checksum() {
            return Err(Error::Consistency("measure.csv was extracted from a different field".into()));
        }
        let f = self.cfg.build_integrand()?;
        let a = self.cfg.analysis.clone();
        let p = f.p();

        // I₀ conservation.
        let mut csv = String::from("t,I_0\n");
        let mut fluxes = Vec::new();
        for &t in &a.flux_levels {
            let i0 = level_flux(&u, &f, t)?;
            fluxes.push(i0);
            let _ = writeln!(csv, "{t:.16e},{i0:.16e}");
        }
        self.emit("flux.csv", &csv)?;
        let flux_mean = fluxes.iter().sum::<f64>() / fluxes.len().max(1) as f64;
        let flux_spread = if fluxes.is_empty() {
            0.0
        } else {
            (fluxes.iter().copied().fold(f64::NEG_INFINITY, f64::max) - fluxes.iter().copied().fold(f64::INFINITY, f64::min))
                / flux_mean
        };

        // Windings.
        let mut csv = String::from("t,component,winding,note\n");
        let mut totals = Vec::new();
        let mut all_minus_one = true;
        for &t in &a.winding_levels {
            match winding_number(&extract_level_curve(&u, t)?) {
                Ok(w) => {
                    for (i, x) in w.iter().enumerate() {
                        let _ = writeln!(csv, "{t:.16e},{i},{x},");
                    }
                    all_minus_one &= !w.is_empty() && w.iter().all(|x| *x == -1);
                    totals.push(Some(w.iter().sum::<i64>()));
                }
                Err(e @ Error::Uncertifiable { .. }) => {
                    let _ = writeln!(csv, "{t:.16e},,,\"{e}\"");
                    all_minus_one = false;
                    totals.push(None);
                }
                Err(e) => return Err(e),
            }
        }
        self.emit("windings.csv", &csv)?;
        let winding_differences_zero = totals.windows(2).all(|w| matches!((w[0], w[1]), (Some(x), Some(y)) if x == y));

        // Moments and exceptional flux, per branch.
        let mut branches = Vec::new();
        let mut excluded_area = 0.0;
        for branch in Branch::for_p(p) {
            let ld = log_density(&u, &f, branch, a.c_prime)?;
            excluded_area = ld.excluded_area;
            let table = MomentTable::compute(&u, &f, &ld, &a.moment_levels, a.m_max)?;
            self.emit(&format!("moments_{}.csv", branch.as_str()), &table.to_csv())?;
            let fit = moment_bound_fit(&table)?;
            let mut csv = String::from("t,m,bracket\n");
            for (t, m, b) in &fit.brackets {
                let _ = writeln!(csv, "{t:.16e},{m},{b:.16e}");
            }
            self.emit(&format!("moment_fit_{}.csv", branch.as_str()), &csv)?;
            let c_star = a.c_star.unwrap_or(fit.c_star_hat.max(1.0));
            let sign = match branch {
                Branch::Positive => GaugeSign::Plus,
                Branch::Negative => GaugeSign::Minus,
            };
            let gauge = GaugeFunction::new(1.0, sign, c_star)?;
            let mut csv = String::from("t,D,flux,flux_log2\n");
            let mut constants = Vec::new();
            for &t in &a.exceptional_levels {
                let ex = exceptional_flux(&u, &f, &ld, t, &gauge)?;
                let k = ex * (1.0 / t).ln().powi(2);
                constants.push((t, k));
                let _ = writeln!(csv, "{t:.16e},{:.16e},{ex:.16e},{k:.16e}", gauge.big_d(t)?);
            }
            self.emit(&format!("exceptional_{}.csv", branch.as_str()), &csv)?;
            branches.push(BranchSummary {
                branch,
                c_prime: ld.c_prime,
                c_star_hat: fit.c_star_hat,
                c_star,
                max_abs_slope: fit.max_abs_slope,
                exceptional_constants: constants,
            });
        }

        // Dimensions and gauge comparison.
        let radii = match &a.radii {
            Some(r) => r.clone(),
            None => default_radius_grid(&mu)?,
        };
        let start_q: f64 = ChaCha8Rng::seed_from_u64(self.cfg.seed).gen();
        let centers = mass_quantile_centers_from(&mu, a.centers, start_q);
        let mut report = local_dimension(&mu, &centers, &radii)?;
        let length = measure_diameter(&mu);
        let mut gauge_rows = Vec::new();
        let mut csv = String::from("sign,A,x,y,weight,r,ratio\n");
        for b in &branches {
            let sign = if b.branch == Branch::Positive { GaugeSign::Plus } else { GaugeSign::Minus };
            for &aa in &a.gauge_a {
                let g = GaugeFunction::new(aa, sign, b.c_star)?;
                let cmp = gauge_comparison(&mu, &g, &radii, length)?;
                for c in &cmp.centers {
                    for (r, q) in radii.iter().zip(&c.ratios) {
                        let _ = writeln!(
                            csv,
                            "{},{aa:.16e},{:.16e},{:.16e},{:.16e},{r:.16e},{q:.16e}",
                            sign.as_str(),
                            c.center.x,
                            c.center.y,
                            c.weight
                        );
                    }
                }
                if gauge_rows.is_empty() {
                    report = report.with_gauge(&cmp);
                }
                let k = cmp.counts;
                gauge_rows.push(GaugeSummary {
                    sign,
                    a: aa,
                    c_star: b.c_star,
                    increasing: k.increasing,
                    decreasing: k.decreasing,
                    flat: k.flat,
                    below_gauge_at_finest: k.below_gauge_at_finest,
                });
            }
        }
        self.emit("gauge_ratios.csv", &csv)?;
        let mut csv = String::from("sign,A,c_star,increasing,decreasing,flat,below_gauge_at_finest\n");
        for g in &gauge_rows {
            let _ = writeln!(
                csv,
                "{},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
                g.sign.as_str(),
                g.a,
                g.c_star,
                g.increasing,
                g.decreasing,
                g.flat,
                g.below_gauge_at_finest
            );
        }
        self.emit("gauge_summary.csv", &csv)?;
        self.emit("dimension.txt", &report.to_text())?;
        self.emit("dimension_centers.csv", &report.centers_csv())?;

        let summary = AnalysisSummary {
            p,
            flux_mean,
            flux_spread,
            windings_all_minus_one: all_minus_one,
            winding_differences_zero,
            excluded_area,
            branches,
            local_dimension: report.local_dimension,
            local_ci: report.local_ci,
            information_dimension: report.information.slope,
            information_ci: (report.information.ci_low, report.information.ci_high),
            boundary_box_dimension: report.boundary_box.slope,
            radii,
            gauge: gauge_rows,
        };
        let json = serde_json::to_string_pretty(&summary).expect("summary serializes") + "\n";
        self.emit(SUMMARY_FILE, &json)?;
        let v = &mut self.manifest.values;
        v.insert("flux_spread".into(), flux_spread);
        v.insert("information_dimension".into(), summary.information_dimension);
        v.insert("local_dimension".into(), summary.local_dimension);
        self.finish_stage("analyze", start)?;
        println!(
            "analyze: I0 spread {:.3e}, windings {}, information dimension {:.4} [{:.4}, {:.4}]",
            flux_spread,
            if all_minus_one { "all -1" } else { "NOT all -1" },
            summary.information_dimension,
            summary.information_ci.0,
            summary.information_ci.1
        );
        Ok(())
    }

    fn report(&mut self) -> Result<()> {
        let start = Instant::now();
        self.resume(&[MESH_FILE, FIELD_FILE, MEASURE_FILE, SUMMARY_FILE])?;
        let (_, u) = self.load_field()?;
        let summary: AnalysisSummary = serde_json::from_str(&std::fs::read_to_string(self.path(SUMMARY_FILE))?)
            .map_err(|e| Error::Parse(format!("summary: {e}")))?;
        let f = self.cfg.build_integrand()?;
        let s = report_text(&self.manifest, &summary, &f, &u, self.cfg.seed)?;
        self.emit(REPORT_FILE, &s)?;
        self.finish_stage("report", start)?;
        println!("report: {}", self.path(REPORT_FILE).display());
        Ok(())
    }
}

fn report_text(m: &RunManifest, summary: &AnalysisSummary, f: &Integrand, u: &ScalarField, seed: u64) -> Result<String> {
    let mut s = String::new();
    let kv = |s: &mut String, k: &str, v: f64| {
        let _ = writeln!(s, "{k}: {v:.16e}");
    };
    // Stage timings stay in the manifest so that the report is reproducible.
    let _ = writeln!(s, "[run]\nsoftware: {}\nseed: {}", m.software, m.seed);
    s.push('\n');

    let _ = writeln!(s, "[integrand]");
    kv(&mut s, "p", f.p());
    let sc = structure_constants(f)?;
    kv(&mut s, "M", sc.m);
    kv(&mut s, "M_prime", sc.m_prime);
    kv(&mut s, "c_star_mono", sc.c_star_mono);
    let est = verify_delta_monotone(f, 10_000, (0.1, 10.0), seed)?;
    kv(&mut s, "delta_hat", est.delta_hat);
    let _ = writeln!(s, "monotone: {}", est.monotone);
    if est.monotone {
        kv(&mut s, "K_from_delta_hat", quasiconformal_k(est.delta_hat.min(1.0))?);
    }
    s.push('\n');

    let _ = writeln!(s, "[manifest_values]");
    for (k, v) in &m.values {
        kv(&mut s, k, *v);
    }
    s.push('\n');

    let _ = writeln!(s, "[diagnostics]");
    for d in [0.5, 2.0] {
        match fundamental_inequality(u, d) {
            Ok(fi) => kv(&mut s, &format!("fundamental_inequality_c_d{d}"), fi.c),
            Err(_) => {
                let _ = writeln!(s, "fundamental_inequality_c_d{d}: none");
            }
        }
    }
    s.push('\n');

    let _ = writeln!(s, "[analysis]");
    kv(&mut s, "flux_mean", summary.flux_mean);
    kv(&mut s, "flux_spread", summary.flux_spread);
    let _ = writeln!(s, "windings_all_minus_one: {}", summary.windings_all_minus_one);
    let _ = writeln!(s, "winding_differences_zero: {}", summary.winding_differences_zero);
    kv(&mut s, "local_dimension", summary.local_dimension);
    kv(&mut s, "information_dimension", summary.information_dimension);
    kv(&mut s, "information_ci95_low", summary.information_ci.0);
    kv(&mut s, "information_ci95_high", summary.information_ci.1);
    kv(&mut s, "boundary_box_dimension", summary.boundary_box_dimension);
    for b in &summary.branches {
        let name = b.branch.as_str();
        kv(&mut s, &format!("c_star_hat_{name}"), b.c_star_hat);
        kv(&mut s, &format!("moment_slope_max_{name}"), b.max_abs_slope);
        let worst = b.exceptional_constants.iter().map(|c| c.1).fold(0.0, f64::max);
        kv(&mut s, &format!("exceptional_constant_max_{name}"), worst);
    }
    Ok(s)
}

/// Entry point of the `fharm` binary.
pub fn main() -> ! {
    std::process::exit(main_with_args(std::env::args_os()))
}
