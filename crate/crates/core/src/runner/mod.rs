//! Reproduction harness: resolves run configurations, drives the solvers and
//! writes one directory of CSV artifacts per sweep point.

pub mod config;
pub mod fit;

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::bath::{discretize, DiscretizedBath};
use crate::chain::{lanczos_tridiagonalize, stieltjes_coefficients, ChainHamiltonian, RecurrenceCoefficients};
use crate::error::{Error, Result};
use crate::experiment::{run_distinguishability_experiment, run_exact_experiment, write_snapshot_csv, ExperimentRecord, ExperimentSpec};
use crate::measures::{
    audit_bounds, fidelity_decomposition, gains_losses, nm_measure, write_nm_csv, write_traces_csv, AuditReport, ChannelSeries,
    Direction, DirectionGrid, DistinguishabilityTrace, GainLossLedger, NMResult,
};
use crate::mps::{ChainModel, TruncationPolicy};
use crate::rwa::{rates_of_gamma, solve_for_density, write_gamma_csv, GammaTrajectory, RatePair};

pub use config::{ChainMethod, ConfigTemplate, ModelKind, RunConfig, SweepPoint};
pub use fit::{fit_decay_rate, fit_trace, DecayFit, FitWindow};

pub const VERSION: &str = concat!("qmem ", env!("CARGO_PKG_VERSION"));

/// What a run computes and which artifacts it writes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Task {
    RwaEvolve,
    FullEvolve,
    ChainMap,
    NmScan,
    FitRates,
    AuditBounds,
    OracleEd,
}

impl Task {
    pub fn name(self) -> &'static str {
        match self {
            Task::RwaEvolve => "rwa-evolve",
            Task::FullEvolve => "full-evolve",
            Task::ChainMap => "chain-map",
            Task::NmScan => "nm-scan",
            Task::FitRates => "fit-rates",
            Task::AuditBounds => "audit-bounds",
            Task::OracleEd => "oracle-ed",
        }
    }
}

/// Measures derived from a channel series.
#[derive(Debug)]
pub struct Analysis {
    pub series: ChannelSeries,
    /// Traces along x, y and z.
    pub axes: Vec<DistinguishabilityTrace>,
    pub ledgers: [GainLossLedger; 3],
    pub nm: NMResult,
    pub audit: AuditReport,
    /// `F_opt` rebuilt from the lab-frame gains and losses.
    pub decomposition: Vec<f64>,
    pub fits: Vec<(String, Result<DecayFit>)>,
}

impl Analysis {
    pub fn fopt(&self) -> Vec<f64> {
        self.series.optimal_fidelity()
    }

    pub fn rate(&self, axis: usize) -> Option<f64> {
        self.fits[axis].1.as_ref().ok().map(|f| f.rate)
    }
}

pub const AXIS_LABELS: [&str; 3] = ["x", "y", "z"];

pub fn analyze(series: ChannelSeries, scan: &[Direction], window: FitWindow) -> Result<Analysis> {
    let axes = series.traces(&[Direction::x(), Direction::y(), Direction::z()])?;
    let ledgers: [GainLossLedger; 3] =
        axes.iter().map(gains_losses).collect::<Result<Vec<_>>>()?.try_into().unwrap();
    let nm = nm_measure(&series.traces(scan)?)?;
    let audit = audit_bounds(&nm, &series)?;
    let decomposition = fidelity_decomposition(&ledgers)?;
    let fits = axes
        .iter()
        .zip(AXIS_LABELS)
        .map(|(t, l)| (l.to_string(), fit_trace(l, t, window)))
        .collect();
    Ok(Analysis { series, axes, ledgers, nm, audit, decomposition, fits })
}

/// Everything a point produced; fields depend on the model.
#[derive(Debug, Default)]
pub struct PointResult {
    pub gamma: Option<GammaTrajectory>,
    pub rates: Option<RatePair>,
    pub chain: Option<RecurrenceCoefficients>,
    pub record: Option<ExperimentRecord>,
    pub analysis: Option<Analysis>,
}

fn window(cfg: &RunConfig) -> FitWindow {
    FitWindow { t_start: cfg.fit.t_start, t_end: cfg.fit.t_end, noise_floor: cfg.fit.noise_floor }
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(dir.join(name))?))
}

/// Solves the rotating-wave model and analyzes the resulting channel on the
/// thinned output grid.
pub fn run_rwa(cfg: &RunConfig) -> Result<PointResult> {
    let b = &cfg.bath;
    let full = solve_for_density(&b.density(), b.n_omega, b.scheme, b.omega_s, cfg.rwa.dt, cfg.rwa.horizon)?;
    let full_rates = rates_of_gamma(&full, cfg.rwa.rate_floor);
    let stride = cfg.rwa.output_stride;
    let keep = |k: &usize| k % stride == 0;
    let gamma = GammaTrajectory::new(
        full.grid().subsample(stride)?,
        full.values().iter().enumerate().filter(|(k, _)| keep(k)).map(|(_, v)| *v).collect(),
    )?;
    let thin = |v: &[f64]| -> Vec<f64> { v.iter().enumerate().filter(|(k, _)| keep(k)).map(|(_, v)| *v).collect() };
    let rates = RatePair {
        lamb_shift: thin(&full_rates.lamb_shift),
        damping_rate: thin(&full_rates.damping_rate),
        valid: full_rates.valid.iter().enumerate().filter(|(k, _)| keep(k)).map(|(_, v)| *v).collect(),
    };
    let scan = DirectionGrid::polar(cfg.measure.theta_samples)?.directions();
    let analysis = analyze(gamma.channel_series(), &scan, window(cfg))?;
    Ok(PointResult { gamma: Some(gamma), rates: Some(rates), analysis: Some(analysis), ..Default::default() })
}

fn discretized(cfg: &RunConfig) -> Result<DiscretizedBath> {
    discretize(&cfg.bath.density(), cfg.bath.n_omega, cfg.bath.scheme)
}

pub fn chain_coefficients(cfg: &RunConfig) -> Result<RecurrenceCoefficients> {
    let bath = discretized(cfg)?;
    match cfg.chain.method {
        ChainMethod::Lanczos => lanczos_tridiagonalize(&bath, cfg.chain.length),
        ChainMethod::Stieltjes => stieltjes_coefficients(&bath, cfg.chain.length),
    }
}

fn chain_model(cfg: &RunConfig) -> Result<(Option<RecurrenceCoefficients>, ChainModel)> {
    let (coeffs, chain) = if cfg.chain.length == 0 {
        (None, ChainHamiltonian::empty(cfg.chain.coupling))
    } else {
        let c = chain_coefficients(cfg)?;
        let h = ChainHamiltonian::from_coefficients(&c, cfg.chain.coupling);
        (Some(c), h)
    };
    Ok((coeffs, ChainModel::new(chain, cfg.bath.omega_s, cfg.mps.n_max)?))
}

fn experiment_spec(cfg: &RunConfig, model: ChainModel, checkpoint_dir: Option<PathBuf>) -> ExperimentSpec {
    ExperimentSpec {
        model,
        policy: TruncationPolicy {
            max_bond: if cfg.mps.max_bond == 0 { usize::MAX } else { cfg.mps.max_bond },
            cutoff: cfg.mps.cutoff, n_max: cfg.mps.n_max },
        dt: cfg.mps.dt,
        horizon: cfg.mps.horizon,
        sample_stride: cfg.mps.sample_stride,
        probes: cfg.mps.probes,
        checkpoint_dir,
    }
}

/// Chain mapping plus MPS evolution of the probe states. A failed step
/// leaves a checkpoint in `checkpoint_dir` when one is given.
pub fn run_full(cfg: &RunConfig, checkpoint_dir: Option<PathBuf>) -> Result<PointResult> {
    let (chain, model) = chain_model(cfg)?;
    let spec = experiment_spec(cfg, model, checkpoint_dir);
    let scan = DirectionGrid::new(cfg.measure.theta_samples, cfg.measure.phi_samples)?.directions();
    let (record, _) = run_distinguishability_experiment(&spec, &[])?;
    let analysis = analyze(record.series.clone(), &scan, window(cfg))?;
    Ok(PointResult { chain, record: Some(record), analysis: Some(analysis), ..Default::default() })
}

/// Same model and outputs as [`run_full`] with exact state-vector
/// propagation instead of truncated Trotter steps.
pub fn oracle_exact_diag(cfg: &RunConfig) -> Result<PointResult> {
    let (chain, model) = chain_model(cfg)?;
    let spec = experiment_spec(cfg, model, None);
    let scan = DirectionGrid::new(cfg.measure.theta_samples, cfg.measure.phi_samples)?.directions();
    let record = run_exact_experiment(&spec)?;
    let analysis = analyze(record.series.clone(), &scan, window(cfg))?;
    Ok(PointResult { chain, record: Some(record), analysis: Some(analysis), ..Default::default() })
}

fn write_decomposition(dir: &Path, a: &Analysis) -> Result<()> {
    let mut w = create(dir, "decomposition.csv")?;
    writeln!(w, "t,F_opt,F_decomposition,N_x,P_x,N_y,P_y,N_z,P_z")?;
    let g = a.series.grid();
    for (k, (f, fd)) in a.fopt().iter().zip(&a.decomposition).enumerate() {
        write!(w, "{:.6},{f:.12e},{fd:.12e}", g.time(k))?;
        for l in &a.ledgers {
            write!(w, ",{:.12e},{:.12e}", l.gains[k], l.losses[k])?;
        }
        writeln!(w)?;
    }
    w.flush()?;
    Ok(())
}

fn write_audit(dir: &Path, a: &Analysis) -> Result<()> {
    let mut w = create(dir, "audit.txt")?;
    write!(w, "{}", a.audit)?;
    w.flush()?;
    Ok(())
}

fn write_fits(dir: &Path, a: &Analysis) -> Result<()> {
    let mut w = create(dir, "fits.csv")?;
    fit::write_fits_csv(&mut w, &a.fits)?;
    w.flush()?;
    Ok(())
}

fn write_analysis(dir: &Path, task: Task, a: &Analysis) -> Result<()> {
    let all = matches!(task, Task::RwaEvolve | Task::FullEvolve | Task::OracleEd);
    if all {
        let mut w = create(dir, "traces.csv")?;
        write_traces_csv(&mut w, &a.axes)?;
        w.flush()?;
        write_decomposition(dir, a)?;
    }
    if all || task == Task::NmScan {
        let mut w = create(dir, "nm_scan.csv")?;
        write_nm_csv(&mut w, &a.nm)?;
        w.flush()?;
    }
    if all || task == Task::AuditBounds {
        write_audit(dir, a)?;
    }
    if all || task == Task::FitRates {
        write_fits(dir, a)?;
    }
    Ok(())
}

/// Writes the chain coefficients and, as a cross-check, the largest
/// relative deviation from the other recurrence method.
fn run_chain_map(cfg: &RunConfig, dir: &Path) -> Result<PointResult> {
    let bath = discretized(cfg)?;
    let lanczos = lanczos_tridiagonalize(&bath, cfg.chain.length)?;
    let stieltjes = stieltjes_coefficients(&bath, cfg.chain.length)?;
    let rel = |a: &[f64], b: &[f64]| {
        a.iter().zip(b).map(|(x, y)| (x - y).abs() / x.abs().max(y.abs()).max(f64::MIN_POSITIVE)).fold(0.0, f64::max)
    };
    let mut w = create(dir, "chain_report.txt")?;
    writeln!(w, "length = {}", cfg.chain.length)?;
    writeln!(w, "total_weight = {:.15e}", bath.total_weight())?;
    writeln!(w, "max_rel_dev_onsite = {:.3e}", rel(&lanczos.onsite, &stieltjes.onsite))?;
    writeln!(w, "max_rel_dev_hopping_sq = {:.3e}", rel(&lanczos.hopping_sq, &stieltjes.hopping_sq))?;
    w.flush()?;
    let chain = match cfg.chain.method {
        ChainMethod::Lanczos => lanczos,
        ChainMethod::Stieltjes => stieltjes,
    };
    Ok(PointResult { chain: Some(chain), ..Default::default() })
}

fn write_chain(dir: &Path, c: &RecurrenceCoefficients) -> Result<()> {
    let mut w = create(dir, "chain.csv")?;
    c.write_csv(&mut w)?;
    w.flush()?;
    Ok(())
}

/// Runs one point of `task` and writes its artifacts into `dir`.
pub fn run_point(task: Task, cfg: &RunConfig, dir: &Path) -> Result<PointResult> {
    cfg.validate()?;
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join("resolved_config.toml"), cfg.to_toml())?;
    std::fs::write(dir.join("provenance.txt"), format!("version = \"{VERSION}\"\ntask = \"{}\"\n", task.name()))?;

    let kind = match task {
        Task::RwaEvolve => ModelKind::Rwa,
        Task::FullEvolve | Task::OracleEd => ModelKind::Full,
        Task::ChainMap => return run_chain_map(cfg, dir).and_then(|r| {
            write_chain(dir, r.chain.as_ref().unwrap())?;
            Ok(r)
        }),
        Task::NmScan | Task::FitRates | Task::AuditBounds => cfg.model.kind,
    };
    let result = match (task, kind) {
        (Task::OracleEd, _) => oracle_exact_diag(cfg)?,
        (_, ModelKind::Rwa) => run_rwa(cfg)?,
        (_, ModelKind::Full) => run_full(cfg, Some(dir.join("checkpoint")))?,
    };
    if let (Some(g), Some(r)) = (&result.gamma, &result.rates) {
        let mut w = create(dir, "gamma.csv")?;
        write_gamma_csv(&mut w, g, r)?;
        w.flush()?;
    }
    if let Some(c) = &result.chain {
        write_chain(dir, c)?;
    }
    if let Some(rec) = &result.record {
        let mut w = create(dir, "snapshots.csv")?;
        write_snapshot_csv(&mut w, rec)?;
        w.flush()?;
    }
    if let Some(a) = &result.analysis {
        write_analysis(dir, task, a)?;
    }
    Ok(result)
}

/// Outcome of one sweep point as listed in `summary.csv`.
#[derive(Debug)]
pub struct PointStatus {
    pub point: SweepPoint,
    /// Headline numbers, absent for tasks without a channel analysis.
    pub outcome: std::result::Result<Option<PointMetrics>, Error>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointMetrics {
    pub fopt_final: f64,
    pub nm_final: f64,
    pub violations: usize,
    pub d_final: [f64; 3],
}

fn metrics(r: &PointResult) -> Option<PointMetrics> {
    r.analysis.as_ref().map(|a| PointMetrics {
        fopt_final: *a.fopt().last().unwrap(),
        nm_final: a.nm.final_value(),
        violations: a.audit.total_violations(),
        d_final: [0, 1, 2].map(|i| *a.axes[i].values().last().unwrap()),
    })
}

/// Runs every point of the sweep; a failing point is recorded and does not
/// stop its siblings.
pub fn run_sweep(task: Task, points: &[SweepPoint], out: &Path, threads: usize) -> Result<Vec<PointStatus>> {
    std::fs::create_dir_all(out)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?;
    let statuses: Vec<PointStatus> = pool.install(|| {
        points
            .par_iter()
            .map(|p| {
                let dir = out.join(p.dir_name());
                let outcome = run_point(task, &p.config, &dir).map(|r| metrics(&r));
                if let Err(e) = &outcome {
                    let _ = std::fs::write(dir.join("error.txt"), format!("{e}\n"));
                }
                PointStatus { point: p.clone(), outcome }
            })
            .collect()
    });
    let mut w = create(out, "summary.csv")?;
    writeln!(w, "point,dir,status,F_opt_final,N_final,D_x_final,D_y_final,D_z_final,audit_violations,message")?;
    for s in &statuses {
        match &s.outcome {
            Ok(None) => writeln!(w, "{},{},ok,,,,,,,", s.point.index, s.point.dir_name())?,
            Ok(Some(m)) => writeln!(
                w,
                "{},{},ok,{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{},",
                s.point.index,
                s.point.dir_name(),
                m.fopt_final,
                m.nm_final,
                m.d_final[0],
                m.d_final[1],
                m.d_final[2],
                m.violations
            )?,
            Err(e) => writeln!(
                w,
                "{},{},failed,,,,,,,\"{}\"",
                s.point.index,
                s.point.dir_name(),
                e.to_string().replace('"', "'")
            )?,
        }
    }
    w.flush()?;
    Ok(statuses)
}

/// Reads `t` and the `D_x, D_y, D_z` columns of a snapshot CSV.
pub fn read_snapshot_csv(path: &Path) -> Result<(Vec<f64>, [Vec<f64>; 3])> {
    let bad = |e: csv::Error| Error::invalid(format!("{}: {e}", path.display()));
    let mut r = csv::Reader::from_path(path).map_err(bad)?;
    let header = r.headers().map_err(bad)?.clone();
    let col = |name: &str| {
        header
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| Error::invalid(format!("snapshot file lacks column `{name}`")))
    };
    let idx = [col("t")?, col("D_x")?, col("D_y")?, col("D_z")?];
    let mut t = Vec::new();
    let mut d: [Vec<f64>; 3] = Default::default();
    for (n, rec) in r.records().enumerate() {
        let rec = rec.map_err(bad)?;
        let get = |i: usize| -> Result<f64> {
            rec.get(i)
                .and_then(|f| f.trim().parse().ok())
                .ok_or_else(|| Error::invalid(format!("row {}: bad value in column {}", n + 1, &header[i])))
        };
        t.push(get(idx[0])?);
        for a in 0..3 {
            d[a].push(get(idx[a + 1])?);
        }
    }
    Ok((t, d))
}

/// Fits the axis traces of an existing snapshot file.
pub fn fit_snapshot(path: &Path, window: FitWindow) -> Result<Vec<(String, Result<DecayFit>)>> {
    let (t, d) = read_snapshot_csv(path)?;
    Ok(AXIS_LABELS.iter().zip(&d).map(|(l, v)| (l.to_string(), fit_decay_rate(l, &t, v, window))).collect())
}

pub fn write_fits_file(path: &Path, fits: &[(String, Result<DecayFit>)]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    fit::write_fits_csv(&mut w, fits)?;
    w.flush()?;
    Ok(())
}
