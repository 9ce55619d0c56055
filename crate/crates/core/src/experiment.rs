//! Distinguishability experiments on the full model: evolve probe states,
//! rebuild the qubit channel at every sample and read off `D_n(t)`.

use std::io::Write;
use std::path::{Path, PathBuf};

use nalgebra::{Matrix2, Matrix3, Vector3};
use num_complex::Complex64 as C;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::measures::{ChannelSeries, Direction, DistinguishabilityTrace};
use crate::mps::exact::{self, SparseHamiltonian};
use crate::mps::{self, ChainModel, CheckpointHeader, MatrixProductState, TrotterPlan, TruncationPolicy};
use crate::qubit::{optimal_fidelity_from_channel, AffineChannel};

/// Which initial states are evolved to reconstruct the channel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProbeSet {
    /// `|e>` and `|g>`; coherences come from the cross term `Tr_env |e(t)><g(t)|`.
    #[default]
    Basis,
    /// `z+`, `z-`, `x+`, `y+`; the remaining images follow by linearity.
    Axes,
}

#[derive(Debug, Clone)]
pub struct ExperimentSpec {
    pub model: ChainModel,
    pub policy: TruncationPolicy,
    pub dt: f64,
    pub horizon: f64,
    pub sample_stride: usize,
    pub probes: ProbeSet,
    /// Where the last sampled probe states are saved if a step fails.
    pub checkpoint_dir: Option<PathBuf>,
}

impl ExperimentSpec {
    fn steps(&self) -> Result<(usize, TimeGrid)> {
        if !(self.dt > 0.0) || !(self.horizon >= 0.0) || self.sample_stride == 0 {
            return Err(Error::invalid("dt and sample_stride must be positive and the horizon nonnegative"));
        }
        let steps = (self.horizon / self.dt).round() as usize;
        let samples = steps / self.sample_stride + 1;
        Ok((steps, TimeGrid::new(self.dt * self.sample_stride as f64, samples)?))
    }
}

/// Channel time series with truncation diagnostics per sample.
#[derive(Debug, Clone)]
pub struct ExperimentRecord {
    pub series: ChannelSeries,
    pub discarded_weight: Vec<f64>,
    pub max_bond: Vec<usize>,
}

impl ExperimentRecord {
    pub fn traces(&self, directions: &[Direction]) -> Result<Vec<DistinguishabilityTrace>> {
        self.series.traces(directions)
    }
}

/// `(tr O sx, tr O sy, tr O sz)` in the (excited, ground) basis.
fn pauli_components(o: &Matrix2<C>) -> Vector3<f64> {
    let (ee, eg, ge, gg) = (o[(0, 0)], o[(0, 1)], o[(1, 0)], o[(1, 1)]);
    Vector3::new((eg + ge).re, (C::i() * (eg - ge)).re, (ee - gg).re)
}

/// Channel from the images of `|e><e|`, `|g><g|` and `|e><g|`.
pub fn channel_from_basis(ee: &Matrix2<C>, gg: &Matrix2<C>, eg: &Matrix2<C>) -> AffineChannel {
    let sx = eg + eg.adjoint();
    let sy = (eg * C::new(0.0, -1.0)) + eg.adjoint() * C::new(0.0, 1.0);
    let mut linear = Matrix3::zeros();
    linear.set_column(0, &(0.5 * pauli_components(&sx)));
    linear.set_column(1, &(0.5 * pauli_components(&sy)));
    linear.set_column(2, &(0.5 * pauli_components(&(ee - gg))));
    AffineChannel { linear, offset: 0.5 * pauli_components(&(ee + gg)) }
}

/// Channel from the images of `z+`, `z-`, `x+`, `y+`.
pub fn channel_from_axes(zp: &Matrix2<C>, zm: &Matrix2<C>, xp: &Matrix2<C>, yp: &Matrix2<C>) -> AffineChannel {
    let (pz, mz) = (pauli_components(zp), pauli_components(zm));
    let q = 0.5 * (pz + mz);
    let mut linear = Matrix3::zeros();
    linear.set_column(0, &(pauli_components(xp) - q));
    linear.set_column(1, &(pauli_components(yp) - q));
    linear.set_column(2, &(0.5 * (pz - mz)));
    AffineChannel { linear, offset: q }
}

fn probe_amplitudes(probes: ProbeSet) -> Vec<[C; 2]> {
    let (o, z, h) = (C::new(1.0, 0.0), C::new(0.0, 0.0), C::new(0.5f64.sqrt(), 0.0));
    match probes {
        ProbeSet::Basis => vec![[o, z], [z, o]],
        ProbeSet::Axes => vec![[o, z], [z, o], [h, h], [h, C::new(0.0, 0.5f64.sqrt())]],
    }
}

fn channel_from_images(probes: ProbeSet, m: &[Matrix2<C>]) -> AffineChannel {
    match probes {
        ProbeSet::Basis => channel_from_basis(&m[0], &m[1], &m[2]),
        ProbeSet::Axes => channel_from_axes(&m[0], &m[1], &m[2], &m[3]),
    }
}

fn mps_images(probes: ProbeSet, states: &[MatrixProductState]) -> Vec<Matrix2<C>> {
    let mut out: Vec<Matrix2<C>> = states.par_iter().map(|s| mps::qubit_transition(s, s)).collect();
    if probes == ProbeSet::Basis {
        out.push(mps::qubit_transition(&states[0], &states[1]));
    }
    out
}

fn dense_images(probes: ProbeSet, states: &[Vec<C>]) -> Vec<Matrix2<C>> {
    let mut out: Vec<Matrix2<C>> = states.iter().map(|s| exact::qubit_transition(s, s)).collect();
    if probes == ProbeSet::Basis {
        out.push(exact::qubit_transition(&states[0], &states[1]));
    }
    out
}

/// Runs the MPS evolution of the probe states in lockstep and returns the
/// channel series together with `D_n(t)` for every requested direction.
pub fn run_distinguishability_experiment(
    spec: &ExperimentSpec,
    directions: &[Direction],
) -> Result<(ExperimentRecord, Vec<DistinguishabilityTrace>)> {
    let record = run_mps(spec)?;
    let traces = record.traces(directions)?;
    Ok((record, traces))
}

fn run_mps(spec: &ExperimentSpec) -> Result<ExperimentRecord> {
    spec.policy.validate()?;
    let (steps, grid) = spec.steps()?;
    let plan = TrotterPlan::new(&spec.model, spec.dt)?;
    let dims = spec.model.phys_dims();
    let mut states = probe_amplitudes(spec.probes)
        .into_iter()
        .map(|a| MatrixProductState::product(a, &dims))
        .collect::<Result<Vec<_>>>()?;

    let mut channels = Vec::with_capacity(grid.len());
    let mut discarded_weight = Vec::with_capacity(grid.len());
    let mut max_bond = Vec::with_capacity(grid.len());
    let mut sample = |states: &[MatrixProductState]| {
        channels.push(channel_from_images(spec.probes, &mps_images(spec.probes, states)));
        discarded_weight.push(states.iter().map(|s| s.discarded_weight()).fold(0.0, f64::max));
        max_bond.push(states.iter().map(|s| s.max_bond()).max().unwrap_or(1));
    };
    sample(&states);
    let mut last_good = (0, spec.checkpoint_dir.as_ref().map(|_| states.clone()));
    for k in 1..=(grid.len() - 1) * spec.sample_stride {
        if let Err(e) = states.par_iter_mut().try_for_each(|s| mps::step(s, &plan, &spec.policy)) {
            let Error::NumericalFailure(m) = e else { return Err(e) };
            let mut msg = format!("{m} (step {k}, t = {:.4})", k as f64 * spec.dt);
            if let (Some(dir), (step, Some(saved))) = (&spec.checkpoint_dir, &last_good) {
                let header = CheckpointHeader { step: *step as u64, dt: spec.dt, policy: spec.policy };
                match save_checkpoints(dir, saved, &header) {
                    Ok(()) => msg.push_str(&format!("; checkpoint of step {step} written to {}", dir.display())),
                    Err(io) => msg.push_str(&format!("; checkpoint could not be written: {io}")),
                }
            }
            return Err(Error::NumericalFailure(msg));
        }
        if k % spec.sample_stride == 0 {
            sample(&states);
            if let Some(saved) = &mut last_good.1 {
                saved.clone_from(&states);
                last_good.0 = k;
            }
        }
    }
    debug_assert!(steps >= (grid.len() - 1) * spec.sample_stride);
    Ok(ExperimentRecord { series: ChannelSeries::new(grid, channels)?, discarded_weight, max_bond })
}

/// Writes `probe<i>.qmps` for every probe state into `dir`.
pub fn save_checkpoints(dir: &Path, states: &[MatrixProductState], header: &CheckpointHeader) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    for (i, s) in states.iter().enumerate() {
        let f = std::io::BufWriter::new(std::fs::File::create(dir.join(format!("probe{i}.qmps")))?);
        mps::write_checkpoint(f, s, header)?;
    }
    Ok(())
}

/// Same experiment with exact state-vector propagation (no Trotter error, no
/// truncation). Small chains only.
pub fn run_exact_experiment(spec: &ExperimentSpec) -> Result<ExperimentRecord> {
    let (_, grid) = spec.steps()?;
    let h = SparseHamiltonian::from_model(&spec.model)?;
    let dims = spec.model.phys_dims();
    let mut states = probe_amplitudes(spec.probes)
        .into_iter()
        .map(|a| exact::product_state(a, &dims))
        .collect::<Result<Vec<_>>>()?;
    let mut channels = vec![channel_from_images(spec.probes, &dense_images(spec.probes, &states))];
    for _ in 1..grid.len() {
        states.par_iter_mut().for_each(|s| h.propagate(s, grid.dt()));
        channels.push(channel_from_images(spec.probes, &dense_images(spec.probes, &states)));
    }
    let n = grid.len();
    Ok(ExperimentRecord { series: ChannelSeries::new(grid, channels)?, discarded_weight: vec![0.0; n], max_bond: vec![0; n] })
}

pub fn write_snapshot_csv<W: Write>(mut w: W, record: &ExperimentRecord) -> std::io::Result<()> {
    writeln!(w, "t,D_x,D_y,D_z,F_opt,discarded_weight,max_bond_used")?;
    let grid = record.series.grid();
    for (k, ch) in record.series.channels().iter().enumerate() {
        writeln!(
            w,
            "{:.6},{:.12e},{:.12e},{:.12e},{:.12e},{:.6e},{}",
            grid.time(k),
            ch.distinguishability(&Vector3::x()),
            ch.distinguishability(&Vector3::y()),
            ch.distinguishability(&Vector3::z()),
            optimal_fidelity_from_channel(ch),
            record.discarded_weight[k],
            record.max_bond[k]
        )?;
    }
    Ok(())
}
