//! Distinguishability traces, accumulated memory gains and losses, the
//! trace-distance non-Markovianity over a direction scan, and audits of the
//! inequalities tying them to the optimal recovery fidelity.

use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt;
use std::io::Write;

use nalgebra::Vector3;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::qubit::{direction, AffineChannel};
use crate::tolerances;

/// A point on the Bloch sphere, kept in polar form for reporting.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Direction {
    pub theta: f64,
    pub phi: f64,
}

impl Direction {
    pub fn new(theta: f64, phi: f64) -> Self {
        Self { theta, phi }
    }

    pub fn from_vector(v: &Vector3<f64>) -> Self {
        let u = v.normalize();
        let theta = u.z.clamp(-1.0, 1.0).acos();
        let mut phi = u.y.atan2(u.x);
        if phi < 0.0 {
            phi += 2.0 * PI;
        }
        Self { theta, phi }
    }

    pub fn vector(&self) -> Vector3<f64> {
        direction(self.theta, self.phi)
    }

    pub fn x() -> Self {
        Self::new(FRAC_PI_2, 0.0)
    }

    pub fn y() -> Self {
        Self::new(FRAC_PI_2, FRAC_PI_2)
    }

    pub fn z() -> Self {
        Self::new(0.0, 0.0)
    }
}

/// Right-handed orthonormal frame `[x', y', z']` with `z'` along `z`.
pub fn frame_around(z: &Direction) -> [Direction; 3] {
    let zv = z.vector();
    // seed with the lab axis least aligned with z'
    let seed = [Vector3::x(), Vector3::y(), Vector3::z()]
        .into_iter()
        .min_by(|a, b| a.dot(&zv).abs().total_cmp(&b.dot(&zv).abs()))
        .unwrap();
    let xv = (seed - zv * seed.dot(&zv)).normalize();
    let yv = zv.cross(&xv);
    [Direction::from_vector(&xv), Direction::from_vector(&yv), *z]
}

/// `D(t)` for the antipodal pair along `direction`.
#[derive(Debug, Clone, PartialEq)]
pub struct DistinguishabilityTrace {
    pub direction: Direction,
    grid: TimeGrid,
    values: Vec<f64>,
}

impl DistinguishabilityTrace {
    pub fn new(direction: Direction, grid: TimeGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::invalid("trace length does not match its grid"));
        }
        if (values[0] - 1.0).abs() > tolerances::PSD_SLACK {
            return Err(Error::invalid(format!("trace starts at {} instead of 1", values[0])));
        }
        if let Some(v) = values.iter().find(|v| !(**v >= 0.0 && **v <= 1.0 + tolerances::PSD_SLACK)) {
            return Err(Error::invalid(format!("distinguishability {v} outside [0, 1]")));
        }
        Ok(Self { direction, grid, values })
    }

    pub fn grid(&self) -> TimeGrid {
        self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// Accumulated gains `N(t)` and losses `P(t)` along one direction.
#[derive(Debug, Clone, PartialEq)]
pub struct GainLossLedger {
    pub direction: Direction,
    pub gains: Vec<f64>,
    pub losses: Vec<f64>,
}

impl GainLossLedger {
    pub fn len(&self) -> usize {
        self.gains.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gains.is_empty()
    }
}

pub fn gains_losses(trace: &DistinguishabilityTrace) -> Result<GainLossLedger> {
    let d = trace.values();
    if d.len() < 2 {
        return Err(Error::invalid("need at least two grid points for gains and losses"));
    }
    let mut gains = Vec::with_capacity(d.len());
    let mut losses = Vec::with_capacity(d.len());
    let (mut n, mut p) = (0.0, 0.0);
    gains.push(0.0);
    losses.push(0.0);
    for w in d.windows(2) {
        let inc = w[1] - w[0];
        if inc > 0.0 {
            n += inc;
        } else {
            p += inc;
        }
        gains.push(n);
        losses.push(p);
    }
    Ok(GainLossLedger { direction: trace.direction, gains, losses })
}

/// Scan directions `n(theta, phi)` with `theta` in `[0, pi/2]` and `phi` in
/// `[0, pi)`; antipodes give the same pair and are left out.
#[derive(Debug, Clone, PartialEq)]
pub struct DirectionGrid {
    pub thetas: Vec<f64>,
    pub phis: Vec<f64>,
}

impl DirectionGrid {
    pub fn new(theta_samples: usize, phi_samples: usize) -> Result<Self> {
        if theta_samples < 2 || phi_samples < 1 {
            return Err(Error::invalid("direction grid needs at least 2 polar and 1 azimuthal samples"));
        }
        let thetas = (0..theta_samples)
            .map(|i| FRAC_PI_2 * i as f64 / (theta_samples - 1) as f64)
            .collect();
        let phis = (0..phi_samples).map(|j| PI * j as f64 / phi_samples as f64).collect();
        Ok(Self { thetas, phis })
    }

    /// Polar scan only, for models symmetric under rotations about z.
    pub fn polar(theta_samples: usize) -> Result<Self> {
        Self::new(theta_samples, 1)
    }

    /// Directions in tie-breaking order: increasing theta, then phi.
    pub fn directions(&self) -> Vec<Direction> {
        self.thetas
            .iter()
            .flat_map(|&t| self.phis.iter().map(move |&p| Direction::new(t, p)))
            .collect()
    }
}

impl Default for DirectionGrid {
    fn default() -> Self {
        Self::new(31, 16).unwrap()
    }
}

/// Affine channel at every point of a time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSeries {
    grid: TimeGrid,
    channels: Vec<AffineChannel>,
}

impl ChannelSeries {
    pub fn new(grid: TimeGrid, channels: Vec<AffineChannel>) -> Result<Self> {
        if channels.len() != grid.len() {
            return Err(Error::invalid("channel series length does not match its grid"));
        }
        Ok(Self { grid, channels })
    }

    pub fn grid(&self) -> TimeGrid {
        self.grid
    }

    pub fn channels(&self) -> &[AffineChannel] {
        &self.channels
    }

    /// `D_n(t) = |M(t) n|`, valid for any map linear in the initial state.
    pub fn trace_along(&self, dir: Direction) -> Result<DistinguishabilityTrace> {
        let n = dir.vector();
        let values = self.channels.iter().map(|c| c.distinguishability(&n)).collect();
        DistinguishabilityTrace::new(dir, self.grid, values)
    }

    pub fn traces(&self, dirs: &[Direction]) -> Result<Vec<DistinguishabilityTrace>> {
        dirs.par_iter().map(|d| self.trace_along(*d)).collect()
    }

    pub fn optimal_fidelity(&self) -> Vec<f64> {
        self.channels.iter().map(crate::qubit::optimal_fidelity_from_channel).collect()
    }
}

/// Non-Markovianity `N(t)` with the maximizing direction at each time.
#[derive(Debug, Clone, PartialEq)]
pub struct NMResult {
    pub grid: TimeGrid,
    pub nm_value: Vec<f64>,
    pub best_direction: Vec<Direction>,
}

impl NMResult {
    pub fn final_value(&self) -> f64 {
        *self.nm_value.last().unwrap()
    }
}

/// `N(t)` as the maximum accumulated gain over the scanned antipodal pairs.
/// Ties go to the first trace, so traces should come in `DirectionGrid`
/// order.
pub fn nm_measure(traces: &[DistinguishabilityTrace]) -> Result<NMResult> {
    let first = traces.first().ok_or_else(|| Error::invalid("no traces to scan"))?;
    let grid = first.grid();
    if traces.iter().any(|t| t.grid() != grid) {
        return Err(Error::invalid("traces do not share a time grid"));
    }
    let ledgers: Vec<GainLossLedger> = traces.par_iter().map(gains_losses).collect::<Result<_>>()?;
    let mut nm_value = vec![f64::NEG_INFINITY; grid.len()];
    let mut best_direction = vec![first.direction; grid.len()];
    for l in &ledgers {
        for (k, g) in l.gains.iter().enumerate() {
            if *g > nm_value[k] {
                nm_value[k] = *g;
                best_direction[k] = l.direction;
            }
        }
    }
    Ok(NMResult { grid, nm_value, best_direction })
}

fn check_orthogonal(ledgers: &[GainLossLedger; 3]) -> Result<()> {
    let v: Vec<_> = ledgers.iter().map(|l| l.direction.vector()).collect();
    for (a, b) in [(0, 1), (0, 2), (1, 2)] {
        let d = v[a].dot(&v[b]).abs();
        if d > tolerances::ORTHOGONALITY {
            return Err(Error::invalid(format!("frame directions {a} and {b} overlap by {d:e}")));
        }
    }
    if ledgers.iter().any(|l| l.len() != ledgers[0].len()) {
        return Err(Error::invalid("frame ledgers have different lengths"));
    }
    Ok(())
}

/// `F_opt(t) = 1 + (1/6) sum_a (N_a(t) + P_a(t))` for three orthogonal
/// directions.
pub fn fidelity_decomposition(ledgers: &[GainLossLedger; 3]) -> Result<Vec<f64>> {
    check_orthogonal(ledgers)?;
    Ok((0..ledgers[0].len())
        .map(|k| 1.0 + ledgers.iter().map(|l| l.gains[k] + l.losses[k]).sum::<f64>() / 6.0)
        .collect())
}

/// The inequalities audited at every time.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Bound {
    /// `N <= |sum P| - N_x' - N_y'` in the frame around the optimal direction.
    NmBelowLossesMinusGains,
    /// `N <= |sum P|`.
    NmBelowLosses,
    /// `|sum P| >= sum N` in the frame around the optimal direction.
    LossesExceedGains,
    /// `|sum P| >= sum N` in the lab axis frame.
    LossesExceedGainsAxes,
    /// `F_opt <= 1 + N/2 + (1/6) sum P`.
    FidelityUpperBound,
    /// `F_opt <= 1`.
    FidelityAtMostOne,
}

impl Bound {
    pub const ALL: [Bound; 6] = [
        Bound::NmBelowLossesMinusGains,
        Bound::NmBelowLosses,
        Bound::LossesExceedGains,
        Bound::LossesExceedGainsAxes,
        Bound::FidelityUpperBound,
        Bound::FidelityAtMostOne,
    ];

    pub fn label(&self) -> &'static str {
        match self {
            Bound::NmBelowLossesMinusGains => "nm_le_losses_minus_frame_gains",
            Bound::NmBelowLosses => "nm_le_losses",
            Bound::LossesExceedGains => "losses_ge_gains_optimal_frame",
            Bound::LossesExceedGainsAxes => "losses_ge_gains_axis_frame",
            Bound::FidelityUpperBound => "fopt_le_nm_losses_bound",
            Bound::FidelityAtMostOne => "fopt_le_one",
        }
    }
}

/// Margins (rhs - lhs, nonnegative when satisfied) of one bound over time.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundCheck {
    pub bound: Bound,
    pub margins: Vec<f64>,
}

impl BoundCheck {
    pub fn violations(&self, tol: f64) -> usize {
        self.margins.iter().filter(|m| **m < -tol).count()
    }

    /// Smallest margin and its grid index.
    pub fn worst(&self) -> (usize, f64) {
        self.margins
            .iter()
            .copied()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .unwrap()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AuditReport {
    pub grid: TimeGrid,
    pub checks: Vec<BoundCheck>,
    /// Times at which a frame direction out-gained every scanned direction;
    /// `N` is raised to that gain there.
    pub nm_refinements: usize,
    pub tolerance: f64,
}

impl AuditReport {
    pub fn total_violations(&self) -> usize {
        self.checks.iter().map(|c| c.violations(self.tolerance)).sum()
    }

    pub fn check(&self, bound: Bound) -> &BoundCheck {
        self.checks.iter().find(|c| c.bound == bound).unwrap()
    }
}

impl fmt::Display for AuditReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "[audit]")?;
        writeln!(f, "tolerance = {:e}", self.tolerance)?;
        writeln!(f, "samples = {}", self.grid.len())?;
        writeln!(f, "nm_refinements = {}", self.nm_refinements)?;
        writeln!(f, "total_violations = {}", self.total_violations())?;
        for c in &self.checks {
            let (k, m) = c.worst();
            writeln!(f)?;
            writeln!(f, "[bound.{}]", c.bound.label())?;
            writeln!(f, "violations = {}", c.violations(self.tolerance))?;
            writeln!(f, "worst_margin = {m:.12e}")?;
            writeln!(f, "worst_time = {:.6}", self.grid.time(k))?;
            writeln!(f, "final_margin = {:.12e}", c.margins.last().unwrap())?;
        }
        Ok(())
    }
}

fn frame_ledgers(series: &ChannelSeries, frame: &[Direction; 3]) -> Result<[GainLossLedger; 3]> {
    let l: Vec<GainLossLedger> = frame
        .iter()
        .map(|d| series.trace_along(*d).and_then(|t| gains_losses(&t)))
        .collect::<Result<_>>()?;
    Ok(l.try_into().unwrap())
}

/// Audits the gain/loss inequalities at every time, using at time `t` the
/// frame whose `z'` is the optimal direction found at `t`.
pub fn audit_bounds(nm: &NMResult, series: &ChannelSeries) -> Result<AuditReport> {
    if nm.grid != series.grid() {
        return Err(Error::invalid("NM result and channel series use different grids"));
    }
    let len = nm.grid.len();
    let mut cache: Vec<(Direction, [GainLossLedger; 3])> = Vec::new();
    let axes = frame_ledgers(series, &[Direction::x(), Direction::y(), Direction::z()])?;
    let mut margins = vec![Vec::with_capacity(len); Bound::ALL.len()];
    let mut nm_refinements = 0;

    for k in 0..len {
        let best = nm.best_direction[k];
        let idx = match cache.iter().position(|(d, _)| *d == best) {
            Some(i) => i,
            None => {
                let ledgers = frame_ledgers(series, &frame_around(&best))?;
                check_orthogonal(&ledgers)?;
                cache.push((best, ledgers));
                cache.len() - 1
            }
        };
        let fr = &cache[idx].1;
        let n_z = nm.nm_value[k];
        let n_xy = fr[0].gains[k] + fr[1].gains[k];
        let sum_p = fr.iter().map(|l| l.losses[k]).sum::<f64>();
        let sum_n = n_xy + fr[2].gains[k];
        let n_all = fr.iter().map(|l| l.gains[k]).fold(n_z, f64::max);
        if n_all > n_z {
            nm_refinements += 1;
        }
        let fopt = 1.0 + (sum_n + sum_p) / 6.0;
        let axes_p = axes.iter().map(|l| l.losses[k]).sum::<f64>();
        let axes_n = axes.iter().map(|l| l.gains[k]).sum::<f64>();

        margins[0].push(sum_p.abs() - n_xy - n_z);
        margins[1].push(sum_p.abs() - n_z);
        margins[2].push(sum_p.abs() - sum_n);
        margins[3].push(axes_p.abs() - axes_n);
        margins[4].push(1.0 + 0.5 * n_all + sum_p / 6.0 - fopt);
        margins[5].push(1.0 - fopt);
    }

    Ok(AuditReport {
        grid: nm.grid,
        checks: Bound::ALL
            .iter()
            .zip(margins)
            .map(|(b, m)| BoundCheck { bound: *b, margins: m })
            .collect(),
        nm_refinements,
        tolerance: tolerances::AUDIT,
    })
}

/// Writes `t, direction_theta, direction_phi, D, N, P` for each trace.
pub fn write_traces_csv<W: Write>(mut w: W, traces: &[DistinguishabilityTrace]) -> Result<()> {
    writeln!(w, "t,direction_theta,direction_phi,D,N,P")?;
    for tr in traces {
        let l = gains_losses(tr)?;
        for (k, d) in tr.values().iter().enumerate() {
            writeln!(
                w,
                "{:.6},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e}",
                tr.grid().time(k),
                tr.direction.theta,
                tr.direction.phi,
                d,
                l.gains[k],
                l.losses[k]
            )?;
        }
    }
    Ok(())
}

pub fn write_nm_csv<W: Write>(mut w: W, nm: &NMResult) -> std::io::Result<()> {
    writeln!(w, "t,nm,best_theta,best_phi")?;
    for (k, (v, d)) in nm.nm_value.iter().zip(&nm.best_direction).enumerate() {
        writeln!(w, "{:.6},{:.12e},{:.12e},{:.12e}", nm.grid.time(k), v, d.theta, d.phi)?;
    }
    Ok(())
}
