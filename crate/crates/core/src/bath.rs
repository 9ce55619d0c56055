//! Structured spectral densities, their star discretization and the bath
//! two-point correlation kernel.

use std::io::Write;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::TimeGrid;

/// A nonnegative spectral density supported on `[0, omega_max]`.
pub trait Spectral: Sync {
    fn evaluate(&self, omega: f64) -> f64;
    fn omega_max(&self) -> f64;
}

/// Clamped-Gaussian pseudogap density
/// `J(w) = s * eta * w^2 * [1 - h exp(-((w - w0)/eta)^2)]` on `[0, omega_max]`.
///
/// `h < 1` opens a pseudogap around `omega0`, `h > 1` a full gap where the
/// bracket is negative (clamped to zero unless `clamp_negative` is off).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralDensity {
    pub coupling_scale: f64,
    pub h: f64,
    pub omega0: f64,
    pub eta: f64,
    pub omega_max: f64,
    pub clamp_negative: bool,
}

impl Default for SpectralDensity {
    fn default() -> Self {
        Self {
            coupling_scale: 0.1,
            h: 0.1,
            omega0: 1.0,
            eta: 0.05,
            omega_max: 3.0,
            clamp_negative: true,
        }
    }
}

impl SpectralDensity {
    pub fn with_depth(h: f64) -> Self {
        Self { h, ..Self::default() }
    }

    /// Unclamped value of the Gaussian bracket.
    pub fn bracket(&self, omega: f64) -> f64 {
        let x = (omega - self.omega0) / self.eta;
        1.0 - self.h * (-x * x).exp()
    }

    /// Half-width of the region around `omega0` where the bracket is
    /// negative, `eta * sqrt(ln h)`; zero when `h <= 1`.
    pub fn gap_half_width(&self) -> f64 {
        if self.h > 1.0 {
            self.eta * self.h.ln().sqrt()
        } else {
            0.0
        }
    }
}

impl Spectral for SpectralDensity {
    fn evaluate(&self, omega: f64) -> f64 {
        if !(0.0..=self.omega_max).contains(&omega) {
            return 0.0;
        }
        let v = self.coupling_scale * self.eta * omega * omega * self.bracket(omega);
        if self.clamp_negative {
            v.max(0.0)
        } else {
            v
        }
    }

    fn omega_max(&self) -> f64 {
        self.omega_max
    }
}

/// `J(w) = level` on `[0, omega_max]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlatDensity {
    pub level: f64,
    pub omega_max: f64,
}

impl Spectral for FlatDensity {
    fn evaluate(&self, omega: f64) -> f64 {
        if (0.0..=self.omega_max).contains(&omega) {
            self.level
        } else {
            0.0
        }
    }

    fn omega_max(&self) -> f64 {
        self.omega_max
    }
}

/// Lorentzian `J(w) = (a / pi) * w0^2 / ((w - c)^2 + w0^2)` truncated to
/// `[0, omega_max]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LorentzianDensity {
    pub amplitude: f64,
    pub center: f64,
    pub width: f64,
    pub omega_max: f64,
}

impl Spectral for LorentzianDensity {
    fn evaluate(&self, omega: f64) -> f64 {
        if !(0.0..=self.omega_max).contains(&omega) {
            return 0.0;
        }
        let d = omega - self.center;
        self.amplitude / std::f64::consts::PI * self.width * self.width
            / (d * d + self.width * self.width)
    }

    fn omega_max(&self) -> f64 {
        self.omega_max
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    #[default]
    Midpoint,
    Trapezoid,
}

/// Star representation of the bath: modes `w_k` with couplings `g_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscretizedBath {
    frequencies: Vec<f64>,
    couplings: Vec<f64>,
}

impl DiscretizedBath {
    pub fn new(frequencies: Vec<f64>, couplings: Vec<f64>) -> Result<Self> {
        if frequencies.len() != couplings.len() {
            return Err(Error::invalid(format!(
                "{} frequencies but {} couplings",
                frequencies.len(),
                couplings.len()
            )));
        }
        if couplings.iter().any(|g| !(*g >= 0.0) || !g.is_finite()) {
            return Err(Error::invalid("couplings must be finite and nonnegative"));
        }
        if frequencies.iter().any(|w| !w.is_finite()) {
            return Err(Error::invalid("frequencies must be finite"));
        }
        Ok(Self { frequencies, couplings })
    }

    /// Bath from frequencies and weights `g_k^2`.
    pub fn from_weights(frequencies: Vec<f64>, weights: &[f64]) -> Result<Self> {
        if weights.iter().any(|w| !(*w >= 0.0)) {
            return Err(Error::invalid("weights must be nonnegative"));
        }
        Self::new(frequencies, weights.iter().map(|w| w.sqrt()).collect())
    }

    pub fn frequencies(&self) -> &[f64] {
        &self.frequencies
    }

    pub fn couplings(&self) -> &[f64] {
        &self.couplings
    }

    pub fn count(&self) -> usize {
        self.frequencies.len()
    }

    pub fn weights(&self) -> Vec<f64> {
        self.couplings.iter().map(|g| g * g).collect()
    }

    /// `sum_k g_k^2`.
    pub fn total_weight(&self) -> f64 {
        self.couplings.iter().map(|g| g * g).sum()
    }

    /// Moment `sum_k g_k^2 w_k^j`.
    pub fn moment(&self, j: u32) -> f64 {
        self.frequencies
            .iter()
            .zip(&self.couplings)
            .map(|(w, g)| g * g * w.powi(j as i32))
            .sum()
    }
}

/// Discretizes `density` onto `n_omega` uniform modes in `(0, omega_max]`
/// with `g_k = sqrt(J(w_k) dw_k)`.
pub fn discretize<S: Spectral + ?Sized>(
    density: &S,
    n_omega: usize,
    scheme: Scheme,
) -> Result<DiscretizedBath> {
    if n_omega < 2 {
        return Err(Error::invalid(format!("need at least 2 modes, got {n_omega}")));
    }
    let wmax = density.omega_max();
    if !(wmax > 0.0 && wmax.is_finite()) {
        return Err(Error::invalid(format!("omega_max must be positive, got {wmax}")));
    }
    let dw = wmax / n_omega as f64;
    let (frequencies, weights): (Vec<f64>, Vec<f64>) = match scheme {
        Scheme::Midpoint => (0..n_omega)
            .map(|k| {
                let w = (k as f64 + 0.5) * dw;
                (w, density.evaluate(w) * dw)
            })
            .unzip(),
        Scheme::Trapezoid => (1..=n_omega)
            .map(|k| {
                let w = k as f64 * dw;
                let mut weight = density.evaluate(w) * if k == n_omega { 0.5 * dw } else { dw };
                // the w = 0 endpoint has no mode of its own; fold its half-cell
                // into the first node so the total weight stays second order
                if k == 1 {
                    weight += 0.5 * dw * density.evaluate(0.0);
                }
                (w, weight)
            })
            .unzip(),
    };
    DiscretizedBath::from_weights(frequencies, &weights)
}

/// `f(tau) = sum_k g_k^2 exp(i (w_s - w_k) tau)` sampled on a uniform grid.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationKernel {
    grid: TimeGrid,
    values: Vec<Complex64>,
    system_frequency: f64,
}

impl CorrelationKernel {
    pub fn from_values(grid: TimeGrid, values: Vec<Complex64>, system_frequency: f64) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::invalid("kernel values do not match the grid length"));
        }
        Ok(Self { grid, values, system_frequency })
    }

    /// Samples an analytic kernel on `grid`.
    pub fn from_fn(grid: TimeGrid, system_frequency: f64, f: impl Fn(f64) -> Complex64) -> Self {
        let values = grid.times().map(f).collect();
        Self { grid, values, system_frequency }
    }

    pub fn grid(&self) -> TimeGrid {
        self.grid
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn system_frequency(&self) -> f64 {
        self.system_frequency
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "tau,re_f,im_f")?;
        for (i, f) in self.values.iter().enumerate() {
            writeln!(w, "{:.9e},{:.12e},{:.12e}", self.grid.time(i), f.re, f.im)?;
        }
        Ok(())
    }
}

/// Points per block over which mode phases are advanced by recurrence before
/// being recomputed exactly.
const PHASE_BLOCK: usize = 512;

pub fn correlation_function(
    bath: &DiscretizedBath,
    omega_s: f64,
    dt: f64,
    horizon: f64,
) -> Result<CorrelationKernel> {
    if bath.count() == 0 {
        return Err(Error::invalid("empty bath"));
    }
    let grid = TimeGrid::covering(dt, horizon)?;
    let detunings: Vec<f64> = bath.frequencies().iter().map(|w| omega_s - w).collect();
    let weights = bath.weights();
    let steps: Vec<Complex64> = detunings.iter().map(|d| Complex64::from_polar(1.0, d * dt)).collect();

    let mut values = vec![Complex64::new(0.0, 0.0); grid.len()];
    values
        .par_chunks_mut(PHASE_BLOCK)
        .enumerate()
        .for_each(|(block, out)| {
            let t0 = grid.time(block * PHASE_BLOCK);
            let mut phases: Vec<Complex64> =
                detunings.iter().map(|d| Complex64::from_polar(1.0, d * t0)).collect();
            for slot in out.iter_mut() {
                let mut acc = Complex64::new(0.0, 0.0);
                for ((p, w), s) in phases.iter_mut().zip(&weights).zip(&steps) {
                    acc += *p * *w;
                    *p *= *s;
                }
                *slot = acc;
            }
        });
    CorrelationKernel::from_values(grid, values, omega_s)
}
