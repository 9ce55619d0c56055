//! Exactly solvable rotating-wave model: the amplitude `Gamma(t)` from the
//! Volterra equation `Gamma' = -int_0^t f(t - s) Gamma(s) ds`, the channel it
//! generates, and the derived fidelity, non-Markovianity and rates.

use std::io::Write;

use nalgebra::{Matrix2, Matrix3, Vector3};
use num_complex::Complex64;
use rayon::prelude::*;

use crate::bath::{discretize, CorrelationKernel, DiscretizedBath, Scheme, Spectral};
use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::measures::ChannelSeries;
use crate::qubit::{AffineChannel, DensityMatrix};

/// Complex excited-state amplitude on a uniform grid, `Gamma(0) = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct GammaTrajectory {
    grid: TimeGrid,
    values: Vec<Complex64>,
}

impl GammaTrajectory {
    pub fn new(grid: TimeGrid, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::invalid("trajectory length does not match its grid"));
        }
        if values[0] != Complex64::new(1.0, 0.0) {
            return Err(Error::invalid("trajectory must start at Gamma(0) = 1"));
        }
        Ok(Self { grid, values })
    }

    pub fn grid(&self) -> TimeGrid {
        self.grid
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn magnitudes(&self) -> Vec<f64> {
        self.values.iter().map(|g| g.norm()).collect()
    }

    pub fn channel_series(&self) -> ChannelSeries {
        let channels = self.values.iter().map(|g| rwa_channel(*g)).collect();
        ChannelSeries::new(self.grid, channels).expect("grid and values have equal length")
    }
}

/// Dot products longer than this are split over the thread pool.
const PARALLEL_DOT: usize = 1 << 15;
const DOT_CHUNK: usize = 1 << 14;

/// `sum_i a_i b_i` over split real/imaginary parts with a fixed summation
/// order.
fn cdot_serial(ar: &[f64], ai: &[f64], br: &[f64], bi: &[f64]) -> (f64, f64) {
    let mut re = [0.0f64; 4];
    let mut im = [0.0f64; 4];
    let n = ar.len();
    let body = n - n % 4;
    for i in (0..body).step_by(4) {
        for l in 0..4 {
            let (x, y, u, v) = (ar[i + l], ai[i + l], br[i + l], bi[i + l]);
            re[l] += x * u - y * v;
            im[l] += x * v + y * u;
        }
    }
    for i in body..n {
        re[0] += ar[i] * br[i] - ai[i] * bi[i];
        im[0] += ar[i] * bi[i] + ai[i] * br[i];
    }
    ((re[0] + re[1]) + (re[2] + re[3]), (im[0] + im[1]) + (im[2] + im[3]))
}

fn cdot(ar: &[f64], ai: &[f64], br: &[f64], bi: &[f64]) -> (f64, f64) {
    if ar.len() < PARALLEL_DOT {
        return cdot_serial(ar, ai, br, bi);
    }
    let partial: Vec<(f64, f64)> = ar
        .par_chunks(DOT_CHUNK)
        .zip(ai.par_chunks(DOT_CHUNK))
        .zip(br.par_chunks(DOT_CHUNK).zip(bi.par_chunks(DOT_CHUNK)))
        .map(|((a, b), (c, d))| cdot_serial(a, b, c, d))
        .collect();
    partial.iter().fold((0.0, 0.0), |acc, p| (acc.0 + p.0, acc.1 + p.1))
}

/// Trapezoidal product integration of the Volterra equation. The memory
/// integral at `t_k` is the trapezoid sum over `Gamma_0..Gamma_k`, and the
/// step `Gamma_k = Gamma_{k-1} + dt/2 (Gamma'_{k-1} + Gamma'_k)` is linear in
/// `Gamma_k`, so it is solved directly. Global error is `O(dt^2)`.
pub fn solve_gamma(kernel: &CorrelationKernel, dt: f64, horizon: f64) -> Result<GammaTrajectory> {
    let grid = TimeGrid::covering(dt, horizon)?;
    let kg = kernel.grid();
    if ((kg.dt() - dt) / dt).abs() > 1e-12 {
        return Err(Error::invalid(format!("kernel step {} differs from solver step {dt}", kg.dt())));
    }
    if kg.len() < grid.len() {
        return Err(Error::invalid(format!(
            "kernel covers t <= {} but the horizon is {}",
            kg.end(),
            grid.end()
        )));
    }
    let n = grid.len();
    let f = &kernel.values()[..n];
    // reversed kernel so that f_{k-j}, j = 1..k-1, is a forward slice
    let fr: Vec<f64> = f.iter().rev().map(|z| z.re).collect();
    let fi: Vec<f64> = f.iter().rev().map(|z| z.im).collect();
    let mut gr = vec![0.0; n];
    let mut gi = vec![0.0; n];
    gr[0] = 1.0;

    let f0 = f[0];
    let denom = Complex64::new(1.0, 0.0) + f0 * (0.25 * dt * dt);
    let mut deriv = Complex64::new(0.0, 0.0);
    for k in 1..n {
        let (sr, si) = cdot(&fr[n - k..n - 1], &fi[n - k..n - 1], &gr[1..k], &gi[1..k]);
        // memory integral without the unknown endpoint term
        let partial = (Complex64::new(sr, si) + 0.5 * f[k]) * dt;
        let prev = Complex64::new(gr[k - 1], gi[k - 1]);
        let g = (prev + 0.5 * dt * deriv - 0.5 * dt * partial) / denom;
        if !(g.re.is_finite() && g.im.is_finite()) {
            return Err(Error::numerical(format!("non-finite amplitude at t = {}", grid.time(k))));
        }
        deriv = -(partial + 0.5 * dt * f0 * g);
        gr[k] = g.re;
        gi[k] = g.im;
    }
    let values = gr.into_iter().zip(gi).map(|(r, i)| Complex64::new(r, i)).collect();
    GammaTrajectory::new(grid, values)
}

/// Same scheme as [`solve_gamma`] for the kernel of a discrete bath,
/// `f(t) = sum_m w_m exp(i d_m t)`.
///
/// Each mode carries `C_m(k) = sum_{j<k} e^{i d_m (t_k - t_j)} Gamma_j` minus
/// half the `j = 0` term, updated as `C_m(k) = e^{i d_m dt} (C_m(k-1) +
/// Gamma_{k-1})`, so a step costs `O(modes)` instead of `O(k)`.
pub fn solve_for_bath(bath: &DiscretizedBath, omega_s: f64, dt: f64, horizon: f64) -> Result<GammaTrajectory> {
    if bath.count() == 0 {
        return Err(Error::invalid("empty bath"));
    }
    let grid = TimeGrid::covering(dt, horizon)?;
    let w = bath.weights();
    let (er, ei): (Vec<f64>, Vec<f64>) =
        bath.frequencies().iter().map(|om| ((omega_s - om) * dt).sin_cos()).map(|(s, c)| (c, s)).unzip();
    let mut cr = vec![-0.5; w.len()];
    let mut ci = vec![0.0; w.len()];
    let f0 = Complex64::new(w.iter().sum::<f64>(), 0.0);
    let denom = Complex64::new(1.0, 0.0) + f0 * (0.25 * dt * dt);

    let n = grid.len();
    let mut values = Vec::with_capacity(n);
    values.push(Complex64::new(1.0, 0.0));
    let mut deriv = Complex64::new(0.0, 0.0);
    for k in 1..n {
        let prev = values[k - 1];
        let mut acc_r = [0.0f64; 4];
        let mut acc_i = [0.0f64; 4];
        let body = w.len() - w.len() % 4;
        let mut update = |m: usize, l: usize| {
            let (xr, xi) = (cr[m] + prev.re, ci[m] + prev.im);
            let (yr, yi) = (er[m] * xr - ei[m] * xi, er[m] * xi + ei[m] * xr);
            cr[m] = yr;
            ci[m] = yi;
            acc_r[l] += w[m] * yr;
            acc_i[l] += w[m] * yi;
        };
        for m in (0..body).step_by(4) {
            for l in 0..4 {
                update(m + l, l);
            }
        }
        for m in body..w.len() {
            update(m, 0);
        }
        let sum = Complex64::new((acc_r[0] + acc_r[1]) + (acc_r[2] + acc_r[3]), (acc_i[0] + acc_i[1]) + (acc_i[2] + acc_i[3]));
        let partial = sum * dt;
        let g = (prev + 0.5 * dt * deriv - 0.5 * dt * partial) / denom;
        if !(g.re.is_finite() && g.im.is_finite()) {
            return Err(Error::numerical(format!("non-finite amplitude at t = {}", grid.time(k))));
        }
        deriv = -(partial + 0.5 * dt * f0 * g);
        values.push(g);
    }
    GammaTrajectory::new(grid, values)
}

/// Discretizes `density` and solves on the resulting bath.
pub fn solve_for_density<S: Spectral + ?Sized>(
    density: &S,
    n_omega: usize,
    scheme: Scheme,
    omega_s: f64,
    dt: f64,
    horizon: f64,
) -> Result<GammaTrajectory> {
    let bath = discretize(density, n_omega, scheme)?;
    solve_for_bath(&bath, omega_s, dt, horizon)
}

/// Bloch-ball form of the amplitude-damping map with amplitude `gamma`.
pub fn rwa_channel(gamma: Complex64) -> AffineChannel {
    let a2 = gamma.norm_sqr();
    AffineChannel {
        linear: Matrix3::new(gamma.re, gamma.im, 0.0, -gamma.im, gamma.re, 0.0, 0.0, 0.0, a2),
        offset: Vector3::new(0.0, 0.0, a2 - 1.0),
    }
}

/// Applies the exact rotating-wave map to `rho0` (basis order excited,
/// ground).
pub fn rwa_channel_at(gamma: Complex64, rho0: &DensityMatrix) -> Result<DensityMatrix> {
    if gamma.norm() > 1.0 + 1e-8 {
        return Err(Error::invalid(format!("|Gamma| = {} exceeds 1", gamma.norm())));
    }
    let r = rho0.matrix();
    let a2 = gamma.norm_sqr();
    let excited = r[(0, 0)] * a2;
    let m = Matrix2::new(
        excited,
        gamma * r[(0, 1)],
        gamma.conj() * r[(1, 0)],
        Complex64::new(1.0, 0.0) - excited,
    );
    Ok(DensityMatrix::from_raw(m))
}

/// `F_opt = 1/2 + (|Gamma|^2 + 2|Gamma|)/6`.
pub fn fopt_of_gamma(abs_gamma: f64) -> f64 {
    0.5 + (abs_gamma * abs_gamma + 2.0 * abs_gamma) / 6.0
}

/// Accumulated rises of `|Gamma|`.
pub fn nm_of_gamma(traj: &GammaTrajectory) -> Vec<f64> {
    let a = traj.magnitudes();
    let mut out = Vec::with_capacity(a.len());
    let mut acc = 0.0;
    out.push(0.0);
    for w in a.windows(2) {
        acc += (w[1] - w[0]).max(0.0);
        out.push(acc);
    }
    out
}

/// Lamb shift `S(t)` and damping rate `gamma(t)` of the time-local generator.
#[derive(Debug, Clone, PartialEq)]
pub struct RatePair {
    pub lamb_shift: Vec<f64>,
    pub damping_rate: Vec<f64>,
    pub valid: Vec<bool>,
}

fn centered_derivative(v: &[Complex64], dt: f64) -> Vec<Complex64> {
    let n = v.len();
    (0..n)
        .map(|k| match k {
            _ if n < 3 => (v[n - 1] - v[0]) / (dt * (n - 1).max(1) as f64),
            0 => (-3.0 * v[0] + 4.0 * v[1] - v[2]) / (2.0 * dt),
            k if k == n - 1 => (3.0 * v[k] - 4.0 * v[k - 1] + v[k - 2]) / (2.0 * dt),
            k => (v[k + 1] - v[k - 1]) / (2.0 * dt),
        })
        .collect()
}

/// `S = -2 Im(Gamma'/Gamma)`, `gamma = -2 Re(Gamma'/Gamma)` from centered
/// differences; entries with `|Gamma| < floor` are masked (NaN, `valid`
/// false).
pub fn rates_of_gamma(traj: &GammaTrajectory, floor: f64) -> RatePair {
    let v = traj.values();
    let d = centered_derivative(v, traj.grid().dt());
    let mut out = RatePair {
        lamb_shift: Vec::with_capacity(v.len()),
        damping_rate: Vec::with_capacity(v.len()),
        valid: Vec::with_capacity(v.len()),
    };
    for (g, dg) in v.iter().zip(&d) {
        if g.norm() < floor {
            out.lamb_shift.push(f64::NAN);
            out.damping_rate.push(f64::NAN);
            out.valid.push(false);
        } else {
            let r = dg / g;
            out.lamb_shift.push(-2.0 * r.im);
            out.damping_rate.push(-2.0 * r.re);
            out.valid.push(true);
        }
    }
    out
}

/// Writes `t, re_gamma, im_gamma, abs_gamma, F_opt, S, gamma_rate, N`.
pub fn write_gamma_csv<W: Write>(mut w: W, traj: &GammaTrajectory, rates: &RatePair) -> std::io::Result<()> {
    let nm = nm_of_gamma(traj);
    writeln!(w, "t,re_gamma,im_gamma,abs_gamma,F_opt,S,gamma_rate,N")?;
    for (k, g) in traj.values().iter().enumerate() {
        writeln!(
            w,
            "{:.6},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e}",
            traj.grid().time(k),
            g.re,
            g.im,
            g.norm(),
            fopt_of_gamma(g.norm()),
            rates.lamb_shift[k],
            rates.damping_rate[k],
            nm[k]
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bath::{correlation_function, SpectralDensity};
    use crate::measures::{gains_losses, Direction};
    use crate::qubit::{density_from_bloch, reconstruct_affine_map, BlochVector, Probe};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn no_coupling_keeps_amplitude() {
        let grid = TimeGrid::covering(0.01, 5.0).unwrap();
        let k = CorrelationKernel::from_fn(grid, 1.0, |_| c(0.0, 0.0));
        let g = solve_gamma(&k, 0.01, 5.0).unwrap();
        assert!(g.values().iter().all(|z| *z == c(1.0, 0.0)));
    }

    #[test]
    fn constant_kernel_gives_cosine() {
        let g0 = 0.8;
        let dt = 1e-3;
        let grid = TimeGrid::covering(dt, 20.0).unwrap();
        let k = CorrelationKernel::from_fn(grid, 1.0, |_| c(g0 * g0, 0.0));
        let traj = solve_gamma(&k, dt, 20.0).unwrap();
        for (i, z) in traj.values().iter().enumerate() {
            let t = grid.time(i);
            assert!((z - c((g0 * t).cos(), 0.0)).norm() < 1e-5, "t={t}");
            assert!(z.norm() <= 1.0 + 1e-8);
        }
    }

    #[test]
    fn exponential_kernel_matches_closed_form() {
        let (lambda, gamma0) = (1.0f64, 0.2f64);
        let d = (lambda * lambda - 2.0 * gamma0 * lambda).sqrt();
        let exact = |t: f64| (-lambda * t / 2.0).exp() * ((d * t / 2.0).cosh() + lambda / d * (d * t / 2.0).sinh());
        let err_at = |dt: f64| {
            let grid = TimeGrid::covering(dt, 20.0).unwrap();
            let k = CorrelationKernel::from_fn(grid, 1.0, |t| c(gamma0 * lambda / 2.0 * (-lambda * t).exp(), 0.0));
            let traj = solve_gamma(&k, dt, 20.0).unwrap();
            traj.values()
                .iter()
                .enumerate()
                .map(|(i, z)| (z - c(exact(grid.time(i)), 0.0)).norm() / exact(grid.time(i)))
                .fold(0.0, f64::max)
        };
        let e1 = err_at(2e-3);
        let e2 = err_at(1e-3);
        assert!(e2 < 1e-4, "relative error {e2}");
        let order = (e1 / e2).log2();
        assert!((order - 2.0).abs() < 0.2, "order {order}");
    }

    #[test]
    fn kernel_too_short_is_rejected() {
        let grid = TimeGrid::covering(0.1, 1.0).unwrap();
        let k = CorrelationKernel::from_fn(grid, 1.0, |_| c(0.0, 0.0));
        assert!(matches!(solve_gamma(&k, 0.1, 2.0), Err(Error::InvalidArgument(_))));
        assert!(matches!(solve_gamma(&k, 0.05, 0.5), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn channel_examples() {
        let rho = density_from_bloch(&BlochVector::new(0.3, -0.2, 0.5).unwrap()).unwrap();
        assert!((rwa_channel_at(c(1.0, 0.0), &rho).unwrap().matrix() - rho.matrix()).norm() < 1e-15);
        let decayed = rwa_channel_at(c(0.0, 0.0), &rho).unwrap();
        assert!((decayed.bloch().vector() - Vector3::new(0.0, 0.0, -1.0)).norm() < 1e-15);

        // Gamma = i on |x+>: coherence (1/2) -> i/2, i.e. P = (0, -1, 0)
        let xp = density_from_bloch(&BlochVector::new(1.0, 0.0, 0.0).unwrap()).unwrap();
        let out = rwa_channel_at(c(0.0, 1.0), &xp).unwrap();
        assert!((out.matrix()[(0, 1)] - c(0.0, 0.5)).norm() < 1e-15);
        assert!((out.bloch().vector() - Vector3::new(0.0, -1.0, 0.0)).norm() < 1e-15);
        assert!(rwa_channel_at(c(1.1, 0.0), &xp).is_err());
    }

    #[test]
    fn tomography_reproduces_closed_form_channel() {
        for g in [c(0.2, 0.0), c(0.3, -0.5), c(-0.7, 0.1), c(0.0, 0.0)] {
            let probe = |p: BlochVector| rwa_channel_at(g, &density_from_bloch(&p).unwrap()).unwrap().bloch();
            let images = [
                (Probe::PlusX, probe(BlochVector::new(1.0, 0.0, 0.0).unwrap())),
                (Probe::PlusY, probe(BlochVector::new(0.0, 1.0, 0.0).unwrap())),
                (Probe::PlusZ, probe(BlochVector::new(0.0, 0.0, 1.0).unwrap())),
                (Probe::Origin, probe(BlochVector::origin())),
            ];
            let ch = reconstruct_affine_map(&images).unwrap();
            let closed = rwa_channel(g);
            assert!((ch.linear - closed.linear).norm() < 1e-14);
            assert!((ch.offset - closed.offset).norm() < 1e-14);
            let a = g.norm();
            assert!((crate::qubit::l21_norm(&ch.linear) - (a * a + 2.0 * a)).abs() < 1e-12);
        }
    }

    #[test]
    fn fopt_examples() {
        assert_eq!(fopt_of_gamma(1.0), 1.0);
        assert_eq!(fopt_of_gamma(0.0), 0.5);
        // |Gamma| with F_opt = 0.58 by bisection
        let (mut lo, mut hi) = (0.0, 1.0);
        for _ in 0..100 {
            let mid = 0.5 * (lo + hi);
            if fopt_of_gamma(mid) < 0.58 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        assert!((lo - (1.48f64.sqrt() - 1.0)).abs() < 1e-12);
    }

    #[test]
    fn nm_of_cosine_counts_rises() {
        let g0 = 1.0;
        let dt = 1e-3;
        let horizon = 2.0 * std::f64::consts::PI / g0;
        let grid = TimeGrid::covering(dt, horizon).unwrap();
        let values = grid.times().map(|t| c((g0 * t).cos(), 0.0)).collect();
        let traj = GammaTrajectory::new(grid, values).unwrap();
        let nm = nm_of_gamma(&traj);
        let half = grid.len() / 2;
        // the grid misses the exact zero of |cos| by O(dt)
        assert!((nm[half] - 1.0).abs() < 1e-3);
        assert!((nm[grid.len() - 1] - 2.0).abs() < 1e-3);

        let mono = GammaTrajectory::new(grid, grid.times().map(|t| c((-0.1 * t).exp(), 0.0)).collect()).unwrap();
        assert!(nm_of_gamma(&mono).iter().all(|v| *v == 0.0));
    }

    #[test]
    fn mode_recursion_matches_kernel_quadrature() {
        let bath = discretize(&SpectralDensity::with_depth(1.4), 300, Scheme::Midpoint).unwrap();
        let kernel = correlation_function(&bath, 1.0, 0.01, 30.0).unwrap();
        let slow = solve_gamma(&kernel, 0.01, 30.0).unwrap();
        let fast = solve_for_bath(&bath, 1.0, 0.01, 30.0).unwrap();
        for (a, b) in slow.values().iter().zip(fast.values()) {
            assert!((a - b).norm() < 1e-12, "{a} vs {b}");
        }
    }

    #[test]
    fn nm_pipeline_equivalence_on_beat_kernel() {
        let bath = DiscretizedBath::new(vec![0.8, 1.3], vec![0.2, 0.15]).unwrap();
        let kernel = correlation_function(&bath, 1.0, 0.01, 60.0).unwrap();
        let traj = solve_gamma(&kernel, 0.01, 60.0).unwrap();
        let nm = nm_of_gamma(&traj);
        assert!(*nm.last().unwrap() > 0.1);
        let trace = traj.channel_series().trace_along(Direction::x()).unwrap();
        let l = gains_losses(&trace).unwrap();
        for (a, b) in nm.iter().zip(&l.gains) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn rates_of_simple_trajectories() {
        let grid = TimeGrid::covering(1e-3, 10.0).unwrap();
        let kappa = 0.4;
        let decay = GammaTrajectory::new(grid, grid.times().map(|t| c((-kappa * t / 2.0).exp(), 0.0)).collect()).unwrap();
        let r = rates_of_gamma(&decay, 1e-6);
        for (s, g) in r.lamb_shift.iter().zip(&r.damping_rate) {
            assert!(s.abs() < 1e-12 && (g - kappa).abs() < 1e-6);
        }
        let delta = 0.3;
        let phase = GammaTrajectory::new(grid, grid.times().map(|t| Complex64::from_polar(1.0, delta * t)).collect()).unwrap();
        let r = rates_of_gamma(&phase, 1e-6);
        for (s, g) in r.lamb_shift.iter().zip(&r.damping_rate) {
            assert!((s + 2.0 * delta).abs() < 1e-6 && g.abs() < 1e-6);
        }
    }

    #[test]
    fn rates_mask_zeros_and_track_backflow() {
        let grid = TimeGrid::covering(1e-3, 8.0).unwrap();
        let traj = GammaTrajectory::new(grid, grid.times().map(|t| c((0.9 * t).cos(), 0.0)).collect()).unwrap();
        let r = rates_of_gamma(&traj, 1e-2);
        assert!(r.valid.iter().any(|v| !v));
        let a = traj.magnitudes();
        for k in 1..a.len() - 1 {
            if !r.valid[k] {
                assert!(r.damping_rate[k].is_nan());
                continue;
            }
            let da = (a[k + 1] - a[k - 1]) / (2.0 * grid.dt());
            if da.abs() > 1e-6 {
                assert_eq!(r.damping_rate[k] < 0.0, da > 0.0, "k={k}");
                // gamma = -(2/|G|) d|G|/dt
                assert!((r.damping_rate[k] + 2.0 * da / a[k]).abs() < 1e-4 * (1.0 + da.abs() / a[k]));
            }
        }
    }

    #[test]
    fn structured_bath_invariants() {
        let j = SpectralDensity::with_depth(1.4);
        let traj = solve_for_density(&j, 2000, Scheme::Midpoint, 1.0, 0.01, 60.0).unwrap();
        let series = traj.channel_series();
        let dx = series.trace_along(Direction::x()).unwrap();
        let dy = series.trace_along(Direction::y()).unwrap();
        let dz = series.trace_along(Direction::z()).unwrap();
        for (k, g) in traj.values().iter().enumerate() {
            assert!(g.norm() <= 1.0 + 1e-8);
            assert!((dx.values()[k] - dy.values()[k]).abs() < 1e-10);
            assert!((dz.values()[k] - g.norm_sqr()).abs() < 1e-10);
            // F_opt rises exactly when |Gamma| rises
            assert!((series.optimal_fidelity()[k] - fopt_of_gamma(g.norm())).abs() < 1e-12);
        }
    }

    #[test]
    fn nm_stable_under_grid_refinement() {
        let j = SpectralDensity::with_depth(0.7);
        let coarse = solve_for_density(&j, 2000, Scheme::Midpoint, 1.0, 0.02, 60.0).unwrap();
        let fine = solve_for_density(&j, 2000, Scheme::Midpoint, 1.0, 0.01, 60.0).unwrap();
        let (a, b) = (*nm_of_gamma(&coarse).last().unwrap(), *nm_of_gamma(&fine).last().unwrap());
        assert!((a - b).abs() <= 1e-3 * b.max(1e-3), "coarse {a} fine {b}");
    }
}
