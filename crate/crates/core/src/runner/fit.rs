//! Exponential decay fits of distinguishability traces.

use std::io::Write;

use crate::error::{Error, Result};
use crate::measures::DistinguishabilityTrace;

/// Fitted `D(t) ~ A exp(-rate t)` over `window`.
#[derive(Debug, Clone, PartialEq)]
pub struct DecayFit {
    pub label: String,
    pub rate: f64,
    pub amplitude: f64,
    pub fit_window: (f64, f64),
    /// RMS of the log-space residuals.
    pub residual: f64,
    pub points: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitWindow {
    pub t_start: f64,
    pub t_end: Option<f64>,
    pub noise_floor: f64,
}

impl Default for FitWindow {
    fn default() -> Self {
        Self { t_start: 5.0, t_end: None, noise_floor: 1e-6 }
    }
}

/// Minimum number of retained samples for a fit.
const MIN_POINTS: usize = 8;

/// The fitted drop of `ln D` across the window must exceed the residual RMS
/// by this factor.
const SIGNIFICANCE: f64 = 3.0;

/// Below this fraction of the first-half rate the second half counts as a
/// plateau rather than a decay.
const PLATEAU_RATIO: f64 = 0.25;

fn least_squares(t: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = t.len() as f64;
    let tm = t.iter().sum::<f64>() / n;
    let ym = y.iter().sum::<f64>() / n;
    let stt: f64 = t.iter().map(|v| (v - tm) * (v - tm)).sum();
    let sty: f64 = t.iter().zip(y).map(|(a, b)| (a - tm) * (b - ym)).sum();
    let slope = sty / stt;
    let icpt = ym - slope * tm;
    let rss: f64 = t.iter().zip(y).map(|(a, b)| (b - icpt - slope * a).powi(2)).sum();
    (slope, icpt, (rss / n).sqrt())
}

/// Least squares on `ln D(t)` over the window, skipping samples below the
/// noise floor.
///
/// A trace whose log does not fall across the window, or whose decay stalls
/// in the second half of the window, is refused.
pub fn fit_decay_rate(label: &str, times: &[f64], values: &[f64], window: FitWindow) -> Result<DecayFit> {
    if times.len() != values.len() {
        return Err(Error::invalid("times and values differ in length"));
    }
    let end = window.t_end.unwrap_or(f64::INFINITY);
    let (t, y): (Vec<f64>, Vec<f64>) = times
        .iter()
        .zip(values)
        .filter(|(t, d)| **t >= window.t_start && **t <= end && **d >= window.noise_floor)
        .map(|(t, d)| (*t, d.ln()))
        .unzip();
    if t.len() < MIN_POINTS {
        return Err(Error::FitRefused(format!(
            "{label}: only {} samples above the noise floor {:e} in [{}, {}]",
            t.len(),
            window.noise_floor,
            window.t_start,
            end
        )));
    }
    let (slope, icpt, residual) = least_squares(&t, &y);
    if !(slope < 0.0) {
        return Err(Error::FitRefused(format!("{label}: log D has slope {slope:e}, not decaying")));
    }
    let drop = -slope * (t[t.len() - 1] - t[0]);
    if drop < SIGNIFICANCE * residual {
        return Err(Error::FitRefused(format!(
            "{label}: log D falls by {drop:.3e} against a residual of {residual:.3e}"
        )));
    }
    let mid = t.len() / 2;
    let (first, _, _) = least_squares(&t[..mid], &y[..mid]);
    let (second, _, _) = least_squares(&t[mid..], &y[mid..]);
    if !(-second > PLATEAU_RATIO * -first) {
        return Err(Error::FitRefused(format!(
            "{label}: decay stalls (rate {:e} then {:e}), trace is not exponential",
            -first, -second
        )));
    }
    Ok(DecayFit {
        label: label.to_string(),
        rate: -slope,
        amplitude: icpt.exp(),
        fit_window: (t[0], *t.last().unwrap()),
        residual,
        points: t.len(),
    })
}

pub fn fit_trace(label: &str, trace: &DistinguishabilityTrace, window: FitWindow) -> Result<DecayFit> {
    let g = trace.grid();
    let times: Vec<f64> = g.times().collect();
    fit_decay_rate(label, &times, trace.values(), window)
}

/// Writes one row per fit; refused fits carry their diagnostic in `status`.
pub fn write_fits_csv<W: Write>(mut w: W, fits: &[(String, Result<DecayFit>)]) -> std::io::Result<()> {
    writeln!(w, "direction,status,rate,amplitude,t_start,t_end,residual,points")?;
    for (label, fit) in fits {
        match fit {
            Ok(f) => writeln!(
                w,
                "{label},ok,{:.12e},{:.12e},{:.6},{:.6},{:.6e},{}",
                f.rate, f.amplitude, f.fit_window.0, f.fit_window.1, f.residual, f.points
            )?,
            Err(e) => writeln!(w, "{label},\"refused: {}\",,,,,,", e.to_string().replace('"', "'"))?,
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn grid(dt: f64, n: usize) -> Vec<f64> {
        (0..n).map(|i| i as f64 * dt).collect()
    }

    #[test]
    fn exact_exponential() {
        let t = grid(0.1, 401);
        let d: Vec<f64> = t.iter().map(|t| (-0.3 * t).exp()).collect();
        let f = fit_decay_rate("x", &t, &d, FitWindow::default()).unwrap();
        assert!((f.rate - 0.3).abs() < 1e-3, "{}", f.rate);
        assert!(f.residual < 1e-12);
        assert!((f.fit_window.0 - 5.0).abs() < 1e-9);
    }

    #[test]
    fn noise_floor_drops_tail() {
        let t = grid(0.5, 201);
        let d: Vec<f64> = t.iter().map(|t| (-0.5 * t).exp()).collect();
        let f = fit_decay_rate("x", &t, &d, FitWindow::default()).unwrap();
        assert!(d.iter().zip(&t).filter(|(_, t)| **t >= 5.0).any(|(d, _)| *d < 1e-6));
        assert!(f.fit_window.1 <= 27.7);
        assert!((f.rate - 0.5).abs() < 1e-9);
    }

    #[test]
    fn refuses_growth_plateau_and_oscillation() {
        let t = grid(0.1, 1001);
        let flat: Vec<f64> = t.iter().map(|_| 0.7).collect();
        let plateau: Vec<f64> = t.iter().map(|t| 0.6 + 0.4 * (-t).exp()).collect();
        let osc: Vec<f64> = t.iter().map(|t| 0.7 + 0.05 * (2.0 * t).cos()).collect();
        for d in [flat, plateau, osc] {
            let e = fit_decay_rate("x", &t, &d, FitWindow::default()).unwrap_err();
            assert!(matches!(e, Error::FitRefused(_)), "{e}");
        }
        let tiny: Vec<f64> = t.iter().map(|_| 1e-9).collect();
        assert!(matches!(fit_decay_rate("x", &t, &tiny, FitWindow::default()), Err(Error::FitRefused(_))));
    }

    proptest! {
        #[test]
        fn recovers_rate_and_amplitude(rate in 0.01f64..1.0, amp in 0.1f64..1.0) {
            let t = grid(0.05, 401);
            let d: Vec<f64> = t.iter().map(|t| amp * (-rate * t).exp()).collect();
            let f = fit_decay_rate("x", &t, &d, FitWindow { t_start: 1.0, ..Default::default() }).unwrap();
            prop_assert!((f.rate - rate).abs() < 1e-9 * (1.0 + rate));
            prop_assert!((f.amplitude - amp).abs() < 1e-8);
        }
    }
}
