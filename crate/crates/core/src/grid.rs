use crate::error::{Error, Result};

/// Uniform time grid `0, dt, 2dt, ..., (len-1) dt`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    dt: f64,
    len: usize,
}

impl TimeGrid {
    pub fn new(dt: f64, len: usize) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::invalid(format!("time step must be positive, got {dt}")));
        }
        if len == 0 {
            return Err(Error::invalid("time grid needs at least one point"));
        }
        Ok(Self { dt, len })
    }

    /// Grid covering `[0, horizon]` with step `dt`; the horizon is rounded to
    /// the nearest whole number of steps.
    pub fn covering(dt: f64, horizon: f64) -> Result<Self> {
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(Error::invalid(format!("horizon must be positive, got {horizon}")));
        }
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::invalid(format!("time step must be positive, got {dt}")));
        }
        let steps = (horizon / dt).round().max(1.0) as usize;
        Self::new(dt, steps + 1)
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn time(&self, i: usize) -> f64 {
        i as f64 * self.dt
    }

    pub fn end(&self) -> f64 {
        self.time(self.len - 1)
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.len).map(move |i| self.time(i))
    }

    /// Every `stride`-th point of this grid.
    pub fn subsample(&self, stride: usize) -> Result<Self> {
        if stride == 0 {
            return Err(Error::invalid("sample stride must be at least 1"));
        }
        Self::new(self.dt * stride as f64, (self.len - 1) / stride + 1)
    }
}
