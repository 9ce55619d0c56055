//! State-vector oracles for small chains: exact propagation with the sparse
//! Hamiltonian, and a dense replay of the Trotter circuit.

use nalgebra::{DMatrix, Matrix2};
use num_complex::Complex64 as C;

use super::{ChainModel, TrotterPlan};
use crate::error::{Error, Result};

/// Largest Hilbert-space dimension the oracles accept.
pub const MAX_DIMENSION: usize = 20_000;

/// Real symmetric Hamiltonian in compressed-row form.
#[derive(Debug, Clone)]
pub struct SparseHamiltonian {
    dim: usize,
    row_start: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

fn checked_dim(dims: &[usize]) -> Result<usize> {
    let dim = dims.iter().try_fold(1usize, |acc, d| acc.checked_mul(*d));
    match dim {
        Some(d) if d <= MAX_DIMENSION => Ok(d),
        _ => Err(Error::invalid(format!("Hilbert dimension exceeds the oracle limit of {MAX_DIMENSION}"))),
    }
}

impl SparseHamiltonian {
    pub fn from_model(model: &ChainModel) -> Result<Self> {
        let dims = model.phys_dims();
        let dim = checked_dim(&dims)?;
        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); dim];
        let mut add_local = |site: usize, width: usize, h: &DMatrix<f64>| {
            let stride: usize = dims[site + width..].iter().product();
            let block: usize = dims[site..site + width].iter().product();
            for (i, row) in rows.iter_mut().enumerate() {
                let local = (i / stride) % block;
                let base = i - local * stride;
                for t in 0..block {
                    let v = h[(t, local)];
                    if v != 0.0 {
                        row.push((base + t * stride, v));
                    }
                }
            }
        };
        if dims.len() == 1 {
            add_local(0, 1, &model.onsite(0));
        }
        for b in 0..dims.len().saturating_sub(1) {
            add_local(b, 2, &model.bond_hamiltonian(b));
        }
        let mut row_start = vec![0];
        let (mut cols, mut vals) = (Vec::new(), Vec::new());
        for mut row in rows {
            row.sort_by_key(|e| e.0);
            let mut k = 0;
            while k < row.len() {
                let c = row[k].0;
                let mut v = 0.0;
                while k < row.len() && row[k].0 == c {
                    v += row[k].1;
                    k += 1;
                }
                cols.push(c);
                vals.push(v);
            }
            row_start.push(cols.len());
        }
        Ok(Self { dim, row_start, cols, vals })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn apply(&self, x: &[C], y: &mut [C]) {
        for i in 0..self.dim {
            let mut acc = C::new(0.0, 0.0);
            for k in self.row_start[i]..self.row_start[i + 1] {
                acc += x[self.cols[k]] * self.vals[k];
            }
            y[i] = acc;
        }
    }

    /// Largest absolute row sum, an upper bound on the spectral norm.
    pub fn norm_bound(&self) -> f64 {
        (0..self.dim)
            .map(|i| self.vals[self.row_start[i]..self.row_start[i + 1]].iter().map(|v| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn expectation(&self, psi: &[C]) -> f64 {
        let mut y = vec![C::new(0.0, 0.0); self.dim];
        self.apply(psi, &mut y);
        psi.iter().zip(&y).map(|(a, b)| (a.conj() * b).re).sum()
    }

    /// `exp(-i H t) psi` by a Taylor series on substeps with `|H| tau <= 1/2`,
    /// summed until the terms drop below machine precision.
    pub fn propagate(&self, psi: &mut [C], t: f64) {
        let bound = self.norm_bound();
        let sub = ((bound * t.abs()) / 0.5).ceil().max(1.0) as usize;
        let tau = t / sub as f64;
        let mut term = vec![C::new(0.0, 0.0); self.dim];
        let mut next = vec![C::new(0.0, 0.0); self.dim];
        for _ in 0..sub {
            term.copy_from_slice(psi);
            for k in 1..60 {
                self.apply(&term, &mut next);
                let f = C::new(0.0, -tau / k as f64);
                let mut size = 0.0f64;
                for (p, (n, tm)) in psi.iter_mut().zip(next.iter().zip(term.iter_mut())) {
                    *tm = n * f;
                    *p += *tm;
                    size = size.max(tm.norm());
                }
                if size < 1e-18 {
                    break;
                }
            }
        }
    }
}

/// `(a |e> + b |g>) (x) |0...0>` as a dense vector.
pub fn product_state(amplitudes: [C; 2], dims: &[usize]) -> Result<Vec<C>> {
    let dim = checked_dim(dims)?;
    let env = dim / 2;
    let norm = (amplitudes[0].norm_sqr() + amplitudes[1].norm_sqr()).sqrt();
    let mut psi = vec![C::new(0.0, 0.0); dim];
    psi[0] = amplitudes[0] / norm;
    psi[env] = amplitudes[1] / norm;
    Ok(psi)
}

/// `Tr_env |a><b|` for dense vectors with the qubit most significant.
pub fn qubit_transition(a: &[C], b: &[C]) -> Matrix2<C> {
    let env = a.len() / 2;
    let mut out = Matrix2::zeros();
    for s in 0..2 {
        for t in 0..2 {
            out[(s, t)] = (0..env).map(|k| a[s * env + k] * b[t * env + k].conj()).sum();
        }
    }
    out
}

/// Applies a two-site gate on sites `(b, b+1)` in place.
pub fn apply_two_site(psi: &mut [C], dims: &[usize], b: usize, gate: &DMatrix<C>) {
    let stride: usize = dims[b + 2..].iter().product();
    let block = dims[b] * dims[b + 1];
    let outer = psi.len() / (stride * block);
    let mut buf = vec![C::new(0.0, 0.0); block];
    for o in 0..outer {
        for r in 0..stride {
            let base = o * block * stride + r;
            for (s, v) in buf.iter_mut().enumerate() {
                *v = psi[base + s * stride];
            }
            for t in 0..block {
                psi[base + t * stride] = (0..block).map(|s| gate[(t, s)] * buf[s]).sum();
            }
        }
    }
}

/// One step of the Trotter circuit of `plan` on a dense vector, without
/// truncation.
pub fn trotter_step_dense(psi: &mut [C], plan: &TrotterPlan) {
    let dims = plan.phys_dims().to_vec();
    if let Some(g) = plan.single_site_gate() {
        let env = psi.len() / 2;
        for k in 0..env {
            let (a, b) = (psi[k], psi[env + k]);
            psi[k] = g[(0, 0)] * a + g[(0, 1)] * b;
            psi[env + k] = g[(1, 0)] * a + g[(1, 1)] * b;
        }
        return;
    }
    for (b, gate) in plan.gate_sequence() {
        apply_two_site(psi, &dims, b, gate);
    }
}
