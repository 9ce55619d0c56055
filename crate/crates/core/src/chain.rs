//! Star-to-chain mapping of a discretized bath: three-term recurrence
//! coefficients of the monic orthogonal polynomials of the bath measure,
//! computed by a discrete Stieltjes procedure or by Lanczos
//! tridiagonalization, and the resulting tight-binding chain.

use std::io::Write;

use nalgebra::{DMatrix, SymmetricEigen};

use crate::bath::DiscretizedBath;
use crate::error::{Error, Result};

/// Recurrence `pi_{n+1}(w) = (w - alpha_n) pi_n(w) - beta_n pi_{n-1}(w)`.
///
/// `hopping_sq[0]` holds the total weight `rho_0^2`; `hopping_sq[n]` for
/// `n >= 1` is `beta_n`.
#[derive(Debug, Clone, PartialEq)]
pub struct RecurrenceCoefficients {
    pub onsite: Vec<f64>,
    pub hopping_sq: Vec<f64>,
    pub norm0: f64,
}

impl RecurrenceCoefficients {
    pub fn len(&self) -> usize {
        self.onsite.len()
    }

    pub fn is_empty(&self) -> bool {
        self.onsite.is_empty()
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "n,alpha,beta,hopping")?;
        for n in 0..self.len() {
            let hop = self.hopping_sq.get(n + 1).map_or(0.0, |b| b.sqrt());
            writeln!(w, "{n},{:.15e},{:.15e},{:.15e}", self.onsite[n], self.hopping_sq[n], hop)?;
        }
        Ok(())
    }
}

/// Measure nodes and weights of a bath, keeping only positive weights.
fn measure(bath: &DiscretizedBath) -> Result<(Vec<f64>, Vec<f64>, f64)> {
    let (x, w): (Vec<f64>, Vec<f64>) = bath
        .frequencies()
        .iter()
        .zip(bath.weights())
        .filter(|(_, w)| *w > 0.0)
        .map(|(x, w)| (*x, w))
        .unzip();
    let total: f64 = w.iter().sum();
    if !(total > 0.0) {
        return Err(Error::invalid("bath has zero total weight"));
    }
    let scale = x.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
    Ok((x, w, scale))
}

/// Relative size of `beta_n` (against the squared support scale) below which
/// the recurrence is considered exhausted.
const BETA_FLOOR: f64 = 1e-14;

fn too_long(requested: usize, max_stable: usize) -> Error {
    Error::ChainTooLong { requested, max_stable }
}

/// Discrete Stieltjes procedure on monic polynomial values at the nodes,
/// with two passes of Gram-Schmidt against all previous polynomials.
pub fn stieltjes_coefficients(bath: &DiscretizedBath, length: usize) -> Result<RecurrenceCoefficients> {
    if length == 0 {
        return Err(Error::invalid("chain length must be at least 1"));
    }
    let (x, w, scale) = measure(bath)?;
    let m = x.len();
    if length > m {
        return Err(too_long(length, m));
    }
    let inner = |a: &[f64], b: &[f64]| a.iter().zip(b).zip(&w).map(|((p, q), wk)| p * q * wk).sum::<f64>();

    let mut onsite = Vec::with_capacity(length);
    let mut hopping_sq = Vec::with_capacity(length);
    let norm0_sq: f64 = w.iter().sum();
    hopping_sq.push(norm0_sq);

    let mut polys: Vec<Vec<f64>> = vec![vec![1.0; m]];
    let mut norms_sq = vec![norm0_sq];
    for n in 0..length {
        let p = &polys[n];
        let xp: Vec<f64> = x.iter().zip(p).map(|(a, b)| a * b).collect();
        let alpha = inner(&xp, p) / norms_sq[n];
        onsite.push(alpha);
        if n + 1 == length {
            break;
        }
        let mut next: Vec<f64> = xp.iter().zip(p).map(|(a, b)| a - alpha * b).collect();
        if n > 0 {
            let beta = hopping_sq[n];
            for (v, q) in next.iter_mut().zip(&polys[n - 1]) {
                *v -= beta * q;
            }
        }
        for _ in 0..2 {
            for (q, nq) in polys.iter().zip(&norms_sq) {
                let c = inner(&next, q) / nq;
                for (v, qk) in next.iter_mut().zip(q) {
                    *v -= c * qk;
                }
            }
        }
        let nn = inner(&next, &next);
        let beta = nn / norms_sq[n];
        if !(beta > BETA_FLOOR * scale * scale) || !(nn > 1e-280) {
            return Err(too_long(length, n + 1));
        }
        hopping_sq.push(beta);
        norms_sq.push(nn);
        polys.push(next);
    }
    Ok(RecurrenceCoefficients { onsite, hopping_sq, norm0: norm0_sq.sqrt() })
}

/// Lanczos on `diag(w_k)` started from `g_k / rho_0`, with full
/// reorthogonalization (two passes) at every step.
pub fn lanczos_tridiagonalize(bath: &DiscretizedBath, length: usize) -> Result<RecurrenceCoefficients> {
    if length == 0 {
        return Err(Error::invalid("chain length must be at least 1"));
    }
    let (x, w, scale) = measure(bath)?;
    let m = x.len();
    if length > m {
        return Err(too_long(length, m));
    }
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(p, q)| p * q).sum::<f64>();
    let norm0_sq: f64 = w.iter().sum();
    let norm0 = norm0_sq.sqrt();
    let mut basis: Vec<Vec<f64>> = vec![w.iter().map(|wk| wk.sqrt() / norm0).collect()];
    let mut onsite = Vec::with_capacity(length);
    let mut hopping_sq = vec![norm0_sq];
    let mut prev_b = 0.0;
    for n in 0..length {
        let v = &basis[n];
        let mut u: Vec<f64> = x.iter().zip(v).map(|(a, b)| a * b).collect();
        let alpha = dot(&u, v);
        onsite.push(alpha);
        if n + 1 == length {
            break;
        }
        for (uk, vk) in u.iter_mut().zip(v) {
            *uk -= alpha * vk;
        }
        if n > 0 {
            for (uk, vk) in u.iter_mut().zip(&basis[n - 1]) {
                *uk -= prev_b * vk;
            }
        }
        for _ in 0..2 {
            for q in &basis {
                let c = dot(&u, q);
                for (uk, qk) in u.iter_mut().zip(q) {
                    *uk -= c * qk;
                }
            }
        }
        let b = dot(&u, &u).sqrt();
        if !(b * b > BETA_FLOOR * scale * scale) {
            return Err(too_long(length, n + 1));
        }
        hopping_sq.push(b * b);
        prev_b = b;
        basis.push(u.into_iter().map(|uk| uk / b).collect());
    }
    Ok(RecurrenceCoefficients { onsite, hopping_sq, norm0 })
}

/// How the qubit couples to the head of the chain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CouplingKind {
    /// `g sigma_x (B_0 + B_0^dag)`, the full spin-boson coupling.
    #[default]
    SigmaX,
    /// `g (sigma_+ B_0 + sigma_- B_0^dag)`, excitation conserving.
    SigmaPm,
}

/// Tight-binding chain `sum_n alpha_n B_n^dag B_n + t_n (B_{n+1}^dag B_n + h.c.)`
/// with the qubit attached to `B_0` through `system_coupling`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainHamiltonian {
    pub onsite_energies: Vec<f64>,
    pub hoppings: Vec<f64>,
    pub system_coupling: f64,
    pub coupling: CouplingKind,
}

impl ChainHamiltonian {
    pub fn from_coefficients(c: &RecurrenceCoefficients, coupling: CouplingKind) -> Self {
        Self {
            onsite_energies: c.onsite.clone(),
            hoppings: c.hopping_sq[1..].iter().map(|b| b.sqrt()).collect(),
            system_coupling: c.norm0,
            coupling,
        }
    }

    /// Chain with no bath sites.
    pub fn empty(coupling: CouplingKind) -> Self {
        Self { onsite_energies: vec![], hoppings: vec![], system_coupling: 0.0, coupling }
    }

    pub fn length(&self) -> usize {
        self.onsite_energies.len()
    }

    /// First `length` sites.
    pub fn truncated(&self, length: usize) -> Self {
        let l = length.min(self.length());
        Self {
            onsite_energies: self.onsite_energies[..l].to_vec(),
            hoppings: self.hoppings[..l.saturating_sub(1)].to_vec(),
            system_coupling: self.system_coupling,
            coupling: self.coupling,
        }
    }

    /// Single-particle tridiagonal matrix.
    pub fn single_particle_matrix(&self) -> DMatrix<f64> {
        let m = self.length();
        let mut t = DMatrix::zeros(m, m);
        for (i, a) in self.onsite_energies.iter().enumerate() {
            t[(i, i)] = *a;
        }
        for (i, h) in self.hoppings.iter().enumerate() {
            t[(i, i + 1)] = *h;
            t[(i + 1, i)] = *h;
        }
        t
    }

    /// Moments `g^2 e_0^T T^j e_0` of the chain's spectral measure at the
    /// qubit, `j = 0..count`.
    pub fn moments(&self, count: usize) -> Vec<f64> {
        let m = self.length();
        if m == 0 {
            return vec![0.0; count];
        }
        let mut v = vec![0.0; m];
        v[0] = 1.0;
        let g2 = self.system_coupling * self.system_coupling;
        let mut out = Vec::with_capacity(count);
        for _ in 0..count {
            out.push(g2 * v[0]);
            let mut next = vec![0.0; m];
            for i in 0..m {
                next[i] = self.onsite_energies[i] * v[i];
                if i > 0 {
                    next[i] += self.hoppings[i - 1] * v[i - 1];
                }
                if i + 1 < m {
                    next[i] += self.hoppings[i] * v[i + 1];
                }
            }
            v = next;
        }
        out
    }
}

/// Outcome of comparing a chain with the star bath it came from.
#[derive(Debug, Clone, PartialEq)]
pub struct EquivalenceReport {
    /// Whether the chain is as long as the bath has positive-weight modes.
    pub complete: bool,
    /// Largest relative deviation between chain eigenvalues and bath
    /// frequencies (complete chains only).
    pub max_frequency_deviation: f64,
    /// Largest deviation between `g |U_0k|` and `g_k` (complete chains only).
    pub max_coupling_deviation: f64,
    /// Cauchy interlacing of the chain spectrum inside the bath spectrum.
    pub interlacing_holds: bool,
    /// Chain eigenvalues, ascending.
    pub eigenvalues: Vec<f64>,
}

pub fn verify_unitary_equivalence(chain: &ChainHamiltonian, bath: &DiscretizedBath) -> Result<EquivalenceReport> {
    let (x, w, _) = measure(bath)?;
    let mut modes: Vec<(f64, f64)> = x.into_iter().zip(w.into_iter().map(f64::sqrt)).collect();
    modes.sort_by(|a, b| a.0.total_cmp(&b.0));
    let m = chain.length();
    if m == 0 {
        return Err(Error::invalid("empty chain"));
    }
    let eig = SymmetricEigen::new(chain.single_particle_matrix());
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|a, b| eig.eigenvalues[*a].total_cmp(&eig.eigenvalues[*b]));
    let eigenvalues: Vec<f64> = order.iter().map(|i| eig.eigenvalues[*i]).collect();

    let n = modes.len();
    let complete = m == n;
    let (mut max_frequency_deviation, mut max_coupling_deviation) = (0.0f64, 0.0f64);
    if complete {
        for (k, i) in order.iter().enumerate() {
            let (wk, gk) = modes[k];
            let dev = (eigenvalues[k] - wk).abs() / wk.abs().max(f64::MIN_POSITIVE);
            max_frequency_deviation = max_frequency_deviation.max(dev);
            let g = chain.system_coupling * eig.eigenvectors[(0, *i)].abs();
            max_coupling_deviation = max_coupling_deviation.max((g - gk).abs());
        }
    }
    let slack = 1e-12 * modes.last().map_or(1.0, |m| m.0.abs().max(1.0));
    let interlacing_holds = m <= n
        && eigenvalues
            .iter()
            .enumerate()
            .all(|(j, mu)| modes[j].0 - slack <= *mu && *mu <= modes[j + n - m].0 + slack);
    Ok(EquivalenceReport {
        complete,
        max_frequency_deviation,
        max_coupling_deviation,
        interlacing_holds,
        eigenvalues,
    })
}
