//! Local operators and bond Hamiltonians of the qubit plus chain model.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64 as C;

use crate::chain::{ChainHamiltonian, CouplingKind};
use crate::error::{Error, Result};

/// Qubit at site 0 (basis: excited, ground) followed by the chain bosons,
/// each truncated to occupations `0..=n_max`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainModel {
    pub chain: ChainHamiltonian,
    pub system_frequency: f64,
    pub n_max: usize,
}

impl ChainModel {
    pub fn new(chain: ChainHamiltonian, system_frequency: f64, n_max: usize) -> Result<Self> {
        if n_max == 0 {
            return Err(Error::invalid("occupation cutoff n_max must be at least 1"));
        }
        if !system_frequency.is_finite() {
            return Err(Error::invalid("system frequency must be finite"));
        }
        Ok(Self { chain, system_frequency, n_max })
    }

    pub fn site_count(&self) -> usize {
        self.chain.length() + 1
    }

    pub fn phys_dims(&self) -> Vec<usize> {
        let mut d = vec![2];
        d.extend(std::iter::repeat(self.n_max + 1).take(self.chain.length()));
        d
    }

    pub fn hilbert_dim(&self) -> f64 {
        self.phys_dims().iter().map(|d| *d as f64).product()
    }

    /// Onsite term of site `k` with its full weight.
    pub fn onsite(&self, k: usize) -> DMatrix<f64> {
        if k == 0 {
            DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![self.system_frequency, 0.0]))
        } else {
            number(self.n_max + 1) * self.chain.onsite_energies[k - 1]
        }
    }

    /// Hamiltonian of bond `(b, b+1)`. Interior onsite terms are split evenly
    /// between their two bonds; end sites give their full term to their only
    /// bond, so the bond terms sum to the full Hamiltonian.
    pub fn bond_hamiltonian(&self, b: usize) -> DMatrix<f64> {
        let l = self.site_count();
        assert!(b + 1 < l, "bond {b} out of range");
        let dims = self.phys_dims();
        let (d1, d2) = (dims[b], dims[b + 1]);
        let w1 = if b == 0 { 1.0 } else { 0.5 };
        let w2 = if b + 2 == l { 1.0 } else { 0.5 };
        let mut h = self.onsite(b).kronecker(&DMatrix::identity(d2, d2)) * w1
            + DMatrix::identity(d1, d1).kronecker(&self.onsite(b + 1)) * w2;
        let a = annihilation(self.n_max + 1);
        if b == 0 {
            let g = self.chain.system_coupling;
            let sp = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]);
            let sm = sp.transpose();
            h += match self.chain.coupling {
                CouplingKind::SigmaX => (&sp + &sm).kronecker(&(&a + a.transpose())) * g,
                CouplingKind::SigmaPm => (sp.kronecker(&a) + sm.kronecker(&a.transpose())) * g,
            };
        } else {
            let t = self.chain.hoppings[b - 1];
            h += (a.transpose().kronecker(&a) + a.kronecker(&a.transpose())) * t;
        }
        h
    }
}

/// Bosonic annihilation operator on `d` levels.
pub fn annihilation(d: usize) -> DMatrix<f64> {
    let mut a = DMatrix::zeros(d, d);
    for n in 1..d {
        a[(n - 1, n)] = (n as f64).sqrt();
    }
    a
}

pub fn number(d: usize) -> DMatrix<f64> {
    DMatrix::from_fn(d, d, |i, j| if i == j { i as f64 } else { 0.0 })
}

/// `exp(-i h tau)` for a real symmetric `h`.
pub fn propagator(h: &DMatrix<f64>, tau: f64) -> DMatrix<C> {
    let eig = SymmetricEigen::new(h.clone());
    let v = eig.eigenvectors.map(|x| C::new(x, 0.0));
    let phases = DMatrix::from_diagonal(&eig.eigenvalues.map(|e| C::from_polar(1.0, -e * tau)));
    &v * phases * v.transpose()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy_chain(coupling: CouplingKind) -> ChainHamiltonian {
        ChainHamiltonian {
            onsite_energies: vec![0.9, 1.1, 1.3],
            hoppings: vec![0.4, 0.5],
            system_coupling: 0.3,
            coupling,
        }
    }

    #[test]
    fn bond_terms_sum_to_onsite_total() {
        let m = ChainModel::new(toy_chain(CouplingKind::SigmaX), 1.0, 2).unwrap();
        // trace of every bond term, lifted to the full space, adds up to the
        // trace of the full onsite Hamiltonian
        let dims = m.phys_dims();
        let total: f64 = dims.iter().product::<usize>() as f64;
        let mut tr = 0.0;
        for b in 0..m.site_count() - 1 {
            tr += m.bond_hamiltonian(b).trace() * total / (dims[b] * dims[b + 1]) as f64;
        }
        let mut expected = 0.0;
        for k in 0..m.site_count() {
            expected += m.onsite(k).trace() * total / dims[k] as f64;
        }
        assert!((tr - expected).abs() < 1e-10);
    }

    #[test]
    fn propagator_is_unitary() {
        let m = ChainModel::new(toy_chain(CouplingKind::SigmaPm), 1.0, 3).unwrap();
        let u = propagator(&m.bond_hamiltonian(0), 0.37);
        let err = (&u * u.adjoint() - DMatrix::identity(u.nrows(), u.nrows())).norm();
        assert!(err < 1e-12);
    }

    #[test]
    fn ladder_algebra() {
        let a = annihilation(4);
        let n = a.transpose() * &a;
        assert!((n - number(4)).norm() < 1e-14);
    }
}
