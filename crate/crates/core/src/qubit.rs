//! Qubit states and channels in the Bloch representation, and the optimal
//! recovery fidelity of a channel.

use nalgebra::{Matrix2, Matrix3, Vector3};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::tolerances;

type C = Complex64;

const fn c(re: f64, im: f64) -> C {
    C::new(re, im)
}

pub fn pauli_x() -> Matrix2<C> {
    Matrix2::new(c(0.0, 0.0), c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0))
}

pub fn pauli_y() -> Matrix2<C> {
    Matrix2::new(c(0.0, 0.0), c(0.0, -1.0), c(0.0, 1.0), c(0.0, 0.0))
}

/// Basis order is (excited, ground) so that `sigma_z |+> = |+>`.
pub fn pauli_z() -> Matrix2<C> {
    Matrix2::new(c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(-1.0, 0.0))
}

/// Eigenvalues (ascending) of a 2x2 Hermitian matrix.
fn hermitian_eigenvalues(m: &Matrix2<C>) -> [f64; 2] {
    let mean = 0.5 * (m[(0, 0)].re + m[(1, 1)].re);
    let half = 0.5 * (m[(0, 0)].re - m[(1, 1)].re);
    let r = (half * half + m[(0, 1)].norm_sqr()).sqrt();
    [mean - r, mean + r]
}

/// A 2x2 density matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DensityMatrix(Matrix2<C>);

impl DensityMatrix {
    /// Validates hermiticity, unit trace and positivity.
    pub fn new(m: Matrix2<C>) -> Result<Self> {
        let herm = (m - m.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max);
        if herm > tolerances::ALGEBRAIC {
            return Err(Error::invalid(format!("matrix is not Hermitian (deviation {herm:e})")));
        }
        let tr = m.trace();
        if (tr - c(1.0, 0.0)).norm() > tolerances::ALGEBRAIC {
            return Err(Error::invalid(format!("trace {tr} differs from 1")));
        }
        let ev = hermitian_eigenvalues(&m);
        if ev[0] < -tolerances::PSD_SLACK {
            return Err(Error::invalid(format!("negative eigenvalue {:e}", ev[0])));
        }
        Ok(Self(m))
    }

    /// Wraps a matrix that is known to be a state up to round-off; the
    /// Hermitian part is kept.
    pub(crate) fn from_raw(m: Matrix2<C>) -> Self {
        Self((m + m.adjoint()).scale(0.5))
    }

    pub fn maximally_mixed() -> Self {
        Self(Matrix2::identity() * c(0.5, 0.0))
    }

    pub fn matrix(&self) -> &Matrix2<C> {
        &self.0
    }

    pub fn eigenvalues(&self) -> [f64; 2] {
        hermitian_eigenvalues(&self.0)
    }

    pub fn bloch(&self) -> BlochVector {
        bloch_from_density(self)
    }
}

/// Polarization vector `(P_x, P_y, P_z)` with `|P| <= 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlochVector(Vector3<f64>);

impl BlochVector {
    pub fn new(x: f64, y: f64, z: f64) -> Result<Self> {
        Self::from_vector(Vector3::new(x, y, z))
    }

    pub fn from_vector(v: Vector3<f64>) -> Result<Self> {
        if !v.iter().all(|x| x.is_finite()) {
            return Err(Error::invalid("Bloch vector has non-finite components"));
        }
        if v.norm() > 1.0 + tolerances::BLOCH_SLACK {
            return Err(Error::invalid(format!("Bloch vector length {} exceeds 1", v.norm())));
        }
        Ok(Self(v))
    }

    pub fn origin() -> Self {
        Self(Vector3::zeros())
    }

    pub fn vector(&self) -> &Vector3<f64> {
        &self.0
    }

    pub fn norm(&self) -> f64 {
        self.0.norm()
    }
}

pub fn bloch_from_density(rho: &DensityMatrix) -> BlochVector {
    let m = rho.matrix();
    let tr = |p: Matrix2<C>| (m * p).trace().re;
    BlochVector(Vector3::new(tr(pauli_x()), tr(pauli_y()), tr(pauli_z())))
}

pub fn density_from_bloch(p: &BlochVector) -> Result<DensityMatrix> {
    let v = BlochVector::from_vector(p.0)?.0;
    let m = (Matrix2::identity() + pauli_x() * c(v.x, 0.0) + pauli_y() * c(v.y, 0.0) + pauli_z() * c(v.z, 0.0))
        * c(0.5, 0.0);
    Ok(DensityMatrix(m))
}

/// `D = 1/2 ||rho1 - rho2||_1` from the eigenvalues of the difference.
pub fn trace_distance(rho1: &DensityMatrix, rho2: &DensityMatrix) -> f64 {
    let ev = hermitian_eigenvalues(&(rho1.0 - rho2.0));
    0.5 * (ev[0].abs() + ev[1].abs())
}

/// `D = 1/2 |P1 - P2|`.
pub fn trace_distance_bloch(p1: &BlochVector, p2: &BlochVector) -> f64 {
    0.5 * (p1.0 - p2.0).norm()
}

/// Unit vector `n(theta, phi)`.
pub fn direction(theta: f64, phi: f64) -> Vector3<f64> {
    Vector3::new(theta.sin() * phi.cos(), theta.sin() * phi.sin(), theta.cos())
}

/// The pure states `|n+>` and `|n->` along a unit direction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolarizedPair {
    pub direction: Vector3<f64>,
    pub plus: DensityMatrix,
    pub minus: DensityMatrix,
}

impl PolarizedPair {
    pub fn new(direction: Vector3<f64>) -> Result<Self> {
        let n = direction.norm();
        if (n - 1.0).abs() > tolerances::ORTHOGONALITY {
            return Err(Error::invalid(format!("direction has length {n}, expected 1")));
        }
        let d = direction / n;
        Ok(Self {
            direction: d,
            plus: density_from_bloch(&BlochVector(d))?,
            minus: density_from_bloch(&BlochVector(-d))?,
        })
    }
}

/// Probe inputs for affine channel tomography.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Probe {
    PlusX,
    PlusY,
    PlusZ,
    Origin,
}

/// Bloch-ball map `P -> M P + q`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AffineChannel {
    pub linear: Matrix3<f64>,
    pub offset: Vector3<f64>,
}

impl AffineChannel {
    /// Checks that the map sends the Bloch ball into itself on a probe grid.
    pub fn new(linear: Matrix3<f64>, offset: Vector3<f64>) -> Result<Self> {
        let ch = Self { linear, offset };
        let worst = ch.max_image_norm();
        if worst > 1.0 + tolerances::CHANNEL_SLACK {
            return Err(Error::invalid(format!("channel maps the Bloch ball outside itself ({worst})")));
        }
        Ok(ch)
    }

    pub fn identity() -> Self {
        Self { linear: Matrix3::identity(), offset: Vector3::zeros() }
    }

    /// Channel from the evolved antipodal axis pairs: column `a` of `M` is
    /// `(P_a+ - P_a-)/2` and `q` the midpoint of the z pair.
    pub fn from_antipodal_pairs(plus: [BlochVector; 3], minus: [BlochVector; 3]) -> Self {
        let mut linear = Matrix3::zeros();
        for a in 0..3 {
            linear.set_column(a, &(0.5 * (plus[a].0 - minus[a].0)));
        }
        Self { linear, offset: 0.5 * (plus[2].0 + minus[2].0) }
    }

    pub fn apply(&self, p: &BlochVector) -> Vector3<f64> {
        self.linear * p.0 + self.offset
    }

    /// Largest image length over a sphere grid (the image of the ball is an
    /// ellipsoid, so its boundary is reached on the sphere).
    pub fn max_image_norm(&self) -> f64 {
        let (nt, np) = (24, 48);
        let mut worst = self.offset.norm();
        for i in 0..=nt {
            let theta = std::f64::consts::PI * i as f64 / nt as f64;
            for j in 0..np {
                let phi = 2.0 * std::f64::consts::PI * j as f64 / np as f64;
                worst = worst.max((self.linear * direction(theta, phi) + self.offset).norm());
            }
        }
        worst
    }

    /// Distinguishability of the antipodal pair along `n`: `|M n|`.
    pub fn distinguishability(&self, n: &Vector3<f64>) -> f64 {
        (self.linear * n).norm()
    }
}

pub fn reconstruct_affine_map(images: &[(Probe, BlochVector)]) -> Result<AffineChannel> {
    let find = |p: Probe| {
        images
            .iter()
            .find(|(k, _)| *k == p)
            .map(|(_, v)| v.0)
            .ok_or_else(|| Error::invalid(format!("missing probe image {p:?}")))
    };
    let q = find(Probe::Origin)?;
    let mut linear = Matrix3::zeros();
    for (a, p) in [Probe::PlusX, Probe::PlusY, Probe::PlusZ].into_iter().enumerate() {
        linear.set_column(a, &(find(p)? - q));
    }
    AffineChannel::new(linear, q)
}

/// `||A||_{2,1}`: sum of the Euclidean norms of the columns.
pub fn l21_norm(m: &Matrix3<f64>) -> f64 {
    m.column_iter().map(|col| col.norm()).sum()
}

/// `F = 1/2 + 1/12 sum_a |Delta_a|`, rows of `deltas` indexed by the initial
/// direction, columns by Pauli component.
pub fn optimal_fidelity_from_deltas(deltas: &Matrix3<f64>) -> f64 {
    0.5 + deltas.row_iter().map(|r| r.norm()).sum::<f64>() / 12.0
}

/// `F = 1/2 + ||M||_{2,1} / 6`.
pub fn optimal_fidelity_from_channel(ch: &AffineChannel) -> f64 {
    0.5 + l21_norm(&ch.linear) / 6.0
}
