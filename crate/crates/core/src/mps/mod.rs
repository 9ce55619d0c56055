//! Matrix product state evolution of the qubit plus chain.
//!
//! Site 0 is the qubit, sites `1..=M` the chain bosons. A time step is a
//! symmetric sweep: half-step bond gates from left to right (the last bond
//! takes the full step), then half-step gates back from right to left. The
//! orthogonality center always sits on the bond being updated, so each SVD
//! truncation is optimal in the two-norm.

pub mod exact;
pub mod ops;

use std::io::{Read, Write};

use faer::Mat;
use nalgebra::{DMatrix, Matrix2};
use num_complex::Complex64 as C;

use crate::error::{Error, Result};
use crate::qubit::{BlochVector, DensityMatrix};
use crate::tolerances;

pub use ops::ChainModel;

/// Bond-dimension cap, relative singular-value cutoff and boson occupation
/// cutoff.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruncationPolicy {
    pub max_bond: usize,
    pub cutoff: f64,
    pub n_max: usize,
}

impl Default for TruncationPolicy {
    fn default() -> Self {
        Self { max_bond: 60, cutoff: 1e-8, n_max: 4 }
    }
}

impl TruncationPolicy {
    pub fn validate(&self) -> Result<()> {
        if self.max_bond == 0 {
            return Err(Error::invalid("max_bond must be at least 1"));
        }
        if !(0.0..1.0).contains(&self.cutoff) {
            return Err(Error::invalid("singular-value cutoff must lie in [0, 1)"));
        }
        if self.n_max == 0 {
            return Err(Error::invalid("n_max must be at least 1"));
        }
        Ok(())
    }

    pub fn with_n_max(self, n_max: usize) -> Self {
        Self { n_max, ..self }
    }

    /// No cap and no cutoff beyond exact zeros.
    pub fn exact(n_max: usize) -> Self {
        Self { max_bond: usize::MAX, cutoff: 0.0, n_max }
    }
}

/// One site tensor stored as one `left x right` matrix per physical index.
#[derive(Debug, Clone)]
struct Site {
    blocks: Vec<Mat<C>>,
}

impl Site {
    fn left(&self) -> usize {
        self.blocks[0].nrows()
    }

    fn right(&self) -> usize {
        self.blocks[0].ncols()
    }
}

#[derive(Debug, Clone)]
pub struct MatrixProductState {
    sites: Vec<Site>,
    center: usize,
    discarded_weight: f64,
    max_norm_defect: f64,
}

impl MatrixProductState {
    /// Product state `(a |e> + b |g>) (x) |0...0>`.
    pub fn product(amplitudes: [C; 2], dims: &[usize]) -> Result<Self> {
        if dims.first() != Some(&2) || dims[1..].iter().any(|d| *d < 1) {
            return Err(Error::invalid("site 0 must be the qubit"));
        }
        let norm = (amplitudes[0].norm_sqr() + amplitudes[1].norm_sqr()).sqrt();
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(Error::invalid("qubit amplitudes must be finite and not both zero"));
        }
        let mut sites = Vec::with_capacity(dims.len());
        sites.push(Site { blocks: amplitudes.iter().map(|a| Mat::from_fn(1, 1, |_, _| a / norm)).collect() });
        for d in &dims[1..] {
            sites.push(Site {
                blocks: (0..*d).map(|s| Mat::from_fn(1, 1, |_, _| C::new(if s == 0 { 1.0 } else { 0.0 }, 0.0))).collect(),
            });
        }
        Ok(Self { sites, center: 0, discarded_weight: 0.0, max_norm_defect: 0.0 })
    }

    pub fn site_count(&self) -> usize {
        self.sites.len()
    }

    pub fn phys_dims(&self) -> Vec<usize> {
        self.sites.iter().map(|s| s.blocks.len()).collect()
    }

    /// Bond dimensions between consecutive sites.
    pub fn bond_dims(&self) -> Vec<usize> {
        self.sites.iter().skip(1).map(Site::left).collect()
    }

    pub fn max_bond(&self) -> usize {
        self.bond_dims().into_iter().max().unwrap_or(1)
    }

    pub fn orthogonality_center(&self) -> usize {
        self.center
    }

    /// Accumulated discarded probability over all truncations so far.
    pub fn discarded_weight(&self) -> f64 {
        self.discarded_weight
    }

    /// Largest deviation of the pre-truncation norm from 1 seen so far.
    pub fn max_norm_defect(&self) -> f64 {
        self.max_norm_defect
    }

    pub fn norm(&self) -> f64 {
        self.overlap(self).re.sqrt()
    }

    /// `<self|other>`.
    pub fn overlap(&self, other: &Self) -> C {
        let mut env = Mat::<C>::from_fn(1, 1, |_, _| C::new(1.0, 0.0));
        for (a, b) in self.sites.iter().zip(&other.sites) {
            let mut next = Mat::<C>::zeros(a.right(), b.right());
            for (x, y) in a.blocks.iter().zip(&b.blocks) {
                next += x.adjoint() * &env * y;
            }
            env = next;
        }
        env[(0, 0)]
    }

    /// Dense state vector, site 0 most significant.
    pub fn to_dense(&self) -> Vec<C> {
        let mut cur = Mat::<C>::from_fn(1, 1, |_, _| C::new(1.0, 0.0));
        for site in &self.sites {
            let d = site.blocks.len();
            let mut next = Mat::<C>::zeros(cur.nrows() * d, site.right());
            for (s, blk) in site.blocks.iter().enumerate() {
                let part = &cur * blk;
                for i in 0..cur.nrows() {
                    for j in 0..site.right() {
                        next[(i * d + s, j)] = part[(i, j)];
                    }
                }
            }
            cur = next;
        }
        (0..cur.nrows()).map(|i| cur[(i, 0)]).collect()
    }

    fn check_finite(&self) -> Result<()> {
        for (k, site) in self.sites.iter().enumerate() {
            for blk in &site.blocks {
                for j in 0..blk.ncols() {
                    for i in 0..blk.nrows() {
                        let z = blk[(i, j)];
                        if !(z.re.is_finite() && z.im.is_finite()) {
                            return Err(Error::numerical(format!("non-finite tensor entry at site {k}")));
                        }
                    }
                }
            }
        }
        Ok(())
    }
}

/// `Tr_env |a><b|` as a 2x2 matrix on the qubit.
pub fn qubit_transition(a: &MatrixProductState, b: &MatrixProductState) -> Matrix2<C> {
    assert_eq!(a.phys_dims(), b.phys_dims(), "states live on different chains");
    let mut env = Mat::<C>::from_fn(1, 1, |_, _| C::new(1.0, 0.0));
    for k in (1..a.sites.len()).rev() {
        let (x, y) = (&a.sites[k], &b.sites[k]);
        let mut next = Mat::<C>::zeros(x.left(), y.left());
        for (p, q) in x.blocks.iter().zip(&y.blocks) {
            next += p * &env * q.adjoint();
        }
        env = next;
    }
    let (x, y) = (&a.sites[0], &b.sites[0]);
    let mut out = Matrix2::zeros();
    for s in 0..2 {
        let left = &x.blocks[s] * &env;
        for t in 0..2 {
            out[(s, t)] = (&left * y.blocks[t].adjoint())[(0, 0)];
        }
    }
    out
}

/// Reduced state of the qubit by exact contraction of all chain sites.
pub fn reduced_qubit_density(state: &MatrixProductState) -> DensityMatrix {
    let m = qubit_transition(state, state);
    let tr = (m[(0, 0)] + m[(1, 1)]).re;
    DensityMatrix::from_raw(m / C::new(tr, 0.0))
}

/// Pure qubit state with Bloch vector `p` (|p| = 1) times the chain vacuum.
pub fn build_initial_state(p: &BlochVector, model: &ChainModel, policy: &TruncationPolicy) -> Result<MatrixProductState> {
    policy.validate()?;
    if (p.norm() - 1.0).abs() > tolerances::BLOCH_SLACK {
        return Err(Error::invalid(format!("initial qubit state must be pure, |P| = {}", p.norm())));
    }
    if policy.n_max != model.n_max {
        return Err(Error::invalid("policy and model disagree on n_max"));
    }
    MatrixProductState::product(qubit_amplitudes(p), &model.phys_dims())
}

/// Amplitudes `(cos(theta/2), e^{i phi} sin(theta/2))` on (excited, ground).
pub fn qubit_amplitudes(p: &BlochVector) -> [C; 2] {
    let v = p.vector();
    let theta = v.z.clamp(-1.0, 1.0).acos();
    let phi = v.y.atan2(v.x);
    [C::new((0.5 * theta).cos(), 0.0), C::from_polar((0.5 * theta).sin(), phi)]
}

/// Gate sequence for one second-order step.
#[derive(Debug, Clone)]
pub struct TrotterPlan {
    dt: f64,
    dims: Vec<usize>,
    half: Vec<DMatrix<C>>,
    last_full: Option<DMatrix<C>>,
    single_site: Option<DMatrix<C>>,
    dense_half: Vec<Mat<C>>,
    dense_last: Option<Mat<C>>,
}

fn to_faer(m: &DMatrix<C>) -> Mat<C> {
    Mat::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
}

impl TrotterPlan {
    pub fn new(model: &ChainModel, dt: f64) -> Result<Self> {
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(Error::invalid("time step must be positive"));
        }
        let l = model.site_count();
        let dims = model.phys_dims();
        if l == 1 {
            return Ok(Self {
                dt,
                dims,
                half: vec![],
                last_full: None,
                single_site: Some(ops::propagator(&model.onsite(0), dt)),
                dense_half: vec![],
                dense_last: None,
            });
        }
        let hs: Vec<DMatrix<f64>> = (0..l - 1).map(|b| model.bond_hamiltonian(b)).collect();
        let half: Vec<DMatrix<C>> = hs[..l - 2].iter().map(|h| ops::propagator(h, 0.5 * dt)).collect();
        let last = ops::propagator(&hs[l - 2], dt);
        Ok(Self {
            dt,
            dims,
            dense_half: half.iter().map(to_faer).collect(),
            dense_last: Some(to_faer(&last)),
            half,
            last_full: Some(last),
            single_site: None,
        })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn phys_dims(&self) -> &[usize] {
        &self.dims
    }

    /// `(bond, gate)` in application order for one step.
    pub fn gate_sequence(&self) -> Vec<(usize, &DMatrix<C>)> {
        let Some(last) = &self.last_full else { return vec![] };
        let nb = self.half.len();
        let mut seq: Vec<(usize, &DMatrix<C>)> = self.half.iter().enumerate().collect();
        seq.push((nb, last));
        seq.extend(self.half.iter().enumerate().rev());
        seq
    }

    pub fn single_site_gate(&self) -> Option<&DMatrix<C>> {
        self.single_site.as_ref()
    }
}

/// Outcome of one two-site update.
#[derive(Debug, Clone, Copy)]
struct BondUpdate {
    discarded: f64,
    norm_defect: f64,
}

enum Sweep {
    Right,
    Left,
}

fn update_bond(
    state: &mut MatrixProductState,
    b: usize,
    gate: &Mat<C>,
    policy: &TruncationPolicy,
    dir: Sweep,
) -> Result<BondUpdate> {
    let (a, c) = (&state.sites[b], &state.sites[b + 1]);
    let (d1, d2) = (a.blocks.len(), c.blocks.len());
    let (dl, dm, dr) = (a.left(), a.right(), c.right());
    // theta0[(s1, l), (s2, r)] = sum_m A^s1[l, m] B^s2[m, r]
    let left = Mat::<C>::from_fn(d1 * dl, dm, |i, m| a.blocks[i / dl][(i % dl, m)]);
    let right = Mat::<C>::from_fn(dm, d2 * dr, |m, j| c.blocks[j / dr][(m, j % dr)]);
    let theta0 = &left * &right;
    // gate acts on the combined physical index
    let phys = Mat::<C>::from_fn(d1 * d2, dl * dr, |s, j| theta0[((s / d2) * dl + j % dl, (s % d2) * dr + j / dl)]);
    let mixed = gate * &phys;
    let theta = Mat::<C>::from_fn(d1 * dl, d2 * dr, |i, j| mixed[((i / dl) * d2 + j / dr, (j % dr) * dl + i % dl)]);

    let svd = theta
        .thin_svd()
        .map_err(|e| Error::numerical(format!("SVD failed on bond {b}: {e:?}")))?;
    let s = svd.S().column_vector();
    let sv: Vec<f64> = (0..s.nrows()).map(|k| s[k].re).collect();
    let total: f64 = sv.iter().map(|x| x * x).sum();
    if !total.is_finite() || !(total > 0.0) {
        return Err(Error::numerical(format!("singular values on bond {b} are not finite or vanish (norm^2 = {total})")));
    }
    let largest = sv[0];
    let mut keep = sv
        .iter()
        .take(policy.max_bond)
        .take_while(|x| **x > policy.cutoff * largest && **x > 0.0)
        .count();
    keep = keep.max(1);
    let kept: f64 = sv[..keep].iter().map(|x| x * x).sum();
    let scale = 1.0 / kept.sqrt();

    let (u, v) = (svd.U(), svd.V());
    let weight = |k: usize| sv[k] * scale;
    let (left_w, right_w): (Box<dyn Fn(usize) -> f64>, Box<dyn Fn(usize) -> f64>) = match dir {
        Sweep::Right => (Box::new(|_| 1.0), Box::new(weight)),
        Sweep::Left => (Box::new(weight), Box::new(|_| 1.0)),
    };
    let new_a: Vec<Mat<C>> = (0..d1).map(|t1| Mat::from_fn(dl, keep, |i, k| u[(t1 * dl + i, k)] * left_w(k))).collect();
    let new_c: Vec<Mat<C>> = (0..d2).map(|t2| Mat::from_fn(keep, dr, |k, j| v[(t2 * dr + j, k)].conj() * right_w(k))).collect();
    state.sites[b].blocks = new_a;
    state.sites[b + 1].blocks = new_c;
    state.center = match dir {
        Sweep::Right => b + 1,
        Sweep::Left => b,
    };
    Ok(BondUpdate { discarded: (total - kept) / total, norm_defect: (total - 1.0).abs() })
}

/// Advances `state` by one step of `plan`.
pub fn step(state: &mut MatrixProductState, plan: &TrotterPlan, policy: &TruncationPolicy) -> Result<()> {
    if state.phys_dims() != plan.dims {
        return Err(Error::invalid("plan and state were built for different chains"));
    }
    if let Some(g) = &plan.single_site {
        let site = &mut state.sites[0];
        let old = site.blocks.clone();
        for t in 0..2 {
            site.blocks[t] = Mat::from_fn(1, old[0].ncols(), |i, j| old[0][(i, j)] * g[(t, 0)] + old[1][(i, j)] * g[(t, 1)]);
        }
        return Ok(());
    }
    if state.center != 0 {
        return Err(Error::invalid("state must have its orthogonality center on the qubit"));
    }
    let l = state.sites.len();
    let record = |u: BondUpdate, s: &mut MatrixProductState| {
        s.discarded_weight += u.discarded;
        s.max_norm_defect = s.max_norm_defect.max(u.norm_defect);
    };
    for b in 0..l - 2 {
        let u = update_bond(state, b, &plan.dense_half[b], policy, Sweep::Right)?;
        record(u, state);
    }
    let u = update_bond(state, l - 2, plan.dense_last.as_ref().unwrap(), policy, Sweep::Left)?;
    record(u, state);
    for b in (0..l - 2).rev() {
        let u = update_bond(state, b, &plan.dense_half[b], policy, Sweep::Left)?;
        record(u, state);
    }
    state.check_finite()
}

/// Sample taken during [`evolve`].
#[derive(Debug, Clone)]
pub struct Sample {
    pub step: usize,
    pub time: f64,
    pub density: DensityMatrix,
    pub discarded_weight: f64,
    pub max_bond: usize,
}

/// Evolves for `steps` steps, sampling the reduced qubit state at step 0 and
/// every `sample_stride` steps.
pub fn evolve(
    state: &mut MatrixProductState,
    plan: &TrotterPlan,
    policy: &TruncationPolicy,
    steps: usize,
    sample_stride: usize,
) -> Result<Vec<Sample>> {
    policy.validate()?;
    if sample_stride == 0 {
        return Err(Error::invalid("sample_stride must be positive"));
    }
    let sample = |s: &MatrixProductState, k: usize| Sample {
        step: k,
        time: k as f64 * plan.dt,
        density: reduced_qubit_density(s),
        discarded_weight: s.discarded_weight,
        max_bond: s.max_bond(),
    };
    let mut out = vec![sample(state, 0)];
    for k in 1..=steps {
        step(state, plan, policy).map_err(|e| match e {
            Error::NumericalFailure(m) => Error::NumericalFailure(format!("{m} (step {k}, t = {})", k as f64 * plan.dt)),
            other => other,
        })?;
        if k % sample_stride == 0 {
            out.push(sample(state, k));
        }
    }
    Ok(out)
}

const CHECKPOINT_MAGIC: &[u8; 8] = b"QMEMMPS\0";
const CHECKPOINT_VERSION: u32 = 1;

/// Header stored in front of a checkpointed state.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckpointHeader {
    pub step: u64,
    pub dt: f64,
    pub policy: TruncationPolicy,
}

fn put_u64<W: Write>(w: &mut W, v: u64) -> std::io::Result<()> {
    w.write_all(&v.to_le_bytes())
}

fn put_f64<W: Write>(w: &mut W, v: f64) -> std::io::Result<()> {
    w.write_all(&v.to_le_bytes())
}

fn get_u64<R: Read>(r: &mut R) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn get_f64<R: Read>(r: &mut R) -> Result<f64> {
    Ok(f64::from_bits(get_u64(r)?))
}

pub fn write_checkpoint<W: Write>(mut w: W, state: &MatrixProductState, header: &CheckpointHeader) -> Result<()> {
    w.write_all(CHECKPOINT_MAGIC)?;
    w.write_all(&CHECKPOINT_VERSION.to_le_bytes())?;
    put_u64(&mut w, header.step)?;
    put_f64(&mut w, header.dt)?;
    put_u64(&mut w, header.policy.max_bond as u64)?;
    put_f64(&mut w, header.policy.cutoff)?;
    put_u64(&mut w, header.policy.n_max as u64)?;
    put_u64(&mut w, state.sites.len() as u64)?;
    for site in &state.sites {
        put_u64(&mut w, site.blocks.len() as u64)?;
        put_u64(&mut w, site.left() as u64)?;
        put_u64(&mut w, site.right() as u64)?;
    }
    put_u64(&mut w, state.center as u64)?;
    put_f64(&mut w, state.discarded_weight)?;
    put_f64(&mut w, state.max_norm_defect)?;
    for site in &state.sites {
        for blk in &site.blocks {
            for j in 0..blk.ncols() {
                for i in 0..blk.nrows() {
                    put_f64(&mut w, blk[(i, j)].re)?;
                    put_f64(&mut w, blk[(i, j)].im)?;
                }
            }
        }
    }
    Ok(())
}

pub fn read_checkpoint<R: Read>(mut r: R) -> Result<(MatrixProductState, CheckpointHeader)> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != CHECKPOINT_MAGIC {
        return Err(Error::invalid("not an MPS checkpoint"));
    }
    let mut vb = [0u8; 4];
    r.read_exact(&mut vb)?;
    let version = u32::from_le_bytes(vb);
    if version != CHECKPOINT_VERSION {
        return Err(Error::invalid(format!("unsupported checkpoint version {version}")));
    }
    let step = get_u64(&mut r)?;
    let dt = get_f64(&mut r)?;
    let policy = TruncationPolicy {
        max_bond: get_u64(&mut r)? as usize,
        cutoff: get_f64(&mut r)?,
        n_max: get_u64(&mut r)? as usize,
    };
    let n = get_u64(&mut r)? as usize;
    if n == 0 || n > 1 << 20 {
        return Err(Error::invalid("corrupt checkpoint site count"));
    }
    let mut shapes = Vec::with_capacity(n);
    for _ in 0..n {
        let d = get_u64(&mut r)? as usize;
        let (l, rr) = (get_u64(&mut r)? as usize, get_u64(&mut r)? as usize);
        if d == 0 || l == 0 || rr == 0 || d.saturating_mul(l).saturating_mul(rr) > 1 << 28 {
            return Err(Error::invalid("corrupt checkpoint tensor shape"));
        }
        shapes.push((d, l, rr));
    }
    for w in shapes.windows(2) {
        if w[0].2 != w[1].1 {
            return Err(Error::invalid("checkpoint bond dimensions do not chain"));
        }
    }
    let center = get_u64(&mut r)? as usize;
    let discarded_weight = get_f64(&mut r)?;
    let max_norm_defect = get_f64(&mut r)?;
    let mut sites = Vec::with_capacity(n);
    for (d, l, rr) in shapes {
        let mut blocks = Vec::with_capacity(d);
        for _ in 0..d {
            let mut m = Mat::<C>::zeros(l, rr);
            for j in 0..rr {
                for i in 0..l {
                    m[(i, j)] = C::new(get_f64(&mut r)?, get_f64(&mut r)?);
                }
            }
            blocks.push(m);
        }
        sites.push(Site { blocks });
    }
    let state = MatrixProductState { sites, center, discarded_weight, max_norm_defect };
    state.check_finite()?;
    Ok((state, CheckpointHeader { step, dt, policy }))
}
