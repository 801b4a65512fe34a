//! Truncated multi-mode bosonic spaces and dense operators on them.
//!
//! A [`ProductSpace`] is an ordered list of labelled modes. Basis states are
//! ordered with the first mode as the most significant digit, so the operator
//! for mode `k` is `I ⊗ … ⊗ a ⊗ … ⊗ I`.

use std::fmt;
use std::ops::{Add, AddAssign, Mul, Neg, Sub};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type C64 = Complex64;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

const HERMITIAN_TOL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ModeSpec {
    pub label: String,
    pub dim: usize,
}

impl ModeSpec {
    pub fn new(label: impl Into<String>, dim: usize) -> Self {
        Self { label: label.into(), dim }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ProductSpace {
    modes: Vec<ModeSpec>,
}

impl ProductSpace {
    pub fn new(modes: Vec<ModeSpec>) -> Result<Self> {
        for (i, m) in modes.iter().enumerate() {
            if m.dim < 2 {
                return Err(Error::BadDimension { label: m.label.clone(), dim: m.dim });
            }
            if modes[..i].iter().any(|o| o.label == m.label) {
                return Err(Error::DuplicateMode(m.label.clone()));
            }
        }
        Ok(Self { modes })
    }

    /// Convenience constructor from `(label, dim)` pairs.
    pub fn from_dims(modes: &[(&str, usize)]) -> Result<Self> {
        Self::new(modes.iter().map(|&(l, d)| ModeSpec::new(l, d)).collect())
    }

    /// The one-dimensional space with no modes, used by pure scattering
    /// components.
    pub fn trivial() -> Self {
        Self { modes: Vec::new() }
    }

    pub fn modes(&self) -> &[ModeSpec] {
        &self.modes
    }

    pub fn is_trivial(&self) -> bool {
        self.modes.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.modes.iter().map(|m| m.dim).product()
    }

    pub fn position(&self, label: &str) -> Result<usize> {
        self.modes
            .iter()
            .position(|m| m.label == label)
            .ok_or_else(|| Error::UnknownMode(label.to_string()))
    }

    pub fn mode(&self, label: &str) -> Result<&ModeSpec> {
        self.position(label).map(|i| &self.modes[i])
    }

    /// Row-major strides: index = Σ level_k · stride_k.
    fn strides(&self) -> Vec<usize> {
        let mut strides = vec![1; self.modes.len()];
        for k in (0..self.modes.len().saturating_sub(1)).rev() {
            strides[k] = strides[k + 1] * self.modes[k + 1].dim;
        }
        strides
    }

    pub fn index(&self, levels: &[usize]) -> Result<usize> {
        if levels.len() != self.modes.len() {
            return Err(Error::InvalidState(format!(
                "expected {} levels, got {}",
                self.modes.len(),
                levels.len()
            )));
        }
        let mut idx = 0;
        for ((m, &n), s) in self.modes.iter().zip(levels).zip(self.strides()) {
            if n >= m.dim {
                return Err(Error::LevelOutOfRange { mode: m.label.clone(), level: n, dim: m.dim });
            }
            idx += n * s;
        }
        Ok(idx)
    }

    pub fn levels(&self, mut index: usize) -> Vec<usize> {
        let mut out = vec![0; self.modes.len()];
        for k in (0..self.modes.len()).rev() {
            out[k] = index % self.modes[k].dim;
            index /= self.modes[k].dim;
        }
        out
    }

    /// Modes of `self` followed by the modes of `other` not already present.
    /// Shared labels must agree on dimension.
    pub fn union(&self, other: &ProductSpace) -> Result<ProductSpace> {
        let mut modes = self.modes.clone();
        for m in &other.modes {
            match self.modes.iter().find(|o| o.label == m.label) {
                Some(o) if o.dim != m.dim => {
                    return Err(Error::SpaceMismatch { left: self.to_string(), right: other.to_string() })
                }
                Some(_) => {}
                None => modes.push(m.clone()),
            }
        }
        Ok(ProductSpace { modes })
    }

    pub fn contains(&self, other: &ProductSpace) -> bool {
        other.modes.iter().all(|m| self.modes.contains(m))
    }

    pub(crate) fn check_same(&self, other: &ProductSpace) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(Error::SpaceMismatch { left: self.to_string(), right: other.to_string() })
        }
    }
}

impl fmt::Display for ProductSpace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.modes.iter().map(|m| format!("{}:{}", m.label, m.dim)).collect();
        write!(f, "{}", parts.join(","))
    }
}

/// A dense operator on a [`ProductSpace`].
///
/// The arithmetic operator impls panic when the spaces differ; use
/// [`Op::checked_add`] and friends where the spaces come from user input.
#[derive(Clone, Debug, PartialEq)]
pub struct Op {
    space: ProductSpace,
    matrix: DMatrix<C64>,
}

impl Op {
    pub fn from_matrix(space: &ProductSpace, matrix: DMatrix<C64>) -> Result<Self> {
        let d = space.dim();
        if matrix.nrows() != d || matrix.ncols() != d {
            return Err(Error::InvalidParameter(format!(
                "matrix is {}x{}, space dimension is {d}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        Ok(Self { space: space.clone(), matrix })
    }

    pub fn zero(space: &ProductSpace) -> Self {
        let d = space.dim();
        Self { space: space.clone(), matrix: DMatrix::zeros(d, d) }
    }

    pub fn identity(space: &ProductSpace) -> Self {
        let d = space.dim();
        Self { space: space.clone(), matrix: DMatrix::identity(d, d) }
    }

    pub fn diagonal(space: &ProductSpace, diag: impl Fn(&[usize]) -> C64) -> Self {
        let d = space.dim();
        let mut m = DMatrix::zeros(d, d);
        for i in 0..d {
            m[(i, i)] = diag(&space.levels(i));
        }
        Self { space: space.clone(), matrix: m }
    }

    pub fn space(&self) -> &ProductSpace {
        &self.space
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.matrix
    }

    pub fn into_matrix(self) -> DMatrix<C64> {
        self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn get(&self, row: usize, col: usize) -> C64 {
        self.matrix[(row, col)]
    }

    /// Matrix element between two basis states given by per-mode levels.
    pub fn element(&self, bra: &[usize], ket: &[usize]) -> Result<C64> {
        Ok(self.matrix[(self.space.index(bra)?, self.space.index(ket)?)])
    }

    pub fn dag(&self) -> Op {
        Op { space: self.space.clone(), matrix: self.matrix.adjoint() }
    }

    pub fn scale(&self, c: impl Into<C64>) -> Op {
        Op { space: self.space.clone(), matrix: &self.matrix * c.into() }
    }

    pub fn pow(&self, n: u32) -> Op {
        let mut out = Op::identity(&self.space);
        for _ in 0..n {
            out = &out * self;
        }
        out
    }

    pub fn commutator(&self, other: &Op) -> Op {
        &(self * other) - &(other * self)
    }

    pub fn checked_add(&self, other: &Op) -> Result<Op> {
        self.space.check_same(&other.space)?;
        Ok(self + other)
    }

    pub fn checked_mul(&self, other: &Op) -> Result<Op> {
        self.space.check_same(&other.space)?;
        Ok(self * other)
    }

    pub fn trace(&self) -> C64 {
        self.matrix.trace()
    }

    /// Largest absolute entry.
    pub fn max_abs(&self) -> f64 {
        self.matrix.iter().fold(0.0, |acc, z| acc.max(z.norm()))
    }

    pub fn hermiticity_error(&self) -> f64 {
        let d = self.dim();
        let mut err: f64 = 0.0;
        for i in 0..d {
            for j in i..d {
                err = err.max((self.matrix[(i, j)] - self.matrix[(j, i)].conj()).norm());
            }
        }
        err
    }

    pub fn is_hermitian(&self) -> bool {
        self.hermiticity_error() <= HERMITIAN_TOL * self.max_abs().max(1.0)
    }

    /// Distance to another operator in the entrywise max norm.
    pub fn max_diff(&self, other: &Op) -> f64 {
        self.matrix.iter().zip(other.matrix.iter()).fold(0.0, |acc, (a, b)| acc.max((a - b).norm()))
    }

    /// Hilbert–Schmidt inner product `Tr(self† other)`.
    pub fn hs_inner(&self, other: &Op) -> C64 {
        self.matrix.iter().zip(other.matrix.iter()).map(|(a, b)| a.conj() * b).sum()
    }

    /// Tensor product on the concatenation of two disjoint spaces.
    pub fn kron(&self, other: &Op) -> Result<Op> {
        let mut modes = self.space.modes.clone();
        modes.extend(other.space.modes.iter().cloned());
        let space = ProductSpace::new(modes)?;
        Ok(Op { space, matrix: self.matrix.kronecker(&other.matrix) })
    }

    /// Re-express this operator on a larger space that contains every mode
    /// of `self.space()` (in any order), acting as identity on the rest.
    pub fn embed(&self, target: &ProductSpace) -> Result<Op> {
        if &self.space == target {
            return Ok(self.clone());
        }
        if !target.contains(&self.space) {
            return Err(Error::SpaceMismatch { left: self.space.to_string(), right: target.to_string() });
        }
        let positions: Vec<usize> =
            self.space.modes.iter().map(|m| target.position(&m.label)).collect::<Result<_>>()?;
        let d = target.dim();
        let sub_strides = self.space.strides();
        // Split each target index into (index within the operator's modes,
        // index over the remaining modes).
        let mut sub = vec![0usize; d];
        let mut rest = vec![0usize; d];
        for idx in 0..d {
            let lv = target.levels(idx);
            let mut s = 0;
            for (k, &p) in positions.iter().enumerate() {
                s += lv[p] * sub_strides[k];
            }
            let mut r = 0;
            for (p, m) in target.modes.iter().enumerate() {
                if !positions.contains(&p) {
                    r = r * m.dim + lv[p];
                }
            }
            sub[idx] = s;
            rest[idx] = r;
        }
        let mut m = DMatrix::zeros(d, d);
        for j in 0..d {
            for i in 0..d {
                if rest[i] == rest[j] {
                    m[(i, j)] = self.matrix[(sub[i], sub[j])];
                }
            }
        }
        Ok(Op { space: target.clone(), matrix: m })
    }
}

fn assert_same(a: &ProductSpace, b: &ProductSpace) {
    assert!(a == b, "operator spaces differ: [{a}] vs [{b}]");
}

impl Add for &Op {
    type Output = Op;
    fn add(self, rhs: &Op) -> Op {
        assert_same(&self.space, &rhs.space);
        Op { space: self.space.clone(), matrix: &self.matrix + &rhs.matrix }
    }
}

impl Add for Op {
    type Output = Op;
    fn add(self, rhs: Op) -> Op {
        &self + &rhs
    }
}

impl AddAssign<&Op> for Op {
    fn add_assign(&mut self, rhs: &Op) {
        assert_same(&self.space, &rhs.space);
        self.matrix += &rhs.matrix;
    }
}

impl Sub for &Op {
    type Output = Op;
    fn sub(self, rhs: &Op) -> Op {
        assert_same(&self.space, &rhs.space);
        Op { space: self.space.clone(), matrix: &self.matrix - &rhs.matrix }
    }
}

impl Sub for Op {
    type Output = Op;
    fn sub(self, rhs: Op) -> Op {
        &self - &rhs
    }
}

impl Neg for &Op {
    type Output = Op;
    fn neg(self) -> Op {
        Op { space: self.space.clone(), matrix: -&self.matrix }
    }
}

impl Mul for &Op {
    type Output = Op;
    fn mul(self, rhs: &Op) -> Op {
        assert_same(&self.space, &rhs.space);
        Op { space: self.space.clone(), matrix: &self.matrix * &rhs.matrix }
    }
}

impl Mul for Op {
    type Output = Op;
    fn mul(self, rhs: Op) -> Op {
        &self * &rhs
    }
}

impl Mul<C64> for &Op {
    type Output = Op;
    fn mul(self, rhs: C64) -> Op {
        self.scale(rhs)
    }
}

impl Mul<f64> for &Op {
    type Output = Op;
    fn mul(self, rhs: f64) -> Op {
        self.scale(rhs)
    }
}

fn local_lowering(dim: usize) -> DMatrix<C64> {
    let mut a = DMatrix::zeros(dim, dim);
    for n in 1..dim {
        a[(n - 1, n)] = C64::from((n as f64).sqrt());
    }
    a
}

fn embed_local(space: &ProductSpace, pos: usize, local: &DMatrix<C64>) -> Op {
    let mut m = DMatrix::from_element(1, 1, ONE);
    for (k, mode) in space.modes.iter().enumerate() {
        m = if k == pos { m.kronecker(local) } else { m.kronecker(&DMatrix::identity(mode.dim, mode.dim)) };
    }
    Op { space: space.clone(), matrix: m }
}

/// Annihilation operator of `mode`, embedded in `space`.
pub fn lowering(space: &ProductSpace, mode: &str) -> Result<Op> {
    let pos = space.position(mode)?;
    Ok(embed_local(space, pos, &local_lowering(space.modes[pos].dim)))
}

pub fn raising(space: &ProductSpace, mode: &str) -> Result<Op> {
    lowering(space, mode).map(|a| a.dag())
}

pub fn number(space: &ProductSpace, mode: &str) -> Result<Op> {
    let pos = space.position(mode)?;
    Ok(Op::diagonal(space, |lv| C64::from(lv[pos] as f64)))
}

/// Projector `|n⟩⟨n|` on one mode.
pub fn level_projector(space: &ProductSpace, mode: &str, level: usize) -> Result<Op> {
    let pos = space.position(mode)?;
    let dim = space.modes[pos].dim;
    if level >= dim {
        return Err(Error::LevelOutOfRange { mode: mode.to_string(), level, dim });
    }
    Ok(Op::diagonal(space, |lv| if lv[pos] == level { ONE } else { ZERO }))
}

/// Embed a mode-local matrix (dimension of `mode`) into `space`.
pub fn local_op(space: &ProductSpace, mode: &str, local: &DMatrix<C64>) -> Result<Op> {
    let pos = space.position(mode)?;
    let dim = space.modes[pos].dim;
    if local.nrows() != dim || local.ncols() != dim {
        return Err(Error::InvalidParameter(format!("local operator for `{mode}` must be {dim}x{dim}")));
    }
    Ok(embed_local(space, pos, local))
}

impl Op {
    /// The part of this mode's lowering operator acting on a single
    /// transition `|to⟩⟨from|` (with `to = from - 1`), scaled by `√from`.
    /// Summing the parts over all transitions recovers the lowering operator.
    pub fn transition_part(&self, mode: &str, from: usize, to: usize) -> Result<Op> {
        let pos = self.space.position(mode)?;
        let dim = self.space.modes[pos].dim;
        for level in [from, to] {
            if level >= dim {
                return Err(Error::LevelOutOfRange { mode: mode.to_string(), level, dim });
            }
        }
        if from != to + 1 {
            return Err(Error::InvalidParameter(format!(
                "lowering operators only connect adjacent levels, got {from}->{to}"
            )));
        }
        let reference = lowering(&self.space, mode)?;
        if self.max_diff(&reference) > 1e-12 {
            return Err(Error::InvalidParameter(format!("operator is not the lowering operator of `{mode}`")));
        }
        let mut local = DMatrix::zeros(dim, dim);
        local[(to, from)] = C64::from((from as f64).sqrt());
        Ok(embed_local(&self.space, pos, &local))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum StateData {
    Ket(DVector<C64>),
    Density(DMatrix<C64>),
}

/// A normalized pure or mixed state.
#[derive(Clone, Debug, PartialEq)]
pub struct State {
    space: ProductSpace,
    data: StateData,
}

const NORM_TOL: f64 = 1e-10;
const POSITIVITY_FLOOR: f64 = -1e-8;

impl State {
    pub fn ket(space: &ProductSpace, psi: DVector<C64>) -> Result<Self> {
        if psi.len() != space.dim() {
            return Err(Error::InvalidState(format!("ket length {} != dimension {}", psi.len(), space.dim())));
        }
        let norm = psi.norm();
        if (norm - 1.0).abs() > NORM_TOL {
            return Err(Error::InvalidState(format!("ket norm {norm} is not 1")));
        }
        Ok(Self { space: space.clone(), data: StateData::Ket(psi) })
    }

    /// Normalizes `psi` before validating it.
    pub fn ket_normalized(space: &ProductSpace, psi: DVector<C64>) -> Result<Self> {
        let n = psi.norm();
        if n == 0.0 {
            return Err(Error::InvalidState("zero vector".into()));
        }
        Self::ket(space, psi / C64::from(n))
    }

    pub fn density(space: &ProductSpace, rho: DMatrix<C64>) -> Result<Self> {
        let state = Self::density_unchecked(space, rho)?;
        state.validate()?;
        Ok(state)
    }

    pub(crate) fn density_unchecked(space: &ProductSpace, rho: DMatrix<C64>) -> Result<Self> {
        let d = space.dim();
        if rho.nrows() != d || rho.ncols() != d {
            return Err(Error::InvalidState(format!("density matrix must be {d}x{d}")));
        }
        Ok(Self { space: space.clone(), data: StateData::Density(rho) })
    }

    /// Product basis state with the given per-mode levels.
    pub fn basis(space: &ProductSpace, levels: &[usize]) -> Result<Self> {
        let mut psi = DVector::zeros(space.dim());
        psi[space.index(levels)?] = ONE;
        Ok(Self { space: space.clone(), data: StateData::Ket(psi) })
    }

    /// Tensor product of per-mode density matrices, in space order.
    pub fn product(space: &ProductSpace, locals: &[DMatrix<C64>]) -> Result<Self> {
        if locals.len() != space.modes.len() {
            return Err(Error::InvalidState("one local state per mode required".into()));
        }
        let mut rho = DMatrix::from_element(1, 1, ONE);
        for (m, local) in space.modes.iter().zip(locals) {
            if local.nrows() != m.dim || local.ncols() != m.dim {
                return Err(Error::InvalidState(format!("local state for `{}` has wrong size", m.label)));
            }
            rho = rho.kronecker(local);
        }
        Self::density(space, rho)
    }

    pub fn space(&self) -> &ProductSpace {
        &self.space
    }

    pub fn data(&self) -> &StateData {
        &self.data
    }

    pub fn is_ket(&self) -> bool {
        matches!(self.data, StateData::Ket(_))
    }

    pub fn to_density(&self) -> DMatrix<C64> {
        match &self.data {
            StateData::Ket(psi) => psi * psi.adjoint(),
            StateData::Density(rho) => rho.clone(),
        }
    }

    pub fn into_density(self) -> State {
        let rho = self.to_density();
        State { space: self.space, data: StateData::Density(rho) }
    }

    pub fn trace(&self) -> f64 {
        match &self.data {
            StateData::Ket(psi) => psi.norm_squared(),
            StateData::Density(rho) => rho.trace().re,
        }
    }

    pub fn min_eigenvalue(&self) -> f64 {
        match &self.data {
            StateData::Ket(_) => 0.0,
            StateData::Density(rho) => min_eigenvalue(rho),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match &self.data {
            StateData::Ket(psi) => {
                let n = psi.norm();
                if (n - 1.0).abs() > NORM_TOL {
                    return Err(Error::InvalidState(format!("ket norm {n} is not 1")));
                }
            }
            StateData::Density(rho) => {
                let herm = hermiticity_error(rho);
                if herm > NORM_TOL {
                    return Err(Error::InvalidState(format!("density matrix not Hermitian ({herm:e})")));
                }
                let tr = rho.trace();
                if (tr.re - 1.0).abs() > NORM_TOL || tr.im.abs() > NORM_TOL {
                    return Err(Error::InvalidState(format!("trace {tr} is not 1")));
                }
                let lo = min_eigenvalue(rho);
                if lo < POSITIVITY_FLOOR {
                    return Err(Error::InvalidState(format!("negative eigenvalue {lo:e}")));
                }
            }
        }
        Ok(())
    }

    /// Nearest valid density matrix: Hermitian part, negative eigenvalues
    /// clipped to zero, unit trace. Used to hand integrator output, which is
    /// physical only to the step tolerance, to the next stage.
    pub fn repaired(&self) -> Result<State> {
        let rho = self.to_density();
        let herm = (&rho + rho.adjoint()) * C64::from(0.5);
        let eig = herm.symmetric_eigen();
        let vals = eig.eigenvalues.map(|v| v.max(0.0));
        let total: f64 = vals.iter().sum();
        if !(total > 0.0) {
            return Err(Error::InvalidState("state has no positive weight".into()));
        }
        let diag = DMatrix::from_diagonal(&vals.map(|v| C64::from(v / total)));
        let v = &eig.eigenvectors;
        Self::density(&self.space, v * diag * v.adjoint())
    }

    /// Apply a unitary (or any operator) `U ρ U†`.
    pub fn transform(&self, u: &Op) -> Result<State> {
        self.space.check_same(u.space())?;
        let data = match &self.data {
            StateData::Ket(psi) => StateData::Ket(u.matrix() * psi),
            StateData::Density(rho) => StateData::Density(u.matrix() * rho * u.matrix().adjoint()),
        };
        Ok(State { space: self.space.clone(), data })
    }
}

pub(crate) fn hermiticity_error(m: &DMatrix<C64>) -> f64 {
    let d = m.nrows();
    let mut err: f64 = 0.0;
    for i in 0..d {
        for j in i..d {
            err = err.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    err
}

/// Smallest eigenvalue of the Hermitian part of `m`.
pub(crate) fn min_eigenvalue(m: &DMatrix<C64>) -> f64 {
    let herm = (m + m.adjoint()) * C64::from(0.5);
    herm.symmetric_eigenvalues().iter().cloned().fold(f64::INFINITY, f64::min)
}

/// `Tr[ρ·op]` for density matrices, `⟨ψ|op|ψ⟩` for kets.
pub fn expectation(state: &State, op: &Op) -> Result<C64> {
    state.space.check_same(op.space())?;
    Ok(match &state.data {
        StateData::Ket(psi) => (psi.adjoint() * op.matrix() * psi)[(0, 0)],
        StateData::Density(rho) => trace_product(rho, op.matrix()),
    })
}

/// `Tr[A·B]` without forming the product.
pub(crate) fn trace_product(a: &DMatrix<C64>, b: &DMatrix<C64>) -> C64 {
    let d = a.nrows();
    let mut acc = ZERO;
    for i in 0..d {
        for k in 0..d {
            acc += a[(i, k)] * b[(k, i)];
        }
    }
    acc
}
