//! Dense complex linear algebra for small bipartite systems.
//!
//! Everything here works on explicit `dim × dim` matrices stored row-major.
//! Problem sizes never exceed 9 (two qutrits), so there is no sparse path and
//! no attempt at blocking. Bipartite index convention: for a product basis
//! `|m⟩_A ⊗ |n⟩_B` with local dimension `d_B`, the flat index is `m * d_B + n`
//! (left factor is the slow index).

use std::fmt;

use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;

/// Entrywise tolerance for the unitary / projector / Hermitian checks.
pub const KIND_TOLERANCE: f64 = 1e-12;
/// Smallest eigenvalue a density operator may have.
pub const POSITIVITY_TOLERANCE: f64 = 1e-10;
/// Probabilities within this distance of `[0, 1]` are clamped; anything
/// further out is reported as an internal inconsistency.
pub const CLAMP_WINDOW: f64 = 1e-9;

const ZERO: C64 = C64::new(0.0, 0.0);
const ONE: C64 = C64::new(1.0, 0.0);

/// The two parties sharing a bipartite state.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub enum Party {
    A,
    B,
}

impl fmt::Display for Party {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Party::A => f.write_str("A"),
            Party::B => f.write_str("B"),
        }
    }
}

/// A normalized pure state.
#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    amps: Vec<C64>,
}

impl StateVector {
    /// Builds a state from (possibly unnormalized) amplitudes.
    pub fn new(amps: Vec<C64>) -> Result<Self> {
        if amps.is_empty() {
            return Err(Error::invalid("state vector must have positive dimension"));
        }
        if amps.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::invalid("state vector has non-finite amplitudes"));
        }
        let norm = amps.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Err(Error::invalid("state vector has zero norm"));
        }
        Ok(Self {
            amps: amps.into_iter().map(|z| z / norm).collect(),
        })
    }

    pub fn from_real(amps: &[f64]) -> Result<Self> {
        Self::new(amps.iter().map(|&x| C64::new(x, 0.0)).collect())
    }

    /// Computational basis vector `|index⟩` (zero-based).
    pub fn basis(dim: usize, index: usize) -> Result<Self> {
        if index >= dim {
            return Err(Error::invalid(format!(
                "basis index {index} out of range for dimension {dim}"
            )));
        }
        let mut amps = vec![ZERO; dim];
        amps[index] = ONE;
        Ok(Self { amps })
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn amps(&self) -> &[C64] {
        &self.amps
    }

    pub fn norm(&self) -> f64 {
        self.amps.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// `⟨self|other⟩`.
    pub fn inner(&self, other: &StateVector) -> Result<C64> {
        check_dims(self.dim(), other.dim())?;
        Ok(self
            .amps
            .iter()
            .zip(&other.amps)
            .map(|(a, b)| a.conj() * b)
            .sum())
    }

    /// Rank-one projector `|self⟩⟨self|`.
    pub fn projector(&self) -> Operator {
        let n = self.dim();
        let mut entries = Vec::with_capacity(n * n);
        for r in 0..n {
            for c in 0..n {
                entries.push(self.amps[r] * self.amps[c].conj());
            }
        }
        Operator {
            dim: n,
            entries,
            kind: OperatorKind::Projector,
        }
    }

    /// `|self⟩⟨self|` tagged as a density operator.
    pub fn density(&self) -> Operator {
        Operator {
            kind: OperatorKind::Density,
            ..self.projector()
        }
    }
}

/// What an [`Operator`] is known to be. Constructors validate the tag.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OperatorKind {
    Unitary,
    Projector,
    Density,
    Generic,
}

/// Dense square complex matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Operator {
    dim: usize,
    entries: Vec<C64>,
    kind: OperatorKind,
}

impl Operator {
    /// Row-major `entries`; validates the invariants of `kind`.
    pub fn new(dim: usize, entries: Vec<C64>, kind: OperatorKind) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("operator must have positive dimension"));
        }
        if entries.len() != dim * dim {
            return Err(Error::invalid(format!(
                "expected {} entries for a {dim}x{dim} operator, got {}",
                dim * dim,
                entries.len()
            )));
        }
        if entries.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::invalid("operator has non-finite entries"));
        }
        let op = Self { dim, entries, kind };
        op.validate()?;
        Ok(op)
    }

    pub fn generic(dim: usize, entries: Vec<C64>) -> Result<Self> {
        Self::new(dim, entries, OperatorKind::Generic)
    }

    pub fn from_real(dim: usize, entries: &[f64], kind: OperatorKind) -> Result<Self> {
        Self::new(dim, entries.iter().map(|&x| C64::new(x, 0.0)).collect(), kind)
    }

    /// Identity, tagged unitary. Retag with [`Operator::with_kind`] to use it
    /// as a projector.
    pub fn identity(dim: usize) -> Self {
        let mut entries = vec![ZERO; dim * dim];
        for i in 0..dim {
            entries[i * dim + i] = ONE;
        }
        Self {
            dim,
            entries,
            kind: OperatorKind::Unitary,
        }
    }

    /// `I / dim`.
    pub fn maximally_mixed(dim: usize) -> Self {
        let w = 1.0 / dim as f64;
        let mut op = Self::identity(dim);
        op.entries.iter_mut().for_each(|z| *z *= w);
        op.kind = OperatorKind::Density;
        op
    }

    /// Re-tags the operator, validating the new kind.
    pub fn with_kind(mut self, kind: OperatorKind) -> Result<Self> {
        self.kind = kind;
        self.validate()?;
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn kind(&self) -> OperatorKind {
        self.kind
    }

    pub fn entries(&self) -> &[C64] {
        &self.entries
    }

    pub fn get(&self, row: usize, col: usize) -> C64 {
        self.entries[row * self.dim + col]
    }

    pub fn adjoint(&self) -> Self {
        let n = self.dim;
        let mut entries = Vec::with_capacity(n * n);
        for r in 0..n {
            for c in 0..n {
                entries.push(self.entries[c * n + r].conj());
            }
        }
        Self {
            dim: n,
            entries,
            kind: self.kind,
        }
    }

    /// Matrix product `self · rhs`; the result is tagged generic.
    pub fn matmul(&self, rhs: &Operator) -> Result<Operator> {
        check_dims(self.dim, rhs.dim)?;
        let n = self.dim;
        let mut entries = vec![ZERO; n * n];
        for r in 0..n {
            for k in 0..n {
                let a = self.entries[r * n + k];
                if a == ZERO {
                    continue;
                }
                for c in 0..n {
                    entries[r * n + c] += a * rhs.entries[k * n + c];
                }
            }
        }
        Ok(Operator {
            dim: n,
            entries,
            kind: OperatorKind::Generic,
        })
    }

    /// `self · v` for a raw amplitude vector.
    pub fn mul_vec(&self, v: &[C64]) -> Result<Vec<C64>> {
        check_dims(self.dim, v.len())?;
        let n = self.dim;
        Ok((0..n)
            .map(|r| (0..n).map(|c| self.entries[r * n + c] * v[c]).sum())
            .collect())
    }

    /// Applies a unitary to a state.
    pub fn apply(&self, state: &StateVector) -> Result<StateVector> {
        if self.kind != OperatorKind::Unitary {
            return Err(Error::invalid("only unitary operators map states to states"));
        }
        Ok(StateVector {
            amps: self.mul_vec(state.amps())?,
        })
    }

    /// `α·self + β·rhs`, tagged generic.
    pub fn combine(&self, alpha: f64, rhs: &Operator, beta: f64) -> Result<Operator> {
        check_dims(self.dim, rhs.dim)?;
        Ok(Operator {
            dim: self.dim,
            entries: self
                .entries
                .iter()
                .zip(&rhs.entries)
                .map(|(a, b)| a * alpha + b * beta)
                .collect(),
            kind: OperatorKind::Generic,
        })
    }

    pub fn trace(&self) -> C64 {
        (0..self.dim).map(|i| self.entries[i * self.dim + i]).sum()
    }

    /// `⟨v|self|v⟩` for a raw amplitude vector.
    pub fn expectation(&self, v: &[C64]) -> Result<C64> {
        let av = self.mul_vec(v)?;
        Ok(v.iter().zip(&av).map(|(x, y)| x.conj() * y).sum())
    }

    pub fn max_abs_diff(&self, rhs: &Operator) -> f64 {
        if self.dim != rhs.dim {
            return f64::INFINITY;
        }
        self.entries
            .iter()
            .zip(&rhs.entries)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.max_abs_diff(&self.adjoint()) <= tol
    }

    pub fn is_unitary(&self, tol: f64) -> bool {
        match self.adjoint().matmul(self) {
            Ok(p) => p.max_abs_diff(&Operator::identity(self.dim)) <= tol,
            Err(_) => false,
        }
    }

    pub fn is_projector(&self, tol: f64) -> bool {
        self.is_hermitian(tol)
            && self
                .matmul(self)
                .map(|sq| sq.max_abs_diff(self) <= tol)
                .unwrap_or(false)
    }

    /// True when every eigenvalue of the Hermitian part is `≥ -tol`.
    ///
    /// Checked by attempting a Cholesky factorization of `self + tol·I`.
    pub fn is_positive_semidefinite(&self, tol: f64) -> bool {
        let n = self.dim;
        let mut l = vec![ZERO; n * n];
        for j in 0..n {
            let mut diag = self.entries[j * n + j].re + tol;
            for k in 0..j {
                diag -= l[j * n + k].norm_sqr();
            }
            if diag.is_nan() || diag < 0.0 {
                return false;
            }
            let d = diag.sqrt();
            l[j * n + j] = C64::new(d, 0.0);
            for i in j + 1..n {
                let mut s = self.entries[i * n + j];
                for k in 0..j {
                    s -= l[i * n + k] * l[j * n + k].conj();
                }
                // A zero pivot is only consistent if the whole column vanishes.
                l[i * n + j] = if d > 0.0 {
                    s / d
                } else if s.norm() <= tol {
                    ZERO
                } else {
                    return false;
                };
            }
        }
        true
    }

    fn validate(&self) -> Result<()> {
        let ok = match self.kind {
            OperatorKind::Generic => true,
            OperatorKind::Unitary => self.is_unitary(KIND_TOLERANCE),
            OperatorKind::Projector => self.is_projector(KIND_TOLERANCE),
            OperatorKind::Density => {
                (self.trace() - ONE).norm() <= KIND_TOLERANCE
                    && self.is_hermitian(KIND_TOLERANCE)
                    && self.is_positive_semidefinite(POSITIVITY_TOLERANCE)
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::invalid(format!(
                "matrix does not satisfy the {:?} invariants",
                self.kind
            )))
        }
    }
}

/// Kronecker product. Implemented for vectors and for operators; mixing the
/// two is rejected at compile time.
pub trait Tensor: Sized {
    fn tensor(&self, rhs: &Self) -> Self;
}

impl Tensor for StateVector {
    fn tensor(&self, rhs: &Self) -> Self {
        let mut amps = Vec::with_capacity(self.dim() * rhs.dim());
        for a in &self.amps {
            for b in &rhs.amps {
                amps.push(a * b);
            }
        }
        StateVector { amps }
    }
}

impl Tensor for Operator {
    fn tensor(&self, rhs: &Self) -> Self {
        let (da, db) = (self.dim, rhs.dim);
        let n = da * db;
        let mut entries = vec![ZERO; n * n];
        for ra in 0..da {
            for ca in 0..da {
                let a = self.entries[ra * da + ca];
                for rb in 0..db {
                    for cb in 0..db {
                        entries[(ra * db + rb) * n + ca * db + cb] = a * rhs.entries[rb * db + cb];
                    }
                }
            }
        }
        let kind = if self.kind == rhs.kind {
            self.kind
        } else {
            OperatorKind::Generic
        };
        Operator { dim: n, entries, kind }
    }
}

pub fn tensor<T: Tensor>(a: &T, b: &T) -> T {
    a.tensor(b)
}

/// A pure or mixed state of the full system.
#[derive(Clone, Debug, PartialEq)]
pub enum State {
    Pure(StateVector),
    Mixed(Operator),
}

impl State {
    pub fn mixed(rho: Operator) -> Result<Self> {
        if rho.kind() != OperatorKind::Density {
            return Err(Error::invalid("mixed states require a density operator"));
        }
        Ok(State::Mixed(rho))
    }

    pub fn dim(&self) -> usize {
        match self {
            State::Pure(psi) => psi.dim(),
            State::Mixed(rho) => rho.dim(),
        }
    }

    pub fn density(&self) -> Operator {
        match self {
            State::Pure(psi) => psi.density(),
            State::Mixed(rho) => rho.clone(),
        }
    }

    /// Reduced density operator of one party, the other factor having
    /// dimension `dim / local_dim`.
    pub fn reduced(&self, party: Party, local_dim: usize) -> Result<Operator> {
        let (da, db) = split_dims(self.dim(), party, local_dim)?;
        let (keep, other) = match party {
            Party::A => (da, db),
            Party::B => (db, da),
        };
        let flat = |kept: usize, traced: usize| match party {
            Party::A => kept * db + traced,
            Party::B => traced * db + kept,
        };
        let mut entries = vec![ZERO; keep * keep];
        match self {
            State::Pure(psi) => {
                let a = psi.amps();
                for r in 0..keep {
                    for c in 0..keep {
                        entries[r * keep + c] =
                            (0..other).map(|t| a[flat(r, t)] * a[flat(c, t)].conj()).sum();
                    }
                }
            }
            State::Mixed(rho) => {
                for r in 0..keep {
                    for c in 0..keep {
                        entries[r * keep + c] = (0..other).map(|t| rho.get(flat(r, t), flat(c, t))).sum();
                    }
                }
            }
        }
        Ok(Operator {
            dim: keep,
            entries,
            kind: OperatorKind::Density,
        })
    }

    /// `|(⟨a| ⊗ ⟨b|) ψ|²` or `(⟨a| ⊗ ⟨b|) ρ (|a⟩ ⊗ |b⟩)` for local bras given as
    /// row vectors (already conjugated). No clamping.
    pub fn product_bra_expectation(&self, bra_a: &[C64], bra_b: &[C64]) -> f64 {
        let db = bra_b.len();
        match self {
            State::Pure(psi) => {
                let a = psi.amps();
                let mut amp = ZERO;
                for (m, x) in bra_a.iter().enumerate() {
                    let row = &a[m * db..(m + 1) * db];
                    let mut inner = ZERO;
                    for (y, z) in bra_b.iter().zip(row) {
                        inner += y * z;
                    }
                    amp += x * inner;
                }
                amp.norm_sqr()
            }
            State::Mixed(rho) => {
                let n = rho.dim();
                let mut w = Vec::with_capacity(n);
                for x in bra_a {
                    for y in bra_b {
                        w.push(x * y);
                    }
                }
                let mut acc = ZERO;
                for (wr, entries) in w.iter().zip(rho.entries.chunks(n)) {
                    let mut row = ZERO;
                    for (e, wc) in entries.iter().zip(&w) {
                        row += e * wc.conj();
                    }
                    acc += wr * row;
                }
                acc.re
            }
        }
    }
}

impl From<StateVector> for State {
    fn from(psi: StateVector) -> Self {
        State::Pure(psi)
    }
}

/// `⟨ψ|Π|ψ⟩` or `Tr(ρΠ)`, clamped to `[0, 1]`.
pub fn probability(state: &State, proj: &Operator) -> Result<f64> {
    if proj.kind() != OperatorKind::Projector {
        return Err(Error::invalid("probability requires a projector"));
    }
    check_dims(state.dim(), proj.dim())?;
    let p = match state {
        State::Pure(psi) => proj.expectation(psi.amps())?.re,
        State::Mixed(rho) => rho.matmul(proj)?.trace().re,
    };
    clamp_probability(p)
}

/// Probability that one party's local projector fires, i.e.
/// `probability(state, Π ⊗ I)` for party A or `I ⊗ Π` for party B.
pub fn partial_projection_probability(state: &State, party: Party, local_proj: &Operator) -> Result<f64> {
    if local_proj.kind() != OperatorKind::Projector {
        return Err(Error::invalid("partial projection requires a projector"));
    }
    let reduced = state.reduced(party, local_proj.dim())?;
    clamp_probability(reduced.matmul(local_proj)?.trace().re)
}

/// Clamps roundoff excursions; larger ones are bugs.
pub fn clamp_probability(p: f64) -> Result<f64> {
    if !(-CLAMP_WINDOW..=1.0 + CLAMP_WINDOW).contains(&p) {
        return Err(Error::Consistency(format!("probability {p:e} outside [0, 1]")));
    }
    Ok(p.clamp(0.0, 1.0))
}

fn check_dims(left: usize, right: usize) -> Result<()> {
    if left == right {
        Ok(())
    } else {
        Err(Error::invalid(format!("dimension mismatch: {left} vs {right}")))
    }
}

fn split_dims(total: usize, party: Party, local_dim: usize) -> Result<(usize, usize)> {
    if local_dim == 0 || !total.is_multiple_of(local_dim) {
        return Err(Error::invalid(format!(
            "local dimension {local_dim} does not divide state dimension {total}"
        )));
    }
    let other = total / local_dim;
    Ok(match party {
        Party::A => (local_dim, other),
        Party::B => (other, local_dim),
    })
}
