//! Channel algebra in the Liouville (superoperator) representation.
//!
//! Operators on a `d`-dimensional space `H = H1 ⊕ H2` are vectorized against a
//! trace-orthonormal operator basis. The canonical basis is the matrix-unit
//! basis `|i><j|` in row-major order, so the coordinate vector of `rho` is its
//! row-major flattening and a unitary channel `U . U†` becomes `U ⊗ conj(U)`.
//!
//! Channels keep their Kraus operators as ground truth. The Liouville matrix in
//! the canonical basis is derived on first use and cached.
//!
//! The Choi matrix convention is `Choi = Σ_ij |i><j| ⊗ E(|i><j|)`.

use std::sync::OnceLock;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

/// Tolerance used for positivity, orthonormality and equality checks unless a
/// caller passes its own.
pub const DEFAULT_TOL: f64 = 1e-9;

pub(crate) const ZERO: C64 = C64::new(0.0, 0.0);
pub(crate) const ONE: C64 = C64::new(1.0, 0.0);

/// Dimensions of the computational subspace `H1`, the leakage subspace `H2`
/// and the full space `H = H1 ⊕ H2`. `d2 == 0` means `H1 = H`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "RawSpace")]
pub struct SpaceSpec {
    d1: usize,
    d2: usize,
}

#[derive(Deserialize)]
struct RawSpace {
    d1: usize,
    d2: usize,
}

impl TryFrom<RawSpace> for SpaceSpec {
    type Error = Error;
    fn try_from(raw: RawSpace) -> Result<Self> {
        SpaceSpec::new(raw.d1, raw.d2)
    }
}

impl SpaceSpec {
    pub fn new(d1: usize, d2: usize) -> Result<Self> {
        if d1 == 0 {
            return Err(Error::InvalidSpace("d1 must be at least 1".into()));
        }
        Ok(Self { d1, d2 })
    }

    /// A space with no leakage subspace.
    pub fn full(d: usize) -> Result<Self> {
        Self::new(d, 0)
    }

    pub fn qubit() -> Self {
        Self { d1: 2, d2: 0 }
    }

    /// Qubit code space plus one leakage level.
    pub fn qutrit_leak() -> Self {
        Self { d1: 2, d2: 1 }
    }

    pub fn d1(&self) -> usize {
        self.d1
    }

    pub fn d2(&self) -> usize {
        self.d2
    }

    pub fn d(&self) -> usize {
        self.d1 + self.d2
    }

    pub fn has_leakage(&self) -> bool {
        self.d2 > 0
    }

    /// Projector onto `H1`, as a `d x d` matrix.
    pub fn projector_h1(&self) -> CMatrix {
        let d = self.d();
        CMatrix::from_fn(d, d, |i, j| if i == j && i < self.d1 { ONE } else { ZERO })
    }

    /// Projector onto `H2`, as a `d x d` matrix.
    pub fn projector_h2(&self) -> CMatrix {
        let d = self.d();
        CMatrix::from_fn(d, d, |i, j| if i == j && i >= self.d1 { ONE } else { ZERO })
    }
}

/// Conjugate transpose.
pub fn dagger(m: &CMatrix) -> CMatrix {
    m.adjoint()
}

pub fn trace(m: &CMatrix) -> C64 {
    m.diagonal().sum()
}

/// Kronecker product: `out[(i*rB + k, j*cB + l)] = A[i,j] * B[k,l]`.
pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    let (ra, ca) = a.shape();
    let (rb, cb) = b.shape();
    let mut out = CMatrix::zeros(ra * rb, ca * cb);
    for i in 0..ra {
        for j in 0..ca {
            let aij = a[(i, j)];
            if aij == ZERO {
                continue;
            }
            for k in 0..rb {
                for l in 0..cb {
                    out[(i * rb + k, j * cb + l)] = aij * b[(k, l)];
                }
            }
        }
    }
    out
}

/// Block-diagonal matrix `[[A, 0], [0, B]]`.
pub fn direct_sum(a: &CMatrix, b: &CMatrix) -> CMatrix {
    let (ra, ca) = a.shape();
    let (rb, cb) = b.shape();
    let mut out = CMatrix::zeros(ra + rb, ca + cb);
    out.view_mut((0, 0), (ra, ca)).copy_from(a);
    out.view_mut((ra, ca), (rb, cb)).copy_from(b);
    out
}

/// Largest entrywise modulus of `a - b`, or infinity if the shapes differ.
pub fn max_abs_diff(a: &CMatrix, b: &CMatrix) -> f64 {
    if a.shape() != b.shape() {
        return f64::INFINITY;
    }
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

/// Deviation of `U U†` from the identity, as the largest entrywise modulus.
pub fn unitarity_deviation(u: &CMatrix) -> f64 {
    if !u.is_square() {
        return f64::INFINITY;
    }
    let n = u.nrows();
    max_abs_diff(&(u * u.adjoint()), &CMatrix::identity(n, n))
}

/// Real eigenvalues of a Hermitian matrix, ascending. The input is
/// symmetrized first so small anti-Hermitian round-off is ignored.
pub fn hermitian_eigenvalues(m: &CMatrix) -> Vec<f64> {
    let h = (m + m.adjoint()).scale(0.5);
    let mut ev: Vec<f64> = h.symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(|a, b| a.total_cmp(b));
    ev
}

/// Numerical rank from singular values above `tol`.
pub fn numerical_rank(m: &CMatrix, tol: f64) -> usize {
    m.clone()
        .svd(false, false)
        .singular_values
        .iter()
        .filter(|&&s| s > tol)
        .count()
}

/// A trace-orthonormal operator basis `{A_i}` with `Tr[A_i† A_j] = δ_ij`.
#[derive(Clone, Debug)]
pub struct OperatorBasis {
    label: String,
    dim: usize,
    elements: Vec<CMatrix>,
}

impl OperatorBasis {
    /// Builds a basis from explicit elements, checking trace-orthonormality.
    pub fn from_elements(
        label: impl Into<String>,
        elements: Vec<CMatrix>,
        tol: f64,
    ) -> Result<Self> {
        let dim = elements.first().map(|e| e.nrows()).unwrap_or(0);
        if dim == 0 || elements.len() != dim * dim {
            return Err(Error::DimensionMismatch {
                expected: dim * dim,
                got: elements.len(),
            });
        }
        for e in &elements {
            if e.shape() != (dim, dim) {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: e.nrows().max(e.ncols()),
                });
            }
        }
        let basis = Self {
            label: label.into(),
            dim,
            elements,
        };
        let gram = basis.gram();
        let dev = max_abs_diff(&gram, &CMatrix::identity(dim * dim, dim * dim));
        if dev > tol {
            return Err(Error::InvalidParameter(format!(
                "basis '{}' is not trace-orthonormal (deviation {dev:.3e})",
                basis.label
            )));
        }
        Ok(basis)
    }

    /// Matrix units `|i><j|` in row-major order of `(i, j)`.
    pub fn elementary(dim: usize) -> Self {
        let elements = (0..dim * dim)
            .map(|n| {
                let (i, j) = (n / dim, n % dim);
                let mut e = CMatrix::zeros(dim, dim);
                e[(i, j)] = ONE;
                e
            })
            .collect();
        Self {
            label: "elementary".into(),
            dim,
            elements,
        }
    }

    /// Normalized single-qubit Paulis `{I, X, Y, Z} / sqrt(2)`.
    pub fn pauli() -> Self {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let elements = paulis().into_iter().map(|p| p.scale(s)).collect();
        Self {
            label: "pauli".into(),
            dim: 2,
            elements,
        }
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    /// Hilbert-space dimension `d` (the basis has `d^2` elements).
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn elements(&self) -> &[CMatrix] {
        &self.elements
    }

    pub fn is_elementary(&self) -> bool {
        self.label == "elementary"
    }

    /// Gram matrix `G[i,j] = Tr[A_i† A_j]`.
    pub fn gram(&self) -> CMatrix {
        let n = self.elements.len();
        CMatrix::from_fn(n, n, |i, j| hs_inner(&self.elements[i], &self.elements[j]))
    }
}

/// Canonical operator basis for a space: the matrix units `|i><j|`.
pub fn elementary_basis(space: SpaceSpec) -> OperatorBasis {
    OperatorBasis::elementary(space.d())
}

/// Hilbert-Schmidt inner product `Tr[A† B]`.
pub fn hs_inner(a: &CMatrix, b: &CMatrix) -> C64 {
    a.iter().zip(b.iter()).map(|(x, y)| x.conj() * y).sum()
}

/// `I, X, Y, Z` as 2x2 matrices.
pub fn paulis() -> [CMatrix; 4] {
    let i = C64::i();
    [
        CMatrix::from_row_slice(2, 2, &[ONE, ZERO, ZERO, ONE]),
        CMatrix::from_row_slice(2, 2, &[ZERO, ONE, ONE, ZERO]),
        CMatrix::from_row_slice(2, 2, &[ZERO, -i, i, ZERO]),
        CMatrix::from_row_slice(2, 2, &[ONE, ZERO, ZERO, -ONE]),
    ]
}

/// Pure state `|k><k|` on a `d`-dimensional space.
pub fn basis_state(d: usize, k: usize) -> CMatrix {
    let mut rho = CMatrix::zeros(d, d);
    rho[(k, k)] = ONE;
    rho
}

/// Whether a vector represents a state (column) or an effect (row).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum VectorKind {
    State,
    Effect,
}

/// Coordinates of an operator against an operator basis: `Tr[A_i† rho]` for
/// states and `Tr[M† A_i]` for effects.
#[derive(Clone, Debug)]
pub struct VectorizedOperator {
    pub kind: VectorKind,
    pub coords: CVector,
    pub basis: String,
}

impl VectorizedOperator {
    /// Born rule `(M|rho) = Σ_i effect[i] * state[i] = Tr[M† rho]`.
    pub fn born(effect: &Self, state: &Self) -> Result<C64> {
        if effect.kind != VectorKind::Effect || state.kind != VectorKind::State {
            return Err(Error::InvalidParameter(
                "born rule takes an effect and a state".into(),
            ));
        }
        if effect.basis != state.basis || effect.coords.len() != state.coords.len() {
            return Err(Error::DimensionMismatch {
                expected: effect.coords.len(),
                got: state.coords.len(),
            });
        }
        Ok(effect
            .coords
            .iter()
            .zip(state.coords.iter())
            .map(|(e, s)| e * s)
            .sum())
    }
}

pub fn vectorize(
    op: &CMatrix,
    kind: VectorKind,
    basis: &OperatorBasis,
) -> Result<VectorizedOperator> {
    let d = basis.dim();
    if op.shape() != (d, d) {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: op.nrows(),
        });
    }
    let coords = CVector::from_iterator(
        d * d,
        basis.elements().iter().map(|a| match kind {
            VectorKind::State => hs_inner(a, op),
            VectorKind::Effect => hs_inner(op, a),
        }),
    );
    Ok(VectorizedOperator {
        kind,
        coords,
        basis: basis.label().to_string(),
    })
}

/// Row-major flattening: the state coordinates in the elementary basis.
pub fn vec_rowmajor(op: &CMatrix) -> CVector {
    let (r, c) = op.shape();
    CVector::from_fn(r * c, |n, _| op[(n / c, n % c)])
}

/// Inverse of [`vec_rowmajor`] for a square `d x d` operator.
pub fn unvec_rowmajor(v: &CVector, d: usize) -> CMatrix {
    CMatrix::from_fn(d, d, |i, j| v[i * d + j])
}

/// A completely positive map stored as Kraus operators.
#[derive(Debug)]
pub struct Channel {
    space: SpaceSpec,
    kraus: Vec<CMatrix>,
    liouville: OnceLock<CMatrix>,
}

impl Clone for Channel {
    fn clone(&self) -> Self {
        let liouville = OnceLock::new();
        if let Some(l) = self.liouville.get() {
            let _ = liouville.set(l.clone());
        }
        Self {
            space: self.space,
            kraus: self.kraus.clone(),
            liouville,
        }
    }
}

impl Channel {
    pub fn new(space: SpaceSpec, kraus: Vec<CMatrix>) -> Result<Self> {
        let d = space.d();
        if kraus.is_empty() {
            return Err(Error::InvalidParameter(
                "channel needs at least one Kraus operator".into(),
            ));
        }
        for k in &kraus {
            if k.shape() != (d, d) {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    got: if k.nrows() != d { k.nrows() } else { k.ncols() },
                });
            }
        }
        Ok(Self {
            space,
            kraus,
            liouville: OnceLock::new(),
        })
    }

    pub fn identity(space: SpaceSpec) -> Self {
        let d = space.d();
        Self::from_parts(space, vec![CMatrix::identity(d, d)])
    }

    pub fn unitary(space: SpaceSpec, u: CMatrix) -> Result<Self> {
        Self::new(space, vec![u])
    }

    fn from_parts(space: SpaceSpec, kraus: Vec<CMatrix>) -> Self {
        Self {
            space,
            kraus,
            liouville: OnceLock::new(),
        }
    }

    /// Recovers a Kraus form from a Liouville matrix (canonical basis) through
    /// the eigendecomposition of its Choi matrix. Eigenvalues below
    /// `tol * max(1, λ_max)` are dropped; a materially negative eigenvalue is an
    /// error.
    pub fn from_liouville(space: SpaceSpec, liouville: &CMatrix, tol: f64) -> Result<Self> {
        let d = space.d();
        if liouville.shape() != (d * d, d * d) {
            return Err(Error::DimensionMismatch {
                expected: d * d,
                got: liouville.nrows(),
            });
        }
        let choi = choi_from_liouville(liouville, d);
        let h = (&choi + choi.adjoint()).scale(0.5);
        let eig = h.symmetric_eigen();
        let lmax = eig.eigenvalues.iter().copied().fold(0.0, f64::max);
        let cutoff = tol * lmax.max(1.0);
        let mut kraus = Vec::new();
        for (n, &lambda) in eig.eigenvalues.iter().enumerate() {
            if lambda < -cutoff {
                return Err(Error::InvalidParameter(format!(
                    "Liouville matrix is not completely positive (Choi eigenvalue {lambda:.3e})"
                )));
            }
            if lambda <= cutoff {
                continue;
            }
            let v = eig.eigenvectors.column(n);
            let scale = lambda.sqrt();
            // Choi[(i,a),(j,b)] = K[a,i] conj(K[b,j]), so K[a,i] = v[i*d + a].
            kraus.push(CMatrix::from_fn(d, d, |a, i| v[i * d + a] * scale));
        }
        if kraus.is_empty() {
            kraus.push(CMatrix::zeros(d, d));
        }
        let ch = Self::from_parts(space, kraus);
        let _ = ch.liouville.set(liouville.clone());
        Ok(ch)
    }

    pub fn space(&self) -> SpaceSpec {
        self.space
    }

    pub fn kraus(&self) -> &[CMatrix] {
        &self.kraus
    }

    /// `E(rho) = Σ_k K rho K†`.
    pub fn apply(&self, rho: &CMatrix) -> CMatrix {
        let d = self.space.d();
        let mut out = CMatrix::zeros(d, d);
        for k in &self.kraus {
            out += k * rho * k.adjoint();
        }
        out
    }

    /// Heisenberg-picture action on an effect: `E†(M) = Σ_k K† M K`.
    pub fn apply_adjoint(&self, effect: &CMatrix) -> CMatrix {
        let d = self.space.d();
        let mut out = CMatrix::zeros(d, d);
        for k in &self.kraus {
            out += k.adjoint() * effect * k;
        }
        out
    }

    /// Liouville matrix in the canonical (matrix-unit) basis: `Σ_k K ⊗ conj(K)`.
    pub fn liouville(&self) -> &CMatrix {
        self.liouville.get_or_init(|| {
            let d = self.space.d();
            let mut l = CMatrix::zeros(d * d, d * d);
            for k in &self.kraus {
                l += kron(k, &k.map(|z| z.conj()));
            }
            l
        })
    }

    /// `self ∘ first`: apply `first`, then `self`.
    pub fn compose(&self, first: &Channel) -> Result<Channel> {
        if self.space != first.space {
            return Err(Error::DimensionMismatch {
                expected: self.space.d(),
                got: first.space.d(),
            });
        }
        let kraus = self
            .kraus
            .iter()
            .flat_map(|a| first.kraus.iter().map(move |b| a * b))
            .collect();
        Ok(Self::from_parts(self.space, kraus))
    }

    /// Convex combination `Σ_i w_i E_i`; Kraus operators are scaled by `sqrt(w_i)`.
    pub fn mixture(channels: &[Channel], weights: &[f64]) -> Result<Channel> {
        let first = channels
            .first()
            .ok_or_else(|| Error::InvalidParameter("empty mixture".into()))?;
        if channels.len() != weights.len() {
            return Err(Error::DimensionMismatch {
                expected: channels.len(),
                got: weights.len(),
            });
        }
        let mut kraus = Vec::new();
        for (ch, &w) in channels.iter().zip(weights) {
            if ch.space != first.space {
                return Err(Error::DimensionMismatch {
                    expected: first.space.d(),
                    got: ch.space.d(),
                });
            }
            if w < 0.0 {
                return Err(Error::InvalidParameter("negative mixture weight".into()));
            }
            if w == 0.0 {
                continue;
            }
            let s = w.sqrt();
            kraus.extend(ch.kraus.iter().map(|k| k.scale(s)));
        }
        if kraus.is_empty() {
            let d = first.space.d();
            kraus.push(CMatrix::zeros(d, d));
        }
        Ok(Self::from_parts(first.space, kraus))
    }

    /// `Σ_k K† K`.
    pub fn kraus_sum(&self) -> CMatrix {
        let d = self.space.d();
        let mut out = CMatrix::zeros(d, d);
        for k in &self.kraus {
            out += k.adjoint() * k;
        }
        out
    }

    /// Choi matrix `Σ_ij |i><j| ⊗ E(|i><j|)`.
    pub fn choi(&self) -> CMatrix {
        choi_from_liouville(self.liouville(), self.space.d())
    }

    pub fn diagnostics(&self, tol: f64) -> Diagnostics {
        let choi_min = hermitian_eigenvalues(&self.choi())
            .first()
            .copied()
            .unwrap_or(0.0);
        let ksum = self.kraus_sum();
        let kmax = hermitian_eigenvalues(&ksum).last().copied().unwrap_or(0.0);
        let d = self.space.d();
        let tp_dev = max_abs_diff(&ksum, &CMatrix::identity(d, d));
        Diagnostics {
            is_cp: choi_min >= -tol,
            is_trace_nonincreasing: kmax <= 1.0 + tol,
            is_trace_preserving: tp_dev <= tol,
            choi_min_eigenvalue: choi_min,
            kraus_sum_max_eigenvalue: kmax,
            trace_preservation_deviation: tp_dev,
        }
    }
}

fn choi_from_liouville(l: &CMatrix, d: usize) -> CMatrix {
    // E(|i><j|)[a,b] = L[a*d + b, i*d + j]
    CMatrix::from_fn(d * d, d * d, |r, c| {
        let (i, a) = (r / d, r % d);
        let (j, b) = (c / d, c % d);
        l[(a * d + b, i * d + j)]
    })
}

/// Liouville matrix of a channel against an arbitrary trace-orthonormal basis:
/// `L[i,j] = Tr[A_i† E(A_j)]`.
pub fn to_liouville(ch: &Channel, basis: &OperatorBasis) -> Result<CMatrix> {
    let d = ch.space.d();
    if basis.dim() != d {
        return Err(Error::DimensionMismatch {
            expected: d * d,
            got: basis.elements().len(),
        });
    }
    if basis.is_elementary() {
        return Ok(ch.liouville().clone());
    }
    let images: Vec<CMatrix> = basis.elements().iter().map(|a| ch.apply(a)).collect();
    let n = d * d;
    Ok(CMatrix::from_fn(n, n, |i, j| {
        hs_inner(&basis.elements()[i], &images[j])
    }))
}

/// CP and trace diagnostics for a channel.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Diagnostics {
    pub is_cp: bool,
    pub is_trace_nonincreasing: bool,
    pub is_trace_preserving: bool,
    pub choi_min_eigenvalue: f64,
    pub kraus_sum_max_eigenvalue: f64,
    pub trace_preservation_deviation: f64,
}

pub fn cp_tp_diagnostics(ch: &Channel) -> Diagnostics {
    ch.diagnostics(DEFAULT_TOL)
}

/// `s(rho | E, H1) = Tr[P_H1 E(rho)] / Tr[rho]` for `rho` supported on `H1`.
pub fn survival_rate_state(rho: &CMatrix, ch: &Channel) -> Result<f64> {
    let space = ch.space();
    let d = space.d();
    if rho.shape() != (d, d) {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: rho.nrows(),
        });
    }
    let tr = trace(rho).re;
    if tr <= DEFAULT_TOL {
        return Err(Error::ZeroTrace);
    }
    let outside = rho
        .iter()
        .enumerate()
        .filter(|(n, _)| {
            // column-major storage
            let (i, j) = (n % d, n / d);
            i >= space.d1() || j >= space.d1()
        })
        .map(|(_, z)| z.norm())
        .fold(0.0, f64::max);
    if outside > DEFAULT_TOL * tr.max(1.0) {
        return Err(Error::InvalidParameter(
            "state is not supported on H1".into(),
        ));
    }
    let out = ch.apply(rho);
    Ok(trace(&(space.projector_h1() * out)).re / tr)
}

/// Incoherent survival rate `Tr[E(I/d)]`.
pub fn s_inc(ch: &Channel) -> f64 {
    let d = ch.space().d() as f64;
    trace(&ch.kraus_sum()).re / d
}

/// The 2x2 block of the twirled channel in the basis `A1 = P_H1/sqrt(d1)`,
/// `A2 = P_H2/sqrt(d2)`: `s[i][j] = (A_i|E|A_j)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SMatrix(pub [[f64; 2]; 2]);

impl SMatrix {
    pub fn trace(&self) -> f64 {
        self.0[0][0] + self.0[1][1]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.0[i][j]
    }

    pub fn lambda_pm(&self) -> Result<(f64, f64)> {
        lambda_pm(self)
    }

    pub fn mul(&self, other: &SMatrix) -> SMatrix {
        let a = &self.0;
        let b = &other.0;
        SMatrix([
            [
                a[0][0] * b[0][0] + a[0][1] * b[1][0],
                a[0][0] * b[0][1] + a[0][1] * b[1][1],
            ],
            [
                a[1][0] * b[0][0] + a[1][1] * b[1][0],
                a[1][0] * b[0][1] + a[1][1] * b[1][1],
            ],
        ])
    }
}

pub fn s_matrix(ch: &Channel) -> Result<SMatrix> {
    let space = ch.space();
    if !space.has_leakage() {
        return Err(Error::NoLeakageSpace);
    }
    let p1 = space.projector_h1();
    let p2 = space.projector_h2();
    let e1 = ch.apply(&p1);
    let e2 = ch.apply(&p2);
    let (d1, d2) = (space.d1() as f64, space.d2() as f64);
    let off = (d1 * d2).sqrt();
    let tr = |p: &CMatrix, e: &CMatrix| trace(&(p * e)).re;
    Ok(SMatrix([
        [tr(&p1, &e1) / d1, tr(&p1, &e2) / off],
        [tr(&p2, &e1) / off, tr(&p2, &e2) / d2],
    ]))
}

/// Eigenvalues `λ± = (s11+s22)/2 ± sqrt((s11-s22)^2 + 4 s12 s21)/2`.
///
/// Completely positive maps give nonnegative `s` entries, so the discriminant
/// is nonnegative; a discriminant below `-DEFAULT_TOL` is rejected and smaller
/// negative round-off is treated as zero.
pub fn lambda_pm(s: &SMatrix) -> Result<(f64, f64)> {
    let [[a, b], [c, d]] = s.0;
    let disc = (a - d) * (a - d) + 4.0 * b * c;
    if disc < -DEFAULT_TOL {
        return Err(Error::ComplexEigenvalues(disc));
    }
    let mean = 0.5 * (a + d);
    let half = 0.5 * disc.max(0.0).sqrt();
    Ok((mean + half, mean - half))
}

/// Coherent survival rate `s11 + s22`.
pub fn s_coh(ch: &Channel) -> Result<f64> {
    Ok(s_matrix(ch)?.trace())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LeakageRates {
    /// `1 - s_inc`
    pub l_inc: f64,
    /// `s_inc - s_coh`; `None` without a leakage subspace.
    pub l_coh: Option<f64>,
}

pub fn leakage_rates(ch: &Channel) -> LeakageRates {
    let si = s_inc(ch);
    LeakageRates {
        l_inc: 1.0 - si,
        l_coh: s_coh(ch).ok().map(|sc| si - sc),
    }
}

/// JSON document for a channel: `{d1, d2, kraus: [[[re, im], ...], ...]}` with
/// each Kraus operator flattened row-major.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChannelDoc {
    pub d1: usize,
    pub d2: usize,
    pub kraus: Vec<Vec<[f64; 2]>>,
}

pub(crate) fn matrix_to_pairs(m: &CMatrix) -> Vec<[f64; 2]> {
    let (r, c) = m.shape();
    (0..r)
        .flat_map(|i| (0..c).map(move |j| (i, j)))
        .map(|(i, j)| [m[(i, j)].re, m[(i, j)].im])
        .collect()
}

pub(crate) fn matrix_from_pairs(pairs: &[[f64; 2]], d: usize) -> Result<CMatrix> {
    if pairs.len() != d * d {
        return Err(Error::DimensionMismatch {
            expected: d * d,
            got: pairs.len(),
        });
    }
    if pairs.iter().flatten().any(|x| !x.is_finite()) {
        return Err(Error::InvalidParameter("non-finite matrix entry".into()));
    }
    Ok(CMatrix::from_fn(d, d, |i, j| {
        let [re, im] = pairs[i * d + j];
        C64::new(re, im)
    }))
}

impl From<&Channel> for ChannelDoc {
    fn from(ch: &Channel) -> Self {
        Self {
            d1: ch.space.d1(),
            d2: ch.space.d2(),
            kraus: ch.kraus.iter().map(matrix_to_pairs).collect(),
        }
    }
}

impl TryFrom<ChannelDoc> for Channel {
    type Error = Error;
    fn try_from(doc: ChannelDoc) -> Result<Self> {
        let space = SpaceSpec::new(doc.d1, doc.d2)?;
        let d = space.d();
        let kraus = doc
            .kraus
            .iter()
            .map(|k| matrix_from_pairs(k, d))
            .collect::<Result<Vec<_>>>()?;
        Channel::new(space, kraus)
    }
}

impl Channel {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&ChannelDoc::from(self))?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str::<ChannelDoc>(s)?.try_into()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn pseudo_random_matrix(rows: usize, cols: usize, seed: u64) -> CMatrix {
        // small LCG, deterministic and independent of the crate's RNG
        let mut s = seed
            .wrapping_mul(6364136223846793005)
            .wrapping_add(1442695040888963407);
        let mut next = move || {
            s = s
                .wrapping_mul(6364136223846793005)
                .wrapping_add(1442695040888963407);
            ((s >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
        };
        CMatrix::from_fn(rows, cols, |_, _| c(next(), next()))
    }

    fn random_state(d: usize, seed: u64) -> CMatrix {
        let a = pseudo_random_matrix(d, d, seed);
        let rho = &a * a.adjoint();
        let t = trace(&rho);
        rho / t
    }

    #[test]
    fn elementary_basis_small_dims() {
        let b1 = elementary_basis(SpaceSpec::full(1).unwrap());
        assert_eq!(b1.elements().len(), 1);
        assert_eq!(b1.elements()[0][(0, 0)], ONE);

        let b2 = elementary_basis(SpaceSpec::qubit());
        assert_eq!(b2.elements().len(), 4);
        let expected = [(0, 0), (0, 1), (1, 0), (1, 1)];
        for (e, &(i, j)) in b2.elements().iter().zip(&expected) {
            assert_eq!(e[(i, j)], ONE);
            assert_eq!(e.iter().filter(|z| **z != ZERO).count(), 1);
        }
    }

    #[test]
    fn elementary_basis_gram_is_identity() {
        for d in 1..=4 {
            let b = OperatorBasis::elementary(d);
            let g = b.gram();
            assert!(max_abs_diff(&g, &CMatrix::identity(d * d, d * d)) < 1e-12);
        }
        let g = OperatorBasis::pauli().gram();
        assert!(max_abs_diff(&g, &CMatrix::identity(4, 4)) < 1e-12);
    }

    #[test]
    fn from_elements_rejects_non_orthonormal() {
        let mut el = OperatorBasis::elementary(2).elements().to_vec();
        el[1] = el[0].clone();
        assert!(OperatorBasis::from_elements("bad", el, DEFAULT_TOL).is_err());
        let ok = OperatorBasis::from_elements(
            "pauli2",
            OperatorBasis::pauli().elements().to_vec(),
            DEFAULT_TOL,
        );
        assert!(ok.is_ok());
    }

    #[test]
    fn kron_examples() {
        let i2 = CMatrix::identity(2, 2);
        assert_eq!(kron(&i2, &i2), CMatrix::identity(4, 4));
        let x = paulis()[1].clone();
        let xx = kron(&x, &x);
        for r in 0..4 {
            for col in 0..4 {
                let expect = if r + col == 3 { ONE } else { ZERO };
                assert_eq!(xx[(r, col)], expect);
            }
        }
    }

    #[test]
    fn kron_matches_index_formula() {
        let a = pseudo_random_matrix(2, 3, 1);
        let b = pseudo_random_matrix(3, 2, 2);
        let k = kron(&a, &b);
        assert_eq!(k.shape(), (6, 6));
        for i in 0..2 {
            for j in 0..3 {
                for p in 0..3 {
                    for q in 0..2 {
                        assert_eq!(k[(i * 3 + p, j * 2 + q)], a[(i, j)] * b[(p, q)]);
                    }
                }
            }
        }
    }

    #[test]
    fn direct_sum_examples() {
        let i2 = CMatrix::identity(2, 2);
        let i1 = CMatrix::identity(1, 1);
        assert_eq!(direct_sum(&i2, &i1), CMatrix::identity(3, 3));

        let v = direct_sum(&i1, &paulis()[1]);
        let expect =
            CMatrix::from_row_slice(3, 3, &[ONE, ZERO, ZERO, ZERO, ZERO, ONE, ZERO, ONE, ZERO]);
        assert_eq!(v, expect);

        let (a, b, cm, d) = (
            pseudo_random_matrix(2, 2, 3),
            pseudo_random_matrix(2, 2, 4),
            pseudo_random_matrix(2, 2, 5),
            pseudo_random_matrix(2, 2, 6),
        );
        let lhs = direct_sum(&a, &b) * direct_sum(&cm, &d);
        let rhs = direct_sum(&(&a * &cm), &(&b * &d));
        assert!(max_abs_diff(&lhs, &rhs) < 1e-14);
    }

    #[test]
    fn identity_channel_liouville_is_identity() {
        let ch = Channel::identity(SpaceSpec::qutrit_leak());
        assert_eq!(ch.liouville(), &CMatrix::identity(9, 9));
        let lp = to_liouville(
            &Channel::identity(SpaceSpec::qubit()),
            &OperatorBasis::pauli(),
        )
        .unwrap();
        assert!(max_abs_diff(&lp, &CMatrix::identity(4, 4)) < 1e-14);
    }

    #[test]
    fn unitary_liouville_is_u_kron_conj_u() {
        let h = CMatrix::from_row_slice(2, 2, &[ONE, ONE, ONE, -ONE])
            .scale(std::f64::consts::FRAC_1_SQRT_2);
        let s = CMatrix::from_row_slice(2, 2, &[ONE, ZERO, ZERO, C64::i()]);
        let u = &s * &h;
        let ch = Channel::unitary(SpaceSpec::qubit(), u.clone()).unwrap();
        let expect = kron(&u, &u.map(|z| z.conj()));
        assert!(max_abs_diff(ch.liouville(), &expect) < 1e-14);
    }

    #[test]
    fn to_liouville_rejects_wrong_basis() {
        let ch = Channel::identity(SpaceSpec::qutrit_leak());
        assert!(matches!(
            to_liouville(&ch, &OperatorBasis::pauli()),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn liouville_in_pauli_basis_is_similar_to_elementary() {
        let ch = Channel::new(
            SpaceSpec::qubit(),
            vec![
                pseudo_random_matrix(2, 2, 11).scale(0.5),
                pseudo_random_matrix(2, 2, 12).scale(0.5),
            ],
        )
        .unwrap();
        let lp = to_liouville(&ch, &OperatorBasis::pauli()).unwrap();
        // Both act identically on vectorized operators in their own basis.
        let rho = random_state(2, 13);
        let vp = vectorize(&rho, VectorKind::State, &OperatorBasis::pauli()).unwrap();
        let out = vectorize(&ch.apply(&rho), VectorKind::State, &OperatorBasis::pauli()).unwrap();
        let got = &lp * &vp.coords;
        for (a, b) in got.iter().zip(out.coords.iter()) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn vectorize_born_rule() {
        let space = SpaceSpec::qutrit_leak();
        let basis = elementary_basis(space);
        let rho0 = basis_state(3, 0);
        let v = vectorize(&rho0, VectorKind::State, &basis).unwrap();
        let m = vectorize(&rho0, VectorKind::Effect, &basis).unwrap();
        assert!((VectorizedOperator::born(&m, &v).unwrap() - ONE).norm() < 1e-15);
        let p1 = vectorize(&space.projector_h1(), VectorKind::Effect, &basis).unwrap();
        assert!((VectorizedOperator::born(&p1, &v).unwrap() - ONE).norm() < 1e-15);

        let rho = random_state(3, 7);
        let a = pseudo_random_matrix(3, 3, 8);
        let m = &a + a.adjoint();
        let vs = vectorize(&rho, VectorKind::State, &basis).unwrap();
        let ve = vectorize(&m, VectorKind::Effect, &basis).unwrap();
        let direct = trace(&(m.adjoint() * &rho));
        assert!((VectorizedOperator::born(&ve, &vs).unwrap() - direct).norm() < 1e-12);
        assert!(VectorizedOperator::born(&vs, &ve).is_err());
        assert!(vectorize(&CMatrix::zeros(2, 2), VectorKind::State, &basis).is_err());
    }

    #[test]
    fn elementary_state_vector_is_rowmajor() {
        let rho = random_state(3, 21);
        let v = vectorize(&rho, VectorKind::State, &OperatorBasis::elementary(3)).unwrap();
        assert!((v.coords - vec_rowmajor(&rho)).norm() < 1e-15);
        assert_eq!(unvec_rowmajor(&vec_rowmajor(&rho), 3), rho);
    }

    #[test]
    fn survival_rate_identity_and_errors() {
        let ch = Channel::identity(SpaceSpec::qutrit_leak());
        let rho = basis_state(3, 1);
        assert!((survival_rate_state(&rho, &ch).unwrap() - 1.0).abs() < 1e-15);
        assert!(matches!(
            survival_rate_state(&CMatrix::zeros(3, 3), &ch),
            Err(Error::ZeroTrace)
        ));
        assert!(survival_rate_state(&basis_state(3, 2), &ch).is_err());
    }

    #[test]
    fn s_matrix_of_identity() {
        let ch = Channel::identity(SpaceSpec::qutrit_leak());
        let s = s_matrix(&ch).unwrap();
        assert_eq!(s, SMatrix([[1.0, 0.0], [0.0, 1.0]]));
        assert_eq!(s_coh(&ch).unwrap(), 2.0);
        assert_eq!(lambda_pm(&s).unwrap(), (1.0, 1.0));
        assert!(matches!(
            s_matrix(&Channel::identity(SpaceSpec::qubit())),
            Err(Error::NoLeakageSpace)
        ));
    }

    #[test]
    fn lambda_pm_examples() {
        let s = SMatrix([[1.0, 0.0], [0.0, 0.5]]);
        assert_eq!(lambda_pm(&s).unwrap(), (1.0, 0.5));
        let bad = SMatrix([[1.0, -1.0], [1.0, 1.0]]);
        assert!(matches!(lambda_pm(&bad), Err(Error::ComplexEigenvalues(_))));
    }

    #[test]
    fn lambda_pm_matches_characteristic_roots() {
        // oracle: roots of x^2 - t x + det by bisection on the characteristic polynomial
        for seed in 0..50u64 {
            let m = pseudo_random_matrix(2, 2, 100 + seed);
            let s = SMatrix([
                [m[(0, 0)].re.abs(), m[(0, 1)].re.abs()],
                [m[(1, 0)].re.abs(), m[(1, 1)].re.abs()],
            ]);
            let t = s.trace();
            let det = s.0[0][0] * s.0[1][1] - s.0[0][1] * s.0[1][0];
            let f = |x: f64| x * x - t * x + det;
            let bisect = |mut lo: f64, mut hi: f64| {
                for _ in 0..200 {
                    let mid = 0.5 * (lo + hi);
                    if f(lo).signum() == f(mid).signum() {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                0.5 * (lo + hi)
            };
            let vertex = t / 2.0;
            let (lp, lm) = lambda_pm(&s).unwrap();
            if f(vertex).abs() < 1e-14 {
                continue;
            }
            assert!((bisect(vertex, 10.0) - lp).abs() < 1e-10);
            assert!((bisect(-10.0, vertex) - lm).abs() < 1e-10);
            assert!((lp + lm - t).abs() < 1e-12);
        }
    }

    #[test]
    fn leakage_rates_identity() {
        let r = leakage_rates(&Channel::identity(SpaceSpec::qutrit_leak()));
        assert_eq!(r.l_inc, 0.0);
        assert_eq!(r.l_coh, Some(-1.0));
        let q = leakage_rates(&Channel::identity(SpaceSpec::qubit()));
        assert_eq!(q.l_coh, None);
    }

    #[test]
    fn identity_diagnostics() {
        let d = cp_tp_diagnostics(&Channel::identity(SpaceSpec::qutrit_leak()));
        assert!(d.is_cp && d.is_trace_nonincreasing && d.is_trace_preserving);
    }

    #[test]
    fn non_cp_liouville_detected() {
        // transpose map is positive but not completely positive
        let d = 2;
        let l = CMatrix::from_fn(4, 4, |r, col| {
            let (a, b) = (r / d, r % d);
            let (i, j) = (col / d, col % d);
            if a == j && b == i {
                ONE
            } else {
                ZERO
            }
        });
        assert!(Channel::from_liouville(SpaceSpec::qubit(), &l, DEFAULT_TOL).is_err());
    }

    #[test]
    fn from_liouville_round_trip() {
        let ch = Channel::new(
            SpaceSpec::qutrit_leak(),
            vec![
                pseudo_random_matrix(3, 3, 31).scale(0.4),
                pseudo_random_matrix(3, 3, 32).scale(0.3),
            ],
        )
        .unwrap();
        let back = Channel::from_liouville(ch.space(), ch.liouville(), 1e-12).unwrap();
        let fresh = Channel::new(back.space(), back.kraus().to_vec()).unwrap();
        assert!(max_abs_diff(fresh.liouville(), ch.liouville()) < 1e-12);
        assert!(fresh.kraus().len() <= 9);
    }

    #[test]
    fn json_round_trip_and_errors() {
        let ch = Channel::new(
            SpaceSpec::qutrit_leak(),
            vec![
                pseudo_random_matrix(3, 3, 41),
                pseudo_random_matrix(3, 3, 42),
            ],
        )
        .unwrap();
        let back = Channel::from_json(&ch.to_json().unwrap()).unwrap();
        assert_eq!(back.kraus(), ch.kraus());
        assert_eq!(back.space(), ch.space());
        assert!(Channel::from_json(r#"{"d1":2,"d2":0,"kraus":[[[1,0],[0,0],[0,0]]]}"#).is_err());
        assert!(Channel::from_json(r#"{"d1":0,"d2":1,"kraus":[[[1,0]]]}"#).is_err());
    }

    #[test]
    fn channel_rejects_bad_kraus() {
        assert!(Channel::new(SpaceSpec::qubit(), vec![]).is_err());
        assert!(Channel::new(SpaceSpec::qubit(), vec![CMatrix::identity(3, 3)]).is_err());
    }
}
