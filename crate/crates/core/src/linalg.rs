//! Dense complex linear algebra shared by the other modules.
//!
//! Matrices are plain `nalgebra` dynamic matrices over [`Complex64`]. The
//! routines here add the pieces the decomposition needs on top of that:
//! rank-revealing null spaces with a relative cutoff, orthogonal
//! complements, Gram matrices and a conditioning-checked Hermitian inverse.
//! All returned bases are canonicalized (pivoted against the standard basis,
//! largest component real positive) so that repeated runs produce identical
//! vectors.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type ComplexMatrix = DMatrix<Complex64>;
pub type ComplexVector = DVector<Complex64>;

/// Pairwise orthonormality tolerance accepted by [`SubspaceBasis::new`].
pub const ORTHONORMAL_TOL: f64 = 1e-10;

/// Default relative singular-value cutoff for rank decisions.
pub const DEFAULT_RANK_TOL: f64 = 1e-10;

/// Smallest admissible eigenvalue ratio for [`invert_hermitian`].
pub const MIN_EIGEN_RATIO: f64 = 1e-12;

const TIE_TOL: f64 = 1e-9;

pub(crate) const ZERO: Complex64 = Complex64::new(0.0, 0.0);
pub(crate) const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Fails if any entry of `m` is NaN or infinite.
pub fn ensure_finite(m: &ComplexMatrix, what: &str) -> Result<()> {
    if m.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!("{what} has non-finite entries")))
    }
}

/// Largest entry modulus.
pub fn max_abs(m: &ComplexMatrix) -> f64 {
    m.iter().fold(0.0_f64, |acc, z| acc.max(z.norm()))
}

/// `max |(U†U − I)_ij|`.
pub fn unitarity_error(u: &ComplexMatrix) -> f64 {
    let n = u.ncols();
    max_abs(&(u.adjoint() * u - ComplexMatrix::identity(n, n)))
}

/// Largest singular value.
pub fn spectral_norm(m: &ComplexMatrix) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    // The top eigenvalue of m†m carries full relative accuracy.
    let h = hermitize(&(m.adjoint() * m));
    h.symmetric_eigenvalues().iter().fold(0.0_f64, |a, &l| a.max(l)).max(0.0).sqrt()
}

/// An orthonormal basis of a subspace, stored as the columns of an
/// `ambient_dim × dim` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SubspaceBasis {
    ambient_dim: usize,
    vectors: ComplexMatrix,
}

impl SubspaceBasis {
    /// Wraps `vectors` after checking shape and orthonormality.
    pub fn new(ambient_dim: usize, vectors: ComplexMatrix) -> Result<Self> {
        if vectors.nrows() != ambient_dim {
            return Err(Error::InvalidInput(format!(
                "basis vectors have {} components, expected {ambient_dim}",
                vectors.nrows()
            )));
        }
        ensure_finite(&vectors, "basis")?;
        let dev = unitarity_error(&vectors);
        if dev > ORTHONORMAL_TOL {
            return Err(Error::InvalidInput(format!("basis is not orthonormal (deviation {dev:.3e})")));
        }
        Ok(Self { ambient_dim, vectors })
    }

    pub fn from_vectors(ambient_dim: usize, vectors: &[ComplexVector]) -> Result<Self> {
        if let Some(v) = vectors.iter().find(|v| v.len() != ambient_dim) {
            return Err(Error::InvalidInput(format!(
                "basis vector has {} components, expected {ambient_dim}",
                v.len()
            )));
        }
        let m = if vectors.is_empty() {
            ComplexMatrix::zeros(ambient_dim, 0)
        } else {
            ComplexMatrix::from_columns(vectors)
        };
        Self::new(ambient_dim, m)
    }

    pub fn empty(ambient_dim: usize) -> Self {
        Self { ambient_dim, vectors: ComplexMatrix::zeros(ambient_dim, 0) }
    }

    pub fn full(ambient_dim: usize) -> Self {
        Self { ambient_dim, vectors: ComplexMatrix::identity(ambient_dim, ambient_dim) }
    }

    pub(crate) fn from_orthonormal(vectors: ComplexMatrix) -> Self {
        Self { ambient_dim: vectors.nrows(), vectors }
    }

    pub fn ambient_dim(&self) -> usize {
        self.ambient_dim
    }

    pub fn dim(&self) -> usize {
        self.vectors.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.dim() == 0
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.vectors
    }

    pub fn vector(&self, i: usize) -> ComplexVector {
        self.vectors.column(i).into_owned()
    }

    pub fn vectors(&self) -> impl Iterator<Item = ComplexVector> + '_ {
        self.vectors.column_iter().map(|c| c.into_owned())
    }

    pub fn projector(&self) -> ComplexMatrix {
        &self.vectors * self.vectors.adjoint()
    }

    /// Coordinates `Q†v` of `v` in this basis.
    pub fn coordinates(&self, v: &ComplexVector) -> ComplexVector {
        self.vectors.adjoint() * v
    }

    pub fn project(&self, v: &ComplexVector) -> ComplexVector {
        &self.vectors * self.coordinates(v)
    }

    /// `‖v − Pv‖`: distance of `v` from the subspace.
    pub fn residual(&self, v: &ComplexVector) -> f64 {
        (v - self.project(v)).norm()
    }

    /// Maps a basis written in this basis' coordinates back to the ambient
    /// space and canonicalizes the result.
    pub fn embed(&self, inner: &SubspaceBasis) -> SubspaceBasis {
        assert_eq!(inner.ambient_dim, self.dim(), "coordinate dimension mismatch");
        SubspaceBasis::from_orthonormal(canonicalize(&(&self.vectors * &inner.vectors)))
    }
}

/// Full SVD with descending singular values; `u` is `r × r`, `v` is `c × c`.
///
/// Computed with faer: nalgebra's complex SVD occasionally returns factors
/// that do not reconstruct rank-deficient inputs.
struct Svd {
    sv: Vec<f64>,
    u: ComplexMatrix,
    v: ComplexMatrix,
}

fn svd(m: &ComplexMatrix) -> Result<Svd> {
    let (r, c) = m.shape();
    let fm = faer::Mat::<Complex64>::from_fn(r, c, |i, j| m[(i, j)]);
    let d = fm.svd().map_err(|e| Error::InternalConsistency(format!("SVD failed: {e:?}")))?;
    let (u, s, v) = (d.U(), d.S(), d.V());
    let k = r.min(c);
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| s[b].re.total_cmp(&s[a].re).then(a.cmp(&b)));
    let perm = |i: usize| if i < k { order[i] } else { i };
    Ok(Svd {
        sv: order.iter().map(|&i| s[i].re).collect(),
        u: ComplexMatrix::from_fn(r, r, |i, j| u[(i, perm(j))]),
        v: ComplexMatrix::from_fn(c, c, |i, j| v[(i, perm(j))]),
    })
}

/// Orthonormal basis of `{v : m·v = 0}`.
///
/// A singular value `σ` counts as zero iff `σ ≤ tol·σ_max`; when `σ_max = 0`
/// the whole domain is returned.
pub fn null_space(m: &ComplexMatrix, tol: f64) -> Result<SubspaceBasis> {
    null_space_scaled(m, tol, 0.0)
}

/// As [`null_space`], with the cutoff taken relative to
/// `max(σ_max(m), scale)`.
///
/// Composed maps such as `P·A` can be pure rounding noise; passing the norm of
/// the uncomposed operator as `scale` keeps that noise from being read as rank.
pub fn null_space_scaled(m: &ComplexMatrix, tol: f64, scale: f64) -> Result<SubspaceBasis> {
    if !(tol > 0.0 && tol < 1.0) {
        return Err(Error::InvalidInput(format!("rank tolerance {tol} not in (0, 1)")));
    }
    if m.ncols() == 0 {
        return Err(Error::InvalidInput("null space of a matrix with no columns".into()));
    }
    ensure_finite(m, "matrix")?;
    let n = m.ncols();
    if m.nrows() == 0 {
        return Ok(SubspaceBasis::full(n));
    }
    let Svd { sv, v, .. } = svd(m)?;
    let reference = sv[0].max(scale);
    if reference == 0.0 {
        return Ok(SubspaceBasis::full(n));
    }
    let cutoff = tol * reference;
    let rank = sv.iter().take(n).filter(|&&s| s > cutoff).count();
    let null = v.columns(rank, n - rank).into_owned();
    Ok(SubspaceBasis::from_orthonormal(canonicalize(&null)))
}

/// Orthonormal basis of the column space of `m`, with the same cutoff rule as
/// [`null_space`].
pub fn range_space(m: &ComplexMatrix, tol: f64) -> Result<SubspaceBasis> {
    ensure_finite(m, "matrix")?;
    let r = m.nrows();
    if m.ncols() == 0 || r == 0 {
        return Ok(SubspaceBasis::empty(r));
    }
    let Svd { sv, u, .. } = svd(m)?;
    let smax = sv[0];
    if smax == 0.0 {
        return Ok(SubspaceBasis::empty(r));
    }
    let cols: Vec<ComplexVector> =
        sv.iter().enumerate().filter(|(_, &s)| s > tol * smax).map(|(i, _)| u.column(i).into_owned()).collect();
    if cols.is_empty() {
        return Ok(SubspaceBasis::empty(r));
    }
    Ok(SubspaceBasis::from_orthonormal(canonicalize(&ComplexMatrix::from_columns(&cols))))
}

/// Orthonormal basis of the orthogonal complement of `sub`.
pub fn complement(sub: &SubspaceBasis) -> SubspaceBasis {
    let n = sub.ambient_dim();
    if sub.is_empty() {
        return SubspaceBasis::full(n);
    }
    if sub.dim() == n {
        return SubspaceBasis::empty(n);
    }
    // Rows of Q† are orthonormal, so the singular values are exactly 0 or 1.
    null_space(&sub.matrix().adjoint(), 0.5).expect("complement of a valid basis")
}

/// Gram matrix `G[k][j] = ⟨v_k|v_j⟩`, Hermitian by construction.
pub fn gram(vectors: &[ComplexVector]) -> Result<ComplexMatrix> {
    let n = vectors.len();
    if let Some(first) = vectors.first() {
        if vectors.iter().any(|v| v.len() != first.len()) {
            return Err(Error::InvalidInput("gram: vectors differ in dimension".into()));
        }
    }
    let mut g = ComplexMatrix::zeros(n, n);
    for k in 0..n {
        g[(k, k)] = Complex64::new(vectors[k].norm_squared(), 0.0);
        for j in k + 1..n {
            let z = vectors[k].dotc(&vectors[j]);
            g[(k, j)] = z;
            g[(j, k)] = z.conj();
        }
    }
    Ok(g)
}

/// Gram matrix of the columns of `m`.
pub fn gram_columns(m: &ComplexMatrix) -> ComplexMatrix {
    let cols: Vec<ComplexVector> = m.column_iter().map(|c| c.into_owned()).collect();
    gram(&cols).expect("columns share a dimension")
}

/// Forces exact Hermiticity: `(g + g†)/2`.
pub fn hermitize(g: &ComplexMatrix) -> ComplexMatrix {
    (g + g.adjoint()).map(|z| z * 0.5)
}

/// Inverse of a Hermitian positive-definite matrix.
///
/// Fails with [`Error::Conditioning`] when the smallest eigenvalue is not
/// above `1e-12` times the largest.
pub fn invert_hermitian(g: &ComplexMatrix) -> Result<ComplexMatrix> {
    if !g.is_square() {
        return Err(Error::InvalidInput("invert_hermitian: matrix not square".into()));
    }
    ensure_finite(g, "matrix")?;
    let n = g.nrows();
    if n == 0 {
        return Ok(ComplexMatrix::zeros(0, 0));
    }
    let scale = max_abs(g);
    if max_abs(&(g - g.adjoint())) > 1e-12 * scale.max(1.0) {
        return Err(Error::InvalidInput("invert_hermitian: matrix not Hermitian".into()));
    }
    let eig = hermitize(g).symmetric_eigen();
    let lmax = eig.eigenvalues.iter().fold(f64::MIN, |a, &l| a.max(l));
    let lmin = eig.eigenvalues.iter().fold(f64::MAX, |a, &l| a.min(l));
    let ratio = if lmax > 0.0 { lmin / lmax } else { 0.0 };
    if ratio <= MIN_EIGEN_RATIO {
        return Err(Error::Conditioning { context: "hermitian inverse".into(), ratio });
    }
    let v = &eig.eigenvectors;
    let inv_diag = ComplexMatrix::from_diagonal(&eig.eigenvalues.map(|l| Complex64::new(1.0 / l, 0.0)));
    Ok(hermitize(&(v * inv_diag * v.adjoint())))
}

/// Sequential (modified, twice-iterated) Gram–Schmidt in column order.
///
/// Returns `(Q, R)` with `m = Q·R`, `Q` orthonormal and `R` upper triangular
/// with positive real diagonal.
pub fn gram_schmidt(m: &ComplexMatrix) -> Result<(ComplexMatrix, ComplexMatrix)> {
    let (n, k) = m.shape();
    let mut q = ComplexMatrix::zeros(n, k);
    let mut r = ComplexMatrix::zeros(k, k);
    for j in 0..k {
        let original = m.column(j).into_owned();
        let mut v = original.clone();
        for _pass in 0..2 {
            for i in 0..j {
                let qi = q.column(i);
                let c = qi.dotc(&v);
                r[(i, j)] += c;
                v -= qi * c;
            }
        }
        let norm = v.norm();
        if norm <= 1e-12 * original.norm().max(f64::MIN_POSITIVE) {
            return Err(Error::Conditioning {
                context: format!("gram-schmidt column {j}"),
                ratio: norm / original.norm().max(f64::MIN_POSITIVE),
            });
        }
        r[(j, j)] = Complex64::new(norm, 0.0);
        q.set_column(j, &v.unscale(norm));
    }
    Ok((q, r))
}

/// Rotates `v` by a global phase so its largest-magnitude component (first
/// one on ties) is real and positive.
pub fn normalize_phase(v: &mut ComplexVector) {
    let max = v.iter().fold(0.0_f64, |a, z| a.max(z.norm()));
    if max == 0.0 {
        return;
    }
    let pivot = v.iter().position(|z| z.norm() >= max * (1.0 - TIE_TOL)).expect("max exists");
    let phase = v[pivot].conj() / v[pivot].norm();
    v.apply(|z| *z *= phase);
}

/// Canonical orthonormal basis for the span of the orthonormal columns of `q`.
///
/// Standard basis vectors are projected into the subspace and greedily
/// selected by largest residual (lowest index on ties), so any rotation of
/// the same subspace yields the same output.
pub fn canonicalize(q: &ComplexMatrix) -> ComplexMatrix {
    let (n, k) = q.shape();
    if k == 0 {
        return q.clone();
    }
    let p = q * q.adjoint();
    let mut chosen: Vec<ComplexVector> = Vec::with_capacity(k);
    let mut residuals: Vec<ComplexVector> = (0..n).map(|i| p.column(i).into_owned()).collect();
    for _ in 0..k {
        let norms: Vec<f64> = residuals.iter().map(|r| r.norm()).collect();
        let best = norms.iter().fold(0.0_f64, |a, &b| a.max(b));
        let pick = norms.iter().position(|&x| x >= best * (1.0 - TIE_TOL)).expect("nonempty");
        let mut b = residuals[pick].clone();
        for c in &chosen {
            let coef = c.dotc(&b);
            b -= c * coef;
        }
        let norm = b.norm();
        b.unscale_mut(norm);
        normalize_phase(&mut b);
        for r in residuals.iter_mut() {
            let coef = b.dotc(r);
            *r -= &b * coef;
        }
        chosen.push(b);
    }
    ComplexMatrix::from_columns(&chosen)
}

/// Spectral norm of the difference of the two orthogonal projectors; the sine
/// of the largest principal angle when the dimensions agree.
pub fn subspace_distance(a: &SubspaceBasis, b: &SubspaceBasis) -> Result<f64> {
    if a.ambient_dim() != b.ambient_dim() {
        return Err(Error::InvalidInput("subspaces live in different spaces".into()));
    }
    if a.dim() != b.dim() {
        return Ok(1.0);
    }
    let diff = hermitize(&(a.projector() - b.projector()));
    if diff.is_empty() {
        return Ok(0.0);
    }
    Ok(diff.symmetric_eigen().eigenvalues.iter().fold(0.0_f64, |m, l| m.max(l.abs())))
}

/// Standard basis vector `e_i` of length `n`.
pub fn unit_vector(n: usize, i: usize) -> ComplexVector {
    let mut v = ComplexVector::zeros(n);
    v[i] = ONE;
    v
}

/// Builds a complex vector from real components.
pub fn real_vector(components: &[f64]) -> ComplexVector {
    ComplexVector::from_iterator(components.len(), components.iter().map(|&x| Complex64::new(x, 0.0)))
}
