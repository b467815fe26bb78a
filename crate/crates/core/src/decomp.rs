//! Hilbert-space decomposition of the ground manifolds and construction of
//! lambda pairs.
//!
//! Each ground manifold splits into a part that transfers coherently
//! (`λ`), a part that never couples (`d`), and a part that is driven bright
//! (`′`):
//!
//! ```text
//! H_a = H_a^λ ⊕ H_a^d ⊕ H_a′        H_b = H_b^λ ⊕ H_b^d ⊕ H_b′
//! ```
//!
//! The mapping `M = R_b (R_b†R_b)⁻¹ R_a†` carries `H_a^λ` onto `H_b^λ` and
//! defines the lambda partner of every `a` state.

use crate::atom::LevelSystem;
use crate::error::{Error, Result};
use crate::linalg::{
    self, complement, null_space, null_space_scaled, range_space, spectral_norm, ComplexMatrix, ComplexVector,
    SubspaceBasis, MIN_EIGEN_RATIO,
};

/// Tolerance for "this vector lies in that subspace".
pub const MEMBERSHIP_TOL: f64 = 1e-9;

/// Lambda values below this signal a state effectively outside `H_a^λ`.
pub const MIN_LAMBDA: f64 = 1e-12;

/// Dimensions `(λ, d, ′)` of one ground manifold's decomposition.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DimRow {
    pub lambda: usize,
    pub dark: usize,
    pub prime: usize,
}

impl DimRow {
    pub fn as_tuple(&self) -> (usize, usize, usize) {
        (self.lambda, self.dark, self.prime)
    }
}

/// Orthonormal bases for every block of the decomposition, plus `M`.
#[derive(Debug, Clone)]
pub struct Decomposition {
    pub a_dark: SubspaceBasis,
    pub a_perp: SubspaceBasis,
    pub a_lambda: SubspaceBasis,
    pub a_prime: SubspaceBasis,
    pub b_dark: SubspaceBasis,
    pub b_perp: SubspaceBasis,
    pub b_lambda: SubspaceBasis,
    pub b_prime: SubspaceBasis,
    pub e_dark: SubspaceBasis,
    pub e_perp: SubspaceBasis,
    /// `dim_b × dim_a`, zero on the complement of `H_a^λ`.
    pub mapping: ComplexMatrix,
    pub rank_tol: f64,
}

impl Decomposition {
    pub fn dims_a(&self) -> DimRow {
        DimRow { lambda: self.a_lambda.dim(), dark: self.a_dark.dim(), prime: self.a_prime.dim() }
    }

    pub fn dims_b(&self) -> DimRow {
        DimRow { lambda: self.b_lambda.dim(), dark: self.b_dark.dim(), prime: self.b_prime.dim() }
    }
}

/// Computes the decomposition of both ground manifolds.
///
/// `H_a^λ` is found as the null space of `P_e^d·A_a†` restricted to `H_a^⊥`;
/// `(R_b†R_b)⁻¹` is applied by a Cholesky solve on `H_e^⊥`.
pub fn decompose(system: &LevelSystem, tol: f64) -> Result<Decomposition> {
    let raise_a = system.raise_a();
    let raise_b = system.raise_b();
    let lower_b = system.lower_b();

    let a_dark = null_space(&raise_a, tol)?;
    let b_dark = null_space(&raise_b, tol)?;
    let e_dark = null_space(lower_b, tol)?;
    let a_perp = complement(&a_dark);
    let b_perp = complement(&b_dark);
    let e_perp = complement(&e_dark);

    // States of H_a^⊥ whose excitation has no overlap with H_e^d.
    let (a_lambda, a_prime) = if a_perp.is_empty() {
        (a_perp.clone(), a_perp.clone())
    } else {
        let restricted = e_dark.projector() * &raise_a * a_perp.matrix();
        let inner = null_space_scaled(&restricted, tol, spectral_norm(&raise_a))?;
        let inner_prime = complement(&inner);
        (a_perp.embed(&inner), a_perp.embed(&inner_prime))
    };

    let mapping = lambda_mapping(system, &a_lambda, &e_perp)?;

    let b_lambda = range_space(&mapping, tol)?;
    if b_lambda.dim() != a_lambda.dim() {
        return Err(Error::InternalConsistency(format!(
            "rank of M is {} but dim H_a^λ is {}",
            b_lambda.dim(),
            a_lambda.dim()
        )));
    }
    let b_prime = if b_perp.is_empty() {
        b_perp.clone()
    } else {
        let coords = b_perp.matrix().adjoint() * b_lambda.matrix();
        let inner = SubspaceBasis::from_orthonormal(linalg::canonicalize(&coords));
        b_perp.embed(&complement(&inner))
    };

    Ok(Decomposition {
        a_dark,
        a_perp,
        a_lambda,
        a_prime,
        b_dark,
        b_perp,
        b_lambda,
        b_prime,
        e_dark,
        e_perp,
        mapping,
        rank_tol: tol,
    })
}

fn lambda_mapping(system: &LevelSystem, a_lambda: &SubspaceBasis, e_perp: &SubspaceBasis) -> Result<ComplexMatrix> {
    let (da, db) = (system.dim_a(), system.dim_b());
    if a_lambda.is_empty() || e_perp.is_empty() {
        return Ok(ComplexMatrix::zeros(db, da));
    }
    let q_e = e_perp.matrix();
    let r_b = system.lower_b() * q_e;
    let kernel = linalg::hermitize(&(r_b.adjoint() * &r_b));
    let eig = kernel.clone().symmetric_eigen();
    let lmax = eig.eigenvalues.iter().fold(f64::MIN, |a, &l| a.max(l));
    let lmin = eig.eigenvalues.iter().fold(f64::MAX, |a, &l| a.min(l));
    let ratio = if lmax > 0.0 { lmin / lmax } else { 0.0 };
    if ratio <= MIN_EIGEN_RATIO {
        return Err(Error::Conditioning { context: "R_b†R_b on H_e^⊥".into(), ratio });
    }
    let chol =
        kernel.cholesky().ok_or_else(|| Error::Conditioning { context: "R_b†R_b on H_e^⊥".into(), ratio })?;
    let r_a_dag = q_e.adjoint() * system.raise_a() * a_lambda.projector();
    Ok(r_b * chol.solve(&r_a_dag))
}

/// Matched lambda pairs `(ψ_aj, ψ_bj, λ_j)`.
#[derive(Debug, Clone)]
pub struct LambdaBasis {
    a_states: ComplexMatrix,
    b_states: ComplexMatrix,
    lambdas: Vec<f64>,
    b_gram: ComplexMatrix,
    dim_e: usize,
}

impl LambdaBasis {
    /// Builds a basis directly from pair data, checking the invariants of
    /// the dark-state equations (orthonormal `a` side, unit `b` states,
    /// positive `λ`). Pair relations are not checked here.
    pub fn from_parts(
        a_states: ComplexMatrix,
        b_states: ComplexMatrix,
        lambdas: Vec<f64>,
        dim_e: usize,
    ) -> Result<Self> {
        let n = lambdas.len();
        if a_states.ncols() != n || b_states.ncols() != n {
            return Err(Error::InvalidInput("lambda basis: mismatched pair counts".into()));
        }
        if linalg::unitarity_error(&a_states) > linalg::ORTHONORMAL_TOL {
            return Err(Error::InvalidInput("lambda basis: a states not orthonormal".into()));
        }
        for (j, &l) in lambdas.iter().enumerate() {
            if !(l.is_finite() && l > 0.0) {
                return Err(Error::DegeneratePair { index: j, lambda: l });
            }
            let norm = b_states.column(j).norm();
            if (norm - 1.0).abs() > 1e-10 {
                return Err(Error::InvalidInput(format!("lambda basis: b state {j} has norm {norm}")));
            }
        }
        let b_gram = linalg::gram_columns(&b_states);
        Ok(Self { a_states, b_states, lambdas, b_gram, dim_e })
    }

    /// Number of pairs.
    pub fn len(&self) -> usize {
        self.lambdas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lambdas.is_empty()
    }

    pub fn a_states(&self) -> &ComplexMatrix {
        &self.a_states
    }

    pub fn b_states(&self) -> &ComplexMatrix {
        &self.b_states
    }

    pub fn a_state(&self, j: usize) -> ComplexVector {
        self.a_states.column(j).into_owned()
    }

    pub fn b_state(&self, j: usize) -> ComplexVector {
        self.b_states.column(j).into_owned()
    }

    pub fn lambdas(&self) -> &[f64] {
        &self.lambdas
    }

    pub fn b_gram(&self) -> &ComplexMatrix {
        &self.b_gram
    }

    pub fn dim_a(&self) -> usize {
        self.a_states.nrows()
    }

    pub fn dim_b(&self) -> usize {
        self.b_states.nrows()
    }

    pub fn dim_e(&self) -> usize {
        self.dim_e
    }

    /// Largest pair-relation residual `‖λ_j A_b†ψ_bj − A_a†ψ_aj‖`.
    pub fn pair_residual(&self, system: &LevelSystem) -> f64 {
        let (ra, rb) = (system.raise_a(), system.raise_b());
        (0..self.len())
            .map(|j| (&rb * self.b_state(j) * nalgebra::Complex::from(self.lambdas[j]) - &ra * self.a_state(j)).norm())
            .fold(0.0, f64::max)
    }
}

/// Builds lambda pairs `ψ_bj = Mψ_aj/λ_j` with `λ_j = ‖Mψ_aj‖`.
///
/// When `a_basis` is `None` the decomposition's own `H_a^λ` basis is used;
/// otherwise the vectors must be an orthonormal basis of `H_a^λ`.
pub fn lambda_pairs(
    decomposition: &Decomposition,
    system: &LevelSystem,
    a_basis: Option<&[ComplexVector]>,
) -> Result<LambdaBasis> {
    let da = system.dim_a();
    let a_states = match a_basis {
        None => decomposition.a_lambda.matrix().clone(),
        Some(vectors) => {
            if vectors.len() != decomposition.a_lambda.dim() {
                return Err(Error::InvalidInput(format!(
                    "a_basis has {} vectors but dim H_a^λ = {}",
                    vectors.len(),
                    decomposition.a_lambda.dim()
                )));
            }
            let basis = SubspaceBasis::from_vectors(da, vectors)?;
            for (j, v) in basis.vectors().enumerate() {
                let r = decomposition.a_lambda.residual(&v);
                if r > MEMBERSHIP_TOL {
                    return Err(Error::InvalidInput(format!(
                        "a_basis vector {j} lies outside H_a^λ (residual {r:.3e})"
                    )));
                }
            }
            basis.matrix().clone()
        }
    };
    let n = a_states.ncols();
    let mut b_states = ComplexMatrix::zeros(system.dim_b(), n);
    let mut lambdas = Vec::with_capacity(n);
    for j in 0..n {
        let image = &decomposition.mapping * a_states.column(j);
        let lambda = image.norm();
        if lambda < MIN_LAMBDA {
            return Err(Error::DegeneratePair { index: j, lambda });
        }
        b_states.set_column(j, &image.unscale(lambda));
        lambdas.push(lambda);
    }
    LambdaBasis::from_parts(a_states, b_states, lambdas, system.dim_e())
}

/// Symmetry-adapted basis of `H_a^λ`: bare basis states that lie entirely in
/// `H_a^λ` (in manifold order), completed by a canonical basis of what
/// remains.
pub fn adapted_a_basis(decomposition: &Decomposition) -> Vec<ComplexVector> {
    let lam = &decomposition.a_lambda;
    let n = lam.ambient_dim();
    let mut picked: Vec<ComplexVector> =
        (0..n).map(|i| linalg::unit_vector(n, i)).filter(|e| lam.residual(e) <= MEMBERSHIP_TOL).collect();
    if picked.len() < lam.dim() {
        let used = if picked.is_empty() {
            ComplexMatrix::zeros(lam.dim(), 0)
        } else {
            lam.matrix().adjoint() * ComplexMatrix::from_columns(&picked)
        };
        let used = SubspaceBasis::from_orthonormal(used);
        let rest = lam.embed(&complement(&used));
        picked.extend(rest.vectors());
    }
    picked
}

/// Evidence that a vector of `H_a′` is driven bright.
#[derive(Debug, Clone)]
pub struct BrightWitness {
    pub state: ComplexVector,
    /// Normalized `ψ_e ∈ H_e^d` with `⟨ψ_e|A_a†|ψ⟩ ≠ 0`.
    pub excited: ComplexVector,
    pub overlap: f64,
}

/// Evidence that a vector of `H_b′` has no lambda partner in `H_a^⊥`.
#[derive(Debug, Clone)]
pub struct PairlessCertificate {
    pub state: ComplexVector,
    /// Relative distance of `A_b†ψ` from `A_a†(H_a^⊥)`.
    pub residual: f64,
}

#[derive(Debug, Clone)]
pub struct BrightReport {
    pub a_witnesses: Vec<BrightWitness>,
    pub b_certificates: Vec<PairlessCertificate>,
    /// `rank [A_a†Q_a⊥ | A_b†Q_b′]` and the value required for no pairs.
    pub combined_rank: usize,
    pub expected_rank: usize,
}

/// Smallest witness overlap accepted by [`verify_bright`].
pub const MIN_WITNESS_OVERLAP: f64 = 1e-6;

/// Numerical witnesses that `H_a′` and `H_b′` contain no lambda dark states.
pub fn verify_bright(decomposition: &Decomposition, system: &LevelSystem) -> Result<BrightReport> {
    let raise_a = system.raise_a();
    let raise_b = system.raise_b();
    let p_ed = decomposition.e_dark.projector();

    let mut a_witnesses = Vec::new();
    for state in decomposition.a_prime.vectors() {
        let w = &p_ed * &raise_a * &state;
        let overlap = w.norm();
        if overlap <= MIN_WITNESS_OVERLAP {
            return Err(Error::InternalConsistency(format!(
                "no H_e^d witness for an H_a' state (overlap {overlap:.3e})"
            )));
        }
        a_witnesses.push(BrightWitness { state, excited: w.unscale(overlap), overlap });
    }

    let tol = decomposition.rank_tol;
    let a_image = if decomposition.a_perp.is_empty() {
        SubspaceBasis::empty(system.dim_e())
    } else {
        range_space(&(&raise_a * decomposition.a_perp.matrix()), tol)?
    };
    let mut b_certificates = Vec::new();
    for state in decomposition.b_prime.vectors() {
        let excited = &raise_b * &state;
        let residual = a_image.residual(&excited) / excited.norm();
        if residual <= MIN_WITNESS_OVERLAP {
            return Err(Error::InternalConsistency(format!("H_b' state pairs with H_a^⊥ (residual {residual:.3e})")));
        }
        b_certificates.push(PairlessCertificate { state, residual });
    }

    let expected_rank = a_image.dim() + decomposition.b_prime.dim();
    let combined_rank = if expected_rank == 0 {
        0
    } else {
        let mut cols: Vec<ComplexVector> = a_image.vectors().collect();
        cols.extend(decomposition.b_prime.vectors().map(|v| &raise_b * v));
        range_space(&ComplexMatrix::from_columns(&cols), tol)?.dim()
    };
    if combined_rank != expected_rank {
        return Err(Error::InternalConsistency(format!(
            "H_b' rank certificate failed: {combined_rank} != {expected_rank}"
        )));
    }
    Ok(BrightReport { a_witnesses, b_certificates, combined_rank, expected_rank })
}
