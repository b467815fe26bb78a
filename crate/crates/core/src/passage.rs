//! Lambda dark states, their equations of motion and the resulting transfer map.
//!
//! The sweep is parameterized by the mixing angle θ ∈ [0, π/2]. Each λ-pair
//! `(ψ_aj, ψ_bj)` defines the dark state `cos φ_j ψ_aj + sin φ_j ψ_bj` with
//! `tan φ_j = λ_j tan θ`. Because the b-side states need not be orthogonal the
//! dark states mix as θ changes; integrating the coefficient ODE over the
//! full sweep yields the transfer map `U`.

use std::f64::consts::FRAC_PI_2;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::atom::{LevelSystem, Manifold};
use crate::decomp::{adapted_a_basis, decompose, lambda_pairs, Decomposition, LambdaBasis};
use crate::error::{Error, Result};
use crate::linalg::{gram_schmidt, invert_hermitian, unitarity_error, ComplexMatrix, ComplexVector};
use crate::ode::{integrate, OdeOptions, OdeStats};
use crate::oracle::hamiltonian;

/// Slack allowed on θ outside `[0, π/2]` before a frame is rejected.
const THETA_SLACK: f64 = 1e-12;

/// Threshold on `‖U†U − I‖_max` beyond which a transfer is rejected.
pub const UNITARITY_LIMIT: f64 = 1e-6;

/// Tolerance used when checking that a state lies in a subspace.
pub const PREDICTION_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Direction {
    AToB,
    BToA,
}

impl Direction {
    pub fn reversed(self) -> Self {
        match self {
            Direction::AToB => Direction::BToA,
            Direction::BToA => Direction::AToB,
        }
    }

    pub fn source(self) -> Manifold {
        match self {
            Direction::AToB => Manifold::A,
            Direction::BToA => Manifold::B,
        }
    }

    pub fn target(self) -> Manifold {
        self.reversed().source()
    }
}

pub fn dark_angle(lambda: f64, theta: f64) -> f64 {
    (lambda * theta.sin()).atan2(theta.cos())
}

/// `dφ/dθ` for a pair with coupling ratio `lambda`.
pub fn dark_angle_rate(lambda: f64, theta: f64) -> f64 {
    let (s, c) = theta.sin_cos();
    lambda / (c * c + lambda * lambda * s * s)
}

/// The λ-pair basis evaluated at a fixed mixing angle.
#[derive(Debug, Clone)]
pub struct DarkFrame<'a> {
    basis: &'a LambdaBasis,
    theta: f64,
    phis: Vec<f64>,
}

impl<'a> DarkFrame<'a> {
    pub fn new(basis: &'a LambdaBasis, theta: f64) -> Result<Self> {
        if !(-THETA_SLACK..=FRAC_PI_2 + THETA_SLACK).contains(&theta) {
            return Err(Error::InvalidInput(format!("theta = {theta} outside [0, pi/2]")));
        }
        let theta = theta.clamp(0.0, FRAC_PI_2);
        let phis = basis.lambdas().iter().map(|&l| dark_angle(l, theta)).collect();
        Ok(Self { basis, theta, phis })
    }

    pub fn basis(&self) -> &'a LambdaBasis {
        self.basis
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn phis(&self) -> &[f64] {
        &self.phis
    }

    pub fn len(&self) -> usize {
        self.phis.len()
    }

    pub fn is_empty(&self) -> bool {
        self.phis.is_empty()
    }

    fn rates(&self) -> Vec<f64> {
        self.basis.lambdas().iter().map(|&l| dark_angle_rate(l, self.theta)).collect()
    }
}

/// The joint-space vector `cos φ_j ψ_aj ⊕ sin φ_j ψ_bj ⊕ 0`.
///
/// Panics if `j` is out of range.
pub fn dark_state(frame: &DarkFrame<'_>, j: usize) -> ComplexVector {
    assert!(j < frame.len(), "pair index {j} out of range for {} pairs", frame.len());
    let basis = frame.basis;
    let (da, db, de) = (basis.dim_a(), basis.dim_b(), basis.dim_e());
    let (s, c) = frame.phis[j].sin_cos();
    let mut v = ComplexVector::zeros(da + db + de);
    v.rows_mut(0, da).copy_from(&(basis.a_state(j) * Complex64::from(c)));
    v.rows_mut(da, db).copy_from(&(basis.b_state(j) * Complex64::from(s)));
    v
}

/// `‖H(θ)ψ‖ / (Ω/2)`, which vanishes exactly for dark states.
pub fn darkness_residual(system: &LevelSystem, frame: &DarkFrame<'_>, state: &ComplexVector, omega: f64) -> f64 {
    let h = hamiltonian(system, frame.theta, omega);
    (h * state).norm() / (omega / 2.0)
}

/// Overlap matrices entering the coefficient equations of motion.
#[derive(Debug, Clone, PartialEq)]
pub struct EomMatrices {
    /// `⟨Λ_k|Λ_j⟩`.
    pub gram: ComplexMatrix,
    /// `⟨Λ_k|Λ̄_j⟩` where `Λ̄_j = ∂Λ_j/∂φ_j`.
    pub gram_bar: ComplexMatrix,
    /// Inverse of `gram`.
    pub inverse: ComplexMatrix,
}

pub fn eom_matrices(frame: &DarkFrame<'_>) -> Result<EomMatrices> {
    let n = frame.len();
    let g = frame.basis.b_gram();
    let sc: Vec<(f64, f64)> = frame.phis.iter().map(|p| p.sin_cos()).collect();
    let mut gram = ComplexMatrix::zeros(n, n);
    let mut gram_bar = ComplexMatrix::zeros(n, n);
    for k in 0..n {
        let (sk, ck) = sc[k];
        for j in 0..n {
            let (sj, cj) = sc[j];
            let delta = if k == j { 1.0 } else { 0.0 };
            gram[(k, j)] = g[(k, j)] * (sk * sj) + ck * cj * delta;
            gram_bar[(k, j)] = g[(k, j)] * (sk * cj) - ck * sj * delta;
        }
    }
    let inverse = invert_hermitian(&gram)?;
    Ok(EomMatrices { gram, gram_bar, inverse })
}

/// `dc/dθ = −L Ḡ diag(φ̇) c`, applied column-wise to `c`.
fn eom_rhs(basis: &LambdaBasis, theta: f64, c: &ComplexMatrix) -> Result<ComplexMatrix> {
    let frame = DarkFrame::new(basis, theta.clamp(0.0, FRAC_PI_2))?;
    let m = eom_matrices(&frame)?;
    let rates = frame.rates();
    let mut scaled = c.clone();
    for (j, mut row) in scaled.row_iter_mut().enumerate() {
        row *= Complex64::from(rates[j]);
    }
    Ok(-(m.inverse * (m.gram_bar * scaled)))
}

/// Integrate the coefficient equations of motion between two mixing angles.
pub fn propagate_coefficients(
    basis: &LambdaBasis,
    theta_from: f64,
    theta_to: f64,
    c: ComplexMatrix,
    opts: &OdeOptions,
) -> Result<(ComplexMatrix, OdeStats)> {
    if c.nrows() != basis.len() {
        return Err(Error::InvalidInput(format!("coefficient rows {} != number of pairs {}", c.nrows(), basis.len())));
    }
    integrate(|t, y| eom_rhs(basis, t, y), theta_from, theta_to, c, opts)
}

/// The adiabatic map between `H_a^λ` and `H_b^λ`.
#[derive(Debug, Clone, PartialEq)]
pub struct TransferMap {
    pub direction: Direction,
    /// Column `j` holds the target-side coefficients of source basis state `j`
    /// in the (non-orthogonal for the b side) λ-pair basis.
    pub c_final: ComplexMatrix,
    /// The same map between orthonormal bases of the two λ-spaces.
    pub u_ortho: ComplexMatrix,
    /// Orthonormalized b-side basis (columns over the b manifold).
    pub ortho_b_basis: ComplexMatrix,
    /// Upper-triangular factor with `B = Q R`.
    pub b_triangular: ComplexMatrix,
    pub unitarity_error: f64,
    pub stats: OdeStats,
}

impl TransferMap {
    /// Largest deviation from unit norm of the image of a source basis state.
    pub fn output_norm_error(&self, basis: &LambdaBasis) -> f64 {
        let metric = match self.direction {
            Direction::AToB => basis.b_gram().clone(),
            Direction::BToA => ComplexMatrix::identity(basis.len(), basis.len()),
        };
        self.c_final.column_iter().map(|c| ((c.adjoint() * &metric * c)[(0, 0)].re - 1.0).abs()).fold(0.0, f64::max)
    }

    /// Image of a state given by source-side coordinates.
    pub fn apply(&self, coords: &ComplexVector) -> ComplexVector {
        &self.c_final * coords
    }
}

/// Assemble a transfer map from final coefficients.
pub fn transfer_from_coefficients(
    basis: &LambdaBasis,
    direction: Direction,
    c_final: ComplexMatrix,
    stats: OdeStats,
) -> Result<TransferMap> {
    let n = basis.len();
    if c_final.shape() != (n, n) {
        return Err(Error::InvalidInput(format!("coefficient matrix must be {n}x{n}")));
    }
    let (q, r) = if n == 0 {
        (ComplexMatrix::zeros(basis.dim_b(), 0), ComplexMatrix::zeros(0, 0))
    } else {
        gram_schmidt(basis.b_states())?
    };
    let u_ortho = match direction {
        Direction::AToB => &r * &c_final,
        Direction::BToA => {
            let r_inv = r
                .solve_upper_triangular(&ComplexMatrix::identity(n, n))
                .ok_or_else(|| Error::InternalConsistency("singular b-side triangular factor".into()))?;
            &c_final * r_inv
        }
    };
    let err = unitarity_error(&u_ortho);
    if err.is_nan() || err > UNITARITY_LIMIT {
        return Err(Error::IntegrationAccuracy { deviation: err });
    }
    Ok(TransferMap { direction, c_final, u_ortho, ortho_b_basis: q, b_triangular: r, unitarity_error: err, stats })
}

/// Integrate the dark-state equations of motion across the full sweep.
pub fn integrate_transfer(basis: &LambdaBasis, direction: Direction, opts: &OdeOptions) -> Result<TransferMap> {
    opts.validate()?;
    let n = basis.len();
    let (from, to) = match direction {
        Direction::AToB => (0.0, FRAC_PI_2),
        Direction::BToA => (FRAC_PI_2, 0.0),
    };
    let (c, stats) = if n == 0 {
        (ComplexMatrix::zeros(0, 0), OdeStats::default())
    } else {
        propagate_coefficients(basis, from, to, ComplexMatrix::identity(n, n), opts)?
    };
    transfer_from_coefficients(basis, direction, c, stats)
}

/// Outcome of the closed-form two-pair analysis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TwoLevelSolution {
    /// Orthogonal b-states: coefficients never change.
    Decoupled,
    /// Equal λ and real overlap: `U ψ_a1 = α ψ_b1 + β ψ_b2`, `U ψ_a2 = β ψ_b1 + α ψ_b2`.
    EqualLambda { alpha: f64, beta: f64 },
    /// No closed form; integrate numerically.
    Unsupported,
}

impl TwoLevelSolution {
    /// Forward (a→b) coefficient matrix, when a closed form exists.
    pub fn coefficients(&self) -> Option<ComplexMatrix> {
        match *self {
            TwoLevelSolution::Decoupled => Some(ComplexMatrix::identity(2, 2)),
            TwoLevelSolution::EqualLambda { alpha, beta } => {
                Some(DMatrix::from_row_slice(2, 2, &[alpha.into(), beta.into(), beta.into(), alpha.into()]))
            }
            TwoLevelSolution::Unsupported => None,
        }
    }
}

const ANALYTIC_TOL: f64 = 1e-12;

pub fn analytic_two_level(lambda1: f64, lambda2: f64, z: f64) -> Result<TwoLevelSolution> {
    if !z.is_finite() || z.abs() >= 1.0 {
        return Err(Error::InvalidOverlap(z));
    }
    if z.abs() <= ANALYTIC_TOL {
        return Ok(TwoLevelSolution::Decoupled);
    }
    if (lambda1 - lambda2).abs() <= ANALYTIC_TOL * lambda1.abs().max(lambda2.abs()).max(1.0) {
        let p = (1.0 + z).powf(-0.5);
        let m = (1.0 - z).powf(-0.5);
        return Ok(TwoLevelSolution::EqualLambda { alpha: (p + m) / 2.0, beta: (p - m) / 2.0 });
    }
    Ok(TwoLevelSolution::Unsupported)
}

/// Closed-form coefficients along the sweep for two equal-λ pairs.
pub fn equal_lambda_coefficients(z: f64, phi: f64, c0: [Complex64; 2]) -> [Complex64; 2] {
    let s2 = phi.sin().powi(2);
    let eta_p = (c0[0] + c0[1]) * (1.0 + z * s2).powf(-0.5);
    let eta_m = (c0[0] - c0[1]) * (1.0 - z * s2).powf(-0.5);
    [(eta_p + eta_m) / 2.0, (eta_p - eta_m) / 2.0]
}

/// Closed-form transfer for a basis when one applies: fully orthogonal b-states
/// (any number of pairs) or two pairs of equal λ with real overlap.
pub fn analytic_transfer(basis: &LambdaBasis, direction: Direction) -> Result<Option<TransferMap>> {
    let n = basis.len();
    let g = basis.b_gram();
    let off_diag = (0..n)
        .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
        .map(|(i, j)| g[(i, j)].norm())
        .fold(0.0, f64::max);
    let forward = if off_diag <= ANALYTIC_TOL {
        Some(ComplexMatrix::identity(n, n))
    } else if n == 2 && g[(0, 1)].im.abs() <= ANALYTIC_TOL {
        let l = basis.lambdas();
        analytic_two_level(l[0], l[1], g[(0, 1)].re)?.coefficients()
    } else {
        None
    };
    let Some(forward) = forward else { return Ok(None) };
    let c = match direction {
        Direction::AToB => forward,
        Direction::BToA => forward
            .try_inverse()
            .ok_or_else(|| Error::InternalConsistency("closed-form coefficients are singular".into()))?,
    };
    transfer_from_coefficients(basis, direction, c, OdeStats::default()).map(Some)
}

/// Populations along an a→b sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryPoint {
    pub theta: f64,
    pub coefficients: ComplexVector,
    /// Population of each bare a state.
    pub populations_a: Vec<f64>,
    /// Population of each bare b state.
    pub populations_b: Vec<f64>,
    /// `c† ⟨Λ|Λ⟩ c`, conserved by the equations of motion.
    pub norm: f64,
}

/// Evaluate the dark-state expansion on an ascending grid of mixing angles.
pub fn trajectory(
    basis: &LambdaBasis,
    initial_c: &ComplexVector,
    theta_grid: &[f64],
    opts: &OdeOptions,
) -> Result<Vec<TrajectoryPoint>> {
    opts.validate()?;
    let n = basis.len();
    if initial_c.len() != n {
        return Err(Error::InvalidInput(format!("initial coefficients must have length {n}")));
    }
    if (initial_c.norm() - 1.0).abs() > PREDICTION_TOL {
        return Err(Error::InvalidInput("initial coefficients are not normalized".into()));
    }
    if theta_grid.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::InvalidInput("theta grid must be ascending".into()));
    }
    let mut out = Vec::with_capacity(theta_grid.len());
    let mut theta = 0.0;
    let mut c = ComplexMatrix::from_column_slice(n, 1, initial_c.as_slice());
    for &t in theta_grid {
        let frame = DarkFrame::new(basis, t)?;
        let t = frame.theta();
        if t > theta {
            c = propagate_coefficients(basis, theta, t, c, opts)?.0;
            theta = t;
        }
        let cv = c.column(0).into_owned();
        let (cos, sin): (Vec<f64>, Vec<f64>) = frame.phis().iter().map(|p| (p.cos(), p.sin())).unzip();
        let wa = ComplexVector::from_iterator(n, (0..n).map(|j| cv[j] * cos[j]));
        let wb = ComplexVector::from_iterator(n, (0..n).map(|j| cv[j] * sin[j]));
        let psi_a = basis.a_states() * wa;
        let psi_b = basis.b_states() * wb;
        let gram = eom_matrices(&frame)?.gram;
        out.push(TrajectoryPoint {
            theta: t,
            norm: (cv.adjoint() * gram * &cv)[(0, 0)].re,
            populations_a: psi_a.iter().map(|z| z.norm_sqr()).collect(),
            populations_b: psi_b.iter().map(|z| z.norm_sqr()).collect(),
            coefficients: cv,
        });
    }
    Ok(out)
}

/// Predictions of the adiabatic theory for arbitrary joint-space states.
#[derive(Debug, Clone)]
pub struct Predictor {
    decomposition: Decomposition,
    basis: LambdaBasis,
    forward: TransferMap,
    reverse: TransferMap,
}

impl Predictor {
    /// Decompose `system` and integrate both sweep directions using the
    /// bare-state-adapted a basis.
    pub fn new(system: &LevelSystem, rank_tol: f64, opts: &OdeOptions) -> Result<Self> {
        let decomposition = decompose(system, rank_tol)?;
        let a_basis = adapted_a_basis(&decomposition);
        let basis = lambda_pairs(&decomposition, system, Some(&a_basis))?;
        Self::from_parts(decomposition, basis, opts)
    }

    pub fn from_parts(decomposition: Decomposition, basis: LambdaBasis, opts: &OdeOptions) -> Result<Self> {
        let forward = integrate_transfer(&basis, Direction::AToB, opts)?;
        let reverse = integrate_transfer(&basis, Direction::BToA, opts)?;
        Ok(Self { decomposition, basis, forward, reverse })
    }

    pub fn decomposition(&self) -> &Decomposition {
        &self.decomposition
    }

    pub fn basis(&self) -> &LambdaBasis {
        &self.basis
    }

    pub fn transfer(&self, direction: Direction) -> &TransferMap {
        match direction {
            Direction::AToB => &self.forward,
            Direction::BToA => &self.reverse,
        }
    }

    /// Final state predicted for `initial` (a⊕b⊕e), or `None` when part of it
    /// lies in a bright subspace and the adiabatic theory makes no claim.
    pub fn predict(
        &self,
        system: &LevelSystem,
        initial: &ComplexVector,
        direction: Direction,
    ) -> Option<ComplexVector> {
        if initial.len() != system.joint_dim() {
            return None;
        }
        let d = &self.decomposition;
        let psi_a = system.block(Manifold::A, initial);
        let psi_b = system.block(Manifold::B, initial);
        let psi_e = system.block(Manifold::E, initial);
        if psi_e.norm() > PREDICTION_TOL {
            return None;
        }
        let a_dark = d.a_dark.project(&psi_a);
        let b_dark = d.b_dark.project(&psi_b);
        let mut out = system.embed(Manifold::A, &a_dark) + system.embed(Manifold::B, &b_dark);
        match direction {
            Direction::AToB => {
                if (&psi_b - &b_dark).norm() > PREDICTION_TOL {
                    return None;
                }
                let rest = &psi_a - &a_dark;
                let coords = self.basis.a_states().adjoint() * &rest;
                if (&rest - self.basis.a_states() * &coords).norm() > PREDICTION_TOL {
                    return None;
                }
                let image = self.basis.b_states() * self.forward.apply(&coords);
                out += system.embed(Manifold::B, &image);
            }
            Direction::BToA => {
                if (&psi_a - &a_dark).norm() > PREDICTION_TOL {
                    return None;
                }
                let rest = &psi_b - &b_dark;
                let lam = d.b_lambda.project(&rest);
                if (&rest - &lam).norm() > PREDICTION_TOL {
                    return None;
                }
                let b = self.basis.b_states();
                let coords = invert_hermitian(self.basis.b_gram()).ok()? * (b.adjoint() * lam);
                let image = self.basis.a_states() * self.reverse.apply(&coords);
                out += system.embed(Manifold::A, &image);
            }
        }
        Some(out)
    }
}
