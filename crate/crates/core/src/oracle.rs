//! Direct Schrödinger propagation through a sweep, used to check the
//! adiabatic predictions.
//!
//! The propagator is a fourth-order commutator-free Magnus scheme: each step
//! applies two exponentials of Hamiltonians sampled at the Gauss points. The
//! exponentials act on the state through a Taylor series, and the
//! Hamiltonian is applied block-wise so that no joint-space matrix is formed.

use std::f64::consts::{FRAC_PI_2, PI};

use num_complex::Complex64;
use rayon::prelude::*;

use crate::atom::{LevelSystem, Manifold};
use crate::error::{Error, Result};
use crate::linalg::{ComplexMatrix, ComplexVector, DEFAULT_RANK_TOL};
use crate::ode::OdeOptions;
use crate::passage::{Direction, Predictor};

/// Largest tolerated `|‖ψ‖ − 1|` before a run is rejected.
pub const NORM_DRIFT_LIMIT: f64 = 1e-6;

/// `H = (Ω/2) cosθ (A_b + A_b†) − (Ω/2) sinθ (A_a + A_a†)` over a⊕b⊕e.
pub fn hamiltonian(system: &LevelSystem, theta: f64, omega: f64) -> ComplexMatrix {
    let n = system.joint_dim();
    let (oa, ob, oe) = (system.offset(Manifold::A), system.offset(Manifold::B), system.offset(Manifold::E));
    let (da, db, de) = (system.dim_a(), system.dim_b(), system.dim_e());
    let cb = Complex64::from(omega / 2.0 * theta.cos());
    let ca = Complex64::from(-omega / 2.0 * theta.sin());
    let mut h = ComplexMatrix::zeros(n, n);
    let ab = system.lower_b() * cb;
    let aa = system.lower_a() * ca;
    h.view_mut((ob, oe), (db, de)).copy_from(&ab);
    h.view_mut((oe, ob), (de, db)).copy_from(&ab.adjoint());
    h.view_mut((oa, oe), (da, de)).copy_from(&aa);
    h.view_mut((oe, oa), (de, da)).copy_from(&aa.adjoint());
    h
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ProfileShape {
    Linear,
    SineSquared,
}

/// Mixing angle as a function of time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepProfile {
    shape: ProfileShape,
    duration: f64,
    direction: Direction,
}

impl SweepProfile {
    pub fn new(shape: ProfileShape, duration: f64, direction: Direction) -> Result<Self> {
        if !(duration > 0.0 && duration.is_finite()) {
            return Err(Error::InvalidInput(format!("sweep duration {duration} must be positive")));
        }
        Ok(Self { shape, duration, direction })
    }

    pub fn shape(&self) -> ProfileShape {
        self.shape
    }

    pub fn duration(&self) -> f64 {
        self.duration
    }

    pub fn direction(&self) -> Direction {
        self.direction
    }

    /// θ(t); runs 0 → π/2 for a→b and π/2 → 0 for b→a.
    pub fn theta(&self, t: f64) -> f64 {
        let s = (t / self.duration).clamp(0.0, 1.0);
        let ramp = match self.shape {
            ProfileShape::Linear => FRAC_PI_2 * s,
            ProfileShape::SineSquared => FRAC_PI_2 * (PI * s / 2.0).sin().powi(2),
        };
        match self.direction {
            Direction::AToB => ramp,
            Direction::BToA => FRAC_PI_2 - ramp,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepControl {
    /// Upper bound on `Ω·dt`.
    pub max_omega_dt: f64,
    /// Repeat the run at half the step and report the difference.
    pub richardson: bool,
}

impl Default for StepControl {
    fn default() -> Self {
        Self { max_omega_dt: 0.05, richardson: false }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub final_state: ComplexVector,
    pub norm_drift: f64,
    pub max_excited_population: f64,
    /// Largest population outside the initial state seen during the sweep.
    pub max_leakage: f64,
    /// `|⟨ψ_pred|ψ(T)⟩|²`, when the adiabatic theory predicts a final state.
    pub fidelity_vs_u: Option<f64>,
    pub steps: usize,
    /// `‖ψ_N(T) − ψ_2N(T)‖` when a halving check was requested.
    pub step_error: Option<f64>,
}

struct Coupling<'a> {
    system: &'a LevelSystem,
    raise_a: ComplexMatrix,
    raise_b: ComplexMatrix,
}

impl<'a> Coupling<'a> {
    fn new(system: &'a LevelSystem) -> Self {
        Self { system, raise_a: system.raise_a(), raise_b: system.raise_b() }
    }

    /// `(cb (A_b + A_b†) − ca (A_a + A_a†)) ψ`.
    fn apply(&self, cb: f64, ca: f64, psi: &ComplexVector) -> ComplexVector {
        let s = self.system;
        let (oa, ob, oe) = (s.offset(Manifold::A), s.offset(Manifold::B), s.offset(Manifold::E));
        let (da, db, de) = (s.dim_a(), s.dim_b(), s.dim_e());
        let pa = psi.rows(oa, da);
        let pb = psi.rows(ob, db);
        let pe = psi.rows(oe, de);
        let mut out = ComplexVector::zeros(psi.len());
        out.rows_mut(oa, da).copy_from(&(s.lower_a() * pe * Complex64::from(-ca)));
        out.rows_mut(ob, db).copy_from(&(s.lower_b() * pe * Complex64::from(cb)));
        let e = &self.raise_b * pb * Complex64::from(cb) - &self.raise_a * pa * Complex64::from(ca);
        out.rows_mut(oe, de).copy_from(&e);
        out
    }

    /// `exp(−i τ K) ψ` with `K = cb (A_b + A_b†) − ca (A_a + A_a†)`, by Taylor series.
    fn exp_apply(&self, cb: f64, ca: f64, tau: f64, psi: &ComplexVector) -> ComplexVector {
        let mut sum = psi.clone();
        let mut term = psi.clone();
        let scale = psi.norm().max(f64::MIN_POSITIVE);
        for k in 1..64 {
            term = self.apply(cb, ca, &term) * Complex64::new(0.0, -tau / k as f64);
            sum += &term;
            if term.norm() <= 1e-17 * scale {
                break;
            }
        }
        sum
    }
}

const MAGNUS_C1: f64 = 0.5 - 0.288_675_134_594_812_9; // 1/2 − √3/6
const MAGNUS_C2: f64 = 0.5 + 0.288_675_134_594_812_9;
const MAGNUS_A1: f64 = 0.25 - 0.288_675_134_594_812_9; // (3 − 2√3)/12
const MAGNUS_A2: f64 = 0.25 + 0.288_675_134_594_812_9;

struct Observed {
    state: ComplexVector,
    norm_drift: f64,
    max_excited: f64,
    max_leakage: f64,
}

fn run(coupling: &Coupling<'_>, profile: &SweepProfile, omega: f64, initial: &ComplexVector, steps: usize) -> Observed {
    let s = coupling.system;
    let (oe, de) = (s.offset(Manifold::E), s.dim_e());
    let dt = profile.duration / steps as f64;
    let half = omega / 2.0;
    let mut psi = initial.clone();
    let mut obs = Observed { state: psi.clone(), norm_drift: 0.0, max_excited: 0.0, max_leakage: 0.0 };
    let record = |psi: &ComplexVector, obs: &mut Observed| {
        let norm = psi.norm();
        obs.norm_drift = obs.norm_drift.max((norm - 1.0).abs());
        obs.max_excited = obs.max_excited.max(psi.rows(oe, de).norm_squared());
        let overlap = initial.dotc(psi).norm_sqr();
        obs.max_leakage = obs.max_leakage.max((norm * norm - overlap).max(0.0));
    };
    record(&psi, &mut obs);
    for n in 0..steps {
        let t = n as f64 * dt;
        let th1 = profile.theta(t + MAGNUS_C1 * dt);
        let th2 = profile.theta(t + MAGNUS_C2 * dt);
        let (s1, c1) = th1.sin_cos();
        let (s2, c2) = th2.sin_cos();
        // First the right-hand exponential, then the left.
        psi = coupling.exp_apply(
            half * (MAGNUS_A2 * c1 + MAGNUS_A1 * c2),
            half * (MAGNUS_A2 * s1 + MAGNUS_A1 * s2),
            dt,
            &psi,
        );
        psi = coupling.exp_apply(
            half * (MAGNUS_A1 * c1 + MAGNUS_A2 * c2),
            half * (MAGNUS_A1 * s1 + MAGNUS_A2 * s2),
            dt,
            &psi,
        );
        record(&psi, &mut obs);
    }
    obs.state = psi;
    obs
}

/// Propagate `initial` through the sweep and compare with `predicted`, if given.
pub fn evolve_against(
    system: &LevelSystem,
    profile: &SweepProfile,
    omega: f64,
    initial: &ComplexVector,
    control: &StepControl,
    predicted: Option<&ComplexVector>,
) -> Result<SweepResult> {
    if !(omega > 0.0 && omega.is_finite()) {
        return Err(Error::InvalidInput(format!("omega = {omega} must be positive")));
    }
    if !(control.max_omega_dt > 0.0 && control.max_omega_dt <= 1.0) {
        return Err(Error::InvalidInput("max_omega_dt must lie in (0, 1]".into()));
    }
    if initial.len() != system.joint_dim() {
        return Err(Error::InvalidInput(format!(
            "initial state has length {}, expected {}",
            initial.len(),
            system.joint_dim()
        )));
    }
    if (initial.norm() - 1.0).abs() > 1e-10 {
        return Err(Error::InvalidInput("initial state must have unit norm".into()));
    }
    let coupling = Coupling::new(system);
    let steps = ((omega * profile.duration) / control.max_omega_dt).ceil().max(1.0) as usize;
    let obs = run(&coupling, profile, omega, initial, steps);
    if obs.norm_drift > NORM_DRIFT_LIMIT {
        return Err(Error::PropagationAccuracy { drift: obs.norm_drift });
    }
    let step_error =
        control.richardson.then(|| (run(&coupling, profile, omega, initial, 2 * steps).state - &obs.state).norm());
    let fidelity_vs_u = predicted.map(|p| {
        let pn = p.norm();
        if pn == 0.0 {
            0.0
        } else {
            (p.dotc(&obs.state).norm() / pn).powi(2)
        }
    });
    Ok(SweepResult {
        final_state: obs.state,
        norm_drift: obs.norm_drift,
        max_excited_population: obs.max_excited,
        max_leakage: obs.max_leakage,
        fidelity_vs_u,
        steps,
        step_error,
    })
}

/// Propagate `initial` and compare with the adiabatic prediction computed
/// from default tolerances.
pub fn evolve(
    system: &LevelSystem,
    profile: &SweepProfile,
    omega: f64,
    initial: &ComplexVector,
    control: &StepControl,
) -> Result<SweepResult> {
    let predictor = Predictor::new(system, DEFAULT_RANK_TOL, &OdeOptions::default())?;
    let predicted = predictor.predict(system, initial, profile.direction());
    evolve_against(system, profile, omega, initial, control, predicted.as_ref())
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergencePoint {
    pub omega_t: f64,
    pub infidelity: f64,
    pub max_excited_population: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceStudy {
    pub points: Vec<ConvergencePoint>,
    /// Slope of log(infidelity) against log(ΩT), when at least two points
    /// have measurable infidelity.
    pub decay_exponent: Option<f64>,
}

impl ConvergenceStudy {
    /// True when infidelity never increases by more than `slack` between
    /// consecutive ΩT values.
    pub fn is_monotone(&self, slack: f64) -> bool {
        self.points.windows(2).all(|w| w[1].infidelity <= w[0].infidelity + slack)
    }
}

/// Infidelity against the adiabatic prediction over a list of sweep durations (Ω = 1).
pub fn convergence_study(
    system: &LevelSystem,
    predictor: &Predictor,
    initial: &ComplexVector,
    direction: Direction,
    shape: ProfileShape,
    omega_t_list: &[f64],
    control: &StepControl,
) -> Result<ConvergenceStudy> {
    if omega_t_list.is_empty() || omega_t_list.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidInput("omega_t list must be non-empty and increasing".into()));
    }
    let predicted = predictor
        .predict(system, initial, direction)
        .ok_or_else(|| Error::InvalidInput("initial state has no adiabatic prediction".into()))?;
    let points = omega_t_list
        .par_iter()
        .map(|&omega_t| {
            let profile = SweepProfile::new(shape, omega_t, direction)?;
            let r = evolve_against(system, &profile, 1.0, initial, control, Some(&predicted))?;
            Ok(ConvergencePoint {
                omega_t,
                infidelity: (1.0 - r.fidelity_vs_u.unwrap_or(0.0)).max(0.0),
                max_excited_population: r.max_excited_population,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ConvergenceStudy { decay_exponent: fit_decay(&points), points })
}

fn fit_decay(points: &[ConvergencePoint]) -> Option<f64> {
    let xy: Vec<(f64, f64)> =
        points.iter().filter(|p| p.infidelity > 1e-14).map(|p| (p.omega_t.ln(), p.infidelity.ln())).collect();
    if xy.len() < 2 {
        return None;
    }
    let n = xy.len() as f64;
    let mx = xy.iter().map(|p| p.0).sum::<f64>() / n;
    let my = xy.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = xy.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = xy.iter().map(|p| (p.0 - mx).powi(2)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}
