//! Command execution: config in, report out.

use std::f64::consts::FRAC_PI_2;

use num_complex::Complex64;
use rayon::prelude::*;
use serde_json::{json, Value};
use stirap_core::decomp::{adapted_a_basis, decompose, lambda_pairs, verify_bright, Decomposition, LambdaBasis};
use stirap_core::linalg::ComplexVector;
use stirap_core::ode::{OdeOptions, OdeStats};
use stirap_core::oracle::{convergence_study, evolve_against, ProfileShape, StepControl, SweepProfile};
use stirap_core::passage::{
    analytic_transfer, dark_state, darkness_residual, integrate_transfer, trajectory, DarkFrame, Direction, Predictor,
    TransferMap,
};
use stirap_core::{LevelSystem, Manifold};

use crate::config::{Command, JobConfig, ManifoldName, Profile, SweepDirection, TransferMethod};
use crate::error::CliError;
use crate::report::{self, cmat, cvec, num, reals};

fn direction(d: SweepDirection) -> Direction {
    match d {
        SweepDirection::AToB => Direction::AToB,
        SweepDirection::BToA => Direction::BToA,
    }
}

fn direction_name(d: Direction) -> &'static str {
    match d {
        Direction::AToB => "a_to_b",
        Direction::BToA => "b_to_a",
    }
}

fn shape(p: Profile) -> ProfileShape {
    match p {
        Profile::Linear => ProfileShape::Linear,
        Profile::Sine2 => ProfileShape::SineSquared,
    }
}

fn profile_name(p: Profile) -> &'static str {
    match p {
        Profile::Linear => "linear",
        Profile::Sine2 => "sine2",
    }
}

fn manifold(m: ManifoldName) -> Manifold {
    match m {
        ManifoldName::A => Manifold::A,
        ManifoldName::B => Manifold::B,
        ManifoldName::E => Manifold::E,
    }
}

struct Context {
    system: LevelSystem,
    decomposition: Decomposition,
    basis: LambdaBasis,
    opts: OdeOptions,
}

impl Context {
    fn new(config: &JobConfig) -> Result<Self, CliError> {
        let system = config.build_system()?;
        let decomposition = decompose(&system, config.rank_tol)?;
        let basis = match &config.a_basis {
            Some(rows) => {
                let dim = system.dim_a();
                let mut vectors = Vec::with_capacity(rows.len());
                for (i, r) in rows.iter().enumerate() {
                    if r.len() != dim {
                        return Err(CliError::validation(
                            &format!("a_basis[{i}]"),
                            format!("vector has {} entries, expected {dim}", r.len()),
                        ));
                    }
                    vectors.push(ComplexVector::from_iterator(dim, r.iter().map(|z| z.get())));
                }
                lambda_pairs(&decomposition, &system, Some(&vectors))
                    .map_err(|e| CliError::validation("a_basis", e.to_string()))?
            }
            None if config.is_preset() => {
                lambda_pairs(&decomposition, &system, Some(&adapted_a_basis(&decomposition)))?
            }
            None => lambda_pairs(&decomposition, &system, None)?,
        };
        Ok(Self { system, decomposition, basis, opts: OdeOptions::with_tolerances(config.rtol, config.atol) })
    }

    fn labels(&self) -> Value {
        json!({
            "a": self.system.labels(Manifold::A),
            "b": self.system.labels(Manifold::B),
            "e": self.system.labels(Manifold::E),
        })
    }

    fn lambda_pairs(&self) -> Value {
        report::lambda_pairs(&self.basis, self.basis.pair_residual(&self.system))
    }

    fn initial(&self, config: &JobConfig, dir: Direction) -> Result<ComplexVector, CliError> {
        match &config.initial {
            Some(init) => {
                if let Some(label) = &init.label {
                    let m = manifold(init.manifold.unwrap_or(ManifoldName::A));
                    return self.system.state(m, label).ok_or_else(|| {
                        CliError::validation("initial.label", format!("no state '{label}' in manifold {m:?}"))
                    });
                }
                let v = init.vector.as_ref().expect("validated");
                let n = self.system.joint_dim();
                if v.len() != n {
                    return Err(CliError::validation(
                        "initial.vector",
                        format!("has {} entries, expected {n} (a, b, e concatenated)", v.len()),
                    ));
                }
                let psi = ComplexVector::from_iterator(n, v.iter().map(|z| z.get()));
                if (psi.norm() - 1.0).abs() > 1e-10 {
                    return Err(CliError::validation("initial.vector", "must have unit norm"));
                }
                Ok(psi)
            }
            None if self.basis.is_empty() => {
                Err(CliError::validation("initial", "system has no lambda pairs; give an initial state"))
            }
            None => Ok(match dir {
                Direction::AToB => self.system.embed(Manifold::A, &self.basis.a_state(0)),
                Direction::BToA => self.system.embed(Manifold::B, &self.basis.b_state(0)),
            }),
        }
    }

    fn predictor(&self) -> Result<Predictor, CliError> {
        Ok(Predictor::from_parts(self.decomposition.clone(), self.basis.clone(), &self.opts)?)
    }
}

fn stats(s: &OdeStats) -> Value {
    json!({ "accepted": s.accepted, "rejected": s.rejected, "evaluations": s.evaluations })
}

fn transfer_json(map: &TransferMap, basis: &LambdaBasis) -> Value {
    json!({
        "direction": direction_name(map.direction),
        "c_final": cmat(&map.c_final),
        "u_ortho": cmat(&map.u_ortho),
        "ortho_b_basis": cmat(&map.ortho_b_basis),
        "unitarity_error": num(map.unitarity_error),
        "output_norm_error": num(map.output_norm_error(basis)),
    })
}

/// Execute `config` (which must carry a command) and build the report.
pub fn run(config: &JobConfig) -> Result<Value, CliError> {
    config.validate()?;
    let command = config.command.ok_or_else(|| CliError::validation("command", "no command given"))?;
    let ctx = Context::new(config)?;
    let (info, results) = match command {
        Command::Decompose => decompose_cmd(&ctx)?,
        Command::Transfer => transfer_cmd(&ctx, config)?,
        Command::Verify => verify_cmd(&ctx, config)?,
        Command::Trajectory => trajectory_cmd(&ctx, config)?,
        Command::Convergence => convergence_cmd(&ctx, config)?,
    };
    Ok(json!({ "header": report::header(config), "run": info, "results": results }))
}

fn decompose_cmd(ctx: &Context) -> Result<(Value, Value), CliError> {
    let bright = verify_bright(&ctx.decomposition, &ctx.system)?;
    Ok((
        json!({}),
        json!({
            "labels": ctx.labels(),
            "dimensions": report::dimensions(&ctx.decomposition),
            "subspaces": report::subspaces(&ctx.decomposition),
            "lambda_pairs": ctx.lambda_pairs(),
            "bright": report::bright(&bright),
        }),
    ))
}

fn transfer_cmd(ctx: &Context, config: &JobConfig) -> Result<(Value, Value), CliError> {
    let dir = direction(config.direction);
    let map = match config.transfer_method {
        TransferMethod::Ode => integrate_transfer(&ctx.basis, dir, &ctx.opts)?,
        TransferMethod::Analytic => analytic_transfer(&ctx.basis, dir)?.ok_or_else(|| {
            CliError::validation("transfer_method", "no closed form applies to this system; use 'ode'")
        })?,
    };
    let method = match config.transfer_method {
        TransferMethod::Ode => "ode",
        TransferMethod::Analytic => "analytic",
    };
    Ok((
        json!({ "method": method, "ode": stats(&map.stats) }),
        json!({
            "labels": ctx.labels(),
            "dimensions": report::dimensions(&ctx.decomposition),
            "lambda_pairs": ctx.lambda_pairs(),
            "transfer": transfer_json(&map, &ctx.basis),
        }),
    ))
}

fn theta_grid(n: usize) -> Vec<f64> {
    (0..n).map(|k| FRAC_PI_2 * k as f64 / (n - 1) as f64).collect()
}

fn verify_cmd(ctx: &Context, config: &JobConfig) -> Result<(Value, Value), CliError> {
    let grid = theta_grid(config.theta_points);
    let d = &ctx.decomposition;
    let sys = &ctx.system;
    let mut per_pair = vec![0.0_f64; ctx.basis.len()];
    let (mut a_dark, mut b_dark) = (0.0_f64, 0.0_f64);
    for &theta in &grid {
        let frame = DarkFrame::new(&ctx.basis, theta)?;
        for (j, worst) in per_pair.iter_mut().enumerate() {
            let v = dark_state(&frame, j);
            let v = &v / Complex64::from(v.norm());
            *worst = worst.max(darkness_residual(sys, &frame, &v, 1.0));
        }
        for v in d.a_dark.vectors() {
            a_dark = a_dark.max(darkness_residual(sys, &frame, &sys.embed(Manifold::A, &v), 1.0));
        }
        for v in d.b_dark.vectors() {
            b_dark = b_dark.max(darkness_residual(sys, &frame, &sys.embed(Manifold::B, &v), 1.0));
        }
    }
    let bright = verify_bright(d, sys)?;

    let dir = direction(config.direction);
    let mut cases: Vec<(String, ComplexVector, Direction)> = Vec::new();
    if config.initial.is_some() {
        cases.push(("initial".into(), ctx.initial(config, dir)?, dir));
    } else {
        for j in 0..ctx.basis.len() {
            cases.push((format!("a_lambda[{j}]"), sys.embed(Manifold::A, &ctx.basis.a_state(j)), Direction::AToB));
        }
        for (name, sub, m, dir) in [
            ("a_dark", &d.a_dark, Manifold::A, Direction::AToB),
            ("a_prime", &d.a_prime, Manifold::A, Direction::AToB),
            ("b_dark", &d.b_dark, Manifold::B, Direction::BToA),
            ("b_prime", &d.b_prime, Manifold::B, Direction::BToA),
        ] {
            for (i, v) in sub.vectors().enumerate() {
                cases.push((format!("{name}[{i}]"), sys.embed(m, &v), dir));
            }
        }
    }
    let predictor = ctx.predictor()?;
    let control = StepControl::default();
    let runs = cases
        .par_iter()
        .map(|(name, psi, dir)| {
            let profile = SweepProfile::new(shape(config.profile), config.omega_t, *dir)?;
            let predicted = predictor.predict(sys, psi, *dir);
            let r = evolve_against(sys, &profile, 1.0, psi, &control, predicted.as_ref())?;
            Ok(json!({
                "state": name,
                "direction": direction_name(*dir),
                "fidelity": r.fidelity_vs_u.map(num),
                "max_excited_population": num(r.max_excited_population),
                "max_leakage": num(r.max_leakage),
                "norm_drift": num(r.norm_drift),
                "steps": r.steps,
            }))
        })
        .collect::<Result<Vec<Value>, stirap_core::Error>>()?;

    Ok((
        json!({ "omega_t": config.omega_t, "profile": profile_name(config.profile) }),
        json!({
            "dimensions": report::dimensions(d),
            "pair_residual": num(ctx.basis.pair_residual(sys)),
            "darkness": {
                "theta_points": grid.len(),
                "lambda_pairs": reals(&per_pair),
                "a_dark": num(a_dark),
                "b_dark": num(b_dark),
            },
            "bright": report::bright(&bright),
            "oracle": runs,
        }),
    ))
}

fn trajectory_cmd(ctx: &Context, config: &JobConfig) -> Result<(Value, Value), CliError> {
    if config.direction != SweepDirection::AToB {
        return Err(CliError::validation("direction", "trajectories are computed for a_to_b sweeps"));
    }
    let psi = ctx.initial(config, Direction::AToB)?;
    let sys = &ctx.system;
    let psi_a = sys.block(Manifold::A, &psi);
    let coords = ctx.basis.a_states().adjoint() * &psi_a;
    let residual = (&psi - sys.embed(Manifold::A, &(ctx.basis.a_states() * &coords))).norm();
    if residual > 1e-8 {
        return Err(CliError::validation("initial", "trajectory start must lie in the a-side lambda space"));
    }
    let grid = theta_grid(config.theta_points);
    let points = trajectory(&ctx.basis, &coords, &grid, &ctx.opts)?;
    let points: Vec<Value> = points
        .iter()
        .map(|p| {
            json!({
                "theta": num(p.theta),
                "coefficients": cvec(&p.coefficients),
                "populations_a": reals(&p.populations_a),
                "populations_b": reals(&p.populations_b),
                "norm": num(p.norm),
            })
        })
        .collect();
    Ok((
        json!({}),
        json!({
            "labels": ctx.labels(),
            "lambdas": reals(ctx.basis.lambdas()),
            "b_gram": cmat(ctx.basis.b_gram()),
            "initial_coefficients": cvec(&coords),
            "points": points,
        }),
    ))
}

fn convergence_cmd(ctx: &Context, config: &JobConfig) -> Result<(Value, Value), CliError> {
    let dir = direction(config.direction);
    let psi = ctx.initial(config, dir)?;
    let predictor = ctx.predictor()?;
    if predictor.predict(&ctx.system, &psi, dir).is_none() {
        return Err(CliError::validation("initial", "state has bright components; no adiabatic prediction"));
    }
    let study = convergence_study(
        &ctx.system,
        &predictor,
        &psi,
        dir,
        shape(config.profile),
        &config.omega_t_list,
        &StepControl::default(),
    )?;
    let points: Vec<Value> = study
        .points
        .iter()
        .map(|p| {
            json!({
                "omega_t": num(p.omega_t),
                "infidelity": num(p.infidelity),
                "max_excited_population": num(p.max_excited_population),
            })
        })
        .collect();
    Ok((
        json!({ "profile": profile_name(config.profile), "direction": direction_name(dir) }),
        json!({
            "initial": cvec(&psi),
            "points": points,
            "decay_exponent": study.decay_exponent.map(num),
            "monotone": study.is_monotone(0.0),
        }),
    ))
}
