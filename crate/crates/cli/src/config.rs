//! Job configuration: JSON schema, parsing with field paths, and validation.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use stirap_core::atom::{cesium_system, toy_model};
use stirap_core::linalg::ComplexMatrix;
use stirap_core::{LevelSystem, Polarization};

use crate::error::CliError;

/// A complex number written either as a bare real or as `[re, im]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ComplexValue {
    Real(f64),
    Pair([f64; 2]),
}

impl ComplexValue {
    pub fn get(self) -> Complex64 {
        match self {
            ComplexValue::Real(r) => Complex64::new(r, 0.0),
            ComplexValue::Pair([re, im]) => Complex64::new(re, im),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PolarizationSpec {
    Named(String),
    Cartesian(CartesianPolarization),
    Spherical(SphericalPolarization),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CartesianPolarization {
    pub x: ComplexValue,
    pub y: ComplexValue,
    pub z: ComplexValue,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SphericalPolarization {
    pub plus: ComplexValue,
    pub zero: ComplexValue,
    pub minus: ComplexValue,
}

impl PolarizationSpec {
    pub fn build(&self, field: &str) -> Result<Polarization, CliError> {
        let bad = |m: String| CliError::validation(field, m);
        match self {
            PolarizationSpec::Named(name) => match name.as_str() {
                "x" => Ok(Polarization::x()),
                "y" => Ok(Polarization::y()),
                "z" => Ok(Polarization::z()),
                "sigma+" => Ok(Polarization::sigma_plus()),
                "sigma-" => Ok(Polarization::sigma_minus()),
                other => Err(bad(format!("unknown polarization '{other}' (expected x, y, z, sigma+, sigma-)"))),
            },
            PolarizationSpec::Cartesian(c) => {
                Polarization::cartesian(c.x.get(), c.y.get(), c.z.get()).map_err(|e| bad(e.to_string()))
            }
            PolarizationSpec::Spherical(s) => {
                Polarization::spherical(s.plus.get(), s.zero.get(), s.minus.get()).map_err(|e| bad(e.to_string()))
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    Toy,
    Cesium,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InlineSystem {
    pub labels_a: Vec<String>,
    pub labels_b: Vec<String>,
    pub labels_e: Vec<String>,
    /// Rows indexed by a states, columns by e states.
    pub lower_a: Vec<Vec<ComplexValue>>,
    pub lower_b: Vec<Vec<ComplexValue>>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<Preset>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub excited_f: Option<i32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pol_3: Option<PolarizationSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pol_4: Option<PolarizationSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inline: Option<InlineSystem>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    Decompose,
    Transfer,
    Verify,
    Trajectory,
    Convergence,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Decompose => "decompose",
            Command::Transfer => "transfer",
            Command::Verify => "verify",
            Command::Trajectory => "trajectory",
            Command::Convergence => "convergence",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Profile {
    Linear,
    Sine2,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepDirection {
    AToB,
    BToA,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TransferMethod {
    Ode,
    Analytic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ManifoldName {
    A,
    B,
    E,
}

/// Initial state: a labelled basis state or an explicit joint-space vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialState {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub manifold: Option<ManifoldName>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vector: Option<Vec<ComplexValue>>,
}

fn default_rank_tol() -> f64 {
    1e-10
}
fn default_ode_tol() -> f64 {
    1e-10
}
fn default_omega_t() -> f64 {
    4000.0
}
fn default_profile() -> Profile {
    Profile::Sine2
}
fn default_direction() -> SweepDirection {
    SweepDirection::AToB
}
fn default_method() -> TransferMethod {
    TransferMethod::Ode
}
fn default_theta_points() -> usize {
    21
}
fn default_omega_t_list() -> Vec<f64> {
    vec![500.0, 1000.0, 2000.0, 4000.0]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JobConfig {
    pub system: SystemConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub command: Option<Command>,
    #[serde(default = "default_rank_tol")]
    pub rank_tol: f64,
    #[serde(default = "default_ode_tol")]
    pub rtol: f64,
    #[serde(default = "default_ode_tol")]
    pub atol: f64,
    #[serde(default = "default_omega_t")]
    pub omega_t: f64,
    #[serde(default = "default_profile")]
    pub profile: Profile,
    #[serde(default = "default_direction")]
    pub direction: SweepDirection,
    #[serde(default = "default_method")]
    pub transfer_method: TransferMethod,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a_basis: Option<Vec<Vec<ComplexValue>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial: Option<InitialState>,
    #[serde(default = "default_theta_points")]
    pub theta_points: usize,
    #[serde(default = "default_omega_t_list")]
    pub omega_t_list: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<String>,
}

impl JobConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de).map_err(|err| {
            let path = err.path().to_string();
            let inner = err.into_inner();
            CliError::Parse {
                message: inner.to_string(),
                field: (path != ".").then_some(path),
                line: inner.line(),
                column: inner.column(),
            }
        })
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let in_range = |field: &str, v: f64, lo: f64, hi: f64| {
            if v > lo && v <= hi && v.is_finite() {
                Ok(())
            } else {
                Err(CliError::validation(field, format!("{v} not in ({lo}, {hi}]")))
            }
        };
        in_range("rank_tol", self.rank_tol, 0.0, 1e-3)?;
        in_range("rtol", self.rtol, 0.0, 1e-2)?;
        in_range("atol", self.atol, 0.0, 1e-2)?;
        in_range("omega_t", self.omega_t, 0.0, 1e7)?;
        if !(2..=100_001).contains(&self.theta_points) {
            return Err(CliError::validation("theta_points", "must lie in [2, 100001]"));
        }
        if self.omega_t_list.is_empty() {
            return Err(CliError::validation("omega_t_list", "must not be empty"));
        }
        for (i, &v) in self.omega_t_list.iter().enumerate() {
            in_range(&format!("omega_t_list[{i}]"), v, 0.0, 1e7)?;
        }
        if self.omega_t_list.windows(2).any(|w| w[1] <= w[0]) {
            return Err(CliError::validation("omega_t_list", "values must be strictly increasing"));
        }
        if let Some(init) = &self.initial {
            match (&init.label, &init.vector) {
                (Some(_), None) => {}
                (None, Some(_)) if init.manifold.is_none() => {}
                (None, Some(_)) => {
                    return Err(CliError::validation("initial.manifold", "not allowed with an explicit vector"))
                }
                _ => return Err(CliError::validation("initial", "give exactly one of 'label' or 'vector'")),
            }
        }
        self.validate_system()
    }

    fn validate_system(&self) -> Result<(), CliError> {
        let s = &self.system;
        match (s.preset, &s.inline) {
            (Some(_), Some(_)) | (None, None) => {
                return Err(CliError::validation("system", "give exactly one of 'preset' or 'inline'"))
            }
            (Some(Preset::Toy), None) => {
                for (name, present) in
                    [("excited_f", s.excited_f.is_some()), ("pol_3", s.pol_3.is_some()), ("pol_4", s.pol_4.is_some())]
                {
                    if present {
                        return Err(CliError::validation(&format!("system.{name}"), "not used by the toy preset"));
                    }
                }
            }
            (Some(Preset::Cesium), None) => {
                match s.excited_f {
                    Some(3 | 4) => {}
                    Some(f) => return Err(CliError::validation("system.excited_f", format!("{f} is not 3 or 4"))),
                    None => return Err(CliError::validation("system.excited_f", "required for the cesium preset")),
                }
                for (name, p) in [("pol_3", &s.pol_3), ("pol_4", &s.pol_4)] {
                    let field = format!("system.{name}");
                    p.as_ref()
                        .ok_or_else(|| CliError::validation(&field, "required for the cesium preset"))?
                        .build(&field)?;
                }
            }
            (None, Some(_)) => {
                for (name, present) in
                    [("excited_f", s.excited_f.is_some()), ("pol_3", s.pol_3.is_some()), ("pol_4", s.pol_4.is_some())]
                {
                    if present {
                        return Err(CliError::validation(&format!("system.{name}"), "only valid with a preset"));
                    }
                }
            }
        }
        Ok(())
    }

    /// The level system described by `system`. Call after [`validate`](Self::validate).
    pub fn build_system(&self) -> Result<LevelSystem, CliError> {
        let s = &self.system;
        if let Some(inline) = &s.inline {
            let a = matrix("system.inline.lower_a", &inline.lower_a, inline.labels_e.len())?;
            let b = matrix("system.inline.lower_b", &inline.lower_b, inline.labels_e.len())?;
            return LevelSystem::new(inline.labels_a.clone(), inline.labels_b.clone(), inline.labels_e.clone(), a, b)
                .map_err(|e| CliError::validation("system.inline", e.to_string()));
        }
        match s.preset {
            Some(Preset::Toy) => Ok(toy_model()),
            Some(Preset::Cesium) => {
                let p3 = s.pol_3.as_ref().expect("validated").build("system.pol_3")?;
                let p4 = s.pol_4.as_ref().expect("validated").build("system.pol_4")?;
                cesium_system(s.excited_f.expect("validated"), &p3, &p4)
                    .map_err(|e| CliError::validation("system", e.to_string()))
            }
            None => Err(CliError::validation("system", "no system source")),
        }
    }

    pub fn is_preset(&self) -> bool {
        self.system.preset.is_some()
    }

    /// Canonical JSON used for hashing: the config without `output`.
    pub fn canonical_json(&self) -> String {
        let mut copy = self.clone();
        copy.output = None;
        serde_json::to_string(&serde_json::to_value(&copy).expect("config serializes")).expect("value serializes")
    }
}

fn matrix(field: &str, rows: &[Vec<ComplexValue>], cols: usize) -> Result<ComplexMatrix, CliError> {
    if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != cols) {
        return Err(CliError::validation(
            &format!("{field}[{i}]"),
            format!("row has {} entries, expected {cols} (one per e label)", r.len()),
        ));
    }
    Ok(ComplexMatrix::from_fn(rows.len(), cols, |i, j| rows[i][j].get()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_preset_parses_with_defaults() {
        let c = JobConfig::parse(r#"{"system": {"preset": "toy"}}"#).unwrap();
        assert_eq!(c.rtol, 1e-10);
        assert_eq!(c.theta_points, 21);
        assert_eq!(c.profile, Profile::Sine2);
        c.validate().unwrap();
        assert_eq!(c.build_system().unwrap().dim_a(), 3);
    }

    #[test]
    fn parse_error_carries_field_path() {
        let err = JobConfig::parse("{\n \"system\": {\"preset\": \"toy\"},\n \"rtol\": \"tight\"\n}").unwrap_err();
        match err {
            CliError::Parse { field, line, .. } => {
                assert_eq!(field.as_deref(), Some("rtol"));
                assert_eq!(line, 3);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn missing_polarization_names_field() {
        let c = JobConfig::parse(r#"{"system": {"preset": "cesium", "excited_f": 3, "pol_3": "z"}}"#).unwrap();
        match c.validate().unwrap_err() {
            CliError::Validation { field, .. } => assert_eq!(field, "system.pol_4"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn polarization_forms() {
        let named = PolarizationSpec::Named("sigma-".into()).build("p").unwrap();
        assert_eq!(named, Polarization::sigma_minus());
        let cart: PolarizationSpec = serde_json::from_str(r#"{"x": 1, "y": 0, "z": 0}"#).unwrap();
        assert_eq!(cart.build("p").unwrap(), Polarization::x());
        let sph: PolarizationSpec = serde_json::from_str(r#"{"plus": [0, 1], "zero": 0, "minus": 0}"#).unwrap();
        assert!((sph.build("p").unwrap().component(1).im - 1.0).abs() < 1e-15);
        assert!(PolarizationSpec::Named("w".into()).build("p").is_err());
    }

    #[test]
    fn knob_ranges_are_enforced() {
        let mut c = JobConfig::parse(r#"{"system": {"preset": "toy"}}"#).unwrap();
        c.rtol = 0.5;
        assert!(matches!(c.validate(), Err(CliError::Validation { ref field, .. }) if field == "rtol"));
        c.rtol = 1e-8;
        c.omega_t_list = vec![10.0, 5.0];
        assert!(c.validate().is_err());
    }

    #[test]
    fn serialization_round_trips() {
        let text = r#"{"system": {"inline": {"labels_a": ["a"], "labels_b": ["b"], "labels_e": ["e"],
            "lower_a": [[1]], "lower_b": [[[0.5, 0.5]]]}}, "a_basis": [[1]]}"#;
        let c = JobConfig::parse(text).unwrap();
        let back = JobConfig::parse(&serde_json::to_string(&c).unwrap()).unwrap();
        assert_eq!(c, back);
    }
}
