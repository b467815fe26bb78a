//! Level systems and their lowering operators.
//!
//! A [`LevelSystem`] holds two ground manifolds `a`, `b` and an excited
//! manifold `e` together with the lowering operators `A_a: e → a` and
//! `A_b: e → b`, stored as `dim_a × dim_e` and `dim_b × dim_e` matrices.
//! Systems are either written down explicitly ([`toy_model`]) or built from
//! angular momentum via Clebsch–Gordan coefficients ([`cesium_system`]).
//!
//! Zeeman states are always ordered `m = −F … +F`.

use std::collections::HashSet;
use std::fmt;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{self, ComplexMatrix, ComplexVector, ONE, ZERO};

/// An integer or half-integer, stored as twice its value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct HalfInt(i32);

impl HalfInt {
    pub const fn from_twice(twice: i32) -> Self {
        Self(twice)
    }

    pub const fn int(value: i32) -> Self {
        Self(2 * value)
    }

    pub const fn twice(self) -> i32 {
        self.0
    }

    pub fn value(self) -> f64 {
        f64::from(self.0) / 2.0
    }

    /// Number of projections `2j + 1`.
    pub fn multiplicity(self) -> usize {
        (self.0 + 1).max(0) as usize
    }

    /// Projections `−j, −j+1, …, j`.
    pub fn projections(self) -> impl Iterator<Item = HalfInt> {
        let j = self.0;
        (0..self.multiplicity() as i32).map(move |k| HalfInt(2 * k - j))
    }
}

impl From<i32> for HalfInt {
    fn from(v: i32) -> Self {
        Self::int(v)
    }
}

impl std::ops::Add for HalfInt {
    type Output = HalfInt;
    fn add(self, rhs: HalfInt) -> HalfInt {
        HalfInt(self.0 + rhs.0)
    }
}

impl fmt::Display for HalfInt {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0 % 2 == 0 {
            write!(f, "{}", self.0 / 2)
        } else {
            write!(f, "{}/2", self.0)
        }
    }
}

fn factorial(n: i32) -> f64 {
    (1..=n).fold(1.0, |acc, k| acc * f64::from(k))
}

/// Clebsch–Gordan coefficient `⟨j1 m1; j2 m2 | j m⟩` (Condon–Shortley phase),
/// from the Racah closed form. Returns 0 whenever a selection rule fails.
pub fn clebsch_gordan(j1: HalfInt, m1: HalfInt, j2: HalfInt, m2: HalfInt, j: HalfInt, m: HalfInt) -> f64 {
    let (j1, m1, j2, m2, j, m) = (j1.0, m1.0, j2.0, m2.0, j.0, m.0);
    if m1 + m2 != m || m1.abs() > j1 || m2.abs() > j2 || m.abs() > j {
        return 0.0;
    }
    if j < (j1 - j2).abs() || j > j1 + j2 || (j1 + j2 + j) % 2 != 0 {
        return 0.0;
    }
    if (j1 + m1) % 2 != 0 || (j2 + m2) % 2 != 0 || (j + m) % 2 != 0 {
        return 0.0;
    }
    // Work in integer units: every combination below is even.
    let h = |x: i32| x / 2;
    let prefactor =
        (f64::from(j + 1) * factorial(h(j + j1 - j2)) * factorial(h(j - j1 + j2)) * factorial(h(j1 + j2 - j))
            / factorial(h(j1 + j2 + j) + 1))
        .sqrt();
    let norm = (factorial(h(j + m))
        * factorial(h(j - m))
        * factorial(h(j1 - m1))
        * factorial(h(j1 + m1))
        * factorial(h(j2 - m2))
        * factorial(h(j2 + m2)))
    .sqrt();
    let mut sum = 0.0;
    for k in 0..=h(j1 + j2 - j) {
        let terms = [h(j1 + j2 - j) - k, h(j1 - m1) - k, h(j2 + m2) - k, h(j - j2 + m1) + k, h(j - j1 - m2) + k];
        if terms.iter().any(|&t| t < 0) {
            continue;
        }
        let denom = factorial(k) * terms.iter().map(|&t| factorial(t)).product::<f64>();
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        sum += sign / denom;
    }
    prefactor * norm * sum
}

/// Dipole coupling coefficient `⟨F′,m′|1,q;F,m⟩` connecting `|F,m⟩` to
/// `|F′,m′⟩` through a photon of helicity `q`.
///
/// The coupling order is ground ⊗ photon, which reproduces the sign pattern
/// `⟨F,m|1,+1;F,m−1⟩ < 0` and `⟨F−1,m|1,±1;F,m∓1⟩ > 0` used for the closed-form
/// dark states.
pub fn cg_coefficient(f_prime: HalfInt, m_prime: HalfInt, q: i32, f: HalfInt, m: HalfInt) -> Result<f64> {
    if f.0 < 0 || f_prime.0 < 0 {
        return Err(Error::InvalidInput("negative angular momentum".into()));
    }
    if m.0.abs() > f.0 || (f.0 - m.0) % 2 != 0 {
        return Err(Error::InvalidInput(format!("projection m={m} invalid for F={f}")));
    }
    if !(-1..=1).contains(&q) {
        return Err(Error::InvalidInput(format!("photon projection q={q} not in {{-1,0,1}}")));
    }
    if m_prime.0.abs() > f_prime.0 {
        return Ok(0.0);
    }
    Ok(clebsch_gordan(f, m, HalfInt::int(1), HalfInt::int(q), f_prime, m_prime))
}

/// Field polarization in the spherical basis `ê_{+1}, ê_0, ê_{−1}`, with
/// `ê_{±1} = ∓(x̂ ± iŷ)/√2`, `ê_0 = ẑ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Polarization {
    plus: Complex64,
    zero: Complex64,
    minus: Complex64,
}

impl Polarization {
    pub fn spherical(plus: Complex64, zero: Complex64, minus: Complex64) -> Result<Self> {
        let norm2 = plus.norm_sqr() + zero.norm_sqr() + minus.norm_sqr();
        if !norm2.is_finite() || (norm2 - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidInput(format!("polarization must have unit norm (|ε|² = {norm2})")));
        }
        Ok(Self { plus, zero, minus })
    }

    /// Converts Cartesian components `(x, y, z)` to spherical amplitudes
    /// `α_q = ê_q*·ε`.
    pub fn cartesian(x: Complex64, y: Complex64, z: Complex64) -> Result<Self> {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let i = Complex64::i();
        let plus = -(x - i * y) * s;
        let minus = (x + i * y) * s;
        Self::spherical(plus, z, minus)
    }

    /// Normalizes real Cartesian components.
    pub fn cartesian_real(x: f64, y: f64, z: f64) -> Result<Self> {
        let n = (x * x + y * y + z * z).sqrt();
        if n == 0.0 || !n.is_finite() {
            return Err(Error::InvalidInput("zero polarization vector".into()));
        }
        Self::cartesian((x / n).into(), (y / n).into(), (z / n).into())
    }

    pub fn x() -> Self {
        Self::cartesian_real(1.0, 0.0, 0.0).unwrap()
    }

    pub fn y() -> Self {
        Self::cartesian_real(0.0, 1.0, 0.0).unwrap()
    }

    pub fn z() -> Self {
        Self::cartesian_real(0.0, 0.0, 1.0).unwrap()
    }

    /// `ê_{+1}`.
    pub fn sigma_plus() -> Self {
        Self { plus: ONE, zero: ZERO, minus: ZERO }
    }

    /// `ê_{−1}`.
    pub fn sigma_minus() -> Self {
        Self { plus: ZERO, zero: ZERO, minus: ONE }
    }

    /// Amplitude on `ê_q`.
    pub fn component(&self, q: i32) -> Complex64 {
        match q {
            1 => self.plus,
            0 => self.zero,
            -1 => self.minus,
            _ => ZERO,
        }
    }

    /// Cartesian components `(x, y, z)`.
    pub fn to_cartesian(&self) -> [Complex64; 3] {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let i = Complex64::i();
        // ε = α₊ê₊ + α₀ê₀ + α₋ê₋
        let x = (-self.plus + self.minus) * s;
        let y = (-self.plus - self.minus) * i * s;
        [x, y, self.zero]
    }
}

/// Reduced dipole strength for the cesium D2 hyperfine pairs.
pub fn cesium_beta(f_prime: i32, f: i32) -> Option<f64> {
    match (f_prime, f) {
        (3, 3) => Some((3.0_f64 / 4.0).sqrt()),
        (3, 4) => Some((1.0_f64 / 4.0).sqrt()),
        (4, 3) => Some((5.0_f64 / 12.0).sqrt()),
        (4, 4) => Some((7.0_f64 / 12.0).sqrt()),
        _ => None,
    }
}

/// A ground `F` → excited `F′` dipole transition with reduced strength `beta`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransitionSpec {
    f: HalfInt,
    f_prime: HalfInt,
    beta: f64,
}

impl TransitionSpec {
    pub fn new(f: HalfInt, f_prime: HalfInt, beta: f64) -> Result<Self> {
        if f.twice() < 0 || f_prime.twice() < 0 || (f.twice() - f_prime.twice()) % 2 != 0 {
            return Err(Error::InvalidInput(format!("invalid angular momenta F={f}, F'={f_prime}")));
        }
        if (f.twice() - f_prime.twice()).abs() > 2 || (f.twice() == 0 && f_prime.twice() == 0) {
            return Err(Error::InvalidInput(format!("F={f} -> F'={f_prime} is not dipole allowed")));
        }
        if !(beta.is_finite() && beta > 0.0) {
            return Err(Error::InvalidInput(format!("beta must be positive, got {beta}")));
        }
        if f.twice() % 2 == 0 {
            if let Some(table) = cesium_beta(f_prime.twice() / 2, f.twice() / 2) {
                if (table - beta).abs() > 1e-12 {
                    return Err(Error::InvalidInput(format!(
                        "beta({f_prime},{f}) = {beta} disagrees with tabulated {table}"
                    )));
                }
            }
        }
        Ok(Self { f, f_prime, beta })
    }

    /// Cesium D2 hyperfine transition with the tabulated strength.
    pub fn cesium(f: i32, f_prime: i32) -> Result<Self> {
        let beta = cesium_beta(f_prime, f)
            .ok_or_else(|| Error::InvalidInput(format!("no cesium strength for F={f} -> F'={f_prime}")))?;
        Self::new(HalfInt::int(f), HalfInt::int(f_prime), beta)
    }

    pub fn f(&self) -> HalfInt {
        self.f
    }

    pub fn f_prime(&self) -> HalfInt {
        self.f_prime
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }
}

/// Raising operator `ε·A†` as a `(2F′+1) × (2F+1)` matrix:
/// entry `(m′, m) = β Σ_q ⟨F′,m′|1,q;F,m⟩ α_q`.
pub fn build_raising_operator(spec: &TransitionSpec, pol: &Polarization) -> Result<ComplexMatrix> {
    let ground: Vec<HalfInt> = spec.f.projections().collect();
    let excited: Vec<HalfInt> = spec.f_prime.projections().collect();
    let mut r = ComplexMatrix::zeros(excited.len(), ground.len());
    for (col, &m) in ground.iter().enumerate() {
        for q in -1..=1 {
            let mp = m + HalfInt::int(q);
            if mp.twice().abs() > spec.f_prime.twice() {
                continue;
            }
            let row = ((mp.twice() + spec.f_prime.twice()) / 2) as usize;
            let cg = cg_coefficient(spec.f_prime, mp, q, spec.f, m)?;
            r[(row, col)] += pol.component(q) * (spec.beta * cg);
        }
    }
    Ok(r)
}

/// Lowering operator `A_F = A⃗_F·ε̂` as a `(2F+1) × (2F′+1)` matrix; the
/// adjoint of [`build_raising_operator`].
pub fn build_lowering_operator(spec: &TransitionSpec, pol: &Polarization) -> Result<ComplexMatrix> {
    Ok(build_raising_operator(spec, pol)?.adjoint())
}

/// Closed-form dark states for transverse polarization
/// `ε = α₊ê₊₁ + α₋ê₋₁`, for the 3→3, 4→4 and 4→3 transitions.
///
/// Vectors are normalized and expressed in the `m = −F … F` ordering.
pub fn closed_form_dark_states(spec: &TransitionSpec, pol: &Polarization) -> Result<Vec<ComplexVector>> {
    if pol.zero.norm() > 1e-12 {
        return Err(Error::InvalidInput(
            "closed-form dark states require a transverse polarization (no ê₀ component)".into(),
        ));
    }
    let (ap, am) = (pol.plus, pol.minus);
    let f = spec.f;
    let dim = f.multiplicity();
    let idx = |m: i32| ((2 * m + f.twice()) / 2) as usize;
    let build = |terms: &[(i32, f64, u32, u32)]| -> Result<ComplexVector> {
        // (m, coefficient, power of α₊, power of α₋)
        let mut v = ComplexVector::zeros(dim);
        for &(m, c, pp, pm) in terms {
            v[idx(m)] += ap.powu(pp) * am.powu(pm) * c;
        }
        let n = v.norm();
        if n == 0.0 {
            return Err(Error::InternalConsistency("closed-form dark state vanished".into()));
        }
        Ok(v.unscale(n))
    };
    let s = f64::sqrt;
    match (f.twice(), spec.f_prime.twice()) {
        (6, 6) => Ok(vec![build(&[(3, s(5.0), 3, 0), (1, s(3.0), 2, 1), (-1, s(3.0), 1, 2), (-3, s(5.0), 0, 3)])?]),
        (8, 8) => Ok(vec![build(&[
            (4, s(35.0), 4, 0),
            (2, s(20.0), 3, 1),
            (0, s(18.0), 2, 2),
            (-2, s(20.0), 1, 3),
            (-4, s(35.0), 0, 4),
        ])?]),
        (8, 6) => Ok(vec![
            build(&[(4, 1.0, 4, 0), (2, -s(28.0), 3, 1), (0, s(70.0), 2, 2), (-2, -s(28.0), 1, 3), (-4, 1.0, 0, 4)])?,
            build(&[(3, 1.0, 3, 0), (1, -s(7.0), 2, 1), (-1, s(7.0), 1, 2), (-3, -1.0, 0, 3)])?,
        ]),
        _ => Err(Error::UnsupportedTransition { f: f.to_string(), f_prime: spec.f_prime.to_string() }),
    }
}

/// One of the three manifolds of a [`LevelSystem`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Manifold {
    A,
    B,
    E,
}

/// Two ground manifolds and one excited manifold with the lowering
/// operators between them.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelSystem {
    labels_a: Vec<String>,
    labels_b: Vec<String>,
    labels_e: Vec<String>,
    lower_a: ComplexMatrix,
    lower_b: ComplexMatrix,
}

impl LevelSystem {
    pub fn new(
        labels_a: Vec<String>,
        labels_b: Vec<String>,
        labels_e: Vec<String>,
        lower_a: ComplexMatrix,
        lower_b: ComplexMatrix,
    ) -> Result<Self> {
        let (da, db, de) = (labels_a.len(), labels_b.len(), labels_e.len());
        if lower_a.shape() != (da, de) {
            return Err(Error::InvalidInput(format!("A_a has shape {:?}, expected ({da}, {de})", lower_a.shape())));
        }
        if lower_b.shape() != (db, de) {
            return Err(Error::InvalidInput(format!("A_b has shape {:?}, expected ({db}, {de})", lower_b.shape())));
        }
        if da == 0 || db == 0 || de == 0 {
            return Err(Error::InvalidInput("every manifold needs at least one state".into()));
        }
        for (name, labels) in [("a", &labels_a), ("b", &labels_b), ("e", &labels_e)] {
            let unique: HashSet<&String> = labels.iter().collect();
            if unique.len() != labels.len() {
                return Err(Error::InvalidInput(format!("duplicate labels in manifold {name}")));
            }
        }
        linalg::ensure_finite(&lower_a, "A_a")?;
        linalg::ensure_finite(&lower_b, "A_b")?;
        Ok(Self { labels_a, labels_b, labels_e, lower_a, lower_b })
    }

    pub fn dim_a(&self) -> usize {
        self.labels_a.len()
    }

    pub fn dim_b(&self) -> usize {
        self.labels_b.len()
    }

    pub fn dim_e(&self) -> usize {
        self.labels_e.len()
    }

    /// Dimension of the joint space `a ⊕ b ⊕ e`.
    pub fn joint_dim(&self) -> usize {
        self.dim_a() + self.dim_b() + self.dim_e()
    }

    pub fn labels(&self, manifold: Manifold) -> &[String] {
        match manifold {
            Manifold::A => &self.labels_a,
            Manifold::B => &self.labels_b,
            Manifold::E => &self.labels_e,
        }
    }

    pub fn lower_a(&self) -> &ComplexMatrix {
        &self.lower_a
    }

    pub fn lower_b(&self) -> &ComplexMatrix {
        &self.lower_b
    }

    pub fn raise_a(&self) -> ComplexMatrix {
        self.lower_a.adjoint()
    }

    pub fn raise_b(&self) -> ComplexMatrix {
        self.lower_b.adjoint()
    }

    /// Offset of a manifold's block inside the joint space.
    pub fn offset(&self, manifold: Manifold) -> usize {
        match manifold {
            Manifold::A => 0,
            Manifold::B => self.dim_a(),
            Manifold::E => self.dim_a() + self.dim_b(),
        }
    }

    pub fn dim(&self, manifold: Manifold) -> usize {
        self.labels(manifold).len()
    }

    /// Embeds a manifold vector into the joint space.
    pub fn embed(&self, manifold: Manifold, v: &ComplexVector) -> ComplexVector {
        assert_eq!(v.len(), self.dim(manifold), "vector does not match manifold {manifold:?}");
        let mut out = ComplexVector::zeros(self.joint_dim());
        out.rows_mut(self.offset(manifold), v.len()).copy_from(v);
        out
    }

    /// The block of a joint vector belonging to `manifold`.
    pub fn block(&self, manifold: Manifold, v: &ComplexVector) -> ComplexVector {
        v.rows(self.offset(manifold), self.dim(manifold)).into_owned()
    }

    /// Joint-space basis state for a label.
    pub fn state(&self, manifold: Manifold, label: &str) -> Option<ComplexVector> {
        let i = self.labels(manifold).iter().position(|l| l == label)?;
        Some(self.embed(manifold, &linalg::unit_vector(self.dim(manifold), i)))
    }
}

/// The 3+3+3 example system with `A_b = Σ|b_i⟩⟨e_i|` and
/// `A_a = |a₊⟩(⟨e₊|+⟨e₀|) + |a₋⟩(⟨e₋|+⟨e₀|)`; states ordered `(+, 0, −)`.
pub fn toy_model() -> LevelSystem {
    let labels = || vec!["+".to_string(), "0".to_string(), "-".to_string()];
    let lower_b = ComplexMatrix::identity(3, 3);
    let lower_a = ComplexMatrix::from_row_slice(3, 3, &[ONE, ONE, ZERO, ZERO, ZERO, ZERO, ZERO, ONE, ONE]);
    LevelSystem::new(labels(), labels(), labels(), lower_a, lower_b).expect("toy model is valid")
}

fn zeeman_labels(prefix: &str, f: HalfInt) -> Vec<String> {
    f.projections().map(|m| format!("{prefix}{f},{m}")).collect()
}

/// Cesium D2 system: `a` = F=3, `b` = F=4 ground manifolds, `e` = F′ =
/// `excited_f` ∈ {3, 4}, each transition driven with its own polarization.
pub fn cesium_system(excited_f: i32, pol_3: &Polarization, pol_4: &Polarization) -> Result<LevelSystem> {
    if excited_f != 3 && excited_f != 4 {
        return Err(Error::InvalidInput(format!("excited F' must be 3 or 4, got {excited_f}")));
    }
    let t3 = TransitionSpec::cesium(3, excited_f)?;
    let t4 = TransitionSpec::cesium(4, excited_f)?;
    LevelSystem::new(
        zeeman_labels("", t3.f()),
        zeeman_labels("", t4.f()),
        zeeman_labels("e", t3.f_prime()),
        build_lowering_operator(&t3, pol_3)?,
        build_lowering_operator(&t4, pol_4)?,
    )
}

/// Index of `|F,m⟩` in the `m = −F … F` ordering.
pub fn zeeman_index(f: i32, m: i32) -> usize {
    (m + f) as usize
}

/// `|F,m⟩` as a vector in the `2F+1` dimensional manifold.
pub fn zeeman_ket(f: i32, m: i32) -> ComplexVector {
    linalg::unit_vector((2 * f + 1) as usize, zeeman_index(f, m))
}
