//! JSON rendering of numerical results.
//!
//! Every float goes through [`num`], which rounds to 12 significant digits and
//! folds `-0` into `0`, so that identical runs serialize to identical bytes.

use num_complex::Complex64;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};
use stirap_core::decomp::{BrightReport, Decomposition, LambdaBasis};
use stirap_core::linalg::{ComplexMatrix, ComplexVector, SubspaceBasis};

use crate::config::JobConfig;

pub const SIGNIFICANT_DIGITS: usize = 12;

pub fn round(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return if x == 0.0 { 0.0 } else { x };
    }
    let r: f64 = format!("{:.*e}", SIGNIFICANT_DIGITS - 1, x).parse().expect("formatted float parses");
    if r == 0.0 {
        0.0
    } else {
        r
    }
}

pub fn num(x: f64) -> Value {
    if x.is_finite() {
        json!(round(x))
    } else {
        Value::Null
    }
}

pub fn reals(xs: &[f64]) -> Value {
    Value::Array(xs.iter().map(|&x| num(x)).collect())
}

pub fn cplx(z: Complex64) -> Value {
    json!([num(z.re), num(z.im)])
}

pub fn cvec(v: &ComplexVector) -> Value {
    Value::Array(v.iter().map(|&z| cplx(z)).collect())
}

/// Row-major matrix with explicit shape.
pub fn cmat(m: &ComplexMatrix) -> Value {
    let data: Vec<Value> =
        (0..m.nrows()).flat_map(|i| (0..m.ncols()).map(move |j| (i, j))).map(|(i, j)| cplx(m[(i, j)])).collect();
    json!({ "rows": m.nrows(), "cols": m.ncols(), "data": data })
}

pub fn subspace(s: &SubspaceBasis) -> Value {
    json!({
        "dim": s.dim(),
        "vectors": s.vectors().map(|v| cvec(&v)).collect::<Vec<_>>(),
    })
}

pub fn dimensions(d: &Decomposition) -> Value {
    let (a, b) = (d.dims_a(), d.dims_b());
    json!({
        "a": { "lambda": a.lambda, "dark": a.dark, "prime": a.prime },
        "b": { "lambda": b.lambda, "dark": b.dark, "prime": b.prime },
        "e": { "dark": d.e_dark.dim(), "perp": d.e_perp.dim() },
    })
}

pub fn subspaces(d: &Decomposition) -> Value {
    json!({
        "a_dark": subspace(&d.a_dark),
        "a_lambda": subspace(&d.a_lambda),
        "a_prime": subspace(&d.a_prime),
        "b_dark": subspace(&d.b_dark),
        "b_lambda": subspace(&d.b_lambda),
        "b_prime": subspace(&d.b_prime),
        "e_dark": subspace(&d.e_dark),
        "e_perp": subspace(&d.e_perp),
    })
}

pub fn lambda_pairs(basis: &LambdaBasis, pair_residual: f64) -> Value {
    json!({
        "lambdas": reals(basis.lambdas()),
        "a_states": (0..basis.len()).map(|j| cvec(&basis.a_state(j))).collect::<Vec<_>>(),
        "b_states": (0..basis.len()).map(|j| cvec(&basis.b_state(j))).collect::<Vec<_>>(),
        "b_gram": cmat(basis.b_gram()),
        "pair_residual": num(pair_residual),
    })
}

pub fn bright(r: &BrightReport) -> Value {
    json!({
        "a_witnesses": r.a_witnesses.iter().map(|w| json!({
            "state": cvec(&w.state),
            "excited": cvec(&w.excited),
            "overlap": num(w.overlap),
        })).collect::<Vec<_>>(),
        "b_certificates": r.b_certificates.iter().map(|c| json!({
            "state": cvec(&c.state),
            "residual": num(c.residual),
        })).collect::<Vec<_>>(),
        "combined_rank": r.combined_rank,
        "expected_rank": r.expected_rank,
    })
}

pub fn config_hash(config: &JobConfig) -> String {
    hex::encode(Sha256::digest(config.canonical_json().as_bytes()))
}

/// Seconds since the epoch, honouring `SOURCE_DATE_EPOCH` for reproducible output.
pub fn timestamp() -> u64 {
    std::env::var("SOURCE_DATE_EPOCH").ok().and_then(|s| s.trim().parse().ok()).unwrap_or_else(|| {
        std::time::SystemTime::now().duration_since(std::time::UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
    })
}

pub fn header(config: &JobConfig) -> Value {
    json!({
        "tool": "stirap",
        "version": env!("CARGO_PKG_VERSION"),
        "command": config.command.map(|c| c.name()),
        "config": serde_json::to_value(config).expect("config serializes"),
        "config_hash": config_hash(config),
        "timestamp": timestamp(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rounding_keeps_twelve_digits() {
        assert_eq!(round(1.234_567_890_123_456), 1.234_567_890_12);
        assert_eq!(round(-0.0).to_bits(), 0.0f64.to_bits());
        assert_eq!(round(-1e-300 * 1e-300), 0.0);
        assert_eq!(round(1.0 / 3.0), 0.333_333_333_333);
        assert_eq!(num(f64::NAN), Value::Null);
    }

    #[test]
    fn matrix_layout_is_row_major() {
        let m = ComplexMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0].map(|x| Complex64::new(x, 0.0)));
        let v = cmat(&m);
        assert_eq!(v["rows"], 2);
        assert_eq!(v["data"][1], json!([2.0, 0.0]));
    }
}
