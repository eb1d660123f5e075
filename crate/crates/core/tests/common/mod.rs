#![allow(dead_code)]

use std::path::PathBuf;

use accel_core::problems::{self, make_lasso, make_quadratic, QUAD2D};
use accel_core::{run, Algorithm, CompositeObjective, OptimumInfo, RunParams, Trace, Vector};
use nalgebra::DMatrix;
use rand::Rng;

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/data")
        .join(name)
}

pub fn quad2d() -> (CompositeObjective, OptimumInfo) {
    let (oracle, opt) = make_quadratic(&QUAD2D).unwrap();
    (CompositeObjective::smooth_only(oracle), opt)
}

/// The 5×5 lasso fixture with its reference-run optimum.
pub fn lasso5() -> (CompositeObjective, OptimumInfo) {
    let (a, b, lambda) = problems::load_lasso_file(&fixture("lasso5.json")).unwrap();
    make_lasso(a, b, lambda).unwrap()
}

pub fn params(algo: Algorithm, step: f64, r: Option<f64>, iters: usize) -> RunParams {
    RunParams {
        algo,
        step,
        momentum_r: r,
        iters,
    }
}

pub fn run_on(
    objective: &CompositeObjective,
    algo: Algorithm,
    step: f64,
    r: f64,
    iters: usize,
    x0: &[f64],
) -> Trace {
    run(
        objective,
        &params(algo, step, Some(r), iters),
        &Vector::from_column_slice(x0),
    )
    .unwrap()
}

pub fn random_vector(rng: &mut impl Rng, dim: usize, scale: f64) -> Vector {
    Vector::from_fn(dim, |_, _| rng.random_range(-scale..scale))
}

pub fn random_quadratic(rng: &mut impl Rng) -> (CompositeObjective, OptimumInfo) {
    let dim = rng.random_range(1..=6);
    let coefficients: Vec<f64> = (0..dim).map(|_| rng.random_range(0.01..5.0)).collect();
    let (oracle, opt) = make_quadratic(&coefficients).unwrap();
    (CompositeObjective::smooth_only(oracle), opt)
}

/// Diagonally dominant design, hence full column rank.
pub fn random_design(rng: &mut impl Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |i, j| {
        if i == j {
            rng.random_range(1.5..3.0) * if rng.random_bool(0.5) { 1.0 } else { -1.0 }
        } else {
            rng.random_range(-0.25..0.25)
        }
    })
}

/// `lhs ≤ rhs` up to `1e−9·(1 + |lhs| + |rhs|)`.
pub fn holds_with_slack(lhs: f64, rhs: f64) -> bool {
    lhs <= rhs + 1e-9 * (1.0 + lhs.abs() + rhs.abs())
}

pub fn rel_diff(a: &Vector, b: &Vector) -> f64 {
    (a - b).norm() / (1.0 + a.norm())
}
