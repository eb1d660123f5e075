//! Objective oracles and the test problems used by the experiments.
//!
//! Every objective is a composite `Φ = f + g` where `f` is smooth and
//! strongly convex with known constants `μ` and `L`, and `g` is either zero
//! or a weighted ℓ1 norm.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::Deserialize;

use crate::error::{check_dim, Error, Result};
use crate::proximal;

pub type Vector = DVector<f64>;

/// Iterations of the proximal-gradient reference run used to locate the
/// lasso minimizer.
pub const REFERENCE_ITERATIONS: usize = 1_000_000;

/// Step of the reference run, as a fraction of `1/L`.
pub const REFERENCE_STEP_FRACTION: f64 = 0.9;

/// Concrete smooth part of an objective.
#[derive(Debug, Clone, PartialEq)]
pub enum SmoothFunction {
    /// `f(x) = Σ c_i x_i²`
    Quadratic { coefficients: Vec<f64> },
    /// `f(x) = ½‖Ax − b‖²`
    LeastSquares {
        design: DMatrix<f64>,
        target: Vector,
    },
}

/// A differentiable objective in `S¹_{μ,L}`.
#[derive(Debug, Clone, PartialEq)]
pub struct SmoothOracle {
    function: SmoothFunction,
    mu: f64,
    lipschitz: f64,
}

impl SmoothOracle {
    pub fn function(&self) -> &SmoothFunction {
        &self.function
    }

    pub fn dim(&self) -> usize {
        match &self.function {
            SmoothFunction::Quadratic { coefficients } => coefficients.len(),
            SmoothFunction::LeastSquares { design, .. } => design.ncols(),
        }
    }

    /// Strong-convexity modulus.
    pub fn mu(&self) -> f64 {
        self.mu
    }

    /// Lipschitz constant of the gradient.
    pub fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    /// `f(x)`. Panics if `x` has the wrong length; use [`eval`](Self::eval)
    /// for a checked entry point.
    pub fn value(&self, x: &Vector) -> f64 {
        match &self.function {
            SmoothFunction::Quadratic { coefficients } => coefficients
                .iter()
                .zip(x.iter())
                .map(|(c, xi)| c * xi * xi)
                .sum(),
            SmoothFunction::LeastSquares { design, target } => {
                0.5 * (design * x - target).norm_squared()
            }
        }
    }

    /// `∇f(x)`. Panics on a length mismatch like [`value`](Self::value).
    pub fn gradient(&self, x: &Vector) -> Vector {
        match &self.function {
            SmoothFunction::Quadratic { coefficients } => {
                assert_eq!(x.len(), coefficients.len(), "dimension mismatch");
                Vector::from_iterator(
                    x.len(),
                    coefficients
                        .iter()
                        .zip(x.iter())
                        .map(|(c, xi)| 2.0 * c * xi),
                )
            }
            SmoothFunction::LeastSquares { design, target } => {
                design.tr_mul(&(design * x - target))
            }
        }
    }

    /// Checked evaluation of `(f(x), ∇f(x))`.
    pub fn eval(&self, x: &Vector) -> Result<(f64, Vector)> {
        check_dim(self.dim(), x.len())?;
        Ok((self.value(x), self.gradient(x)))
    }

    /// Central-difference approximation of the gradient with spacing `h`.
    pub fn finite_diff_gradient(&self, x: &Vector, h: f64) -> Result<Vector> {
        check_dim(self.dim(), x.len())?;
        if !(h > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "finite-difference spacing must be positive, got {h}"
            )));
        }
        let mut out = Vector::zeros(x.len());
        let mut probe = x.clone();
        for i in 0..x.len() {
            let xi = x[i];
            probe[i] = xi + h;
            let forward = self.value(&probe);
            probe[i] = xi - h;
            let backward = self.value(&probe);
            probe[i] = xi;
            out[i] = (forward - backward) / (2.0 * h);
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Regularizer {
    Zero,
    /// `g(x) = λ‖x‖₁`
    L1 {
        weight: f64,
    },
}

impl Regularizer {
    pub fn value(&self, x: &Vector) -> f64 {
        match *self {
            Regularizer::Zero => 0.0,
            Regularizer::L1 { weight } => weight * x.iter().map(|v| v.abs()).sum::<f64>(),
        }
    }
}

/// `Φ = f + g`.
#[derive(Debug, Clone, PartialEq)]
pub struct CompositeObjective {
    pub smooth: SmoothOracle,
    pub regularizer: Regularizer,
}

impl CompositeObjective {
    /// Wraps a smooth oracle with `g ≡ 0`.
    pub fn smooth_only(smooth: SmoothOracle) -> Self {
        Self {
            smooth,
            regularizer: Regularizer::Zero,
        }
    }

    pub fn with_l1(smooth: SmoothOracle, weight: f64) -> Result<Self> {
        if !(weight >= 0.0) || !weight.is_finite() {
            return Err(Error::InvalidProblem(format!(
                "l1 weight must be finite and non-negative, got {weight}"
            )));
        }
        Ok(Self {
            smooth,
            regularizer: Regularizer::L1 { weight },
        })
    }

    pub fn dim(&self) -> usize {
        self.smooth.dim()
    }

    pub fn mu(&self) -> f64 {
        self.smooth.mu
    }

    pub fn lipschitz(&self) -> f64 {
        self.smooth.lipschitz
    }

    pub fn is_smooth(&self) -> bool {
        matches!(self.regularizer, Regularizer::Zero)
    }

    /// `Φ(x) = f(x) + g(x)`.
    pub fn phi(&self, x: &Vector) -> f64 {
        match self.regularizer {
            Regularizer::Zero => self.smooth.value(x),
            reg => self.smooth.value(x) + reg.value(x),
        }
    }

    /// `Φ(x) − Φ(x*)`, evaluated in a form that avoids cancellation between
    /// two nearly equal objective values where the structure allows it.
    pub fn gap(&self, x: &Vector, optimum: &OptimumInfo) -> f64 {
        match &self.smooth.function {
            SmoothFunction::LeastSquares { design, target } => {
                let d = x - &optimum.x_star;
                let ad = design * &d;
                let residual = design * &optimum.x_star - target;
                let smooth_gap = 0.5 * ad.norm_squared() + residual.dot(&ad);
                let reg_gap = match self.regularizer {
                    Regularizer::Zero => 0.0,
                    Regularizer::L1 { weight } => {
                        weight
                            * x.iter()
                                .zip(optimum.x_star.iter())
                                .map(|(a, b)| a.abs() - b.abs())
                                .sum::<f64>()
                    }
                };
                smooth_gap + reg_gap
            }
            SmoothFunction::Quadratic { .. } => self.phi(x) - optimum.f_star,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OptimumSource {
    Analytic,
    ReferenceRun { iterations: usize, step: f64 },
}

/// Minimizer and optimal value of an objective.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimumInfo {
    pub x_star: Vector,
    pub f_star: f64,
    pub source: OptimumSource,
}

/// `f(x) = Σ c_i x_i²` with `μ = 2·min c`, `L = 2·max c`, minimizer `0`.
pub fn make_quadratic(coefficients: &[f64]) -> Result<(SmoothOracle, OptimumInfo)> {
    if coefficients.is_empty() {
        return Err(Error::InvalidProblem(
            "quadratic needs at least one coefficient".into(),
        ));
    }
    if let Some(bad) = coefficients.iter().find(|c| !(**c > 0.0) || !c.is_finite()) {
        return Err(Error::InvalidProblem(format!(
            "quadratic coefficients must be positive and finite, got {bad}"
        )));
    }
    let min = coefficients.iter().copied().fold(f64::INFINITY, f64::min);
    let max = coefficients
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);
    let oracle = SmoothOracle {
        function: SmoothFunction::Quadratic {
            coefficients: coefficients.to_vec(),
        },
        mu: 2.0 * min,
        lipschitz: 2.0 * max,
    };
    let x_star = Vector::zeros(coefficients.len());
    let f_star = oracle.value(&x_star);
    Ok((
        oracle,
        OptimumInfo {
            x_star,
            f_star,
            source: OptimumSource::Analytic,
        },
    ))
}

/// Builds the least-squares oracle `½‖Ax − b‖²` with `μ`, `L` the extreme
/// eigenvalues of `AᵀA`.
pub fn make_least_squares(design: DMatrix<f64>, target: Vector) -> Result<SmoothOracle> {
    if design.nrows() == 0 || design.ncols() == 0 {
        return Err(Error::InvalidProblem("design matrix is empty".into()));
    }
    check_dim(design.nrows(), target.len())?;
    if design.iter().chain(target.iter()).any(|v| !v.is_finite()) {
        return Err(Error::InvalidProblem(
            "design or target contains non-finite entries".into(),
        ));
    }
    let gram = design.tr_mul(&design);
    let eigen = gram.symmetric_eigen();
    let lipschitz = eigen.eigenvalues.max();
    let mu = eigen.eigenvalues.min();
    // Relative cut-off for numerical rank deficiency.
    if !(mu > lipschitz * 1e-12) {
        return Err(Error::InvalidProblem(format!(
            "design matrix is rank deficient (smallest eigenvalue of AᵀA is {mu:e})"
        )));
    }
    Ok(SmoothOracle {
        function: SmoothFunction::LeastSquares { design, target },
        mu,
        lipschitz,
    })
}

/// Lasso objective `½‖Ax − b‖² + λ‖x‖₁` with its minimizer located by a
/// [`REFERENCE_ITERATIONS`]-step proximal-gradient run.
pub fn make_lasso(
    design: DMatrix<f64>,
    target: Vector,
    l1_weight: f64,
) -> Result<(CompositeObjective, OptimumInfo)> {
    make_lasso_with_reference(design, target, l1_weight, REFERENCE_ITERATIONS)
}

pub fn make_lasso_with_reference(
    design: DMatrix<f64>,
    target: Vector,
    l1_weight: f64,
    iterations: usize,
) -> Result<(CompositeObjective, OptimumInfo)> {
    let smooth = make_least_squares(design, target)?;
    let objective = CompositeObjective::with_l1(smooth, l1_weight)?;
    let optimum = reference_optimum(&objective, iterations)?;
    Ok((objective, optimum))
}

/// Runs `x ← P_s(x)` from the origin with `s = 0.9/L` for `iterations` steps.
pub fn reference_optimum(objective: &CompositeObjective, iterations: usize) -> Result<OptimumInfo> {
    let step = REFERENCE_STEP_FRACTION / objective.lipschitz();
    let mut x = Vector::zeros(objective.dim());
    for _ in 0..iterations {
        let next = proximal::prox_value(objective, &x, step)?;
        // The map is deterministic, so an exact fixed point stays fixed.
        if next == x {
            break;
        }
        x = next;
    }
    let f_star = objective.phi(&x);
    Ok(OptimumInfo {
        x_star: x,
        f_star,
        source: OptimumSource::ReferenceRun { iterations, step },
    })
}

#[derive(Debug, Deserialize)]
struct LassoFile {
    #[serde(rename = "A")]
    design: Vec<Vec<f64>>,
    b: Vec<f64>,
    lambda: f64,
}

/// Reads `{"A": [[...]], "b": [...], "lambda": x}`.
pub fn load_lasso_file(path: &Path) -> Result<(DMatrix<f64>, Vector, f64)> {
    let text =
        std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    parse_lasso_json(&text)
}

pub fn parse_lasso_json(text: &str) -> Result<(DMatrix<f64>, Vector, f64)> {
    let file: LassoFile = serde_json::from_str(text)
        .map_err(|e| Error::InvalidProblem(format!("malformed lasso file: {e}")))?;
    let rows = file.design.len();
    let cols = file.design.first().map_or(0, Vec::len);
    if rows == 0 || cols == 0 {
        return Err(Error::InvalidProblem("lasso design matrix is empty".into()));
    }
    if file.design.iter().any(|row| row.len() != cols) {
        return Err(Error::InvalidProblem(
            "lasso design matrix rows differ in length".into(),
        ));
    }
    let design = DMatrix::from_fn(rows, cols, |i, j| file.design[i][j]);
    Ok((design, Vector::from_vec(file.b), file.lambda))
}

/// A problem resolved from a preset name.
#[derive(Debug, Clone)]
pub struct ResolvedProblem {
    pub id: String,
    pub objective: CompositeObjective,
    pub optimum: OptimumInfo,
}

/// Coefficients of `f(x1, x2) = 5e-3·x1² + x2²`.
pub const QUAD2D: [f64; 2] = [5e-3, 1.0];

/// Resolves `quad2d`, `quad-diag:<c1,c2,...>`, `lasso:<path>`, or a bare
/// path to a `.json` lasso file.
pub fn resolve_problem(name: &str) -> Result<ResolvedProblem> {
    if name == "quad2d" {
        let (oracle, optimum) = make_quadratic(&QUAD2D)?;
        return Ok(ResolvedProblem {
            id: name.to_string(),
            objective: CompositeObjective::smooth_only(oracle),
            optimum,
        });
    }
    if let Some(list) = name.strip_prefix("quad-diag:") {
        let coefficients = list
            .split(',')
            .map(|c| {
                c.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::InvalidProblem(format!("bad quadratic coefficient {c:?}")))
            })
            .collect::<Result<Vec<_>>>()?;
        let (oracle, optimum) = make_quadratic(&coefficients)?;
        return Ok(ResolvedProblem {
            id: name.to_string(),
            objective: CompositeObjective::smooth_only(oracle),
            optimum,
        });
    }
    let lasso_path = name
        .strip_prefix("lasso:")
        .or_else(|| name.ends_with(".json").then_some(name));
    if let Some(path) = lasso_path {
        let (design, target, lambda) = load_lasso_file(Path::new(path))?;
        let (objective, optimum) = make_lasso(design, target, lambda)?;
        return Ok(ResolvedProblem {
            id: name.to_string(),
            objective,
            optimum,
        });
    }
    Err(Error::InvalidProblem(format!(
        "unknown problem {name:?} (expected quad2d, quad-diag:<c,...>, lasso:<path> or a .json file)"
    )))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(xs: &[f64]) -> Vector {
        Vector::from_column_slice(xs)
    }

    #[test]
    fn quadratic_constants_and_values() {
        let (oracle, opt) = make_quadratic(&[5e-3, 1.0]).unwrap();
        assert_eq!(oracle.mu(), 0.01);
        assert_eq!(oracle.lipschitz(), 2.0);
        let (f, g) = oracle.eval(&v(&[1.0, 1.0])).unwrap();
        assert!((f - 1.005).abs() < 1e-15);
        assert!((g[0] - 0.01).abs() < 1e-15);
        assert_eq!(g[1], 2.0);
        assert_eq!(opt.x_star, v(&[0.0, 0.0]));
        assert_eq!(opt.f_star, 0.0);
        assert_eq!(opt.source, OptimumSource::Analytic);
    }

    #[test]
    fn quadratic_small_cases() {
        let (oracle, _) = make_quadratic(&[1.0]).unwrap();
        assert_eq!(oracle.eval(&v(&[0.0])).unwrap(), (0.0, v(&[0.0])));
        assert_eq!(oracle.eval(&v(&[-2.0])).unwrap(), (4.0, v(&[-4.0])));

        let (oracle, _) = make_quadratic(&[2.0, 3.0]).unwrap();
        assert_eq!(
            oracle.eval(&v(&[1.0, -1.0])).unwrap(),
            (5.0, v(&[4.0, -6.0]))
        );
    }

    #[test]
    fn rejects_non_positive_coefficients() {
        assert!(matches!(
            make_quadratic(&[1.0, 0.0]),
            Err(Error::InvalidProblem(_))
        ));
        assert!(matches!(
            make_quadratic(&[-1.0]),
            Err(Error::InvalidProblem(_))
        ));
        assert!(matches!(make_quadratic(&[]), Err(Error::InvalidProblem(_))));
    }

    #[test]
    fn eval_dimension_mismatch() {
        let (oracle, _) = make_quadratic(&[1.0, 2.0]).unwrap();
        assert_eq!(
            oracle.eval(&v(&[1.0])),
            Err(Error::DimensionMismatch {
                expected: 2,
                got: 1
            })
        );
        assert!(oracle.finite_diff_gradient(&v(&[1.0]), 1e-5).is_err());
    }

    #[test]
    fn finite_differences() {
        let (oracle, _) = make_quadratic(&[1.0]).unwrap();
        let g = oracle.finite_diff_gradient(&v(&[1.0]), 1e-5).unwrap();
        assert!((g[0] - 2.0).abs() < 1e-8);
        let g = oracle.finite_diff_gradient(&v(&[0.0]), 1e-5).unwrap();
        assert!(g[0].abs() < 1e-8);

        let (oracle, _) = make_quadratic(&[2.0, 3.0]).unwrap();
        let g = oracle.finite_diff_gradient(&v(&[1.0, -1.0]), 1e-5).unwrap();
        assert!((g[0] - 4.0).abs() < 1e-7 && (g[1] + 6.0).abs() < 1e-7);

        assert!(oracle.finite_diff_gradient(&v(&[1.0, -1.0]), 0.0).is_err());
    }

    #[test]
    fn lasso_identity_design() {
        let (obj, opt) =
            make_lasso_with_reference(DMatrix::identity(2, 2), v(&[3.0, -3.0]), 1.0, 10_000)
                .unwrap();
        assert_eq!(obj.mu(), 1.0);
        assert_eq!(obj.lipschitz(), 1.0);
        assert!((opt.x_star[0] - 2.0).abs() < 1e-12);
        assert!((opt.x_star[1] + 2.0).abs() < 1e-12);
        // ½(1 + 1) + 1·(2 + 2)
        assert!((opt.f_star - 5.0).abs() < 1e-12);
        assert!(matches!(
            opt.source,
            OptimumSource::ReferenceRun {
                iterations: 10_000,
                ..
            }
        ));
    }

    #[test]
    fn lasso_zero_data_and_least_squares_limit() {
        let (_, opt) =
            make_lasso_with_reference(DMatrix::identity(1, 1), v(&[0.0]), 1.0, 1000).unwrap();
        assert_eq!(opt.x_star[0], 0.0);
        assert_eq!(opt.f_star, 0.0);

        let design = DMatrix::from_diagonal(&v(&[1.0, 2.0]));
        let (obj, opt) = make_lasso_with_reference(design, v(&[1.0, 1.0]), 0.0, 100_000).unwrap();
        assert!((obj.mu() - 1.0).abs() < 1e-12 && (obj.lipschitz() - 4.0).abs() < 1e-12);
        assert!((opt.x_star[0] - 1.0).abs() < 1e-12);
        assert!((opt.x_star[1] - 0.5).abs() < 1e-12);
        assert!(opt.f_star.abs() < 1e-20);
    }

    #[test]
    fn lasso_rejects_rank_deficient_design() {
        let design = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 4.0]);
        assert!(matches!(
            make_lasso_with_reference(design, v(&[1.0, 1.0]), 0.1, 10),
            Err(Error::InvalidProblem(_))
        ));
        assert!(CompositeObjective::with_l1(make_quadratic(&[1.0]).unwrap().0, -1.0).is_err());
    }

    #[test]
    fn phi_matches_its_definition() {
        let (oracle, _) = make_quadratic(&[1.0, 2.0]).unwrap();
        let smooth = CompositeObjective::smooth_only(oracle.clone());
        let x = v(&[0.5, -1.5]);
        assert_eq!(smooth.phi(&x), oracle.value(&x));
        let l1 = CompositeObjective::with_l1(oracle.clone(), 0.3).unwrap();
        assert_eq!(l1.phi(&x), oracle.value(&x) + 0.3 * 2.0);
    }

    #[test]
    fn lasso_gap_agrees_with_plain_difference() {
        let design = DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.1, 1.0]);
        let (obj, opt) = make_lasso_with_reference(design, v(&[1.0, -2.0]), 0.4, 100_000).unwrap();
        for x in [v(&[0.0, 0.0]), v(&[1.0, -1.0]), v(&[-3.0, 2.5])] {
            let direct = obj.phi(&x) - opt.f_star;
            assert!((obj.gap(&x, &opt) - direct).abs() < 1e-12 * (1.0 + direct.abs()));
        }
        assert!(obj.gap(&opt.x_star, &opt).abs() < 1e-15);
    }

    #[test]
    fn resolves_presets() {
        let p = resolve_problem("quad2d").unwrap();
        assert_eq!(p.objective.lipschitz(), 2.0);
        let p = resolve_problem("quad-diag:1, 4,2").unwrap();
        assert_eq!(p.objective.dim(), 3);
        assert_eq!(p.objective.mu(), 2.0);
        assert_eq!(p.objective.lipschitz(), 8.0);
        assert!(resolve_problem("quad-diag:1,x").is_err());
        assert!(resolve_problem("rosenbrock").is_err());
        assert!(matches!(
            resolve_problem("lasso:/nonexistent.json"),
            Err(Error::Io(_))
        ));
        assert!(matches!(
            resolve_problem("/nonexistent.json"),
            Err(Error::Io(_))
        ));
    }

    #[test]
    fn parses_lasso_json() {
        let (a, b, lambda) =
            parse_lasso_json(r#"{"A": [[1, 0], [0, 2], [1, 1]], "b": [1, 2, 3], "lambda": 0.5}"#)
                .unwrap();
        assert_eq!(a.shape(), (3, 2));
        assert_eq!(a[(1, 1)], 2.0);
        assert_eq!(b.len(), 3);
        assert_eq!(lambda, 0.5);
        assert!(parse_lasso_json(r#"{"A": [[1, 0], [0]], "b": [1, 2], "lambda": 0.5}"#).is_err());
        assert!(parse_lasso_json(r#"{"A": [], "b": [], "lambda": 0.5}"#).is_err());
    }
}
