//! Single-step transitions of the accelerated schemes and a trace runner.
//!
//! Every scheme starts from `x_0 = y_0` with zero velocity. The velocity is
//! kept in the implicit-velocity scaling `x_k − x_{k−1} = √s·v_k`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::problems::{CompositeObjective, SmoothOracle, Vector};
use crate::proximal;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Algorithm {
    Gd,
    Nag,
    NagPhase,
    MNag,
    Fista,
    MFista,
    NagSc,
    MNagSc,
}

impl Algorithm {
    pub const ALL: [Algorithm; 8] = [
        Algorithm::Gd,
        Algorithm::Nag,
        Algorithm::NagPhase,
        Algorithm::MNag,
        Algorithm::Fista,
        Algorithm::MFista,
        Algorithm::NagSc,
        Algorithm::MNagSc,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Gd => "gd",
            Algorithm::Nag => "nag",
            Algorithm::NagPhase => "nag-phase",
            Algorithm::MNag => "m-nag",
            Algorithm::Fista => "fista",
            Algorithm::MFista => "m-fista",
            Algorithm::NagSc => "nag-sc",
            Algorithm::MNagSc => "m-nag-sc",
        }
    }

    /// Schemes with the `k/(k+r+1)` momentum weight.
    pub fn uses_momentum_r(self) -> bool {
        matches!(
            self,
            Algorithm::Nag
                | Algorithm::NagPhase
                | Algorithm::MNag
                | Algorithm::Fista
                | Algorithm::MFista
        )
    }

    /// Schemes with a comparison step.
    pub fn is_monotone(self) -> bool {
        matches!(
            self,
            Algorithm::MNag | Algorithm::MFista | Algorithm::MNagSc
        )
    }

    /// Schemes that accept a non-zero regularizer.
    pub fn is_proximal(self) -> bool {
        matches!(self, Algorithm::Fista | Algorithm::MFista)
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| {
                let names: Vec<_> = Algorithm::ALL.iter().map(|a| a.name()).collect();
                Error::InvalidParameter(format!(
                    "unknown algorithm {s:?} (expected one of {})",
                    names.join(", ")
                ))
            })
    }
}

/// Iterate `(x_k, y_k, v_k)` plus the last comparison candidate of the
/// monotone schemes.
#[derive(Debug, Clone, PartialEq)]
pub struct AlgoState {
    pub k: usize,
    pub x: Vector,
    pub y: Vector,
    pub v: Vector,
    /// Candidate `z_{k−1}` produced by the step that led to this state.
    pub z: Option<Vector>,
}

impl AlgoState {
    pub fn initial(x0: &Vector) -> Self {
        Self {
            k: 0,
            x: x0.clone(),
            y: x0.clone(),
            v: Vector::zeros(x0.len()),
            z: None,
        }
    }
}

/// Result of one step: the next state and the first-order map at `y_k`
/// (gradient or s-proximal subgradient) that the step used.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub next: AlgoState,
    pub map_at_y: Vector,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunParams {
    pub algo: Algorithm,
    pub step: f64,
    pub momentum_r: Option<f64>,
    pub iters: usize,
}

impl RunParams {
    pub fn validate(&self, objective: &CompositeObjective) -> Result<()> {
        proximal::check_step(objective, self.step)?;
        if self.iters == 0 {
            return Err(Error::InvalidParameter("iters must be positive".into()));
        }
        if self.algo.uses_momentum_r() {
            match self.momentum_r {
                Some(r) if r >= 2.0 && r.is_finite() => {}
                Some(r) => {
                    return Err(Error::InvalidParameter(format!(
                        "momentum parameter r must be >= 2, got {r}"
                    )))
                }
                None => {
                    return Err(Error::InvalidParameter(format!(
                        "{} requires the momentum parameter r",
                        self.algo
                    )))
                }
            }
        }
        if !objective.is_smooth() && !self.algo.is_proximal() {
            return Err(Error::Unsupported(format!(
                "{} needs a smooth objective; use fista or m-fista for composite problems",
                self.algo
            )));
        }
        if matches!(self.algo, Algorithm::NagSc | Algorithm::MNagSc) {
            sc_momentum(objective.mu(), self.step)?;
        }
        Ok(())
    }

    fn r(&self) -> f64 {
        self.momentum_r.unwrap_or(2.0)
    }
}

/// `k/(k+r+1)`.
pub fn nag_momentum(k: usize, r: f64) -> f64 {
    let k = k as f64;
    k / (k + r + 1.0)
}

/// `(1 − √(μs))/(1 + √(μs))`, defined for `0 < μs < 1`.
pub fn sc_momentum(mu: f64, s: f64) -> Result<f64> {
    let mu_s = mu * s;
    if !(mu_s > 0.0 && mu_s < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "strongly convex momentum needs 0 < μs < 1, got μs = {mu_s}"
        )));
    }
    let root = mu_s.sqrt();
    Ok((1.0 - root) / (1.0 + root))
}

fn velocity(x_next: &Vector, x: &Vector, s: f64) -> Vector {
    (x_next - x) / s.sqrt()
}

fn check_state(dim: usize, state: &AlgoState) -> Result<()> {
    check_dim(dim, state.x.len())?;
    check_dim(dim, state.y.len())?;
    check_dim(dim, state.v.len())
}

/// `x_{k+1} = x_k − s∇f(x_k)`.
pub fn step_gd(state: &AlgoState, oracle: &SmoothOracle, s: f64) -> Result<Transition> {
    check_state(oracle.dim(), state)?;
    let gradient = oracle.gradient(&state.x);
    let x = &state.x - &gradient * s;
    Ok(Transition {
        next: AlgoState {
            k: state.k + 1,
            v: velocity(&x, &state.x, s),
            y: x.clone(),
            x,
            z: None,
        },
        map_at_y: gradient,
    })
}

/// Two-step form: gradient step from `y_k`, then momentum `k/(k+r+1)`.
pub fn step_nag(state: &AlgoState, oracle: &SmoothOracle, s: f64, r: f64) -> Result<Transition> {
    check_state(oracle.dim(), state)?;
    let gradient = oracle.gradient(&state.y);
    let x = &state.y - &gradient * s;
    Ok(momentum_transition(
        state,
        x,
        gradient,
        s,
        nag_momentum(state.k, r),
    ))
}

fn momentum_transition(
    state: &AlgoState,
    x: Vector,
    map_at_y: Vector,
    s: f64,
    beta: f64,
) -> Transition {
    let dx = &x - &state.x;
    let y = &x + &dx * beta;
    Transition {
        next: AlgoState {
            k: state.k + 1,
            v: dx / s.sqrt(),
            x,
            y,
            z: None,
        },
        map_at_y,
    }
}

/// Phase-space form:
/// `v_{k+1} = v_k − ((r+1)/(k+r))·v_k − √s∇f(y_k)`, `x_{k+1} = x_k + √s·v_{k+1}`,
/// and `y_{k+1} = x_{k+1} + (k/(k+r+1))·√s·v_{k+1}`.
pub fn step_nag_phase(
    state: &AlgoState,
    oracle: &SmoothOracle,
    s: f64,
    r: f64,
) -> Result<Transition> {
    check_state(oracle.dim(), state)?;
    let k = state.k as f64;
    let sqrt_s = s.sqrt();
    let gradient = oracle.gradient(&state.y);
    let v = &state.v - &state.v * ((r + 1.0) / (k + r)) - &gradient * sqrt_s;
    let x = &state.x + &v * sqrt_s;
    let y = &x + &v * (sqrt_s * k / (k + 1.0 + r));
    Ok(Transition {
        next: AlgoState {
            k: state.k + 1,
            x,
            y,
            v,
            z: None,
        },
        map_at_y: gradient,
    })
}

/// Comparison step shared by the monotone schemes: `z` is accepted when its
/// objective value does not exceed the current one, ties included.
fn monotone_transition(
    state: &AlgoState,
    z: Vector,
    map_at_y: Vector,
    objective: impl Fn(&Vector) -> f64,
    s: f64,
    beta: f64,
    candidate_weight: f64,
) -> Transition {
    let x = if objective(&z) <= objective(&state.x) {
        z.clone()
    } else {
        state.x.clone()
    };
    let dx = &x - &state.x;
    let y = &x + &dx * beta + (&z - &x) * candidate_weight;
    Transition {
        next: AlgoState {
            k: state.k + 1,
            v: dx / s.sqrt(),
            x,
            y,
            z: Some(z),
        },
        map_at_y,
    }
}

/// `z_k = y_k − s∇f(y_k)`, comparison on `f`, then
/// `y_{k+1} = x_{k+1} + (k/(k+r+1))(x_{k+1} − x_k) + ((k+r)/(k+r+1))(z_k − x_{k+1})`.
pub fn step_mnag(state: &AlgoState, oracle: &SmoothOracle, s: f64, r: f64) -> Result<Transition> {
    check_state(oracle.dim(), state)?;
    let gradient = oracle.gradient(&state.y);
    let z = &state.y - &gradient * s;
    let k = state.k as f64;
    Ok(monotone_transition(
        state,
        z,
        gradient,
        |p| oracle.value(p),
        s,
        nag_momentum(state.k, r),
        (k + r) / (k + r + 1.0),
    ))
}

/// `x_{k+1} = P_s(y_k)` with the NAG momentum.
pub fn step_fista(
    state: &AlgoState,
    objective: &CompositeObjective,
    s: f64,
    r: f64,
) -> Result<Transition> {
    check_state(objective.dim(), state)?;
    let prox = proximal::prox(objective, &state.y, s)?;
    Ok(momentum_transition(
        state,
        prox.p_value,
        prox.subgradient,
        s,
        nag_momentum(state.k, r),
    ))
}

/// `z_k = P_s(y_k)`, comparison on `Φ`, then the M-NAG momentum update.
pub fn step_mfista(
    state: &AlgoState,
    objective: &CompositeObjective,
    s: f64,
    r: f64,
) -> Result<Transition> {
    check_state(objective.dim(), state)?;
    let prox = proximal::prox(objective, &state.y, s)?;
    let k = state.k as f64;
    Ok(monotone_transition(
        state,
        prox.p_value,
        prox.subgradient,
        |p| objective.phi(p),
        s,
        nag_momentum(state.k, r),
        (k + r) / (k + r + 1.0),
    ))
}

/// Gradient step from `y_k` with the constant momentum `(1 − √(μs))/(1 + √(μs))`.
pub fn step_nag_sc(state: &AlgoState, oracle: &SmoothOracle, s: f64) -> Result<Transition> {
    let beta = sc_momentum(oracle.mu(), s)?;
    check_state(oracle.dim(), state)?;
    let gradient = oracle.gradient(&state.y);
    let x = &state.y - &gradient * s;
    Ok(momentum_transition(state, x, gradient, s, beta))
}

/// Monotone NAG-SC: `y_{k+1} = x_{k+1} + β(x_{k+1} − x_k) + (z_k − x_{k+1})`.
pub fn step_mnag_sc(state: &AlgoState, oracle: &SmoothOracle, s: f64) -> Result<Transition> {
    let beta = sc_momentum(oracle.mu(), s)?;
    check_state(oracle.dim(), state)?;
    let gradient = oracle.gradient(&state.y);
    let z = &state.y - &gradient * s;
    Ok(monotone_transition(
        state,
        z,
        gradient,
        |p| oracle.value(p),
        s,
        beta,
        1.0,
    ))
}

/// Dispatches one step of `params.algo`.
pub fn step(
    state: &AlgoState,
    objective: &CompositeObjective,
    params: &RunParams,
) -> Result<Transition> {
    let s = params.step;
    let oracle = &objective.smooth;
    match params.algo {
        Algorithm::Gd => step_gd(state, oracle, s),
        Algorithm::Nag => step_nag(state, oracle, s, params.r()),
        Algorithm::NagPhase => step_nag_phase(state, oracle, s, params.r()),
        Algorithm::MNag => step_mnag(state, oracle, s, params.r()),
        Algorithm::Fista => step_fista(state, objective, s, params.r()),
        Algorithm::MFista => step_mfista(state, objective, s, params.r()),
        Algorithm::NagSc => step_nag_sc(state, oracle, s),
        Algorithm::MNagSc => step_mnag_sc(state, oracle, s),
    }
}

/// One iterate of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct Record {
    pub k: usize,
    pub x: Vector,
    pub y: Vector,
    pub v: Vector,
    /// Comparison candidate `z_k` built from `y_k` (monotone schemes only).
    pub z: Option<Vector>,
    /// `f(x_k)`, or `Φ(x_k)` for composite objectives.
    pub value: f64,
    /// Gradient or s-proximal subgradient at `y_k`.
    pub map_at_y: Vector,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub params: RunParams,
    pub problem_id: String,
    pub records: Vec<Record>,
}

impl Trace {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn values(&self) -> impl Iterator<Item = f64> + '_ {
        self.records.iter().map(|r| r.value)
    }

    /// Indices `k ≥ 1` with `value_k > value_{k−1}`.
    pub fn monotone_violations(&self) -> Vec<usize> {
        self.records
            .windows(2)
            .filter(|w| w[1].value > w[0].value)
            .map(|w| w[1].k)
            .collect()
    }

    pub fn record(&self, k: usize) -> Result<&Record> {
        self.records.get(k).ok_or(Error::OutOfRange {
            k,
            len: self.records.len(),
        })
    }
}

/// First-order map at `y` and the comparison candidate, evaluated the same
/// way the step of `algo` would.
fn map_and_candidate(
    objective: &CompositeObjective,
    params: &RunParams,
    state: &AlgoState,
) -> Result<(Vector, Option<Vector>)> {
    let s = params.step;
    match params.algo {
        Algorithm::Gd => Ok((objective.smooth.gradient(&state.x), None)),
        Algorithm::Fista | Algorithm::MFista => {
            let prox = proximal::prox(objective, &state.y, s)?;
            let z = params.algo.is_monotone().then_some(prox.p_value);
            Ok((prox.subgradient, z))
        }
        algo => {
            let gradient = objective.smooth.gradient(&state.y);
            let z = algo.is_monotone().then(|| &state.y - &gradient * s);
            Ok((gradient, z))
        }
    }
}

/// Runs `params.iters` steps from `x0` and records every iterate.
pub fn run(objective: &CompositeObjective, params: &RunParams, x0: &Vector) -> Result<Trace> {
    params.validate(objective)?;
    check_dim(objective.dim(), x0.len())?;

    let mut records = Vec::with_capacity(params.iters + 1);
    let mut state = AlgoState::initial(x0);
    for _ in 0..params.iters {
        let Transition { next, map_at_y } = step(&state, objective, params)?;
        records.push(Record {
            k: state.k,
            value: objective.phi(&state.x),
            x: state.x,
            y: state.y,
            v: state.v,
            z: next.z.clone(),
            map_at_y,
        });
        state = next;
    }
    let (map_at_y, z) = map_and_candidate(objective, params, &state)?;
    records.push(Record {
        k: state.k,
        value: objective.phi(&state.x),
        x: state.x,
        y: state.y,
        v: state.v,
        z,
        map_at_y,
    });

    Ok(Trace {
        params: *params,
        problem_id: String::new(),
        records,
    })
}
