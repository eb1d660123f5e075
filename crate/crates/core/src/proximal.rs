//! The s-proximal value `P_s` and s-proximal subgradient `G_s`.

use crate::error::{check_dim, Error, Result};
use crate::problems::{CompositeObjective, Regularizer, Vector};

/// `P_s(x)` together with `G_s(x)` and the step that produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct ProxResult {
    pub p_value: Vector,
    pub subgradient: Vector,
    pub step: f64,
}

/// Accepts `s` only when `0 < s < 1/L`.
pub fn check_step(objective: &CompositeObjective, s: f64) -> Result<()> {
    let lipschitz = objective.lipschitz();
    if s > 0.0 && s < 1.0 / lipschitz {
        Ok(())
    } else {
        Err(Error::InvalidStep { step: s, lipschitz })
    }
}

/// Componentwise `sgn(u_i)·(|u_i| − θ)_+`.
pub fn soft_threshold(u: &Vector, theta: f64) -> Result<Vector> {
    if !(theta >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "soft-threshold level must be non-negative, got {theta}"
        )));
    }
    Ok(u.map(|ui| shrink(ui, theta)))
}

fn shrink(u: f64, theta: f64) -> f64 {
    let magnitude = u.abs() - theta;
    if magnitude > 0.0 {
        magnitude.copysign(u)
    } else {
        0.0
    }
}

/// Forward gradient point `x − s∇f(x)` and the gradient it used.
fn forward_step(objective: &CompositeObjective, x: &Vector, s: f64) -> Result<(Vector, Vector)> {
    check_dim(objective.dim(), x.len())?;
    check_step(objective, s)?;
    let gradient = objective.smooth.gradient(x);
    Ok((x - &gradient * s, gradient))
}

/// `P_s(x) = argmin_y (1/2s)‖y − (x − s∇f(x))‖² + g(y)`.
pub fn prox_value(objective: &CompositeObjective, x: &Vector, s: f64) -> Result<Vector> {
    let (u, _) = forward_step(objective, x, s)?;
    match objective.regularizer {
        Regularizer::Zero => Ok(u),
        Regularizer::L1 { weight } => Ok(u.map(|ui| shrink(ui, weight * s))),
    }
}

/// `G_s(x) = (x − P_s(x))/s`.
///
/// With `g ≡ 0` this returns `∇f(x)` itself rather than the rounded
/// quotient, so smooth runs see exactly the oracle gradient.
pub fn prox_subgradient(objective: &CompositeObjective, x: &Vector, s: f64) -> Result<Vector> {
    Ok(prox(objective, x, s)?.subgradient)
}

/// Computes `P_s(x)` and `G_s(x)` with a single gradient evaluation.
pub fn prox(objective: &CompositeObjective, x: &Vector, s: f64) -> Result<ProxResult> {
    let (u, gradient) = forward_step(objective, x, s)?;
    let (p_value, subgradient) = match objective.regularizer {
        Regularizer::Zero => (u, gradient),
        Regularizer::L1 { weight } => {
            let p = u.map(|ui| shrink(ui, weight * s));
            let g = (x - &p) / s;
            (p, g)
        }
    };
    Ok(ProxResult {
        p_value,
        subgradient,
        step: s,
    })
}

/// Default search radius around a forward point `u`.
pub fn default_radius(u: f64) -> f64 {
    10.0 * (1.0 + u.abs())
}

/// Grid-search oracle for `P_s` on separable regularizers.
///
/// Each coordinate minimizes `(1/2s)(y − u_i)² + λ|y|` over the grid
/// `u_i + j·grid_step`, `|j·grid_step| ≤ radius`. The objective is convex in
/// `y`, so the grid argmin is located by successive refinement: the true
/// minimizer always lies within one spacing of the argmin of a coarser grid.
pub fn prox_bruteforce(
    objective: &CompositeObjective,
    x: &Vector,
    s: f64,
    radius: f64,
    grid_step: f64,
) -> Result<Vector> {
    if !(grid_step > 0.0) || !(radius >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "grid search needs grid_step > 0 and radius >= 0, got {grid_step} and {radius}"
        )));
    }
    let weight = match objective.regularizer {
        Regularizer::Zero => 0.0,
        Regularizer::L1 { weight } => weight,
    };
    let (u, _) = forward_step(objective, x, s)?;
    Ok(u.map(|ui| {
        let cost = |y: f64| (y - ui) * (y - ui) / (2.0 * s) + weight * y.abs();
        grid_argmin(cost, ui, radius, grid_step)
    }))
}

/// Argmin of a convex `cost` over `{center + j·step : |j·step| ≤ radius}`.
fn grid_argmin(cost: impl Fn(f64) -> f64, center: f64, radius: f64, step: f64) -> f64 {
    const REFINE: f64 = 10.0;
    let half_width = (radius / step).floor();
    // Coarsest level: spacing step·REFINE^levels, enough to cover the radius
    // with a handful of points.
    let mut spacing_in_steps = 1.0;
    while half_width / spacing_in_steps > 2.0 * REFINE {
        spacing_in_steps *= REFINE;
    }
    // Work in integer grid offsets so every candidate lies on the fine grid.
    let mut lo = -half_width;
    let mut hi = half_width;
    loop {
        let mut best_j = lo;
        let mut best_cost = f64::INFINITY;
        let mut j = lo;
        while j <= hi {
            let c = cost(center + j * step);
            if c < best_cost {
                best_cost = c;
                best_j = j;
            }
            j += spacing_in_steps;
        }
        if spacing_in_steps <= 1.0 {
            return center + best_j * step;
        }
        lo = (best_j - spacing_in_steps).max(-half_width);
        hi = (best_j + spacing_in_steps).min(half_width);
        spacing_in_steps /= REFINE;
    }
}
