//! Lyapunov analysis of recorded traces.
//!
//! The energy at iteration `k` is
//!
//! ```text
//! E(k) = s·(k+1)(k+r+1)·(Φ(x_{k+1}) − Φ*) + ½‖w_k‖²
//! ```
//!
//! where the mixed vector `w_k` is either the velocity form
//! `(k−1)√s·v_k + r(x_k − x*) − (k+r)s·m_k` or the position form
//! `k(y_k − x_k) + r(y_k − x*) − (k+r)s·m_k`, and `m_k` is the first-order map
//! (gradient or s-proximal subgradient) at `y_k` stored in the trace. The two
//! forms coincide whenever `y_k = x_k + ((k−1)/(k+r))√s·v_k`, which holds for
//! the non-monotone schemes.
//!
//! Certification checks, for `k ≥ K`, the per-step contraction
//! `E(k+1) ≤ E(k)/(1 + μs(1 − Ls)/4)` and, for `k ≥ max{1, K}`, the rate
//! bound
//!
//! ```text
//! Φ(x_k) − Φ* ≤ [(r+1)(Φ(x_1) − Φ*) + r²L‖x_1 − x*‖²] / [k(k+r)(1 + (1 − Ls)μs/4)^k]
//! ```

use serde::{Deserialize, Serialize};

use crate::algorithms::{Algorithm, Trace};
use crate::error::{Error, Result};
use crate::problems::{CompositeObjective, OptimumInfo, Vector};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EnergyForm {
    Velocity,
    Xy,
}

impl EnergyForm {
    /// The position form for monotone schemes, the velocity form otherwise.
    pub fn default_for(algo: Algorithm) -> Self {
        if algo.is_monotone() {
            EnergyForm::Xy
        } else {
            EnergyForm::Velocity
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SequenceKind {
    R,
    S,
    T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SequenceSample {
    pub kind: SequenceKind,
    pub k: usize,
    pub value: Vector,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyBreakdown {
    pub k: usize,
    /// `τ(k) = (k+1)(k+r+1)`
    pub tau: f64,
    pub potential: f64,
    pub mixed: f64,
    pub total: f64,
}

/// Relative and absolute slack applied to every certified inequality.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerance {
    pub rel: f64,
    pub abs: f64,
}

impl Default for Tolerance {
    fn default() -> Self {
        Self {
            rel: 1e-8,
            abs: 1e-12,
        }
    }
}

impl Tolerance {
    /// `lhs ≤ rhs·(1 + rel) + abs`
    pub fn holds(&self, lhs: f64, rhs: f64) -> bool {
        lhs <= rhs * (1.0 + self.rel) + self.abs
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CertificateRow {
    pub k: usize,
    pub f_gap: f64,
    /// Rate bound, present for `k ≥ max{1, K}`.
    pub bound: Option<f64>,
    pub bound_ok: bool,
    /// `E(k)`, present while `x_{k+1}` is in the trace.
    pub energy: Option<f64>,
    /// `E(k)/(1 + μs(1 − Ls)/4) − E(k+1)`, present for `k ≥ K` while `E(k+1)`
    /// is available. Non-negative when the contraction holds exactly.
    pub decrease_margin: Option<f64>,
    pub decrease_ok: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Certificate {
    pub threshold_k: usize,
    pub per_k: Vec<CertificateRow>,
    pub overall_pass: bool,
}

impl Certificate {
    /// First iteration whose bound or contraction check failed.
    pub fn first_failure(&self) -> Option<usize> {
        self.per_k
            .iter()
            .find(|row| !row.bound_ok || !row.decrease_ok)
            .map(|row| row.k)
    }

    pub fn to_json(&self) -> serde_json::Value {
        let rows: Vec<_> = self
            .per_k
            .iter()
            .map(|row| {
                serde_json::json!({
                    "k": row.k,
                    "gap": row.f_gap,
                    "bound": row.bound,
                    "energy": row.energy,
                    "decrease_margin": row.decrease_margin,
                })
            })
            .collect();
        serde_json::json!({
            "K": self.threshold_k,
            "pass": self.overall_pass,
            "rows": rows,
        })
    }
}

fn momentum_r(trace: &Trace) -> Result<f64> {
    if !trace.params.algo.uses_momentum_r() {
        return Err(Error::Unsupported(format!(
            "no Lyapunov analysis for {}",
            trace.params.algo
        )));
    }
    trace
        .params
        .momentum_r
        .ok_or_else(|| Error::InvalidParameter("trace has no momentum parameter r".into()))
}

/// `R_k = (k−1)√s·v_k + r·x_k`.
pub fn seq_r(trace: &Trace, k: usize) -> Result<Vector> {
    let rec = trace.record(k)?;
    seq_r_with_velocity(trace, k, &rec.v)
}

fn seq_r_with_velocity(trace: &Trace, k: usize, v: &Vector) -> Result<Vector> {
    let r = momentum_r(trace)?;
    let rec = trace.record(k)?;
    let s = trace.params.step;
    Ok(v * ((k as f64 - 1.0) * s.sqrt()) + &rec.x * r)
}

/// `S_k = R_k − (k+r)s·m_k`.
pub fn seq_s(trace: &Trace, k: usize) -> Result<Vector> {
    let rec = trace.record(k)?;
    seq_s_with_velocity(trace, k, &rec.v)
}

/// `S_k` with an externally supplied velocity `v_k`.
pub fn seq_s_with_velocity(trace: &Trace, k: usize, v: &Vector) -> Result<Vector> {
    let r = momentum_r(trace)?;
    let rec = trace.record(k)?;
    let s = trace.params.step;
    Ok(seq_r_with_velocity(trace, k, v)? - &rec.map_at_y * ((k as f64 + r) * s))
}

/// `T_k = (k+r)y_k − k·x_k − (k+r)s·m_k`.
pub fn seq_t(trace: &Trace, k: usize) -> Result<Vector> {
    let r = momentum_r(trace)?;
    let rec = trace.record(k)?;
    let s = trace.params.step;
    let kf = k as f64;
    Ok(&rec.y * (kf + r) - &rec.x * kf - &rec.map_at_y * ((kf + r) * s))
}

pub fn sample(trace: &Trace, kind: SequenceKind, k: usize) -> Result<SequenceSample> {
    let value = match kind {
        SequenceKind::R => seq_r(trace, k)?,
        SequenceKind::S => seq_s(trace, k)?,
        SequenceKind::T => seq_t(trace, k)?,
    };
    Ok(SequenceSample { kind, k, value })
}

/// Velocity implied by `y_k = x_k + ((k−1)/(k+r))√s·v_k`, i.e.
/// `v_k = (k+r)(y_k − x_k)/((k−1)√s)`. At `k = 1` the relation does not
/// constrain `v_1` and every use scales it by `k − 1 = 0`; zero is returned.
pub fn implied_velocity(trace: &Trace, k: usize) -> Result<Vector> {
    let r = momentum_r(trace)?;
    let rec = trace.record(k)?;
    if k == 1 {
        return Ok(Vector::zeros(rec.x.len()));
    }
    let kf = k as f64;
    let s = trace.params.step;
    Ok((&rec.y - &rec.x) * ((kf + r) / ((kf - 1.0) * s.sqrt())))
}

/// `E(k)` split into potential and mixed parts.
pub fn energy(
    trace: &Trace,
    objective: &CompositeObjective,
    optimum: &OptimumInfo,
    k: usize,
    form: EnergyForm,
) -> Result<EnergyBreakdown> {
    let r = momentum_r(trace)?;
    if form == EnergyForm::Velocity && trace.params.algo.is_monotone() {
        return Err(Error::Unsupported(format!(
            "velocity-form energy is not defined for {}; use the xy form",
            trace.params.algo
        )));
    }
    let rec = trace.record(k)?;
    let next = trace.record(k + 1)?;
    let s = trace.params.step;
    let kf = k as f64;

    let tau = (kf + 1.0) * (kf + r + 1.0);
    let potential = s * tau * objective.gap(&next.x, optimum);

    let gradient_term = &rec.map_at_y * ((kf + r) * s);
    let mixed_vector = match form {
        EnergyForm::Velocity => {
            &rec.v * ((kf - 1.0) * s.sqrt()) + (&rec.x - &optimum.x_star) * r - gradient_term
        }
        EnergyForm::Xy => (&rec.y - &rec.x) * kf + (&rec.y - &optimum.x_star) * r - gradient_term,
    };
    let mixed = 0.5 * mixed_vector.norm_squared();

    Ok(EnergyBreakdown {
        k,
        tau,
        potential,
        mixed,
        total: potential + mixed,
    })
}

/// `max{0, ⌈(3r² − 4r − 12)/8⌉}`.
pub fn threshold_k(r: f64) -> Result<usize> {
    if !(r >= 2.0) || !r.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "momentum parameter r must be >= 2, got {r}"
        )));
    }
    let raw = (3.0 * r * r - 4.0 * r - 12.0) / 8.0;
    Ok(raw.max(0.0).ceil() as usize)
}

/// Per-step contraction factor `1 + (1 − Ls)·μs/4`.
pub fn rate_factor(mu: f64, lipschitz: f64, s: f64) -> f64 {
    1.0 + (1.0 - lipschitz * s) * mu * s / 4.0
}

/// Constants entering the rate bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundInputs {
    pub r: f64,
    pub s: f64,
    pub mu: f64,
    pub lipschitz: f64,
    /// `Φ(x_1) − Φ*`
    pub first_gap: f64,
    /// `‖x_1 − x*‖²`
    pub first_dist_sq: f64,
}

/// Rate bound on `Φ(x_k) − Φ*`, defined for `k ≥ 1`.
pub fn theorem_bound(k: usize, inputs: &BoundInputs) -> Result<f64> {
    if k == 0 {
        return Err(Error::InvalidParameter(
            "rate bound is defined for k >= 1".into(),
        ));
    }
    let BoundInputs {
        r,
        s,
        mu,
        lipschitz,
        first_gap,
        first_dist_sq,
    } = *inputs;
    let kf = k as f64;
    let numerator = (r + 1.0) * first_gap + r * r * lipschitz * first_dist_sq;
    let denominator = kf * (kf + r) * rate_factor(mu, lipschitz, s).powf(kf);
    Ok(numerator / denominator)
}

pub fn certify(
    trace: &Trace,
    objective: &CompositeObjective,
    optimum: &OptimumInfo,
    form: EnergyForm,
) -> Result<Certificate> {
    certify_with(trace, objective, optimum, form, Tolerance::default())
}

/// Checks the rate bound and the energy contraction along the whole trace.
pub fn certify_with(
    trace: &Trace,
    objective: &CompositeObjective,
    optimum: &OptimumInfo,
    form: EnergyForm,
    tol: Tolerance,
) -> Result<Certificate> {
    let r = momentum_r(trace)?;
    let big_k = threshold_k(r)?;
    let start = big_k.max(1);
    let needed = start + 2;
    if trace.len() < needed {
        return Err(Error::TraceTooShort {
            needed,
            have: trace.len(),
        });
    }
    let s = trace.params.step;
    let (mu, lipschitz) = (objective.mu(), objective.lipschitz());
    let contraction = rate_factor(mu, lipschitz, s);

    let first = trace.record(1)?;
    let inputs = BoundInputs {
        r,
        s,
        mu,
        lipschitz,
        first_gap: objective.gap(&first.x, optimum),
        first_dist_sq: (&first.x - &optimum.x_star).norm_squared(),
    };

    let last = trace.len() - 1;
    let energies = (0..last)
        .map(|k| energy(trace, objective, optimum, k, form).map(|e| e.total))
        .collect::<Result<Vec<_>>>()?;

    let per_k: Vec<CertificateRow> = trace
        .records
        .iter()
        .map(|rec| -> Result<CertificateRow> {
            let k = rec.k;
            let f_gap = objective.gap(&rec.x, optimum);
            let bound = if k >= start {
                Some(theorem_bound(k, &inputs)?)
            } else {
                None
            };
            let bound_ok = bound.is_none_or(|b| tol.holds(f_gap, b));
            let energy = energies.get(k).copied();
            let (decrease_margin, decrease_ok) = match (energy, energies.get(k + 1)) {
                (Some(current), Some(&next)) if k >= big_k => {
                    let allowed = current / contraction;
                    (Some(allowed - next), tol.holds(next, allowed))
                }
                _ => (None, true),
            };
            Ok(CertificateRow {
                k,
                f_gap,
                bound,
                bound_ok,
                energy,
                decrease_margin,
                decrease_ok,
            })
        })
        .collect::<Result<_>>()?;

    let overall_pass = per_k.iter().all(|row| row.bound_ok && row.decrease_ok);
    Ok(Certificate {
        threshold_k: big_k,
        per_k,
        overall_pass,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algorithms::{run, RunParams};
    use crate::problems::{make_quadratic, QUAD2D};

    fn v(xs: &[f64]) -> Vector {
        Vector::from_column_slice(xs)
    }

    fn quad2d_trace(
        algo: Algorithm,
        iters: usize,
        x0: &[f64],
    ) -> (Trace, CompositeObjective, OptimumInfo) {
        let (oracle, opt) = make_quadratic(&QUAD2D).unwrap();
        let obj = CompositeObjective::smooth_only(oracle);
        let params = RunParams {
            algo,
            step: 0.4,
            momentum_r: Some(2.0),
            iters,
        };
        (run(&obj, &params, &v(x0)).unwrap(), obj, opt)
    }

    #[test]
    fn sequences_at_start() {
        let (trace, _, _) = quad2d_trace(Algorithm::Nag, 5, &[1.0, 1.0]);
        assert_eq!(seq_r(&trace, 0).unwrap(), v(&[2.0, 2.0]));
        let r1 = seq_r(&trace, 1).unwrap();
        assert!((r1 - v(&[1.992, 0.4])).amax() < 1e-15);
        let s0 = seq_s(&trace, 0).unwrap();
        let t0 = seq_t(&trace, 0).unwrap();
        assert!((&s0 - v(&[1.992, 0.4])).amax() < 1e-15);
        assert!((&t0 - v(&[1.992, 0.4])).amax() < 1e-15);
        assert!(matches!(
            seq_r(&trace, 6),
            Err(Error::OutOfRange { k: 6, len: 6 })
        ));
        assert_eq!(sample(&trace, SequenceKind::T, 0).unwrap().value, t0);
    }

    #[test]
    fn sequences_on_stationary_trace() {
        let (trace, _, opt) = quad2d_trace(Algorithm::Nag, 4, &[0.0, 0.0]);
        for k in 0..=4 {
            for kind in [SequenceKind::R, SequenceKind::S, SequenceKind::T] {
                assert_eq!(sample(&trace, kind, k).unwrap().value, &opt.x_star * 2.0);
            }
        }
    }

    #[test]
    fn energy_at_start_of_quad2d_run() {
        let (trace, obj, opt) = quad2d_trace(Algorithm::Nag, 5, &[1.0, 1.0]);
        let e = energy(&trace, &obj, &opt, 0, EnergyForm::Velocity).unwrap();
        assert_eq!(e.tau, 3.0);
        assert!((e.potential - 0.053952096).abs() < 1e-15);
        assert!((e.mixed - 2.064032).abs() < 1e-14);
        assert_eq!(e.total, e.potential + e.mixed);
        let xy = energy(&trace, &obj, &opt, 0, EnergyForm::Xy).unwrap();
        assert!((xy.total - e.total).abs() < 1e-14);
        assert!(energy(&trace, &obj, &opt, 5, EnergyForm::Xy).is_err());
    }

    #[test]
    fn velocity_form_rejected_for_monotone_schemes() {
        let (trace, obj, opt) = quad2d_trace(Algorithm::MNag, 5, &[1.0, 1.0]);
        assert!(matches!(
            energy(&trace, &obj, &opt, 1, EnergyForm::Velocity),
            Err(Error::Unsupported(_))
        ));
        assert!(energy(&trace, &obj, &opt, 1, EnergyForm::Xy).is_ok());
    }

    #[test]
    fn no_analysis_without_momentum_parameter() {
        let (trace, obj, opt) = quad2d_trace(Algorithm::Gd, 5, &[1.0, 1.0]);
        assert!(matches!(seq_r(&trace, 0), Err(Error::Unsupported(_))));
        assert!(certify(&trace, &obj, &opt, EnergyForm::Velocity).is_err());
    }

    #[test]
    fn threshold_values() {
        assert_eq!(threshold_k(2.0).unwrap(), 0);
        assert_eq!(threshold_k(3.0).unwrap(), 1);
        assert_eq!(threshold_k(4.0).unwrap(), 3);
        assert!(threshold_k(1.9).is_err());
        assert!(threshold_k(f64::NAN).is_err());
    }

    fn quad2d_inputs() -> BoundInputs {
        BoundInputs {
            r: 2.0,
            s: 0.4,
            mu: 0.01,
            lipschitz: 2.0,
            first_gap: 0.04496008,
            first_dist_sq: 1.032016,
        }
    }

    #[test]
    fn bound_at_first_iteration() {
        // 8.39100824 / 3.0006, evaluated independently
        let b = theorem_bound(1, &quad2d_inputs()).unwrap();
        assert!((b - 2.796_443_457_975_071_7).abs() < 1e-12, "{b}");
        assert!(theorem_bound(0, &quad2d_inputs()).is_err());
    }

    #[test]
    fn bound_structure() {
        let zero = BoundInputs {
            first_gap: 0.0,
            first_dist_sq: 0.0,
            ..quad2d_inputs()
        };
        assert_eq!(theorem_bound(7, &zero).unwrap(), 0.0);

        // Ls → 1 leaves only the 1/(k(k+r)) decay.
        let critical = BoundInputs {
            s: 0.5,
            ..quad2d_inputs()
        };
        assert_eq!(rate_factor(0.01, 2.0, 0.5), 1.0);
        let b1 = theorem_bound(1, &critical).unwrap();
        let b10 = theorem_bound(10, &critical).unwrap();
        assert!((b10 / b1 - 3.0 / 120.0).abs() < 1e-15);

        let inputs = quad2d_inputs();
        for k in 1..300 {
            assert!(theorem_bound(k + 1, &inputs).unwrap() < theorem_bound(k, &inputs).unwrap());
        }
    }

    #[test]
    fn stationary_trace_certifies() {
        let (trace, obj, opt) = quad2d_trace(Algorithm::Nag, 10, &[0.0, 0.0]);
        let cert = certify(&trace, &obj, &opt, EnergyForm::Velocity).unwrap();
        assert!(cert.overall_pass);
        assert!(cert.per_k.iter().all(|row| row.f_gap == 0.0));
        assert!(cert
            .per_k
            .iter()
            .all(|row| row.bound.is_none_or(|b| b >= 0.0)));
        assert!(cert
            .per_k
            .iter()
            .all(|row| row.energy.is_none_or(|e| e == 0.0)));
    }

    #[test]
    fn certificate_shape() {
        let (trace, obj, opt) = quad2d_trace(Algorithm::Nag, 20, &[1.0, 1.0]);
        let cert = certify(&trace, &obj, &opt, EnergyForm::Velocity).unwrap();
        assert_eq!(cert.threshold_k, 0);
        assert_eq!(cert.per_k.len(), 21);
        assert!(cert.per_k[0].bound.is_none());
        assert!(cert.per_k[1].bound.is_some());
        assert!(cert.per_k[19].energy.is_some() && cert.per_k[20].energy.is_none());
        assert!(cert.per_k[18].decrease_margin.is_some());
        assert!(cert.per_k[19].decrease_margin.is_none());
        assert!(cert.overall_pass);
        assert_eq!(cert.first_failure(), None);

        let json = cert.to_json();
        assert_eq!(json["K"], 0);
        assert_eq!(json["pass"], true);
        assert_eq!(json["rows"].as_array().unwrap().len(), 21);
        assert!(json["rows"][0]["bound"].is_null());
        assert_eq!(
            json["rows"][3]
                .as_object()
                .unwrap()
                .keys()
                .cloned()
                .collect::<Vec<_>>(),
            ["bound", "decrease_margin", "energy", "gap", "k"]
        );
    }

    #[test]
    fn short_trace_is_rejected() {
        let (trace, obj, opt) = quad2d_trace(Algorithm::Nag, 1, &[1.0, 1.0]);
        assert!(matches!(
            certify(&trace, &obj, &opt, EnergyForm::Velocity),
            Err(Error::TraceTooShort { needed: 3, have: 2 })
        ));
    }

    #[test]
    fn tampered_trace_fails_certification() {
        let (mut trace, obj, opt) = quad2d_trace(Algorithm::Nag, 50, &[1.0, 1.0]);
        trace.records[30].x = v(&[5.0, 5.0]);
        let cert = certify(&trace, &obj, &opt, EnergyForm::Velocity).unwrap();
        assert!(!cert.overall_pass);
        assert!(cert.first_failure().unwrap() <= 30);
    }
}
