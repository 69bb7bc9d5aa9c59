//! Disagreement vectors, Lyapunov functionals, the averaging target and the
//! decay-certificate constants, together with the runtime verdicts derived
//! from them.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::PlantParams;
use crate::field::AgentField;
use crate::graph::{CenteringMatrix, LaplacianMatrix, SpectralSummary};
use crate::protocols::SlidingGains;

#[derive(Debug, Error, PartialEq)]
pub enum AnalysisError {
    #[error("kappa_R = {kappa} is not admissible (must lie in [0, {max}])")]
    InadmissibleKappa { kappa: f64, max: f64 },
    #[error("gains are non-compliant: {0} is non-positive")]
    GainsNoncompliant(&'static str),
}

/// The centered field and its centered time derivative.
#[derive(Debug, Clone)]
pub struct DisagreementPair {
    pub d1: AgentField,
    pub d2: AgentField,
}

/// Applies the centering projector nodewise to the field and its cached
/// time derivative.
pub fn disagreement(
    q: &AgentField,
    z: &AgentField,
    centering: &CenteringMatrix,
) -> DisagreementPair {
    let project = |f: &AgentField| {
        AgentField::new(centering.entries() * f.values(), f.grid())
            .expect("centering preserves finiteness")
    };
    DisagreementPair {
        d1: project(q),
        d2: project(z),
    }
}

/// Spatial average of the summed initial profiles; the consensus value the
/// linear protocol drives every agent to.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AverageTarget {
    pub q_star: f64,
}

pub fn average_target(q0: &AgentField) -> AverageTarget {
    AverageTarget {
        q_star: q0.total_mass() / q0.agent_count() as f64,
    }
}

/// `V1 = 1/2 ||q||^2` in the discrete `H^{0,N}` norm.
pub fn v1(q: &AgentField) -> f64 {
    0.5 * q.h_norm_squared(0).expect("order 0 always valid")
}

/// Trapezoid integral over the grid of a per-node scalar.
fn integrate_nodes<F: Fn(usize) -> f64>(field: &AgentField, integrand: F) -> f64 {
    let n = field.grid().node_count();
    let h = field.grid().spacing();
    let mut acc = 0.5 * (integrand(0) + integrand(n - 1));
    for j in 1..n - 1 {
        acc += integrand(j);
    }
    acc * h
}

fn column(field: &AgentField, j: usize) -> DVector<f64> {
    DVector::from_column_slice(field.values().column(j).as_slice())
}

fn one_norm(v: &DVector<f64>) -> f64 {
    v.iter().map(|x| x.abs()).sum()
}

/// The synchronization Lyapunov functional
/// `V = theta*a*||L d1(1)||_1 + 1/2 theta*w1*||L d1(1)||_2^2
///    + 1/2 int d2^T L d2`.
pub fn v_functional(
    d: &DisagreementPair,
    laplacian: &LaplacianMatrix,
    gains: &SlidingGains,
    params: &PlantParams,
) -> f64 {
    let theta = params.diffusivity;
    let ld1 = laplacian.apply(&d.d1.boundary_trace(crate::field::Side::Right));
    let quad = integrate_nodes(&d.d2, |j| {
        let col = column(&d.d2, j);
        col.dot(&laplacian.apply(&col))
    });
    theta * gains.a * one_norm(&ld1) + 0.5 * theta * gains.w1 * ld1.norm_squared() + 0.5 * quad
}

/// The diagonal comparison functional
/// `V~ = theta*a*||d1(1)||_1 + 1/2 theta*w1*||d1(1)||_2^2 + 1/2 ||d2||^2`
/// sandwiched against `V` by `alpha1`, `alpha2`.
pub fn v_tilde(d: &DisagreementPair, gains: &SlidingGains, params: &PlantParams) -> f64 {
    let theta = params.diffusivity;
    let d1r = d.d1.boundary_trace(crate::field::Side::Right);
    theta * gains.a * one_norm(&d1r)
        + 0.5 * theta * gains.w1 * d1r.norm_squared()
        + 0.5 * d.d2.h_norm_squared(0).expect("order 0 always valid")
}

/// The cross-term augmentation
/// `V_bar = 1/2 theta*w2*||L d1(1)||_2^2 + int d1(1)^T L d2`.
pub fn v_bar(
    d: &DisagreementPair,
    laplacian: &LaplacianMatrix,
    gains: &SlidingGains,
    params: &PlantParams,
) -> f64 {
    let theta = params.diffusivity;
    let d1r = d.d1.boundary_trace(crate::field::Side::Right);
    let ld1 = laplacian.apply(&d1r);
    let cross = integrate_nodes(&d.d2, |j| ld1.dot(&column(&d.d2, j)));
    0.5 * theta * gains.w2 * ld1.norm_squared() + cross
}

/// `V_R = V + kappa_R * V_bar`, valid only for an admissible `kappa_R`.
pub fn vr_functional(
    d: &DisagreementPair,
    laplacian: &LaplacianMatrix,
    gains: &SlidingGains,
    params: &PlantParams,
    consts: &CertificateConstants,
) -> Result<f64, AnalysisError> {
    if !(0.0..=consts.kappa_max).contains(&consts.kappa_r) {
        return Err(AnalysisError::InadmissibleKappa {
            kappa: consts.kappa_r,
            max: consts.kappa_max,
        });
    }
    Ok(v_functional(d, laplacian, gains, params)
        + consts.kappa_r * v_bar(d, laplacian, gains, params))
}

/// Decay-certificate coefficients for an invariant level set of size `r_level`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CertificateConstants {
    pub alpha1: f64,
    /// With the induced matrix 1-norm convention for `||L||_1`.
    pub alpha2: f64,
    /// Same constant with the entrywise-sum reading, recorded for comparison.
    pub alpha2_entrywise: f64,
    pub kappa_max: f64,
    pub kappa_r: f64,
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub c4: f64,
    pub gamma1: f64,
    pub gamma2: f64,
    pub rho_r: f64,
    pub r_level: f64,
}

/// Evaluates the certificate formulas.
///
/// `kappa_R` is taken as half of its admissible upper bound so every
/// coefficient, `c2` included, stays strictly positive under compliant
/// gains.
pub fn certificate_constants(
    laplacian: &LaplacianMatrix,
    spectrum: &SpectralSummary,
    gains: &SlidingGains,
    params: &PlantParams,
    pi_bound: f64,
    r_level: f64,
) -> Result<CertificateConstants, AnalysisError> {
    let theta = params.diffusivity;
    let lam2 = spectrum.lambda2();
    let lam_n = spectrum.lambda_n();
    let n = laplacian.dim() as f64;

    let alpha1 = (lam2 / n.sqrt()).min(lam2 * lam2);
    let alpha2 = laplacian
        .induced_one_norm()
        .max(lam_n * lam_n)
        .max(lam_n);
    let alpha2_entrywise = laplacian
        .entrywise_one_norm()
        .max(lam_n * lam_n)
        .max(lam_n);

    // kappa_R admissibility: min{2 theta^2 a^2 / R, lambda_2, (b - Pi)/denom}
    let denom = (2.0 * r_level / (theta * theta * lam2)).sqrt()
        + (gains.w3 / lam2) * (2.0 * r_level / (theta * gains.w1)).sqrt();
    let mut kappa_max = lam2;
    if r_level > 0.0 {
        kappa_max = kappa_max.min(2.0 * theta * theta * gains.a * gains.a / r_level);
    }
    if denom > 0.0 {
        kappa_max = kappa_max.min((gains.b - pi_bound) / denom);
    }
    let kappa_r = 0.5 * kappa_max;

    let c1 = kappa_r * theta * (gains.a - gains.b - pi_bound);
    let c2 = theta * (gains.b - pi_bound - kappa_r * denom);
    let c3 = kappa_r * theta * gains.w1 * lam2 * lam2;
    let c4 = theta * lam2 * 1.0f64.min(gains.w2 * lam2 + gains.w3);
    for (name, value) in [("c1", c1), ("c2", c2), ("c3", c3), ("c4", c4)] {
        if value <= 0.0 {
            return Err(AnalysisError::GainsNoncompliant(name));
        }
    }
    let gamma1 = c1.min(c3).min(c4);
    let gamma2 = (theta * gains.a - kappa_r * r_level / (2.0 * theta * gains.a))
        .min(0.5 * (lam_n - kappa_r))
        .min(0.5 * theta * lam_n * lam_n * (gains.w1 + kappa_r * gains.w2));
    Ok(CertificateConstants {
        alpha1,
        alpha2,
        alpha2_entrywise,
        kappa_max,
        kappa_r,
        c1,
        c2,
        c3,
        c4,
        gamma1,
        gamma2,
        rho_r: gamma1 / gamma2,
        r_level,
    })
}

/// Largest pointwise gap between any two agents.
pub fn sup_gap(q: &AgentField) -> f64 {
    let v = q.values();
    let mut gap: f64 = 0.0;
    for j in 0..v.ncols() {
        let col = v.column(j);
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for &x in col.iter() {
            lo = lo.min(x);
            hi = hi.max(x);
        }
        gap = gap.max(hi - lo);
    }
    gap
}

/// Per-timestep functional record.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FunctionalSample {
    pub t: f64,
    pub v1: f64,
    pub v: f64,
    pub vbar: f64,
    pub vr: f64,
    pub d1_h2n: f64,
    pub mass: f64,
    pub sup_gap: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Trend {
    Converging,
    Diverging,
    Flat,
}

impl std::fmt::Display for Trend {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Trend::Converging => write!(f, "converging"),
            Trend::Diverging => write!(f, "diverging"),
            Trend::Flat => write!(f, "flat"),
        }
    }
}

/// Verdicts over a recorded run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MonitorReport {
    /// Worst per-step rise of `V1` beyond the dissipation slack
    /// `1e-9 * (1 + V1)`; non-positive means the verdict holds.
    pub v1_max_excess: f64,
    pub v1_nonincreasing: bool,
    pub mass_max_drift: f64,
    pub mass_constant: bool,
    pub trend: Trend,
    pub d1_first: f64,
    pub d1_last: f64,
    pub d1_min: f64,
    /// Worst observed `V_R(t) / (V_R(0) e^{-rho_R t})`; reported only, the
    /// continuum rate is conservative and not asserted.
    pub vr_decay_max_ratio: Option<f64>,
}

pub const V1_DISSIPATION_SLACK: f64 = 1e-9;
pub const MASS_DRIFT_TOL: f64 = 1e-5;

/// Scans a recorded functional series and produces the run verdicts.
pub fn monitor(samples: &[FunctionalSample], rho_r: Option<f64>) -> MonitorReport {
    assert!(!samples.is_empty(), "monitor requires at least one sample");
    let mut v1_max_excess = f64::NEG_INFINITY;
    for w in samples.windows(2) {
        let excess = w[1].v1 - w[0].v1 - V1_DISSIPATION_SLACK * (1.0 + w[0].v1);
        v1_max_excess = v1_max_excess.max(excess);
    }
    if samples.len() < 2 {
        v1_max_excess = 0.0;
    }
    let m0 = samples[0].mass;
    let mass_max_drift = samples
        .iter()
        .map(|s| (s.mass - m0).abs())
        .fold(0.0, f64::max);

    let window = (samples.len() / 10).max(1);
    let geo_mean = |chunk: &[FunctionalSample]| {
        let s: f64 = chunk
            .iter()
            .map(|s| s.d1_h2n.max(f64::MIN_POSITIVE).ln())
            .sum();
        (s / chunk.len() as f64).exp()
    };
    let chunk_means: Vec<f64> = samples.chunks(window).map(geo_mean).collect();
    let d1_first = chunk_means[0];
    let d1_last = *chunk_means.last().unwrap();
    let chunk_min = chunk_means.iter().cloned().fold(f64::INFINITY, f64::min);
    let d1_min = samples
        .iter()
        .map(|s| s.d1_h2n)
        .fold(f64::INFINITY, f64::min);
    // Divergence wins over the first/last comparison: a run can shrink
    // through a large transient and still blow up afterwards. Comparing
    // window means keeps in-window decay from looking like growth.
    let trend = if d1_last > 2.0 * chunk_min.max(f64::MIN_POSITIVE) {
        Trend::Diverging
    } else if d1_last <= 0.5 * d1_first {
        Trend::Converging
    } else {
        Trend::Flat
    };

    let vr_decay_max_ratio = rho_r.map(|rho| {
        let vr0 = samples[0].vr;
        samples
            .iter()
            .map(|s| {
                let bound = vr0 * (-rho * (s.t - samples[0].t)).exp();
                if bound > 0.0 {
                    s.vr / bound
                } else {
                    0.0
                }
            })
            .fold(0.0, f64::max)
    });

    MonitorReport {
        v1_max_excess,
        v1_nonincreasing: v1_max_excess <= 0.0,
        mass_max_drift,
        mass_constant: mass_max_drift <= MASS_DRIFT_TOL * (1.0 + m0.abs()),
        trend,
        d1_first,
        d1_last,
        d1_min,
        vr_decay_max_ratio,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{AgentField, Grid};
    use crate::graph::{centering, laplacian, spectrum, Topology};
    use std::f64::consts::PI;

    fn fig1() -> Topology {
        Topology::new(
            10,
            &[
                (1, 4),
                (1, 5),
                (2, 3),
                (3, 6),
                (4, 10),
                (2, 8),
                (6, 7),
                (9, 10),
                (4, 8),
                (6, 10),
            ],
        )
        .unwrap()
    }

    fn grid(n: usize) -> Grid {
        Grid::new(n).unwrap()
    }

    #[test]
    fn disagreement_of_identical_agents_vanishes() {
        let q = AgentField::sample_profile(grid(30), 4, |_, s| 3.0 + s * s);
        let z = AgentField::sample_profile(grid(30), 4, |_, s| s.cos());
        let d = disagreement(&q, &z, &centering(4));
        assert!(d.d1.values().amax() < 1e-12);
        assert!(d.d2.values().amax() < 1e-12);
    }

    #[test]
    fn disagreement_fixes_zero_mean_rows() {
        let q = AgentField::sample_profile(grid(30), 2, |i, s| {
            let f = (PI * s).sin();
            if i == 1 {
                f
            } else {
                -f
            }
        });
        let z = AgentField::zeros(2, grid(30));
        let d = disagreement(&q, &z, &centering(2));
        assert!((d.d1.values() - q.values()).amax() < 1e-12);
    }

    #[test]
    fn disagreement_columns_zero_sum() {
        let q = AgentField::sample_profile(grid(30), 10, |i, s| {
            10.0 + (i as f64 - 4.5) * (4.0 * PI * s).cos()
        });
        let z = AgentField::sample_profile(grid(30), 10, |i, s| (i as f64 * s).sin());
        let d = disagreement(&q, &z, &centering(10));
        let scale = q.h_norm(0).unwrap();
        for j in 0..30 {
            let sum1: f64 = d.d1.values().column(j).iter().sum();
            let sum2: f64 = d.d2.values().column(j).iter().sum();
            assert!(sum1.abs() <= 1e-9 * (1.0 + scale));
            assert!(sum2.abs() <= 1e-9 * (1.0 + scale));
        }
    }

    #[test]
    fn laplacian_absorbs_centering_on_trace() {
        let l = laplacian(&fig1());
        let q = AgentField::sample_profile(grid(30), 10, |i, s| i as f64 + (2.0 * s).cos());
        let z = AgentField::zeros(10, grid(30));
        let d = disagreement(&q, &z, &centering(10));
        let lhs = l.apply(&d.d1.boundary_trace(crate::field::Side::Right));
        let rhs = l.apply(&q.boundary_trace(crate::field::Side::Right));
        assert!((lhs - rhs).amax() < 1e-12);
    }

    #[test]
    fn average_target_constant_ics() {
        let q0 = AgentField::sample_profile(grid(30), 5, |_, _| 4.0);
        assert!((average_target(&q0).q_star - 4.0).abs() < 1e-12);
    }

    fn test1_ics(g: Grid) -> AgentField {
        let consts = [10.0, 10.0, 8.0, 10.0, 6.0, 10.0, 10.0, -5.0, 10.0, 10.0];
        AgentField::sample_profile(g, 10, move |i, s| {
            let w = 1.0 + 4.0 * (i as f64 - 1.0) / 9.0;
            if i == 10 {
                consts[i - 1] + w * (2.5 * PI * s).cos()
            } else {
                consts[i - 1] + w * (3.0 * PI * s).cos()
            }
        })
    }

    #[test]
    fn average_target_matches_closed_form() {
        // cos(3 pi s) integrates to 0; cos(2.5 pi s) to 1/(2.5 pi)
        let closed_form = (79.0 + 5.0 / (2.5 * PI)) / 10.0;
        let target = average_target(&test1_ics(grid(301)));
        assert!((target.q_star - closed_form).abs() < 5e-4);
        assert!((target.q_star - 7.9637).abs() < 5e-4);
    }

    #[test]
    fn v1_values() {
        assert_eq!(v1(&AgentField::zeros(3, grid(30))), 0.0);
        let c = AgentField::sample_profile(grid(30), 4, |_, _| 3.0);
        assert!((v1(&c) - 4.0 * 9.0 / 2.0).abs() < 1e-12);
        // analytic cross-check of the trigonometric profiles:
        // int (c + w cos(m pi s))^2 = c^2 + w^2/2 + 2 c w int cos
        let consts = [10.0, 10.0, 8.0, 10.0, 6.0, 10.0, 10.0, -5.0, 10.0, 10.0];
        let mut exact = 0.0;
        for i in 1..=10usize {
            let w = 1.0 + 4.0 * (i as f64 - 1.0) / 9.0;
            let c = consts[i - 1];
            let int_cos = if i == 10 { 1.0 / (2.5 * PI) } else { 0.0 };
            exact += c * c + w * w / 2.0 + 2.0 * c * w * int_cos;
        }
        let val = v1(&test1_ics(grid(1001)));
        assert!((val - 0.5 * exact).abs() < 1e-3 * exact);
    }

    #[test]
    fn v_functional_degenerate_cases() {
        let l = laplacian(&fig1());
        let params = PlantParams { diffusivity: 1.0 };
        let gains = SlidingGains { a: 40.0, b: 20.0, w1: 5.0, w2: 5.0, w3: 5.0 };
        let zero = DisagreementPair {
            d1: AgentField::zeros(10, grid(30)),
            d2: AgentField::zeros(10, grid(30)),
        };
        assert_eq!(v_functional(&zero, &l, &gains, &params), 0.0);

        // d2 = 0: only the boundary terms remain, exactly
        let q = AgentField::sample_profile(grid(30), 10, |i, _| i as f64);
        let d = DisagreementPair {
            d1: disagreement(&q, &AgentField::zeros(10, grid(30)), &centering(10)).d1,
            d2: AgentField::zeros(10, grid(30)),
        };
        let x = d.d1.boundary_trace(crate::field::Side::Right);
        let lx = l.apply(&x);
        let expected = 40.0 * lx.iter().map(|v| v.abs()).sum::<f64>() + 0.5 * 5.0 * lx.norm_squared();
        assert!((v_functional(&d, &l, &gains, &params) - expected).abs() < 1e-9);
    }

    #[test]
    fn certificate_constants_reference_setting() {
        let l = laplacian(&fig1());
        let s = spectrum(&l).unwrap();
        let gains = SlidingGains { a: 40.0, b: 20.0, w1: 5.0, w2: 5.0, w3: 5.0 };
        let params = PlantParams { diffusivity: 1.0 };
        let pi = 2.0 * PI + 8.0;
        let c = certificate_constants(&l, &s, &gains, &params, pi, 1000.0).unwrap();
        for v in [c.c1, c.c2, c.c3, c.c4, c.gamma1, c.gamma2, c.rho_r] {
            assert!(v > 0.0, "expected positive certificate constant, got {v}");
        }
        assert!(c.alpha1 <= c.alpha2);

        // b <= Pi collapses kappa_max to zero and kills c1
        let bad = SlidingGains { b: pi, ..gains };
        assert_eq!(
            certificate_constants(&l, &s, &bad, &params, pi, 1000.0),
            Err(AnalysisError::GainsNoncompliant("c1"))
        );
    }

    #[test]
    fn kappa_shrinks_with_level() {
        let l = laplacian(&fig1());
        let s = spectrum(&l).unwrap();
        let gains = SlidingGains { a: 40.0, b: 20.0, w1: 5.0, w2: 5.0, w3: 5.0 };
        let params = PlantParams { diffusivity: 1.0 };
        let pi = 2.0 * PI + 8.0;
        let small = certificate_constants(&l, &s, &gains, &params, pi, 10.0).unwrap();
        let large = certificate_constants(&l, &s, &gains, &params, pi, 1e9).unwrap();
        assert!(large.kappa_r < small.kappa_r);
        assert!(large.c1 < small.c1);
        assert!(large.c3 < small.c3);
    }

    #[test]
    fn vr_reduces_to_v_at_zero_kappa() {
        let l = laplacian(&fig1());
        let s = spectrum(&l).unwrap();
        let gains = SlidingGains { a: 40.0, b: 20.0, w1: 5.0, w2: 5.0, w3: 5.0 };
        let params = PlantParams { diffusivity: 1.0 };
        let pi = 2.0 * PI + 8.0;
        let mut consts = certificate_constants(&l, &s, &gains, &params, pi, 100.0).unwrap();
        let q = AgentField::sample_profile(grid(30), 10, |i, s| i as f64 * (PI * s).cos());
        let z = AgentField::sample_profile(grid(30), 10, |i, s| (i as f64 + s).sin());
        let d = disagreement(&q, &z, &centering(10));
        consts.kappa_r = 0.0;
        let vr = vr_functional(&d, &l, &gains, &params, &consts).unwrap();
        assert!((vr - v_functional(&d, &l, &gains, &params)).abs() < 1e-12);

        consts.kappa_r = consts.kappa_max * 2.0;
        assert!(matches!(
            vr_functional(&d, &l, &gains, &params, &consts),
            Err(AnalysisError::InadmissibleKappa { .. })
        ));
    }

    #[test]
    fn sup_gap_cases() {
        let same = AgentField::sample_profile(grid(30), 3, |_, s| s);
        assert_eq!(sup_gap(&same), 0.0);
        let shifted = AgentField::sample_profile(grid(30), 2, |i, _| if i == 1 { 2.0 } else { 3.0 });
        assert!((sup_gap(&shifted) - 1.0).abs() < 1e-15);
    }

    fn flat_sample(t: f64, d1: f64) -> FunctionalSample {
        FunctionalSample {
            t,
            v1: 1.0,
            v: 0.0,
            vbar: 0.0,
            vr: 0.0,
            d1_h2n: d1,
            mass: 5.0,
            sup_gap: 0.0,
        }
    }

    #[test]
    fn monitor_trends() {
        let converging: Vec<_> = (0..100)
            .map(|k| flat_sample(k as f64, 100.0 * (-0.1 * k as f64).exp()))
            .collect();
        assert_eq!(monitor(&converging, None).trend, Trend::Converging);

        // big transient decay followed by blowup
        let dipping: Vec<_> = (0..100)
            .map(|k| {
                let t = k as f64;
                flat_sample(t, 1000.0 * (-t).exp() + 0.01 * (0.1 * t).exp())
            })
            .collect();
        assert_eq!(monitor(&dipping, None).trend, Trend::Diverging);

        let flat: Vec<_> = (0..100).map(|k| flat_sample(k as f64, 3.0)).collect();
        assert_eq!(monitor(&flat, None).trend, Trend::Flat);
    }

    #[test]
    fn monitor_zero_functionals() {
        let samples: Vec<_> = (0..50).map(|k| {
            let mut s = flat_sample(k as f64, 0.0);
            s.v1 = 0.0;
            s.mass = 0.0;
            s
        }).collect();
        let report = monitor(&samples, None);
        assert!(report.v1_nonincreasing);
        assert!(report.mass_constant);
    }
}
