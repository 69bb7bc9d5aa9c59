//! Local interaction laws: the static linear averaging law and the dynamic
//! sliding-mode law with integrator smoothing, plus gain validation.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::graph::LaplacianMatrix;

/// Tuning constants of the dynamic protocol rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlidingGains {
    pub a: f64,
    pub b: f64,
    pub w1: f64,
    pub w2: f64,
    pub w3: f64,
}

impl SlidingGains {
    pub fn zero() -> Self {
        SlidingGains {
            a: 0.0,
            b: 0.0,
            w1: 0.0,
            w2: 0.0,
            w3: 0.0,
        }
    }
}

/// Integrator state of the dynamic protocol; both components start at zero
/// so the control signal is continuous from t = 0.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlState {
    u1: DVector<f64>,
    u2: DVector<f64>,
}

impl ControlState {
    pub fn zero(agent_count: usize) -> Self {
        ControlState {
            u1: DVector::zeros(agent_count),
            u2: DVector::zeros(agent_count),
        }
    }

    pub fn u1(&self) -> &DVector<f64> {
        &self.u1
    }

    pub fn u2(&self) -> &DVector<f64> {
        &self.u2
    }

    pub fn control(&self) -> DVector<f64> {
        &self.u1 + &self.u2
    }

    /// Explicit Euler on both integrator components.
    pub fn advance(&mut self, rate1: &DVector<f64>, rate2: &DVector<f64>, dt: f64) {
        self.u1 += rate1 * dt;
        self.u2 += rate2 * dt;
    }
}

/// Componentwise sign with a dead band; the value at zero (and inside the
/// band) is the 0 selection from the multivalued definition.
pub fn sign_vec(x: &DVector<f64>, dead_band: f64) -> DVector<f64> {
    x.map(|v| {
        if v > dead_band {
            1.0
        } else if v < -dead_band {
            -1.0
        } else {
            0.0
        }
    })
}

/// Static protocol `U = -L * Q(1, t)`.
pub fn linear_control(q_right: &DVector<f64>, laplacian: &LaplacianMatrix) -> DVector<f64> {
    -laplacian.apply(q_right)
}

/// The two components of the dynamic protocol rate: the discontinuous part
/// `-a Sign(L q) - b Sign(L q_t)` and the continuous damping part
/// `-w1 L q - w2 L q_t - w3 q_t`, all read at the actuated boundary.
pub fn sliding_rate_parts(
    q_right: &DVector<f64>,
    qt_right: &DVector<f64>,
    laplacian: &LaplacianMatrix,
    gains: &SlidingGains,
    dead_band: f64,
) -> (DVector<f64>, DVector<f64>) {
    let lq = laplacian.apply(q_right);
    let lqt = laplacian.apply(qt_right);
    let rate1 = sign_vec(&lq, dead_band) * (-gains.a) + sign_vec(&lqt, dead_band) * (-gains.b);
    let rate2 = lq * (-gains.w1) + lqt * (-gains.w2) + qt_right * (-gains.w3);
    (rate1, rate2)
}

/// Combined protocol rate `U'`.
pub fn sliding_rate(
    q_right: &DVector<f64>,
    qt_right: &DVector<f64>,
    laplacian: &LaplacianMatrix,
    gains: &SlidingGains,
    dead_band: f64,
) -> DVector<f64> {
    let (r1, r2) = sliding_rate_parts(q_right, qt_right, laplacian, gains, dead_band);
    r1 + r2
}

/// One inequality of the tuning rule, with its margin.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GainCheck {
    pub name: &'static str,
    pub margin: f64,
    pub pass: bool,
}

/// Result of checking the tuning rule `a > b + Pi, b > Pi, w1..w3 > 0`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GainsReport {
    pub checks: Vec<GainCheck>,
}

impl GainsReport {
    pub fn compliant(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn failures(&self) -> Vec<&'static str> {
        self.checks
            .iter()
            .filter(|c| !c.pass)
            .map(|c| c.name)
            .collect()
    }
}

pub fn validate_gains(gains: &SlidingGains, pi_bound: f64) -> GainsReport {
    let check = |name, margin: f64| GainCheck {
        name,
        margin,
        pass: margin > 0.0,
    };
    GainsReport {
        checks: vec![
            check("a > b + Pi", gains.a - gains.b - pi_bound),
            check("b > Pi", gains.b - pi_bound),
            check("w1 > 0", gains.w1),
            check("w2 > 0", gains.w2),
            check("w3 > 0", gains.w3),
        ],
    }
}
