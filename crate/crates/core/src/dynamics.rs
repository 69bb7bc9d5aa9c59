//! Method-of-lines semi-discretization of the boundary-actuated vector heat
//! equation and the fixed-step explicit Euler loop driving a full run.
//!
//! Neumann conditions are imposed through second-order ghost (mirror)
//! nodes: `q[-1] = q[1]` at the insulated end and
//! `q[n] = q[n-2] + 2 h u_i` at the actuated end.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;
use thiserror::Error;

use crate::analysis::{
    disagreement, v_bar, v_functional, v1, vr_functional, sup_gap, CertificateConstants,
    FunctionalSample,
};
use crate::disturbance::DisturbanceSpec;
use crate::field::{AgentField, FieldError, Grid, Side};
use crate::graph::{CenteringMatrix, LaplacianMatrix};
use crate::protocols::{linear_control, sliding_rate_parts, ControlState, SlidingGains};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("timestep {dt:.3e} violates the stability limit {limit:.3e}")]
    CflViolation { dt: f64, limit: f64 },
    #[error("initial conditions incompatible with the boundary conditions: residual {residual:.3e} exceeds {tol:.3e}")]
    IncompatibleICs { residual: f64, tol: f64 },
    #[error("numerical blowup at t = {time:.6}")]
    NumericalBlowup { time: f64, partial: Box<RunData> },
    #[error(transparent)]
    Field(#[from] FieldError),
}

/// Plant parameters shared by all agents.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PlantParams {
    pub diffusivity: f64,
}

/// Explicit-scheme stability bound `h^2 / (2 theta)`.
pub fn cfl_limit(params: &PlantParams, grid: &Grid) -> f64 {
    let h = grid.spacing();
    h * h / (2.0 * params.diffusivity)
}

/// Right-hand side of the semi-discrete heat equation with ghost-node
/// Neumann boundary treatment; `u` is the effective boundary flux at the
/// actuated end (control plus disturbance).
pub fn heat_rhs(q: &AgentField, u: &DVector<f64>, params: &PlantParams) -> AgentField {
    let grid = q.grid();
    let n = grid.node_count();
    let h = grid.spacing();
    let theta = params.diffusivity;
    let v = q.values();
    let mut out = DMatrix::zeros(v.nrows(), n);
    let h2 = h * h;
    for i in 0..v.nrows() {
        out[(i, 0)] = theta * (2.0 * v[(i, 1)] - 2.0 * v[(i, 0)]) / h2;
        for j in 1..n - 1 {
            out[(i, j)] = theta * (v[(i, j - 1)] - 2.0 * v[(i, j)] + v[(i, j + 1)]) / h2;
        }
        out[(i, n - 1)] =
            theta * (2.0 * v[(i, n - 2)] - 2.0 * v[(i, n - 1)] + 2.0 * h * u[i]) / h2;
    }
    // assemble without the finiteness check so an overflowing state
    // propagates into the step and is caught by blowup detection
    let mut field = AgentField::zeros(v.nrows(), grid);
    *field.values_mut() = out;
    field
}

/// Field state plus cached time derivative and the control in force.
#[derive(Debug, Clone)]
pub struct NetworkState {
    pub q: AgentField,
    /// RHS at the current state; fresh right after a step.
    pub z: AgentField,
    pub u: DVector<f64>,
    pub time: f64,
}

/// One explicit Euler update; `rhs` becomes the fresh derivative cache.
pub fn euler_step(state: &NetworkState, rhs: &AgentField, dt: f64) -> NetworkState {
    NetworkState {
        q: AgentField::new(state.q.values() + rhs.values() * dt, state.q.grid())
            .unwrap_or_else(|_| {
                // keep the raw values; blowup detection happens in the loop
                let mut f = AgentField::zeros(state.q.agent_count(), state.q.grid());
                *f.values_mut() = state.q.values() + rhs.values() * dt;
                f
            }),
        z: rhs.clone(),
        u: state.u.clone(),
        time: state.time + dt,
    }
}

/// Fixed-step solver configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SimConfig {
    pub dt: f64,
    pub t_end: f64,
    pub record_stride: usize,
}

/// Which local interaction law closes the loop.
#[derive(Debug, Clone, PartialEq)]
pub enum Protocol {
    Linear,
    Sliding {
        gains: SlidingGains,
        dead_band: f64,
    },
}

impl Protocol {
    pub fn gains(&self) -> SlidingGains {
        match self {
            Protocol::Linear => SlidingGains::zero(),
            Protocol::Sliding { gains, .. } => *gains,
        }
    }
}

/// Everything a run needs, fully resolved.
pub struct SimulationSpec {
    pub laplacian: LaplacianMatrix,
    pub centering: CenteringMatrix,
    pub initial: AgentField,
    pub protocol: Protocol,
    pub disturbance: DisturbanceSpec,
    pub params: PlantParams,
    pub config: SimConfig,
    pub options: SimOptions,
}

#[derive(Debug, Clone, Default)]
pub struct SimOptions {
    pub allow_unstable: bool,
    /// Turn an incompatible-ICs diagnosis into a hard error instead of a
    /// recorded warning.
    pub strict_compatibility: bool,
    /// Snapshot the whole field near these times.
    pub snapshot_times: Vec<f64>,
    /// Keep full-field frames every this many steps (for surface plots).
    pub surface_stride: Option<usize>,
    /// Certificate used for the `V_R` column, when available.
    pub certificate: Option<CertificateConstants>,
}

/// Boundary-trace record at one sample instant.
#[derive(Debug, Clone)]
pub struct TraceSample {
    pub t: f64,
    pub q_right: DVector<f64>,
    pub u: DVector<f64>,
    pub psi: DVector<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RunOutcome {
    Completed,
    Blowup { time: f64 },
}

/// Raw recorded output of one simulation run.
#[derive(Debug, Clone)]
pub struct RunData {
    pub samples: Vec<FunctionalSample>,
    pub traces: Vec<TraceSample>,
    pub snapshots: Vec<(f64, AgentField)>,
    pub frames: Vec<(f64, AgentField)>,
    pub final_state: Option<NetworkState>,
    pub outcome: RunOutcome,
    /// Discrete compatibility residual of the ICs against the BCs at t = 0.
    pub compatibility_residual: f64,
    pub compatibility_tol: f64,
    pub ics_compatible: bool,
    /// Worst excess of `||du||_inf` over the protocol rate bound
    /// (sliding runs only); non-positive means the continuity bound held.
    pub max_rate_excess: Option<f64>,
}

const COMPAT_TOL: f64 = 1e-6;

/// Runs the closed-loop network over the configured horizon.
///
/// Per step: evaluate the disturbance, evaluate the protocol (integrating
/// its rate state for the dynamic law), form the plant RHS with the
/// effective boundary input, Euler-step, and record every
/// `record_stride` steps.
pub fn simulate(spec: &SimulationSpec) -> Result<RunData, SimError> {
    let grid = spec.initial.grid();
    let agent_count = spec.initial.agent_count();
    let limit = cfl_limit(&spec.params, &grid);
    let dt = spec.config.dt;
    if dt > limit && !spec.options.allow_unstable {
        return Err(SimError::CflViolation { dt, limit });
    }

    // IC/BC compatibility at t = 0
    let psi0 = spec.disturbance.eval(0.0);
    let u0 = match &spec.protocol {
        Protocol::Linear => linear_control(&spec.initial.boundary_trace(Side::Right), &spec.laplacian),
        Protocol::Sliding { .. } => DVector::zeros(agent_count),
    };
    let q0_s = spec.initial.spatial_derivative(1)?;
    let left_res = q0_s.boundary_trace(Side::Left).amax();
    let right_res = (q0_s.boundary_trace(Side::Right) - (&u0 + &psi0)).amax();
    let compatibility_residual = left_res.max(right_res);
    let compatibility_tol = COMPAT_TOL * (1.0 + spec.initial.h_norm(0)?);
    let ics_compatible = compatibility_residual <= compatibility_tol;
    if !ics_compatible && spec.options.strict_compatibility {
        return Err(SimError::IncompatibleICs {
            residual: compatibility_residual,
            tol: compatibility_tol,
        });
    }

    let n_steps = (spec.config.t_end / dt).round() as usize;
    let gains = spec.protocol.gains();
    let mut control = ControlState::zero(agent_count);
    let mut q = spec.initial.clone();
    let mut snapshot_times = spec.options.snapshot_times.clone();
    snapshot_times.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut next_snapshot = 0usize;

    let mut data = RunData {
        samples: Vec::new(),
        traces: Vec::new(),
        snapshots: Vec::new(),
        frames: Vec::new(),
        final_state: None,
        outcome: RunOutcome::Completed,
        compatibility_residual,
        compatibility_tol,
        ics_compatible,
        max_rate_excess: None,
    };
    let mut max_rate_excess = f64::NEG_INFINITY;
    let is_sliding = matches!(spec.protocol, Protocol::Sliding { .. });

    for step in 0..=n_steps {
        let t = step as f64 * dt;
        let psi = spec.disturbance.eval(t);
        let u = match &spec.protocol {
            Protocol::Linear => linear_control(&q.boundary_trace(Side::Right), &spec.laplacian),
            Protocol::Sliding { .. } => control.control(),
        };
        let effective = &u + &psi;
        let z = heat_rhs(&q, &effective, &spec.params);
        if !z.is_finite() {
            if is_sliding {
                data.max_rate_excess = Some(max_rate_excess);
            }
            data.outcome = RunOutcome::Blowup { time: t };
            return Err(SimError::NumericalBlowup {
                time: t,
                partial: Box::new(data),
            });
        }

        if step % spec.config.record_stride == 0 || step == n_steps {
            let d = disagreement(&q, &z, &spec.centering);
            let v = v_functional(&d, &spec.laplacian, &gains, &spec.params);
            let vbar = v_bar(&d, &spec.laplacian, &gains, &spec.params);
            let vr = match &spec.options.certificate {
                Some(c) => {
                    vr_functional(&d, &spec.laplacian, &gains, &spec.params, c).unwrap_or(v)
                }
                None => v,
            };
            data.samples.push(FunctionalSample {
                t,
                v1: v1(&q),
                v,
                vbar,
                vr,
                d1_h2n: d.d1.h_norm(2)?,
                mass: q.total_mass(),
                sup_gap: sup_gap(&q),
            });
            data.traces.push(TraceSample {
                t,
                q_right: q.boundary_trace(Side::Right),
                u: u.clone(),
                psi: psi.clone(),
            });
        }
        while next_snapshot < snapshot_times.len() && snapshot_times[next_snapshot] <= t + 0.5 * dt
        {
            data.snapshots.push((t, q.clone()));
            next_snapshot += 1;
        }
        if let Some(stride) = spec.options.surface_stride {
            if step % stride == 0 || step == n_steps {
                data.frames.push((t, q.clone()));
            }
        }
        if step == n_steps {
            data.final_state = Some(NetworkState { q, z, u, time: t });
            break;
        }

        // advance the control integrators, then step the plant with the
        // updated control
        let u_next = match &spec.protocol {
            Protocol::Linear => u,
            Protocol::Sliding { gains, dead_band } => {
                let (r1, r2) = sliding_rate_parts(
                    &q.boundary_trace(Side::Right),
                    &z.boundary_trace(Side::Right),
                    &spec.laplacian,
                    gains,
                    *dead_band,
                );
                let lq = spec.laplacian.apply(&q.boundary_trace(Side::Right));
                let lz = spec.laplacian.apply(&z.boundary_trace(Side::Right));
                let bound = gains.a
                    + gains.b
                    + gains.w1 * lq.amax()
                    + gains.w2 * lz.amax()
                    + gains.w3 * z.boundary_trace(Side::Right).amax();
                let delta = (&r1 + &r2) * dt;
                // the 1e-12 relative slack absorbs summation-order
                // round-off; a real violation is O(dt * bound)
                max_rate_excess =
                    max_rate_excess.max(delta.amax() - dt * bound * (1.0 + 1e-12));
                control.advance(&r1, &r2, dt);
                control.control()
            }
        };
        let effective_next = &u_next + &psi;
        let rhs = heat_rhs(&q, &effective_next, &spec.params);
        let mut stepped = AgentField::zeros(agent_count, grid);
        *stepped.values_mut() = q.values() + rhs.values() * dt;
        if let Some((agent, node)) = stepped.first_non_finite() {
            let _ = (agent, node);
            if is_sliding {
                data.max_rate_excess = Some(max_rate_excess);
            }
            data.outcome = RunOutcome::Blowup { time: t + dt };
            return Err(SimError::NumericalBlowup {
                time: t + dt,
                partial: Box::new(data),
            });
        }
        q = stepped;
    }
    if is_sliding {
        data.max_rate_excess = Some(max_rate_excess);
    }
    Ok(data)
}
