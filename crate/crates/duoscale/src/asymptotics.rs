//! First-order double-scale approximation: backbone frequency for free
//! vibration and the slow amplitude/phase flow for forced vibration.
//!
//! Everything here is written for the reduced single-mode problem; an N-DOF
//! chain enters through [`FirstOrderParams::from_system`], which replaces the
//! cubic coefficient by `d_eff = d * (delta_p phi_1)^4`.

use crate::error::{Error, Result};
use crate::model::{ChainSystem, ModalBasis};

/// Reduced single-mode parameter set feeding all slow-flow formulas.
#[derive(Debug, Clone, Copy)]
pub struct FirstOrderParams {
    /// Linear modal frequency, > 0.
    pub omega: f64,
    /// Quadratic coefficient; absent from first-order formulas, kept for
    /// remainder evaluation.
    pub c_eff: f64,
    /// Effective cubic coefficient `d_tilde = d * (delta_p phi_1)^4`
    /// (equal to `d` for the 1-DOF problem).
    pub d_eff: f64,
    /// Modal damping rate, >= 0.
    pub lambda: f64,
    /// Modal forcing amplitude `f_1 = phi_1^T F` (zero for free vibration).
    pub f: f64,
    /// Detuning.
    pub sigma: f64,
    /// Small parameter, > 0.
    pub epsilon: f64,
}

impl FirstOrderParams {
    pub fn new(
        omega: f64,
        c_eff: f64,
        d_eff: f64,
        lambda: f64,
        f: f64,
        sigma: f64,
        epsilon: f64,
    ) -> Result<Self> {
        if !(omega > 0.0) {
            return Err(Error::invalid("omega must be > 0"));
        }
        if !(epsilon > 0.0) {
            return Err(Error::invalid("epsilon must be > 0"));
        }
        if lambda < 0.0 {
            return Err(Error::invalid("lambda must be >= 0"));
        }
        Ok(FirstOrderParams {
            omega,
            c_eff,
            d_eff,
            lambda,
            f,
            sigma,
            epsilon,
        })
    }

    /// Reduces a chain system to its driven mode.
    pub fn from_system(system: &ChainSystem) -> Result<Self> {
        let basis = system.basis();
        let mode = system.driven_mode - 1;
        let gap = basis.gaps[mode];
        let f_modal = basis.modes.column(mode).dot(&system.forcing_amplitude);
        FirstOrderParams::new(
            basis.frequencies[mode],
            system.spring.c * gap.powi(3),
            system.spring.d * gap.powi(4),
            system.modal_damping[mode],
            f_modal,
            system.forcing_detuning,
            system.spring.epsilon,
        )
    }

    /// Drive frequency `omega + eps * sigma`.
    pub fn drive_frequency(&self) -> f64 {
        self.omega + self.epsilon * self.sigma
    }
}

/// Slow amplitude/phase state; the fast phase is `theta = T0 + beta` with
/// `T0 = drive_frequency * t`, `T1 = eps * t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AmplitudePhase {
    /// Slow amplitude, >= 0.
    pub a: f64,
    /// Slow phase (radians).
    pub beta: f64,
}

impl AmplitudePhase {
    pub fn new(a: f64, beta: f64) -> Result<Self> {
        if a < 0.0 {
            return Err(Error::invalid("amplitude must be >= 0"));
        }
        Ok(AmplitudePhase { a, beta })
    }
}

/// Effective cubic coefficient `d * (delta_p phi_1)^4`; invariant under the
/// sign of the mode shape.
pub fn effective_cubic(basis: &ModalBasis, driven_mode: usize, d: f64) -> f64 {
    d * basis.gaps[driven_mode - 1].powi(4)
}

/// Amplitude-dependent free-vibration frequency
/// `nu_eps = omega + 3 eps d_eff a0^2 / (8 omega)`.
pub fn backbone_frequency(params: &FirstOrderParams, a0: f64) -> f64 {
    params.omega + 3.0 * params.epsilon * params.d_eff * a0 * a0 / (8.0 * params.omega)
}

/// First-order free solution `eps * a0 * cos(nu_eps t)`.
pub fn free_first_order(params: &FirstOrderParams, a0: f64, t: f64) -> f64 {
    params.epsilon * a0 * (backbone_frequency(params, a0) * t).cos()
}

/// Slow-flow right-hand side in explicit form:
/// `D1 a = -lambda a / 2 - f sin(beta) / (2 omega)` and
/// `D1 beta = -sigma + 3 d_eff a^2 / (8 omega) - f cos(beta) / (2 a omega)`.
///
/// The phase equation divides by `a`, so `a > 0` is required.
pub fn amplitude_phase_rhs(
    params: &FirstOrderParams,
    state: &AmplitudePhase,
) -> Result<(f64, f64)> {
    if state.a <= 0.0 {
        return Err(Error::domain(
            "slow-flow phase equation is singular at a = 0",
        ));
    }
    let FirstOrderParams {
        omega,
        d_eff,
        lambda,
        f,
        sigma,
        ..
    } = *params;
    let a = state.a;
    let da = -lambda * a / 2.0 - f * state.beta.sin() / (2.0 * omega);
    let dbeta =
        -sigma + 3.0 * d_eff * a * a / (8.0 * omega) - f * state.beta.cos() / (2.0 * a * omega);
    Ok((da, dbeta))
}

/// Slow-flow trajectory sampled on the `T1` grid.
#[derive(Debug, Clone)]
pub struct SlowFlow {
    pub dt1: f64,
    pub states: Vec<AmplitudePhase>,
    /// True when integration stopped because `a` dropped below 1e-9.
    pub halted: bool,
}

impl SlowFlow {
    pub fn final_state(&self) -> AmplitudePhase {
        *self
            .states
            .last()
            .expect("slow flow holds at least the initial state")
    }
}

const AMPLITUDE_FLOOR: f64 = 1e-9;

/// Classical RK4 on the slow flow over `[0, t1_end]`.
pub fn slow_flow_integrate(
    params: &FirstOrderParams,
    state0: AmplitudePhase,
    t1_end: f64,
    dt1: f64,
) -> Result<SlowFlow> {
    if state0.a <= 0.0 {
        return Err(Error::domain("initial amplitude must be > 0"));
    }
    if !(dt1 > 0.0) {
        return Err(Error::invalid("dt1 must be > 0"));
    }
    let steps = (t1_end / dt1).ceil() as usize;
    let mut states = Vec::with_capacity(steps + 1);
    states.push(state0);
    let mut s = state0;
    let mut halted = false;
    for _ in 0..steps {
        let next = rk4_step(params, s, dt1)?;
        if !next.a.is_finite() || !next.beta.is_finite() {
            return Err(Error::IntegrationFailure {
                step: states.len(),
                reason: "slow-flow state became non-finite".into(),
            });
        }
        if next.a < AMPLITUDE_FLOOR {
            halted = true;
            break;
        }
        states.push(next);
        s = next;
    }
    Ok(SlowFlow {
        dt1,
        states,
        halted,
    })
}

/// Default slow-flow step: a hundredth of the damping time constant.
pub fn default_slow_flow_step(params: &FirstOrderParams) -> f64 {
    if params.lambda > 0.0 {
        0.01 * (2.0 / params.lambda)
    } else {
        0.01
    }
}

fn rk4_step(params: &FirstOrderParams, s: AmplitudePhase, h: f64) -> Result<AmplitudePhase> {
    let eval = |a: f64, beta: f64| -> Result<(f64, f64)> {
        amplitude_phase_rhs(
            params,
            &AmplitudePhase {
                a: a.max(AMPLITUDE_FLOOR),
                beta,
            },
        )
    };
    let (k1a, k1b) = eval(s.a, s.beta)?;
    let (k2a, k2b) = eval(s.a + 0.5 * h * k1a, s.beta + 0.5 * h * k1b)?;
    let (k3a, k3b) = eval(s.a + 0.5 * h * k2a, s.beta + 0.5 * h * k2b)?;
    let (k4a, k4b) = eval(s.a + h * k3a, s.beta + h * k3b)?;
    Ok(AmplitudePhase {
        a: s.a + h / 6.0 * (k1a + 2.0 * k2a + 2.0 * k3a + k4a),
        beta: s.beta + h / 6.0 * (k1b + 2.0 * k2b + 2.0 * k3b + k4b),
    })
}

/// First-order forced solution `eps * a * cos(omega_tilde t + beta)`.
pub fn forced_first_order(params: &FirstOrderParams, state: &AmplitudePhase, t: f64) -> f64 {
    params.epsilon * state.a * (params.drive_frequency() * t + state.beta).cos()
}
