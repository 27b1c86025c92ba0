//! Stationary slow-flow solutions, their stability, and the frequency-response
//! curve with its fold-back branch.

use std::f64::consts::PI;

use nalgebra::Matrix2;

use crate::asymptotics::{backbone_frequency, FirstOrderParams};
use crate::error::{Error, Result};

const RESIDUAL_TOL: f64 = 1e-10;
const STEP_TOL: f64 = 1e-12;
const NEWTON_MAX_ITER: usize = 100;
const HALVING_LIMIT: usize = 20;

/// A stationary solution `(sigma, a, beta)` of the slow flow with its
/// linearization and stability verdict.
#[derive(Debug, Clone, Copy)]
pub struct StationaryPoint {
    pub sigma: f64,
    /// Stationary amplitude, > 0.
    pub a: f64,
    /// Stationary phase, normalized to (-pi, pi].
    pub beta: f64,
    pub jacobian: Matrix2<f64>,
    pub trace: f64,
    pub det: f64,
    pub stable: bool,
    /// |f(a, sigma)| achieved by the solver.
    pub residual: f64,
}

/// Branch a frequency-response point was produced on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Branch {
    /// Detuning continuation (the solid curve).
    Main,
    /// Amplitude continuation past the fold (the dotted upper branch).
    FoldBack,
}

/// Which end the detuning continuation is seeded from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BranchSeed {
    /// Linear-response amplitude estimate.
    #[default]
    Lower,
    /// Peak amplitude `f / (lambda omega)`.
    Upper,
}

/// Frequency-response curve: labelled points plus the maximal-amplitude point.
#[derive(Debug, Clone)]
pub struct FrfCurve {
    pub points: Vec<(StationaryPoint, Branch)>,
    pub peak: StationaryPoint,
}

/// Amplitude equation residual
/// `f(a, sigma) = lambda^2 a^2 omega^2 + a^2 (2 omega sigma - 3 d a^2 / 4)^2 - f^2`.
pub fn stationary_residual(params: &FirstOrderParams, a: f64, sigma: f64) -> f64 {
    let g = 2.0 * params.omega * sigma - 0.75 * params.d_eff * a * a;
    params.lambda * params.lambda * a * a * params.omega * params.omega + a * a * g * g
        - params.f * params.f
}

fn residual_derivative(params: &FirstOrderParams, a: f64, sigma: f64) -> f64 {
    let g = 2.0 * params.omega * sigma - 0.75 * params.d_eff * a * a;
    2.0 * a * params.lambda * params.lambda * params.omega * params.omega + 2.0 * a * g * g
        - 3.0 * params.d_eff * a * a * a * g
}

fn normalize_angle(beta: f64) -> f64 {
    // wrap into (-pi, pi]
    let mut b = beta.rem_euclid(2.0 * PI);
    if b > PI {
        b -= 2.0 * PI;
    }
    b
}

fn point_from_amplitude(params: &FirstOrderParams, a: f64, sigma: f64) -> StationaryPoint {
    let params = &FirstOrderParams { sigma, ..*params };
    let sin_b = -params.lambda * a * params.omega / params.f;
    let cos_b = -a * (2.0 * params.omega * sigma - 0.75 * params.d_eff * a * a) / params.f;
    let beta = normalize_angle(sin_b.atan2(cos_b));
    let jacobian = stationary_jacobian(params, a, beta).expect("a > 0 by construction");
    let trace = jacobian.trace();
    let det = jacobian.determinant();
    StationaryPoint {
        sigma,
        a,
        beta,
        jacobian,
        trace,
        det,
        stable: classify_stability(&jacobian),
        residual: stationary_residual(params, a, sigma).abs(),
    }
}

/// Damped Newton on `f(a, sigma)` in the amplitude, warm-started at `a_guess`;
/// phase and stability are reconstructed from the stationary relations.
pub fn stationary_solve(
    params: &FirstOrderParams,
    sigma: f64,
    a_guess: f64,
) -> Result<StationaryPoint> {
    if params.f == 0.0 {
        return Err(Error::invalid(
            "stationary solve needs nonzero forcing; use the free backbone instead",
        ));
    }
    if !(a_guess > 0.0) {
        return Err(Error::invalid("a_guess must be > 0"));
    }
    let scale = params.f * params.f;
    let mut a = a_guess;
    let mut res = stationary_residual(params, a, sigma);
    for _ in 0..NEWTON_MAX_ITER {
        if res.abs() <= RESIDUAL_TOL * scale.max(1.0) {
            return Ok(point_from_amplitude(params, a, sigma));
        }
        let slope = residual_derivative(params, a, sigma);
        if slope == 0.0 || !slope.is_finite() {
            break;
        }
        let mut step = -res / slope;
        let mut accepted = false;
        for _ in 0..HALVING_LIMIT {
            let trial = a + step;
            if trial > 0.0 {
                let trial_res = stationary_residual(params, trial, sigma);
                if trial_res.abs() < res.abs() {
                    if step.abs() <= STEP_TOL * a.max(1.0)
                        && trial_res.abs() <= RESIDUAL_TOL * scale.max(1.0)
                    {
                        return Ok(point_from_amplitude(params, trial, sigma));
                    }
                    a = trial;
                    res = trial_res;
                    accepted = true;
                    break;
                }
            }
            step *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    if res.abs() <= RESIDUAL_TOL * scale.max(1.0) {
        return Ok(point_from_amplitude(params, a, sigma));
    }
    Err(Error::NoConvergence {
        iterations: NEWTON_MAX_ITER,
        residual: res.abs(),
    })
}

/// Linearization of the slow flow about `(a, beta)`:
/// rows are `(D1 a, D1 beta)`, columns `(d/da, d/dbeta)`.
pub fn stationary_jacobian(params: &FirstOrderParams, a: f64, beta: f64) -> Result<Matrix2<f64>> {
    if a <= 0.0 {
        return Err(Error::domain("Jacobian requires a > 0"));
    }
    let FirstOrderParams {
        omega,
        d_eff,
        lambda,
        f,
        sigma,
        ..
    } = *params;
    Ok(Matrix2::new(
        -lambda / 2.0,
        -f * beta.cos() / (2.0 * omega),
        9.0 * d_eff * a / (8.0 * omega) - sigma / a,
        f * beta.sin() / (2.0 * omega * a),
    ))
}

/// Stable iff `tr J < 0` and `det J > 0`.
pub fn classify_stability(jacobian: &Matrix2<f64>) -> bool {
    jacobian.trace() < 0.0 && jacobian.determinant() > 0.0
}

/// Detuning threshold below which the stationary point is stable.
#[derive(Debug, Clone, Copy)]
pub struct SigmaStar {
    pub value: f64,
    /// True when `9 d^2 a^4 / (16 w^2) < lambda^2`: the square root is absent
    /// and the point is stable for all `sigma <= 3 d a^2 / (4 w)`.
    pub discriminant_negative: bool,
}

/// Stability threshold
/// `sigma* = 3 d a^2 / (4 w) - sqrt(9 d^2 a^4 / (16 w^2) - lambda^2) / 2`.
pub fn sigma_star(params: &FirstOrderParams, a: f64) -> SigmaStar {
    let base = 0.75 * params.d_eff * a * a / params.omega;
    let disc = (9.0 / 16.0) * params.d_eff * params.d_eff * a.powi(4)
        / (params.omega * params.omega)
        - params.lambda * params.lambda;
    if disc < 0.0 {
        SigmaStar {
            value: base,
            discriminant_negative: true,
        }
    } else {
        SigmaStar {
            value: base - 0.5 * disc.sqrt(),
            discriminant_negative: false,
        }
    }
}

/// Resonance peak in closed form: `a = f / (lambda omega)`,
/// `sigma = 3 d a^2 / (8 omega)`, `beta = -pi/2`.
pub fn peak_point(params: &FirstOrderParams) -> Result<StationaryPoint> {
    if params.lambda <= 0.0 || params.f <= 0.0 {
        return Err(Error::invalid("peak point requires lambda > 0 and f > 0"));
    }
    let a = params.f / (params.lambda * params.omega);
    let sigma = 3.0 * params.d_eff * a * a / (8.0 * params.omega);
    let peak_params = FirstOrderParams { sigma, ..*params };
    let point = point_from_amplitude(&peak_params, a, sigma);
    // the backbone crosses the peak: nu_eps(a) = omega + eps sigma
    debug_assert!(
        (backbone_frequency(params, a) - (params.omega + params.epsilon * sigma)).abs()
            < 1e-12 * params.omega
    );
    Ok(point)
}

/// Traces the frequency-response curve over `[sigma_min, sigma_max]`.
///
/// Phase one continues in the detuning with warm-started Newton; when the
/// solver fails or jumps branches near the fold, phase two continues in
/// decreasing amplitude from the last point, solving `f(a, sigma) = 0` for
/// the detuning in closed form.
pub fn frf_trace(
    params: &FirstOrderParams,
    sigma_min: f64,
    sigma_max: f64,
    n_sigma: usize,
    seed: BranchSeed,
) -> Result<FrfCurve> {
    if !(sigma_min < sigma_max) || n_sigma < 2 {
        return Err(Error::invalid(
            "need sigma_min < sigma_max and n_sigma >= 2",
        ));
    }
    if params.f == 0.0 {
        return Err(Error::invalid("frf trace needs nonzero forcing"));
    }
    let lam_w = params.lambda * params.omega;
    let linear_amp = |sigma: f64| {
        params.f / (params.omega * (params.lambda * params.lambda + 4.0 * sigma * sigma).sqrt())
    };
    let mut points: Vec<(StationaryPoint, Branch)> = Vec::new();
    let dsigma = (sigma_max - sigma_min) / (n_sigma - 1) as f64;
    let mut guess = match seed {
        BranchSeed::Lower => linear_amp(sigma_min),
        BranchSeed::Upper => {
            if lam_w > 0.0 {
                params.f / lam_w
            } else {
                linear_amp(sigma_min)
            }
        }
    };
    let mut last_a = guess;
    for i in 0..n_sigma {
        let sigma = sigma_min + i as f64 * dsigma;
        match stationary_solve(params, sigma, guess) {
            Ok(pt) => {
                // a large jump means Newton slid onto another branch
                if !points.is_empty() && (pt.a - last_a).abs() > 0.5 * (1.0 + last_a) {
                    break;
                }
                last_a = pt.a;
                guess = pt.a;
                points.push((pt, Branch::Main));
            }
            Err(_) => break,
        }
    }
    if points.is_empty() {
        return Err(Error::EmptyCurve);
    }

    // fold-back branch: amplitude continuation downward from the last main
    // point, keeping the high-detuning root of f(a, .) = 0
    if params.lambda > 0.0 && params.d_eff != 0.0 {
        let a_start = last_a;
        let a_floor = linear_amp(sigma_max).min(a_start) * 0.5;
        let n_a = n_sigma;
        let da = (a_start - a_floor) / n_a as f64;
        if da > 0.0 {
            for j in 1..=n_a {
                let a = a_start - j as f64 * da;
                if a <= 0.0 {
                    break;
                }
                let rad = params.f * params.f - lam_w * lam_w * a * a;
                if rad < 0.0 {
                    continue;
                }
                let sigma = (0.75 * params.d_eff * a * a + rad.sqrt() / a) / (2.0 * params.omega);
                if sigma > sigma_max || sigma < sigma_min {
                    continue;
                }
                let branch_params = FirstOrderParams { sigma, ..*params };
                points.push((
                    point_from_amplitude(&branch_params, a, sigma),
                    Branch::FoldBack,
                ));
            }
        }
    }

    let peak = points
        .iter()
        .map(|(p, _)| *p)
        .max_by(|x, y| x.a.total_cmp(&y.a))
        .ok_or(Error::EmptyCurve)?;
    Ok(FrfCurve { points, peak })
}

/// Detuning at which the free backbone passes amplitude `a`
/// (the red dotted overlay in the response plot).
pub fn backbone_detuning(params: &FirstOrderParams, a: f64) -> f64 {
    3.0 * params.d_eff * a * a / (8.0 * params.omega)
}
