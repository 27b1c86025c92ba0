//! Time-domain integration of the full nonlinear equations, remainder
//! extraction against the first-order approximation, and the Gronwall
//! utilities backing the convergence checks.

use nalgebra::{DMatrix, DVector};

use crate::asymptotics::{
    amplitude_phase_rhs, forced_first_order, free_first_order, AmplitudePhase, FirstOrderParams,
};
use crate::error::{Error, Result};
use crate::model::{nonlinear_force, nonlinear_force_jacobian, ChainSystem};

/// Uniformly sampled trajectory: displacement and velocity per sample.
#[derive(Debug, Clone)]
pub struct TimeSeries {
    pub t0: f64,
    pub dt: f64,
    pub dim: usize,
    u: Vec<f64>,
    v: Vec<f64>,
}

impl TimeSeries {
    pub fn new(t0: f64, dt: f64, dim: usize) -> Result<Self> {
        if !(dt > 0.0) {
            return Err(Error::invalid("dt must be > 0"));
        }
        if dim == 0 {
            return Err(Error::invalid("dimension must be >= 1"));
        }
        Ok(TimeSeries {
            t0,
            dt,
            dim,
            u: Vec::new(),
            v: Vec::new(),
        })
    }

    pub fn push(&mut self, u: &[f64], v: &[f64]) -> Result<()> {
        if u.len() != self.dim || v.len() != self.dim {
            return Err(Error::invalid("sample has wrong dimension"));
        }
        if u.iter().chain(v.iter()).any(|x| !x.is_finite()) {
            return Err(Error::invalid("sample contains non-finite values"));
        }
        self.u.extend_from_slice(u);
        self.v.extend_from_slice(v);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.u.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.u.is_empty()
    }

    pub fn time(&self, i: usize) -> f64 {
        self.t0 + i as f64 * self.dt
    }

    pub fn displacement(&self, i: usize) -> &[f64] {
        &self.u[i * self.dim..(i + 1) * self.dim]
    }

    pub fn velocity(&self, i: usize) -> &[f64] {
        &self.v[i * self.dim..(i + 1) * self.dim]
    }

    /// One displacement component over all samples (zero-based index).
    pub fn component(&self, c: usize) -> impl Iterator<Item = f64> + '_ {
        self.u.iter().skip(c).step_by(self.dim).copied()
    }

    /// Largest |u_c| over the samples with `time >= t_from`.
    pub fn sup_abs_from(&self, c: usize, t_from: f64) -> f64 {
        let start = if t_from <= self.t0 {
            0
        } else {
            ((t_from - self.t0) / self.dt).ceil() as usize
        };
        (start..self.len())
            .map(|i| self.displacement(i)[c].abs())
            .fold(0.0, f64::max)
    }
}

/// Time stepper selection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Method {
    #[default]
    Theta,
    Rk4,
}

/// Integrator configuration.
#[derive(Debug, Clone, Copy)]
pub struct IntegratorConfig {
    pub method: Method,
    /// Implicitness parameter in [0, 1]; 0.5 is trapezoidal (second order).
    pub theta: f64,
    pub dt: f64,
    pub t_end: f64,
    pub newton_tol: f64,
    pub newton_max_iter: usize,
}

impl IntegratorConfig {
    pub fn new(method: Method, theta: f64, dt: f64, t_end: f64) -> Result<Self> {
        let cfg = IntegratorConfig {
            method,
            theta,
            dt,
            t_end,
            newton_tol: 1e-12,
            newton_max_iter: 50,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.theta) {
            return Err(Error::invalid("theta must lie in [0, 1]"));
        }
        if !(self.dt > 0.0) {
            return Err(Error::invalid("dt must be > 0"));
        }
        if !(self.t_end > 0.0) {
            return Err(Error::invalid("t_end must be > 0"));
        }
        Ok(())
    }
}

/// Precomputed pieces of the first-order form `y' = f(t, y)`.
struct Rhs<'a> {
    system: &'a ChainSystem,
    mass_lu: nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
    drive: f64,
}

impl<'a> Rhs<'a> {
    fn new(system: &'a ChainSystem) -> Self {
        Rhs {
            system,
            mass_lu: system.mass_matrix.clone().lu(),
            drive: system.drive_frequency(),
        }
    }

    fn eval(
        &self,
        t: f64,
        u: &DVector<f64>,
        v: &DVector<f64>,
    ) -> Result<(DVector<f64>, DVector<f64>)> {
        let sys = self.system;
        let eps = sys.spring.epsilon;
        let mut rhs = -(&sys.stiffness_matrix * u)
            - sys.damping_matrix() * v * eps
            - nonlinear_force(sys, u)?;
        if sys.is_forced() {
            rhs +=
                &sys.forcing_amplitude * (eps * eps * (self.drive * t + sys.forcing_phase).cos());
        }
        let accel = self
            .mass_lu
            .solve(&rhs)
            .ok_or_else(|| Error::DecompositionFailure("mass solve failed".into()))?;
        Ok((v.clone(), accel))
    }
}

/// Right-hand side of the first-order system:
/// `u' = v`, `v' = M^-1 (eps^2 F cos(w t) - K u - eps C v - Phi(u, eps))`.
pub fn rhs_full(
    system: &ChainSystem,
    t: f64,
    u: &DVector<f64>,
    v: &DVector<f64>,
) -> Result<(DVector<f64>, DVector<f64>)> {
    if u.len() != system.n || v.len() != system.n {
        return Err(Error::invalid("state has wrong dimension"));
    }
    Rhs::new(system).eval(t, u, v)
}

/// One-leg theta scheme with a fixed-point inner solve and Newton fallback.
///
/// `y_{k+1} = y_k + dt [(1-theta) f(t_k, y_k) + theta f(t_{k+1}, y_{k+1})]`.
pub fn integrate_theta(
    system: &ChainSystem,
    u0: &DVector<f64>,
    v0: &DVector<f64>,
    cfg: &IntegratorConfig,
) -> Result<TimeSeries> {
    cfg.validate()?;
    if u0.len() != system.n || v0.len() != system.n {
        return Err(Error::invalid("initial state has wrong dimension"));
    }
    let rhs = Rhs::new(system);
    let n = system.n;
    let steps = (cfg.t_end / cfg.dt).round() as usize;
    let mut series = TimeSeries::new(0.0, cfg.dt, n)?;
    series.push(u0.as_slice(), v0.as_slice())?;

    let mut u = u0.clone();
    let mut v = v0.clone();
    const FIXED_POINT_LIMIT: usize = 12;

    for step in 0..steps {
        let t = step as f64 * cfg.dt;
        let t_next = t + cfg.dt;
        let (fu, fv) = rhs.eval(t, &u, &v)?;
        // explicit part of the update
        let bu = &u + &fu * (cfg.dt * (1.0 - cfg.theta));
        let bv = &v + &fv * (cfg.dt * (1.0 - cfg.theta));

        let mut un = u.clone();
        let mut vn = v.clone();
        let mut converged = cfg.theta == 0.0;
        if !converged {
            for _ in 0..FIXED_POINT_LIMIT {
                let (gu, gv) = rhs.eval(t_next, &un, &vn)?;
                let new_u = &bu + &gu * (cfg.dt * cfg.theta);
                let new_v = &bv + &gv * (cfg.dt * cfg.theta);
                let delta = (&new_u - &un).amax().max((&new_v - &vn).amax());
                un = new_u;
                vn = new_v;
                if delta <= cfg.newton_tol {
                    converged = true;
                    break;
                }
            }
        }
        if !converged {
            // Newton on G(y) = y - b - dt theta f(t_next, y)
            for it in 0..cfg.newton_max_iter {
                let (gu, gv) = rhs.eval(t_next, &un, &vn)?;
                let ru = &un - &bu - &gu * (cfg.dt * cfg.theta);
                let rv = &vn - &bv - &gv * (cfg.dt * cfg.theta);
                if ru.amax().max(rv.amax()) <= cfg.newton_tol {
                    converged = true;
                    break;
                }
                let jac = step_jacobian(system, &un, cfg.dt * cfg.theta)?;
                let mut res = DVector::zeros(2 * n);
                res.rows_mut(0, n).copy_from(&ru);
                res.rows_mut(n, n).copy_from(&rv);
                let delta = jac.lu().solve(&res).ok_or(Error::IntegrationFailure {
                    step,
                    reason: "singular Newton matrix in theta step".into(),
                })?;
                for i in 0..n {
                    un[i] -= delta[i];
                    vn[i] -= delta[n + i];
                }
                if it + 1 == cfg.newton_max_iter {
                    return Err(Error::IntegrationFailure {
                        step,
                        reason: "inner Newton solve did not converge".into(),
                    });
                }
            }
        }
        if !converged {
            return Err(Error::IntegrationFailure {
                step,
                reason: "inner solve did not converge".into(),
            });
        }
        u = un;
        v = vn;
        series
            .push(u.as_slice(), v.as_slice())
            .map_err(|_| Error::IntegrationFailure {
                step,
                reason: "state became non-finite".into(),
            })?;
    }
    Ok(series)
}

/// Jacobian of the theta-step residual `I - h df/dy` in block form.
fn step_jacobian(system: &ChainSystem, u: &DVector<f64>, h: f64) -> Result<DMatrix<f64>> {
    let n = system.n;
    let eps = system.spring.epsilon;
    let m_inv_k = system
        .mass_matrix
        .clone()
        .lu()
        .solve(&(&system.stiffness_matrix + nonlinear_force_jacobian(system, u)?))
        .ok_or_else(|| Error::DecompositionFailure("mass solve failed".into()))?;
    let m_inv_c = system
        .mass_matrix
        .clone()
        .lu()
        .solve(system.damping_matrix())
        .ok_or_else(|| Error::DecompositionFailure("mass solve failed".into()))?;
    let mut jac = DMatrix::identity(2 * n, 2 * n);
    for i in 0..n {
        jac[(i, n + i)] -= h; // d u' / d v = I
        for j in 0..n {
            jac[(n + i, j)] += h * m_inv_k[(i, j)];
            jac[(n + i, n + j)] += h * eps * m_inv_c[(i, j)];
        }
    }
    Ok(jac)
}

/// Classical RK4 with the same interface; the cross-check oracle for the
/// theta method.
pub fn integrate_rk4(
    system: &ChainSystem,
    u0: &DVector<f64>,
    v0: &DVector<f64>,
    cfg: &IntegratorConfig,
) -> Result<TimeSeries> {
    cfg.validate()?;
    if u0.len() != system.n || v0.len() != system.n {
        return Err(Error::invalid("initial state has wrong dimension"));
    }
    let rhs = Rhs::new(system);
    let steps = (cfg.t_end / cfg.dt).round() as usize;
    let mut series = TimeSeries::new(0.0, cfg.dt, system.n)?;
    series.push(u0.as_slice(), v0.as_slice())?;
    let mut u = u0.clone();
    let mut v = v0.clone();
    let h = cfg.dt;
    for step in 0..steps {
        let t = step as f64 * h;
        let (k1u, k1v) = rhs.eval(t, &u, &v)?;
        let (k2u, k2v) = rhs.eval(
            t + 0.5 * h,
            &(&u + &k1u * (0.5 * h)),
            &(&v + &k1v * (0.5 * h)),
        )?;
        let (k3u, k3v) = rhs.eval(
            t + 0.5 * h,
            &(&u + &k2u * (0.5 * h)),
            &(&v + &k2v * (0.5 * h)),
        )?;
        let (k4u, k4v) = rhs.eval(t + h, &(&u + &k3u * h), &(&v + &k3v * h))?;
        u += (k1u + k2u * 2.0 + k3u * 2.0 + k4u) * (h / 6.0);
        v += (k1v + k2v * 2.0 + k3v * 2.0 + k4v) * (h / 6.0);
        series
            .push(u.as_slice(), v.as_slice())
            .map_err(|_| Error::IntegrationFailure {
                step,
                reason: "state became non-finite".into(),
            })?;
    }
    Ok(series)
}

/// Nonlinear spring potential plus quadratic energy:
/// `E = v^T M v / 2 + u^T K u / 2 + c g^3 / 3 + d g^4 / (4 eps)`.
pub fn total_energy(system: &ChainSystem, u: &DVector<f64>, v: &DVector<f64>) -> f64 {
    let quad = 0.5 * (v.dot(&(&system.mass_matrix * v)) + u.dot(&(&system.stiffness_matrix * u)));
    let s = &system.spring;
    let g = if s.p == 1 {
        u[0]
    } else {
        u[s.p - 1] - u[s.p - 2]
    };
    quad + s.c * g.powi(3) / 3.0 + s.d / s.epsilon * g.powi(4) / 4.0
}

/// First-order approximation the remainder is measured against.
#[derive(Debug, Clone, Copy)]
pub enum Approximation {
    /// Free vibration at fixed slow amplitude `a0`.
    Free { a0: f64 },
    /// Forced vibration with the slow flow advanced from `state0`.
    Forced { state0: AmplitudePhase },
}

/// Remainder `r(t) = (u(t) - eps u1(t)) / eps^2` of a single-DOF trajectory.
pub fn remainder_series(
    series: &TimeSeries,
    params: &FirstOrderParams,
    approximation: Approximation,
) -> Result<TimeSeries> {
    if series.dim != 1 {
        return Err(Error::invalid(
            "remainder extraction expects a 1-DOF series",
        ));
    }
    let eps = params.epsilon;
    let mut out = TimeSeries::new(series.t0, series.dt, 1)?;
    match approximation {
        Approximation::Free { a0 } => {
            for i in 0..series.len() {
                let t = series.time(i);
                let u1 = free_first_order(params, a0, t);
                let r = (series.displacement(i)[0] - u1) / (eps * eps);
                out.push(&[r], &[0.0])?;
            }
        }
        Approximation::Forced { state0 } => {
            // advance the slow flow in lock-step with the samples: T1 = eps t
            let dt1 = eps * series.dt;
            let mut state = state0;
            for i in 0..series.len() {
                let t = series.time(i);
                let u1 = forced_first_order(params, &state, t);
                let r = (series.displacement(i)[0] - u1) / (eps * eps);
                out.push(&[r], &[0.0])?;
                state = slow_step(params, state, dt1)?;
            }
        }
    }
    Ok(out)
}

fn slow_step(params: &FirstOrderParams, s: AmplitudePhase, h: f64) -> Result<AmplitudePhase> {
    let eval = |a: f64, beta: f64| {
        amplitude_phase_rhs(
            params,
            &AmplitudePhase {
                a: a.max(1e-12),
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

/// Verification mode for the expansion ladder.
#[derive(Debug, Clone, Copy)]
pub enum VerifyMode {
    /// Free vibration from `u(0) = eps a0`, `v(0) = 0`.
    Free { a0: f64 },
    /// Forced vibration from `u(0) = eps a0 cos(beta0)`,
    /// `v(0) = -eps omega a0 sin(beta0)`; with `figure_convention` the
    /// velocity is zeroed instead (the phase-portrait initialization).
    Forced {
        a0: f64,
        beta0: f64,
        figure_convention: bool,
    },
}

/// Per-epsilon remainder bounds over the horizon `gamma / eps`.
#[derive(Debug, Clone)]
pub struct ExpansionReport {
    pub epsilons: Vec<f64>,
    pub gamma: f64,
    /// Horizons `gamma / eps`, truncated to the sample grid.
    pub horizons: Vec<f64>,
    pub sup_remainders: Vec<f64>,
    /// `sup[i+1] / sup[i]` down the epsilon ladder.
    pub growth_ratios: Vec<f64>,
    pub bounded: bool,
}

impl ExpansionReport {
    pub fn verdict(&self) -> &'static str {
        if self.bounded {
            "bounded"
        } else {
            "growing"
        }
    }
}

const GROWTH_RATIO_LIMIT: f64 = 2.0;

/// Integrates the full 1-DOF system down an epsilon ladder and measures the
/// remainder sup over `[0, gamma / eps]` at each rung.
pub fn expansion_verify(
    system: &ChainSystem,
    epsilons: &[f64],
    gamma: f64,
    mode: VerifyMode,
    dt: f64,
) -> Result<ExpansionReport> {
    if system.n != 1 {
        return Err(Error::invalid(
            "expansion verification expects a 1-DOF system",
        ));
    }
    if epsilons.len() < 3 {
        return Err(Error::invalid("need at least 3 epsilon values"));
    }
    if epsilons.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::invalid("epsilon ladder must be strictly decreasing"));
    }
    if !(gamma > 0.0) {
        return Err(Error::invalid("gamma must be > 0"));
    }
    if !(dt > 0.0) {
        return Err(Error::invalid("dt must be > 0"));
    }

    let mut horizons = Vec::new();
    let mut sups = Vec::new();
    for &eps in epsilons {
        let sys = system.with_epsilon(eps)?;
        let params = FirstOrderParams::from_system(&sys)?;
        let horizon = gamma / eps;
        let cfg = IntegratorConfig::new(Method::Rk4, 0.5, dt, horizon)?;
        let (u0, v0, approx) = match mode {
            VerifyMode::Free { a0 } => (eps * a0, 0.0, Approximation::Free { a0 }),
            VerifyMode::Forced {
                a0,
                beta0,
                figure_convention,
            } => {
                let u0 = eps * a0 * beta0.cos();
                let v0 = if figure_convention {
                    0.0
                } else {
                    -eps * params.omega * a0 * beta0.sin()
                };
                (
                    u0,
                    v0,
                    Approximation::Forced {
                        state0: AmplitudePhase { a: a0, beta: beta0 },
                    },
                )
            }
        };
        let series = integrate_rk4(
            &sys,
            &DVector::from_vec(vec![u0]),
            &DVector::from_vec(vec![v0]),
            &cfg,
        )?;
        let remainder = remainder_series(&series, &params, approx)?;
        let sup = (0..remainder.len())
            .map(|i| remainder.displacement(i)[0].abs())
            .fold(0.0, f64::max);
        horizons.push(remainder.time(remainder.len() - 1));
        sups.push(sup);
    }
    let ratios: Vec<f64> = sups
        .windows(2)
        .map(|w| {
            if w[0] > 0.0 {
                w[1] / w[0]
            } else if w[1] == 0.0 {
                1.0
            } else {
                f64::INFINITY
            }
        })
        .collect();
    let bounded = ratios.iter().all(|&r| r <= GROWTH_RATIO_LIMIT);
    Ok(ExpansionReport {
        epsilons: epsilons.to_vec(),
        gamma,
        horizons,
        sup_remainders: sups,
        growth_ratios: ratios,
        bounded,
    })
}

/// Gronwall corollary bound `(delta2 / delta1) (exp(delta1 t) - 1)`.
pub fn gronwall_bound(delta1: f64, delta2: f64, t: f64) -> Result<f64> {
    if !(delta1 > 0.0) {
        return Err(Error::invalid("delta1 must be > 0"));
    }
    if delta2 < 0.0 || t < 0.0 {
        return Err(Error::invalid("delta2 and t must be >= 0"));
    }
    Ok(delta2 / delta1 * ((delta1 * t).exp() - 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_chain, NonlinearSpring};
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    fn linear_1dof() -> ChainSystem {
        let spring = NonlinearSpring::new(0.0, 0.0, 1.0, 1).unwrap();
        build_chain(1, 1.0, 0.5, spring, 0.0, None, 0.0).unwrap()
    }

    fn paper_1dof(u0: f64) -> (ChainSystem, DVector<f64>, DVector<f64>) {
        // eps = .01, lambda = 1/2, F = 1, omega = 1, c = 1, d = 1
        let spring = NonlinearSpring::new(1.0, 1.0, 0.01, 1).unwrap();
        let sys = build_chain(
            1,
            1.0,
            0.5,
            spring,
            0.5,
            Some(DVector::from_vec(vec![1.0])),
            1.43379,
        )
        .unwrap();
        (
            sys,
            DVector::from_vec(vec![u0]),
            DVector::from_vec(vec![0.0]),
        )
    }

    #[test]
    fn rhs_equilibrium() {
        let sys = linear_1dof();
        let (du, dv) = rhs_full(&sys, 0.0, &DVector::zeros(1), &DVector::zeros(1)).unwrap();
        assert_abs_diff_eq!(du[0], 0.0);
        assert_abs_diff_eq!(dv[0], 0.0);
    }

    #[test]
    fn rhs_term_by_term() {
        let (sys, u, v) = paper_1dof(0.019796915);
        let (_, dv) = rhs_full(&sys, 0.0, &u, &v).unwrap();
        let x = 0.019796915f64;
        let expected = 0.0001 - x - x * x - 100.0 * x * x * x;
        assert_abs_diff_eq!(dv[0], expected, epsilon = 1e-12);
    }

    #[test]
    fn rhs_linear_chain_matches_matrix_form() {
        let spring = NonlinearSpring::new(0.0, 0.0, 1.0, 1).unwrap();
        let sys = build_chain(4, 1.0, 1.0, spring, 0.0, None, 0.0).unwrap();
        let u = DVector::from_vec(vec![0.1, -0.2, 0.3, 0.05]);
        let v = DVector::from_vec(vec![0.0, 0.1, -0.1, 0.2]);
        let (du, dv) = rhs_full(&sys, 1.0, &u, &v).unwrap();
        assert_eq!(du, v);
        let expected = -&sys.stiffness_matrix * &u;
        assert!((dv - expected).amax() < 1e-14);
    }

    #[test]
    fn theta_preserves_linear_amplitude() {
        let sys = linear_1dof();
        let cfg = IntegratorConfig::new(Method::Theta, 0.5, 0.01, 2.0 * PI).unwrap();
        let series = integrate_theta(
            &sys,
            &DVector::from_vec(vec![1.0]),
            &DVector::from_vec(vec![0.0]),
            &cfg,
        )
        .unwrap();
        let last = series.displacement(series.len() - 1)[0];
        assert!((last - 1.0).abs() < 1e-4, "u(2 pi) = {last}");
    }

    #[test]
    fn theta_matches_rk4_on_paper_run() {
        let (sys, u0, v0) = paper_1dof(0.019796915);
        let cfg = IntegratorConfig::new(Method::Theta, 0.5, 0.005, 100.0).unwrap();
        let theta = integrate_theta(&sys, &u0, &v0, &cfg).unwrap();
        let rk4 = integrate_rk4(&sys, &u0, &v0, &cfg).unwrap();
        let mut sup = 0.0f64;
        for i in 0..theta.len() {
            sup = sup.max((theta.displacement(i)[0] - rk4.displacement(i)[0]).abs());
        }
        assert!(sup < 1e-5, "sup deviation {sup}");
    }

    #[test]
    fn rk4_energy_drift_linear() {
        let sys = linear_1dof();
        let cfg = IntegratorConfig::new(Method::Rk4, 0.5, 0.001, 100.0 * 2.0 * PI).unwrap();
        let series = integrate_rk4(
            &sys,
            &DVector::from_vec(vec![1.0]),
            &DVector::from_vec(vec![0.0]),
            &cfg,
        )
        .unwrap();
        let e0 = total_energy(&sys, &DVector::from_vec(vec![1.0]), &DVector::zeros(1));
        let last = series.len() - 1;
        let e1 = total_energy(
            &sys,
            &DVector::from_vec(series.displacement(last).to_vec()),
            &DVector::from_vec(series.velocity(last).to_vec()),
        );
        assert!(
            (e1 - e0).abs() / e0 < 1e-8,
            "drift {}",
            (e1 - e0).abs() / e0
        );
    }

    #[test]
    fn rk4_fourth_order_convergence() {
        let (sys, u0, v0) = paper_1dof(0.019796915);
        let horizon = 10.0;
        let run = |dt: f64| {
            let cfg = IntegratorConfig::new(Method::Rk4, 0.5, dt, horizon).unwrap();
            let s = integrate_rk4(&sys, &u0, &v0, &cfg).unwrap();
            s.displacement(s.len() - 1)[0]
        };
        let reference = run(0.04 / 8.0);
        let err_coarse = (run(0.04) - reference).abs();
        let err_fine = (run(0.02) - reference).abs();
        let ratio = err_coarse / err_fine;
        assert!(ratio > 10.0 && ratio < 24.0, "convergence ratio {ratio}");
    }

    #[test]
    fn nonlinear_energy_conserved_by_rk4() {
        let spring = NonlinearSpring::new(1.0, 1.0, 0.1, 2).unwrap();
        let sys = build_chain(3, 1.0, 1.0, spring, 0.0, None, 0.0).unwrap();
        let u0 = DVector::from_vec(vec![0.05, -0.03, 0.02]);
        let v0 = DVector::zeros(3);
        let period = 2.0 * PI / sys.basis().frequencies[0];
        let cfg = IntegratorConfig::new(Method::Rk4, 0.5, 1e-3, 50.0 * period).unwrap();
        let series = integrate_rk4(&sys, &u0, &v0, &cfg).unwrap();
        let e0 = total_energy(&sys, &u0, &v0);
        let last = series.len() - 1;
        let e1 = total_energy(
            &sys,
            &DVector::from_vec(series.displacement(last).to_vec()),
            &DVector::from_vec(series.velocity(last).to_vec()),
        );
        assert!((e1 - e0).abs() / e0.abs() < 1e-6);
    }

    #[test]
    fn remainder_zero_in_linear_limit() {
        let sys = linear_1dof();
        let eps = 0.1;
        let a0 = 1.0;
        let cfg = IntegratorConfig::new(Method::Rk4, 0.5, 1e-3, 10.0).unwrap();
        let series = integrate_rk4(
            &sys,
            &DVector::from_vec(vec![eps * a0]),
            &DVector::zeros(1),
            &cfg,
        )
        .unwrap();
        let mut sys_eps = sys.clone();
        sys_eps = sys_eps.with_epsilon(eps).unwrap();
        let params = FirstOrderParams::from_system(&sys_eps).unwrap();
        let rem = remainder_series(&series, &params, Approximation::Free { a0 }).unwrap();
        let sup = (0..rem.len())
            .map(|i| rem.displacement(i)[0].abs())
            .fold(0.0, f64::max);
        assert!(sup < 1e-6, "sup |r| = {sup}");
    }

    #[test]
    fn expansion_verify_free_bounded() {
        let spring = NonlinearSpring::new(1.0, 1.0, 0.1, 1).unwrap();
        let sys = build_chain(1, 1.0, 0.5, spring, 0.0, None, 0.0).unwrap();
        let report = expansion_verify(
            &sys,
            &[0.1, 0.05, 0.025],
            1.0,
            VerifyMode::Free { a0: 1.0 },
            1e-3,
        )
        .unwrap();
        assert!(report.bounded, "ratios {:?}", report.growth_ratios);
        assert!(report.sup_remainders.iter().all(|&s| s.is_finite()));
    }

    #[test]
    fn expansion_verify_rejects_increasing_ladder() {
        let sys = linear_1dof();
        assert!(expansion_verify(
            &sys,
            &[0.025, 0.05, 0.1],
            1.0,
            VerifyMode::Free { a0: 1.0 },
            1e-3
        )
        .is_err());
    }

    #[test]
    fn gronwall_values() {
        assert_abs_diff_eq!(gronwall_bound(1.0, 1.0, 0.0).unwrap(), 0.0);
        assert_abs_diff_eq!(
            gronwall_bound(1.0, 1.0, 1.0).unwrap(),
            std::f64::consts::E - 1.0,
            epsilon = 1e-12
        );
        assert!(gronwall_bound(0.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn gronwall_equality_ode_matches_bound() {
        // u' = d2 + d1 u, u(0) = 0, integrated by RK4
        for (d1, d2) in [(1.0, 1.0), (0.5, 2.0)] {
            let mut u = 0.0f64;
            let h = 1e-4;
            let steps = (2.0 / h) as usize;
            let f = |u: f64| d2 + d1 * u;
            for _ in 0..steps {
                let k1 = f(u);
                let k2 = f(u + 0.5 * h * k1);
                let k3 = f(u + 0.5 * h * k2);
                let k4 = f(u + h * k3);
                u += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
            }
            let bound = gronwall_bound(d1, d2, 2.0).unwrap();
            assert_abs_diff_eq!(u, bound, epsilon = 1e-8);
        }
    }
}
