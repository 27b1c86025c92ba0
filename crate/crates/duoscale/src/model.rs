//! Mechanical model: spring-mass chain with one local cubic spring, and the
//! generalized modal decomposition every downstream analysis is built on.

use nalgebra::{DMatrix, DVector};

use crate::eigen::generalized_symmetric_eigen;
use crate::error::{Error, Result};

const SYMMETRY_RTOL: f64 = 1e-12;

/// Local nonlinear spring between nodes `p-1` and `p`.
///
/// The restoring force across the spring gap `g` is `c g^2 + (d/epsilon) g^3`.
/// With `p = 1` the spring connects node 1 to the wall and `g = u_1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NonlinearSpring {
    /// Quadratic coefficient (force/length^2).
    pub c: f64,
    /// Cubic coefficient, applied as `d/epsilon` (force/length^3).
    pub d: f64,
    /// Small parameter, > 0.
    pub epsilon: f64,
    /// One-based attachment index, `1 <= p <= n`.
    pub p: usize,
}

impl NonlinearSpring {
    pub fn new(c: f64, d: f64, epsilon: f64, p: usize) -> Result<Self> {
        if !(epsilon > 0.0) {
            return Err(Error::invalid("epsilon must be > 0"));
        }
        if p == 0 {
            return Err(Error::invalid("attachment index p must be >= 1"));
        }
        Ok(NonlinearSpring { c, d, epsilon, p })
    }
}

/// Generalized eigenpairs of `(M, K)` with M-orthonormal modes.
#[derive(Debug, Clone)]
pub struct ModalBasis {
    /// Angular frequencies `omega_k`, strictly ascending.
    pub frequencies: DVector<f64>,
    /// Mode shapes as columns, `Phi^T M Phi = I`.
    pub modes: DMatrix<f64>,
    /// Mode-shape gaps across the nonlinear spring, `phi_{k,p} - phi_{k,p-1}`
    /// (just `phi_{k,1}` when p = 1).
    pub gaps: DVector<f64>,
}

impl ModalBasis {
    pub fn dim(&self) -> usize {
        self.frequencies.len()
    }
}

/// Full mechanical system: matrices, modal damping, local cubic spring and
/// optional near-resonant forcing.
///
/// Immutable after construction; the modal basis and physical damping matrix
/// are computed once here so the right-hand side never re-decomposes.
#[derive(Debug, Clone)]
pub struct ChainSystem {
    pub n: usize,
    pub mass_matrix: DMatrix<f64>,
    pub stiffness_matrix: DMatrix<f64>,
    /// Per-mode damping rates `lambda_k >= 0` (diagonal in the eigenbasis).
    pub modal_damping: DVector<f64>,
    pub spring: NonlinearSpring,
    /// Forcing amplitude vector `F`; the applied load is `eps^2 F cos(w t)`.
    pub forcing_amplitude: DVector<f64>,
    /// Detuning `sigma`; the drive frequency is `omega_driven + eps * sigma`.
    pub forcing_detuning: f64,
    /// Drive phase `phi`; the applied load is `eps^2 F cos(w t + phi)`.
    /// Starting from rest at the displacement maximum of a stationary orbit
    /// requires `phi = -beta_bar`.
    pub forcing_phase: f64,
    /// One-based index of the resonant mode (1 = lowest).
    pub driven_mode: usize,
    basis: ModalBasis,
    /// `C = M Phi diag(lambda) Phi^T M`, so `Phi^T C Phi = diag(lambda)`.
    damping_matrix: DMatrix<f64>,
}

impl ChainSystem {
    pub fn new(
        mass_matrix: DMatrix<f64>,
        stiffness_matrix: DMatrix<f64>,
        modal_damping: DVector<f64>,
        spring: NonlinearSpring,
        forcing_amplitude: DVector<f64>,
        forcing_detuning: f64,
        driven_mode: usize,
    ) -> Result<Self> {
        let n = mass_matrix.nrows();
        if n == 0 {
            return Err(Error::invalid("system dimension must be >= 1"));
        }
        check_symmetric(&mass_matrix, "mass matrix")?;
        check_symmetric(&stiffness_matrix, "stiffness matrix")?;
        if stiffness_matrix.nrows() != n {
            return Err(Error::invalid("mass and stiffness dimensions differ"));
        }
        if modal_damping.len() != n {
            return Err(Error::invalid("modal damping must have length n"));
        }
        if modal_damping.iter().any(|&l| l < 0.0 || !l.is_finite()) {
            return Err(Error::invalid("modal damping entries must be >= 0"));
        }
        if forcing_amplitude.len() != n {
            return Err(Error::invalid("forcing amplitude must have length n"));
        }
        if spring.p > n {
            return Err(Error::invalid("spring attachment index exceeds dimension"));
        }
        if driven_mode == 0 || driven_mode > n {
            return Err(Error::invalid("driven mode out of range"));
        }
        // positive definiteness of K (M is checked by the eigensolver)
        if nalgebra::Cholesky::new(stiffness_matrix.clone()).is_none() {
            return Err(Error::DecompositionFailure(
                "stiffness matrix is not positive definite".into(),
            ));
        }

        let (values, modes) = generalized_symmetric_eigen(&mass_matrix, &stiffness_matrix)?;
        let frequencies = values.map(f64::sqrt);
        let gaps = mode_gaps(&modes, spring.p);
        let basis = ModalBasis {
            frequencies,
            modes,
            gaps,
        };
        let lambda_diag = DMatrix::from_diagonal(&modal_damping);
        let damping_matrix =
            &mass_matrix * &basis.modes * lambda_diag * basis.modes.transpose() * &mass_matrix;

        Ok(ChainSystem {
            n,
            mass_matrix,
            stiffness_matrix,
            modal_damping,
            spring,
            forcing_amplitude,
            forcing_detuning,
            forcing_phase: 0.0,
            driven_mode,
            basis,
            damping_matrix,
        })
    }

    /// Same system with the drive phase replaced.
    pub fn with_forcing_phase(mut self, phase: f64) -> Self {
        self.forcing_phase = phase;
        self
    }

    pub fn basis(&self) -> &ModalBasis {
        &self.basis
    }

    /// Physical damping matrix realizing the modal damping vector.
    pub fn damping_matrix(&self) -> &DMatrix<f64> {
        &self.damping_matrix
    }

    /// Natural frequency of the driven mode.
    pub fn driven_frequency(&self) -> f64 {
        self.basis.frequencies[self.driven_mode - 1]
    }

    /// Drive frequency `omega_driven + eps * sigma`.
    pub fn drive_frequency(&self) -> f64 {
        self.driven_frequency() + self.spring.epsilon * self.forcing_detuning
    }

    pub fn is_forced(&self) -> bool {
        self.forcing_amplitude.iter().any(|&f| f != 0.0)
    }

    /// Same system with the small parameter replaced (used by the expansion
    /// verification ladder).
    pub fn with_epsilon(&self, epsilon: f64) -> Result<ChainSystem> {
        let spring = NonlinearSpring {
            epsilon,
            ..self.spring
        };
        Ok(ChainSystem::new(
            self.mass_matrix.clone(),
            self.stiffness_matrix.clone(),
            self.modal_damping.clone(),
            spring,
            self.forcing_amplitude.clone(),
            self.forcing_detuning,
            self.driven_mode,
        )?
        .with_forcing_phase(self.forcing_phase))
    }
}

fn check_symmetric(m: &DMatrix<f64>, name: &str) -> Result<()> {
    if !m.is_square() {
        return Err(Error::invalid(format!("{name} must be square")));
    }
    let scale = m.amax().max(1e-300);
    for i in 0..m.nrows() {
        for j in (i + 1)..m.ncols() {
            if (m[(i, j)] - m[(j, i)]).abs() > SYMMETRY_RTOL * scale {
                return Err(Error::invalid(format!("{name} is not symmetric")));
            }
        }
    }
    Ok(())
}

fn mode_gaps(modes: &DMatrix<f64>, p: usize) -> DVector<f64> {
    let n = modes.nrows();
    DVector::from_fn(n, |k, _| {
        if p == 1 {
            modes[(0, k)]
        } else {
            modes[(p - 1, k)] - modes[(p - 2, k)]
        }
    })
}

/// Uniform fixed-fixed chain: `M = mass * I`, `K = stiffness * tridiag(-1,2,-1)`.
///
/// `forcing = None` builds the free system. Damping is replicated to all modes.
pub fn build_chain(
    n: usize,
    mass: f64,
    stiffness: f64,
    spring: NonlinearSpring,
    damping: f64,
    forcing: Option<DVector<f64>>,
    forcing_detuning: f64,
) -> Result<ChainSystem> {
    if n == 0 {
        return Err(Error::invalid("n must be >= 1"));
    }
    if !(mass > 0.0) || !(stiffness > 0.0) {
        return Err(Error::invalid("mass and stiffness must be > 0"));
    }
    let m = DMatrix::identity(n, n) * mass;
    let mut k = DMatrix::zeros(n, n);
    for i in 0..n {
        k[(i, i)] = 2.0 * stiffness;
        if i + 1 < n {
            k[(i, i + 1)] = -stiffness;
            k[(i + 1, i)] = -stiffness;
        }
    }
    let forcing = forcing.unwrap_or_else(|| DVector::zeros(n));
    if forcing.len() != n {
        return Err(Error::invalid("forcing vector must have length n"));
    }
    ChainSystem::new(
        m,
        k,
        DVector::from_element(n, damping),
        spring,
        forcing,
        forcing_detuning,
        1,
    )
}

/// Nonlinear internal force `Phi(u, eps)`, the gradient of the spring
/// potential `V(g) = c g^3 / 3 + (d / eps) g^4 / 4` with `g = u_p - u_{p-1}`.
///
/// Only entries `p-1` and `p` are nonzero: `Phi_p = c g^2 + (d/eps) g^3` and
/// `Phi_{p-1} = -Phi_p` (1-based). For `p = 1` the spring leans on the wall,
/// `g = u_1`, and the single nonzero entry is `c u_1^2 + (d/eps) u_1^3`. This
/// orientation makes the reduced modal cubic `+d (delta_p phi_1)^4 y^3`
/// (hardening), consistent with the 1-DOF problem.
pub fn nonlinear_force(system: &ChainSystem, u: &DVector<f64>) -> Result<DVector<f64>> {
    if u.len() != system.n {
        return Err(Error::invalid("displacement vector has wrong length"));
    }
    let mut phi = DVector::zeros(system.n);
    let s = &system.spring;
    if s.p == 1 {
        let g = u[0];
        phi[0] = s.c * g * g + s.d / s.epsilon * g * g * g;
    } else {
        let g = u[s.p - 1] - u[s.p - 2];
        let val = s.c * g * g + s.d / s.epsilon * g * g * g;
        phi[s.p - 2] = -val;
        phi[s.p - 1] = val;
    }
    Ok(phi)
}

/// Jacobian `d Phi / d u`, needed by the implicit integrator's Newton solve.
pub fn nonlinear_force_jacobian(system: &ChainSystem, u: &DVector<f64>) -> Result<DMatrix<f64>> {
    if u.len() != system.n {
        return Err(Error::invalid("displacement vector has wrong length"));
    }
    let mut jac = DMatrix::zeros(system.n, system.n);
    let s = &system.spring;
    if s.p == 1 {
        let g = u[0];
        jac[(0, 0)] = 2.0 * s.c * g + 3.0 * s.d / s.epsilon * g * g;
    } else {
        let g = u[s.p - 1] - u[s.p - 2];
        let dv = 2.0 * s.c * g + 3.0 * s.d / s.epsilon * g * g;
        jac[(s.p - 2, s.p - 1)] = -dv;
        jac[(s.p - 2, s.p - 2)] = dv;
        jac[(s.p - 1, s.p - 1)] = dv;
        jac[(s.p - 1, s.p - 2)] = -dv;
    }
    Ok(jac)
}

/// Modal decomposition of the system (precomputed at construction).
pub fn modal_decompose(system: &ChainSystem) -> ModalBasis {
    system.basis.clone()
}

/// Modal coordinates `y_k = phi_k^T M u`.
pub fn modal_project(
    basis: &ModalBasis,
    mass: &DMatrix<f64>,
    u: &DVector<f64>,
) -> Result<DVector<f64>> {
    if u.len() != basis.dim() || mass.nrows() != basis.dim() {
        return Err(Error::invalid("dimension mismatch in modal projection"));
    }
    Ok(basis.modes.transpose() * (mass * u))
}

/// Physical displacement `u = sum_k y_k phi_k`.
pub fn modal_reconstruct(basis: &ModalBasis, y: &DVector<f64>) -> Result<DVector<f64>> {
    if y.len() != basis.dim() {
        return Err(Error::invalid("dimension mismatch in modal reconstruction"));
    }
    Ok(&basis.modes * y)
}

/// A near-multiple relation `omega_k ~ q * omega_1` that would break the
/// secular analysis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResonanceViolation {
    /// One-based mode index, k >= 2.
    pub mode: usize,
    /// Offending multiple, q in {1, 2, 3}.
    pub multiple: u32,
    /// Ratio omega_k / omega_1.
    pub ratio: f64,
}

/// Checks the non-resonance hypotheses `omega_k != q omega_1`, q = 1, 2, 3,
/// for every mode above the driven one. An empty list means the expansion
/// hypotheses hold.
pub fn nonresonance_report(basis: &ModalBasis, tolerance: f64) -> Result<Vec<ResonanceViolation>> {
    if !(tolerance > 0.0) {
        return Err(Error::invalid("tolerance must be > 0"));
    }
    let omega1 = basis.frequencies[0];
    let mut violations = Vec::new();
    for k in 1..basis.dim() {
        let ratio = basis.frequencies[k] / omega1;
        for q in 1..=3u32 {
            if (ratio - q as f64).abs() < tolerance {
                violations.push(ResonanceViolation {
                    mode: k + 1,
                    multiple: q,
                    ratio,
                });
            }
        }
    }
    Ok(violations)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn unit_spring(p: usize) -> NonlinearSpring {
        NonlinearSpring::new(1.0, 1.0, 1.0, p).unwrap()
    }

    /// Analytic chain eigenfrequencies 2 sqrt(k/m) sin(k pi / (2(n+1))).
    fn chain_frequency(n: usize, mass: f64, stiffness: f64, k: usize) -> f64 {
        2.0 * (stiffness / mass).sqrt()
            * (k as f64 * std::f64::consts::PI / (2.0 * (n as f64 + 1.0))).sin()
    }

    #[test]
    fn one_dof_chain_stiffness_doubles() {
        let sys = build_chain(1, 1.0, 0.5, unit_spring(1), 0.0, None, 0.0).unwrap();
        assert_abs_diff_eq!(sys.stiffness_matrix[(0, 0)], 1.0);
        assert_abs_diff_eq!(sys.basis().frequencies[0], 1.0, epsilon = 1e-14);
    }

    #[test]
    fn nine_dof_chain_matrix_pattern() {
        let sys = build_chain(9, 1.0, 1.0, unit_spring(1), 0.0, None, 0.0).unwrap();
        for i in 0..9 {
            assert_abs_diff_eq!(sys.stiffness_matrix[(i, i)], 2.0);
            if i + 1 < 9 {
                assert_abs_diff_eq!(sys.stiffness_matrix[(i, i + 1)], -1.0);
            }
        }
    }

    #[test]
    fn chain_frequencies_match_closed_form() {
        for n in 1..=12 {
            let sys = build_chain(n, 2.0, 1.0, unit_spring(1), 0.0, None, 0.0).unwrap();
            for k in 1..=n {
                let expected = chain_frequency(n, 2.0, 1.0, k);
                let got = sys.basis().frequencies[k - 1];
                assert!(
                    (got - expected).abs() <= 1e-10 * expected,
                    "n={n} k={k}: {got} vs {expected}"
                );
            }
        }
    }

    #[test]
    fn nine_dof_fundamental_matches_paper_drive() {
        let sys = build_chain(9, 1.0, 1.0, unit_spring(1), 0.0, None, 0.0).unwrap();
        let omega1 = sys.basis().frequencies[0];
        assert_abs_diff_eq!(
            omega1,
            2.0 * (std::f64::consts::PI / 20.0).sin(),
            epsilon = 1e-12
        );
        assert!((omega1 - 0.3128868).abs() < 5e-5);
    }

    #[test]
    fn nine_dof_first_mode_shape() {
        let sys = build_chain(9, 1.0, 1.0, unit_spring(1), 0.0, None, 0.0).unwrap();
        let phi1 = sys.basis().modes.column(0);
        for j in 1..=9 {
            let expected = (2.0 / 10.0f64).sqrt() * (j as f64 * std::f64::consts::PI / 10.0).sin();
            assert_abs_diff_eq!(phi1[j - 1], expected, epsilon = 1e-10);
        }
    }

    #[test]
    fn m_orthonormality_and_rayleigh() {
        let sys = build_chain(7, 1.3, 2.1, unit_spring(3), 0.0, None, 0.0).unwrap();
        let b = sys.basis();
        let gram = b.modes.transpose() * &sys.mass_matrix * &b.modes;
        for i in 0..7 {
            for j in 0..7 {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert_abs_diff_eq!(gram[(i, j)], expect, epsilon = 1e-10);
            }
        }
        let kres = &sys.stiffness_matrix * &b.modes
            - &sys.mass_matrix * &b.modes * DMatrix::from_diagonal(&b.frequencies.map(|w| w * w));
        assert!(kres.amax() <= 1e-9 * sys.stiffness_matrix.amax());
    }

    #[test]
    fn nonlinear_force_zero_input() {
        let sys = build_chain(3, 1.0, 1.0, unit_spring(2), 0.0, None, 0.0).unwrap();
        let phi = nonlinear_force(&sys, &DVector::zeros(3)).unwrap();
        assert_eq!(phi, DVector::zeros(3));
    }

    #[test]
    fn nonlinear_force_interior_spring() {
        let sys = build_chain(2, 1.0, 1.0, unit_spring(2), 0.0, None, 0.0).unwrap();
        let u = DVector::from_vec(vec![0.0, 1.0]);
        let phi = nonlinear_force(&sys, &u).unwrap();
        // stretched spring pulls the masses together: -grad on 0, +grad on 1
        assert_abs_diff_eq!(phi[0], -2.0);
        assert_abs_diff_eq!(phi[1], 2.0);
    }

    #[test]
    fn nonlinear_force_wall_spring() {
        let spring = NonlinearSpring::new(1.0, 1.0, 0.01, 1).unwrap();
        let sys = build_chain(1, 1.0, 0.5, spring, 0.0, None, 0.0).unwrap();
        let phi = nonlinear_force(&sys, &DVector::from_vec(vec![0.1])).unwrap();
        assert_abs_diff_eq!(phi[0], 0.11, epsilon = 1e-14);
    }

    #[test]
    fn internal_force_reciprocity() {
        let sys = build_chain(5, 1.0, 1.0, unit_spring(3), 0.0, None, 0.0).unwrap();
        let u = DVector::from_vec(vec![0.2, -0.4, 0.9, 0.1, -0.3]);
        let phi = nonlinear_force(&sys, &u).unwrap();
        assert_abs_diff_eq!(phi.sum(), 0.0, epsilon = 1e-14);
    }

    #[test]
    fn force_jacobian_matches_finite_differences() {
        for p in [1usize, 3] {
            let sys = build_chain(4, 1.0, 1.0, unit_spring(p), 0.0, None, 0.0).unwrap();
            let u = DVector::from_vec(vec![0.3, -0.2, 0.5, 0.1]);
            let jac = nonlinear_force_jacobian(&sys, &u).unwrap();
            let h = 1e-7;
            for j in 0..4 {
                let mut up = u.clone();
                let mut um = u.clone();
                up[j] += h;
                um[j] -= h;
                let fp = nonlinear_force(&sys, &up).unwrap();
                let fm = nonlinear_force(&sys, &um).unwrap();
                for i in 0..4 {
                    let fd = (fp[i] - fm[i]) / (2.0 * h);
                    assert_abs_diff_eq!(jac[(i, j)], fd, epsilon = 1e-5);
                }
            }
        }
    }

    #[test]
    fn projection_round_trip() {
        let sys = build_chain(9, 1.0, 1.0, unit_spring(1), 0.0, None, 0.0).unwrap();
        let b = sys.basis();
        let y = DVector::from_fn(9, |i, _| (i as f64 * 0.713).sin());
        let u = modal_reconstruct(b, &y).unwrap();
        let back = modal_project(b, &sys.mass_matrix, &u).unwrap();
        assert!((back - y).amax() <= 1e-12);
    }

    #[test]
    fn projection_picks_out_mixed_modes() {
        let sys = build_chain(9, 1.0, 1.0, unit_spring(1), 0.0, None, 0.0).unwrap();
        let b = sys.basis();
        let u = b.modes.column(0) * 0.1 + b.modes.column(2) * 0.2;
        let y = modal_project(b, &sys.mass_matrix, &u).unwrap();
        assert_abs_diff_eq!(y[0], 0.1, epsilon = 1e-12);
        assert_abs_diff_eq!(y[2], 0.2, epsilon = 1e-12);
        assert_abs_diff_eq!(y[1], 0.0, epsilon = 1e-12);
    }

    #[test]
    fn nonresonance_flags_chain_second_mode() {
        let sys = build_chain(9, 1.0, 1.0, unit_spring(1), 0.0, None, 0.0).unwrap();
        let report = nonresonance_report(sys.basis(), 0.05).unwrap();
        assert!(report
            .iter()
            .any(|v| v.mode == 2 && v.multiple == 2 && (v.ratio - 1.975).abs() < 1e-2));
    }

    #[test]
    fn nonresonance_one_dof_empty() {
        let sys = build_chain(1, 1.0, 0.5, unit_spring(1), 0.0, None, 0.0).unwrap();
        assert!(nonresonance_report(sys.basis(), 0.05).unwrap().is_empty());
    }

    #[test]
    fn nonresonance_clean_two_dof() {
        // omega = (1, 2.5): distance 0.5 from every multiple
        let basis = ModalBasis {
            frequencies: DVector::from_vec(vec![1.0, 2.5]),
            modes: DMatrix::identity(2, 2),
            gaps: DVector::from_vec(vec![1.0, 0.0]),
        };
        assert!(nonresonance_report(&basis, 0.1).unwrap().is_empty());
    }

    #[test]
    fn build_chain_rejects_bad_arguments() {
        assert!(build_chain(0, 1.0, 1.0, unit_spring(1), 0.0, None, 0.0).is_err());
        assert!(build_chain(2, -1.0, 1.0, unit_spring(1), 0.0, None, 0.0).is_err());
        assert!(build_chain(2, 1.0, 0.0, unit_spring(1), 0.0, None, 0.0).is_err());
    }
}
