//! Time steppers for the conserved flow.
//!
//! The coupled state/chemical-potential systems are solved in reduced form on
//! the zero-mean subspace: the potential is eliminated through the inverse
//! discrete Laplacian and reconstructed after the solve. Newton therefore
//! iterates on the increment `theta = u - uprev`, which stays zero-mean, and
//! every scheme conserves the initial mass.

use super::{SolverConfig, StepStats};
use crate::energies::{EnergyContext, EnergyVariant};
use crate::error::{Error, Result};
use crate::fem::{Field, FemSpace};
use crate::potentials::{secant_slope, secant_slope_prime, well_prime, well_second};
use crate::solvers::{lbfgs_minimize, newton};
use crate::sparse::CsrMatrix;

/// Scheme tags for the conserved flow.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ChScheme {
    /// Fully implicit step (Newton; expected to fail well past the convexity
    /// threshold).
    Fis,
    /// Convex splitting: implicit `u^3`, explicit linear part.
    Css,
    /// Crank-Nicolson with the secant nonlinearity.
    Mcn,
    /// Fully implicit step solved by minimizing the conserved step energy.
    FisEnergyMin,
    /// Secant Crank-Nicolson solved by energy minimization.
    McnEnergyMin,
    /// Energy minimization for the relaxed model with damping `delta`.
    ConvexifiedEnergyMin { delta: f64 },
}

/// Stepper configuration for the conserved flow.
#[derive(Debug, Clone)]
pub struct ChConfig {
    pub scheme: ChScheme,
    pub epsilon: f64,
    pub solver: SolverConfig,
}

/// Conserved-flow state: order parameter, reconstructed chemical potential
/// (absent before the first step), time, step index and the conserved mean.
#[derive(Debug, Clone)]
pub struct ChState {
    pub u: Field,
    pub w: Option<Field>,
    pub t: f64,
    pub n: usize,
    pub initial_mass: f64,
}

impl ChState {
    pub fn new(space: &FemSpace, u: Field) -> Self {
        let initial_mass = space.mean(&u);
        ChState {
            u,
            w: None,
            t: 0.0,
            n: 0,
            initial_mass,
        }
    }

    fn advanced(&self, u_new: Field, w_new: Field, k: f64) -> ChState {
        ChState {
            u: u_new,
            w: Some(w_new),
            t: self.t + k,
            n: self.n + 1,
            initial_mass: self.initial_mass,
        }
    }
}

/// Chemical potential consistent with the reduced solve:
/// `w = (1/k) invlap(u - uprev) + mean(nonlinearity) / eps`.
fn reconstruct_w(
    space: &FemSpace,
    eps: f64,
    k: f64,
    u: &Field,
    uprev: &Field,
    nl_integral: f64,
) -> Result<Field> {
    let mut delta = u.sub(uprev);
    space.project_zero_mean(&mut delta);
    let mut w = space.inverse_laplacian_direct(&delta)?;
    w.scale(1.0 / k);
    let shift = nl_integral / (space.total_volume * eps);
    for x in &mut w.0 {
        *x += shift;
    }
    Ok(w)
}

/// Newton on the reduced residual, iterating on the zero-mean increment.
fn newton_ch<'a>(
    space: &'a FemSpace,
    eps: f64,
    uprev: &'a Field,
    residual: &dyn Fn(&Field) -> Result<Field>,
    jacobian: &'a dyn Fn(&Field) -> Result<Box<dyn Fn(&Field) -> Field + 'a>>,
    norm: &dyn Fn(&Field) -> Result<f64>,
    solver: &SolverConfig,
) -> Result<(Field, StepStats)> {
    space.prepare_neumann_factor()?;
    let res_theta = |theta: &Field| residual(&uprev.add_scaled(1.0, theta));
    let jac_theta = |theta: &Field| jacobian(&uprev.add_scaled(1.0, theta));
    let project = |v: &mut Field| space.project_zero_mean(v);
    let project_dual = |r: &mut Field| space.project_dual_zero_sum(r);
    // The damping ladder mirrors the relaxed conserved model, whose extra
    // term contributes (delta/(k eps)) M with delta of order k.
    let metric = |v: &Field| space.apply_mass(v);
    let out = newton(
        &res_theta,
        &jac_theta,
        norm,
        &Field::zeros(space.num_nodes()),
        Some(&project),
        Some(&project_dual),
        None,
        Some((&metric, 1.0 / eps)),
        &solver.newton,
    )?;
    Ok((
        uprev.add_scaled(1.0, &out.solution),
        StepStats {
            newton_iters: out.iterations,
            linear_iters: out.linear_iterations,
            ..StepStats::default()
        },
    ))
}

/// Jacobian application shared by the conserved schemes:
/// `v -> a_stiff A v + c_w W v [+ c_m M v] - c_h M invlap(v)`, dual-projected.
struct ChJacobian<'a> {
    space: &'a FemSpace,
    w_mat: CsrMatrix,
    a_stiff: f64,
    c_w: f64,
    c_m: f64,
    c_h: f64,
}

impl ChJacobian<'_> {
    fn apply(&self, v: &Field) -> Field {
        let space = self.space;
        let mut y = space.apply_stiffness(v);
        y.scale(self.a_stiff);
        y.axpy(self.c_w, &Field(self.w_mat.matvec(&v.0)));
        if self.c_m != 0.0 {
            y.axpy(self.c_m, &space.apply_mass(v));
        }
        space.project_dual_zero_sum(&mut y);
        let inv = space
            .inverse_laplacian_direct(v)
            .expect("projected Newton direction");
        y.axpy(-self.c_h, &space.apply_mass(&inv));
        y
    }
}

/// Fully implicit conserved step in reduced form.
pub fn step_fis_ch(
    space: &FemSpace,
    eps: f64,
    solver: &SolverConfig,
    state: &ChState,
    k: f64,
) -> Result<(ChState, StepStats)> {
    let ctx = EnergyContext::new(space, eps, k, state.u.clone(), EnergyVariant::ChFis)?;
    let residual = |u: &Field| ctx.step_residual(u);
    let jacobian = |u: &Field| -> Result<Box<dyn Fn(&Field) -> Field + '_>> {
        let jac = ChJacobian {
            space,
            w_mat: space.weighted_mass(u, well_second),
            a_stiff: eps,
            c_w: 1.0 / eps,
            c_m: 0.0,
            c_h: 1.0 / k,
        };
        Ok(Box::new(move |v: &Field| jac.apply(v)))
    };
    let norm = |r: &Field| ctx.residual_norm(r);
    let (u, stats) = newton_ch(space, eps, &state.u, &residual, &jacobian, &norm, solver)?;
    let nl = space.integrate(&u, well_prime);
    let w = reconstruct_w(space, eps, k, &u, &state.u, nl)?;
    Ok((state.advanced(u, w, k), stats))
}

/// Convex-splitting conserved step; the implicit system is convex for every
/// step size.
pub fn step_css_ch(
    space: &FemSpace,
    eps: f64,
    solver: &SolverConfig,
    state: &ChState,
    k: f64,
) -> Result<(ChState, StepStats)> {
    let b = state.u.clone();
    let residual = |u: &Field| -> Result<Field> {
        let mut r = space.apply_stiffness(u);
        r.scale(eps);
        r.axpy(1.0 / eps, &space.nonlinear_load(u, |x| x * x * x));
        r.axpy(-1.0 / eps, &space.apply_mass(&b));
        space.project_dual_zero_sum(&mut r);
        let mut delta = u.sub(&b);
        space.project_zero_mean(&mut delta);
        let inv = space.inverse_laplacian_direct(&delta)?;
        r.axpy(-1.0 / k, &space.apply_mass(&inv));
        Ok(r)
    };
    let jacobian = |u: &Field| -> Result<Box<dyn Fn(&Field) -> Field + '_>> {
        let jac = ChJacobian {
            space,
            w_mat: space.weighted_mass(u, |x| 3.0 * x * x),
            a_stiff: eps,
            c_w: 1.0 / eps,
            c_m: 0.0,
            c_h: 1.0 / k,
        };
        Ok(Box::new(move |v: &Field| jac.apply(v)))
    };
    let ctx = EnergyContext::new(space, eps, k, state.u.clone(), EnergyVariant::ChFis)?;
    let norm = |r: &Field| ctx.residual_norm(r);
    let (u, stats) = newton_ch(space, eps, &state.u, &residual, &jacobian, &norm, solver)?;
    let nl = space.integrate(&u, |x| x * x * x) - space.mean(&state.u) * space.total_volume;
    let w = reconstruct_w(space, eps, k, &u, &state.u, nl)?;
    Ok((state.advanced(u, w, k), stats))
}

/// Fully implicit discretization of the relaxed conserved model, in which the
/// potential equation carries the extra `(k/eps) u_t` term. Algebraically the
/// same system as [`step_css_ch`]; kept as an independent code path so the
/// identity between the two can be checked nodewise.
pub fn step_fis_perturbed_ch(
    space: &FemSpace,
    eps: f64,
    solver: &SolverConfig,
    state: &ChState,
    k: f64,
) -> Result<(ChState, StepStats)> {
    let b = state.u.clone();
    let residual = |u: &Field| -> Result<Field> {
        let mut r = space.apply_stiffness(u);
        r.scale(eps);
        r.axpy(1.0 / eps, &space.nonlinear_load(u, well_prime));
        r.axpy(1.0 / eps, &space.apply_mass(&u.sub(&b)));
        space.project_dual_zero_sum(&mut r);
        let mut delta = u.sub(&b);
        space.project_zero_mean(&mut delta);
        let inv = space.inverse_laplacian_direct(&delta)?;
        r.axpy(-1.0 / k, &space.apply_mass(&inv));
        Ok(r)
    };
    let jacobian = |u: &Field| -> Result<Box<dyn Fn(&Field) -> Field + '_>> {
        let jac = ChJacobian {
            space,
            w_mat: space.weighted_mass(u, well_second),
            a_stiff: eps,
            c_w: 1.0 / eps,
            c_m: 1.0 / eps,
            c_h: 1.0 / k,
        };
        Ok(Box::new(move |v: &Field| jac.apply(v)))
    };
    let ctx = EnergyContext::new(space, eps, k, state.u.clone(), EnergyVariant::ChFis)?;
    let norm = |r: &Field| ctx.residual_norm(r);
    let (u, stats) = newton_ch(space, eps, &state.u, &residual, &jacobian, &norm, solver)?;
    let delta = u.sub(&state.u);
    let nl = space.integrate(&u, well_prime) + space.mean(&delta) * space.total_volume;
    let w = reconstruct_w(space, eps, k, &u, &state.u, nl)?;
    Ok((state.advanced(u, w, k), stats))
}

/// Secant Crank-Nicolson conserved step; satisfies the exact per-step energy
/// identity. Falls back to energy minimization when Newton stalls in the
/// nonconvex regime.
pub fn step_mcn_ch(
    space: &FemSpace,
    eps: f64,
    solver: &SolverConfig,
    state: &ChState,
    k: f64,
) -> Result<(ChState, StepStats)> {
    let ctx = EnergyContext::new(space, eps, k, state.u.clone(), EnergyVariant::ChMcn)?;
    let residual = |u: &Field| ctx.step_residual(u);
    let jacobian = |u: &Field| -> Result<Box<dyn Fn(&Field) -> Field + '_>> {
        let jac = ChJacobian {
            space,
            w_mat: space.weighted_mass2(u, &ctx.uprev, secant_slope_prime),
            a_stiff: 0.25 * eps,
            c_w: 0.5 / eps,
            c_m: 0.0,
            c_h: 0.5 / k,
        };
        Ok(Box::new(move |v: &Field| jac.apply(v)))
    };
    let norm = |r: &Field| ctx.residual_norm(r);
    let solved = newton_ch(space, eps, &state.u, &residual, &jacobian, &norm, solver);
    let (u, stats) = match solved {
        Ok(pair) => pair,
        Err(_) => {
            let (u, mut stats) = minimize_ch(space, &ctx, &state.u, solver)?;
            stats.fallback_used = true;
            (u, stats)
        }
    };
    let nl = space.integrate2(&u, &state.u, secant_slope);
    let w = reconstruct_w(space, eps, k, &u, &state.u, nl)?;
    Ok((state.advanced(u, w, k), stats))
}

/// L-BFGS on a conserved step energy over states with pinned mean.
fn minimize_ch(
    space: &FemSpace,
    ctx: &EnergyContext,
    u0: &Field,
    solver: &SolverConfig,
) -> Result<(Field, StepStats)> {
    space.prepare_neumann_factor()?;
    let m0 = space.mean(&ctx.uprev);
    let energy = |u: &Field| ctx.step_energy(u);
    let gradient = |u: &Field| ctx.step_gradient(u);
    let inner = |a: &Field, b: &Field| ctx.inner(a, b);
    let pin_mean = |u: &mut Field| {
        let shift = m0 - space.mean(u);
        for x in &mut u.0 {
            *x += shift;
        }
    };
    let out = lbfgs_minimize(&energy, &gradient, &inner, u0, Some(&pin_mean), &solver.lbfgs)?;
    if !out.converged {
        return Err(Error::NewtonMaxIter {
            iterations: out.iterations,
            residual: *out.grad_norms.last().unwrap_or(&f64::NAN),
            tol: solver.lbfgs.tol,
        });
    }
    Ok((
        out.solution,
        StepStats {
            lbfgs_iters: Some(out.iterations),
            ..StepStats::default()
        },
    ))
}

/// Energy-minimization conserved step for the fully implicit, secant
/// Crank-Nicolson or relaxed variants.
pub fn step_energymin_ch(
    space: &FemSpace,
    eps: f64,
    solver: &SolverConfig,
    state: &ChState,
    k: f64,
    variant: EnergyVariant,
    initial_guess: Option<&Field>,
) -> Result<(ChState, StepStats)> {
    if !variant.is_conserved() {
        return Err(Error::Config(format!(
            "conserved energy-minimization stepping got a nonconserved variant {variant:?}"
        )));
    }
    let ctx = EnergyContext::new(space, eps, k, state.u.clone(), variant)?;
    let u0 = initial_guess.unwrap_or(&state.u);
    let (u, stats) = minimize_ch(space, &ctx, u0, solver)?;
    let nl = match variant {
        EnergyVariant::ChMcn => space.integrate2(&u, &state.u, secant_slope),
        _ => space.integrate(&u, well_prime),
    };
    let w = reconstruct_w(space, eps, k, &u, &state.u, nl)?;
    Ok((state.advanced(u, w, k), stats))
}

/// Dispatch one step of `cfg.scheme`.
pub fn step_ch(
    space: &FemSpace,
    cfg: &ChConfig,
    state: &ChState,
    k: f64,
) -> Result<(ChState, StepStats)> {
    let eps = cfg.epsilon;
    let solver = &cfg.solver;
    match cfg.scheme {
        ChScheme::Fis => step_fis_ch(space, eps, solver, state, k),
        ChScheme::Css => step_css_ch(space, eps, solver, state, k),
        ChScheme::Mcn => step_mcn_ch(space, eps, solver, state, k),
        ChScheme::FisEnergyMin => {
            step_energymin_ch(space, eps, solver, state, k, EnergyVariant::ChFis, None)
        }
        ChScheme::McnEnergyMin => {
            step_energymin_ch(space, eps, solver, state, k, EnergyVariant::ChMcn, None)
        }
        ChScheme::ConvexifiedEnergyMin { delta } => step_energymin_ch(
            space,
            eps,
            solver,
            state,
            k,
            EnergyVariant::ChConvexified { delta },
            None,
        ),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::energies::physical_energy_ch;
    use crate::fem::assemble;
    use crate::mesh::{generate_uniform, Rect};
    use crate::solvers::NewtonConfig;
    use approx::assert_relative_eq;

    fn space(n: usize) -> FemSpace {
        assemble(generate_uniform(n, n, Rect::unit()).unwrap()).unwrap()
    }

    fn tight() -> SolverConfig {
        SolverConfig {
            newton: NewtonConfig {
                tol: 1e-13,
                linear_tol: 1e-12,
                ..NewtonConfig::default()
            },
            ..SolverConfig::default()
        }
    }

    fn smooth_state(sp: &FemSpace, eps: f64) -> Field {
        sp.interpolate_coords(|x, y| {
            (((x - 0.5) * (x - 0.5) + (y - 0.5) * (y - 0.5)).sqrt() - 0.25)
                / (std::f64::consts::SQRT_2 * eps)
        })
        .map(f64::tanh)
    }

    #[test]
    fn constants_are_stationary_with_flat_potential() {
        let sp = space(5);
        let eps: f64 = 0.3;
        let solver = tight();
        for c in [1.0, 0.4, -0.7] {
            for scheme in [ChScheme::Fis, ChScheme::Css, ChScheme::Mcn] {
                let cfg = ChConfig {
                    scheme,
                    epsilon: eps,
                    solver: solver.clone(),
                };
                let state = ChState::new(&sp, Field::constant(sp.num_nodes(), c));
                let (next, _) = step_ch(&sp, &cfg, &state, 0.05).unwrap();
                assert!(
                    next.u.max_abs_diff(&state.u) < 1e-9,
                    "{scheme:?} moved a constant state"
                );
                // Chemical potential of a constant state: f(c)/eps.
                let w = next.w.unwrap();
                let expected = crate::potentials::well_prime(c) / eps;
                for &v in &w.0 {
                    assert_relative_eq!(v, expected, epsilon = 1e-8, max_relative = 1e-8);
                }
            }
        }
    }

    #[test]
    fn mass_is_conserved() {
        let sp = space(6);
        let eps: f64 = 0.35;
        let solver = tight();
        let mut rng = crate::testutil::rng(23);
        let u0 = crate::testutil::random_field(&mut rng, sp.num_nodes(), 0.3);
        let m0 = sp.mean(&u0);
        for scheme in [
            ChScheme::Fis,
            ChScheme::Css,
            ChScheme::Mcn,
            ChScheme::FisEnergyMin,
        ] {
            let cfg = ChConfig {
                scheme,
                epsilon: eps,
                solver: solver.clone(),
            };
            let mut state = ChState::new(&sp, u0.clone());
            let k = 0.5 * eps.powi(3);
            for _ in 0..5 {
                let (next, _) = step_ch(&sp, &cfg, &state, k).unwrap();
                assert!(
                    (sp.mean(&next.u) - m0).abs() <= 1e-10 * m0.abs().max(1.0),
                    "{scheme:?} mass drift {}",
                    (sp.mean(&next.u) - m0).abs()
                );
                state = next;
            }
        }
    }

    /// The splitting step and the fully implicit step of the relaxed model
    /// solve the same algebraic system; two independent code paths must agree
    /// nodewise. Smallest grid: 9 nodes.
    #[test]
    fn css_equals_perturbed_model_fis() {
        let sp = space(2);
        let eps: f64 = 0.4;
        let solver = tight();
        let mut rng = crate::testutil::rng(31);
        let u0 = crate::testutil::random_field(&mut rng, sp.num_nodes(), 0.5);
        let k = 2.0 * eps.powi(3);
        let mut a = ChState::new(&sp, u0.clone());
        let mut b = ChState::new(&sp, u0);
        for _ in 0..3 {
            let (na, _) = step_css_ch(&sp, eps, &solver, &a, k).unwrap();
            let (nb, _) = step_fis_perturbed_ch(&sp, eps, &solver, &b, k).unwrap();
            let diff = na.u.max_abs_diff(&nb.u);
            assert!(diff < 1e-10, "diff {diff}");
            a = na;
            b = nb;
        }
    }

    #[test]
    fn conserved_energy_decreases_under_splitting() {
        let sp = space(8);
        let eps: f64 = 0.25;
        let solver = tight();
        let u0 = smooth_state(&sp, eps);
        for k in [eps.powi(3), 10.0 * eps.powi(3), 100.0 * eps.powi(3)] {
            let mut state = ChState::new(&sp, u0.clone());
            let mut j_prev = physical_energy_ch(&sp, eps, &state.u);
            for _ in 0..3 {
                let (next, _) = step_css_ch(&sp, eps, &solver, &state, k).unwrap();
                let j = physical_energy_ch(&sp, eps, &next.u);
                assert!(j <= j_prev + 1e-8, "k = {k}: {j} > {j_prev}");
                j_prev = j;
                state = next;
            }
        }
    }

    #[test]
    fn fis_matches_energy_minimization_in_convex_regime() {
        let sp = space(6);
        let eps: f64 = 0.5;
        let k = 2.0 * eps.powi(3);
        let mut solver = tight();
        solver.lbfgs.tol = 1e-11;
        let state = ChState::new(&sp, smooth_state(&sp, 0.3));
        let (via_newton, _) = step_fis_ch(&sp, eps, &solver, &state, k).unwrap();
        let (via_min, _) = step_energymin_ch(
            &sp,
            eps,
            &solver,
            &state,
            k,
            EnergyVariant::ChFis,
            None,
        )
        .unwrap();
        assert!(via_newton.u.max_abs_diff(&via_min.u) < 1e-8);
    }

    #[test]
    fn mcn_energy_identity_at_large_steps() {
        let sp = space(8);
        let eps: f64 = 0.3;
        let k = 10.0 * 8.0 * eps.powi(3);
        let solver = tight();
        let mut state = ChState::new(&sp, smooth_state(&sp, eps));
        for _ in 0..10 {
            let (next, _) = step_mcn_ch(&sp, eps, &solver, &state, k).unwrap();
            let mut delta = next.u.sub(&state.u);
            sp.project_zero_mean(&mut delta);
            let hm = sp.hminus1_norm_sq(&delta).unwrap();
            let residual = physical_energy_ch(&sp, eps, &next.u) + hm / k
                - physical_energy_ch(&sp, eps, &state.u);
            assert!(residual.abs() < 1e-8, "identity residual {residual}");
            state = next;
        }
    }

    #[test]
    fn relaxed_energymin_with_delta_k_reduces_to_splitting() {
        let sp = space(5);
        let eps: f64 = 0.4;
        let k = 3.0 * eps.powi(3);
        let mut solver = tight();
        solver.lbfgs.tol = 1e-11;
        let state = ChState::new(&sp, smooth_state(&sp, 0.3));
        let (css, _) = step_css_ch(&sp, eps, &solver, &state, k).unwrap();
        let (relaxed, _) = step_energymin_ch(
            &sp,
            eps,
            &solver,
            &state,
            k,
            EnergyVariant::ChConvexified { delta: k },
            None,
        )
        .unwrap();
        assert!(css.u.max_abs_diff(&relaxed.u) < 1e-8);
    }

    #[test]
    fn increments_stay_zero_mean() {
        let sp = space(6);
        let eps: f64 = 0.3;
        let solver = tight();
        let mut rng = crate::testutil::rng(47);
        let u0 = crate::testutil::random_field(&mut rng, sp.num_nodes(), 0.4);
        let state = ChState::new(&sp, u0);
        let (next, _) = step_fis_ch(&sp, eps, &solver, &state, eps.powi(3)).unwrap();
        let theta = next.u.sub(&state.u);
        assert!(sp.mean(&theta).abs() < 1e-12);
    }
}
