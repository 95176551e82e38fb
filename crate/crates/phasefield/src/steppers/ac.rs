//! Time steppers for the nonconserved flow.
//!
//! Every implicit step is solved as the stationarity condition of the
//! matching step energy from [`crate::energies`], so Newton and the
//! energy-minimization route share one residual definition. The splitting
//! schemes are algebraically identical to fully implicit steps with rescaled
//! step sizes; the tests and the equivalence harness check those identities
//! nodewise.

use super::{SolverConfig, StepStats};
use crate::energies::{EnergyContext, EnergyVariant};
use crate::error::{Error, Result};
use crate::fem::{Field, FemSpace};
use crate::mesh::check_delaunay;
use crate::potentials::{midpoint_split, secant_slope, secant_slope_prime, well_prime};
use crate::solvers::{
    cg, lbfgs_minimize, newton, CgMode, NewtonConfig, Preconditioner,
};
use crate::sparse::CsrMatrix;

/// Scheme tags for the nonconserved flow.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AcScheme {
    /// Fully implicit step solved by Newton.
    Fis,
    /// Fully implicit step solved by energy minimization (L-BFGS).
    FisEnergyMin,
    /// Convex splitting: implicit `u^3`, explicit linear part.
    Css,
    /// Explicit nonlinearity, implicit diffusion.
    SemiImplicit,
    /// Semi-implicit with the stabilization `S/eps^2 (u - uprev)`.
    StabSemiImplicit { s: f64 },
    /// Fully implicit step with nodally integrated (lumped) zero-order terms;
    /// preserves `|u| <= 1` on Delaunay meshes.
    FisLumped,
    /// Convex splitting with lumped zero-order terms.
    CssLumped,
    /// Standard Crank-Nicolson.
    Scn,
    /// Crank-Nicolson with the secant nonlinearity (exact energy identity).
    Mcn,
    /// Secant Crank-Nicolson solved by energy minimization.
    McnEnergyMin,
    /// Convex-splitting form of the secant Crank-Nicolson scheme.
    CssMcn,
    /// Two-step backward differentiation with explicit extrapolated
    /// nonlinearity and stabilization `S`.
    Bdf2 { s: f64 },
    /// Two-step convex splitting (second order).
    Css2,
    /// Fully implicit step of the relaxed model `(1 + delta/eps^2) u_t`.
    ConvexifiedFis { delta: f64 },
}

/// Stepper configuration for the nonconserved flow.
#[derive(Debug, Clone)]
pub struct AcConfig {
    pub scheme: AcScheme,
    pub epsilon: f64,
    pub solver: SolverConfig,
}

/// Time-stepping state: current iterate, optional second history level for
/// the two-step schemes, time and step index.
#[derive(Debug, Clone)]
pub struct AcState {
    pub u: Field,
    pub u_prevprev: Option<Field>,
    pub t: f64,
    pub n: usize,
    /// Step size that produced `u` (two-step schemes require a uniform step).
    pub last_k: Option<f64>,
}

impl AcState {
    pub fn new(u: Field) -> Self {
        AcState {
            u,
            u_prevprev: None,
            t: 0.0,
            n: 0,
            last_k: None,
        }
    }

    fn advanced(&self, u_new: Field, k: f64) -> AcState {
        AcState {
            u_prevprev: Some(self.u.clone()),
            u: u_new,
            t: self.t + k,
            n: self.n + 1,
            last_k: Some(k),
        }
    }
}

/// Newton solve of a step energy's stationarity system.
fn newton_on_context(
    ctx: &EnergyContext,
    u0: &Field,
    cfg: &NewtonConfig,
    precond: Option<&Preconditioner>,
) -> Result<(Field, StepStats)> {
    let residual = |u: &Field| ctx.step_residual(u);
    let jacobian = |u: &Field| -> Result<Box<dyn Fn(&Field) -> Field + '_>> {
        let mat = ctx.step_hessian_matrix(u)?;
        Ok(Box::new(move |v: &Field| Field(mat.matvec(&v.0))))
    };
    let norm = |r: &Field| ctx.residual_norm(r);
    let metric = |v: &Field| ctx.metric_apply(v);
    let out = newton(
        &residual,
        &jacobian,
        &norm,
        u0,
        None,
        None,
        precond,
        Some((&metric, 1.0 / ctx.k)),
        cfg,
    )?;
    Ok((
        out.solution,
        StepStats {
            newton_iters: out.iterations,
            linear_iters: out.linear_iterations,
            ..StepStats::default()
        },
    ))
}

/// L-BFGS minimization of a step energy started from `u0`.
fn minimize_context(
    ctx: &EnergyContext,
    u0: &Field,
    solver: &SolverConfig,
) -> Result<(Field, StepStats)> {
    let energy = |u: &Field| ctx.step_energy(u);
    let gradient = |u: &Field| ctx.step_gradient(u);
    let inner = |a: &Field, b: &Field| ctx.inner(a, b);
    let out = lbfgs_minimize(&energy, &gradient, &inner, u0, None, &solver.lbfgs)?;
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

/// Fully implicit step: Newton from the previous state.
pub fn step_fis(
    space: &FemSpace,
    eps: f64,
    solver: &SolverConfig,
    state: &AcState,
    k: f64,
) -> Result<(AcState, StepStats)> {
    let ctx = EnergyContext::new(space, eps, k, state.u.clone(), EnergyVariant::AcFis)?;
    let (u, stats) = newton_on_context(&ctx, &state.u, &solver.newton, None)?;
    Ok((state.advanced(u, k), stats))
}

/// Convex-splitting step; the implicit system is convex for every step size.
pub fn step_css(
    space: &FemSpace,
    eps: f64,
    solver: &SolverConfig,
    state: &AcState,
    k: f64,
) -> Result<(AcState, StepStats)> {
    let ctx = EnergyContext::new(space, eps, k, state.u.clone(), EnergyVariant::AcCss)?;
    let (u, stats) = newton_on_context(&ctx, &state.u, &solver.newton, None)?;
    Ok((state.advanced(u, k), stats))
}

/// Fully implicit step of the relaxed model with damping `delta`; at
/// `delta = 0` this is the plain implicit step and at `delta = k` it
/// reproduces the convex-splitting step.
pub fn step_convexified_fis(
    space: &FemSpace,
    eps: f64,
    delta: f64,
    solver: &SolverConfig,
    state: &AcState,
    k: f64,
) -> Result<(AcState, StepStats)> {
    let ctx = EnergyContext::new(
        space,
        eps,
        k,
        state.u.clone(),
        EnergyVariant::AcConvexified { delta },
    )?;
    let (u, stats) = newton_on_context(&ctx, &state.u, &solver.newton, None)?;
    Ok((state.advanced(u, k), stats))
}

fn linear_step(
    lhs: &CsrMatrix,
    rhs: &Field,
    solver: &SolverConfig,
) -> Result<(Field, usize)> {
    let out = cg(
        |v| Field(lhs.matvec(&v.0)),
        rhs,
        solver.newton.linear_tol,
        solver.newton.linear_max_iters,
        None,
        CgMode::FailOnIndefinite,
    )?;
    if !out.converged {
        return Err(Error::LinearSolve {
            iterations: out.iterations,
            residual: out.final_residual,
            tol: solver.newton.linear_tol,
        });
    }
    Ok((out.solution, out.iterations))
}

/// Semi-implicit step: explicit nonlinearity, one linear solve.
pub fn step_semi_implicit(
    space: &FemSpace,
    eps: f64,
    solver: &SolverConfig,
    state: &AcState,
    k: f64,
) -> Result<(AcState, StepStats)> {
    let e2 = eps * eps;
    let lhs = space
        .stiffness
        .linear_combination(1.0, &space.mass, 1.0 / k);
    let mut rhs = space.apply_mass(&state.u);
    rhs.scale(1.0 / k);
    rhs.axpy(-1.0 / e2, &space.nonlinear_load(&state.u, well_prime));
    let (u, iters) = linear_step(&lhs, &rhs, solver)?;
    Ok((
        state.advanced(u, k),
        StepStats {
            linear_iters: iters,
            ..StepStats::default()
        },
    ))
}

/// Stabilized semi-implicit step with constant `s`.
pub fn step_stab_semi_implicit(
    space: &FemSpace,
    eps: f64,
    s: f64,
    solver: &SolverConfig,
    state: &AcState,
    k: f64,
) -> Result<(AcState, StepStats)> {
    if s <= 0.0 {
        return Err(Error::Config(format!(
            "stabilization constant must be positive, got {s}"
        )));
    }
    let e2 = eps * eps;
    let shift = 1.0 / k + s / e2;
    let lhs = space.stiffness.linear_combination(1.0, &space.mass, shift);
    let mut rhs = space.apply_mass(&state.u);
    rhs.scale(shift);
    rhs.axpy(-1.0 / e2, &space.nonlinear_load(&state.u, well_prime));
    let (u, iters) = linear_step(&lhs, &rhs, solver)?;
    Ok((
        state.advanced(u, k),
        StepStats {
            linear_iters: iters,
            ..StepStats::default()
        },
    ))
}

fn delaunay_flag(space: &FemSpace) -> bool {
    !check_delaunay(&space.mesh).all_pass
}

/// Lumped fully implicit step. Newton linear solves use the
/// shifted-Laplacian preconditioner when `gamma = k/eps^2 < 1`; a failed
/// Newton solve falls back to minimizing the lumped step energy, whose
/// stationary points solve the same system.
pub fn step_fis_lumped(
    space: &FemSpace,
    eps: f64,
    solver: &SolverConfig,
    state: &AcState,
    k: f64,
) -> Result<(AcState, StepStats)> {
    let ctx = EnergyContext::new(space, eps, k, state.u.clone(), EnergyVariant::AcFisLumped)?;
    let precond = Preconditioner::build(space, eps, k).ok();
    let warn = delaunay_flag(space);
    match newton_on_context(&ctx, &state.u, &solver.newton, precond.as_ref()) {
        Ok((u, mut stats)) => {
            stats.delaunay_warning = warn;
            Ok((state.advanced(u, k), stats))
        }
        Err(_) => {
            let (u, mut stats) = minimize_context(&ctx, &state.u, solver)?;
            stats.fallback_used = true;
            stats.delaunay_warning = warn;
            Ok((state.advanced(u, k), stats))
        }
    }
}

/// Lumped convex-splitting step. Its linearization equals the lumped
/// implicit one at the rescaled step `eps^2 k / (k + eps^2)`, so the
/// preconditioner is built at that step size (where it is always available).
pub fn step_css_lumped(
    space: &FemSpace,
    eps: f64,
    solver: &SolverConfig,
    state: &AcState,
    k: f64,
) -> Result<(AcState, StepStats)> {
    let e2 = eps * eps;
    let b = state.u.clone();
    let warn = delaunay_flag(space);
    let residual = |u: &Field| -> Result<Field> {
        let mut r = space.apply_stiffness(u);
        for i in 0..r.len() {
            let m = space.lumped_mass[i];
            r[i] += m * ((u[i] - b[i]) / k + (u[i] * u[i] * u[i] - b[i]) / e2);
        }
        Ok(r)
    };
    let jacobian = |u: &Field| -> Result<Box<dyn Fn(&Field) -> Field + '_>> {
        let diag: Vec<f64> = space
            .lumped_mass
            .iter()
            .zip(&u.0)
            .map(|(&m, &x)| m * (1.0 / k + 3.0 * x * x / e2))
            .collect();
        let mat = space.stiffness.with_added_diagonal(&diag);
        Ok(Box::new(move |v: &Field| Field(mat.matvec(&v.0))))
    };
    let norm = |r: &Field| -> Result<f64> {
        Ok(r.0
            .iter()
            .zip(&space.lumped_mass)
            .map(|(&x, &m)| x * x / m)
            .sum::<f64>()
            .sqrt())
    };
    let k_equiv = e2 * k / (k + e2);
    let precond = Preconditioner::build(space, eps, k_equiv).ok();
    let metric = |v: &Field| space.apply_lumped_mass(v);
    let out = newton(
        &residual,
        &jacobian,
        &norm,
        &state.u,
        None,
        None,
        precond.as_ref(),
        Some((&metric, 1.0 / k)),
        &solver.newton,
    )?;
    Ok((
        state.advanced(out.solution, k),
        StepStats {
            newton_iters: out.iterations,
            linear_iters: out.linear_iterations,
            delaunay_warning: warn,
            ..StepStats::default()
        },
    ))
}

/// Standard Crank-Nicolson step.
pub fn step_scn(
    space: &FemSpace,
    eps: f64,
    solver: &SolverConfig,
    state: &AcState,
    k: f64,
) -> Result<(AcState, StepStats)> {
    let ctx = EnergyContext::new(space, eps, k, state.u.clone(), EnergyVariant::AcScn)?;
    match newton_on_context(&ctx, &state.u, &solver.newton, None) {
        Ok((u, stats)) => Ok((state.advanced(u, k), stats)),
        Err(_) => {
            let (u, mut stats) = minimize_context(&ctx, &state.u, solver)?;
            stats.fallback_used = true;
            Ok((state.advanced(u, k), stats))
        }
    }
}

/// Crank-Nicolson step with the secant nonlinearity; satisfies the exact
/// per-step energy identity for any step size.
pub fn step_mcn(
    space: &FemSpace,
    eps: f64,
    solver: &SolverConfig,
    state: &AcState,
    k: f64,
) -> Result<(AcState, StepStats)> {
    let ctx = EnergyContext::new(space, eps, k, state.u.clone(), EnergyVariant::AcMcn)?;
    match newton_on_context(&ctx, &state.u, &solver.newton, None) {
        Ok((u, stats)) => Ok((state.advanced(u, k), stats)),
        Err(_) => {
            let (u, mut stats) = minimize_context(&ctx, &state.u, solver)?;
            stats.fallback_used = true;
            Ok((state.advanced(u, k), stats))
        }
    }
}

/// Convex-splitting form of the secant Crank-Nicolson step: implicit convex
/// part `g_+(u; uprev)`, explicit `g_-(uprev; uprev) = uprev`.
pub fn step_css_mcn(
    space: &FemSpace,
    eps: f64,
    solver: &SolverConfig,
    state: &AcState,
    k: f64,
) -> Result<(AcState, StepStats)> {
    let e2 = eps * eps;
    let b = state.u.clone();
    let residual = |u: &Field| -> Result<Field> {
        let mid = u.add_scaled(1.0, &b);
        let mut r = space.apply_stiffness(&mid);
        r.scale(0.5);
        r.axpy(1.0 / k, &space.apply_mass(&u.sub(&b)));
        r.axpy(
            1.0 / e2,
            &space.nonlinear_load2(u, &b, |a, p| midpoint_split(a, p).0),
        );
        r.axpy(-1.0 / e2, &space.apply_mass(&b));
        Ok(r)
    };
    let jacobian = |u: &Field| -> Result<Box<dyn Fn(&Field) -> Field + '_>> {
        let w = space.weighted_mass2(u, &b, |a, p| crate::potentials::midpoint_split_prime(a, p));
        let mat = space
            .stiffness
            .linear_combination(0.5, &space.mass, 1.0 / k)
            .linear_combination(1.0, &w, 1.0 / e2);
        Ok(Box::new(move |v: &Field| Field(mat.matvec(&v.0))))
    };
    let norm = |r: &Field| -> Result<f64> {
        let g = space.mass_solve(r)?;
        Ok(g.dot(&space.apply_mass(&g)).sqrt())
    };
    let metric = |v: &Field| space.apply_mass(v);
    let out = newton(
        &residual,
        &jacobian,
        &norm,
        &state.u,
        None,
        None,
        None,
        Some((&metric, 1.0 / k)),
        &solver.newton,
    )?;
    Ok((
        state.advanced(out.solution, k),
        StepStats {
            newton_iters: out.iterations,
            linear_iters: out.linear_iterations,
            ..StepStats::default()
        },
    ))
}

fn require_history<'s>(
    state: &'s AcState,
    k: f64,
    scheme: &str,
    uniform_only: bool,
) -> Result<&'s Field> {
    let prev = state.u_prevprev.as_ref().ok_or_else(|| {
        Error::Config(format!("{scheme} requires two history levels"))
    })?;
    if uniform_only {
        if let Some(last) = state.last_k {
            if (last - k).abs() > 1e-14 * k.max(last) {
                return Err(Error::Config(format!(
                    "{scheme} is restricted to a uniform step size: previous step {last}, requested {k}"
                )));
            }
        }
    }
    Ok(prev)
}

/// Bootstraps the two-step schemes: one secant Crank-Nicolson step (second
/// order) at the same step size.
pub fn bootstrap_second_order(
    space: &FemSpace,
    eps: f64,
    solver: &SolverConfig,
    state: &AcState,
    k: f64,
) -> Result<(AcState, StepStats)> {
    step_mcn(space, eps, solver, state, k)
}

/// Two-step backward-differentiation step with stabilization `s`; linear.
pub fn step_bdf2(
    space: &FemSpace,
    eps: f64,
    s: f64,
    solver: &SolverConfig,
    state: &AcState,
    k: f64,
) -> Result<(AcState, StepStats)> {
    if s <= 0.0 {
        return Err(Error::Config(format!(
            "stabilization constant must be positive, got {s}"
        )));
    }
    let prev = require_history(state, k, "the two-step backward-differentiation scheme", true)?;
    let e2 = eps * eps;
    let b = &state.u;
    let lhs = space
        .stiffness
        .linear_combination(1.0, &space.mass, 1.5 / k + s / e2);
    // rhs = M (4b - prev)/(2k) - (2 f(b) - f(prev))/e2 + S M (2b - prev)/e2.
    let mut combo = b.clone();
    combo.scale(4.0 / (2.0 * k) + 2.0 * s / e2);
    combo.axpy(-(1.0 / (2.0 * k) + s / e2), prev);
    let mut rhs = space.apply_mass(&combo);
    rhs.axpy(-2.0 / e2, &space.nonlinear_load(b, well_prime));
    rhs.axpy(1.0 / e2, &space.nonlinear_load(prev, well_prime));
    let (u, iters) = linear_step(&lhs, &rhs, solver)?;
    Ok((
        state.advanced(u, k),
        StepStats {
            linear_iters: iters,
            ..StepStats::default()
        },
    ))
}

/// Two-step convex-splitting step: implicit `g_+(u; uprev)`, explicit
/// extrapolation `(3 uprev - uprevprev)/2`.
pub fn step_css2(
    space: &FemSpace,
    eps: f64,
    solver: &SolverConfig,
    state: &AcState,
    k: f64,
) -> Result<(AcState, StepStats)> {
    let prev = require_history(state, k, "the two-step convex-splitting scheme", false)?.clone();
    let e2 = eps * eps;
    let b = state.u.clone();
    let residual = |u: &Field| -> Result<Field> {
        let mid = u.add_scaled(1.0, &b);
        let mut r = space.apply_stiffness(&mid);
        r.scale(0.5);
        r.axpy(1.0 / k, &space.apply_mass(&u.sub(&b)));
        r.axpy(
            1.0 / e2,
            &space.nonlinear_load2(u, &b, |a, p| midpoint_split(a, p).0),
        );
        let mut expl = b.clone();
        expl.scale(3.0);
        expl.axpy(-1.0, &prev);
        r.axpy(-0.5 / e2, &space.apply_mass(&expl));
        Ok(r)
    };
    let jacobian = |u: &Field| -> Result<Box<dyn Fn(&Field) -> Field + '_>> {
        let w = space.weighted_mass2(u, &b, |a, p| crate::potentials::midpoint_split_prime(a, p));
        let mat = space
            .stiffness
            .linear_combination(0.5, &space.mass, 1.0 / k)
            .linear_combination(1.0, &w, 1.0 / e2);
        Ok(Box::new(move |v: &Field| Field(mat.matvec(&v.0))))
    };
    let norm = |r: &Field| -> Result<f64> {
        let g = space.mass_solve(r)?;
        Ok(g.dot(&space.apply_mass(&g)).sqrt())
    };
    let metric = |v: &Field| space.apply_mass(v);
    let out = newton(
        &residual,
        &jacobian,
        &norm,
        &state.u,
        None,
        None,
        None,
        Some((&metric, 1.0 / k)),
        &solver.newton,
    )?;
    Ok((
        state.advanced(out.solution, k),
        StepStats {
            newton_iters: out.iterations,
            linear_iters: out.linear_iterations,
            ..StepStats::default()
        },
    ))
}

/// Secant Crank-Nicolson discretization of the second-order relaxed model
/// `u_t + (delta/eps^2) u_tt`: the independent route that the two-step
/// convex-splitting step must match at `delta = k^2/2`.
pub fn step_mcn_relaxed_second_order(
    space: &FemSpace,
    eps: f64,
    delta: f64,
    solver: &SolverConfig,
    state: &AcState,
    k: f64,
) -> Result<(AcState, StepStats)> {
    let prev = require_history(state, k, "the relaxed second-order scheme", false)?.clone();
    let e2 = eps * eps;
    let b = state.u.clone();
    let residual = |u: &Field| -> Result<Field> {
        let mid = u.add_scaled(1.0, &b);
        let mut r = space.apply_stiffness(&mid);
        r.scale(0.5);
        r.axpy(1.0 / k, &space.apply_mass(&u.sub(&b)));
        // Second difference u - 2 uprev + uprevprev.
        let mut dd = u.clone();
        dd.axpy(-2.0, &b);
        dd.axpy(1.0, &prev);
        r.axpy(delta / (e2 * k * k), &space.apply_mass(&dd));
        r.axpy(1.0 / e2, &space.nonlinear_load2(u, &b, secant_slope));
        Ok(r)
    };
    let jacobian = |u: &Field| -> Result<Box<dyn Fn(&Field) -> Field + '_>> {
        let w = space.weighted_mass2(u, &b, secant_slope_prime);
        let mat = space
            .stiffness
            .linear_combination(0.5, &space.mass, 1.0 / k + delta / (e2 * k * k))
            .linear_combination(1.0, &w, 1.0 / e2);
        Ok(Box::new(move |v: &Field| Field(mat.matvec(&v.0))))
    };
    let norm = |r: &Field| -> Result<f64> {
        let g = space.mass_solve(r)?;
        Ok(g.dot(&space.apply_mass(&g)).sqrt())
    };
    let metric = |v: &Field| space.apply_mass(v);
    let out = newton(
        &residual,
        &jacobian,
        &norm,
        &state.u,
        None,
        None,
        None,
        Some((&metric, 1.0 / k)),
        &solver.newton,
    )?;
    Ok((
        state.advanced(out.solution, k),
        StepStats {
            newton_iters: out.iterations,
            linear_iters: out.linear_iterations,
            ..StepStats::default()
        },
    ))
}

/// Energy-minimization step: minimizes the selected step energy by L-BFGS.
///
/// `initial_guess` defaults to the previous state, which selects the
/// lowest-energy stationary point in practice; other guesses are accepted to
/// study the nonconvex regime.
pub fn step_energymin(
    space: &FemSpace,
    eps: f64,
    solver: &SolverConfig,
    state: &AcState,
    k: f64,
    variant: EnergyVariant,
    initial_guess: Option<&Field>,
) -> Result<(AcState, StepStats)> {
    match variant {
        EnergyVariant::AcFis
        | EnergyVariant::AcScn
        | EnergyVariant::AcMcn
        | EnergyVariant::AcFisLumped => {}
        other => {
            return Err(Error::Config(format!(
                "energy-minimization stepping supports the nonconserved variants, got {other:?}"
            )))
        }
    }
    let ctx = EnergyContext::new(space, eps, k, state.u.clone(), variant)?;
    let u0 = initial_guess.unwrap_or(&state.u);
    let (u, stats) = minimize_context(&ctx, u0, solver)?;
    Ok((state.advanced(u, k), stats))
}

/// Dispatch one step of `cfg.scheme`. Two-step schemes bootstrap their
/// missing history with one secant Crank-Nicolson step.
pub fn step_ac(
    space: &FemSpace,
    cfg: &AcConfig,
    state: &AcState,
    k: f64,
) -> Result<(AcState, StepStats)> {
    let eps = cfg.epsilon;
    let solver = &cfg.solver;
    match cfg.scheme {
        AcScheme::Fis => step_fis(space, eps, solver, state, k),
        AcScheme::FisEnergyMin => {
            step_energymin(space, eps, solver, state, k, EnergyVariant::AcFis, None)
        }
        AcScheme::Css => step_css(space, eps, solver, state, k),
        AcScheme::SemiImplicit => step_semi_implicit(space, eps, solver, state, k),
        AcScheme::StabSemiImplicit { s } => {
            step_stab_semi_implicit(space, eps, s, solver, state, k)
        }
        AcScheme::FisLumped => step_fis_lumped(space, eps, solver, state, k),
        AcScheme::CssLumped => step_css_lumped(space, eps, solver, state, k),
        AcScheme::Scn => step_scn(space, eps, solver, state, k),
        AcScheme::Mcn => step_mcn(space, eps, solver, state, k),
        AcScheme::McnEnergyMin => {
            step_energymin(space, eps, solver, state, k, EnergyVariant::AcMcn, None)
        }
        AcScheme::CssMcn => step_css_mcn(space, eps, solver, state, k),
        AcScheme::Bdf2 { s } => {
            if state.u_prevprev.is_none() {
                bootstrap_second_order(space, eps, solver, state, k)
            } else {
                step_bdf2(space, eps, s, solver, state, k)
            }
        }
        AcScheme::Css2 => {
            if state.u_prevprev.is_none() {
                bootstrap_second_order(space, eps, solver, state, k)
            } else {
                step_css2(space, eps, solver, state, k)
            }
        }
        AcScheme::ConvexifiedFis { delta } => {
            step_convexified_fis(space, eps, delta, solver, state, k)
        }
    }
}

/// Rescaled step size under which the fully implicit scheme reproduces the
/// convex-splitting step: `k' = eps^2 k / (k + eps^2)`.
pub fn css_equivalent_step(eps: f64, k: f64) -> f64 {
    let e2 = eps * eps;
    e2 * k / (k + e2)
}

/// Rescaled step size for the secant Crank-Nicolson pair:
/// `k' = 2 eps^2 k / (k + 2 eps^2)`.
pub fn css_mcn_equivalent_step(eps: f64, k: f64) -> f64 {
    let e2 = 2.0 * eps * eps;
    e2 * k / (k + e2)
}
