//! Linear and nonlinear solvers: (preconditioned) conjugate gradients, the
//! lumped-step preconditioner, a damped Newton driver and a limited-memory
//! BFGS minimizer.

use crate::error::{Error, Result};
use crate::fem::{Field, FemSpace};
use crate::sparse::{BandedCholesky, CsrMatrix};
use std::collections::VecDeque;

/// Outcome of a CG or PCG solve.
#[derive(Debug, Clone)]
pub struct LinearSolveResult {
    pub solution: Field,
    pub iterations: usize,
    /// Relative residual at exit (2-norm for CG, preconditioner-weighted for
    /// PCG).
    pub final_residual: f64,
    pub converged: bool,
}

/// What to do when CG meets a direction of non-positive curvature.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CgMode {
    /// Return [`Error::Indefinite`].
    FailOnIndefinite,
    /// Stop and return the current iterate (truncated Newton-CG behaviour).
    TruncateOnIndefinite,
}

/// Conjugate gradients for a symmetric positive (semi)definite operator.
///
/// `project`, when given, is applied to the right-hand side and to every
/// iterate, which restricts the solve to an invariant subspace (used for the
/// singular Neumann stiffness, whose kernel is the constants).
///
/// Reaching the iteration cap is reported through `converged = false`, not an
/// error; detecting an indefinite direction depends on `mode`.
pub fn cg(
    apply: impl Fn(&Field) -> Field,
    b: &Field,
    tol: f64,
    max_iters: usize,
    project: Option<&dyn Fn(&mut Field)>,
    mode: CgMode,
) -> Result<LinearSolveResult> {
    let n = b.len();
    let mut x = Field::zeros(n);
    let mut r = b.clone();
    if let Some(p) = project {
        p(&mut r);
    }
    let b_norm = r.dot(&r).sqrt();
    if b_norm == 0.0 {
        return Ok(LinearSolveResult {
            solution: x,
            iterations: 0,
            final_residual: 0.0,
            converged: true,
        });
    }
    let mut p = r.clone();
    let mut rr = r.dot(&r);
    for iter in 1..=max_iters {
        let mut ap = apply(&p);
        if let Some(proj) = project {
            proj(&mut ap);
        }
        let pap = p.dot(&ap);
        if pap <= 0.0 {
            match mode {
                CgMode::FailOnIndefinite => {
                    return Err(Error::Indefinite {
                        iteration: iter,
                        curvature: pap,
                    })
                }
                CgMode::TruncateOnIndefinite => {
                    if iter == 1 {
                        // Fall back to the steepest-descent direction.
                        x = r.clone();
                    }
                    return Ok(LinearSolveResult {
                        solution: x,
                        iterations: iter,
                        final_residual: rr.sqrt() / b_norm,
                        converged: false,
                    });
                }
            }
        }
        let alpha = rr / pap;
        x.axpy(alpha, &p);
        r.axpy(-alpha, &ap);
        if let Some(proj) = project {
            proj(&mut x);
            proj(&mut r);
        }
        let rr_new = r.dot(&r);
        if rr_new.sqrt() <= tol * b_norm {
            return Ok(LinearSolveResult {
                solution: x,
                iterations: iter,
                final_residual: rr_new.sqrt() / b_norm,
                converged: true,
            });
        }
        let beta = rr_new / rr;
        rr = rr_new;
        let mut p_next = r.clone();
        p_next.axpy(beta, &p);
        p = p_next;
    }
    Ok(LinearSolveResult {
        solution: x,
        iterations: max_iters,
        final_residual: rr.sqrt() / b_norm,
        converged: false,
    })
}

/// Preconditioned conjugate gradients; stops on the preconditioner-weighted
/// relative residual `sqrt(r'Br / r0'Br0) <= tol`.
pub fn pcg(
    apply: impl Fn(&Field) -> Field,
    precondition: impl Fn(&Field) -> Field,
    b: &Field,
    tol: f64,
    max_iters: usize,
    mode: CgMode,
) -> Result<LinearSolveResult> {
    let n = b.len();
    let mut x = Field::zeros(n);
    let mut r = b.clone();
    let mut z = precondition(&r);
    let mut rz = r.dot(&z);
    if rz < 0.0 {
        return Err(Error::Indefinite {
            iteration: 0,
            curvature: rz,
        });
    }
    let rz0 = rz;
    if rz0 == 0.0 {
        return Ok(LinearSolveResult {
            solution: x,
            iterations: 0,
            final_residual: 0.0,
            converged: true,
        });
    }
    let mut p = z.clone();
    for iter in 1..=max_iters {
        let ap = apply(&p);
        let pap = p.dot(&ap);
        if pap <= 0.0 {
            match mode {
                CgMode::FailOnIndefinite => {
                    return Err(Error::Indefinite {
                        iteration: iter,
                        curvature: pap,
                    })
                }
                CgMode::TruncateOnIndefinite => {
                    if iter == 1 {
                        x = z.clone();
                    }
                    return Ok(LinearSolveResult {
                        solution: x,
                        iterations: iter,
                        final_residual: (rz / rz0).sqrt(),
                        converged: false,
                    });
                }
            }
        }
        let alpha = rz / pap;
        x.axpy(alpha, &p);
        r.axpy(-alpha, &ap);
        z = precondition(&r);
        let rz_new = r.dot(&z);
        if rz_new.max(0.0).sqrt() <= tol * rz0.sqrt() {
            return Ok(LinearSolveResult {
                solution: x,
                iterations: iter,
                final_residual: (rz_new.max(0.0) / rz0).sqrt(),
                converged: true,
            });
        }
        let beta = rz_new / rz;
        rz = rz_new;
        let mut p_next = z.clone();
        p_next.axpy(beta, &p);
        p = p_next;
    }
    Ok(LinearSolveResult {
        solution: x,
        iterations: max_iters,
        final_residual: (rz / rz0).sqrt(),
        converged: false,
    })
}

/// Shifted-Laplacian preconditioner for the linearization of the lumped
/// implicit step: applies `B = ((1 - gamma)/k ML + A)^{-1}` with
/// `gamma = k / eps^2`, through an exact banded Cholesky solve.
///
/// The preconditioned linearization has generalized condition number at most
/// `(1 + 2 gamma) / (1 - gamma)` whenever the state stays in `[-1, 1]`.
#[derive(Debug)]
pub struct Preconditioner {
    pub gamma: f64,
    /// The operator `B^{-1}` itself (used by the spectrum estimator).
    pub inverse: CsrMatrix,
    factor: BandedCholesky,
}

impl Preconditioner {
    /// Builds and factors `B^{-1} = ((1 - gamma)/k) ML + A`. Fails when
    /// `gamma = k/eps^2 >= 1`, where the shift makes the operator indefinite.
    pub fn build(space: &FemSpace, eps: f64, k: f64) -> Result<Self> {
        let gamma = k / (eps * eps);
        if gamma >= 1.0 {
            return Err(Error::PreconditionerUnavailable { gamma });
        }
        let diag_b: Vec<f64> = space
            .lumped_mass
            .iter()
            .map(|&ml| ml * (1.0 - gamma) / k)
            .collect();
        let inverse = space.stiffness.with_added_diagonal(&diag_b);
        let factor = BandedCholesky::factor(&inverse, false)?;
        Ok(Preconditioner {
            gamma,
            inverse,
            factor,
        })
    }

    pub fn apply(&self, r: &Field) -> Field {
        Field(self.factor.solve(&r.0))
    }

    /// Bound `(1 + 2 gamma) / (1 - gamma)` on the preconditioned condition
    /// number.
    pub fn condition_bound(&self) -> f64 {
        (1.0 + 2.0 * self.gamma) / (1.0 - self.gamma)
    }
}

/// Builds the Newton linearization of the lumped implicit step at `u_state`,
/// `L = (1/k) ML + A + eps^{-2} ML diag(3 u^2 - 1)`, together with its
/// shifted-Laplacian preconditioner.
///
/// Fails with a configuration hint when `gamma = k/eps^2 >= 1`, where the
/// shifted operator stops being positive definite.
pub fn pcg_step_operator(
    space: &FemSpace,
    eps: f64,
    k: f64,
    u_state: &Field,
) -> Result<(CsrMatrix, Preconditioner)> {
    let operator = lumped_step_linearization(space, eps, k, u_state);
    let precond = Preconditioner::build(space, eps, k)?;
    Ok((operator, precond))
}

/// The Newton linearization of the lumped implicit step at `u_state`,
/// `(1/k) ML + A + eps^{-2} ML diag(3 u^2 - 1)`.
pub fn lumped_step_linearization(
    space: &FemSpace,
    eps: f64,
    k: f64,
    u_state: &Field,
) -> CsrMatrix {
    let n = space.num_nodes();
    let mut diag_l = vec![0.0; n];
    for i in 0..n {
        let ml = space.lumped_mass[i];
        let ui = u_state[i];
        diag_l[i] = ml * (1.0 / k + (3.0 * ui * ui - 1.0) / (eps * eps));
    }
    space.stiffness.with_added_diagonal(&diag_l)
}

/// Configuration of the damped Newton driver.
#[derive(Debug, Clone)]
pub struct NewtonConfig {
    /// Tolerance on the mass-weighted norm of the assembled residual.
    pub tol: f64,
    pub max_iters: usize,
    /// Backtracking halvings allowed per iteration.
    pub max_halvings: usize,
    /// Relative tolerance of the inner linear solves.
    pub linear_tol: f64,
    pub linear_max_iters: usize,
}

impl Default for NewtonConfig {
    fn default() -> Self {
        NewtonConfig {
            tol: 1e-12,
            max_iters: 60,
            max_halvings: 30,
            linear_tol: 1e-10,
            linear_max_iters: 5000,
        }
    }
}

/// Iteration record of a Newton solve.
#[derive(Debug, Clone)]
pub struct NewtonOutcome {
    pub solution: Field,
    pub iterations: usize,
    /// Total inner CG/PCG iterations.
    pub linear_iterations: usize,
    pub residual_norms: Vec<f64>,
}

/// Damped Newton on an assembled residual with truncated-CG inner solves.
///
/// `jacobian(u)` returns the action of the symmetric linearization at `u`;
/// `norm` measures assembled residuals (mass-weighted). `project` restricts
/// iterates to a subspace (zero mean for the conserved problems) and
/// `project_dual` does the same on assembled functionals. Backtracking halves
/// the step until the residual norm decreases. When the plain direction makes
/// no progress and `damp` (the mass action, with `damp_scale` of order `1/k`)
/// is available, the direction is recomputed from `J + mu M` for an
/// escalating ladder of shifts, which interpolates towards a backward-Euler
/// substep; only after the ladder fails is the step declared nonconvex,
/// carrying the last iterate.
#[allow(clippy::too_many_arguments)]
pub fn newton<'a>(
    residual: &dyn Fn(&Field) -> Result<Field>,
    jacobian: &'a dyn Fn(&Field) -> Result<Box<dyn Fn(&Field) -> Field + 'a>>,
    norm: &dyn Fn(&Field) -> Result<f64>,
    u0: &Field,
    project: Option<&dyn Fn(&mut Field)>,
    project_dual: Option<&dyn Fn(&mut Field)>,
    precond: Option<&Preconditioner>,
    damp: Option<(&dyn Fn(&Field) -> Field, f64)>,
    cfg: &NewtonConfig,
) -> Result<NewtonOutcome> {
    let mut u = u0.clone();
    if let Some(p) = project {
        p(&mut u);
    }
    let eval = |v: &Field| -> Result<(Field, f64)> {
        let mut r = residual(v)?;
        if let Some(pd) = project_dual {
            pd(&mut r);
        }
        let rn = norm(&r)?;
        Ok((r, rn))
    };
    let (mut r, mut rn) = eval(&u)?;
    let mut norms = vec![rn];
    let mut linear_total = 0;

    for iter in 0..cfg.max_iters {
        if rn <= cfg.tol {
            return Ok(NewtonOutcome {
                solution: u,
                iterations: iter,
                linear_iterations: linear_total,
                residual_norms: norms,
            });
        }
        let japply = jacobian(&u)?;
        let mut shifts = vec![0.0];
        if let Some((_, scale)) = damp {
            shifts.extend([0.3, 1.0, 3.0, 10.0, 100.0].map(|c| c * scale));
        }

        let mut accepted = false;
        for mu in shifts {
            let apply = |v: &Field| -> Field {
                let mut vin = v.clone();
                if let Some(p) = project {
                    p(&mut vin);
                }
                let mut y = japply(&vin);
                if mu > 0.0 {
                    if let Some((m, _)) = damp {
                        y.axpy(mu, &m(&vin));
                    }
                }
                if let Some(pd) = project_dual {
                    pd(&mut y);
                }
                y
            };
            let mut rhs = r.clone();
            rhs.scale(-1.0);
            let solve = match precond {
                Some(pre) if mu == 0.0 => pcg(
                    apply,
                    |v| pre.apply(v),
                    &rhs,
                    cfg.linear_tol,
                    cfg.linear_max_iters,
                    CgMode::TruncateOnIndefinite,
                )?,
                _ => cg(
                    apply,
                    &rhs,
                    cfg.linear_tol,
                    cfg.linear_max_iters,
                    None,
                    CgMode::TruncateOnIndefinite,
                )?,
            };
            linear_total += solve.iterations;
            let mut d = solve.solution;
            if let Some(p) = project {
                p(&mut d);
            }

            let mut step = 1.0;
            for _ in 0..=cfg.max_halvings {
                let trial = u.add_scaled(step, &d);
                let (r_t, rn_t) = eval(&trial)?;
                if rn_t < rn {
                    u = trial;
                    r = r_t;
                    rn = rn_t;
                    accepted = true;
                    break;
                }
                step *= 0.5;
            }
            if accepted {
                break;
            }
        }
        if !accepted {
            return Err(Error::NonconvexStep {
                iteration: iter,
                halvings: cfg.max_halvings,
                residual: rn,
                last_iterate: u.0.clone(),
            });
        }
        norms.push(rn);
    }
    if rn <= cfg.tol {
        Ok(NewtonOutcome {
            solution: u,
            iterations: cfg.max_iters,
            linear_iterations: linear_total,
            residual_norms: norms,
        })
    } else {
        Err(Error::NewtonMaxIter {
            iterations: cfg.max_iters,
            residual: rn,
            tol: cfg.tol,
        })
    }
}

/// Configuration of the L-BFGS minimizer.
#[derive(Debug, Clone)]
pub struct LbfgsConfig {
    /// Tolerance on the gradient norm (in the supplied inner product).
    pub tol: f64,
    pub max_iters: usize,
    /// History length of the two-loop recursion.
    pub memory: usize,
    /// Armijo sufficient-decrease constant.
    pub c1: f64,
    pub max_backtracks: usize,
}

impl Default for LbfgsConfig {
    fn default() -> Self {
        LbfgsConfig {
            tol: 1e-8,
            max_iters: 2000,
            memory: 10,
            c1: 1e-4,
            max_backtracks: 60,
        }
    }
}

/// Iteration record of an L-BFGS run: full energy and gradient-norm traces.
#[derive(Debug, Clone)]
pub struct LbfgsOutcome {
    pub solution: Field,
    pub iterations: usize,
    pub energies: Vec<f64>,
    pub grad_norms: Vec<f64>,
    pub converged: bool,
    /// Set when the run terminated at the floating-point resolution of the
    /// energy rather than at the requested gradient tolerance: descent can no
    /// longer be certified and the gradient norm sits under the curvature-
    /// scaled rounding floor `sqrt(eps |E| lambda)`.
    pub hit_noise_floor: bool,
}

/// Limited-memory BFGS with two-loop recursion and Armijo backtracking.
///
/// `gradient` must return the Riesz representative of the energy derivative
/// in the inner product `inner`, so the Armijo model `E + c1 a <g, d>` is
/// exact. Curvature pairs with `<s, y> <= 1e-12 |s||y|` are skipped.
pub fn lbfgs_minimize(
    energy: &dyn Fn(&Field) -> Result<f64>,
    gradient: &dyn Fn(&Field) -> Result<Field>,
    inner: &dyn Fn(&Field, &Field) -> f64,
    u0: &Field,
    project: Option<&dyn Fn(&mut Field)>,
    cfg: &LbfgsConfig,
) -> Result<LbfgsOutcome> {
    let mut u = u0.clone();
    if let Some(p) = project {
        p(&mut u);
    }
    let mut e = energy(&u)?;
    let mut g = gradient(&u)?;
    let mut gn = inner(&g, &g).sqrt();
    let mut energies = vec![e];
    let mut grad_norms = vec![gn];
    let mut history: VecDeque<(Field, Field, f64)> = VecDeque::new();

    for iter in 0..cfg.max_iters {
        if gn <= cfg.tol {
            return Ok(LbfgsOutcome {
                solution: u,
                iterations: iter,
                energies,
                grad_norms,
                converged: true,
                hit_noise_floor: false,
            });
        }

        // Two-loop recursion for d = -H g.
        let mut q = g.clone();
        let mut alphas = Vec::with_capacity(history.len());
        for (s, y, rho) in history.iter().rev() {
            let a = rho * inner(s, &q);
            q.axpy(-a, y);
            alphas.push(a);
        }
        if let Some((s, y, _)) = history.back() {
            let scale = inner(s, y) / inner(y, y);
            q.scale(scale);
        }
        for ((s, y, rho), a) in history.iter().zip(alphas.into_iter().rev()) {
            let b = rho * inner(y, &q);
            q.axpy(a - b, s);
        }
        let mut d = q;
        d.scale(-1.0);

        let mut slope = inner(&g, &d);
        if slope >= 0.0 {
            // Not a descent direction; restart from steepest descent.
            history.clear();
            d = g.clone();
            d.scale(-1.0);
            slope = -inner(&g, &g);
        }

        // Near the minimum the Armijo decrease drops below the floating-point
        // resolution of the energy; a step is then accepted when it does not
        // raise the energy beyond rounding and strictly shrinks the gradient.
        let noise = 8.0 * f64::EPSILON * e.abs().max(1.0);
        let mut found = None;
        for attempt in 0..2 {
            if attempt == 1 {
                // Quasi-Newton direction failed; restart from steepest descent.
                history.clear();
                d = g.clone();
                d.scale(-1.0);
                slope = -inner(&g, &g);
            }
            let mut step = 1.0;
            for _ in 0..=cfg.max_backtracks {
                let mut trial = u.add_scaled(step, &d);
                if let Some(p) = project {
                    p(&mut trial);
                }
                let e_t = energy(&trial)?;
                if e_t <= e + cfg.c1 * step * slope {
                    found = Some((trial, e_t, None));
                    break;
                }
                if e_t <= e + noise {
                    let g_t = gradient(&trial)?;
                    if inner(&g_t, &g_t).sqrt() <= 0.999 * gn {
                        found = Some((trial, e_t.min(e), Some(g_t)));
                        break;
                    }
                }
                step *= 0.5;
            }
            if found.is_some() {
                break;
            }
        }
        let Some((u_next, e_next, g_known)) = found else {
            // No certifiable descent left. If the gradient sits below the
            // rounding floor that an energy-valued line search can resolve,
            // sqrt(eps |E| lambda) with lambda estimated from the curvature
            // pairs, the iterate is stationary to working precision.
            let lambda_est = history
                .iter()
                .map(|(s, y, _)| inner(y, y) / inner(s, y).max(f64::MIN_POSITIVE))
                .fold(1.0_f64, f64::max);
            let floor = 8.0 * (f64::EPSILON * e.abs().max(1.0) * lambda_est).sqrt();
            if gn <= floor {
                return Ok(LbfgsOutcome {
                    solution: u,
                    iterations: iter,
                    energies,
                    grad_norms,
                    converged: true,
                    hit_noise_floor: true,
                });
            }
            return Err(Error::LineSearch { iteration: iter });
        };

        let g_next = match g_known {
            Some(g) => g,
            None => gradient(&u_next)?,
        };
        let mut s = u_next.sub(&u);
        if let Some(p) = project {
            p(&mut s);
        }
        let y = g_next.sub(&g);
        let sy = inner(&s, &y);
        let s_norm = inner(&s, &s).sqrt();
        let y_norm = inner(&y, &y).sqrt();
        if sy > 1e-12 * s_norm * y_norm {
            if history.len() == cfg.memory {
                history.pop_front();
            }
            history.push_back((s, y, 1.0 / sy));
        }

        u = u_next;
        e = e_next;
        g = g_next;
        gn = inner(&g, &g).sqrt();
        energies.push(e);
        grad_norms.push(gn);
    }

    let converged = gn <= cfg.tol;
    Ok(LbfgsOutcome {
        solution: u,
        iterations: cfg.max_iters,
        energies,
        grad_norms,
        converged,
        hit_noise_floor: false,
    })
}

/// Extreme eigenvalue estimates of a preconditioned operator `B L` through
/// `steps` Lanczos iterations in the `B^{-1}` inner product, with full
/// reorthogonalization.
///
/// `apply_op` must apply `B L` and `apply_binv` the sparse operator `B^{-1}`.
pub fn lanczos_extremes(
    apply_op: &dyn Fn(&Field) -> Field,
    apply_binv: &dyn Fn(&Field) -> Field,
    start: &Field,
    steps: usize,
) -> Result<(f64, f64)> {
    let n = start.len();
    let steps = steps.min(n);
    let mut alphas = Vec::with_capacity(steps);
    let mut betas: Vec<f64> = Vec::with_capacity(steps);
    let mut basis: Vec<Field> = Vec::with_capacity(steps);
    let mut binv_basis: Vec<Field> = Vec::with_capacity(steps);

    let mut q = start.clone();
    let bq0 = apply_binv(&q);
    let norm0 = q.dot(&bq0).max(0.0).sqrt();
    if norm0 == 0.0 {
        return Err(Error::Domain("Lanczos start vector is zero".into()));
    }
    q.scale(1.0 / norm0);

    for j in 0..steps {
        let bq = apply_binv(&q);
        let mut w = apply_op(&q);
        let alpha = w.dot(&bq);
        alphas.push(alpha);
        w.axpy(-alpha, &q);
        if j > 0 {
            let beta_prev = betas[j - 1];
            w.axpy(-beta_prev, &basis[j - 1]);
        }
        // Full reorthogonalization against the stored basis.
        for (qi, bqi) in basis.iter().zip(&binv_basis) {
            let c = w.dot(bqi);
            w.axpy(-c, qi);
        }
        basis.push(q.clone());
        binv_basis.push(bq);

        let bw = apply_binv(&w);
        let beta = w.dot(&bw).max(0.0).sqrt();
        if beta < 1e-13 * alphas[0].abs().max(1.0) {
            break;
        }
        betas.push(beta);
        w.scale(1.0 / beta);
        q = w;
    }
    betas.truncate(alphas.len().saturating_sub(1));
    Ok(tridiag_extremes(&alphas, &betas))
}

/// Smallest and largest eigenvalues of a symmetric tridiagonal matrix via
/// Sturm-sequence bisection.
pub fn tridiag_extremes(alpha: &[f64], beta: &[f64]) -> (f64, f64) {
    let m = alpha.len();
    assert!(m > 0 && beta.len() + 1 >= m);
    // Gershgorin bounds.
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for i in 0..m {
        let left = if i > 0 { beta[i - 1].abs() } else { 0.0 };
        let right = if i < m - 1 { beta[i].abs() } else { 0.0 };
        lo = lo.min(alpha[i] - left - right);
        hi = hi.max(alpha[i] + left + right);
    }
    if m == 1 {
        return (alpha[0], alpha[0]);
    }
    // Sturm count: eigenvalues below x. Pivots too close to zero are nudged
    // negative, which counts boundary eigenvalues consistently and keeps the
    // recurrence finite.
    let scale = alpha
        .iter()
        .chain(beta.iter())
        .fold(1.0_f64, |s, &v| s.max(v.abs()));
    let pivmin = 1e-30 * scale;
    let count = |x: f64| -> usize {
        let mut cnt = 0;
        let mut d = 1.0;
        for i in 0..m {
            let off = if i > 0 {
                beta[i - 1] * beta[i - 1] / d
            } else {
                0.0
            };
            d = alpha[i] - x - off;
            if d.abs() < pivmin {
                d = -pivmin;
            }
            if d < 0.0 {
                cnt += 1;
            }
        }
        cnt
    };
    let bisect = |target: usize| -> f64 {
        // Smallest x with count(x) >= target.
        let (mut a, mut b) = (lo - 1e-12, hi + 1e-12);
        for _ in 0..120 {
            let mid = 0.5 * (a + b);
            if count(mid) >= target {
                b = mid;
            } else {
                a = mid;
            }
        }
        0.5 * (a + b)
    };
    (bisect(1), bisect(m))
}
