//! Free energies, per-step discrete energies and their first and second
//! variations.
//!
//! Each implicit step of the solvers is the stationarity condition of a
//! discrete energy. This module evaluates those energies, their assembled
//! residuals (dual vectors), Riesz gradients and Hessian actions, so the
//! Newton and minimization drivers share one residual definition. The
//! conserved variants are posed over states `u = uprev + theta` with
//! zero-mean `theta`; their gradients are projected onto the zero-mean
//! subspace.
//!
//! Nonlinear integrands (quartic in a P1 function) are integrated with the
//! exact degree-5 quadrature rule; the lumped variant uses the nodal sum by
//! definition.

use crate::error::{Error, Result};
use crate::fem::{Field, FemSpace};
use crate::potentials::{
    midpoint_primitive_diff, secant_slope, secant_slope_prime, well, well_prime, well_second,
};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Which discrete step energy a context evaluates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EnergyVariant {
    /// Fully implicit step energy `J + |u - uprev|^2 / 2k`.
    AcFis,
    /// Fully implicit step energy with nodal (lumped) integration.
    AcFisLumped,
    /// Convex-splitting functional: implicit convex part, linearized rest.
    AcCss,
    /// Standard Crank-Nicolson step energy.
    AcScn,
    /// Secant (energy-conserving) Crank-Nicolson step energy.
    AcMcn,
    /// Fully implicit energy of the relaxed model with extra damping `delta`.
    AcConvexified { delta: f64 },
    /// Conserved fully implicit step energy with the H^{-1} penalty.
    ChFis,
    /// Conserved secant Crank-Nicolson step energy.
    ChMcn,
    /// Conserved energy of the relaxed model: adds `delta/(2 k eps) |theta|^2`.
    ChConvexified { delta: f64 },
}

impl EnergyVariant {
    pub fn is_conserved(&self) -> bool {
        matches!(
            self,
            EnergyVariant::ChFis | EnergyVariant::ChMcn | EnergyVariant::ChConvexified { .. }
        )
    }

    fn is_lumped(&self) -> bool {
        matches!(self, EnergyVariant::AcFisLumped)
    }
}

/// A step energy bound to a space, interface width, step size and previous
/// state. Immutable; evaluation is pure.
pub struct EnergyContext<'a> {
    pub space: &'a FemSpace,
    pub epsilon: f64,
    pub k: f64,
    pub uprev: Field,
    pub variant: EnergyVariant,
}

/// Interface energy `J(u) = 1/2 |grad u|^2 + eps^{-2} int F(u)` driving the
/// nonconserved flow.
pub fn physical_energy_ac(space: &FemSpace, eps: f64, u: &Field) -> f64 {
    0.5 * u.dot(&space.apply_stiffness(u)) + space.integrate(u, well) / (eps * eps)
}

/// Interface energy `J(u) = eps/2 |grad u|^2 + eps^{-1} int F(u)` driving the
/// conserved flow.
pub fn physical_energy_ch(space: &FemSpace, eps: f64, u: &Field) -> f64 {
    0.5 * eps * u.dot(&space.apply_stiffness(u)) + space.integrate(u, well) / eps
}

/// Nonconserved interface energy with the well term integrated nodally:
/// `1/2 |grad u|^2 + eps^{-2} int I_h(F(u))`.
pub fn lumped_energy_ac(space: &FemSpace, eps: f64, u: &Field) -> f64 {
    let nodal: f64 = space
        .lumped_mass
        .iter()
        .zip(&u.0)
        .map(|(&m, &x)| m * well(x))
        .sum();
    0.5 * u.dot(&space.apply_stiffness(u)) + nodal / (eps * eps)
}

impl<'a> EnergyContext<'a> {
    pub fn new(
        space: &'a FemSpace,
        epsilon: f64,
        k: f64,
        uprev: Field,
        variant: EnergyVariant,
    ) -> Result<Self> {
        if epsilon <= 0.0 {
            return Err(Error::Config(format!("epsilon must be positive, got {epsilon}")));
        }
        if k <= 0.0 {
            return Err(Error::Config(format!("step size must be positive, got {k}")));
        }
        if uprev.len() != space.num_nodes() {
            return Err(Error::Config(format!(
                "previous state has {} entries for a space with {} nodes",
                uprev.len(),
                space.num_nodes()
            )));
        }
        Ok(EnergyContext {
            space,
            epsilon,
            k,
            uprev,
            variant,
        })
    }

    /// The inner product the gradient is represented in: lumped for the
    /// nodally integrated variant, consistent mass otherwise.
    pub fn inner(&self, u: &Field, v: &Field) -> f64 {
        if self.variant.is_lumped() {
            self.space
                .lumped_mass
                .iter()
                .zip(&u.0)
                .zip(&v.0)
                .map(|((&m, &a), &b)| m * a * b)
                .sum()
        } else {
            u.dot(&self.space.apply_mass(v))
        }
    }

    /// Riesz representative of an assembled residual in [`Self::inner`];
    /// conserved variants are projected onto the zero-mean subspace.
    pub fn riesz(&self, r: &Field) -> Result<Field> {
        let mut g = if self.variant.is_lumped() {
            Field(
                r.0.iter()
                    .zip(&self.space.lumped_mass)
                    .map(|(&x, &m)| x / m)
                    .collect(),
            )
        } else {
            self.space.mass_solve(r)?
        };
        if self.variant.is_conserved() {
            self.space.project_zero_mean(&mut g);
        }
        Ok(g)
    }

    /// Mass-weighted norm of an assembled residual.
    pub fn residual_norm(&self, r: &Field) -> Result<f64> {
        let g = self.riesz(r)?;
        Ok(self.inner(&g, &g).sqrt())
    }

    /// Action of the variant's metric (consistent or lumped mass), used as
    /// the damping operator by the Newton driver.
    pub fn metric_apply(&self, v: &Field) -> Field {
        if self.variant.is_lumped() {
            self.space.apply_lumped_mass(v)
        } else {
            self.space.apply_mass(v)
        }
    }

    fn check_state(&self, u: &Field) -> Result<()> {
        if u.len() != self.uprev.len() {
            return Err(Error::Config("state length mismatch".into()));
        }
        if self.variant.is_conserved() {
            let drift = self.space.mean(u) - self.space.mean(&self.uprev);
            let scale = self.space.mean(&self.uprev).abs().max(1.0);
            if drift.abs() > 1e-8 * scale {
                return Err(Error::Domain(format!(
                    "conserved step energy requires mean(u) = mean(uprev); drift {drift:.3e}"
                )));
            }
        }
        Ok(())
    }

    fn increment(&self, u: &Field) -> Field {
        u.sub(&self.uprev)
    }

    fn midpoint(&self, u: &Field) -> Field {
        let mut m = u.clone();
        m.axpy(1.0, &self.uprev);
        m.scale(0.5);
        m
    }

    /// Value of the step energy at state `u`.
    pub fn step_energy(&self, u: &Field) -> Result<f64> {
        self.check_state(u)?;
        let space = self.space;
        let eps = self.epsilon;
        let e2 = eps * eps;
        let k = self.k;
        let b = &self.uprev;
        Ok(match self.variant {
            EnergyVariant::AcFis => {
                let d = self.increment(u);
                physical_energy_ac(space, eps, u) + space.l2_norm_sq(&d) / (2.0 * k)
            }
            EnergyVariant::AcConvexified { delta } => {
                let d = self.increment(u);
                physical_energy_ac(space, eps, u)
                    + (1.0 + delta / e2) * space.l2_norm_sq(&d) / (2.0 * k)
            }
            EnergyVariant::AcFisLumped => {
                let d = self.increment(u);
                let lumped_pen: f64 = space
                    .lumped_mass
                    .iter()
                    .zip(&d.0)
                    .map(|(&m, &x)| m * x * x)
                    .sum();
                lumped_energy_ac(space, eps, u) + lumped_pen / (2.0 * k)
            }
            EnergyVariant::AcCss => {
                let d = self.increment(u);
                let grad = 0.5 * u.dot(&space.apply_stiffness(u));
                let plus = space.integrate(u, |x| 0.25 * (x * x * x * x + 1.0));
                // Linearization of the concave part at uprev.
                let lin = space.integrate2(u, b, |a, p| p * a - 0.5 * p * p);
                grad + (plus - lin) / e2 + space.l2_norm_sq(&d) / (2.0 * k)
            }
            EnergyVariant::AcScn => {
                let m = self.midpoint(u);
                let d = self.increment(u);
                let nl = space.integrate2(u, b, |a, p| well(a) + well_prime(p) * a);
                0.5 * m.dot(&space.apply_stiffness(&m))
                    + space.l2_norm_sq(&d) / (4.0 * k)
                    + nl / (4.0 * e2)
            }
            EnergyVariant::AcMcn => {
                let m = self.midpoint(u);
                let d = self.increment(u);
                let nl = space.integrate2(u, b, midpoint_primitive_diff);
                0.5 * m.dot(&space.apply_stiffness(&m))
                    + space.l2_norm_sq(&d) / (4.0 * k)
                    + nl / (2.0 * e2)
            }
            EnergyVariant::ChFis => {
                let d = self.increment(u);
                physical_energy_ch(space, eps, u) + space.hminus1_norm_sq(&d)? / (2.0 * k)
            }
            EnergyVariant::ChConvexified { delta } => {
                let d = self.increment(u);
                physical_energy_ch(space, eps, u)
                    + space.hminus1_norm_sq(&d)? / (2.0 * k)
                    + delta * space.l2_norm_sq(&d) / (2.0 * k * eps)
            }
            EnergyVariant::ChMcn => {
                let m = self.midpoint(u);
                let d = self.increment(u);
                let nl = space.integrate2(u, b, midpoint_primitive_diff);
                0.5 * eps * m.dot(&space.apply_stiffness(&m))
                    + space.hminus1_norm_sq(&d)? / (4.0 * k)
                    + nl / (2.0 * eps)
            }
        })
    }

    /// Assembled residual (dual vector) of the step energy at `u`:
    /// `r_i = E'(u)(phi_i)`. Conserved variants return the representation on
    /// zero-mean test functions.
    pub fn step_residual(&self, u: &Field) -> Result<Field> {
        self.check_state(u)?;
        let space = self.space;
        let eps = self.epsilon;
        let e2 = eps * eps;
        let k = self.k;
        let b = &self.uprev;
        let r = match self.variant {
            EnergyVariant::AcFis => {
                let mut r = space.apply_stiffness(u);
                r.axpy(1.0 / e2, &space.nonlinear_load(u, well_prime));
                r.axpy(1.0 / k, &space.apply_mass(&self.increment(u)));
                r
            }
            EnergyVariant::AcConvexified { delta } => {
                let mut r = space.apply_stiffness(u);
                r.axpy(1.0 / e2, &space.nonlinear_load(u, well_prime));
                r.axpy(
                    (1.0 + delta / e2) / k,
                    &space.apply_mass(&self.increment(u)),
                );
                r
            }
            EnergyVariant::AcFisLumped => {
                let mut r = space.apply_stiffness(u);
                for i in 0..r.len() {
                    let m = space.lumped_mass[i];
                    r[i] += m * (well_prime(u[i]) / e2 + (u[i] - b[i]) / k);
                }
                r
            }
            EnergyVariant::AcCss => {
                let mut r = space.apply_stiffness(u);
                r.axpy(1.0 / e2, &space.nonlinear_load(u, |x| x * x * x));
                r.axpy(-1.0 / e2, &space.apply_mass(b));
                r.axpy(1.0 / k, &space.apply_mass(&self.increment(u)));
                r
            }
            EnergyVariant::AcScn => {
                let m = self.midpoint(u);
                let mut r = space.apply_stiffness(&m);
                r.scale(0.5);
                r.axpy(1.0 / (2.0 * k), &space.apply_mass(&self.increment(u)));
                r.axpy(1.0 / (4.0 * e2), &space.nonlinear_load(u, well_prime));
                r.axpy(1.0 / (4.0 * e2), &space.nonlinear_load(b, well_prime));
                r
            }
            EnergyVariant::AcMcn => {
                let m = self.midpoint(u);
                let mut r = space.apply_stiffness(&m);
                r.scale(0.5);
                r.axpy(1.0 / (2.0 * k), &space.apply_mass(&self.increment(u)));
                r.axpy(1.0 / (2.0 * e2), &space.nonlinear_load2(u, b, secant_slope));
                r
            }
            EnergyVariant::ChFis => {
                let d = self.increment(u);
                let mut r = space.apply_stiffness(u);
                r.scale(eps);
                r.axpy(1.0 / eps, &space.nonlinear_load(u, well_prime));
                space.project_dual_zero_sum(&mut r);
                let inv = space.inverse_laplacian_direct(&d)?;
                r.axpy(-1.0 / k, &space.apply_mass(&inv));
                r
            }
            EnergyVariant::ChConvexified { delta } => {
                let d = self.increment(u);
                let mut r = space.apply_stiffness(u);
                r.scale(eps);
                r.axpy(1.0 / eps, &space.nonlinear_load(u, well_prime));
                r.axpy(delta / (k * eps), &space.apply_mass(&d));
                space.project_dual_zero_sum(&mut r);
                let inv = space.inverse_laplacian_direct(&d)?;
                r.axpy(-1.0 / k, &space.apply_mass(&inv));
                r
            }
            EnergyVariant::ChMcn => {
                let m = self.midpoint(u);
                let d = self.increment(u);
                let mut r = space.apply_stiffness(&m);
                r.scale(0.5 * eps);
                r.axpy(
                    1.0 / (2.0 * eps),
                    &space.nonlinear_load2(u, b, secant_slope),
                );
                space.project_dual_zero_sum(&mut r);
                let inv = space.inverse_laplacian_direct(&d)?;
                r.axpy(-1.0 / (2.0 * k), &space.apply_mass(&inv));
                r
            }
        };
        Ok(r)
    }

    /// Riesz gradient of the step energy at `u`.
    pub fn step_gradient(&self, u: &Field) -> Result<Field> {
        let r = self.step_residual(u)?;
        self.riesz(&r)
    }

    /// Action of the second variation at `u` on `v`, as an assembled dual
    /// vector: `(H v)_i = E''(u)(v, phi_i)`. Linear and symmetric in `v`.
    pub fn step_hessvec(&self, u: &Field, v: &Field) -> Result<Field> {
        self.check_state(u)?;
        let space = self.space;
        let eps = self.epsilon;
        let e2 = eps * eps;
        let k = self.k;
        let b = &self.uprev;
        let mut v = v.clone();
        if self.variant.is_conserved() {
            space.project_zero_mean(&mut v);
        }
        let h = match self.variant {
            EnergyVariant::AcFis => {
                let mut h = space.apply_stiffness(&v);
                h.axpy(
                    1.0 / e2,
                    &Field(space.weighted_mass(u, well_second).matvec(&v.0)),
                );
                h.axpy(1.0 / k, &space.apply_mass(&v));
                h
            }
            EnergyVariant::AcConvexified { delta } => {
                let mut h = space.apply_stiffness(&v);
                h.axpy(
                    1.0 / e2,
                    &Field(space.weighted_mass(u, well_second).matvec(&v.0)),
                );
                h.axpy((1.0 + delta / e2) / k, &space.apply_mass(&v));
                h
            }
            EnergyVariant::AcFisLumped => {
                let mut h = space.apply_stiffness(&v);
                for i in 0..h.len() {
                    let m = space.lumped_mass[i];
                    h[i] += m * v[i] * (well_second(u[i]) / e2 + 1.0 / k);
                }
                h
            }
            EnergyVariant::AcCss => {
                let mut h = space.apply_stiffness(&v);
                h.axpy(
                    1.0 / e2,
                    &Field(space.weighted_mass(u, |x| 3.0 * x * x).matvec(&v.0)),
                );
                h.axpy(1.0 / k, &space.apply_mass(&v));
                h
            }
            EnergyVariant::AcScn => {
                let mut h = space.apply_stiffness(&v);
                h.scale(0.25);
                h.axpy(1.0 / (2.0 * k), &space.apply_mass(&v));
                h.axpy(
                    1.0 / (4.0 * e2),
                    &Field(space.weighted_mass(u, well_second).matvec(&v.0)),
                );
                h
            }
            EnergyVariant::AcMcn => {
                let mut h = space.apply_stiffness(&v);
                h.scale(0.25);
                h.axpy(1.0 / (2.0 * k), &space.apply_mass(&v));
                h.axpy(
                    1.0 / (2.0 * e2),
                    &Field(space.weighted_mass2(u, b, secant_slope_prime).matvec(&v.0)),
                );
                h
            }
            EnergyVariant::ChFis | EnergyVariant::ChConvexified { .. } => {
                let mut h = space.apply_stiffness(&v);
                h.scale(eps);
                h.axpy(
                    1.0 / eps,
                    &Field(space.weighted_mass(u, well_second).matvec(&v.0)),
                );
                if let EnergyVariant::ChConvexified { delta } = self.variant {
                    h.axpy(delta / (k * eps), &space.apply_mass(&v));
                }
                space.project_dual_zero_sum(&mut h);
                let inv = space.inverse_laplacian_direct(&v)?;
                h.axpy(-1.0 / k, &space.apply_mass(&inv));
                h
            }
            EnergyVariant::ChMcn => {
                let mut h = space.apply_stiffness(&v);
                h.scale(0.25 * eps);
                h.axpy(
                    1.0 / (2.0 * eps),
                    &Field(space.weighted_mass2(u, b, secant_slope_prime).matvec(&v.0)),
                );
                space.project_dual_zero_sum(&mut h);
                let inv = space.inverse_laplacian_direct(&v)?;
                h.axpy(-1.0 / (2.0 * k), &space.apply_mass(&inv));
                h
            }
        };
        Ok(h)
    }
}

impl<'a> EnergyContext<'a> {
    /// Assembled Hessian of the step energy at `u` for the nonconserved
    /// variants (the conserved ones involve the dense inverse-Laplacian and
    /// are applied matrix-free).
    pub fn step_hessian_matrix(&self, u: &Field) -> Result<crate::sparse::CsrMatrix> {
        let space = self.space;
        let e2 = self.epsilon * self.epsilon;
        let k = self.k;
        Ok(match self.variant {
            EnergyVariant::AcFis => {
                let w = space.weighted_mass(u, well_second);
                space
                    .stiffness
                    .linear_combination(1.0, &space.mass, 1.0 / k)
                    .linear_combination(1.0, &w, 1.0 / e2)
            }
            EnergyVariant::AcConvexified { delta } => {
                let w = space.weighted_mass(u, well_second);
                space
                    .stiffness
                    .linear_combination(1.0, &space.mass, (1.0 + delta / e2) / k)
                    .linear_combination(1.0, &w, 1.0 / e2)
            }
            EnergyVariant::AcFisLumped => {
                let diag: Vec<f64> = space
                    .lumped_mass
                    .iter()
                    .zip(&u.0)
                    .map(|(&m, &x)| m * (1.0 / k + well_second(x) / e2))
                    .collect();
                space.stiffness.with_added_diagonal(&diag)
            }
            EnergyVariant::AcCss => {
                let w = space.weighted_mass(u, |x| 3.0 * x * x);
                space
                    .stiffness
                    .linear_combination(1.0, &space.mass, 1.0 / k)
                    .linear_combination(1.0, &w, 1.0 / e2)
            }
            EnergyVariant::AcScn => {
                let w = space.weighted_mass(u, well_second);
                space
                    .stiffness
                    .linear_combination(0.25, &space.mass, 0.5 / k)
                    .linear_combination(1.0, &w, 0.25 / e2)
            }
            EnergyVariant::AcMcn => {
                let w = space.weighted_mass2(u, &self.uprev, secant_slope_prime);
                space
                    .stiffness
                    .linear_combination(0.25, &space.mass, 0.5 / k)
                    .linear_combination(1.0, &w, 0.5 / e2)
            }
            EnergyVariant::ChFis | EnergyVariant::ChMcn | EnergyVariant::ChConvexified { .. } => {
                return Err(Error::Domain(
                    "conserved step energies have no sparse Hessian; use step_hessvec".into(),
                ))
            }
        })
    }
}

/// Outcome of [`convexity_certificate`].
#[derive(Debug, Clone)]
pub struct CertificateReport {
    /// Smallest sampled value of the quadratic form on unit directions.
    pub min_value: f64,
    /// Whether every sampled value was strictly positive.
    pub positive: bool,
    pub probes: usize,
}

/// Nodal interpolation of the separable cosine mode `(m, n)` on the mesh
/// bounding box; these are near-eigenvectors of the Neumann Laplacian and
/// act as deterministic low-frequency probes.
pub fn fourier_mode(space: &FemSpace, m: usize, n: usize) -> Field {
    let (mut x0, mut y0) = (f64::INFINITY, f64::INFINITY);
    let (mut x1, mut y1) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
    for p in &space.mesh.nodes {
        x0 = x0.min(p[0]);
        y0 = y0.min(p[1]);
        x1 = x1.max(p[0]);
        y1 = y1.max(p[1]);
    }
    let pi = std::f64::consts::PI;
    space.interpolate_coords(|x, y| {
        (m as f64 * pi * (x - x0) / (x1 - x0)).cos() * (n as f64 * pi * (y - y0) / (y1 - y0)).cos()
    })
}

/// Samples the quadratic form `v' H(u) v` of a step energy at random states
/// (nodal values in `[-1, 1]`) and unit directions, together with a
/// deterministic battery of low-frequency probes, and reports the smallest
/// value observed.
///
/// The deterministic battery contains the constant direction (nonconserved
/// variants), the first few cosine modes and the degenerate state `u = 0`
/// (matched to the conserved mean where required); these witness the loss of
/// convexity past the step-size thresholds.
pub fn convexity_certificate(
    ctx: &EnergyContext,
    trials: usize,
    seed: u64,
) -> Result<CertificateReport> {
    use rand::SeedableRng;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let space = ctx.space;
    let n = space.num_nodes();
    let conserved = ctx.variant.is_conserved();

    let mean_prev = space.mean(&ctx.uprev);
    let mut states: Vec<Field> = vec![ctx.uprev.clone()];
    // Degenerate state near the unstable well, mean-matched when conserved.
    states.push(if conserved {
        Field::constant(n, mean_prev)
    } else {
        Field::zeros(n)
    });
    for _ in 0..trials {
        let mut u = Field((0..n).map(|_| rng.random_range(-1.0..1.0)).collect());
        if conserved {
            let shift = mean_prev - space.mean(&u);
            for x in &mut u.0 {
                *x += shift;
            }
        }
        states.push(u);
    }

    let mut directions: Vec<Field> = Vec::new();
    if !conserved {
        directions.push(Field::constant(n, 1.0));
    }
    for (m, mode_n) in [(1, 0), (0, 1), (1, 1), (2, 0), (0, 2), (2, 1), (2, 2)] {
        directions.push(fourier_mode(space, m, mode_n));
    }
    for _ in 0..trials.max(1) {
        directions.push(Field((0..n).map(|_| rng.random_range(-1.0..1.0)).collect()));
    }

    let mut min_value = f64::INFINITY;
    let mut probes = 0;
    for u in &states {
        for v in &directions {
            let mut v = v.clone();
            if conserved {
                space.project_zero_mean(&mut v);
            }
            let norm = ctx.inner(&v, &v).sqrt();
            if norm < 1e-14 {
                continue;
            }
            v.scale(1.0 / norm);
            let h = ctx.step_hessvec(u, &v)?;
            let value = v.dot(&h);
            min_value = min_value.min(value);
            probes += 1;
        }
    }
    Ok(CertificateReport {
        min_value,
        positive: min_value > 0.0,
        probes,
    })
}
