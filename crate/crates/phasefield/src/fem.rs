//! P1 finite elements: assembled operators and discrete calculus.
//!
//! [`FemSpace`] holds the stiffness form `(grad u, grad v)`, the consistent
//! mass form `(u, v)` and the lumped mass diagonal `(I_h(u v), 1)` on a fixed
//! mesh, together with the discrete Laplacian, its inverse on the zero-mean
//! subspace, nodal interpolation and quadrature of nonlinear integrands.
//! Everything here works on pure Neumann boundary conditions: constants span
//! the kernel of the stiffness operator.

use crate::error::{Error, Result};
use crate::mesh::Mesh;
use crate::quadrature::degree5_rule;
use crate::solvers::{cg, CgMode};
use crate::sparse::{BandedCholesky, CsrMatrix, CsrPattern};
use std::ops::{Index, IndexMut};
use std::sync::{Arc, OnceLock};

/// Nodal coefficient vector of a P1 function.
#[derive(Debug, Clone, PartialEq)]
pub struct Field(pub Vec<f64>);

impl Field {
    pub fn zeros(n: usize) -> Self {
        Field(vec![0.0; n])
    }

    pub fn constant(n: usize, c: f64) -> Self {
        Field(vec![c; n])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn map(&self, g: impl Fn(f64) -> f64) -> Field {
        Field(self.0.iter().map(|&x| g(x)).collect())
    }

    pub fn zip_map(&self, other: &Field, g: impl Fn(f64, f64) -> f64) -> Field {
        assert_eq!(self.len(), other.len());
        Field(
            self.0
                .iter()
                .zip(&other.0)
                .map(|(&x, &y)| g(x, y))
                .collect(),
        )
    }

    /// `self += a * other`.
    pub fn axpy(&mut self, a: f64, other: &Field) {
        assert_eq!(self.len(), other.len());
        for (x, &y) in self.0.iter_mut().zip(&other.0) {
            *x += a * y;
        }
    }

    pub fn scale(&mut self, a: f64) {
        for x in &mut self.0 {
            *x *= a;
        }
    }

    pub fn dot(&self, other: &Field) -> f64 {
        assert_eq!(self.len(), other.len());
        self.0.iter().zip(&other.0).map(|(&x, &y)| x * y).sum()
    }

    pub fn sub(&self, other: &Field) -> Field {
        assert_eq!(self.len(), other.len());
        Field(
            self.0
                .iter()
                .zip(&other.0)
                .map(|(&x, &y)| x - y)
                .collect(),
        )
    }

    pub fn add_scaled(&self, a: f64, other: &Field) -> Field {
        let mut out = self.clone();
        out.axpy(a, other);
        out
    }

    pub fn linf_norm(&self) -> f64 {
        self.0.iter().fold(0.0, |m, &x| m.max(x.abs()))
    }

    pub fn max_abs_diff(&self, other: &Field) -> f64 {
        self.sub(other).linf_norm()
    }
}

impl Index<usize> for Field {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl IndexMut<usize> for Field {
    fn index_mut(&mut self, i: usize) -> &mut f64 {
        &mut self.0[i]
    }
}

/// Result of [`FemSpace::inner_products`].
#[derive(Debug, Clone, Copy)]
pub struct InnerProducts {
    /// `u' M v`.
    pub l2: f64,
    /// `u' A v`.
    pub h1_semi: f64,
    /// `sum_i ml_i u_i v_i`.
    pub lumped_l2: f64,
    /// `(inv_lap u)' A (inv_lap v)`; `None` unless both inputs have zero mean.
    pub hminus1_semi: Option<f64>,
}

const MASS_SOLVE_TOL: f64 = 1e-12;
const LAPLACE_SOLVE_TOL: f64 = 1e-12;
const ZERO_MEAN_REL_TOL: f64 = 1e-10;

/// Assembled P1 space on a fixed mesh. Immutable after [`assemble`].
#[derive(Debug)]
pub struct FemSpace {
    pub mesh: Mesh,
    /// Stiffness operator `A`, the form `(grad u, grad v)`. `A 1 = 0`.
    pub stiffness: CsrMatrix,
    /// Consistent mass operator `M`, the form `(u, v)`.
    pub mass: CsrMatrix,
    /// Lumped mass diagonal: `ml_i = integral of basis function i`.
    pub lumped_mass: Vec<f64>,
    /// Measure of the domain.
    pub total_volume: f64,
    neumann_factor: OnceLock<std::result::Result<BandedCholesky, String>>,
}

/// Gradients of the three barycentric basis functions and the element area.
fn element_geometry(p0: [f64; 2], p1: [f64; 2], p2: [f64; 2]) -> (f64, [[f64; 2]; 3]) {
    let det = (p1[0] - p0[0]) * (p2[1] - p0[1]) - (p1[1] - p0[1]) * (p2[0] - p0[0]);
    let area = 0.5 * det;
    let g = [
        [(p1[1] - p2[1]) / det, (p2[0] - p1[0]) / det],
        [(p2[1] - p0[1]) / det, (p0[0] - p2[0]) / det],
        [(p0[1] - p1[1]) / det, (p1[0] - p0[0]) / det],
    ];
    (area, g)
}

/// Assembles stiffness, consistent mass and lumped mass on `mesh`.
pub fn assemble(mesh: Mesh) -> Result<FemSpace> {
    let n = mesh.num_nodes();
    let pattern = Arc::new(CsrPattern::from_pairs(
        n,
        mesh.elements.iter().flat_map(|el| {
            [(el[0], el[1]), (el[1], el[2]), (el[2], el[0])]
        }),
    ));
    let mut stiffness = CsrMatrix::zeros(pattern.clone());
    let mut mass = CsrMatrix::zeros(pattern);
    let mut lumped = vec![0.0; n];

    for (k, el) in mesh.elements.iter().enumerate() {
        let (area, grad) = element_geometry(mesh.nodes[el[0]], mesh.nodes[el[1]], mesh.nodes[el[2]]);
        if area <= 0.0 {
            return Err(Error::DegenerateElement { element: k, area });
        }
        for i in 0..3 {
            for j in 0..3 {
                let ke = area * (grad[i][0] * grad[j][0] + grad[i][1] * grad[j][1]);
                let me = area / 12.0 * if i == j { 2.0 } else { 1.0 };
                stiffness.add_at(el[i], el[j], ke);
                mass.add_at(el[i], el[j], me);
            }
            lumped[el[i]] += area / 3.0;
        }
    }

    let total_volume = lumped.iter().sum();
    Ok(FemSpace {
        mesh,
        stiffness,
        mass,
        lumped_mass: lumped,
        total_volume,
        neumann_factor: OnceLock::new(),
    })
}

impl FemSpace {
    pub fn num_nodes(&self) -> usize {
        self.mesh.num_nodes()
    }

    pub fn apply_stiffness(&self, u: &Field) -> Field {
        Field(self.stiffness.matvec(&u.0))
    }

    pub fn apply_mass(&self, u: &Field) -> Field {
        Field(self.mass.matvec(&u.0))
    }

    pub fn apply_lumped_mass(&self, u: &Field) -> Field {
        Field(
            self.lumped_mass
                .iter()
                .zip(&u.0)
                .map(|(&m, &x)| m * x)
                .collect(),
        )
    }

    /// Mass-weighted mean `(1' M u) / |domain|`.
    pub fn mean(&self, u: &Field) -> f64 {
        self.lumped_mass
            .iter()
            .zip(&u.0)
            .map(|(&m, &x)| m * x)
            .sum::<f64>()
            / self.total_volume
    }

    /// Removes the mass-weighted mean in place.
    pub fn project_zero_mean(&self, u: &mut Field) {
        let m = self.mean(u);
        for x in &mut u.0 {
            *x -= m;
        }
    }

    /// Dual-side projection: makes the plain sum of the assembled functional
    /// vanish, `r -= (1' r / |domain|) * ml`, so that `r` annihilates
    /// constants.
    pub fn project_dual_zero_sum(&self, r: &mut Field) {
        let s: f64 = r.0.iter().sum::<f64>() / self.total_volume;
        for (x, &m) in r.0.iter_mut().zip(&self.lumped_mass) {
            *x -= s * m;
        }
    }

    /// Nodal interpolation `I_h(g(u))`.
    pub fn interpolate(&self, u: &Field, g: impl Fn(f64) -> f64) -> Field {
        assert_eq!(u.len(), self.num_nodes());
        u.map(g)
    }

    /// Nodal interpolation `I_h(g(u, v))` of a two-argument kernel.
    pub fn interpolate2(&self, u: &Field, v: &Field, g: impl Fn(f64, f64) -> f64) -> Field {
        assert_eq!(u.len(), self.num_nodes());
        u.zip_map(v, g)
    }

    /// Nodal interpolation of a coordinate function.
    pub fn interpolate_coords(&self, g: impl Fn(f64, f64) -> f64) -> Field {
        Field(self.mesh.nodes.iter().map(|p| g(p[0], p[1])).collect())
    }

    /// Solves `M x = b` by CG (the mass operator is well conditioned).
    pub fn mass_solve(&self, b: &Field) -> Result<Field> {
        let result = cg(
            |v| self.apply_mass(v),
            b,
            MASS_SOLVE_TOL,
            2000,
            None,
            CgMode::FailOnIndefinite,
        )?;
        Ok(result.solution)
    }

    /// Riesz representative of `-(grad v, grad w)` through the mass inner
    /// product: returns `d` with `M d = -A v`. The result has zero
    /// mass-weighted mean.
    pub fn discrete_laplacian(&self, v: &Field) -> Result<Field> {
        let mut b = self.apply_stiffness(v);
        b.scale(-1.0);
        self.mass_solve(&b)
    }

    fn check_zero_mean(&self, theta: &Field) -> Result<f64> {
        let norm_sq = theta.dot(&self.apply_mass(theta));
        let rms = (norm_sq.max(0.0) / self.total_volume).sqrt();
        let mean = self.mean(theta);
        if rms == 0.0 {
            return Ok(0.0);
        }
        if mean.abs() > ZERO_MEAN_REL_TOL * rms.max(f64::MIN_POSITIVE) {
            return Err(Error::Domain(format!(
                "inverse Laplacian requires a zero-mean input: mean {mean:.3e}, rms {rms:.3e}"
            )));
        }
        Ok(rms)
    }

    /// Inverse of the discrete Laplacian on the zero-mean subspace: returns
    /// the zero-mean `v` solving `A v = -M theta`.
    ///
    /// The singular Neumann system is solved by CG with the right-hand side
    /// and the iterates projected to the zero-mean subspace each iteration.
    pub fn inverse_laplacian(&self, theta: &Field) -> Result<Field> {
        let rms = self.check_zero_mean(theta)?;
        if rms == 0.0 {
            return Ok(Field::zeros(self.num_nodes()));
        }
        let mut b = self.apply_mass(theta);
        b.scale(-1.0);
        let n = self.num_nodes();
        let project = move |v: &mut Field| {
            let mean: f64 = v.0.iter().sum::<f64>() / n as f64;
            for x in &mut v.0 {
                *x -= mean;
            }
        };
        let result = cg(
            |v| self.apply_stiffness(v),
            &b,
            LAPLACE_SOLVE_TOL,
            50_000,
            Some(&project),
            CgMode::FailOnIndefinite,
        )?;
        let mut v = result.solution;
        self.project_zero_mean(&mut v);
        Ok(v)
    }

    /// Same system as [`FemSpace::inverse_laplacian`], solved through a
    /// cached banded Cholesky factorization of the grounded Neumann
    /// stiffness. This is the fast path used inside the implicit steppers.
    pub fn inverse_laplacian_direct(&self, theta: &Field) -> Result<Field> {
        let rms = self.check_zero_mean(theta)?;
        if rms == 0.0 {
            return Ok(Field::zeros(self.num_nodes()));
        }
        let factor = self.neumann_factor()?;
        let mut b = self.apply_mass(theta);
        b.scale(-1.0);
        // Enforce exact consistency and ground the pinned node.
        let shift: f64 = b.0.iter().sum::<f64>() / b.len() as f64;
        for x in &mut b.0 {
            *x -= shift;
        }
        b[0] = 0.0;
        let mut v = Field(factor.solve(&b.0));
        self.project_zero_mean(&mut v);
        Ok(v)
    }

    /// Forces construction of the cached Neumann factorization, so later
    /// solves inside closures cannot fail on it.
    pub fn prepare_neumann_factor(&self) -> Result<()> {
        self.neumann_factor().map(|_| ())
    }

    fn neumann_factor(&self) -> Result<&BandedCholesky> {
        self.neumann_factor
            .get_or_init(|| {
                BandedCholesky::factor(&self.stiffness, true).map_err(|e| e.to_string())
            })
            .as_ref()
            .map_err(|msg| Error::Domain(msg.clone()))
    }

    /// The four inner products used throughout: L2, H1-seminorm, lumped L2
    /// and (for zero-mean inputs) the H^{-1}-seminorm pairing.
    pub fn inner_products(&self, u: &Field, v: &Field) -> Result<InnerProducts> {
        let l2 = u.dot(&self.apply_mass(v));
        let h1_semi = u.dot(&self.apply_stiffness(v));
        let lumped_l2 = self
            .lumped_mass
            .iter()
            .zip(&u.0)
            .zip(&v.0)
            .map(|((&m, &a), &b)| m * a * b)
            .sum();
        let hminus1_semi = if self.check_zero_mean(u).is_ok() && self.check_zero_mean(v).is_ok() {
            let iu = self.inverse_laplacian(u)?;
            let iv = self.inverse_laplacian(v)?;
            Some(iu.dot(&self.apply_stiffness(&iv)))
        } else {
            None
        };
        Ok(InnerProducts {
            l2,
            h1_semi,
            lumped_l2,
            hminus1_semi,
        })
    }

    /// `u' M u`.
    pub fn l2_norm_sq(&self, u: &Field) -> f64 {
        u.dot(&self.apply_mass(u))
    }

    /// `sum_i ml_i u_i^2 = integral of I_h(u^2)`.
    pub fn lumped_norm_sq(&self, u: &Field) -> f64 {
        self.lumped_mass
            .iter()
            .zip(&u.0)
            .map(|(&m, &x)| m * x * x)
            .sum()
    }

    /// `|grad (inv_lap theta)|^2 = -theta' M (inv_lap theta)`, using the
    /// direct Neumann solve.
    pub fn hminus1_norm_sq(&self, theta: &Field) -> Result<f64> {
        let v = self.inverse_laplacian_direct(theta)?;
        Ok(-theta.dot(&self.apply_mass(&v)))
    }

    /// Quadrature of `g(u(x))` over the domain (exact for polynomial `g` of
    /// degree at most five).
    pub fn integrate(&self, u: &Field, g: impl Fn(f64) -> f64) -> f64 {
        let rule = degree5_rule();
        let mut total = 0.0;
        for (k, el) in self.mesh.elements.iter().enumerate() {
            let area = self.mesh.element_area(k);
            let uv = [u[el[0]], u[el[1]], u[el[2]]];
            for (l, w) in &rule {
                let uq = l[0] * uv[0] + l[1] * uv[1] + l[2] * uv[2];
                total += w * area * g(uq);
            }
        }
        total
    }

    /// Quadrature of `g(u(x), b(x))`.
    pub fn integrate2(&self, u: &Field, b: &Field, g: impl Fn(f64, f64) -> f64) -> f64 {
        let rule = degree5_rule();
        let mut total = 0.0;
        for (k, el) in self.mesh.elements.iter().enumerate() {
            let area = self.mesh.element_area(k);
            let uv = [u[el[0]], u[el[1]], u[el[2]]];
            let bv = [b[el[0]], b[el[1]], b[el[2]]];
            for (l, w) in &rule {
                let uq = l[0] * uv[0] + l[1] * uv[1] + l[2] * uv[2];
                let bq = l[0] * bv[0] + l[1] * bv[1] + l[2] * bv[2];
                total += w * area * g(uq, bq);
            }
        }
        total
    }

    /// Assembled load `r_i = integral g(u(x)) phi_i(x)`.
    pub fn nonlinear_load(&self, u: &Field, g: impl Fn(f64) -> f64) -> Field {
        let rule = degree5_rule();
        let mut r = Field::zeros(self.num_nodes());
        for (k, el) in self.mesh.elements.iter().enumerate() {
            let area = self.mesh.element_area(k);
            let uv = [u[el[0]], u[el[1]], u[el[2]]];
            for (l, w) in &rule {
                let uq = l[0] * uv[0] + l[1] * uv[1] + l[2] * uv[2];
                let gq = w * area * g(uq);
                for i in 0..3 {
                    r[el[i]] += gq * l[i];
                }
            }
        }
        r
    }

    /// Assembled load `r_i = integral g(u(x), b(x)) phi_i(x)`.
    pub fn nonlinear_load2(&self, u: &Field, b: &Field, g: impl Fn(f64, f64) -> f64) -> Field {
        let rule = degree5_rule();
        let mut r = Field::zeros(self.num_nodes());
        for (k, el) in self.mesh.elements.iter().enumerate() {
            let area = self.mesh.element_area(k);
            let uv = [u[el[0]], u[el[1]], u[el[2]]];
            let bv = [b[el[0]], b[el[1]], b[el[2]]];
            for (l, w) in &rule {
                let uq = l[0] * uv[0] + l[1] * uv[1] + l[2] * uv[2];
                let bq = l[0] * bv[0] + l[1] * bv[1] + l[2] * bv[2];
                let gq = w * area * g(uq, bq);
                for i in 0..3 {
                    r[el[i]] += gq * l[i];
                }
            }
        }
        r
    }

    /// Assembled weighted mass matrix `W_ij = integral c(u(x)) phi_i phi_j`.
    pub fn weighted_mass(&self, u: &Field, c: impl Fn(f64) -> f64) -> CsrMatrix {
        self.weighted_mass_impl(u, None, |a, _| c(a))
    }

    /// Assembled weighted mass matrix with a two-field coefficient.
    pub fn weighted_mass2(
        &self,
        u: &Field,
        b: &Field,
        c: impl Fn(f64, f64) -> f64,
    ) -> CsrMatrix {
        self.weighted_mass_impl(u, Some(b), c)
    }

    fn weighted_mass_impl(
        &self,
        u: &Field,
        b: Option<&Field>,
        c: impl Fn(f64, f64) -> f64,
    ) -> CsrMatrix {
        let rule = degree5_rule();
        let mut w_mat = CsrMatrix::zeros(self.mass.pattern.clone());
        for (k, el) in self.mesh.elements.iter().enumerate() {
            let area = self.mesh.element_area(k);
            let uv = [u[el[0]], u[el[1]], u[el[2]]];
            let bv = b.map(|f| [f[el[0]], f[el[1]], f[el[2]]]);
            let mut local = [[0.0; 3]; 3];
            for (l, w) in &rule {
                let uq = l[0] * uv[0] + l[1] * uv[1] + l[2] * uv[2];
                let bq = bv
                    .map(|v| l[0] * v[0] + l[1] * v[1] + l[2] * v[2])
                    .unwrap_or(0.0);
                let cq = w * area * c(uq, bq);
                for i in 0..3 {
                    for j in 0..3 {
                        local[i][j] += cq * l[i] * l[j];
                    }
                }
            }
            for i in 0..3 {
                for j in 0..3 {
                    w_mat.add_at(el[i], el[j], local[i][j]);
                }
            }
        }
        w_mat
    }
}
