//! Linear Beltrami solver: recover the unique boundary-fixed piecewise-linear
//! map whose Beltrami field matches a prescribed admissible field.
//!
//! With `mu = rho + i tau` the target map satisfies, face by face,
//! `div(G grad u) = 0` and `div(G grad v) = 0` for the symmetric coefficient
//! matrix `G = [[gamma1, gamma2], [gamma2, gamma3]]` built from `mu`. Both
//! coordinate channels share one stiffness matrix, assembled with linear
//! elements on the triangulation and Dirichlet rows for the boundary.

use std::collections::BTreeMap;

use sprs::{CsMat, TriMat};
use sprs_ldl::Ldl;

use crate::beltrami::BeltramiField;
use crate::mesh::{PiecewiseLinearMap, TriangulatedDomain};
use crate::{Complex64, Error, Result};

/// Above this field modulus the diffusion coefficients blow up and the
/// solve is flagged as ill-conditioned.
pub const CONDITIONING_WARNING_THRESHOLD: f64 = 0.95;

/// Diffusion coefficients `(gamma1, gamma2, gamma3)` of one Beltrami value.
pub fn gamma_coefficients(mu: Complex64) -> Result<(f64, f64, f64)> {
    let (rho, tau) = (mu.re, mu.im);
    let denom = 1.0 - rho * rho - tau * tau;
    if denom <= 0.0 {
        return Err(Error::InadmissibleValue { modulus: mu.norm() });
    }
    let gamma1 = ((rho - 1.0) * (rho - 1.0) + tau * tau) / denom;
    let gamma2 = -2.0 * tau / denom;
    let gamma3 = ((1.0 + rho) * (1.0 + rho) + tau * tau) / denom;
    Ok((gamma1, gamma2, gamma3))
}

/// Dirichlet data: one complex target per boundary vertex.
#[derive(Clone, Debug)]
pub struct DirichletBoundary {
    values: BTreeMap<usize, Complex64>,
}

impl DirichletBoundary {
    /// Fix the boundary to the identity embedding.
    pub fn identity(domain: &TriangulatedDomain) -> Self {
        Self {
            values: domain
                .boundary_vertices()
                .iter()
                .map(|&v| (v, domain.position(v)))
                .collect(),
        }
    }

    /// Take the boundary trace of an existing map.
    pub fn from_map(map: &PiecewiseLinearMap, domain: &TriangulatedDomain) -> Self {
        Self {
            values: domain
                .boundary_vertices()
                .iter()
                .map(|&v| (v, map.values()[v]))
                .collect(),
        }
    }

    pub fn from_pairs(pairs: impl IntoIterator<Item = (usize, Complex64)>) -> Self {
        Self {
            values: pairs.into_iter().collect(),
        }
    }

    pub fn get(&self, vertex: usize) -> Option<Complex64> {
        self.values.get(&vertex).copied()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    fn validate(&self, domain: &TriangulatedDomain) -> Result<()> {
        let expected = domain.boundary_vertices().len();
        if self.values.len() != expected
            || !self.values.keys().all(|&v| domain.is_boundary(v))
        {
            return Err(Error::BoundaryMismatch {
                got: self.values.len(),
                expected,
            });
        }
        Ok(())
    }
}

/// Assembled linear system for one Beltrami field.
///
/// Boundary rows are identity rows with the prescribed values on the right
/// hand side; the matching columns are eliminated into the right hand side,
/// which keeps the matrix symmetric and the interior block positive definite.
#[derive(Clone, Debug)]
pub struct LbsSystem {
    matrix: CsMat<f64>,
    rhs_u: Vec<f64>,
    rhs_v: Vec<f64>,
}

impl LbsSystem {
    pub fn matrix(&self) -> &CsMat<f64> {
        &self.matrix
    }

    pub fn rhs_u(&self) -> &[f64] {
        &self.rhs_u
    }

    pub fn rhs_v(&self) -> &[f64] {
        &self.rhs_v
    }
}

/// Assemble the stiffness matrix and both right hand sides.
pub fn assemble_lbs(
    domain: &TriangulatedDomain,
    field: &BeltramiField,
    boundary: &DirichletBoundary,
) -> Result<LbsSystem> {
    field.check_compatible(domain)?;
    boundary.validate(domain)?;
    if let Some((face, modulus)) = field.first_inadmissible() {
        return Err(Error::InadmissibleField { face, modulus });
    }

    let n = domain.vertex_count();
    let mut bvals = vec![Complex64::new(0.0, 0.0); n];
    for (&v, &val) in &boundary.values {
        bvals[v] = val;
    }

    let mut tri = TriMat::new((n, n));
    let mut rhs_u = vec![0.0; n];
    let mut rhs_v = vec![0.0; n];

    for &v in domain.boundary_vertices() {
        tri.add_triplet(v, v, 1.0);
        rhs_u[v] = bvals[v].re;
        rhs_v[v] = bvals[v].im;
    }

    for f in 0..domain.face_count() {
        let (g1, g2, g3) = gamma_coefficients(field.values()[f])?;
        let verts = domain.face(f);
        let area = domain.area(f);
        for a in 0..3 {
            let va = verts[a];
            if domain.is_boundary(va) {
                continue;
            }
            let [ax, ay] = domain.hat_gradient(f, a);
            for (b, &vb) in verts.iter().enumerate() {
                let [bx, by] = domain.hat_gradient(f, b);
                // grad_a . (G grad_b), scaled by face area
                let k = area * (ax * (g1 * bx + g2 * by) + ay * (g2 * bx + g3 * by));
                if domain.is_boundary(vb) {
                    rhs_u[va] -= k * bvals[vb].re;
                    rhs_v[va] -= k * bvals[vb].im;
                } else {
                    tri.add_triplet(va, vb, k);
                }
            }
        }
    }

    Ok(LbsSystem {
        matrix: tri.to_csr(),
        rhs_u,
        rhs_v,
    })
}

/// Map solved from a field, with solve diagnostics.
#[derive(Clone, Debug)]
pub struct LbsSolution {
    pub map: PiecewiseLinearMap,
    /// Set when `max |mu| >` [`CONDITIONING_WARNING_THRESHOLD`].
    pub conditioning_warning: bool,
    /// Relative residual of the worse of the two channel solves.
    pub residual: f64,
}

/// Solve for the boundary-fixed map realizing `field`.
pub fn solve_lbs(
    domain: &TriangulatedDomain,
    field: &BeltramiField,
    boundary: &DirichletBoundary,
) -> Result<PiecewiseLinearMap> {
    Ok(solve_lbs_detailed(domain, field, boundary)?.map)
}

/// As [`solve_lbs`], returning conditioning and residual diagnostics.
pub fn solve_lbs_detailed(
    domain: &TriangulatedDomain,
    field: &BeltramiField,
    boundary: &DirichletBoundary,
) -> Result<LbsSolution> {
    let system = assemble_lbs(domain, field, boundary)?;
    let ldl = Ldl::new()
        .check_symmetry(sprs::SymmetryCheck::DontCheckSymmetry)
        .numeric(system.matrix.view())
        .map_err(|e| Error::SolveFailed(format!("LDL factorization: {e:?}")))?;
    let u = ldl.solve(&system.rhs_u);
    let v = ldl.solve(&system.rhs_v);

    let res_u = relative_residual(&system.matrix, &u, &system.rhs_u);
    let res_v = relative_residual(&system.matrix, &v, &system.rhs_v);
    let residual = res_u.max(res_v);
    if !residual.is_finite() || residual > 1e-8 {
        return Err(Error::SolveFailed(format!(
            "solution residual {residual:.3e} exceeds 1e-8"
        )));
    }

    let mut values: Vec<Complex64> = u
        .iter()
        .zip(&v)
        .map(|(&re, &im)| Complex64::new(re, im))
        .collect();
    // pin boundary values exactly rather than through the identity rows
    for (&bv, &val) in &boundary.values {
        values[bv] = val;
    }

    Ok(LbsSolution {
        map: PiecewiseLinearMap::new(values),
        conditioning_warning: field.max_modulus() > CONDITIONING_WARNING_THRESHOLD,
        residual,
    })
}

fn relative_residual(matrix: &CsMat<f64>, x: &[f64], b: &[f64]) -> f64 {
    let mut r: Vec<f64> = b.to_vec();
    for (val, (i, j)) in matrix.iter() {
        r[i] -= val * x[j];
    }
    let rn = r.iter().map(|v| v * v).sum::<f64>().sqrt();
    let bn = b.iter().map(|v| v * v).sum::<f64>().sqrt();
    if bn == 0.0 {
        rn
    } else {
        rn / bn
    }
}

/// Radial clamp for fields that leave the admissible ball during matrix
/// manipulation. Entries with `|mu| >= 1` are pulled back to `max_modulus`.
#[derive(Clone, Copy, Debug)]
pub struct ClampPolicy {
    pub max_modulus: f64,
}

impl Default for ClampPolicy {
    fn default() -> Self {
        Self { max_modulus: 0.999 }
    }
}

impl ClampPolicy {
    /// Clamp `values` radially; returns the field and how many entries moved.
    pub fn apply(&self, values: &[Complex64]) -> (BeltramiField, usize) {
        let mut clamped = 0usize;
        let out: Vec<Complex64> = values
            .iter()
            .map(|&z| {
                let n = z.norm();
                if n >= 1.0 {
                    clamped += 1;
                    z * (self.max_modulus / n)
                } else {
                    z
                }
            })
            .collect();
        (BeltramiField::new(out), clamped)
    }
}
