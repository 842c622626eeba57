//! Regular triangulation of the pixel grid and per-face calculus of
//! piecewise-linear maps.
//!
//! Vertices sit at pixel centers with unit spacing, origin at the lower-left
//! pixel. Every grid cell splits along its lower-left to upper-right diagonal
//! into two counterclockwise triangles; faces are ordered row-major over
//! cells, lower triangle first, so downstream matrices are reproducible.

use crate::{Complex64, Error, Result};

/// Triangulated rectangular image domain with precomputed per-face geometry.
#[derive(Clone, Debug)]
pub struct TriangulatedDomain {
    width: usize,
    height: usize,
    vertices: Vec<Complex64>,
    faces: Vec<[usize; 3]>,
    boundary: Vec<usize>,
    boundary_mask: Vec<bool>,
    areas: Vec<f64>,
    /// Hat-function gradients: `grads[f][corner] = [d/dx, d/dy]` of the basis
    /// function of `faces[f][corner]` restricted to face `f`.
    grads: Vec<[[f64; 2]; 3]>,
}

impl TriangulatedDomain {
    /// Build the triangulation of an `width x height` pixel grid.
    pub fn new(width: usize, height: usize) -> Result<Self> {
        if width < 2 || height < 2 {
            return Err(Error::GridTooSmall { width, height });
        }
        let mut vertices = Vec::with_capacity(width * height);
        for j in 0..height {
            for i in 0..width {
                vertices.push(Complex64::new(i as f64, j as f64));
            }
        }
        let vid = |i: usize, j: usize| j * width + i;

        let mut faces = Vec::with_capacity(2 * (width - 1) * (height - 1));
        for j in 0..height - 1 {
            for i in 0..width - 1 {
                let (ll, lr) = (vid(i, j), vid(i + 1, j));
                let (ul, ur) = (vid(i, j + 1), vid(i + 1, j + 1));
                faces.push([ll, lr, ur]);
                faces.push([ll, ur, ul]);
            }
        }

        let mut boundary_mask = vec![false; vertices.len()];
        let mut boundary = Vec::new();
        for j in 0..height {
            for i in 0..width {
                if i == 0 || j == 0 || i == width - 1 || j == height - 1 {
                    boundary_mask[vid(i, j)] = true;
                    boundary.push(vid(i, j));
                }
            }
        }

        let mut areas = Vec::with_capacity(faces.len());
        let mut grads = Vec::with_capacity(faces.len());
        for face in &faces {
            let p = [vertices[face[0]], vertices[face[1]], vertices[face[2]]];
            let e1 = p[1] - p[0];
            let e2 = p[2] - p[0];
            let area = 0.5 * (e1.re * e2.im - e1.im * e2.re);
            debug_assert!(area > 0.0, "construction yields CCW faces");
            let mut g = [[0.0; 2]; 3];
            for corner in 0..3 {
                // gradient of the hat at corner i: rotated opposite edge / 2A
                let e = p[(corner + 2) % 3] - p[(corner + 1) % 3];
                g[corner] = [-e.im / (2.0 * area), e.re / (2.0 * area)];
            }
            areas.push(area);
            grads.push(g);
        }

        Ok(Self {
            width,
            height,
            vertices,
            faces,
            boundary,
            boundary_mask,
            areas,
            grads,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn face_count(&self) -> usize {
        self.faces.len()
    }

    /// Pixel-center position of a vertex as `x + i y`.
    pub fn position(&self, vertex: usize) -> Complex64 {
        self.vertices[vertex]
    }

    pub fn positions(&self) -> &[Complex64] {
        &self.vertices
    }

    pub fn face(&self, face: usize) -> [usize; 3] {
        self.faces[face]
    }

    pub fn faces(&self) -> &[[usize; 3]] {
        &self.faces
    }

    pub fn area(&self, face: usize) -> f64 {
        self.areas[face]
    }

    /// Hat-function gradient of `faces[face][corner]` on that face.
    pub fn hat_gradient(&self, face: usize, corner: usize) -> [f64; 2] {
        self.grads[face][corner]
    }

    pub fn is_boundary(&self, vertex: usize) -> bool {
        self.boundary_mask[vertex]
    }

    /// Boundary vertex indices in ascending order.
    pub fn boundary_vertices(&self) -> &[usize] {
        &self.boundary
    }

    pub fn interior_count(&self) -> usize {
        self.vertex_count() - self.boundary.len()
    }
}

/// One complex target value `u + i v` per vertex.
#[derive(Clone, Debug, PartialEq)]
pub struct PiecewiseLinearMap {
    values: Vec<Complex64>,
}

impl PiecewiseLinearMap {
    pub fn new(values: Vec<Complex64>) -> Self {
        Self { values }
    }

    /// The identity embedding of the domain.
    pub fn identity(domain: &TriangulatedDomain) -> Self {
        Self {
            values: domain.positions().to_vec(),
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Complex64] {
        &mut self.values
    }

    /// True iff every boundary vertex maps exactly to its domain position.
    pub fn is_boundary_fixed(&self, domain: &TriangulatedDomain) -> bool {
        domain
            .boundary_vertices()
            .iter()
            .all(|&v| self.values[v] == domain.position(v))
    }

    pub(crate) fn check_compatible(&self, domain: &TriangulatedDomain) -> Result<()> {
        if self.len() != domain.vertex_count() {
            return Err(Error::VertexCountMismatch {
                got: self.len(),
                expected: domain.vertex_count(),
            });
        }
        Ok(())
    }
}

/// Affine Jacobian of a map restricted to one face: `(u, v) = (ax + by, cx + dy) + const`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FaceJacobian {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

impl FaceJacobian {
    pub fn det(&self) -> f64 {
        self.a * self.d - self.b * self.c
    }
}

/// Per-face affine Jacobians of a piecewise-linear map.
pub fn face_jacobians(
    map: &PiecewiseLinearMap,
    domain: &TriangulatedDomain,
) -> Result<Vec<FaceJacobian>> {
    map.check_compatible(domain)?;
    let mut out = Vec::with_capacity(domain.face_count());
    for f in 0..domain.face_count() {
        if domain.area(f) <= 1e-14 {
            return Err(Error::DegenerateFace {
                face: f,
                area: domain.area(f),
            });
        }
        let verts = domain.face(f);
        let (mut a, mut b, mut c, mut d) = (0.0, 0.0, 0.0, 0.0);
        for (corner, &vert) in verts.iter().enumerate() {
            let val = map.values()[vert];
            let [gx, gy] = domain.hat_gradient(f, corner);
            a += val.re * gx;
            b += val.re * gy;
            c += val.im * gx;
            d += val.im * gy;
        }
        out.push(FaceJacobian { a, b, c, d });
    }
    Ok(out)
}

/// Result of the per-face orientation check.
#[derive(Clone, Debug)]
pub struct OrientationCheck {
    /// Jacobian determinant per face.
    pub determinants: Vec<f64>,
    /// True iff every determinant is strictly positive.
    pub bijective: bool,
}

/// Per-face Jacobian determinants and the global orientation flag.
pub fn check_orientation(
    map: &PiecewiseLinearMap,
    domain: &TriangulatedDomain,
) -> Result<OrientationCheck> {
    let jacobians = face_jacobians(map, domain)?;
    let determinants: Vec<f64> = jacobians.iter().map(FaceJacobian::det).collect();
    let bijective = determinants.iter().all(|&d| d > 0.0);
    Ok(OrientationCheck {
        determinants,
        bijective,
    })
}
