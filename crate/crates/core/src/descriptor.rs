//! Longitudinal deformation descriptors.
//!
//! The Beltrami descriptor of a frame sequence is the complex matrix whose
//! column `j` is the per-face Beltrami field of the deformation from the
//! reference frame to frame `j`; rows follow the mesh face ordering. The
//! displacement descriptor is the baseline alternative: per-vertex
//! displacements `f_j - id` viewed as complex numbers.

use ndarray::prelude::*;

use crate::beltrami::{compute_beltrami, BeltramiField};
use crate::lbs::{solve_lbs_detailed, ClampPolicy, DirichletBoundary};
use crate::mesh::{PiecewiseLinearMap, TriangulatedDomain};
use crate::{Complex64, Error, Result};

/// `|F| x t` complex matrix of per-face Beltrami coefficients.
#[derive(Clone, Debug)]
pub struct BeltramiDescriptor {
    data: Array2<Complex64>,
    width: usize,
    height: usize,
}

impl BeltramiDescriptor {
    /// Column `j` becomes the Beltrami field of `maps[j]`.
    pub fn from_maps(maps: &[PiecewiseLinearMap], domain: &TriangulatedDomain) -> Result<Self> {
        let mut data = Array2::zeros((domain.face_count(), maps.len()));
        for (j, map) in maps.iter().enumerate() {
            let field = compute_beltrami(map, domain).map_err(|e| e.at_frame(j))?;
            for (i, &mu) in field.values().iter().enumerate() {
                data[[i, j]] = mu;
            }
        }
        Ok(Self {
            data,
            width: domain.width(),
            height: domain.height(),
        })
    }

    /// Wrap an existing matrix; the row count must match the grid's faces.
    pub fn from_matrix(data: Array2<Complex64>, width: usize, height: usize) -> Result<Self> {
        let expected = 2 * (width.saturating_sub(1)) * (height.saturating_sub(1));
        if data.nrows() != expected {
            return Err(Error::ShapeMismatch(format!(
                "descriptor has {} rows, a {width}x{height} grid has {expected} faces",
                data.nrows()
            )));
        }
        Ok(Self {
            data,
            width,
            height,
        })
    }

    pub fn data(&self) -> &Array2<Complex64> {
        &self.data
    }

    pub fn grid(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn frames(&self) -> usize {
        self.data.ncols()
    }

    pub fn rows(&self) -> usize {
        self.data.nrows()
    }

    pub fn column_field(&self, frame: usize) -> BeltramiField {
        BeltramiField::new(self.data.column(frame).to_vec())
    }

    /// Entrywise max modulus: the descriptor analogue of `max |mu|`.
    pub fn max_modulus(&self) -> f64 {
        crate::rpca::max_modulus(self.data.view())
    }

    pub fn is_admissible(&self) -> bool {
        self.max_modulus() < 1.0
    }

    /// Solve every column back to a boundary-fixed map.
    ///
    /// Entries outside the admissible ball (RPCA intermediates) are clamped
    /// per `clamp` and counted; per-column failures carry the column index
    /// and no partial result is returned.
    pub fn reconstruct(
        &self,
        domain: &TriangulatedDomain,
        clamp: ClampPolicy,
    ) -> Result<Reconstruction> {
        if self.data.nrows() != domain.face_count()
            || (self.width, self.height) != (domain.width(), domain.height())
        {
            return Err(Error::ShapeMismatch(format!(
                "descriptor for {}x{} grid reconstructed on {}x{} domain",
                self.width,
                self.height,
                domain.width(),
                domain.height()
            )));
        }
        let boundary = DirichletBoundary::identity(domain);
        let mut maps = Vec::with_capacity(self.frames());
        let mut clamped_entries = 0usize;
        let mut conditioning_warnings = 0usize;
        for j in 0..self.frames() {
            let (field, clamped) = clamp.apply(&self.data.column(j).to_vec());
            clamped_entries += clamped;
            let solution =
                solve_lbs_detailed(domain, &field, &boundary).map_err(|e| e.at_frame(j))?;
            if solution.conditioning_warning {
                conditioning_warnings += 1;
            }
            maps.push(solution.map);
        }
        Ok(Reconstruction {
            maps,
            clamped_entries,
            conditioning_warnings,
        })
    }
}

/// Maps recovered from a descriptor, with clamping diagnostics.
#[derive(Clone, Debug)]
pub struct Reconstruction {
    pub maps: Vec<PiecewiseLinearMap>,
    /// Entries pulled back into the admissible ball before solving.
    pub clamped_entries: usize,
    /// Columns whose field modulus crossed the conditioning threshold.
    pub conditioning_warnings: usize,
}

/// `|V| x t` complex matrix of per-vertex displacements from the identity.
#[derive(Clone, Debug)]
pub struct DisplacementDescriptor {
    data: Array2<Complex64>,
    width: usize,
    height: usize,
}

impl DisplacementDescriptor {
    pub fn from_maps(maps: &[PiecewiseLinearMap], domain: &TriangulatedDomain) -> Result<Self> {
        let mut data = Array2::zeros((domain.vertex_count(), maps.len()));
        for (j, map) in maps.iter().enumerate() {
            map.check_compatible(domain).map_err(|e| e.at_frame(j))?;
            for v in 0..domain.vertex_count() {
                data[[v, j]] = map.values()[v] - domain.position(v);
            }
        }
        Ok(Self {
            data,
            width: domain.width(),
            height: domain.height(),
        })
    }

    pub fn from_matrix(data: Array2<Complex64>, width: usize, height: usize) -> Result<Self> {
        if data.nrows() != width * height {
            return Err(Error::ShapeMismatch(format!(
                "displacement descriptor has {} rows, a {width}x{height} grid has {} vertices",
                data.nrows(),
                width * height
            )));
        }
        Ok(Self {
            data,
            width,
            height,
        })
    }

    pub fn data(&self) -> &Array2<Complex64> {
        &self.data
    }

    pub fn grid(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn frames(&self) -> usize {
        self.data.ncols()
    }

    /// Add each displacement column back onto the identity embedding.
    pub fn reconstruct(&self, domain: &TriangulatedDomain) -> Result<Vec<PiecewiseLinearMap>> {
        if self.data.nrows() != domain.vertex_count() {
            return Err(Error::ShapeMismatch(format!(
                "displacement descriptor has {} rows, domain has {} vertices",
                self.data.nrows(),
                domain.vertex_count()
            )));
        }
        Ok((0..self.frames())
            .map(|j| {
                PiecewiseLinearMap::new(
                    (0..domain.vertex_count())
                        .map(|v| domain.position(v) + self.data[[v, j]])
                        .collect(),
                )
            })
            .collect())
    }
}

/// Frobenius distance between two equally shaped complex matrices.
pub fn descriptor_distance(a: ArrayView2<Complex64>, b: ArrayView2<Complex64>) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::ShapeMismatch(format!(
            "{:?} vs {:?}",
            a.dim(),
            b.dim()
        )));
    }
    Ok((&a - &b).iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt())
}
