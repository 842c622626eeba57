//! End-to-end decomposition runs: descriptor build, RPCA, reconstruction,
//! image warping, and reporting. File formats live in [`io`].

pub mod io;

use std::path::PathBuf;
use std::time::{Duration, Instant};

use ndarray::prelude::*;

use crate::descriptor::{BeltramiDescriptor, DisplacementDescriptor};
use crate::lbs::ClampPolicy;
use crate::mesh::{check_orientation, PiecewiseLinearMap, TriangulatedDomain};
use crate::rpca::{self, AdmmParams, DecompositionResult};
use crate::{Complex64, Error, Result};

/// 8-bit grayscale image, row-major, row 0 at the bottom (mesh orientation).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Image {
    width: usize,
    height: usize,
    data: Vec<u8>,
}

impl Image {
    pub fn new(width: usize, height: usize, data: Vec<u8>) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::ShapeMismatch(format!(
                "image buffer holds {} bytes, {width}x{height} needs {}",
                data.len(),
                width * height
            )));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn filled(width: usize, height: usize, value: u8) -> Self {
        Self {
            width,
            height,
            data: vec![value; width * height],
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.data[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, value: u8) {
        self.data[y * self.width + x] = value;
    }

    /// Bilinear sample with border clamping.
    pub fn sample(&self, x: f64, y: f64) -> f64 {
        let xc = x.clamp(0.0, (self.width - 1) as f64);
        let yc = y.clamp(0.0, (self.height - 1) as f64);
        let x0 = xc.floor() as usize;
        let y0 = yc.floor() as usize;
        let x1 = (x0 + 1).min(self.width - 1);
        let y1 = (y0 + 1).min(self.height - 1);
        let fx = xc - x0 as f64;
        let fy = yc - y0 as f64;
        let v00 = self.get(x0, y0) as f64;
        let v10 = self.get(x1, y0) as f64;
        let v01 = self.get(x0, y1) as f64;
        let v11 = self.get(x1, y1) as f64;
        v00 * (1.0 - fx) * (1.0 - fy)
            + v10 * fx * (1.0 - fy)
            + v01 * (1.0 - fx) * fy
            + v11 * fx * fy
    }
}

/// Which matrix represents the sequence.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DescriptorKind {
    /// Per-face Beltrami coefficients, reconstructed through the solver.
    Beltrami,
    /// Per-vertex displacements, reconstructed by direct addition.
    Displacement,
}

impl std::str::FromStr for DescriptorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "beltrami" => Ok(Self::Beltrami),
            "displacement" => Ok(Self::Displacement),
            other => Err(Error::InvalidParameter(format!(
                "descriptor kind must be beltrami or displacement, got {other}"
            ))),
        }
    }
}

impl std::fmt::Display for DescriptorKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Beltrami => write!(f, "beltrami"),
            Self::Displacement => write!(f, "displacement"),
        }
    }
}

/// Configuration of one pipeline run.
#[derive(Clone, Debug)]
pub struct PipelineConfig {
    /// Index of the frame the registrations are taken from; selects the
    /// warp source and is validated against the frame count.
    pub reference_frame: usize,
    pub admm: AdmmParams,
    pub descriptor_kind: DescriptorKind,
    pub clamp: ClampPolicy,
    /// When set, frames, matrices, history, and the report are written here.
    pub out_dir: Option<PathBuf>,
    /// Write the per-iteration history CSV alongside the other artifacts.
    pub emit_history: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            reference_frame: 0,
            admm: AdmmParams::default(),
            descriptor_kind: DescriptorKind::Beltrami,
            clamp: ClampPolicy::default(),
            out_dir: None,
            emit_history: true,
        }
    }
}

/// Wall-clock duration of each stage.
#[derive(Clone, Copy, Debug, Default)]
pub struct StageTimings {
    pub descriptor: Duration,
    pub decomposition: Duration,
    pub reconstruction: Duration,
    pub warping: Duration,
}

/// Condensed view of the ADMM run.
#[derive(Clone, Copy, Debug)]
pub struct ConvergenceSummary {
    pub iterations: usize,
    pub converged: bool,
    pub final_residual: f64,
    pub alpha: f64,
    pub beta_cap: u32,
}

/// Quantitative summary of a pipeline run.
#[derive(Clone, Debug)]
pub struct PipelineReport {
    pub descriptor_kind: DescriptorKind,
    /// Numerical rank of the input descriptor.
    pub input_rank: usize,
    /// Rank retained by the final SVT step of the decomposition.
    pub recovered_rank: usize,
    /// Squared Frobenius energy of each sparse column.
    pub sparse_energy: Vec<f64>,
    pub convergence: ConvergenceSummary,
    pub low_rank_bijective: Vec<bool>,
    pub sparse_bijective: Vec<bool>,
    pub timings: StageTimings,
    /// Relative singular value cutoff used for the rank figures.
    pub rank_tolerance: f64,
    /// Entries clamped back into the admissible ball before solving.
    pub clamped_entries: usize,
    /// Reconstructed columns flagged as ill-conditioned.
    pub conditioning_warnings: usize,
}

impl PipelineReport {
    /// Fraction of total sparse energy inside the labeled frames.
    pub fn sparse_energy_fraction(&self, labels: &[bool]) -> f64 {
        let total: f64 = self.sparse_energy.iter().sum();
        if total == 0.0 {
            return 0.0;
        }
        let inside: f64 = self
            .sparse_energy
            .iter()
            .zip(labels)
            .filter(|(_, &l)| l)
            .map(|(e, _)| e)
            .sum();
        inside / total
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        s.push_str(&format!("descriptor kind:        {}\n", self.descriptor_kind));
        s.push_str(&format!("frames:                 {}\n", self.sparse_energy.len()));
        s.push_str(&format!(
            "input descriptor rank:  {} (rel tol {:.1e})\n",
            self.input_rank, self.rank_tolerance
        ));
        s.push_str(&format!(
            "recovered low-rank rank: {}\n",
            self.recovered_rank
        ));
        s.push_str(&format!(
            "convergence:            {} after {} iterations, residual {:.3e}\n",
            if self.convergence.converged {
                "converged"
            } else {
                "stopped"
            },
            self.convergence.iterations,
            self.convergence.final_residual
        ));
        s.push_str(&format!(
            "alpha:                  {:.6}\nbeta cap exponent:      {}\n",
            self.convergence.alpha, self.convergence.beta_cap
        ));
        s.push_str(&format!(
            "clamped entries:        {}\nconditioning warnings:  {}\n",
            self.clamped_entries, self.conditioning_warnings
        ));
        let bij = |flags: &[bool]| flags.iter().filter(|&&b| b).count();
        s.push_str(&format!(
            "bijective maps:         low-rank {}/{}, sparse {}/{}\n",
            bij(&self.low_rank_bijective),
            self.low_rank_bijective.len(),
            bij(&self.sparse_bijective),
            self.sparse_bijective.len()
        ));
        s.push_str(&format!(
            "timings:                descriptor {:?}, decomposition {:?}, reconstruction {:?}, warping {:?}\n",
            self.timings.descriptor,
            self.timings.decomposition,
            self.timings.reconstruction,
            self.timings.warping
        ));
        let total: f64 = self.sparse_energy.iter().sum();
        s.push_str(&format!("total sparse energy:    {total:.6e}\n"));
        s
    }

    /// Per-frame CSV: `frame,sparse_energy,lowrank_bijective,sparse_bijective`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("frame,sparse_energy,lowrank_bijective,sparse_bijective\n");
        for k in 0..self.sparse_energy.len() {
            s.push_str(&format!(
                "{},{:.17e},{},{}\n",
                k,
                self.sparse_energy[k],
                self.low_rank_bijective.get(k).copied().unwrap_or(false),
                self.sparse_bijective.get(k).copied().unwrap_or(false),
            ));
        }
        s
    }
}

/// Everything a pipeline run produces.
#[derive(Clone, Debug)]
pub struct PipelineOutput {
    /// The input descriptor matrix the decomposition ran on.
    pub descriptor: Array2<Complex64>,
    pub low_rank_maps: Vec<PiecewiseLinearMap>,
    pub sparse_maps: Vec<PiecewiseLinearMap>,
    pub low_rank_frames: Vec<Image>,
    pub sparse_frames: Vec<Image>,
    pub decomposition: DecompositionResult,
    pub report: PipelineReport,
}

fn stage<T>(name: &str, r: Result<T>) -> Result<T> {
    r.map_err(|e| Error::Stage {
        stage: name.to_string(),
        source: Box::new(e),
    })
}

/// Run descriptor -> decomposition -> reconstruction -> warping.
///
/// `maps[j]` must be the deformation from the reference frame to frame `j`
/// on `domain`; `reference` is the image warped by the reconstructed maps.
pub fn run_pipeline(
    maps: &[PiecewiseLinearMap],
    domain: &TriangulatedDomain,
    reference: &Image,
    config: &PipelineConfig,
) -> Result<PipelineOutput> {
    if maps.is_empty() {
        return Err(Error::DegenerateInput("pipeline needs at least one frame".into()));
    }
    if config.reference_frame >= maps.len() {
        return Err(Error::InvalidParameter(format!(
            "reference frame {} out of range 0..{}",
            config.reference_frame,
            maps.len()
        )));
    }
    if reference.width() != domain.width() || reference.height() != domain.height() {
        return Err(Error::ShapeMismatch(format!(
            "reference image {}x{} on a {}x{} grid",
            reference.width(),
            reference.height(),
            domain.width(),
            domain.height()
        )));
    }

    let mut timings = StageTimings::default();

    // descriptor
    let t0 = Instant::now();
    let matrix: Array2<Complex64> = match config.descriptor_kind {
        DescriptorKind::Beltrami => {
            stage("descriptor", BeltramiDescriptor::from_maps(maps, domain))?
                .data()
                .clone()
        }
        DescriptorKind::Displacement => {
            stage("descriptor", DisplacementDescriptor::from_maps(maps, domain))?
                .data()
                .clone()
        }
    };
    timings.descriptor = t0.elapsed();
    let input_rank = rpca::numerical_rank(matrix.view(), config.admm.rank_tolerance);

    // decomposition; an all-identity sequence has a zero descriptor, which
    // splits trivially rather than through the solver
    let t1 = Instant::now();
    let decomposition = if matrix.iter().all(|z| z.norm() == 0.0) {
        DecompositionResult {
            low_rank: Array2::zeros(matrix.dim()),
            sparse: Array2::zeros(matrix.dim()),
            multiplier: Array2::zeros(matrix.dim()),
            history: Vec::new(),
            rank: 0,
            iterations: 0,
            converged: true,
            alpha: config.admm.resolve_alpha(matrix.nrows(), matrix.ncols()),
        }
    } else {
        stage("decomposition", rpca::decompose(&matrix, &config.admm))?
    };
    timings.decomposition = t1.elapsed();

    // reconstruction
    let t2 = Instant::now();
    let mut clamped_entries = 0usize;
    let mut conditioning_warnings = 0usize;
    let (low_rank_maps, sparse_maps) = match config.descriptor_kind {
        DescriptorKind::Beltrami => {
            let rebuild = |m: &Array2<Complex64>| {
                BeltramiDescriptor::from_matrix(m.clone(), domain.width(), domain.height())
                    .and_then(|d| d.reconstruct(domain, config.clamp))
            };
            let rec_n = stage("reconstruction", rebuild(&decomposition.low_rank))?;
            let rec_a = stage("reconstruction", rebuild(&decomposition.sparse))?;
            clamped_entries = rec_n.clamped_entries + rec_a.clamped_entries;
            conditioning_warnings = rec_n.conditioning_warnings + rec_a.conditioning_warnings;
            (rec_n.maps, rec_a.maps)
        }
        DescriptorKind::Displacement => {
            let rebuild = |m: &Array2<Complex64>| {
                DisplacementDescriptor::from_matrix(m.clone(), domain.width(), domain.height())
                    .and_then(|d| d.reconstruct(domain))
            };
            (
                stage("reconstruction", rebuild(&decomposition.low_rank))?,
                stage("reconstruction", rebuild(&decomposition.sparse))?,
            )
        }
    };
    timings.reconstruction = t2.elapsed();

    // warping
    let t3 = Instant::now();
    let mut low_rank_frames = Vec::with_capacity(maps.len());
    let mut sparse_frames = Vec::with_capacity(maps.len());
    for (j, map) in low_rank_maps.iter().enumerate() {
        low_rank_frames.push(stage(
            "warping",
            warp_image(reference, map, domain).map_err(|e| e.at_frame(j)),
        )?);
    }
    for (j, map) in sparse_maps.iter().enumerate() {
        sparse_frames.push(stage(
            "warping",
            warp_image(reference, map, domain).map_err(|e| e.at_frame(j)),
        )?);
    }
    timings.warping = t3.elapsed();

    let sparse_energy: Vec<f64> = (0..decomposition.sparse.ncols())
        .map(|j| {
            decomposition
                .sparse
                .column(j)
                .iter()
                .map(|z| z.norm_sqr())
                .sum()
        })
        .collect();
    let bijectivity = |list: &[PiecewiseLinearMap]| -> Result<Vec<bool>> {
        list.iter()
            .map(|m| Ok(check_orientation(m, domain)?.bijective))
            .collect()
    };
    let report = PipelineReport {
        descriptor_kind: config.descriptor_kind,
        input_rank,
        recovered_rank: decomposition.rank,
        sparse_energy,
        convergence: ConvergenceSummary {
            iterations: decomposition.iterations,
            converged: decomposition.converged,
            final_residual: decomposition
                .history
                .last()
                .map(|r| r.residual)
                .unwrap_or(f64::NAN),
            alpha: decomposition.alpha,
            beta_cap: config.admm.beta_cap,
        },
        low_rank_bijective: stage("report", bijectivity(&low_rank_maps))?,
        sparse_bijective: stage("report", bijectivity(&sparse_maps))?,
        timings,
        rank_tolerance: config.admm.rank_tolerance,
        clamped_entries,
        conditioning_warnings,
    };

    let output = PipelineOutput {
        descriptor: matrix,
        low_rank_maps,
        sparse_maps,
        low_rank_frames,
        sparse_frames,
        decomposition,
        report,
    };

    if let Some(dir) = &config.out_dir {
        stage("output", io::write_pipeline_artifacts(dir, &output, config))?;
    }

    Ok(output)
}

/// Push-forward warp: each deformed triangle is rasterized with barycentric
/// sampling of the source image; uncovered pixels keep the source value.
pub fn warp_image(
    image: &Image,
    map: &PiecewiseLinearMap,
    domain: &TriangulatedDomain,
) -> Result<Image> {
    map.check_compatible(domain)?;
    if image.width() != domain.width() || image.height() != domain.height() {
        return Err(Error::ShapeMismatch(format!(
            "image {}x{} on a {}x{} grid",
            image.width(),
            image.height(),
            domain.width(),
            domain.height()
        )));
    }
    if let Some(v) = map
        .values()
        .iter()
        .position(|z| !z.re.is_finite() || !z.im.is_finite())
    {
        return Err(Error::NonFiniteMap { vertex: v });
    }

    let mut out = image.clone();
    let (w, h) = (domain.width(), domain.height());
    for f in 0..domain.face_count() {
        let verts = domain.face(f);
        let src = [
            domain.position(verts[0]),
            domain.position(verts[1]),
            domain.position(verts[2]),
        ];
        let dst = [
            map.values()[verts[0]],
            map.values()[verts[1]],
            map.values()[verts[2]],
        ];
        let e1 = dst[1] - dst[0];
        let e2 = dst[2] - dst[0];
        let det = e1.re * e2.im - e1.im * e2.re;
        if det.abs() < 1e-12 {
            continue; // collapsed triangle covers no pixel centers
        }
        let min_x = dst.iter().map(|z| z.re).fold(f64::INFINITY, f64::min);
        let max_x = dst.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max);
        let min_y = dst.iter().map(|z| z.im).fold(f64::INFINITY, f64::min);
        let max_y = dst.iter().map(|z| z.im).fold(f64::NEG_INFINITY, f64::max);
        let x0 = min_x.ceil().max(0.0) as usize;
        let x1 = (max_x.floor() as isize).min(w as isize - 1);
        let y0 = min_y.ceil().max(0.0) as usize;
        let y1 = (max_y.floor() as isize).min(h as isize - 1);
        if x1 < x0 as isize || y1 < y0 as isize {
            continue;
        }
        for py in y0..=y1 as usize {
            for px in x0..=x1 as usize {
                let p = Complex64::new(px as f64, py as f64);
                let d = p - dst[0];
                let l1 = (d.re * e2.im - d.im * e2.re) / det;
                let l2 = (e1.re * d.im - e1.im * d.re) / det;
                let l0 = 1.0 - l1 - l2;
                let eps = -1e-9;
                if l0 < eps || l1 < eps || l2 < eps {
                    continue;
                }
                let q = src[0] * l0 + src[1] * l1 + src[2] * l2;
                let value = image.sample(q.re, q.im);
                out.set(px, py, value.round().clamp(0.0, 255.0) as u8);
            }
        }
    }
    Ok(out)
}
