//! Command line front end: synthetic data generation, descriptor assembly,
//! decomposition, reconstruction, and reporting.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use qcdeform::descriptor::{BeltramiDescriptor, DisplacementDescriptor};
use qcdeform::lbs::ClampPolicy;
use qcdeform::mesh::{check_orientation, TriangulatedDomain};
use qcdeform::pipeline::{
    io, run_pipeline, ConvergenceSummary, DescriptorKind, PipelineConfig, PipelineReport,
    StageTimings,
};
use qcdeform::rpca::{self, AdmmParams};
use qcdeform::synth::{generate_sequence, SequenceDataset};

#[derive(Parser)]
#[command(
    name = "qcdeform",
    about = "Decompose planar deformation sequences into periodic and irregular parts",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct AdmmArgs {
    /// Sparsity weight; defaults to 1/sqrt(max(rows, cols)) of the descriptor
    #[arg(long)]
    alpha: Option<f64>,
    /// Penalty cap exponent N: the schedule saturates at 1.5^N
    #[arg(long, default_value_t = 26)]
    beta_cap: u32,
    /// Relative residual convergence tolerance
    #[arg(long, default_value_t = 1e-7)]
    tol: f64,
    #[arg(long, default_value_t = 500)]
    max_iters: usize,
    /// Relative singular value cutoff for rank reports
    #[arg(long, default_value_t = 1e-8)]
    rank_tol: f64,
}

impl AdmmArgs {
    fn to_params(&self) -> AdmmParams {
        AdmmParams {
            alpha: self.alpha,
            beta_cap: self.beta_cap,
            tolerance: self.tol,
            max_iterations: self.max_iters,
            rank_tolerance: self.rank_tol,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic circle sequence from a spec file
    Synth {
        /// Flat key = value spec file
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
        /// Override the spec's random seed
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Build a descriptor matrix from a map sequence
    Describe {
        /// CMX1 file of maps, one column per frame, u + iv per vertex
        #[arg(long)]
        maps: PathBuf,
        #[arg(long)]
        width: usize,
        #[arg(long)]
        height: usize,
        #[arg(long, default_value = "beltrami")]
        descriptor_kind: String,
        /// Index of the reference frame the maps are registered from
        #[arg(long, default_value_t = 0)]
        ref_frame: usize,
        /// Output CMX1 path
        #[arg(long)]
        out: PathBuf,
    },
    /// Split a descriptor into low-rank and sparse parts
    Decompose {
        #[arg(long)]
        descriptor: PathBuf,
        #[command(flatten)]
        admm: AdmmArgs,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Solve a descriptor matrix back into maps and warped frames
    Reconstruct {
        /// CMX1 descriptor matrix (low-rank or sparse part)
        #[arg(long)]
        matrix: PathBuf,
        #[arg(long)]
        width: usize,
        #[arg(long)]
        height: usize,
        #[arg(long, default_value = "beltrami")]
        descriptor_kind: String,
        /// Reference image to warp; frames are skipped without it
        #[arg(long)]
        reference: Option<PathBuf>,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Summarize decomposition artifacts in a directory
    Report {
        /// Directory holding descriptor.cmx, lowrank.cmx, sparse.cmx, history.csv
        #[arg(long)]
        out_dir: PathBuf,
        #[arg(long)]
        width: usize,
        #[arg(long)]
        height: usize,
        /// labels.csv marking perturbed frames, for the energy fraction
        #[arg(long)]
        labels: Option<PathBuf>,
        #[arg(long, default_value_t = 1e-8)]
        rank_tol: f64,
    },
    /// End-to-end run: maps (or synthetic spec) to decomposed maps and frames
    Pipeline {
        /// Synthetic input: sequence spec file
        #[arg(long, conflicts_with_all = ["maps", "reference"])]
        dataset_spec: Option<PathBuf>,
        /// Registered maps as CMX1 (requires --reference, --width, --height)
        #[arg(long, requires = "reference")]
        maps: Option<PathBuf>,
        /// Reference image (PGM) for the map input path
        #[arg(long)]
        reference: Option<PathBuf>,
        #[arg(long)]
        width: Option<usize>,
        #[arg(long)]
        height: Option<usize>,
        #[arg(long, default_value = "beltrami")]
        descriptor_kind: String,
        #[arg(long, default_value_t = 0)]
        ref_frame: usize,
        /// Override the spec file's seed (synthetic path)
        #[arg(long)]
        seed: Option<u64>,
        #[command(flatten)]
        admm: AdmmArgs,
        #[arg(long)]
        out_dir: PathBuf,
    },
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Synth { spec, out_dir, seed } => cmd_synth(&spec, &out_dir, seed),
        Command::Describe {
            maps,
            width,
            height,
            descriptor_kind,
            ref_frame,
            out,
        } => cmd_describe(&maps, width, height, &descriptor_kind, ref_frame, &out),
        Command::Decompose {
            descriptor,
            admm,
            out_dir,
        } => cmd_decompose(&descriptor, &admm, &out_dir),
        Command::Reconstruct {
            matrix,
            width,
            height,
            descriptor_kind,
            reference,
            out_dir,
        } => cmd_reconstruct(&matrix, width, height, &descriptor_kind, reference.as_deref(), &out_dir),
        Command::Report {
            out_dir,
            width,
            height,
            labels,
            rank_tol,
        } => cmd_report(&out_dir, width, height, labels.as_deref(), rank_tol),
        Command::Pipeline {
            dataset_spec,
            maps,
            reference,
            width,
            height,
            descriptor_kind,
            ref_frame,
            seed,
            admm,
            out_dir,
        } => cmd_pipeline(
            dataset_spec.as_deref(),
            maps.as_deref(),
            reference.as_deref(),
            width,
            height,
            &descriptor_kind,
            ref_frame,
            seed,
            &admm,
            &out_dir,
        ),
    }
}

fn write_labels(path: &Path, perturbed: &[bool]) -> Result<()> {
    let mut text = String::from("frame,perturbed\n");
    for (k, &p) in perturbed.iter().enumerate() {
        text.push_str(&format!("{k},{}\n", p as u8));
    }
    std::fs::write(path, text)?;
    Ok(())
}

fn read_labels(path: &Path) -> Result<Vec<bool>> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading labels {}", path.display()))?;
    let mut out = Vec::new();
    for line in text.lines().skip(1) {
        if line.trim().is_empty() {
            continue;
        }
        let flag = line
            .rsplit(',')
            .next()
            .and_then(|t| t.trim().parse::<u8>().ok())
            .with_context(|| format!("bad label line {line:?}"))?;
        out.push(flag != 0);
    }
    Ok(out)
}

fn write_dataset(dir: &Path, data: &SequenceDataset) -> Result<()> {
    std::fs::create_dir_all(dir.join("frames"))?;
    for (k, frame) in data.frames.iter().enumerate() {
        io::write_pgm(&dir.join("frames").join(io::frame_name(k)), frame)?;
    }
    io::write_matrix(&dir.join("maps.cmx"), io::maps_to_matrix(&data.maps)?.view())?;
    io::write_matrix(
        &dir.join("clean_maps.cmx"),
        io::maps_to_matrix(&data.clean_maps)?.view(),
    )?;
    io::write_pgm(&dir.join("reference.pgm"), &data.reference_image())?;
    write_labels(&dir.join("labels.csv"), &data.perturbed)?;
    Ok(())
}

fn cmd_synth(spec_path: &Path, out_dir: &Path, seed: Option<u64>) -> Result<()> {
    let mut spec = io::read_sequence_spec(spec_path)
        .with_context(|| format!("reading spec {}", spec_path.display()))?;
    if let Some(seed) = seed {
        spec.seed = seed;
    }
    let data = generate_sequence(&spec).context("generating sequence")?;
    write_dataset(out_dir, &data)?;
    println!(
        "wrote {} frames ({} perturbed) to {}",
        data.frame_count(),
        data.perturbed_frames().len(),
        out_dir.display()
    );
    Ok(())
}

fn parse_kind(s: &str) -> Result<DescriptorKind> {
    Ok(s.parse::<DescriptorKind>()?)
}

fn cmd_describe(
    maps_path: &Path,
    width: usize,
    height: usize,
    kind: &str,
    ref_frame: usize,
    out: &Path,
) -> Result<()> {
    let kind = parse_kind(kind)?;
    let matrix = io::read_matrix(maps_path)?;
    if matrix.nrows() != width * height {
        bail!(
            "maps file has {} rows, a {width}x{height} grid has {} vertices",
            matrix.nrows(),
            width * height
        );
    }
    if ref_frame >= matrix.ncols() {
        bail!("reference frame {ref_frame} out of range 0..{}", matrix.ncols());
    }
    let domain = TriangulatedDomain::new(width, height)?;
    let maps = io::matrix_to_maps(matrix.view());
    let data = match kind {
        DescriptorKind::Beltrami => BeltramiDescriptor::from_maps(&maps, &domain)?
            .data()
            .clone(),
        DescriptorKind::Displacement => DisplacementDescriptor::from_maps(&maps, &domain)?
            .data()
            .clone(),
    };
    io::write_matrix(out, data.view())?;
    println!(
        "wrote {} descriptor {}x{} to {}",
        kind,
        data.nrows(),
        data.ncols(),
        out.display()
    );
    Ok(())
}

fn cmd_decompose(descriptor: &Path, admm: &AdmmArgs, out_dir: &Path) -> Result<()> {
    let matrix = io::read_matrix(descriptor)?;
    let params = admm.to_params();
    let result = rpca::decompose(&matrix, &params).context("decomposition")?;
    std::fs::create_dir_all(out_dir)?;
    io::write_matrix(&out_dir.join("lowrank.cmx"), result.low_rank.view())?;
    io::write_matrix(&out_dir.join("sparse.cmx"), result.sparse.view())?;
    io::write_history(&out_dir.join("history.csv"), &result.history)?;
    println!(
        "{} after {} iterations (residual {:.3e}); input rank {}, low-rank rank {}, alpha {:.6}",
        if result.converged { "converged" } else { "stopped" },
        result.iterations,
        result.history.last().map(|r| r.residual).unwrap_or(f64::NAN),
        rpca::numerical_rank(matrix.view(), params.rank_tolerance),
        result.rank,
        result.alpha,
    );
    Ok(())
}

fn cmd_reconstruct(
    matrix_path: &Path,
    width: usize,
    height: usize,
    kind: &str,
    reference: Option<&Path>,
    out_dir: &Path,
) -> Result<()> {
    let kind = parse_kind(kind)?;
    let matrix = io::read_matrix(matrix_path)?;
    let domain = TriangulatedDomain::new(width, height)?;
    let maps = match kind {
        DescriptorKind::Beltrami => {
            let desc = BeltramiDescriptor::from_matrix(matrix, width, height)?;
            let rec = desc.reconstruct(&domain, ClampPolicy::default())?;
            if rec.clamped_entries > 0 {
                eprintln!("clamped {} inadmissible entries", rec.clamped_entries);
            }
            rec.maps
        }
        DescriptorKind::Displacement => {
            DisplacementDescriptor::from_matrix(matrix, width, height)?.reconstruct(&domain)?
        }
    };
    std::fs::create_dir_all(out_dir)?;
    io::write_matrix(&out_dir.join("maps.cmx"), io::maps_to_matrix(&maps)?.view())?;
    let bijective = maps
        .iter()
        .map(|m| Ok(check_orientation(m, &domain)?.bijective))
        .collect::<qcdeform::Result<Vec<bool>>>()?;
    println!(
        "reconstructed {} maps ({} bijective)",
        maps.len(),
        bijective.iter().filter(|&&b| b).count()
    );
    if let Some(reference) = reference {
        let image = io::read_pgm(reference)?;
        let frames_dir = out_dir.join("frames");
        std::fs::create_dir_all(&frames_dir)?;
        for (k, map) in maps.iter().enumerate() {
            let warped = qcdeform::pipeline::warp_image(&image, map, &domain)?;
            io::write_pgm(&frames_dir.join(io::frame_name(k)), &warped)?;
        }
        println!("warped {} frames into {}", maps.len(), frames_dir.display());
    }
    Ok(())
}

fn cmd_report(
    out_dir: &Path,
    width: usize,
    height: usize,
    labels: Option<&Path>,
    rank_tol: f64,
) -> Result<()> {
    let descriptor = io::read_matrix(&out_dir.join("descriptor.cmx"))?;
    let sparse = io::read_matrix(&out_dir.join("sparse.cmx"))?;
    let history = io::read_history(&out_dir.join("history.csv"))?;
    let domain = TriangulatedDomain::new(width, height)?;

    let sparse_energy: Vec<f64> = (0..sparse.ncols())
        .map(|j| sparse.column(j).iter().map(|z| z.norm_sqr()).sum())
        .collect();
    let bijective_flags = |name: &str| -> Result<Vec<bool>> {
        let path = out_dir.join(name);
        if !path.exists() {
            return Ok(vec![false; sparse.ncols()]);
        }
        let maps = io::matrix_to_maps(io::read_matrix(&path)?.view());
        maps.iter()
            .map(|m| Ok(check_orientation(m, &domain)?.bijective))
            .collect::<qcdeform::Result<Vec<bool>>>()
            .map_err(Into::into)
    };
    let last = history.last().context("history.csv is empty")?;
    let report = PipelineReport {
        descriptor_kind: if descriptor.nrows() == domain.face_count() {
            DescriptorKind::Beltrami
        } else {
            DescriptorKind::Displacement
        },
        input_rank: rpca::numerical_rank(descriptor.view(), rank_tol),
        recovered_rank: last.rank,
        sparse_energy,
        convergence: ConvergenceSummary {
            iterations: history.len(),
            converged: last.residual < 1e-7,
            final_residual: last.residual,
            alpha: f64::NAN,
            beta_cap: 0,
        },
        low_rank_bijective: bijective_flags("lowrank_maps.cmx")?,
        sparse_bijective: bijective_flags("sparse_maps.cmx")?,
        timings: StageTimings::default(),
        rank_tolerance: rank_tol,
        clamped_entries: 0,
        conditioning_warnings: 0,
    };
    print!("{}", report.to_text());
    if let Some(labels) = labels {
        let labels = read_labels(labels)?;
        println!(
            "sparse energy fraction in labeled frames: {:.6}",
            report.sparse_energy_fraction(&labels)
        );
    }
    std::fs::write(out_dir.join("report.txt"), report.to_text())?;
    std::fs::write(out_dir.join("report.csv"), report.to_csv())?;
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_pipeline(
    dataset_spec: Option<&Path>,
    maps: Option<&Path>,
    reference: Option<&Path>,
    width: Option<usize>,
    height: Option<usize>,
    kind: &str,
    ref_frame: usize,
    seed: Option<u64>,
    admm: &AdmmArgs,
    out_dir: &Path,
) -> Result<()> {
    let kind = parse_kind(kind)?;
    let (domain, maps, reference_image, labels) = match (dataset_spec, maps) {
        (Some(spec_path), None) => {
            let mut spec = io::read_sequence_spec(spec_path)?;
            if let Some(seed) = seed {
                spec.seed = seed;
            }
            let data = generate_sequence(&spec).context("generating sequence")?;
            write_dataset(out_dir, &data)?;
            let reference = data.frames[ref_frame.min(data.frame_count() - 1)].clone();
            (data.domain, data.maps, reference, Some(data.perturbed))
        }
        (None, Some(maps_path)) => {
            let (width, height) = match (width, height) {
                (Some(w), Some(h)) => (w, h),
                _ => bail!("--maps input requires --width and --height"),
            };
            let reference =
                reference.context("--maps input requires --reference image")?;
            let matrix = io::read_matrix(maps_path)?;
            if matrix.nrows() != width * height {
                bail!(
                    "maps file has {} rows, a {width}x{height} grid has {} vertices",
                    matrix.nrows(),
                    width * height
                );
            }
            let domain = TriangulatedDomain::new(width, height)?;
            let maps = io::matrix_to_maps(matrix.view());
            let image = io::read_pgm(reference)?;
            (domain, maps, image, None)
        }
        _ => bail!("provide exactly one of --dataset-spec or --maps"),
    };

    let config = PipelineConfig {
        reference_frame: ref_frame,
        admm: admm.to_params(),
        descriptor_kind: kind,
        clamp: ClampPolicy::default(),
        out_dir: Some(out_dir.to_path_buf()),
        emit_history: true,
    };
    let output = run_pipeline(&maps, &domain, &reference_image, &config)?;
    print!("{}", output.report.to_text());
    if let Some(labels) = labels {
        println!(
            "sparse energy fraction in perturbed frames: {:.6}",
            output.report.sparse_energy_fraction(&labels)
        );
    }
    println!("artifacts in {}", out_dir.display());
    Ok(())
}
