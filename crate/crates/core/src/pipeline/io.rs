//! On-disk formats: CMX1 complex matrices, binary PGM frames, the ADMM
//! history CSV, and the flat key = value sequence spec.
//!
//! CMX1 layout: magic `CMX1`, rows and cols as little-endian u64, then
//! `rows * cols` entries in column-major order, each entry two little-endian
//! f64 (real, imaginary). Read-after-write is bit exact.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use ndarray::prelude::*;

use crate::mesh::PiecewiseLinearMap;
use crate::pipeline::{Image, PipelineConfig, PipelineOutput};
use crate::rpca::IterationRecord;
use crate::synth::{BumpSpec, SequenceSpec};
use crate::{Complex64, Error, Result};

const CMX_MAGIC: &[u8; 4] = b"CMX1";

fn malformed(path: &Path, detail: impl Into<String>) -> Error {
    Error::MalformedFile {
        path: path.display().to_string(),
        detail: detail.into(),
    }
}

pub fn write_matrix(path: &Path, m: ArrayView2<Complex64>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(CMX_MAGIC)?;
    w.write_all(&(m.nrows() as u64).to_le_bytes())?;
    w.write_all(&(m.ncols() as u64).to_le_bytes())?;
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            let z = m[[i, j]];
            w.write_all(&z.re.to_le_bytes())?;
            w.write_all(&z.im.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_matrix(path: &Path) -> Result<Array2<Complex64>> {
    let mut r = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)
        .map_err(|_| malformed(path, "file shorter than the CMX1 header"))?;
    if &magic != CMX_MAGIC {
        return Err(malformed(path, format!("bad magic {magic:?}")));
    }
    let mut u64buf = [0u8; 8];
    r.read_exact(&mut u64buf)
        .map_err(|_| malformed(path, "truncated row count"))?;
    let rows = u64::from_le_bytes(u64buf);
    r.read_exact(&mut u64buf)
        .map_err(|_| malformed(path, "truncated column count"))?;
    let cols = u64::from_le_bytes(u64buf);
    let (rows, cols): (usize, usize) = (
        rows.try_into()
            .map_err(|_| malformed(path, "row count overflows usize"))?,
        cols.try_into()
            .map_err(|_| malformed(path, "column count overflows usize"))?,
    );
    let entries = rows
        .checked_mul(cols)
        .ok_or_else(|| malformed(path, "entry count overflows usize"))?;

    let mut m = Array2::zeros((rows, cols));
    let mut f64buf = [0u8; 16];
    for j in 0..cols {
        for i in 0..rows {
            r.read_exact(&mut f64buf).map_err(|_| {
                malformed(path, format!("truncated at entry ({i},{j}) of {entries}"))
            })?;
            let re = f64::from_le_bytes(f64buf[..8].try_into().unwrap());
            let im = f64::from_le_bytes(f64buf[8..].try_into().unwrap());
            m[[i, j]] = Complex64::new(re, im);
        }
    }
    let mut rest = [0u8; 1];
    if r.read(&mut rest)? != 0 {
        return Err(malformed(path, "trailing bytes after the matrix payload"));
    }
    Ok(m)
}

/// Binary PGM (P5), 8-bit, top row first on disk.
pub fn write_pgm(path: &Path, image: &Image) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write!(w, "P5\n{} {}\n255\n", image.width(), image.height())?;
    for y in (0..image.height()).rev() {
        let row = &image.data()[y * image.width()..(y + 1) * image.width()];
        w.write_all(row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_pgm(path: &Path) -> Result<Image> {
    let mut bytes = Vec::new();
    File::open(path)?.read_to_end(&mut bytes)?;

    // header: three whitespace-separated tokens after the magic, with
    // optional '#' comment lines
    let mut pos = 0usize;
    let mut token = |bytes: &[u8]| -> Result<String> {
        while pos < bytes.len() {
            match bytes[pos] {
                b' ' | b'\t' | b'\r' | b'\n' => pos += 1,
                b'#' => {
                    while pos < bytes.len() && bytes[pos] != b'\n' {
                        pos += 1;
                    }
                }
                _ => break,
            }
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(malformed(path, "truncated PGM header"));
        }
        Ok(String::from_utf8_lossy(&bytes[start..pos]).into_owned())
    };

    if token(&bytes)? != "P5" {
        return Err(malformed(path, "not a binary PGM (magic must be P5)"));
    }
    let width: usize = token(&bytes)?
        .parse()
        .map_err(|_| malformed(path, "unparsable width"))?;
    let height: usize = token(&bytes)?
        .parse()
        .map_err(|_| malformed(path, "unparsable height"))?;
    let maxval: usize = token(&bytes)?
        .parse()
        .map_err(|_| malformed(path, "unparsable maxval"))?;
    if maxval != 255 {
        return Err(malformed(path, format!("maxval must be 255, got {maxval}")));
    }
    pos += 1; // single whitespace byte after maxval
    let expected = width
        .checked_mul(height)
        .ok_or_else(|| malformed(path, "image size overflows usize"))?;
    if bytes.len() < pos || bytes.len() - pos != expected {
        return Err(malformed(
            path,
            format!("payload holds {} bytes, expected {expected}", bytes.len().saturating_sub(pos)),
        ));
    }
    let mut data = vec![0u8; expected];
    for y in 0..height {
        let src = &bytes[pos + y * width..pos + (y + 1) * width];
        let dst_row = height - 1 - y;
        data[dst_row * width..(dst_row + 1) * width].copy_from_slice(src);
    }
    Image::new(width, height, data)
}

/// `iter,residual,rank,nnz,beta,amax`, one row per ADMM iteration.
pub fn write_history(path: &Path, history: &[IterationRecord]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "iter,residual,rank,nnz,beta,amax")?;
    for rec in history {
        writeln!(
            w,
            "{},{:.17e},{},{},{:.17e},{:.17e}",
            rec.iteration, rec.residual, rec.rank, rec.nonzeros, rec.beta, rec.max_sparse_modulus
        )?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_history(path: &Path) -> Result<Vec<IterationRecord>> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines();
    match lines.next() {
        Some("iter,residual,rank,nnz,beta,amax") => {}
        _ => return Err(malformed(path, "missing history header")),
    }
    let mut out = Vec::new();
    for (n, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 6 {
            return Err(malformed(path, format!("row {n} has {} fields", fields.len())));
        }
        let parse_err = |what: &str| malformed(path, format!("row {n}: unparsable {what}"));
        out.push(IterationRecord {
            iteration: fields[0].parse().map_err(|_| parse_err("iter"))?,
            residual: fields[1].parse().map_err(|_| parse_err("residual"))?,
            rank: fields[2].parse().map_err(|_| parse_err("rank"))?,
            nonzeros: fields[3].parse().map_err(|_| parse_err("nnz"))?,
            beta: fields[4].parse().map_err(|_| parse_err("beta"))?,
            max_sparse_modulus: fields[5].parse().map_err(|_| parse_err("amax"))?,
        });
    }
    Ok(out)
}

/// Stack maps as a `|V| x t` matrix, one complex value `u + iv` per vertex.
pub fn maps_to_matrix(maps: &[PiecewiseLinearMap]) -> Result<Array2<Complex64>> {
    let rows = maps.first().map(|m| m.len()).unwrap_or(0);
    if maps.iter().any(|m| m.len() != rows) {
        return Err(Error::ShapeMismatch(
            "maps of differing vertex counts cannot share a matrix".into(),
        ));
    }
    let mut out = Array2::zeros((rows, maps.len()));
    for (j, map) in maps.iter().enumerate() {
        for (i, &z) in map.values().iter().enumerate() {
            out[[i, j]] = z;
        }
    }
    Ok(out)
}

pub fn matrix_to_maps(m: ArrayView2<Complex64>) -> Vec<PiecewiseLinearMap> {
    (0..m.ncols())
        .map(|j| PiecewiseLinearMap::new(m.column(j).to_vec()))
        .collect()
}

/// Flat `key = value` sequence spec, `#` comments allowed.
pub fn write_sequence_spec(path: &Path, spec: &SequenceSpec) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "width = {}", spec.width)?;
    writeln!(w, "height = {}", spec.height)?;
    writeln!(w, "cycle_length = {}", spec.cycle_len)?;
    writeln!(w, "cycles = {}", spec.cycles)?;
    writeln!(w, "base_radius = {}", spec.base_radius)?;
    writeln!(w, "amplitude = {}", spec.amplitude)?;
    let cycles: Vec<String> = spec.perturbed_cycles.iter().map(|c| c.to_string()).collect();
    writeln!(w, "perturbed_cycles = {}", cycles.join(","))?;
    writeln!(w, "bump_angle = {}", spec.bump.center_angle)?;
    writeln!(w, "bump_width = {}", spec.bump.angular_width)?;
    writeln!(w, "bump_amplitude = {}", spec.bump.amplitude)?;
    writeln!(w, "bump_frames = {}..{}", spec.bump.frames.start, spec.bump.frames.end)?;
    writeln!(w, "seed = {}", spec.seed)?;
    w.flush()?;
    Ok(())
}

pub fn read_sequence_spec(path: &Path) -> Result<SequenceSpec> {
    let text = std::fs::read_to_string(path)?;
    let mut spec = SequenceSpec {
        width: 0,
        height: 0,
        cycle_len: 0,
        cycles: 0,
        base_radius: 0.0,
        amplitude: 0.0,
        perturbed_cycles: Vec::new(),
        bump: BumpSpec {
            center_angle: 0.0,
            angular_width: 1.0,
            amplitude: 0.0,
            frames: 0..0,
        },
        seed: 0,
    };
    let mut seen = std::collections::BTreeSet::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            Error::InvalidSpec(format!("line {}: expected key = value, got {raw:?}", n + 1))
        })?;
        let (key, value) = (key.trim(), value.trim());
        let bad = |what: &str| Error::InvalidSpec(format!("line {}: bad {what}: {value:?}", n + 1));
        match key {
            "width" => spec.width = value.parse().map_err(|_| bad("width"))?,
            "height" => spec.height = value.parse().map_err(|_| bad("height"))?,
            "cycle_length" => spec.cycle_len = value.parse().map_err(|_| bad("cycle_length"))?,
            "cycles" => spec.cycles = value.parse().map_err(|_| bad("cycles"))?,
            "base_radius" => spec.base_radius = value.parse().map_err(|_| bad("base_radius"))?,
            "amplitude" => spec.amplitude = value.parse().map_err(|_| bad("amplitude"))?,
            "perturbed_cycles" => {
                spec.perturbed_cycles = if value.is_empty() {
                    Vec::new()
                } else {
                    value
                        .split(',')
                        .map(|t| t.trim().parse().map_err(|_| bad("perturbed_cycles")))
                        .collect::<Result<_>>()?
                };
            }
            "bump_angle" => spec.bump.center_angle = value.parse().map_err(|_| bad("bump_angle"))?,
            "bump_width" => {
                spec.bump.angular_width = value.parse().map_err(|_| bad("bump_width"))?
            }
            "bump_amplitude" => {
                spec.bump.amplitude = value.parse().map_err(|_| bad("bump_amplitude"))?
            }
            "bump_frames" => {
                let (a, b) = value
                    .split_once("..")
                    .ok_or_else(|| bad("bump_frames (want start..end)"))?;
                spec.bump.frames = a.trim().parse().map_err(|_| bad("bump_frames"))?
                    ..b.trim().parse().map_err(|_| bad("bump_frames"))?;
            }
            "seed" => spec.seed = value.parse().map_err(|_| bad("seed"))?,
            other => {
                return Err(Error::InvalidSpec(format!(
                    "line {}: unknown key {other:?}",
                    n + 1
                )))
            }
        }
        seen.insert(key.to_string());
    }
    for required in [
        "width",
        "height",
        "cycle_length",
        "cycles",
        "base_radius",
        "amplitude",
    ] {
        if !seen.contains(required) {
            return Err(Error::InvalidSpec(format!("missing key {required}")));
        }
    }
    Ok(spec)
}

/// Zero-padded frame filename, e.g. `frame_0042.pgm`.
pub fn frame_name(index: usize) -> String {
    format!("frame_{index:04}.pgm")
}

pub(crate) fn write_pipeline_artifacts(
    dir: &Path,
    output: &PipelineOutput,
    config: &PipelineConfig,
) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    write_matrix(&dir.join("descriptor.cmx"), output.descriptor.view())?;
    write_matrix(&dir.join("lowrank.cmx"), output.decomposition.low_rank.view())?;
    write_matrix(&dir.join("sparse.cmx"), output.decomposition.sparse.view())?;
    write_matrix(
        &dir.join("lowrank_maps.cmx"),
        maps_to_matrix(&output.low_rank_maps)?.view(),
    )?;
    write_matrix(
        &dir.join("sparse_maps.cmx"),
        maps_to_matrix(&output.sparse_maps)?.view(),
    )?;
    for (sub, frames) in [
        ("lowrank_frames", &output.low_rank_frames),
        ("sparse_frames", &output.sparse_frames),
    ] {
        let subdir = dir.join(sub);
        std::fs::create_dir_all(&subdir)?;
        for (k, frame) in frames.iter().enumerate() {
            write_pgm(&subdir.join(frame_name(k)), frame)?;
        }
    }
    if config.emit_history {
        write_history(&dir.join("history.csv"), &output.decomposition.history)?;
    }
    std::fs::write(dir.join("report.txt"), output.report.to_text())?;
    std::fs::write(dir.join("report.csv"), output.report.to_csv())?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use tempfile::tempdir;

    #[test]
    fn cmx_roundtrip_is_bitwise() {
        let dir = tempdir().unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for case in 0..20 {
            let rows = rng.gen_range(0..9);
            let cols = if rows == 0 { 0 } else { rng.gen_range(0..7) };
            let m = Array2::from_shape_fn((rows, cols), |_| {
                Complex64::new(
                    f64::from_bits(rng.gen::<u64>() & 0x7fef_ffff_ffff_ffff),
                    rng.gen_range(-1e300..1e300),
                )
            });
            let path = dir.path().join(format!("m{case}.cmx"));
            write_matrix(&path, m.view()).unwrap();
            let back = read_matrix(&path).unwrap();
            assert_eq!(back.dim(), m.dim());
            for (a, b) in m.iter().zip(back.iter()) {
                assert_eq!(a.re.to_bits(), b.re.to_bits());
                assert_eq!(a.im.to_bits(), b.im.to_bits());
            }
        }
    }

    #[test]
    fn cmx_rejects_malformed_files() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("m.cmx");
        let m = Array2::from_elem((3, 2), Complex64::new(1.0, -2.0));
        write_matrix(&path, m.view()).unwrap();

        // wrong magic
        let mut bytes = std::fs::read(&path).unwrap();
        bytes[0] = b'X';
        let bad = dir.path().join("bad_magic.cmx");
        std::fs::write(&bad, &bytes).unwrap();
        assert!(matches!(read_matrix(&bad), Err(Error::MalformedFile { .. })));

        // truncation
        let good = std::fs::read(&path).unwrap();
        let trunc = dir.path().join("trunc.cmx");
        std::fs::write(&trunc, &good[..good.len() - 5]).unwrap();
        assert!(matches!(read_matrix(&trunc), Err(Error::MalformedFile { .. })));

        // trailing garbage
        let mut padded = good.clone();
        padded.push(0);
        let pad = dir.path().join("pad.cmx");
        std::fs::write(&pad, &padded).unwrap();
        assert!(matches!(read_matrix(&pad), Err(Error::MalformedFile { .. })));
    }

    #[test]
    fn empty_matrix_is_header_only() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("empty.cmx");
        let m: Array2<Complex64> = Array2::zeros((0, 0));
        write_matrix(&path, m.view()).unwrap();
        assert_eq!(std::fs::metadata(&path).unwrap().len(), 20);
        assert_eq!(read_matrix(&path).unwrap().dim(), (0, 0));
    }

    #[test]
    fn pgm_roundtrip_and_rejection() {
        let dir = tempdir().unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for case in 0..10 {
            let (w, h) = (rng.gen_range(1..24), rng.gen_range(1..24));
            let data: Vec<u8> = (0..w * h).map(|_| rng.gen()).collect();
            let img = Image::new(w, h, data).unwrap();
            let path = dir.path().join(format!("f{case}.pgm"));
            write_pgm(&path, &img).unwrap();
            assert_eq!(read_pgm(&path).unwrap(), img);
        }

        let bad = dir.path().join("bad.pgm");
        std::fs::write(&bad, b"P6\n2 2\n255\nxxxx").unwrap();
        assert!(matches!(read_pgm(&bad), Err(Error::MalformedFile { .. })));
        std::fs::write(&bad, b"P5\n2 2\n255\nxxx").unwrap();
        assert!(matches!(read_pgm(&bad), Err(Error::MalformedFile { .. })));
        std::fs::write(&bad, b"P5\n2 2\n64\nxxxx").unwrap();
        assert!(matches!(read_pgm(&bad), Err(Error::MalformedFile { .. })));
    }

    #[test]
    fn history_roundtrip() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("history.csv");
        let history = vec![
            IterationRecord {
                iteration: 0,
                residual: 0.12345678901234568,
                rank: 7,
                nonzeros: 42,
                beta: 1.25,
                max_sparse_modulus: 0.5,
            },
            IterationRecord {
                iteration: 1,
                residual: 1e-9,
                rank: 3,
                nonzeros: 0,
                beta: 1.875,
                max_sparse_modulus: 0.0,
            },
        ];
        write_history(&path, &history).unwrap();
        let back = read_history(&path).unwrap();
        assert_eq!(back.len(), 2);
        for (a, b) in history.iter().zip(&back) {
            assert_eq!(a.iteration, b.iteration);
            assert_eq!(a.rank, b.rank);
            assert_eq!(a.nonzeros, b.nonzeros);
            assert_eq!(a.residual.to_bits(), b.residual.to_bits());
            assert_eq!(a.beta.to_bits(), b.beta.to_bits());
        }
        std::fs::write(&path, "nope\n1,2,3,4,5,6\n").unwrap();
        assert!(read_history(&path).is_err());
    }

    #[test]
    fn sequence_spec_roundtrip() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("circle.spec");
        let spec = SequenceSpec::desk(7);
        write_sequence_spec(&path, &spec).unwrap();
        let back = read_sequence_spec(&path).unwrap();
        assert_eq!(back, spec);

        std::fs::write(&path, "width = 64\nheight = 64\nwat = 1\n").unwrap();
        assert!(matches!(read_sequence_spec(&path), Err(Error::InvalidSpec(_))));
        std::fs::write(&path, "width = 64\n").unwrap();
        assert!(matches!(read_sequence_spec(&path), Err(Error::InvalidSpec(_))));
    }

    #[test]
    fn maps_matrix_roundtrip() {
        use crate::mesh::TriangulatedDomain;
        let domain = TriangulatedDomain::new(5, 4).unwrap();
        let maps = vec![
            PiecewiseLinearMap::identity(&domain),
            PiecewiseLinearMap::new(
                domain
                    .positions()
                    .iter()
                    .map(|p| p * Complex64::new(1.1, 0.02))
                    .collect(),
            ),
        ];
        let m = maps_to_matrix(&maps).unwrap();
        assert_eq!(m.dim(), (20, 2));
        let back = matrix_to_maps(m.view());
        assert_eq!(back, maps);
    }
}
