//! Shared generators for unit tests.

use crate::beltrami::{compute_beltrami, BeltramiField};
use crate::mesh::{PiecewiseLinearMap, TriangulatedDomain};
use crate::Complex64;
use rand::Rng;
use std::f64::consts::PI;

/// Sup distance between two maps over all vertices.
pub fn sup_distance(a: &PiecewiseLinearMap, b: &PiecewiseLinearMap) -> f64 {
    a.values()
        .iter()
        .zip(b.values())
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

/// Random smooth boundary-fixing map with `max |mu| <= target`, built from
/// integer sine modes (exactly zero displacement on the border) and rescaled
/// until admissible with margin.
pub fn random_admissible_map(
    domain: &TriangulatedDomain,
    rng: &mut impl Rng,
    target: f64,
) -> PiecewiseLinearMap {
    let (w, h) = (
        domain.width() as f64 - 1.0,
        domain.height() as f64 - 1.0,
    );
    let modes: Vec<(Complex64, u32, u32)> = (0..4)
        .map(|_| {
            (
                Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)),
                rng.gen_range(1..4),
                rng.gen_range(1..4),
            )
        })
        .collect();
    let displacement: Vec<Complex64> = domain
        .positions()
        .iter()
        .map(|p| {
            let mut dz = Complex64::new(0.0, 0.0);
            for &(coef, kx, ky) in &modes {
                dz += coef
                    * (PI * kx as f64 * p.re / w).sin()
                    * (PI * ky as f64 * p.im / h).sin();
            }
            dz
        })
        .collect();

    let mut scale = 1.0;
    loop {
        let map = PiecewiseLinearMap::new(
            domain
                .positions()
                .iter()
                .zip(&displacement)
                .map(|(&p, &dz)| p + scale * dz)
                .collect(),
        );
        match compute_beltrami(&map, domain) {
            Ok(mu) if mu.max_modulus() <= target => return map,
            _ => scale *= 0.7,
        }
    }
}

/// Random smooth admissible field with `max |mu|` equal to `target`.
pub fn random_smooth_field(
    domain: &TriangulatedDomain,
    rng: &mut impl Rng,
    target: f64,
) -> BeltramiField {
    let (w, h) = (
        domain.width() as f64 - 1.0,
        domain.height() as f64 - 1.0,
    );
    let modes: Vec<(Complex64, f64, f64, f64)> = (0..5)
        .map(|_| {
            (
                Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)),
                rng.gen_range(0.5..3.0),
                rng.gen_range(0.5..3.0),
                rng.gen_range(0.0..2.0 * PI),
            )
        })
        .collect();
    let mut values: Vec<Complex64> = (0..domain.face_count())
        .map(|f| {
            let verts = domain.face(f);
            let c = (domain.position(verts[0])
                + domain.position(verts[1])
                + domain.position(verts[2]))
                / 3.0;
            let mut z = Complex64::new(0.0, 0.0);
            for &(coef, fx, fy, phase) in &modes {
                z += coef * ((PI * fx * c.re / w + phase).sin() * (PI * fy * c.im / h).cos());
            }
            z
        })
        .collect();
    let max = values.iter().map(|z| z.norm()).fold(0.0, f64::max);
    if max > 0.0 {
        let s = target / max;
        for z in &mut values {
            *z *= s;
        }
    }
    BeltramiField::new(values)
}
