//! Shared generators for the integration suites. Deliberately independent
//! of the library's internals: maps are synthesized from explicit closed
//! forms so they can serve as oracles.

// each test target uses its own subset
#![allow(dead_code)]

use ndarray::Array2;
use qcdeform::beltrami::{compute_beltrami, BeltramiField};
use qcdeform::mesh::{PiecewiseLinearMap, TriangulatedDomain};
use qcdeform::Complex64;
use rand::Rng;
use std::f64::consts::PI;

pub fn sup_distance(a: &PiecewiseLinearMap, b: &PiecewiseLinearMap) -> f64 {
    a.values()
        .iter()
        .zip(b.values())
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

pub fn sup_value(map: &PiecewiseLinearMap) -> f64 {
    map.values().iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Random boundary-fixing smooth map built from integer sine modes, rescaled
/// until its Beltrami field has `max |mu| <= target`.
pub fn random_admissible_map(
    domain: &TriangulatedDomain,
    rng: &mut impl Rng,
    target: f64,
) -> PiecewiseLinearMap {
    let (w, h) = (domain.width() as f64 - 1.0, domain.height() as f64 - 1.0);
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
            modes
                .iter()
                .map(|&(coef, kx, ky)| {
                    coef * (PI * kx as f64 * p.re / w).sin() * (PI * ky as f64 * p.im / h).sin()
                })
                .sum()
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

/// A consistent admissible field: the Beltrami field of a random admissible
/// deformation, rescaled in map space until `max |mu|` lies in
/// `[0.8 * target, target]`.
pub fn random_consistent_field(
    domain: &TriangulatedDomain,
    rng: &mut impl Rng,
    target: f64,
) -> BeltramiField {
    let map = random_admissible_map(domain, rng, target);
    compute_beltrami(&map, domain).expect("admissible map has a field")
}

pub fn random_complex_matrix(rng: &mut impl Rng, rows: usize, cols: usize) -> Array2<Complex64> {
    Array2::from_shape_fn((rows, cols), |_| {
        Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
    })
}
