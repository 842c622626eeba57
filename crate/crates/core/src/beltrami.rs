//! Beltrami coefficients and Wirtinger derivatives of piecewise-linear maps.
//!
//! For the affine restriction `(u, v) = (ax + by, cx + dy) + const` of a map
//! to one face, the Wirtinger derivatives are
//! `df/dz = ((a + d) + i (c - b)) / 2` and `df/dz~ = ((a - d) + i (c + b)) / 2`,
//! and the Beltrami coefficient is their ratio `mu = (df/dz~) / (df/dz)`.
//! `|mu| < 1` on every face is equivalent to the map preserving orientation.

use crate::mesh::{face_jacobians, PiecewiseLinearMap, TriangulatedDomain};
use crate::{Complex64, Error, Result};

/// Modulus below which the conformal part `df/dz` counts as vanishing.
pub const CONFORMAL_DENOMINATOR_TOLERANCE: f64 = 1e-14;

/// One complex Beltrami coefficient per face.
#[derive(Clone, Debug, PartialEq)]
pub struct BeltramiField {
    values: Vec<Complex64>,
}

impl BeltramiField {
    pub fn new(values: Vec<Complex64>) -> Self {
        Self { values }
    }

    pub fn zeros(domain: &TriangulatedDomain) -> Self {
        Self {
            values: vec![Complex64::new(0.0, 0.0); domain.face_count()],
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

    /// Largest coefficient modulus, 0 for an empty field.
    pub fn max_modulus(&self) -> f64 {
        self.values.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Admissible means `max |mu| < 1`: reconstructible to a bijection.
    pub fn is_admissible(&self) -> bool {
        self.max_modulus() < 1.0
    }

    /// First face with `|mu| >= 1`, if any.
    pub fn first_inadmissible(&self) -> Option<(usize, f64)> {
        self.values
            .iter()
            .enumerate()
            .find(|(_, z)| z.norm() >= 1.0)
            .map(|(i, z)| (i, z.norm()))
    }

    pub(crate) fn check_compatible(&self, domain: &TriangulatedDomain) -> Result<()> {
        if self.len() != domain.face_count() {
            return Err(Error::FaceCountMismatch {
                got: self.len(),
                expected: domain.face_count(),
            });
        }
        Ok(())
    }
}

/// Per-face Wirtinger derivatives `d1 = df/dz`, `d2 = df/dz~`.
#[derive(Clone, Debug)]
pub struct WirtingerPair {
    pub d1: Vec<Complex64>,
    pub d2: Vec<Complex64>,
}

/// Beltrami coefficient of `map` on every face.
///
/// Fails with the face index if the conformal part vanishes on some face
/// (degenerate or anticonformal there).
pub fn compute_beltrami(
    map: &PiecewiseLinearMap,
    domain: &TriangulatedDomain,
) -> Result<BeltramiField> {
    let jacobians = face_jacobians(map, domain)?;
    let mut values = Vec::with_capacity(jacobians.len());
    for (face, j) in jacobians.iter().enumerate() {
        let numer = Complex64::new(j.a - j.d, j.c + j.b);
        let denom = Complex64::new(j.a + j.d, j.c - j.b);
        if denom.norm() < CONFORMAL_DENOMINATOR_TOLERANCE {
            return Err(Error::ConformalitySingularity {
                face,
                modulus: denom.norm(),
            });
        }
        values.push(numer / denom);
    }
    Ok(BeltramiField::new(values))
}

/// Per-face `df/dz` and `df/dz~` of `map`.
pub fn wirtinger_derivatives(
    map: &PiecewiseLinearMap,
    domain: &TriangulatedDomain,
) -> Result<WirtingerPair> {
    let jacobians = face_jacobians(map, domain)?;
    let mut d1 = Vec::with_capacity(jacobians.len());
    let mut d2 = Vec::with_capacity(jacobians.len());
    for j in &jacobians {
        d1.push(Complex64::new(j.a + j.d, j.c - j.b) * 0.5);
        d2.push(Complex64::new(j.a - j.d, j.c + j.b) * 0.5);
    }
    Ok(WirtingerPair { d1, d2 })
}

/// Maximal dilation `K = (1 + max|mu|) / (1 - max|mu|)` of an admissible field.
pub fn max_dilation(field: &BeltramiField) -> Result<f64> {
    let sup = field.max_modulus();
    if sup >= 1.0 {
        return Err(Error::InadmissibleValue { modulus: sup });
    }
    Ok((1.0 + sup) / (1.0 - sup))
}

/// Directions and factors of extremal stretching encoded by one coefficient.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DistortionProfile {
    /// Angle of maximal magnification, `arg(mu) / 2`.
    pub angle_magnify: f64,
    /// Magnifying factor `1 + |mu|`.
    pub factor_magnify: f64,
    /// Angle of maximal shrinking, `(arg(mu) - pi) / 2`.
    pub angle_shrink: f64,
    /// Shrinking factor `1 - |mu|`.
    pub factor_shrink: f64,
}

/// Extremal distortion data of a single admissible coefficient.
pub fn distortion_profile(mu: Complex64) -> Result<DistortionProfile> {
    let modulus = mu.norm();
    if modulus >= 1.0 {
        return Err(Error::InadmissibleValue { modulus });
    }
    let arg = mu.arg();
    Ok(DistortionProfile {
        angle_magnify: arg / 2.0,
        factor_magnify: 1.0 + modulus,
        angle_shrink: (arg - std::f64::consts::PI) / 2.0,
        factor_shrink: 1.0 - modulus,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::check_orientation;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn map_from(domain: &TriangulatedDomain, f: impl Fn(Complex64) -> Complex64) -> PiecewiseLinearMap {
        PiecewiseLinearMap::new(domain.positions().iter().map(|&p| f(p)).collect())
    }

    #[test]
    fn identity_is_conformal() {
        let d = TriangulatedDomain::new(5, 4).unwrap();
        let mu = compute_beltrami(&PiecewiseLinearMap::identity(&d), &d).unwrap();
        assert!(mu.max_modulus() < 1e-15);
        assert!(mu.is_admissible());
    }

    #[test]
    fn stretch_map_has_constant_mu() {
        let d = TriangulatedDomain::new(5, 5).unwrap();
        // f(z) = z + 0.5 conj(z)
        let map = map_from(&d, |p| p + 0.5 * p.conj());
        let mu = compute_beltrami(&map, &d).unwrap();
        for z in mu.values() {
            assert!((z - Complex64::new(0.5, 0.0)).norm() < 1e-14);
        }
    }

    #[test]
    fn axis_stretch_gives_one_third() {
        let d = TriangulatedDomain::new(4, 5).unwrap();
        let map = map_from(&d, |p| Complex64::new(2.0 * p.re, p.im));
        let mu = compute_beltrami(&map, &d).unwrap();
        for z in mu.values() {
            assert!((z - Complex64::new(1.0 / 3.0, 0.0)).norm() < 1e-14);
        }
    }

    #[test]
    fn anticonformal_map_is_singular() {
        let d = TriangulatedDomain::new(3, 3).unwrap();
        let map = map_from(&d, |p| p.conj());
        assert!(matches!(
            compute_beltrami(&map, &d),
            Err(Error::ConformalitySingularity { .. })
        ));
    }

    #[test]
    fn wirtinger_of_identity_and_conjugation() {
        let d = TriangulatedDomain::new(4, 4).unwrap();
        let w = wirtinger_derivatives(&PiecewiseLinearMap::identity(&d), &d).unwrap();
        for f in 0..d.face_count() {
            assert!((w.d1[f] - 1.0).norm() < 1e-14);
            assert!(w.d2[f].norm() < 1e-14);
        }
        let conj = map_from(&d, |p| p.conj());
        let w = wirtinger_derivatives(&conj, &d).unwrap();
        for f in 0..d.face_count() {
            assert!(w.d1[f].norm() < 1e-14);
            assert!((w.d2[f] - 1.0).norm() < 1e-14);
        }
    }

    /// Random interior bump map for cross-checks.
    fn random_bump_map(domain: &TriangulatedDomain, rng: &mut ChaCha8Rng, scale: f64) -> PiecewiseLinearMap {
        let (w, h) = (domain.width() as f64 - 1.0, domain.height() as f64 - 1.0);
        let coeffs: Vec<(f64, f64, f64, f64)> =
            (0..3).map(|_| (rng.gen_range(-scale..scale), rng.gen_range(-scale..scale), rng.gen_range(1.0..2.5), rng.gen_range(1.0..2.5))).collect();
        PiecewiseLinearMap::new(
            domain
                .positions()
                .iter()
                .map(|&p| {
                    let mut z = p;
                    for &(cu, cv, fx, fy) in &coeffs {
                        let s = (PI * fx * p.re / w).sin() * (PI * fy * p.im / h).sin();
                        z += Complex64::new(cu * s, cv * s);
                    }
                    z
                })
                .collect(),
        )
    }

    #[test]
    fn wirtinger_ratio_matches_mu() {
        let d = TriangulatedDomain::new(12, 10).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let map = random_bump_map(&d, &mut rng, 0.4);
        let mu = compute_beltrami(&map, &d).unwrap();
        let w = wirtinger_derivatives(&map, &d).unwrap();
        for f in 0..d.face_count() {
            let ratio = w.d2[f] / w.d1[f];
            assert!((ratio - mu.values()[f]).norm() < 1e-12);
        }
    }

    #[test]
    fn conformal_composition_invariance() {
        let d = TriangulatedDomain::new(9, 9).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let map = random_bump_map(&d, &mut rng, 0.3);
        let mu = compute_beltrami(&map, &d).unwrap();
        let p = Complex64::new(1.3, -0.7);
        let q = Complex64::new(-4.0, 2.5);
        let composed = PiecewiseLinearMap::new(map.values().iter().map(|&z| p * z + q).collect());
        let mu2 = compute_beltrami(&composed, &d).unwrap();
        for f in 0..d.face_count() {
            assert!((mu.values()[f] - mu2.values()[f]).norm() < 1e-12);
        }
    }

    #[test]
    fn admissibility_matches_orientation() {
        let d = TriangulatedDomain::new(10, 8).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for round in 0..8 {
            let map = random_bump_map(&d, &mut rng, 0.15 + 0.25 * round as f64);
            let check = check_orientation(&map, &d).unwrap();
            match compute_beltrami(&map, &d) {
                Ok(mu) => {
                    for f in 0..d.face_count() {
                        assert_eq!(
                            mu.values()[f].norm() < 1.0,
                            check.determinants[f] > 0.0,
                            "face {f}: |mu| and det disagree"
                        );
                    }
                }
                Err(Error::ConformalitySingularity { .. }) => {} // fold so strong that df/dz ~ 0
                Err(e) => panic!("unexpected error {e}"),
            }
        }
    }

    #[test]
    fn dilation_values() {
        let d = TriangulatedDomain::new(3, 3).unwrap();
        assert_eq!(max_dilation(&BeltramiField::zeros(&d)).unwrap(), 1.0);
        let third = BeltramiField::new(vec![Complex64::new(1.0 / 3.0, 0.0); d.face_count()]);
        assert!((max_dilation(&third).unwrap() - 2.0).abs() < 1e-14);
        let half = BeltramiField::new(vec![Complex64::new(0.0, 0.5); d.face_count()]);
        assert!((max_dilation(&half).unwrap() - 3.0).abs() < 1e-14);
        let bad = BeltramiField::new(vec![Complex64::new(1.0, 0.0)]);
        assert!(matches!(max_dilation(&bad), Err(Error::InadmissibleValue { .. })));
    }

    #[test]
    fn distortion_profiles() {
        let p = distortion_profile(Complex64::new(0.0, 0.0)).unwrap();
        assert_eq!((p.factor_magnify, p.factor_shrink), (1.0, 1.0));
        assert_eq!(p.angle_magnify, 0.0);
        assert!((p.angle_shrink + PI / 2.0).abs() < 1e-15);

        let p = distortion_profile(Complex64::new(0.5, 0.0)).unwrap();
        assert_eq!(p.angle_magnify, 0.0);
        assert!((p.factor_magnify - 1.5).abs() < 1e-15);
        assert!((p.angle_shrink + PI / 2.0).abs() < 1e-15);
        assert!((p.factor_shrink - 0.5).abs() < 1e-15);

        let p = distortion_profile(Complex64::new(0.0, 0.3)).unwrap();
        assert!((p.angle_magnify - PI / 4.0).abs() < 1e-15);
        assert!((p.factor_magnify - 1.3).abs() < 1e-15);
        assert!((p.angle_shrink + PI / 4.0).abs() < 1e-15);
        assert!((p.factor_shrink - 0.7).abs() < 1e-15);

        assert!(matches!(
            distortion_profile(Complex64::new(0.8, 0.8)),
            Err(Error::InadmissibleValue { .. })
        ));
    }
}
