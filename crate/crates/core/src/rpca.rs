//! Complex robust principal component analysis via ADMM.
//!
//! Splits a complex matrix `L` into `N + A` where `N` has small nuclear norm
//! and `A` is entrywise sparse, by alternating singular value thresholding,
//! complex magnitude shrinkage, and a multiplier update. The penalty grows
//! geometrically by 1.5 per iteration and saturates after `beta_cap` steps;
//! the saturation bounds the sparse iterates, which is what keeps the
//! reconstructed irregular deformations bijective downstream.

use ndarray::prelude::*;
use ndarray::Zip;
use ndarray_linalg::{JobSvd, SVDDC};

use crate::{Complex64, Error, Result};

/// Tuning knobs of the ADMM decomposition.
#[derive(Clone, Copy, Debug)]
pub struct AdmmParams {
    /// Sparsity weight. `None` resolves to `1 / sqrt(max(rows, cols))`.
    pub alpha: Option<f64>,
    /// Penalty cap exponent: the schedule saturates at `1.5^beta_cap`.
    pub beta_cap: u32,
    /// Relative Frobenius residual below which the split counts as converged.
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Relative singular value cutoff used when reporting ranks.
    pub rank_tolerance: f64,
}

impl Default for AdmmParams {
    fn default() -> Self {
        Self {
            alpha: None,
            beta_cap: 26,
            tolerance: 1e-7,
            max_iterations: 500,
            rank_tolerance: 1e-8,
        }
    }
}

impl AdmmParams {
    pub fn resolve_alpha(&self, rows: usize, cols: usize) -> f64 {
        self.alpha
            .unwrap_or_else(|| 1.0 / (rows.max(cols) as f64).sqrt())
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(alpha) = self.alpha {
            if alpha <= 0.0 || alpha.is_nan() {
                return Err(Error::InvalidParameter(format!("alpha must be > 0, got {alpha}")));
            }
        }
        if self.beta_cap < 1 {
            return Err(Error::InvalidParameter("beta_cap must be >= 1".into()));
        }
        if self.tolerance <= 0.0 || self.tolerance.is_nan() {
            return Err(Error::InvalidParameter("tolerance must be > 0".into()));
        }
        if self.rank_tolerance <= 0.0 || self.rank_tolerance.is_nan() {
            return Err(Error::InvalidParameter("rank_tolerance must be > 0".into()));
        }
        Ok(())
    }
}

/// One row of the convergence history.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IterationRecord {
    pub iteration: usize,
    /// `|L - N - A|_F / |L|_F` after the iteration.
    pub residual: f64,
    /// Rank retained by the SVT step of this iteration.
    pub rank: usize,
    /// Exact count of nonzero sparse entries after shrinkage.
    pub nonzeros: usize,
    pub beta: f64,
    /// Largest sparse entry modulus; stays below 1 under a proper alpha.
    pub max_sparse_modulus: f64,
}

/// Outcome of [`decompose`].
#[derive(Clone, Debug)]
pub struct DecompositionResult {
    pub low_rank: Array2<Complex64>,
    pub sparse: Array2<Complex64>,
    /// Lagrange multiplier at termination.
    pub multiplier: Array2<Complex64>,
    pub history: Vec<IterationRecord>,
    /// Rank retained by the final SVT step.
    pub rank: usize,
    pub iterations: usize,
    pub converged: bool,
    /// The sparsity weight actually used.
    pub alpha: f64,
}

pub fn frobenius_norm(m: ArrayView2<Complex64>) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn max_modulus(m: ArrayView2<Complex64>) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Largest singular value; 0 for an empty or zero matrix.
pub fn spectral_norm(m: ArrayView2<Complex64>) -> f64 {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0.0;
    }
    let (_, s, _) = m
        .svddc(JobSvd::None)
        .expect("SVD of a finite matrix cannot fail");
    s.first().copied().unwrap_or(0.0)
}

/// Singular value soft-thresholding: `U max(S - tau, 0) V^H` and the retained rank.
pub fn complex_svt(m: ArrayView2<Complex64>, tau: f64) -> (Array2<Complex64>, usize) {
    if m.nrows() == 0 || m.ncols() == 0 {
        return (m.to_owned(), 0);
    }
    let (u, s, vt) = m
        .svddc(JobSvd::Some)
        .expect("SVD of a finite matrix cannot fail");
    let u = u.expect("left vectors requested");
    let vt = vt.expect("right vectors requested");
    let kept = s.iter().take_while(|&&sigma| sigma > tau).count();
    if kept == 0 {
        return (Array2::zeros(m.dim()), 0);
    }
    // scale the kept left vectors by the shrunk singular values, then multiply
    let mut scaled = u.slice(s![.., ..kept]).to_owned();
    for (r, mut col) in scaled.columns_mut().into_iter().enumerate() {
        let factor = Complex64::new(s[r] - tau, 0.0);
        col.map_inplace(|z| *z *= factor);
    }
    (scaled.dot(&vt.slice(s![..kept, ..])), kept)
}

/// Entrywise complex magnitude shrinkage `z -> max(1 - tau/|z|, 0) z`.
pub fn complex_shrink(m: ArrayView2<Complex64>, tau: f64) -> Array2<Complex64> {
    m.mapv(|z| {
        let n = z.norm();
        if n <= tau {
            Complex64::new(0.0, 0.0)
        } else {
            z * ((n - tau) / n)
        }
    })
}

/// Penalty at iteration `k`: `min(1.5^k, 1.5^cap) * 1.25 / |L|_2`.
pub fn beta_schedule(k: usize, cap: u32, spectral_norm_l: f64) -> Result<f64> {
    if spectral_norm_l <= 0.0 || spectral_norm_l.is_nan() {
        return Err(Error::DegenerateInput(format!(
            "beta schedule needs a positive spectral norm, got {spectral_norm_l}"
        )));
    }
    let exponent = (k as u32).min(cap) as i32;
    Ok(1.5f64.powi(exponent) * 1.25 / spectral_norm_l)
}

/// Lower bound on `alpha` that keeps every sparse iterate entrywise inside
/// the unit disk, given R-linear residual decay constants `(p, q)`.
pub fn alpha_floor(l: ArrayView2<Complex64>, p: f64, q: f64, cap: u32) -> Result<f64> {
    if p < 0.0 || p.is_nan() {
        return Err(Error::InvalidParameter(format!("p must be >= 0, got {p}")));
    }
    if q <= 0.0 || q >= 1.0 || q.is_nan() {
        return Err(Error::InvalidParameter(format!("q must lie in (0, 1), got {q}")));
    }
    let sup = max_modulus(l);
    if sup >= 1.0 {
        return Err(Error::InadmissibleValue { modulus: sup });
    }
    let norm2 = spectral_norm(l);
    if norm2 <= 0.0 {
        return Err(Error::DegenerateInput("alpha floor of a zero matrix".into()));
    }
    let ratio = 1.5 * q;
    // geometric sum over the pre-saturation iterations; ratio 1 degenerates
    // to the count itself
    let geometric = if (ratio - 1.0).abs() < 1e-12 {
        cap as f64
    } else {
        (1.0 - ratio.powi(cap as i32)) / (1.0 - ratio)
    };
    let beta_saturated = 1.5f64.powi(cap as i32) * 1.25 / norm2;
    Ok(sup / norm2
        + (1.25 * p / norm2) * geometric
        + beta_saturated * p * q.powi(cap as i32) / (1.0 - q))
}

/// Count of singular values above `rel_tol` times the largest.
pub fn numerical_rank(m: ArrayView2<Complex64>, rel_tol: f64) -> usize {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0;
    }
    let (_, s, _) = m
        .svddc(JobSvd::None)
        .expect("SVD of a finite matrix cannot fail");
    let top = s.first().copied().unwrap_or(0.0);
    if top <= 0.0 {
        return 0;
    }
    s.iter().filter(|&&sigma| sigma > rel_tol * top).count()
}

/// Decompose `L = N + A` by ADMM.
///
/// Non-convergence within the iteration budget is reported through the
/// `converged` flag, not as an error; NaN or infinity in the iterates is.
pub fn decompose(l: &Array2<Complex64>, params: &AdmmParams) -> Result<DecompositionResult> {
    params.validate()?;
    if l.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::NumericalFailure {
            iteration: 0,
            detail: "input matrix contains non-finite entries".into(),
        });
    }
    let norm2 = spectral_norm(l.view());
    if norm2 <= 0.0 {
        return Err(Error::DegenerateInput(
            "cannot decompose a zero or empty matrix".into(),
        ));
    }
    let norm_f = frobenius_norm(l.view());
    let alpha = params.resolve_alpha(l.nrows(), l.ncols());

    let mut low_rank: Array2<Complex64> = Array2::zeros(l.dim());
    let mut sparse: Array2<Complex64> = Array2::zeros(l.dim());
    let mut multiplier = l.mapv(|z| z / norm2);
    let mut work: Array2<Complex64> = Array2::zeros(l.dim());
    let mut history = Vec::new();
    let mut converged = false;
    let mut rank = 0usize;

    for k in 0..params.max_iterations {
        let beta = beta_schedule(k, params.beta_cap, norm2)?;

        // N-update: SVT of L - A + Z/beta at threshold 1/beta
        Zip::from(&mut work)
            .and(l)
            .and(&sparse)
            .and(&multiplier)
            .for_each(|w, &lv, &av, &zv| *w = lv - av + zv / beta);
        let (n_new, kept) = complex_svt(work.view(), 1.0 / beta);
        low_rank = n_new;
        rank = kept;

        // A-update: shrink L - N + Z/beta at threshold alpha/beta
        Zip::from(&mut work)
            .and(l)
            .and(&low_rank)
            .and(&multiplier)
            .for_each(|w, &lv, &nv, &zv| *w = lv - nv + zv / beta);
        sparse = complex_shrink(work.view(), alpha / beta);

        // multiplier update and residual in one sweep
        let mut residual_sq = 0.0;
        let mut nonzeros = 0usize;
        let mut amax = 0.0f64;
        Zip::from(&mut multiplier)
            .and(l)
            .and(&low_rank)
            .and(&sparse)
            .for_each(|zv, &lv, &nv, &av| {
                let r = lv - nv - av;
                residual_sq += r.norm_sqr();
                *zv += beta * r;
                let an = av.norm();
                if an != 0.0 {
                    nonzeros += 1;
                }
                amax = amax.max(an);
            });
        let residual = residual_sq.sqrt() / norm_f;

        if !residual.is_finite() || !amax.is_finite() {
            return Err(Error::NumericalFailure {
                iteration: k,
                detail: format!("residual {residual}, max sparse modulus {amax}"),
            });
        }

        history.push(IterationRecord {
            iteration: k,
            residual,
            rank: kept,
            nonzeros,
            beta,
            max_sparse_modulus: amax,
        });

        if residual < params.tolerance {
            converged = true;
            break;
        }
    }

    let iterations = history.len();
    Ok(DecompositionResult {
        low_rank,
        sparse,
        multiplier,
        history,
        rank,
        iterations,
        converged,
        alpha,
    })
}

/// Tightest `q` such that the relative residuals satisfy `r_k <= q^k`
/// (the scale constant is folded into `p = 1` measured in units of `|L|_F`).
/// `None` when the history is too short or the decay is not contractive.
pub fn calibrated_decay_rate(history: &[IterationRecord]) -> Option<f64> {
    let mut q: f64 = 0.0;
    let mut seen = false;
    for rec in history.iter().skip(1) {
        if rec.residual <= 0.0 {
            continue;
        }
        seen = true;
        q = q.max(rec.residual.powf(1.0 / rec.iteration as f64));
    }
    if seen && q < 1.0 {
        Some(q)
    } else {
        None
    }
}

/// Whether the observed relative residuals stay under the envelope `p q^k`.
pub fn decay_envelope_holds(history: &[IterationRecord], p: f64, q: f64) -> bool {
    history
        .iter()
        .all(|rec| rec.residual <= p * q.powi(rec.iteration as i32) + 1e-15)
}
