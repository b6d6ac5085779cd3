//! Level-statistics and eigenvector indicators: Brody `β`, Berry–Robnik
//! `ρ̄²`, the spacing-ratio measure `η` and the normalized participation
//! ratio `ξ̄_E`.

use std::f64::consts::PI;

use ndarray::{Array1, Array2, ArrayView2};
use ndarray_linalg::LeastSquaresSvd;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;
use statrs::function::gamma::{digamma, ln_gamma};

use crate::error::{Error, Result};
use crate::linalg::adjoint;

/// Mean of `min(r, 1/r)` for Poisson spectra, as used in `η`.
pub const RATIO_POISSON: f64 = 0.386;
/// Upper reference value of `min(r, 1/r)` used in `η`.
pub const RATIO_WIGNER: f64 = 0.586;
/// Literature GOE value of the same mean, reported alongside `η`.
pub const RATIO_GOE: f64 = 0.5307;

/// Spacings smaller than this fraction of the mean count as degenerate.
pub const DEGENERACY_CUTOFF: f64 = 1e-12;

pub const BRODY_MIN: f64 = -0.99;
pub const BRODY_MAX: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SpectrumKind {
    Energy,
    Phase,
}

/// Sorted levels plus optional eigenvectors (columns, same order).
#[derive(Debug, Clone)]
pub struct SpectrumSample {
    levels: Vec<f64>,
    kind: SpectrumKind,
    eigenvectors: Option<Array2<Complex64>>,
}

impl SpectrumSample {
    pub fn new(levels: Vec<f64>, kind: SpectrumKind) -> Result<Self> {
        if levels.iter().any(|x| !x.is_finite()) {
            return Err(Error::invalid("levels must be finite"));
        }
        if levels.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::invalid("levels must be sorted ascending"));
        }
        if kind == SpectrumKind::Phase && levels.iter().any(|&x| !(0.0..2.0 * PI).contains(&x)) {
            return Err(Error::invalid("eigenphases must lie in [0, 2π)"));
        }
        Ok(SpectrumSample { levels, kind, eigenvectors: None })
    }

    pub fn with_eigenvectors(mut self, vectors: Array2<Complex64>) -> Result<Self> {
        if vectors.ncols() != self.levels.len() {
            return Err(Error::invalid("one eigenvector column per level is required"));
        }
        // Columns must be orthonormal; for square matrices this is unitarity.
        let gram = adjoint(vectors.view()).dot(&vectors);
        let defect = gram
            .indexed_iter()
            .map(|((i, j), z)| (z - if i == j { Complex64::new(1.0, 0.0) } else { Complex64::new(0.0, 0.0) }).norm())
            .fold(0.0, f64::max);
        if defect > 1e-8 {
            return Err(Error::NotUnitary { defect, tolerance: 1e-8 });
        }
        self.eigenvectors = Some(vectors);
        Ok(self)
    }

    pub fn levels(&self) -> &[f64] {
        &self.levels
    }

    pub fn kind(&self) -> SpectrumKind {
        self.kind
    }

    pub fn eigenvectors(&self) -> Option<&Array2<Complex64>> {
        self.eigenvectors.as_ref()
    }

    /// Unit-mean spacings using the kind-appropriate unfolding.
    pub fn spacings(&self, unfolding: &Unfolding) -> Result<Vec<f64>> {
        match self.kind {
            SpectrumKind::Phase => unfold_phases(&self.levels),
            SpectrumKind::Energy => unfold(&self.levels, unfolding.trim, unfolding.degree),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Unfolding {
    /// Fraction of levels discarded at each spectral edge.
    pub trim: f64,
    /// Degree of the polynomial fitted to the counting function.
    pub degree: usize,
}

impl Default for Unfolding {
    fn default() -> Self {
        Unfolding { trim: 0.1, degree: 7 }
    }
}

/// Chebyshev polynomials `T_0..=T_degree` at `x ∈ [−1, 1]`.
fn chebyshev_row(x: f64, degree: usize, out: &mut [f64]) {
    out[0] = 1.0;
    if degree >= 1 {
        out[1] = x;
    }
    for k in 2..=degree {
        out[k] = 2.0 * x * out[k - 1] - out[k - 2];
    }
}

/// Unfolds sorted energies by a polynomial fit of the counting function over
/// the trimmed central part, then rescales the spacings to unit mean.
pub fn unfold(levels: &[f64], trim: f64, degree: usize) -> Result<Vec<f64>> {
    let n = levels.len();
    if n < 50 {
        return Err(Error::invalid(format!("unfolding needs at least 50 levels, got {n}")));
    }
    if !(0.0..0.5).contains(&trim) {
        return Err(Error::invalid(format!("trim fraction must lie in [0, 0.5), got {trim}")));
    }
    if levels.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::invalid("levels must be sorted ascending"));
    }
    let cut = (trim * n as f64).floor() as usize;
    let kept = &levels[cut..n - cut];
    let m = kept.len();
    if m < degree + 2 {
        return Err(Error::invalid("too few levels left after trimming for the unfolding degree"));
    }
    let (lo, hi) = (kept[0], kept[m - 1]);
    if hi <= lo {
        return Err(Error::Degenerate("trimmed spectrum has zero width".into()));
    }
    let to_unit = |e: f64| 2.0 * (e - lo) / (hi - lo) - 1.0;
    let mut a = Array2::<f64>::zeros((m, degree + 1));
    let mut row = vec![0.0; degree + 1];
    for (i, &e) in kept.iter().enumerate() {
        chebyshev_row(to_unit(e), degree, &mut row);
        a.row_mut(i).assign(&Array1::from(row.clone()));
    }
    let counts = Array1::from_iter((0..m).map(|i| (cut + i) as f64));
    let coef = a.least_squares(&counts)?.solution;
    let unfolded: Vec<f64> = kept
        .iter()
        .map(|&e| {
            chebyshev_row(to_unit(e), degree, &mut row);
            row.iter().zip(coef.iter()).map(|(r, c)| r * c).sum()
        })
        .collect();
    normalize_mean(unfolded.windows(2).map(|w| w[1] - w[0]).collect())
}

/// Spacings of eigenphases on the circle, wraparound included, scaled by
/// `n/(2π)` so that their mean is exactly 1.
pub fn unfold_phases(phases: &[f64]) -> Result<Vec<f64>> {
    let n = phases.len();
    if n < 2 {
        return Err(Error::invalid("need at least two eigenphases"));
    }
    let scale = n as f64 / (2.0 * PI);
    let mut s: Vec<f64> = phases.windows(2).map(|w| (w[1] - w[0]) * scale).collect();
    s.push((phases[0] + 2.0 * PI - phases[n - 1]) * scale);
    Ok(s)
}

fn normalize_mean(s: Vec<f64>) -> Result<Vec<f64>> {
    let mean = s.iter().sum::<f64>() / s.len() as f64;
    if !(mean > 0.0) {
        return Err(Error::Degenerate("spacings have nonpositive mean".into()));
    }
    Ok(s.into_iter().map(|x| x / mean).collect())
}

/// Drops spacings below `DEGENERACY_CUTOFF` of the mean and rescales the rest
/// to unit mean. Returns the cleaned sample and the number dropped.
fn prepare_spacings(spacings: &[f64]) -> Result<(Vec<f64>, usize)> {
    if spacings.len() < 100 {
        return Err(Error::invalid(format!("fits need at least 100 spacings, got {}", spacings.len())));
    }
    if spacings.iter().any(|s| !s.is_finite() || *s < 0.0) {
        return Err(Error::invalid("spacings must be finite and nonnegative"));
    }
    let mean = spacings.iter().sum::<f64>() / spacings.len() as f64;
    let kept: Vec<f64> = spacings.iter().copied().filter(|&s| s > DEGENERACY_CUTOFF * mean).collect();
    let dropped = spacings.len() - kept.len();
    if kept.len() < 2 {
        return Err(Error::Degenerate("all spacings are degenerate".into()));
    }
    if dropped > 0 {
        log::debug!("dropped {dropped} degenerate spacings before fitting");
    }
    Ok((normalize_mean(kept)?, dropped))
}

/// Result of a one-parameter maximum-likelihood fit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Fit {
    pub value: f64,
    pub log_likelihood: f64,
    pub iterations: usize,
    pub dropped_degenerate: usize,
}

/// Maximizes `f` on `[lo, hi]` given its derivative `df`.
///
/// A coarse grid scan brackets the maximum; the bracket is then refined by
/// bisection on the sign of `df`, which is not limited by roundoff in `f`
/// the way a pure comparison search is. A maximum on the domain edge is
/// returned as is.
fn maximize(
    f: impl Fn(f64) -> f64,
    df: impl Fn(f64) -> f64,
    lo: f64,
    hi: f64,
    routine: &'static str,
) -> Result<(f64, f64, usize)> {
    const GRID: usize = 200;
    const MAX_ITER: usize = 200;
    let step = (hi - lo) / GRID as f64;
    let (mut best, mut best_f) = (lo, f(lo));
    for i in 1..=GRID {
        let x = lo + i as f64 * step;
        let fx = f(x);
        if fx > best_f || best_f.is_nan() {
            best = x;
            best_f = fx;
        }
    }
    if !best_f.is_finite() {
        return Err(Error::NoConvergence { routine, iterations: GRID });
    }
    let (mut a, mut b) = ((best - step).max(lo), (best + step).min(hi));
    let (da, db) = (df(a), df(b));
    if !(da > 0.0 && db < 0.0) {
        if (best == lo && df(lo) <= 0.0) || (best == hi && df(hi) >= 0.0) {
            return Ok((best, best_f, GRID));
        }
        if !(da.is_finite() && db.is_finite()) {
            return Err(Error::NoConvergence { routine, iterations: GRID });
        }
        // Bracket endpoints on the domain edge with an interior optimum
        // between them: widen once to the neighbouring grid cells.
        a = (best - 2.0 * step).max(lo);
        b = (best + 2.0 * step).min(hi);
        if !(df(a) > 0.0 && df(b) < 0.0) {
            return Ok((best, best_f, GRID));
        }
    }
    for it in 0..MAX_ITER {
        let m = 0.5 * (a + b);
        if b - a <= 4.0 * f64::EPSILON * (1.0 + m.abs()) || m == a || m == b {
            return Ok((m, f(m), GRID + it));
        }
        if df(m) > 0.0 {
            a = m;
        } else {
            b = m;
        }
    }
    Err(Error::NoConvergence { routine, iterations: GRID + MAX_ITER })
}

/// Scale `b(β) = Γ((β+2)/(β+1))^{β+1}` that gives the Brody density unit mean.
pub fn brody_scale(beta: f64) -> f64 {
    ((beta + 1.0) * ln_gamma((beta + 2.0) / (beta + 1.0))).exp()
}

/// Brody density `(β+1)·b·s^β·exp(−b·s^{β+1})`.
pub fn brody_density(s: f64, beta: f64) -> f64 {
    let b = brody_scale(beta);
    (beta + 1.0) * b * s.powf(beta) * (-b * s.powf(beta + 1.0)).exp()
}

/// Maximum-likelihood Brody parameter on `(−0.99, 2]`.
pub fn brody_fit(spacings: &[f64]) -> Result<Fit> {
    let (s, dropped) = prepare_spacings(spacings)?;
    let n = s.len() as f64;
    let log_s: Vec<f64> = s.iter().map(|x| x.ln()).collect();
    let sum_log = log_s.iter().sum::<f64>();
    let loglik = |beta: f64| {
        let b = brody_scale(beta);
        let tail: f64 = log_s.iter().map(|l| ((beta + 1.0) * l).exp()).sum();
        n * ((beta + 1.0).ln() + b.ln()) + beta * sum_log - b * tail
    };
    let score = |beta: f64| {
        let b = brody_scale(beta);
        let a = (beta + 2.0) / (beta + 1.0);
        let dlog_b = ln_gamma(a) - digamma(a) / (beta + 1.0);
        let (mut tail, mut tail_log) = (0.0, 0.0);
        for l in &log_s {
            let p = ((beta + 1.0) * l).exp();
            tail += p;
            tail_log += p * l;
        }
        n / (beta + 1.0) + n * dlog_b + sum_log - b * dlog_b * tail - b * tail_log
    };
    let (value, log_likelihood, iterations) = maximize(loglik, score, BRODY_MIN, BRODY_MAX, "brody_fit")?;
    Ok(Fit { value, log_likelihood, iterations, dropped_degenerate: dropped })
}

/// Berry–Robnik density with chaotic weight `ρ` and regular weight `1 − ρ`.
pub fn berry_robnik_density(s: f64, rho: f64) -> f64 {
    let r1 = 1.0 - rho;
    let x = 0.5 * PI.sqrt() * rho * s;
    (-r1 * s).exp()
        * (r1 * r1 * erfc(x) + (2.0 * r1 * rho + 0.5 * PI * rho.powi(3) * s) * (-x * x).exp())
}

/// `∂/∂ρ ln P_BR(s; ρ)`.
pub fn berry_robnik_log_derivative(s: f64, rho: f64) -> f64 {
    let r1 = 1.0 - rho;
    let x = 0.5 * PI.sqrt() * rho * s;
    let e = erfc(x);
    let g = (-x * x).exp();
    let mix = 2.0 * r1 * rho + 0.5 * PI * rho.powi(3) * s;
    let q = r1 * r1 * e + mix * g;
    let dq = -2.0 * r1 * e - r1 * r1 * s * g + (2.0 * (r1 - rho) + 1.5 * PI * rho * rho * s) * g
        - mix * 0.5 * PI * rho * s * s * g;
    s + dq / q.max(1e-300)
}

/// Maximum-likelihood chaotic weight `ρ̄ ∈ [0, 1]`; the fit value is `ρ̄²`.
pub fn berry_robnik_fit(spacings: &[f64]) -> Result<Fit> {
    let (s, dropped) = prepare_spacings(spacings)?;
    let loglik = |rho: f64| s.iter().map(|&x| berry_robnik_density(x, rho).max(1e-300).ln()).sum::<f64>();
    let score = |rho: f64| s.iter().map(|&x| berry_robnik_log_derivative(x, rho)).sum::<f64>();
    let (rho, log_likelihood, iterations) = maximize(loglik, score, 0.0, 1.0, "berry_robnik_fit")?;
    Ok(Fit { value: rho * rho, log_likelihood, iterations, dropped_degenerate: dropped })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatioStat {
    pub eta: f64,
    /// Mean of `min(r, 1/r)`.
    pub mean_ratio: f64,
    pub n_ratios: usize,
    /// Ratios skipped because a spacing was degenerate.
    pub excluded: usize,
    pub goe_reference: f64,
}

/// `η = (⟨r̃⟩ − 0.386)/(0.586 − 0.386)` from raw consecutive spacings.
pub fn ratio_eta(levels: &[f64]) -> Result<RatioStat> {
    ratio_eta_pooled(&[levels])
}

/// `η` with the ratios of several independent sectors pooled.
pub fn ratio_eta_pooled(sectors: &[&[f64]]) -> Result<RatioStat> {
    let (mut sum, mut count, mut excluded) = (0.0, 0usize, 0usize);
    for levels in sectors {
        if levels.len() < 3 {
            return Err(Error::invalid("ratio statistic needs at least 3 levels"));
        }
        if levels.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::invalid("levels must be sorted ascending"));
        }
        let s: Vec<f64> = levels.windows(2).map(|w| w[1] - w[0]).collect();
        let mean = s.iter().sum::<f64>() / s.len() as f64;
        let floor = DEGENERACY_CUTOFF * mean;
        for w in s.windows(2) {
            if w[0] <= floor || w[1] <= floor {
                excluded += 1;
                continue;
            }
            let r = w[1] / w[0];
            sum += r.min(1.0 / r);
            count += 1;
        }
    }
    if count == 0 {
        return Err(Error::Degenerate("no nondegenerate spacing ratios".into()));
    }
    let mean_ratio = sum / count as f64;
    Ok(RatioStat {
        eta: (mean_ratio - RATIO_POISSON) / (RATIO_WIGNER - RATIO_POISSON),
        mean_ratio,
        n_ratios: count,
        excluded,
        goe_reference: RATIO_GOE,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParticipationStat {
    /// Mean `ξ_E` divided by `D/3`.
    pub normalized: f64,
    /// Mean `ξ_E` of the selected eigenstates.
    pub raw_mean: f64,
    pub n_states: usize,
}

/// Participation ratio `ξ_E(i) = 1/Σ_j |a_ji|⁴` of each column.
pub fn participation_ratios(vectors: ArrayView2<Complex64>) -> Vec<f64> {
    vectors
        .columns()
        .into_iter()
        .map(|col| 1.0 / col.iter().map(|z| z.norm_sqr().powi(2)).sum::<f64>())
        .collect()
}

/// Mean participation ratio over all columns, or over the central
/// `center_fraction` of them (columns ordered by level), divided by `D/3`.
pub fn eigenstate_ipr(vectors: ArrayView2<Complex64>, center_fraction: Option<f64>) -> Result<ParticipationStat> {
    let (d, n) = vectors.dim();
    if n == 0 || d == 0 {
        return Err(Error::invalid("no eigenvectors given"));
    }
    for (i, col) in vectors.columns().into_iter().enumerate() {
        let norm = col.iter().map(|z| z.norm_sqr()).sum::<f64>();
        if (norm - 1.0).abs() > 1e-8 {
            return Err(Error::invalid(format!("eigenvector {i} has squared norm {norm}")));
        }
    }
    let range = match center_fraction {
        None => 0..n,
        Some(f) if f > 0.0 && f <= 1.0 => {
            let k = ((f * n as f64).round() as usize).clamp(1, n);
            let start = (n - k) / 2;
            start..start + k
        }
        Some(f) => return Err(Error::invalid(format!("center fraction must lie in (0, 1], got {f}"))),
    };
    let xi = participation_ratios(vectors.slice(ndarray::s![.., range]));
    let raw_mean = xi.iter().sum::<f64>() / xi.len() as f64;
    Ok(ParticipationStat { normalized: raw_mean / (d as f64 / 3.0), raw_mean, n_states: xi.len() })
}

/// Real-vector variant for eigenvectors of real symmetric matrices.
pub fn eigenstate_ipr_real(vectors: ArrayView2<f64>, center_fraction: Option<f64>) -> Result<ParticipationStat> {
    eigenstate_ipr(vectors.mapv(|x| Complex64::new(x, 0.0)).view(), center_fraction)
}

/// Unit-mean spacings of independent symmetry sectors, each unfolded on its
/// own, pooled into one sample.
pub fn pooled_spacings(sectors: &[SpectrumSample], unfolding: &Unfolding) -> Result<Vec<f64>> {
    let mut out = Vec::new();
    for sector in sectors {
        out.extend(sector.spacings(unfolding)?);
    }
    Ok(out)
}

/// All four indicators for one spectrum split into symmetry sectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralSummary {
    pub beta: Fit,
    pub rho2: Fit,
    pub eta: RatioStat,
    /// Present when every sector carries eigenvectors.
    pub participation: Option<ParticipationStat>,
}

/// Brody, Berry–Robnik and ratio statistics over pooled sectors, plus the
/// participation ratio over the central `center_fraction` of each sector.
/// Eigenvector rows must all refer to the same reference basis.
pub fn spectral_summary(
    sectors: &[SpectrumSample],
    unfolding: &Unfolding,
    center_fraction: Option<f64>,
) -> Result<SpectralSummary> {
    if sectors.is_empty() {
        return Err(Error::invalid("no spectra given"));
    }
    let spacings = pooled_spacings(sectors, unfolding)?;
    let beta = brody_fit(&spacings)?;
    let rho2 = berry_robnik_fit(&spacings)?;
    let levels: Vec<&[f64]> = sectors.iter().map(|s| s.levels()).collect();
    let eta = ratio_eta_pooled(&levels)?;
    let participation = if sectors.iter().all(|s| s.eigenvectors().is_some()) {
        let (mut sum, mut n_states, mut dim) = (0.0, 0usize, 0usize);
        for s in sectors {
            let v = s.eigenvectors().unwrap();
            let stat = eigenstate_ipr(v.view(), center_fraction)?;
            sum += stat.raw_mean * stat.n_states as f64;
            n_states += stat.n_states;
            dim = v.nrows();
        }
        let raw_mean = sum / n_states as f64;
        Some(ParticipationStat { normalized: raw_mean / (dim as f64 / 3.0), raw_mean, n_states })
    } else {
        None
    };
    Ok(SpectralSummary { beta, rho2, eta, participation })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream_rng;
    use proptest::prelude::*;
    use rand::Rng;
    use rand_distr::{Distribution, Exp1, StandardNormal};

    /// Inverse-CDF draw from the Brody law: `s = (−ln(1−u)/b)^{1/(β+1)}`.
    pub(crate) fn brody_sample(beta: f64, n: usize, seed: u64) -> Vec<f64> {
        let b = statrs::function::gamma::gamma((beta + 2.0) / (beta + 1.0)).powf(beta + 1.0);
        let mut rng = stream_rng(seed, 0);
        (0..n).map(|_| (-(1.0 - rng.random::<f64>()).ln() / b).powf(1.0 / (beta + 1.0))).collect()
    }

    fn wigner_sample(n: usize, seed: u64) -> Vec<f64> {
        // CDF 1 − exp(−πs²/4).
        let mut rng = stream_rng(seed, 1);
        (0..n).map(|_| (-4.0 / PI * (1.0 - rng.random::<f64>()).ln()).sqrt()).collect()
    }

    fn poisson_levels(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = stream_rng(seed, 2);
        let mut e = 0.0;
        (0..n)
            .map(|_| {
                let g: f64 = Exp1.sample(&mut rng);
                e += g;
                e
            })
            .collect()
    }

    #[test]
    fn picket_fence_unfolds_to_ones() {
        let levels: Vec<f64> = (0..200).map(|i| 3.0 + 0.25 * i as f64).collect();
        let s = unfold(&levels, 0.1, 7).unwrap();
        assert!(s.iter().all(|x| (x - 1.0).abs() < 1e-8));
        assert!(unfold(&levels[..40], 0.1, 7).is_err());
    }

    #[test]
    fn phase_unfolding_has_exact_unit_mean() {
        let mut rng = stream_rng(3, 0);
        let mut ph: Vec<f64> = (0..1000).map(|_| 2.0 * PI * rng.random::<f64>()).collect();
        ph.sort_by(f64::total_cmp);
        let s = unfold_phases(&ph).unwrap();
        assert_eq!(s.len(), 1000);
        assert!((s.iter().sum::<f64>() / 1000.0 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn poisson_unfolding_matches_exponential() {
        let levels = poisson_levels(5000, 11);
        let mut s = unfold(&levels, 0.1, 7).unwrap();
        assert!((s.iter().sum::<f64>() / s.len() as f64 - 1.0).abs() < 1e-6);
        s.sort_by(f64::total_cmp);
        let n = s.len() as f64;
        let ks = s
            .iter()
            .enumerate()
            .map(|(i, &x)| {
                let cdf = 1.0 - (-x).exp();
                (cdf - i as f64 / n).abs().max((cdf - (i + 1) as f64 / n).abs())
            })
            .fold(0.0, f64::max);
        assert!(ks < 0.03, "KS {ks}");
    }

    #[test]
    fn brody_limits() {
        let poisson = brody_sample(0.0, 10_000, 1);
        assert!(brody_fit(&poisson).unwrap().value.abs() < 0.05);
        let wigner = wigner_sample(10_000, 2);
        assert!((brody_fit(&wigner).unwrap().value - 1.0).abs() < 0.05);
        assert!((brody_scale(1.0) - PI / 4.0).abs() < 1e-12);
        assert!(brody_fit(&poisson[..50]).is_err());
    }

    #[test]
    fn brody_recovers_generating_parameter() {
        for (i, beta) in [0.0, 0.3, 0.7, 1.0].into_iter().enumerate() {
            let fit = brody_fit(&brody_sample(beta, 10_000, 10 + i as u64)).unwrap();
            assert!((fit.value - beta).abs() < 0.05, "{beta}: {}", fit.value);
        }
    }

    #[test]
    fn clustered_spectrum_gives_negative_brody() {
        // Mostly tiny gaps with a few large ones.
        let mut rng = stream_rng(5, 0);
        let s: Vec<f64> = (0..2000)
            .map(|i| if i % 50 == 0 { 40.0 } else { 1e-4 * (0.5 + rng.random::<f64>()) })
            .collect();
        assert!(brody_fit(&s).unwrap().value < 0.0);
    }

    #[test]
    fn berry_robnik_limits_and_mixture() {
        assert!(berry_robnik_fit(&brody_sample(0.0, 10_000, 21)).unwrap().value < 0.05);
        assert!((berry_robnik_fit(&wigner_sample(10_000, 22)).unwrap().value - 1.0).abs() < 0.05);

        // Superpose two independent unit-density spectra, one Poisson and one
        // Wigner, each carrying half the levels.
        let mut levels = poisson_levels(5000, 23);
        let mut e = 0.0;
        levels.extend(wigner_sample(5000, 24).into_iter().map(|g| {
            e += g;
            e
        }));
        levels.sort_by(f64::total_cmp);
        let s = normalize_mean(levels.windows(2).map(|w| w[1] - w[0]).collect()).unwrap();
        let rho2 = berry_robnik_fit(&s).unwrap().value;
        assert!((rho2 - 0.25).abs() < 0.1, "{rho2}");
    }

    #[test]
    fn scores_match_finite_differences() {
        let h = 1e-6;
        for rho in [0.1, 0.45, 0.9] {
            for x in [0.05, 0.7, 2.3] {
                let fd = (berry_robnik_density(x, rho + h).ln() - berry_robnik_density(x, rho - h).ln()) / (2.0 * h);
                assert!((fd - berry_robnik_log_derivative(x, rho)).abs() < 1e-6, "{rho} {x}");
            }
        }
        for beta in [-0.5, 0.2, 1.3] {
            let fd = (brody_scale(beta + h).ln() - brody_scale(beta - h).ln()) / (2.0 * h);
            let a = (beta + 2.0) / (beta + 1.0);
            assert!((fd - (ln_gamma(a) - digamma(a) / (beta + 1.0))).abs() < 1e-6);
        }
    }

    #[test]
    fn berry_robnik_density_is_normalized() {
        for rho in [0.0, 0.3, 0.8, 1.0] {
            let h = 1e-3;
            let total: f64 = (0..20_000).map(|i| berry_robnik_density((i as f64 + 0.5) * h, rho) * h).sum();
            assert!((total - 1.0).abs() < 1e-4, "{rho}: {total}");
        }
    }

    #[test]
    fn ratio_examples() {
        let r = ratio_eta(&poisson_levels(100_000, 31)).unwrap();
        assert!((r.mean_ratio - 0.386).abs() < 0.005, "{}", r.mean_ratio);
        assert!(r.eta.abs() < 0.03);

        let fence: Vec<f64> = (0..100).map(|i| i as f64).collect();
        let r = ratio_eta(&fence).unwrap();
        assert!((r.eta - (1.0 - 0.386) / 0.2).abs() < 1e-12);

        let degenerate = [0.0, 1.0, 1.0, 2.5, 3.0];
        assert_eq!(ratio_eta(&degenerate).unwrap().excluded, 2);
    }

    #[test]
    fn goe_ratio_oracle() {
        let n = 1000;
        let mut rng = stream_rng(41, 0);
        let mut h = Array2::<f64>::zeros((n, n));
        for i in 0..n {
            for j in 0..=i {
                let g: f64 = StandardNormal.sample(&mut rng);
                let v = if i == j { g * 2f64.sqrt() } else { g };
                h[[i, j]] = v;
                h[[j, i]] = v;
            }
        }
        let e = crate::linalg::symmetric_eigenvalues(h.view()).unwrap().to_vec();
        let r = ratio_eta(&e[n / 4..3 * n / 4]).unwrap();
        assert!((r.mean_ratio - RATIO_GOE).abs() < 0.02, "{}", r.mean_ratio);
    }

    #[test]
    fn pooled_ratios_weight_every_ratio_equally() {
        let a = poisson_levels(300, 1);
        let b = poisson_levels(700, 2);
        let pooled = ratio_eta_pooled(&[&a, &b]).unwrap();
        let (ra, rb) = (ratio_eta(&a).unwrap(), ratio_eta(&b).unwrap());
        let expect = (ra.mean_ratio * ra.n_ratios as f64 + rb.mean_ratio * rb.n_ratios as f64) / (ra.n_ratios + rb.n_ratios) as f64;
        assert!((pooled.mean_ratio - expect).abs() < 1e-14);
        assert_eq!(pooled.n_ratios, ra.n_ratios + rb.n_ratios);
    }

    #[test]
    fn summary_pools_independent_sectors() {
        // Two interleaved Poisson sectors are Poisson in each sector, while
        // their superposition would be too; pooling must keep β near 0.
        let sectors: Vec<SpectrumSample> =
            (0..2).map(|k| SpectrumSample::new(poisson_levels(6000, 10 + k), SpectrumKind::Energy).unwrap()).collect();
        let sum = spectral_summary(&sectors, &Unfolding::default(), None).unwrap();
        assert!(sum.beta.value.abs() < 0.05, "{}", sum.beta.value);
        assert!(sum.rho2.value < 0.05);
        assert!(sum.eta.eta.abs() < 0.05);
        assert!(sum.participation.is_none());
        let eye = Array2::<Complex64>::eye(60);
        let local = SpectrumSample::new((0..60).map(f64::from).collect(), SpectrumKind::Energy).unwrap().with_eigenvectors(eye).unwrap();
        let p = spectral_summary(&[local.clone(), local], &Unfolding::default(), None);
        assert!(p.is_err(), "120 spacings minus two edge trims is below the fit minimum");
    }

    #[test]
    fn ipr_examples() {
        let d = 50;
        let eye = Array2::<Complex64>::eye(d);
        let r = eigenstate_ipr(eye.view(), None).unwrap();
        assert!((r.normalized - 3.0 / d as f64).abs() < 1e-14);
        let flat = Array2::from_elem((d, d), Complex64::new(1.0 / (d as f64).sqrt(), 0.0));
        let xi = participation_ratios(flat.view());
        assert!(xi.iter().all(|x| (x - d as f64).abs() < 1e-9));
        assert!((eigenstate_ipr(flat.view(), Some(0.1)).unwrap().normalized - 3.0).abs() < 1e-9);
        assert_eq!(eigenstate_ipr(flat.view(), Some(0.1)).unwrap().n_states, 5);
    }

    #[test]
    fn haar_ipr_oracle() {
        // Eigenvectors of GOE/GUE matrices are Haar distributed: real
        // orthogonal columns have mean participation (D+2)/3, complex
        // unitary ones (D+1)/2.
        let d = 1000;
        let mut rng = stream_rng(51, 0);
        let mut real = Array2::<f64>::zeros((d, d));
        for i in 0..d {
            for j in 0..=i {
                let v: f64 = StandardNormal.sample(&mut rng);
                real[[i, j]] = v;
                real[[j, i]] = v;
            }
        }
        let (_, q) = crate::linalg::symmetric_eigen(real.view()).unwrap();
        let r = eigenstate_ipr_real(q.view(), None).unwrap();
        assert!((r.normalized - 1.0).abs() < 0.05, "{}", r.normalized);

        use ndarray_linalg::{Eigh, UPLO};
        let mut g = Array2::<Complex64>::zeros((d, d));
        for i in 0..d {
            for j in 0..=i {
                let re: f64 = StandardNormal.sample(&mut rng);
                let im: f64 = if i == j { 0.0 } else { StandardNormal.sample(&mut rng) };
                g[[i, j]] = Complex64::new(re, im);
                g[[j, i]] = Complex64::new(re, -im);
            }
        }
        let (_, v) = g.eigh(UPLO::Lower).unwrap();
        let r = eigenstate_ipr(v.view(), None).unwrap();
        assert!((r.normalized - 1.5).abs() < 0.05 * 1.5, "{}", r.normalized);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]

        #[test]
        fn fits_are_scale_consistent(seed in 0u64..500, scale in 0.01f64..100.0) {
            let s = brody_sample(0.5, 400, seed);
            let scaled: Vec<f64> = s.iter().map(|x| x * scale).collect();
            let a = brody_fit(&s).unwrap().value;
            let b = brody_fit(&scaled).unwrap().value;
            prop_assert!((a - b).abs() < 1e-8);
            let a = berry_robnik_fit(&s).unwrap().value;
            let b = berry_robnik_fit(&scaled).unwrap().value;
            prop_assert!((a - b).abs() < 1e-8);
        }

        #[test]
        fn eta_is_affine_invariant(seed in 0u64..500, shift in -1e3f64..1e3, scale in 1e-3f64..1e3) {
            let levels = poisson_levels(300, seed);
            let moved: Vec<f64> = levels.iter().map(|e| shift + scale * e).collect();
            let a = ratio_eta(&levels).unwrap().eta;
            let b = ratio_eta(&moved).unwrap().eta;
            prop_assert!((a - b).abs() < 1e-9);
        }

        #[test]
        fn ipr_bounds_and_permutation(seed in 0u64..500, d in 2usize..30) {
            let mut rng = stream_rng(seed, 9);
            let v = Array2::from_shape_fn((d, 3), |_| Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5));
            let mut v = v;
            for mut col in v.columns_mut() {
                let n = col.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
                col.mapv_inplace(|z| z / n);
            }
            let xi = participation_ratios(v.view());
            prop_assert!(xi.iter().all(|x| *x >= 1.0 - 1e-12 && *x <= d as f64 + 1e-9));
            let mut rev = v.clone();
            rev.invert_axis(ndarray::Axis(0));
            let xr = participation_ratios(rev.view());
            for (a, b) in xi.iter().zip(&xr) {
                prop_assert!((a - b).abs() < 1e-9);
            }
        }
    }
}
