//! OTOC time series and their long-time indicators.
//!
//! Two numbers summarize the oscillations of a saturated correlator: the
//! relative standard deviation `σ_OTOC` over a late time window, and
//! `ξ_OTOC`, the participation ratio of the (one-sided, mean-subtracted)
//! power spectrum of the same window.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tags describing where a series came from.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SeriesMeta {
    pub model: String,
    pub parameter: Option<f64>,
    /// Site separation `l` for spin chains.
    pub separation: Option<usize>,
    /// Operator pair, e.g. `"X,P"` or `"z,z"`.
    pub operators: String,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub extra: BTreeMap<String, String>,
}

/// Correlator samples on a uniform time grid `start + i·dt`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OtocSeries {
    pub start: f64,
    pub dt: f64,
    pub values: Vec<f64>,
    pub meta: SeriesMeta,
}

impl OtocSeries {
    pub fn new(start: f64, dt: f64, values: Vec<f64>, meta: SeriesMeta) -> Result<Self> {
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(Error::invalid(format!("time step must be positive, got {dt}")));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite() || **v < -1e-10) {
            return Err(Error::invalid(format!("correlator value {v} is not a finite non-negative number")));
        }
        Ok(OtocSeries { start, dt, values, meta })
    }

    /// Builds a series from explicit sample times, which must be uniform.
    pub fn from_samples(times: &[f64], values: Vec<f64>, meta: SeriesMeta) -> Result<Self> {
        if times.len() != values.len() {
            return Err(Error::invalid("times and values differ in length"));
        }
        if times.len() < 2 {
            return Err(Error::invalid("a series needs at least two samples"));
        }
        let dt = times[1] - times[0];
        let tol = 1e-9 * dt.abs().max(times.last().unwrap().abs());
        for (i, t) in times.iter().enumerate() {
            if (t - (times[0] + i as f64 * dt)).abs() > tol {
                return Err(Error::invalid(format!("time grid is not uniform at sample {i}")));
            }
        }
        Self::new(times[0], dt, values, meta)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn time(&self, i: usize) -> f64 {
        self.start + i as f64 * self.dt
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.values.len()).map(|i| self.time(i))
    }

    /// Samples with `t > t0`.
    pub fn after(&self, t0: f64) -> &[f64] {
        let first = self.times().position(|t| t > t0).unwrap_or(self.values.len());
        &self.values[first..]
    }

    /// Default transient cutoff: the first 20% of the covered time span.
    pub fn default_cutoff(&self) -> f64 {
        let span = self.time(self.len().saturating_sub(1)) - self.start;
        self.start + 0.2 * span
    }

    /// Mean over the samples with `t > t0`.
    pub fn window_mean(&self, t0: f64) -> Option<f64> {
        let w = self.after(t0);
        (!w.is_empty()).then(|| w.iter().sum::<f64>() / w.len() as f64)
    }
}

/// Relative standard deviation `σ/⟨C⟩` over the samples with `t > t0`.
pub fn sigma_otoc(series: &OtocSeries, t0: f64) -> Result<f64> {
    let w = series.after(t0);
    if w.len() < 100 {
        return Err(Error::invalid(format!("sigma_otoc needs at least 100 samples after t0, got {}", w.len())));
    }
    let n = w.len() as f64;
    let mean = w.iter().sum::<f64>() / n;
    if mean <= 1e-12 {
        return Err(Error::Degenerate(format!("window mean {mean:.3e} too small for a relative deviation")));
    }
    let var = w.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    Ok(var.sqrt() / mean)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Taper {
    #[default]
    Rectangular,
    Hann,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct XiOptions {
    /// Centered moving-average window (in samples) subtracted before the
    /// transform; `None` disables detrending.
    pub detrend_window: Option<usize>,
    pub taper: Taper,
}

/// Normalized one-sided power spectrum of the mean-subtracted window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumOfOtoc {
    /// Angular frequencies `ω_k = k·Δω`, `k = 1..=N/2`.
    pub omega: Vec<f64>,
    /// `ρ_k = |C̃_k|²/Σ|C̃|²`.
    pub power: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct XiOtoc {
    /// Participation ratio of the spectrum, in bins.
    pub xi: f64,
    pub n_bins: usize,
    /// Bin width; `xi · delta_omega` is the continuous-frequency value.
    pub delta_omega: f64,
    pub spectrum: SpectrumOfOtoc,
}

/// Fourier-space participation ratio of `C(t > t0) − ⟨C(t > t0)⟩`.
pub fn xi_otoc(series: &OtocSeries, t0: f64, opts: &XiOptions) -> Result<XiOtoc> {
    let w = series.after(t0);
    let n = w.len();
    if n < 256 {
        return Err(Error::invalid(format!("xi_otoc needs at least 256 samples after t0, got {n}")));
    }
    let mut sig = w.to_vec();
    subtract_mean(&mut sig);
    if let Some(win) = opts.detrend_window {
        if win < 2 {
            return Err(Error::invalid("detrend window must span at least 2 samples"));
        }
        let trend = moving_average(&sig, win);
        sig.iter_mut().zip(&trend).for_each(|(s, t)| *s -= t);
        subtract_mean(&mut sig);
    }
    if opts.taper == Taper::Hann {
        for (i, s) in sig.iter_mut().enumerate() {
            *s *= 0.5 - 0.5 * (2.0 * PI * i as f64 / (n - 1) as f64).cos();
        }
    }

    let mut buf: Vec<Complex64> = sig.iter().map(|&s| Complex64::new(s, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let n_bins = n / 2;
    let raw: Vec<f64> = buf[1..=n_bins].iter().map(|z| z.norm_sqr()).collect();
    let total: f64 = raw.iter().sum();
    let peak = w.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if !(total > 1e-28 * (peak * peak * n as f64 * n as f64).max(f64::MIN_POSITIVE)) {
        return Err(Error::Degenerate("signal vanishes after mean subtraction".into()));
    }
    let power: Vec<f64> = raw.iter().map(|p| p / total).collect();
    let xi = 1.0 / power.iter().map(|r| r * r).sum::<f64>();
    let delta_omega = 2.0 * PI / (n as f64 * series.dt);
    let omega = (1..=n_bins).map(|k| k as f64 * delta_omega).collect();
    Ok(XiOtoc { xi, n_bins, delta_omega, spectrum: SpectrumOfOtoc { omega, power } })
}

fn subtract_mean(v: &mut [f64]) {
    let m = v.iter().sum::<f64>() / v.len() as f64;
    v.iter_mut().for_each(|x| *x -= m);
}

/// Centered moving average, truncated at the edges.
fn moving_average(v: &[f64], win: usize) -> Vec<f64> {
    let n = v.len();
    let half = win / 2;
    let mut prefix = vec![0.0; n + 1];
    for i in 0..n {
        prefix[i + 1] = prefix[i] + v[i];
    }
    (0..n)
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + half + 1).min(n);
            (prefix[hi] - prefix[lo]) / (hi - lo) as f64
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormalizeMode {
    /// `v / max(v)`, used for `ξ_OTOC`.
    Max,
    /// `(1/v)/(1/min(v))`, used for `σ_OTOC`.
    InvMin,
}

/// Rescales one sweep of indicator values into `(0, 1]`.
pub fn normalize_sweep(values: &[f64], mode: NormalizeMode) -> Result<Vec<f64>> {
    if values.is_empty() {
        return Err(Error::invalid("cannot normalize an empty sweep"));
    }
    if values.iter().any(|v| !v.is_finite() || *v <= 0.0) {
        return Err(Error::invalid("sweep normalization needs finite positive values"));
    }
    Ok(match mode {
        NormalizeMode::Max => {
            let max = values.iter().cloned().fold(f64::MIN, f64::max);
            values.iter().map(|v| v / max).collect()
        }
        NormalizeMode::InvMin => {
            let min = values.iter().cloned().fold(f64::MAX, f64::min);
            values.iter().map(|v| min / v).collect()
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream_rng;
    use proptest::prelude::*;
    use rand_distr::{Distribution, StandardNormal};

    fn series(values: Vec<f64>, dt: f64) -> OtocSeries {
        OtocSeries::new(0.0, dt, values, SeriesMeta::default()).unwrap()
    }

    #[test]
    fn grid_validation() {
        assert!(OtocSeries::new(0.0, 0.0, vec![1.0], SeriesMeta::default()).is_err());
        assert!(OtocSeries::new(0.0, 1.0, vec![-1.0], SeriesMeta::default()).is_err());
        let t = [0.0, 0.5, 1.0, 1.6];
        assert!(OtocSeries::from_samples(&t, vec![0.0; 4], SeriesMeta::default()).is_err());
        let t = [0.0, 0.5, 1.0, 1.5];
        let s = OtocSeries::from_samples(&t, vec![0.0; 4], SeriesMeta::default()).unwrap();
        assert_eq!(s.after(0.5).len(), 2);
    }

    #[test]
    fn sigma_of_constant_and_sinusoid() {
        assert!(sigma_otoc(&series(vec![0.7; 500], 1.0), 10.0).unwrap() < 1e-13);
        let (m, a, w) = (5.0, 0.3, 0.731);
        let s = series((0..20_000).map(|i| m + a * (w * i as f64 * 0.1).sin()).collect(), 0.1);
        let sig = sigma_otoc(&s, 0.0).unwrap();
        let expected = a / (2f64.sqrt() * m);
        assert!((sig - expected).abs() < 0.01 * expected, "{sig} vs {expected}");
    }

    #[test]
    fn sigma_rejects_short_or_vanishing_windows() {
        assert!(sigma_otoc(&series(vec![1.0; 50], 1.0), 0.0).is_err());
        assert!(matches!(sigma_otoc(&series(vec![0.0; 500], 1.0), 0.0), Err(Error::Degenerate(_))));
    }

    #[test]
    fn xi_of_bin_centered_tones() {
        let n = 4096;
        let one = series((0..n).map(|i| 1.0 + (2.0 * PI * 37.0 * i as f64 / n as f64).cos()).collect(), 1.0);
        let r = xi_otoc(&one, -1.0, &XiOptions::default()).unwrap();
        assert!((r.xi - 1.0).abs() < 1e-9, "{}", r.xi);
        assert_eq!(r.n_bins, n / 2);
        assert!((r.spectrum.power.iter().sum::<f64>() - 1.0).abs() < 1e-10);

        let two = series(
            (0..n)
                .map(|i| {
                    let t = i as f64 / n as f64;
                    2.0 + (2.0 * PI * 101.0 * t).sin() + (2.0 * PI * 163.0 * t).cos()
                })
                .collect(),
            1.0,
        );
        let r = xi_otoc(&two, -1.0, &XiOptions::default()).unwrap();
        assert!((r.xi - 2.0).abs() < 0.2, "{}", r.xi);
    }

    /// Independent oracle: direct O(N²) DFT of white noise, averaged over
    /// realizations.
    fn white_noise_xi_oracle(n: usize, reps: usize) -> f64 {
        let mut total = 0.0;
        for r in 0..reps {
            let mut rng = stream_rng(2024, r as u64);
            let x: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
            let mean = x.iter().sum::<f64>() / n as f64;
            let p: Vec<f64> = (1..=n / 2)
                .map(|k| {
                    let (mut re, mut im) = (0.0, 0.0);
                    for (j, v) in x.iter().enumerate() {
                        let a = -2.0 * PI * (k * j) as f64 / n as f64;
                        re += (v - mean) * a.cos();
                        im += (v - mean) * a.sin();
                    }
                    re * re + im * im
                })
                .collect();
            let s: f64 = p.iter().sum();
            total += s * s / p.iter().map(|v| v * v).sum::<f64>();
        }
        total / reps as f64
    }

    #[test]
    fn xi_of_white_noise_matches_oracle() {
        let n = 1024;
        let oracle = white_noise_xi_oracle(n, 8);
        // Exponentially distributed bin powers give xi ≈ n_bins/2.
        assert!((oracle / (n / 2) as f64 - 0.5).abs() < 0.05, "oracle {oracle}");
        let mut rng = stream_rng(77, 0);
        let s = series((0..n).map(|_| 3.0 + 0.1 * { let z: f64 = StandardNormal.sample(&mut rng); z }).collect(), 1.0);
        let r = xi_otoc(&s, -1.0, &XiOptions::default()).unwrap();
        assert!((r.xi - oracle).abs() < 0.15 * oracle, "{} vs {oracle}", r.xi);
    }

    #[test]
    fn xi_rejects_flat_and_short_signals() {
        assert!(matches!(xi_otoc(&series(vec![0.4; 512], 1.0), -1.0, &XiOptions::default()), Err(Error::Degenerate(_))));
        assert!(xi_otoc(&series(vec![0.4; 100], 1.0), -1.0, &XiOptions::default()).is_err());
    }

    #[test]
    fn detrending_removes_a_slow_ramp() {
        let n = 4096;
        let s = series(
            (0..n)
                .map(|i| 1.0 + 1e-3 * i as f64 + 0.2 * (2.0 * PI * 300.0 * i as f64 / n as f64).sin())
                .collect(),
            1.0,
        );
        let raw = xi_otoc(&s, -1.0, &XiOptions::default()).unwrap();
        let opts = XiOptions { detrend_window: Some(64), ..Default::default() };
        let clean = xi_otoc(&s, -1.0, &opts).unwrap();
        assert!(clean.xi < 1.2, "{}", clean.xi);
        assert!(raw.xi > clean.xi);
        let hann = xi_otoc(&s, -1.0, &XiOptions { taper: Taper::Hann, ..opts }).unwrap();
        assert!(hann.xi < 3.0);
    }

    #[test]
    fn normalization_examples() {
        assert_eq!(normalize_sweep(&[2.0, 4.0, 8.0], NormalizeMode::Max).unwrap(), vec![0.25, 0.5, 1.0]);
        assert_eq!(normalize_sweep(&[2.0, 4.0, 8.0], NormalizeMode::InvMin).unwrap(), vec![1.0, 0.5, 0.25]);
        assert_eq!(normalize_sweep(&[3.0], NormalizeMode::Max).unwrap(), vec![1.0]);
        assert!(normalize_sweep(&[1.0, 0.0], NormalizeMode::InvMin).is_err());
        assert!(normalize_sweep(&[], NormalizeMode::Max).is_err());
    }

    fn noisy(seed: u64, n: usize) -> Vec<f64> {
        let mut rng = stream_rng(seed, 1);
        (0..n)
            .map(|i| 1.0 + 0.3 * (0.37 * i as f64).sin() + 0.05 * { let z: f64 = StandardNormal.sample(&mut rng); z })
            .collect()
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn sigma_is_scale_invariant(seed in 0u64..1000, alpha in 1e-3f64..1e3) {
            let v = noisy(seed, 600);
            let a = sigma_otoc(&series(v.clone(), 0.5), 10.0).unwrap();
            let b = sigma_otoc(&series(v.iter().map(|x| alpha * x).collect(), 0.5), 10.0).unwrap();
            prop_assert!((a - b).abs() < 1e-12 * a.max(1.0));
        }

        #[test]
        fn xi_is_shift_invariant_and_bounded(seed in 0u64..1000, c in 0.0f64..50.0) {
            let v = noisy(seed, 700);
            let opts = XiOptions::default();
            let a = xi_otoc(&series(v.clone(), 0.5), 20.0, &opts).unwrap();
            let b = xi_otoc(&series(v.iter().map(|x| x + c).collect(), 0.5), 20.0, &opts).unwrap();
            prop_assert!((a.xi - b.xi).abs() < 1e-10 * a.xi.max(1.0) * (1.0 + c));
            prop_assert!(a.xi >= 1.0 && a.xi <= a.n_bins as f64);
        }

        #[test]
        fn normalization_keeps_argmax(v in proptest::collection::vec(0.01f64..100.0, 1..30)) {
            let n = normalize_sweep(&v, NormalizeMode::Max).unwrap();
            let arg = |w: &[f64]| w.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).unwrap().0;
            prop_assert_eq!(arg(&v), arg(&n));
            prop_assert!(n.iter().all(|x| *x > 0.0 && *x <= 1.0));
        }
    }
}
