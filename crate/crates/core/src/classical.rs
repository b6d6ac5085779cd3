//! Classical standard and Harper maps on the unit torus.
//!
//! Besides plain iteration this module estimates Lyapunov exponents from the
//! tangent map and measures the chaotic fraction of phase space with a
//! return-time Monte Carlo: an initial condition whose orbit has not come
//! back within `delta` of its starting point after `t_max` steps is counted
//! as chaotic.

use std::f64::consts::PI;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::stream_rng;

const TWO_PI: f64 = 2.0 * PI;

/// Number of initial conditions drawn from one random stream. Fixed so that
/// results do not depend on the worker count.
const SHARD: usize = 1024;

/// A point on the unit 2-torus, both coordinates in `[0, 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhasePoint {
    pub x: f64,
    pub p: f64,
}

impl PhasePoint {
    pub fn new(x: f64, p: f64) -> Self {
        PhasePoint { x: unit_mod(x), p: unit_mod(p) }
    }

    /// Minimum-image Euclidean distance on the flat torus.
    pub fn torus_distance(&self, other: &PhasePoint) -> f64 {
        let dx = min_image(self.x - other.x);
        let dp = min_image(self.p - other.p);
        dx.hypot(dp)
    }
}

fn unit_mod(v: f64) -> f64 {
    let r = v.rem_euclid(1.0);
    // rem_euclid can round up to exactly 1.0 for tiny negative inputs
    if r >= 1.0 {
        0.0
    } else {
        r
    }
}

fn min_image(d: f64) -> f64 {
    let d = d.abs() % 1.0;
    d.min(1.0 - d)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MapFamily {
    Standard,
    Harper,
}

impl std::str::FromStr for MapFamily {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "standard" | "sm" => Ok(MapFamily::Standard),
            "harper" | "hm" => Ok(MapFamily::Harper),
            other => Err(Error::invalid(format!("unknown map family '{other}'"))),
        }
    }
}

impl std::fmt::Display for MapFamily {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            MapFamily::Standard => "standard",
            MapFamily::Harper => "harper",
        })
    }
}

/// Which classical map to iterate and with what kick strengths.
///
/// The standard map uses `k1` only. The Harper map kicks position with `k1`
/// and momentum with `k2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassicalMapSpec {
    pub family: MapFamily,
    pub k1: f64,
    pub k2: f64,
}

impl ClassicalMapSpec {
    pub fn standard(k: f64) -> Self {
        ClassicalMapSpec { family: MapFamily::Standard, k1: k, k2: k }
    }

    pub fn harper(k: f64) -> Self {
        ClassicalMapSpec { family: MapFamily::Harper, k1: k, k2: k }
    }

    pub fn new(family: MapFamily, k: f64) -> Self {
        ClassicalMapSpec { family, k1: k, k2: k }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.k1 >= 0.0 && self.k2 >= 0.0) || !self.k1.is_finite() || !self.k2.is_finite() {
            return Err(Error::invalid(format!(
                "kick strengths must be finite and non-negative (K1 = {}, K2 = {})",
                self.k1, self.k2
            )));
        }
        Ok(())
    }

    pub fn step(&self, pt: PhasePoint) -> PhasePoint {
        match self.family {
            MapFamily::Standard => step_standard(pt, self.k1),
            MapFamily::Harper => step_harper(pt, self.k1, self.k2),
        }
    }

    /// Jacobian `∂(x', p')/∂(x, p)` of one step, rows `(x', p')`.
    pub fn jacobian(&self, pt: PhasePoint) -> [[f64; 2]; 2] {
        match self.family {
            MapFamily::Standard => {
                let kc = self.k1 * (TWO_PI * pt.x).cos();
                [[1.0 + kc, 1.0], [kc, 1.0]]
            }
            MapFamily::Harper => {
                let a = -TWO_PI * self.k1 * (TWO_PI * pt.x).cos();
                let p_next = unit_mod(pt.p - self.k1 * (TWO_PI * pt.x).sin());
                let b = TWO_PI * self.k2 * (TWO_PI * p_next).cos();
                [[1.0 + a * b, b], [a, 1.0]]
            }
        }
    }

    pub fn orbit(&self, start: PhasePoint, n: usize) -> Vec<PhasePoint> {
        let mut out = Vec::with_capacity(n + 1);
        let mut pt = start;
        out.push(pt);
        for _ in 0..n {
            pt = self.step(pt);
            out.push(pt);
        }
        out
    }
}

/// One step of the standard map:
/// `p' = p + K/(2π)·sin(2πx)`, `x' = x + p'`, both mod 1.
pub fn step_standard(pt: PhasePoint, k: f64) -> PhasePoint {
    let p = unit_mod(pt.p + k / TWO_PI * (TWO_PI * pt.x).sin());
    let x = unit_mod(pt.x + p);
    PhasePoint { x, p }
}

/// One step of the Harper map:
/// `p' = p − K1·sin(2πx)`, `x' = x + K2·sin(2πp')`, both mod 1.
pub fn step_harper(pt: PhasePoint, k1: f64, k2: f64) -> PhasePoint {
    let p = unit_mod(pt.p - k1 * (TWO_PI * pt.x).sin());
    let x = unit_mod(pt.x + k2 * (TWO_PI * p).sin());
    PhasePoint { x, p }
}

/// Largest Lyapunov exponent (per step) of the orbit through `start`,
/// from the tangent map with renormalization at every step.
pub fn lyapunov_exponent(spec: &ClassicalMapSpec, start: PhasePoint, n_steps: usize) -> Result<f64> {
    spec.validate()?;
    if n_steps < 100 {
        return Err(Error::invalid(format!("lyapunov_exponent needs n_steps >= 100, got {n_steps}")));
    }
    let mut pt = start;
    let mut v = [1.0f64, 1.0f64];
    let mut norm = v[0].hypot(v[1]);
    v = [v[0] / norm, v[1] / norm];
    let mut sum_log = 0.0;
    for _ in 0..n_steps {
        let j = spec.jacobian(pt);
        let w = [j[0][0] * v[0] + j[0][1] * v[1], j[1][0] * v[0] + j[1][1] * v[1]];
        norm = w[0].hypot(w[1]);
        sum_log += norm.ln();
        v = [w[0] / norm, w[1] / norm];
        pt = spec.step(pt);
    }
    Ok(sum_log / n_steps as f64)
}

/// Settings for the return-time estimate of the chaotic area.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AreaSamplerConfig {
    pub n_tot: usize,
    pub t_max_list: Vec<usize>,
    pub delta: f64,
    pub seed: u64,
}

impl AreaSamplerConfig {
    /// Twenty contiguous caps `start, start+1, …, start+19`.
    pub fn contiguous(n_tot: usize, start: usize, delta: f64, seed: u64) -> Self {
        AreaSamplerConfig { n_tot, t_max_list: (start..start + 20).collect(), delta, seed }
    }

    /// Sweep defaults for each family.
    pub fn default_for(family: MapFamily, seed: u64) -> Self {
        match family {
            MapFamily::Standard => Self::contiguous(35_000, 490, DEFAULT_DELTA, seed),
            MapFamily::Harper => Self::contiguous(35_000, 90, DEFAULT_DELTA, seed),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_tot == 0 {
            return Err(Error::invalid("n_tot must be at least 1"));
        }
        if self.t_max_list.is_empty() || self.t_max_list.iter().any(|&t| t == 0) {
            return Err(Error::invalid("t_max_list must be nonempty with every cap >= 1"));
        }
        if !(self.delta > 0.0 && self.delta < 0.5) {
            return Err(Error::invalid(format!("delta must lie in (0, 0.5), got {}", self.delta)));
        }
        Ok(())
    }
}

/// Default return-neighborhood radius.
pub const DEFAULT_DELTA: f64 = 1e-2;

/// Outcome of the chaotic-area sampler.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AreaEstimate {
    /// Mean of `r_ch` over all caps.
    pub r_ch: f64,
    /// `r_ch` for each entry of `t_max_list`.
    pub per_t_max: Vec<f64>,
    /// Binomial standard error of the mean estimate.
    pub stderr: f64,
    pub n_tot: usize,
    pub delta: f64,
}

impl AreaEstimate {
    pub fn r_reg(&self) -> f64 {
        1.0 - self.r_ch
    }
}

/// First `t` in `1..=t_cap` at which the orbit is within `delta` of its
/// starting point, or `None`.
pub fn return_time(spec: &ClassicalMapSpec, start: PhasePoint, delta: f64, t_cap: usize) -> Option<usize> {
    let mut pt = start;
    for t in 1..=t_cap {
        pt = spec.step(pt);
        if pt.torus_distance(&start) < delta {
            return Some(t);
        }
    }
    None
}

/// Return times (capped at the largest `t_max`) of the `n_tot` sampled
/// initial conditions, in sample order.
pub fn sample_return_times(spec: &ClassicalMapSpec, cfg: &AreaSamplerConfig) -> Result<Vec<Option<usize>>> {
    spec.validate()?;
    cfg.validate()?;
    let t_cap = *cfg.t_max_list.iter().max().expect("validated nonempty");
    let n_shards = cfg.n_tot.div_ceil(SHARD);
    let shards: Vec<Vec<Option<usize>>> = (0..n_shards)
        .into_par_iter()
        .map(|s| {
            let mut rng = stream_rng(cfg.seed, s as u64);
            let len = SHARD.min(cfg.n_tot - s * SHARD);
            (0..len)
                .map(|_| {
                    let start = PhasePoint::new(rng.random::<f64>(), rng.random::<f64>());
                    return_time(spec, start, cfg.delta, t_cap)
                })
                .collect()
        })
        .collect();
    Ok(shards.into_iter().flatten().collect())
}

/// Chaotic fraction `r_ch = n_{t_max}/n_tot`, averaged over `t_max_list`.
pub fn chaotic_area_ratio(spec: &ClassicalMapSpec, cfg: &AreaSamplerConfig) -> Result<AreaEstimate> {
    let times = sample_return_times(spec, cfg)?;
    let n = cfg.n_tot as f64;
    let per_t_max: Vec<f64> = cfg
        .t_max_list
        .iter()
        .map(|&cap| {
            let stayed = times.iter().filter(|t| t.is_none_or(|t| t > cap)).count();
            stayed as f64 / n
        })
        .collect();
    let r_ch = per_t_max.iter().sum::<f64>() / per_t_max.len() as f64;
    let stderr = (r_ch * (1.0 - r_ch) / n).sqrt();
    Ok(AreaEstimate { r_ch, per_t_max, stderr, n_tot: cfg.n_tot, delta: cfg.delta })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;

    fn close(a: PhasePoint, x: f64, p: f64) -> bool {
        PhasePoint::new(x, p).torus_distance(&a) < 1e-12
    }

    #[test]
    fn standard_map_examples() {
        assert!(close(step_standard(PhasePoint::new(0.0, 0.0), 2.0), 0.0, 0.0));
        assert!(close(step_standard(PhasePoint::new(0.25, 0.5), 0.0), 0.75, 0.5));
        // sin(2π·0.25) = 1, so p' = 1 ≡ 0 and x' = x.
        assert!(close(step_standard(PhasePoint::new(0.25, 0.0), TWO_PI), 0.25, 0.0));
    }

    #[test]
    fn harper_map_examples() {
        assert!(close(step_harper(PhasePoint::new(0.0, 0.0), 1.0, 1.0), 0.0, 0.0));
        assert!(close(step_harper(PhasePoint::new(0.25, 0.0), 0.5, 0.0), 0.25, 0.5));
    }

    #[test]
    fn torus_distance_uses_minimum_image() {
        let a = PhasePoint::new(0.99, 0.01);
        let b = PhasePoint::new(0.01, 0.99);
        assert!((a.torus_distance(&b) - (0.02f64).hypot(0.02)).abs() < 1e-12);
    }

    #[test]
    fn jacobian_determinant_is_one() {
        let mut rng = stream_rng(11, 0);
        for spec in [ClassicalMapSpec::standard(3.7), ClassicalMapSpec::harper(0.8), ClassicalMapSpec {
            family: MapFamily::Harper,
            k1: 0.3,
            k2: 1.9,
        }] {
            for _ in 0..10_000 {
                let pt = PhasePoint::new(rng.random(), rng.random());
                let j = spec.jacobian(pt);
                let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
                assert!((det - 1.0).abs() < 1e-12, "{spec:?} det {det}");
            }
        }
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        let h = 1e-6;
        for spec in [ClassicalMapSpec::standard(1.3), ClassicalMapSpec::harper(0.4)] {
            let pt = PhasePoint::new(0.31, 0.17);
            let j = spec.jacobian(pt);
            let fx = |x: f64, p: f64| {
                let q = spec.step(PhasePoint { x, p });
                (q.x, q.p)
            };
            let (xp, pp) = fx(pt.x + h, pt.p);
            let (xm, pm) = fx(pt.x - h, pt.p);
            assert!((min_signed(xp - xm) / (2.0 * h) - j[0][0]).abs() < 1e-5);
            assert!((min_signed(pp - pm) / (2.0 * h) - j[1][0]).abs() < 1e-5);
            let (xp, pp) = fx(pt.x, pt.p + h);
            let (xm, pm) = fx(pt.x, pt.p - h);
            assert!((min_signed(xp - xm) / (2.0 * h) - j[0][1]).abs() < 1e-5);
            assert!((min_signed(pp - pm) / (2.0 * h) - j[1][1]).abs() < 1e-5);
        }
    }

    fn min_signed(d: f64) -> f64 {
        d - d.round()
    }

    #[test]
    fn lyapunov_regular_and_chaotic() {
        let free = lyapunov_exponent(&ClassicalMapSpec::standard(0.0), PhasePoint::new(0.3, 0.1234), 20_000).unwrap();
        assert!(free.abs() < 1e-2, "{free}");

        let island = lyapunov_exponent(&ClassicalMapSpec::harper(0.063), PhasePoint::new(0.05, 0.05), 20_000).unwrap();
        assert!(island.abs() < 1e-2, "{island}");

        let spec = ClassicalMapSpec::standard(10.0);
        let mut rng = stream_rng(5, 0);
        let mean: f64 = (0..20)
            .map(|_| lyapunov_exponent(&spec, PhasePoint::new(rng.random(), rng.random()), 20_000).unwrap())
            .sum::<f64>()
            / 20.0;
        let expected = (10.0f64 / 2.0).ln();
        assert!((mean - expected).abs() < 0.1 * expected, "{mean} vs {expected}");
    }

    #[test]
    fn lyapunov_rejects_short_runs() {
        assert!(lyapunov_exponent(&ClassicalMapSpec::standard(1.0), PhasePoint::new(0.1, 0.1), 10).is_err());
    }

    #[test]
    fn sampler_config_validation() {
        let mut cfg = AreaSamplerConfig::contiguous(100, 10, 0.01, 1);
        assert!(cfg.validate().is_ok());
        cfg.delta = 0.5;
        assert!(cfg.validate().is_err());
        cfg.delta = 0.01;
        cfg.t_max_list = vec![];
        assert!(cfg.validate().is_err());
        cfg.t_max_list = vec![0];
        assert!(cfg.validate().is_err());
        cfg.t_max_list = vec![5];
        cfg.n_tot = 0;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn sampler_is_deterministic() {
        let spec = ClassicalMapSpec::standard(2.0);
        let cfg = AreaSamplerConfig::contiguous(3000, 50, 0.02, 99);
        let a = chaotic_area_ratio(&spec, &cfg).unwrap();
        let b = chaotic_area_ratio(&spec, &cfg).unwrap();
        assert_eq!(a.r_ch.to_bits(), b.r_ch.to_bits());
        let c = chaotic_area_ratio(&spec, &AreaSamplerConfig { seed: 100, ..cfg }).unwrap();
        assert_ne!(a.per_t_max, c.per_t_max);
    }

    #[test]
    fn island_points_return_quickly() {
        // The elliptic fixed point (1/2, 0) of the standard map at K = 0.5.
        let spec = ClassicalMapSpec::standard(0.5);
        let mut rng = stream_rng(3, 0);
        for _ in 0..200 {
            let r = 0.05 * rng.random::<f64>();
            let a = TWO_PI * rng.random::<f64>();
            let start = PhasePoint::new(0.5 + r * a.cos(), r * a.sin());
            let t = return_time(&spec, start, 1e-2, 50);
            assert!(t.is_some(), "{start:?} did not return");
        }
    }

    #[test]
    fn weak_kick_is_nearly_all_regular() {
        // Grid oracle: classify initial conditions by their tangent-map exponent.
        let spec = ClassicalMapSpec::standard(0.05);
        let n = 30;
        let mut chaotic = 0;
        for i in 0..n {
            for j in 0..n {
                let pt = PhasePoint::new((i as f64 + 0.5) / n as f64, (j as f64 + 0.5) / n as f64);
                if lyapunov_exponent(&spec, pt, 2000).unwrap() > 0.02 {
                    chaotic += 1;
                }
            }
        }
        let oracle = chaotic as f64 / (n * n) as f64;
        assert!(oracle < 0.05, "oracle {oracle}");
        let est = chaotic_area_ratio(&spec, &AreaSamplerConfig::contiguous(5000, 490, DEFAULT_DELTA, 4)).unwrap();
        assert!(est.r_ch < 0.05, "r_ch {}", est.r_ch);
    }

    proptest! {
        #[test]
        fn iterates_stay_on_torus(x in -3.0f64..3.0, p in -3.0f64..3.0, k in 0.0f64..12.0, harper in any::<bool>()) {
            let spec = if harper { ClassicalMapSpec::harper(k / 4.0) } else { ClassicalMapSpec::standard(k) };
            let mut pt = PhasePoint::new(x, p);
            for _ in 0..200 {
                pt = spec.step(pt);
                prop_assert!((0.0..1.0).contains(&pt.x) && (0.0..1.0).contains(&pt.p));
            }
        }
    }
}
