//! Leading-order short-time growth of spin-chain OTOCs from the nested
//! commutator expansion of `σ₀ᶻ(t)`, and a log-log power-law fitter to
//! compare numerical series against it.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::otoc::OtocSeries;
use crate::spin::{build_hamiltonian, SpinChainSpec, SpinDynamics, SpinFamily, SpinModel, SpinOtocRequest, TimeGrid};

fn factorial(n: u32) -> f64 {
    (1..=n).map(f64::from).product()
}

fn check_time(t: f64) -> Result<()> {
    if !(t >= 0.0) || !t.is_finite() {
        return Err(Error::invalid(format!("time must be finite and non-negative, got {t}")));
    }
    Ok(())
}

fn check_separation(l: u32) -> Result<()> {
    if l == 0 {
        return Err(Error::invalid("separation must be at least 1"));
    }
    Ok(())
}

/// `t^{2l} / (2 (l!)²)` for the random-field Heisenberg chain.
pub fn hbc_heisenberg(l: u32, t: f64) -> Result<f64> {
    check_separation(l)?;
    check_time(t)?;
    Ok(t.powi(2 * l as i32) / (2.0 * factorial(l).powi(2)))
}

/// `(B sinθ · t)^{2(2l+1)} / (2 ((2l+1)!)²)` for the tilted Ising chain.
pub fn hbc_tilted(l: u32, b: f64, theta: f64, t: f64) -> Result<f64> {
    check_separation(l)?;
    check_time(t)?;
    let n = 2 * l + 1;
    Ok((b * theta.sin() * t).powi(2 * n as i32) / (2.0 * factorial(n).powi(2)))
}

/// Perturbed XXZ: the Heisenberg law when `l = 1` or `λ = 0`, otherwise
/// `λ^{2(l−1)} t^{2(l−1)} / (2 ((l−1)!)²)`.
pub fn hbc_xxz(l: u32, lambda: f64, t: f64) -> Result<f64> {
    check_separation(l)?;
    check_time(t)?;
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(Error::invalid(format!("λ must be finite and non-negative, got {lambda}")));
    }
    if l == 1 || lambda == 0.0 {
        return hbc_heisenberg(l, t);
    }
    let m = l - 1;
    Ok((lambda * t).powi(2 * m as i32) / (2.0 * factorial(m).powi(2)))
}

/// Exponent of the leading power law for a model and separation.
pub fn hbc_exponent(family: SpinFamily, l: u32, lambda: f64) -> Result<f64> {
    check_separation(l)?;
    Ok(match family {
        SpinFamily::RandomFieldHeisenberg => 2.0 * l as f64,
        SpinFamily::TiltedIsing => 2.0 * (2 * l + 1) as f64,
        SpinFamily::PerturbedXxz if l == 1 || lambda == 0.0 => 2.0 * l as f64,
        SpinFamily::PerturbedXxz => 2.0 * (l - 1) as f64,
    })
}

/// `C ≈ prefactor · t^exponent` over `[t_min, t_max]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerLawFit {
    pub exponent: f64,
    pub prefactor: f64,
    pub t_min: f64,
    pub t_max: f64,
    /// RMS deviation of `ln C` from the fitted line.
    pub residual: f64,
    pub points: usize,
}

/// Least-squares line through `(ln t, ln C)` for samples with
/// `t_min ≤ t ≤ t_max`.
pub fn fit_power_law(series: &OtocSeries, window: (f64, f64)) -> Result<PowerLawFit> {
    let (t_min, t_max) = window;
    if !(t_min > 0.0) || !(t_max > t_min) {
        return Err(Error::invalid(format!("fit window ({t_min}, {t_max}) must satisfy 0 < t_min < t_max")));
    }
    let pts: Vec<(f64, f64)> = series
        .times()
        .zip(&series.values)
        .filter(|(t, _)| *t >= t_min * (1.0 - 1e-12) && *t <= t_max * (1.0 + 1e-12))
        .map(|(t, &c)| (t, c))
        .collect();
    if pts.len() < 10 {
        return Err(Error::invalid(format!("fit window holds {} samples, at least 10 are needed", pts.len())));
    }
    if let Some((t, c)) = pts.iter().find(|(_, c)| !(*c > 0.0)) {
        return Err(Error::invalid(format!("non-positive correlator {c} at t = {t} inside the fit window")));
    }
    let n = pts.len() as f64;
    let xs: Vec<f64> = pts.iter().map(|(t, _)| t.ln()).collect();
    let ys: Vec<f64> = pts.iter().map(|(_, c)| c.ln()).collect();
    let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residual = (xs.iter().zip(&ys).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum::<f64>() / n).sqrt();
    Ok(PowerLawFit {
        exponent: slope,
        prefactor: intercept.exp(),
        t_min: pts[0].0,
        t_max: pts[pts.len() - 1].0,
        residual,
        points: pts.len(),
    })
}

/// Bounds of the automatic fit window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShortTimeWindow {
    pub t_min: f64,
    pub t_max: f64,
    /// Samples whose prediction reaches this value are excluded.
    pub max_prediction: f64,
    /// Samples below this value are treated as roundoff.
    pub min_correlator: f64,
}

impl Default for ShortTimeWindow {
    fn default() -> Self {
        ShortTimeWindow { t_min: 0.05, t_max: 0.3, max_prediction: 0.1, min_correlator: 1e-22 }
    }
}

/// Span of the samples inside `bounds` whose prediction stays below the
/// ceiling and whose value clears the floor.
pub fn hbc_window(series: &OtocSeries, prediction: impl Fn(f64) -> f64, bounds: &ShortTimeWindow) -> Result<(f64, f64)> {
    let inside: Vec<f64> = series
        .times()
        .zip(&series.values)
        .filter(|(t, c)| {
            *t >= bounds.t_min * (1.0 - 1e-12)
                && *t <= bounds.t_max * (1.0 + 1e-12)
                && **c > bounds.min_correlator
                && prediction(*t) < bounds.max_prediction
        })
        .map(|(t, _)| t)
        .collect();
    match (inside.first(), inside.last()) {
        (Some(&a), Some(&b)) if b > a => Ok((a, b)),
        _ => Err(Error::invalid("no samples satisfy the short-time window conditions")),
    }
}

/// One row of the short-time comparison.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShortTimeReport {
    pub separation: u32,
    pub predicted_exponent: f64,
    pub fit: PowerLawFit,
    /// Fitted prefactor over the closed-form one.
    pub prefactor_ratio: f64,
}

/// Fits `series` inside its automatic window and compares with `prediction`,
/// a pure power law `a·t^predicted_exponent`.
pub fn compare_with_hbc(
    series: &OtocSeries,
    separation: u32,
    predicted_exponent: f64,
    prediction: impl Fn(f64) -> f64,
    bounds: &ShortTimeWindow,
) -> Result<ShortTimeReport> {
    let window = hbc_window(series, &prediction, bounds)?;
    let fit = fit_power_law(series, window)?;
    let predicted_prefactor = prediction(1.0);
    Ok(ShortTimeReport { separation, predicted_exponent, fit, prefactor_ratio: fit.prefactor / predicted_prefactor })
}

/// Closed-form prediction for a chain model at separation `l`.
pub fn hbc_prediction(model: &SpinModel, l: u32, t: f64) -> Result<f64> {
    match *model {
        SpinModel::RandomFieldHeisenberg { .. } => hbc_heisenberg(l, t),
        SpinModel::TiltedIsing { b, theta, .. } => hbc_tilted(l, b, theta, t),
        SpinModel::PerturbedXxz { lambda, .. } => hbc_xxz(l, lambda, t),
    }
}

pub fn hbc_model_exponent(model: &SpinModel, l: u32) -> Result<f64> {
    let lambda = match *model {
        SpinModel::PerturbedXxz { lambda, .. } => lambda,
        _ => 0.0,
    };
    hbc_exponent(model.family(), l, lambda)
}

/// Default grid for short-time studies: `0..=0.3` in steps of `0.005`.
pub fn short_time_grid() -> TimeGrid {
    TimeGrid { start: 0.0, end: 0.3, dt: 0.005 }
}

/// Evolves `σ₀ᶻ` on `spec` once and compares `C_zz(l, t)` with the closed
/// form for every requested separation.
pub fn short_time_study(
    spec: &SpinChainSpec,
    separations: &[u32],
    grid: TimeGrid,
    bounds: &ShortTimeWindow,
) -> Result<Vec<ShortTimeReport>> {
    let (h, basis) = build_hamiltonian(spec)?;
    let dynamics = SpinDynamics::new(h.view())?;
    separations
        .iter()
        .map(|&l| {
            let series = dynamics.otoc(&basis, &SpinOtocRequest::zz(l as usize, grid))?;
            let exponent = hbc_model_exponent(&spec.model, l)?;
            compare_with_hbc(&series, l, exponent, |t| hbc_prediction(&spec.model, l, t).unwrap_or(f64::NAN), bounds)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::otoc::SeriesMeta;
    use crate::spin::{pauli_matrix, PauliAxis, SectorBasis};
    use ndarray::Array2;
    use num_complex::Complex64;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn close(a: f64, b: f64, rel: f64) -> bool {
        (a - b).abs() <= rel * b.abs()
    }

    #[test]
    fn closed_form_values() {
        assert!(close(hbc_heisenberg(1, 0.1).unwrap(), 0.005, 1e-12));
        assert!(close(hbc_heisenberg(2, 0.1).unwrap(), 1.25e-5, 1e-12));
        assert_eq!(hbc_heisenberg(3, 0.0).unwrap(), 0.0);
        assert!(hbc_heisenberg(0, 0.1).is_err());
        assert_eq!(hbc_tilted(1, 2.0, 0.0, 0.5).unwrap(), 0.0);
        assert!(close(hbc_tilted(1, 2.0, PI / 2.0, 0.1).unwrap(), 64e-6 / 72.0, 1e-12));
        assert_eq!(hbc_exponent(SpinFamily::TiltedIsing, 2, 0.0).unwrap(), 10.0);
        for lambda in [0.0, 0.3, 1.0] {
            assert!(close(hbc_xxz(1, lambda, 0.1).unwrap(), 0.005, 1e-12));
        }
        assert!(close(hbc_xxz(3, 0.0, 0.1).unwrap(), 1e-6 / 72.0, 1e-12));
        assert!(close(hbc_xxz(3, 0.5, 0.1).unwrap(), 7.8125e-7, 1e-12));
    }

    fn synthetic(f: impl Fn(f64) -> f64, dt: f64, n: usize) -> OtocSeries {
        let values = (0..n).map(|i| f(i as f64 * dt)).collect();
        OtocSeries::new(0.0, dt, values, SeriesMeta::default()).unwrap()
    }

    #[test]
    fn exact_power_law_is_recovered() {
        let s = synthetic(|t| 3.0 * t.powi(5), 0.01, 200);
        let fit = fit_power_law(&s, (0.05, 1.5)).unwrap();
        assert!((fit.exponent - 5.0).abs() < 1e-6);
        assert!((fit.prefactor - 3.0).abs() < 1e-6);
        assert!(fit.residual < 1e-10);
    }

    #[test]
    fn fit_rejects_bad_windows() {
        let s = synthetic(|t| t * t, 0.01, 100);
        assert!(fit_power_law(&s, (0.0, 0.5)).is_err());
        assert!(fit_power_law(&s, (0.1, 0.12)).is_err());
        let s = synthetic(|t| if t < 0.3 { 0.0 } else { t }, 0.01, 100);
        assert!(fit_power_law(&s, (0.1, 0.9)).is_err());
    }

    #[test]
    fn automatic_window_respects_bounds() {
        let s = synthetic(|t| t.powi(4), 0.01, 200);
        let wide = ShortTimeWindow { t_min: 0.0, t_max: 2.0, max_prediction: 0.1, min_correlator: 1e-6 };
        let (a, b) = hbc_window(&s, |t| t.powi(4), &wide).unwrap();
        assert!((a - 0.04).abs() < 1e-9 && (b - 0.56).abs() < 1e-9);
        let (a, b) = hbc_window(&s, |t| t.powi(4), &ShortTimeWindow::default()).unwrap();
        assert!((a - 0.05).abs() < 1e-9 && (b - 0.3).abs() < 1e-9);
    }

    fn comm(a: &Array2<Complex64>, b: &Array2<Complex64>) -> Array2<Complex64> {
        a.dot(b) - b.dot(a)
    }

    fn max_abs(a: &Array2<Complex64>) -> f64 {
        a.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    fn real(h: &Array2<f64>) -> Array2<Complex64> {
        h.mapv(|x| Complex64::new(x, 0.0))
    }

    fn paulis(basis: &SectorBasis, site: usize) -> [Array2<Complex64>; 3] {
        [PauliAxis::X, PauliAxis::Y, PauliAxis::Z].map(|a| pauli_matrix(basis, site, a).unwrap())
    }

    #[test]
    fn heisenberg_commutator_identities() {
        let l = 4;
        let spec = SpinChainSpec::new(l, SpinModel::heisenberg(0.9, 3, 1));
        let (h, basis) = build_hamiltonian(&spec).unwrap();
        let h = real(&h);
        let [x0, y0, z0] = paulis(&basis, 0);
        let [x1, y1, z1] = paulis(&basis, 1);
        let i = Complex64::i();
        let first = comm(&h, &z0);
        let expect = (x0.dot(&y1) - y0.dot(&x1)).mapv(|z| z * i * 0.5);
        assert!(max_abs(&(&first - &expect)) < 1e-12);

        // The second-order term splits into the two-site part below and the
        // spill-over of the next bond onto site 1.
        let fields = crate::spin::random_fields(l, 0.9, 3, 1);
        let flip = x0.dot(&x1) + y0.dot(&y1);
        let two_site = (&z0 - &z1).mapv(|z| z * 0.5) - flip.mapv(|z| z * 0.5 * (fields[0] - fields[1]));
        let [x2, y2, z2] = paulis(&basis, 2);
        let [xs1, ys1, zs1] = [&x1, &y1, &z1];
        let bond12 = (xs1.dot(&x2) + ys1.dot(&y2) + zs1.dot(&z2)).mapv(|z| z * 0.25);
        let second = comm(&h, &first);
        assert!(max_abs(&(&second - &two_site - &comm(&bond12, &first))) < 1e-12);
    }

    #[test]
    fn tilted_commutator_identities() {
        let (b, j, theta) = (2.0, 2.0, 0.37 * PI);
        let spec = SpinChainSpec::new(4, SpinModel::TiltedIsing { j, b, theta });
        let (h, basis) = build_hamiltonian(&spec).unwrap();
        let h = real(&h);
        let [_, y0, z0] = paulis(&basis, 0);
        let first = comm(&h, &z0);
        let expect = y0.mapv(|z| z * Complex64::new(0.0, -b * theta.sin()));
        assert!(max_abs(&(&first - &expect)) < 1e-12);
        // σ₀ʸ component of the third-order term.
        let third = comm(&h, &comm(&h, &first));
        let d = basis.dim() as f64;
        let coef = y0.dot(&third).diag().sum() / d;
        let expect = Complex64::new(0.0, -b.powi(3) * theta.sin() * (j * j / (4.0 * b * b) + 1.0));
        assert!((coef - expect).norm() < 1e-12, "{coef} vs {expect}");
    }

    #[test]
    fn exponents_do_not_depend_on_chaos() {
        for h in [0.05, 0.5, 3.0] {
            let spec = SpinChainSpec::new(7, SpinModel::heisenberg(h, 9, 0)).with_sector(3);
            let r = short_time_study(&spec, &[1, 2], short_time_grid(), &ShortTimeWindow::default()).unwrap();
            assert!((r[0].fit.exponent - 2.0).abs() < 0.2 && (r[1].fit.exponent - 4.0).abs() < 0.2);
        }
    }

    #[test]
    fn unit_separation_growth_ignores_lambda() {
        let grid = TimeGrid { start: 0.0, end: 0.1, dt: 0.01 };
        let series: Vec<Vec<f64>> = [0.0, 0.5, 1.0]
            .iter()
            .map(|&lambda| {
                let (h, basis) = build_hamiltonian(&SpinChainSpec::new(9, SpinModel::xxz(lambda)).with_sector(5)).unwrap();
                SpinDynamics::new(h.view()).unwrap().otoc(&basis, &SpinOtocRequest::zz(1, grid)).unwrap().values
            })
            .collect();
        for i in 1..grid.len() {
            for s in &series[1..] {
                assert!((s[i] / series[0][i] - 1.0).abs() < 0.02);
            }
        }
    }

    proptest! {
        #[test]
        fn xxz_is_lambda_independent_at_unit_separation(lambda in 0.0f64..3.0, t in 0.0f64..2.0) {
            prop_assert_eq!(hbc_xxz(1, lambda, t).unwrap(), hbc_heisenberg(1, t).unwrap());
        }

        #[test]
        fn fitted_exponent_is_scale_free(a in 0.01f64..100.0, k in 1.0f64..12.0) {
            let s = synthetic(|t| a * t.powf(k), 0.01, 120);
            let fit = fit_power_law(&s, (0.02, 1.1)).unwrap();
            prop_assert!((fit.exponent - k).abs() < 1e-8);
            prop_assert!((fit.prefactor / a - 1.0).abs() < 1e-8);
        }
    }
}
