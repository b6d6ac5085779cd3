//! Quantized torus maps: Floquet operators, Schwinger observables and the
//! infinite-temperature OTOC `C(t) = (1/D)·Tr([X(t), P]†[X(t), P])`.
//!
//! Positions `q` and momenta `p` run over `0..D` with `ħ = 1/(2πD)`; the
//! basis change is the unitary DFT `⟨p|q⟩ = exp(−2πi·qp/D)/√D`. A kicked map
//! is stored as its momentum-diagonal kinetic phases `T_p` and
//! position-diagonal kick phases `V_q`, with `U = F†·diag(T)·F·diag(V)`.

use std::f64::consts::PI;
use std::sync::OnceLock;

use ndarray::{Array2, ArrayView2, Axis};
use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::classical::MapFamily;
use crate::error::{Error, Result};
use crate::linalg::{antihermitian_part_norm_sqr, unitarity_defect, unitary_eigen, TorusFft, UnitaryEigen};
use crate::otoc::{OtocSeries, SeriesMeta};
use crate::spectral::{SpectrumKind, SpectrumSample};
use crate::symmetry::{Parity, ReflectionSector};

/// Construction tolerance on `‖U†U − 1‖`.
pub const UNITARITY_TOL: f64 = 1e-10;
/// Tolerance above which the OTOC refuses an operator.
pub const OTOC_UNITARITY_TOL: f64 = 1e-8;

/// `D`-dimensional Hilbert space of a quantized unit torus.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TorusHilbert {
    dim: usize,
}

impl TorusHilbert {
    pub fn new(dim: usize) -> Result<Self> {
        if dim < 2 {
            return Err(Error::invalid(format!("torus dimension must be at least 2, got {dim}")));
        }
        Ok(TorusHilbert { dim })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn hbar_eff(&self) -> f64 {
        1.0 / (2.0 * PI * self.dim as f64)
    }

    /// The reflection `q ↦ −q mod D`.
    pub fn reflect(&self, q: usize) -> usize {
        (self.dim - q) % self.dim
    }

    /// Dense DFT matrix `F[p, q] = ⟨p|q⟩`.
    pub fn dft_matrix(&self) -> Array2<Complex64> {
        let n = self.dim;
        let s = 1.0 / (n as f64).sqrt();
        Array2::from_shape_fn((n, n), |(p, q)| {
            Complex64::from_polar(s, -2.0 * PI * ((p * q) % n) as f64 / n as f64)
        })
    }
}

/// Diagonal phases of a kicked map.
#[derive(Debug, Clone, PartialEq)]
pub struct KickFactors {
    /// Momentum-diagonal phases `T_p`.
    pub kinetic: Vec<Complex64>,
    /// Position-diagonal phases `V_q`.
    pub potential: Vec<Complex64>,
}

/// One-period evolution operator with a lazily cached eigendecomposition.
#[derive(Debug)]
pub struct FloquetOperator {
    matrix: Array2<Complex64>,
    kicks: Option<KickFactors>,
    eigen: OnceLock<UnitaryEigen>,
}

impl Clone for FloquetOperator {
    fn clone(&self) -> Self {
        let eigen = OnceLock::new();
        if let Some(e) = self.eigen.get() {
            let _ = eigen.set(e.clone());
        }
        FloquetOperator { matrix: self.matrix.clone(), kicks: self.kicks.clone(), eigen }
    }
}

impl FloquetOperator {
    /// Wraps a dense matrix after checking `‖U†U − 1‖ < 1e-10`.
    pub fn from_matrix(matrix: Array2<Complex64>) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() {
            return Err(Error::invalid("Floquet operator must be a square matrix"));
        }
        let defect = unitarity_defect(matrix.view());
        if defect > UNITARITY_TOL {
            return Err(Error::NotUnitary { defect, tolerance: UNITARITY_TOL });
        }
        Ok(FloquetOperator { matrix, kicks: None, eigen: OnceLock::new() })
    }

    /// Builds `U = F†·diag(kinetic)·F·diag(potential)`.
    ///
    /// The product is the circulant `U[q, q'] = c(q − q')·V_{q'}` where `c`
    /// is the inverse DFT of the kinetic phases.
    pub fn from_kicks(kicks: KickFactors) -> Result<Self> {
        let n = kicks.kinetic.len();
        TorusHilbert::new(n)?;
        if kicks.potential.len() != n {
            return Err(Error::invalid("kinetic and potential phase vectors differ in length"));
        }
        let worst = kicks
            .kinetic
            .iter()
            .chain(&kicks.potential)
            .map(|z| (z.norm() - 1.0).abs())
            .fold(0.0, f64::max);
        if worst > UNITARITY_TOL {
            return Err(Error::NotUnitary { defect: worst, tolerance: UNITARITY_TOL });
        }
        let mut c = kicks.kinetic.clone();
        FftPlanner::new().plan_fft_inverse(n).process(&mut c);
        let scale = 1.0 / n as f64;
        let matrix = Array2::from_shape_fn((n, n), |(q, qp)| c[(q + n - qp) % n] * scale * kicks.potential[qp]);
        Ok(FloquetOperator { matrix, kicks: Some(kicks), eigen: OnceLock::new() })
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> ArrayView2<'_, Complex64> {
        self.matrix.view()
    }

    pub fn kicks(&self) -> Option<&KickFactors> {
        self.kicks.as_ref()
    }

    pub fn unitarity_defect(&self) -> f64 {
        unitarity_defect(self.matrix.view())
    }

    /// Eigenphases in `[0, 2π)` and eigenvectors, computed once.
    pub fn eigen(&self) -> Result<&UnitaryEigen> {
        if let Some(e) = self.eigen.get() {
            return Ok(e);
        }
        let e = unitary_eigen(self.matrix.view())?;
        Ok(self.eigen.get_or_init(|| e))
    }
}

/// `exp(i·c·cos(2πj/D))` for `j = 0..D`.
fn cosine_phases(dim: usize, c: f64) -> Vec<Complex64> {
    let d = dim as f64;
    (0..dim).map(|j| Complex64::from_polar(1.0, c * (2.0 * PI * j as f64 / d).cos())).collect()
}

fn check_strength(k: f64) -> Result<()> {
    if !(k >= 0.0 && k.is_finite()) {
        return Err(Error::invalid(format!("kick strength must be finite and nonnegative, got {k}")));
    }
    Ok(())
}

/// Quantized standard map `exp(−i·p²/2ħ)·exp(−i·K·cos(2πx)/(4π²ħ))`.
///
/// With `ħ = 1/(2πD)` the kinetic phase is `exp(−πi·p²/D)` and the kick is
/// `exp(−i·D·K·cos(2πq/D)/(2π))`; its Heisenberg step reproduces the
/// classical `p' = p + K/(2π)·sin(2πx)`, `x' = x + p'` at the same `K`.
pub fn build_standard_floquet(dim: usize, k: f64) -> Result<FloquetOperator> {
    TorusHilbert::new(dim)?;
    check_strength(k)?;
    let kinetic = (0..dim)
        .map(|p| Complex64::from_polar(1.0, -PI * ((p * p) % (2 * dim)) as f64 / dim as f64))
        .collect();
    let potential = cosine_phases(dim, -(dim as f64) * k / (2.0 * PI));
    FloquetOperator::from_kicks(KickFactors { kinetic, potential })
}

/// Quantized Harper map `exp(i·K·cos(2πp)/(2πħ))·exp(i·K·cos(2πx)/(2πħ))`,
/// i.e. phases `exp(i·D·K·cos(2πj/D))` in both bases, matching the
/// classical `p' = p − K·sin(2πx)`, `x' = x + K·sin(2πp')`.
pub fn build_harper_floquet(dim: usize, k: f64) -> Result<FloquetOperator> {
    TorusHilbert::new(dim)?;
    check_strength(k)?;
    let phases = cosine_phases(dim, dim as f64 * k);
    FloquetOperator::from_kicks(KickFactors { kinetic: phases.clone(), potential: phases })
}

pub fn build_floquet(family: MapFamily, dim: usize, k: f64) -> Result<FloquetOperator> {
    match family {
        MapFamily::Standard => build_standard_floquet(dim, k),
        MapFamily::Harper => build_harper_floquet(dim, k),
    }
}

/// Hermitian parts of the clock and shift operators.
#[derive(Debug, Clone)]
pub struct SchwingerPair {
    /// `sin(2πq/D)`: the position-diagonal entries of `X`.
    pub x_position: Vec<f64>,
    /// `sin(2πp/D)`: the momentum-diagonal entries of `P`.
    pub p_momentum: Vec<f64>,
    /// `X` in the position basis.
    pub x: Array2<Complex64>,
    /// `P` in the position basis (a circulant).
    pub p: Array2<Complex64>,
}

impl SchwingerPair {
    pub fn dim(&self) -> usize {
        self.x_position.len()
    }
}

/// `X = (U_S − U_S†)/2i` with the clock `U_S|q⟩ = e^{2πiq/D}|q⟩`, and
/// `P = (V_S† − V_S)/2i` with the shift `V_S|q⟩ = |q+1⟩`, so that `P` has
/// momentum eigenvalues `sin(2πp/D)`.
pub fn build_schwinger_pair(dim: usize) -> Result<SchwingerPair> {
    TorusHilbert::new(dim)?;
    let d = dim as f64;
    let x_position: Vec<f64> = (0..dim).map(|q| (2.0 * PI * q as f64 / d).sin()).collect();
    let p_momentum = x_position.clone();
    let mut x = Array2::zeros((dim, dim));
    for (q, &s) in x_position.iter().enumerate() {
        x[[q, q]] = Complex64::new(s, 0.0);
    }
    // V_S has ones at (q+1, q); (V_S† − V_S)/2i = (i/2)(V_S − V_S†).
    let mut p = Array2::<Complex64>::zeros((dim, dim));
    let half_i = Complex64::new(0.0, 0.5);
    for q in 0..dim {
        let up = (q + 1) % dim;
        p[[up, q]] += half_i;
        p[[q, up]] -= half_i;
    }
    Ok(SchwingerPair { x_position, p_momentum, x, p })
}

/// Strategy for the Heisenberg evolution of `X(t) = U†^t X U^t`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum MapEvolution {
    /// Split-step for kicked maps, eigenbasis otherwise.
    #[default]
    Auto,
    /// Alternate kinetic and kick conjugations through FFT basis changes,
    /// `O(D² log D)` per step.
    SplitStep,
    /// Phase evolution in the eigenbasis of `U`, one matrix product per step.
    Eigenbasis,
}

/// `C(t)` for `t = 0..=n_steps` with the default strategy.
pub fn map_otoc_series(u: &FloquetOperator, pair: &SchwingerPair, n_steps: usize) -> Result<OtocSeries> {
    map_otoc_series_with(u, pair, n_steps, MapEvolution::Auto)
}

pub fn map_otoc_series_with(
    u: &FloquetOperator,
    pair: &SchwingerPair,
    n_steps: usize,
    strategy: MapEvolution,
) -> Result<OtocSeries> {
    let n = u.dim();
    if pair.dim() != n {
        return Err(Error::invalid(format!("operator dimension {n} differs from observable dimension {}", pair.dim())));
    }
    if n_steps < 1 {
        return Err(Error::invalid("n_steps must be at least 1"));
    }
    let strategy = match (strategy, u.kicks()) {
        (MapEvolution::Auto, Some(_)) => MapEvolution::SplitStep,
        (MapEvolution::Auto, None) => MapEvolution::Eigenbasis,
        (MapEvolution::SplitStep, None) => {
            return Err(Error::invalid("split-step evolution needs an operator built from kick phases"))
        }
        (s, _) => s,
    };
    if strategy == MapEvolution::Eigenbasis {
        let defect = u.unitarity_defect();
        if defect > OTOC_UNITARITY_TOL {
            return Err(Error::NotUnitary { defect, tolerance: OTOC_UNITARITY_TOL });
        }
    }
    let values = match strategy {
        MapEvolution::SplitStep => split_step_otoc(u.kicks().expect("checked above"), pair, n_steps),
        _ => eigenbasis_otoc(u, pair, n_steps)?,
    };
    let meta = SeriesMeta { model: "torus_map".into(), operators: "X,P".into(), ..Default::default() };
    OtocSeries::new(0.0, 1.0, values, meta)
}

/// `(1/D)·Σ_jk |Y_jk|²·(P_k − P_j)²` for `Y` in the momentum basis.
fn momentum_commutator_norm(y: &Array2<Complex64>, p: &[f64]) -> f64 {
    let n = p.len();
    let mut s = 0.0;
    for (j, row) in y.axis_iter(Axis(0)).enumerate() {
        let pj = p[j];
        for (k, z) in row.iter().enumerate() {
            let d = p[k] - pj;
            s += z.norm_sqr() * d * d;
        }
    }
    s / n as f64
}

fn split_step_otoc(kicks: &KickFactors, pair: &SchwingerPair, n_steps: usize) -> Vec<f64> {
    let n = pair.dim();
    let fft = TorusFft::new(n);
    let mut buf = Array2::<Complex64>::zeros((n, n));
    let mut y = Array2::<Complex64>::zeros((n, n));
    for (q, &s) in pair.x_position.iter().enumerate() {
        y[[q, q]] = Complex64::new(s, 0.0);
    }
    fft.to_momentum(&mut y, &mut buf);
    let conj_by = |a: &mut Array2<Complex64>, ph: &[Complex64]| {
        for (j, mut row) in a.axis_iter_mut(Axis(0)).enumerate() {
            let cj = ph[j].conj();
            row.iter_mut().zip(ph).for_each(|(z, pk)| *z = cj * *z * pk);
        }
    };

    let mut values = Vec::with_capacity(n_steps + 1);
    values.push(momentum_commutator_norm(&y, &pair.p_momentum));
    for _ in 0..n_steps {
        conj_by(&mut y, &kicks.kinetic);
        fft.to_position(&mut y, &mut buf);
        conj_by(&mut y, &kicks.potential);
        fft.to_momentum(&mut y, &mut buf);
        values.push(momentum_commutator_norm(&y, &pair.p_momentum));
    }
    values
}

fn eigenbasis_otoc(u: &FloquetOperator, pair: &SchwingerPair, n_steps: usize) -> Result<Vec<f64>> {
    let n = u.dim();
    let eig = u.eigen()?;
    let w = &eig.vectors;
    let wh = w.t().mapv(|z| z.conj());
    let x_eig = wh.dot(&pair.x).dot(w);
    let p_eig = wh.dot(&pair.p).dot(w);
    let mut a = Array2::<Complex64>::zeros((n, n));
    let mut values = Vec::with_capacity(n_steps + 1);
    for t in 0..=n_steps {
        let z: Vec<Complex64> = eig.phases.iter().map(|&ph| Complex64::from_polar(1.0, -ph * t as f64)).collect();
        for ((j, k), v) in a.indexed_iter_mut() {
            *v = z[j] * x_eig[[j, k]] * z[k].conj();
        }
        let m = a.dot(&p_eig);
        values.push(2.0 * antihermitian_part_norm_sqr(m.view()) / n as f64);
    }
    Ok(values)
}

/// Sorted eigenphases of `U` in `[0, 2π)`.
pub fn eigenphase_spectrum(u: &FloquetOperator) -> Result<Vec<f64>> {
    Ok(u.eigen()?.phases.clone())
}

/// Restriction of a reflection-symmetric Floquet operator to one sector of
/// `q ↦ −q`.
#[derive(Debug, Clone)]
pub struct ParityBlock {
    pub sector: ReflectionSector,
    pub operator: FloquetOperator,
}

impl ParityBlock {
    /// Sector eigenvectors expressed in the full position basis.
    pub fn embedded_eigenvectors(&self, full_dim: usize) -> Result<Array2<Complex64>> {
        let eig = self.operator.eigen()?;
        let mut out = Array2::zeros((full_dim, self.sector.dim()));
        for (a, terms) in self.sector.vectors.iter().enumerate() {
            for &(q, c) in terms {
                for col in 0..self.sector.dim() {
                    out[[q, col]] += eig.vectors[[a, col]] * c;
                }
            }
        }
        Ok(out)
    }
}

/// Splits `U` into its even and odd blocks under `q ↦ −q mod D`.
pub fn parity_blocks(u: &FloquetOperator) -> Result<[ParityBlock; 2]> {
    let space = TorusHilbert::new(u.dim())?;
    let m = u.matrix();
    let mut broken = 0.0f64;
    for ((i, j), z) in m.indexed_iter() {
        broken = broken.max((m[[space.reflect(i), space.reflect(j)]] - z).norm());
    }
    if broken > UNITARITY_TOL {
        return Err(Error::SymmetryBroken(broken));
    }
    let block = |parity| -> Result<ParityBlock> {
        let sector = ReflectionSector::new(space.dim(), |q| space.reflect(q), parity);
        let d = sector.dim();
        let mat = Array2::from_shape_fn((d, d), |(a, b)| sector.element(a, b, |i, j| m[[i, j]]));
        Ok(ParityBlock { sector, operator: FloquetOperator::from_matrix(mat)? })
    };
    Ok([block(Parity::Even)?, block(Parity::Odd)?])
}

/// Eigenphases of both parity blocks as separate samples, optionally with
/// their eigenvectors in the position basis.
pub fn map_spectral_sectors(u: &FloquetOperator, with_vectors: bool) -> Result<Vec<SpectrumSample>> {
    parity_blocks(u)?
        .iter()
        .map(|block| {
            let sample = SpectrumSample::new(eigenphase_spectrum(&block.operator)?, SpectrumKind::Phase)?;
            if with_vectors {
                sample.with_eigenvectors(block.embedded_eigenvectors(u.dim())?)
            } else {
                Ok(sample)
            }
        })
        .collect()
}
