//! Open spin-1/2 chains: Hamiltonians on fixed-magnetization sectors,
//! site-reversal parity blocks and the infinite-temperature OTOC
//! `C_μν(l, t) = 1 − Re Tr[σ₀^μ(t) σ_l^ν σ₀^μ(t) σ_l^ν]/D`.
//!
//! Basis states are bitmasks with bit `i` set when site `i` points up.
//! Spin operators are `S = σ/2`, so all three Hamiltonians are real
//! symmetric in the computational basis.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use ndarray::{Array1, Array2, ArrayView2};
use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{antihermitian_part_norm_sqr, symmetric_eigen};
use crate::otoc::{OtocSeries, SeriesMeta};
use crate::rng::stream_rng;
use crate::spectral::{SpectrumKind, SpectrumSample};
use crate::symmetry::{Parity, ReflectionSector};

/// Largest chain handled with 64-bit masks and dense matrices.
pub const MAX_SITES: usize = 20;

/// Tolerance on `‖[H, Π]‖` before parity blocks are formed.
pub const PARITY_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum SpinModel {
    /// `H₀ + λH₁`: nearest-neighbour XXZ plus a next-nearest-neighbour copy.
    PerturbedXxz { lambda: f64, mu: f64 },
    /// `J Σ S^z S^z + B Σ (sinθ S^x + cosθ S^z)`.
    TiltedIsing { j: f64, b: f64, theta: f64 },
    /// Isotropic Heisenberg chain with fields `h_i ~ U[−h, h]`.
    RandomFieldHeisenberg { h: f64, seed: u64, realization: u64 },
}

impl SpinModel {
    pub const XXZ_MU: f64 = 0.5;
    pub const ISING_J: f64 = 2.0;
    pub const ISING_B: f64 = 2.0;

    pub fn xxz(lambda: f64) -> Self {
        SpinModel::PerturbedXxz { lambda, mu: Self::XXZ_MU }
    }

    pub fn tilted_ising(theta: f64) -> Self {
        SpinModel::TiltedIsing { j: Self::ISING_J, b: Self::ISING_B, theta }
    }

    pub fn heisenberg(h: f64, seed: u64, realization: u64) -> Self {
        SpinModel::RandomFieldHeisenberg { h, seed, realization }
    }

    pub fn family(&self) -> SpinFamily {
        match self {
            SpinModel::PerturbedXxz { .. } => SpinFamily::PerturbedXxz,
            SpinModel::TiltedIsing { .. } => SpinFamily::TiltedIsing,
            SpinModel::RandomFieldHeisenberg { .. } => SpinFamily::RandomFieldHeisenberg,
        }
    }

    /// Whether total `S^z` commutes with the Hamiltonian.
    pub fn conserves_magnetization(&self) -> bool {
        match *self {
            SpinModel::TiltedIsing { theta, .. } => theta.sin() == 0.0,
            _ => true,
        }
    }

    /// Whether site reversal is a symmetry (disorder breaks it).
    pub fn has_parity(&self) -> bool {
        !matches!(self, SpinModel::RandomFieldHeisenberg { h, .. } if *h != 0.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpinFamily {
    PerturbedXxz,
    TiltedIsing,
    RandomFieldHeisenberg,
}

impl SpinFamily {
    pub fn name(self) -> &'static str {
        match self {
            SpinFamily::PerturbedXxz => "xxz",
            SpinFamily::TiltedIsing => "ising",
            SpinFamily::RandomFieldHeisenberg => "heisenberg",
        }
    }
}

impl fmt::Display for SpinFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SpinFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "xxz" | "perturbed_xxz" => Ok(SpinFamily::PerturbedXxz),
            "ising" | "tilted_ising" => Ok(SpinFamily::TiltedIsing),
            "heisenberg" | "random_field_heisenberg" => Ok(SpinFamily::RandomFieldHeisenberg),
            other => Err(Error::invalid(format!("unknown spin chain `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpinChainSpec {
    pub sites: usize,
    pub model: SpinModel,
    /// Number of up spins; `None` selects the full `2^L` space.
    pub up_spins: Option<usize>,
    pub parity: Option<Parity>,
}

impl SpinChainSpec {
    pub fn new(sites: usize, model: SpinModel) -> Self {
        SpinChainSpec { sites, model, up_spins: None, parity: None }
    }

    pub fn with_sector(mut self, up_spins: usize) -> Self {
        self.up_spins = Some(up_spins);
        self
    }

    pub fn with_parity(mut self, parity: Parity) -> Self {
        self.parity = Some(parity);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(2..=MAX_SITES).contains(&self.sites) {
            return Err(Error::invalid(format!("chain length must lie in 2..={MAX_SITES}, got {}", self.sites)));
        }
        if let Some(n) = self.up_spins {
            if n > self.sites {
                return Err(Error::invalid(format!("{n} up spins do not fit on {} sites", self.sites)));
            }
            if !self.model.conserves_magnetization() {
                return Err(Error::invalid("the tilted field mixes magnetization sectors; use the full space"));
            }
        }
        if self.parity.is_some() && !self.model.has_parity() {
            return Err(Error::invalid("random fields break site-reversal parity"));
        }
        let finite = match self.model {
            SpinModel::PerturbedXxz { lambda, mu } => lambda.is_finite() && mu.is_finite(),
            SpinModel::TiltedIsing { j, b, theta } => j.is_finite() && b.is_finite() && theta.is_finite(),
            SpinModel::RandomFieldHeisenberg { h, .. } => h.is_finite() && h >= 0.0,
        };
        if !finite {
            return Err(Error::invalid("model parameters must be finite (and h ≥ 0)"));
        }
        Ok(())
    }

    pub fn basis(&self) -> Result<SectorBasis> {
        self.validate()?;
        Ok(match self.up_spins {
            Some(n) => sector_basis(self.sites, n)?,
            None => SectorBasis::full(self.sites)?,
        })
    }
}

/// Fields `h_i` of one disorder realization, drawn from `U[−h, h]`.
pub fn random_fields(sites: usize, h: f64, seed: u64, realization: u64) -> Vec<f64> {
    let mut rng = stream_rng(seed, realization);
    (0..sites).map(|_| if h > 0.0 { rng.random_range(-h..=h) } else { 0.0 }).collect()
}

/// Ascending list of basis bitmasks spanning a sector.
#[derive(Debug, Clone, PartialEq)]
pub struct SectorBasis {
    sites: usize,
    up_spins: Option<usize>,
    states: Vec<u64>,
    index: HashMap<u64, usize>,
}

impl SectorBasis {
    fn from_states(sites: usize, up_spins: Option<usize>, states: Vec<u64>) -> Self {
        let index = states.iter().enumerate().map(|(i, &s)| (s, i)).collect();
        SectorBasis { sites, up_spins, states, index }
    }

    /// All `2^L` states.
    pub fn full(sites: usize) -> Result<Self> {
        if !(1..=MAX_SITES).contains(&sites) {
            return Err(Error::invalid(format!("chain length must lie in 1..={MAX_SITES}, got {sites}")));
        }
        Ok(Self::from_states(sites, None, (0..1u64 << sites).collect()))
    }

    pub fn sites(&self) -> usize {
        self.sites
    }

    pub fn up_spins(&self) -> Option<usize> {
        self.up_spins
    }

    pub fn dim(&self) -> usize {
        self.states.len()
    }

    pub fn states(&self) -> &[u64] {
        &self.states
    }

    pub fn index_of(&self, state: u64) -> Option<usize> {
        self.index.get(&state).copied()
    }

    /// `σ^z_site` on the basis, which is diagonal.
    pub fn sigma_z(&self, site: usize) -> Array1<f64> {
        self.states.iter().map(|&s| if s >> site & 1 == 1 { 1.0 } else { -1.0 }).collect()
    }

    /// Site reversal `i ↦ L−1−i` as a permutation of basis indices.
    pub fn reversal(&self) -> Vec<usize> {
        self.states.iter().map(|&s| self.index[&reverse_sites(s, self.sites)]).collect()
    }
}

fn reverse_sites(state: u64, sites: usize) -> u64 {
    state.reverse_bits() >> (64 - sites)
}

pub fn binomial(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1usize, |acc, i| acc * (n - i) / (i + 1))
}

/// All bitmasks on `sites` bits with exactly `up_spins` ones, ascending.
pub fn sector_basis(sites: usize, up_spins: usize) -> Result<SectorBasis> {
    if !(1..=MAX_SITES).contains(&sites) {
        return Err(Error::invalid(format!("chain length must lie in 1..={MAX_SITES}, got {sites}")));
    }
    if up_spins > sites {
        return Err(Error::invalid(format!("{up_spins} up spins do not fit on {sites} sites")));
    }
    let mut states = Vec::with_capacity(binomial(sites, up_spins));
    if up_spins == 0 {
        states.push(0);
    } else {
        // Gosper's hack enumerates same-popcount masks in increasing order.
        let limit = 1u64 << sites;
        let mut s = (1u64 << up_spins) - 1;
        while s < limit {
            states.push(s);
            let c = s & s.wrapping_neg();
            let r = s + c;
            s = (((r ^ s) >> 2) / c) | r;
        }
    }
    Ok(SectorBasis::from_states(sites, Some(up_spins), states))
}

/// Adds `c·(S_i·S_j)_{xy} + c·μ·S^z_i S^z_j` for one bond.
fn add_xxz_bond(h: &mut Array2<f64>, basis: &SectorBasis, i: usize, j: usize, c: f64, mu: f64) {
    for (a, &s) in basis.states.iter().enumerate() {
        let (bi, bj) = (s >> i & 1, s >> j & 1);
        h[[a, a]] += if bi == bj { 0.25 } else { -0.25 } * c * mu;
        if bi != bj {
            // S^x S^x + S^y S^y = (S⁺S⁻ + S⁻S⁺)/2 flips an antiparallel pair.
            let b = basis.index[&(s ^ (1 << i) ^ (1 << j))];
            h[[b, a]] += 0.5 * c;
        }
    }
}

/// Dense Hamiltonian on the chain's magnetization sector (parity ignored;
/// see [`parity_reduce`]).
pub fn build_hamiltonian(spec: &SpinChainSpec) -> Result<(Array2<f64>, SectorBasis)> {
    let basis = spec.basis()?;
    let l = spec.sites;
    let n = basis.dim();
    let mut h = Array2::<f64>::zeros((n, n));
    match spec.model {
        SpinModel::PerturbedXxz { lambda, mu } => {
            for i in 0..l - 1 {
                add_xxz_bond(&mut h, &basis, i, i + 1, 1.0, mu);
            }
            if lambda != 0.0 {
                for i in 0..l.saturating_sub(2) {
                    add_xxz_bond(&mut h, &basis, i, i + 2, lambda, mu);
                }
            }
        }
        SpinModel::RandomFieldHeisenberg { h: width, seed, realization } => {
            for i in 0..l - 1 {
                add_xxz_bond(&mut h, &basis, i, i + 1, 1.0, 1.0);
            }
            let fields = random_fields(l, width, seed, realization);
            for (a, &s) in basis.states.iter().enumerate() {
                h[[a, a]] += (0..l).map(|i| if s >> i & 1 == 1 { 0.5 } else { -0.5 } * fields[i]).sum::<f64>();
            }
        }
        SpinModel::TiltedIsing { j, b, theta } => {
            let (bx, bz) = (b * theta.sin(), b * theta.cos());
            for (a, &s) in basis.states.iter().enumerate() {
                let z = |i: usize| if s >> i & 1 == 1 { 0.5 } else { -0.5 };
                h[[a, a]] += j * (0..l - 1).map(|i| z(i) * z(i + 1)).sum::<f64>();
                h[[a, a]] += bz * (0..l).map(z).sum::<f64>();
                if bx != 0.0 {
                    for i in 0..l {
                        h[[basis.index[&(s ^ (1 << i))], a]] += 0.5 * bx;
                    }
                }
            }
        }
    }
    Ok((h, basis))
}

/// Hamiltonian restricted to one site-reversal sector.
#[derive(Debug, Clone)]
pub struct ParityHamiltonian {
    pub sector: ReflectionSector,
    pub matrix: Array2<f64>,
}

/// Splits `H` into its even and odd site-reversal blocks.
pub fn parity_reduce(h: ArrayView2<f64>, basis: &SectorBasis) -> Result<[ParityHamiltonian; 2]> {
    let n = basis.dim();
    if h.dim() != (n, n) {
        return Err(Error::invalid(format!("matrix is {:?}, basis has dimension {n}", h.dim())));
    }
    let r = basis.reversal();
    let mut defect = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            defect = defect.max((h[[r[i], r[j]]] - h[[i, j]]).abs());
        }
    }
    if defect > PARITY_TOL {
        return Err(Error::SymmetryBroken(defect));
    }
    let block = |parity| {
        let sector = ReflectionSector::new(n, |i| r[i], parity);
        let d = sector.dim();
        let mut m = Array2::<f64>::zeros((d, d));
        for a in 0..d {
            for b in a..d {
                let v = sector.element(a, b, |i, j| h[[i, j]]);
                m[[a, b]] = v;
                m[[b, a]] = v;
            }
        }
        ParityHamiltonian { sector, matrix: m }
    };
    Ok([block(Parity::Even), block(Parity::Odd)])
}

/// Hamiltonian for spectral statistics: the chain's sector, further reduced
/// to the requested parity block when one is set.
pub fn sector_hamiltonian(spec: &SpinChainSpec) -> Result<Array2<f64>> {
    let (h, basis) = build_hamiltonian(spec)?;
    match spec.parity {
        None => Ok(h),
        Some(p) => {
            let [even, odd] = parity_reduce(h.view(), &basis)?;
            Ok(if p == Parity::Even { even.matrix } else { odd.matrix })
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PauliAxis {
    X,
    Y,
    Z,
}

impl FromStr for PauliAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "x" | "X" => Ok(PauliAxis::X),
            "y" | "Y" => Ok(PauliAxis::Y),
            "z" | "Z" => Ok(PauliAxis::Z),
            other => Err(Error::invalid(format!("unknown Pauli axis `{other}`"))),
        }
    }
}

impl fmt::Display for PauliAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PauliAxis::X => "x",
            PauliAxis::Y => "y",
            PauliAxis::Z => "z",
        })
    }
}

/// Uniform grid `start, start + dt, …` up to `end` inclusive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    pub start: f64,
    pub end: f64,
    pub dt: f64,
}

impl TimeGrid {
    pub fn new(start: f64, end: f64, dt: f64) -> Result<Self> {
        let g = TimeGrid { start, end, dt };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(Error::invalid(format!("time step must be positive, got {}", self.dt)));
        }
        if !(self.end >= self.start) || !self.start.is_finite() || !self.end.is_finite() {
            return Err(Error::invalid("time grid needs finite start ≤ end"));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        ((self.end - self.start) / self.dt + 1e-9).floor() as usize + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn time(&self, i: usize) -> f64 {
        self.start + i as f64 * self.dt
    }
}

impl Default for TimeGrid {
    fn default() -> Self {
        TimeGrid { start: 0.0, end: 1100.0, dt: 0.1 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpinOtocRequest {
    /// Site of the second operator; the first sits on site 0.
    pub separation: usize,
    pub axes: (PauliAxis, PauliAxis),
    pub times: TimeGrid,
}

impl SpinOtocRequest {
    pub fn zz(separation: usize, times: TimeGrid) -> Self {
        SpinOtocRequest { separation, axes: (PauliAxis::Z, PauliAxis::Z), times }
    }
}

/// Pauli operator `σ^axis_site` as a dense matrix on the basis.
pub fn pauli_matrix(basis: &SectorBasis, site: usize, axis: PauliAxis) -> Result<Array2<Complex64>> {
    let n = basis.dim();
    let mut m = Array2::<Complex64>::zeros((n, n));
    if axis == PauliAxis::Z {
        for (a, z) in basis.sigma_z(site).iter().enumerate() {
            m[[a, a]] = Complex64::new(*z, 0.0);
        }
        return Ok(m);
    }
    if basis.up_spins.is_some() {
        return Err(Error::invalid(format!("σ^{axis} leaves the fixed-magnetization sector")));
    }
    for (a, &s) in basis.states.iter().enumerate() {
        let b = basis.index[&(s ^ (1 << site))];
        // σ^y|↓⟩ = −i|↑⟩ and σ^y|↑⟩ = i|↓⟩.
        m[[b, a]] = match axis {
            PauliAxis::X => Complex64::new(1.0, 0.0),
            _ if s >> site & 1 == 0 => Complex64::new(0.0, -1.0),
            _ => Complex64::new(0.0, 1.0),
        };
    }
    Ok(m)
}

/// Eigendecomposition of a real symmetric Hamiltonian, reused for every
/// OTOC evaluated on it.
#[derive(Debug, Clone)]
pub struct SpinDynamics {
    pub energies: Array1<f64>,
    pub vectors: Array2<f64>,
}

impl SpinDynamics {
    pub fn new(h: ArrayView2<f64>) -> Result<Self> {
        let (energies, vectors) = symmetric_eigen(h)?;
        Ok(SpinDynamics { energies, vectors })
    }

    fn to_eigenbasis(&self, op: &Array2<Complex64>) -> Array2<Complex64> {
        let q = self.vectors.mapv(|x| Complex64::new(x, 0.0));
        q.t().dot(op).dot(&q)
    }

    /// `C(t)` on the request grid:
    /// `A(t)_jk = e^{i(E_j−E_k)t} Ã_jk`, `M = A(t)·B̃`,
    /// `C = ‖M − M†‖²/(2D)`.
    pub fn otoc(&self, basis: &SectorBasis, req: &SpinOtocRequest) -> Result<OtocSeries> {
        req.times.validate()?;
        let n = basis.dim();
        if self.energies.len() != n {
            return Err(Error::invalid("basis and Hamiltonian dimensions differ"));
        }
        if req.separation >= basis.sites {
            return Err(Error::invalid(format!(
                "separation {} must be below the chain length {}",
                req.separation, basis.sites
            )));
        }
        let a = self.to_eigenbasis(&pauli_matrix(basis, 0, req.axes.0)?);
        let b = self.to_eigenbasis(&pauli_matrix(basis, req.separation, req.axes.1)?);
        let is_real = |m: &Array2<Complex64>| m.iter().all(|z| z.im == 0.0);
        let values = if is_real(&a) && is_real(&b) {
            self.otoc_real(&a.mapv(|z| z.re), &b.mapv(|z| z.re), &req.times)
        } else {
            self.otoc_complex(&a, &b, &req.times)
        };        let meta = SeriesMeta {
            model: "spin".into(),
            separation: Some(req.separation),
            operators: format!("{},{}", req.axes.0, req.axes.1),
            ..SeriesMeta::default()
        };
        OtocSeries::new(req.times.start, req.times.dt, values, meta)
    }
}

impl SpinDynamics {
    fn phases(&self, t: f64) -> Vec<Complex64> {
        self.energies.iter().map(|&e| Complex64::from_polar(1.0, e * t)).collect()
    }

    fn otoc_complex(&self, a: &Array2<Complex64>, b: &Array2<Complex64>, times: &TimeGrid) -> Vec<f64> {
        let n = a.nrows();
        let mut at = Array2::<Complex64>::zeros((n, n));
        (0..times.len())
            .map(|i| {
                let z = self.phases(times.time(i));
                for ((j, k), v) in at.indexed_iter_mut() {
                    *v = z[j] * a[[j, k]] * z[k].conj();
                }
                antihermitian_part_norm_sqr(at.dot(b).view()) / n as f64
            })
            .collect()
    }

    /// Same as `otoc_complex` for real `Ã`, `B̃`, splitting `A(t)` into real
    /// and imaginary parts so each step costs two real products.
    fn otoc_real(&self, a: &Array2<f64>, b: &Array2<f64>, times: &TimeGrid) -> Vec<f64> {
        let n = a.nrows();
        let mut ar = Array2::<f64>::zeros((n, n));
        let mut ai = Array2::<f64>::zeros((n, n));
        let mut mr = Array2::<f64>::zeros((n, n));
        let mut mi = Array2::<f64>::zeros((n, n));
        (0..times.len())
            .map(|i| {
                let z = self.phases(times.time(i));
                for j in 0..n {
                    for k in 0..n {
                        let p = z[j] * z[k].conj();
                        ar[[j, k]] = a[[j, k]] * p.re;
                        ai[[j, k]] = a[[j, k]] * p.im;
                    }
                }
                ndarray::linalg::general_mat_mul(1.0, &ar, b, 0.0, &mut mr);
                ndarray::linalg::general_mat_mul(1.0, &ai, b, 0.0, &mut mi);
                // (1/2)Σ|M_jk − conj(M_kj)|² with M = Mr + i·Mi.
                let mut s = 0.0;
                for j in 0..n {
                    for k in (j + 1)..n {
                        s += (mr[[j, k]] - mr[[k, j]]).powi(2) + (mi[[j, k]] + mi[[k, j]]).powi(2);
                    }
                    s += 2.0 * mi[[j, j]].powi(2);
                }
                s / n as f64
            })
            .collect()
    }
}

/// One-shot OTOC: diagonalizes `h` and evaluates the request.
pub fn spin_otoc_series(h: ArrayView2<f64>, basis: &SectorBasis, req: &SpinOtocRequest) -> Result<OtocSeries> {
    SpinDynamics::new(h)?.otoc(basis, req)
}

/// Eigenvalues of the chain's Hamiltonian (parity block if requested).
pub fn spin_spectrum(spec: &SpinChainSpec) -> Result<Vec<f64>> {
    let h = sector_hamiltonian(spec)?;
    Ok(crate::linalg::symmetric_eigenvalues(h.view())?.to_vec())
}

/// Levels of the chain's Hamiltonian as one sample (or one per requested
/// parity block), optionally with eigenvectors in the sector's bitmask basis.
pub fn spin_spectral_sectors(spec: &SpinChainSpec, with_vectors: bool) -> Result<Vec<SpectrumSample>> {
    let (h, basis) = build_hamiltonian(spec)?;
    let sample = |m: ArrayView2<f64>, embed: Option<&ReflectionSector>| -> Result<SpectrumSample> {
        if !with_vectors {
            let levels = crate::linalg::symmetric_eigenvalues(m)?.to_vec();
            return SpectrumSample::new(levels, SpectrumKind::Energy);
        }
        let (levels, vectors) = symmetric_eigen(m)?;
        let full = match embed {
            None => vectors,
            Some(sector) => {
                let mut out = Array2::<f64>::zeros((basis.dim(), sector.dim()));
                for (a, terms) in sector.vectors.iter().enumerate() {
                    for &(i, c) in terms {
                        out.row_mut(i).scaled_add(c, &vectors.row(a));
                    }
                }
                out
            }
        };
        SpectrumSample::new(levels.to_vec(), SpectrumKind::Energy)?.with_eigenvectors(full.mapv(|x| Complex64::new(x, 0.0)))
    };
    match spec.parity {
        None => Ok(vec![sample(h.view(), None)?]),
        Some(p) => {
            let [even, odd] = parity_reduce(h.view(), &basis)?;
            let block = if p == Parity::Even { even } else { odd };
            Ok(vec![sample(block.matrix.view(), Some(&block.sector))?])
        }
    }
}
