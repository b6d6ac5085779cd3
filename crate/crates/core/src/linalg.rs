//! Dense linear algebra kernels not covered by `ndarray-linalg`.
//!
//! Unitary operators are diagonalized through the complex Schur form
//! (`zgees`): for a normal matrix the triangular factor is diagonal, so the
//! Schur vectors form an orthonormal eigenbasis even inside degenerate
//! eigenspaces, where `zgeev` eigenvectors may come out non-orthogonal.
//! Real symmetric problems go through the divide-and-conquer driver `dsyevd`.

use std::f64::consts::PI;
use std::os::raw::{c_char, c_int};
use std::sync::Arc;

use ndarray::{Array1, Array2, ArrayView2, ShapeBuilder};
use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

/// Eigendecomposition of a unitary matrix.
#[derive(Debug, Clone)]
pub struct UnitaryEigen {
    /// Eigenphases in `[0, 2π)`, ascending.
    pub phases: Vec<f64>,
    /// Orthonormal eigenvectors as columns, ordered like `phases`.
    pub vectors: Array2<Complex64>,
}

/// Diagonalizes a unitary (more generally, normal) matrix.
///
/// Fails if LAPACK reports an error or if the Schur factor is not diagonal
/// to within `1e-8 · n`, which indicates a non-normal input.
pub fn unitary_eigen(u: ArrayView2<Complex64>) -> Result<UnitaryEigen> {
    let n = u.nrows();
    if n != u.ncols() {
        return Err(Error::invalid("unitary_eigen needs a square matrix"));
    }
    if n == 0 {
        return Ok(UnitaryEigen { phases: Vec::new(), vectors: Array2::zeros((0, 0)) });
    }
    let mut a = Array2::<Complex64>::zeros((n, n).f());
    a.assign(&u);
    let mut vs = Array2::<Complex64>::zeros((n, n).f());
    let mut w = vec![Complex64::new(0.0, 0.0); n];
    let mut rwork = vec![0.0f64; n];
    let mut bwork = vec![0 as c_int; n];
    let nn = n as c_int;
    let mut sdim: c_int = 0;
    let mut info: c_int = 0;
    let jobvs = b'V' as c_char;
    let sort = b'N' as c_char;

    let mut query = Complex64::new(0.0, 0.0);
    let lwork_query: c_int = -1;
    // SAFETY: all buffers are sized per the zgees contract; Complex64 is
    // layout-compatible with the binding's {re, im} struct.
    unsafe {
        lapack_sys::zgees_(
            &jobvs,
            &sort,
            None,
            &nn,
            a.as_mut_ptr().cast(),
            &nn,
            &mut sdim,
            w.as_mut_ptr().cast(),
            vs.as_mut_ptr().cast(),
            &nn,
            (&mut query as *mut Complex64).cast(),
            &lwork_query,
            rwork.as_mut_ptr(),
            bwork.as_mut_ptr(),
            &mut info,
        );
    }
    if info != 0 {
        return Err(Error::Linalg(format!("zgees workspace query failed (info = {info})")));
    }
    let lwork = (query.re as usize).max(2 * n);
    let mut work = vec![Complex64::new(0.0, 0.0); lwork];
    let lwork = lwork as c_int;
    // SAFETY: as above, with a workspace of the queried size.
    unsafe {
        lapack_sys::zgees_(
            &jobvs,
            &sort,
            None,
            &nn,
            a.as_mut_ptr().cast(),
            &nn,
            &mut sdim,
            w.as_mut_ptr().cast(),
            vs.as_mut_ptr().cast(),
            &nn,
            work.as_mut_ptr().cast(),
            &lwork,
            rwork.as_mut_ptr(),
            bwork.as_mut_ptr(),
            &mut info,
        );
    }
    if info != 0 {
        return Err(Error::Linalg(format!("zgees failed (info = {info})")));
    }

    let mut off = 0.0f64;
    for j in 0..n {
        for i in 0..j {
            off = off.max(a[[i, j]].norm());
        }
    }
    if off > 1e-8 * n as f64 {
        return Err(Error::Linalg(format!(
            "Schur factor is not diagonal (max off-diagonal {off:.3e}); matrix is not normal"
        )));
    }

    let mut order: Vec<(f64, usize)> = w
        .iter()
        .enumerate()
        .map(|(i, z)| (wrap_phase(z.arg()), i))
        .collect();
    order.sort_by(|a, b| a.0.total_cmp(&b.0));
    let phases = order.iter().map(|&(p, _)| p).collect();
    let mut vectors = Array2::<Complex64>::zeros((n, n));
    for (dst, &(_, src)) in order.iter().enumerate() {
        vectors.column_mut(dst).assign(&vs.column(src));
    }
    Ok(UnitaryEigen { phases, vectors })
}

/// Maps an angle into `[0, 2π)`.
pub fn wrap_phase(phi: f64) -> f64 {
    let two_pi = 2.0 * PI;
    let w = phi.rem_euclid(two_pi);
    if w >= two_pi {
        0.0
    } else {
        w
    }
}

/// Eigenvalues (ascending) and orthonormal eigenvectors of a real symmetric matrix.
pub fn symmetric_eigen(h: ArrayView2<f64>) -> Result<(Array1<f64>, Array2<f64>)> {
    let (vals, vecs) = syevd(h, true)?;
    Ok((vals, vecs.expect("vectors requested")))
}

/// Eigenvalues (ascending) of a real symmetric matrix.
pub fn symmetric_eigenvalues(h: ArrayView2<f64>) -> Result<Array1<f64>> {
    Ok(syevd(h, false)?.0)
}

fn syevd(h: ArrayView2<f64>, vectors: bool) -> Result<(Array1<f64>, Option<Array2<f64>>)> {
    let n = h.nrows();
    if n != h.ncols() {
        return Err(Error::invalid("symmetric eigensolver needs a square matrix"));
    }
    if n == 0 {
        return Ok((Array1::zeros(0), vectors.then(|| Array2::zeros((0, 0)))));
    }
    let mut a = Array2::<f64>::zeros((n, n).f());
    a.assign(&h);
    let mut w = Array1::<f64>::zeros(n);
    let jobz = if vectors { b'V' } else { b'N' } as c_char;
    let uplo = b'L' as c_char;
    let nn = n as c_int;
    let mut info: c_int = 0;
    let mut wq = 0.0f64;
    let mut iwq: c_int = 0;
    let q: c_int = -1;
    // SAFETY: workspace query; every pointer refers to a live buffer.
    unsafe {
        lapack_sys::dsyevd_(
            &jobz,
            &uplo,
            &nn,
            a.as_mut_ptr(),
            &nn,
            w.as_mut_ptr(),
            &mut wq,
            &q,
            &mut iwq,
            &q,
            &mut info,
        );
    }
    if info != 0 {
        return Err(Error::Linalg(format!("dsyevd workspace query failed (info = {info})")));
    }
    let lwork = (wq as usize).max(1);
    let liwork = (iwq as usize).max(1);
    let mut work = vec![0.0f64; lwork];
    let mut iwork = vec![0 as c_int; liwork];
    let (lw, liw) = (lwork as c_int, liwork as c_int);
    // SAFETY: buffers sized by the workspace query above.
    unsafe {
        lapack_sys::dsyevd_(
            &jobz,
            &uplo,
            &nn,
            a.as_mut_ptr(),
            &nn,
            w.as_mut_ptr(),
            work.as_mut_ptr(),
            &lw,
            iwork.as_mut_ptr(),
            &liw,
            &mut info,
        );
    }
    if info != 0 {
        return Err(Error::Linalg(format!("dsyevd failed (info = {info})")));
    }
    let vecs = vectors.then(|| a.as_standard_layout().into_owned());
    Ok((w, vecs))
}

/// Compares BLAS `dgemm`/`zgemm` against a plain triple loop at a size where
/// blocked kernels are active. Some OpenBLAS builds select a kernel family
/// that silently miscomputes on virtual CPUs; setting `OPENBLAS_CORETYPE`
/// (e.g. to `Haswell`) before the process starts avoids it.
pub fn blas_self_check() -> Result<()> {
    let n = 320;
    let a = Array2::from_shape_fn((n, n), |(i, j)| ((i * 7 + j * 3 + i * j) % 13) as f64 - 6.0);
    let b = Array2::from_shape_fn((n, n), |(i, j)| ((i * 5 + j * 11) % 17) as f64 - 8.0);
    let naive = |i: usize, j: usize| (0..n).map(|k| a[[i, k]] * b[[k, j]]).sum::<f64>();
    let real = a.dot(&b);
    let az = a.mapv(|x| Complex64::new(x, 0.5 * x));
    let bz = b.mapv(|x| Complex64::new(-x, x));
    let cz = az.dot(&bz);
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            let r = naive(i, j);
            worst = worst.max((real[[i, j]] - r).abs());
            // (a + 0.5ia)(−b + ib) summed = r·(−1 − 0.5) + i·r·(1 − 0.5)
            worst = worst.max((cz[[i, j]] - Complex64::new(-1.5 * r, 0.5 * r)).norm());
        }
    }
    // Entries are exact small integers, so any deviation is a kernel fault.
    if worst > 1e-9 {
        return Err(Error::Linalg(format!(
            "BLAS matrix product deviates from the reference by {worst:.3e}; \
             set OPENBLAS_CORETYPE=Haswell (or another family) before starting"
        )));
    }
    Ok(())
}

/// Frobenius norm of `U†U − 1`; an upper bound on the spectral-norm defect.
/// Non-square input has infinite defect.
pub fn unitarity_defect(u: ArrayView2<Complex64>) -> f64 {
    if !u.is_square() {
        return f64::INFINITY;
    }
    let n = u.nrows();
    let uh = u.t().mapv(|z| z.conj());
    let mut g = uh.dot(&u);
    for i in 0..n {
        g[[i, i]] -= Complex64::new(1.0, 0.0);
    }
    frobenius(g.view())
}

/// Frobenius norm of `A − A†`.
pub fn hermiticity_defect(a: ArrayView2<Complex64>) -> f64 {
    let n = a.nrows();
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            s += (a[[i, j]] - a[[j, i]].conj()).norm_sqr();
        }
    }
    s.sqrt()
}

pub fn frobenius(a: ArrayView2<Complex64>) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// `M†` for a complex matrix.
pub fn adjoint(a: ArrayView2<Complex64>) -> Array2<Complex64> {
    a.t().mapv(|z| z.conj())
}

/// `(1/2)·‖M − M†‖²_F`, which equals `(1/2)·‖[A, B]‖²_F` when `M = A·B`
/// with `A`, `B` Hermitian.
pub fn antihermitian_part_norm_sqr(m: ArrayView2<Complex64>) -> f64 {
    let n = m.nrows();
    let mut s = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            s += (m[[i, j]] - m[[j, i]].conj()).norm_sqr();
        }
        let d = m[[i, i]].im;
        s += 2.0 * d * d;
    }
    s
}

/// Unitary discrete Fourier transform between the position and momentum
/// bases of a `D`-dimensional torus, applied to operators.
///
/// The kernel is `⟨p|q⟩ = exp(−2πi·q·p/D)/√D`, so momentum amplitudes are the
/// forward DFT of position amplitudes.
#[derive(Clone)]
pub struct TorusFft {
    dim: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    scratch_len: usize,
}

impl std::fmt::Debug for TorusFft {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("TorusFft").field("dim", &self.dim).finish()
    }
}

impl TorusFft {
    pub fn new(dim: usize) -> Self {
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(dim);
        let inverse = planner.plan_fft_inverse(dim);
        let scratch_len = forward
            .get_inplace_scratch_len()
            .max(inverse.get_inplace_scratch_len());
        TorusFft { dim, forward, inverse, scratch_len }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Forward DFT of a state vector (position → momentum amplitudes).
    pub fn to_momentum_vec(&self, v: &mut [Complex64]) {
        let mut scratch = vec![Complex64::new(0.0, 0.0); self.scratch_len];
        self.forward.process_with_scratch(v, &mut scratch);
        let s = 1.0 / (self.dim as f64).sqrt();
        v.iter_mut().for_each(|z| *z *= s);
    }

    /// `A ↦ F·A·F†`: operator in the position basis to the momentum basis.
    pub fn to_momentum(&self, a: &mut Array2<Complex64>, buf: &mut Array2<Complex64>) {
        self.conjugate(a, buf, &*self.inverse, &*self.forward);
    }

    /// `A ↦ F†·A·F`: operator in the momentum basis to the position basis.
    pub fn to_position(&self, a: &mut Array2<Complex64>, buf: &mut Array2<Complex64>) {
        self.conjugate(a, buf, &*self.forward, &*self.inverse);
    }

    // Row transform then column transform; `buf` holds the transpose.
    fn conjugate(
        &self,
        a: &mut Array2<Complex64>,
        buf: &mut Array2<Complex64>,
        rows: &dyn Fft<f64>,
        cols: &dyn Fft<f64>,
    ) {
        let n = self.dim;
        debug_assert_eq!(a.dim(), (n, n));
        debug_assert!(a.is_standard_layout() && buf.is_standard_layout());
        let mut scratch = vec![Complex64::new(0.0, 0.0); self.scratch_len];
        {
            let data = a.as_slice_mut().expect("standard layout");
            rows.process_with_scratch(data, &mut scratch);
        }
        transpose_into(a, buf);
        {
            let data = buf.as_slice_mut().expect("standard layout");
            cols.process_with_scratch(data, &mut scratch);
        }
        transpose_into(buf, a);
        let s = 1.0 / n as f64;
        a.mapv_inplace(|z| z * s);
    }
}

fn transpose_into(src: &Array2<Complex64>, dst: &mut Array2<Complex64>) {
    const BLOCK: usize = 32;
    let n = src.nrows();
    let s = src.as_slice().expect("standard layout");
    let d = dst.as_slice_mut().expect("standard layout");
    for ib in (0..n).step_by(BLOCK) {
        for jb in (0..n).step_by(BLOCK) {
            for i in ib..(ib + BLOCK).min(n) {
                for j in jb..(jb + BLOCK).min(n) {
                    d[j * n + i] = s[i * n + j];
                }
            }
        }
    }
}
