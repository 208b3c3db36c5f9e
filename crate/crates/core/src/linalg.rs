//! Dense complex linear algebra used by the solver and the decompositions.

use matrixmultiply::CGemmOption;
use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;

pub(crate) const ZERO: Complex64 = Complex64::new(0.0, 0.0);
pub(crate) const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// How an operand enters a product.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Op {
    None,
    Transpose,
    Adjoint,
}

struct Operand<'a> {
    ptr: *const [f64; 2],
    rows: usize,
    cols: usize,
    rs: isize,
    cs: isize,
    _m: std::marker::PhantomData<&'a ()>,
}

fn operand(m: &DMatrix<Complex64>, op: Op) -> Operand<'_> {
    let (r, c) = m.shape();
    let ptr = m.as_ptr() as *const [f64; 2];
    match op {
        Op::None => Operand { ptr, rows: r, cols: c, rs: 1, cs: r as isize, _m: Default::default() },
        Op::Transpose | Op::Adjoint => Operand { ptr, rows: c, cols: r, rs: r as isize, cs: 1, _m: Default::default() },
    }
}

/// `op(a) * op(b)`.
pub(crate) fn matmul(a: &DMatrix<Complex64>, opa: Op, b: &DMatrix<Complex64>, opb: Op) -> DMatrix<Complex64> {
    // the GEMM kernel has no conjugation flag; adjoints use a conjugated copy
    let a_conj = (opa == Op::Adjoint).then(|| a.map(|v| v.conj()));
    let b_conj = (opb == Op::Adjoint).then(|| b.map(|v| v.conj()));
    let lhs = operand(a_conj.as_ref().unwrap_or(a), opa);
    let rhs = operand(b_conj.as_ref().unwrap_or(b), opb);
    assert_eq!(lhs.cols, rhs.rows, "inner dimensions differ");
    let mut out = DMatrix::zeros(lhs.rows, rhs.cols);
    if lhs.rows == 0 || rhs.cols == 0 {
        return out;
    }
    let m = lhs.rows;
    // SAFETY: pointers and strides describe the live, correctly sized buffers
    // borrowed above; `out` is a distinct allocation.
    unsafe {
        matrixmultiply::zgemm(
            CGemmOption::Standard,
            CGemmOption::Standard,
            m,
            lhs.cols,
            rhs.cols,
            [1.0, 0.0],
            lhs.ptr,
            lhs.rs,
            lhs.cs,
            rhs.ptr,
            rhs.rs,
            rhs.cs,
            [0.0, 0.0],
            out.as_mut_ptr() as *mut [f64; 2],
            1,
            m as isize,
        );
    }
    out
}

/// `out = k * y`, with the columns of `y` split into blocks handled by the
/// current rayon pool. Blocks write disjoint column ranges of `out`.
pub(crate) fn par_matmul_into(k: &DMatrix<Complex64>, y: &DMatrix<Complex64>, out: &mut DMatrix<Complex64>) {
    let n = k.nrows();
    assert_eq!(k.ncols(), y.nrows());
    assert_eq!(out.shape(), (n, y.ncols()));
    let cols = y.ncols();
    let threads = rayon::current_num_threads().max(1);
    let block = cols.div_ceil(threads).max(1);
    let kptr = k.as_ptr() as usize;
    let inner = k.ncols();
    out.as_mut_slice()
        .par_chunks_mut(n * block)
        .zip(y.as_slice().par_chunks(inner * block))
        .for_each(|(o, yb)| {
            let ncols = yb.len() / inner;
            // SAFETY: `k` outlives this call; each task reads its own `y`
            // block and writes its own `out` block.
            unsafe {
                matrixmultiply::zgemm(
                    CGemmOption::Standard,
                    CGemmOption::Standard,
                    n,
                    inner,
                    ncols,
                    [1.0, 0.0],
                    kptr as *const [f64; 2],
                    1,
                    n as isize,
                    yb.as_ptr() as *const [f64; 2],
                    1,
                    inner as isize,
                    [0.0, 0.0],
                    o.as_mut_ptr() as *mut [f64; 2],
                    1,
                    n as isize,
                );
            }
        });
}

pub(crate) fn max_abs(m: &DMatrix<Complex64>) -> f64 {
    m.iter().map(|v| v.norm()).fold(0.0, f64::max)
}

pub(crate) fn max_abs_diff(a: &DMatrix<Complex64>, b: &DMatrix<Complex64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

fn lapack_check(info: i32, routine: &str) {
    assert!(info == 0, "{routine} failed with info = {info}");
}

/// Singular value decomposition `m = u * diag(sigma) * v^H` of a square
/// matrix, `sigma` descending. Returns `(u, sigma, v)`.
pub(crate) fn svd_sorted(m: &DMatrix<Complex64>) -> (DMatrix<Complex64>, Vec<f64>, DMatrix<Complex64>) {
    let n = m.nrows();
    assert_eq!(n, m.ncols(), "square matrix expected");
    if m.iter().all(|v| *v == ZERO) {
        return (DMatrix::identity(n, n), vec![0.0; n], DMatrix::identity(n, n));
    }
    let mut a = m.clone();
    let mut s = vec![0.0; n];
    let mut u = DMatrix::<Complex64>::zeros(n, n);
    let mut vt = DMatrix::<Complex64>::zeros(n, n);
    let mut rwork = vec![0.0; 5 * n.max(1)];
    let ni = n as i32;
    let mut info = 0;
    let mut query = ZERO;
    let c = |p: *mut Complex64| p as *mut lapack_sys::__BindgenComplex<f64>;
    // SAFETY: all buffers are column-major with leading dimension n and the
    // sizes LAPACK requires; Complex64 has the layout of LAPACK's complex.
    unsafe {
        lapack_sys::zgesvd_(
            &(b'A' as _), &(b'A' as _), &ni, &ni, c(a.as_mut_ptr()), &ni, s.as_mut_ptr(),
            c(u.as_mut_ptr()), &ni, c(vt.as_mut_ptr()), &ni, c(&mut query), &-1, rwork.as_mut_ptr(), &mut info,
        );
        lapack_check(info, "zgesvd workspace query");
        let lwork = query.re as i32;
        let mut work = vec![ZERO; lwork.max(1) as usize];
        lapack_sys::zgesvd_(
            &(b'A' as _), &(b'A' as _), &ni, &ni, c(a.as_mut_ptr()), &ni, s.as_mut_ptr(),
            c(u.as_mut_ptr()), &ni, c(vt.as_mut_ptr()), &ni, c(work.as_mut_ptr()), &lwork, rwork.as_mut_ptr(),
            &mut info,
        );
    }
    lapack_check(info, "zgesvd");
    (u, s, vt.adjoint())
}

/// Eigenvalues (ascending) and eigenvectors of a real symmetric matrix.
fn symmetric_eigen(m: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let n = m.nrows();
    let mut a = m.clone();
    let mut w = vec![0.0; n];
    let ni = n as i32;
    let mut info = 0;
    let mut query = 0.0;
    // SAFETY: `a` is n x n column-major, `w` holds n values.
    unsafe {
        lapack_sys::dsyev_(&(b'V' as _), &(b'U' as _), &ni, a.as_mut_ptr(), &ni, w.as_mut_ptr(), &mut query, &-1, &mut info);
        lapack_check(info, "dsyev workspace query");
        let lwork = query as i32;
        let mut work = vec![0.0; lwork.max(1) as usize];
        lapack_sys::dsyev_(&(b'V' as _), &(b'U' as _), &ni, a.as_mut_ptr(), &ni, w.as_mut_ptr(), work.as_mut_ptr(), &lwork, &mut info);
    }
    lapack_check(info, "dsyev");
    (w, a)
}

/// Takagi factorization of a complex symmetric matrix, `g = y * diag(d) * y^T`
/// with `y` unitary and `d >= 0` descending.
///
/// Uses the real symmetric embedding `[[Re g, Im g], [Im g, -Re g]]`, whose
/// eigenpairs `(d, [x; z])` give Takagi vectors `x + i z`. Degenerate values are
/// handled without special casing as long as they are nonzero.
pub(crate) fn takagi(g: &DMatrix<Complex64>) -> (Vec<f64>, DMatrix<Complex64>) {
    let k = g.nrows();
    let embed = DMatrix::from_fn(2 * k, 2 * k, |i, j| {
        let v = g[(i % k, j % k)];
        match (i < k, j < k) {
            (true, true) => v.re,
            (true, false) | (false, true) => v.im,
            (false, false) => -v.re,
        }
    });
    let (values, vectors) = symmetric_eigen(&embed);
    // ascending order: the k largest are the last k
    let d: Vec<f64> = (0..k).map(|j| values[2 * k - 1 - j].max(0.0)).collect();
    let y = DMatrix::from_fn(k, k, |i, j| {
        let col = 2 * k - 1 - j;
        Complex64::new(vectors[(i, col)], vectors[(i + k, col)])
    });
    (d, y)
}

/// Unitary factor `u * v^H` of the polar decomposition.
pub(crate) fn polar_unitary(g: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    let (u, _, v) = svd_sorted(g);
    matmul(&u, Op::None, &v, Op::Adjoint)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(r: usize, c: usize, seed: u64) -> DMatrix<Complex64> {
        let mut state = seed;
        let mut next = || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((state >> 11) as f64 / (1u64 << 53) as f64) - 0.5
        };
        DMatrix::from_fn(r, c, |_, _| Complex64::new(next(), next()))
    }

    #[test]
    fn matmul_matches_nalgebra_for_all_ops() {
        let a = sample(7, 5, 1);
        let b = sample(5, 6, 2);
        let bt = sample(6, 5, 3);
        assert!(max_abs_diff(&matmul(&a, Op::None, &b, Op::None), &(&a * &b)) < 1e-13);
        assert!(max_abs_diff(&matmul(&a, Op::None, &bt, Op::Transpose), &(&a * bt.transpose())) < 1e-13);
        assert!(max_abs_diff(&matmul(&a, Op::None, &bt, Op::Adjoint), &(&a * bt.adjoint())) < 1e-13);
        let at = sample(5, 7, 4);
        assert!(max_abs_diff(&matmul(&at, Op::Adjoint, &b, Op::None), &(at.adjoint() * &b)) < 1e-13);
    }

    #[test]
    fn par_matmul_matches_serial() {
        let k = sample(9, 9, 5);
        let y = sample(9, 14, 6);
        let mut out = DMatrix::zeros(9, 14);
        par_matmul_into(&k, &y, &mut out);
        assert!(max_abs_diff(&out, &(&k * &y)) < 1e-13);
    }

    #[test]
    fn takagi_reconstructs_degenerate_symmetric_unitary() {
        // symmetric unitary matrix with a fully degenerate spectrum
        let x = polar_unitary(&sample(4, 4, 7));
        let g = x.transpose() * &x;
        let (d, y) = takagi(&g);
        for v in &d {
            assert!((v - 1.0).abs() < 1e-12);
        }
        let back = &y * y.transpose();
        assert!(max_abs_diff(&back, &g) < 1e-12);
        assert!(max_abs_diff(&(y.adjoint() * &y), &DMatrix::identity(4, 4)) < 1e-12);
    }

    #[test]
    fn svd_of_rank_deficient_matrix() {
        let n = 64;
        let f: Vec<f64> = (0..n).map(|i| (-((i as f64 - 31.5) / 10.0).powi(2)).exp()).collect();
        let m = DMatrix::from_fn(n, n, |i, j| Complex64::new(0.0, f[i] * f[j]));
        let (u, s, v) = svd_sorted(&m);
        let norm: f64 = f.iter().map(|x| x * x).sum();
        assert!((s[0] - norm).abs() < 1e-12 * norm);
        assert!(s[1] < 1e-14 * norm);
        let d = DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(n, s.iter().map(|x| Complex64::new(*x, 0.0))));
        assert!(max_abs_diff(&(&u * d * v.adjoint()), &m) < 1e-13);
        assert!(max_abs_diff(&(u.adjoint() * &u), &DMatrix::identity(n, n)) < 1e-13);
    }

    #[test]
    fn svd_is_sorted_and_exact() {
        let m = sample(8, 8, 9);
        let (u, s, v) = svd_sorted(&m);
        assert!(s.windows(2).all(|w| w[0] >= w[1]));
        let d = DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(8, s.iter().map(|x| Complex64::new(*x, 0.0))));
        assert!(max_abs_diff(&(u * d * v.adjoint()), &m) < 1e-12);
    }
}
