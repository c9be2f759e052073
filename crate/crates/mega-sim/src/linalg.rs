//! Thin wrapper around the dense Hermitian eigensolver.

use faer::complex_native::c64;
use faer::{Mat, Side};
use ndarray::{Array1, Array2, ArrayView2};
use num_complex::Complex64;

/// Full eigendecomposition of a Hermitian matrix. Only the lower triangle is
/// read. Returns eigenvalues in ascending order and the matching eigenvector
/// columns.
pub fn eigh(matrix: ArrayView2<Complex64>) -> (Vec<f64>, Array2<Complex64>) {
    let n = matrix.nrows();
    assert_eq!(n, matrix.ncols());
    let mut m = Mat::<c64>::zeros(n, n);
    for r in 0..n {
        for c in 0..n {
            let v = matrix[[r, c]];
            m[(r, c)] = c64::new(v.re, v.im);
        }
    }
    let evd = m.selfadjoint_eigendecomposition(Side::Lower);
    let s = evd.s();
    let u = evd.u();
    let mut vals: Vec<f64> = (0..n).map(|i| s.column_vector()[i].re).collect();
    let mut vecs = Array2::<Complex64>::zeros((n, n));
    for c in 0..n {
        for r in 0..n {
            let v = u[(r, c)];
            vecs[[r, c]] = Complex64::new(v.re, v.im);
        }
    }
    // enforce ascending order
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| vals[a].partial_cmp(&vals[b]).unwrap());
    if order.iter().enumerate().any(|(i, &o)| i != o) {
        let sorted_vals: Vec<f64> = order.iter().map(|&o| vals[o]).collect();
        let mut sorted_vecs = Array2::<Complex64>::zeros((n, n));
        for (i, &o) in order.iter().enumerate() {
            sorted_vecs.column_mut(i).assign(&vecs.column(o));
        }
        vals = sorted_vals;
        vecs = sorted_vecs;
    }
    (vals, vecs)
}

/// `A† v` for a dense matrix whose columns are orthonormal vectors.
pub fn adjoint_apply(matrix: &Array2<Complex64>, v: &Array1<Complex64>) -> Array1<Complex64> {
    let n = matrix.ncols();
    let mut out = Array1::<Complex64>::zeros(n);
    for c in 0..n {
        let col = matrix.column(c);
        out[c] = col
            .iter()
            .zip(v.iter())
            .map(|(a, b)| a.conj() * b)
            .sum::<Complex64>();
    }
    out
}
