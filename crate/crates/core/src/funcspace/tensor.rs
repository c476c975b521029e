//! Axis-wise operations on row-major tensors.

/// Contract dimension `axis` of `data` (shape `shape`) with the row-major
/// `rows × shape[axis]` matrix `mat`.
pub(crate) fn apply_axis(
    data: &[f64],
    shape: &[usize],
    axis: usize,
    mat: &[f64],
    rows: usize,
) -> (Vec<f64>, Vec<usize>) {
    let outer: usize = shape[..axis].iter().product();
    let n = shape[axis];
    let inner: usize = shape[axis + 1..].iter().product();
    let mut out = vec![0.0; outer * rows * inner];
    for o in 0..outer {
        let src = &data[o * n * inner..(o + 1) * n * inner];
        let dst = &mut out[o * rows * inner..(o + 1) * rows * inner];
        for r in 0..rows {
            let row = &mut dst[r * inner..(r + 1) * inner];
            for j in 0..n {
                let w = mat[r * n + j];
                if w == 0.0 {
                    continue;
                }
                let s = &src[j * inner..(j + 1) * inner];
                for (a, b) in row.iter_mut().zip(s) {
                    *a += w * b;
                }
            }
        }
    }
    let mut new_shape = shape.to_vec();
    new_shape[axis] = rows;
    (out, new_shape)
}

/// Apply `f` to every fiber along `axis`, producing fibers of length
/// `new_len`.
pub(crate) fn map_axis(
    data: &[f64],
    shape: &[usize],
    axis: usize,
    new_len: usize,
    f: &dyn Fn(&[f64], &mut [f64]),
) -> Vec<f64> {
    let outer: usize = shape[..axis].iter().product();
    let n = shape[axis];
    let inner: usize = shape[axis + 1..].iter().product();
    let mut out = vec![0.0; outer * new_len * inner];
    let mut fib = vec![0.0; n];
    let mut res = vec![0.0; new_len];
    for o in 0..outer {
        for i in 0..inner {
            for j in 0..n {
                fib[j] = data[o * n * inner + j * inner + i];
            }
            res.iter_mut().for_each(|v| *v = 0.0);
            f(&fib, &mut res);
            for (j, v) in res.iter().enumerate() {
                out[o * new_len * inner + j * inner + i] = *v;
            }
        }
    }
    out
}
