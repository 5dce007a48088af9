//! Dense kernels over row-major slices.

use super::Tensor;

/// Runs a kernel through an AVX2-enabled copy when the CPU has it. The
/// kernels fix their summation order and never fuse multiply-add, so both
/// copies give identical bits.
macro_rules! dispatch {
    ($generic:ident, $avx:ident, fn $name:ident($($arg:ident: $ty:ty),*) $(-> $ret:ty)?) => {
        #[cfg(target_arch = "x86_64")]
        #[target_feature(enable = "avx2")]
        unsafe fn $avx($($arg: $ty),*) $(-> $ret)? {
            $generic($($arg),*)
        }

        pub fn $name($($arg: $ty),*) $(-> $ret)? {
            #[cfg(target_arch = "x86_64")]
            if std::arch::is_x86_feature_detected!("avx2") {
                // SAFETY: the feature was detected at runtime
                return unsafe { $avx($($arg),*) };
            }
            $generic($($arg),*)
        }
    };
}

dispatch!(linear_impl, linear_avx2, fn linear(x: &[f64], n: usize, w: &Tensor, b: &Tensor) -> Vec<f64>);
dispatch!(
    linear_backward_params_impl,
    linear_backward_params_avx2,
    fn linear_backward_params(x: &[f64], dy: &[f64], dw: &mut Tensor, db: &mut Tensor)
);
dispatch!(
    linear_backward_impl,
    linear_backward_avx2,
    fn linear_backward(x: &[f64], dy: &[f64], w: &Tensor, dw: &mut Tensor, db: &mut Tensor) -> Vec<f64>
);

/// `c[n, m] += a[n, k] * b[k, m]`, accumulated over `k` in order for every
/// output entry. Full 4 x 8 output tiles stay in registers.
#[inline(always)]
fn gemm_acc(a: &[f64], n: usize, k: usize, b: &[f64], m: usize, c: &mut [f64]) {
    const R: usize = 4;
    const C: usize = 8;
    debug_assert!(a.len() == n * k && b.len() == k * m && c.len() == n * m);
    for r0 in (0..n).step_by(R) {
        for j0 in (0..m).step_by(C) {
            if r0 + R <= n && j0 + C <= m {
                let mut acc = [[0.0; C]; R];
                for (r, row) in acc.iter_mut().enumerate() {
                    row.copy_from_slice(&c[(r0 + r) * m + j0..(r0 + r) * m + j0 + C]);
                }
                for p in 0..k {
                    let bp = &b[p * m + j0..p * m + j0 + C];
                    for (r, row) in acc.iter_mut().enumerate() {
                        let av = a[(r0 + r) * k + p];
                        for cc in 0..C {
                            row[cc] += av * bp[cc];
                        }
                    }
                }
                for (r, row) in acc.iter().enumerate() {
                    c[(r0 + r) * m + j0..(r0 + r) * m + j0 + C].copy_from_slice(row);
                }
            } else {
                for r in r0..(r0 + R).min(n) {
                    for j in j0..(j0 + C).min(m) {
                        let mut v = c[r * m + j];
                        for p in 0..k {
                            v += a[r * k + p] * b[p * m + j];
                        }
                        c[r * m + j] = v;
                    }
                }
            }
        }
    }
}

fn transpose(x: &[f64], rows: usize, cols: usize) -> Vec<f64> {
    let mut t = vec![0.0; x.len()];
    for (i, row) in x.chunks_exact(cols).enumerate() {
        for (j, &v) in row.iter().enumerate() {
            t[j * rows + i] = v;
        }
    }
    t
}

/// `x[n, k] * w[k, m] + b[m]`.
#[inline(always)]
fn linear_impl(x: &[f64], n: usize, w: &Tensor, b: &Tensor) -> Vec<f64> {
    let (k, m) = (w.shape[0], w.shape[1]);
    let mut out = Vec::with_capacity(n * m);
    for _ in 0..n {
        out.extend_from_slice(&b.data);
    }
    gemm_acc(x, n, k, &w.data, m, &mut out);
    out
}

/// Parameter half of the [`linear`] backward pass: `dw += x^T dy`,
/// `db += sum(dy)`.
#[inline(always)]
fn linear_backward_params_impl(x: &[f64], dy: &[f64], dw: &mut Tensor, db: &mut Tensor) {
    let (k, m) = (dw.shape[0], dw.shape[1]);
    let n = dy.len() / m;
    for dyrow in dy.chunks_exact(m) {
        for (b, g) in db.data.iter_mut().zip(dyrow) {
            *b += g;
        }
    }
    gemm_acc(&transpose(x, n, k), k, n, dy, m, &mut dw.data);
}

/// Backward of [`linear`]: accumulates the parameter gradients and returns
/// `dx = dy w^T`.
#[inline(always)]
fn linear_backward_impl(x: &[f64], dy: &[f64], w: &Tensor, dw: &mut Tensor, db: &mut Tensor) -> Vec<f64> {
    linear_backward_params_impl(x, dy, dw, db);
    let (k, m) = (w.shape[0], w.shape[1]);
    let n = dy.len() / m;
    let mut dx = vec![0.0; n * k];
    gemm_acc(dy, n, m, &transpose(&w.data, k, m), k, &mut dx);
    dx
}

#[cfg(test)]
mod gemm_tests {
    use super::*;

    #[test]
    fn gemm_matches_naive_on_ragged_shapes() {
        for (n, k, m) in [(1, 1, 1), (5, 3, 9), (4, 7, 8), (9, 2, 17)] {
            let a: Vec<f64> = (0..n * k).map(|i| (i as f64 * 0.37).sin()).collect();
            let b: Vec<f64> = (0..k * m).map(|i| (i as f64 * 0.91).cos()).collect();
            let mut c = vec![0.5; n * m];
            gemm_acc(&a, n, k, &b, m, &mut c);
            for r in 0..n {
                for j in 0..m {
                    let mut v = 0.5;
                    for p in 0..k {
                        v += a[r * k + p] * b[p * m + j];
                    }
                    assert_eq!(c[r * m + j], v);
                }
            }
        }
    }
}

pub const LAYER_NORM_EPS: f64 = 1e-5;

/// Per-row normalization statistics kept for the backward pass.
pub struct NormCache {
    pub normalized: Vec<f64>,
    pub inv_std: Vec<f64>,
}

pub fn layer_norm(x: &[f64], width: usize, gain: &Tensor, bias: &Tensor) -> (Vec<f64>, NormCache) {
    let rows = x.len() / width;
    let mut y = vec![0.0; x.len()];
    let mut normalized = vec![0.0; x.len()];
    let mut inv_std = Vec::with_capacity(rows);
    for ((row, yrow), nrow) in x
        .chunks_exact(width)
        .zip(y.chunks_exact_mut(width))
        .zip(normalized.chunks_exact_mut(width))
    {
        let mean = row.iter().sum::<f64>() / width as f64;
        let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / width as f64;
        let r = 1.0 / (var + LAYER_NORM_EPS).sqrt();
        inv_std.push(r);
        for (j, v) in row.iter().enumerate() {
            let xn = (v - mean) * r;
            nrow[j] = xn;
            yrow[j] = gain.data[j] * xn + bias.data[j];
        }
    }
    (y, NormCache { normalized, inv_std })
}

pub fn layer_norm_backward(
    dy: &[f64],
    width: usize,
    cache: &NormCache,
    gain: &Tensor,
    dgain: &mut Tensor,
    dbias: &mut Tensor,
) -> Vec<f64> {
    let mut dx = vec![0.0; dy.len()];
    let mut dxhat = vec![0.0; width];
    for (((dyrow, nrow), dxrow), &r) in dy
        .chunks_exact(width)
        .zip(cache.normalized.chunks_exact(width))
        .zip(dx.chunks_exact_mut(width))
        .zip(&cache.inv_std)
    {
        let mut mean_d = 0.0;
        let mut mean_dn = 0.0;
        for j in 0..width {
            dgain.data[j] += dyrow[j] * nrow[j];
            dbias.data[j] += dyrow[j];
            dxhat[j] = dyrow[j] * gain.data[j];
            mean_d += dxhat[j];
            mean_dn += dxhat[j] * nrow[j];
        }
        mean_d /= width as f64;
        mean_dn /= width as f64;
        for j in 0..width {
            dxrow[j] = r * (dxhat[j] - mean_d - nrow[j] * mean_dn);
        }
    }
    dx
}

/// Numerically stable in-place softmax.
pub fn softmax(row: &mut [f64]) {
    let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in row.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    for v in row.iter_mut() {
        *v /= sum;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_matches_hand_product() {
        let w = Tensor {
            shape: vec![2, 3],
            data: vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0],
        };
        let b = Tensor {
            shape: vec![3],
            data: vec![0.5, 0.0, -0.5],
        };
        let y = linear(&[1.0, -1.0, 2.0, 0.0], 2, &w, &b);
        assert_eq!(y, vec![-2.5, -3.0, -3.5, 2.5, 4.0, 5.5]);
    }

    #[test]
    fn layer_norm_output_is_standardized() {
        let g = Tensor::filled(&[4], 1.0);
        let b = Tensor::zeros(&[4]);
        let (y, _) = layer_norm(&[1.0, 2.0, 3.0, 4.0], 4, &g, &b);
        let mean: f64 = y.iter().sum::<f64>() / 4.0;
        let var: f64 = y.iter().map(|v| v * v).sum::<f64>() / 4.0;
        assert!(mean.abs() < 1e-12);
        assert!((var - 1.0).abs() < 1e-4);
    }

    #[test]
    fn softmax_sums_to_one() {
        let mut r = [1000.0, 1001.0, 999.0];
        softmax(&mut r);
        assert!((r.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(r[1] > r[0] && r[0] > r[2]);
    }
}
