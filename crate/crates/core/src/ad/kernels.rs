//! Dense-layer kernels shared by the tape and the tape-free forward pass.
//!
//! Weights are stored `fan_in x fan_out` row-major, so the forward pass and
//! the weight gradient are both `axpy` sweeps over contiguous rows.

use super::net::Dense;

#[inline]
fn axpy(y: &mut [f64], a: f64, x: &[f64]) {
    for (yi, &xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0f64; 4];
    let ca = a.chunks_exact(4);
    let cb = b.chunks_exact(4);
    let tail: f64 = ca
        .remainder()
        .iter()
        .zip(cb.remainder())
        .map(|(x, y)| x * y)
        .sum();
    for (x, y) in ca.zip(cb) {
        acc[0] += x[0] * y[0];
        acc[1] += x[1] * y[1];
        acc[2] += x[2] * y[2];
        acc[3] += x[3] * y[3];
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// `out[r, :] = b + sum_i x[r, i] * W[i, :]`
pub(crate) fn dense_forward(x: &[f64], rows: usize, params: &[f64], layer: Dense, out: &mut [f64]) {
    let (n_in, n_out) = (layer.fan_in, layer.fan_out);
    let w = &params[layer.weight_offset..layer.weight_offset + n_in * n_out];
    let b = &params[layer.bias_offset..layer.bias_offset + n_out];
    for r in 0..rows {
        let y = &mut out[r * n_out..(r + 1) * n_out];
        y.copy_from_slice(b);
        for (i, &xi) in x[r * n_in..(r + 1) * n_in].iter().enumerate() {
            if xi != 0.0 {
                axpy(y, xi, &w[i * n_out..(i + 1) * n_out]);
            }
        }
    }
}

/// Accumulates dW and db into the flat parameter gradient.
pub(crate) fn dense_backward_params(
    x: &[f64],
    rows: usize,
    dy: &[f64],
    layer: Dense,
    dparams: &mut [f64],
) {
    let (n_in, n_out) = (layer.fan_in, layer.fan_out);
    for r in 0..rows {
        let g = &dy[r * n_out..(r + 1) * n_out];
        {
            let db = &mut dparams[layer.bias_offset..layer.bias_offset + n_out];
            axpy(db, 1.0, g);
        }
        let dw = &mut dparams[layer.weight_offset..layer.weight_offset + n_in * n_out];
        for (i, &xi) in x[r * n_in..(r + 1) * n_in].iter().enumerate() {
            if xi != 0.0 {
                axpy(&mut dw[i * n_out..(i + 1) * n_out], xi, g);
            }
        }
    }
}

/// Accumulates `dx[r, i] += sum_j W[i, j] * dy[r, j]`.
pub(crate) fn dense_backward_input(
    params: &[f64],
    rows: usize,
    dy: &[f64],
    layer: Dense,
    dx: &mut [f64],
) {
    let (n_in, n_out) = (layer.fan_in, layer.fan_out);
    let w = &params[layer.weight_offset..layer.weight_offset + n_in * n_out];
    for r in 0..rows {
        let g = &dy[r * n_out..(r + 1) * n_out];
        if g.iter().all(|&v| v == 0.0) {
            continue;
        }
        let dxr = &mut dx[r * n_in..(r + 1) * n_in];
        for (i, d) in dxr.iter_mut().enumerate() {
            *d += dot(&w[i * n_out..(i + 1) * n_out], g);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dot_handles_remainders() {
        let a: Vec<f64> = (0..7).map(f64::from).collect();
        let b = vec![1.0; 7];
        assert_eq!(dot(&a, &b), 21.0);
    }
}
