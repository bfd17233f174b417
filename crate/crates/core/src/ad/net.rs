//! The two-hidden-layer rectified Q network.
//!
//! Parameters live in one flat vector with a fixed layout: layer-1 weights,
//! layer-1 biases, layer-2 weights, layer-2 biases, output weights, output
//! biases. Each weight block is `fan_in x fan_out`, row-major.

use std::io::{Read, Write};
use std::path::Path;

use rand::Rng;
use rand_distr::StandardNormal;

use super::kernels;
use super::tape::{Tape, Var};
use crate::error::{ensure_len, Error, Result};

pub const DEFAULT_HIDDEN: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct NetShape {
    pub input_dim: usize,
    pub hidden: usize,
    pub output_dim: usize,
}

/// Location of one affine layer inside the flat parameter vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Dense {
    pub weight_offset: usize,
    pub bias_offset: usize,
    pub fan_in: usize,
    pub fan_out: usize,
}

impl Dense {
    pub fn end(&self) -> usize {
        self.bias_offset + self.fan_out
    }
}

impl NetShape {
    pub fn new(input_dim: usize, hidden: usize, output_dim: usize) -> Result<Self> {
        if input_dim == 0 || hidden == 0 || output_dim == 0 {
            return Err(Error::InvalidInput(format!(
                "network dimensions must be positive, got ({input_dim}, {hidden}, {output_dim})"
            )));
        }
        Ok(Self {
            input_dim,
            hidden,
            output_dim,
        })
    }

    pub fn parameter_count(&self) -> usize {
        (self.input_dim + 1) * self.hidden
            + (self.hidden + 1) * self.hidden
            + (self.hidden + 1) * self.output_dim
    }

    pub fn layers(&self) -> [Dense; 3] {
        let mut offset = 0;
        let mut next = |fan_in: usize, fan_out: usize| {
            let d = Dense {
                weight_offset: offset,
                bias_offset: offset + fan_in * fan_out,
                fan_in,
                fan_out,
            };
            offset = d.end();
            d
        };
        [
            next(self.input_dim, self.hidden),
            next(self.hidden, self.hidden),
            next(self.hidden, self.output_dim),
        ]
    }

    /// Gaussian weights with std `1/sqrt(fan_in)`, zero biases.
    pub fn init<R: Rng + ?Sized>(&self, rng: &mut R) -> NetParams {
        let mut values = vec![0.0; self.parameter_count()];
        for layer in self.layers() {
            let std = 1.0 / (layer.fan_in as f64).sqrt();
            let w = &mut values[layer.weight_offset..layer.bias_offset];
            for v in w.iter_mut() {
                let z: f64 = rng.sample(StandardNormal);
                *v = std * z;
            }
        }
        NetParams { values }
    }

    pub fn zeros(&self) -> NetParams {
        NetParams {
            values: vec![0.0; self.parameter_count()],
        }
    }

    fn check_params(&self, params: &NetParams) -> Result<()> {
        ensure_len("parameter vector", self.parameter_count(), params.len())
    }

    /// Q values for one state.
    pub fn forward(&self, params: &NetParams, state: &[f64]) -> Result<Vec<f64>> {
        ensure_len("state", self.input_dim, state.len())?;
        self.forward_batch(params, state, 1)
    }

    /// Q values for `rows` states stacked row-major; returns `rows x output_dim`.
    pub fn forward_batch(&self, params: &NetParams, states: &[f64], rows: usize) -> Result<Vec<f64>> {
        self.check_params(params)?;
        ensure_len("state batch", rows * self.input_dim, states.len())?;
        Ok(self.forward_unchecked(&params.values, states, rows))
    }

    pub(crate) fn forward_unchecked(&self, params: &[f64], states: &[f64], rows: usize) -> Vec<f64> {
        let [l1, l2, l3] = self.layers();
        let mut h1 = vec![0.0; rows * self.hidden];
        kernels::dense_forward(states, rows, params, l1, &mut h1);
        relu_in_place(&mut h1);
        let mut h2 = vec![0.0; rows * self.hidden];
        kernels::dense_forward(&h1, rows, params, l2, &mut h2);
        relu_in_place(&mut h2);
        let mut out = vec![0.0; rows * self.output_dim];
        kernels::dense_forward(&h2, rows, params, l3, &mut out);
        out
    }

    /// Records the forward pass for `states` (a `rows x input_dim` node) on
    /// `tape`, returning the `rows x output_dim` output node.
    pub fn forward_on_tape(&self, tape: &mut Tape, params: Var, states: Var) -> Result<Var> {
        ensure_len("parameter vector", self.parameter_count(), tape.value(params).len())?;
        let [l1, l2, l3] = self.layers();
        let h = tape.dense(states, params, l1)?;
        let h = tape.relu(h)?;
        let h = tape.dense(h, params, l2)?;
        let h = tape.relu(h)?;
        tape.dense(h, params, l3)
    }
}

fn relu_in_place(v: &mut [f64]) {
    for x in v {
        *x = x.max(0.0);
    }
}

/// Flat parameter vector of a Q network.
#[derive(Debug, Clone, PartialEq)]
pub struct NetParams {
    pub values: Vec<f64>,
}

impl NetParams {
    pub fn new(values: Vec<f64>) -> Self {
        Self { values }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}

/// Differentiates a scalar loss built from the network parameters.
///
/// `loss_fn` receives the tape and the parameter node and returns the scalar
/// loss node. Returns the loss value and its gradient.
pub fn grad<F>(shape: &NetShape, params: &NetParams, loss_fn: F) -> Result<(f64, Vec<f64>)>
where
    F: FnOnce(&mut Tape, Var) -> Result<Var>,
{
    shape.check_params(params)?;
    let mut tape = Tape::new();
    let p = tape.param(&params.values);
    let loss = loss_fn(&mut tape, p)?;
    let mut grads = tape.backward(loss)?;
    Ok((tape.scalar(loss), grads.take(p)))
}

// Checkpoint envelope: three little-endian u64 shape integers, then the f64 arrays.

pub(crate) fn write_shape<W: Write>(w: &mut W, shape: &NetShape) -> Result<()> {
    for d in [shape.input_dim, shape.hidden, shape.output_dim] {
        w.write_all(&(d as u64).to_le_bytes())?;
    }
    Ok(())
}

pub(crate) fn read_shape<R: Read>(r: &mut R) -> Result<NetShape> {
    let mut dims = [0usize; 3];
    for d in &mut dims {
        let mut buf = [0u8; 8];
        r.read_exact(&mut buf)?;
        *d = usize::try_from(u64::from_le_bytes(buf))
            .map_err(|_| Error::Parse("shape integer out of range".into()))?;
    }
    NetShape::new(dims[0], dims[1], dims[2])
}

pub(crate) fn write_f64s<W: Write>(w: &mut W, values: &[f64]) -> Result<()> {
    let mut buf = Vec::with_capacity(values.len() * 8);
    for v in values {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    w.write_all(&buf)?;
    Ok(())
}

pub(crate) fn read_f64s<R: Read>(r: &mut R, n: usize) -> Result<Vec<f64>> {
    let mut buf = vec![0u8; n * 8];
    r.read_exact(&mut buf)?;
    Ok(buf
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect())
}

pub fn encode_params(shape: &NetShape, params: &NetParams) -> Result<Vec<u8>> {
    shape.check_params(params)?;
    let mut out = Vec::with_capacity(24 + params.len() * 8);
    write_shape(&mut out, shape)?;
    write_f64s(&mut out, &params.values)?;
    Ok(out)
}

pub fn decode_params(mut bytes: &[u8]) -> Result<(NetShape, NetParams)> {
    let shape = read_shape(&mut bytes)?;
    let values = read_f64s(&mut bytes, shape.parameter_count())?;
    if !bytes.is_empty() {
        return Err(Error::Parse(format!("{} trailing bytes after parameters", bytes.len())));
    }
    Ok((shape, NetParams { values }))
}

pub fn save_params(path: &Path, shape: &NetShape, params: &NetParams) -> Result<()> {
    std::fs::write(path, encode_params(shape, params)?)?;
    Ok(())
}

pub fn load_params(path: &Path) -> Result<(NetShape, NetParams)> {
    decode_params(&std::fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use crate::rng::seeded;
    use proptest::prelude::*;

    /// Straight-line matrix arithmetic, no shared kernels.
    fn oracle_forward(shape: &NetShape, p: &[f64], s: &[f64]) -> Vec<f64> {
        let layer = |x: &[f64], off: usize, n_in: usize, n_out: usize, relu: bool| {
            let mut y = vec![0.0; n_out];
            for j in 0..n_out {
                let mut acc = p[off + n_in * n_out + j];
                for i in 0..n_in {
                    acc += x[i] * p[off + i * n_out + j];
                }
                y[j] = if relu && acc < 0.0 { 0.0 } else { acc };
            }
            y
        };
        let (i, h, o) = (shape.input_dim, shape.hidden, shape.output_dim);
        let h1 = layer(s, 0, i, h, true);
        let off2 = (i + 1) * h;
        let h2 = layer(&h1, off2, h, h, true);
        let off3 = off2 + (h + 1) * h;
        layer(&h2, off3, h, o, false)
    }

    #[test]
    fn parameter_count_formula() {
        let s = NetShape::new(4, 100, 2).unwrap();
        assert_eq!(s.parameter_count(), 5 * 100 + 101 * 100 + 101 * 2);
        assert_eq!(s.layers()[2].end(), s.parameter_count());
    }

    #[test]
    fn zero_params_give_zero_output() {
        let s = NetShape::new(3, 5, 2).unwrap();
        assert_eq!(s.forward(&s.zeros(), &[1.0, -2.0, 3.0]).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn relu_clamps_negative_input() {
        // 1-2-1 net computing ReLU(x) through an identity second layer.
        let s = NetShape::new(1, 2, 1).unwrap();
        let mut p = s.zeros();
        let [l1, l2, l3] = s.layers();
        p.values[l1.weight_offset] = 1.0;
        p.values[l2.weight_offset] = 1.0;
        p.values[l3.weight_offset] = 1.0;
        assert_eq!(s.forward(&p, &[-3.0]).unwrap(), vec![0.0]);
        assert_eq!(s.forward(&p, &[2.5]).unwrap(), vec![2.5]);
    }

    #[test]
    fn forward_matches_matrix_oracle() {
        let s = NetShape::new(4, 16, 3).unwrap();
        let mut rng = seeded(11);
        for _ in 0..20 {
            let p = s.init(&mut rng);
            let state: Vec<f64> = (0..4).map(|_| rng.random_range(-2.0..2.0)).collect();
            let got = s.forward(&p, &state).unwrap();
            let want = oracle_forward(&s, &p.values, &state);
            for (g, w) in got.iter().zip(&want) {
                assert!((g - w).abs() <= 1e-12 * w.abs().max(1.0), "{g} vs {w}");
            }
        }
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let s = NetShape::new(2, 3, 2).unwrap();
        let p = s.zeros();
        assert!(matches!(s.forward(&p, &[1.0]), Err(Error::Dimension { .. })));
        let short = NetParams::new(vec![0.0; 3]);
        assert!(matches!(s.forward(&short, &[1.0, 2.0]), Err(Error::Dimension { .. })));
        assert!(NetShape::new(0, 3, 2).is_err());
    }

    #[test]
    fn one_path_chain_rule() {
        // 1-1-1 net, loss = Q^2, v = w3*relu(w2*relu(w1*x)); dL/dw1 = 2v * w3*w2*x.
        let s = NetShape::new(1, 1, 1).unwrap();
        let p = NetParams::new(vec![0.5, 0.0, 2.0, 0.0, 3.0, 0.0]);
        let x = 1.5;
        let (loss, g) = grad(&s, &p, |t, pv| {
            let st = t.constant(vec![x], 1, 1)?;
            let q = s.forward_on_tape(t, pv, st)?;
            let sq = t.square(q)?;
            t.sum(sq)
        })
        .unwrap();
        let v = 3.0 * 2.0 * 0.5 * x;
        assert!((loss - v * v).abs() < 1e-12);
        assert!((g[0] - 2.0 * v * 3.0 * 2.0 * x).abs() < 1e-12);
        assert!((g[5] - 2.0 * v).abs() < 1e-12);
    }

    #[test]
    fn tape_forward_matches_fast_path() {
        let s = NetShape::new(4, 8, 2).unwrap();
        let mut rng = seeded(5);
        let p = s.init(&mut rng);
        let states: Vec<f64> = (0..12).map(|_| rng.random_range(-1.0..1.0)).collect();
        let fast = s.forward_batch(&p, &states, 3).unwrap();
        let mut t = Tape::new();
        let pv = t.param(&p.values);
        let sv = t.constant(states, 3, 4).unwrap();
        let out = s.forward_on_tape(&mut t, pv, sv).unwrap();
        assert_eq!(t.value(out), &fast[..]);
    }

    #[test]
    fn decode_rejects_truncated_and_trailing() {
        let s = NetShape::new(2, 3, 2).unwrap();
        let bytes = encode_params(&s, &s.zeros()).unwrap();
        assert!(decode_params(&bytes[..bytes.len() - 1]).is_err());
        let mut extra = bytes.clone();
        extra.push(0);
        assert!(decode_params(&extra).is_err());
    }

    proptest! {
        #[test]
        fn checkpoint_round_trip_is_bit_exact(seed in any::<u64>(), x in prop::collection::vec(-5.0f64..5.0, 3)) {
            let s = NetShape::new(3, 6, 2).unwrap();
            let p = s.init(&mut seeded(seed));
            let (s2, p2) = decode_params(&encode_params(&s, &p).unwrap()).unwrap();
            prop_assert_eq!(s, s2);
            let a = s.forward(&p, &x).unwrap();
            let b = s2.forward(&p2, &x).unwrap();
            prop_assert_eq!(a.iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
                            b.iter().map(|v| v.to_bits()).collect::<Vec<_>>());
        }

        #[test]
        fn bias_free_network_is_positively_homogeneous(seed in any::<u64>(), alpha in 0.01f64..10.0,
                                                       x in prop::collection::vec(-3.0f64..3.0, 4)) {
            let s = NetShape::new(4, 8, 2).unwrap();
            let p = s.init(&mut seeded(seed));
            let scaled: Vec<f64> = x.iter().map(|v| alpha * v).collect();
            let a = s.forward(&p, &scaled).unwrap();
            let b = s.forward(&p, &x).unwrap();
            for (u, v) in a.iter().zip(&b) {
                prop_assert!((u - alpha * v).abs() <= 1e-10 * (1.0 + u.abs()));
            }
        }
    }
}
