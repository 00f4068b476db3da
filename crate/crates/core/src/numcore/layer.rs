use rand::Rng;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Activation {
    Relu,
    Sigmoid,
    Identity,
}

impl Activation {
    #[inline]
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Relu => x.max(0.0),
            Activation::Sigmoid => sigmoid(x),
            Activation::Identity => x,
        }
    }

    /// Derivative expressed through the pre-activation `z` and the output `a`.
    #[inline]
    fn derivative(self, z: f64, a: f64) -> f64 {
        match self {
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Sigmoid => a * (1.0 - a),
            Activation::Identity => 1.0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Activation::Relu => "relu",
            Activation::Sigmoid => "sigmoid",
            Activation::Identity => "identity",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "relu" => Some(Activation::Relu),
            "sigmoid" => Some(Activation::Sigmoid),
            "identity" => Some(Activation::Identity),
            _ => None,
        }
    }
}

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// One affine layer followed by an elementwise activation.
///
/// `weights` is row-major with shape `(out_dim, in_dim)`. A layer built
/// without bias keeps `biases = None` and contributes no bias parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    pub in_dim: usize,
    pub out_dim: usize,
    pub weights: Vec<f64>,
    pub biases: Option<Vec<f64>>,
    pub activation: Activation,
}

impl DenseLayer {
    pub fn new(
        in_dim: usize,
        out_dim: usize,
        weights: Vec<f64>,
        biases: Option<Vec<f64>>,
        activation: Activation,
    ) -> Result<Self> {
        if weights.len() != in_dim * out_dim {
            return Err(Error::shape("layer weights", in_dim * out_dim, weights.len()));
        }
        if let Some(b) = &biases {
            if b.len() != out_dim {
                return Err(Error::shape("layer biases", out_dim, b.len()));
            }
        }
        Ok(Self {
            in_dim,
            out_dim,
            weights,
            biases,
            activation,
        })
    }

    /// Uniform fan-in initialization, `U(-sqrt(6/fan_in), sqrt(6/fan_in))`, zero bias.
    pub fn init<R: Rng + ?Sized>(
        in_dim: usize,
        out_dim: usize,
        bias: bool,
        activation: Activation,
        rng: &mut R,
    ) -> Self {
        let limit = (6.0 / in_dim.max(1) as f64).sqrt();
        let weights = (0..in_dim * out_dim)
            .map(|_| rng.random_range(-limit..=limit))
            .collect();
        Self {
            in_dim,
            out_dim,
            weights,
            biases: bias.then(|| vec![0.0; out_dim]),
            activation,
        }
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            in_dim: self.in_dim,
            out_dim: self.out_dim,
            weights: vec![0.0; self.weights.len()],
            biases: self.biases.as_ref().map(|b| vec![0.0; b.len()]),
            activation: self.activation,
        }
    }

    fn preactivation_into(&self, input: &[f64], out: &mut Vec<f64>) {
        out.clear();
        for r in 0..self.out_dim {
            let row = &self.weights[r * self.in_dim..(r + 1) * self.in_dim];
            let mut acc = self.biases.as_ref().map_or(0.0, |b| b[r]);
            for (w, x) in row.iter().zip(input) {
                acc += w * x;
            }
            out.push(acc);
        }
    }

    pub fn same_shape(&self, other: &Self) -> bool {
        self.in_dim == other.in_dim
            && self.out_dim == other.out_dim
            && self.biases.is_some() == other.biases.is_some()
    }

    pub fn values(&self) -> impl Iterator<Item = &f64> {
        self.weights.iter().chain(self.biases.iter().flatten())
    }

    pub fn values_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.weights.iter_mut().chain(self.biases.iter_mut().flatten())
    }
}

/// Feed-forward stack of [`DenseLayer`]s.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    pub layers: Vec<DenseLayer>,
}

/// Cached intermediate values of one forward pass, consumed by [`Mlp::backward`].
#[derive(Debug, Clone, Default)]
pub struct Trace {
    /// `outputs[0]` is the input; `outputs[l + 1]` is the output of layer `l`.
    outputs: Vec<Vec<f64>>,
    pre: Vec<Vec<f64>>,
}

impl Trace {
    pub fn output(&self) -> &[f64] {
        self.outputs.last().map(Vec::as_slice).unwrap_or(&[])
    }
}

impl Mlp {
    pub fn new(layers: Vec<DenseLayer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::Config("an MLP needs at least one layer".into()));
        }
        for (l, pair) in layers.windows(2).enumerate() {
            if pair[0].out_dim != pair[1].in_dim {
                return Err(Error::shape(
                    format!("layer {} input", l + 1),
                    pair[0].out_dim,
                    pair[1].in_dim,
                ));
            }
        }
        Ok(Self { layers })
    }

    /// Builds `dims.len() - 1` layers; hidden layers use `hidden`, the last uses `last`.
    pub fn init<R: Rng + ?Sized>(
        dims: &[usize],
        bias: bool,
        hidden: Activation,
        last: Activation,
        rng: &mut R,
    ) -> Result<Self> {
        if dims.len() < 2 {
            return Err(Error::Config("MLP dimension list needs at least two entries".into()));
        }
        let n = dims.len() - 1;
        let layers = (0..n)
            .map(|l| {
                let act = if l + 1 == n { last } else { hidden };
                DenseLayer::init(dims[l], dims[l + 1], bias, act, rng)
            })
            .collect();
        Self::new(layers)
    }

    pub fn in_dim(&self) -> usize {
        self.layers[0].in_dim
    }

    pub fn out_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].out_dim
    }

    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>> {
        Ok(self.forward_trace(input)?.outputs.pop().unwrap_or_default())
    }

    pub fn forward_trace(&self, input: &[f64]) -> Result<Trace> {
        let mut trace = Trace {
            outputs: Vec::with_capacity(self.layers.len() + 1),
            pre: Vec::with_capacity(self.layers.len()),
        };
        trace.outputs.push(input.to_vec());
        for (l, layer) in self.layers.iter().enumerate() {
            let x = &trace.outputs[l];
            if x.len() != layer.in_dim {
                return Err(Error::shape(format!("layer {l} input"), layer.in_dim, x.len()));
            }
            let mut z = Vec::with_capacity(layer.out_dim);
            layer.preactivation_into(x, &mut z);
            let a: Vec<f64> = z.iter().map(|&v| layer.activation.apply(v)).collect();
            if a.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite {
                    location: format!("layer {l} output"),
                });
            }
            trace.pre.push(z);
            trace.outputs.push(a);
        }
        Ok(trace)
    }

    /// Accumulates `d(output)·grad_out` into `grads` and returns the gradient
    /// with respect to the input.
    pub fn backward(&self, trace: &Trace, grad_out: &[f64], grads: &mut Mlp) -> Vec<f64> {
        let mut delta: Vec<f64> = grad_out.to_vec();
        for l in (0..self.layers.len()).rev() {
            let layer = &self.layers[l];
            let g = &mut grads.layers[l];
            let z = &trace.pre[l];
            let a = &trace.outputs[l + 1];
            for (r, d) in delta.iter_mut().enumerate() {
                *d *= layer.activation.derivative(z[r], a[r]);
            }
            let x = &trace.outputs[l];
            let mut dx = vec![0.0; layer.in_dim];
            for (r, &d) in delta.iter().enumerate() {
                if d == 0.0 {
                    continue;
                }
                let row = r * layer.in_dim;
                let wrow = &layer.weights[row..row + layer.in_dim];
                let grow = &mut g.weights[row..row + layer.in_dim];
                for c in 0..layer.in_dim {
                    grow[c] += d * x[c];
                    dx[c] += d * wrow[c];
                }
                if let Some(b) = g.biases.as_mut() {
                    b[r] += d;
                }
            }
            delta = dx;
        }
        delta
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            layers: self.layers.iter().map(DenseLayer::zeros_like).collect(),
        }
    }

    pub fn same_shape(&self, other: &Self) -> bool {
        self.layers.len() == other.layers.len()
            && self
                .layers
                .iter()
                .zip(&other.layers)
                .all(|(a, b)| a.same_shape(b))
    }

    pub fn values(&self) -> impl Iterator<Item = &f64> {
        self.layers.iter().flat_map(DenseLayer::values)
    }

    pub fn values_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.layers.iter_mut().flat_map(DenseLayer::values_mut)
    }
}

/// Forward pass of `params` on `input`.
pub fn mlp_forward(params: &Mlp, input: &[f64]) -> Result<Vec<f64>> {
    params.forward(input)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn single(w: Vec<f64>, b: Vec<f64>, in_dim: usize, act: Activation) -> Mlp {
        let out = b.len();
        Mlp::new(vec![DenseLayer::new(in_dim, out, w, Some(b), act).unwrap()]).unwrap()
    }

    #[test]
    fn identity_layer_passes_input_through() {
        let m = single(vec![1.0, 0.0, 0.0, 1.0], vec![0.0, 0.0], 2, Activation::Identity);
        assert_eq!(mlp_forward(&m, &[3.0, 4.0]).unwrap(), vec![3.0, 4.0]);
    }

    #[test]
    fn relu_clamps_negative_preactivation() {
        let m = single(vec![1.0, 1.0], vec![-1.0], 2, Activation::Relu);
        assert_eq!(mlp_forward(&m, &[0.2, 0.3]).unwrap(), vec![0.0]);
    }

    // Independent oracle: explicit index loops, no shared helpers.
    fn loop_forward(m: &Mlp, input: &[f64]) -> Vec<f64> {
        let mut x = input.to_vec();
        for layer in &m.layers {
            let mut y = vec![0.0; layer.out_dim];
            for r in 0..layer.out_dim {
                let mut s = 0.0;
                for c in 0..layer.in_dim {
                    s += layer.weights[r * layer.in_dim + c] * x[c];
                }
                if let Some(b) = &layer.biases {
                    s += b[r];
                }
                y[r] = match layer.activation {
                    Activation::Relu => {
                        if s > 0.0 {
                            s
                        } else {
                            0.0
                        }
                    }
                    Activation::Sigmoid => 1.0 / (1.0 + (-s).exp()),
                    Activation::Identity => s,
                };
            }
            x = y;
        }
        x
    }

    #[test]
    fn seeded_two_layer_matches_loop_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let m = Mlp::init(&[5, 4, 3], true, Activation::Relu, Activation::Identity, &mut rng)
            .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let x: Vec<f64> = (0..5).map(|_| rng.random_range(-1.0..1.0)).collect();
        let got = mlp_forward(&m, &x).unwrap();
        let want = loop_forward(&m, &x);
        for (g, w) in got.iter().zip(&want) {
            assert!((g - w).abs() < 1e-12);
        }
    }

    #[test]
    fn wrong_input_length_names_layer() {
        let m = single(vec![1.0, 1.0], vec![0.0], 2, Activation::Identity);
        let err = mlp_forward(&m, &[1.0]).unwrap_err();
        assert!(err.to_string().contains("layer 0"), "{err}");
    }

    #[test]
    fn incompatible_layers_rejected() {
        let a = DenseLayer::new(2, 3, vec![0.0; 6], None, Activation::Relu).unwrap();
        let b = DenseLayer::new(2, 1, vec![0.0; 2], None, Activation::Identity).unwrap();
        assert!(Mlp::new(vec![a, b]).is_err());
    }

    #[test]
    fn relu_layer_is_positively_homogeneous() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let layer = DenseLayer::init(4, 3, false, Activation::Relu, &mut rng);
        let m = Mlp::new(vec![layer]).unwrap();
        let x = [0.3, -0.7, 1.1, 0.2];
        let c = 2.5;
        let scaled: Vec<f64> = x.iter().map(|v| v * c).collect();
        let a = m.forward(&x).unwrap();
        let b = m.forward(&scaled).unwrap();
        for (u, v) in a.iter().zip(&b) {
            assert!((u * c - v).abs() < 1e-12);
        }
    }
}
