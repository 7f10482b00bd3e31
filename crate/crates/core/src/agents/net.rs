//! Small dense networks with hand-written backpropagation.

use rand::Rng;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Sigmoid,
    Tanh,
    Relu,
}

impl Activation {
    pub const ALL: [Activation; 3] = [Activation::Sigmoid, Activation::Tanh, Activation::Relu];

    fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Sigmoid => 1.0 / (1.0 + (-x).exp()),
            Activation::Tanh => x.tanh(),
            Activation::Relu => x.max(0.0),
        }
    }

    /// Derivative expressed through the activation's output `y`.
    fn slope(self, y: f64) -> f64 {
        match self {
            Activation::Sigmoid => y * (1.0 - y),
            Activation::Tanh => 1.0 - y * y,
            Activation::Relu => {
                if y > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

impl std::str::FromStr for Activation {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "sigmoid" => Ok(Activation::Sigmoid),
            "tanh" => Ok(Activation::Tanh),
            "relu" => Ok(Activation::Relu),
            other => Err(format!("unknown activation `{other}`")),
        }
    }
}

/// How the last linear layer becomes the network output.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Head {
    Linear,
    /// One value unit plus one advantage unit per output, combined as
    /// `Q = V + A - mean(A)`.
    Dueling,
}

/// Fully connected network. Parameters live in one flat vector, layer by
/// layer, each as a row-major weight matrix followed by its bias.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DenseNet {
    sizes: Vec<usize>,
    activation: Activation,
    head: Head,
    params: Vec<f64>,
}

/// Activations recorded by a forward pass.
#[derive(Clone, Debug)]
pub struct Trace {
    /// `layers[0]` is the input; `layers[k + 1]` the output of layer `k`
    /// (pre-head for the last layer).
    layers: Vec<Vec<f64>>,
    pub output: Vec<f64>,
}

impl DenseNet {
    /// `hidden` widths between `inputs` and `outputs`. Weights use Glorot
    /// (sigmoid, tanh) or He (relu) uniform initialization; biases start at 0.
    pub fn new(
        inputs: usize,
        hidden: &[usize],
        outputs: usize,
        activation: Activation,
        head: Head,
        rng: &mut impl Rng,
    ) -> Self {
        assert!(inputs > 0 && outputs > 0, "network needs inputs and outputs");
        let raw_out = match head {
            Head::Linear => outputs,
            Head::Dueling => outputs + 1,
        };
        let mut sizes = vec![inputs];
        sizes.extend_from_slice(hidden);
        sizes.push(raw_out);
        let mut params = Vec::new();
        for w in sizes.windows(2) {
            let (fan_in, fan_out) = (w[0] as f64, w[1] as f64);
            let limit = match activation {
                Activation::Relu => (6.0 / fan_in).sqrt(),
                _ => (6.0 / (fan_in + fan_out)).sqrt(),
            };
            params.extend((0..w[0] * w[1]).map(|_| rng.gen_range(-limit..limit)));
            params.extend(std::iter::repeat_n(0.0, w[1]));
        }
        DenseNet {
            sizes,
            activation,
            head,
            params,
        }
    }

    pub fn n_inputs(&self) -> usize {
        self.sizes[0]
    }

    pub fn n_outputs(&self) -> usize {
        let raw = *self.sizes.last().expect("at least one layer");
        match self.head {
            Head::Linear => raw,
            Head::Dueling => raw - 1,
        }
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn head(&self) -> Head {
        self.head
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn n_params(&self) -> usize {
        self.params.len()
    }

    pub fn is_finite(&self) -> bool {
        self.params.iter().all(|p| p.is_finite())
    }

    fn n_layers(&self) -> usize {
        self.sizes.len() - 1
    }

    fn layer_offset(&self, k: usize) -> usize {
        self.sizes
            .windows(2)
            .take(k)
            .map(|w| w[0] * w[1] + w[1])
            .sum()
    }

    fn combine_head(&self, raw: &[f64]) -> Vec<f64> {
        match self.head {
            Head::Linear => raw.to_vec(),
            Head::Dueling => {
                let adv = &raw[1..];
                let mean = adv.iter().sum::<f64>() / adv.len() as f64;
                adv.iter().map(|a| raw[0] + a - mean).collect()
            }
        }
    }

    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        self.forward_trace(x).output
    }

    pub fn forward_trace(&self, x: &[f64]) -> Trace {
        assert_eq!(x.len(), self.n_inputs(), "input width");
        let mut layers = Vec::with_capacity(self.sizes.len());
        layers.push(x.to_vec());
        let mut offset = 0;
        for k in 0..self.n_layers() {
            let (n_in, n_out) = (self.sizes[k], self.sizes[k + 1]);
            let w = &self.params[offset..offset + n_in * n_out];
            let b = &self.params[offset + n_in * n_out..offset + n_in * n_out + n_out];
            let input = &layers[k];
            let last = k + 1 == self.n_layers();
            let out: Vec<f64> = (0..n_out)
                .map(|o| {
                    let row = &w[o * n_in..(o + 1) * n_in];
                    let z = b[o] + row.iter().zip(input).map(|(a, b)| a * b).sum::<f64>();
                    if last {
                        z
                    } else {
                        self.activation.apply(z)
                    }
                })
                .collect();
            layers.push(out);
            offset += n_in * n_out + n_out;
        }
        let output = self.combine_head(layers.last().expect("output layer"));
        Trace { layers, output }
    }

    /// Accumulates into `grads` the gradient of a loss whose derivative with
    /// respect to the network output is `grad_out`.
    pub fn backward(&self, trace: &Trace, grad_out: &[f64], grads: &mut [f64]) {
        assert_eq!(grad_out.len(), self.n_outputs(), "output gradient width");
        assert_eq!(grads.len(), self.params.len(), "gradient buffer size");
        let mut delta: Vec<f64> = match self.head {
            Head::Linear => grad_out.to_vec(),
            Head::Dueling => {
                let total: f64 = grad_out.iter().sum();
                let mean = total / grad_out.len() as f64;
                std::iter::once(total)
                    .chain(grad_out.iter().map(|g| g - mean))
                    .collect()
            }
        };
        for k in (0..self.n_layers()).rev() {
            let (n_in, n_out) = (self.sizes[k], self.sizes[k + 1]);
            let offset = self.layer_offset(k);
            let input = &trace.layers[k];
            {
                let (gw, gb) = grads[offset..offset + n_in * n_out + n_out].split_at_mut(n_in * n_out);
                for o in 0..n_out {
                    let d = delta[o];
                    if d == 0.0 {
                        continue;
                    }
                    gb[o] += d;
                    for (g, x) in gw[o * n_in..(o + 1) * n_in].iter_mut().zip(input) {
                        *g += d * x;
                    }
                }
            }
            if k == 0 {
                break;
            }
            let w = &self.params[offset..offset + n_in * n_out];
            let mut prev = vec![0.0; n_in];
            for o in 0..n_out {
                let d = delta[o];
                if d == 0.0 {
                    continue;
                }
                for (p, wi) in prev.iter_mut().zip(&w[o * n_in..(o + 1) * n_in]) {
                    *p += wi * d;
                }
            }
            for (p, y) in prev.iter_mut().zip(input) {
                *p *= self.activation.slope(*y);
            }
            delta = prev;
        }
    }

    pub fn zero_grads(&self) -> Vec<f64> {
        vec![0.0; self.params.len()]
    }

    pub fn copy_from(&mut self, other: &DenseNet) {
        self.params.copy_from_slice(&other.params);
    }
}

/// Index of the largest value (first on ties).
pub fn argmax(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in xs.iter().enumerate() {
        if *x > xs[best] {
            best = i;
        }
    }
    best
}

/// Numerically stable softmax.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = logits.iter().map(|l| (l - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|x| x / s).collect()
}

/// Rescales `grads` so its Euclidean norm is at most `max_norm`.
pub fn clip_norm(grads: &mut [f64], max_norm: f64) -> f64 {
    let norm = grads.iter().map(|g| g * g).sum::<f64>().sqrt();
    if norm > max_norm && norm > 0.0 {
        let s = max_norm / norm;
        grads.iter_mut().for_each(|g| *g *= s);
    }
    norm
}

/// Mean of `(Q(s, a) - y)^2` over the batch and its gradient.
pub fn masked_mse(net: &DenseNet, inputs: &[Vec<f64>], actions: &[usize], targets: &[f64]) -> (f64, Vec<f64>) {
    let n = inputs.len() as f64;
    let mut grads = net.zero_grads();
    let mut loss = 0.0;
    let mut g_out = vec![0.0; net.n_outputs()];
    for ((x, &a), &y) in inputs.iter().zip(actions).zip(targets) {
        let trace = net.forward_trace(x);
        let err = trace.output[a] - y;
        loss += err * err / n;
        g_out.iter_mut().for_each(|g| *g = 0.0);
        g_out[a] = 2.0 * err / n;
        net.backward(&trace, &g_out, &mut grads);
    }
    (loss, grads)
}

/// Central finite differences of `loss` with respect to every parameter.
pub fn numeric_gradient(net: &DenseNet, h: f64, loss: impl Fn(&DenseNet) -> f64) -> Vec<f64> {
    let mut probe = net.clone();
    (0..net.n_params())
        .map(|i| {
            let base = probe.params[i];
            probe.params[i] = base + h;
            let up = loss(&probe);
            probe.params[i] = base - h;
            let down = loss(&probe);
            probe.params[i] = base;
            (up - down) / (2.0 * h)
        })
        .collect()
}

/// Largest elementwise relative error, with `floor` guarding tiny gradients.
pub fn max_relative_error(a: &[f64], b: &[f64], floor: f64) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs() / (x.abs().max(y.abs()).max(floor)))
        .fold(0.0, f64::max)
}
