//! Small fully connected Q-network with an optional dueling head.
//!
//! Hidden layers use a (leaky) rectifier. With the dueling head the last layer
//! emits `A` advantages followed by one state value, combined as
//! `q[a] = v + adv[a] - mean(adv)`. Batches are row-major `batch x width`
//! matrices and every layer stores its weights `inputs x outputs`, row-major.

mod checkpoint;

pub use checkpoint::{load, read_from, save, write_to, MAGIC};

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum NnError {
    #[error("{context}: expected {expected}, got {got}")]
    Shape {
        context: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed checkpoint: {0}")]
    Format(String),
}

type Result<T> = std::result::Result<T, NnError>;

fn check_len(context: &'static str, expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(NnError::Shape {
            context,
            expected,
            got,
        })
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    /// Slope [`LEAKY_SLOPE`] below zero.
    #[default]
    LeakyRelu,
    Relu,
}

pub const LEAKY_SLOPE: f64 = 0.01;

impl Activation {
    fn negative_slope(self) -> f64 {
        match self {
            Activation::LeakyRelu => LEAKY_SLOPE,
            Activation::Relu => 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Head {
    Plain,
    Dueling,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub inputs: usize,
    pub outputs: usize,
    /// `inputs x outputs`, row-major.
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Layer {
    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        Layer {
            inputs,
            outputs,
            weights: vec![0.0; inputs * outputs],
            bias: vec![0.0; outputs],
        }
    }

    /// Uniform in `+-sqrt(6 / fan_in)`, zero bias.
    pub fn he_uniform<R: Rng + ?Sized>(inputs: usize, outputs: usize, rng: &mut R) -> Self {
        let limit = (6.0 / inputs as f64).sqrt();
        let mut layer = Layer::zeros(inputs, outputs);
        for w in &mut layer.weights {
            *w = rng.random_range(-limit..=limit);
        }
        layer
    }
}

/// `c = a * b + beta * c` with `a: m x k`, `b: k x n`, either optionally
/// transposed in place (the slices hold the untransposed storage).
#[allow(clippy::too_many_arguments)]
fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    a_trans: bool,
    b: &[f64],
    b_trans: bool,
    beta: f64,
    c: &mut [f64],
) {
    assert_eq!(a.len(), m * k);
    assert_eq!(b.len(), k * n);
    assert_eq!(c.len(), m * n);
    if m == 0 || n == 0 {
        return;
    }
    // Row/column strides of the logical (possibly transposed) operands.
    let (rsa, csa) = if a_trans { (1, m as isize) } else { (k as isize, 1) };
    let (rsb, csb) = if b_trans { (1, k as isize) } else { (n as isize, 1) };
    // SAFETY: lengths asserted above; strides address exactly those buffers.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa,
            csa,
            b.as_ptr(),
            rsb,
            csb,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QNetwork {
    pub layers: Vec<Layer>,
    pub head: Head,
    pub activation: Activation,
}

/// Intermediate values of a batched forward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    pub batch: usize,
    /// Input matrix of every layer.
    inputs: Vec<Vec<f64>>,
    /// Pre-activations of the hidden layers.
    pre: Vec<Vec<f64>>,
    /// `batch x actions` Q-values.
    pub q: Vec<f64>,
}

/// Parameter-shaped gradient.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<Layer>,
}

impl Gradients {
    /// Euclidean norm over every parameter.
    pub fn norm(&self) -> f64 {
        self.layers
            .iter()
            .flat_map(|l| l.weights.iter().chain(&l.bias))
            .map(|g| g * g)
            .sum::<f64>()
            .sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.layers
            .iter()
            .flat_map(|l| l.weights.iter().chain(&l.bias))
            .fold(0.0, |m, g| m.max(g.abs()))
    }
}

impl QNetwork {
    /// `input -> hidden... -> head`; the dueling head adds one value output
    /// after the `actions` advantages.
    pub fn new<R: Rng + ?Sized>(
        input: usize,
        hidden: &[usize],
        actions: usize,
        head: Head,
        activation: Activation,
        rng: &mut R,
    ) -> Self {
        let mut sizes = vec![input];
        sizes.extend_from_slice(hidden);
        sizes.push(match head {
            Head::Plain => actions,
            Head::Dueling => actions + 1,
        });
        let layers = sizes
            .windows(2)
            .map(|w| Layer::he_uniform(w[0], w[1], rng))
            .collect();
        QNetwork {
            layers,
            head,
            activation,
        }
    }

    pub fn input_size(&self) -> usize {
        self.layers[0].inputs
    }

    pub fn actions(&self) -> usize {
        let out = self.layers.last().map_or(0, |l| l.outputs);
        match self.head {
            Head::Plain => out,
            Head::Dueling => out - 1,
        }
    }

    pub fn parameter_count(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    pub fn same_shape(&self, other: &QNetwork) -> bool {
        self.head == other.head
            && self.layers.len() == other.layers.len()
            && self
                .layers
                .iter()
                .zip(&other.layers)
                .all(|(a, b)| a.inputs == b.inputs && a.outputs == b.outputs)
    }

    fn zero_gradients(&self) -> Gradients {
        Gradients {
            layers: self
                .layers
                .iter()
                .map(|l| Layer::zeros(l.inputs, l.outputs))
                .collect(),
        }
    }

    /// Batched forward pass over `x`, a `batch x input` matrix.
    pub fn forward_batch(&self, x: &[f64], batch: usize) -> Result<ForwardCache> {
        check_len("forward input", batch * self.input_size(), x.len())?;
        let slope = self.activation.negative_slope();
        let last = self.layers.len() - 1;
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut pre = Vec::with_capacity(last);
        let mut current = x.to_vec();
        let mut raw = Vec::new();
        for (li, layer) in self.layers.iter().enumerate() {
            let mut z = Vec::with_capacity(batch * layer.outputs);
            for _ in 0..batch {
                z.extend_from_slice(&layer.bias);
            }
            gemm(batch, layer.inputs, layer.outputs, &current, false, &layer.weights, false, 1.0, &mut z);
            inputs.push(std::mem::take(&mut current));
            if li == last {
                raw = z;
            } else {
                current = z
                    .iter()
                    .map(|&v| if v > 0.0 { v } else { slope * v })
                    .collect();
                pre.push(z);
            }
        }
        let q = match self.head {
            Head::Plain => raw,
            Head::Dueling => {
                let width = self.actions() + 1;
                let actions = width - 1;
                let mut q = Vec::with_capacity(batch * actions);
                for row in raw.chunks_exact(width) {
                    let (adv, value) = row.split_at(actions);
                    let mean = adv.iter().sum::<f64>() / actions as f64;
                    q.extend(adv.iter().map(|a| value[0] + a - mean));
                }
                q
            }
        };
        Ok(ForwardCache {
            batch,
            inputs,
            pre,
            q,
        })
    }

    /// Q-values of a single input.
    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(self.forward_batch(x, 1)?.q)
    }

    /// Gradient of a scalar loss given `dq = dL/dq` (`batch x actions`).
    pub fn backward(&self, cache: &ForwardCache, dq: &[f64]) -> Result<Gradients> {
        let batch = cache.batch;
        let actions = self.actions();
        check_len("backward dq", batch * actions, dq.len())?;
        let mut delta = match self.head {
            Head::Plain => dq.to_vec(),
            Head::Dueling => {
                let mut d = Vec::with_capacity(batch * (actions + 1));
                for row in dq.chunks_exact(actions) {
                    let sum: f64 = row.iter().sum();
                    let mean = sum / actions as f64;
                    d.extend(row.iter().map(|g| g - mean));
                    d.push(sum);
                }
                d
            }
        };
        let slope = self.activation.negative_slope();
        let mut grads = self.zero_gradients();
        for li in (0..self.layers.len()).rev() {
            let layer = &self.layers[li];
            let g = &mut grads.layers[li];
            gemm(layer.inputs, batch, layer.outputs, &cache.inputs[li], true, &delta, false, 0.0, &mut g.weights);
            for row in delta.chunks_exact(layer.outputs) {
                for (b, d) in g.bias.iter_mut().zip(row) {
                    *b += d;
                }
            }
            if li == 0 {
                break;
            }
            let mut dx = vec![0.0; batch * layer.inputs];
            gemm(batch, layer.outputs, layer.inputs, &delta, false, &layer.weights, true, 0.0, &mut dx);
            for (d, &z) in dx.iter_mut().zip(&cache.pre[li - 1]) {
                if z <= 0.0 {
                    *d *= slope;
                }
            }
            delta = dx;
        }
        Ok(grads)
    }

    /// Summed squared error `sum_b (y_b - q_b[a_b])^2` and its gradient.
    pub fn td_loss_gradient(
        &self,
        x: &[f64],
        actions: &[usize],
        targets: &[f64],
    ) -> Result<(f64, Gradients)> {
        let batch = actions.len();
        check_len("targets", batch, targets.len())?;
        let cache = self.forward_batch(x, batch)?;
        let width = self.actions();
        let mut dq = vec![0.0; batch * width];
        let mut loss = 0.0;
        for (b, (&a, &y)) in actions.iter().zip(targets).enumerate() {
            if a >= width {
                return Err(NnError::Shape {
                    context: "action index",
                    expected: width,
                    got: a,
                });
            }
            let err = y - cache.q[b * width + a];
            loss += err * err;
            dq[b * width + a] = -2.0 * err;
        }
        Ok((loss, self.backward(&cache, &dq)?))
    }

    /// `theta <- theta - lr * grad`.
    pub fn sgd_step(&mut self, grads: &Gradients, lr: f64) -> Result<()> {
        check_len("gradient layers", self.layers.len(), grads.layers.len())?;
        for (l, g) in self.layers.iter_mut().zip(&grads.layers) {
            check_len("gradient weights", l.weights.len(), g.weights.len())?;
            check_len("gradient bias", l.bias.len(), g.bias.len())?;
            for (w, d) in l.weights.iter_mut().zip(&g.weights) {
                *w -= lr * d;
            }
            for (b, d) in l.bias.iter_mut().zip(&g.bias) {
                *b -= lr * d;
            }
        }
        Ok(())
    }

    /// `self <- tau * train + (1 - tau) * self`.
    pub fn soft_update(&mut self, train: &QNetwork, tau: f64) -> Result<()> {
        if !self.same_shape(train) {
            return Err(NnError::Shape {
                context: "soft update parameters",
                expected: self.parameter_count(),
                got: train.parameter_count(),
            });
        }
        for (t, s) in self.layers.iter_mut().zip(&train.layers) {
            for (a, b) in t.weights.iter_mut().zip(&s.weights) {
                *a = tau * b + (1.0 - tau) * *a;
            }
            for (a, b) in t.bias.iter_mut().zip(&s.bias) {
                *a = tau * b + (1.0 - tau) * *a;
            }
        }
        Ok(())
    }

    /// Euclidean distance between two same-shaped parameter sets.
    pub fn distance(&self, other: &QNetwork) -> f64 {
        self.layers
            .iter()
            .zip(&other.layers)
            .flat_map(|(a, b)| {
                a.weights
                    .iter()
                    .zip(&b.weights)
                    .chain(a.bias.iter().zip(&b.bias))
            })
            .map(|(x, y)| (x - y) * (x - y))
            .sum::<f64>()
            .sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weights.iter().chain(&l.bias).all(|v| v.is_finite()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn net(head: Head) -> QNetwork {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        QNetwork::new(5, &[4, 6], 3, head, Activation::LeakyRelu, &mut rng)
    }

    #[test]
    fn table_shapes() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let q = QNetwork::new(153, &[32, 64, 300], 200, Head::Dueling, Activation::LeakyRelu, &mut rng);
        let shapes: Vec<_> = q.layers.iter().map(|l| (l.inputs, l.outputs)).collect();
        assert_eq!(shapes, vec![(153, 32), (32, 64), (64, 300), (300, 201)]);
        assert_eq!(q.actions(), 200);
    }

    #[test]
    fn zero_input_zero_bias_gives_zero() {
        let q = net(Head::Dueling);
        assert!(q.forward(&[0.0; 5]).unwrap().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn equal_advantages_collapse_to_value() {
        let mut q = net(Head::Dueling);
        let last = q.layers.last_mut().unwrap();
        for row in last.weights.chunks_exact_mut(4) {
            row[1] = row[0];
            row[2] = row[0];
        }
        last.bias = vec![0.3, 0.3, 0.3, -1.2];
        let x = [0.5, -1.0, 2.0, 0.1, 0.0];
        let out = q.forward(&x).unwrap();
        let value = q.forward_batch(&x, 1).unwrap();
        assert!(out.iter().all(|v| (v - out[0]).abs() < 1e-12));
        assert_eq!(value.q, out);
    }

    #[test]
    fn matched_target_gives_zero_gradient() {
        let q = net(Head::Dueling);
        let x = [0.2, -0.4, 1.0, 0.7, -0.1];
        let y = q.forward(&x).unwrap()[1];
        let (loss, g) = q.td_loss_gradient(&x, &[1], &[y]).unwrap();
        assert_eq!(loss, 0.0);
        assert_eq!(g.max_abs(), 0.0);
    }

    #[test]
    fn sgd_and_soft_update_arithmetic() {
        let mut a = QNetwork {
            layers: vec![Layer {
                inputs: 1,
                outputs: 1,
                weights: vec![1.0],
                bias: vec![0.0],
            }],
            head: Head::Plain,
            activation: Activation::Relu,
        };
        let g = Gradients {
            layers: vec![Layer {
                inputs: 1,
                outputs: 1,
                weights: vec![2.0],
                bias: vec![0.0],
            }],
        };
        let before = a.clone();
        a.sgd_step(&g, 0.0).unwrap();
        assert_eq!(a, before);
        a.sgd_step(&g, 0.5).unwrap();
        assert_eq!(a.layers[0].weights[0], 0.0);

        let train = QNetwork {
            layers: vec![Layer {
                inputs: 1,
                outputs: 1,
                weights: vec![1.0],
                bias: vec![1.0],
            }],
            ..a.clone()
        };
        a.soft_update(&train, 1e-3).unwrap();
        assert!((a.layers[0].weights[0] - 1e-3).abs() < 1e-18);
        a.soft_update(&train, 1.0).unwrap();
        assert_eq!(a.layers, train.layers);
    }

    #[test]
    fn plain_head_gradient_matches_differences() {
        let q = net(Head::Plain);
        let x = [0.3, -0.8, 0.5, 1.1, -0.2];
        let (_, g) = q.td_loss_gradient(&x, &[2], &[0.7]).unwrap();
        let h = 1e-6;
        let mut p = q.clone();
        p.layers[1].weights[3] += h;
        let lp = p.td_loss_gradient(&x, &[2], &[0.7]).unwrap().0;
        p.layers[1].weights[3] -= 2.0 * h;
        let lm = p.td_loss_gradient(&x, &[2], &[0.7]).unwrap().0;
        let fd = (lp - lm) / (2.0 * h);
        assert!((fd - g.layers[1].weights[3]).abs() < 1e-6);
    }
}
