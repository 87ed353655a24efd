//! Dense feedforward networks with hand-written backpropagation.
//!
//! Parameters live in one flat vector. For each layer the weights are stored
//! row-major as `[out][in]`, followed by that layer's `out` biases; layers are
//! concatenated in order.

pub(crate) mod checkpoint;
mod optim;

pub use checkpoint::{read_net, write_net, NET_MAGIC};
pub use optim::{clip_global_norm, Optimizer, OptimizerConfig, OptimizerKind};

use rand::Rng;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum Activation {
    Identity = 0,
    Relu = 1,
    Tanh = 2,
}

impl Activation {
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Identity => z,
            Activation::Relu => z.max(0.0),
            Activation::Tanh => z.tanh(),
        }
    }

    /// Derivative expressed through the activation's output.
    fn derivative_from_output(self, y: f64) -> f64 {
        match self {
            Activation::Identity => 1.0,
            Activation::Relu => {
                if y > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => 1.0 - y * y,
        }
    }

    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(Activation::Identity),
            1 => Some(Activation::Relu),
            2 => Some(Activation::Tanh),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseNet {
    layer_sizes: Vec<usize>,
    activations: Vec<Activation>,
    params: Vec<f64>,
}

/// Layer outputs recorded by a forward pass; `layers[0]` is the input.
#[derive(Debug, Clone)]
pub struct ForwardTrace {
    layers: Vec<Vec<f64>>,
}

impl ForwardTrace {
    pub fn output(&self) -> &[f64] {
        self.layers.last().expect("trace has an input layer")
    }
}

/// Gradients of a vector-Jacobian product.
#[derive(Debug, Clone, PartialEq)]
pub struct Backprop {
    /// Aligned with the parameter vector.
    pub params: Vec<f64>,
    /// With respect to the network input.
    pub input: Vec<f64>,
}

/// Gradient of a scalar loss together with the loss value.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientRecord {
    pub gradient: Vec<f64>,
    pub loss: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum LossSpec {
    /// `sum_k (y_k - target_k)^2`
    SquaredError(Vec<f64>),
    /// `sum_k y_k`
    ScalarOutput,
}

impl LossSpec {
    fn loss_and_upstream(&self, output: &[f64]) -> Result<(f64, Vec<f64>)> {
        match self {
            LossSpec::SquaredError(target) => {
                if target.len() != output.len() {
                    return Err(Error::Usage(format!(
                        "target has {} entries, output has {}",
                        target.len(),
                        output.len()
                    )));
                }
                let diff: Vec<f64> = output.iter().zip(target).map(|(y, t)| y - t).collect();
                let loss = diff.iter().map(|d| d * d).sum();
                Ok((loss, diff.iter().map(|d| 2.0 * d).collect()))
            }
            LossSpec::ScalarOutput => Ok((output.iter().sum(), vec![1.0; output.len()])),
        }
    }
}

impl DenseNet {
    pub fn param_count(layer_sizes: &[usize]) -> usize {
        layer_sizes.windows(2).map(|w| (w[0] + 1) * w[1]).sum()
    }

    fn check_shape(layer_sizes: &[usize], activations: &[Activation]) -> Result<()> {
        if layer_sizes.len() < 2 {
            return Err(Error::Usage("a network needs at least two layer sizes".into()));
        }
        if layer_sizes.contains(&0) {
            return Err(Error::Usage("layer sizes must be positive".into()));
        }
        if activations.len() != layer_sizes.len() - 1 {
            return Err(Error::Usage(format!(
                "{} activations given for {} layers",
                activations.len(),
                layer_sizes.len() - 1
            )));
        }
        Ok(())
    }

    /// Random initialisation: He-uniform for ReLU layers, Xavier-uniform
    /// otherwise, zero biases.
    pub fn new<R: Rng + ?Sized>(
        layer_sizes: &[usize],
        activations: &[Activation],
        rng: &mut R,
    ) -> Result<Self> {
        Self::check_shape(layer_sizes, activations)?;
        let mut params = Vec::with_capacity(Self::param_count(layer_sizes));
        for (w, act) in layer_sizes.windows(2).zip(activations) {
            let (fan_in, fan_out) = (w[0] as f64, w[1] as f64);
            let bound = match act {
                Activation::Relu => (6.0 / fan_in).sqrt(),
                _ => (6.0 / (fan_in + fan_out)).sqrt(),
            };
            params.extend((0..w[0] * w[1]).map(|_| rng.gen_range(-bound..=bound)));
            params.extend(std::iter::repeat_n(0.0, w[1]));
        }
        Ok(Self {
            layer_sizes: layer_sizes.to_vec(),
            activations: activations.to_vec(),
            params,
        })
    }

    pub fn from_parameters(
        layer_sizes: &[usize],
        activations: &[Activation],
        params: Vec<f64>,
    ) -> Result<Self> {
        Self::check_shape(layer_sizes, activations)?;
        let expected = Self::param_count(layer_sizes);
        if params.len() != expected {
            return Err(Error::Usage(format!(
                "expected {expected} parameters, got {}",
                params.len()
            )));
        }
        if params.iter().any(|p| !p.is_finite()) {
            return Err(Error::Numerical("non-finite parameter".into()));
        }
        Ok(Self {
            layer_sizes: layer_sizes.to_vec(),
            activations: activations.to_vec(),
            params,
        })
    }

    pub fn zeros(layer_sizes: &[usize], activations: &[Activation]) -> Result<Self> {
        Self::from_parameters(
            layer_sizes,
            activations,
            vec![0.0; Self::param_count(layer_sizes)],
        )
    }

    pub fn layer_sizes(&self) -> &[usize] {
        &self.layer_sizes
    }

    pub fn activations(&self) -> &[Activation] {
        &self.activations
    }

    pub fn input_size(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn output_size(&self) -> usize {
        *self.layer_sizes.last().unwrap()
    }

    pub fn parameters(&self) -> &[f64] {
        &self.params
    }

    /// Overwrites the parameters; rejects wrong length or non-finite values.
    pub fn set_parameters(&mut self, params: &[f64]) -> Result<()> {
        if params.len() != self.params.len() {
            return Err(Error::Usage(format!(
                "expected {} parameters, got {}",
                self.params.len(),
                params.len()
            )));
        }
        if params.iter().any(|p| !p.is_finite()) {
            return Err(Error::Numerical("non-finite parameter".into()));
        }
        self.params.copy_from_slice(params);
        Ok(())
    }

    pub(crate) fn parameters_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    /// Copies weights from a network of identical shape.
    pub fn copy_from(&mut self, other: &DenseNet) -> Result<()> {
        if self.layer_sizes != other.layer_sizes || self.activations != other.activations {
            return Err(Error::Usage("cannot copy between differently shaped networks".into()));
        }
        self.params.copy_from_slice(&other.params);
        Ok(())
    }

    fn check_input(&self, input: &[f64]) -> Result<()> {
        if input.len() != self.input_size() {
            return Err(Error::Usage(format!(
                "input has {} entries, network expects {}",
                input.len(),
                self.input_size()
            )));
        }
        Ok(())
    }

    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>> {
        Ok(self.forward_trace(input)?.layers.pop().unwrap())
    }

    pub fn forward_trace(&self, input: &[f64]) -> Result<ForwardTrace> {
        self.check_input(input)?;
        let mut layers = Vec::with_capacity(self.layer_sizes.len());
        layers.push(input.to_vec());
        let mut offset = 0;
        for (w, act) in self.layer_sizes.windows(2).zip(&self.activations) {
            let (n_in, n_out) = (w[0], w[1]);
            let weights = &self.params[offset..offset + n_in * n_out];
            let biases = &self.params[offset + n_in * n_out..offset + (n_in + 1) * n_out];
            let x = layers.last().unwrap();
            let y: Vec<f64> = weights
                .chunks_exact(n_in)
                .zip(biases)
                .map(|(row, b)| act.apply(row.iter().zip(x).map(|(w, x)| w * x).sum::<f64>() + b))
                .collect();
            layers.push(y);
            offset += (n_in + 1) * n_out;
        }
        Ok(ForwardTrace { layers })
    }

    /// Adds `upstream^T J` to `grad` and returns the input gradient.
    pub fn accumulate_backward(
        &self,
        trace: &ForwardTrace,
        upstream: &[f64],
        grad: &mut [f64],
    ) -> Result<Vec<f64>> {
        if upstream.len() != self.output_size() {
            return Err(Error::Usage(format!(
                "upstream has {} entries, output has {}",
                upstream.len(),
                self.output_size()
            )));
        }
        if grad.len() != self.params.len() {
            return Err(Error::Usage("gradient buffer has wrong length".into()));
        }
        let mut delta_out = upstream.to_vec();
        let mut offset = self.params.len();
        for layer in (0..self.activations.len()).rev() {
            let (n_in, n_out) = (self.layer_sizes[layer], self.layer_sizes[layer + 1]);
            offset -= (n_in + 1) * n_out;
            let act = self.activations[layer];
            let y = &trace.layers[layer + 1];
            let x = &trace.layers[layer];
            let dz: Vec<f64> = delta_out
                .iter()
                .zip(y)
                .map(|(d, &y)| d * act.derivative_from_output(y))
                .collect();
            let weights = &self.params[offset..offset + n_in * n_out];
            let mut delta_in = vec![0.0; n_in];
            {
                let (gw, gb) = grad[offset..offset + (n_in + 1) * n_out].split_at_mut(n_in * n_out);
                for (o, &d) in dz.iter().enumerate() {
                    if d == 0.0 {
                        continue;
                    }
                    gb[o] += d;
                    let row = &mut gw[o * n_in..(o + 1) * n_in];
                    let wrow = &weights[o * n_in..(o + 1) * n_in];
                    for i in 0..n_in {
                        row[i] += d * x[i];
                        delta_in[i] += d * wrow[i];
                    }
                }
            }
            delta_out = delta_in;
        }
        Ok(delta_out)
    }

    pub fn backward(&self, input: &[f64], upstream: &[f64]) -> Result<Backprop> {
        let trace = self.forward_trace(input)?;
        let mut params = vec![0.0; self.params.len()];
        let input_grad = self.accumulate_backward(&trace, upstream, &mut params)?;
        Ok(Backprop {
            params,
            input: input_grad,
        })
    }

    pub fn loss_gradient(&self, input: &[f64], loss: &LossSpec) -> Result<GradientRecord> {
        let trace = self.forward_trace(input)?;
        let (value, upstream) = loss.loss_and_upstream(trace.output())?;
        let mut gradient = vec![0.0; self.params.len()];
        self.accumulate_backward(&trace, &upstream, &mut gradient)?;
        Ok(GradientRecord {
            gradient,
            loss: value,
        })
    }

    /// Max relative error between backpropagated and central-difference
    /// gradients of `loss` at `input`.
    pub fn grad_check(&self, input: &[f64], loss: &LossSpec, step: f64) -> Result<f64> {
        let analytic = self.loss_gradient(input, loss)?.gradient;
        let mut probe = self.clone();
        Ok(max_relative_error_fd(
            &mut probe.params.clone(),
            &analytic,
            |params| {
                probe.params.copy_from_slice(params);
                let out = probe.forward(input).expect("shape checked");
                loss.loss_and_upstream(&out).expect("shape checked").0
            },
            step,
        ))
    }
}

/// `|a - n| / max(|a|, |n|, 1e-8)` maximised over parameters, with `n` the
/// central difference of `loss` at step `step`.
pub fn max_relative_error_fd(
    params: &mut [f64],
    analytic: &[f64],
    mut loss: impl FnMut(&[f64]) -> f64,
    step: f64,
) -> f64 {
    assert_eq!(params.len(), analytic.len());
    let mut worst: f64 = 0.0;
    for k in 0..params.len() {
        let orig = params[k];
        params[k] = orig + step;
        let plus = loss(params);
        params[k] = orig - step;
        let minus = loss(params);
        params[k] = orig;
        let numeric = (plus - minus) / (2.0 * step);
        let a = analytic[k];
        let err = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-8);
        worst = worst.max(err);
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    #[test]
    fn identity_layer_passes_input_through() {
        let net = DenseNet::from_parameters(
            &[2, 2],
            &[Activation::Identity],
            vec![1.0, 0.0, 0.0, 1.0, 0.0, 0.0],
        )
        .unwrap();
        assert_eq!(net.forward(&[0.3, -0.2]).unwrap(), vec![0.3, -0.2]);
    }

    #[test]
    fn relu_clips_negatives() {
        let net = DenseNet::from_parameters(
            &[2, 2],
            &[Activation::Relu],
            vec![1.0, 0.0, 0.0, 1.0, 0.0, 0.0],
        )
        .unwrap();
        assert_eq!(net.forward(&[-1.0, 2.0]).unwrap(), vec![0.0, 2.0]);
    }

    #[test]
    fn zero_tanh_layer_outputs_zero() {
        let net = DenseNet::zeros(&[3, 1], &[Activation::Tanh]).unwrap();
        assert_eq!(net.forward(&[5.0, -2.0, 7.0]).unwrap(), vec![0.0]);
    }

    #[test]
    fn dimension_mismatches_are_usage_errors() {
        let net = DenseNet::zeros(&[3, 2], &[Activation::Tanh]).unwrap();
        assert!(matches!(net.forward(&[1.0]), Err(Error::Usage(_))));
        assert!(matches!(net.backward(&[1.0, 2.0, 3.0], &[1.0]), Err(Error::Usage(_))));
        assert!(DenseNet::zeros(&[3, 2], &[]).is_err());
        assert!(DenseNet::from_parameters(&[1, 1], &[Activation::Identity], vec![1.0]).is_err());
    }

    #[test]
    fn scalar_linear_gradient() {
        // y = w x + b with w = 0.5, b = -1
        let net =
            DenseNet::from_parameters(&[1, 1], &[Activation::Identity], vec![0.5, -1.0]).unwrap();
        let bp = net.backward(&[2.0], &[1.0]).unwrap();
        assert_eq!(bp.params, vec![2.0, 1.0]);
        assert_eq!(bp.input, vec![0.5]);
    }

    #[test]
    fn zero_upstream_zero_gradient() {
        let mut r = rng::seeded(1);
        let net =
            DenseNet::new(&[4, 8, 3], &[Activation::Relu, Activation::Identity], &mut r).unwrap();
        let bp = net.backward(&[0.1, 0.2, 0.3, 0.4], &[0.0; 3]).unwrap();
        assert!(bp.params.iter().all(|g| *g == 0.0));
        assert!(bp.input.iter().all(|g| *g == 0.0));
    }

    #[test]
    fn random_relu_net_matches_finite_differences() {
        let mut r = rng::seeded(2);
        let net =
            DenseNet::new(&[4, 8, 3], &[Activation::Relu, Activation::Identity], &mut r).unwrap();
        let x: Vec<f64> = (0..4).map(|_| r.gen_range(-1.0..1.0)).collect();
        for k in 0..3 {
            let mut upstream = vec![0.0; 3];
            upstream[k] = 1.0;
            let analytic = net.backward(&x, &upstream).unwrap().params;
            let mut probe = net.clone();
            let err = max_relative_error_fd(
                &mut net.parameters().to_vec(),
                &analytic,
                |p| {
                    probe.set_parameters(p).unwrap();
                    probe.forward(&x).unwrap()[k]
                },
                1e-5,
            );
            assert!(err < 1e-4, "output {k}: {err}");
        }
    }

    #[test]
    fn identity_net_grad_check_is_tight() {
        let net = DenseNet::from_parameters(
            &[2, 2],
            &[Activation::Identity],
            vec![1.0, 0.0, 0.0, 1.0, 0.0, 0.0],
        )
        .unwrap();
        let err = net
            .grad_check(&[0.3, -0.2], &LossSpec::ScalarOutput, 1e-5)
            .unwrap();
        assert!(err < 1e-10, "{err}");
    }

    #[test]
    fn parameter_count_and_layout() {
        assert_eq!(DenseNet::param_count(&[4, 128, 3]), 5 * 128 + 129 * 3);
        // Second output row, then biases.
        let net = DenseNet::from_parameters(
            &[2, 2],
            &[Activation::Identity],
            vec![1.0, 2.0, 3.0, 4.0, 10.0, 20.0],
        )
        .unwrap();
        assert_eq!(net.forward(&[1.0, 1.0]).unwrap(), vec![13.0, 27.0]);
    }
}
