use ndarray::{s, Array1, Array2, ArrayView2, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Uniform};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Tanh,
    Relu,
}

impl Activation {
    /// Value and the first two derivatives at `z`. ReLU uses 0 at the kink.
    #[inline]
    fn eval(self, z: f64) -> (f64, f64, f64) {
        match self {
            Activation::Tanh => {
                let h = z.tanh();
                let d1 = 1.0 - h * h;
                (h, d1, -2.0 * h * d1)
            }
            Activation::Relu => {
                if z > 0.0 {
                    (z, 1.0, 0.0)
                } else {
                    (0.0, 0.0, 0.0)
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkConfig {
    #[serde(default = "one")]
    pub input_dim: usize,
    pub output_dim: usize,
    pub hidden_layers: usize,
    pub hidden_width: usize,
    pub activation: Activation,
    #[serde(default)]
    pub seed: u64,
}

fn one() -> usize {
    1
}

impl NetworkConfig {
    pub fn new(
        output_dim: usize,
        hidden_layers: usize,
        hidden_width: usize,
        activation: Activation,
        seed: u64,
    ) -> Self {
        Self {
            input_dim: 1,
            output_dim,
            hidden_layers,
            hidden_width,
            activation,
            seed,
        }
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        Self { seed, ..self.clone() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim != 1 {
            return Err(Error::Config(format!(
                "input_dim must be 1 (normalized time), got {}",
                self.input_dim
            )));
        }
        if self.hidden_layers == 0 {
            return Err(Error::Config("hidden_layers must be at least 1".into()));
        }
        if self.hidden_width == 0 {
            return Err(Error::Config("hidden_width must be at least 1".into()));
        }
        if !(2..=3).contains(&self.output_dim) {
            return Err(Error::Config(format!(
                "output_dim must be 2 or 3, got {}",
                self.output_dim
            )));
        }
        Ok(())
    }

    /// Layer widths from input to output.
    fn widths(&self) -> Vec<usize> {
        let mut w = Vec::with_capacity(self.hidden_layers + 2);
        w.push(self.input_dim);
        w.extend(std::iter::repeat_n(self.hidden_width, self.hidden_layers));
        w.push(self.output_dim);
        w
    }
}

/// Affine map `W x + b`, `W` stored as (out, in).
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
}

impl Dense {
    pub fn new(weights: Array2<f64>, bias: Array1<f64>) -> Result<Self> {
        if weights.nrows() != bias.len() {
            return Err(Error::Config(format!(
                "bias length {} does not match {} weight rows",
                bias.len(),
                weights.nrows()
            )));
        }
        Ok(Self { weights, bias })
    }

    pub fn in_dim(&self) -> usize {
        self.weights.ncols()
    }

    pub fn out_dim(&self) -> usize {
        self.weights.nrows()
    }
}

/// A named trainable scalar carried alongside the network weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtraScalar {
    pub name: String,
    pub value: f64,
}

/// Multilayer perceptron on a scalar (normalized time) input. Hidden layers
/// share one activation; the output layer is linear.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    config: NetworkConfig,
    layers: Vec<Dense>,
    extras: Vec<ExtraScalar>,
}

impl Network {
    /// Glorot-uniform weights from a seeded ChaCha stream, zero biases.
    pub fn init(config: &NetworkConfig) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let widths = config.widths();
        let layers = widths
            .windows(2)
            .map(|pair| {
                let (fan_in, fan_out) = (pair[0], pair[1]);
                let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
                let dist = Uniform::new_inclusive(-limit, limit)
                    .map_err(|e| Error::Internal(e.to_string()))?;
                let weights =
                    Array2::from_shape_simple_fn((fan_out, fan_in), || dist.sample(&mut rng));
                Ok(Dense {
                    weights,
                    bias: Array1::zeros(fan_out),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            config: config.clone(),
            layers,
            extras: Vec::new(),
        })
    }

    /// Builds a network from explicit layers. A single layer is a plain
    /// affine map of the input.
    pub fn from_layers(layers: Vec<Dense>, activation: Activation) -> Result<Self> {
        let first = layers
            .first()
            .ok_or_else(|| Error::Config("network needs at least one layer".into()))?;
        if first.in_dim() != 1 {
            return Err(Error::Config("first layer must take a scalar input".into()));
        }
        for pair in layers.windows(2) {
            if pair[0].out_dim() != pair[1].in_dim() {
                return Err(Error::Config(format!(
                    "layer widths disagree: {} feeds {}",
                    pair[0].out_dim(),
                    pair[1].in_dim()
                )));
            }
        }
        let config = NetworkConfig {
            input_dim: 1,
            output_dim: layers.last().map_or(0, Dense::out_dim),
            hidden_layers: layers.len() - 1,
            hidden_width: if layers.len() > 1 { first.out_dim() } else { 0 },
            activation,
            seed: 0,
        };
        Ok(Self {
            config,
            layers,
            extras: Vec::new(),
        })
    }

    pub fn config(&self) -> &NetworkConfig {
        &self.config
    }

    pub fn layers(&self) -> &[Dense] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Dense] {
        &mut self.layers
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().map_or(0, Dense::out_dim)
    }

    pub fn add_extra(&mut self, name: impl Into<String>, value: f64) -> usize {
        self.extras.push(ExtraScalar {
            name: name.into(),
            value,
        });
        self.extras.len() - 1
    }

    pub fn extras(&self) -> &[ExtraScalar] {
        &self.extras
    }

    pub fn extra(&self, name: &str) -> Option<f64> {
        self.extras.iter().find(|e| e.name == name).map(|e| e.value)
    }

    pub fn extra_values(&self) -> Vec<f64> {
        self.extras.iter().map(|e| e.value).collect()
    }

    pub fn param_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weights.len() + l.bias.len())
            .sum::<usize>()
            + self.extras.len()
    }

    /// All trainable values in a fixed order: per layer weights (row-major)
    /// then bias, then the extra scalars.
    pub fn flat_params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for layer in &self.layers {
            out.extend(layer.weights.iter().copied());
            out.extend(layer.bias.iter().copied());
        }
        out.extend(self.extras.iter().map(|e| e.value));
        out
    }

    pub fn set_flat_params(&mut self, params: &[f64]) -> Result<()> {
        if params.len() != self.param_count() {
            return Err(Error::Internal(format!(
                "expected {} parameters, got {}",
                self.param_count(),
                params.len()
            )));
        }
        let mut it = params.iter().copied();
        for layer in &mut self.layers {
            layer.weights.iter_mut().zip(&mut it).for_each(|(w, v)| *w = v);
            layer.bias.iter_mut().zip(&mut it).for_each(|(b, v)| *b = v);
        }
        self.extras.iter_mut().zip(it).for_each(|(e, v)| e.value = v);
        Ok(())
    }

    /// Visits every parameter with its gradient entry, in
    /// [`Network::flat_params`] order.
    pub fn update_with(&mut self, grad: &NetGradient, mut f: impl FnMut(&mut f64, f64)) -> Result<()> {
        let shapes_match = grad.layers.len() == self.layers.len()
            && grad.extras.len() == self.extras.len()
            && self.layers.iter().zip(&grad.layers).all(|(l, g)| {
                l.weights.dim() == g.weights.dim() && l.bias.len() == g.bias.len()
            });
        if !shapes_match {
            return Err(Error::Internal("gradient does not match the network shape".into()));
        }
        for (layer, g) in self.layers.iter_mut().zip(&grad.layers) {
            layer.weights.zip_mut_with(&g.weights, |w, &gw| f(w, gw));
            layer.bias.zip_mut_with(&g.bias, |b, &gb| f(b, gb));
        }
        self.extras.iter_mut().zip(&grad.extras).for_each(|(e, &g)| f(&mut e.value, g));
        Ok(())
    }

    pub fn forward(&self, t: f64) -> Result<Vec<f64>> {
        let pass = self.forward_batch(&[t])?;
        Ok(pass.values().column(0).to_vec())
    }

    /// Outputs and their exact derivative with respect to the input.
    pub fn forward_with_time_derivative(&self, t: f64) -> Result<(Vec<f64>, Vec<f64>)> {
        let pass = self.forward_batch(&[t])?;
        Ok((
            pass.values().column(0).to_vec(),
            pass.time_derivs().column(0).to_vec(),
        ))
    }

    pub fn forward_batch(&self, times: &[f64]) -> Result<ForwardPass> {
        self.run(times, None)
    }

    /// Forward pass propagating values and input tangents side by side: every
    /// layer works on an (width, 2B) block whose left half holds values and
    /// right half holds d/dt.
    fn run(&self, times: &[f64], mut trace: Option<&mut Trace>) -> Result<ForwardPass> {
        if let Some(bad) = times.iter().find(|t| !t.is_finite()) {
            return Err(Error::Input(format!("non-finite network input {bad}")));
        }
        let b = times.len();
        let mut x = Array2::<f64>::zeros((1, 2 * b));
        for (i, &t) in times.iter().enumerate() {
            x[[0, i]] = t;
            x[[0, b + i]] = 1.0;
        }
        let act = self.config.activation;
        let last = self.layers.len() - 1;
        for (l, layer) in self.layers.iter().enumerate() {
            let mut z = layer.weights.dot(&x);
            z.slice_mut(s![.., ..b])
                .zip_mut_with(&layer.bias.view().insert_axis(Axis(1)), |zv, &bv| *zv += bv);
            if let Some(tr) = trace.as_deref_mut() {
                tr.inputs.push(x);
            }
            if l == last {
                return Ok(ForwardPass { block: z, batch: b });
            }
            let width = z.nrows();
            let mut d1 = trace.as_ref().map(|_| Vec::with_capacity(width * b));
            let mut d2z = trace.as_ref().map(|_| Vec::with_capacity(width * b));
            {
                let zs = z.as_slice_mut().expect("dot output is contiguous");
                for r in 0..width {
                    let row = r * 2 * b;
                    for c in 0..b {
                        let (h, a1, a2) = act.eval(zs[row + c]);
                        let zt = zs[row + b + c];
                        zs[row + c] = h;
                        zs[row + b + c] = a1 * zt;
                        if let (Some(d1), Some(d2z)) = (d1.as_mut(), d2z.as_mut()) {
                            d1.push(a1);
                            d2z.push(a2 * zt);
                        }
                    }
                }
            }
            if let (Some(tr), Some(d1), Some(d2z)) = (trace.as_deref_mut(), d1, d2z) {
                let shape = (width, b);
                tr.d1.push(Array2::from_shape_vec(shape, d1).expect("length matches shape"));
                tr.d2z.push(Array2::from_shape_vec(shape, d2z).expect("length matches shape"));
            }
            let next = z;
            x = next;
        }
        unreachable!("network has at least one layer")
    }
}

#[derive(Default)]
struct Trace {
    /// Input block of every layer.
    inputs: Vec<Array2<f64>>,
    /// σ'(z) per hidden layer.
    d1: Vec<Array2<f64>>,
    /// σ''(z)·dz/dt per hidden layer.
    d2z: Vec<Array2<f64>>,
}

/// Network outputs over a batch of inputs, with their input derivatives.
#[derive(Debug, Clone)]
pub struct ForwardPass {
    block: Array2<f64>,
    batch: usize,
}

impl ForwardPass {
    pub fn batch(&self) -> usize {
        self.batch
    }

    pub fn output_dim(&self) -> usize {
        self.block.nrows()
    }

    /// (output_dim, batch)
    pub fn values(&self) -> ArrayView2<'_, f64> {
        self.block.slice(s![.., ..self.batch])
    }

    /// d(outputs)/dt, (output_dim, batch)
    pub fn time_derivs(&self) -> ArrayView2<'_, f64> {
        self.block.slice(s![.., self.batch..])
    }
}

/// Sensitivities of a scalar loss with respect to the forward-pass outputs,
/// their time derivatives, and the network's extra scalars.
#[derive(Debug, Clone)]
pub struct OutputAdjoint {
    pub values: Array2<f64>,
    pub time_derivs: Array2<f64>,
    pub extras: Vec<f64>,
}

impl OutputAdjoint {
    pub fn zeros(output_dim: usize, batch: usize, extras: usize) -> Self {
        Self {
            values: Array2::zeros((output_dim, batch)),
            time_derivs: Array2::zeros((output_dim, batch)),
            extras: vec![0.0; extras],
        }
    }
}

/// A scalar loss over network outputs. Implementations return the loss and
/// accumulate (`+=`) its partial derivatives into `adj`.
pub trait Objective {
    fn evaluate(&self, pass: &ForwardPass, extras: &[f64], adj: &mut OutputAdjoint) -> f64;
}

impl<F> Objective for F
where
    F: Fn(&ForwardPass, &[f64], &mut OutputAdjoint) -> f64,
{
    fn evaluate(&self, pass: &ForwardPass, extras: &[f64], adj: &mut OutputAdjoint) -> f64 {
        self(pass, extras, adj)
    }
}

/// Gradient with the same shape as a [`Network`].
#[derive(Debug, Clone, PartialEq)]
pub struct NetGradient {
    pub layers: Vec<Dense>,
    pub extras: Vec<f64>,
}

impl NetGradient {
    /// Same ordering as [`Network::flat_params`].
    pub fn flat(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for layer in &self.layers {
            out.extend(layer.weights.iter().copied());
            out.extend(layer.bias.iter().copied());
        }
        out.extend(self.extras.iter().copied());
        out
    }
}

/// Result of one loss-and-gradient evaluation.
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub loss: f64,
    pub gradient: NetGradient,
    pub pass: ForwardPass,
}

/// Exact gradient of `objective` over every weight, bias and extra scalar.
///
/// Tangents are pushed forward alongside values, then the combined
/// computation is differentiated in reverse, so losses on d(output)/dt get
/// their second-order terms exactly.
pub fn loss_gradient<O: Objective + ?Sized>(
    net: &Network,
    times: &[f64],
    objective: &O,
) -> Result<Evaluation> {
    let mut trace = Trace::default();
    let pass = net.run(times, Some(&mut trace))?;
    let b = pass.batch;
    let extras = net.extra_values();
    let mut adj = OutputAdjoint::zeros(pass.output_dim(), b, extras.len());
    let loss = objective.evaluate(&pass, &extras, &mut adj);
    if !loss.is_finite() {
        return Err(Error::Training {
            stage: "loss evaluation",
            iteration: 0,
            data_loss: loss,
            physics_loss: f64::NAN,
        });
    }

    let mut g = Array2::<f64>::zeros((pass.output_dim(), 2 * b));
    g.slice_mut(s![.., ..b]).assign(&adj.values);
    g.slice_mut(s![.., b..]).assign(&adj.time_derivs);

    let mut grads: Vec<Dense> = Vec::with_capacity(net.layers.len());
    for l in (0..net.layers.len()).rev() {
        let x = &trace.inputs[l];
        grads.push(Dense {
            weights: g.dot(&x.t()),
            bias: g.slice(s![.., ..b]).sum_axis(Axis(1)),
        });
        if l == 0 {
            break;
        }
        let mut gz = net.layers[l].weights.t().dot(&g);
        let d1s = trace.d1[l - 1].as_slice().expect("contiguous");
        let d2s = trace.d2z[l - 1].as_slice().expect("contiguous");
        let width = gz.nrows();
        let zs = gz.as_slice_mut().expect("dot output is contiguous");
        for r in 0..width {
            let row = r * 2 * b;
            for c in 0..b {
                let gh = zs[row + c];
                let ght = zs[row + b + c];
                let a1 = d1s[r * b + c];
                zs[row + c] = gh * a1 + ght * d2s[r * b + c];
                zs[row + b + c] = ght * a1;
            }
        }
        g = gz;
    }
    grads.reverse();

    Ok(Evaluation {
        loss,
        gradient: NetGradient {
            layers: grads,
            extras: adj.extras,
        },
        pass,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn affine(w: f64, b: f64) -> Network {
        Network::from_layers(
            vec![Dense::new(array![[w]], array![b]).unwrap()],
            Activation::Tanh,
        )
        .unwrap()
    }

    #[test]
    fn same_seed_same_network() {
        let cfg = NetworkConfig::new(3, 4, 8, Activation::Tanh, 7);
        let a = Network::init(&cfg).unwrap();
        let b = Network::init(&cfg).unwrap();
        let bits = |n: &Network| n.flat_params().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&a), bits(&b));
        let c = Network::init(&cfg.with_seed(8)).unwrap();
        assert_ne!(a.flat_params(), c.flat_params());
    }

    #[test]
    fn rejects_bad_configs() {
        let cfg = NetworkConfig::new(3, 0, 20, Activation::Tanh, 7);
        assert!(matches!(Network::init(&cfg), Err(Error::Config(_))));
        let cfg = NetworkConfig::new(3, 2, 0, Activation::Tanh, 7);
        assert!(Network::init(&cfg).is_err());
        let cfg = NetworkConfig::new(4, 2, 5, Activation::Tanh, 7);
        assert!(Network::init(&cfg).is_err());
    }

    #[test]
    fn parameter_count_matches_layer_shapes() {
        let cfg = NetworkConfig::new(3, 7, 20, Activation::Tanh, 0);
        let mut net = Network::init(&cfg).unwrap();
        // 1->20, six 20->20, 20->3
        let expected = (20 + 20) + 6 * (20 * 20 + 20) + (3 * 20 + 3);
        assert_eq!(net.param_count(), expected);
        assert_eq!(net.param_count(), 2623);
        net.add_extra("raw_alpha", 0.1);
        net.add_extra("raw_beta", 0.1);
        assert_eq!(net.param_count(), 2625);
        assert_eq!(net.flat_params().len(), 2625);
    }

    #[test]
    fn glorot_bounds_and_zero_bias() {
        let cfg = NetworkConfig::new(2, 3, 16, Activation::Relu, 3);
        let net = Network::init(&cfg).unwrap();
        for layer in net.layers() {
            let limit = (6.0 / (layer.in_dim() + layer.out_dim()) as f64).sqrt();
            assert!(layer.weights.iter().all(|w| w.abs() <= limit));
            assert!(layer.bias.iter().all(|&b| b == 0.0));
        }
    }

    #[test]
    fn zero_weights_give_zero_output() {
        let cfg = NetworkConfig::new(3, 2, 5, Activation::Tanh, 1);
        let mut net = Network::init(&cfg).unwrap();
        let zeros = vec![0.0; net.param_count()];
        net.set_flat_params(&zeros).unwrap();
        for t in [0.0, 0.4, 1.0] {
            assert_eq!(net.forward(t).unwrap(), vec![0.0; 3]);
        }
    }

    #[test]
    fn affine_evaluation_and_derivative() {
        let net = affine(2.0, 1.0);
        assert_eq!(net.forward(0.5).unwrap(), vec![2.0]);
        let net = affine(3.0, -0.25);
        for t in [-1.0, 0.0, 0.3, 7.0] {
            let (_, d) = net.forward_with_time_derivative(t).unwrap();
            assert_eq!(d, vec![3.0]);
        }
    }

    #[test]
    fn forward_is_pure() {
        let net = Network::init(&NetworkConfig::new(2, 3, 10, Activation::Tanh, 11)).unwrap();
        assert_eq!(net.forward(0.37).unwrap(), net.forward(0.37).unwrap());
    }

    #[test]
    fn rejects_non_finite_time() {
        let net = affine(1.0, 0.0);
        assert!(matches!(net.forward(f64::NAN), Err(Error::Input(_))));
        assert!(net.forward_with_time_derivative(f64::INFINITY).is_err());
    }

    #[test]
    fn flat_roundtrip() {
        let mut net = Network::init(&NetworkConfig::new(2, 2, 4, Activation::Tanh, 5)).unwrap();
        net.add_extra("k", 0.5);
        let mut p = net.flat_params();
        p.iter_mut().for_each(|v| *v += 1.0);
        net.set_flat_params(&p).unwrap();
        assert_eq!(net.flat_params(), p);
        assert_eq!(net.extra("k"), Some(1.5));
        assert!(net.set_flat_params(&p[1..]).is_err());
    }

    #[test]
    fn constant_loss_has_zero_gradient() {
        let mut net = Network::init(&NetworkConfig::new(3, 2, 6, Activation::Tanh, 2)).unwrap();
        net.add_extra("a", 0.3);
        let obj = |_: &ForwardPass, _: &[f64], _: &mut OutputAdjoint| 4.2;
        let eval = loss_gradient(&net, &[0.1, 0.5], &obj).unwrap();
        assert_eq!(eval.loss, 4.2);
        assert!(eval.gradient.flat().iter().all(|&g| g == 0.0));
    }

    #[test]
    fn non_finite_loss_is_a_training_error() {
        let net = affine(1.0, 0.0);
        let obj = |_: &ForwardPass, _: &[f64], _: &mut OutputAdjoint| f64::NAN;
        let err = loss_gradient(&net, &[0.1], &obj).unwrap_err();
        assert!(err.is_training_failure());
    }
}
