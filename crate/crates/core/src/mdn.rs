//! Mixture density network: two feed-forward nets map a feature vector to a
//! Gaussian mixture over the target, trained by negative log-likelihood.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::logsumexp;
use crate::real::{real, Real};
use crate::stream::Sample;

/// Upper clamp on mixture scales, mirroring the floor in [`MdnConfig`].
pub const SIGMA_CEILING: f64 = 1e6;

const LN_2PI: f64 = 1.837_877_066_409_345_3;

/// Architecture and training settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "", default)]
pub struct MdnConfig<R: Real> {
    /// Number of mixture components K.
    pub components: usize,
    pub hidden_layers: usize,
    pub hidden_dim: usize,
    pub learning_rate: R,
    pub batch_size: usize,
    /// Lower clamp on mixture scales.
    pub sigma_floor: R,
}

impl<R: Real> Default for MdnConfig<R> {
    fn default() -> Self {
        Self {
            components: 5,
            hidden_layers: 2,
            hidden_dim: 512,
            learning_rate: real(5e-4),
            batch_size: 16,
            sigma_floor: real(1e-6),
        }
    }
}

impl<R: Real> MdnConfig<R> {
    pub fn validate(&self) -> Result<()> {
        if self.components == 0 {
            return Err(Error::InvalidConfig("components must be positive".into()));
        }
        if self.hidden_layers == 0 || self.hidden_dim == 0 {
            return Err(Error::InvalidConfig(
                "hidden_layers and hidden_dim must be positive".into(),
            ));
        }
        if !(self.learning_rate >= R::zero() && self.learning_rate.is_finite()) {
            return Err(Error::InvalidConfig(
                "learning_rate must be finite and non-negative".into(),
            ));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidConfig("batch_size must be positive".into()));
        }
        if !(self.sigma_floor > R::zero() && self.sigma_floor < real(SIGMA_CEILING)) {
            return Err(Error::InvalidConfig(
                "sigma_floor must lie strictly between 0 and the ceiling".into(),
            ));
        }
        Ok(())
    }
}

/// One dense layer; weights are row-major `[out_dim][in_dim]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct Linear<R: Real> {
    pub in_dim: usize,
    pub out_dim: usize,
    pub w: Vec<R>,
    pub b: Vec<R>,
}

impl<R: Real> Linear<R> {
    fn affine(&self, x: &[R]) -> Vec<R> {
        let mut out = self.b.clone();
        for o in 0..self.out_dim {
            let row = &self.w[o * self.in_dim..(o + 1) * self.in_dim];
            let mut acc = R::zero();
            for (wi, xi) in row.iter().zip(x) {
                acc += *wi * *xi;
            }
            out[o] += acc;
        }
        out
    }
}

/// Fully connected net with ReLU between layers and a linear final layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct Mlp<R: Real> {
    pub layers: Vec<Linear<R>>,
}

impl<R: Real> Mlp<R> {
    fn input_dim(&self) -> usize {
        self.layers[0].in_dim
    }

    fn forward(&self, x: &[R]) -> Vec<R> {
        let mut cur = x.to_vec();
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate() {
            let mut out = layer.affine(&cur);
            if i < last {
                for v in out.iter_mut() {
                    if *v < R::zero() {
                        *v = R::zero();
                    }
                }
            }
            cur = out;
        }
        cur
    }

    /// Forward pass that also returns each layer's input, for backprop.
    fn forward_cache(&self, x: &[R]) -> (Vec<Vec<R>>, Vec<R>) {
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut cur = x.to_vec();
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate() {
            let mut out = layer.affine(&cur);
            if i < last {
                for v in out.iter_mut() {
                    if *v < R::zero() {
                        *v = R::zero();
                    }
                }
            }
            inputs.push(cur);
            cur = out;
        }
        (inputs, cur)
    }

    /// Accumulates weight and bias gradients into `grads` (laid out as
    /// `[w0, b0, w1, b1, ...]` starting at `offset`), propagating `d_out`
    /// back through the layers. The ReLU derivative is read off the cached
    /// layer inputs: an input of zero means the unit was off.
    fn backward(&self, inputs: &[Vec<R>], mut d_out: Vec<R>, grads: &mut [Vec<R>], offset: usize) {
        for l in (0..self.layers.len()).rev() {
            let layer = &self.layers[l];
            let input = &inputs[l];
            {
                let gw = &mut grads[offset + 2 * l];
                for o in 0..layer.out_dim {
                    let row = &mut gw[o * layer.in_dim..(o + 1) * layer.in_dim];
                    for (gi, xi) in row.iter_mut().zip(input) {
                        *gi += d_out[o] * *xi;
                    }
                }
            }
            {
                let gb = &mut grads[offset + 2 * l + 1];
                for (g, d) in gb.iter_mut().zip(&d_out) {
                    *g += *d;
                }
            }
            if l > 0 {
                let mut d_in = vec![R::zero(); layer.in_dim];
                for o in 0..layer.out_dim {
                    let row = &layer.w[o * layer.in_dim..(o + 1) * layer.in_dim];
                    for (di, wi) in d_in.iter_mut().zip(row) {
                        *di += *wi * d_out[o];
                    }
                }
                for (di, xi) in d_in.iter_mut().zip(input) {
                    if *xi <= R::zero() {
                        *di = R::zero();
                    }
                }
                d_out = d_in;
            }
        }
    }
}

/// Mixture parameters produced by one forward pass.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct MixtureOutput<R: Real> {
    /// Log mixture weights; their `exp` sums to one.
    pub log_pi: Vec<R>,
    pub mu: Vec<R>,
    /// Scales after clamping into `[sigma_floor, SIGMA_CEILING]`.
    pub sigma: Vec<R>,
}

/// The network pair: `pi_net` emits K mixture logits, `comp_net` emits K
/// means followed by K raw log-scales.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct MdnParams<R: Real> {
    pub pi_net: Mlp<R>,
    pub comp_net: Mlp<R>,
    pub components: usize,
    pub sigma_floor: R,
}

/// Adam accumulators, one pair of moment vectors per parameter tensor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct OptimizerState<R: Real> {
    m: Vec<Vec<R>>,
    v: Vec<Vec<R>>,
    step: u64,
    beta1: R,
    beta2: R,
    epsilon: R,
}

impl<R: Real> OptimizerState<R> {
    pub fn new(params: &MdnParams<R>) -> Self {
        let zeros = params.zeroed_tensors();
        Self {
            m: zeros.clone(),
            v: zeros,
            step: 0,
            beta1: real(0.9),
            beta2: real(0.999),
            epsilon: real(1e-8),
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }
}

fn xavier_layer<R: Real>(in_dim: usize, out_dim: usize, rng: &mut impl Rng) -> Linear<R> {
    let limit = (6.0 / (in_dim + out_dim) as f64).sqrt();
    let w = (0..in_dim * out_dim)
        .map(|_| real::<R>((rng.random::<f64>() * 2.0 - 1.0) * limit))
        .collect();
    Linear {
        in_dim,
        out_dim,
        w,
        b: vec![R::zero(); out_dim],
    }
}

fn xavier_mlp<R: Real>(dims: &[usize], rng: &mut impl Rng) -> Mlp<R> {
    let layers = dims
        .windows(2)
        .map(|pair| xavier_layer(pair[0], pair[1], rng))
        .collect();
    Mlp { layers }
}

/// Builds a freshly initialized network pair and its optimizer state.
/// Weights are Xavier-uniform, biases zero; the `pi_net` is drawn first so
/// identical seeds give identical networks.
pub fn init<R: Real>(
    config: &MdnConfig<R>,
    input_dim: usize,
    rng: &mut impl Rng,
) -> Result<(MdnParams<R>, OptimizerState<R>)> {
    config.validate()?;
    if input_dim == 0 {
        return Err(Error::InvalidConfig("input_dim must be positive".into()));
    }
    let mut dims = vec![input_dim];
    dims.extend(std::iter::repeat(config.hidden_dim).take(config.hidden_layers));
    let mut pi_dims = dims.clone();
    pi_dims.push(config.components);
    let mut comp_dims = dims;
    comp_dims.push(2 * config.components);
    let params = MdnParams {
        pi_net: xavier_mlp(&pi_dims, rng),
        comp_net: xavier_mlp(&comp_dims, rng),
        components: config.components,
        sigma_floor: config.sigma_floor,
    };
    let opt = OptimizerState::new(&params);
    Ok((params, opt))
}

impl<R: Real> MdnParams<R> {
    pub fn input_dim(&self) -> usize {
        self.pi_net.input_dim()
    }

    fn check_input(&self, x: &[R]) -> Result<()> {
        if x.len() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim(),
                got: x.len(),
            });
        }
        Ok(())
    }

    /// Zero tensors shaped like the full parameter list
    /// `[pi w0, pi b0, ..., comp w0, comp b0, ...]`.
    fn zeroed_tensors(&self) -> Vec<Vec<R>> {
        let mut out = Vec::new();
        for net in [&self.pi_net, &self.comp_net] {
            for layer in &net.layers {
                out.push(vec![R::zero(); layer.w.len()]);
                out.push(vec![R::zero(); layer.b.len()]);
            }
        }
        out
    }

    /// Flat mutable views of every parameter tensor, in the same order as
    /// the gradients from [`MdnParams::batch_gradients`].
    pub fn tensors_mut(&mut self) -> Vec<&mut Vec<R>> {
        let mut out: Vec<&mut Vec<R>> = Vec::new();
        for net in [&mut self.pi_net, &mut self.comp_net] {
            for layer in net.layers.iter_mut() {
                out.push(&mut layer.w);
                out.push(&mut layer.b);
            }
        }
        out
    }

    fn clamp_sigma(&self, raw: R) -> (R, bool) {
        let floor = self.sigma_floor;
        let ceiling = real::<R>(SIGMA_CEILING);
        let sigma = raw.exp();
        if sigma < floor {
            (floor, true)
        } else if sigma > ceiling {
            (ceiling, true)
        } else {
            (sigma, false)
        }
    }

    /// Maps features to mixture parameters: log-softmax over the pi logits,
    /// then K means and K exp-transformed, clamped scales.
    pub fn forward(&self, x: &[R]) -> Result<MixtureOutput<R>> {
        self.check_input(x)?;
        let logits = self.pi_net.forward(x);
        let head = self.comp_net.forward(x);
        let lse = logsumexp(&logits);
        let log_pi: Vec<R> = logits.iter().map(|&z| z - lse).collect();
        let k = self.components;
        let mu = head[..k].to_vec();
        let sigma: Vec<R> = head[k..].iter().map(|&s| self.clamp_sigma(s).0).collect();
        let finite = log_pi.iter().chain(&mu).chain(&sigma).all(|v| !v.is_nan())
            && mu.iter().all(|v| v.is_finite())
            && sigma.iter().all(|v| v.is_finite());
        if !finite {
            return Err(Error::Numerical(
                "forward pass produced non-finite mixture parameters".into(),
            ));
        }
        Ok(MixtureOutput { log_pi, mu, sigma })
    }

    /// Expected target under the predicted mixture.
    pub fn predict_mean(&self, x: &[R]) -> Result<R> {
        Ok(mixture_mean(&self.forward(x)?))
    }

    /// Mean loss and mean parameter gradients over a batch, computed by
    /// backpropagation. Tensors come out in the order
    /// `[pi w0, pi b0, ..., comp w0, comp b0, ...]`. Fails without touching
    /// anything when the batch is empty, a dimension disagrees, or any value
    /// comes out non-finite.
    pub fn batch_gradients(&self, samples: &[Sample<R>]) -> Result<(R, Vec<Vec<R>>)> {
        if samples.is_empty() {
            return Err(Error::EmptyInput("gradient step on an empty batch"));
        }
        let k = self.components;
        let half_ln2pi = real::<R>(0.5 * LN_2PI);
        let mut grads = self.zeroed_tensors();
        let comp_offset = 2 * self.pi_net.layers.len();
        let mut total_loss = R::zero();
        for sample in samples {
            self.check_input(&sample.features)?;
            let (pi_inputs, logits) = self.pi_net.forward_cache(&sample.features);
            let (comp_inputs, head) = self.comp_net.forward_cache(&sample.features);
            let lse_logits = logsumexp(&logits);
            let y = sample.target;

            let mut a = vec![R::zero(); k];
            let mut sigmas = vec![R::zero(); k];
            let mut clamped = vec![false; k];
            for j in 0..k {
                let log_pi = logits[j] - lse_logits;
                let (sigma, was_clamped) = self.clamp_sigma(head[k + j]);
                let z = (y - head[j]) / sigma;
                a[j] = log_pi - sigma.ln() - half_ln2pi - z * z / real::<R>(2.0);
                sigmas[j] = sigma;
                clamped[j] = was_clamped;
            }
            let lse_a = logsumexp(&a);
            total_loss += -lse_a;

            // Component responsibilities under the current parameters.
            let r: Vec<R> = a.iter().map(|&aj| (aj - lse_a).exp()).collect();
            let d_logits: Vec<R> = logits
                .iter()
                .zip(&r)
                .map(|(&z, &rj)| (z - lse_logits).exp() - rj)
                .collect();
            let mut d_head = vec![R::zero(); 2 * k];
            for j in 0..k {
                let diff = y - head[j];
                let var = sigmas[j] * sigmas[j];
                d_head[j] = -(r[j] * diff / var);
                // No gradient flows into a clamped scale.
                d_head[k + j] = if clamped[j] {
                    R::zero()
                } else {
                    r[j] * (R::one() - diff * diff / var)
                };
            }
            self.pi_net.backward(&pi_inputs, d_logits, &mut grads, 0);
            self.comp_net
                .backward(&comp_inputs, d_head, &mut grads, comp_offset);
        }
        let scale = R::one() / real::<R>(samples.len() as f64);
        total_loss *= scale;
        for tensor in grads.iter_mut() {
            for g in tensor.iter_mut() {
                *g *= scale;
            }
        }
        if !total_loss.is_finite() || grads.iter().any(|t| t.iter().any(|g| !g.is_finite())) {
            return Err(Error::Numerical(
                "non-finite loss or gradient; parameters left unchanged".into(),
            ));
        }
        Ok((total_loss, grads))
    }

    /// One Adam step on the mean batch loss. Returns the pre-step loss.
    /// On any numerical failure the parameters and optimizer state are left
    /// exactly as they were.
    pub fn grad_step(
        &mut self,
        opt: &mut OptimizerState<R>,
        samples: &[Sample<R>],
        learning_rate: R,
    ) -> Result<R> {
        let (loss, grads) = self.batch_gradients(samples)?;
        opt.step += 1;
        let b1 = opt.beta1;
        let b2 = opt.beta2;
        let eps = opt.epsilon;
        let t = opt.step as i32;
        let bc1 = R::one() - b1.powi(t);
        let bc2 = R::one() - b2.powi(t);
        for ((tensor, grad), (m, v)) in self
            .tensors_mut()
            .into_iter()
            .zip(&grads)
            .zip(opt.m.iter_mut().zip(opt.v.iter_mut()))
        {
            for i in 0..tensor.len() {
                let g = grad[i];
                m[i] = b1 * m[i] + (R::one() - b1) * g;
                v[i] = b2 * v[i] + (R::one() - b2) * g * g;
                let m_hat = m[i] / bc1;
                let v_hat = v[i] / bc2;
                tensor[i] -= learning_rate * m_hat / (v_hat.sqrt() + eps);
            }
        }
        Ok(loss)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

/// Negative log-likelihood of a target under a mixture, via the max-shifted
/// log-sum-exp of the per-component log densities.
pub fn nll_loss<R: Real>(out: &MixtureOutput<R>, y: R) -> R {
    let half_ln2pi = real::<R>(0.5 * LN_2PI);
    let a: Vec<R> = out
        .log_pi
        .iter()
        .zip(&out.mu)
        .zip(&out.sigma)
        .map(|((&lp, &mu), &sigma)| {
            let z = (y - mu) / sigma;
            lp - sigma.ln() - half_ln2pi - z * z / real::<R>(2.0)
        })
        .collect();
    -logsumexp(&a)
}

/// Expected value of a mixture: the weight-averaged component means.
pub fn mixture_mean<R: Real>(out: &MixtureOutput<R>) -> R {
    out.log_pi
        .iter()
        .zip(&out.mu)
        .map(|(&lp, &mu)| lp.exp() * mu)
        .sum()
}
