//! Shared feed-forward actor and critic: forward pass with cached
//! activations, categorical sampling, exact reverse-mode gradients, Adam,
//! and a portable versioned checkpoint format.

use crate::error::{Result, SwarmError};
use crate::physics::ActionCommand;
use rand::Rng;
use serde::{Deserialize, Serialize};

/// Trunk widths between the observation and the output head.
pub const HIDDEN_WIDTHS: [usize; 3] = [32, 16, 16];

pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub rows: usize,
    pub cols: usize,
    /// Row-major rows x cols.
    pub w: Vec<f64>,
    pub b: Vec<f64>,
}

impl Layer {
    pub fn zeros(rows: usize, cols: usize) -> Layer {
        Layer { rows, cols, w: vec![0.0; rows * cols], b: vec![0.0; rows] }
    }

    /// Zero biases, weights uniform in ±sqrt(6/(fan_in+fan_out)).
    pub fn glorot<R: Rng>(rows: usize, cols: usize, rng: &mut R) -> Layer {
        let limit = (6.0 / (rows + cols) as f64).sqrt();
        let w = (0..rows * cols).map(|_| rng.random_range(-limit..limit)).collect();
        Layer { rows, cols, w, b: vec![0.0; rows] }
    }

    fn matvec(&self, x: &[f64], out: &mut Vec<f64>) {
        out.clear();
        for r in 0..self.rows {
            let row = &self.w[r * self.cols..(r + 1) * self.cols];
            let mut acc = self.b[r];
            for (wv, xv) in row.iter().zip(x) {
                acc += wv * xv;
            }
            out.push(acc);
        }
    }

    fn validate(&self) -> Result<()> {
        if self.rows == 0 || self.cols == 0 {
            return Err(SwarmError::ShapeMismatch("empty layer".into()));
        }
        if self.w.len() != self.rows * self.cols || self.b.len() != self.rows {
            return Err(SwarmError::ShapeMismatch(format!(
                "layer buffers disagree with declared shape {}x{}",
                self.rows, self.cols
            )));
        }
        if !self.w.iter().chain(&self.b).all(|v| v.is_finite()) {
            return Err(SwarmError::InvalidState("non-finite layer parameter".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    pub layers: Vec<Layer>,
}

impl Mlp {
    pub fn new<R: Rng>(input_width: usize, output_width: usize, rng: &mut R) -> Mlp {
        let mut layers = Vec::with_capacity(HIDDEN_WIDTHS.len() + 1);
        let mut prev = input_width;
        for &h in &HIDDEN_WIDTHS {
            layers.push(Layer::glorot(h, prev, rng));
            prev = h;
        }
        layers.push(Layer::glorot(output_width, prev, rng));
        Mlp { layers }
    }

    pub fn zeros(input_width: usize, output_width: usize) -> Mlp {
        let mut layers = Vec::with_capacity(HIDDEN_WIDTHS.len() + 1);
        let mut prev = input_width;
        for &h in &HIDDEN_WIDTHS {
            layers.push(Layer::zeros(h, prev));
            prev = h;
        }
        layers.push(Layer::zeros(output_width, prev));
        Mlp { layers }
    }

    pub fn actor<R: Rng>(input_width: usize, rng: &mut R) -> Mlp {
        Mlp::new(input_width, ActionCommand::ALL.len(), rng)
    }

    pub fn critic<R: Rng>(input_width: usize, rng: &mut R) -> Mlp {
        Mlp::new(input_width, 1, rng)
    }

    pub fn input_width(&self) -> usize {
        self.layers[0].cols
    }

    pub fn output_width(&self) -> usize {
        self.layers.last().map(|l| l.rows).unwrap_or(0)
    }

    pub fn check_io(&self, input: usize, output: usize) -> Result<()> {
        if self.input_width() != input || self.output_width() != output {
            return Err(SwarmError::ShapeMismatch(format!(
                "network is {}->{}, expected {}->{}",
                self.input_width(),
                self.output_width(),
                input,
                output
            )));
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if self.layers.is_empty() {
            return Err(SwarmError::ShapeMismatch("network has no layers".into()));
        }
        for pair in self.layers.windows(2) {
            if pair[1].cols != pair[0].rows {
                return Err(SwarmError::ShapeMismatch(format!(
                    "layer widths do not chain: {} feeds {}",
                    pair[0].rows, pair[1].cols
                )));
            }
        }
        self.layers.iter().try_for_each(Layer::validate)
    }

    /// Trunk with tanh on every hidden layer and a linear output head.
    pub fn forward(&self, obs: &[f64]) -> Result<ForwardCache> {
        if obs.len() != self.input_width() {
            return Err(SwarmError::ShapeMismatch(format!(
                "observation width {} does not match network input {}",
                obs.len(),
                self.input_width()
            )));
        }
        let last = self.layers.len() - 1;
        let mut hidden = Vec::with_capacity(last);
        let mut x = obs.to_vec();
        let mut z = Vec::new();
        for layer in &self.layers[..last] {
            layer.matvec(&x, &mut z);
            for v in &mut z {
                *v = v.tanh();
            }
            hidden.push(z.clone());
            std::mem::swap(&mut x, &mut z);
        }
        let mut output = Vec::new();
        self.layers[last].matvec(&x, &mut output);
        Ok(ForwardCache { input: obs.to_vec(), hidden, output })
    }

    /// Exact reverse-mode gradients of a scalar loss, given its gradient at
    /// the linear output.
    pub fn backward(&self, cache: &ForwardCache, dout: &[f64]) -> Result<GradientBuffer> {
        let last = self.layers.len() - 1;
        let cache_ok = cache.input.len() == self.input_width()
            && cache.hidden.len() == last
            && cache
                .hidden
                .iter()
                .zip(&self.layers[..last])
                .all(|(h, l)| h.len() == l.rows)
            && cache.output.len() == self.output_width()
            && dout.len() == self.output_width();
        if !cache_ok {
            return Err(SwarmError::ShapeMismatch(
                "activation cache does not match this network".into(),
            ));
        }
        let mut grads = GradientBuffer::zeros_like(self);
        let mut d = dout.to_vec();
        for i in (0..self.layers.len()).rev() {
            let layer = &self.layers[i];
            let below: &[f64] = if i == 0 { &cache.input } else { &cache.hidden[i - 1] };
            let g = &mut grads.layers[i];
            for r in 0..layer.rows {
                g.b[r] = d[r];
                let row = &mut g.w[r * layer.cols..(r + 1) * layer.cols];
                for (gv, xv) in row.iter_mut().zip(below) {
                    *gv = d[r] * xv;
                }
            }
            if i > 0 {
                let mut dx = vec![0.0; layer.cols];
                for r in 0..layer.rows {
                    let row = &layer.w[r * layer.cols..(r + 1) * layer.cols];
                    for (dv, wv) in dx.iter_mut().zip(row) {
                        *dv += wv * d[r];
                    }
                }
                // back through tanh: dz = dx (1 - h^2)
                let h = &cache.hidden[i - 1];
                for (dv, hv) in dx.iter_mut().zip(h) {
                    *dv *= 1.0 - hv * hv;
                }
                d = dx;
            }
        }
        Ok(grads)
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.w.len() + l.b.len()).sum()
    }

    /// Per layer: weights row-major, then biases.
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for l in &self.layers {
            out.extend_from_slice(&l.w);
            out.extend_from_slice(&l.b);
        }
        out
    }

    pub fn set_from_flat(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.param_count() {
            return Err(SwarmError::ShapeMismatch(format!(
                "flat vector has {} entries, network holds {}",
                flat.len(),
                self.param_count()
            )));
        }
        let mut k = 0;
        for l in &mut self.layers {
            let nw = l.w.len();
            l.w.copy_from_slice(&flat[k..k + nw]);
            k += nw;
            let nb = l.b.len();
            l.b.copy_from_slice(&flat[k..k + nb]);
            k += nb;
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct ForwardCache {
    pub input: Vec<f64>,
    /// Post-tanh activations of each hidden layer.
    pub hidden: Vec<Vec<f64>>,
    /// Linear head output: 4 logits (actor) or 1 value (critic).
    pub output: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradientBuffer {
    pub layers: Vec<Layer>,
}

impl GradientBuffer {
    pub fn zeros_like(net: &Mlp) -> GradientBuffer {
        GradientBuffer {
            layers: net.layers.iter().map(|l| Layer::zeros(l.rows, l.cols)).collect(),
        }
    }

    pub fn accumulate(&mut self, other: &GradientBuffer) -> Result<()> {
        if self.layers.len() != other.layers.len() {
            return Err(SwarmError::ShapeMismatch("gradient buffers disagree".into()));
        }
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            if a.rows != b.rows || a.cols != b.cols {
                return Err(SwarmError::ShapeMismatch("gradient buffers disagree".into()));
            }
            for (x, y) in a.w.iter_mut().zip(&b.w) {
                *x += y;
            }
            for (x, y) in a.b.iter_mut().zip(&b.b) {
                *x += y;
            }
        }
        Ok(())
    }

    pub fn scale(&mut self, s: f64) {
        for l in &mut self.layers {
            l.w.iter_mut().for_each(|v| *v *= s);
            l.b.iter_mut().for_each(|v| *v *= s);
        }
    }

    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for l in &self.layers {
            out.extend_from_slice(&l.w);
            out.extend_from_slice(&l.b);
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ActionDistribution {
    pub probs: [f64; 4],
}

impl ActionDistribution {
    /// Numerically stable softmax over the 4 action logits.
    pub fn from_logits(logits: &[f64]) -> Result<ActionDistribution> {
        if logits.len() != 4 {
            return Err(SwarmError::ShapeMismatch(format!(
                "expected 4 logits, got {}",
                logits.len()
            )));
        }
        if !logits.iter().all(|v| v.is_finite()) {
            return Err(SwarmError::InvalidState("non-finite logit".into()));
        }
        let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut probs = [0.0; 4];
        let mut sum = 0.0;
        for (p, l) in probs.iter_mut().zip(logits) {
            *p = (l - max).exp();
            sum += *p;
        }
        probs.iter_mut().for_each(|p| *p /= sum);
        Ok(ActionDistribution { probs })
    }

    pub fn prob(&self, action: ActionCommand) -> f64 {
        self.probs[action.index()]
    }

    pub fn log_prob(&self, action: ActionCommand) -> f64 {
        self.probs[action.index()].ln()
    }

    pub fn entropy(&self) -> f64 {
        -self.probs.iter().filter(|p| **p > 0.0).map(|p| p * p.ln()).sum::<f64>()
    }

    pub fn argmax(&self) -> ActionCommand {
        let mut best = 0;
        for k in 1..4 {
            if self.probs[k] > self.probs[best] {
                best = k;
            }
        }
        ActionCommand::from_index(best).unwrap()
    }

    /// Inverse-CDF categorical draw; returns the action and its
    /// log-probability.
    pub fn sample<R: Rng>(&self, rng: &mut R) -> (ActionCommand, f64) {
        let u: f64 = rng.random();
        let mut cum = 0.0;
        for k in 0..4 {
            cum += self.probs[k];
            if u < cum {
                let a = ActionCommand::from_index(k).unwrap();
                return (a, self.log_prob(a));
            }
        }
        let a = ActionCommand::Stay;
        (a, self.log_prob(a))
    }
}

pub fn forward_policy(actor: &Mlp, obs: &[f64]) -> Result<(ActionDistribution, ForwardCache)> {
    if actor.output_width() != 4 {
        return Err(SwarmError::ShapeMismatch("actor head must emit 4 logits".into()));
    }
    let cache = actor.forward(obs)?;
    let dist = ActionDistribution::from_logits(&cache.output)?;
    Ok((dist, cache))
}

pub fn forward_value(critic: &Mlp, obs: &[f64]) -> Result<(f64, ForwardCache)> {
    if critic.output_width() != 1 {
        return Err(SwarmError::ShapeMismatch("critic head must emit 1 value".into()));
    }
    let cache = critic.forward(obs)?;
    let value = cache.output[0];
    Ok((value, cache))
}

/// Adam with bias correction; state is parameter-shaped and serializable so
/// training can resume bit-exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub step: u64,
    pub m: Vec<f64>,
    pub v: Vec<f64>,
}

impl Adam {
    pub fn new(lr: f64, net: &Mlp) -> Adam {
        Adam {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            m: vec![0.0; net.param_count()],
            v: vec![0.0; net.param_count()],
        }
    }

    pub fn apply(&mut self, net: &mut Mlp, grads: &GradientBuffer) -> Result<()> {
        let g = grads.flatten();
        if g.len() != self.m.len() {
            return Err(SwarmError::ShapeMismatch(
                "gradient does not match optimizer state".into(),
            ));
        }
        let mut p = net.flatten();
        if p.len() != self.m.len() {
            return Err(SwarmError::ShapeMismatch(
                "network does not match optimizer state".into(),
            ));
        }
        self.step += 1;
        let t = self.step as i32;
        let c1 = 1.0 - self.beta1.powi(t);
        let c2 = 1.0 - self.beta2.powi(t);
        for k in 0..g.len() {
            self.m[k] = self.beta1 * self.m[k] + (1.0 - self.beta1) * g[k];
            self.v[k] = self.beta2 * self.v[k] + (1.0 - self.beta2) * g[k] * g[k];
            let mhat = self.m[k] / c1;
            let vhat = self.v[k] / c2;
            p[k] -= self.lr * mhat / (vhat.sqrt() + self.eps);
        }
        net.set_from_flat(&p)
    }
}

#[derive(Serialize, Deserialize)]
struct CheckpointDoc {
    version: u32,
    input_width: usize,
    layers: Vec<Layer>,
}

/// Versioned text document: shapes plus row-major arrays.
pub fn serialize_params(net: &Mlp) -> Result<String> {
    net.validate()?;
    let doc = CheckpointDoc {
        version: CHECKPOINT_VERSION,
        input_width: net.input_width(),
        layers: net.layers.clone(),
    };
    Ok(serde_json::to_string_pretty(&doc)?)
}

pub fn deserialize_params(text: &str) -> Result<Mlp> {
    let doc: CheckpointDoc = serde_json::from_str(text)
        .map_err(|e| SwarmError::BadCheckpoint(format!("unreadable document: {e}")))?;
    if doc.version != CHECKPOINT_VERSION {
        return Err(SwarmError::BadCheckpoint(format!(
            "format version {} unsupported (expected {})",
            doc.version, CHECKPOINT_VERSION
        )));
    }
    let net = Mlp { layers: doc.layers };
    net.validate().map_err(|e| SwarmError::BadCheckpoint(e.to_string()))?;
    if net.input_width() != doc.input_width {
        return Err(SwarmError::BadCheckpoint(format!(
            "declared input width {} disagrees with first layer ({})",
            doc.input_width,
            net.input_width()
        )));
    }
    Ok(net)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    #[test]
    fn zero_network_is_uniform_and_valueless() {
        let actor = Mlp::zeros(10, 4);
        let (dist, _) = forward_policy(&actor, &[0.3; 10]).unwrap();
        for p in dist.probs {
            assert_eq!(p, 0.25);
        }
        let critic = Mlp::zeros(10, 1);
        let (v, _) = forward_value(&critic, &[0.3; 10]).unwrap();
        assert_eq!(v, 0.0);
    }

    #[test]
    fn logit_shift_leaves_probabilities_unchanged() {
        let mut r = rng(7);
        let actor = Mlp::actor(10, &mut r);
        let obs: Vec<f64> = (0..10).map(|_| r.random::<f64>()).collect();
        let (base, _) = forward_policy(&actor, &obs).unwrap();
        let mut shifted = actor.clone();
        for b in &mut shifted.layers.last_mut().unwrap().b {
            *b += 3.7;
        }
        let (moved, _) = forward_policy(&shifted, &obs).unwrap();
        for (a, b) in base.probs.iter().zip(&moved.probs) {
            assert!((a - b).abs() < 1e-12);
        }
        assert_eq!(base.argmax(), moved.argmax());
    }

    #[test]
    fn probabilities_sum_to_one_over_random_draws() {
        let mut r = rng(11);
        for _ in 0..1000 {
            let actor = Mlp::actor(10, &mut r);
            let obs: Vec<f64> = (0..10).map(|_| r.random_range(-1.0..1.0)).collect();
            let (dist, _) = forward_policy(&actor, &obs).unwrap();
            let sum: f64 = dist.probs.iter().sum();
            assert!((sum - 1.0).abs() < 1e-12);
            assert!(dist.probs.iter().all(|p| *p >= 0.0));
        }
    }

    #[test]
    fn degenerate_distribution_always_returns_its_atom() {
        let dist = ActionDistribution { probs: [1.0, 0.0, 0.0, 0.0] };
        let mut r = rng(3);
        for _ in 0..100 {
            let (a, lp) = dist.sample(&mut r);
            assert_eq!(a, ActionCommand::Forward);
            assert_eq!(lp, 0.0);
        }
    }

    #[test]
    fn uniform_sampling_frequencies_are_flat() {
        let dist = ActionDistribution { probs: [0.25; 4] };
        let mut r = rng(12);
        let mut counts = [0usize; 4];
        let n = 100_000;
        for _ in 0..n {
            let (a, _) = dist.sample(&mut r);
            counts[a.index()] += 1;
        }
        for c in counts {
            let f = c as f64 / n as f64;
            assert!((f - 0.25).abs() < 0.005, "frequency {f}");
        }
    }

    #[test]
    fn sampling_is_reproducible_for_a_fixed_seed() {
        let dist = ActionDistribution { probs: [0.4, 0.3, 0.2, 0.1] };
        let seq = |seed: u64| -> Vec<usize> {
            let mut r = rng(seed);
            (0..50).map(|_| dist.sample(&mut r).0.index()).collect()
        };
        assert_eq!(seq(5), seq(5));
        assert_ne!(seq(5), seq(6));
    }

    #[test]
    fn value_head_is_deterministic_and_linear_in_its_layer() {
        let mut r = rng(21);
        let critic = Mlp::critic(10, &mut r);
        let obs: Vec<f64> = (0..10).map(|_| r.random_range(-1.0..1.0)).collect();
        let (v1, _) = forward_value(&critic, &obs).unwrap();
        let (v2, _) = forward_value(&critic, &obs).unwrap();
        assert_eq!(v1, v2);

        let mut doubled = critic.clone();
        let last = doubled.layers.last_mut().unwrap();
        last.w.iter_mut().for_each(|w| *w *= 2.0);
        last.b.iter_mut().for_each(|b| *b *= 2.0);
        let (v3, _) = forward_value(&doubled, &obs).unwrap();
        assert!((v3 - 2.0 * v1).abs() < 1e-12);
    }

    #[test]
    fn width_mismatches_are_rejected() {
        let actor = Mlp::zeros(10, 4);
        assert!(actor.forward(&[0.0; 30]).is_err());
        assert!(actor.check_io(30, 4).is_err());
        assert!(actor.check_io(10, 4).is_ok());
        let critic = Mlp::zeros(10, 1);
        assert!(forward_policy(&critic, &[0.0; 10]).is_err());
    }

    /// Loss: cross-entropy to a fixed action through the softmax, plus a
    /// quadratic tap on the raw logits so every output coordinate matters.
    fn test_loss(net: &Mlp, obs: &[f64], target: usize) -> f64 {
        let cache = net.forward(obs).unwrap();
        let dist = ActionDistribution::from_logits(&cache.output).unwrap();
        let quad: f64 = cache.output.iter().map(|z| 0.05 * z * z).sum();
        -dist.probs[target].ln() + quad
    }

    fn test_loss_grad(net: &Mlp, obs: &[f64], target: usize) -> GradientBuffer {
        let cache = net.forward(obs).unwrap();
        let dist = ActionDistribution::from_logits(&cache.output).unwrap();
        let mut dout = [0.0; 4];
        for k in 0..4 {
            dout[k] = dist.probs[k] + 0.1 * cache.output[k];
        }
        dout[target] -= 1.0;
        net.backward(&cache, &dout).unwrap()
    }

    #[test]
    fn gradients_match_central_finite_differences() {
        let mut r = rng(31);
        for trial in 0..3 {
            let net = Mlp::actor(6, &mut r);
            let obs: Vec<f64> = (0..6).map(|_| r.random_range(-1.0..1.0)).collect();
            let target = trial % 4;
            let analytic = test_loss_grad(&net, &obs, target).flatten();
            let flat = net.flatten();
            let h = 1e-5;
            let mut worst = 0.0f64;
            for k in 0..flat.len() {
                let mut plus = net.clone();
                let mut minus = net.clone();
                let mut fp = flat.clone();
                fp[k] += h;
                plus.set_from_flat(&fp).unwrap();
                fp[k] -= 2.0 * h;
                minus.set_from_flat(&fp).unwrap();
                let fd =
                    (test_loss(&plus, &obs, target) - test_loss(&minus, &obs, target)) / (2.0 * h);
                let denom = analytic[k].abs().max(fd.abs()).max(1e-6);
                worst = worst.max((analytic[k] - fd).abs() / denom);
            }
            assert!(worst < 1e-4, "max relative error {worst}");
        }
    }

    #[test]
    fn zero_output_gradient_gives_zero_parameter_gradients() {
        let mut r = rng(41);
        let net = Mlp::actor(8, &mut r);
        let obs: Vec<f64> = (0..8).map(|_| r.random::<f64>()).collect();
        let cache = net.forward(&obs).unwrap();
        let grads = net.backward(&cache, &[0.0; 4]).unwrap();
        assert!(grads.flatten().iter().all(|g| *g == 0.0));
    }

    #[test]
    fn saturated_cross_entropy_has_zero_logit_gradient() {
        // logits so far apart the other exponentials underflow to zero
        let dist = ActionDistribution::from_logits(&[1000.0, 0.0, 0.0, 0.0]).unwrap();
        assert_eq!(dist.probs[0], 1.0);
        let mut dout = [0.0; 4];
        for k in 0..4 {
            dout[k] = dist.probs[k];
        }
        dout[0] -= 1.0;
        assert!(dout.iter().all(|d| *d == 0.0));
    }

    #[test]
    fn cache_from_another_network_is_rejected() {
        let big = Mlp::zeros(12, 4);
        let small = Mlp::zeros(6, 4);
        let cache = big.forward(&[0.1; 12]).unwrap();
        assert!(small.backward(&cache, &[1.0, 0.0, 0.0, 0.0]).is_err());
        let cache2 = small.forward(&[0.1; 6]).unwrap();
        assert!(small.backward(&cache2, &[1.0]).is_err());
    }

    #[test]
    fn checkpoint_round_trip_is_byte_identical() {
        let mut r = rng(55);
        let net = Mlp::actor(30, &mut r);
        let first = serialize_params(&net).unwrap();
        let loaded = deserialize_params(&first).unwrap();
        let second = serialize_params(&loaded).unwrap();
        assert_eq!(first, second);
        assert_eq!(net, loaded);
    }

    #[test]
    fn checkpoint_guards_reject_bad_documents() {
        let mut r = rng(56);
        let net = Mlp::actor(10, &mut r);
        let doc = serialize_params(&net).unwrap();

        // wrong input width for the task at hand
        let loaded = deserialize_params(&doc).unwrap();
        let err = loaded.check_io(30, 4).unwrap_err();
        assert!(err.to_string().contains("10"));

        let bumped = doc.replace("\"version\": 1", "\"version\": 9");
        assert!(matches!(deserialize_params(&bumped), Err(SwarmError::BadCheckpoint(_))));

        let lying = doc.replace("\"input_width\": 10", "\"input_width\": 30");
        assert!(deserialize_params(&lying).is_err());

        assert!(deserialize_params("{not json").is_err());
    }

    #[test]
    fn adam_first_step_moves_against_the_gradient_sign() {
        let mut net = Mlp::zeros(4, 4);
        let mut grads = GradientBuffer::zeros_like(&net);
        grads.layers[0].w[0] = 3.0;
        grads.layers[0].w[1] = -0.2;
        let mut opt = Adam::new(1e-3, &net);
        opt.apply(&mut net, &grads).unwrap();
        // bias-corrected first step is lr * g / (|g| + eps), i.e. nearly
        // lr * sign(g), independent of magnitude
        let flat = net.flatten();
        assert!((flat[0] + 1e-3).abs() < 1e-9);
        assert!((flat[1] - 1e-3).abs() < 1e-9);
        assert_eq!(flat[2], 0.0);
        assert_eq!(opt.step, 1);
    }

    #[test]
    fn adam_two_steps_match_a_hand_computation() {
        let mut net = Mlp::zeros(4, 4);
        let mut grads = GradientBuffer::zeros_like(&net);
        grads.layers[0].w[0] = 1.0;
        let mut opt = Adam::new(0.1, &net);
        opt.apply(&mut net, &grads).unwrap();
        grads.layers[0].w[0] = 2.0;
        opt.apply(&mut net, &grads).unwrap();

        let (b1, b2, eps, lr): (f64, f64, f64, f64) = (0.9, 0.999, 1e-8, 0.1);
        let m1 = (1.0 - b1) * 1.0;
        let v1 = (1.0 - b2) * 1.0;
        let p1 = -lr * (m1 / (1.0 - b1)) / ((v1 / (1.0 - b2)).sqrt() + eps);
        let m2 = b1 * m1 + (1.0 - b1) * 2.0;
        let v2 = b2 * v1 + (1.0 - b2) * 4.0;
        let p2 = p1
            - lr * (m2 / (1.0 - b1 * b1)) / ((v2 / (1.0 - b2 * b2)).sqrt() + eps);
        assert!((net.flatten()[0] - p2).abs() < 1e-15);
    }

    #[test]
    fn glorot_init_respects_the_fan_limits_and_zero_biases() {
        let mut r = rng(77);
        let net = Mlp::actor(30, &mut r);
        for l in &net.layers {
            let limit = (6.0 / (l.rows + l.cols) as f64).sqrt();
            assert!(l.w.iter().all(|w| w.abs() < limit));
            assert!(l.b.iter().all(|b| *b == 0.0));
        }
        assert_eq!(net.layers.iter().map(|l| l.rows).collect::<Vec<_>>(), vec![32, 16, 16, 4]);
    }

    #[test]
    fn forward_is_reproducible_across_calls() {
        let mut r = rng(91);
        let net = Mlp::actor(10, &mut r);
        let obs: Vec<f64> = (0..10).map(|_| r.random::<f64>()).collect();
        let a = net.forward(&obs).unwrap().output;
        let b = net.forward(&obs).unwrap().output;
        assert_eq!(a, b);
    }
}
