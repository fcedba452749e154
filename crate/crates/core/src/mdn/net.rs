use rand::Rng;
use serde::{Deserialize, Serialize};

use super::mog::MoGPosterior;
use crate::error::{Error, Result};
use crate::special::{log_sum_exp, softmax, LN_SQRT_2PI};

/// Probability floor applied before taking logs in the losses.
pub const PROB_FLOOR: f64 = 1e-12;

/// Output head on top of the shared tanh trunk.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Head {
    /// Softmax over model indices.
    Classifier { n_models: usize },
    /// Mixture of `components` Gaussians over `dim` parameters.
    Mog { components: usize, dim: usize },
}

impl Head {
    pub fn output_len(&self) -> usize {
        match *self {
            Head::Classifier { n_models } => n_models,
            Head::Mog { components: k, dim: d } => k * (1 + 2 * d + d * (d - 1) / 2),
        }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            Head::Classifier { n_models } if n_models < 2 => Err(Error::Config("classifier needs at least two models".into())),
            Head::Mog { components, dim } if components == 0 || dim == 0 => {
                Err(Error::Config("mixture head needs at least one component and dimension".into()))
            }
            _ => Ok(()),
        }
    }
}

/// Training targets. Classifier heads read only model labels and mixture
/// heads read only parameters.
#[derive(Clone, Copy, Debug)]
pub enum Targets<'a> {
    Labels(&'a [usize]),
    Params(&'a [Vec<f64>]),
}

impl Targets<'_> {
    pub fn len(&self) -> usize {
        match self {
            Targets::Labels(l) => l.len(),
            Targets::Params(p) => p.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Feedforward network with tanh hidden units and a linear readout feeding
/// the head. All weights live in one flat vector: for every layer the
/// row-major weight matrix followed by the bias.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeedforwardNet {
    /// Input size followed by the hidden layer sizes.
    pub layers: Vec<usize>,
    pub head: Head,
    pub params: Vec<f64>,
}

pub(crate) struct Cache {
    acts: Vec<Vec<f64>>,
    out: Vec<f64>,
}

impl FeedforwardNet {
    pub fn zeros(layers: &[usize], head: Head) -> Result<Self> {
        if layers.len() < 2 || layers.iter().any(|&n| n == 0) {
            return Err(Error::Config("network needs an input and at least one non-empty hidden layer".into()));
        }
        head.validate()?;
        let mut n = 0;
        for w in layers.windows(2) {
            n += w[1] * (w[0] + 1);
        }
        n += head.output_len() * (layers[layers.len() - 1] + 1);
        Ok(FeedforwardNet { layers: layers.to_vec(), head, params: vec![0.0; n] })
    }

    /// Weights uniform in `±1/√fan_in`, biases zero. Mixing-logit and
    /// precision readouts are shrunk so the initial mixture is close to a
    /// standard normal.
    pub fn init<R: Rng + ?Sized>(layers: &[usize], head: Head, rng: &mut R) -> Result<Self> {
        let mut net = Self::zeros(layers, head)?;
        let mut off = 0;
        let mut fill = |params: &mut [f64], off: &mut usize, n_in: usize, n_out: usize, row_scale: &dyn Fn(usize) -> f64| {
            let bound = 1.0 / (n_in as f64).sqrt();
            for r in 0..n_out {
                let s = row_scale(r);
                for c in 0..n_in {
                    params[*off + r * n_in + c] = s * rng.random_range(-bound..bound);
                }
            }
            *off += n_out * (n_in + 1);
        };
        for l in 0..layers.len() - 1 {
            fill(&mut net.params, &mut off, layers[l], layers[l + 1], &|_| 1.0);
        }
        let last = layers[layers.len() - 1];
        let out = head.output_len();
        let scale: Box<dyn Fn(usize) -> f64> = match head {
            Head::Classifier { .. } => Box::new(|_| 1.0),
            Head::Mog { components: k, dim: d } => Box::new(move |r| if r >= k && r < k + k * d { 1.0 } else { 0.01 }),
        };
        fill(&mut net.params, &mut off, last, out, &*scale);
        Ok(net)
    }

    pub fn n_inputs(&self) -> usize {
        self.layers[0]
    }

    pub fn n_params(&self) -> usize {
        self.params.len()
    }

    pub(crate) fn forward_cache(&self, s: &[f64]) -> Cache {
        let mut acts = Vec::with_capacity(self.layers.len());
        acts.push(s.to_vec());
        let mut off = 0;
        for l in 0..self.layers.len() - 1 {
            let (n_in, n_out) = (self.layers[l], self.layers[l + 1]);
            let a = dense(&self.params[off..], &acts[l], n_in, n_out).into_iter().map(f64::tanh).collect();
            acts.push(a);
            off += n_out * (n_in + 1);
        }
        let last = self.layers[self.layers.len() - 1];
        let out = dense(&self.params[off..], &acts[acts.len() - 1], last, self.head.output_len());
        Cache { acts, out }
    }

    /// Raw readout of the final linear layer.
    pub fn readout(&self, s: &[f64]) -> Result<Vec<f64>> {
        if s.len() != self.n_inputs() {
            return Err(Error::Input(format!("summary has length {}, network expects {}", s.len(), self.n_inputs())));
        }
        Ok(self.forward_cache(s).out)
    }

    /// Accumulates `∂L/∂params` given `∂L/∂readout`.
    pub(crate) fn backward(&self, cache: &Cache, dout: &[f64], grad: &mut [f64]) {
        let nl = self.layers.len();
        let mut offsets = Vec::with_capacity(nl);
        let mut off = 0;
        for l in 0..nl - 1 {
            offsets.push(off);
            off += self.layers[l + 1] * (self.layers[l] + 1);
        }
        offsets.push(off);
        let mut delta = dense_backward(&self.params, grad, offsets[nl - 1], &cache.acts[nl - 1], dout);
        for l in (0..nl - 1).rev() {
            let a = &cache.acts[l + 1];
            let dz: Vec<f64> = delta.iter().zip(a).map(|(d, a)| d * (1.0 - a * a)).collect();
            delta = dense_backward(&self.params, grad, offsets[l], &cache.acts[l], &dz);
        }
    }

    pub fn forward_classifier(&self, s: &[f64]) -> Result<Vec<f64>> {
        if !matches!(self.head, Head::Classifier { .. }) {
            return Err(Error::Input("network does not have a classifier head".into()));
        }
        let out = self.readout(s)?;
        if out.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteOutput);
        }
        Ok(softmax(&out))
    }

    pub fn forward_mog(&self, s: &[f64]) -> Result<MoGPosterior> {
        let Head::Mog { components, dim } = self.head else {
            return Err(Error::Input("network does not have a mixture head".into()));
        };
        let q = decode_mog(&self.readout(s)?, components, dim);
        let finite = q.weights.iter().chain(q.means.iter().flatten()).chain(q.chol.iter().flatten()).all(|v| v.is_finite());
        if !finite || q.chol.iter().any(|u| (0..dim).any(|i| u[i * dim + i] <= 0.0)) {
            return Err(Error::NonFiniteOutput);
        }
        Ok(q)
    }

    /// Loss of one sample and its gradient with respect to the readout.
    pub(crate) fn sample_loss(&self, out: &[f64], targets: Targets<'_>, i: usize) -> (f64, Vec<f64>) {
        match (self.head, targets) {
            (Head::Classifier { .. }, Targets::Labels(y)) => {
                let p = softmax(out);
                let loss = -p[y[i]].max(PROB_FLOOR).ln();
                let mut d = p;
                d[y[i]] -= 1.0;
                (loss, d)
            }
            (Head::Mog { components, dim }, Targets::Params(th)) => mog_loss(out, components, dim, &th[i]),
            _ => panic!("targets do not match the network head"),
        }
    }

    fn check_targets(&self, inputs: &[Vec<f64>], targets: Targets<'_>) -> Result<()> {
        if inputs.len() != targets.len() {
            return Err(Error::Input("inputs and targets differ in length".into()));
        }
        if inputs.iter().any(|s| s.len() != self.n_inputs()) {
            return Err(Error::Input(format!("every input must have length {}", self.n_inputs())));
        }
        match (self.head, targets) {
            (Head::Classifier { n_models }, Targets::Labels(y)) => {
                if y.iter().any(|&m| m >= n_models) {
                    return Err(Error::Input("label out of range".into()));
                }
            }
            (Head::Mog { dim, .. }, Targets::Params(th)) => {
                if th.iter().any(|t| t.len() != dim) {
                    return Err(Error::Input(format!("every parameter vector must have length {dim}")));
                }
            }
            _ => return Err(Error::Input("targets do not match the network head".into())),
        }
        Ok(())
    }

    /// Mean loss over a dataset.
    pub fn loss(&self, inputs: &[Vec<f64>], targets: Targets<'_>) -> Result<f64> {
        self.check_targets(inputs, targets)?;
        let total: f64 = inputs
            .iter()
            .enumerate()
            .map(|(i, s)| self.sample_loss(&self.forward_cache(s).out, targets, i).0)
            .sum();
        Ok(total / inputs.len() as f64)
    }

    /// Mean loss and its gradient with respect to all parameters.
    pub fn loss_and_grad(&self, inputs: &[Vec<f64>], targets: Targets<'_>) -> Result<(f64, Vec<f64>)> {
        self.check_targets(inputs, targets)?;
        let idx: Vec<usize> = (0..inputs.len()).collect();
        let (loss, mut grad) = self.accumulate(inputs, targets, &idx);
        let n = inputs.len() as f64;
        grad.iter_mut().for_each(|g| *g /= n);
        Ok((loss / n, grad))
    }

    /// Summed loss and gradient over the given sample indices.
    pub(crate) fn accumulate(&self, inputs: &[Vec<f64>], targets: Targets<'_>, idx: &[usize]) -> (f64, Vec<f64>) {
        let mut grad = vec![0.0; self.params.len()];
        let mut loss = 0.0;
        for &i in idx {
            let cache = self.forward_cache(&inputs[i]);
            let (l, dout) = self.sample_loss(&cache.out, targets, i);
            loss += l;
            self.backward(&cache, &dout, &mut grad);
        }
        (loss, grad)
    }
}

/// `W a + b` with `W` (`n_out × n_in`, row-major) and `b` stored at the start
/// of `p`.
fn dense(p: &[f64], a: &[f64], n_in: usize, n_out: usize) -> Vec<f64> {
    let bias = &p[n_out * n_in..n_out * (n_in + 1)];
    (0..n_out)
        .map(|r| {
            let w = &p[r * n_in..(r + 1) * n_in];
            bias[r] + w.iter().zip(a).map(|(w, a)| w * a).sum::<f64>()
        })
        .collect()
}

/// Adds the weight and bias gradients of one dense layer and returns the
/// gradient with respect to its input.
fn dense_backward(params: &[f64], grad: &mut [f64], off: usize, a_in: &[f64], dz: &[f64]) -> Vec<f64> {
    let n_in = a_in.len();
    let n_out = dz.len();
    let mut da = vec![0.0; n_in];
    for r in 0..n_out {
        let d = dz[r];
        let row = off + r * n_in;
        for c in 0..n_in {
            grad[row + c] += d * a_in[c];
            da[c] += d * params[row + c];
        }
        grad[off + n_out * n_in + r] += d;
    }
    da
}

/// Splits a mixture readout into weights, means and Cholesky factors. Layout:
/// `K` logits, `K·d` means, `K·d` log-diagonals, `K·d(d−1)/2` upper entries.
pub(crate) fn decode_mog(out: &[f64], k: usize, d: usize) -> MoGPosterior {
    let n_tri = d * (d - 1) / 2;
    let weights = softmax(&out[..k]);
    let means = (0..k).map(|c| out[k + c * d..k + (c + 1) * d].to_vec()).collect();
    let diag0 = k + k * d;
    let tri0 = diag0 + k * d;
    let chol = (0..k)
        .map(|c| {
            let mut u = vec![0.0; d * d];
            let mut t = tri0 + c * n_tri;
            for i in 0..d {
                u[i * d + i] = out[diag0 + c * d + i].exp();
                for j in (i + 1)..d {
                    u[i * d + j] = out[t];
                    t += 1;
                }
            }
            u
        })
        .collect();
    MoGPosterior { weights, means, chol }
}

/// `−ln q(θ)` and its gradient with respect to the mixture readout.
fn mog_loss(out: &[f64], k: usize, d: usize, theta: &[f64]) -> (f64, Vec<f64>) {
    let q = decode_mog(out, k, d);
    let n_tri = d * (d - 1) / 2;
    let mut log_terms = Vec::with_capacity(k);
    let mut zs = Vec::with_capacity(k);
    let mut deltas = Vec::with_capacity(k);
    for c in 0..k {
        let u = &q.chol[c];
        let delta: Vec<f64> = theta.iter().zip(&q.means[c]).map(|(t, m)| t - m).collect();
        let z: Vec<f64> = (0..d).map(|i| (i..d).map(|j| u[i * d + j] * delta[j]).sum()).collect();
        let log_det: f64 = (0..d).map(|i| out[k + k * d + c * d + i]).sum();
        let quad: f64 = z.iter().map(|v| v * v).sum();
        log_terms.push(q.weights[c].max(f64::MIN_POSITIVE).ln() + log_det - 0.5 * quad - d as f64 * LN_SQRT_2PI);
        zs.push(z);
        deltas.push(delta);
    }
    let lse = log_sum_exp(&log_terms);
    let mut g = vec![0.0; out.len()];
    let diag0 = k + k * d;
    let tri0 = diag0 + k * d;
    for c in 0..k {
        let gamma = (log_terms[c] - lse).exp();
        g[c] = q.weights[c] - gamma;
        let (u, z, delta) = (&q.chol[c], &zs[c], &deltas[c]);
        for j in 0..d {
            let utz: f64 = (0..=j).map(|i| u[i * d + j] * z[i]).sum();
            g[k + c * d + j] = -gamma * utz;
        }
        let mut t = tri0 + c * n_tri;
        for i in 0..d {
            g[diag0 + c * d + i] = -gamma * (1.0 - z[i] * delta[i] * u[i * d + i]);
            for j in (i + 1)..d {
                g[t] = gamma * z[i] * delta[j];
                t += 1;
            }
        }
    }
    (-lse, g)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::par::stream;

    #[test]
    fn zero_classifier_is_uniform() {
        let net = FeedforwardNet::zeros(&[2, 10], Head::Classifier { n_models: 2 }).unwrap();
        assert_eq!(net.forward_classifier(&[0.3, -1.0]).unwrap(), vec![0.5, 0.5]);
        assert!(matches!(net.forward_classifier(&[0.3]), Err(Error::Input(_))));
    }

    #[test]
    fn bias_shift_leaves_probabilities() {
        let mut rng = stream(1, 0);
        let mut net = FeedforwardNet::init(&[3, 5], Head::Classifier { n_models: 3 }, &mut rng).unwrap();
        let s = [0.2, -0.4, 1.1];
        let p = net.forward_classifier(&s).unwrap();
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-15 && p.iter().all(|&v| v > 0.0 && v < 1.0));
        let n = net.params.len();
        net.params[n - 3..].iter_mut().for_each(|b| *b += 4.2);
        let p2 = net.forward_classifier(&s).unwrap();
        for (a, b) in p.iter().zip(&p2) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn zero_mixture_is_standard_normal() {
        let net = FeedforwardNet::zeros(&[2, 4], Head::Mog { components: 1, dim: 1 }).unwrap();
        assert_eq!(net.forward_mog(&[1.0, 2.0]).unwrap(), MoGPosterior::standard_normal(1));
    }

    #[test]
    fn classifier_loss_values() {
        let net = FeedforwardNet::zeros(&[1, 2], Head::Classifier { n_models: 2 }).unwrap();
        let l = net.loss(&[vec![0.0], vec![1.0]], Targets::Labels(&[0, 1])).unwrap();
        assert!((l - std::f64::consts::LN_2).abs() < 1e-15);
        let (l, _) = net.sample_loss(&[800.0, 0.0], Targets::Labels(&[0]), 0);
        assert_eq!(l, 0.0);
        let (l, _) = net.sample_loss(&[0.0, 800.0], Targets::Labels(&[0]), 0);
        assert!((l + PROB_FLOOR.ln()).abs() < 1e-12);
    }

    #[test]
    fn mixture_loss_is_negative_log_density() {
        let mut rng = stream(4, 0);
        let net = FeedforwardNet::init(&[2, 6, 5], Head::Mog { components: 3, dim: 2 }, &mut rng).unwrap();
        let s = vec![0.5, -0.1];
        let th = vec![vec![0.3, 1.2]];
        let q = net.forward_mog(&s).unwrap();
        let l = net.loss(&[s], Targets::Params(&th)).unwrap();
        assert!((l + q.ln_pdf(&th[0])).abs() < 1e-12);
    }

    #[test]
    fn mismatched_targets_rejected() {
        let net = FeedforwardNet::zeros(&[1, 2], Head::Classifier { n_models: 2 }).unwrap();
        assert!(net.loss(&[vec![0.0]], Targets::Labels(&[2])).is_err());
        assert!(net.loss(&[vec![0.0]], Targets::Params(&[vec![1.0]])).is_err());
        assert!(FeedforwardNet::zeros(&[1], Head::Classifier { n_models: 2 }).is_err());
    }
}
