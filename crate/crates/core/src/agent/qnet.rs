use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph_env::{ActionFeatures, FEATURE_LEN};
use crate::rng::Rng;

/// Layer widths of the action-scoring network.
pub const ARCH: [usize; 4] = [FEATURE_LEN, 64, 64, 1];

/// Fully connected ReLU network scoring one action's feature vector.
///
/// Parameters live in one flat buffer, layer by layer, each layer as a
/// row-major `out×in` weight block followed by `out` biases. Gradients use
/// the same type and layout.
#[derive(Debug, Clone, PartialEq)]
pub struct QNetParams {
    sizes: Vec<usize>,
    data: Vec<f64>,
}

fn param_len(sizes: &[usize]) -> usize {
    sizes.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
}

impl QNetParams {
    pub fn zeros(sizes: &[usize]) -> Self {
        Self { sizes: sizes.to_vec(), data: vec![0.0; param_len(sizes)] }
    }

    /// Zero biases, weights uniform in `±sqrt(6 / (fan_in + fan_out))`.
    pub fn glorot(sizes: &[usize], rng: &mut Rng) -> Self {
        let mut p = Self::zeros(sizes);
        let mut offset = 0;
        for w in sizes.windows(2) {
            let (fan_in, fan_out) = (w[0], w[1]);
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            for v in &mut p.data[offset..offset + fan_in * fan_out] {
                *v = rng.uniform(-limit, limit);
            }
            offset += fan_in * fan_out + fan_out;
        }
        p
    }

    pub fn from_layers(layers: Vec<(usize, usize, Vec<f64>, Vec<f64>)>) -> Result<Self> {
        let mut sizes = Vec::new();
        let mut data = Vec::new();
        for (i, (rows, cols, w, b)) in layers.into_iter().enumerate() {
            if w.len() != rows * cols || b.len() != rows {
                return Err(Error::ShapeMismatch(format!("layer {i}: {rows}x{cols} with {} weights, {} biases", w.len(), b.len())));
            }
            if sizes.is_empty() {
                sizes.push(cols);
            } else if *sizes.last().unwrap() != cols {
                return Err(Error::ShapeMismatch(format!("layer {i} input {cols} does not chain")));
            }
            sizes.push(rows);
            data.extend(w);
            data.extend(b);
        }
        if sizes.len() < 2 {
            return Err(Error::ShapeMismatch("network needs at least one layer".into()));
        }
        Ok(Self { sizes, data })
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn same_shape(&self, other: &QNetParams) -> bool {
        self.sizes == other.sizes
    }

    /// `(rows, cols, weights, biases)` for each layer.
    pub fn layers(&self) -> Vec<(usize, usize, &[f64], &[f64])> {
        let mut out = Vec::new();
        let mut offset = 0;
        for w in self.sizes.windows(2) {
            let (cols, rows) = (w[0], w[1]);
            let wb = &self.data[offset..offset + rows * cols];
            let bb = &self.data[offset + rows * cols..offset + rows * cols + rows];
            out.push((rows, cols, wb, bb));
            offset += rows * cols + rows;
        }
        out
    }

    pub fn forward(&self, phi: &[f64]) -> Result<f64> {
        if phi.len() != self.sizes[0] {
            return Err(Error::ShapeMismatch(format!("input length {} != {}", phi.len(), self.sizes[0])));
        }
        Ok(self.activations(phi).last().unwrap()[0])
    }

    pub(crate) fn q(&self, phi: &ActionFeatures) -> f64 {
        self.activations(phi).last().unwrap()[0]
    }

    // Post-activation outputs of every layer, input first.
    fn activations(&self, input: &[f64]) -> Vec<Vec<f64>> {
        let layers = self.layers();
        let last = layers.len() - 1;
        let mut acts = Vec::with_capacity(layers.len() + 1);
        acts.push(input.to_vec());
        for (l, (rows, cols, w, b)) in layers.into_iter().enumerate() {
            let x = acts.last().unwrap();
            let y: Vec<f64> = (0..rows)
                .map(|r| {
                    let z = b[r] + w[r * cols..(r + 1) * cols].iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
                    if l < last {
                        z.max(0.0)
                    } else {
                        z
                    }
                })
                .collect();
            acts.push(y);
        }
        acts
    }

    /// Adds `dq * ∂q/∂θ` at input `phi` into `grad`.
    fn accumulate_grad(&self, phi: &[f64], dq: f64, grad: &mut QNetParams) {
        let acts = self.activations(phi);
        let layers = self.layers();
        let mut offsets: Vec<usize> = Vec::with_capacity(layers.len());
        let mut off = 0;
        for (rows, cols, _, _) in &layers {
            offsets.push(off);
            off += rows * cols + rows;
        }
        let mut delta = vec![dq];
        for l in (0..layers.len()).rev() {
            let (rows, cols, w, _) = layers[l];
            let x = &acts[l];
            let o = offsets[l];
            for (r, &d) in delta.iter().enumerate() {
                if d == 0.0 {
                    continue;
                }
                for (g, xi) in grad.data[o + r * cols..o + (r + 1) * cols].iter_mut().zip(x) {
                    *g += d * xi;
                }
                grad.data[o + rows * cols + r] += d;
            }
            if l > 0 {
                delta = (0..cols)
                    .map(|c| {
                        if x[c] > 0.0 {
                            (0..rows).map(|r| w[r * cols + c] * delta[r]).sum()
                        } else {
                            0.0
                        }
                    })
                    .collect();
            }
        }
    }
}

/// Mean squared error between `targets` and the network's scores of `phis`,
/// with its gradient.
pub fn regression_loss_and_grad(p: &QNetParams, phis: &[&ActionFeatures], targets: &[f64]) -> Result<(f64, QNetParams)> {
    if phis.is_empty() || phis.len() != targets.len() {
        return Err(Error::InvalidArgument("batch must be nonempty with one target per input".into()));
    }
    let n = phis.len() as f64;
    let mut grad = QNetParams::zeros(&p.sizes);
    let mut loss = 0.0;
    for (phi, &y) in phis.iter().zip(targets) {
        let err = y - p.q(phi);
        loss += err * err;
        p.accumulate_grad(phi.as_slice(), -2.0 * err / n, &mut grad);
    }
    Ok((loss / n, grad))
}

/// One stored experience: the features of the action taken, its reward, and
/// the features of every legal action in the successor state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub phi: ActionFeatures,
    pub reward: f64,
    pub next_phis: Vec<ActionFeatures>,
    pub terminal: bool,
}

impl Transition {
    /// Bootstrapped target `r + γ max_a' Q_target(s', a')`, or `r` if terminal.
    pub fn td_target(&self, target: &QNetParams, gamma: f64) -> f64 {
        if self.terminal || self.next_phis.is_empty() {
            self.reward
        } else {
            self.reward + gamma * max_q(target, &self.next_phis)
        }
    }
}

pub(crate) fn max_q(p: &QNetParams, phis: &[ActionFeatures]) -> f64 {
    phis.iter().map(|phi| p.q(phi)).fold(f64::NEG_INFINITY, f64::max)
}

/// Temporal-difference loss over `batch`; the target network's bootstrap
/// term is held constant so the gradient flows only through `online`.
pub fn td_loss_and_grad(
    online: &QNetParams,
    target: &QNetParams,
    batch: &[&Transition],
    gamma: f64,
) -> Result<(f64, QNetParams)> {
    if batch.is_empty() {
        return Err(Error::InvalidArgument("empty batch".into()));
    }
    let ys: Vec<f64> = batch.iter().map(|t| t.td_target(target, gamma)).collect();
    let phis: Vec<&ActionFeatures> = batch.iter().map(|t| &t.phi).collect();
    regression_loss_and_grad(online, &phis, &ys)
}

pub fn sync_target(online: &QNetParams) -> QNetParams {
    online.clone()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn random_phi(rng: &mut Rng) -> ActionFeatures {
        let mut phi = [0.0; FEATURE_LEN];
        phi.iter_mut().for_each(|v| *v = rng.uniform(-1.0, 1.0));
        phi
    }

    fn random_params(rng: &mut Rng) -> QNetParams {
        let mut p = QNetParams::glorot(&ARCH, rng);
        // nonzero biases so the oracle also exercises them
        let n = p.len();
        for (i, v) in p.as_mut_slice().iter_mut().enumerate() {
            if i % 7 == 0 || i + 1 == n {
                *v += rng.uniform(-0.1, 0.1);
            }
        }
        p
    }

    // Straight matrix-vector forward pass from the layer view.
    fn oracle_forward(p: &QNetParams, phi: &[f64]) -> f64 {
        let layers = p.layers();
        let mut x = phi.to_vec();
        for (l, (rows, cols, w, b)) in layers.iter().enumerate() {
            let mut y = vec![0.0; *rows];
            for r in 0..*rows {
                let mut z = b[r];
                for c in 0..*cols {
                    z += w[r * cols + c] * x[c];
                }
                y[r] = if l + 1 < layers.len() && z < 0.0 { 0.0 } else { z };
            }
            x = y;
        }
        x[0]
    }

    #[test]
    fn parameter_count() {
        assert_eq!(QNetParams::zeros(&ARCH).len(), 5057);
    }

    #[test]
    fn zero_network_outputs_zero() {
        let p = QNetParams::zeros(&ARCH);
        assert_eq!(p.forward(&[0.3; FEATURE_LEN]).unwrap(), 0.0);
    }

    #[test]
    fn output_bias_only() {
        let mut p = QNetParams::zeros(&ARCH);
        let n = p.len();
        p.as_mut_slice()[n - 1] = 0.75;
        assert_eq!(p.forward(&[-2.0; FEATURE_LEN]).unwrap(), 0.75);
    }

    #[test]
    fn wrong_input_length() {
        assert!(QNetParams::zeros(&ARCH).forward(&[0.0; 5]).is_err());
    }

    #[test]
    fn forward_matches_oracle() {
        let mut rng = Rng::new(1);
        for _ in 0..20 {
            let p = random_params(&mut rng);
            let phi = random_phi(&mut rng);
            assert!((p.forward(&phi).unwrap() - oracle_forward(&p, &phi)).abs() < 1e-12);
        }
    }

    #[test]
    fn td_loss_worked_examples() {
        let mut online = QNetParams::zeros(&ARCH);
        let n = online.len();
        online.as_mut_slice()[n - 1] = 1.0;
        let target = online.clone();
        let t = Transition { phi: [0.0; FEATURE_LEN], reward: 0.2, next_phis: vec![[0.0; FEATURE_LEN]], terminal: false };
        let (loss, _) = td_loss_and_grad(&online, &target, &[&t], 0.95).unwrap();
        assert!((loss - 0.0225).abs() < 1e-12);

        online.as_mut_slice()[n - 1] = 0.3;
        let term = Transition { phi: [0.0; FEATURE_LEN], reward: 0.3, next_phis: vec![], terminal: true };
        let (loss, _) = td_loss_and_grad(&online, &target, &[&term], 0.95).unwrap();
        assert!(loss.abs() < 1e-15);
    }

    #[test]
    fn empty_batch_is_error() {
        let p = QNetParams::zeros(&ARCH);
        assert!(td_loss_and_grad(&p, &p, &[], 0.9).is_err());
    }

    #[test]
    fn sync_is_a_deep_copy() {
        let mut rng = Rng::new(2);
        let mut online = random_params(&mut rng);
        let target = sync_target(&online);
        let phi = random_phi(&mut rng);
        assert_eq!(target.forward(&phi).unwrap(), online.forward(&phi).unwrap());
        assert_eq!(sync_target(&online), sync_target(&online));
        online.as_mut_slice()[0] += 1.0;
        assert_ne!(target, online);
    }

    #[test]
    fn layer_round_trip() {
        let mut rng = Rng::new(4);
        let p = random_params(&mut rng);
        let layers = p.layers().into_iter().map(|(r, c, w, b)| (r, c, w.to_vec(), b.to_vec())).collect();
        assert_eq!(QNetParams::from_layers(layers).unwrap(), p);
    }
}
