use serde::{Deserialize, Serialize};

use super::adam::{adam_step, AdamConfig, AdamState};
use super::head::GrowingHead;
use super::layer::{AdapterLinear, LoraPair};
use super::loss::cross_entropy;
use crate::error::{Error, Result};
use crate::tensor::{Matrix, Rng};

/// Stack of adapter-enabled linear layers with ReLU between them, then a growing head.
///
/// `input -> L0 -> ReLU -> L1 -> ... -> L_last -> head`. There is no
/// nonlinearity between the last layer and the head.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Mlp {
    layers: Vec<AdapterLinear>,
    head: GrowingHead,
    #[serde(skip)]
    generation: u64,
}

/// Activations recorded by [`Mlp::forward`] for the backward pass.
#[derive(Clone, Debug)]
pub struct ForwardCache {
    generation: u64,
    inputs: Vec<Matrix>,
    pre: Vec<Matrix>,
    weights: Vec<Matrix>,
    features: Matrix,
}

impl ForwardCache {
    pub fn batch_size(&self) -> usize {
        self.features.rows()
    }
}

/// Gradients of a scalar loss.
#[derive(Clone, Debug)]
pub struct Grads {
    /// Per layer, w.r.t. the full effective weight `W_t` (`d x k`).
    pub weights: Vec<Matrix>,
    /// Per layer, w.r.t. the (frozen) bias, `1 x d`.
    pub biases: Vec<Matrix>,
    /// Per head block: (weight, bias).
    pub head: Vec<(Matrix, Matrix)>,
}

impl Mlp {
    /// `dims = [input, hidden..., features]`; base weights are He-normal, biases zero.
    pub fn new(dims: &[usize], rng: &mut Rng) -> Result<Self> {
        if dims.len() < 2 || dims.contains(&0) {
            return Err(Error::config(
                "model",
                format!("need at least input and feature dims, all positive: {dims:?}"),
            ));
        }
        let layers = dims
            .windows(2)
            .map(|w| {
                let (k, d) = (w[0], w[1]);
                let std = (2.0 / k as f64).sqrt();
                AdapterLinear::new(rng.normal_matrix(d, k, std), Some(vec![0.0; d]))
            })
            .collect::<Result<Vec<_>>>()?;
        let features = *dims.last().unwrap();
        Ok(Mlp {
            layers,
            head: GrowingHead::new(features),
            generation: 0,
        })
    }

    pub fn from_parts(layers: Vec<AdapterLinear>, head: GrowingHead) -> Result<Self> {
        for w in layers.windows(2) {
            if w[0].out_dim() != w[1].in_dim() {
                return Err(Error::Shape {
                    op: "layer chain",
                    lhs: w[0].w0().shape(),
                    rhs: w[1].w0().shape(),
                });
            }
        }
        if let Some(last) = layers.last() {
            if last.out_dim() != head.features() {
                return Err(Error::Shape {
                    op: "head chain",
                    lhs: last.w0().shape(),
                    rhs: (head.num_classes(), head.features()),
                });
            }
        }
        Ok(Mlp {
            layers,
            head,
            generation: 0,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].in_dim()
    }

    pub fn layers(&self) -> &[AdapterLinear] {
        &self.layers
    }

    pub fn head(&self) -> &GrowingHead {
        &self.head
    }

    pub fn generation(&self) -> u64 {
        self.generation
    }

    pub fn num_classes(&self) -> usize {
        self.head.num_classes()
    }

    pub(crate) fn layer_mut(&mut self, i: usize) -> &mut AdapterLinear {
        self.generation += 1;
        &mut self.layers[i]
    }

    pub(crate) fn head_mut(&mut self) -> &mut GrowingHead {
        self.generation += 1;
        &mut self.head
    }

    pub fn attach_adapter(&mut self, layer: usize, pair: LoraPair) -> Result<()> {
        self.layer_mut(layer).attach(pair)
    }

    /// Freezes every live adapter and every head block.
    pub fn freeze_task(&mut self) -> Result<()> {
        self.generation += 1;
        for l in &mut self.layers {
            if l.live().is_some() {
                l.freeze_live()?;
            }
        }
        self.head.freeze_all();
        Ok(())
    }

    pub fn grow_head(&mut self, classes: usize, rng: &mut Rng) {
        self.head_mut().grow(classes, rng);
    }

    /// Checksum of all state that later tasks must leave untouched.
    pub fn frozen_checksum(&self) -> u64 {
        self.layers.iter().fold(self.head.frozen_checksum(), |h, l| {
            h.rotate_left(13) ^ l.frozen_checksum()
        })
    }

    /// Forward pass. `deltas`, when given, adds one extra `d x k` term per
    /// layer to the effective weight (used for perturbed evaluations).
    pub fn forward(&self, x: &Matrix, deltas: Option<&[Matrix]>) -> Result<(Matrix, ForwardCache)> {
        if x.cols() != self.input_dim() {
            return Err(Error::Shape {
                op: "forward input",
                lhs: x.shape(),
                rhs: self.layers[0].w0().shape(),
            });
        }
        if let Some(d) = deltas {
            if d.len() != self.layers.len() {
                return Err(Error::InvalidState(format!(
                    "{} weight deltas for {} layers",
                    d.len(),
                    self.layers.len()
                )));
            }
        }
        let last = self.layers.len() - 1;
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut pre = Vec::with_capacity(self.layers.len());
        let mut weights = Vec::with_capacity(self.layers.len());
        let mut h = x.clone();
        for (i, layer) in self.layers.iter().enumerate() {
            let mut w = layer.effective_weight();
            if let Some(d) = deltas {
                w.add_assign(&d[i])?;
            }
            let mut z = h.matmul_t(&w)?;
            if let Some(b) = layer.bias() {
                for r in 0..z.rows() {
                    for (v, bv) in z.row_mut(r).iter_mut().zip(b) {
                        *v += bv;
                    }
                }
            }
            inputs.push(h);
            h = if i < last { z.map(|v| v.max(0.0)) } else { z.clone() };
            pre.push(z);
            weights.push(w);
        }
        let logits = self.head.forward(&h)?;
        Ok((
            logits,
            ForwardCache {
                generation: self.generation,
                inputs,
                pre,
                weights,
                features: h,
            },
        ))
    }

    /// Backpropagates `dlogits` through a cache produced by [`Mlp::forward`]
    /// on the current model state.
    pub fn backward(&self, cache: &ForwardCache, dlogits: &Matrix) -> Result<Grads> {
        if cache.generation != self.generation {
            return Err(Error::StaleCache {
                cache: cache.generation,
                model: self.generation,
            });
        }
        if dlogits.shape() != (cache.batch_size(), self.num_classes()) {
            return Err(Error::Shape {
                op: "backward dlogits",
                lhs: dlogits.shape(),
                rhs: (cache.batch_size(), self.num_classes()),
            });
        }
        let mut head = Vec::with_capacity(self.head.blocks().len());
        let mut dh = Matrix::zeros(cache.batch_size(), self.head.features());
        let mut offset = 0;
        for block in self.head.blocks() {
            let c = block.classes();
            let idx: Vec<usize> = (offset..offset + c).collect();
            let dz = dlogits.gather_cols(&idx);
            let dw = dz.t_matmul(&cache.features)?;
            head.push((dw, column_sums(&dz)));
            dh.add_assign(&dz.matmul(&block.weight)?)?;
            offset += c;
        }

        let n = self.layers.len();
        let mut weights = vec![Matrix::zeros(0, 0); n];
        let mut biases = vec![Matrix::zeros(0, 0); n];
        let mut dy = dh;
        for i in (0..n).rev() {
            weights[i] = dy.t_matmul(&cache.inputs[i])?;
            biases[i] = column_sums(&dy);
            if i > 0 {
                let mut dx = dy.matmul(&cache.weights[i])?;
                let mask = &cache.pre[i - 1];
                for (g, z) in dx.data_mut().iter_mut().zip(mask.data()) {
                    if *z <= 0.0 {
                        *g = 0.0;
                    }
                }
                dy = dx;
            }
        }
        Ok(Grads { weights, biases, head })
    }

    pub fn predict(&self, x: &Matrix) -> Result<Vec<usize>> {
        let (logits, _) = self.forward(x, None)?;
        Ok((0..logits.rows())
            .map(|i| {
                let row = logits.row(i);
                let mut best = 0;
                for (c, v) in row.iter().enumerate() {
                    if *v > row[best] {
                        best = c;
                    }
                }
                best
            })
            .collect())
    }

    pub fn accuracy(&self, x: &Matrix, labels: &[usize]) -> Result<f64> {
        if labels.is_empty() {
            return Ok(0.0);
        }
        let pred = self.predict(x)?;
        let hits = pred.iter().zip(labels).filter(|(p, y)| p == y).count();
        Ok(hits as f64 / labels.len() as f64)
    }

    /// Trains the base weights, biases and a throwaway head on a base task,
    /// then discards the head. Must run before any adapter is attached.
    #[allow(clippy::too_many_arguments)]
    pub fn pretrain(
        &mut self,
        x: &Matrix,
        labels: &[usize],
        classes: usize,
        epochs: usize,
        batch_size: usize,
        adam: &AdamConfig,
        rng: &mut Rng,
    ) -> Result<Vec<f64>> {
        if self.head.num_classes() != 0 {
            return Err(Error::InvalidState("pretrain requires an empty head".into()));
        }
        self.head.grow(classes, rng);
        let mut wstate: Vec<AdamState> = self.layers.iter().map(|l| AdamState::for_param(l.w0())).collect();
        let mut bstate: Vec<AdamState> = self.layers.iter().map(|l| AdamState::new(1, l.out_dim())).collect();
        let mut hw = AdamState::for_param(&self.head.blocks()[0].weight);
        let mut hb = AdamState::for_param(&self.head.blocks()[0].bias);
        let mut order: Vec<usize> = (0..labels.len()).collect();
        let mut losses = Vec::with_capacity(epochs);
        for _ in 0..epochs {
            rng.shuffle(&mut order);
            let mut total = 0.0;
            let mut batches = 0;
            for chunk in order.chunks(batch_size.max(1)) {
                let xb = x.gather_rows(chunk);
                let yb: Vec<usize> = chunk.iter().map(|&i| labels[i]).collect();
                let (logits, cache) = self.forward(&xb, None)?;
                let (loss, dlogits) = cross_entropy(&logits, &yb)?;
                let grads = self.backward(&cache, &dlogits)?;
                total += loss;
                batches += 1;
                for (i, layer) in self.layers.iter_mut().enumerate() {
                    let mut w0 = layer.w0().clone();
                    adam_step(adam, &mut wstate[i], &mut w0, &grads.weights[i]);
                    let mut b = Matrix::from_vec(
                        1,
                        layer.out_dim(),
                        layer.bias().map_or_else(|| vec![0.0; layer.out_dim()], <[f64]>::to_vec),
                    )?;
                    adam_step(adam, &mut bstate[i], &mut b, &grads.biases[i]);
                    layer.set_base(w0, Some(b.into_vec()))?;
                }
                let block = &mut self.head.blocks_mut()[0];
                adam_step(adam, &mut hw, &mut block.weight, &grads.head[0].0);
                adam_step(adam, &mut hb, &mut block.bias, &grads.head[0].1);
                self.generation += 1;
            }
            losses.push(total / batches.max(1) as f64);
        }
        self.head = GrowingHead::new(self.head.features());
        self.generation += 1;
        Ok(losses)
    }
}

fn column_sums(m: &Matrix) -> Matrix {
    let mut out = Matrix::zeros(1, m.cols());
    for r in 0..m.rows() {
        for (o, v) in out.row_mut(0).iter_mut().zip(m.row(r)) {
            *o += v;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::head::HeadBlock;

    fn single_layer(w0: Matrix, head_w: Matrix) -> Mlp {
        let layer = AdapterLinear::new(w0, None).unwrap();
        let mut head = GrowingHead::new(head_w.cols());
        head.push_block(HeadBlock {
            bias: Matrix::zeros(1, head_w.rows()),
            weight: head_w,
            frozen: false,
        })
        .unwrap();
        Mlp::from_parts(vec![layer], head).unwrap()
    }

    #[test]
    fn zero_everything_gives_zero_logits() {
        let mut rng = Rng::new(0);
        let mut m = single_layer(Matrix::zeros(3, 4), rng.normal_matrix(2, 3, 1.0));
        m.attach_adapter(0, LoraPair::new(Matrix::zeros(3, 1), Matrix::zeros(1, 4)).unwrap())
            .unwrap();
        let (logits, _) = m.forward(&Matrix::zeros(5, 4), None).unwrap();
        assert_eq!(logits, Matrix::zeros(5, 2));
    }

    #[test]
    fn identity_weight_passes_input_to_head() {
        let mut rng = Rng::new(1);
        let head_w = rng.normal_matrix(3, 4, 1.0);
        let m = single_layer(Matrix::identity(4), head_w.clone());
        let x = rng.normal_matrix(6, 4, 1.0);
        let (logits, _) = m.forward(&x, None).unwrap();
        assert!(logits.max_abs_diff(&x.matmul_t(&head_w).unwrap()) < 1e-15);
    }

    #[test]
    fn zero_b_adapter_leaves_logits_unchanged() {
        let mut rng = Rng::new(2);
        let mut m = Mlp::new(&[5, 6, 4], &mut rng).unwrap();
        m.grow_head(3, &mut rng);
        let x = rng.normal_matrix(4, 5, 1.0);
        let (before, _) = m.forward(&x, None).unwrap();
        m.attach_adapter(
            0,
            LoraPair::new(Matrix::zeros(6, 2), rng.normal_matrix(2, 5, 1.0)).unwrap(),
        )
        .unwrap();
        let (after, _) = m.forward(&x, None).unwrap();
        assert_eq!(before, after);
    }

    #[test]
    fn stale_cache_rejected() {
        let mut rng = Rng::new(3);
        let mut m = Mlp::new(&[3, 3], &mut rng).unwrap();
        m.grow_head(2, &mut rng);
        let (logits, cache) = m.forward(&Matrix::zeros(1, 3), None).unwrap();
        m.grow_head(1, &mut rng);
        assert!(matches!(m.backward(&cache, &logits), Err(Error::StaleCache { .. })));
    }

    #[test]
    fn zero_dlogits_zero_grads() {
        let mut rng = Rng::new(4);
        let mut m = Mlp::new(&[4, 5, 3], &mut rng).unwrap();
        m.grow_head(2, &mut rng);
        let x = rng.normal_matrix(3, 4, 1.0);
        let (_, cache) = m.forward(&x, None).unwrap();
        let g = m.backward(&cache, &Matrix::zeros(3, 2)).unwrap();
        assert_eq!(g.weights[0].shape(), (5, 4));
        assert_eq!(g.weights[1].shape(), (3, 5));
        assert!(g.weights.iter().all(|w| w.max_abs() == 0.0));
    }

    #[test]
    fn forward_dimension_mismatch() {
        let mut rng = Rng::new(5);
        let m = Mlp::new(&[4, 2], &mut rng).unwrap();
        assert!(m.forward(&Matrix::zeros(1, 3), None).is_err());
    }

    #[test]
    fn pretrain_reduces_loss_and_clears_head() {
        let mut rng = Rng::new(6);
        let mut m = Mlp::new(&[4, 8, 4], &mut rng).unwrap();
        let x = Matrix::from_fn(
            40,
            4,
            |i, j| if (i % 2 == 0) == (j < 2) { 1.0 } else { -1.0 } + 0.1 * ((i * 7 + j) % 5) as f64,
        );
        let y: Vec<usize> = (0..40).map(|i| i % 2).collect();
        let losses = m
            .pretrain(&x, &y, 2, 20, 8, &AdamConfig::with_lr(1e-2), &mut rng)
            .unwrap();
        assert!(losses.last().unwrap() < &losses[0]);
        assert_eq!(m.num_classes(), 0);
    }
}
