use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::Matrix;

/// Low-rank pair `B (d x r)`, `A (r x k)`; contributes `B A` to the weight.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LoraPair {
    pub b: Matrix,
    pub a: Matrix,
}

impl LoraPair {
    pub fn new(b: Matrix, a: Matrix) -> Result<Self> {
        if b.cols() != a.rows() {
            return Err(Error::Shape {
                op: "lora pair",
                lhs: b.shape(),
                rhs: a.shape(),
            });
        }
        Ok(LoraPair { b, a })
    }

    pub fn rank(&self) -> usize {
        self.a.rows()
    }

    pub fn delta(&self) -> Matrix {
        self.b.matmul(&self.a).expect("pair shapes checked at construction")
    }
}

/// Linear map `y = x W^T + bias` whose weight is a frozen base plus low-rank adapters.
///
/// `W = w0 + sum(frozen B_i A_i) + live B_t A_t`. The frozen part is kept
/// merged so a forward pass costs one extra low-rank product.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AdapterLinear {
    w0: Matrix,
    bias: Option<Vec<f64>>,
    frozen: Vec<LoraPair>,
    merged: Matrix,
    live: Option<LoraPair>,
}

impl AdapterLinear {
    pub fn new(w0: Matrix, bias: Option<Vec<f64>>) -> Result<Self> {
        if let Some(b) = &bias {
            if b.len() != w0.rows() {
                return Err(Error::Shape {
                    op: "adapter bias",
                    lhs: w0.shape(),
                    rhs: (b.len(), 1),
                });
            }
        }
        Ok(AdapterLinear {
            merged: w0.clone(),
            w0,
            bias,
            frozen: Vec::new(),
            live: None,
        })
    }

    /// Output dimension `d`.
    pub fn out_dim(&self) -> usize {
        self.w0.rows()
    }

    /// Input dimension `k` (also the size of the basis pool).
    pub fn in_dim(&self) -> usize {
        self.w0.cols()
    }

    pub fn w0(&self) -> &Matrix {
        &self.w0
    }

    pub fn bias(&self) -> Option<&[f64]> {
        self.bias.as_deref()
    }

    pub fn frozen(&self) -> &[LoraPair] {
        &self.frozen
    }

    pub fn live(&self) -> Option<&LoraPair> {
        self.live.as_ref()
    }

    pub(crate) fn live_mut(&mut self) -> Option<&mut LoraPair> {
        self.live.as_mut()
    }

    /// Replaces the base weight and bias. Only legal before any adapter exists.
    pub(crate) fn set_base(&mut self, w0: Matrix, bias: Option<Vec<f64>>) -> Result<()> {
        if !self.frozen.is_empty() || self.live.is_some() {
            return Err(Error::InvalidState(
                "cannot replace base weight once adapters are attached".into(),
            ));
        }
        if w0.shape() != self.w0.shape() {
            return Err(Error::Shape {
                op: "set_base",
                lhs: self.w0.shape(),
                rhs: w0.shape(),
            });
        }
        self.merged = w0.clone();
        self.w0 = w0;
        self.bias = bias;
        Ok(())
    }

    pub(crate) fn attach(&mut self, pair: LoraPair) -> Result<()> {
        if self.live.is_some() {
            return Err(Error::InvalidState("live adapter already attached".into()));
        }
        if pair.b.rows() != self.out_dim() || pair.a.cols() != self.in_dim() {
            return Err(Error::Shape {
                op: "attach adapter",
                lhs: self.w0.shape(),
                rhs: (pair.b.rows(), pair.a.cols()),
            });
        }
        self.live = Some(pair);
        Ok(())
    }

    /// Moves the live adapter into the frozen list and merges it.
    pub(crate) fn freeze_live(&mut self) -> Result<()> {
        let pair = self
            .live
            .take()
            .ok_or_else(|| Error::InvalidState("no live adapter to freeze".into()))?;
        self.merged.add_assign(&pair.delta())?;
        self.frozen.push(pair);
        Ok(())
    }

    /// `w0 + sum(frozen)`, i.e. `W_{t-1}`.
    pub fn frozen_weight(&self) -> &Matrix {
        &self.merged
    }

    /// Full effective weight `W_t`.
    pub fn effective_weight(&self) -> Matrix {
        match &self.live {
            Some(p) => self.merged.add(&p.delta()).expect("shapes checked on attach"),
            None => self.merged.clone(),
        }
    }

    /// Hash over everything that must not change while a later task trains.
    pub fn frozen_checksum(&self) -> u64 {
        let mut h = self.w0.checksum();
        for p in &self.frozen {
            h = h.rotate_left(7) ^ p.b.checksum() ^ p.a.checksum().rotate_left(3);
        }
        if let Some(b) = &self.bias {
            for v in b {
                h = h.rotate_left(1) ^ v.to_bits();
            }
        }
        h
    }
}
