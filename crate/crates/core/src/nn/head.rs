use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{Matrix, Rng};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HeadBlock {
    /// `classes x features`
    pub weight: Matrix,
    /// `1 x classes`
    pub bias: Matrix,
    pub frozen: bool,
}

impl HeadBlock {
    pub fn classes(&self) -> usize {
        self.weight.rows()
    }
}

/// Class-incremental classifier: one block of output units per task.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct GrowingHead {
    features: usize,
    blocks: Vec<HeadBlock>,
}

/// Initial standard deviation of new head weights.
pub const HEAD_INIT_STD: f64 = 0.01;

impl GrowingHead {
    pub fn new(features: usize) -> Self {
        GrowingHead {
            features,
            blocks: Vec::new(),
        }
    }

    pub fn features(&self) -> usize {
        self.features
    }

    pub fn blocks(&self) -> &[HeadBlock] {
        &self.blocks
    }

    pub(crate) fn blocks_mut(&mut self) -> &mut [HeadBlock] {
        &mut self.blocks
    }

    pub fn num_classes(&self) -> usize {
        self.blocks.iter().map(HeadBlock::classes).sum()
    }

    /// Appends a trainable block for `classes` new output units.
    pub fn grow(&mut self, classes: usize, rng: &mut Rng) {
        self.blocks.push(HeadBlock {
            weight: rng.normal_matrix(classes, self.features, HEAD_INIT_STD),
            bias: Matrix::zeros(1, classes),
            frozen: false,
        });
    }

    pub fn push_block(&mut self, block: HeadBlock) -> Result<()> {
        if block.weight.cols() != self.features || block.bias.shape() != (1, block.classes()) {
            return Err(Error::Shape {
                op: "head block",
                lhs: (block.classes(), self.features),
                rhs: block.weight.shape(),
            });
        }
        self.blocks.push(block);
        Ok(())
    }

    pub(crate) fn freeze_all(&mut self) {
        for b in &mut self.blocks {
            b.frozen = true;
        }
    }

    /// `features (n x f) -> logits (n x classes)`.
    pub fn forward(&self, features: &Matrix) -> Result<Matrix> {
        if features.cols() != self.features {
            return Err(Error::Shape {
                op: "head forward",
                lhs: features.shape(),
                rhs: (self.num_classes(), self.features),
            });
        }
        let n = features.rows();
        let mut logits = Matrix::zeros(n, self.num_classes());
        let mut offset = 0;
        for block in &self.blocks {
            let z = features.matmul_t(&block.weight)?;
            for i in 0..n {
                for c in 0..block.classes() {
                    logits[(i, offset + c)] = z[(i, c)] + block.bias[(0, c)];
                }
            }
            offset += block.classes();
        }
        Ok(logits)
    }

    pub fn frozen_checksum(&self) -> u64 {
        self.blocks.iter().filter(|b| b.frozen).fold(0u64, |h, b| {
            h.rotate_left(5) ^ b.weight.checksum() ^ b.bias.checksum().rotate_left(11)
        })
    }
}
