use crate::linalg::{Block, Matrix};
use crate::model::{ObservedData, PartitionSpec};

/// `C = [A B]` split at the fixed rows and fixed columns:
///
/// ```text
/// C = [ C11  C12 ]   C11 = A11 (j x k)       C12 = [A12 B1] (j x (n-k+ℓ))
///     [ C21  C22 ]   C21 = A21 ((m-j) x k)   C22 = [A22 B2] ((m-j) x (n-k+ℓ))
/// ```
#[derive(Debug, Clone, PartialEq)]
pub struct CBlocks {
    pub c11: Block,
    pub c12: Block,
    pub c21: Block,
    pub c22: Block,
    pub partition: PartitionSpec,
}

/// Slices observed data into the four blocks of `C`.
pub fn build_blocks(data: &ObservedData) -> CBlocks {
    let p = data.partition;
    let c = data.c();
    let total = p.n + p.ell;
    CBlocks {
        c11: c.block(0..p.j, 0..p.k),
        c12: c.block(0..p.j, p.k..total),
        c21: c.block(p.j..p.m, 0..p.k),
        c22: c.block(p.j..p.m, p.k..total),
        partition: p,
    }
}

impl CBlocks {
    /// Reassembles `[A | B]`.
    pub fn assemble(&self) -> Matrix {
        let p = self.partition;
        let total = p.n + p.ell;
        Matrix::from_fn(p.m, total, |i, j| {
            let (blk, bi) = if i < p.j { (0, i) } else { (2, i - p.j) };
            let (blk, bj) = if j < p.k { (blk, j) } else { (blk + 1, j - p.k) };
            match blk {
                0 => self.c11.get(bi, bj),
                1 => self.c12.get(bi, bj),
                2 => self.c21.get(bi, bj),
                _ => self.c22.get(bi, bj),
            }
        })
    }

    /// Exact upper rows `[C11 C12]`, absent when `j = 0`.
    pub fn upper(&self) -> Option<Matrix> {
        let p = self.partition;
        if p.j == 0 {
            return None;
        }
        let c12 = self.c12.dense().expect("C12 has columns");
        Some(match &self.c11 {
            Block::Dense(c11) => c11.hstack(c12),
            Block::Empty { .. } => c12.clone(),
        })
    }

    /// Noisy-row block `[C21 C22]`.
    pub fn lower(&self) -> Matrix {
        let c22 = self.c22.dense().expect("C22 is never empty");
        match &self.c21 {
            Block::Dense(c21) => c21.hstack(c22),
            Block::Empty { .. } => c22.clone(),
        }
    }
}
