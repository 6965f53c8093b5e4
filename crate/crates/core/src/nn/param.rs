use std::ops::Range;

use serde::{Deserialize, Serialize};

/// Handle to one named block inside a [`ParamStore`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct BlockId(pub usize);

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockMeta {
    pub name: String,
    pub offset: usize,
    pub rows: usize,
    pub cols: usize,
    pub frozen: bool,
}

impl BlockMeta {
    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn range(&self) -> Range<usize> {
        self.offset..self.offset + self.len()
    }
}

/// All learnable values of a model in one flat buffer, with parallel
/// gradient and Adam moment buffers of the same length.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ParamStore {
    blocks: Vec<BlockMeta>,
    pub value: Vec<f64>,
    pub grad: Vec<f64>,
    pub adam_m: Vec<f64>,
    pub adam_v: Vec<f64>,
    /// Number of Adam updates applied so far.
    pub step: u64,
}

/// Borrowed view of one block: value, gradient and both Adam moments share
/// the same shape.
#[derive(Debug, Clone, Copy)]
pub struct ParamBlock<'a> {
    pub name: &'a str,
    pub rows: usize,
    pub cols: usize,
    pub frozen: bool,
    pub value: &'a [f64],
    pub grad: &'a [f64],
    pub adam_m: &'a [f64],
    pub adam_v: &'a [f64],
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    /// Appends a zero-initialised `rows x cols` block.
    pub fn add(&mut self, name: impl Into<String>, rows: usize, cols: usize) -> BlockId {
        let offset = self.value.len();
        let n = rows * cols;
        self.blocks.push(BlockMeta {
            name: name.into(),
            offset,
            rows,
            cols,
            frozen: false,
        });
        self.value.resize(offset + n, 0.0);
        self.grad.resize(offset + n, 0.0);
        self.adam_m.resize(offset + n, 0.0);
        self.adam_v.resize(offset + n, 0.0);
        BlockId(self.blocks.len() - 1)
    }

    pub fn len(&self) -> usize {
        self.value.len()
    }

    pub fn is_empty(&self) -> bool {
        self.value.is_empty()
    }

    pub fn blocks(&self) -> &[BlockMeta] {
        &self.blocks
    }

    pub fn meta(&self, id: BlockId) -> &BlockMeta {
        &self.blocks[id.0]
    }

    pub fn range(&self, id: BlockId) -> Range<usize> {
        self.blocks[id.0].range()
    }

    pub fn find(&self, name: &str) -> Option<BlockId> {
        self.blocks.iter().position(|b| b.name == name).map(BlockId)
    }

    pub fn block(&self, id: BlockId) -> ParamBlock<'_> {
        let m = &self.blocks[id.0];
        let r = m.range();
        ParamBlock {
            name: &m.name,
            rows: m.rows,
            cols: m.cols,
            frozen: m.frozen,
            value: &self.value[r.clone()],
            grad: &self.grad[r.clone()],
            adam_m: &self.adam_m[r.clone()],
            adam_v: &self.adam_v[r],
        }
    }

    pub fn value(&self, id: BlockId) -> &[f64] {
        &self.value[self.range(id)]
    }

    pub fn value_mut(&mut self, id: BlockId) -> &mut [f64] {
        let r = self.range(id);
        &mut self.value[r]
    }

    pub fn set_frozen(&mut self, id: BlockId, frozen: bool) {
        self.blocks[id.0].frozen = frozen;
    }

    pub fn is_frozen(&self, id: BlockId) -> bool {
        self.blocks[id.0].frozen
    }

    pub fn zero_grad(&mut self) {
        self.grad.iter_mut().for_each(|g| *g = 0.0);
    }

    /// Mask with `true` for every trainable coordinate.
    pub fn trainable_mask(&self) -> Vec<bool> {
        let mut mask = vec![true; self.len()];
        for b in self.blocks.iter().filter(|b| b.frozen) {
            mask[b.range()].iter_mut().for_each(|m| *m = false);
        }
        mask
    }

    pub fn trainable_count(&self) -> usize {
        self.blocks.iter().filter(|b| !b.frozen).map(BlockMeta::len).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn blocks_are_contiguous_and_shaped() {
        let mut s = ParamStore::new();
        let a = s.add("a", 2, 3);
        let b = s.add("b", 1, 4);
        assert_eq!(s.len(), 10);
        assert_eq!(s.range(b), 6..10);
        s.value_mut(a)[5] = 2.5;
        let view = s.block(a);
        assert_eq!((view.rows, view.cols, view.value[5]), (2, 3, 2.5));
        assert_eq!(view.grad.len(), view.adam_v.len());
        s.set_frozen(a, true);
        assert_eq!(s.trainable_count(), 4);
        assert_eq!(s.find("b"), Some(b));
    }
}
