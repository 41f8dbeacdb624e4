//! Dense 2-D float tensors and named bundles of them.
//!
//! A [`Tensor`] is a row-major matrix of `f32` weights where `rows` is the
//! reduction dimension K and `cols` the number of output channels N. Tensors
//! carry free-form string tags (`"part:ffn1"`, `"layer:3"`, ...) consumed by
//! selection policies. Tensors and bundles are immutable after construction.

use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::quant::PackedQuantTensor;

/// A named, row-major `rows x cols` matrix of finite 32-bit floats.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    name: String,
    rows: usize,
    cols: usize,
    data: Vec<f32>,
    tags: BTreeSet<String>,
}

impl Tensor {
    /// Build a tensor, validating shape and that every value is finite.
    pub fn new(name: impl Into<String>, rows: usize, cols: usize, data: Vec<f32>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::Validation(format!(
                "tensor dimensions must be positive, got {rows}x{cols}"
            )));
        }
        if data.len() != rows * cols {
            return Err(Error::Validation(format!(
                "data length {} does not match {rows}x{cols}",
                data.len()
            )));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::Validation(format!(
                "non-finite value {} at flat index {pos}",
                data[pos]
            )));
        }
        Ok(Self {
            name: name.into(),
            rows,
            cols,
            data,
            tags: BTreeSet::new(),
        })
    }

    /// Attach tags (consumed by selection policies).
    pub fn with_tags<I, S>(mut self, tags: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        self.tags = tags.into_iter().map(Into::into).collect();
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn tags(&self) -> &BTreeSet<String> {
        &self.tags
    }

    /// Element at (row `k`, column `j`).
    #[inline]
    pub fn get(&self, k: usize, j: usize) -> f32 {
        self.data[k * self.cols + j]
    }

    /// Row `k` as a contiguous slice.
    #[inline]
    pub fn row(&self, k: usize) -> &[f32] {
        &self.data[k * self.cols..(k + 1) * self.cols]
    }

    /// Largest absolute value in the tensor.
    pub fn absmax(&self) -> f32 {
        self.data.iter().fold(0.0f32, |m, v| m.max(v.abs()))
    }
}

/// One entry of a [`TensorBundle`]: either raw floats or a packed
/// quantized tensor.
#[derive(Debug, Clone, PartialEq)]
pub enum Item {
    Float(Tensor),
    Packed(PackedQuantTensor),
}

impl Item {
    pub fn name(&self) -> &str {
        match self {
            Item::Float(t) => t.name(),
            Item::Packed(q) => q.name(),
        }
    }

    pub fn rows(&self) -> usize {
        match self {
            Item::Float(t) => t.rows(),
            Item::Packed(q) => q.rows(),
        }
    }

    pub fn cols(&self) -> usize {
        match self {
            Item::Float(t) => t.cols(),
            Item::Packed(q) => q.cols(),
        }
    }

    pub fn tags(&self) -> &BTreeSet<String> {
        match self {
            Item::Float(t) => t.tags(),
            Item::Packed(q) => q.tags(),
        }
    }
}

/// An ordered collection of tensors with unique names.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TensorBundle {
    items: Vec<Item>,
}

impl TensorBundle {
    pub fn new() -> Self {
        Self::default()
    }

    /// Append an item, rejecting duplicate names.
    pub fn push(&mut self, item: Item) -> Result<()> {
        if self.items.iter().any(|it| it.name() == item.name()) {
            return Err(Error::DuplicateName(item.name().to_string()));
        }
        self.items.push(item);
        Ok(())
    }

    pub fn push_tensor(&mut self, t: Tensor) -> Result<()> {
        self.push(Item::Float(t))
    }

    pub fn items(&self) -> &[Item] {
        &self.items
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn get(&self, name: &str) -> Option<&Item> {
        self.items.iter().find(|it| it.name() == name)
    }

    pub fn into_items(self) -> Vec<Item> {
        self.items
    }
}

impl FromIterator<Item> for TensorBundle {
    fn from_iter<T: IntoIterator<Item = Item>>(iter: T) -> Self {
        let mut b = TensorBundle::new();
        for it in iter {
            b.push(it).expect("duplicate name in bundle literal");
        }
        b
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_shape_mismatch() {
        assert!(Tensor::new("w", 2, 3, vec![0.0; 5]).is_err());
        assert!(Tensor::new("w", 0, 3, vec![]).is_err());
    }

    #[test]
    fn rejects_non_finite() {
        assert!(Tensor::new("w", 1, 2, vec![1.0, f32::NAN]).is_err());
        assert!(Tensor::new("w", 1, 2, vec![f32::INFINITY, 0.0]).is_err());
    }

    #[test]
    fn indexing_is_row_major() {
        let t = Tensor::new("w", 2, 3, vec![0.0, 1.0, 2.0, 3.0, 4.0, 5.0]).unwrap();
        assert_eq!(t.get(0, 2), 2.0);
        assert_eq!(t.get(1, 0), 3.0);
        assert_eq!(t.row(1), &[3.0, 4.0, 5.0]);
    }

    #[test]
    fn bundle_rejects_duplicate_names() {
        let mut b = TensorBundle::new();
        b.push_tensor(Tensor::new("a", 1, 1, vec![1.0]).unwrap())
            .unwrap();
        let err = b.push_tensor(Tensor::new("a", 1, 1, vec![2.0]).unwrap());
        assert!(matches!(err, Err(Error::DuplicateName(_))));
    }
}
