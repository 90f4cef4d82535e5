//! Flat named parameter blocks shared between gradient producers and the
//! optimizer. Gradients use the same type with identical block layout.

use crate::error::{self, Result};

/// Role of a parameter block; the optimizer picks its learning rate from it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BlockKind {
    /// Variational rotation angles.
    Theta,
    /// Hermitian observable parameters.
    Phi,
    /// Classical linear input layer.
    Linear,
    /// Lookup-table values (tabular test approximators).
    Table,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParamBlock {
    pub name: String,
    pub kind: BlockKind,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParamStore {
    blocks: Vec<ParamBlock>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, name: impl Into<String>, kind: BlockKind, values: Vec<f64>) {
        self.blocks.push(ParamBlock { name: name.into(), kind, values });
    }

    pub fn blocks(&self) -> &[ParamBlock] {
        &self.blocks
    }

    pub fn blocks_mut(&mut self) -> &mut [ParamBlock] {
        &mut self.blocks
    }

    pub fn get(&self, name: &str) -> Option<&[f64]> {
        self.blocks.iter().find(|b| b.name == name).map(|b| b.values.as_slice())
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Vec<f64>> {
        self.blocks.iter_mut().find(|b| b.name == name).map(|b| &mut b.values)
    }

    pub fn require(&self, name: &str) -> Result<&[f64]> {
        match self.get(name) {
            Some(v) => Ok(v),
            None => error::config(format!("missing parameter block `{name}`")),
        }
    }

    pub fn len(&self) -> usize {
        self.blocks.iter().map(|b| b.values.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Same layout, every value zero.
    pub fn zeros_like(&self) -> Self {
        Self {
            blocks: self
                .blocks
                .iter()
                .map(|b| ParamBlock { name: b.name.clone(), kind: b.kind, values: vec![0.0; b.values.len()] })
                .collect(),
        }
    }

    pub fn same_layout(&self, other: &Self) -> bool {
        self.blocks.len() == other.blocks.len()
            && self
                .blocks
                .iter()
                .zip(&other.blocks)
                .all(|(a, b)| a.name == b.name && a.kind == b.kind && a.values.len() == b.values.len())
    }

    /// `self += scale * other`.
    pub fn add_scaled(&mut self, other: &Self, scale: f64) -> Result<()> {
        if !self.same_layout(other) {
            return error::config("parameter layouts differ");
        }
        for (a, b) in self.blocks.iter_mut().zip(&other.blocks) {
            for (x, y) in a.values.iter_mut().zip(&b.values) {
                *x += scale * y;
            }
        }
        Ok(())
    }

    pub fn scale(&mut self, s: f64) {
        for b in &mut self.blocks {
            b.values.iter_mut().for_each(|v| *v *= s);
        }
    }

    pub fn norm(&self) -> f64 {
        self.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn all_finite(&self) -> bool {
        self.iter().all(|v| v.is_finite())
    }

    pub fn iter(&self) -> impl Iterator<Item = f64> + '_ {
        self.blocks.iter().flat_map(|b| b.values.iter().copied())
    }

    /// Concatenates two stores (e.g. actor and critic) into one; block names
    /// get the given prefixes.
    pub fn join(a: &Self, a_prefix: &str, b: &Self, b_prefix: &str) -> Self {
        let mut out = Self::new();
        for blk in &a.blocks {
            out.push(format!("{a_prefix}{}", blk.name), blk.kind, blk.values.clone());
        }
        for blk in &b.blocks {
            out.push(format!("{b_prefix}{}", blk.name), blk.kind, blk.values.clone());
        }
        out
    }

    /// Inverse of [`ParamStore::join`] given the block count of the first part.
    pub fn split(&self, first_blocks: usize, a_prefix: &str, b_prefix: &str) -> (Self, Self) {
        let strip = |blk: &ParamBlock, prefix: &str| ParamBlock {
            name: blk.name.strip_prefix(prefix).unwrap_or(&blk.name).to_string(),
            kind: blk.kind,
            values: blk.values.clone(),
        };
        let a = self.blocks[..first_blocks].iter().map(|b| strip(b, a_prefix)).collect();
        let b = self.blocks[first_blocks..].iter().map(|b| strip(b, b_prefix)).collect();
        (Self { blocks: a }, Self { blocks: b })
    }

    /// FNV-1a over the bit patterns of every value, in block order.
    pub fn checksum(&self) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for v in self.iter() {
            for byte in v.to_bits().to_le_bytes() {
                h ^= byte as u64;
                h = h.wrapping_mul(0x0100_0000_01b3);
            }
        }
        h
    }
}
