//! Named parameter storage shared between training steps.

use crate::error::{Error, Result};
use rand::Rng;
use rand_distr::{Distribution, Normal};
use std::collections::HashMap;

#[derive(Debug, Clone, PartialEq)]
pub struct Param {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

/// Ordered, named parameter tensors. Order is insertion order and is part of
/// the determinism contract (checkpoints and optimizer state follow it).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParamStore {
    params: Vec<Param>,
    index: HashMap<String, usize>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: &str, shape: &[usize], data: Vec<f64>) -> Result<usize> {
        if self.index.contains_key(name) {
            return Err(Error::Usage(format!("duplicate parameter name {}", name)));
        }
        if shape.iter().product::<usize>() != data.len() {
            return Err(Error::Dimension(format!(
                "parameter {} shape/data mismatch",
                name
            )));
        }
        let idx = self.params.len();
        self.params.push(Param { name: name.to_string(), shape: shape.to_vec(), data });
        self.index.insert(name.to_string(), idx);
        Ok(idx)
    }

    /// Gaussian init with the given standard deviation.
    pub fn add_normal(
        &mut self,
        name: &str,
        shape: &[usize],
        std: f64,
        rng: &mut (impl Rng + ?Sized),
    ) -> usize {
        let n: usize = shape.iter().product();
        let dist = Normal::new(0.0, std).expect("valid std");
        let data = (0..n).map(|_| dist.sample(rng)).collect();
        self.add(name, shape, data).expect("unique name")
    }

    pub fn add_const(&mut self, name: &str, shape: &[usize], value: f64) -> usize {
        let n: usize = shape.iter().product();
        self.add(name, shape, vec![value; n]).expect("unique name")
    }

    pub fn get(&self, name: &str) -> Option<&Param> {
        self.index.get(name).map(|&i| &self.params[i])
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Param> {
        let i = *self.index.get(name)?;
        Some(&mut self.params[i])
    }

    pub fn params(&self) -> &[Param] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [Param] {
        &mut self.params
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn total_scalars(&self) -> usize {
        self.params.iter().map(|p| p.data.len()).sum()
    }
}
