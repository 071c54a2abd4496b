use serde::{Deserialize, Serialize};

use super::{AutodiffError, Gradients, Tensor};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ParamId(pub(crate) usize);

impl ParamId {
    pub fn index(self) -> usize {
        self.0
    }
}

/// A trainable tensor with its accumulated gradient.
#[derive(Clone, Debug, PartialEq)]
pub struct Parameter {
    name: String,
    value: Tensor,
    grad: Tensor,
    has_grad: bool,
}

impl Parameter {
    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn value(&self) -> &Tensor {
        &self.value
    }

    pub fn value_mut(&mut self) -> &mut Tensor {
        &mut self.value
    }

    pub fn grad(&self) -> &Tensor {
        &self.grad
    }

    /// True once a gradient has been accumulated since the last reset.
    pub fn has_grad(&self) -> bool {
        self.has_grad
    }
}

/// Named parameter arena owned by one model.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ParamStore {
    params: Vec<Parameter>,
}

/// Serialized form: name, shape and flat values of each parameter, in creation order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamRecord {
    pub name: String,
    pub shape: [usize; 2],
    pub values: Vec<f64>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: impl Into<String>, value: Tensor) -> ParamId {
        let grad = Tensor::zeros(value.rows(), value.cols());
        self.params.push(Parameter { name: name.into(), value, grad, has_grad: false });
        ParamId(self.params.len() - 1)
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn get(&self, id: ParamId) -> &Parameter {
        &self.params[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Parameter {
        &mut self.params[id.0]
    }

    pub fn value(&self, id: ParamId) -> &Tensor {
        &self.params[id.0].value
    }

    pub fn iter(&self) -> impl Iterator<Item = (ParamId, &Parameter)> {
        self.params.iter().enumerate().map(|(i, p)| (ParamId(i), p))
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = (ParamId, &mut Parameter)> {
        self.params.iter_mut().enumerate().map(|(i, p)| (ParamId(i), p))
    }

    pub fn scalar_count(&self) -> usize {
        self.params.iter().map(|p| p.value.len()).sum()
    }

    /// Adds the parameter gradients of one backward pass into the stored gradients.
    pub fn accumulate(&mut self, grads: &Gradients) -> Result<(), AutodiffError> {
        for (id, g) in grads.params() {
            let p = self.params.get_mut(id.0).ok_or(AutodiffError::UnknownParameter(id.0))?;
            if p.grad.shape() != g.shape() {
                return Err(AutodiffError::Shape {
                    op: "accumulate",
                    detail: format!("{}: {:?} vs {:?}", p.name, p.grad.shape(), g.shape()),
                });
            }
            p.grad.add_assign(g);
            p.has_grad = true;
        }
        Ok(())
    }

    pub fn zero_grad(&mut self) {
        for p in &mut self.params {
            p.grad.data_mut().fill(0.0);
            p.has_grad = false;
        }
    }

    pub fn to_records(&self) -> Vec<ParamRecord> {
        self.params
            .iter()
            .map(|p| ParamRecord {
                name: p.name.clone(),
                shape: p.value.shape(),
                values: p.value.data().to_vec(),
            })
            .collect()
    }

    /// Overwrites values from records produced by [`ParamStore::to_records`] on a
    /// store with the same layout.
    pub fn load_records(&mut self, records: &[ParamRecord]) -> Result<(), AutodiffError> {
        if records.len() != self.params.len() {
            return Err(AutodiffError::Layout(format!(
                "expected {} parameters, found {}",
                self.params.len(),
                records.len()
            )));
        }
        for (p, r) in self.params.iter_mut().zip(records) {
            if p.name != r.name || p.value.shape() != r.shape {
                return Err(AutodiffError::Layout(format!(
                    "parameter {} {:?} does not match record {} {:?}",
                    p.name,
                    p.value.shape(),
                    r.name,
                    r.shape
                )));
            }
            p.value = Tensor::new(r.shape[0], r.shape[1], r.values.clone())?;
        }
        Ok(())
    }
}
