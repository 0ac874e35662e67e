use std::collections::HashMap;

use super::{numel, ParamSet, Tensor};
use crate::error::{Error, Result};

/// Handle to a value recorded on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

/// Vector-Jacobian product of one recorded operation. Receives the tape (to
/// read input values) and the upstream gradient, returns one optional
/// gradient contribution per input, in input order.
pub(crate) type BackwardFn = Box<dyn Fn(&Tape, &[f64]) -> Vec<Option<Vec<f64>>>>;

struct Node {
    shape: Vec<usize>,
    data: Vec<f64>,
    requires_grad: bool,
    inputs: Vec<Var>,
    backward: Option<BackwardFn>,
    // Persistent gradient, populated for leaves only.
    grad: Option<Vec<f64>>,
}

/// Linear record of a forward computation. Nodes are appended in
/// evaluation order, so reverse index order is a valid topological order.
#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
    bound: HashMap<String, Var>,
    params: Vec<(String, Var)>,
}

impl Tape {
    pub fn new() -> Self {
        Tape::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Records a leaf. Gradients are tracked when the tensor requests them.
    pub fn leaf(&mut self, tensor: Tensor) -> Var {
        let requires_grad = tensor.requires_grad();
        let shape = tensor.shape().to_vec();
        self.push_leaf(shape, tensor.into_data(), requires_grad)
    }

    /// Records a leaf that never receives gradients.
    pub fn constant(&mut self, tensor: Tensor) -> Var {
        let shape = tensor.shape().to_vec();
        self.push_leaf(shape, tensor.into_data(), false)
    }

    pub fn constant_from(&mut self, shape: Vec<usize>, data: Vec<f64>) -> Result<Var> {
        let t = Tensor::new(shape, data)?;
        Ok(self.constant(t))
    }

    /// Binds a named parameter. Repeated binds of the same name on one tape
    /// return the same handle, so gradients from every use accumulate.
    /// Frozen parameters are bound as constants.
    pub fn param(&mut self, params: &ParamSet, name: &str) -> Result<Var> {
        if let Some(&v) = self.bound.get(name) {
            return Ok(v);
        }
        let t = params.get(name).ok_or_else(|| Error::UnknownParam(name.to_string()))?;
        let v = self.push_leaf(t.shape().to_vec(), t.data().to_vec(), params.is_trainable(name));
        self.bound.insert(name.to_string(), v);
        if params.is_trainable(name) {
            self.params.push((name.to_string(), v));
        }
        Ok(v)
    }

    /// Copies `var`'s value into a fresh leaf cut off from the graph.
    pub fn detach(&mut self, var: Var) -> Var {
        let node = &self.nodes[var.0];
        let (shape, data) = (node.shape.clone(), node.data.clone());
        self.push_leaf(shape, data, false)
    }

    fn push_leaf(&mut self, shape: Vec<usize>, data: Vec<f64>, requires_grad: bool) -> Var {
        debug_assert_eq!(numel(&shape), data.len());
        self.nodes.push(Node { shape, data, requires_grad, inputs: Vec::new(), backward: None, grad: None });
        Var(self.nodes.len() - 1)
    }

    /// Records an operation result. The backward closure is dropped when no
    /// input participates in differentiation.
    pub(crate) fn push_op(
        &mut self,
        op: &'static str,
        shape: Vec<usize>,
        data: Vec<f64>,
        inputs: &[Var],
        backward: BackwardFn,
    ) -> Var {
        debug_assert_eq!(numel(&shape), data.len(), "{op}: shape/data mismatch");
        debug_assert!(data.iter().all(|v| v.is_finite()), "{op}: non-finite output");
        let requires_grad = inputs.iter().any(|v| self.nodes[v.0].requires_grad);
        self.nodes.push(Node {
            shape,
            data,
            requires_grad,
            inputs: if requires_grad { inputs.to_vec() } else { Vec::new() },
            backward: if requires_grad { Some(backward) } else { None },
            grad: None,
        });
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, var: Var) -> &[f64] {
        &self.nodes[var.0].data
    }

    pub fn shape(&self, var: Var) -> &[usize] {
        &self.nodes[var.0].shape
    }

    pub fn requires_grad(&self, var: Var) -> bool {
        self.nodes[var.0].requires_grad
    }

    /// Scalar value of a rank-0 (or single-element) node.
    pub fn scalar(&self, var: Var) -> f64 {
        self.nodes[var.0].data[0]
    }

    pub fn tensor(&self, var: Var) -> Tensor {
        let node = &self.nodes[var.0];
        Tensor::new(node.shape.clone(), node.data.clone()).expect("tape values are finite")
    }

    /// Gradient accumulated on a leaf by previous `backward` calls.
    pub fn grad(&self, var: Var) -> Option<&[f64]> {
        self.nodes[var.0].grad.as_deref()
    }

    /// Trainable parameters bound on this tape, in bind order.
    pub fn bound_params(&self) -> impl Iterator<Item = (&str, Var)> {
        self.params.iter().map(|(n, v)| (n.as_str(), *v))
    }

    pub fn zero_grads(&mut self) {
        for node in &mut self.nodes {
            node.grad = None;
        }
    }

    /// Reverse-mode sweep from a scalar `loss`; adds into leaf gradients.
    pub fn backward(&mut self, loss: Var) -> Result<()> {
        let node = &self.nodes[loss.0];
        if node.data.len() != 1 {
            return Err(Error::NonScalarLoss(node.shape.clone()));
        }
        if !node.requires_grad {
            return Ok(());
        }
        let mut pending: Vec<Option<Vec<f64>>> = Vec::with_capacity(loss.0 + 1);
        pending.resize_with(loss.0 + 1, || None);
        pending[loss.0] = Some(vec![1.0]);

        for idx in (0..=loss.0).rev() {
            let Some(g) = pending[idx].take() else { continue };
            let node = &self.nodes[idx];
            match &node.backward {
                Some(f) => {
                    let contribs = f(self, &g);
                    debug_assert_eq!(contribs.len(), node.inputs.len());
                    for (input, contrib) in node.inputs.iter().zip(contribs) {
                        let Some(c) = contrib else { continue };
                        if !self.nodes[input.0].requires_grad {
                            continue;
                        }
                        match &mut pending[input.0] {
                            Some(acc) => acc.iter_mut().zip(&c).for_each(|(a, b)| *a += b),
                            slot @ None => *slot = Some(c),
                        }
                    }
                }
                None => {
                    if node.requires_grad {
                        // leaf: keep for the persistent accumulation below
                        pending[idx] = Some(g);
                    }
                }
            }
        }

        for (idx, g) in pending.into_iter().enumerate() {
            let Some(g) = g else { continue };
            let node = &mut self.nodes[idx];
            match &mut node.grad {
                Some(acc) => acc.iter_mut().zip(&g).for_each(|(a, b)| *a += b),
                None => node.grad = Some(g),
            }
        }
        Ok(())
    }
}
