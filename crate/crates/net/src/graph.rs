//! Reverse-mode automatic differentiation on a tape.
//!
//! Every operation appends a node holding its value and, when some input
//! requires a gradient, a closure mapping the output gradient to input
//! gradients. [`Graph::backward`] walks the tape in reverse.

use crate::tensor::{Scalar, Tensor};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(pub(crate) usize);

/// `(inputs, output, output_grad) -> per-input gradient`.
pub type BackFn<S> = Box<dyn Fn(&[&Tensor<S>], &Tensor<S>, &Tensor<S>) -> Vec<Option<Tensor<S>>>>;

struct Node<S> {
    value: Tensor<S>,
    parents: Vec<usize>,
    back: Option<BackFn<S>>,
    needs_grad: bool,
}

pub struct Graph<S> {
    nodes: Vec<Node<S>>,
}

impl<S: Scalar> Default for Graph<S> {
    fn default() -> Self {
        Self::new()
    }
}

/// Gradients of one backward pass, indexed by variable.
pub struct Grads<S> {
    grads: Vec<Option<Tensor<S>>>,
}

impl<S: Scalar> Grads<S> {
    pub fn get(&self, v: Var) -> Option<&Tensor<S>> {
        self.grads.get(v.0).and_then(|g| g.as_ref())
    }

    pub fn take(&mut self, v: Var) -> Option<Tensor<S>> {
        self.grads.get_mut(v.0).and_then(|g| g.take())
    }
}

impl<S: Scalar> Graph<S> {
    pub fn new() -> Self {
        Self { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Tensor<S>, parents: Vec<usize>, back: Option<BackFn<S>>, needs_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            parents,
            back,
            needs_grad,
        });
        Var(self.nodes.len() - 1)
    }

    /// A constant input.
    pub fn constant(&mut self, t: Tensor<S>) -> Var {
        self.push(t, Vec::new(), None, false)
    }

    /// A leaf whose gradient is wanted.
    pub fn leaf(&mut self, t: Tensor<S>) -> Var {
        self.push(t, Vec::new(), None, true)
    }

    pub fn value(&self, v: Var) -> &Tensor<S> {
        &self.nodes[v.0].value
    }

    pub fn needs_grad(&self, v: Var) -> bool {
        self.nodes[v.0].needs_grad
    }

    /// Records an operation. `back` is only kept when an input needs a gradient.
    pub fn record(&mut self, value: Tensor<S>, parents: &[Var], back: BackFn<S>) -> Var {
        let needs = parents.iter().any(|p| self.nodes[p.0].needs_grad);
        let parents = parents.iter().map(|p| p.0).collect();
        self.push(value, parents, needs.then_some(back), needs)
    }

    /// Gradients of the scalar `loss` with respect to every upstream node.
    /// Intermediate gradients are released once consumed; leaves keep theirs.
    pub fn backward(&self, loss: Var) -> Grads<S> {
        assert_eq!(self.value(loss).len(), 1, "backward needs a scalar");
        let mut grads: Vec<Option<Tensor<S>>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[loss.0] = Some(Tensor::full(self.value(loss).shape(), S::one()));
        for i in (0..=loss.0).rev() {
            let node = &self.nodes[i];
            let Some(back) = &node.back else { continue };
            let Some(g) = grads[i].take() else { continue };
            let inputs: Vec<&Tensor<S>> = node.parents.iter().map(|&p| &self.nodes[p].value).collect();
            let pg = back(&inputs, &node.value, &g);
            debug_assert_eq!(pg.len(), node.parents.len());
            for (&p, g) in node.parents.iter().zip(pg) {
                let Some(g) = g else { continue };
                if !self.nodes[p].needs_grad {
                    continue;
                }
                debug_assert_eq!(g.shape(), self.nodes[p].value.shape(), "gradient shape");
                match &mut grads[p] {
                    Some(acc) => acc.add_assign(&g),
                    slot => *slot = Some(g),
                }
            }
        }
        Grads { grads }
    }
}
