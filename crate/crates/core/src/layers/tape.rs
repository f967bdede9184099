//! Reverse-mode tape. Nodes are appended in evaluation order, so every parent
//! index is smaller than its child and a single reverse sweep visits nodes in
//! reverse topological order.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::linalg::Mat;

/// Maps the adjoint of a node to the adjoints of its parents, in order.
pub type Backward = Box<dyn Fn(&Mat) -> Result<Vec<Mat>> + Send + Sync>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

struct Node {
    value: Arc<Mat>,
    parents: Vec<Var>,
    backward: Option<Backward>,
}

#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

impl Tape {
    pub fn new() -> Self {
        Tape { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Records an input or parameter.
    pub fn leaf(&mut self, value: Mat) -> Var {
        self.nodes.push(Node { value: Arc::new(value), parents: Vec::new(), backward: None });
        Var(self.nodes.len() - 1)
    }

    /// Records an operation. `backward` receives the adjoint of `value` and
    /// returns one adjoint per parent, each shaped like that parent's value.
    pub fn push(&mut self, value: Mat, parents: Vec<Var>, backward: Backward) -> Var {
        debug_assert!(parents.iter().all(|p| p.0 < self.nodes.len()));
        self.nodes.push(Node { value: Arc::new(value), parents, backward: Some(backward) });
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, v: Var) -> &Mat {
        &self.nodes[v.0].value
    }

    /// Shared handle to a value, for backward closures that need it without copying.
    pub fn shared(&self, v: Var) -> Arc<Mat> {
        Arc::clone(&self.nodes[v.0].value)
    }

    /// Reverse sweep from a scalar node with seed 1.
    pub fn backward(&self, root: Var) -> Result<Gradients> {
        if self.value(root).shape() != (1, 1) {
            return Err(Error::ShapeMismatch(format!("backward root has shape {:?}", self.value(root).shape())));
        }
        self.backward_with(root, Mat::scalar(1.0))
    }

    pub fn backward_with(&self, root: Var, seed: Mat) -> Result<Gradients> {
        let mut adj: Vec<Option<Mat>> = vec![None; root.0 + 1];
        adj[root.0] = Some(seed);
        for i in (0..=root.0).rev() {
            let node = &self.nodes[i];
            let Some(back) = &node.backward else { continue };
            let Some(g) = adj[i].take() else { continue };
            let grads = back(&g)?;
            debug_assert_eq!(grads.len(), node.parents.len());
            for (p, gp) in node.parents.iter().zip(grads) {
                debug_assert_eq!(gp.shape(), self.nodes[p.0].value.shape());
                match &mut adj[p.0] {
                    Some(acc) => *acc += &gp,
                    slot => *slot = Some(gp),
                }
            }
            adj[i] = Some(g);
        }
        Ok(Gradients { adj })
    }
}

/// Adjoints of every node reached by a backward sweep.
pub struct Gradients {
    adj: Vec<Option<Mat>>,
}

impl Gradients {
    pub fn get(&self, v: Var) -> Option<&Mat> {
        self.adj.get(v.0).and_then(|a| a.as_ref())
    }

    /// Adjoint of `v`, or zeros shaped like its value if it was not reached.
    pub fn get_or_zeros(&self, tape: &Tape, v: Var) -> Mat {
        self.get(v).cloned().unwrap_or_else(|| {
            let (r, c) = tape.value(v).shape();
            Mat::zeros(r, c)
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mul(t: &mut Tape, a: Var, b: Var) -> Var {
        let (x, y) = (t.value(a).as_scalar(), t.value(b).as_scalar());
        t.push(Mat::scalar(x * y), vec![a, b], Box::new(move |g| Ok(vec![g.scale(y), g.scale(x)])))
    }

    #[test]
    fn shared_leaf_accumulates() {
        let mut t = Tape::new();
        let x = t.leaf(Mat::scalar(3.0));
        let y = mul(&mut t, x, x);
        let z = mul(&mut t, y, x);
        let g = t.backward(z).unwrap();
        assert_eq!(g.get(x).unwrap().as_scalar(), 27.0);
        assert_eq!(g.get(y).unwrap().as_scalar(), 3.0);
    }

    #[test]
    fn unreached_nodes_have_no_adjoint() {
        let mut t = Tape::new();
        let x = t.leaf(Mat::scalar(2.0));
        let unused = t.leaf(Mat::zeros(2, 2));
        let y = mul(&mut t, x, x);
        let g = t.backward(y).unwrap();
        assert!(g.get(unused).is_none());
        assert_eq!(g.get_or_zeros(&t, unused), Mat::zeros(2, 2));
        assert!(t.backward(unused).is_err());
    }
}
