//! Dense f64 tensor with reverse-mode automatic differentiation.
//!
//! A [`Tensor`] is a cheaply clonable handle onto one node of a computation
//! DAG. Operations allocate fresh output nodes holding a backward closure;
//! calling [`Tensor::backward`] on a scalar output walks the graph in reverse
//! topological order and accumulates gradients into every node that requires
//! them. Leaves created with `requires_grad = true` (parameters, probe
//! inputs) retain their gradient until [`Tensor::zero_grad`] clears it.
//!
//! Values are `f64` throughout so finite-difference gradient checks are
//! meaningful. Graphs are single-threaded (`Rc`-based); a dropped output
//! releases its whole graph iteratively, so arbitrarily deep graphs do not
//! overflow the stack.

use std::cell::{Ref, RefCell, RefMut};
use std::collections::HashSet;
use std::rc::Rc;
use std::sync::atomic::{AtomicU64, Ordering};

use crate::error::{Error, Result};

static NEXT_ID: AtomicU64 = AtomicU64::new(1);

/// Arguments handed to an operation's backward closure.
pub(crate) struct BackwardArgs<'a> {
    /// Gradient of the loss w.r.t. this node's output.
    pub out_grad: &'a [f64],
    /// This node's forward values.
    pub out_data: &'a [f64],
    /// The operation's inputs, in construction order.
    pub parents: &'a [Tensor],
}

pub(crate) type BackwardFn = Box<dyn Fn(&BackwardArgs<'_>)>;

struct Inner {
    id: u64,
    shape: Vec<usize>,
    data: RefCell<Vec<f64>>,
    grad: RefCell<Option<Vec<f64>>>,
    requires_grad: bool,
    parents: Vec<Tensor>,
    backward: Option<BackwardFn>,
}

impl Drop for Inner {
    fn drop(&mut self) {
        // Unlink parents iteratively; recursive Rc drops would exhaust the
        // stack on deep graphs.
        let mut work = std::mem::take(&mut self.parents);
        while let Some(t) = work.pop() {
            if let Ok(mut inner) = Rc::try_unwrap(t.inner) {
                work.append(&mut inner.parents);
            }
        }
    }
}

/// Handle onto one node of the autodiff graph.
#[derive(Clone)]
pub struct Tensor {
    inner: Rc<Inner>,
}

impl std::fmt::Debug for Tensor {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Tensor")
            .field("id", &self.inner.id)
            .field("shape", &self.inner.shape)
            .field("requires_grad", &self.inner.requires_grad)
            .finish()
    }
}

impl Tensor {
    fn new_inner(
        shape: Vec<usize>,
        data: Vec<f64>,
        requires_grad: bool,
        parents: Vec<Tensor>,
        backward: Option<BackwardFn>,
    ) -> Tensor {
        debug_assert_eq!(shape.iter().product::<usize>(), data.len());
        Tensor {
            inner: Rc::new(Inner {
                id: NEXT_ID.fetch_add(1, Ordering::Relaxed),
                shape,
                data: RefCell::new(data),
                grad: RefCell::new(None),
                requires_grad,
                parents,
                backward,
            }),
        }
    }

    /// Leaf tensor from raw values.
    pub fn from_vec(shape: &[usize], data: Vec<f64>) -> Result<Tensor> {
        let n: usize = shape.iter().product();
        if n != data.len() {
            return Err(Error::Shape(format!(
                "value count {} does not match shape {:?} (needs {})",
                data.len(),
                shape,
                n
            )));
        }
        Ok(Tensor::new_inner(shape.to_vec(), data, false, Vec::new(), None))
    }

    pub fn zeros(shape: &[usize]) -> Tensor {
        let n = shape.iter().product();
        Tensor::new_inner(shape.to_vec(), vec![0.0; n], false, Vec::new(), None)
    }

    pub fn full(shape: &[usize], value: f64) -> Tensor {
        let n = shape.iter().product();
        Tensor::new_inner(shape.to_vec(), vec![value; n], false, Vec::new(), None)
    }

    pub fn scalar(value: f64) -> Tensor {
        Tensor::new_inner(vec![1], vec![value], false, Vec::new(), None)
    }

    /// Mark this leaf as a gradient target. Returns the same handle.
    pub fn requiring_grad(self) -> Tensor {
        assert!(
            self.inner.backward.is_none(),
            "requiring_grad is only valid on leaf tensors"
        );
        Tensor {
            inner: Rc::new(Inner {
                id: NEXT_ID.fetch_add(1, Ordering::Relaxed),
                shape: self.inner.shape.clone(),
                data: RefCell::new(self.inner.data.borrow().clone()),
                grad: RefCell::new(None),
                requires_grad: true,
                parents: Vec::new(),
                backward: None,
            }),
        }
    }

    /// Output node of an operation. When no parent requires gradients the
    /// node is detached (no backward closure, no parent links) so inference
    /// paths carry no graph.
    pub(crate) fn from_op(
        shape: Vec<usize>,
        data: Vec<f64>,
        parents: Vec<Tensor>,
        backward: BackwardFn,
    ) -> Tensor {
        let requires = parents.iter().any(|p| p.requires_grad());
        if requires {
            Tensor::new_inner(shape, data, true, parents, Some(backward))
        } else {
            Tensor::new_inner(shape, data, false, Vec::new(), None)
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.inner.shape
    }

    pub fn numel(&self) -> usize {
        self.inner.shape.iter().product()
    }

    pub fn requires_grad(&self) -> bool {
        self.inner.requires_grad
    }

    /// Two handles onto the same graph node?
    pub fn same_node(&self, other: &Tensor) -> bool {
        Rc::ptr_eq(&self.inner, &other.inner)
    }

    pub fn data(&self) -> Ref<'_, Vec<f64>> {
        self.inner.data.borrow()
    }

    /// Mutable access to the raw values. Intended for leaves (parameter
    /// updates, finite-difference probes); mutating an interior node
    /// invalidates any graph built from it.
    pub fn data_mut(&self) -> RefMut<'_, Vec<f64>> {
        self.inner.data.borrow_mut()
    }

    pub fn to_vec(&self) -> Vec<f64> {
        self.inner.data.borrow().clone()
    }

    pub fn item(&self) -> f64 {
        assert_eq!(self.numel(), 1, "item() on non-scalar tensor");
        self.inner.data.borrow()[0]
    }

    /// Copy of the accumulated gradient, if any.
    pub fn grad(&self) -> Option<Vec<f64>> {
        self.inner.grad.borrow().clone()
    }

    pub fn zero_grad(&self) {
        *self.inner.grad.borrow_mut() = None;
    }

    /// Gradient buffer, allocated as zeros on first touch.
    pub(crate) fn grad_buf(&self) -> RefMut<'_, Vec<f64>> {
        let mut g = self.inner.grad.borrow_mut();
        if g.is_none() {
            *g = Some(vec![0.0; self.numel()]);
        }
        RefMut::map(g, |o| o.as_mut().expect("grad buffer just allocated"))
    }

    /// Detached copy of this node's values as a fresh leaf.
    pub fn detach(&self) -> Tensor {
        Tensor::new_inner(
            self.inner.shape.clone(),
            self.inner.data.borrow().clone(),
            false,
            Vec::new(),
            None,
        )
    }

    pub fn is_finite(&self) -> bool {
        self.inner.data.borrow().iter().all(|v| v.is_finite())
    }

    /// Reverse-mode sweep from a scalar output. Gradients accumulate into
    /// every reachable node with `requires_grad`; call `zero_grad` on leaves
    /// between steps.
    pub fn backward(&self) -> Result<()> {
        if self.numel() != 1 {
            return Err(Error::Shape(format!(
                "backward() requires a scalar output, got shape {:?}",
                self.shape()
            )));
        }
        if !self.requires_grad() {
            return Ok(()); // nothing reachable requires gradients
        }
        let order = self.topo_order();
        self.grad_buf()[0] += 1.0;
        for node in order.iter().rev() {
            let Some(back) = node.inner.backward.as_ref() else {
                continue;
            };
            let grad_ref = node.inner.grad.borrow();
            let Some(out_grad) = grad_ref.as_ref() else {
                continue;
            };
            let data_ref = node.inner.data.borrow();
            back(&BackwardArgs {
                out_grad,
                out_data: &data_ref,
                parents: &node.inner.parents,
            });
        }
        Ok(())
    }

    /// Post-order over the grad-requiring subgraph: parents precede children.
    fn topo_order(&self) -> Vec<Tensor> {
        enum Step {
            Enter(Tensor),
            Exit(Tensor),
        }
        let mut order = Vec::new();
        let mut seen: HashSet<u64> = HashSet::new();
        let mut stack = vec![Step::Enter(self.clone())];
        while let Some(step) = stack.pop() {
            match step {
                Step::Enter(t) => {
                    if !seen.insert(t.inner.id) {
                        continue;
                    }
                    stack.push(Step::Exit(t.clone()));
                    for p in &t.inner.parents {
                        if p.requires_grad() && !seen.contains(&p.inner.id) {
                            stack.push(Step::Enter(p.clone()));
                        }
                    }
                }
                Step::Exit(t) => order.push(t),
            }
        }
        order
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::ops;

    #[test]
    fn from_vec_checks_count() {
        assert!(Tensor::from_vec(&[2, 2], vec![1.0; 3]).is_err());
        assert!(Tensor::from_vec(&[2, 2], vec![1.0; 4]).is_ok());
    }

    #[test]
    fn backward_rejects_non_scalar() {
        let t = Tensor::zeros(&[2]).requiring_grad();
        let y = ops::add(&t, &t).unwrap();
        assert!(matches!(y.backward(), Err(Error::Shape(_))));
    }

    #[test]
    fn grad_accumulates_through_shared_input() {
        // y = x + x  =>  dy/dx = 2
        let x = Tensor::from_vec(&[3], vec![1.0, 2.0, 3.0]).unwrap().requiring_grad();
        let y = ops::add(&x, &x).unwrap();
        let s = ops::sum_all(&y);
        s.backward().unwrap();
        assert_eq!(x.grad().unwrap(), vec![2.0, 2.0, 2.0]);
    }

    #[test]
    fn detached_graph_when_no_grad_needed() {
        let a = Tensor::full(&[4], 1.5);
        let b = Tensor::full(&[4], 2.0);
        let y = ops::mul(&a, &b).unwrap();
        assert!(!y.requires_grad());
        assert_eq!(y.to_vec(), vec![3.0; 4]);
    }

    #[test]
    fn deep_graph_drops_without_overflow() {
        let mut t = Tensor::full(&[8], 0.01).requiring_grad();
        for _ in 0..200_000 {
            t = ops::add_scalar(&t, 1e-9);
        }
        drop(t);
    }

    #[test]
    fn diamond_graph_grad() {
        // y = (x*x) + (x*x) reusing the same square node twice
        let x = Tensor::from_vec(&[2], vec![3.0, -2.0]).unwrap().requiring_grad();
        let sq = ops::mul(&x, &x).unwrap();
        let y = ops::add(&sq, &sq).unwrap();
        let s = ops::sum_all(&y);
        s.backward().unwrap();
        // d/dx 2x^2 = 4x
        assert_eq!(x.grad().unwrap(), vec![12.0, -8.0]);
    }
}
