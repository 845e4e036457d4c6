//! Tape-free reverse-mode automatic differentiation with higher-order support.
//!
//! Every [`Var`] owns its value and, when it depends on a differentiable
//! input, a closure that maps the upstream gradient to gradients of its
//! parents. Those closures are written with `Var` operations themselves, so
//! calling [`grad`] with `create_graph = true` returns gradients that can be
//! differentiated again. The Wasserstein gradient penalty needs exactly that:
//! the input-gradient norm of a critic, differentiated with respect to the
//! critic's parameters.

use std::cell::Cell;
use std::collections::{HashMap, HashSet};
use std::fmt;
use std::rc::Rc;

use crate::conv::{self, ConvGeometry};
use crate::tensor::Tensor;

type BackwardFn = Box<dyn Fn(&Var) -> Vec<Option<Var>>>;

struct Node {
    id: u64,
    value: Tensor,
    requires_grad: bool,
    parents: Vec<Var>,
    backward: Option<BackwardFn>,
}

/// A node in the computation graph.
#[derive(Clone)]
pub struct Var(Rc<Node>);

thread_local! {
    static NEXT_ID: Cell<u64> = const { Cell::new(0) };
    static GRAD_ENABLED: Cell<bool> = const { Cell::new(true) };
}

fn next_id() -> u64 {
    NEXT_ID.with(|c| {
        let id = c.get();
        c.set(id + 1);
        id
    })
}

pub fn grad_enabled() -> bool {
    GRAD_ENABLED.with(|c| c.get())
}

/// Disables graph recording until dropped.
pub struct NoGradGuard {
    prev: bool,
}

impl NoGradGuard {
    pub fn new() -> Self {
        let prev = GRAD_ENABLED.with(|c| c.replace(false));
        NoGradGuard { prev }
    }
}

impl Default for NoGradGuard {
    fn default() -> Self {
        Self::new()
    }
}

impl Drop for NoGradGuard {
    fn drop(&mut self) {
        GRAD_ENABLED.with(|c| c.set(self.prev));
    }
}

/// Runs `f` without recording any graph.
pub fn no_grad<R>(f: impl FnOnce() -> R) -> R {
    let _guard = NoGradGuard::new();
    f()
}

impl fmt::Debug for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Var")
            .field("id", &self.0.id)
            .field("shape", &self.0.value.shape())
            .field("requires_grad", &self.0.requires_grad)
            .finish()
    }
}

impl Var {
    /// A value that is never differentiated.
    pub fn constant(value: Tensor) -> Var {
        Var(Rc::new(Node {
            id: next_id(),
            value,
            requires_grad: false,
            parents: Vec::new(),
            backward: None,
        }))
    }

    /// A leaf whose gradient can be requested.
    pub fn leaf(value: Tensor) -> Var {
        Var(Rc::new(Node {
            id: next_id(),
            value,
            requires_grad: true,
            parents: Vec::new(),
            backward: None,
        }))
    }

    pub fn scalar(v: f64) -> Var {
        Var::constant(Tensor::scalar(v))
    }

    fn record(
        value: Tensor,
        parents: Vec<Var>,
        backward: impl Fn(&Var) -> Vec<Option<Var>> + 'static,
    ) -> Var {
        if !grad_enabled() || !parents.iter().any(Var::requires_grad) {
            return Var::constant(value);
        }
        Var(Rc::new(Node {
            id: next_id(),
            value,
            requires_grad: true,
            parents,
            backward: Some(Box::new(backward)),
        }))
    }

    pub fn id(&self) -> u64 {
        self.0.id
    }

    pub fn value(&self) -> &Tensor {
        &self.0.value
    }

    pub fn shape(&self) -> &[usize] {
        self.0.value.shape()
    }

    pub fn requires_grad(&self) -> bool {
        self.0.requires_grad
    }

    /// Value of a one-element variable.
    pub fn item(&self) -> f64 {
        self.0.value.item()
    }

    pub fn detach(&self) -> Var {
        Var::constant(self.0.value.clone())
    }

    pub fn add(&self, other: &Var) -> Var {
        let value = self.value().zip_map(other.value(), |a, b| a + b);
        Var::record(value, vec![self.clone(), other.clone()], |g| {
            vec![Some(g.clone()), Some(g.clone())]
        })
    }

    pub fn sub(&self, other: &Var) -> Var {
        let value = self.value().zip_map(other.value(), |a, b| a - b);
        Var::record(value, vec![self.clone(), other.clone()], |g| {
            vec![Some(g.clone()), Some(g.neg())]
        })
    }

    pub fn mul(&self, other: &Var) -> Var {
        let value = self.value().zip_map(other.value(), |a, b| a * b);
        let (a, b) = (self.clone(), other.clone());
        Var::record(value, vec![self.clone(), other.clone()], move |g| {
            vec![
                a.requires_grad().then(|| g.mul(&b)),
                b.requires_grad().then(|| g.mul(&a)),
            ]
        })
    }

    pub fn neg(&self) -> Var {
        self.scale(-1.0)
    }

    pub fn scale(&self, s: f64) -> Var {
        let value = self.value().map(|a| a * s);
        Var::record(value, vec![self.clone()], move |g| vec![Some(g.scale(s))])
    }

    pub fn add_scalar(&self, c: f64) -> Var {
        let value = self.value().map(|a| a + c);
        Var::record(value, vec![self.clone()], |g| vec![Some(g.clone())])
    }

    /// Elementwise product with a constant tensor.
    pub fn mul_const(&self, c: Rc<Tensor>) -> Var {
        let value = self.value().zip_map(&c, |a, b| a * b);
        Var::record(value, vec![self.clone()], move |g| {
            vec![Some(g.mul_const(c.clone()))]
        })
    }

    /// Sum of all elements, shape `[1]`.
    pub fn sum(&self) -> Var {
        let value = Tensor::scalar(self.value().sum());
        let shape = self.shape().to_vec();
        Var::record(value, vec![self.clone()], move |g| {
            vec![Some(g.broadcast_scalar(&shape))]
        })
    }

    pub fn mean(&self) -> Var {
        let n = self.value().len() as f64;
        self.sum().scale(1.0 / n)
    }

    /// Repeats a `[1]` scalar over `shape`.
    pub fn broadcast_scalar(&self, shape: &[usize]) -> Var {
        let value = Tensor::full(shape, self.item());
        Var::record(value, vec![self.clone()], |g| vec![Some(g.sum())])
    }

    /// `[C, L] -> [C, 1]`, summing along the length axis.
    pub fn sum_len(&self) -> Var {
        let (c, l) = dims2(self);
        let data = self.value().data();
        let value = Tensor::new(
            vec![c, 1],
            (0..c).map(|i| data[i * l..(i + 1) * l].iter().sum()).collect(),
        );
        Var::record(value, vec![self.clone()], move |g| vec![Some(g.expand_len(l))])
    }

    pub fn mean_len(&self) -> Var {
        let l = dims2(self).1 as f64;
        self.sum_len().scale(1.0 / l)
    }

    /// `[C, 1] -> [C, len]`, repeating each channel value.
    pub fn expand_len(&self, len: usize) -> Var {
        let (c, one) = dims2(self);
        assert_eq!(one, 1, "expand_len expects a [C, 1] tensor");
        let data = self.value().data();
        let mut out = Vec::with_capacity(c * len);
        for &v in data {
            out.extend(std::iter::repeat_n(v, len));
        }
        Var::record(Tensor::new(vec![c, len], out), vec![self.clone()], |g| {
            vec![Some(g.sum_len())]
        })
    }

    pub fn powf(&self, p: f64) -> Var {
        let value = self.value().map(|a| a.powf(p));
        let x = self.clone();
        Var::record(value, vec![self.clone()], move |g| {
            vec![Some(g.mul(&x.powf(p - 1.0).scale(p)))]
        })
    }

    pub fn abs(&self) -> Var {
        let value = self.value().map(f64::abs);
        let sign = Rc::new(self.value().map(|a| {
            if a > 0.0 {
                1.0
            } else if a < 0.0 {
                -1.0
            } else {
                0.0
            }
        }));
        Var::record(value, vec![self.clone()], move |g| {
            vec![Some(g.mul_const(sign.clone()))]
        })
    }

    pub fn relu(&self) -> Var {
        self.leaky_relu(0.0)
    }

    pub fn leaky_relu(&self, slope: f64) -> Var {
        let mask = Rc::new(self.value().map(|a| if a > 0.0 { 1.0 } else { slope }));
        let value = self.value().zip_map(&mask, |a, m| a * m);
        Var::record(value, vec![self.clone()], move |g| {
            vec![Some(g.mul_const(mask.clone()))]
        })
    }

    /// Reinterprets the data with a new shape of equal size.
    pub fn reshape(&self, shape: &[usize]) -> Var {
        let value = Tensor::new(shape.to_vec(), self.value().data().to_vec());
        let orig = self.shape().to_vec();
        Var::record(value, vec![self.clone()], move |g| vec![Some(g.reshape(&orig))])
    }
}

/// Forward 1-D convolution, `x: [Ci, L]`, `w: [Co, Ci, K]`.
pub fn conv1d(x: &Var, w: &Var, geom: ConvGeometry) -> Var {
    let value = conv::forward(x.value(), w.value(), geom);
    let in_len = x.shape()[1];
    let (xc, wc) = (x.clone(), w.clone());
    Var::record(value, vec![x.clone(), w.clone()], move |g| {
        vec![
            xc.requires_grad().then(|| conv1d_input_grad(g, &wc, geom, in_len)),
            wc.requires_grad().then(|| conv1d_weight_grad(&xc, g, geom)),
        ]
    })
}

/// Adjoint of [`conv1d`] with respect to its input; with `w: [Cin, Cout, K]`
/// this is the transposed convolution producing `[Cout, out_len]`.
pub fn conv1d_input_grad(g: &Var, w: &Var, geom: ConvGeometry, out_len: usize) -> Var {
    let value = conv::input_grad(g.value(), w.value(), geom, out_len);
    let (gc, wc) = (g.clone(), w.clone());
    Var::record(value, vec![g.clone(), w.clone()], move |h| {
        vec![
            gc.requires_grad().then(|| conv1d(h, &wc, geom)),
            wc.requires_grad().then(|| conv1d_weight_grad(h, &gc, geom)),
        ]
    })
}

/// Adjoint of [`conv1d`] with respect to its weight.
pub fn conv1d_weight_grad(x: &Var, g: &Var, geom: ConvGeometry) -> Var {
    let value = conv::weight_grad(x.value(), g.value(), geom);
    let in_len = x.shape()[1];
    let (xc, gc) = (x.clone(), g.clone());
    Var::record(value, vec![x.clone(), g.clone()], move |h| {
        vec![
            xc.requires_grad().then(|| conv1d_input_grad(&gc, h, geom, in_len)),
            gc.requires_grad().then(|| conv1d(&xc, h, geom)),
        ]
    })
}

fn dims2(v: &Var) -> (usize, usize) {
    match v.shape() {
        [a, b] => (*a, *b),
        s => panic!("expected a [channels, length] variable, got {s:?}"),
    }
}

/// Gradients of the scalar `output` with respect to each of `inputs`.
///
/// `None` marks an input the output does not depend on. With
/// `create_graph` the returned gradients are themselves differentiable.
pub fn grad(output: &Var, inputs: &[&Var], create_graph: bool) -> Vec<Option<Var>> {
    assert_eq!(output.value().len(), 1, "grad() needs a scalar output");
    let _guard = (!create_graph).then(NoGradGuard::new);

    let order = topo_order(output);
    let wanted: HashSet<u64> = inputs.iter().map(|v| v.id()).collect();
    let mut pending: HashMap<u64, Var> = HashMap::new();
    let mut found: HashMap<u64, Var> = HashMap::new();
    pending.insert(output.id(), Var::constant(Tensor::full(output.shape(), 1.0)));

    for node in order.iter().rev() {
        let Some(g) = pending.remove(&node.id()) else {
            continue;
        };
        if wanted.contains(&node.id()) {
            found.insert(node.id(), g.clone());
        }
        let Some(backward) = &node.0.backward else {
            continue;
        };
        let parent_grads = backward(&g);
        for (parent, pg) in node.0.parents.iter().zip(parent_grads) {
            let Some(pg) = pg else { continue };
            if !parent.requires_grad() {
                continue;
            }
            let acc = match pending.remove(&parent.id()) {
                Some(prev) => prev.add(&pg),
                None => pg,
            };
            pending.insert(parent.id(), acc);
        }
    }
    inputs.iter().map(|v| found.remove(&v.id())).collect()
}

/// Nodes reachable from `root` through differentiable edges, parents first.
fn topo_order(root: &Var) -> Vec<Var> {
    let mut order = Vec::new();
    let mut visited = HashSet::new();
    let mut stack: Vec<(Var, bool)> = vec![(root.clone(), false)];
    while let Some((node, expanded)) = stack.pop() {
        if expanded {
            order.push(node);
            continue;
        }
        if !node.requires_grad() || !visited.insert(node.id()) {
            continue;
        }
        stack.push((node.clone(), true));
        for p in &node.0.parents {
            if p.requires_grad() && !visited.contains(&p.id()) {
                stack.push((p.clone(), false));
            }
        }
    }
    order
}
