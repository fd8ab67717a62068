//! Reverse-mode gradient tape over scalar primitives.
//!
//! Every primitive appends one node holding its operand indices and the
//! local partial derivatives with respect to them. Nodes are appended in
//! evaluation order, so the tape is topologically sorted by construction
//! and the reverse sweep is a single backward pass over the node array.
//!
//! Constants never touch the tape: a [`Var`] without a tape handle is a
//! passive value, and operations between passive values stay passive.
//! Multiplying a recorded variable by an exact zero also stays passive.

use std::cell::RefCell;
use std::ops::{Add, Mul, Neg, Sub};

use super::jet::JetScalar;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Op {
    Leaf,
    Add,
    Sub,
    Mul,
    Neg,
    Scale,
    Shift,
    Tanh,
    Sin,
    Cos,
}

#[derive(Clone, Copy, Debug)]
struct Node {
    op: Op,
    args: [u32; 2],
    partials: [f64; 2],
    arity: u8,
}

/// Append-only record of scalar primitives.
#[derive(Debug, Default)]
pub struct Tape {
    nodes: RefCell<Vec<Node>>,
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_capacity(n: usize) -> Self {
        Tape {
            nodes: RefCell::new(Vec::with_capacity(n)),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Drop all recorded nodes. Variables created before the call must not
    /// be used afterwards; `&mut self` enforces that.
    pub fn clear(&mut self) {
        self.nodes.get_mut().clear();
    }

    /// A new independent variable.
    pub fn var(&self, value: f64) -> Var<'_> {
        let index = self.push(Node {
            op: Op::Leaf,
            args: [0, 0],
            partials: [0.0, 0.0],
            arity: 0,
        });
        Var {
            tape: Some(self),
            index,
            value,
        }
    }

    pub fn vars(&self, values: &[f64]) -> Vec<Var<'_>> {
        values.iter().map(|&v| self.var(v)).collect()
    }

    fn push(&self, node: Node) -> u32 {
        let mut nodes = self.nodes.borrow_mut();
        let index = u32::try_from(nodes.len()).expect("tape exceeds u32 nodes");
        nodes.push(node);
        index
    }

    fn unary<'t>(&'t self, op: Op, arg: u32, partial: f64, value: f64) -> Var<'t> {
        let index = self.push(Node {
            op,
            args: [arg, 0],
            partials: [partial, 0.0],
            arity: 1,
        });
        Var {
            tape: Some(self),
            index,
            value,
        }
    }

    fn binary<'t>(&'t self, op: Op, args: [u32; 2], partials: [f64; 2], value: f64) -> Var<'t> {
        let index = self.push(Node {
            op,
            args,
            partials,
            arity: 2,
        });
        Var {
            tape: Some(self),
            index,
            value,
        }
    }

    /// Reverse sweep from `output`, returning the adjoint of every node.
    pub fn gradient(&self, output: Var<'_>) -> Adjoints {
        let nodes = self.nodes.borrow();
        let mut adj = vec![0.0; nodes.len()];
        let Some(tape) = output.tape else {
            return Adjoints { adj };
        };
        assert!(std::ptr::eq(tape, self), "output recorded on another tape");
        adj[output.index as usize] = 1.0;
        for i in (0..=output.index as usize).rev() {
            let a = adj[i];
            if a == 0.0 {
                continue;
            }
            let node = &nodes[i];
            for j in 0..node.arity as usize {
                adj[node.args[j] as usize] += node.partials[j] * a;
            }
        }
        Adjoints { adj }
    }

    /// Recorded operations in order.
    pub fn ops(&self) -> Vec<Op> {
        self.nodes.borrow().iter().map(|n| n.op).collect()
    }
}

/// Adjoints produced by [`Tape::gradient`].
#[derive(Clone, Debug)]
pub struct Adjoints {
    adj: Vec<f64>,
}

impl Adjoints {
    /// `∂output/∂v`; zero for passive values and unrelated variables.
    pub fn of(&self, v: &Var<'_>) -> f64 {
        if v.tape.is_none() {
            return 0.0;
        }
        self.adj.get(v.index as usize).copied().unwrap_or(0.0)
    }
}

/// A scalar that is either passive or recorded on a [`Tape`].
#[derive(Clone, Copy, Debug)]
pub struct Var<'t> {
    tape: Option<&'t Tape>,
    index: u32,
    value: f64,
}

impl<'t> Var<'t> {
    pub fn constant(value: f64) -> Self {
        Var {
            tape: None,
            index: 0,
            value,
        }
    }

    pub fn value(&self) -> f64 {
        self.value
    }

    pub fn is_recorded(&self) -> bool {
        self.tape.is_some()
    }

    fn join(a: &Self, b: &Self) -> Option<&'t Tape> {
        match (a.tape, b.tape) {
            (Some(x), Some(y)) => {
                assert!(std::ptr::eq(x, y), "mixing variables from two tapes");
                Some(x)
            }
            (x, None) => x,
            (None, y) => y,
        }
    }
}

impl<'t> Add for Var<'t> {
    type Output = Var<'t>;
    fn add(self, rhs: Self) -> Self {
        let value = self.value + rhs.value;
        match (self.tape, rhs.tape) {
            (None, None) => Var::constant(value),
            (Some(t), None) => t.unary(Op::Shift, self.index, 1.0, value),
            (None, Some(t)) => t.unary(Op::Shift, rhs.index, 1.0, value),
            _ => {
                let t = Var::join(&self, &rhs).unwrap();
                t.binary(Op::Add, [self.index, rhs.index], [1.0, 1.0], value)
            }
        }
    }
}

impl<'t> Sub for Var<'t> {
    type Output = Var<'t>;
    fn sub(self, rhs: Self) -> Self {
        let value = self.value - rhs.value;
        match (self.tape, rhs.tape) {
            (None, None) => Var::constant(value),
            (Some(t), None) => t.unary(Op::Shift, self.index, 1.0, value),
            (None, Some(t)) => t.unary(Op::Neg, rhs.index, -1.0, value),
            _ => {
                let t = Var::join(&self, &rhs).unwrap();
                t.binary(Op::Sub, [self.index, rhs.index], [1.0, -1.0], value)
            }
        }
    }
}

impl<'t> Mul for Var<'t> {
    type Output = Var<'t>;
    fn mul(self, rhs: Self) -> Self {
        let value = self.value * rhs.value;
        match (self.tape, rhs.tape) {
            (None, None) => Var::constant(value),
            (Some(_), None) => self.scale(rhs.value),
            (None, Some(_)) => rhs.scale(self.value),
            _ => {
                let t = Var::join(&self, &rhs).unwrap();
                t.binary(
                    Op::Mul,
                    [self.index, rhs.index],
                    [rhs.value, self.value],
                    value,
                )
            }
        }
    }
}

impl<'t> Neg for Var<'t> {
    type Output = Var<'t>;
    fn neg(self) -> Self {
        match self.tape {
            None => Var::constant(-self.value),
            Some(t) => t.unary(Op::Neg, self.index, -1.0, -self.value),
        }
    }
}

impl<'t> JetScalar for Var<'t> {
    fn from_f64(v: f64) -> Self {
        Var::constant(v)
    }

    fn value(&self) -> f64 {
        self.value
    }

    fn scale(self, c: f64) -> Self {
        match self.tape {
            Some(t) if c != 0.0 => t.unary(Op::Scale, self.index, c, self.value * c),
            _ => Var::constant(self.value * c),
        }
    }

    fn shift(self, c: f64) -> Self {
        match self.tape {
            Some(t) => t.unary(Op::Shift, self.index, 1.0, self.value + c),
            None => Var::constant(self.value + c),
        }
    }

    fn tanh(self) -> Self {
        let y = self.value.tanh();
        match self.tape {
            Some(t) => t.unary(Op::Tanh, self.index, 1.0 - y * y, y),
            None => Var::constant(y),
        }
    }

    fn sin(self) -> Self {
        let (s, c) = self.value.sin_cos();
        match self.tape {
            Some(t) => t.unary(Op::Sin, self.index, c, s),
            None => Var::constant(s),
        }
    }

    fn cos(self) -> Self {
        let (s, c) = self.value.sin_cos();
        match self.tape {
            Some(t) => t.unary(Op::Cos, self.index, -s, c),
            None => Var::constant(c),
        }
    }
}
