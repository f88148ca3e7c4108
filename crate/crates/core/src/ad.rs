//! Scalar reverse-mode automatic differentiation.
//!
//! The loss kernels are written once, generically over [`Real`], and run
//! either on plain `f64` (loss evaluation) or on [`Var`] (gradients). A `Var`
//! is a `Copy` handle into a thread-local tape, so kernels read like ordinary
//! scalar code. Each worker thread owns its tape; [`reset`] clears it between
//! independent evaluations.
//!
//! ```
//! use proba::ad::{self, Real, Var};
//!
//! ad::reset();
//! let x = Var::input(3.0);
//! let y = x * x + x.sin();
//! let grad = ad::gradient(y, &[x]);
//! assert!((grad[0] - (6.0 + 3.0f64.cos())).abs() < 1e-12);
//! ```

use std::cell::RefCell;
use std::ops::{Add, Div, Mul, Neg, Sub};

/// Scalar operations needed by the differentiable kernels.
pub trait Real:
    Copy
    + std::fmt::Debug
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + Add<f64, Output = Self>
    + Sub<f64, Output = Self>
    + Mul<f64, Output = Self>
    + Div<f64, Output = Self>
{
    /// Lifts a constant (no derivative).
    fn cst(value: f64) -> Self;
    /// The primal value.
    fn value(self) -> f64;
    fn exp(self) -> Self;
    fn ln(self) -> Self;
    fn sqrt(self) -> Self;
    fn sin(self) -> Self;
    fn cos(self) -> Self;
    fn recip(self) -> Self;

    fn square(self) -> Self {
        self * self
    }
}

impl Real for f64 {
    #[inline]
    fn cst(value: f64) -> Self {
        value
    }
    #[inline]
    fn value(self) -> f64 {
        self
    }
    #[inline]
    fn exp(self) -> Self {
        f64::exp(self)
    }
    #[inline]
    fn ln(self) -> Self {
        f64::ln(self)
    }
    #[inline]
    fn sqrt(self) -> Self {
        f64::sqrt(self)
    }
    #[inline]
    fn sin(self) -> Self {
        f64::sin(self)
    }
    #[inline]
    fn cos(self) -> Self {
        f64::cos(self)
    }
    #[inline]
    fn recip(self) -> Self {
        f64::recip(self)
    }
}

const CONSTANT: u32 = u32::MAX;

#[derive(Clone, Copy)]
struct Node {
    lhs: u32,
    rhs: u32,
    d_lhs: f64,
    d_rhs: f64,
}

#[derive(Default)]
struct Tape {
    nodes: Vec<Node>,
    adjoints: Vec<f64>,
}

thread_local! {
    static TAPE: RefCell<Tape> = RefCell::new(Tape::default());
}

/// A differentiable scalar recorded on the current thread's tape.
#[derive(Clone, Copy, Debug)]
pub struct Var {
    value: f64,
    slot: u32,
}

/// Clears the current thread's tape. Every `Var` created before the call
/// becomes invalid.
pub fn reset() {
    TAPE.with(|t| t.borrow_mut().nodes.clear());
}

/// Number of nodes currently recorded on this thread's tape.
pub fn tape_len() -> usize {
    TAPE.with(|t| t.borrow().nodes.len())
}

#[inline]
fn push(value: f64, lhs: u32, d_lhs: f64, rhs: u32, d_rhs: f64) -> Var {
    TAPE.with(|t| {
        let mut tape = t.borrow_mut();
        let slot = tape.nodes.len() as u32;
        tape.nodes.push(Node {
            lhs,
            rhs,
            d_lhs,
            d_rhs,
        });
        Var { value, slot }
    })
}

impl Var {
    /// Records a new independent variable.
    pub fn input(value: f64) -> Var {
        push(value, CONSTANT, 0.0, CONSTANT, 0.0)
    }

    /// A constant that carries no derivative and occupies no tape slot.
    pub fn constant(value: f64) -> Var {
        Var {
            value,
            slot: CONSTANT,
        }
    }

    pub fn is_constant(&self) -> bool {
        self.slot == CONSTANT
    }

    #[inline]
    fn unary(self, value: f64, d: f64) -> Var {
        if self.slot == CONSTANT {
            Var::constant(value)
        } else {
            push(value, self.slot, d, CONSTANT, 0.0)
        }
    }

    #[inline]
    fn binary(self, other: Var, value: f64, d_self: f64, d_other: f64) -> Var {
        match (self.slot == CONSTANT, other.slot == CONSTANT) {
            (true, true) => Var::constant(value),
            (false, true) => push(value, self.slot, d_self, CONSTANT, 0.0),
            (true, false) => push(value, other.slot, d_other, CONSTANT, 0.0),
            (false, false) => push(value, self.slot, d_self, other.slot, d_other),
        }
    }
}

/// Backpropagates from `output` and returns d(output)/d(input) for each of
/// `inputs`, in order. Constants get a zero derivative.
pub fn gradient(output: Var, inputs: &[Var]) -> Vec<f64> {
    let mut out = vec![0.0; inputs.len()];
    gradient_into(output, inputs, &mut out);
    out
}

/// As [`gradient`], writing into a caller-provided buffer.
pub fn gradient_into(output: Var, inputs: &[Var], out: &mut [f64]) {
    assert_eq!(inputs.len(), out.len(), "gradient buffer length");
    out.iter_mut().for_each(|g| *g = 0.0);
    if output.slot == CONSTANT {
        return;
    }
    TAPE.with(|t| {
        let mut guard = t.borrow_mut();
        let tape = &mut *guard;
        let n = output.slot as usize + 1;
        tape.adjoints.clear();
        tape.adjoints.resize(n, 0.0);
        tape.adjoints[n - 1] = 1.0;
        for k in (0..n).rev() {
            let adj = tape.adjoints[k];
            if adj == 0.0 {
                continue;
            }
            let node = tape.nodes[k];
            if node.lhs != CONSTANT {
                tape.adjoints[node.lhs as usize] += adj * node.d_lhs;
            }
            if node.rhs != CONSTANT {
                tape.adjoints[node.rhs as usize] += adj * node.d_rhs;
            }
        }
        for (g, v) in out.iter_mut().zip(inputs) {
            if v.slot != CONSTANT && (v.slot as usize) < n {
                *g = tape.adjoints[v.slot as usize];
            }
        }
    });
}

impl Add for Var {
    type Output = Var;
    #[inline]
    fn add(self, rhs: Var) -> Var {
        self.binary(rhs, self.value + rhs.value, 1.0, 1.0)
    }
}

impl Sub for Var {
    type Output = Var;
    #[inline]
    fn sub(self, rhs: Var) -> Var {
        self.binary(rhs, self.value - rhs.value, 1.0, -1.0)
    }
}

impl Mul for Var {
    type Output = Var;
    #[inline]
    fn mul(self, rhs: Var) -> Var {
        self.binary(rhs, self.value * rhs.value, rhs.value, self.value)
    }
}

impl Div for Var {
    type Output = Var;
    #[inline]
    fn div(self, rhs: Var) -> Var {
        let inv = 1.0 / rhs.value;
        let value = self.value * inv;
        self.binary(rhs, value, inv, -value * inv)
    }
}

impl Neg for Var {
    type Output = Var;
    #[inline]
    fn neg(self) -> Var {
        self.unary(-self.value, -1.0)
    }
}

impl Add<f64> for Var {
    type Output = Var;
    #[inline]
    fn add(self, rhs: f64) -> Var {
        self.unary(self.value + rhs, 1.0)
    }
}

impl Sub<f64> for Var {
    type Output = Var;
    #[inline]
    fn sub(self, rhs: f64) -> Var {
        self.unary(self.value - rhs, 1.0)
    }
}

impl Mul<f64> for Var {
    type Output = Var;
    #[inline]
    fn mul(self, rhs: f64) -> Var {
        self.unary(self.value * rhs, rhs)
    }
}

impl Div<f64> for Var {
    type Output = Var;
    #[inline]
    fn div(self, rhs: f64) -> Var {
        self.unary(self.value / rhs, 1.0 / rhs)
    }
}

impl Real for Var {
    #[inline]
    fn cst(value: f64) -> Self {
        Var::constant(value)
    }
    #[inline]
    fn value(self) -> f64 {
        self.value
    }
    #[inline]
    fn exp(self) -> Self {
        let e = self.value.exp();
        self.unary(e, e)
    }
    #[inline]
    fn ln(self) -> Self {
        self.unary(self.value.ln(), 1.0 / self.value)
    }
    #[inline]
    fn sqrt(self) -> Self {
        let s = self.value.sqrt();
        self.unary(s, 0.5 / s)
    }
    #[inline]
    fn sin(self) -> Self {
        self.unary(self.value.sin(), self.value.cos())
    }
    #[inline]
    fn cos(self) -> Self {
        self.unary(self.value.cos(), -self.value.sin())
    }
    #[inline]
    fn recip(self) -> Self {
        let r = 1.0 / self.value;
        self.unary(r, -r * r)
    }
    #[inline]
    fn square(self) -> Self {
        self.unary(self.value * self.value, 2.0 * self.value)
    }
}
