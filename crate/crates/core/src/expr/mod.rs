//! Coefficient expressions: a small arithmetic language in the single variable `t`.
//!
//! Grammar (conventional precedence, `^` binds tightest and is right-associative):
//!
//! ```text
//! expr    := term (('+' | '-') term)*
//! term    := unary (('*' | '/') unary)*
//! unary   := ('-' | '+') unary | power
//! power   := primary ('^' unary)?
//! primary := number | 't' | func '(' expr ')' | '(' expr ')'
//! func    := abs | exp | sin | cos | sqrt
//! ```
//!
//! Exponents must fold to a non-negative integer constant.

mod bounds;
mod parser;

use std::fmt;

use thiserror::Error;

use crate::scalar::{lit, to_f64, Scalar};

pub use bounds::{estimate_bounds, BoundsEstimate};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExprError {
    #[error("syntax error at position {pos}: {message}")]
    Syntax { pos: usize, message: String },
    #[error("unknown identifier `{name}` at position {pos}")]
    UnknownIdentifier { name: String, pos: usize },
    #[error("exponent at position {pos} must be a non-negative integer constant")]
    BadExponent { pos: usize },
    #[error("domain error at t = {t}: {message}")]
    Domain { t: f64, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnaryOp {
    Neg,
    Abs,
    Exp,
    Sin,
    Cos,
    Sqrt,
}

impl UnaryOp {
    fn name(self) -> &'static str {
        match self {
            UnaryOp::Neg => "-",
            UnaryOp::Abs => "abs",
            UnaryOp::Exp => "exp",
            UnaryOp::Sin => "sin",
            UnaryOp::Cos => "cos",
            UnaryOp::Sqrt => "sqrt",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinaryOp {
    Add,
    Sub,
    Mul,
    Div,
}

impl BinaryOp {
    fn symbol(self) -> char {
        match self {
            BinaryOp::Add => '+',
            BinaryOp::Sub => '-',
            BinaryOp::Mul => '*',
            BinaryOp::Div => '/',
        }
    }
}

/// Expression tree node.
#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Const(f64),
    Time,
    Unary(UnaryOp, Box<Node>),
    Binary(BinaryOp, Box<Node>, Box<Node>),
    Pow(Box<Node>, u32),
}

impl Node {
    fn eval<T: Scalar>(&self, t: T) -> Result<T, ExprError> {
        let domain = |message: &str| ExprError::Domain {
            t: to_f64(t),
            message: message.to_string(),
        };
        let value = match self {
            Node::Const(c) => lit(*c),
            Node::Time => t,
            Node::Unary(op, arg) => {
                let x = arg.eval(t)?;
                match op {
                    UnaryOp::Neg => -x,
                    UnaryOp::Abs => x.abs(),
                    UnaryOp::Exp => x.exp(),
                    UnaryOp::Sin => x.sin(),
                    UnaryOp::Cos => x.cos(),
                    UnaryOp::Sqrt => {
                        if x < T::zero() {
                            return Err(domain("sqrt of a negative number"));
                        }
                        x.sqrt()
                    }
                }
            }
            Node::Binary(op, lhs, rhs) => {
                let a = lhs.eval(t)?;
                let b = rhs.eval(t)?;
                match op {
                    BinaryOp::Add => a + b,
                    BinaryOp::Sub => a - b,
                    BinaryOp::Mul => a * b,
                    BinaryOp::Div => {
                        if b == T::zero() {
                            return Err(domain("division by zero"));
                        }
                        a / b
                    }
                }
            }
            Node::Pow(base, n) => {
                let b = base.eval(t)?;
                b.powi(*n as i32)
            }
        };
        if value.is_finite() {
            Ok(value)
        } else {
            Err(domain("non-finite result"))
        }
    }

    /// Value at `t`; domain errors as for [`CoefficientExpr::evaluate`].
    pub fn evaluate<T: Scalar>(&self, t: T) -> Result<T, ExprError> {
        self.eval(t)
    }

    /// Time-dependent arguments of every `abs` in the tree. Their sign changes
    /// are where the expression may lose differentiability.
    pub fn abs_arguments(&self) -> Vec<&Node> {
        let mut out = Vec::new();
        self.collect_abs(&mut out);
        out
    }

    fn collect_abs<'a>(&'a self, out: &mut Vec<&'a Node>) {
        match self {
            Node::Const(_) | Node::Time => {}
            Node::Unary(op, a) => {
                if *op == UnaryOp::Abs && a.depends_on_time() {
                    out.push(a);
                }
                a.collect_abs(out);
            }
            Node::Pow(a, _) => a.collect_abs(out),
            Node::Binary(_, a, b) => {
                a.collect_abs(out);
                b.collect_abs(out);
            }
        }
    }

    fn depends_on_time(&self) -> bool {
        match self {
            Node::Const(_) => false,
            Node::Time => true,
            Node::Unary(_, a) | Node::Pow(a, _) => a.depends_on_time(),
            Node::Binary(_, a, b) => a.depends_on_time() || b.depends_on_time(),
        }
    }
}

impl fmt::Display for Node {
    /// Fully parenthesized canonical form. `f64` display is shortest round-trip,
    /// so re-parsing reproduces every constant bit for bit.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Node::Const(c) if *c < 0.0 => write!(f, "(-{})", -c),
            Node::Const(c) => write!(f, "{c}"),
            Node::Time => write!(f, "t"),
            Node::Unary(UnaryOp::Neg, a) => write!(f, "(-{a})"),
            Node::Unary(op, a) => write!(f, "{}({a})", op.name()),
            Node::Binary(op, a, b) => write!(f, "({a} {} {b})", op.symbol()),
            Node::Pow(a, n) => write!(f, "({a}^{n})"),
        }
    }
}

/// A parsed time-varying coefficient together with the text it came from.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientExpr {
    root: Node,
    source_text: String,
}

impl CoefficientExpr {
    pub fn parse(text: &str) -> Result<Self, ExprError> {
        parse_expression(text)
    }

    /// The constant expression `value`.
    pub fn constant(value: f64) -> Self {
        CoefficientExpr {
            root: Node::Const(value),
            source_text: format!("{value}"),
        }
    }

    pub fn root(&self) -> &Node {
        &self.root
    }

    pub fn source_text(&self) -> &str {
        &self.source_text
    }

    pub fn evaluate<T: Scalar>(&self, t: T) -> Result<T, ExprError> {
        self.root.eval(t)
    }

    /// Value of the expression when it does not depend on `t`.
    pub fn as_constant(&self) -> Option<f64> {
        if self.root.depends_on_time() {
            None
        } else {
            self.root.eval(0.0f64).ok()
        }
    }

    /// Canonical text that parses back to an identically evaluating expression.
    pub fn serialize(&self) -> String {
        self.root.to_string()
    }
}

impl fmt::Display for CoefficientExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.source_text)
    }
}

impl std::str::FromStr for CoefficientExpr {
    type Err = ExprError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_expression(s)
    }
}

pub fn parse_expression(text: &str) -> Result<CoefficientExpr, ExprError> {
    let root = parser::Parser::new(text).parse()?;
    Ok(CoefficientExpr {
        root,
        source_text: text.to_string(),
    })
}

pub fn evaluate<T: Scalar>(expr: &CoefficientExpr, t: T) -> Result<T, ExprError> {
    expr.evaluate(t)
}
