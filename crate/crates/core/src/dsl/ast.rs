//! Abstract syntax tree for model definitions.
//!
//! The parser produces a surface AST; classification of expressions into
//! deterministic / random-variable / plate categories happens in the type
//! checker, because a bare identifier cannot be classified syntactically.

use std::fmt;

pub use super::token::Loc;

pub type Ident = String;

/// Index of an expression node, assigned in parse order. Used to attach
/// type-checker annotations without mutating the tree.
pub type ExprId = usize;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScalarKind {
    Long,
    Double,
}

impl fmt::Display for ScalarKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ScalarKind::Long => write!(f, "Long"),
            ScalarKind::Double => write!(f, "Double"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Param {
    pub name: Ident,
    pub kind: ScalarKind,
    pub loc: Loc,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelAst {
    pub name: Ident,
    pub params: Vec<Param>,
    pub stmts: Vec<ValueBinding>,
    /// Total number of expression nodes (exclusive upper bound of ExprId).
    pub expr_count: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValueBinding {
    pub name: Ident,
    pub value: Expr,
    pub loc: Loc,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
}

impl fmt::Display for BinOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BinOp::Add => write!(f, "+"),
            BinOp::Sub => write!(f, "-"),
            BinOp::Mul => write!(f, "*"),
            BinOp::Div => write!(f, "/"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnaryOp {
    Plus,
    Neg,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RangeKind {
    /// `lo until hi`, half-open.
    Until,
    /// `lo to hi`, inclusive.
    To,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Expr {
    pub id: ExprId,
    pub loc: Loc,
    pub kind: ExprKind,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ExprKind {
    IntLit(i64),
    FloatLit(f64),
    Var(Ident),
    Unary(UnaryOp, Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
    Range {
        kind: RangeKind,
        lo: Box<Expr>,
        hi: Box<Expr>,
    },
    /// `?`, a plate of unknown size.
    UnknownPlate,
    /// `Dirichlet(concentration, dim)`: symmetric Dirichlet.
    Dirichlet {
        concentration: Box<Expr>,
        dim: Box<Expr>,
    },
    /// `Beta(concentration)`: symmetric Beta, a 2-dimensional Dirichlet.
    Beta { concentration: Box<Expr> },
    Categorical { arg: Box<Expr> },
    /// Indexed application `rv(a)(b)...`; one argument per argument list.
    Index {
        target: Box<Expr>,
        args: Vec<Expr>,
    },
    /// `receiver.map(binder => body)`; `binder` is `None` for `_`.
    Map {
        receiver: Box<Expr>,
        binder: Option<Ident>,
        body: Box<Expr>,
    },
    /// `{ stmts; tail }`
    Block {
        stmts: Vec<ValueBinding>,
        tail: Box<Expr>,
    },
}

impl Expr {
    fn fmt_prec(&self, f: &mut fmt::Formatter<'_>, prec: u8) -> fmt::Result {
        // Precedence levels: 0 range, 1 additive, 2 multiplicative, 3 unary,
        // 4 postfix/primary.
        let own = match &self.kind {
            ExprKind::Range { .. } => 0,
            ExprKind::Binary(BinOp::Add | BinOp::Sub, ..) => 1,
            ExprKind::Binary(BinOp::Mul | BinOp::Div, ..) => 2,
            ExprKind::Unary(..) => 3,
            _ => 4,
        };
        if own < prec {
            write!(f, "(")?;
        }
        match &self.kind {
            ExprKind::IntLit(v) => write!(f, "{v}")?,
            ExprKind::FloatLit(v) => {
                if v.fract() == 0.0 && v.is_finite() && v.abs() < 1e15 {
                    write!(f, "{v:.1}")?
                } else {
                    write!(f, "{v}")?
                }
            }
            ExprKind::Var(name) => write!(f, "{name}")?,
            ExprKind::Unary(op, e) => {
                write!(f, "{}", if *op == UnaryOp::Neg { "-" } else { "+" })?;
                e.fmt_prec(f, 3)?;
            }
            ExprKind::Binary(op, l, r) => {
                let (lp, rp) = match op {
                    BinOp::Add | BinOp::Sub => (1, 2),
                    BinOp::Mul | BinOp::Div => (2, 3),
                };
                l.fmt_prec(f, lp)?;
                write!(f, " {op} ")?;
                r.fmt_prec(f, rp)?;
            }
            ExprKind::Range { kind, lo, hi } => {
                lo.fmt_prec(f, 1)?;
                write!(
                    f,
                    " {} ",
                    if *kind == RangeKind::Until { "until" } else { "to" }
                )?;
                hi.fmt_prec(f, 1)?;
            }
            ExprKind::UnknownPlate => write!(f, "?")?,
            ExprKind::Dirichlet { concentration, dim } => {
                write!(f, "Dirichlet({concentration}, {dim})")?
            }
            ExprKind::Beta { concentration } => write!(f, "Beta({concentration})")?,
            ExprKind::Categorical { arg } => write!(f, "Categorical({arg})")?,
            ExprKind::Index { target, args } => {
                target.fmt_prec(f, 4)?;
                for a in args {
                    write!(f, "({a})")?;
                }
            }
            ExprKind::Map {
                receiver,
                binder,
                body,
            } => {
                receiver.fmt_prec(f, 4)?;
                let b = binder.as_deref().unwrap_or("_");
                write!(f, ".map {{ {b} => {body} }}")?;
            }
            ExprKind::Block { stmts, tail } => {
                write!(f, "{{ ")?;
                for s in stmts {
                    write!(f, "val {} = {}; ", s.name, s.value)?;
                }
                write!(f, "{tail} }}")?;
            }
        }
        if own < prec {
            write!(f, ")")?;
        }
        Ok(())
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.fmt_prec(f, 0)
    }
}

/// Pretty-prints the model as canonical source text. Reparsing the output
/// yields a structurally identical AST.
impl fmt::Display for ModelAst {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "model {}(", self.name)?;
        for (i, p) in self.params.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{}: {}", p.name, p.kind)?;
        }
        writeln!(f, ") {{")?;
        for s in &self.stmts {
            writeln!(f, "  val {} = {}", s.name, s.value)?;
        }
        write!(f, "}}")
    }
}

impl ModelAst {
    /// Structural equality ignoring locations and expression ids.
    pub fn same_structure(&self, other: &ModelAst) -> bool {
        fn expr_eq(a: &Expr, b: &Expr) -> bool {
            use ExprKind::*;
            match (&a.kind, &b.kind) {
                (IntLit(x), IntLit(y)) => x == y,
                (FloatLit(x), FloatLit(y)) => x == y,
                (Var(x), Var(y)) => x == y,
                (Unary(o1, e1), Unary(o2, e2)) => o1 == o2 && expr_eq(e1, e2),
                (Binary(o1, l1, r1), Binary(o2, l2, r2)) => {
                    o1 == o2 && expr_eq(l1, l2) && expr_eq(r1, r2)
                }
                (
                    Range {
                        kind: k1,
                        lo: l1,
                        hi: h1,
                    },
                    Range {
                        kind: k2,
                        lo: l2,
                        hi: h2,
                    },
                ) => k1 == k2 && expr_eq(l1, l2) && expr_eq(h1, h2),
                (UnknownPlate, UnknownPlate) => true,
                (
                    Dirichlet {
                        concentration: c1,
                        dim: d1,
                    },
                    Dirichlet {
                        concentration: c2,
                        dim: d2,
                    },
                ) => expr_eq(c1, c2) && expr_eq(d1, d2),
                (Beta { concentration: c1 }, Beta { concentration: c2 }) => expr_eq(c1, c2),
                (Categorical { arg: a1 }, Categorical { arg: a2 }) => expr_eq(a1, a2),
                (
                    Index {
                        target: t1,
                        args: a1,
                    },
                    Index {
                        target: t2,
                        args: a2,
                    },
                ) => {
                    expr_eq(t1, t2)
                        && a1.len() == a2.len()
                        && a1.iter().zip(a2).all(|(x, y)| expr_eq(x, y))
                }
                (
                    Map {
                        receiver: r1,
                        binder: b1,
                        body: e1,
                    },
                    Map {
                        receiver: r2,
                        binder: b2,
                        body: e2,
                    },
                ) => b1 == b2 && expr_eq(r1, r2) && expr_eq(e1, e2),
                (
                    Block {
                        stmts: s1,
                        tail: t1,
                    },
                    Block {
                        stmts: s2,
                        tail: t2,
                    },
                ) => {
                    s1.len() == s2.len()
                        && s1
                            .iter()
                            .zip(s2)
                            .all(|(x, y)| x.name == y.name && expr_eq(&x.value, &y.value))
                        && expr_eq(t1, t2)
                }
                _ => false,
            }
        }
        self.name == other.name
            && self.params.len() == other.params.len()
            && self
                .params
                .iter()
                .zip(&other.params)
                .all(|(a, b)| a.name == b.name && a.kind == b.kind)
            && self.stmts.len() == other.stmts.len()
            && self
                .stmts
                .iter()
                .zip(&other.stmts)
                .all(|(a, b)| a.name == b.name && expr_eq(&a.value, &b.value))
    }
}
