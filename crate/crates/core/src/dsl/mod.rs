//! The model definition language: lexer, parser, and type checker.
//!
//! A model file (`.ispk`) holds one definition:
//!
//! ```text
//! model TwoCoins(alpha: Double, beta: Double) {
//!   val pi = Beta(alpha)
//!   val phi = (0 until 2).map { _ => Beta(beta) }
//!   val z = ?.map { _ => Categorical(pi) }
//!   val x = z.map { z => Categorical(phi(z)) }
//! }
//! ```
//!
//! `Beta(a)` is the symmetric Beta(a, a); `Dirichlet(a, K)` is the
//! symmetric K-dimensional Dirichlet. `?` is a plate whose size is bound
//! at run time, either explicitly or by counting observations.

pub mod ast;
pub mod parser;
pub mod token;
pub mod typeck;

pub use ast::{Expr, ExprKind, Ident, Loc, ModelAst, Param, ScalarKind, ValueBinding};
pub use parser::{parse_model, ParseError};
pub use token::{tokenize, Token, TokenKind};
pub use typeck::{check_types, Binding, Category, TypeError, TypeErrorKind, TypedModel};
