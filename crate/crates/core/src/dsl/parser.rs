//! Recursive descent parser for model definitions.
//!
//! Grammar sketch (statement level):
//!
//! ```text
//! model      ::= 'model' id '(' [param {',' param}] ')' '{' {stmt [';']} '}'
//! param      ::= id ':' ('Long' | 'Double')
//! stmt       ::= 'val' id '=' expr
//! expr       ::= additive [('until' | 'to') additive]
//! additive   ::= mult {('+' | '-') mult}
//! mult       ::= unary {('*' | '/') unary}
//! unary      ::= ('+' | '-') unary | postfix
//! postfix    ::= primary {'.' 'map' lambda | '(' expr ')'}
//! primary    ::= literal | id | '?' | '(' expr ')' | '{' {stmt [';']} expr '}'
//!              | 'Dirichlet' '(' expr ',' expr ')' | 'Beta' '(' expr ')'
//!              | 'Categorical' '(' expr ')'
//! lambda     ::= '(' binder '=>' expr ')' | '{' binder '=>' expr '}'
//! binder     ::= id | '_'
//! ```
//!
//! The parser stops at the first violation and reports the set of expected
//! tokens. Zip/tuple constructs, which show up in model definitions written
//! against richer host languages, get a dedicated diagnostic.

use thiserror::Error;

use super::ast::*;
use super::token::{tokenize, Loc, Token, TokenKind};

#[derive(Debug, Error, Clone, PartialEq)]
#[error("{loc}: {message}")]
pub struct ParseError {
    pub loc: Loc,
    /// Token kinds that would have been accepted at this point.
    pub expected: Vec<String>,
    pub found: String,
    pub message: String,
}

impl ParseError {
    fn new(loc: Loc, expected: Vec<String>, found: String) -> Self {
        let message = if expected.is_empty() {
            format!("unexpected {found}")
        } else {
            format!("expected {}, found {}", expected.join(" or "), found)
        };
        Self {
            loc,
            expected,
            found,
            message,
        }
    }

    fn custom(loc: Loc, message: impl Into<String>) -> Self {
        Self {
            loc,
            expected: Vec::new(),
            found: String::new(),
            message: message.into(),
        }
    }
}

/// Parse a complete model definition.
pub fn parse_model(source: &str) -> Result<ModelAst, ParseError> {
    Parser::new(source).model()
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
    next_expr_id: ExprId,
}

impl Parser {
    fn new(source: &str) -> Self {
        Self {
            tokens: tokenize(source),
            pos: 0,
            next_expr_id: 0,
        }
    }

    fn peek(&self) -> &Token {
        &self.tokens[self.pos.min(self.tokens.len() - 1)]
    }

    fn peek2(&self) -> &Token {
        &self.tokens[(self.pos + 1).min(self.tokens.len() - 1)]
    }

    fn bump(&mut self) -> Token {
        let t = self.peek().clone();
        if self.pos < self.tokens.len() - 1 {
            self.pos += 1;
        }
        t
    }

    fn eat(&mut self, kind: &TokenKind) -> bool {
        if &self.peek().kind == kind {
            self.bump();
            true
        } else {
            false
        }
    }

    fn expect(&mut self, kind: TokenKind) -> Result<Token, ParseError> {
        if self.peek().kind == kind {
            Ok(self.bump())
        } else {
            Err(self.unexpected(&[kind.to_string()]))
        }
    }

    fn expect_ident(&mut self, what: &str) -> Result<(Ident, Loc), ParseError> {
        let t = self.peek().clone();
        if let TokenKind::Ident(name) = t.kind {
            self.bump();
            Ok((name, t.loc))
        } else {
            Err(self.unexpected(&[what.to_string()]))
        }
    }

    fn unexpected(&self, expected: &[String]) -> ParseError {
        let t = self.peek();
        ParseError::new(t.loc, expected.to_vec(), t.kind.to_string())
    }

    fn mk(&mut self, loc: Loc, kind: ExprKind) -> Expr {
        let id = self.next_expr_id;
        self.next_expr_id += 1;
        Expr { id, loc, kind }
    }

    fn model(&mut self) -> Result<ModelAst, ParseError> {
        self.expect(TokenKind::KwModel)?;
        let (name, _) = self.expect_ident("model name")?;
        self.expect(TokenKind::LParen)?;
        let mut params = Vec::new();
        if self.peek().kind != TokenKind::RParen {
            loop {
                let (pname, loc) = self.expect_ident("parameter name")?;
                self.expect(TokenKind::Colon)?;
                let (tname, tloc) = self.expect_ident("`Long` or `Double`")?;
                let kind = match tname.as_str() {
                    "Long" => ScalarKind::Long,
                    "Double" => ScalarKind::Double,
                    other => {
                        return Err(ParseError::new(
                            tloc,
                            vec!["`Long`".into(), "`Double`".into()],
                            format!("identifier `{other}`"),
                        ))
                    }
                };
                params.push(Param {
                    name: pname,
                    kind,
                    loc,
                });
                if !self.eat(&TokenKind::Comma) {
                    break;
                }
            }
        }
        self.expect(TokenKind::RParen)?;
        self.expect(TokenKind::LBrace)?;
        let stmts = self.stmts()?;
        self.expect(TokenKind::RBrace)?;
        self.expect(TokenKind::Eof)?;
        Ok(ModelAst {
            name,
            params,
            stmts,
            expr_count: self.next_expr_id,
        })
    }

    fn stmts(&mut self) -> Result<Vec<ValueBinding>, ParseError> {
        let mut stmts = Vec::new();
        loop {
            while self.eat(&TokenKind::Semi) {}
            if self.peek().kind != TokenKind::KwVal {
                return Ok(stmts);
            }
            let loc = self.bump().loc; // `val`
            let (name, _) = self.expect_ident("binding name")?;
            self.expect(TokenKind::Eq)?;
            let value = self.expr()?;
            stmts.push(ValueBinding { name, value, loc });
        }
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let lo = self.additive()?;
        let kind = match self.peek().kind {
            TokenKind::KwUntil => RangeKind::Until,
            TokenKind::KwTo => RangeKind::To,
            _ => return Ok(lo),
        };
        let loc = self.bump().loc;
        let hi = self.additive()?;
        Ok(self.mk(
            loc,
            ExprKind::Range {
                kind,
                lo: Box::new(lo),
                hi: Box::new(hi),
            },
        ))
    }

    fn additive(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.multiplicative()?;
        loop {
            let op = match self.peek().kind {
                TokenKind::Plus => BinOp::Add,
                TokenKind::Minus => BinOp::Sub,
                _ => return Ok(lhs),
            };
            let loc = self.bump().loc;
            let rhs = self.multiplicative()?;
            lhs = self.mk(loc, ExprKind::Binary(op, Box::new(lhs), Box::new(rhs)));
        }
    }

    fn multiplicative(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek().kind {
                TokenKind::Star => BinOp::Mul,
                TokenKind::Slash => BinOp::Div,
                _ => return Ok(lhs),
            };
            let loc = self.bump().loc;
            let rhs = self.unary()?;
            lhs = self.mk(loc, ExprKind::Binary(op, Box::new(lhs), Box::new(rhs)));
        }
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        let op = match self.peek().kind {
            TokenKind::Plus => Some(UnaryOp::Plus),
            TokenKind::Minus => Some(UnaryOp::Neg),
            _ => None,
        };
        if let Some(op) = op {
            let loc = self.bump().loc;
            let operand = self.unary()?;
            return Ok(self.mk(loc, ExprKind::Unary(op, Box::new(operand))));
        }
        self.postfix()
    }

    fn postfix(&mut self) -> Result<Expr, ParseError> {
        let mut expr = self.primary()?;
        loop {
            match self.peek().kind {
                TokenKind::Dot => {
                    let dot_loc = self.peek().loc;
                    self.bump();
                    let (method, mloc) = self.expect_ident("`map`")?;
                    match method.as_str() {
                        "map" => {
                            let (binder, body) = self.lambda()?;
                            expr = self.mk(
                                dot_loc,
                                ExprKind::Map {
                                    receiver: Box::new(expr),
                                    binder,
                                    body: Box::new(body),
                                },
                            );
                        }
                        "zip" => {
                            return Err(ParseError::custom(
                                mloc,
                                "`zip` and tuple patterns are not part of the model grammar; \
                                 express the pairing through plate structure instead",
                            ))
                        }
                        other => {
                            return Err(ParseError::new(
                                mloc,
                                vec!["`map`".into()],
                                format!("identifier `{other}`"),
                            ))
                        }
                    }
                }
                TokenKind::LParen => {
                    // RVArgList: one argument per parenthesized list.
                    self.bump();
                    let arg = self.expr()?;
                    if self.peek().kind == TokenKind::Comma {
                        return Err(ParseError::custom(
                            self.peek().loc,
                            "an indexed random variable takes one index per argument list, \
                             as in `phi(z)`",
                        ));
                    }
                    self.expect(TokenKind::RParen)?;
                    expr = match expr.kind {
                        ExprKind::Index { target, mut args } => {
                            args.push(arg);
                            self.mk(expr.loc, ExprKind::Index { target, args })
                        }
                        _ => {
                            let loc = expr.loc;
                            self.mk(
                                loc,
                                ExprKind::Index {
                                    target: Box::new(expr),
                                    args: vec![arg],
                                },
                            )
                        }
                    };
                }
                _ => return Ok(expr),
            }
        }
    }

    fn lambda(&mut self) -> Result<(Option<Ident>, Expr), ParseError> {
        let (open, close) = match self.peek().kind {
            TokenKind::LParen => (TokenKind::LParen, TokenKind::RParen),
            TokenKind::LBrace => (TokenKind::LBrace, TokenKind::RBrace),
            _ => return Err(self.unexpected(&["`(`".into(), "`{`".into()])),
        };
        self.bump();
        let _ = open;
        let binder = match self.peek().kind.clone() {
            TokenKind::Underscore => {
                self.bump();
                None
            }
            TokenKind::Ident(name) if name == "case" => {
                return Err(ParseError::custom(
                    self.peek().loc,
                    "`case` tuple patterns are not part of the model grammar",
                ))
            }
            TokenKind::Ident(name) => {
                self.bump();
                Some(name)
            }
            TokenKind::LParen => {
                return Err(ParseError::custom(
                    self.peek().loc,
                    "tuple patterns are not part of the model grammar; \
                     bind a single name and index through plate structure",
                ))
            }
            _ => return Err(self.unexpected(&["binder name".into(), "`_`".into()])),
        };
        self.expect(TokenKind::FatArrow)?;
        let body = self.expr()?;
        self.expect(close)?;
        Ok((binder, body))
    }

    fn primary(&mut self) -> Result<Expr, ParseError> {
        let t = self.peek().clone();
        match t.kind {
            TokenKind::Int(v) => {
                self.bump();
                Ok(self.mk(t.loc, ExprKind::IntLit(v)))
            }
            TokenKind::Float(v) => {
                self.bump();
                Ok(self.mk(t.loc, ExprKind::FloatLit(v)))
            }
            TokenKind::Question => {
                self.bump();
                Ok(self.mk(t.loc, ExprKind::UnknownPlate))
            }
            TokenKind::Ident(name) => match name.as_str() {
                "Dirichlet" if self.peek2().kind == TokenKind::LParen => {
                    self.bump();
                    self.expect(TokenKind::LParen)?;
                    let concentration = self.expr()?;
                    self.expect(TokenKind::Comma)?;
                    let dim = self.expr()?;
                    self.expect(TokenKind::RParen)?;
                    Ok(self.mk(
                        t.loc,
                        ExprKind::Dirichlet {
                            concentration: Box::new(concentration),
                            dim: Box::new(dim),
                        },
                    ))
                }
                "Beta" if self.peek2().kind == TokenKind::LParen => {
                    self.bump();
                    self.expect(TokenKind::LParen)?;
                    let concentration = self.expr()?;
                    self.expect(TokenKind::RParen)?;
                    Ok(self.mk(
                        t.loc,
                        ExprKind::Beta {
                            concentration: Box::new(concentration),
                        },
                    ))
                }
                "Categorical" if self.peek2().kind == TokenKind::LParen => {
                    self.bump();
                    self.expect(TokenKind::LParen)?;
                    let arg = self.expr()?;
                    self.expect(TokenKind::RParen)?;
                    Ok(self.mk(
                        t.loc,
                        ExprKind::Categorical { arg: Box::new(arg) },
                    ))
                }
                _ => {
                    self.bump();
                    Ok(self.mk(t.loc, ExprKind::Var(name)))
                }
            },
            TokenKind::LParen => {
                self.bump();
                let inner = self.expr()?;
                self.expect(TokenKind::RParen)?;
                Ok(inner)
            }
            TokenKind::LBrace => {
                self.bump();
                let stmts = self.stmts()?;
                let tail = self.expr()?;
                while self.eat(&TokenKind::Semi) {}
                self.expect(TokenKind::RBrace)?;
                Ok(self.mk(
                    t.loc,
                    ExprKind::Block {
                        stmts,
                        tail: Box::new(tail),
                    },
                ))
            }
            _ => Err(self.unexpected(&["expression".into()])),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const TWO_COINS: &str = "\
model TwoCoins(alpha: Double, beta: Double) {
  val pi = Beta(alpha)
  val phi = (0 until 2).map { _ => Beta(beta) }
  val z = ?.map { _ => Categorical(pi) }
  val x = z.map { z => Categorical(phi(z)) }
}";

    const LDA: &str = "\
model LDA(K: Long, V: Long, alpha: Double, beta: Double) {
  val phi = (0L until K).map { _ => Dirichlet(beta, K) }
  val theta = ?.map { _ => Dirichlet(alpha, K) }
  val z = theta.map { theta => ?.map { _ => Categorical(theta) } }
  val x = z.map { zs => zs.map { z => Categorical(phi(z)) } }
}";

    #[test]
    fn parses_two_coins() {
        let ast = parse_model(TWO_COINS).unwrap();
        assert_eq!(ast.name, "TwoCoins");
        let names: Vec<_> = ast.stmts.iter().map(|s| s.name.as_str()).collect();
        assert_eq!(names, ["pi", "phi", "z", "x"]);
    }

    #[test]
    fn parses_lda() {
        let ast = parse_model(LDA).unwrap();
        let names: Vec<_> = ast.stmts.iter().map(|s| s.name.as_str()).collect();
        assert_eq!(names, ["phi", "theta", "z", "x"]);
    }

    #[test]
    fn incomplete_expression_errors_at_brace() {
        let err = parse_model("model M() { val x = }").unwrap_err();
        assert_eq!(err.loc.col, 21);
        assert!(!err.expected.is_empty());
    }

    #[test]
    fn pretty_print_roundtrip() {
        for src in [TWO_COINS, LDA] {
            let ast = parse_model(src).unwrap();
            let printed = ast.to_string();
            let reparsed = parse_model(&printed).unwrap();
            assert!(
                ast.same_structure(&reparsed),
                "round-trip changed structure:\n{printed}"
            );
        }
    }

    #[test]
    fn parse_is_deterministic() {
        let a = parse_model(TWO_COINS).unwrap();
        let b = parse_model(TWO_COINS).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn zip_gets_dedicated_diagnostic() {
        let src = "model M() { val a = ?.map { _ => Beta(1.0) }\nval b = a.zip(a) }";
        let err = parse_model(src).unwrap_err();
        assert!(err.message.contains("zip"), "{}", err.message);
    }

    #[test]
    fn tuple_pattern_gets_dedicated_diagnostic() {
        let src = "model M() { val a = ?.map { (x, y) => Beta(1.0) } }";
        let err = parse_model(src).unwrap_err();
        assert!(err.message.contains("tuple"), "{}", err.message);
    }

    #[test]
    fn long_suffix_and_lambda_forms() {
        let a = parse_model("model M(K: Long) { val p = (0L until K).map(i => Beta(1.0)) }");
        let b = parse_model("model M(K: Long) { val p = (0 until K).map { i => Beta(1.0) } }");
        assert!(a.unwrap().same_structure(&b.unwrap()));
    }

    #[test]
    fn unknown_character_is_parse_error() {
        let err = parse_model("model M() { val x = @ }").unwrap_err();
        assert_eq!(err.loc.col, 21);
    }

    #[test]
    fn block_expressions_parse() {
        let src = "model M(a: Double) { val x = { val c = a + 1.0; Beta(c) } }";
        let ast = parse_model(src).unwrap();
        assert!(matches!(
            ast.stmts[0].value.kind,
            ExprKind::Block { .. }
        ));
    }
}
