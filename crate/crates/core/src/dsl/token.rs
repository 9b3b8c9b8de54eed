//! Lexer for the model definition language.
//!
//! `//` comments and whitespace are discarded. Unknown characters become
//! error tokens carrying their location; the parser turns them into parse
//! errors. Numeric literals may carry a Scala-style `L` suffix, which is
//! accepted and ignored.

use std::fmt;

/// A source location, 1-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub struct Loc {
    pub line: u32,
    pub col: u32,
}

impl fmt::Display for Loc {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum TokenKind {
    KwModel,
    KwVal,
    KwUntil,
    KwTo,
    Ident(String),
    Int(i64),
    Float(f64),
    LParen,
    RParen,
    LBrace,
    RBrace,
    Eq,
    FatArrow,
    Dot,
    Comma,
    Colon,
    Semi,
    Plus,
    Minus,
    Star,
    Slash,
    Question,
    Underscore,
    /// An unrecognized character.
    Error(char),
    Eof,
}

impl fmt::Display for TokenKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TokenKind::KwModel => write!(f, "`model`"),
            TokenKind::KwVal => write!(f, "`val`"),
            TokenKind::KwUntil => write!(f, "`until`"),
            TokenKind::KwTo => write!(f, "`to`"),
            TokenKind::Ident(s) => write!(f, "identifier `{s}`"),
            TokenKind::Int(v) => write!(f, "integer `{v}`"),
            TokenKind::Float(v) => write!(f, "float `{v}`"),
            TokenKind::LParen => write!(f, "`(`"),
            TokenKind::RParen => write!(f, "`)`"),
            TokenKind::LBrace => write!(f, "`{{`"),
            TokenKind::RBrace => write!(f, "`}}`"),
            TokenKind::Eq => write!(f, "`=`"),
            TokenKind::FatArrow => write!(f, "`=>`"),
            TokenKind::Dot => write!(f, "`.`"),
            TokenKind::Comma => write!(f, "`,`"),
            TokenKind::Colon => write!(f, "`:`"),
            TokenKind::Semi => write!(f, "`;`"),
            TokenKind::Plus => write!(f, "`+`"),
            TokenKind::Minus => write!(f, "`-`"),
            TokenKind::Star => write!(f, "`*`"),
            TokenKind::Slash => write!(f, "`/`"),
            TokenKind::Question => write!(f, "`?`"),
            TokenKind::Underscore => write!(f, "`_`"),
            TokenKind::Error(c) => write!(f, "unexpected character `{c}`"),
            TokenKind::Eof => write!(f, "end of input"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Token {
    pub kind: TokenKind,
    pub loc: Loc,
}

/// Tokenize the full input. The token sequence always ends with `Eof` and
/// covers the entire source; lexical problems surface as `Error` tokens.
pub fn tokenize(source: &str) -> Vec<Token> {
    Lexer::new(source).run()
}

struct Lexer<'a> {
    chars: std::iter::Peekable<std::str::Chars<'a>>,
    line: u32,
    col: u32,
}

impl<'a> Lexer<'a> {
    fn new(source: &'a str) -> Self {
        Self {
            chars: source.chars().peekable(),
            line: 1,
            col: 1,
        }
    }

    fn loc(&self) -> Loc {
        Loc {
            line: self.line,
            col: self.col,
        }
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.chars.next()?;
        if c == '\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
        Some(c)
    }

    fn peek(&mut self) -> Option<char> {
        self.chars.peek().copied()
    }

    fn run(mut self) -> Vec<Token> {
        let mut tokens = Vec::new();
        loop {
            // Skip whitespace and line comments.
            loop {
                match self.peek() {
                    Some(c) if c.is_whitespace() => {
                        self.bump();
                    }
                    Some('/') => {
                        let mut ahead = self.chars.clone();
                        ahead.next();
                        if ahead.peek() == Some(&'/') {
                            while let Some(c) = self.peek() {
                                if c == '\n' {
                                    break;
                                }
                                self.bump();
                            }
                        } else {
                            break;
                        }
                    }
                    _ => break,
                }
            }
            let loc = self.loc();
            let Some(c) = self.peek() else {
                tokens.push(Token {
                    kind: TokenKind::Eof,
                    loc,
                });
                return tokens;
            };
            let kind = match c {
                '(' => self.single(TokenKind::LParen),
                ')' => self.single(TokenKind::RParen),
                '{' => self.single(TokenKind::LBrace),
                '}' => self.single(TokenKind::RBrace),
                '.' => self.single(TokenKind::Dot),
                ',' => self.single(TokenKind::Comma),
                ':' => self.single(TokenKind::Colon),
                ';' => self.single(TokenKind::Semi),
                '+' => self.single(TokenKind::Plus),
                '-' => self.single(TokenKind::Minus),
                '*' => self.single(TokenKind::Star),
                '/' => self.single(TokenKind::Slash),
                '?' => self.single(TokenKind::Question),
                '=' => {
                    self.bump();
                    if self.peek() == Some('>') {
                        self.bump();
                        TokenKind::FatArrow
                    } else {
                        TokenKind::Eq
                    }
                }
                c if c.is_ascii_digit() => self.number(),
                c if c.is_alphabetic() || c == '_' => self.ident(),
                other => {
                    self.bump();
                    TokenKind::Error(other)
                }
            };
            tokens.push(Token { kind, loc });
        }
    }

    fn single(&mut self, kind: TokenKind) -> TokenKind {
        self.bump();
        kind
    }

    fn number(&mut self) -> TokenKind {
        let mut text = String::new();
        while matches!(self.peek(), Some(c) if c.is_ascii_digit()) {
            text.push(self.bump().unwrap());
        }
        let mut is_float = false;
        // A dot only belongs to the number when followed by a digit, so
        // `2.map` still lexes as `2` `.` `map`.
        if self.peek() == Some('.') {
            let mut ahead = self.chars.clone();
            ahead.next();
            if matches!(ahead.peek(), Some(c) if c.is_ascii_digit()) {
                is_float = true;
                text.push(self.bump().unwrap());
                while matches!(self.peek(), Some(c) if c.is_ascii_digit()) {
                    text.push(self.bump().unwrap());
                }
            }
        }
        if matches!(self.peek(), Some('e' | 'E')) {
            let mut ahead = self.chars.clone();
            ahead.next();
            let next = ahead.peek().copied();
            let has_exp = match next {
                Some(c) if c.is_ascii_digit() => true,
                Some('+' | '-') => {
                    ahead.next();
                    matches!(ahead.peek(), Some(c) if c.is_ascii_digit())
                }
                _ => false,
            };
            if has_exp {
                is_float = true;
                text.push(self.bump().unwrap());
                if matches!(self.peek(), Some('+' | '-')) {
                    text.push(self.bump().unwrap());
                }
                while matches!(self.peek(), Some(c) if c.is_ascii_digit()) {
                    text.push(self.bump().unwrap());
                }
            }
        }
        // Long-literal suffix, accepted and dropped.
        if !is_float && self.peek() == Some('L') {
            self.bump();
        }
        if is_float {
            TokenKind::Float(text.parse().expect("lexed float literal"))
        } else {
            match text.parse() {
                Ok(v) => TokenKind::Int(v),
                Err(_) => TokenKind::Float(text.parse().expect("lexed numeric literal")),
            }
        }
    }

    fn ident(&mut self) -> TokenKind {
        let mut text = String::new();
        while matches!(self.peek(), Some(c) if c.is_alphanumeric() || c == '_') {
            text.push(self.bump().unwrap());
        }
        match text.as_str() {
            "model" => TokenKind::KwModel,
            "val" => TokenKind::KwVal,
            "until" => TokenKind::KwUntil,
            "to" => TokenKind::KwTo,
            "_" => TokenKind::Underscore,
            _ => TokenKind::Ident(text),
        }
    }
}
