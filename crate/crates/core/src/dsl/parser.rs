//! Recursive-descent parser.
//!
//! ```text
//! line    := stmt (';' stmt)* ';'?
//! stmt    := 'out' ':' expr
//! expr    := term (('+' | '-') term)*
//! term    := unary (('*' | '/') unary)*
//! unary   := '-' unary | power
//! power   := primary ('^' exponent)?
//! exponent:= '-' exponent | power
//! primary := number | 's' '[' integer ']' | func '(' expr (',' expr)* ')' | '(' expr ')'
//! ```

use super::lexer::{lex_line, Tok, Token};
use super::{BinaryOp, DslError, Expr, ExprKind, Func, Span};

pub(super) fn parse_program(text: &str) -> Result<Vec<Expr>, DslError> {
    let mut outputs = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let tokens = lex_line(line, line_no)?;
        if tokens.is_empty() {
            continue;
        }
        let mut p = Parser {
            tokens,
            pos: 0,
            line: line_no,
            line_len: line.chars().count(),
        };
        loop {
            outputs.push(p.statement()?);
            if p.eat(&Tok::Semi) {
                if p.at_end() {
                    break;
                }
                continue;
            }
            if p.at_end() {
                break;
            }
            return Err(p.error_here("expected end of line or `;`"));
        }
    }
    if outputs.is_empty() {
        return Err(DslError::EmptyProgram);
    }
    Ok(outputs)
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
    line: usize,
    line_len: usize,
}

impl Parser {
    fn at_end(&self) -> bool {
        self.pos >= self.tokens.len()
    }

    fn peek(&self) -> Option<&Tok> {
        self.tokens.get(self.pos).map(|t| &t.tok)
    }

    fn col(&self) -> usize {
        self.tokens
            .get(self.pos)
            .map_or(self.line_len + 1, |t| t.col)
    }

    fn eat(&mut self, tok: &Tok) -> bool {
        if self.peek() == Some(tok) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn error_here(&self, message: &str) -> DslError {
        let found = match self.tokens.get(self.pos) {
            None => "end of line".to_string(),
            Some(t) => format!("`{}`", describe(&t.tok)),
        };
        DslError::Syntax {
            line: self.line,
            col: self.col(),
            message: format!("{message}, found {found}"),
        }
    }

    fn expect(&mut self, tok: &Tok, what: &str) -> Result<(), DslError> {
        if self.eat(tok) {
            Ok(())
        } else {
            Err(self.error_here(&format!("expected {what}")))
        }
    }

    fn span_from(&self, start_col: usize) -> Span {
        let end = self
            .tokens
            .get(self.pos.wrapping_sub(1))
            .map_or(start_col, |t| t.col + t.len);
        Span {
            line: self.line,
            col: start_col,
            len: end.saturating_sub(start_col),
        }
    }

    fn statement(&mut self) -> Result<Expr, DslError> {
        match self.peek() {
            Some(Tok::Ident(name)) if name == "out" => self.pos += 1,
            _ => return Err(self.error_here("expected `out:`")),
        }
        self.expect(&Tok::Colon, "`:` after `out`")?;
        self.expr()
    }

    fn expr(&mut self) -> Result<Expr, DslError> {
        let start = self.col();
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek() {
                Some(Tok::Plus) => BinaryOp::Add,
                Some(Tok::Minus) => BinaryOp::Sub,
                _ => return Ok(lhs),
            };
            self.pos += 1;
            let rhs = self.term()?;
            lhs = Expr {
                kind: ExprKind::Binary(op, Box::new(lhs), Box::new(rhs)),
                span: self.span_from(start),
            };
        }
    }

    fn term(&mut self) -> Result<Expr, DslError> {
        let start = self.col();
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek() {
                Some(Tok::Star) => BinaryOp::Mul,
                Some(Tok::Slash) => BinaryOp::Div,
                _ => return Ok(lhs),
            };
            self.pos += 1;
            let rhs = self.unary()?;
            lhs = Expr {
                kind: ExprKind::Binary(op, Box::new(lhs), Box::new(rhs)),
                span: self.span_from(start),
            };
        }
    }

    fn unary(&mut self) -> Result<Expr, DslError> {
        let start = self.col();
        if self.eat(&Tok::Minus) {
            let inner = self.unary()?;
            return Ok(Expr {
                kind: ExprKind::Neg(Box::new(inner)),
                span: self.span_from(start),
            });
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr, DslError> {
        let start = self.col();
        let base = self.primary()?;
        if self.eat(&Tok::Caret) {
            let exponent = self.exponent()?;
            return Ok(Expr {
                kind: ExprKind::Binary(BinaryOp::Pow, Box::new(base), Box::new(exponent)),
                span: self.span_from(start),
            });
        }
        Ok(base)
    }

    fn exponent(&mut self) -> Result<Expr, DslError> {
        let start = self.col();
        if self.eat(&Tok::Minus) {
            let inner = self.exponent()?;
            return Ok(Expr {
                kind: ExprKind::Neg(Box::new(inner)),
                span: self.span_from(start),
            });
        }
        self.power()
    }

    fn primary(&mut self) -> Result<Expr, DslError> {
        let start = self.col();
        let tok = match self.tokens.get(self.pos) {
            Some(t) => t.tok.clone(),
            None => return Err(self.error_here("expected an expression")),
        };
        match tok {
            Tok::Num(v) => {
                self.pos += 1;
                Ok(Expr {
                    kind: ExprKind::Const(v),
                    span: self.span_from(start),
                })
            }
            Tok::LParen => {
                self.pos += 1;
                let inner = self.expr()?;
                self.expect(&Tok::RParen, "`)`")?;
                Ok(inner)
            }
            Tok::Ident(name) if name == "s" => {
                self.pos += 1;
                self.expect(&Tok::LBracket, "`[` after `s`")?;
                let index = match self.peek() {
                    Some(Tok::Num(v)) if v.fract() == 0.0 && *v >= 0.0 && *v < 1e9 => *v as usize,
                    _ => return Err(self.error_here("expected a non-negative integer index")),
                };
                self.pos += 1;
                self.expect(&Tok::RBracket, "`]`")?;
                Ok(Expr {
                    kind: ExprKind::State(index),
                    span: self.span_from(start),
                })
            }
            Tok::Ident(name) => {
                let Some(func) = Func::from_name(&name) else {
                    return Err(DslError::Syntax {
                        line: self.line,
                        col: start,
                        message: format!("unknown function `{name}`"),
                    });
                };
                self.pos += 1;
                self.expect(&Tok::LParen, &format!("`(` after `{name}`"))?;
                let mut args = vec![self.expr()?];
                while self.eat(&Tok::Comma) {
                    args.push(self.expr()?);
                }
                if args.len() != func.arity() {
                    return Err(DslError::Syntax {
                        line: self.line,
                        col: start,
                        message: format!(
                            "`{name}` takes {} argument(s), got {}",
                            func.arity(),
                            args.len()
                        ),
                    });
                }
                self.expect(&Tok::RParen, "`)`")?;
                Ok(Expr {
                    kind: ExprKind::Call(func, args),
                    span: self.span_from(start),
                })
            }
            _ => Err(self.error_here("expected an expression")),
        }
    }
}

fn describe(tok: &Tok) -> String {
    match tok {
        Tok::Num(v) => v.to_string(),
        Tok::Ident(s) => s.clone(),
        Tok::LBracket => "[".into(),
        Tok::RBracket => "]".into(),
        Tok::LParen => "(".into(),
        Tok::RParen => ")".into(),
        Tok::Comma => ",".into(),
        Tok::Colon => ":".into(),
        Tok::Semi => ";".into(),
        Tok::Plus => "+".into(),
        Tok::Minus => "-".into(),
        Tok::Star => "*".into(),
        Tok::Slash => "/".into(),
        Tok::Caret => "^".into(),
    }
}
