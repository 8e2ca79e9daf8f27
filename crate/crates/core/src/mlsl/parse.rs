//! Concrete syntax for formulas.
//!
//! ```text
//! chop  := or (';' or)*                 right-nested
//! or    := and ('|' and)*
//! and   := unary ('&' unary)*
//! unary := '!' unary | 'exists' IDENT '.' chop | atom
//! atom  := 'true' | 'free' | 're' '(' IDENT ')' | 'cl' '(' IDENT ')'
//!        | IDENT '=' IDENT | IDENT '!=' IDENT
//!        | '(' chop ')' | '[' chop '/' chop ']' | '<' chop '>'
//! ```
//!
//! The vertical chop lists the upper formula first. `<φ>` is the
//! "somewhere" abbreviation.

use thiserror::Error;

use super::formula::{Formula, Sort};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("syntax error at offset {pos}: {message}")]
pub struct ParseError {
    pub pos: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    Ident(String),
    LParen,
    RParen,
    LBrack,
    RBrack,
    Slash,
    Lt,
    Gt,
    Bang,
    Amp,
    Bar,
    Semi,
    Eq,
    Neq,
    Dot,
    End,
}

fn lex(src: &str) -> Result<Vec<(usize, Tok)>, ParseError> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        let start = i;
        let tok = match c {
            '(' => Tok::LParen,
            ')' => Tok::RParen,
            '[' => Tok::LBrack,
            ']' => Tok::RBrack,
            '/' => Tok::Slash,
            '<' => Tok::Lt,
            '>' => Tok::Gt,
            '&' => Tok::Amp,
            '|' => Tok::Bar,
            ';' => Tok::Semi,
            '=' => Tok::Eq,
            '.' => Tok::Dot,
            '!' if bytes.get(i + 1) == Some(&b'=') => {
                i += 1;
                Tok::Neq
            }
            '!' => Tok::Bang,
            c if c.is_ascii_alphabetic() || c == '_' => {
                while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_' || bytes[i] == b'\'') {
                    i += 1;
                }
                out.push((start, Tok::Ident(src[start..i].to_string())));
                continue;
            }
            other => return Err(ParseError { pos: i, message: format!("unexpected character {other:?}") }),
        };
        i += 1;
        out.push((start, tok));
    }
    out.push((src.len(), Tok::End));
    Ok(out)
}

struct Parser {
    toks: Vec<(usize, Tok)>,
    at: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.at].1
    }

    fn pos(&self) -> usize {
        self.toks[self.at].0
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.at].1.clone();
        if t != Tok::End {
            self.at += 1;
        }
        t
    }

    fn err<T>(&self, message: impl Into<String>) -> Result<T, ParseError> {
        Err(ParseError { pos: self.pos(), message: message.into() })
    }

    fn expect(&mut self, tok: Tok, what: &str) -> Result<(), ParseError> {
        if *self.peek() == tok {
            self.bump();
            Ok(())
        } else {
            self.err(format!("expected {what}"))
        }
    }

    fn ident(&mut self) -> Result<String, ParseError> {
        match self.peek().clone() {
            Tok::Ident(name) if !is_keyword(&name) => {
                self.bump();
                Ok(name)
            }
            _ => self.err("expected a variable"),
        }
    }

    fn car_var(&mut self) -> Result<String, ParseError> {
        let pos = self.pos();
        let name = self.ident()?;
        if Sort::of(&name) != Sort::Car {
            return Err(ParseError { pos, message: format!("`{name}` is a lane variable, expected a car") });
        }
        Ok(name)
    }

    fn chop(&mut self) -> Result<Formula, ParseError> {
        let lhs = self.or()?;
        if *self.peek() == Tok::Semi {
            self.bump();
            let rhs = self.chop()?;
            return Ok(lhs.hchop(rhs));
        }
        Ok(lhs)
    }

    fn or(&mut self) -> Result<Formula, ParseError> {
        let mut lhs = self.and()?;
        while *self.peek() == Tok::Bar {
            self.bump();
            lhs = lhs.or(self.and()?);
        }
        Ok(lhs)
    }

    fn and(&mut self) -> Result<Formula, ParseError> {
        let mut lhs = self.unary()?;
        while *self.peek() == Tok::Amp {
            self.bump();
            lhs = lhs.and(self.unary()?);
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Formula, ParseError> {
        match self.peek() {
            Tok::Bang => {
                self.bump();
                Ok(self.unary()?.not())
            }
            Tok::Ident(k) if k == "exists" => {
                self.bump();
                let var = self.car_var()?;
                self.expect(Tok::Dot, "`.` after the quantified variable")?;
                let body = self.chop()?;
                Ok(Formula::ExistsCar(var, Box::new(body)))
            }
            _ => self.atom(),
        }
    }

    fn atom(&mut self) -> Result<Formula, ParseError> {
        let pos = self.pos();
        match self.bump() {
            Tok::Ident(k) if k == "true" => Ok(Formula::True),
            Tok::Ident(k) if k == "free" => Ok(Formula::Free),
            Tok::Ident(k) if k == "re" || k == "cl" => {
                self.expect(Tok::LParen, "`(`")?;
                let c = self.car_var()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(if k == "re" { Formula::Re(c) } else { Formula::Cl(c) })
            }
            Tok::Ident(u) if !is_keyword(&u) => {
                let negate = match self.bump() {
                    Tok::Eq => false,
                    Tok::Neq => true,
                    _ => {
                        return Err(ParseError {
                            pos: self.toks[self.at - 1].0,
                            message: "expected `=` or `!=`".into(),
                        })
                    }
                };
                let v = self.ident()?;
                if Sort::of(&u) != Sort::of(&v) {
                    return Err(ParseError {
                        pos,
                        message: format!("cannot compare `{u}` and `{v}`: different variable sorts"),
                    });
                }
                let eq = Formula::VarEq(u, v);
                Ok(if negate { eq.not() } else { eq })
            }
            Tok::LParen => {
                let f = self.chop()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(f)
            }
            Tok::LBrack => {
                let upper = self.chop()?;
                self.expect(Tok::Slash, "`/` between the upper and lower formula")?;
                let lower = self.chop()?;
                self.expect(Tok::RBrack, "`]`")?;
                Ok(Formula::vchop(lower, upper))
            }
            Tok::Lt => {
                let f = self.chop()?;
                self.expect(Tok::Gt, "`>`")?;
                Ok(f.somewhere())
            }
            Tok::End => Err(ParseError { pos, message: "unexpected end of input".into() }),
            _ => Err(ParseError { pos, message: "expected a formula".into() }),
        }
    }
}

fn is_keyword(s: &str) -> bool {
    matches!(s, "true" | "free" | "re" | "cl" | "exists")
}

pub fn parse(text: &str) -> Result<Formula, ParseError> {
    let mut p = Parser { toks: lex(text)?, at: 0 };
    let f = p.chop()?;
    if *p.peek() != Tok::End {
        return p.err("trailing input");
    }
    Ok(f)
}
