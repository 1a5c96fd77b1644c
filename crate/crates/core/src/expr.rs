//! A small arithmetic expression language for user supplied coefficients and
//! nonlinearities.
//!
//! Supported: numbers, named variables, `+ - * /` (also `−`, `×`, `÷`), `^`
//! (right associative), unary minus, parentheses and the functions `exp`,
//! `log`, `sqrt`, `abs`, `sin`, `cos` and `pow(a, b)`.

use std::fmt;

use crate::error::{Error, Result};
use crate::scalar::{lit, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Func {
    Exp,
    Log,
    Sqrt,
    Abs,
    Sin,
    Cos,
    Pow,
}

impl Func {
    fn lookup(name: &str) -> Option<(Func, usize)> {
        Some(match name {
            "exp" => (Func::Exp, 1),
            "log" | "ln" => (Func::Log, 1),
            "sqrt" => (Func::Sqrt, 1),
            "abs" => (Func::Abs, 1),
            "sin" => (Func::Sin, 1),
            "cos" => (Func::Cos, 1),
            "pow" => (Func::Pow, 2),
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Node {
    Num(f64),
    Var(usize),
    Neg(Box<Node>),
    Bin(BinOp, Box<Node>, Box<Node>),
    Call(Func, Vec<Node>),
}

/// A parsed expression bound to an ordered list of variable names.
#[derive(Clone, PartialEq)]
pub struct Expr {
    source: String,
    vars: Vec<String>,
    root: Node,
}

impl fmt::Debug for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Expr({:?})", self.source)
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.source)
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Op(char),
    LParen,
    RParen,
    Comma,
}

fn tokenize(src: &str) -> Result<Vec<(usize, Tok)>> {
    let chars: Vec<(usize, char)> = src.char_indices().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let (pos, c) = chars[i];
        match c {
            c if c.is_whitespace() => i += 1,
            '0'..='9' | '.' => {
                let start = i;
                while i < chars.len() && (chars[i].1.is_ascii_digit() || chars[i].1 == '.') {
                    i += 1;
                }
                // exponent part: 1e-3, 2.5E+4
                if i < chars.len() && (chars[i].1 == 'e' || chars[i].1 == 'E') {
                    let mut j = i + 1;
                    if j < chars.len() && (chars[j].1 == '+' || chars[j].1 == '-') {
                        j += 1;
                    }
                    if j < chars.len() && chars[j].1.is_ascii_digit() {
                        i = j;
                        while i < chars.len() && chars[i].1.is_ascii_digit() {
                            i += 1;
                        }
                    }
                }
                let text: String = chars[start..i].iter().map(|(_, c)| *c).collect();
                let value = text
                    .parse::<f64>()
                    .map_err(|_| Error::Expression(format!("bad number {text:?} at {pos}")))?;
                out.push((pos, Tok::Num(value)));
            }
            c if c.is_alphabetic() || c == '_' => {
                let start = i;
                while i < chars.len() && (chars[i].1.is_alphanumeric() || chars[i].1 == '_') {
                    i += 1;
                }
                let text: String = chars[start..i].iter().map(|(_, c)| *c).collect();
                out.push((pos, Tok::Ident(text)));
            }
            '+' | '-' | '*' | '/' | '^' => {
                out.push((pos, Tok::Op(c)));
                i += 1;
            }
            '−' => {
                out.push((pos, Tok::Op('-')));
                i += 1;
            }
            '×' | '·' => {
                out.push((pos, Tok::Op('*')));
                i += 1;
            }
            '÷' => {
                out.push((pos, Tok::Op('/')));
                i += 1;
            }
            '(' => {
                out.push((pos, Tok::LParen));
                i += 1;
            }
            ')' => {
                out.push((pos, Tok::RParen));
                i += 1;
            }
            ',' => {
                out.push((pos, Tok::Comma));
                i += 1;
            }
            other => {
                return Err(Error::Expression(format!(
                    "unexpected character {other:?} at {pos}"
                )))
            }
        }
    }
    Ok(out)
}

struct Parser<'a> {
    toks: Vec<(usize, Tok)>,
    pos: usize,
    vars: &'a [String],
    len: usize,
}

impl Parser<'_> {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|(_, t)| t)
    }

    fn here(&self) -> usize {
        self.toks.get(self.pos).map(|(p, _)| *p).unwrap_or(self.len)
    }

    fn next(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.pos).map(|(_, t)| t.clone());
        self.pos += 1;
        t
    }

    fn expect(&mut self, want: Tok) -> Result<()> {
        let at = self.here();
        match self.next() {
            Some(t) if t == want => Ok(()),
            Some(t) => Err(Error::Expression(format!(
                "expected {want:?}, found {t:?} at {at}"
            ))),
            None => Err(Error::Expression(format!(
                "expected {want:?}, found end of input"
            ))),
        }
    }

    fn expr(&mut self) -> Result<Node> {
        let mut lhs = self.term()?;
        while let Some(Tok::Op(c @ ('+' | '-'))) = self.peek() {
            let op = if *c == '+' { BinOp::Add } else { BinOp::Sub };
            self.pos += 1;
            let rhs = self.term()?;
            lhs = Node::Bin(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Node> {
        let mut lhs = self.unary()?;
        while let Some(Tok::Op(c @ ('*' | '/'))) = self.peek() {
            let op = if *c == '*' { BinOp::Mul } else { BinOp::Div };
            self.pos += 1;
            let rhs = self.unary()?;
            lhs = Node::Bin(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Node> {
        match self.peek() {
            Some(Tok::Op('-')) => {
                self.pos += 1;
                Ok(Node::Neg(Box::new(self.unary()?)))
            }
            Some(Tok::Op('+')) => {
                self.pos += 1;
                self.unary()
            }
            _ => self.power(),
        }
    }

    fn power(&mut self) -> Result<Node> {
        let base = self.atom()?;
        if let Some(Tok::Op('^')) = self.peek() {
            self.pos += 1;
            let exponent = self.unary()?;
            return Ok(Node::Bin(BinOp::Pow, Box::new(base), Box::new(exponent)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Node> {
        let at = self.here();
        match self.next() {
            Some(Tok::Num(v)) => Ok(Node::Num(v)),
            Some(Tok::LParen) => {
                let inner = self.expr()?;
                self.expect(Tok::RParen)?;
                Ok(inner)
            }
            Some(Tok::Ident(name)) => {
                if let Some(Tok::LParen) = self.peek() {
                    let (func, arity) = Func::lookup(&name).ok_or_else(|| {
                        Error::Expression(format!("unknown function {name:?} at {at}"))
                    })?;
                    self.pos += 1;
                    let mut args = vec![self.expr()?];
                    while let Some(Tok::Comma) = self.peek() {
                        self.pos += 1;
                        args.push(self.expr()?);
                    }
                    self.expect(Tok::RParen)?;
                    if args.len() != arity {
                        return Err(Error::Expression(format!(
                            "{name} takes {arity} argument(s), got {}",
                            args.len()
                        )));
                    }
                    return Ok(Node::Call(func, args));
                }
                if name == "pi" {
                    return Ok(Node::Num(std::f64::consts::PI));
                }
                match self.vars.iter().position(|v| *v == name) {
                    Some(slot) => Ok(Node::Var(slot)),
                    None => Err(Error::Expression(format!(
                        "unknown variable {name:?} at {at} (allowed: {})",
                        self.vars.join(", ")
                    ))),
                }
            }
            Some(t) => Err(Error::Expression(format!("unexpected {t:?} at {at}"))),
            None => Err(Error::Expression("unexpected end of input".into())),
        }
    }
}

impl Expr {
    /// Parses `source`, resolving identifiers against `vars` (in slot order).
    pub fn parse<S: AsRef<str>>(source: &str, vars: &[S]) -> Result<Self> {
        let vars: Vec<String> = vars.iter().map(|v| v.as_ref().to_string()).collect();
        let toks = tokenize(source)?;
        if toks.is_empty() {
            return Err(Error::Expression("empty expression".into()));
        }
        let mut parser = Parser {
            toks,
            pos: 0,
            vars: &vars,
            len: source.len(),
        };
        let root = parser.expr()?;
        if parser.pos < parser.toks.len() {
            return Err(Error::Expression(format!(
                "trailing input at {}",
                parser.here()
            )));
        }
        Ok(Self {
            source: source.to_string(),
            vars,
            root,
        })
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn variables(&self) -> &[String] {
        &self.vars
    }

    /// Evaluates with `values[k]` bound to the `k`-th variable.
    ///
    /// Exponentials whose argument exceeds [`Scalar::exp_ceiling`] produce
    /// [`Error::Saturation`].
    pub fn eval<T: Scalar>(&self, values: &[T]) -> Result<T> {
        if values.len() < self.vars.len() {
            return Err(Error::Dimension {
                expected: self.vars.len(),
                got: values.len(),
            });
        }
        eval_node(&self.root, values)
    }

    /// True when the expression does not reference any variable.
    pub fn is_constant(&self) -> bool {
        fn walk(n: &Node) -> bool {
            match n {
                Node::Num(_) => true,
                Node::Var(_) => false,
                Node::Neg(a) => walk(a),
                Node::Bin(_, a, b) => walk(a) && walk(b),
                Node::Call(_, args) => args.iter().all(walk),
            }
        }
        walk(&self.root)
    }
}

fn eval_node<T: Scalar>(node: &Node, values: &[T]) -> Result<T> {
    Ok(match node {
        Node::Num(v) => lit(*v),
        Node::Var(slot) => values[*slot],
        Node::Neg(a) => -eval_node(a, values)?,
        Node::Bin(op, a, b) => {
            let a = eval_node(a, values)?;
            let b = eval_node(b, values)?;
            match op {
                BinOp::Add => a + b,
                BinOp::Sub => a - b,
                BinOp::Mul => a * b,
                BinOp::Div => a / b,
                BinOp::Pow => a.powf(b),
            }
        }
        Node::Call(func, args) => {
            let a = eval_node(&args[0], values)?;
            match func {
                Func::Exp => {
                    if a > T::exp_ceiling() {
                        return Err(Error::Saturation(format!("exp({a:e})")));
                    }
                    a.exp()
                }
                Func::Log => a.ln(),
                Func::Sqrt => a.sqrt(),
                Func::Abs => a.abs(),
                Func::Sin => a.sin(),
                Func::Cos => a.cos(),
                Func::Pow => a.powf(eval_node(&args[1], values)?),
            }
        }
    })
}
