//! A small arithmetic expression language for custom priors and model pieces.
//!
//! Grammar (usual precedence, `^` right-associative):
//!
//! ```text
//! expr   := term (('+' | '-') term)*
//! term   := unary (('*' | '/') unary)*
//! unary  := '-' unary | power
//! power  := atom ('^' unary)?
//! atom   := number | ident | ident '(' expr (',' expr)* ')' | '(' expr ')'
//! ```
//!
//! Identifiers: `theta` (first component), `theta_1 .. theta_d`, `gamma`,
//! `x`, and the constants `pi` and `e`. Functions: `log`, `exp`, `sqrt`,
//! `abs`, `pow(a, b)`.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
enum Node {
    Const(f64),
    Theta(usize),
    Gamma,
    X,
    Neg(Box<Node>),
    Add(Box<Node>, Box<Node>),
    Sub(Box<Node>, Box<Node>),
    Mul(Box<Node>, Box<Node>),
    Div(Box<Node>, Box<Node>),
    Pow(Box<Node>, Box<Node>),
    Log(Box<Node>),
    Exp(Box<Node>),
    Sqrt(Box<Node>),
    Abs(Box<Node>),
}

/// A parsed expression, cheap to evaluate repeatedly.
#[derive(Debug, Clone, PartialEq)]
pub struct Expr {
    source: String,
    root: Node,
    max_theta: Option<usize>,
    uses_x: bool,
}

/// Variable bindings for [`Expr::eval`].
#[derive(Debug, Clone, Copy)]
pub struct Vars<'a> {
    pub theta: &'a [f64],
    pub gamma: f64,
    pub x: f64,
}

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Num(f64),
    Ident(String),
    Op(char),
}

fn tokenize(src: &str) -> Result<Vec<Token>> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let ch = chars[i];
        if ch.is_whitespace() {
            i += 1;
        } else if ch.is_ascii_digit() || ch == '.' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                i += 1;
            }
            // exponent part, e.g. 1e-3
            if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                let mut j = i + 1;
                if j < chars.len() && (chars[j] == '+' || chars[j] == '-') {
                    j += 1;
                }
                if j < chars.len() && chars[j].is_ascii_digit() {
                    i = j;
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            let text: String = chars[start..i].iter().collect();
            let value = text
                .parse::<f64>()
                .map_err(|_| Error::Expr(format!("bad number `{text}`")))?;
            out.push(Token::Num(value));
        } else if ch.is_ascii_alphabetic() || ch == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            out.push(Token::Ident(chars[start..i].iter().collect()));
        } else if "+-*/^(),".contains(ch) {
            out.push(Token::Op(ch));
            i += 1;
        } else {
            return Err(Error::Expr(format!("unexpected character `{ch}`")));
        }
    }
    Ok(out)
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos)
    }

    fn eat_op(&mut self, op: char) -> bool {
        if self.peek() == Some(&Token::Op(op)) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect_op(&mut self, op: char) -> Result<()> {
        if self.eat_op(op) {
            Ok(())
        } else {
            Err(Error::Expr(format!("expected `{op}`")))
        }
    }

    fn expr(&mut self) -> Result<Node> {
        let mut lhs = self.term()?;
        loop {
            if self.eat_op('+') {
                lhs = Node::Add(Box::new(lhs), Box::new(self.term()?));
            } else if self.eat_op('-') {
                lhs = Node::Sub(Box::new(lhs), Box::new(self.term()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn term(&mut self) -> Result<Node> {
        let mut lhs = self.unary()?;
        loop {
            if self.eat_op('*') {
                lhs = Node::Mul(Box::new(lhs), Box::new(self.unary()?));
            } else if self.eat_op('/') {
                lhs = Node::Div(Box::new(lhs), Box::new(self.unary()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn unary(&mut self) -> Result<Node> {
        if self.eat_op('-') {
            return Ok(Node::Neg(Box::new(self.unary()?)));
        }
        if self.eat_op('+') {
            return self.unary();
        }
        self.power()
    }

    fn power(&mut self) -> Result<Node> {
        let base = self.atom()?;
        if self.eat_op('^') {
            let exponent = self.unary()?;
            return Ok(Node::Pow(Box::new(base), Box::new(exponent)));
        }
        Ok(base)
    }

    fn args(&mut self) -> Result<Vec<Node>> {
        self.expect_op('(')?;
        let mut args = vec![self.expr()?];
        while self.eat_op(',') {
            args.push(self.expr()?);
        }
        self.expect_op(')')?;
        Ok(args)
    }

    fn atom(&mut self) -> Result<Node> {
        match self.peek().cloned() {
            Some(Token::Num(v)) => {
                self.pos += 1;
                Ok(Node::Const(v))
            }
            Some(Token::Op('(')) => {
                self.pos += 1;
                let inner = self.expr()?;
                self.expect_op(')')?;
                Ok(inner)
            }
            Some(Token::Ident(name)) => {
                self.pos += 1;
                if self.peek() == Some(&Token::Op('(')) {
                    let mut args = self.args()?;
                    let arity = |n: usize| {
                        if args.len() == n {
                            Ok(())
                        } else {
                            Err(Error::Expr(format!("`{name}` takes {n} argument(s)")))
                        }
                    };
                    let node = match name.as_str() {
                        "log" | "ln" => {
                            arity(1)?;
                            Node::Log(Box::new(args.remove(0)))
                        }
                        "exp" => {
                            arity(1)?;
                            Node::Exp(Box::new(args.remove(0)))
                        }
                        "sqrt" => {
                            arity(1)?;
                            Node::Sqrt(Box::new(args.remove(0)))
                        }
                        "abs" => {
                            arity(1)?;
                            Node::Abs(Box::new(args.remove(0)))
                        }
                        "pow" => {
                            arity(2)?;
                            let b = args.remove(0);
                            Node::Pow(Box::new(b), Box::new(args.remove(0)))
                        }
                        other => return Err(Error::Expr(format!("unknown function `{other}`"))),
                    };
                    return Ok(node);
                }
                variable(&name)
            }
            Some(Token::Op(op)) => Err(Error::Expr(format!("unexpected `{op}`"))),
            None => Err(Error::Expr("unexpected end of expression".into())),
        }
    }
}

fn variable(name: &str) -> Result<Node> {
    match name {
        "theta" => Ok(Node::Theta(0)),
        "gamma" => Ok(Node::Gamma),
        "x" => Ok(Node::X),
        "pi" => Ok(Node::Const(std::f64::consts::PI)),
        "e" => Ok(Node::Const(std::f64::consts::E)),
        _ => {
            if let Some(rest) = name.strip_prefix("theta_") {
                let k: usize = rest
                    .parse()
                    .map_err(|_| Error::Expr(format!("bad variable `{name}`")))?;
                if k == 0 {
                    return Err(Error::Expr("theta indices start at 1".into()));
                }
                return Ok(Node::Theta(k - 1));
            }
            Err(Error::Expr(format!("unknown variable `{name}`")))
        }
    }
}

fn scan(node: &Node, max_theta: &mut Option<usize>, uses_x: &mut bool) {
    match node {
        Node::Const(_) | Node::Gamma => {}
        Node::X => *uses_x = true,
        Node::Theta(k) => *max_theta = Some(max_theta.map_or(*k, |m| m.max(*k))),
        Node::Neg(a) | Node::Log(a) | Node::Exp(a) | Node::Sqrt(a) | Node::Abs(a) => {
            scan(a, max_theta, uses_x)
        }
        Node::Add(a, b) | Node::Sub(a, b) | Node::Mul(a, b) | Node::Div(a, b) | Node::Pow(a, b) => {
            scan(a, max_theta, uses_x);
            scan(b, max_theta, uses_x);
        }
    }
}

fn eval_node(node: &Node, v: &Vars) -> f64 {
    match node {
        Node::Const(c) => *c,
        Node::Theta(k) => v.theta.get(*k).copied().unwrap_or(f64::NAN),
        Node::Gamma => v.gamma,
        Node::X => v.x,
        Node::Neg(a) => -eval_node(a, v),
        Node::Add(a, b) => eval_node(a, v) + eval_node(b, v),
        Node::Sub(a, b) => eval_node(a, v) - eval_node(b, v),
        Node::Mul(a, b) => eval_node(a, v) * eval_node(b, v),
        Node::Div(a, b) => eval_node(a, v) / eval_node(b, v),
        Node::Pow(a, b) => {
            let base = eval_node(a, v);
            let exponent = eval_node(b, v);
            if exponent.fract() == 0.0 && exponent.abs() < 64.0 {
                base.powi(exponent as i32)
            } else {
                base.powf(exponent)
            }
        }
        Node::Log(a) => eval_node(a, v).ln(),
        Node::Exp(a) => eval_node(a, v).exp(),
        Node::Sqrt(a) => eval_node(a, v).sqrt(),
        Node::Abs(a) => eval_node(a, v).abs(),
    }
}

impl Expr {
    pub fn parse(source: &str) -> Result<Self> {
        let tokens = tokenize(source)?;
        if tokens.is_empty() {
            return Err(Error::Expr("empty expression".into()));
        }
        let mut parser = Parser { tokens, pos: 0 };
        let root = parser.expr()?;
        if parser.pos != parser.tokens.len() {
            return Err(Error::Expr(format!("trailing input in `{source}`")));
        }
        let mut max_theta = None;
        let mut uses_x = false;
        scan(&root, &mut max_theta, &mut uses_x);
        Ok(Self {
            source: source.to_string(),
            root,
            max_theta,
            uses_x,
        })
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    /// Number of θ components the expression refers to.
    pub fn theta_arity(&self) -> usize {
        self.max_theta.map_or(0, |k| k + 1)
    }

    pub fn uses_x(&self) -> bool {
        self.uses_x
    }

    pub fn eval(&self, vars: Vars) -> f64 {
        eval_node(&self.root, &vars)
    }

    /// Errors unless the expression only uses variables available in a
    /// `d`-dimensional model (and `x` only when `allow_x`).
    pub fn check_scope(&self, d: usize, allow_x: bool) -> Result<()> {
        if self.theta_arity() > d {
            return Err(Error::Expr(format!(
                "`{}` uses theta_{} but the model has d = {d}",
                self.source,
                self.theta_arity()
            )));
        }
        if self.uses_x && !allow_x {
            return Err(Error::Expr(format!("`{}` may not use x here", self.source)));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn at(e: &str, theta: &[f64], gamma: f64) -> f64 {
        Expr::parse(e).unwrap().eval(Vars {
            theta,
            gamma,
            x: 0.0,
        })
    }

    #[test]
    fn precedence() {
        assert_eq!(at("1 + 2 * 3", &[], 0.0), 7.0);
        assert_eq!(at("2 ^ 3 ^ 2", &[], 0.0), 512.0);
        assert_eq!(at("-2 ^ 2", &[], 0.0), -4.0);
        assert_eq!(at("(1 + 2) * 3", &[], 0.0), 9.0);
        assert_eq!(at("2^-1", &[], 0.0), 0.5);
    }

    #[test]
    fn variables_and_functions() {
        assert_eq!(at("1/theta", &[4.0], 0.0), 0.25);
        assert_eq!(at("theta_2 * gamma", &[1.0, 3.0], 2.0), 6.0);
        assert!((at("log(exp(theta)) + sqrt(4)", &[1.5], 0.0) - 3.5).abs() < 1e-15);
        assert_eq!(at("pow(theta, 3)", &[2.0], 0.0), 8.0);
        assert!((at("1e-3 * 2", &[], 0.0) - 2e-3).abs() < 1e-18);
    }

    #[test]
    fn scope_checks() {
        let e = Expr::parse("theta_3 + x").unwrap();
        assert_eq!(e.theta_arity(), 3);
        assert!(e.uses_x());
        assert!(e.check_scope(2, true).is_err());
        assert!(e.check_scope(3, false).is_err());
        assert!(e.check_scope(3, true).is_ok());
    }

    #[test]
    fn rejects_garbage() {
        for bad in ["", "1 +", "foo", "log(1, 2)", "theta_0", "2 $ 3", "(1"] {
            assert!(Expr::parse(bad).is_err(), "{bad}");
        }
    }
}
