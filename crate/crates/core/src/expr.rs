//! Textual scalar field expressions.
//!
//! Grammar (whitespace insensitive):
//!
//! ```text
//! expr    := term (('+' | '-') term)*
//! term    := unary (('*' | '/') unary)*
//! unary   := '-' unary | power
//! power   := atom ('^' unary)?
//! atom    := number | ident | ident '(' expr (',' expr)* ')' | '(' expr ')'
//! ```
//!
//! Identifiers: `s`, `theta` (alias of `theta1`), `theta1` .. `theta5`, `phi`
//! (the profile), `V` (the potential `sqrt(phi)`), `pi`, plus any named
//! parameter. Functions: `sin cos tan sinh cosh tanh exp ln sqrt pow`.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::geometry::Profile;
use crate::jet::{pow_derivs, Taylor};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Func {
    Sin,
    Cos,
    Tan,
    Sinh,
    Cosh,
    Tanh,
    Exp,
    Ln,
    Sqrt,
}

impl Func {
    fn from_name(name: &str) -> Option<Func> {
        Some(match name {
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "tan" => Func::Tan,
            "sinh" => Func::Sinh,
            "cosh" => Func::Cosh,
            "tanh" => Func::Tanh,
            "exp" => Func::Exp,
            "ln" | "log" => Func::Ln,
            "sqrt" => Func::Sqrt,
            _ => return None,
        })
    }

    fn derivs(self, x: f64) -> std::result::Result<[f64; 4], String> {
        Ok(match self {
            Func::Sin => [x.sin(), x.cos(), -x.sin(), -x.cos()],
            Func::Cos => [x.cos(), -x.sin(), -x.cos(), x.sin()],
            Func::Tan => {
                let t = x.tan();
                let sec2 = 1.0 + t * t;
                [t, sec2, 2.0 * t * sec2, 2.0 * sec2 * (1.0 + 3.0 * t * t)]
            }
            Func::Sinh => [x.sinh(), x.cosh(), x.sinh(), x.cosh()],
            Func::Cosh => [x.cosh(), x.sinh(), x.cosh(), x.sinh()],
            Func::Tanh => {
                let t = x.tanh();
                let s = 1.0 - t * t;
                [t, s, -2.0 * t * s, s * (6.0 * t * t - 2.0)]
            }
            Func::Exp => {
                let e = x.exp();
                [e; 4]
            }
            Func::Ln => {
                if x <= 0.0 {
                    return Err(format!("ln of non-positive value {x}"));
                }
                [x.ln(), 1.0 / x, -1.0 / (x * x), 2.0 / (x * x * x)]
            }
            Func::Sqrt => {
                if x < 0.0 {
                    return Err(format!("sqrt of negative value {x}"));
                }
                let r = x.sqrt();
                [r, 0.5 / r, -0.25 / (r * x), 0.375 / (r * x * x)]
            }
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Node {
    Const(f64),
    S,
    Theta(usize),
    Phi,
    Potential,
    Param(String),
    Neg(Box<Node>),
    Add(Box<Node>, Box<Node>),
    Sub(Box<Node>, Box<Node>),
    Mul(Box<Node>, Box<Node>),
    Div(Box<Node>, Box<Node>),
    Pow(Box<Node>, Box<Node>),
    Call(Func, Box<Node>),
}

/// Variable jets and symbol bindings for one evaluation.
pub struct EvalEnv<'a, J> {
    /// Jet of the area-radius coordinate, if the expression may depend on it.
    pub s: Option<J>,
    /// Jets of the base angles.
    pub theta: &'a [J],
    pub profile: Option<&'a Profile>,
}

/// A parsed scalar expression. Serializes as its source text.
#[derive(Clone)]
pub struct FieldExpr {
    source: String,
    root: Node,
}

impl PartialEq for FieldExpr {
    fn eq(&self, other: &Self) -> bool {
        self.root == other.root
    }
}

impl fmt::Debug for FieldExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "FieldExpr({:?})", self.source)
    }
}

impl fmt::Display for FieldExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.source)
    }
}

impl Serialize for FieldExpr {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.source)
    }
}

impl<'de> Deserialize<'de> for FieldExpr {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let src = String::deserialize(d)?;
        FieldExpr::parse(&src).map_err(serde::de::Error::custom)
    }
}

impl FieldExpr {
    pub fn parse(src: &str) -> Result<FieldExpr> {
        let tokens = tokenize(src)?;
        let mut p = Parser {
            tokens: &tokens,
            pos: 0,
            len: src.len(),
        };
        let root = p.expr()?;
        if p.pos != tokens.len() {
            return Err(p.error("unexpected trailing input"));
        }
        Ok(FieldExpr {
            source: src.trim().to_string(),
            root,
        })
    }

    pub fn constant(c: f64) -> FieldExpr {
        FieldExpr {
            source: format!("{c:?}"),
            root: Node::Const(c),
        }
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    /// Replaces named parameters by their values. Unknown names are kept and
    /// reported at evaluation time.
    pub fn with_params(&self, params: &BTreeMap<String, f64>) -> FieldExpr {
        fn subst(n: &Node, p: &BTreeMap<String, f64>) -> Node {
            match n {
                Node::Param(name) => match p.get(name) {
                    Some(v) => Node::Const(*v),
                    None => n.clone(),
                },
                Node::Neg(a) => Node::Neg(Box::new(subst(a, p))),
                Node::Add(a, b) => Node::Add(Box::new(subst(a, p)), Box::new(subst(b, p))),
                Node::Sub(a, b) => Node::Sub(Box::new(subst(a, p)), Box::new(subst(b, p))),
                Node::Mul(a, b) => Node::Mul(Box::new(subst(a, p)), Box::new(subst(b, p))),
                Node::Div(a, b) => Node::Div(Box::new(subst(a, p)), Box::new(subst(b, p))),
                Node::Pow(a, b) => Node::Pow(Box::new(subst(a, p)), Box::new(subst(b, p))),
                Node::Call(f, a) => Node::Call(*f, Box::new(subst(a, p))),
                other => other.clone(),
            }
        }
        FieldExpr {
            source: self.source.clone(),
            root: subst(&self.root, params),
        }
    }

    /// Names of parameters that are still unbound.
    pub fn free_params(&self) -> Vec<String> {
        fn walk(n: &Node, out: &mut Vec<String>) {
            match n {
                Node::Param(name) => {
                    if !out.contains(name) {
                        out.push(name.clone())
                    }
                }
                Node::Neg(a) | Node::Call(_, a) => walk(a, out),
                Node::Add(a, b)
                | Node::Sub(a, b)
                | Node::Mul(a, b)
                | Node::Div(a, b)
                | Node::Pow(a, b) => {
                    walk(a, out);
                    walk(b, out);
                }
                _ => {}
            }
        }
        let mut out = Vec::new();
        walk(&self.root, &mut out);
        out
    }

    pub fn depends_on_s(&self) -> bool {
        fn walk(n: &Node) -> bool {
            match n {
                Node::S | Node::Phi | Node::Potential => true,
                Node::Neg(a) | Node::Call(_, a) => walk(a),
                Node::Add(a, b)
                | Node::Sub(a, b)
                | Node::Mul(a, b)
                | Node::Div(a, b)
                | Node::Pow(a, b) => walk(a) || walk(b),
                _ => false,
            }
        }
        walk(&self.root)
    }

    /// Highest base-angle index referenced (1-based), or 0.
    pub fn max_theta(&self) -> usize {
        fn walk(n: &Node) -> usize {
            match n {
                Node::Theta(k) => k + 1,
                Node::Neg(a) | Node::Call(_, a) => walk(a),
                Node::Add(a, b)
                | Node::Sub(a, b)
                | Node::Mul(a, b)
                | Node::Div(a, b)
                | Node::Pow(a, b) => walk(a).max(walk(b)),
                _ => 0,
            }
        }
        walk(&self.root)
    }

    pub fn eval<J: Taylor>(&self, env: &EvalEnv<'_, J>) -> Result<J> {
        eval_node(&self.root, env)
    }
}

fn any_jet<J: Taylor>(env: &EvalEnv<'_, J>) -> Result<J> {
    if let Some(s) = env.s {
        return Ok(s);
    }
    env.theta
        .first()
        .copied()
        .ok_or_else(|| Error::Eval("empty evaluation environment".into()))
}

fn s_jet<J: Taylor>(env: &EvalEnv<'_, J>, what: &str) -> Result<J> {
    env.s
        .ok_or_else(|| Error::Eval(format!("`{what}` requires the radial coordinate s")))
}

fn profile_jet<J: Taylor>(env: &EvalEnv<'_, J>) -> Result<J> {
    let s = s_jet(env, "phi")?;
    let profile = env
        .profile
        .ok_or_else(|| Error::Eval("`phi` used without a profile".into()))?;
    let p = profile.jet(s.value())?;
    Ok(s.compose(p.d))
}

fn is_constant(n: &Node) -> bool {
    match n {
        Node::Const(_) => true,
        Node::Neg(a) | Node::Call(_, a) => is_constant(a),
        Node::Add(a, b) | Node::Sub(a, b) | Node::Mul(a, b) | Node::Div(a, b) | Node::Pow(a, b) => {
            is_constant(a) && is_constant(b)
        }
        _ => false,
    }
}

fn eval_node<J: Taylor>(n: &Node, env: &EvalEnv<'_, J>) -> Result<J> {
    Ok(match n {
        Node::Const(c) => any_jet(env)?.constant_like(*c),
        Node::S => s_jet(env, "s")?,
        Node::Theta(k) => *env
            .theta
            .get(*k)
            .ok_or_else(|| Error::Eval(format!("theta{} is not a coordinate here", k + 1)))?,
        Node::Phi => profile_jet(env)?,
        Node::Potential => {
            let phi = profile_jet(env)?;
            let d = Func::Sqrt.derivs(phi.value()).map_err(Error::Eval)?;
            phi.compose(d)
        }
        Node::Param(name) => return Err(Error::UnknownSymbol(name.clone())),
        Node::Neg(a) => -eval_node(a, env)?,
        Node::Add(a, b) => eval_node(a, env)? + eval_node(b, env)?,
        Node::Sub(a, b) => eval_node(a, env)? - eval_node(b, env)?,
        Node::Mul(a, b) => eval_node(a, env)? * eval_node(b, env)?,
        Node::Div(a, b) => {
            let den = eval_node(b, env)?;
            if den.value() == 0.0 {
                return Err(Error::Eval("division by zero".into()));
            }
            eval_node(a, env)? / den
        }
        Node::Pow(a, b) => {
            let base = eval_node(a, env)?;
            let constant_exp = if is_constant(b) {
                Some(eval_node(b, env)?.value())
            } else {
                None
            };
            if let Some(p) = constant_exp {
                if p.fract() != 0.0 && base.value() < 0.0 {
                    return Err(Error::Eval(format!(
                        "non-integer power of negative value {}",
                        base.value()
                    )));
                }
                if p.fract() != 0.0 && base.value() == 0.0 && p < 3.0 {
                    return Err(Error::Eval("fractional power at zero".into()));
                }
                base.compose(pow_derivs(base.value(), p))
            } else {
                let exp = eval_node(b, env)?;
                let ln = base.compose(Func::Ln.derivs(base.value()).map_err(Error::Eval)?);
                let e = exp * ln;
                e.compose(Func::Exp.derivs(e.value()).map_err(Error::Eval)?)
            }
        }
        Node::Call(f, a) => {
            let x = eval_node(a, env)?;
            x.compose(f.derivs(x.value()).map_err(Error::Eval)?)
        }
    })
}

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Op(char),
}

fn tokenize(src: &str) -> Result<Vec<(Tok, usize)>> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        if c.is_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() || c == '.' {
            let start = i;
            while i < bytes.len() && ((bytes[i] as char).is_ascii_digit() || bytes[i] == b'.') {
                i += 1;
            }
            if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                let mut j = i + 1;
                if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                    j += 1;
                }
                if j < bytes.len() && (bytes[j] as char).is_ascii_digit() {
                    i = j;
                    while i < bytes.len() && (bytes[i] as char).is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            let text = &src[start..i];
            let v: f64 = text.parse().map_err(|_| Error::Parse {
                column: start + 1,
                message: format!("bad number `{text}`"),
            })?;
            out.push((Tok::Num(v), start + 1));
        } else if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < bytes.len()
                && ((bytes[i] as char).is_ascii_alphanumeric() || bytes[i] == b'_')
            {
                i += 1;
            }
            out.push((Tok::Ident(src[start..i].to_string()), start + 1));
        } else if "+-*/^(),".contains(c) {
            out.push((Tok::Op(c), i + 1));
            i += 1;
        } else {
            return Err(Error::Parse {
                column: i + 1,
                message: format!("unexpected character `{c}`"),
            });
        }
    }
    Ok(out)
}

struct Parser<'a> {
    tokens: &'a [(Tok, usize)],
    pos: usize,
    len: usize,
}

impl Parser<'_> {
    fn error(&self, msg: &str) -> Error {
        let column = self
            .tokens
            .get(self.pos)
            .map(|t| t.1)
            .unwrap_or(self.len + 1);
        Error::Parse {
            column,
            message: msg.to_string(),
        }
    }

    fn peek_op(&self, c: char) -> bool {
        matches!(self.tokens.get(self.pos), Some((Tok::Op(o), _)) if *o == c)
    }

    fn expect_op(&mut self, c: char) -> Result<()> {
        if self.peek_op(c) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.error(&format!("expected `{c}`")))
        }
    }

    fn expr(&mut self) -> Result<Node> {
        let mut lhs = self.term()?;
        loop {
            if self.peek_op('+') {
                self.pos += 1;
                lhs = Node::Add(Box::new(lhs), Box::new(self.term()?));
            } else if self.peek_op('-') {
                self.pos += 1;
                lhs = Node::Sub(Box::new(lhs), Box::new(self.term()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn term(&mut self) -> Result<Node> {
        let mut lhs = self.unary()?;
        loop {
            if self.peek_op('*') {
                self.pos += 1;
                lhs = Node::Mul(Box::new(lhs), Box::new(self.unary()?));
            } else if self.peek_op('/') {
                self.pos += 1;
                lhs = Node::Div(Box::new(lhs), Box::new(self.unary()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn unary(&mut self) -> Result<Node> {
        if self.peek_op('-') {
            self.pos += 1;
            let inner = self.unary()?;
            return Ok(match inner {
                Node::Const(c) => Node::Const(-c),
                other => Node::Neg(Box::new(other)),
            });
        }
        if self.peek_op('+') {
            self.pos += 1;
            return self.unary();
        }
        self.power()
    }

    fn power(&mut self) -> Result<Node> {
        let base = self.atom()?;
        if self.peek_op('^') {
            self.pos += 1;
            let exp = self.unary()?;
            return Ok(Node::Pow(Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Node> {
        let Some((tok, _)) = self.tokens.get(self.pos).cloned() else {
            return Err(self.error("unexpected end of expression"));
        };
        match tok {
            Tok::Num(v) => {
                self.pos += 1;
                Ok(Node::Const(v))
            }
            Tok::Op('(') => {
                self.pos += 1;
                let e = self.expr()?;
                self.expect_op(')')?;
                Ok(e)
            }
            Tok::Ident(name) => {
                self.pos += 1;
                if self.peek_op('(') {
                    self.pos += 1;
                    if name == "pow" {
                        let a = self.expr()?;
                        self.expect_op(',')?;
                        let b = self.expr()?;
                        self.expect_op(')')?;
                        return Ok(Node::Pow(Box::new(a), Box::new(b)));
                    }
                    let f = Func::from_name(&name).ok_or_else(|| {
                        self.pos -= 2;
                        self.error(&format!("unknown function `{name}`"))
                    })?;
                    let a = self.expr()?;
                    self.expect_op(')')?;
                    return Ok(Node::Call(f, Box::new(a)));
                }
                Ok(ident_node(&name))
            }
            Tok::Op(c) => Err(self.error(&format!("unexpected `{c}`"))),
        }
    }
}

fn ident_node(name: &str) -> Node {
    match name {
        "s" => Node::S,
        "theta" => Node::Theta(0),
        "phi" => Node::Phi,
        "V" => Node::Potential,
        "pi" => Node::Const(std::f64::consts::PI),
        _ => {
            if let Some(k) = name
                .strip_prefix("theta")
                .and_then(|d| d.parse::<usize>().ok())
            {
                if (1..=5).contains(&k) {
                    return Node::Theta(k - 1);
                }
            }
            Node::Param(name.to_string())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::jet::{Jet2, Jet3};

    fn eval_s(src: &str, s: f64) -> Jet3 {
        let e = FieldExpr::parse(src).unwrap();
        e.eval(&EvalEnv {
            s: Some(Jet3::variable(s)),
            theta: &[],
            profile: None,
        })
        .unwrap()
    }

    #[test]
    fn precedence_and_unary_minus() {
        assert_eq!(eval_s("-s^2", 3.0).d[0], -9.0);
        assert_eq!(eval_s("2*s + 1 - s/2", 4.0).d[0], 7.0);
        assert_eq!(eval_s("2^3^2", 0.0).d[0], 512.0);
        assert_eq!(eval_s("s^(-1)", 4.0).d[0], 0.25);
    }

    #[test]
    fn square_jet() {
        let j = eval_s("s^2", 2.0);
        assert_eq!(j.d[..3], [4.0, 4.0, 2.0]);
    }

    #[test]
    fn parse_errors_carry_columns() {
        match FieldExpr::parse("s + * 2") {
            Err(Error::Parse { column, .. }) => assert_eq!(column, 5),
            other => panic!("{other:?}"),
        }
        match FieldExpr::parse("s + foo(2)") {
            Err(Error::Parse { column, .. }) => assert_eq!(column, 5),
            other => panic!("{other:?}"),
        }
        assert!(FieldExpr::parse("(s").is_err());
        assert!(FieldExpr::parse("s $ 2").is_err());
    }

    #[test]
    fn params_substitute() {
        let e = FieldExpr::parse("1 - m/s").unwrap();
        assert_eq!(e.free_params(), vec!["m".to_string()]);
        let mut p = BTreeMap::new();
        p.insert("m".to_string(), 2.0);
        let b = e.with_params(&p);
        let j = b
            .eval(&EvalEnv {
                s: Some(Jet3::variable(4.0)),
                theta: &[],
                profile: None,
            })
            .unwrap();
        assert_eq!(j.d[0], 0.5);
        let unbound = e.eval(&EvalEnv {
            s: Some(Jet3::variable(4.0)),
            theta: &[],
            profile: None,
        });
        assert_eq!(unbound, Err(Error::UnknownSymbol("m".into())));
    }

    #[test]
    fn domain_errors() {
        let e = FieldExpr::parse("sqrt(s - 3)").unwrap();
        let r = e.eval(&EvalEnv {
            s: Some(Jet3::variable(1.0)),
            theta: &[],
            profile: None,
        });
        assert!(matches!(r, Err(Error::Eval(_))));
        let e = FieldExpr::parse("1/(s-1)").unwrap();
        let r = e.eval(&EvalEnv {
            s: Some(Jet3::variable(1.0)),
            theta: &[],
            profile: None,
        });
        assert!(matches!(r, Err(Error::Eval(_))));
    }

    #[test]
    fn theta_variables_and_mixed_partials() {
        let e = FieldExpr::parse("s*cos(theta1)*sin(theta2)").unwrap();
        let th = [Jet2::variable(3, 1, 0.4), Jet2::variable(3, 2, 1.1)];
        let j = e
            .eval(&EvalEnv {
                s: Some(Jet2::variable(3, 0, 2.0)),
                theta: &th,
                profile: None,
            })
            .unwrap();
        assert!((j.grad[0] - 0.4f64.cos() * 1.1f64.sin()).abs() < 1e-15);
        assert!((j.hess[0][1] + 0.4f64.sin() * 1.1f64.sin()).abs() < 1e-15);
        assert_eq!(e.max_theta(), 2);
    }
}
