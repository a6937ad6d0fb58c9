//! Scoring language: a small arithmetic expression grammar over the feature
//! vocabulary.
//!
//! ```text
//! expr   = term {("+"|"-") term}
//! term   = factor {("*"|"/") factor}
//! factor = NUMBER | IDENT | FUNC "(" expr {"," expr} ")" | "(" expr ")" | "-" factor
//! ```

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::features::{Feature, FeatureVector};
use crate::error::{IdentifyError, ScenarioError};

/// Magnitude bound applied to every intermediate value.
pub const SATURATION: f64 = 1e100;
const DIV_EPS: f64 = 1e-9;
const EXP_ARG_MAX: f64 = 230.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
}

impl BinOp {
    fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
        }
    }

    fn precedence(self) -> u8 {
        match self {
            BinOp::Add | BinOp::Sub => 1,
            BinOp::Mul | BinOp::Div => 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Func {
    Min,
    Max,
    Exp,
    Abs,
    Sqrt,
    Clip,
}

impl Func {
    pub const ALL: [Func; 6] = [Func::Min, Func::Max, Func::Exp, Func::Abs, Func::Sqrt, Func::Clip];

    pub fn name(self) -> &'static str {
        match self {
            Func::Min => "min",
            Func::Max => "max",
            Func::Exp => "exp",
            Func::Abs => "abs",
            Func::Sqrt => "sqrt",
            Func::Clip => "clip",
        }
    }

    fn from_name(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|f| f.name() == s)
    }

    /// Accepted argument counts (min, max).
    pub fn arity(self) -> (usize, usize) {
        match self {
            Func::Min | Func::Max => (1, usize::MAX),
            Func::Exp | Func::Abs | Func::Sqrt => (1, 1),
            Func::Clip => (3, 3),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    /// Non-negative literal; negation is a separate node.
    Num(f64),
    Var(Feature),
    Neg(Box<Expr>),
    Bin(BinOp, Box<Expr>, Box<Expr>),
    Call(Func, Vec<Expr>),
}

impl Expr {
    pub fn bin(op: BinOp, a: Expr, b: Expr) -> Expr {
        Expr::Bin(op, Box::new(a), Box::new(b))
    }

    fn precedence(&self) -> u8 {
        match self {
            Expr::Bin(op, ..) => op.precedence(),
            _ => 3,
        }
    }

    /// Shape with every numeric literal replaced by `#`.
    fn write_shape(&self, out: &mut String) {
        match self {
            Expr::Num(_) => out.push('#'),
            Expr::Var(f) => out.push_str(f.name()),
            Expr::Neg(e) => {
                out.push_str("neg(");
                e.write_shape(out);
                out.push(')');
            }
            Expr::Bin(op, a, b) => {
                out.push_str(op.symbol());
                out.push('(');
                a.write_shape(out);
                out.push(',');
                b.write_shape(out);
                out.push(')');
            }
            Expr::Call(f, args) => {
                out.push_str(f.name());
                out.push('(');
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        out.push(',');
                    }
                    a.write_shape(out);
                }
                out.push(')');
            }
        }
    }

    /// Numeric literals in source order.
    pub fn literals(&self) -> Vec<f64> {
        let mut out = Vec::new();
        self.visit_literals(&mut |v| out.push(*v));
        out
    }

    fn visit_literals(&self, f: &mut impl FnMut(&f64)) {
        match self {
            Expr::Num(v) => f(v),
            Expr::Var(_) => {}
            Expr::Neg(e) => e.visit_literals(f),
            Expr::Bin(_, a, b) => {
                a.visit_literals(f);
                b.visit_literals(f);
            }
            Expr::Call(_, args) => args.iter().for_each(|a| a.visit_literals(f)),
        }
    }

    /// Rewrites literals in source order through `f`.
    pub fn map_literals(&self, f: &mut impl FnMut(f64) -> f64) -> Expr {
        match self {
            Expr::Num(v) => Expr::Num(f(*v)),
            Expr::Var(x) => Expr::Var(*x),
            Expr::Neg(e) => Expr::Neg(Box::new(e.map_literals(f))),
            Expr::Bin(op, a, b) => Expr::bin(*op, a.map_literals(f), b.map_literals(f)),
            Expr::Call(func, args) => Expr::Call(*func, args.iter().map(|a| a.map_literals(f)).collect()),
        }
    }

    pub fn features(&self) -> Vec<Feature> {
        let mut out = Vec::new();
        self.collect_features(&mut out);
        out.sort();
        out.dedup();
        out
    }

    fn collect_features(&self, out: &mut Vec<Feature>) {
        match self {
            Expr::Var(f) => out.push(*f),
            Expr::Num(_) => {}
            Expr::Neg(e) => e.collect_features(out),
            Expr::Bin(_, a, b) => {
                a.collect_features(out);
                b.collect_features(out);
            }
            Expr::Call(_, args) => args.iter().for_each(|a| a.collect_features(out)),
        }
    }
}

/// Prints with the minimal parentheses needed for `parse` to rebuild the same tree.
impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Num(v) => write!(f, "{v}"),
            Expr::Var(x) => f.write_str(x.name()),
            Expr::Neg(e) => {
                if e.precedence() < 3 {
                    write!(f, "-({e})")
                } else {
                    write!(f, "-{e}")
                }
            }
            Expr::Bin(op, a, b) => {
                let p = op.precedence();
                if a.precedence() < p {
                    write!(f, "({a})")?;
                } else {
                    write!(f, "{a}")?;
                }
                write!(f, " {} ", op.symbol())?;
                if b.precedence() <= p {
                    write!(f, "({b})")
                } else {
                    write!(f, "{b}")
                }
            }
            Expr::Call(func, args) => {
                write!(f, "{}(", func.name())?;
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{a}")?;
                }
                f.write_str(")")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Sym(char),
    End,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Num(v) => format!("number {v}"),
            Tok::Ident(s) => format!("`{s}`"),
            Tok::Sym(c) => format!("`{c}`"),
            Tok::End => "end of input".into(),
        }
    }
}

fn tokenize(src: &str) -> Result<Vec<(usize, Tok)>, IdentifyError> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        if c.is_ascii_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() || (c == '.' && bytes.get(i + 1).is_some_and(|b| b.is_ascii_digit())) {
            let start = i;
            while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
                i += 1;
            }
            if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                let mut j = i + 1;
                if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                    j += 1;
                }
                if j < bytes.len() && bytes[j].is_ascii_digit() {
                    while j < bytes.len() && bytes[j].is_ascii_digit() {
                        j += 1;
                    }
                    i = j;
                }
            }
            let text = &src[start..i];
            let v: f64 = text.parse().map_err(|_| IdentifyError::Parse {
                position: start,
                expected: "number".into(),
                found: format!("`{text}`"),
            })?;
            if !v.is_finite() {
                return Err(IdentifyError::Parse {
                    position: start,
                    expected: "finite number".into(),
                    found: format!("`{text}`"),
                });
            }
            out.push((start, Tok::Num(v)));
        } else if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            out.push((start, Tok::Ident(src[start..i].to_string())));
        } else if "+-*/(),".contains(c) {
            out.push((i, Tok::Sym(c)));
            i += 1;
        } else {
            let ch = src[i..].chars().next().unwrap();
            return Err(IdentifyError::Parse {
                position: i,
                expected: "number, identifier, operator or parenthesis".into(),
                found: format!("`{ch}`"),
            });
        }
    }
    out.push((src.len(), Tok::End));
    Ok(out)
}

struct Parser {
    toks: Vec<(usize, Tok)>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].1
    }

    fn error(&self, expected: &str) -> IdentifyError {
        let (position, tok) = &self.toks[self.pos];
        IdentifyError::Parse {
            position: *position,
            expected: expected.into(),
            found: tok.describe(),
        }
    }

    fn expect(&mut self, c: char) -> Result<(), IdentifyError> {
        if *self.peek() == Tok::Sym(c) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.error(&format!("`{c}`")))
        }
    }

    fn expr(&mut self) -> Result<Expr, IdentifyError> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek() {
                Tok::Sym('+') => BinOp::Add,
                Tok::Sym('-') => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.pos += 1;
            lhs = Expr::bin(op, lhs, self.term()?);
        }
    }

    fn term(&mut self) -> Result<Expr, IdentifyError> {
        let mut lhs = self.factor()?;
        loop {
            let op = match self.peek() {
                Tok::Sym('*') => BinOp::Mul,
                Tok::Sym('/') => BinOp::Div,
                _ => return Ok(lhs),
            };
            self.pos += 1;
            lhs = Expr::bin(op, lhs, self.factor()?);
        }
    }

    fn factor(&mut self) -> Result<Expr, IdentifyError> {
        match self.peek().clone() {
            Tok::Num(v) => {
                self.pos += 1;
                Ok(Expr::Num(v))
            }
            Tok::Sym('-') => {
                self.pos += 1;
                Ok(Expr::Neg(Box::new(self.factor()?)))
            }
            Tok::Sym('(') => {
                self.pos += 1;
                let e = self.expr()?;
                self.expect(')')?;
                Ok(e)
            }
            Tok::Ident(name) => {
                self.pos += 1;
                if let Some(func) = Func::from_name(&name) {
                    self.expect('(')?;
                    let mut args = vec![self.expr()?];
                    while *self.peek() == Tok::Sym(',') {
                        self.pos += 1;
                        args.push(self.expr()?);
                    }
                    let (lo, hi) = func.arity();
                    if args.len() < lo || args.len() > hi {
                        return Err(self.error(&format!("`)` after {lo} argument(s) to {}", func.name())));
                    }
                    self.expect(')')?;
                    Ok(Expr::Call(func, args))
                } else if let Some(f) = Feature::from_name(&name) {
                    Ok(Expr::Var(f))
                } else {
                    Err(IdentifyError::UnknownIdentifier(name))
                }
            }
            _ => Err(self.error("number, identifier, `(` or `-`")),
        }
    }
}

/// Parses source text into an expression tree.
pub fn parse_expr(source: &str) -> Result<Expr, IdentifyError> {
    let mut p = Parser {
        toks: tokenize(source)?,
        pos: 0,
    };
    let e = p.expr()?;
    if *p.peek() != Tok::End {
        return Err(p.error("operator or end of input"));
    }
    Ok(e)
}

/// A parsed identification function.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreProgram {
    pub source: String,
    pub ast: Expr,
    pub structure_hash: String,
}

impl ScoreProgram {
    pub fn parse(source: &str) -> Result<Self, IdentifyError> {
        let ast = parse_expr(source)?;
        Ok(Self::from_ast_with_source(ast, source.trim().to_string()))
    }

    /// Builds a program whose source is the printed form of `ast`.
    pub fn from_ast(ast: Expr) -> Self {
        let source = ast.to_string();
        Self::from_ast_with_source(ast, source)
    }

    fn from_ast_with_source(ast: Expr, source: String) -> Self {
        let structure_hash = structure_hash(&ast);
        Self {
            source,
            ast,
            structure_hash,
        }
    }

    pub fn eval(&self, fv: &FeatureVector) -> f64 {
        eval_expr(&self.ast, fv)
    }

    pub fn pretty(&self) -> String {
        self.ast.to_string()
    }
}

impl fmt::Display for ScoreProgram {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.source)
    }
}

pub fn parse_program(source: &str) -> Result<ScoreProgram, IdentifyError> {
    ScoreProgram::parse(source)
}

/// Hex SHA-256 of the tree shape with all numeric literals erased.
pub fn structure_hash(ast: &Expr) -> String {
    let mut shape = String::new();
    ast.write_shape(&mut shape);
    hex::encode(Sha256::digest(shape.as_bytes()))
}

fn sat(x: f64) -> f64 {
    if x.is_nan() {
        0.0
    } else {
        x.clamp(-SATURATION, SATURATION)
    }
}

/// Total evaluation: division by |d| < 1e-9 uses sign(d)·1e-9, sqrt of a
/// negative is 0, exp arguments are capped and every intermediate result is
/// saturated, so the result is always finite.
pub fn eval_expr(e: &Expr, fv: &FeatureVector) -> f64 {
    match e {
        Expr::Num(v) => sat(*v),
        Expr::Var(f) => sat(fv.get(*f)),
        Expr::Neg(a) => -eval_expr(a, fv),
        Expr::Bin(op, a, b) => {
            let x = eval_expr(a, fv);
            let y = eval_expr(b, fv);
            sat(match op {
                BinOp::Add => x + y,
                BinOp::Sub => x - y,
                BinOp::Mul => x * y,
                BinOp::Div => {
                    let d = if y.abs() < DIV_EPS { DIV_EPS.copysign(y) } else { y };
                    x / d
                }
            })
        }
        Expr::Call(func, args) => {
            let mut vals = args.iter().map(|a| eval_expr(a, fv));
            sat(match func {
                Func::Min => vals.fold(f64::INFINITY, f64::min),
                Func::Max => vals.fold(f64::NEG_INFINITY, f64::max),
                Func::Exp => vals.next().unwrap().min(EXP_ARG_MAX).exp(),
                Func::Abs => vals.next().unwrap().abs(),
                Func::Sqrt => {
                    let v = vals.next().unwrap();
                    if v < 0.0 {
                        0.0
                    } else {
                        v.sqrt()
                    }
                }
                Func::Clip => {
                    let v: Vec<f64> = vals.collect();
                    v[0].max(v[1]).min(v[2])
                }
            })
        }
    }
}

pub fn eval_program(p: &ScoreProgram, fv: &FeatureVector) -> f64 {
    p.eval(fv)
}

/// Sidecar metadata stored next to a program's text file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProgramRecord {
    pub source: String,
    pub structure_hash: String,
    pub eval_history: Vec<f64>,
}

impl ProgramRecord {
    pub fn new(p: &ScoreProgram, eval_history: Vec<f64>) -> Self {
        Self {
            source: p.source.clone(),
            structure_hash: p.structure_hash.clone(),
            eval_history,
        }
    }
}

/// Writes `<stem>.dsl` and `<stem>.json` into `dir`.
pub fn save_program(dir: impl AsRef<Path>, stem: &str, record: &ProgramRecord) -> Result<(), ScenarioError> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| ScenarioError::io(dir, e))?;
    let text = dir.join(format!("{stem}.dsl"));
    std::fs::write(&text, format!("{}\n", record.source)).map_err(|e| ScenarioError::io(&text, e))?;
    let side = dir.join(format!("{stem}.json"));
    let value = serde_json::to_value(record).expect("record serializes");
    std::fs::write(&side, crate::io::to_canonical_string(&value)).map_err(|e| ScenarioError::io(&side, e))
}

/// Reads a program from a `.dsl` text file.
pub fn load_program(path: impl AsRef<Path>) -> Result<ScoreProgram, ScenarioError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| ScenarioError::io(path, e))?;
    ScoreProgram::parse(&text).map_err(|e| ScenarioError::Validation(format!("{}: {e}", path.display())))
}
