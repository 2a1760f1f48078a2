//! Syntax tree of a model file and its pretty-printer. Printing then
//! re-parsing yields an identical tree.

use std::fmt::{self, Write};

#[derive(Debug, Clone, PartialEq)]
pub enum IndexArg {
    All,
    At(Expr),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    Ident(String),
    /// `name(args)`: a slice of a variable, input or constant.
    Index(String, Vec<IndexArg>),
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    /// Bracketed literal, rows of entries (entries may be blocks).
    Matrix(Vec<Vec<Expr>>),
    Norm(Box<Expr>),
    Sum { body: Box<Expr>, range: Box<Range> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Range {
    pub var: String,
    pub lo: Expr,
    pub hi: Expr,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Rel {
    Eq,
    Le,
    Ge,
}

impl Rel {
    pub fn as_str(&self) -> &'static str {
        match self {
            Rel::Eq => "=",
            Rel::Le => "<=",
            Rel::Ge => ">=",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub name: String,
    pub lhs: Expr,
    pub rel: Rel,
    pub rhs: Expr,
    pub range: Option<Range>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VarDecl {
    pub name: String,
    pub rows: Expr,
    pub cols: Expr,
}

#[derive(Debug, Clone, PartialEq)]
pub enum OutputSpec {
    /// Section absent.
    Default,
    /// Section present with nothing in it: no control is applied.
    Empty,
    Expr(Expr),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Program {
    pub input_name: String,
    pub input_dim: Expr,
    pub output: OutputSpec,
    pub constants: Vec<(String, Expr)>,
    pub variables: Vec<VarDecl>,
    pub objective: Expr,
    pub constraints: Vec<Constraint>,
    /// `None` when the section is absent.
    pub information: Option<Vec<(String, Expr)>>,
}

fn prec(e: &Expr) -> u8 {
    match e {
        Expr::Add(..) | Expr::Sub(..) => 1,
        Expr::Mul(..) => 2,
        Expr::Neg(..) => 3,
        _ => 4,
    }
}

fn write_wrapped(f: &mut impl Write, e: &Expr, min: u8) -> fmt::Result {
    if prec(e) < min {
        write!(f, "(")?;
        write_expr(f, e)?;
        write!(f, ")")
    } else {
        write_expr(f, e)
    }
}

pub fn write_expr(f: &mut impl Write, e: &Expr) -> fmt::Result {
    match e {
        Expr::Num(x) => write!(f, "{x}"),
        Expr::Ident(s) => write!(f, "{s}"),
        Expr::Index(name, args) => {
            write!(f, "{name}(")?;
            for (i, a) in args.iter().enumerate() {
                if i > 0 {
                    write!(f, ", ")?;
                }
                match a {
                    IndexArg::All => write!(f, ":")?,
                    IndexArg::At(e) => write_expr(f, e)?,
                }
            }
            write!(f, ")")
        }
        Expr::Neg(a) => {
            write!(f, "-")?;
            write_wrapped(f, a, 3)
        }
        Expr::Add(a, b) => {
            write_wrapped(f, a, 1)?;
            write!(f, " + ")?;
            write_wrapped(f, b, 2)
        }
        Expr::Sub(a, b) => {
            write_wrapped(f, a, 1)?;
            write!(f, " - ")?;
            write_wrapped(f, b, 2)
        }
        Expr::Mul(a, b) => {
            write_wrapped(f, a, 2)?;
            write!(f, " * ")?;
            write_wrapped(f, b, 3)
        }
        Expr::Matrix(rows) => {
            write!(f, "[")?;
            for (i, row) in rows.iter().enumerate() {
                if i > 0 {
                    write!(f, "; ")?;
                }
                for (j, e) in row.iter().enumerate() {
                    if j > 0 {
                        write!(f, ", ")?;
                    }
                    write_expr(f, e)?;
                }
            }
            write!(f, "]")
        }
        Expr::Norm(a) => {
            write!(f, "||")?;
            write_expr(f, a)?;
            write!(f, "||")
        }
        Expr::Sum { body, range } => {
            write!(f, "sum(")?;
            write_expr(f, body)?;
            write!(f, ", ")?;
            write_range(f, range)?;
            write!(f, ")")
        }
    }
}

fn write_range(f: &mut impl Write, r: &Range) -> fmt::Result {
    write!(f, "{} = ", r.var)?;
    write_expr(f, &r.lo)?;
    write!(f, "..")?;
    write_expr(f, &r.hi)
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_expr(f, self)
    }
}

impl fmt::Display for Program {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Input")?;
        writeln!(f, "{}({})", self.input_name, self.input_dim)?;
        match &self.output {
            OutputSpec::Default => {}
            OutputSpec::Empty => writeln!(f, "Output")?,
            OutputSpec::Expr(e) => writeln!(f, "Output\n{e}")?,
        }
        if !self.constants.is_empty() {
            writeln!(f, "Constants")?;
            for (name, e) in &self.constants {
                writeln!(f, "{name} = {e};")?;
            }
        }
        writeln!(f, "Variables")?;
        for v in &self.variables {
            writeln!(f, "{}({}, {})", v.name, v.rows, v.cols)?;
        }
        writeln!(f, "Minimize\n{}", self.objective)?;
        writeln!(f, "SubjectTo")?;
        for c in &self.constraints {
            write!(f, "{}: {} {} {}", c.name, c.lhs, c.rel.as_str(), c.rhs)?;
            if let Some(r) = &c.range {
                write!(f, ", ")?;
                write_range(f, r)?;
            }
            writeln!(f, ";")?;
        }
        if let Some(info) = &self.information {
            writeln!(f, "Information")?;
            for (name, e) in info {
                writeln!(f, "{name} = {e};")?;
            }
        }
        Ok(())
    }
}
