//! Receding-horizon model files: parsing, lowering to a parameterized cone
//! program family, per-step solving and closed-loop simulation.

mod affine;
mod ast;
mod compile;
mod lexer;
mod parser;
mod semantic;
mod simulate;

use std::fmt;

use indexmap::IndexMap;
use thiserror::Error;

use crate::certify::CertifyError;
use crate::linalg::DenseMatrix;

pub use affine::Affine;
pub use ast::{Constraint, Expr, IndexArg, OutputSpec, Program, Range, Rel, VarDecl};
pub use compile::{compile, compile_with, CompileOptions, CompiledFamily, InstanceSolution, ParamCone, Recomputed};
pub use parser::{parse_program, Pos, SourceMap, SECTIONS};
pub use semantic::{Information, LoweredCone, LoweredConstraint, LoweredCost, Variable};
pub use simulate::{simulate, simulate_with_step, Trajectory, TrajectoryRow};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MpcError {
    #[error("syntax error at line {line}, column {col}: expected {expected}, found {found}")]
    Syntax { line: usize, col: usize, expected: String, found: String },
    #[error("{context} (line {line}, column {col}): undefined identifier '{name}'")]
    UndefinedIdentifier { name: String, context: String, line: usize, col: usize },
    #[error("{context} (line {line}, column {col}): dimension mismatch in {op}: {}x{} vs {}x{}", left.0, left.1, right.0, right.1)]
    DimensionMismatch { context: String, op: String, left: (usize, usize), right: (usize, usize), line: usize, col: usize },
    #[error("{context} (line {line}, column {col}): non-convex construct: {detail}")]
    NonConvexConstruct { context: String, detail: String, line: usize, col: usize },
    #[error("{context} (line {line}, column {col}): {detail}")]
    Invalid { context: String, detail: String, line: usize, col: usize },
    #[error("unsupported model: {0}")]
    Unsupported(String),
    #[error("missing information value '{0}' and recomputation is disabled")]
    MissingInformation(String),
    #[error(transparent)]
    Certify(#[from] CertifyError),
    #[error("solve failed for x_o = {x_o:?}: {detail}")]
    Solve { x_o: Vec<f64>, detail: String },
}

impl MpcError {
    /// `(line, col)` for diagnostics that carry a location.
    pub fn location(&self) -> Option<(usize, usize)> {
        match self {
            MpcError::Syntax { line, col, .. }
            | MpcError::UndefinedIdentifier { line, col, .. }
            | MpcError::DimensionMismatch { line, col, .. }
            | MpcError::NonConvexConstruct { line, col, .. }
            | MpcError::Invalid { line, col, .. } => Some((*line, *col)),
            _ => None,
        }
    }
}

/// A validated model: syntax tree plus resolved names, shapes and lowered
/// constraints.
#[derive(Debug, Clone)]
pub struct MpcModel {
    pub program: Program,
    pub source_map: SourceMap,
    pub input: (String, usize),
    pub constants: IndexMap<String, DenseMatrix>,
    pub variables: Vec<Variable>,
    pub information: Information,
    pub cost: LoweredCost,
    pub constraints: Vec<LoweredConstraint>,
    /// Output rows over `(X, x_o)`; `None` for an empty Output section.
    pub output: Option<Affine>,
}

impl MpcModel {
    /// Total number of scalar decision variables.
    pub fn n_x(&self) -> usize {
        self.variables.iter().map(Variable::len).sum()
    }

    pub fn variable(&self, name: &str) -> Option<&Variable> {
        self.variables.iter().find(|v| v.name == name)
    }

    pub fn constant(&self, name: &str) -> Option<&DenseMatrix> {
        self.constants.get(name)
    }

    pub fn num_groups(&self) -> usize {
        self.constraints.len()
    }

    /// Number of norm terms in the objective.
    pub fn num_norm_atoms(&self) -> usize {
        self.cost.norms.len()
    }
}

impl fmt::Display for MpcModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.program.fmt(f)
    }
}

/// Parses and validates a model file.
pub fn parse(text: &str) -> Result<MpcModel, MpcError> {
    let (program, source_map) = parse_program(text)?;
    let r = semantic::resolve(&program, &source_map)?;
    Ok(MpcModel {
        program,
        source_map,
        input: r.input,
        constants: r.constants,
        variables: r.variables,
        information: r.information,
        cost: r.lowered.cost,
        constraints: r.lowered.constraints,
        output: r.lowered.output,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const HELI: &str = include_str!("../../tests/data/helicopter.mpc");

    fn small(body: &str) -> String {
        format!("Input\nxo(2)\nConstants\nH = 2;\nVariables\nx(2,H) u(1,H)\nMinimize\n{body}\n")
    }

    #[test]
    fn helicopter_dimensions() {
        let m = parse(HELI).unwrap();
        assert_eq!(m.input, ("xo".to_string(), 6));
        assert_eq!(m.constant("A").unwrap().shape(), (6, 6));
        assert_eq!(m.constant("B").unwrap().shape(), (6, 2));
        assert_eq!(m.constant("Aobs").unwrap().get(1, 1), 40.0);
        assert_eq!(m.constant("bosbt").unwrap().shape(), (2, 1));
        let x = m.variable("x").unwrap();
        let u = m.variable("u").unwrap();
        assert_eq!((x.rows, x.cols, x.offset), (6, 6, 0));
        assert_eq!((u.rows, u.cols, u.offset), (2, 5, 36));
        assert_eq!(m.num_norm_atoms(), 6);
        let i = m.information;
        assert_eq!(i.r, Some(8.06));
        assert_eq!(i.big_r, Some(322.0));
        assert_eq!(i.v, Some(162.0));
        assert_eq!(i.eps, Some(0.25));
        assert_eq!(i.lambda, Some(1.000695409372118));
        let eqs: usize = m.constraints.iter().map(|c| c.equalities.len()).sum();
        assert_eq!(eqs, 36);
        assert_eq!(m.output.as_ref().unwrap().len(), 2);
    }

    #[test]
    fn two_norm_atoms() {
        let m = parse(&small("sum(||x(:,k)||, k=1..H)\nSubjectTo\nc1: x(:,1) = xo;")).unwrap();
        assert_eq!(m.num_norm_atoms(), 2);
    }

    #[test]
    fn norm_on_wrong_side_is_rejected() {
        let err = parse(&small("sum(||x(:,k)||, k=1..H)\nSubjectTo\nc1: x(:,1) = xo;\nbad: ||u(:,k)|| >= 1, k=1..H;"))
            .unwrap_err();
        match err {
            MpcError::NonConvexConstruct { context, line, .. } => {
                assert_eq!(context, "constraint bad");
                assert_eq!(line, 11);
            }
            other => panic!("unexpected {other:?}"),
        }
        let err = parse(&small("-||x(:,1)||\nSubjectTo\nc1: x(:,1) = xo;")).unwrap_err();
        assert!(matches!(err, MpcError::NonConvexConstruct { .. }));
        let err = parse(&small("x(1,1)*x(2,1)\nSubjectTo\nc1: x(:,1) = xo;")).unwrap_err();
        assert!(matches!(err, MpcError::NonConvexConstruct { .. }));
    }

    #[test]
    fn semantic_errors_name_the_constraint() {
        let err = parse(&small("x(1,1)\nSubjectTo\nc1: x(:,1) = yo;")).unwrap_err();
        match err {
            MpcError::UndefinedIdentifier { name, context, .. } => {
                assert_eq!(name, "yo");
                assert_eq!(context, "constraint c1");
            }
            other => panic!("unexpected {other:?}"),
        }
        let err = parse(&small("x(1,1)\nSubjectTo\nc2: x(:,1) = u(:,1) + [1;2;3];")).unwrap_err();
        match err {
            MpcError::DimensionMismatch { context, left, right, .. } => {
                assert_eq!(context, "constraint c2");
                assert_eq!((left, right), ((2, 1), (3, 1)));
            }
            other => panic!("unexpected {other:?}"),
        }
        let err = parse(&small("x(1,1)\nSubjectTo\nc3: x(3,1) = 0;")).unwrap_err();
        assert!(matches!(err, MpcError::Invalid { .. }));
        assert!(err.to_string().contains("c3"));
    }

    #[test]
    fn information_fields_are_checked() {
        let err = parse(&small("x(1,1)\nSubjectTo\nc1: x(:,1) = xo;\nInformation\nq = 1;")).unwrap_err();
        assert!(err.to_string().contains("unknown information field"));
        let m = parse(&small("x(1,1)\nSubjectTo\nc1: x(:,1) = xo;\nInformation\nr = H/1;")).err();
        assert!(m.is_some());
        let m = parse(&small("x(1,1)\nSubjectTo\nc1: x(:,1) = xo;\nInformation\nr = 2*H;")).unwrap();
        assert_eq!(m.information.r, Some(4.0));
        assert_eq!(m.information.v, None);
    }

    #[test]
    fn default_output_is_first_input_column() {
        let m = parse(&small("x(1,1)\nSubjectTo\nc1: x(:,1) = xo;")).unwrap();
        let out = m.output.unwrap();
        assert_eq!(out.len(), 1);
        assert_eq!(out.lin.get(0, 4), 1.0);
        let m = parse("Input\nxo(1)\nOutput\nVariables\nx(1,2)\nMinimize\nx(1,2)\nSubjectTo\nc: x(1,1) = xo;").unwrap();
        assert!(m.output.is_none());
    }

    #[test]
    fn pretty_print_round_trip() {
        let m = parse(HELI).unwrap();
        let printed = m.to_string();
        let again = parse(&printed).unwrap();
        assert_eq!(again.program, m.program);
        assert_eq!(again.constants, m.constants);
    }
}
