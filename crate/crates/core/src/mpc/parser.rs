use super::ast::{Constraint, Expr, IndexArg, OutputSpec, Program, Range, Rel, VarDecl};
use super::lexer::{tokenize, Tok, Token};
use super::MpcError;

pub const SECTIONS: [&str; 7] = ["Input", "Output", "Constants", "Variables", "Minimize", "SubjectTo", "Information"];

/// 1-based source position.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Pos {
    pub line: usize,
    pub col: usize,
}

/// Positions of the statements of a [`Program`], kept apart from the tree so
/// that trees compare equal regardless of layout.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SourceMap {
    pub input: Pos,
    pub output: Pos,
    pub constants: Vec<Pos>,
    pub variables: Vec<Pos>,
    pub objective: Pos,
    pub constraints: Vec<Pos>,
    pub information: Vec<Pos>,
}

struct Parser {
    toks: Vec<Token>,
    pos: usize,
    in_matrix: bool,
}

pub fn parse_program(src: &str) -> Result<(Program, SourceMap), MpcError> {
    let mut p = Parser { toks: tokenize(src)?, pos: 0, in_matrix: false };
    p.program()
}

impl Parser {
    fn peek(&self) -> &Token {
        &self.toks[self.pos]
    }

    fn here(&self) -> Pos {
        let t = self.peek();
        Pos { line: t.line, col: t.col }
    }

    fn advance(&mut self) -> Token {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn error(&self, expected: &str) -> MpcError {
        let t = self.peek();
        MpcError::Syntax { line: t.line, col: t.col, expected: expected.to_string(), found: t.tok.describe() }
    }

    fn expect(&mut self, tok: Tok, expected: &str) -> Result<Token, MpcError> {
        if self.peek().tok == tok {
            Ok(self.advance())
        } else {
            Err(self.error(expected))
        }
    }

    fn eat(&mut self, tok: Tok) -> bool {
        if self.peek().tok == tok {
            self.advance();
            true
        } else {
            false
        }
    }

    fn at_keyword(&self, kw: &str) -> bool {
        matches!(&self.peek().tok, Tok::Ident(s) if s == kw)
    }

    fn at_section_or_eof(&self) -> bool {
        match &self.peek().tok {
            Tok::Ident(s) => SECTIONS.contains(&s.as_str()),
            Tok::Eof => true,
            _ => false,
        }
    }

    fn keyword(&mut self, kw: &str) -> Result<(), MpcError> {
        if self.at_keyword(kw) {
            self.advance();
            Ok(())
        } else {
            Err(self.error(&format!("section '{kw}'")))
        }
    }

    fn ident(&mut self, expected: &str) -> Result<String, MpcError> {
        match &self.peek().tok {
            Tok::Ident(s) if !SECTIONS.contains(&s.as_str()) => {
                let s = s.clone();
                self.advance();
                Ok(s)
            }
            _ => Err(self.error(expected)),
        }
    }

    fn program(&mut self) -> Result<(Program, SourceMap), MpcError> {
        let mut map = SourceMap::default();
        self.keyword("Input")?;
        map.input = self.here();
        let input_name = self.ident("input name")?;
        self.expect(Tok::LParen, "'(' after the input name")?;
        let input_dim = self.expr()?;
        self.expect(Tok::RParen, "')'")?;
        self.eat(Tok::Semi);

        let output = if self.at_keyword("Output") {
            self.advance();
            map.output = self.here();
            if self.at_section_or_eof() {
                OutputSpec::Empty
            } else {
                let e = self.expr()?;
                self.eat(Tok::Semi);
                OutputSpec::Expr(e)
            }
        } else {
            OutputSpec::Default
        };

        let mut constants = Vec::new();
        if self.at_keyword("Constants") {
            self.advance();
            while !self.at_section_or_eof() {
                map.constants.push(self.here());
                constants.push(self.assignment("constant name")?);
            }
        }

        self.keyword("Variables")?;
        let mut variables = Vec::new();
        while !self.at_section_or_eof() {
            map.variables.push(self.here());
            let name = self.ident("variable name")?;
            self.expect(Tok::LParen, "'(' after the variable name")?;
            let rows = self.expr()?;
            self.expect(Tok::Comma, "',' between variable dimensions")?;
            let cols = self.expr()?;
            self.expect(Tok::RParen, "')'")?;
            if !self.eat(Tok::Comma) {
                self.eat(Tok::Semi);
            }
            variables.push(VarDecl { name, rows, cols });
        }
        if variables.is_empty() {
            return Err(self.error("a variable declaration"));
        }

        self.keyword("Minimize")?;
        map.objective = self.here();
        let objective = self.expr()?;
        self.eat(Tok::Semi);

        self.keyword("SubjectTo")?;
        let mut constraints = Vec::new();
        while !self.at_section_or_eof() {
            map.constraints.push(self.here());
            constraints.push(self.constraint()?);
        }

        let information = if self.at_keyword("Information") {
            self.advance();
            let mut info = Vec::new();
            while !self.at_section_or_eof() {
                map.information.push(self.here());
                info.push(self.assignment("information field")?);
            }
            Some(info)
        } else {
            None
        };
        if self.peek().tok != Tok::Eof {
            return Err(self.error("end of input"));
        }
        let program = Program { input_name, input_dim, output, constants, variables, objective, constraints, information };
        Ok((program, map))
    }

    fn assignment(&mut self, what: &str) -> Result<(String, Expr), MpcError> {
        let name = self.ident(what)?;
        self.expect(Tok::Assign, "'='")?;
        let e = self.expr()?;
        if !self.eat(Tok::Semi) && !self.at_section_or_eof() && !matches!(self.peek().tok, Tok::Ident(_)) {
            return Err(self.error("';'"));
        }
        Ok((name, e))
    }

    fn constraint(&mut self) -> Result<Constraint, MpcError> {
        let name = self.ident("constraint name")?;
        self.expect(Tok::Colon, "':' after the constraint name")?;
        let lhs = self.expr()?;
        let rel = match self.peek().tok {
            Tok::Assign => Rel::Eq,
            Tok::Le => Rel::Le,
            Tok::Ge => Rel::Ge,
            _ => return Err(self.error("'=', '<=' or '>='")),
        };
        self.advance();
        let rhs = self.expr()?;
        let range = if self.eat(Tok::Comma) { Some(self.range()?) } else { None };
        if !self.eat(Tok::Semi) && !self.at_section_or_eof() {
            return Err(self.error("';' after the constraint"));
        }
        Ok(Constraint { name, lhs, rel, rhs, range })
    }

    fn range(&mut self) -> Result<Range, MpcError> {
        let var = self.ident("range variable")?;
        self.expect(Tok::Assign, "'=' in the range")?;
        let lo = self.expr()?;
        self.expect(Tok::DotDot, "'..' in the range")?;
        let hi = self.expr()?;
        Ok(Range { var, lo, hi })
    }

    fn nested<T>(&mut self, in_matrix: bool, f: impl FnOnce(&mut Self) -> Result<T, MpcError>) -> Result<T, MpcError> {
        let saved = self.in_matrix;
        self.in_matrix = in_matrix;
        let out = f(self);
        self.in_matrix = saved;
        out
    }

    fn expr(&mut self) -> Result<Expr, MpcError> {
        let mut lhs = self.term()?;
        loop {
            let t = self.peek();
            let is_add = match t.tok {
                Tok::Plus => true,
                Tok::Minus => false,
                _ => break,
            };
            if self.in_matrix && t.space_before && !t.space_after {
                break;
            }
            self.advance();
            let rhs = self.term()?;
            lhs = if is_add { Expr::Add(Box::new(lhs), Box::new(rhs)) } else { Expr::Sub(Box::new(lhs), Box::new(rhs)) };
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Expr, MpcError> {
        let mut lhs = self.unary()?;
        while self.eat(Tok::Star) {
            let rhs = self.unary()?;
            lhs = Expr::Mul(Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr, MpcError> {
        if self.eat(Tok::Minus) {
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        if self.eat(Tok::Plus) {
            return self.unary();
        }
        self.primary()
    }

    fn primary(&mut self) -> Result<Expr, MpcError> {
        match self.peek().tok.clone() {
            Tok::Num(x) => {
                self.advance();
                Ok(Expr::Num(x))
            }
            Tok::Ident(name) if !SECTIONS.contains(&name.as_str()) => {
                self.advance();
                if self.peek().tok != Tok::LParen {
                    return Ok(Expr::Ident(name));
                }
                self.advance();
                if name == "sum" {
                    return self.nested(false, |p| {
                        let body = p.expr()?;
                        p.expect(Tok::Comma, "',' before the summation range")?;
                        let range = p.range()?;
                        p.expect(Tok::RParen, "')' closing sum")?;
                        Ok(Expr::Sum { body: Box::new(body), range: Box::new(range) })
                    });
                }
                self.nested(false, |p| {
                    let mut args = Vec::new();
                    loop {
                        if p.eat(Tok::Colon) {
                            args.push(IndexArg::All);
                        } else {
                            args.push(IndexArg::At(p.expr()?));
                        }
                        if p.eat(Tok::RParen) {
                            break;
                        }
                        p.expect(Tok::Comma, "',' or ')' in the index list")?;
                    }
                    Ok(Expr::Index(name, args))
                })
            }
            Tok::LParen => {
                self.advance();
                self.nested(false, |p| {
                    let e = p.expr()?;
                    p.expect(Tok::RParen, "')'")?;
                    Ok(e)
                })
            }
            Tok::LBracket => {
                self.advance();
                self.nested(true, |p| p.matrix())
            }
            Tok::Bars => {
                self.advance();
                self.nested(false, |p| {
                    let e = p.expr()?;
                    p.expect(Tok::Bars, "'||' closing the norm")?;
                    Ok(Expr::Norm(Box::new(e)))
                })
            }
            _ => Err(self.error("an expression")),
        }
    }

    fn matrix(&mut self) -> Result<Expr, MpcError> {
        let mut rows: Vec<Vec<Expr>> = Vec::new();
        let mut row: Vec<Expr> = Vec::new();
        loop {
            match self.peek().tok {
                Tok::RBracket => {
                    self.advance();
                    if !row.is_empty() {
                        rows.push(row);
                    }
                    return Ok(Expr::Matrix(rows));
                }
                Tok::Semi => {
                    self.advance();
                    if !row.is_empty() {
                        rows.push(std::mem::take(&mut row));
                    }
                }
                Tok::Comma if !row.is_empty() => {
                    self.advance();
                }
                Tok::Eof => return Err(self.error("']'")),
                _ => row.push(self.expr()?),
            }
        }
    }
}
