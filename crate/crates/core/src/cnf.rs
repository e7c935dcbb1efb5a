//! DIMACS CNF parsing, writing and clause-level evaluation.
//!
//! Variables are 1-based everywhere in the public API. The parser keeps clauses
//! in file order because the extractor consumes them sequentially.

use std::fmt;

use thiserror::Error;

/// A possibly negated variable. `var` is always at least 1.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Literal {
    pub var: u32,
    pub negated: bool,
}

impl Literal {
    pub fn pos(var: u32) -> Self {
        assert!(var >= 1, "variable indices are 1-based");
        Literal { var, negated: false }
    }

    pub fn neg(var: u32) -> Self {
        assert!(var >= 1, "variable indices are 1-based");
        Literal { var, negated: true }
    }

    /// Builds a literal from a signed DIMACS integer. Returns `None` for 0.
    pub fn from_dimacs(value: i64) -> Option<Self> {
        if value == 0 || value.unsigned_abs() > u32::MAX as u64 {
            return None;
        }
        Some(Literal {
            var: value.unsigned_abs() as u32,
            negated: value < 0,
        })
    }

    pub fn to_dimacs(self) -> i64 {
        if self.negated {
            -(self.var as i64)
        } else {
            self.var as i64
        }
    }

    pub fn complement(self) -> Self {
        Literal {
            var: self.var,
            negated: !self.negated,
        }
    }

    /// Whether the literal is true when its variable takes `value`.
    #[inline]
    pub fn satisfied_by(self, value: bool) -> bool {
        value != self.negated
    }
}

impl fmt::Display for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_dimacs())
    }
}

/// A nonempty disjunction of literals without repeated literals.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Clause {
    literals: Vec<Literal>,
}

impl Clause {
    /// Builds a clause, silently dropping repeated literals while keeping the
    /// first-occurrence order. Returns `None` for an empty literal list.
    pub fn new(literals: impl IntoIterator<Item = Literal>) -> Option<Self> {
        let mut out: Vec<Literal> = Vec::new();
        for lit in literals {
            if !out.contains(&lit) {
                out.push(lit);
            }
        }
        if out.is_empty() {
            None
        } else {
            Some(Clause { literals: out })
        }
    }

    /// Convenience constructor from signed DIMACS integers.
    ///
    /// Panics on zero or an empty list; meant for fixtures and generators.
    pub fn from_dimacs(lits: &[i64]) -> Self {
        Clause::new(lits.iter().map(|&l| Literal::from_dimacs(l).expect("zero literal")))
            .expect("empty clause")
    }

    pub fn literals(&self) -> &[Literal] {
        &self.literals
    }

    pub fn len(&self) -> usize {
        self.literals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.literals.is_empty()
    }

    pub fn vars(&self) -> impl Iterator<Item = u32> + '_ {
        self.literals.iter().map(|l| l.var)
    }

    pub fn contains(&self, lit: Literal) -> bool {
        self.literals.contains(&lit)
    }

    pub fn mentions(&self, var: u32) -> bool {
        self.literals.iter().any(|l| l.var == var)
    }

    /// True when the clause contains a complementary pair.
    pub fn is_tautology(&self) -> bool {
        self.literals
            .iter()
            .any(|l| self.literals.contains(&l.complement()))
    }

    pub fn max_var(&self) -> u32 {
        self.vars().max().unwrap_or(0)
    }

    /// Evaluates the clause with `value(var)` supplying variable values.
    #[inline]
    pub fn eval_with(&self, mut value: impl FnMut(u32) -> bool) -> bool {
        self.literals.iter().any(|l| l.satisfied_by(value(l.var)))
    }
}

/// A parsed DIMACS instance.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct CnfFormula {
    pub num_vars: u32,
    pub clauses: Vec<Clause>,
    pub comments: Vec<String>,
}

impl CnfFormula {
    pub fn new(num_vars: u32, clauses: Vec<Clause>) -> Self {
        debug_assert!(clauses.iter().all(|c| c.max_var() <= num_vars));
        CnfFormula {
            num_vars,
            clauses,
            comments: Vec::new(),
        }
    }

    pub fn num_clauses(&self) -> usize {
        self.clauses.len()
    }

    /// Checks every clause against a total assignment.
    pub fn eval(&self, assignment: &Assignment) -> Result<bool, EvalError> {
        eval_cnf(self, assignment)
    }

    /// Index of the first clause the assignment falsifies.
    pub fn first_violated(&self, assignment: &Assignment) -> Result<Option<usize>, EvalError> {
        check_total(self, assignment)?;
        Ok(self
            .clauses
            .iter()
            .position(|c| !c.eval_with(|v| assignment.value(v))))
    }
}

/// A total assignment over variables `1..=num_vars`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Assignment {
    values: Vec<bool>,
}

impl Assignment {
    pub fn new(values: Vec<bool>) -> Self {
        Assignment { values }
    }

    pub fn all_false(num_vars: u32) -> Self {
        Assignment {
            values: vec![false; num_vars as usize],
        }
    }

    /// Builds the assignment whose variable `v` takes bit `v - 1` of `bits`.
    pub fn from_bits(num_vars: u32, bits: u64) -> Self {
        assert!(num_vars <= 64);
        Assignment {
            values: (0..num_vars).map(|i| bits >> i & 1 == 1).collect(),
        }
    }

    pub fn num_vars(&self) -> u32 {
        self.values.len() as u32
    }

    /// Value of a 1-based variable. Panics when out of range.
    #[inline]
    pub fn value(&self, var: u32) -> bool {
        self.values[var as usize - 1]
    }

    pub fn get(&self, var: u32) -> Option<bool> {
        if var == 0 {
            return None;
        }
        self.values.get(var as usize - 1).copied()
    }

    pub fn set(&mut self, var: u32, value: bool) {
        self.values[var as usize - 1] = value;
    }

    pub fn values(&self) -> &[bool] {
        &self.values
    }

    /// Signed literals in ascending variable order.
    pub fn literals(&self) -> impl Iterator<Item = Literal> + '_ {
        self.values.iter().enumerate().map(|(i, &b)| Literal {
            var: i as u32 + 1,
            negated: !b,
        })
    }

    /// Model-line rendering: `1 -2 3 0`.
    pub fn to_model_line(&self) -> String {
        let mut line = String::with_capacity(self.values.len() * 4 + 1);
        for lit in self.literals() {
            line.push_str(&lit.to_dimacs().to_string());
            line.push(' ');
        }
        line.push('0');
        line
    }

    /// Parses a model line. Literals may appear in any order but must cover
    /// `1..=num_vars` exactly once; the trailing `0` is optional.
    pub fn from_model_line(line: &str, num_vars: u32) -> Result<Self, ParseError> {
        let mut values: Vec<Option<bool>> = vec![None; num_vars as usize];
        let mut tokens = line.split_whitespace().peekable();
        // `v` prefix as printed by SAT solvers
        if tokens.peek() == Some(&"v") {
            tokens.next();
        }
        for tok in tokens {
            let n: i64 = tok.parse().map_err(|_| ParseError::InvalidToken {
                line: 1,
                token: tok.to_string(),
            })?;
            if n == 0 {
                break;
            }
            let lit = Literal::from_dimacs(n).unwrap();
            if lit.var > num_vars {
                return Err(ParseError::VarOutOfRange {
                    line: 1,
                    var: lit.var,
                    num_vars,
                });
            }
            let slot = &mut values[lit.var as usize - 1];
            if slot.is_some() {
                return Err(ParseError::RepeatedVar { var: lit.var });
            }
            *slot = Some(!lit.negated);
        }
        let values = values
            .into_iter()
            .enumerate()
            .map(|(i, v)| v.ok_or(ParseError::MissingVar { var: i as u32 + 1 }))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Assignment { values })
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ParseError {
    #[error("missing `p cnf` header")]
    MissingHeader,
    #[error("line {line}: duplicate `p` header")]
    DuplicateHeader { line: usize },
    #[error("line {line}: malformed header `{text}`")]
    BadHeader { line: usize, text: String },
    #[error("line {line}: clause data before the `p cnf` header")]
    ClauseBeforeHeader { line: usize },
    #[error("line {line}: invalid token `{token}`")]
    InvalidToken { line: usize, token: String },
    #[error("line {line}: variable {var} exceeds declared count {num_vars}")]
    VarOutOfRange { line: usize, var: u32, num_vars: u32 },
    #[error("last clause is not terminated by 0")]
    UnterminatedClause,
    #[error("line {line}: empty clause")]
    EmptyClause { line: usize },
    #[error("header declares {declared} clauses but {found} were read")]
    ClauseCountMismatch { declared: usize, found: usize },
    #[error("variable {var} assigned twice")]
    RepeatedVar { var: u32 },
    #[error("variable {var} not assigned")]
    MissingVar { var: u32 },
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum EvalError {
    #[error("assignment covers {got} variables, formula has {expected}")]
    Partial { expected: u32, got: u32 },
}

/// Parser behaviour switches.
#[derive(Clone, Copy, Debug, Default)]
pub struct ParseOptions {
    /// Reject a header whose clause count disagrees with the body instead of
    /// warning.
    pub strict_clause_count: bool,
}

/// Parses DIMACS CNF text, warning about a stale clause count.
pub fn parse_dimacs(text: &str) -> Result<CnfFormula, ParseError> {
    parse_dimacs_with(text, ParseOptions::default())
}

pub fn parse_dimacs_with(text: &str, opts: ParseOptions) -> Result<CnfFormula, ParseError> {
    let mut header: Option<(u32, usize)> = None;
    let mut comments = Vec::new();
    let mut clauses = Vec::new();
    let mut current: Vec<Literal> = Vec::new();

    'lines: for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('c') {
            if rest.is_empty() || rest.starts_with(char::is_whitespace) {
                comments.push(rest.trim().to_string());
                continue;
            }
        }
        if line.starts_with('%') {
            // SATLIB end marker
            break;
        }
        if line.starts_with('p') {
            if header.is_some() {
                return Err(ParseError::DuplicateHeader { line: line_no });
            }
            header = Some(parse_header(line, line_no)?);
            continue;
        }
        let Some((num_vars, _)) = header else {
            return Err(ParseError::ClauseBeforeHeader { line: line_no });
        };
        for tok in line.split_whitespace() {
            if tok.starts_with('%') {
                break 'lines;
            }
            let n: i64 = tok.parse().map_err(|_| ParseError::InvalidToken {
                line: line_no,
                token: tok.to_string(),
            })?;
            if n == 0 {
                let lits = std::mem::take(&mut current);
                let clause = Clause::new(lits).ok_or(ParseError::EmptyClause { line: line_no })?;
                clauses.push(clause);
                continue;
            }
            let lit = Literal::from_dimacs(n).ok_or_else(|| ParseError::InvalidToken {
                line: line_no,
                token: tok.to_string(),
            })?;
            if lit.var > num_vars {
                return Err(ParseError::VarOutOfRange {
                    line: line_no,
                    var: lit.var,
                    num_vars,
                });
            }
            current.push(lit);
        }
    }

    let (num_vars, declared) = header.ok_or(ParseError::MissingHeader)?;
    if !current.is_empty() {
        return Err(ParseError::UnterminatedClause);
    }
    if declared != clauses.len() {
        if opts.strict_clause_count {
            return Err(ParseError::ClauseCountMismatch {
                declared,
                found: clauses.len(),
            });
        }
        log::warn!(
            "header declares {declared} clauses but {} were read; using the clause list",
            clauses.len()
        );
    }
    Ok(CnfFormula {
        num_vars,
        clauses,
        comments,
    })
}

fn parse_header(line: &str, line_no: usize) -> Result<(u32, usize), ParseError> {
    let bad = || ParseError::BadHeader {
        line: line_no,
        text: line.to_string(),
    };
    let mut parts = line.split_whitespace();
    if parts.next() != Some("p") || parts.next() != Some("cnf") {
        return Err(bad());
    }
    let vars = parts.next().and_then(|s| s.parse().ok()).ok_or_else(bad)?;
    let clauses = parts.next().and_then(|s| s.parse().ok()).ok_or_else(bad)?;
    if parts.next().is_some() {
        return Err(bad());
    }
    Ok((vars, clauses))
}

/// Renders a formula as DIMACS text. Comments go first, one per line.
pub fn write_dimacs(cnf: &CnfFormula) -> String {
    let mut out = String::new();
    for c in &cnf.comments {
        if c.is_empty() {
            out.push_str("c\n");
        } else {
            out.push_str("c ");
            out.push_str(c);
            out.push('\n');
        }
    }
    out.push_str(&format!("p cnf {} {}\n", cnf.num_vars, cnf.clauses.len()));
    for clause in &cnf.clauses {
        for lit in clause.literals() {
            out.push_str(&lit.to_dimacs().to_string());
            out.push(' ');
        }
        out.push_str("0\n");
    }
    out
}

fn check_total(cnf: &CnfFormula, a: &Assignment) -> Result<(), EvalError> {
    if a.num_vars() < cnf.num_vars {
        return Err(EvalError::Partial {
            expected: cnf.num_vars,
            got: a.num_vars(),
        });
    }
    Ok(())
}

/// True iff every clause has a literal satisfied by `a`.
///
/// An assignment over more variables than the formula declares is accepted;
/// the extra variables are ignored.
pub fn eval_cnf(cnf: &CnfFormula, a: &Assignment) -> Result<bool, EvalError> {
    check_total(cnf, a)?;
    Ok(cnf.clauses.iter().all(|c| c.eval_with(|v| a.value(v))))
}
