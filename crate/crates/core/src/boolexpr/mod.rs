//! Symbolic Boolean expressions.
//!
//! Expressions are kept in a canonical shape by the smart constructors
//! ([`BoolExpr::and`], [`BoolExpr::or`], [`BoolExpr::xor`], [`BoolExpr::not`]):
//! nested operators of the same kind are flattened, operands are sorted and
//! deduplicated, constants are folded and double negations never appear. Two
//! expressions built this way from the same pieces compare equal structurally.
//!
//! Exact reasoning (complement checks, minimization) goes through packed truth
//! tables over the sorted support, which bounds it to small supports; see
//! [`SimplifyConfig`].

mod decompose;
mod minimize;
mod text;
mod truth;

use std::collections::BTreeSet;
use std::fmt;

use thiserror::Error;

use crate::cnf::{Clause, Literal};

pub use decompose::{decompose_two_input, Decomposition, Gate2, GateOp, Operand};
pub use minimize::{minimize_sop, Cube};
pub use text::{parse_expr, ExprParseError};
pub use truth::TruthTable;

/// Support size up to which complement checks are decided exactly.
pub const DEFAULT_COMPLEMENT_CAP: usize = 16;
/// Support size up to which two-level minimization runs.
pub const DEFAULT_MINIMIZE_CAP: usize = 12;

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BoolExpr {
    Const(bool),
    Var(u32),
    Not(Box<BoolExpr>),
    And(Vec<BoolExpr>),
    Or(Vec<BoolExpr>),
    Xor(Vec<BoolExpr>),
    /// Negated parity of the operands.
    Xnor(Vec<BoolExpr>),
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("variable x{0} has no value")]
pub struct MissingVar(pub u32);

/// Sorted, deduplicated set of variables appearing in an expression.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct Support(Vec<u32>);

impl Support {
    pub fn vars(&self) -> &[u32] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, var: u32) -> bool {
        self.0.binary_search(&var).is_ok()
    }

    pub fn union(&self, other: &Support) -> Support {
        let set: BTreeSet<u32> = self.0.iter().chain(other.0.iter()).copied().collect();
        Support(set.into_iter().collect())
    }
}

impl FromIterator<u32> for Support {
    fn from_iter<I: IntoIterator<Item = u32>>(iter: I) -> Self {
        let set: BTreeSet<u32> = iter.into_iter().collect();
        Support(set.into_iter().collect())
    }
}

/// Three-valued answer of [`is_complement`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Complement {
    Yes,
    No,
    /// The union support exceeded the cap; nothing was decided.
    Undecided,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SimplifyConfig {
    pub minimize_cap: usize,
}

impl Default for SimplifyConfig {
    fn default() -> Self {
        SimplifyConfig {
            minimize_cap: DEFAULT_MINIMIZE_CAP,
        }
    }
}

impl BoolExpr {
    pub const TRUE: BoolExpr = BoolExpr::Const(true);
    pub const FALSE: BoolExpr = BoolExpr::Const(false);

    pub fn var(v: u32) -> Self {
        BoolExpr::Var(v)
    }

    pub fn lit(lit: Literal) -> Self {
        if lit.negated {
            BoolExpr::Not(Box::new(BoolExpr::Var(lit.var)))
        } else {
            BoolExpr::Var(lit.var)
        }
    }

    #[allow(clippy::should_implement_trait)]
    pub fn not(e: BoolExpr) -> Self {
        match e {
            BoolExpr::Const(b) => BoolExpr::Const(!b),
            BoolExpr::Not(inner) => *inner,
            BoolExpr::Xor(cs) => BoolExpr::Xnor(cs),
            BoolExpr::Xnor(cs) => BoolExpr::Xor(cs),
            other => BoolExpr::Not(Box::new(other)),
        }
    }

    pub fn and(children: impl IntoIterator<Item = BoolExpr>) -> Self {
        Self::lattice(children, true)
    }

    pub fn or(children: impl IntoIterator<Item = BoolExpr>) -> Self {
        Self::lattice(children, false)
    }

    // Shared body of `and` (identity true) and `or` (identity false).
    fn lattice(children: impl IntoIterator<Item = BoolExpr>, is_and: bool) -> Self {
        let identity = is_and;
        let mut flat: Vec<BoolExpr> = Vec::new();
        let mut stack: Vec<BoolExpr> = children.into_iter().collect();
        stack.reverse();
        while let Some(c) = stack.pop() {
            match c {
                BoolExpr::Const(b) if b == identity => {}
                BoolExpr::Const(_) => return BoolExpr::Const(!identity),
                BoolExpr::And(cs) if is_and => stack.extend(cs.into_iter().rev()),
                BoolExpr::Or(cs) if !is_and => stack.extend(cs.into_iter().rev()),
                other => flat.push(other),
            }
        }
        flat.sort();
        flat.dedup();
        // x and ~x together annihilate
        for c in &flat {
            if let BoolExpr::Not(inner) = c {
                if flat.binary_search(inner).is_ok() {
                    return BoolExpr::Const(!identity);
                }
            }
        }
        match flat.len() {
            0 => BoolExpr::Const(identity),
            1 => flat.pop().unwrap(),
            _ if is_and => BoolExpr::And(flat),
            _ => BoolExpr::Or(flat),
        }
    }

    pub fn xor(children: impl IntoIterator<Item = BoolExpr>) -> Self {
        Self::parity(children, false)
    }

    pub fn xnor(children: impl IntoIterator<Item = BoolExpr>) -> Self {
        Self::parity(children, true)
    }

    fn parity(children: impl IntoIterator<Item = BoolExpr>, mut negate: bool) -> Self {
        let mut flat: Vec<BoolExpr> = Vec::new();
        let mut stack: Vec<BoolExpr> = children.into_iter().collect();
        while let Some(c) = stack.pop() {
            match c {
                BoolExpr::Const(b) => negate ^= b,
                BoolExpr::Not(inner) => {
                    negate = !negate;
                    stack.push(*inner);
                }
                BoolExpr::Xor(cs) => stack.extend(cs),
                BoolExpr::Xnor(cs) => {
                    negate = !negate;
                    stack.extend(cs);
                }
                other => flat.push(other),
            }
        }
        flat.sort();
        // x ^ x = 0
        let mut kept: Vec<BoolExpr> = Vec::with_capacity(flat.len());
        for c in flat {
            if kept.last() == Some(&c) {
                kept.pop();
            } else {
                kept.push(c);
            }
        }
        match kept.len() {
            0 => BoolExpr::Const(negate),
            1 => {
                let c = kept.pop().unwrap();
                if negate {
                    BoolExpr::not(c)
                } else {
                    c
                }
            }
            _ if negate => BoolExpr::Xnor(kept),
            _ => BoolExpr::Xor(kept),
        }
    }

    /// Disjunction of the literals of a clause.
    pub fn clause(lits: &[Literal]) -> Self {
        BoolExpr::or(lits.iter().map(|&l| BoolExpr::lit(l)))
    }

    pub fn is_const(&self) -> Option<bool> {
        match self {
            BoolExpr::Const(b) => Some(*b),
            _ => None,
        }
    }

    pub fn children(&self) -> &[BoolExpr] {
        match self {
            BoolExpr::Const(_) | BoolExpr::Var(_) => &[],
            BoolExpr::Not(c) => std::slice::from_ref(c),
            BoolExpr::And(cs) | BoolExpr::Or(cs) | BoolExpr::Xor(cs) | BoolExpr::Xnor(cs) => cs,
        }
    }

    pub fn support(&self) -> Support {
        let mut vars = BTreeSet::new();
        self.collect_vars(&mut vars);
        Support(vars.into_iter().collect())
    }

    fn collect_vars(&self, out: &mut BTreeSet<u32>) {
        match self {
            BoolExpr::Var(v) => {
                out.insert(*v);
            }
            _ => self.children().iter().for_each(|c| c.collect_vars(out)),
        }
    }

    /// Evaluates under `lookup`, which must cover the support.
    pub fn eval(&self, lookup: &impl Fn(u32) -> Option<bool>) -> Result<bool, MissingVar> {
        Ok(match self {
            BoolExpr::Const(b) => *b,
            BoolExpr::Var(v) => lookup(*v).ok_or(MissingVar(*v))?,
            BoolExpr::Not(c) => !c.eval(lookup)?,
            BoolExpr::And(cs) => {
                let mut acc = true;
                for c in cs {
                    acc &= c.eval(lookup)?;
                }
                acc
            }
            BoolExpr::Or(cs) => {
                let mut acc = false;
                for c in cs {
                    acc |= c.eval(lookup)?;
                }
                acc
            }
            BoolExpr::Xor(cs) | BoolExpr::Xnor(cs) => {
                let mut acc = matches!(self, BoolExpr::Xnor(_));
                for c in cs {
                    acc ^= c.eval(lookup)?;
                }
                acc
            }
        })
    }

    /// Cost in 2-input gates: an n-ary operator counts n - 1, inverters and
    /// constants are free.
    pub fn gate_equivalents(&self) -> usize {
        let own = match self {
            BoolExpr::And(cs) | BoolExpr::Or(cs) | BoolExpr::Xor(cs) | BoolExpr::Xnor(cs) => {
                cs.len() - 1
            }
            _ => 0,
        };
        own + self.children().iter().map(|c| c.gate_equivalents()).sum::<usize>()
    }

    pub fn not_count(&self) -> usize {
        let own = usize::from(matches!(self, BoolExpr::Not(_)));
        own + self.children().iter().map(|c| c.not_count()).sum::<usize>()
    }

    pub fn node_count(&self) -> usize {
        1 + self.children().iter().map(|c| c.node_count()).sum::<usize>()
    }

    /// Replaces every variable through `map`.
    pub fn substitute(&self, map: &impl Fn(u32) -> BoolExpr) -> BoolExpr {
        match self {
            BoolExpr::Const(b) => BoolExpr::Const(*b),
            BoolExpr::Var(v) => map(*v),
            BoolExpr::Not(c) => BoolExpr::not(c.substitute(map)),
            BoolExpr::And(cs) => BoolExpr::and(cs.iter().map(|c| c.substitute(map))),
            BoolExpr::Or(cs) => BoolExpr::or(cs.iter().map(|c| c.substitute(map))),
            BoolExpr::Xor(cs) => BoolExpr::xor(cs.iter().map(|c| c.substitute(map))),
            BoolExpr::Xnor(cs) => BoolExpr::xnor(cs.iter().map(|c| c.substitute(map))),
        }
    }
}

impl fmt::Display for BoolExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        text::write_expr(self, f)
    }
}

/// Expression a clause group forces on `target`.
///
/// Collects every clause containing the complement of `target`; each such
/// clause must be satisfied by its other literals once `target` holds. The
/// result is the conjunction of those residual disjunctions. Clauses without
/// the complement are already satisfied and ignored.
pub fn find_boolean_expression(target: Literal, clauses: &[Clause]) -> BoolExpr {
    let opposite = target.complement();
    let mut factors = Vec::new();
    for clause in clauses {
        if !clause.contains(opposite) {
            continue;
        }
        let rest: Vec<Literal> = clause
            .literals()
            .iter()
            .copied()
            .filter(|&l| l != opposite)
            .collect();
        factors.push(BoolExpr::clause(&rest));
    }
    BoolExpr::and(factors)
}

/// Decides `f == !g` by exhaustive truth tables over the union support.
pub fn is_complement(f: &BoolExpr, g: &BoolExpr, cap: usize) -> Complement {
    // Cheap structural hits first.
    if let (Some(a), Some(b)) = (f.is_const(), g.is_const()) {
        return if a != b { Complement::Yes } else { Complement::No };
    }
    let vars = f.support().union(&g.support());
    if vars.len() > cap {
        return Complement::Undecided;
    }
    let tf = TruthTable::of(f, vars.vars());
    let tg = TruthTable::of(g, vars.vars());
    if tf.is_complement_of(&tg) {
        Complement::Yes
    } else {
        Complement::No
    }
}

/// Semantics-preserving simplification.
///
/// Local algebraic rules always run. When the support has at most
/// `cfg.minimize_cap` variables the truth table decides constants exactly and
/// the cheapest of a minimized sum-of-products, product-of-sums, parity form
/// and the algebraic form is returned.
pub fn simplify(e: &BoolExpr, cfg: SimplifyConfig) -> BoolExpr {
    let algebraic = algebraic(e);
    let support = algebraic.support();
    if support.is_empty() || support.len() > cfg.minimize_cap {
        return algebraic;
    }
    let table = TruthTable::of(&algebraic, support.vars());
    if table.is_zero() {
        return BoolExpr::FALSE;
    }
    if table.is_ones() {
        return BoolExpr::TRUE;
    }

    let mut candidates = Vec::with_capacity(4);
    if let Some(p) = parity_form(&table) {
        candidates.push(p);
    }
    candidates.push(sop_expr(&minimize_sop(&table), table.vars()));
    candidates.push(pos_expr(&minimize_sop(&table.complement()), table.vars()));
    candidates.push(algebraic);

    let cost = |e: &BoolExpr| (e.gate_equivalents(), e.not_count(), e.node_count());
    let mut best = candidates.remove(0);
    for c in candidates {
        if cost(&c) < cost(&best) {
            best = c;
        }
    }
    best
}

// Rebuilds through the smart constructors and applies absorption.
fn algebraic(e: &BoolExpr) -> BoolExpr {
    match e {
        BoolExpr::Const(_) | BoolExpr::Var(_) => e.clone(),
        BoolExpr::Not(c) => BoolExpr::not(algebraic(c)),
        BoolExpr::And(cs) => absorb(BoolExpr::and(cs.iter().map(algebraic))),
        BoolExpr::Or(cs) => absorb(BoolExpr::or(cs.iter().map(algebraic))),
        BoolExpr::Xor(cs) => BoolExpr::xor(cs.iter().map(algebraic)),
        BoolExpr::Xnor(cs) => BoolExpr::xnor(cs.iter().map(algebraic)),
    }
}

// x & (x | y) = x and x | (x & y) = x
fn absorb(e: BoolExpr) -> BoolExpr {
    let (cs, is_and) = match &e {
        BoolExpr::And(cs) => (cs, true),
        BoolExpr::Or(cs) => (cs, false),
        _ => return e,
    };
    let kept: Vec<BoolExpr> = cs
        .iter()
        .filter(|c| {
            let inner = match (c, is_and) {
                (BoolExpr::Or(inner), true) | (BoolExpr::And(inner), false) => inner,
                _ => return true,
            };
            !inner.iter().any(|x| cs.contains(x))
        })
        .cloned()
        .collect();
    if kept.len() == cs.len() {
        return e;
    }
    if is_and {
        BoolExpr::and(kept)
    } else {
        BoolExpr::or(kept)
    }
}

fn parity_form(table: &TruthTable) -> Option<BoolExpr> {
    let live: Vec<usize> = (0..table.vars().len())
        .filter(|&i| table.depends_on(i))
        .collect();
    if live.len() < 2 {
        return None;
    }
    let parity = live
        .iter()
        .map(|&i| TruthTable::projection(table.vars(), i))
        .reduce(|a, b| a.xor(&b))
        .unwrap();
    let operands = || live.iter().map(|&i| BoolExpr::Var(table.vars()[i]));
    if &parity == table {
        Some(BoolExpr::xor(operands()))
    } else if parity.is_complement_of(table) {
        Some(BoolExpr::xnor(operands()))
    } else {
        None
    }
}

fn sop_expr(cubes: &[Cube], vars: &[u32]) -> BoolExpr {
    BoolExpr::or(cubes.iter().map(|cube| {
        BoolExpr::and(cube.literals(vars).map(BoolExpr::lit))
    }))
}

// Product of sums from a cover of the complement, by De Morgan.
fn pos_expr(cubes_of_complement: &[Cube], vars: &[u32]) -> BoolExpr {
    BoolExpr::and(cubes_of_complement.iter().map(|cube| {
        BoolExpr::or(cube.literals(vars).map(|l| BoolExpr::lit(l.complement())))
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn x(v: u32) -> BoolExpr {
        BoolExpr::var(v)
    }

    fn nx(v: u32) -> BoolExpr {
        BoolExpr::not(x(v))
    }

    fn mux_x5_clauses() -> Vec<Clause> {
        vec![
            Clause::from_dimacs(&[-4, -107, 5]),
            Clause::from_dimacs(&[-4, 107, -5]),
            Clause::from_dimacs(&[4, -108, 5]),
            Clause::from_dimacs(&[4, 108, -5]),
        ]
    }

    fn same_function(a: &BoolExpr, b: &BoolExpr) -> bool {
        let vars = a.support().union(&b.support());
        TruthTable::of(a, vars.vars()) == TruthTable::of(b, vars.vars())
    }

    #[test]
    fn constructors_canonicalize() {
        assert_eq!(BoolExpr::not(BoolExpr::not(x(1))), x(1));
        assert_eq!(BoolExpr::and([x(2), x(1)]), BoolExpr::and([x(1), x(2)]));
        assert_eq!(
            BoolExpr::and([x(1), BoolExpr::and([x(2), x(3)])]),
            BoolExpr::And(vec![x(1), x(2), x(3)])
        );
        assert_eq!(BoolExpr::and([x(1), nx(1)]), BoolExpr::FALSE);
        assert_eq!(BoolExpr::or([x(1), nx(1)]), BoolExpr::TRUE);
        assert_eq!(BoolExpr::and([x(1), BoolExpr::TRUE]), x(1));
        assert_eq!(BoolExpr::or([x(1), BoolExpr::TRUE]), BoolExpr::TRUE);
        assert_eq!(BoolExpr::and(Vec::new()), BoolExpr::TRUE);
        assert_eq!(BoolExpr::xor([x(1), x(1)]), BoolExpr::FALSE);
        assert_eq!(BoolExpr::xor([x(1), nx(2)]), BoolExpr::Xnor(vec![x(1), x(2)]));
        assert_eq!(BoolExpr::not(BoolExpr::xor([x(1), x(2)])), BoolExpr::xnor([x(1), x(2)]));
        assert_eq!(BoolExpr::xor([x(1), BoolExpr::TRUE]), nx(1));
    }

    #[test]
    fn find_expression_mux_x5() {
        let sc = mux_x5_clauses();
        let f = find_boolean_expression(Literal::pos(5), &sc);
        assert_eq!(
            f,
            BoolExpr::and([BoolExpr::or([nx(4), x(107)]), BoolExpr::or([x(4), x(108)])])
        );
        let g = find_boolean_expression(Literal::neg(5), &sc);
        assert_eq!(
            g,
            BoolExpr::and([BoolExpr::or([nx(4), nx(107)]), BoolExpr::or([x(4), nx(108)])])
        );
        assert_eq!(is_complement(&f, &g, DEFAULT_COMPLEMENT_CAP), Complement::Yes);

        let s = simplify(&f, SimplifyConfig::default());
        let mux = BoolExpr::or([BoolExpr::and([x(107), x(4)]), BoolExpr::and([x(108), nx(4)])]);
        assert!(same_function(&s, &mux));
        assert!(s.gate_equivalents() <= 5);
        assert_eq!(s, mux);
        assert_eq!(s.to_string(), "(x4 & x107) | (x108 & ~x4)");
    }

    #[test]
    fn find_expression_without_negated_occurrence_is_true() {
        let sc = vec![Clause::from_dimacs(&[10])];
        assert_eq!(find_boolean_expression(Literal::pos(10), &sc), BoolExpr::TRUE);
        assert_eq!(find_boolean_expression(Literal::neg(10), &sc), BoolExpr::FALSE);
    }

    #[test]
    fn complement_basics() {
        assert_eq!(is_complement(&x(1), &x(1), 16), Complement::No);
        assert_eq!(is_complement(&x(1), &nx(1), 16), Complement::Yes);
        let maj = |a: BoolExpr, b: BoolExpr, c: BoolExpr| {
            BoolExpr::or([
                BoolExpr::and([a.clone(), b.clone()]),
                BoolExpr::and([a, c.clone()]),
                BoolExpr::and([b, c]),
            ])
        };
        let f = maj(x(1), x(2), x(3));
        let g = maj(nx(1), nx(2), nx(3));
        assert_eq!(is_complement(&f, &g, 16), Complement::Yes);
        let wide = BoolExpr::and((1..=17).map(x));
        assert_eq!(is_complement(&wide, &BoolExpr::not(wide.clone()), 16), Complement::Undecided);
    }

    #[test]
    fn simplify_contradiction() {
        // constructors already fold x & ~x; hide it behind an Or
        let e = BoolExpr::And(vec![x(1), BoolExpr::Or(vec![nx(1), BoolExpr::FALSE])]);
        assert_eq!(simplify(&e, SimplifyConfig::default()), BoolExpr::FALSE);
    }

    #[test]
    fn simplify_recovers_parity_from_xor_signature() {
        for n in 2..=6u32 {
            // f <-> XOR(x1..xn); clauses containing ~f give the XOR function.
            let f_var = n + 1;
            let mut clauses = Vec::new();
            for bits in 0u32..(1 << n) {
                // forbid assignments where f != parity(bits)
                let parity = bits.count_ones() % 2 == 1;
                let mut lits: Vec<i64> = (0..n)
                    .map(|i| if bits >> i & 1 == 1 { -((i + 1) as i64) } else { (i + 1) as i64 })
                    .collect();
                lits.push(if parity { f_var as i64 } else { -(f_var as i64) });
                clauses.push(Clause::from_dimacs(&lits));
            }
            let f = find_boolean_expression(Literal::pos(f_var), &clauses);
            let flat_cost = f.gate_equivalents();
            let s = simplify(&f, SimplifyConfig::default());
            assert_eq!(s, BoolExpr::xor((1..=n).map(x)), "n = {n}");
            assert_eq!(s.gate_equivalents(), n as usize - 1);
            assert!(s.gate_equivalents() < flat_cost);
            let g = find_boolean_expression(Literal::neg(f_var), &clauses);
            assert_eq!(is_complement(&f, &g, 16), Complement::Yes);
        }
    }

    #[test]
    fn support_and_eval() {
        assert!(BoolExpr::TRUE.support().is_empty());
        let f = find_boolean_expression(Literal::pos(5), &mux_x5_clauses());
        assert_eq!(f.support().vars(), &[4, 107, 108]);
        let lookup = |v: u32| match v {
            4 => Some(true),
            107 => Some(true),
            108 => Some(false),
            _ => None,
        };
        assert_eq!(f.eval(&lookup), Ok(true));
        assert_eq!(BoolExpr::FALSE.eval(&|_| None), Ok(false));
        assert_eq!(x(3).eval(&|_| None), Err(MissingVar(3)));
    }

    #[test]
    fn expression_matches_clause_group_truth_table() {
        let sc = mux_x5_clauses();
        let f = find_boolean_expression(Literal::pos(5), &sc);
        for bits in 0u32..8 {
            let (a, b, c) = (bits & 1 == 1, bits & 2 == 2, bits & 4 == 4);
            let look = |v: u32| match v {
                4 => Some(a),
                107 => Some(b),
                108 => Some(c),
                _ => None,
            };
            // with x5 = 1, the clause group holds iff f
            let group = sc.iter().all(|cl| {
                cl.eval_with(|v| if v == 5 { true } else { look(v).unwrap() })
            });
            assert_eq!(f.eval(&look).unwrap(), group);
        }
    }

    pub(crate) fn arb_expr(max_var: u32) -> impl Strategy<Value = BoolExpr> {
        let leaf = prop_oneof![
            1 => any::<bool>().prop_map(BoolExpr::Const),
            6 => (1..=max_var).prop_map(BoolExpr::Var),
        ];
        leaf.prop_recursive(5, 40, 4, |inner| {
            prop_oneof![
                inner.clone().prop_map(BoolExpr::not),
                prop::collection::vec(inner.clone(), 2..4).prop_map(BoolExpr::and),
                prop::collection::vec(inner.clone(), 2..4).prop_map(BoolExpr::or),
                prop::collection::vec(inner.clone(), 2..4).prop_map(BoolExpr::xor),
                prop::collection::vec(inner, 2..4).prop_map(BoolExpr::xnor),
            ]
        })
    }

    // Raw trees that skip the constructors, to exercise simplify on
    // non-canonical input.
    fn arb_raw_expr(max_var: u32) -> impl Strategy<Value = BoolExpr> {
        let leaf = prop_oneof![
            1 => any::<bool>().prop_map(BoolExpr::Const),
            6 => (1..=max_var).prop_map(BoolExpr::Var),
        ];
        leaf.prop_recursive(5, 40, 4, |inner| {
            prop_oneof![
                inner.clone().prop_map(|e| BoolExpr::Not(Box::new(e))),
                prop::collection::vec(inner.clone(), 2..4).prop_map(BoolExpr::And),
                prop::collection::vec(inner.clone(), 2..4).prop_map(BoolExpr::Or),
                prop::collection::vec(inner.clone(), 2..4).prop_map(BoolExpr::Xor),
                prop::collection::vec(inner, 2..4).prop_map(BoolExpr::Xnor),
            ]
        })
    }

    fn support_by_scan(e: &BoolExpr, out: &mut Vec<u32>) {
        if let BoolExpr::Var(v) = e {
            out.push(*v);
        }
        for c in e.children() {
            support_by_scan(c, out);
        }
    }

    proptest! {
        #[test]
        fn simplify_preserves_truth_table(e in arb_raw_expr(12)) {
            let s = simplify(&e, SimplifyConfig::default());
            let vars = e.support().union(&s.support());
            prop_assert_eq!(TruthTable::of(&e, vars.vars()), TruthTable::of(&s, vars.vars()));
            prop_assert!(s.gate_equivalents() <= algebraic(&e).gate_equivalents());
        }

        #[test]
        fn simplify_decides_constants(e in arb_raw_expr(6)) {
            let s = simplify(&e, SimplifyConfig::default());
            let vars = e.support();
            let t = TruthTable::of(&e, vars.vars());
            if t.is_zero() { prop_assert_eq!(s, BoolExpr::FALSE); }
            else if t.is_ones() { prop_assert_eq!(s, BoolExpr::TRUE); }
        }

        #[test]
        fn support_matches_leaf_scan(e in arb_expr(20)) {
            let mut leaves = Vec::new();
            support_by_scan(&e, &mut leaves);
            let expected: Support = leaves.into_iter().collect();
            prop_assert_eq!(e.support(), expected);
        }

        #[test]
        fn complement_agrees_with_brute_force(f in arb_expr(6), g in arb_expr(6)) {
            let vars = f.support().union(&g.support());
            let n = vars.len();
            let mut complementary = true;
            for bits in 0u32..(1 << n) {
                let look = |v: u32| vars.vars().iter().position(|&w| w == v).map(|i| bits >> i & 1 == 1);
                if f.eval(&look).unwrap() == g.eval(&look).unwrap() {
                    complementary = false;
                }
            }
            let expected = if complementary { Complement::Yes } else { Complement::No };
            prop_assert_eq!(is_complement(&f, &g, 16), expected);
        }

        #[test]
        fn constructors_are_idempotent(e in arb_expr(8)) {
            prop_assert_eq!(algebraic(&e).substitute(&BoolExpr::Var), algebraic(&e));
        }

        #[test]
        fn find_expression_satisfies_negated_clauses(
            raw in prop::collection::vec(prop::collection::vec((1u32..=6, any::<bool>()), 1..4), 1..6)
        ) {
            let clauses: Vec<Clause> = raw
                .iter()
                .filter_map(|c| Clause::new(c.iter().map(|&(v, n)| Literal { var: v, negated: n })))
                .collect();
            let target = Literal::pos(1);
            let f = find_boolean_expression(target, &clauses);
            for bits in 0u32..64 {
                let look = |v: u32| Some(bits >> (v - 1) & 1 == 1);
                if f.eval(&look).unwrap() {
                    // with x1 = 1 every clause holding ~x1 must be satisfied
                    for c in clauses.iter().filter(|c| c.contains(target.complement())) {
                        let sat = c.eval_with(|v| if v == 1 { true } else { look(v).unwrap() });
                        prop_assert!(sat);
                    }
                }
            }
        }
    }
}
