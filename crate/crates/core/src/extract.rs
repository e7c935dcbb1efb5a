//! Recovery of a multi-level, multi-output Boolean function from CNF.
//!
//! Clauses are read in order into a sub-clause buffer. After each clause, every
//! variable of the buffer that is still unclassified is tried as the output of
//! the buffered clauses: the expression forced by the clauses holding its
//! negative literal must be the exact complement of the one forced by the
//! clauses holding its positive literal. On a match the clauses mentioning the
//! variable are replaced by the definition `v = f`.
//!
//! A buffer that shares no variable with the next clause, or is left over at
//! the end, is encoded as one auxiliary output constrained to 1.

use std::collections::{BTreeMap, BTreeSet, HashSet, VecDeque};

use serde::{Deserialize, Serialize};

use crate::boolexpr::{
    find_boolean_expression, is_complement, simplify, BoolExpr, Complement, SimplifyConfig,
    DEFAULT_COMPLEMENT_CAP, DEFAULT_MINIMIZE_CAP,
};
use crate::cnf::{Assignment, Clause, CnfFormula, Literal};

/// Order in which buffered variables are tried as outputs.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CandidateOrder {
    /// Reading order of the buffer.
    FirstAppearance,
    /// Largest variable index first. Encoders number gate outputs after their
    /// inputs, so this picks the output of single-input gates whose clause
    /// pattern is symmetric in both variables.
    #[default]
    HighestIndexFirst,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ExtractorConfig {
    pub complement_cap: usize,
    pub minimize_cap: usize,
    pub candidate_order: CandidateOrder,
}

impl Default for ExtractorConfig {
    fn default() -> Self {
        ExtractorConfig {
            complement_cap: DEFAULT_COMPLEMENT_CAP,
            minimize_cap: DEFAULT_MINIMIZE_CAP,
            candidate_order: CandidateOrder::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Definition {
    pub var: u32,
    pub expr: BoolExpr,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct OutputTarget {
    pub var: u32,
    pub target: bool,
}

/// Why extraction proved the instance unsatisfiable.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Conflict {
    pub var: u32,
    pub detail: String,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ExtractionResult {
    pub num_vars: u32,
    /// Primary inputs in classification order. A constrained input also
    /// appears in `po`.
    pub pi: Vec<u32>,
    /// Defined signals without an output constraint.
    pub iv: Vec<u32>,
    /// Constrained outputs with their forced values, in discovery order.
    pub po: Vec<OutputTarget>,
    /// Definitions in discovery order; dependencies always come first.
    pub be: Vec<Definition>,
    /// Auxiliary outputs, numbered from `num_vars + 1`.
    pub aux: Vec<u32>,
    /// Set when two constraints on one variable contradict each other.
    pub conflict: Option<Conflict>,
}

/// Inputs split by whether they reach a constrained output.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct PathClassification {
    pub constrained_pi: Vec<u32>,
    pub unconstrained_pi: Vec<u32>,
}

impl ExtractionResult {
    pub fn is_unsat(&self) -> bool {
        self.conflict.is_some()
    }

    pub fn aux_base(&self) -> u32 {
        self.num_vars + 1
    }

    /// Largest variable id including auxiliaries.
    pub fn total_vars(&self) -> u32 {
        self.num_vars + self.aux.len() as u32
    }

    pub fn definition(&self, var: u32) -> Option<&BoolExpr> {
        self.be.iter().find(|d| d.var == var).map(|d| &d.expr)
    }

    pub fn target(&self, var: u32) -> Option<bool> {
        self.po.iter().find(|o| o.var == var).map(|o| o.target)
    }

    /// Whether a full assignment over the original variables agrees with every
    /// definition and meets every output target. Auxiliary values are
    /// computed from their definitions.
    pub fn consistent_with(&self, a: &Assignment) -> bool {
        if self.is_unsat() {
            return false;
        }
        let mut aux_values: BTreeMap<u32, bool> = BTreeMap::new();
        for d in &self.be {
            let lookup = |v: u32| {
                if v <= self.num_vars {
                    a.get(v)
                } else {
                    aux_values.get(&v).copied()
                }
            };
            let value = d.expr.eval(&lookup).expect("definition support is assigned");
            if d.var > self.num_vars {
                aux_values.insert(d.var, value);
            } else if a.value(d.var) != value {
                return false;
            }
        }
        self.po.iter().all(|o| {
            let value = if o.var > self.num_vars {
                aux_values[&o.var]
            } else {
                a.value(o.var)
            };
            value == o.target
        })
    }

    /// Splits the inputs by reverse reachability from the outputs over the
    /// definition graph.
    pub fn classify_paths(&self) -> PathClassification {
        classify_paths(self)
    }
}

/// Reverse reachability from constrained outputs.
pub fn classify_paths(res: &ExtractionResult) -> PathClassification {
    let deps: BTreeMap<u32, Vec<u32>> = res
        .be
        .iter()
        .map(|d| (d.var, d.expr.support().vars().to_vec()))
        .collect();
    let mut seen: HashSet<u32> = HashSet::new();
    let mut queue: VecDeque<u32> = res.po.iter().map(|o| o.var).collect();
    while let Some(v) = queue.pop_front() {
        if !seen.insert(v) {
            continue;
        }
        if let Some(ds) = deps.get(&v) {
            queue.extend(ds.iter().copied().filter(|d| !seen.contains(d)));
        }
    }
    let (constrained_pi, unconstrained_pi) = res.pi.iter().partition(|v| seen.contains(v));
    PathClassification {
        constrained_pi,
        unconstrained_pi,
    }
}

/// Buffered variables in first-appearance order.
pub fn candidate_scan_order(sc: &[Clause]) -> Vec<u32> {
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for clause in sc {
        for v in clause.vars() {
            if seen.insert(v) {
                out.push(v);
            }
        }
    }
    out
}

/// Whether the buffered clauses share no variable with `next`.
pub fn underspecified_trigger(sc: &[Clause], next: Option<&Clause>) -> bool {
    if sc.is_empty() {
        return false;
    }
    match next {
        None => true,
        Some(next) => !sc.iter().any(|c| c.vars().any(|v| next.mentions(v))),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Role {
    Free,
    Input,
    Defined,
    Constant,
}

/// Auxiliary definition emitted for an under-specified buffer.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Fallback {
    pub aux: u32,
    pub expr: BoolExpr,
    pub target: bool,
}

/// Incremental form of [`extract`]; feed clauses in order, then `finish`.
#[derive(Debug)]
pub struct Extractor {
    cfg: ExtractorConfig,
    roles: Vec<Role>,
    sc: Vec<Clause>,
    res: ExtractionResult,
}

impl Extractor {
    pub fn new(num_vars: u32, cfg: ExtractorConfig) -> Self {
        Extractor {
            cfg,
            roles: vec![Role::Free; num_vars as usize + 1],
            sc: Vec::new(),
            res: ExtractionResult {
                num_vars,
                ..Default::default()
            },
        }
    }

    fn simplify_cfg(&self) -> SimplifyConfig {
        SimplifyConfig {
            minimize_cap: self.cfg.minimize_cap,
        }
    }

    fn role(&self, v: u32) -> Role {
        self.roles[v as usize]
    }

    pub fn buffer(&self) -> &[Clause] {
        &self.sc
    }

    pub fn is_unsat(&self) -> bool {
        self.res.is_unsat()
    }

    /// Feeds one clause. Tautologies are dropped.
    pub fn push_clause(&mut self, clause: &Clause) {
        if self.is_unsat() || clause.is_tautology() {
            return;
        }
        if underspecified_trigger(&self.sc, Some(clause)) {
            let sc = std::mem::take(&mut self.sc);
            self.handle_underspecified(&sc);
            if self.is_unsat() {
                return;
            }
        }
        self.sc.push(clause.clone());
        while !self.is_unsat() && self.try_commit() {}
    }

    fn scan_order(&self) -> Vec<u32> {
        let mut order = candidate_scan_order(&self.sc);
        if self.cfg.candidate_order == CandidateOrder::HighestIndexFirst {
            order.sort_unstable_by(|a, b| b.cmp(a));
        }
        order
    }

    // One pass over the candidates; true when some clauses were consumed.
    fn try_commit(&mut self) -> bool {
        if self.sc.is_empty() {
            return false;
        }
        for v in self.scan_order() {
            let f = find_boolean_expression(Literal::pos(v), &self.sc);
            let g = find_boolean_expression(Literal::neg(v), &self.sc);
            if is_complement(&f, &g, self.cfg.complement_cap) != Complement::Yes {
                continue;
            }
            let def = simplify(&f, self.simplify_cfg());
            match self.role(v) {
                Role::Free => {
                    if let Some(c) = def.is_const() {
                        self.roles[v as usize] = Role::Constant;
                        self.res.be.push(Definition { var: v, expr: def });
                        self.add_target(v, c);
                    } else {
                        for u in def.support().vars() {
                            if self.role(*u) == Role::Free {
                                self.roles[*u as usize] = Role::Input;
                                self.res.pi.push(*u);
                            }
                        }
                        self.roles[v as usize] = Role::Defined;
                        self.res.iv.push(v);
                        self.res.be.push(Definition { var: v, expr: def });
                    }
                }
                // A classified variable keeps its role; only a constant
                // constraint on it can be taken from the clauses.
                _ => match def.is_const() {
                    Some(c) => self.add_target(v, c),
                    None => continue,
                },
            }
            self.sc.retain(|c| !c.mentions(v));
            return true;
        }
        false
    }

    fn add_target(&mut self, var: u32, target: bool) {
        match self.res.target(var) {
            Some(t) if t == target => {}
            Some(t) => {
                self.res.conflict = Some(Conflict {
                    var,
                    detail: format!("x{var} forced to both {} and {}", u8::from(t), u8::from(target)),
                });
            }
            None => {
                self.res.iv.retain(|&v| v != var);
                self.res.po.push(OutputTarget { var, target });
            }
        }
    }

    /// Encodes `sc` as a fresh auxiliary output constrained to 1. Unclassified
    /// variables of `sc` become inputs.
    pub fn handle_underspecified(&mut self, sc: &[Clause]) -> Fallback {
        let conj = BoolExpr::and(sc.iter().map(|c| BoolExpr::clause(c.literals())));
        let expr = simplify(&conj, self.simplify_cfg());
        for v in candidate_scan_order(sc) {
            if self.role(v) == Role::Free {
                self.roles[v as usize] = Role::Input;
                self.res.pi.push(v);
            }
        }
        let aux = self.res.total_vars() + 1;
        self.res.aux.push(aux);
        self.res.be.push(Definition {
            var: aux,
            expr: expr.clone(),
        });
        self.res.po.push(OutputTarget { var: aux, target: true });
        if expr == BoolExpr::FALSE {
            self.res.conflict = Some(Conflict {
                var: aux,
                detail: format!("auxiliary x{aux} is constant 0 but constrained to 1"),
            });
        }
        Fallback {
            aux,
            expr,
            target: true,
        }
    }

    pub fn finish(mut self) -> ExtractionResult {
        if !self.is_unsat() && !self.sc.is_empty() {
            let sc = std::mem::take(&mut self.sc);
            self.handle_underspecified(&sc);
        }
        for v in 1..=self.res.num_vars {
            if self.role(v) == Role::Free {
                self.res.pi.push(v);
            }
        }
        debug_assert!(self.res.is_unsat() || definitions_are_ordered(&self.res));
        self.res
    }
}

/// Runs the clause scan over the whole formula.
pub fn extract(cnf: &CnfFormula, cfg: ExtractorConfig) -> ExtractionResult {
    let mut ex = Extractor::new(cnf.num_vars, cfg);
    for clause in &cnf.clauses {
        ex.push_clause(clause);
        if ex.is_unsat() {
            break;
        }
    }
    ex.finish()
}

/// Every definition reads only inputs or earlier definitions, and no variable
/// is defined twice.
pub fn definitions_are_ordered(res: &ExtractionResult) -> bool {
    let inputs: BTreeSet<u32> = res.pi.iter().copied().collect();
    let mut defined: BTreeSet<u32> = BTreeSet::new();
    for d in &res.be {
        if inputs.contains(&d.var) || defined.contains(&d.var) {
            return false;
        }
        if !d
            .expr
            .support()
            .vars()
            .iter()
            .all(|u| inputs.contains(u) || defined.contains(u))
        {
            return false;
        }
        defined.insert(d.var);
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cnf::parse_dimacs;
    use proptest::prelude::*;

    fn cnf(n: u32, clauses: &[&[i64]]) -> CnfFormula {
        CnfFormula::new(n, clauses.iter().map(|c| Clause::from_dimacs(c)).collect())
    }

    fn models_match(f: &CnfFormula, res: &ExtractionResult) -> bool {
        (0..1u64 << f.num_vars).all(|bits| {
            let a = Assignment::from_bits(f.num_vars, bits);
            f.eval(&a).unwrap() == res.consistent_with(&a)
        })
    }

    #[test]
    fn candidate_order_highest_first() {
        let sc = vec![
            Clause::from_dimacs(&[-4, -107, 5]),
            Clause::from_dimacs(&[-4, 107, -5]),
            Clause::from_dimacs(&[4, -108, 5]),
            Clause::from_dimacs(&[4, 108, -5]),
        ];
        assert_eq!(candidate_scan_order(&sc), vec![4, 107, 5, 108]);
        assert_eq!(candidate_scan_order(&sc[..1]), vec![4, 107, 5]);
        assert_eq!(candidate_scan_order(&[Clause::from_dimacs(&[-3])]), vec![3]);
    }

    #[test]
    fn unit_formula_forces_constant() {
        let f = parse_dimacs("p cnf 1 1\n1 0\n").unwrap();
        let res = extract(&f, ExtractorConfig::default());
        assert!(res.pi.is_empty());
        assert_eq!(res.po, vec![OutputTarget { var: 1, target: true }]);
        assert_eq!(res.definition(1), Some(&BoolExpr::TRUE));
        assert!(models_match(&f, &res));
    }

    #[test]
    fn or_output_constrained_becomes_aux() {
        let mut ex = Extractor::new(2, ExtractorConfig::default());
        ex.push_clause(&Clause::from_dimacs(&[1, 2]));
        let res = ex.finish();
        assert_eq!(res.aux, vec![3]);
        assert_eq!(res.definition(3), Some(&BoolExpr::or([BoolExpr::var(1), BoolExpr::var(2)])));
        assert_eq!(res.po, vec![OutputTarget { var: 3, target: true }]);
        assert_eq!(res.pi, vec![1, 2]);
        assert!(!res.is_unsat());
    }

    #[test]
    fn contradictory_buffer_is_unsat() {
        let mut ex = Extractor::new(1, ExtractorConfig::default());
        let fb = ex.handle_underspecified(&[Clause::from_dimacs(&[1]), Clause::from_dimacs(&[-1])]);
        assert_eq!(fb.expr, BoolExpr::FALSE);
        assert!(ex.is_unsat());

        let f = cnf(1, &[&[1], &[-1]]);
        let res = extract(&f, ExtractorConfig::default());
        assert!(res.is_unsat());
        assert_eq!(res.conflict.as_ref().unwrap().var, 1);
    }

    #[test]
    fn trigger_fires_on_disjoint_next_clause() {
        let sc = vec![Clause::from_dimacs(&[1, 2])];
        assert!(underspecified_trigger(&sc, Some(&Clause::from_dimacs(&[3]))));
        assert!(!underspecified_trigger(&sc, Some(&Clause::from_dimacs(&[-2, 3]))));
        assert!(underspecified_trigger(&sc, None));
        assert!(!underspecified_trigger(&[], None));
    }

    #[test]
    fn unused_variable_is_free_input() {
        let f = cnf(3, &[&[-1, -2], &[1, 2]]);
        let res = extract(&f, ExtractorConfig::default());
        assert!(res.pi.contains(&3));
        assert_eq!(res.classify_paths().unconstrained_pi, res.pi);
    }

    #[test]
    fn promotion_of_input_keeps_it_an_input() {
        // x2 = ~x1, then a unit clause on the input x1
        let f = cnf(2, &[&[-1, -2], &[1, 2], &[1]]);
        let res = extract(&f, ExtractorConfig::default());
        assert_eq!(res.pi, vec![1]);
        assert_eq!(res.po, vec![OutputTarget { var: 1, target: true }]);
        assert_eq!(res.classify_paths().constrained_pi, vec![1]);
        assert!(models_match(&f, &res));
    }

    #[test]
    fn first_appearance_order_is_available() {
        let f = cnf(2, &[&[-1, -2], &[1, 2]]);
        let cfg = ExtractorConfig {
            candidate_order: CandidateOrder::FirstAppearance,
            ..Default::default()
        };
        let res = extract(&f, cfg);
        assert_eq!(res.iv, vec![1]);
        assert_eq!(res.pi, vec![2]);
    }

    #[test]
    fn residue_clauses_are_not_lost() {
        // (x1 | x2) stays buffered while x3 = x1 & x2 is recognised
        let f = cnf(3, &[&[1, 2], &[3, -1, -2], &[-3, 1], &[-3, 2]]);
        let res = extract(&f, ExtractorConfig::default());
        assert!(models_match(&f, &res));
        assert!(definitions_are_ordered(&res));
    }

    #[test]
    fn no_outputs_means_no_constrained_inputs() {
        let f = cnf(4, &[&[-1, -2], &[1, 2], &[-3, 4], &[3, -4]]);
        let res = extract(&f, ExtractorConfig::default());
        assert!(res.po.is_empty());
        assert!(res.classify_paths().constrained_pi.is_empty());
    }

    fn reachable_by_dfs(res: &ExtractionResult) -> BTreeSet<u32> {
        fn visit(v: u32, res: &ExtractionResult, seen: &mut BTreeSet<u32>) {
            if !seen.insert(v) {
                return;
            }
            if let Some(e) = res.definition(v) {
                for &u in e.support().vars() {
                    visit(u, res, seen);
                }
            }
        }
        let mut seen = BTreeSet::new();
        for o in &res.po {
            visit(o.var, res, &mut seen);
        }
        seen
    }

    fn arb_cnf() -> impl Strategy<Value = CnfFormula> {
        (1u32..=8).prop_flat_map(|n| {
            let clause = prop::collection::vec((1..=n, any::<bool>()), 1..4);
            prop::collection::vec(clause, 0..14).prop_map(move |cs| {
                let clauses = cs
                    .into_iter()
                    .filter_map(|c| Clause::new(c.into_iter().map(|(v, neg)| Literal { var: v, negated: neg })))
                    .collect();
                CnfFormula::new(n, clauses)
            })
        })
    }

    proptest! {
        #[test]
        fn random_cnf_is_equisatisfiable(f in arb_cnf()) {
            let res = extract(&f, ExtractorConfig::default());
            if res.is_unsat() {
                let any_model = (0..1u64 << f.num_vars)
                    .any(|b| f.eval(&Assignment::from_bits(f.num_vars, b)).unwrap());
                prop_assert!(!any_model);
            } else {
                prop_assert!(definitions_are_ordered(&res));
                prop_assert!(models_match(&f, &res));
                let covered: BTreeSet<u32> = res.pi.iter().chain(&res.iv)
                    .copied()
                    .chain(res.po.iter().map(|o| o.var))
                    .collect();
                for v in 1..=f.num_vars {
                    prop_assert!(covered.contains(&v));
                }
            }
        }

        #[test]
        fn extraction_is_deterministic(f in arb_cnf()) {
            prop_assert_eq!(extract(&f, ExtractorConfig::default()), extract(&f, ExtractorConfig::default()));
        }

        #[test]
        fn scan_order_matches_naive(f in arb_cnf()) {
            let mut naive: Vec<u32> = Vec::new();
            for c in &f.clauses {
                for l in c.literals() {
                    if !naive.contains(&l.var) { naive.push(l.var); }
                }
            }
            prop_assert_eq!(candidate_scan_order(&f.clauses), naive);
        }

        #[test]
        fn path_classification_matches_dfs(f in arb_cnf()) {
            let res = extract(&f, ExtractorConfig::default());
            let reach = reachable_by_dfs(&res);
            let pc = res.classify_paths();
            for v in &pc.constrained_pi { prop_assert!(reach.contains(v)); }
            for v in &pc.unconstrained_pi { prop_assert!(!reach.contains(v)); }
            prop_assert_eq!(pc.constrained_pi.len() + pc.unconstrained_pi.len(), res.pi.len());
        }
    }
}
