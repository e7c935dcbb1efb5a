//! Acyclic 2-input gate DAG built from extracted definitions.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::boolexpr::{decompose_two_input, parse_expr, GateOp, Operand};
use crate::cnf::{Assignment, CnfFormula};
use crate::extract::{Conflict, Definition, ExtractionResult, OutputTarget};

pub type NodeId = usize;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Gate {
    Input,
    Const(bool),
    Not(NodeId),
    And(NodeId, NodeId),
    Or(NodeId, NodeId),
    Xor(NodeId, NodeId),
    Xnor(NodeId, NodeId),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum GateKind {
    Input,
    Const0,
    Const1,
    Not,
    And2,
    Or2,
    Xor2,
    Xnor2,
}

impl Gate {
    pub fn kind(&self) -> GateKind {
        match self {
            Gate::Input => GateKind::Input,
            Gate::Const(false) => GateKind::Const0,
            Gate::Const(true) => GateKind::Const1,
            Gate::Not(_) => GateKind::Not,
            Gate::And(..) => GateKind::And2,
            Gate::Or(..) => GateKind::Or2,
            Gate::Xor(..) => GateKind::Xor2,
            Gate::Xnor(..) => GateKind::Xnor2,
        }
    }

    pub fn args(&self) -> Vec<NodeId> {
        match *self {
            Gate::Input | Gate::Const(_) => vec![],
            Gate::Not(a) => vec![a],
            Gate::And(a, b) | Gate::Or(a, b) | Gate::Xor(a, b) | Gate::Xnor(a, b) => vec![a, b],
        }
    }

    fn from_parts(kind: GateKind, args: &[NodeId]) -> Option<Gate> {
        Some(match (kind, args) {
            (GateKind::Input, []) => Gate::Input,
            (GateKind::Const0, []) => Gate::Const(false),
            (GateKind::Const1, []) => Gate::Const(true),
            (GateKind::Not, &[a]) => Gate::Not(a),
            (GateKind::And2, &[a, b]) => Gate::And(a, b),
            (GateKind::Or2, &[a, b]) => Gate::Or(a, b),
            (GateKind::Xor2, &[a, b]) => Gate::Xor(a, b),
            (GateKind::Xnor2, &[a, b]) => Gate::Xnor(a, b),
            _ => return None,
        })
    }

    pub fn is_two_input(&self) -> bool {
        matches!(self, Gate::And(..) | Gate::Or(..) | Gate::Xor(..) | Gate::Xnor(..))
    }

    /// Boolean value given already computed node values.
    #[inline]
    pub fn eval(&self, values: &[bool]) -> bool {
        match *self {
            Gate::Input => unreachable!("inputs are assigned, not evaluated"),
            Gate::Const(b) => b,
            Gate::Not(a) => !values[a],
            Gate::And(a, b) => values[a] & values[b],
            Gate::Or(a, b) => values[a] | values[b],
            Gate::Xor(a, b) => values[a] ^ values[b],
            Gate::Xnor(a, b) => !(values[a] ^ values[b]),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GateNode {
    pub id: NodeId,
    pub gate: Gate,
    /// First variable bound to this node, if any.
    pub var: Option<u32>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Output {
    pub var: u32,
    pub node: NodeId,
    pub target: bool,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Circuit {
    pub num_vars: u32,
    pub aux_base: u32,
    /// Topologically ordered; operands always precede their gate.
    pub nodes: Vec<GateNode>,
    /// Primary inputs as (var, node), in input order.
    pub inputs: Vec<(u32, NodeId)>,
    pub outputs: Vec<Output>,
    /// Node carrying each variable. Buffers alias several variables to one node.
    pub signals: BTreeMap<u32, NodeId>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GateCount {
    pub two_input_equivalents: usize,
    pub and2: usize,
    pub or2: usize,
    pub xor2: usize,
    pub xnor2: usize,
    pub not: usize,
}

#[derive(Debug, Error)]
pub enum CircuitError {
    #[error("definition of x{var} reads x{missing}, which is not yet defined")]
    Undefined { var: u32, missing: u32 },
    #[error("x{0} is defined twice")]
    Redefined(u32),
    #[error("extraction proved the instance unsatisfiable: {0}")]
    Unsat(String),
    #[error("no value for input x{0}")]
    MissingInput(u32),
    #[error("circuit JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("circuit schema: {0}")]
    Schema(String),
}

impl Circuit {
    /// Lowers every definition into shared 2-input gates.
    pub fn build(res: &ExtractionResult) -> Result<Circuit, CircuitError> {
        if let Some(c) = &res.conflict {
            return Err(CircuitError::Unsat(c.detail.clone()));
        }
        let mut nodes: Vec<GateNode> = Vec::new();
        let mut signals: BTreeMap<u32, NodeId> = BTreeMap::new();
        let mut inputs = Vec::with_capacity(res.pi.len());
        for &v in &res.pi {
            if signals.contains_key(&v) {
                return Err(CircuitError::Redefined(v));
            }
            let id = nodes.len();
            nodes.push(GateNode { id, gate: Gate::Input, var: Some(v) });
            signals.insert(v, id);
            inputs.push((v, id));
        }
        for Definition { var, expr } in &res.be {
            if signals.contains_key(var) {
                return Err(CircuitError::Redefined(*var));
            }
            let dec = decompose_two_input(expr);
            let mut local: Vec<NodeId> = Vec::with_capacity(dec.gates.len());
            let push = |gate: Gate, nodes: &mut Vec<GateNode>| {
                let id = nodes.len();
                nodes.push(GateNode { id, gate, var: None });
                id
            };
            let resolve = |o: Operand, local: &[NodeId], nodes: &mut Vec<GateNode>| match o {
                Operand::Var(u) => signals
                    .get(&u)
                    .copied()
                    .ok_or(CircuitError::Undefined { var: *var, missing: u }),
                Operand::Gate(i) => Ok(local[i]),
                Operand::Const(b) => Ok(push(Gate::Const(b), nodes)),
            };
            for g in &dec.gates {
                let a = resolve(g.a, &local, &mut nodes)?;
                let gate = match g.op {
                    GateOp::Not => Gate::Not(a),
                    op => {
                        let b = resolve(g.b.expect("binary gate"), &local, &mut nodes)?;
                        match op {
                            GateOp::And => Gate::And(a, b),
                            GateOp::Or => Gate::Or(a, b),
                            GateOp::Xor => Gate::Xor(a, b),
                            GateOp::Xnor => Gate::Xnor(a, b),
                            GateOp::Not => unreachable!(),
                        }
                    }
                };
                let id = nodes.len();
                nodes.push(GateNode { id, gate, var: None });
                local.push(id);
            }
            let root = resolve(dec.root, &local, &mut nodes)?;
            if nodes[root].var.is_none() {
                nodes[root].var = Some(*var);
            }
            signals.insert(*var, root);
        }
        let outputs = res
            .po
            .iter()
            .map(|o| {
                signals
                    .get(&o.var)
                    .map(|&node| Output { var: o.var, node, target: o.target })
                    .ok_or(CircuitError::Undefined { var: o.var, missing: o.var })
            })
            .collect::<Result<Vec<_>, _>>()?;
        let c = Circuit {
            num_vars: res.num_vars,
            aux_base: res.aux_base(),
            nodes,
            inputs,
            outputs,
            signals,
        };
        debug_assert!(c.is_topological());
        Ok(c)
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn is_topological(&self) -> bool {
        self.nodes
            .iter()
            .enumerate()
            .all(|(i, n)| n.id == i && n.gate.args().iter().all(|&a| a < i))
    }

    /// Node values with inputs taken in `inputs` order.
    pub fn eval_nodes(&self, input_values: &[bool]) -> Vec<bool> {
        let mut values = vec![false; self.nodes.len()];
        self.eval_nodes_into(input_values, &mut values);
        values
    }

    /// Allocation-free form of [`Circuit::eval_nodes`].
    pub fn eval_nodes_into(&self, input_values: &[bool], values: &mut [bool]) {
        assert_eq!(input_values.len(), self.inputs.len());
        let mut next_input = 0;
        for (i, node) in self.nodes.iter().enumerate() {
            values[i] = match node.gate {
                Gate::Input => {
                    let v = input_values[next_input];
                    next_input += 1;
                    v
                }
                g => g.eval(values),
            };
        }
    }

    /// Evaluates from primary-input values and returns every variable,
    /// auxiliaries included (`1..aux_base + aux count`).
    pub fn eval_discrete(
        &self,
        pi_values: &impl Fn(u32) -> Option<bool>,
    ) -> Result<Assignment, CircuitError> {
        let inputs = self
            .inputs
            .iter()
            .map(|&(v, _)| pi_values(v).ok_or(CircuitError::MissingInput(v)))
            .collect::<Result<Vec<_>, _>>()?;
        let values = self.eval_nodes(&inputs);
        Ok(self.assignment_from_nodes(&values, self.total_vars()))
    }

    /// Largest variable carried by the circuit.
    pub fn total_vars(&self) -> u32 {
        self.signals.keys().next_back().copied().unwrap_or(0).max(self.num_vars)
    }

    /// Reads variables `1..=upto` off node values.
    pub fn assignment_from_nodes(&self, values: &[bool], upto: u32) -> Assignment {
        let mut out = Assignment::all_false(upto);
        for (&v, &node) in self.signals.range(1..=upto) {
            out.set(v, values[node]);
        }
        out
    }

    /// Whether node values meet every output target.
    pub fn outputs_met(&self, values: &[bool]) -> bool {
        self.outputs.iter().all(|o| values[o.node] == o.target)
    }

    pub fn gate_equivalents(&self) -> GateCount {
        let mut count = GateCount::default();
        for n in &self.nodes {
            match n.gate {
                Gate::And(..) => count.and2 += 1,
                Gate::Or(..) => count.or2 += 1,
                Gate::Xor(..) => count.xor2 += 1,
                Gate::Xnor(..) => count.xnor2 += 1,
                Gate::Not(_) => count.not += 1,
                Gate::Input | Gate::Const(_) => {}
            }
        }
        count.two_input_equivalents = count.and2 + count.or2 + count.xor2 + count.xnor2;
        count
    }

    pub fn export_json(&self, res: &ExtractionResult) -> String {
        serde_json::to_string_pretty(&CircuitFile::new(self, res)).expect("serializable")
    }

    pub fn import_json(text: &str) -> Result<(Circuit, ExtractionResult), CircuitError> {
        let file: CircuitFile = serde_json::from_str(text)?;
        file.into_parts()
    }
}

/// Flat CNF cost: each clause is an OR chain, the clauses an AND chain.
pub fn cnf_gate_equivalents(cnf: &CnfFormula) -> GateCount {
    let or2: usize = cnf.clauses.iter().map(|c| c.len() - 1).sum();
    let and2 = cnf.clauses.len().saturating_sub(1);
    GateCount {
        two_input_equivalents: or2 + and2,
        and2,
        or2,
        ..Default::default()
    }
}

/// `cnf / circuit` in gate equivalents; `None` when the circuit has none.
pub fn ops_reduction(cnf: &GateCount, circuit: &GateCount) -> Option<f64> {
    (circuit.two_input_equivalents > 0)
        .then(|| cnf.two_input_equivalents as f64 / circuit.two_input_equivalents as f64)
}

// JSON layout. Gate list, inputs and outputs drive sampling; `signals` and
// `extraction` carry what is needed to restore the extraction result.

#[derive(Serialize, Deserialize)]
struct CircuitFile {
    num_vars: u32,
    aux_base: u32,
    inputs: Vec<u32>,
    outputs: Vec<TargetEntry>,
    gates: Vec<GateEntry>,
    #[serde(default)]
    signals: Vec<SignalEntry>,
    #[serde(default)]
    extraction: Option<ExtractionEntry>,
}

#[derive(Serialize, Deserialize)]
struct TargetEntry {
    var: u32,
    target: u8,
}

#[derive(Serialize, Deserialize)]
struct GateEntry {
    id: usize,
    kind: GateKind,
    args: Vec<usize>,
    var: Option<u32>,
}

#[derive(Serialize, Deserialize)]
struct SignalEntry {
    var: u32,
    node: usize,
}

#[derive(Serialize, Deserialize)]
struct ExtractionEntry {
    pi: Vec<u32>,
    iv: Vec<u32>,
    po: Vec<TargetEntry>,
    aux: Vec<u32>,
    definitions: Vec<DefinitionEntry>,
    conflict: Option<Conflict>,
}

#[derive(Serialize, Deserialize)]
struct DefinitionEntry {
    var: u32,
    expr: String,
}

fn target_bit(t: &TargetEntry) -> Result<bool, CircuitError> {
    match t.target {
        0 => Ok(false),
        1 => Ok(true),
        other => Err(CircuitError::Schema(format!("target of x{} is {other}, expected 0 or 1", t.var))),
    }
}

impl CircuitFile {
    fn new(c: &Circuit, res: &ExtractionResult) -> Self {
        let entry = |o: &OutputTarget| TargetEntry { var: o.var, target: u8::from(o.target) };
        CircuitFile {
            num_vars: c.num_vars,
            aux_base: c.aux_base,
            inputs: c.inputs.iter().map(|&(v, _)| v).collect(),
            outputs: c
                .outputs
                .iter()
                .map(|o| TargetEntry { var: o.var, target: u8::from(o.target) })
                .collect(),
            gates: c
                .nodes
                .iter()
                .map(|n| GateEntry { id: n.id, kind: n.gate.kind(), args: n.gate.args(), var: n.var })
                .collect(),
            signals: c.signals.iter().map(|(&var, &node)| SignalEntry { var, node }).collect(),
            extraction: Some(ExtractionEntry {
                pi: res.pi.clone(),
                iv: res.iv.clone(),
                po: res.po.iter().map(entry).collect(),
                aux: res.aux.clone(),
                definitions: res
                    .be
                    .iter()
                    .map(|d| DefinitionEntry { var: d.var, expr: d.expr.to_string() })
                    .collect(),
                conflict: res.conflict.clone(),
            }),
        }
    }

    fn into_parts(self) -> Result<(Circuit, ExtractionResult), CircuitError> {
        let schema = |msg: String| CircuitError::Schema(msg);
        let mut nodes = Vec::with_capacity(self.gates.len());
        for (i, g) in self.gates.iter().enumerate() {
            if g.id != i {
                return Err(schema(format!("gate {i} has id {}", g.id)));
            }
            if g.args.iter().any(|&a| a >= i) {
                return Err(schema(format!("gate {i} reads a later node")));
            }
            let gate = Gate::from_parts(g.kind, &g.args)
                .ok_or_else(|| schema(format!("gate {i}: {:?} with {} args", g.kind, g.args.len())))?;
            nodes.push(GateNode { id: i, gate, var: g.var });
        }
        let input_nodes: Vec<NodeId> = nodes.iter().filter(|n| n.gate == Gate::Input).map(|n| n.id).collect();
        if input_nodes.len() != self.inputs.len() {
            return Err(schema(format!(
                "{} inputs listed but {} INPUT gates present",
                self.inputs.len(),
                input_nodes.len()
            )));
        }
        let inputs: Vec<(u32, NodeId)> = self.inputs.iter().copied().zip(input_nodes).collect();
        for &(v, node) in &inputs {
            if nodes[node].var != Some(v) {
                return Err(schema(format!("input x{v} does not match INPUT gate {node}")));
            }
        }

        let mut signals: BTreeMap<u32, NodeId> = BTreeMap::new();
        if self.signals.is_empty() {
            for n in &nodes {
                if let Some(v) = n.var {
                    signals.insert(v, n.id);
                }
            }
        } else {
            for s in &self.signals {
                if s.node >= nodes.len() {
                    return Err(schema(format!("signal x{} points past the gate list", s.var)));
                }
                signals.insert(s.var, s.node);
            }
        }
        let outputs = self
            .outputs
            .iter()
            .map(|t| {
                let node = *signals
                    .get(&t.var)
                    .ok_or_else(|| schema(format!("output x{} has no node", t.var)))?;
                Ok(Output { var: t.var, node, target: target_bit(t)? })
            })
            .collect::<Result<Vec<_>, CircuitError>>()?;

        let res = match self.extraction {
            Some(ex) => ExtractionResult {
                num_vars: self.num_vars,
                pi: ex.pi,
                iv: ex.iv,
                po: ex
                    .po
                    .iter()
                    .map(|t| Ok(OutputTarget { var: t.var, target: target_bit(t)? }))
                    .collect::<Result<_, CircuitError>>()?,
                be: ex
                    .definitions
                    .into_iter()
                    .map(|d| {
                        parse_expr(&d.expr)
                            .map(|expr| Definition { var: d.var, expr })
                            .map_err(|e| schema(format!("definition of x{}: {e}", d.var)))
                    })
                    .collect::<Result<_, _>>()?,
                aux: ex.aux,
                conflict: ex.conflict,
            },
            None => ExtractionResult {
                num_vars: self.num_vars,
                pi: self.inputs.clone(),
                po: outputs.iter().map(|o| OutputTarget { var: o.var, target: o.target }).collect(),
                ..Default::default()
            },
        };
        let circuit = Circuit {
            num_vars: self.num_vars,
            aux_base: self.aux_base,
            nodes,
            inputs,
            outputs,
            signals,
        };
        Ok((circuit, res))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::boolexpr::BoolExpr;
    use crate::cnf::Clause;
    use crate::extract::{extract, ExtractorConfig};

    #[test]
    fn single_inverter() {
        let res = ExtractionResult {
            num_vars: 2,
            pi: vec![1],
            iv: vec![2],
            be: vec![Definition { var: 2, expr: BoolExpr::not(BoolExpr::var(1)) }],
            ..Default::default()
        };
        let c = Circuit::build(&res).unwrap();
        assert_eq!(c.nodes.len(), 2);
        assert_eq!(c.nodes[0].gate, Gate::Input);
        assert_eq!(c.nodes[1].gate, Gate::Not(0));
        assert_eq!(c.gate_equivalents().two_input_equivalents, 0);
        let a = c.eval_discrete(&|_| Some(true)).unwrap();
        assert!(!a.value(2));
    }

    #[test]
    fn buffers_alias_nodes() {
        let res = ExtractionResult {
            num_vars: 3,
            pi: vec![1],
            iv: vec![2, 3],
            be: vec![
                Definition { var: 2, expr: BoolExpr::var(1) },
                Definition { var: 3, expr: BoolExpr::var(2) },
            ],
            ..Default::default()
        };
        let c = Circuit::build(&res).unwrap();
        assert_eq!(c.nodes.len(), 1);
        assert_eq!(c.signals[&3], 0);
    }

    #[test]
    fn constant_circuit_ignores_inputs() {
        let res = ExtractionResult {
            num_vars: 2,
            pi: vec![2],
            po: vec![OutputTarget { var: 1, target: true }],
            be: vec![Definition { var: 1, expr: BoolExpr::TRUE }],
            ..Default::default()
        };
        let c = Circuit::build(&res).unwrap();
        for v in [false, true] {
            let vals = c.eval_nodes(&[v]);
            assert!(c.outputs_met(&vals));
        }
    }

    #[test]
    fn undefined_operand_is_reported() {
        let res = ExtractionResult {
            num_vars: 2,
            be: vec![Definition { var: 2, expr: BoolExpr::var(1) }],
            ..Default::default()
        };
        assert!(matches!(Circuit::build(&res), Err(CircuitError::Undefined { var: 2, missing: 1 })));
    }

    #[test]
    fn empty_instance() {
        let res = ExtractionResult::default();
        let c = Circuit::build(&res).unwrap();
        assert!(c.is_empty());
        assert_eq!(c.gate_equivalents(), GateCount::default());
        let (c2, r2) = Circuit::import_json(&c.export_json(&res)).unwrap();
        assert_eq!(c2, c);
        assert_eq!(r2, res);
        assert_eq!(cnf_gate_equivalents(&CnfFormula::default()).two_input_equivalents, 0);
    }

    #[test]
    fn cnf_count() {
        let f = CnfFormula::new(3, vec![Clause::from_dimacs(&[1, 2, 3]), Clause::from_dimacs(&[-1])]);
        let g = cnf_gate_equivalents(&f);
        assert_eq!((g.or2, g.and2, g.two_input_equivalents), (2, 1, 3));
    }

    #[test]
    fn schema_violations() {
        let bad_kind = r#"{"num_vars":1,"aux_base":2,"inputs":[1],"outputs":[],
            "gates":[{"id":0,"kind":"AND2","args":[],"var":1}]}"#;
        assert!(matches!(Circuit::import_json(bad_kind), Err(CircuitError::Schema(_))));
        let forward_ref = r#"{"num_vars":1,"aux_base":2,"inputs":[],"outputs":[],
            "gates":[{"id":0,"kind":"NOT","args":[0],"var":null}]}"#;
        assert!(matches!(Circuit::import_json(forward_ref), Err(CircuitError::Schema(_))));
        let bad_target = r#"{"num_vars":1,"aux_base":2,"inputs":[1],"outputs":[{"var":1,"target":2}],
            "gates":[{"id":0,"kind":"INPUT","args":[],"var":1}]}"#;
        assert!(matches!(Circuit::import_json(bad_target), Err(CircuitError::Schema(_))));
        assert!(matches!(Circuit::import_json("{"), Err(CircuitError::Json(_))));
    }

    #[test]
    fn minimal_schema_without_extras() {
        let text = r#"{"num_vars":2,"aux_base":3,"inputs":[1],"outputs":[{"var":2,"target":1}],
            "gates":[{"id":0,"kind":"INPUT","args":[],"var":1},{"id":1,"kind":"NOT","args":[0],"var":2}]}"#;
        let (c, res) = Circuit::import_json(text).unwrap();
        assert_eq!(c.outputs, vec![Output { var: 2, node: 1, target: true }]);
        assert_eq!(res.pi, vec![1]);
        assert!(c.outputs_met(&c.eval_nodes(&[false])));
    }

    #[test]
    fn renumbering_keeps_count() {
        let f = CnfFormula::new(
            3,
            vec![
                Clause::from_dimacs(&[3, -1, -2]),
                Clause::from_dimacs(&[-3, 1]),
                Clause::from_dimacs(&[-3, 2]),
            ],
        );
        let res = extract(&f, ExtractorConfig::default());
        let c = Circuit::build(&res).unwrap();
        let mut reversed = res.clone();
        reversed.pi.reverse();
        let c2 = Circuit::build(&reversed).unwrap();
        assert_eq!(c.gate_equivalents(), c2.gate_equivalents());
    }
}
