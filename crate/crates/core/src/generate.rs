//! Instance generators: Tseitin encodings of single gates and of random
//! layered circuits, plus a few fixed formulas with known structure.

use std::collections::BTreeMap;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;

use crate::circuit::{Circuit, Gate, GateNode, Output};
use crate::cnf::{parse_dimacs, Clause, CnfFormula, Literal};

/// Two chained multiplexers behind buffers and inverters, output forced to 1.
/// Inputs are x1, x6, x11..x14.
pub const MUX_CHAIN: &str = "\
p cnf 14 21
c x2(x1) = ~x1
-1 -2 0
1 2 0
c x3(x2) = x2
-2 3 0
2 -3 0
c x4(x3) = x3
-3 4 0
3 -4 0
c x5(x4,x11,x12) = (x4 & x11) | (~x4 & x12)
-4 -11 5 0
-4 11 -5 0
4 -12 5 0
4 12 -5 0
c x7(x6) = x6
-6 7 0
6 -7 0
c x8(x7) = x7
-7 8 0
7 -8 0
c x9(x8) = ~x8
-8 -9 0
8 9 0
c x10(x9,x13,x14) = (x9 & x13) | (~x9 & x14)
-9 -13 10 0
-9 13 -10 0
9 -14 10 0
9 14 -10 0
c x10 = 1
10 0
";

pub fn mux_chain() -> CnfFormula {
    parse_dimacs(MUX_CHAIN).expect("fixture parses")
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum GateType {
    Buf,
    Not,
    And,
    Or,
    Nand,
    Nor,
    Xor,
    Xnor,
}

impl GateType {
    pub const ALL: [GateType; 8] = [
        GateType::Buf,
        GateType::Not,
        GateType::And,
        GateType::Or,
        GateType::Nand,
        GateType::Nor,
        GateType::Xor,
        GateType::Xnor,
    ];

    pub fn is_unary(self) -> bool {
        matches!(self, GateType::Buf | GateType::Not)
    }

    pub fn eval(self, ins: &[bool]) -> bool {
        let and = ins.iter().all(|&b| b);
        let or = ins.iter().any(|&b| b);
        let xor = ins.iter().fold(false, |a, &b| a ^ b);
        match self {
            GateType::Buf => ins[0],
            GateType::Not => !ins[0],
            GateType::And => and,
            GateType::Or => or,
            GateType::Nand => !and,
            GateType::Nor => !or,
            GateType::Xor => xor,
            GateType::Xnor => !xor,
        }
    }
}

/// Clauses of `out <-> gate(ins)`, output literal first.
pub fn tseitin_clauses(gate: GateType, out: u32, ins: &[u32]) -> Vec<Clause> {
    let pos = Literal::pos;
    let neg = Literal::neg;
    let mk = |lits: Vec<Literal>| Clause::new(lits).expect("non-empty");
    // (f, inverted) so NAND/NOR reuse AND/OR
    let f = |inverted: bool| if inverted { neg(out) } else { pos(out) };
    match gate {
        GateType::Buf | GateType::Not => {
            let inv = gate == GateType::Not;
            vec![mk(vec![f(inv), neg(ins[0])]), mk(vec![f(!inv), pos(ins[0])])]
        }
        GateType::And | GateType::Nand => {
            let inv = gate == GateType::Nand;
            let mut cs = vec![mk(std::iter::once(f(inv)).chain(ins.iter().map(|&i| neg(i))).collect())];
            cs.extend(ins.iter().map(|&i| mk(vec![f(!inv), pos(i)])));
            cs
        }
        GateType::Or | GateType::Nor => {
            let inv = gate == GateType::Nor;
            let mut cs = vec![mk(std::iter::once(f(!inv)).chain(ins.iter().map(|&i| pos(i))).collect())];
            cs.extend(ins.iter().map(|&i| mk(vec![f(inv), neg(i)])));
            cs
        }
        GateType::Xor | GateType::Xnor => {
            // one clause per input row, forbidding the wrong output value
            (0u32..1 << ins.len())
                .map(|row| {
                    let bits: Vec<bool> = (0..ins.len()).map(|i| row >> i & 1 == 1).collect();
                    let value = gate.eval(&bits);
                    let out_lit = if value { pos(out) } else { neg(out) };
                    let lits = std::iter::once(out_lit).chain(
                        ins.iter().zip(&bits).map(|(&i, &b)| if b { neg(i) } else { pos(i) }),
                    );
                    mk(lits.collect())
                })
                .collect()
        }
    }
}

/// `x(n+1) <-> gate(x1..xn)` as a formula; unary gates use n = 1.
pub fn signature(gate: GateType, n: usize) -> CnfFormula {
    let n = if gate.is_unary() { 1 } else { n.max(1) };
    let ins: Vec<u32> = (1..=n as u32).collect();
    CnfFormula::new(n as u32 + 1, tseitin_clauses(gate, n as u32 + 1, &ins))
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GateSpec {
    pub gate: GateType,
    pub out: u32,
    pub ins: Vec<u32>,
}

#[derive(Clone, Debug)]
pub struct GeneratedInstance {
    pub cnf: CnfFormula,
    pub inputs: Vec<u32>,
    /// Topological order.
    pub gates: Vec<GateSpec>,
    pub constraints: Vec<(u32, bool)>,
}

impl GeneratedInstance {
    /// Every signal value for the given input values, index `var - 1`.
    pub fn simulate(&self, inputs: &[bool]) -> Vec<bool> {
        let mut values = vec![false; self.cnf.num_vars as usize];
        for (&v, &b) in self.inputs.iter().zip(inputs) {
            values[v as usize - 1] = b;
        }
        for g in &self.gates {
            let ins: Vec<bool> = g.ins.iter().map(|&i| values[i as usize - 1]).collect();
            values[g.out as usize - 1] = g.gate.eval(&ins);
        }
        values
    }
}

#[derive(Clone, Debug)]
pub struct RandomCircuitConfig {
    pub inputs: (usize, usize),
    pub levels: (usize, usize),
    pub max_vars: usize,
    pub max_fanin: usize,
    pub outputs: (usize, usize),
    pub gate_types: Vec<GateType>,
    /// Targets taken from a simulated input, so the formula has a model.
    pub satisfiable: bool,
    /// Shuffle gate order and literal order before emitting clauses.
    pub shuffle: bool,
}

impl Default for RandomCircuitConfig {
    fn default() -> Self {
        RandomCircuitConfig {
            inputs: (3, 6),
            levels: (3, 5),
            max_vars: 16,
            max_fanin: 3,
            outputs: (1, 2),
            gate_types: GateType::ALL.to_vec(),
            satisfiable: true,
            shuffle: false,
        }
    }
}

fn pick_range(rng: &mut impl Rng, (lo, hi): (usize, usize)) -> usize {
    rng.random_range(lo..=hi.max(lo))
}

/// Layered random circuit: every gate of level `l` reads at least one signal
/// of level `l - 1`.
pub fn random_circuit(rng: &mut impl Rng, cfg: &RandomCircuitConfig) -> GeneratedInstance {
    let n_in = pick_range(rng, cfg.inputs);
    let levels = pick_range(rng, cfg.levels);
    let budget = cfg.max_vars.saturating_sub(n_in).max(levels);
    let n_gates = rng.random_range(levels..=budget);
    let mut per_level = vec![1usize; levels];
    for _ in levels..n_gates {
        per_level[rng.random_range(0..levels)] += 1;
    }
    let inputs: Vec<u32> = (1..=n_in as u32).collect();
    let mut layers: Vec<Vec<u32>> = vec![inputs.clone()];
    let mut all: Vec<u32> = inputs.clone();
    let mut gates = Vec::new();
    let mut next = n_in as u32 + 1;
    for &count in &per_level {
        let prev = layers.last().unwrap().clone();
        let mut layer = Vec::new();
        for _ in 0..count {
            let gate = *cfg.gate_types.choose(rng).expect("gate types");
            let fanin = match gate {
                _ if gate.is_unary() => 1,
                GateType::Xor | GateType::Xnor => 2,
                _ => rng.random_range(2..=cfg.max_fanin.max(2)),
            };
            let mut ins = vec![*prev.choose(rng).unwrap()];
            let mut tries = 0;
            while ins.len() < fanin && tries < 20 {
                let cand = *all.choose(rng).unwrap();
                if !ins.contains(&cand) {
                    ins.push(cand);
                }
                tries += 1;
            }
            if ins.len() < 2 && !gate.is_unary() {
                // not enough distinct signals; fall back to an inverter
                gates.push(GateSpec { gate: GateType::Not, out: next, ins });
            } else {
                gates.push(GateSpec { gate, out: next, ins });
            }
            layer.push(next);
            next += 1;
        }
        all.extend(&layer);
        layers.push(layer);
    }
    let last = layers.last().unwrap().clone();
    let k = pick_range(rng, cfg.outputs).min(last.len()).max(1);
    let outs: Vec<u32> = last.choose_multiple(rng, k).copied().collect();
    finish(rng, next - 1, inputs, gates, &outs, cfg.satisfiable, cfg.shuffle)
}

fn finish(
    rng: &mut impl Rng,
    num_vars: u32,
    inputs: Vec<u32>,
    gates: Vec<GateSpec>,
    outs: &[u32],
    satisfiable: bool,
    shuffle: bool,
) -> GeneratedInstance {
    let mut inst = GeneratedInstance { cnf: CnfFormula::new(num_vars, vec![]), inputs, gates, constraints: vec![] };
    let witness: Vec<bool> = (0..inst.inputs.len()).map(|_| rng.random()).collect();
    let values = inst.simulate(&witness);
    inst.constraints = outs
        .iter()
        .map(|&o| (o, if satisfiable { values[o as usize - 1] } else { rng.random() }))
        .collect();

    let mut order: Vec<usize> = (0..inst.gates.len()).collect();
    if shuffle {
        order.shuffle(rng);
    }
    let mut clauses = Vec::new();
    for &gi in &order {
        let g = &inst.gates[gi];
        for c in tseitin_clauses(g.gate, g.out, &g.ins) {
            if shuffle {
                let mut lits = c.literals().to_vec();
                lits.shuffle(rng);
                clauses.push(Clause::new(lits).unwrap());
            } else {
                clauses.push(c);
            }
        }
    }
    for &(o, t) in &inst.constraints {
        clauses.push(Clause::new([if t { Literal::pos(o) } else { Literal::neg(o) }]).unwrap());
    }
    inst.cnf = CnfFormula::new(num_vars, clauses);
    inst
}

/// Random OR/AND network: 50 inputs, 60 gates of fan-in
/// 2 to 4 over earlier signals, ten sink gates pinned to values of a random
/// simulation. About 110 variables and 250 clauses.
pub fn or_network(rng: &mut impl Rng) -> GeneratedInstance {
    const INPUTS: u32 = 50;
    const GATES: u32 = 60;
    const OUTPUTS: usize = 10;
    let inputs: Vec<u32> = (1..=INPUTS).collect();
    let mut gates = Vec::new();
    let mut fanout = vec![0usize; (INPUTS + GATES) as usize + 1];
    for out in INPUTS + 1..=INPUTS + GATES {
        let gate = if rng.random_bool(0.7) { GateType::Or } else { GateType::And };
        let fanin = rng.random_range(2..=4);
        let mut ins: Vec<u32> = Vec::with_capacity(fanin);
        while ins.len() < fanin {
            let cand = rng.random_range(1..out);
            if !ins.contains(&cand) {
                ins.push(cand);
            }
        }
        for &i in &ins {
            fanout[i as usize] += 1;
        }
        gates.push(GateSpec { gate, out, ins });
    }
    let mut sinks: Vec<u32> = (INPUTS + 1..=INPUTS + GATES).filter(|&g| fanout[g as usize] == 0).collect();
    let mut rest: Vec<u32> = (INPUTS + 1..=INPUTS + GATES).rev().filter(|g| !sinks.contains(g)).collect();
    sinks.shuffle(rng);
    sinks.truncate(OUTPUTS);
    while sinks.len() < OUTPUTS {
        sinks.push(rest.remove(0));
    }
    sinks.sort_unstable();
    finish(rng, INPUTS + GATES, inputs, gates, &sinks, true, false)
}

/// x5 = x1 ^ x2, x6 = x3 | x4, x7 = x5 & x6, x8 = ~x7, with x8 forced to 0.
/// Six models.
pub fn six_model_instance() -> GeneratedInstance {
    let gates = vec![
        GateSpec { gate: GateType::Xor, out: 5, ins: vec![1, 2] },
        GateSpec { gate: GateType::Or, out: 6, ins: vec![3, 4] },
        GateSpec { gate: GateType::And, out: 7, ins: vec![5, 6] },
        GateSpec { gate: GateType::Not, out: 8, ins: vec![7] },
    ];
    let mut clauses: Vec<Clause> = gates.iter().flat_map(|g| tseitin_clauses(g.gate, g.out, &g.ins)).collect();
    clauses.push(Clause::from_dimacs(&[-8]));
    GeneratedInstance {
        cnf: CnfFormula::new(8, clauses),
        inputs: vec![1, 2, 3, 4],
        gates,
        constraints: vec![(8, false)],
    }
}

/// Random gate DAG with `inputs` inputs (vars `1..=inputs`), `gates` gates
/// over earlier nodes and up to `outputs` constrained gate outputs with
/// random targets. Gate outputs are vars `inputs + 1..`.
pub fn random_gate_circuit(rng: &mut impl Rng, inputs: usize, gates: usize, outputs: usize) -> Circuit {
    let mut nodes = Vec::with_capacity(inputs + gates);
    let mut signals = BTreeMap::new();
    for v in 1..=inputs as u32 {
        let id = nodes.len();
        nodes.push(GateNode { id, gate: Gate::Input, var: Some(v) });
        signals.insert(v, id);
    }
    for k in 0..gates {
        let id = nodes.len();
        let a = rng.random_range(0..id);
        let b = rng.random_range(0..id);
        let gate = match rng.random_range(0..5) {
            0 => Gate::Not(a),
            1 => Gate::And(a, b),
            2 => Gate::Or(a, b),
            3 => Gate::Xor(a, b),
            _ => Gate::Xnor(a, b),
        };
        let var = (inputs + k + 1) as u32;
        nodes.push(GateNode { id, gate, var: Some(var) });
        signals.insert(var, id);
    }
    let num_vars = (inputs + gates) as u32;
    let mut candidates: Vec<usize> = (inputs..nodes.len()).collect();
    candidates.shuffle(rng);
    candidates.truncate(outputs);
    candidates.sort_unstable();
    let outputs = candidates
        .into_iter()
        .map(|node| Output { var: nodes[node].var.unwrap(), node, target: rng.random() })
        .collect();
    Circuit {
        num_vars,
        aux_base: num_vars + 1,
        inputs: (0..inputs).map(|i| (i as u32 + 1, i)).collect(),
        nodes,
        outputs,
        signals,
    }
}

/// Brute-force model list of a small formula, in counting order.
pub fn models(cnf: &CnfFormula) -> Vec<crate::cnf::Assignment> {
    assert!(cnf.num_vars <= 24, "enumeration limited to 24 variables");
    (0u64..1 << cnf.num_vars)
        .map(|bits| crate::cnf::Assignment::from_bits(cnf.num_vars, bits))
        .filter(|a| cnf.eval(a).unwrap())
        .collect()
}
