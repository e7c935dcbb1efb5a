use super::{BoolExpr, MissingVar};

/// Operand of a 2-input gate: a constant, a variable, or an earlier gate.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Operand {
    Const(bool),
    Var(u32),
    Gate(usize),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum GateOp {
    Not,
    And,
    Or,
    Xor,
    Xnor,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Gate2 {
    pub op: GateOp,
    pub a: Operand,
    /// Absent for `Not`.
    pub b: Option<Operand>,
}

/// Gate list in dependency order plus the operand holding the result.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Decomposition {
    pub gates: Vec<Gate2>,
    pub root: Operand,
}

impl Decomposition {
    pub fn gate_equivalents(&self) -> usize {
        self.gates.iter().filter(|g| g.op != GateOp::Not).count()
    }

    pub fn eval(&self, lookup: &impl Fn(u32) -> Option<bool>) -> Result<bool, MissingVar> {
        let mut values: Vec<bool> = Vec::with_capacity(self.gates.len());
        let read = |o: Operand, values: &[bool]| -> Result<bool, MissingVar> {
            Ok(match o {
                Operand::Const(b) => b,
                Operand::Var(v) => lookup(v).ok_or(MissingVar(v))?,
                Operand::Gate(i) => values[i],
            })
        };
        for g in &self.gates {
            let a = read(g.a, &values)?;
            let v = match g.op {
                GateOp::Not => !a,
                op => {
                    let b = read(g.b.expect("binary gate"), &values)?;
                    match op {
                        GateOp::And => a & b,
                        GateOp::Or => a | b,
                        GateOp::Xor => a ^ b,
                        GateOp::Xnor => !(a ^ b),
                        GateOp::Not => unreachable!(),
                    }
                }
            };
            values.push(v);
        }
        read(self.root, &values)
    }
}

/// Lowers an expression to 2-input gates.
///
/// n-ary operators become left-to-right chains of n - 1 gates; an n-ary XNOR
/// chains XORs and closes with one XNOR.
pub fn decompose_two_input(e: &BoolExpr) -> Decomposition {
    let mut gates = Vec::new();
    let root = lower(e, &mut gates);
    Decomposition { gates, root }
}

fn push(gates: &mut Vec<Gate2>, op: GateOp, a: Operand, b: Option<Operand>) -> Operand {
    gates.push(Gate2 { op, a, b });
    Operand::Gate(gates.len() - 1)
}

fn lower(e: &BoolExpr, gates: &mut Vec<Gate2>) -> Operand {
    match e {
        BoolExpr::Const(b) => Operand::Const(*b),
        BoolExpr::Var(v) => Operand::Var(*v),
        BoolExpr::Not(c) => {
            let a = lower(c, gates);
            push(gates, GateOp::Not, a, None)
        }
        BoolExpr::And(cs) => chain(cs, GateOp::And, GateOp::And, gates),
        BoolExpr::Or(cs) => chain(cs, GateOp::Or, GateOp::Or, gates),
        BoolExpr::Xor(cs) => chain(cs, GateOp::Xor, GateOp::Xor, gates),
        BoolExpr::Xnor(cs) => chain(cs, GateOp::Xor, GateOp::Xnor, gates),
    }
}

fn chain(cs: &[BoolExpr], op: GateOp, last: GateOp, gates: &mut Vec<Gate2>) -> Operand {
    let mut acc = lower(&cs[0], gates);
    for (i, c) in cs.iter().enumerate().skip(1) {
        let rhs = lower(c, gates);
        let kind = if i + 1 == cs.len() { last } else { op };
        acc = push(gates, kind, acc, Some(rhs));
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn x(v: u32) -> BoolExpr {
        BoolExpr::var(v)
    }

    #[test]
    fn and_chain() {
        let d = decompose_two_input(&BoolExpr::and([x(1), x(2), x(3)]));
        assert_eq!(
            d.gates,
            vec![
                Gate2 { op: GateOp::And, a: Operand::Var(1), b: Some(Operand::Var(2)) },
                Gate2 { op: GateOp::And, a: Operand::Gate(0), b: Some(Operand::Var(3)) },
            ]
        );
        assert_eq!(d.root, Operand::Gate(1));
    }

    #[test]
    fn mux_gate_counts() {
        let mux = BoolExpr::or([
            BoolExpr::and([x(107), x(4)]),
            BoolExpr::and([x(108), BoolExpr::not(x(4))]),
        ]);
        let d = decompose_two_input(&mux);
        let count = |op| d.gates.iter().filter(|g| g.op == op).count();
        assert_eq!(count(GateOp::And), 2);
        assert_eq!(count(GateOp::Or), 1);
        assert_eq!(count(GateOp::Not), 1);
        assert_eq!(d.gate_equivalents(), mux.gate_equivalents());
    }

    #[test]
    fn xnor_chain_closes_with_xnor() {
        let e = BoolExpr::xnor([x(1), x(2), x(3)]);
        let d = decompose_two_input(&e);
        assert_eq!(d.gates.len(), 2);
        assert_eq!(d.gates[0].op, GateOp::Xor);
        assert_eq!(d.gates[1].op, GateOp::Xnor);
    }

    #[test]
    fn leaves_need_no_gates() {
        assert_eq!(decompose_two_input(&x(4)).root, Operand::Var(4));
        assert!(decompose_two_input(&BoolExpr::TRUE).gates.is_empty());
    }

    proptest! {
        #[test]
        fn gate_list_reproduces_expression(e in crate::boolexpr::tests::arb_expr(10)) {
            let d = decompose_two_input(&e);
            for (i, g) in d.gates.iter().enumerate() {
                for o in [Some(g.a), g.b].into_iter().flatten() {
                    if let Operand::Gate(j) = o { prop_assert!(j < i); }
                }
            }
            prop_assert_eq!(d.gate_equivalents(), e.gate_equivalents());
            let vars = e.support();
            for bits in 0u32..(1 << vars.len()) {
                let look = |v: u32| vars.vars().iter().position(|&w| w == v).map(|i| bits >> i & 1 == 1);
                prop_assert_eq!(d.eval(&look), e.eval(&look));
            }
        }
    }
}
