//! Probabilistic relaxation of a [`Circuit`] and its reverse-mode gradient.
//!
//! Gate semantics on probabilities:
//!
//! | gate | value | d/dP1 |
//! |------|-------|-------|
//! | NOT  | 1 - P1 | -1 |
//! | AND  | P1 P2 | P2 |
//! | OR   | 1 - (1 - P1)(1 - P2) | 1 - P2 |
//! | XOR  | (1 - P1) P2 + P1 (1 - P2) | 1 - 2 P2 |
//! | XNOR | P1 P2 + (1 - P1)(1 - P2) | 2 P2 - 1 |
//!
//! Soft inputs `V` map to probabilities through a sigmoid; the loss is the
//! squared distance of the outputs from their targets.

use std::fmt::Debug;

use ndarray::{Array2, ArrayView2, Zip};
use num_traits::Float;
use thiserror::Error;

use crate::circuit::{Circuit, Gate, NodeId};
use crate::exec::{self, Parallelism};

/// Floating point types the relaxation runs on.
pub trait Real: Float + Send + Sync + Debug + 'static {}
impl<T: Float + Send + Sync + Debug + 'static> Real for T {}

/// Sigmoid arguments are clamped to `[-SATURATION, SATURATION]`.
pub const SATURATION: f64 = 40.0;

/// Probability fed to inputs that have no column.
pub const FIXED_PROBABILITY: f64 = 0.5;

#[derive(Debug, Error, PartialEq)]
pub enum AutodiffError {
    #[error("shape mismatch: expected {expected:?}, got {got:?}")]
    Shape { expected: (usize, usize), got: (usize, usize) },
    #[error("probability at row {row}, column {col} is outside [0, 1]")]
    OutOfRange { row: usize, col: usize },
    #[error("x{0} is not a primary input of the circuit")]
    NotAnInput(u32),
}

fn c<T: Real>(x: f64) -> T {
    T::from(x).expect("representable constant")
}

#[inline]
pub fn sigmoid<T: Real>(v: T) -> T {
    let s = c::<T>(SATURATION);
    let v = v.max(-s).min(s);
    T::one() / (T::one() + (-v).exp())
}

pub fn embed<T: Real>(v: ArrayView2<T>) -> Array2<T> {
    v.mapv(sigmoid)
}

/// Bit is set iff `V >= 0`, i.e. iff the probability is at least one half.
pub fn harden<T: Real>(v: ArrayView2<T>) -> Array2<bool> {
    v.mapv(|x| x >= T::zero())
}

/// `V - lr * grad`.
pub fn gd_step<T: Real>(v: ArrayView2<T>, grad: ArrayView2<T>, lr: T) -> Result<Array2<T>, AutodiffError> {
    if v.dim() != grad.dim() {
        return Err(AutodiffError::Shape { expected: v.dim(), got: grad.dim() });
    }
    Ok(Zip::from(&v).and(&grad).map_collect(|&x, &g| x - lr * g))
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum Source {
    Column(usize),
    Fixed(f64),
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum PGate {
    Input(Source),
    Const(bool),
    Not(usize),
    And(usize, usize),
    Or(usize, usize),
    Xor(usize, usize),
    Xnor(usize, usize),
}

/// Node activations of one forward pass, `rows x nodes`.
#[derive(Clone, Debug, PartialEq)]
pub struct Tape<T> {
    pub values: Array2<T>,
}

/// The circuit restricted to what the loss depends on, with inputs bound to
/// the columns of `V`.
#[derive(Clone, Debug)]
pub struct Relaxation {
    gates: Vec<PGate>,
    nodes: Vec<NodeId>,
    outputs: Vec<usize>,
    targets: Vec<bool>,
    columns: Vec<u32>,
}

impl Relaxation {
    /// Keeps only the fan-in cone of the outputs.
    pub fn new(circuit: &Circuit, columns: &[u32]) -> Result<Self, AutodiffError> {
        let mut keep = vec![false; circuit.nodes.len()];
        for o in &circuit.outputs {
            keep[o.node] = true;
        }
        for i in (0..circuit.nodes.len()).rev() {
            if keep[i] {
                for a in circuit.nodes[i].gate.args() {
                    keep[a] = true;
                }
            }
        }
        Self::with_nodes(circuit, columns, &keep)
    }

    /// Keeps every node, so the tape covers the whole circuit.
    pub fn whole(circuit: &Circuit, columns: &[u32]) -> Result<Self, AutodiffError> {
        Self::with_nodes(circuit, columns, &vec![true; circuit.nodes.len()])
    }

    fn with_nodes(circuit: &Circuit, columns: &[u32], keep: &[bool]) -> Result<Self, AutodiffError> {
        let mut column_of = std::collections::HashMap::new();
        for (j, &v) in columns.iter().enumerate() {
            if !circuit.inputs.iter().any(|&(w, _)| w == v) {
                return Err(AutodiffError::NotAnInput(v));
            }
            column_of.insert(v, j);
        }
        let var_of_input: std::collections::HashMap<NodeId, u32> =
            circuit.inputs.iter().map(|&(v, n)| (n, v)).collect();
        let mut local = vec![usize::MAX; circuit.nodes.len()];
        let mut gates = Vec::new();
        let mut nodes = Vec::new();
        for (i, n) in circuit.nodes.iter().enumerate() {
            if !keep[i] {
                continue;
            }
            let l = |a: NodeId| local[a];
            let g = match n.gate {
                Gate::Input => match column_of.get(&var_of_input[&i]) {
                    Some(&j) => PGate::Input(Source::Column(j)),
                    None => PGate::Input(Source::Fixed(FIXED_PROBABILITY)),
                },
                Gate::Const(b) => PGate::Const(b),
                Gate::Not(a) => PGate::Not(l(a)),
                Gate::And(a, b) => PGate::And(l(a), l(b)),
                Gate::Or(a, b) => PGate::Or(l(a), l(b)),
                Gate::Xor(a, b) => PGate::Xor(l(a), l(b)),
                Gate::Xnor(a, b) => PGate::Xnor(l(a), l(b)),
            };
            local[i] = gates.len();
            gates.push(g);
            nodes.push(i);
        }
        Ok(Relaxation {
            gates,
            nodes,
            outputs: circuit.outputs.iter().map(|o| local[o.node]).collect(),
            targets: circuit.outputs.iter().map(|o| o.target).collect(),
            columns: columns.to_vec(),
        })
    }

    pub fn num_columns(&self) -> usize {
        self.columns.len()
    }

    pub fn columns(&self) -> &[u32] {
        &self.columns
    }

    pub fn num_outputs(&self) -> usize {
        self.outputs.len()
    }

    pub fn num_nodes(&self) -> usize {
        self.gates.len()
    }

    /// Circuit node behind each tape column.
    pub fn circuit_nodes(&self) -> &[NodeId] {
        &self.nodes
    }

    pub fn targets(&self) -> &[bool] {
        &self.targets
    }

    /// One row of the forward pass into `vals`.
    pub fn forward_row<T: Real>(&self, p: &[T], vals: &mut [T]) {
        let one = T::one();
        for (i, g) in self.gates.iter().enumerate() {
            vals[i] = match *g {
                PGate::Input(Source::Column(j)) => p[j],
                PGate::Input(Source::Fixed(q)) => c(q),
                PGate::Const(b) => if b { one } else { T::zero() },
                PGate::Not(a) => one - vals[a],
                PGate::And(a, b) => vals[a] * vals[b],
                PGate::Or(a, b) => one - (one - vals[a]) * (one - vals[b]),
                PGate::Xor(a, b) => (one - vals[a]) * vals[b] + vals[a] * (one - vals[b]),
                PGate::Xnor(a, b) => vals[a] * vals[b] + (one - vals[a]) * (one - vals[b]),
            };
        }
    }

    /// Squared error of one row's outputs.
    pub fn row_loss<T: Real>(&self, vals: &[T]) -> T {
        self.outputs
            .iter()
            .zip(&self.targets)
            .fold(T::zero(), |acc, (&o, &t)| {
                let d = vals[o] - if t { T::one() } else { T::zero() };
                acc + d * d
            })
    }

    /// dL/dP for one row, given its forward values. `adj` is scratch.
    pub fn backward_row<T: Real>(&self, vals: &[T], adj: &mut [T], dp: &mut [T]) {
        let one = T::one();
        let two = c::<T>(2.0);
        adj.iter_mut().for_each(|x| *x = T::zero());
        dp.iter_mut().for_each(|x| *x = T::zero());
        for (&o, &t) in self.outputs.iter().zip(&self.targets) {
            adj[o] = adj[o] + two * (vals[o] - if t { one } else { T::zero() });
        }
        for i in (0..self.gates.len()).rev() {
            let g = adj[i];
            match self.gates[i] {
                PGate::Input(Source::Column(j)) => dp[j] = dp[j] + g,
                PGate::Input(Source::Fixed(_)) | PGate::Const(_) => {}
                PGate::Not(a) => adj[a] = adj[a] - g,
                PGate::And(a, b) => {
                    let (va, vb) = (vals[a], vals[b]);
                    adj[a] = adj[a] + g * vb;
                    adj[b] = adj[b] + g * va;
                }
                PGate::Or(a, b) => {
                    let (va, vb) = (vals[a], vals[b]);
                    adj[a] = adj[a] + g * (one - vb);
                    adj[b] = adj[b] + g * (one - va);
                }
                PGate::Xor(a, b) => {
                    let (va, vb) = (vals[a], vals[b]);
                    adj[a] = adj[a] + g * (one - two * vb);
                    adj[b] = adj[b] + g * (one - two * va);
                }
                PGate::Xnor(a, b) => {
                    let (va, vb) = (vals[a], vals[b]);
                    adj[a] = adj[a] + g * (two * vb - one);
                    adj[b] = adj[b] + g * (two * va - one);
                }
            }
        }
    }

    fn check_width(&self, dim: (usize, usize)) -> Result<(), AutodiffError> {
        if dim.1 != self.columns.len() {
            return Err(AutodiffError::Shape { expected: (dim.0, self.columns.len()), got: dim });
        }
        Ok(())
    }

    /// Outputs `Y` (`rows x outputs`) and the full tape.
    pub fn forward<T: Real>(&self, p: ArrayView2<T>, par: Parallelism) -> Result<(Array2<T>, Tape<T>), AutodiffError> {
        self.check_width(p.dim())?;
        if let Some(((row, col), _)) = p.indexed_iter().find(|(_, &x)| !(x >= T::zero() && x <= T::one())) {
            return Err(AutodiffError::OutOfRange { row, col });
        }
        let (b, n) = p.dim();
        let p = p.as_standard_layout();
        let p = p.as_slice().expect("standard layout");
        let width = self.gates.len();
        let mut values = Array2::zeros((b, width));
        exec::rows_mut(
            par,
            values.as_slice_mut().expect("standard layout"),
            b,
            width,
            || (),
            |_, r, row| self.forward_row(&p[r * n..(r + 1) * n], row),
        );
        let y = Array2::from_shape_fn((b, self.outputs.len()), |(r, k)| values[(r, self.outputs[k])]);
        Ok((y, Tape { values }))
    }

    /// Per-row squared error and its row-ordered sum.
    pub fn loss<T: Real>(&self, y: ArrayView2<T>) -> Result<(T, Vec<T>), AutodiffError> {
        if y.ncols() != self.outputs.len() {
            return Err(AutodiffError::Shape { expected: (y.nrows(), self.outputs.len()), got: y.dim() });
        }
        let per_row: Vec<T> = y
            .rows()
            .into_iter()
            .map(|row| {
                row.iter().zip(&self.targets).fold(T::zero(), |acc, (&v, &t)| {
                    let d = v - if t { T::one() } else { T::zero() };
                    acc + d * d
                })
            })
            .collect();
        Ok((sum_in_order(&per_row), per_row))
    }

    /// dL/dV from a tape produced at `embed(v)`.
    pub fn backward<T: Real>(&self, tape: &Tape<T>, v: ArrayView2<T>, par: Parallelism) -> Result<Array2<T>, AutodiffError> {
        self.check_width(v.dim())?;
        let (b, n) = v.dim();
        if tape.values.dim() != (b, self.gates.len()) {
            return Err(AutodiffError::Shape { expected: (b, self.gates.len()), got: tape.values.dim() });
        }
        let v = v.as_standard_layout();
        let v = v.as_slice().expect("standard layout");
        let vals = tape.values.as_slice().expect("standard layout");
        let width = self.gates.len();
        let mut grad = Array2::zeros((b, n));
        exec::rows_mut(
            par,
            grad.as_slice_mut().expect("standard layout"),
            b,
            n,
            || vec![T::zero(); width],
            |adj, r, dv| {
                self.backward_row(&vals[r * width..(r + 1) * width], adj, dv);
                for (d, &x) in dv.iter_mut().zip(&v[r * n..(r + 1) * n]) {
                    let p = sigmoid(x);
                    *d = *d * (p * (T::one() - p));
                }
            },
        );
        Ok(grad)
    }

    /// Loss at `v` without building a tape.
    pub fn loss_at<T: Real>(&self, v: &Array2<T>, par: Parallelism) -> Result<(T, Vec<T>), AutodiffError> {
        self.check_width(v.dim())?;
        let (b, n) = v.dim();
        let v = v.as_standard_layout();
        let v = v.as_slice().expect("standard layout");
        let width = self.gates.len();
        let per_row = exec::map_rows(
            par,
            b,
            || (vec![T::zero(); n], vec![T::zero(); width]),
            |(p, vals), r| {
                for (q, &x) in p.iter_mut().zip(&v[r * n..(r + 1) * n]) {
                    *q = sigmoid(x);
                }
                self.forward_row(p, vals);
                self.row_loss(vals)
            },
        );
        Ok((sum_in_order(&per_row), per_row))
    }

    /// One fused forward, backward and update on `v` in place. Returns the
    /// loss before the update. Matches `forward`, `backward` and `gd_step`
    /// bit for bit.
    pub fn step<T: Real>(&self, v: &mut Array2<T>, lr: T, par: Parallelism) -> Result<(T, Vec<T>), AutodiffError> {
        self.check_width(v.dim())?;
        let (b, n) = v.dim();
        if !v.is_standard_layout() {
            *v = v.as_standard_layout().into_owned();
        }
        let width = self.gates.len();
        let per_row = exec::rows_mut(
            par,
            v.as_slice_mut().expect("standard layout"),
            b,
            n,
            || (vec![T::zero(); n], vec![T::zero(); width], vec![T::zero(); width], vec![T::zero(); n]),
            |(p, vals, adj, dp), _, row| {
                for (q, &x) in p.iter_mut().zip(row.iter()) {
                    *q = sigmoid(x);
                }
                self.forward_row(p, vals);
                let loss = self.row_loss(vals);
                self.backward_row(vals, adj, dp);
                for ((x, &d), &q) in row.iter_mut().zip(dp.iter()).zip(p.iter()) {
                    *x = *x - lr * (d * (q * (T::one() - q)));
                }
                loss
            },
        );
        Ok((sum_in_order(&per_row), per_row))
    }
}

fn sum_in_order<T: Real>(xs: &[T]) -> T {
    xs.iter().fold(T::zero(), |a, &x| a + x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::boolexpr::BoolExpr;
    use crate::extract::{Definition, ExtractionResult, OutputTarget};
    use ndarray::array;

    fn single(expr: BoolExpr, inputs: &[u32], target: bool) -> (Circuit, Relaxation) {
        let out = inputs.iter().max().unwrap() + 1;
        let res = ExtractionResult {
            num_vars: out,
            pi: inputs.to_vec(),
            iv: vec![],
            po: vec![OutputTarget { var: out, target }],
            be: vec![Definition { var: out, expr }],
            ..Default::default()
        };
        let circuit = Circuit::build(&res).unwrap();
        let relax = Relaxation::new(&circuit, inputs).unwrap();
        (circuit, relax)
    }

    fn x(v: u32) -> BoolExpr {
        BoolExpr::var(v)
    }

    #[test]
    fn embedding() {
        let p = embed(array![[0.0, 40.0, 3f64.ln(), -1e9]].view());
        assert_eq!(p[(0, 0)], 0.5);
        assert!((1.0 - p[(0, 1)]).abs() <= f64::EPSILON);
        assert!((p[(0, 2)] - 0.75).abs() < 1e-15);
        assert!(p[(0, 3)] > 0.0);
    }

    #[test]
    fn hardening() {
        assert_eq!(harden(array![[0.0, -3.2, 1e-300]].view()), array![[true, false, true]]);
    }

    #[test]
    fn or_at_half() {
        let (_, r) = single(BoolExpr::or([x(1), x(2)]), &[1, 2], true);
        let (y, _) = r.forward(array![[0.5, 0.5]].view(), Parallelism::Sequential).unwrap();
        assert_eq!(y[(0, 0)], 0.75);
    }

    #[test]
    fn losses() {
        let (_, r) = single(BoolExpr::and([x(1), x(2)]), &[1, 2], true);
        assert_eq!(r.loss(array![[1.0]].view()).unwrap().0, 0.0);
        assert_eq!(r.loss(array![[0.5]].view()).unwrap().0, 0.25);
        let (total, per_row) = r.loss(array![[0.5], [0.25], [1.0]].view()).unwrap();
        assert_eq!(total, per_row.iter().sum::<f64>());
    }

    #[test]
    fn and_gradient_by_hand() {
        let (_, r) = single(BoolExpr::and([x(1), x(2)]), &[1, 2], true);
        let mut vals = vec![0.0; r.num_nodes()];
        let mut adj = vals.clone();
        let mut dp = vec![0.0; 2];
        r.forward_row(&[0.5, 0.8], &mut vals);
        r.backward_row(&vals, &mut adj, &mut dp);
        assert!((dp[0] - -0.96).abs() < 1e-12);
    }

    #[test]
    fn out_of_range_probability() {
        let (_, r) = single(BoolExpr::and([x(1), x(2)]), &[1, 2], true);
        let err = r.forward(array![[0.5, 1.5]].view(), Parallelism::Sequential).unwrap_err();
        assert_eq!(err, AutodiffError::OutOfRange { row: 0, col: 1 });
        assert!(matches!(r.forward(array![[0.5]].view(), Parallelism::Sequential), Err(AutodiffError::Shape { .. })));
    }

    #[test]
    fn disconnected_column_has_zero_gradient() {
        let (c, _) = single(BoolExpr::and([x(1), x(2)]), &[1, 2, 3], true);
        let r = Relaxation::new(&c, &[1, 2, 3]).unwrap();
        let v = array![[0.3, -0.2, 0.9], [1.0, 0.1, -0.7]];
        let (_, tape) = r.forward(embed(v.view()).view(), Parallelism::Sequential).unwrap();
        let g = r.backward(&tape, v.view(), Parallelism::Sequential).unwrap();
        assert!(g.column(2).iter().all(|&d| d == 0.0));
        assert!(g.column(0).iter().all(|&d| d != 0.0));
    }

    #[test]
    fn descent_at_small_rate() {
        let (_, r) = single(BoolExpr::and([x(1), x(2)]), &[1, 2], true);
        let mut v = array![[0.0, 1.386]];
        let before = r.loss_at(&v, Parallelism::Sequential).unwrap().0;
        r.step(&mut v, 0.1, Parallelism::Sequential).unwrap();
        assert!(r.loss_at(&v, Parallelism::Sequential).unwrap().0 < before);
        let zero = Array2::zeros((1, 2));
        assert_eq!(gd_step(v.view(), zero.view(), 10.0).unwrap(), v);
    }

    #[test]
    fn fused_step_matches_composition() {
        let (_, r) = single(BoolExpr::xor([x(1), BoolExpr::and([x(2), BoolExpr::not(x(3))])]), &[1, 2, 3], false);
        let v = array![[0.3, -0.2, 0.9], [1.0, 0.1, -0.7]];
        let (y, tape) = r.forward(embed(v.view()).view(), Parallelism::Sequential).unwrap();
        let g = r.backward(&tape, v.view(), Parallelism::Sequential).unwrap();
        let expected = gd_step(v.view(), g.view(), 10.0).unwrap();
        let mut fused = v.clone();
        let (loss, _) = r.step(&mut fused, 10.0, Parallelism::Parallel).unwrap();
        assert_eq!(fused, expected);
        assert_eq!(loss, r.loss(y.view()).unwrap().0);
    }

    #[test]
    fn de_morgan_is_exact() {
        let (_, nand) = single(BoolExpr::not(BoolExpr::and([x(1), x(2)])), &[1, 2], true);
        let (_, or_not) = single(BoolExpr::or([BoolExpr::not(x(1)), BoolExpr::not(x(2))]), &[1, 2], true);
        for &(a, b) in &[(0.1, 0.7), (0.5, 0.5), (0.33, 0.99), (0.0, 1.0)] {
            let p = array![[a, b]];
            let (y1, _) = nand.forward(p.view(), Parallelism::Sequential).unwrap();
            let (y2, _) = or_not.forward(p.view(), Parallelism::Sequential).unwrap();
            assert_eq!(y1, y2);
        }
    }

    #[test]
    fn rows_are_independent() {
        let (_, r) = single(BoolExpr::or([BoolExpr::and([x(1), x(2)]), BoolExpr::xnor([x(2), x(3)])]), &[1, 2, 3], true);
        let v = array![[0.3, -0.2, 0.9], [1.0, 0.1, -0.7], [-2.0, 0.0, 0.4]];
        let perm = [2usize, 0, 1];
        let pv = v.select(ndarray::Axis(0), &perm);
        let (y, t) = r.forward(embed(v.view()).view(), Parallelism::Sequential).unwrap();
        let (py, pt) = r.forward(embed(pv.view()).view(), Parallelism::Sequential).unwrap();
        assert_eq!(py, y.select(ndarray::Axis(0), &perm));
        let g = r.backward(&t, v.view(), Parallelism::Sequential).unwrap();
        let pg = r.backward(&pt, pv.view(), Parallelism::Sequential).unwrap();
        assert_eq!(pg, g.select(ndarray::Axis(0), &perm));
    }

    #[test]
    fn single_precision_runs() {
        let (_, r) = single(BoolExpr::and([x(1), x(2)]), &[1, 2], true);
        let mut v: Array2<f32> = array![[0.0, 0.0]];
        let (l0, _) = r.step(&mut v, 10.0, Parallelism::Sequential).unwrap();
        assert_eq!(l0, 0.5625);
        assert!(r.loss_at(&v, Parallelism::Sequential).unwrap().0 < l0);
    }
}
