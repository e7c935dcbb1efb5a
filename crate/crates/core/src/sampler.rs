//! Batched gradient-descent sampling over the relaxed circuit.

use std::io::{self, Write};
use std::time::Instant;

use indexmap::IndexSet;
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::autodiff::{harden, Real, Relaxation};
use crate::circuit::{Circuit, CircuitError};
use crate::cnf::{eval_cnf, Assignment, CnfFormula};
use crate::exec::{self, Parallelism};
use crate::extract::{extract, ExtractionResult, ExtractorConfig, PathClassification};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RestartPolicy {
    #[default]
    None,
    /// Reinitialize the whole batch while the quota is unmet.
    ReinitOnExhaust,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Precision {
    #[default]
    F64,
    F32,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SamplerConfig {
    pub batch_size: usize,
    pub iterations: usize,
    pub learning_rate: f64,
    pub seed: u64,
    pub max_solutions: Option<usize>,
    pub timeout_secs: Option<f64>,
    pub restart_policy: RestartPolicy,
    /// Cap on reinitializations; unbounded when `None`.
    pub max_restarts: Option<usize>,
    /// Soft inputs start uniform on `[-init_range, init_range]`.
    pub init_range: f64,
    pub parallelism: Parallelism,
    /// Worker count; the global pool when `None`.
    pub threads: Option<usize>,
    pub precision: Precision,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig {
            batch_size: 10_000,
            iterations: 5,
            learning_rate: 10.0,
            seed: 0,
            max_solutions: None,
            timeout_secs: None,
            restart_policy: RestartPolicy::None,
            max_restarts: None,
            init_range: 1.0,
            parallelism: Parallelism::Parallel,
            threads: None,
            precision: Precision::F64,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<(), SampleError> {
        let bad = |m: &str| Err(SampleError::InvalidConfig(m.to_string()));
        if self.batch_size == 0 {
            return bad("batch size must be at least 1");
        }
        if self.iterations == 0 {
            return bad("iterations must be at least 1");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning rate must be positive");
        }
        if !(self.init_range >= 0.0 && self.init_range.is_finite()) {
            return bad("init range must be finite and non-negative");
        }
        if self.timeout_secs.is_some_and(|t| t.is_nan() || t < 0.0) {
            return bad("timeout must be non-negative");
        }
        if self.max_solutions == Some(0) {
            return bad("max solutions must be at least 1");
        }
        if self.restart_policy == RestartPolicy::ReinitOnExhaust
            && self.max_solutions.is_none()
            && self.timeout_secs.is_none()
            && self.max_restarts.is_none()
        {
            return bad("restarts need a quota, a timeout or a restart cap");
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum SampleError {
    #[error("invalid sampler configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Circuit(#[from] CircuitError),
    #[error(transparent)]
    Autodiff(#[from] crate::autodiff::AutodiffError),
}

/// Packed bits of variables `1..=num_vars`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct DedupeKey(Vec<u64>);

pub fn dedupe_key(a: &Assignment) -> DedupeKey {
    let mut words = vec![0u64; a.values().len().div_ceil(64)];
    for (i, &b) in a.values().iter().enumerate() {
        words[i >> 6] |= u64::from(b) << (i & 63);
    }
    DedupeKey(words)
}

impl DedupeKey {
    pub fn to_assignment(&self, num_vars: u32) -> Assignment {
        Assignment::new((0..num_vars as usize).map(|i| self.0[i >> 6] >> (i & 63) & 1 == 1).collect())
    }
}

/// Distinct satisfying assignments in insertion order.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct SolutionSet {
    num_vars: u32,
    keys: IndexSet<DedupeKey>,
}

impl SolutionSet {
    pub fn new(num_vars: u32) -> Self {
        SolutionSet { num_vars, keys: IndexSet::new() }
    }

    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }

    /// Returns whether the key was new.
    pub fn insert(&mut self, key: DedupeKey) -> bool {
        self.keys.insert(key)
    }

    pub fn contains(&self, a: &Assignment) -> bool {
        self.keys.contains(&dedupe_key(a))
    }

    pub fn iter(&self) -> impl Iterator<Item = Assignment> + '_ {
        self.keys.iter().map(|k| k.to_assignment(self.num_vars))
    }

    pub fn truncate(&mut self, len: usize) {
        self.keys.truncate(len);
    }

    /// One model line per solution.
    pub fn write_model_lines(&self, mut out: impl Write) -> io::Result<()> {
        for a in self.iter() {
            writeln!(out, "{}", a.to_model_line())?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub restart: usize,
    pub iteration: usize,
    /// Summed loss of the batch at this iteration's soft inputs.
    pub loss: f64,
    pub satisfying_rows: usize,
    pub new_unique: usize,
    pub cumulative_unique: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RunStats {
    pub unique_count: usize,
    /// Hardened rows checked against the formula.
    pub attempts: usize,
    pub restarts: usize,
    pub wall_time_secs: f64,
    pub throughput: f64,
    pub loss_trace: Vec<f64>,
    pub new_unique: Vec<usize>,
    pub iterations: Vec<IterationRecord>,
    pub constrained_inputs: usize,
    pub unconstrained_inputs: usize,
    pub quota_met: bool,
    pub timed_out: bool,
    pub unsat: Option<String>,
}

impl RunStats {
    /// Copy with wall-clock fields zeroed, for reproducibility checks.
    pub fn without_timing(&self) -> RunStats {
        RunStats { wall_time_secs: 0.0, throughput: 0.0, ..self.clone() }
    }
}

#[derive(Clone, Debug)]
pub struct SampleOutcome {
    pub solutions: SolutionSet,
    pub stats: RunStats,
}

/// Everything sampling needs from a formula.
#[derive(Clone, Debug)]
pub struct Prepared {
    pub extraction: ExtractionResult,
    pub circuit: Option<Circuit>,
    pub classification: PathClassification,
}

impl Prepared {
    pub fn new(cnf: &CnfFormula, cfg: ExtractorConfig) -> Result<Self, CircuitError> {
        let extraction = extract(cnf, cfg);
        Self::from_extraction(extraction)
    }

    /// `circuit` is `None` for an unsatisfiable extraction.
    pub fn from_extraction(extraction: ExtractionResult) -> Result<Self, CircuitError> {
        let circuit = if extraction.is_unsat() { None } else { Some(Circuit::build(&extraction)?) };
        let classification = extraction.classify_paths();
        Ok(Prepared { extraction, circuit, classification })
    }

    pub fn run(&self, cnf: &CnfFormula, cfg: &SamplerConfig) -> Result<SampleOutcome, SampleError> {
        match &self.circuit {
            Some(c) => run(cnf, c, &self.extraction, &self.classification, cfg),
            None => unsat_outcome(cnf, &self.extraction, cfg),
        }
    }
}

/// Extracts, builds and samples in one call.
pub fn sample(cnf: &CnfFormula, ecfg: ExtractorConfig, cfg: &SamplerConfig) -> Result<SampleOutcome, SampleError> {
    Prepared::new(cnf, ecfg)?.run(cnf, cfg)
}

fn unsat_outcome(cnf: &CnfFormula, res: &ExtractionResult, cfg: &SamplerConfig) -> Result<SampleOutcome, SampleError> {
    cfg.validate()?;
    let detail = res.conflict.as_ref().map(|c| format!("x{}: {}", c.var, c.detail));
    Ok(SampleOutcome {
        solutions: SolutionSet::new(cnf.num_vars),
        stats: RunStats { unsat: Some(detail.unwrap_or_default()), ..Default::default() },
    })
}

// stream tags for per-row generators
const INIT_STREAM: u64 = 1;
const FREE_STREAM: u64 = 2;

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Generator for one (stream, restart, iteration, row) cell.
pub fn row_rng(seed: u64, stream: u64, restart: usize, iteration: usize, row: usize) -> ChaCha8Rng {
    let mut h = splitmix(seed);
    for x in [stream, restart as u64, iteration as u64, row as u64] {
        h = splitmix(h ^ x);
    }
    ChaCha8Rng::seed_from_u64(h)
}

/// `b x n` soft inputs, i.i.d. uniform on `[-range, range]`, one generator
/// per row.
pub fn init_soft_inputs<T: Real>(
    b: usize,
    n: usize,
    range: f64,
    seed: u64,
    restart: usize,
    par: Parallelism,
) -> Array2<T> {
    let mut v = Array2::zeros((b, n));
    exec::rows_mut(par, v.as_slice_mut().expect("standard layout"), b, n, || (), |_, r, row| {
        let mut rng = row_rng(seed, INIT_STREAM, restart, 0, r);
        for x in row.iter_mut() {
            *x = T::from(rng.random_range(-range..=range)).expect("representable");
        }
    });
    v
}

#[derive(Clone, Copy)]
enum InputSource {
    Column(usize),
    Free(usize),
}

struct Harvester<'a> {
    cnf: &'a CnfFormula,
    circuit: &'a Circuit,
    sources: Vec<InputSource>,
    free: usize,
    /// node carrying each original variable, index `var - 1`
    var_node: Vec<usize>,
}

impl<'a> Harvester<'a> {
    fn new(cnf: &'a CnfFormula, circuit: &'a Circuit, cls: &PathClassification) -> Self {
        let sources = circuit
            .inputs
            .iter()
            .map(|&(v, _)| match cls.constrained_pi.iter().position(|&w| w == v) {
                Some(j) => InputSource::Column(j),
                None => InputSource::Free(cls.unconstrained_pi.iter().position(|&w| w == v).unwrap_or(usize::MAX)),
            })
            .collect();
        let var_node = (1..=cnf.num_vars)
            .map(|v| *circuit.signals.get(&v).expect("every variable has a node"))
            .collect();
        Harvester { cnf, circuit, sources, free: cls.unconstrained_pi.len(), var_node }
    }

    /// Satisfying assignment for one hardened row, if any.
    fn row(&self, bits: &[bool], rng_cell: (u64, usize, usize, usize), scratch: &mut (Vec<bool>, Vec<bool>, Vec<bool>)) -> Option<DedupeKey> {
        let (inputs, values, free) = scratch;
        let (seed, restart, iteration, row) = rng_cell;
        if self.free > 0 {
            let mut rng = row_rng(seed, FREE_STREAM, restart, iteration, row);
            for f in free.iter_mut() {
                *f = rng.random();
            }
        }
        for (slot, src) in inputs.iter_mut().zip(&self.sources) {
            *slot = match *src {
                InputSource::Column(j) => bits[j],
                InputSource::Free(k) => free.get(k).copied().unwrap_or(false),
            };
        }
        self.circuit.eval_nodes_into(inputs, values);
        let a = Assignment::new(self.var_node.iter().map(|&n| values[n]).collect());
        match eval_cnf(self.cnf, &a) {
            Ok(true) => Some(dedupe_key(&a)),
            _ => None,
        }
    }

    fn harvest(&self, bits: &Array2<bool>, seed: u64, restart: usize, iteration: usize, par: Parallelism) -> Vec<Option<DedupeKey>> {
        let n = bits.ncols();
        let flat = bits.as_slice().expect("standard layout");
        exec::map_rows(
            par,
            bits.nrows(),
            || {
                (
                    vec![false; self.circuit.inputs.len()],
                    vec![false; self.circuit.nodes.len()],
                    vec![false; self.free],
                )
            },
            |s, r| self.row(&flat[r * n..(r + 1) * n], (seed, restart, iteration, r), s),
        )
    }
}

/// Samples satisfying assignments of `cnf` through `circuit`.
pub fn run(
    cnf: &CnfFormula,
    circuit: &Circuit,
    res: &ExtractionResult,
    cls: &PathClassification,
    cfg: &SamplerConfig,
) -> Result<SampleOutcome, SampleError> {
    cfg.validate()?;
    if res.is_unsat() {
        return unsat_outcome(cnf, res, cfg);
    }
    exec::with_threads(cfg.threads, || match cfg.precision {
        Precision::F64 => run_typed::<f64>(cnf, circuit, cls, cfg),
        Precision::F32 => run_typed::<f32>(cnf, circuit, cls, cfg),
    })
}

fn run_typed<T: Real>(
    cnf: &CnfFormula,
    circuit: &Circuit,
    cls: &PathClassification,
    cfg: &SamplerConfig,
) -> Result<SampleOutcome, SampleError> {
    let start = Instant::now();
    let par = cfg.parallelism;
    let relax = Relaxation::new(circuit, &cls.constrained_pi)?;
    let harvester = Harvester::new(cnf, circuit, cls);
    let lr = T::from(cfg.learning_rate).expect("representable");
    let b = cfg.batch_size;
    let n = relax.num_columns();

    let mut solutions = SolutionSet::new(cnf.num_vars);
    let mut stats = RunStats {
        constrained_inputs: n,
        unconstrained_inputs: cls.unconstrained_pi.len(),
        ..Default::default()
    };
    let quota = cfg.max_solutions;
    let quota_met = |s: &SolutionSet| quota.is_some_and(|q| s.len() >= q);
    let out_of_time = || cfg.timeout_secs.is_some_and(|t| start.elapsed().as_secs_f64() >= t);

    let mut restart = 0;
    'restarts: loop {
        let mut v: Array2<T> = init_soft_inputs(b, n, cfg.init_range, cfg.seed, restart, par);
        for iteration in 0..=cfg.iterations {
            if iteration > 0 && out_of_time() {
                stats.timed_out = true;
                break 'restarts;
            }
            let bits = harden(v.view());
            // loss at the current inputs, then the update
            let loss = if iteration < cfg.iterations {
                relax.step(&mut v, lr, par)?.0
            } else {
                relax.loss_at(&v, par)?.0
            };
            let found = harvester.harvest(&bits, cfg.seed, restart, iteration, par);
            stats.attempts += found.len();
            let satisfying_rows = found.iter().filter(|k| k.is_some()).count();
            let before = solutions.len();
            for key in found.into_iter().flatten() {
                solutions.insert(key);
                if quota_met(&solutions) {
                    break;
                }
            }
            let loss = loss.to_f64().unwrap_or(f64::NAN);
            let new_unique = solutions.len() - before;
            stats.loss_trace.push(loss);
            stats.new_unique.push(new_unique);
            stats.iterations.push(IterationRecord {
                restart,
                iteration,
                loss,
                satisfying_rows,
                new_unique,
                cumulative_unique: solutions.len(),
            });
            if quota_met(&solutions) {
                break 'restarts;
            }
        }
        let may_restart = cfg.restart_policy == RestartPolicy::ReinitOnExhaust
            && cfg.max_restarts.is_none_or(|m| restart < m);
        if !may_restart {
            break;
        }
        if out_of_time() {
            stats.timed_out = true;
            break;
        }
        restart += 1;
    }

    stats.restarts = restart;
    stats.unique_count = solutions.len();
    stats.quota_met = quota_met(&solutions);
    stats.wall_time_secs = start.elapsed().as_secs_f64();
    stats.throughput = if stats.wall_time_secs > 0.0 { stats.unique_count as f64 / stats.wall_time_secs } else { 0.0 };
    Ok(SampleOutcome { solutions, stats })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cnf::{parse_dimacs, Clause};
    use proptest::prelude::*;

    #[test]
    fn init_range_and_determinism() {
        let a: Array2<f64> = init_soft_inputs(100, 7, 1.0, 9, 0, Parallelism::Parallel);
        let b: Array2<f64> = init_soft_inputs(100, 7, 1.0, 9, 0, Parallelism::Sequential);
        assert_eq!(a, b);
        assert!(a.iter().all(|x| (-1.0..=1.0).contains(x)));
        let c: Array2<f64> = init_soft_inputs(100, 7, 1.0, 9, 1, Parallelism::Sequential);
        assert_ne!(a, c);
    }

    #[test]
    fn init_mean_probability_is_half() {
        let v: Array2<f64> = init_soft_inputs(2000, 10, 1.0, 3, 0, Parallelism::Parallel);
        let mean = v.iter().map(|&x| crate::autodiff::sigmoid(x)).sum::<f64>() / v.len() as f64;
        assert!((mean - 0.5).abs() < 0.02, "mean {mean}");
    }

    #[test]
    fn keys() {
        let a = Assignment::from_bits(64, 0b1011);
        assert_eq!(dedupe_key(&a), dedupe_key(&a.clone()));
        let mut b = a.clone();
        b.set(64, true);
        assert_ne!(dedupe_key(&a), dedupe_key(&b));
        let long = Assignment::new((0..130).map(|i| i % 3 == 0).collect());
        assert_eq!(dedupe_key(&long).to_assignment(130), long);
    }

    proptest! {
        #[test]
        fn key_equality_matches_assignment_equality(x in proptest::collection::vec(any::<bool>(), 1..80), flip in any::<prop::sample::Index>()) {
            let a = Assignment::new(x.clone());
            let mut y = x.clone();
            let i = flip.index(y.len());
            y[i] = !y[i];
            let b = Assignment::new(y);
            prop_assert_eq!(dedupe_key(&a) == dedupe_key(&b), a == b);
            prop_assert_eq!(dedupe_key(&a), dedupe_key(&Assignment::new(x)));
        }
    }

    #[test]
    fn config_validation() {
        let ok = SamplerConfig::default();
        assert!(ok.validate().is_ok());
        for bad in [
            SamplerConfig { batch_size: 0, ..ok.clone() },
            SamplerConfig { iterations: 0, ..ok.clone() },
            SamplerConfig { learning_rate: 0.0, ..ok.clone() },
            SamplerConfig { restart_policy: RestartPolicy::ReinitOnExhaust, ..ok.clone() },
        ] {
            assert!(matches!(bad.validate(), Err(SampleError::InvalidConfig(_))));
        }
    }

    #[test]
    fn no_outputs_means_every_row_satisfies() {
        // x3 = x1 & x2 with no constraint on x3
        let cnf = parse_dimacs("p cnf 3 3\n3 -1 -2 0\n-3 1 0\n-3 2 0\n").unwrap();
        let cfg = SamplerConfig { batch_size: 64, iterations: 1, ..Default::default() };
        let out = sample(&cnf, ExtractorConfig::default(), &cfg).unwrap();
        assert_eq!(out.stats.constrained_inputs, 0);
        let first = &out.stats.iterations[0];
        assert_eq!(first.satisfying_rows, 64);
        assert_eq!(out.solutions.len(), 4);
    }

    #[test]
    fn unsat_is_reported_not_sampled() {
        let cnf = CnfFormula::new(1, vec![Clause::from_dimacs(&[1]), Clause::from_dimacs(&[-1])]);
        let out = sample(&cnf, ExtractorConfig::default(), &SamplerConfig::default()).unwrap();
        assert!(out.solutions.is_empty());
        assert!(out.stats.unsat.is_some());
    }

    #[test]
    fn quota_truncates() {
        let cnf = parse_dimacs("p cnf 4 0\n").unwrap();
        let cfg = SamplerConfig { batch_size: 256, max_solutions: Some(5), ..Default::default() };
        let out = sample(&cnf, ExtractorConfig::default(), &cfg).unwrap();
        assert_eq!(out.solutions.len(), 5);
        assert!(out.stats.quota_met);
        let mut buf = Vec::new();
        out.solutions.write_model_lines(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 5);
    }

    #[test]
    fn zero_timeout_keeps_first_harvest() {
        let cnf = parse_dimacs("p cnf 4 0\n").unwrap();
        let cfg = SamplerConfig { batch_size: 16, timeout_secs: Some(0.0), ..Default::default() };
        let out = sample(&cnf, ExtractorConfig::default(), &cfg).unwrap();
        assert!(out.stats.timed_out);
        assert_eq!(out.stats.iterations.len(), 1);
    }
}
