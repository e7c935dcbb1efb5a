use std::collections::HashMap;
use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{anyhow, Context};
use serde::Serialize;
use sha2::{Digest, Sha256};

use satflow_core::cnf::{parse_dimacs_with, Assignment, CnfFormula, ParseOptions};
use satflow_core::circuit::{cnf_gate_equivalents, ops_reduction, Circuit, GateCount};
use satflow_core::exec::Parallelism;
use satflow_core::extract::{extract, ExtractionResult, ExtractorConfig};
use satflow_core::sampler::{self, Precision, RestartPolicy, RunStats, SampleOutcome, SamplerConfig};

use crate::{
    BenchArgs, InputArgs, Restart, SampleArgs, SamplerArgs, TransformArgs, VerifyArgs, EXIT_PARSE, EXIT_TIMEOUT,
    EXIT_UNSAT, EXIT_USAGE, EXIT_VERIFY,
};

pub struct Failure {
    pub code: u8,
    pub error: anyhow::Error,
}

pub type CmdResult = Result<u8, Failure>;

trait WithCode<T> {
    fn code(self, code: u8) -> Result<T, Failure>;
}

impl<T, E: Into<anyhow::Error>> WithCode<T> for Result<T, E> {
    fn code(self, code: u8) -> Result<T, Failure> {
        self.map_err(|e| Failure { code, error: e.into() })
    }
}

fn read_cnf(input: &InputArgs) -> Result<(String, CnfFormula), Failure> {
    let text = fs::read_to_string(&input.cnf)
        .with_context(|| format!("reading {}", input.cnf.display()))
        .code(EXIT_PARSE)?;
    let cnf = parse_dimacs_with(&text, ParseOptions { strict_clause_count: input.strict })
        .with_context(|| format!("parsing {}", input.cnf.display()))
        .code(EXIT_PARSE)?;
    Ok((text, cnf))
}

fn create(path: &Path) -> Result<BufWriter<fs::File>, Failure> {
    fs::File::create(path)
        .map(BufWriter::new)
        .with_context(|| format!("creating {}", path.display()))
        .code(EXIT_USAGE)
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<(), Failure> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value).code(EXIT_USAGE)?;
    writeln!(w).and_then(|_| w.flush()).code(EXIT_USAGE)
}

fn output(path: Option<&PathBuf>) -> Result<Box<dyn Write>, Failure> {
    Ok(match path {
        Some(p) => Box::new(create(p)?),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

#[derive(Serialize)]
struct TransformStats {
    num_vars: u32,
    num_clauses: usize,
    pi: usize,
    po: usize,
    iv: usize,
    aux: usize,
    definitions: usize,
    cnf_gate_equivalents: GateCount,
    circuit_gate_equivalents: Option<GateCount>,
    ops_reduction: Option<f64>,
    /// Nodes are shared only where a variable is reused.
    sharing: &'static str,
    wall_time_secs: f64,
    unsat: Option<String>,
}

impl TransformStats {
    fn new(cnf: &CnfFormula, res: &ExtractionResult, circuit: Option<&Circuit>, secs: f64) -> Self {
        let cnf_ge = cnf_gate_equivalents(cnf);
        let circuit_ge = circuit.map(Circuit::gate_equivalents);
        TransformStats {
            num_vars: cnf.num_vars,
            num_clauses: cnf.num_clauses(),
            pi: res.pi.len(),
            po: res.po.len(),
            iv: res.iv.len(),
            aux: res.aux.len(),
            definitions: res.be.len(),
            cnf_gate_equivalents: cnf_ge,
            ops_reduction: circuit_ge.as_ref().and_then(|g| ops_reduction(&cnf_ge, g)),
            circuit_gate_equivalents: circuit_ge,
            sharing: "by variable",
            wall_time_secs: secs,
            unsat: res.conflict.as_ref().map(|c| format!("x{}: {}", c.var, c.detail)),
        }
    }

    fn summary(&self) -> String {
        let mut s = format!(
            "|PI|={} |PO|={} |IV|={} aux={} gates: cnf {}",
            self.pi, self.po, self.iv, self.aux, self.cnf_gate_equivalents.two_input_equivalents
        );
        if let Some(g) = &self.circuit_gate_equivalents {
            s.push_str(&format!(" circuit {}", g.two_input_equivalents));
        }
        match self.ops_reduction {
            Some(r) => s.push_str(&format!(" ratio {r:.2}")),
            None => s.push_str(" ratio n/a"),
        }
        s.push_str(&format!(" in {:.3}s", self.wall_time_secs));
        s
    }
}

pub fn transform(args: TransformArgs) -> CmdResult {
    let (_, cnf) = read_cnf(&args.input)?;
    let start = Instant::now();
    let res = extract(&cnf, ExtractorConfig::default());
    let circuit = if res.is_unsat() { None } else { Some(Circuit::build(&res).code(EXIT_USAGE)?) };
    let stats = TransformStats::new(&cnf, &res, circuit.as_ref(), start.elapsed().as_secs_f64());

    if args.dump_exprs {
        let mut out = io::stdout().lock();
        for d in &res.be {
            writeln!(out, "x{} = {}", d.var, d.expr).code(EXIT_USAGE)?;
        }
        for o in &res.po {
            writeln!(out, "target x{} = {}", o.var, u8::from(o.target)).code(EXIT_USAGE)?;
        }
    }
    if let Some(p) = &args.stats {
        write_json(p, &stats)?;
    }
    eprintln!("{}", stats.summary());
    let Some(circuit) = circuit else {
        eprintln!("unsatisfiable by construction: {}", stats.unsat.unwrap_or_default());
        return Ok(EXIT_UNSAT);
    };
    if let Some(p) = &args.out {
        let mut w = create(p)?;
        w.write_all(circuit.export_json(&res).as_bytes())
            .and_then(|_| writeln!(w))
            .and_then(|_| w.flush())
            .code(EXIT_USAGE)?;
    }
    Ok(0)
}

fn cache_path(cnf_path: &Path, text: &str) -> PathBuf {
    let mut h = Sha256::new();
    h.update(env!("CARGO_PKG_VERSION").as_bytes());
    h.update(format!("{:?}", ExtractorConfig::default()).as_bytes());
    h.update(text.as_bytes());
    let digest = h.finalize();
    let hex: String = digest[..8].iter().map(|b| format!("{b:02x}")).collect();
    let name = cnf_path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    cnf_path.with_file_name(format!("{name}.{hex}.circuit.json"))
}

fn load_circuit(path: &Path) -> Result<(Circuit, ExtractionResult), Failure> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display())).code(EXIT_PARSE)?;
    Circuit::import_json(&text).with_context(|| format!("loading {}", path.display())).code(EXIT_PARSE)
}

/// Extracts, reusing a content-addressed file next to the input when present.
fn cached_transform(args: &SampleArgs, text: &str, cnf: &CnfFormula) -> Result<(Option<Circuit>, ExtractionResult), Failure> {
    let path = cache_path(&args.input.cnf, text);
    if !args.no_cache && path.exists() {
        match load_circuit(&path) {
            Ok((c, res)) => return Ok((Some(c), res)),
            Err(e) => log::warn!("ignoring cache {}: {:#}", path.display(), e.error),
        }
    }
    let res = extract(cnf, ExtractorConfig::default());
    if res.is_unsat() {
        return Ok((None, res));
    }
    let circuit = Circuit::build(&res).code(EXIT_USAGE)?;
    if !args.no_cache {
        if let Err(e) = fs::write(&path, circuit.export_json(&res)) {
            log::warn!("could not write cache {}: {e}", path.display());
        }
    }
    Ok((Some(circuit), res))
}

fn sampler_config(s: &SamplerArgs, batch: usize, iters: usize, max: Option<usize>, timeout: Option<f64>) -> SamplerConfig {
    SamplerConfig {
        batch_size: batch,
        iterations: iters,
        learning_rate: s.lr,
        seed: s.seed,
        max_solutions: max,
        timeout_secs: timeout,
        restart_policy: match s.restart {
            Restart::None => RestartPolicy::None,
            Restart::Reinit => RestartPolicy::ReinitOnExhaust,
        },
        max_restarts: s.max_restarts,
        parallelism: if s.sequential { Parallelism::Sequential } else { Parallelism::Parallel },
        threads: s.threads,
        precision: if s.f32 { Precision::F32 } else { Precision::F64 },
        ..Default::default()
    }
}

/// Circuit and extraction for `cnf`: loaded, cached, or freshly built.
fn prepare(args: &SampleArgs, text: &str, cnf: &CnfFormula) -> Result<(Option<Circuit>, ExtractionResult), Failure> {
    let (circuit, res) = match &args.circuit {
        Some(p) => {
            let (c, res) = load_circuit(p)?;
            (Some(c), res)
        }
        None => cached_transform(args, text, cnf)?,
    };
    if res.num_vars != cnf.num_vars {
        return Err(Failure {
            code: EXIT_PARSE,
            error: anyhow!("circuit covers {} variables, the formula has {}", res.num_vars, cnf.num_vars),
        });
    }
    Ok((if res.is_unsat() { None } else { circuit }, res))
}

fn stats_summary(s: &RunStats) -> String {
    format!(
        "{} unique solutions from {} rows in {:.3}s ({:.1}/s), {} restarts",
        s.unique_count, s.attempts, s.wall_time_secs, s.throughput, s.restarts
    )
}

fn run_sampler(cnf: &CnfFormula, circuit: &Circuit, res: &ExtractionResult, cfg: &SamplerConfig) -> Result<SampleOutcome, Failure> {
    let cls = res.classify_paths();
    sampler::run(cnf, circuit, res, &cls, cfg).map_err(|e| {
        let code = if matches!(e, sampler::SampleError::InvalidConfig(_)) { EXIT_USAGE } else { EXIT_PARSE };
        Failure { code, error: e.into() }
    })
}

pub fn sample(args: SampleArgs) -> CmdResult {
    let (text, cnf) = read_cnf(&args.input)?;
    let cfg = sampler_config(&args.sampler, args.batch, args.iters, args.max_solutions, args.timeout);
    cfg.validate().code(EXIT_USAGE)?;
    let (circuit, res) = prepare(&args, &text, &cnf)?;
    let Some(circuit) = circuit else {
        let detail = res.conflict.as_ref().map(|c| format!("x{}: {}", c.var, c.detail)).unwrap_or_default();
        eprintln!("unsatisfiable by construction: {detail}");
        if let Some(p) = &args.stats_json {
            write_json(p, &RunStats { unsat: Some(detail), ..Default::default() })?;
        }
        output(args.out.as_ref())?.flush().code(EXIT_USAGE)?;
        return Ok(EXIT_UNSAT);
    };
    let out = run_sampler(&cnf, &circuit, &res, &cfg)?;
    let mut w = output(args.out.as_ref())?;
    out.solutions.write_model_lines(&mut w).and_then(|_| w.flush()).code(EXIT_USAGE)?;
    if let Some(p) = &args.stats_json {
        write_json(p, &out.stats)?;
    }
    eprintln!("{}", stats_summary(&out.stats));
    if out.stats.timed_out && !out.stats.quota_met {
        eprintln!("timed out with {} solutions", out.stats.unique_count);
        return Ok(EXIT_TIMEOUT);
    }
    if let Some(q) = args.max_solutions.filter(|_| !out.stats.quota_met) {
        eprintln!("quota of {q} not reached");
    }
    Ok(0)
}

pub fn verify(args: VerifyArgs) -> CmdResult {
    let (_, cnf) = read_cnf(&args.input)?;
    let text = fs::read_to_string(&args.solutions)
        .with_context(|| format!("reading {}", args.solutions.display()))
        .code(EXIT_PARSE)?;
    let mut seen: HashMap<Assignment, usize> = HashMap::new();
    for (i, line) in text.lines().enumerate() {
        let n = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let a = match Assignment::from_model_line(line, cnf.num_vars) {
            Ok(a) => a,
            Err(e) => {
                println!("line {n}: {e}: {line}");
                return Ok(EXIT_VERIFY);
            }
        };
        if let Some(ci) = cnf.first_violated(&a).code(EXIT_VERIFY)? {
            println!("line {n}: violates clause {}: {line}", ci + 1);
            return Ok(EXIT_VERIFY);
        }
        if let Some(first) = seen.insert(a, n) {
            println!("line {n}: duplicates line {first}: {line}");
            return Ok(EXIT_VERIFY);
        }
    }
    eprintln!("{} solutions verified", seen.len());
    Ok(0)
}

pub fn bench(args: BenchArgs) -> CmdResult {
    let (_, cnf) = read_cnf(&args.input)?;
    let res = extract(&cnf, ExtractorConfig::default());
    if let Some(c) = &res.conflict {
        eprintln!("unsatisfiable by construction: x{}: {}", c.var, c.detail);
        return Ok(EXIT_UNSAT);
    }
    let circuit = Circuit::build(&res).code(EXIT_USAGE)?;
    let mut csv = output(args.out.as_ref())?;
    let mut curve = args.curve.as_deref().map(create).transpose()?;
    writeln!(csv, "quota,batch,iters,unique,seconds,throughput").code(EXIT_USAGE)?;
    if let Some(w) = curve.as_mut() {
        writeln!(w, "batch,iters,restart,iteration,loss,new_unique,cumulative_unique").code(EXIT_USAGE)?;
    }
    for &batch in &args.batch {
        for &iters in &args.iters {
            let cfg = sampler_config(&args.sampler, batch, iters, Some(args.quota), Some(args.timeout));
            cfg.validate().code(EXIT_USAGE)?;
            let out = run_sampler(&cnf, &circuit, &res, &cfg)?;
            let s = &out.stats;
            writeln!(csv, "{},{batch},{iters},{},{:.6},{:.3}", args.quota, s.unique_count, s.wall_time_secs, s.throughput)
                .code(EXIT_USAGE)?;
            if let Some(w) = curve.as_mut() {
                for r in &s.iterations {
                    writeln!(w, "{batch},{iters},{},{},{},{},{}", r.restart, r.iteration, r.loss, r.new_unique, r.cumulative_unique)
                        .code(EXIT_USAGE)?;
                }
            }
            eprintln!("batch {batch} iters {iters}: {}", stats_summary(s));
        }
    }
    csv.flush().code(EXIT_USAGE)?;
    if let Some(mut w) = curve {
        w.flush().code(EXIT_USAGE)?;
    }
    Ok(0)
}
