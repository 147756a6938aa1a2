//! Workload generation and Monte Carlo experiments: builds instances from
//! the configured distributions, runs paired variant comparisons over many
//! seeded runs, and aggregates served fractions and makespans per grid
//! cell. Runs are independent; with the `parallel` feature they execute on
//! a rayon pool sized by `workers` (0 = all cores, 1 = in-process
//! sequential), and results are identical either way.

use std::collections::BTreeMap;
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
#[cfg(feature = "parallel")]
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cutter::{cut_circuit, CompilerSettings, CutError, RawCircuit};
use crate::model::CutKind;
use crate::model::{Instance, ModelError, Qpu};
use crate::rational::Rational;
use crate::seed::{circuit_seed, derive_seed, fnv1a64};
use crate::solvers::{run_variant, ExhaustiveGuard, SaParams, SolveResult, SolverConfig, Variant};
use crate::timeline::{assign_deadline, reference_time};

#[derive(Debug, Error)]
pub enum BenchError {
    #[error(transparent)]
    Cut(#[from] CutError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("bad experiment config: {0}")]
    BadConfig(String),
}

/// How deadlines are drawn for generated circuits.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum DeadlineMode {
    /// `d_c ~ Uniform[lo, hi]`, discretized to tenths so coefficients stay
    /// exact rationals.
    UniformRange { lo: Rational, hi: Rational },
    Fixed { d_c: Rational },
}

/// How cut methods are assigned to generated circuits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum CutMix {
    /// Independently gate cut or LOCC wire cut with probability 1/2.
    RandomHalf,
    /// The first `gate_count` circuits are gate cut, the rest LOCC wire cut.
    FirstGate { gate_count: usize },
    AllGate,
    AllLocc,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub qpu_count: usize,
    pub qpu_qubit_range: (i64, i64),
    pub qpu_depth_range: (i64, i64),
    pub n0: i64,
    pub gate_times: (i64, i64),
    pub compiler: CompilerSettings,
    pub request_counts: Vec<usize>,
    pub deadline_mode: DeadlineMode,
    /// When true the sweep grid uses one fixed-d_c cell per entry here
    /// instead of the configured deadline_mode.
    pub sweep_deadlines: bool,
    pub d_c_sweep: Vec<Rational>,
    pub monte_carlo_runs: u32,
    pub cut_mix: CutMix,
    pub master_seed: u64,
    pub workers: usize,
    pub sa: SaParams,
    pub alpha: Option<Rational>,
    pub exhaustive: ExhaustiveGuard,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            qpu_count: 5,
            qpu_qubit_range: (10, 20),
            qpu_depth_range: (10, 20),
            n0: 10_000,
            gate_times: (1, 10),
            compiler: CompilerSettings::default(),
            request_counts: vec![2, 3, 4, 5, 6],
            deadline_mode: DeadlineMode::UniformRange {
                lo: Rational::from_int(3),
                hi: Rational::from_int(10),
            },
            sweep_deadlines: false,
            d_c_sweep: vec![
                Rational::new(13, 10),
                Rational::from_int(2),
                Rational::from_int(4),
                Rational::from_int(7),
                Rational::from_int(10),
            ],
            monte_carlo_runs: 50,
            cut_mix: CutMix::RandomHalf,
            master_seed: 42,
            workers: 0,
            sa: SaParams::default(),
            alpha: None,
            exhaustive: ExhaustiveGuard::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, BenchError> {
        let cfg: ExperimentConfig =
            serde_json::from_str(text).map_err(|e| BenchError::BadConfig(e.to_string()))?;
        cfg.check()?;
        Ok(cfg)
    }

    pub fn check(&self) -> Result<(), BenchError> {
        if self.qpu_count == 0 {
            return Err(BenchError::BadConfig("qpu_count must be >= 1".into()));
        }
        if self.request_counts.is_empty() {
            return Err(BenchError::BadConfig("request_counts must be nonempty".into()));
        }
        if self.monte_carlo_runs < 1 {
            return Err(BenchError::BadConfig("monte_carlo_runs must be >= 1".into()));
        }
        if self.sweep_deadlines && self.d_c_sweep.is_empty() {
            return Err(BenchError::BadConfig("d_c_sweep must be nonempty".into()));
        }
        if self.n0 < 1 {
            return Err(BenchError::BadConfig("n0 must be >= 1".into()));
        }
        Ok(())
    }

    pub fn solver_config(&self, seed: u64) -> SolverConfig {
        SolverConfig {
            allow_shot_split: true,
            sa: self.sa,
            seed,
            time_budget_ms: None,
            alpha: self.alpha,
            exhaustive: self.exhaustive,
        }
    }

    /// The deadline axis of the sweep grid.
    pub fn deadline_cells(&self) -> Vec<DeadlineSpec> {
        if self.sweep_deadlines {
            self.d_c_sweep.iter().map(|&d| DeadlineSpec::Fixed(d)).collect()
        } else {
            match self.deadline_mode {
                DeadlineMode::UniformRange { .. } => vec![DeadlineSpec::Mixed],
                DeadlineMode::Fixed { d_c } => vec![DeadlineSpec::Fixed(d_c)],
            }
        }
    }
}

/// One value of the deadline axis: mixed coefficients from the configured
/// range, or a fixed coefficient shared by every circuit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum DeadlineSpec {
    Mixed,
    Fixed(Rational),
}

impl fmt::Display for DeadlineSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DeadlineSpec::Mixed => f.write_str("mixed"),
            DeadlineSpec::Fixed(d) => write!(f, "{}", decimal_string(*d)),
        }
    }
}

/// Exact decimal rendering when the denominator is 2^a 5^b, else "n/d".
fn decimal_string(r: Rational) -> String {
    let mut den = r.denom();
    while den % 2 == 0 {
        den /= 2;
    }
    while den % 5 == 0 {
        den /= 5;
    }
    if den != 1 {
        return format!("{}/{}", r.numer(), r.denom());
    }
    // smallest k with denom | 10^k
    let mut k = 0u32;
    let mut m = 1i64;
    while m % r.denom() != 0 {
        m *= 10;
        k += 1;
    }
    let scaled = r.numer() * (m / r.denom());
    if k == 0 {
        return format!("{scaled}");
    }
    let sign = if scaled < 0 { "-" } else { "" };
    let mag = scaled.abs();
    format!("{sign}{}.{:0k$}", mag / m, mag % m, k = k as usize)
}

fn dc_tags(spec: &DeadlineSpec) -> [u64; 2] {
    match spec {
        DeadlineSpec::Mixed => [u64::MAX, u64::MAX],
        DeadlineSpec::Fixed(d) => [d.numer() as u64, d.denom() as u64],
    }
}

/// Generates the instance for one (request count, deadline cell, run)
/// grid point. Deterministic: the instance seed is derived from the master
/// seed and the grid coordinates, and each circuit's compiler stream comes
/// from `circuit_seed`, which the dependency-agnostic re-cut replays.
pub fn generate_instance(
    cfg: &ExperimentConfig,
    requests: usize,
    deadline: &DeadlineSpec,
    run_index: u64,
) -> Result<Instance, BenchError> {
    let tags = dc_tags(deadline);
    let inst_seed = derive_seed(cfg.master_seed, &[requests as u64, tags[0], tags[1], run_index]);
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(inst_seed, &[0xf1ee7]));

    let qpus: Vec<Qpu> = (0..cfg.qpu_count)
        .map(|id| Qpu {
            id,
            qubit_capacity: rng.gen_range(cfg.qpu_qubit_range.0..=cfg.qpu_qubit_range.1),
            max_depth: rng.gen_range(cfg.qpu_depth_range.0..=cfg.qpu_depth_range.1),
        })
        .collect();

    let kinds: Vec<CutKind> = (0..requests)
        .map(|i| match cfg.cut_mix {
            CutMix::RandomHalf => {
                if rng.gen_bool(0.5) {
                    CutKind::GateCut
                } else {
                    CutKind::LoccWireCut
                }
            }
            CutMix::FirstGate { gate_count } => {
                if i < gate_count {
                    CutKind::GateCut
                } else {
                    CutKind::LoccWireCut
                }
            }
            CutMix::AllGate => CutKind::GateCut,
            CutMix::AllLocc => CutKind::LoccWireCut,
        })
        .collect();

    let (t1, t2) = cfg.gate_times;
    let mut circuits = Vec::with_capacity(requests);
    for (i, &kind) in kinds.iter().enumerate() {
        let raw = RawCircuit {
            id: i,
            cut: kind,
            base_shots: cfg.n0,
            rng_seed: circuit_seed(inst_seed, i),
        };
        let cut = cut_circuit(&raw, &qpus, &cfg.compiler)?;
        let t_ref = reference_time(&cut.subcircuits, &cut.precedence, &qpus, t1, t2);
        let d_c = match deadline {
            DeadlineSpec::Fixed(d) => *d,
            DeadlineSpec::Mixed => match cfg.deadline_mode {
                DeadlineMode::Fixed { d_c } => d_c,
                DeadlineMode::UniformRange { lo, hi } => {
                    // Uniform in tenths keeps the coefficient an exact rational.
                    let lo10 = lo.ceil_mul_int(10).expect("small range");
                    let hi10 = (hi.numer() * 10).div_euclid(hi.denom()).max(lo10);
                    Rational::new(rng.gen_range(lo10..=hi10), 10)
                }
            },
        };
        let deadline_time = assign_deadline(t_ref, d_c);
        circuits.push(cut.into_request(deadline_time, d_c));
    }

    let inst = Instance {
        format_version: crate::model::FORMAT_VERSION,
        qpus,
        circuits,
        gate_times: cfg.gate_times,
        seed: inst_seed,
    };
    inst.validate()?;
    Ok(inst)
}

/// A stable content hash of the instance document, recorded per raw row so
/// paired-run discipline is auditable.
pub fn instance_hash(inst: &Instance) -> String {
    format!("{:016x}", fnv1a64(inst.to_json().as_bytes()))
}

/// One solver execution on one generated instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawRow {
    pub variant: Variant,
    pub requests: usize,
    pub d_c: String,
    pub run: u64,
    pub seed: u64,
    pub instance_hash: String,
    pub served: usize,
    pub served_fraction: f64,
    pub makespan: i64,
    pub objective: f64,
    pub wall_ms: u64,
    pub error: Option<String>,
}

/// Aggregates for one (variant, requests, d_c) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellStats {
    pub runs: u32,
    pub mean_served_fraction: f64,
    pub stderr_served_fraction: Option<f64>,
    pub mean_makespan: f64,
    pub stderr_makespan: Option<f64>,
}

pub type CellKey = (String, usize, String);

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SweepResult {
    pub rows: Vec<RawRow>,
    pub cells: BTreeMap<CellKey, CellStats>,
}

/// Runs every variant on the same generated instances for every grid cell.
/// Individual solver failures become rows with an error note; they never
/// abort the sweep.
pub fn run_sweep(cfg: &ExperimentConfig, variants: &[Variant]) -> Result<SweepResult, BenchError> {
    cfg.check()?;
    if variants.is_empty() {
        return Err(BenchError::BadConfig("no variants requested".into()));
    }
    let mut points: Vec<(usize, DeadlineSpec, u64)> = Vec::new();
    for &requests in &cfg.request_counts {
        for dspec in cfg.deadline_cells() {
            for run in 0..cfg.monte_carlo_runs as u64 {
                points.push((requests, dspec, run));
            }
        }
    }

    let nested = map_points(cfg.workers, &points, |&(requests, dspec, run)| {
        run_point(cfg, variants, requests, &dspec, run)
    });

    let rows: Vec<RawRow> = nested.into_iter().flatten().collect();
    let cells = aggregate(&rows);
    Ok(SweepResult { rows, cells })
}

/// Ordered map over grid points: rayon pool when the `parallel` feature is
/// on and `workers != 1`, plain sequential loop otherwise. Output order is
/// the input order in both cases.
fn map_points<T, F>(workers: usize, points: &[(usize, DeadlineSpec, u64)], f: F) -> Vec<T>
where
    T: Send,
    F: Fn(&(usize, DeadlineSpec, u64)) -> T + Sync,
{
    #[cfg(feature = "parallel")]
    {
        if workers != 1 {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(workers)
                .build();
            if let Ok(pool) = pool {
                return pool.install(|| points.par_iter().map(&f).collect());
            }
        }
    }
    #[cfg(not(feature = "parallel"))]
    let _ = workers;
    points.iter().map(f).collect()
}

fn run_point(
    cfg: &ExperimentConfig,
    variants: &[Variant],
    requests: usize,
    dspec: &DeadlineSpec,
    run: u64,
) -> Vec<RawRow> {
    let d_c = dspec.to_string();
    let base = RawRow {
        variant: Variant::Proposed,
        requests,
        d_c,
        run,
        seed: 0,
        instance_hash: String::new(),
        served: 0,
        served_fraction: 0.0,
        makespan: 0,
        objective: 0.0,
        wall_ms: 0,
        error: None,
    };
    let inst = match generate_instance(cfg, requests, dspec, run) {
        Ok(inst) => inst,
        Err(e) => {
            return variants
                .iter()
                .map(|&v| RawRow {
                    variant: v,
                    error: Some(format!("generate: {e}")),
                    ..base.clone()
                })
                .collect()
        }
    };
    let hash = instance_hash(&inst);
    variants
        .iter()
        .map(|&variant| {
            let solver_seed = derive_seed(inst.seed, &[0x50, variant_tag(variant)]);
            let scfg = cfg.solver_config(solver_seed);
            let mut row = RawRow {
                variant,
                seed: inst.seed,
                instance_hash: hash.clone(),
                ..base.clone()
            };
            match run_variant(&inst, variant, &scfg, &cfg.compiler) {
                Ok(result) => {
                    row.served = result.metrics.served_count;
                    row.served_fraction = result.metrics.served_fraction.to_f64();
                    row.makespan = result.metrics.makespan;
                    row.objective = result.metrics.objective.to_f64();
                    row.wall_ms = result.wall_time_ms;
                }
                Err(e) => row.error = Some(e.to_string()),
            }
            row
        })
        .collect()
}

fn variant_tag(v: Variant) -> u64 {
    Variant::ALL.iter().position(|&x| x == v).unwrap_or(0) as u64
}

/// Deterministic reduce: rows are grouped in (variant, requests, d_c)
/// order and averaged in run order, so the aggregate is independent of
/// how the runs were scheduled.
pub fn aggregate(rows: &[RawRow]) -> BTreeMap<CellKey, CellStats> {
    let mut groups: BTreeMap<CellKey, Vec<&RawRow>> = BTreeMap::new();
    for row in rows.iter().filter(|r| r.error.is_none()) {
        groups
            .entry((row.variant.name().to_string(), row.requests, row.d_c.clone()))
            .or_default()
            .push(row);
    }
    groups
        .into_iter()
        .map(|(key, mut members)| {
            members.sort_by_key(|r| r.run);
            let served: Vec<f64> = members.iter().map(|r| r.served_fraction).collect();
            let makespans: Vec<f64> = members.iter().map(|r| r.makespan as f64).collect();
            let stats = CellStats {
                runs: members.len() as u32,
                mean_served_fraction: mean(&served),
                stderr_served_fraction: stderr(&served),
                mean_makespan: mean(&makespans),
                stderr_makespan: stderr(&makespans),
            };
            (key, stats)
        })
        .collect()
}

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample standard error; `None` below two samples.
pub fn stderr(xs: &[f64]) -> Option<f64> {
    if xs.len() < 2 {
        return None;
    }
    let m = mean(xs);
    let var = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() - 1) as f64;
    Some((var / xs.len() as f64).sqrt())
}

impl SweepResult {
    /// `raw.csv`: one row per run x variant x cell.
    pub fn raw_csv(&self) -> String {
        let mut out = String::from(
            "variant,requests,d_c,run,seed,instance_hash,served,served_fraction,makespan,objective,wall_ms,error\n",
        );
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{:.6},{},{:.6},{},{}\n",
                r.variant.name(),
                r.requests,
                r.d_c,
                r.run,
                r.seed,
                r.instance_hash,
                r.served,
                r.served_fraction,
                r.makespan,
                r.objective,
                r.wall_ms,
                r.error.as_deref().unwrap_or(""),
            ));
        }
        out
    }

    /// `agg.csv`: one row per cell with means and standard errors.
    pub fn agg_csv(&self) -> String {
        let mut out = String::from(
            "variant,requests,d_c,runs,mean_served_fraction,stderr_served_fraction,mean_makespan,stderr_makespan\n",
        );
        for ((variant, requests, d_c), s) in &self.cells {
            out.push_str(&format!(
                "{},{},{},{},{:.6},{},{:.6},{}\n",
                variant,
                requests,
                d_c,
                s.runs,
                s.mean_served_fraction,
                s.stderr_served_fraction
                    .map(|v| format!("{v:.6}"))
                    .unwrap_or_default(),
                s.mean_makespan,
                s.stderr_makespan
                    .map(|v| format!("{v:.6}"))
                    .unwrap_or_default(),
            ));
        }
        out
    }
}

/// One row of the oracle-comparison table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table2Row {
    pub variant: Variant,
    /// Per-circuit completion time; 0 when unserved.
    pub completions: Vec<i64>,
    pub served: usize,
    pub makespan: i64,
    pub error: Option<String>,
}

/// Runs all eight methods on the single seeded instance the config
/// describes (first request count, run 0) and tabulates per-circuit
/// completion times and served counts.
pub fn table2_experiment(cfg: &ExperimentConfig) -> Result<(Instance, Vec<Table2Row>), BenchError> {
    cfg.check()?;
    let requests = cfg.request_counts[0];
    let dspec = cfg.deadline_cells()[0];
    let inst = generate_instance(cfg, requests, &dspec, 0)?;
    let rows = Variant::ALL
        .iter()
        .map(|&variant| {
            let solver_seed = derive_seed(inst.seed, &[0x50, variant_tag(variant)]);
            let scfg = cfg.solver_config(solver_seed);
            match run_variant(&inst, variant, &scfg, &cfg.compiler) {
                Ok(result) => table2_row(variant, requests, &result),
                Err(e) => Table2Row {
                    variant,
                    completions: vec![0; requests],
                    served: 0,
                    makespan: 0,
                    error: Some(e.to_string()),
                },
            }
        })
        .collect();
    Ok((inst, rows))
}

fn table2_row(variant: Variant, requests: usize, result: &SolveResult) -> Table2Row {
    let completions = (0..requests)
        .map(|i| result.report.circuit_end(i))
        .collect();
    Table2Row {
        variant,
        completions,
        served: result.metrics.served_count,
        makespan: result.metrics.makespan,
        error: None,
    }
}

/// Text rendering of the comparison table.
pub fn table2_text(rows: &[Table2Row]) -> String {
    let circuits = rows.first().map(|r| r.completions.len()).unwrap_or(0);
    let mut text = format!("{:<30}", "method");
    for i in 0..circuits {
        text.push_str(&format!("{:>10}", format!("T{}", i + 1)));
    }
    text.push_str(&format!("{:>8}\n", "served"));
    for r in rows {
        text.push_str(&format!("{:<30}", r.variant.name()));
        for &c in &r.completions {
            let shown = if c == 0 { "-".to_string() } else { c.to_string() };
            text.push_str(&format!("{shown:>10}"));
        }
        match &r.error {
            Some(e) => text.push_str(&format!("{:>8}  ({e})\n", "-")),
            None => text.push_str(&format!("{:>8}\n", r.served)),
        }
    }
    text
}

/// CSV rendering of the comparison table.
pub fn table2_csv(rows: &[Table2Row]) -> String {
    let circuits = rows.first().map(|r| r.completions.len()).unwrap_or(0);
    let mut out = String::from("method");
    for i in 0..circuits {
        out.push_str(&format!(",T{}_comp", i + 1));
    }
    out.push_str(",served,makespan,error\n");
    for r in rows {
        out.push_str(r.variant.name());
        for &c in &r.completions {
            out.push_str(&format!(",{c}"));
        }
        out.push_str(&format!(
            ",{},{},{}\n",
            r.served,
            r.makespan,
            r.error.as_deref().unwrap_or("")
        ));
    }
    out
}
