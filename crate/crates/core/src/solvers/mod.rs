//! Scheduling algorithms behind one interface: the simulated-annealing
//! solver, the exhaustive oracle, and the greedy/list/random baselines,
//! plus the agnostic-mode variants used in the experiments.

mod baselines;
mod exhaustive;
mod placement;
mod sa;

use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cutter::{cut_circuit, CompilerSettings, CutError, RawCircuit};
use crate::feasibility::{default_alpha, score_unchecked, validate, Metrics};
use crate::model::{CutKind, Instance, Schedule};
use crate::rational::Rational;
use crate::timeline::{completion_times, CompletionReport};

pub use exhaustive::ExhaustiveGuard;

/// The eight CLI-facing scheduling methods.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    Proposed,
    ShotAgnostic,
    DependencyAgnostic,
    DependencyAndShotAgnostic,
    Greedy,
    List,
    Random,
    Exhaustive,
}

impl Variant {
    pub const ALL: [Variant; 8] = [
        Variant::Exhaustive,
        Variant::Proposed,
        Variant::Greedy,
        Variant::List,
        Variant::Random,
        Variant::ShotAgnostic,
        Variant::DependencyAgnostic,
        Variant::DependencyAndShotAgnostic,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Variant::Proposed => "proposed",
            Variant::ShotAgnostic => "shot-agnostic",
            Variant::DependencyAgnostic => "dependency-agnostic",
            Variant::DependencyAndShotAgnostic => "dependency-and-shot-agnostic",
            Variant::Greedy => "greedy",
            Variant::List => "list",
            Variant::Random => "random",
            Variant::Exhaustive => "exhaustive",
        }
    }

    pub fn from_name(name: &str) -> Option<Variant> {
        Variant::ALL.iter().copied().find(|v| v.name() == name)
    }

    /// Variants that re-cut LOCC wire circuits with the legacy wire cut.
    pub fn uses_legacy_recut(&self) -> bool {
        matches!(
            self,
            Variant::DependencyAgnostic | Variant::DependencyAndShotAgnostic
        )
    }
}

/// Annealing schedule parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SaParams {
    pub tau0: f64,
    pub tau_min: f64,
    pub cooling: f64,
    pub iters_per_temp: u32,
}

impl Default for SaParams {
    fn default() -> Self {
        SaParams { tau0: 10.0, tau_min: 0.01, cooling: 0.95, iters_per_temp: 200 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    /// When false the solver runs shot-agnostic: a subcircuit's shots stay
    /// together as one job.
    pub allow_shot_split: bool,
    pub sa: SaParams,
    pub seed: u64,
    /// Wall-clock cutoff for the annealer. Runs that set this trade the
    /// byte-determinism guarantee for bounded latency.
    pub time_budget_ms: Option<u64>,
    /// Objective weight for the earliness bonus; `None` means `1/(U+1)`.
    pub alpha: Option<Rational>,
    pub exhaustive: ExhaustiveGuard,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            allow_shot_split: true,
            sa: SaParams::default(),
            seed: 0,
            time_budget_ms: None,
            alpha: None,
            exhaustive: ExhaustiveGuard::default(),
        }
    }
}

impl SolverConfig {
    pub fn with_seed(seed: u64) -> Self {
        SolverConfig { seed, ..Default::default() }
    }

    pub fn effective_alpha(&self, inst: &Instance) -> Rational {
        self.alpha.unwrap_or_else(|| default_alpha(inst.circuit_count()))
    }

    fn check(&self) -> Result<(), SolveError> {
        if !(self.sa.tau_min > 0.0) {
            return Err(SolveError::BadConfig("tau_min must be > 0".into()));
        }
        if !(self.sa.cooling > 0.0 && self.sa.cooling < 1.0) {
            return Err(SolveError::BadConfig("cooling must be in (0, 1)".into()));
        }
        if self.sa.iters_per_temp < 1 {
            return Err(SolveError::BadConfig("iters_per_temp must be >= 1".into()));
        }
        if self.sa.tau0 < self.sa.tau_min {
            return Err(SolveError::BadConfig("tau0 must be >= tau_min".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum SolveError {
    #[error("invalid solver config: {0}")]
    BadConfig(String),
    #[error("exhaustive guard exceeded: {0}")]
    Guard(String),
    #[error("initial schedule is infeasible: {0}")]
    BadInitial(String),
    #[error(transparent)]
    Cut(#[from] CutError),
}

/// The outcome of one solver run. `instance` is populated when the variant
/// re-cut the workload (dependency-agnostic modes), since the schedule
/// then refers to the regenerated instance rather than the input.
#[derive(Debug, Clone)]
pub struct SolveResult {
    pub schedule: Schedule,
    pub metrics: Metrics,
    pub report: CompletionReport,
    pub trace: Option<Vec<(f64, f64)>>,
    pub wall_time_ms: u64,
    pub instance: Option<Instance>,
}

/// Packages a feasible schedule into a result; panics in debug builds if
/// a solver hands over an infeasible one (every solver must be gated by
/// `feasibility::validate`).
fn finish(
    inst: &Instance,
    mut schedule: Schedule,
    alpha: Rational,
    trace: Option<Vec<(f64, f64)>>,
    started: Instant,
) -> SolveResult {
    schedule.normalize();
    debug_assert!(validate(inst, &schedule).is_empty());
    let report = completion_times(inst, &schedule).expect("solver schedules reference real ids");
    let metrics = score_unchecked(inst, &schedule, alpha, &report);
    SolveResult {
        schedule,
        metrics,
        report,
        trace,
        wall_time_ms: started.elapsed().as_millis() as u64,
        instance: None,
    }
}

pub fn sa_solve(inst: &Instance, cfg: &SolverConfig) -> Result<SolveResult, SolveError> {
    cfg.check()?;
    sa::anneal(inst, cfg, None)
}

/// Annealing from a caller-supplied feasible starting point.
pub fn sa_solve_from(
    inst: &Instance,
    cfg: &SolverConfig,
    initial: &Schedule,
) -> Result<SolveResult, SolveError> {
    cfg.check()?;
    sa::anneal(inst, cfg, Some(initial.clone()))
}

pub fn greedy_solve(inst: &Instance, cfg: &SolverConfig) -> Result<SolveResult, SolveError> {
    cfg.check()?;
    Ok(baselines::greedy(inst, cfg))
}

pub fn list_solve(inst: &Instance, cfg: &SolverConfig) -> Result<SolveResult, SolveError> {
    cfg.check()?;
    Ok(baselines::list(inst, cfg))
}

pub fn random_solve(inst: &Instance, cfg: &SolverConfig) -> Result<SolveResult, SolveError> {
    cfg.check()?;
    Ok(baselines::random(inst, cfg))
}

pub fn exhaustive_solve(inst: &Instance, cfg: &SolverConfig) -> Result<SolveResult, SolveError> {
    cfg.check()?;
    exhaustive::solve(inst, cfg)
}

/// Re-cuts every LOCC wire-cut circuit with the legacy wire cut, keeping
/// the fleet, the base shot counts, the per-circuit compiler seeds, and
/// each circuit's original deadline (deadlines are user-specified
/// properties of the request, not of the cut).
pub fn regenerate_with_legacy_cut(
    inst: &Instance,
    compiler: &CompilerSettings,
) -> Result<Instance, SolveError> {
    let mut circuits = Vec::with_capacity(inst.circuit_count());
    for c in &inst.circuits {
        let kind = match c.cut.kind {
            CutKind::LoccWireCut => CutKind::LegacyWireCut,
            other => other,
        };
        let raw = RawCircuit {
            id: c.id,
            cut: kind,
            base_shots: c.base_shots,
            rng_seed: crate::seed::circuit_seed(inst.seed, c.id),
        };
        let cut = cut_circuit(&raw, &inst.qpus, compiler)?;
        circuits.push(cut.into_request(c.deadline, c.deadline_coeff));
    }
    let regen = Instance {
        format_version: inst.format_version,
        qpus: inst.qpus.clone(),
        circuits,
        gate_times: inst.gate_times,
        seed: inst.seed,
    };
    regen
        .validate()
        .expect("regenerated instance satisfies model invariants");
    Ok(regen)
}

/// Runs one experiment variant. Dependency-agnostic variants first re-cut
/// the instance via the compiler, then solve the regenerated instance;
/// the result carries that instance along.
pub fn run_variant(
    inst: &Instance,
    variant: Variant,
    cfg: &SolverConfig,
    compiler: &CompilerSettings,
) -> Result<SolveResult, SolveError> {
    let split = |allow: bool| SolverConfig { allow_shot_split: allow, ..cfg.clone() };
    match variant {
        Variant::Proposed => sa_solve(inst, &split(true)),
        Variant::ShotAgnostic => sa_solve(inst, &split(false)),
        Variant::DependencyAgnostic => {
            let regen = regenerate_with_legacy_cut(inst, compiler)?;
            let mut result = sa_solve(&regen, &split(true))?;
            result.instance = Some(regen);
            Ok(result)
        }
        Variant::DependencyAndShotAgnostic => {
            let regen = regenerate_with_legacy_cut(inst, compiler)?;
            let mut result = sa_solve(&regen, &split(false))?;
            result.instance = Some(regen);
            Ok(result)
        }
        Variant::Greedy => greedy_solve(inst, cfg),
        Variant::List => list_solve(inst, cfg),
        Variant::Random => random_solve(inst, cfg),
        Variant::Exhaustive => exhaustive_solve(inst, cfg),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::feasibility::validate;
    use crate::model::CutKind;
    use crate::testutil::{circuit, instance, uniform_fleet};

    fn fast_sa(seed: u64) -> SolverConfig {
        SolverConfig {
            sa: SaParams { tau0: 5.0, tau_min: 0.05, cooling: 0.8, iters_per_temp: 40 },
            seed,
            ..Default::default()
        }
    }

    // 1 circuit, 1 subcircuit (N=10, T=32), 1 QPU.
    fn single_job(deadline: i64) -> crate::model::Instance {
        instance(
            uniform_fleet(1, 10, 10),
            vec![circuit(0, &[(5, 2, 3, 10)], &[], deadline)],
        )
    }

    #[test]
    fn sa_serves_single_feasible_job() {
        let inst = single_job(500);
        let result = sa_solve(&inst, &fast_sa(7)).unwrap();
        assert_eq!(result.metrics.served_count, 1);
        assert_eq!(result.schedule.fragments.iter().map(|f| f.shots).sum::<i64>(), 10);
        assert!(result.report.circuit_end(0) <= 500);
        assert!(validate(&inst, &result.schedule).is_empty());
    }

    #[test]
    fn sa_drops_impossible_deadline() {
        // Minimal completion is 320 even fully split on the single QPU.
        let inst = single_job(100);
        let result = sa_solve(&inst, &fast_sa(7)).unwrap();
        assert_eq!(result.metrics.served_count, 0);
        assert!(result.schedule.fragments.is_empty());
    }

    #[test]
    fn sa_deterministic_per_seed() {
        let inst = instance(
            uniform_fleet(3, 20, 20),
            vec![
                circuit(0, &[(5, 2, 3, 8), (7, 3, 4, 6), (9, 2, 5, 6)], &[(0, 2)], 2_000),
                circuit(1, &[(12, 4, 4, 9), (6, 1, 6, 5)], &[], 2_500),
            ],
        );
        let a = sa_solve(&inst, &fast_sa(11)).unwrap();
        let b = sa_solve(&inst, &fast_sa(11)).unwrap();
        assert_eq!(a.schedule, b.schedule);
        assert_eq!(a.trace, b.trace);
        let c = sa_solve(&inst, &fast_sa(12)).unwrap();
        let _ = c; // different seed may differ; only determinism is asserted
    }

    #[test]
    fn sa_trace_is_nondecreasing() {
        let inst = instance(
            uniform_fleet(2, 20, 20),
            vec![
                circuit(0, &[(5, 2, 3, 10), (7, 3, 4, 8)], &[(0, 1)], 1_500),
                circuit(1, &[(12, 4, 4, 9)], &[], 1_000),
            ],
        );
        let result = sa_solve(&inst, &fast_sa(3)).unwrap();
        let trace = result.trace.unwrap();
        assert!(!trace.is_empty());
        assert!(trace.windows(2).all(|w| w[1].1 >= w[0].1));
        // temperatures strictly cool
        assert!(trace.windows(2).all(|w| w[1].0 < w[0].0));
    }

    // The analytic split-advantage construction: 1 circuit, 1 subcircuit,
    // 2 identical QPUs, deadline strictly between ceil(N/2)*T and N*T.
    fn split_advantage_instance() -> crate::model::Instance {
        instance(
            uniform_fleet(2, 10, 10),
            vec![circuit(0, &[(5, 2, 3, 10)], &[], 200)],
        )
    }

    #[test]
    fn splitting_serves_where_shot_agnostic_cannot() {
        let inst = split_advantage_instance();
        let compiler = CompilerSettings::default();
        let proposed = run_variant(&inst, Variant::Proposed, &fast_sa(5), &compiler).unwrap();
        let agnostic = run_variant(&inst, Variant::ShotAgnostic, &fast_sa(5), &compiler).unwrap();
        assert_eq!(proposed.metrics.served_count, 1, "split 5+5 finishes at 160 <= 200");
        assert_eq!(agnostic.metrics.served_count, 0, "whole job needs 320 > 200");
    }

    #[test]
    fn split_capable_sa_dominates_from_agnostic_start() {
        let inst = split_advantage_instance();
        let agnostic = sa_solve(&inst, &SolverConfig { allow_shot_split: false, ..fast_sa(5) })
            .unwrap();
        let seeded = sa_solve_from(&inst, &fast_sa(5), &agnostic.schedule).unwrap();
        assert!(seeded.metrics.objective >= agnostic.metrics.objective);
    }

    #[test]
    fn greedy_places_tighter_deadline_first() {
        let inst = instance(
            uniform_fleet(1, 20, 20),
            vec![
                circuit(0, &[(5, 2, 3, 2)], &[], 100), // 64 time units of work
                circuit(1, &[(5, 2, 3, 1)], &[], 50),  // 32 time units
            ],
        );
        let result = greedy_solve(&inst, &SolverConfig::default()).unwrap();
        // The tau=50 circuit must own the [0, ...) slot; placing circuit 0
        // first would push it past its deadline.
        let first = result
            .schedule
            .fragments
            .iter()
            .min_by_key(|f| f.start)
            .unwrap();
        assert_eq!(first.circuit, 1);
        assert!(result.schedule.is_served(1));
    }

    #[test]
    fn list_respects_chains() {
        let inst = instance(
            uniform_fleet(2, 20, 20),
            vec![circuit(0, &[(5, 2, 3, 4), (5, 2, 3, 4)], &[(0, 1)], 10_000)],
        );
        let result = list_solve(&inst, &SolverConfig::default()).unwrap();
        let end0 = result.report.per_subcircuit_end[&(0, 0)];
        let starts1: Vec<i64> = result
            .schedule
            .fragments_of(0, 1)
            .map(|f| f.start)
            .collect();
        assert!(!starts1.is_empty());
        assert!(starts1.iter().all(|&s| s >= end0));
    }

    #[test]
    fn random_deterministic_and_single_qpu_degenerates() {
        let inst = single_job(10_000);
        let cfg = SolverConfig::with_seed(9);
        let a = random_solve(&inst, &cfg).unwrap();
        let b = random_solve(&inst, &cfg).unwrap();
        assert_eq!(a.schedule, b.schedule);
        // one QPU: splitting degenerates to a single fragment
        assert_eq!(a.schedule.fragments.len(), 1);
    }

    #[test]
    fn exhaustive_symmetric_pair_runs_in_parallel() {
        // 1 circuit, 2 identical subcircuits, 2 identical QPUs, generous
        // deadline: served with makespan T*N = 32*4.
        let inst = instance(
            uniform_fleet(2, 10, 10),
            vec![circuit(0, &[(5, 2, 3, 4), (5, 2, 3, 4)], &[], 10_000)],
        );
        let result = exhaustive_solve(&inst, &SolverConfig::default()).unwrap();
        assert_eq!(result.metrics.served_count, 1);
        assert_eq!(result.metrics.makespan, 128);
    }

    #[test]
    fn exhaustive_refuses_oversized_instances() {
        let subs: Vec<crate::testutil::SubSpec> = vec![(5, 2, 3, 4); 19];
        let inst = instance(uniform_fleet(2, 10, 10), vec![circuit(0, &subs, &[], 10_000)]);
        assert!(matches!(
            exhaustive_solve(&inst, &SolverConfig::default()),
            Err(SolveError::Guard(_))
        ));
    }

    #[test]
    fn exhaustive_serves_nothing_when_deadlines_beat_lower_bounds() {
        // T_ref for the single subcircuit on 2 QPUs is 160; deadline 100
        // is below any achievable completion.
        let inst = instance(
            uniform_fleet(2, 10, 10),
            vec![circuit(0, &[(5, 2, 3, 10)], &[], 100)],
        );
        let result = exhaustive_solve(&inst, &SolverConfig::default()).unwrap();
        assert_eq!(result.metrics.served_count, 0);
    }

    #[test]
    fn exhaustive_dominates_heuristics_on_small_instances() {
        for seed in 0..8u64 {
            let inst = instance(
                uniform_fleet(2, 14, 14),
                vec![
                    circuit(
                        0,
                        &[(5, 2, 3, 6), (7, 3, 4, 5), (9, 2, 5, 4)],
                        &[(0, 2)],
                        1_100 + 37 * seed as i64,
                    ),
                    circuit(1, &[(12, 4, 4, 6), (6, 1, 6, 4)], &[], 900 + 53 * seed as i64),
                ],
            );
            let cfg = fast_sa(seed);
            let oracle = exhaustive_solve(&inst, &cfg).unwrap();
            for variant in [Variant::Proposed, Variant::ShotAgnostic, Variant::Greedy, Variant::List, Variant::Random] {
                let result =
                    run_variant(&inst, variant, &cfg, &CompilerSettings::default()).unwrap();
                assert!(
                    oracle.metrics.objective >= result.metrics.objective,
                    "seed {seed}: {} beat the oracle ({} > {})",
                    variant.name(),
                    result.metrics.objective,
                    oracle.metrics.objective,
                );
            }
        }
    }

    #[test]
    fn legacy_recut_produces_independent_subcircuits() {
        let fleet = uniform_fleet(5, 20, 20);
        let raw = crate::cutter::RawCircuit {
            id: 0,
            cut: CutKind::LoccWireCut,
            base_shots: 10,
            rng_seed: crate::seed::circuit_seed(7, 0),
        };
        let compiler = CompilerSettings::default();
        let cut = crate::cutter::cut_circuit(&raw, &fleet, &compiler).unwrap();
        let t_ref = crate::timeline::reference_time(&cut.subcircuits, &cut.precedence, &fleet, 1, 10);
        let deadline = crate::timeline::assign_deadline(t_ref, Rational::from_int(3));
        let inst = instance(fleet, vec![cut.into_request(deadline, Rational::from_int(3))]);

        let regen = regenerate_with_legacy_cut(&inst, &compiler).unwrap();
        assert_eq!(regen.circuit_count(), 1);
        let c = &regen.circuits[0];
        assert_eq!(c.cut.kind, CutKind::LegacyWireCut);
        assert_eq!(c.subcircuits.len(), 16);
        assert!(c.precedence.is_empty());
        assert_eq!(c.base_shots, 10);
        assert_eq!(c.subcircuits.iter().map(|s| s.shots).sum::<i64>(), 160);
        // deterministic regeneration
        let regen2 = regenerate_with_legacy_cut(&inst, &compiler).unwrap();
        assert_eq!(regen, regen2);
    }

    #[test]
    fn reference_time_lower_bounds_single_circuit_completions() {
        // Randomized counterexample search: any feasible schedule of a
        // circuit alone on the full fleet finishes no earlier than its
        // reference bound.
        let fleet = crate::testutil::uniform_fleet(3, 20, 20);
        let settings = CompilerSettings::default();
        for seed in 0..12u64 {
            let raw = crate::cutter::RawCircuit {
                id: 0,
                cut: if seed % 2 == 0 { CutKind::LoccWireCut } else { CutKind::GateCut },
                base_shots: 8,
                rng_seed: seed,
            };
            let cut = crate::cutter::cut_circuit(&raw, &fleet, &settings).unwrap();
            let t_ref = crate::timeline::reference_time(
                &cut.subcircuits,
                &cut.precedence,
                &fleet,
                1,
                10,
            );
            let request = cut.into_request(i64::MAX / 4, Rational::from_int(3));
            let inst = crate::testutil::instance(fleet.clone(), vec![request]);
            for solver_seed in 0..4u64 {
                let result =
                    random_solve(&inst, &SolverConfig::with_seed(solver_seed)).unwrap();
                assert_eq!(result.metrics.served_count, 1);
                assert!(
                    result.report.circuit_end(0) >= t_ref,
                    "seed {seed}/{solver_seed}: completion {} below reference {t_ref}",
                    result.report.circuit_end(0)
                );
            }
        }
    }

    #[test]
    fn every_solver_output_validates() {
        let compiler = CompilerSettings::default();
        for seed in 0..6u64 {
            let inst = instance(
                uniform_fleet(3, 16, 16),
                vec![
                    circuit(0, &[(5, 2, 3, 7), (7, 3, 4, 5)], &[(0, 1)], 800 + 91 * seed as i64),
                    circuit(1, &[(12, 4, 4, 6)], &[], 700 + 47 * seed as i64),
                    circuit(2, &[(6, 1, 6, 5), (8, 2, 4, 4)], &[], 600 + 63 * seed as i64),
                ],
            );
            for variant in Variant::ALL {
                if variant == Variant::Exhaustive {
                    continue; // 5 subcircuits: fine, but keep this test fast
                }
                let result = run_variant(&inst, variant, &fast_sa(seed), &compiler).unwrap();
                let target = result.instance.as_ref().unwrap_or(&inst);
                let violations = validate(target, &result.schedule);
                assert!(violations.is_empty(), "{}: {violations:?}", variant.name());
            }
        }
    }
}
