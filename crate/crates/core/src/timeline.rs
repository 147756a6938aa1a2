//! Time arithmetic: per-shot runtimes, fragment/subcircuit/circuit
//! completion times, the idealized reference bound used for deadlines,
//! and deadline assignment itself.
//!
//! All times are integers. Classical communication between measure and
//! prepare fragments, compile time, and post-processing are all modeled
//! as zero cost.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{eligibility_set, Instance, PrecedenceDag, Qpu, Schedule, Subcircuit};
use crate::rational::Rational;

#[derive(Debug, Error)]
pub enum TimelineError {
    #[error("fragment references unknown subcircuit ({circuit}, {sub})")]
    DanglingFragment { circuit: usize, sub: usize },
}

/// Completion times of a schedule at every granularity. Entries for
/// unserved circuits are zero.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct CompletionReport {
    pub per_fragment_end: BTreeMap<(usize, usize, usize), i64>,
    pub per_subcircuit_end: BTreeMap<(usize, usize), i64>,
    pub per_circuit_end: BTreeMap<usize, i64>,
    pub makespan: i64,
}

impl CompletionReport {
    pub fn circuit_end(&self, circuit: usize) -> i64 {
        self.per_circuit_end.get(&circuit).copied().unwrap_or(0)
    }
}

// Tuple-keyed maps have no JSON object form, so the report crosses the
// wire as sorted entry lists.
#[derive(Serialize, Deserialize)]
struct ReportWire {
    fragment_ends: Vec<(usize, usize, usize, i64)>,
    subcircuit_ends: Vec<(usize, usize, i64)>,
    circuit_ends: Vec<(usize, i64)>,
    makespan: i64,
}

impl Serialize for CompletionReport {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        ReportWire {
            fragment_ends: self
                .per_fragment_end
                .iter()
                .map(|(&(i, j, m), &e)| (i, j, m, e))
                .collect(),
            subcircuit_ends: self
                .per_subcircuit_end
                .iter()
                .map(|(&(i, j), &e)| (i, j, e))
                .collect(),
            circuit_ends: self.per_circuit_end.iter().map(|(&i, &e)| (i, e)).collect(),
            makespan: self.makespan,
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for CompletionReport {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let wire = ReportWire::deserialize(deserializer)?;
        Ok(CompletionReport {
            per_fragment_end: wire
                .fragment_ends
                .into_iter()
                .map(|(i, j, m, e)| ((i, j, m), e))
                .collect(),
            per_subcircuit_end: wire
                .subcircuit_ends
                .into_iter()
                .map(|(i, j, e)| ((i, j), e))
                .collect(),
            per_circuit_end: wire.circuit_ends.into_iter().collect(),
            makespan: wire.makespan,
        })
    }
}

/// The schedule file: a `Schedule` plus its completion report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScheduleDocument {
    #[serde(default = "crate::model::default_format_version_pub")]
    pub format_version: u32,
    #[serde(flatten)]
    pub schedule: Schedule,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub report: Option<CompletionReport>,
}

impl ScheduleDocument {
    pub fn new(schedule: Schedule, report: Option<CompletionReport>) -> Self {
        ScheduleDocument {
            format_version: crate::model::FORMAT_VERSION,
            schedule,
            report,
        }
    }

    pub fn from_json(text: &str) -> Result<Self, crate::model::ModelError> {
        serde_json::from_str(text).map_err(|e| crate::model::ModelError::Parse(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("schedule serializes");
        s.push('\n');
        s
    }
}

/// Runtime of one shot: single-qubit layers at `t1` plus two-qubit
/// layers at `t2`.
pub fn per_shot_runtime(s: &Subcircuit, t1: i64, t2: i64) -> i64 {
    s.single_qubit_layers * t1 + s.two_qubit_layers * t2
}

/// End time of a fragment; unserved circuits contribute nothing.
pub fn fragment_end(start: i64, shots: i64, t_per_shot: i64, served: bool) -> i64 {
    if served {
        start + t_per_shot * shots
    } else {
        0
    }
}

/// Rolls a schedule up into per-fragment, per-subcircuit, and per-circuit
/// end times. The makespan is the latest served circuit completion.
pub fn completion_times(
    inst: &Instance,
    sched: &Schedule,
) -> Result<CompletionReport, TimelineError> {
    let mut report = CompletionReport::default();
    for c in &inst.circuits {
        report.per_circuit_end.insert(c.id, 0);
        for s in &c.subcircuits {
            report.per_subcircuit_end.insert((c.id, s.sub), 0);
        }
    }
    for f in &sched.fragments {
        let sub = inst
            .subcircuit(f.circuit, f.sub)
            .ok_or(TimelineError::DanglingFragment { circuit: f.circuit, sub: f.sub })?;
        let served = sched.is_served(f.circuit);
        let t = per_shot_runtime(sub, inst.t1(), inst.t2());
        let end = fragment_end(f.start, f.shots, t, served);
        let cell = report
            .per_fragment_end
            .entry((f.circuit, f.sub, f.qpu))
            .or_insert(0);
        *cell = (*cell).max(end);
        let scell = report.per_subcircuit_end.entry((f.circuit, f.sub)).or_insert(0);
        *scell = (*scell).max(end);
        let ccell = report.per_circuit_end.entry(f.circuit).or_insert(0);
        *ccell = (*ccell).max(end);
    }
    report.makespan = inst
        .circuits
        .iter()
        .filter(|c| sched.is_served(c.id))
        .map(|c| report.circuit_end(c.id))
        .max()
        .unwrap_or(0);
    Ok(report)
}

/// Longest path through `precedence` where each node's weight is the
/// idealized runtime of that subcircuit with its shots split as evenly as
/// possible over its whole eligibility set.
pub fn reference_time(
    subcircuits: &[Subcircuit],
    precedence: &PrecedenceDag,
    qpus: &[Qpu],
    t1: i64,
    t2: i64,
) -> i64 {
    let weights: Vec<i64> = subcircuits
        .iter()
        .map(|s| {
            let fleet = eligibility_set(s, qpus).len() as i64;
            let per_qpu_shots = if fleet == 0 {
                s.shots
            } else {
                (s.shots + fleet - 1) / fleet
            };
            per_shot_runtime(s, t1, t2) * per_qpu_shots
        })
        .collect();
    longest_path(&weights, precedence)
}

/// Longest node-weighted path in a DAG; independent nodes contribute their
/// max, chained nodes sum along the chain.
pub fn longest_path(weights: &[i64], dag: &PrecedenceDag) -> i64 {
    let n = weights.len();
    let order = dag.topo_order(n).expect("precedence graph is a DAG");
    let mut dist = vec![0i64; n];
    for &v in &order {
        let best_pred = dag.predecessors(v).map(|u| dist[u]).max().unwrap_or(0);
        dist[v] = best_pred + weights[v];
    }
    dist.into_iter().max().unwrap_or(0)
}

/// Deadline from the urgency coefficient: `ceil(d_c * t_ref)`, and never
/// below 1 so degenerate zero-work circuits stay schedulable.
pub fn assign_deadline(t_ref: i64, d_c: Rational) -> i64 {
    d_c.ceil_mul_int(t_ref)
        .expect("deadline product overflow")
        .max(1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{
        CircuitRequest, CutKind, CutMethod, Fragment, Instance, PrecedenceDag, Qpu, Schedule,
        Subcircuit, FORMAT_VERSION,
    };

    fn sub(kappa1: i64, kappa2: i64, shots: i64) -> Subcircuit {
        Subcircuit {
            circuit: 0,
            sub: 0,
            qubits: 5,
            depth: kappa1 + kappa2,
            single_qubit_layers: kappa1,
            two_qubit_layers: kappa2,
            shots,
        }
    }

    #[test]
    fn per_shot_runtime_examples() {
        assert_eq!(per_shot_runtime(&sub(2, 3, 1), 1, 10), 32);
        assert_eq!(per_shot_runtime(&sub(0, 0, 1), 1, 10), 0);
        assert_eq!(per_shot_runtime(&sub(10, 10, 1), 1, 10), 110);
    }

    #[test]
    fn fragment_end_examples() {
        assert_eq!(fragment_end(0, 10, 32, true), 320);
        assert_eq!(fragment_end(123, 45, 67, false), 0);
        assert_eq!(fragment_end(100, 0, 32, true), 100);
    }

    fn two_fragment_instance() -> (Instance, Schedule) {
        let s0 = sub(2, 3, 10); // runtime 32 per shot
        let s1 = Subcircuit { sub: 1, ..sub(2, 3, 5) };
        let inst = Instance {
            format_version: FORMAT_VERSION,
            qpus: vec![
                Qpu { id: 0, qubit_capacity: 10, max_depth: 10 },
                Qpu { id: 1, qubit_capacity: 10, max_depth: 10 },
            ],
            circuits: vec![CircuitRequest {
                id: 0,
                cut: CutMethod {
                    kind: CutKind::GateCut,
                    subcircuit_count: 2,
                    overhead: Rational::ONE,
                    precedence_edge_count: 0,
                },
                subcircuits: vec![s0, s1],
                precedence: PrecedenceDag::empty(),
                deadline: 1_000,
                base_shots: 15,
                deadline_coeff: Rational::from_int(3),
            }],
            gate_times: (1, 10),
            seed: 0,
        };
        let sched = Schedule {
            served: vec![true],
            fragments: vec![
                Fragment { circuit: 0, sub: 0, qpu: 0, shots: 10, start: 0 }, // ends 320
                Fragment { circuit: 0, sub: 1, qpu: 1, shots: 5, start: 10 }, // ends 170
            ],
            objective_weight: Rational::new(1, 2),
        };
        (inst, sched)
    }

    #[test]
    fn completion_is_max_over_fragments() {
        let (inst, mut sched) = two_fragment_instance();
        // Make fragment ends 190 and 170: 30 + 5*32 = 190, 10 + 5*32 = 170.
        sched.fragments[0] = Fragment { circuit: 0, sub: 0, qpu: 0, shots: 5, start: 30 };
        let report = completion_times(&inst, &sched).unwrap();
        assert_eq!(report.per_fragment_end[&(0, 0, 0)], 190);
        assert_eq!(report.per_fragment_end[&(0, 1, 1)], 170);
        assert_eq!(report.circuit_end(0), 190);
        assert_eq!(report.makespan, 190);
    }

    #[test]
    fn unserved_circuit_reports_zero() {
        let (inst, mut sched) = two_fragment_instance();
        sched.served[0] = false;
        sched.fragments.clear();
        let report = completion_times(&inst, &sched).unwrap();
        assert_eq!(report.circuit_end(0), 0);
        assert_eq!(report.per_subcircuit_end[&(0, 0)], 0);
        assert_eq!(report.makespan, 0);
    }

    #[test]
    fn dangling_fragment_is_an_error() {
        let (inst, mut sched) = two_fragment_instance();
        sched.fragments.push(Fragment { circuit: 0, sub: 7, qpu: 0, shots: 1, start: 0 });
        assert!(matches!(
            completion_times(&inst, &sched),
            Err(TimelineError::DanglingFragment { circuit: 0, sub: 7 })
        ));
    }

    #[test]
    fn reference_time_single_subcircuit() {
        let qpus: Vec<Qpu> = (0..5)
            .map(|id| Qpu { id, qubit_capacity: 20, max_depth: 20 })
            .collect();
        let s = sub(2, 3, 15_000); // T = 32
        let t_ref = reference_time(&[s], &PrecedenceDag::empty(), &qpus, 1, 10);
        assert_eq!(t_ref, 32 * 3_000);
    }

    #[test]
    fn longest_path_examples() {
        // chain 0 -> 1 with weights 100, 200 plus an independent node 250
        let dag = PrecedenceDag::from_edges(vec![(0, 1)]);
        assert_eq!(longest_path(&[100, 200, 250], &dag), 300);
        // empty DAG: parallel max
        assert_eq!(longest_path(&[70, 70, 70], &PrecedenceDag::empty()), 70);
        assert_eq!(longest_path(&[], &PrecedenceDag::empty()), 0);
    }

    #[test]
    fn deadline_examples() {
        assert_eq!(assign_deadline(96_000, Rational::from_int(3)), 288_000);
        assert_eq!(assign_deadline(100, Rational::ONE), 100);
        assert_eq!(assign_deadline(100, Rational::new(13, 10)), 130);
        assert_eq!(assign_deadline(101, Rational::new(13, 10)), 132); // ceil(131.3)
    }

    #[test]
    fn completion_monotone_in_shots_and_start() {
        let (inst, sched) = two_fragment_instance();
        let base = completion_times(&inst, &sched).unwrap();
        for idx in 0..sched.fragments.len() {
            for (dshots, dstart) in [(1, 0), (0, 5), (3, 7)] {
                let mut bumped = sched.clone();
                bumped.fragments[idx].shots += dshots;
                bumped.fragments[idx].start += dstart;
                let report = completion_times(&inst, &bumped).unwrap();
                for (key, end) in &base.per_subcircuit_end {
                    assert!(report.per_subcircuit_end[key] >= *end);
                }
                assert!(report.makespan >= base.makespan);
            }
        }
    }
}
