//! Constraint checking and scoring for candidate schedules.
//!
//! `validate` is the single source of truth for feasibility: every solver
//! output is gated through it, and it returns *all* violations rather than
//! the first. `score` computes the objective (served count plus an earliness
//! bonus for circuits finishing within 80% of their deadline) and the
//! experiment metrics, refusing infeasible input.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{eligibility_set, Instance, Schedule};
use crate::rational::Rational;
use crate::timeline::{completion_times, per_shot_runtime, CompletionReport};

/// One violation kind per scheduling constraint: shot conservation,
/// deadlines, precedence, QPU exclusivity, integrality/nonnegativity,
/// and QPU eligibility.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ViolationKind {
    ShotConservation,
    DeadlineMiss,
    PrecedenceBreach,
    QpuOverlap,
    NegativeOrNonIntegral,
    IneligibleQpu,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub kind: ViolationKind,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub circuit: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub sub: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub qpu: Option<usize>,
    pub detail: String,
}

impl Violation {
    fn new(kind: ViolationKind, detail: String) -> Self {
        Violation { kind, circuit: None, sub: None, qpu: None, detail }
    }

    fn circuit(mut self, i: usize) -> Self {
        self.circuit = Some(i);
        self
    }

    fn sub(mut self, j: usize) -> Self {
        self.sub = Some(j);
        self
    }

    fn qpu(mut self, m: usize) -> Self {
        self.qpu = Some(m);
        self
    }
}

/// Aggregate quality of a feasible schedule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub served_count: usize,
    pub bonus_count: usize,
    pub objective: Rational,
    pub makespan: i64,
    pub served_fraction: Rational,
}

#[derive(Debug, Error)]
pub enum FeasibilityError {
    #[error("schedule is infeasible ({count} violations, first: {first})")]
    Infeasible { count: usize, first: String },
    #[error("timeline error: {0}")]
    Timeline(#[from] crate::timeline::TimelineError),
}

/// Default objective weight: `1/(U+1)` makes the objective lexicographic
/// in (served count, bonus count).
pub fn default_alpha(circuit_count: usize) -> Rational {
    Rational::new(1, circuit_count as i64 + 1)
}

/// True when `end <= 0.8 * deadline`, evaluated exactly on integers.
pub fn within_bonus(end: i64, deadline: i64) -> bool {
    5 * end <= 4 * deadline
}

/// Checks every scheduling constraint against `sched` and returns all
/// violations; an empty list means the schedule is feasible.
pub fn validate(inst: &Instance, sched: &Schedule) -> Vec<Violation> {
    let mut out = Vec::new();
    let u = inst.circuit_count();
    let m = inst.qpu_count();

    for (i, &served) in sched.served.iter().enumerate() {
        if i >= u && served {
            out.push(
                Violation::new(
                    ViolationKind::ShotConservation,
                    format!("served flag set for nonexistent circuit {i}"),
                )
                .circuit(i),
            );
        }
    }

    // Structural checks first; fragments that do not refer to real
    // subcircuits or QPUs are excluded from the later passes.
    let mut fragments = Vec::with_capacity(sched.fragments.len());
    for f in &sched.fragments {
        if inst.subcircuit(f.circuit, f.sub).is_none() {
            out.push(
                Violation::new(
                    ViolationKind::ShotConservation,
                    format!(
                        "fragment references unknown subcircuit ({}, {})",
                        f.circuit, f.sub
                    ),
                )
                .circuit(f.circuit)
                .sub(f.sub),
            );
            continue;
        }
        if f.qpu >= m {
            out.push(
                Violation::new(
                    ViolationKind::IneligibleQpu,
                    format!("fragment references unknown QPU {}", f.qpu),
                )
                .circuit(f.circuit)
                .sub(f.sub)
                .qpu(f.qpu),
            );
            continue;
        }
        fragments.push(*f);
    }

    // Integrality is enforced by the wire types; negativity and empty
    // fragments are not. A fragment with a corrupt start still counts
    // toward shot conservation (its allocation is intact) but is dropped
    // from the timeline passes; a fragment with corrupt shots is dropped
    // from both.
    for f in &fragments {
        if f.shots < 0 || f.start < 0 {
            out.push(
                Violation::new(
                    ViolationKind::NegativeOrNonIntegral,
                    format!("fragment has shots {} start {}", f.shots, f.start),
                )
                .circuit(f.circuit)
                .sub(f.sub)
                .qpu(f.qpu),
            );
        } else if f.shots == 0 {
            out.push(
                Violation::new(
                    ViolationKind::NegativeOrNonIntegral,
                    "zero-shot fragment".to_string(),
                )
                .circuit(f.circuit)
                .sub(f.sub)
                .qpu(f.qpu),
            );
        }
    }
    fragments.retain(|f| f.shots >= 0);
    let timed: Vec<_> = fragments
        .iter()
        .copied()
        .filter(|f| f.shots > 0 && f.start >= 0)
        .collect();

    // Eligibility: every fragment's QPU must admit its subcircuit.
    for f in &timed {
        let s = inst.subcircuit(f.circuit, f.sub).expect("checked above");
        if !eligibility_set(s, &inst.qpus).contains(&f.qpu) {
            out.push(
                Violation::new(
                    ViolationKind::IneligibleQpu,
                    format!(
                        "QPU {} cannot run subcircuit ({}, {}) (qubits {}, depth {})",
                        f.qpu, f.circuit, f.sub, s.qubits, s.depth
                    ),
                )
                .circuit(f.circuit)
                .sub(f.sub)
                .qpu(f.qpu),
            );
        }
    }

    // Shot conservation: served circuits allocate exactly N_{i,j} shots per
    // subcircuit; unserved circuits allocate none.
    for c in &inst.circuits {
        let served = sched.is_served(c.id);
        if !served {
            let stray: i64 = fragments
                .iter()
                .filter(|f| f.circuit == c.id)
                .map(|f| f.shots)
                .sum();
            if stray > 0 {
                out.push(
                    Violation::new(
                        ViolationKind::ShotConservation,
                        format!("unserved circuit has {stray} allocated shots"),
                    )
                    .circuit(c.id),
                );
            }
            continue;
        }
        for s in &c.subcircuits {
            let got: i64 = fragments
                .iter()
                .filter(|f| f.circuit == c.id && f.sub == s.sub)
                .map(|f| f.shots)
                .sum();
            if got != s.shots {
                out.push(
                    Violation::new(
                        ViolationKind::ShotConservation,
                        format!("allocated {got} shots, need {}", s.shots),
                    )
                    .circuit(c.id)
                    .sub(s.sub),
                );
            }
        }
    }

    // Deadlines, from the same completion arithmetic the report uses.
    let probe = Schedule {
        served: sched.served.clone(),
        fragments: timed.clone(),
        objective_weight: sched.objective_weight,
    };
    let report = completion_times(inst, &probe).expect("fragments were screened");
    for c in &inst.circuits {
        if sched.is_served(c.id) {
            let end = report.circuit_end(c.id);
            if end > c.deadline {
                out.push(
                    Violation::new(
                        ViolationKind::DeadlineMiss,
                        format!("completes at {end}, deadline {}", c.deadline),
                    )
                    .circuit(c.id),
                );
            }
        }
    }

    // Precedence: every fragment of a successor starts at or after the
    // full completion of its predecessor subcircuit.
    for c in &inst.circuits {
        if !sched.is_served(c.id) {
            continue;
        }
        for &(pred, succ) in c.precedence.edges() {
            let pred_end = report
                .per_subcircuit_end
                .get(&(c.id, pred))
                .copied()
                .unwrap_or(0);
            for f in timed.iter().filter(|f| f.circuit == c.id && f.sub == succ) {
                if f.start < pred_end {
                    out.push(
                        Violation::new(
                            ViolationKind::PrecedenceBreach,
                            format!(
                                "fragment starts at {} but predecessor {} ends at {}",
                                f.start, pred, pred_end
                            ),
                        )
                        .circuit(c.id)
                        .sub(succ)
                        .qpu(f.qpu),
                    );
                }
            }
        }
    }

    // QPU exclusivity: on each QPU, served fragments occupy disjoint
    // half-open intervals [start, end).
    let mut by_qpu: Vec<Vec<(i64, i64, usize, usize)>> = vec![Vec::new(); m];
    for f in &timed {
        if !sched.is_served(f.circuit) {
            continue;
        }
        let s = inst.subcircuit(f.circuit, f.sub).expect("screened");
        let end = f.start + per_shot_runtime(s, inst.t1(), inst.t2()) * f.shots;
        by_qpu[f.qpu].push((f.start, end, f.circuit, f.sub));
    }
    for (qpu, intervals) in by_qpu.iter_mut().enumerate() {
        intervals.sort_unstable();
        for w in intervals.windows(2) {
            let (a_start, a_end, a_i, a_j) = w[0];
            let (b_start, _, b_i, b_j) = w[1];
            if b_start < a_end {
                out.push(
                    Violation::new(
                        ViolationKind::QpuOverlap,
                        format!(
                            "fragments ({a_i}, {a_j}) [{a_start}, {a_end}) and ({b_i}, {b_j}) [start {b_start}] overlap"
                        ),
                    )
                    .circuit(b_i)
                    .sub(b_j)
                    .qpu(qpu),
                );
            }
        }
    }

    out
}

/// Scores a feasible schedule. Callers must validate first; infeasible
/// input is refused.
pub fn score(
    inst: &Instance,
    sched: &Schedule,
    alpha: Rational,
) -> Result<Metrics, FeasibilityError> {
    let violations = validate(inst, sched);
    if !violations.is_empty() {
        return Err(FeasibilityError::Infeasible {
            count: violations.len(),
            first: format!("{:?}: {}", violations[0].kind, violations[0].detail),
        });
    }
    let report = completion_times(inst, sched)?;
    Ok(score_unchecked(inst, sched, alpha, &report))
}

/// Scoring without re-validation, for solvers that already hold a report
/// for a schedule they know is feasible.
pub fn score_unchecked(
    inst: &Instance,
    sched: &Schedule,
    alpha: Rational,
    report: &CompletionReport,
) -> Metrics {
    let served_count = sched.served_count();
    let bonus_count = inst
        .circuits
        .iter()
        .filter(|c| sched.is_served(c.id) && within_bonus(report.circuit_end(c.id), c.deadline))
        .count();
    let objective =
        Rational::from_int(served_count as i64) + alpha * Rational::from_int(bonus_count as i64);
    let u = inst.circuit_count().max(1);
    Metrics {
        served_count,
        bonus_count,
        objective,
        makespan: report.makespan,
        served_fraction: Rational::new(served_count as i64, u as i64),
    }
}
