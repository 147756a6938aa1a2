//! The cloud compiler model: turns a raw circuit request into subcircuits
//! with sampled parameters, an evenly divided shot budget, and the
//! precedence DAG induced by LOCC wire cuts.
//!
//! Cut placement itself is out of scope; the cut method fixes the
//! subcircuit count, the sampling overhead, and the precedence shape, and
//! the per-subcircuit parameters are drawn from configured distributions
//! until each subcircuit fits on at least one QPU.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{
    eligibility_set, CircuitRequest, CutKind, CutMethod, PrecedenceDag, Qpu, Subcircuit,
};
use crate::rational::Rational;

#[derive(Debug, Error)]
pub enum CutError {
    #[error("shot budget overflow: {n0} * {overhead}")]
    BudgetOverflow { n0: i64, overhead: Rational },
    #[error("total shots {total} cannot cover {k} subcircuits")]
    TooFewShots { total: i64, k: usize },
    #[error(
        "circuit {circuit} subcircuit {sub}: no eligible parameters after {attempts} attempts; the QPU fleet cannot fit this workload"
    )]
    RejectionCapExceeded {
        circuit: usize,
        sub: usize,
        attempts: u32,
    },
}

/// An uncut request as submitted by a user: the cut method is already
/// chosen, parameters are not yet sampled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawCircuit {
    pub id: usize,
    pub cut: CutKind,
    pub base_shots: i64,
    pub rng_seed: u64,
}

/// Sampling ranges for subcircuit parameters (inclusive bounds).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParameterDistributions {
    pub qubit_range: (i64, i64),
    pub depth_range: (i64, i64),
    pub single_layer_range: (i64, i64),
    pub two_layer_range: (i64, i64),
    pub max_attempts: u32,
}

impl Default for ParameterDistributions {
    fn default() -> Self {
        ParameterDistributions {
            qubit_range: (5, 20),
            depth_range: (5, 20),
            single_layer_range: (2, 10),
            two_layer_range: (3, 10),
            max_attempts: 10_000,
        }
    }
}

/// Sampling overhead factors per cut method.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct CutOverheads {
    pub gate: Rational,
    pub locc_wire: Rational,
    pub legacy_wire: Rational,
}

impl Default for CutOverheads {
    fn default() -> Self {
        CutOverheads {
            gate: Rational::from_int(9),
            locc_wire: Rational::from_int(9),
            legacy_wire: Rational::from_int(16),
        }
    }
}

/// Everything the compiler model needs besides the raw request: parameter
/// distributions and overhead factors.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct CompilerSettings {
    pub dist: ParameterDistributions,
    pub overheads: CutOverheads,
}

/// A cut circuit before deadline assignment.
#[derive(Debug, Clone, PartialEq)]
pub struct CutCircuit {
    pub id: usize,
    pub cut: CutMethod,
    pub subcircuits: Vec<Subcircuit>,
    pub precedence: PrecedenceDag,
    pub base_shots: i64,
}

impl CutCircuit {
    pub fn into_request(self, deadline: i64, deadline_coeff: Rational) -> CircuitRequest {
        CircuitRequest {
            id: self.id,
            cut: self.cut,
            subcircuits: self.subcircuits,
            precedence: self.precedence,
            deadline,
            base_shots: self.base_shots,
            deadline_coeff,
        }
    }
}

/// Total shots after cutting: `round(n0 * overhead)`, exact rational product.
pub fn total_shot_budget(n0: i64, overhead: Rational) -> Result<i64, CutError> {
    overhead
        .round_mul_int(n0)
        .ok_or(CutError::BudgetOverflow { n0, overhead })
}

/// Splits `total` shots evenly across `k` subcircuits; the remainder goes
/// to the lowest sub ids so the division is deterministic.
pub fn split_shots(total: i64, k: usize) -> Result<Vec<i64>, CutError> {
    if k == 0 || total < k as i64 {
        return Err(CutError::TooFewShots { total, k });
    }
    let base = total / k as i64;
    let extra = (total % k as i64) as usize;
    Ok((0..k)
        .map(|j| if j < extra { base + 1 } else { base })
        .collect())
}

fn cut_method_for(kind: CutKind, overheads: &CutOverheads) -> CutMethod {
    let mut method = match kind {
        CutKind::GateCut => CutMethod::gate(),
        CutKind::LoccWireCut => CutMethod::locc_wire(),
        CutKind::LegacyWireCut => CutMethod::legacy_wire(),
    };
    method.overhead = match kind {
        CutKind::GateCut => overheads.gate,
        CutKind::LoccWireCut => overheads.locc_wire,
        CutKind::LegacyWireCut => overheads.legacy_wire,
    };
    method
}

/// Cuts one raw circuit. Deterministic given `raw.rng_seed`.
///
/// Each subcircuit's parameters are rejection-sampled until the layer
/// identity holds and at least one QPU can run it. For LOCC wire cuts the
/// first half of the sub ids are measure subcircuits, the second half
/// prepare subcircuits, paired by a uniformly random bijection.
pub fn cut_circuit(
    raw: &RawCircuit,
    qpus: &[Qpu],
    settings: &CompilerSettings,
) -> Result<CutCircuit, CutError> {
    let dist = &settings.dist;
    let method = cut_method_for(raw.cut, &settings.overheads);
    let k = method.subcircuit_count;
    let total = total_shot_budget(raw.base_shots, method.overhead)?;
    let shares = split_shots(total, k)?;

    let mut rng = ChaCha8Rng::seed_from_u64(raw.rng_seed);
    let mut subcircuits = Vec::with_capacity(k);
    for (j, &shots) in shares.iter().enumerate() {
        let s = sample_subcircuit(raw.id, j, shots, qpus, dist, &mut rng)?;
        subcircuits.push(s);
    }

    let precedence = if raw.cut == CutKind::LoccWireCut {
        let half = k / 2;
        let mut prepares: Vec<usize> = (half..k).collect();
        prepares.shuffle(&mut rng);
        PrecedenceDag::from_edges((0..half).zip(prepares).collect())
    } else {
        PrecedenceDag::empty()
    };

    Ok(CutCircuit {
        id: raw.id,
        cut: method,
        subcircuits,
        precedence,
        base_shots: raw.base_shots,
    })
}

fn sample_subcircuit(
    circuit: usize,
    sub: usize,
    shots: i64,
    qpus: &[Qpu],
    dist: &ParameterDistributions,
    rng: &mut ChaCha8Rng,
) -> Result<Subcircuit, CutError> {
    for _ in 0..dist.max_attempts {
        let qubits = rng.gen_range(dist.qubit_range.0..=dist.qubit_range.1);
        let depth = rng.gen_range(dist.depth_range.0..=dist.depth_range.1);
        let kappa1 = rng.gen_range(dist.single_layer_range.0..=dist.single_layer_range.1);
        let kappa2 = depth - kappa1;
        if kappa2 < dist.two_layer_range.0 || kappa2 > dist.two_layer_range.1 {
            continue;
        }
        let candidate = Subcircuit {
            circuit,
            sub,
            qubits,
            depth,
            single_qubit_layers: kappa1,
            two_qubit_layers: kappa2,
            shots,
        };
        if !eligibility_set(&candidate, qpus).is_empty() {
            return Ok(candidate);
        }
    }
    Err(CutError::RejectionCapExceeded {
        circuit,
        sub,
        attempts: dist.max_attempts,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fleet() -> Vec<Qpu> {
        (0..5)
            .map(|id| Qpu { id, qubit_capacity: 20, max_depth: 20 })
            .collect()
    }

    #[test]
    fn shot_budget_examples() {
        assert_eq!(total_shot_budget(10_000, Rational::from_int(9)).unwrap(), 90_000);
        assert_eq!(total_shot_budget(10_000, Rational::from_int(16)).unwrap(), 160_000);
        assert_eq!(total_shot_budget(1, Rational::ONE).unwrap(), 1);
        assert!(matches!(
            total_shot_budget(i64::MAX, Rational::from_int(9)),
            Err(CutError::BudgetOverflow { .. })
        ));
    }

    #[test]
    fn split_examples() {
        assert_eq!(split_shots(90_000, 6).unwrap(), vec![15_000; 6]);
        assert_eq!(split_shots(160_000, 16).unwrap(), vec![10_000; 16]);
        assert_eq!(split_shots(10, 3).unwrap(), vec![4, 3, 3]);
        assert!(matches!(split_shots(2, 3), Err(CutError::TooFewShots { .. })));
    }

    #[test]
    fn split_sums_and_balance() {
        for total in 1..200i64 {
            for k in 1..=total.min(20) as usize {
                let parts = split_shots(total, k).unwrap();
                assert_eq!(parts.iter().sum::<i64>(), total);
                let max = *parts.iter().max().unwrap();
                let min = *parts.iter().min().unwrap();
                assert!(max - min <= 1);
                // larger shares first
                assert!(parts.windows(2).all(|w| w[0] >= w[1]));
            }
        }
    }

    #[test]
    fn gate_cut_shape() {
        let raw = RawCircuit { id: 0, cut: CutKind::GateCut, base_shots: 10_000, rng_seed: 1 };
        let cut = cut_circuit(&raw, &fleet(), &CompilerSettings::default()).unwrap();
        assert_eq!(cut.subcircuits.len(), 12);
        assert!(cut.subcircuits.iter().all(|s| s.shots == 7_500));
        assert!(cut.precedence.is_empty());
    }

    #[test]
    fn locc_cut_shape() {
        let raw = RawCircuit { id: 0, cut: CutKind::LoccWireCut, base_shots: 10_000, rng_seed: 2 };
        let cut = cut_circuit(&raw, &fleet(), &CompilerSettings::default()).unwrap();
        assert_eq!(cut.subcircuits.len(), 6);
        assert!(cut.subcircuits.iter().all(|s| s.shots == 15_000));
        let edges = cut.precedence.edges();
        assert_eq!(edges.len(), 3);
        let mut sources: Vec<usize> = edges.iter().map(|e| e.0).collect();
        let mut sinks: Vec<usize> = edges.iter().map(|e| e.1).collect();
        sources.sort_unstable();
        sinks.sort_unstable();
        assert_eq!(sources, vec![0, 1, 2]);
        let mut expected_sinks = sinks.clone();
        expected_sinks.dedup();
        assert_eq!(expected_sinks.len(), 3, "sinks are distinct");
        assert!(sinks.iter().all(|&v| (3..6).contains(&v)));
    }

    #[test]
    fn legacy_cut_shape() {
        let raw = RawCircuit { id: 3, cut: CutKind::LegacyWireCut, base_shots: 10, rng_seed: 9 };
        let cut = cut_circuit(&raw, &fleet(), &CompilerSettings::default()).unwrap();
        assert_eq!(cut.subcircuits.len(), 16);
        assert_eq!(cut.subcircuits.iter().map(|s| s.shots).sum::<i64>(), 160);
        assert!(cut.precedence.is_empty());
    }

    #[test]
    fn deterministic_given_seed() {
        let raw = RawCircuit { id: 1, cut: CutKind::LoccWireCut, base_shots: 500, rng_seed: 42 };
        let settings = CompilerSettings::default();
        let a = cut_circuit(&raw, &fleet(), &settings).unwrap();
        let b = cut_circuit(&raw, &fleet(), &settings).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn emitted_subcircuits_fit_somewhere() {
        // Shrink the fleet so rejection sampling has real work to do.
        let qpus = vec![
            Qpu { id: 0, qubit_capacity: 7, max_depth: 9 },
            Qpu { id: 1, qubit_capacity: 12, max_depth: 6 },
        ];
        for seed in 0..20 {
            let raw = RawCircuit { id: 0, cut: CutKind::GateCut, base_shots: 100, rng_seed: seed };
            let cut = cut_circuit(&raw, &qpus, &CompilerSettings::default()).unwrap();
            for s in &cut.subcircuits {
                assert!(!eligibility_set(s, &qpus).is_empty());
                assert_eq!(s.single_qubit_layers + s.two_qubit_layers, s.depth);
            }
        }
    }

    #[test]
    fn impossible_fleet_hits_rejection_cap() {
        let qpus = vec![Qpu { id: 0, qubit_capacity: 1, max_depth: 1 }];
        let raw = RawCircuit { id: 0, cut: CutKind::GateCut, base_shots: 100, rng_seed: 0 };
        let settings = CompilerSettings {
            dist: ParameterDistributions { max_attempts: 200, ..Default::default() },
            ..Default::default()
        };
        assert!(matches!(
            cut_circuit(&raw, &qpus, &settings),
            Err(CutError::RejectionCapExceeded { circuit: 0, sub: 0, attempts: 200 })
        ));
    }

    proptest::proptest! {
        #[test]
        fn split_is_even_and_conserving(total in 1i64..2_000_000, k in 1usize..64) {
            proptest::prop_assume!(total >= k as i64);
            let parts = split_shots(total, k).unwrap();
            proptest::prop_assert_eq!(parts.iter().sum::<i64>(), total);
            let max = *parts.iter().max().unwrap();
            let min = *parts.iter().min().unwrap();
            proptest::prop_assert!(max - min <= 1);
            proptest::prop_assert!(parts.windows(2).all(|w| w[0] >= w[1]));
        }

        #[test]
        fn budget_round_trips_integer_overheads(n0 in 1i64..1_000_000, g in 1i64..64) {
            let total = total_shot_budget(n0, Rational::from_int(g)).unwrap();
            proptest::prop_assert_eq!(total, n0 * g);
        }
    }

    #[test]
    fn budget_conservation_across_methods() {
        let settings = CompilerSettings::default();
        for (kind, n0) in [
            (CutKind::GateCut, 10_000),
            (CutKind::LoccWireCut, 10_000),
            (CutKind::LegacyWireCut, 10),
            (CutKind::LoccWireCut, 991),
        ] {
            let raw = RawCircuit { id: 0, cut: kind, base_shots: n0, rng_seed: 5 };
            let cut = cut_circuit(&raw, &fleet(), &settings).unwrap();
            let want = total_shot_budget(n0, cut.cut.overhead).unwrap();
            assert_eq!(cut.subcircuits.iter().map(|s| s.shots).sum::<i64>(), want);
        }
    }
}
