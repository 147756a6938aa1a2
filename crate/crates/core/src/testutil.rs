//! Hand-built instance constructors for unit tests.

use crate::model::{
    CircuitRequest, CutKind, CutMethod, Instance, PrecedenceDag, Qpu, Subcircuit, FORMAT_VERSION,
};
use crate::rational::Rational;

pub(crate) fn uniform_fleet(count: usize, qubits: i64, depth: i64) -> Vec<Qpu> {
    (0..count)
        .map(|id| Qpu { id, qubit_capacity: qubits, max_depth: depth })
        .collect()
}

/// Subcircuit spec: (qubits, single layers, two-qubit layers, shots).
pub(crate) type SubSpec = (i64, i64, i64, i64);

pub(crate) fn circuit(
    id: usize,
    subs: &[SubSpec],
    edges: &[(usize, usize)],
    deadline: i64,
) -> CircuitRequest {
    let subcircuits: Vec<Subcircuit> = subs
        .iter()
        .enumerate()
        .map(|(j, &(qubits, k1, k2, shots))| Subcircuit {
            circuit: id,
            sub: j,
            qubits,
            depth: k1 + k2,
            single_qubit_layers: k1,
            two_qubit_layers: k2,
            shots,
        })
        .collect();
    let base_shots = subcircuits.iter().map(|s| s.shots).sum::<i64>().max(1);
    CircuitRequest {
        id,
        cut: CutMethod {
            kind: CutKind::GateCut,
            subcircuit_count: subs.len(),
            overhead: Rational::ONE,
            precedence_edge_count: edges.len(),
        },
        subcircuits,
        precedence: PrecedenceDag::from_edges(edges.to_vec()),
        deadline,
        base_shots,
        deadline_coeff: Rational::from_int(3),
    }
}

pub(crate) fn instance(qpus: Vec<Qpu>, circuits: Vec<CircuitRequest>) -> Instance {
    let inst = Instance {
        format_version: FORMAT_VERSION,
        qpus,
        circuits,
        gate_times: (1, 10),
        seed: 7,
    };
    inst.validate().expect("test instance is valid");
    inst
}
