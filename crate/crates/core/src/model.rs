//! Domain types for the quantum cloud: QPUs, cut circuit requests,
//! subcircuits, precedence DAGs, and schedules.
//!
//! Everything here is immutable after construction; solvers build new
//! values instead of mutating shared ones. Instance and schedule documents
//! are JSON with explicit per-subcircuit fields so any run can be replayed
//! byte-for-byte. See `docs/formats.md` for the wire reference.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rational::Rational;

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("parse error: {0}")]
    Parse(String),
    #[error("{path}: {message}")]
    Invariant { path: String, message: String },
}

fn invariant(path: impl Into<String>, message: impl Into<String>) -> ModelError {
    ModelError::Invariant {
        path: path.into(),
        message: message.into(),
    }
}

/// A quantum processing unit: `qubit_capacity` qubits, at most `max_depth`
/// circuit layers at acceptable fidelity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Qpu {
    pub id: usize,
    pub qubit_capacity: i64,
    pub max_depth: i64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CutKind {
    GateCut,
    LoccWireCut,
    LegacyWireCut,
}

impl CutKind {
    pub fn name(&self) -> &'static str {
        match self {
            CutKind::GateCut => "gate_cut",
            CutKind::LoccWireCut => "locc_wire_cut",
            CutKind::LegacyWireCut => "legacy_wire_cut",
        }
    }
}

/// How a circuit was cut: how many subcircuits it produced, the sampling
/// overhead factor on the shot budget, and how many measure->prepare
/// precedence edges the cut induces.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CutMethod {
    pub kind: CutKind,
    pub subcircuit_count: usize,
    pub overhead: Rational,
    pub precedence_edge_count: usize,
}

impl CutMethod {
    /// CNOT gate cut: 12 independent subcircuits, overhead 9.
    pub fn gate() -> Self {
        CutMethod {
            kind: CutKind::GateCut,
            subcircuit_count: 12,
            overhead: Rational::from_int(9),
            precedence_edge_count: 0,
        }
    }

    /// LOCC wire cut: 3 measure + 3 prepare subcircuits, overhead 9,
    /// one precedence edge per measure/prepare pair.
    pub fn locc_wire() -> Self {
        CutMethod {
            kind: CutKind::LoccWireCut,
            subcircuit_count: 6,
            overhead: Rational::from_int(9),
            precedence_edge_count: 3,
        }
    }

    /// Pre-LOCC wire cut: 16 independent subcircuits, overhead 16.
    pub fn legacy_wire() -> Self {
        CutMethod {
            kind: CutKind::LegacyWireCut,
            subcircuit_count: 16,
            overhead: Rational::from_int(16),
            precedence_edge_count: 0,
        }
    }
}

/// One cut product. `single_qubit_layers + two_qubit_layers == depth`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Subcircuit {
    pub circuit: usize,
    pub sub: usize,
    pub qubits: i64,
    pub depth: i64,
    pub single_qubit_layers: i64,
    pub two_qubit_layers: i64,
    pub shots: i64,
}

/// Measure->prepare ordering constraints within one circuit.
/// Edge `(u, v)` means subcircuit `v` may start only after `u` completes
/// all of its shots.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PrecedenceDag {
    edges: Vec<(usize, usize)>,
}

impl PrecedenceDag {
    pub fn empty() -> Self {
        PrecedenceDag { edges: Vec::new() }
    }

    /// Edges are stored sorted and deduplicated.
    pub fn from_edges(mut edges: Vec<(usize, usize)>) -> Self {
        edges.sort_unstable();
        edges.dedup();
        PrecedenceDag { edges }
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    pub fn predecessors(&self, v: usize) -> impl Iterator<Item = usize> + '_ {
        self.edges
            .iter()
            .filter(move |(_, succ)| *succ == v)
            .map(|(pred, _)| *pred)
    }

    pub fn successors(&self, u: usize) -> impl Iterator<Item = usize> + '_ {
        self.edges
            .iter()
            .filter(move |(pred, _)| *pred == u)
            .map(|(_, succ)| *succ)
    }

    /// Kahn topological order over `node_count` vertices, ties by lowest id.
    /// `None` if an edge references a missing vertex or the graph has a cycle.
    pub fn topo_order(&self, node_count: usize) -> Option<Vec<usize>> {
        let mut indegree = vec![0usize; node_count];
        for &(u, v) in &self.edges {
            if u >= node_count || v >= node_count {
                return None;
            }
            indegree[v] += 1;
        }
        let mut order = Vec::with_capacity(node_count);
        let mut ready: Vec<usize> = (0..node_count).filter(|&v| indegree[v] == 0).collect();
        while let Some(&v) = ready.iter().min() {
            ready.retain(|&x| x != v);
            order.push(v);
            for s in self.successors(v) {
                indegree[s] -= 1;
                if indegree[s] == 0 {
                    ready.push(s);
                }
            }
        }
        (order.len() == node_count).then_some(order)
    }

    pub fn is_acyclic(&self, node_count: usize) -> bool {
        self.topo_order(node_count).is_some()
    }
}

/// A user request: one cut circuit with a completion deadline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CircuitRequest {
    pub id: usize,
    pub cut: CutMethod,
    pub subcircuits: Vec<Subcircuit>,
    #[serde(rename = "precedence_edges")]
    pub precedence: PrecedenceDag,
    pub deadline: i64,
    pub base_shots: i64,
    pub deadline_coeff: Rational,
}

/// A full problem instance: the QPU fleet, the request buffer, and the
/// gate execution times `(t1, t2)` shared by the whole cloud.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Instance {
    #[serde(default = "default_format_version")]
    pub format_version: u32,
    pub qpus: Vec<Qpu>,
    pub circuits: Vec<CircuitRequest>,
    pub gate_times: (i64, i64),
    pub seed: u64,
}

fn default_format_version() -> u32 {
    FORMAT_VERSION
}

#[doc(hidden)]
pub fn default_format_version_pub() -> u32 {
    FORMAT_VERSION
}

/// QPU ids on which a subcircuit fits, i.e. both its qubit demand and its
/// depth are within the device limits. Sorted ascending.
pub fn eligibility_set(s: &Subcircuit, qpus: &[Qpu]) -> Vec<usize> {
    qpus.iter()
        .filter(|q| s.qubits <= q.qubit_capacity && s.depth <= q.max_depth)
        .map(|q| q.id)
        .collect()
}

impl Instance {
    /// Parses and validates an instance document. This is the only public
    /// path from bytes to an `Instance`, so every loaded instance satisfies
    /// all type invariants.
    pub fn from_json(text: &str) -> Result<Instance, ModelError> {
        let inst: Instance =
            serde_json::from_str(text).map_err(|e| ModelError::Parse(e.to_string()))?;
        inst.validate()?;
        Ok(inst)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("instance serializes");
        s.push('\n');
        s
    }

    pub fn qpu_count(&self) -> usize {
        self.qpus.len()
    }

    pub fn circuit_count(&self) -> usize {
        self.circuits.len()
    }

    pub fn t1(&self) -> i64 {
        self.gate_times.0
    }

    pub fn t2(&self) -> i64 {
        self.gate_times.1
    }

    pub fn subcircuit(&self, circuit: usize, sub: usize) -> Option<&Subcircuit> {
        self.circuits.get(circuit)?.subcircuits.get(sub)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if self.format_version != FORMAT_VERSION {
            return Err(invariant(
                "format_version",
                format!(
                    "unsupported version {} (expected {FORMAT_VERSION})",
                    self.format_version
                ),
            ));
        }
        let (t1, t2) = self.gate_times;
        if t1 < 1 || t2 <= t1 {
            return Err(invariant(
                "gate_times",
                format!("require t2 > t1 >= 1, got ({t1}, {t2})"),
            ));
        }
        if self.qpus.is_empty() {
            return Err(invariant("qpus", "at least one QPU is required"));
        }
        for (idx, qpu) in self.qpus.iter().enumerate() {
            let path = format!("qpus[{idx}]");
            if qpu.id != idx {
                return Err(invariant(
                    &path,
                    format!("ids must be dense 0..M-1, expected {idx} got {}", qpu.id),
                ));
            }
            if qpu.qubit_capacity < 1 {
                return Err(invariant(&path, "qubit_capacity must be >= 1"));
            }
            if qpu.max_depth < 1 {
                return Err(invariant(&path, "max_depth must be >= 1"));
            }
        }
        for (idx, c) in self.circuits.iter().enumerate() {
            self.validate_circuit(idx, c)?;
        }
        Ok(())
    }

    fn validate_circuit(&self, idx: usize, c: &CircuitRequest) -> Result<(), ModelError> {
        let path = format!("circuits[{idx}]");
        if c.id != idx {
            return Err(invariant(
                &path,
                format!("ids must be dense 0..U-1, expected {idx} got {}", c.id),
            ));
        }
        if c.deadline < 1 {
            return Err(invariant(
                format!("{path}.deadline"),
                "deadline must be >= 1",
            ));
        }
        if c.base_shots < 1 {
            return Err(invariant(
                format!("{path}.base_shots"),
                "base_shots must be >= 1",
            ));
        }
        if c.cut.overhead < Rational::ONE {
            return Err(invariant(
                format!("{path}.cut.overhead"),
                "sampling overhead must be >= 1",
            ));
        }
        let k = c.subcircuits.len();
        if k == 0 {
            return Err(invariant(
                format!("{path}.subcircuits"),
                "a circuit has at least one subcircuit",
            ));
        }
        if k != c.cut.subcircuit_count {
            return Err(invariant(
                format!("{path}.cut.subcircuit_count"),
                format!(
                    "declares {} subcircuits but {} are present",
                    c.cut.subcircuit_count, k
                ),
            ));
        }
        for (j, s) in c.subcircuits.iter().enumerate() {
            let spath = format!("{path}.subcircuits[{j}]");
            if s.circuit != c.id {
                return Err(invariant(
                    format!("{spath}.circuit"),
                    format!("expected {} got {}", c.id, s.circuit),
                ));
            }
            if s.sub != j {
                return Err(invariant(
                    format!("{spath}.sub"),
                    format!("sub ids must be dense 0..k-1, expected {j} got {}", s.sub),
                ));
            }
            if s.qubits < 1 {
                return Err(invariant(
                    format!("{spath}.qubits"),
                    "qubit demand must be >= 1",
                ));
            }
            if s.shots < 1 {
                return Err(invariant(format!("{spath}.shots"), "shots must be >= 1"));
            }
            if s.single_qubit_layers < 0 || s.two_qubit_layers < 0 {
                return Err(invariant(&spath, "layer counts must be nonnegative"));
            }
            if s.single_qubit_layers + s.two_qubit_layers != s.depth {
                return Err(invariant(
                    &spath,
                    format!(
                        "single_qubit_layers + two_qubit_layers must equal depth ({} + {} != {})",
                        s.single_qubit_layers, s.two_qubit_layers, s.depth
                    ),
                ));
            }
            if eligibility_set(s, &self.qpus).is_empty() {
                return Err(invariant(
                    &spath,
                    format!(
                        "no QPU can run this subcircuit (qubits {}, depth {})",
                        s.qubits, s.depth
                    ),
                ));
            }
        }
        self.validate_precedence(&path, c)
    }

    fn validate_precedence(&self, path: &str, c: &CircuitRequest) -> Result<(), ModelError> {
        let k = c.subcircuits.len();
        let dpath = format!("{path}.precedence_edges");
        if c.precedence.len() != c.cut.precedence_edge_count {
            return Err(invariant(
                &dpath,
                format!(
                    "cut declares {} precedence edges but {} are present",
                    c.cut.precedence_edge_count,
                    c.precedence.len()
                ),
            ));
        }
        for &(u, v) in c.precedence.edges() {
            if u >= k || v >= k {
                return Err(invariant(
                    &dpath,
                    format!("edge ({u}, {v}) references a subcircuit outside 0..{k}"),
                ));
            }
            if u == v {
                return Err(invariant(&dpath, format!("self-edge on subcircuit {u}")));
            }
        }
        if !c.precedence.is_acyclic(k) {
            return Err(invariant(&dpath, "precedence graph has a cycle"));
        }
        if c.cut.kind == CutKind::LoccWireCut {
            // Measure subcircuits are the first half, prepare the second;
            // edges must pair them bijectively.
            let half = k / 2;
            let mut seen_src = vec![false; k];
            let mut seen_dst = vec![false; k];
            for &(u, v) in c.precedence.edges() {
                if u >= half || v < half {
                    return Err(invariant(
                        &dpath,
                        format!(
                            "LOCC edge ({u}, {v}) must go from a measure subcircuit (0..{half}) to a prepare subcircuit ({half}..{k})"
                        ),
                    ));
                }
                if seen_src[u] || seen_dst[v] {
                    return Err(invariant(
                        &dpath,
                        "LOCC measure/prepare pairing must be a bijection",
                    ));
                }
                seen_src[u] = true;
                seen_dst[v] = true;
            }
            if c.precedence.len() != half {
                return Err(invariant(
                    &dpath,
                    format!("LOCC wire cut requires exactly {half} edges"),
                ));
            }
        }
        Ok(())
    }
}

/// The execution of `shots` shots of subcircuit `(circuit, sub)` on
/// QPU `qpu`, starting at `start`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Fragment {
    pub circuit: usize,
    pub sub: usize,
    pub qpu: usize,
    pub shots: i64,
    pub start: i64,
}

/// A candidate solution: which circuits are served and where every shot runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    pub served: Vec<bool>,
    pub fragments: Vec<Fragment>,
    #[serde(rename = "alpha")]
    pub objective_weight: Rational,
}

impl Schedule {
    pub fn empty(circuit_count: usize, objective_weight: Rational) -> Self {
        Schedule {
            served: vec![false; circuit_count],
            fragments: Vec::new(),
            objective_weight,
        }
    }

    pub fn is_served(&self, circuit: usize) -> bool {
        self.served.get(circuit).copied().unwrap_or(false)
    }

    pub fn served_count(&self) -> usize {
        self.served.iter().filter(|&&z| z).count()
    }

    /// Canonical fragment order, so equal schedules serialize to equal bytes.
    pub fn normalize(&mut self) {
        self.fragments.sort_unstable();
    }

    pub fn fragments_of(&self, circuit: usize, sub: usize) -> impl Iterator<Item = &Fragment> {
        self.fragments
            .iter()
            .filter(move |f| f.circuit == circuit && f.sub == sub)
    }
}
