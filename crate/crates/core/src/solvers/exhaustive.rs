//! Exhaustive oracle for tiny instances.
//!
//! The search space is: every served set, every per-subcircuit shot split
//! into at most two parts (at a configurable granularity, with the
//! balanced split always included) across eligible QPUs, and every
//! precedence-respecting dispatch order, packed left-justified. Candidate
//! (served, bonus) targets are tried in decreasing objective order; the
//! first level with a feasible target is optimal. Within that level the
//! makespan is then minimized best-effort by re-searching under shrinking
//! caps; the objective stays exact even if refinement runs out of nodes.
//!
//! Exactness relies on three sound prunings: a longest-path lower bound on
//! every unscheduled subcircuit's completion, dominance memoization over
//! (scheduled set, QPU frontier, pending predecessor ends), and symmetry
//! deduplication of children that place equal shares on interchangeable
//! QPUs.

use std::collections::HashMap;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::model::{Fragment, Instance, Schedule};
use crate::rational::Rational;

use super::placement::Ctx;
use super::{finish, SolveError, SolveResult, SolverConfig};

/// Size limits; the solver refuses instances beyond them.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExhaustiveGuard {
    pub max_circuits: usize,
    pub max_total_subcircuits: usize,
    pub max_split_candidates: usize,
    /// Shot granularity for 2-part splits; `None` picks 1 for shot counts
    /// up to 10 and `N/4` beyond that. The balanced split is always kept.
    pub granularity: Option<i64>,
    /// Hard cap on search nodes across the whole solve.
    pub node_budget: u64,
    /// Node allowance for each makespan-refinement pass and for
    /// tie-breaking sibling candidates once the objective is settled.
    pub refine_budget: u64,
}

impl Default for ExhaustiveGuard {
    fn default() -> Self {
        ExhaustiveGuard {
            max_circuits: 3,
            max_total_subcircuits: 18,
            max_split_candidates: 600,
            granularity: None,
            node_budget: 30_000_000,
            refine_budget: 400_000,
        }
    }
}

/// One subcircuit in the flattened search universe.
struct Node {
    circuit: usize,
    sub: usize,
    runtime: i64,
    shots: i64,
    /// Global indices of predecessors.
    preds: Vec<usize>,
    /// Whether any successor exists (its end stays dominance-relevant).
    has_succ: bool,
    /// QPUs eligible for this subcircuit.
    eligible: Vec<usize>,
    /// Shot split options: each a list of (qpu, shots).
    options: Vec<Vec<(usize, i64)>>,
    /// Lower bound on processing after the start: runtime * ceil(shots/2)
    /// when a 2-way split is possible.
    min_tail: i64,
}

enum Outcome {
    Found(Vec<Fragment>),
    Infeasible,
    Budget,
}

struct Search<'a> {
    nodes: &'a [Node],
    topo: &'a [usize],
    /// (qubit_capacity, max_depth) per QPU, for symmetry dedup.
    qpu_class: &'a [(i64, i64)],
    /// Effective deadline per circuit (tightened for bonus targets).
    deadline: Vec<i64>,
    cap: Option<i64>,
    budget: u64,
    memo: HashMap<u64, Vec<Vec<i64>>>,
    /// Scratch for the lower-bound pass.
    lb: Vec<i64>,
}

pub(super) fn solve(inst: &Instance, cfg: &SolverConfig) -> Result<SolveResult, SolveError> {
    let started = Instant::now();
    let guard = cfg.exhaustive;
    let u = inst.circuit_count();
    if u > guard.max_circuits {
        return Err(SolveError::Guard(format!(
            "{u} circuits exceed max_circuits {}",
            guard.max_circuits
        )));
    }
    let total_subs: usize = inst.circuits.iter().map(|c| c.subcircuits.len()).sum();
    if total_subs > guard.max_total_subcircuits {
        return Err(SolveError::Guard(format!(
            "{total_subs} subcircuits exceed max_total_subcircuits {}",
            guard.max_total_subcircuits
        )));
    }

    let ctx = Ctx::new(inst);
    let alpha = cfg.effective_alpha(inst);
    let qpu_class: Vec<(i64, i64)> = inst
        .qpus
        .iter()
        .map(|q| (q.qubit_capacity, q.max_depth))
        .collect();

    // Candidate (served, bonus) targets, best objective first. Ties are
    // ordered by mask for determinism.
    let mut candidates: Vec<(u32, u32, Rational)> = Vec::new();
    for served in 0..(1u32 << u) {
        let mut bonus = served;
        loop {
            let objective = Rational::from_int(served.count_ones() as i64)
                + alpha * Rational::from_int(bonus.count_ones() as i64);
            candidates.push((served, bonus, objective));
            if bonus == 0 {
                break;
            }
            bonus = (bonus - 1) & served;
        }
    }
    candidates.sort_by(|a, b| b.2.cmp(&a.2).then(a.0.cmp(&b.0)).then(a.1.cmp(&b.1)));

    let mut budget = guard.node_budget;
    let mut idx = 0;
    while idx < candidates.len() {
        let level = candidates[idx].2;
        let mut level_best: Option<(i64, Vec<Fragment>, u32)> = None;
        while idx < candidates.len() && candidates[idx].2 == level {
            let (served, bonus, _) = candidates[idx];
            idx += 1;
            let (nodes, topo) = build_nodes(&ctx, served, &guard)?;
            // Once the level has a feasible schedule the objective is
            // settled; sibling candidates only refine the makespan
            // tie-break, so they run under the small refine budget.
            let allowance = if level_best.is_some() {
                guard.refine_budget.min(budget)
            } else {
                budget
            };
            let mut search =
                Search::new(&nodes, &topo, &qpu_class, inst, served, bonus, None, allowance);
            let outcome = search.run();
            budget -= allowance - search.budget;
            match outcome {
                Outcome::Budget => {
                    if level_best.is_some() {
                        continue;
                    }
                    return Err(SolveError::Guard(format!(
                        "node budget {} exhausted before optimality was proven",
                        guard.node_budget
                    )));
                }
                Outcome::Infeasible => continue,
                Outcome::Found(frags) => {
                    let mut mk = makespan_of(&ctx, &frags);
                    let mut best_frags = frags;
                    loop {
                        if mk == 0 || budget == 0 {
                            break;
                        }
                        let allowance = guard.refine_budget.min(budget);
                        let mut refine = Search::new(
                            &nodes, &topo, &qpu_class, inst, served, bonus,
                            Some(mk - 1),
                            allowance,
                        );
                        let outcome = refine.run();
                        budget -= allowance - refine.budget;
                        match outcome {
                            Outcome::Found(f) => {
                                mk = makespan_of(&ctx, &f);
                                best_frags = f;
                            }
                            Outcome::Infeasible | Outcome::Budget => break,
                        }
                    }
                    let replace = match &level_best {
                        None => true,
                        Some((best_mk, best_f, _)) => {
                            mk < *best_mk || (mk == *best_mk && lex_less(&best_frags, best_f))
                        }
                    };
                    if replace {
                        level_best = Some((mk, best_frags, served));
                    }
                }
            }
        }
        if let Some((_, frags, served)) = level_best {
            let mut schedule = Schedule::empty(u, alpha);
            for i in 0..u {
                schedule.served[i] = served & (1 << i) != 0;
            }
            schedule.fragments = frags;
            return Ok(finish(inst, schedule, alpha, None, started));
        }
    }
    // The empty candidate is always feasible, so this is unreachable.
    Ok(finish(inst, Schedule::empty(u, alpha), alpha, None, started))
}

fn lex_less(a: &[Fragment], b: &[Fragment]) -> bool {
    let mut x = a.to_vec();
    let mut y = b.to_vec();
    x.sort_unstable();
    y.sort_unstable();
    x < y
}

fn makespan_of(ctx: &Ctx, frags: &[Fragment]) -> i64 {
    frags.iter().map(|f| ctx.fragment_end(f)).max().unwrap_or(0)
}

fn effective_deadlines(inst: &Instance, served: u32, bonus: u32) -> Vec<i64> {
    inst.circuits
        .iter()
        .map(|c| {
            if served & (1 << c.id) == 0 {
                0
            } else if bonus & (1 << c.id) != 0 {
                // end <= 0.8 tau on integers
                4 * c.deadline / 5
            } else {
                c.deadline
            }
        })
        .collect()
}

/// Flattens the served circuits' subcircuits, enumerates split options,
/// and returns a topological order over the flattened indices.
fn build_nodes(
    ctx: &Ctx,
    served: u32,
    guard: &ExhaustiveGuard,
) -> Result<(Vec<Node>, Vec<usize>), SolveError> {
    let mut index: HashMap<(usize, usize), usize> = HashMap::new();
    let mut nodes = Vec::new();
    for c in &ctx.inst.circuits {
        if served & (1 << c.id) == 0 {
            continue;
        }
        for s in &c.subcircuits {
            index.insert((c.id, s.sub), nodes.len());
            let elig = ctx.eligible[c.id][s.sub].clone();
            let runtime = ctx.runtime(c.id, s.sub);
            let options = split_options(&elig, s.shots, guard)?;
            let parts_max = elig.len().min(2).max(1) as i64;
            let min_tail = runtime * ((s.shots + parts_max - 1) / parts_max);
            nodes.push(Node {
                circuit: c.id,
                sub: s.sub,
                runtime,
                shots: s.shots,
                preds: Vec::new(),
                has_succ: false,
                eligible: elig,
                options,
                min_tail,
            });
        }
    }
    for c in &ctx.inst.circuits {
        if served & (1 << c.id) == 0 {
            continue;
        }
        for &(p, q) in c.precedence.edges() {
            let gp = index[&(c.id, p)];
            let gq = index[&(c.id, q)];
            nodes[gq].preds.push(gp);
            nodes[gp].has_succ = true;
        }
    }
    // Kahn order over the flattened DAG (preds are the only edges).
    let n = nodes.len();
    let mut indeg = vec![0usize; n];
    for (g, node) in nodes.iter().enumerate() {
        indeg[g] = node.preds.len();
    }
    let mut topo = Vec::with_capacity(n);
    let mut queue: Vec<usize> = (0..n).filter(|&g| indeg[g] == 0).collect();
    while let Some(&g) = queue.iter().min() {
        queue.retain(|&x| x != g);
        topo.push(g);
        for (h, node) in nodes.iter().enumerate() {
            if node.preds.contains(&g) {
                indeg[h] -= 1;
                if indeg[h] == 0 {
                    queue.push(h);
                }
            }
        }
    }
    debug_assert_eq!(topo.len(), n);
    Ok((nodes, topo))
}

fn split_options(
    elig: &[usize],
    shots: i64,
    guard: &ExhaustiveGuard,
) -> Result<Vec<Vec<(usize, i64)>>, SolveError> {
    let mut opts: Vec<Vec<(usize, i64)>> = elig.iter().map(|&m| vec![(m, shots)]).collect();
    if shots >= 2 && elig.len() >= 2 {
        let g = guard
            .granularity
            .unwrap_or_else(|| if shots <= 10 { 1 } else { (shots / 4).max(2) });
        let mut firsts: Vec<i64> = (1..shots).filter(|s| s % g == 0).collect();
        // The balanced split matters most for deadlines; keep it whatever
        // the granularity.
        firsts.push(shots / 2);
        firsts.push(shots - shots / 2);
        firsts.sort_unstable();
        firsts.dedup();
        for (ai, &m1) in elig.iter().enumerate() {
            for &m2 in &elig[ai + 1..] {
                for &first in &firsts {
                    if first >= 1 && first < shots {
                        opts.push(vec![(m1, first), (m2, shots - first)]);
                        opts.push(vec![(m1, shots - first), (m2, first)]);
                    }
                }
            }
        }
        opts.sort_unstable();
        opts.dedup();
    }
    if opts.len() > guard.max_split_candidates {
        return Err(SolveError::Guard(format!(
            "{} split candidates exceed max_split_candidates {}",
            opts.len(),
            guard.max_split_candidates
        )));
    }
    Ok(opts)
}

impl<'a> Search<'a> {
    #[allow(clippy::too_many_arguments)]
    fn new(
        nodes: &'a [Node],
        topo: &'a [usize],
        qpu_class: &'a [(i64, i64)],
        inst: &Instance,
        served: u32,
        bonus: u32,
        cap: Option<i64>,
        budget: u64,
    ) -> Self {
        Search {
            nodes,
            topo,
            qpu_class,
            deadline: effective_deadlines(inst, served, bonus),
            cap,
            budget,
            memo: HashMap::new(),
            lb: vec![0; nodes.len()],
        }
    }

    fn run(&mut self) -> Outcome {
        let n = self.nodes.len();
        let mut free = vec![0i64; self.qpu_class.len()];
        let mut ends = vec![0i64; n];
        let mut scheduled: u64 = 0;
        let mut frags = Vec::with_capacity(n * 2);
        self.dfs(&mut scheduled, &mut free, &mut ends, &mut frags)
    }

    fn dfs(
        &mut self,
        scheduled: &mut u64,
        free: &mut [i64],
        ends: &mut [i64],
        frags: &mut Vec<Fragment>,
    ) -> Outcome {
        if self.budget == 0 {
            return Outcome::Budget;
        }
        self.budget -= 1;

        let n = self.nodes.len();
        if scheduled.count_ones() as usize == n {
            return Outcome::Found(frags.clone());
        }

        if self.bound_prune(*scheduled, free, ends) {
            return Outcome::Infeasible;
        }

        // Dominance: skip states not better than one already expanded with
        // the same scheduled set. The per-mask store is capped; overflow
        // states are expanded without being remembered, which only costs
        // pruning power.
        const MEMO_CAP: usize = 48;
        let key = *scheduled;
        let vector = self.dominance_vector(key, free, ends);
        if let Some(entries) = self.memo.get_mut(&key) {
            if entries
                .iter()
                .any(|e| e.iter().zip(&vector).all(|(a, b)| a <= b))
            {
                return Outcome::Infeasible;
            }
            entries.retain(|e| !vector.iter().zip(e).all(|(a, b)| a <= b));
            if entries.len() < MEMO_CAP {
                entries.push(vector);
            }
        } else {
            self.memo.insert(key, vec![vector]);
        }

        // Expand ready nodes; children ordered by earliest completion so
        // the first feasible leaf appears fast. Children that place equal
        // shares on interchangeable QPUs are explored once (dedup on the
        // placement signature, which ignores QPU identity).
        let mut raw: Vec<(usize, Vec<((i64, i64, i64), i64)>, i64, usize)> = Vec::new();
        for g in 0..n {
            if *scheduled & (1 << g) != 0 {
                continue;
            }
            let node = &self.nodes[g];
            if node.preds.iter().any(|&p| *scheduled & (1 << p) == 0) {
                continue;
            }
            let ready = node.preds.iter().map(|&p| ends[p]).max().unwrap_or(0);
            for (oi, option) in node.options.iter().enumerate() {
                let mut emax = 0;
                for &(m, y) in option {
                    let start = free[m].max(ready);
                    emax = emax.max(start + node.runtime * y);
                }
                if emax > self.deadline[node.circuit] {
                    continue;
                }
                if let Some(cap) = self.cap {
                    if emax > cap {
                        continue;
                    }
                }
                let mut sig: Vec<((i64, i64, i64), i64)> = option
                    .iter()
                    .map(|&(m, y)| ((self.qpu_class[m].0, self.qpu_class[m].1, free[m]), y))
                    .collect();
                sig.sort_unstable();
                raw.push((g, sig, emax, oi));
            }
        }
        raw.sort_unstable();
        raw.dedup_by(|a, b| a.0 == b.0 && a.1 == b.1);
        let mut children: Vec<(i64, usize, usize)> =
            raw.into_iter().map(|(g, _, emax, oi)| (emax, g, oi)).collect();
        children.sort_unstable();

        for (_, g, oi) in children {
            let node = &self.nodes[g];
            let ready = node.preds.iter().map(|&p| ends[p]).max().unwrap_or(0);
            let option = &node.options[oi];
            let mut saved_free = Vec::with_capacity(option.len());
            let mut emax = 0;
            for &(m, y) in option {
                let start = free[m].max(ready);
                let end = start + node.runtime * y;
                saved_free.push((m, free[m]));
                free[m] = end;
                emax = emax.max(end);
                frags.push(Fragment {
                    circuit: node.circuit,
                    sub: node.sub,
                    qpu: m,
                    shots: y,
                    start,
                });
            }
            ends[g] = emax;
            *scheduled |= 1 << g;

            let outcome = self.dfs(scheduled, free, ends, frags);
            match outcome {
                Outcome::Infeasible => {}
                found_or_budget => return found_or_budget,
            }

            *scheduled &= !(1 << g);
            ends[g] = 0;
            for _ in option {
                frags.pop();
            }
            for (m, old) in saved_free.into_iter().rev() {
                free[m] = old;
            }
        }
        Outcome::Infeasible
    }

    /// Admissible pruning. Longest-path lower bounds on every unscheduled
    /// subcircuit's completion (chains propagate through unscheduled
    /// predecessors) are checked against the tightened deadlines and the
    /// cap; total remaining work is checked against the room the deadlines
    /// leave across the fleet.
    fn bound_prune(&mut self, scheduled: u64, free: &[i64], ends: &[i64]) -> bool {
        let mut remaining_work: i64 = 0;
        for &g in self.topo {
            let node = &self.nodes[g];
            if scheduled & (1 << g) != 0 {
                self.lb[g] = ends[g];
                continue;
            }
            remaining_work += node.runtime * node.shots;
            let bound = match self.cap {
                Some(cap) => cap.min(self.deadline[node.circuit]),
                None => self.deadline[node.circuit],
            };
            let ready = node.preds.iter().map(|&p| self.lb[p]).max().unwrap_or(0);
            let min_free = node
                .eligible
                .iter()
                .map(|&m| free[m])
                .min()
                .unwrap_or(0);
            let lb = ready.max(min_free) + node.min_tail;
            self.lb[g] = lb;
            if lb > bound {
                return true;
            }
        }
        if remaining_work > 0 {
            // Work due by deadline D must fit in the room D leaves across
            // the fleet, for every distinct effective deadline.
            let mut due: Vec<(i64, i64)> = Vec::with_capacity(self.nodes.len());
            for (g, node) in self.nodes.iter().enumerate() {
                if scheduled & (1 << g) != 0 {
                    continue;
                }
                let bound = match self.cap {
                    Some(cap) => cap.min(self.deadline[node.circuit]),
                    None => self.deadline[node.circuit],
                };
                due.push((bound, node.runtime * node.shots));
            }
            due.sort_unstable();
            let mut work_so_far = 0i64;
            let mut idx = 0;
            while idx < due.len() {
                let d = due[idx].0;
                while idx < due.len() && due[idx].0 == d {
                    work_so_far += due[idx].1;
                    idx += 1;
                }
                let room: i64 = free.iter().map(|&f| (d - f).max(0)).sum();
                if work_so_far > room {
                    return true;
                }
            }
        }
        false
    }

    /// Dominance-comparable state: QPU frontier plus the ends of scheduled
    /// nodes that still gate an unscheduled successor.
    fn dominance_vector(&self, scheduled: u64, free: &[i64], ends: &[i64]) -> Vec<i64> {
        let mut v = free.to_vec();
        for (g, node) in self.nodes.iter().enumerate() {
            if node.has_succ && scheduled & (1 << g) != 0 {
                v.push(ends[g]);
            }
        }
        v
    }
}
