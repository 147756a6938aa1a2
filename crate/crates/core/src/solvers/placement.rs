//! Shared placement machinery: per-instance lookup tables, the append-only
//! availability timeline the heuristic baselines use, and the gap-aware
//! timeline the annealer uses for inserting and moving fragments.

use crate::cutter::split_shots;
use crate::model::{eligibility_set, Fragment, Instance, Schedule};
use crate::timeline::per_shot_runtime;

/// Precomputed tables every solver wants: per-shot runtimes, eligibility
/// sets, and per-circuit topological orders.
pub struct Ctx<'a> {
    pub inst: &'a Instance,
    pub runtimes: Vec<Vec<i64>>,
    pub eligible: Vec<Vec<Vec<usize>>>,
    pub topo: Vec<Vec<usize>>,
}

impl<'a> Ctx<'a> {
    pub fn new(inst: &'a Instance) -> Self {
        let runtimes = inst
            .circuits
            .iter()
            .map(|c| {
                c.subcircuits
                    .iter()
                    .map(|s| per_shot_runtime(s, inst.t1(), inst.t2()))
                    .collect()
            })
            .collect();
        let eligible = inst
            .circuits
            .iter()
            .map(|c| {
                c.subcircuits
                    .iter()
                    .map(|s| eligibility_set(s, &inst.qpus))
                    .collect()
            })
            .collect();
        let topo = inst
            .circuits
            .iter()
            .map(|c| {
                c.precedence
                    .topo_order(c.subcircuits.len())
                    .expect("instance precedence is acyclic")
            })
            .collect();
        Ctx { inst, runtimes, eligible, topo }
    }

    pub fn shots(&self, i: usize, j: usize) -> i64 {
        self.inst.circuits[i].subcircuits[j].shots
    }

    pub fn runtime(&self, i: usize, j: usize) -> i64 {
        self.runtimes[i][j]
    }

    pub fn duration(&self, i: usize, j: usize, shots: i64) -> i64 {
        self.runtime(i, j) * shots
    }

    pub fn fragment_end(&self, f: &Fragment) -> i64 {
        f.start + self.duration(f.circuit, f.sub, f.shots)
    }
}

/// Append-only per-QPU availability, the machine model behind the greedy,
/// list, and random baselines: a QPU is either free or busy until
/// `free_at`, and new fragments are appended at the end of its queue.
#[derive(Debug, Clone)]
pub struct AvailTimeline {
    pub free_at: Vec<i64>,
}

impl AvailTimeline {
    pub fn new(qpu_count: usize) -> Self {
        AvailTimeline { free_at: vec![0; qpu_count] }
    }

    /// Recomputes availability from a fragment set, used after a circuit
    /// is dropped mid-schedule.
    pub fn rebuild(&mut self, ctx: &Ctx, fragments: &[Fragment]) {
        self.free_at.iter_mut().for_each(|t| *t = 0);
        for f in fragments {
            let end = ctx.fragment_end(f);
            if end > self.free_at[f.qpu] {
                self.free_at[f.qpu] = end;
            }
        }
    }

    pub fn commit(&mut self, ctx: &Ctx, f: &Fragment) {
        let end = ctx.fragment_end(f);
        debug_assert!(f.start >= self.free_at[f.qpu]);
        self.free_at[f.qpu] = end;
    }
}

/// Even-split placement rule shared by the greedy and list baselines:
/// split across the eligible QPUs that are already free at `ready`; when
/// none are free, fall back to the single QPU that frees up first.
/// Returns the placed fragments; the caller commits them.
pub fn place_even_split(
    ctx: &Ctx,
    avail: &AvailTimeline,
    i: usize,
    j: usize,
    ready: i64,
    allow_split: bool,
) -> Vec<Fragment> {
    let eligible = &ctx.eligible[i][j];
    let shots = ctx.shots(i, j);
    let free: Vec<usize> = eligible
        .iter()
        .copied()
        .filter(|&m| avail.free_at[m] <= ready)
        .collect();
    if free.is_empty() {
        let m = *eligible
            .iter()
            .min_by_key(|&&m| (avail.free_at[m], m))
            .expect("eligibility sets are nonempty");
        return vec![Fragment {
            circuit: i,
            sub: j,
            qpu: m,
            shots,
            start: avail.free_at[m].max(ready),
        }];
    }
    let parts = if allow_split {
        free.len().min(shots as usize).max(1)
    } else {
        1
    };
    let shares = split_shots(shots, parts).expect("parts <= shots");
    free.iter()
        .take(parts)
        .zip(shares)
        .map(|(&m, share)| Fragment { circuit: i, sub: j, qpu: m, shots: share, start: ready })
        .collect()
}

/// Gap-aware per-QPU occupancy used by the annealer: fragments may be
/// inserted into idle windows between existing ones.
#[derive(Debug, Clone, Default)]
pub struct GapTimeline {
    busy: Vec<Vec<(i64, i64)>>,
}

impl GapTimeline {
    pub fn new(qpu_count: usize) -> Self {
        GapTimeline { busy: vec![Vec::new(); qpu_count] }
    }

    /// Builds occupancy from the served fragments of a schedule.
    pub fn from_schedule(ctx: &Ctx, sched: &Schedule) -> Self {
        let mut tl = GapTimeline::new(ctx.inst.qpu_count());
        for f in &sched.fragments {
            if sched.is_served(f.circuit) {
                tl.insert(f.qpu, f.start, ctx.fragment_end(f));
            }
        }
        tl
    }

    /// Earliest start `>= ready` at which a window of `dur` fits on `qpu`.
    pub fn earliest_fit(&self, qpu: usize, ready: i64, dur: i64) -> i64 {
        let mut candidate = ready;
        for &(start, end) in &self.busy[qpu] {
            if candidate + dur <= start {
                break;
            }
            if end > candidate {
                candidate = end;
            }
        }
        candidate
    }

    pub fn insert(&mut self, qpu: usize, start: i64, end: i64) {
        let lane = &mut self.busy[qpu];
        let pos = lane.partition_point(|&(s, _)| s < start);
        lane.insert(pos, (start, end));
    }

    /// Removes an exact interval previously inserted.
    pub fn remove(&mut self, qpu: usize, start: i64, end: i64) {
        let lane = &mut self.busy[qpu];
        if let Some(pos) = lane.iter().position(|&iv| iv == (start, end)) {
            lane.remove(pos);
        }
    }

    pub fn remove_fragments(&mut self, ctx: &Ctx, fragments: &[Fragment]) {
        for f in fragments {
            self.remove(f.qpu, f.start, ctx.fragment_end(f));
        }
    }
}

/// Inserts circuit `i` into the timeline, trying every split arity for
/// each subcircuit (in topological order) and keeping the one finishing
/// first. Returns the new fragments if the circuit meets its deadline
/// with everything else untouched; on failure the timeline is unchanged.
pub fn insert_circuit(
    ctx: &Ctx,
    timeline: &mut GapTimeline,
    i: usize,
    allow_split: bool,
) -> Option<Vec<Fragment>> {
    let circuit = &ctx.inst.circuits[i];
    let k = circuit.subcircuits.len();
    let mut sub_end = vec![0i64; k];
    let mut placed: Vec<Fragment> = Vec::new();

    for &j in &ctx.topo[i] {
        let ready = circuit
            .precedence
            .predecessors(j)
            .map(|p| sub_end[p])
            .max()
            .unwrap_or(0);
        let frags = best_subcircuit_placement(ctx, timeline, i, j, ready, allow_split);
        let mut end = 0;
        for f in &frags {
            let fe = ctx.fragment_end(f);
            timeline.insert(f.qpu, f.start, fe);
            end = end.max(fe);
        }
        sub_end[j] = end;
        placed.extend(frags);
    }

    let completion = sub_end.iter().copied().max().unwrap_or(0);
    if completion <= circuit.deadline {
        Some(placed)
    } else {
        timeline.remove_fragments(ctx, &placed);
        None
    }
}

/// Left-justifies a feasible schedule: every fragment is re-placed on its
/// current QPU at the earliest gap its predecessors allow, processing
/// fragments in start order. Ends never increase, so feasibility is
/// preserved and the makespan can only shrink.
pub fn repack(ctx: &Ctx, sched: &Schedule) -> Schedule {
    let mut order: Vec<usize> = (0..sched.fragments.len())
        .filter(|&x| sched.is_served(sched.fragments[x].circuit))
        .collect();
    order.sort_by_key(|&x| {
        let f = &sched.fragments[x];
        (f.start, f.circuit, f.sub, f.qpu)
    });

    let mut timeline = GapTimeline::new(ctx.inst.qpu_count());
    let mut sub_end: Vec<Vec<i64>> = ctx
        .inst
        .circuits
        .iter()
        .map(|c| vec![0i64; c.subcircuits.len()])
        .collect();
    let mut out = sched.clone();
    for x in order {
        let f = out.fragments[x];
        let ready = ctx.inst.circuits[f.circuit]
            .precedence
            .predecessors(f.sub)
            .map(|p| sub_end[f.circuit][p])
            .max()
            .unwrap_or(0);
        let dur = ctx.duration(f.circuit, f.sub, f.shots);
        let start = timeline.earliest_fit(f.qpu, ready, dur);
        debug_assert!(start <= f.start, "left shift never delays a fragment");
        timeline.insert(f.qpu, start, start + dur);
        out.fragments[x].start = start;
        let end = start + dur;
        if end > sub_end[f.circuit][f.sub] {
            sub_end[f.circuit][f.sub] = end;
        }
    }
    out
}

/// Best placement of one subcircuit at `ready`. Split-capable placement
/// water-fills the eligible QPUs: binary-search the smallest horizon whose
/// per-QPU room (from each QPU's earliest slot) covers the shot count,
/// then hand out shares earliest-slot-first. Without splitting, the whole
/// job goes to the QPU where it ends first.
pub(super) fn best_subcircuit_placement(
    ctx: &Ctx,
    timeline: &GapTimeline,
    i: usize,
    j: usize,
    ready: i64,
    allow_split: bool,
) -> Vec<Fragment> {
    let eligible = &ctx.eligible[i][j];
    let shots = ctx.shots(i, j);
    let runtime = ctx.runtime(i, j);

    // Zero-runtime subcircuits occupy no time anywhere.
    if runtime == 0 {
        let m = eligible[0];
        return vec![Fragment { circuit: i, sub: j, qpu: m, shots, start: ready }];
    }

    if !allow_split {
        let m = *eligible
            .iter()
            .min_by_key(|&&m| (timeline.earliest_fit(m, ready, runtime * shots), m))
            .expect("eligibility sets are nonempty");
        let start = timeline.earliest_fit(m, ready, runtime * shots);
        return vec![Fragment { circuit: i, sub: j, qpu: m, shots, start }];
    }

    // Anchor each QPU at the start of its first usable slot (probed with a
    // one-shot window) and water-fill against a common horizon.
    let mut anchors: Vec<(i64, usize)> = eligible
        .iter()
        .map(|&m| (timeline.earliest_fit(m, ready, runtime), m))
        .collect();
    anchors.sort_unstable();

    let capacity = |horizon: i64| -> i64 {
        anchors
            .iter()
            .map(|&(s, _)| ((horizon - s) / runtime).max(0))
            .sum()
    };
    let mut lo = anchors[0].0 + runtime;
    let mut hi = anchors[0].0 + runtime * shots;
    while lo < hi {
        let mid = lo + (hi - lo) / 2;
        if capacity(mid) >= shots {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    let horizon = lo;

    let mut remaining = shots;
    let mut frags = Vec::new();
    for &(slot, m) in &anchors {
        if remaining == 0 {
            break;
        }
        let share = (((horizon - slot) / runtime).max(0)).min(remaining);
        if share == 0 {
            continue;
        }
        // Re-fit with the real duration; a too-small gap pushes the
        // fragment later, which stays feasible.
        let start = timeline.earliest_fit(m, ready, runtime * share);
        frags.push(Fragment { circuit: i, sub: j, qpu: m, shots: share, start });
        remaining -= share;
    }
    if remaining > 0 {
        // Horizon search maxed out; dump the remainder on the first anchor.
        if let Some(f) = frags.first_mut() {
            f.shots += remaining;
            f.start = timeline.earliest_fit(f.qpu, ready, runtime * f.shots);
        } else {
            let (_, m) = anchors[0];
            let start = timeline.earliest_fit(m, ready, runtime * shots);
            frags.push(Fragment { circuit: i, sub: j, qpu: m, shots, start });
        }
    }
    frags
}
