//! Heuristic baselines: earliest-deadline greedy, classic list scheduling,
//! and a randomized scheduler. All three use the append-only availability
//! machine model and drop circuits whose placement misses the deadline.

use std::time::Instant;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::cutter::split_shots;
use crate::model::{Fragment, Instance, Schedule};

use super::placement::{place_even_split, AvailTimeline, Ctx};
use super::{finish, SolveResult, SolverConfig};

/// Earliest-deadline-first: place whole circuits in deadline order, even
/// splits across free eligible QPUs, and skip any circuit whose trial
/// placement misses its deadline.
pub(super) fn greedy(inst: &Instance, cfg: &SolverConfig) -> SolveResult {
    let started = Instant::now();
    let ctx = Ctx::new(inst);
    let alpha = cfg.effective_alpha(inst);
    let schedule = greedy_schedule(&ctx, alpha, true);
    finish(inst, schedule, alpha, None, started)
}

/// The greedy construction itself, reused as the annealer's warm start
/// (split-free when the annealer runs shot-agnostic).
pub(super) fn greedy_schedule(
    ctx: &Ctx,
    alpha: crate::rational::Rational,
    allow_split: bool,
) -> Schedule {
    let inst = ctx.inst;
    let mut order: Vec<usize> = (0..inst.circuit_count()).collect();
    order.sort_by_key(|&i| (inst.circuits[i].deadline, i));

    let mut avail = AvailTimeline::new(inst.qpu_count());
    let mut schedule = Schedule::empty(inst.circuit_count(), alpha);
    for &i in &order {
        if let Some((frags, trial)) = try_place_circuit(ctx, &avail, i, allow_split) {
            avail = trial;
            schedule.fragments.extend(frags);
            schedule.served[i] = true;
        }
    }
    schedule
}

/// Places all subcircuits of circuit `i` (topological order, even-split
/// rule) on a scratch copy of the availability timeline. Returns the
/// fragments and the updated timeline when the deadline is met.
fn try_place_circuit(
    ctx: &Ctx,
    avail: &AvailTimeline,
    i: usize,
    allow_split: bool,
) -> Option<(Vec<Fragment>, AvailTimeline)> {
    let circuit = &ctx.inst.circuits[i];
    let mut trial = avail.clone();
    let mut sub_end = vec![0i64; circuit.subcircuits.len()];
    let mut frags = Vec::new();
    for &j in &ctx.topo[i] {
        let ready = circuit
            .precedence
            .predecessors(j)
            .map(|p| sub_end[p])
            .max()
            .unwrap_or(0);
        let placed = place_even_split(ctx, &trial, i, j, ready, allow_split);
        for f in &placed {
            trial.commit(ctx, f);
            sub_end[j] = sub_end[j].max(ctx.fragment_end(f));
        }
        frags.extend(placed);
    }
    let completion = sub_end.into_iter().max().unwrap_or(0);
    (completion <= circuit.deadline).then_some((frags, trial))
}

/// Classic list scheduling: keep a ready set across all circuits, always
/// place the ready subcircuit that can start earliest, and drop a circuit
/// the moment one of its subcircuits ends past the deadline.
pub(super) fn list(inst: &Instance, cfg: &SolverConfig) -> SolveResult {
    let started = Instant::now();
    let ctx = Ctx::new(inst);
    let alpha = cfg.effective_alpha(inst);
    let mut state = DispatchState::new(&ctx, alpha);

    while let Some(candidates) = state.ready_candidates(&ctx) {
        // Earliest achievable start wins; ties go to the tighter deadline.
        let (i, j) = candidates
            .into_iter()
            .min_by_key(|&(i, j)| {
                let ready = state.ready_time(&ctx, i, j);
                let placed = place_even_split(&ctx, &state.avail, i, j, ready, true);
                let start = placed.iter().map(|f| f.start).min().unwrap_or(ready);
                (start, ctx.inst.circuits[i].deadline, i, j)
            })
            .expect("candidates nonempty");
        let ready = state.ready_time(&ctx, i, j);
        let placed = place_even_split(&ctx, &state.avail, i, j, ready, true);
        state.commit(&ctx, i, j, placed);
    }
    finish(inst, state.into_schedule(), alpha, None, started)
}

/// Random order, random eligible QPUs, stochastic split arity.
/// Deterministic for a fixed seed.
pub(super) fn random(inst: &Instance, cfg: &SolverConfig) -> SolveResult {
    let started = Instant::now();
    let ctx = Ctx::new(inst);
    let alpha = cfg.effective_alpha(inst);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut state = DispatchState::new(&ctx, alpha);

    while let Some(candidates) = state.ready_candidates(&ctx) {
        let &(i, j) = candidates
            .get(rng.gen_range(0..candidates.len()))
            .expect("candidates nonempty");
        let ready = state.ready_time(&ctx, i, j);
        let eligible = &ctx.eligible[i][j];
        let shots = ctx.shots(i, j);
        let parts = rng.gen_range(1..=eligible.len().min(shots as usize).max(1));
        let mut chosen = eligible.clone();
        chosen.shuffle(&mut rng);
        chosen.truncate(parts);
        let shares = split_shots(shots, parts).expect("parts bounded by shots");
        let placed: Vec<Fragment> = chosen
            .into_iter()
            .zip(shares)
            .map(|(m, share)| Fragment {
                circuit: i,
                sub: j,
                qpu: m,
                shots: share,
                start: state.avail.free_at[m].max(ready),
            })
            .collect();
        state.commit(&ctx, i, j, placed);
    }
    finish(inst, state.into_schedule(), alpha, None, started)
}

/// Bookkeeping shared by the interleaving dispatchers (list, random):
/// which subcircuits are placed, which circuits are dropped, and the
/// availability timeline with drop-rollback.
struct DispatchState {
    avail: AvailTimeline,
    placed: Vec<Vec<bool>>,
    sub_end: Vec<Vec<i64>>,
    dropped: Vec<bool>,
    fragments: Vec<Fragment>,
    schedule: Schedule,
}

impl DispatchState {
    fn new(ctx: &Ctx, alpha: crate::rational::Rational) -> Self {
        DispatchState {
            avail: AvailTimeline::new(ctx.inst.qpu_count()),
            placed: ctx
                .inst
                .circuits
                .iter()
                .map(|c| vec![false; c.subcircuits.len()])
                .collect(),
            sub_end: ctx
                .inst
                .circuits
                .iter()
                .map(|c| vec![0i64; c.subcircuits.len()])
                .collect(),
            dropped: vec![false; ctx.inst.circuit_count()],
            fragments: Vec::new(),
            schedule: Schedule::empty(ctx.inst.circuit_count(), alpha),
        }
    }

    /// Subcircuits of live circuits whose predecessors are all placed.
    /// `None` once nothing remains.
    fn ready_candidates(&self, ctx: &Ctx) -> Option<Vec<(usize, usize)>> {
        let mut out = Vec::new();
        for c in &ctx.inst.circuits {
            if self.dropped[c.id] {
                continue;
            }
            for s in &c.subcircuits {
                if self.placed[c.id][s.sub] {
                    continue;
                }
                if c.precedence
                    .predecessors(s.sub)
                    .all(|p| self.placed[c.id][p])
                {
                    out.push((c.id, s.sub));
                }
            }
        }
        (!out.is_empty()).then_some(out)
    }

    fn ready_time(&self, ctx: &Ctx, i: usize, j: usize) -> i64 {
        ctx.inst.circuits[i]
            .precedence
            .predecessors(j)
            .map(|p| self.sub_end[i][p])
            .max()
            .unwrap_or(0)
    }

    fn commit(&mut self, ctx: &Ctx, i: usize, j: usize, placed: Vec<Fragment>) {
        let mut end = 0;
        for f in &placed {
            self.avail.commit(ctx, f);
            end = end.max(ctx.fragment_end(f));
        }
        self.fragments.extend(placed);
        self.placed[i][j] = true;
        self.sub_end[i][j] = end;

        if end > ctx.inst.circuits[i].deadline {
            self.drop_circuit(ctx, i);
        }
    }

    /// Removes a late circuit: its fragments vanish and availability is
    /// rebuilt from what remains (gaps left behind stay unused; this is a
    /// baseline, not a packer).
    fn drop_circuit(&mut self, ctx: &Ctx, i: usize) {
        self.dropped[i] = true;
        self.placed[i].iter_mut().for_each(|p| *p = true);
        self.fragments.retain(|f| f.circuit != i);
        self.avail.rebuild(ctx, &self.fragments);
    }

    fn into_schedule(mut self) -> Schedule {
        for (i, dropped) in self.dropped.iter().enumerate() {
            self.schedule.served[i] = !dropped;
        }
        self.schedule.fragments = self.fragments;
        self.schedule
    }
}
