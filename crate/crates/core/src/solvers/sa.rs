//! Simulated annealing over (served set, shot splits, start times).
//!
//! Neighbors are generated by priority: grow the served set when possible,
//! otherwise swap a served circuit for a dropped one, otherwise perturb
//! the current layout (shift, relocate, split, merge). Every candidate is
//! gated through the feasibility validator before the Metropolis rule sees
//! it, and the best feasible solution ever accepted is returned.

use std::time::Instant;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::feasibility::{score_unchecked, validate, Metrics};
use crate::model::{Fragment, Instance, Schedule};
use crate::rational::Rational;
use crate::timeline::completion_times;

use super::placement::{best_subcircuit_placement, insert_circuit, repack, Ctx, GapTimeline};
use super::{finish, SolveError, SolveResult, SolverConfig};

const SWAP_ATTEMPTS: usize = 6;
const LOCAL_ATTEMPTS: usize = 8;

/// Metropolis acceptance: improving moves always pass, worsening moves
/// pass when `exp(delta / tau)` beats the uniform draw `r`.
pub fn metropolis_accept(delta: f64, tau: f64, r: f64) -> bool {
    delta >= 0.0 || (delta / tau).exp() > r
}

pub(super) fn anneal(
    inst: &Instance,
    cfg: &SolverConfig,
    initial: Option<Schedule>,
) -> Result<SolveResult, SolveError> {
    let started = Instant::now();
    let ctx = Ctx::new(inst);
    let alpha = cfg.effective_alpha(inst);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    let mut current = match initial {
        Some(mut s) => {
            let violations = validate(inst, &s);
            if !violations.is_empty() {
                return Err(SolveError::BadInitial(format!(
                    "{:?}: {}",
                    violations[0].kind, violations[0].detail
                )));
            }
            s.objective_weight = alpha;
            s
        }
        // Earliest-deadline warm start; the anneal can only improve on it
        // since the incumbent best is tracked from here. Split-capable
        // mode may start from either construction (split-free schedules
        // are inside its search space too), so it takes the better one.
        None => {
            let unsplit = super::baselines::greedy_schedule(&ctx, alpha, false);
            if cfg.allow_shot_split {
                let split = super::baselines::greedy_schedule(&ctx, alpha, true);
                better_schedule(inst, alpha, split, unsplit)
            } else {
                unsplit
            }
        }
    };
    debug_assert!(validate(inst, &current).is_empty());
    let mut cur_metrics = metrics_of(inst, &current, alpha);
    let mut best = current.clone();
    let mut best_metrics = cur_metrics.clone();

    let mut trace = Vec::new();
    let mut tau = cfg.sa.tau0;
    'cooling: while tau > cfg.sa.tau_min {
        for _ in 0..cfg.sa.iters_per_temp {
            if let Some(budget) = cfg.time_budget_ms {
                if started.elapsed().as_millis() as u64 >= budget {
                    break 'cooling;
                }
            }
            let Some(neighbor) = propose(&ctx, &current, cfg.allow_shot_split, &mut rng) else {
                continue;
            };
            if !validate(inst, &neighbor).is_empty() {
                continue;
            }
            let neighbor_metrics = metrics_of(inst, &neighbor, alpha);
            let improving = neighbor_metrics.objective >= cur_metrics.objective;
            let delta =
                (neighbor_metrics.objective - cur_metrics.objective).to_f64();
            let r: f64 = rng.gen();
            if improving || metropolis_accept(delta, tau, r) {
                current = neighbor;
                cur_metrics = neighbor_metrics;
                if cur_metrics.objective > best_metrics.objective
                    || (cur_metrics.objective == best_metrics.objective
                        && cur_metrics.makespan < best_metrics.makespan)
                {
                    best = current.clone();
                    best_metrics = cur_metrics.clone();
                }
            }
        }
        trace.push((tau, best_metrics.objective.to_f64()));
        tau *= cfg.sa.cooling;
    }

    best = polish(&ctx, inst, best, alpha, cfg.allow_shot_split);

    Ok(finish(inst, best, alpha, Some(trace), started))
}

/// Deterministic descent after cooling: left-justify, re-place each
/// subcircuit where it finishes earliest, and try whole-schedule rebuilds
/// in a few fixed circuit orders, keeping strict lexicographic
/// improvements in (objective, makespan). The annealer owns exploration;
/// this pass only removes slack the random walk left behind.
fn polish(
    ctx: &Ctx,
    inst: &Instance,
    mut best: Schedule,
    alpha: Rational,
    allow_split: bool,
) -> Schedule {
    let mut best_metrics = metrics_of(inst, &best, alpha);

    let consider = |best: &mut Schedule,
                        best_metrics: &mut Metrics,
                        candidate: Schedule|
     -> bool {
        if candidate == *best || !validate(inst, &candidate).is_empty() {
            return false;
        }
        let m = metrics_of(inst, &candidate, alpha);
        if m.objective > best_metrics.objective
            || (m.objective == best_metrics.objective && m.makespan < best_metrics.makespan)
        {
            *best = candidate;
            *best_metrics = m;
            true
        } else {
            false
        }
    };

    // Whole-schedule rebuilds: insert the served circuits into an empty
    // timeline in a few deterministic orders.
    let served: Vec<usize> = (0..inst.circuit_count())
        .filter(|&i| best.is_served(i))
        .collect();
    let work_of = |i: usize| -> i64 {
        inst.circuits[i]
            .subcircuits
            .iter()
            .map(|s| ctx.duration(i, s.sub, s.shots))
            .sum()
    };
    let mut orders: Vec<Vec<usize>> = Vec::new();
    let mut by_deadline = served.clone();
    by_deadline.sort_by_key(|&i| (inst.circuits[i].deadline, i));
    orders.push(by_deadline);
    let mut by_work = served.clone();
    by_work.sort_by_key(|&i| (-work_of(i), i));
    orders.push(by_work);
    for order in orders {
        let mut candidate = Schedule::empty(inst.circuit_count(), alpha);
        let mut timeline = GapTimeline::new(inst.qpu_count());
        let mut complete = true;
        for &i in &order {
            match insert_circuit(ctx, &mut timeline, i, allow_split) {
                Some(frags) => {
                    candidate.served[i] = true;
                    candidate.fragments.extend(frags);
                }
                None => {
                    complete = false;
                    break;
                }
            }
        }
        if complete {
            consider(&mut best, &mut best_metrics, candidate);
        }
    }

    for _ in 0..40 {
        let mut improved = false;

        let packed = repack(ctx, &best);
        improved |= consider(&mut best, &mut best_metrics, packed);

        // Steepest-descent sweep: re-place every served subcircuit.
        let mut subs: Vec<(usize, usize)> = best
            .fragments
            .iter()
            .filter(|f| best.is_served(f.circuit))
            .map(|f| (f.circuit, f.sub))
            .collect();
        subs.sort_unstable();
        subs.dedup();
        // Latest-ending first so the critical path is attacked first.
        let ends = sub_ends(ctx, &best);
        subs.sort_by_key(|&(i, j)| (-ends[i][j], i, j));
        for (ci, cj) in subs {
            let mut candidate = best.clone();
            candidate
                .fragments
                .retain(|f| !(f.circuit == ci && f.sub == cj));
            let timeline = GapTimeline::from_schedule(ctx, &candidate);
            let ends = sub_ends(ctx, &candidate);
            let ready = ready_time(ctx, &ends, ci, cj);
            let frags = best_subcircuit_placement(ctx, &timeline, ci, cj, ready, allow_split);
            candidate.fragments.extend(frags);
            improved |= consider(&mut best, &mut best_metrics, candidate);
        }

        if !improved {
            break;
        }
    }
    best
}

fn metrics_of(inst: &Instance, sched: &Schedule, alpha: Rational) -> Metrics {
    let report = completion_times(inst, sched).expect("validated schedule");
    score_unchecked(inst, sched, alpha, &report)
}

fn better_schedule(inst: &Instance, alpha: Rational, a: Schedule, b: Schedule) -> Schedule {
    let ma = metrics_of(inst, &a, alpha);
    let mb = metrics_of(inst, &b, alpha);
    if mb.objective > ma.objective
        || (mb.objective == ma.objective && mb.makespan < ma.makespan)
    {
        b
    } else {
        a
    }
}

/// One neighbor, by priority: add a circuit, else swap one in, else a
/// local move. `None` when no structurally sound candidate was found.
fn propose(
    ctx: &Ctx,
    cur: &Schedule,
    allow_split: bool,
    rng: &mut ChaCha8Rng,
) -> Option<Schedule> {
    let unserved: Vec<usize> = (0..ctx.inst.circuit_count())
        .filter(|&i| !cur.is_served(i))
        .collect();

    if !unserved.is_empty() {
        // (1) add: first unserved circuit (in random order) that fits.
        let mut order = unserved.clone();
        order.shuffle(rng);
        let mut timeline = GapTimeline::from_schedule(ctx, cur);
        for &i in &order {
            if let Some(frags) = insert_circuit(ctx, &mut timeline, i, allow_split) {
                let mut next = cur.clone();
                next.served[i] = true;
                next.fragments.extend(frags);
                return Some(next);
            }
        }

        // (2) swap a served circuit out, a dropped one in; occasionally a
        // wider rebuild (drop two, repack, readd greedily) to escape
        // packings no single swap can fix.
        let served: Vec<usize> = (0..ctx.inst.circuit_count())
            .filter(|&i| cur.is_served(i))
            .collect();
        if !served.is_empty() {
            if served.len() >= 2 && rng.gen_bool(0.25) {
                if let Some(next) = rebuild_move(ctx, cur, &served, allow_split, rng) {
                    return Some(next);
                }
            }
            let mut pairs: Vec<(usize, usize)> = served
                .iter()
                .flat_map(|&out| unserved.iter().map(move |&inn| (out, inn)))
                .collect();
            pairs.shuffle(rng);
            for (out, inn) in pairs.into_iter().take(SWAP_ATTEMPTS) {
                let mut next = cur.clone();
                next.served[out] = false;
                next.fragments.retain(|f| f.circuit != out);
                let mut timeline = GapTimeline::from_schedule(ctx, &next);
                if let Some(frags) = insert_circuit(ctx, &mut timeline, inn, allow_split) {
                    next.served[inn] = true;
                    next.fragments.extend(frags);
                    return Some(next);
                }
            }
        }
    }

    local_move(ctx, cur, allow_split, rng)
}

/// Ruin-and-recreate: drop two random served circuits, compact what is
/// left, then re-add as many circuits as fit, dropped ones first.
fn rebuild_move(
    ctx: &Ctx,
    cur: &Schedule,
    served: &[usize],
    allow_split: bool,
    rng: &mut ChaCha8Rng,
) -> Option<Schedule> {
    let mut victims = served.to_vec();
    victims.shuffle(rng);
    victims.truncate(2);
    let mut next = cur.clone();
    for &v in &victims {
        next.served[v] = false;
        next.fragments.retain(|f| f.circuit != v);
    }
    next = repack(ctx, &next);

    let mut missing: Vec<usize> = (0..ctx.inst.circuit_count())
        .filter(|&i| !next.is_served(i))
        .collect();
    missing.shuffle(rng);
    let mut timeline = GapTimeline::from_schedule(ctx, &next);
    let mut added = 0usize;
    for &i in &missing {
        if let Some(frags) = insert_circuit(ctx, &mut timeline, i, allow_split) {
            next.served[i] = true;
            next.fragments.extend(frags);
            added += 1;
        }
    }
    // The Metropolis rule decides whether a net loss survives.
    (added > 0).then_some(next)
}

/// Layout perturbations on (Y, B): shift a fragment, move it to another
/// QPU, split shots off to a second QPU, or merge two fragments of one
/// subcircuit. Structural soundness only; the validator has the last word.
fn local_move(
    ctx: &Ctx,
    cur: &Schedule,
    allow_split: bool,
    rng: &mut ChaCha8Rng,
) -> Option<Schedule> {
    if cur.fragments.is_empty() {
        return None;
    }
    let ends = sub_ends(ctx, cur);

    for _ in 0..LOCAL_ATTEMPTS {
        let idx = rng.gen_range(0..cur.fragments.len());
        let f = cur.fragments[idx];
        let ready = ready_time(ctx, &ends, f.circuit, f.sub);
        let dur = ctx.duration(f.circuit, f.sub, f.shots);

        match rng.gen_range(0..8u8) {
            // Compact the whole layout; an equal-objective move the
            // Metropolis rule always accepts.
            4 | 5 => {
                let next = repack(ctx, cur);
                if next == *cur {
                    continue;
                }
                return Some(next);
            }
            // Re-place one served circuit from scratch around the others.
            6 | 7 => {
                let served: Vec<usize> = (0..ctx.inst.circuit_count())
                    .filter(|&i| cur.is_served(i))
                    .collect();
                if served.is_empty() {
                    continue;
                }
                let victim = served[rng.gen_range(0..served.len())];
                let mut next = cur.clone();
                next.served[victim] = false;
                next.fragments.retain(|x| x.circuit != victim);
                next = repack(ctx, &next);
                let mut timeline = GapTimeline::from_schedule(ctx, &next);
                let Some(frags) = insert_circuit(ctx, &mut timeline, victim, allow_split) else {
                    continue;
                };
                next.served[victim] = true;
                next.fragments.extend(frags);
                return Some(next);
            }
            // Pull the fragment as early as its QPU and predecessors allow.
            0 => {
                let mut timeline = GapTimeline::from_schedule(ctx, cur);
                timeline.remove(f.qpu, f.start, ctx.fragment_end(&f));
                let start = timeline.earliest_fit(f.qpu, ready, dur);
                if start == f.start {
                    continue;
                }
                let mut next = cur.clone();
                next.fragments[idx].start = start;
                return Some(next);
            }
            // Push it later into a free window.
            1 => {
                let jump = rng.gen_range(1..=dur.max(1));
                let mut timeline = GapTimeline::from_schedule(ctx, cur);
                timeline.remove(f.qpu, f.start, ctx.fragment_end(&f));
                let start = timeline.earliest_fit(f.qpu, f.start + jump, dur);
                let mut next = cur.clone();
                next.fragments[idx].start = start;
                return Some(next);
            }
            // Move the whole fragment to another eligible QPU.
            2 => {
                let others: Vec<usize> = ctx.eligible[f.circuit][f.sub]
                    .iter()
                    .copied()
                    .filter(|&m| m != f.qpu)
                    .collect();
                if others.is_empty() {
                    continue;
                }
                let target = others[rng.gen_range(0..others.len())];
                let mut timeline = GapTimeline::from_schedule(ctx, cur);
                timeline.remove(f.qpu, f.start, ctx.fragment_end(&f));
                let start = timeline.earliest_fit(target, ready, dur);
                let mut next = cur.clone();
                next.fragments[idx].qpu = target;
                next.fragments[idx].start = start;
                return Some(next);
            }
            // Split shots off to a QPU this subcircuit is not yet on, or
            // merge two of its fragments back together.
            _ => {
                let siblings: Vec<usize> = (0..cur.fragments.len())
                    .filter(|&x| {
                        cur.fragments[x].circuit == f.circuit && cur.fragments[x].sub == f.sub
                    })
                    .collect();
                let merge = siblings.len() > 1 && (!allow_split || rng.gen_bool(0.5));
                if merge {
                    let a = siblings[rng.gen_range(0..siblings.len())];
                    let b = *siblings.iter().filter(|&&x| x != a).min_by_key(|&&x| x)?;
                    let (keep, gone) = (a.min(b), a.max(b));
                    let mut next = cur.clone();
                    let gone_frag = next.fragments.remove(gone);
                    let mut timeline = GapTimeline::from_schedule(ctx, &next);
                    let kept = next.fragments[keep];
                    timeline.remove(kept.qpu, kept.start, ctx.fragment_end(&kept));
                    let shots = kept.shots + gone_frag.shots;
                    let start = timeline.earliest_fit(
                        kept.qpu,
                        ready,
                        ctx.duration(f.circuit, f.sub, shots),
                    );
                    next.fragments[keep].shots = shots;
                    next.fragments[keep].start = start;
                    return Some(next);
                }
                if !allow_split || f.shots < 2 {
                    continue;
                }
                let hosts: Vec<usize> = cur
                    .fragments_of(f.circuit, f.sub)
                    .map(|x| x.qpu)
                    .collect();
                let targets: Vec<usize> = ctx.eligible[f.circuit][f.sub]
                    .iter()
                    .copied()
                    .filter(|m| !hosts.contains(m))
                    .collect();
                if targets.is_empty() {
                    continue;
                }
                let target = targets[rng.gen_range(0..targets.len())];
                let moved = rng.gen_range(1..f.shots);
                let timeline = GapTimeline::from_schedule(ctx, cur);
                let start = timeline.earliest_fit(
                    target,
                    ready,
                    ctx.duration(f.circuit, f.sub, moved),
                );
                let mut next = cur.clone();
                next.fragments[idx].shots -= moved;
                next.fragments.push(Fragment {
                    circuit: f.circuit,
                    sub: f.sub,
                    qpu: target,
                    shots: moved,
                    start,
                });
                return Some(next);
            }
        }
    }
    None
}

/// Max fragment end per subcircuit in the current schedule.
fn sub_ends(ctx: &Ctx, sched: &Schedule) -> Vec<Vec<i64>> {
    let mut ends: Vec<Vec<i64>> = ctx
        .inst
        .circuits
        .iter()
        .map(|c| vec![0i64; c.subcircuits.len()])
        .collect();
    for f in &sched.fragments {
        let e = ctx.fragment_end(f);
        if e > ends[f.circuit][f.sub] {
            ends[f.circuit][f.sub] = e;
        }
    }
    ends
}

fn ready_time(ctx: &Ctx, ends: &[Vec<i64>], i: usize, j: usize) -> i64 {
    ctx.inst.circuits[i]
        .precedence
        .predecessors(j)
        .map(|p| ends[i][p])
        .max()
        .unwrap_or(0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn metropolis_contract() {
        // Nonnegative deltas always accepted, whatever the draw.
        for r in [0.0, 0.5, 0.999_999] {
            assert!(metropolis_accept(0.0, 1.0, r));
            assert!(metropolis_accept(2.5, 0.001, r));
        }
        // Worsening moves hinge on the draw: exp(-1) ~ 0.3679.
        assert!(metropolis_accept(-1.0, 1.0, 0.2));
        assert!(!metropolis_accept(-1.0, 1.0, 0.5));
        // Colder temperature, lower acceptance.
        assert!(!metropolis_accept(-1.0, 0.1, 0.2));
    }
}
