//! Gantt rendering of schedules: one lane per QPU, one rectangle per
//! fragment, deadline markers per served circuit. Output is plain SVG
//! text built deterministically, so identical inputs give identical bytes.

use dqc_sched_core::feasibility::validate;
use dqc_sched_core::model::{Fragment, Instance};
use dqc_sched_core::timeline::{completion_times, per_shot_runtime, ScheduleDocument};

const LANE_HEIGHT: i64 = 34;
const LANE_GAP: i64 = 10;
const LEFT_MARGIN: i64 = 70;
const TOP_MARGIN: i64 = 30;
const PLOT_WIDTH: f64 = 960.0;

const PALETTE: [&str; 10] = [
    "#4e79a7", "#f28e2b", "#e15759", "#76b7b2", "#59a14f", "#edc948", "#b07aa1", "#ff9da7",
    "#9c755f", "#bab0ac",
];

pub enum RenderFormat {
    Svg,
    Csv,
}

pub fn render(
    inst: &Instance,
    doc: &ScheduleDocument,
    format: RenderFormat,
) -> Result<String, String> {
    let violations = validate(inst, &doc.schedule);
    if !violations.is_empty() {
        return Err(format!(
            "schedule is infeasible ({} violations); refusing to render",
            violations.len()
        ));
    }
    match format {
        RenderFormat::Svg => Ok(render_svg(inst, doc)),
        RenderFormat::Csv => Ok(render_csv(inst, doc)),
    }
}

fn fragment_end(inst: &Instance, f: &Fragment) -> i64 {
    let sub = inst.subcircuit(f.circuit, f.sub).expect("validated");
    f.start + per_shot_runtime(sub, inst.t1(), inst.t2()) * f.shots
}

fn render_csv(inst: &Instance, doc: &ScheduleDocument) -> String {
    let mut frags = doc.schedule.fragments.clone();
    frags.sort_unstable();
    let mut out = String::from("circuit,sub,qpu,shots,start,end\n");
    for f in &frags {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            f.circuit,
            f.sub,
            f.qpu,
            f.shots,
            f.start,
            fragment_end(inst, f)
        ));
    }
    out
}

fn render_svg(inst: &Instance, doc: &ScheduleDocument) -> String {
    let mut frags = doc.schedule.fragments.clone();
    frags.sort_unstable();
    let report = completion_times(inst, &doc.schedule).expect("validated schedule");

    let served_deadlines: Vec<(usize, i64)> = inst
        .circuits
        .iter()
        .filter(|c| doc.schedule.is_served(c.id))
        .map(|c| (c.id, c.deadline))
        .collect();
    let horizon = report
        .makespan
        .max(served_deadlines.iter().map(|&(_, d)| d).max().unwrap_or(0))
        .max(1);
    let scale = PLOT_WIDTH / horizon as f64;
    let x = |t: i64| LEFT_MARGIN as f64 + t as f64 * scale;

    let lanes = inst.qpu_count() as i64;
    let height = TOP_MARGIN + lanes * (LANE_HEIGHT + LANE_GAP) + 40;
    let width = LEFT_MARGIN as f64 + PLOT_WIDTH + 40.0;

    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width:.0}\" height=\"{height}\" viewBox=\"0 0 {width:.0} {height}\">\n"
    ));
    svg.push_str("<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");

    // lanes, QPU id ascending
    for q in &inst.qpus {
        let y = TOP_MARGIN + q.id as i64 * (LANE_HEIGHT + LANE_GAP);
        svg.push_str(&format!(
            "<text x=\"8\" y=\"{}\" font-family=\"monospace\" font-size=\"12\">QPU {}</text>\n",
            y + LANE_HEIGHT / 2 + 4,
            q.id
        ));
        svg.push_str(&format!(
            "<rect x=\"{:.2}\" y=\"{y}\" width=\"{PLOT_WIDTH:.2}\" height=\"{LANE_HEIGHT}\" fill=\"#f4f4f4\" stroke=\"#cccccc\"/>\n",
            x(0)
        ));
    }

    // time ticks at quarters of the horizon
    let axis_y = TOP_MARGIN + lanes * (LANE_HEIGHT + LANE_GAP) + 14;
    for quarter in 0..=4 {
        let t = horizon * quarter / 4;
        svg.push_str(&format!(
            "<text x=\"{:.2}\" y=\"{axis_y}\" font-family=\"monospace\" font-size=\"10\" fill=\"#555555\">{t}</text>\n",
            x(t)
        ));
    }

    // fragments, colored by circuit, labeled s{circuit},{sub}
    for f in &frags {
        let y = TOP_MARGIN + f.qpu as i64 * (LANE_HEIGHT + LANE_GAP) + 3;
        let end = fragment_end(inst, f);
        let w = ((end - f.start) as f64 * scale).max(1.0);
        let color = PALETTE[f.circuit % PALETTE.len()];
        svg.push_str(&format!(
            "<rect x=\"{:.2}\" y=\"{y}\" width=\"{w:.2}\" height=\"{}\" fill=\"{color}\" stroke=\"#333333\" stroke-width=\"0.5\"><title>s{},{} shots {} [{}, {})</title></rect>\n",
            x(f.start),
            LANE_HEIGHT - 6,
            f.circuit,
            f.sub,
            f.shots,
            f.start,
            end
        ));
        svg.push_str(&format!(
            "<text x=\"{:.2}\" y=\"{}\" font-family=\"monospace\" font-size=\"9\" fill=\"white\">s{},{}</text>\n",
            x(f.start) + 2.0,
            y + 12,
            f.circuit,
            f.sub
        ));
    }

    // deadline markers for served circuits
    let marker_bottom = TOP_MARGIN + lanes * (LANE_HEIGHT + LANE_GAP);
    for &(id, deadline) in &served_deadlines {
        let color = PALETTE[id % PALETTE.len()];
        svg.push_str(&format!(
            "<line x1=\"{0:.2}\" y1=\"{1}\" x2=\"{0:.2}\" y2=\"{2}\" stroke=\"{color}\" stroke-dasharray=\"4 3\" stroke-width=\"1.5\"/>\n",
            x(deadline),
            TOP_MARGIN - 14,
            marker_bottom
        ));
        svg.push_str(&format!(
            "<text x=\"{:.2}\" y=\"{}\" font-family=\"monospace\" font-size=\"10\" fill=\"{color}\">t{id}</text>\n",
            x(deadline) + 2.0,
            TOP_MARGIN - 16
        ));
    }

    svg.push_str("</svg>\n");
    svg
}
