//! Renders trajectory episodes as static SVG scenes: rod start and end
//! poses, the rod-center path, final robot positions, and the target when
//! the task has one.

use crate::trajectory::read_trajectories;
use anyhow::Result;
use microswarm::trainer::StepRecord;
use std::fmt::Write as _;
use std::path::Path;

const ROBOT_R: f64 = 3.0;
const ROD_HALF: f64 = 50.0;

pub fn run_replay(input: &Path, out_dir: &Path) -> Result<()> {
    let file = read_trajectories(input)?;
    std::fs::create_dir_all(out_dir)?;
    let mut i = 0;
    let mut count = 0;
    while i < file.steps.len() {
        let episode = file.steps[i].episode;
        let mut j = i;
        while j < file.steps.len() && file.steps[j].episode == episode {
            j += 1;
        }
        let svg = render_episode(&file.steps[i..j]);
        std::fs::write(out_dir.join(format!("replay_ep{episode}.svg")), svg)?;
        count += 1;
        i = j;
    }
    println!("{count} episode scene(s) -> {}", out_dir.display());
    Ok(())
}

fn rod_line(out: &mut String, pose: [f64; 3], color: &str, width: f64, dash: &str) {
    let [x, y, th] = pose;
    let (dx, dy) = (th.cos() * ROD_HALF, th.sin() * ROD_HALF);
    let _ = writeln!(
        out,
        "<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"{color}\" \
         stroke-width=\"{width}\" stroke-linecap=\"round\"{dash}/>",
        x - dx,
        y - dy,
        x + dx,
        y + dy
    );
}

fn render_episode(recs: &[StepRecord]) -> String {
    // world coordinates map 1:1 to svg user units; y grows downward in svg
    // but the scene is chirality-faithful enough for inspection
    let first = &recs[0];
    let last = recs.last().unwrap();
    let (w, h) = (620.0, 740.0);
    let mut out = String::new();
    let _ = writeln!(
        out,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" \
         viewBox=\"-10 -30 {w} {h}\">"
    );
    let _ = writeln!(out, "<!-- units: lengths um, angles rad, times s -->");
    let _ = writeln!(out, "<rect x=\"-10\" y=\"-30\" width=\"{w}\" height=\"{h}\" fill=\"white\"/>");
    let _ = writeln!(
        out,
        "<rect x=\"0\" y=\"0\" width=\"600\" height=\"700\" fill=\"#fbfbfb\" stroke=\"#444\"/>"
    );

    if let Some(target) = first.target {
        rod_line(&mut out, target, "#3a7d44", 4.0, " stroke-dasharray=\"6 4\"");
    }
    for rod in &first.rods {
        rod_line(&mut out, *rod, "#c9c9c9", 6.0, "");
    }
    for r in 0..first.rods.len() {
        let path: String = recs
            .iter()
            .map(|rec| format!("{},{} ", rec.rods[r][0], rec.rods[r][1]))
            .collect();
        let _ = writeln!(
            out,
            "<polyline points=\"{}\" fill=\"none\" stroke=\"#d1495b\" stroke-width=\"1\"/>",
            path.trim_end()
        );
    }
    for rod in &last.rods {
        rod_line(&mut out, *rod, "#333333", 6.0, "");
    }
    for [x, y, phi] in &last.robots {
        let _ = writeln!(
            out,
            "<circle cx=\"{x}\" cy=\"{y}\" r=\"{ROBOT_R}\" fill=\"#1f6fb2\" fill-opacity=\"0.8\"/>"
        );
        let _ = writeln!(
            out,
            "<line x1=\"{x}\" y1=\"{y}\" x2=\"{}\" y2=\"{}\" stroke=\"#0b3954\" \
             stroke-width=\"1\"/>",
            x + ROBOT_R * phi.cos(),
            y + ROBOT_R * phi.sin()
        );
    }
    let _ = writeln!(
        out,
        "<text x=\"0\" y=\"-14\" font-family=\"sans-serif\" font-size=\"13\">episode {} | {} \
         step(s) | {} s</text>",
        first.episode,
        recs.len(),
        last.time
    );
    out.push_str("</svg>\n");
    out
}
