//! Corpus statistics over synthetic annotations: histograms, direction and
//! fault heatmaps, and fault rates by age.
//!
//! cargo run --release --example dataset_stats -- [plot_dir]

use std::collections::BTreeMap;

use cyclist_collision::eval::dataset_stats;
use cyclist_collision::synth::{scenario_for_index, video_id, SuiteOptions};

fn main() -> cyclist_collision::Result<()> {
    let opts = SuiteOptions::new(500, 2);
    let mut annotations = Vec::new();
    let mut durations = BTreeMap::new();
    for i in 0..opts.n_videos {
        let s = scenario_for_index(&opts, i)?;
        annotations.push(s.annotation(&video_id(i)));
        durations.insert(video_id(i), s.duration);
    }
    let report = dataset_stats(&annotations, &durations);
    println!("{} videos, {} collisions", report.n_videos, report.n_collisions);
    for h in &report.histograms {
        let cells: Vec<String> = h.bins.iter().zip(&h.counts).map(|(b, c)| format!("{b}:{c}")).collect();
        println!("{:<18} {}", h.name, cells.join(" "));
    }
    if let Some(m) = report.heatmap("cyclist_direction_x_object_direction") {
        println!("cyclist x object direction ({} collisions)", m.total());
        for (r, row) in m.row_labels.iter().zip(&m.counts) {
            println!("  {r:>10} {row:?}");
        }
    }
    for (k, v) in &report.ratios {
        println!("{k} = {v:.3}");
    }
    if let Some(dir) = std::env::args().nth(1) {
        let plots = report.render(std::path::Path::new(&dir))?;
        println!("{} plots in {dir}", plots.len());
    }
    Ok(())
}
