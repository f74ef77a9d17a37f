//! Render a small synthetic corpus and show the ground truth carried by
//! each clip.
//!
//! cargo run --release --example synthetic_suite -- [n_videos] [seed]

use cyclist_collision::synth::{generate_suite, RenderConfig, SuiteOptions};

fn main() -> cyclist_collision::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let n = args.first().and_then(|a| a.parse().ok()).unwrap_or(12);
    let seed = args.get(1).and_then(|a| a.parse().ok()).unwrap_or(0);
    let dir = tempfile::tempdir().map_err(|e| cyclist_collision::Error::Invalid(e.to_string()))?;
    let mut opts = SuiteOptions::new(n, seed);
    opts.render = RenderConfig { width: 128, height: 72, fps: 24.0 };
    let suite = generate_suite(&opts, dir.path())?;
    println!("{} clips {:?}, collision rate {:.2}", suite.videos.len(), suite.kind_counts, suite.collision_rate());
    for v in &suite.videos {
        let s = &v.scenario;
        let f = &v.annotation.fields;
        let contact = s.contact_frame(30.0).map_or("-".to_string(), |c| format!("frame {c}"));
        println!(
            "{} {:>24} {:.2}s cyclist {:>10} object {:>10} contact {:>10} severity {:?}",
            v.annotation.video_id,
            s.kind.slug(),
            s.duration,
            f.cyclist_direction.to_string(),
            f.object_direction.to_string(),
            contact,
            f.severity
        );
    }
    Ok(())
}
