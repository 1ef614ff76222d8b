//! The whole workflow through the pipeline API, writing every artifact to a
//! directory: design, runs, summary, evaluation and explanations.
//!
//! cargo run --release --example full_pipeline -- [out_dir] [--full]
//! Without `--full` a reduced design (40 points, 3 repetitions) is used.

use segsur::pipeline::{cmd_doe, cmd_explain, cmd_fit_evaluate, cmd_simulate, cmd_stats, PipelineConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let args: Vec<String> = std::env::args().skip(1).collect();
    let full = args.iter().any(|a| a == "--full");
    let out = args.iter().find(|a| !a.starts_with("--")).map_or("pipeline_out", String::as_str);

    let mut cfg = PipelineConfig { out_dir: out.into(), ..PipelineConfig::default() };
    if !full {
        cfg.sizes = vec![10, 20, 40];
        cfg.repetitions = 3;
        cfg.explain.rows = Some(50);
    }
    std::fs::create_dir_all(&cfg.out_dir)?;
    std::fs::write(cfg.path("config.json"), serde_json::to_string_pretty(&cfg)?)?;

    cmd_doe(&cfg)?;
    let sim = cmd_simulate(&cfg)?;
    println!("runs: {} total, {} completed, {} failed, {} reused", sim.total, sim.completed, sim.failed, sim.skipped);

    let summary = cmd_stats(&cfg)?;
    println!("converged {}/{}", summary.converged, summary.runs);

    match cmd_fit_evaluate(&cfg) {
        Ok(report) => print!("\n{}", report.to_markdown()),
        // e.g. QP on too few distinct designs; the other models are still written
        Err(e) => eprintln!("fit: {e}"),
    }

    let ex = cmd_explain(&cfg)?;
    println!("\n{} {} explanation files:", ex.model, ex.task);
    for f in ex.files {
        println!("  {}", f.display());
    }
    Ok(())
}
