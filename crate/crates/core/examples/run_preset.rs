//! Runs a built-in preset through the batch pipeline on a coarser grid.
//!
//! Usage: `cargo run --release --example run_preset [preset] [output dir]`

use elastocavity::cli::{list_presets, preset, run};

fn main() -> elastocavity::Result<()> {
    let mut args = std::env::args().skip(1);
    let name = args.next().unwrap_or_else(|| "fig1-ff".into());
    let Some(mut config) = preset(&name) else {
        eprintln!("unknown preset `{name}`; available:\n{}", list_presets());
        std::process::exit(2);
    };
    config.output_dir = args
        .next()
        .map(Into::into)
        .unwrap_or_else(|| std::env::temp_dir().join("elastocavity"));
    config.grid.nx = 51;
    config.grid.ny = 51;
    let report = run(&config)?;
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    println!(
        "{}\n{}\n{}",
        report.dataset.display(),
        report.csv.display(),
        report.manifest.display()
    );
    Ok(())
}
