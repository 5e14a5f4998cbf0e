use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::Parser;
use weakscatter::experiments::{config::schema, run_scenario, RunReport, Scenario, ScenarioKind};
use weakscatter::Error;

#[derive(Parser, Debug)]
#[command(name = "weakscatter", version, about = "Weak-measurement Stern-Gerlach scenarios", after_help = keys_help())]
struct Cli {
    /// fig1 | fig2 | fig3 | convergence-eta | route-equivalence | smatrix-check | weak-vector
    scenario: String,

    /// TOML document layered over the scenario preset.
    #[arg(long)]
    config: Option<PathBuf>,

    /// `key=value` override, applied after the config file. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,

    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,

    /// Also write SVG heatmaps.
    #[arg(long)]
    svg: bool,
}

fn keys_help() -> String {
    let mut s = String::from("Config keys (default):\n");
    for (k, d, h) in schema() {
        s.push_str(&format!("  {k:<18} {d:<20} {h}\n"));
    }
    s
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config { .. } => 2,
        Error::Io(_) => 4,
        _ => 3,
    }
}

fn build(cli: &Cli) -> Result<Scenario, Error> {
    let kind = ScenarioKind::parse(&cli.scenario).ok_or_else(|| Error::Config {
        key: "scenario".into(),
        reason: format!(
            "unknown scenario {:?}; expected one of {}",
            cli.scenario,
            ScenarioKind::ALL.map(|k| k.name()).join(", ")
        ),
    })?;
    let mut scenario = Scenario::new(kind, &cli.out);
    scenario.svg = cli.svg;
    if let Some(path) = &cli.config {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        scenario.settings.merge_document(&text)?;
    }
    for assignment in &cli.set {
        scenario.settings.apply_override(assignment)?;
    }
    Ok(scenario)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let start = Instant::now();
    let report: Result<RunReport, Error> = build(&cli).and_then(|s| run_scenario(&s));
    match report {
        Ok(report) => {
            print!("{}", report.to_text());
            eprintln!("{} finished in {:.1?}", report.scenario, start.elapsed());
            if report.passed() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(3)
            }
        }
        Err(e) => {
            eprintln!("weakscatter {}: {e}", cli.scenario);
            ExitCode::from(exit_code(&e))
        }
    }
}
