use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use optodtc::config::{RunConfig, Task, PRESETS, SCHEMA_REFERENCE};
use optodtc::runner::{execute, exit_code, EXIT_VALIDATION};
use optodtc::Error;

/// Batch runner for the two-membrane optomechanical Dicke model.
///
/// TASK is one of the configuration tasks, `schema` (print the
/// configuration reference) or `presets` (list the shipped presets).
#[derive(Debug, Parser)]
#[command(name = "optodtc", version)]
struct Cli {
    task: String,

    /// TOML configuration file.
    #[arg(long, conflicts_with = "preset")]
    config: Option<PathBuf>,

    /// Named shipped configuration (fig2 ... figA2).
    #[arg(long)]
    preset: Option<String>,

    #[arg(long, env = "OPTODTC_WORKERS")]
    workers: Option<usize>,

    /// Output directory; defaults to the config's `output` or `out/<task>`.
    #[arg(long)]
    output: Option<PathBuf>,

    /// Print the resolved configuration and stop.
    #[arg(long)]
    dry_run: bool,
}

fn load(cli: &Cli, task: Task) -> Result<RunConfig, Error> {
    let cfg = match (&cli.config, &cli.preset) {
        (Some(path), _) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
            RunConfig::parse(&text)?
        }
        (None, Some(name)) => RunConfig::from_preset(name)?,
        (None, None) if task == Task::Validate => RunConfig::parse("task = \"validate\"")?,
        (None, None) => return Err(Error::Config("one of --config or --preset is required".into())),
    };
    if cfg.task != task {
        return Err(Error::Config(format!(
            "task: the configuration is for `{}`, not `{}`",
            cfg.task.name(),
            task.name()
        )));
    }
    Ok(cfg)
}

fn run(cli: &Cli) -> Result<i32, Error> {
    match cli.task.as_str() {
        "schema" => {
            print!("{SCHEMA_REFERENCE}");
            return Ok(0);
        }
        "presets" => {
            for (name, text) in PRESETS {
                let task = RunConfig::parse(text).map(|c| c.task.name()).unwrap_or("?");
                println!("{name:<6} {task}");
            }
            return Ok(0);
        }
        _ => {}
    }
    let task = Task::from_name(&cli.task).ok_or_else(|| {
        let names: Vec<_> = Task::ALL.iter().map(|t| t.name()).collect();
        Error::Config(format!("unknown task `{}`; expected one of {}", cli.task, names.join(", ")))
    })?;
    let cfg = load(cli, task)?;
    if cli.dry_run {
        cfg.validate()?;
        print!("{}", cfg.to_toml()?);
        return Ok(0);
    }
    let workers = cli
        .workers
        .or(cfg.workers)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    if workers == 0 {
        return Err(Error::Config("workers: must be >= 1".into()));
    }
    let out_dir = cli
        .output
        .clone()
        .or_else(|| cfg.output.clone())
        .unwrap_or_else(|| PathBuf::from("out").join(task.name()));

    eprintln!("optodtc {} | task {} | {workers} workers", optodtc::runner::VERSION, task.name());
    let outcome = execute(&cfg, workers)?;
    for line in &outcome.header {
        println!("{line}");
    }
    outcome.write_to(&out_dir)?;
    eprintln!("wrote {} files to {} in {:.2} s", outcome.files.len() + 1, out_dir.display(), outcome.wall_time);
    Ok(if outcome.passed() { 0 } else { EXIT_VALIDATION })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match run(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    };
    ExitCode::from(code as u8)
}
