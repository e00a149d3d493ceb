//! Command-line front end, provenance headers, sweeps and regeneration.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use eit_core::rng::derive_seed;
use eit_core::types::linspace;
use rayon::prelude::*;
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::config::{
    canonical_json, from_value, get_path, parse_value, set_path, set_path_value, split_override, to_value,
    ConfigError, ScenarioConfig, SweepSpec,
};
use crate::presets;
use crate::scenarios::{execute, num, validate, CliError, RunOutput};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub fn sha256_hex(text: &str) -> String {
    Sha256::digest(text.as_bytes()).iter().fold(String::with_capacity(64), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

pub fn provenance_lines(config: &ScenarioConfig) -> Vec<String> {
    let json = canonical_json(config);
    vec![
        format!("eitcool {VERSION}"),
        format!("scenario: {}", config.scenario.name()),
        format!("config_sha256: {}", sha256_hex(&json)),
        format!("seed: {}", config.seed),
        format!("config: {json}"),
    ]
}

fn with_header(lines: &[String], body: &str) -> String {
    let mut out = String::new();
    for l in lines {
        let _ = writeln!(out, "# {l}");
    }
    out.push_str(body);
    out
}

/// Reads the configuration back out of a provenance header and checks its
/// hash.
pub fn parse_provenance(text: &str) -> Result<ScenarioConfig, CliError> {
    let mut json = None;
    let mut hash = None;
    for line in text.lines().take_while(|l| l.starts_with('#')) {
        let l = line.trim_start_matches('#').trim_start();
        if let Some(v) = l.strip_prefix("config: ") {
            json.get_or_insert(v);
        } else if let Some(v) = l.strip_prefix("config_sha256: ") {
            hash.get_or_insert(v.trim());
        }
    }
    let (Some(json), Some(hash)) = (json, hash) else {
        return Err(CliError::Config(ConfigError::new("", "artifact has no provenance header")));
    };
    if sha256_hex(json) != hash {
        return Err(CliError::Config(ConfigError::new("", "provenance config does not match its sha256")));
    }
    Ok(from_value(parse_value(json)?)?)
}

pub fn stem(config: &ScenarioConfig) -> String {
    config
        .output_path
        .clone()
        .unwrap_or_else(|| config.scenario.name().to_string())
}

/// Rendered artifacts of one run: `(suffix, full file text)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Rendered {
    pub stem: String,
    pub files: Vec<(String, String)>,
    pub output: RunOutput,
}

fn pool(workers: usize) -> Result<rayon::ThreadPool, CliError> {
    if workers == 0 {
        return Err(CliError::Config(ConfigError::new("--workers", "must be >= 1")));
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| CliError::Io(format!("cannot start worker pool: {e}")))
}

fn render_in_pool(config: &ScenarioConfig) -> Result<Rendered, CliError> {
    let output = execute(config)?;
    let header = provenance_lines(config);
    let files = output
        .artifacts
        .iter()
        .map(|a| (a.suffix.clone(), with_header(&header, &a.body)))
        .collect();
    Ok(Rendered {
        stem: stem(config),
        files,
        output,
    })
}

pub fn render(config: &ScenarioConfig, workers: usize) -> Result<Rendered, CliError> {
    pool(workers)?.install(|| render_in_pool(config))
}

fn write_file(path: &Path, text: &str) -> Result<(), CliError> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("cannot create {}: {e}", dir.display())))?;
        }
    }
    std::fs::write(path, text).map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))
}

fn write_rendered(r: &Rendered, out: &Path, stem: &str) -> Result<Vec<PathBuf>, CliError> {
    r.files
        .iter()
        .map(|(suffix, text)| {
            let path = out.join(format!("{stem}{suffix}"));
            write_file(&path, text).map(|_| path)
        })
        .collect()
}

pub fn run(config: &ScenarioConfig, out: &Path, workers: usize) -> Result<(Rendered, Vec<PathBuf>), CliError> {
    let r = render(config, workers)?;
    let paths = write_rendered(&r, out, &r.stem)?;
    Ok((r, paths))
}

/// Comma-separated numbers, or `start:stop:count`.
pub fn parse_values(text: &str) -> Result<Vec<f64>, ConfigError> {
    let bad = |m: String| ConfigError::new("--values", m);
    let parts: Vec<&str> = text.split(':').collect();
    let values = if parts.len() == 3 {
        let a: f64 = parts[0].trim().parse().map_err(|e| bad(format!("{e}")))?;
        let b: f64 = parts[1].trim().parse().map_err(|e| bad(format!("{e}")))?;
        let n: usize = parts[2].trim().parse().map_err(|e| bad(format!("{e}")))?;
        if n == 0 {
            return Err(bad("count must be >= 1".into()));
        }
        if n == 1 {
            vec![a]
        } else {
            linspace(a, b, n)
        }
    } else {
        text.split(',')
            .map(|s| s.trim().parse::<f64>().map_err(|e| bad(format!("{s:?}: {e}"))))
            .collect::<Result<_, _>>()?
    };
    if values.is_empty() || values.iter().any(|v| !v.is_finite()) {
        return Err(bad("need at least one finite value".into()));
    }
    Ok(values)
}

/// Seed of sweep entry `index`: the base seed for the first entry, a
/// derived seed for the rest.
pub fn sweep_seed(seed: u64, index: usize) -> u64 {
    if index == 0 {
        seed
    } else {
        derive_seed(seed, index as u64)
    }
}

/// Per-value configurations of a sweep. Each is a complete config that
/// `run` reproduces exactly.
pub fn sweep_configs(base: &ScenarioConfig, spec: &SweepSpec) -> Result<Vec<ScenarioConfig>, ConfigError> {
    let mut plain = base.clone();
    plain.sweep = None;
    let value = to_value(&plain);
    match get_path(&value, &spec.axis) {
        Some(Value::Number(_)) => {}
        _ => {
            return Err(ConfigError::new(
                spec.axis.clone(),
                "sweep axis must name a numeric value present in the config",
            ))
        }
    }
    if spec.values.is_empty() {
        return Err(ConfigError::new("sweep.values", "must not be empty"));
    }
    spec.values
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let mut v = value.clone();
            let number = serde_json::Number::from_f64(x)
                .ok_or_else(|| ConfigError::new("sweep.values", format!("{x} is not finite")))?;
            set_path_value(&mut v, &spec.axis, Value::Number(number))?;
            set_path_value(&mut v, "seed", Value::from(sweep_seed(base.seed, i)))?;
            let c = from_value(v)?;
            validate(&c).map_err(|e| ConfigError::new(e.key, format!("{} (sweep value {x})", e.message)))?;
            Ok(c)
        })
        .collect()
}

pub struct SweepResult {
    pub entries: Vec<Rendered>,
    pub index: String,
    pub paths: Vec<PathBuf>,
}

pub fn sweep(base: &ScenarioConfig, spec: &SweepSpec, out: &Path, workers: usize) -> Result<SweepResult, CliError> {
    let configs = sweep_configs(base, spec)?;
    let entries = pool(workers)?.install(|| {
        configs
            .par_iter()
            .map(render_in_pool)
            .collect::<Result<Vec<_>, _>>()
    })?;
    let base_stem = stem(base);
    let mut paths = Vec::new();
    let mut rows = Vec::new();
    for (i, (r, c)) in entries.iter().zip(&configs).enumerate() {
        let file_stem = format!("{base_stem}_{i:03}");
        let written = write_rendered(r, out, &file_stem)?;
        let names: Vec<String> = written
            .iter()
            .map(|p| p.file_name().unwrap_or_default().to_string_lossy().into_owned())
            .collect();
        paths.extend(written);
        let mut row = format!("{i},{},{},{}", num(spec.values[i]), c.seed, names.join(";"));
        for (_, v) in &r.output.summary {
            let _ = write!(row, ",{v}");
        }
        rows.push(row);
    }
    let mut record = base.clone();
    record.sweep = Some(spec.clone());
    let mut body = format!("index,{},seed,files", spec.axis);
    if let Some(first) = entries.first() {
        for (k, _) in &first.output.summary {
            let _ = write!(body, ",{k}");
        }
    }
    body.push('\n');
    for row in rows {
        body.push_str(&row);
        body.push('\n');
    }
    let index = with_header(&provenance_lines(&record), &body);
    let index_path = out.join(format!("{base_stem}_index.csv"));
    write_file(&index_path, &index)?;
    paths.push(index_path);
    Ok(SweepResult { entries, index, paths })
}

/// Regenerates the artifacts recorded in `artifact`'s header. With
/// `check`, compares the matching artifact byte for byte instead of
/// writing.
pub fn regenerate(artifact: &Path, out: &Path, check: bool, workers: usize) -> Result<Vec<PathBuf>, CliError> {
    let text = std::fs::read_to_string(artifact)
        .map_err(|e| CliError::Io(format!("cannot read {}: {e}", artifact.display())))?;
    let config = parse_provenance(&text)?;
    if let Some(spec) = &config.sweep {
        let result = sweep(&config, spec, out, workers)?;
        if check && result.index != text {
            return Err(CliError::Numeric {
                scenario: "regenerate",
                message: "regenerated sweep index differs".into(),
            });
        }
        return Ok(result.paths);
    }
    let r = render(&config, workers)?;
    if check {
        let name = artifact.file_name().unwrap_or_default().to_string_lossy().into_owned();
        let matching = r
            .files
            .iter()
            .filter(|(suffix, _)| name.ends_with(suffix.as_str()))
            .max_by_key(|(suffix, _)| suffix.len());
        return match matching {
            Some((_, regenerated)) if *regenerated == text => Ok(vec![artifact.to_path_buf()]),
            _ => Err(CliError::Numeric {
                scenario: "regenerate",
                message: format!("regenerated artifact differs from {}", artifact.display()),
            }),
        };
    }
    write_rendered(&r, out, &r.stem)
}

#[derive(Parser, Debug)]
#[command(name = "eitcool", version, about = "EIT cooling simulations: spectra, cooling maps, thermometry and fits")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run one scenario.
    Run(RunArgs),
    /// Run a scenario once per value of a numeric config key.
    Sweep {
        #[command(flatten)]
        run: RunArgs,
        /// Dotted config path, e.g. params.lambda.s_c.
        #[arg(long)]
        axis: Option<String>,
        /// Comma-separated values or start:stop:count.
        #[arg(long)]
        values: Option<String>,
    },
    /// Rebuild artifacts from the provenance header of an existing one.
    Regenerate {
        artifact: PathBuf,
        #[arg(long, default_value = ".")]
        out: PathBuf,
        /// Compare with the given artifact instead of writing.
        #[arg(long)]
        check: bool,
        #[arg(long, default_value_t = 1)]
        workers: usize,
    },
    /// Check a configuration and print it in canonical form.
    Validate(RunArgs),
    /// List bundled presets, or print one.
    Presets {
        #[arg(long)]
        show: Option<String>,
    },
}

#[derive(Args, Debug)]
struct RunArgs {
    #[arg(long, conflicts_with = "preset")]
    config: Option<PathBuf>,
    #[arg(long)]
    preset: Option<String>,
    /// Override a config value, e.g. --set params.lambda.delta_c_mhz=-60.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value = ".")]
    out: PathBuf,
    #[arg(long, default_value_t = 1)]
    workers: usize,
}

fn load(args: &RunArgs) -> Result<ScenarioConfig, CliError> {
    let text = match (&args.config, &args.preset) {
        (Some(path), _) => std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(ConfigError::new("--config", format!("cannot read {}: {e}", path.display()))))?,
        (None, Some(name)) => presets::find(name)
            .ok_or_else(|| {
                let names: Vec<&str> = presets::ALL.iter().map(|p| p.name).collect();
                CliError::Config(ConfigError::new("--preset", format!("unknown preset {name:?}; known: {}", names.join(", "))))
            })?
            .text
            .to_string(),
        (None, None) => return Err(CliError::Config(ConfigError::new("", "give --config or --preset"))),
    };
    let mut value = parse_value(&text)?;
    for s in &args.set {
        let (k, v) = split_override(s)?;
        set_path(&mut value, k, v)?;
    }
    if let Some(seed) = args.seed {
        set_path_value(&mut value, "seed", Value::from(seed))?;
    }
    let config = from_value(value)?;
    validate(&config)?;
    Ok(config)
}

fn report(r: &Rendered, paths: &[PathBuf]) {
    for w in &r.output.warnings {
        eprintln!("warning: {w}");
    }
    for p in paths {
        println!("wrote {}", p.display());
    }
    for (k, v) in &r.output.summary {
        println!("{k} = {v}");
    }
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Run(args) => {
            let config = load(&args)?;
            let (r, paths) = run(&config, &args.out, args.workers)?;
            report(&r, &paths);
        }
        Command::Sweep { run: args, axis, values } => {
            let config = load(&args)?;
            let spec = match (axis, values, &config.sweep) {
                (Some(axis), Some(values), _) => SweepSpec {
                    axis,
                    values: parse_values(&values)?,
                },
                (None, None, Some(spec)) => spec.clone(),
                (Some(_), None, _) | (None, Some(_), _) => {
                    return Err(CliError::Config(ConfigError::new("--axis", "--axis and --values go together")))
                }
                (None, None, None) => {
                    return Err(CliError::Config(ConfigError::new("sweep", "no sweep in config; give --axis and --values")))
                }
            };
            let result = sweep(&config, &spec, &args.out, args.workers)?;
            for r in &result.entries {
                for w in &r.output.warnings {
                    eprintln!("warning: {w}");
                }
            }
            for p in &result.paths {
                println!("wrote {}", p.display());
            }
        }
        Command::Regenerate {
            artifact,
            out,
            check,
            workers,
        } => {
            let paths = regenerate(&artifact, &out, check, workers)?;
            if check {
                println!("identical: {}", artifact.display());
            } else {
                for p in paths {
                    println!("wrote {}", p.display());
                }
            }
        }
        Command::Validate(args) => {
            let config = load(&args)?;
            println!("{}", serde_json::to_string_pretty(&config).expect("config serialises"));
        }
        Command::Presets { show } => match show {
            Some(name) => {
                let p = presets::find(&name)
                    .ok_or_else(|| CliError::Config(ConfigError::new("--show", format!("unknown preset {name:?}"))))?;
                print!("{}", p.text);
            }
            None => {
                for p in presets::ALL {
                    println!("{:<16} {:<20} {}", p.name, p.scenario().name(), p.description());
                }
            }
        },
    }
    Ok(())
}

/// Parses arguments, runs, and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match dispatch(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
