use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use ammfeelab_core::config::{parse_override, FeePolicyConfig, LabConfig, PathSource};
use ammfeelab_core::metrics::{
    emit_markdown, emit_results_csv, Metric, ResultSet, SummaryRow, AGGREGATE_ROW, AGGREGATE_STD_ROW,
    RESULTS_HEADER,
};
use ammfeelab_core::sim::{fee_sweep, run_plan, write_paths, PathPlan};

use crate::error::{CliError, CliResult};
use crate::manifest::{digest_file, sha256_hex, Manifest, OutputDir, FORMAT_REVISION};
use crate::{Cli, Command, Format};

pub const THREADS_ENV: &str = "AMMFEELAB_THREADS";

pub fn dispatch(cli: &Cli) -> CliResult<()> {
    match &cli.command {
        Command::Generate => generate(cli),
        Command::Run { policies, format } => run(cli, policies, *format),
        Command::Sweep => sweep(cli),
        Command::Report { files, format } => report(cli, files, *format),
    }
}

fn load_config(cli: &Cli) -> CliResult<LabConfig> {
    let text = match &cli.config {
        Some(path) => fs::read_to_string(path).map_err(|e| CliError::io(path, e))?,
        None => String::new(),
    };
    let mut overrides = cli
        .overrides
        .iter()
        .map(|s| parse_override(s))
        .collect::<Result<Vec<_>, _>>()?;
    if let Some(seed) = cli.seed {
        overrides.push(("simulation.master_seed".into(), seed.to_string()));
        overrides.push(("sweep.seed".into(), seed.to_string()));
    }
    Ok(LabConfig::from_toml_str(&text, &overrides)?)
}

fn threads_from_env() -> CliResult<Option<usize>> {
    match std::env::var(THREADS_ENV) {
        Err(_) => Ok(None),
        Ok(v) if v.trim().is_empty() => Ok(None),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n >= 1 => Ok(Some(n)),
            _ => Err(CliError::Config(format!(
                "config error at `{THREADS_ENV}`: expected a positive integer, got {v:?}"
            ))),
        },
    }
}

/// Input files named by the config, with their digests.
fn input_digests(config: &LabConfig) -> CliResult<Vec<crate::manifest::FileDigest>> {
    let files: Vec<&PathBuf> = match &config.simulation.path_source {
        PathSource::Synthetic { estimate_from, .. } => estimate_from.iter().collect(),
        PathSource::Historical { file, file_b } => std::iter::once(file).chain(file_b).collect(),
    };
    files.into_iter().map(|f| digest_file(f)).collect()
}

fn manifest(
    command: &str,
    reproduce: String,
    config: &LabConfig,
    master_seed: u64,
) -> CliResult<Manifest> {
    Ok(Manifest {
        format_revision: FORMAT_REVISION,
        tool_version: env!("CARGO_PKG_VERSION"),
        command: command.to_string(),
        reproduce,
        master_seed,
        config: config.to_toml_string(),
        inputs: input_digests(config)?,
        outputs: Vec::new(),
        extra: serde_json::Map::new(),
    })
}

fn generate(cli: &Cli) -> CliResult<()> {
    let config = load_config(cli)?;
    let mut out = OutputDir::create(&cli.out)?;
    let paths_dir = out.root().join("paths");
    fs::create_dir_all(&paths_dir).map_err(|e| CliError::io(&paths_dir, e))?;
    let names = write_paths(&config.simulation, &paths_dir)?;
    for name in &names {
        out.adopt(&format!("paths/{name}"))?;
    }
    out.write("config.resolved.toml", config.to_toml_string().as_bytes())?;
    let m = manifest(
        "generate",
        "ammfeelab --config config.resolved.toml generate".into(),
        &config,
        config.simulation.master_seed,
    )?;
    out.finish(m)?;
    println!("wrote {} paths to {}", names.len(), paths_dir.display());
    Ok(())
}

fn resolve_policies(config: &LabConfig, names: &[String]) -> CliResult<Vec<FeePolicyConfig>> {
    if names.is_empty() {
        return Ok(vec![config.simulation.fee_policy.clone()]);
    }
    let mut out: Vec<FeePolicyConfig> = Vec::new();
    for name in names {
        let p = FeePolicyConfig::from_short_name(name)
            .ok_or_else(|| CliError::Config(format!("config error at `--policies`: unknown policy {name:?}; expected fx, ba, da or ob")))?;
        // The configured policy keeps its parameters when it is listed.
        let p = if p.short_name() == config.simulation.fee_policy.short_name() {
            config.simulation.fee_policy.clone()
        } else {
            p
        };
        if !out.contains(&p) {
            out.push(p);
        }
    }
    Ok(out)
}

/// Short, stable identifier of a run's configuration.
fn run_id(config: &LabConfig, policies: &[FeePolicyConfig]) -> String {
    let mut text = config.to_toml_string();
    for p in policies {
        let _ = write!(text, "\n{p:?}");
    }
    sha256_hex(text.as_bytes())[..12].to_string()
}

fn run(cli: &Cli, policy_names: &[String], format: Format) -> CliResult<()> {
    let config = load_config(cli)?;
    let policies = resolve_policies(&config, policy_names)?;
    let threads = threads_from_env()?;
    let plan = PathPlan::resolve(&config.simulation)?;
    let id = run_id(&config, &policies);

    let mut sets = Vec::with_capacity(policies.len());
    for policy in &policies {
        let sim = config.simulation.with_policy(policy.clone());
        let batch = run_plan(&sim, &plan, threads)?;
        sets.push(ResultSet {
            run_id: id.clone(),
            regime: batch.label,
            policy: policy.label().to_string(),
            paths: batch.paths,
        });
    }

    let csv = emit_results_csv(&sets);
    let rows: Vec<SummaryRow> = sets.iter().map(SummaryRow::from_set).collect();
    let md = emit_markdown(&rows);
    let mut out = OutputDir::create(&cli.out)?;
    out.write("results.csv", csv.as_bytes())?;
    out.write("results.md", md.as_bytes())?;
    out.write("config.resolved.toml", config.to_toml_string().as_bytes())?;
    let names: Vec<&str> = policies.iter().map(|p| p.short_name()).collect();
    let mut m = manifest(
        "run",
        format!(
            "ammfeelab --config config.resolved.toml run --policies {}",
            names.join(",")
        ),
        &config,
        config.simulation.master_seed,
    )?;
    m.extra.insert("run_id".into(), id.into());
    m.extra.insert("policies".into(), names.clone().into());
    out.finish(m)?;

    match format {
        Format::Md => print!("{md}"),
        Format::Csv => print!("{}", aggregate_csv(&rows)),
    }
    Ok(())
}

fn sweep(cli: &Cli) -> CliResult<()> {
    let config = load_config(cli)?;
    let curve = fee_sweep(&config.sweep)?;
    let mut csv = String::from("fee_pct,expected_lp_profit,mc_lp_profit,mc_std\n");
    for p in &curve.points {
        let _ = writeln!(csv, "{},{},{},{}", p.fee_pct, p.expected, p.mc_mean, p.mc_std);
    }
    let mut out = OutputDir::create(&cli.out)?;
    out.write("sweep.csv", csv.as_bytes())?;
    out.write("config.resolved.toml", config.to_toml_string().as_bytes())?;
    let mut m = manifest(
        "sweep",
        "ammfeelab --config config.resolved.toml sweep".into(),
        &config,
        config.sweep.seed,
    )?;
    m.extra.insert("argmax_fee_pct".into(), curve.argmax.fee_pct.into());
    m.extra
        .insert("argmax_expected_lp_profit".into(), curve.argmax.expected.into());
    out.finish(m)?;
    println!(
        "optimal fee {}% (expected LP profit {:.4} per proposed trade, {} grid points)",
        curve.argmax.fee_pct,
        curve.argmax.expected,
        curve.points.len()
    );
    Ok(())
}

/// Mean and std per metric of one (run_id, regime, policy) result set.
struct Aggregate {
    key: (String, String, String),
    mean: [Option<f64>; Metric::ALL.len()],
    std: [Option<f64>; Metric::ALL.len()],
}

/// Collects the aggregate rows of one results file, in first-seen order.
fn read_results(path: &Path, into: &mut Vec<Aggregate>) -> CliResult<usize> {
    let data_err = |row: Option<usize>, msg: String| {
        let at = row.map(|r| format!(": row {r}")).unwrap_or_default();
        CliError::Data(format!("{}{at}: {msg}", path.display()))
    };
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let header = reader
        .headers()
        .map_err(|e| data_err(None, e.to_string()))?
        .iter()
        .collect::<Vec<_>>()
        .join(",");
    if header != RESULTS_HEADER {
        return Err(data_err(
            None,
            format!("not a results file: expected header `{RESULTS_HEADER}`, found `{header}`"),
        ));
    }
    let columns: Vec<&str> = RESULTS_HEADER.split(',').collect();
    let mut seen = 0;
    for (i, record) in reader.records().enumerate() {
        let row = i + 1;
        let record = record.map_err(|e| data_err(Some(row), e.to_string()))?;
        let kind = &record[1];
        if kind != AGGREGATE_ROW && kind != AGGREGATE_STD_ROW {
            continue;
        }
        seen += 1;
        let key = (record[0].to_string(), record[2].to_string(), record[3].to_string());
        let idx = match into.iter().position(|a| a.key == key) {
            Some(idx) => idx,
            None => {
                into.push(Aggregate {
                    key,
                    mean: [None; Metric::ALL.len()],
                    std: [None; Metric::ALL.len()],
                });
                into.len() - 1
            }
        };
        for (m, metric) in Metric::ALL.iter().enumerate() {
            let col = columns
                .iter()
                .position(|c| *c == metric.column())
                .expect("every metric has a results column");
            let value: f64 = record[col].parse().map_err(|_| {
                data_err(Some(row), format!("{}: not a number: {:?}", metric.column(), &record[col]))
            })?;
            let slot = if kind == AGGREGATE_ROW {
                &mut into[idx].mean[m]
            } else {
                &mut into[idx].std[m]
            };
            *slot = Some(value);
        }
    }
    Ok(seen)
}

fn report(cli: &Cli, files: &[PathBuf], format: Format) -> CliResult<()> {
    let mut aggregates = Vec::new();
    for file in files {
        if read_results(file, &mut aggregates)? == 0 {
            return Err(CliError::Data(format!("{}: no aggregate rows", file.display())));
        }
    }
    let mut rows = Vec::new();
    for agg in &aggregates {
        let (run_id, regime, policy) = &agg.key;
        let mut values = Vec::new();
        for (m, metric) in Metric::ALL.iter().enumerate() {
            let missing = |row: &str| CliError::Data(format!("run {run_id} {policy}: missing `{row}` row"));
            let mean = agg.mean[m].ok_or_else(|| missing(AGGREGATE_ROW))?;
            let std = agg.std[m].ok_or_else(|| missing(AGGREGATE_STD_ROW))?;
            values.push((*metric, mean, std));
        }
        rows.push(SummaryRow {
            regime: regime.clone(),
            policy: policy.clone(),
            values,
        });
    }
    let (name, body) = match format {
        Format::Md => ("report.md", emit_markdown(&rows)),
        Format::Csv => ("report.csv", aggregate_csv(&rows)),
    };
    let mut out = OutputDir::create(&cli.out)?;
    out.write(name, body.as_bytes())?;
    let inputs = files.iter().map(|f| digest_file(f)).collect::<CliResult<Vec<_>>>()?;
    let reproduce = format!(
        "ammfeelab report {}",
        files.iter().map(|f| f.display().to_string()).collect::<Vec<_>>().join(" ")
    );
    out.finish(Manifest {
        format_revision: FORMAT_REVISION,
        tool_version: env!("CARGO_PKG_VERSION"),
        command: "report".into(),
        reproduce,
        master_seed: 0,
        config: String::new(),
        inputs,
        outputs: Vec::new(),
        extra: serde_json::Map::new(),
    })?;
    print!("{body}");
    Ok(())
}

/// `regime,policy,<metric>_mean,<metric>_std,...` per summary row.
fn aggregate_csv(rows: &[SummaryRow]) -> String {
    let mut out = String::from("regime,policy");
    for m in Metric::ALL {
        let _ = write!(out, ",{0}_mean,{0}_std", m.column());
    }
    out.push('\n');
    for row in rows {
        let _ = write!(out, "{},{}", row.regime, row.policy);
        for m in Metric::ALL {
            match row.get(m) {
                Some((mean, std)) => {
                    let _ = write!(out, ",{mean},{std}");
                }
                None => out.push_str(",,"),
            }
        }
        out.push('\n');
    }
    out
}
