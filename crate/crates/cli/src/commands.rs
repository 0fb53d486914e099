use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{Context, Result};
use serde::Serialize;

use cmigan::citest::{run_cit_benchmark, CiLabel, CitBenchReport, Manifest, ManifestEntry};
use cmigan::datagen::{generate, nonlinear_reference_cmi, true_cmi, GenSpec, ModelId, ModelParams, NONLINEAR_REFERENCE_N};
use cmigan::dataio::{
    load_csv, read_sidecar, save_csv, sidecar_path, write_sidecar, ColumnMapping, CsvOptions, DatasetSidecar,
    Normalization,
};
use cmigan::estimators::{estimate as run_estimator, EstimateReport, EstimatorConfig, EstimatorKind};
use cmigan::knn::{KsgConfig, KsgEstimate};
use cmigan::neuralnet::{run_gradcheck, GradCheckConfig, GradCheckReport};
use cmigan::SampleSet;

use crate::config::{parse_columns, parse_delimiter, parse_dims, DataSource, Preset, RunConfig};
use crate::{BenchArgs, CitestArgs, DataArgs, DatagenArgs, EstimateArgs, GradcheckArgs, TrainArgs, UsageError};

/// A verification command ran to completion and reported failure.
#[derive(Debug, thiserror::Error)]
#[error("{0}")]
pub struct CheckFailed(pub String);

fn write_json<T: Serialize>(value: &T, output: Option<&Path>) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    match output {
        Some(p) => {
            std::fs::write(p, text + "\n").with_context(|| format!("writing {}", p.display()))?;
            log::info!("wrote {}", p.display());
        }
        None => println!("{text}"),
    }
    Ok(())
}

fn parse_widths(s: &str) -> Result<Vec<usize>> {
    s.split(',')
        .map(|w| w.trim().parse::<usize>())
        .collect::<Result<_, _>>()
        .map_err(|_| UsageError(format!("hidden widths must be comma-separated integers, got `{s}`")).into())
}

fn resolve_training(preset: Preset, t: &TrainArgs, seed: u64) -> Result<(EstimatorConfig, KsgConfig)> {
    let mut cfg = preset.config();
    cfg.seed = seed;
    if let Some(v) = t.runs {
        cfg.runs = v;
    }
    if let Some(v) = t.steps {
        cfg.training_steps = v;
    }
    if let Some(v) = t.batch_size {
        cfg.batch_size = v;
    }
    if let Some(v) = t.lr {
        cfg.schedule.initial_lr = v;
    }
    if let Some(v) = t.lr_interval {
        cfg.schedule.interval_steps = v;
    }
    if let Some(v) = t.ratio {
        cfg.reg_training_ratio = v;
    }
    if t.noise_dim.is_some() {
        cfg.noise_dim = t.noise_dim;
    }
    if let Some(v) = t.eval_passes {
        cfg.eval_passes = v;
    }
    if let Some(s) = &t.reg_hidden {
        cfg.reg_hidden = parse_widths(s)?;
    }
    if let Some(s) = &t.gen_hidden {
        cfg.gen_hidden = parse_widths(s)?;
    }
    cfg.standardize = !t.no_standardize;
    cfg.schedule.total_steps = cfg.training_steps;
    Ok((
        cfg,
        KsgConfig {
            k: t.k,
            jitter_seed: seed,
        },
    ))
}

fn resolve_source(d: &DataArgs, seed: u64) -> Result<DataSource> {
    if let Some(model) = d.generate {
        return Ok(DataSource::Generated(GenSpec {
            model,
            n: d.n,
            dim: d.dim,
            seed: d.data_seed.unwrap_or(seed),
            rho: d.rho,
            dependent: d.dependent,
        }));
    }
    let path = d
        .data
        .clone()
        .ok_or_else(|| UsageError("give --data FILE or --generate MODEL".into()))?;
    let mut mapping = if let Some(m) = &d.mapping {
        let text = std::fs::read_to_string(m).with_context(|| format!("reading {}", m.display()))?;
        serde_json::from_str::<ColumnMapping>(&text).map_err(|e| UsageError(format!("{}: {e}", m.display())))?
    } else if let Some(x) = &d.x_cols {
        ColumnMapping {
            x_cols: parse_columns(x),
            y_cols: parse_columns(d.y_cols.as_deref().unwrap_or("")),
            z_cols: parse_columns(d.z_cols.as_deref().unwrap_or("")),
            normalization: Normalization::None,
            shuffle_seed: None,
        }
    } else if let Some(dims) = &d.dims {
        ColumnMapping::by_position(parse_dims(dims).map_err(|e| UsageError(e.to_string()))?)
    } else if let Ok(side) = read_sidecar(&sidecar_path(&path)) {
        ColumnMapping::by_position(side.params.dims)
    } else {
        return Err(UsageError("give --dims, --x-cols/--y-cols[/--z-cols] or --mapping for CSV input".into()).into());
    };
    if d.zscore {
        mapping.normalization = Normalization::Zscore;
    }
    if d.shuffle_seed.is_some() {
        mapping.shuffle_seed = d.shuffle_seed;
    }
    let options = CsvOptions {
        delimiter: parse_delimiter(&d.delimiter).map_err(|e| UsageError(e.to_string()))?,
        decimal_comma: d.decimal_comma,
        missing_sentinel: if d.no_sentinel {
            None
        } else {
            Some(d.missing.unwrap_or(cmigan::dataio::AIR_QUALITY_MISSING))
        },
        ..CsvOptions::default()
    };
    Ok(DataSource::Csv { path, mapping, options })
}

struct Loaded {
    set: SampleSet,
    truth: Option<f64>,
    dropped_rows: Option<usize>,
}

fn load_source(src: &DataSource) -> Result<Loaded> {
    match src {
        DataSource::Generated(spec) => {
            let (set, params) = generate(spec)?;
            Ok(Loaded {
                set,
                truth: true_cmi(&params).ok(),
                dropped_rows: None,
            })
        }
        DataSource::Csv { path, mapping, options } => {
            let loaded = load_csv(path, mapping, options)?;
            // The sidecar truth applies only when the columns are taken as generated.
            let truth = read_sidecar(&sidecar_path(path))
                .ok()
                .filter(|s| {
                    let natural = ColumnMapping::by_position(s.params.dims);
                    natural.x_cols == mapping.x_cols && natural.y_cols == mapping.y_cols && natural.z_cols == mapping.z_cols
                })
                .and_then(|s| s.true_cmi);
            Ok(Loaded {
                set: loaded.set,
                truth,
                dropped_rows: Some(loaded.dropped),
            })
        }
        DataSource::Manifest { .. } => Err(UsageError("estimate needs a single dataset, not a manifest".into()).into()),
    }
}

#[derive(Serialize)]
struct DatagenOutput {
    config: RunConfig,
    csv: PathBuf,
    sidecar: PathBuf,
    true_cmi: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    reference_cmi: Option<KsgEstimate>,
}

fn write_dataset(set: &SampleSet, params: &ModelParams, csv: &Path) -> Result<(PathBuf, Option<f64>)> {
    save_csv(set, csv, None)?;
    let truth = true_cmi(params).ok();
    let side = sidecar_path(csv);
    write_sidecar(&side, &DatasetSidecar::new(params.clone(), truth))?;
    Ok((side, truth))
}

pub fn datagen(a: DatagenArgs, seed: u64) -> Result<()> {
    if let Some(count) = a.suite {
        return datagen_suite(&a, count, seed);
    }
    let spec = GenSpec {
        model: a.model,
        n: a.n,
        dim: a.dim,
        seed,
        rho: a.rho,
        dependent: a.dependent,
    };
    let (set, params) = generate(&spec)?;
    let (sidecar, true_cmi) = write_dataset(&set, &params, &a.output)?;
    let reference_cmi = if a.reference && a.model == ModelId::Nonlinear {
        Some(nonlinear_reference_cmi(&params, NONLINEAR_REFERENCE_N, &KsgConfig::default())?)
    } else {
        None
    };
    match true_cmi {
        Some(t) => eprintln!("true CMI: {t:.5} nats"),
        None => eprintln!("no closed-form CMI for {}", a.model),
    }
    write_json(
        &DatagenOutput {
            config: RunConfig {
                subcommand: "datagen".into(),
                source: Some(DataSource::Generated(spec)),
                estimator: None,
                estimator_config: None,
                ksg: None,
                threshold: None,
                output: Some(a.output.clone()),
                seed,
            },
            csv: a.output,
            sidecar,
            true_cmi,
            reference_cmi,
        },
        None,
    )
}

/// `count` CIT datasets with seeds `seed, seed+1, ...`; odd indices are dependent.
fn datagen_suite(a: &DatagenArgs, count: usize, seed: u64) -> Result<()> {
    if a.model != ModelId::Cit {
        return Err(UsageError("--suite only applies to --model cit".into()).into());
    }
    std::fs::create_dir_all(&a.output).with_context(|| format!("creating {}", a.output.display()))?;
    let mut entries = Vec::with_capacity(count);
    for i in 0..count {
        let dependent = i % 2 == 1;
        let spec = GenSpec {
            model: ModelId::Cit,
            n: a.n,
            dim: a.dim,
            seed: seed.wrapping_add(i as u64),
            rho: 0.0,
            dependent,
        };
        let (set, params) = generate(&spec)?;
        let name = format!("cit-{i:03}.csv");
        write_dataset(&set, &params, &a.output.join(&name))?;
        entries.push(ManifestEntry {
            id: Some(format!("cit-{i:03}")),
            path: name.into(),
            label: if dependent { CiLabel::CD } else { CiLabel::CI },
            dims: params.dims,
        });
    }
    let manifest_path = a.output.join("manifest.json");
    Manifest { datasets: entries }.write(&manifest_path)?;
    eprintln!("wrote {count} datasets and {}", manifest_path.display());
    Ok(())
}

#[derive(Serialize)]
struct EstimateOutput<'a> {
    config: &'a RunConfig,
    #[serde(flatten)]
    report: &'a EstimateReport,
    truth: Option<f64>,
    n: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    dropped_rows: Option<usize>,
    wall_time_s: f64,
}

pub fn estimate(a: EstimateArgs, seed: u64) -> Result<()> {
    let mut cfg = match &a.config {
        Some(p) => RunConfig::read(p).map_err(|e| UsageError(format!("{e:#}")))?,
        None => {
            let (mut est_cfg, ksg) = resolve_training(a.preset, &a.train, seed)?;
            if a.trace.is_some() {
                est_cfg.trace_every = a.trace_every.max(1);
            }
            RunConfig {
                subcommand: "estimate".into(),
                source: Some(resolve_source(&a.data, seed)?),
                estimator: a.estimator,
                estimator_config: Some(est_cfg),
                ksg: Some(ksg),
                threshold: None,
                output: a.output.clone(),
                seed,
            }
        }
    };
    if a.output.is_some() {
        cfg.output = a.output.clone();
    }
    let (Some(kind), Some(source)) = (cfg.estimator, cfg.source.as_ref()) else {
        return Err(UsageError("run config lacks an estimator or a data source".into()).into());
    };
    let est_cfg = cfg.estimator_config.clone().unwrap_or_default();
    let ksg = cfg.ksg.clone().unwrap_or_default();

    let loaded = load_source(source)?;
    log::info!(
        "estimating with {kind} on {} rows, dims {:?}",
        loaded.set.n(),
        loaded.set.dims()
    );
    let start = Instant::now();
    let report = run_estimator(kind, &loaded.set, &est_cfg, &ksg)?;
    let wall = start.elapsed().as_secs_f64();
    eprintln!(
        "{kind}: {:.5} ± {:.5} nats{}",
        report.mean,
        report.std,
        loaded.truth.map_or(String::new(), |t| format!(" (truth {t:.5})"))
    );
    if let Some(path) = &a.trace {
        write_trace(&report, path)?;
    }
    write_json(
        &EstimateOutput {
            config: &cfg,
            report: &report,
            truth: loaded.truth,
            n: loaded.set.n(),
            dropped_rows: loaded.dropped_rows,
            wall_time_s: wall,
        },
        cfg.output.as_deref(),
    )
}

fn write_trace(report: &EstimateReport, path: &Path) -> Result<()> {
    let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    let mut w = BufWriter::new(file);
    writeln!(w, "run,step,lr,reg_loss,gen_loss")?;
    for run in &report.runs {
        for p in &run.trace {
            let gen = p.gen_loss.map_or(String::new(), |g| g.to_string());
            writeln!(w, "{},{},{},{},{}", run.run, p.step, p.lr, p.reg_loss, gen)?;
        }
    }
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct CitestOutput<'a> {
    config: &'a RunConfig,
    #[serde(flatten)]
    report: &'a CitBenchReport,
    wall_time_s: f64,
}

pub fn citest(a: CitestArgs, seed: u64) -> Result<()> {
    let mut cfg = match &a.config {
        Some(p) => RunConfig::read(p).map_err(|e| UsageError(format!("{e:#}")))?,
        None => {
            let (est_cfg, ksg) = resolve_training(a.preset, &a.train, seed)?;
            RunConfig {
                subcommand: "citest".into(),
                source: a.manifest.clone().map(|path| DataSource::Manifest { path }),
                estimator: Some(a.estimator),
                estimator_config: Some(est_cfg),
                ksg: Some(ksg),
                threshold: Some(a.threshold),
                output: a.output.clone(),
                seed,
            }
        }
    };
    if a.output.is_some() {
        cfg.output = a.output.clone();
    }
    let Some(DataSource::Manifest { path }) = &cfg.source else {
        return Err(UsageError("citest needs a manifest".into()).into());
    };
    let kind = cfg.estimator.unwrap_or(EstimatorKind::Cmigan);
    let manifest = Manifest::read(path)?;
    let datasets = manifest.load(path)?;
    let start = Instant::now();
    let report = run_cit_benchmark(
        &datasets,
        kind,
        &cfg.estimator_config.clone().unwrap_or_else(EstimatorConfig::full_cit),
        &cfg.ksg.clone().unwrap_or_default(),
        cfg.threshold.unwrap_or(cmigan::citest::DEFAULT_THRESHOLD),
    )?;
    match report.auroc {
        Some(v) => eprintln!("{kind}: AuROC {v:.4} over {} datasets", datasets.len()),
        None => eprintln!("{kind}: AuROC undefined (need both labels among scored datasets)"),
    }
    write_json(
        &CitestOutput {
            config: &cfg,
            report: &report,
            wall_time_s: start.elapsed().as_secs_f64(),
        },
        cfg.output.as_deref(),
    )
}

#[derive(Serialize)]
struct GradcheckOutput {
    config: GradCheckConfig,
    #[serde(flatten)]
    report: GradCheckReport,
}

pub fn gradcheck(a: GradcheckArgs, seed: u64) -> Result<()> {
    let config = GradCheckConfig {
        networks: a.networks,
        seed,
        tolerance: a.tolerance,
        inject_sign_flip: a.inject_sign_flip,
        ..GradCheckConfig::default()
    };
    let report = run_gradcheck(&config)?;
    let passed = report.passed;
    let summary = format!(
        "gradcheck {}: {} networks, {} entries, max relative error {:.3e} (tolerance {:.0e})",
        if passed { "PASS" } else { "FAIL" },
        report.networks,
        report.entries_checked,
        report.max_rel_error,
        report.tolerance
    );
    eprintln!("{summary}");
    write_json(&GradcheckOutput { config, report }, a.output.as_deref())?;
    if passed {
        Ok(())
    } else {
        Err(CheckFailed(summary).into())
    }
}

#[derive(Serialize)]
struct BenchRow {
    case: String,
    estimator: EstimatorKind,
    truth: Option<f64>,
    mean: Option<f64>,
    std: Option<f64>,
    abs_error: Option<f64>,
    error: Option<String>,
    wall_time_s: f64,
}

#[derive(Serialize)]
struct BenchOutput {
    config: RunConfig,
    cases: Vec<GenSpec>,
    rows: Vec<BenchRow>,
}

fn parse_case(s: &str, n: usize, rho: f64, seed: u64) -> Result<GenSpec> {
    let (model, dim) = s.split_once(':').unwrap_or((s, "1"));
    let model: ModelId = model.parse().map_err(|e: cmigan::Error| UsageError(e.to_string()))?;
    let dim = dim
        .parse()
        .map_err(|_| UsageError(format!("bad dimension in case `{s}`")))?;
    Ok(GenSpec {
        model,
        n,
        dim,
        seed,
        rho,
        dependent: false,
    })
}

pub fn bench(a: BenchArgs, seed: u64) -> Result<()> {
    let (est_cfg, ksg) = resolve_training(a.preset, &a.train, seed)?;
    let cases: Vec<GenSpec> = a
        .cases
        .iter()
        .map(|c| parse_case(c, a.n, a.rho, seed))
        .collect::<Result<_>>()?;
    let mut rows = Vec::new();
    for spec in &cases {
        let (set, params) = generate(spec)?;
        let truth = true_cmi(&params).ok();
        let conditional = set.dims().dz > 0;
        for &kind in &a.estimators {
            if kind != EstimatorKind::Ksg && kind.is_conditional() != conditional {
                continue;
            }
            let case = format!("{}:{}", spec.model, spec.dim);
            let start = Instant::now();
            let result = run_estimator(kind, &set, &est_cfg, &ksg);
            let wall_time_s = start.elapsed().as_secs_f64();
            let row = match result {
                Ok(r) => BenchRow {
                    case,
                    estimator: kind,
                    truth,
                    mean: Some(r.mean),
                    std: Some(r.std),
                    abs_error: truth.map(|t| (r.mean - t).abs()),
                    error: None,
                    wall_time_s,
                },
                Err(e) => BenchRow {
                    case,
                    estimator: kind,
                    truth,
                    mean: None,
                    std: None,
                    abs_error: None,
                    error: Some(e.to_string()),
                    wall_time_s,
                },
            };
            eprintln!(
                "{:<12} {:<13} truth {:>8} estimate {:>8} ({:.1} s)",
                row.case,
                kind.id(),
                row.truth.map_or("-".into(), |t| format!("{t:.4}")),
                row.mean.map_or("failed".into(), |m| format!("{m:.4}")),
                row.wall_time_s
            );
            rows.push(row);
        }
    }
    write_json(
        &BenchOutput {
            config: RunConfig {
                subcommand: "bench".into(),
                source: None,
                estimator: None,
                estimator_config: Some(est_cfg),
                ksg: Some(ksg),
                threshold: None,
                output: a.output.clone(),
                seed,
            },
            cases,
            rows,
        },
        a.output.as_deref(),
    )
}
