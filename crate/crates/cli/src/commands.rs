use std::collections::BTreeMap;
use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;

use ncode_core::eval::EvaluatorKind;
use ncode_core::search::{
    provenance_ratio, run_random_search, run_regularized_evolution, shuffled_history_search, CandidateMode,
    RegEvoConfig, RunStatus, SearchError, SearchTrace,
};
use ncode_core::stats::{mean, sign_test, std_dev, SignTest};
use ncode_core::trajectory::write_dataset;
use ncode_core::{run_search, EvaluatorSpec, GenConfig, SearchConfig};

use crate::args::{AblateArgs, Algo, BaselineArgs, GenDataArgs, ModeArg, ReportArgs, SearchArgs};
use crate::error::CliError;
use crate::manifest::{
    load_config, load_evaluator, load_ranker, load_space, parse_seeds, read_json, sidecar_path, write_json, write_text,
    RunManifest,
};

const GEN_LAYOUT: &str = "dataset: JSON lines at the output path; manifest: <output>.manifest.json";
const SEARCH_LAYOUT: &str =
    "trace: JSON at the output path with this manifest embedded; manifest: <output>.manifest.json";
const BASELINE_LAYOUT: &str = "per-seed traces: <out>/<algo>-seed<seed>.json; aggregate: <out>/stats.json";
const ABLATE_LAYOUT: &str =
    "per-seed traces: <out>/unshuffled-seed<seed>.json and <out>/shuffled-seed<seed>.json; aggregate: <out>/stats.json";
const REPORT_LAYOUT: &str =
    "<out>/best_so_far.csv; <out>/provenance_ratio.csv for mixed-mode traces; <out>/report.json";

fn path_text(path: Option<&Path>) -> Option<String> {
    path.map(|p| p.display().to_string())
}

/// Table lookups and synthetic landscapes (noise included) are pure
/// functions of the spec and seed; external commands are not.
fn warn_unreproducible(spec: &EvaluatorSpec) {
    if matches!(spec.kind, EvaluatorKind::External { .. }) {
        log::warn!("external evaluator; a rerun may not reproduce these outputs");
    }
}

pub(crate) fn space_validate(file: &Path) -> Result<(), CliError> {
    let space = load_space(file)?;
    println!("ok, cardinality {}", space.cardinality());
    Ok(())
}

pub(crate) fn gen_data(a: &GenDataArgs) -> Result<(), CliError> {
    let manifest = match &a.manifest {
        Some(path) => RunManifest::load(path, "gen-data")?,
        None => {
            let mut cfg: GenConfig = load_config(a.config.as_deref())?;
            if let Some(n) = a.n_samples {
                cfg.n_samples = n;
            }
            let mut m = RunManifest::new("gen-data", GEN_LAYOUT);
            m.seed = Some(a.seed.unwrap_or(0));
            m.config_path = path_text(a.config.as_deref());
            m.space = Some(load_space(a.space.as_deref().expect("required by clap"))?);
            m.evaluator = Some(load_evaluator(a.evaluator.as_deref().expect("required by clap"))?);
            m.config = serde_json::to_value(cfg).expect("config serializes");
            m
        }
    };
    let space = manifest.require(&manifest.space, "space")?;
    let spec = manifest.require(&manifest.evaluator, "evaluator")?;
    let seed = *manifest.require(&manifest.seed, "seed")?;
    let cfg: GenConfig = serde_json::from_value(manifest.config.clone())
        .map_err(|e| CliError::Validation(format!("generation config: {e}")))?;

    let evaluator = spec.build(space, seed)?;
    warn_unreproducible(spec);
    if let Some(parent) = a.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| CliError::io(parent, e))?;
    }
    let file = std::fs::File::create(&a.out).map_err(|e| CliError::io(&a.out, e))?;
    let n = write_dataset(space, evaluator.as_ref(), &cfg, seed, file)?;
    write_json(&sidecar_path(&a.out), &manifest)?;
    println!("wrote {n} samples to {}", a.out.display());
    Ok(())
}

pub(crate) fn search(a: &SearchArgs) -> Result<(), CliError> {
    let manifest = match &a.manifest {
        Some(path) => RunManifest::load(path, "search")?,
        None => {
            let mut cfg: SearchConfig = load_config(a.config.as_deref())?;
            if let Some(n) = a.n_iters {
                cfg.n_iters = n;
            }
            if let Some(mode) = a.candidate_mode {
                cfg.candidate_mode = match mode {
                    ModeArg::Random => CandidateMode::Random,
                    ModeArg::Mixed => CandidateMode::Mixed,
                };
            }
            if let Some(seed) = a.seed {
                cfg.seed = seed;
            }
            cfg.validate()?;
            let mut m = RunManifest::new("search", SEARCH_LAYOUT);
            m.seed = Some(cfg.seed);
            m.config_path = path_text(a.config.as_deref());
            m.space = Some(load_space(a.space.as_deref().expect("required by clap"))?);
            m.evaluator = Some(load_evaluator(a.evaluator.as_deref().expect("required by clap"))?);
            m.ranker = Some(load_ranker(a.ranker.as_deref().expect("required by clap"))?);
            m.config = serde_json::to_value(&cfg).expect("config serializes");
            m
        }
    };
    let space = manifest.require(&manifest.space, "space")?;
    let spec = manifest.require(&manifest.evaluator, "evaluator")?;
    let ranker_spec = manifest.require(&manifest.ranker, "ranker")?;
    let cfg: SearchConfig = serde_json::from_value(manifest.config.clone())
        .map_err(|e| CliError::Validation(format!("search config: {e}")))?;

    let evaluator = spec.build(space, cfg.seed)?;
    warn_unreproducible(spec);
    let mut ranker = ranker_spec.build(evaluator.clone())?;
    let mut trace = run_search(space, evaluator.as_ref(), ranker.as_mut(), &cfg)?;
    trace.manifest = Some(manifest.to_value());
    write_text(&a.out, &trace.to_json())?;
    write_json(&sidecar_path(&a.out), &manifest)?;

    match &trace.best {
        Some(best) => println!(
            "best {} {}={} unique_evaluations={} fallbacks={} status={}",
            best.ncode,
            evaluator.metric_name(),
            best.raw,
            trace.unique_evaluations,
            trace.fallback_count(),
            status_name(&trace.status)
        ),
        None => println!("no evaluations completed, status={}", status_name(&trace.status)),
    }
    println!("trace written to {}", a.out.display());
    check_status(&trace)
}

fn status_name(status: &RunStatus) -> &'static str {
    match status {
        RunStatus::Completed => "completed",
        RunStatus::Exhausted => "exhausted",
        RunStatus::Aborted { .. } => "aborted",
    }
}

fn check_status(trace: &SearchTrace) -> Result<(), CliError> {
    match &trace.status {
        RunStatus::Aborted { cause, reason } => {
            let msg = format!("seed {}: run aborted: {reason}", trace.seed);
            Err(match cause {
                ncode_core::search::AbortCause::Evaluator => CliError::Evaluator(msg),
                ncode_core::search::AbortCause::Ranker => CliError::Other(msg),
            })
        }
        _ => Ok(()),
    }
}

#[derive(Debug, Serialize)]
struct Summary {
    mean: Option<f64>,
    sd: Option<f64>,
}

fn summarize(values: &[f64]) -> Summary {
    Summary {
        mean: (!values.is_empty()).then(|| mean(values)),
        sd: (values.len() >= 2).then(|| std_dev(values)),
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "n/a".to_string(), |v| format!("{v:.4}"))
}

#[derive(Debug, Serialize)]
struct BaselineStats {
    manifest: RunManifest,
    algorithm: String,
    seeds: Vec<u64>,
    final_best: Vec<Option<f64>>,
    #[serde(flatten)]
    summary: Summary,
    aborted: usize,
}

pub(crate) fn baseline(a: &BaselineArgs) -> Result<(), CliError> {
    let seeds = parse_seeds(&a.seeds)?;
    let space = load_space(&a.space)?;
    let spec = load_evaluator(&a.evaluator)?;
    let mut cfg: RegEvoConfig = load_config(a.config.as_deref())?;
    if let Some(b) = a.budget {
        cfg.budget = b;
    }
    let algo = a.algo;

    let mut base = RunManifest::new("baseline", BASELINE_LAYOUT);
    base.config_path = path_text(a.config.as_deref());
    base.space = Some(space.clone());
    base.evaluator = Some(spec.clone());

    let traces = seeds
        .par_iter()
        .map(|&seed| {
            let evaluator = spec.build(&space, seed)?;
            let run_cfg = RegEvoConfig { seed, ..cfg };
            let mut trace = match algo {
                Algo::Random => run_random_search(&space, evaluator.as_ref(), cfg.budget, seed)?,
                Algo::Regevo => run_regularized_evolution(&space, evaluator.as_ref(), run_cfg)?,
            };
            let mut m = base.clone();
            m.seed = Some(seed);
            m.config = trace.config.clone();
            trace.manifest = Some(m.to_value());
            write_text(
                &a.out.join(format!("{}-seed{seed}.json", algo.name())),
                &trace.to_json(),
            )?;
            Ok(trace)
        })
        .collect::<Result<Vec<_>, CliError>>()?;

    let final_best: Vec<Option<f64>> = traces.iter().map(SearchTrace::final_best).collect();
    let values: Vec<f64> = final_best.iter().flatten().copied().collect();
    let aborted = traces
        .iter()
        .filter(|t| matches!(t.status, RunStatus::Aborted { .. }))
        .count();
    let mut manifest = base;
    manifest.seeds = seeds.clone();
    manifest.config = match algo {
        Algo::Random => serde_json::json!({ "budget": cfg.budget }),
        Algo::Regevo => serde_json::to_value(cfg).expect("config serializes"),
    };
    let stats = BaselineStats {
        manifest,
        algorithm: algo.name().to_string(),
        seeds,
        final_best,
        summary: summarize(&values),
        aborted,
    };
    write_json(&a.out.join("stats.json"), &stats)?;
    println!(
        "{} over {} seeds: mean final best {}, sd {}; written to {}",
        stats.algorithm,
        stats.seeds.len(),
        fmt_opt(stats.summary.mean),
        fmt_opt(stats.summary.sd),
        a.out.display()
    );
    traces.iter().try_for_each(check_status)
}

#[derive(Debug, Serialize)]
struct AblationStats {
    manifest: RunManifest,
    ranker: String,
    seeds: Vec<u64>,
    unshuffled: Vec<f64>,
    shuffled: Vec<f64>,
    unshuffled_summary: Summary,
    shuffled_summary: Summary,
    mean_delta: f64,
    sign_test: Option<SignTest>,
}

pub(crate) fn ablate_shuffle(a: &AblateArgs) -> Result<(), CliError> {
    let seeds = parse_seeds(&a.seeds)?;
    let space = load_space(&a.space)?;
    let spec = load_evaluator(&a.evaluator)?;
    let ranker_spec = load_ranker(&a.ranker)?;
    let mut cfg: SearchConfig = load_config(a.config.as_deref())?;
    if let Some(n) = a.n_iters {
        cfg.n_iters = n;
    }
    cfg.validate()?;

    let mut base = RunManifest::new("ablate-shuffle", ABLATE_LAYOUT);
    base.config_path = path_text(a.config.as_deref());
    base.space = Some(space.clone());
    base.evaluator = Some(spec.clone());
    base.ranker = Some(ranker_spec.clone());

    let pairs = seeds
        .par_iter()
        .map(|&seed| {
            let run_cfg = SearchConfig { seed, ..cfg.clone() };
            let evaluator = spec.build(&space, seed)?;
            let mut m = base.clone();
            m.seed = Some(seed);
            m.config = serde_json::to_value(&run_cfg).expect("config serializes");
            let run = |shuffle: bool| -> Result<SearchTrace, CliError> {
                let mut ranker = ranker_spec.build(evaluator.clone())?;
                let search = if shuffle { shuffled_history_search } else { run_search };
                let mut trace = search(&space, evaluator.as_ref(), ranker.as_mut(), &run_cfg)?;
                trace.manifest = Some(m.to_value());
                let name = if shuffle { "shuffled" } else { "unshuffled" };
                write_text(&a.out.join(format!("{name}-seed{seed}.json")), &trace.to_json())?;
                check_status(&trace)?;
                Ok(trace)
            };
            Ok((run(false)?, run(true)?))
        })
        .collect::<Result<Vec<_>, CliError>>()?;

    let best = |t: &SearchTrace| t.final_best().unwrap_or(f64::NEG_INFINITY);
    let unshuffled: Vec<f64> = pairs.iter().map(|(u, _)| best(u)).collect();
    let shuffled: Vec<f64> = pairs.iter().map(|(_, s)| best(s)).collect();
    let test = if seeds.len() < 2 {
        log::warn!("only one seed; skipping the sign test");
        None
    } else {
        Some(sign_test(&unshuffled, &shuffled))
    };
    let ranker = pairs[0].0.ranker.clone().unwrap_or_default();
    let mut manifest = base;
    manifest.seeds = seeds.clone();
    manifest.config = serde_json::to_value(&cfg).expect("config serializes");
    let stats = AblationStats {
        manifest,
        ranker,
        seeds,
        mean_delta: mean(&unshuffled) - mean(&shuffled),
        unshuffled_summary: summarize(&unshuffled),
        shuffled_summary: summarize(&shuffled),
        unshuffled,
        shuffled,
        sign_test: test,
    };
    write_json(&a.out.join("stats.json"), &stats)?;
    println!(
        "{} ranker over {} seeds: unshuffled mean {}, shuffled mean {}, delta {:.4}",
        stats.ranker,
        stats.seeds.len(),
        fmt_opt(stats.unshuffled_summary.mean),
        fmt_opt(stats.shuffled_summary.mean),
        stats.mean_delta
    );
    if let Some(t) = &stats.sign_test {
        println!(
            "sign test (unshuffled > shuffled): {} wins, {} losses, {} ties, p = {:.4}",
            t.wins, t.losses, t.ties, t.p_value
        );
    }
    Ok(())
}

#[derive(Debug, Serialize)]
struct TraceSummary {
    label: String,
    path: String,
    algorithm: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    ranker: Option<String>,
    seed: u64,
    final_best: Option<f64>,
    unique_evaluations: usize,
    status: &'static str,
}

#[derive(Debug, Serialize)]
struct Report {
    manifest: RunManifest,
    traces: Vec<TraceSummary>,
}

/// Column labels from file stems, made unique with a numeric suffix.
fn labels(paths: &[std::path::PathBuf]) -> Vec<String> {
    let mut seen: BTreeMap<String, usize> = BTreeMap::new();
    paths
        .iter()
        .map(|p| {
            let stem = p
                .file_stem()
                .map_or_else(|| p.display().to_string(), |s| s.to_string_lossy().into_owned());
            let count = seen.entry(stem.clone()).or_insert(0);
            *count += 1;
            if *count == 1 {
                stem
            } else {
                format!("{stem}#{count}")
            }
        })
        .collect()
}

/// Config with the seed removed, used to spot traces that should not be
/// compared.
fn comparable_config(trace: &SearchTrace) -> (String, Option<String>, serde_json::Value) {
    let mut config = trace.config.clone();
    if let Some(obj) = config.as_object_mut() {
        obj.remove("seed");
    }
    (trace.algorithm.clone(), trace.ranker.clone(), config)
}

fn write_columns(
    path: &Path,
    index_name: &str,
    labels: &[String],
    columns: &[Vec<(usize, f64)>],
) -> Result<(), CliError> {
    let mut rows: BTreeMap<usize, Vec<Option<f64>>> = BTreeMap::new();
    for (c, column) in columns.iter().enumerate() {
        for &(i, v) in column {
            rows.entry(i).or_insert_with(|| vec![None; columns.len()])[c] = Some(v);
        }
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    let header = std::iter::once(index_name.to_string()).chain(labels.iter().cloned());
    w.write_record(header).map_err(|e| CliError::Other(e.to_string()))?;
    for (i, row) in rows {
        let cells =
            std::iter::once(i.to_string()).chain(row.iter().map(|v| v.map_or_else(String::new, |v| v.to_string())));
        w.write_record(cells).map_err(|e| CliError::Other(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::Other(e.to_string()))?;
    write_text(path, &String::from_utf8(bytes).expect("csv is utf-8"))
}

pub(crate) fn report(a: &ReportArgs) -> Result<(), CliError> {
    if a.window == 0 {
        return Err(CliError::Usage("--window must be >= 1".into()));
    }
    let traces: Vec<SearchTrace> = a.traces.iter().map(|p| read_json(p)).collect::<Result<_, _>>()?;
    let labels = labels(&a.traces);
    for (trace, path) in traces.iter().zip(&a.traces).skip(1) {
        if trace.space != traces[0].space {
            return Err(CliError::Validation(format!(
                "{} uses space {:?} {:?}, but {} uses {:?} {:?}; refusing to compare",
                path.display(),
                trace.space.name,
                trace.space.radices,
                a.traces[0].display(),
                traces[0].space.name,
                traces[0].space.radices
            )));
        }
    }
    let first = comparable_config(&traces[0]);
    if traces.iter().any(|t| comparable_config(t) != first) {
        log::warn!("traces were produced with different algorithms or configs");
    }

    let curves: Vec<Vec<(usize, f64)>> = traces
        .iter()
        .map(|t| {
            t.best_so_far_curve()
                .into_iter()
                .enumerate()
                .map(|(i, v)| (i + 1, v))
                .collect()
        })
        .collect();
    write_columns(&a.out.join("best_so_far.csv"), "evaluation", &labels, &curves)?;

    let mut ratio_labels = Vec::new();
    let mut ratios = Vec::new();
    for (trace, label) in traces.iter().zip(&labels) {
        match provenance_ratio(trace, a.window) {
            Ok(series) => {
                if series.is_empty() {
                    log::warn!("{label}: fewer iterations than the window of {}", a.window);
                }
                ratio_labels.push(label.clone());
                ratios.push(series);
            }
            Err(SearchError::WrongMode) => {}
            Err(e) => return Err(e.into()),
        }
    }
    if !ratios.is_empty() {
        write_columns(&a.out.join("provenance_ratio.csv"), "iteration", &ratio_labels, &ratios)?;
    }

    let mut manifest = RunManifest::new("report", REPORT_LAYOUT);
    manifest.inputs = a.traces.iter().map(|p| p.display().to_string()).collect();
    manifest.config = serde_json::json!({ "window": a.window });
    let summaries: Vec<TraceSummary> = traces
        .iter()
        .zip(&labels)
        .zip(&a.traces)
        .map(|((t, label), path)| TraceSummary {
            label: label.clone(),
            path: path.display().to_string(),
            algorithm: t.algorithm.clone(),
            ranker: t.ranker.clone(),
            seed: t.seed,
            final_best: t.final_best(),
            unique_evaluations: t.unique_evaluations,
            status: status_name(&t.status),
        })
        .collect();
    for s in &summaries {
        println!(
            "{}\t{}\tseed {}\tfinal best {}\t{} evaluations\t{}",
            s.label,
            s.algorithm,
            s.seed,
            fmt_opt(s.final_best),
            s.unique_evaluations,
            s.status
        );
    }
    write_json(
        &a.out.join("report.json"),
        &Report {
            manifest,
            traces: summaries,
        },
    )?;
    if !ratios.is_empty() {
        println!("provenance ratio for {} mixed-mode trace(s) written", ratios.len());
    }
    println!("report written to {}", a.out.display());
    Ok(())
}
