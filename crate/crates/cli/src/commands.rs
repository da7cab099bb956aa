use std::path::{Path, PathBuf};

use serde_json::json;

use overfitguard::classifiers::{default_grid, fit, grid_search_cv, ClassifierKind, ClassifierSpec};
use overfitguard::detectors::{
    calibrate_threshold, detect, heuristic_label, heuristic_grid_search, CorrelationKind, Detector, HeuristicModel,
    HeuristicThresholds, TailDirection,
};
use overfitguard::evaluation::{evaluate_detection, evaluate_prevention, EvalReport, StrategyEntry};
use overfitguard::history::{read_history_csv, write_labels_csv, Manifest};
use overfitguard::prevention::{open_session, run_monitor, PreventionConfig};
use overfitguard::simulation::{
    architecture_grid, is_diverged, load_tabular_csv, oracle_windows, simulate_corpus, synthetic_corpus, toy_dataset,
    write_corpus, xor_dataset, CorpusParams, SyntheticCorpusConfig, TabularDataset, TabularSchema, Task,
};
use overfitguard::{Error, LossCurve, MetricSource, OverfitLabel, TrainingHistory};

use crate::args::*;
use crate::exit::{self, CliError, CliResult};
use crate::output::Output;

fn load_manifest(path: &Path) -> CliResult<Manifest> {
    Ok(Manifest::load(path)?)
}

/// Histories from the manifest with diverged runs dropped (and reported).
fn usable_histories(manifest: &Manifest, out: &Output) -> CliResult<Vec<(TrainingHistory, Option<OverfitLabel>)>> {
    let all = manifest.load_histories()?;
    let total = all.len();
    let kept: Vec<_> = all.into_iter().filter(|(h, _)| !is_diverged(h)).collect();
    if kept.len() < total {
        out.note(format!("skipping {} diverged histories", total - kept.len()));
    }
    Ok(kept)
}

fn labelled_only(histories: Vec<(TrainingHistory, Option<OverfitLabel>)>) -> Vec<(TrainingHistory, OverfitLabel)> {
    histories
        .into_iter()
        .filter_map(|(h, l)| match l {
            Some(l @ (OverfitLabel::Overfit | OverfitLabel::NonOverfit)) => Some((h, l)),
            _ => None,
        })
        .collect()
}

fn metric(choice: MetricChoice) -> MetricSource {
    match choice {
        MetricChoice::ValLoss => MetricSource::ValLoss,
        MetricChoice::ZeroOne => MetricSource::ZeroOneLoss,
    }
}

pub fn label(args: &LabelArgs, out: &Output) -> CliResult {
    let manifest = load_manifest(&args.manifest)?;
    let histories = usable_histories(&manifest, out)?;
    let direction = match args.tail_direction {
        Direction::Decrease => TailDirection::Decrease,
        Direction::Increase => TailDirection::Increase,
    };
    let (model, search) = if args.grid_search {
        let labelled = labelled_only(histories.clone());
        let search = heuristic_grid_search(&labelled, direction)?;
        (search.model, Some(search))
    } else {
        let thresholds = HeuristicThresholds::new(args.inc_p, args.dec_p, args.gap_p)?;
        (HeuristicModel::new(thresholds).with_direction(direction), None)
    };

    let mut labels = Vec::with_capacity(histories.len());
    for (h, _) in &histories {
        let l = match heuristic_label(h, &model) {
            Ok(l) => l,
            Err(Error::SegmentTooShort(msg)) => {
                out.note(format!("{}: {msg}; labelled uncertain", h.id));
                OverfitLabel::Uncertain
            }
            Err(e) => return Err(e.into()),
        };
        labels.push((h.id.clone(), l));
    }
    write_labels_csv(&labels, &args.out)?;

    let count = |want: OverfitLabel| labels.iter().filter(|(_, l)| *l == want).count();
    let summary = json!({
        "labels": args.out,
        "overfit": count(OverfitLabel::Overfit),
        "non_overfit": count(OverfitLabel::NonOverfit),
        "uncertain": count(OverfitLabel::Uncertain),
        "model": model,
        "search": search,
    });
    out.record(&summary, || {
        let t = model.thresholds;
        let mut s = format!(
            "inc_p {:.2}  dec_p {:.2}  gap_p {:.2}  tail {:?}\n",
            t.inc_p, t.dec_p, t.gap_p, model.tail_val_direction
        );
        if let Some(search) = &search {
            s += &format!(
                "overfit P {:.3}  R {:.3}  F {:.3}  macro F {:.3}\n",
                search.overfit.precision, search.overfit.recall, search.overfit.f, search.macro_f
            );
        }
        s + &format!(
            "overfit {}  non_overfit {}  uncertain {} -> {}\n",
            count(OverfitLabel::Overfit),
            count(OverfitLabel::NonOverfit),
            count(OverfitLabel::Uncertain),
            args.out.display()
        )
    })?;
    Ok(exit::OK)
}

fn read_grid(grid: &str, kind: ClassifierKind, canonical_len: usize, seed: u64) -> CliResult<Vec<ClassifierSpec>> {
    if grid == "default" {
        return Ok(default_grid(kind, canonical_len, seed));
    }
    let path = Path::new(grid);
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    let specs: Vec<ClassifierSpec> =
        serde_json::from_str(&text).map_err(|e| CliError::new(exit::INPUT_IO, format!("{grid}: {e}")))?;
    if let Some(bad) = specs.iter().find(|s| s.kind() != kind) {
        return Err(CliError::usage(format!(
            "grid entry of kind '{}' does not match --classifier {}",
            bad.kind().name(),
            kind.name()
        )));
    }
    Ok(specs)
}

pub fn train(args: &TrainArgs, seed: u64, out: &Output) -> CliResult {
    let manifest = load_manifest(&args.manifest)?;
    let labelled = labelled_only(usable_histories(&manifest, out)?);
    let correlation = match args.classifier {
        DetectorChoice::Spearman => Some(CorrelationKind::Spearman),
        DetectorChoice::Pearson => Some(CorrelationKind::Pearson),
        DetectorChoice::LaggedPearson => Some(CorrelationKind::LaggedPearson { lag: args.lag }),
        _ => None,
    };
    if let Some(kind) = correlation {
        let calibration = calibrate_threshold(kind, &labelled)?;
        Detector::Threshold(calibration.model).save(&args.out)?;
        let record = json!({
            "detector": kind.name(),
            "threshold": calibration.model.threshold,
            "macro_f": calibration.macro_f,
            "n": labelled.len(),
            "model": args.out,
        });
        return out
            .record(&record, || {
                format!(
                    "{}: threshold {:.2}, macro F {:.3} on {} histories -> {}",
                    kind.name(),
                    calibration.model.threshold,
                    calibration.macro_f,
                    labelled.len(),
                    args.out.display()
                )
            })
            .map(|_| exit::OK)
            .map_err(Into::into);
    }

    let kind = match args.classifier {
        DetectorChoice::KnnDtw => ClassifierKind::KnnDtw,
        DetectorChoice::Tsf => ClassifierKind::Tsf,
        _ => ClassifierKind::SaxVsm,
    };
    let (data, canonical_len): (Vec<(LossCurve, OverfitLabel)>, usize) = match args.windows {
        Some(w) => (oracle_windows(&labelled, w, args.window_step)?, w),
        None => (
            labelled.iter().map(|(h, l)| (h.val_loss.clone(), *l)).collect(),
            args.canonical_len,
        ),
    };
    let grid = read_grid(&args.grid, kind, canonical_len, seed)?;
    out.note(format!("cross-validating {} candidates on {} curves", grid.len(), data.len()));
    let cv = grid_search_cv(&grid, &data, seed)?;
    let best = cv.best();
    let model = fit(&best.spec, &data)?;
    Detector::Classifier(model).save(&args.out)?;
    let cv_path = args
        .cv_report
        .clone()
        .unwrap_or_else(|| args.out.with_extension("cv.json"));
    std::fs::write(&cv_path, serde_json::to_string_pretty(&cv).map_err(Error::from)? + "\n")
        .map_err(|e| Error::Io { path: cv_path.clone(), source: e })?;

    let record = json!({
        "detector": kind.name(),
        "n": data.len(),
        "cv_mean_f": best.mean_f,
        "fold_f": best.fold_f,
        "spec": best.spec,
        "model": args.out,
        "cv_report": cv_path,
    });
    out.record(&record, || {
        format!(
            "{}: best CV macro F {:.3} over {} candidates ({} curves) -> {}",
            kind.name(),
            best.mean_f,
            cv.candidates.len(),
            data.len(),
            args.out.display()
        )
    })?;
    Ok(exit::OK)
}

pub fn detect_cmd(args: &DetectArgs, out: &Output) -> CliResult {
    let model = Detector::load(&args.model)?;
    let mut code = exit::OK;
    for path in &args.histories {
        let history = match read_history_csv(path) {
            Ok(h) => h,
            Err(e) => {
                eprintln!("overfitguard: {e}");
                code = exit::INPUT_IO;
                continue;
            }
        };
        match detect(&model, &history) {
            Ok(d) => {
                let record = json!({ "id": history.id, "label": d.label, "score": d.score });
                out.record(&record, || format!("{}\t{}\t{:.4}", history.id, d.label.as_str(), d.score))?;
            }
            Err(e) => {
                eprintln!("{}: {e}", history.id);
                if code == exit::OK {
                    code = exit::FAILURE;
                }
            }
        }
    }
    Ok(code)
}

pub fn monitor(args: &MonitorArgs) -> CliResult {
    let mut config = match args.strategy {
        StrategyChoice::Es => PreventionConfig::early_stop(args.patience),
        StrategyChoice::EsSmoothed => PreventionConfig::smoothed(args.patience, args.smoothing_window),
        StrategyChoice::Rolling => PreventionConfig::rolling(args.window, args.step),
        StrategyChoice::Whole => PreventionConfig::whole_history(args.step),
    }
    .with_min_delta(args.min_delta)
    .with_metric(metric(args.metric));
    config.smoothing_window = args.smoothing_window;
    let model = match &args.model {
        Some(path) => Some(overfitguard::classifiers::load_model(path)?),
        None => None,
    };
    let mut session = open_session(config, model)?;
    let stdin = std::io::stdin().lock();
    let stdout = std::io::stdout().lock();
    let outcome = run_monitor(&mut session, stdin, stdout)?;
    Ok(outcome.exit_code())
}

fn dataset(name: &str, args: &SimulateArgs, seed: u64) -> CliResult<TabularDataset> {
    match name {
        "toy" => Ok(toy_dataset(seed)),
        "xor" => Ok(xor_dataset(seed)),
        path => {
            let (Some(n_inputs), Some(n_outputs)) = (args.n_inputs, args.n_outputs) else {
                return Err(CliError::usage("CSV datasets need --n-inputs and --n-outputs"));
            };
            let task = match args.task {
                TaskChoice::Regression => Task::Regression,
                TaskChoice::Classification => Task::Classification,
            };
            let schema = TabularSchema { n_inputs, n_outputs, task };
            Ok(load_tabular_csv(path, schema, args.split.as_deref(), seed)?)
        }
    }
}

pub fn simulate(args: &SimulateArgs, seed: u64, out: &Output) -> CliResult {
    let corpus: Vec<(TrainingHistory, Option<OverfitLabel>)> = match args.mode {
        SimulateMode::Synthetic => {
            if !(0.0..=1.0).contains(&args.overfit_fraction) {
                return Err(CliError::usage("--overfit-fraction must lie in [0, 1]"));
            }
            let n_overfit = (args.n as f64 * args.overfit_fraction).round() as usize;
            let config = SyntheticCorpusConfig {
                n_overfit,
                n_non_overfit: args.n - n_overfit,
                length: args.length,
                max_noise: args.max_noise,
                seed,
            };
            synthetic_corpus(&config)?
                .into_iter()
                .map(|(h, l)| (h, Some(l)))
                .collect()
        }
        SimulateMode::Mlp => {
            if args.split.is_some() && args.datasets.len() > 1 {
                return Err(CliError::usage("--split applies to a single CSV dataset"));
            }
            let datasets = args
                .datasets
                .iter()
                .map(|d| dataset(d, args, seed))
                .collect::<CliResult<Vec<_>>>()?;
            let mut params = CorpusParams::new(args.epochs, seed);
            params.learning_rate = args.learning_rate;
            params.batch_size = args.batch_size;
            out.note(format!(
                "training {} runs for {} epochs",
                datasets.len() * architecture_grid().len(),
                args.epochs
            ));
            simulate_corpus(&datasets, &architecture_grid(), &params)?
                .into_iter()
                .map(|h| (h, None))
                .collect()
        }
    };
    write_corpus(&args.out, &corpus)?;
    let diverged = corpus.iter().filter(|(h, _)| is_diverged(h)).count();
    let manifest = args.out.join("manifest.json");
    let record = json!({
        "histories": corpus.len(),
        "diverged": diverged,
        "manifest": manifest,
    });
    out.record(&record, || {
        format!("{} histories ({} diverged) -> {}", corpus.len(), diverged, manifest.display())
    })?;
    Ok(exit::OK)
}

fn parse_num(spec: &str, part: Option<&str>, default: Option<usize>) -> CliResult<usize> {
    match (part, default) {
        (Some(p), _) => p
            .parse()
            .map_err(|_| CliError::usage(format!("strategy '{spec}': '{p}' is not a positive integer"))),
        (None, Some(d)) => Ok(d),
        (None, None) => Err(CliError::usage(format!("strategy '{spec}' is missing a parameter"))),
    }
}

/// Parses `es:P`, `es-smoothed:P[:MA]`, `rolling:W[:S]` or `whole[:S]`.
pub fn parse_strategy(spec: &str) -> CliResult<PreventionConfig> {
    let mut parts = spec.split(':');
    let name = parts.next().unwrap_or_default();
    let a = parts.next();
    let b = parts.next();
    if parts.next().is_some() {
        return Err(CliError::usage(format!("strategy '{spec}' has too many fields")));
    }
    let config = match name {
        "es" if b.is_none() => PreventionConfig::early_stop(parse_num(spec, a, None)?),
        "es-smoothed" => PreventionConfig::smoothed(parse_num(spec, a, None)?, parse_num(spec, b, Some(10))?),
        "rolling" => PreventionConfig::rolling(parse_num(spec, a, None)?, parse_num(spec, b, Some(10))?),
        "whole" if b.is_none() => PreventionConfig::whole_history(parse_num(spec, a, Some(10))?),
        _ => return Err(CliError::usage(format!("unknown strategy '{spec}'"))),
    };
    config.validate()?;
    Ok(config)
}

fn parse_sweep(spec: &str) -> CliResult<Vec<usize>> {
    let nums: Vec<usize> = spec
        .split(':')
        .map(|p| p.parse())
        .collect::<Result<_, _>>()
        .map_err(|_| CliError::usage(format!("patience sweep '{spec}' must be LO:HI:STEP")))?;
    match nums[..] {
        [lo, hi, step] if lo >= 1 && step >= 1 && lo <= hi => Ok((lo..=hi).step_by(step).collect()),
        _ => Err(CliError::usage(format!("patience sweep '{spec}' must be LO:HI:STEP with 1 <= LO <= HI"))),
    }
}

fn write_report(report: &EvalReport, path: &Path) -> CliResult<PathBuf> {
    let io = |p: &Path, e| Error::Io { path: p.to_path_buf(), source: e };
    std::fs::write(path, report.to_json()? + "\n").map_err(|e| io(path, e))?;
    let md = path.with_extension("md");
    std::fs::write(&md, report.to_markdown()).map_err(|e| io(&md, e))?;
    Ok(md)
}

pub fn evaluate(args: &EvaluateArgs, out: &Output) -> CliResult {
    let manifest = load_manifest(&args.manifest)?;
    let histories = usable_histories(&manifest, out)?;
    let mut report = EvalReport::default();
    if args.detection {
        if args.models.is_empty() {
            return Err(CliError::usage("--detection needs at least one --model"));
        }
        let labelled = labelled_only(histories);
        for path in &args.models {
            let model = Detector::load(path)?;
            let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
            let name = format!("{stem} ({})", model.kind_name());
            report.detection.push(evaluate_detection(name, &model, &labelled, None)?);
        }
    } else {
        let mut configs = args
            .strategies
            .iter()
            .map(|s| parse_strategy(s))
            .collect::<CliResult<Vec<_>>>()?;
        if let Some(sweep) = &args.patience_sweep {
            configs.extend(parse_sweep(sweep)?.into_iter().map(PreventionConfig::early_stop));
        }
        if configs.is_empty() {
            return Err(CliError::usage("--prevention needs --strategy or --patience-sweep"));
        }
        let model = match &args.monitor_model {
            Some(path) => Some(overfitguard::classifiers::load_model(path)?),
            None => None,
        };
        let entries: Vec<StrategyEntry> = configs
            .into_iter()
            .map(|c| {
                let c = c.with_metric(metric(args.metric));
                let m = if c.strategy.uses_classifier() { model.clone() } else { None };
                StrategyEntry::new(c, m)
            })
            .collect();
        if entries.iter().any(|e| e.config.strategy.uses_classifier() && e.model.is_none()) {
            return Err(CliError::usage("classifier strategies need --monitor-model"));
        }
        let hs: Vec<TrainingHistory> = histories.into_iter().map(|(h, _)| h).collect();
        report.prevention = Some(evaluate_prevention(&entries, &hs)?);
    }
    let md = write_report(&report, &args.out)?;
    out.note(format!("report -> {} and {}", args.out.display(), md.display()));
    out.record(&report, || report.to_markdown())?;
    Ok(exit::OK)
}
