use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

use super::{parse_model, CliError, EvaluateArgs, SelectArgs, SummarizeArgs, TrainArgs};
use crate::analysis::{self, FScoreTable, DEFAULT_GROSS_EDGES};
use crate::dataset::{self, movie_schema, ColumnKind, ColumnRole, DataTable, TARGET_COLUMN};
use crate::matrix::Matrix;
use crate::metrics::{EvalReport, SplitLabel, REPORT_CSV_HEADER};
use crate::models::{fit_model, staged_train_r2, Model, ModelKind, ModelParams};
use crate::persist::{self, ModelArtifact, ARTIFACT_EXTENSION};
use crate::preprocess::{fit_encoders, encode_table, fit_pipeline, PipelineConfig};
use crate::tuning::{grid_search, CvResult, ParamGrid};

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    std::fs::write(path, contents).map_err(CliError::io(format!("writing {}", path.display())))
}

fn say(out: &mut dyn Write, text: &str) -> Result<(), CliError> {
    out.write_all(text.as_bytes()).map_err(CliError::io("writing output"))
}

/// `m.mrp.json` -> `m`; other paths lose only their final extension.
pub fn artifact_stem(path: &Path) -> PathBuf {
    let s = path.to_string_lossy();
    if let Some(stripped) = s.strip_suffix(ARTIFACT_EXTENSION) {
        return PathBuf::from(stripped);
    }
    path.with_extension("")
}

fn with_suffix(stem: &Path, suffix: &str) -> PathBuf {
    let mut s = stem.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn load_clean(path: &Path) -> Result<DataTable, CliError> {
    let raw = dataset::load_table(path, &movie_schema())?;
    Ok(dataset::drop_incomplete_rows(&raw)?)
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub train: EvalReport,
    pub test: EvalReport,
    pub artifact: ModelArtifact,
    pub cv: Option<CvResult>,
    pub r2_curve: Option<Vec<(usize, f64)>>,
}

fn resolve_grid(spec: &str, kind: ModelKind) -> Result<ParamGrid, CliError> {
    if spec == "default" {
        return ParamGrid::default_for(kind)
            .ok_or_else(|| CliError::Usage(format!("model `{kind}` has no tunable parameters")));
    }
    let text = std::fs::read_to_string(spec).map_err(CliError::io(format!("reading grid {spec}")))?;
    Ok(ParamGrid::from_json(&text)?)
}

pub(crate) fn report_table(reports: &[&EvalReport]) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{:<10} {:<6} {:>9} {:>9} {:>12} {:>12} {:>6}  space", "model", "split", "R2", "MAPE", "MSLE", "MSE", "n");
    for r in reports {
        let _ = writeln!(
            s,
            "{:<10} {:<6} {:>9.4} {:>8.2}% {:>12.6} {:>12.6} {:>6}  {}",
            r.model,
            r.split.as_str(),
            r.r2,
            r.mape_percent,
            r.msle,
            r.mse,
            r.n,
            r.target_space.as_str()
        );
    }
    s
}

fn reports_csv(reports: &[&EvalReport]) -> String {
    let mut s = String::from(REPORT_CSV_HEADER);
    s.push('\n');
    for r in reports {
        s.push_str(&r.csv_row());
        s.push('\n');
    }
    s
}

/// clean -> split -> fit pipeline on train -> optional grid search -> final fit
/// -> train/test reports -> artifact.
pub fn cmd_train(args: &TrainArgs, out: &mut dyn Write) -> Result<TrainOutcome, CliError> {
    let kind = parse_model(&args.model)?;
    if args.track_r2.is_some() && !kind.is_boosting() {
        return Err(CliError::Usage("--track-r2 needs a boosting model (gbm or xgb)".into()));
    }
    let table = load_clean(&args.data)?;
    let split = dataset::train_test_split(&table, args.seed, args.test_fraction)?;
    let train_table = table.select_rows(&split.train);
    let test_table = table.select_rows(&split.test);

    let config = PipelineConfig {
        scale: kind == ModelKind::Linear && !args.no_scale,
        log_money: !args.no_log_money,
    };
    let pipeline = fit_pipeline(&train_table, config)?;
    let (x_train, y_train) = pipeline.transform(&train_table)?;
    let (x_test, y_test) = pipeline.transform(&test_table)?;

    let mut params = ModelParams::defaults(kind);
    let cv = match &args.grid {
        Some(spec) => {
            let grid = resolve_grid(spec, kind)?;
            let cv = grid_search(kind, &grid, &x_train, &y_train, args.folds, args.seed)?;
            params = cv.best_model_params(&params)?;
            Some(cv)
        }
        None => None,
    };
    let model = fit_model(kind, &params, &x_train, &y_train, args.seed)?;

    let evaluate = |split: SplitLabel, x: &Matrix, y: &[f64], model: &Model| {
        let pred = model.predict(x)?;
        EvalReport::compute(kind.id(), split, y, &pred, pipeline.log_target, args.raw_space_metrics)
            .map_err(CliError::from)
    };
    let train_report = evaluate(SplitLabel::Train, &x_train, &y_train, &model)?;
    let test_report = evaluate(SplitLabel::Test, &x_test, &y_test, &model)?;

    let r2_curve = match (&args.track_r2, &model) {
        (Some(path), Model::Ensemble(e)) => {
            let curve = staged_train_r2(e, &x_train, &y_train)?;
            let mut s = String::from("iteration,r2\n");
            for (it, r2) in &curve {
                let _ = writeln!(s, "{it},{r2}");
            }
            write_file(path, &s)?;
            Some(curve)
        }
        _ => None,
    };

    let artifact = ModelArtifact::new(pipeline.clone(), kind, model, args.seed, params);
    persist::save(&artifact, &args.out)?;

    let stem = artifact_stem(&args.out);
    let reports = [&train_report, &test_report];
    write_file(&with_suffix(&stem, ".report.csv"), &reports_csv(&reports))?;
    let json = serde_json::to_string_pretty(&[&train_report, &test_report]).expect("report serializes");
    write_file(&with_suffix(&stem, ".report.json"), &(json + "\n"))?;
    if let Some(cv) = &cv {
        write_file(&with_suffix(&stem, ".cv.csv"), &cv.to_csv())?;
        let json = serde_json::to_string_pretty(cv).expect("cv result serializes");
        write_file(&with_suffix(&stem, ".cv.json"), &(json + "\n"))?;
    }

    let mut msg = format!(
        "{} ({}): {} rows after cleaning, {} train / {} test\n",
        kind.display_name(),
        kind.id(),
        table.row_count(),
        split.train.len(),
        split.test.len()
    );
    if let Some(cv) = &cv {
        let best: Vec<String> = cv.best_params.iter().map(|(n, v)| format!("{n}={v}")).collect();
        let _ = writeln!(
            msg,
            "grid search: {} combinations, {}-fold, best mean R2 {:.4} with {}",
            cv.entries.len(),
            cv.k,
            cv.best_score,
            best.join(", ")
        );
    }
    msg.push_str(&report_table(&reports));
    let _ = writeln!(msg, "saved {}", args.out.display());
    say(out, &msg)?;

    Ok(TrainOutcome { train: train_report, test: test_report, artifact, cv, r2_curve })
}

pub fn cmd_evaluate(args: &EvaluateArgs, out: &mut dyn Write) -> Result<EvalReport, CliError> {
    let artifact = persist::load(&args.artifact)?;
    artifact.check_schema()?;
    let table = load_clean(&args.data)?;
    let (x, y) = artifact.pipeline.transform(&table)?;
    let pred = artifact.model_payload.predict(&x)?;
    let report = EvalReport::compute(
        artifact.model_kind.id(),
        SplitLabel::Test,
        &y,
        &pred,
        artifact.pipeline.log_target,
        args.raw_space_metrics,
    )?;
    if let Some(path) = &args.out {
        write_file(path, &reports_csv(&[&report]))?;
    }
    say(out, &report_table(&[&report]))?;
    Ok(report)
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_owned()
    }
}

pub fn cmd_summarize(args: &SummarizeArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let table = load_clean(&args.data)?;
    std::fs::create_dir_all(&args.out).map_err(CliError::io(format!("creating {}", args.out.display())))?;

    let stats = analysis::summarize(&table)?;
    let mut s = String::from("column,n,mean,median,stddev,min,max,q1,q3\n");
    for c in &stats.columns {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{}",
            c.column, c.n, c.mean, c.median, c.stddev, c.min, c.max, c.q1, c.q3
        );
    }
    write_file(&args.out.join("summary.csv"), &s)?;

    let gross = table.numeric_values(TARGET_COLUMN)?;
    let mut corr = String::from("column,pearson_r\n");
    for spec in table.schema() {
        if spec.kind == ColumnKind::Numeric && spec.role == ColumnRole::Feature {
            let v = table.numeric_values(&spec.name)?;
            match analysis::pearson_r(&v, &gross) {
                Ok(r) => {
                    let _ = writeln!(corr, "{},{}", spec.name, r);
                }
                Err(_) => {
                    let _ = writeln!(corr, "{},", spec.name);
                }
            }
        }
    }
    write_file(&args.out.join("correlations.csv"), &corr)?;

    let mut countries = String::from("country,count\n");
    for (c, n) in analysis::category_counts(&table, "country")? {
        let _ = writeln!(countries, "{},{}", csv_field(&c), n);
    }
    write_file(&args.out.join("country_counts.csv"), &countries)?;

    let mut hist = String::from("lower,upper,count\n");
    for b in analysis::gross_histogram(&gross, &DEFAULT_GROSS_EDGES)? {
        let _ = writeln!(hist, "{},{},{}", b.lower, b.upper, b.count);
    }
    write_file(&args.out.join("gross_histogram.csv"), &hist)?;

    let mut msg = format!("{} rows after cleaning\n", table.row_count());
    let _ = writeln!(msg, "{:<8} {:>16} {:>16} {:>16} {:>16} {:>16}", "column", "mean", "median", "stddev", "min", "max");
    for c in &stats.columns {
        let _ = writeln!(
            msg,
            "{:<8} {:>16.4} {:>16.4} {:>16.4} {:>16.4} {:>16.4}",
            c.column, c.mean, c.median, c.stddev, c.min, c.max
        );
    }
    let _ = writeln!(msg, "wrote summary.csv, correlations.csv, country_counts.csv, gross_histogram.csv to {}", args.out.display());
    say(out, &msg)
}

fn fscore_csv(t: &FScoreTable) -> String {
    let mut s = String::from("rank,feature,score,selected\n");
    for (i, e) in t.entries.iter().enumerate() {
        let _ = writeln!(s, "{},{},{},{}", i + 1, csv_field(&e.feature), e.score, e.selected);
    }
    s
}

/// F scores of every feature against raw gross on the cleaned table.
pub fn cmd_select_features(args: &SelectArgs, out: &mut dyn Write) -> Result<FScoreTable, CliError> {
    let table = load_clean(&args.data)?;
    let y = table.numeric_values(TARGET_COLUMN)?;
    let scores = if args.expand_categories {
        analysis::expanded_feature_scores(&table, &y, args.k)?
    } else {
        let encoder = fit_encoders(&table)?;
        let (encoded, _) = encode_table(&table, &encoder)?;
        let names: Vec<String> = dataset::FEATURE_NAMES.iter().map(|s| s.to_string()).collect();
        let columns = names
            .iter()
            .map(|n| encoded.numeric_values(n))
            .collect::<Result<Vec<_>, _>>()?;
        analysis::select_k_best(&Matrix::from_columns(&columns), &names, &y, args.k)?
    };
    write_file(&args.out, &fscore_csv(&scores))?;

    let shown = match args.min_score {
        Some(min) => {
            let kept = analysis::threshold_scores(&scores, min);
            let path = with_suffix(&args.out.with_extension(""), ".thresholded.csv");
            write_file(&path, &fscore_csv(&kept))?;
            kept
        }
        None => scores.clone(),
    };
    let mut msg = String::new();
    let _ = writeln!(msg, "{:>5}  {:<40} {:>16}  selected", "rank", "feature", "F score");
    for (i, e) in shown.entries.iter().enumerate() {
        let line = format!("{:>5}  {:<40} {:>16.3}  {}", i + 1, e.feature, e.score, if e.selected { "yes" } else { "" });
        let _ = writeln!(msg, "{}", line.trim_end());
    }
    say(out, &msg)?;
    Ok(shown)
}
