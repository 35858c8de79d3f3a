use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};

use serde_json::Value;

use super::{parse_model, CliError, PredictArgs};
use crate::dataset::{
    movie_feature_schema, parse_numeric_cell, Column, ColumnKind, DataTable, FEATURE_NAMES,
};
use crate::models::ModelKind;
use crate::persist::{self, ModelArtifact, ARTIFACT_EXTENSION};

/// One hypothetical movie: the 14 feature values as entered, in canonical order.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictRequest {
    pub values: Vec<String>,
    pub model: Option<ModelKind>,
}

fn is_numeric(field: &str) -> bool {
    movie_feature_schema().iter().any(|c| c.name == field && c.kind == ColumnKind::Numeric)
}

/// Checks a single raw value; numbers must parse and nothing may be blank.
pub(crate) fn check_field(field: &str, raw: &str) -> Result<(), CliError> {
    let raw = raw.trim();
    let ok = if is_numeric(field) {
        matches!(parse_numeric_cell(raw), Ok(Some(v)) if v.is_finite())
    } else {
        !raw.is_empty()
    };
    if ok {
        Ok(())
    } else {
        Err(CliError::InvalidField(field.to_owned()))
    }
}

impl PredictRequest {
    pub fn new(values: Vec<String>, model: Option<ModelKind>) -> Result<Self, CliError> {
        if values.len() != FEATURE_NAMES.len() {
            return Err(CliError::InvalidField(
                FEATURE_NAMES.get(values.len()).unwrap_or(&"model").to_string(),
            ));
        }
        for (name, v) in FEATURE_NAMES.iter().zip(&values) {
            check_field(name, v)?;
        }
        let values = values.into_iter().map(|v| v.trim().to_owned()).collect();
        Ok(Self { values, model })
    }

    /// Parses a JSON object keyed by feature name. Values may be strings or
    /// numbers; an optional `model` key names the model.
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let v: Value = serde_json::from_str(text)
            .map_err(|e| CliError::Usage(format!("request is not valid JSON: {e}")))?;
        let obj = v.as_object().ok_or_else(|| CliError::Usage("request must be a JSON object".into()))?;
        let mut values = Vec::with_capacity(FEATURE_NAMES.len());
        for name in FEATURE_NAMES {
            let raw = match obj.get(name) {
                Some(Value::String(s)) => s.clone(),
                Some(Value::Number(n)) => n.to_string(),
                _ => return Err(CliError::InvalidField(name.to_owned())),
            };
            check_field(name, &raw)?;
            values.push(raw);
        }
        let model = match obj.get("model") {
            None | Some(Value::Null) => None,
            Some(Value::String(s)) => {
                Some(s.parse().map_err(|_| CliError::InvalidField("model".into()))?)
            }
            Some(_) => return Err(CliError::InvalidField("model".into())),
        };
        Self::new(values, model)
    }

    /// A one-row table with the feature-only schema.
    pub fn to_table(&self) -> Result<DataTable, CliError> {
        let columns = movie_feature_schema()
            .iter()
            .zip(&self.values)
            .map(|(spec, raw)| match spec.kind {
                ColumnKind::Numeric => parse_numeric_cell(raw)
                    .ok()
                    .flatten()
                    .map(|v| Column::Numeric(vec![Some(v)]))
                    .ok_or_else(|| CliError::InvalidField(spec.name.clone())),
                ColumnKind::Categorical => Ok(Column::Categorical(vec![Some(raw.clone())])),
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(DataTable::new(movie_feature_schema(), columns)?)
    }
}

/// `1234567.891` -> `1,234,567.89`.
pub fn format_currency(v: f64) -> String {
    if !v.is_finite() {
        return v.to_string();
    }
    let s = format!("{:.2}", v.abs());
    let (int, frac) = s.split_once('.').expect("fixed-point format has a dot");
    let mut grouped = String::with_capacity(int.len() + int.len() / 3);
    for (i, c) in int.chars().enumerate() {
        if i > 0 && (int.len() - i) % 3 == 0 {
            grouped.push(',');
        }
        grouped.push(c);
    }
    let sign = if v < 0.0 && s.bytes().any(|b| b.is_ascii_digit() && b != b'0') { "-" } else { "" };
    format!("{sign}{grouped}.{frac}")
}

fn say(out: &mut dyn Write, text: &str) -> Result<(), CliError> {
    out.write_all(text.as_bytes())
        .and_then(|_| out.flush())
        .map_err(CliError::io("writing output"))
}

fn read_answer(out: &mut dyn Write, input: &mut dyn BufRead, prompt: &str) -> Result<String, CliError> {
    say(out, prompt)?;
    let mut line = String::new();
    let n = input.read_line(&mut line).map_err(CliError::io("reading input"))?;
    if n == 0 {
        return Err(CliError::Usage("input ended before the request was complete".into()));
    }
    Ok(line.trim().to_owned())
}

fn prompt_fields(out: &mut dyn Write, input: &mut dyn BufRead) -> Result<Vec<String>, CliError> {
    say(out, "Enter the 14 movie parameters.\n")?;
    let mut values = Vec::with_capacity(FEATURE_NAMES.len());
    for name in FEATURE_NAMES {
        let hint = if is_numeric(name) { " (number)" } else { "" };
        loop {
            let answer = read_answer(out, input, &format!("{name}{hint}: "))?;
            match check_field(name, &answer) {
                Ok(()) => {
                    values.push(answer);
                    break;
                }
                Err(_) => say(out, &format!("invalid value for `{name}`, try again\n"))?,
            }
        }
    }
    Ok(values)
}

fn prompt_model(out: &mut dyn Write, input: &mut dyn BufRead) -> Result<ModelKind, CliError> {
    let mut menu = String::from("Choose a model:\n");
    for (i, k) in ModelKind::MENU.iter().enumerate() {
        menu.push_str(&format!("  {}. {}\n", i + 1, k.display_name()));
    }
    say(out, &menu)?;
    loop {
        let answer = read_answer(out, input, "model [1-6]: ")?;
        match answer.parse::<usize>() {
            Ok(i) if (1..=ModelKind::MENU.len()).contains(&i) => return Ok(ModelKind::MENU[i - 1]),
            _ => say(out, "invalid choice, enter a number from 1 to 6\n")?,
        }
    }
}

fn artifact_in_dir(dir: &Path, kind: ModelKind) -> PathBuf {
    dir.join(format!("{}{}", kind.id(), ARTIFACT_EXTENSION))
}

/// Predicts the gross (currency units) of one movie. With a directory artifact
/// the model comes from `--model`, the request's `model` key, or the menu.
pub fn cmd_predict(
    args: &PredictArgs,
    out: &mut dyn Write,
    input: &mut dyn BufRead,
) -> Result<f64, CliError> {
    let from_dir = args.artifact.is_dir();
    let flag_model = args.model.as_deref().map(parse_model).transpose()?;

    let request = match &args.input {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(CliError::io(format!("reading {}", path.display())))?;
            PredictRequest::from_json(&text)?
        }
        None => PredictRequest::new(prompt_fields(out, input)?, None)?,
    };

    let artifact: ModelArtifact = if from_dir {
        let kind = match flag_model.or(request.model) {
            Some(k) => k,
            None if args.input.is_none() => prompt_model(out, input)?,
            None => return Err(CliError::Usage("choose a model with --model when --artifact is a directory".into())),
        };
        persist::load(artifact_in_dir(&args.artifact, kind))?
    } else {
        let artifact = persist::load(&args.artifact)?;
        if let Some(k) = flag_model {
            if k != artifact.model_kind {
                return Err(CliError::Usage(format!(
                    "--model {k} does not match the artifact's model `{}`",
                    artifact.model_kind
                )));
            }
        }
        artifact
    };

    let (gross, warnings) = artifact.predict_gross(&request.to_table()?)?;
    let mut msg = String::new();
    for w in &warnings {
        msg.push_str(&format!(
            "warning: unseen {} `{}`; encoded with the fallback code\n",
            w.column, w.value
        ));
    }
    msg.push_str(&format!(
        "Predicted gross ({}): ${}\n",
        artifact.model_kind.display_name(),
        format_currency(gross[0])
    ));
    say(out, &msg)?;
    Ok(gross[0])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn currency() {
        assert_eq!(format_currency(18f64.exp_m1()), "65,659,968.14");
        assert_eq!(format_currency(0.0), "0.00");
        assert_eq!(format_currency(999.999), "1,000.00");
        assert_eq!(format_currency(-1234.5), "-1,234.50");
        assert_eq!(format_currency(-0.001), "0.00");
        assert_eq!(format_currency(100.0), "100.00");
    }

    fn json_request() -> serde_json::Map<String, Value> {
        let mut m = serde_json::Map::new();
        for name in FEATURE_NAMES {
            let v = if is_numeric(name) { Value::from(10) } else { Value::from("x") };
            m.insert(name.to_owned(), v);
        }
        m
    }

    #[test]
    fn json_accepts_strings_and_numbers() {
        let mut m = json_request();
        m.insert("budget".into(), Value::from("1,500,000"));
        let r = PredictRequest::from_json(&Value::Object(m).to_string()).unwrap();
        let t = r.to_table().unwrap();
        assert_eq!(t.numeric_values("budget").unwrap(), vec![1_500_000.0]);
        assert_eq!(t.row_count(), 1);
    }

    #[test]
    fn missing_or_bad_field_is_invalid() {
        let mut m = json_request();
        m.remove("director");
        match PredictRequest::from_json(&Value::Object(m).to_string()) {
            Err(CliError::InvalidField(f)) => assert_eq!(f, "director"),
            other => panic!("unexpected {other:?}"),
        }
        let mut m = json_request();
        m.insert("year".into(), Value::from("soon"));
        assert!(matches!(
            PredictRequest::from_json(&Value::Object(m).to_string()),
            Err(CliError::InvalidField(f)) if f == "year"
        ));
    }

    #[test]
    fn interactive_reprompts() {
        let mut answers = String::new();
        for name in FEATURE_NAMES {
            if name == "score" {
                answers.push_str("high\n");
            }
            answers.push_str(if is_numeric(name) { "7\n" } else { "x\n" });
        }
        let mut out = Vec::new();
        let values = prompt_fields(&mut out, &mut answers.as_bytes()).unwrap();
        assert_eq!(values.len(), 14);
        let shown = String::from_utf8(out).unwrap();
        assert!(shown.contains("invalid value for `score`"));
        let first = shown.find("name: ").unwrap();
        let last = shown.find("runtime (number): ").unwrap();
        assert!(first < last);
    }

    #[test]
    fn menu_numbering() {
        let mut out = Vec::new();
        let kind = prompt_model(&mut out, &mut "9\n5\n".as_bytes()).unwrap();
        assert_eq!(kind, ModelKind::Xgb);
        let shown = String::from_utf8(out).unwrap();
        assert!(shown.contains("1. Linear Regression"));
        assert!(shown.contains("6. Gradient Boosting"));
    }
}
