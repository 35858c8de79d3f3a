#![allow(dead_code)]

use std::path::{Path, PathBuf};

use mrp_core::matrix::Matrix;
use mrp_core::rng::Rng;

const RATINGS: [&str; 6] = ["G", "PG", "PG-13", "R", "NC-17", "Not Rated"];
const GENRES: [&str; 6] = ["Action", "Comedy", "Drama", "Horror", "Animation", "Adventure"];
const COUNTRIES: [&str; 5] = ["United States", "United Kingdom", "France", "Canada", "Korea, South"];
const MONTHS: [&str; 12] = [
    "January", "February", "March", "April", "May", "June", "July", "August", "September",
    "October", "November", "December",
];

pub const HEADER: [&str; 15] = [
    "name", "rating", "genre", "year", "released", "score", "votes", "director", "writer", "star",
    "country", "budget", "company", "runtime", "gross",
];

/// Roughly standard normal (Irwin-Hall with 12 terms).
pub fn normal(rng: &mut Rng) -> f64 {
    (0..12).map(|_| rng.next_f64()).sum::<f64>() - 6.0
}

fn pick<'a>(rng: &mut Rng, items: &[&'a str]) -> &'a str {
    items[rng.below(items.len() as u64) as usize]
}

/// Synthetic movie rows whose gross depends on budget, votes and score.
/// With `holes`, a few rows get missing cells.
pub fn movie_rows(n: usize, seed: u64, holes: bool) -> Vec<Vec<String>> {
    let mut rng = Rng::new(seed);
    (0..n)
        .map(|i| {
            let year = 1980 + rng.below(41);
            let score = 1.0 + (rng.below(81) as f64) / 10.0;
            let votes = (10f64.powf(3.0 + 3.0 * rng.next_f64())).round();
            let budget = (13.0 + 6.0 * rng.next_f64()).exp().round();
            let runtime = 80 + rng.below(100);
            let genre = pick(&mut rng, &GENRES);
            let genre_boost = if genre == "Animation" || genre == "Adventure" { 0.4 } else { 0.0 };
            let log_gross = budget.ln()
                + 0.25 * (score - 6.0)
                + 0.35 * (votes / 1e4).ln()
                + genre_boost
                + 0.3 * normal(&mut rng);
            let gross = log_gross.exp().round().max(1.0);
            let mut row = vec![
                format!("Movie {i}"),
                pick(&mut rng, &RATINGS).to_string(),
                genre.to_string(),
                year.to_string(),
                format!("{} {}, {} (United States)", pick(&mut rng, &MONTHS), 1 + rng.below(28), year),
                format!("{score:.1}"),
                format!("{votes}"),
                format!("Director {}", rng.below(30)),
                format!("Writer {}", rng.below(40)),
                format!("Star {}", rng.below(50)),
                pick(&mut rng, &COUNTRIES).to_string(),
                format!("{budget}"),
                format!("Company {}", rng.below(15)),
                runtime.to_string(),
                format!("{gross}"),
            ];
            if holes {
                if i % 17 == 5 {
                    row[11].clear();
                }
                if i % 23 == 7 {
                    row[1] = "NA".into();
                }
            }
            row
        })
        .collect()
}

pub fn csv_text(rows: &[Vec<String>]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(HEADER).unwrap();
    for r in rows {
        w.write_record(r).unwrap();
    }
    String::from_utf8(w.into_inner().unwrap()).unwrap()
}

pub fn write_movie_csv(dir: &Path, name: &str, n: usize, seed: u64) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, csv_text(&movie_rows(n, seed, true))).unwrap();
    path
}

/// Random regression data. With `integer`, features and targets are small
/// integers so split scores can be compared exactly.
pub fn random_data(rng: &mut Rng, n: usize, p: usize, integer: bool) -> (Matrix, Vec<f64>) {
    let mut data = Vec::with_capacity(n * p);
    let mut y = Vec::with_capacity(n);
    for _ in 0..n {
        let mut row = Vec::with_capacity(p);
        for _ in 0..p {
            row.push(if integer { rng.below(12) as f64 } else { rng.next_f64() * 10.0 - 5.0 });
        }
        let signal = row.first().copied().unwrap_or(0.0) * 2.0 - row.get(1).copied().unwrap_or(0.0);
        let v = if integer {
            (signal + rng.below(7) as f64).round()
        } else {
            signal + normal(rng)
        };
        data.extend_from_slice(&row);
        y.push(v);
    }
    (Matrix::new(n, p, data), y)
}

pub const GOLDEN_PATH: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/tests/data/golden_gbm.mrp.json");

/// The fixture artifact behind the golden file: 10 depth-2 boosting trees on
/// 40 synthetic movies, log-money pipeline, seed 42.
pub fn golden_artifact() -> mrp_core::ModelArtifact {
    use mrp_core::dataset::{movie_schema, read_table};
    use mrp_core::models::{fit_model, ModelKind, ModelParams};
    use mrp_core::preprocess::{fit_pipeline, PipelineConfig};

    let t = read_table(csv_text(&movie_rows(40, 2024, false)).as_bytes(), &movie_schema()).unwrap();
    let pipeline = fit_pipeline(&t, PipelineConfig { scale: false, log_money: true }).unwrap();
    let (x, y) = pipeline.transform(&t).unwrap();
    let mut params = ModelParams::defaults(ModelKind::Gbm);
    params.n_estimators = 10;
    params.max_depth = Some(2);
    let model = fit_model(ModelKind::Gbm, &params, &x, &y, 42).unwrap();
    let mut a = mrp_core::ModelArtifact::new(pipeline, ModelKind::Gbm, model, 42, params);
    a.created_utc = "1970-01-01T00:00:00Z".into();
    a
}
