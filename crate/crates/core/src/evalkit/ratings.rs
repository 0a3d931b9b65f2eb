//! Likert rating aggregation with Student-t confidence intervals.

use std::collections::BTreeMap;
use std::io::Read;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use super::EvalError;

pub const LIKERT: [u32; 5] = [20, 40, 60, 80, 100];
/// Normal quantile used beyond the table.
const Z_975: f64 = 1.96;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RatingRecord {
    pub task_name: String,
    pub paraphrase_id: String,
    pub rater_id: String,
    pub rating: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatingSummary {
    pub n: usize,
    pub mean: f64,
    pub ci_low: Option<f64>,
    pub ci_high: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RatingsReport {
    pub tasks: BTreeMap<String, RatingSummary>,
    pub rejected: usize,
}

fn t_table() -> &'static Vec<f64> {
    static T: OnceLock<Vec<f64>> = OnceLock::new();
    T.get_or_init(|| {
        let mut r = csv::Reader::from_reader(include_str!("../../data/t975.csv").as_bytes());
        r.records()
            .map(|rec| rec.expect("t table row")[1].parse::<f64>().expect("t table value"))
            .collect()
    })
}

/// Two-sided 95% Student-t quantile for `df` degrees of freedom.
pub fn t_quantile_975(df: usize) -> f64 {
    let t = t_table();
    match df {
        0 => f64::NAN,
        d if d <= t.len() => t[d - 1],
        _ => Z_975,
    }
}

/// Mean and CI per task; ratings off the scale are counted and dropped.
pub fn aggregate_ratings(records: &[RatingRecord]) -> RatingsReport {
    let mut by_task: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    let mut report = RatingsReport::default();
    for r in records {
        if LIKERT.contains(&r.rating) {
            by_task.entry(r.task_name.clone()).or_default().push(r.rating as f64);
        } else {
            report.rejected += 1;
        }
    }
    for (task, xs) in by_task {
        report.tasks.insert(task, summarize(&xs));
    }
    report
}

pub fn summarize(xs: &[f64]) -> RatingSummary {
    let n = xs.len();
    let mean = xs.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return RatingSummary {
            n,
            mean,
            ci_low: None,
            ci_high: None,
        };
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let half = t_quantile_975(n - 1) * var.sqrt() / (n as f64).sqrt();
    RatingSummary {
        n,
        mean,
        ci_low: Some(mean - half),
        ci_high: Some(mean + half),
    }
}

#[derive(Debug, Deserialize)]
struct Row {
    task_name: String,
    paraphrase_id: String,
    rater_id: String,
    rating: String,
}

/// Reads `task_name,paraphrase_id,rater_id,rating` CSV. Rows that do not
/// parse are counted as rejected rather than failing the whole file.
pub fn read_ratings_csv(input: impl Read) -> Result<(Vec<RatingRecord>, usize), EvalError> {
    let mut r = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let headers = r.headers().map_err(|e| EvalError::Invalid(e.to_string()))?.clone();
    for h in ["task_name", "paraphrase_id", "rater_id", "rating"] {
        if !headers.iter().any(|x| x == h) {
            return Err(EvalError::Invalid(format!("ratings CSV is missing the {h} column")));
        }
    }
    let mut out = Vec::new();
    let mut bad = 0;
    for row in r.deserialize::<Row>() {
        match row {
            Ok(row) => match row.rating.parse::<u32>() {
                Ok(rating) => out.push(RatingRecord {
                    task_name: row.task_name,
                    paraphrase_id: row.paraphrase_id,
                    rater_id: row.rater_id,
                    rating,
                }),
                Err(_) => bad += 1,
            },
            Err(_) => bad += 1,
        }
    }
    Ok((out, bad))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn recs(task: &str, xs: &[u32]) -> Vec<RatingRecord> {
        xs.iter()
            .enumerate()
            .map(|(i, &x)| RatingRecord {
                task_name: task.into(),
                paraphrase_id: format!("p{i}"),
                rater_id: format!("r{i}"),
                rating: x,
            })
            .collect()
    }

    #[test]
    fn zero_variance_is_degenerate() {
        let r = aggregate_ratings(&recs("tts", &[60, 60, 60]));
        let s = &r.tasks["tts"];
        assert_eq!((s.mean, s.ci_low, s.ci_high), (60.0, Some(60.0), Some(60.0)));
    }

    #[test]
    fn off_scale_is_rejected() {
        let r = aggregate_ratings(&recs("tts", &[50, 80]));
        assert_eq!(r.rejected, 1);
        assert_eq!(r.tasks["tts"].n, 1);
        assert_eq!(r.tasks["tts"].ci_low, None);
    }

    #[test]
    fn table_edges() {
        assert!((t_quantile_975(1) - 12.7062).abs() < 1e-3);
        assert_eq!(t_quantile_975(121), 1.96);
    }

    #[test]
    fn csv_input() {
        let data = "task_name,paraphrase_id,rater_id,rating\nasr,p1,r1,80\nasr,p2,r1,abc\nasr,p3,r2,100\n";
        let (rows, bad) = read_ratings_csv(data.as_bytes()).unwrap();
        assert_eq!((rows.len(), bad), (2, 1));
        assert!(read_ratings_csv("a,b\n1,2\n".as_bytes()).is_err());
    }
}
