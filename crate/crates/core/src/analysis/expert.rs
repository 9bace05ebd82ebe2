//! Expert competence ratings, CSV `rater,item_id,score`.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::AnalysisError;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExpertRating {
    pub rater: String,
    pub item_id: u32,
    /// 1 = completely incompetent, 5 = completely competent.
    pub score: u8,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ExpertRatings {
    pub ratings: Vec<ExpertRating>,
}

fn row_err(row: usize, reason: impl Into<String>) -> AnalysisError {
    AnalysisError::ExpertRatings { row, reason: reason.into() }
}

impl ExpertRatings {
    pub fn from_reader<R: Read>(reader: R) -> Result<Self, AnalysisError> {
        let mut rdr = csv::Reader::from_reader(reader);
        let headers = rdr.headers()?.clone();
        if headers.iter().map(str::trim).collect::<Vec<_>>() != ["rater", "item_id", "score"] {
            return Err(row_err(1, "header must be rater,item_id,score"));
        }
        let mut seen = BTreeSet::new();
        let mut ratings = Vec::new();
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let row = i + 2;
            let rater = rec.get(0).unwrap_or("").trim().to_string();
            if rater.is_empty() {
                return Err(row_err(row, "empty rater id"));
            }
            let item_id: u32 = rec
                .get(1)
                .unwrap_or("")
                .trim()
                .parse()
                .map_err(|_| row_err(row, "item_id is not an integer"))?;
            let score: u8 = rec
                .get(2)
                .unwrap_or("")
                .trim()
                .parse()
                .map_err(|_| row_err(row, "score is not an integer"))?;
            if !(1..=5).contains(&score) {
                return Err(row_err(row, format!("score {score} outside 1-5")));
            }
            if !seen.insert((rater.clone(), item_id)) {
                return Err(row_err(row, format!("second score by {rater} for item {item_id}")));
            }
            ratings.push(ExpertRating { rater, item_id, score });
        }
        if ratings.is_empty() {
            return Err(row_err(1, "no ratings"));
        }
        Ok(Self { ratings })
    }

    pub fn load(path: &Path) -> Result<Self, AnalysisError> {
        Self::from_reader(std::fs::File::open(path)?)
    }

    pub fn raters(&self) -> BTreeSet<&str> {
        self.ratings.iter().map(|r| r.rater.as_str()).collect()
    }

    /// Unweighted mean over raters, per item.
    pub fn item_means(&self) -> BTreeMap<u32, f64> {
        let mut acc: BTreeMap<u32, (f64, u32)> = BTreeMap::new();
        for r in &self.ratings {
            let e = acc.entry(r.item_id).or_default();
            e.0 += f64::from(r.score);
            e.1 += 1;
        }
        acc.into_iter().map(|(k, (s, n))| (k, s / f64::from(n))).collect()
    }
}
