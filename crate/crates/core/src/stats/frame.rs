//! Model frames: response, cell-means design, and item grouping.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::StatsError;

/// A fixed factor and its ordered levels.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Factor {
    pub name: String,
    pub levels: Vec<String>,
}

impl Factor {
    pub fn new(name: impl Into<String>, levels: impl IntoIterator<Item = impl Into<String>>) -> Self {
        Self { name: name.into(), levels: levels.into_iter().map(Into::into).collect() }
    }

    pub fn level_index(&self, level: &str) -> Option<usize> {
        self.levels.iter().position(|l| l == level)
    }
}

/// Full-interaction cell layout. Cell indices are mixed-radix with the first
/// factor varying slowest.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CellLayout {
    pub factors: Vec<Factor>,
}

impl CellLayout {
    pub fn new(factors: Vec<Factor>) -> Self {
        Self { factors }
    }

    pub fn n_cells(&self) -> usize {
        self.factors.iter().map(|f| f.levels.len()).product()
    }

    pub fn factor_index(&self, name: &str) -> Option<usize> {
        self.factors.iter().position(|f| f.name == name)
    }

    pub fn factor(&self, name: &str) -> Option<&Factor> {
        self.factors.iter().find(|f| f.name == name)
    }

    pub fn cell_index(&self, level_idx: &[usize]) -> usize {
        debug_assert_eq!(level_idx.len(), self.factors.len());
        level_idx
            .iter()
            .zip(&self.factors)
            .fold(0, |acc, (&i, f)| acc * f.levels.len() + i)
    }

    pub fn cell_levels(&self, mut cell: usize) -> Vec<usize> {
        let mut out = vec![0; self.factors.len()];
        for (slot, f) in out.iter_mut().zip(&self.factors).rev() {
            let n = f.levels.len();
            *slot = cell % n;
            cell /= n;
        }
        out
    }

    pub fn cell_label(&self, cell: usize) -> String {
        self.cell_levels(cell)
            .iter()
            .zip(&self.factors)
            .map(|(&i, f)| format!("{}={}", f.name, f.levels[i]))
            .collect::<Vec<_>>()
            .join(",")
    }

    /// Cell weights for the equal-weight marginal mean with some factors held
    /// at fixed levels and the rest averaged out.
    pub fn marginal_weights(&self, fixed: &[Option<usize>]) -> DVector<f64> {
        let rows: Vec<DMatrix<f64>> = self
            .factors
            .iter()
            .zip(fixed)
            .map(|(f, fix)| {
                let n = f.levels.len();
                match fix {
                    Some(i) => DMatrix::from_fn(1, n, |_, j| if j == *i { 1.0 } else { 0.0 }),
                    None => DMatrix::from_element(1, n, 1.0 / n as f64),
                }
            })
            .collect();
        let k = kron_all(&rows);
        DVector::from_iterator(k.ncols(), k.row(0).iter().copied())
    }

    /// Hypothesis matrix for an effect term (a set of factor names) in the
    /// cell-means parameterization: successive-difference contrasts on the
    /// term's factors, equal-weight averages over the rest.
    pub fn effect_matrix(&self, term: &[&str]) -> Result<DMatrix<f64>, StatsError> {
        for name in term {
            if self.factor_index(name).is_none() {
                return Err(StatsError::InestimableCombination(format!("unknown factor {name:?}")));
            }
        }
        let parts: Vec<DMatrix<f64>> = self
            .factors
            .iter()
            .map(|f| {
                let n = f.levels.len();
                if term.contains(&f.name.as_str()) {
                    DMatrix::from_fn(n.saturating_sub(1), n, |i, j| {
                        if j == i {
                            1.0
                        } else if j == i + 1 {
                            -1.0
                        } else {
                            0.0
                        }
                    })
                } else {
                    DMatrix::from_element(1, n, 1.0 / n as f64)
                }
            })
            .collect();
        let l = kron_all(&parts);
        if l.nrows() == 0 {
            return Err(StatsError::SingularHypothesis(format!(
                "term {} has a single-level factor",
                term.join(":")
            )));
        }
        Ok(l)
    }

    /// Every effect term: main effects, then two-way interactions, and so on.
    pub fn all_terms(&self) -> Vec<Vec<String>> {
        let k = self.factors.len();
        let mut terms: Vec<Vec<usize>> = (1u32..(1 << k))
            .map(|mask| (0..k).filter(|i| mask & (1 << i) != 0).collect())
            .collect();
        terms.sort_by(|a, b| a.len().cmp(&b.len()).then(a.cmp(b)));
        terms
            .into_iter()
            .filter(|t| t.iter().all(|&i| self.factors[i].levels.len() > 1))
            .map(|t| t.into_iter().map(|i| self.factors[i].name.clone()).collect())
            .collect()
    }
}

pub(crate) fn kron(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let (ar, ac) = a.shape();
    let (br, bc) = b.shape();
    DMatrix::from_fn(ar * br, ac * bc, |i, j| a[(i / br, j / bc)] * b[(i % br, j % bc)])
}

fn kron_all(parts: &[DMatrix<f64>]) -> DMatrix<f64> {
    parts
        .iter()
        .fold(DMatrix::from_element(1, 1, 1.0), |acc, m| kron(&acc, m))
}

/// How replications enter the model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnalysisMode {
    /// One row per item and cell, response averaged over replications.
    #[default]
    ItemAggregated,
    /// Every replication is a row; rows still group by item.
    ReplicationLevel,
}

/// A raw observation before frame construction.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub y: f64,
    /// One level per factor, in factor order.
    pub levels: Vec<String>,
    pub group: String,
}

/// Response, design, and grouping ready for fitting.
#[derive(Debug, Clone)]
pub struct ModelFrame {
    pub y: DVector<f64>,
    pub x: DMatrix<f64>,
    /// Group index per row.
    pub groups: Vec<usize>,
    pub group_labels: Vec<String>,
    pub column_names: Vec<String>,
    /// Present for cell-means frames; needed for marginal means and effect tests.
    pub layout: Option<CellLayout>,
}

impl ModelFrame {
    /// Frame with an explicit design matrix (no factor structure).
    pub fn from_design(
        x: DMatrix<f64>,
        y: DVector<f64>,
        groups: Vec<usize>,
    ) -> Result<Self, StatsError> {
        if x.nrows() != y.len() || groups.len() != y.len() {
            return Err(StatsError::InvalidFrame(format!(
                "rows disagree: x has {}, y has {}, groups has {}",
                x.nrows(),
                y.len(),
                groups.len()
            )));
        }
        if y.iter().any(|v| !v.is_finite()) || x.iter().any(|v| !v.is_finite()) {
            return Err(StatsError::InvalidFrame("non-finite value in frame".into()));
        }
        let n_groups = groups.iter().max().map_or(0, |m| m + 1);
        let frame = Self {
            column_names: (0..x.ncols()).map(|j| format!("x{j}")).collect(),
            group_labels: (0..n_groups).map(|g| g.to_string()).collect(),
            y,
            x,
            groups,
            layout: None,
        };
        frame.check_rank()?;
        Ok(frame)
    }

    pub fn n_obs(&self) -> usize {
        self.y.len()
    }

    pub fn n_groups(&self) -> usize {
        self.group_labels.len()
    }

    /// Rank of X from a column-pivoted QR.
    pub fn rank(&self) -> usize {
        design_rank(&self.x)
    }

    fn check_rank(&self) -> Result<(), StatsError> {
        let rank = self.rank();
        if rank < self.x.ncols() || self.x.nrows() <= rank {
            return Err(StatsError::RankDeficientDesign { rank, columns: self.x.ncols(), rows: self.x.nrows() });
        }
        Ok(())
    }
}

pub(crate) fn design_rank(x: &DMatrix<f64>) -> usize {
    if x.ncols() == 0 || x.nrows() == 0 {
        return 0;
    }
    let qr = x.clone().col_piv_qr();
    let r = qr.r();
    let diag: Vec<f64> = (0..r.nrows().min(r.ncols())).map(|i| r[(i, i)].abs()).collect();
    let max = diag.iter().cloned().fold(0.0, f64::max);
    let tol = max * (x.nrows().max(x.ncols()) as f64) * f64::EPSILON * 10.0;
    diag.iter().filter(|&&d| d > tol).count()
}

/// Build a cell-means frame from observations.
///
/// Factor levels keep the order given in `factors`; every cell of the full
/// cross must be observed. Groups are numbered by first appearance.
pub fn build_frame(
    observations: &[Observation],
    factors: &[Factor],
    mode: AnalysisMode,
) -> Result<ModelFrame, StatsError> {
    let layout = CellLayout::new(factors.to_vec());
    let mut group_ids: BTreeMap<String, usize> = BTreeMap::new();
    let mut group_labels = Vec::new();
    let mut rows: Vec<(usize, usize, f64)> = Vec::with_capacity(observations.len());
    for obs in observations {
        if obs.levels.len() != factors.len() {
            return Err(StatsError::InvalidFrame(format!(
                "observation has {} levels for {} factors",
                obs.levels.len(),
                factors.len()
            )));
        }
        if !obs.y.is_finite() {
            return Err(StatsError::InvalidFrame(format!("non-finite response in group {}", obs.group)));
        }
        let mut idx = Vec::with_capacity(factors.len());
        for (f, level) in factors.iter().zip(&obs.levels) {
            let i = f.level_index(level).ok_or_else(|| {
                StatsError::InvalidFrame(format!("level {level:?} not declared for factor {}", f.name))
            })?;
            idx.push(i);
        }
        let cell = layout.cell_index(&idx);
        let g = *group_ids.entry(obs.group.clone()).or_insert_with(|| {
            group_labels.push(obs.group.clone());
            group_labels.len() - 1
        });
        rows.push((cell, g, obs.y));
    }
    if mode == AnalysisMode::ItemAggregated {
        let mut sums: BTreeMap<(usize, usize), (f64, usize)> = BTreeMap::new();
        let mut order = Vec::new();
        for &(cell, g, y) in &rows {
            let e = sums.entry((g, cell)).or_insert_with(|| {
                order.push((g, cell));
                (0.0, 0)
            });
            e.0 += y;
            e.1 += 1;
        }
        rows = order
            .into_iter()
            .map(|(g, cell)| {
                let (s, n) = sums[&(g, cell)];
                (cell, g, s / n as f64)
            })
            .collect();
    }
    let n_cells = layout.n_cells();
    let mut counts = vec![0usize; n_cells];
    for &(cell, _, _) in &rows {
        counts[cell] += 1;
    }
    if let Some(empty) = counts.iter().position(|&c| c == 0) {
        return Err(StatsError::EmptyCell(layout.cell_label(empty)));
    }
    let n = rows.len();
    let mut x = DMatrix::zeros(n, n_cells);
    let mut y = DVector::zeros(n);
    let mut groups = Vec::with_capacity(n);
    for (i, &(cell, g, v)) in rows.iter().enumerate() {
        x[(i, cell)] = 1.0;
        y[i] = v;
        groups.push(g);
    }
    let frame = ModelFrame {
        y,
        x,
        groups,
        group_labels,
        column_names: (0..n_cells).map(|c| layout.cell_label(c)).collect(),
        layout: Some(layout),
    };
    frame.check_rank()?;
    Ok(frame)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn obs(y: f64, levels: &[&str], group: &str) -> Observation {
        Observation { y, levels: levels.iter().map(|s| s.to_string()).collect(), group: group.into() }
    }

    #[test]
    fn mixed_radix_round_trip() {
        let layout = CellLayout::new(vec![
            Factor::new("a", ["a1", "a2", "a3"]),
            Factor::new("b", ["b1", "b2"]),
        ]);
        assert_eq!(layout.n_cells(), 6);
        for c in 0..6 {
            assert_eq!(layout.cell_index(&layout.cell_levels(c)), c);
        }
        assert_eq!(layout.cell_index(&[1, 0]), 2);
    }

    #[test]
    fn effect_matrix_ranks() {
        let layout = CellLayout::new(vec![
            Factor::new("llm", ["g", "m", "e", "s"]),
            Factor::new("cat", ["R", "I", "A", "S", "E", "C"]),
        ]);
        let main = layout.effect_matrix(&["llm"]).unwrap();
        assert_eq!(main.shape(), (3, 24));
        assert_eq!(design_rank(&main.transpose()), 3);
        let inter = layout.effect_matrix(&["llm", "cat"]).unwrap();
        assert_eq!(inter.shape(), (15, 24));
        // each row of an effect contrast sums to zero
        for r in inter.row_iter() {
            assert!(r.sum().abs() < 1e-12);
        }
        let w = layout.marginal_weights(&[Some(1), None]);
        assert!((w.sum() - 1.0).abs() < 1e-12);
        assert!((w[6] - 1.0 / 6.0).abs() < 1e-12 && w[0] == 0.0);
    }

    #[test]
    fn aggregated_frame_averages_replications() {
        let f = [Factor::new("c", ["x", "y"])];
        let data = vec![
            obs(1.0, &["x"], "i1"),
            obs(3.0, &["x"], "i1"),
            obs(4.0, &["y"], "i1"),
            obs(5.0, &["x"], "i2"),
            obs(2.0, &["y"], "i2"),
            obs(6.0, &["y"], "i2"),
        ];
        let agg = build_frame(&data, &f, AnalysisMode::ItemAggregated).unwrap();
        assert_eq!(agg.n_obs(), 4);
        assert_eq!(agg.y.as_slice(), &[2.0, 4.0, 5.0, 4.0]);
        let full = build_frame(&data, &f, AnalysisMode::ReplicationLevel).unwrap();
        assert_eq!(full.n_obs(), 6);
        assert_eq!(full.n_groups(), 2);
        assert_eq!(full.rank(), 2);
    }

    #[test]
    fn empty_cell_is_named() {
        let f = [Factor::new("c", ["x", "y", "z"])];
        let data = vec![obs(1.0, &["x"], "i1"), obs(2.0, &["y"], "i1"), obs(2.0, &["y"], "i2")];
        match build_frame(&data, &f, AnalysisMode::ItemAggregated) {
            Err(StatsError::EmptyCell(label)) => assert_eq!(label, "c=z"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn rank_deficiency_is_an_error() {
        let x = DMatrix::from_row_slice(4, 2, &[1.0, 2.0, 1.0, 2.0, 1.0, 2.0, 1.0, 2.0]);
        let err = ModelFrame::from_design(x, DVector::from_vec(vec![1.0, 2.0, 3.0, 4.0]), vec![0, 0, 1, 1]);
        assert!(matches!(err, Err(StatsError::RankDeficientDesign { rank: 1, .. })));
    }
}
