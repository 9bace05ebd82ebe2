//! Canned analyses over a run artifact, and their rendering.
//!
//! Each pipeline selects records, builds a cell-means frame with items as
//! groups, fits the random-intercept model, and collects F tests, marginal
//! means, contrasts, correlations, codes, and figure data into an
//! [`AnalysisReport`]. [`render_report`] turns a report into files.

mod expert;
mod pipelines;
mod render;
mod svg;

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use expert::{ExpertRating, ExpertRatings};
pub use pipelines::{
    analyze_all, analyze_interest_vs_competence, analyze_language_effect, analyze_riasec_by_llm,
    analyze_version_effect, default_providers, tukey_grouping, version_lines, Pipeline,
};
pub use render::{render_report, ReportFormat};

use crate::instrument::{ItemBank, Language, Mode};
use crate::par::Execution;
use crate::providers::CellKey;
use crate::runner::RunArtifact;
use crate::scoring::{HollandCode, OccupationMatch, OccupationTable, ScoringError};
use crate::stats::{
    AnalysisMode, ContrastResult, CorrelationResult, DfMethod, EmmResult, FTestResult, LmmFit, StatsError,
};

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("artifact is incomplete: {} missing cells, first: {}", missing.len(), describe_cells(missing))]
    IncompleteArtifact { missing: Vec<CellKey> },
    #[error("artifact has no {0} records")]
    ModeMissing(Mode),
    #[error("artifact lacks language {0}")]
    LanguageMissing(Language),
    #[error("unknown provider {0:?}")]
    UnknownProvider(String),
    #[error("family {family:?} has {found} versions; at least 2 are needed")]
    NotEnoughVersions { family: String, found: usize },
    #[error("nothing to analyze: {0}")]
    NoProviders(String),
    #[error("expert ratings row {row}: {reason}")]
    ExpertRatings { row: usize, reason: String },
    #[error("unsupported report format {0:?} (expected csv, markdown, or svg)")]
    UnsupportedFormat(String),
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error(transparent)]
    Scoring(#[from] ScoringError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn describe_cells(cells: &[CellKey]) -> String {
    let shown: Vec<String> = cells
        .iter()
        .take(5)
        .map(|k| format!("{}/{}/{}/item {}/rep {}", k.provider, k.language, k.mode, k.item_id, k.replication))
        .collect();
    let more = if cells.len() > 5 { ", ..." } else { "" };
    format!("{}{more}", shown.join(", "))
}

/// Model and inference settings shared by all pipelines.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct AnalysisOptions {
    pub mode: AnalysisMode,
    pub df_method: DfMethod,
    pub execution: Execution,
}

/// Inputs every pipeline reads.
#[derive(Debug, Clone)]
pub struct AnalysisContext<'a> {
    pub artifact: &'a RunArtifact,
    pub bank: &'a ItemBank,
    pub occupations: &'a OccupationTable,
    pub options: AnalysisOptions,
}

impl AnalysisContext<'_> {
    /// Fail unless every cell of the given conditions is in the log.
    pub fn require_complete(
        &self,
        providers: &[String],
        languages: &[Language],
        modes: &[Mode],
    ) -> Result<(), AnalysisError> {
        let cfg = self.artifact.config();
        for p in providers {
            if cfg.provider(p).is_none() {
                return Err(AnalysisError::UnknownProvider(p.clone()));
            }
        }
        for l in languages {
            if !cfg.languages.contains(l) {
                return Err(AnalysisError::LanguageMissing(*l));
            }
        }
        for m in modes {
            if !cfg.modes.contains(m) {
                return Err(AnalysisError::ModeMissing(*m));
            }
        }
        let missing: Vec<CellKey> = self
            .artifact
            .missing_cells(self.bank)
            .into_iter()
            .filter(|k| providers.contains(&k.provider) && languages.contains(&k.language) && modes.contains(&k.mode))
            .collect();
        if missing.is_empty() {
            Ok(())
        } else {
            Err(AnalysisError::IncompleteArtifact { missing })
        }
    }
}

/// Fit statistics worth reporting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSummary {
    pub description: String,
    pub factors: Vec<String>,
    pub analysis_mode: AnalysisMode,
    pub df_method: DfMethod,
    pub n_obs: usize,
    pub rank_x: usize,
    pub n_groups: usize,
    pub df_residual: f64,
    pub sigma2: f64,
    pub tau2: f64,
    pub theta: f64,
    pub reml_criterion: f64,
}

impl ModelSummary {
    pub fn of(fit: &LmmFit, description: impl Into<String>, options: &AnalysisOptions) -> Self {
        Self {
            description: description.into(),
            factors: fit.layout.as_ref().map(|l| l.factors.iter().map(|f| f.name.clone()).collect()).unwrap_or_default(),
            analysis_mode: options.mode,
            df_method: options.df_method,
            n_obs: fit.n_obs,
            rank_x: fit.rank_x,
            n_groups: fit.n_groups,
            df_residual: fit.df_residual(),
            sigma2: fit.sigma2,
            tau2: fit.tau2,
            theta: fit.theta,
            reml_criterion: fit.reml_criterion,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmmTable {
    pub name: String,
    pub rows: Vec<EmmResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContrastTable {
    pub name: String,
    pub rows: Vec<ContrastResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedCorrelation {
    pub name: String,
    pub result: CorrelationResult,
}

/// A Holland code derived inside a report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CodeRow {
    pub label: String,
    /// Category means the code was ranked from, R-I-A-S-E-C order.
    pub means: [f64; 6],
    pub code: HollandCode,
    pub occupations: OccupationMatch,
}

/// How often each code occurred across replications of one condition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicationCodeRow {
    pub label: String,
    pub code: String,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Series {
    pub label: String,
    pub values: Vec<f64>,
    /// Optional standard errors drawn as whiskers.
    pub errors: Option<Vec<f64>>,
}

/// Data behind a figure. Rendering never recomputes statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Figure {
    Radar { name: String, title: String, axes: Vec<String>, series: Vec<Series> },
    Heatmap {
        name: String,
        title: String,
        rows: Vec<String>,
        cols: Vec<String>,
        /// Row level minus column level; `None` on the diagonal.
        values: Vec<Vec<Option<f64>>>,
        /// Adjusted p per cell.
        p_values: Vec<Vec<Option<f64>>>,
    },
    Bars { name: String, title: String, groups: Vec<String>, series: Vec<Series>, y_label: String },
}

impl Figure {
    pub fn name(&self) -> &str {
        match self {
            Figure::Radar { name, .. } | Figure::Heatmap { name, .. } | Figure::Bars { name, .. } => name,
        }
    }
}

/// Everything one pipeline produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub name: String,
    /// Conditions that fed the report, as `provider/version/language/mode`.
    pub inputs: Vec<String>,
    pub model: Option<ModelSummary>,
    pub f_tests: Vec<FTestResult>,
    pub emms: Vec<EmmTable>,
    pub contrasts: Vec<ContrastTable>,
    pub correlations: Vec<NamedCorrelation>,
    pub codes: Vec<CodeRow>,
    pub replication_codes: Vec<ReplicationCodeRow>,
    pub figures: Vec<Figure>,
    /// Notes such as dropped factors.
    pub notes: Vec<String>,
}

impl AnalysisReport {
    pub fn new(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            inputs: Vec::new(),
            model: None,
            f_tests: Vec::new(),
            emms: Vec::new(),
            contrasts: Vec::new(),
            correlations: Vec::new(),
            codes: Vec::new(),
            replication_codes: Vec::new(),
            figures: Vec::new(),
            notes: Vec::new(),
        }
    }

    pub fn f_test(&self, term: &str) -> Option<&FTestResult> {
        self.f_tests.iter().find(|f| f.term == term)
    }

    pub fn correlation(&self, name: &str) -> Option<&CorrelationResult> {
        self.correlations.iter().find(|c| c.name == name).map(|c| &c.result)
    }

    pub fn contrast_table(&self, name: &str) -> Option<&ContrastTable> {
        self.contrasts.iter().find(|c| c.name == name)
    }

    pub fn code(&self, label: &str) -> Option<&CodeRow> {
        self.codes.iter().find(|c| c.label == label)
    }

    /// Letters used by any code in the report.
    pub fn code_letters(&self) -> BTreeSet<char> {
        self.codes.iter().flat_map(|c| c.code.letters.iter().map(|l| l.letter())).collect()
    }
}
