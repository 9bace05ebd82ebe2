use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use super::svg;
use super::{AnalysisError, AnalysisReport};
use crate::stats::EmmResult;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ReportFormat {
    Csv,
    Markdown,
    Svg,
}

impl FromStr for ReportFormat {
    type Err = AnalysisError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "csv" => Ok(ReportFormat::Csv),
            "markdown" | "md" => Ok(ReportFormat::Markdown),
            "svg" => Ok(ReportFormat::Svg),
            _ => Err(AnalysisError::UnsupportedFormat(s.to_string())),
        }
    }
}

impl ReportFormat {
    pub const ALL: [ReportFormat; 3] = [ReportFormat::Csv, ReportFormat::Markdown, ReportFormat::Svg];
}

/// File-name safe form of a table or figure name.
fn slug(s: &str) -> String {
    s.chars().map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' || c == '.' { c } else { '_' }).collect()
}

fn num(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.6}")
    } else {
        "NA".to_string()
    }
}

/// p-values keep precision at the small end.
fn pval(p: f64) -> String {
    if p.is_finite() {
        format!("{p:.6e}")
    } else {
        "NA".to_string()
    }
}

fn emm_level(row: &EmmResult) -> String {
    row.levels.iter().map(|(_, l)| l.as_str()).collect::<Vec<_>>().join(":")
}

fn write_csv(path: &Path, header: &[&str], rows: Vec<Vec<String>>) -> Result<(), AnalysisError> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_path(path)?;
    w.write_record(header)?;
    for r in rows {
        w.write_record(&r)?;
    }
    w.flush()?;
    Ok(())
}

fn render_csv(report: &AnalysisReport, dir: &Path) -> Result<Vec<PathBuf>, AnalysisError> {
    let mut files = Vec::new();
    let mut emit = |name: String, header: &[&str], rows: Vec<Vec<String>>| -> Result<(), AnalysisError> {
        let path = dir.join(name);
        write_csv(&path, header, rows)?;
        files.push(path);
        Ok(())
    };
    if let Some(m) = &report.model {
        emit(
            "model.csv".into(),
            &["field", "value"],
            vec![
                vec!["description".into(), m.description.clone()],
                vec!["factors".into(), m.factors.join(":")],
                vec!["n_obs".into(), m.n_obs.to_string()],
                vec!["rank_x".into(), m.rank_x.to_string()],
                vec!["n_groups".into(), m.n_groups.to_string()],
                vec!["df_residual".into(), num(m.df_residual)],
                vec!["sigma2".into(), num(m.sigma2)],
                vec!["tau2".into(), num(m.tau2)],
                vec!["reml_criterion".into(), num(m.reml_criterion)],
            ],
        )?;
    }
    emit(
        "f_tests.csv".into(),
        &["term", "F", "df_num", "df_den", "p"],
        report
            .f_tests
            .iter()
            .map(|f| vec![f.term.clone(), num(f.statistic), num(f.df_num), num(f.df_den), pval(f.p_value)])
            .collect(),
    )?;
    for t in &report.emms {
        emit(
            format!("emm_{}.csv", slug(&t.name)),
            &["level", "estimate", "se"],
            t.rows.iter().map(|r| vec![emm_level(r), num(r.estimate), num(r.se)]).collect(),
        )?;
    }
    for t in &report.contrasts {
        emit(
            format!("contrasts_{}.csv", slug(&t.name)),
            &["contrast", "estimate", "se", "t", "df", "p_unadjusted", "p_adjusted", "adjustment"],
            t.rows
                .iter()
                .map(|c| {
                    vec![
                        c.description.clone(),
                        num(c.estimate),
                        num(c.se),
                        num(c.t),
                        num(c.df),
                        pval(c.p_unadjusted),
                        pval(c.p_adjusted),
                        format!("{:?}", c.adjustment).to_lowercase(),
                    ]
                })
                .collect(),
        )?;
    }
    if !report.correlations.is_empty() {
        emit(
            "correlations.csv".into(),
            &["name", "r", "n", "t", "df", "p", "ci_low", "ci_high"],
            report
                .correlations
                .iter()
                .map(|c| {
                    let r = &c.result;
                    vec![
                        c.name.clone(),
                        num(r.r),
                        r.n.to_string(),
                        num(r.t),
                        num(r.df),
                        pval(r.p),
                        num(r.ci95.0),
                        num(r.ci95.1),
                    ]
                })
                .collect(),
        )?;
    }
    if !report.codes.is_empty() {
        emit(
            "codes.csv".into(),
            &["label", "code", "tie_sets", "boundary_tie", "R", "I", "A", "S", "E", "C", "occupations"],
            report
                .codes
                .iter()
                .map(|c| {
                    let ties: Vec<String> = c.code.tie_sets.iter().map(|s| s.iter().map(|l| l.letter()).collect()).collect();
                    let mut row = vec![
                        c.label.clone(),
                        c.code.code(),
                        ties.join("|"),
                        c.code.boundary_tie.iter().map(|l| l.letter()).collect(),
                    ];
                    row.extend(c.means.iter().map(|m| num(*m)));
                    row.push(c.occupations.occupations.join("; "));
                    row
                })
                .collect(),
        )?;
    }
    if !report.replication_codes.is_empty() {
        emit(
            "replication_codes.csv".into(),
            &["label", "code", "count"],
            report
                .replication_codes
                .iter()
                .map(|r| vec![r.label.clone(), r.code.clone(), r.count.to_string()])
                .collect(),
        )?;
    }
    Ok(files)
}

fn md_p(p: f64) -> String {
    if p < 0.001 {
        "<.001".to_string()
    } else {
        format!("{p:.3}")
    }
}

fn md_cell(s: &str) -> String {
    s.replace('|', "\\|")
}

fn render_markdown(report: &AnalysisReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# {}\n", report.name);
    if let Some(m) = &report.model {
        let _ = writeln!(out, "Model: `{}`\n", m.description);
        let _ = writeln!(
            out,
            "n = {}, items = {}, sigma2 = {:.4}, tau2 = {:.4}, residual df = {:.0}, df method = {:?}\n",
            m.n_obs, m.n_groups, m.sigma2, m.tau2, m.df_residual, m.df_method
        );
    }
    for n in &report.notes {
        let _ = writeln!(out, "> {n}\n");
    }
    if !report.f_tests.is_empty() {
        out.push_str("## F tests\n\n| term | F | df | p |\n|---|---:|---:|---:|\n");
        for f in &report.f_tests {
            let _ = writeln!(
                out,
                "| {} | {:.2} | ({:.0}, {:.0}) | {} |",
                md_cell(&f.term),
                f.statistic,
                f.df_num,
                f.df_den,
                md_p(f.p_value)
            );
        }
        out.push('\n');
    }
    for t in &report.emms {
        let _ = writeln!(out, "## Marginal means: {}\n\n| level | estimate | se |\n|---|---:|---:|", t.name);
        for r in &t.rows {
            let _ = writeln!(out, "| {} | {:.3} | {:.3} |", md_cell(&emm_level(r)), r.estimate, r.se);
        }
        out.push('\n');
    }
    for t in &report.contrasts {
        let _ = writeln!(
            out,
            "## Contrasts: {}\n\n| contrast | estimate | se | t | df | p (adj.) |\n|---|---:|---:|---:|---:|---:|",
            t.name
        );
        for c in &t.rows {
            let _ = writeln!(
                out,
                "| {} | {:.3} | {:.3} | {:.2} | {:.1} | {} |",
                md_cell(&c.description),
                c.estimate,
                c.se,
                c.t,
                c.df,
                md_p(c.p_adjusted)
            );
        }
        out.push('\n');
    }
    if !report.correlations.is_empty() {
        out.push_str("## Correlations\n\n| pair | r | n | t | p | 95% CI |\n|---|---:|---:|---:|---:|---|\n");
        for c in &report.correlations {
            let r = &c.result;
            let _ = writeln!(
                out,
                "| {} | {:.3} | {} | {:.3} | {} | [{:.3}, {:.3}] |",
                md_cell(&c.name),
                r.r,
                r.n,
                r.t,
                md_p(r.p),
                r.ci95.0,
                r.ci95.1
            );
        }
        out.push('\n');
    }
    if !report.codes.is_empty() {
        out.push_str("## Holland codes\n\n| label | code | tie sets | occupations |\n|---|---|---|---|\n");
        for c in &report.codes {
            let ties: Vec<String> = c.code.tie_sets.iter().map(|s| s.iter().map(|l| l.letter()).collect()).collect();
            let occ = if c.occupations.uncovered { "(no match)".to_string() } else { c.occupations.occupations.join(", ") };
            let _ = writeln!(
                out,
                "| {} | {} | {} | {} |",
                md_cell(&c.label),
                c.code.code(),
                if ties.is_empty() { "-".to_string() } else { ties.join(" ") },
                md_cell(&occ)
            );
        }
        out.push('\n');
    }
    if !report.replication_codes.is_empty() {
        out.push_str("## Codes across replications\n\n| label | code | count |\n|---|---|---:|\n");
        for r in &report.replication_codes {
            let _ = writeln!(out, "| {} | {} | {} |", md_cell(&r.label), r.code, r.count);
        }
        out.push('\n');
    }
    if !report.figures.is_empty() {
        out.push_str("## Figures\n\n");
        for f in &report.figures {
            let _ = writeln!(out, "- [{0}]({0}.svg)", slug(f.name()));
        }
    }
    out
}

/// Write `report` under `<root>/<report name>/` in each requested format.
///
/// File names are fixed by content, so rerendering overwrites in place.
/// Returns the written paths in a stable order.
pub fn render_report(
    report: &AnalysisReport,
    formats: &[ReportFormat],
    root: &Path,
) -> Result<Vec<PathBuf>, AnalysisError> {
    let dir = root.join(slug(&report.name));
    std::fs::create_dir_all(&dir)?;
    let mut formats = formats.to_vec();
    formats.sort();
    formats.dedup();
    let mut files = Vec::new();
    for f in formats {
        match f {
            ReportFormat::Csv => files.extend(render_csv(report, &dir)?),
            ReportFormat::Markdown => {
                let path = dir.join("report.md");
                std::fs::write(&path, render_markdown(report))?;
                files.push(path);
            }
            ReportFormat::Svg => {
                for fig in &report.figures {
                    let path = dir.join(format!("{}.svg", slug(fig.name())));
                    std::fs::write(&path, svg::render(fig))?;
                    files.push(path);
                }
            }
        }
    }
    Ok(files)
}
