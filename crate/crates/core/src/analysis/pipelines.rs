use std::collections::BTreeMap;

use super::{
    AnalysisContext, AnalysisError, AnalysisReport, CodeRow, ContrastTable, EmmTable, ExpertRatings, Figure,
    ModelSummary, NamedCorrelation, ReplicationCodeRow, Series,
};
use crate::instrument::{Language, Mode, RiasecCategory};
use crate::providers::AdministrationRecord;
use crate::scoring::{
    aggregate_item_scores, holland_code, match_occupations, replication_codes, score_all, ItemAggregate,
};
use crate::stats::{
    anova_table, build_frame, emmeans_with, fit_lmm_with, grouped_contrast, pairwise_contrasts, pearson, Adjustment,
    ContrastResult, DfMethod, Factor, LmmFit, LmmOptions, Observation, StatsError,
};

/// Significance level used to chain categories into tie sets.
const GROUPING_ALPHA: f64 = 0.05;

const LLM: &str = "llm";
const CATEGORY: &str = "category";
const LANGUAGE: &str = "language";
const VERSION: &str = "version";
const MODE: &str = "mode";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Pipeline {
    Riasec,
    Language,
    Version,
    Competence,
}

impl std::str::FromStr for Pipeline {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "riasec" => Ok(Pipeline::Riasec),
            "language" => Ok(Pipeline::Language),
            "version" => Ok(Pipeline::Version),
            "competence" => Ok(Pipeline::Competence),
            _ => Err(format!("unknown pipeline {s:?}")),
        }
    }
}

fn category_names() -> Vec<String> {
    RiasecCategory::ALL.iter().map(|c| c.name().to_string()).collect()
}

/// The first provider of each family, in config order.
pub fn default_providers(ctx: &AnalysisContext<'_>) -> Vec<String> {
    let mut seen = Vec::new();
    let mut out = Vec::new();
    for p in &ctx.artifact.config().providers {
        let fam = p.params.family().to_string();
        if !seen.contains(&fam) {
            seen.push(fam);
            out.push(p.params.name.clone());
        }
    }
    out
}

/// Families with at least two providers, each with its providers in config order.
pub fn version_lines(ctx: &AnalysisContext<'_>) -> Vec<(String, Vec<String>)> {
    let mut lines: Vec<(String, Vec<String>)> = Vec::new();
    for p in &ctx.artifact.config().providers {
        let fam = p.params.family();
        match lines.iter_mut().find(|(f, _)| f == fam) {
            Some((_, v)) => v.push(p.params.name.clone()),
            None => lines.push((fam.to_string(), vec![p.params.name.clone()])),
        }
    }
    lines.retain(|(_, v)| v.len() >= 2);
    lines
}

fn select<'r>(
    ctx: &'r AnalysisContext<'_>,
    providers: &[String],
    languages: &[Language],
    modes: &[Mode],
) -> Vec<&'r AdministrationRecord> {
    ctx.artifact
        .records
        .iter()
        .filter(|r| providers.contains(&r.provider) && languages.contains(&r.language) && modes.contains(&r.mode))
        .collect()
}

/// One observation per answered record; factor levels come from `levels`.
fn observations(
    ctx: &AnalysisContext<'_>,
    records: &[&AdministrationRecord],
    levels: impl Fn(&AdministrationRecord, RiasecCategory) -> Vec<String>,
) -> Vec<Observation> {
    records
        .iter()
        .filter_map(|r| {
            let value = r.final_value?;
            let item = ctx.bank.get(r.item_id)?;
            Some(Observation {
                y: f64::from(value.numeric()),
                levels: levels(r, item.category),
                group: r.item_id.to_string(),
            })
        })
        .collect()
}

fn fit(ctx: &AnalysisContext<'_>, obs: &[Observation], factors: &[Factor]) -> Result<LmmFit, AnalysisError> {
    let frame = build_frame(obs, factors, ctx.options.mode)?;
    let opts = LmmOptions { execution: ctx.options.execution, ..LmmOptions::default() };
    Ok(fit_lmm_with(&frame, &opts)?)
}

fn inputs(records: &[&AdministrationRecord]) -> Vec<String> {
    let mut keys: Vec<String> = records
        .iter()
        .map(|r| format!("{}/{}/{}/{}", r.provider, r.version_tag, r.language, r.mode))
        .collect();
    keys.sort();
    keys.dedup();
    keys
}

fn emm_category_vector(fit: &LmmFit, within: &[(&str, &str)], df: DfMethod) -> Result<([f64; 6], [f64; 6]), StatsError> {
    let rows = emmeans_with(fit, &[CATEGORY], within, df)?;
    let mut est = [0.0; 6];
    let mut se = [0.0; 6];
    for (i, r) in rows.iter().enumerate() {
        est[i] = r.estimate;
        se[i] = r.se;
    }
    Ok((est, se))
}

/// Tukey comparisons of the six categories and the tie sets they imply.
///
/// Categories are ranked by marginal mean; each adjacent pair whose adjusted
/// p is at least 0.05 is chained into one class.
pub fn tukey_grouping(
    fit: &LmmFit,
    means: &[f64; 6],
    within: &[(&str, &str)],
    df: DfMethod,
) -> Result<(Vec<Vec<RiasecCategory>>, Vec<ContrastResult>), StatsError> {
    let contrasts = pairwise_contrasts(fit, CATEGORY, Adjustment::Tukey, within, df)?;
    let mut p = [[1.0f64; 6]; 6];
    let mut idx = 0;
    for a in 0..6 {
        for b in (a + 1)..6 {
            p[a][b] = contrasts[idx].p_adjusted;
            p[b][a] = contrasts[idx].p_adjusted;
            idx += 1;
        }
    }
    let mut order: Vec<RiasecCategory> = RiasecCategory::ALL.to_vec();
    order.sort_by(|a, b| means[b.index()].total_cmp(&means[a.index()]));
    let mut groups: Vec<Vec<RiasecCategory>> = vec![vec![order[0]]];
    for w in order.windows(2) {
        if p[w[0].index()][w[1].index()] >= GROUPING_ALPHA {
            groups.last_mut().expect("nonempty").push(w[1]);
        } else {
            groups.push(vec![w[1]]);
        }
    }
    groups.retain(|g| g.len() > 1);
    Ok((groups, contrasts))
}

fn code_row(
    ctx: &AnalysisContext<'_>,
    label: String,
    means: [f64; 6],
    grouping: &[Vec<RiasecCategory>],
) -> CodeRow {
    let code = holland_code(&means, Some(grouping));
    let occupations = match_occupations(&code, ctx.occupations);
    CodeRow { label, means, code, occupations }
}

fn replication_code_counts(
    ctx: &AnalysisContext<'_>,
    records: &[&AdministrationRecord],
    label_of: impl Fn(&crate::scoring::ReplicationKey) -> String,
) -> Result<Vec<ReplicationCodeRow>, AnalysisError> {
    let owned: Vec<AdministrationRecord> = records.iter().map(|r| (*r).clone()).collect();
    let scores = score_all(&owned, ctx.bank)?;
    let mut counts: BTreeMap<(String, String), usize> = BTreeMap::new();
    for (key, code) in replication_codes(&scores) {
        *counts.entry((label_of(&key), code.code())).or_default() += 1;
    }
    Ok(counts.into_iter().map(|((label, code), count)| ReplicationCodeRow { label, code, count }).collect())
}

/// Category differences as a matrix for a heatmap, row minus column.
fn heatmap(name: String, title: String, contrasts: &[ContrastResult]) -> Figure {
    let labels: Vec<String> = RiasecCategory::ALL.iter().map(|c| c.letter().to_string()).collect();
    let mut values = vec![vec![None; 6]; 6];
    let mut p_values = vec![vec![None; 6]; 6];
    let mut idx = 0;
    for a in 0..6 {
        for b in (a + 1)..6 {
            let c = &contrasts[idx];
            values[a][b] = Some(c.estimate);
            values[b][a] = Some(-c.estimate);
            p_values[a][b] = Some(c.p_adjusted);
            p_values[b][a] = Some(c.p_adjusted);
            idx += 1;
        }
    }
    Figure::Heatmap { name, title, rows: labels.clone(), cols: labels, values, p_values }
}

fn top_bottom(means: &[f64; 6]) -> (Vec<&'static str>, Vec<&'static str>) {
    let mut order: Vec<RiasecCategory> = RiasecCategory::ALL.to_vec();
    order.sort_by(|a, b| means[b.index()].total_cmp(&means[a.index()]));
    let top = order[..3].iter().map(|c| c.name()).collect();
    let bottom = order[3..].iter().map(|c| c.name()).collect();
    (top, bottom)
}

/// Interest by category and LLM in one language.
///
/// With one provider the LLM factor is dropped.
pub fn analyze_riasec_by_llm(
    ctx: &AnalysisContext<'_>,
    providers: &[String],
    language: Language,
) -> Result<AnalysisReport, AnalysisError> {
    if providers.is_empty() {
        return Err(AnalysisError::NoProviders("no providers selected".into()));
    }
    ctx.require_complete(providers, &[language], &[Mode::Interest])?;
    let df = ctx.options.df_method;
    let records = select(ctx, providers, &[language], &[Mode::Interest]);
    let multi = providers.len() > 1;
    let mut factors = Vec::new();
    if multi {
        factors.push(Factor::new(LLM, providers.iter().cloned()));
    }
    factors.push(Factor::new(CATEGORY, category_names()));
    let obs = observations(ctx, &records, |r, c| {
        let mut l = Vec::with_capacity(2);
        if multi {
            l.push(r.provider.clone());
        }
        l.push(c.name().to_string());
        l
    });
    let fit = fit(ctx, &obs, &factors)?;

    let mut report = AnalysisReport::new("riasec");
    report.inputs = inputs(&records);
    let desc = if multi { "interest ~ llm * category + (1 | item)" } else { "interest ~ category + (1 | item)" };
    report.model = Some(ModelSummary::of(&fit, desc, &ctx.options));
    if !multi {
        report.notes.push(format!("single provider {}: LLM factor dropped", providers[0]));
    }
    report.f_tests = anova_table(&fit, df)?;

    let spec: Vec<&str> = if multi { vec![LLM, CATEGORY] } else { vec![CATEGORY] };
    report.emms.push(EmmTable { name: spec.join("_"), rows: emmeans_with(&fit, &spec, &[], df)? });
    if multi {
        report.emms.push(EmmTable { name: LLM.into(), rows: emmeans_with(&fit, &[LLM], &[], df)? });
        report.emms.push(EmmTable { name: CATEGORY.into(), rows: emmeans_with(&fit, &[CATEGORY], &[], df)? });
        report.contrasts.push(ContrastTable {
            name: "llm_pairs".into(),
            rows: pairwise_contrasts(&fit, LLM, Adjustment::Tukey, &[], df)?,
        });
        for cat in RiasecCategory::ALL {
            report.contrasts.push(ContrastTable {
                name: format!("llm_pairs_{}", cat.letter()),
                rows: pairwise_contrasts(&fit, LLM, Adjustment::Tukey, &[(CATEGORY, cat.name())], df)?,
            });
        }
    }

    let mut radar = Vec::new();
    let mut top3 = Vec::new();
    for p in providers {
        let within: Vec<(&str, &str)> = if multi { vec![(LLM, p.as_str())] } else { vec![] };
        let (means, se) = emm_category_vector(&fit, &within, df)?;
        let (grouping, contrasts) = tukey_grouping(&fit, &means, &within, df)?;
        report.figures.push(heatmap(
            format!("heatmap_{p}"),
            format!("{p}: category differences (row - column)"),
            &contrasts,
        ));
        report.contrasts.push(ContrastTable { name: format!("category_pairs_{p}"), rows: contrasts });
        let (top, bottom) = top_bottom(&means);
        top3.push(grouped_contrast(&fit, CATEGORY, &top, &bottom, &within, df)?);
        report.codes.push(code_row(ctx, p.clone(), means, &grouping));
        radar.push(Series { label: p.clone(), values: means.to_vec(), errors: Some(se.to_vec()) });
    }
    report.contrasts.push(ContrastTable { name: "top3_vs_bottom3".into(), rows: top3 });
    report.replication_codes = replication_code_counts(ctx, &records, |k| k.provider.clone())?;
    report.figures.insert(
        0,
        Figure::Radar {
            name: "radar".into(),
            title: format!("Interest by category ({language})"),
            axes: category_names(),
            series: radar,
        },
    );
    Ok(report)
}

/// Interest by category, LLM, and administration language.
pub fn analyze_language_effect(ctx: &AnalysisContext<'_>, providers: &[String]) -> Result<AnalysisReport, AnalysisError> {
    if providers.is_empty() {
        return Err(AnalysisError::NoProviders("no providers selected".into()));
    }
    let languages = Language::ALL.to_vec();
    ctx.require_complete(providers, &languages, &[Mode::Interest])?;
    let df = ctx.options.df_method;
    let records = select(ctx, providers, &languages, &[Mode::Interest]);
    let multi = providers.len() > 1;
    let mut factors = Vec::new();
    if multi {
        factors.push(Factor::new(LLM, providers.iter().cloned()));
    }
    factors.push(Factor::new(LANGUAGE, languages.iter().map(|l| l.code())));
    factors.push(Factor::new(CATEGORY, category_names()));
    let obs = observations(ctx, &records, |r, c| {
        let mut l = Vec::with_capacity(3);
        if multi {
            l.push(r.provider.clone());
        }
        l.push(r.language.code().to_string());
        l.push(c.name().to_string());
        l
    });
    let fit = fit(ctx, &obs, &factors)?;

    let mut report = AnalysisReport::new("language");
    report.inputs = inputs(&records);
    let desc = if multi {
        "interest ~ llm * language * category + (1 | item)"
    } else {
        "interest ~ language * category + (1 | item)"
    };
    report.model = Some(ModelSummary::of(&fit, desc, &ctx.options));
    if !multi {
        report.notes.push(format!("single provider {}: LLM factor dropped", providers[0]));
    }
    report.f_tests = anova_table(&fit, df)?;
    report.emms.push(EmmTable { name: LANGUAGE.into(), rows: emmeans_with(&fit, &[LANGUAGE], &[], df)? });

    let zh = [Language::Chinese.code()];
    let en = [Language::English.code()];
    let mut per_llm = Vec::new();
    let mut bars = Vec::new();
    for p in providers {
        let base: Vec<(&str, &str)> = if multi { vec![(LLM, p.as_str())] } else { vec![] };
        per_llm.push(grouped_contrast(&fit, LANGUAGE, &zh, &en, &base, df)?);
        let mut diffs = Vec::with_capacity(6);
        let mut ses = Vec::with_capacity(6);
        let mut rows = Vec::with_capacity(6);
        for cat in RiasecCategory::ALL {
            let mut within = base.clone();
            within.push((CATEGORY, cat.name()));
            let c = grouped_contrast(&fit, LANGUAGE, &zh, &en, &within, df)?;
            diffs.push(c.estimate);
            ses.push(c.se);
            rows.push(c);
        }
        report.contrasts.push(ContrastTable { name: format!("zh_minus_en_by_category_{p}"), rows });
        bars.push(Series { label: p.clone(), values: diffs, errors: Some(ses) });
        for lang in &languages {
            let mut within = base.clone();
            within.push((LANGUAGE, lang.code()));
            let (means, _) = emm_category_vector(&fit, &within, df)?;
            let (grouping, _) = tukey_grouping(&fit, &means, &within, df)?;
            report.codes.push(code_row(ctx, format!("{p} {lang}"), means, &grouping));
        }
    }
    report.contrasts.insert(0, ContrastTable { name: "zh_minus_en".into(), rows: per_llm });
    if multi {
        report.emms.push(EmmTable { name: "llm_language".into(), rows: emmeans_with(&fit, &[LLM, LANGUAGE], &[], df)? });
        for lang in &languages {
            report.contrasts.push(ContrastTable {
                name: format!("llm_pairs_{lang}"),
                rows: pairwise_contrasts(&fit, LLM, Adjustment::Tukey, &[(LANGUAGE, lang.code())], df)?,
            });
        }
    }
    report.replication_codes =
        replication_code_counts(ctx, &records, |k| format!("{} {}", k.provider, k.language))?;
    report.figures.push(Figure::Bars {
        name: "language_difference".into(),
        title: "Chinese minus English interest by category".into(),
        groups: category_names(),
        series: bars,
        y_label: "zh - en".into(),
    });
    Ok(report)
}

/// Interest by category, version, and (when both are present) language for
/// one family's providers.
pub fn analyze_version_effect(
    ctx: &AnalysisContext<'_>,
    family: &str,
    versions: &[String],
) -> Result<AnalysisReport, AnalysisError> {
    if versions.len() < 2 {
        return Err(AnalysisError::NotEnoughVersions { family: family.to_string(), found: versions.len() });
    }
    let languages = ctx.artifact.config().languages.clone();
    ctx.require_complete(versions, &languages, &[Mode::Interest])?;
    let df = ctx.options.df_method;
    let records = select(ctx, versions, &languages, &[Mode::Interest]);
    let two_lang = languages.len() > 1;
    let mut factors = vec![Factor::new(VERSION, versions.iter().cloned())];
    if two_lang {
        factors.push(Factor::new(LANGUAGE, languages.iter().map(|l| l.code())));
    }
    factors.push(Factor::new(CATEGORY, category_names()));
    let obs = observations(ctx, &records, |r, c| {
        let mut l = vec![r.provider.clone()];
        if two_lang {
            l.push(r.language.code().to_string());
        }
        l.push(c.name().to_string());
        l
    });
    let fit = fit(ctx, &obs, &factors)?;

    let mut report = AnalysisReport::new(format!("version_{family}"));
    report.inputs = inputs(&records);
    let desc = if two_lang {
        "interest ~ version * language * category + (1 | item)"
    } else {
        "interest ~ version * category + (1 | item)"
    };
    report.model = Some(ModelSummary::of(&fit, desc, &ctx.options));
    if !two_lang {
        report.notes.push("single language: language factor dropped".into());
    }
    report.f_tests = anova_table(&fit, df)?;
    report.emms.push(EmmTable { name: VERSION.into(), rows: emmeans_with(&fit, &[VERSION], &[], df)? });
    report.contrasts.push(ContrastTable {
        name: "version_pairs".into(),
        rows: pairwise_contrasts(&fit, VERSION, Adjustment::Tukey, &[], df)?,
    });
    if two_lang {
        for lang in &languages {
            report.contrasts.push(ContrastTable {
                name: format!("version_pairs_{lang}"),
                rows: pairwise_contrasts(&fit, VERSION, Adjustment::Tukey, &[(LANGUAGE, lang.code())], df)?,
            });
        }
        let zh = [Language::Chinese.code()];
        let en = [Language::English.code()];
        let rows = versions
            .iter()
            .map(|v| grouped_contrast(&fit, LANGUAGE, &zh, &en, &[(VERSION, v.as_str())], df))
            .collect::<Result<Vec<_>, _>>()?;
        report.contrasts.push(ContrastTable { name: "zh_minus_en_by_version".into(), rows });
    }
    let mut bars = Vec::new();
    for v in versions {
        let within = [(VERSION, v.as_str())];
        let (means, se) = emm_category_vector(&fit, &within, df)?;
        let (grouping, contrasts) = tukey_grouping(&fit, &means, &within, df)?;
        report.contrasts.push(ContrastTable { name: format!("category_pairs_{v}"), rows: contrasts });
        report.codes.push(code_row(ctx, v.clone(), means, &grouping));
        bars.push(Series { label: v.clone(), values: means.to_vec(), errors: Some(se.to_vec()) });
    }
    report.replication_codes = replication_code_counts(ctx, &records, |k| format!("{} {}", k.provider, k.language))?;
    report.figures.push(Figure::Bars {
        name: "versions".into(),
        title: format!("{family}: interest by category and version"),
        groups: category_names(),
        series: bars,
        y_label: "estimated mean".into(),
    });
    Ok(report)
}

/// Paired item means keyed by (provider, language, item).
type ItemKey = (String, Language, u32);

fn item_means(rows: &[ItemAggregate], mode: Mode) -> BTreeMap<ItemKey, f64> {
    rows.iter()
        .filter(|r| r.mode == mode)
        .map(|r| ((r.provider.clone(), r.language, r.item_id), r.mean))
        .collect()
}

fn paired(a: &BTreeMap<ItemKey, f64>, b: impl Fn(&ItemKey) -> Option<f64>) -> (Vec<f64>, Vec<f64>) {
    let mut x = Vec::new();
    let mut y = Vec::new();
    for (k, v) in a {
        if let Some(w) = b(k) {
            x.push(*v);
            y.push(w);
        }
    }
    (x, y)
}

/// Interest against self-rated (and optionally expert-rated) competence.
pub fn analyze_interest_vs_competence(
    ctx: &AnalysisContext<'_>,
    providers: &[String],
    experts: Option<&ExpertRatings>,
) -> Result<AnalysisReport, AnalysisError> {
    if providers.is_empty() {
        return Err(AnalysisError::NoProviders("no providers selected".into()));
    }
    let cfg = ctx.artifact.config();
    for m in Mode::ALL {
        if !cfg.modes.contains(&m) || !ctx.artifact.records.iter().any(|r| r.mode == m) {
            return Err(AnalysisError::ModeMissing(m));
        }
    }
    let languages = cfg.languages.clone();
    ctx.require_complete(providers, &languages, &Mode::ALL)?;
    let df = ctx.options.df_method;
    let records = select(ctx, providers, &languages, &Mode::ALL);
    let multi = providers.len() > 1;
    let two_lang = languages.len() > 1;
    let mut factors = Vec::new();
    if multi {
        factors.push(Factor::new(LLM, providers.iter().cloned()));
    }
    factors.push(Factor::new(MODE, Mode::ALL.iter().map(|m| m.as_str())));
    if two_lang {
        factors.push(Factor::new(LANGUAGE, languages.iter().map(|l| l.code())));
    }
    factors.push(Factor::new(CATEGORY, category_names()));
    let obs = observations(ctx, &records, |r, c| {
        let mut l = Vec::with_capacity(4);
        if multi {
            l.push(r.provider.clone());
        }
        l.push(r.mode.as_str().to_string());
        if two_lang {
            l.push(r.language.code().to_string());
        }
        l.push(c.name().to_string());
        l
    });
    let fit = fit(ctx, &obs, &factors)?;

    let mut report = AnalysisReport::new("competence");
    report.inputs = inputs(&records);
    let mut terms = Vec::new();
    if multi {
        terms.push(LLM);
    }
    terms.push(MODE);
    if two_lang {
        terms.push(LANGUAGE);
    }
    terms.push(CATEGORY);
    report.model = Some(ModelSummary::of(&fit, format!("score ~ {} + (1 | item)", terms.join(" * ")), &ctx.options));
    report.f_tests = anova_table(&fit, df)?;
    report.emms.push(EmmTable { name: MODE.into(), rows: emmeans_with(&fit, &[MODE], &[], df)? });
    report.emms.push(EmmTable {
        name: "competence_category".into(),
        rows: emmeans_with(&fit, &[CATEGORY], &[(MODE, Mode::Competence.as_str())], df)?,
    });

    // Item-level correlations over (provider, language, item) pairs.
    let owned: Vec<AdministrationRecord> = records.iter().map(|r| (*r).clone()).collect();
    let rows = aggregate_item_scores(&owned, ctx.bank, |_| true)?;
    let interest = item_means(&rows, Mode::Interest);
    let competence = item_means(&rows, Mode::Competence);
    let (x, y) = paired(&interest, |k| competence.get(k).copied());
    report.correlations.push(NamedCorrelation { name: "interest_vs_self_competence".into(), result: pearson(&x, &y)? });
    for p in providers {
        let sub: BTreeMap<ItemKey, f64> = interest.iter().filter(|(k, _)| &k.0 == p).map(|(k, v)| (k.clone(), *v)).collect();
        let (x, y) = paired(&sub, |k| competence.get(k).copied());
        report.correlations.push(NamedCorrelation {
            name: format!("interest_vs_self_competence_{p}"),
            result: pearson(&x, &y)?,
        });
    }
    if let Some(experts) = experts {
        let expert = experts.item_means();
        let (x, y) = paired(&competence, |k| expert.get(&k.2).copied());
        report.correlations.push(NamedCorrelation { name: "self_vs_expert_competence".into(), result: pearson(&x, &y)? });
        let (x, y) = paired(&interest, |k| expert.get(&k.2).copied());
        report.correlations.push(NamedCorrelation { name: "interest_vs_expert_competence".into(), result: pearson(&x, &y)? });
    } else {
        report.notes.push("no expert ratings supplied: expert correlations skipped".into());
    }

    let mut series = Vec::new();
    for p in providers {
        let base: Vec<(&str, &str)> = if multi { vec![(LLM, p.as_str())] } else { vec![] };
        for mode in Mode::ALL {
            let mut within = base.clone();
            within.push((MODE, mode.as_str()));
            let (means, se) = emm_category_vector(&fit, &within, df)?;
            series.push(Series { label: format!("{p} {mode}"), values: means.to_vec(), errors: Some(se.to_vec()) });
            if mode == Mode::Competence {
                let (grouping, contrasts) = tukey_grouping(&fit, &means, &within, df)?;
                report.contrasts.push(ContrastTable { name: format!("competence_category_pairs_{p}"), rows: contrasts });
                report.codes.push(code_row(ctx, format!("{p} competence"), means, &grouping));
            }
        }
    }
    report.figures.push(Figure::Bars {
        name: "interest_vs_competence".into(),
        title: "Interest and self-rated competence by category".into(),
        groups: category_names(),
        series,
        y_label: "estimated mean".into(),
    });
    Ok(report)
}

/// Run the requested pipelines with config defaults. Pipelines whose inputs
/// are absent (one language, one mode, no version line) are skipped with a
/// note in the returned warnings.
pub fn analyze_all(
    ctx: &AnalysisContext<'_>,
    pipelines: &[Pipeline],
    experts: Option<&ExpertRatings>,
) -> Result<(Vec<AnalysisReport>, Vec<String>), AnalysisError> {
    let cfg = ctx.artifact.config();
    let providers = match &cfg.analysis.providers {
        Some(list) => list.clone(),
        None => default_providers(ctx),
    };
    let mut reports = Vec::new();
    let mut warnings = Vec::new();
    for p in pipelines {
        match p {
            Pipeline::Riasec => {
                if !cfg.modes.contains(&Mode::Interest) {
                    warnings.push("riasec: no interest mode in run, skipped".into());
                    continue;
                }
                let lang = cfg.analysis.language.unwrap_or(cfg.languages[0]);
                reports.push(analyze_riasec_by_llm(ctx, &providers, lang)?);
            }
            Pipeline::Language => {
                if !Language::ALL.iter().all(|l| cfg.languages.contains(l)) || !cfg.modes.contains(&Mode::Interest) {
                    warnings.push("language: run lacks both languages or interest mode, skipped".into());
                    continue;
                }
                reports.push(analyze_language_effect(ctx, &providers)?);
            }
            Pipeline::Version => {
                let lines = version_lines(ctx);
                if lines.is_empty() || !cfg.modes.contains(&Mode::Interest) {
                    warnings.push("version: no family with two or more providers, skipped".into());
                    continue;
                }
                for (family, versions) in lines {
                    reports.push(analyze_version_effect(ctx, &family, &versions)?);
                }
            }
            Pipeline::Competence => {
                if !Mode::ALL.iter().all(|m| cfg.modes.contains(m)) {
                    warnings.push("competence: run lacks competence or interest mode, skipped".into());
                    continue;
                }
                reports.push(analyze_interest_vs_competence(ctx, &providers, experts)?);
            }
        }
    }
    Ok((reports, warnings))
}
