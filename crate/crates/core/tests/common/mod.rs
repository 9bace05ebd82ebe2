//! Oracles and checks shared by the integration tests and the acceptance runner.
//!
//! Every oracle here is written against plain dense linear algebra or direct
//! numerical integration, never against the library's own shortcuts.

#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use holland_core::analysis::{
    analyze_interest_vs_competence, analyze_riasec_by_llm, render_report, AnalysisContext, AnalysisOptions,
    ReportFormat,
};
use holland_core::config::RunConfig;
use holland_core::instrument::{ItemBank, Language, RiasecCategory};
use holland_core::runner::{run_survey_with, RunOptions, RECORDS_FILE};
use holland_core::scoring::{holland_code, OccupationTable};
use holland_core::stats::{
    anova_table, build_frame, correlation_from_r, fit_lmm, pairwise_contrasts, pearson, studentized_range_cdf,
    studentized_range_quantile, t_cdf, Adjustment, AnalysisMode, DfMethod, Factor, ModelFrame, Observation,
};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Outcome of one acceptance check.
pub struct Check {
    pub pass: bool,
    pub detail: String,
}

impl Check {
    pub fn new(pass: bool, detail: impl Into<String>) -> Self {
        Self { pass, detail: detail.into() }
    }
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn normal(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

// ---------------------------------------------------------------- frames

fn names(prefix: &str, n: usize) -> Vec<String> {
    (0..n).map(|i| format!("{prefix}{i}")).collect()
}

/// Survey-shaped frame: `crossed` factors vary within item, items are nested
/// in the six categories (10 each), one row per item and crossed cell.
pub fn survey_frame(crossed: &[(&str, usize)], seed: u64) -> ModelFrame {
    let mut r = rng(seed);
    let cats: Vec<String> = RiasecCategory::ALL.iter().map(|c| c.name().to_string()).collect();
    let mut factors: Vec<Factor> = crossed.iter().map(|(n, k)| Factor::new(*n, names(n, *k))).collect();
    factors.push(Factor::new("category", cats.clone()));
    let cells: usize = crossed.iter().map(|(_, k)| k).product();
    let mut obs = Vec::new();
    for item in 0..60 {
        let cat = &cats[item / 10];
        let offset = 0.5 * normal(&mut r);
        for c in 0..cells {
            let mut rest = c;
            let mut levels = Vec::new();
            for (n, k) in crossed.iter().rev() {
                levels.push(format!("{n}{}", rest % k));
                rest /= k;
            }
            levels.reverse();
            levels.push(cat.clone());
            obs.push(Observation { y: 3.0 + offset + normal(&mut r), levels, group: format!("item{item}") });
        }
    }
    build_frame(&obs, &factors, AnalysisMode::ItemAggregated).expect("survey frame")
}

// ---------------------------------------------------------------- REML oracle

/// Profiled REML criterion via one eigendecomposition of Z Z'.
pub struct RemlOracle {
    xt: DMatrix<f64>,
    yt: DVector<f64>,
    lambda: DVector<f64>,
    n: usize,
    p: usize,
}

impl RemlOracle {
    pub fn new(frame: &ModelFrame) -> Self {
        let n = frame.n_obs();
        let g = frame.n_groups();
        let mut z = DMatrix::zeros(n, g);
        for (i, &grp) in frame.groups.iter().enumerate() {
            z[(i, grp)] = 1.0;
        }
        let eig = (&z * z.transpose()).symmetric_eigen();
        let ut = eig.eigenvectors.transpose();
        Self {
            xt: &ut * &frame.x,
            yt: &ut * &frame.y,
            lambda: eig.eigenvalues.map(|l| l.max(0.0)),
            n,
            p: frame.x.ncols(),
        }
    }

    /// -2 restricted log-likelihood with sigma2 profiled out.
    pub fn criterion(&self, theta: f64) -> f64 {
        let w: Vec<f64> = self.lambda.iter().map(|l| 1.0 / (1.0 + theta * l)).collect();
        let logdet_h: f64 = self.lambda.iter().map(|l| (theta * l).ln_1p()).sum();
        let mut a = DMatrix::zeros(self.p, self.p);
        let mut b = DVector::zeros(self.p);
        let mut yy = 0.0;
        for i in 0..self.n {
            let xi = self.xt.row(i).transpose();
            a += w[i] * &xi * xi.transpose();
            b += w[i] * self.yt[i] * &xi;
            yy += w[i] * self.yt[i] * self.yt[i];
        }
        let chol = a.cholesky().expect("X' H^-1 X is positive definite");
        let beta = chol.solve(&b);
        let quad = yy - b.dot(&beta);
        let logdet_a: f64 = chol.l().diagonal().iter().map(|d| 2.0 * d.ln()).sum();
        let df = (self.n - self.p) as f64;
        df * (1.0 + (2.0 * std::f64::consts::PI * quad / df).ln()) + logdet_h + logdet_a
    }

    /// Minimum over `points` values of rho in [0, 1), theta = rho / (1 - rho).
    pub fn grid_min(&self, points: usize) -> (f64, f64) {
        (0..points)
            .map(|j| {
                let rho = j as f64 / points as f64;
                let theta = rho / (1.0 - rho);
                (theta, self.criterion(theta))
            })
            .fold((0.0, f64::INFINITY), |acc, v| if v.1 < acc.1 { v } else { acc })
    }
}

/// Small random-intercept problem: intercept plus up to two covariates.
pub fn random_lmm_frame(seed: u64) -> ModelFrame {
    let mut r = rng(seed);
    let g = r.random_range(3..=8usize);
    let n = r.random_range((g * 3).max(12)..=50usize);
    let p = r.random_range(1..=3usize);
    let tau = [0.0, 0.3, 1.0, 2.5][r.random_range(0..4usize)];
    let offsets: Vec<f64> = (0..g).map(|_| tau * normal(&mut r)).collect();
    let groups: Vec<usize> = (0..n).map(|i| if i < g { i } else { r.random_range(0..g) }).collect();
    let mut x = DMatrix::from_element(n, p, 1.0);
    for i in 0..n {
        for j in 1..p {
            x[(i, j)] = normal(&mut r);
        }
    }
    let y = DVector::from_fn(n, |i, _| 1.0 + 0.5 * x[(i, p - 1)] + offsets[groups[i]] + normal(&mut r));
    ModelFrame::from_design(x, y, groups).expect("random frame")
}

// ---------------------------------------------------------------- OLS oracle

/// Two crossed factors (3 x 4), unbalanced replication, six groups crossed
/// with the cells, and a response whose residual is orthogonal to both the
/// cell indicators and the group indicators, so the REML optimum is theta = 0.
pub struct OlsCase {
    pub frame: ModelFrame,
    pub cells: Vec<usize>,
    pub y: Vec<f64>,
}

pub fn ols_case(seed: u64) -> OlsCase {
    let mut r = rng(seed);
    let (a, b, groups) = (3usize, 4usize, 6usize);
    let mut rows: Vec<(usize, usize, usize)> = Vec::new();
    for i in 0..a {
        for j in 0..b {
            for g in 0..groups {
                let reps = 1 + (i + 2 * j + g) % 2 + usize::from(r.random_bool(0.3));
                for _ in 0..reps {
                    rows.push((i, j, g));
                }
            }
        }
    }
    let n = rows.len();
    let mut basis = DMatrix::zeros(n, a * b + groups);
    for (row, &(i, j, g)) in rows.iter().enumerate() {
        basis[(row, i * b + j)] = 1.0;
        basis[(row, a * b + g)] = 1.0;
    }
    let raw = DVector::from_fn(n, |_, _| normal(&mut r));
    let svd = basis.clone().svd(true, true);
    let u = svd.u.expect("u");
    let tol = 1e-9 * svd.singular_values.max();
    let mut e = raw.clone();
    for (k, s) in svd.singular_values.iter().enumerate() {
        if *s > tol {
            let col = u.column(k);
            e -= col.dot(&raw) * col;
        }
    }
    let means: Vec<f64> = (0..a * b).map(|_| 3.0 + normal(&mut r)).collect();
    let y: Vec<f64> = rows.iter().zip(e.iter()).map(|(&(i, j, _), ei)| means[i * b + j] + ei).collect();
    let factors = [Factor::new("A", names("a", a)), Factor::new("B", names("b", b))];
    let obs: Vec<Observation> = rows
        .iter()
        .zip(&y)
        .map(|(&(i, j, g), &y)| Observation {
            y,
            levels: vec![format!("a{i}"), format!("b{j}")],
            group: format!("g{g}"),
        })
        .collect();
    let frame = build_frame(&obs, &factors, AnalysisMode::ReplicationLevel).expect("ols frame");
    OlsCase { frame, cells: rows.iter().map(|&(i, j, _)| i * b + j).collect(), y }
}

fn rss(x: &DMatrix<f64>, y: &DVector<f64>) -> f64 {
    let xtx = x.tr_mul(x);
    let beta = xtx.cholesky().expect("full rank").solve(&x.tr_mul(y));
    (y - x * beta).norm_squared()
}

/// Deviation (sum-to-zero) coding of a level.
fn dev(level: usize, k: usize) -> Vec<f64> {
    (0..k - 1).map(|c| if level == c { 1.0 } else if level == k - 1 { -1.0 } else { 0.0 }).collect()
}

/// Type III F for A, B, and A:B by dropping deviation-coded columns.
pub fn ols_f(case: &OlsCase) -> BTreeMap<&'static str, (f64, f64, f64)> {
    let (a, b) = (3usize, 4usize);
    let n = case.y.len();
    let y = DVector::from_vec(case.y.clone());
    let build = |keep_a: bool, keep_b: bool, keep_ab: bool| {
        let mut cols: Vec<Vec<f64>> = vec![vec![1.0; n]];
        let pa: Vec<Vec<f64>> = case.cells.iter().map(|c| dev(c / b, a)).collect();
        let pb: Vec<Vec<f64>> = case.cells.iter().map(|c| dev(c % b, b)).collect();
        if keep_a {
            for k in 0..a - 1 {
                cols.push(pa.iter().map(|v| v[k]).collect());
            }
        }
        if keep_b {
            for k in 0..b - 1 {
                cols.push(pb.iter().map(|v| v[k]).collect());
            }
        }
        if keep_ab {
            for ka in 0..a - 1 {
                for kb in 0..b - 1 {
                    cols.push(pa.iter().zip(&pb).map(|(u, v)| u[ka] * v[kb]).collect());
                }
            }
        }
        DMatrix::from_fn(n, cols.len(), |i, j| cols[j][i])
    };
    let full = rss(&build(true, true, true), &y);
    let df_res = (n - a * b) as f64;
    let s2 = full / df_res;
    let f = |reduced: f64, q: f64| ((reduced - full) / q / s2, q, df_res);
    let mut out = BTreeMap::new();
    out.insert("A", f(rss(&build(false, true, true), &y), (a - 1) as f64));
    out.insert("B", f(rss(&build(true, false, true), &y), (b - 1) as f64));
    out.insert("A:B", f(rss(&build(true, true, false), &y), ((a - 1) * (b - 1)) as f64));
    out
}

// ---------------------------------------------------------------- studentized range oracle

fn simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, intervals: usize) -> f64 {
    let m = intervals + intervals % 2;
    let h = (b - a) / m as f64;
    let mut s = f(a) + f(b);
    for i in 1..m {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        s += w * f(a + h * i as f64);
    }
    s * h / 3.0
}

fn phi(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

fn big_phi(z: f64) -> f64 {
    0.5 * statrs::function::erf::erfc(-z / std::f64::consts::SQRT_2)
}

/// P(range of k standard normals <= w) by composite Simpson.
pub fn oracle_range_cdf(w: f64, k: u32) -> f64 {
    let kf = f64::from(k);
    simpson(|z| kf * phi(z) * (big_phi(z) - big_phi(z - w)).powi(k as i32 - 1), -9.0, 9.0, 600)
}

/// Studentized range CDF by nested composite Simpson over the chi scale.
pub fn oracle_sr_cdf(q: f64, k: u32, df: f64) -> f64 {
    let ln_c = (df / 2.0) * df.ln() - statrs::function::gamma::ln_gamma(df / 2.0) - (df / 2.0 - 1.0) * 2f64.ln();
    let density = |s: f64| {
        if s <= 0.0 {
            0.0
        } else {
            (ln_c + (df - 1.0) * s.ln() - df * s * s / 2.0).exp()
        }
    };
    let upper = 1.0 + 12.0 / df.sqrt();
    simpson(|s| density(s) * oracle_range_cdf(q * s, k), 0.0, upper, 800)
}

pub fn oracle_sr_quantile(p: f64, k: u32, df: f64) -> f64 {
    let (mut lo, mut hi) = (0.0, 20.0);
    for _ in 0..50 {
        let mid = 0.5 * (lo + hi);
        if oracle_sr_cdf(mid, k, df) < p {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

// ---------------------------------------------------------------- mock study

/// Four mock providers with Social/Artistic/Investigative on top; the last
/// one rates its competence as the mirror image of its interest.
pub fn mock_study_toml(seed: u64, out: &Path) -> String {
    format!(
        r#"
seed = {seed}
replications = 20
languages = ["en", "zh"]
modes = ["interest", "competence"]
output_dir = "{out}"
max_in_flight = 8

[[providers]]
name = "alpha"
model_id = "mock-alpha"
[providers.backend.mock.interest]
means = [2.0, 3.7, 4.2, 4.5, 2.4, 2.0]
item_sd = 0.3
[providers.backend.mock.competence]
means = [2.5, 3.8, 3.9, 4.2, 2.9, 2.7]
item_sd = 0.3

[[providers]]
name = "beta"
model_id = "mock-beta"
temperature = 0.9
[providers.backend.mock.interest]
means = [1.9, 3.6, 4.5, 4.2, 2.2, 1.9]
item_sd = 0.3

[[providers]]
name = "gamma"
model_id = "mock-gamma"
temperature = 0.8
[providers.backend.mock.interest]
means = [2.2, 3.9, 3.8, 4.4, 2.6, 2.3]
item_sd = 0.3

[[providers]]
name = "inverted"
model_id = "mock-inverted"
temperature = 0.5
[providers.backend.mock.interest]
means = [1.8, 3.6, 4.1, 4.6, 2.1, 1.8]
noise = 0.5
item_sd = 0.4
[providers.backend.mock.competence]
means = [4.2, 2.4, 1.9, 1.4, 3.9, 4.2]
noise = 0.5
item_sd = 0.4
"#,
        out = out.display().to_string().replace('\\', "/")
    )
}

pub struct StudyRun {
    pub dir: PathBuf,
    pub reports: PathBuf,
    pub elapsed_secs: f64,
    pub category_p: f64,
    pub codes: Vec<(String, String)>,
    pub inverted_r: f64,
}

/// Run the mock study into `root/run`, analyze it, and render reports into `root/reports`.
pub fn run_mock_study(root: &Path, seed: u64) -> StudyRun {
    let start = Instant::now();
    let dir = root.join("run");
    let cfg = RunConfig::from_toml_str(&mock_study_toml(seed, &dir)).expect("mock config");
    let outcome = run_survey_with(&cfg, &dir, RunOptions::default(), None).expect("mock run");
    assert!(outcome.failures.is_empty());
    let bank = ItemBank::builtin();
    let table = OccupationTable::builtin();
    let ctx = AnalysisContext {
        artifact: &outcome.artifact,
        bank: &bank,
        occupations: &table,
        options: AnalysisOptions::default(),
    };
    let providers: Vec<String> = cfg.providers.iter().map(|p| p.params.name.clone()).collect();
    let riasec = analyze_riasec_by_llm(&ctx, &providers, Language::English).expect("riasec analysis");
    let competence = analyze_interest_vs_competence(&ctx, &providers, None).expect("competence analysis");
    let reports = root.join("reports");
    for r in [&riasec, &competence] {
        render_report(r, &ReportFormat::ALL, &reports).expect("render");
    }
    StudyRun {
        dir,
        reports,
        elapsed_secs: start.elapsed().as_secs_f64(),
        category_p: riasec.f_test("category").expect("category term").p_value,
        codes: riasec.codes.iter().map(|c| (c.label.clone(), c.code.code())).collect(),
        inverted_r: competence.correlation("interest_vs_self_competence_inverted").expect("correlation").r,
    }
}

/// Relative path and bytes of every output file with one of `exts`.
pub fn collect_outputs(root: &Path, exts: &[&str]) -> BTreeMap<PathBuf, Vec<u8>> {
    fn walk(base: &Path, dir: &Path, exts: &[&str], out: &mut BTreeMap<PathBuf, Vec<u8>>) {
        let mut entries: Vec<_> = std::fs::read_dir(dir).expect("read dir").map(|e| e.expect("entry").path()).collect();
        entries.sort();
        for p in entries {
            if p.is_dir() {
                walk(base, &p, exts, out);
            } else if p.extension().and_then(|e| e.to_str()).is_some_and(|e| exts.contains(&e)) {
                out.insert(p.strip_prefix(base).expect("prefix").to_path_buf(), std::fs::read(&p).expect("read"));
            }
        }
    }
    let mut out = BTreeMap::new();
    walk(root, root, exts, &mut out);
    out
}

// ---------------------------------------------------------------- checks

pub fn check_survey_dfs() -> Check {
    let start = Instant::now();
    let mut failures = Vec::new();
    let mut expect = |frame: &ModelFrame, term: &str, want: (f64, f64)| {
        let fit = fit_lmm(frame).expect("fit");
        let table = anova_table(&fit, DfMethod::Residual).expect("anova");
        let got = table.iter().find(|f| f.term == term).map(|f| (f.df_num, f.df_den));
        if got != Some(want) {
            failures.push(format!("{term}: got {got:?}, want {want:?}"));
        }
    };
    let riasec = survey_frame(&[("llm", 4)], 1);
    expect(&riasec, "llm", (3.0, 216.0));
    expect(&riasec, "category", (5.0, 216.0));
    expect(&riasec, "llm:category", (15.0, 216.0));
    let language = survey_frame(&[("llm", 4), ("language", 2)], 2);
    expect(&language, "language", (1.0, 432.0));
    expect(&language, "llm:category", (15.0, 432.0));
    expect(&language, "llm:language:category", (15.0, 432.0));
    expect(&survey_frame(&[("version", 4), ("language", 2)], 3), "version", (3.0, 432.0));
    expect(&survey_frame(&[("version", 3), ("language", 2)], 4), "version", (2.0, 324.0));
    expect(&survey_frame(&[("llm", 4), ("mode", 2), ("language", 2)], 5), "mode", (1.0, 864.0));
    let mut r = rng(6);
    let x: Vec<f64> = (0..480).map(|_| normal(&mut r)).collect();
    let y: Vec<f64> = x.iter().map(|v| v + normal(&mut r)).collect();
    let corr = pearson(&x, &y).expect("pearson");
    if corr.df != 478.0 {
        failures.push(format!("correlation df {}", corr.df));
    }
    let secs = start.elapsed().as_secs_f64();
    if secs >= 5.0 {
        failures.push(format!("took {secs:.2}s"));
    }
    if failures.is_empty() {
        Check::new(true, format!("all 10 dfs exact, {secs:.2}s"))
    } else {
        Check::new(false, failures.join("; "))
    }
}

pub fn check_lmm_oracle() -> Check {
    let mut worst_gap = f64::NEG_INFINITY;
    let mut worst_consistency: f64 = 0.0;
    for seed in 0..20u64 {
        let frame = random_lmm_frame(1000 + seed);
        let fit = fit_lmm(&frame).expect("fit");
        let oracle = RemlOracle::new(&frame);
        let (_, grid) = oracle.grid_min(100_000);
        worst_gap = worst_gap.max(fit.reml_criterion - grid);
        worst_consistency = worst_consistency.max((oracle.criterion(fit.theta) - fit.reml_criterion).abs());
    }
    let y = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
    let frame = ModelFrame::from_design(
        DMatrix::from_element(6, 1, 1.0),
        DVector::from_row_slice(&y),
        vec![0, 0, 0, 1, 1, 1],
    )
    .expect("balanced frame");
    let fit = fit_lmm(&frame).expect("balanced fit");
    let tau2 = (13.5 - 1.0) / 3.0;
    let balanced = (fit.sigma2 - 1.0).abs() <= 1e-6 && (fit.tau2 - tau2).abs() <= 1e-6;
    let pass = worst_gap <= 1e-8 && worst_consistency <= 1e-8 && balanced;
    Check::new(
        pass,
        format!(
            "fit - grid min <= {worst_gap:.2e}, |oracle(theta_hat) - fit| <= {worst_consistency:.2e}; balanced sigma2 = {:.8}, tau2 = {:.8}",
            fit.sigma2, fit.tau2
        ),
    )
}

pub fn check_ols_boundary() -> Check {
    let mut worst: f64 = 0.0;
    let mut thetas = Vec::new();
    for seed in 0..5u64 {
        let case = ols_case(40 + seed);
        let fit = fit_lmm(&case.frame).expect("fit");
        thetas.push(fit.theta);
        let n = case.y.len();
        let p = 12;
        let mut sum = vec![0.0; p];
        let mut cnt = vec![0.0; p];
        for (c, y) in case.cells.iter().zip(&case.y) {
            sum[*c] += y;
            cnt[*c] += 1.0;
        }
        let mean: Vec<f64> = sum.iter().zip(&cnt).map(|(s, c)| s / c).collect();
        let rss: f64 = case.cells.iter().zip(&case.y).map(|(c, y)| (y - mean[*c]).powi(2)).sum();
        let s2 = rss / (n - p) as f64;
        let rel = |a: f64, b: f64| (a - b).abs() / b.abs().max(1.0);
        for c in 0..p {
            let se = (s2 / cnt[c]).sqrt();
            worst = worst.max(rel(fit.beta[c], mean[c]));
            worst = worst.max(rel(fit.se_beta[c], se));
            worst = worst.max(rel(fit.beta[c] / fit.se_beta[c], mean[c] / se));
        }
        let anova = anova_table(&fit, DfMethod::Residual).expect("anova");
        for (term, (f, q, d)) in ols_f(&case) {
            let got = anova.iter().find(|t| t.term == term).expect("term");
            worst = worst.max(rel(got.statistic, f)).max(rel(got.df_num, q)).max(rel(got.df_den, d));
        }
        // One contrast t: difference of the A marginal means a0 - a1.
        let cons = pairwise_contrasts(&fit, "A", Adjustment::None, &[], DfMethod::Residual).expect("contrasts");
        let (mut est, mut var) = (0.0, 0.0);
        for j in 0..4 {
            est += (mean[j] - mean[4 + j]) / 4.0;
            var += s2 * (1.0 / cnt[j] + 1.0 / cnt[4 + j]) / 16.0;
        }
        worst = worst.max(rel(cons[0].t, est / var.sqrt()));
    }
    let boundary = thetas.iter().all(|&t| t == 0.0);
    Check::new(
        boundary && worst <= 1e-8,
        format!("theta_hat = {thetas:?}, max relative deviation {worst:.2e}"),
    )
}

pub fn check_studentized_range() -> Check {
    let mut worst: f64 = 0.0;
    for df in [5.0, 10.0, 30.0, 120.0] {
        for i in 0..=200 {
            let q = 10.0 * i as f64 / 200.0;
            let want = 2.0 * t_cdf(q / std::f64::consts::SQRT_2, df) - 1.0;
            worst = worst.max((studentized_range_cdf(q, 2, df) - want).abs());
        }
    }
    let q = studentized_range_quantile(0.95, 3, 10.0);
    let oracle = oracle_sr_quantile(0.95, 3, 10.0);
    let table = 3.877;
    let pass = worst <= 1e-6 && (q * 1000.0).round() / 1000.0 == table && (q - oracle).abs() < 5e-4;
    Check::new(pass, format!("k=2 max error {worst:.2e}; q95(3,10) = {q:.5}, oracle {oracle:.5}, table {table}"))
}

pub fn check_correlation() -> Check {
    let a = correlation_from_r(0.215, 480).expect("r=.215");
    let b = correlation_from_r(-0.060, 480).expect("r=-.060");
    let pass = (a.t - 4.804).abs() <= 0.01
        && (a.ci95.0 - 0.128).abs() <= 0.002
        && (a.ci95.1 - 0.298).abs() <= 0.002
        && (b.p - 0.190).abs() <= 0.005;
    Check::new(
        pass,
        format!("t = {:.3}, CI [{:.3}, {:.3}]; p(-.060) = {:.3}", a.t, a.ci95.0, a.ci95.1, b.p),
    )
}

pub fn check_end_to_end(study: &StudyRun) -> Check {
    let allowed = ['S', 'A', 'I'];
    let codes_ok = study.codes.len() == 4 && study.codes.iter().all(|(_, c)| c.chars().all(|l| allowed.contains(&l)));
    let pass = study.elapsed_secs < 60.0 && study.category_p < 0.001 && codes_ok && study.inverted_r < -0.5;
    let codes: Vec<String> = study.codes.iter().map(|(l, c)| format!("{l}={c}")).collect();
    Check::new(
        pass,
        format!(
            "{:.1}s, category p = {:.2e}, codes {}, inverted r = {:.3}",
            study.elapsed_secs,
            study.category_p,
            codes.join(" "),
            study.inverted_r
        ),
    )
}

pub fn check_determinism(a: &StudyRun, b: &StudyRun) -> Check {
    let log_a = std::fs::read(a.dir.join(RECORDS_FILE)).expect("log a");
    let log_b = std::fs::read(b.dir.join(RECORDS_FILE)).expect("log b");
    let out_a = collect_outputs(&a.reports, &["csv", "svg"]);
    let out_b = collect_outputs(&b.reports, &["csv", "svg"]);
    let differing: Vec<String> = out_a
        .iter()
        .filter(|(k, v)| out_b.get(*k) != Some(*v))
        .map(|(k, _)| k.display().to_string())
        .collect();
    let pass = log_a == log_b && out_a.len() == out_b.len() && differing.is_empty() && !out_a.is_empty();
    Check::new(
        pass,
        format!(
            "JSONL {} bytes {}, {} CSV/SVG files, {} differ",
            log_a.len(),
            if log_a == log_b { "identical" } else { "DIFFER" },
            out_a.len(),
            differing.len()
        ),
    )
}

/// Fit a small two-factor frame on `y`, and on `a*y + b`, and compare.
pub fn affine_case(seed: u64, scale: f64, shift: f64) -> Result<(), String> {
    let mut r = rng(seed);
    let factors = [Factor::new("llm", names("m", 3)), Factor::new("category", names("c", 4))];
    let mut obs = Vec::new();
    let mut transformed = Vec::new();
    for item in 0..8 {
        let off = normal(&mut r);
        for m in 0..3 {
            for c in 0..4 {
                let y = 3.0 + 0.3 * c as f64 + off + normal(&mut r);
                let levels = vec![format!("m{m}"), format!("c{c}")];
                obs.push(Observation { y, levels: levels.clone(), group: format!("i{item}") });
                transformed.push(Observation { y: scale * y + shift, levels, group: format!("i{item}") });
            }
        }
    }
    let fa = fit_lmm(&build_frame(&obs, &factors, AnalysisMode::ItemAggregated).map_err(|e| e.to_string())?)
        .map_err(|e| e.to_string())?;
    let fb = fit_lmm(&build_frame(&transformed, &factors, AnalysisMode::ItemAggregated).map_err(|e| e.to_string())?)
        .map_err(|e| e.to_string())?;
    let same = |what: &str, x: f64, y: f64| -> Result<(), String> {
        if (x - y).abs() <= 1e-6 * x.abs().max(1.0) || (x - y).abs() <= 1e-12 {
            Ok(())
        } else {
            Err(format!("{what}: {x} vs {y} (scale {scale}, shift {shift})"))
        }
    };
    let ta = anova_table(&fa, DfMethod::Residual).map_err(|e| e.to_string())?;
    let tb = anova_table(&fb, DfMethod::Residual).map_err(|e| e.to_string())?;
    for (x, y) in ta.iter().zip(&tb) {
        same(&format!("F {}", x.term), x.statistic, y.statistic)?;
        same(&format!("p {}", x.term), x.p_value, y.p_value)?;
    }
    let ca = pairwise_contrasts(&fa, "category", Adjustment::Tukey, &[], DfMethod::Residual).map_err(|e| e.to_string())?;
    let cb = pairwise_contrasts(&fb, "category", Adjustment::Tukey, &[], DfMethod::Residual).map_err(|e| e.to_string())?;
    for (x, y) in ca.iter().zip(&cb) {
        same("t", x.t, y.t)?;
        same("p", x.p_adjusted, y.p_adjusted)?;
    }
    let means: [f64; 6] = std::array::from_fn(|_| r.random_range(1.0..5.0));
    let moved: [f64; 6] = means.map(|m| scale * m + shift);
    let (c1, c2) = (holland_code(&means, None), holland_code(&moved, None));
    if c1 != c2 {
        return Err(format!("code {} vs {}", c1.code(), c2.code()));
    }
    Ok(())
}

pub fn check_invariance(cases: u32) -> Check {
    use proptest::test_runner::{Config, TestCaseError, TestRunner};
    let mut runner = TestRunner::new(Config { cases, failure_persistence: None, ..Config::default() });
    let strategy = (0u64..1_000_000, 0.05f64..20.0, -50.0f64..50.0);
    let result = runner.run(&strategy, |(seed, scale, shift)| {
        affine_case(seed, scale, shift).map_err(TestCaseError::fail)
    });
    match result {
        Ok(()) => Check::new(true, format!("{cases} random affine transforms: F, p, t, codes unchanged")),
        Err(e) => Check::new(false, e.to_string()),
    }
}
