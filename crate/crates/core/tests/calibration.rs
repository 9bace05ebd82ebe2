//! With identical latent profiles the LLM terms are null; at alpha = .01 the
//! omnibus tests should rarely reject.

use holland_core::analysis::{analyze_riasec_by_llm, AnalysisContext, AnalysisOptions};
use holland_core::config::RunConfig;
use holland_core::instrument::{ItemBank, Language};
use holland_core::runner::{run_survey_with, RunOptions};
use holland_core::scoring::OccupationTable;

fn null_study(seed: u64, out: &std::path::Path) -> RunConfig {
    let mut text = format!("seed = {seed}\nreplications = 20\noutput_dir = \"{}\"\n", out.display());
    for name in ["p1", "p2", "p3", "p4"] {
        text.push_str(&format!(
            "[[providers]]\nname = \"{name}\"\nmodel_id = \"mock-{name}\"\n\
             [providers.backend.mock.interest]\nmeans = [2.0, 3.5, 4.2, 4.4, 2.5, 2.2]\nitem_sd = 0.3\n"
        ));
    }
    RunConfig::from_toml_str(&text).unwrap()
}

#[test]
fn identical_profiles_are_rarely_significant() {
    let bank = ItemBank::builtin();
    let table = OccupationTable::builtin();
    let runs = 100;
    let mut quiet = 0;
    for seed in 0..runs {
        let tmp = tempfile::tempdir().unwrap();
        let dir = tmp.path().join("run");
        let cfg = null_study(9000 + seed, &dir);
        let outcome = run_survey_with(&cfg, &dir, RunOptions::default(), None).unwrap();
        let ctx = AnalysisContext {
            artifact: &outcome.artifact,
            bank: &bank,
            occupations: &table,
            options: AnalysisOptions::default(),
        };
        let providers: Vec<String> = cfg.providers.iter().map(|p| p.params.name.clone()).collect();
        let report = analyze_riasec_by_llm(&ctx, &providers, Language::English).unwrap();
        let llm = report.f_test("llm").unwrap().p_value;
        let inter = report.f_test("llm:category").unwrap().p_value;
        if llm > 0.01 && inter > 0.01 {
            quiet += 1;
        }
    }
    assert!(quiet >= 95, "only {quiet} of {runs} null runs were nonsignificant");
}
