use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn holland(args: &[&str], env: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_holland"));
    cmd.args(args).env_remove("HOLLAND_TEST_KEY");
    for (k, v) in env {
        cmd.env(k, v);
    }
    cmd.output().expect("spawn holland")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn demo_config() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/demo.toml")
}

/// A small two-provider mock study written into `dir`.
fn small_config(dir: &Path, extra: &str) -> PathBuf {
    let text = format!(
        r#"seed = 5
replications = 2
languages = ["en", "zh"]
modes = ["interest", "competence"]
output_dir = "run"
{extra}
[[providers]]
name = "a"
model_id = "mock-a"
[providers.backend.mock.interest]
means = [2.0, 3.6, 4.2, 4.4, 2.4, 2.0]

[[providers]]
name = "b"
model_id = "mock-b"
[providers.backend.mock.interest]
means = [2.2, 3.4, 4.0, 4.5, 2.1, 2.3]
"#
    );
    let path = dir.join("study.toml");
    std::fs::write(&path, text).unwrap();
    path
}

#[test]
fn unknown_subcommand_is_a_usage_error() {
    let o = holland(&["frobnicate"], &[]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("Usage"), "{}", stderr(&o));
}

#[test]
fn demo_config_validates_offline() {
    let cfg = demo_config();
    let o = holland(&["validate", "--offline", "--config", cfg.to_str().unwrap()], &[]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(stdout(&o).contains("0 errors"), "{}", stdout(&o));
}

#[test]
fn short_item_bank_is_fatal_and_names_the_count() {
    let tmp = tempfile::tempdir().unwrap();
    let bank = include_str!("../../core/data/oip_short_form.csv");
    let short: Vec<&str> = bank.lines().take(60).collect();
    std::fs::write(tmp.path().join("bank.csv"), short.join("\n")).unwrap();
    let cfg = small_config(tmp.path(), "item_bank = \"bank.csv\"");
    let o = holland(&["validate", "--offline", "--config", cfg.to_str().unwrap()], &[]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("error:") && stderr(&o).contains("59"), "{}", stderr(&o));
}

#[test]
fn missing_credentials_are_named() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config(tmp.path(), "");
    let mut text = std::fs::read_to_string(&cfg).unwrap();
    text.push_str(
        "\n[[providers]]\nname = \"remote\"\nmodel_id = \"m\"\n[providers.backend.http]\n\
         url = \"http://127.0.0.1:9/v1\"\napi_key_env = \"HOLLAND_TEST_KEY\"\n",
    );
    std::fs::write(&cfg, text).unwrap();
    let o = holland(&["validate", "--offline", "--config", cfg.to_str().unwrap()], &[]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("HOLLAND_TEST_KEY"), "{}", stderr(&o));

    // With the key set, the offline check passes; running still fails on the provider.
    let o = holland(&["validate", "--offline", "--config", cfg.to_str().unwrap()], &[("HOLLAND_TEST_KEY", "k")]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let o = holland(&["run", "--config", cfg.to_str().unwrap()], &[]);
    assert_eq!(code(&o), 3, "{}", stderr(&o));
    assert!(stderr(&o).contains("error: provider remote"), "{}", stderr(&o));
}

#[test]
fn run_score_analyze_roundtrip() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config(tmp.path(), "");
    let cfg = cfg.to_str().unwrap();
    let o = holland(&["run", "--config", cfg], &[]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let run = tmp.path().join("run");
    assert!(run.join("records.jsonl").exists());
    assert!(run.join("manifest.json").exists());

    let o = holland(&["resume", "--config", cfg], &[]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(stdout(&o).contains("0 new, 0 provider calls"), "{}", stdout(&o));

    let o = holland(&["score", "--config", cfg], &[]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(run.join("reports/scores/scored.csv").exists());

    let reports = tmp.path().join("reports");
    let o = holland(
        &["analyze", "--config", cfg, "--pipeline", "all", "--out", reports.to_str().unwrap()],
        &[],
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let emm = std::fs::read_to_string(reports.join("riasec/emm_category.csv")).unwrap();
    assert!(emm.starts_with("level,estimate,se\n"));
    let radar = std::fs::read_to_string(reports.join("riasec/radar.svg")).unwrap();
    assert_eq!(radar.matches(r#"class="axis""#).count(), 6);
    assert!(reports.join("language/report.md").exists());
    // No version line and no competence profile difference needed: version is skipped with a warning.
    assert!(stderr(&o).contains("warning: version"), "{}", stderr(&o));

    let o = holland(&["analyze", "--config", cfg, "--pipeline", "version"], &[]);
    assert_eq!(code(&o), 2);

    let o = holland(&["analyze", "--config", cfg, "--format", "pdf"], &[]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("unsupported report format"), "{}", stderr(&o));
}

#[test]
fn analyze_on_incomplete_artifact_names_missing_cells() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config(tmp.path(), "");
    let cfg = cfg.to_str().unwrap();
    assert_eq!(code(&holland(&["run", "--config", cfg], &[])), 0);
    let log = tmp.path().join("run/records.jsonl");
    let text = std::fs::read_to_string(&log).unwrap();
    let kept: Vec<&str> = text.lines().skip(1).collect();
    std::fs::write(&log, kept.join("\n") + "\n").unwrap();
    let o = holland(&["analyze", "--config", cfg, "--pipeline", "riasec"], &[]);
    assert_eq!(code(&o), 2);
    let err = stderr(&o);
    assert!(err.contains("error:") && err.contains("1 missing cells") && err.contains("a/en/interest/item 1/rep 1"), "{err}");
}

#[test]
fn seed_flag_is_reproducible() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config(tmp.path(), "");
    let cfg = cfg.to_str().unwrap();
    let one = tmp.path().join("one");
    let two = tmp.path().join("two");
    for dir in [&one, &two] {
        let o = holland(&["run", "--config", cfg, "--seed", "99", "--out", dir.to_str().unwrap()], &[]);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
    }
    let a = std::fs::read(one.join("records.jsonl")).unwrap();
    let b = std::fs::read(two.join("records.jsonl")).unwrap();
    assert_eq!(a, b);
}
