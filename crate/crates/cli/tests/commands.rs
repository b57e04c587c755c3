use std::path::Path;
use std::process::Command;

use engage_cli::commands::{ingest, predict, stance, state_model, synth, top_terms};
use engage_cli::{exit_code, RunConfig};
use engage_core::ingest::FilterRule;
use engage_core::synth::GroundTruth;

const SMALL_SYNTH: &str = "[synth]\nn_users = 400\np_in = 0.05\np_out = 0.005\n";

fn config(dir: &Path, seed: u64, extra: &str) -> RunConfig {
    let text = format!("seed = {seed}\noutdir = \"out\"\n[inputs]\ndata_dir = \"out/synth\"\n{SMALL_SYNTH}{extra}");
    std::fs::write(dir.join("run.toml"), text).unwrap();
    RunConfig::load(&dir.join("run.toml"), None).unwrap()
}

fn engage(dir: &Path, args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_engage"))
        .arg("-c")
        .arg(dir.join("run.toml"))
        .args(args)
        .output()
        .unwrap()
}

fn truth(cfg: &RunConfig) -> GroundTruth {
    let f = std::fs::File::open(cfg.command_dir("synth").join("ground_truth.json")).unwrap();
    serde_json::from_reader(f).unwrap()
}

fn csv_rows(path: &Path) -> Vec<csv::StringRecord> {
    csv::Reader::from_path(path).unwrap().records().map(Result::unwrap).collect()
}

#[test]
fn synth_records_truth_for_every_account() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), 3, "");
    let s = synth::cmd_synth(&cfg).unwrap();
    let t = truth(&cfg);
    assert_eq!(t.users.len(), s.users);
    assert_eq!(t.planted_sides().len(), 400);
    assert!(cfg.command_dir("synth").join("synth_config.toml").is_file());
}

#[test]
fn different_seeds_give_different_corpora() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let ca = config(a.path(), 1, "");
    let cb = config(b.path(), 2, "");
    synth::cmd_synth(&ca).unwrap();
    synth::cmd_synth(&cb).unwrap();
    let read = |c: &RunConfig| std::fs::read(c.command_dir("synth").join("posts.jsonl")).unwrap();
    assert_ne!(read(&ca), read(&cb));
}

#[test]
fn ingest_keeps_exactly_the_planted_accounts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), 4, "");
    synth::cmd_synth(&cfg).unwrap();
    let s = ingest::cmd_ingest(&cfg).unwrap();
    assert_eq!(s.truth_kept_match, Some(true));
    let expected = s.truth_expected.unwrap();
    for rule in FilterRule::ALL {
        assert_eq!(s.report.excluded_by(rule), expected.get(&rule).copied().unwrap_or(0), "{rule:?}");
    }
    let excluded = csv_rows(&cfg.command_dir("ingest").join("exclusions.csv"));
    assert_eq!(excluded.len(), s.report.total_excluded());
}

#[test]
fn empty_posts_give_an_empty_store() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("posts.jsonl"), "").unwrap();
    std::fs::write(dir.path().join("profiles.jsonl"), "").unwrap();
    std::fs::write(dir.path().join("gaz.csv"), "kind,state,key\nname,NY,new york\n").unwrap();
    let text = "seed = 1\n[inputs]\nposts = \"posts.jsonl\"\nprofiles = \"profiles.jsonl\"\ngazetteer = \"gaz.csv\"\n";
    std::fs::write(dir.path().join("run.toml"), text).unwrap();

    let out = engage(dir.path(), &["ingest"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let cfg = RunConfig::load(&dir.path().join("run.toml"), None).unwrap();
    let report: serde_json::Value =
        serde_json::from_reader(std::fs::File::open(cfg.command_dir("ingest").join("filter_report.json")).unwrap())
            .unwrap();
    assert_eq!(report["users"], 0);
    for v in report["report"].as_object().unwrap().values() {
        assert_eq!(v, 0);
    }
    let posts = std::fs::read_to_string(cfg.command_dir("ingest").join("posts.jsonl")).unwrap();
    assert!(posts.is_empty());
}

#[test]
fn corrupt_gazetteer_is_an_input_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), 5, "");
    synth::cmd_synth(&cfg).unwrap();
    let gaz = cfg.command_dir("synth").join("gazetteer.csv");
    let mut text = std::fs::read_to_string(&gaz).unwrap();
    text.push_str("box,NY,not-a-number,1,2,3\n");
    std::fs::write(&gaz, text).unwrap();
    let out = engage(dir.path(), &["ingest"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn stance_recovers_planted_sides() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), 6, "");
    synth::cmd_synth(&cfg).unwrap();
    ingest::cmd_ingest(&cfg).unwrap();
    let s = stance::cmd_stance(&cfg).unwrap();
    assert!(s.planted_accuracy_gcc.unwrap() >= 0.95, "{:?}", s.planted_accuracy_gcc);
    let sides = csv_rows(&cfg.command_dir("stance").join("sides.csv"));
    assert_eq!(sides.len(), 400);
    assert_eq!(s.best_ratio, 1.5);
}

#[test]
fn stance_without_anchors_is_an_input_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), 6, "");
    synth::cmd_synth(&cfg).unwrap();
    ingest::cmd_ingest(&cfg).unwrap();
    std::fs::write(cfg.command_dir("synth").join("anchors.csv"), "user_id,side\n").unwrap();
    let err = stance::cmd_stance(&cfg).unwrap_err();
    assert_eq!(exit_code(&err), 2);
    std::fs::remove_file(cfg.command_dir("synth").join("anchors.csv")).unwrap();
    let out = engage(dir.path(), &["stance"]);
    assert_eq!(out.status.code(), Some(2));
}

fn through_stance(dir: &Path, seed: u64, extra: &str) -> RunConfig {
    let cfg = config(dir, seed, extra);
    synth::cmd_synth(&cfg).unwrap();
    ingest::cmd_ingest(&cfg).unwrap();
    stance::cmd_stance(&cfg).unwrap();
    cfg
}

#[test]
fn state_model_matches_planted_fit_and_logs_every_column() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = through_stance(dir.path(), 7, "");
    let s = state_model::cmd_state_model(&cfg).unwrap();
    let planted = s.planted_r2.unwrap();
    assert!((s.full.r2 - planted).abs() <= 0.05, "r2 {} vs planted {planted}", s.full.r2);

    let log = csv_rows(&cfg.command_dir("state-model").join("selection.csv"));
    assert_eq!(log.len(), s.assembled_columns);
    let kept: Vec<&str> = log.iter().filter(|r| &r[2] == "kept").map(|r| r.get(0).unwrap()).collect();
    assert_eq!(kept, s.selected);
    let dropped = log.iter().filter(|r| &r[2] != "kept").count();
    assert_eq!(dropped, s.assembled_columns - s.selected.len());
    assert!(log.iter().all(|r| !r[3].is_empty()));
}

#[test]
fn state_model_with_impossible_screen_is_degenerate() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = through_stance(dir.path(), 7, "[state_model]\nmin_abs_r = 1.0\n");
    let err = state_model::cmd_state_model(&cfg).unwrap_err();
    assert_eq!(exit_code(&err), 3);
    let out = engage(dir.path(), &["state-model"]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn predict_reports_every_classifier_and_content_leads() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = through_stance(dir.path(), 8, "");
    let s = predict::cmd_predict(&cfg).unwrap();
    let names: Vec<&str> = s.classifiers.iter().map(|c| c.0.as_str()).collect();
    assert_eq!(names, ["linear_svm", "logreg", "random_forest"]);
    assert!(s.classifiers.iter().all(|c| (0.0..=1.0).contains(&c.1)));
    let best = s.best_single_group.unwrap();
    assert!(best.starts_with('C'), "best single group {best}");
    let coef = csv_rows(&cfg.command_dir("predict").join("coefficients.csv"));
    assert!(!coef.is_empty());
}

#[test]
fn predict_with_too_few_users_for_the_folds_is_degenerate() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = through_stance(dir.path(), 8, "[predict]\nk = 5000\n");
    let err = predict::cmd_predict(&cfg).unwrap_err();
    assert_eq!(exit_code(&err), 3);
}

/// Two users that pass every filter and post `texts`, plus a heavy poster
/// that takes the top-volume exclusion. `sides.csv` is written by hand so
/// top-terms runs without the partitioning step.
fn two_user_store(dir: &Path, rights: &[&str], control: &[&str], extra: &str) -> RunConfig {
    let mut posts = String::new();
    let heavy = ["filler"; 20];
    for (user, texts) in [("r1", rights), ("c1", control), ("v1", &heavy[..])] {
        for (i, t) in texts.iter().enumerate() {
            posts.push_str(&format!(
                "{{\"id\":\"{user}-{i}\",\"user_id\":\"{user}\",\"ts\":1523000000,\"text\":\"{t}\",\"lang\":\"en\"}}\n"
            ));
        }
    }
    let profile = |u: &str| {
        format!("{{\"user_id\":\"{u}\",\"followers\":50,\"friends\":50,\"created_ts\":1400000000,\"location\":\"NY\"}}\n")
    };
    std::fs::write(dir.join("posts.jsonl"), posts).unwrap();
    std::fs::write(dir.join("profiles.jsonl"), profile("r1") + &profile("c1") + &profile("v1")).unwrap();
    std::fs::write(dir.join("gaz.csv"), "kind,state,key\nname,NY,ny\n").unwrap();
    let text = format!(
        "seed = 1\noutdir = \"out\"\n[inputs]\nposts = \"posts.jsonl\"\nprofiles = \"profiles.jsonl\"\n\
         gazetteer = \"gaz.csv\"\n{extra}"
    );
    std::fs::write(dir.join("run.toml"), text).unwrap();
    let cfg = RunConfig::load(&dir.join("run.toml"), None).unwrap();
    let s = ingest::cmd_ingest(&cfg).unwrap();
    assert_eq!(s.report.kept, 2);
    let stance = cfg.command_dir("stance");
    std::fs::create_dir_all(&stance).unwrap();
    std::fs::write(
        stance.join("sides.csv"),
        "user_id,side,source,polarity,p_rights\nc1,control,partition,0,\nr1,rights,partition,1,\n",
    )
    .unwrap();
    cfg
}

#[test]
fn identical_corpora_have_no_top_terms() {
    let dir = tempfile::tempdir().unwrap();
    let texts = ["freedom rally today", "freedom safety vote", "safety safety rally"];
    let cfg = two_user_store(dir.path(), &texts, &texts, "[top_terms]\nmin_count = 1\n");
    let s = top_terms::cmd_top_terms(&cfg).unwrap();
    assert!(s.top_rights.is_empty() && s.top_control.is_empty());
    let all = csv_rows(&cfg.command_dir("top-terms").join("log_odds.csv"));
    assert!(all.iter().all(|r| r[3].parse::<f64>().unwrap() == 0.0));
}

#[test]
fn top_terms_honor_the_count_floor() {
    let rights = ["freedom freedom freedom freedom", "freedom freedom freedom freedom", "freedom freedom freedom zebra"];
    let control = ["safety safety safety safety", "safety safety safety safety", "safety safety safety safety"];

    let dir = tempfile::tempdir().unwrap();
    let cfg = two_user_store(dir.path(), &rights, &control, "[top_terms]\nmin_count = 10\nmin_z = 0.0\n");
    let s = top_terms::cmd_top_terms(&cfg).unwrap();
    assert_eq!(s.top_rights, ["freedom"]);
    assert_eq!(s.top_control, ["safety"]);

    let dir = tempfile::tempdir().unwrap();
    let cfg = two_user_store(dir.path(), &rights, &control, "[top_terms]\nmin_count = 1\nmin_z = 0.0\n");
    let s = top_terms::cmd_top_terms(&cfg).unwrap();
    assert!(s.top_rights.contains(&"zebra".to_string()));
}

#[test]
fn top_terms_before_stance_is_an_input_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), 9, "");
    synth::cmd_synth(&cfg).unwrap();
    ingest::cmd_ingest(&cfg).unwrap();
    let out = engage(dir.path(), &["top-terms"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn same_seed_reruns_are_byte_identical() {
    let run = || {
        let dir = tempfile::tempdir().unwrap();
        let cfg = through_stance(dir.path(), 10, "");
        state_model::cmd_state_model(&cfg).unwrap();
        predict::cmd_predict(&cfg).unwrap();
        top_terms::cmd_top_terms(&cfg).unwrap();
        let mut files = Vec::new();
        for cmd in ["synth", "ingest", "stance", "state-model", "predict", "top-terms"] {
            let d = cfg.command_dir(cmd);
            let mut names: Vec<_> = std::fs::read_dir(&d).unwrap().map(|e| e.unwrap().path()).collect();
            names.sort();
            for p in names {
                files.push((p.strip_prefix(dir.path()).unwrap().to_path_buf(), std::fs::read(&p).unwrap()));
            }
        }
        files
    };
    let (a, b) = (run(), run());
    assert_eq!(a.len(), b.len());
    for ((pa, da), (pb, db)) in a.iter().zip(&b) {
        assert_eq!(pa, pb);
        assert!(da == db, "{} differs", pa.display());
    }
}

#[test]
fn bad_cli_usage_exits_with_input_code() {
    let out = Command::new(env!("CARGO_BIN_EXE_engage")).arg("no-such-command").output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let dir = tempfile::tempdir().unwrap();
    let out = engage(dir.path(), &["ingest"]);
    assert_eq!(out.status.code(), Some(2));
}
