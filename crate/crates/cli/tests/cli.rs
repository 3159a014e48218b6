mod common;

use std::fs;
use std::path::Path;

use catkit::concept::PseudoLabelRecord;
use common::{catkit, core_fixture, stderr};

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Lines of an artifact after its header.
fn body(path: &Path) -> Vec<String> {
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("# catkit 0.1.0 "), "{}", path.display());
    lines.map(str::to_owned).collect()
}

fn header(path: &Path) -> String {
    fs::read_to_string(path).unwrap().lines().next().unwrap().to_owned()
}

#[test]
fn filter_keeps_the_cat_set_and_reports_stats() {
    let tmp = tempfile::tempdir().unwrap();
    let corpus = core_fixture("corpus20.jsonl");
    let o = catkit(&["--out", s(tmp.path()), "filter", "--input", s(&corpus)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let kept: Vec<String> = body(&tmp.path().join("filtered.jsonl"))
        .iter()
        .map(|l| catkit::catfilter::CaptionRecord::from_json_line(l).unwrap().id)
        .collect();
    assert_eq!(kept, ["r01", "r06", "r07", "r11", "r13", "r15", "r18"]);
    let stats = body(&tmp.path().join("filter_stats.tsv"));
    assert_eq!(stats.last().unwrap(), "total\t20\t7\t13\t35.00");
}

#[test]
fn empty_filter_list_copies_the_input() {
    let tmp = tempfile::tempdir().unwrap();
    let corpus = core_fixture("corpus20.jsonl");
    let out = tmp.path().join("copy.jsonl");
    let o = catkit(&["--out", s(tmp.path()), "filter", "--input", s(&corpus), "--filters=", "--output", s(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let input: Vec<String> = fs::read_to_string(&corpus).unwrap().lines().map(str::to_owned).collect();
    assert_eq!(body(&out), input);
}

#[test]
fn bad_filter_arguments_fail() {
    let tmp = tempfile::tempdir().unwrap();
    let corpus = core_fixture("corpus20.jsonl");
    let out = tmp.path().join("out");
    for extra in [&["--filters", "c,x"][..], &["--spot-conf", "1.5"], &["--min-score", "-0.1"]] {
        let mut args = vec!["--out", s(&out), "filter", "--input", s(&corpus)];
        args.extend_from_slice(extra);
        let o = catkit(&args);
        assert_eq!(o.status.code(), Some(1), "{extra:?}");
        assert!(stderr(&o).starts_with("error: "));
    }
    assert!(!out.exists(), "validation happens before any output");
    let o = catkit(&["--out", s(&out), "filter", "--input", s(&tmp.path().join("missing.jsonl"))]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn pseudolabels_are_sparse_and_normalized() {
    let tmp = tempfile::tempdir().unwrap();
    let (obj, attr, preds) = common::write_pseudolabel_inputs(tmp.path());
    let o = catkit(&[
        "--out", s(tmp.path()), "pseudolabel", "--predictions", s(&preds), "--obj-vocab", s(&obj), "--attr-vocab",
        s(&attr), "--k", "2",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let recs: Vec<PseudoLabelRecord> = body(&tmp.path().join("pseudolabels.jsonl"))
        .iter()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert_eq!(recs.len(), 3);
    // a: objects 0.5 and 0.2 kept, renormalized by 0.7
    assert_eq!(recs[0].obj.entries()[0].0, 0);
    assert!((recs[0].obj.entries()[0].1 - 0.5 / 0.7).abs() < 1e-12);
    assert!((recs[0].obj.entries()[1].1 - 0.2 / 0.7).abs() < 1e-12);
    for r in &recs {
        assert!(r.obj.len() <= 2 && r.attr.len() <= 2);
        assert!((r.obj.sum() - 1.0).abs() < 1e-12 && (r.attr.sum() - 1.0).abs() < 1e-12);
    }
}

#[test]
fn pseudolabel_input_errors() {
    let tmp = tempfile::tempdir().unwrap();
    let (obj, attr, preds) = common::write_pseudolabel_inputs(tmp.path());
    let missing = tmp.path().join("nope.tsv");
    let base = |o: &Path, a: &Path, k: &str| {
        catkit(&[
            "--out", s(&tmp.path().join("out")), "pseudolabel", "--predictions", s(&preds), "--obj-vocab", s(o),
            "--attr-vocab", s(a), "--k", k,
        ])
    };
    let o = base(&missing, &attr, "2");
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("nope.tsv"));
    assert_eq!(base(&obj, &attr, "0").status.code(), Some(1));
    // attribute vocabulary used for objects: dimension mismatch
    let o = base(&attr, &attr, "2");
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("preds.jsonl:1"), "{}", stderr(&o));
}

#[test]
fn gradcheck_passes_and_catches_a_sign_error() {
    let tmp = tempfile::tempdir().unwrap();
    let o = catkit(&["--out", s(tmp.path()), "gradcheck"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let rows = body(&tmp.path().join("gradcheck.tsv"));
    assert_eq!(rows[0], "mode\talpha\tbeta\tblock\tmax_rel_err\tresult");
    // two modes, 9 cells of 3 blocks plus one cross-entropy row each
    assert_eq!(rows.len() - 1, 2 * 28);
    assert!(rows[1..].iter().all(|r| r.ends_with("PASS")));

    let o = catkit(&["--out", s(tmp.path()), "gradcheck", "--mode", "detached", "--inject-sign-flip"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("T"), "{}", stderr(&o));
}

#[test]
fn gradcheck_validates_before_running() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    for extra in [&["--tau", "0.001"][..], &["--mode", "sideways"], &["--n", "1"]] {
        let mut args = vec!["--out", s(&out), "gradcheck"];
        args.extend_from_slice(extra);
        assert_ne!(catkit(&args).status.code(), Some(0), "{extra:?}");
    }
    assert!(!out.exists());
}

#[test]
fn train_toy_rejects_invalid_hyperparameters() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    for extra in [&["--alpha", "1.5"][..], &["--alpha", "0"], &["--beta", "-1"], &["--tau-init", "0.005"], &["--top-k", "0"]] {
        let mut args = vec!["--out", s(&out), "train-toy"];
        args.extend_from_slice(extra);
        let o = catkit(&args);
        assert_eq!(o.status.code(), Some(1), "{extra:?}: {}", stderr(&o));
    }
    assert!(!out.exists());
}

#[test]
fn config_file_with_flag_override() {
    let tmp = tempfile::tempdir().unwrap();
    let corpus = core_fixture("corpus20.jsonl");
    let cfg = tmp.path().join("catkit.toml");
    fs::write(&cfg, format!("seed = 3\n[filter]\ninput = {:?}\nfilters = \"c\"\n", s(&corpus))).unwrap();

    let from_file = tmp.path().join("a");
    let o = catkit(&["--config", s(&cfg), "--out", s(&from_file), "filter"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(body(&from_file.join("filtered.jsonl")).len(), 17);

    let overridden = tmp.path().join("b");
    let o = catkit(&["--config", s(&cfg), "--out", s(&overridden), "filter", "--filters", "c,a"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(body(&overridden.join("filtered.jsonl")).len(), 10);
    assert_ne!(header(&from_file.join("filtered.jsonl")), header(&overridden.join("filtered.jsonl")));

    // same effective settings given on the command line hash identically
    let flags = tmp.path().join("c");
    let o = catkit(&["--seed", "3", "--out", s(&flags), "filter", "--input", s(&corpus), "--filters", "c"]);
    assert!(o.status.success());
    assert_eq!(header(&from_file.join("filtered.jsonl")), header(&flags.join("filtered.jsonl")));

    fs::write(&cfg, "[filter]\nfliters = \"c\"\n").unwrap();
    let o = catkit(&["--config", s(&cfg), "filter", "--input", s(&corpus)]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn probe_writes_trajectory_weights_and_table() {
    let tmp = tempfile::tempdir().unwrap();
    let (feat, labels, prompts) = common::write_probe_inputs(tmp.path(), 3, 5, 10, 1);
    let o = catkit(&[
        "--out", s(tmp.path()), "probe", "--features", s(&feat), "--labels", s(&labels), "--prompts", s(&prompts),
        "--delta", "0.5", "--delta-b", "0.2", "--iters", "50", "--delta-grid", "0,0.5,2", "--k-shot", "4",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let traj = body(&tmp.path().join("probe_trajectory.tsv"));
    assert_eq!(traj.len(), 1 + 51);
    let table = body(&tmp.path().join("probe_table.tsv"));
    assert_eq!(table[0], "shots\tdelta\tdelta_b\tfinal_loss\ttrain_acc\teval_acc");
    assert_eq!(table.len(), 1 + 3);
    let losses: Vec<f64> = table[1..].iter().map(|r| r.split('\t').nth(3).unwrap().parse().unwrap()).collect();
    assert!(losses.windows(2).all(|w| w[1] <= w[0] + 1e-12), "{losses:?}");
    assert!(tmp.path().join("probe_w.txt").is_file() && tmp.path().join("probe_b.txt").is_file());
}

#[test]
fn probe_zero_radius_keeps_the_prompt_weights() {
    let tmp = tempfile::tempdir().unwrap();
    let (feat, labels, prompts) = common::write_probe_inputs(tmp.path(), 3, 5, 4, 2);
    let o = catkit(&[
        "--out", s(tmp.path()), "probe", "--features", s(&feat), "--labels", s(&labels), "--prompts", s(&prompts),
        "--delta", "0", "--delta-b", "0",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let w = catkit::matfile::read_matrix::<f64>(std::io::Cursor::new(fs::read(tmp.path().join("probe_w.txt")).unwrap())).unwrap();
    assert!(w.as_slice().iter().all(|&v| v == 0.0));
}

#[test]
fn probe_rejects_bad_inputs() {
    let tmp = tempfile::tempdir().unwrap();
    let (feat, labels, prompts) = common::write_probe_inputs(tmp.path(), 3, 5, 4, 2);
    let run = |extra: &[&str]| {
        let mut args = vec!["--out", s(tmp.path()), "probe", "--features", s(&feat), "--labels", s(&labels), "--prompts", s(&prompts)];
        args.extend_from_slice(extra);
        catkit(&args)
    };
    assert_eq!(run(&["--delta", "-1", "--delta-b", "0"]).status.code(), Some(1));
    assert_eq!(run(&["--delta", "1"]).status.code(), Some(1), "delta_b is required");
    // prompts that are not unit rows
    fs::write(&prompts, "3 5\n1 1 0 0 0\n0 1 0 0 0\n0 0 1 0 0\n").unwrap();
    assert_eq!(run(&["--delta", "1", "--delta-b", "0"]).status.code(), Some(1));
}

#[test]
fn different_seeds_change_seeded_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let run = |seed: &str| {
        let out = tmp.path().join(seed);
        let o = catkit(&["--seed", seed, "--out", s(&out), "train-toy", "--steps", "5"]);
        assert!(o.status.success());
        fs::read_to_string(out.join("toy_curves.tsv")).unwrap()
    };
    assert_ne!(run("1"), run("2"));
}
