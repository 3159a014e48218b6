//! Input files and process helpers shared by the CLI tests.
#![allow(dead_code)]

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use catkit::{matfile, synth};

pub fn core_fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/fixtures").join(name)
}

pub fn catkit(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_catkit")).args(args).output().expect("spawn catkit")
}

pub fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// Object vocabulary of 6 concepts, attribute vocabulary of 4, and three
/// teacher predictions over them.
pub fn write_pseudolabel_inputs(dir: &Path) -> (PathBuf, PathBuf, PathBuf) {
    let obj = dir.join("obj.tsv");
    let attr = dir.join("attr.tsv");
    let preds = dir.join("preds.jsonl");
    fs::write(&obj, "0\tdog\t900\n1\tcat\t700\n2\tcar\t400\n3\tcouch\t300\n4\tkite\t260\n5\tboat\t250\n").unwrap();
    fs::write(&attr, "0\tred\t500\n1\tsmall\t400\n2\twooden\t300\n3\tshiny\t255\n").unwrap();
    fs::write(
        &preds,
        concat!(
            "{\"id\":\"a\",\"obj\":[0.5,0.2,0.1,0.1,0.05,0.05],\"attr\":[0.7,0.1,0.1,0.1]}\n",
            "{\"id\":\"b\",\"obj\":[0.0,0.0,0.9,0.05,0.05,0.0],\"attr\":[0.25,0.25,0.25,0.25]}\n",
            "{\"id\":\"c\",\"obj\":[0.1,0.3,0.2,0.15,0.15,0.1],\"attr\":[0.0,0.6,0.4,0.0]}\n",
        ),
    )
    .unwrap();
    (obj, attr, preds)
}

/// Unit prompts for `classes` classes and unit features clustered around
/// them: `(features, labels, prompts)` paths.
pub fn write_probe_inputs(dir: &Path, classes: usize, d: usize, per_class: usize, seed: u64) -> (PathBuf, PathBuf, PathBuf) {
    let mut r = synth::rng(seed);
    let prompts = synth::random_unit_matrix::<f64>(&mut r, classes, d);
    let noise = synth::gaussian_matrix::<f64>(&mut r, classes * per_class, d);
    let mut x = catkit::Matrix::zeros(classes * per_class, d);
    let mut labels = Vec::new();
    for i in 0..classes * per_class {
        let c = i / per_class;
        for j in 0..d {
            x[(i, j)] = prompts[(c, j)] + 0.5 * noise[(i, j)];
        }
        labels.push(c);
    }
    x.normalize_rows();
    let paths = (dir.join("features.txt"), dir.join("labels.txt"), dir.join("prompts.txt"));
    fs::write(&paths.0, matfile::write_matrix(&x)).unwrap();
    fs::write(&paths.1, matfile::write_labels(&labels)).unwrap();
    fs::write(&paths.2, matfile::write_matrix(&prompts)).unwrap();
    paths
}

/// Every file under `dir` with its bytes, sorted by name.
pub fn snapshot(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<(String, Vec<u8>)> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.is_file())
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
        .collect();
    files.sort();
    files
}
