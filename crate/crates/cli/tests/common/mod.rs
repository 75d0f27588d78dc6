#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

pub fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
}

pub fn geosel(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_geosel"))
        .args(args)
        .env_remove("GEOSEL_LOG")
        .output()
        .expect("geosel binary runs")
}

pub fn p(path: &Path) -> &str {
    path.to_str().expect("utf-8 temp path")
}

/// Runs the full pipeline into `dir` and returns every output file it
/// wrote, relative path and contents, in a fixed order.
pub fn run_pipeline(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let grid = dir.join("grid.csv");
    let steps: Vec<Vec<String>> = vec![
        vec![
            "partition",
            "--input",
            p(&fixture("coords.csv")),
            "--output",
            p(&grid),
            "--min-count",
            "5",
            "--max-count",
            "40",
        ],
        vec![
            "synth",
            "--grid",
            p(&grid),
            "--output",
            p(&dir.join("val")),
            "--n-localizable",
            "150",
            "--n-nonlocalizable",
            "150",
            "--seed",
            "1",
        ],
        vec![
            "synth",
            "--grid",
            p(&grid),
            "--output",
            p(&dir.join("test")),
            "--n-localizable",
            "150",
            "--n-nonlocalizable",
            "150",
            "--seed",
            "2",
        ],
        vec![
            "score",
            "--grid",
            p(&grid),
            "--input",
            p(&dir.join("test/predictions.tsv")),
            "--output",
            p(&dir.join("scores.csv")),
            "--method",
            "se",
            "--method",
            "pd",
            "--method",
            "sr",
            "--method",
            "mc",
            "--method",
            "random",
            "--method",
            "ideal",
        ],
        vec![
            "calibrate",
            "--grid",
            p(&grid),
            "--input",
            p(&dir.join("val/predictions.tsv")),
            "--method",
            "pd",
            "--scale-km",
            "25",
            "--output",
            p(&dir.join("calibration.json")),
        ],
        vec![
            "evaluate",
            "--grid",
            p(&grid),
            "--input",
            p(&dir.join("test/predictions.tsv")),
            "--calibration",
            p(&dir.join("calibration.json")),
            "--output",
            p(&dir.join("eval")),
        ],
        vec![
            "split",
            "--grid",
            p(&grid),
            "--input",
            p(&dir.join("test/predictions.tsv")),
            "--calibration",
            p(&dir.join("calibration.json")),
            "--output",
            p(&dir.join("split")),
        ],
    ]
    .into_iter()
    .map(|s| s.into_iter().map(String::from).collect())
    .collect();
    for step in &steps {
        let args: Vec<&str> = step.iter().map(String::as_str).collect();
        let out = geosel(&args);
        assert!(
            out.status.success(),
            "{:?} failed: {}",
            args,
            String::from_utf8_lossy(&out.stderr)
        );
    }
    [
        "grid.csv",
        "val/predictions.tsv",
        "val/labels.csv",
        "test/predictions.tsv",
        "test/labels.csv",
        "scores.csv",
        "calibration.json",
        "eval/rc.csv",
        "eval/report.json",
        "split/localizable.tsv",
        "split/non_localizable.tsv",
    ]
    .iter()
    .map(|f| {
        (
            f.to_string(),
            std::fs::read(dir.join(f)).expect("pipeline output exists"),
        )
    })
    .collect()
}

/// Exit code and error-class token of a failed run.
pub fn failure(out: &Output) -> (i32, String) {
    let stderr = String::from_utf8_lossy(&out.stderr);
    let token = stderr
        .split_once("error[")
        .and_then(|(_, rest)| rest.split_once(']'))
        .map(|(t, _)| t.to_string())
        .unwrap_or_default();
    (out.status.code().unwrap_or(-1), token)
}

/// One fixture-driven invocation per documented error class, paired with
/// the expected exit code and token.
pub fn error_cases(dir: &Path) -> Vec<(&'static str, Vec<String>, i32, &'static str)> {
    let grid = dir.join("grid.csv");
    let small_grid = dir.join("small_grid.csv");
    let s = |v: &[&str]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>();
    let ok = geosel(&[
        "partition",
        "--input",
        p(&fixture("coords.csv")),
        "--output",
        p(&grid),
        "--min-count",
        "5",
        "--max-count",
        "40",
    ]);
    assert!(ok.status.success());
    let ok = geosel(&[
        "partition",
        "--input",
        p(&fixture("four_points.csv")),
        "--output",
        p(&small_grid),
        "--min-count",
        "1",
        "--max-count",
        "1",
    ]);
    assert!(ok.status.success());
    let no_mc = dir.join("no_mc");
    let ok = geosel(&[
        "synth",
        "--grid",
        p(&grid),
        "--output",
        p(&no_mc),
        "--n-localizable",
        "3",
        "--n-nonlocalizable",
        "3",
        "--mc-passes",
        "0",
    ]);
    assert!(ok.status.success());
    let preds = no_mc.join("predictions.tsv");
    let out = p(&dir.join("out")).to_string();
    vec![
        (
            "usage: unknown method",
            s(&[
                "score",
                "--grid",
                p(&grid),
                "--input",
                p(&preds),
                "--output",
                &out,
                "--method",
                "nope",
            ]),
            2,
            "usage",
        ),
        (
            "usage: random has no threshold",
            s(&[
                "calibrate",
                "--grid",
                p(&grid),
                "--input",
                p(&preds),
                "--method",
                "random",
                "--scale-km",
                "25",
                "--output",
                &out,
            ]),
            2,
            "usage",
        ),
        (
            "usage: missing theta",
            s(&[
                "evaluate",
                "--grid",
                p(&grid),
                "--input",
                p(&preds),
                "--method",
                "pd",
                "--scale-km",
                "25",
                "--output",
                &out,
            ]),
            2,
            "usage",
        ),
        (
            "input-format: malformed coordinates",
            s(&[
                "partition",
                "--input",
                p(&fixture("bad_coords.csv")),
                "--output",
                &out,
            ]),
            3,
            "input-format",
        ),
        (
            "input-format: malformed predictions",
            s(&[
                "score",
                "--grid",
                p(&grid),
                "--input",
                p(&fixture("bad_predictions.tsv")),
                "--output",
                &out,
                "--method",
                "pd",
            ]),
            3,
            "input-format",
        ),
        (
            "input-format: unreadable file",
            s(&[
                "score",
                "--grid",
                p(&grid),
                "--input",
                p(&fixture("missing.tsv")),
                "--output",
                &out,
                "--method",
                "pd",
            ]),
            3,
            "input-format",
        ),
        (
            "consistency: unknown cell",
            s(&[
                "score",
                "--grid",
                p(&grid),
                "--input",
                p(&fixture("unknown_cell.tsv")),
                "--output",
                &out,
                "--method",
                "pd",
            ]),
            4,
            "consistency",
        ),
        (
            "consistency: grid mismatch",
            s(&[
                "score",
                "--grid",
                p(&grid),
                "--input",
                p(&fixture("wrong_grid.tsv")),
                "--output",
                &out,
                "--method",
                "pd",
            ]),
            4,
            "consistency",
        ),
        (
            "consistency: missing mc passes",
            s(&[
                "score",
                "--grid",
                p(&grid),
                "--input",
                p(&preds),
                "--output",
                &out,
                "--method",
                "mc",
            ]),
            4,
            "consistency",
        ),
        (
            "consistency: grid too small for synth",
            s(&["synth", "--grid", p(&small_grid), "--output", &out]),
            4,
            "consistency",
        ),
        (
            "empty-result: empty coordinates",
            s(&[
                "partition",
                "--input",
                p(&fixture("empty.csv")),
                "--output",
                &out,
            ]),
            5,
            "empty-result",
        ),
        (
            "empty-result: zero retained cells",
            s(&[
                "partition",
                "--input",
                p(&fixture("four_points.csv")),
                "--output",
                &out,
                "--min-count",
                "50",
            ]),
            5,
            "empty-result",
        ),
        (
            "empty-result: empty validation set",
            s(&[
                "calibrate",
                "--grid",
                p(&grid),
                "--input",
                p(&fixture("no_records.tsv")),
                "--method",
                "pd",
                "--scale-km",
                "25",
                "--output",
                &out,
            ]),
            5,
            "empty-result",
        ),
    ]
}
