#![allow(dead_code)]

use std::path::{Path, PathBuf};

use tailrisk_engine::synth::{self, Preset};
use tailrisk_engine::StudyConfig;

pub const WINDOW: usize = 1264;

/// Writes a synthetic panel with `n_dates` forecast dates (plus history and
/// a complete final horizon) and returns its path and first forecast date.
pub fn panel(dir: &Path, preset: Preset, n_dates: usize, seed: u64) -> (PathBuf, chrono::NaiveDate) {
    let rows = 2 * WINDOW + 1 + n_dates + 9;
    let p = synth::generate(preset, rows, seed).unwrap();
    let path = dir.join("panel.csv");
    synth::write_csv(&p, &path).unwrap();
    (path, p.dates[2 * WINDOW + 1])
}

pub fn config(panel: &Path, start: chrono::NaiveDate, models: &[&str], out: &Path, seed: u64) -> StudyConfig {
    let models: Vec<String> = models.iter().map(|m| format!("\"{m}\"")).collect();
    let text = format!(
        r#"{{
            "panel": {{"path": {:?}, "target_column": "price"}},
            "out_of_sample": {{"start": "{start}"}},
            "models": [{}],
            "backtests": {{"mc_trials": 200}},
            "seed": {seed},
            "out_dir": {:?}
        }}"#,
        panel.display().to_string(),
        models.join(", "),
        out.display().to_string()
    );
    StudyConfig::from_json(&text).unwrap()
}
