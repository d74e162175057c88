//! Run artifacts on disk. Every run gets `results/<run-id>/` holding the
//! epoch telemetry as JSON lines, a summary JSON, the selected checkpoint,
//! and the noise record when noise was injected. All files are derived
//! purely from the run result, so identical runs write identical bytes.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::experiment::grid::{render_table, GridPointResult};
use crate::experiment::{ExperimentResult, TrainConfig};
use crate::model::save_checkpoint;

pub const EPOCHS_FILE: &str = "epochs.jsonl";
pub const SUMMARY_FILE: &str = "summary.json";
pub const CHECKPOINT_FILE: &str = "checkpoint.bin";
pub const NOISE_RECORD_FILE: &str = "noise_record.json";
pub const GRID_TABLE_FILE: &str = "grid_table.txt";
pub const GRID_SUMMARY_FILE: &str = "grid.json";

/// Stable run identifier: FNV-1a over the canonical config JSON. Identical
/// configs map to identical ids, so reruns land in the same directory.
pub fn run_id(config: &TrainConfig) -> String {
    let bytes = serde_json::to_vec(config).expect("TrainConfig always serializes");
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    format!("{hash:016x}")
}

/// Writes all artifacts of one run under `root/<run-id>/` and fills in the
/// result's file references. Returns the run directory.
pub fn save_run(result: &mut ExperimentResult, root: &Path) -> Result<PathBuf> {
    let best_state = result
        .best_state
        .as_ref()
        .ok_or_else(|| Error::InvalidInput("result carries no model state to persist".to_string()))?;
    let dir = root.join(&result.run_id);
    fs::create_dir_all(&dir)?;

    let mut epochs = String::new();
    for record in &result.epochs {
        epochs.push_str(&serde_json::to_string(record)?);
        epochs.push('\n');
    }
    fs::write(dir.join(EPOCHS_FILE), epochs)?;

    save_checkpoint(
        best_state,
        &result.config.model,
        result.config.seed,
        result.selected_epoch,
        &dir.join(CHECKPOINT_FILE),
    )?;
    result.checkpoint_file = Some(CHECKPOINT_FILE.to_string());

    result.noise_record_file = match &result.noise_record {
        Some(record) => {
            let mut json = serde_json::to_string_pretty(record)?;
            json.push('\n');
            fs::write(dir.join(NOISE_RECORD_FILE), json)?;
            Some(NOISE_RECORD_FILE.to_string())
        }
        None => None,
    };

    let mut summary = serde_json::to_string_pretty(&result)?;
    summary.push('\n');
    fs::write(dir.join(SUMMARY_FILE), summary)?;
    Ok(dir)
}

#[derive(Serialize)]
struct GridRow<'a> {
    rank: usize,
    index: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    run_id: Option<&'a str>,
    #[serde(skip_serializing_if = "Option::is_none")]
    config: Option<&'a TrainConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    val_auroc: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    test_auroc: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    test_ci: Option<[f64; 2]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    final_test_auroc: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<&'a str>,
}

/// Persists a ranked sweep under `root`: each successful run's artifacts in
/// its own run directory, plus the ranked table (text) and a machine-readable
/// summary of every point. Returns `root`.
pub fn save_grid(results: &mut [GridPointResult], root: &Path) -> Result<PathBuf> {
    fs::create_dir_all(root)?;
    for point in results.iter_mut() {
        if let Some(result) = point.result.as_mut() {
            save_run(result, root)?;
        }
    }
    fs::write(root.join(GRID_TABLE_FILE), render_table(results))?;

    let rows: Vec<GridRow> = results
        .iter()
        .enumerate()
        .map(|(pos, point)| GridRow {
            rank: pos + 1,
            index: point.index,
            run_id: point.result.as_ref().map(|r| r.run_id.as_str()),
            config: point.config.as_ref(),
            val_auroc: point.result.as_ref().map(|r| r.selected_val_auroc),
            test_auroc: point.result.as_ref().map(|r| r.test_metrics.auroc),
            test_ci: point
                .result
                .as_ref()
                .map(|r| [r.test_metrics.auroc_ci_low, r.test_metrics.auroc_ci_high]),
            final_test_auroc: point.result.as_ref().map(|r| r.final_test_auroc),
            error: point.error.as_deref(),
        })
        .collect();
    let mut json = serde_json::to_string_pretty(&rows)?;
    json.push('\n');
    fs::write(root.join(GRID_SUMMARY_FILE), json)?;
    Ok(root.to_path_buf())
}
