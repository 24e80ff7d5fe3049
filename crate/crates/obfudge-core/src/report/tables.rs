//! Detection success rate grids: rows original + each combo, columns models
//! grouped by family, one block per dataset.

use super::{RunConfig, ScoreRow, ORIGINAL_ID};
use crate::detector::ModelFamily;
use crate::judge::{EvaluationMode, Score};
use crate::metrics;
use serde::Serialize;
use std::collections::BTreeMap;

#[derive(Debug, Serialize)]
pub struct TableSidecar {
    pub mode: String,
    pub models: Vec<String>,
    pub datasets: Vec<DatasetBlock>,
}

#[derive(Debug, Serialize)]
pub struct DatasetBlock {
    pub dataset: String,
    pub rows: Vec<TableRow>,
}

#[derive(Debug, Serialize)]
pub struct TableRow {
    pub combo: String,
    /// One cell per model column; None when the cell has no records.
    pub cells: Vec<Option<f64>>,
}

fn family_rank(f: ModelFamily) -> u8 {
    match f {
        ModelFamily::Qwen => 0,
        ModelFamily::Llama => 1,
        ModelFamily::Deepseek => 2,
        ModelFamily::Openai => 3,
        ModelFamily::Other => 4,
    }
}

pub fn success_table(scores: &[ScoreRow], config: &RunConfig, mode: EvaluationMode) -> (String, TableSidecar) {
    // columns: models grouped by family, stable within-family order
    let mut models: Vec<&crate::detector::ModelSpec> = config.models.iter().collect();
    models.sort_by_key(|m| (family_rank(m.family), m.name.clone()));
    let model_names: Vec<String> = models.iter().map(|m| m.name.clone()).collect();

    let mut datasets: Vec<String> = scores.iter().map(|s| s.dataset.clone()).collect();
    datasets.sort();
    datasets.dedup();

    let mut row_ids: Vec<String> = vec![ORIGINAL_ID.to_string()];
    row_ids.extend(config.combo_ids().iter().map(|s| s.to_string()));

    // (dataset, combo, model) -> scores
    let mut cells: BTreeMap<(String, String, String), Vec<Score>> = BTreeMap::new();
    for row in scores {
        cells
            .entry((row.dataset.clone(), row.combo_id.clone(), row.model.clone()))
            .or_default()
            .push(row.score);
    }

    let mut sidecar = TableSidecar {
        mode: mode.name().to_string(),
        models: model_names.clone(),
        datasets: Vec::new(),
    };
    let mut text = String::new();
    text.push_str(&format!("Detection success rate ({})\n", mode.name()));
    text.push_str(&format!(
        "positives: scores {}\n",
        match mode {
            EvaluationMode::TypeEval => "3,4",
            EvaluationMode::ExistenceEval => "2,3,4",
        }
    ));

    let combo_width = row_ids.iter().map(|r| r.len()).max().unwrap_or(8).max(8);
    let col_widths: Vec<usize> = model_names.iter().map(|n| n.len().max(6)).collect();
    for dataset in &datasets {
        text.push_str(&format!("\ndataset: {dataset}\n"));
        let mut header = format!("{:<combo_width$}", "combo");
        for (name, w) in model_names.iter().zip(&col_widths) {
            header.push_str(&format!(" | {name:>w$}"));
        }
        text.push_str(&header);
        text.push('\n');
        text.push_str(&"-".repeat(header.len()));
        text.push('\n');

        let mut block = DatasetBlock { dataset: dataset.clone(), rows: Vec::new() };
        for combo in &row_ids {
            let mut line = format!("{combo:<combo_width$}");
            let mut row = TableRow { combo: combo.clone(), cells: Vec::new() };
            for (model, w) in model_names.iter().zip(&col_widths) {
                let cell = cells.get(&(dataset.clone(), combo.clone(), model.clone()));
                match cell {
                    Some(scores) if !scores.is_empty() => {
                        let rate = metrics::detection_success_rate(scores, mode).expect("non-empty");
                        line.push_str(&format!(" | {rate:>w$.2}"));
                        row.cells.push(Some((rate * 100.0).round() / 100.0));
                    }
                    _ => {
                        line.push_str(&format!(" | {:>w$}", "-"));
                        row.cells.push(None);
                    }
                }
            }
            text.push_str(&line);
            text.push('\n');
            block.rows.push(row);
        }
        sidecar.datasets.push(block);
    }
    (text, sidecar)
}
