//! Per-run evaluation traces and their CSV form.
//!
//! CSV schema (exact column order):
//! `seed,eval_index,y,best_y,selected_mask,recall,elapsed_ms,event`
//!
//! Trace files are required to be byte-identical across reruns of the same
//! configuration, so the `elapsed_ms` column is left empty; measured
//! per-iteration wall times live in the in-memory trace and the run summary.

use std::fmt;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::vs_core::VariableIndexSet;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EventTag {
    TreeReinit,
    Split,
    NoSplit,
}

impl fmt::Display for EventTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            EventTag::TreeReinit => "tree_reinit",
            EventTag::Split => "split",
            EventTag::NoSplit => "no_split",
        };
        f.write_str(s)
    }
}

/// One evaluation of the objective.
#[derive(Debug, Clone)]
pub struct TraceRecord {
    pub eval_index: usize,
    pub x: Vec<f64>,
    pub y: f64,
    pub best_y: f64,
    pub selected: VariableIndexSet,
    pub recall: f64,
    /// Algorithm time attributed to this evaluation, objective calls
    /// excluded. Not serialized.
    pub elapsed_ms: f64,
    pub events: Vec<EventTag>,
}

/// Full record of one seeded run.
#[derive(Debug, Clone)]
pub struct RunTrace {
    pub seed: u64,
    pub dimension: usize,
    pub records: Vec<TraceRecord>,
    /// Recall of the per-iteration selection (the leaf set for tree search,
    /// the sampled subset for dropout, the full set for global methods).
    pub leaf_recalls: Vec<f64>,
    pub reinit_count: usize,
}

impl RunTrace {
    pub fn final_best(&self) -> Option<f64> {
        self.records.last().map(|r| r.best_y)
    }

    pub fn mean_recall(&self) -> f64 {
        if self.records.is_empty() {
            return 0.0;
        }
        self.records.iter().map(|r| r.recall).sum::<f64>() / self.records.len() as f64
    }

    pub fn mean_leaf_recall(&self) -> f64 {
        if self.leaf_recalls.is_empty() {
            return 0.0;
        }
        self.leaf_recalls.iter().sum::<f64>() / self.leaf_recalls.len() as f64
    }

    /// Mean per-evaluation algorithm time (ms) over records with
    /// eval_index in `[lo, hi]`.
    pub fn mean_elapsed_ms(&self, lo: usize, hi: usize) -> f64 {
        let window: Vec<f64> = self
            .records
            .iter()
            .filter(|r| r.eval_index >= lo && r.eval_index <= hi)
            .map(|r| r.elapsed_ms)
            .collect();
        if window.is_empty() {
            return 0.0;
        }
        window.iter().sum::<f64>() / window.len() as f64
    }

    pub fn to_csv_string(&self) -> String {
        let mut out = String::from("seed,eval_index,y,best_y,selected_mask,recall,elapsed_ms,event\n");
        for r in &self.records {
            let mask = r.selected.mask_string(self.dimension);
            let events = r
                .events
                .iter()
                .map(|e| e.to_string())
                .collect::<Vec<_>>()
                .join(";");
            out.push_str(&format!(
                "{},{},{},{},{},{},,{}\n",
                self.seed, r.eval_index, r.y, r.best_y, mask, r.recall, events
            ));
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut file =
            std::fs::File::create(path).map_err(|e| Error::io(path.to_path_buf(), e))?;
        file.write_all(self.to_csv_string().as_bytes())
            .map_err(|e| Error::io(path.to_path_buf(), e))
    }
}

/// Rows of a trace CSV as read back from disk (numeric columns only).
#[derive(Debug, Clone)]
pub struct CsvRow {
    pub seed: u64,
    pub eval_index: usize,
    pub y: f64,
    pub best_y: f64,
    pub recall: f64,
    pub event: String,
}

pub fn read_csv(path: &Path) -> Result<Vec<CsvRow>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path.to_path_buf(), e))?;
    let mut rows = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        if lineno == 0 || line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 8 {
            return Err(Error::Data(format!(
                "{}: line {} has {} fields, expected 8",
                path.display(),
                lineno + 1,
                fields.len()
            )));
        }
        let parse_err = |what: &str| {
            Error::Data(format!("{}: line {} bad {what}", path.display(), lineno + 1))
        };
        rows.push(CsvRow {
            seed: fields[0].parse().map_err(|_| parse_err("seed"))?,
            eval_index: fields[1].parse().map_err(|_| parse_err("eval_index"))?,
            y: fields[2].parse().map_err(|_| parse_err("y"))?,
            best_y: fields[3].parse().map_err(|_| parse_err("best_y"))?,
            recall: fields[5].parse().map_err(|_| parse_err("recall"))?,
            event: fields[7].to_string(),
        });
    }
    Ok(rows)
}

/// Incrementally builds a [`RunTrace`]: tracks the running best, assigns
/// evaluation indices, and attaches pending event tags to the next record.
#[derive(Debug)]
pub struct TraceBuilder {
    trace: RunTrace,
    best: f64,
    pending: Vec<EventTag>,
    next_index: usize,
}

impl TraceBuilder {
    pub fn new(seed: u64, dimension: usize) -> Self {
        TraceBuilder {
            trace: RunTrace {
                seed,
                dimension,
                records: Vec::new(),
                leaf_recalls: Vec::new(),
                reinit_count: 0,
            },
            best: f64::NEG_INFINITY,
            pending: Vec::new(),
            next_index: 1,
        }
    }

    pub fn push_event(&mut self, event: EventTag) {
        if event == EventTag::TreeReinit {
            self.trace.reinit_count += 1;
        }
        self.pending.push(event);
    }

    pub fn push_leaf_recall(&mut self, recall: f64) {
        self.trace.leaf_recalls.push(recall);
    }

    pub fn record(
        &mut self,
        x: Vec<f64>,
        y: f64,
        selected: &VariableIndexSet,
        recall: f64,
        elapsed_ms: f64,
    ) {
        self.best = self.best.max(y);
        self.trace.records.push(TraceRecord {
            eval_index: self.next_index,
            x,
            y,
            best_y: self.best,
            selected: selected.clone(),
            recall,
            elapsed_ms,
            events: std::mem::take(&mut self.pending),
        });
        self.next_index += 1;
    }

    pub fn evaluations(&self) -> usize {
        self.next_index - 1
    }

    pub fn best(&self) -> f64 {
        self.best
    }

    pub fn finish(mut self) -> RunTrace {
        if !self.pending.is_empty() {
            if let Some(last) = self.trace.records.last_mut() {
                last.events.append(&mut self.pending);
            }
        }
        self.trace
    }
}
