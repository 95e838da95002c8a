//! Bulk evaluation: run the pipeline over a dataset and aggregate
//! accuracy overall and per channel. Pipeline failures never abort a
//! run; the sample is counted as a default REFUTED prediction and
//! flagged.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;

use serde::Serialize;

use crate::batch;
use crate::table::Table;
use crate::verifier::{Label, VerifierParams};

use super::dataset::{Channel, PredictionRecord, Sample};
use super::pipeline::Pipeline;

#[derive(Debug, Clone, Copy)]
pub struct EvalOptions {
    pub parallel: bool,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions { parallel: true }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ChannelStats {
    pub correct: usize,
    pub total: usize,
}

impl ChannelStats {
    pub fn accuracy(&self) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            self.correct as f64 / self.total as f64
        }
    }
}

#[derive(Debug, Serialize)]
pub struct EvalReport {
    pub total: usize,
    pub correct: usize,
    pub accuracy: f64,
    pub per_channel: BTreeMap<Channel, ChannelStats>,
    /// confusion[gold][predicted], label order (ENTAILED, REFUTED).
    pub confusion: [[usize; 2]; 2],
    pub failures: usize,
    pub predictions: Vec<PredictionRecord>,
}

impl EvalReport {
    /// Aligned plain-text table, one row per channel column.
    pub fn text_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{:<12} {:>9} {:>9} {:>9}", "split", "accuracy", "correct", "total");
        let _ = writeln!(
            out,
            "{:<12} {:>9.4} {:>9} {:>9}",
            "overall", self.accuracy, self.correct, self.total
        );
        for (channel, stats) in &self.per_channel {
            let _ = writeln!(
                out,
                "{:<12} {:>9.4} {:>9} {:>9}",
                channel.as_str(),
                stats.accuracy(),
                stats.correct,
                stats.total
            );
        }
        let _ = writeln!(out, "failures     {:>9}", self.failures);
        let _ = writeln!(
            out,
            "confusion    gold\\pred  ENTAILED {:>6}  REFUTED {:>6}",
            self.confusion[0][0], self.confusion[0][1]
        );
        let _ = writeln!(
            out,
            "                        ENTAILED {:>6}  REFUTED {:>6}",
            self.confusion[1][0], self.confusion[1][1]
        );
        out
    }
}

/// Evaluate a sample set. Aggregation is order-independent; the
/// prediction list preserves sample order.
pub fn evaluate(
    samples: &[Sample],
    tables: &HashMap<String, Table>,
    pipeline: &Pipeline,
    params: &VerifierParams,
    options: EvalOptions,
) -> EvalReport {
    let verdicts = batch::map(options.parallel, samples, |s| {
        let table = &tables[&s.table_id];
        pipeline.verify_one(&s.statement, table, params)
    });

    let mut report = EvalReport {
        total: samples.len(),
        correct: 0,
        accuracy: 0.0,
        per_channel: BTreeMap::new(),
        confusion: [[0; 2]; 2],
        failures: 0,
        predictions: Vec::with_capacity(samples.len()),
    };
    for (i, (sample, verdict)) in samples.iter().zip(verdicts).enumerate() {
        let (predicted, p_entailed, failed) = match verdict {
            Ok(v) => (v.label, v.p_entailed, false),
            // failed samples degrade to the default label, flagged
            Err(_) => (Label::Refuted, 0.0, true),
        };
        if failed {
            report.failures += 1;
        }
        let correct = predicted == sample.label;
        if correct {
            report.correct += 1;
        }
        report.confusion[sample.label.index()][predicted.index()] += 1;
        let stats = report
            .per_channel
            .entry(sample.channel)
            .or_insert(ChannelStats {
                correct: 0,
                total: 0,
            });
        stats.total += 1;
        if correct {
            stats.correct += 1;
        }
        report.predictions.push(PredictionRecord {
            index: i,
            table_id: sample.table_id.clone(),
            gold: sample.label.as_str().to_string(),
            predicted: predicted.as_str().to_string(),
            p_entailed,
            failed,
        });
    }
    report.accuracy = if report.total == 0 {
        0.0
    } else {
        report.correct as f64 / report.total as f64
    };
    report
}
