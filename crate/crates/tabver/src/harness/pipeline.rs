//! End-to-end assembly: statement + table -> synthesized programs ->
//! evidence -> graph -> encodings -> verifier input -> label.

use thiserror::Error;

use crate::encoder::{linearize_evidence_with_spans, Encoder, EncoderError, Segment};
use crate::graph::{build_graph, GraphError, LogicGraph};
use crate::retrieval::{retrieve, EvidenceSet, RetrievalConfig, SourceCounts};
use crate::synth::{synthesize, SearchBudget};
use crate::table::Table;
use crate::verifier::{
    forward, ForwardTrace, Label, VerifierError, VerifierInput, VerifierParams,
};

use super::config::PipelineConfig;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("encoder: {0}")]
    Encoder(#[from] EncoderError),
    #[error("graph: {0}")]
    Graph(#[from] GraphError),
    #[error("verifier: {0}")]
    Verifier(#[from] VerifierError),
}

/// The stage configs of one pipeline instance.
#[derive(Debug, Clone)]
pub struct Pipeline {
    pub encoder: Encoder,
    pub budget: SearchBudget,
    pub retrieval: RetrievalConfig,
}

impl Pipeline {
    pub fn from_config(cfg: &PipelineConfig) -> Self {
        Pipeline {
            encoder: Encoder::new(cfg.encoder_config()),
            budget: cfg.search_budget(),
            retrieval: cfg.retrieval_config(),
        }
    }

    /// Synthesize, retrieve, and encode one sample into a verifier input.
    /// Evidence that cannot fit the encoder budget is truncated whole
    /// programs at a time.
    pub fn build_input(
        &self,
        statement: &str,
        table: &Table,
    ) -> Result<(VerifierInput, EvidenceInfo), PipelineError> {
        let ps = synthesize(statement, table, &self.budget);
        let truncated_synthesis = ps.truncated;
        let mut ev = retrieve(&ps, &self.retrieval);

        // whole-program truncation to the encoder's evidence budget
        let max = self.encoder.cfg.max_sequence_length;
        let statement_tokens = crate::encoder::tokenize(statement).len();
        let budget = max
            .saturating_sub(3)
            .saturating_sub(statement_tokens.min(max / 2));
        while !ev.items.is_empty() {
            let (text, _) = linearize_evidence_with_spans(&ev);
            if crate::encoder::tokenize(&text).len() <= budget {
                break;
            }
            ev.items.pop();
        }

        let table_text = self.encoder.linearize_table(table);
        let enc_table = self.encoder.encode_pair(&table_text, statement)?;

        let info = EvidenceInfo {
            rendered: ev.items.iter().map(|p| p.render()).collect(),
            counts: ev.source_counts,
            truncated_synthesis,
        };

        if ev.is_empty() {
            let enc_ev = self.encoder.encode_pair("", statement)?;
            return Ok((
                VerifierInput {
                    graph: LogicGraph::empty(),
                    node_h_p: Vec::new(),
                    h_s: enc_ev.segment_mean(Segment::B),
                    cls_table: enc_table.summary,
                    cls_evidence: enc_ev.summary,
                },
                info,
            ));
        }

        let graph = build_graph(&ev)?;
        let (ev_text, spans) = linearize_evidence_with_spans(&ev);
        let enc_ev = self.encoder.encode_pair(&ev_text, statement)?;
        // graph node ids are assigned preorder per program, in evidence
        // order, so the flattened span list lines up with ids
        let mut node_h_p = Vec::with_capacity(graph.node_count());
        for program_spans in &spans {
            for span in program_spans {
                node_h_p.push(enc_ev.node_init(Segment::A, &span.range)?);
            }
        }
        debug_assert_eq!(node_h_p.len(), graph.node_count());
        Ok((
            VerifierInput {
                graph,
                node_h_p,
                h_s: enc_ev.segment_mean(Segment::B),
                cls_table: enc_table.summary,
                cls_evidence: enc_ev.summary,
            },
            info,
        ))
    }

    /// Full verification of one statement against one table.
    pub fn verify_one(
        &self,
        statement: &str,
        table: &Table,
        params: &VerifierParams,
    ) -> Result<Verdict, PipelineError> {
        let (input, evidence) = self.build_input(statement, table)?;
        let (probs, trace) = forward(&input, params)?;
        let label = if probs[0] >= probs[1] {
            Label::Entailed
        } else {
            Label::Refuted
        };
        Ok(Verdict {
            label,
            p_entailed: probs[0],
            p_refuted: probs[1],
            evidence,
            forward: trace,
        })
    }
}

/// What the retrieval stage produced for one sample.
#[derive(Debug, Clone)]
pub struct EvidenceInfo {
    pub rendered: Vec<String>,
    pub counts: SourceCounts,
    pub truncated_synthesis: bool,
}

/// Prediction plus the full inspection trace.
#[derive(Debug, Clone)]
pub struct Verdict {
    pub label: Label,
    pub p_entailed: f64,
    pub p_refuted: f64,
    pub evidence: EvidenceInfo,
    pub forward: ForwardTrace,
}

/// Build verifier inputs for a labeled sample set, in sample order.
pub fn prepare_inputs(
    samples: &[super::dataset::Sample],
    tables: &std::collections::HashMap<String, Table>,
    pipeline: &Pipeline,
    parallel: bool,
) -> Vec<Result<(VerifierInput, Label), PipelineError>> {
    crate::batch::map(parallel, samples, |s| {
        let table = &tables[&s.table_id];
        pipeline
            .build_input(&s.statement, table)
            .map(|(input, _)| (input, s.label))
    })
}

/// Re-export for `EvidenceSet` callers needing direct graph building.
pub fn evidence_graph(ev: &EvidenceSet) -> Result<LogicGraph, GraphError> {
    build_graph(ev)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::table::load_table;

    fn pipeline() -> Pipeline {
        Pipeline::from_config(&PipelineConfig::default())
    }

    fn fleet() -> Table {
        load_table(
            b"bus model#number in fleet#year\nscania omnicity#1#1999\nvolvo b10m#12#2001\nman lion#35#2003",
            '#',
        )
        .unwrap()
    }

    #[test]
    fn builds_input_with_evidence() {
        let p = pipeline();
        let t = fleet();
        let (input, info) = p
            .build_input("the smallest number in fleet be 1", &t)
            .unwrap();
        assert!(!info.rendered.is_empty());
        assert_eq!(input.graph.node_count(), input.node_h_p.len());
        assert_eq!(input.h_s.len(), 64);
        assert_eq!(input.cls_table.len(), 64);
        let params = PipelineConfig::default().init_params();
        let verdict = p
            .verify_one("the smallest number in fleet be 1", &t, &params)
            .unwrap();
        assert!(verdict.p_entailed + verdict.p_refuted - 1.0 < 1e-9);
        assert!(verdict
            .evidence
            .rendered
            .iter()
            .any(|s| s.contains("min {")));
    }

    #[test]
    fn no_evidence_falls_back_to_empty_graph() {
        let p = pipeline();
        let t = fleet();
        let (input, info) = p.build_input("completely unrelated words", &t).unwrap();
        assert!(info.rendered.is_empty());
        assert_eq!(input.graph.node_count(), 0);
        let params = PipelineConfig::default().init_params();
        let verdict = p
            .verify_one("completely unrelated words", &t, &params)
            .unwrap();
        assert!(verdict.forward.scores.is_empty());
    }

    #[test]
    fn verify_is_deterministic() {
        let p = pipeline();
        let t = fleet();
        let params = PipelineConfig::default().init_params();
        let a = p
            .verify_one("the smallest number in fleet be 1", &t, &params)
            .unwrap();
        let b = p
            .verify_one("the smallest number in fleet be 1", &t, &params)
            .unwrap();
        assert_eq!(a.p_entailed.to_bits(), b.p_entailed.to_bits());
        assert_eq!(a.label, b.label);
    }

    #[test]
    fn oversized_evidence_is_dropped_whole() {
        let cfg = PipelineConfig {
            encoder: super::super::config::EncoderSection {
                max_sequence_length: 48,
                ..Default::default()
            },
            ..Default::default()
        };
        let p = Pipeline::from_config(&cfg);
        let t = fleet();
        let (input, info) = p
            .build_input("the smallest number in fleet be 1 in 1999", &t)
            .unwrap();
        // whatever survived still lines up node-for-node
        assert_eq!(input.graph.node_count(), input.node_h_p.len());
        let (full_input, full_info) = pipeline()
            .build_input("the smallest number in fleet be 1 in 1999", &t)
            .unwrap();
        assert!(info.rendered.len() <= full_info.rendered.len());
        assert!(input.graph.node_count() <= full_input.graph.node_count());
    }
}
