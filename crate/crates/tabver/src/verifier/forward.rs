//! Forward pass of the verification network and its hand-written
//! reverse-mode gradients.
//!
//! Pipeline per input: type embeddings join the encoder features into
//! D = 3F node vectors, relevance scores prune the least
//! statement-relevant nodes once (rewiring the graph), surviving features
//! are gated by their score, L attention layers pass messages over the
//! pruned graph, attentive pooling collapses the nodes, and a linear
//! classifier over [pooled || cls_table || cls_evidence] yields the two
//! label probabilities.
//!
//! The pruning selection itself is a hard, non-differentiated choice;
//! gradients reach the relevance parameters only through the score gate
//! multiplying surviving node features.

use std::collections::BTreeMap;

use thiserror::Error;

use super::linalg::{axpy, dot, logistic, softmax};
use super::params::{GatLayer, VerifierParams};
use crate::graph::{LogicGraph, NodeType};

pub const LEAKY_SLOPE: f64 = 0.2;

#[derive(Debug, Error, PartialEq)]
pub enum VerifierError {
    #[error("dimension mismatch: {context} has {got}, expected {want}")]
    Dimension {
        context: &'static str,
        got: usize,
        want: usize,
    },
    #[error("all nodes were pruned")]
    EmptyGraph,
}

/// Everything the network consumes for one sample.
#[derive(Debug, Clone)]
pub struct VerifierInput {
    pub graph: LogicGraph,
    /// Encoder vector per node, indexed by node id.
    pub node_h_p: Vec<Vec<f64>>,
    /// Pooled statement vector.
    pub h_s: Vec<f64>,
    /// Sequence summary of the table-statement encoding.
    pub cls_table: Vec<f64>,
    /// Sequence summary of the evidence-statement encoding.
    pub cls_evidence: Vec<f64>,
}

/// Intermediate diagnostics of one forward run.
#[derive(Debug, Clone, Default)]
pub struct ForwardTrace {
    /// Relevance score per node id, before pruning.
    pub scores: Vec<(usize, f64)>,
    /// Removed node ids, in removal order.
    pub pruned: Vec<usize>,
    /// Per layer: attention weight of edge (i, j), j a neighbor of i.
    pub attention: Vec<BTreeMap<(usize, usize), f64>>,
    /// Pooling weight per surviving node id.
    pub pool_weights: Vec<(usize, f64)>,
}

/// Type embedding h^t = W_t(o) + b_t; Function selects row 0.
pub fn type_embed(params: &VerifierParams, node_type: NodeType) -> Vec<f64> {
    let row = match node_type {
        NodeType::Function => 0,
        NodeType::Entity => 1,
    };
    let mut out = params.w_type.row(row).to_vec();
    axpy(&mut out, 1.0, &params.b_type);
    out
}

/// Per-node concatenation [h_p || h_s || h_t], in node id order.
pub fn assemble_features(
    inp: &VerifierInput,
    params: &VerifierParams,
) -> Result<Vec<Vec<f64>>, VerifierError> {
    let f = params.dim_f;
    check_dim("h_s", inp.h_s.len(), f)?;
    let ids = inp.graph.node_ids();
    check_dim("node_h_p", inp.node_h_p.len(), ids.len().max(inp.node_h_p.len()))?;
    let mut out = Vec::with_capacity(ids.len());
    for &id in &ids {
        let h_p = inp
            .node_h_p
            .get(id)
            .ok_or(VerifierError::Dimension {
                context: "node_h_p",
                got: inp.node_h_p.len(),
                want: id + 1,
            })?;
        check_dim("node vector", h_p.len(), f)?;
        let node = inp.graph.node(id).expect("id from node_ids");
        let h_t = type_embed(params, node.node_type);
        let mut h = Vec::with_capacity(3 * f);
        h.extend_from_slice(h_p);
        h.extend_from_slice(&inp.h_s);
        h.extend_from_slice(&h_t);
        out.push(h);
    }
    Ok(out)
}

fn check_dim(context: &'static str, got: usize, want: usize) -> Result<(), VerifierError> {
    if got != want {
        Err(VerifierError::Dimension { context, got, want })
    } else {
        Ok(())
    }
}

/// Raw attention logit e_ij = LeakyReLU(a · [W_q h_i || W_k h_j]).
pub fn attention_logit(layer: &GatLayer, h_i: &[f64], h_j: &[f64]) -> f64 {
    let q = layer.w_q.matvec(h_i);
    let k = layer.w_k.matvec(h_j);
    let d = q.len();
    let z = dot(&layer.attn[..d], &q) + dot(&layer.attn[d..], &k);
    leaky_relu(z)
}

pub fn leaky_relu(z: f64) -> f64 {
    if z > 0.0 {
        z
    } else {
        LEAKY_SLOPE * z
    }
}

/// Relevance of one node to the statement:
/// sigma(w_g · tanh(W_s [h_p || h_s] + b_s)), strictly inside (0, 1).
pub fn relevance_score(params: &VerifierParams, h_p: &[f64], h_s: &[f64]) -> f64 {
    let mut cat = Vec::with_capacity(h_p.len() + h_s.len());
    cat.extend_from_slice(h_p);
    cat.extend_from_slice(h_s);
    let mut u = params.w_score.matvec(&cat);
    axpy(&mut u, 1.0, &params.b_score);
    let g: Vec<f64> = u.iter().map(|x| x.tanh()).collect();
    logistic(dot(&params.w_gate, &g))
}

/// Remove the floor(theta * |V|) lowest-scoring nodes, each via
/// rewiring; ties broken by removing the higher node id first.
pub fn prune(
    graph: &LogicGraph,
    scores: &[(usize, f64)],
    theta: f64,
) -> (LogicGraph, Vec<usize>) {
    let k = (theta * graph.node_count() as f64).floor() as usize;
    let mut order: Vec<(usize, f64)> = scores.to_vec();
    order.sort_by(|a, b| {
        a.1.partial_cmp(&b.1)
            .expect("scores are finite")
            .then(b.0.cmp(&a.0))
    });
    let mut g = graph.clone();
    let mut removed = Vec::with_capacity(k);
    for &(id, _) in order.iter().take(k) {
        g = g.remove_node_rewire(id).expect("node exists");
        removed.push(id);
    }
    (g, removed)
}

/// One attention layer over the graph; isolated nodes pass through.
pub fn gat_layer(
    graph: &LogicGraph,
    ids: &[usize],
    h: &[Vec<f64>],
    layer: &GatLayer,
) -> (Vec<Vec<f64>>, BTreeMap<(usize, usize), f64>) {
    let index: BTreeMap<usize, usize> = ids.iter().copied().zip(0..).collect();
    let q: Vec<Vec<f64>> = h.iter().map(|x| layer.w_q.matvec(x)).collect();
    let k: Vec<Vec<f64>> = h.iter().map(|x| layer.w_k.matvec(x)).collect();
    let v: Vec<Vec<f64>> = h.iter().map(|x| layer.w_v.matvec(x)).collect();
    let d = layer.w_q.rows;
    let mut out = Vec::with_capacity(h.len());
    let mut attention = BTreeMap::new();
    for (row_i, &id) in ids.iter().enumerate() {
        let neighbors = graph.neighbors(id);
        if neighbors.is_empty() {
            out.push(h[row_i].clone());
            continue;
        }
        let logits: Vec<f64> = neighbors
            .iter()
            .map(|nb| {
                let row_j = index[nb];
                let z = dot(&layer.attn[..d], &q[row_i]) + dot(&layer.attn[d..], &k[row_j]);
                leaky_relu(z)
            })
            .collect();
        let alpha = softmax(&logits);
        let mut msg = vec![0.0; d];
        for (a, nb) in alpha.iter().zip(&neighbors) {
            axpy(&mut msg, *a, &v[index[nb]]);
            attention.insert((id, *nb), *a);
        }
        let mut hi = h[row_i].clone();
        for (x, m) in hi.iter_mut().zip(&msg) {
            *x += logistic(*m);
        }
        out.push(hi);
    }
    (out, attention)
}

/// Softmax-weighted sum of node vectors under the pooling query.
pub fn attentive_pool(
    params: &VerifierParams,
    h: &[Vec<f64>],
) -> Result<(Vec<f64>, Vec<f64>), VerifierError> {
    if h.is_empty() {
        return Err(VerifierError::EmptyGraph);
    }
    let t: Vec<f64> = h.iter().map(|x| dot(&params.q_pool, x)).collect();
    let beta = softmax(&t);
    let mut pooled = vec![0.0; h[0].len()];
    for (b, x) in beta.iter().zip(h) {
        axpy(&mut pooled, *b, x);
    }
    Ok((pooled, beta))
}

/// Probabilities (ENTAILED, REFUTED) from the pooled graph vector and
/// the two sequence summaries.
pub fn classify(
    params: &VerifierParams,
    pooled: &[f64],
    cls_table: &[f64],
    cls_evidence: &[f64],
) -> [f64; 2] {
    let mut x = Vec::with_capacity(pooled.len() + cls_table.len() + cls_evidence.len());
    x.extend_from_slice(pooled);
    x.extend_from_slice(cls_table);
    x.extend_from_slice(cls_evidence);
    let mut logits = params.w_cls.matvec(&x);
    axpy(&mut logits, 1.0, &params.b_cls);
    let p = softmax(&logits);
    [p[0], p[1]]
}

/// Full forward pass. An input with no graph nodes (no evidence) falls
/// back to classifying [0 || cls_table || cls_evidence].
pub fn forward(
    inp: &VerifierInput,
    params: &VerifierParams,
) -> Result<([f64; 2], ForwardTrace), VerifierError> {
    let cache = forward_cached(inp, params)?;
    Ok((cache.probs, cache.trace))
}

/// Forward keeping every intermediate needed by the backward pass.
pub(super) struct ForwardCache {
    pub probs: [f64; 2],
    pub trace: ForwardTrace,
    /// Ids of surviving nodes, ascending; empty on the no-graph path.
    pub survivors: Vec<usize>,
    pub pruned_graph: LogicGraph,
    /// Gate internals per survivor: tanh output and score.
    pub gate_g: Vec<Vec<f64>>,
    pub scores_surv: Vec<f64>,
    /// Ungated features and per-layer inputs (layer_h[0] is gated input).
    pub features: Vec<Vec<f64>>,
    pub layer_h: Vec<Vec<Vec<f64>>>,
    pub pooled: Vec<f64>,
    pub beta: Vec<f64>,
    pub cls_x: Vec<f64>,
}

pub(super) fn forward_cached(
    inp: &VerifierInput,
    params: &VerifierParams,
) -> Result<ForwardCache, VerifierError> {
    let f = params.dim_f;
    let d = params.dim_d;
    check_dim("cls_table", inp.cls_table.len(), f)?;
    check_dim("cls_evidence", inp.cls_evidence.len(), f)?;

    if inp.graph.node_count() == 0 {
        let pooled = vec![0.0; d];
        let probs = classify(params, &pooled, &inp.cls_table, &inp.cls_evidence);
        let mut cls_x = pooled.clone();
        cls_x.extend_from_slice(&inp.cls_table);
        cls_x.extend_from_slice(&inp.cls_evidence);
        return Ok(ForwardCache {
            probs,
            trace: ForwardTrace::default(),
            survivors: Vec::new(),
            pruned_graph: inp.graph.clone(),
            gate_g: Vec::new(),
            scores_surv: Vec::new(),
            features: Vec::new(),
            layer_h: Vec::new(),
            pooled,
            beta: Vec::new(),
            cls_x,
        });
    }

    check_dim("h_s", inp.h_s.len(), f)?;
    let ids = inp.graph.node_ids();
    let features_all = assemble_features(inp, params)?;

    // relevance scores from the encoder features, then one hard prune
    let scores: Vec<(usize, f64)> = ids
        .iter()
        .map(|&id| (id, relevance_score(params, &inp.node_h_p[id], &inp.h_s)))
        .collect();
    let (pruned_graph, removed) = prune(&inp.graph, &scores, params.theta);
    let survivors = pruned_graph.node_ids();

    // gate surviving features by their relevance score
    let score_of: BTreeMap<usize, f64> = scores.iter().copied().collect();
    let row_of: BTreeMap<usize, usize> = ids.iter().copied().zip(0..).collect();
    let mut features = Vec::with_capacity(survivors.len());
    let mut gate_g = Vec::with_capacity(survivors.len());
    let mut scores_surv = Vec::with_capacity(survivors.len());
    let mut h0 = Vec::with_capacity(survivors.len());
    for &id in &survivors {
        let feat = features_all[row_of[&id]].clone();
        let s = score_of[&id];
        // recompute the tanh pre-gate for the backward pass
        let mut cat = Vec::with_capacity(2 * f);
        cat.extend_from_slice(&inp.node_h_p[id]);
        cat.extend_from_slice(&inp.h_s);
        let mut u = params.w_score.matvec(&cat);
        axpy(&mut u, 1.0, &params.b_score);
        gate_g.push(u.iter().map(|x| x.tanh()).collect());
        scores_surv.push(s);
        h0.push(feat.iter().map(|x| x * s).collect());
        features.push(feat);
    }

    let mut layer_h = vec![h0];
    let mut attention = Vec::with_capacity(params.n_layers());
    for layer in &params.layers {
        let (next, att) = gat_layer(&pruned_graph, &survivors, layer_h.last().unwrap(), layer);
        attention.push(att);
        layer_h.push(next);
    }

    let (pooled, beta) = attentive_pool(params, layer_h.last().unwrap())?;
    let probs = classify(params, &pooled, &inp.cls_table, &inp.cls_evidence);
    let mut cls_x = pooled.clone();
    cls_x.extend_from_slice(&inp.cls_table);
    cls_x.extend_from_slice(&inp.cls_evidence);

    let trace = ForwardTrace {
        scores,
        pruned: removed,
        attention,
        pool_weights: survivors.iter().copied().zip(beta.iter().copied()).collect(),
    };
    Ok(ForwardCache {
        probs,
        trace,
        survivors,
        pruned_graph,
        gate_g,
        scores_surv,
        features,
        layer_h,
        pooled,
        beta,
        cls_x,
    })
}

/// Cross-entropy loss and gradients for one sample. `gold` indexes the
/// probability pair (0 = ENTAILED, 1 = REFUTED).
pub fn backward(
    inp: &VerifierInput,
    params: &VerifierParams,
    gold: usize,
) -> Result<(f64, [f64; 2], VerifierParams), VerifierError> {
    let cache = forward_cached(inp, params)?;
    let mut grads = params.zeros_like();
    let f = params.dim_f;
    let d = params.dim_d;
    let loss = -cache.probs[gold].max(f64::MIN_POSITIVE).ln();

    // classifier
    let dlogits = [
        cache.probs[0] - if gold == 0 { 1.0 } else { 0.0 },
        cache.probs[1] - if gold == 1 { 1.0 } else { 0.0 },
    ];
    grads.w_cls.add_outer(&dlogits, &cache.cls_x);
    axpy(&mut grads.b_cls, 1.0, &dlogits);
    let dx = params.w_cls.matvec_t(&dlogits);
    let d_pooled = dx[..d].to_vec();

    if cache.survivors.is_empty() {
        return Ok((loss, cache.probs, grads));
    }

    // attentive pooling
    let h_top = cache.layer_h.last().unwrap();
    let n = cache.survivors.len();
    let mut d_h: Vec<Vec<f64>> = vec![vec![0.0; d]; n];
    let d_beta: Vec<f64> = h_top.iter().map(|x| dot(&d_pooled, x)).collect();
    for (i, b) in cache.beta.iter().enumerate() {
        axpy(&mut d_h[i], *b, &d_pooled);
    }
    let dot_bd: f64 = cache.beta.iter().zip(&d_beta).map(|(b, g)| b * g).sum();
    let d_t: Vec<f64> = cache
        .beta
        .iter()
        .zip(&d_beta)
        .map(|(b, g)| b * (g - dot_bd))
        .collect();
    for (i, dt) in d_t.iter().enumerate() {
        axpy(&mut grads.q_pool, *dt, &h_top[i]);
        axpy(&mut d_h[i], *dt, &params.q_pool);
    }

    // attention layers, reversed
    let index: BTreeMap<usize, usize> = cache.survivors.iter().copied().zip(0..).collect();
    for (li, layer) in params.layers.iter().enumerate().rev() {
        let h_in = &cache.layer_h[li];
        let q: Vec<Vec<f64>> = h_in.iter().map(|x| layer.w_q.matvec(x)).collect();
        let k: Vec<Vec<f64>> = h_in.iter().map(|x| layer.w_k.matvec(x)).collect();
        let v: Vec<Vec<f64>> = h_in.iter().map(|x| layer.w_v.matvec(x)).collect();
        let g_layer = &mut grads.layers[li];
        let mut d_h_in: Vec<Vec<f64>> = vec![vec![0.0; d]; n];
        let mut d_q: Vec<Vec<f64>> = vec![vec![0.0; d]; n];
        let mut d_k: Vec<Vec<f64>> = vec![vec![0.0; d]; n];
        let mut d_v: Vec<Vec<f64>> = vec![vec![0.0; d]; n];
        for (row_i, &id) in cache.survivors.iter().enumerate() {
            let neighbors = cache.pruned_graph.neighbors(id);
            if neighbors.is_empty() {
                axpy(&mut d_h_in[row_i], 1.0, &d_h[row_i]);
                continue;
            }
            // recompute this node's attention pieces
            let logits: Vec<f64> = neighbors
                .iter()
                .map(|nb| {
                    dot(&layer.attn[..d], &q[row_i]) + dot(&layer.attn[d..], &k[index[nb]])
                })
                .collect();
            let activated: Vec<f64> = logits.iter().map(|&z| leaky_relu(z)).collect();
            let alpha = softmax(&activated);
            let mut msg = vec![0.0; d];
            for (a, nb) in alpha.iter().zip(&neighbors) {
                axpy(&mut msg, *a, &v[index[nb]]);
            }
            // h_out = sigma(msg) + h_in
            axpy(&mut d_h_in[row_i], 1.0, &d_h[row_i]);
            let d_msg: Vec<f64> = d_h[row_i]
                .iter()
                .zip(&msg)
                .map(|(g, m)| {
                    let s = logistic(*m);
                    g * s * (1.0 - s)
                })
                .collect();
            let d_alpha: Vec<f64> = neighbors
                .iter()
                .map(|nb| dot(&d_msg, &v[index[nb]]))
                .collect();
            for (j, nb) in neighbors.iter().enumerate() {
                axpy(&mut d_v[index[nb]], alpha[j], &d_msg);
            }
            let dot_ad: f64 = alpha.iter().zip(&d_alpha).map(|(a, g)| a * g).sum();
            for (j, nb) in neighbors.iter().enumerate() {
                let d_e = alpha[j] * (d_alpha[j] - dot_ad);
                let d_z = d_e * if logits[j] > 0.0 { 1.0 } else { LEAKY_SLOPE };
                axpy(&mut g_layer.attn[..d], d_z, &q[row_i]);
                axpy(&mut g_layer.attn[d..], d_z, &k[index[nb]]);
                axpy(&mut d_q[row_i], d_z, &layer.attn[..d]);
                axpy(&mut d_k[index[nb]], d_z, &layer.attn[d..]);
            }
        }
        for row in 0..n {
            g_layer.w_q.add_outer(&d_q[row], &h_in[row]);
            g_layer.w_k.add_outer(&d_k[row], &h_in[row]);
            g_layer.w_v.add_outer(&d_v[row], &h_in[row]);
            axpy(&mut d_h_in[row], 1.0, &layer.w_q.matvec_t(&d_q[row]));
            axpy(&mut d_h_in[row], 1.0, &layer.w_k.matvec_t(&d_k[row]));
            axpy(&mut d_h_in[row], 1.0, &layer.w_v.matvec_t(&d_v[row]));
        }
        d_h = d_h_in;
    }

    // gating and assembly
    for (row, &id) in cache.survivors.iter().enumerate() {
        let s = cache.scores_surv[row];
        let feat = &cache.features[row];
        let d_h0 = &d_h[row];
        // d feat and d s through h0 = s * feat
        let d_s: f64 = dot(d_h0, feat);
        let d_feat: Vec<f64> = d_h0.iter().map(|g| g * s).collect();
        // type embedding slice [2F..3F)
        let node = inp.graph.node(id).expect("survivor exists");
        let type_row = match node.node_type {
            NodeType::Function => 0,
            NodeType::Entity => 1,
        };
        let d_ht = &d_feat[2 * f..3 * f];
        axpy(grads.w_type.row_mut(type_row), 1.0, d_ht);
        axpy(&mut grads.b_type, 1.0, d_ht);
        // relevance gate
        let g = &cache.gate_g[row];
        let d_zgate = d_s * s * (1.0 - s);
        axpy(&mut grads.w_gate, d_zgate, g);
        let d_u: Vec<f64> = params
            .w_gate
            .iter()
            .zip(g)
            .map(|(w, gi)| d_zgate * w * (1.0 - gi * gi))
            .collect();
        let mut cat = Vec::with_capacity(2 * f);
        cat.extend_from_slice(&inp.node_h_p[id]);
        cat.extend_from_slice(&inp.h_s);
        grads.w_score.add_outer(&d_u, &cat);
        axpy(&mut grads.b_score, 1.0, &d_u);
    }

    Ok((loss, cache.probs, grads))
}

/// Convenience wrapper: loss only.
pub fn loss_of(inp: &VerifierInput, params: &VerifierParams, gold: usize) -> f64 {
    let cache = forward_cached(inp, params).expect("valid input");
    -cache.probs[gold].max(f64::MIN_POSITIVE).ln()
}
