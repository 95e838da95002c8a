//! Graph attention verifier: typed node features over the evidence
//! graph, learned relevance pruning, message passing with residuals,
//! attentive pooling, and a two-way classifier, trained end to end with
//! hand-written reverse-mode gradients.

mod checkpoint;
mod forward;
mod linalg;
mod params;
mod train;

pub use checkpoint::{load as load_checkpoint, save as save_checkpoint, CheckpointError, EncoderStamp};
pub use forward::{
    assemble_features, attention_logit, attentive_pool, backward, classify, forward, gat_layer,
    leaky_relu, loss_of, prune, relevance_score, type_embed, ForwardTrace, VerifierError,
    VerifierInput, LEAKY_SLOPE,
};
pub use linalg::Mat;
pub use params::{GatLayer, VerifierParams};
pub use train::{train, Label, TrainError, TrainReport, TrainSchedule};

/// Per-node working state: encoder feature, type embedding, assembled
/// working vector, and relevance score.
#[derive(Debug, Clone)]
pub struct NodeState {
    pub id: usize,
    pub h_p: Vec<f64>,
    pub h_t: Vec<f64>,
    pub h: Vec<f64>,
    pub s: f64,
}

/// Pre-prune node states of an input, for inspection and debugging.
pub fn node_states(
    inp: &VerifierInput,
    params: &VerifierParams,
) -> Result<Vec<NodeState>, VerifierError> {
    let features = assemble_features(inp, params)?;
    Ok(inp
        .graph
        .node_ids()
        .into_iter()
        .zip(features)
        .map(|(id, h)| {
            let node = inp.graph.node(id).expect("id listed");
            NodeState {
                id,
                h_p: inp.node_h_p[id].clone(),
                h_t: type_embed(params, node.node_type),
                s: relevance_score(params, &inp.node_h_p[id], &inp.h_s),
                h,
            }
        })
        .collect())
}
