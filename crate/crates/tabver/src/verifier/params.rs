//! Learnable tensors of the verification network.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::linalg::Mat;

/// One graph-attention layer: query/key/value projections plus the
/// attention vector over concatenated query-key pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct GatLayer {
    pub w_q: Mat,
    pub w_k: Mat,
    pub w_v: Mat,
    /// Length 2D.
    pub attn: Vec<f64>,
}

/// All learnable tensors. Working width D is 3F: node features are the
/// concatenation [h_p || h_s || h_t] of three F-wide parts.
#[derive(Debug, Clone, PartialEq)]
pub struct VerifierParams {
    pub dim_f: usize,
    pub dim_d: usize,
    pub n_types: usize,
    /// Fraction of lowest-scoring nodes pruned before message passing.
    pub theta: f64,
    pub seed: u64,
    /// Type embedding table, one row per node type.
    pub w_type: Mat,
    pub b_type: Vec<f64>,
    /// Relevance scorer over [h_p || h_s].
    pub w_score: Mat,
    pub b_score: Vec<f64>,
    /// Gate reducing the F-wide pre-score to a scalar.
    pub w_gate: Vec<f64>,
    pub layers: Vec<GatLayer>,
    /// Attentive pooling query.
    pub q_pool: Vec<f64>,
    /// Classifier over [pooled || cls_table || cls_evidence].
    pub w_cls: Mat,
    pub b_cls: Vec<f64>,
}

fn rand_vec(rng: &mut ChaCha8Rng, bound: f64, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-bound..bound)).collect()
}

fn rand_mat(rng: &mut ChaCha8Rng, bound: f64, rows: usize, cols: usize) -> Mat {
    Mat {
        rows,
        cols,
        data: rand_vec(rng, bound, rows * cols),
    }
}

impl VerifierParams {
    /// Uniform(-1/sqrt(D), 1/sqrt(D)) initialization, reproducible from
    /// the seed.
    pub fn init(dim_f: usize, n_layers: usize, theta: f64, seed: u64) -> Self {
        assert!(theta >= 0.0 && theta < 1.0, "theta must be in [0, 1)");
        let d = 3 * dim_f;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let bound = 1.0 / (d as f64).sqrt();
        // fields sampled in declaration order
        let w_type = rand_mat(&mut rng, bound, 2, dim_f);
        let b_type = rand_vec(&mut rng, bound, dim_f);
        let w_score = rand_mat(&mut rng, bound, dim_f, 2 * dim_f);
        let b_score = rand_vec(&mut rng, bound, dim_f);
        let w_gate = rand_vec(&mut rng, bound, dim_f);
        let mut layers = Vec::with_capacity(n_layers);
        for _ in 0..n_layers {
            layers.push(GatLayer {
                w_q: rand_mat(&mut rng, bound, d, d),
                w_k: rand_mat(&mut rng, bound, d, d),
                w_v: rand_mat(&mut rng, bound, d, d),
                attn: rand_vec(&mut rng, bound, 2 * d),
            });
        }
        let q_pool = rand_vec(&mut rng, bound, d);
        let w_cls = rand_mat(&mut rng, bound, 2, d + 2 * dim_f);
        let b_cls = rand_vec(&mut rng, bound, 2);
        VerifierParams {
            dim_f,
            dim_d: d,
            n_types: 2,
            theta,
            seed,
            w_type,
            b_type,
            w_score,
            b_score,
            w_gate,
            layers,
            q_pool,
            w_cls,
            b_cls,
        }
    }

    /// Same shapes, all zeros; gradient and moment buffers.
    pub fn zeros_like(&self) -> Self {
        let mut z = self.clone();
        for (_, t) in z.named_tensors_mut() {
            for x in t {
                *x = 0.0;
            }
        }
        z
    }

    pub fn n_layers(&self) -> usize {
        self.layers.len()
    }

    /// Every parameter tensor with a stable name, in a fixed order.
    pub fn named_tensors(&self) -> Vec<(String, &[f64])> {
        let mut out: Vec<(String, &[f64])> = vec![
            ("w_type".into(), &self.w_type.data),
            ("b_type".into(), &self.b_type),
            ("w_score".into(), &self.w_score.data),
            ("b_score".into(), &self.b_score),
            ("w_gate".into(), &self.w_gate),
        ];
        for (i, layer) in self.layers.iter().enumerate() {
            out.push((format!("layer{i}.w_q"), &layer.w_q.data));
            out.push((format!("layer{i}.w_k"), &layer.w_k.data));
            out.push((format!("layer{i}.w_v"), &layer.w_v.data));
            out.push((format!("layer{i}.attn"), &layer.attn));
        }
        out.push(("q_pool".into(), &self.q_pool));
        out.push(("w_cls".into(), &self.w_cls.data));
        out.push(("b_cls".into(), &self.b_cls));
        out
    }

    /// Mutable view in the same order as [`named_tensors`].
    pub fn named_tensors_mut(&mut self) -> Vec<(String, &mut [f64])> {
        let mut out: Vec<(String, &mut [f64])> = vec![
            ("w_type".into(), self.w_type.data.as_mut_slice()),
            ("b_type".into(), self.b_type.as_mut_slice()),
            ("w_score".into(), self.w_score.data.as_mut_slice()),
            ("b_score".into(), self.b_score.as_mut_slice()),
            ("w_gate".into(), self.w_gate.as_mut_slice()),
        ];
        for (i, layer) in self.layers.iter_mut().enumerate() {
            out.push((format!("layer{i}.w_q"), layer.w_q.data.as_mut_slice()));
            out.push((format!("layer{i}.w_k"), layer.w_k.data.as_mut_slice()));
            out.push((format!("layer{i}.w_v"), layer.w_v.data.as_mut_slice()));
            out.push((format!("layer{i}.attn"), layer.attn.as_mut_slice()));
        }
        out.push(("q_pool".into(), self.q_pool.as_mut_slice()));
        out.push(("w_cls".into(), self.w_cls.data.as_mut_slice()));
        out.push(("b_cls".into(), self.b_cls.as_mut_slice()));
        out
    }

    pub fn n_parameters(&self) -> usize {
        self.named_tensors().iter().map(|(_, t)| t.len()).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shapes_follow_dims() {
        let p = VerifierParams::init(8, 2, 0.3, 1);
        assert_eq!(p.dim_d, 24);
        assert_eq!(p.w_type.rows, 2);
        assert_eq!(p.w_type.cols, 8);
        assert_eq!(p.w_score.rows, 8);
        assert_eq!(p.w_score.cols, 16);
        assert_eq!(p.layers.len(), 2);
        assert_eq!(p.layers[0].w_q.rows, 24);
        assert_eq!(p.layers[0].attn.len(), 48);
        assert_eq!(p.w_cls.cols, 24 + 16);
        assert_eq!(p.w_cls.rows, 2);
    }

    #[test]
    fn init_is_seed_deterministic_and_bounded() {
        let a = VerifierParams::init(8, 2, 0.3, 7);
        let b = VerifierParams::init(8, 2, 0.3, 7);
        assert_eq!(a, b);
        let c = VerifierParams::init(8, 2, 0.3, 8);
        assert_ne!(a, c);
        let bound = 1.0 / (24f64).sqrt();
        for (_, t) in a.named_tensors() {
            assert!(t.iter().all(|x| x.abs() < bound && x.is_finite()));
        }
    }

    #[test]
    fn tensor_views_cover_everything_once() {
        let p = VerifierParams::init(8, 2, 0.3, 1);
        let total: usize = p.named_tensors().iter().map(|(_, t)| t.len()).sum();
        let d = 24;
        let f = 8;
        let expected = 2 * f + f          // type table
            + f * 2 * f + f + f           // scorer + gate
            + 2 * (3 * d * d + 2 * d)     // layers
            + d                           // pooling query
            + 2 * (d + 2 * f) + 2; // classifier
        assert_eq!(total, expected);
        let mut names: Vec<String> = p.named_tensors().into_iter().map(|(n, _)| n).collect();
        names.sort();
        names.dedup();
        assert_eq!(names.len(), p.named_tensors().len());
    }
}
