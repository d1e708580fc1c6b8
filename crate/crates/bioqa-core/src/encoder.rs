//! A deterministic toy encoder.
//!
//! Each whitespace token is embedded as the mean of hashed character
//! trigram rows from a V × H table, offset by a fixed pseudo-random
//! positional vector, and passed through one tanh mixing layer H → H.
//! Position 0 plays the sequence-level role: its pre-mix feature is the
//! positionally decayed average of every other token embedding, which makes
//! it sensitive to token order. Same seed and same text always produce
//! bit-identical hidden states.

use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::heads::{HiddenStates, TokenOrigin};

/// Geometric decay applied to token embeddings when forming the
/// sequence-level feature.
const CLS_DECAY: f64 = 0.9;
/// Scale of the fixed positional offsets.
const POSITIONAL_SCALE: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EncoderConfig {
    /// Number of hash buckets in the embedding table.
    pub buckets: usize,
    /// Hidden size H.
    pub hidden: usize,
    /// Seed for parameter init, feature hashing, and positional offsets.
    pub seed: u64,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        EncoderConfig {
            buckets: 512,
            hidden: 16,
            seed: 42,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ToyEncoder {
    pub embeddings: Array2<f64>,
    pub mix_weight: Array2<f64>,
    pub mix_bias: Array1<f64>,
    buckets: usize,
    hidden: usize,
    seed: u64,
}

/// Gradient accumulator shaped like the encoder parameters.
#[derive(Debug, Clone)]
pub struct EncoderGrads {
    pub embeddings: Array2<f64>,
    pub mix_weight: Array2<f64>,
    pub mix_bias: Array1<f64>,
}

/// Forward-pass intermediates needed by [`ToyEncoder::backward`].
#[derive(Debug, Clone)]
pub struct EncodeCache {
    /// Pre-mix feature rows f_i.
    features: Array2<f64>,
    /// Post-tanh outputs h_i.
    outputs: Array2<f64>,
    /// Embedding-table buckets per position (position 0 has none of its
    /// own; it aggregates the others).
    buckets_per_position: Vec<Vec<usize>>,
}

/// Whitespace tokens with their character offsets, `(token, start, end)`.
pub fn tokenize_with_offsets(text: &str) -> Vec<(String, usize, usize)> {
    let mut tokens = Vec::new();
    let mut current = String::new();
    let mut start = 0usize;
    for (idx, c) in text.chars().enumerate() {
        if c.is_whitespace() {
            if !current.is_empty() {
                tokens.push((std::mem::take(&mut current), start, idx));
            }
        } else {
            if current.is_empty() {
                start = idx;
            }
            current.push(c);
        }
    }
    if !current.is_empty() {
        tokens.push((current, start, text.chars().count()));
    }
    tokens
}

fn fnv1a(seed: u64, bytes: &[u8]) -> u64 {
    let mut hash = seed ^ 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        hash ^= u64::from(b);
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

impl ToyEncoder {
    pub fn new(config: &EncoderConfig) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let glorot = (6.0 / (config.hidden as f64 * 2.0)).sqrt();
        let embeddings = Array2::from_shape_fn((config.buckets, config.hidden), |_| {
            rng.random_range(-0.2..0.2)
        });
        let mix_weight = Array2::from_shape_fn((config.hidden, config.hidden), |_| {
            rng.random_range(-glorot..glorot)
        });
        ToyEncoder {
            embeddings,
            mix_weight,
            mix_bias: Array1::zeros(config.hidden),
            buckets: config.buckets,
            hidden: config.hidden,
            seed: config.seed,
        }
    }

    pub fn hidden_size(&self) -> usize {
        self.hidden
    }

    /// Boundary-marked character trigram buckets for one token.
    fn token_buckets(&self, token: &str) -> Vec<usize> {
        let marked: Vec<char> = std::iter::once('\u{2329}')
            .chain(token.chars())
            .chain(std::iter::once('\u{232A}'))
            .collect();
        let mut buckets = Vec::new();
        if marked.len() <= 3 {
            let gram: String = marked.iter().collect();
            buckets.push((fnv1a(self.seed, gram.as_bytes()) % self.buckets as u64) as usize);
            return buckets;
        }
        for window in marked.windows(3) {
            let gram: String = window.iter().collect();
            buckets.push((fnv1a(self.seed, gram.as_bytes()) % self.buckets as u64) as usize);
        }
        buckets
    }

    fn token_embedding(&self, buckets: &[usize]) -> Array1<f64> {
        let mut e = Array1::zeros(self.hidden);
        for &b in buckets {
            e += &self.embeddings.row(b);
        }
        e / buckets.len() as f64
    }

    fn positional(&self, position: usize) -> Array1<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(
            self.seed ^ (position as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15),
        );
        Array1::from_shape_fn(self.hidden, |_| {
            rng.random_range(-POSITIONAL_SCALE..POSITIONAL_SCALE)
        })
    }

    /// Encodes `[CLS] question [SEP] context [SEP]`, so the sequence length
    /// is the two token counts plus three.
    pub fn encode(&self, question: &str, context: &str) -> HiddenStates {
        self.encode_with_cache(question, context).0
    }

    pub fn encode_with_cache(&self, question: &str, context: &str) -> (HiddenStates, EncodeCache) {
        let q_tokens = tokenize_with_offsets(question);
        let c_tokens = tokenize_with_offsets(context);
        let s = q_tokens.len() + c_tokens.len() + 3;

        let mut provenance = Vec::with_capacity(s);
        let mut buckets_per_position: Vec<Vec<usize>> = Vec::with_capacity(s);
        provenance.push(TokenOrigin::Cls);
        buckets_per_position.push(Vec::new());

        let push_token = |token: &str,
                              origin: TokenOrigin,
                              provenance: &mut Vec<TokenOrigin>,
                              buckets_out: &mut Vec<Vec<usize>>| {
            provenance.push(origin);
            buckets_out.push(self.token_buckets(token));
        };
        for (token, start, end) in &q_tokens {
            push_token(
                token,
                TokenOrigin::Question {
                    start_char: *start,
                    end_char: *end,
                },
                &mut provenance,
                &mut buckets_per_position,
            );
        }
        push_token("[SEP]", TokenOrigin::Sep, &mut provenance, &mut buckets_per_position);
        for (token, start, end) in &c_tokens {
            push_token(
                token,
                TokenOrigin::Context {
                    start_char: *start,
                    end_char: *end,
                },
                &mut provenance,
                &mut buckets_per_position,
            );
        }
        push_token("[SEP]", TokenOrigin::Sep, &mut provenance, &mut buckets_per_position);

        // Pre-mix features.
        let mut features = Array2::zeros((s, self.hidden));
        let mut decayed_sum = Array1::zeros(self.hidden);
        let mut decay = 1.0;
        for (i, buckets) in buckets_per_position.iter().enumerate().skip(1) {
            let e = self.token_embedding(buckets);
            decay *= CLS_DECAY;
            decayed_sum = decayed_sum + &e * decay;
            let f = &e + &self.positional(i);
            features.row_mut(i).assign(&f);
        }
        let cls_feature = decayed_sum / (s - 1) as f64;
        features.row_mut(0).assign(&cls_feature);

        // One mixing layer with tanh.
        let z = features.dot(&self.mix_weight.t()) + &self.mix_bias;
        let outputs = z.mapv(f64::tanh);

        let hidden = HiddenStates::new(outputs.clone(), provenance)
            .expect("toy encoder produces finite values");
        (
            hidden,
            EncodeCache {
                features,
                outputs,
                buckets_per_position,
            },
        )
    }

    /// Accumulates parameter gradients for one encoded sequence given
    /// dLoss/dOutputs.
    pub fn backward(&self, cache: &EncodeCache, d_outputs: &Array2<f64>, grads: &mut EncoderGrads) {
        let s = cache.outputs.nrows();
        // dz = dh ⊙ (1 - h²)
        let dz = d_outputs * &(1.0 - &cache.outputs * &cache.outputs);
        grads.mix_weight += &dz.t().dot(&cache.features);
        for i in 0..s {
            grads.mix_bias += &dz.row(i);
        }
        // df_i = dz_i · W  (rows)
        let d_features = dz.dot(&self.mix_weight);

        let d_cls = d_features.row(0);
        let mut decay = 1.0;
        for i in 1..s {
            decay *= CLS_DECAY;
            // de_i = df_i + γ^i / (s-1) · df_0
            let de = &d_features.row(i) + &(&d_cls * (decay / (s - 1) as f64));
            let buckets = &cache.buckets_per_position[i];
            let scale = 1.0 / buckets.len() as f64;
            for &b in buckets {
                let mut row = grads.embeddings.row_mut(b);
                row += &(&de * scale);
            }
        }
    }

    pub fn apply_gradients(&mut self, grads: &EncoderGrads, learning_rate: f64) {
        self.embeddings -= &(&grads.embeddings * learning_rate);
        self.mix_weight -= &(&grads.mix_weight * learning_rate);
        self.mix_bias -= &(&grads.mix_bias * learning_rate);
    }

    /// SHA-256 over every parameter's little-endian bytes, in a fixed
    /// order. Bitwise-equal parameters ⇔ equal checksums.
    pub fn checksum(&self) -> String {
        let mut hasher = Sha256::new();
        for v in self
            .embeddings
            .iter()
            .chain(self.mix_weight.iter())
            .chain(self.mix_bias.iter())
        {
            hasher.update(v.to_le_bytes());
        }
        let digest = hasher.finalize();
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

impl EncoderGrads {
    pub fn zeros_like(encoder: &ToyEncoder) -> Self {
        EncoderGrads {
            embeddings: Array2::zeros(encoder.embeddings.dim()),
            mix_weight: Array2::zeros(encoder.mix_weight.dim()),
            mix_bias: Array1::zeros(encoder.mix_bias.len()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn encoder() -> ToyEncoder {
        ToyEncoder::new(&EncoderConfig {
            buckets: 64,
            hidden: 8,
            seed: 9,
        })
    }

    #[test]
    fn encoding_is_deterministic() {
        let e = encoder();
        let a = e.encode("what gene", "the TGM1 gene");
        let b = e.encode("what gene", "the TGM1 gene");
        assert_eq!(a.values(), b.values());
        assert_eq!(a.provenance(), b.provenance());
    }

    #[test]
    fn layout_is_cls_question_sep_context_sep() {
        let e = encoder();
        let h = e.encode("what gene does", "the TGM1 gene");
        // 3 question tokens + 3 context tokens + 3 specials.
        assert_eq!(h.seq_len(), 9);
        assert_eq!(h.provenance()[0], TokenOrigin::Cls);
        assert_eq!(h.provenance()[4], TokenOrigin::Sep);
        assert_eq!(h.provenance()[8], TokenOrigin::Sep);
        assert_eq!(
            h.provenance()[5],
            TokenOrigin::Context { start_char: 0, end_char: 3 }
        );
        assert_eq!(
            h.provenance()[6],
            TokenOrigin::Context { start_char: 4, end_char: 8 }
        );
    }

    #[test]
    fn swapping_question_and_context_changes_cls_vector() {
        let e = encoder();
        let a = e.encode("alpha beta", "gamma delta");
        let b = e.encode("gamma delta", "alpha beta");
        let diff: f64 = a
            .cls()
            .iter()
            .zip(b.cls().iter())
            .map(|(x, y)| (x - y).abs())
            .sum();
        assert!(diff > 1e-9, "position-0 vector must be order sensitive");
    }

    #[test]
    fn tokenizer_offsets_are_character_based() {
        let tokens = tokenize_with_offsets("  héllo  wörld ");
        assert_eq!(tokens.len(), 2);
        assert_eq!(tokens[0], ("héllo".to_string(), 2, 7));
        assert_eq!(tokens[1], ("wörld".to_string(), 9, 14));
        assert!(tokenize_with_offsets("   ").is_empty());
    }

    #[test]
    fn checksum_tracks_parameter_changes() {
        let e = encoder();
        let before = e.checksum();
        assert_eq!(before, encoder().checksum());

        let mut modified = e.clone();
        modified.mix_bias[0] += 1e-12;
        assert_ne!(before, modified.checksum());
    }

    #[test]
    fn backward_matches_finite_differences_on_mix_weight() {
        // Scalar probe loss: sum of all outputs. Checks the tanh/mix-layer
        // chain rule including the decayed CLS aggregation.
        let e = encoder();
        let question = "which factor";
        let context = "factor XIII binds";

        let loss_of = |enc: &ToyEncoder| -> f64 {
            enc.encode(question, context).values().sum()
        };

        let (_, cache) = e.encode_with_cache(question, context);
        let mut grads = EncoderGrads::zeros_like(&e);
        let d_outputs = Array2::ones(cache.outputs.dim());
        e.backward(&cache, &d_outputs, &mut grads);

        let step = 1e-6;
        let mut max_rel = 0.0f64;
        for idx in [(0usize, 0usize), (3, 5), (7, 7), (5, 1)] {
            let mut plus = e.clone();
            plus.mix_weight[idx] += step;
            let mut minus = e.clone();
            minus.mix_weight[idx] -= step;
            let numeric = (loss_of(&plus) - loss_of(&minus)) / (2.0 * step);
            let analytic = grads.mix_weight[idx];
            let denom = numeric.abs().max(analytic.abs()).max(1e-12);
            max_rel = max_rel.max((numeric - analytic).abs() / denom);
        }
        assert!(max_rel < 1e-5, "max relative error {max_rel}");
    }

    #[test]
    fn backward_matches_finite_differences_on_embeddings() {
        let e = encoder();
        let question = "gene role";
        let context = "TGM1 acts in skin";

        let loss_of = |enc: &ToyEncoder| -> f64 { enc.encode(question, context).values().sum() };

        let (_, cache) = e.encode_with_cache(question, context);
        let mut grads = EncoderGrads::zeros_like(&e);
        e.backward(&cache, &Array2::ones(cache.outputs.dim()), &mut grads);

        // Probe the buckets actually touched by the input.
        let touched: Vec<usize> = cache
            .buckets_per_position
            .iter()
            .flatten()
            .copied()
            .take(4)
            .collect();
        let step = 1e-6;
        for b in touched {
            let idx = (b, 2usize);
            let mut plus = e.clone();
            plus.embeddings[idx] += step;
            let mut minus = e.clone();
            minus.embeddings[idx] -= step;
            let numeric = (loss_of(&plus) - loss_of(&minus)) / (2.0 * step);
            let analytic = grads.embeddings[idx];
            let denom = numeric.abs().max(analytic.abs()).max(1e-12);
            assert!(
                (numeric - analytic).abs() / denom < 1e-5,
                "bucket {b}: numeric {numeric} vs analytic {analytic}"
            );
        }
    }
}
