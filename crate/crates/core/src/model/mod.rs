//! The emotion-conditioned break tagger and its comparison variants.
//!
//! Data flow of the full model for an utterance `X` of `n` words:
//!
//! ```text
//! H_lin = Enc_text(X)                n × encoder_dim      (text encoder)
//! H_emo = Pre_emotion(X)             1 × emotion_dim      (emotion predictor + table)
//! H     = concat(H_lin, H_emo)       n × (encoder_dim + emotion_dim)
//! Y     = Dec(H)                     n × 2 logits         (BiLSTM, dropout, linear)
//! ```
//!
//! `H_emo` is an utterance-level vector broadcast to every word row.

mod checkpoint;
pub mod tape;
mod tokenizer;

use std::ops::Range;
use std::path::PathBuf;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{BreakSequence, Corpus, Emotion, Utterance};
use crate::{Error, Result};
pub use tape::{Gradients, Mat, ParamId, ParamStore, Tape, Var};
pub use tokenizer::{EncodedText, Tokenizer, UNK};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EncoderKind {
    /// Encoder weights and tokenizer loaded from `pretrained_path`.
    PretrainedLarge,
    /// Embedding table plus stacked BiLSTM, trained from scratch.
    SmallTrainable,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EmotionConditioning {
    /// Probability-weighted mix of table rows; differentiable.
    Soft,
    /// Gold label row when a gold label is supplied, argmax row otherwise.
    TeacherForcedTrain,
    /// Argmax label row.
    Hard,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    Emopp,
    EncoderOnly,
    RecurrentOnly,
    EmoppLinearEmotion,
}

impl Variant {
    pub fn has_emotion_path(self) -> bool {
        matches!(self, Variant::Emopp | Variant::EmoppLinearEmotion)
    }

    pub fn has_text_encoder(self) -> bool {
        !matches!(self, Variant::RecurrentOnly)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Variant::Emopp => "emopp",
            Variant::EncoderOnly => "encoder-only",
            Variant::RecurrentOnly => "recurrent-only",
            Variant::EmoppLinearEmotion => "emopp-linear-emotion",
        }
    }
}

impl std::str::FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "emopp" => Ok(Variant::Emopp),
            "encoder-only" => Ok(Variant::EncoderOnly),
            "recurrent-only" => Ok(Variant::RecurrentOnly),
            "emopp-linear-emotion" => Ok(Variant::EmoppLinearEmotion),
            other => Err(Error::config(format!("unknown variant {other:?}"))),
        }
    }
}

/// How subword vectors become one vector per word.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Pooling {
    Mean,
    First,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub encoder_kind: EncoderKind,
    /// Width of H_lin; the BiLSTM encoder uses half of it per direction.
    pub encoder_dim: usize,
    pub emotion_embedding_dim: usize,
    /// Decoder BiLSTM hidden size per direction.
    pub decoder_hidden: usize,
    pub dropout_rate: f64,
    /// Dropout inside the small text encoder (training mode only).
    pub encoder_dropout: f64,
    pub emotion_inventory: Vec<Emotion>,
    pub emotion_conditioning: EmotionConditioning,
    pub variant: Variant,
    /// Subword embedding width of the small encoder and the emotion path.
    pub token_embedding_dim: usize,
    /// Word embedding width of the recurrent-only baseline.
    pub word_embedding_dim: usize,
    pub encoder_layers: usize,
    pub pooling: Pooling,
    /// Training words seen fewer times than this become subword sequences.
    pub min_word_count: usize,
    pub max_pieces_per_word: usize,
    pub max_tokens: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pretrained_path: Option<PathBuf>,
}

impl Default for ModelConfig {
    /// Desk-scale small-trainable configuration.
    fn default() -> Self {
        ModelConfig {
            encoder_kind: EncoderKind::SmallTrainable,
            encoder_dim: 64,
            emotion_embedding_dim: 32,
            decoder_hidden: 32,
            dropout_rate: 0.3,
            encoder_dropout: 0.0,
            emotion_inventory: Emotion::canonical(),
            emotion_conditioning: EmotionConditioning::Soft,
            variant: Variant::Emopp,
            token_embedding_dim: 32,
            word_embedding_dim: 300,
            encoder_layers: 2,
            pooling: Pooling::Mean,
            min_word_count: 1,
            max_pieces_per_word: 32,
            max_tokens: 512,
            pretrained_path: None,
        }
    }
}

impl ModelConfig {
    /// Dimensions of the published setup: 768-wide hidden sequence and
    /// emotion embeddings on a pretrained encoder, 512-unit BiLSTMs.
    pub fn paper_scale(pretrained_path: impl Into<PathBuf>) -> Self {
        ModelConfig {
            encoder_kind: EncoderKind::PretrainedLarge,
            encoder_dim: 768,
            emotion_embedding_dim: 768,
            decoder_hidden: 512,
            pretrained_path: Some(pretrained_path.into()),
            ..Self::default()
        }
    }

    pub fn with_variant(mut self, variant: Variant) -> Self {
        self.variant = variant;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let dims = [
            ("encoder_dim", self.encoder_dim),
            ("emotion_embedding_dim", self.emotion_embedding_dim),
            ("decoder_hidden", self.decoder_hidden),
            ("token_embedding_dim", self.token_embedding_dim),
            ("word_embedding_dim", self.word_embedding_dim),
            ("encoder_layers", self.encoder_layers),
            ("max_pieces_per_word", self.max_pieces_per_word),
            ("max_tokens", self.max_tokens),
        ];
        if let Some((name, _)) = dims.iter().find(|(_, v)| *v == 0) {
            return Err(Error::config(format!("{name} must be positive")));
        }
        if self.variant.has_text_encoder() && !self.encoder_dim.is_multiple_of(2) {
            return Err(Error::config("encoder_dim must be even (two LSTM directions)"));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) || !(0.0..1.0).contains(&self.encoder_dropout) {
            return Err(Error::config("dropout rates must be in [0, 1)"));
        }
        if self.emotion_inventory.is_empty() {
            return Err(Error::config("emotion inventory is empty"));
        }
        if self.encoder_kind == EncoderKind::PretrainedLarge
            && self.variant != Variant::RecurrentOnly
            && self.pretrained_path.is_none()
        {
            return Err(Error::config(
                "pretrained-large encoder needs pretrained_path (tokenizer and encoder assets)",
            ));
        }
        Ok(())
    }

    fn decoder_input_dim(&self) -> usize {
        match self.variant {
            Variant::Emopp | Variant::EmoppLinearEmotion => {
                self.encoder_dim + self.emotion_embedding_dim
            }
            Variant::EncoderOnly => self.encoder_dim,
            Variant::RecurrentOnly => self.word_embedding_dim,
        }
    }
}

/// Word-level text features (H_lin), `words × encoder_dim`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinguisticFeatures {
    pub matrix: Mat,
}

/// Emotion predictor output (H_emo and the distribution behind it).
#[derive(Debug, Clone, PartialEq)]
pub struct EmotionPrediction {
    pub logits: Vec<f64>,
    pub probabilities: Vec<f64>,
    pub embedding: Vec<f64>,
    pub label: Emotion,
}

/// Concatenation of H_lin and the broadcast H_emo.
#[derive(Debug, Clone, PartialEq)]
pub struct JointEmbedding {
    pub matrix: Mat,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BreakPrediction {
    pub logits: Mat,
    pub labels: BreakSequence,
}

impl BreakPrediction {
    /// Label 1 iff the break logit is strictly larger; the final word is 0.
    pub fn from_logits(logits: Mat) -> Self {
        let labels = BreakSequence::from_flags(logits.rows().into_iter().map(|r| r[1] > r[0]));
        BreakPrediction { logits, labels }
    }
}

/// Parameter handles of one LSTM direction.
#[derive(Debug, Clone, Copy)]
struct LstmParams {
    w_ih: ParamId,
    w_hh: ParamId,
    bias: ParamId,
}

#[derive(Debug, Clone, Copy)]
struct BiLstmParams {
    fwd: LstmParams,
    bwd: LstmParams,
}

#[derive(Debug, Clone)]
struct TextEncoderParams {
    embedding: ParamId,
    layers: Vec<BiLstmParams>,
}

#[derive(Debug, Clone, Copy)]
enum EmotionEncoderParams {
    Recurrent(BiLstmParams),
    Linear { w: ParamId, b: ParamId },
}

#[derive(Debug, Clone, Copy)]
struct EmotionParams {
    embedding: ParamId,
    encoder: EmotionEncoderParams,
    classifier_w: ParamId,
    classifier_b: ParamId,
    table: ParamId,
}

#[derive(Debug, Clone, Copy)]
struct DecoderParams {
    lstm: BiLstmParams,
    out_w: ParamId,
    out_b: ParamId,
}

#[derive(Debug, Clone)]
struct Layout {
    text: Option<TextEncoderParams>,
    words: Option<ParamId>,
    emotion: Option<EmotionParams>,
    decoder: DecoderParams,
}

/// Unit-variance uniform scale for embedding tables.
const EMBEDDING_SCALE: f64 = 1.732_050_807_568_877_2;

/// Parameter initialisation: uniform(-scale, scale).
struct Init<'a> {
    params: &'a mut ParamStore,
    rng: ChaCha8Rng,
}

impl Init<'_> {
    fn uniform(&mut self, name: String, shape: (usize, usize), scale: f64) -> ParamId {
        let rng = &mut self.rng;
        let value = Mat::from_shape_fn(shape, |_| rng.gen_range(-scale..scale));
        self.params.add(name, value)
    }

    fn linear(&mut self, prefix: &str, fan_in: usize, fan_out: usize) -> (ParamId, ParamId) {
        let k = 1.0 / (fan_in as f64).sqrt();
        let w = self.uniform(format!("{prefix}.w"), (fan_in, fan_out), k);
        let b = self.uniform(format!("{prefix}.b"), (1, fan_out), k);
        (w, b)
    }

    fn lstm(&mut self, prefix: &str, input: usize, hidden: usize) -> LstmParams {
        let k = 1.0 / (hidden as f64).sqrt();
        let w_ih = self.uniform(format!("{prefix}.w_ih"), (input, 4 * hidden), k);
        let w_hh = self.uniform(format!("{prefix}.w_hh"), (hidden, 4 * hidden), k);
        let bias = self.uniform(format!("{prefix}.b"), (1, 4 * hidden), k);
        // forget-gate bias starts at 1
        self.params
            .get_mut(bias)
            .slice_mut(ndarray::s![.., hidden..2 * hidden])
            .fill(1.0);
        LstmParams { w_ih, w_hh, bias }
    }

    fn bilstm(&mut self, prefix: &str, input: usize, hidden: usize) -> BiLstmParams {
        BiLstmParams {
            fwd: self.lstm(&format!("{prefix}.fwd"), input, hidden),
            bwd: self.lstm(&format!("{prefix}.bwd"), input, hidden),
        }
    }
}

/// Dropout switch for a forward pass: `Some(rng)` in training mode.
pub type DropoutRng<'a> = Option<&'a mut ChaCha8Rng>;

/// Tape nodes produced by one forward pass.
#[derive(Debug, Clone, Copy)]
pub struct GraphOutputs {
    pub text_features: Option<Var>,
    pub emotion_logits: Option<Var>,
    pub emotion_probs: Option<Var>,
    pub emotion_embedding: Option<Var>,
    pub joint: Var,
    pub break_logits: Var,
}

#[derive(Debug, Clone)]
pub struct EmoPPModel {
    config: ModelConfig,
    tokenizer: Tokenizer,
    params: ParamStore,
    layout: Layout,
}

impl EmoPPModel {
    /// Fresh model; the tokenizer comes from `corpus` (small-trainable) or
    /// from the pretrained assets.
    pub fn for_corpus(config: ModelConfig, corpus: &Corpus, seed: u64) -> Result<Self> {
        config.validate()?;
        if config.encoder_kind == EncoderKind::PretrainedLarge && config.variant != Variant::RecurrentOnly {
            let path = config.pretrained_path.clone().expect("validated");
            return checkpoint::from_pretrained(config, &path, seed);
        }
        let tokenizer = Tokenizer::build(
            corpus,
            config.min_word_count,
            config.max_pieces_per_word,
            config.max_tokens,
        );
        Self::new(config, tokenizer, seed)
    }

    pub fn new(config: ModelConfig, tokenizer: Tokenizer, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut params = ParamStore::new();
        let mut init = Init {
            params: &mut params,
            rng: ChaCha8Rng::seed_from_u64(seed),
        };
        let vocab = tokenizer.vocab_size();
        let c = &config;

        let text = c.variant.has_text_encoder().then(|| {
            let embedding = init.uniform("encoder.embedding".into(), (vocab, c.token_embedding_dim), EMBEDDING_SCALE);
            let layers = (0..c.encoder_layers)
                .map(|l| {
                    let input = if l == 0 { c.token_embedding_dim } else { c.encoder_dim };
                    init.bilstm(&format!("encoder.l{l}"), input, c.encoder_dim / 2)
                })
                .collect();
            TextEncoderParams { embedding, layers }
        });
        let words = (c.variant == Variant::RecurrentOnly)
            .then(|| init.uniform("words.embedding".into(), (vocab, c.word_embedding_dim), EMBEDDING_SCALE));
        let emotion = c.variant.has_emotion_path().then(|| {
            let n_emotions = c.emotion_inventory.len();
            let embedding = init.uniform("emotion.embedding".into(), (vocab, c.token_embedding_dim), EMBEDDING_SCALE);
            let encoder = if c.variant == Variant::Emopp {
                EmotionEncoderParams::Recurrent(init.bilstm(
                    "emotion.encoder",
                    c.token_embedding_dim,
                    c.encoder_dim / 2,
                ))
            } else {
                let (w, b) = init.linear("emotion.linear", c.token_embedding_dim, c.encoder_dim);
                EmotionEncoderParams::Linear { w, b }
            };
            let (classifier_w, classifier_b) = init.linear("emotion.classifier", c.encoder_dim, n_emotions);
            let table = init.uniform("emotion.table".into(), (n_emotions, c.emotion_embedding_dim), 0.5);
            EmotionParams {
                embedding,
                encoder,
                classifier_w,
                classifier_b,
                table,
            }
        });
        let lstm = init.bilstm("decoder", c.decoder_input_dim(), c.decoder_hidden);
        let (out_w, out_b) = init.linear("decoder.out", 2 * c.decoder_hidden, 2);
        let layout = Layout {
            text,
            words,
            emotion,
            decoder: DecoderParams { lstm, out_w, out_b },
        };
        Ok(EmoPPModel {
            config,
            tokenizer,
            params,
            layout,
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn tokenizer(&self) -> &Tokenizer {
        &self.tokenizer
    }

    pub fn params(&self) -> &ParamStore {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.params
    }

    pub fn variant(&self) -> Variant {
        self.config.variant
    }

    pub fn emotion_index(&self, emotion: &Emotion) -> Result<usize> {
        self.config
            .emotion_inventory
            .iter()
            .position(|e| e == emotion)
            .ok_or_else(|| Error::validation(format!("emotion {emotion} is not in the model inventory")))
    }

    /// Handle of the emotion embedding table, if the variant has one.
    pub fn emotion_table(&self) -> Option<ParamId> {
        self.layout.emotion.map(|e| e.table)
    }

    /// Parameters used only by the decoder.
    pub fn decoder_params(&self) -> Vec<ParamId> {
        let d = &self.layout.decoder;
        let mut ids = vec![d.out_w, d.out_b];
        for l in [d.lstm.fwd, d.lstm.bwd] {
            ids.extend([l.w_ih, l.w_hh, l.bias]);
        }
        ids
    }

    pub fn encode_input(&self, utterance: &Utterance) -> Result<EncodedText> {
        if utterance.words.is_empty() {
            return Err(Error::validation(format!("utterance {} has no words", utterance.id)));
        }
        self.tokenizer.encode(&utterance.id, &utterance.words)
    }

    fn bilstm(&self, tape: &mut Tape, x: Var, p: BiLstmParams) -> Var {
        let f = tape.lstm(x, p.fwd.w_ih, p.fwd.w_hh, p.fwd.bias, false);
        let b = tape.lstm(x, p.bwd.w_ih, p.bwd.w_hh, p.bwd.bias, true);
        tape.concat_cols(f, b)
    }

    fn pool(&self, tape: &mut Tape, pieces: Var, spans: &[Range<usize>]) -> Var {
        match self.config.pooling {
            Pooling::Mean => tape.segment_mean(pieces, spans.to_vec()),
            Pooling::First => tape.gather(pieces, spans.iter().map(|s| s.start).collect()),
        }
    }

    /// H_lin on the tape. With an RNG, dropout follows the embedding lookup
    /// and every encoder layer.
    pub fn text_features_on(
        &self,
        tape: &mut Tape,
        input: &EncodedText,
        mut dropout: DropoutRng,
    ) -> Result<Var> {
        let Some(text) = &self.layout.text else {
            return Err(Error::config(format!(
                "variant {} has no text encoder",
                self.config.variant.as_str()
            )));
        };
        let table = tape.param(text.embedding);
        let mut h = tape.gather(table, input.pieces.clone());
        let rate = self.config.encoder_dropout;
        if rate == 0.0 {
            dropout = None;
        }
        for layer in &text.layers {
            if let Some(rng) = dropout.as_deref_mut() {
                h = tape.dropout(h, rate, rng);
            }
            h = self.bilstm(tape, h, *layer);
        }
        if let Some(rng) = dropout {
            h = tape.dropout(h, rate, rng);
        }
        Ok(self.pool(tape, h, &input.spans))
    }

    /// Emotion logits, probabilities and H_emo on the tape.
    pub fn emotion_on(
        &self,
        tape: &mut Tape,
        input: &EncodedText,
        gold: Option<usize>,
    ) -> Result<(Var, Var, Var)> {
        let Some(p) = self.layout.emotion else {
            return Err(Error::config(format!(
                "variant {} has no emotion predictor",
                self.config.variant.as_str()
            )));
        };
        let table = tape.param(p.embedding);
        let tokens = tape.gather(table, input.pieces.clone());
        let summary = match p.encoder {
            EmotionEncoderParams::Recurrent(lstm) => {
                let h = self.bilstm(tape, tokens, lstm);
                tape.mean_rows(h)
            }
            EmotionEncoderParams::Linear { w, b } => {
                let pooled = tape.mean_rows(tokens);
                tape.linear(pooled, w, b)
            }
        };
        let logits = tape.linear(summary, p.classifier_w, p.classifier_b);
        let probs = tape.softmax(logits);
        let emo_table = tape.param(p.table);
        let argmax = || {
            let row = tape.value(probs).row(0);
            let mut best = 0;
            for (i, &v) in row.iter().enumerate() {
                if v > row[best] {
                    best = i;
                }
            }
            best
        };
        let embedding = match (self.config.emotion_conditioning, gold) {
            (EmotionConditioning::Soft, _) => tape.matmul(probs, emo_table),
            (EmotionConditioning::TeacherForcedTrain, Some(g)) => tape.gather(emo_table, vec![g]),
            (EmotionConditioning::TeacherForcedTrain, None) | (EmotionConditioning::Hard, _) => {
                let best = argmax();
                tape.gather(emo_table, vec![best])
            }
        };
        Ok((logits, probs, embedding))
    }

    /// Decoder logits on the tape; dropout follows the BiLSTM when `dropout`
    /// carries an RNG.
    pub fn decoder_on(&self, tape: &mut Tape, joint: Var, dropout: DropoutRng) -> Var {
        let d = self.layout.decoder;
        let mut h = self.bilstm(tape, joint, d.lstm);
        if let Some(rng) = dropout {
            h = tape.dropout(h, self.config.dropout_rate, rng);
        }
        tape.linear(h, d.out_w, d.out_b)
    }

    /// Full forward pass for the configured variant.
    pub fn graph(
        &self,
        tape: &mut Tape,
        input: &EncodedText,
        gold_emotion: Option<usize>,
        mut dropout: DropoutRng,
    ) -> Result<GraphOutputs> {
        let n_words = input.spans.len();
        let (text_features, emotion, joint) = match self.config.variant {
            Variant::RecurrentOnly => {
                let table = tape.param(self.layout.words.expect("word embeddings"));
                let x = tape.gather(table, input.word_ids.clone());
                (None, None, x)
            }
            Variant::EncoderOnly => {
                let h = self.text_features_on(tape, input, dropout.as_deref_mut())?;
                (Some(h), None, h)
            }
            Variant::Emopp | Variant::EmoppLinearEmotion => {
                let h = self.text_features_on(tape, input, dropout.as_deref_mut())?;
                let (logits, probs, emb) = self.emotion_on(tape, input, gold_emotion)?;
                let wide = tape.broadcast_rows(emb, n_words);
                let joint = tape.concat_cols(h, wide);
                (Some(h), Some((logits, probs, emb)), joint)
            }
        };
        let break_logits = self.decoder_on(tape, joint, dropout);
        Ok(GraphOutputs {
            text_features,
            emotion_logits: emotion.map(|e| e.0),
            emotion_probs: emotion.map(|e| e.1),
            emotion_embedding: emotion.map(|e| e.2),
            joint,
            break_logits,
        })
    }

    /// H_lin in evaluation mode.
    pub fn encode_text(&self, utterance: &Utterance) -> Result<LinguisticFeatures> {
        let input = self.encode_input(utterance)?;
        let mut tape = Tape::new(&self.params);
        let h = self.text_features_on(&mut tape, &input, None)?;
        Ok(LinguisticFeatures {
            matrix: tape.value(h).clone(),
        })
    }

    pub fn predict_emotion(
        &self,
        utterance: &Utterance,
        gold_emotion: Option<&Emotion>,
    ) -> Result<EmotionPrediction> {
        let gold = gold_emotion.map(|e| self.emotion_index(e)).transpose()?;
        let input = self.encode_input(utterance)?;
        let mut tape = Tape::new(&self.params);
        let (logits, probs, emb) = self.emotion_on(&mut tape, &input, gold)?;
        Ok(self.emotion_prediction(&tape, logits, probs, emb))
    }

    fn emotion_prediction(&self, tape: &Tape, logits: Var, probs: Var, emb: Var) -> EmotionPrediction {
        let probabilities: Vec<f64> = tape.value(probs).row(0).to_vec();
        let best = probabilities
            .iter()
            .enumerate()
            .fold(0, |best, (i, &p)| if p > probabilities[best] { i } else { best });
        EmotionPrediction {
            logits: tape.value(logits).row(0).to_vec(),
            probabilities,
            embedding: tape.value(emb).row(0).to_vec(),
            label: self.config.emotion_inventory[best].clone(),
        }
    }

    /// Soft emotion embedding for an arbitrary distribution over the inventory.
    pub fn soft_emotion_embedding(&self, probabilities: &[f64]) -> Result<Vec<f64>> {
        let table = self
            .emotion_table()
            .ok_or_else(|| Error::config("variant has no emotion table"))?;
        let table = self.params.get(table);
        if probabilities.len() != table.nrows() {
            return Err(Error::LengthMismatch {
                left: probabilities.len(),
                right: table.nrows(),
                context: Some("probabilities vs emotion inventory".into()),
            });
        }
        let p = ndarray::Array1::from(probabilities.to_vec());
        Ok(p.dot(table).to_vec())
    }

    /// Runs the decoder on a given joint embedding. Pass an RNG for
    /// training-mode dropout.
    pub fn decode_breaks(&self, joint: &JointEmbedding, dropout: DropoutRng) -> Result<BreakPrediction> {
        let expected = self.config.decoder_input_dim();
        if joint.matrix.ncols() != expected || joint.matrix.nrows() == 0 {
            return Err(Error::validation(format!(
                "joint embedding is {:?}, decoder expects n × {expected}",
                joint.matrix.dim()
            )));
        }
        let mut tape = Tape::new(&self.params);
        let x = tape.input(joint.matrix.clone());
        let logits = self.decoder_on(&mut tape, x, dropout);
        Ok(BreakPrediction::from_logits(tape.value(logits).clone()))
    }

    /// Evaluation-mode forward pass.
    pub fn forward(
        &self,
        utterance: &Utterance,
        gold_emotion: Option<&Emotion>,
    ) -> Result<(Option<EmotionPrediction>, BreakPrediction)> {
        let gold = gold_emotion.map(|e| self.emotion_index(e)).transpose()?;
        let input = self.encode_input(utterance)?;
        let mut tape = Tape::new(&self.params);
        let out = self.graph(&mut tape, &input, gold, None)?;
        let emotion = match (out.emotion_logits, out.emotion_probs, out.emotion_embedding) {
            (Some(l), Some(p), Some(e)) => Some(self.emotion_prediction(&tape, l, p, e)),
            _ => None,
        };
        let breaks = BreakPrediction::from_logits(tape.value(out.break_logits).clone());
        Ok((emotion, breaks))
    }

    pub fn predict_breaks(&self, utterance: &Utterance) -> Result<BreakSequence> {
        Ok(self.forward(utterance, None)?.1.labels)
    }

    pub fn save(&self, dir: impl AsRef<std::path::Path>) -> Result<()> {
        checkpoint::save(self, dir.as_ref())
    }

    pub fn load(dir: impl AsRef<std::path::Path>) -> Result<Self> {
        checkpoint::load(dir.as_ref())
    }
}

/// Broadcasts the emotion embedding to every word and appends it to H_lin.
pub fn fuse(lin: &LinguisticFeatures, emo: &EmotionPrediction) -> JointEmbedding {
    let rows = lin.matrix.nrows();
    let emb = ndarray::Array1::from(emo.embedding.clone());
    let wide = emb
        .broadcast((rows, emb.len()))
        .expect("broadcast")
        .to_owned();
    let matrix = ndarray::concatenate(ndarray::Axis(1), &[lin.matrix.view(), wide.view()])
        .expect("same row count");
    JointEmbedding { matrix }
}
