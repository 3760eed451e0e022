//! Language-model training: truncated BPTT over parallel token streams, Adam,
//! gradient-norm clipping, validation perplexity and epoch checkpoints.

mod adam;
mod checkpoint;

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::cells::{Architecture, CellState, Dims, Model, ParamSet, Scratch};
use crate::corpus::{TokenStream, Vocabulary};
use crate::error::{Error, Result};
use crate::exec::{self, Execution};
use crate::numerics::log_sum_exp;

pub use adam::{adam_update, Adam, AdamConfig};
pub use checkpoint::{Checkpoint, FORMAT_VERSION, MAGIC};

/// Sequences per gradient group. Groups are reduced in a fixed order, which
/// keeps results independent of the worker count.
const GROUP_SIZE: usize = 5;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub architecture: Architecture,
    pub hidden: usize,
    pub embed: usize,
    pub learning_rate: f64,
    /// Truncated BPTT window in tokens.
    pub window: usize,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub checkpoint_epochs: Vec<usize>,
    pub seed: u64,
    /// Global gradient-norm clip; `0` disables clipping.
    pub clip_norm: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            architecture: Architecture::Lstm,
            hidden: 300,
            embed: 500,
            learning_rate: 0.001,
            window: 35,
            batch_size: 20,
            max_epochs: 40,
            checkpoint_epochs: vec![0, 10, 20, 30, 40],
            seed: 1,
            clip_norm: 5.0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("hidden", self.hidden),
            ("embed", self.embed),
            ("window", self.window),
            ("batch_size", self.batch_size),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(Error::param(format!("{name} must be positive")));
            }
        }
        if !(self.learning_rate > 0.0) || !self.learning_rate.is_finite() {
            return Err(Error::param("learning_rate must be positive"));
        }
        if !(self.clip_norm >= 0.0) {
            return Err(Error::param("clip_norm must be non-negative"));
        }
        if let Some(e) = self.checkpoint_epochs.iter().find(|&&e| e > self.max_epochs) {
            return Err(Error::param(format!(
                "checkpoint epoch {e} beyond max_epochs {}",
                self.max_epochs
            )));
        }
        Ok(())
    }

    /// `key = value` lines; floats use the shortest round-trip representation.
    pub fn to_kv_string(&self) -> String {
        let mut s = String::new();
        let epochs: Vec<String> = self.checkpoint_epochs.iter().map(usize::to_string).collect();
        writeln!(s, "architecture = {}", self.architecture).unwrap();
        writeln!(s, "hidden = {}", self.hidden).unwrap();
        writeln!(s, "embed = {}", self.embed).unwrap();
        writeln!(s, "learning_rate = {:?}", self.learning_rate).unwrap();
        writeln!(s, "window = {}", self.window).unwrap();
        writeln!(s, "batch_size = {}", self.batch_size).unwrap();
        writeln!(s, "max_epochs = {}", self.max_epochs).unwrap();
        writeln!(s, "checkpoint_epochs = {}", epochs.join(",")).unwrap();
        writeln!(s, "seed = {}", self.seed).unwrap();
        writeln!(s, "clip_norm = {:?}", self.clip_norm).unwrap();
        s
    }

    pub fn from_kv_str(s: &str) -> Result<Self> {
        let kv = parse_kv(s)?;
        let mut cfg = TrainConfig::default();
        cfg.apply(&kv)?;
        Ok(cfg)
    }

    /// Overrides fields present in `kv`; unknown keys are ignored.
    pub fn apply(&mut self, kv: &BTreeMap<String, String>) -> Result<()> {
        fn num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
            v.trim()
                .parse()
                .map_err(|_| Error::param(format!("bad value for {key}: `{v}`")))
        }
        for (k, v) in kv {
            match k.as_str() {
                "architecture" => self.architecture = v.parse()?,
                "hidden" => self.hidden = num(k, v)?,
                "embed" => self.embed = num(k, v)?,
                "learning_rate" => self.learning_rate = num(k, v)?,
                "window" => self.window = num(k, v)?,
                "batch_size" => self.batch_size = num(k, v)?,
                "max_epochs" => self.max_epochs = num(k, v)?,
                "checkpoint_epochs" => {
                    self.checkpoint_epochs = v
                        .split(',')
                        .filter(|p| !p.trim().is_empty())
                        .map(|p| num(k, p))
                        .collect::<Result<_>>()?;
                    self.checkpoint_epochs.sort_unstable();
                    self.checkpoint_epochs.dedup();
                }
                "seed" => self.seed = num(k, v)?,
                "clip_norm" => self.clip_norm = num(k, v)?,
                _ => {}
            }
        }
        self.validate()
    }
}

/// Parses flat `key = value` text with `#` comments.
pub fn parse_kv(s: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (n, line) in s.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::param(format!("line {}: expected `key = value`", n + 1)))?;
        out.insert(k.trim().to_string(), v.trim().to_string());
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochLog {
    pub epoch: usize,
    /// Mean training cross-entropy per token (nats); `NaN` for epoch 0.
    pub train_loss: f64,
    pub validation_perplexity: f64,
    pub updates: usize,
    pub clipped_updates: usize,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub checkpoints: Vec<Checkpoint>,
    pub history: Vec<EpochLog>,
    /// Epoch with the lowest validation perplexity (early-stopping choice).
    pub best_epoch: usize,
    pub best_perplexity: f64,
}

/// `exp` of the mean next-token cross-entropy under teacher forcing, with the
/// hidden state starting from zeros and carried across the whole segment.
/// Token `t+1` is predicted from tokens `..=t`.
pub fn perplexity(model: &Model, segment: &[usize]) -> Result<f64> {
    if segment.len() < 2 {
        return Err(Error::param("perplexity needs a segment of at least 2 tokens"));
    }
    let vocab = model.vocab_size();
    if let Some(&t) = segment.iter().find(|&&t| t >= vocab) {
        return Err(Error::State(format!("token {t} outside vocabulary")));
    }
    let mut state = model.zero_state();
    let mut scratch = Scratch::default();
    let mut nll = 0.0;
    for pair in segment.windows(2) {
        model.advance_token(&mut state, pair[0], &mut scratch);
        let logits = model.logits(&state.h, &mut scratch);
        nll += log_sum_exp(logits) - logits[pair[1]];
    }
    let ppl = (nll / (segment.len() - 1) as f64).exp();
    if !ppl.is_finite() {
        return Err(Error::NonFinite("perplexity"));
    }
    Ok(ppl)
}

/// Splits `tokens` into `batch` contiguous streams of equal length.
fn batchify(tokens: &[usize], batch: usize) -> Vec<&[usize]> {
    let len = tokens.len() / batch;
    (0..batch).map(|b| &tokens[b * len..(b + 1) * len]).collect()
}

struct GroupResult {
    grads: Model,
    nll: f64,
    ends: Vec<CellState>,
}

fn global_norm(grads: &Model) -> f64 {
    grads
        .tensors()
        .iter()
        .flat_map(|t| t.data.iter())
        .map(|g| g * g)
        .sum::<f64>()
        .sqrt()
}

/// Trains one model. Checkpoints are taken at the configured epochs (epoch 0
/// is the untrained initialization) and passed to `on_checkpoint` as they are
/// produced; training always runs to `max_epochs`.
pub fn train_with(
    config: &TrainConfig,
    stream: &TokenStream,
    vocabulary: &Vocabulary,
    exec: Execution,
    mut on_checkpoint: impl FnMut(&Checkpoint) -> Result<()>,
) -> Result<TrainOutcome> {
    config.validate()?;
    let vocab = stream.vocab_size();
    if vocab != vocabulary.len() {
        return Err(Error::State(format!(
            "token stream built for {vocab} ids but vocabulary has {}",
            vocabulary.len()
        )));
    }
    let vocab_hash = vocabulary.hash();
    let train = stream.train();
    let valid = stream.validation();
    let stream_len = train.len() / config.batch_size;
    if stream_len < 2 {
        return Err(Error::param(format!(
            "{} training tokens are too few for batch size {}",
            train.len(),
            config.batch_size
        )));
    }
    let dims = Dims {
        vocab,
        embed: config.embed,
        hidden: config.hidden,
    };
    let mut model = Model::init(config.architecture, dims, config.seed)?;
    let mut adam = Adam::new(&model, AdamConfig::with_lr(config.learning_rate));
    let mut checkpoints = Vec::new();
    let mut history = Vec::new();
    let mut best = (0, f64::INFINITY);

    let mut emit = |epoch: usize, model: &Model, ppl: f64, checkpoints: &mut Vec<Checkpoint>| -> Result<()> {
        if config.checkpoint_epochs.contains(&epoch) {
            let ckpt = Checkpoint {
                config: config.clone(),
                epoch,
                model: model.clone(),
                vocab_hash,
                validation_perplexity: ppl,
            };
            on_checkpoint(&ckpt)?;
            checkpoints.push(ckpt);
        }
        Ok(())
    };

    let ppl0 = perplexity(&model, valid)?;
    history.push(EpochLog {
        epoch: 0,
        train_loss: f64::NAN,
        validation_perplexity: ppl0,
        updates: 0,
        clipped_updates: 0,
    });
    best = if ppl0 < best.1 { (0, ppl0) } else { best };
    emit(0, &model, ppl0, &mut checkpoints)?;

    let streams = batchify(train, config.batch_size);
    let groups: Vec<std::ops::Range<usize>> = (0..config.batch_size)
        .step_by(GROUP_SIZE)
        .map(|s| s..(s + GROUP_SIZE).min(config.batch_size))
        .collect();

    for epoch in 1..=config.max_epochs {
        let mut states: Vec<CellState> = (0..config.batch_size).map(|_| model.zero_state()).collect();
        let mut epoch_nll = 0.0;
        let mut epoch_tokens = 0usize;
        let mut updates = 0;
        let mut clipped = 0;

        let mut pos = 0;
        while pos + 1 < stream_len {
            let len = config.window.min(stream_len - 1 - pos);
            let scale = 1.0 / (len * config.batch_size) as f64;
            let results: Vec<Result<GroupResult>> = exec::map_indexed(groups.len(), exec, |gi| {
                let mut grads = model.zeros_like();
                let mut nll = 0.0;
                let mut ends = Vec::with_capacity(groups[gi].len());
                for b in groups[gi].clone() {
                    let inputs = &streams[b][pos..pos + len];
                    let targets = &streams[b][pos + 1..pos + len + 1];
                    let (tape, end) = model.forward(&states[b], inputs)?;
                    nll += tape.nll(targets)?;
                    let dl = tape.cross_entropy_grads(targets, scale)?;
                    model.backward_into(&tape, &dl, &mut grads)?;
                    ends.push(end);
                }
                Ok(GroupResult { grads, nll, ends })
            });

            let mut total: Option<Model> = None;
            let mut window_nll = 0.0;
            let mut b = 0;
            for r in results {
                let r = r?;
                window_nll += r.nll;
                for end in r.ends {
                    states[b] = end;
                    b += 1;
                }
                match &mut total {
                    None => total = Some(r.grads),
                    Some(t) => {
                        for (dst, src) in t.tensors_mut().into_iter().zip(r.grads.tensors()) {
                            crate::numerics::axpy(1.0, src.data, dst.data);
                        }
                    }
                }
            }
            let mut grads = total.expect("at least one group");
            updates += 1;

            let loss = window_nll * scale;
            let norm = global_norm(&grads);
            if !loss.is_finite() || !norm.is_finite() {
                return Err(Error::Divergence {
                    epoch,
                    step: updates,
                    loss,
                });
            }
            if config.clip_norm > 0.0 && norm > config.clip_norm {
                let f = config.clip_norm / norm;
                for t in grads.tensors_mut() {
                    t.data.iter_mut().for_each(|g| *g *= f);
                }
                clipped += 1;
            }
            adam.update(&mut model, &grads)?;

            epoch_nll += window_nll;
            epoch_tokens += len * config.batch_size;
            pos += len;
        }

        let ppl = perplexity(&model, valid).map_err(|e| match e {
            Error::NonFinite(_) => Error::Divergence {
                epoch,
                step: updates,
                loss: f64::NAN,
            },
            other => other,
        })?;
        if ppl < best.1 {
            best = (epoch, ppl);
        }
        history.push(EpochLog {
            epoch,
            train_loss: epoch_nll / epoch_tokens as f64,
            validation_perplexity: ppl,
            updates,
            clipped_updates: clipped,
        });
        emit(epoch, &model, ppl, &mut checkpoints)?;
    }

    Ok(TrainOutcome {
        checkpoints,
        history,
        best_epoch: best.0,
        best_perplexity: best.1,
    })
}

pub fn train(config: &TrainConfig, stream: &TokenStream, vocabulary: &Vocabulary) -> Result<TrainOutcome> {
    train_with(config, stream, vocabulary, Execution::Auto, |_| Ok(()))
}
