//! Seeded text-classification corpora with controllable difficulty.
//!
//! Every class owns a disjoint set of signal words; the remaining words are
//! noise. A plain sample fills each position with one of its class's signal
//! words, or with a noise word at `noise_rate`. An ambiguous sample splits
//! its signal positions between its own class (two thirds, rounded up) and
//! one distractor class, so its label is still recoverable from word counts
//! but not from which classes merely appear.

use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Sample};
use crate::error::{Error, Result};

/// Inclusive range of words per generated sample.
pub const SAMPLE_WORDS: (usize, usize) = (8, 16);

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub num_classes: usize,
    pub samples_per_class: usize,
    /// Distinct words available (signal plus noise), excluding PAD/UNK.
    pub vocab_size: usize,
    pub signal_tokens_per_class: usize,
    pub noise_rate: f64,
    pub ambiguous_fraction: f64,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            num_classes: 4,
            samples_per_class: 150,
            vocab_size: 120,
            signal_tokens_per_class: 8,
            noise_rate: 0.1,
            ambiguous_fraction: 0.1,
            seed: 0,
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        if self.num_classes < 2 {
            return Err(Error::config("synthetic data needs at least 2 classes"));
        }
        if self.samples_per_class == 0 || self.signal_tokens_per_class == 0 {
            return Err(Error::config("synthetic counts must be positive"));
        }
        if !(0.0..=1.0).contains(&self.noise_rate) || !(0.0..=1.0).contains(&self.ambiguous_fraction) {
            return Err(Error::config("noise_rate and ambiguous_fraction must lie in [0, 1]"));
        }
        let signal = self.num_classes * self.signal_tokens_per_class;
        if signal >= self.vocab_size {
            return Err(Error::config(format!(
                "vocab_size {} too small for {} classes x {} signal words plus noise",
                self.vocab_size, self.num_classes, self.signal_tokens_per_class
            )));
        }
        Ok(())
    }

    fn noise_words(&self) -> usize {
        self.vocab_size - self.num_classes * self.signal_tokens_per_class
    }

    /// Parses `key=value` pairs separated by commas, e.g.
    /// `classes=4,noise=0.1,ambiguous=0.3`. The bare word `easy` sets noise
    /// and ambiguity to zero. Unspecified keys keep the defaults, with
    /// `default_seed` as the seed.
    pub fn parse(desc: &str, default_seed: u64) -> Result<Self> {
        let mut spec = Self {
            seed: default_seed,
            ..Self::default()
        };
        for part in desc.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            if part == "easy" {
                spec.noise_rate = 0.0;
                spec.ambiguous_fraction = 0.0;
                continue;
            }
            let (key, value) = part
                .split_once('=')
                .ok_or_else(|| Error::config(format!("expected key=value, got {part:?}")))?;
            match key {
                "classes" | "num_classes" => spec.num_classes = parse(key, value)?,
                "per_class" | "samples_per_class" => spec.samples_per_class = parse(key, value)?,
                "vocab" | "vocab_size" => spec.vocab_size = parse(key, value)?,
                "signal" | "signal_tokens_per_class" => spec.signal_tokens_per_class = parse(key, value)?,
                "noise" | "noise_rate" => spec.noise_rate = parse(key, value)?,
                "ambiguous" | "ambiguous_fraction" => spec.ambiguous_fraction = parse(key, value)?,
                "seed" => spec.seed = parse(key, value)?,
                other => return Err(Error::config(format!("unknown synthetic key {other:?}"))),
            }
        }
        spec.validate()?;
        Ok(spec)
    }
}

fn parse<V: std::str::FromStr>(key: &str, value: &str) -> Result<V> {
    value
        .parse()
        .map_err(|_| Error::config(format!("bad value for {key}: {value:?}")))
}

pub fn signal_word(class: usize, j: usize) -> String {
    format!("c{class}w{j}")
}

pub fn noise_word(j: usize) -> String {
    format!("n{j}")
}

/// Generates the corpus and splits it 70/15/15 with the same seed.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<Dataset> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let n_total = spec.num_classes * spec.samples_per_class;
    let n_ambiguous = (n_total as f64 * spec.ambiguous_fraction).round() as usize;
    let mut ambiguous = vec![false; n_total];
    for slot in ambiguous.iter_mut().take(n_ambiguous) {
        *slot = true;
    }
    ambiguous.shuffle(&mut rng);

    let mut samples = Vec::with_capacity(n_total);
    for (i, &is_ambiguous) in ambiguous.iter().enumerate() {
        let label = i / spec.samples_per_class;
        let len = rng.gen_range(SAMPLE_WORDS.0..=SAMPLE_WORDS.1);
        let noisy: Vec<bool> = (0..len).map(|_| rng.gen_bool(spec.noise_rate)).collect();
        let n_signal = noisy.iter().filter(|&&b| !b).count();

        let mut classes = vec![label; n_signal];
        if is_ambiguous && n_signal >= 2 {
            let mut distractor = rng.gen_range(0..spec.num_classes - 1);
            if distractor >= label {
                distractor += 1;
            }
            let own = (2 * n_signal).div_ceil(3);
            for c in classes.iter_mut().skip(own) {
                *c = distractor;
            }
            classes.shuffle(&mut rng);
        }

        let mut signal = classes.into_iter();
        let words: Vec<String> = noisy
            .iter()
            .map(|&is_noise| {
                if is_noise {
                    noise_word(rng.gen_range(0..spec.noise_words()))
                } else {
                    let class = signal.next().expect("one class per signal position");
                    signal_word(class, rng.gen_range(0..spec.signal_tokens_per_class))
                }
            })
            .collect();
        samples.push(Sample {
            text: words.join(" "),
            label,
        });
    }

    let label_names = (0..spec.num_classes).map(|c| format!("class{c}")).collect();
    Dataset::from_samples(samples, label_names, spec.seed)
}
