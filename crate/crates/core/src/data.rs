//! Vocabularies, stratified splits and the seeded Markov-chain family
//! generator that stands in for a real opcode corpus.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{derive_seed, SplitMix64};

/// Mnemonic of the reserved id 0 that absorbs every unseen token.
pub const OTHER_TOKEN: &str = "<other>";

/// Mnemonic → dense id map. Id 0 is [`OTHER_TOKEN`]; the remaining ids follow
/// the sorted order of the retained mnemonics.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "VocabularyFile", into = "VocabularyFile")]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: BTreeMap<String, u32>,
}

#[derive(Serialize, Deserialize)]
struct VocabularyFile {
    tokens: Vec<String>,
}

impl From<VocabularyFile> for Vocabulary {
    fn from(f: VocabularyFile) -> Self {
        Vocabulary::from_tokens(f.tokens)
    }
}

impl From<Vocabulary> for VocabularyFile {
    fn from(v: Vocabulary) -> Self {
        VocabularyFile { tokens: v.tokens }
    }
}

impl Vocabulary {
    fn from_tokens(tokens: Vec<String>) -> Self {
        let index = tokens.iter().enumerate().map(|(i, t)| (t.clone(), i as u32)).collect();
        Vocabulary { tokens, index }
    }

    /// Every distinct mnemonic of `sequences`, or only the `cap` most frequent
    /// ones (ties by name) when a cap is given.
    pub fn build<'a, I, S>(sequences: I, cap: Option<usize>) -> Self
    where
        I: IntoIterator<Item = &'a [S]>,
        S: AsRef<str> + 'a,
    {
        let mut counts: BTreeMap<&str, u64> = BTreeMap::new();
        for seq in sequences {
            for m in seq {
                let m = m.as_ref();
                if m != OTHER_TOKEN {
                    *counts.entry(m).or_default() += 1;
                }
            }
        }
        let mut kept: Vec<&str> = match cap {
            Some(cap) if cap < counts.len() => {
                let mut by_count: Vec<(&str, u64)> = counts.into_iter().collect();
                by_count.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
                by_count.truncate(cap);
                by_count.into_iter().map(|(m, _)| m).collect()
            }
            _ => counts.into_keys().collect(),
        };
        kept.sort_unstable();
        let mut tokens = vec![String::from(OTHER_TOKEN)];
        tokens.extend(kept.into_iter().map(String::from));
        Vocabulary::from_tokens(tokens)
    }

    /// Vocabulary size `V`, including the reserved id.
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Id of `mnemonic`, 0 when unseen.
    pub fn id(&self, mnemonic: &str) -> u32 {
        self.index.get(mnemonic).copied().unwrap_or(0)
    }

    pub fn contains(&self, mnemonic: &str) -> bool {
        self.index.contains_key(mnemonic)
    }

    pub fn mnemonic(&self, id: u32) -> Option<&str> {
        self.tokens.get(id as usize).map(String::as_str)
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn encode<S: AsRef<str>>(&self, mnemonics: &[S]) -> Vec<u32> {
        mnemonics.iter().map(|m| self.id(m.as_ref())).collect()
    }
}

/// Per-family proportional train/test split over sample indices.
///
/// Family `f` sends `round(test_fraction · n_f)` samples, clamped to
/// `1..=n_f-1`, to the test side, drawn from `derive_seed(seed, f)`. Both
/// index lists are ascending.
pub fn stratified_split(labels: &[usize], test_fraction: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::invalid("test_fraction", "must lie in (0, 1)"));
    }
    let n_families = labels.iter().max().map_or(0, |&m| m + 1);
    let mut train = Vec::new();
    let mut test = Vec::new();
    for f in 0..n_families {
        let mut members: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == f).collect();
        if members.is_empty() {
            continue;
        }
        if members.len() < 2 {
            return Err(Error::FamilyTooSmall(f));
        }
        let n = members.len();
        let n_test = (libm::round(test_fraction * n as f64) as usize).clamp(1, n - 1);
        SplitMix64::new(derive_seed(seed, f as u64)).shuffle(&mut members);
        test.extend_from_slice(&members[..n_test]);
        train.extend_from_slice(&members[n_test..]);
    }
    if train.is_empty() {
        return Err(Error::Empty("labels"));
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok((train, test))
}

/// A first-order Markov chain over `0..V` that generates one family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticFamilySpec {
    pub name: String,
    pub initial: Vec<f64>,
    pub transition: Vec<Vec<f64>>,
    pub length: usize,
    pub count: usize,
}

fn check_row(row: &[f64], index: usize) -> Result<()> {
    let sum: f64 = row.iter().sum();
    if row.iter().any(|&p| !(p >= 0.0)) || (sum - 1.0).abs() > 1e-9 {
        return Err(Error::NotStochastic { row: index, sum });
    }
    Ok(())
}

impl SyntheticFamilySpec {
    pub fn vocab_size(&self) -> usize {
        self.initial.len()
    }

    pub fn validate(&self) -> Result<()> {
        let v = self.vocab_size();
        if v == 0 {
            return Err(Error::Empty("vocabulary"));
        }
        if self.count < 1 {
            return Err(Error::invalid("count", "must be at least 1"));
        }
        if self.length < 1 {
            return Err(Error::invalid("length", "must be at least 1"));
        }
        if self.transition.len() != v {
            return Err(Error::DimensionMismatch {
                expected: v,
                found: self.transition.len(),
            });
        }
        // The initial distribution is reported as row `V`.
        check_row(&self.initial, v)?;
        for (i, row) in self.transition.iter().enumerate() {
            if row.len() != v {
                return Err(Error::DimensionMismatch {
                    expected: v,
                    found: row.len(),
                });
            }
            check_row(row, i)?;
        }
        Ok(())
    }

    /// One chain run of `length` tokens.
    pub fn sample(&self, rng: &mut SplitMix64) -> Vec<u32> {
        let mut out = Vec::with_capacity(self.length);
        let mut state = rng.categorical(&self.initial);
        out.push(state as u32);
        for _ in 1..self.length {
            state = rng.categorical(&self.transition[state]);
            out.push(state as u32);
        }
        out
    }
}

/// Token sequences for every family. Sample `s` of family `f` is drawn from
/// `derive_seed(derive_seed(seed, f), s)`.
pub fn generate_sequences(specs: &[SyntheticFamilySpec], seed: u64) -> Result<Vec<Vec<Vec<u32>>>> {
    if specs.len() < 2 {
        return Err(Error::invalid("families", "at least two are required"));
    }
    for (f, s) in specs.iter().enumerate() {
        s.validate().map_err(Error::in_component(f))?;
    }
    Ok(specs
        .iter()
        .enumerate()
        .map(|(f, spec)| {
            let family_seed = derive_seed(seed, f as u64);
            (0..spec.count)
                .map(|s| spec.sample(&mut SplitMix64::new(derive_seed(family_seed, s as u64))))
                .collect()
        })
        .collect())
}

/// Mnemonic written for synthetic token `id`; zero padding keeps the sorted
/// order of mnemonics equal to the numeric order of ids.
pub fn synthetic_mnemonic(id: u32) -> String {
    format!("op{id:03}")
}

/// Parameters of a generated family scene.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneParams {
    pub vocab_size: usize,
    pub counts: Vec<usize>,
    pub length: usize,
    /// Weight of each family's own chain against the chain shared by all
    /// families; 0 makes families indistinguishable.
    pub separation: f64,
    /// Exponent applied to uniform draws before normalizing a row; larger
    /// values give peakier, more opcode-like transition rows.
    pub peakedness: f64,
    pub seed: u64,
}

impl SceneParams {
    /// Eight imbalanced families (50 to 300 samples) over 20 tokens with
    /// length-1000 sequences.
    pub fn default_scene(seed: u64) -> Self {
        SceneParams {
            vocab_size: 20,
            counts: vec![300, 250, 180, 140, 100, 80, 60, 50],
            length: 1000,
            separation: 0.2,
            peakedness: 3.0,
            seed,
        }
    }
}

fn random_row(v: usize, peakedness: f64, rng: &mut SplitMix64) -> Vec<f64> {
    let mut row: Vec<f64> = (0..v).map(|_| libm::pow(rng.next_f64(), peakedness) + 1e-3).collect();
    let total: f64 = row.iter().sum();
    row.iter_mut().for_each(|p| *p /= total);
    row
}

fn mix(shared: &[f64], own: &[f64], w: f64) -> Vec<f64> {
    let mut row: Vec<f64> = shared.iter().zip(own).map(|(s, o)| (1.0 - w) * s + w * o).collect();
    let total: f64 = row.iter().sum();
    row.iter_mut().for_each(|p| *p /= total);
    row
}

/// Family `f` mixes a shared chain with its own random chain in proportion
/// `separation`. All matrices come from `params.seed`.
pub fn scene_specs(params: &SceneParams) -> Result<Vec<SyntheticFamilySpec>> {
    if !(0.0..=1.0).contains(&params.separation) {
        return Err(Error::invalid("separation", "must lie in [0, 1]"));
    }
    let v = params.vocab_size;
    if v == 0 {
        return Err(Error::Empty("vocabulary"));
    }
    let mut rng = SplitMix64::new(derive_seed(params.seed, u64::MAX));
    let shared_initial = random_row(v, params.peakedness, &mut rng);
    let shared: Vec<Vec<f64>> = (0..v).map(|_| random_row(v, params.peakedness, &mut rng)).collect();
    let specs = params
        .counts
        .iter()
        .enumerate()
        .map(|(f, &count)| {
            let mut rng = SplitMix64::new(derive_seed(params.seed, f as u64));
            let initial = mix(
                &shared_initial,
                &random_row(v, params.peakedness, &mut rng),
                params.separation,
            );
            let transition = shared
                .iter()
                .map(|row| mix(row, &random_row(v, params.peakedness, &mut rng), params.separation))
                .collect();
            SyntheticFamilySpec {
                name: format!("family{f:02}"),
                initial,
                transition,
                length: params.length,
                count,
            }
        })
        .collect::<Vec<_>>();
    for s in &specs {
        s.validate()?;
    }
    Ok(specs)
}
