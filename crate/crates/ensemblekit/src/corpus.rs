//! Opcode corpora on disk: one subdirectory per family, one whitespace
//! separated text file of mnemonics per sample.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CorpusOptions {
    /// Samples with fewer opcodes are discarded.
    pub min_len: usize,
    /// Retained samples keep only their first `truncate` opcodes.
    pub truncate: usize,
}

impl Default for CorpusOptions {
    fn default() -> Self {
        CorpusOptions {
            min_len: 1000,
            truncate: 1000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawSample {
    /// `family/filename`.
    pub id: String,
    pub family: usize,
    pub mnemonics: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Corpus {
    pub families: Vec<String>,
    /// Ordered by family, then by file name.
    pub samples: Vec<RawSample>,
    /// Short samples dropped per family.
    pub discarded: Vec<usize>,
}

impl Corpus {
    /// Applies the discard and truncation rules to in-memory sequences.
    /// `sequences[f]` holds `(id, mnemonics)` pairs of family `f`.
    pub fn from_families(
        families: Vec<String>,
        sequences: Vec<Vec<(String, Vec<String>)>>,
        options: &CorpusOptions,
    ) -> Result<Self> {
        if options.truncate == 0 {
            return Err(Error::Corpus("truncate must be at least 1".into()));
        }
        if families.len() < 2 {
            return Err(Error::Corpus(format!(
                "at least two families are required, found {}",
                families.len()
            )));
        }
        let mut samples = Vec::new();
        let mut discarded = vec![0; families.len()];
        for (f, seqs) in sequences.into_iter().enumerate() {
            let before = samples.len();
            for (id, mut mnemonics) in seqs {
                if mnemonics.len() < options.min_len {
                    discarded[f] += 1;
                    continue;
                }
                mnemonics.truncate(options.truncate);
                samples.push(RawSample {
                    id,
                    family: f,
                    mnemonics,
                });
            }
            if samples.len() == before {
                return Err(Error::Corpus(format!(
                    "family `{}` has no samples with at least {} opcodes",
                    families[f], options.min_len
                )));
            }
        }
        Ok(Corpus {
            families,
            samples,
            discarded,
        })
    }

    pub fn labels(&self) -> Vec<usize> {
        self.samples.iter().map(|s| s.family).collect()
    }

    /// `family,discarded` rows.
    pub fn discard_report(&self) -> String {
        let mut out = String::from("family,discarded\n");
        for (name, n) in self.families.iter().zip(&self.discarded) {
            let _ = writeln!(out, "{name},{n}");
        }
        out
    }
}

fn sorted_entries(dir: &Path, want_dirs: bool) -> Result<Vec<(String, PathBuf)>> {
    let mut out = Vec::new();
    for entry in fs::read_dir(dir).map_err(Error::io(dir))? {
        let entry = entry.map_err(Error::io(dir))?;
        let path = entry.path();
        let kind = entry.file_type().map_err(Error::io(&path))?;
        let is_dir = if kind.is_symlink() {
            path.is_dir()
        } else {
            kind.is_dir()
        };
        if is_dir != want_dirs {
            continue;
        }
        let name = entry
            .file_name()
            .into_string()
            .map_err(|n| Error::Corpus(format!("non UTF-8 name {n:?} in {}", dir.display())))?;
        if name.starts_with('.') {
            continue;
        }
        out.push((name, path));
    }
    out.sort();
    Ok(out)
}

/// Reads a corpus laid out as `root/<family>/<sample>`. Families are taken
/// in lexicographic order of their directory names, samples in
/// lexicographic order of their file names. Plain files directly under
/// `root` (such as a generator manifest) are ignored.
pub fn load_corpus(root: &Path, options: &CorpusOptions) -> Result<Corpus> {
    let families = sorted_entries(root, true)?;
    let sequences = families
        .par_iter()
        .map(|(family, dir)| {
            sorted_entries(dir, false)?
                .into_iter()
                .map(|(file, path)| {
                    let text = fs::read_to_string(&path).map_err(Error::io(&path))?;
                    let mnemonics = text.split_whitespace().map(str::to_string).collect();
                    Ok((format!("{family}/{file}"), mnemonics))
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    let names = families.into_iter().map(|(n, _)| n).collect();
    Corpus::from_families(names, sequences, options)
}

/// File name of sample `i` in a family of `count` samples; the padding keeps
/// lexicographic and numeric order equal.
pub fn sample_file_name(family: &str, i: usize, count: usize) -> String {
    let width = count.saturating_sub(1).to_string().len().max(5);
    format!("{family}_{i:0width$}.txt")
}

/// Writes `sequences[f][i]` to `root/<families[f]>/<family>_<i>.txt`, one
/// line of space separated mnemonics per file.
pub fn write_corpus(root: &Path, families: &[String], sequences: &[Vec<Vec<String>>]) -> Result<()> {
    for (family, seqs) in families.iter().zip(sequences) {
        let dir = root.join(family);
        fs::create_dir_all(&dir).map_err(Error::io(&dir))?;
        for (i, seq) in seqs.iter().enumerate() {
            let path = dir.join(sample_file_name(family, i, seqs.len()));
            let mut text = seq.join(" ");
            text.push('\n');
            fs::write(&path, text).map_err(Error::io(&path))?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seq(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("m{}", i % 3)).collect()
    }

    #[test]
    fn short_samples_are_discarded_and_long_ones_truncated() {
        let c = Corpus::from_families(
            vec!["a".into(), "b".into()],
            vec![
                vec![("a/1".into(), seq(999)), ("a/2".into(), seq(1500))],
                vec![("b/1".into(), seq(1000))],
            ],
            &CorpusOptions::default(),
        )
        .unwrap();
        assert_eq!(c.discarded, vec![1, 0]);
        assert_eq!(c.samples.len(), 2);
        assert!(c.samples.iter().all(|s| s.mnemonics.len() == 1000));
        assert_eq!(c.discard_report(), "family,discarded\na,1\nb,0\n");
    }

    #[test]
    fn family_emptied_by_filtering_is_an_error() {
        let r = Corpus::from_families(
            vec!["a".into(), "b".into()],
            vec![vec![("a/1".into(), seq(10))], vec![("b/1".into(), seq(1000))]],
            &CorpusOptions::default(),
        );
        assert!(matches!(r, Err(Error::Corpus(_))));
    }

    #[test]
    fn file_names_sort_numerically() {
        let names: Vec<String> = (0..12).map(|i| sample_file_name("f", i, 12)).collect();
        let mut sorted = names.clone();
        sorted.sort();
        assert_eq!(names, sorted);
        assert_eq!(sample_file_name("f", 3, 200_000), "f_000003.txt");
    }
}
