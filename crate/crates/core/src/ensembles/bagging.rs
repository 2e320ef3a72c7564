//! Bagging: one scorer family with one parameter set, trained on different
//! column (sample) and/or row (feature) subsets of `V`.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::combiners::{combine_average, combine_max, CombinerKind};
use crate::error::{Error, Result};
use crate::model::{ClassScorer, FeatureMatrix, Instance, Scorer};
use crate::rng::{derive_seed, SplitMix64};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SampleBagging {
    pub fraction: f64,
    /// Bootstrap draws with replacement instead of a plain subset.
    pub replacement: bool,
}

impl Default for SampleBagging {
    fn default() -> Self {
        SampleBagging {
            fraction: 0.8,
            replacement: false,
        }
    }
}

/// Which parts of `V` each component sees. Both `None` means no bagging.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Bagging {
    pub samples: Option<SampleBagging>,
    /// Fraction of feature rows kept per component.
    pub features: Option<f64>,
}

impl Bagging {
    pub const NONE: Bagging = Bagging {
        samples: None,
        features: None,
    };

    pub fn samples(fraction: f64) -> Self {
        Bagging {
            samples: Some(SampleBagging {
                fraction,
                replacement: false,
            }),
            features: None,
        }
    }

    pub fn features(fraction: f64) -> Self {
        Bagging {
            samples: None,
            features: Some(fraction),
        }
    }

    pub fn both(samples: f64, features: f64) -> Self {
        Bagging {
            samples: Some(SampleBagging {
                fraction: samples,
                replacement: false,
            }),
            features: Some(features),
        }
    }

    pub fn is_none(&self) -> bool {
        self.samples.is_none() && self.features.is_none()
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(s) = self.samples {
            check_fraction("bagging.samples", s.fraction)?;
        }
        if let Some(f) = self.features {
            check_fraction("bagging.features", f)?;
        }
        Ok(())
    }
}

fn check_fraction(name: &str, fraction: f64) -> Result<()> {
    if fraction > 0.0 && fraction <= 1.0 {
        Ok(())
    } else {
        Err(Error::invalid(
            name,
            alloc::format!("fraction {fraction} outside (0, 1]"),
        ))
    }
}

fn kept(n: usize, fraction: f64) -> usize {
    libm::ceil(fraction * n as f64) as usize
}

/// Column subset drawn for one bag.
pub fn draw_columns(n: usize, bagging: SampleBagging, rng: &mut SplitMix64) -> Result<Vec<usize>> {
    check_fraction("fraction", bagging.fraction)?;
    let k = kept(n, bagging.fraction);
    if k == 0 {
        return Err(Error::Empty("bag columns"));
    }
    Ok(if bagging.replacement {
        rng.bootstrap_indices(n, k)
    } else {
        rng.sample_indices(n, k)
    })
}

/// Row subset drawn for one bag, ascending.
pub fn draw_rows(m: usize, fraction: f64, rng: &mut SplitMix64) -> Result<Vec<usize>> {
    check_fraction("fraction", fraction)?;
    let k = kept(m, fraction);
    if k == 0 {
        return Err(Error::Empty("bag rows"));
    }
    Ok(rng.sample_indices(m, k))
}

/// `ℓ` column subsets of `V`. Bag `i` draws from `derive_seed(seed, i)`.
/// Without replacement the kept columns stay in their original order, so a
/// fraction of 1.0 reproduces `V` exactly.
pub fn bag_samples(v: &FeatureMatrix, ell: usize, bagging: SampleBagging, seed: u64) -> Result<Vec<FeatureMatrix>> {
    (0..ell)
        .map(|i| {
            let mut rng = SplitMix64::new(derive_seed(seed, i as u64));
            draw_columns(v.len(), bagging, &mut rng).map(|cols| v.select_columns(&cols))
        })
        .collect()
}

/// `ℓ` row subsets of `V`; the kept row labels travel with each matrix.
pub fn bag_features(v: &FeatureMatrix, ell: usize, fraction: f64, seed: u64) -> Result<Vec<FeatureMatrix>> {
    (0..ell)
        .map(|i| {
            let mut rng = SplitMix64::new(derive_seed(seed, i as u64));
            draw_rows(v.dim(), fraction, &mut rng).map(|rows| v.select_rows(&rows))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BagMember<S> {
    pub model: S,
    /// Feature rows this member was trained on; test vectors are projected
    /// onto them before scoring.
    pub rows: Option<Vec<usize>>,
    pub bag_seed: u64,
}

impl<S> BagMember<S> {
    fn project(&self, x: Instance<'_>, buf: &mut Vec<f64>) -> Result<()> {
        buf.clear();
        if let Some(rows) = &self.rows {
            for &r in rows {
                buf.push(*x.features.get(r).ok_or(Error::DimensionMismatch {
                    expected: r + 1,
                    found: x.features.len(),
                })?);
            }
        }
        Ok(())
    }

    fn with_projection<T>(&self, x: Instance<'_>, f: impl FnOnce(Instance<'_>) -> Result<T>) -> Result<T> {
        if self.rows.is_none() {
            return f(x);
        }
        let mut buf = Vec::new();
        self.project(x, &mut buf)?;
        f(Instance {
            features: &buf,
            tokens: x.tokens,
        })
    }
}

/// `F(S(x; V_1, Λ), .., S(x; V_ℓ, Λ))`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bagged<S> {
    pub members: Vec<BagMember<S>>,
    pub combiner: CombinerKind,
}

impl<S: Scorer> Scorer for Bagged<S> {
    fn score(&self, x: Instance<'_>) -> Result<f64> {
        let scores = self
            .members
            .iter()
            .map(|m| m.with_projection(x, |p| m.model.score(p)))
            .collect::<Result<Vec<_>>>()?;
        match self.combiner {
            CombinerKind::Max => combine_max(&scores),
            CombinerKind::Average => combine_average(&scores),
            other => Err(Error::Unsupported(alloc::format!("{other:?} over real-valued scores"))),
        }
    }
}

impl<S: ClassScorer> ClassScorer for Bagged<S> {
    fn n_classes(&self) -> usize {
        self.members.first().map_or(0, |m| m.model.n_classes())
    }

    /// Element-wise average or max of member class scores, or for majority
    /// the fraction of members voting for each class.
    fn class_scores(&self, x: Instance<'_>) -> Result<Vec<f64>> {
        let k = self.n_classes();
        let mut out = alloc::vec![
            match self.combiner {
                CombinerKind::Max => f64::NEG_INFINITY,
                _ => 0.0,
            };
            k
        ];
        for m in &self.members {
            let s = m.with_projection(x, |p| m.model.class_scores(p))?;
            match self.combiner {
                CombinerKind::Average => out.iter_mut().zip(&s).for_each(|(o, v)| *o += v),
                CombinerKind::Max => out.iter_mut().zip(&s).for_each(|(o, v)| *o = o.max(*v)),
                CombinerKind::Majority => {
                    let mut vote = 0;
                    for (c, &v) in s.iter().enumerate() {
                        if v > s[vote] {
                            vote = c;
                        }
                    }
                    out[vote] += 1.0;
                }
                CombinerKind::Meta => return Err(Error::Unsupported("meta combiner inside a bag".into())),
            }
        }
        if self.combiner != CombinerKind::Max {
            let n = self.members.len() as f64;
            out.iter_mut().for_each(|o| *o /= n);
        }
        Ok(out)
    }
}

/// Trains `ℓ` components with one trainer on bagged views of `(V, labels)`.
///
/// Bag `i` draws its columns and then its rows from `derive_seed(seed, i)`.
/// The trainer receives the bagged matrix and the matching labels; a
/// component failure aborts with its index.
pub fn build_bagged_ensemble<S, F>(
    v: &FeatureMatrix,
    labels: &[usize],
    ell: usize,
    bagging: &Bagging,
    combiner: CombinerKind,
    seed: u64,
    mut train: F,
) -> Result<Bagged<S>>
where
    F: FnMut(&FeatureMatrix, &[usize]) -> Result<S>,
{
    if ell < 1 {
        return Err(Error::invalid("components", "must be at least 1"));
    }
    if labels.len() != v.len() {
        return Err(Error::DimensionMismatch {
            expected: v.len(),
            found: labels.len(),
        });
    }
    bagging.validate()?;
    if combiner == CombinerKind::Meta {
        return Err(Error::Unsupported("bagging with a meta combiner; use a stack".into()));
    }
    let mut members = Vec::with_capacity(ell);
    for i in 0..ell {
        let bag_seed = derive_seed(seed, i as u64);
        let mut rng = SplitMix64::new(bag_seed);
        let cols = match bagging.samples {
            Some(s) => draw_columns(v.len(), s, &mut rng)?,
            None => (0..v.len()).collect(),
        };
        let rows = match bagging.features {
            Some(f) => Some(draw_rows(v.dim(), f, &mut rng)?),
            None => None,
        };
        let mut view = v.select_columns(&cols);
        if let Some(rows) = &rows {
            view = view.select_rows(rows);
        }
        let bag_labels: Vec<usize> = cols.iter().map(|&c| labels[c]).collect();
        let model = train(&view, &bag_labels).map_err(Error::in_component(i))?;
        members.push(BagMember { model, rows, bag_seed });
    }
    Ok(Bagged { members, combiner })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn grid(n: usize, m: usize) -> FeatureMatrix {
        FeatureMatrix::from_columns((0..n).map(|i| (0..m).map(|j| (i * m + j) as f64).collect()).collect()).unwrap()
    }

    #[test]
    fn full_fraction_without_replacement_is_identity() {
        let v = grid(6, 3);
        let bags = bag_samples(
            &v,
            3,
            SampleBagging {
                fraction: 1.0,
                replacement: false,
            },
            5,
        )
        .unwrap();
        assert!(bags.iter().all(|b| b == &v));
        let rows = bag_features(&v, 2, 1.0, 5).unwrap();
        assert!(rows.iter().all(|b| b == &v));
    }

    #[test]
    fn half_fraction_keeps_five_of_ten() {
        let v = grid(10, 2);
        let bags = bag_samples(
            &v,
            4,
            SampleBagging {
                fraction: 0.5,
                replacement: false,
            },
            1,
        )
        .unwrap();
        for b in &bags {
            assert_eq!(b.len(), 5);
            assert_eq!(b.dim(), 2);
            for c in b.columns() {
                assert!(v.columns().contains(c));
            }
        }
    }

    #[test]
    fn quarter_of_eight_rows() {
        let v = grid(3, 8);
        for b in bag_features(&v, 5, 0.25, 2).unwrap() {
            assert_eq!(b.dim(), 2);
            assert_eq!(b.len(), 3);
        }
    }

    #[test]
    fn bootstrap_may_repeat_columns() {
        let v = grid(20, 1);
        let b = bag_samples(
            &v,
            1,
            SampleBagging {
                fraction: 1.0,
                replacement: true,
            },
            3,
        )
        .unwrap();
        assert_eq!(b[0].len(), 20);
        let mut firsts: Vec<f64> = b[0].columns().iter().map(|c| c[0]).collect();
        firsts.sort_by(f64::total_cmp);
        firsts.dedup();
        assert!(firsts.len() < 20);
    }

    #[test]
    fn bad_fractions_rejected() {
        let v = grid(4, 2);
        assert!(bag_samples(
            &v,
            1,
            SampleBagging {
                fraction: 0.0,
                replacement: false
            },
            0
        )
        .is_err());
        assert!(bag_features(&v, 1, 1.5, 0).is_err());
    }

    #[derive(Debug)]
    struct Sum;
    impl Scorer for Sum {
        fn score(&self, x: Instance<'_>) -> Result<f64> {
            Ok(x.features.iter().sum())
        }
    }

    #[test]
    fn component_failures_carry_index() {
        let v = grid(4, 2);
        let mut calls = 0;
        let err = build_bagged_ensemble::<Sum, _>(
            &v,
            &[0, 1, 0, 1],
            3,
            &Bagging::NONE,
            CombinerKind::Average,
            0,
            |_, _| {
                calls += 1;
                if calls == 2 {
                    Err(Error::DegenerateLabels)
                } else {
                    Ok(Sum)
                }
            },
        )
        .unwrap_err();
        assert!(matches!(err, Error::Component { index: 1, .. }));
    }

    #[test]
    fn projection_uses_stored_rows() {
        let bagged = Bagged {
            members: vec![BagMember {
                model: Sum,
                rows: Some(vec![0, 2]),
                bag_seed: 0,
            }],
            combiner: CombinerKind::Average,
        };
        assert_eq!(bagged.score(Instance::vector(&[1.0, 10.0, 100.0])), Ok(101.0));
    }
}
