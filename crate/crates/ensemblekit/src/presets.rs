//! Named voting stacks.
//!
//! The neural-network members that the stack names refer to are not implemented;
//! each is replaced by an implemented analog of the same role:
//!
//! | stack                    | members                                         |
//! |--------------------------|-------------------------------------------------|
//! | `cnn`                    | forest, bagged trees                            |
//! | `lstm`                   | hmm, bagged hmm                                 |
//! | `bagged_neural_networks` | bagged hmm, bagged trees                        |
//! | `classic`                | hmm restarts, bagged hmm, forest, adaboost      |
//! | `all_neural_networks`    | forest, bagged trees, hmm, bagged hmm           |
//! | `all_models`             | every member above, once                        |

use std::collections::BTreeMap;

use ensemblekit_core::ensembles::{AdaBoostParams, Bagging, Boosting, EnsembleSpec};
use ensemblekit_core::scorers::Family;
use ensemblekit_core::ParamSet;

pub const STACKS: [&str; 6] = [
    "cnn",
    "lstm",
    "bagged_neural_networks",
    "classic",
    "all_neural_networks",
    "all_models",
];

pub const MEMBERS: [&str; 6] = [
    "hmm",
    "hmm_restarts",
    "bagged_hmm",
    "forest",
    "bagged_trees",
    "adaboost",
];

pub fn stack_members(stack: &str) -> Option<&'static [&'static str]> {
    Some(match stack {
        "cnn" => &["forest", "bagged_trees"],
        "lstm" => &["hmm", "bagged_hmm"],
        "bagged_neural_networks" => &["bagged_hmm", "bagged_trees"],
        "classic" => &["hmm_restarts", "bagged_hmm", "forest", "adaboost"],
        "all_neural_networks" => &["forest", "bagged_trees", "hmm", "bagged_hmm"],
        "all_models" => &[
            "hmm",
            "hmm_restarts",
            "bagged_hmm",
            "forest",
            "bagged_trees",
            "adaboost",
        ],
        _ => return None,
    })
}

fn hmm_params() -> ParamSet {
    ParamSet::new()
        .with("n_components", 3usize)
        .with("n_iter", 50usize)
        .with("tol", 0.01)
}

/// Default spec of a stack member, with `overrides` merged into its base
/// parameters.
pub fn member_spec(member: &str, seed: u64, overrides: Option<&ParamSet>) -> Option<EnsembleSpec> {
    let (family, params) = match member {
        "hmm" | "hmm_restarts" | "bagged_hmm" => (Family::Hmm, hmm_params()),
        "forest" => (Family::Forest, ParamSet::new().with("n_estimators", 100usize)),
        "bagged_trees" => (Family::Tree, ParamSet::new()),
        "adaboost" => (Family::Stump, ParamSet::new()),
        _ => return None,
    };
    let params = match overrides {
        Some(o) => params.merged(o),
        None => params,
    };
    let spec = EnsembleSpec::standard(family, params, seed);
    Some(match member {
        "hmm_restarts" => spec.with_boosting(Boosting::Restarts { restarts: 5 }),
        "bagged_hmm" => spec.with_bagging(Bagging::samples(0.8), 5),
        "bagged_trees" => spec.with_bagging(Bagging::both(0.8, 0.8), 10),
        "adaboost" => spec.with_boosting(Boosting::AdaBoost(AdaBoostParams {
            n_estimators: 100,
            ..AdaBoostParams::default()
        })),
        _ => spec,
    })
}

/// `(member, spec)` pairs of a named stack.
pub fn stack_specs(
    stack: &str,
    seed: u64,
    overrides: &BTreeMap<String, ParamSet>,
) -> Option<Vec<(String, EnsembleSpec)>> {
    stack_members(stack)?
        .iter()
        .map(|m| member_spec(m, seed, overrides.get(*m)).map(|s| (m.to_string(), s)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_stack_is_buildable_and_valid() {
        for s in STACKS {
            let specs = stack_specs(s, 1, &BTreeMap::new()).unwrap();
            assert!(!specs.is_empty());
            for (_, spec) in specs {
                spec.validate().unwrap();
            }
        }
        for m in MEMBERS {
            assert!(member_spec(m, 0, None).is_some());
        }
        assert!(stack_members("xgboost").is_none());
    }
}
