//! Base scoring functions.

pub mod hmm;
pub mod perceptron;
pub mod stump;
pub mod tree;

pub use hmm::{hmm_score, train_hmm, train_hmm_on, HmmModel, HmmParams};
pub use perceptron::{train_perceptron, PerceptronModel, PerceptronParams};
pub use stump::{train_stump, StumpModel};
pub use tree::{train_forest, train_tree, ForestModel, ForestParams, MaxFeatures, TreeModel, TreeParams};

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Hmm,
    Perceptron,
    Tree,
    Forest,
    Stump,
}

impl Family {
    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "hmm" => Family::Hmm,
            "perceptron" => Family::Perceptron,
            "tree" => Family::Tree,
            "forest" => Family::Forest,
            "stump" => Family::Stump,
            _ => return None,
        })
    }

    pub fn name(&self) -> &'static str {
        match self {
            Family::Hmm => "hmm",
            Family::Perceptron => "perceptron",
            Family::Tree => "tree",
            Family::Forest => "forest",
            Family::Stump => "stump",
        }
    }
}
