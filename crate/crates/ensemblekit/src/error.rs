use std::fmt;
use std::io;
use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// One configuration problem, located by a dotted field path such as
/// `experiments[2].bagging.samples`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigIssue {
    pub path: String,
    pub message: String,
}

impl ConfigIssue {
    pub fn new(path: impl Into<String>, message: impl fmt::Display) -> Self {
        ConfigIssue {
            path: path.into(),
            message: message.to_string(),
        }
    }
}

impl fmt::Display for ConfigIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

struct Issues<'a>(&'a [ConfigIssue]);

impl fmt::Display for Issues<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for issue in self.0 {
            write!(f, "\n  {issue}")?;
        }
        Ok(())
    }
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: io::Error },

    #[error("{}: {message}", path.display())]
    Parse { path: PathBuf, message: String },

    #[error("invalid configuration:{}", Issues(.0))]
    Config(Vec<ConfigIssue>),

    #[error("corpus: {0}")]
    Corpus(String),

    #[error("unsupported model file: {0}")]
    Format(String),

    #[error("experiment `{name}`: {source}")]
    Experiment {
        name: String,
        source: ensemblekit_core::Error,
    },

    #[error(transparent)]
    Core(#[from] ensemblekit_core::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>) -> impl FnOnce(io::Error) -> Error {
        let path = path.into();
        move |source| Error::Io { path, source }
    }

    pub(crate) fn experiment(name: &str) -> impl FnOnce(ensemblekit_core::Error) -> Error + '_ {
        move |source| Error::Experiment {
            name: name.to_string(),
            source,
        }
    }
}
