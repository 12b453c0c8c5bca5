use thiserror::Error;

/// Loader and validation diagnostics. `path` is a JSON-pointer-style
/// location in the program document.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LoadError {
    #[error("malformed document at {path}: {reason}")]
    MalformedDocument { path: String, reason: String },
    #[error("unsupported construct `{name}` at {path}")]
    UnsupportedConstruct { name: String, path: String },
    #[error("dangling reference to `{target}` at {path}")]
    DanglingReference { path: String, target: String },
    #[error("bit width {width} out of range [1, 64] at {path}")]
    WidthOutOfRange { path: String, width: u64 },
    #[error("invalid program at {path}: {reason}")]
    Invalid { path: String, reason: String },
}

impl LoadError {
    pub fn path(&self) -> &str {
        match self {
            LoadError::MalformedDocument { path, .. }
            | LoadError::UnsupportedConstruct { path, .. }
            | LoadError::DanglingReference { path, .. }
            | LoadError::WidthOutOfRange { path, .. }
            | LoadError::Invalid { path, .. } => path,
        }
    }

    pub(crate) fn malformed(path: impl Into<String>, reason: impl Into<String>) -> Self {
        LoadError::MalformedDocument {
            path: path.into(),
            reason: reason.into(),
        }
    }

    pub(crate) fn unsupported(name: impl Into<String>, path: impl Into<String>) -> Self {
        LoadError::UnsupportedConstruct {
            name: name.into(),
            path: path.into(),
        }
    }

    pub(crate) fn dangling(path: impl Into<String>, target: impl Into<String>) -> Self {
        LoadError::DanglingReference {
            path: path.into(),
            target: target.into(),
        }
    }

    pub(crate) fn invalid(path: impl Into<String>, reason: impl Into<String>) -> Self {
        LoadError::Invalid {
            path: path.into(),
            reason: reason.into(),
        }
    }
}
