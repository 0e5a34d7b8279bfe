use serde_json::json;

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("invalid config at `{path}`: {message}")]
    Config { path: String, message: String },

    #[error(transparent)]
    Core(#[from] lazygap_core::Error),

    #[error("io error on {path}: {source}")]
    Io { path: String, source: std::io::Error },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error("{failed} acceptance criteria failed")]
    Acceptance { failed: usize },
}

pub type Result<T> = std::result::Result<T, HarnessError>;

impl HarnessError {
    pub fn config(path: impl Into<String>, message: impl Into<String>) -> Self {
        Self::Config { path: path.into(), message: message.into() }
    }

    pub fn kind(&self) -> &'static str {
        use lazygap_core::Error as E;
        match self {
            Self::Config { .. } => "config",
            Self::Core(e) => match e {
                E::Argument(_) => "argument",
                E::Numeric(_) => "numeric",
                E::NoConvergence { .. } => "no_convergence",
                E::Profile { .. } => "profile",
                E::Assumption(_) => "assumption",
                E::Construction(_) => "construction",
                E::Precondition(_) => "precondition",
                E::Domain(_) => "domain",
                E::Divergence { .. } => "divergence",
            },
            Self::Io { .. } => "io",
            Self::Csv(_) => "csv",
            Self::Json(_) => "json",
            Self::Acceptance { .. } => "acceptance",
        }
    }

    /// Process exit code for this error.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config { .. } => 2,
            Self::Core(_) => 3,
            Self::Io { .. } | Self::Csv(_) | Self::Json(_) => 4,
            Self::Acceptance { .. } => 5,
        }
    }

    pub fn to_json(&self) -> serde_json::Value {
        let mut v = json!({ "error": { "kind": self.kind(), "message": self.to_string() } });
        if let Self::Config { path, .. } = self {
            v["error"]["path"] = json!(path);
        }
        v
    }
}
