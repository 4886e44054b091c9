use std::path::PathBuf;

/// Errors returned by this crate.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A value in an input file could not be parsed (including blank cells).
    #[error("parse error at {location}: {message}")]
    Parse { location: String, message: String },

    /// An input file is well formed but violates the panel layout.
    #[error("format error: {0}")]
    Format(String),

    /// Hierarchy metadata references unknown series or is otherwise invalid.
    #[error("metadata error: {0}")]
    Metadata(String),

    /// An experiment or simulation configuration is invalid.
    #[error("config error: {0}")]
    Config(String),

    /// A model could not be fitted to a series.
    #[error("fit error for series '{series}': {message}")]
    Fit { series: String, message: String },

    /// A function argument is outside its accepted domain.
    #[error("argument error: {0}")]
    Argument(String),

    /// A series (or residual column) has zero variance where a positive one is needed.
    #[error("degenerate series: {0}")]
    DegenerateSeries(String),

    /// An input matrix carries no variance at all.
    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    /// A series is too short (or otherwise unsuitable) for feature extraction.
    #[error("feature error: {0}")]
    Feature(String),

    /// A linear system could not be solved reliably.
    #[error("numerical error: {message} (condition estimate {condition:.3e})")]
    Numerical { message: String, condition: f64 },

    /// Forecasts handed to the combiner do not add up.
    #[error("coherence error: {0}")]
    Coherence(String),

    /// The seasonal-naive scale of a training series is zero.
    #[error("scale error: {0}")]
    Scale(String),

    /// A backtest window failed.
    #[error("window {window}: {source}")]
    Window {
        window: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    /// Short machine-readable tag for the error class.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Parse { .. } => "ParseError",
            Error::Format(_) => "FormatError",
            Error::Metadata(_) => "MetadataError",
            Error::Config(_) => "ConfigError",
            Error::Fit { .. } => "FitError",
            Error::Argument(_) => "ArgumentError",
            Error::DegenerateSeries(_) => "DegenerateSeriesError",
            Error::DegenerateInput(_) => "DegenerateInputError",
            Error::Feature(_) => "FeatureError",
            Error::Numerical { .. } => "NumericalError",
            Error::Coherence(_) => "CoherenceError",
            Error::Scale(_) => "ScaleError",
            Error::Window { source, .. } => source.kind(),
            Error::Io { .. } => "IoError",
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn fit(series: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Fit {
            series: series.into(),
            message: message.into(),
        }
    }

    /// Attach a series id to a fit error raised without one.
    pub fn with_series(self, id: &str) -> Self {
        match self {
            Error::Fit { message, .. } => Error::Fit {
                series: id.to_string(),
                message,
            },
            other => other,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
