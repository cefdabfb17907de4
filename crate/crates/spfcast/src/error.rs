use std::path::PathBuf;

/// Crate-wide error type. Variants carry enough context to point at the
/// offending file/line/meter without a backtrace.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: {message}")]
    CsvRow {
        path: PathBuf,
        line: u64,
        message: String,
    },

    #[error("meter {meter_id} declared twice with conflicting medium or resolution")]
    DuplicateMeter { meter_id: String },

    #[error("building {building_id} declared twice")]
    DuplicateBuilding { building_id: String },

    #[error("building {building_id} references unknown meter {meter_id}")]
    DanglingMeter {
        building_id: String,
        meter_id: String,
    },

    #[error("meter {meter_id} is claimed by buildings {first} and {second}")]
    SharedMeter {
        meter_id: String,
        first: String,
        second: String,
    },

    #[error("building {building_id} has more than one {medium} meter")]
    ExtraMeter {
        building_id: String,
        medium: String,
    },

    #[error("invalid {name}: {message}")]
    InvalidParameter { name: &'static str, message: String },

    #[error("electricity total is zero for {context}")]
    ZeroElectricity { context: String },

    #[error("cannot build bin edges: {0}")]
    DegenerateEdges(String),

    #[error("sample value {value} lies outside the bin edges [{lo}, {hi}]")]
    SampleOutOfRange { value: f64, lo: f64, hi: f64 },

    #[error("histograms were built over different edges ({left} vs {right} bins)")]
    EdgeMismatch { left: usize, right: usize },

    #[error("{population} sample has {n} values, need at least {floor}")]
    TooFewSamples {
        population: String,
        n: usize,
        floor: usize,
    },

    #[error("divergence curve has no finite point; raise epsilon above zero")]
    DegenerateCurve,

    #[error("input vectors have mismatched lengths ({left} vs {right})")]
    LengthMismatch { left: usize, right: usize },

    #[error("correlation undefined: {0} has zero variance")]
    ZeroVariance(&'static str),

    #[error("weather for {year} covers {covered} of {required} winter days; missing {missing}")]
    WinterCoverage {
        year: i32,
        covered: usize,
        required: usize,
        missing: String,
    },

    #[error("no {0} buildings with usable annual values")]
    EmptyPopulation(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn csv_row(path: impl Into<PathBuf>, line: u64, message: impl Into<String>) -> Self {
        Error::CsvRow {
            path: path.into(),
            line,
            message: message.into(),
        }
    }

    pub fn invalid(name: &'static str, message: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            message: message.into(),
        }
    }
}
