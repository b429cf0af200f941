use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = TsaError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum TsaError {
    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("noise level must be positive and finite, got {0}")]
    InvalidSigma(f64),

    #[error("basis columns are not orthonormal: |WᵀW - I| reaches {deviation:e}")]
    NotOrthonormal { deviation: f64 },

    #[error("basis must have an even number of columns, got {0}")]
    OddColumnCount(usize),

    #[error("basis has {columns} columns but ambient dimension is only {dim}")]
    Overcomplete { columns: usize, dim: usize },

    #[error("matrix is rank deficient: singular value {index} is {value:e}")]
    RankDeficient { index: usize, value: f64 },

    #[error("singular value decomposition did not converge")]
    SvdFailed,

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("non-finite gradient at step {step} (pass {pass}, alpha {alpha}): {detail}")]
    NonFiniteGradient {
        step: usize,
        pass: usize,
        alpha: f64,
        detail: String,
    },

    #[error("image must be square, got {rows}x{cols}")]
    NonSquareImage { rows: usize, cols: usize },

    #[error("bad magic in {what}: expected {expected:#010x}, found {actual:#010x}")]
    BadMagic {
        what: &'static str,
        expected: u32,
        actual: u32,
    },

    #[error("truncated {what}: needed {needed} bytes, found {available}")]
    Truncated {
        what: &'static str,
        needed: usize,
        available: usize,
    },

    #[error("unsupported {what} version {found} (this build reads version {supported})")]
    UnsupportedVersion {
        what: &'static str,
        found: u16,
        supported: u16,
    },

    #[error("checksum mismatch in {what}: stored {stored:#010x}, computed {computed:#010x}")]
    ChecksumMismatch {
        what: &'static str,
        stored: u32,
        computed: u32,
    },

    #[error("malformed {what}: {detail}")]
    Malformed { what: &'static str, detail: String },

    #[error("i/o error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl TsaError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        TsaError::Io {
            path: path.into(),
            source,
        }
    }
}

pub(crate) fn check_len(context: &'static str, expected: usize, actual: usize) -> Result<()> {
    if expected != actual {
        return Err(TsaError::DimensionMismatch {
            context,
            expected,
            actual,
        });
    }
    Ok(())
}

pub(crate) fn check_sigma(sigma: f64) -> Result<()> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(TsaError::InvalidSigma(sigma));
    }
    Ok(())
}
