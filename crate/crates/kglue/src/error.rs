use thiserror::Error;

#[derive(Error, Debug)]
pub enum KgError {
  #[error("atlas validation failed: {0}")]
  Validation(String),
  #[error("reduction construction failed: {0}")]
  Reduction(String),
  #[error("gluing failed: {0}")]
  Gluing(String),
  #[error("counting failed: {0}")]
  Counting(String),
  #[error("configuration error: {0}")]
  Config(String),
}

impl KgError {
  /// Stable process exit code per error class.
  pub fn exit_code(&self) -> i32 {
    match self {
      KgError::Validation(_) => 10,
      KgError::Reduction(_) => 11,
      KgError::Gluing(_) => 12,
      KgError::Counting(_) => 13,
      KgError::Config(_) => 14,
    }
  }
}

pub type Result<T> = std::result::Result<T, KgError>;
