//! Crate-wide error type.
//!
//! Validation routines return structured reports instead of errors; the
//! variants here cover operations that cannot produce a partial result.

use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum Error {
    /// Composition of morphisms whose middle objects disagree.
    #[error("not composable: {0}")]
    NotComposable(String),

    /// A matrix that is not a morphism of the structure category in play.
    #[error("not in category: {0}")]
    NotInCategory(String),

    /// Objects or fibers of incompatible dimension.
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// A matrix that must be invertible but is not.
    #[error("singular matrix: {0}")]
    Singular(String),

    /// Malformed input data caught by a validation gate.
    #[error("invalid input: {0}")]
    Invalid(String),

    /// A map that does not respect the cell structure.
    #[error("not cellular: {0}")]
    NotCellular(String),

    /// A map between stratified spaces that mixes strata.
    #[error("not stratum preserving: {0}")]
    NotStratumPreserving(String),

    /// Layer decomposition of a map could not be inferred uniquely.
    #[error("ambiguous layer decomposition: {0}")]
    AmbiguousInference(String),

    /// A functor applied outside its domain of definition.
    #[error("functor undefined here: {0}")]
    FunctorDomain(String),

    /// An operation that needs exhaustive enumeration met an open category.
    #[error("unsupported for open categories: {0}")]
    UnsupportedCategory(String),

    /// Flattening a stratified bundle whose attach maps are not invertible.
    #[error("bundle theorem hypothesis violated: {0}")]
    BundleTheorem(String),

    /// An attach map in a tangent family that fails the surjectivity assumption.
    #[error("attach map not surjective: {0}")]
    NotSurjective(String),

    /// Serialization and schema problems.
    #[error("schema error: {0}")]
    Schema(String),
}

pub type Result<T> = std::result::Result<T, Error>;
