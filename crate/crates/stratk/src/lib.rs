//! Finite stratified spaces, stratified vector bundles over matrix structure
//! categories, and their K-theory.
//!
//! The crate is organized bottom-up:
//!
//! * [`matrix`]: exact rational scalars and matrices.
//! * [`lincat`]: structure categories of rational matrices, functors between
//!   them, and the norm bound check.
//! * [`complex`]: finite regular cell complexes, cellular maps, pushouts,
//!   stratified spaces, and edge-path fundamental group presentations.
//! * [`bundle`]: flat cocycles over cell complexes, gauge equivalence,
//!   pullback, and holonomy classification.
//! * [`strata`]: stratified bundles built layer by layer, their pullbacks,
//!   isomorphism search, and flattening.
//! * [`functorial`]: images of bundles and stratified bundles under matrix
//!   functors and bifunctors.
//! * [`tangent`]: stratified tangent families of polytopal manifolds.
//! * [`snf`]: Smith normal form over the integers.
//! * [`ktheory`]: bounded class monoids and the Grothendieck group of a
//!   stratified space.
//! * [`io`]: the JSON interchange formats.
//! * [`fixtures`]: bundled desk-scale test objects shared by the test suites
//!   and the examples.

pub mod bundle;
pub mod complex;
pub mod error;
pub mod fixtures;
pub mod functorial;
pub mod io;
pub mod ktheory;
pub mod lincat;
pub mod matrix;
pub mod report;
pub mod snf;
pub mod strata;
pub mod tangent;

pub use error::{Error, Result};
