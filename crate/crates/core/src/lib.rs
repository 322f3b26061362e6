//! De-identification of DICOM data sets.
pub mod identity;
pub mod parallel;
pub mod phi;
pub mod pipeline;
pub mod pixel;
pub mod private;
pub mod rules;
pub mod validate;
