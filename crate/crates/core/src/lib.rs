//! Crime-type prediction from spatio-temporal incident records.
//!
//! The workflow reads incident CSVs, picks a K-Means cluster count (elbow or
//! gap statistic), clusters each year's incidents and stacks the centers,
//! turns the distance to the nearest stacked center into a feature next to
//! temporal, polar and address features, trains multiclass classifiers and
//! scores them with renormalized, optionally smoothed, multiclass log loss.

pub mod clustering;
pub mod error;
pub mod evaluation;
pub mod features;
pub mod ingest;
pub mod labels;
pub mod models;
pub mod pipeline;
pub mod seed;
pub mod synthetic;

pub use error::{Error, Result};
pub use labels::{encode_label, ClassLabel};
