//! Temporal, polar, rotated and address features; standardization; PCA.

mod address;
mod matrix;
mod pca;
mod schema;
mod spatial;
mod standardize;
mod temporal;

pub use address::{
    address_features, parse_address, street_type_code, AddressFeatures, ParsedAddress,
    StreetVocabulary, SENTINEL,
};
pub use matrix::{build_feature_matrix, FeatureMatrix, FeatureState, FEATURE_STATE_VERSION};
pub use pca::{pca_fit, pca_transform, PcaModel};
pub use schema::{FeatureName, FeatureSchema};
pub use spatial::{spatial_features, SpatialFeatures, SpatialReference};
pub use standardize::{standardize, Standardizer};
pub use temporal::{temporal_features, TemporalFeatures};
