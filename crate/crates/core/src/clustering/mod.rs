//! K-Means, cluster-count selection, per-year center stacking and density grids.

mod kde;
mod kmeans;
mod selection;
mod stack;

pub use kde::{kde_density_grid, scott_bandwidth, DensityGrid};
pub use kmeans::{
    inertia, kmeans_fit, nearest, squared_distance, ClusterModel, KMeansParams, Point,
};
pub use selection::{
    choose_gap_k, chord_distances, elbow_point, elbow_select, gap_statistic, reference_set,
    ElbowReport, GapEntry, GapReport, SelectionParams, LOG_FLOOR,
};
pub use stack::{
    nearest_center_distance, stack_yearly_centers, ShortYearPolicy, StackedCenters, YearCenters,
    STACKED_FORMAT_VERSION,
};
