//! File formats and dataset preparation: LIBSVM text, seeded splits,
//! feature-graph construction, edge lists and metrics CSV.

mod edges;
mod graph;
mod libsvm;
mod metrics;
mod split;

pub use edges::{load_edges, parse_edges, write_edges};
pub use graph::{build_graph_precision, empirical_covariance, GraphHeuristic};
pub use libsvm::{parse_libsvm, read_libsvm, write_libsvm};
pub use metrics::{
    parse_metrics_csv, read_metrics_csv, write_metrics_csv, MetricsRecord, METRICS_HEADER,
};
pub use split::split;
