//! Persistence and dataset generation: feature files, JSON-lines manifests,
//! the deterministic mock extractor, synthetic localisation users, and HAR
//! CSV ingestion.

mod features;
mod har;
mod loc_data;
mod manifest;
mod mock;

pub use features::{decode_features, encode_features, read_features, write_features, FeatureSet};
pub use har::{ingest_har_csv, parse_har_csv, synthetic_har, write_har_csv, HAR_CLASSES};
pub use loc_data::{gen_loc_dataset, LocScenario, LocUser};
pub use manifest::{read_manifest, write_manifest, Manifest, ManifestEntry, ManifestHeader, TaskKind};
pub use mock::{mock_extract, MockExtractor, MOCK_MAX_FREQ};
