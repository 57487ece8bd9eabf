//! Persistence: the KTA1 tensor-archive format, artifact save/load
//! conventions, run manifests, CSV emitters, and `key = value` config files.

pub mod archive;
pub mod artifacts;
pub mod config;
pub mod csv;
pub mod manifest;

pub use archive::{Tensor, TensorArchive, ARCHIVE_MAGIC};
pub use artifacts::{
    load_dataset, load_kae, load_mlp, load_operator, load_pair, load_representation,
    save_dataset, save_kae, save_mlp, save_operator, save_pair, save_representation,
    KaeCheckpoint,
};
pub use config::{parse_config, ConfigFile, KaeSettings, MlpSettings, RunConfig};
pub use csv::{
    write_betti_csv, write_diagram_csv, write_kae_loss_csv, write_metrics_csv,
    write_projection_csv,
};
pub use manifest::{sha256_file, RunManifest};
