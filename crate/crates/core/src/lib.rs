//! Multitask graph neural networks for molecular property regression.
//!
//! Pipeline: SMILES are parsed into [`chem::MolGraph`]s, featurized into
//! [`featurize::GraphBatch`]es, and fed to a GIN, GGRNet or GAIN
//! [`gnn::Model`] built on the reverse-mode engine in [`autodiff`]. The
//! [`data`] module merges single-task CSVs into a sparse multitask table,
//! [`train`] runs masked-loss cross-validation, and [`experiments`] drives
//! the transfer, dataset-size, timing and weight studies.

pub mod chem;
pub mod autodiff;
pub mod featurize;
pub mod data;
pub mod gnn;
pub mod train;
pub mod experiments;
