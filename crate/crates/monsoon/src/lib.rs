//! Spatio-temporally coherent anomaly detection for gridded rainfall.
//!
//! Annual rainfall over a lattice of grid locations is modeled with a
//! three-state latent field (positive anomaly / negative anomaly / normal)
//! per `(location, year)` node, plus one aggregate state per year for the
//! spatial-mean series. A Markov random field ties neighboring locations,
//! adjacent years and each year's aggregate state together; Gibbs sampling
//! infers the latent states, and anomalies are read off as same-state
//! connected components with their sizes, intensities and statistics.
//!
//! # Pipeline
//!
//! 1. **Ingest** a gridded CSV (or generate synthetic data with planted
//!    blocks) — [`data`], [`synth`].
//! 2. **Baseline** assignment by per-location thresholds — [`lwa`].
//! 3. **Fit** the field by Gibbs sampling from the baseline — [`mrf`],
//!    [`gibbs`] (exact small-instance oracle in [`enumerate`]).
//! 4. **Detect** anomalies as connected components and compute their
//!    statistics — [`anomaly`], [`stats`].
//! 5. **Report**: parameter sweeps, state maps — [`sweep`], [`render`].
//!
//! The `monsoon` binary wires these stages into `synth`, `lwa`, `fit`,
//! `detect`, `sweep` and `render` subcommands; each library stage is also
//! demonstrated by a runnable example.

pub mod anomaly;
pub mod config;
pub mod data;
pub mod enumerate;
pub mod error;
pub mod gibbs;
pub mod grid;
pub mod lwa;
pub mod manifest;
pub mod mrf;
pub mod pipeline;
pub mod render;
pub mod state;
pub mod stats;
pub mod sweep;
pub mod synth;

pub use anomaly::{annotate_intensities, anomaly_intensity, extract_anomalies, Anomaly};
pub use data::{aggregate_annual, compute_aimr, load_csv, Calendar, DailySeries, RainfallDataset};
pub use enumerate::{exact_enumerate, ExactResult, MAX_EXACT_NODES};
pub use error::{Error, Result};
pub use gibbs::{
    conditional_aimr, conditional_local, gibbs_run, map_estimate, GibbsConfig, PosteriorSummary,
    SampleAccumulator, ScanOrder,
};
pub use grid::{GridIndex, Location};
pub use lwa::{location_stats, lwa_assign, widespread_year_sets, LocationStats, YearSets};
pub use mrf::{
    aimr_edge_potential, estimate_emissions, estimate_spatial_coupling, spatial_potential,
    temporal_potential, EmissionParams, MrfConfig, MrfModel, NodePotentialSpec,
    NodePotentialTable, NodeScheme, SpatialCoupling, SpatialMode, SpatialPotentialSpec,
    TemporalPotentialSpec,
};
pub use state::{Sign, State, StateField};
pub use stats::{
    aggregate_stats, case_report, gain_loss, overlap_report, size_correlations,
    year_assignment_stats, AnomalyStats, CaseReport, CorrelationReport, GainLossReport,
    OverlapReport, YearAssignmentStats,
};
pub use synth::{generate_synthetic, Block, GroundTruth, SyntheticSpec};
