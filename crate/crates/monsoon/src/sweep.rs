//! Parameter sweeps over named model settings.
//!
//! Settings mirror the labels used throughout the analysis: the baseline
//! (`LWA`), spatial coherence only (`MRF-SC`), temporal only (`MRF-TC-P`),
//! both (`MRF-STC-P`), the spatial-mode variants at `P = 0.9`
//! (`MRF-STC-unif|prop|anml|mxd1|mxd2`) and the node-potential schemes at
//! `P = 0.99` (`NP1`..`NP8`). Each setting runs the full pipeline on the
//! same dataset and reports one row of assignment and anomaly statistics.

use rayon::prelude::*;

use crate::anomaly::{annotate_intensities, extract_anomalies};
use crate::config::Entry;
use crate::data::RainfallDataset;
use crate::error::{Error, Result};
use crate::gibbs::{gibbs_run, GibbsConfig};
use crate::mrf::{
    MrfConfig, MrfModel, NodePotentialSpec, NodeScheme, SpatialMode, SpatialPotentialSpec,
    TemporalPotentialSpec,
};
use crate::state::StateField;
use crate::stats::{aggregate_stats, gain_loss, AnomalyStats, GainLossReport};

/// One named sweep setting.
#[derive(Debug, Clone, PartialEq)]
pub enum Setting {
    /// Baseline thresholds; the reference row.
    Lwa,
    /// Spatial coherence only.
    SpatialOnly,
    /// Temporal coherence only, with the given parameter.
    TemporalOnly(f64),
    /// Spatial and temporal coherence.
    SpatioTemporal(f64),
    /// Spatio-temporal at `P = 0.9` with a named spatial variant.
    SpatialVariant(SpatialVariant),
    /// Spatio-temporal at `P = 0.99` with a node-potential scheme.
    NodePotentials(NodeScheme),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpatialVariant {
    Unif,
    Prop,
    Anml,
    Mxd1,
    Mxd2,
}

impl Setting {
    /// Parse a sweep label such as `LWA`, `MRF-SC`, `MRF-TC-0.75`,
    /// `MRF-STC-0.9`, `MRF-STC-anml` or `NP3`.
    pub fn parse(name: &str) -> Result<Setting> {
        let unknown = || Error::UnknownSetting(name.to_string());
        if name.eq_ignore_ascii_case("LWA") {
            return Ok(Setting::Lwa);
        }
        if name.eq_ignore_ascii_case("MRF-SC") {
            return Ok(Setting::SpatialOnly);
        }
        if let Some(rest) = name.strip_prefix("MRF-TC-") {
            let p: f64 = rest.parse().map_err(|_| unknown())?;
            return Ok(Setting::TemporalOnly(p));
        }
        if let Some(rest) = name.strip_prefix("MRF-STC-") {
            return match rest {
                "unif" => Ok(Setting::SpatialVariant(SpatialVariant::Unif)),
                "prop" => Ok(Setting::SpatialVariant(SpatialVariant::Prop)),
                "anml" => Ok(Setting::SpatialVariant(SpatialVariant::Anml)),
                "mxd1" => Ok(Setting::SpatialVariant(SpatialVariant::Mxd1)),
                "mxd2" => Ok(Setting::SpatialVariant(SpatialVariant::Mxd2)),
                p => Ok(Setting::SpatioTemporal(p.parse().map_err(|_| unknown())?)),
            };
        }
        if name.to_ascii_uppercase().starts_with("NP") {
            return Ok(Setting::NodePotentials(NodeScheme::parse(name).map_err(|_| unknown())?));
        }
        Err(unknown())
    }

    /// Canonical label for reports.
    pub fn label(&self) -> String {
        match self {
            Setting::Lwa => "LWA".to_string(),
            Setting::SpatialOnly => "MRF-SC".to_string(),
            Setting::TemporalOnly(p) => format!("MRF-TC-{p:.2}"),
            Setting::SpatioTemporal(p) => format!("MRF-STC-{p:.2}"),
            Setting::SpatialVariant(v) => format!(
                "MRF-STC-{}",
                match v {
                    SpatialVariant::Unif => "unif",
                    SpatialVariant::Prop => "prop",
                    SpatialVariant::Anml => "anml",
                    SpatialVariant::Mxd1 => "mxd1",
                    SpatialVariant::Mxd2 => "mxd2",
                }
            ),
            Setting::NodePotentials(scheme) => format!("{scheme:?}").to_ascii_uppercase(),
        }
    }

    fn prop_spatial() -> SpatialPotentialSpec {
        SpatialPotentialSpec {
            mode: SpatialMode::Prop,
            c_uniform: 1.0,
            d: 0.0,
            lambda: 1.0,
        }
    }

    /// Model configuration for this setting; `None` for the baseline row.
    pub fn mrf_config(&self) -> Option<MrfConfig> {
        let node = NodePotentialSpec::default();
        let config = match self {
            Setting::Lwa => return None,
            Setting::SpatialOnly => MrfConfig {
                spatial: Self::prop_spatial(),
                temporal: TemporalPotentialSpec { p: None },
                node,
                aimr_link: true,
            },
            Setting::TemporalOnly(p) => MrfConfig {
                spatial: SpatialPotentialSpec {
                    mode: SpatialMode::Off,
                    ..Default::default()
                },
                temporal: TemporalPotentialSpec { p: Some(*p) },
                node,
                aimr_link: true,
            },
            Setting::SpatioTemporal(p) => MrfConfig {
                spatial: Self::prop_spatial(),
                temporal: TemporalPotentialSpec { p: Some(*p) },
                node,
                aimr_link: true,
            },
            Setting::SpatialVariant(v) => {
                let spatial = match v {
                    SpatialVariant::Unif => SpatialPotentialSpec {
                        mode: SpatialMode::Unif,
                        c_uniform: 1.0,
                        d: 0.0,
                        lambda: 1.0,
                    },
                    SpatialVariant::Prop => Self::prop_spatial(),
                    SpatialVariant::Anml => SpatialPotentialSpec {
                        mode: SpatialMode::Anml,
                        c_uniform: 1.0,
                        d: 0.0,
                        lambda: 1.0,
                    },
                    SpatialVariant::Mxd1 => SpatialPotentialSpec {
                        mode: SpatialMode::Mxd,
                        c_uniform: 2.0,
                        d: 1.0,
                        lambda: 1.0,
                    },
                    SpatialVariant::Mxd2 => SpatialPotentialSpec {
                        mode: SpatialMode::Mxd,
                        c_uniform: 5.0,
                        d: 1.0,
                        lambda: 1.0,
                    },
                };
                MrfConfig {
                    spatial,
                    temporal: TemporalPotentialSpec { p: Some(0.9) },
                    node,
                    aimr_link: true,
                }
            }
            Setting::NodePotentials(scheme) => MrfConfig {
                spatial: Self::prop_spatial(),
                temporal: TemporalPotentialSpec { p: Some(0.99) },
                node: NodePotentialSpec {
                    scheme: *scheme,
                    ..Default::default()
                },
                aimr_link: true,
            },
        };
        Some(config)
    }
}

/// One sweep result row: assignment bookkeeping plus anomaly statistics with
/// and without singleton components.
#[derive(Debug, Clone)]
pub struct SweepRow {
    pub setting: String,
    /// Absent for the baseline row (it is its own reference).
    pub gain_loss: Option<GainLossReport>,
    pub n1: usize,
    pub n2: usize,
    /// All anomalies.
    pub stats_all: AnomalyStats,
    /// Spatio-temporal size at least 2.
    pub stats_min2: AnomalyStats,
    /// The fitted field, for downstream use.
    pub field: StateField,
}

/// A parsed sweep specification: the settings list plus sampler parameters.
#[derive(Debug, Clone)]
pub struct SweepSpec {
    pub settings: Vec<Setting>,
    pub gibbs: GibbsConfig,
}

/// Parse a sweep spec from config entries. Keys: `settings` (comma-separated
/// labels), `sweeps`, `burn_in`, `thin`, `seed`.
pub fn sweep_spec_from_entries(entries: &[Entry]) -> Result<SweepSpec> {
    let mut settings = Vec::new();
    let mut gibbs = GibbsConfig::default();
    for entry in entries {
        let bad = |msg: String| Error::Config {
            line: entry.line,
            msg,
        };
        match entry.key.as_str() {
            "settings" => {
                for name in entry.value.split(',') {
                    settings.push(Setting::parse(name.trim())?);
                }
            }
            "sweeps" => {
                gibbs.sweeps = entry
                    .value
                    .parse()
                    .map_err(|_| bad(format!("bad value `{}` for key `sweeps`", entry.value)))?
            }
            "burn_in" => {
                gibbs.burn_in = entry
                    .value
                    .parse()
                    .map_err(|_| bad(format!("bad value `{}` for key `burn_in`", entry.value)))?
            }
            "thin" => {
                gibbs.thin = entry
                    .value
                    .parse()
                    .map_err(|_| bad(format!("bad value `{}` for key `thin`", entry.value)))?
            }
            "seed" => {
                gibbs.seed = entry
                    .value
                    .parse()
                    .map_err(|_| bad(format!("bad value `{}` for key `seed`", entry.value)))?
            }
            other => return Err(bad(format!("unknown key `{other}`"))),
        }
    }
    if settings.is_empty() {
        return Err(Error::Config {
            line: 0,
            msg: "missing required key `settings`".into(),
        });
    }
    Ok(SweepSpec { settings, gibbs })
}

/// Run one setting on a dataset and compute its statistics row.
pub fn run_setting(
    dataset: &RainfallDataset,
    setting: &Setting,
    gibbs: &GibbsConfig,
) -> Result<SweepRow> {
    let stats = crate::lwa::location_stats(dataset)?;
    let z0 = crate::lwa::lwa_assign(dataset, &stats);
    let year_sets = crate::lwa::widespread_year_sets(&z0);

    let field = match setting.mrf_config() {
        None => z0.clone(),
        Some(config) => {
            let model = MrfModel::new(dataset, config, &z0, &stats, &year_sets)?;
            gibbs_run(&model, &z0, gibbs)?.map_field
        }
    };

    let mut anomalies = extract_anomalies(&field, dataset.grid())?;
    annotate_intensities(&mut anomalies, dataset, &stats)?;
    let report = if matches!(setting, Setting::Lwa) {
        None
    } else {
        Some(gain_loss(&field, &z0)?)
    };
    Ok(SweepRow {
        setting: setting.label(),
        n1: field.count(crate::state::State::High),
        n2: field.count(crate::state::State::Low),
        gain_loss: report,
        stats_all: aggregate_stats(&anomalies, 1),
        stats_min2: aggregate_stats(&anomalies, 2),
        field,
    })
}

/// Run every setting, independent settings concurrently. Row order follows
/// the settings list regardless of scheduling.
pub fn run_sweep(
    dataset: &RainfallDataset,
    spec: &SweepSpec,
) -> Result<Vec<SweepRow>> {
    spec.settings
        .par_iter()
        .map(|setting| run_setting(dataset, setting, &spec.gibbs))
        .collect()
}

pub const SWEEP_CSV_HEADER: &str = "setting,n1,n2,ng1,ng2,nl1,nl2,\
np,nn,stsp,stsn,ssp,ssn,tsp,tsn,ip,in,\
np_min2,nn_min2,stsp_min2,stsn_min2,ssp_min2,ssn_min2,tsp_min2,tsn_min2,ip_min2,in_min2";

fn opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.4}")).unwrap_or_default()
}

fn stats_cells(stats: &AnomalyStats) -> String {
    format!(
        "{},{},{},{},{},{},{},{},{},{}",
        stats.count_pos,
        stats.count_neg,
        opt(stats.st_size_pos),
        opt(stats.st_size_neg),
        opt(stats.spatial_size_pos),
        opt(stats.spatial_size_neg),
        opt(stats.temporal_size_pos),
        opt(stats.temporal_size_neg),
        opt(stats.intensity_pos),
        opt(stats.intensity_neg),
    )
}

impl SweepRow {
    /// Render as one CSV line under [`SWEEP_CSV_HEADER`].
    pub fn to_csv(&self) -> String {
        let gl = match &self.gain_loss {
            Some(g) => format!("{},{},{},{}", g.ng1, g.ng2, g.nl1, g.nl2),
            None => ",,,".to_string(),
        };
        format!(
            "{},{},{},{},{},{}",
            self.setting,
            self.n1,
            self.n2,
            gl,
            stats_cells(&self.stats_all),
            stats_cells(&self.stats_min2),
        )
    }
}
