//! Location-wise analysis: the threshold baseline.
//!
//! Each location's series is thresholded at its own mean plus/minus one
//! standard deviation, ignoring neighbors. The resulting assignment `Z0`
//! initializes the sampler and serves as the reference for gain/loss
//! bookkeeping. All comparisons are inclusive and standard deviations are
//! population (divide by N) throughout.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::data::RainfallDataset;
use crate::error::{Error, Result};
use crate::state::{State, StateField};

/// Per-location and aggregate climatology.
#[derive(Debug, Clone)]
pub struct LocationStats {
    /// Long-term mean per location (mm/day).
    pub mu: Vec<f64>,
    /// Population standard deviation per location.
    pub sigma: Vec<f64>,
    /// Mean of the aggregate (spatial-mean) series.
    pub mu_aimr: f64,
    /// Population standard deviation of the aggregate series.
    pub sigma_aimr: f64,
}

impl LocationStats {
    /// Locations whose series has zero spread (no anomaly evidence).
    pub fn degenerate_locations(&self) -> Vec<usize> {
        self.sigma
            .iter()
            .enumerate()
            .filter(|(_, &s)| s == 0.0)
            .map(|(i, _)| i)
            .collect()
    }
}

pub(crate) fn mean_and_pop_std(series: &[f64]) -> (f64, f64) {
    let n = series.len() as f64;
    let mean = series.iter().sum::<f64>() / n;
    let var = series.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Compute per-location and aggregate mean/spread over all years.
pub fn location_stats(dataset: &RainfallDataset) -> Result<LocationStats> {
    let t = dataset.n_years();
    if t < 2 {
        return Err(Error::InsufficientYears(t));
    }
    let mut mu = Vec::with_capacity(dataset.n_locations());
    let mut sigma = Vec::with_capacity(dataset.n_locations());
    for s in 0..dataset.n_locations() {
        let (m, sd) = mean_and_pop_std(dataset.series(s));
        mu.push(m);
        sigma.push(sd);
    }
    let (mu_aimr, sigma_aimr) = mean_and_pop_std(dataset.aimr());
    Ok(LocationStats {
        mu,
        sigma,
        mu_aimr,
        sigma_aimr,
    })
}

/// Threshold every node at `mu_s ± sigma_s` and every year's aggregate at
/// `mu ± sigma`. Zero-spread locations are assigned normal everywhere.
pub fn lwa_assign(dataset: &RainfallDataset, stats: &LocationStats) -> StateField {
    let s_total = dataset.n_locations();
    let t_total = dataset.n_years();
    let mut field = StateField::normal(s_total, t_total);
    for s in 0..s_total {
        if stats.sigma[s] == 0.0 {
            continue; // no variability, no anomaly evidence
        }
        let high = stats.mu[s] + stats.sigma[s];
        let low = stats.mu[s] - stats.sigma[s];
        for t in 0..t_total {
            let y = dataset.value(s, t);
            let state = if y >= high {
                State::High
            } else if y <= low {
                State::Low
            } else {
                State::Normal
            };
            field.set(s, t, state);
        }
    }
    if stats.sigma_aimr > 0.0 {
        let high = stats.mu_aimr + stats.sigma_aimr;
        let low = stats.mu_aimr - stats.sigma_aimr;
        for (t, &y) in dataset.aimr().iter().enumerate() {
            let state = if y >= high {
                State::High
            } else if y <= low {
                State::Low
            } else {
                State::Normal
            };
            field.set_aimr(t, state);
        }
    }
    field
}

/// Excess/deficient years by aggregate rainfall (H, L) and by widespread
/// local anomalies (HL, LL), with the thresholds that produced them.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct YearSets {
    /// Year indices with aggregate state 1.
    pub h: BTreeSet<usize>,
    /// Year indices with aggregate state 2.
    pub l: BTreeSet<usize>,
    /// Year indices with exceptionally many state-1 locations.
    pub hl: BTreeSet<usize>,
    /// Year indices with exceptionally many state-2 locations.
    pub ll: BTreeSet<usize>,
    pub mu_n1: f64,
    pub sigma_n1: f64,
    pub mu_n2: f64,
    pub sigma_n2: f64,
    /// True when the count series had zero spread, making the threshold
    /// equal to the mean so every year qualifies.
    pub degenerate_n1: bool,
    pub degenerate_n2: bool,
}

/// Identify widespread-anomaly years from a baseline assignment.
///
/// `N1(t)` and `N2(t)` count state-1 and state-2 locations per year; a year
/// joins HL (LL) when its count reaches the count series' mean plus one
/// population standard deviation. Comparisons are inclusive, so a constant
/// count series puts every year in the set (flagged degenerate).
pub fn widespread_year_sets(z0: &StateField) -> YearSets {
    let t_total = z0.n_years();
    let n1: Vec<f64> = (0..t_total)
        .map(|t| z0.count_in_year(t, State::High) as f64)
        .collect();
    let n2: Vec<f64> = (0..t_total)
        .map(|t| z0.count_in_year(t, State::Low) as f64)
        .collect();
    let (mu_n1, sigma_n1) = mean_and_pop_std(&n1);
    let (mu_n2, sigma_n2) = mean_and_pop_std(&n2);
    let hl = (0..t_total)
        .filter(|&t| n1[t] >= mu_n1 + sigma_n1)
        .collect();
    let ll = (0..t_total)
        .filter(|&t| n2[t] >= mu_n2 + sigma_n2)
        .collect();
    let h = (0..t_total).filter(|&t| z0.aimr(t) == State::High).collect();
    let l = (0..t_total).filter(|&t| z0.aimr(t) == State::Low).collect();
    YearSets {
        h,
        l,
        hl,
        ll,
        mu_n1,
        sigma_n1,
        mu_n2,
        sigma_n2,
        degenerate_n1: sigma_n1 == 0.0,
        degenerate_n2: sigma_n2 == 0.0,
    }
}
