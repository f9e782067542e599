//! Anomaly statistics and comparison reports.
//!
//! Everything here is pure bookkeeping over extracted anomalies and state
//! fields: aggregate size/intensity means, gain/loss counts against a
//! reference assignment, overlap of aggregate-state year sets, per-year
//! assignment statistics and size correlations. Means over an empty
//! selection are reported absent, never as zero.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::anomaly::Anomaly;
use crate::data::RainfallDataset;
use crate::error::{Error, Result};
use crate::lwa::{LocationStats, YearSets};
use crate::state::{Sign, State, StateField};

/// Counts and means of anomaly sizes and intensities, by sign.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AnomalyStats {
    /// Smallest spatio-temporal size included.
    pub min_st_size: usize,
    pub count_pos: usize,
    pub count_neg: usize,
    pub st_size_pos: Option<f64>,
    pub st_size_neg: Option<f64>,
    pub spatial_size_pos: Option<f64>,
    pub spatial_size_neg: Option<f64>,
    pub temporal_size_pos: Option<f64>,
    pub temporal_size_neg: Option<f64>,
    pub intensity_pos: Option<f64>,
    pub intensity_neg: Option<f64>,
}

fn mean_of(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        None
    } else {
        Some(values.iter().sum::<f64>() / values.len() as f64)
    }
}

/// Aggregate anomaly statistics after dropping components smaller than
/// `min_st_size` nodes.
pub fn aggregate_stats(anomalies: &[Anomaly], min_st_size: usize) -> AnomalyStats {
    let kept: Vec<&Anomaly> = anomalies
        .iter()
        .filter(|a| a.st_size >= min_st_size)
        .collect();
    let by_sign = |sign: Sign| -> Vec<&&Anomaly> {
        kept.iter().filter(|a| a.sign == sign).collect()
    };
    let pos = by_sign(Sign::Positive);
    let neg = by_sign(Sign::Negative);
    let sizes = |set: &[&&Anomaly], f: fn(&Anomaly) -> f64| -> Vec<f64> {
        set.iter().map(|a| f(a)).collect()
    };
    let intensities = |set: &[&&Anomaly]| -> Vec<f64> {
        set.iter().filter_map(|a| a.intensity).collect()
    };
    AnomalyStats {
        min_st_size,
        count_pos: pos.len(),
        count_neg: neg.len(),
        st_size_pos: mean_of(&sizes(&pos, |a| a.st_size as f64)),
        st_size_neg: mean_of(&sizes(&neg, |a| a.st_size as f64)),
        spatial_size_pos: mean_of(&sizes(&pos, |a| a.spatial_size as f64)),
        spatial_size_neg: mean_of(&sizes(&neg, |a| a.spatial_size as f64)),
        temporal_size_pos: mean_of(&sizes(&pos, |a| a.temporal_size as f64)),
        temporal_size_neg: mean_of(&sizes(&neg, |a| a.temporal_size as f64)),
        intensity_pos: mean_of(&intensities(&pos)),
        intensity_neg: mean_of(&intensities(&neg)),
    }
}

/// Node bookkeeping against a reference assignment: totals per anomaly
/// state and counts gained/lost relative to the reference.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GainLossReport {
    pub n1: usize,
    pub n2: usize,
    pub n1_ref: usize,
    pub n2_ref: usize,
    /// Nodes with state 1 here but not in the reference.
    pub ng1: usize,
    /// Nodes with state 2 here but not in the reference.
    pub ng2: usize,
    /// Nodes with state 1 in the reference but not here.
    pub nl1: usize,
    /// Nodes with state 2 in the reference but not here.
    pub nl2: usize,
}

/// Compare a state field against a reference of the same shape.
pub fn gain_loss(z: &StateField, z_ref: &StateField) -> Result<GainLossReport> {
    if !z.same_shape(z_ref) {
        return Err(Error::ShapeMismatch(format!(
            "{}x{} vs {}x{}",
            z.n_locations(),
            z.n_years(),
            z_ref.n_locations(),
            z_ref.n_years()
        )));
    }
    let mut report = GainLossReport {
        n1: 0,
        n2: 0,
        n1_ref: 0,
        n2_ref: 0,
        ng1: 0,
        ng2: 0,
        nl1: 0,
        nl2: 0,
    };
    for s in 0..z.n_locations() {
        for t in 0..z.n_years() {
            let a = z.get(s, t);
            let b = z_ref.get(s, t);
            if a == State::High {
                report.n1 += 1;
                if b != State::High {
                    report.ng1 += 1;
                }
            }
            if a == State::Low {
                report.n2 += 1;
                if b != State::Low {
                    report.ng2 += 1;
                }
            }
            if b == State::High {
                report.n1_ref += 1;
                if a != State::High {
                    report.nl1 += 1;
                }
            }
            if b == State::Low {
                report.n2_ref += 1;
                if a != State::Low {
                    report.nl2 += 1;
                }
            }
        }
    }
    Ok(report)
}

/// Year sets by aggregate state and their overlaps with the baseline sets.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OverlapReport {
    pub h: BTreeSet<usize>,
    pub l: BTreeSet<usize>,
    pub hl: BTreeSet<usize>,
    pub ll: BTreeSet<usize>,
    /// Years the model assigns aggregate state 1.
    pub zh: BTreeSet<usize>,
    /// Years the model assigns aggregate state 2.
    pub zl: BTreeSet<usize>,
    /// `|H ∩ ZH| / |H|`; absent when H is empty.
    pub frac_h_in_zh: Option<f64>,
    /// `|HL ∩ ZH| / |HL|`.
    pub frac_hl_in_zh: Option<f64>,
    /// `|L ∩ ZL| / |L|`.
    pub frac_l_in_zl: Option<f64>,
    /// `|LL ∩ ZL| / |LL|`.
    pub frac_ll_in_zl: Option<f64>,
}

fn overlap_fraction(reference: &BTreeSet<usize>, found: &BTreeSet<usize>) -> Option<f64> {
    if reference.is_empty() {
        None
    } else {
        Some(reference.intersection(found).count() as f64 / reference.len() as f64)
    }
}

/// Overlap of the model's aggregate-state years with the baseline year sets.
pub fn overlap_report(z_mrf: &StateField, year_sets: &YearSets) -> OverlapReport {
    let zh: BTreeSet<usize> = (0..z_mrf.n_years())
        .filter(|&t| z_mrf.aimr(t) == State::High)
        .collect();
    let zl: BTreeSet<usize> = (0..z_mrf.n_years())
        .filter(|&t| z_mrf.aimr(t) == State::Low)
        .collect();
    OverlapReport {
        frac_h_in_zh: overlap_fraction(&year_sets.h, &zh),
        frac_hl_in_zh: overlap_fraction(&year_sets.hl, &zh),
        frac_l_in_zl: overlap_fraction(&year_sets.l, &zl),
        frac_ll_in_zl: overlap_fraction(&year_sets.ll, &zl),
        h: year_sets.h.clone(),
        l: year_sets.l.clone(),
        hl: year_sets.hl.clone(),
        ll: year_sets.ll.clone(),
        zh,
        zl,
    }
}

/// Mean per-year location counts, overall and conditioned on excess/deficient
/// years.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct YearAssignmentStats {
    /// Mean over all years of the per-year state-1 location count.
    pub n1y: f64,
    /// Mean over all years of the per-year state-2 location count.
    pub n2y: f64,
    /// Mean state-1 count over excess years; absent when H is empty.
    pub n1h: Option<f64>,
    /// Mean state-2 count over deficient years; absent when L is empty.
    pub n2l: Option<f64>,
    /// Mean of (state-1 count - state-2 count) over excess years.
    pub d12h: Option<f64>,
    /// Mean of (state-2 count - state-1 count) over deficient years.
    pub d21l: Option<f64>,
}

/// Per-year assignment statistics of a state field, conditioned on the
/// baseline year sets.
pub fn year_assignment_stats(z: &StateField, year_sets: &YearSets) -> YearAssignmentStats {
    let t_total = z.n_years();
    let n1: Vec<f64> = (0..t_total)
        .map(|t| z.count_in_year(t, State::High) as f64)
        .collect();
    let n2: Vec<f64> = (0..t_total)
        .map(|t| z.count_in_year(t, State::Low) as f64)
        .collect();
    let over = |set: &BTreeSet<usize>, f: &dyn Fn(usize) -> f64| -> Option<f64> {
        if set.is_empty() {
            None
        } else {
            Some(set.iter().map(|&t| f(t)).sum::<f64>() / set.len() as f64)
        }
    };
    YearAssignmentStats {
        n1y: n1.iter().sum::<f64>() / t_total as f64,
        n2y: n2.iter().sum::<f64>() / t_total as f64,
        n1h: over(&year_sets.h, &|t| n1[t]),
        n2l: over(&year_sets.l, &|t| n2[t]),
        d12h: over(&year_sets.h, &|t| n1[t] - n2[t]),
        d21l: over(&year_sets.l, &|t| n2[t] - n1[t]),
    }
}

/// Pearson correlations between anomaly statistics, by sign.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CorrelationReport {
    pub positive: CorrelationPairs,
    pub negative: CorrelationPairs,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CorrelationPairs {
    pub temporal_vs_spatial: Option<f64>,
    pub st_vs_spatial: Option<f64>,
    pub st_vs_temporal: Option<f64>,
    pub st_vs_intensity: Option<f64>,
}

pub(crate) fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return None;
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    let mut sxy = 0.0;
    for i in 0..x.len() {
        let dx = x[i] - mx;
        let dy = y[i] - my;
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some(sxy / (sxx * syy).sqrt())
}

fn pairs_for(anomalies: &[&Anomaly]) -> CorrelationPairs {
    let spatial: Vec<f64> = anomalies.iter().map(|a| a.spatial_size as f64).collect();
    let temporal: Vec<f64> = anomalies.iter().map(|a| a.temporal_size as f64).collect();
    let st: Vec<f64> = anomalies.iter().map(|a| a.st_size as f64).collect();
    let with_intensity: Vec<&&Anomaly> =
        anomalies.iter().filter(|a| a.intensity.is_some()).collect();
    let st_i: Vec<f64> = with_intensity.iter().map(|a| a.st_size as f64).collect();
    let intensity: Vec<f64> = with_intensity
        .iter()
        .map(|a| a.intensity.unwrap())
        .collect();
    CorrelationPairs {
        temporal_vs_spatial: pearson(&temporal, &spatial),
        st_vs_spatial: pearson(&st, &spatial),
        st_vs_temporal: pearson(&st, &temporal),
        st_vs_intensity: pearson(&st_i, &intensity),
    }
}

/// Correlations of size and intensity statistics across individual
/// anomalies, separately by sign. Needs at least two anomalies of a sign
/// for that sign's coefficients; zero-variance vectors yield absent values.
pub fn size_correlations(anomalies: &[Anomaly]) -> CorrelationReport {
    let pos: Vec<&Anomaly> = anomalies.iter().filter(|a| a.sign == Sign::Positive).collect();
    let neg: Vec<&Anomaly> = anomalies.iter().filter(|a| a.sign == Sign::Negative).collect();
    CorrelationReport {
        positive: pairs_for(&pos),
        negative: pairs_for(&neg),
    }
}

/// Narrative quantities for one anomaly: covered locations, year span,
/// long-term mean over the covered locations and the per-year observed
/// means over them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseReport {
    pub anomaly_id: usize,
    pub sign: Sign,
    pub location_ids: Vec<usize>,
    pub first_year: i32,
    pub last_year: i32,
    pub spatial_size: usize,
    pub temporal_size: usize,
    pub st_size: usize,
    /// Mean of the covered locations' long-term means (mm/day).
    pub long_term_mean: f64,
    /// Observed mean over the covered locations, one entry per covered year.
    pub per_year_observed: Vec<(i32, f64)>,
    pub intensity: f64,
}

/// Build the case-study report for one anomaly.
pub fn case_report(
    anomaly: &Anomaly,
    dataset: &RainfallDataset,
    stats: &LocationStats,
) -> Result<CaseReport> {
    let mut location_ids: Vec<usize> = anomaly.nodes.iter().map(|&(s, _)| s).collect();
    location_ids.sort_unstable();
    location_ids.dedup();
    let mut year_indices: Vec<usize> = anomaly.nodes.iter().map(|&(_, t)| t).collect();
    year_indices.sort_unstable();
    year_indices.dedup();

    let long_term_mean = location_ids.iter().map(|&s| stats.mu[s]).sum::<f64>()
        / location_ids.len() as f64;
    let per_year_observed = year_indices
        .iter()
        .map(|&t| {
            let mean = location_ids
                .iter()
                .map(|&s| dataset.value(s, t))
                .sum::<f64>()
                / location_ids.len() as f64;
            (dataset.years()[t], mean)
        })
        .collect();
    let intensity = match anomaly.intensity {
        Some(i) => i,
        None => crate::anomaly::anomaly_intensity(anomaly, dataset, stats)?,
    };
    Ok(CaseReport {
        anomaly_id: anomaly.id,
        sign: anomaly.sign,
        spatial_size: anomaly.spatial_size,
        temporal_size: anomaly.temporal_size,
        st_size: anomaly.st_size,
        first_year: dataset.years()[year_indices[0]],
        last_year: dataset.years()[*year_indices.last().unwrap()],
        location_ids,
        long_term_mean,
        per_year_observed,
        intensity,
    })
}
