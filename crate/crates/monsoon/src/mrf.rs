//! The Markov random field: potential functions, Gaussian emissions and the
//! unnormalized log-likelihood.
//!
//! Three kinds of coherence act on the latent states. Spatial edges weight
//! agreeing neighbors by `exp(C(s,s'))` against `exp(D)` for disagreement;
//! temporal edges weight same-state adjacent years by `P` against `1-P`; and
//! each node is tied to its year's aggregate state with weight `exp(1/S)`
//! when they coincide. Node potentials act as per-state priors. Any factor
//! can be switched off, which removes it from the (unnormalized) likelihood.

use serde::{Deserialize, Serialize};

use crate::data::RainfallDataset;
use crate::error::{Error, Result};
use crate::lwa::{mean_and_pop_std, LocationStats, YearSets};
use crate::state::{State, StateField};

const LN_2PI: f64 = 1.8378770664093453;

/// How spatial edge weights `C(s,s')` are chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SpatialMode {
    /// Equal weight on every edge.
    Unif,
    /// Proportional to the fraction of years the two locations deviate from
    /// their climatologies with the same sign.
    Prop,
    /// Proportional to the fraction of years the two locations share a
    /// baseline (LWA) state.
    Anml,
    /// Equal weights with a non-zero mismatch exponent `D`.
    Mxd,
    /// Spatial coherence disabled.
    Off,
}

/// Spatial edge potential settings.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SpatialPotentialSpec {
    pub mode: SpatialMode,
    /// Shared `C` for `unif`/`mxd`.
    pub c_uniform: f64,
    /// Mismatch exponent: a differing pair contributes `exp(D)`.
    pub d: f64,
    /// Scale applied to the data-driven fractions of `prop`/`anml`.
    pub lambda: f64,
}

impl Default for SpatialPotentialSpec {
    fn default() -> Self {
        SpatialPotentialSpec {
            mode: SpatialMode::Prop,
            c_uniform: 1.0,
            d: 0.0,
            lambda: 1.0,
        }
    }
}

/// Temporal edge potential: `P` for agreement, `1-P` otherwise.
#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize)]
pub struct TemporalPotentialSpec {
    /// Temporal coherence parameter in (0,1); `None` disables the factor.
    pub p: Option<f64>,
}

/// Named node-potential schemes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum NodeScheme {
    Np1,
    Np2,
    Np3,
    Np4,
    Np5,
    Np6,
    Np7,
    Np8,
    /// Explicit `(C1, C2, C3)` at every node.
    Custom,
}

impl NodeScheme {
    pub fn parse(name: &str) -> Result<NodeScheme> {
        match name.to_ascii_uppercase().as_str() {
            "NP1" => Ok(NodeScheme::Np1),
            "NP2" => Ok(NodeScheme::Np2),
            "NP3" => Ok(NodeScheme::Np3),
            "NP4" => Ok(NodeScheme::Np4),
            "NP5" => Ok(NodeScheme::Np5),
            "NP6" => Ok(NodeScheme::Np6),
            "NP7" => Ok(NodeScheme::Np7),
            "NP8" => Ok(NodeScheme::Np8),
            "CUSTOM" => Ok(NodeScheme::Custom),
            other => Err(Error::InvalidScheme(other.to_string())),
        }
    }
}

/// Node potential configuration.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct NodePotentialSpec {
    pub scheme: NodeScheme,
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
}

impl Default for NodePotentialSpec {
    fn default() -> Self {
        NodePotentialSpec {
            scheme: NodeScheme::Np1,
            c1: 1.0,
            c2: 1.0,
            c3: 1.0,
        }
    }
}

/// Full model configuration.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct MrfConfig {
    pub spatial: SpatialPotentialSpec,
    pub temporal: TemporalPotentialSpec,
    pub node: NodePotentialSpec,
    /// Link each node to its year's aggregate state.
    pub aimr_link: bool,
}

impl Default for MrfConfig {
    fn default() -> Self {
        MrfConfig {
            spatial: SpatialPotentialSpec::default(),
            temporal: TemporalPotentialSpec { p: Some(0.9) },
            node: NodePotentialSpec::default(),
            aimr_link: true,
        }
    }
}

impl MrfConfig {
    pub fn validate(&self) -> Result<()> {
        if let Some(p) = self.temporal.p {
            if !(p > 0.0 && p < 1.0) {
                return Err(Error::InvalidParameter(format!(
                    "temporal coherence parameter must lie in (0,1), got {p}"
                )));
            }
        }
        for (name, v) in [
            ("node.C1", self.node.c1),
            ("node.C2", self.node.c2),
            ("node.C3", self.node.c3),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter(format!(
                    "{name} must be strictly positive, got {v}"
                )));
            }
        }
        if !self.spatial.c_uniform.is_finite()
            || !self.spatial.d.is_finite()
            || !self.spatial.lambda.is_finite()
        {
            return Err(Error::InvalidParameter(
                "spatial parameters must be finite".into(),
            ));
        }
        Ok(())
    }

    /// True when every coherence factor is disabled and the model degenerates
    /// to independent Gaussian emissions.
    pub fn is_coherence_free(&self) -> bool {
        self.spatial.mode == SpatialMode::Off && self.temporal.p.is_none() && !self.aimr_link
    }
}

/// Spatial edge potential `exp(C)` on agreement, `exp(D)` otherwise.
pub fn spatial_potential(c_edge: f64, d: f64, same_state: bool) -> f64 {
    if same_state {
        c_edge.exp()
    } else {
        d.exp()
    }
}

/// Temporal edge potential `P` on agreement, `1-P` otherwise.
pub fn temporal_potential(p: f64, same_state: bool) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "temporal coherence parameter must lie in (0,1), got {p}"
        )));
    }
    Ok(if same_state { p } else { 1.0 - p })
}

/// Aggregate-link potential `exp(1/S)` on agreement, `1` otherwise.
pub fn aimr_edge_potential(n_locations: usize, same_state: bool) -> f64 {
    if same_state {
        (1.0 / n_locations as f64).exp()
    } else {
        1.0
    }
}

/// Per-edge spatial weights, aligned with the grid's neighbor lists.
#[derive(Debug, Clone)]
pub struct SpatialCoupling {
    /// `c[s][k]` pairs with `grid.neighbors(s)[k]`.
    c: Vec<Vec<f64>>,
    d: f64,
}

impl SpatialCoupling {
    pub fn c(&self, s: usize, k: usize) -> f64 {
        self.c[s][k]
    }

    pub fn d(&self) -> f64 {
        self.d
    }

    /// Mean edge weight, for reporting.
    pub fn mean_c(&self) -> f64 {
        let total: f64 = self.c.iter().flatten().sum();
        let count: usize = self.c.iter().map(Vec::len).sum();
        if count == 0 {
            0.0
        } else {
            total / count as f64
        }
    }
}

/// Estimate the per-edge `C(s,s')` values for the configured spatial mode.
pub fn estimate_spatial_coupling(
    dataset: &RainfallDataset,
    z0: &StateField,
    stats: &LocationStats,
    spec: &SpatialPotentialSpec,
) -> Result<SpatialCoupling> {
    let grid = dataset.grid();
    let t_total = dataset.n_years();
    let mut c = Vec::with_capacity(grid.len());
    for s in 0..grid.len() {
        let nb = grid.neighbors(s)?;
        let mut row = Vec::with_capacity(nb.len());
        for &n in nb {
            let value = match spec.mode {
                SpatialMode::Unif | SpatialMode::Mxd => spec.c_uniform,
                SpatialMode::Prop => {
                    let agree = (0..t_total)
                        .filter(|&t| {
                            (dataset.value(s, t) >= stats.mu[s])
                                == (dataset.value(n, t) >= stats.mu[n])
                        })
                        .count();
                    spec.lambda * agree as f64 / t_total as f64
                }
                SpatialMode::Anml => {
                    let agree = (0..t_total).filter(|&t| z0.get(s, t) == z0.get(n, t)).count();
                    spec.lambda * agree as f64 / t_total as f64
                }
                SpatialMode::Off => {
                    return Err(Error::NotApplicable(
                        "spatial coherence is disabled".into(),
                    ))
                }
            };
            row.push(value);
        }
        c.push(row);
    }
    Ok(SpatialCoupling { c, d: spec.d })
}

/// Resolved node potentials: scheme constants plus the wet/dry location sets
/// and excess/deficient year sets the location- and year-specific schemes
/// condition on.
#[derive(Debug, Clone)]
pub struct NodePotentialTable {
    scheme: NodeScheme,
    custom: [f64; 3],
    wet_location: Vec<bool>,
    dry_location: Vec<bool>,
    excess_year: Vec<bool>,
    deficit_year: Vec<bool>,
}

impl NodePotentialTable {
    /// Resolve a scheme against the dataset's climatology and year sets.
    ///
    /// Wet/dry locations are those whose long-term mean sits at least one
    /// standard deviation above/below the cross-location mean of the
    /// long-term means; excess/deficient years come from the aggregate
    /// states of the baseline assignment.
    pub fn resolve(
        spec: &NodePotentialSpec,
        stats: &LocationStats,
        year_sets: &YearSets,
        n_years: usize,
    ) -> NodePotentialTable {
        let (mu_of_mu, sigma_of_mu) = mean_and_pop_std(&stats.mu);
        let wet_location = stats
            .mu
            .iter()
            .map(|&m| m >= mu_of_mu + sigma_of_mu && sigma_of_mu > 0.0)
            .collect();
        let dry_location = stats
            .mu
            .iter()
            .map(|&m| m <= mu_of_mu - sigma_of_mu && sigma_of_mu > 0.0)
            .collect();
        let excess_year = (0..n_years).map(|t| year_sets.h.contains(&t)).collect();
        let deficit_year = (0..n_years).map(|t| year_sets.l.contains(&t)).collect();
        NodePotentialTable {
            scheme: spec.scheme,
            custom: [spec.c1, spec.c2, spec.c3],
            wet_location,
            dry_location,
            excess_year,
            deficit_year,
        }
    }

    /// Uniform potentials, for fixtures and coherence-free models.
    pub fn uniform(n_locations: usize, n_years: usize) -> NodePotentialTable {
        NodePotentialTable {
            scheme: NodeScheme::Np1,
            custom: [1.0; 3],
            wet_location: vec![false; n_locations],
            dry_location: vec![false; n_locations],
            excess_year: vec![false; n_years],
            deficit_year: vec![false; n_years],
        }
    }

    /// Potential of `state` at node `(s, t)`.
    pub fn value(&self, s: usize, t: usize, state: State) -> f64 {
        let i = state.index();
        match self.scheme {
            NodeScheme::Np1 => 1.0,
            NodeScheme::Np2 => [2.0, 1.0, 1.0][i],
            NodeScheme::Np3 => [1.0, 2.0, 1.0][i],
            NodeScheme::Np4 => [2.0, 2.0, 1.0][i],
            NodeScheme::Np5 => {
                if self.wet_location[s] {
                    [2.0, 1.0, 1.0][i]
                } else if self.dry_location[s] {
                    [1.0, 2.0, 1.0][i]
                } else {
                    1.0
                }
            }
            NodeScheme::Np6 => {
                if self.wet_location[s] {
                    [1.0, 2.0, 1.0][i]
                } else if self.dry_location[s] {
                    [2.0, 1.0, 1.0][i]
                } else {
                    1.0
                }
            }
            NodeScheme::Np7 => self.year_value(t, i, false),
            NodeScheme::Np8 => self.year_value(t, i, true),
            NodeScheme::Custom => self.custom[i],
        }
    }

    /// Potential of `state` at the aggregate node of year `t`. Location-
    /// specific schemes are neutral here; year-specific ones apply.
    pub fn value_aimr(&self, t: usize, state: State) -> f64 {
        match self.scheme {
            NodeScheme::Np5 | NodeScheme::Np6 => 1.0,
            _ => self.value(0, t, state),
        }
    }

    fn year_value(&self, t: usize, i: usize, reversed: bool) -> f64 {
        let (in_excess, in_deficit) = (self.excess_year[t], self.deficit_year[t]);
        let (fav_high, fav_low) = if reversed {
            (in_deficit, in_excess)
        } else {
            (in_excess, in_deficit)
        };
        if fav_high {
            [2.0, 1.0, 1.0][i]
        } else if fav_low {
            [1.0, 2.0, 1.0][i]
        } else {
            1.0
        }
    }
}

/// Gaussian emission parameters: state-specific means with one spread per
/// location, and the same for the aggregate series.
#[derive(Debug, Clone, PartialEq)]
pub struct EmissionParams {
    /// `mu_state[s][State::index()]`, mm/day.
    pub mu_state: Vec<[f64; 3]>,
    /// One spread per location, shared across states.
    pub sigma_loc: Vec<f64>,
    pub mu_aimr_state: [f64; 3],
    pub sigma_aimr: f64,
}

fn state_means(series: &[f64], states: impl Fn(usize) -> State, mu: f64, sigma: f64) -> [f64; 3] {
    let mut sums = [0.0; 3];
    let mut counts = [0usize; 3];
    for (t, &y) in series.iter().enumerate() {
        let i = states(t).index();
        sums[i] += y;
        counts[i] += 1;
    }
    // Empty states fall back to the location-wise thresholds, keeping the
    // mode interpretable.
    let fallback = [mu + sigma, mu - sigma, mu];
    let mut out = [0.0; 3];
    for i in 0..3 {
        out[i] = if counts[i] > 0 {
            sums[i] / counts[i] as f64
        } else {
            fallback[i]
        };
    }
    out
}

/// Estimate emission parameters from a state assignment.
///
/// State means are averages of the observations assigned to each state;
/// spreads are the population standard deviation of the whole series,
/// independent of state. A zero spread is replaced by the mean positive
/// spread across locations when one exists.
pub fn estimate_emissions(dataset: &RainfallDataset, z: &StateField) -> EmissionParams {
    let stats = crate::lwa::location_stats(dataset)
        .unwrap_or_else(|_| degenerate_stats(dataset));
    let mut params = EmissionParams {
        mu_state: vec![[0.0; 3]; dataset.n_locations()],
        sigma_loc: stats.sigma.clone(),
        mu_aimr_state: [0.0; 3],
        sigma_aimr: stats.sigma_aimr,
    };
    reestimate_state_means(&mut params, dataset, z, &stats);

    let positive: Vec<f64> = params
        .sigma_loc
        .iter()
        .copied()
        .filter(|&v| v > 0.0)
        .collect();
    if !positive.is_empty() {
        let mean_sigma = positive.iter().sum::<f64>() / positive.len() as f64;
        for s in &mut params.sigma_loc {
            if *s == 0.0 {
                *s = mean_sigma;
            }
        }
        if params.sigma_aimr == 0.0 {
            params.sigma_aimr = mean_sigma;
        }
    }
    params
}

fn degenerate_stats(dataset: &RainfallDataset) -> LocationStats {
    // T = 1: means are the single observations, spreads zero.
    LocationStats {
        mu: (0..dataset.n_locations())
            .map(|s| dataset.value(s, 0))
            .collect(),
        sigma: vec![0.0; dataset.n_locations()],
        mu_aimr: dataset.aimr().first().copied().unwrap_or(0.0),
        sigma_aimr: 0.0,
    }
}

/// Recompute only the state means from the current assignment, leaving the
/// spreads untouched. Used between sweeps.
pub fn reestimate_state_means(
    params: &mut EmissionParams,
    dataset: &RainfallDataset,
    z: &StateField,
    stats: &LocationStats,
) {
    for s in 0..dataset.n_locations() {
        params.mu_state[s] = state_means(
            dataset.series(s),
            |t| z.get(s, t),
            stats.mu[s],
            stats.sigma[s],
        );
    }
    params.mu_aimr_state = state_means(
        dataset.aimr(),
        |t| z.aimr(t),
        stats.mu_aimr,
        stats.sigma_aimr,
    );
}

pub(crate) fn log_normal_density(y: f64, mu: f64, sigma: f64) -> f64 {
    let z = (y - mu) / sigma;
    -sigma.ln() - 0.5 * LN_2PI - 0.5 * z * z
}

/// A fully assembled model: dataset, resolved potentials and configuration.
/// Immutable during sampling; emission parameters travel separately because
/// the sampler re-estimates them.
#[derive(Debug, Clone)]
pub struct MrfModel<'a> {
    dataset: &'a RainfallDataset,
    config: MrfConfig,
    spatial: Option<SpatialCoupling>,
    node: NodePotentialTable,
    ln_p: f64,
    ln_1mp: f64,
    inv_s: f64,
}

impl<'a> MrfModel<'a> {
    /// Assemble a model. `z0` (typically the baseline assignment) feeds the
    /// `anml` spatial mode and, through `year_sets`, the year-specific node
    /// schemes.
    pub fn new(
        dataset: &'a RainfallDataset,
        config: MrfConfig,
        z0: &StateField,
        stats: &LocationStats,
        year_sets: &YearSets,
    ) -> Result<MrfModel<'a>> {
        config.validate()?;
        let spatial = if config.spatial.mode == SpatialMode::Off {
            None
        } else {
            Some(estimate_spatial_coupling(
                dataset,
                z0,
                stats,
                &config.spatial,
            )?)
        };
        let node = NodePotentialTable::resolve(&config.node, stats, year_sets, dataset.n_years());
        let (ln_p, ln_1mp) = match config.temporal.p {
            Some(p) => (p.ln(), (1.0 - p).ln()),
            None => (0.0, 0.0),
        };
        Ok(MrfModel {
            dataset,
            config,
            spatial,
            node,
            ln_p,
            ln_1mp,
            inv_s: 1.0 / dataset.n_locations() as f64,
        })
    }

    /// Assemble a model from explicitly resolved parts, for fixtures and
    /// small-instance oracles.
    pub fn from_parts(
        dataset: &'a RainfallDataset,
        config: MrfConfig,
        spatial: Option<SpatialCoupling>,
        node: NodePotentialTable,
    ) -> Result<MrfModel<'a>> {
        config.validate()?;
        let (ln_p, ln_1mp) = match config.temporal.p {
            Some(p) => (p.ln(), (1.0 - p).ln()),
            None => (0.0, 0.0),
        };
        Ok(MrfModel {
            dataset,
            config,
            spatial,
            node,
            ln_p,
            ln_1mp,
            inv_s: 1.0 / dataset.n_locations() as f64,
        })
    }

    pub fn dataset(&self) -> &'a RainfallDataset {
        self.dataset
    }

    pub fn config(&self) -> &MrfConfig {
        &self.config
    }

    pub fn spatial(&self) -> Option<&SpatialCoupling> {
        self.spatial.as_ref()
    }

    pub fn node_potentials(&self) -> &NodePotentialTable {
        &self.node
    }

    pub fn temporal_on(&self) -> bool {
        self.config.temporal.p.is_some()
    }

    pub fn aimr_link_on(&self) -> bool {
        self.config.aimr_link
    }

    pub(crate) fn ln_temporal(&self, same: bool) -> f64 {
        if same {
            self.ln_p
        } else {
            self.ln_1mp
        }
    }

    pub(crate) fn ln_aimr_link(&self, same: bool) -> f64 {
        if same {
            self.inv_s
        } else {
            0.0
        }
    }

    fn check_sigmas(&self, params: &EmissionParams) -> Result<()> {
        if let Some(s) = params.sigma_loc.iter().position(|&v| v <= 0.0) {
            return Err(Error::DegenerateEmission(s));
        }
        if params.sigma_aimr <= 0.0 {
            return Err(Error::DegenerateEmission(usize::MAX));
        }
        Ok(())
    }

    /// Unnormalized log-likelihood of a full assignment (observation and
    /// coherence factors; the partition function is never computed).
    pub fn log_likelihood(&self, z: &StateField, params: &EmissionParams) -> Result<f64> {
        self.check_sigmas(params)?;
        let s_total = self.dataset.n_locations();
        let t_total = self.dataset.n_years();
        let mut ll = 0.0;

        for s in 0..s_total {
            let sigma = params.sigma_loc[s];
            for t in 0..t_total {
                let state = z.get(s, t);
                ll += self.node.value(s, t, state).ln();
                ll += log_normal_density(
                    self.dataset.value(s, t),
                    params.mu_state[s][state.index()],
                    sigma,
                );
                if self.config.aimr_link {
                    ll += self.ln_aimr_link(state == z.aimr(t));
                }
            }
        }

        if let Some(sp) = &self.spatial {
            let grid = self.dataset.grid();
            for s in 0..s_total {
                for (k, &n) in grid.neighbors(s)?.iter().enumerate() {
                    if s < n {
                        for t in 0..t_total {
                            ll += if z.get(s, t) == z.get(n, t) {
                                sp.c(s, k)
                            } else {
                                sp.d()
                            };
                        }
                    }
                }
            }
        }

        if self.temporal_on() {
            for s in 0..s_total {
                for t in 0..t_total.saturating_sub(1) {
                    ll += self.ln_temporal(z.get(s, t) == z.get(s, t + 1));
                }
            }
        }

        for (t, &y) in self.dataset.aimr().iter().enumerate() {
            let state = z.aimr(t);
            ll += self.node.value_aimr(t, state).ln();
            ll += log_normal_density(
                y,
                params.mu_aimr_state[state.index()],
                params.sigma_aimr,
            );
        }

        if !ll.is_finite() {
            return Err(Error::Numerical(
                "log-likelihood is not finite".into(),
            ));
        }
        Ok(ll)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridIndex;

    fn line_dataset(rows: Vec<Vec<f64>>) -> RainfallDataset {
        let coords: Vec<(f64, f64)> = (0..rows.len()).map(|i| (0.0, i as f64)).collect();
        let grid = GridIndex::build(&coords).unwrap();
        let t = rows[0].len();
        let years: Vec<i32> = (0..t as i32).map(|i| 1901 + i).collect();
        let mut y = Vec::new();
        for r in rows {
            y.extend(r);
        }
        RainfallDataset::new(grid, years, y).unwrap()
    }

    #[test]
    fn spatial_potential_values() {
        assert!((spatial_potential(0.8, 0.0, true) - 0.8f64.exp()).abs() < 1e-12);
        assert!((spatial_potential(0.8, 0.0, true) - 2.225540928492468).abs() < 1e-9);
        assert_eq!(spatial_potential(0.8, 0.0, false), 1.0);
        // mxd1-style C=2, D=1: agreement/disagreement ratio is e.
        let ratio = spatial_potential(2.0, 1.0, true) / spatial_potential(2.0, 1.0, false);
        assert!((ratio - std::f64::consts::E).abs() < 1e-12);
    }

    #[test]
    fn temporal_potential_values() {
        assert_eq!(temporal_potential(0.9, true).unwrap(), 0.9);
        assert!((temporal_potential(0.9, false).unwrap() - 0.1).abs() < 1e-12);
        assert_eq!(temporal_potential(0.5, true).unwrap(), 0.5);
        assert_eq!(temporal_potential(0.5, false).unwrap(), 0.5);
        assert!(temporal_potential(0.0, true).is_err());
        assert!(temporal_potential(1.0, true).is_err());
    }

    #[test]
    fn aimr_potential_values() {
        assert!((aimr_edge_potential(357, true) - (1.0f64 / 357.0).exp()).abs() < 1e-15);
        assert!((aimr_edge_potential(357, true) - 1.002805).abs() < 1e-6);
        assert_eq!(aimr_edge_potential(357, false), 1.0);
        // All S locations matching the aggregate state multiply to e.
        let s = 10;
        let product = aimr_edge_potential(s, true).powi(s as i32);
        assert!((product - std::f64::consts::E).abs() < 1e-12);
    }

    #[test]
    fn prop_coupling_counts_phase_agreement() {
        // Two neighbors agreeing in deviation sign 8 of 10 years.
        let a = vec![1.0, 1.0, 1.0, 1.0, 1.0, 9.0, 9.0, 9.0, 9.0, 9.0];
        let b = vec![2.0, 2.0, 2.0, 2.0, 8.0, 8.0, 2.0, 8.0, 8.0, 8.0];
        let d = line_dataset(vec![a, b]);
        let stats = crate::lwa::location_stats(&d).unwrap();
        let z0 = crate::lwa::lwa_assign(&d, &stats);
        let spec = SpatialPotentialSpec {
            mode: SpatialMode::Prop,
            lambda: 1.0,
            ..Default::default()
        };
        let coupling = estimate_spatial_coupling(&d, &z0, &stats, &spec).unwrap();
        assert!((coupling.c(0, 0) - 0.8).abs() < 1e-12);
        // Symmetric.
        assert!((coupling.c(1, 0) - 0.8).abs() < 1e-12);
    }

    #[test]
    fn unif_coupling_is_constant() {
        let d = line_dataset(vec![vec![1.0, 2.0], vec![3.0, 4.0], vec![5.0, 6.0]]);
        let stats = crate::lwa::location_stats(&d).unwrap();
        let z0 = crate::lwa::lwa_assign(&d, &stats);
        let spec = SpatialPotentialSpec {
            mode: SpatialMode::Unif,
            c_uniform: 1.0,
            ..Default::default()
        };
        let coupling = estimate_spatial_coupling(&d, &z0, &stats, &spec).unwrap();
        for s in 0..3 {
            for k in 0..d.grid().neighbors(s).unwrap().len() {
                assert_eq!(coupling.c(s, k), 1.0);
            }
        }
    }

    #[test]
    fn anml_full_agreement_gives_lambda() {
        let row = vec![1.0, 5.0, 9.0, 5.0];
        let d = line_dataset(vec![row.clone(), row]);
        let stats = crate::lwa::location_stats(&d).unwrap();
        let z0 = crate::lwa::lwa_assign(&d, &stats);
        let spec = SpatialPotentialSpec {
            mode: SpatialMode::Anml,
            lambda: 0.7,
            ..Default::default()
        };
        let coupling = estimate_spatial_coupling(&d, &z0, &stats, &spec).unwrap();
        assert!((coupling.c(0, 0) - 0.7).abs() < 1e-12);
    }

    #[test]
    fn off_mode_is_not_applicable() {
        let d = line_dataset(vec![vec![1.0, 2.0], vec![3.0, 4.0]]);
        let stats = crate::lwa::location_stats(&d).unwrap();
        let z0 = crate::lwa::lwa_assign(&d, &stats);
        let spec = SpatialPotentialSpec {
            mode: SpatialMode::Off,
            ..Default::default()
        };
        assert!(matches!(
            estimate_spatial_coupling(&d, &z0, &stats, &spec),
            Err(Error::NotApplicable(_))
        ));
    }

    #[test]
    fn node_scheme_values() {
        let d = line_dataset(vec![vec![1.0, 2.0], vec![3.0, 4.0]]);
        let stats = crate::lwa::location_stats(&d).unwrap();
        let z0 = crate::lwa::lwa_assign(&d, &stats);
        let sets = crate::lwa::widespread_year_sets(&z0);
        let mk = |scheme| {
            NodePotentialTable::resolve(
                &NodePotentialSpec {
                    scheme,
                    ..Default::default()
                },
                &stats,
                &sets,
                2,
            )
        };
        let np1 = mk(NodeScheme::Np1);
        for state in State::ALL {
            assert_eq!(np1.value(0, 0, state), 1.0);
        }
        let np2 = mk(NodeScheme::Np2);
        assert_eq!(np2.value(0, 0, State::High), 2.0);
        assert_eq!(np2.value(0, 0, State::Low), 1.0);
        assert_eq!(np2.value(0, 0, State::Normal), 1.0);
        let np3 = mk(NodeScheme::Np3);
        assert_eq!(np3.value(0, 0, State::Low), 2.0);
        let np4 = mk(NodeScheme::Np4);
        assert_eq!(np4.value(0, 0, State::High), 2.0);
        assert_eq!(np4.value(0, 0, State::Low), 2.0);
        assert_eq!(np4.value(0, 0, State::Normal), 1.0);
    }

    #[test]
    fn np7_favors_positive_in_excess_years() {
        // Aggregate states: make year 2 an excess year, year 0 deficient.
        let d = line_dataset(vec![vec![1.0, 5.0, 9.0], vec![1.0, 5.0, 9.0]]);
        let stats = crate::lwa::location_stats(&d).unwrap();
        let z0 = crate::lwa::lwa_assign(&d, &stats);
        let sets = crate::lwa::widespread_year_sets(&z0);
        assert!(sets.h.contains(&2) && sets.l.contains(&0));
        let np7 = NodePotentialTable::resolve(
            &NodePotentialSpec {
                scheme: NodeScheme::Np7,
                ..Default::default()
            },
            &stats,
            &sets,
            3,
        );
        assert_eq!(np7.value(0, 2, State::High), 2.0);
        assert_eq!(np7.value(0, 2, State::Low), 1.0);
        assert_eq!(np7.value(0, 0, State::Low), 2.0);
        assert_eq!(np7.value(0, 1, State::High), 1.0);
        // NP8 reverses the year roles.
        let np8 = NodePotentialTable::resolve(
            &NodePotentialSpec {
                scheme: NodeScheme::Np8,
                ..Default::default()
            },
            &stats,
            &sets,
            3,
        );
        assert_eq!(np8.value(0, 2, State::Low), 2.0);
        assert_eq!(np8.value(0, 0, State::High), 2.0);
    }

    #[test]
    fn np5_uses_wet_and_dry_locations() {
        // Location means 1, 5, 5, 5, 9: cross-location mean 5, spread ~2.53;
        // location 0 is dry, location 4 wet.
        let rows: Vec<Vec<f64>> = [1.0, 5.0, 5.0, 5.0, 9.0]
            .iter()
            .map(|&m| vec![m - 0.5, m + 0.5])
            .collect();
        let d = line_dataset(rows);
        let stats = crate::lwa::location_stats(&d).unwrap();
        let z0 = crate::lwa::lwa_assign(&d, &stats);
        let sets = crate::lwa::widespread_year_sets(&z0);
        let np5 = NodePotentialTable::resolve(
            &NodePotentialSpec {
                scheme: NodeScheme::Np5,
                ..Default::default()
            },
            &stats,
            &sets,
            2,
        );
        assert_eq!(np5.value(4, 0, State::High), 2.0); // wet favors positive
        assert_eq!(np5.value(0, 0, State::Low), 2.0); // dry favors negative
        assert_eq!(np5.value(1, 0, State::High), 1.0);
        let np6 = NodePotentialTable::resolve(
            &NodePotentialSpec {
                scheme: NodeScheme::Np6,
                ..Default::default()
            },
            &stats,
            &sets,
            2,
        );
        assert_eq!(np6.value(4, 0, State::Low), 2.0);
        assert_eq!(np6.value(0, 0, State::High), 2.0);
    }

    #[test]
    fn emission_estimation_with_fallback() {
        let d = line_dataset(vec![vec![1.0, 2.0, 3.0, 10.0]]);
        let mut z = StateField::normal(1, 4);
        z.set(0, 3, State::High);
        let params = estimate_emissions(&d, &z);
        // mu = 4, sigma = sqrt(12.5)
        let sigma = 12.5f64.sqrt();
        assert!((params.mu_state[0][State::High.index()] - 10.0).abs() < 1e-12);
        assert!((params.mu_state[0][State::Normal.index()] - 2.0).abs() < 1e-12);
        assert!((params.mu_state[0][State::Low.index()] - (4.0 - sigma)).abs() < 1e-12);
        assert!((params.sigma_loc[0] - sigma).abs() < 1e-12);
    }

    #[test]
    fn emission_all_normal_uses_threshold_fallbacks() {
        let d = line_dataset(vec![vec![8.0, 12.0]]);
        let z = StateField::normal(1, 2);
        let params = estimate_emissions(&d, &z);
        assert_eq!(params.mu_state[0][State::Normal.index()], 10.0);
        assert_eq!(params.mu_state[0][State::High.index()], 12.0);
        assert_eq!(params.mu_state[0][State::Low.index()], 8.0);
    }

    #[test]
    fn emission_estimation_is_idempotent_and_deterministic() {
        let d = line_dataset(vec![vec![1.0, 9.0, 5.0], vec![1.0, 9.0, 5.0]]);
        let stats = crate::lwa::location_stats(&d).unwrap();
        let z = crate::lwa::lwa_assign(&d, &stats);
        let a = estimate_emissions(&d, &z);
        let b = estimate_emissions(&d, &z);
        assert_eq!(a, b);
        // Identical locations get identical parameters.
        assert_eq!(a.mu_state[0], a.mu_state[1]);
        assert_eq!(a.sigma_loc[0], a.sigma_loc[1]);
    }

    fn toy_model_fixture(
        d: &RainfallDataset,
        config: MrfConfig,
    ) -> (MrfModel<'_>, EmissionParams) {
        let stats = crate::lwa::location_stats(d).unwrap();
        let z0 = crate::lwa::lwa_assign(d, &stats);
        let sets = crate::lwa::widespread_year_sets(&z0);
        let model = MrfModel::new(d, config, &z0, &stats, &sets).unwrap();
        let params = estimate_emissions(d, &z0);
        (model, params)
    }

    #[test]
    fn agreeing_flip_raises_likelihood_under_uniform_node_potentials() {
        let rows = vec![
            vec![4.0, 5.0, 6.0],
            vec![5.0, 5.0, 5.0],
            vec![6.0, 5.0, 4.0],
        ];
        let d = line_dataset(rows);
        let config = MrfConfig {
            spatial: SpatialPotentialSpec {
                mode: SpatialMode::Unif,
                c_uniform: 1.0,
                d: 0.0,
                lambda: 1.0,
            },
            temporal: TemporalPotentialSpec { p: Some(0.8) },
            node: NodePotentialSpec::default(),
            aimr_link: true,
        };
        let (model, params) = toy_model_fixture(&d, config);
        // Everything high except node (1,1); flipping it to agree with all
        // neighbors and the aggregate state must raise the coherence part.
        let mut z = StateField::normal(3, 3);
        for s in 0..3 {
            for t in 0..3 {
                z.set(s, t, State::High);
            }
        }
        for t in 0..3 {
            z.set_aimr(t, State::High);
        }
        let mut z_out = z.clone();
        z_out.set(1, 1, State::Low);
        let ll_in = model.log_likelihood(&z, &params).unwrap();
        let ll_out = model.log_likelihood(&z_out, &params).unwrap();
        // Compare coherence-only contributions by removing the emission gap.
        let em_in = log_normal_density(
            d.value(1, 1),
            params.mu_state[1][State::High.index()],
            params.sigma_loc[1],
        );
        let em_out = log_normal_density(
            d.value(1, 1),
            params.mu_state[1][State::Low.index()],
            params.sigma_loc[1],
        );
        assert!(ll_in - em_in > ll_out - em_out);
    }

    #[test]
    fn coherence_free_model_reduces_to_emission_differences() {
        let d = line_dataset(vec![vec![4.0, 5.0, 6.0], vec![6.0, 5.0, 4.0]]);
        let config = MrfConfig {
            spatial: SpatialPotentialSpec {
                mode: SpatialMode::Off,
                ..Default::default()
            },
            temporal: TemporalPotentialSpec { p: None },
            node: NodePotentialSpec::default(),
            aimr_link: false,
        };
        assert!(config.is_coherence_free());
        let (model, params) = toy_model_fixture(&d, config);
        let mut za = StateField::normal(2, 3);
        let mut zb = StateField::normal(2, 3);
        za.set(0, 0, State::High);
        zb.set(0, 0, State::Low);
        let diff = model.log_likelihood(&za, &params).unwrap()
            - model.log_likelihood(&zb, &params).unwrap();
        let em_diff = log_normal_density(
            d.value(0, 0),
            params.mu_state[0][State::High.index()],
            params.sigma_loc[0],
        ) - log_normal_density(
            d.value(0, 0),
            params.mu_state[0][State::Low.index()],
            params.sigma_loc[0],
        );
        assert!((diff - em_diff).abs() < 1e-12);
    }

    #[test]
    fn ratio_identity_of_spatial_potentials() {
        for (c, d) in [(0.3, 0.0), (2.0, 1.0), (5.0, 1.0), (0.0, 0.0)] {
            let ratio = spatial_potential(c, d, true) / spatial_potential(c, d, false);
            assert!((ratio - (c - d).exp()).abs() < 1e-12);
        }
    }

    #[test]
    fn scheme_names_parse() {
        assert_eq!(NodeScheme::parse("NP4").unwrap(), NodeScheme::Np4);
        assert_eq!(NodeScheme::parse("np7").unwrap(), NodeScheme::Np7);
        assert!(NodeScheme::parse("NP9").is_err());
    }
}
