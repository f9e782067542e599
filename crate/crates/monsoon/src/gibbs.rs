//! Gibbs sampling over the latent field.
//!
//! Each sweep visits every `(location, year)` node in raster order, then
//! every aggregate node, sampling each from its full conditional given the
//! rest. State means are re-estimated once per sweep. Weights are computed
//! in log space with max-subtraction, so the ~8 spatial factors cannot
//! underflow. Serial sweeps are deterministic for a fixed seed; the optional
//! parallel mode updates non-adjacent node classes concurrently and does not
//! promise determinism.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::lwa::LocationStats;
use crate::mrf::{log_normal_density, reestimate_state_means, EmissionParams, MrfModel};
use crate::state::{State, StateField};

/// Scan order for one sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ScanOrder {
    /// Fixed raster order: locations outer, years inner. Deterministic.
    #[default]
    Raster,
    /// A fresh random permutation of the nodes each sweep.
    Random,
}

/// Sampler settings.
#[derive(Debug, Clone, Copy)]
pub struct GibbsConfig {
    pub sweeps: usize,
    pub burn_in: usize,
    /// Collect every `thin`-th sweep after burn-in.
    pub thin: usize,
    pub seed: u64,
    /// Re-estimate state means from the current assignment once per sweep.
    pub reestimate_means: bool,
    pub scan: ScanOrder,
    /// Update non-adjacent node classes concurrently. Changes the sampling
    /// schedule; off by default.
    pub parallel: bool,
}

impl Default for GibbsConfig {
    fn default() -> Self {
        GibbsConfig {
            sweeps: 2000,
            burn_in: 500,
            thin: 5,
            seed: 42,
            reestimate_means: true,
            scan: ScanOrder::Raster,
            parallel: false,
        }
    }
}

impl GibbsConfig {
    pub fn validate(&self) -> Result<()> {
        if self.thin == 0 {
            return Err(Error::InvalidParameter("thin must be at least 1".into()));
        }
        if self.burn_in >= self.sweeps {
            return Err(Error::InsufficientSamples {
                sweeps: self.sweeps,
                burn_in: self.burn_in,
                thin: self.thin,
            });
        }
        Ok(())
    }
}

/// Per-node visit counts across collected samples.
#[derive(Debug, Clone)]
pub struct SampleAccumulator {
    node_counts: Vec<[u32; 3]>,
    aimr_counts: Vec<[u32; 3]>,
    n_samples: usize,
    n_years: usize,
}

impl SampleAccumulator {
    pub fn new(n_locations: usize, n_years: usize) -> Self {
        SampleAccumulator {
            node_counts: vec![[0; 3]; n_locations * n_years],
            aimr_counts: vec![[0; 3]; n_years],
            n_samples: 0,
            n_years,
        }
    }

    pub fn record(&mut self, z: &StateField) {
        for s in 0..z.n_locations() {
            for t in 0..z.n_years() {
                self.node_counts[s * self.n_years + t][z.get(s, t).index()] += 1;
            }
        }
        for t in 0..z.n_years() {
            self.aimr_counts[t][z.aimr(t).index()] += 1;
        }
        self.n_samples += 1;
    }

    pub fn n_samples(&self) -> usize {
        self.n_samples
    }

    pub fn node_counts(&self, s: usize, t: usize) -> [u32; 3] {
        self.node_counts[s * self.n_years + t]
    }

    pub fn aimr_counts(&self, t: usize) -> [u32; 3] {
        self.aimr_counts[t]
    }
}

/// Posterior summary of one chain: per-node marginals, the marginal-mode
/// field and per-sweep diagnostics.
#[derive(Debug, Clone)]
pub struct PosteriorSummary {
    /// Per-node relative state frequencies, row-major `S x T`.
    pub marginals: Vec<[f64; 3]>,
    /// Aggregate-node marginals, length `T`.
    pub aimr_marginals: Vec<[f64; 3]>,
    pub map_field: StateField,
    /// Unnormalized log-likelihood after each sweep.
    pub loglik_trace: Vec<f64>,
    /// Largest deviation of any sampled conditional from unit mass.
    pub max_conditional_err: f64,
    pub n_samples: usize,
}

fn mode_with_tie_break(counts: [u32; 3]) -> State {
    let max = counts.iter().copied().max().unwrap();
    // Ties resolve toward normal, then positive, then negative.
    for state in [State::Normal, State::High, State::Low] {
        if counts[state.index()] == max {
            return state;
        }
    }
    unreachable!()
}

/// Marginal-mode state field from accumulated samples.
pub fn map_estimate(acc: &SampleAccumulator, n_locations: usize, n_years: usize) -> Result<StateField> {
    if acc.n_samples == 0 {
        return Err(Error::InsufficientSamples {
            sweeps: 0,
            burn_in: 0,
            thin: 1,
        });
    }
    let mut field = StateField::normal(n_locations, n_years);
    for s in 0..n_locations {
        for t in 0..n_years {
            field.set(s, t, mode_with_tie_break(acc.node_counts(s, t)));
        }
    }
    for t in 0..n_years {
        field.set_aimr(t, mode_with_tie_break(acc.aimr_counts(t)));
    }
    Ok(field)
}

/// Full conditional of node `(s, t)` given the rest of the field.
///
/// Combines the node potential, the spatial factors over present neighbors,
/// the temporal factors toward adjacent years (boundary years simply lack
/// one), the aggregate-link factor and the Gaussian emission. Only neighbors
/// enter; everything else is conditionally independent.
pub fn conditional_local(
    model: &MrfModel,
    params: &EmissionParams,
    z: &StateField,
    s: usize,
    t: usize,
) -> Result<[f64; 3]> {
    let dataset = model.dataset();
    let grid = dataset.grid();
    let neighbors = grid.neighbors(s)?;
    let node = model.node_potentials();
    let y = dataset.value(s, t);
    let sigma = params.sigma_loc[s];
    if sigma <= 0.0 {
        return Err(Error::DegenerateEmission(s));
    }
    let t_total = dataset.n_years();

    let mut logw = [0.0f64; 3];
    for state in State::ALL {
        let i = state.index();
        let mut w = node.value(s, t, state).ln();
        if let Some(sp) = model.spatial() {
            for (k, &n) in neighbors.iter().enumerate() {
                w += if z.get(n, t) == state { sp.c(s, k) } else { sp.d() };
            }
        }
        if model.temporal_on() {
            if t > 0 {
                w += model.ln_temporal(z.get(s, t - 1) == state);
            }
            if t + 1 < t_total {
                w += model.ln_temporal(z.get(s, t + 1) == state);
            }
        }
        if model.aimr_link_on() {
            w += model.ln_aimr_link(z.aimr(t) == state);
        }
        w += log_normal_density(y, params.mu_state[s][i], sigma);
        logw[i] = w;
    }
    normalize_log_weights(logw)
}

/// Full conditional of the aggregate node of year `t`.
pub fn conditional_aimr(
    model: &MrfModel,
    params: &EmissionParams,
    z: &StateField,
    t: usize,
) -> Result<[f64; 3]> {
    let dataset = model.dataset();
    let node = model.node_potentials();
    let y = dataset.aimr()[t];
    if params.sigma_aimr <= 0.0 {
        return Err(Error::DegenerateEmission(usize::MAX));
    }

    // The product of link factors over all locations whose state equals q
    // is exp(n_q / S).
    let mut counts = [0usize; 3];
    if model.aimr_link_on() {
        for s in 0..dataset.n_locations() {
            counts[z.get(s, t).index()] += 1;
        }
    }
    let inv_s = 1.0 / dataset.n_locations() as f64;

    let mut logw = [0.0f64; 3];
    for state in State::ALL {
        let i = state.index();
        let mut w = node.value_aimr(t, state).ln();
        if model.aimr_link_on() {
            w += counts[i] as f64 * inv_s;
        }
        w += log_normal_density(y, params.mu_aimr_state[i], params.sigma_aimr);
        logw[i] = w;
    }
    normalize_log_weights(logw)
}

fn normalize_log_weights(logw: [f64; 3]) -> Result<[f64; 3]> {
    let max = logw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return Err(Error::Numerical(format!(
            "non-finite conditional weights {logw:?}"
        )));
    }
    let mut w = [0.0f64; 3];
    let mut total = 0.0;
    for i in 0..3 {
        w[i] = (logw[i] - max).exp();
        total += w[i];
    }
    for v in &mut w {
        *v /= total;
    }
    Ok(w)
}

fn sample_from(dist: &[f64; 3], u: f64) -> State {
    let mut acc = 0.0;
    for state in State::ALL {
        acc += dist[state.index()];
        if u < acc {
            return state;
        }
    }
    State::Normal
}

/// Node classes for the parallel sweep: the king-lattice-with-temporal-edges
/// graph is colored by the parity triple (row, column, year), so no two
/// nodes of one class are adjacent.
fn color_classes(model: &MrfModel) -> Vec<Vec<(usize, usize)>> {
    let dataset = model.dataset();
    let grid = dataset.grid();
    let spacing = grid.spacing();
    let mut classes = vec![Vec::new(); 8];
    for s in 0..dataset.n_locations() {
        let loc = grid.locations()[s];
        let row = (loc.lat / spacing).round() as i64;
        let col = (loc.lon / spacing).round() as i64;
        for t in 0..dataset.n_years() {
            let color =
                ((row & 1) << 2 | (col & 1) << 1 | (t as i64 & 1)) as usize;
            classes[color].push((s, t));
        }
    }
    classes
}

struct Chain<'m, 'a> {
    model: &'m MrfModel<'a>,
    params: EmissionParams,
    stats: LocationStats,
    z: StateField,
    rng: ChaCha8Rng,
    max_err: f64,
}

impl<'m, 'a> Chain<'m, 'a> {
    fn update_node(&mut self, s: usize, t: usize) -> Result<()> {
        let dist = conditional_local(self.model, &self.params, &self.z, s, t)?;
        self.track(&dist);
        let u = self.rng.gen::<f64>();
        self.z.set(s, t, sample_from(&dist, u));
        Ok(())
    }

    fn update_aimr(&mut self, t: usize) -> Result<()> {
        let dist = conditional_aimr(self.model, &self.params, &self.z, t)?;
        self.track(&dist);
        let u = self.rng.gen::<f64>();
        self.z.set_aimr(t, sample_from(&dist, u));
        Ok(())
    }

    fn track(&mut self, dist: &[f64; 3]) {
        let err = (dist.iter().sum::<f64>() - 1.0).abs();
        debug_assert!(err <= 1e-12, "conditional sums to 1 within 1e-12");
        if err > self.max_err {
            self.max_err = err;
        }
    }
}

/// Run one Gibbs chain and summarize the collected samples.
///
/// `init` is any valid state field, typically the baseline assignment.
pub fn gibbs_run(
    model: &MrfModel,
    init: &StateField,
    config: &GibbsConfig,
) -> Result<PosteriorSummary> {
    config.validate()?;
    let dataset = model.dataset();
    let s_total = dataset.n_locations();
    let t_total = dataset.n_years();
    if init.n_locations() != s_total || init.n_years() != t_total {
        return Err(Error::ShapeMismatch(format!(
            "init field is {}x{}, dataset is {}x{}",
            init.n_locations(),
            init.n_years(),
            s_total,
            t_total
        )));
    }

    let stats = crate::lwa::location_stats(dataset)?;
    let mut chain = Chain {
        model,
        params: crate::mrf::estimate_emissions(dataset, init),
        stats,
        z: init.clone(),
        rng: ChaCha8Rng::seed_from_u64(config.seed),
        max_err: 0.0,
    };
    // Spreads must be positive before the first conditional.
    if let Some(s) = chain.params.sigma_loc.iter().position(|&v| v <= 0.0) {
        return Err(Error::DegenerateEmission(s));
    }
    if chain.params.sigma_aimr <= 0.0 {
        return Err(Error::DegenerateEmission(usize::MAX));
    }

    let classes = if config.parallel {
        color_classes(model)
    } else {
        Vec::new()
    };

    let mut acc = SampleAccumulator::new(s_total, t_total);
    let mut trace = Vec::with_capacity(config.sweeps);
    let mut scratch: Vec<(usize, usize)> = Vec::new();

    for sweep in 1..=config.sweeps {
        if config.parallel {
            for class in &classes {
                let model_ref = chain.model;
                let params_ref = &chain.params;
                let z_ref = &chain.z;
                let base = config.seed ^ (sweep as u64).wrapping_mul(0x9E3779B97F4A7C15);
                let updates: Result<Vec<(usize, usize, State)>> = class
                    .par_iter()
                    .map(|&(s, t)| {
                        let dist = conditional_local(model_ref, params_ref, z_ref, s, t)?;
                        let mut rng = ChaCha8Rng::seed_from_u64(
                            base ^ ((s * t_total + t) as u64).wrapping_mul(0xD1B54A32D192ED03),
                        );
                        let u = rng.gen::<f64>();
                        Ok((s, t, sample_from(&dist, u)))
                    })
                    .collect();
                for (s, t, state) in updates? {
                    chain.z.set(s, t, state);
                }
            }
        } else {
            match config.scan {
                ScanOrder::Raster => {
                    for s in 0..s_total {
                        for t in 0..t_total {
                            chain.update_node(s, t)?;
                        }
                    }
                }
                ScanOrder::Random => {
                    scratch.clear();
                    scratch.extend((0..s_total).flat_map(|s| (0..t_total).map(move |t| (s, t))));
                    for i in (1..scratch.len()).rev() {
                        let j = chain.rng.gen_range(0..=i);
                        scratch.swap(i, j);
                    }
                    for &(s, t) in &scratch {
                        chain.update_node(s, t)?;
                    }
                }
            }
        }
        for t in 0..t_total {
            chain.update_aimr(t)?;
        }
        if config.reestimate_means {
            reestimate_state_means(&mut chain.params, dataset, &chain.z, &chain.stats);
        }
        trace.push(model.log_likelihood(&chain.z, &chain.params)?);
        if sweep > config.burn_in && (sweep - config.burn_in) % config.thin == 0 {
            acc.record(&chain.z);
        }
    }

    if acc.n_samples() == 0 {
        return Err(Error::InsufficientSamples {
            sweeps: config.sweeps,
            burn_in: config.burn_in,
            thin: config.thin,
        });
    }

    let n = acc.n_samples() as f64;
    let marginals = (0..s_total * t_total)
        .map(|idx| {
            let counts = acc.node_counts(idx / t_total, idx % t_total);
            [
                counts[0] as f64 / n,
                counts[1] as f64 / n,
                counts[2] as f64 / n,
            ]
        })
        .collect();
    let aimr_marginals = (0..t_total)
        .map(|t| {
            let counts = acc.aimr_counts(t);
            [
                counts[0] as f64 / n,
                counts[1] as f64 / n,
                counts[2] as f64 / n,
            ]
        })
        .collect();
    let map_field = map_estimate(&acc, s_total, t_total)?;

    Ok(PosteriorSummary {
        marginals,
        aimr_marginals,
        map_field,
        loglik_trace: trace,
        max_conditional_err: chain.max_err,
        n_samples: acc.n_samples(),
    })
}
