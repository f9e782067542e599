//! Exact inference on tiny instances by exhaustive enumeration.
//!
//! Every joint assignment of the latent nodes (all `(location, year)` nodes
//! plus the per-year aggregate nodes) is scored with the same factors the
//! sampler uses, yielding the exact joint maximum and exact per-node
//! marginals. Feasible up to 16 latent nodes; the oracle the sampler is
//! validated against.

use crate::error::{Error, Result};
use crate::mrf::{log_normal_density, EmissionParams, MrfModel};
use crate::state::{State, StateField};

/// Hard cap on latent node count (3^16 ~ 43M joint states).
pub const MAX_EXACT_NODES: usize = 16;

/// Exact MAP assignment and exact marginals.
#[derive(Debug, Clone)]
pub struct ExactResult {
    /// Argmax of the joint likelihood over all assignments.
    pub map_field: StateField,
    /// Exact per-node marginals, row-major `S x T`.
    pub marginals: Vec<[f64; 3]>,
    /// Exact aggregate-node marginals, length `T`.
    pub aimr_marginals: Vec<[f64; 3]>,
    /// Log-likelihood of the MAP assignment.
    pub map_loglik: f64,
}

/// Precomputed per-node and per-edge log factors. An assignment is scored
/// by pure table lookups, which keeps 3^N enumeration cheap.
struct FactorTables {
    n_locations: usize,
    n_years: usize,
    /// Per latent node (locals first, aggregates after), per state:
    /// log node potential plus log emission density.
    node_log: Vec<[f64; 3]>,
    /// `(node_a, node_b, same_add, diff_add)` over all coherence edges.
    edges: Vec<(usize, usize, f64, f64)>,
}

impl FactorTables {
    fn build(model: &MrfModel, params: &EmissionParams) -> Result<FactorTables> {
        let dataset = model.dataset();
        let s_total = dataset.n_locations();
        let t_total = dataset.n_years();
        let node = model.node_potentials();

        let mut node_log = Vec::with_capacity(s_total * t_total + t_total);
        for s in 0..s_total {
            let sigma = params.sigma_loc[s];
            if sigma <= 0.0 {
                return Err(Error::DegenerateEmission(s));
            }
            for t in 0..t_total {
                let y = dataset.value(s, t);
                let mut row = [0.0; 3];
                for state in State::ALL {
                    row[state.index()] = node.value(s, t, state).ln()
                        + log_normal_density(y, params.mu_state[s][state.index()], sigma);
                }
                node_log.push(row);
            }
        }
        if params.sigma_aimr <= 0.0 {
            return Err(Error::DegenerateEmission(usize::MAX));
        }
        for (t, &y) in dataset.aimr().iter().enumerate() {
            let mut row = [0.0; 3];
            for state in State::ALL {
                row[state.index()] = node.value_aimr(t, state).ln()
                    + log_normal_density(y, params.mu_aimr_state[state.index()], params.sigma_aimr);
            }
            node_log.push(row);
        }

        let mut edges = Vec::new();
        if let Some(sp) = model.spatial() {
            let grid = dataset.grid();
            for s in 0..s_total {
                for (k, &n) in grid.neighbors(s)?.iter().enumerate() {
                    if s < n {
                        for t in 0..t_total {
                            edges.push((s * t_total + t, n * t_total + t, sp.c(s, k), sp.d()));
                        }
                    }
                }
            }
        }
        if model.temporal_on() {
            for s in 0..s_total {
                for t in 0..t_total - 1 {
                    edges.push((
                        s * t_total + t,
                        s * t_total + t + 1,
                        model.ln_temporal(true),
                        model.ln_temporal(false),
                    ));
                }
            }
        }
        if model.aimr_link_on() {
            for s in 0..s_total {
                for t in 0..t_total {
                    edges.push((
                        s * t_total + t,
                        s_total * t_total + t,
                        model.ln_aimr_link(true),
                        model.ln_aimr_link(false),
                    ));
                }
            }
        }

        Ok(FactorTables {
            n_locations: s_total,
            n_years: t_total,
            node_log,
            edges,
        })
    }

    fn n_nodes(&self) -> usize {
        self.node_log.len()
    }

    fn score(&self, assignment: &[u8]) -> f64 {
        let mut ll = 0.0;
        for (i, &a) in assignment.iter().enumerate() {
            ll += self.node_log[i][a as usize];
        }
        for &(a, b, same, diff) in &self.edges {
            ll += if assignment[a] == assignment[b] {
                same
            } else {
                diff
            };
        }
        ll
    }

    fn to_field(&self, assignment: &[u8]) -> StateField {
        let mut field = StateField::normal(self.n_locations, self.n_years);
        for s in 0..self.n_locations {
            for t in 0..self.n_years {
                field.set(s, t, State::from_index(assignment[s * self.n_years + t] as usize));
            }
        }
        for t in 0..self.n_years {
            field.set_aimr(
                t,
                State::from_index(assignment[self.n_locations * self.n_years + t] as usize),
            );
        }
        field
    }
}

fn advance(assignment: &mut [u8]) -> bool {
    for digit in assignment.iter_mut() {
        if *digit < 2 {
            *digit += 1;
            return true;
        }
        *digit = 0;
    }
    false
}

/// Enumerate every joint assignment, returning the exact MAP field and the
/// exact per-node marginals.
pub fn exact_enumerate(model: &MrfModel, params: &EmissionParams) -> Result<ExactResult> {
    let tables = FactorTables::build(model, params)?;
    let n = tables.n_nodes();
    if n > MAX_EXACT_NODES {
        return Err(Error::TooLarge {
            nodes: n,
            limit: MAX_EXACT_NODES,
        });
    }

    // Pass 1: joint maximum, for the MAP field and for stable exponentials.
    let mut assignment = vec![0u8; n];
    let mut best = f64::NEG_INFINITY;
    let mut best_assignment = assignment.clone();
    loop {
        let ll = tables.score(&assignment);
        if ll > best {
            best = ll;
            best_assignment = assignment.clone();
        }
        if !advance(&mut assignment) {
            break;
        }
    }
    if !best.is_finite() {
        return Err(Error::Numerical("exact enumeration diverged".into()));
    }

    // Pass 2: accumulate normalized probabilities per node and state.
    let mut sums = vec![[0.0f64; 3]; n];
    let mut total = 0.0f64;
    assignment.iter_mut().for_each(|d| *d = 0);
    loop {
        let p = (tables.score(&assignment) - best).exp();
        total += p;
        for (i, &a) in assignment.iter().enumerate() {
            sums[i][a as usize] += p;
        }
        if !advance(&mut assignment) {
            break;
        }
    }

    let s_total = tables.n_locations;
    let t_total = tables.n_years;
    let mut marginals = Vec::with_capacity(s_total * t_total);
    for row in sums.iter().take(s_total * t_total) {
        marginals.push([row[0] / total, row[1] / total, row[2] / total]);
    }
    let mut aimr_marginals = Vec::with_capacity(t_total);
    for row in sums.iter().skip(s_total * t_total) {
        aimr_marginals.push([row[0] / total, row[1] / total, row[2] / total]);
    }

    Ok(ExactResult {
        map_field: tables.to_field(&best_assignment),
        marginals,
        aimr_marginals,
        map_loglik: best,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::RainfallDataset;
    use crate::grid::GridIndex;
    use crate::mrf::{
        MrfConfig, NodePotentialSpec, NodePotentialTable, SpatialMode, SpatialPotentialSpec,
        TemporalPotentialSpec,
    };
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn single_cell_dataset(values: Vec<f64>) -> RainfallDataset {
        let grid = GridIndex::build(&[(0.0, 0.0)]).unwrap();
        let years: Vec<i32> = (0..values.len() as i32).map(|i| 1901 + i).collect();
        RainfallDataset::new(grid, years, values).unwrap()
    }

    fn uniform_params(s: usize) -> EmissionParams {
        EmissionParams {
            mu_state: vec![[5.0; 3]; s],
            sigma_loc: vec![1.0; s],
            mu_aimr_state: [5.0; 3],
            sigma_aimr: 1.0,
        }
    }

    #[test]
    fn single_node_uniform_everything() {
        let d = single_cell_dataset(vec![5.0]);
        let config = MrfConfig {
            spatial: SpatialPotentialSpec {
                mode: SpatialMode::Off,
                ..Default::default()
            },
            temporal: TemporalPotentialSpec { p: None },
            node: NodePotentialSpec::default(),
            aimr_link: true,
        };
        let model = MrfModel::from_parts(&d, config, None, NodePotentialTable::uniform(1, 1)).unwrap();
        let result = exact_enumerate(&model, &uniform_params(1)).unwrap();
        for p in result.marginals[0] {
            assert!((p - 1.0 / 3.0).abs() < 1e-12);
        }
        for p in result.aimr_marginals[0] {
            assert!((p - 1.0 / 3.0).abs() < 1e-12);
        }
    }

    #[test]
    fn temporal_coherence_overrides_weak_evidence() {
        // One location, three years; the middle observation strongly favors
        // the positive state, the flanking ones mildly favor normal. With
        // P = 0.99 the chain of temporal edges drags all three positive.
        let d = single_cell_dataset(vec![5.0, 11.0, 5.0]);
        let config = MrfConfig {
            spatial: SpatialPotentialSpec {
                mode: SpatialMode::Off,
                ..Default::default()
            },
            temporal: TemporalPotentialSpec { p: Some(0.99) },
            node: NodePotentialSpec::default(),
            aimr_link: false,
        };
        let model = MrfModel::from_parts(&d, config, None, NodePotentialTable::uniform(1, 3)).unwrap();
        let params = EmissionParams {
            mu_state: vec![[8.0, 2.0, 5.0]],
            sigma_loc: vec![2.0],
            mu_aimr_state: [8.0, 2.0, 5.0],
            sigma_aimr: 2.0,
        };
        let result = exact_enumerate(&model, &params).unwrap();
        for t in 0..3 {
            assert_eq!(result.map_field.get(0, t), State::High);
        }
    }

    #[test]
    fn map_beats_random_assignments() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let coords = [(0.0, 0.0), (0.0, 1.0), (1.0, 0.0)];
        let grid = GridIndex::build(&coords).unwrap();
        let y: Vec<f64> = (0..6).map(|_| 3.0 + 4.0 * rng.gen::<f64>()).collect();
        let d = RainfallDataset::new(grid, vec![1901, 1902], y).unwrap();
        let stats = crate::lwa::location_stats(&d).unwrap();
        let z0 = crate::lwa::lwa_assign(&d, &stats);
        let sets = crate::lwa::widespread_year_sets(&z0);
        let config = MrfConfig {
            spatial: SpatialPotentialSpec {
                mode: SpatialMode::Unif,
                c_uniform: 0.8,
                d: 0.0,
                lambda: 1.0,
            },
            temporal: TemporalPotentialSpec { p: Some(0.7) },
            node: NodePotentialSpec::default(),
            aimr_link: true,
        };
        let model = MrfModel::new(&d, config, &z0, &stats, &sets).unwrap();
        let params = crate::mrf::estimate_emissions(&d, &z0);
        let result = exact_enumerate(&model, &params).unwrap();

        for _ in 0..10_000 {
            let mut z = StateField::normal(3, 2);
            for s in 0..3 {
                for t in 0..2 {
                    z.set(s, t, State::from_index(rng.gen_range(0..3)));
                }
            }
            for t in 0..2 {
                z.set_aimr(t, State::from_index(rng.gen_range(0..3)));
            }
            let ll = model.log_likelihood(&z, &params).unwrap();
            assert!(ll <= result.map_loglik + 1e-9);
        }
    }

    #[test]
    fn table_score_matches_log_likelihood() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let coords = [(0.0, 0.0), (0.0, 1.0), (1.0, 1.0)];
        let grid = GridIndex::build(&coords).unwrap();
        let y: Vec<f64> = (0..6).map(|_| 2.0 + 5.0 * rng.gen::<f64>()).collect();
        let d = RainfallDataset::new(grid, vec![1901, 1902], y).unwrap();
        let stats = crate::lwa::location_stats(&d).unwrap();
        let z0 = crate::lwa::lwa_assign(&d, &stats);
        let sets = crate::lwa::widespread_year_sets(&z0);
        let config = MrfConfig::default();
        let model = MrfModel::new(&d, config, &z0, &stats, &sets).unwrap();
        let params = crate::mrf::estimate_emissions(&d, &z0);
        let tables = FactorTables::build(&model, &params).unwrap();

        for _ in 0..50 {
            let assignment: Vec<u8> = (0..tables.n_nodes()).map(|_| rng.gen_range(0..3)).collect();
            let field = tables.to_field(&assignment);
            let direct = model.log_likelihood(&field, &params).unwrap();
            assert!((tables.score(&assignment) - direct).abs() < 1e-9);
        }
    }

    #[test]
    fn too_many_nodes_rejected() {
        let coords: Vec<(f64, f64)> = (0..9)
            .map(|i| ((i / 3) as f64, (i % 3) as f64))
            .collect();
        let grid = GridIndex::build(&coords).unwrap();
        let d = RainfallDataset::new(grid, vec![1901, 1902], vec![1.0; 18]).unwrap();
        let config = MrfConfig {
            spatial: SpatialPotentialSpec {
                mode: SpatialMode::Off,
                ..Default::default()
            },
            temporal: TemporalPotentialSpec { p: None },
            node: NodePotentialSpec::default(),
            aimr_link: false,
        };
        let model =
            MrfModel::from_parts(&d, config, None, NodePotentialTable::uniform(9, 2)).unwrap();
        assert!(matches!(
            exact_enumerate(&model, &uniform_params(9)),
            Err(Error::TooLarge { nodes: 20, .. })
        ));
    }
}
