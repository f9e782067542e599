//! Anomalies as same-state connected components.
//!
//! Components are computed over the `(location, year)` nodes only, with
//! spatial edges (grid neighbors, same year) and temporal edges (same
//! location, adjacent years). Positive (state 1) and negative (state 2)
//! nodes form separate components; normal nodes belong to none. There is no
//! diagonal space-time adjacency.

use serde::{Deserialize, Serialize};

use crate::data::RainfallDataset;
use crate::error::{Error, Result};
use crate::grid::GridIndex;
use crate::lwa::LocationStats;
use crate::state::{Sign, State, StateField};

/// One detected anomaly.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Anomaly {
    pub id: usize,
    pub sign: Sign,
    /// Member nodes as `(location, year index)`, sorted.
    pub nodes: Vec<(usize, usize)>,
    /// Distinct locations covered.
    pub spatial_size: usize,
    /// Distinct years covered.
    pub temporal_size: usize,
    /// Total node count.
    pub st_size: usize,
    /// Mean of `y/mu_s` over the member nodes; filled by
    /// [`annotate_intensities`].
    pub intensity: Option<f64>,
}

struct UnionFind {
    parent: Vec<u32>,
    size: Vec<u32>,
}

impl UnionFind {
    fn new(len: usize) -> UnionFind {
        UnionFind {
            parent: (0..len as u32).collect(),
            size: vec![1; len],
        }
    }

    fn find(&mut self, x: usize) -> usize {
        let mut root = x;
        while self.parent[root] as usize != root {
            root = self.parent[root] as usize;
        }
        let mut cur = x;
        while cur != root {
            let next = self.parent[cur] as usize;
            self.parent[cur] = root as u32;
            cur = next;
        }
        root
    }

    fn union(&mut self, a: usize, b: usize) {
        let (mut ra, mut rb) = (self.find(a), self.find(b));
        if ra == rb {
            return;
        }
        if self.size[ra] < self.size[rb] {
            std::mem::swap(&mut ra, &mut rb);
        }
        self.parent[rb] = ra as u32;
        self.size[ra] += self.size[rb];
    }
}

/// Extract anomalies from a state field. Every state-1 and state-2 node ends
/// up in exactly one anomaly; ids follow the raster order of each anomaly's
/// first node.
pub fn extract_anomalies(z: &StateField, grid: &GridIndex) -> Result<Vec<Anomaly>> {
    let s_total = z.n_locations();
    let t_total = z.n_years();
    if grid.len() != s_total {
        return Err(Error::ShapeMismatch(format!(
            "grid has {} locations, field has {}",
            grid.len(),
            s_total
        )));
    }
    let mut uf = UnionFind::new(s_total * t_total);
    for s in 0..s_total {
        let neighbors = grid.neighbors(s)?;
        for t in 0..t_total {
            let state = z.get(s, t);
            if !state.is_anomalous() {
                continue;
            }
            let idx = s * t_total + t;
            for &n in neighbors {
                if n > s && z.get(n, t) == state {
                    uf.union(idx, n * t_total + t);
                }
            }
            if t + 1 < t_total && z.get(s, t + 1) == state {
                uf.union(idx, idx + 1);
            }
        }
    }

    // Group anomalous nodes by root, in raster order so ids and member
    // lists come out deterministic.
    let mut by_root: std::collections::HashMap<usize, Vec<(usize, usize)>> =
        std::collections::HashMap::new();
    let mut root_order = Vec::new();
    for s in 0..s_total {
        for t in 0..t_total {
            if z.get(s, t).is_anomalous() {
                let root = uf.find(s * t_total + t);
                let entry = by_root.entry(root).or_insert_with(|| {
                    root_order.push(root);
                    Vec::new()
                });
                entry.push((s, t));
            }
        }
    }

    let mut anomalies = Vec::with_capacity(root_order.len());
    for (id, root) in root_order.into_iter().enumerate() {
        let nodes = by_root.remove(&root).expect("root recorded above");
        let (s0, t0) = nodes[0];
        let sign = Sign::from_state(z.get(s0, t0)).expect("anomalous by construction");
        let mut locations: Vec<usize> = nodes.iter().map(|&(s, _)| s).collect();
        locations.sort_unstable();
        locations.dedup();
        let mut years: Vec<usize> = nodes.iter().map(|&(_, t)| t).collect();
        years.sort_unstable();
        years.dedup();
        anomalies.push(Anomaly {
            id,
            sign,
            st_size: nodes.len(),
            spatial_size: locations.len(),
            temporal_size: years.len(),
            nodes,
            intensity: None,
        });
    }
    Ok(anomalies)
}

/// Mean over an anomaly's nodes of the ratio of observed rainfall to the
/// location's long-term mean.
pub fn anomaly_intensity(
    anomaly: &Anomaly,
    dataset: &RainfallDataset,
    stats: &LocationStats,
) -> Result<f64> {
    let mut sum = 0.0;
    for &(s, t) in &anomaly.nodes {
        if stats.mu[s] == 0.0 {
            return Err(Error::DegenerateClimatology(s));
        }
        sum += dataset.value(s, t) / stats.mu[s];
    }
    Ok(sum / anomaly.nodes.len() as f64)
}

/// Fill the `intensity` field of every anomaly.
pub fn annotate_intensities(
    anomalies: &mut [Anomaly],
    dataset: &RainfallDataset,
    stats: &LocationStats,
) -> Result<()> {
    for a in anomalies {
        a.intensity = Some(anomaly_intensity(a, dataset, stats)?);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::RainfallDataset;

    fn grid_3x3() -> GridIndex {
        let coords: Vec<(f64, f64)> = (0..3)
            .flat_map(|r| (0..3).map(move |c| (r as f64, c as f64)))
            .collect();
        GridIndex::build(&coords).unwrap()
    }

    #[test]
    fn two_components_one_year() {
        let grid = grid_3x3();
        let mut z = StateField::normal(9, 1);
        for (lat, lon) in [(0.0, 0.0), (0.0, 1.0), (2.0, 2.0)] {
            z.set(grid.id_at(lat, lon).unwrap(), 0, State::High);
        }
        let anomalies = extract_anomalies(&z, &grid).unwrap();
        assert_eq!(anomalies.len(), 2);
        let mut sizes: Vec<usize> = anomalies.iter().map(|a| a.st_size).collect();
        sizes.sort_unstable();
        assert_eq!(sizes, vec![1, 2]);
        assert!(anomalies.iter().all(|a| a.sign == Sign::Positive));
    }

    #[test]
    fn temporal_run_is_one_component() {
        let grid = GridIndex::build(&[(0.0, 0.0)]).unwrap();
        let mut z = StateField::normal(1, 10);
        for t in 3..8 {
            z.set(0, t, State::Low);
        }
        let anomalies = extract_anomalies(&z, &grid).unwrap();
        assert_eq!(anomalies.len(), 1);
        let a = &anomalies[0];
        assert_eq!(a.sign, Sign::Negative);
        assert_eq!(a.spatial_size, 1);
        assert_eq!(a.temporal_size, 5);
        assert_eq!(a.st_size, 5);
    }

    #[test]
    fn all_normal_yields_nothing() {
        let grid = grid_3x3();
        let z = StateField::normal(9, 2);
        assert!(extract_anomalies(&z, &grid).unwrap().is_empty());
    }

    #[test]
    fn opposite_signs_do_not_merge() {
        let grid = grid_3x3();
        let mut z = StateField::normal(9, 1);
        z.set(grid.id_at(1.0, 1.0).unwrap(), 0, State::High);
        z.set(grid.id_at(1.0, 2.0).unwrap(), 0, State::Low);
        let anomalies = extract_anomalies(&z, &grid).unwrap();
        assert_eq!(anomalies.len(), 2);
    }

    #[test]
    fn diagonal_space_time_is_not_adjacent() {
        // Same state at (location A, year 0) and (neighbor B, year 1) only:
        // two separate anomalies.
        let grid = GridIndex::build(&[(0.0, 0.0), (0.0, 1.0)]).unwrap();
        let mut z = StateField::normal(2, 2);
        z.set(0, 0, State::High);
        z.set(1, 1, State::High);
        let anomalies = extract_anomalies(&z, &grid).unwrap();
        assert_eq!(anomalies.len(), 2);
    }

    #[test]
    fn anomalies_partition_the_anomalous_nodes() {
        let grid = grid_3x3();
        let mut z = StateField::normal(9, 4);
        // Arbitrary speckle.
        for (s, t, state) in [
            (0, 0, State::High),
            (1, 0, State::High),
            (1, 1, State::Low),
            (4, 2, State::High),
            (8, 3, State::Low),
            (7, 3, State::Low),
        ] {
            z.set(s, t, state);
        }
        let anomalies = extract_anomalies(&z, &grid).unwrap();
        let mut seen = std::collections::HashSet::new();
        let mut covered = 0;
        for a in &anomalies {
            for &node in &a.nodes {
                assert!(seen.insert(node), "node in two anomalies");
                covered += 1;
            }
            assert!(a.spatial_size <= a.st_size);
            assert!(a.temporal_size <= a.st_size);
            assert!(a.spatial_size * a.temporal_size >= a.st_size);
        }
        let anomalous = z.count(State::High) + z.count(State::Low);
        assert_eq!(covered, anomalous);
    }

    #[test]
    fn intensity_of_known_ratios() {
        // Two nodes with ratios 1.2 and 1.6 average to 1.4.
        let grid = GridIndex::build(&[(0.0, 0.0)]).unwrap();
        let d = RainfallDataset::new(grid, vec![1901, 1902], vec![6.0, 8.0]).unwrap();
        let stats = LocationStats {
            mu: vec![5.0],
            sigma: vec![1.0],
            mu_aimr: 5.0,
            sigma_aimr: 1.0,
        };
        let anomaly = Anomaly {
            id: 0,
            sign: Sign::Positive,
            nodes: vec![(0, 0), (0, 1)],
            spatial_size: 1,
            temporal_size: 2,
            st_size: 2,
            intensity: None,
        };
        let i = anomaly_intensity(&anomaly, &d, &stats).unwrap();
        assert!((i - 1.4).abs() < 1e-12);
    }

    #[test]
    fn single_node_case_intensity() {
        // y = 5.84 against a long-term mean of 4.18 gives 1.397.
        let grid = GridIndex::build(&[(0.0, 0.0)]).unwrap();
        let d =
            RainfallDataset::new(grid, vec![1901, 1902, 1903], vec![2.52, 4.18, 5.84]).unwrap();
        let stats = crate::lwa::location_stats(&d).unwrap();
        assert!((stats.mu[0] - 4.18).abs() < 1e-12);
        let anomaly = Anomaly {
            id: 0,
            sign: Sign::Positive,
            nodes: vec![(0, 2)],
            spatial_size: 1,
            temporal_size: 1,
            st_size: 1,
            intensity: None,
        };
        let i = anomaly_intensity(&anomaly, &d, &stats).unwrap();
        assert!((i - 1.397).abs() < 0.005);
    }

    #[test]
    fn unit_ratio_everywhere_gives_one() {
        let grid = GridIndex::build(&[(0.0, 0.0), (0.0, 1.0)]).unwrap();
        let d = RainfallDataset::new(grid, vec![1901, 1902], vec![3.0, 3.0, 7.0, 7.0]).unwrap();
        let stats = LocationStats {
            mu: vec![3.0, 7.0],
            sigma: vec![1.0, 1.0],
            mu_aimr: 5.0,
            sigma_aimr: 1.0,
        };
        let anomaly = Anomaly {
            id: 0,
            sign: Sign::Positive,
            nodes: vec![(0, 0), (0, 1), (1, 0), (1, 1)],
            spatial_size: 2,
            temporal_size: 2,
            st_size: 4,
            intensity: None,
        };
        assert!((anomaly_intensity(&anomaly, &d, &stats).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zero_climatology_is_degenerate() {
        let grid = GridIndex::build(&[(0.0, 0.0)]).unwrap();
        let d = RainfallDataset::new(grid, vec![1901, 1902], vec![0.0, 0.0]).unwrap();
        let stats = LocationStats {
            mu: vec![0.0],
            sigma: vec![0.0],
            mu_aimr: 0.0,
            sigma_aimr: 0.0,
        };
        let anomaly = Anomaly {
            id: 0,
            sign: Sign::Positive,
            nodes: vec![(0, 0)],
            spatial_size: 1,
            temporal_size: 1,
            st_size: 1,
            intensity: None,
        };
        assert!(matches!(
            anomaly_intensity(&anomaly, &d, &stats),
            Err(Error::DegenerateClimatology(0))
        ));
    }
}
