//! Spatial grid with 8-neighbor adjacency.
//!
//! Locations live on a regular lattice (1 degree by default). Ids are dense
//! `0..S`, assigned by longitude first and latitude next; the ordering only
//! identifies locations, nothing downstream depends on it. Irregular domains
//! (coastline masks, holes) are fine: missing neighbors are simply absent.

use std::collections::HashMap;

use crate::error::{Error, Result};

/// One grid cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Location {
    pub id: usize,
    pub lat: f64,
    pub lon: f64,
}

/// Immutable spatial index: locations plus their 8-neighborhoods.
#[derive(Debug, Clone)]
pub struct GridIndex {
    locations: Vec<Location>,
    neighbors: Vec<Vec<usize>>,
    spacing: f64,
}

impl GridIndex {
    /// Build a grid from unordered `(lat, lon)` pairs on a 1-unit lattice.
    pub fn build(coords: &[(f64, f64)]) -> Result<Self> {
        Self::build_with_spacing(coords, 1.0)
    }

    /// Build with an explicit uniform lattice spacing.
    pub fn build_with_spacing(coords: &[(f64, f64)], spacing: f64) -> Result<Self> {
        if spacing <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "grid spacing must be positive, got {spacing}"
            )));
        }
        let mut sorted: Vec<(f64, f64)> = coords.to_vec();
        // Longitude first, latitude next.
        sorted.sort_by(|a, b| {
            (a.1, a.0)
                .partial_cmp(&(b.1, b.0))
                .expect("non-finite coordinate")
        });

        let lat0 = sorted
            .iter()
            .map(|c| c.0)
            .fold(f64::INFINITY, f64::min);
        let lon0 = sorted
            .iter()
            .map(|c| c.1)
            .fold(f64::INFINITY, f64::min);

        let mut cells: HashMap<(i64, i64), usize> = HashMap::with_capacity(sorted.len());
        let mut locations = Vec::with_capacity(sorted.len());
        for (id, &(lat, lon)) in sorted.iter().enumerate() {
            let row = lattice_index(lat, lat0, spacing)
                .ok_or(Error::NonLatticeCoordinate { lat, lon, spacing })?;
            let col = lattice_index(lon, lon0, spacing)
                .ok_or(Error::NonLatticeCoordinate { lat, lon, spacing })?;
            if cells.insert((row, col), id).is_some() {
                return Err(Error::DuplicateLocation { lat, lon });
            }
            locations.push(Location { id, lat, lon });
        }

        let mut neighbors = vec![Vec::new(); locations.len()];
        for (&(row, col), &id) in &cells {
            for di in -1i64..=1 {
                for dj in -1i64..=1 {
                    if di == 0 && dj == 0 {
                        continue;
                    }
                    if let Some(&other) = cells.get(&(row + di, col + dj)) {
                        neighbors[id].push(other);
                    }
                }
            }
        }
        for nb in &mut neighbors {
            nb.sort_unstable();
        }

        Ok(GridIndex {
            locations,
            neighbors,
            spacing,
        })
    }

    pub fn len(&self) -> usize {
        self.locations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.locations.is_empty()
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn locations(&self) -> &[Location] {
        &self.locations
    }

    pub fn location(&self, id: usize) -> Result<&Location> {
        self.locations.get(id).ok_or(Error::InvalidLocation {
            id,
            len: self.locations.len(),
        })
    }

    /// Neighbor ids of `s` (at most 8, sorted, never contains `s`).
    pub fn neighbors(&self, s: usize) -> Result<&[usize]> {
        self.neighbors
            .get(s)
            .map(Vec::as_slice)
            .ok_or(Error::InvalidLocation {
                id: s,
                len: self.locations.len(),
            })
    }

    /// Id of the location at `(lat, lon)`, if present.
    pub fn id_at(&self, lat: f64, lon: f64) -> Option<usize> {
        let eps = self.spacing * 1e-6;
        self.locations
            .iter()
            .find(|loc| (loc.lat - lat).abs() < eps && (loc.lon - lon).abs() < eps)
            .map(|loc| loc.id)
    }

    /// All undirected spatial edges as `(s, s')` pairs with `s < s'`.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for (s, nb) in self.neighbors.iter().enumerate() {
            for &t in nb {
                if s < t {
                    out.push((s, t));
                }
            }
        }
        out
    }
}

fn lattice_index(value: f64, origin: f64, spacing: f64) -> Option<i64> {
    let steps = (value - origin) / spacing;
    let rounded = steps.round();
    if (steps - rounded).abs() <= 1e-9 {
        Some(rounded as i64)
    } else {
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeSet;

    fn full_lattice(rows: usize, cols: usize) -> Vec<(f64, f64)> {
        let mut v = Vec::new();
        for r in 0..rows {
            for c in 0..cols {
                v.push((r as f64, c as f64));
            }
        }
        v
    }

    fn neighbor_coords(g: &GridIndex, lat: f64, lon: f64) -> BTreeSet<(i64, i64)> {
        let id = g.id_at(lat, lon).unwrap();
        g.neighbors(id)
            .unwrap()
            .iter()
            .map(|&n| {
                let loc = g.location(n).unwrap();
                (loc.lat as i64, loc.lon as i64)
            })
            .collect()
    }

    #[test]
    fn full_3x3_degrees() {
        let g = GridIndex::build(&full_lattice(3, 3)).unwrap();
        let center = g.id_at(1.0, 1.0).unwrap();
        assert_eq!(g.neighbors(center).unwrap().len(), 8);
        for corner in [(0.0, 0.0), (0.0, 2.0), (2.0, 0.0), (2.0, 2.0)] {
            let id = g.id_at(corner.0, corner.1).unwrap();
            assert_eq!(g.neighbors(id).unwrap().len(), 3);
        }
    }

    #[test]
    fn single_location_has_no_neighbors() {
        let g = GridIndex::build(&[(5.0, 7.0)]).unwrap();
        assert!(g.neighbors(0).unwrap().is_empty());
    }

    #[test]
    fn l_shaped_domain() {
        // {(0,0),(0,1),(1,0),(2,0),(2,1)}: NB((1,0)) enumerated by hand over
        // the (i,j) offsets is {(0,0),(0,1),(2,0),(2,1)}.
        let coords = [(0.0, 0.0), (0.0, 1.0), (1.0, 0.0), (2.0, 0.0), (2.0, 1.0)];
        let g = GridIndex::build(&coords).unwrap();
        assert_eq!(
            neighbor_coords(&g, 1.0, 0.0),
            BTreeSet::from([(0, 0), (0, 1), (2, 0), (2, 1)])
        );
        assert_eq!(
            neighbor_coords(&g, 2.0, 1.0),
            BTreeSet::from([(2, 0), (1, 0)])
        );
    }

    #[test]
    fn duplicate_location_rejected() {
        let err = GridIndex::build(&[(0.0, 0.0), (0.0, 0.0)]).unwrap_err();
        assert!(matches!(err, Error::DuplicateLocation { .. }));
    }

    #[test]
    fn off_lattice_rejected() {
        let err = GridIndex::build(&[(0.0, 0.0), (0.5, 1.0)]).unwrap_err();
        assert!(matches!(err, Error::NonLatticeCoordinate { .. }));
    }

    #[test]
    fn non_unit_spacing() {
        let coords = [(10.0, 20.0), (10.0, 20.25), (10.25, 20.0)];
        let g = GridIndex::build_with_spacing(&coords, 0.25).unwrap();
        let id = g.id_at(10.0, 20.0).unwrap();
        assert_eq!(g.neighbors(id).unwrap().len(), 2);
    }

    #[test]
    fn out_of_range_id() {
        let g = GridIndex::build(&[(0.0, 0.0)]).unwrap();
        assert!(matches!(g.neighbors(1), Err(Error::InvalidLocation { .. })));
    }

    #[test]
    fn ordering_is_lon_then_lat() {
        let g = GridIndex::build(&[(1.0, 1.0), (0.0, 0.0), (1.0, 0.0)]).unwrap();
        let locs = g.locations();
        assert_eq!((locs[0].lat, locs[0].lon), (0.0, 0.0));
        assert_eq!((locs[1].lat, locs[1].lon), (1.0, 0.0));
        assert_eq!((locs[2].lat, locs[2].lon), (1.0, 1.0));
    }

    #[test]
    fn handshake_sum_is_even() {
        let g = GridIndex::build(&full_lattice(4, 5)).unwrap();
        let total: usize = (0..g.len()).map(|s| g.neighbors(s).unwrap().len()).sum();
        assert_eq!(total % 2, 0);
        assert_eq!(total, 2 * g.edges().len());
    }

    #[test]
    fn adjacency_independent_of_input_order() {
        let coords = full_lattice(3, 4);
        let mut shuffled = coords.clone();
        shuffled.reverse();
        shuffled.swap(0, 5);
        let a = GridIndex::build(&coords).unwrap();
        let b = GridIndex::build(&shuffled).unwrap();
        // Compare neighbor structure through coordinates, not ids.
        for loc in a.locations() {
            let a_nb = neighbor_coords(&a, loc.lat, loc.lon);
            let b_nb = neighbor_coords(&b, loc.lat, loc.lon);
            assert_eq!(a_nb, b_nb);
        }
    }

    #[test]
    fn symmetry_of_neighbor_relation() {
        let coords = [(0.0, 0.0), (0.0, 1.0), (1.0, 1.0), (3.0, 3.0)];
        let g = GridIndex::build(&coords).unwrap();
        for s in 0..g.len() {
            for &n in g.neighbors(s).unwrap() {
                assert_ne!(s, n);
                assert!(g.neighbors(n).unwrap().contains(&s));
            }
        }
    }
}
