//! Synthetic datasets with planted ground-truth anomalies.
//!
//! The generator draws a Gaussian background field and shifts the mean inside
//! rectangular space-time blocks, recording the planted state of every node.
//! Used by the recovery and trend tests, and by `synth` on the command line.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::data::RainfallDataset;
use crate::error::{Error, Result};
use crate::grid::GridIndex;
use crate::state::{Sign, State, StateField};

/// A rectangular space-time block with a mean shift, in units of the
/// background standard deviation. All ranges are inclusive.
#[derive(Debug, Clone, Copy)]
pub struct Block {
    pub sign: Sign,
    pub row0: usize,
    pub row1: usize,
    pub col0: usize,
    pub col1: usize,
    pub year0: usize,
    pub year1: usize,
    pub shift: f64,
}

impl Block {
    pub fn contains(&self, row: usize, col: usize, t: usize) -> bool {
        (self.row0..=self.row1).contains(&row)
            && (self.col0..=self.col1).contains(&col)
            && (self.year0..=self.year1).contains(&t)
    }
}

/// Recipe for a synthetic dataset.
#[derive(Debug, Clone)]
pub struct SyntheticSpec {
    pub rows: usize,
    pub cols: usize,
    pub years: usize,
    pub background_mu: f64,
    pub background_sigma: f64,
    pub blocks: Vec<Block>,
    pub seed: u64,
}

/// Planted states for every `(location, year)` node of a synthetic dataset.
#[derive(Debug, Clone)]
pub struct GroundTruth {
    pub labels: StateField,
}

/// First year label written into generated datasets.
pub const SYNTH_START_YEAR: i32 = 1901;

fn validate(spec: &SyntheticSpec) -> Result<()> {
    if spec.rows == 0 || spec.cols == 0 || spec.years == 0 {
        return Err(Error::InvalidParameter(
            "grid dimensions and year count must be positive".into(),
        ));
    }
    if spec.background_sigma <= 0.0 || !spec.background_sigma.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "background_sigma must be positive, got {}",
            spec.background_sigma
        )));
    }
    if !spec.background_mu.is_finite() || spec.background_mu < 0.0 {
        return Err(Error::InvalidParameter(format!(
            "background_mu must be non-negative, got {}",
            spec.background_mu
        )));
    }
    for (i, b) in spec.blocks.iter().enumerate() {
        if b.row1 >= spec.rows || b.col1 >= spec.cols || b.year1 >= spec.years {
            return Err(Error::InvalidParameter(format!(
                "block {i} exceeds the grid or year range"
            )));
        }
        if b.row0 > b.row1 || b.col0 > b.col1 || b.year0 > b.year1 {
            return Err(Error::InvalidParameter(format!(
                "block {i} has an empty range"
            )));
        }
        if b.shift < 0.0 || !b.shift.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "block {i} shift must be non-negative"
            )));
        }
    }
    // Opposite-sign blocks must not overlap; same-sign overlap is harmless.
    for i in 0..spec.blocks.len() {
        for j in (i + 1)..spec.blocks.len() {
            let (a, b) = (&spec.blocks[i], &spec.blocks[j]);
            if a.sign != b.sign
                && a.row0 <= b.row1
                && b.row0 <= a.row1
                && a.col0 <= b.col1
                && b.col0 <= a.col1
                && a.year0 <= b.year1
                && b.year0 <= a.year1
            {
                return Err(Error::ConflictingBlocks(format!(
                    "blocks {i} and {j} overlap with opposite signs"
                )));
            }
        }
    }
    Ok(())
}

/// Generate a dataset and its planted labels. Deterministic for a fixed seed.
///
/// Cell values are drawn from `Normal(mu, sigma)` with the mean shifted by
/// `±shift·sigma` inside blocks, then clamped at zero (rainfall cannot be
/// negative).
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<(RainfallDataset, GroundTruth)> {
    validate(spec)?;
    let mut coords = Vec::with_capacity(spec.rows * spec.cols);
    for r in 0..spec.rows {
        for c in 0..spec.cols {
            coords.push((r as f64, c as f64));
        }
    }
    let grid = GridIndex::build(&coords)?;
    let s_total = grid.len();
    let t_total = spec.years;
    let years: Vec<i32> = (0..t_total as i32).map(|t| SYNTH_START_YEAR + t).collect();

    let mut labels = StateField::normal(s_total, t_total);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let noise = Normal::new(0.0, spec.background_sigma)
        .map_err(|e| Error::InvalidParameter(e.to_string()))?;

    // Draw in grid-id order so the output is independent of how the
    // coordinate list above happened to be arranged.
    let mut y = vec![0.0; s_total * t_total];
    for s in 0..s_total {
        let loc = grid.location(s)?;
        let (row, col) = (loc.lat as usize, loc.lon as usize);
        for t in 0..t_total {
            let mut mean = spec.background_mu;
            for b in &spec.blocks {
                if b.contains(row, col, t) {
                    let delta = b.shift * spec.background_sigma;
                    match b.sign {
                        Sign::Positive => mean += delta,
                        Sign::Negative => mean -= delta,
                    }
                    labels.set(s, t, b.sign.state());
                }
            }
            y[s * t_total + t] = (mean + noise.sample(&mut rng)).max(0.0);
        }
    }

    let dataset = RainfallDataset::new(grid, years, y)?;
    Ok((dataset, GroundTruth { labels }))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base_spec() -> SyntheticSpec {
        SyntheticSpec {
            rows: 4,
            cols: 5,
            years: 3,
            background_mu: 3.0,
            background_sigma: 1.0,
            blocks: vec![],
            seed: 7,
        }
    }

    #[test]
    fn no_blocks_all_normal_labels() {
        let (_, truth) = generate_synthetic(&base_spec()).unwrap();
        assert_eq!(truth.labels.count(State::Normal), 4 * 5 * 3);
    }

    #[test]
    fn block_volume_matches_label_count() {
        let mut spec = base_spec();
        spec.blocks.push(Block {
            sign: Sign::Positive,
            row0: 0,
            row1: 1,
            col0: 0,
            col1: 1,
            year0: 0,
            year1: 1,
            shift: 2.0,
        });
        let (_, truth) = generate_synthetic(&spec).unwrap();
        assert_eq!(truth.labels.count(State::High), 8);
        assert_eq!(truth.labels.count(State::Low), 0);
    }

    #[test]
    fn fixed_seed_is_bit_identical() {
        let mut spec = base_spec();
        spec.blocks.push(Block {
            sign: Sign::Negative,
            row0: 2,
            row1: 3,
            col0: 2,
            col1: 4,
            year0: 1,
            year1: 2,
            shift: 1.5,
        });
        let (a, _) = generate_synthetic(&spec).unwrap();
        let (b, _) = generate_synthetic(&spec).unwrap();
        for s in 0..a.n_locations() {
            for t in 0..a.n_years() {
                assert_eq!(a.value(s, t).to_bits(), b.value(s, t).to_bits());
            }
        }
    }

    #[test]
    fn opposite_sign_overlap_rejected() {
        let mut spec = base_spec();
        let block = Block {
            sign: Sign::Positive,
            row0: 0,
            row1: 2,
            col0: 0,
            col1: 2,
            year0: 0,
            year1: 2,
            shift: 2.0,
        };
        spec.blocks.push(block);
        spec.blocks.push(Block {
            sign: Sign::Negative,
            ..block
        });
        assert!(matches!(
            generate_synthetic(&spec),
            Err(Error::ConflictingBlocks(_))
        ));
    }

    #[test]
    fn out_of_range_block_rejected() {
        let mut spec = base_spec();
        spec.blocks.push(Block {
            sign: Sign::Positive,
            row0: 0,
            row1: 4, // grid has rows 0..=3
            col0: 0,
            col1: 0,
            year0: 0,
            year1: 0,
            shift: 1.0,
        });
        assert!(generate_synthetic(&spec).is_err());
    }

    #[test]
    fn values_stay_non_negative() {
        let mut spec = base_spec();
        spec.background_mu = 0.5;
        spec.blocks.push(Block {
            sign: Sign::Negative,
            row0: 0,
            row1: 3,
            col0: 0,
            col1: 4,
            year0: 0,
            year1: 2,
            shift: 3.0,
        });
        let (d, _) = generate_synthetic(&spec).unwrap();
        for s in 0..d.n_locations() {
            for t in 0..d.n_years() {
                assert!(d.value(s, t) >= 0.0);
            }
        }
    }

    #[test]
    fn shifted_block_mean_moves() {
        let mut spec = base_spec();
        spec.rows = 10;
        spec.cols = 10;
        spec.years = 40;
        spec.blocks.push(Block {
            sign: Sign::Positive,
            row0: 0,
            row1: 4,
            col0: 0,
            col1: 9,
            year0: 0,
            year1: 39,
            shift: 2.0,
        });
        let (d, truth) = generate_synthetic(&spec).unwrap();
        let mut in_block = (0.0, 0usize);
        let mut outside = (0.0, 0usize);
        for s in 0..d.n_locations() {
            for t in 0..d.n_years() {
                if truth.labels.get(s, t) == State::High {
                    in_block = (in_block.0 + d.value(s, t), in_block.1 + 1);
                } else {
                    outside = (outside.0 + d.value(s, t), outside.1 + 1);
                }
            }
        }
        let gap = in_block.0 / in_block.1 as f64 - outside.0 / outside.1 as f64;
        assert!((gap - 2.0).abs() < 0.1, "mean gap {gap} should be near 2.0");
    }
}
