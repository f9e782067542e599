//! Line-oriented `key = value` configuration files.
//!
//! Blank lines and `#` comments are ignored; keys may repeat where a list is
//! expected (synthetic blocks). Parsers report the offending line and key.

use std::path::Path;

use crate::error::{Error, Result};
use crate::mrf::{
    MrfConfig, NodePotentialSpec, NodeScheme, SpatialMode, SpatialPotentialSpec,
    TemporalPotentialSpec,
};
use crate::state::Sign;
use crate::synth::{Block, SyntheticSpec};

/// One `key = value` entry with its source line.
#[derive(Debug, Clone)]
pub struct Entry {
    pub key: String,
    pub value: String,
    pub line: usize,
}

/// Parse the raw entries of a config file, preserving order and duplicates.
pub fn parse_entries(text: &str) -> Result<Vec<Entry>> {
    let mut entries = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let (key, value) = trimmed.split_once('=').ok_or(Error::Config {
            line,
            msg: format!("expected `key = value`, got `{trimmed}`"),
        })?;
        entries.push(Entry {
            key: key.trim().to_string(),
            value: value.trim().to_string(),
            line,
        });
    }
    Ok(entries)
}

pub fn read_entries(path: impl AsRef<Path>) -> Result<Vec<Entry>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_entries(&text)
}

fn parse_value<T: std::str::FromStr>(entry: &Entry) -> Result<T> {
    entry.value.parse().map_err(|_| Error::Config {
        line: entry.line,
        msg: format!("bad value `{}` for key `{}`", entry.value, entry.key),
    })
}

/// Read an MRF configuration.
///
/// Keys: `spatial.mode` (unif|prop|anml|mxd|off), `spatial.C`, `spatial.D`,
/// `spatial.lambda`, `temporal.P` (number or `off`), `node.scheme`
/// (NP1..NP8|custom), `node.C1`..`node.C3`, `aimr_link` (on|off).
/// Missing keys keep their defaults.
pub fn load_mrf_config(path: impl AsRef<Path>) -> Result<MrfConfig> {
    mrf_config_from_entries(&read_entries(path)?)
}

pub fn mrf_config_from_entries(entries: &[Entry]) -> Result<MrfConfig> {
    let mut spatial = SpatialPotentialSpec::default();
    let mut temporal = TemporalPotentialSpec { p: Some(0.9) };
    let mut node = NodePotentialSpec::default();
    let mut aimr_link = true;

    for entry in entries {
        match entry.key.as_str() {
            "spatial.mode" => {
                spatial.mode = match entry.value.as_str() {
                    "unif" => SpatialMode::Unif,
                    "prop" => SpatialMode::Prop,
                    "anml" => SpatialMode::Anml,
                    "mxd" => SpatialMode::Mxd,
                    "off" => SpatialMode::Off,
                    other => {
                        return Err(Error::Config {
                            line: entry.line,
                            msg: format!("unknown spatial.mode `{other}`"),
                        })
                    }
                }
            }
            "spatial.C" => spatial.c_uniform = parse_value(entry)?,
            "spatial.D" => spatial.d = parse_value(entry)?,
            "spatial.lambda" => spatial.lambda = parse_value(entry)?,
            "temporal.P" => {
                temporal.p = if entry.value == "off" {
                    None
                } else {
                    Some(parse_value(entry)?)
                }
            }
            "node.scheme" => {
                node.scheme = NodeScheme::parse(&entry.value).map_err(|_| Error::Config {
                    line: entry.line,
                    msg: format!("unknown node.scheme `{}`", entry.value),
                })?
            }
            "node.C1" => node.c1 = parse_value(entry)?,
            "node.C2" => node.c2 = parse_value(entry)?,
            "node.C3" => node.c3 = parse_value(entry)?,
            "aimr_link" => {
                aimr_link = match entry.value.as_str() {
                    "on" | "true" => true,
                    "off" | "false" => false,
                    other => {
                        return Err(Error::Config {
                            line: entry.line,
                            msg: format!("aimr_link must be on or off, got `{other}`"),
                        })
                    }
                }
            }
            other => {
                return Err(Error::Config {
                    line: entry.line,
                    msg: format!("unknown key `{other}`"),
                })
            }
        }
    }
    let config = MrfConfig {
        spatial,
        temporal,
        node,
        aimr_link,
    };
    config.validate().map_err(|e| Error::Config {
        line: 0,
        msg: e.to_string(),
    })?;
    Ok(config)
}

/// Read a synthetic dataset recipe.
///
/// Keys: `rows`, `cols`, `years`, `background_mu`, `background_sigma`,
/// `seed`, and one `block` per planted block with value
/// `<sign> <row0>:<row1> <col0>:<col1> <year0>:<year1> <shift>`
/// (inclusive ranges, sign `+` or `-`).
pub fn load_synthetic_spec(path: impl AsRef<Path>) -> Result<SyntheticSpec> {
    synthetic_spec_from_entries(&read_entries(path)?)
}

fn parse_range(text: &str, entry: &Entry) -> Result<(usize, usize)> {
    let err = || Error::Config {
        line: entry.line,
        msg: format!("bad range `{text}` in key `block` (expected lo:hi)"),
    };
    let (lo, hi) = text.split_once(':').ok_or_else(err)?;
    Ok((
        lo.parse().map_err(|_| err())?,
        hi.parse().map_err(|_| err())?,
    ))
}

pub fn synthetic_spec_from_entries(entries: &[Entry]) -> Result<SyntheticSpec> {
    let mut rows = None;
    let mut cols = None;
    let mut years = None;
    let mut background_mu = 3.0;
    let mut background_sigma = 1.0;
    let mut seed = 0u64;
    let mut blocks = Vec::new();

    for entry in entries {
        match entry.key.as_str() {
            "rows" => rows = Some(parse_value(entry)?),
            "cols" => cols = Some(parse_value(entry)?),
            "years" => years = Some(parse_value(entry)?),
            "background_mu" => background_mu = parse_value(entry)?,
            "background_sigma" => background_sigma = parse_value(entry)?,
            "seed" => seed = parse_value(entry)?,
            "block" => {
                let parts: Vec<&str> = entry.value.split_whitespace().collect();
                if parts.len() != 5 {
                    return Err(Error::Config {
                        line: entry.line,
                        msg: format!(
                            "key `block` needs `<sign> r0:r1 c0:c1 t0:t1 <shift>`, got `{}`",
                            entry.value
                        ),
                    });
                }
                let sign = Sign::parse(parts[0]).ok_or(Error::Config {
                    line: entry.line,
                    msg: format!("bad sign `{}` in key `block`", parts[0]),
                })?;
                let (row0, row1) = parse_range(parts[1], entry)?;
                let (col0, col1) = parse_range(parts[2], entry)?;
                let (year0, year1) = parse_range(parts[3], entry)?;
                let shift: f64 = parts[4].parse().map_err(|_| Error::Config {
                    line: entry.line,
                    msg: format!("bad shift `{}` in key `block`", parts[4]),
                })?;
                blocks.push(Block {
                    sign,
                    row0,
                    row1,
                    col0,
                    col1,
                    year0,
                    year1,
                    shift,
                });
            }
            other => {
                return Err(Error::Config {
                    line: entry.line,
                    msg: format!("unknown key `{other}`"),
                })
            }
        }
    }

    let require = |value: Option<usize>, key: &str| {
        value.ok_or(Error::Config {
            line: 0,
            msg: format!("missing required key `{key}`"),
        })
    };
    Ok(SyntheticSpec {
        rows: require(rows, "rows")?,
        cols: require(cols, "cols")?,
        years: require(years, "years")?,
        background_mu,
        background_sigma,
        blocks,
        seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn entries_skip_comments_and_blanks() {
        let text = "# comment\n\n a = 1 \nb= two\n";
        let entries = parse_entries(text).unwrap();
        assert_eq!(entries.len(), 2);
        assert_eq!(entries[0].key, "a");
        assert_eq!(entries[0].value, "1");
        assert_eq!(entries[1].line, 4);
    }

    #[test]
    fn malformed_line_reports_position() {
        let err = parse_entries("a = 1\nnot a pair\n").unwrap_err();
        match err {
            Error::Config { line, .. } => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn mrf_config_round_trip() {
        let text = "spatial.mode = unif\nspatial.C = 2.0\nspatial.D = 1.0\n\
                    temporal.P = 0.75\nnode.scheme = NP4\naimr_link = off\n";
        let config = mrf_config_from_entries(&parse_entries(text).unwrap()).unwrap();
        assert_eq!(config.spatial.mode, SpatialMode::Unif);
        assert_eq!(config.spatial.c_uniform, 2.0);
        assert_eq!(config.spatial.d, 1.0);
        assert_eq!(config.temporal.p, Some(0.75));
        assert_eq!(config.node.scheme, NodeScheme::Np4);
        assert!(!config.aimr_link);
    }

    #[test]
    fn mrf_config_unknown_key_named() {
        let err =
            mrf_config_from_entries(&parse_entries("spatial.pizza = 4\n").unwrap()).unwrap_err();
        assert!(err.to_string().contains("spatial.pizza"));
    }

    #[test]
    fn temporal_off_and_defaults() {
        let config =
            mrf_config_from_entries(&parse_entries("temporal.P = off\n").unwrap()).unwrap();
        assert_eq!(config.temporal.p, None);
        assert_eq!(config.spatial.mode, SpatialMode::Prop);
        assert!(config.aimr_link);
    }

    #[test]
    fn bad_temporal_p_rejected() {
        assert!(mrf_config_from_entries(&parse_entries("temporal.P = 1.5\n").unwrap()).is_err());
    }

    #[test]
    fn synthetic_spec_with_blocks() {
        let text = "rows = 4\ncols = 5\nyears = 10\nbackground_mu = 3.0\n\
                    background_sigma = 1.0\nseed = 7\n\
                    block = + 0:1 0:2 2:4 2.0\nblock = - 2:3 3:4 5:7 1.5\n";
        let spec = synthetic_spec_from_entries(&parse_entries(text).unwrap()).unwrap();
        assert_eq!(spec.rows, 4);
        assert_eq!(spec.blocks.len(), 2);
        assert_eq!(spec.blocks[0].sign, Sign::Positive);
        assert_eq!(spec.blocks[0].year1, 4);
        assert_eq!(spec.blocks[1].shift, 1.5);
    }

    #[test]
    fn synthetic_missing_key_named() {
        let err = synthetic_spec_from_entries(&parse_entries("rows = 4\ncols = 4\n").unwrap())
            .unwrap_err();
        assert!(err.to_string().contains("years"));
    }

    #[test]
    fn synthetic_bad_block_named() {
        let text = "rows = 4\ncols = 4\nyears = 4\nblock = + 0-1 0:1 0:1 2.0\n";
        let err = synthetic_spec_from_entries(&parse_entries(text).unwrap()).unwrap_err();
        assert!(err.to_string().contains("block"));
    }
}
