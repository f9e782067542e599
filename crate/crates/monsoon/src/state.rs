//! Latent rainfall states and the per-node state field.

use std::fmt;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};

/// Latent state of one node: positive anomaly (1), negative anomaly (2) or
/// normal (3).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum State {
    High,
    Low,
    Normal,
}

impl State {
    pub const ALL: [State; 3] = [State::High, State::Low, State::Normal];

    /// Numeric code used on disk: 1, 2 or 3.
    pub fn code(self) -> u8 {
        match self {
            State::High => 1,
            State::Low => 2,
            State::Normal => 3,
        }
    }

    /// Dense index 0..3 for array lookups.
    pub fn index(self) -> usize {
        match self {
            State::High => 0,
            State::Low => 1,
            State::Normal => 2,
        }
    }

    pub fn from_code(code: u8) -> Option<State> {
        match code {
            1 => Some(State::High),
            2 => Some(State::Low),
            3 => Some(State::Normal),
            _ => None,
        }
    }

    pub fn from_index(index: usize) -> State {
        State::ALL[index]
    }

    pub fn is_anomalous(self) -> bool {
        self != State::Normal
    }
}

impl fmt::Display for State {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.code())
    }
}

/// Sign of an anomaly or planted block.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Sign {
    Positive,
    Negative,
}

impl Sign {
    pub fn state(self) -> State {
        match self {
            Sign::Positive => State::High,
            Sign::Negative => State::Low,
        }
    }

    pub fn from_state(state: State) -> Option<Sign> {
        match state {
            State::High => Some(Sign::Positive),
            State::Low => Some(Sign::Negative),
            State::Normal => None,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Sign::Positive => "positive",
            Sign::Negative => "negative",
        }
    }

    pub fn parse(text: &str) -> Option<Sign> {
        match text {
            "+" | "positive" | "pos" => Some(Sign::Positive),
            "-" | "negative" | "neg" => Some(Sign::Negative),
            _ => None,
        }
    }
}

impl fmt::Display for Sign {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl serde::Serialize for Sign {
    fn serialize<S: serde::Serializer>(
        &self,
        serializer: S,
    ) -> std::result::Result<S::Ok, S::Error> {
        serializer.serialize_str(self.label())
    }
}

impl<'de> serde::Deserialize<'de> for Sign {
    fn deserialize<D: serde::Deserializer<'de>>(
        deserializer: D,
    ) -> std::result::Result<Self, D::Error> {
        let text = <String as serde::Deserialize>::deserialize(deserializer)?;
        Sign::parse(&text).ok_or_else(|| serde::de::Error::custom(format!("bad sign `{text}`")))
    }
}

/// Latent assignment for every `(location, year)` node plus the per-year
/// aggregate-rainfall states.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StateField {
    n_locations: usize,
    n_years: usize,
    z: Vec<State>,
    z_aimr: Vec<State>,
}

impl StateField {
    /// All-normal field of the given shape.
    pub fn normal(n_locations: usize, n_years: usize) -> Self {
        StateField {
            n_locations,
            n_years,
            z: vec![State::Normal; n_locations * n_years],
            z_aimr: vec![State::Normal; n_years],
        }
    }

    pub fn from_parts(
        n_locations: usize,
        n_years: usize,
        z: Vec<State>,
        z_aimr: Vec<State>,
    ) -> Result<Self> {
        if z.len() != n_locations * n_years || z_aimr.len() != n_years {
            return Err(Error::ShapeMismatch(format!(
                "expected {}x{} nodes and {} aggregate states, got {} and {}",
                n_locations,
                n_years,
                n_years,
                z.len(),
                z_aimr.len()
            )));
        }
        Ok(StateField {
            n_locations,
            n_years,
            z,
            z_aimr,
        })
    }

    pub fn n_locations(&self) -> usize {
        self.n_locations
    }

    pub fn n_years(&self) -> usize {
        self.n_years
    }

    pub fn get(&self, s: usize, t: usize) -> State {
        self.z[s * self.n_years + t]
    }

    pub fn set(&mut self, s: usize, t: usize, state: State) {
        self.z[s * self.n_years + t] = state;
    }

    pub fn aimr(&self, t: usize) -> State {
        self.z_aimr[t]
    }

    pub fn set_aimr(&mut self, t: usize, state: State) {
        self.z_aimr[t] = state;
    }

    pub fn same_shape(&self, other: &StateField) -> bool {
        self.n_locations == other.n_locations && self.n_years == other.n_years
    }

    /// Count of nodes in `state` during year `t`.
    pub fn count_in_year(&self, t: usize, state: State) -> usize {
        (0..self.n_locations)
            .filter(|&s| self.get(s, t) == state)
            .count()
    }

    /// Total node count in `state` over the whole field.
    pub fn count(&self, state: State) -> usize {
        self.z.iter().filter(|&&z| z == state).count()
    }

    /// Write the per-node states as CSV `location_id,year,state`.
    pub fn write_csv(&self, years: &[i32], path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut out = String::from("location_id,year,state\n");
        for s in 0..self.n_locations {
            for (t, &year) in years.iter().enumerate() {
                out.push_str(&format!("{},{},{}\n", s, year, self.get(s, t)));
            }
        }
        write_atomic(path, out.as_bytes())
    }

    /// Write the aggregate per-year states as CSV `year,state`.
    pub fn write_aimr_csv(&self, years: &[i32], path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut out = String::from("year,state\n");
        for (t, &year) in years.iter().enumerate() {
            out.push_str(&format!("{},{}\n", year, self.aimr(t)));
        }
        write_atomic(path, out.as_bytes())
    }

    /// Read a per-node state CSV written by [`StateField::write_csv`].
    ///
    /// The file must cover every `(location, year)` cell exactly once;
    /// per-year aggregate states default to normal (load them separately
    /// with [`StateField::read_aimr_csv`]).
    pub fn read_csv(path: impl AsRef<Path>, years: &[i32]) -> Result<StateField> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, "location_id,year,state")) => {}
            _ => {
                return Err(Error::Parse {
                    line: 1,
                    msg: "expected header `location_id,year,state`".into(),
                })
            }
        }
        let mut cells: Vec<(usize, usize, State)> = Vec::new();
        let mut max_loc = 0usize;
        for (i, raw) in lines {
            let line = i + 1;
            let mut parts = raw.split(',');
            let (a, b, c) = match (parts.next(), parts.next(), parts.next(), parts.next()) {
                (Some(a), Some(b), Some(c), None) => (a, b, c),
                _ => {
                    return Err(Error::Parse {
                        line,
                        msg: format!("expected 3 fields, got `{raw}`"),
                    })
                }
            };
            let s: usize = a.trim().parse().map_err(|_| Error::Parse {
                line,
                msg: format!("bad location id `{a}`"),
            })?;
            let year: i32 = b.trim().parse().map_err(|_| Error::Parse {
                line,
                msg: format!("bad year `{b}`"),
            })?;
            let code: u8 = c.trim().parse().map_err(|_| Error::Parse {
                line,
                msg: format!("bad state `{c}`"),
            })?;
            let state = State::from_code(code).ok_or(Error::Parse {
                line,
                msg: format!("state must be 1, 2 or 3, got {code}"),
            })?;
            let t = years.iter().position(|&y| y == year).ok_or(Error::Parse {
                line,
                msg: format!("year {year} not in dataset"),
            })?;
            max_loc = max_loc.max(s);
            cells.push((s, t, state));
        }
        let n_locations = max_loc + 1;
        let n_years = years.len();
        if cells.len() != n_locations * n_years {
            return Err(Error::IncompleteGrid(format!(
                "state file has {} cells, expected {}x{}",
                cells.len(),
                n_locations,
                n_years
            )));
        }
        let mut field = StateField::normal(n_locations, n_years);
        let mut seen = vec![false; n_locations * n_years];
        for (s, t, state) in cells {
            let idx = s * n_years + t;
            if seen[idx] {
                return Err(Error::IncompleteGrid(format!(
                    "duplicate cell (location {s}, year index {t})"
                )));
            }
            seen[idx] = true;
            field.set(s, t, state);
        }
        Ok(field)
    }

    /// Read aggregate per-year states written by [`StateField::write_aimr_csv`].
    pub fn read_aimr_csv(&mut self, path: impl AsRef<Path>, years: &[i32]) -> Result<()> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, "year,state")) => {}
            _ => {
                return Err(Error::Parse {
                    line: 1,
                    msg: "expected header `year,state`".into(),
                })
            }
        }
        for (i, raw) in lines {
            let line = i + 1;
            let mut parts = raw.split(',');
            let (a, b) = match (parts.next(), parts.next(), parts.next()) {
                (Some(a), Some(b), None) => (a, b),
                _ => {
                    return Err(Error::Parse {
                        line,
                        msg: format!("expected 2 fields, got `{raw}`"),
                    })
                }
            };
            let year: i32 = a.trim().parse().map_err(|_| Error::Parse {
                line,
                msg: format!("bad year `{a}`"),
            })?;
            let code: u8 = b.trim().parse().map_err(|_| Error::Parse {
                line,
                msg: format!("bad state `{b}`"),
            })?;
            let state = State::from_code(code).ok_or(Error::Parse {
                line,
                msg: format!("state must be 1, 2 or 3, got {code}"),
            })?;
            let t = years.iter().position(|&y| y == year).ok_or(Error::Parse {
                line,
                msg: format!("year {year} not in dataset"),
            })?;
            self.set_aimr(t, state);
        }
        Ok(())
    }
}

/// Write `bytes` to `path`, creating parent directories as needed.
pub(crate) fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
    }
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(bytes).map_err(|e| Error::io(path, e))
}
