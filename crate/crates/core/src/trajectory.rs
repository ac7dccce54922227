//! Sampled solutions stored as unit pieces `[n, n+1)`.
//!
//! Piece `n` holds `Q` values at `n + j/Q`, `j = 0..Q`. Lookups between
//! samples interpolate linearly inside the piece and never across an
//! integer: solutions are allowed to jump at integers, and the value at `n`
//! belongs to the piece on its right.

use std::io;

use thiserror::Error;

#[derive(Clone, Debug, PartialEq, Error)]
pub enum TrajectoryError {
    #[error("grid needs at least 2 samples per unit, got {0}")]
    InvalidGrid(usize),
    #[error("t = {t} is outside the covered range [{start}, {end})")]
    OutOfRange { t: f64, start: i64, end: i64 },
    #[error("segment [{c}, {d}] is empty or not covered")]
    BadSegment { c: f64, d: f64 },
    #[error("piece has {got} samples, grid expects {expected}")]
    PieceLength { got: usize, expected: usize },
    #[error("non-finite sample in piece {piece} at index {index}")]
    NonFinite { piece: i64, index: usize },
}

/// Samples per unit interval.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct GridSpec {
    q: usize,
}

impl GridSpec {
    pub const DEFAULT_Q: usize = 64;

    pub fn new(q: usize) -> Result<Self, TrajectoryError> {
        if q < 2 {
            return Err(TrajectoryError::InvalidGrid(q));
        }
        Ok(GridSpec { q })
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn step(&self) -> f64 {
        1.0 / self.q as f64
    }

    /// `n + j/Q`. Every grid abscissa in the crate is produced here.
    pub fn abscissa(&self, n: i64, j: usize) -> f64 {
        n as f64 + j as f64 / self.q as f64
    }
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec { q: Self::DEFAULT_Q }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Provenance {
    History,
    Computed,
}

impl Provenance {
    pub fn as_str(self) -> &'static str {
        match self {
            Provenance::History => "history",
            Provenance::Computed => "computed",
        }
    }
}

/// Adjacent grid points where the sign flips (zero counts as non-negative).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SignEvent {
    pub t_left: f64,
    pub t_right: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    start: i64,
    grid: GridSpec,
    values: Vec<f64>,
    provenance: Vec<Provenance>,
}

impl Trajectory {
    pub fn new(start: i64, grid: GridSpec) -> Self {
        Trajectory {
            start,
            grid,
            values: Vec::new(),
            provenance: Vec::new(),
        }
    }

    /// Sample `f` on pieces `start..end`, all tagged as history.
    pub fn from_fn(
        start: i64,
        end: i64,
        grid: GridSpec,
        f: impl Fn(f64) -> f64,
    ) -> Result<Self, TrajectoryError> {
        let mut traj = Trajectory::new(start, grid);
        for n in start..end {
            let piece = (0..grid.q).map(|j| f(grid.abscissa(n, j))).collect();
            traj.push_piece(piece, Provenance::History)?;
        }
        Ok(traj)
    }

    pub fn push_piece(
        &mut self,
        piece: Vec<f64>,
        provenance: Provenance,
    ) -> Result<(), TrajectoryError> {
        if piece.len() != self.grid.q {
            return Err(TrajectoryError::PieceLength {
                got: piece.len(),
                expected: self.grid.q,
            });
        }
        if let Some(index) = piece.iter().position(|v| !v.is_finite()) {
            return Err(TrajectoryError::NonFinite {
                piece: self.end(),
                index,
            });
        }
        self.values.extend(piece);
        self.provenance.push(provenance);
        Ok(())
    }

    pub fn start(&self) -> i64 {
        self.start
    }

    /// One past the last covered integer.
    pub fn end(&self) -> i64 {
        self.start + self.provenance.len() as i64
    }

    pub fn grid(&self) -> GridSpec {
        self.grid
    }

    pub fn num_pieces(&self) -> usize {
        self.provenance.len()
    }

    pub fn covers(&self, t: f64) -> bool {
        t >= self.start as f64 && t < self.end() as f64
    }

    pub fn piece(&self, n: i64) -> Option<&[f64]> {
        if n < self.start || n >= self.end() {
            return None;
        }
        let i = (n - self.start) as usize * self.grid.q;
        Some(&self.values[i..i + self.grid.q])
    }

    pub fn provenance(&self, n: i64) -> Option<Provenance> {
        if n < self.start || n >= self.end() {
            return None;
        }
        Some(self.provenance[(n - self.start) as usize])
    }

    /// Mutable access to one stored sample, for building perturbed copies.
    pub fn sample_mut(&mut self, n: i64, j: usize) -> Option<&mut f64> {
        if n < self.start || n >= self.end() || j >= self.grid.q {
            return None;
        }
        let i = (n - self.start) as usize * self.grid.q + j;
        self.values.get_mut(i)
    }

    /// All stored samples as `(t, value, piece)` in increasing `t`.
    pub fn samples(&self) -> impl Iterator<Item = (f64, f64, i64)> + '_ {
        let q = self.grid.q;
        self.values.iter().enumerate().map(move |(i, &v)| {
            let n = self.start + (i / q) as i64;
            (self.grid.abscissa(n, i % q), v, n)
        })
    }

    pub fn value_at(&self, t: f64) -> Result<f64, TrajectoryError> {
        if !self.covers(t) {
            return Err(TrajectoryError::OutOfRange {
                t,
                start: self.start,
                end: self.end(),
            });
        }
        let n = t.floor() as i64;
        let piece = self.piece(n).expect("covered");
        let q = self.grid.q;
        let j = (((t - n as f64) * q as f64).floor() as usize).min(q - 1);
        if self.grid.abscissa(n, j) == t {
            return Ok(piece[j]);
        }
        if j + 1 < q && self.grid.abscissa(n, j + 1) == t {
            return Ok(piece[j + 1]);
        }
        let w = (t - self.grid.abscissa(n, j)) * q as f64;
        if j + 1 < q {
            Ok(piece[j] + (piece[j + 1] - piece[j]) * w)
        } else {
            // tail of the piece: extrapolate from its last two samples
            Ok(piece[q - 1] + (piece[q - 1] - piece[q - 2]) * w)
        }
    }

    /// Linear extrapolation of piece `n` to its open right end, an estimate
    /// of the left limit `x(n+1-)`.
    pub fn left_limit(&self, n: i64) -> Option<f64> {
        let p = self.piece(n)?;
        let q = p.len();
        Some(2.0 * p[q - 1] - p[q - 2])
    }

    fn segment_values(&self, c: f64, d: f64) -> Result<Vec<f64>, TrajectoryError> {
        let end = self.end() as f64;
        if !(c < d) || c < self.start as f64 || d > end {
            return Err(TrajectoryError::BadSegment { c, d });
        }
        let mut out = vec![self.value_at(c)?];
        if d < end {
            out.push(self.value_at(d)?);
        }
        let first = c.floor() as i64;
        let last = (d.floor() as i64).min(self.end() - 1);
        for n in first..=last {
            let piece = self.piece(n).expect("covered");
            for (j, &v) in piece.iter().enumerate() {
                let t = self.grid.abscissa(n, j);
                if t >= c && t <= d {
                    out.push(v);
                }
            }
        }
        Ok(out)
    }

    /// Minimum over the grid points in `[c, d]` and the two endpoints. When
    /// `d` is the end of coverage it is treated as open.
    pub fn seg_min(&self, c: f64, d: f64) -> Result<f64, TrajectoryError> {
        Ok(self
            .segment_values(c, d)?
            .into_iter()
            .fold(f64::INFINITY, f64::min))
    }

    pub fn seg_max(&self, c: f64, d: f64) -> Result<f64, TrajectoryError> {
        Ok(self
            .segment_values(c, d)?
            .into_iter()
            .fold(f64::NEG_INFINITY, f64::max))
    }

    pub fn sign_events(&self, from: f64, to: f64) -> Vec<SignEvent> {
        let mut events = Vec::new();
        let mut prev: Option<(f64, f64)> = None;
        for (t, v, _) in self.samples() {
            if t < from || t > to {
                continue;
            }
            if let Some((pt, pv)) = prev {
                if (pv < 0.0) != (v < 0.0) {
                    events.push(SignEvent {
                        t_left: pt,
                        t_right: t,
                    });
                }
            }
            prev = Some((t, v));
        }
        events
    }

    /// CSV rows `t,value,piece_index,provenance` with a header line.
    pub fn write_csv<W: io::Write>(&self, w: W) -> csv::Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["t", "value", "piece_index", "provenance"])?;
        for (t, v, n) in self.samples() {
            let prov = self.provenance(n).expect("covered").as_str();
            out.write_record([
                t.to_string(),
                v.to_string(),
                n.to_string(),
                prov.to_string(),
            ])?;
        }
        out.flush()?;
        Ok(())
    }
}
