//! Thresholded numerical supports and their set operations.
//!
//! A regularized front leaks exponentially small tails, so the support of
//! a discrete field is defined as the cells exceeding a threshold τ. All
//! distances use the cell-center Euclidean metric; containment verdicts
//! carry half-cell slack because set containment on a grid is ±h
//! ambiguous.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::solver::{Grid, Trajectory};

/// Sorted set of grid cell indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CellSet {
    cells: Vec<usize>,
}

impl CellSet {
    pub fn from_cells(mut cells: Vec<usize>) -> Self {
        cells.sort_unstable();
        cells.dedup();
        CellSet { cells }
    }

    pub fn empty() -> Self {
        CellSet { cells: Vec::new() }
    }

    pub fn cells(&self) -> &[usize] {
        &self.cells
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn contains(&self, idx: usize) -> bool {
        self.cells.binary_search(&idx).is_ok()
    }

    pub fn is_subset_of(&self, other: &CellSet) -> bool {
        self.cells.iter().all(|c| other.contains(*c))
    }

    pub fn intersects(&self, other: &CellSet) -> bool {
        let (small, large) = if self.len() <= other.len() {
            (self, other)
        } else {
            (other, self)
        };
        small.cells.iter().any(|c| large.contains(*c))
    }

    /// Run-length encoding `[start, len]` over consecutive indices.
    pub fn run_length_encode(&self) -> Vec<[usize; 2]> {
        let mut runs = Vec::new();
        let mut iter = self.cells.iter().copied();
        if let Some(first) = iter.next() {
            let mut start = first;
            let mut len = 1usize;
            for c in iter {
                if c == start + len {
                    len += 1;
                } else {
                    runs.push([start, len]);
                    start = c;
                    len = 1;
                }
            }
            runs.push([start, len]);
        }
        runs
    }

    /// Cells of the set adjacent to its complement (or the array edge).
    pub fn boundary_cells(&self, grid: &Grid) -> Vec<usize> {
        let n = grid.cells_per_axis();
        self.cells
            .iter()
            .copied()
            .filter(|&idx| {
                let ix = idx % n[0];
                let iy = idx / n[0];
                if ix == 0 || ix + 1 == n[0] {
                    return true;
                }
                if grid.dim() == 2 && (iy == 0 || iy + 1 == n[1]) {
                    return true;
                }
                let mut nbs = vec![idx - 1, idx + 1];
                if grid.dim() == 2 {
                    nbs.push(idx - n[0]);
                    nbs.push(idx + n[0]);
                }
                nbs.iter().any(|nb| !self.contains(*nb))
            })
            .collect()
    }
}

/// Cells with `|value| > τ`.
pub fn support_of(grid: &Grid, field: &[f64], tau: f64) -> Result<CellSet> {
    if tau < 0.0 {
        return Err(Error::invalid("support threshold must be >= 0"));
    }
    debug_assert_eq!(field.len(), grid.n_cells());
    Ok(CellSet {
        cells: field
            .iter()
            .enumerate()
            .filter(|(_, v)| v.abs() > tau)
            .map(|(i, _)| i)
            .collect(),
    })
}

/// All cells within Euclidean distance `radius` (cell-center metric) of
/// the input set.
pub fn dilate(grid: &Grid, set: &CellSet, radius: f64) -> Result<CellSet> {
    if radius < 0.0 {
        return Err(Error::invalid("dilation radius must be >= 0"));
    }
    if set.is_empty() {
        return Ok(CellSet::empty());
    }
    let h = grid.cell_size();
    let n = grid.cells_per_axis();
    let reach = (radius / h).floor() as i64;
    let mut mask = vec![false; grid.n_cells()];
    let r2 = radius * radius * (1.0 + 1e-12);
    for &idx in &set.cells {
        let ix = (idx % n[0]) as i64;
        let iy = (idx / n[0]) as i64;
        let (dy_lo, dy_hi) = if grid.dim() == 2 { (-reach, reach) } else { (0, 0) };
        for dy in dy_lo..=dy_hi {
            let jy = iy + dy;
            if jy < 0 || jy >= n[1] as i64 {
                continue;
            }
            for dx in -reach..=reach {
                let jx = ix + dx;
                if jx < 0 || jx >= n[0] as i64 {
                    continue;
                }
                let d2 = ((dx * dx + dy * dy) as f64) * h * h;
                if d2 <= r2 {
                    mask[(jy as usize) * n[0] + jx as usize] = true;
                }
            }
        }
    }
    Ok(CellSet {
        cells: mask
            .iter()
            .enumerate()
            .filter(|(_, m)| **m)
            .map(|(i, _)| i)
            .collect(),
    })
}

/// Distance from a point to the nearest cell of a set (cell-center
/// metric); `None` for the empty set.
pub fn distance_to_set(grid: &Grid, p: [f64; 2], set: &CellSet) -> Option<f64> {
    set.cells
        .iter()
        .map(|&c| {
            let q = grid.center(c);
            let mut sq = (p[0] - q[0]).powi(2);
            if grid.dim() == 2 {
                sq += (p[1] - q[1]).powi(2);
            }
            sq.sqrt()
        })
        .fold(None, |acc: Option<f64>, d| Some(acc.map_or(d, |a| a.min(d))))
}

/// Largest radius `r` such that every cell of `B_r(ξ0)` carries
/// `|value| <= τ` at time `t`; for a fully quiet ball this is the distance
/// from `ξ0` to the domain boundary.
pub fn vanish_radius(traj: &Trajectory, xi0: [f64; 2], t: f64, tau: f64) -> Result<f64> {
    let idx = traj.index_at(t)?;
    vanish_radius_snapshot(&traj.grid, traj.field(idx), xi0, tau)
}

pub fn vanish_radius_snapshot(
    grid: &Grid,
    field: &[f64],
    xi0: [f64; 2],
    tau: f64,
) -> Result<f64> {
    let supp = support_of(grid, field, tau)?;
    if supp.contains(grid.cell_of(xi0)) {
        return Ok(0.0);
    }
    match distance_to_set(grid, xi0, &supp) {
        Some(d) => Ok(d),
        None => Ok(grid.distance_to_boundary(xi0)),
    }
}

/// `h` minus the largest distance from a cell of `supp(X_{s+t})` to
/// `supp(X_s)`; nonnegative means `supp(X_{s+t}) ⊆ B_h(supp(X_s))` holds
/// (up to half-cell slack). Returns `-inf` when the earlier support is
/// empty but the later one is not.
pub fn containment_margin(traj: &Trajectory, s: f64, t: f64, h: f64, tau: f64) -> Result<f64> {
    let i0 = traj.index_at(s)?;
    let i1 = traj.index_at(s + t)?;
    let supp0 = support_of(&traj.grid, traj.field(i0), tau)?;
    let supp1 = support_of(&traj.grid, traj.field(i1), tau)?;
    if supp1.is_empty() {
        return Ok(h);
    }
    if supp0.is_empty() {
        return Ok(f64::NEG_INFINITY);
    }
    // distances to the earlier support only need its boundary layer
    let base = CellSet::from_cells(supp0.boundary_cells(&traj.grid));
    let mut worst = 0.0_f64;
    for &c in supp1.cells() {
        if supp0.contains(c) {
            continue;
        }
        let d = distance_to_set(&traj.grid, traj.grid.center(c), &base).expect("nonempty");
        worst = worst.max(d);
    }
    Ok(h - worst)
}

/// Per-snapshot support data for a trajectory.
#[derive(Debug, Clone)]
pub struct SupportRecord {
    pub tau: f64,
    pub times: Vec<f64>,
    pub supports: Vec<CellSet>,
}

/// Front positions per axis: smallest and largest support coordinate.
#[derive(Debug, Clone, Serialize)]
pub struct FrontRow {
    pub t: f64,
    pub left: Vec<f64>,
    pub right: Vec<f64>,
    pub empty: bool,
}

impl SupportRecord {
    pub fn new(traj: &Trajectory, tau: f64) -> Result<Self> {
        let supports = (0..traj.n_snapshots())
            .map(|i| support_of(&traj.grid, traj.field(i), tau))
            .collect::<Result<Vec<_>>>()?;
        Ok(SupportRecord {
            tau,
            times: traj.times().to_vec(),
            supports,
        })
    }

    pub fn front_rows(&self, grid: &Grid) -> Vec<FrontRow> {
        self.times
            .iter()
            .zip(&self.supports)
            .map(|(&t, s)| {
                if s.is_empty() {
                    FrontRow {
                        t,
                        left: vec![f64::NAN; grid.dim()],
                        right: vec![f64::NAN; grid.dim()],
                        empty: true,
                    }
                } else {
                    let mut left = vec![f64::INFINITY; grid.dim()];
                    let mut right = vec![f64::NEG_INFINITY; grid.dim()];
                    for &c in s.cells() {
                        let p = grid.center(c);
                        for a in 0..grid.dim() {
                            left[a] = left[a].min(p[a]);
                            right[a] = right[a].max(p[a]);
                        }
                    }
                    FrontRow {
                        t,
                        left,
                        right,
                        empty: false,
                    }
                }
            })
            .collect()
    }

    /// CSV `t,left_x,right_x[,left_y,right_y]`.
    pub fn write_front_csv<W: std::io::Write>(&self, grid: &Grid, mut w: W) -> Result<()> {
        write!(w, "t")?;
        for a in 0..grid.dim() {
            let axis = ["x", "y"][a];
            write!(w, ",left_{axis},right_{axis}")?;
        }
        writeln!(w)?;
        for row in self.front_rows(grid) {
            write!(w, "{}", row.t)?;
            for a in 0..grid.dim() {
                write!(w, ",{},{}", row.left[a], row.right[a])?;
            }
            writeln!(w)?;
        }
        Ok(())
    }
}
