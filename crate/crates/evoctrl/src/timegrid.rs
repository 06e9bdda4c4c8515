//! Uniform time grids, trajectory containers, time reflection and the
//! discrete weighted L² geometry.
//!
//! States live at grid nodes (N+1 rows); controls and outputs live per
//! interval (N rows, piecewise constant). The per-interval convention is
//! what makes the fully discrete adjoint an exact transpose.

use crate::linops::{DenseMatrix, Vector};
use std::fmt::Write as _;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    pub horizon: f64,
    pub steps: usize,
}

impl TimeGrid {
    pub fn new(horizon: f64, steps: usize) -> Self {
        assert!(horizon > 0.0, "horizon must be positive");
        assert!(steps > 0, "need at least one step");
        Self { horizon, steps }
    }

    pub fn dt(&self) -> f64 {
        self.horizon / self.steps as f64
    }

    /// Node time t_i = i·dt, i = 0..=N.
    pub fn node_time(&self, i: usize) -> f64 {
        i as f64 * self.dt()
    }

    /// Interval midpoint (i+½)·dt, i = 0..N. Used for CSV output and
    /// for sampling reference signals.
    pub fn midpoint_time(&self, i: usize) -> f64 {
        (i as f64 + 0.5) * self.dt()
    }
}

/// States sampled at grid nodes: (N+1) rows of width n.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeTrajectory {
    pub grid: TimeGrid,
    values: Vec<Vector>,
}

impl NodeTrajectory {
    pub fn new(grid: TimeGrid, values: Vec<Vector>) -> Self {
        assert_eq!(values.len(), grid.steps + 1, "node trajectory row count");
        Self { grid, values }
    }

    pub fn zeros(grid: TimeGrid, width: usize) -> Self {
        Self::new(grid, vec![Vector::zeros(width); grid.steps + 1])
    }

    pub fn width(&self) -> usize {
        self.values[0].len()
    }

    pub fn row(&self, i: usize) -> &Vector {
        &self.values[i]
    }

    pub fn rows(&self) -> &[Vector] {
        &self.values
    }

    pub fn last(&self) -> &Vector {
        self.values.last().unwrap()
    }

    /// Reverse node order (t_i ↦ t_{N−i}).
    pub fn reversed(&self) -> Self {
        let mut values = self.values.clone();
        values.reverse();
        Self { grid: self.grid, values }
    }
}

/// Controls/outputs per interval: N rows of width k, piecewise constant.
#[derive(Debug, Clone, PartialEq)]
pub struct IntervalTrajectory {
    pub grid: TimeGrid,
    values: Vec<Vector>,
}

impl IntervalTrajectory {
    pub fn new(grid: TimeGrid, values: Vec<Vector>) -> Self {
        assert_eq!(values.len(), grid.steps, "interval trajectory row count");
        Self { grid, values }
    }

    pub fn zeros(grid: TimeGrid, width: usize) -> Self {
        Self::new(grid, vec![Vector::zeros(width); grid.steps])
    }

    /// Sample a function of the interval midpoint time.
    pub fn from_fn(grid: TimeGrid, width: usize, f: impl Fn(f64) -> Vector) -> Self {
        let values: Vec<Vector> = (0..grid.steps)
            .map(|i| {
                let v = f(grid.midpoint_time(i));
                assert_eq!(v.len(), width, "sampled width");
                v
            })
            .collect();
        Self::new(grid, values)
    }

    pub fn constant(grid: TimeGrid, v: Vector) -> Self {
        Self::new(grid, vec![v; grid.steps])
    }

    pub fn width(&self) -> usize {
        self.values[0].len()
    }

    pub fn row(&self, i: usize) -> &Vector {
        &self.values[i]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut Vector {
        &mut self.values[i]
    }

    pub fn rows(&self) -> &[Vector] {
        &self.values
    }

    pub fn map(&self, mut f: impl FnMut(&Vector) -> Vector) -> Self {
        Self { grid: self.grid, values: self.values.iter().map(|v| f(v)).collect() }
    }

    pub fn axpy(&self, alpha: f64, other: &Self) -> Self {
        assert_eq!(self.grid, other.grid, "grid mismatch");
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a + b * alpha)
            .collect();
        Self { grid: self.grid, values }
    }

    pub fn scale(&self, alpha: f64) -> Self {
        self.map(|v| v * alpha)
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.axpy(-1.0, other)
    }
}

/// Time reflection Refl_T: interval i ↦ interval N−1−i. A unitary
/// involution on the discrete L² space.
pub fn reflect(traj: &IntervalTrajectory) -> IntervalTrajectory {
    let mut values = traj.rows().to_vec();
    values.reverse();
    IntervalTrajectory::new(traj.grid, values)
}

/// Discrete L² inner product `dt · Σ_i aᵢᵀ W bᵢ`.
pub fn l2_inner(a: &IntervalTrajectory, b: &IntervalTrajectory, w: &DenseMatrix) -> f64 {
    assert_eq!(a.grid, b.grid, "grid mismatch");
    assert_eq!(a.width(), b.width(), "width mismatch");
    assert_eq!(w.nrows(), a.width(), "weight size");
    let dt = a.grid.dt();
    a.rows()
        .iter()
        .zip(b.rows())
        .map(|(ai, bi)| ai.dot(&(w * bi)))
        .sum::<f64>()
        * dt
}

pub fn l2_norm(a: &IntervalTrajectory, w: &DenseMatrix) -> f64 {
    l2_inner(a, a, w).max(0.0).sqrt()
}

/// Reflection preserves the weighted L² norm (it permutes summands).
pub fn reflection_is_isometry_check(u: &IntervalTrajectory, w: &DenseMatrix) -> bool {
    let n = l2_inner(u, u, w);
    let nr = {
        let r = reflect(u);
        l2_inner(&r, &r, w)
    };
    (n - nr).abs() <= 1e-13 * n.abs().max(1.0)
}

// --- CSV serialization -------------------------------------------------

fn write_csv_rows(header: &str, rows: impl Iterator<Item = (f64, Vec<f64>)>) -> String {
    let mut out = String::new();
    out.push_str(header);
    out.push('\n');
    for (t, vals) in rows {
        let _ = write!(out, "{t:.16e}");
        for v in vals {
            let _ = write!(out, ",{v:.16e}");
        }
        out.push('\n');
    }
    out
}

fn csv_header(name: &str, width: usize) -> String {
    let mut h = String::from("t");
    for k in 0..width {
        let _ = write!(h, ",{name}{k}");
    }
    h
}

/// Node trajectories emit N+1 rows at t_i = i·dt.
pub fn node_to_csv(traj: &NodeTrajectory, name: &str) -> String {
    write_csv_rows(
        &csv_header(name, traj.width()),
        (0..=traj.grid.steps).map(|i| (traj.grid.node_time(i), traj.row(i).iter().copied().collect())),
    )
}

/// Interval trajectories emit N rows at midpoints (i+½)·dt.
pub fn interval_to_csv(traj: &IntervalTrajectory, name: &str) -> String {
    write_csv_rows(
        &csv_header(name, traj.width()),
        (0..traj.grid.steps)
            .map(|i| (traj.grid.midpoint_time(i), traj.row(i).iter().copied().collect())),
    )
}

/// Parse a CSV produced by `interval_to_csv` back into a trajectory.
/// The grid is reconstructed from the midpoint times.
pub fn interval_from_csv(text: &str) -> Result<IntervalTrajectory, String> {
    let mut lines = text.lines();
    let header = lines.next().ok_or("empty csv")?;
    let width = header.split(',').count() - 1;
    let mut times = Vec::new();
    let mut values = Vec::new();
    for line in lines {
        if line.trim().is_empty() {
            continue;
        }
        let toks: Vec<&str> = line.split(',').collect();
        if toks.len() != width + 1 {
            return Err(format!("row width mismatch: {line:?}"));
        }
        let t: f64 = toks[0].parse().map_err(|e| format!("{e}: {line:?}"))?;
        times.push(t);
        let vals: Result<Vec<f64>, _> = toks[1..].iter().map(|s| s.parse::<f64>()).collect();
        values.push(Vector::from_vec(vals.map_err(|e| format!("{e}: {line:?}"))?));
    }
    let n = values.len();
    if n == 0 {
        return Err("no data rows".into());
    }
    // midpoints are (i+½)dt, so dt = 2·t₀ and T = N·dt
    let dt = 2.0 * times[0];
    let grid = TimeGrid::new(dt * n as f64, n);
    Ok(IntervalTrajectory::new(grid, values))
}
