//! Nanobeam lattice, device-pattern sweeps and grating-coupler arcs.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::DesignError;

/// Quadratically chirped taper of `n_cav` holes followed by `n_mir` mirror
/// holes at constant spacing, on each side of the cavity center.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChirpSpec {
    /// Lattice constant at the cavity center (m).
    pub a_cav: f64,
    /// Lattice constant of the mirror sections (m).
    pub a_mir: f64,
    pub n_cav: usize,
    pub n_mir: usize,
}

impl ChirpSpec {
    /// The optimized device.
    pub fn optimized() -> Self {
        Self { a_cav: 132.5e-9, a_mir: 140.1e-9, n_cav: 12, n_mir: 25 }
    }

    pub fn validate(&self) -> Result<(), DesignError> {
        if self.n_cav < 2 {
            return Err(DesignError::InvalidInput("n_cav must be at least 2".into()));
        }
        if !(self.a_cav > 0.0 && self.a_mir > 0.0) {
            return Err(DesignError::InvalidInput("lattice constants must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChirpLattice {
    /// a_0 … a_{N_cav−1} followed by N_mir copies of a_mir.
    pub half: Vec<f64>,
    /// The full device, mirror image of `half` followed by `half`.
    pub full: Vec<f64>,
}

/// a_n = a_cav + (a_mir − a_cav)·n²/(N_cav − 1)², written as a convex
/// combination so both endpoints are reproduced exactly.
pub fn chirp_lattice(spec: &ChirpSpec) -> Result<ChirpLattice, DesignError> {
    spec.validate()?;
    let m = (spec.n_cav - 1) as f64;
    let mut half: Vec<f64> = (0..spec.n_cav)
        .map(|n| {
            let t = (n * n) as f64 / (m * m);
            spec.a_cav * (1.0 - t) + spec.a_mir * t
        })
        .collect();
    half.extend(std::iter::repeat_n(spec.a_mir, spec.n_mir));
    let full = half.iter().rev().chain(half.iter()).copied().collect();
    Ok(ChirpLattice { half, full })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CouplingKind {
    /// Side-coupled through an adjacent waveguide.
    Thru,
    /// Mirror-coupled through the nanobeam ends.
    Drop,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeviceRow {
    pub row: usize,
    pub kind: CouplingKind,
    /// Cavity-to-waveguide gap (m); thru devices only.
    pub d_c: Option<f64>,
    pub n_mir: usize,
}

/// Mirror holes used on side-coupled devices to suppress end coupling.
pub const THRU_N_MIR: usize = 25;
pub const PATTERN_ROWS: usize = 10;

/// The 10-row sweep of one device column: thru devices step d_c from
/// 50 nm to 140 nm in 10 nm steps, drop devices step N_mir from 4 to 13.
pub fn coupling_sweep(kind: CouplingKind) -> Vec<DeviceRow> {
    (0..PATTERN_ROWS)
        .map(|row| match kind {
            CouplingKind::Thru => DeviceRow {
                row,
                kind,
                d_c: Some((50 + 10 * row) as f64 / 1e9),
                n_mir: THRU_N_MIR,
            },
            CouplingKind::Drop => DeviceRow { row, kind, d_c: None, n_mir: 4 + row },
        })
        .collect()
}

/// Full 10×4 pattern: two identical thru columns then two identical drop
/// columns, as `(column, row)` in row-major order.
pub fn pattern_layout() -> Vec<(usize, DeviceRow)> {
    let thru = coupling_sweep(CouplingKind::Thru);
    let drop = coupling_sweep(CouplingKind::Drop);
    let mut out = Vec::with_capacity(4 * PATTERN_ROWS);
    for row in 0..PATTERN_ROWS {
        out.push((0, thru[row]));
        out.push((1, thru[row]));
        out.push((2, drop[row]));
        out.push((3, drop[row]));
    }
    out
}

/// Elliptical grating coupler parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GratingTable {
    pub periods: usize,
    /// Major-axis parameter of the first period (m).
    pub a0: f64,
    /// Period (m).
    pub period: f64,
    /// Slot starts at a_n + duty·period.
    pub duty: f64,
    pub eccentricity: f64,
    /// Ellipse axis angle φ (deg).
    pub axis_angle_deg: f64,
    /// Full angular opening of the arcs, centered on the waveguide axis (deg).
    pub opening_deg: f64,
    /// Samples per arc.
    pub samples: usize,
}

impl Default for GratingTable {
    fn default() -> Self {
        Self {
            periods: 4,
            a0: 3e-6,
            period: 0.5e-6,
            duty: 0.4,
            eccentricity: 0.20,
            axis_angle_deg: -30.0,
            opening_deg: 45.0,
            samples: 64,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ArcEdge {
    /// Slot start at a_n + d·A.
    Inner,
    /// Slot end at a_n + A.
    Outer,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Arc {
    pub period: usize,
    pub edge: ArcEdge,
    /// Major-axis parameter a (m).
    pub a: f64,
    /// (x, y) in m, focus at the origin, waveguide along +x.
    pub points: Vec<(f64, f64)>,
}

/// r(θ) = a(1 − e²)/(1 − e·cos(θ − φ)).
pub fn arc_radius(a: f64, e: f64, theta: f64, phi: f64) -> f64 {
    a * (1.0 - e * e) / (1.0 - e * (theta - phi).cos())
}

/// Slot-edge polylines for every grating period.
pub fn grating_arcs(table: &GratingTable) -> Result<Vec<Arc>, DesignError> {
    let e = table.eccentricity;
    if !(0.0..1.0).contains(&e) {
        return Err(DesignError::InvalidInput("eccentricity must lie in [0, 1)".into()));
    }
    if table.samples < 2 || !(table.a0 > 0.0 && table.period > 0.0) || !(0.0..=1.0).contains(&table.duty) {
        return Err(DesignError::InvalidInput("invalid grating table".into()));
    }
    let phi = table.axis_angle_deg.to_radians();
    let half = table.opening_deg.to_radians() / 2.0;
    let mut arcs = Vec::with_capacity(2 * table.periods);
    for n in 0..table.periods {
        let an = table.a0 + n as f64 * table.period;
        for (edge, a) in [(ArcEdge::Inner, an + table.duty * table.period), (ArcEdge::Outer, an + table.period)] {
            let points = (0..table.samples)
                .map(|i| {
                    let theta = -half + 2.0 * half * i as f64 / (table.samples - 1) as f64;
                    let r = arc_radius(a, e, theta, phi);
                    (r * theta.cos(), r * theta.sin())
                })
                .collect();
            arcs.push(Arc { period: n, edge, a, points });
        }
    }
    Ok(arcs)
}

/// Writes `arc_id,period,edge,a_m,x_m,y_m`, one row per vertex.
pub fn write_arcs_csv<W: Write>(arcs: &[Arc], w: W) -> Result<(), csv::Error> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["arc_id", "period", "edge", "a_m", "x_m", "y_m"])?;
    for (id, arc) in arcs.iter().enumerate() {
        let edge = match arc.edge {
            ArcEdge::Inner => "inner",
            ArcEdge::Outer => "outer",
        };
        for (x, y) in &arc.points {
            wtr.write_record([
                id.to_string(),
                arc.period.to_string(),
                edge.to_string(),
                arc.a.to_string(),
                x.to_string(),
                y.to_string(),
            ])?;
        }
    }
    wtr.flush()?;
    Ok(())
}
