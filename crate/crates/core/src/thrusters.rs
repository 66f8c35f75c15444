//! RexROV thruster geometry, thrust resolution, command lookup and
//! least-squares allocation over the surge/sway/heave/yaw axes.

use nalgebra::{SMatrix, SVector, Vector4};
use serde::{Deserialize, Serialize};

use crate::dynamics::Wrench6;
use crate::error::{Error, Result};

pub const THRUSTER_COUNT: usize = 8;

pub type Thrusts = [f64; THRUSTER_COUNT];

/// Rows `(x, y, z, ψ)` of the thrust-to-wrench map.
pub type AllocationMatrix = SMatrix<f64, 4, THRUSTER_COUNT>;

const DEFAULT_POSITIONS: [[f64; 3]; THRUSTER_COUNT] = [
    [-0.890895, 0.334385, -0.528822],
    [-0.890895, -0.334385, -0.528822],
    [0.890895, 0.334385, -0.528822],
    [0.890895, -0.334385, -0.528822],
    [-0.412125, 0.505415, -0.129],
    [-0.412125, -0.505415, -0.129],
    [0.412125, 0.505415, -0.129],
    [0.412125, -0.505415, -0.129],
];

/// (phi, theta, psi) in degrees.
const DEFAULT_ORIENTATIONS_DEG: [[f64; 3]; THRUSTER_COUNT] = [
    [0.0, 74.53, -53.21],
    [0.0, 74.53, 53.21],
    [0.0, 105.47, 53.21],
    [0.0, 105.47, -53.21],
    [0.0, 0.0, 45.0],
    [0.0, 0.0, 45.0],
    [0.0, 0.0, 135.0],
    [0.0, 0.0, -135.0],
];

/// Which heave resolution to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HeaveFormula {
    /// `Σ_{i=0..3} T_i sin θ_i`, the vertical component of the pitched thrusters.
    #[default]
    Corrected,
    /// `Σ_{i=1..3} T_i sin ψ_i`, kept for comparison runs.
    Printed,
}

/// Mounting of the eight thrusters relative to the CG.
#[derive(Debug, Clone, PartialEq)]
pub struct ThrusterLayout {
    /// (lx, ly, lz) in metres
    pub positions: [[f64; 3]; THRUSTER_COUNT],
    /// (phi, theta, psi) in radians
    pub orientations: [[f64; 3]; THRUSTER_COUNT],
    pub heave_formula: HeaveFormula,
}

impl Default for ThrusterLayout {
    fn default() -> Self {
        Self::from_degrees(DEFAULT_POSITIONS, DEFAULT_ORIENTATIONS_DEG, HeaveFormula::Corrected)
    }
}

impl ThrusterLayout {
    pub fn from_degrees(
        positions: [[f64; 3]; THRUSTER_COUNT],
        orientations_deg: [[f64; 3]; THRUSTER_COUNT],
        heave_formula: HeaveFormula,
    ) -> Self {
        let orientations = orientations_deg.map(|o| o.map(f64::to_radians));
        Self {
            positions,
            orientations,
            heave_formula,
        }
    }

    pub fn with_heave_formula(mut self, f: HeaveFormula) -> Self {
        self.heave_formula = f;
        self
    }

    /// Per-thruster contribution to `(Tx, Ty, Tz, Tψ)` for unit thrust.
    pub fn allocation_matrix(&self) -> AllocationMatrix {
        let mut a = AllocationMatrix::zeros();
        for i in 0..THRUSTER_COUNT {
            let [lx, ly, _] = self.positions[i];
            let [_, theta, psi] = self.orientations[i];
            let (spsi, cpsi) = psi.sin_cos();
            let (sth, cth) = theta.sin_cos();
            let pitched = i < 4;
            a[(0, i)] = if pitched { cth * cpsi } else { cpsi };
            a[(1, i)] = if pitched { cth * spsi } else { spsi };
            a[(2, i)] = match self.heave_formula {
                HeaveFormula::Corrected if pitched => sth,
                HeaveFormula::Printed if (1..=3).contains(&i) => spsi,
                _ => 0.0,
            };
            a[(3, i)] = lx * spsi - ly * cpsi;
        }
        a
    }

    /// Resolves individual thrusts (N) into a body wrench. Roll and pitch
    /// moments are zero in the reduced model.
    pub fn wrench_from_thrusts(&self, thrusts: &Thrusts) -> Wrench6 {
        let t = self.allocation_matrix() * SVector::<f64, THRUSTER_COUNT>::from_column_slice(thrusts);
        Wrench6::planar(t[0], t[1], t[2], t[3])
    }
}

/// Minimum-norm thrust allocation via the right pseudo-inverse.
#[derive(Debug, Clone)]
pub struct Allocator {
    layout: ThrusterLayout,
    pinv: SMatrix<f64, THRUSTER_COUNT, 4>,
    clamp: Option<f64>,
}

impl Allocator {
    pub fn new(layout: &ThrusterLayout) -> Result<Self> {
        let a = layout.allocation_matrix();
        let sv = a.singular_values();
        let max = sv.max();
        let rank = sv.iter().filter(|&&s| s > max * 1e-9 && s > 0.0).count();
        if rank < 4 {
            return Err(Error::RankDeficient { rank });
        }
        let gram = a * a.transpose();
        let gram_inv = gram
            .try_inverse()
            .ok_or(Error::RankDeficient { rank: 3 })?;
        Ok(Self {
            layout: layout.clone(),
            pinv: a.transpose() * gram_inv,
            clamp: None,
        })
    }

    /// Per-thruster saturation in newtons; `None` disables clamping.
    pub fn with_clamp(mut self, limit: Option<f64>) -> Self {
        self.clamp = limit;
        self
    }

    pub fn layout(&self) -> &ThrusterLayout {
        &self.layout
    }

    /// Thrusts realising `desired` on (x, y, z, ψ); other components ignored.
    pub fn allocate(&self, desired: &Wrench6) -> Thrusts {
        let tau = Vector4::new(desired.tx, desired.ty, desired.tz, desired.tpsi);
        let t = self.pinv * tau;
        let mut out = [0.0; THRUSTER_COUNT];
        for (o, v) in out.iter_mut().zip(t.iter()) {
            *o = match self.clamp {
                Some(lim) => v.clamp(-lim, lim),
                None => *v,
            };
        }
        out
    }
}

/// One-shot allocation against a layout.
pub fn allocate(desired: &Wrench6, layout: &ThrusterLayout) -> Result<Thrusts> {
    Ok(Allocator::new(layout)?.allocate(desired))
}

const IDENTITY_TABLE_CSV: &str = include_str!("../data/thrust_identity.csv");

/// Piecewise-linear map from thruster command to thrust in newtons.
#[derive(Debug, Clone, PartialEq)]
pub struct ThrustLookup {
    points: Vec<(f64, f64)>,
}

impl ThrustLookup {
    pub fn new(points: Vec<(f64, f64)>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::EmptyTable);
        }
        if points.iter().any(|(c, t)| !c.is_finite() || !t.is_finite()) {
            return Err(Error::InvalidTable("non-finite entry".into()));
        }
        if points.windows(2).any(|w| w[1].0 <= w[0].0) {
            return Err(Error::InvalidTable("commands must be strictly increasing".into()));
        }
        if points.windows(2).any(|w| w[1].1 < w[0].1) {
            return Err(Error::InvalidTable("thrust must be non-decreasing".into()));
        }
        let table = Self { points };
        if table.lookup(0.0) != 0.0 {
            return Err(Error::InvalidTable("zero command must give zero thrust".into()));
        }
        Ok(table)
    }

    /// The shipped passthrough table (command is newtons).
    pub fn identity() -> Self {
        Self::from_csv_str(IDENTITY_TABLE_CSV).expect("bundled table is valid")
    }

    /// Parses `command,thrust_newtons` rows; the header row is mandatory.
    pub fn from_csv_str(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .map(str::trim)
            .enumerate()
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
        match lines.next() {
            Some((_, header)) if header.replace(' ', "") == "command,thrust_newtons" => {}
            Some((n, h)) => {
                return Err(Error::InvalidTable(format!(
                    "line {}: expected header `command,thrust_newtons`, got `{h}`",
                    n + 1
                )))
            }
            None => return Err(Error::EmptyTable),
        }
        let mut points = Vec::new();
        for (n, line) in lines {
            let mut cols = line.split(',').map(str::trim);
            let parse = |s: Option<&str>| -> Result<f64> {
                s.and_then(|v| v.parse::<f64>().ok()).ok_or_else(|| {
                    Error::InvalidTable(format!("line {}: malformed row `{line}`", n + 1))
                })
            };
            let c = parse(cols.next())?;
            let t = parse(cols.next())?;
            if cols.next().is_some() {
                return Err(Error::InvalidTable(format!("line {}: too many columns", n + 1)));
            }
            points.push((c, t));
        }
        Self::new(points)
    }

    pub fn points(&self) -> &[(f64, f64)] {
        &self.points
    }

    /// Thrust for `cmd`, clamped to the table ends.
    pub fn lookup(&self, cmd: f64) -> f64 {
        interpolate(&self.points, cmd, |p| p.0, |p| p.1)
    }

    /// Command producing `thrust`; the inverse of [`ThrustLookup::lookup`]
    /// on strictly increasing stretches of the table.
    pub fn command_for(&self, thrust: f64) -> f64 {
        interpolate(&self.points, thrust, |p| p.1, |p| p.0)
    }

    pub fn thrusts(&self, commands: &Thrusts) -> Thrusts {
        commands.map(|c| self.lookup(c))
    }

    pub fn commands(&self, thrusts: &Thrusts) -> Thrusts {
        thrusts.map(|t| self.command_for(t))
    }
}

fn interpolate(
    pts: &[(f64, f64)],
    at: f64,
    key: impl Fn(&(f64, f64)) -> f64,
    val: impl Fn(&(f64, f64)) -> f64,
) -> f64 {
    let first = &pts[0];
    let last = &pts[pts.len() - 1];
    if at <= key(first) {
        return val(first);
    }
    if at >= key(last) {
        return val(last);
    }
    for w in pts.windows(2) {
        let (k0, k1) = (key(&w[0]), key(&w[1]));
        if at <= k1 && k1 > k0 {
            let s = (at - k0) / (k1 - k0);
            return val(&w[0]) + s * (val(&w[1]) - val(&w[0]));
        }
    }
    val(last)
}
