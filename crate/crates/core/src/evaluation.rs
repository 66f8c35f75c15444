//! Built-in courses, reference paths and trajectory error metrics.

use std::fmt;
use std::path::Path;

use crate::control::Waypoint;
use crate::error::{Error, Result};

/// Reference polylines are densified to at most this spacing.
pub const REFERENCE_SPACING: f64 = 0.1;
/// Depth of every built-in course, m.
pub const COURSE_DEPTH: f64 = 20.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum CourseId {
    Be1,
    Be2,
    Be3,
}

impl CourseId {
    pub const ALL: [CourseId; 3] = [CourseId::Be1, CourseId::Be2, CourseId::Be3];

    pub fn name(self) -> &'static str {
        match self {
            CourseId::Be1 => "BE1",
            CourseId::Be2 => "BE2",
            CourseId::Be3 => "BE3",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "BE1" => Ok(CourseId::Be1),
            "BE2" => Ok(CourseId::Be2),
            "BE3" => Ok(CourseId::Be3),
            _ => Err(Error::UnknownCourse(s.to_string())),
        }
    }

    pub fn description(self) -> &'static str {
        match self {
            CourseId::Be1 => "30 m straight, 10 m-radius 90° turn, 120° sharp corner",
            CourseId::Be2 => "three alternating 10 m-radius half circles",
            CourseId::Be3 => "U-turn: reversed-curvature lead-in, 15 m legs around a 10 m-radius 180° arc",
        }
    }

    fn csv(self) -> &'static str {
        match self {
            CourseId::Be1 => include_str!("../data/courses/be1.csv"),
            CourseId::Be2 => include_str!("../data/courses/be2.csv"),
            CourseId::Be3 => include_str!("../data/courses/be3.csv"),
        }
    }
}

impl fmt::Display for CourseId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Course {
    pub name: String,
    pub waypoints: Vec<Waypoint>,
    /// densified xy polyline through every waypoint
    pub reference: Vec<(f64, f64)>,
}

impl Course {
    pub fn from_waypoints(name: impl Into<String>, waypoints: Vec<Waypoint>) -> Result<Self> {
        if waypoints.len() < 2 {
            return Err(Error::InvalidCourse("need at least two waypoints".into()));
        }
        if let Some(i) = waypoints.iter().position(|w| !w.is_finite()) {
            return Err(Error::InvalidCourse(format!("waypoint {i} is not finite")));
        }
        let reference = densify(&waypoints, REFERENCE_SPACING);
        Ok(Self {
            name: name.into(),
            waypoints,
            reference,
        })
    }

    /// Parses the course file format: a `# name:` line, an `x,y,z` header,
    /// then one waypoint per row.
    pub fn from_csv_str(text: &str) -> Result<Self> {
        let mut name = None;
        let mut header = false;
        let mut wps = Vec::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(c) = line.strip_prefix('#') {
                if let Some(v) = c.trim().strip_prefix("name:") {
                    name = Some(v.trim().to_string());
                }
                continue;
            }
            if !header {
                let cols: Vec<_> = line.split(',').map(str::trim).collect();
                if cols != ["x", "y", "z"] {
                    return Err(Error::InvalidCourse(format!("line {}: expected header `x,y,z`", n + 1)));
                }
                header = true;
                continue;
            }
            let vals: Vec<f64> = line
                .split(',')
                .map(|c| c.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::InvalidCourse(format!("line {}: {e}", n + 1)))?;
            if vals.len() != 3 {
                return Err(Error::InvalidCourse(format!("line {}: expected 3 columns", n + 1)));
            }
            wps.push(Waypoint::new(vals[0], vals[1], vals[2]));
        }
        let name = name.ok_or_else(|| Error::InvalidCourse("missing `# name:` line".into()))?;
        Self::from_waypoints(name, wps)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::InvalidCourse(format!("{}: {e}", path.display())))?;
        Self::from_csv_str(&text)
    }

    pub fn to_csv_string(&self) -> String {
        let mut s = format!("# name: {}\nx,y,z\n", self.name);
        for w in &self.waypoints {
            s.push_str(&format!("{},{},{}\n", w.x, w.y, w.z));
        }
        s
    }

    /// Heading of the first segment, rad.
    pub fn initial_heading(&self) -> f64 {
        let (a, b) = (self.waypoints[0], self.waypoints[1]);
        (b.y - a.y).atan2(b.x - a.x)
    }
}

pub fn builtin_course(id: CourseId) -> Course {
    Course::from_csv_str(id.csv()).expect("built-in course files are valid")
}

/// Resolves a built-in id or, failing that, a course file path.
pub fn resolve_course(spec: &str) -> Result<Course> {
    match CourseId::parse(spec) {
        Ok(id) => Ok(builtin_course(id)),
        Err(e) => {
            let p = Path::new(spec);
            if p.exists() {
                Course::load(p)
            } else {
                Err(e)
            }
        }
    }
}

/// Incremental straight/arc waypoint generator. Headings follow NED:
/// positive turns are clockwise seen from above (towards +y from +x).
#[derive(Debug, Clone)]
pub struct PathBuilder {
    x: f64,
    y: f64,
    heading: f64,
    z: f64,
    points: Vec<Waypoint>,
}

impl PathBuilder {
    pub fn new(x: f64, y: f64, heading: f64, z: f64) -> Self {
        Self {
            x,
            y,
            heading,
            z,
            points: vec![Waypoint::new(x, y, z)],
        }
    }

    /// Straight leg with waypoints at most `spacing` apart.
    pub fn straight(mut self, length: f64, spacing: f64) -> Self {
        let n = (length / spacing).ceil().max(1.0) as usize;
        let (x0, y0) = (self.x, self.y);
        let (s, c) = self.heading.sin_cos();
        for i in 1..=n {
            let d = length * i as f64 / n as f64;
            self.points.push(Waypoint::new(x0 + d * c, y0 + d * s, self.z));
        }
        self.x = x0 + length * c;
        self.y = y0 + length * s;
        self
    }

    /// Constant-radius arc through `angle` rad (signed), waypoints every
    /// `step` rad.
    pub fn arc(mut self, radius: f64, angle: f64, step: f64) -> Self {
        let side = angle.signum();
        let (s, c) = self.heading.sin_cos();
        let (cx, cy) = (self.x - side * radius * s, self.y + side * radius * c);
        let n = (angle.abs() / step).round().max(1.0) as usize;
        let h0 = self.heading;
        for i in 1..=n {
            let h = h0 + angle * i as f64 / n as f64;
            let (sh, ch) = h.sin_cos();
            self.x = cx + side * radius * sh;
            self.y = cy - side * radius * ch;
            self.points.push(Waypoint::new(self.x, self.y, self.z));
        }
        self.heading = h0 + angle;
        self
    }

    /// Instantaneous heading change at the current point.
    pub fn corner(mut self, angle: f64) -> Self {
        self.heading += angle;
        self
    }

    pub fn finish(self) -> Vec<Waypoint> {
        self.points
    }
}

/// Waypoints of the built-in course realizations.
pub fn generate_waypoints(id: CourseId) -> Vec<Waypoint> {
    let step = 10f64.to_radians();
    let b = PathBuilder::new(0.0, 0.0, 0.0, COURSE_DEPTH);
    match id {
        CourseId::Be1 => b
            .straight(30.0, 5.0)
            .arc(10.0, 90f64.to_radians(), step)
            .straight(10.0, 5.0)
            .corner(120f64.to_radians())
            .straight(15.0, 5.0)
            .finish(),
        CourseId::Be2 => b
            .straight(5.0, 5.0)
            .arc(10.0, 180f64.to_radians(), step)
            .arc(10.0, -180f64.to_radians(), step)
            .arc(10.0, 180f64.to_radians(), step)
            .finish(),
        CourseId::Be3 => b
            .arc(10.0, -30f64.to_radians(), step)
            .arc(10.0, 30f64.to_radians(), step)
            .straight(15.0, 5.0)
            .arc(10.0, 180f64.to_radians(), step)
            .straight(15.0, 5.0)
            .finish(),
    }
}

/// Linear densification of the waypoint polyline in xy.
pub fn densify(waypoints: &[Waypoint], spacing: f64) -> Vec<(f64, f64)> {
    let mut out = Vec::new();
    let Some(first) = waypoints.first() else {
        return out;
    };
    out.push((first.x, first.y));
    for pair in waypoints.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        let len = (b.x - a.x).hypot(b.y - a.y);
        let n = (len / spacing).ceil().max(1.0) as usize;
        for i in 1..=n {
            let t = i as f64 / n as f64;
            out.push((a.x + t * (b.x - a.x), a.y + t * (b.y - a.y)));
        }
    }
    out
}

/// Distance from `p` to the segment `a`–`b`.
pub fn point_segment_distance(p: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
    let (dx, dy) = (b.0 - a.0, b.1 - a.1);
    let len2 = dx * dx + dy * dy;
    let t = if len2 > 0.0 {
        (((p.0 - a.0) * dx + (p.1 - a.1) * dy) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    (p.0 - (a.0 + t * dx)).hypot(p.1 - (a.1 + t * dy))
}

/// Uniform grid over polyline segments for nearest-segment queries.
#[derive(Debug, Clone)]
pub struct SegmentIndex<'a> {
    path: &'a [(f64, f64)],
    origin: (f64, f64),
    cell: f64,
    nx: usize,
    ny: usize,
    cells: Vec<Vec<u32>>,
}

impl<'a> SegmentIndex<'a> {
    pub fn new(path: &'a [(f64, f64)]) -> Result<Self> {
        if path.is_empty() {
            return Err(Error::EmptyPath);
        }
        let (mut x0, mut y0, mut x1, mut y1) = (f64::MAX, f64::MAX, f64::MIN, f64::MIN);
        for &(x, y) in path {
            x0 = x0.min(x);
            y0 = y0.min(y);
            x1 = x1.max(x);
            y1 = y1.max(y);
        }
        let nseg = path.len().saturating_sub(1).max(1);
        let extent = (x1 - x0).max(y1 - y0).max(1e-9);
        let per_side = ((nseg as f64).sqrt().ceil() as usize).clamp(1, 1024);
        let cell = extent / per_side as f64;
        let nx = (((x1 - x0) / cell).floor() as usize + 1).min(per_side + 1);
        let ny = (((y1 - y0) / cell).floor() as usize + 1).min(per_side + 1);
        let mut idx = Self {
            path,
            origin: (x0, y0),
            cell,
            nx,
            ny,
            cells: vec![Vec::new(); nx * ny],
        };
        for s in 0..nseg {
            let a = path[s];
            let b = path[(s + 1).min(path.len() - 1)];
            let (i0, j0) = idx.cell_of(a.0.min(b.0), a.1.min(b.1));
            let (i1, j1) = idx.cell_of(a.0.max(b.0), a.1.max(b.1));
            for i in i0..=i1 {
                for j in j0..=j1 {
                    idx.cells[i * ny + j].push(s as u32);
                }
            }
        }
        Ok(idx)
    }

    fn cell_of(&self, x: f64, y: f64) -> (usize, usize) {
        let clamp = |v: f64, o: f64, n: usize| (((v - o) / self.cell).floor().max(0.0) as usize).min(n - 1);
        (clamp(x, self.origin.0, self.nx), clamp(y, self.origin.1, self.ny))
    }

    fn segment_distance(&self, p: (f64, f64), s: usize) -> f64 {
        let a = self.path[s];
        let b = self.path[(s + 1).min(self.path.len() - 1)];
        point_segment_distance(p, a, b)
    }

    /// Distance from `p` to the nearest point of the polyline.
    pub fn nearest(&self, p: (f64, f64)) -> f64 {
        let ci = ((p.0 - self.origin.0) / self.cell).floor();
        let cj = ((p.1 - self.origin.1) / self.cell).floor();
        // Chebyshev distance (in cells) from the query cell to the grid
        let gap = |c: f64, n: usize| {
            if c < 0.0 {
                -c
            } else if c > (n - 1) as f64 {
                c - (n - 1) as f64
            } else {
                0.0
            }
        };
        let k0 = gap(ci, self.nx).max(gap(cj, self.ny)) as i64;
        let span_i = ci.abs().max((ci - (self.nx - 1) as f64).abs()) as i64;
        let span_j = cj.abs().max((cj - (self.ny - 1) as f64).abs()) as i64;
        let kmax = span_i.max(span_j);
        let (ci, cj) = (ci as i64, cj as i64);
        let mut best = f64::INFINITY;
        let visit = |i: i64, j: i64, best: &mut f64| {
            if i < 0 || j < 0 || i >= self.nx as i64 || j >= self.ny as i64 {
                return;
            }
            for &s in &self.cells[i as usize * self.ny + j as usize] {
                let d = self.segment_distance(p, s as usize);
                if d < *best {
                    *best = d;
                }
            }
        };
        let mut k = k0;
        while k <= kmax {
            let lo_i = (ci - k).max(0);
            let hi_i = (ci + k).min(self.nx as i64 - 1);
            for i in lo_i..=hi_i {
                if (i - ci).abs() == k {
                    let lo_j = (cj - k).max(0);
                    let hi_j = (cj + k).min(self.ny as i64 - 1);
                    for j in lo_j..=hi_j {
                        visit(i, j, &mut best);
                    }
                } else {
                    visit(i, cj - k, &mut best);
                    visit(i, cj + k, &mut best);
                }
            }
            // unvisited cells are at least k cells away from p's cell
            if best <= k as f64 * self.cell {
                break;
            }
            k += 1;
        }
        best
    }
}

/// Mean xy distance from each path sample to the nearest point of the
/// reference polyline.
pub fn total_error(path: &[(f64, f64)], reference: &[(f64, f64)]) -> Result<f64> {
    if path.is_empty() {
        return Err(Error::EmptyPath);
    }
    let idx = SegmentIndex::new(reference)?;
    let sum: f64 = path.iter().map(|&p| idx.nearest(p)).sum();
    Ok(sum / path.len() as f64)
}

/// Root-mean-square difference of two aligned series.
pub fn axis_rmse(estimate: &[f64], truth: &[f64]) -> Result<f64> {
    if estimate.len() != truth.len() {
        return Err(Error::LengthMismatch {
            left: estimate.len(),
            right: truth.len(),
        });
    }
    if estimate.is_empty() {
        return Err(Error::EmptyPath);
    }
    let ss: f64 = estimate.iter().zip(truth).map(|(e, t)| (e - t) * (e - t)).sum();
    Ok((ss / estimate.len() as f64).sqrt())
}

/// Per-run metrics for one backend.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ErrorReport {
    /// truth path vs reference
    pub total: f64,
    pub x_kalman: f64,
    pub y_kalman: f64,
    /// estimated path vs reference
    pub total_est: f64,
}

/// Builds the report from time-aligned truth and estimate xy series.
pub fn error_report(truth: &[(f64, f64)], estimate: &[(f64, f64)], reference: &[(f64, f64)]) -> Result<ErrorReport> {
    let split = |v: &[(f64, f64)]| -> (Vec<f64>, Vec<f64>) { v.iter().copied().unzip() };
    let (tx, ty) = split(truth);
    let (ex, ey) = split(estimate);
    Ok(ErrorReport {
        total: total_error(truth, reference)?,
        x_kalman: axis_rmse(&ex, &tx)?,
        y_kalman: axis_rmse(&ey, &ty)?,
        total_est: total_error(estimate, reference)?,
    })
}

/// Signed heading change at each interior waypoint, rad.
pub fn turn_angles(waypoints: &[Waypoint]) -> Vec<f64> {
    waypoints
        .windows(3)
        .map(|w| {
            let h1 = (w[1].y - w[0].y).atan2(w[1].x - w[0].x);
            let h2 = (w[2].y - w[1].y).atan2(w[2].x - w[1].x);
            crate::frames::angle_diff(h2, h1)
        })
        .collect()
}
