//! Post-processing: averages, diameter profiles, skyrmion classes and the
//! CSV, VTK and field-file writers.

use std::fmt::{self, Write as _};
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::dynamics::{Sink, StepDiagnostics};
use crate::error::{Error, Result};
use crate::fem::{interpolate_at, locate, NodalVectorField};
use crate::mesh::TriMesh;
use crate::vec3::{self, Vec3};

/// `|ω|⁻¹ ∫ m`, exact for P1 fields.
pub fn average_m(mesh: &TriMesh, field: &NodalVectorField) -> Result<Vec3> {
    field.check_len(mesh)?;
    let mut acc = [0.0; 3];
    for (t, tri) in mesh.triangles().iter().enumerate() {
        let a = mesh.triangle_area(t) / 3.0;
        for &z in tri {
            acc = vec3::axpy(a, field.get(z), acc);
        }
    }
    Ok(vec3::scale(1.0 / mesh.total_area(), acc))
}

pub fn average_m3(mesh: &TriMesh, field: &NodalVectorField) -> Result<f64> {
    Ok(average_m(mesh, field)?[2])
}

/// `m₃` sampled at equally spaced points of a segment.
#[derive(Debug, Clone, PartialEq)]
pub struct Profile {
    pub x: Vec<f64>,
    pub m3: Vec<f64>,
}

impl Profile {
    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn reversed(&self) -> Self {
        Self {
            x: self.x.iter().rev().map(|v| -v).collect(),
            m3: self.m3.iter().rev().copied().collect(),
        }
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("x,m3\n");
        for (x, m) in self.x.iter().zip(&self.m3) {
            let _ = writeln!(out, "{x:.9e},{m:.9e}");
        }
        out
    }
}

pub const MIN_PROFILE_SAMPLES: usize = 16;

/// Profile along the horizontal diameter `(−R, 0)–(R, 0)`, `R` the largest
/// vertex radius.
pub fn extract_profile(mesh: &TriMesh, field: &NodalVectorField, n_samples: usize) -> Result<Profile> {
    let r = mesh.max_radius();
    extract_profile_segment(mesh, field, [-r, 0.0], [r, 0.0], n_samples)
}

/// Profile along `a–b`. Samples marginally outside the polygonal boundary
/// are pulled back along the segment to the boundary.
pub fn extract_profile_segment(
    mesh: &TriMesh,
    field: &NodalVectorField,
    a: [f64; 2],
    b: [f64; 2],
    n_samples: usize,
) -> Result<Profile> {
    if n_samples < MIN_PROFILE_SAMPLES {
        return Err(Error::invalid(format!(
            "a profile needs at least {MIN_PROFILE_SAMPLES} samples, got {n_samples}"
        )));
    }
    field.check_len(mesh)?;
    let at = |s: f64| [a[0] + s * (b[0] - a[0]), a[1] + s * (b[1] - a[1])];
    let params: Vec<f64> = (0..n_samples).map(|i| i as f64 / (n_samples - 1) as f64).collect();
    let inside: Vec<bool> = params.iter().map(|&s| locate(mesh, at(s)).is_some()).collect();
    let Some(first) = inside.iter().position(|&v| v) else {
        let mid = at(0.5);
        return Err(Error::PointOutsideMesh { x: mid[0], y: mid[1] });
    };
    let last = inside.iter().rposition(|&v| v).unwrap();
    let mut x = Vec::with_capacity(n_samples);
    let mut m3 = Vec::with_capacity(n_samples);
    let half = 0.5 * ((b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2)).sqrt();
    for (i, &s) in params.iter().enumerate() {
        let s_eval = if inside[i] {
            s
        } else if i < first {
            boundary_crossing(mesh, &at, s, params[first])
        } else if i > last {
            boundary_crossing(mesh, &at, s, params[last])
        } else {
            // interior gap (non-convex domain): nearest sample that is inside
            let j = (0..n_samples)
                .filter(|&j| inside[j])
                .min_by_key(|&j| j.abs_diff(i))
                .unwrap();
            params[j]
        };
        let v = interpolate_at(mesh, field, at(s_eval))?;
        x.push((2.0 * s - 1.0) * half);
        m3.push(v[2]);
    }
    Ok(Profile { x, m3 })
}

/// Bisection for the last inside parameter between `outside` and `inside`.
fn boundary_crossing(mesh: &TriMesh, at: &impl Fn(f64) -> [f64; 2], outside: f64, inside: f64) -> f64 {
    let (mut o, mut i) = (outside, inside);
    for _ in 0..60 {
        let m = 0.5 * (o + i);
        if locate(mesh, at(m)).is_some() {
            i = m;
        } else {
            o = m;
        }
    }
    i
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SkyrmionKind {
    Incomplete,
    Isolated,
    Target,
}

impl fmt::Display for SkyrmionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Incomplete => "incomplete",
            Self::Isolated => "isolated",
            Self::Target => "target",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SkyrmionClass {
    pub kind: SkyrmionKind,
    pub alternations: usize,
}

pub const DEFAULT_BAND_TOL: f64 = 0.1;

/// Number of H/L band alternations along a sequence of `m₃` values.
pub fn band_alternations(values: &[f64], band_tol: f64) -> usize {
    let mut collapsed: Vec<bool> = Vec::new();
    for &v in values {
        let band = if v >= 1.0 - band_tol {
            Some(true)
        } else if v <= -1.0 + band_tol {
            Some(false)
        } else {
            None
        };
        if let Some(h) = band {
            if collapsed.last() != Some(&h) {
                collapsed.push(h);
            }
        }
    }
    collapsed.len().saturating_sub(1)
}

/// Classify by counting full swings of `m₃` from the centre to the edge.
/// Both half-profiles are examined and the larger count is used, which makes
/// the result independent of the profile direction.
pub fn classify_skyrmion(profile: &Profile, band_tol: f64) -> SkyrmionClass {
    let v = &profile.m3;
    let n = v.len();
    let alternations = if n == 0 {
        0
    } else {
        let (left_end, right_start) = if n % 2 == 1 { (n / 2, n / 2) } else { (n / 2 - 1, n / 2) };
        let right = band_alternations(&v[right_start..], band_tol);
        let left: Vec<f64> = v[..=left_end].iter().rev().copied().collect();
        right.max(band_alternations(&left, band_tol))
    };
    let kind = match alternations {
        0 => SkyrmionKind::Incomplete,
        1 => SkyrmionKind::Isolated,
        _ => SkyrmionKind::Target,
    };
    SkyrmionClass { kind, alternations }
}

/// C-style `%.9e`: mantissa with nine decimals, signed two-digit exponent.
pub fn fmt_exp9(x: f64) -> String {
    let s = format!("{x:.9e}");
    match s.split_once('e') {
        Some((m, e)) => {
            let (sign, digits) = match e.strip_prefix('-') {
                Some(d) => ('-', d),
                None => ('+', e),
            };
            format!("{m}e{sign}{digits:0>2}")
        }
        None => s,
    }
}

pub fn vtk_string(mesh: &TriMesh, field: &NodalVectorField) -> Result<String> {
    field.check_len(mesh)?;
    let n = mesh.n_vertices();
    let m = mesh.n_triangles();
    let mut out = String::with_capacity(64 * (n + m));
    out.push_str("# vtk DataFile Version 2.0\nmagnetization\nASCII\nDATASET UNSTRUCTURED_GRID\n");
    let _ = writeln!(out, "POINTS {n} float");
    for p in mesh.vertices() {
        let _ = writeln!(out, "{} {} {}", fmt_exp9(p[0]), fmt_exp9(p[1]), fmt_exp9(0.0));
    }
    let _ = writeln!(out, "CELLS {m} {}", 4 * m);
    for t in mesh.triangles() {
        let _ = writeln!(out, "3 {} {} {}", t[0], t[1], t[2]);
    }
    let _ = writeln!(out, "CELL_TYPES {m}");
    for _ in 0..m {
        out.push_str("5\n");
    }
    let _ = writeln!(out, "POINT_DATA {n}\nVECTORS m float");
    for v in field.values() {
        let _ = writeln!(out, "{} {} {}", fmt_exp9(v[0]), fmt_exp9(v[1]), fmt_exp9(v[2]));
    }
    Ok(out)
}

pub fn write_vtk(mesh: &TriMesh, field: &NodalVectorField, path: &Path) -> Result<()> {
    std::fs::write(path, vtk_string(mesh, field)?)?;
    Ok(())
}

pub const CSV_HEADER: &str =
    "step,time,exchange,dmi,pi,applied,constant,total,avg_m1,avg_m2,avg_m3,vmax,constraint_l1,energy_residual";

/// One line of the time-series CSV.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesRow {
    pub diag: StepDiagnostics,
    pub avg_m: Vec3,
}

impl SeriesRow {
    /// Row with time and energies multiplied by the given factors.
    pub fn format(&self, time_scale: f64, energy_scale: f64) -> String {
        let d = &self.diag;
        let e = d.energy.scaled(energy_scale);
        let f = |x: f64| format!("{x:.15e}");
        [
            d.step.to_string(),
            f(d.time * time_scale),
            f(e.exchange),
            f(e.dmi),
            f(e.pi_term),
            f(e.applied_term),
            f(e.constant_term),
            f(e.total),
            f(self.avg_m[0]),
            f(self.avg_m[1]),
            f(self.avg_m[2]),
            f(d.vmax),
            f(d.constraint_l1),
            f(d.energy_law_residual * energy_scale),
        ]
        .join(",")
    }
}

pub fn series_csv(rows: &[SeriesRow], time_scale: f64, energy_scale: f64) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&r.format(time_scale, energy_scale));
        out.push('\n');
    }
    out
}

pub fn write_csv(rows: &[SeriesRow], path: &Path) -> Result<()> {
    std::fs::write(path, series_csv(rows, 1.0, 1.0))?;
    Ok(())
}

/// Sink collecting CSV rows and writing VTK snapshots to a directory.
pub struct SeriesRecorder<'a> {
    mesh: &'a TriMesh,
    pub rows: Vec<SeriesRow>,
    snapshot_dir: Option<PathBuf>,
    pub snapshots: Vec<PathBuf>,
}

impl<'a> SeriesRecorder<'a> {
    pub fn new(mesh: &'a TriMesh, snapshot_dir: Option<PathBuf>) -> Self {
        Self {
            mesh,
            rows: Vec::new(),
            snapshot_dir,
            snapshots: Vec::new(),
        }
    }
}

impl Sink for SeriesRecorder<'_> {
    fn on_step(&mut self, state: &NodalVectorField, diag: &StepDiagnostics) -> Result<()> {
        let avg_m = average_m(self.mesh, state)?;
        self.rows.push(SeriesRow { diag: *diag, avg_m });
        Ok(())
    }

    fn on_snapshot(&mut self, step: usize, state: &NodalVectorField) -> Result<()> {
        if let Some(dir) = &self.snapshot_dir {
            let path = dir.join(format!("snapshot_{step:06}.vtk"));
            write_vtk(self.mesh, state, &path)?;
            self.snapshots.push(path);
        }
        Ok(())
    }
}

/// Native field file: one `m1 m2 m3` line per vertex.
pub fn field_string(field: &NodalVectorField) -> String {
    let mut out = String::with_capacity(field.len() * 60);
    for v in field.values() {
        let _ = writeln!(out, "{:?} {:?} {:?}", v[0], v[1], v[2]);
    }
    out
}

pub fn write_field(field: &NodalVectorField, path: &Path) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    f.write_all(field_string(field).as_bytes())?;
    f.flush()?;
    Ok(())
}

pub fn parse_field(text: &str, expected: Option<usize>) -> Result<NodalVectorField> {
    let mut values = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let nums: Vec<f64> = line
            .split_whitespace()
            .map(|t| {
                t.parse::<f64>()
                    .map_err(|_| Error::parse(i + 1, format!("not a number: '{t}'")))
            })
            .collect::<Result<_>>()?;
        if nums.len() != 3 || nums.iter().any(|v| !v.is_finite()) {
            return Err(Error::parse(i + 1, "expected three finite components"));
        }
        values.push([nums[0], nums[1], nums[2]]);
    }
    if let Some(n) = expected {
        if values.len() != n {
            return Err(Error::SizeMismatch {
                expected: n,
                found: values.len(),
            });
        }
    }
    Ok(NodalVectorField::new(values))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::fixtures::*;
    use crate::mesh::generate_disk;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn synthetic(values: Vec<f64>) -> Profile {
        let n = values.len();
        Profile {
            x: (0..n).map(|i| i as f64 - (n - 1) as f64 / 2.0).collect(),
            m3: values,
        }
    }

    /// Symmetric diameter profile from a radial function on [0, 1].
    fn radial(f: impl Fn(f64) -> f64, n: usize) -> Profile {
        synthetic(
            (0..n)
                .map(|i| f((2.0 * i as f64 / (n - 1) as f64 - 1.0).abs()))
                .collect(),
        )
    }

    #[test]
    fn averages_of_simple_fields() {
        let mesh = unit_triangle();
        assert_relative_eq!(
            average_m3(&mesh, &NodalVectorField::constant(3, vec3::E3)).unwrap(),
            1.0
        );
        assert_relative_eq!(
            average_m3(&mesh, &NodalVectorField::constant(3, vec3::E1)).unwrap(),
            0.0
        );
        let f = NodalVectorField::interpolate(&mesh, |p| [0.0, 0.0, p[0]]);
        assert_relative_eq!(average_m3(&mesh, &f).unwrap(), 1.0 / 3.0, epsilon = 1e-15);
    }

    #[test]
    fn profile_of_linear_field_on_disk() {
        let mesh = generate_disk(4.0, 0.3).unwrap();
        let r = mesh.max_radius();
        let f = NodalVectorField::interpolate(&mesh, |p| [0.0, 0.0, p[0] / r]);
        let p = extract_profile(&mesh, &f, 41).unwrap();
        assert_eq!(p.len(), 41);
        for (x, m) in p.x.iter().zip(&p.m3) {
            assert!((m - x / r).abs() < 1e-9);
        }
        let c = extract_profile(&mesh, &NodalVectorField::constant(mesh.n_vertices(), vec3::E3), 16).unwrap();
        assert!(c.m3.iter().all(|&v| (v - 1.0).abs() < 1e-14));
        assert!(extract_profile(&mesh, &f, 2).is_err());
    }

    #[test]
    fn profile_outside_mesh_is_an_error() {
        let mesh = unit_triangle();
        let f = NodalVectorField::constant(3, vec3::E3);
        assert!(matches!(
            extract_profile_segment(&mesh, &f, [2.0, 2.0], [3.0, 3.0], 16),
            Err(Error::PointOutsideMesh { .. })
        ));
    }

    #[test]
    fn classification_examples() {
        assert_eq!(
            classify_skyrmion(&synthetic(vec![1.0; 33]), DEFAULT_BAND_TOL).kind,
            SkyrmionKind::Incomplete
        );
        let iso = classify_skyrmion(&radial(|r| (std::f64::consts::PI * r).cos(), 101), DEFAULT_BAND_TOL);
        assert_eq!(
            iso,
            SkyrmionClass {
                kind: SkyrmionKind::Isolated,
                alternations: 1
            }
        );
        let target = classify_skyrmion(
            &radial(|r| (3.0 * std::f64::consts::PI * r).cos(), 201),
            DEFAULT_BAND_TOL,
        );
        assert_eq!(
            target,
            SkyrmionClass {
                kind: SkyrmionKind::Target,
                alternations: 3
            }
        );
        // a profile that never reaches the lower band
        let partial = classify_skyrmion(&radial(|r| 1.0 - 1.5 * r, 101), DEFAULT_BAND_TOL);
        assert_eq!(partial.kind, SkyrmionKind::Incomplete);
    }

    #[test]
    fn vtk_for_single_triangle() {
        let mesh = unit_triangle();
        let s = vtk_string(&mesh, &NodalVectorField::constant(3, vec3::E3)).unwrap();
        assert!(s.contains("POINTS 3 float\n"));
        assert!(s.contains("CELLS 1 4\n3 0 1 2\n"));
        assert!(s.contains("CELL_TYPES 1\n5\n"));
        let tail = s.split("VECTORS m float\n").nth(1).unwrap();
        let rows: Vec<&str> = tail.lines().collect();
        assert_eq!(rows.len(), 3);
        for r in rows {
            let v: Vec<f64> = r.split_whitespace().map(|t| t.parse().unwrap()).collect();
            assert_eq!(v, vec![0.0, 0.0, 1.0]);
        }
        assert_eq!(fmt_exp9(1.0), "1.000000000e+00");
        assert_eq!(fmt_exp9(-2.5e-12), "-2.500000000e-12");
        assert_eq!(fmt_exp9(0.0), "0.000000000e+00");
    }

    #[test]
    fn vtk_points_round_trip_to_print_precision() {
        let mesh = generate_disk(3.0, 0.5).unwrap();
        let s = vtk_string(&mesh, &NodalVectorField::constant(mesh.n_vertices(), vec3::E1)).unwrap();
        let body = s.split("float\n").nth(1).unwrap();
        for (line, p) in body.lines().zip(mesh.vertices()) {
            let v: Vec<f64> = line.split_whitespace().map(|t| t.parse().unwrap()).collect();
            assert!((v[0] - p[0]).abs() <= 1e-9 * p[0].abs().max(1e-300) + 1e-300);
            assert!((v[1] - p[1]).abs() <= 1e-9 * p[1].abs().max(1e-300) + 1e-300);
        }
    }

    #[test]
    fn empty_series_is_header_only() {
        assert_eq!(series_csv(&[], 1.0, 1.0), format!("{CSV_HEADER}\n"));
    }

    #[test]
    fn field_file_round_trip() {
        let f = NodalVectorField::new(vec![[0.1, -0.2, 0.3], [1.0 / 3.0, 0.0, -1e-17]]);
        assert_eq!(parse_field(&field_string(&f), Some(2)).unwrap(), f);
        assert!(parse_field("1 2\n", None).is_err());
        assert!(matches!(
            parse_field("1 2 3\n", Some(2)),
            Err(Error::SizeMismatch { .. })
        ));
    }

    proptest! {
        #[test]
        fn classification_is_reversal_and_noise_invariant(
            values in proptest::collection::vec(-1.0f64..1.0, 16..80),
            noise_at in proptest::collection::vec((0usize..80, -0.85f64..0.85), 0..10),
        ) {
            let p = synthetic(values.clone());
            let c = classify_skyrmion(&p, DEFAULT_BAND_TOL);
            prop_assert_eq!(c, classify_skyrmion(&p.reversed(), DEFAULT_BAND_TOL));
            // neutral-band samples inserted at mirrored positions change nothing
            let mut noisy = values.clone();
            for (i, v) in &noise_at {
                let i = (*i).min(noisy.len() / 2);
                noisy.insert(i, *v);
                let j = noisy.len() - i;
                noisy.insert(j, *v);
            }
            prop_assert_eq!(c, classify_skyrmion(&synthetic(noisy), DEFAULT_BAND_TOL));
            let mut half = values.clone();
            for (i, v) in &noise_at {
                half.insert((*i).min(half.len()), *v);
            }
            prop_assert_eq!(band_alternations(&values, DEFAULT_BAND_TOL), band_alternations(&half, DEFAULT_BAND_TOL));
        }

        #[test]
        fn average_is_linear_and_bounded(a in -2.0f64..2.0, seed in any::<u64>()) {
            use rand::{Rng, SeedableRng};
            let mesh = square_grid(3, 1.0);
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let n = mesh.n_vertices();
            let u = NodalVectorField::new((0..n).map(|_| [0.0, 0.0, rng.gen_range(-1.0..1.0)]).collect());
            let w = NodalVectorField::new((0..n).map(|_| [0.0, 0.0, rng.gen_range(-1.0..1.0)]).collect());
            let comb = NodalVectorField::new(u.values().iter().zip(w.values()).map(|(x, y)| [0.0, 0.0, a * x[2] + y[2]]).collect());
            let lhs = average_m3(&mesh, &comb).unwrap();
            let rhs = a * average_m3(&mesh, &u).unwrap() + average_m3(&mesh, &w).unwrap();
            prop_assert!((lhs - rhs).abs() < 1e-12);
            let max = u.values().iter().map(|v| v[2].abs()).fold(0.0, f64::max);
            prop_assert!(average_m3(&mesh, &u).unwrap().abs() <= max + 1e-15);
        }
    }
}
