//! Surfaces `f(s, t) = exp(sA) k(t)` and the geometric checks on them.
//!
//! The almost complex curve is the first column `f1` of the frame. Checks use
//! finite differences on a uniform `(s, t)` grid and skip boundary points.

use nalgebra::SymmetricEigen;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::aks_flow::{self, rationality, AksError, AksRun, FramePath, Rationality};
use crate::export::Table;
use crate::g2_algebra::{matrix_to_coords, G2AlgCoords};
use crate::toda_lattice::{rotation_angles, TodaState};
use crate::tolerances::{MAX_DENOMINATOR, PATTERN};
use crate::octonion::{g2_frame, phi3, ComplexImOct, ImOct};
use crate::primitive_frame::PrimitiveCoeffs;
use crate::{Mat7, Vec7};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CurveError {
    #[error("A is not in g2 (residual {0:.3e})")]
    NotInG2(f64),
    #[error("grid needs at least {need} samples along {axis}, got {got}")]
    TooSmall { axis: &'static str, need: usize, got: usize },
    #[error("{axis} samples are not uniformly spaced (deviation {deviation:.3e})")]
    NonUniform { axis: &'static str, deviation: f64 },
    #[error("grid has no frames; rebuild it from a frame path")]
    NoFrames,
    #[error("expected {expected} coefficient samples along t, got {got}")]
    CoeffCount { expected: usize, got: usize },
    #[error("coefficients are not of type III: |a + b| reaches {defect:.3e}")]
    NotTypeIII { defect: f64 },
    #[error("e vanishes along the path (min |e| = {min:.3e})")]
    VanishingE { min: f64 },
    #[error("grid table: {0}")]
    Table(String),
    #[error("seed field {field} disagrees with the Toda state (defect {defect:.3e})")]
    SeedMismatch { field: &'static str, defect: f64 },
    #[error(transparent)]
    Aks(#[from] AksError),
}

/// Rotation-plane decomposition of an antisymmetric matrix, for exact
/// evaluation of `exp(sA)` at any `s`.
#[derive(Clone, Debug)]
pub struct RotationPlanes {
    /// `(u, w, mu)` with `A u = mu w` and `A w = -mu u`.
    planes: Vec<(Vec7, Vec7, f64)>,
    kernel: Mat7,
}

impl RotationPlanes {
    pub fn new(a: &Mat7) -> RotationPlanes {
        let scale = a.norm().max(f64::MIN_POSITIVE);
        let eig = SymmetricEigen::new(-(a * a));
        let mut order: Vec<usize> = (0..7).collect();
        order.sort_by(|i, j| eig.eigenvalues[*j].total_cmp(&eig.eigenvalues[*i]));
        let mut basis: Vec<Vec7> = Vec::new();
        let mut planes = Vec::new();
        for i in order {
            if eig.eigenvalues[i] <= (1e-9 * scale).powi(2) {
                break;
            }
            let mut u: Vec7 = eig.eigenvectors.column(i).into_owned();
            for b in &basis {
                u -= b * b.dot(&u);
            }
            if u.norm() < 0.5 {
                continue;
            }
            u.normalize_mut();
            let au = a * u;
            let mu = au.norm();
            let mut w = au / mu;
            for b in &basis {
                w -= b * b.dot(&w);
            }
            w -= u * u.dot(&w);
            w.normalize_mut();
            basis.push(u);
            basis.push(w);
            planes.push((u, w, mu));
            if planes.len() == 3 {
                break;
            }
        }
        planes.sort_by(|p: &(Vec7, Vec7, f64), q| p.2.total_cmp(&q.2));
        let kernel = planes
            .iter()
            .fold(Mat7::identity(), |k, (u, w, _)| k - u * u.transpose() - w * w.transpose());
        RotationPlanes { planes, kernel }
    }

    /// Rotation rates, ascending.
    pub fn angles(&self) -> Vec<f64> {
        self.planes.iter().map(|p| p.2).collect()
    }

    /// Rotation angle in `(-pi, pi]` by which `g` turns each plane, in the
    /// order of [`angles`](Self::angles). Meaningful when `g` commutes with `A`.
    pub fn phases(&self, g: &Mat7) -> Vec<f64> {
        self.planes.iter().map(|(u, w, _)| (w.dot(&(g * u))).atan2(u.dot(&(g * u)))).collect()
    }

    pub fn exp(&self, s: f64) -> Mat7 {
        self.planes.iter().fold(self.kernel, |m, (u, w, mu)| {
            let (sin, cos) = (mu * s).sin_cos();
            m + (u * u.transpose() + w * w.transpose()) * cos + (w * u.transpose() - u * w.transpose()) * sin
        })
    }
}

/// `exp(sA)` for `A` in `g2`.
pub fn exp_as(a: &Mat7, s: f64) -> Result<Mat7, CurveError> {
    matrix_to_coords(a).map_err(|crate::g2_algebra::G2Error::NotInG2 { residual, .. }| CurveError::NotInG2(residual))?;
    Ok(RotationPlanes::new(a).exp(s))
}

/// `n` points `start + i * spacing`.
pub fn uniform_samples(start: f64, spacing: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| start + i as f64 * spacing).collect()
}

/// Points and, when built from frames, the frames `psi(s, t)`, stored with
/// `t` varying fastest.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct CurveGrid {
    pub s: Vec<f64>,
    pub t: Vec<f64>,
    pub points: Vec<ImOct>,
    pub frames: Option<Vec<Mat7>>,
}

/// `psi(s, t) = exp(sA) k(t)` with `f1` its first column.
pub fn build_grid(a: &Mat7, fp: &FramePath, s_samples: &[f64]) -> Result<CurveGrid, CurveError> {
    matrix_to_coords(a).map_err(|crate::g2_algebra::G2Error::NotInG2 { residual, .. }| CurveError::NotInG2(residual))?;
    let planes = RotationPlanes::new(a);
    let frames: Vec<Mat7> = s_samples
        .par_iter()
        .flat_map_iter(|s| {
            let e = planes.exp(*s);
            fp.frames.iter().map(move |k| e * k)
        })
        .collect();
    let points = frames.iter().map(|m| ImOct::column(m, 0)).collect();
    Ok(CurveGrid { s: s_samples.to_vec(), t: fp.times.clone(), points, frames: Some(frames) })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Stencil {
    /// Three-point central differences, error `O(h^2)`.
    #[default]
    Second,
    /// Five-point central differences, error `O(h^4)`.
    Fourth,
}

impl Stencil {
    fn margin(self) -> usize {
        match self {
            Stencil::Second => 1,
            Stencil::Fourth => 2,
        }
    }
}

fn spacing(axis: &'static str, x: &[f64], need: usize) -> Result<f64, CurveError> {
    if x.len() < need {
        return Err(CurveError::TooSmall { axis, need, got: x.len() });
    }
    let h = (x[x.len() - 1] - x[0]) / (x.len() - 1) as f64;
    let deviation = x.windows(2).map(|w| (w[1] - w[0] - h).abs()).fold(0.0, f64::max);
    if !(deviation <= 1e-9 * h.abs().max(1e-300)) || h == 0.0 {
        return Err(CurveError::NonUniform { axis, deviation });
    }
    Ok(h)
}

/// Per-point finite differences over a grid.
struct Diff<'a> {
    g: &'a CurveGrid,
    hs: f64,
    ht: f64,
    stencil: Stencil,
}

impl<'a> Diff<'a> {
    fn new(g: &'a CurveGrid, stencil: Stencil) -> Result<Diff<'a>, CurveError> {
        let need = 2 * stencil.margin() + 1;
        Ok(Diff { hs: spacing("s", &g.s, need)?, ht: spacing("t", &g.t, need)?, g, stencil })
    }

    fn at(&self, i: usize, j: usize) -> ImOct {
        self.g.points[i * self.g.t.len() + j]
    }

    fn interior(&self) -> Vec<(usize, usize)> {
        let m = self.stencil.margin();
        let (ns, nt) = (self.g.s.len(), self.g.t.len());
        (m..ns - m).flat_map(|i| (m..nt - m).map(move |j| (i, j))).collect()
    }

    fn d(&self, f: impl Fn(isize) -> ImOct, h: f64) -> ImOct {
        match self.stencil {
            Stencil::Second => (f(1) - f(-1)).scale(0.5 / h),
            Stencil::Fourth => (f(-2) - f(2) + (f(1) - f(-1)).scale(8.0)).scale(1.0 / (12.0 * h)),
        }
    }

    fn ds(&self, i: usize, j: usize) -> ImOct {
        self.d(|k| self.at((i as isize + k) as usize, j), self.hs)
    }

    fn dt(&self, i: usize, j: usize) -> ImOct {
        self.d(|k| self.at(i, (j as isize + k) as usize), self.ht)
    }

    /// `f_z = (f_s - i f_t) / 2`.
    fn dz(&self, i: usize, j: usize) -> ComplexImOct {
        ComplexImOct::from_parts(&self.ds(i, j).scale(0.5), &self.dt(i, j).scale(-0.5))
    }

    /// `f_zz = (f_ss - f_tt - 2 i f_st) / 4`, three-point stencils.
    fn dzz(&self, i: usize, j: usize) -> ComplexImOct {
        let f = |a: isize, b: isize| self.at((i as isize + a) as usize, (j as isize + b) as usize);
        let c = f(0, 0).scale(2.0);
        let fss = (f(1, 0) + f(-1, 0) - c).scale(1.0 / (self.hs * self.hs));
        let ftt = (f(0, 1) + f(0, -1) - c).scale(1.0 / (self.ht * self.ht));
        let fst = (f(1, 1) - f(1, -1) - f(-1, 1) + f(-1, -1)).scale(1.0 / (4.0 * self.hs * self.ht));
        ComplexImOct::from_parts(&(fss - ftt).scale(0.25), &fst.scale(-0.5))
    }
}

fn max_finite(values: &[f64]) -> f64 {
    values.iter().copied().filter(|x| !x.is_nan()).fold(0.0, f64::max)
}

impl CurveGrid {
    pub fn ns(&self) -> usize {
        self.s.len()
    }

    pub fn nt(&self) -> usize {
        self.t.len()
    }

    pub fn point(&self, i: usize, j: usize) -> ImOct {
        self.points[i * self.t.len() + j]
    }

    /// Largest violation of: unit `f1`, orthonormal columns, `f3 = f1 f2`.
    pub fn frame_defect(&self) -> f64 {
        let unit = self.points.iter().map(|p| (p.norm() - 1.0).abs()).fold(0.0, f64::max);
        let Some(frames) = &self.frames else { return unit };
        frames
            .par_iter()
            .map(|m| {
                let ortho = (m.transpose() * m - Mat7::identity()).amax();
                let (f1, f2, f3) = (ImOct::column(m, 0), ImOct::column(m, 1), ImOct::column(m, 2));
                let prod = f1.mul(&f2);
                let mut d = (prod.im() - f3).norm().max(prod.re().abs());
                d = d.max(ortho);
                d
            })
            .reduce(|| unit, f64::max)
    }

    /// Columns `s, t, f1..f7` and then one per extra column.
    pub fn to_table(&self, extra: &[(&str, Vec<f64>)]) -> Table {
        let mut cols: Vec<String> = ["s", "t"].iter().map(|c| c.to_string()).collect();
        cols.extend((1..=7).map(|k| format!("f{k}")));
        cols.extend(extra.iter().map(|(name, _)| name.to_string()));
        let mut table = Table::new(cols);
        for i in 0..self.ns() {
            for j in 0..self.nt() {
                let p = i * self.nt() + j;
                let mut row = vec![self.s[i], self.t[j]];
                row.extend_from_slice(&self.points[p].0);
                row.extend(extra.iter().map(|(_, v)| v[p]));
                table.push(row);
            }
        }
        table
    }

    /// Points from a table with columns `s, t, f1..f7`, rows ordered with `t`
    /// varying fastest.
    pub fn from_table(table: &Table) -> Result<CurveGrid, CurveError> {
        let col = |name: &str| table.column(name).ok_or_else(|| CurveError::Table(format!("missing column {name}")));
        let (s, t) = (col("s")?, col("t")?);
        let f: Vec<Vec<f64>> = (1..=7).map(|k| col(&format!("f{k}"))).collect::<Result<_, _>>()?;
        let nt = t.iter().skip(1).position(|x| *x == t[0]).map_or(t.len(), |p| p + 1);
        if nt == 0 || t.len() % nt != 0 {
            return Err(CurveError::Table("rows do not form a rectangular grid".into()));
        }
        let ns = t.len() / nt;
        let t_axis = t[..nt].to_vec();
        let s_axis: Vec<f64> = (0..ns).map(|i| s[i * nt]).collect();
        for (r, (si, ti)) in s.iter().zip(&t).enumerate() {
            if *si != s_axis[r / nt] || *ti != t_axis[r % nt] {
                return Err(CurveError::Table(format!("row {r} breaks the (s, t) ordering")));
            }
        }
        let points = (0..s.len()).map(|r| ImOct(std::array::from_fn(|k| f[k][r]))).collect();
        Ok(CurveGrid { s: s_axis, t: t_axis, points, frames: None })
    }
}

/// `|f1 . f1_z - i f1_z|` per point, NaN on the boundary.
pub fn almost_complex_field(g: &CurveGrid, stencil: Stencil) -> Result<Vec<f64>, CurveError> {
    let diff = Diff::new(g, stencil)?;
    let mut out = vec![f64::NAN; g.points.len()];
    let values: Vec<((usize, usize), f64)> = diff
        .interior()
        .into_par_iter()
        .map(|(i, j)| {
            let fz = diff.dz(i, j);
            let (re, im) = ComplexImOct::from_real(&diff.at(i, j)).mul(&fz);
            let gap = im - fz.scale(Complex64::i());
            ((i, j), (re.norm_sqr() + gap.norm().powi(2)).sqrt())
        })
        .collect();
    for ((i, j), v) in values {
        out[i * g.nt() + j] = v;
    }
    Ok(out)
}

/// Largest almost complex defect over interior points.
pub fn almost_complex_residual(g: &CurveGrid) -> Result<f64, CurveError> {
    almost_complex_field(g, Stencil::Second).map(|v| max_finite(&v))
}

/// Cone tangent planes against the associative calibration.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ConeReport {
    /// Max over points of `|x u -+ v|` and `| |phi(x, u, v)| - 1 |`.
    pub residual: f64,
    /// Smallest `|phi(x, u, v)|` seen.
    pub min_calibration: f64,
    /// Points with `phi > 0` and with `phi < 0`.
    pub orientation: (usize, usize),
    /// Interior points where the tangent has rank below 2.
    pub degenerate: Vec<(usize, usize)>,
    /// Per-point residual, NaN on the boundary and at degenerate points.
    pub field: Vec<f64>,
}

pub fn cone_associativity(g: &CurveGrid) -> Result<ConeReport, CurveError> {
    cone_associativity_with(g, Stencil::Second)
}

pub fn cone_associativity_with(g: &CurveGrid, stencil: Stencil) -> Result<ConeReport, CurveError> {
    let diff = Diff::new(g, stencil)?;
    let cells: Vec<((usize, usize), Option<(f64, f64)>)> = diff
        .interior()
        .into_par_iter()
        .map(|(i, j)| {
            let x = diff.at(i, j);
            let (fs, ft) = (diff.ds(i, j), diff.dt(i, j));
            let scale = fs.norm().max(ft.norm());
            let u = fs - x.scale(x.dot(&fs));
            let v = ft - x.scale(x.dot(&ft));
            let nu = u.norm();
            if nu <= 1e-8 * scale.max(1e-300) || scale == 0.0 {
                return ((i, j), None);
            }
            let u = u.scale(1.0 / nu);
            let v = v - u.scale(u.dot(&v));
            let nv = v.norm();
            if nv <= 1e-8 * scale {
                return ((i, j), None);
            }
            let v = v.scale(1.0 / nv);
            let phi = phi3(&x, &u, &v);
            let prod = x.mul(&u);
            let gap = prod.im() - v.scale(phi.signum());
            let r = (prod.re().powi(2) + gap.norm().powi(2)).sqrt().max((phi.abs() - 1.0).abs());
            ((i, j), Some((r, phi)))
        })
        .collect();
    let mut report = ConeReport { min_calibration: f64::INFINITY, field: vec![f64::NAN; g.points.len()], ..Default::default() };
    for ((i, j), cell) in cells {
        match cell {
            None => report.degenerate.push((i, j)),
            Some((r, phi)) => {
                report.field[i * g.nt() + j] = r;
                report.residual = report.residual.max(r);
                report.min_calibration = report.min_calibration.min(phi.abs());
                if phi > 0.0 {
                    report.orientation.0 += 1;
                } else {
                    report.orientation.1 += 1;
                }
            }
        }
    }
    Ok(report)
}

/// The special Lagrangian normal of a type III curve.
#[derive(Clone, Debug, PartialEq)]
pub struct SlReport {
    /// `c / (2e)` at `t = 0`.
    pub alpha: Complex64,
    /// Largest `| |alpha| - 1 |` and largest drift of `alpha` along `t`.
    pub alpha_modulus_defect: f64,
    pub alpha_drift: f64,
    pub beta: f64,
    /// Imaginary part of `beta` as computed, which should vanish.
    pub beta_imag: f64,
    /// `n(0, t0)`.
    pub n: ImOct,
    /// Largest `|n(s, t) - n|` over the grid.
    pub constancy: f64,
    /// Largest `| |c|^2 - 4 |e|^2 |` along the path.
    pub ce_residual: f64,
}

/// `n = (f6 - beta f7) / sqrt(1 + beta^2)` with `beta = (-1 + i alpha) / (-i + alpha)`
/// and `alpha = c / (2e)`; `coeffs` runs along the grid's `t` samples.
pub fn sl_normal(g: &CurveGrid, coeffs: &[PrimitiveCoeffs], tol: f64) -> Result<SlReport, CurveError> {
    let frames = g.frames.as_ref().ok_or(CurveError::NoFrames)?;
    if coeffs.len() != g.nt() || coeffs.is_empty() {
        return Err(CurveError::CoeffCount { expected: g.nt(), got: coeffs.len() });
    }
    let defect = coeffs.iter().map(|p| (p.a + p.b).norm()).fold(0.0, f64::max);
    if defect > tol {
        return Err(CurveError::NotTypeIII { defect });
    }
    let min_e = coeffs.iter().map(|p| p.e.norm()).fold(f64::INFINITY, f64::min);
    if !(min_e > tol) {
        return Err(CurveError::VanishingE { min: min_e });
    }
    let alphas: Vec<Complex64> = coeffs.iter().map(|p| p.c / (p.e * 2.0)).collect();
    let alpha = alphas[0];
    let alpha_modulus_defect = alphas.iter().map(|a| (a.norm() - 1.0).abs()).fold(0.0, f64::max);
    let alpha_drift = alphas.iter().map(|a| (a - alpha).norm()).fold(0.0, f64::max);
    let i = Complex64::i();
    let beta_c = (i * alpha - 1.0) / (alpha - i);
    let beta = beta_c.re;
    let normal = |m: &Mat7| (ImOct::column(m, 5) - ImOct::column(m, 6).scale(beta)).scale(1.0 / (1.0 + beta * beta).sqrt());
    let n = normal(&frames[0]);
    let constancy = frames.par_iter().map(|m| (normal(m) - n).norm()).reduce(|| 0.0, f64::max);
    let ce_residual = coeffs.iter().map(|p| (p.c.norm_sqr() - 4.0 * p.e.norm_sqr()).abs()).fold(0.0, f64::max);
    Ok(SlReport { alpha, alpha_modulus_defect, alpha_drift, beta, beta_imag: beta_c.im, n, constancy, ce_residual })
}

/// Unit vector best orthogonal to every point, and the largest `|<f1, n>|`.
/// A special Lagrangian cone lies in the hyperplane `n^perp`.
pub fn point_cloud_normal(g: &CurveGrid) -> (ImOct, f64) {
    let moment = g.points.iter().fold(Mat7::zeros(), |m, p| {
        let v = p.to_vec7();
        m + v * v.transpose()
    });
    let eig = SymmetricEigen::new(moment);
    let k = eig.eigenvalues.imin();
    let n = ImOct::from_vec7(&eig.eigenvectors.column(k).into_owned());
    let worst = g.points.iter().map(|p| p.dot(&n).abs()).fold(0.0, f64::max);
    (n, worst)
}

/// Lift `Phi = f6 + i f7` and its defect from holomorphicity.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct QuadricReport {
    pub lift: Vec<ComplexImOct>,
    /// Largest `|(Phi, Phi)|` for the complex bilinear pairing.
    pub isotropy: f64,
    /// Per point `|Phi_zbar - <Phi, Phi_zbar> Phi / |Phi|^2|` with the
    /// Hermitian pairing, NaN on the boundary.
    pub holomorphicity: Vec<f64>,
    pub max_holomorphicity: f64,
    /// Points without a usable frame, when frames were reconstructed.
    pub skipped: usize,
}

fn lift_of(m: &Mat7) -> ComplexImOct {
    ComplexImOct::from_parts(&ImOct::column(m, 5), &ImOct::column(m, 6))
}

fn quadric_from_lift(g: &CurveGrid, lift: Vec<ComplexImOct>) -> Result<QuadricReport, CurveError> {
    let diff = Diff::new(g, Stencil::Second)?;
    let nt = g.nt();
    let isotropy = lift.iter().filter(|l| l.norm().is_finite()).map(|l| l.bilinear(l).norm()).fold(0.0, f64::max);
    let at = |i: usize, j: usize| lift[i * nt + j];
    let cells: Vec<((usize, usize), f64)> = diff
        .interior()
        .into_par_iter()
        .map(|(i, j)| {
            let ds = (at(i + 1, j) - at(i - 1, j)).scale(Complex64::new(0.5 / diff.hs, 0.0));
            let dt = (at(i, j + 1) - at(i, j - 1)).scale(Complex64::new(0.5 / diff.ht, 0.0));
            let zbar = (ds + dt.scale(Complex64::i())).scale(Complex64::new(0.5, 0.0));
            let phi = at(i, j);
            let along = phi.hermitian(&zbar) / phi.hermitian(&phi);
            ((i, j), (zbar - phi.scale(along)).norm())
        })
        .collect();
    let mut holomorphicity = vec![f64::NAN; g.points.len()];
    for ((i, j), v) in cells {
        holomorphicity[i * nt + j] = v;
    }
    let max_holomorphicity = max_finite(&holomorphicity);
    Ok(QuadricReport { lift, isotropy, holomorphicity, max_holomorphicity, skipped: 0 })
}

/// The lift from stored frames.
pub fn quadric_lift(g: &CurveGrid) -> Result<QuadricReport, CurveError> {
    let frames = g.frames.as_ref().ok_or(CurveError::NoFrames)?;
    quadric_from_lift(g, frames.iter().map(lift_of).collect())
}

/// Frames rebuilt from points alone: `f2` along `f_s`, `f4` along the
/// normal part of `f_ss - f_tt`. Boundary and degenerate points get NaN.
pub fn reconstruct_frames(g: &CurveGrid) -> Result<Vec<Option<Mat7>>, CurveError> {
    let diff = Diff::new(g, Stencil::Second)?;
    let mut out = vec![None; g.points.len()];
    let cells: Vec<((usize, usize), Option<Mat7>)> = diff
        .interior()
        .into_par_iter()
        .map(|(i, j)| {
            let f1 = diff.at(i, j);
            let fs = diff.ds(i, j);
            let f2 = fs - f1.scale(f1.dot(&fs));
            if f2.norm() < 1e-8 {
                return ((i, j), None);
            }
            let f2 = f2.normalized();
            let f3 = f1.cross(&f2);
            let re = diff.dzz(i, j).re();
            let n = re - f1.scale(f1.dot(&re)) - f2.scale(f2.dot(&re)) - f3.scale(f3.dot(&re));
            if n.norm() < 1e-6 * re.norm().max(1.0) {
                return ((i, j), None);
            }
            ((i, j), g2_frame(&f1, &f2, &n.normalized()).ok())
        })
        .collect();
    for ((i, j), m) in cells {
        out[i * g.nt() + j] = m;
    }
    Ok(out)
}

/// The lift computed from reconstructed frames; interior points whose
/// neighbours lack a frame are skipped.
pub fn quadric_lift_from_points(g: &CurveGrid) -> Result<QuadricReport, CurveError> {
    let frames = reconstruct_frames(g)?;
    let nan = ComplexImOct::from_real(&ImOct([f64::NAN; 7]));
    let mut lift: Vec<ComplexImOct> = frames.iter().map(|m| m.as_ref().map_or(nan, lift_of)).collect();
    // Frames are only defined up to the sign of f4; align neighbours along t
    // and then along s so differences are meaningful.
    let nt = g.nt();
    for p in 0..lift.len() {
        let prev = if p % nt > 0 { p - 1 } else if p >= nt { p - nt } else { continue };
        if lift[prev].norm().is_finite() && lift[p].hermitian(&lift[prev]).re < 0.0 {
            lift[p] = lift[p].scale(Complex64::new(-1.0, 0.0));
        }
    }
    let mut report = quadric_from_lift(g, lift)?;
    let skipped = (1..g.ns() - 1)
        .flat_map(|i| (1..nt - 1).map(move |j| i * nt + j))
        .filter(|p| report.holomorphicity[*p].is_nan())
        .count();
    report.skipped = skipped;
    Ok(report)
}

/// Largest `| <f1_s, f1_s> - 4 c(t)^2 |`, `| <f1_t, f1_t> - 4 c(t)^2 |` and
/// `| <f1_s, f1_t> |` over interior points, for real `c` along `t`.
pub fn metric_residual(g: &CurveGrid, c: &[f64]) -> Result<f64, CurveError> {
    if c.len() != g.nt() {
        return Err(CurveError::CoeffCount { expected: g.nt(), got: c.len() });
    }
    let diff = Diff::new(g, Stencil::Second)?;
    Ok(diff
        .interior()
        .into_par_iter()
        .map(|(i, j)| {
            let (fs, ft) = (diff.ds(i, j), diff.dt(i, j));
            let target = 4.0 * c[j] * c[j];
            (fs.dot(&fs) - target).abs().max((ft.dot(&ft) - target).abs()).max(fs.dot(&ft).abs())
        })
        .reduce(|| 0.0, f64::max))
}

/// `<f1_s, f1_s> / c(t0)^2` averaged over the first interior `t` column;
/// this pins the normalization of the metric.
pub fn metric_normalization(g: &CurveGrid, c0: f64) -> Result<f64, CurveError> {
    let diff = Diff::new(g, Stencil::Second)?;
    let vals: Vec<f64> = (1..g.ns() - 1).map(|i| diff.ds(i, 1).norm().powi(2) / (c0 * c0)).collect();
    Ok(vals.iter().sum::<f64>() / vals.len() as f64)
}

/// Largest gap between the normal part of `f1_zz` and `2 c d (f4 - i f5)`.
pub fn second_form_residual(g: &CurveGrid, coeffs: &[PrimitiveCoeffs]) -> Result<f64, CurveError> {
    let frames = g.frames.as_ref().ok_or(CurveError::NoFrames)?;
    if coeffs.len() != g.nt() {
        return Err(CurveError::CoeffCount { expected: g.nt(), got: coeffs.len() });
    }
    let diff = Diff::new(g, Stencil::Second)?;
    Ok(diff
        .interior()
        .into_par_iter()
        .map(|(i, j)| {
            let m = &frames[i * g.nt() + j];
            let zz = diff.dzz(i, j);
            let tangent: Vec<ComplexImOct> = (0..3).map(|k| ComplexImOct::from_real(&ImOct::column(m, k))).collect();
            let normal = tangent.iter().fold(zz, |acc, f| acc - f.scale(zz.bilinear(f)));
            let p = &coeffs[j];
            let want = ComplexImOct::from_parts(&ImOct::column(m, 3), &ImOct::column(m, 4).scale(-1.0))
                .scale(p.c * p.d * 2.0);
            (normal - want).norm()
        })
        .reduce(|| 0.0, f64::max))
}

/// `max |f1(s + s_per, t_{j + t_shift}) - f1(s, t_j)|` over `s_samples` and
/// every `j` with a shifted partner on the frame path.
pub fn closure_residual(a: &Mat7, fp: &FramePath, s_samples: &[f64], s_per: f64, t_shift: usize) -> f64 {
    let planes = RotationPlanes::new(a);
    let n = fp.frames.len();
    if t_shift >= n {
        return f64::NAN;
    }
    s_samples
        .par_iter()
        .map(|s| {
            let (e0, e1) = (planes.exp(*s), planes.exp(s + s_per));
            (0..n - t_shift)
                .map(|j| ((e1 * fp.frames[j + t_shift]).column(0) - (e0 * fp.frames[j]).column(0)).norm())
                .fold(0.0, f64::max)
        })
        .reduce(|| 0.0, f64::max)
}

/// The torus element with rotation rates `lambda1`, `lambda2` and
/// `lambda1 + lambda2`.
pub fn torus_element(lambda1: f64, lambda2: f64) -> Mat7 {
    use crate::g2_algebra::G2Basis;
    G2Basis::Y3.matrix() * lambda1 + G2Basis::Z5.matrix() * lambda2
}

/// Input for a full curve build.
///
/// The Toda state fixes `A = P(0)`. `lambda_spec` and `a_coords`, when
/// present, are checked against it rather than overriding it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CurveSeed {
    pub a1: f64,
    pub b1: f64,
    pub v1: f64,
    pub v2: f64,
    pub v3: f64,
    #[serde(default, rename = "lambda_spec", alias = "lambda-spec")]
    pub lambda_spec: Option<[f64; 2]>,
    #[serde(default, rename = "a_coords", alias = "A")]
    pub a_coords: Option<[f64; 14]>,
    #[serde(default = "CurveSeed::default_t_end")]
    pub t_end: f64,
    #[serde(default = "CurveSeed::default_step")]
    pub step: f64,
    #[serde(default = "CurveSeed::default_samples")]
    pub s_samples: usize,
    /// Spacing in `s`; defaults to the `t` spacing of the grid.
    #[serde(default)]
    pub s_step: Option<f64>,
    #[serde(default = "CurveSeed::default_samples")]
    pub t_samples: usize,
}

impl CurveSeed {
    fn default_t_end() -> f64 {
        0.5
    }

    fn default_step() -> f64 {
        1e-3
    }

    fn default_samples() -> usize {
        100
    }

    pub fn state(&self) -> TodaState {
        TodaState::new(self.a1, self.b1, self.v1, self.v2, self.v3)
    }

    /// A seed on the given state with default sampling.
    pub fn from_state(s: &TodaState) -> CurveSeed {
        CurveSeed {
            a1: s.a1,
            b1: s.b1,
            v1: s.v1,
            v2: s.v2,
            v3: s.v3,
            lambda_spec: None,
            a_coords: None,
            t_end: Self::default_t_end(),
            step: Self::default_step(),
            s_samples: Self::default_samples(),
            s_step: None,
            t_samples: Self::default_samples(),
        }
    }
}

/// Everything produced from a seed.
#[derive(Clone, Debug)]
pub struct SeedCurve {
    pub run: AksRun,
    pub grid: CurveGrid,
    /// Coefficients at the grid's `t` samples.
    pub coeffs: Vec<PrimitiveCoeffs>,
    /// Period of `exp(sA)` when the spectrum is detected as rational.
    pub s_period: Option<Rationality>,
    /// Stride from frame path to grid in `t`.
    pub stride: usize,
}

/// Integrate, reconstruct frames and sample the grid.
pub fn build_from_seed(seed: &CurveSeed) -> Result<SeedCurve, CurveError> {
    let coeffs = seed.state().coeffs();
    let run = aks_flow::run(&coeffs, seed.t_end, seed.step)?;
    let a = run.seed.a;
    if let Some(c) = &seed.a_coords {
        let defect = (G2AlgCoords(*c).to_matrix() - a).amax();
        if !(defect <= PATTERN) {
            return Err(CurveError::SeedMismatch { field: "a_coords", defect });
        }
    }
    let [mu1, mu2, _] = rotation_angles(&a);
    if let Some([l1, l2]) = seed.lambda_spec {
        let mut given = [l1.abs(), l2.abs()];
        given.sort_by(f64::total_cmp);
        let defect = (given[0] - mu1).abs().max((given[1] - mu2).abs());
        if !(defect <= 1e-8 * mu2.max(1.0)) {
            return Err(CurveError::SeedMismatch { field: "lambda_spec", defect });
        }
    }
    if seed.s_samples < 3 || seed.t_samples < 3 {
        return Err(CurveError::TooSmall { axis: "seed", need: 3, got: seed.s_samples.min(seed.t_samples) });
    }
    let stride = ((run.frames.times.len() - 1) / (seed.t_samples - 1)).max(1);
    let sub = run.frames.subsample(stride);
    let n = seed.t_samples.min(sub.times.len());
    let fp = FramePath { times: sub.times[..n].to_vec(), frames: sub.frames[..n].to_vec(), a };
    let s_step = seed.s_step.unwrap_or(run.flow.step * stride as f64);
    let grid = build_grid(&a, &fp, &uniform_samples(0.0, s_step, seed.s_samples))?;
    let coeffs = run.flow.subsample(stride).coeff_path().iter().take(n).map(|c| c.to_primitive()).collect();
    let s_period = rationality(mu1, mu2, MAX_DENOMINATOR);
    Ok(SeedCurve { run, grid, coeffs, s_period, stride })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::aks_flow::run;
    use crate::g2_algebra::{G2Basis, SigmaConjugator};
    use crate::octonion::is_g2;
    use crate::testutil::{expm_taylor, random_coords, rng};
    use crate::toda_lattice::RealCoeffs;
    use std::f64::consts::PI;

    #[test]
    fn exp_matches_taylor_and_group_law() {
        let mut r = rng(11);
        for _ in 0..10 {
            let a = random_coords(&mut r).to_matrix();
            let planes = RotationPlanes::new(&a);
            for s in [0.0, 0.3, -1.7, 4.0] {
                let e = planes.exp(s);
                assert!((e - expm_taylor(&(a * s))).amax() < 1e-12);
                assert!(is_g2(&e, 1e-12));
            }
            assert!((planes.exp(0.4) * planes.exp(1.1) - planes.exp(1.5)).amax() < 1e-12);
        }
        assert_eq!(exp_as(&G2Basis::X2.matrix(), 0.0).unwrap(), Mat7::identity());
        assert!(matches!(exp_as(&Mat7::identity(), 1.0), Err(CurveError::NotInG2(_))));
    }

    #[test]
    fn exp_reaches_conjugator() {
        let a = G2Basis::Y3.matrix() + G2Basis::Z5.matrix() * 2.0;
        let h = exp_as(&a, PI / 3.0).unwrap();
        assert!((h - SigmaConjugator::closed_form().h).amax() < 1e-14);
    }

    #[test]
    fn torus_period() {
        let a = torus_element(1.0, 2.0);
        let planes = RotationPlanes::new(&a);
        let angles = planes.angles();
        assert!((angles[0] - 1.0).abs() < 1e-14 && (angles[1] - 2.0).abs() < 1e-14 && (angles[2] - 3.0).abs() < 1e-14);
        let per = aks_flow::rationality(1.0, 2.0, 10_000).unwrap().period;
        assert!((planes.exp(per) - Mat7::identity()).norm() < 1e-13);
        assert!((planes.exp(per / 2.0) - Mat7::identity()).norm() > 1.0);
    }

    #[test]
    fn constant_curve_is_vacuous() {
        let fp = FramePath { times: uniform_samples(0.0, 0.1, 5), frames: vec![Mat7::identity(); 5], a: Mat7::zeros() };
        let g = build_grid(&Mat7::zeros(), &fp, &uniform_samples(0.0, 0.1, 5)).unwrap();
        assert_eq!(almost_complex_residual(&g).unwrap(), 0.0);
        assert_eq!(cone_associativity(&g).unwrap().degenerate.len(), 9);
    }

    #[test]
    fn grid_table_round_trip() {
        let r = RealCoeffs { a1: 0.1, b1: 0.2, c1: 0.8, d1: 0.6, e1: 0.5 };
        let run = run(&r, 0.05, 0.01).unwrap();
        let g = build_grid(&run.seed.a, &run.frames, &uniform_samples(0.0, 0.01, 4)).unwrap();
        assert!(g.frame_defect() < 1e-12);
        let ac = almost_complex_field(&g, Stencil::Second).unwrap();
        let table = g.to_table(&[("ac", ac)]);
        assert_eq!(table.columns.len(), 10);
        assert_eq!(table.rows.len(), 24);
        let back = CurveGrid::from_table(&table).unwrap();
        assert_eq!(back.points, g.points);
        assert_eq!((back.s, back.t), (g.s.clone(), g.t.clone()));
        assert!(matches!(Diff::new(&CurveGrid { s: vec![0.0, 1.0, 3.0], ..g.clone() }, Stencil::Second), Err(CurveError::NonUniform { .. })));
    }

    #[test]
    fn generic_curve_is_almost_complex() {
        let r = RealCoeffs { a1: 0.2, b1: -0.4, c1: 0.9, d1: 0.5, e1: 0.7 };
        let run = run(&r, 0.2, 1e-3).unwrap();
        let g = build_grid(&run.seed.a, &run.frames, &uniform_samples(0.0, 1e-3, 30)).unwrap();
        assert!(almost_complex_residual(&g).unwrap() < 1e-5);
        let fourth = almost_complex_field(&g, Stencil::Fourth).unwrap();
        assert!(max_finite(&fourth) < 1e-9);
        let cone = cone_associativity(&g).unwrap();
        assert!(cone.residual < 1e-5 && cone.degenerate.is_empty());
        let quad = quadric_lift(&g).unwrap();
        assert!(quad.isotropy < 1e-12);
        assert!(quad.max_holomorphicity > 1.0);
    }
}
