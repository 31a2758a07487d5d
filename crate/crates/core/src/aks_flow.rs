//! The Adler-Kostant-Symes route to S^1-symmetric frames.
//!
//! A twisted loop `x(lambda) = sum_j x_j lambda^j` with `x_j` in `h_j` evolves
//! by `dx/dt = [x, pi_plus(x)]`. On the invariant set
//! `M = { v_0 + v_-1 / lambda - conj(v_-1) lambda }` this is the Toda lattice:
//! with `u_0 = -i v_0 / 2` and `u_-1 = -i v_-1`, `x(1) = i P` and
//! `pi_plus(x)(1) = Q`. The frame `k(t)` solves `k^-1 k_t = Q`, `k(0) = I`,
//! and conjugates the constant `A = P(0)` into `P(t)`.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use num_complex::Complex64;
use thiserror::Error;

use crate::export::Table;
use crate::g2_algebra::{cmatrix_to_coords, matrix_to_coords, project_matrix, G2Basis, G2Error};
use crate::octonion::{g2_frame, ImOct};
use crate::primitive_frame::{read_u_minus1, u_minus1_matrix, PrimitiveCoeffs};
use crate::toda_lattice::{rotation_angles, step_count, RealCoeffs, TodaError};
use crate::tolerances::{DIVERGENCE_NORM, PATTERN, RATIO_MATCH};
use crate::{cmax, complexify, conj, CMat7, Mat7};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AksError {
    #[error("{which} fails its grading check by {defect:.3e}")]
    Grading { which: &'static str, defect: f64 },
    #[error("loop element is off the invariant set: {reason} ({defect:.3e})")]
    NotInM { reason: &'static str, defect: f64 },
    #[error(transparent)]
    Step(#[from] TodaError),
    #[error("flow diverged after t = {last_time}")]
    Divergence { last_time: f64 },
    #[error("frame reprojection failed at t = {time}: column defect {defect:.3e}")]
    Reprojection { time: f64, defect: f64 },
    #[error("time grids differ: {frames} frames against {matrices} matrices")]
    MismatchedGrid { frames: usize, matrices: usize },
}

/// Tolerance for membership in the invariant set.
pub const M_TOLERANCE: f64 = 1e-9;

/// A Laurent polynomial in `lambda` with complex 7x7 coefficients.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct LoopElement {
    pub coeffs: BTreeMap<i32, CMat7>,
}

impl LoopElement {
    pub fn from_terms(terms: impl IntoIterator<Item = (i32, CMat7)>) -> LoopElement {
        let mut x = LoopElement::default();
        for (j, m) in terms {
            *x.coeffs.entry(j).or_insert_with(CMat7::zeros) += m;
        }
        x
    }

    pub fn coeff(&self, j: i32) -> CMat7 {
        self.coeffs.get(&j).copied().unwrap_or_else(CMat7::zeros)
    }

    /// Lowest and highest powers present.
    pub fn degree_bounds(&self) -> Option<(i32, i32)> {
        Some((*self.coeffs.keys().next()?, *self.coeffs.keys().next_back()?))
    }

    pub fn eval(&self, lambda: Complex64) -> CMat7 {
        self.coeffs.iter().fold(CMat7::zeros(), |acc, (j, m)| acc + m * lambda.powi(*j))
    }

    pub fn scale(&self, k: Complex64) -> LoopElement {
        LoopElement { coeffs: self.coeffs.iter().map(|(j, m)| (*j, m * k)).collect() }
    }

    pub fn add(&self, other: &LoopElement) -> LoopElement {
        LoopElement::from_terms(self.coeffs.iter().chain(other.coeffs.iter()).map(|(j, m)| (*j, *m)))
    }

    /// `self + k * other`.
    pub fn axpy(&self, k: f64, other: &LoopElement) -> LoopElement {
        self.add(&other.scale(Complex64::new(k, 0.0)))
    }

    /// Pointwise commutator in `lambda`.
    pub fn bracket(&self, other: &LoopElement) -> LoopElement {
        let mut out = LoopElement::default();
        for (i, a) in &self.coeffs {
            for (j, b) in &other.coeffs {
                *out.coeffs.entry(i + j).or_insert_with(CMat7::zeros) += a * b - b * a;
            }
        }
        out.prune();
        out
    }

    /// Drop coefficients that are exactly zero.
    pub fn prune(&mut self) {
        self.coeffs.retain(|_, m| m.iter().any(|z| *z != Complex64::new(0.0, 0.0)));
    }

    pub fn max_norm(&self) -> f64 {
        self.coeffs.values().map(|m| m.norm()).fold(0.0, f64::max)
    }

    /// Largest `|x_j - (h_j part of x_j)|`.
    pub fn twisted_defect(&self) -> f64 {
        self.coeffs
            .iter()
            .map(|(j, m)| cmax(&(project_matrix(m, *j) - m)))
            .fold(0.0, f64::max)
    }

    /// Check membership in `M` within `tol`.
    pub fn check_m(&self, tol: f64) -> Result<(), AksError> {
        let fail = |reason, defect: f64| {
            if defect > tol || defect.is_nan() {
                Err(AksError::NotInM { reason, defect })
            } else {
                Ok(())
            }
        };
        let stray = self
            .coeffs
            .iter()
            .filter(|(j, _)| !(-1..=1).contains(*j))
            .map(|(_, m)| cmax(m))
            .fold(0.0, f64::max);
        fail("powers outside -1..=1", stray)?;
        let v0 = self.coeff(0);
        fail("v0 has a real part", v0.iter().fold(0.0, |m, z| m.max(z.re.abs())))?;
        let pattern_defect = match cmatrix_to_coords(&v0, tol) {
            Ok(_) => 0.0,
            Err(G2Error::NotInG2 { residual, .. }) => residual,
        };
        fail("v0 is not in g2", pattern_defect)?;
        fail("v0 is not in h_0", cmax(&(project_matrix(&v0, 0) - v0)))?;
        let vm = self.coeff(-1);
        fail("v_-1 is not in h_-1", cmax(&(project_matrix(&vm, -1) - vm)))?;
        fail("x_1 is not -conj(x_-1)", cmax(&(self.coeff(1) + conj(&vm))))?;
        Ok(())
    }
}

/// `pi_plus`: the real part of `x_0` plus `x_-j lambda^-j + conj(x_-j) lambda^j`.
pub fn pi_plus(x: &LoopElement) -> LoopElement {
    let mut out = LoopElement::default();
    if let Some(x0) = x.coeffs.get(&0) {
        out.coeffs.insert(0, x0.map(|z| Complex64::new(z.re, 0.0)));
    }
    for (j, m) in x.coeffs.range(..0) {
        *out.coeffs.entry(*j).or_insert_with(CMat7::zeros) += m;
        *out.coeffs.entry(-j).or_insert_with(CMat7::zeros) += conj(m);
    }
    out.prune();
    out
}

/// `pi_minus = x - pi_plus(x)`: `i Im(x_0)` plus `(x_j - conj(x_-j)) lambda^j`.
pub fn pi_minus(x: &LoopElement) -> LoopElement {
    let mut out = LoopElement::default();
    if let Some(x0) = x.coeffs.get(&0) {
        out.coeffs.insert(0, x0.map(|z| Complex64::new(0.0, z.im)));
    }
    let mut powers: Vec<i32> = x.coeffs.keys().filter(|j| **j != 0).map(|j| j.abs()).collect();
    powers.sort_unstable();
    powers.dedup();
    for j in powers {
        out.coeffs.insert(j, x.coeff(j) - conj(&x.coeff(-j)));
    }
    out.prune();
    out
}

/// `[x, pi_plus(x)]`.
pub fn lax_field(x: &LoopElement) -> LoopElement {
    x.bracket(&pi_plus(x))
}

/// Initial loop and the constant `A = 2 h_0 + h_-1 + conj(h_-1)`.
#[derive(Clone, Debug, PartialEq)]
pub struct AksSeed {
    pub initial: LoopElement,
    pub a: Mat7,
}

/// `h_0 = a1 Y3 + b1 Z5`.
pub fn h0_matrix(a1: f64, b1: f64) -> Mat7 {
    G2Basis::Y3.matrix() * a1 + G2Basis::Z5.matrix() * b1
}

/// The `h_-1` element with amplitudes `c1, d1, e1`.
pub fn h_minus1_matrix(c1: f64, d1: f64, e1: f64) -> CMat7 {
    u_minus1_matrix(&PrimitiveCoeffs::real(0.0, 0.0, c1, d1, e1))
}

/// `xi_0 = 2 i h_0 + i h_-1 / lambda + i conj(h_-1) lambda`.
pub fn build_initial(h0: &Mat7, h_minus1: &CMat7) -> Result<AksSeed, AksError> {
    let coords = matrix_to_coords(h0).map_err(|G2Error::NotInG2 { residual, .. }| AksError::Grading {
        which: "h0",
        defect: residual,
    })?;
    let off_torus = G2Basis::ALL
        .iter()
        .filter(|b| !matches!(b, G2Basis::Y3 | G2Basis::Z5))
        .map(|b| coords.get(*b).abs())
        .fold(0.0, f64::max);
    if off_torus > PATTERN {
        return Err(AksError::Grading { which: "h0", defect: off_torus });
    }
    let defect = cmax(&(project_matrix(h_minus1, -1) - h_minus1));
    if defect > PATTERN || defect.is_nan() {
        return Err(AksError::Grading { which: "h_minus1", defect });
    }
    let i = Complex64::i();
    let initial = LoopElement::from_terms([
        (0, complexify(h0) * (2.0 * i)),
        (-1, h_minus1 * i),
        (1, conj(h_minus1) * i),
    ]);
    let a = h0 * 2.0 + (h_minus1 + conj(h_minus1)).map(|z| z.re);
    let mut initial = initial;
    initial.prune();
    Ok(AksSeed { initial, a })
}

/// Seed for real Toda coefficients; `A` is then the `P` matrix at `t = 0`.
pub fn seed_from_coeffs(r: &RealCoeffs) -> Result<AksSeed, AksError> {
    build_initial(&h0_matrix(r.a1, r.b1), &h_minus1_matrix(r.c1, r.d1, r.e1))
}

/// Sampled flow on a uniform grid.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct FlowResult {
    pub times: Vec<f64>,
    pub states: Vec<LoopElement>,
    pub step: f64,
}

impl FlowResult {
    /// Every `stride`-th state.
    pub fn subsample(&self, stride: usize) -> FlowResult {
        let stride = stride.max(1);
        FlowResult {
            times: self.times.iter().step_by(stride).copied().collect(),
            states: self.states.iter().step_by(stride).cloned().collect(),
            step: self.step * stride as f64,
        }
    }

    /// Toda coefficients at every sample.
    pub fn coeff_path(&self) -> Vec<RealCoeffs> {
        self.states.iter().map(to_coeffs).collect()
    }
}

fn rk4(x: &LoopElement, h: f64) -> LoopElement {
    let k1 = lax_field(x);
    let k2 = lax_field(&x.axpy(0.5 * h, &k1));
    let k3 = lax_field(&x.axpy(0.5 * h, &k2));
    let k4 = lax_field(&x.axpy(h, &k3));
    let incr = k1.add(&k2.scale(Complex64::new(2.0, 0.0))).add(&k3.scale(Complex64::new(2.0, 0.0))).add(&k4);
    let mut next = x.axpy(h / 6.0, &incr);
    next.prune();
    next
}

/// Integrate `dx/dt = [x, pi_plus(x)]` from `x0` in `M`.
pub fn flow(x0: &LoopElement, t_end: f64, step: f64) -> Result<FlowResult, AksError> {
    x0.check_m(M_TOLERANCE)?;
    let n = step_count(t_end, step)?;
    let h = t_end / n as f64;
    let mut times = Vec::with_capacity(n + 1);
    let mut states = Vec::with_capacity(n + 1);
    times.push(0.0);
    states.push(x0.clone());
    for i in 1..=n {
        let next = rk4(states.last().unwrap(), h);
        if !(next.max_norm() <= DIVERGENCE_NORM) {
            return Err(AksError::Divergence { last_time: (i - 1) as f64 * h });
        }
        times.push(i as f64 * h);
        states.push(next);
    }
    Ok(FlowResult { times, states, step: h })
}

/// `P = -i x(1)`.
pub fn p_at_one(x: &LoopElement) -> Mat7 {
    x.eval(Complex64::new(1.0, 0.0)).map(|z| z.im)
}

/// `Q = pi_plus(x)(1)`.
pub fn q_at_one(x: &LoopElement) -> Mat7 {
    pi_plus(x).eval(Complex64::new(1.0, 0.0)).map(|z| z.re)
}

/// Toda coefficients read through `u_0 = -i v_0 / 2`, `u_-1 = -i v_-1`.
pub fn to_coeffs(x: &LoopElement) -> RealCoeffs {
    let i = Complex64::i();
    let u0 = x.coeff(0) * (-0.5 * i);
    let um = x.coeff(-1) * (-i);
    let (c, d, e) = read_u_minus1(&um);
    RealCoeffs { a1: u0[(2, 1)].re, b1: u0[(4, 3)].re, c1: c.re, d1: d.re, e1: e.re }
}

/// `tr(X^2), tr(X^4), tr(X^6)`; these fix the spectrum of an element of
/// `so(7, C)`.
pub fn spectral_invariants(m: &CMat7) -> [Complex64; 3] {
    let m2 = m * m;
    let m4 = m2 * m2;
    [m2.trace(), m4.trace(), (m4 * m2).trace()]
}

/// Frames `k(t)` along a flow.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct FramePath {
    pub times: Vec<f64>,
    pub frames: Vec<Mat7>,
    pub a: Mat7,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct FrameOptions {
    /// Pull each frame back onto G2 after every step.
    pub reproject: bool,
}

impl Default for FrameOptions {
    fn default() -> Self {
        FrameOptions { reproject: true }
    }
}

/// Rebuild a nearby G2 element from columns 1, 2 and 4.
pub fn reproject(k: &Mat7) -> Result<Mat7, f64> {
    let col = |j| ImOct::column(k, j);
    let c1 = col(0);
    let n1 = c1.norm();
    let f1 = c1.scale(1.0 / n1);
    let c2 = col(1);
    let r2 = c2 - f1.scale(f1.dot(&c2));
    let n2 = r2.norm();
    let f2 = r2.scale(1.0 / n2);
    let f3 = f1.cross(&f2);
    let c4 = col(3);
    let r4 = c4 - f1.scale(f1.dot(&c4)) - f2.scale(f2.dot(&c4)) - f3.scale(f3.dot(&c4));
    let n4 = r4.norm();
    let defect = [n1, n2, n4].iter().map(|n| (n - 1.0).abs()).fold(0.0, f64::max);
    if !(defect < 0.1) {
        return Err(defect);
    }
    g2_frame(&f1, &f2, &r4.scale(1.0 / n4)).map_err(|_| defect)
}

/// Integrate `k' = k Q(t)` with `k(0) = I` and reprojection onto G2.
pub fn frame_path(fl: &FlowResult, a: &Mat7) -> Result<FramePath, AksError> {
    frame_path_with(fl, a, FrameOptions::default())
}

/// As [`frame_path`] with explicit options. Midpoint values of `Q` come from
/// the cubic Hermite interpolant of the flow, so the scheme keeps order 4.
pub fn frame_path_with(fl: &FlowResult, a: &Mat7, opts: FrameOptions) -> Result<FramePath, AksError> {
    let mut frames = Vec::with_capacity(fl.states.len());
    let mut k = Mat7::identity();
    if fl.states.is_empty() {
        return Ok(FramePath { times: Vec::new(), frames, a: *a });
    }
    frames.push(k);
    let fields: Vec<LoopElement> = fl.states.iter().map(lax_field).collect();
    for n in 0..fl.states.len() - 1 {
        let h = fl.times[n + 1] - fl.times[n];
        let (x0, x1) = (&fl.states[n], &fl.states[n + 1]);
        let mid = x0
            .add(x1)
            .scale(Complex64::new(0.5, 0.0))
            .axpy(h / 8.0, &fields[n].axpy(-1.0, &fields[n + 1]));
        let (q0, qm, q1) = (q_at_one(x0), q_at_one(&mid), q_at_one(x1));
        let k1 = k * q0;
        let k2 = (k + k1 * (0.5 * h)) * qm;
        let k3 = (k + k2 * (0.5 * h)) * qm;
        let k4 = (k + k3 * h) * q1;
        k += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
        if opts.reproject {
            k = reproject(&k).map_err(|defect| AksError::Reprojection { time: fl.times[n + 1], defect })?;
        }
        frames.push(k);
    }
    Ok(FramePath { times: fl.times.clone(), frames, a: *a })
}

impl FramePath {
    /// Columns `t, k11, k12, ..., k77` with `k` row-major.
    pub fn to_table(&self) -> Table {
        let mut cols = vec!["t".to_string()];
        for r in 1..=7 {
            for c in 1..=7 {
                cols.push(format!("k{r}{c}"));
            }
        }
        let mut table = Table::new(cols);
        for (t, k) in self.times.iter().zip(&self.frames) {
            let mut row = vec![*t];
            for r in 0..7 {
                for c in 0..7 {
                    row.push(k[(r, c)]);
                }
            }
            table.push(row);
        }
        table
    }

    /// Every `stride`-th frame.
    pub fn subsample(&self, stride: usize) -> FramePath {
        let stride = stride.max(1);
        FramePath {
            times: self.times.iter().step_by(stride).copied().collect(),
            frames: self.frames.iter().step_by(stride).copied().collect(),
            a: self.a,
        }
    }
}

/// `max_t ||k^T A k - P(t)||_F`. The transpose stands in for the inverse,
/// so drift off the orthogonal group shows up here too.
pub fn aks_consistency(fp: &FramePath, p_of_t: &[Mat7]) -> Result<f64, AksError> {
    if fp.frames.len() != p_of_t.len() {
        return Err(AksError::MismatchedGrid { frames: fp.frames.len(), matrices: p_of_t.len() });
    }
    Ok(fp
        .frames
        .iter()
        .zip(p_of_t)
        .map(|(k, p)| (k.transpose() * fp.a * k - p).norm())
        .fold(0.0, f64::max))
}

/// A detected rational relation `lambda1 / lambda2 = p / q`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Rationality {
    /// Smallest `s > 0` with `s lambda1, s lambda2` in `2 pi Z`.
    pub period: f64,
    pub p: u64,
    pub q: u64,
}

/// Continued fraction test for `|lambda1 / lambda2| = p / q` with
/// `q <= max_den`, accepting a convergent within a relative gap of
/// [`RATIO_MATCH`].
pub fn rationality(lambda1: f64, lambda2: f64, max_den: u64) -> Option<Rationality> {
    let (l1, l2) = (lambda1.abs(), lambda2.abs());
    if !(l1.is_finite() && l2.is_finite()) || (l1 == 0.0 && l2 == 0.0) {
        return None;
    }
    if l2 == 0.0 {
        return Some(Rationality { period: 2.0 * PI / l1, p: 1, q: 0 });
    }
    if l1 == 0.0 {
        return Some(Rationality { period: 2.0 * PI / l2, p: 0, q: 1 });
    }
    let r = l1 / l2;
    let (mut h1, mut h2) = (1u64, 0u64);
    let (mut k1, mut k2) = (0u64, 1u64);
    let mut x = r;
    for _ in 0..64 {
        let a = x.floor();
        if a > 1e15 {
            return None;
        }
        let a = a as u64;
        let h = a.checked_mul(h1)?.checked_add(h2)?;
        let k = a.checked_mul(k1)?.checked_add(k2)?;
        if k > max_den {
            return None;
        }
        if k > 0 && (r - h as f64 / k as f64).abs() <= RATIO_MATCH * r {
            return Some(Rationality { period: 2.0 * PI * k as f64 / l2, p: h, q: k });
        }
        let frac = x - a as f64;
        if frac == 0.0 {
            return None;
        }
        x = 1.0 / frac;
        (h2, h1, k2, k1) = (h1, h, k1, k);
    }
    None
}

/// The two smallest rotation angles of `A`; the third is their sum.
pub fn spectrum_pair(a: &Mat7) -> (f64, f64) {
    let [m1, m2, _] = rotation_angles(a);
    (m1, m2)
}

/// A full run from real coefficients: seed, flow and frames.
#[derive(Clone, Debug)]
pub struct AksRun {
    pub seed: AksSeed,
    pub flow: FlowResult,
    pub frames: FramePath,
}

pub fn run(r: &RealCoeffs, t_end: f64, step: f64) -> Result<AksRun, AksError> {
    let seed = seed_from_coeffs(r)?;
    let fl = flow(&seed.initial, t_end, step)?;
    let frames = frame_path(&fl, &seed.a)?;
    Ok(AksRun { seed, flow: fl, frames })
}
