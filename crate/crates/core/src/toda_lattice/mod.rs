//! S^1-symmetric primitive frames: the G2 periodic Toda lattice.
//!
//! With real coefficients depending only on `t`, the structure equations
//! reduce to an ODE for `(a1, b1, v1, v2, v3)`, where the log-variables give
//! `c1 = exp(v1)`, `d1 = exp(v2 - v1)` and `e1 = exp(v3 - v2)`. The matrices
//! `P = g^-1 A g` and `Q = g^-1 g_t` form a Lax pair, `P_t = [P, Q]`.

mod elliptic;

pub use elliptic::{agm, carlson_rf, elliptic_k, incomplete_f, jacobi_elliptic, jacobi_sn, sn_period};

use nalgebra::SymmetricEigen;
use thiserror::Error;

use crate::export::Table;
use crate::g2_algebra::bracket;
use crate::primitive_frame::{connection_matrix, PrimitiveCoeffs};
use crate::tolerances::{DIVERGENCE_NORM, EXPONENT_GUARD, INVARIANT_SET};
use crate::Mat7;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TodaError {
    #[error("step and end time must be positive and finite (step {step}, t_end {t_end})")]
    InvalidStep { step: f64, t_end: f64 },
    #[error("exponent {exponent:.1} exceeds the overflow guard")]
    Overflow { exponent: f64 },
    #[error("trajectory diverged after t = {last_time}")]
    Divergence { last_time: f64 },
    #[error("need at least {needed} samples, got {got}")]
    TooShort { needed: usize, got: usize },
    #[error("{name} = {value} must be strictly positive to take its logarithm")]
    NonPositive { name: &'static str, value: f64 },
    #[error("state is off the type (iii) invariant set: |a1 + b1| = {sum_residual:.3e}, |exp(2(v1 + v2)) - 4 exp(2 v3)| = {product_residual:.3e}")]
    OffInvariantSet { sum_residual: f64, product_residual: f64 },
    #[error("no real roots: 4 C2^3 < 27 C1 for C1 = {c1}, C2 = {c2}")]
    NoRealRoots { c1: f64, c2: f64 },
    #[error("constants must be positive (C1 = {c1}, C2 = {c2})")]
    InvalidConstants { c1: f64, c2: f64 },
    #[error("elliptic modulus {k} outside [0, 1]")]
    ModulusOutOfRange { k: f64 },
    #[error("the period is infinite at modulus 1")]
    InfinitePeriod,
}

/// A point `(a1, b1, v1, v2, v3)` of the Toda phase space.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct TodaState {
    pub a1: f64,
    pub b1: f64,
    pub v1: f64,
    pub v2: f64,
    pub v3: f64,
}

/// Real coefficients `(a1, b1, c1, d1, e1)`; `c1, d1, e1` may vanish here.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct RealCoeffs {
    pub a1: f64,
    pub b1: f64,
    pub c1: f64,
    pub d1: f64,
    pub e1: f64,
}

impl TodaState {
    pub fn new(a1: f64, b1: f64, v1: f64, v2: f64, v3: f64) -> TodaState {
        TodaState { a1, b1, v1, v2, v3 }
    }

    pub fn to_array(&self) -> [f64; 5] {
        [self.a1, self.b1, self.v1, self.v2, self.v3]
    }

    pub fn from_array(x: [f64; 5]) -> TodaState {
        TodaState::new(x[0], x[1], x[2], x[3], x[4])
    }

    pub fn sum_v(&self) -> f64 {
        self.v1 + self.v2 + self.v3
    }

    pub fn coeffs(&self) -> RealCoeffs {
        RealCoeffs {
            a1: self.a1,
            b1: self.b1,
            c1: self.v1.exp(),
            d1: (self.v2 - self.v1).exp(),
            e1: (self.v3 - self.v2).exp(),
        }
    }

    pub fn to_primitive(&self) -> PrimitiveCoeffs {
        self.coeffs().to_primitive()
    }

    fn norm(&self) -> f64 {
        self.to_array().iter().map(|x| x * x).sum::<f64>().sqrt()
    }
}

impl RealCoeffs {
    pub fn to_primitive(&self) -> PrimitiveCoeffs {
        PrimitiveCoeffs::real(self.a1, self.b1, self.c1, self.d1, self.e1)
    }

    /// Log-variables; fails unless `c1, d1, e1 > 0`.
    pub fn to_toda_state(&self) -> Result<TodaState, TodaError> {
        for (name, value) in [("c1", self.c1), ("d1", self.d1), ("e1", self.e1)] {
            if !(value > 0.0) {
                return Err(TodaError::NonPositive { name, value });
            }
        }
        let v1 = self.c1.ln();
        let v2 = v1 + self.d1.ln();
        let v3 = v2 + self.e1.ln();
        Ok(TodaState::new(self.a1, self.b1, v1, v2, v3))
    }

    /// `P = 2 u_0 + u_-1 + conj(u_-1)`, twice the real part of the connection.
    pub fn p_matrix(&self) -> Mat7 {
        connection_matrix(&self.to_primitive()).map(|z| 2.0 * z.re)
    }

    /// `Q = i (u_-1 - conj(u_-1))`, minus twice the imaginary part.
    pub fn q_matrix(&self) -> Mat7 {
        connection_matrix(&self.to_primitive()).map(|z| -2.0 * z.im)
    }
}

/// Right-hand side of the Toda system.
pub fn vector_field(s: &TodaState) -> Result<TodaState, TodaError> {
    let exponents = [2.0 * s.v1, 2.0 * (s.v2 - s.v1), 2.0 * (s.v3 - s.v2)];
    if let Some(&exponent) = exponents.iter().find(|x| !(x.abs() <= EXPONENT_GUARD)) {
        return Err(TodaError::Overflow { exponent });
    }
    let [c2, d2, e2] = exponents.map(f64::exp);
    Ok(TodaState {
        a1: 2.0 * c2 - 4.0 * d2,
        b1: -c2 + 4.0 * d2 - 4.0 * e2,
        v1: -2.0 * s.a1,
        v2: -2.0 * s.b1,
        v3: 2.0 * (s.a1 + s.b1),
    })
}

fn axpy(x: &TodaState, h: f64, d: &TodaState) -> TodaState {
    let (x, d) = (x.to_array(), d.to_array());
    TodaState::from_array(std::array::from_fn(|k| x[k] + h * d[k]))
}

/// One classical fourth order Runge-Kutta step.
pub fn rk4_step(s: &TodaState, h: f64) -> Result<TodaState, TodaError> {
    let k1 = vector_field(s)?;
    let k2 = vector_field(&axpy(s, 0.5 * h, &k1))?;
    let k3 = vector_field(&axpy(s, 0.5 * h, &k2))?;
    let k4 = vector_field(&axpy(s, h, &k3))?;
    let (x, k1, k2, k3, k4) = (s.to_array(), k1.to_array(), k2.to_array(), k3.to_array(), k4.to_array());
    Ok(TodaState::from_array(std::array::from_fn(|k| {
        x[k] + h / 6.0 * (k1[k] + 2.0 * k2[k] + 2.0 * k3[k] + k4[k])
    })))
}

/// Sampled solution on a uniform time grid.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<TodaState>,
    pub step: f64,
}

/// Number of uniform steps covering `[0, t_end]` with spacing at most `step`.
pub fn step_count(t_end: f64, step: f64) -> Result<usize, TodaError> {
    if !(step > 0.0 && t_end > 0.0 && step.is_finite() && t_end.is_finite()) {
        return Err(TodaError::InvalidStep { step, t_end });
    }
    Ok(((t_end / step) - 1e-9).ceil().max(1.0) as usize)
}

/// Integrate from `s0` over `[0, t_end]`. The step is shrunk slightly if
/// needed so that the grid lands on `t_end`.
pub fn integrate(s0: &TodaState, t_end: f64, step: f64) -> Result<Trajectory, TodaError> {
    let n = step_count(t_end, step)?;
    let h = t_end / n as f64;
    let mut times = Vec::with_capacity(n + 1);
    let mut states = Vec::with_capacity(n + 1);
    times.push(0.0);
    states.push(*s0);
    let mut s = *s0;
    for i in 1..=n {
        s = rk4_step(&s, h)?;
        if !(s.norm() <= DIVERGENCE_NORM) {
            return Err(TodaError::Divergence { last_time: (i - 1) as f64 * h });
        }
        times.push(i as f64 * h);
        states.push(s);
    }
    Ok(Trajectory { times, states, step: h })
}

pub fn p_matrix(s: &TodaState) -> Mat7 {
    s.coeffs().p_matrix()
}

pub fn q_matrix(s: &TodaState) -> Mat7 {
    s.coeffs().q_matrix()
}

/// `max ||dP/dt - [P, Q]||_F` over interior samples, `dP/dt` by central
/// differences.
pub fn lax_residual(tr: &Trajectory) -> Result<f64, TodaError> {
    if tr.states.len() < 5 {
        return Err(TodaError::TooShort { needed: 5, got: tr.states.len() });
    }
    let ps: Vec<Mat7> = tr.states.iter().map(p_matrix).collect();
    let mut worst = 0.0f64;
    for i in 1..ps.len() - 1 {
        let dt = tr.times[i + 1] - tr.times[i - 1];
        let dp = (ps[i + 1] - ps[i - 1]) / dt;
        let r = (dp - bracket(&ps[i], &q_matrix(&tr.states[i]))).norm();
        worst = worst.max(r);
    }
    Ok(worst)
}

/// Rotation angles `0 <= mu1 <= mu2 <= mu3` of an antisymmetric 7x7 matrix.
pub fn rotation_angles(p: &Mat7) -> [f64; 3] {
    let mut ev: Vec<f64> = SymmetricEigen::new(p.transpose() * p).eigenvalues.iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    [ev[1], ev[3], ev[5]].map(|x| x.max(0.0).sqrt())
}

/// Quantities constant along every trajectory.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Conserved {
    pub sum_v: f64,
    /// Rotation angles of `P`, ascending.
    pub spectral: [f64; 3],
}

pub fn conserved(s: &TodaState) -> Conserved {
    Conserved { sum_v: s.sum_v(), spectral: rotation_angles(&p_matrix(s)) }
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    /// Columns `t, a1, b1, v1, v2, v3, sum_v, spec1, spec2, spec3`.
    pub fn to_table(&self) -> Table {
        let mut table = Table::new(["t", "a1", "b1", "v1", "v2", "v3", "sum_v", "spec1", "spec2", "spec3"]);
        for (t, s) in self.times.iter().zip(&self.states) {
            let c = conserved(s);
            let mut row = vec![*t];
            row.extend_from_slice(&s.to_array());
            row.push(c.sum_v);
            row.extend_from_slice(&c.spectral);
            table.push(row);
        }
        table
    }

    /// Rebuild from the state columns of [`Trajectory::to_table`].
    pub fn from_table(table: &Table) -> Option<Trajectory> {
        let col = |name| table.column(name);
        let (t, a1, b1) = (col("t")?, col("a1")?, col("b1")?);
        let (v1, v2, v3) = (col("v1")?, col("v2")?, col("v3")?);
        let states = (0..t.len()).map(|i| TodaState::new(a1[i], b1[i], v1[i], v2[i], v3[i])).collect();
        let step = if t.len() > 1 { t[1] - t[0] } else { 0.0 };
        Some(Trajectory { times: t, states, step })
    }

    /// Every `stride`-th sample.
    pub fn subsample(&self, stride: usize) -> Trajectory {
        let stride = stride.max(1);
        Trajectory {
            times: self.times.iter().step_by(stride).copied().collect(),
            states: self.states.iter().step_by(stride).copied().collect(),
            step: self.step * stride as f64,
        }
    }
}

/// A numerically detected period.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PeriodEstimate {
    /// Mean spacing of consecutive upward crossings.
    pub period: f64,
    /// Number of crossings used.
    pub crossings: usize,
    /// Largest deviation of a single spacing from the mean.
    pub spread: f64,
}

/// Period of `a1` from its upward crossings of the mid-range level. Each
/// crossing is located on the cubic Hermite interpolant built from the
/// samples and the vector field.
pub fn detect_period(tr: &Trajectory) -> Option<PeriodEstimate> {
    let a: Vec<f64> = tr.states.iter().map(|s| s.a1).collect();
    let (lo, hi) = a.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), x| (l.min(*x), h.max(*x)));
    if !(hi > lo) {
        return None;
    }
    let level = 0.5 * (lo + hi);
    let mut crossings = Vec::new();
    for i in 0..a.len().saturating_sub(1) {
        if a[i] < level && a[i + 1] >= level {
            let h = tr.times[i + 1] - tr.times[i];
            let d0 = vector_field(&tr.states[i]).ok()?.a1 * h;
            let d1 = vector_field(&tr.states[i + 1]).ok()?.a1 * h;
            let (y0, y1) = (a[i] - level, a[i + 1] - level);
            let hermite = |u: f64| {
                let (u2, u3) = (u * u, u * u * u);
                (2.0 * u3 - 3.0 * u2 + 1.0) * y0
                    + (u3 - 2.0 * u2 + u) * d0
                    + (-2.0 * u3 + 3.0 * u2) * y1
                    + (u3 - u2) * d1
            };
            let (mut l, mut r) = (0.0, 1.0);
            for _ in 0..60 {
                let m = 0.5 * (l + r);
                if hermite(m) < 0.0 {
                    l = m;
                } else {
                    r = m;
                }
            }
            crossings.push(tr.times[i] + 0.5 * (l + r) * h);
        }
    }
    if crossings.len() < 2 {
        return None;
    }
    let gaps: Vec<f64> = crossings.windows(2).map(|w| w[1] - w[0]).collect();
    let period = gaps.iter().sum::<f64>() / gaps.len() as f64;
    let spread = gaps.iter().map(|g| (g - period).abs()).fold(0.0, f64::max);
    Some(PeriodEstimate { period, crossings: crossings.len(), spread })
}

/// Constants of a type (iii) orbit and of its elliptic solution
/// `y = exp(2 v1) = G3 - (G3 - G2) sn^2(B1 t + B2, B3)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TypeIIIConstants {
    pub c1: f64,
    pub c2: f64,
    /// Roots `G1 < 0 < G2 <= G3` of `y^3 - C2 y^2 + C1`.
    pub gamma: [f64; 3],
    pub b1: f64,
    pub b2: f64,
    pub b3: f64,
}

/// Roots of `y^3 - C2 y^2 + C1` in the order `G1 < 0 < G2 <= G3`.
///
/// The cubic has its local maximum `C1` at 0 and its local minimum at
/// `2 C2 / 3`, so each root sits in a known bracket.
pub fn cubic_roots(c1: f64, c2: f64) -> Result<[f64; 3], TodaError> {
    if !(c1 > 0.0 && c2 > 0.0) {
        return Err(TodaError::InvalidConstants { c1, c2 });
    }
    let p = |y: f64| y * y * (y - c2) + c1;
    let dp = |y: f64| y * (3.0 * y - 2.0 * c2);
    let m = 2.0 * c2 / 3.0;
    let pm = p(m);
    let scale = c1.max(c2.powi(3));
    if pm > 4.0 * f64::EPSILON * scale {
        return Err(TodaError::NoRealRoots { c1, c2 });
    }
    let bound = 1.0 + c1.max(c2);
    let g1 = bracketed_root(&p, &dp, -bound, 0.0);
    if pm >= -4.0 * f64::EPSILON * scale {
        return Ok([g1, m, m]);
    }
    Ok([g1, bracketed_root(&p, &dp, 0.0, m), bracketed_root(&p, &dp, m, bound)])
}

/// Newton iteration kept inside a shrinking sign-change bracket.
fn bracketed_root(f: &dyn Fn(f64) -> f64, df: &dyn Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let rising = f(hi) > f(lo);
    let mut x = 0.5 * (lo + hi);
    for _ in 0..200 {
        let fx = f(x);
        if fx == 0.0 {
            return x;
        }
        if (fx > 0.0) == rising {
            hi = x;
        } else {
            lo = x;
        }
        let newton = x - fx / df(x);
        let next = if newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
        if (next - x).abs() <= 2.0 * f64::EPSILON * x.abs() {
            return next;
        }
        x = next;
    }
    x
}

impl TypeIIIConstants {
    /// Constants for given `C1, C2`, phased so that `y(0) = y0` with `y`
    /// decreasing at `t = 0` when `decreasing` is set.
    pub fn from_energy(c1: f64, c2: f64, y0: f64, decreasing: bool) -> Result<TypeIIIConstants, TodaError> {
        let gamma = cubic_roots(c1, c2)?;
        let [g1, g2, g3] = gamma;
        let b1 = 2.0 * (g3 - g1).sqrt();
        let b3 = ((g3 - g2) / (g3 - g1)).sqrt();
        let b2 = if g3 - g2 <= f64::EPSILON * g3 {
            0.0
        } else {
            let s2 = ((g3 - y0) / (g3 - g2)).clamp(0.0, 1.0);
            let f = incomplete_f(s2.sqrt().asin(), b3);
            if decreasing {
                f
            } else {
                -f
            }
        };
        Ok(TypeIIIConstants { c1, c2, gamma, b1, b2, b3 })
    }

    /// `y(t)` from the elliptic formula.
    pub fn y(&self, t: f64) -> f64 {
        closed_form_y(t, self)
    }

    /// Smallest period of `y`. The `sn` factor has period `sn_period(B3) / B1`;
    /// its square repeats after half of that.
    pub fn y_period(&self) -> Result<f64, TodaError> {
        Ok(sn_period(self.b3)? / (2.0 * self.b1))
    }

    /// Period of the `sn` factor, `sn_period(B3) / B1`.
    pub fn sn_factor_period(&self) -> Result<f64, TodaError> {
        Ok(sn_period(self.b3)? / self.b1)
    }

    pub fn is_degenerate(&self) -> bool {
        self.gamma[2] - self.gamma[1] <= f64::EPSILON * self.gamma[2]
    }
}

/// `G3 - (G3 - G2) sn^2(B1 t + B2, B3)`.
pub fn closed_form_y(t: f64, c: &TypeIIIConstants) -> f64 {
    let [_, g2, g3] = c.gamma;
    let sn = jacobi_sn(c.b1 * t + c.b2, c.b3);
    g3 - (g3 - g2) * sn * sn
}

/// Residuals of the two relations defining the type (iii) invariant set.
pub fn invariant_set_residuals(s: &TodaState) -> (f64, f64) {
    let product = (2.0 * (s.v1 + s.v2)).exp() - 4.0 * (2.0 * s.v3).exp();
    ((s.a1 + s.b1).abs(), product.abs())
}

/// Constants of the type (iii) orbit through `s`.
pub fn type3_constants(s: &TodaState) -> Result<TypeIIIConstants, TodaError> {
    let (sum_residual, product_residual) = invariant_set_residuals(s);
    let c1 = (2.0 * (s.v1 + s.v2)).exp();
    if !(sum_residual <= INVARIANT_SET && product_residual <= INVARIANT_SET * c1.max(1.0)) {
        return Err(TodaError::OffInvariantSet { sum_residual, product_residual });
    }
    let y0 = (2.0 * s.v1).exp();
    let c2 = s.a1 * s.a1 + y0 + c1 / (y0 * y0);
    TypeIIIConstants::from_energy(c1, c2, y0, s.a1 > 0.0)
}

/// The state on the type (iii) orbit with constants `C1, C2` where `y`
/// attains its maximum `G3`.
pub fn type3_initial_state(c1: f64, c2: f64) -> Result<TodaState, TodaError> {
    let [_, _, g3] = cubic_roots(c1, c2)?;
    let v1 = 0.5 * g3.ln();
    let v2 = 0.5 * c1.ln() - v1;
    let v3 = 0.5 * (c1 / 4.0).ln();
    Ok(TodaState::new(0.0, 0.0, v1, v2, v3))
}
