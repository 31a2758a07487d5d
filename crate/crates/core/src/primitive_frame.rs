//! Primitive frames `psi: C -> G2` with `psi^-1 psi_z = u_0 + u_-1` in
//! `h_0 + h_-1`, the structure equations for the coefficients `a, ..., e`,
//! the spectral family of flat connections and curve type classification.

use std::fmt;

use num_complex::Complex64;
use thiserror::Error;

use crate::g2_algebra::bracket;
use crate::octonion::{ComplexImOct, ImOct};
use crate::{conj, CMat7, Mat7};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PrimitiveError {
    #[error("spectral parameter must be nonzero")]
    ZeroLambda,
    #[error("empty coefficient field")]
    EmptyField,
    #[error("c vanishes on the samples (min |c| = {min_c:.3e}); not an immersion")]
    DegenerateImmersion { min_c: f64 },
    #[error("classification uncertain: {quantity} = {value:.3e} is within the ambiguity band [{tol:.1e}, {upper:.1e})")]
    Uncertain { quantity: &'static str, value: f64, tol: f64, upper: f64 },
}

/// The five complex coefficients of `psi^-1 psi_z`.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct PrimitiveCoeffs {
    pub a: Complex64,
    pub b: Complex64,
    pub c: Complex64,
    pub d: Complex64,
    pub e: Complex64,
}

impl PrimitiveCoeffs {
    pub fn real(a: f64, b: f64, c: f64, d: f64, e: f64) -> PrimitiveCoeffs {
        let r = |x| Complex64::new(x, 0.0);
        PrimitiveCoeffs { a: r(a), b: r(b), c: r(c), d: r(d), e: r(e) }
    }

    pub fn as_array(&self) -> [Complex64; 5] {
        [self.a, self.b, self.c, self.d, self.e]
    }

    pub fn from_array(v: [Complex64; 5]) -> PrimitiveCoeffs {
        PrimitiveCoeffs { a: v[0], b: v[1], c: v[2], d: v[3], e: v[4] }
    }

    pub fn scale(&self, k: Complex64) -> PrimitiveCoeffs {
        PrimitiveCoeffs::from_array(self.as_array().map(|z| k * z))
    }
}

/// The `h_0` part `a Y3 + b Z5`.
pub fn u0_matrix(p: &PrimitiveCoeffs) -> CMat7 {
    let mut m = CMat7::zeros();
    m[(2, 1)] = p.a;
    m[(1, 2)] = -p.a;
    m[(4, 3)] = p.b;
    m[(3, 4)] = -p.b;
    m[(6, 5)] = p.a + p.b;
    m[(5, 6)] = -(p.a + p.b);
    m
}

/// The `h_-1` part carried by `c, d, e`.
pub fn u_minus1_matrix(p: &PrimitiveCoeffs) -> CMat7 {
    let i = Complex64::i();
    let (c, d, e) = (p.c, p.d, p.e);
    let half = 0.5;
    let mut m = CMat7::zeros();
    let mut set = |r: usize, col: usize, v: Complex64| {
        m[(r, col)] = v;
    };
    set(0, 1, -c);
    set(0, 2, i * c);
    set(1, 0, c);
    set(1, 3, -d);
    set(1, 4, i * d);
    set(2, 0, -i * c);
    set(2, 3, -i * d);
    set(2, 4, -d);
    set(3, 1, d);
    set(3, 2, i * d);
    set(3, 5, -e + i * c * half);
    set(3, 6, -i * e + c * half);
    set(4, 1, -i * d);
    set(4, 2, d);
    set(4, 5, -i * e - c * half);
    set(4, 6, e + i * c * half);
    set(5, 3, e - i * c * half);
    set(5, 4, i * e + c * half);
    set(6, 3, i * e - c * half);
    set(6, 4, -e - i * c * half);
    m
}

/// `psi^-1 psi_z` as a complex 7x7 matrix; unlisted entries are zero.
pub fn connection_matrix(p: &PrimitiveCoeffs) -> CMat7 {
    u0_matrix(p) + u_minus1_matrix(p)
}

/// Recover `c, d, e` from an `h_-1` matrix of the above shape.
pub fn read_u_minus1(m: &CMat7) -> (Complex64, Complex64, Complex64) {
    let c = m[(1, 0)];
    let d = m[(3, 1)];
    let e = m[(5, 3)] + Complex64::i() * c * 0.5;
    (c, d, e)
}

/// The `dz` and `dz-bar` parts `(u_0 + u_-1 / lambda, conj(u_0) + lambda conj(u_-1))`.
pub fn lax_connection(
    p: &PrimitiveCoeffs,
    lambda: Complex64,
) -> Result<(CMat7, CMat7), PrimitiveError> {
    if lambda == Complex64::new(0.0, 0.0) {
        return Err(PrimitiveError::ZeroLambda);
    }
    let u0 = u0_matrix(p);
    let um = u_minus1_matrix(p);
    Ok((u0 + um / lambda, conj(&u0) + conj(&um) * lambda))
}

/// Left-minus-right of the five structure equations. `p_zbar` holds the
/// `z-bar` derivatives of `a, ..., e`; the `z` derivatives of the conjugates
/// are their complex conjugates.
pub fn gauss_codazzi_residual(p: &PrimitiveCoeffs, p_zbar: &PrimitiveCoeffs) -> [Complex64; 5] {
    let i = Complex64::i();
    let PrimitiveCoeffs { a, b, c, d, e } = *p;
    let (c2, d2, e2) = (c.norm_sqr(), d.norm_sqr(), e.norm_sqr());
    [
        p_zbar.a - p_zbar.a.conj() - i * (2.0 * c2 - 4.0 * d2),
        p_zbar.b - p_zbar.b.conj() - i * (-c2 + 4.0 * d2 - 4.0 * e2),
        p_zbar.c + i * a.conj() * c,
        p_zbar.d - i * (a.conj() - b.conj()) * d,
        p_zbar.e - i * (a.conj() + 2.0 * b.conj()) * e,
    ]
}

/// The `dz ^ dz-bar` coefficient of `d theta + theta ^ theta` for the
/// connection at `lambda`.
pub fn flatness_residual(
    p: &PrimitiveCoeffs,
    p_zbar: &PrimitiveCoeffs,
    lambda: Complex64,
) -> Result<CMat7, PrimitiveError> {
    let (x, y) = lax_connection(p, lambda)?;
    // The dz-bar part is built from conjugates, and d/dz of conj(f) is
    // conj(d/dz-bar f), so the same call yields both derivatives.
    let (dx_zbar, dy_z) = lax_connection(p_zbar, lambda)?;
    Ok(dy_z - dx_zbar + bracket(&x, &y))
}

/// Metric and second fundamental form data.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FundamentalForms {
    /// Coefficient of `|dz|^2` in the first fundamental form, `2 |c|^2`.
    pub metric: f64,
    /// `II(d/dz, d/dz) = second (f4 - i f5)` with `second = 2 c d`.
    pub second: Complex64,
    /// `c = 0`, so the map is not immersive here.
    pub degenerate: bool,
}

impl FundamentalForms {
    /// `second * (f4 - i f5)` for the frame columns of `psi`.
    pub fn second_form_vector(&self, frame: &Mat7) -> ComplexImOct {
        let f4 = ImOct::column(frame, 3);
        let f5 = ImOct::column(frame, 4);
        ComplexImOct::from_parts(&f4, &-f5).scale(self.second)
    }
}

pub fn fundamental_forms(p: &PrimitiveCoeffs) -> FundamentalForms {
    FundamentalForms {
        metric: 2.0 * p.c.norm_sqr(),
        second: 2.0 * p.c * p.d,
        degenerate: p.c == Complex64::new(0.0, 0.0),
    }
}

/// `((nabla_z)^2 f_z, (nabla_z)^2 f_z) = -32 i c^3 d^2 e`.
pub fn isotropy_invariant(p: &PrimitiveCoeffs) -> Complex64 {
    -32.0 * Complex64::i() * p.c.powi(3) * p.d.powi(2) * p.e
}

/// The four curve types.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum CurveType {
    /// Totally isotropic, `e = 0` and `d != 0`.
    I,
    /// Full and not totally isotropic.
    II,
    /// Contained in a totally geodesic S^5, `a + b = 0` and `de != 0`.
    III,
    /// Totally geodesic S^2, `d = 0`.
    IV,
}

impl fmt::Display for CurveType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            CurveType::I => "I",
            CurveType::II => "II",
            CurveType::III => "III",
            CurveType::IV => "IV",
        };
        f.write_str(s)
    }
}

/// Quantities within this factor above the threshold are neither clearly
/// zero nor clearly nonzero.
pub const AMBIGUITY_FACTOR: f64 = 10.0;

/// Assign a curve type to sampled coefficients.
///
/// `tol` is relative to the largest coefficient modulus on the samples. A
/// quantity is zero when its maximum is below `tol`, nonzero when it is at
/// least `AMBIGUITY_FACTOR * tol`, and anything in between is reported as
/// uncertain. When `e` and `a + b` both vanish the type is I.
pub fn classify(field: &[PrimitiveCoeffs], tol: f64) -> Result<CurveType, PrimitiveError> {
    if field.is_empty() {
        return Err(PrimitiveError::EmptyField);
    }
    let scale = field
        .iter()
        .flat_map(|p| p.as_array())
        .fold(0.0f64, |m, z| m.max(z.norm()));
    let abs_tol = tol * scale;
    let upper = AMBIGUITY_FACTOR * abs_tol;
    let max_of = |f: &dyn Fn(&PrimitiveCoeffs) -> f64| field.iter().map(f).fold(0.0, f64::max);
    let min_of =
        |f: &dyn Fn(&PrimitiveCoeffs) -> f64| field.iter().map(f).fold(f64::INFINITY, f64::min);

    let min_c = min_of(&|p| p.c.norm());
    if min_c < abs_tol || scale == 0.0 {
        return Err(PrimitiveError::DegenerateImmersion { min_c });
    }
    let vanishes = |quantity: &'static str, value: f64| {
        if value < abs_tol {
            Ok(true)
        } else if value >= upper {
            Ok(false)
        } else {
            Err(PrimitiveError::Uncertain { quantity, value, tol: abs_tol, upper })
        }
    };
    if vanishes("max |d|", max_of(&|p| p.d.norm()))? {
        return Ok(CurveType::IV);
    }
    let e_zero = vanishes("max |e|", max_of(&|p| p.e.norm()))?;
    let ab_zero = vanishes("max |a + b|", max_of(&|p| (p.a + p.b).norm()))?;
    if ab_zero && !e_zero {
        let min_de = min_of(&|p| (p.d * p.e).norm());
        if min_de > 0.0 {
            return Ok(CurveType::III);
        }
    }
    if e_zero {
        return Ok(CurveType::I);
    }
    Ok(CurveType::II)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::g2_algebra::{cmatrix_to_coords, eigenvalue, project_matrix, sigma};
    use crate::tolerances::PATTERN;
    use crate::cmax;

    fn random_coeffs(seed: u64) -> PrimitiveCoeffs {
        use rand::Rng;
        let mut r = crate::testutil::rng(seed);
        let mut z = || Complex64::new(r.gen_range(-1.0..1.0), r.gen_range(-1.0..1.0));
        PrimitiveCoeffs { a: z(), b: z(), c: z(), d: z(), e: z() }
    }

    #[test]
    fn c_only_entries() {
        let p = PrimitiveCoeffs { c: Complex64::new(1.0, 0.0), ..Default::default() };
        let m = connection_matrix(&p);
        let i = Complex64::i();
        assert_eq!(m[(1, 0)], Complex64::new(1.0, 0.0));
        assert_eq!(m[(0, 1)], Complex64::new(-1.0, 0.0));
        assert_eq!(m[(2, 0)], -i);
        assert_eq!(m[(0, 2)], i);
        assert_eq!(m[(3, 5)], i * 0.5);
        assert_eq!(m[(6, 3)], Complex64::new(-0.5, 0.0));
        assert_eq!(connection_matrix(&PrimitiveCoeffs::default()), CMat7::zeros());
    }

    #[test]
    fn blank_entries_are_zero() {
        let m = connection_matrix(&PrimitiveCoeffs::real(1.0, 1.0, 1.0, 1.0, 1.0));
        let filled = [
            (0, [1, 2].as_slice()),
            (1, &[0, 2, 3, 4]),
            (2, &[0, 1, 3, 4]),
            (3, &[1, 2, 4, 5, 6]),
            (4, &[1, 2, 3, 5, 6]),
            (5, &[3, 4, 6]),
            (6, &[3, 4, 5]),
        ];
        for (r, cols) in filled {
            for c in 0..7 {
                assert_eq!(m[(r, c)] != Complex64::new(0.0, 0.0), cols.contains(&c), "({r}, {c})");
            }
        }
    }

    #[test]
    fn grading_of_connection() {
        let p = random_coeffs(3);
        let m = connection_matrix(&p);
        cmatrix_to_coords(&m, PATTERN).unwrap();
        cmatrix_to_coords(&(m + conj(&m)), PATTERN).unwrap();
        for j in 0..6 {
            let part = project_matrix(&m, j);
            match j {
                0 => assert!(cmax(&(part - u0_matrix(&p))) < 1e-14),
                5 => assert!(cmax(&(part - u_minus1_matrix(&p))) < 1e-14),
                _ => assert!(cmax(&part) < 1e-14, "h_{j}"),
            }
        }
        let (c, d, e) = read_u_minus1(&u_minus1_matrix(&p));
        assert_eq!((c, d, e), (p.c, p.d, p.e));
    }

    #[test]
    fn lax_reality_and_equivariance() {
        let p = random_coeffs(4);
        let lambda = Complex64::from_polar(1.3, 0.7);
        let (x, y) = lax_connection(&p, lambda).unwrap();
        let (xr, yr) = lax_connection(&p, lambda.conj().inv()).unwrap();
        assert!(cmax(&(conj(&yr) - x)) < 1e-14);
        assert!(cmax(&(conj(&xr) - y)) < 1e-14);
        let rotated = lambda * eigenvalue(1);
        let (xs, ys) = lax_connection(&p, rotated).unwrap();
        assert!(cmax(&(sigma(&x) - xs)) < 1e-12);
        assert!(cmax(&(sigma(&y) - ys)) < 1e-12);
        assert_eq!(lax_connection(&p, Complex64::new(0.0, 0.0)), Err(PrimitiveError::ZeroLambda));
    }

    #[test]
    fn first_column_equation() {
        let p = random_coeffs(5);
        let frame = crate::testutil::expm_taylor(&crate::testutil::random_coords(&mut crate::testutil::rng(1)).to_matrix());
        let psi = crate::complexify(&frame);
        let col = (psi * connection_matrix(&p)).column(0).into_owned();
        let f2 = psi.column(1);
        let f3 = psi.column(2);
        let expected = f2 * p.c - f3 * (Complex64::i() * p.c);
        assert!((col - expected).iter().all(|z| z.norm() < 1e-14));
    }

    #[test]
    fn vacuum_is_flat() {
        let p = PrimitiveCoeffs::real(0.3, -0.2, 0.0, 0.0, 0.0);
        let zero = PrimitiveCoeffs::default();
        assert!(gauss_codazzi_residual(&p, &zero).iter().all(|r| r.norm() == 0.0));
        let r = flatness_residual(&p, &zero, Complex64::new(0.4, 0.9)).unwrap();
        assert!(cmax(&r) < 1e-15);
    }

    #[test]
    fn flatness_matches_structure_equations() {
        // Random values and derivatives: the graded pieces of the flatness
        // residual are the structure residuals.
        let p = random_coeffs(6);
        let pz = random_coeffs(7);
        let g = gauss_codazzi_residual(&p, &pz);
        for lambda in [Complex64::new(1.0, 0.0), Complex64::new(0.3, 2.0), Complex64::new(-1.7, 0.2)] {
            let r = -flatness_residual(&p, &pz, lambda).unwrap();
            let h0 = project_matrix(&r, 0);
            assert!((h0[(2, 1)] - g[0]).norm() < 1e-12, "a slot at {lambda}");
            assert!((h0[(4, 3)] - g[1]).norm() < 1e-12, "b slot at {lambda}");
            let (c, d, e) = read_u_minus1(&(project_matrix(&r, 5) * lambda));
            assert!((c - g[2]).norm() < 1e-12, "c slot at {lambda}");
            assert!((d - g[3]).norm() < 1e-12, "d slot at {lambda}");
            assert!((e - g[4]).norm() < 1e-12, "e slot at {lambda}");
            // The lambda-side copy sits in h_1 with the opposite sign.
            let mirror = project_matrix(&r, 1).map(|z| z.conj()) / lambda.conj();
            let (c, d, e) = read_u_minus1(&mirror);
            for (got, want) in [c, d, e].iter().zip(&g[2..]) {
                assert!((got + want).norm() < 1e-12, "mirror slot at {lambda}");
            }
            for j in 2..5 {
                assert!(cmax(&project_matrix(&r, j)) < 1e-12);
            }
        }
    }

    #[test]
    fn third_equation_violation() {
        // a = i constant, c = e^t: c_zbar = (i/2) c, so c_zbar + i conj(a) c = (i/2 + 1) c.
        let p = PrimitiveCoeffs { a: Complex64::i(), c: Complex64::new(2.0, 0.0), ..Default::default() };
        let pz = PrimitiveCoeffs { c: Complex64::new(0.0, 1.0), ..Default::default() };
        let r = gauss_codazzi_residual(&p, &pz);
        assert!((r[2] - Complex64::new(2.0, 1.0)).norm() < 1e-15);
    }

    #[test]
    fn forms_and_invariant() {
        let f = fundamental_forms(&PrimitiveCoeffs::real(0.0, 0.0, 1.0, 0.0, 0.0));
        assert_eq!((f.metric, f.second, f.degenerate), (2.0, Complex64::new(0.0, 0.0), false));
        assert!(fundamental_forms(&PrimitiveCoeffs::default()).degenerate);
        let p = PrimitiveCoeffs::real(0.0, 0.0, 1.0, 1.0, 1.0);
        assert_eq!(isotropy_invariant(&p), Complex64::new(0.0, -32.0));
        let q = PrimitiveCoeffs { e: Complex64::new(0.0, 0.0), ..random_coeffs(8) };
        assert_eq!(isotropy_invariant(&q).norm(), 0.0);
        let base = random_coeffs(9);
        let rot = Complex64::from_polar(1.0, 0.8);
        let turned = PrimitiveCoeffs { c: base.c * rot, d: base.d / rot, ..base };
        let (s0, s1) = (fundamental_forms(&base).second, fundamental_forms(&turned).second);
        assert!((s0.norm() - s1.norm()).abs() < 1e-15);
    }

    fn field(f: impl Fn(f64) -> PrimitiveCoeffs) -> Vec<PrimitiveCoeffs> {
        (0..20).map(|k| f(k as f64 * 0.1)).collect()
    }

    #[test]
    fn classification() {
        let tol = 1e-7;
        let iv = field(|t| PrimitiveCoeffs::real(t, 0.5, 1.0 + t, 0.0, 0.3));
        assert_eq!(classify(&iv, tol), Ok(CurveType::IV));
        let i = field(|t| PrimitiveCoeffs::real(t, 0.5, 1.0 + t, 0.7, 0.0));
        assert_eq!(classify(&i, tol), Ok(CurveType::I));
        let iii = field(|t| PrimitiveCoeffs::real(t, -t, 1.0 + t, 0.7, 0.2 + t));
        assert_eq!(classify(&iii, tol), Ok(CurveType::III));
        let ii = field(|t| PrimitiveCoeffs::real(t, 0.5, 1.0 + t, 0.7, 0.2));
        assert_eq!(classify(&ii, tol), Ok(CurveType::II));
        let both = field(|t| PrimitiveCoeffs::real(t, -t, 1.0 + t, 0.7, 0.0));
        assert_eq!(classify(&both, tol), Ok(CurveType::I));
        let phase = Complex64::from_polar(1.0, 1.1);
        let gauged: Vec<_> = iii
            .iter()
            .map(|p| PrimitiveCoeffs { c: p.c * phase, d: p.d * phase, e: p.e * phase.conj(), ..*p })
            .collect();
        assert_eq!(classify(&gauged, tol), Ok(CurveType::III));
        let blurry = field(|t| PrimitiveCoeffs::real(t, 0.5, 1.0 + t, 4e-7, 0.3));
        assert!(matches!(classify(&blurry, tol), Err(PrimitiveError::Uncertain { quantity: "max |d|", .. })));
        let flat = field(|t| PrimitiveCoeffs::real(t, 0.5, 0.0, 1.0, 0.3));
        assert!(matches!(classify(&flat, tol), Err(PrimitiveError::DegenerateImmersion { .. })));
    }
}
