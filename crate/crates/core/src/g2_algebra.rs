//! The Lie algebra g2 as 7x7 antisymmetric matrices, the order-6 inner
//! automorphism `sigma` and the grading `g2^C = h_0 + ... + h_5` it induces.

use std::f64::consts::PI;
use std::fmt;
use std::sync::OnceLock;

use nalgebra::{ComplexField, DMatrix, SMatrix};
use num_complex::Complex64;
use thiserror::Error;

use crate::tolerances::PATTERN;
use crate::{complexify, CMat7, Mat7};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum G2Error {
    #[error("matrix is not in g2: entry ({row}, {col}) misses the pattern by {residual:.3e}")]
    NotInG2 { residual: f64, row: usize, col: usize },
}

/// Names of the 14 coordinates, in storage order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum G2Basis {
    X2,
    X3,
    X4,
    X5,
    X6,
    X7,
    Y3,
    Y4,
    Y5,
    Y6,
    Y7,
    Z5,
    Z6,
    Z7,
}

impl G2Basis {
    pub const ALL: [G2Basis; 14] = [
        G2Basis::X2,
        G2Basis::X3,
        G2Basis::X4,
        G2Basis::X5,
        G2Basis::X6,
        G2Basis::X7,
        G2Basis::Y3,
        G2Basis::Y4,
        G2Basis::Y5,
        G2Basis::Y6,
        G2Basis::Y7,
        G2Basis::Z5,
        G2Basis::Z6,
        G2Basis::Z7,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        const NAMES: [&str; 14] = [
            "X2", "X3", "X4", "X5", "X6", "X7", "Y3", "Y4", "Y5", "Y6", "Y7", "Z5", "Z6", "Z7",
        ];
        NAMES[self.index()]
    }

    pub fn matrix(self) -> Mat7 {
        G2AlgCoords::basis(self).to_matrix()
    }

    pub fn cmatrix(self) -> CMat7 {
        complexify(&self.matrix())
    }
}

impl fmt::Display for G2Basis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Real coordinates `(x2..x7, y3..y7, z5, z6, z7)` of an element of g2.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct G2AlgCoords(pub [f64; 14]);

impl G2AlgCoords {
    pub fn basis(b: G2Basis) -> G2AlgCoords {
        let mut c = [0.0; 14];
        c[b.index()] = 1.0;
        G2AlgCoords(c)
    }

    pub fn get(&self, b: G2Basis) -> f64 {
        self.0[b.index()]
    }

    pub fn to_matrix(&self) -> Mat7 {
        pattern(&self.0)
    }
}

/// The pattern matrix for coordinates over `f64` or `Complex64`.
///
/// Columns 1, 2 and 4 carry the free coordinates; the rest is forced by the
/// derivation property.
pub fn pattern<T: ComplexField + Copy>(c: &[T; 14]) -> SMatrix<T, 7, 7> {
    let [x2, x3, x4, x5, x6, x7, y3, y4, y5, y6, y7, z5, z6, z7] = *c;
    let o = T::zero();
    SMatrix::<T, 7, 7>::from_row_slice(&[
        o, -x2, -x3, -x4, -x5, -x6, -x7, //
        x2, o, -y3, -y4, -y5, -y6, -y7, //
        x3, y3, o, -x6 + y5, -x7 - y4, x4 - y7, x5 + y6, //
        x4, y4, x6 - y5, o, -z5, -z6, -z7, //
        x5, y5, x7 + y4, z5, o, -x2 - z7, -x3 + z6, //
        x6, y6, -x4 + y7, z6, x2 + z7, o, -y3 - z5, //
        x7, y7, -x5 - y6, z7, x3 - z6, y3 + z5, o,
    ])
}

fn read_coords<T: ComplexField + Copy>(m: &SMatrix<T, 7, 7>) -> [T; 14] {
    let mut c = [T::zero(); 14];
    for k in 0..6 {
        c[k] = m[(k + 1, 0)];
    }
    for k in 0..5 {
        c[6 + k] = m[(k + 2, 1)];
    }
    for k in 0..3 {
        c[11 + k] = m[(k + 4, 3)];
    }
    c
}

fn check_pattern<T: ComplexField<RealField = f64> + Copy>(
    m: &SMatrix<T, 7, 7>,
    tol: f64,
) -> Result<[T; 14], G2Error> {
    let c = read_coords(m);
    let diff = m - pattern(&c);
    let mut worst = (0.0, 0, 0);
    for i in 0..7 {
        for j in 0..7 {
            let r = diff[(i, j)].modulus();
            if r > worst.0 || r.is_nan() {
                worst = (r, i + 1, j + 1);
            }
        }
    }
    if worst.0 > tol || worst.0.is_nan() {
        return Err(G2Error::NotInG2 { residual: worst.0, row: worst.1, col: worst.2 });
    }
    Ok(c)
}

pub fn coords_to_matrix(c: &G2AlgCoords) -> Mat7 {
    c.to_matrix()
}

/// Read coordinates back, rejecting matrices off the pattern by more than
/// the pattern tolerance.
pub fn matrix_to_coords(m: &Mat7) -> Result<G2AlgCoords, G2Error> {
    check_pattern(m, PATTERN).map(G2AlgCoords)
}

/// Complex coordinates of an element of the complexified algebra.
pub fn cmatrix_to_coords(m: &CMat7, tol: f64) -> Result<[Complex64; 14], G2Error> {
    check_pattern(m, tol)
}

pub fn bracket<T: ComplexField + Copy>(
    a: &SMatrix<T, 7, 7>,
    b: &SMatrix<T, 7, 7>,
) -> SMatrix<T, 7, 7> {
    a * b - b * a
}

/// `trace(ab)`, a fixed negative multiple of the Killing form.
pub fn trace_form<T: ComplexField + Copy>(a: &SMatrix<T, 7, 7>, b: &SMatrix<T, 7, 7>) -> T {
    (a * b).trace()
}

/// Which side the inverse of `h` sits on in `sigma`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SigmaDirection {
    /// `sigma(xi) = h^-1 xi h`
    InverseLeft,
    /// `sigma(xi) = h xi h^-1`
    InverseRight,
}

/// The direction for which the listed eigenspace bases carry eigenvalue
/// `exp(j pi i / 3)` on `h_j`.
pub const SIGMA_DIRECTION: SigmaDirection = SigmaDirection::InverseLeft;

/// The element `h = exp(pi/3 (Y3 + 2 Z5))` of order 6.
#[derive(Clone, Debug)]
pub struct SigmaConjugator {
    pub h: Mat7,
}

impl SigmaConjugator {
    /// Rotations by `pi/3`, `2 pi/3` and `pi` in the planes `(e2, e3)`,
    /// `(e4, e5)` and `(e6, e7)`; `e1` is fixed.
    pub fn closed_form() -> SigmaConjugator {
        let mut h = Mat7::zeros();
        h[(0, 0)] = 1.0;
        for (plane, rate) in [(1usize, 1.0), (3, 2.0), (5, 3.0)] {
            let (s, c) = (rate * PI / 3.0).sin_cos();
            h[(plane, plane)] = c;
            h[(plane + 1, plane + 1)] = c;
            h[(plane + 1, plane)] = s;
            h[(plane, plane + 1)] = -s;
        }
        SigmaConjugator { h }
    }

    /// The shared instance; the first call checks `SIGMA_DIRECTION` on
    /// `Y4 + i Y5`, which must pick up `exp(i pi / 3)`.
    pub fn get() -> &'static SigmaConjugator {
        static SIGMA: OnceLock<SigmaConjugator> = OnceLock::new();
        SIGMA.get_or_init(|| {
            let s = SigmaConjugator::closed_form();
            let xi = G2Basis::Y4.cmatrix() + G2Basis::Y5.cmatrix() * Complex64::i();
            let defect = crate::cmax(&(s.apply(&xi) - xi * eigenvalue(1)));
            assert!(defect < 1e-12, "sigma direction self-test failed: defect {defect:.3e}");
            s
        })
    }

    pub fn apply(&self, xi: &CMat7) -> CMat7 {
        let h = complexify(&self.h);
        let ht = h.transpose();
        match SIGMA_DIRECTION {
            SigmaDirection::InverseLeft => ht * xi * h,
            SigmaDirection::InverseRight => h * xi * ht,
        }
    }
}

/// `exp(j pi i / 3)`.
pub fn eigenvalue(j: i32) -> Complex64 {
    Complex64::from_polar(1.0, j as f64 * PI / 3.0)
}

pub fn sigma(xi: &CMat7) -> CMat7 {
    SigmaConjugator::get().apply(xi)
}

pub fn sigma_real(xi: &Mat7) -> Mat7 {
    sigma(&complexify(xi)).map(|z| z.re)
}

/// The `h_j` component by averaging over the cyclic group generated by
/// `sigma`. Indices are taken mod 6.
pub fn project_matrix(xi: &CMat7, j: i32) -> CMat7 {
    let mut acc = CMat7::zeros();
    let mut term = *xi;
    for k in 0..6 {
        acc += term * eigenvalue(-j * k);
        term = sigma(&term);
    }
    acc / Complex64::new(6.0, 0.0)
}

/// An element of the complexified algebra with its grading computed on
/// demand.
#[derive(Clone, Debug)]
pub struct ComplexG2Elem {
    matrix: CMat7,
    grading: OnceLock<[CMat7; 6]>,
}

impl ComplexG2Elem {
    pub fn new(matrix: CMat7) -> Result<ComplexG2Elem, G2Error> {
        cmatrix_to_coords(&matrix, PATTERN)?;
        Ok(ComplexG2Elem { matrix, grading: OnceLock::new() })
    }

    pub fn from_coords(c: &[Complex64; 14]) -> ComplexG2Elem {
        ComplexG2Elem { matrix: pattern(c), grading: OnceLock::new() }
    }

    pub fn matrix(&self) -> &CMat7 {
        &self.matrix
    }

    /// The six components `h_0, ..., h_5`.
    pub fn grading(&self) -> &[CMat7; 6] {
        self.grading
            .get_or_init(|| std::array::from_fn(|j| project_matrix(&self.matrix, j as i32)))
    }

    pub fn component(&self, j: i32) -> &CMat7 {
        &self.grading()[j.rem_euclid(6) as usize]
    }
}

pub fn project_h(xi: &ComplexG2Elem, j: i32) -> ComplexG2Elem {
    ComplexG2Elem { matrix: *xi.component(j), grading: OnceLock::new() }
}

fn term(b: G2Basis, re: f64, im: f64) -> (G2Basis, Complex64) {
    (b, Complex64::new(re, im))
}

/// The listed spanning vectors of `h_j` as coordinate combinations.
pub fn eigenspace_terms(j: i32) -> Vec<Vec<(G2Basis, Complex64)>> {
    use G2Basis::*;
    match j.rem_euclid(6) {
        0 => vec![vec![term(Y3, 1.0, 0.0)], vec![term(Z5, 1.0, 0.0)]],
        1 => vec![
            vec![term(X2, 1.0, 0.0), term(X3, 0.0, 1.0), term(Z6, 0.0, 0.5), term(Z7, -0.5, 0.0)],
            vec![term(Y4, 1.0, 0.0), term(Y5, 0.0, 1.0)],
            vec![term(Z6, 1.0, 0.0), term(Z7, 0.0, -1.0)],
        ],
        2 => vec![
            vec![term(X4, 1.0, 0.0), term(X5, 0.0, 1.0), term(Y6, 0.0, -0.5), term(Y7, 0.5, 0.0)],
            vec![term(Y6, 1.0, 0.0), term(Y7, 0.0, -1.0)],
        ],
        3 => vec![
            vec![term(X6, 1.0, 0.0), term(X7, 0.0, -1.0), term(Y4, 0.0, 0.5), term(Y5, 0.5, 0.0)],
            vec![term(X6, 1.0, 0.0), term(X7, 0.0, 1.0), term(Y4, 0.0, -0.5), term(Y5, 0.5, 0.0)],
        ],
        4 => vec![
            vec![term(X4, 1.0, 0.0), term(X5, 0.0, -1.0), term(Y6, 0.0, 0.5), term(Y7, 0.5, 0.0)],
            vec![term(Y6, 1.0, 0.0), term(Y7, 0.0, 1.0)],
        ],
        _ => vec![
            vec![term(X2, 1.0, 0.0), term(X3, 0.0, -1.0), term(Z6, 0.0, -0.5), term(Z7, -0.5, 0.0)],
            vec![term(Y4, 1.0, 0.0), term(Y5, 0.0, -1.0)],
            vec![term(Z6, 1.0, 0.0), term(Z7, 0.0, 1.0)],
        ],
    }
}

/// The listed spanning vectors of `h_j` as complex coordinate arrays.
pub fn eigenspace_basis(j: i32) -> Vec<[Complex64; 14]> {
    eigenspace_terms(j)
        .into_iter()
        .map(|terms| {
            let mut c = [Complex64::new(0.0, 0.0); 14];
            for (b, z) in terms {
                c[b.index()] += z;
            }
            c
        })
        .collect()
}

/// Human readable form such as `X2 + i X3 + (i/2) Z6 - (1/2) Z7`.
pub fn format_terms(terms: &[(G2Basis, Complex64)]) -> String {
    let mut out = String::new();
    for (k, (b, z)) in terms.iter().enumerate() {
        let (negative, mag, imag) = if z.im == 0.0 {
            (z.re < 0.0, z.re.abs(), false)
        } else {
            (z.im < 0.0, z.im.abs(), true)
        };
        if k == 0 {
            if negative {
                out.push('-');
            }
        } else {
            out.push_str(if negative { " - " } else { " + " });
        }
        let unit = if imag { "i" } else { "" };
        if mag == 1.0 {
            if imag {
                out.push_str("i ");
            }
        } else if mag == 0.5 {
            out.push_str(&format!("({}/2) ", if imag { "i" } else { "1" }));
        } else {
            out.push_str(&format!("{mag}{unit} "));
        }
        out.push_str(b.name());
    }
    out
}

/// Complex dimension of `h_j`, read off the rank of the projector.
pub fn eigenspace_dimension(j: i32) -> usize {
    let mut cols = DMatrix::<Complex64>::zeros(49, 14);
    for (k, b) in G2Basis::ALL.iter().enumerate() {
        let p = project_matrix(&b.cmatrix(), j);
        for (r, z) in p.iter().enumerate() {
            cols[(r, k)] = *z;
        }
    }
    let sv = cols.singular_values();
    sv.iter().filter(|s| **s > 1e-9).count()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::octonion::{is_g2, ImOct, Oct};
    use crate::testutil::{expm_taylor, random_coords, rng};

    fn apply(a: &Mat7, u: &ImOct) -> ImOct {
        ImOct::from_vec7(&(a * u.to_vec7()))
    }

    #[test]
    fn x2_pattern() {
        let m = G2Basis::X2.matrix();
        let mut expected = Mat7::zeros();
        expected[(1, 0)] = 1.0;
        expected[(0, 1)] = -1.0;
        expected[(5, 4)] = 1.0;
        expected[(4, 5)] = -1.0;
        assert_eq!(m, expected);
        assert_eq!(matrix_to_coords(&m).unwrap(), G2AlgCoords::basis(G2Basis::X2));
        assert_eq!(coords_to_matrix(&G2AlgCoords::default()), Mat7::zeros());
    }

    #[test]
    fn pattern_violation_is_rejected() {
        let mut m = Mat7::zeros();
        m[(3, 2)] = 1.0;
        m[(2, 3)] = -1.0;
        let err = matrix_to_coords(&m).unwrap_err();
        assert!(matches!(err, G2Error::NotInG2 { residual, .. } if residual == 1.0));
    }

    #[test]
    fn derivation_property() {
        let mut r = rng(7);
        for _ in 0..20 {
            let a = random_coords(&mut r).to_matrix();
            assert!((a + a.transpose()).amax() == 0.0);
            for j in 1..8 {
                for k in 1..8 {
                    let (ej, ek) = (ImOct::e(j), ImOct::e(k));
                    let lhs = Oct::from(apply(&a, &ej.cross(&ek)));
                    let rhs = Oct::from(apply(&a, &ej)) * Oct::from(ek)
                        + Oct::from(ej) * Oct::from(apply(&a, &ek));
                    assert!((lhs - rhs).norm() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn torus_generators_commute() {
        let b = bracket(&G2Basis::Y3.matrix(), &G2Basis::Z5.matrix());
        assert_eq!(b, Mat7::zeros());
        assert_eq!(bracket(&G2Basis::X2.matrix(), &G2Basis::X2.matrix()), Mat7::zeros());
    }

    #[test]
    fn h_has_order_six_and_is_g2() {
        let h = SigmaConjugator::closed_form().h;
        assert!((h.pow(6) - Mat7::identity()).amax() < 1e-12);
        assert!(is_g2(&h, 1e-12));
        let gen = (G2Basis::Y3.matrix() + G2Basis::Z5.matrix() * 2.0) * (PI / 3.0);
        assert!((expm_taylor(&gen) - h).amax() < 1e-13);
    }

    #[test]
    fn listed_bases_are_eigenvectors() {
        for j in 0..6 {
            for c in eigenspace_basis(j) {
                let xi = pattern(&c);
                let defect = crate::cmax(&(sigma(&xi) - xi * eigenvalue(j)));
                assert!(defect < 1e-12, "h_{j}: {defect:e}");
            }
        }
    }

    #[test]
    fn dimensions() {
        let dims: Vec<usize> = (0..6).map(eigenspace_dimension).collect();
        assert_eq!(dims, vec![2, 3, 2, 2, 2, 3]);
    }

    #[test]
    fn projection_of_x2() {
        let x2 = G2Basis::X2.cmatrix();
        let p = project_matrix(&x2, 1);
        // X2 + i X3 + (i/2) Z6, halved.
        let mut expected = [Complex64::new(0.0, 0.0); 14];
        expected[G2Basis::X2.index()] = Complex64::new(0.5, 0.0);
        expected[G2Basis::X3.index()] = Complex64::new(0.0, 0.5);
        expected[G2Basis::Z6.index()] = Complex64::new(0.0, 0.5);
        assert!(crate::cmax(&(p - pattern(&expected))) < 1e-14);
        assert!(crate::cmax(&(sigma(&p) - p * eigenvalue(1))) < 1e-14);
        assert!(crate::cmax(&(project_matrix(&p, 1) - p)) < 1e-14);
        let total = (0..6).fold(CMat7::zeros(), |acc, j| acc + project_matrix(&x2, j));
        assert!(crate::cmax(&(total - x2)) < 1e-14);
    }

    #[test]
    fn grading_of_y3() {
        let y3 = ComplexG2Elem::new(G2Basis::Y3.cmatrix()).unwrap();
        assert!(crate::cmax(&(y3.component(0) - y3.matrix())) < 1e-15);
        for j in 1..6 {
            assert!(crate::cmax(y3.component(j)) < 1e-15);
        }
    }

    #[test]
    fn term_formatting() {
        let t = eigenspace_terms(1);
        assert_eq!(format_terms(&t[0]), "X2 + i X3 + (i/2) Z6 - (1/2) Z7");
        assert_eq!(format_terms(&t[2]), "Z6 - i Z7");
    }
}
