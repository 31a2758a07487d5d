//! Octonion arithmetic, the associative 3-form and G2 frames.
//!
//! The basis is `1, e1, ..., e7` with `e1 = i`, `e2 = j`, `e3 = k`, `e4 = e`,
//! `e5 = ie`, `e6 = je`, `e7 = ke`. Products of basis elements come from a
//! signed-index table built once from the Cayley-Dickson doubling of the
//! quaternions and checked against [`REFERENCE_TABLE`] on first use.

use std::fmt;
use std::ops::{Add, AddAssign, Mul, Neg, Sub};
use std::sync::OnceLock;

use num_complex::Complex64;
use thiserror::Error;

use crate::tolerances::FRAME_PRECONDITION;
use crate::{Mat7, Vec7};

/// Errors raised while assembling G2 frames.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum OctonionError {
    #[error("frame vectors are not orthonormal: {pair} has defect {defect:.3e}")]
    NotOrthonormal { pair: &'static str, defect: f64 },
}

/// A real octonion `x0 + x1 e1 + ... + x7 e7`.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Oct(pub [f64; 8]);

/// A pure imaginary octonion, i.e. a vector of R^7.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ImOct(pub [f64; 7]);

/// A vector of C^7 = Im(O) ⊗ C, multiplied complex-bilinearly.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ComplexImOct(pub [Complex64; 7]);

/// Products `e_i e_j` for `i, j` in `1..=7` as `(sign, index)`, where index
/// 0 stands for the unit. Row `i` is the left factor.
pub const REFERENCE_TABLE: [[(i8, u8); 7]; 7] = [
    [(-1, 0), (1, 3), (-1, 2), (1, 5), (-1, 4), (-1, 7), (1, 6)],
    [(-1, 3), (-1, 0), (1, 1), (1, 6), (1, 7), (-1, 4), (-1, 5)],
    [(1, 2), (-1, 1), (-1, 0), (1, 7), (-1, 6), (1, 5), (-1, 4)],
    [(-1, 5), (-1, 6), (-1, 7), (-1, 0), (1, 1), (1, 2), (1, 3)],
    [(1, 4), (-1, 7), (1, 6), (-1, 1), (-1, 0), (-1, 3), (1, 2)],
    [(1, 7), (1, 4), (-1, 5), (-1, 2), (1, 3), (-1, 0), (-1, 1)],
    [(-1, 6), (1, 5), (1, 4), (-1, 3), (-1, 2), (1, 1), (-1, 0)],
];

type Table = [[(i8, u8); 8]; 8];

fn quat_mul(a: [f64; 4], b: [f64; 4]) -> [f64; 4] {
    [
        a[0] * b[0] - a[1] * b[1] - a[2] * b[2] - a[3] * b[3],
        a[0] * b[1] + a[1] * b[0] + a[2] * b[3] - a[3] * b[2],
        a[0] * b[2] - a[1] * b[3] + a[2] * b[0] + a[3] * b[1],
        a[0] * b[3] + a[1] * b[2] - a[2] * b[1] + a[3] * b[0],
    ]
}

fn quat_conj(a: [f64; 4]) -> [f64; 4] {
    [a[0], -a[1], -a[2], -a[3]]
}

/// `(a + b e)(c + d e) = (ac - conj(d) b) + (d a + b conj(c)) e`.
fn cayley_dickson(x: &[f64; 8], y: &[f64; 8]) -> [f64; 8] {
    let split = |v: &[f64; 8]| ([v[0], v[1], v[2], v[3]], [v[4], v[5], v[6], v[7]]);
    let (a, b) = split(x);
    let (c, d) = split(y);
    let ac = quat_mul(a, c);
    let db = quat_mul(quat_conj(d), b);
    let da = quat_mul(d, a);
    let bc = quat_mul(b, quat_conj(c));
    let mut out = [0.0; 8];
    for k in 0..4 {
        out[k] = ac[k] - db[k];
        out[k + 4] = da[k] + bc[k];
    }
    out
}

fn build_table() -> Table {
    let mut table = [[(0i8, 0u8); 8]; 8];
    for (i, row) in table.iter_mut().enumerate() {
        for (j, slot) in row.iter_mut().enumerate() {
            let mut x = [0.0; 8];
            let mut y = [0.0; 8];
            x[i] = 1.0;
            y[j] = 1.0;
            let p = cayley_dickson(&x, &y);
            let k = p.iter().position(|v| *v != 0.0).expect("basis product is nonzero");
            *slot = (p[k] as i8, k as u8);
        }
    }
    table
}

fn table() -> &'static Table {
    static TABLE: OnceLock<Table> = OnceLock::new();
    TABLE.get_or_init(|| {
        let t = build_table();
        for i in 1..8 {
            for j in 1..8 {
                assert_eq!(
                    t[i][j],
                    REFERENCE_TABLE[i - 1][j - 1],
                    "Cayley-Dickson product e{i}*e{j} disagrees with the reference table"
                );
            }
        }
        t
    })
}

/// `e_i e_j` as `(sign, index)` for `i, j` in `0..8` (0 is the unit).
pub fn basis_product(i: usize, j: usize) -> (i8, usize) {
    let (s, k) = table()[i][j];
    (s, k as usize)
}

fn table_mul<T>(a: &[T], a_off: usize, b: &[T], b_off: usize, zero: T) -> [T; 8]
where
    T: Copy + Mul<Output = T> + AddAssign + Neg<Output = T>,
{
    let t = table();
    let mut out = [zero; 8];
    for (i, &x) in a.iter().enumerate() {
        for (j, &y) in b.iter().enumerate() {
            let (s, k) = t[i + a_off][j + b_off];
            let p = x * y;
            out[k as usize] += if s > 0 { p } else { -p };
        }
    }
    out
}

/// The multiplication table as aligned text, rows and columns `e1..e7`.
pub fn table_text() -> String {
    let cell = |s: i8, k: usize| {
        let name = if k == 0 { "1".to_string() } else { format!("e{k}") };
        if s < 0 {
            format!("-{name}")
        } else {
            name
        }
    };
    let mut out = String::from("     ");
    for j in 1..8 {
        out.push_str(&format!("{:>5}", format!("e{j}")));
    }
    out.push('\n');
    for i in 1..8 {
        out.push_str(&format!("{:>5}", format!("e{i}")));
        for j in 1..8 {
            let (s, k) = basis_product(i, j);
            out.push_str(&format!("{:>5}", cell(s, k)));
        }
        out.push('\n');
    }
    out
}

impl Oct {
    pub const ONE: Oct = Oct([1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]);

    /// The basis element `e_i` (`i = 0` gives the unit).
    pub fn basis(i: usize) -> Oct {
        let mut v = [0.0; 8];
        v[i] = 1.0;
        Oct(v)
    }

    pub fn re(&self) -> f64 {
        self.0[0]
    }

    pub fn im(&self) -> ImOct {
        let mut v = [0.0; 7];
        v.copy_from_slice(&self.0[1..]);
        ImOct(v)
    }

    pub fn conj(&self) -> Oct {
        let mut v = self.0.map(|x| -x);
        v[0] = self.0[0];
        Oct(v)
    }

    pub fn norm_sqr(&self) -> f64 {
        self.0.iter().map(|x| x * x).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    pub fn scale(&self, k: f64) -> Oct {
        Oct(self.0.map(|x| k * x))
    }
}

impl Mul for Oct {
    type Output = Oct;
    fn mul(self, rhs: Oct) -> Oct {
        Oct(table_mul(&self.0, 0, &rhs.0, 0, 0.0))
    }
}

impl Add for Oct {
    type Output = Oct;
    fn add(self, rhs: Oct) -> Oct {
        Oct(std::array::from_fn(|k| self.0[k] + rhs.0[k]))
    }
}

impl Sub for Oct {
    type Output = Oct;
    fn sub(self, rhs: Oct) -> Oct {
        Oct(std::array::from_fn(|k| self.0[k] - rhs.0[k]))
    }
}

impl Neg for Oct {
    type Output = Oct;
    fn neg(self) -> Oct {
        Oct(self.0.map(|x| -x))
    }
}

impl From<ImOct> for Oct {
    fn from(u: ImOct) -> Oct {
        let mut v = [0.0; 8];
        v[1..].copy_from_slice(&u.0);
        Oct(v)
    }
}

impl fmt::Display for Oct {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0[0])?;
        for k in 1..8 {
            write!(f, " {:+} e{k}", self.0[k])?;
        }
        Ok(())
    }
}

/// Octonion conjugate.
pub fn oct_conj(a: Oct) -> Oct {
    a.conj()
}

/// Octonion product.
pub fn oct_mul(a: Oct, b: Oct) -> Oct {
    a * b
}

/// `(ab)c - a(bc)`.
pub fn associator(a: Oct, b: Oct, c: Oct) -> Oct {
    (a * b) * c - a * (b * c)
}

impl ImOct {
    /// The basis vector `e_i` for `i` in `1..=7`.
    pub fn e(i: usize) -> ImOct {
        assert!((1..=7).contains(&i), "imaginary basis index {i} out of range");
        let mut v = [0.0; 7];
        v[i - 1] = 1.0;
        ImOct(v)
    }

    pub fn dot(&self, other: &ImOct) -> f64 {
        self.0.iter().zip(other.0.iter()).map(|(a, b)| a * b).sum()
    }

    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn scale(&self, k: f64) -> ImOct {
        ImOct(self.0.map(|x| k * x))
    }

    pub fn normalized(&self) -> ImOct {
        self.scale(1.0 / self.norm())
    }

    /// Full octonion product; its real part is `-<self, other>`.
    pub fn mul(&self, other: &ImOct) -> Oct {
        Oct(table_mul(&self.0, 1, &other.0, 1, 0.0))
    }

    /// Imaginary part of the product, the octonionic cross product.
    pub fn cross(&self, other: &ImOct) -> ImOct {
        self.mul(other).im()
    }

    pub fn to_vec7(&self) -> Vec7 {
        Vec7::from_column_slice(&self.0)
    }

    pub fn from_vec7(v: &Vec7) -> ImOct {
        ImOct(std::array::from_fn(|k| v[k]))
    }

    /// Column `j` (0-based) of a 7x7 matrix.
    pub fn column(m: &Mat7, j: usize) -> ImOct {
        ImOct(std::array::from_fn(|k| m[(k, j)]))
    }
}

impl Add for ImOct {
    type Output = ImOct;
    fn add(self, rhs: ImOct) -> ImOct {
        ImOct(std::array::from_fn(|k| self.0[k] + rhs.0[k]))
    }
}

impl Sub for ImOct {
    type Output = ImOct;
    fn sub(self, rhs: ImOct) -> ImOct {
        ImOct(std::array::from_fn(|k| self.0[k] - rhs.0[k]))
    }
}

impl Neg for ImOct {
    type Output = ImOct;
    fn neg(self) -> ImOct {
        ImOct(self.0.map(|x| -x))
    }
}

impl ComplexImOct {
    pub fn from_parts(re: &ImOct, im: &ImOct) -> ComplexImOct {
        ComplexImOct(std::array::from_fn(|k| Complex64::new(re.0[k], im.0[k])))
    }

    pub fn from_real(re: &ImOct) -> ComplexImOct {
        ComplexImOct::from_parts(re, &ImOct::default())
    }

    pub fn re(&self) -> ImOct {
        ImOct(self.0.map(|z| z.re))
    }

    pub fn im(&self) -> ImOct {
        ImOct(self.0.map(|z| z.im))
    }

    /// Complex bilinear pairing `sum y_j z_j` (no conjugation).
    pub fn bilinear(&self, other: &ComplexImOct) -> Complex64 {
        self.0.iter().zip(other.0.iter()).map(|(a, b)| a * b).sum()
    }

    /// Hermitian pairing `sum conj(y_j) z_j`.
    pub fn hermitian(&self, other: &ComplexImOct) -> Complex64 {
        self.0.iter().zip(other.0.iter()).map(|(a, b)| a.conj() * b).sum()
    }

    /// Hermitian norm.
    pub fn norm(&self) -> f64 {
        self.0.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn scale(&self, k: Complex64) -> ComplexImOct {
        ComplexImOct(self.0.map(|z| k * z))
    }

    /// Bilinear product split as `(real part, imaginary part)`.
    pub fn mul(&self, other: &ComplexImOct) -> (Complex64, ComplexImOct) {
        let p = table_mul(&self.0, 1, &other.0, 1, Complex64::new(0.0, 0.0));
        (p[0], ComplexImOct(std::array::from_fn(|k| p[k + 1])))
    }
}

impl Add for ComplexImOct {
    type Output = ComplexImOct;
    fn add(self, rhs: ComplexImOct) -> ComplexImOct {
        ComplexImOct(std::array::from_fn(|k| self.0[k] + rhs.0[k]))
    }
}

impl Sub for ComplexImOct {
    type Output = ComplexImOct;
    fn sub(self, rhs: ComplexImOct) -> ComplexImOct {
        ComplexImOct(std::array::from_fn(|k| self.0[k] - rhs.0[k]))
    }
}

/// The associative 3-form `phi(u, v, w) = <u v, w>`.
pub fn phi3(u: &ImOct, v: &ImOct, w: &ImOct) -> f64 {
    u.mul(v).im().dot(w)
}

/// The G2 frame with columns `(f1, f2, f1 f2, f4, f1 f4, f2 f4, (f1 f2) f4)`.
pub fn g2_frame(f1: &ImOct, f2: &ImOct, f4: &ImOct) -> Result<Mat7, OctonionError> {
    let tol = FRAME_PRECONDITION;
    let f3 = f1.cross(f2);
    let checks: [(&'static str, f64); 7] = [
        ("|f1| = 1", f1.norm() - 1.0),
        ("|f2| = 1", f2.norm() - 1.0),
        ("|f4| = 1", f4.norm() - 1.0),
        ("(f1, f2)", f1.dot(f2)),
        ("(f1, f4)", f1.dot(f4)),
        ("(f2, f4)", f2.dot(f4)),
        ("(f1 f2, f4)", f3.dot(f4)),
    ];
    for (pair, defect) in checks {
        if defect.abs() > tol {
            return Err(OctonionError::NotOrthonormal { pair, defect });
        }
    }
    let cols = [
        *f1,
        *f2,
        f3,
        *f4,
        f1.cross(f4),
        f2.cross(f4),
        f3.cross(f4),
    ];
    Ok(Mat7::from_fn(|i, j| cols[j].0[i]))
}

/// Whether `g` is orthogonal and preserves `phi` on all basis triples.
pub fn is_g2(g: &Mat7, tol: f64) -> bool {
    let orth = (g.transpose() * g - Mat7::identity()).amax();
    if !(orth <= tol) {
        return false;
    }
    let cols: Vec<ImOct> = (0..7).map(|j| ImOct::column(g, j)).collect();
    for i in 0..7 {
        for j in i + 1..7 {
            for k in j + 1..7 {
                let before = phi3(&ImOct::e(i + 1), &ImOct::e(j + 1), &ImOct::e(k + 1));
                let after = phi3(&cols[i], &cols[j], &cols[k]);
                if (after - before).abs() > tol {
                    return false;
                }
            }
        }
    }
    true
}
