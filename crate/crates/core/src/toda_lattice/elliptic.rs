//! Jacobi elliptic functions and complete/incomplete integrals of the first
//! kind, via the arithmetic-geometric mean and Carlson's symmetric form.

use std::f64::consts::PI;

use super::TodaError;

const AGM_EPS: f64 = 1e-16;

/// Arithmetic-geometric mean of two nonnegative numbers.
pub fn agm(mut a: f64, mut b: f64) -> f64 {
    for _ in 0..64 {
        if (a - b).abs() <= AGM_EPS * a {
            break;
        }
        let next = 0.5 * (a + b);
        b = (a * b).sqrt();
        a = next;
    }
    a
}

fn check_modulus(k: f64) -> Result<(), TodaError> {
    if (0.0..=1.0).contains(&k) {
        Ok(())
    } else {
        Err(TodaError::ModulusOutOfRange { k })
    }
}

/// Complete integral `K(k)`; infinite at `k = 1`.
pub fn elliptic_k(k: f64) -> Result<f64, TodaError> {
    check_modulus(k)?;
    if k == 1.0 {
        return Err(TodaError::InfinitePeriod);
    }
    Ok(PI / (2.0 * agm(1.0, (1.0 - k * k).sqrt())))
}

/// `int_0^{2 pi} dx / sqrt(1 - k^2 sin^2 x)`, which is `4 K(k)`.
pub fn sn_period(k: f64) -> Result<f64, TodaError> {
    Ok(4.0 * elliptic_k(k)?)
}

/// `(sn, cn, dn)(u, k)` for `0 <= k <= 1` by descending Landen steps.
pub fn jacobi_elliptic(u: f64, k: f64) -> (f64, f64, f64) {
    assert!((0.0..=1.0).contains(&k), "modulus {k} outside [0, 1]");
    if k == 1.0 {
        let sech = 1.0 / u.cosh();
        return (u.tanh(), sech, sech);
    }
    let mut a = vec![1.0];
    let mut c = vec![k];
    let mut b = (1.0 - k * k).sqrt();
    while c.last().unwrap().abs() > AGM_EPS && a.len() < 64 {
        let (an, bn) = (*a.last().unwrap(), b);
        a.push(0.5 * (an + bn));
        c.push(0.5 * (an - bn));
        b = (an * bn).sqrt();
    }
    let n = a.len() - 1;
    let mut phi = 2f64.powi(n as i32) * a[n] * u;
    for j in (1..=n).rev() {
        phi = 0.5 * (phi + (c[j] / a[j] * phi.sin()).asin());
    }
    let sn = phi.sin();
    (sn, phi.cos(), (1.0 - k * k * sn * sn).max(0.0).sqrt())
}

/// Jacobi `sn(u, k)`.
pub fn jacobi_sn(u: f64, k: f64) -> f64 {
    jacobi_elliptic(u, k).0
}

/// Carlson's `R_F(x, y, z)` by duplication.
pub fn carlson_rf(mut x: f64, mut y: f64, mut z: f64) -> f64 {
    for _ in 0..100 {
        let mu = (x + y + z) / 3.0;
        let dx = 1.0 - x / mu;
        let dy = 1.0 - y / mu;
        let dz = 1.0 - z / mu;
        if dx.abs().max(dy.abs()).max(dz.abs()) < 1e-4 {
            let e2 = dx * dy - dz * dz;
            let e3 = dx * dy * dz;
            return (1.0 - e2 / 10.0 + e3 / 14.0 + e2 * e2 / 24.0 - 3.0 * e2 * e3 / 44.0)
                / mu.sqrt();
        }
        let (sx, sy, sz) = (x.sqrt(), y.sqrt(), z.sqrt());
        let l = sx * sy + sy * sz + sz * sx;
        x = 0.25 * (x + l);
        y = 0.25 * (y + l);
        z = 0.25 * (z + l);
    }
    1.0 / ((x + y + z) / 3.0).sqrt()
}

/// Incomplete integral `F(phi, k)` for `|phi| <= pi / 2`.
pub fn incomplete_f(phi: f64, k: f64) -> f64 {
    let (s, c) = phi.sin_cos();
    s * carlson_rf(c * c, 1.0 - k * k * s * s, 1.0)
}
