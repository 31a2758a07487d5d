//! The verification suite run by `verify`.

use g2cones::aks_flow::{aks_consistency, spectrum_pair};
use g2cones::curve_builder::{
    almost_complex_residual, build_from_seed, cone_associativity, quadric_lift, sl_normal, CurveSeed, SeedCurve,
};
use g2cones::g2_algebra::{eigenspace_basis, eigenvalue, sigma, ComplexG2Elem, G2Basis};
use g2cones::octonion::{basis_product, Oct, REFERENCE_TABLE};
use g2cones::primitive_frame::classify;
use g2cones::toda_lattice::{
    closed_form_y, conserved, integrate, invariant_set_residuals, p_matrix, type3_constants, Trajectory,
};
use g2cones::tolerances::INVARIANT_SET;
use g2cones::{cmax, Mat7};

use crate::config::{Check, Tolerances};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Status {
    Pass,
    Fail,
    Skip,
}

#[derive(Clone, Debug)]
pub struct CheckResult {
    pub check: Check,
    pub status: Status,
    pub detail: String,
}

impl CheckResult {
    fn measured(check: Check, value: f64, tol: f64, what: &str) -> CheckResult {
        let status = if value <= tol { Status::Pass } else { Status::Fail };
        CheckResult { check, status, detail: format!("{what} {value:.3e} (tol {tol:.1e})") }
    }

    fn failed(check: Check, detail: impl Into<String>) -> CheckResult {
        CheckResult { check, status: Status::Fail, detail: detail.into() }
    }

    fn skipped(check: Check, detail: impl Into<String>) -> CheckResult {
        CheckResult { check, status: Status::Skip, detail: detail.into() }
    }

    pub fn line(&self) -> String {
        let tag = match self.status {
            Status::Pass => "PASS",
            Status::Fail => "FAIL",
            Status::Skip => "SKIP",
        };
        format!("[{tag}] {:<11} {}", self.check.name(), self.detail)
    }
}

/// Artifacts computed once and shared between checks.
pub struct Artifacts {
    pub trajectory: Result<Trajectory, String>,
    pub curve: Result<SeedCurve, String>,
}

impl Artifacts {
    pub fn compute(seed: &CurveSeed, checks: &[Check]) -> Artifacts {
        let needs_curve = checks.iter().any(|c| {
            matches!(c, Check::Aks | Check::Frames | Check::Ac | Check::Cone | Check::Sl | Check::Quadric)
        });
        let trajectory = integrate(&seed.state(), seed.t_end, seed.step).map_err(|e| e.to_string());
        let curve = if needs_curve {
            build_from_seed(seed).map_err(|e| e.to_string())
        } else {
            Err("not built".to_string())
        };
        Artifacts { trajectory, curve }
    }
}

fn algebra(tol: f64) -> CheckResult {
    let mut mismatches = 0;
    for i in 1..8 {
        for j in 1..8 {
            let (s, k) = basis_product(i, j);
            if (s, k as u8) != REFERENCE_TABLE[i - 1][j - 1] {
                mismatches += 1;
            }
        }
    }
    let act = |a: &Mat7, x: &Oct| {
        let mut out = [0.0; 8];
        let im = a * x.im().to_vec7();
        out[1..].copy_from_slice(im.as_slice());
        Oct(out)
    };
    let mut derivation = 0.0f64;
    for b in G2Basis::ALL {
        let a = b.matrix();
        for j in 1..8 {
            for k in 1..8 {
                let (ej, ek) = (Oct::basis(j), Oct::basis(k));
                let d = act(&a, &(ej * ek)) - act(&a, &ej) * ek - ej * act(&a, &ek);
                derivation = derivation.max(d.norm());
            }
        }
    }
    let mut eigen = 0.0f64;
    for j in 0..6 {
        for v in eigenspace_basis(j) {
            let m = *ComplexG2Elem::from_coords(&v).matrix();
            eigen = eigen.max(cmax(&(sigma(&m) - m * eigenvalue(j))));
        }
    }
    let worst = derivation.max(eigen);
    let status = if mismatches == 0 && worst <= tol { Status::Pass } else { Status::Fail };
    CheckResult {
        check: Check::Algebra,
        status,
        detail: format!(
            "table mismatches {mismatches}, derivation {derivation:.3e}, sigma eigenvalues {eigen:.3e} (tol {tol:.1e})"
        ),
    }
}

fn toda(tr: &Trajectory, tol: &Tolerances) -> CheckResult {
    let c0 = conserved(&tr.states[0]);
    let (mut sum_v, mut spectral) = (0.0f64, 0.0f64);
    for s in &tr.states {
        let c = conserved(s);
        sum_v = sum_v.max((c.sum_v - c0.sum_v).abs());
        for k in 0..3 {
            spectral = spectral.max((c.spectral[k] - c0.spectral[k]).abs());
        }
    }
    let status = if sum_v <= tol.sum_v && spectral <= tol.spectral { Status::Pass } else { Status::Fail };
    CheckResult {
        check: Check::Toda,
        status,
        detail: format!(
            "sum_v drift {sum_v:.3e} (tol {:.1e}), spectral drift {spectral:.3e} (tol {:.1e})",
            tol.sum_v, tol.spectral
        ),
    }
}

fn on_type3(tr: &Trajectory) -> bool {
    let (sum, product) = invariant_set_residuals(&tr.states[0]);
    sum <= INVARIANT_SET && product <= INVARIANT_SET
}

fn closed_form(tr: &Trajectory, tol: f64) -> CheckResult {
    if !on_type3(tr) {
        return CheckResult::skipped(Check::ClosedForm, "initial state is not on the type (iii) invariant set");
    }
    let consts = match type3_constants(&tr.states[0]) {
        Ok(c) => c,
        Err(e) => return CheckResult::failed(Check::ClosedForm, e.to_string()),
    };
    let err = tr
        .times
        .iter()
        .zip(&tr.states)
        .map(|(t, s)| ((2.0 * s.v1).exp() - closed_form_y(*t, &consts)).abs())
        .fold(0.0, f64::max);
    CheckResult::measured(Check::ClosedForm, err, tol, "max |y - closed form|")
}

fn classify_check(tr: &Trajectory, tol: f64) -> CheckResult {
    let coeffs: Vec<_> = tr.states.iter().map(|s| s.to_primitive()).collect();
    match classify(&coeffs, tol) {
        Ok(t) => CheckResult { check: Check::Classify, status: Status::Pass, detail: format!("type {t}") },
        Err(e) => CheckResult::failed(Check::Classify, e.to_string()),
    }
}

fn aks(curve: &SeedCurve, tr: &Trajectory, tol: f64) -> CheckResult {
    let ps: Vec<Mat7> = tr.states.iter().map(p_matrix).collect();
    match aks_consistency(&curve.run.frames, &ps) {
        Ok(r) => CheckResult::measured(Check::Aks, r, tol, "max ||k^T A k - P||_F"),
        Err(e) => CheckResult::failed(Check::Aks, e.to_string()),
    }
}

fn sl(curve: &SeedCurve, tr: &Trajectory, tol: &Tolerances) -> CheckResult {
    if !on_type3(tr) {
        return CheckResult::skipped(Check::Sl, "initial state is not on the type (iii) invariant set");
    }
    match sl_normal(&curve.grid, &curve.coeffs, tol.sl_alpha) {
        Ok(r) => {
            let mut res = CheckResult::measured(Check::Sl, r.constancy, tol.sl_normal, "normal constancy");
            res.detail = format!("alpha {:.6}, {}", r.alpha, res.detail);
            res
        }
        Err(e) => CheckResult::failed(Check::Sl, e.to_string()),
    }
}

/// Run the selected checks on one seed.
pub fn run_checks(checks: &[Check], tol: &Tolerances, art: &Artifacts) -> Vec<CheckResult> {
    let mut out = Vec::new();
    for &check in checks {
        if check == Check::Algebra {
            out.push(algebra(tol.algebra));
            continue;
        }
        let tr = match &art.trajectory {
            Ok(tr) => tr,
            Err(e) => {
                out.push(CheckResult::failed(check, format!("integration failed: {e}")));
                continue;
            }
        };
        let needs_curve = !matches!(check, Check::Toda | Check::ClosedForm | Check::Classify);
        let curve = match (&art.curve, needs_curve) {
            (Ok(c), _) => Some(c),
            (Err(e), true) => {
                out.push(CheckResult::failed(check, format!("curve build failed: {e}")));
                continue;
            }
            (Err(_), false) => None,
        };
        let result = match (check, curve) {
            (Check::Toda, _) => toda(tr, tol),
            (Check::ClosedForm, _) => closed_form(tr, tol.closed_form),
            (Check::Classify, _) => classify_check(tr, tol.classify),
            (Check::Aks, Some(c)) => aks(c, tr, tol.aks),
            (Check::Frames, Some(c)) => {
                CheckResult::measured(Check::Frames, c.grid.frame_defect(), tol.frames, "frame defect")
            }
            (Check::Ac, Some(c)) => match almost_complex_residual(&c.grid) {
                Ok(r) => CheckResult::measured(Check::Ac, r, tol.ac, "almost complex residual"),
                Err(e) => CheckResult::failed(Check::Ac, e.to_string()),
            },
            (Check::Cone, Some(c)) => match cone_associativity(&c.grid) {
                Ok(r) => CheckResult::measured(Check::Cone, r.residual, tol.cone, "associator residual"),
                Err(e) => CheckResult::failed(Check::Cone, e.to_string()),
            },
            (Check::Sl, Some(c)) => sl(c, tr, tol),
            (Check::Quadric, Some(c)) => match quadric_lift(&c.grid) {
                Ok(r) => CheckResult::measured(Check::Quadric, r.isotropy, tol.quadric, "max |(Phi, Phi)|"),
                Err(e) => CheckResult::failed(Check::Quadric, e.to_string()),
            },
            (_, None) => unreachable!("curve checks always have a curve"),
            (Check::Algebra, _) => unreachable!("handled above"),
        };
        out.push(result);
    }
    out
}

/// One-line summary of the seed's spectrum.
pub fn spectrum_line(curve: &SeedCurve) -> String {
    let (l1, l2) = spectrum_pair(&curve.run.seed.a);
    match &curve.s_period {
        Some(r) => format!("A spectrum ({l1:.12}, {l2:.12}), ratio {}/{}, s period {:.12}", r.q, r.p, r.period),
        None => format!("A spectrum ({l1:.12}, {l2:.12}), no rational ratio found"),
    }
}
