//! Lipschitz constants of the saturated nonlinearity and spectral gap
//! certification for the parabolic operator and the damped-wave family.

use num_complex::Complex64;

use crate::error::{domain, Result};
use crate::spectral::eigenvalue;

pub const DEFAULT_EPS_TOL: f64 = 1e-6;
pub const DEFAULT_N_MAX: usize = 200;

/// One evaluated gap inequality `lhs > rhs`.
#[derive(Debug, Clone, PartialEq)]
pub struct Margin {
    pub name: String,
    pub lhs: f64,
    pub rhs: f64,
}

impl Margin {
    fn new(name: impl Into<String>, lhs: f64, rhs: f64) -> Self {
        Self {
            name: name.into(),
            lhs,
            rhs,
        }
    }

    pub fn holds(&self) -> bool {
        self.lhs > self.rhs
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GapCertificate {
    pub delta: f64,
    pub ell: f64,
    pub n_star_parabolic: usize,
    pub eps: f64,
    pub n_star_hyperbolic: Option<usize>,
    pub eps_s_estimate: f64,
    /// False when no qualifying eps was found down to the search tolerance.
    pub eps_s_found: bool,
    pub margins: Vec<Margin>,
}

/// `ℓ = 1 + 3(2δ − 1)²`.
pub fn lipschitz_constant(delta: f64) -> Result<f64> {
    if !(delta > 1.0) || !delta.is_finite() {
        return domain(format!("delta = {delta} must exceed 1"));
    }
    let s = 2.0 * delta - 1.0;
    Ok(1.0 + 3.0 * s * s)
}

fn parabolic_gap_holds(n: usize, ell: f64) -> bool {
    let gap = eigenvalue(n + 1) - eigenvalue(n);
    gap > 4.0 * ell && eigenvalue(n + 1) > 2.0 * ell
}

/// Smallest `N` with `λ_{N+1} − λ_N > 4ℓ` and `λ_{N+1} > 2ℓ`, i.e. the least
/// integer above `24δ(δ−1) + 15/2`.
pub fn parabolic_min_dim(delta: f64) -> Result<usize> {
    let ell = lipschitz_constant(delta)?;
    let bound = 24.0 * delta * (delta - 1.0) + 7.5;
    let mut n = (bound.floor() as usize + 1).max(1);
    // the closed form and the raw inequalities can disagree by one in the
    // last ulp; the raw inequalities win
    while n > 1 && parabolic_gap_holds(n - 1, ell) {
        n -= 1;
    }
    while !parabolic_gap_holds(n, ell) {
        n += 1;
    }
    Ok(n)
}

/// Roots of `μ² − 2αμ + λ_j = 0` with `α = 1/(2√ε)`, i.e. `α ± sqrt(α² − λ_j)`.
/// Returned as (smaller real part or minus branch, plus branch).
pub fn hyperbolic_eigenvalues(eps: f64, j: usize) -> Result<(Complex64, Complex64)> {
    if !(eps > 0.0) || !eps.is_finite() {
        return domain(format!("eps = {eps} must be positive"));
    }
    if j == 0 {
        return domain("mode index starts at 1");
    }
    let lambda = eigenvalue(j);
    let alpha = 0.5 / eps.sqrt();
    let t = 1.0 - 4.0 * eps * lambda;
    if t.abs() <= 4.0 * f64::EPSILON {
        let a = Complex64::new(alpha, 0.0);
        return Ok((a, a));
    }
    if t > 0.0 {
        let root = (alpha * alpha - lambda).sqrt();
        let plus = alpha + root;
        // product of the roots is λ_j; avoids cancellation in α − root
        let minus = lambda / plus;
        Ok((Complex64::new(minus, 0.0), Complex64::new(plus, 0.0)))
    } else {
        let im = (lambda - alpha * alpha).sqrt();
        Ok((Complex64::new(alpha, -im), Complex64::new(alpha, im)))
    }
}

/// Smallest real part among the two eigenvalues of mode `j`, measured in the
/// original time of `εu_tt + u_t − Δu = …`. The rescaled roots are multiplied
/// by `2α = 1/√ε`, so the slow branch tends to `λ_j` as `ε → 0`.
pub fn slow_rate(eps: f64, j: usize) -> Result<f64> {
    let (minus, _) = hyperbolic_eigenvalues(eps, j)?;
    Ok(minus.re / eps.sqrt())
}

/// First `N ≤ n_max` meeting the hyperbolic gap inequalities, with the margins
/// evaluated along the way.
fn hyperbolic_dim(ell: f64, eps: f64, n_max: usize) -> Result<(Option<usize>, Vec<Margin>)> {
    let mut margins = Vec::new();
    let mut prev = slow_rate(eps, 1)?;
    for n in 1..=n_max {
        let next = slow_rate(eps, n + 1)?;
        let gap = Margin::new(format!("hyp_gap_N{n}"), next - prev, 4.0 * ell);
        let size = Margin::new(format!("hyp_size_N{n}"), next, 2.0 * ell);
        let ok = gap.holds() && size.holds();
        margins.push(gap);
        margins.push(size);
        if ok {
            return Ok((Some(n), margins));
        }
        prev = next;
    }
    Ok((None, margins))
}

fn hyperbolic_qualifies(ell: f64, eps: f64, n_max: usize) -> Result<bool> {
    Ok(hyperbolic_dim(ell, eps, n_max)?.0.is_some())
}

/// Result of the threshold search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpsSearch {
    pub eps_s: f64,
    pub found: bool,
}

/// Threshold `ε_s`: the inequalities hold for every `ε` on a `tol`-spaced
/// grid in `(0, ε_s]` and fail at the next grid point. The set of qualifying
/// `ε` is not an interval (isolated islands appear where the gap falls between
/// the last real mode and the plateau `1/(2ε)`), so the scan walks up from
/// zero instead of bisecting.
pub fn eps_s_search(delta: f64, n_max: usize, tol: f64) -> Result<EpsSearch> {
    if !(tol > 0.0) || tol > 0.25 {
        return domain(format!("tol = {tol} must lie in (0, 1/4]"));
    }
    let ell = lipschitz_constant(delta)?;
    let steps = (0.25 / tol).floor() as usize;
    let mut last = 0.0;
    for i in 1..=steps {
        let eps = i as f64 * tol;
        if !hyperbolic_qualifies(ell, eps, n_max)? {
            break;
        }
        last = eps;
    }
    Ok(EpsSearch {
        eps_s: last,
        found: last > 0.0,
    })
}

/// Full certificate at `(δ, ε)`: parabolic dimension, hyperbolic dimension
/// (if any `N ≤ n_max` qualifies) and the threshold `ε_s`.
pub fn certify(delta: f64, eps: f64, n_max: usize) -> Result<GapCertificate> {
    certify_with_tol(delta, eps, n_max, DEFAULT_EPS_TOL)
}

pub fn certify_with_tol(delta: f64, eps: f64, n_max: usize, tol: f64) -> Result<GapCertificate> {
    let ell = lipschitz_constant(delta)?;
    if !(eps > 0.0 && eps <= 1.0) {
        return domain(format!("eps = {eps} outside (0, 1]"));
    }
    let n_p = parabolic_min_dim(delta)?;
    let mut margins = vec![
        Margin::new(
            "par_gap",
            eigenvalue(n_p + 1) - eigenvalue(n_p),
            4.0 * ell,
        ),
        Margin::new("par_size", eigenvalue(n_p + 1), 2.0 * ell),
    ];
    let (n_h, hyp) = hyperbolic_dim(ell, eps, n_max)?;
    margins.extend(hyp);
    let search = eps_s_search(delta, n_max, tol)?;
    Ok(GapCertificate {
        delta,
        ell,
        n_star_parabolic: n_p,
        eps,
        n_star_hyperbolic: n_h,
        eps_s_estimate: search.eps_s,
        eps_s_found: search.found,
        margins,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    // Brute force over the raw inequalities with λ_n = n².
    fn brute_min_dim(delta: f64) -> usize {
        let s = 2.0 * delta - 1.0;
        let ell = 1.0 + 3.0 * s * s;
        (1..=10_000usize)
            .find(|&n| {
                let a = (n * n) as f64;
                let b = ((n + 1) * (n + 1)) as f64;
                b - a > 4.0 * ell && b > 2.0 * ell
            })
            .unwrap()
    }

    #[test]
    fn lipschitz_examples() {
        assert_eq!(lipschitz_constant(1.5).unwrap(), 13.0);
        assert_eq!(lipschitz_constant(2.0).unwrap(), 28.0);
        assert_abs_diff_eq!(lipschitz_constant(1.0 + 1e-12).unwrap(), 4.0, epsilon = 1e-10);
        assert!(lipschitz_constant(1.0).is_err());
        assert!(lipschitz_constant(0.9).is_err());
    }

    #[test]
    fn parabolic_dim_examples() {
        assert_eq!(parabolic_min_dim(1.5).unwrap(), 26);
        assert_eq!(parabolic_min_dim(1.1).unwrap(), 11);
        assert_eq!(parabolic_min_dim(2.0).unwrap(), 56);
        assert!(parabolic_min_dim(1.0).is_err());
        // N = 25 fails at δ = 1.5: 51 ≤ 52
        assert!(!parabolic_gap_holds(25, 13.0));
        assert!(parabolic_gap_holds(26, 13.0));
    }

    #[test]
    fn parabolic_dim_matches_brute_force() {
        for i in 1..400 {
            let delta = 1.0 + i as f64 * 0.0123;
            assert_eq!(parabolic_min_dim(delta).unwrap(), brute_min_dim(delta), "delta {delta}");
        }
    }

    #[test]
    fn hyperbolic_eigen_examples() {
        let (a, b) = hyperbolic_eigenvalues(0.25, 1).unwrap();
        assert_eq!(a, Complex64::new(1.0, 0.0));
        assert_eq!(b, Complex64::new(1.0, 0.0));
        let (a, b) = hyperbolic_eigenvalues(1.0, 1).unwrap();
        assert_abs_diff_eq!(a.re, 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(b.re, 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(b.im, 0.75f64.sqrt(), epsilon = 1e-15);
        assert_abs_diff_eq!(a.im, -(0.75f64.sqrt()), epsilon = 1e-15);
        let (a, b) = hyperbolic_eigenvalues(0.01, 3).unwrap();
        assert_abs_diff_eq!(a.re, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(b.re, 9.0, epsilon = 1e-12);
        assert_eq!(a.im, 0.0);
        assert!(hyperbolic_eigenvalues(0.0, 1).is_err());
        assert!(hyperbolic_eigenvalues(-1.0, 1).is_err());
    }

    #[test]
    fn certify_fails_at_eps_one() {
        let c = certify(1.5, 1.0, 100).unwrap();
        assert_eq!(c.n_star_hyperbolic, None);
        assert_eq!(c.ell, 13.0);
        assert_eq!(c.n_star_parabolic, 26);
        assert!(!c.margins.is_empty());
    }

    #[test]
    fn hyperbolic_dim_tends_to_parabolic() {
        let ell = 13.0;
        let mut last = None;
        for eps in [1e-2, 1e-3, 1e-4, 1e-5, 1e-6] {
            let (n, _) = hyperbolic_dim(ell, eps, 200).unwrap();
            // raw condition recomputed independently
            if let Some(n) = n {
                let lo = |j: usize| {
                    let l = (j * j) as f64;
                    let t = 1.0 - 4.0 * eps * l;
                    if t >= 0.0 {
                        (1.0 - t.sqrt()) / (2.0 * eps)
                    } else {
                        1.0 / (2.0 * eps)
                    }
                };
                assert!(lo(n + 1) - lo(n) > 52.0 - 1e-6);
                assert!(lo(n + 1) > 26.0);
            }
            last = n;
        }
        assert_eq!(last, Some(26));
    }

    #[test]
    fn margins_nonempty() {
        for n_max in [1, 5, 50] {
            let c = certify(1.5, 0.5, n_max).unwrap();
            assert!(!c.margins.is_empty());
        }
    }

    #[test]
    fn eps_s_bounds_and_linear_scan() {
        let tol = 1e-5;
        let s = eps_s_search(1.5, 200, tol).unwrap();
        assert!(s.found);
        assert!(s.eps_s <= 0.25 && s.eps_s > 0.0);
        // linear-scan oracle at resolution tol
        let ell = 13.0;
        let steps = (0.25 / tol) as usize;
        let mut first_fail = None;
        for i in 1..=steps {
            let eps = i as f64 * tol;
            if !hyperbolic_qualifies(ell, eps, 200).unwrap() {
                first_fail = Some(eps);
                break;
            }
        }
        let first_fail = first_fail.unwrap();
        assert!((first_fail - tol - s.eps_s).abs() <= 1e-12, "scan {first_fail} vs {}", s.eps_s);
        // islands of success above the threshold exist
        assert!(hyperbolic_qualifies(ell, 0.0031, 200).unwrap());
        assert!(!hyperbolic_qualifies(ell, 0.0029, 200).unwrap());
        // success below the returned value
        for i in 1..200 {
            let eps = s.eps_s * i as f64 / 200.0;
            assert!(hyperbolic_qualifies(ell, eps, 200).unwrap(), "eps {eps}");
        }
    }

    proptest! {
        #[test]
        fn characteristic_identity_and_vieta(log_eps in -8.0f64..0.0, j in 1usize..300) {
            let eps = 10f64.powf(log_eps);
            let alpha = 0.5 / eps.sqrt();
            let lambda = (j * j) as f64;
            let (a, b) = hyperbolic_eigenvalues(eps, j).unwrap();
            for mu in [a, b] {
                let r = mu * mu - 2.0 * alpha * mu + lambda;
                let scale = lambda.max(alpha * alpha);
                prop_assert!(r.norm() <= 1e-10 * scale);
            }
            prop_assert!(((a * b).re - lambda).abs() <= 1e-10 * lambda);
            prop_assert!(((a + b).re - 2.0 * alpha).abs() <= 1e-10 * alpha);
        }

        #[test]
        fn certify_monotone_in_n_max(eps in 1e-6f64..0.25, n1 in 1usize..80, extra in 0usize..80) {
            let ell = 13.0;
            let (a, _) = hyperbolic_dim(ell, eps, n1).unwrap();
            let (b, _) = hyperbolic_dim(ell, eps, n1 + extra).unwrap();
            if let Some(a) = a {
                prop_assert_eq!(b, Some(a));
            }
        }
    }
}
