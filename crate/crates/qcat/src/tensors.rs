//! Clebsch-Gordan coefficients, orthonormal spherical tensor operators, and
//! spherical harmonics.
//!
//! Coefficients are assembled in exact big-rational arithmetic (the square of
//! every coefficient is rational) and converted to floats once at the end, so
//! the tensor-operator basis is orthonormal to machine precision.

use num::bigint::BigInt;
use num::rational::Ratio;
use num::traits::{One, Signed, ToPrimitive, Zero};
use num_complex::Complex64 as C64;

use crate::linalg::CMat;
use crate::spin::Spin;

type Big = Ratio<BigInt>;

fn factorial(n: i64) -> Big {
    debug_assert!(n >= 0);
    let mut acc = BigInt::one();
    for k in 2..=n {
        acc *= BigInt::from(k);
    }
    Ratio::from_integer(acc)
}

/// Clebsch-Gordan coefficient <j1 m1 j2 m2 | J M>, all arguments doubled so
/// half-integers stay exact.
pub fn clebsch_gordan(
    twice_j1: i64,
    twice_m1: i64,
    twice_j2: i64,
    twice_m2: i64,
    twice_j: i64,
    twice_m: i64,
) -> f64 {
    if twice_m1 + twice_m2 != twice_m {
        return 0.0;
    }
    if twice_m1.abs() > twice_j1 || twice_m2.abs() > twice_j2 || twice_m.abs() > twice_j {
        return 0.0;
    }
    // triangle conditions, and all factorial arguments must be integers
    let a = (twice_j1 + twice_j2 - twice_j) / 2;
    let b = (twice_j1 - twice_j2 + twice_j) / 2;
    let c = (-twice_j1 + twice_j2 + twice_j) / 2;
    if (twice_j1 + twice_j2 - twice_j) % 2 != 0 || a < 0 || b < 0 || c < 0 {
        return 0.0;
    }
    if (twice_j1 - twice_m1) % 2 != 0 || (twice_j2 - twice_m2) % 2 != 0 {
        return 0.0;
    }

    let j1_minus_m1 = (twice_j1 - twice_m1) / 2;
    let j1_plus_m1 = (twice_j1 + twice_m1) / 2;
    let j2_minus_m2 = (twice_j2 - twice_m2) / 2;
    let j2_plus_m2 = (twice_j2 + twice_m2) / 2;
    let j_minus_m = (twice_j - twice_m) / 2;
    let j_plus_m = (twice_j + twice_m) / 2;

    let prefactor = factorial(a) * factorial(b) * factorial(c)
        / factorial((twice_j1 + twice_j2 + twice_j) / 2 + 1)
        * Big::from_integer(BigInt::from(twice_j + 1))
        * factorial(j_plus_m)
        * factorial(j_minus_m)
        * factorial(j1_minus_m1)
        * factorial(j1_plus_m1)
        * factorial(j2_minus_m2)
        * factorial(j2_plus_m2);

    // summation limits keep every factorial argument nonnegative
    let k_min = 0
        .max((twice_j2 - twice_j - twice_m1) / 2)
        .max((twice_j1 + twice_m2 - twice_j) / 2);
    let k_max = a.min(j1_minus_m1).min(j2_plus_m2);

    let mut sum = Big::zero();
    for k in k_min..=k_max {
        let denom = factorial(k)
            * factorial(a - k)
            * factorial(j1_minus_m1 - k)
            * factorial(j2_plus_m2 - k)
            * factorial((twice_j - twice_j2 + twice_m1) / 2 + k)
            * factorial((twice_j - twice_j1 - twice_m2) / 2 + k);
        let term = denom.recip();
        if k % 2 == 0 {
            sum += term;
        } else {
            sum -= term;
        }
    }
    if sum.is_zero() {
        return 0.0;
    }
    let magnitude_sq = prefactor * &sum * &sum;
    let value = ratio_to_f64(&magnitude_sq).sqrt();
    if sum.is_negative() {
        -value
    } else {
        value
    }
}

fn ratio_to_f64(r: &Big) -> f64 {
    // split into quotient and remainder to stay accurate for huge numerators
    let (numer, denom) = (r.numer(), r.denom());
    let quot = numer / denom;
    let rem = numer - &quot * denom;
    quot.to_f64().unwrap_or(f64::MAX)
        + Ratio::new(rem, denom.clone()).to_f64().unwrap_or(0.0)
}

/// Orthonormal irreducible tensor operator T_kq for the given spin:
/// matrix elements <I m'|T_kq|I m> = sqrt((2k+1)/(2I+1)) <I m k q | I m'>,
/// satisfying trace(T_kq† T_k'q') = delta_kk' delta_qq'.
pub fn spherical_tensor(spin: Spin, k: u32, q: i32) -> CMat {
    let d = spin.dim();
    let twice_i = spin.twice() as i64;
    let norm = ((2 * k + 1) as f64 / (twice_i + 1) as f64).sqrt();
    let mut t = CMat::zeros(d, d);
    // row index a holds m' = I - a, column index b holds m = I - b
    for a in 0..d {
        let twice_mp = twice_i - 2 * a as i64;
        for b in 0..d {
            let twice_m = twice_i - 2 * b as i64;
            let cg = clebsch_gordan(
                twice_i,
                twice_m,
                2 * k as i64,
                2 * q as i64,
                twice_i,
                twice_mp,
            );
            if cg != 0.0 {
                t[(a, b)] = C64::new(norm * cg, 0.0);
            }
        }
    }
    t
}

/// Associated Legendre P_l^m(x) with the Condon-Shortley phase, m >= 0.
fn assoc_legendre(l: u32, m: u32, x: f64) -> f64 {
    debug_assert!(m <= l);
    let somx2 = ((1.0 - x) * (1.0 + x)).max(0.0).sqrt();
    let mut pmm = 1.0;
    for k in 1..=m {
        pmm *= -((2 * k - 1) as f64) * somx2;
    }
    if l == m {
        return pmm;
    }
    let mut pmmp1 = x * (2 * m + 1) as f64 * pmm;
    if l == m + 1 {
        return pmmp1;
    }
    let mut pll = 0.0;
    for ll in (m + 2)..=l {
        pll = (x * (2 * ll - 1) as f64 * pmmp1 - (ll + m - 1) as f64 * pmm) / (ll - m) as f64;
        pmm = pmmp1;
        pmmp1 = pll;
    }
    pll
}

/// Spherical harmonic Y_kq(theta, phi), physics normalization with the
/// Condon-Shortley phase.
pub fn spherical_harmonic(k: u32, q: i32, theta: f64, phi: f64) -> C64 {
    let qa = q.unsigned_abs();
    debug_assert!(qa <= k);
    let mut log_ratio = 0.0; // ln((k-|q|)!/(k+|q|)!)
    for j in (k - qa + 1)..=(k + qa) {
        log_ratio -= (j as f64).ln();
    }
    let norm = ((2 * k + 1) as f64 / (4.0 * std::f64::consts::PI) * log_ratio.exp()).sqrt();
    let plm = assoc_legendre(k, qa, theta.cos());
    let y = C64::from_polar(norm * plm, qa as f64 * phi);
    if q >= 0 {
        y
    } else {
        // Y_{k,-|q|} = (-1)^|q| conj(Y_{k,|q|})
        let sign = if qa % 2 == 0 { 1.0 } else { -1.0 };
        y.conj() * sign
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    #[test]
    fn known_coefficients() {
        // two spin-1/2 into triplet/singlet
        assert_abs_diff_eq!(
            clebsch_gordan(1, 1, 1, -1, 2, 0),
            1.0 / 2.0f64.sqrt(),
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(
            clebsch_gordan(1, 1, 1, -1, 0, 0),
            1.0 / 2.0f64.sqrt(),
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(
            clebsch_gordan(1, -1, 1, 1, 0, 0),
            -1.0 / 2.0f64.sqrt(),
            epsilon = 1e-15
        );
        // 1 x 1 couplings
        assert_abs_diff_eq!(
            clebsch_gordan(2, 0, 2, 0, 4, 0),
            (2.0f64 / 3.0).sqrt(),
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(
            clebsch_gordan(2, 2, 2, -2, 0, 0),
            1.0 / 3.0f64.sqrt(),
            epsilon = 1e-15
        );
        // stretched state is always 1
        assert_abs_diff_eq!(clebsch_gordan(5, 5, 4, 4, 9, 9), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn orthogonality_sum_rule() {
        // sum over (m1, m2) of C(j1 m1 j2 m2 | J M) C(j1 m1 j2 m2 | J' M')
        // equals delta_JJ' delta_MM'
        let (tj1, tj2) = (5, 4);
        for tj in (tj1 - tj2).abs()..=(tj1 + tj2) {
            if (tj - (tj1 + tj2)) % 2 != 0 {
                continue;
            }
            for tjp in (tj1 - tj2).abs()..=(tj1 + tj2) {
                if (tjp - (tj1 + tj2)) % 2 != 0 {
                    continue;
                }
                for tm in (-tj..=tj).step_by(2) {
                    let mut acc = 0.0;
                    for tm1 in (-tj1..=tj1).step_by(2) {
                        let tm2 = tm - tm1;
                        acc += clebsch_gordan(tj1, tm1, tj2, tm2, tj, tm)
                            * clebsch_gordan(tj1, tm1, tj2, tm2, tjp, tm);
                    }
                    let want = if tj == tjp { 1.0 } else { 0.0 };
                    assert_abs_diff_eq!(acc, want, epsilon = 1e-14);
                }
            }
        }
    }

    #[test]
    fn tensor_operators_are_orthonormal() {
        for twice_i in [2u32, 5, 9] {
            let spin = Spin::from_twice(twice_i).unwrap();
            let mut basis = Vec::new();
            for k in 0..=twice_i {
                for q in -(k as i32)..=(k as i32) {
                    basis.push(spherical_tensor(spin, k, q));
                }
            }
            for (i, a) in basis.iter().enumerate() {
                for (j, b) in basis.iter().enumerate() {
                    let prod = (a.adjoint() * b).trace();
                    let want = if i == j { 1.0 } else { 0.0 };
                    assert!(
                        (prod.re - want).abs() < 1e-12 && prod.im.abs() < 1e-12,
                        "twice_i={twice_i} i={i} j={j}: {prod}"
                    );
                }
            }
        }
    }

    #[test]
    fn tensor_adjoint_symmetry() {
        let spin = Spin::from_twice(5).unwrap();
        for k in 0..=5u32 {
            for q in -(k as i32)..=(k as i32) {
                let t = spherical_tensor(spin, k, q);
                let t_neg = spherical_tensor(spin, k, -q);
                let sign = if q.rem_euclid(2) == 0 { 1.0 } else { -1.0 };
                let diff = crate::linalg::max_abs_diff(&t.adjoint(), &(t_neg * C64::new(sign, 0.0)));
                assert!(diff < 1e-13, "k={k} q={q}: {diff:e}");
            }
        }
    }

    #[test]
    fn low_order_harmonics_match_closed_forms() {
        let four_pi = 4.0 * PI;
        for (theta, phi) in [(0.3, 1.2), (1.9, 4.5), (2.8, 0.1)] {
            let y00 = spherical_harmonic(0, 0, theta, phi);
            assert_abs_diff_eq!(y00.re, (1.0 / four_pi).sqrt(), epsilon = 1e-14);
            let y10 = spherical_harmonic(1, 0, theta, phi);
            assert_abs_diff_eq!(y10.re, (3.0 / four_pi).sqrt() * theta.cos(), epsilon = 1e-13);
            let y11 = spherical_harmonic(1, 1, theta, phi);
            let want = -(3.0 / (2.0 * four_pi)).sqrt() * theta.sin();
            assert_abs_diff_eq!(y11.re, want * phi.cos(), epsilon = 1e-13);
            assert_abs_diff_eq!(y11.im, want * phi.sin(), epsilon = 1e-13);
            let y22 = spherical_harmonic(2, 2, theta, phi);
            let want = 0.25 * (15.0 / (2.0 * PI)).sqrt() * theta.sin() * theta.sin();
            assert_abs_diff_eq!(y22.re, want * (2.0 * phi).cos(), epsilon = 1e-13);
        }
    }

    #[test]
    fn harmonics_orthonormal_under_quadrature() {
        // Gauss-free check: uniform trapezoid in theta, rectangle in phi
        let n_t = 400;
        let n_p = 64;
        let pairs = [(0u32, 0i32), (1, 0), (2, 1), (3, -2)];
        for &(k1, q1) in &pairs {
            for &(k2, q2) in &pairs {
                let mut acc = C64::new(0.0, 0.0);
                for it in 0..=n_t {
                    let theta = PI * it as f64 / n_t as f64;
                    let w_t = if it == 0 || it == n_t { 0.5 } else { 1.0 };
                    for ip in 0..n_p {
                        let phi = 2.0 * PI * ip as f64 / n_p as f64;
                        let y1 = spherical_harmonic(k1, q1, theta, phi);
                        let y2 = spherical_harmonic(k2, q2, theta, phi);
                        acc += y1.conj() * y2 * theta.sin() * w_t;
                    }
                }
                acc *= (PI / n_t as f64) * (2.0 * PI / n_p as f64);
                let want = if (k1, q1) == (k2, q2) { 1.0 } else { 0.0 };
                assert!(
                    (acc.re - want).abs() < 1e-4 && acc.im.abs() < 1e-10,
                    "({k1},{q1})x({k2},{q2}): {acc}"
                );
            }
        }
    }
}
