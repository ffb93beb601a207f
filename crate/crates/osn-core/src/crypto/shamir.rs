//! Shamir secret sharing over Z_q.
//!
//! Shares are points (x, f(x)) of a random polynomial with f(0) = secret.
//! X-coordinates are small positive integers: share i uses x = i + 1 when
//! splitting over policy-tree children, or an explicit index for proxy
//! shares.

use rand::RngCore;

use super::group::{Group, Scalar};

/// Splits `secret` into `n` shares with reconstruction threshold `t`.
/// Share for x-coordinate i+1 is at index i.
pub fn share(group: &Group, secret: &Scalar, n: u32, t: u32, rng: &mut impl RngCore) -> Vec<Scalar> {
    assert!(t >= 1 && t <= n, "threshold out of range");
    let mut coeffs = Vec::with_capacity(t as usize);
    coeffs.push(secret.clone());
    for _ in 1..t {
        coeffs.push(group.random_scalar(rng));
    }
    (1..=n).map(|x| eval_poly(group, &coeffs, x)).collect()
}

fn eval_poly(group: &Group, coeffs: &[Scalar], x: u32) -> Scalar {
    let x = group.scalar_from_u64(u64::from(x));
    let mut acc = group.scalar_from_u64(0);
    for coeff in coeffs.iter().rev() {
        acc = group.mul_scalars(&acc, &x);
        acc = group.add_scalars(&acc, coeff);
    }
    acc
}

/// Lagrange coefficients at zero for the given x-coordinates.
pub fn lagrange_at_zero(group: &Group, xs: &[u32]) -> Vec<Scalar> {
    xs.iter()
        .map(|&i| {
            let mut num = group.scalar_from_u64(1);
            let mut den = group.scalar_from_u64(1);
            let xi = group.scalar_from_u64(u64::from(i));
            for &j in xs {
                if i == j {
                    continue;
                }
                let xj = group.scalar_from_u64(u64::from(j));
                num = group.mul_scalars(&num, &xj);
                den = group.mul_scalars(&den, &group.sub_scalars(&xj, &xi));
            }
            group.mul_scalars(&num, &group.invert_scalar(&den).expect("distinct x-coordinates"))
        })
        .collect()
}

/// Reconstructs f(0) from (x, share) points. The caller must supply exactly
/// the threshold number of distinct points.
pub fn reconstruct(group: &Group, points: &[(u32, Scalar)]) -> Scalar {
    let xs: Vec<u32> = points.iter().map(|(x, _)| *x).collect();
    let coeffs = lagrange_at_zero(group, &xs);
    let mut acc = group.scalar_from_u64(0);
    for ((_, share), coeff) in points.iter().zip(coeffs.iter()) {
        acc = group.add_scalars(&acc, &group.mul_scalars(share, coeff));
    }
    acc
}
