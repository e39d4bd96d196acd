//! Eigenvalues of dense real nonsymmetric matrices.
//!
//! Standard three-stage pipeline: diagonal similarity balancing by powers of
//! two, Householder reduction to upper Hessenberg form, then Francis
//! double-shift QR iteration with deflation on small subdiagonal entries
//! (after the EISPACK `balanc`/`hqr` routines).

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::linalg::SquareMatrix;
use crate::scalar::Scalar;

/// QR sweeps allowed per eigenvalue before giving up.
pub const MAX_SWEEPS_PER_EIGENVALUE: usize = 60;

/// All eigenvalues of `m`, in no particular order.
pub fn eigenvalues<T: Scalar>(m: &SquareMatrix<T>) -> Result<Vec<Complex<T>>> {
    let mut a = m.clone();
    balance(&mut a);
    hessenberg(&mut a);
    hessenberg_qr(&mut a)
}

/// Scales rows and columns by powers of two until each off-diagonal row
/// norm is within a factor of two of the matching column norm. Exact in
/// binary floating point; preserves eigenvalues.
pub fn balance<T: Scalar>(a: &mut SquareMatrix<T>) {
    let n = a.order();
    let radix = T::lit(2.0);
    let radix_sq = radix * radix;
    let mut done = false;
    while !done {
        done = true;
        for i in 0..n {
            let mut c = T::zero();
            let mut r = T::zero();
            for j in (0..n).filter(|&j| j != i) {
                c += a[(j, i)].abs();
                r += a[(i, j)].abs();
            }
            if c == T::zero() || r == T::zero() {
                continue;
            }
            let s = c + r;
            let mut f = T::one();
            let mut g = r / radix;
            while c < g {
                f *= radix;
                c *= radix_sq;
            }
            g = r * radix;
            while c > g {
                f /= radix;
                c /= radix_sq;
            }
            if (c + r) / f < T::lit(0.95) * s {
                done = false;
                let inv = T::one() / f;
                for j in 0..n {
                    a[(i, j)] *= inv;
                }
                for j in 0..n {
                    a[(j, i)] *= f;
                }
            }
        }
    }
}

/// In-place orthogonal reduction to upper Hessenberg form.
pub fn hessenberg<T: Scalar>(a: &mut SquareMatrix<T>) {
    let n = a.order();
    if n < 3 {
        return;
    }
    let two = T::lit(2.0);
    let mut v = vec![T::zero(); n];
    for k in 0..n - 2 {
        let norm = (k + 1..n).map(|i| a[(i, k)] * a[(i, k)]).sum::<T>().sqrt();
        if norm == T::zero() {
            continue;
        }
        let head = a[(k + 1, k)];
        let alpha = if head >= T::zero() { -norm } else { norm };
        for i in k + 1..n {
            v[i] = a[(i, k)];
        }
        v[k + 1] -= alpha;
        let vnorm_sq: T = (k + 1..n).map(|i| v[i] * v[i]).sum();
        if vnorm_sq == T::zero() {
            continue;
        }
        let scale = two / vnorm_sq;
        // A <- H A
        for j in 0..n {
            let dot: T = (k + 1..n).map(|i| v[i] * a[(i, j)]).sum();
            let f = scale * dot;
            for i in k + 1..n {
                a[(i, j)] -= f * v[i];
            }
        }
        // A <- A H
        for i in 0..n {
            let dot: T = (k + 1..n).map(|j| a[(i, j)] * v[j]).sum();
            let f = scale * dot;
            for j in k + 1..n {
                a[(i, j)] -= f * v[j];
            }
        }
        a[(k + 1, k)] = alpha;
        for i in k + 2..n {
            a[(i, k)] = T::zero();
        }
    }
}

fn sign<T: Scalar>(magnitude: T, of: T) -> T {
    if of >= T::zero() {
        magnitude.abs()
    } else {
        -magnitude.abs()
    }
}

/// Eigenvalues of an upper Hessenberg matrix by Francis double-shift QR.
/// Destroys `a`.
pub fn hessenberg_qr<T: Scalar>(a: &mut SquareMatrix<T>) -> Result<Vec<Complex<T>>> {
    let n = a.order();
    let zero = T::zero();
    let mut wr = vec![zero; n];
    let mut wi = vec![zero; n];
    if n == 0 {
        return Ok(Vec::new());
    }

    let mut anorm = zero;
    for i in 0..n {
        for j in i.saturating_sub(1)..n {
            anorm += a[(i, j)].abs();
        }
    }

    let half = T::lit(0.5);
    let mut nn = n as isize - 1;
    let mut shift = zero;
    while nn >= 0 {
        let mut its = 0;
        loop {
            // look for a negligible subdiagonal element
            let mut l = nn;
            while l >= 1 {
                let lu = l as usize;
                let mut s = a[(lu - 1, lu - 1)].abs() + a[(lu, lu)].abs();
                if s == zero {
                    s = anorm;
                }
                if a[(lu, lu - 1)].abs() + s == s {
                    a[(lu, lu - 1)] = zero;
                    break;
                }
                l -= 1;
            }

            let nu = nn as usize;
            let mut x = a[(nu, nu)];
            if l == nn {
                wr[nu] = x + shift;
                wi[nu] = zero;
                nn -= 1;
                break;
            }
            let mut y = a[(nu - 1, nu - 1)];
            let mut w = a[(nu, nu - 1)] * a[(nu - 1, nu)];
            if l == nn - 1 {
                let p = half * (y - x);
                let q = p * p + w;
                let z = q.abs().sqrt();
                x += shift;
                if q >= zero {
                    let z = p + sign(z, p);
                    wr[nu - 1] = x + z;
                    wr[nu] = if z != zero { x - w / z } else { x + z };
                    wi[nu - 1] = zero;
                    wi[nu] = zero;
                } else {
                    wr[nu - 1] = x + p;
                    wr[nu] = x + p;
                    wi[nu - 1] = -z;
                    wi[nu] = z;
                }
                nn -= 2;
                break;
            }

            if its == MAX_SWEEPS_PER_EIGENVALUE {
                return Err(Error::EigenNotConverged(its));
            }
            if its > 0 && its % 10 == 0 {
                // exceptional shift
                shift += x;
                for i in 0..=nu {
                    a[(i, i)] -= x;
                }
                let s = a[(nu, nu - 1)].abs() + a[(nu - 1, nu - 2)].abs();
                x = T::lit(0.75) * s;
                y = x;
                w = T::lit(-0.4375) * s * s;
            }
            its += 1;

            // two consecutive small subdiagonal elements
            let lu = l as usize;
            let mut m = nu - 2;
            let (mut p, mut q, mut r);
            loop {
                let z = a[(m, m)];
                let rr = x - z;
                let ss = y - z;
                p = (rr * ss - w) / a[(m + 1, m)] + a[(m, m + 1)];
                q = a[(m + 1, m + 1)] - z - rr - ss;
                r = a[(m + 2, m + 1)];
                let s = p.abs() + q.abs() + r.abs();
                p /= s;
                q /= s;
                r /= s;
                if m == lu {
                    break;
                }
                let u = a[(m, m - 1)].abs() * (q.abs() + r.abs());
                let v = p.abs() * (a[(m - 1, m - 1)].abs() + z.abs() + a[(m + 1, m + 1)].abs());
                if u + v == v {
                    break;
                }
                m -= 1;
            }
            for i in m + 2..=nu {
                a[(i, i - 2)] = zero;
                if i != m + 2 {
                    a[(i, i - 3)] = zero;
                }
            }

            // double QR step on rows l..=nn and columns m..=nn
            for k in m..nu {
                if k != m {
                    p = a[(k, k - 1)];
                    q = a[(k + 1, k - 1)];
                    r = if k != nu - 1 { a[(k + 2, k - 1)] } else { zero };
                    x = p.abs() + q.abs() + r.abs();
                    if x != zero {
                        p /= x;
                        q /= x;
                        r /= x;
                    }
                }
                let s = sign((p * p + q * q + r * r).sqrt(), p);
                if s == zero {
                    continue;
                }
                if k == m {
                    if lu != m {
                        a[(k, k - 1)] = -a[(k, k - 1)];
                    }
                } else {
                    a[(k, k - 1)] = -s * x;
                }
                p += s;
                x = p / s;
                y = q / s;
                let z = r / s;
                q /= p;
                r /= p;
                for j in k..=nu {
                    let mut pp = a[(k, j)] + q * a[(k + 1, j)];
                    if k != nu - 1 {
                        pp += r * a[(k + 2, j)];
                        a[(k + 2, j)] -= pp * z;
                    }
                    a[(k + 1, j)] -= pp * y;
                    a[(k, j)] -= pp * x;
                }
                let upper = nu.min(k + 3);
                for i in lu..=upper {
                    let mut pp = x * a[(i, k)] + y * a[(i, k + 1)];
                    if k != nu - 1 {
                        pp += z * a[(i, k + 2)];
                        a[(i, k + 2)] -= pp * r;
                    }
                    a[(i, k + 1)] -= pp * q;
                    a[(i, k)] -= pp;
                }
            }
        }
    }
    Ok(wr.into_iter().zip(wi).map(|(re, im)| Complex::new(re, im)).collect())
}
