//! Eigenvalues of a dense real matrix: balancing, reduction to upper
//! Hessenberg form by stabilized elimination, then Francis double-shift QR.
//!
//! Self-contained so that it can serve as an independent check against the
//! Schur-based solver used on the main stability path.

use alloc::vec;
use alloc::vec::Vec;
use num_complex::Complex64;
// Inherent float methods only exist when std is somewhere in the build graph.
#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{Error, Result};

/// Row-major square matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Square {
    n: usize,
    data: Vec<f64>,
}

impl Square {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            data: vec![0.0; n * n],
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n + j] = v;
    }

    #[inline]
    fn at(&mut self, i: isize, j: isize) -> &mut f64 {
        &mut self.data[i as usize * self.n + j as usize]
    }

    #[inline]
    fn g(&self, i: isize, j: isize) -> f64 {
        self.data[i as usize * self.n + j as usize]
    }
}

const MAX_ITERATIONS: usize = 60;

/// All eigenvalues of `m`, unordered. Conjugate pairs are emitted with the
/// positive imaginary part first.
pub fn eigenvalues(m: &Square) -> Result<Vec<Complex64>> {
    let mut a = m.clone();
    if a.data.iter().any(|x| !x.is_finite()) {
        return Err(Error::EigenFailure);
    }
    balance(&mut a);
    to_hessenberg(&mut a);
    hessenberg_qr(&mut a)
}

fn balance(a: &mut Square) {
    const RADIX: f64 = 2.0;
    let sqrdx = RADIX * RADIX;
    let n = a.n;
    let mut done = false;
    while !done {
        done = true;
        for i in 0..n {
            let mut r = 0.0;
            let mut c = 0.0;
            for j in 0..n {
                if j != i {
                    c += a.get(j, i).abs();
                    r += a.get(i, j).abs();
                }
            }
            if c != 0.0 && r != 0.0 {
                let mut g = r / RADIX;
                let mut f = 1.0;
                let s = c + r;
                while c < g {
                    f *= RADIX;
                    c *= sqrdx;
                }
                g = r * RADIX;
                while c > g {
                    f /= RADIX;
                    c /= sqrdx;
                }
                if (c + r) / f < 0.95 * s {
                    done = false;
                    let g = 1.0 / f;
                    for j in 0..n {
                        a.set(i, j, a.get(i, j) * g);
                    }
                    for j in 0..n {
                        a.set(j, i, a.get(j, i) * f);
                    }
                }
            }
        }
    }
}

fn to_hessenberg(a: &mut Square) {
    let n = a.n;
    for m in 1..n.saturating_sub(1) {
        let mut x = 0.0;
        let mut piv = m;
        for j in m..n {
            if a.get(j, m - 1).abs() > x.abs() {
                x = a.get(j, m - 1);
                piv = j;
            }
        }
        if piv != m {
            for j in (m - 1)..n {
                let t = a.get(piv, j);
                a.set(piv, j, a.get(m, j));
                a.set(m, j, t);
            }
            for j in 0..n {
                let t = a.get(j, piv);
                a.set(j, piv, a.get(j, m));
                a.set(j, m, t);
            }
        }
        if x != 0.0 {
            for i in (m + 1)..n {
                let mut y = a.get(i, m - 1);
                if y != 0.0 {
                    y /= x;
                    a.set(i, m - 1, y);
                    for j in m..n {
                        a.set(i, j, a.get(i, j) - y * a.get(m, j));
                    }
                    for j in 0..n {
                        a.set(j, m, a.get(j, m) + y * a.get(j, i));
                    }
                }
            }
        }
    }
    for i in 0..n {
        for j in 0..n {
            if i > j + 1 {
                a.set(i, j, 0.0);
            }
        }
    }
}

#[inline]
fn sign(a: f64, b: f64) -> f64 {
    if b >= 0.0 {
        a.abs()
    } else {
        -a.abs()
    }
}

fn hessenberg_qr(a: &mut Square) -> Result<Vec<Complex64>> {
    let n = a.n as isize;
    let mut wr = vec![0.0; a.n];
    let mut wi = vec![0.0; a.n];
    let mut anorm = 0.0;
    for i in 0..n {
        for j in (i - 1).max(0)..n {
            anorm += a.g(i, j).abs();
        }
    }
    let mut nn = n - 1;
    let mut t = 0.0;
    let (mut p, mut q, mut r) = (0.0, 0.0, 0.0);
    #[allow(unused_assignments)]
    let (mut x, mut y, mut z, mut w) = (0.0, 0.0, 0.0, 0.0);
    while nn >= 0 {
        let mut its = 0;
        let mut l;
        loop {
            l = nn;
            while l >= 1 {
                let mut s = a.g(l - 1, l - 1).abs() + a.g(l, l).abs();
                if s == 0.0 {
                    s = anorm;
                }
                if a.g(l, l - 1).abs() + s == s {
                    *a.at(l, l - 1) = 0.0;
                    break;
                }
                l -= 1;
            }
            x = a.g(nn, nn);
            if l == nn {
                wr[nn as usize] = x + t;
                wi[nn as usize] = 0.0;
                nn -= 1;
            } else {
                y = a.g(nn - 1, nn - 1);
                w = a.g(nn, nn - 1) * a.g(nn - 1, nn);
                if l == nn - 1 {
                    p = 0.5 * (y - x);
                    q = p * p + w;
                    z = q.abs().sqrt();
                    x += t;
                    let (lo, hi) = ((nn - 1) as usize, nn as usize);
                    if q >= 0.0 {
                        z = p + sign(z, p);
                        wr[lo] = x + z;
                        wr[hi] = x + z;
                        if z != 0.0 {
                            wr[hi] = x - w / z;
                        }
                        wi[lo] = 0.0;
                        wi[hi] = 0.0;
                    } else {
                        wr[lo] = x + p;
                        wr[hi] = x + p;
                        wi[lo] = z;
                        wi[hi] = -z;
                    }
                    nn -= 2;
                } else {
                    if its == MAX_ITERATIONS {
                        return Err(Error::EigenFailure);
                    }
                    if its % 10 == 0 && its > 0 {
                        // exceptional shift
                        t += x;
                        for i in 0..=nn {
                            *a.at(i, i) -= x;
                        }
                        let s = a.g(nn, nn - 1).abs() + a.g(nn - 1, nn - 2).abs();
                        x = 0.75 * s;
                        y = x;
                        w = -0.4375 * s * s;
                    }
                    its += 1;
                    let mut m = nn - 2;
                    while m >= l {
                        z = a.g(m, m);
                        r = x - z;
                        let s = y - z;
                        p = (r * s - w) / a.g(m + 1, m) + a.g(m, m + 1);
                        q = a.g(m + 1, m + 1) - z - r - s;
                        r = a.g(m + 2, m + 1);
                        let s = p.abs() + q.abs() + r.abs();
                        p /= s;
                        q /= s;
                        r /= s;
                        if m == l {
                            break;
                        }
                        let u = a.g(m, m - 1).abs() * (q.abs() + r.abs());
                        let v =
                            p.abs() * (a.g(m - 1, m - 1).abs() + z.abs() + a.g(m + 1, m + 1).abs());
                        if u + v == v {
                            break;
                        }
                        m -= 1;
                    }
                    for i in (m + 2)..=nn {
                        *a.at(i, i - 2) = 0.0;
                        if i != m + 2 {
                            *a.at(i, i - 3) = 0.0;
                        }
                    }
                    let mut k = m;
                    while k <= nn - 1 {
                        if k != m {
                            p = a.g(k, k - 1);
                            q = a.g(k + 1, k - 1);
                            r = 0.0;
                            if k != nn - 1 {
                                r = a.g(k + 2, k - 1);
                            }
                            x = p.abs() + q.abs() + r.abs();
                            if x != 0.0 {
                                p /= x;
                                q /= x;
                                r /= x;
                            }
                        }
                        let s = sign((p * p + q * q + r * r).sqrt(), p);
                        if s != 0.0 {
                            if k == m {
                                if l != m {
                                    *a.at(k, k - 1) = -a.g(k, k - 1);
                                }
                            } else {
                                *a.at(k, k - 1) = -s * x;
                            }
                            p += s;
                            x = p / s;
                            y = q / s;
                            z = r / s;
                            q /= p;
                            r /= p;
                            for j in k..=nn {
                                p = a.g(k, j) + q * a.g(k + 1, j);
                                if k != nn - 1 {
                                    p += r * a.g(k + 2, j);
                                    *a.at(k + 2, j) -= p * z;
                                }
                                *a.at(k + 1, j) -= p * y;
                                *a.at(k, j) -= p * x;
                            }
                            let mmin = if nn < k + 3 { nn } else { k + 3 };
                            for i in l..=mmin {
                                p = x * a.g(i, k) + y * a.g(i, k + 1);
                                if k != nn - 1 {
                                    p += z * a.g(i, k + 2);
                                    *a.at(i, k + 2) -= p * r;
                                }
                                *a.at(i, k + 1) -= p * q;
                                *a.at(i, k) -= p;
                            }
                        }
                        k += 1;
                    }
                }
            }
            if l >= nn - 1 {
                break;
            }
        }
    }
    Ok(wr
        .into_iter()
        .zip(wi)
        .map(|(re, im)| Complex64::new(re, im))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn from_rows(rows: &[&[f64]]) -> Square {
        let n = rows.len();
        let mut m = Square::zeros(n);
        for (i, r) in rows.iter().enumerate() {
            for (j, v) in r.iter().enumerate() {
                m.set(i, j, *v);
            }
        }
        m
    }

    fn sorted(mut v: Vec<Complex64>) -> Vec<Complex64> {
        v.sort_by(|a, b| {
            a.re.partial_cmp(&b.re)
                .unwrap()
                .then(a.im.partial_cmp(&b.im).unwrap())
        });
        v
    }

    #[test]
    fn diagonal_and_triangular() {
        let m = from_rows(&[&[3.0, 1.0, 2.0], &[0.0, -1.0, 5.0], &[0.0, 0.0, 7.0]]);
        let ev = sorted(eigenvalues(&m).unwrap());
        let want = [-1.0, 3.0, 7.0];
        for (e, w) in ev.iter().zip(want) {
            assert!((e.re - w).abs() < 1e-12 && e.im.abs() < 1e-12);
        }
    }

    #[test]
    fn rotation_block() {
        let m = from_rows(&[&[0.0, 1.0], &[-2.0, -2.0]]);
        let ev = sorted(eigenvalues(&m).unwrap());
        assert!((ev[0] - Complex64::new(-1.0, -1.0)).norm() < 1e-12);
        assert!((ev[1] - Complex64::new(-1.0, 1.0)).norm() < 1e-12);
    }

    #[test]
    fn companion_of_known_polynomial() {
        // (x-1)(x-2)(x-3)(x^2+1) = x^5 - 6x^4 + 12x^3 - 12x^2 + 11x - 6
        let c = [-6.0, 11.0, -12.0, 12.0, -6.0];
        let mut m = Square::zeros(5);
        for i in 1..5 {
            m.set(i, i - 1, 1.0);
        }
        for (i, ci) in c.iter().enumerate() {
            m.set(i, 4, -ci);
        }
        let ev = sorted(eigenvalues(&m).unwrap());
        let want = [
            Complex64::new(0.0, -1.0),
            Complex64::new(0.0, 1.0),
            Complex64::new(1.0, 0.0),
            Complex64::new(2.0, 0.0),
            Complex64::new(3.0, 0.0),
        ];
        for (e, w) in ev.iter().zip(want) {
            assert!((e - w).norm() < 1e-9, "{e} vs {w}");
        }
    }

    #[test]
    fn trace_and_determinant_match() {
        let m = from_rows(&[
            &[4.0, -2.0, 1.0, 0.5],
            &[3.0, 6.0, -4.0, 2.0],
            &[2.0, 1.0, 8.0, -1.0],
            &[-1.0, 0.5, 2.0, 3.0],
        ]);
        let ev = eigenvalues(&m).unwrap();
        let trace: Complex64 = ev.iter().sum();
        assert!((trace.re - 21.0).abs() < 1e-10 && trace.im.abs() < 1e-10);
        let det: Complex64 = ev.iter().product();
        // cofactor expansion, done by hand
        let mut a = [[0.0; 4]; 4];
        for i in 0..4 {
            for j in 0..4 {
                a[i][j] = m.get(i, j);
            }
        }
        let det3 = |r: [usize; 3], c: [usize; 3]| {
            a[r[0]][c[0]] * (a[r[1]][c[1]] * a[r[2]][c[2]] - a[r[1]][c[2]] * a[r[2]][c[1]])
                - a[r[0]][c[1]] * (a[r[1]][c[0]] * a[r[2]][c[2]] - a[r[1]][c[2]] * a[r[2]][c[0]])
                + a[r[0]][c[2]] * (a[r[1]][c[0]] * a[r[2]][c[1]] - a[r[1]][c[1]] * a[r[2]][c[0]])
        };
        let rows = [1, 2, 3];
        let d = a[0][0] * det3(rows, [1, 2, 3]) - a[0][1] * det3(rows, [0, 2, 3])
            + a[0][2] * det3(rows, [0, 1, 3])
            - a[0][3] * det3(rows, [0, 1, 2]);
        assert!((det.re - d).abs() < 1e-8 * d.abs().max(1.0), "{det} vs {d}");
    }

    #[test]
    fn one_by_one_and_empty() {
        let m = from_rows(&[&[-2.5]]);
        assert_eq!(eigenvalues(&m).unwrap(), vec![Complex64::new(-2.5, 0.0)]);
        assert!(eigenvalues(&Square::zeros(0)).unwrap().is_empty());
    }
}
