use crate::error::{Error, Result};
use crate::numerics::Matrix;
use crate::Scalar;

/// Iterations allowed per eigenvalue before giving up.
const MAX_ITERATIONS_PER_EIGENVALUE: usize = 60;

/// A (possibly complex) eigenvalue `re + i im`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Eigenvalue<T> {
    pub re: T,
    pub im: T,
}

impl<T: Scalar> Eigenvalue<T> {
    pub fn modulus(&self) -> T {
        self.re.hypot(self.im)
    }
}

/// All eigenvalues of a real square matrix.
///
/// Closed forms for 1x1 and 2x2; otherwise Householder reduction to upper Hessenberg
/// form followed by Francis double-shift QR with deflation of 1x1 and 2x2 blocks.
pub fn eigenvalues<T: Scalar>(a: &Matrix<T>) -> Result<Vec<Eigenvalue<T>>> {
    a.ensure_square()?;
    if !a.is_finite() {
        return Err(Error::NonFinite {
            what: "eigenvalue input".into(),
        });
    }
    match a.rows() {
        0 => Ok(Vec::new()),
        1 => Ok(vec![Eigenvalue {
            re: a[(0, 0)],
            im: T::zero(),
        }]),
        2 => {
            let (l1, l2) = eig2x2(a[(0, 0)], a[(0, 1)], a[(1, 0)], a[(1, 1)]);
            Ok(vec![l1, l2])
        }
        n => {
            let mut h = a.to_rows();
            hessenberg(&mut h);
            hqr(&mut h, n)
        }
    }
}

/// Largest eigenvalue modulus.
pub fn spectral_radius<T: Scalar>(a: &Matrix<T>) -> Result<T> {
    Ok(eigenvalues(a)?
        .iter()
        .map(Eigenvalue::modulus)
        .fold(T::zero(), T::max))
}

fn eig2x2<T: Scalar>(a: T, b: T, c: T, d: T) -> (Eigenvalue<T>, Eigenvalue<T>) {
    let half = T::lit(0.5);
    let mean = (a + d) * half;
    let p = (a - d) * half;
    let disc = p * p + b * c;
    if disc >= T::zero() {
        let root = disc.sqrt();
        // larger-magnitude root first, the other from the determinant to avoid cancellation
        let l1 = if mean >= T::zero() {
            mean + root
        } else {
            mean - root
        };
        let det = a * d - b * c;
        let l2 = if l1.is_zero() { mean - root } else { det / l1 };
        (
            Eigenvalue {
                re: l1,
                im: T::zero(),
            },
            Eigenvalue {
                re: l2,
                im: T::zero(),
            },
        )
    } else {
        let im = (-disc).sqrt();
        (
            Eigenvalue { re: mean, im },
            Eigenvalue { re: mean, im: -im },
        )
    }
}

fn hessenberg<T: Scalar>(a: &mut [Vec<T>]) {
    let n = a.len();
    for k in 0..n.saturating_sub(2) {
        let norm = (k + 1..n).fold(T::zero(), |acc, i| acc.hypot(a[i][k]));
        if norm.is_zero() {
            continue;
        }
        let alpha = if a[k + 1][k] > T::zero() { -norm } else { norm };
        let mut v: Vec<T> = (k + 1..n).map(|i| a[i][k]).collect();
        v[0] = v[0] - alpha;
        let vnorm2 = v.iter().fold(T::zero(), |acc, &x| acc + x * x);
        if vnorm2.is_zero() {
            continue;
        }
        let two = T::lit(2.0);
        // A <- (I - 2 v v^T / v^T v) A
        for j in 0..n {
            let dot = (0..v.len()).fold(T::zero(), |acc, i| acc + v[i] * a[k + 1 + i][j]);
            let f = two * dot / vnorm2;
            for i in 0..v.len() {
                a[k + 1 + i][j] = a[k + 1 + i][j] - f * v[i];
            }
        }
        // A <- A (I - 2 v v^T / v^T v)
        for row in a.iter_mut() {
            let dot = (0..v.len()).fold(T::zero(), |acc, i| acc + row[k + 1 + i] * v[i]);
            let f = two * dot / vnorm2;
            for i in 0..v.len() {
                row[k + 1 + i] = row[k + 1 + i] - f * v[i];
            }
        }
        for i in k + 2..n {
            a[i][k] = T::zero();
        }
    }
}

fn sign<T: Scalar>(a: T, b: T) -> T {
    if b >= T::zero() {
        a.abs()
    } else {
        -a.abs()
    }
}

/// Eigenvalues of an upper Hessenberg matrix (destroys `a`).
fn hqr<T: Scalar>(a: &mut [Vec<T>], n: usize) -> Result<Vec<Eigenvalue<T>>> {
    let zero = T::zero();
    let mut wr = vec![zero; n];
    let mut wi = vec![zero; n];

    let mut anorm = zero;
    for i in 0..n {
        for j in i.saturating_sub(1)..n {
            anorm = anorm + a[i][j].abs();
        }
    }

    let mut nn = n as isize - 1;
    let mut shift = zero;
    let (mut p, mut q, mut r): (T, T, T);
    while nn >= 0 {
        let mut its = 0usize;
        loop {
            let nu = nn as usize;
            // find a negligible subdiagonal element
            let mut l = nu;
            while l >= 1 {
                let mut s = a[l - 1][l - 1].abs() + a[l][l].abs();
                if s.is_zero() {
                    s = anorm;
                }
                if a[l][l - 1].abs() + s == s {
                    a[l][l - 1] = zero;
                    break;
                }
                l -= 1;
            }
            let mut x = a[nu][nu];
            if l == nu {
                wr[nu] = x + shift;
                wi[nu] = zero;
                nn -= 1;
                break;
            }
            let mut y = a[nu - 1][nu - 1];
            let mut w = a[nu][nu - 1] * a[nu - 1][nu];
            if l == nu - 1 {
                p = T::lit(0.5) * (y - x);
                q = p * p + w;
                let mut z = q.abs().sqrt();
                x = x + shift;
                if q >= zero {
                    z = p + sign(z, p);
                    wr[nu - 1] = x + z;
                    wr[nu] = x + z;
                    if !z.is_zero() {
                        wr[nu] = x - w / z;
                    }
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
            if its == MAX_ITERATIONS_PER_EIGENVALUE {
                return Err(Error::EigenvalueIteration { iterations: its });
            }
            if its > 0 && its.is_multiple_of(10) {
                // exceptional shift
                shift = shift + x;
                for (i, row) in a.iter_mut().enumerate().take(nu + 1) {
                    row[i] = row[i] - x;
                }
                let s = a[nu][nu - 1].abs() + a[nu - 1][nu - 2].abs();
                x = T::lit(0.75) * s;
                y = x;
                w = T::lit(-0.4375) * s * s;
            }
            its += 1;

            // look for two consecutive small subdiagonal elements
            let mut m = nu - 2;
            loop {
                let z = a[m][m];
                let rr = x - z;
                let ss = y - z;
                p = (rr * ss - w) / a[m + 1][m] + a[m][m + 1];
                q = a[m + 1][m + 1] - z - rr - ss;
                r = a[m + 2][m + 1];
                let s = p.abs() + q.abs() + r.abs();
                p = p / s;
                q = q / s;
                r = r / s;
                if m == l {
                    break;
                }
                let u = a[m][m - 1].abs() * (q.abs() + r.abs());
                let v = p.abs() * (a[m - 1][m - 1].abs() + z.abs() + a[m + 1][m + 1].abs());
                if u + v == v {
                    break;
                }
                m -= 1;
            }
            for i in m + 2..=nu {
                a[i][i - 2] = zero;
                if i != m + 2 {
                    a[i][i - 3] = zero;
                }
            }
            // double QR step on rows l..nn and columns m..nn
            let mut k = m;
            while k < nu {
                if k != m {
                    p = a[k][k - 1];
                    q = a[k + 1][k - 1];
                    r = zero;
                    if k != nu - 1 {
                        r = a[k + 2][k - 1];
                    }
                    x = p.abs() + q.abs() + r.abs();
                    if !x.is_zero() {
                        p = p / x;
                        q = q / x;
                        r = r / x;
                    }
                }
                let s = sign((p * p + q * q + r * r).sqrt(), p);
                if !s.is_zero() {
                    if k == m {
                        if l != m {
                            a[k][k - 1] = -a[k][k - 1];
                        }
                    } else {
                        a[k][k - 1] = -s * x;
                    }
                    p = p + s;
                    x = p / s;
                    y = q / s;
                    let z = r / s;
                    q = q / p;
                    r = r / p;
                    for j in k..=nu {
                        let mut pp = a[k][j] + q * a[k + 1][j];
                        if k != nu - 1 {
                            pp = pp + r * a[k + 2][j];
                            a[k + 2][j] = a[k + 2][j] - pp * z;
                        }
                        a[k + 1][j] = a[k + 1][j] - pp * y;
                        a[k][j] = a[k][j] - pp * x;
                    }
                    let mmin = if nu < k + 3 { nu } else { k + 3 };
                    for row in a.iter_mut().take(mmin + 1).skip(l) {
                        let mut pp = x * row[k] + y * row[k + 1];
                        if k != nu - 1 {
                            pp = pp + z * row[k + 2];
                            row[k + 2] = row[k + 2] - pp * r;
                        }
                        row[k + 1] = row[k + 1] - pp * q;
                        row[k] = row[k] - pp;
                    }
                }
                k += 1;
            }
        }
    }
    Ok(wr
        .into_iter()
        .zip(wi)
        .map(|(re, im)| Eigenvalue { re, im })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(rows: &[&[f64]]) -> Matrix<f64> {
        Matrix::from_f64_rows(rows).unwrap()
    }

    #[test]
    fn identity_radius_is_one() {
        assert!((spectral_radius(&Matrix::<f64>::identity(3)).unwrap() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn rotation_generator_radius_is_one() {
        let r = spectral_radius(&m(&[&[0.0, 1.0], &[-1.0, 0.0]])).unwrap();
        assert!((r - 1.0).abs() < 1e-14);
    }

    #[test]
    fn msd_explicit_step_matrix() {
        // closed form: |1 + h lambda|^2 = 1 - h c_f + h^2 for c = 1
        let (h, cf) = (0.1, 1e-4);
        let a = m(&[&[1.0, h], &[-h, 1.0 - h * cf]]);
        let expected = (1.0 - h * cf + h * h).sqrt();
        let r = spectral_radius(&a).unwrap();
        assert!((r - expected).abs() < 1e-12);
        assert!((r - 1.004984).abs() < 1e-5);
    }

    #[test]
    fn companion_matrix_roots() {
        // roots 1, 2, 3, 4 of (x-1)(x-2)(x-3)(x-4) = x^4 - 10x^3 + 35x^2 - 50x + 24
        let a = m(&[
            &[10.0, -35.0, 50.0, -24.0],
            &[1.0, 0.0, 0.0, 0.0],
            &[0.0, 1.0, 0.0, 0.0],
            &[0.0, 0.0, 1.0, 0.0],
        ]);
        let mut re: Vec<f64> = eigenvalues(&a).unwrap().iter().map(|e| e.re).collect();
        re.sort_by(|x, y| x.partial_cmp(y).unwrap());
        for (got, want) in re.iter().zip([1.0, 2.0, 3.0, 4.0]) {
            assert!((got - want).abs() < 1e-9, "{re:?}");
        }
    }

    #[test]
    fn block_rotation_with_complex_pairs() {
        // blocks with eigenvalues 0.5 +- 2i and -3 +- 0.25i, mixed by a permutation-like similarity
        let base = m(&[
            &[0.5, 2.0, 0.0, 0.0, 0.0],
            &[-2.0, 0.5, 0.0, 0.0, 0.0],
            &[0.0, 0.0, -3.0, 0.25, 0.0],
            &[0.0, 0.0, -0.25, -3.0, 0.0],
            &[0.0, 0.0, 0.0, 0.0, 1.5],
        ]);
        let s = m(&[
            &[1.0, 0.2, 0.0, 0.1, 0.0],
            &[0.0, 1.0, 0.3, 0.0, 0.0],
            &[0.0, 0.0, 1.0, 0.4, 0.2],
            &[0.1, 0.0, 0.0, 1.0, 0.0],
            &[0.0, 0.5, 0.0, 0.0, 1.0],
        ]);
        let s_inv = crate::numerics::inverse(&s).unwrap();
        let a = s.mul(&base).unwrap().mul(&s_inv).unwrap();
        let mut moduli: Vec<f64> = eigenvalues(&a)
            .unwrap()
            .iter()
            .map(|e| e.modulus())
            .collect();
        moduli.sort_by(|x, y| x.partial_cmp(y).unwrap());
        let mut expected = vec![
            0.5f64.hypot(2.0),
            0.5f64.hypot(2.0),
            3.0f64.hypot(0.25),
            3.0f64.hypot(0.25),
            1.5,
        ];
        expected.sort_by(|x, y| x.partial_cmp(y).unwrap());
        for (g, w) in moduli.iter().zip(&expected) {
            assert!((g - w).abs() < 1e-9, "{moduli:?}");
        }
    }

    #[test]
    fn rejects_non_square() {
        assert!(matches!(
            spectral_radius(&Matrix::<f64>::zeros(2, 3)),
            Err(Error::NotSquare { .. })
        ));
    }
}
