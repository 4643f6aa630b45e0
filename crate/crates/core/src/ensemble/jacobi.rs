//! Cyclic Jacobi diagonalization for 3x3 self-adjoint matrices.

use num_complex::Complex64;

const PAIRS: [(usize, usize); 3] = [(0, 1), (0, 2), (1, 2)];
const MAX_SWEEPS: usize = 50;
/// Stop once the off-diagonal Frobenius norm is below this fraction of `||H||`.
const OFF_DIAGONAL_TOL: f64 = 1e-13;

/// Rotation angle for annihilating `apq` between diagonal entries `app`, `aqq`.
/// Returns `(c, s)` with `t = s / c` the smaller root of `t^2 + 2 t theta - 1`.
#[inline]
fn rotation(app: f64, aqq: f64, apq: f64) -> (f64, f64) {
    let theta = (aqq - app) / (2.0 * apq);
    let t = if libm::fabs(theta) > 1e150 {
        0.5 / theta
    } else {
        let sign = if theta >= 0.0 { 1.0 } else { -1.0 };
        sign / (libm::fabs(theta) + libm::sqrt(theta * theta + 1.0))
    };
    let c = 1.0 / libm::sqrt(t * t + 1.0);
    (c, t * c)
}

/// Eigenvalues (unsorted) and eigenvectors as columns of the returned matrix.
pub(crate) fn jacobi_real(mut a: [[f64; 3]; 3]) -> ([f64; 3], [[f64; 3]; 3]) {
    let mut v = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
    let norm = libm::sqrt(a.iter().flatten().map(|x| x * x).sum::<f64>());
    for _ in 0..MAX_SWEEPS {
        let off = libm::sqrt(2.0 * PAIRS.iter().map(|&(p, q)| a[p][q] * a[p][q]).sum::<f64>());
        if off <= OFF_DIAGONAL_TOL * norm {
            break;
        }
        for &(p, q) in &PAIRS {
            if a[p][q] == 0.0 {
                continue;
            }
            let (c, s) = rotation(a[p][p], a[q][q], a[p][q]);
            // A <- G^T A G with G = identity except G[p][p] = G[q][q] = c,
            // G[p][q] = s, G[q][p] = -s
            for row in a.iter_mut() {
                let (x, y) = (row[p], row[q]);
                row[p] = c * x - s * y;
                row[q] = s * x + c * y;
            }
            for j in 0..3 {
                let (x, y) = (a[p][j], a[q][j]);
                a[p][j] = c * x - s * y;
                a[q][j] = s * x + c * y;
            }
            a[p][q] = 0.0;
            a[q][p] = 0.0;
            for row in v.iter_mut() {
                let (x, y) = (row[p], row[q]);
                row[p] = c * x - s * y;
                row[q] = s * x + c * y;
            }
        }
    }
    ([a[0][0], a[1][1], a[2][2]], v)
}

/// Unitary Jacobi for Hermitian input. Each step first rotates the phase of
/// `a[p][q]` away, then applies a real rotation.
pub(crate) fn jacobi_hermitian(
    mut a: [[Complex64; 3]; 3],
) -> ([f64; 3], [[Complex64; 3]; 3]) {
    let one = Complex64::new(1.0, 0.0);
    let zero = Complex64::new(0.0, 0.0);
    let mut v = [[one, zero, zero], [zero, one, zero], [zero, zero, one]];
    let norm = libm::sqrt(a.iter().flatten().map(|z| z.norm_sqr()).sum::<f64>());
    for _ in 0..MAX_SWEEPS {
        let off = libm::sqrt(2.0 * PAIRS.iter().map(|&(p, q)| a[p][q].norm_sqr()).sum::<f64>());
        if off <= OFF_DIAGONAL_TOL * norm {
            break;
        }
        for &(p, q) in &PAIRS {
            let z = a[p][q];
            let mag = libm::hypot(z.re, z.im);
            if mag == 0.0 {
                continue;
            }
            let phase = z / mag;
            let (c, s) = rotation(a[p][p].re, a[q][q].re, mag);
            // G = D R, D = diag(.., 1 at p, conj(phase) at q, ..)
            let gpp = Complex64::new(c, 0.0);
            let gpq = Complex64::new(s, 0.0);
            let gqp = -phase.conj() * s;
            let gqq = phase.conj() * c;
            // A <- A G (columns p, q)
            for row in a.iter_mut() {
                let (x, y) = (row[p], row[q]);
                row[p] = x * gpp + y * gqp;
                row[q] = x * gpq + y * gqq;
            }
            // A <- G^H A (rows p, q)
            for j in 0..3 {
                let (x, y) = (a[p][j], a[q][j]);
                a[p][j] = gpp.conj() * x + gqp.conj() * y;
                a[q][j] = gpq.conj() * x + gqq.conj() * y;
            }
            a[p][q] = zero;
            a[q][p] = zero;
            a[p][p].im = 0.0;
            a[q][q].im = 0.0;
            for row in v.iter_mut() {
                let (x, y) = (row[p], row[q]);
                row[p] = x * gpp + y * gqp;
                row[q] = x * gpq + y * gqq;
            }
        }
    }
    ([a[0][0].re, a[1][1].re, a[2][2].re], v)
}
