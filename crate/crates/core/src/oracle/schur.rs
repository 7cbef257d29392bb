//! Eigenvalues of a general complex matrix: Hessenberg reduction followed by
//! single-shift QR sweeps with Wilkinson shifts and deflation.

use nalgebra::linalg::Hessenberg;
use nalgebra::DMatrix;

use crate::{Error, Result, C64};

/// Iteration statistics of a completed run.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct QrStats {
    pub sweeps: usize,
    pub max_sweeps_per_eigenvalue: usize,
}

/// Complex Givens rotation `[c s; −s̄ c]` mapping `(a, b)` to `(r, 0)`.
fn givens(a: C64, b: C64) -> (f64, C64) {
    let na = a.norm();
    let nb = b.norm();
    if nb == 0.0 {
        return (1.0, C64::new(0.0, 0.0));
    }
    if na == 0.0 {
        return (0.0, b.conj() / nb);
    }
    let r = na.hypot(nb);
    (na / r, (a / na) * b.conj() / r)
}

/// Eigenvalue of `[[a, b], [c, d]]` closest to `d`.
fn wilkinson_shift(a: C64, b: C64, c: C64, d: C64) -> C64 {
    let half_tr = (a + d) * 0.5;
    let disc = ((a - d) * 0.5).powu(2) + b * c;
    let root = disc.sqrt();
    let l1 = half_tr + root;
    let l2 = half_tr - root;
    if (l1 - d).norm() <= (l2 - d).norm() {
        l1
    } else {
        l2
    }
}

/// All `n` eigenvalues of `a`, in deflation order.
///
/// `max_sweeps` bounds the QR sweeps spent on any single eigenvalue.
pub fn eigenvalues(a: &DMatrix<C64>, max_sweeps: usize) -> Result<(Vec<C64>, QrStats)> {
    let n = a.nrows();
    let mut stats = QrStats::default();
    if n == 0 {
        return Ok((Vec::new(), stats));
    }
    let mut h = Hessenberg::new(a.clone()).h();
    let scale = h.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let zero = C64::new(0.0, 0.0);
    let mut out = vec![zero; n];
    if scale == 0.0 {
        return Ok((out, stats));
    }
    let eps = f64::EPSILON;
    let mut hi = n;
    let mut sweeps_here = 0usize;
    while hi > 0 {
        if hi == 1 {
            out[0] = h[(0, 0)];
            break;
        }
        // Locate the start of the trailing unreduced block.
        let mut lo = hi - 1;
        while lo > 0 {
            let mut s = h[(lo - 1, lo - 1)].norm() + h[(lo, lo)].norm();
            if s == 0.0 {
                s = scale;
            }
            if h[(lo, lo - 1)].norm() <= eps * s {
                h[(lo, lo - 1)] = zero;
                break;
            }
            lo -= 1;
        }
        if lo == hi - 1 {
            out[hi - 1] = h[(hi - 1, hi - 1)];
            hi -= 1;
            stats.max_sweeps_per_eigenvalue = stats.max_sweeps_per_eigenvalue.max(sweeps_here);
            sweeps_here = 0;
            continue;
        }
        sweeps_here += 1;
        stats.sweeps += 1;
        if sweeps_here > max_sweeps {
            let residual = h[(hi - 1, hi - 2)].norm() / scale;
            return Err(Error::NonConvergence {
                routine: "shifted QR eigensolver",
                iterations: stats.sweeps,
                residual,
            });
        }
        let shift = if sweeps_here.is_multiple_of(11) {
            // exceptional shift to break cycles
            h[(hi - 1, hi - 1)] + C64::new(h[(hi - 1, hi - 2)].norm(), 0.0)
        } else {
            wilkinson_shift(
                h[(hi - 2, hi - 2)],
                h[(hi - 2, hi - 1)],
                h[(hi - 1, hi - 2)],
                h[(hi - 1, hi - 1)],
            )
        };
        for k in lo..hi {
            h[(k, k)] -= shift;
        }
        let mut rotations = Vec::with_capacity(hi - lo - 1);
        for k in lo..hi - 1 {
            let (c, s) = givens(h[(k, k)], h[(k + 1, k)]);
            for j in k..hi {
                let x = h[(k, j)];
                let y = h[(k + 1, j)];
                h[(k, j)] = x * c + s * y;
                h[(k + 1, j)] = -s.conj() * x + y * c;
            }
            rotations.push((c, s));
        }
        for (off, &(c, s)) in rotations.iter().enumerate() {
            let k = lo + off;
            for i in lo..=(k + 1).min(hi - 1) {
                let x = h[(i, k)];
                let y = h[(i, k + 1)];
                h[(i, k)] = x * c + y * s.conj();
                h[(i, k + 1)] = -x * s + y * c;
            }
        }
        for k in lo..hi {
            h[(k, k)] += shift;
        }
    }
    stats.max_sweeps_per_eigenvalue = stats.max_sweeps_per_eigenvalue.max(sweeps_here);
    Ok((out, stats))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn sorted(mut v: Vec<C64>) -> Vec<C64> {
        v.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
        v
    }

    #[test]
    fn diagonal_matrix_returns_diagonal() {
        let d = [c(3.0, 0.0), c(-1.0, 2.0), c(0.5, -0.5)];
        let m = DMatrix::from_diagonal(&nalgebra::DVector::from_row_slice(&d));
        let (ev, _) = eigenvalues(&m, 100).unwrap();
        let ev = sorted(ev);
        let want = sorted(d.to_vec());
        for (a, b) in ev.iter().zip(&want) {
            assert!((a - b).norm() < 1e-14);
        }
    }

    #[test]
    fn rank_one_averaging_column() {
        // [[1/2, 0], [1/2, 0]]: characteristic polynomial λ² − λ/2.
        let m = DMatrix::from_row_slice(2, 2, &[c(0.5, 0.0), c(0.0, 0.0), c(0.5, 0.0), c(0.0, 0.0)]);
        let ev = sorted(eigenvalues(&m, 100).unwrap().0);
        assert!(ev[0].norm() < 1e-15);
        assert!((ev[1] - c(0.5, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn rotation_has_complex_pair() {
        let m = DMatrix::from_row_slice(2, 2, &[c(0.0, 0.0), c(-1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)]);
        let ev = sorted(eigenvalues(&m, 100).unwrap().0);
        assert!((ev[0] - c(0.0, -1.0)).norm() < 1e-14 || (ev[0] - c(0.0, 1.0)).norm() < 1e-14);
        assert!((ev[0] + ev[1]).norm() < 1e-14);
    }

    #[test]
    fn trace_and_companion_roots() {
        // companion matrix of (λ−1)(λ−2)(λ−3)(λ+4) = λ⁴ − 2λ³ − 13λ² + 38λ − 24
        let coeffs = [-24.0, 38.0, -13.0, -2.0];
        let mut m = DMatrix::from_element(4, 4, c(0.0, 0.0));
        for i in 1..4 {
            m[(i, i - 1)] = c(1.0, 0.0);
        }
        for i in 0..4 {
            m[(i, 3)] = c(-coeffs[i], 0.0);
        }
        let ev = sorted(eigenvalues(&m, 100).unwrap().0);
        for (z, want) in ev.iter().zip([-4.0, 1.0, 2.0, 3.0]) {
            assert!((z - c(want, 0.0)).norm() < 1e-10, "{z} vs {want}");
        }
    }
}
