#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn normals(r: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| r.sample::<f64, _>(StandardNormal)).collect()
}

/// Row-major dense matrix used only by the oracles below.
pub type Dense = Vec<Vec<f64>>;

pub fn rows_of(cols: &[Vec<f64>]) -> Dense {
    let n = cols[0].len();
    (0..n).map(|i| cols.iter().map(|c| c[i]).collect()).collect()
}

pub fn xtx(x: &Dense) -> Dense {
    let k = x[0].len();
    let mut m = vec![vec![0.0; k]; k];
    for row in x {
        for a in 0..k {
            for b in 0..k {
                m[a][b] += row[a] * row[b];
            }
        }
    }
    m
}

pub fn xty(x: &Dense, y: &[f64]) -> Vec<f64> {
    let k = x[0].len();
    let mut v = vec![0.0; k];
    for (row, yi) in x.iter().zip(y) {
        for a in 0..k {
            v[a] += row[a] * yi;
        }
    }
    v
}

/// Gauss-Jordan inverse with partial pivoting.
pub fn invert(m: &Dense) -> Dense {
    let k = m.len();
    let mut a: Dense = m
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let mut row = r.clone();
            row.extend((0..k).map(|j| if i == j { 1.0 } else { 0.0 }));
            row
        })
        .collect();
    for col in 0..k {
        let p = (col..k)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap();
        a.swap(col, p);
        let piv = a[col][col];
        for v in a[col].iter_mut() {
            *v /= piv;
        }
        for r in 0..k {
            if r != col {
                let f = a[r][col];
                if f != 0.0 {
                    for c in 0..2 * k {
                        a[r][c] -= f * a[col][c];
                    }
                }
            }
        }
    }
    a.into_iter().map(|r| r[k..].to_vec()).collect()
}

pub fn mat_vec(m: &Dense, v: &[f64]) -> Vec<f64> {
    m.iter().map(|r| r.iter().zip(v).map(|(a, b)| a * b).sum()).collect()
}

/// `(X'X)⁻¹X'y` by the normal equations.
pub fn normal_equations(x: &Dense, y: &[f64]) -> Vec<f64> {
    mat_vec(&invert(&xtx(x)), &xty(x, y))
}

/// Fitted values of `y` projected on the columns of `x`.
pub fn project(x: &Dense, y: &[f64]) -> Vec<f64> {
    let b = normal_equations(x, y);
    x.iter().map(|r| r.iter().zip(&b).map(|(a, c)| a * c).sum()).collect()
}

pub fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
}

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations.
pub fn symmetric_eigenvalues(m: &Dense) -> Vec<f64> {
    let k = m.len();
    let mut a = m.clone();
    for _sweep in 0..100 {
        let off: f64 = (0..k)
            .flat_map(|i| (0..k).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i][j] * a[i][j])
            .sum();
        if off < 1e-30 {
            break;
        }
        for p in 0..k {
            for q in p + 1..k {
                if a[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for r in 0..k {
                    let (arp, arq) = (a[r][p], a[r][q]);
                    a[r][p] = c * arp - s * arq;
                    a[r][q] = s * arp + c * arq;
                }
                for r in 0..k {
                    let (apr, aqr) = (a[p][r], a[q][r]);
                    a[p][r] = c * apr - s * aqr;
                    a[q][r] = s * apr + c * aqr;
                }
            }
        }
    }
    (0..k).map(|i| a[i][i]).collect()
}
