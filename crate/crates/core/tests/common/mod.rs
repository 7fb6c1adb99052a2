//! Independent reference computations for the integration tests. Nothing
//! here calls into the library's numerical code.

#![allow(dead_code, clippy::needless_range_loop)]

/// Column means and N−1 standard deviations.
pub fn mean_std(rows: &[Vec<f64>]) -> (Vec<f64>, Vec<f64>) {
    let n = rows.len() as f64;
    let m = rows[0].len();
    let mean: Vec<f64> = (0..m).map(|j| rows.iter().map(|r| r[j]).sum::<f64>() / n).collect();
    let std = (0..m)
        .map(|j| (rows.iter().map(|r| (r[j] - mean[j]).powi(2)).sum::<f64>() / (n - 1.0)).sqrt())
        .collect();
    (mean, std)
}

pub fn autoscale(rows: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let (mean, std) = mean_std(rows);
    rows.iter()
        .map(|r| r.iter().enumerate().map(|(j, x)| (x - mean[j]) / std[j]).collect())
        .collect()
}

/// Sample covariance of already-centred-or-not rows (centres internally).
pub fn covariance(rows: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let (mean, _) = mean_std(rows);
    let n = rows.len() as f64;
    let m = mean.len();
    let mut c = vec![vec![0.0; m]; m];
    for r in rows {
        for i in 0..m {
            for j in 0..m {
                c[i][j] += (r[i] - mean[i]) * (r[j] - mean[j]);
            }
        }
    }
    c.iter_mut().flatten().for_each(|v| *v /= n - 1.0);
    c
}

/// Cyclic Jacobi rotations. Returns eigenvalues (descending) and the
/// matching eigenvectors as columns `vecs[i][k]`.
pub fn jacobi_eigen(a: &[Vec<f64>]) -> (Vec<f64>, Vec<Vec<f64>>) {
    let n = a.len();
    let mut a: Vec<Vec<f64>> = a.to_vec();
    let mut v = vec![vec![0.0; n]; n];
    for (i, row) in v.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i][j] * a[i][j])
            .sum();
        if off < 1e-30 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[k][p], a[k][q]);
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[p][k], a[q][k]);
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
                for row in v.iter_mut() {
                    let (vkp, vkq) = (row[p], row[q]);
                    row[p] = c * vkp - s * vkq;
                    row[q] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| a[y][y].total_cmp(&a[x][x]));
    let values = order.iter().map(|&i| a[i][i]).collect();
    let vecs = (0..n).map(|r| order.iter().map(|&c| v[r][c]).collect()).collect();
    (values, vecs)
}

/// Gauss-Jordan inverse with partial pivoting.
pub fn invert(a: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = a.len();
    let mut m: Vec<Vec<f64>> = a
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let mut row = r.clone();
            row.extend((0..n).map(|j| if i == j { 1.0 } else { 0.0 }));
            row
        })
        .collect();
    for col in 0..n {
        let piv = (col..n).max_by(|&x, &y| m[x][col].abs().total_cmp(&m[y][col].abs())).unwrap();
        m.swap(col, piv);
        let d = m[col][col];
        assert!(d.abs() > 1e-300, "singular matrix");
        m[col].iter_mut().for_each(|v| *v /= d);
        for r in 0..n {
            if r != col {
                let f = m[r][col];
                let pivot_row = m[col].clone();
                m[r].iter_mut().zip(&pivot_row).for_each(|(v, p)| *v -= f * p);
            }
        }
    }
    m.into_iter().map(|r| r[n..].to_vec()).collect()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn mat_vec(m: &[Vec<f64>], x: &[f64]) -> Vec<f64> {
    m.iter().map(|r| dot(r, x)).collect()
}

/// xᵀ S⁻¹ x for each row against the sample covariance of the rows.
pub fn mahalanobis_sq(rows: &[Vec<f64>]) -> Vec<f64> {
    let (mean, _) = mean_std(rows);
    let inv = invert(&covariance(rows));
    rows.iter()
        .map(|r| {
            let c: Vec<f64> = r.iter().zip(&mean).map(|(x, m)| x - m).collect();
            dot(&c, &mat_vec(&inv, &c))
        })
        .collect()
}

/// The 4×3 toy matrix with a small deterministic jitter on every entry.
pub fn toy_matrix() -> Vec<Vec<f64>> {
    let base = [[1.0, 2.0, 0.5], [-1.0, -2.0, -0.5], [2.0, 4.0, 1.0], [-2.0, -4.0, -1.0]];
    let jitter = [
        [0.011, -0.007, 0.004],
        [-0.003, 0.009, -0.012],
        [0.006, 0.002, -0.005],
        [-0.008, -0.010, 0.013],
    ];
    base.iter()
        .zip(jitter)
        .map(|(r, j)| r.iter().zip(j).map(|(x, e)| x + e).collect())
        .collect()
}

/// Deterministic pseudo-random rows in [-0.5, 0.5).
pub fn lcg_rows(n: usize, m: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut s = seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(1);
    (0..n)
        .map(|_| {
            (0..m)
                .map(|_| {
                    s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                    (s >> 11) as f64 / (1u64 << 53) as f64 - 0.5
                })
                .collect()
        })
        .collect()
}

/// Correlated rows: a few latent factors mixed into `m` columns plus noise.
pub fn correlated_rows(n: usize, m: usize, seed: u64) -> Vec<Vec<f64>> {
    let latent = lcg_rows(n, 2, seed);
    let noise = lcg_rows(n, m, seed + 1);
    latent
        .iter()
        .zip(&noise)
        .map(|(l, e)| {
            (0..m)
                .map(|j| (j as f64 + 1.0) * l[0] + (m - j) as f64 * 0.5 * l[1] + 0.3 * e[j] + j as f64)
                .collect()
        })
        .collect()
}

/// Direct linear-interpolation quantile.
pub fn quantile(values: &[f64], p: f64) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let h = (v.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(v.len() - 1);
    v[lo] + (h - lo as f64) * (v[hi] - v[lo])
}

pub fn names(m: usize) -> Vec<String> {
    (0..m).map(|i| format!("x{i}")).collect()
}

/// Naive three-in-a-row rule over a series of exceedance flags, as
/// (first exceedance index, alarm index) pairs.
pub fn naive_alarms(flags: &[bool]) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    let mut i = 0;
    let mut open = false;
    let mut below = 0;
    let mut run_start = None;
    while i < flags.len() {
        if flags[i] {
            below = 0;
            let start = *run_start.get_or_insert(i);
            if i - start + 1 >= 3 && !open {
                open = true;
                out.push((start, i));
            }
        } else {
            run_start = None;
            below += 1;
            if below >= 3 {
                open = false;
            }
        }
        i += 1;
    }
    out
}
