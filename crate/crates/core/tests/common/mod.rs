#![allow(dead_code)]

use pnp_admm::fidelity::ForwardOperator;

/// Row-major dense matrix.
pub struct Dense {
    pub rows: usize,
    pub cols: usize,
    pub a: Vec<f64>,
}

impl Dense {
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.a[i * self.cols + j]
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.rows)
            .map(|i| (0..self.cols).map(|j| self.at(i, j) * x[j]).sum())
            .collect()
    }

    pub fn transpose(&self) -> Dense {
        let mut a = vec![0.0; self.rows * self.cols];
        for i in 0..self.rows {
            for j in 0..self.cols {
                a[j * self.rows + i] = self.at(i, j);
            }
        }
        Dense {
            rows: self.cols,
            cols: self.rows,
            a,
        }
    }

    pub fn matmul(&self, other: &Dense) -> Dense {
        assert_eq!(self.cols, other.rows);
        let mut a = vec![0.0; self.rows * other.cols];
        for i in 0..self.rows {
            for k in 0..self.cols {
                let s = self.at(i, k);
                for j in 0..other.cols {
                    a[i * other.cols + j] += s * other.at(k, j);
                }
            }
        }
        Dense {
            rows: self.rows,
            cols: other.cols,
            a,
        }
    }
}

/// Matrix of `op` built column by column from basis images.
pub fn dense_operator(op: &ForwardOperator) -> Dense {
    let n = op.input_dim();
    let m = op.output_dim();
    let mut a = vec![0.0; m * n];
    for j in 0..n {
        let mut e = vec![0.0; n];
        e[j] = 1.0;
        let col = op.apply(&e).unwrap();
        for i in 0..m {
            a[i * n + j] = col[i];
        }
    }
    Dense { rows: m, cols: n, a }
}

/// Gaussian elimination with partial pivoting.
pub fn solve(mut m: Dense, mut b: Vec<f64>) -> Vec<f64> {
    let n = m.rows;
    assert_eq!(n, m.cols);
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| m.at(i, col).abs().total_cmp(&m.at(j, col).abs()))
            .unwrap();
        if pivot != col {
            for j in 0..n {
                m.a.swap(col * n + j, pivot * n + j);
            }
            b.swap(col, pivot);
        }
        let p = m.at(col, col);
        assert!(p.abs() > 1e-300, "singular system");
        for i in col + 1..n {
            let f = m.at(i, col) / p;
            if f == 0.0 {
                continue;
            }
            for j in col..n {
                m.a[i * n + j] -= f * m.a[col * n + j];
            }
            b[i] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let s: f64 = (i + 1..n).map(|j| m.at(i, j) * x[j]).sum();
        x[i] = (b[i] - s) / m.at(i, i);
    }
    x
}

/// Solves `(HᵀH + ρI) x = Hᵀb + ρ·target` densely.
pub fn dense_prox(h: &Dense, b: &[f64], rho: f64, target: &[f64]) -> Vec<f64> {
    let ht = h.transpose();
    let mut normal = ht.matmul(h);
    for i in 0..normal.rows {
        normal.a[i * normal.cols + i] += rho;
    }
    let htb = ht.matvec(b);
    let rhs: Vec<f64> = htb.iter().zip(target).map(|(a, t)| a + rho * t).collect();
    solve(normal, rhs)
}

pub fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let den: f64 = b.iter().map(|y| y * y).sum::<f64>().sqrt();
    num / den.max(f64::MIN_POSITIVE)
}

/// Gaussian smoothing computed as a full 2-D sum over the truncated kernel
/// with mirrored borders.
pub fn gaussian_smooth_direct(img: &[f64], w: usize, h: usize, std_px: f64) -> Vec<f64> {
    if std_px == 0.0 {
        return img.to_vec();
    }
    let r = (4.0 * std_px).ceil() as isize;
    let g: Vec<f64> = (-r..=r)
        .map(|i| (-(i * i) as f64 / (2.0 * std_px * std_px)).exp())
        .collect();
    let mirror = |i: isize, n: usize| -> usize {
        let n = n as isize;
        let mut i = i.rem_euclid(2 * n);
        if i >= n {
            i = 2 * n - 1 - i;
        }
        i as usize
    };
    let mut out = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            let mut norm = 0.0;
            for dy in -r..=r {
                for dx in -r..=r {
                    let k = g[(dy + r) as usize] * g[(dx + r) as usize];
                    let sx = mirror(x as isize + dx, w);
                    let sy = mirror(y as isize + dy, h);
                    acc += k * img[sy * w + sx];
                    norm += k;
                }
            }
            out[y * w + x] = acc / norm;
        }
    }
    out
}
