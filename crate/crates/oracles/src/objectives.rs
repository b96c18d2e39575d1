//! Set objectives and score formulas evaluated directly from their definitions.

/// Similarity functions, written out independently of the production kernels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OracleKernel {
    /// `-||a - b||^2`
    NegSquaredEuclidean,
    /// `<a, b>`
    InnerProduct,
    /// `exp(-gamma ||a - b||^2)`
    Rbf(f64),
    /// `<a, b> / (||a|| ||b||)`, zero when either vector is zero.
    Cosine,
}

pub fn euclidean_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

pub fn kernel(kind: OracleKernel, a: &[f64], b: &[f64]) -> f64 {
    let sq: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    match kind {
        OracleKernel::NegSquaredEuclidean => -sq,
        OracleKernel::InnerProduct => dot,
        OracleKernel::Rbf(gamma) => (-gamma * sq).exp(),
        OracleKernel::Cosine => {
            let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
            let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
            if na == 0.0 || nb == 0.0 {
                0.0
            } else {
                dot / (na * nb)
            }
        }
    }
}

/// `sum_i max_{j in set} K(z_i, z_j)`; negative infinity for the empty set.
pub fn facility_location(points: &[Vec<f64>], kind: OracleKernel, set: &[usize]) -> f64 {
    if set.is_empty() {
        return f64::NEG_INFINITY;
    }
    points
        .iter()
        .map(|p| {
            set.iter()
                .map(|&j| kernel(kind, p, &points[j]))
                .fold(f64::NEG_INFINITY, f64::max)
        })
        .sum()
}

/// `log det(K(set) + jitter I)` by Gaussian elimination with partial
/// pivoting. Returns negative infinity when the matrix is not positive definite.
pub fn log_det(points: &[Vec<f64>], kind: OracleKernel, jitter: f64, set: &[usize]) -> f64 {
    let m = set.len();
    let mut a: Vec<Vec<f64>> = (0..m)
        .map(|r| {
            (0..m)
                .map(|c| {
                    let v = kernel(kind, &points[set[r]], &points[set[c]]);
                    if r == c {
                        v + jitter
                    } else {
                        v
                    }
                })
                .collect()
        })
        .collect();
    let mut sign = 1.0;
    let mut acc = 0.0;
    for col in 0..m {
        let pivot = (col..m)
            .max_by(|&x, &y| a[x][col].abs().total_cmp(&a[y][col].abs()))
            .unwrap();
        if a[pivot][col] == 0.0 {
            return f64::NEG_INFINITY;
        }
        if pivot != col {
            a.swap(pivot, col);
            sign = -sign;
        }
        let p = a[col][col];
        if p < 0.0 {
            sign = -sign;
        }
        acc += p.abs().ln();
        for r in col + 1..m {
            let f = a[r][col] / p;
            for c in col..m {
                a[r][c] -= f * a[col][c];
            }
        }
    }
    if sign < 0.0 {
        f64::NEG_INFINITY
    } else {
        acc
    }
}

/// Sequence probability as the plain product of each position's first entry.
pub fn direct_product(token_probs: &[Vec<f64>]) -> f64 {
    token_probs.iter().map(|p| p[0]).product()
}

/// Position-averaged Shannon entropy (nats), with `0 log 0 = 0`.
pub fn mean_entropy(token_probs: &[Vec<f64>]) -> f64 {
    let total: f64 = token_probs
        .iter()
        .map(|pos| {
            pos.iter()
                .filter(|&&p| p > 0.0)
                .map(|&p| -p * p.ln())
                .sum::<f64>()
        })
        .sum();
    total / token_probs.len() as f64
}

/// Mean and minimum of top-two gaps.
pub fn margins(token_probs: &[Vec<f64>]) -> (f64, f64) {
    let gaps: Vec<f64> = token_probs.iter().map(|p| p[0] - p[1]).collect();
    let mean = gaps.iter().sum::<f64>() / gaps.len() as f64;
    let min = gaps.iter().copied().fold(f64::INFINITY, f64::min);
    (mean, min)
}
