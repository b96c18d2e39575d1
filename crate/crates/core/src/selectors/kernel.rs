use super::{dot, Embeddings, SelectError};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::ops::Range;
use std::str::FromStr;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelKind {
    /// Facility location: negative squared distance. DPP: the Euclidean inner
    /// product. k-center: plain Euclidean distance.
    Euclidean,
    /// `exp(-gamma ||a - b||^2)`
    Rbf,
    /// Cosine similarity, used raw (may be negative).
    Cosine,
}

impl fmt::Display for KernelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Euclidean => "euclidean",
            Self::Rbf => "rbf",
            Self::Cosine => "cosine",
        })
    }
}

impl FromStr for KernelKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "euclidean" | "l2" => Ok(Self::Euclidean),
            "rbf" => Ok(Self::Rbf),
            "cosine" => Ok(Self::Cosine),
            other => Err(format!("unknown kernel {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub kind: KernelKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
}

impl KernelSpec {
    pub fn euclidean() -> Self {
        Self { kind: KernelKind::Euclidean, gamma: None }
    }

    pub fn rbf(gamma: f64) -> Self {
        Self { kind: KernelKind::Rbf, gamma: Some(gamma) }
    }

    pub fn cosine() -> Self {
        Self { kind: KernelKind::Cosine, gamma: None }
    }

    pub fn validate(&self) -> Result<(), SelectError> {
        if self.kind == KernelKind::Rbf {
            match self.gamma {
                Some(g) if g.is_finite() && g > 0.0 => {}
                other => {
                    return Err(SelectError::InvalidKernel(format!(
                        "rbf kernel needs a positive gamma, got {other:?}"
                    )))
                }
            }
        }
        Ok(())
    }

    pub(crate) fn facility_similarity(&self) -> Result<Similarity, SelectError> {
        self.validate()?;
        Ok(match self.kind {
            KernelKind::Euclidean => Similarity::NegSquaredDistance,
            KernelKind::Rbf => Similarity::Rbf(self.gamma.unwrap()),
            KernelKind::Cosine => Similarity::Cosine,
        })
    }

    pub(crate) fn dpp_similarity(&self) -> Result<Similarity, SelectError> {
        self.validate()?;
        Ok(match self.kind {
            KernelKind::Euclidean => Similarity::InnerProduct,
            KernelKind::Rbf => Similarity::Rbf(self.gamma.unwrap()),
            KernelKind::Cosine => Similarity::Cosine,
        })
    }
}

impl fmt::Display for KernelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.gamma {
            Some(g) if self.kind == KernelKind::Rbf => write!(f, "rbf(gamma={g})"),
            _ => write!(f, "{}", self.kind),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum Similarity {
    NegSquaredDistance,
    InnerProduct,
    Rbf(f64),
    Cosine,
}

/// Rows per panel in the transposed copy used by [`Gram::scan`].
const LANES: usize = 8;

/// Rows per cache tile (512 KiB of panels at 64 dimensions).
pub(crate) const TILE: usize = 1024;

/// On-the-fly kernel evaluation over an embedding matrix.
///
/// Every pair inner product is accumulated in dimension order, in both the
/// scalar and the bulk path, so a kernel value does not depend on which path
/// produced it.
pub(crate) struct Gram {
    sim: Similarity,
    emb: Embeddings,
    sq_norms: Vec<f64>,
    /// Rows regrouped in panels of `LANES`, dimension-major, zero padded.
    panels: Vec<f64>,
}

#[inline]
fn seq_dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = 0.0;
    for (x, y) in a.iter().zip(b) {
        acc += x * y;
    }
    acc
}

impl Gram {
    pub fn new(mut emb: Embeddings, sim: Similarity) -> Self {
        let d = emb.d;
        if sim == Similarity::Cosine {
            for row in emb.data.chunks_exact_mut(d.max(1)) {
                let norm = dot(row, row).sqrt();
                if norm > 0.0 {
                    row.iter_mut().for_each(|x| *x /= norm);
                }
            }
        }
        let sq_norms = (0..emb.n).map(|i| seq_dot(emb.row(i), emb.row(i))).collect();
        let mut panels = vec![0.0; emb.n.div_ceil(LANES) * d * LANES];
        for i in 0..emb.n {
            let (p, r) = (i / LANES, i % LANES);
            for (k, &x) in emb.row(i).iter().enumerate() {
                panels[(p * d + k) * LANES + r] = x;
            }
        }
        Self { sim, emb, sq_norms, panels }
    }

    pub fn len(&self) -> usize {
        self.emb.n
    }

    /// Squared distance via the expanded form, clamped at zero.
    #[inline]
    fn sq_from(&self, i: usize, j: usize, dot: f64) -> f64 {
        if i == j {
            return 0.0;
        }
        (self.sq_norms[i] + self.sq_norms[j] - 2.0 * dot).max(0.0)
    }

    /// Kernel value for rows `i`, `j` given their inner product.
    #[inline]
    pub fn value(&self, i: usize, j: usize, dot: f64) -> f64 {
        match self.sim {
            Similarity::NegSquaredDistance => -self.sq_from(i, j, dot),
            Similarity::Rbf(gamma) => (-gamma * self.sq_from(i, j, dot)).exp(),
            Similarity::InnerProduct | Similarity::Cosine => dot,
        }
    }

    pub fn eval(&self, i: usize, j: usize) -> f64 {
        self.value(i, j, seq_dot(self.emb.row(i), self.emb.row(j)))
    }

    /// A cut for [`Gram::above`]: pairs past it cannot have a kernel value
    /// above `floor`. Only rbf has one; it carries enough slack that a pair is
    /// cut only when its value would compare at or below `floor` anyway.
    pub fn cutoff(&self, floor: f64) -> f64 {
        match self.sim {
            Similarity::Rbf(gamma) if floor > 0.0 => (1e-6 - floor.ln()) / gamma * (1.0 + 1e-9),
            _ => f64::INFINITY,
        }
    }

    /// The kernel value, or `None` when the pair lies past `cut`.
    #[inline]
    pub fn above(&self, i: usize, j: usize, dot: f64, cut: f64) -> Option<f64> {
        match self.sim {
            Similarity::Rbf(gamma) => {
                let s = self.sq_from(i, j, dot);
                (s < cut).then(|| (-gamma * s).exp())
            }
            _ => Some(self.value(i, j, dot)),
        }
    }

    /// Call `f(i, dots)` for each `i` in `rows` in ascending order, where
    /// `dots[c]` is the inner product of rows `i` and `queries[c]`.
    pub fn scan<const Q: usize, F: FnMut(usize, &[f64; Q])>(&self, queries: [usize; Q], rows: Range<usize>, f: F) {
        self.scan_within(queries, rows, None, f)
    }

    /// [`Gram::scan`], except that a row `i` may be skipped when its squared
    /// distance to every query is at least `cut[i]`.
    pub fn scan_within<const Q: usize, F: FnMut(usize, &[f64; Q])>(
        &self,
        queries: [usize; Q],
        rows: Range<usize>,
        cut: Option<&[f64]>,
        f: F,
    ) {
        #[cfg(target_arch = "x86_64")]
        if std::arch::is_x86_feature_detected!("avx2") {
            // SAFETY: the feature is present on this CPU.
            return unsafe { self.scan_avx2(queries, rows, cut, f) };
        }
        self.scan_portable(queries, rows, cut, f)
    }

    #[inline]
    fn far(&self, i: usize, queries: &[usize], dots: &[f64], cut: f64) -> bool {
        queries
            .iter()
            .zip(dots)
            .all(|(&j, &dot)| i != j && self.sq_norms[i] + self.sq_norms[j] - 2.0 * dot >= cut)
    }

    #[cfg(target_arch = "x86_64")]
    #[target_feature(enable = "avx2")]
    unsafe fn scan_avx2<const Q: usize, F: FnMut(usize, &[f64; Q])>(
        &self,
        queries: [usize; Q],
        rows: Range<usize>,
        cut: Option<&[f64]>,
        mut f: F,
    ) {
        use std::arch::x86_64::*;
        let d = self.emb.d;
        let q: [&[f64]; Q] = queries.map(|j| self.emb.row(j));
        for p in rows.start / LANES..rows.end.div_ceil(LANES) {
            let panel = &self.panels[p * d * LANES..(p + 1) * d * LANES];
            let mut acc = [[_mm256_setzero_pd(); 2]; Q];
            for (k, x) in panel.chunks_exact(LANES).enumerate() {
                let lo = _mm256_loadu_pd(x.as_ptr());
                let hi = _mm256_loadu_pd(x.as_ptr().add(4));
                for (a, row) in acc.iter_mut().zip(&q) {
                    let y = _mm256_set1_pd(row[k]);
                    a[0] = _mm256_add_pd(a[0], _mm256_mul_pd(lo, y));
                    a[1] = _mm256_add_pd(a[1], _mm256_mul_pd(hi, y));
                }
            }
            let base = p * LANES;
            let lo = rows.start.max(base);
            let hi = rows.end.min(base + LANES);
            let mut keep = u32::MAX;
            if let (Some(cut), true) = (cut, hi - lo == LANES) {
                // same operation order as `far`
                let norms = &self.sq_norms[base..base + LANES];
                let cut = &cut[base..base + LANES];
                let (n0, n1) = (_mm256_loadu_pd(norms.as_ptr()), _mm256_loadu_pd(norms.as_ptr().add(4)));
                let (c0, c1) = (_mm256_loadu_pd(cut.as_ptr()), _mm256_loadu_pd(cut.as_ptr().add(4)));
                let two = _mm256_set1_pd(2.0);
                keep = 0;
                for (a, &j) in acc.iter().zip(&queries) {
                    let nj = _mm256_set1_pd(self.sq_norms[j]);
                    let s0 = _mm256_sub_pd(_mm256_add_pd(n0, nj), _mm256_mul_pd(two, a[0]));
                    let s1 = _mm256_sub_pd(_mm256_add_pd(n1, nj), _mm256_mul_pd(two, a[1]));
                    keep |= _mm256_movemask_pd(_mm256_cmp_pd::<_CMP_NGE_UQ>(s0, c0)) as u32;
                    keep |= (_mm256_movemask_pd(_mm256_cmp_pd::<_CMP_NGE_UQ>(s1, c1)) as u32) << 4;
                    if (base..base + LANES).contains(&j) {
                        keep |= 1 << (j - base);
                    }
                }
            }
            if keep == 0 {
                continue;
            }
            let mut out = [[0.0f64; LANES]; Q];
            for (o, a) in out.iter_mut().zip(&acc) {
                _mm256_storeu_pd(o.as_mut_ptr(), a[0]);
                _mm256_storeu_pd(o.as_mut_ptr().add(4), a[1]);
            }
            for i in lo..hi {
                if keep & (1 << (i - base)) != 0 {
                    f(i, &std::array::from_fn(|c| out[c][i - base]));
                }
            }
        }
    }

    // same operation order as the avx2 build, with no fused multiply-add
    fn scan_portable<const Q: usize, F: FnMut(usize, &[f64; Q])>(
        &self,
        queries: [usize; Q],
        rows: Range<usize>,
        cut: Option<&[f64]>,
        mut f: F,
    ) {
        let d = self.emb.d;
        let q: [&[f64]; Q] = queries.map(|j| self.emb.row(j));
        for p in rows.start / LANES..rows.end.div_ceil(LANES) {
            let panel = &self.panels[p * d * LANES..(p + 1) * d * LANES];
            let mut acc = [[0.0f64; LANES]; Q];
            for (k, x) in panel.chunks_exact(LANES).enumerate() {
                for (a, row) in acc.iter_mut().zip(&q) {
                    let y = row[k];
                    for (a, &x) in a.iter_mut().zip(x) {
                        *a += x * y;
                    }
                }
            }
            let base = p * LANES;
            for i in rows.start.max(base)..rows.end.min(base + LANES) {
                let dots = std::array::from_fn(|c| acc[c][i - base]);
                if cut.is_some_and(|cut| self.far(i, &queries, &dots, cut[i])) {
                    continue;
                }
                f(i, &dots);
            }
        }
    }

    /// True when every kernel value is non-negative.
    pub fn nonnegative(&self) -> bool {
        matches!(self.sim, Similarity::Rbf(_))
    }

    /// `sum_i K(i, j)` for every `j`. Closed forms where the kernel is
    /// bilinear in the embeddings, one pass over pairs `i < j` otherwise.
    pub fn column_sums(&self) -> Vec<f64> {
        let n = self.emb.n;
        let d = self.emb.d;
        let mut total = vec![0.0; d];
        for i in 0..n {
            for (t, x) in total.iter_mut().zip(self.emb.row(i)) {
                *t += x;
            }
        }
        match self.sim {
            Similarity::NegSquaredDistance => {
                let norm_sum: f64 = self.sq_norms.iter().sum();
                (0..n)
                    .map(|j| {
                        let v = n as f64 * self.sq_norms[j] - 2.0 * dot(self.emb.row(j), &total) + norm_sum;
                        -v.max(0.0)
                    })
                    .collect()
            }
            Similarity::InnerProduct | Similarity::Cosine => {
                (0..n).map(|j| dot(self.emb.row(j), &total)).collect()
            }
            Similarity::Rbf(gamma) => {
                const Q: usize = 4;
                let mut sums = vec![1.0; n];
                for jt in (0..n).step_by(TILE) {
                    let jend = (jt + TILE).min(n);
                    for it in (0..jend).step_by(TILE) {
                        for j0 in (jt..jend).step_by(Q) {
                            let width = Q.min(jend - j0);
                            let ids: [usize; Q] = std::array::from_fn(|c| j0 + c.min(width - 1));
                            let mut acc = [0.0; Q];
                            let norms = ids.map(|j| self.sq_norms[j]);
                            self.scan(ids, it..(it + TILE).min(j0 + width - 1), |i, dots| {
                                let ni = self.sq_norms[i];
                                let mut row = 0.0;
                                for c in 0..width {
                                    if i < ids[c] {
                                        // `value` with i != j
                                        let v = (-gamma * (ni + norms[c] - 2.0 * dots[c]).max(0.0)).exp();
                                        row += v;
                                        acc[c] += v;
                                    }
                                }
                                sums[i] += row;
                            });
                            for c in 0..width {
                                sums[j0 + c] += acc[c];
                            }
                        }
                    }
                }
                sums
            }
        }
    }
}
