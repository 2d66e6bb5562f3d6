//! Integer kernels over ranks arranged in ascending X order.
//!
//! `s[p]` is the Y rank of the observation at sorted X position `p`. With the
//! identity X order this is exactly the null replicate layout, where the
//! `m`-th right neighbor of position `p` is `p + m` (or `p` itself past the end).

/// Sum of `min(a[i], b[i])`, accumulated in `u32` blocks so the inner loop
/// vectorizes; `bound` is an upper bound on every element.
#[inline]
fn pairwise_min_sum(a: &[u32], b: &[u32], bound: u32) -> u64 {
    let block = (u32::MAX / bound.max(1)).max(1) as usize;
    let mut total = 0u64;
    for (ca, cb) in a.chunks(block).zip(b.chunks(block)) {
        let partial = ca
            .iter()
            .zip(cb)
            .fold(0u32, |acc, (&x, &y)| acc.wrapping_add(x.min(y)));
        total += partial as u64;
    }
    total
}

/// Returns `(Σ_p Σ_{k<=M} min(s_p, s_{j_k(p)}), same for the reflected ranks n+1-s)`.
///
/// The reflected sum uses `min(n+1-a, n+1-b) = n+1 - max(a, b)` and
/// `max(a, b) = a + b - min(a, b)`, so it costs O(n + M) on top of the direct sum.
pub(crate) fn right_min_sums(s: &[u32], m: usize) -> (u64, u64) {
    let n = s.len();
    debug_assert!(m >= 1 && m < n);
    let bound = n as u32;
    let total: u64 = s.iter().map(|&v| v as u64).sum();

    let mut direct = 0u64;
    // Σ over k of Σ_p (s_p + s_{j_k(p)}).
    let mut pair_sum = 0u64;
    let mut prefix = 0u64;
    let mut suffix = 0u64;
    for k in 1..=m {
        direct += pairwise_min_sum(&s[..n - k], &s[k..], bound);
        prefix += s[k - 1] as u64;
        suffix += s[n - k] as u64;
        // Positions past the end fall back to themselves: min(s_p, s_p) = s_p.
        direct += suffix;
        pair_sum += total + (total - prefix) + suffix;
    }
    let reflected = (n as u64) * (m as u64) * (n as u64 + 1) - (pair_sum - direct);
    (direct, reflected)
}

/// Σ_p Σ_{k<=M} min(s_p, s_{j_k(p)}) without the reflected companion.
pub(crate) fn right_min_sum(s: &[u32], m: usize) -> u64 {
    let n = s.len();
    let bound = n as u32;
    let mut direct = 0u64;
    let mut suffix = 0u64;
    for k in 1..=m {
        direct += pairwise_min_sum(&s[..n - k], &s[k..], bound);
        suffix += s[n - k] as u64;
        direct += suffix;
    }
    direct
}

/// Σ_p |s_{p+1} - s_p|, the Chatterjee numerator (the last position is its own neighbor).
pub(crate) fn successive_abs_diff_sum(s: &[u32]) -> u64 {
    s.windows(2).map(|w| w[0].abs_diff(w[1]) as u64).sum()
}

/// Number of right neighbors taken by position `p` in the symmetric rule:
/// candidates are visited as p+1, p-1, p+2, p-2, ... and the first `m` that
/// exist are kept.
#[inline]
pub(crate) fn symmetric_right_count(n: usize, m: usize, p: usize) -> usize {
    let right_avail = n - 1 - p;
    let want = m.div_ceil(2).max(m.saturating_sub(p));
    want.min(right_avail)
}

/// Σ_p Σ_{q ∈ N_M(p)} min(s_p, s_q) where `N_M(p)` holds the `M` positions
/// closest to `p`, preferring the right one on equal distance.
pub(crate) fn symmetric_min_sum(s: &[u32], m: usize) -> u64 {
    let n = s.len();
    debug_assert!(m >= 1 && m < n);
    let bound = n as u32;
    // right_count(p) is nonincreasing in p and left_count(p) = m - right_count(p)
    // is nondecreasing, so for each offset k the sources form a prefix (right
    // pairs) and a suffix (left pairs).
    let mut right_hist = vec![0usize; m + 2];
    let mut left_hist = vec![0usize; m + 2];
    for p in 0..n {
        let rc = symmetric_right_count(n, m, p);
        right_hist[rc] += 1;
        left_hist[m - rc] += 1;
    }
    // sources_right[k] = #{p : rc(p) >= k}
    let mut right_at_least = n;
    let mut left_at_least = n;
    let mut total = 0u64;
    for k in 1..=m {
        right_at_least -= right_hist[k - 1];
        left_at_least -= left_hist[k - 1];
        // Right pairs (p, p + k) for p < right_at_least.
        let pr = right_at_least;
        total += pairwise_min_sum(&s[..pr], &s[k..k + pr], bound);
        // Left pairs (q, q - k) for q >= n - left_at_least.
        let q0 = n - left_at_least;
        total += pairwise_min_sum(&s[q0 - k..n - k], &s[q0..], bound);
    }
    total
}

/// Fenwick tree over `1..=n` counting inserted ranks.
struct Fenwick {
    tree: Vec<u32>,
}

impl Fenwick {
    fn new(n: usize) -> Self {
        Fenwick {
            tree: vec![0; n + 1],
        }
    }

    fn add(&mut self, mut i: usize) {
        while i < self.tree.len() {
            self.tree[i] += 1;
            i += i & i.wrapping_neg();
        }
    }

    /// Number of inserted values `<= i`.
    fn prefix(&self, mut i: usize) -> u32 {
        let mut acc = 0;
        while i > 0 {
            acc += self.tree[i];
            i -= i & i.wrapping_neg();
        }
        acc
    }
}

/// Hoeffding's D from `s` (Y ranks in X order, so the X rank of position p is p+1).
///
/// Returns the numerator and denominator of the exact rational value.
pub(crate) fn hoeffding_terms(s: &[u32]) -> (i128, i128) {
    let n = s.len();
    let mut fen = Fenwick::new(n);
    let (mut a, mut b, mut c) = (0i128, 0i128, 0i128);
    for (p, &sv) in s.iter().enumerate() {
        // Points strictly below-left: smaller X (already inserted) and smaller Y.
        let q = fen.prefix(sv as usize - 1) as i128;
        fen.add(sv as usize);
        let r = p as i128 + 1;
        let t = sv as i128;
        a += (r - 1) * (r - 2) * (t - 1) * (t - 2);
        b += (r - 2) * (t - 2) * q;
        c += q * (q - 1);
    }
    let n = n as i128;
    let num = a - 2 * (n - 2) * b + (n - 2) * (n - 3) * c;
    let den = n * (n - 1) * (n - 2) * (n - 3) * (n - 4);
    (num, den)
}
