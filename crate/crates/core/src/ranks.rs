//! Ranks, the ascending X order, right nearest neighbors and null permutations.
//!
//! Public indices (`right_neighbor`) are 1-based; everything stored inside the
//! types is 0-based. Rank values are always 1-based (`1..=n`).

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Result, XiError};
use crate::rng::{derive_rng, Domain};

/// Relative magnitude of the tie-breaking jitter.
pub const JITTER_SCALE: f64 = 1e-9;

/// Paired observations `(x_i, y_i)`.
///
/// Construction checks lengths, finiteness and `n >= 2`. Ties are detected
/// lazily by the ranking routines, so a `Sample` may still carry ties unless
/// it was built with [`Sample::with_jitter`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    x: Vec<f64>,
    y: Vec<f64>,
}

impl Sample {
    pub fn new(x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        if x.len() != y.len() {
            return Err(XiError::LengthMismatch {
                x_len: x.len(),
                y_len: y.len(),
            });
        }
        if x.len() < 2 {
            return Err(XiError::Size { n: x.len(), min: 2 });
        }
        check_finite(&x)?;
        check_finite(&y)?;
        Ok(Sample { x, y })
    }

    /// Like [`Sample::new`], but adds seeded uniform noise of magnitude
    /// `1e-9 * range` to both coordinates so that ties are broken at random.
    pub fn with_jitter(x: Vec<f64>, y: Vec<f64>, seed: u64) -> Result<Self> {
        let mut s = Sample::new(x, y)?;
        jitter(&mut s.x, seed, 0);
        jitter(&mut s.y, seed, 1);
        Ok(s)
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    /// The sample `(x, -y)`.
    pub fn negate_y(&self) -> Sample {
        Sample {
            x: self.x.clone(),
            y: self.y.iter().map(|v| -v).collect(),
        }
    }

    pub fn into_parts(self) -> (Vec<f64>, Vec<f64>) {
        (self.x, self.y)
    }
}

fn check_finite(values: &[f64]) -> Result<()> {
    match values.iter().position(|v| !v.is_finite()) {
        Some(index) => Err(XiError::NonFinite {
            index,
            value: values[index],
        }),
        None => Ok(()),
    }
}

fn jitter(values: &mut [f64], seed: u64, coordinate: u64) {
    let (lo, hi) = values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
    let range = hi - lo;
    let scale = if range > 0.0 {
        range
    } else {
        lo.abs().max(1.0)
    };
    let half_width = JITTER_SCALE * scale;
    let mut rng = derive_rng(Domain::Jitter, seed, coordinate, 0);
    for v in values.iter_mut() {
        *v += rng.random_range(-half_width..=half_width);
    }
}

/// Integer ranks `r_i = #{j : v_j <= v_i}`; a permutation of `1..=n`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RankVector(Vec<u32>);

impl RankVector {
    /// Wraps `ranks` after checking that it is a permutation of `1..=n`.
    pub fn from_vec(ranks: Vec<u32>) -> Result<Self> {
        let n = ranks.len();
        let mut seen = vec![false; n];
        for (i, &r) in ranks.iter().enumerate() {
            let r = r as usize;
            if r == 0 || r > n || seen[r - 1] {
                return Err(XiError::Config(format!(
                    "rank {r} at index {i} does not form a permutation of 1..={n}"
                )));
            }
            seen[r - 1] = true;
        }
        Ok(RankVector(ranks))
    }

    /// The identity permutation `(1, 2, ..., n)`.
    pub fn identity(n: usize) -> Self {
        RankVector((1..=n as u32).collect())
    }

    pub fn as_slice(&self) -> &[u32] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_inner(self) -> Vec<u32> {
        self.0
    }
}

/// Indices `0..n` sorted by `values`, rejecting ties and non-finite input.
fn sorted_indices(values: &[f64]) -> Result<Vec<u32>> {
    check_finite(values)?;
    let mut idx: Vec<u32> = (0..values.len() as u32).collect();
    idx.sort_unstable_by(|&a, &b| values[a as usize].total_cmp(&values[b as usize]));
    for w in idx.windows(2) {
        let (a, b) = (w[0] as usize, w[1] as usize);
        // total_cmp separates 0.0 and -0.0; numeric equality is what matters.
        if values[a] == values[b] {
            return Err(XiError::Tie {
                first: a.min(b),
                second: a.max(b),
                value: values[a],
            });
        }
    }
    Ok(idx)
}

/// Ranks of `values` (1 = smallest).
pub fn compute_ranks(values: &[f64]) -> Result<RankVector> {
    let idx = sorted_indices(values)?;
    let mut r = vec![0u32; values.len()];
    for (p, &i) in idx.iter().enumerate() {
        r[i as usize] = p as u32 + 1;
    }
    Ok(RankVector(r))
}

/// The ascending order of the X coordinate together with its inverse.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct XOrder {
    order: Vec<u32>,
    pos: Vec<u32>,
}

impl XOrder {
    /// The identity order, i.e. data whose `x` is already increasing.
    pub fn identity(n: usize) -> Self {
        let order: Vec<u32> = (0..n as u32).collect();
        XOrder {
            pos: order.clone(),
            order,
        }
    }

    /// Builds an order from a rank vector of the X coordinate.
    pub fn from_ranks(x_ranks: &RankVector) -> Self {
        let n = x_ranks.len();
        let mut order = vec![0u32; n];
        let pos: Vec<u32> = x_ranks.as_slice().iter().map(|&r| r - 1).collect();
        for (i, &p) in pos.iter().enumerate() {
            order[p as usize] = i as u32;
        }
        XOrder { order, pos }
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    /// 0-based original indices in ascending X order.
    pub fn order(&self) -> &[u32] {
        &self.order
    }

    /// 0-based sorted position of each original index.
    pub fn pos(&self) -> &[u32] {
        &self.pos
    }

    /// `j_m(i)` with 1-based `i` and result: the index of the `m`-th right
    /// nearest neighbor of `x_i`, or `i` itself when fewer than `m` larger
    /// values exist.
    pub fn right_neighbor(&self, i: usize, m: usize) -> Result<usize> {
        let n = self.len();
        if i == 0 || i > n {
            return Err(XiError::Index { index: i, n });
        }
        if m == 0 {
            return Err(XiError::MRange { m, n });
        }
        Ok(self.right_neighbor0(i - 1, m) + 1)
    }

    /// 0-based variant of [`XOrder::right_neighbor`].
    #[inline]
    pub(crate) fn right_neighbor0(&self, i: usize, m: usize) -> usize {
        let p = self.pos[i] as usize + m;
        if p < self.order.len() {
            self.order[p] as usize
        } else {
            i
        }
    }

    /// `values` rearranged into ascending X order.
    pub fn gather(&self, values: &[u32]) -> Vec<u32> {
        self.order.iter().map(|&i| values[i as usize]).collect()
    }
}

/// Sorts `x` ascending, rejecting ties and non-finite values.
pub fn x_order(x: &[f64]) -> Result<XOrder> {
    let order = sorted_indices(x)?;
    let mut pos = vec![0u32; x.len()];
    for (p, &i) in order.iter().enumerate() {
        pos[i as usize] = p as u32;
    }
    Ok(XOrder { order, pos })
}

/// 1-based `j_m(i)`; see [`XOrder::right_neighbor`].
pub fn right_neighbor(ord: &XOrder, i: usize, m: usize) -> Result<usize> {
    ord.right_neighbor(i, m)
}

/// `r_i -> n + 1 - r_i`, the ranks of the negated coordinate.
pub fn reflect_ranks(r: &RankVector) -> RankVector {
    let top = r.len() as u32 + 1;
    RankVector(r.as_slice().iter().map(|&v| top - v).collect())
}

/// A uniformly random permutation of `1..=n` (Fisher-Yates).
pub fn random_rank_permutation<R: Rng + ?Sized>(rng: &mut R, n: usize) -> RankVector {
    let mut buf = Vec::with_capacity(n);
    fill_random_permutation(rng, n, &mut buf);
    RankVector(buf)
}

/// Allocation-free form of [`random_rank_permutation`] for hot loops.
pub(crate) fn fill_random_permutation<R: Rng + ?Sized>(rng: &mut R, n: usize, buf: &mut Vec<u32>) {
    buf.clear();
    buf.extend(1..=n as u32);
    buf.shuffle(rng);
}

/// Calls `f` once for every permutation of `1..=n` (Heap's algorithm).
pub fn for_each_permutation(n: usize, mut f: impl FnMut(&[u32])) {
    let mut perm: Vec<u32> = (1..=n as u32).collect();
    let mut counters = vec![0usize; n];
    f(&perm);
    let mut i = 1;
    while i < n {
        if counters[i] < i {
            let j = if i % 2 == 0 { 0 } else { counters[i] };
            perm.swap(j, i);
            f(&perm);
            counters[i] += 1;
            i = 1;
        } else {
            counters[i] = 0;
            i += 1;
        }
    }
}

/// Number of right neighbors `M`, at least 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NeighborCount(usize);

impl NeighborCount {
    pub fn new(m: usize) -> Result<Self> {
        if m == 0 {
            return Err(XiError::MRange { m, n: 0 });
        }
        Ok(NeighborCount(m))
    }

    pub fn get(self) -> usize {
        self.0
    }

    /// Checks `1 <= M <= n - 1`.
    pub fn check(self, n: usize) -> Result<usize> {
        if self.0 >= 1 && self.0 < n {
            Ok(self.0)
        } else {
            Err(XiError::MRange { m: self.0, n })
        }
    }
}
