//! Binary erosion, dilation and opening with square structuring elements.
//!
//! A `k × k` kernel is anchored asymmetrically for even `k`: erosion places
//! the window `erosion_anchor()` pixels up/left of the output pixel, dilation
//! `dilation_anchor()` pixels. The two anchors sum to `k - 1`, so dilation
//! uses the reflected element of erosion and `open` is a true morphological
//! opening (anti-extensive and idempotent) for every `k`.
//!
//! Out-of-image pixels are background for both operations.
//!
//! Two interchangeable implementations exist: a naive per-pixel window scan
//! and a separable path made of two 1D sliding-window passes, each running in
//! O(n) regardless of `k`.

use std::collections::VecDeque;

use crate::raster::BinaryMask;

/// Square structuring element of side `size`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct KernelSpec {
    size: usize,
}

impl KernelSpec {
    /// Panics if `size` is 0.
    pub fn new(size: usize) -> Self {
        assert!(size >= 1, "kernel size must be at least 1");
        Self { size }
    }

    /// Kernel that erases structures of diameter `<= d`, i.e. side `d + 1`.
    pub fn for_diameter(d: usize) -> Self {
        Self::new(d + 1)
    }

    pub fn size(&self) -> usize {
        self.size
    }

    /// `floor((k - 1) / 2)`
    pub fn erosion_anchor(&self) -> usize {
        (self.size - 1) / 2
    }

    /// `ceil((k - 1) / 2)`
    pub fn dilation_anchor(&self) -> usize {
        self.size / 2
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum MorphMode {
    Naive,
    #[default]
    Separable,
}

/// Sliding-window minimum: `out[i] = min(values[i - anchor ..= i - anchor + window - 1])`
/// with out-of-range elements read as 0.
pub fn min_filter_1d(values: &[u8], window: usize, anchor: usize) -> Vec<u8> {
    let mut out = vec![0; values.len()];
    sliding_extremum(values, &mut out, window, anchor, Extremum::Min);
    out
}

/// Sliding-window maximum with the same window convention as
/// [`min_filter_1d`]; out-of-range elements contribute 0.
pub fn max_filter_1d(values: &[u8], window: usize, anchor: usize) -> Vec<u8> {
    let mut out = vec![0; values.len()];
    sliding_extremum(values, &mut out, window, anchor, Extremum::Max);
    out
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Extremum {
    Min,
    Max,
}

impl Extremum {
    /// `back` can be dropped from the queue once `incoming` arrives.
    #[inline]
    fn dominated(self, back: u8, incoming: u8) -> bool {
        match self {
            Extremum::Min => back >= incoming,
            Extremum::Max => back <= incoming,
        }
    }
}

// Monotone-deque pass over the in-range part of each window. Both window
// ends advance monotonically with `i`, so every index enters and leaves the
// queue at most once.
fn sliding_extremum_with(
    values: &[u8],
    out: &mut [u8],
    window: usize,
    anchor: usize,
    kind: Extremum,
    queue: &mut VecDeque<usize>,
) {
    assert!(window >= 1, "window must be at least 1");
    let n = values.len();
    debug_assert_eq!(out.len(), n);
    queue.clear();
    let tail = window - 1 - anchor.min(window - 1);
    let mut next = 0usize;
    for (i, slot) in out.iter_mut().enumerate() {
        let lo = i.saturating_sub(anchor);
        let hi = (i + tail).min(n.saturating_sub(1));
        // a min window that leaves the array always sees a 0
        let clipped = i < anchor || i + tail >= n;
        while next <= hi && next < n {
            let v = values[next];
            while let Some(&b) = queue.back() {
                if kind.dominated(values[b], v) {
                    queue.pop_back();
                } else {
                    break;
                }
            }
            queue.push_back(next);
            next += 1;
        }
        while let Some(&f) = queue.front() {
            if f < lo {
                queue.pop_front();
            } else {
                break;
            }
        }
        *slot = match queue.front() {
            _ if kind == Extremum::Min && clipped => 0,
            Some(&f) if lo <= hi => values[f],
            _ => 0,
        };
    }
}

fn sliding_extremum(values: &[u8], out: &mut [u8], window: usize, anchor: usize, kind: Extremum) {
    let mut queue = VecDeque::with_capacity(window.min(values.len()) + 1);
    sliding_extremum_with(values, out, window, anchor, kind, &mut queue);
}

fn transpose(data: &[u8], width: usize, height: usize) -> Vec<u8> {
    let mut t = vec![0; data.len()];
    const B: usize = 32;
    for rb in (0..height).step_by(B) {
        for cb in (0..width).step_by(B) {
            for r in rb..(rb + B).min(height) {
                for c in cb..(cb + B).min(width) {
                    t[c * height + r] = data[r * width + c];
                }
            }
        }
    }
    t
}

fn rows_pass(data: &[u8], width: usize, window: usize, anchor: usize, kind: Extremum) -> Vec<u8> {
    let mut out = vec![0; data.len()];
    let mut queue = VecDeque::with_capacity(window.min(width) + 1);
    for (src, dst) in data.chunks_exact(width).zip(out.chunks_exact_mut(width)) {
        sliding_extremum_with(src, dst, window, anchor, kind, &mut queue);
    }
    out
}

fn separable(mask: &BinaryMask, kernel: KernelSpec, anchor: usize, kind: Extremum) -> BinaryMask {
    let (w, h) = mask.dims();
    let k = kernel.size();
    if k == 1 {
        return mask.clone();
    }
    let horizontal = rows_pass(mask.as_slice(), w, k, anchor, kind);
    let t = transpose(&horizontal, w, h);
    let vertical = rows_pass(&t, h, k, anchor, kind);
    BinaryMask::from_raw_unchecked(w, h, transpose(&vertical, h, w))
}

fn naive(mask: &BinaryMask, kernel: KernelSpec, anchor: usize, kind: Extremum) -> BinaryMask {
    let (w, h) = mask.dims();
    let k = kernel.size() as isize;
    let a = anchor as isize;
    let mut out = vec![0u8; w * h];
    for r in 0..h as isize {
        for c in 0..w as isize {
            let mut all = true;
            let mut any = false;
            'window: for dr in 0..k {
                for dc in 0..k {
                    let (rr, cc) = (r - a + dr, c - a + dc);
                    let v =
                        rr >= 0 && cc >= 0 && rr < h as isize && cc < w as isize && mask.get(rr as usize, cc as usize);
                    all &= v;
                    any |= v;
                    match kind {
                        Extremum::Min if !all => break 'window,
                        Extremum::Max if any => break 'window,
                        _ => {}
                    }
                }
            }
            out[r as usize * w + c as usize] = match kind {
                Extremum::Min => all,
                Extremum::Max => any,
            } as u8;
        }
    }
    BinaryMask::from_raw_unchecked(w, h, out)
}

/// Pixel is kept iff the whole `k × k` window anchored at
/// `erosion_anchor()` is inside the image and foreground.
pub fn erode(mask: &BinaryMask, kernel: KernelSpec, mode: MorphMode) -> BinaryMask {
    let anchor = kernel.erosion_anchor();
    match mode {
        MorphMode::Naive => naive(mask, kernel, anchor, Extremum::Min),
        MorphMode::Separable => separable(mask, kernel, anchor, Extremum::Min),
    }
}

/// Pixel is set iff any pixel of the `k × k` window anchored at
/// `dilation_anchor()` is foreground.
pub fn dilate(mask: &BinaryMask, kernel: KernelSpec, mode: MorphMode) -> BinaryMask {
    let anchor = kernel.dilation_anchor();
    match mode {
        MorphMode::Naive => naive(mask, kernel, anchor, Extremum::Max),
        MorphMode::Separable => separable(mask, kernel, anchor, Extremum::Max),
    }
}

/// `dilate(erode(mask))`.
pub fn open(mask: &BinaryMask, kernel: KernelSpec, mode: MorphMode) -> BinaryMask {
    dilate(&erode(mask, kernel, mode), kernel, mode)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use MorphMode::*;

    fn brute_window(values: &[u8], k: usize, anchor: usize, min: bool) -> Vec<u8> {
        let n = values.len() as isize;
        (0..n)
            .map(|i| {
                let vals = (0..k as isize).map(|d| {
                    let j = i - anchor as isize + d;
                    if j < 0 || j >= n {
                        0
                    } else {
                        values[j as usize]
                    }
                });
                if min {
                    vals.min().unwrap()
                } else {
                    vals.max().unwrap()
                }
            })
            .collect()
    }

    fn centered_square(n: usize, side: usize) -> BinaryMask {
        let lo = (n - side) / 2;
        BinaryMask::from_fn(n, n, |r, c| {
            (lo..lo + side).contains(&r) && (lo..lo + side).contains(&c)
        })
    }

    #[test]
    fn anchors_pair_up() {
        for k in 1..20 {
            let ks = KernelSpec::new(k);
            assert_eq!(ks.erosion_anchor() + ks.dilation_anchor(), k - 1);
        }
        assert_eq!(KernelSpec::new(4).erosion_anchor(), 1);
        assert_eq!(KernelSpec::new(4).dilation_anchor(), 2);
    }

    #[test]
    fn min_filter_example() {
        assert_eq!(min_filter_1d(&[1, 1, 1, 0, 1], 2, 0), vec![1, 1, 0, 0, 0]);
        assert_eq!(min_filter_1d(&[1, 0, 1], 1, 0), vec![1, 0, 1]);
        assert_eq!(max_filter_1d(&[0, 0, 1, 0, 0], 3, 1), vec![0, 1, 1, 1, 0]);
    }

    #[test]
    fn window_larger_than_input() {
        assert_eq!(min_filter_1d(&[1, 1, 1], 9, 4), vec![0, 0, 0]);
        assert_eq!(max_filter_1d(&[0, 1, 0], 9, 4), vec![1, 1, 1]);
        assert_eq!(max_filter_1d(&[1, 0, 0, 0, 0, 0], 2, 0), vec![1, 0, 0, 0, 0, 0]);
    }

    #[test]
    fn erode_dilate_square() {
        let sq = centered_square(5, 3);
        for mode in [Naive, Separable] {
            let e = erode(&sq, KernelSpec::new(3), mode);
            assert_eq!(e.count_ones(), 1);
            assert!(e.get(2, 2));
            assert_eq!(dilate(&e, KernelSpec::new(3), mode), sq);
            assert_eq!(erode(&sq, KernelSpec::new(1), mode), sq);
            assert!(dilate(&BinaryMask::zeros(5, 5), KernelSpec::new(4), mode).is_blank());
        }
    }

    #[test]
    fn open_examples() {
        let sq = centered_square(5, 3);
        for mode in [Naive, Separable] {
            assert_eq!(open(&sq, KernelSpec::new(3), mode), sq);
            assert!(open(&sq, KernelSpec::new(4), mode).is_blank());
            let strip = BinaryMask::from_fn(10, 6, |r, _| r == 2 || r == 3);
            assert!(open(&strip, KernelSpec::new(3), mode).is_blank());
            assert_eq!(open(&strip, KernelSpec::new(2), mode), strip);
        }
    }

    #[test]
    fn kernel_bigger_than_image_erodes_everything() {
        let full = BinaryMask::from_fn(4, 3, |_, _| true);
        assert!(erode(&full, KernelSpec::new(5), Separable).is_blank());
        assert!(erode(&full, KernelSpec::new(5), Naive).is_blank());
        assert_eq!(erode(&full, KernelSpec::new(3), Separable).count_ones(), 2);
    }

    fn arb_mask(max: usize) -> impl Strategy<Value = BinaryMask> {
        (1..=max, 1..=max, 0u32..=100).prop_flat_map(|(w, h, density)| {
            prop::collection::vec(0u32..100, w * h)
                .prop_map(move |d| BinaryMask::new(w, h, d.into_iter().map(|x| (x < density) as u8).collect()).unwrap())
        })
    }

    proptest! {
        #[test]
        fn min_max_match_brute_force(
            values in prop::collection::vec(0u8..=3, 0..40),
            k in 1usize..12,
            anchor_seed in 0usize..12,
        ) {
            let anchor = anchor_seed % k;
            prop_assert_eq!(min_filter_1d(&values, k, anchor), brute_window(&values, k, anchor, true));
            prop_assert_eq!(max_filter_1d(&values, k, anchor), brute_window(&values, k, anchor, false));
        }

        #[test]
        fn separable_matches_naive(m in arb_mask(24), k in 1usize..10) {
            let ks = KernelSpec::new(k);
            prop_assert_eq!(erode(&m, ks, Separable), erode(&m, ks, Naive));
            prop_assert_eq!(dilate(&m, ks, Separable), dilate(&m, ks, Naive));
        }

        #[test]
        fn opening_laws(m in arb_mask(24), k1 in 1usize..8, extra in 0usize..5) {
            let k2 = k1 + extra;
            let o1 = open(&m, KernelSpec::new(k1), Separable);
            let o2 = open(&m, KernelSpec::new(k2), Separable);
            prop_assert!(o1.is_subset_of(&m));
            prop_assert_eq!(open(&o1, KernelSpec::new(k1), Separable), o1.clone());
            prop_assert!(o2.is_subset_of(&o1));
        }

        // With out-of-image pixels treated as background the equivalence only
        // holds for `a` kept at least `k` pixels off the border; the forward
        // implication holds everywhere.
        #[test]
        fn erosion_dilation_adjunction(a in arb_mask(16), seed in any::<u64>(), k in 1usize..6) {
            let (w, h) = a.dims();
            let mut s = seed;
            let b = BinaryMask::from_fn(w, h, |_, _| {
                s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                (s >> 61) != 0
            });
            let ks = KernelSpec::new(k);
            if a.is_subset_of(&erode(&b, ks, Naive)) {
                prop_assert!(dilate(&a, ks, Naive).is_subset_of(&b));
            }
            let inner = BinaryMask::from_fn(w, h, |r, c| {
                a.get(r, c) && r >= k && c >= k && r + k < h && c + k < w
            });
            let lhs = dilate(&inner, ks, Naive).is_subset_of(&b);
            let rhs = inner.is_subset_of(&erode(&b, ks, Naive));
            prop_assert_eq!(lhs, rhs);
        }
    }
}
