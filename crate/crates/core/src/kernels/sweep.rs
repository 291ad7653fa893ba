//! Inner loops over one column of donors.
//!
//! A sweep walks donors `0..n` in groups of `LANES`, reading the packed
//! allele bits directly. Contributions to the column sum go to lane-partial
//! accumulators (`acc[j % LANES]`) in ascending donor order; the partials are
//! then added in ascending lane order. `UNROLL` only replicates the group
//! body, so it never changes the arithmetic.

/// Donor weights for one recipient column.
pub(crate) trait PiSource: Copy {
    fn at(self, j: usize) -> f64;
}

#[derive(Clone, Copy)]
pub(crate) struct UniformPi(pub f64);

impl PiSource for UniformPi {
    #[inline(always)]
    fn at(self, _j: usize) -> f64 {
        self.0
    }
}

#[derive(Clone, Copy)]
pub(crate) struct DenseCol<'a>(pub &'a [f64]);

impl PiSource for DenseCol<'_> {
    #[inline(always)]
    fn at(self, j: usize) -> f64 {
        self.0[j]
    }
}

/// Per-variant mis-copy probability.
pub(crate) trait MuSource: Copy {
    fn at(self, l: usize) -> f64;
}

#[derive(Clone, Copy)]
pub(crate) struct ScalarMu(pub f64);

impl MuSource for ScalarMu {
    #[inline(always)]
    fn at(self, _l: usize) -> f64 {
        self.0
    }
}

#[derive(Clone, Copy)]
pub(crate) struct VectorMu<'a>(pub &'a [f64]);

impl MuSource for VectorMu<'_> {
    #[inline(always)]
    fn at(self, l: usize) -> f64 {
        self.0[l]
    }
}

/// Emission values `[match, mismatch]`, computed as `(1 - H)(1 - 2mu) + mu`
/// with `H` the mismatch indicator.
#[inline(always)]
pub(crate) fn emission(mu: f64) -> [f64; 2] {
    let c = 1.0 - 2.0 * mu;
    [1.0 * c + mu, 0.0 * c + mu]
}

/// Packed row plus the recipient's allele spread to a full-word xor mask, so
/// that `(word ^ mask)` has a 1 wherever donor and recipient differ.
#[derive(Clone, Copy)]
pub(crate) struct BitRow<'a> {
    pub words: &'a [u32],
    pub mask: u32,
}

impl BitRow<'_> {
    #[inline(always)]
    fn mismatch_bits(self, j: usize) -> u32 {
        (self.words[j >> 5] ^ self.mask) >> (j & 31)
    }
}

/// One pass over the column. `f(mismatch_a, mismatch_b, old, pi)` returns the
/// new entry and its contribution to the running sum. The self-copy entry
/// `diag` is forced to zero and contributes nothing.
#[inline(always)]
#[allow(clippy::too_many_arguments)]
pub(crate) fn sweep<const LANES: usize, const UNROLL: usize, P, F>(
    col: &mut [f64],
    n: usize,
    diag: usize,
    a: BitRow<'_>,
    b: BitRow<'_>,
    pi: P,
    f: F,
) -> f64
where
    P: PiSource,
    F: Fn(bool, bool, f64, f64) -> (f64, f64),
{
    let col = &mut col[..n];
    let mut acc = [0.0f64; LANES];
    let groups = n / LANES;
    let diag_group = diag / LANES;

    let group = |g: usize, acc: &mut [f64; LANES], col: &mut [f64]| {
        let j0 = g * LANES;
        let ba = a.mismatch_bits(j0);
        let bb = b.mismatch_bits(j0);
        let c = &mut col[j0..j0 + LANES];
        for k in 0..LANES {
            let (v, s) = f((ba >> k) & 1 == 1, (bb >> k) & 1 == 1, c[k], pi.at(j0 + k));
            c[k] = v;
            acc[k] += s;
        }
    };

    let run = |lo: usize, hi: usize, acc: &mut [f64; LANES], col: &mut [f64]| {
        let mut g = lo;
        while g + UNROLL <= hi {
            for u in 0..UNROLL {
                group(g + u, acc, col);
            }
            g += UNROLL;
        }
        while g < hi {
            group(g, acc, col);
            g += 1;
        }
    };

    let before = diag_group.min(groups);
    run(0, before, &mut acc, col);
    if diag_group < groups {
        let j0 = diag_group * LANES;
        let ba = a.mismatch_bits(j0);
        let bb = b.mismatch_bits(j0);
        for k in 0..LANES {
            let j = j0 + k;
            if j == diag {
                col[j] = 0.0;
            } else {
                let (v, s) = f((ba >> k) & 1 == 1, (bb >> k) & 1 == 1, col[j], pi.at(j));
                col[j] = v;
                acc[k] += s;
            }
        }
        run(diag_group + 1, groups, &mut acc, col);
    }

    let tail = groups * LANES;
    if tail < n {
        let ba = a.mismatch_bits(tail);
        let bb = b.mismatch_bits(tail);
        for k in 0..n - tail {
            let j = tail + k;
            if j == diag {
                col[j] = 0.0;
            } else {
                let (v, s) = f((ba >> k) & 1 == 1, (bb >> k) & 1 == 1, col[j], pi.at(j));
                col[j] = v;
                acc[k] += s;
            }
        }
    }

    let mut sum = acc[0];
    for &p in &acc[1..] {
        sum += p;
    }
    sum
}

#[cfg(test)]
mod tests {
    use super::*;

    fn reference(col: &mut [f64], diag: usize, words: &[u32], mask: u32, pi: &[f64]) -> f64 {
        let mut s = 0.0;
        for j in 0..col.len() {
            if j == diag {
                col[j] = 0.0;
                continue;
            }
            let mis = ((words[j / 32] ^ mask) >> (j % 32)) & 1 == 1;
            let v = if mis { 0.25 } else { 0.5 } * (col[j] + pi[j]);
            col[j] = v;
            s += v;
        }
        s
    }

    fn check<const LANES: usize, const UNROLL: usize>(n: usize, diag: usize) {
        let words: Vec<u32> = (0..n.div_ceil(32) + 1)
            .map(|w| 0x9e37_79b9u32.rotate_left(w as u32 * 7))
            .collect();
        let mask = if diag.is_multiple_of(2) { 0 } else { !0 };
        let pi: Vec<f64> = (0..n).map(|j| 1.0 + j as f64 / 16.0).collect();
        let start: Vec<f64> = (0..n).map(|j| (j as f64).sin().abs()).collect();
        let mut want = start.clone();
        let want_sum = reference(&mut want, diag, &words, mask, &pi);
        let mut got = start;
        let row = BitRow { words: &words, mask };
        let got_sum = sweep::<LANES, UNROLL, _, _>(&mut got, n, diag, row, row, DenseCol(&pi), |mis, _, old, p| {
            let v = if mis { 0.25 } else { 0.5 } * (old + p);
            (v, v)
        });
        assert_eq!(got, want, "n={n} diag={diag} lanes={LANES} unroll={UNROLL}");
        if LANES == 1 {
            assert_eq!(got_sum, want_sum);
        } else {
            assert!((got_sum - want_sum).abs() <= 1e-13 * want_sum);
        }
    }

    #[test]
    fn sweep_matches_elementwise_reference() {
        for n in [2usize, 3, 7, 8, 9, 31, 32, 33, 65, 100] {
            for diag in [0, n / 2, n - 1] {
                check::<1, 1>(n, diag);
                check::<2, 4>(n, diag);
                check::<4, 4>(n, diag);
                check::<4, 8>(n, diag);
                check::<8, 1>(n, diag);
                check::<8, 8>(n, diag);
            }
        }
    }

    #[test]
    fn unroll_never_changes_the_sum() {
        let n = 203;
        let words: Vec<u32> = (0..8).map(|w| 0xdead_beefu32.wrapping_mul(w + 3)).collect();
        let pi = vec![0.1; n];
        let run = |unroll: usize| {
            let mut col: Vec<f64> = (0..n).map(|j| 1.0 / (1.0 + j as f64)).collect();
            let row = BitRow { words: &words, mask: 0 };
            let f = |mis: bool, _: bool, old: f64, p: f64| {
                let v = if mis { 1e-3 } else { 0.999 } * (0.7 * old + 0.3 * p);
                (v, v)
            };
            let s = match unroll {
                1 => sweep::<4, 1, _, _>(&mut col, n, 17, row, row, DenseCol(&pi), f),
                4 => sweep::<4, 4, _, _>(&mut col, n, 17, row, row, DenseCol(&pi), f),
                _ => sweep::<4, 8, _, _>(&mut col, n, 17, row, row, DenseCol(&pi), f),
            };
            (s.to_bits(), col)
        };
        assert_eq!(run(1), run(4));
        assert_eq!(run(1), run(8));
    }

    #[test]
    fn emission_values() {
        assert_eq!(emission(0.1), [0.9, 0.1]);
        let tiny = 1e-300;
        assert_eq!(emission(tiny)[1], tiny);
        assert_eq!(emission(tiny)[0], 1.0);
    }
}
