//! Naive reference implementation of the unscaled recursions, for tests.
//!
//! Values are held as [`ExtFloat`] (an `f64` mantissa with a separate `i64`
//! exponent) so the raw forward and backward quantities never underflow, and
//! column sums use compensated summation. Nothing here is shared with the
//! optimized kernels.

use ndarray::{Array3, ArrayView2};

use crate::error::{Error, Result};
use crate::model_params::ModelParameters;

pub const MAX_HAPS: usize = 64;
pub const MAX_VARIANTS: usize = 256;

/// `m * 2^e` with `m == 0` or `0.5 <= |m| < 1`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ExtFloat {
    m: f64,
    e: i64,
}

fn pow2(k: i64) -> f64 {
    debug_assert!((-1022..=1023).contains(&k));
    f64::from_bits(((k + 1023) as u64) << 52)
}

/// Splits a finite `x` into `(m, e)` with `x = m * 2^e`, `0.5 <= |m| < 1`.
fn frexp(x: f64) -> (f64, i64) {
    if x == 0.0 || !x.is_finite() {
        return (x, 0);
    }
    let (x, bias) = if x.abs() < f64::MIN_POSITIVE {
        (x * pow2(64), -64)
    } else {
        (x, 0)
    };
    let bits = x.to_bits();
    let exp = ((bits >> 52) & 0x7ff) as i64;
    let m = f64::from_bits((bits & !(0x7ffu64 << 52)) | (1022u64 << 52));
    (m, exp - 1022 + bias)
}

fn ldexp(mut m: f64, mut e: i64) -> f64 {
    while e > 1000 {
        m *= pow2(1000);
        e -= 1000;
        if m.is_infinite() {
            return m;
        }
    }
    while e < -1000 {
        m *= pow2(-1000);
        e += 1000;
        if m == 0.0 {
            return m;
        }
    }
    m * pow2(e)
}

impl ExtFloat {
    pub const ZERO: ExtFloat = ExtFloat { m: 0.0, e: 0 };
    pub const ONE: ExtFloat = ExtFloat { m: 0.5, e: 1 };

    pub fn new(x: f64) -> Self {
        let (m, e) = frexp(x);
        Self { m, e }
    }

    fn norm(m: f64, e: i64) -> Self {
        if m == 0.0 {
            return Self::ZERO;
        }
        let (m2, e2) = frexp(m);
        Self { m: m2, e: e + e2 }
    }

    pub fn to_f64(self) -> f64 {
        ldexp(self.m, self.e)
    }

    pub fn is_zero(self) -> bool {
        self.m == 0.0
    }

    pub fn ln(self) -> f64 {
        self.m.ln() + self.e as f64 * std::f64::consts::LN_2
    }

    pub fn times(self, o: Self) -> Self {
        Self::norm(self.m * o.m, self.e + o.e)
    }

    pub fn scale(self, x: f64) -> Self {
        self.times(Self::new(x))
    }

    pub fn over(self, o: Self) -> Self {
        Self::norm(self.m / o.m, self.e - o.e)
    }

    pub fn plus(self, o: Self) -> Self {
        sum([self, o])
    }

    /// Relative difference `|a - b| / max(|a|, |b|)`; 0 when both are 0.
    pub fn rel_diff(self, o: Self) -> f64 {
        if self.is_zero() && o.is_zero() {
            return 0.0;
        }
        let big = if self.e >= o.e { self } else { o };
        let diff = sum([self, Self { m: -o.m, e: o.e }]);
        diff.over(big).to_f64().abs()
    }
}

/// Neumaier-compensated sum of extended values.
pub fn sum<I: IntoIterator<Item = ExtFloat>>(terms: I) -> ExtFloat {
    let terms: Vec<ExtFloat> = terms.into_iter().filter(|t| !t.is_zero()).collect();
    let Some(emax) = terms.iter().map(|t| t.e).max() else {
        return ExtFloat::ZERO;
    };
    let mut s = 0.0f64;
    let mut c = 0.0f64;
    for t in &terms {
        let x = ldexp(t.m, t.e - emax);
        let u = s + x;
        if s.abs() >= x.abs() {
            c += (s - u) + x;
        } else {
            c += (x - u) + s;
        }
        s = u;
    }
    ExtFloat::norm(s + c, emax)
}

/// Raw quantities indexed `[l * N * N + i * N + j]` (recipient-major), plus
/// posteriors as `[[l, j, i]]`.
pub struct OracleResult {
    pub n_haps: usize,
    pub n_variants: usize,
    raw_alpha: Vec<ExtFloat>,
    raw_beta: Vec<ExtFloat>,
    pub posteriors: Array3<f64>,
}

impl OracleResult {
    fn idx(&self, l: usize, j: usize, i: usize) -> usize {
        (l * self.n_haps + i) * self.n_haps + j
    }

    pub fn raw_alpha(&self, l: usize, j: usize, i: usize) -> ExtFloat {
        self.raw_alpha[self.idx(l, j, i)]
    }

    pub fn raw_beta(&self, l: usize, j: usize, i: usize) -> ExtFloat {
        self.raw_beta[self.idx(l, j, i)]
    }

    /// `P(recipient i | donors)`: the sum of the final raw forward column.
    pub fn likelihood(&self, i: usize) -> ExtFloat {
        let l = self.n_variants - 1;
        sum((0..self.n_haps).map(|j| self.raw_alpha(l, j, i)))
    }

    /// Same quantity through `sum_j alpha * beta` at variant `l`.
    pub fn likelihood_at(&self, l: usize, i: usize) -> ExtFloat {
        sum((0..self.n_haps).map(|j| self.raw_alpha(l, j, i).times(self.raw_beta(l, j, i))))
    }
}

fn theta(mu: f64, h: u8) -> f64 {
    let h = h as f64;
    (1.0 - h) * (1.0 - 2.0 * mu) + mu
}

/// Runs the unscaled forward and backward recursions on `haps` (`L x N`).
pub fn oracle_run(haps: ArrayView2<'_, u8>, pars: &ModelParameters) -> Result<OracleResult> {
    let (l_n, n) = haps.dim();
    if n > MAX_HAPS || l_n > MAX_VARIANTS {
        return Err(Error::TooLarge(format!(
            "{n} haplotypes x {l_n} variants (limit {MAX_HAPS} x {MAX_VARIANTS})"
        )));
    }
    if n != pars.n_haps() || l_n != pars.n_variants() {
        return Err(Error::DimensionMismatch(format!(
            "haplotypes are {l_n} x {n}, parameters are for {} x {}",
            pars.n_variants(),
            pars.n_haps()
        )));
    }
    let rho = pars.rho();
    let mu = pars.mu();
    let pi = |j: usize, i: usize| ExtFloat::new(pars.pi().get(j, i));
    let th = |l: usize, j: usize, i: usize| theta(mu.at(l), haps[[l, j]] ^ haps[[l, i]]);

    let mut res = OracleResult {
        n_haps: n,
        n_variants: l_n,
        raw_alpha: vec![ExtFloat::ZERO; l_n * n * n],
        raw_beta: vec![ExtFloat::ZERO; l_n * n * n],
        posteriors: Array3::zeros((l_n, n, n)),
    };

    for i in 0..n {
        for j in 0..n {
            let k = res.idx(0, j, i);
            res.raw_alpha[k] = pi(j, i).scale(th(0, j, i));
        }
        for l in 1..l_n {
            let f = sum((0..n).map(|j| res.raw_alpha(l - 1, j, i)));
            let r = rho[l - 1];
            for j in 0..n {
                let stay = res.raw_alpha(l - 1, j, i).scale(1.0 - r);
                let jump = f.times(pi(j, i)).scale(r);
                let k = res.idx(l, j, i);
                res.raw_alpha[k] = stay.plus(jump).scale(th(l, j, i));
            }
        }

        for j in 0..n {
            let k = res.idx(l_n - 1, j, i);
            res.raw_beta[k] = ExtFloat::ONE;
        }
        for l in (0..l_n.saturating_sub(1)).rev() {
            let g = sum((0..n).map(|j| res.raw_beta(l + 1, j, i).scale(th(l + 1, j, i)).times(pi(j, i))));
            let r = rho[l];
            for j in 0..n {
                let stay = res.raw_beta(l + 1, j, i).scale(th(l + 1, j, i)).scale(1.0 - r);
                let k = res.idx(l, j, i);
                res.raw_beta[k] = stay.plus(g.scale(r));
            }
        }

        for l in 0..l_n {
            let prod: Vec<ExtFloat> = (0..n)
                .map(|j| res.raw_alpha(l, j, i).times(res.raw_beta(l, j, i)))
                .collect();
            let total = sum(prod.iter().copied());
            for j in 0..n {
                res.posteriors[[l, j, i]] = if total.is_zero() {
                    f64::NAN
                } else {
                    prod[j].over(total).to_f64()
                };
            }
        }
    }
    Ok(res)
}

/// Largest elementwise relative error between engine and oracle posteriors
/// at variant `l` over recipients in `from..=to`, skipping the diagonal.
/// `engine[[j, c]]` holds recipient `from + c`.
pub fn max_rel_error(oracle: &OracleResult, engine: ArrayView2<'_, f64>, l: usize, from: usize) -> f64 {
    let mut worst = 0.0f64;
    for (c, col) in engine.columns().into_iter().enumerate() {
        let i = from + c;
        for (j, &e) in col.iter().enumerate() {
            if j == i {
                continue;
            }
            let o = oracle.posteriors[[l, j, i]];
            let err = if o == e {
                0.0
            } else {
                (e - o).abs() / o.abs().max(e.abs())
            };
            worst = worst.max(if err.is_nan() { f64::INFINITY } else { err });
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hap_cache::HaplotypeCache;
    use crate::model_params::{make_parameters, MuSpec, ParameterSpec};
    use ndarray::Array2;
    use proptest::prelude::*;

    #[test]
    fn frexp_ldexp_round_trip() {
        for x in [1.0, 0.75, -3.5, 1e-310, 4.9e-324, 1e300, f64::MAX, f64::MIN_POSITIVE] {
            let (m, e) = frexp(x);
            assert!(m.abs() >= 0.5 && m.abs() < 1.0, "{x}");
            assert_eq!(ldexp(m, e), x);
            assert_eq!(ExtFloat::new(x).to_f64(), x);
        }
        assert_eq!(ExtFloat::ONE.to_f64(), 1.0);
    }

    #[test]
    fn extended_range_survives_underflow() {
        let tiny = ExtFloat::new(1e-300);
        let p = tiny.times(tiny).times(tiny);
        assert_eq!(p.to_f64(), 0.0);
        assert!((p.ln() - 3.0 * (1e-300f64).ln()).abs() < 1e-9);
        let back = p.over(tiny).over(tiny);
        assert!((back.to_f64() - 1e-300).abs() < 1e-312);
    }

    #[test]
    fn compensated_sum_keeps_small_terms() {
        let s = sum([ExtFloat::new(1.0), ExtFloat::new(1e-16), ExtFloat::new(-1.0)]);
        assert_eq!(s.to_f64(), 1e-16);
        assert_eq!(sum(std::iter::empty()).to_f64(), 0.0);
    }

    fn build(haps: &Array2<u8>, rho: Vec<f64>, mu: f64) -> ModelParameters {
        let cache = HaplotypeCache::from_matrix(haps.view()).unwrap();
        let spec = ParameterSpec {
            rho: Some(rho),
            mu: MuSpec::Scalar(mu),
            ..Default::default()
        };
        make_parameters(&cache, spec).unwrap()
    }

    /// Sum over all hidden donor paths, the model's definition.
    fn brute_force(haps: &Array2<u8>, pars: &ModelParameters, i: usize) -> (f64, Vec<Vec<f64>>) {
        let (l_n, n) = haps.dim();
        let donors: Vec<usize> = (0..n).filter(|&j| j != i).collect();
        let mut marg = vec![vec![0.0; n]; l_n];
        let mut total = 0.0;
        let paths = donors.len().pow(l_n as u32);
        for mut code in 0..paths {
            let mut z = Vec::with_capacity(l_n);
            for _ in 0..l_n {
                z.push(donors[code % donors.len()]);
                code /= donors.len();
            }
            let mut w = pars.pi().get(z[0], i) * theta(pars.mu().at(0), haps[[0, z[0]]] ^ haps[[0, i]]);
            for l in 1..l_n {
                let r = pars.rho()[l - 1];
                let stay = if z[l] == z[l - 1] { 1.0 - r } else { 0.0 };
                w *= stay + r * pars.pi().get(z[l], i);
                w *= theta(pars.mu().at(l), haps[[l, z[l]]] ^ haps[[l, i]]);
            }
            total += w;
            for l in 0..l_n {
                marg[l][z[l]] += w;
            }
        }
        for row in &mut marg {
            for v in row.iter_mut() {
                *v /= total;
            }
        }
        (total, marg)
    }

    #[test]
    fn matches_path_enumeration() {
        let haps = Array2::from_shape_vec((4, 4), vec![0, 1, 1, 0, 1, 1, 0, 0, 0, 0, 1, 1, 1, 0, 1, 0]).unwrap();
        let pars = build(&haps, vec![0.1, 0.3, 0.05], 0.05);
        let o = oracle_run(haps.view(), &pars).unwrap();
        for i in 0..4 {
            let (total, marg) = brute_force(&haps, &pars, i);
            assert!((o.likelihood(i).to_f64() - total).abs() <= 1e-14 * total);
            for l in 0..4 {
                for j in 0..4 {
                    assert!((o.posteriors[[l, j, i]] - marg[l][j]).abs() <= 1e-13);
                }
            }
        }
    }

    #[test]
    fn single_variant_posterior_is_theta_times_pi() {
        let haps = Array2::from_shape_vec((1, 3), vec![0, 1, 0]).unwrap();
        let pars = build(&haps, vec![], 0.1);
        let o = oracle_run(haps.view(), &pars).unwrap();
        // recipient 0 matches donor 2 (0.9) and mismatches donor 1 (0.1)
        assert!((o.posteriors[[0, 2, 0]] - 0.9).abs() < 1e-15);
        assert!((o.posteriors[[0, 1, 0]] - 0.1).abs() < 1e-15);
        assert_eq!(o.posteriors[[0, 0, 0]], 0.0);
    }

    #[test]
    fn full_recombination_forgets_the_past() {
        let haps = Array2::from_shape_vec((3, 4), vec![0, 1, 1, 0, 1, 1, 0, 1, 0, 0, 1, 1]).unwrap();
        let pars = build(&haps, vec![1.0, 1.0], 0.2);
        let o = oracle_run(haps.view(), &pars).unwrap();
        for l in 0..3 {
            for i in 0..4 {
                let w: Vec<f64> = (0..4)
                    .map(|j| pars.pi().get(j, i) * theta(0.2, haps[[l, j]] ^ haps[[l, i]]))
                    .collect();
                let s: f64 = w.iter().sum();
                for j in 0..4 {
                    assert!((o.posteriors[[l, j, i]] - w[j] / s).abs() < 1e-15);
                }
            }
        }
    }

    #[test]
    fn size_guard() {
        let haps = Array2::<u8>::zeros((2, 65));
        let cache = HaplotypeCache::from_matrix(haps.view()).unwrap();
        let pars = make_parameters(&cache, ParameterSpec::default()).unwrap();
        assert!(matches!(oracle_run(haps.view(), &pars), Err(Error::TooLarge(_))));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn likelihood_is_invariant_across_variants(
            n in 2usize..7,
            l in 1usize..12,
            bits in proptest::collection::vec(0u8..2, 84),
            mu in 1e-6f64..0.3,
            r in 0.0f64..1.0,
        ) {
            let haps = Array2::from_shape_fn((l, n), |(a, b)| bits[a * 7 + b]);
            let pars = build(&haps, vec![r; l - 1], mu);
            let o = oracle_run(haps.view(), &pars).unwrap();
            for i in 0..n {
                let lik = o.likelihood(i);
                prop_assert!(lik.to_f64() > 0.0);
                for v in 0..l {
                    prop_assert!(lik.rel_diff(o.likelihood_at(v, i)) < 1e-12);
                }
            }
        }
    }
}
