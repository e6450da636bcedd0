//! Execution helpers: data-parallel map with a sequential fallback, and
//! deterministic compensated reduction.
//!
//! - `map_collect` fans a pure function out over a slice. With the
//!   `parallel` feature (default) it uses rayon; without it, a plain loop.
//!   Results are collected in input order either way.
//! - Reductions happen sequentially over the collected vector with
//!   Neumaier compensated summation, so the parallel and sequential builds
//!   produce bit-identical sums regardless of thread scheduling.
//!
//! Both explicit variants stay public (hidden from docs) so the benchmark
//! suite can compare them inside one build.

/// Sequential map, kept for benches and the no-`parallel` build.
#[doc(hidden)]
pub fn map_collect_seq<T: Sync, R: Send>(items: &[T], f: impl Fn(&T) -> R + Sync + Send) -> Vec<R> {
    items.iter().map(f).collect()
}

/// Rayon map; input order is preserved by indexed collection.
#[cfg(feature = "parallel")]
#[doc(hidden)]
pub fn map_collect_par<T: Sync, R: Send>(items: &[T], f: impl Fn(&T) -> R + Sync + Send) -> Vec<R> {
    use rayon::prelude::*;
    items.par_iter().map(f).collect()
}

/// Map a pure function over items, parallel when the feature is enabled.
#[cfg(feature = "parallel")]
pub fn map_collect<T: Sync, R: Send>(items: &[T], f: impl Fn(&T) -> R + Sync + Send) -> Vec<R> {
    map_collect_par(items, f)
}

/// Map a pure function over items, parallel when the feature is enabled.
#[cfg(not(feature = "parallel"))]
pub fn map_collect<T: Sync, R: Send>(items: &[T], f: impl Fn(&T) -> R + Sync + Send) -> Vec<R> {
    map_collect_seq(items, f)
}

/// Neumaier compensated sum; immune to cancellation between large
/// intermediate terms that plain left-to-right addition would lose.
pub fn neumaier_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// Accumulate `src` into `dst` elementwise: `dst[i] += scale * src[i]`.
pub fn axpy(scale: f64, src: &[f64], dst: &mut [f64]) {
    debug_assert_eq!(src.len(), dst.len());
    for (d, s) in dst.iter_mut().zip(src) {
        *d += scale * s;
    }
}

/// L2 norm with compensated accumulation of squares.
pub fn l2_norm(values: &[f64]) -> f64 {
    neumaier_sum(values.iter().map(|v| v * v)).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seq_and_par_agree_bitwise() {
        let items: Vec<f64> = (0..1000).map(|i| (i as f64).sin() * 1e3).collect();
        let f = |x: &f64| x * x + 1.0;
        let a = map_collect_seq(&items, f);
        let b = map_collect(&items, f);
        assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.to_bits(), y.to_bits());
        }
    }

    #[test]
    fn neumaier_recovers_cancelled_small_terms() {
        // 1e16 + 1 - 1e16 loses the 1 in naive order; compensation keeps it.
        let vals = [1e16, 1.0, -1e16];
        assert_eq!(neumaier_sum(vals.iter().copied()), 1.0);
        let naive: f64 = vals.iter().sum();
        assert_eq!(naive, 0.0);
    }

    #[test]
    fn l2_norm_matches_hand_value() {
        // 3-4-5 triangle.
        assert!((l2_norm(&[3.0, 4.0]) - 5.0).abs() < 1e-15);
        assert_eq!(l2_norm(&[]), 0.0);
    }

    #[test]
    fn axpy_accumulates_scaled() {
        let mut dst = vec![1.0, 2.0];
        axpy(0.5, &[4.0, -2.0], &mut dst);
        assert_eq!(dst, vec![3.0, 1.0]);
    }
}
