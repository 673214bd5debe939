//! Data-parallel map over replicate indices, with a serial fallback.
//!
//! Because every replicate draws from its own counter-based stream, the
//! parallel and serial paths produce bitwise-identical output vectors.

/// Map `f` over `0..n`, in parallel when the `parallel` feature is enabled.
#[cfg(feature = "parallel")]
pub fn map_indexed<T: Send>(n: usize, f: impl Fn(usize) -> T + Sync + Send) -> Vec<T> {
    use rayon::prelude::*;
    (0..n).into_par_iter().map(f).collect()
}

/// Map `f` over `0..n` (serial build).
#[cfg(not(feature = "parallel"))]
pub fn map_indexed<T: Send>(n: usize, f: impl Fn(usize) -> T + Sync + Send) -> Vec<T> {
    map_indexed_serial(n, f)
}

/// Always-serial variant, kept available for determinism checks and benches.
pub fn map_indexed_serial<T: Send>(n: usize, f: impl Fn(usize) -> T + Sync) -> Vec<T> {
    (0..n).map(f).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parallel_equals_serial() {
        let f = |i: usize| {
            let mut rng = crate::rng::CounterRng::new(9, i as u64);
            (0..100).map(|_| rng.standard_normal()).sum::<f64>()
        };
        let a = map_indexed(64, f);
        let b = map_indexed_serial(64, f);
        assert_eq!(a, b);
    }
}
