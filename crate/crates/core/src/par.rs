//! Data-parallel helpers. With the `parallel` feature these dispatch to rayon,
//! otherwise they run sequentially. Both paths return identical results: maps
//! preserve order and argmax breaks ties toward the lowest index.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

pub(crate) fn map_range<R, F>(n: usize, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(usize) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        (0..n).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..n).map(f).collect()
    }
}

pub(crate) fn map_slice<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        items.par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        items.iter().map(f).collect()
    }
}

fn better(a: (usize, f64), b: (usize, f64)) -> (usize, f64) {
    // NaN never wins.
    if b.1 > a.1 || (b.1 == a.1 && b.0 < a.0) || a.1.is_nan() {
        b
    } else {
        a
    }
}

/// Index and value of the maximum of `f` over `0..n`; `(0, -inf)` when `n == 0`.
pub(crate) fn argmax_range<F>(n: usize, f: F) -> (usize, f64)
where
    F: Fn(usize) -> f64 + Sync + Send,
{
    let init = (0usize, f64::NEG_INFINITY);
    #[cfg(feature = "parallel")]
    {
        (0..n)
            .into_par_iter()
            .map(|i| (i, f(i)))
            .reduce(|| init, better)
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..n).map(|i| (i, f(i))).fold(init, better)
    }
}

/// Like [`argmax_range`] but always sequential; used inside already-parallel
/// outer loops where nested task splitting costs more than it gains.
pub(crate) fn argmax_range_seq<F>(n: usize, f: F) -> (usize, f64)
where
    F: Fn(usize) -> f64,
{
    (0..n)
        .map(|i| (i, f(i)))
        .fold((0usize, f64::NEG_INFINITY), better)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn argmax_ties_pick_lowest_index() {
        let (i, v) = argmax_range(100, |i| if i % 10 == 3 { 5.0 } else { 1.0 });
        assert_eq!((i, v), (3, 5.0));
        assert_eq!(argmax_range_seq(100, |i| (i % 7) as f64), (6, 6.0));
    }

    #[test]
    fn map_preserves_order() {
        let v = map_range(1000, |i| i * 2);
        assert!(v.iter().enumerate().all(|(i, &x)| x == 2 * i));
    }
}
