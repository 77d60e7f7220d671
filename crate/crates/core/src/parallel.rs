//! Data-parallel helpers. With the `parallel` feature the work is spread over
//! the rayon pool; without it, or when the caller asks for sequential
//! execution, everything runs on the calling thread. Results always come
//! back in index order so reductions over them are deterministic.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Whether this build can run work in parallel at all.
pub const fn available() -> bool {
    cfg!(feature = "parallel")
}

/// Evaluates `f(0..len)` and returns the results in index order.
pub fn map_indexed<T, F>(len: usize, parallel: bool, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        if parallel && len > 1 {
            return (0..len).into_par_iter().map(f).collect();
        }
    }
    let _ = parallel;
    (0..len).map(f).collect()
}

/// Fallible variant of [`map_indexed`]; the first error in index order wins.
pub fn try_map_indexed<T, E, F>(len: usize, parallel: bool, f: F) -> Result<Vec<T>, E>
where
    T: Send,
    E: Send,
    F: Fn(usize) -> Result<T, E> + Sync + Send,
{
    map_indexed(len, parallel, f).into_iter().collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn order_is_preserved_either_way() {
        let seq = map_indexed(100, false, |i| i * i);
        let par = map_indexed(100, true, |i| i * i);
        assert_eq!(seq, par);
        assert_eq!(seq[7], 49);
    }

    #[test]
    fn first_error_wins() {
        let r: Result<Vec<usize>, usize> =
            try_map_indexed(10, true, |i| if i % 3 == 2 { Err(i) } else { Ok(i) });
        assert_eq!(r, Err(2));
    }
}
