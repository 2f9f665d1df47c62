//! Replica fan-out.
//!
//! Each replica draws from its own labelled stream, so results are
//! independent of scheduling; collection preserves replica order.

use rayon::prelude::*;

/// Environment variable that caps the worker count.
pub const THREADS_ENV: &str = "COALFLOW_THREADS";

/// Worker count from `COALFLOW_THREADS`, if set to a positive integer.
pub fn configured_threads() -> Option<usize> {
    std::env::var(THREADS_ENV).ok()?.trim().parse().ok().filter(|&n: &usize| n > 0)
}

fn pool() -> &'static rayon::ThreadPool {
    static POOL: std::sync::OnceLock<rayon::ThreadPool> = std::sync::OnceLock::new();
    POOL.get_or_init(|| {
        let mut b = rayon::ThreadPoolBuilder::new();
        if let Some(n) = configured_threads() {
            b = b.num_threads(n);
        }
        b.build().expect("failed to build worker pool")
    })
}

/// Evaluates `f(0..reps)` in parallel and returns results in index order.
pub fn map_replicas<T, F>(reps: u64, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(u64) -> T + Sync + Send,
{
    pool().install(|| (0..reps).into_par_iter().map(&f).collect())
}

/// Fallible variant of [`map_replicas`]; returns the first error by index.
pub fn try_map_replicas<T, E, F>(reps: u64, f: F) -> Result<Vec<T>, E>
where
    T: Send,
    E: Send,
    F: Fn(u64) -> Result<T, E> + Sync + Send,
{
    map_replicas(reps, f).into_iter().collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn order_is_preserved() {
        let v = map_replicas(1000, |i| i * i);
        assert!(v.iter().enumerate().all(|(i, &x)| x == (i * i) as u64));
    }

    #[test]
    fn first_error_wins() {
        let r: Result<Vec<u64>, u64> = try_map_replicas(100, |i| if i % 30 == 29 { Err(i) } else { Ok(i) });
        assert_eq!(r, Err(29));
    }
}
