//! Index-ordered data parallelism over independent work items.
//!
//! With the `parallel` feature the work is spread over rayon's pool; without
//! it every mode runs on the calling thread. Results always come back in
//! index order, so callers that reduce them sequentially get bit-identical
//! answers whatever the thread count.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Exec {
    Sequential,
    #[default]
    Parallel,
}

impl Exec {
    /// `jobs == Some(1)` means sequential; anything else is parallel.
    pub fn from_jobs(jobs: Option<usize>) -> Self {
        match jobs {
            Some(1) => Exec::Sequential,
            _ => Exec::Parallel,
        }
    }

    pub fn map<T, F>(self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        match self {
            Exec::Sequential => (0..n).map(f).collect(),
            #[cfg(feature = "parallel")]
            Exec::Parallel => (0..n).into_par_iter().map(f).collect(),
            #[cfg(not(feature = "parallel"))]
            Exec::Parallel => (0..n).map(f).collect(),
        }
    }
}

/// Runs `f` on a pool of `jobs` threads (or the global pool when `None`).
/// `Some(1)` still installs a one-thread pool, so nested [`Exec::Parallel`]
/// work runs on a single thread too.
pub fn with_jobs<R, F>(jobs: Option<usize>, f: F) -> R
where
    R: Send,
    F: FnOnce() -> R + Send,
{
    #[cfg(feature = "parallel")]
    if let Some(n) = jobs.filter(|&n| n >= 1) {
        if let Ok(pool) = rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            return pool.install(f);
        }
    }
    #[cfg(not(feature = "parallel"))]
    let _ = jobs;
    f()
}

pub fn parallel_enabled() -> bool {
    cfg!(feature = "parallel")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn both_modes_agree_in_order() {
        let f = |i: usize| (i as f64).sqrt().sin();
        let a = Exec::Sequential.map(1000, f);
        let b = Exec::Parallel.map(1000, f);
        assert_eq!(a, b);
        let c = with_jobs(Some(3), || Exec::Parallel.map(1000, f));
        assert_eq!(a, c);
        assert_eq!(a, with_jobs(Some(1), || Exec::Parallel.map(1000, f)));
    }

    #[cfg(feature = "parallel")]
    #[test]
    fn pool_size_is_honored() {
        assert_eq!(with_jobs(Some(1), rayon::current_num_threads), 1);
        assert_eq!(with_jobs(Some(3), rayon::current_num_threads), 3);
    }

    #[test]
    fn jobs_mapping() {
        assert_eq!(Exec::from_jobs(Some(1)), Exec::Sequential);
        assert_eq!(Exec::from_jobs(Some(4)), Exec::Parallel);
        assert_eq!(Exec::from_jobs(None), Exec::Parallel);
    }
}
