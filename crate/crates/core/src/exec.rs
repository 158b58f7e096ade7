//! Order-preserving map over independent jobs.

/// Applies `f` to every item and returns results in input order. With the
/// `parallel` feature and `workers != 1` the items are spread over a thread
/// pool of `workers` threads (`0` picks the number of cores).
pub fn par_map<T, R, F>(items: &[T], workers: usize, f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if workers != 1 && items.len() > 1 {
        use rayon::prelude::*;
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .expect("thread pool");
        return pool.install(|| items.par_iter().map(&f).collect());
    }
    let _ = workers;
    items.iter().map(f).collect()
}

/// Whether [`par_map`] can run jobs concurrently in this build.
pub const PARALLEL: bool = cfg!(feature = "parallel");
