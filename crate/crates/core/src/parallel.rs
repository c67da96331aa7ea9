use std::sync::atomic::{AtomicUsize, Ordering};

static MAX_THREADS: AtomicUsize = AtomicUsize::new(0);

/// Caps the fan-out of per-subgraph work. `0` means no cap; `1` runs inline.
pub fn set_max_threads(n: usize) {
    MAX_THREADS.store(n, Ordering::Relaxed);
}

/// `(0..n).map(f)` with results in index order, possibly across threads.
pub(crate) fn map_indexed<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        let cap = MAX_THREADS.load(Ordering::Relaxed);
        if cap == 0 && rayon::current_num_threads() > 1 && n > 1 {
            return (0..n).into_par_iter().map(&f).collect();
        }
        if cap > 1 && n > 1 {
            let threads = cap;
            let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build();
            if let Ok(pool) = pool {
                return pool.install(|| (0..n).into_par_iter().map(&f).collect());
            }
        }
    }
    (0..n).map(f).collect()
}
