//! Data-parallel map with a sequential fallback.
//!
//! Results are always collected in input order, so reductions performed by
//! callers are identical whatever the worker count. Without the `parallel`
//! feature every mode runs on the calling thread.

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Parallelism {
    Sequential,
    /// Rayon's global pool.
    #[default]
    Auto,
    /// A dedicated pool with exactly this many workers.
    Threads(usize),
}

impl Parallelism {
    pub fn from_workers(workers: usize) -> Self {
        match workers {
            0 => Parallelism::Auto,
            1 => Parallelism::Sequential,
            n => Parallelism::Threads(n),
        }
    }
}

/// Maps `f` over `items`, returning outputs in the same order as the input.
pub fn map<T, U, F>(mode: Parallelism, items: &[T], f: F) -> Vec<U>
where
    T: Sync,
    U: Send,
    F: Fn(&T) -> U + Sync + Send,
{
    match mode {
        Parallelism::Sequential => items.iter().map(f).collect(),
        #[cfg(feature = "parallel")]
        Parallelism::Auto => {
            use rayon::prelude::*;
            items.par_iter().map(f).collect()
        }
        #[cfg(feature = "parallel")]
        Parallelism::Threads(n) => {
            use rayon::prelude::*;
            match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
                Ok(pool) => pool.install(|| items.par_iter().map(&f).collect()),
                Err(_) => items.iter().map(f).collect(),
            }
        }
        #[cfg(not(feature = "parallel"))]
        _ => items.iter().map(f).collect(),
    }
}

/// [`map`] over `0..n`.
pub fn map_range<U, F>(mode: Parallelism, n: usize, f: F) -> Vec<U>
where
    U: Send,
    F: Fn(usize) -> U + Sync + Send,
{
    let idx: Vec<usize> = (0..n).collect();
    map(mode, &idx, |&i| f(i))
}

/// Runs `f` with a mode suited to repeated [`map`] calls: a dedicated pool is
/// built once for `Threads(n)` and `f` sees `Auto` inside it.
pub fn install<R, F>(mode: Parallelism, f: F) -> R
where
    R: Send,
    F: FnOnce(Parallelism) -> R + Send,
{
    match mode {
        #[cfg(feature = "parallel")]
        Parallelism::Threads(n) => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => pool.install(|| f(Parallelism::Auto)),
            Err(_) => f(Parallelism::Sequential),
        },
        _ => f(mode),
    }
}

/// Runs two closures, concurrently when the parallel backend is available.
pub fn join<A, B, RA, RB>(mode: Parallelism, a: A, b: B) -> (RA, RB)
where
    A: FnOnce() -> RA + Send,
    B: FnOnce() -> RB + Send,
    RA: Send,
    RB: Send,
{
    match mode {
        Parallelism::Sequential => (a(), b()),
        #[cfg(feature = "parallel")]
        _ => rayon::join(a, b),
        #[cfg(not(feature = "parallel"))]
        _ => (a(), b()),
    }
}
