//! Worker scheduling for the data-parallel loops.
//!
//! Every parallel loop in this crate splits its work at boundaries that do not
//! depend on the worker count, and each piece is computed by the same
//! sequential kernel. Output is therefore bitwise identical whether it runs on
//! one thread or many. Without the `parallel` feature all loops run inline.

use std::cell::Cell;

/// How many workers a computation may use.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Parallelism {
    /// Run everything on the calling thread.
    Sequential,
    /// Run on a pool of the given size; `Threads(0)` uses one worker per core.
    Threads(usize),
    /// Use the ambient rayon pool.
    #[default]
    Ambient,
}

thread_local! {
    static SEQUENTIAL: Cell<bool> = const { Cell::new(false) };
}

struct SequentialGuard(bool);

impl SequentialGuard {
    fn enter() -> Self {
        SequentialGuard(SEQUENTIAL.with(|s| s.replace(true)))
    }
}

impl Drop for SequentialGuard {
    fn drop(&mut self) {
        SEQUENTIAL.with(|s| s.set(self.0));
    }
}

impl Parallelism {
    /// Builds from a user-facing worker count, where 1 means sequential and 0
    /// means one worker per core.
    pub fn from_jobs(jobs: usize) -> Self {
        match jobs {
            1 => Parallelism::Sequential,
            n => Parallelism::Threads(n),
        }
    }

    /// Runs `f` under this setting. Parallel loops reached from `f` obey it.
    pub fn install<R: Send>(self, f: impl FnOnce() -> R + Send) -> R {
        match self {
            Parallelism::Sequential => {
                let _guard = SequentialGuard::enter();
                f()
            }
            Parallelism::Ambient => f(),
            Parallelism::Threads(n) => {
                #[cfg(feature = "parallel")]
                {
                    match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
                        Ok(pool) => pool.install(f),
                        Err(err) => {
                            log::warn!("could not build a {n}-thread pool ({err}); running inline");
                            f()
                        }
                    }
                }
                #[cfg(not(feature = "parallel"))]
                {
                    let _ = n;
                    f()
                }
            }
        }
    }
}

#[cfg(feature = "parallel")]
fn is_sequential() -> bool {
    SEQUENTIAL.with(|s| s.get())
}

/// Evaluates `f(0..n)` and returns the results in index order.
pub(crate) fn map_range<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if !is_sequential() && n > 1 {
        use rayon::prelude::*;
        return (0..n).into_par_iter().map(f).collect();
    }
    (0..n).map(f).collect()
}
