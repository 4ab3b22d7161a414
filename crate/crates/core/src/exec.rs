//! Batch execution with a sequential fallback.
//!
//! Independent solver runs, instance batteries and parameter sweeps are
//! mapped through [`map_batch`]. With the `parallel` feature the map runs on
//! the rayon pool; without it, or with [`Execution::Sequential`], items are
//! processed in order on the calling thread. Output order always matches
//! input order.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Execution {
    Sequential,
    #[default]
    Parallel,
}

impl Execution {
    /// Whether this mode actually runs on more than one thread in this build.
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Execution::Parallel
    }
}

pub fn map_batch<T, R, F>(items: Vec<T>, mode: Execution, f: F) -> Vec<R>
where
    T: Send,
    R: Send,
    F: Fn(T) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if mode == Execution::Parallel {
        return items.into_par_iter().map(f).collect();
    }
    let _ = mode;
    items.into_iter().map(f).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn order_is_preserved_in_both_modes() {
        let items: Vec<u64> = (0..200).collect();
        let seq = map_batch(items.clone(), Execution::Sequential, |x| x * x);
        let par = map_batch(items, Execution::Parallel, |x| x * x);
        assert_eq!(seq, par);
        assert_eq!(seq[13], 169);
    }
}
