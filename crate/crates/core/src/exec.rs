//! Node-parallel evaluation with a sequential fallback.
//!
//! Every per-node computation in the crate is a pure function of its index,
//! so the parallel and sequential paths produce bitwise identical vectors.
//! Reductions are always done afterwards, in node order, on the collected
//! output.

/// Below this many items a parallel map runs as one task.
#[cfg(feature = "parallel")]
const MIN_CHUNK: usize = 256;

/// Execution strategy for data-parallel loops.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Exec {
    /// Rayon work stealing when the `parallel` feature is on; sequential otherwise.
    #[default]
    Parallel,
    Sequential,
}

impl Exec {
    /// True when this strategy actually dispatches to the thread pool.
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Exec::Parallel
    }

    /// Maps `f` over `0..len`, preserving index order in the output.
    pub fn map<T, F>(self, len: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        if self == Exec::Parallel {
            use rayon::prelude::*;
            return (0..len)
                .into_par_iter()
                .with_min_len(MIN_CHUNK)
                .map(f)
                .collect();
        }
        (0..len).map(f).collect()
    }

    /// Like [`Exec::map`] for fallible work; the error reported is the one at
    /// the lowest index, independent of scheduling.
    pub fn try_map<T, E, F>(self, len: usize, f: F) -> Result<Vec<T>, E>
    where
        T: Send,
        E: Send,
        F: Fn(usize) -> Result<T, E> + Sync + Send,
    {
        self.map(len, f).into_iter().collect()
    }

    /// Maps over a slice of inputs; used for sweeps over independent runs.
    pub fn map_items<I, T, F>(self, items: &[I], f: F) -> Vec<T>
    where
        I: Sync,
        T: Send,
        F: Fn(&I) -> T + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        if self == Exec::Parallel {
            use rayon::prelude::*;
            return items.par_iter().map(f).collect();
        }
        items.iter().map(f).collect()
    }
}
