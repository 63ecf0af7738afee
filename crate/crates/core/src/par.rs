//! Execution policy for the data-parallel loops.
//!
//! With the `parallel` feature disabled, [`Exec::Parallel`] quietly runs
//! sequentially. Results never depend on the policy: parallel loops only
//! produce per-item outputs that are combined in item order afterwards.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Exec {
    Sequential,
    #[default]
    Parallel,
}

impl Exec {
    /// `f(state, i)` for `i in 0..n`, in order. `init` creates per-worker
    /// scratch state.
    pub fn map_init<S, T, I, F>(self, n: usize, init: I, f: F) -> Vec<T>
    where
        T: Send,
        I: Fn() -> S + Sync + Send,
        F: Fn(&mut S, usize) -> T + Sync + Send,
    {
        match self {
            #[cfg(feature = "parallel")]
            Exec::Parallel => {
                use rayon::prelude::*;
                (0..n).into_par_iter().map_init(init, f).collect()
            }
            _ => {
                let mut state = init();
                (0..n).map(|i| f(&mut state, i)).collect()
            }
        }
    }

    pub fn map<T, F>(self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        self.map_init(n, || (), |_, i| f(i))
    }
}

/// Configures the global worker pool size. Has no effect without the
/// `parallel` feature or once the pool has started.
pub fn set_threads(n: usize) {
    #[cfg(feature = "parallel")]
    {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    #[cfg(not(feature = "parallel"))]
    let _ = n;
}
