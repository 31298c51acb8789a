use rayon::prelude::*;
use ss2s_core::training::BatchRunner;

/// Spreads batch items over the current rayon pool. Results keep index
/// order, so reductions match [`Sequential`](ss2s_core::training::Sequential)
/// bit for bit.
#[derive(Clone, Copy, Debug, Default)]
pub struct Rayon;

impl BatchRunner for Rayon {
    fn map<T, F>(&self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        (0..n).into_par_iter().map(f).collect()
    }
}
