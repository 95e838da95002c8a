//! Data-parallel map over sample batches.
//!
//! Order of results always matches input order, so reductions downstream
//! are deterministic whether or not work was fanned out.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Map `f` over `items`, in parallel when `parallel` is set and the
/// crate was built with the `parallel` feature.
pub(crate) fn map<T, R, F>(parallel: bool, items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        if parallel {
            return items.par_iter().map(f).collect();
        }
    }
    let _ = parallel;
    items.iter().map(f).collect()
}
