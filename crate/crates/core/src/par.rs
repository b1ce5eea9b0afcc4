//! Execution policy for the data-parallel kernels.
//!
//! With the `parallel` feature the kernels fan out over rayon's global pool;
//! without it every policy runs sequentially. Results are bit-identical
//! either way because each output element is computed independently.

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Execution {
    Sequential,
    #[default]
    Parallel,
}

impl Execution {
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Execution::Parallel
    }
}

/// Collects `f(0..n)` into a vector.
pub(crate) fn map_range<T, F>(n: usize, exec: Execution, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if exec.is_parallel() {
        use rayon::prelude::*;
        return (0..n).into_par_iter().map(f).collect();
    }
    let _ = exec;
    (0..n).map(f).collect()
}

/// Applies `f(index, chunk)` to consecutive `chunk`-sized pieces of `data`.
pub(crate) fn for_each_chunk_mut<F>(data: &mut [f64], chunk: usize, exec: Execution, f: F)
where
    F: Fn(usize, &mut [f64]) + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if exec.is_parallel() {
        use rayon::prelude::*;
        data.par_chunks_mut(chunk)
            .enumerate()
            .for_each(|(i, c)| f(i, c));
        return;
    }
    let _ = exec;
    data.chunks_mut(chunk).enumerate().for_each(|(i, c)| f(i, c));
}

/// Applies `f(index, item)` to every element of `items`.
pub(crate) fn for_each_mut<T, F>(items: &mut [T], exec: Execution, f: F)
where
    T: Send,
    F: Fn(usize, &mut T) + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if exec.is_parallel() {
        use rayon::prelude::*;
        items.par_iter_mut().enumerate().for_each(|(i, c)| f(i, c));
        return;
    }
    let _ = exec;
    items.iter_mut().enumerate().for_each(|(i, c)| f(i, c));
}
