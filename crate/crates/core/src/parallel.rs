//! Path-level parallelism.
//!
//! Every ensemble loop goes through [`Execution::map_paths`], which returns
//! per-path results in path order. Reductions then run sequentially over that
//! vector, so results do not depend on the worker count. Without the
//! `parallel` feature every mode runs on the calling thread.

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Execution {
    Sequential,
    /// Rayon worker pool; `threads: None` uses the global pool.
    #[default]
    Parallel,
    ParallelWith {
        threads: usize,
    },
}

impl Execution {
    pub fn with_threads(threads: Option<usize>) -> Self {
        match threads {
            Some(1) => Execution::Sequential,
            Some(n) => Execution::ParallelWith { threads: n },
            None => Execution::Parallel,
        }
    }

    /// Evaluates `f(i)` for `i in 0..n` and returns the results in index order.
    pub fn map_paths<T, F>(self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(u64) -> T + Sync + Send,
    {
        match self {
            Execution::Sequential => (0..n as u64).map(f).collect(),
            #[cfg(feature = "parallel")]
            Execution::Parallel => par_map(n, &f),
            #[cfg(feature = "parallel")]
            Execution::ParallelWith { threads } => {
                match rayon::ThreadPoolBuilder::new().num_threads(threads).build() {
                    Ok(pool) => pool.install(|| par_map(n, &f)),
                    Err(_) => par_map(n, &f),
                }
            }
            #[cfg(not(feature = "parallel"))]
            _ => (0..n as u64).map(f).collect(),
        }
    }
}

#[cfg(feature = "parallel")]
fn par_map<T, F>(n: usize, f: &F) -> Vec<T>
where
    T: Send,
    F: Fn(u64) -> T + Sync + Send,
{
    use rayon::prelude::*;
    (0..n as u64).into_par_iter().map(f).collect()
}

/// Sum in a fixed pairwise order.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    match values.len() {
        0 => 0.0,
        1 => values[0],
        n if n <= 8 => values.iter().sum(),
        n => {
            let (a, b) = values.split_at(n / 2);
            pairwise_sum(a) + pairwise_sum(b)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn map_preserves_order_across_modes() {
        let f = |i: u64| (i * i) as f64 + 0.5;
        let seq = Execution::Sequential.map_paths(1000, f);
        let par = Execution::Parallel.map_paths(1000, f);
        let four = Execution::ParallelWith { threads: 4 }.map_paths(1000, f);
        assert_eq!(seq, par);
        assert_eq!(seq, four);
    }

    #[test]
    fn pairwise_sum_matches_naive_on_integers() {
        let v: Vec<f64> = (0..1001).map(|i| i as f64).collect();
        assert_eq!(pairwise_sum(&v), 500500.0);
        assert_eq!(pairwise_sum(&[]), 0.0);
    }
}
