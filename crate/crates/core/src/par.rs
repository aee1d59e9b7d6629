// Licensed under the Apache License, Version 2.0 (the "License"); you may
// not use this file except in compliance with the License. You may obtain
// a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS, WITHOUT
// WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied. See the
// License for the specific language governing permissions and limitations
// under the License.

//! Data-parallel helpers over independent work items (graphs, folds).
//!
//! With the `parallel` feature (default) [`Schedule::Parallel`] fans out on
//! the rayon pool. Without it every schedule runs sequentially. Results are
//! always returned in input order, so output never depends on the schedule.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

use crate::error::Result;

/// Environment variable that overrides any requested worker count.
pub const THREADS_ENV: &str = "NCT_EFA_THREADS";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Schedule {
    Sequential,
    Parallel,
}

impl Default for Schedule {
    fn default() -> Self {
        if parallel_enabled() {
            Schedule::Parallel
        } else {
            Schedule::Sequential
        }
    }
}

pub const fn parallel_enabled() -> bool {
    cfg!(feature = "parallel")
}

/// Maps `f` over `items`, preserving order.
pub fn map_collect<T, R, F>(items: &[T], schedule: Schedule, f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    match schedule {
        #[cfg(feature = "parallel")]
        Schedule::Parallel => items.par_iter().map(f).collect(),
        _ => items.iter().map(f).collect(),
    }
}

/// Like [`map_collect`] but stops at an error. When several items fail the
/// error reported is the one with the lowest index.
pub fn try_map_collect<T, R, F>(items: &[T], schedule: Schedule, f: F) -> Result<Vec<R>>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> Result<R> + Sync + Send,
{
    map_collect(items, schedule, f).into_iter().collect()
}

/// Worker count after applying the environment override.
pub fn resolve_threads(requested: Option<usize>) -> Option<usize> {
    std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&t| t > 0)
        .or(requested.filter(|&t| t > 0))
}

/// Runs `f` with at most `threads` workers (`None` keeps the global pool).
pub fn with_threads<R, F>(threads: Option<usize>, f: F) -> R
where
    R: Send,
    F: FnOnce() -> R + Send,
{
    #[cfg(feature = "parallel")]
    if let Some(threads) = threads {
        if let Ok(pool) = rayon::ThreadPoolBuilder::new().num_threads(threads).build() {
            return pool.install(f);
        }
    }
    let _ = threads;
    f()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Error;

    #[test]
    fn order_is_preserved() {
        let items: Vec<u64> = (0..1000).collect();
        let seq = map_collect(&items, Schedule::Sequential, |x| x * x);
        let par = map_collect(&items, Schedule::Parallel, |x| x * x);
        assert_eq!(seq, par);
        assert_eq!(with_threads(Some(2), || map_collect(&items, Schedule::Parallel, |x| x + 1))[999], 1000);
    }

    #[test]
    fn first_error_wins() {
        let items: Vec<usize> = (0..100).collect();
        let err = try_map_collect(&items, Schedule::Parallel, |&x| {
            if x % 7 == 3 {
                Err(Error::DuplicateId(x.to_string()))
            } else {
                Ok(x)
            }
        })
        .unwrap_err();
        assert!(matches!(err, Error::DuplicateId(id) if id == "3"));
    }
}
