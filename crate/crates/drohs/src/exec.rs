// SPDX-License-Identifier: Apache-2.0

//! Worker pool executor. Each iteration's jobs are split into contiguous
//! chunks, one per worker, and joined before returning, so results are
//! always assembled in job order whatever the worker count.

use std::thread;
use std::time::Instant;

use drohs_core::engine::Executor;

#[derive(Debug, Clone, Copy)]
pub struct Threaded {
    pub workers: usize,
    /// Measure per-job wall time. Off by default so traces stay byte-stable.
    pub timing: bool,
}

impl Threaded {
    pub fn new(workers: usize, timing: bool) -> Threaded {
        Threaded { workers: workers.max(1), timing }
    }
}

impl Executor for Threaded {
    fn map<T, F>(&self, n: usize, f: F) -> Vec<(T, Option<f64>)>
    where
        T: Send,
        F: Fn(usize) -> T + Sync,
    {
        let timing = self.timing;
        let job = |j: usize| {
            if timing {
                let t = Instant::now();
                let r = f(j);
                (r, Some(t.elapsed().as_secs_f64() * 1e3))
            } else {
                (f(j), None)
            }
        };
        let w = self.workers.min(n.max(1));
        if w <= 1 {
            return (0..n).map(job).collect();
        }
        let chunk = n.div_ceil(w);
        thread::scope(|s| {
            let handles: Vec<_> = (0..w)
                .map(|t| {
                    let job = &job;
                    s.spawn(move || (t * chunk..((t + 1) * chunk).min(n)).map(job).collect::<Vec<_>>())
                })
                .collect();
            handles.into_iter().flat_map(|h| h.join().expect("worker panicked")).collect()
        })
    }
}
