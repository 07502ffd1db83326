//! Bounded-concurrency job runner for independent training/evaluation runs.
//!
//! The worker count defaults to the machine's available parallelism and can
//! be capped with the `HAMREG_THREADS` environment variable. Results come
//! back in submission order regardless of scheduling, so concurrent runs
//! stay deterministic.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

/// Worker count: `HAMREG_THREADS` if set (minimum 1), else the available
/// parallelism.
pub fn thread_limit() -> usize {
    if let Ok(v) = std::env::var("HAMREG_THREADS") {
        if let Ok(n) = v.parse::<usize>() {
            return n.max(1);
        }
    }
    std::thread::available_parallelism()
        .map(|n| n.get())
        .unwrap_or(1)
}

type Job<'a, T> = Box<dyn FnOnce() -> T + Send + 'a>;

/// Run all jobs with at most `workers` threads; `results[i]` is the output
/// of `jobs[i]`.
pub fn run_all<'a, T: Send + 'a>(jobs: Vec<Job<'a, T>>, workers: usize) -> Vec<T> {
    let n = jobs.len();
    let workers = workers.max(1).min(n.max(1));
    if workers <= 1 {
        return jobs.into_iter().map(|j| j()).collect();
    }
    let queue: Vec<Mutex<Option<Job<'a, T>>>> =
        jobs.into_iter().map(|j| Mutex::new(Some(j))).collect();
    let results: Vec<Mutex<Option<T>>> = (0..n).map(|_| Mutex::new(None)).collect();
    let next = AtomicUsize::new(0);
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= n {
                    break;
                }
                let job = queue[i].lock().unwrap().take().unwrap();
                *results[i].lock().unwrap() = Some(job());
            });
        }
    });
    results
        .into_iter()
        .map(|r| r.into_inner().unwrap().unwrap())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn results_are_in_submission_order() {
        let jobs: Vec<Job<usize>> = (0..17usize)
            .map(|i| Box::new(move || i * i) as Job<usize>)
            .collect();
        let got = run_all(jobs, 4);
        assert_eq!(got, (0..17).map(|i| i * i).collect::<Vec<_>>());
    }

    #[test]
    fn single_worker_works() {
        let jobs: Vec<Job<i32>> = vec![Box::new(|| 1), Box::new(|| 2)];
        assert_eq!(run_all(jobs, 1), vec![1, 2]);
    }
}
