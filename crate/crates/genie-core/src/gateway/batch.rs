//! Bounded-parallelism fan-out with order-preserving collection.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::mpsc;

/// Apply `f` to every request with at most `max_in_flight` invocations
/// running at once. Results come back positionally aligned with the input,
/// whatever order the calls finish in; per-request failures belong in the
/// result type (use `R = Result<..>`), they never abort the batch.
pub fn map_batched<T, R, F>(requests: &[T], max_in_flight: usize, f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync,
{
    let n = requests.len();
    if n == 0 {
        return Vec::new();
    }
    let workers = max_in_flight.max(1).min(n);
    let next = AtomicUsize::new(0);
    let (tx, rx) = mpsc::channel::<(usize, R)>();

    std::thread::scope(|scope| {
        for _ in 0..workers {
            let tx = tx.clone();
            let next = &next;
            let f = &f;
            scope.spawn(move || loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                if i >= n {
                    break;
                }
                let result = f(&requests[i]);
                if tx.send((i, result)).is_err() {
                    break;
                }
            });
        }
        drop(tx);
    });

    let mut slots: Vec<Option<R>> = (0..n).map(|_| None).collect();
    for (i, r) in rx {
        slots[i] = Some(r);
    }
    slots
        .into_iter()
        .map(|s| s.expect("worker produced a result for every index"))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::atomic::{AtomicUsize, Ordering};
    use std::time::Duration;

    #[test]
    fn empty_input_gives_empty_output() {
        let out: Vec<u32> = map_batched(&[] as &[u32], 3, |&x| x);
        assert!(out.is_empty());
    }

    #[test]
    fn results_align_with_input_under_random_latency() {
        let inputs: Vec<usize> = (0..40).collect();
        let out = map_batched(&inputs, 4, |&i| {
            // pseudo-random latency so completion order scrambles
            let jitter = (i * 7919) % 5;
            std::thread::sleep(Duration::from_millis(jitter as u64));
            i * 10
        });
        assert_eq!(out, inputs.iter().map(|i| i * 10).collect::<Vec<_>>());
    }

    #[test]
    fn concurrency_never_exceeds_the_bound() {
        let current = AtomicUsize::new(0);
        let peak = AtomicUsize::new(0);
        let inputs: Vec<usize> = (0..20).collect();
        map_batched(&inputs, 3, |_| {
            let now = current.fetch_add(1, Ordering::SeqCst) + 1;
            peak.fetch_max(now, Ordering::SeqCst);
            std::thread::sleep(Duration::from_millis(2));
            current.fetch_sub(1, Ordering::SeqCst);
        });
        assert!(peak.load(Ordering::SeqCst) <= 3, "peak {}", peak.load(Ordering::SeqCst));
    }

    #[test]
    fn failures_stay_in_their_slot() {
        let inputs: Vec<usize> = (0..10).collect();
        let out: Vec<Result<usize, String>> = map_batched(&inputs, 3, |&i| {
            if i == 5 {
                Err("boom".to_owned())
            } else {
                Ok(i)
            }
        });
        for (i, r) in out.iter().enumerate() {
            if i == 5 {
                assert!(r.is_err());
            } else {
                assert_eq!(r.as_ref().unwrap(), &i);
            }
        }
    }
}
