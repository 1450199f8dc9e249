use fedleak_core::fedsim::ClientExecutor;

/// Runs client tasks on up to `jobs` scoped threads. Results come back in
/// task-index order, so the outcome never depends on `jobs`.
#[derive(Debug, Clone, Copy)]
pub struct Threaded {
    jobs: usize,
}

impl Threaded {
    pub fn new(jobs: usize) -> Self {
        Threaded { jobs: jobs.max(1) }
    }
}

impl ClientExecutor for Threaded {
    fn execute<T: Send, F: Fn(usize) -> T + Sync>(&self, n: usize, task: F) -> Vec<T> {
        let workers = self.jobs.min(n);
        if workers <= 1 {
            return (0..n).map(task).collect();
        }
        let task = &task;
        let mut slots: Vec<Option<T>> = std::thread::scope(|s| {
            let handles: Vec<_> = (0..workers)
                .map(|w| s.spawn(move || (w..n).step_by(workers).map(|i| (i, task(i))).collect::<Vec<_>>()))
                .collect();
            let mut slots: Vec<Option<T>> = (0..n).map(|_| None).collect();
            for h in handles {
                for (i, t) in h.join().expect("client task panicked") {
                    slots[i] = Some(t);
                }
            }
            slots
        });
        slots
            .iter_mut()
            .map(|s| s.take().expect("every index is assigned"))
            .collect()
    }
}
