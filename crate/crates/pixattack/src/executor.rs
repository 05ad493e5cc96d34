use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::Mutex;

use pixattack_core::{Concurrency, Image, Oracle, OracleError, OracleResponse, QueryExecutor, SerialExecutor};

/// Sends a batch over up to `threads` workers, further limited by what the
/// oracle declares it can take. Results come back in input order; once a
/// query fails no new ones are started and the batch is cut after the
/// first failure.
#[derive(Debug, Clone, Copy)]
pub struct ThreadedExecutor {
    threads: usize,
}

impl ThreadedExecutor {
    pub fn new(threads: usize) -> Self {
        ThreadedExecutor { threads: threads.max(1) }
    }

    pub fn threads(&self) -> usize {
        self.threads
    }

    fn workers_for(&self, oracle: &dyn Oracle, batch: usize) -> usize {
        let cap = match oracle.concurrency() {
            Concurrency::Serial => 1,
            Concurrency::Parallel { max_in_flight } => max_in_flight.max(1),
        };
        self.threads.min(cap).min(batch)
    }
}

impl QueryExecutor for ThreadedExecutor {
    fn classify_all(&self, oracle: &dyn Oracle, images: &[Image]) -> Vec<Result<OracleResponse, OracleError>> {
        let workers = self.workers_for(oracle, images.len());
        if workers <= 1 {
            return SerialExecutor.classify_all(oracle, images);
        }
        let next = AtomicUsize::new(0);
        let failed = AtomicBool::new(false);
        let slots: Mutex<Vec<Option<Result<OracleResponse, OracleError>>>> = Mutex::new(vec![None; images.len()]);
        std::thread::scope(|s| {
            for _ in 0..workers {
                s.spawn(|| loop {
                    if failed.load(Ordering::SeqCst) {
                        break;
                    }
                    let i = next.fetch_add(1, Ordering::SeqCst);
                    let Some(image) = images.get(i) else { break };
                    let r = oracle.classify(image);
                    if r.is_err() {
                        failed.store(true, Ordering::SeqCst);
                    }
                    slots.lock().expect("no worker panics while holding the lock")[i] = Some(r);
                });
            }
        });
        let mut out = Vec::with_capacity(images.len());
        for slot in slots.into_inner().expect("workers joined") {
            let Some(r) = slot else { break };
            let stop = r.is_err();
            out.push(r);
            if stop {
                break;
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use pixattack_core::{LinearSoftmax, Shape};

    #[test]
    fn preserves_order() {
        let model = LinearSoftmax::seeded(Shape::new(2, 2, 1), 5, 3.0, 1).unwrap();
        let images: Vec<Image> = (0..64).map(|v| Image::filled(2, 2, 1, v * 4).unwrap()).collect();
        let serial = SerialExecutor.classify_all(&model, &images);
        let threaded = ThreadedExecutor::new(6).classify_all(&model, &images);
        assert_eq!(serial, threaded);
    }

    struct FailsOn(u8);

    impl Oracle for FailsOn {
        fn classify(&self, image: &Image) -> Result<OracleResponse, OracleError> {
            if image.data()[0] == self.0 {
                return Err(OracleError::Transport("boom".into()));
            }
            OracleResponse::new(vec![1.0])
        }

        fn concurrency(&self) -> Concurrency {
            Concurrency::Parallel { max_in_flight: 4 }
        }
    }

    #[test]
    fn cuts_after_first_failure() {
        let images: Vec<Image> = (0..40).map(|v| Image::filled(1, 1, 1, v).unwrap()).collect();
        let out = ThreadedExecutor::new(4).classify_all(&FailsOn(10), &images);
        // every index below the failing one was claimed earlier and completes
        assert_eq!(out.len(), 11);
        assert!(out[10].is_err());
        assert!(out[..out.len() - 1].iter().all(|r| r.is_ok()));
    }

    #[test]
    fn serial_oracles_stay_serial() {
        struct Serial;
        impl Oracle for Serial {
            fn classify(&self, _: &Image) -> Result<OracleResponse, OracleError> {
                OracleResponse::new(vec![1.0])
            }
        }
        assert_eq!(ThreadedExecutor::new(8).workers_for(&Serial, 100), 1);
    }
}
