use std::time::Instant;

use mmfed_core::federation::{ClientRunner, ClientState, Clock};
use rayon::prelude::*;

use crate::error::{Error, Result};

/// Trains clients on a dedicated rayon pool. Output order follows client
/// order regardless of scheduling.
pub struct Parallel {
    pool: rayon::ThreadPool,
}

impl Parallel {
    /// `workers == 0` uses one thread per core.
    pub fn new(workers: usize) -> Result<Self> {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .map_err(|e| Error::Config(format!("worker pool: {e}")))?;
        Ok(Self { pool })
    }

    pub fn workers(&self) -> usize {
        self.pool.current_num_threads()
    }
}

impl ClientRunner for Parallel {
    fn map<T, F>(&self, clients: &mut [ClientState], f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(&mut ClientState) -> T + Sync + Send,
    {
        self.pool.install(|| clients.par_iter_mut().map(f).collect())
    }
}

/// Milliseconds elapsed since construction.
pub struct WallClock(Instant);

impl WallClock {
    pub fn start() -> Self {
        WallClock(Instant::now())
    }
}

impl Clock for WallClock {
    fn now_ms(&self) -> f64 {
        self.0.elapsed().as_secs_f64() * 1e3
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn keeps_client_order() {
        let runner = Parallel::new(4).unwrap();
        let mut clients: Vec<ClientState> = (0..50).map(|i| ClientState::new(i, Vec::new())).collect();
        let ids = runner.map(&mut clients, |c| {
            std::thread::sleep(std::time::Duration::from_micros(((50 - c.id) * 20) as u64));
            c.id
        });
        assert_eq!(ids, (0..50).collect::<Vec<_>>());
    }
}
