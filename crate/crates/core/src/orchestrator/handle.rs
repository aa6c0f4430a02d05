use std::sync::mpsc::{self, Sender};
use std::thread::{self, JoinHandle};

use super::Orchestrator;

type Job = Box<dyn FnOnce(&mut Orchestrator) + Send>;

/// Runs an [`Orchestrator`] on its own thread. Calls are processed one at a
/// time, in arrival order, so every request sees a consistent state.
#[derive(Clone)]
pub struct CoreHandle {
    jobs: Sender<Job>,
}

pub struct CoreThread {
    handle: Option<JoinHandle<()>>,
}

impl CoreHandle {
    pub fn spawn(mut orchestrator: Orchestrator) -> (CoreHandle, CoreThread) {
        let (tx, rx) = mpsc::channel::<Job>();
        let handle = thread::Builder::new()
            .name("orchestrator".into())
            .spawn(move || {
                for job in rx {
                    job(&mut orchestrator);
                }
            })
            .expect("spawn orchestrator thread");
        (CoreHandle { jobs: tx }, CoreThread { handle: Some(handle) })
    }

    /// Runs `f` on the orchestrator thread and waits for its result. Panics
    /// if the orchestrator thread has died.
    pub fn call<R, F>(&self, f: F) -> R
    where
        F: FnOnce(&mut Orchestrator) -> R + Send + 'static,
        R: Send + 'static,
    {
        let (tx, rx) = mpsc::channel();
        self.jobs
            .send(Box::new(move |o| {
                let _ = tx.send(f(o));
            }))
            .expect("orchestrator thread is running");
        rx.recv().expect("orchestrator thread is running")
    }
}

impl CoreThread {
    /// Waits for the thread to exit once every [`CoreHandle`] is dropped.
    pub fn join(mut self) {
        if let Some(h) = self.handle.take() {
            let _ = h.join();
        }
    }
}
