//! Master–worker sampling engine with speculative ordered batches.
//!
//! Each task `(v, w)` owns one sequential [`StoppingRule`]. Workers are
//! stateless: they take a batch address from the master, generate the bits,
//! and hand them back. Batches are consumed strictly in `batch_index` order
//! no matter when they arrive, so every stopping decision is the one a single
//! sequential reader would make. At most `lookahead` batches per task are
//! ever generated beyond the last consumed one; batches still pending when a
//! task decides are discarded.

use std::collections::{BTreeMap, HashMap};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::{Condvar, Mutex};
use std::time::Instant;

use serde::Serialize;
use thiserror::Error;

use crate::ed::{EdOutcome, EdParams, StoppingRule};
use crate::rng::{derive_stream_key, RngStream};
use crate::scenario::IndicatorSampler;

pub const DEFAULT_BATCH_SIZE: usize = 4096;

#[derive(Debug, Error, PartialEq)]
pub enum EngineError {
    #[error("worker count must be at least 1")]
    NoWorkers,
    #[error("batch size must be at least 1")]
    BatchSize,
    #[error("lookahead must be at least 1")]
    Lookahead,
    #[error("worker failed on task (state #{state}, slot {slot}) batch {batch_index}: {message}")]
    WorkerFailed {
        state: usize,
        slot: usize,
        batch_index: u64,
        message: String,
    },
    #[error("stream key collision between tasks {first:?} and {second:?}")]
    StreamKeyCollision { first: Task, second: Task },
}

/// One `(state index, slot index)` estimation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct Task {
    pub state: usize,
    pub slot: usize,
}

/// Location of one batch of indicator samples.
///
/// `state` is the index of the state in label order. Bit `j` of the batch is
/// element `batch_index * batch_size + j` of the task's stream, so the bits
/// a task sees do not depend on the batch size.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BatchAddress {
    pub master_seed: u64,
    pub state: usize,
    pub slot: usize,
    pub batch_index: u64,
    pub batch_size: usize,
}

impl BatchAddress {
    pub fn stream_key(&self) -> u64 {
        derive_stream_key(self.master_seed, self.state as u32, self.slot as u32)
    }

    pub fn first_element(&self) -> u64 {
        self.batch_index * self.batch_size as u64
    }
}

/// Generates the full batch at `addr`.
pub fn batch_generate(addr: &BatchAddress, sampler: &IndicatorSampler<'_>) -> Vec<bool> {
    generate_prefix(addr, sampler, addr.batch_size)
}

/// First `len` bits of the batch at `addr`.
fn generate_prefix(addr: &BatchAddress, sampler: &IndicatorSampler<'_>, len: usize) -> Vec<bool> {
    let mut rng = RngStream::new(addr.stream_key(), 0);
    let first = addr.first_element();
    (0..len as u64)
        .map(|j| {
            rng.seek(first + j);
            sampler.sample_by_index(addr.state, addr.slot, &mut rng)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct WorkPlan {
    pub tasks: Vec<Task>,
    pub batch_size: usize,
    pub lookahead: usize,
}

impl WorkPlan {
    pub fn new(tasks: Vec<Task>, batch_size: usize, lookahead: usize) -> Result<Self, EngineError> {
        if batch_size == 0 {
            return Err(EngineError::BatchSize);
        }
        if lookahead == 0 {
            return Err(EngineError::Lookahead);
        }
        Ok(WorkPlan {
            tasks,
            batch_size,
            lookahead,
        })
    }

    /// Every `(v, w)` pair, states outer, with the default batch size and a
    /// lookahead of twice the worker count.
    pub fn all_tasks(sampler: &IndicatorSampler<'_>, workers: usize) -> Self {
        WorkPlan {
            tasks: task_grid(sampler.states().len(), sampler.slot_count()),
            batch_size: DEFAULT_BATCH_SIZE,
            lookahead: 2 * workers.max(1),
        }
    }
}

pub fn task_grid(states: usize, slots: usize) -> Vec<Task> {
    (0..states)
        .flat_map(|state| (0..slots).map(move |slot| Task { state, slot }))
        .collect()
}

/// Fails if two tasks in the plan share a 64-bit stream key.
pub fn check_stream_keys(tasks: &[Task], master_seed: u64) -> Result<(), EngineError> {
    let mut seen: HashMap<u64, Task> = HashMap::with_capacity(tasks.len());
    for &task in tasks {
        let key = derive_stream_key(master_seed, task.state as u32, task.slot as u32);
        if let Some(&first) = seen.get(&key) {
            if first != task {
                return Err(EngineError::StreamKeyCollision { first, second: task });
            }
        }
        seen.insert(key, task);
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TaskReport {
    pub task: Task,
    pub outcome: EdOutcome,
    pub generated_batches: u64,
    pub consumed_batches: u64,
    pub discarded_batches: u64,
    pub wall_nanos: u64,
}

struct TaskState {
    rule: StoppingRule,
    /// Batches needed to cover the whole budget.
    max_batches: u64,
    next_assign: u64,
    next_consume: u64,
    pending: BTreeMap<u64, Vec<bool>>,
    generated: u64,
    discarded: u64,
    started: Option<Instant>,
    wall_nanos: u64,
}

impl TaskState {
    fn done(&self) -> bool {
        self.rule.outcome().is_some()
    }

    fn assignable(&self, lookahead: u64) -> bool {
        !self.done() && self.next_assign < self.max_batches && self.next_assign < self.next_consume + lookahead
    }
}

struct Master {
    tasks: Vec<TaskState>,
    first_open: usize,
    remaining: usize,
    failure: Option<EngineError>,
}

impl Master {
    fn take_assignment(&mut self, lookahead: u64) -> Option<(usize, u64)> {
        while self.first_open < self.tasks.len() && self.tasks[self.first_open].done() {
            self.first_open += 1;
        }
        let i = (self.first_open..self.tasks.len()).find(|&i| self.tasks[i].assignable(lookahead))?;
        let t = &mut self.tasks[i];
        let b = t.next_assign;
        t.next_assign += 1;
        t.generated += 1;
        t.started.get_or_insert_with(Instant::now);
        Some((i, b))
    }

    fn deliver(&mut self, i: usize, batch: u64, bits: Vec<bool>) {
        let t = &mut self.tasks[i];
        if t.done() {
            t.discarded += 1;
            return;
        }
        t.pending.insert(batch, bits);
        while let Some(bits) = t.pending.remove(&t.next_consume) {
            t.next_consume += 1;
            t.rule
                .push_bits(&bits)
                .expect("undecided rule accepts indicator bits");
            if t.done() {
                t.discarded += t.pending.len() as u64;
                t.pending.clear();
                t.wall_nanos = t.started.map_or(0, |s| s.elapsed().as_nanos() as u64);
                self.remaining -= 1;
                break;
            }
        }
    }
}

/// Runs every task in `plan` to a decision using `workers` threads.
pub fn run_parallel(
    plan: &WorkPlan,
    sampler: &IndicatorSampler<'_>,
    params: &EdParams,
    master_seed: u64,
    workers: usize,
) -> Result<Vec<TaskReport>, EngineError> {
    run_parallel_with(plan, params, master_seed, workers, |addr, len| {
        generate_prefix(addr, sampler, len)
    })
}

/// [`run_parallel`] with a caller-supplied batch kernel. The kernel receives
/// the batch address and how many leading bits are needed (the last batch of
/// a budget may be short) and must be a pure function of both.
pub fn run_parallel_with<G>(
    plan: &WorkPlan,
    params: &EdParams,
    master_seed: u64,
    workers: usize,
    generate: G,
) -> Result<Vec<TaskReport>, EngineError>
where
    G: Fn(&BatchAddress, usize) -> Vec<bool> + Sync,
{
    if workers == 0 {
        return Err(EngineError::NoWorkers);
    }
    let plan = WorkPlan::new(plan.tasks.clone(), plan.batch_size, plan.lookahead)?;
    check_stream_keys(&plan.tasks, master_seed)?;

    let batch_size = plan.batch_size as u64;
    let lookahead = plan.lookahead as u64;
    let cutoff = params.cutoff;
    let master = Mutex::new(Master {
        tasks: plan
            .tasks
            .iter()
            .map(|_| TaskState {
                rule: StoppingRule::new(*params),
                max_batches: cutoff.div_ceil(batch_size),
                next_assign: 0,
                next_consume: 0,
                pending: BTreeMap::new(),
                generated: 0,
                discarded: 0,
                started: None,
                wall_nanos: 0,
            })
            .collect(),
        first_open: 0,
        remaining: plan.tasks.len(),
        failure: None,
    });
    let wake = Condvar::new();

    let worker = || {
        let mut guard = master.lock().expect("master lock");
        loop {
            if guard.failure.is_some() || guard.remaining == 0 {
                return;
            }
            let Some((i, batch_index)) = guard.take_assignment(lookahead) else {
                guard = wake.wait(guard).expect("master lock");
                continue;
            };
            drop(guard);

            let task = plan.tasks[i];
            let addr = BatchAddress {
                master_seed,
                state: task.state,
                slot: task.slot,
                batch_index,
                batch_size: plan.batch_size,
            };
            let len = (cutoff - batch_index * batch_size).min(batch_size) as usize;
            let result = catch_unwind(AssertUnwindSafe(|| generate(&addr, len)));

            guard = master.lock().expect("master lock");
            match result {
                Ok(bits) => guard.deliver(i, batch_index, bits),
                Err(panic) => {
                    let message = panic
                        .downcast_ref::<&str>()
                        .map(|s| s.to_string())
                        .or_else(|| panic.downcast_ref::<String>().cloned())
                        .unwrap_or_else(|| "panic".to_owned());
                    guard.failure.get_or_insert(EngineError::WorkerFailed {
                        state: task.state,
                        slot: task.slot,
                        batch_index,
                        message,
                    });
                }
            }
            wake.notify_all();
        }
    };

    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(worker);
        }
    });

    let master = master.into_inner().expect("master lock");
    if let Some(err) = master.failure {
        return Err(err);
    }
    Ok(plan
        .tasks
        .iter()
        .zip(master.tasks)
        .map(|(&task, t)| TaskReport {
            task,
            outcome: t.rule.outcome().expect("every task decided"),
            generated_batches: t.generated,
            consumed_batches: t.next_consume,
            discarded_batches: t.discarded,
            wall_nanos: t.wall_nanos,
        })
        .collect())
}
