//! Deterministic discrete-event kernel.
//!
//! Every runnable executes the waiting/reading/computing/writing
//! lifecycle on its mapped host. Compute actions share host capacity and
//! transfers share link bandwidth under max-min fairness; rates are
//! recomputed globally at every event. A transfer first drains the route
//! latency, then moves its bytes at the allocated rate; transfers between
//! co-located endpoints complete instantaneously.

mod fair_share;

pub use fair_share::fair_share;

use std::collections::{BTreeMap, VecDeque};
use std::time::Instant;

use crate::appmodel::{lift_dag, normalize_application, ApplicationModel};
use crate::error::{Error, Result};
use crate::mapping::{validate_mapping, Mapping};
use crate::metrics::{integrate_energy, SimulationResult};
use crate::platform::PlatformModel;

/// Lifecycle phase of a runnable process.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Waiting,
    Reading,
    Computing,
    Writing,
    Done,
}

impl Phase {
    pub fn name(self) -> &'static str {
        match self {
            Phase::Waiting => "Waiting",
            Phase::Reading => "Reading",
            Phase::Computing => "Computing",
            Phase::Writing => "Writing",
            Phase::Done => "Done",
        }
    }
}

/// What a transfer carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TransferKind {
    Read,
    Write,
    Activation,
}

impl TransferKind {
    pub fn name(self) -> &'static str {
        match self {
            TransferKind::Read => "Read",
            TransferKind::Write => "Write",
            TransferKind::Activation => "Activation",
        }
    }
}

/// Endpoint and payload description shared by transfer start/end events.
#[derive(Debug, Clone, PartialEq)]
pub struct TransferEvent {
    pub owner: String,
    pub kind: TransferKind,
    pub src_host: String,
    pub dst_host: String,
    /// Label moved by read/write transfers.
    pub label: Option<String>,
    /// Target runnable of an activation.
    pub target: Option<String>,
}

/// One timeline record.
#[derive(Debug, Clone, PartialEq)]
pub struct TimelineEvent {
    pub t: f64,
    pub kind: EventKind,
}

#[derive(Debug, Clone, PartialEq)]
pub enum EventKind {
    PhaseEnter { runnable: String, host: String, phase: Phase },
    PhaseExit { runnable: String, host: String, phase: Phase },
    TransferStart(TransferEvent),
    TransferEnd(TransferEvent),
}

/// Kernel knobs. Timeline recording is the only cost worth switching off
/// in large batches.
#[derive(Debug, Clone, Copy)]
pub struct SimulateOptions {
    pub record_timeline: bool,
    /// Keep the per-host (duration, utilization) series in the
    /// diagnostics instead of dropping it after energy integration.
    pub keep_intervals: bool,
}

impl Default for SimulateOptions {
    fn default() -> Self {
        SimulateOptions { record_timeline: true, keep_intervals: false }
    }
}

/// Numeric health counters and optional raw interval series.
#[derive(Debug, Clone, Default)]
pub struct KernelDiagnostics {
    /// max over resources and instants of (allocated - capacity)/capacity.
    pub max_capacity_overshoot: f64,
    /// max over completed actions of |integrated - declared|/declared.
    pub max_conservation_error: f64,
    /// Number of clock advances.
    pub event_count: u64,
    /// Per host (platform file order): (duration, utilization) covering
    /// [0, makespan]. Present when `keep_intervals` was set.
    pub host_intervals: Vec<Vec<(f64, f64)>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum ActionPayload {
    Activation { target: usize },
    Compute,
    Read { label: usize },
    Write { label: usize },
}

impl ActionPayload {
    // Tie-break rank for simultaneous completions: alphabetical by kind.
    fn rank(self) -> u8 {
        match self {
            ActionPayload::Activation { .. } => 0,
            ActionPayload::Compute => 1,
            ActionPayload::Read { .. } => 2,
            ActionPayload::Write { .. } => 3,
        }
    }
}

#[derive(Debug, Clone)]
struct Action {
    owner: usize,
    payload: ActionPayload,
    /// Unified resource indices: hosts first, then links.
    resources: Vec<usize>,
    remaining: f64,
    total: f64,
    integrated: f64,
    latency_remaining: f64,
    rate: f64,
    src_host: usize,
    dst_host: usize,
}

#[derive(Debug, Clone)]
struct RunnableCtx {
    id: String,
    host: usize,
    work: f64,
    reads: Vec<usize>,
    writes: Vec<usize>,
    succs: Vec<usize>,
}

#[derive(Debug, Clone)]
struct LabelCtx {
    name: String,
    bytes: f64,
    host: usize,
}

#[derive(Debug, Clone, Copy)]
enum Transition {
    Start(usize),
    EnterComputing(usize),
    EnterWriting(usize),
    Finish(usize),
    Activate(usize),
}

struct Kernel<'a> {
    platform: &'a PlatformModel,
    runnables: Vec<RunnableCtx>,
    labels: Vec<LabelCtx>,
    phase: Vec<Phase>,
    pending_activations: Vec<usize>,
    pending_reads: Vec<usize>,
    pending_writes: Vec<usize>,
    actions: Vec<Action>,
    clock: f64,
    done_count: usize,
    timeline: Vec<TimelineEvent>,
    record_timeline: bool,
    host_intervals: Vec<Vec<(f64, f64)>>,
    diag: KernelDiagnostics,
    worklist: VecDeque<Transition>,
}

/// Run one simulation with default options.
pub fn simulate(
    app: &ApplicationModel,
    platform: &PlatformModel,
    mapping: &Mapping,
) -> Result<SimulationResult> {
    simulate_with(app, platform, mapping, SimulateOptions::default()).map(|(r, _)| r)
}

/// Run one simulation, returning kernel diagnostics alongside the result.
pub fn simulate_with(
    app: &ApplicationModel,
    platform: &PlatformModel,
    mapping: &Mapping,
    options: SimulateOptions,
) -> Result<(SimulationResult, KernelDiagnostics)> {
    let started = Instant::now();

    let normalized;
    let app = if app.is_normalized() {
        app
    } else {
        normalized = normalize_application(app.clone())?;
        &normalized
    };
    validate_mapping(mapping, app, platform).map_err(|e| Error::Mapping(e.to_string()))?;

    let mut kernel = Kernel::new(app, platform, mapping, options)?;
    kernel.run()?;

    let makespan = kernel.clock;
    let per_host = integrate_energy(&kernel.host_intervals, platform, makespan)?;
    let total_energy = per_host.iter().sum();
    let per_host_energy = platform
        .hosts
        .iter()
        .zip(&per_host)
        .map(|(h, &e)| (h.id.clone(), e))
        .collect();

    let mut diag = kernel.diag;
    if options.keep_intervals {
        diag.host_intervals = kernel.host_intervals;
    }

    Ok((
        SimulationResult {
            makespan,
            per_host_energy,
            total_energy,
            timeline: kernel.timeline,
            sim_wall_time: started.elapsed(),
        },
        diag,
    ))
}

impl<'a> Kernel<'a> {
    fn new(
        app: &ApplicationModel,
        platform: &'a PlatformModel,
        mapping: &Mapping,
        options: SimulateOptions,
    ) -> Result<Self> {
        let dag = lift_dag(app)?;

        let labels: Vec<LabelCtx> = app
            .labels
            .iter()
            .map(|l| LabelCtx {
                name: l.name.clone(),
                bytes: l.size_bytes as f64,
                host: platform
                    .host_index(mapping.host_of_label(&l.name).expect("mapping validated"))
                    .expect("mapping validated"),
            })
            .collect();
        let label_index: BTreeMap<&str, usize> = app
            .labels
            .iter()
            .enumerate()
            .map(|(i, l)| (l.name.as_str(), i))
            .collect();

        let by_id: BTreeMap<&str, &crate::appmodel::Runnable> =
            app.runnables().map(|r| (r.id.as_str(), r)).collect();
        let mut runnables = Vec::with_capacity(dag.runnable_ids.len());
        for (idx, id) in dag.runnable_ids.iter().enumerate() {
            let r = by_id[id.as_str()];
            let norm = r.normalized.as_ref().expect("application normalized");
            runnables.push(RunnableCtx {
                id: id.clone(),
                host: platform
                    .host_index(mapping.host_of_runnable(id).expect("mapping validated"))
                    .expect("mapping validated"),
                work: norm.compute_work,
                reads: norm.reads.iter().map(|l| label_index[l.as_str()]).collect(),
                writes: norm.writes.iter().map(|l| label_index[l.as_str()]).collect(),
                succs: dag.successors[idx].clone(),
            });
        }

        // Fail fast on any route the run will need.
        for r in &runnables {
            for &l in &r.reads {
                require_route(platform, labels[l].host, r.host)?;
            }
            for &l in &r.writes {
                require_route(platform, r.host, labels[l].host)?;
            }
            for &s in &r.succs {
                require_route(platform, r.host, runnables[s].host)?;
            }
        }

        let n = runnables.len();
        Ok(Kernel {
            platform,
            labels,
            phase: vec![Phase::Waiting; n],
            pending_activations: dag.in_degree.clone(),
            pending_reads: vec![0; n],
            pending_writes: vec![0; n],
            runnables,
            actions: Vec::new(),
            clock: 0.0,
            done_count: 0,
            timeline: Vec::new(),
            record_timeline: options.record_timeline,
            host_intervals: vec![Vec::new(); platform.hosts.len()],
            diag: KernelDiagnostics::default(),
            worklist: VecDeque::new(),
        })
    }

    fn host_id(&self, host: usize) -> &str {
        &self.platform.hosts[host].id
    }

    fn emit_phase(&mut self, runnable: usize, phase: Phase, enter: bool) {
        if !self.record_timeline {
            return;
        }
        let r = &self.runnables[runnable];
        let kind = if enter {
            EventKind::PhaseEnter {
                runnable: r.id.clone(),
                host: self.platform.hosts[r.host].id.clone(),
                phase,
            }
        } else {
            EventKind::PhaseExit {
                runnable: r.id.clone(),
                host: self.platform.hosts[r.host].id.clone(),
                phase,
            }
        };
        self.timeline.push(TimelineEvent { t: self.clock, kind });
    }

    fn transfer_event(&self, owner: usize, payload: ActionPayload, src: usize, dst: usize) -> TransferEvent {
        let (kind, label, target) = match payload {
            ActionPayload::Read { label } => (
                TransferKind::Read,
                Some(self.labels[label].name.clone()),
                None,
            ),
            ActionPayload::Write { label } => (
                TransferKind::Write,
                Some(self.labels[label].name.clone()),
                None,
            ),
            ActionPayload::Activation { target } => (
                TransferKind::Activation,
                None,
                Some(self.runnables[target].id.clone()),
            ),
            ActionPayload::Compute => unreachable!("compute is not a transfer"),
        };
        TransferEvent {
            owner: self.runnables[owner].id.clone(),
            kind,
            src_host: self.host_id(src).to_string(),
            dst_host: self.host_id(dst).to_string(),
            label,
            target,
        }
    }

    fn emit_transfer(&mut self, owner: usize, payload: ActionPayload, src: usize, dst: usize, end: bool) {
        if !self.record_timeline {
            return;
        }
        let ev = self.transfer_event(owner, payload, src, dst);
        let kind = if end { EventKind::TransferEnd(ev) } else { EventKind::TransferStart(ev) };
        self.timeline.push(TimelineEvent { t: self.clock, kind });
    }

    /// Create a transfer action, or complete it instantaneously when the
    /// endpoints are co-located or the route costs nothing and carries
    /// nothing. Returns true when the transfer is still pending.
    fn issue_transfer(
        &mut self,
        owner: usize,
        payload: ActionPayload,
        src: usize,
        dst: usize,
        bytes: f64,
    ) -> bool {
        self.emit_transfer(owner, payload, src, dst, false);
        let route = self
            .platform
            .route_by_index(src, dst)
            .expect("routes pre-validated");
        if route.links.is_empty() || (route.latency == 0.0 && bytes == 0.0) {
            self.emit_transfer(owner, payload, src, dst, true);
            return false;
        }
        let n_hosts = self.platform.hosts.len();
        self.actions.push(Action {
            owner,
            payload,
            resources: route.links.iter().map(|&l| n_hosts + l).collect(),
            remaining: bytes,
            total: bytes,
            integrated: 0.0,
            latency_remaining: route.latency,
            rate: 0.0,
            src_host: src,
            dst_host: dst,
        });
        true
    }

    fn schedule(&mut self, t: Transition) {
        self.worklist.push_back(t);
    }

    fn drain_worklist(&mut self) {
        while let Some(t) = self.worklist.pop_front() {
            match t {
                Transition::Start(r) => self.start_runnable(r),
                Transition::EnterComputing(r) => self.enter_computing(r),
                Transition::EnterWriting(r) => self.enter_writing(r),
                Transition::Finish(r) => self.finish_runnable(r),
                Transition::Activate(r) => self.deliver_activation(r),
            }
        }
    }

    fn start_runnable(&mut self, r: usize) {
        debug_assert_eq!(self.phase[r], Phase::Waiting);
        self.emit_phase(r, Phase::Waiting, false);
        self.phase[r] = Phase::Reading;
        self.emit_phase(r, Phase::Reading, true);
        let reads = self.runnables[r].reads.clone();
        let host = self.runnables[r].host;
        let mut pending = 0usize;
        for label in reads {
            let src = self.labels[label].host;
            let bytes = self.labels[label].bytes;
            if self.issue_transfer(r, ActionPayload::Read { label }, src, host, bytes) {
                pending += 1;
            }
        }
        self.pending_reads[r] = pending;
        if pending == 0 {
            self.schedule(Transition::EnterComputing(r));
        }
    }

    fn enter_computing(&mut self, r: usize) {
        debug_assert_eq!(self.phase[r], Phase::Reading);
        self.emit_phase(r, Phase::Reading, false);
        self.phase[r] = Phase::Computing;
        self.emit_phase(r, Phase::Computing, true);
        let work = self.runnables[r].work;
        if work == 0.0 {
            self.schedule(Transition::EnterWriting(r));
        } else {
            let host = self.runnables[r].host;
            self.actions.push(Action {
                owner: r,
                payload: ActionPayload::Compute,
                resources: vec![host],
                remaining: work,
                total: work,
                integrated: 0.0,
                latency_remaining: 0.0,
                rate: 0.0,
                src_host: host,
                dst_host: host,
            });
        }
    }

    fn enter_writing(&mut self, r: usize) {
        debug_assert_eq!(self.phase[r], Phase::Computing);
        self.emit_phase(r, Phase::Computing, false);
        self.phase[r] = Phase::Writing;
        self.emit_phase(r, Phase::Writing, true);
        let writes = self.runnables[r].writes.clone();
        let host = self.runnables[r].host;
        let mut pending = 0usize;
        for label in writes {
            let dst = self.labels[label].host;
            let bytes = self.labels[label].bytes;
            if self.issue_transfer(r, ActionPayload::Write { label }, host, dst, bytes) {
                pending += 1;
            }
        }
        self.pending_writes[r] = pending;
        if pending == 0 {
            self.schedule(Transition::Finish(r));
        }
    }

    fn finish_runnable(&mut self, r: usize) {
        debug_assert_eq!(self.phase[r], Phase::Writing);
        let succs = self.runnables[r].succs.clone();
        let host = self.runnables[r].host;
        for s in succs {
            let dst = self.runnables[s].host;
            if !self.issue_transfer(r, ActionPayload::Activation { target: s }, host, dst, 0.0) {
                self.schedule(Transition::Activate(s));
            }
        }
        self.emit_phase(r, Phase::Writing, false);
        self.phase[r] = Phase::Done;
        self.emit_phase(r, Phase::Done, true);
        self.done_count += 1;
    }

    fn deliver_activation(&mut self, r: usize) {
        debug_assert!(self.pending_activations[r] > 0);
        self.pending_activations[r] -= 1;
        if self.pending_activations[r] == 0 {
            self.schedule(Transition::Start(r));
        }
    }

    fn run(&mut self) -> Result<()> {
        let n = self.runnables.len();
        if n == 0 {
            return Ok(());
        }

        // Give every runnable its initial waiting state, then release the
        // sources, in id order.
        for r in 0..n {
            self.emit_phase(r, Phase::Waiting, true);
        }
        for r in 0..n {
            if self.pending_activations[r] == 0 {
                self.schedule(Transition::Start(r));
            }
        }
        self.drain_worklist();

        while self.done_count < n {
            if self.actions.is_empty() {
                let stuck = (0..n)
                    .find(|&r| self.phase[r] != Phase::Done)
                    .map(|r| self.runnables[r].id.clone())
                    .unwrap_or_default();
                return Err(Error::Deadlock(format!(
                    "no live action while `{stuck}` is not done"
                )));
            }
            self.step()?;
        }
        Ok(())
    }

    /// One clock advance: re-share rates, move to the earliest milestone,
    /// fire completions and run all enabled zero-time transitions.
    fn step(&mut self) -> Result<()> {
        let n_hosts = self.platform.hosts.len();
        let n_links = self.platform.links.len();

        // Rates for everything currently consuming a resource.
        let mut capacities = Vec::with_capacity(n_hosts + n_links);
        capacities.extend(self.platform.hosts.iter().map(|h| h.speed));
        capacities.extend(self.platform.links.iter().map(|l| l.bandwidth));
        let memberships: Vec<Vec<usize>> = self
            .actions
            .iter()
            .map(|a| {
                if a.latency_remaining > 0.0 {
                    Vec::new()
                } else {
                    a.resources.clone()
                }
            })
            .collect();
        let rates = fair_share(&capacities, &memberships);
        for (a, &rate) in self.actions.iter_mut().zip(&rates) {
            a.rate = if a.latency_remaining > 0.0 { 0.0 } else { rate };
        }

        // Capacity diagnostic.
        let mut used = vec![0.0f64; capacities.len()];
        for a in &self.actions {
            if a.latency_remaining == 0.0 {
                for &res in &a.resources {
                    used[res] += a.rate;
                }
            }
        }
        for (res, &u) in used.iter().enumerate() {
            if capacities[res] > 0.0 {
                let overshoot = (u - capacities[res]) / capacities[res];
                if overshoot > self.diag.max_capacity_overshoot {
                    self.diag.max_capacity_overshoot = overshoot;
                }
            }
        }

        // Earliest milestone: a latency expiry or an exhausted remainder.
        let candidates: Vec<f64> = self
            .actions
            .iter()
            .map(|a| {
                if a.latency_remaining > 0.0 {
                    a.latency_remaining
                } else if a.rate > 0.0 && a.rate.is_finite() {
                    a.remaining / a.rate
                } else {
                    f64::INFINITY
                }
            })
            .collect();
        let delta = candidates.iter().copied().fold(f64::INFINITY, f64::min);
        if !(delta.is_finite() && delta > 0.0) {
            return Err(Error::Deadlock(format!(
                "no finite positive advance (delta = {delta})"
            )));
        }

        // Host utilization over [clock, clock + delta].
        for h in 0..n_hosts {
            let rate_sum: f64 = self
                .actions
                .iter()
                .filter(|a| a.payload == ActionPayload::Compute && a.src_host == h)
                .map(|a| a.rate)
                .sum();
            let u = (rate_sum / self.platform.hosts[h].speed).clamp(0.0, 1.0);
            self.host_intervals[h].push((delta, u));
        }

        self.clock += delta;
        self.diag.event_count += 1;

        let hit = |cand: f64| cand <= delta * (1.0 + 1e-12);
        let mut completed: Vec<usize> = Vec::new();
        for (i, a) in self.actions.iter_mut().enumerate() {
            if a.latency_remaining > 0.0 {
                if hit(candidates[i]) {
                    a.latency_remaining = 0.0;
                    if a.remaining == 0.0 {
                        completed.push(i);
                    }
                } else {
                    a.latency_remaining -= delta;
                }
            } else {
                a.integrated += a.rate * delta;
                if hit(candidates[i]) {
                    a.remaining = 0.0;
                    completed.push(i);
                } else {
                    a.remaining -= a.rate * delta;
                }
            }
        }

        // Simultaneous completions resolve in (runnable id, action kind)
        // order; runnable indices are already the sorted id order.
        completed.sort_by_key(|&i| {
            let a = &self.actions[i];
            (a.owner, a.payload.rank(), a.src_host, a.dst_host)
        });

        for &i in &completed {
            let a = self.actions[i].clone();
            if a.total > 0.0 {
                let err = (a.integrated - a.total).abs() / a.total;
                if err > self.diag.max_conservation_error {
                    self.diag.max_conservation_error = err;
                }
            }
            match a.payload {
                ActionPayload::Compute => {
                    self.schedule(Transition::EnterWriting(a.owner));
                }
                ActionPayload::Read { .. } => {
                    self.emit_transfer(a.owner, a.payload, a.src_host, a.dst_host, true);
                    self.pending_reads[a.owner] -= 1;
                    if self.pending_reads[a.owner] == 0 {
                        self.schedule(Transition::EnterComputing(a.owner));
                    }
                }
                ActionPayload::Write { .. } => {
                    self.emit_transfer(a.owner, a.payload, a.src_host, a.dst_host, true);
                    self.pending_writes[a.owner] -= 1;
                    if self.pending_writes[a.owner] == 0 {
                        self.schedule(Transition::Finish(a.owner));
                    }
                }
                ActionPayload::Activation { target } => {
                    self.emit_transfer(a.owner, a.payload, a.src_host, a.dst_host, true);
                    self.schedule(Transition::Activate(target));
                }
            }
            self.drain_worklist();
        }

        if !completed.is_empty() {
            let dead: Vec<bool> = {
                let mut dead = vec![false; self.actions.len()];
                for &i in &completed {
                    dead[i] = true;
                }
                dead
            };
            let mut keep = Vec::with_capacity(self.actions.len() - completed.len());
            for (i, a) in self.actions.drain(..).enumerate() {
                if !dead[i] {
                    keep.push(a);
                }
            }
            self.actions = keep;
        }

        Ok(())
    }
}

fn require_route(platform: &PlatformModel, src: usize, dst: usize) -> Result<()> {
    if platform.route_by_index(src, dst).is_none() {
        return Err(Error::NoRoute {
            src: platform.hosts[src].id.clone(),
            dst: platform.hosts[dst].id.clone(),
        });
    }
    Ok(())
}
