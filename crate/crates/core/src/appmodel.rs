//! Application model: labels, runnables, tasks and activation edges.
//!
//! An application is a directed task graph. Tasks are graphs of runnables,
//! the smallest schedulable units; runnables exchange data through named
//! labels and are ordered by intra-task precedence edges plus inter-task
//! activation edges. Before simulation every runnable is normalized into
//! three phases: read all input labels, execute the aggregated compute
//! work, write all output labels.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A named shared data element. `size_bytes` is the volume moved by each
/// read or write access.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Label {
    pub name: String,
    pub size_bytes: u64,
}

/// One abstract instruction of a runnable.
#[derive(Debug, Clone, PartialEq)]
pub enum Instruction {
    Read { label: String },
    Write { label: String },
    Compute { work: f64 },
}

// The on-disk instruction record is flat ({op, label?, work?}) so that
// unknown keys and misplaced fields are rejected uniformly; the enum
// conversion enforces which fields each op admits.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct InstructionRecord {
    op: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    label: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    work: Option<f64>,
}

impl Instruction {
    fn from_record(rec: InstructionRecord) -> std::result::Result<Self, String> {
        match rec.op.as_str() {
            "read" | "write" => {
                if rec.work.is_some() {
                    return Err(format!("`work` is not allowed on a {} instruction", rec.op));
                }
                let label = rec
                    .label
                    .ok_or_else(|| format!("{} instruction requires `label`", rec.op))?;
                if rec.op == "read" {
                    Ok(Instruction::Read { label })
                } else {
                    Ok(Instruction::Write { label })
                }
            }
            "compute" => {
                if rec.label.is_some() {
                    return Err("`label` is not allowed on a compute instruction".into());
                }
                let work = rec.work.ok_or("compute instruction requires `work`")?;
                Ok(Instruction::Compute { work })
            }
            other => Err(format!("unknown op `{other}`")),
        }
    }

    fn to_record(&self) -> InstructionRecord {
        match self {
            Instruction::Read { label } => InstructionRecord {
                op: "read".into(),
                label: Some(label.clone()),
                work: None,
            },
            Instruction::Write { label } => InstructionRecord {
                op: "write".into(),
                label: Some(label.clone()),
                work: None,
            },
            Instruction::Compute { work } => InstructionRecord {
                op: "compute".into(),
                label: None,
                work: Some(*work),
            },
        }
    }
}

/// Read/compute/write aggregate of a runnable. Reads and writes keep the
/// authored access order and multiplicity; `compute_work` is the sum of
/// all compute instructions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizedRunnable {
    pub reads: Vec<String>,
    pub compute_work: f64,
    pub writes: Vec<String>,
}

/// Smallest schedulable unit: an ordered instruction list.
#[derive(Debug, Clone, PartialEq)]
pub struct Runnable {
    pub id: String,
    pub instructions: Vec<Instruction>,
    /// Filled by [`normalize_application`]; not part of the file schema.
    pub normalized: Option<NormalizedRunnable>,
}

impl Runnable {
    pub fn new(id: impl Into<String>, instructions: Vec<Instruction>) -> Self {
        Runnable {
            id: id.into(),
            instructions,
            normalized: None,
        }
    }

    /// Sum of the compute work over the authored instruction list.
    pub fn total_compute_work(&self) -> f64 {
        self.instructions
            .iter()
            .map(|i| match i {
                Instruction::Compute { work } => *work,
                _ => 0.0,
            })
            .sum()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RunnableRecord {
    id: String,
    instructions: Vec<InstructionRecord>,
}

/// Ordered precedence edge between two runnables of the same task.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PrecedenceEdge {
    pub from: String,
    pub to: String,
}

/// A DAG of runnables.
#[derive(Debug, Clone, PartialEq)]
pub struct Task {
    pub id: String,
    pub runnables: Vec<Runnable>,
    pub precedence: Vec<PrecedenceEdge>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TaskRecord {
    id: String,
    runnables: Vec<RunnableRecord>,
    #[serde(default)]
    precedence: Vec<PrecedenceEdge>,
}

/// Activation (control) edge between two tasks.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ActivationEdge {
    pub from_task: String,
    pub to_task: String,
}

/// A whole application: labels, tasks and inter-task activations.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ApplicationModel {
    pub labels: Vec<Label>,
    pub tasks: Vec<Task>,
    pub activations: Vec<ActivationEdge>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ApplicationRecord {
    #[serde(default)]
    labels: Vec<Label>,
    #[serde(default)]
    tasks: Vec<TaskRecord>,
    #[serde(default)]
    activations: Vec<ActivationEdge>,
}

impl ApplicationModel {
    /// Iterate over all runnables of all tasks in file order.
    pub fn runnables(&self) -> impl Iterator<Item = &Runnable> {
        self.tasks.iter().flat_map(|t| t.runnables.iter())
    }

    pub fn runnable_count(&self) -> usize {
        self.tasks.iter().map(|t| t.runnables.len()).sum()
    }

    pub fn task_count(&self) -> usize {
        self.tasks.len()
    }

    pub fn label(&self, name: &str) -> Option<&Label> {
        self.labels.iter().find(|l| l.name == name)
    }

    pub fn find_runnable(&self, id: &str) -> Option<&Runnable> {
        self.runnables().find(|r| r.id == id)
    }

    /// True once every runnable carries its normalized form.
    pub fn is_normalized(&self) -> bool {
        self.runnables().all(|r| r.normalized.is_some())
    }
}

fn record_to_model(rec: ApplicationRecord) -> Result<ApplicationModel> {
    let mut tasks = Vec::with_capacity(rec.tasks.len());
    for t in rec.tasks {
        let mut runnables = Vec::with_capacity(t.runnables.len());
        for r in t.runnables {
            let mut instructions = Vec::with_capacity(r.instructions.len());
            for inst in r.instructions {
                let converted = Instruction::from_record(inst)
                    .map_err(|m| Error::validation(&r.id, m))?;
                instructions.push(converted);
            }
            runnables.push(Runnable {
                id: r.id,
                instructions,
                normalized: None,
            });
        }
        tasks.push(Task {
            id: t.id,
            runnables,
            precedence: t.precedence,
        });
    }
    Ok(ApplicationModel {
        labels: rec.labels,
        tasks,
        activations: rec.activations,
    })
}

fn model_to_record(model: &ApplicationModel) -> ApplicationRecord {
    ApplicationRecord {
        labels: model.labels.clone(),
        tasks: model
            .tasks
            .iter()
            .map(|t| TaskRecord {
                id: t.id.clone(),
                runnables: t
                    .runnables
                    .iter()
                    .map(|r| RunnableRecord {
                        id: r.id.clone(),
                        instructions: r.instructions.iter().map(Instruction::to_record).collect(),
                    })
                    .collect(),
                precedence: t.precedence.clone(),
            })
            .collect(),
        activations: model.activations.clone(),
    }
}

/// Parse and validate an application file.
pub fn parse_application(path: impl AsRef<Path>) -> Result<ApplicationModel> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_application_str(&text)
}

/// Parse and validate an application document from a string.
pub fn parse_application_str(text: &str) -> Result<ApplicationModel> {
    let rec: ApplicationRecord = serde_json::from_str(text).map_err(|e| Error::schema(&e))?;
    let model = record_to_model(rec)?;
    validate_application(&model)?;
    Ok(model)
}

/// Serialize an application to its file form.
pub fn serialize_application(model: &ApplicationModel) -> String {
    let mut out = serde_json::to_string_pretty(&model_to_record(model)).expect("serialize");
    out.push('\n');
    out
}

/// Write an application file.
pub fn write_application(model: &ApplicationModel, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, serialize_application(model)).map_err(|e| Error::io(path, e))
}

/// Check every application invariant: unique ids, declared labels,
/// well-formed precedence edges, acyclic task-local precedence and an
/// acyclic lifted runnable graph.
pub fn validate_application(model: &ApplicationModel) -> Result<()> {
    let mut label_names = BTreeSet::new();
    for l in &model.labels {
        if !label_names.insert(l.name.as_str()) {
            return Err(Error::validation(&l.name, "duplicate label name"));
        }
    }

    let mut task_ids = BTreeSet::new();
    let mut runnable_ids = BTreeSet::new();
    for t in &model.tasks {
        if !task_ids.insert(t.id.as_str()) {
            return Err(Error::validation(&t.id, "duplicate task id"));
        }
        let mut local: BTreeSet<&str> = BTreeSet::new();
        for r in &t.runnables {
            if !runnable_ids.insert(r.id.as_str()) {
                return Err(Error::validation(&r.id, "duplicate runnable id"));
            }
            local.insert(r.id.as_str());
            for inst in &r.instructions {
                match inst {
                    Instruction::Read { label } | Instruction::Write { label } => {
                        if !label_names.contains(label.as_str()) {
                            return Err(Error::validation(
                                label,
                                format!("runnable `{}` references undeclared label", r.id),
                            ));
                        }
                    }
                    Instruction::Compute { work } => {
                        if !work.is_finite() || *work < 0.0 {
                            return Err(Error::validation(
                                &r.id,
                                "compute work must be finite and non-negative",
                            ));
                        }
                    }
                }
            }
        }
        for e in &t.precedence {
            for end in [&e.from, &e.to] {
                if !local.contains(end.as_str()) {
                    return Err(Error::validation(
                        end,
                        format!("precedence edge in task `{}` references unknown runnable", t.id),
                    ));
                }
            }
        }
    }

    for a in &model.activations {
        for end in [&a.from_task, &a.to_task] {
            if !task_ids.contains(end.as_str()) {
                return Err(Error::validation(end, "activation edge references unknown task"));
            }
        }
    }

    // Lifted-graph acyclicity covers task-local cycles as well.
    lift_dag(model).map_err(|e| match e {
        Error::Cycle { entity } => Error::validation(entity, "dependency cycle"),
        other => other,
    })?;
    Ok(())
}

/// The runnable-level dependency graph used by the simulator: task-local
/// precedence edges plus, for every activation edge between two tasks,
/// edges from each sink runnable of the source task to each source
/// runnable of the target task.
#[derive(Debug, Clone)]
pub struct LiftedDag {
    /// Runnable ids, sorted lexicographically. Graph nodes are indices
    /// into this vector.
    pub runnable_ids: Vec<String>,
    /// Successor indices per node, sorted.
    pub successors: Vec<Vec<usize>>,
    /// Number of predecessors per node.
    pub in_degree: Vec<usize>,
}

impl LiftedDag {
    pub fn index_of(&self, runnable_id: &str) -> Option<usize> {
        self.runnable_ids
            .binary_search_by(|probe| probe.as_str().cmp(runnable_id))
            .ok()
    }

    /// Nodes with no predecessors.
    pub fn sources(&self) -> Vec<usize> {
        (0..self.in_degree.len()).filter(|&i| self.in_degree[i] == 0).collect()
    }

    /// Nodes with no successors.
    pub fn sinks(&self) -> Vec<usize> {
        (0..self.successors.len()).filter(|&i| self.successors[i].is_empty()).collect()
    }
}

/// Build the lifted runnable DAG, failing with [`Error::Cycle`] if the
/// combined precedence/activation structure is cyclic.
pub fn lift_dag(model: &ApplicationModel) -> Result<LiftedDag> {
    let mut ids: Vec<String> = model.runnables().map(|r| r.id.clone()).collect();
    ids.sort();
    let index: BTreeMap<&str, usize> =
        ids.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect();

    let mut successors: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); ids.len()];

    // Per-task precedence plus the task's boundary runnables.
    let mut task_sources: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    let mut task_sinks: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for t in &model.tasks {
        let mut has_in: BTreeSet<usize> = BTreeSet::new();
        let mut has_out: BTreeSet<usize> = BTreeSet::new();
        for e in &t.precedence {
            let from = index[e.from.as_str()];
            let to = index[e.to.as_str()];
            successors[from].insert(to);
            has_out.insert(from);
            has_in.insert(to);
        }
        let members: Vec<usize> = t.runnables.iter().map(|r| index[r.id.as_str()]).collect();
        task_sources.insert(
            t.id.as_str(),
            members.iter().copied().filter(|i| !has_in.contains(i)).collect(),
        );
        task_sinks.insert(
            t.id.as_str(),
            members.iter().copied().filter(|i| !has_out.contains(i)).collect(),
        );
    }

    for a in &model.activations {
        let froms = &task_sinks[a.from_task.as_str()];
        let tos = &task_sources[a.to_task.as_str()];
        for &f in froms {
            for &t in tos {
                successors[f].insert(t);
            }
        }
    }

    let successors: Vec<Vec<usize>> =
        successors.into_iter().map(|s| s.into_iter().collect()).collect();
    let mut in_degree = vec![0usize; ids.len()];
    for succ in &successors {
        for &s in succ {
            in_degree[s] += 1;
        }
    }

    // Kahn's algorithm; any unreached node sits on a cycle.
    let mut degree = in_degree.clone();
    let mut queue: Vec<usize> = (0..ids.len()).filter(|&i| degree[i] == 0).collect();
    let mut seen = 0usize;
    while let Some(n) = queue.pop() {
        seen += 1;
        for &s in &successors[n] {
            degree[s] -= 1;
            if degree[s] == 0 {
                queue.push(s);
            }
        }
    }
    if seen != ids.len() {
        let offender = (0..ids.len())
            .find(|&i| degree[i] > 0)
            .map(|i| ids[i].clone())
            .unwrap_or_default();
        return Err(Error::Cycle { entity: offender });
    }

    Ok(LiftedDag {
        runnable_ids: ids,
        successors,
        in_degree,
    })
}

/// Fill the normalized read/compute/write form of every runnable and
/// verify that the lifted runnable graph is acyclic. Idempotent.
pub fn normalize_application(mut model: ApplicationModel) -> Result<ApplicationModel> {
    lift_dag(&model)?;
    for t in &mut model.tasks {
        for r in &mut t.runnables {
            let mut reads = Vec::new();
            let mut writes = Vec::new();
            let mut compute_work = 0.0f64;
            for inst in &r.instructions {
                match inst {
                    Instruction::Read { label } => reads.push(label.clone()),
                    Instruction::Write { label } => writes.push(label.clone()),
                    Instruction::Compute { work } => compute_work += work,
                }
            }
            r.normalized = Some(NormalizedRunnable {
                reads,
                compute_work,
                writes,
            });
        }
    }
    Ok(model)
}
