//! Generator for the eScience case-study application: a genetic-algorithm
//! molecular-simulation pipeline with `n` parallel MS2 stages.
//!
//! The pipeline has eight stages, each task holding exactly one runnable:
//!
//! ```text
//! AdaptState(R1) -> GenerateIndividuals(R2) -> GenerateInputDataSets(R3)
//!   -> MS2-1..MS2-n (R_MS2_i, pairwise independent)
//!   -> CalculateFitness(R6) -> RankIndividuals(R7)
//!   -> CheckTermination(R8) -> WriteResults(R9)
//! ```
//!
//! Every stage edge communicates through one label, numbered in stage
//! order: L1, L2, then one fan-out label per MS2 task (L3..L{n+2}), one
//! fan-in label per MS2 task (L{n+3}..L{2n+2}), and L{2n+3..2n+5} for the
//! tail edges. Each runnable reads its input labels, computes its stage
//! work and writes its output labels.

use crate::appmodel::{
    ActivationEdge, ApplicationModel, Instruction, Label, Runnable, Task,
};
use crate::error::{Error, Result};

/// Stage positions in [`EscienceProfile::stage_works`].
pub const STAGE_NAMES: [&str; 8] = [
    "AdaptState",
    "GenerateIndividuals",
    "GenerateInputDataSets",
    "MS2",
    "CalculateFitness",
    "RankIndividuals",
    "CheckTermination",
    "WriteResults",
];

/// Edge positions in [`EscienceProfile::label_sizes`].
pub const EDGE_NAMES: [&str; 7] = [
    "adapt-to-generate",
    "generate-to-inputs",
    "fan-out",
    "fan-in",
    "fitness-to-rank",
    "rank-to-check",
    "check-to-results",
];

/// Per-stage compute work (work units) and per-edge label sizes (bytes).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EscienceProfile {
    /// Work per stage, indexed as [`STAGE_NAMES`]; the MS2 entry applies
    /// to every MS2 task.
    pub stage_works: [f64; 8],
    /// Label size per stage edge, indexed as [`EDGE_NAMES`]; fan-out and
    /// fan-in entries apply to each per-MS2 label.
    pub label_sizes: [u64; 7],
}

impl Default for EscienceProfile {
    /// Reconstruction defaults. The fixed stages carry 60e6 work units
    /// and each MS2 task 25e6, so mapping the serial chain well matters
    /// as much as spreading the MS2 fan-out; label sizes keep transfers
    /// secondary to compute on the reference platform.
    fn default() -> Self {
        EscienceProfile {
            stage_works: [60e6, 60e6, 60e6, 25e6, 60e6, 60e6, 60e6, 60e6],
            label_sizes: [
                1_000_000, 1_000_000, 500_000, 500_000, 500_000, 250_000, 250_000,
            ],
        }
    }
}

impl EscienceProfile {
    pub fn validate(&self) -> Result<()> {
        for (name, w) in STAGE_NAMES.iter().zip(self.stage_works) {
            if !(w.is_finite() && w >= 0.0) {
                return Err(Error::Argument(format!(
                    "stage work for {name} must be finite and >= 0, got {w}"
                )));
            }
        }
        Ok(())
    }
}

fn single_runnable_task(task_id: &str, runnable_id: &str, instructions: Vec<Instruction>) -> Task {
    Task {
        id: task_id.into(),
        runnables: vec![Runnable::new(runnable_id, instructions)],
        precedence: vec![],
    }
}

fn rcw(reads: &[String], work: f64, writes: &[String]) -> Vec<Instruction> {
    let mut v: Vec<Instruction> = reads
        .iter()
        .map(|l| Instruction::Read { label: l.clone() })
        .collect();
    v.push(Instruction::Compute { work });
    v.extend(writes.iter().map(|l| Instruction::Write { label: l.clone() }));
    v
}

/// Build the eScience application with `n_ms2` parallel MS2 tasks.
pub fn generate_escience(n_ms2: usize, profile: &EscienceProfile) -> Result<ApplicationModel> {
    if n_ms2 < 1 {
        return Err(Error::Argument(format!("n_ms2 must be >= 1, got {n_ms2}")));
    }
    profile.validate()?;
    let w = &profile.stage_works;
    let s = &profile.label_sizes;

    let label_name = |k: usize| format!("L{k}");
    let fan_out = |i: usize| label_name(2 + i); // i in 1..=n
    let fan_in = |i: usize| label_name(2 + n_ms2 + i);

    let mut labels = vec![
        Label { name: label_name(1), size_bytes: s[0] },
        Label { name: label_name(2), size_bytes: s[1] },
    ];
    for i in 1..=n_ms2 {
        labels.push(Label { name: fan_out(i), size_bytes: s[2] });
    }
    for i in 1..=n_ms2 {
        labels.push(Label { name: fan_in(i), size_bytes: s[3] });
    }
    let l_rank = label_name(2 * n_ms2 + 3);
    let l_check = label_name(2 * n_ms2 + 4);
    let l_results = label_name(2 * n_ms2 + 5);
    labels.push(Label { name: l_rank.clone(), size_bytes: s[4] });
    labels.push(Label { name: l_check.clone(), size_bytes: s[5] });
    labels.push(Label { name: l_results.clone(), size_bytes: s[6] });

    let fan_out_names: Vec<String> = (1..=n_ms2).map(fan_out).collect();
    let fan_in_names: Vec<String> = (1..=n_ms2).map(fan_in).collect();

    let mut tasks = vec![
        single_runnable_task("AdaptState", "R1", rcw(&[], w[0], &[label_name(1)])),
        single_runnable_task(
            "GenerateIndividuals",
            "R2",
            rcw(&[label_name(1)], w[1], &[label_name(2)]),
        ),
        single_runnable_task(
            "GenerateInputDataSets",
            "R3",
            rcw(&[label_name(2)], w[2], &fan_out_names),
        ),
    ];
    for i in 1..=n_ms2 {
        tasks.push(single_runnable_task(
            &format!("MS2-{i}"),
            &format!("R_MS2_{i}"),
            rcw(&[fan_out(i)], w[3], &[fan_in(i)]),
        ));
    }
    tasks.push(single_runnable_task(
        "CalculateFitness",
        "R6",
        rcw(&fan_in_names, w[4], std::slice::from_ref(&l_rank)),
    ));
    tasks.push(single_runnable_task(
        "RankIndividuals",
        "R7",
        rcw(std::slice::from_ref(&l_rank), w[5], std::slice::from_ref(&l_check)),
    ));
    tasks.push(single_runnable_task(
        "CheckTermination",
        "R8",
        rcw(std::slice::from_ref(&l_check), w[6], std::slice::from_ref(&l_results)),
    ));
    tasks.push(single_runnable_task("WriteResults", "R9", rcw(&[l_results], w[7], &[])));

    let mut activations = vec![
        ActivationEdge { from_task: "AdaptState".into(), to_task: "GenerateIndividuals".into() },
        ActivationEdge {
            from_task: "GenerateIndividuals".into(),
            to_task: "GenerateInputDataSets".into(),
        },
    ];
    for i in 1..=n_ms2 {
        activations.push(ActivationEdge {
            from_task: "GenerateInputDataSets".into(),
            to_task: format!("MS2-{i}"),
        });
        activations.push(ActivationEdge {
            from_task: format!("MS2-{i}"),
            to_task: "CalculateFitness".into(),
        });
    }
    activations.push(ActivationEdge {
        from_task: "CalculateFitness".into(),
        to_task: "RankIndividuals".into(),
    });
    activations.push(ActivationEdge {
        from_task: "RankIndividuals".into(),
        to_task: "CheckTermination".into(),
    });
    activations.push(ActivationEdge {
        from_task: "CheckTermination".into(),
        to_task: "WriteResults".into(),
    });

    let model = ApplicationModel { labels, tasks, activations };
    crate::appmodel::validate_application(&model)?;
    Ok(model)
}

/// The MS2 task ids of a generated application, in index order.
pub fn ms2_task_ids(n_ms2: usize) -> Vec<String> {
    (1..=n_ms2).map(|i| format!("MS2-{i}")).collect()
}

/// The MS2 runnable ids of a generated application, in index order.
pub fn ms2_runnable_ids(n_ms2: usize) -> Vec<String> {
    (1..=n_ms2).map(|i| format!("R_MS2_{i}")).collect()
}
