use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::corpus::{ProcessLabel, RawLabel};
use crate::rng;

/// Balanced size of the binary 1:1 task.
pub const BALANCED_LITERAL: usize = 1127;
/// Per-class size of the grouping tasks.
pub const GROUP_SIZE: usize = 549;
/// Literal draw of the six-class 200-Literal task.
pub const SMALL_LITERAL: usize = 200;

/// Label mapping plus subsampling rule of one experimental setting.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Task {
    #[serde(rename = "six_class_full")]
    SixClassFull,
    #[serde(rename = "six_class_200L")]
    SixClass200L,
    #[serde(rename = "binary_3to1")]
    Binary3to1,
    #[serde(rename = "binary_2to1")]
    Binary2to1,
    #[serde(rename = "binary_1to1")]
    Binary1to1,
    #[serde(rename = "five_class")]
    FiveClass,
    #[serde(rename = "L_vs_NL_549")]
    LvsNl549,
    #[serde(rename = "LE_vs_nonLE_549")]
    LeVsNonLe549,
    #[serde(rename = "LET_vs_nonLET_549")]
    LetVsNonLet549,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("task {task}: class `{class}` needs {needed} instances, corpus has {available}")]
pub struct SubsampleError {
    pub task: Task,
    pub class: String,
    pub needed: usize,
    pub available: usize,
}

/// How many instances of a task class to keep.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Draw {
    All,
    Exactly(usize),
}

impl Task {
    pub const ALL: [Task; 9] = [
        Task::SixClassFull,
        Task::SixClass200L,
        Task::Binary3to1,
        Task::Binary2to1,
        Task::Binary1to1,
        Task::FiveClass,
        Task::LvsNl549,
        Task::LeVsNonLe549,
        Task::LetVsNonLet549,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Task::SixClassFull => "six_class_full",
            Task::SixClass200L => "six_class_200L",
            Task::Binary3to1 => "binary_3to1",
            Task::Binary2to1 => "binary_2to1",
            Task::Binary1to1 => "binary_1to1",
            Task::FiveClass => "five_class",
            Task::LvsNl549 => "L_vs_NL_549",
            Task::LeVsNonLe549 => "LE_vs_nonLE_549",
            Task::LetVsNonLet549 => "LET_vs_nonLET_549",
        }
    }

    pub fn classes(self) -> Vec<String> {
        let names: &[&str] = match self {
            Task::SixClassFull | Task::SixClass200L => {
                return ProcessLabel::ALL.iter().map(|l| l.as_str().to_string()).collect()
            }
            Task::FiveClass => {
                return ProcessLabel::ALL[1..].iter().map(|l| l.as_str().to_string()).collect()
            }
            Task::Binary3to1 | Task::Binary2to1 | Task::Binary1to1 | Task::LvsNl549 => &["L", "NL"],
            Task::LeVsNonLe549 => &["LE", "nonLE"],
            Task::LetVsNonLet549 => &["LET", "nonLET"],
        };
        names.iter().map(|s| s.to_string()).collect()
    }

    /// Task class of a raw label, or `None` when the task leaves it out.
    pub fn class_of(self, raw: RawLabel) -> Option<usize> {
        let process = raw.process();
        let literal = process == ProcessLabel::Literal;
        match self {
            Task::SixClassFull | Task::SixClass200L => Some(process.index()),
            Task::FiveClass => (!literal).then(|| process.index() - 1),
            Task::Binary3to1 | Task::Binary2to1 | Task::Binary1to1 | Task::LvsNl549 => Some(usize::from(!literal)),
            Task::LeVsNonLe549 => Some(usize::from(!(literal || process == ProcessLabel::Equivalence))),
            Task::LetVsNonLet549 => Some(usize::from(
                !(literal || process == ProcessLabel::Equivalence || raw == RawLabel::Transposition),
            )),
        }
    }

    fn draws(self) -> Vec<Draw> {
        use Draw::*;
        match self {
            Task::SixClassFull => vec![All; 6],
            Task::SixClass200L => {
                let mut d = vec![All; 6];
                d[0] = Exactly(SMALL_LITERAL);
                d
            }
            Task::FiveClass => vec![All; 5],
            Task::Binary3to1 => vec![All, All],
            Task::Binary2to1 => vec![Exactly(2 * BALANCED_LITERAL), All],
            Task::Binary1to1 => vec![Exactly(BALANCED_LITERAL), All],
            Task::LvsNl549 | Task::LeVsNonLe549 | Task::LetVsNonLet549 => vec![Exactly(GROUP_SIZE); 2],
        }
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Task {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Task::ALL
            .into_iter()
            .find(|t| t.as_str() == s)
            .ok_or_else(|| format!("unknown task `{s}`"))
    }
}

/// Instances selected for a task: positions into the input label list and
/// their task classes, in input order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TaskSample {
    pub task: Task,
    pub classes: Vec<String>,
    pub indices: Vec<usize>,
    pub labels: Vec<usize>,
}

impl TaskSample {
    pub fn class_counts(&self) -> Vec<usize> {
        let mut c = vec![0; self.classes.len()];
        for &y in &self.labels {
            c[y] += 1;
        }
        c
    }
}

/// Maps labels to task classes and draws fixed-size classes without
/// replacement. Class `c` is drawn from a stream derived from `seed` and `c`.
pub fn subsample(labels: &[RawLabel], task: Task, seed: u64) -> Result<TaskSample, SubsampleError> {
    let classes = task.classes();
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); classes.len()];
    for (i, &raw) in labels.iter().enumerate() {
        if let Some(c) = task.class_of(raw) {
            members[c].push(i);
        }
    }
    let mut keep: Vec<(usize, usize)> = Vec::new();
    for (c, (pool, draw)) in members.iter_mut().zip(task.draws()).enumerate() {
        match draw {
            Draw::All => keep.extend(pool.iter().map(|&i| (i, c))),
            Draw::Exactly(n) => {
                if pool.len() < n {
                    return Err(SubsampleError {
                        task,
                        class: classes[c].clone(),
                        needed: n,
                        available: pool.len(),
                    });
                }
                pool.shuffle(&mut rng::stream(seed, &[c as u64]));
                keep.extend(pool[..n].iter().map(|&i| (i, c)));
            }
        }
    }
    keep.sort_unstable();
    Ok(TaskSample {
        task,
        classes,
        indices: keep.iter().map(|k| k.0).collect(),
        labels: keep.iter().map(|k| k.1).collect(),
    })
}
