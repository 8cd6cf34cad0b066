//! Synthetic workflow families shaped after common scientific pipelines.
//!
//! * `montage-like`: fan-out / fan-in image mosaicking (project, diff, fit,
//!   background correction, co-add).
//! * `cybershake-like`: very wide parallel seismogram synthesis behind two
//!   long extraction tasks.
//! * `inspiral-like`: pipelined groups of long matched-filter tasks joined by
//!   short coincidence steps.
//! * `pan-starrs-like`: few, very long load tasks feeding a merge.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{TaskEntry, Workflow, WorkflowError, WorkflowFile};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    MontageLike,
    #[serde(rename = "cybershake-like")]
    CyberShakeLike,
    InspiralLike,
    PanStarrsLike,
}

impl Family {
    pub const ALL: [Family; 4] = [
        Family::MontageLike,
        Family::CyberShakeLike,
        Family::InspiralLike,
        Family::PanStarrsLike,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Family::MontageLike => "montage-like",
            Family::CyberShakeLike => "cybershake-like",
            Family::InspiralLike => "inspiral-like",
            Family::PanStarrsLike => "pan-starrs-like",
        }
    }

    /// Smallest task count the family can be generated with.
    pub fn min_tasks(self) -> usize {
        match self {
            Family::MontageLike => 11,
            Family::CyberShakeLike => 6,
            Family::InspiralLike => 6,
            Family::PanStarrsLike => 5,
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Family {
    type Err = GenerateError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Family::ALL
            .into_iter()
            .find(|f| f.as_str() == s)
            .ok_or_else(|| GenerateError::UnknownFamily(s.to_string()))
    }
}

#[derive(Debug, Error)]
pub enum GenerateError {
    #[error("unknown workflow family `{0}`")]
    UnknownFamily(String),
    #[error("{family} needs at least {min} tasks, got {got}")]
    TooSmall {
        family: Family,
        min: usize,
        got: usize,
    },
    #[error(transparent)]
    Invalid(#[from] WorkflowError),
}

struct Builder {
    rng: ChaCha8Rng,
    tasks: Vec<TaskEntry>,
}

impl Builder {
    fn add(&mut self, prefix: &str, lo: f64, hi: f64, parents: &[usize]) -> usize {
        let work = if hi > lo { self.rng.gen_range(lo..hi) } else { lo };
        // keep files short and diffable
        let work = (work * 100.0).round() / 100.0;
        let idx = self.tasks.len();
        let parents = parents.iter().map(|&p| self.tasks[p].id.clone()).collect();
        self.tasks.push(TaskEntry {
            id: format!("{prefix}_{idx:05}"),
            work_ecu_seconds: work,
            parents,
        });
        idx
    }
}

/// Generates a workflow of exactly `tasks` tasks.
pub fn generate(family: Family, tasks: usize, seed: u64) -> Result<Workflow, GenerateError> {
    Ok(Workflow::from_file(&generate_file(family, tasks, seed)?)?)
}

pub fn generate_file(family: Family, tasks: usize, seed: u64) -> Result<WorkflowFile, GenerateError> {
    if tasks < family.min_tasks() {
        return Err(GenerateError::TooSmall {
            family,
            min: family.min_tasks(),
            got: tasks,
        });
    }
    let mut b = Builder {
        rng: ChaCha8Rng::seed_from_u64(seed),
        tasks: Vec::with_capacity(tasks),
    };
    match family {
        Family::MontageLike => montage(&mut b, tasks),
        Family::CyberShakeLike => cybershake(&mut b, tasks),
        Family::InspiralLike => inspiral(&mut b, tasks),
        Family::PanStarrsLike => panstarrs(&mut b, tasks),
    }
    debug_assert_eq!(b.tasks.len(), tasks);
    Ok(WorkflowFile {
        name: format!("{family}-{tasks}-s{seed}"),
        tasks: b.tasks,
    })
}

fn montage(b: &mut Builder, n: usize) {
    // n = 2k projections/backgrounds + d diffs + 6 serial stages
    let mut k = (((n - 6) as f64) / 3.5).round().max(2.0) as usize;
    while 2 * k + 1 + 6 > n {
        k -= 1;
    }
    let d = n - 6 - 2 * k;

    let projects: Vec<usize> = (0..k).map(|_| b.add("mProject", 500.0, 900.0, &[])).collect();
    let diffs: Vec<usize> = (0..d)
        .map(|j| {
            let a = j % k;
            let mut c = (a + 1 + j / k) % k;
            if c == a {
                c = (a + 1) % k;
            }
            b.add("mDiffFit", 100.0, 250.0, &[projects[a], projects[c]])
        })
        .collect();
    let concat = b.add("mConcatFit", 600.0, 600.0, &diffs);
    let model = b.add("mBgModel", 1200.0, 1200.0, &[concat]);
    let backgrounds: Vec<usize> = projects
        .iter()
        .map(|&p| b.add("mBackground", 150.0, 300.0, &[p, model]))
        .collect();
    let table = b.add("mImgtbl", 300.0, 300.0, &backgrounds);
    let add = b.add("mAdd", 1800.0, 1800.0, &[table]);
    let shrink = b.add("mShrink", 600.0, 600.0, &[add]);
    b.add("mJPEG", 300.0, 300.0, &[shrink]);
}

fn cybershake(b: &mut Builder, n: usize) {
    let seis_count = (n - 4).div_ceil(2);
    let peak_count = n - 4 - seis_count;
    let extracts = [
        b.add("ExtractSGT", 2000.0, 4000.0, &[]),
        b.add("ExtractSGT", 2000.0, 4000.0, &[]),
    ];
    let seis: Vec<usize> = (0..seis_count)
        .map(|i| b.add("SeismogramSynthesis", 200.0, 600.0, &[extracts[i % 2]]))
        .collect();
    let peaks: Vec<usize> = (0..peak_count)
        .map(|i| b.add("PeakValCalc", 2.0, 10.0, &[seis[i]]))
        .collect();
    b.add("ZipSeis", 60.0, 60.0, &seis);
    b.add("ZipPSA", 60.0, 60.0, &peaks);
}

fn inspiral(b: &mut Builder, n: usize) {
    const WIDTH: usize = 5;
    const GROUP: usize = 4 * WIDTH + 2;
    let (groups, width) = if n >= GROUP {
        (n / GROUP, WIDTH)
    } else {
        (1, (n - 2) / 4)
    };
    let mut last = None;
    for _ in 0..groups {
        let banks: Vec<usize> = (0..width).map(|_| b.add("TmpltBank", 10.0, 30.0, &[])).collect();
        let first: Vec<usize> = banks
            .iter()
            .map(|&t| b.add("Inspiral", 1500.0, 3000.0, &[t]))
            .collect();
        let thinca = b.add("Thinca", 5.0, 20.0, &first);
        let trig: Vec<usize> = (0..width)
            .map(|_| b.add("TrigBank", 5.0, 20.0, &[thinca]))
            .collect();
        let second: Vec<usize> = trig
            .iter()
            .map(|&t| b.add("Inspiral2", 1000.0, 2000.0, &[t]))
            .collect();
        last = Some(b.add("Thinca2", 5.0, 20.0, &second));
    }
    let mut prev = last.expect("at least one group");
    while b.tasks.len() < n {
        prev = b.add("Coire", 20.0, 60.0, &[prev]);
    }
}

fn panstarrs(b: &mut Builder, n: usize) {
    let loads = (n - 3) / 2;
    let extra = (n - 3) % 2;
    let pre = b.add("PSPreprocess", 60.0, 60.0, &[]);
    let mut merge_parents = Vec::with_capacity(loads + extra);
    for _ in 0..loads {
        let load = b.add("PSLoad", 20000.0, 60000.0, &[pre]);
        merge_parents.push(b.add("PSValidate", 200.0, 600.0, &[load]));
    }
    for _ in 0..extra {
        merge_parents.push(b.add("PSLoad", 20000.0, 60000.0, &[pre]));
    }
    let merge = b.add("PSMerge", 3000.0, 3000.0, &merge_parents);
    b.add("PSFinalize", 300.0, 300.0, &[merge]);
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_sizes_for_every_family() {
        for family in Family::ALL {
            for n in [family.min_tasks(), family.min_tasks() + 1, 37, 100, 500] {
                let w = generate(family, n, 7).unwrap();
                assert_eq!(w.len(), n, "{family} n={n}");
            }
        }
    }

    #[test]
    fn too_small_is_rejected() {
        assert!(matches!(
            generate(Family::MontageLike, 5, 1),
            Err(GenerateError::TooSmall { .. })
        ));
    }

    #[test]
    fn deterministic_per_seed() {
        let a = generate_file(Family::MontageLike, 200, 3).unwrap();
        let b = generate_file(Family::MontageLike, 200, 3).unwrap();
        let c = generate_file(Family::MontageLike, 200, 4).unwrap();
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
        assert_ne!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&c).unwrap());
    }

    #[test]
    fn family_names_round_trip() {
        for family in Family::ALL {
            assert_eq!(family.as_str().parse::<Family>().unwrap(), family);
            let json = serde_json::to_string(&family).unwrap();
            assert_eq!(json, format!("\"{}\"", family.as_str()));
        }
    }
}
