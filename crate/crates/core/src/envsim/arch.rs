//! Network sizes per task and variant.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::task::Task;
use crate::error::{contract, Result};
use crate::hamdyn::{Dims, ModelBundle, Variant, FIELD, GEOMETRIC, HAMILTONIAN, INPUT, MASS_INV, POTENTIAL};
use crate::netcore::DEFAULT_EPSILON;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scale {
    /// Hidden widths divided by four, rounded up.
    Desk,
    Full,
}

impl std::str::FromStr for Scale {
    type Err = crate::error::Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "desk" => Ok(Scale::Desk),
            "full" => Ok(Scale::Full),
            _ => Err(contract(format!("unknown scale `{s}` (expected desk or full)"))),
        }
    }
}

fn table(task: Task, variant: Variant) -> Option<Vec<(&'static str, Vec<usize>)>> {
    use Variant::*;
    let pend = matches!(task, Task::Task1 | Task::Task2);
    let cart = matches!(task, Task::Task3 | Task::Task3Fa);
    let mass_embedded = match task {
        Task::Task1 | Task::Task2 => vec![300, 300],
        _ => vec![400, 400, 400],
    };
    let g = if pend { vec![200, 200] } else { vec![300, 300] };
    Some(match (task, variant) {
        (Task::Task1, NaiveBaseline) => vec![(FIELD, vec![600, 600])],
        (Task::Task1, Unstructured) => vec![(HAMILTONIAN, vec![400, 400]), (INPUT, g)],
        (Task::Task1, SymRn) => vec![(MASS_INV, mass_embedded), (POTENTIAL, vec![50, 50]), (INPUT, g)],
        (Task::Task1, _) => return None,
        (_, SymRn) => return None,
        (_, SymHybrid) if !cart => return None,
        (_, SymEmbedded) if cart => return None,
        (t, NaiveBaseline) => {
            let w = match t {
                Task::Task2 => 800,
                Task::Task3 | Task::Task3Fa => 1000,
                _ => 1200,
            };
            vec![(FIELD, vec![w, w])]
        }
        (t, GeometricBaseline) => {
            let w = match t {
                Task::Task2 => 600,
                Task::Task3 | Task::Task3Fa => 700,
                _ => 800,
            };
            vec![(MASS_INV, mass_embedded), (GEOMETRIC, vec![w, w])]
        }
        (t, Unstructured) => {
            let w = match t {
                Task::Task2 => 500,
                Task::Task3 | Task::Task3Fa => 500,
                _ => 600,
            };
            vec![(MASS_INV, mass_embedded), (HAMILTONIAN, vec![w, w]), (INPUT, g)]
        }
        (t, SymEmbedded | SymHybrid) => {
            let v = if t == Task::Task2 { vec![50, 50] } else { vec![300, 300] };
            vec![(MASS_INV, mass_embedded), (POTENTIAL, v), (INPUT, g)]
        }
    })
}

/// Hidden widths per component name.
pub fn hidden_widths(task: Task, variant: Variant, scale: Scale) -> Result<BTreeMap<String, Vec<usize>>> {
    let t = table(task, variant).ok_or_else(|| contract(format!("variant {variant} does not apply to {task}")))?;
    Ok(t.into_iter()
        .map(|(k, w)| {
            let w = match scale {
                Scale::Full => w,
                Scale::Desk => w.into_iter().map(|x| x.div_ceil(4)).collect(),
            };
            (k.to_string(), w)
        })
        .collect())
}

/// A freshly initialised model for the task.
pub fn build_model(task: Task, variant: Variant, scale: Scale, seed: u64) -> Result<ModelBundle> {
    let dims: Dims = task.dims();
    ModelBundle::build(variant, dims, &hidden_widths(task, variant, scale)?, DEFAULT_EPSILON, seed)
}
