//! Ground-truth systems. Angular states are simulated in generalized
//! coordinates and embedded as (cos, sin) pairs afterwards.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{contract, ensure, Error, Result};
use crate::hamdyn::{Dims, Variant};
use crate::odeflow::{rollout, FnField, Trajectory};

/// Off-circle tolerance for embedded angle pairs.
pub const CIRCLE_TOL: f64 = 1e-9;

pub const CARTPOLE_GRAVITY: f64 = 9.8;
pub const CARTPOLE_MASS_CART: f64 = 1.0;
pub const CARTPOLE_MASS_POLE: f64 = 0.1;
/// Half the pole length (distance from pivot to the pole's centre).
pub const CARTPOLE_HALF_LENGTH: f64 = 0.5;

pub const ACROBOT_GRAVITY: f64 = 9.8;
pub const ACROBOT_LINK_LENGTH_1: f64 = 1.0;
pub const ACROBOT_LINK_MASS: f64 = 1.0;
pub const ACROBOT_LINK_COM: f64 = 0.5;
pub const ACROBOT_LINK_MOI: f64 = 1.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Task {
    /// Pendulum observed in (q, p).
    #[serde(rename = "task1")]
    Task1,
    /// Pendulum observed as (cos q, sin q, q̇).
    #[serde(rename = "task2")]
    Task2,
    /// Cart-pole, force on the cart.
    #[serde(rename = "task3")]
    Task3,
    /// Acrobot, torque on the elbow.
    #[serde(rename = "task4")]
    Task4,
    #[serde(rename = "task3-fa")]
    Task3Fa,
    #[serde(rename = "task4-fa")]
    Task4Fa,
}

impl Task {
    pub const ALL: [Task; 6] = [Task::Task1, Task::Task2, Task::Task3, Task::Task4, Task::Task3Fa, Task::Task4Fa];

    pub fn name(self) -> &'static str {
        match self {
            Task::Task1 => "task1",
            Task::Task2 => "task2",
            Task::Task3 => "task3",
            Task::Task4 => "task4",
            Task::Task3Fa => "task3-fa",
            Task::Task4Fa => "task4-fa",
        }
    }

    pub fn dims(self) -> Dims {
        match self {
            Task::Task1 => Dims::new(1, 0, 1),
            Task::Task2 => Dims::new(0, 1, 1),
            Task::Task3 => Dims::new(1, 1, 1),
            Task::Task3Fa => Dims::new(1, 1, 2),
            Task::Task4 => Dims::new(0, 2, 1),
            Task::Task4Fa => Dims::new(0, 2, 2),
        }
    }

    /// The structured model suited to the task's coordinates.
    pub fn symoden_variant(self) -> Variant {
        match self {
            Task::Task1 => Variant::SymRn,
            Task::Task3 | Task::Task3Fa => Variant::SymHybrid,
            _ => Variant::SymEmbedded,
        }
    }

    /// Variants compared on the task.
    pub fn variants(self) -> Vec<Variant> {
        match self {
            Task::Task1 => vec![Variant::SymRn, Variant::Unstructured, Variant::NaiveBaseline],
            t => vec![t.symoden_variant(), Variant::Unstructured, Variant::GeometricBaseline, Variant::NaiveBaseline],
        }
    }

    pub fn dt(self) -> f64 {
        match self {
            Task::Task1 | Task::Task2 => 0.05,
            Task::Task3 | Task::Task3Fa => 0.02,
            Task::Task4 | Task::Task4Fa => 0.2,
        }
    }

    pub fn fully_actuated(self) -> bool {
        matches!(self, Task::Task1 | Task::Task2 | Task::Task3Fa | Task::Task4Fa)
    }

    /// Names of the observed state components.
    pub fn state_names(self) -> Vec<&'static str> {
        match self {
            Task::Task1 => vec!["q", "p"],
            Task::Task2 => vec!["cos_q", "sin_q", "q_dot"],
            Task::Task3 | Task::Task3Fa => vec!["x", "cos_theta", "sin_theta", "x_dot", "theta_dot"],
            Task::Task4 | Task::Task4Fa => vec!["cos_q1", "cos_q2", "sin_q1", "sin_q2", "q1_dot", "q2_dot"],
        }
    }

    /// Sampling box for the generalized initial state, as (name, lo, hi).
    pub fn ranges(self) -> Vec<(&'static str, f64, f64)> {
        match self {
            Task::Task1 => vec![("q", -PI, 3.0 * PI), ("p", -1.0, 1.0)],
            Task::Task2 => vec![("q", -PI, PI), ("q_dot", -1.0, 1.0)],
            Task::Task3 | Task::Task3Fa => {
                vec![("x", -1.0, 1.0), ("theta", -PI, PI), ("x_dot", -1.0, 1.0), ("theta_dot", -1.0, 1.0)]
            }
            Task::Task4 | Task::Task4Fa => {
                vec![("q1", -PI, PI), ("q2", -PI, PI), ("q1_dot", -1.0, 1.0), ("q2_dot", -1.0, 1.0)]
            }
        }
    }

    /// Physical constants of the simulated system.
    pub fn params(self) -> BTreeMap<String, f64> {
        let kv: Vec<(&str, f64)> = match self {
            Task::Task1 => vec![("mass_inv", 3.0), ("potential_scale", 5.0)],
            Task::Task2 => vec![("gravity_term", 15.0), ("input_gain", 3.0)],
            Task::Task3 | Task::Task3Fa => vec![
                ("gravity", CARTPOLE_GRAVITY),
                ("mass_cart", CARTPOLE_MASS_CART),
                ("mass_pole", CARTPOLE_MASS_POLE),
                ("half_length", CARTPOLE_HALF_LENGTH),
            ],
            Task::Task4 | Task::Task4Fa => vec![
                ("gravity", ACROBOT_GRAVITY),
                ("link_length_1", ACROBOT_LINK_LENGTH_1),
                ("link_mass", ACROBOT_LINK_MASS),
                ("link_com", ACROBOT_LINK_COM),
                ("link_moi", ACROBOT_LINK_MOI),
            ],
        };
        kv.into_iter().map(|(k, v)| (k.to_string(), v)).collect()
    }

    /// Observed state from generalized coordinates `(q, q̇)` (for Task 1, `(q, p)`).
    pub fn embed(self, g: &[f64]) -> Vec<f64> {
        match self {
            Task::Task1 => g.to_vec(),
            Task::Task2 => vec![g[0].cos(), g[0].sin(), g[1]],
            Task::Task3 | Task::Task3Fa => vec![g[0], g[1].cos(), g[1].sin(), g[2], g[3]],
            Task::Task4 | Task::Task4Fa => vec![g[0].cos(), g[1].cos(), g[0].sin(), g[1].sin(), g[2], g[3]],
        }
    }

    /// Generalized coordinates of an observed state; angles in (−π, π].
    pub fn generalize(self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_state(x)?;
        Ok(match self {
            Task::Task1 => x.to_vec(),
            Task::Task2 => vec![x[1].atan2(x[0]), x[2]],
            Task::Task3 | Task::Task3Fa => vec![x[0], x[2].atan2(x[1]), x[3], x[4]],
            Task::Task4 | Task::Task4Fa => vec![x[2].atan2(x[0]), x[3].atan2(x[1]), x[4], x[5]],
        })
    }

    fn check_state(self, x: &[f64]) -> Result<()> {
        let d = self.dims().state_dim();
        ensure(x.len() == d, || format!("{self} states have {d} components, got {}", x.len()))
    }

    fn check_control(self, u: &[f64]) -> Result<()> {
        let k = self.dims().ctrl;
        ensure(u.len() == k, || format!("{self} takes {k} control inputs, got {}", u.len()))
    }

    /// Truth field on the observed state.
    pub fn field(self, x: &[f64], u: &[f64]) -> Result<Vec<f64>> {
        self.check_state(x)?;
        self.check_control(u)?;
        match self {
            Task::Task1 => {
                let (dq, dp) = pendulum_rn_field(x[0], x[1], u[0]);
                Ok(vec![dq, dp])
            }
            Task::Task2 => Ok(pendulum_embedded_field(x[0], x[1], x[2], u[0])?.to_vec()),
            Task::Task3 | Task::Task3Fa => cartpole_field(x, u),
            Task::Task4 | Task::Task4Fa => acrobot_field(x, u),
        }
    }

    /// Truth field in generalized coordinates.
    pub fn generalized_field(self, g: &[f64], u: &[f64]) -> Result<Vec<f64>> {
        self.check_control(u)?;
        match self {
            Task::Task1 => {
                let (dq, dp) = pendulum_rn_field(g[0], g[1], u[0]);
                Ok(vec![dq, dp])
            }
            Task::Task2 => Ok(vec![g[1], pendulum_accel(g[0].sin(), u[0])]),
            Task::Task3 | Task::Task3Fa => {
                let a = cartpole_accel(g[1].cos(), g[1].sin(), g[3], u);
                Ok(vec![g[2], g[3], a[0], a[1]])
            }
            Task::Task4 | Task::Task4Fa => {
                let (c, s) = ([g[0].cos(), g[1].cos()], [g[0].sin(), g[1].sin()]);
                let a = acrobot_accel(c, s, [g[2], g[3]], u);
                Ok(vec![g[2], g[3], a[0], a[1]])
            }
        }
    }

    /// RK4 rollout of the truth system from an observed state, integrated
    /// in generalized coordinates and re-embedded at every step.
    pub fn simulate(self, x0: &[f64], u: &[f64], steps: usize, dt: f64) -> Result<Trajectory> {
        self.check_control(u)?;
        let g0 = self.generalize(x0)?;
        let f = FnField(|g: &[f64], u: &[f64]| self.generalized_field(g, u));
        let mut traj = rollout(&f, &g0, u, steps, dt)?;
        traj.states = traj.states.iter().map(|g| self.embed(g)).collect();
        Ok(traj)
    }

    /// Total energy of an observed state.
    pub fn energy(self, x: &[f64]) -> Result<f64> {
        let g = self.generalize(x)?;
        Ok(match self {
            Task::Task1 => 1.5 * g[1] * g[1] + 5.0 * (1.0 - g[0].cos()),
            Task::Task2 => g[1] * g[1] / 6.0 + 5.0 * (1.0 - g[0].cos()),
            Task::Task3 | Task::Task3Fa => {
                let m = cartpole_mass(g[1].cos());
                kinetic(m, [g[2], g[3]]) + CARTPOLE_MASS_POLE * CARTPOLE_GRAVITY * CARTPOLE_HALF_LENGTH * g[1].cos()
            }
            Task::Task4 | Task::Task4Fa => {
                let m = acrobot_mass(g[1].cos());
                kinetic(m, [g[2], g[3]]) + acrobot_potential([g[0].cos(), g[1].cos()], [g[0].sin(), g[1].sin()])
            }
        })
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Task {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Task::ALL
            .into_iter()
            .find(|t| t.name() == s)
            .ok_or_else(|| contract(format!("unknown task `{s}` (expected one of task1, task2, task3, task4, task3-fa, task4-fa)")))
    }
}

/// `(q̇, ṗ) = (3p, −5 sin q + u)`.
pub fn pendulum_rn_field(q: f64, p: f64, u: f64) -> (f64, f64) {
    (3.0 * p, -5.0 * q.sin() + u)
}

fn pendulum_accel(s: f64, u: f64) -> f64 {
    -15.0 * s + 3.0 * u
}

fn check_circle(c: f64, s: f64) -> Result<()> {
    let r = c * c + s * s - 1.0;
    ensure(r.abs() <= CIRCLE_TOL, || format!("angle pair ({c}, {s}) is off the unit circle by {r:e}"))
}

/// Derivative of `(cos q, sin q, q̇)` under `q̈ = −15 sin q + 3u`.
pub fn pendulum_embedded_field(c: f64, s: f64, qd: f64, u: f64) -> Result<[f64; 3]> {
    check_circle(c, s)?;
    Ok([-s * qd, c * qd, pendulum_accel(s, u)])
}

fn kinetic(m: [[f64; 2]; 2], v: [f64; 2]) -> f64 {
    0.5 * (m[0][0] * v[0] * v[0] + 2.0 * m[0][1] * v[0] * v[1] + m[1][1] * v[1] * v[1])
}

fn solve2(m: [[f64; 2]; 2], r: [f64; 2]) -> [f64; 2] {
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    [(m[1][1] * r[0] - m[0][1] * r[1]) / det, (m[0][0] * r[1] - m[1][0] * r[0]) / det]
}

/// Generalized forces: one input drives `single`, two drive both.
fn forces(u: &[f64], single: usize) -> [f64; 2] {
    match u {
        [a] => {
            let mut f = [0.0; 2];
            f[single] = *a;
            f
        }
        [a, b] => [*a, *b],
        _ => unreachable!("control length checked by caller"),
    }
}

/// Mass matrix of the cart-pole in `(x, θ)`, θ = 0 upright.
pub fn cartpole_mass(c: f64) -> [[f64; 2]; 2] {
    let mt = CARTPOLE_MASS_CART + CARTPOLE_MASS_POLE;
    let ml = CARTPOLE_MASS_POLE * CARTPOLE_HALF_LENGTH;
    [[mt, ml * c], [ml * c, 4.0 / 3.0 * ml * CARTPOLE_HALF_LENGTH]]
}

fn cartpole_accel(c: f64, s: f64, thd: f64, u: &[f64]) -> [f64; 2] {
    let ml = CARTPOLE_MASS_POLE * CARTPOLE_HALF_LENGTH;
    let f = forces(u, 0);
    solve2(cartpole_mass(c), [f[0] + ml * s * thd * thd, f[1] + ml * CARTPOLE_GRAVITY * s])
}

/// Derivative of `(x, cos θ, sin θ, ẋ, θ̇)`. One input pushes the cart;
/// two inputs also torque the pole.
pub fn cartpole_field(x: &[f64], u: &[f64]) -> Result<Vec<f64>> {
    ensure(x.len() == 5, || format!("cart-pole states have 5 components, got {}", x.len()))?;
    ensure(matches!(u.len(), 1 | 2), || format!("cart-pole takes 1 or 2 inputs, got {}", u.len()))?;
    let (c, s, thd) = (x[1], x[2], x[4]);
    check_circle(c, s)?;
    let a = cartpole_accel(c, s, thd, u);
    Ok(vec![x[3], -s * thd, c * thd, a[0], a[1]])
}

/// Mass matrix of the acrobot in `(q₁, q₂)`.
pub fn acrobot_mass(c2: f64) -> [[f64; 2]; 2] {
    let (l1, m, lc, i) = (ACROBOT_LINK_LENGTH_1, ACROBOT_LINK_MASS, ACROBOT_LINK_COM, ACROBOT_LINK_MOI);
    let d11 = m * lc * lc + m * (l1 * l1 + lc * lc + 2.0 * l1 * lc * c2) + 2.0 * i;
    let d12 = m * (lc * lc + l1 * lc * c2) + i;
    let d22 = m * lc * lc + i;
    [[d11, d12], [d12, d22]]
}

/// Potential of the acrobot, q₁ = 0 hanging.
pub fn acrobot_potential(c: [f64; 2], s: [f64; 2]) -> f64 {
    let (l1, m, lc, g) = (ACROBOT_LINK_LENGTH_1, ACROBOT_LINK_MASS, ACROBOT_LINK_COM, ACROBOT_GRAVITY);
    -(m * lc + m * l1) * g * c[0] - m * lc * g * (c[0] * c[1] - s[0] * s[1])
}

fn acrobot_accel(c: [f64; 2], s: [f64; 2], qd: [f64; 2], u: &[f64]) -> [f64; 2] {
    let (l1, m, lc, g) = (ACROBOT_LINK_LENGTH_1, ACROBOT_LINK_MASS, ACROBOT_LINK_COM, ACROBOT_GRAVITY);
    let h = m * l1 * lc * s[1];
    let s12 = s[0] * c[1] + c[0] * s[1];
    let coriolis = [-h * (2.0 * qd[0] * qd[1] + qd[1] * qd[1]), h * qd[0] * qd[0]];
    let grad_v = [(m * lc + m * l1) * g * s[0] + m * lc * g * s12, m * lc * g * s12];
    let f = forces(u, 1);
    solve2(acrobot_mass(c[1]), [f[0] - coriolis[0] - grad_v[0], f[1] - coriolis[1] - grad_v[1]])
}

/// Derivative of `(cos q₁, cos q₂, sin q₁, sin q₂, q̇₁, q̇₂)`. One input
/// torques the elbow; two inputs torque both joints.
pub fn acrobot_field(x: &[f64], u: &[f64]) -> Result<Vec<f64>> {
    ensure(x.len() == 6, || format!("acrobot states have 6 components, got {}", x.len()))?;
    ensure(matches!(u.len(), 1 | 2), || format!("acrobot takes 1 or 2 inputs, got {}", u.len()))?;
    let (c, s, qd) = ([x[0], x[1]], [x[2], x[3]], [x[4], x[5]]);
    check_circle(c[0], s[0])?;
    check_circle(c[1], s[1])?;
    let a = acrobot_accel(c, s, qd, u);
    Ok(vec![-s[0] * qd[0], -s[1] * qd[1], c[0] * qd[0], c[1] * qd[1], a[0], a[1]])
}
