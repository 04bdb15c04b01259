//! Model bundles: a variant tag, dimensions and the named components it
//! needs.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::diffkit::{Tape, Tensor, Var};
use crate::error::{contract, ensure, Error, Result};
use crate::netcore::{BoundNet, Component, Factor, Head, MlpSpec};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    SymRn,
    SymEmbedded,
    SymHybrid,
    Unstructured,
    NaiveBaseline,
    GeometricBaseline,
}

impl Variant {
    pub const ALL: [Variant; 6] = [
        Variant::SymRn,
        Variant::SymEmbedded,
        Variant::SymHybrid,
        Variant::Unstructured,
        Variant::NaiveBaseline,
        Variant::GeometricBaseline,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Variant::SymRn => "sym_rn",
            Variant::SymEmbedded => "sym_embedded",
            Variant::SymHybrid => "sym_hybrid",
            Variant::Unstructured => "unstructured",
            Variant::NaiveBaseline => "naive_baseline",
            Variant::GeometricBaseline => "geometric_baseline",
        }
    }

    pub fn has_energy(self) -> bool {
        !matches!(self, Variant::NaiveBaseline | Variant::GeometricBaseline)
    }

    pub fn is_structured(self) -> bool {
        matches!(self, Variant::SymRn | Variant::SymEmbedded | Variant::SymHybrid)
    }
}

impl std::str::FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Variant::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| contract(format!("unknown variant `{s}`")))
    }
}

impl std::fmt::Display for Variant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// `n` translational coordinates, `m` angles, `ctrl` control inputs.
///
/// SymODEN on ℝⁿ (and the unstructured model with `m = 0`) uses the
/// canonical state `(q, p)`; every other layout is `(r, cos φ, sin φ, ṙ, φ̇)`,
/// blocks in that order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dims {
    pub n: usize,
    pub m: usize,
    pub ctrl: usize,
}

impl Dims {
    pub fn new(n: usize, m: usize, ctrl: usize) -> Self {
        Self { n, m, ctrl }
    }

    pub fn canonical(self) -> bool {
        self.m == 0
    }

    /// Inputs of the configuration-dependent nets.
    pub fn coord_dim(self) -> usize {
        self.n + 2 * self.m
    }

    /// Generalized velocity (or momentum) dimension.
    pub fn dof(self) -> usize {
        self.n + self.m
    }

    pub fn state_dim(self) -> usize {
        self.coord_dim() + self.dof()
    }
}

pub const MASS_INV: &str = "mass_inv";
pub const POTENTIAL: &str = "potential";
pub const INPUT: &str = "input";
pub const HAMILTONIAN: &str = "hamiltonian";
pub const FIELD: &str = "field";
pub const GEOMETRIC: &str = "geometric";

/// The same hidden widths for every component name.
pub fn uniform_hidden(widths: &[usize]) -> BTreeMap<String, Vec<usize>> {
    [MASS_INV, POTENTIAL, INPUT, HAMILTONIAN, FIELD, GEOMETRIC].iter().map(|n| (n.to_string(), widths.to_vec())).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ModelBundle {
    pub variant: Variant,
    pub dims: Dims,
    pub components: BTreeMap<String, Component>,
}

#[derive(Deserialize)]
struct BundleFile {
    variant: Variant,
    dims: Dims,
    components: BTreeMap<String, Component>,
}

impl<'de> Deserialize<'de> for ModelBundle {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let f = BundleFile::deserialize(d)?;
        ModelBundle::new(f.variant, f.dims, f.components).map_err(serde::de::Error::custom)
    }
}

/// `(name, input width, output width, head)` of every component a variant
/// needs.
pub fn layout(variant: Variant, dims: Dims, epsilon: f64) -> Result<Vec<(&'static str, usize, usize, Head)>> {
    let c = dims.coord_dim();
    let d = dims.dof();
    let mass = (MASS_INV, c, d * (d + 1) / 2, Head::MassInv { n: d, epsilon, factor: Factor::Cholesky });
    let pot = (POTENTIAL, c, 1, Head::Raw);
    let input = (INPUT, c, d * dims.ctrl, Head::InputMatrix { rows: d, cols: dims.ctrl });
    ensure(dims.dof() >= 1, || "model needs at least one degree of freedom".into())?;
    ensure(dims.ctrl >= 1, || "model needs at least one control input".into())?;
    Ok(match variant {
        Variant::SymRn => {
            ensure(dims.m == 0, || "sym_rn has no angular coordinates".into())?;
            vec![mass, pot, input]
        }
        Variant::SymEmbedded => {
            ensure(dims.n == 0 && dims.m >= 1, || "sym_embedded is purely angular".into())?;
            vec![mass, pot, input]
        }
        Variant::SymHybrid => vec![mass, pot, input],
        Variant::Unstructured => {
            let h = (HAMILTONIAN, c + d, 1, Head::Raw);
            if dims.canonical() {
                vec![h, input]
            } else {
                vec![mass, h, input]
            }
        }
        Variant::NaiveBaseline => {
            vec![(FIELD, dims.state_dim() + dims.ctrl, dims.state_dim(), Head::Raw)]
        }
        Variant::GeometricBaseline => {
            ensure(dims.m >= 1, || "geometric baseline needs an angle".into())?;
            vec![mass, (GEOMETRIC, c + d + dims.ctrl, 2 * d, Head::Raw)]
        }
    })
}

impl ModelBundle {
    pub fn new(variant: Variant, dims: Dims, components: BTreeMap<String, Component>) -> Result<Self> {
        let want = layout(variant, dims, 0.0)?;
        ensure(want.len() == components.len(), || {
            format!(
                "{variant} needs components {:?}, got {:?}",
                want.iter().map(|w| w.0).collect::<Vec<_>>(),
                components.keys().collect::<Vec<_>>()
            )
        })?;
        for (name, _, out, head) in &want {
            let comp = components.get(*name).ok_or_else(|| contract(format!("{variant} is missing `{name}`")))?;
            comp.validate()?;
            ensure(comp.output_dim() == *out, || {
                format!("`{name}` must emit {out} values, emits {}", comp.output_dim())
            })?;
            let fits = match (&comp.head, head) {
                (Head::Raw, Head::Raw) => true,
                (Head::MassInv { n: a, .. }, Head::MassInv { n: b, .. }) => a == b,
                (a @ Head::InputMatrix { .. }, b @ Head::InputMatrix { .. }) => a == b,
                _ => false,
            };
            ensure(fits, || format!("`{name}` has head {:?}, expected {:?}", comp.head, head))?;
        }
        Ok(Self { variant, dims, components })
    }

    /// Fresh bundle with Tanh MLPs of the given hidden widths per
    /// component. Component `i` (in name order) is seeded with `seed + i`.
    pub fn build(
        variant: Variant,
        dims: Dims,
        hidden: &BTreeMap<String, Vec<usize>>,
        epsilon: f64,
        seed: u64,
    ) -> Result<Self> {
        let mut parts = layout(variant, dims, epsilon)?;
        parts.sort_by_key(|p| p.0);
        let mut components = BTreeMap::new();
        for (i, (name, inp, out, head)) in parts.into_iter().enumerate() {
            let h = hidden.get(name).ok_or_else(|| contract(format!("no hidden widths given for `{name}`")))?;
            let mut widths = vec![inp];
            widths.extend_from_slice(h);
            widths.push(out);
            let spec = MlpSpec::new(widths)?;
            components.insert(name.to_string(), Component::mlp(&spec, seed.wrapping_add(i as u64), head));
        }
        Self::new(variant, dims, components)
    }

    /// Whether the second state block holds momenta rather than velocities.
    pub fn momentum_state(&self) -> bool {
        match self.variant {
            Variant::SymRn => true,
            Variant::Unstructured => self.dims.canonical(),
            _ => false,
        }
    }

    pub fn component(&self, name: &str) -> Result<&Component> {
        self.components.get(name).ok_or_else(|| contract(format!("bundle has no `{name}` component")))
    }

    pub fn param_count(&self) -> usize {
        self.components.values().map(Component::param_count).sum()
    }

    /// Trainable tensors in a fixed order (component name, then layer).
    pub fn params(&self) -> Vec<&Tensor> {
        self.components.values().flat_map(Component::params).collect()
    }

    pub fn params_mut(&mut self) -> Vec<&mut Tensor> {
        self.components.values_mut().flat_map(Component::params_mut).collect()
    }

    pub fn all_finite(&self) -> bool {
        self.params().iter().all(|p| p.is_finite())
    }

    pub fn bind(&self, tape: &mut Tape, trainable: bool) -> BoundBundle {
        let nets = self.components.iter().map(|(k, c)| (k.clone(), c.bind(tape, trainable))).collect();
        BoundBundle { nets }
    }

    /// Binds to parameter nodes already on a tape, given in [`ModelBundle::params`] order.
    pub fn bind_to(&self, leaves: &[Var]) -> Result<BoundBundle> {
        let mut rest = leaves;
        let mut nets = BTreeMap::new();
        for (k, c) in &self.components {
            let (b, r) = c.bind_to(rest)?;
            nets.insert(k.clone(), b);
            rest = r;
        }
        ensure(rest.is_empty(), || format!("{} parameter nodes left unbound", rest.len()))?;
        Ok(BoundBundle { nets })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

/// A bundle's nets recorded on one tape.
#[derive(Clone, Debug)]
pub struct BoundBundle {
    pub nets: BTreeMap<String, BoundNet>,
}

impl BoundBundle {
    pub fn net(&self, name: &str) -> &BoundNet {
        &self.nets[name]
    }

    /// Parameter leaves, in the order of [`ModelBundle::params`].
    pub fn leaves(&self) -> Vec<Var> {
        self.nets.values().flat_map(BoundNet::leaves).collect()
    }
}
