//! Fully connected Tanh networks.

use rand::distributions::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::diffkit::{DualVar, Tape, Tensor, Var};
use crate::error::{contract, ensure, Error, Result};

/// Layer widths from input to output. Hidden layers use tanh, the output
/// layer is linear.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MlpSpec {
    pub widths: Vec<usize>,
}

impl MlpSpec {
    pub fn new(widths: Vec<usize>) -> Result<Self> {
        let spec = Self { widths };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        ensure(self.widths.len() >= 3, || {
            format!("an mlp needs at least one hidden layer, got widths {:?}", self.widths)
        })?;
        ensure(self.widths.iter().all(|&w| w >= 1), || format!("zero width in {:?}", self.widths))
    }

    pub fn input_dim(&self) -> usize {
        self.widths[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.widths.last().unwrap()
    }

    pub fn param_count(&self) -> usize {
        self.widths.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
    }
}

/// Weight `w` is out×in, bias `b` is 1×out.
#[derive(Clone, Debug, PartialEq)]
pub struct Layer {
    pub w: Tensor,
    pub b: Tensor,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MlpFile", into = "MlpFile")]
pub struct MlpParams {
    pub spec: MlpSpec,
    pub seed: Option<u64>,
    pub layers: Vec<Layer>,
}

#[derive(Serialize, Deserialize)]
struct LayerFile {
    w: Vec<Vec<f64>>,
    b: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct MlpFile {
    spec: MlpSpec,
    seed: Option<u64>,
    layers: Vec<LayerFile>,
}

impl From<MlpParams> for MlpFile {
    fn from(p: MlpParams) -> Self {
        let layers = p
            .layers
            .into_iter()
            .map(|l| LayerFile { w: l.w.to_rows(), b: l.b.into_data() })
            .collect();
        MlpFile { spec: p.spec, seed: p.seed, layers }
    }
}

impl TryFrom<MlpFile> for MlpParams {
    type Error = Error;

    fn try_from(f: MlpFile) -> Result<Self> {
        f.spec.validate()?;
        ensure(f.layers.len() + 1 == f.spec.widths.len(), || {
            format!("{} layers stored for widths {:?}", f.layers.len(), f.spec.widths)
        })?;
        let mut layers = Vec::with_capacity(f.layers.len());
        for (i, (l, io)) in f.layers.into_iter().zip(f.spec.widths.windows(2)).enumerate() {
            let (fan_in, fan_out) = (io[0], io[1]);
            let ok = l.w.len() == fan_out && l.w.iter().all(|r| r.len() == fan_in) && l.b.len() == fan_out;
            if !ok {
                return Err(contract(format!("layer {i} does not match {fan_in}→{fan_out}")));
            }
            let w = Tensor::from_rows(&l.w);
            let b = Tensor::row(l.b);
            ensure(w.is_finite() && b.is_finite(), || format!("layer {i} holds non-finite values"))?;
            layers.push(Layer { w, b });
        }
        Ok(MlpParams { spec: f.spec, seed: f.seed, layers })
    }
}

/// Uniform weights in ±sqrt(6/(fan_in+fan_out)), zero biases.
pub fn init_params(spec: &MlpSpec, seed: u64) -> MlpParams {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let layers = spec
        .widths
        .windows(2)
        .map(|io| {
            let (fan_in, fan_out) = (io[0], io[1]);
            let a = (6.0 / (fan_in + fan_out) as f64).sqrt();
            let dist = Uniform::new_inclusive(-a, a);
            let w: Vec<f64> = (0..fan_in * fan_out).map(|_| dist.sample(&mut rng)).collect();
            Layer { w: Tensor::new(fan_out, fan_in, w), b: Tensor::zeros(1, fan_out) }
        })
        .collect();
    MlpParams { spec: spec.clone(), seed: Some(seed), layers }
}

impl MlpParams {
    /// Every weight and bias set to zero.
    pub fn zeros(spec: &MlpSpec) -> Self {
        let layers = spec
            .widths
            .windows(2)
            .map(|io| Layer { w: Tensor::zeros(io[1], io[0]), b: Tensor::zeros(1, io[1]) })
            .collect();
        Self { spec: spec.clone(), seed: None, layers }
    }

    pub fn param_count(&self) -> usize {
        self.spec.param_count()
    }

    pub fn params(&self) -> Vec<&Tensor> {
        self.layers.iter().flat_map(|l| [&l.w, &l.b]).collect()
    }

    pub fn params_mut(&mut self) -> Vec<&mut Tensor> {
        self.layers.iter_mut().flat_map(|l| [&mut l.w, &mut l.b]).collect()
    }

    /// Records the parameters on `tape`, as leaves when `trainable`.
    pub fn bind(&self, tape: &mut Tape, trainable: bool) -> BoundMlp {
        let mut put = |t: &Tensor| if trainable { tape.leaf(t.clone()) } else { tape.constant(t.clone()) };
        BoundMlp { layers: self.layers.iter().map(|l| (put(&l.w), put(&l.b))).collect() }
    }
}

/// Plain evaluation of one input vector.
pub fn mlp_eval(params: &MlpParams, input: &[f64]) -> Result<Vec<f64>> {
    ensure(input.len() == params.spec.input_dim(), || {
        format!("mlp expects {} inputs, got {}", params.spec.input_dim(), input.len())
    })?;
    let mut x = input.to_vec();
    let last = params.layers.len() - 1;
    for (i, layer) in params.layers.iter().enumerate() {
        let (out, inp) = layer.w.shape();
        let w = layer.w.data();
        let mut y: Vec<f64> = layer.b.data().to_vec();
        for (o, yo) in y.iter_mut().enumerate() {
            *yo += w[o * inp..(o + 1) * inp].iter().zip(&x).map(|(a, b)| a * b).sum::<f64>();
        }
        if i < last {
            y.iter_mut().for_each(|v| *v = v.tanh());
        }
        debug_assert_eq!(y.len(), out);
        x = y;
    }
    Ok(x)
}

/// Parameter handles of an [`MlpParams`] recorded on a tape.
#[derive(Clone, Debug)]
pub struct BoundMlp {
    pub layers: Vec<(Var, Var)>,
}

impl BoundMlp {
    pub fn leaves(&self) -> Vec<Var> {
        self.layers.iter().flat_map(|&(w, b)| [w, b]).collect()
    }

    /// Batched forward pass on a B×in node.
    pub fn forward(&self, t: &mut Tape, x: Var) -> Var {
        let last = self.layers.len() - 1;
        let mut h = x;
        for (i, &(w, b)) in self.layers.iter().enumerate() {
            let a = t.matmul_nt(h, w);
            let a = t.add_bias(a, b);
            h = if i < last { t.tanh(a) } else { a };
        }
        h
    }

    /// Forward pass over input columns that carry tangents. Returns one
    /// column per output, each with the pushed-forward tangents.
    pub fn forward_dual(&self, t: &mut Tape, inputs: &[DualVar]) -> Vec<DualVar> {
        let rows = t.rows(inputs[0].v);
        let dirs = inputs.iter().map(DualVar::dirs).max().unwrap_or(0);
        let join = |t: &mut Tape, parts: Vec<Var>| if parts.len() == 1 { parts[0] } else { t.concat_cols(&parts) };

        let primal: Vec<Var> = inputs.iter().map(|d| d.v).collect();
        let mut h = join(t, primal);
        let mut dh: Vec<Option<Var>> = (0..dirs)
            .map(|k| {
                if inputs.iter().all(|d| d.d.get(k).copied().flatten().is_none()) {
                    return None;
                }
                let parts: Vec<Var> = inputs
                    .iter()
                    .map(|d| match d.d.get(k).copied().flatten() {
                        Some(v) => v,
                        None => t.filled(rows, 0.0),
                    })
                    .collect();
                Some(join(t, parts))
            })
            .collect();

        let last = self.layers.len() - 1;
        for (i, &(w, b)) in self.layers.iter().enumerate() {
            let a = t.matmul_nt(h, w);
            let a = t.add_bias(a, b);
            let da: Vec<Option<Var>> = dh.iter().map(|d| d.map(|d| t.matmul_nt(d, w))).collect();
            if i < last {
                h = t.tanh(a);
                if da.iter().any(Option::is_some) {
                    let sq = t.mul(h, h);
                    let slope = t.affine(sq, -1.0, 1.0);
                    dh = da.into_iter().map(|d| d.map(|d| t.mul(slope, d))).collect();
                } else {
                    dh = da;
                }
            } else {
                h = a;
                dh = da;
            }
        }

        let outs = t.shape(h).1;
        if outs == 1 {
            return vec![DualVar { v: h, d: dh }];
        }
        (0..outs)
            .map(|j| DualVar {
                v: t.col(h, j),
                d: dh.iter().map(|d| d.map(|d| t.col(d, j))).collect(),
            })
            .collect()
    }
}
