//! Feedforward ReLU networks and their exact big-M MILP encoding.

use nexus_milp::{LinExpr, MilpModel, Sense, VarId, VarSpec};
use serde::{Deserialize, Serialize};

use super::SurrogateError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    /// One row per output node.
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<f64>,
}

/// ReLU on every hidden layer, identity on the last.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReluNetwork {
    pub layers: Vec<Layer>,
}

impl ReluNetwork {
    /// The EC network: inputs (WR_1, WR_2, WR_3, Q_f), two hidden nodes.
    pub fn ec_reference() -> Self {
        Self {
            layers: vec![
                Layer {
                    weights: vec![vec![1.1556, -0.5436, 0.4116, 0.4630], vec![0.2843, 0.1137, 0.1071, 1.3843]],
                    biases: vec![1.0465, -0.3829],
                },
                Layer { weights: vec![vec![0.4638, 0.5371]], biases: vec![-0.9950] },
            ],
        }
    }

    pub fn input_dim(&self) -> usize {
        self.layers.first().and_then(|l| l.weights.first()).map_or(0, Vec::len)
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().map_or(0, |l| l.biases.len())
    }

    pub fn hidden_nodes(&self) -> usize {
        self.layers[..self.layers.len().saturating_sub(1)].iter().map(|l| l.biases.len()).sum()
    }

    /// Verifies that layer dimensions chain and all data is finite.
    pub fn check(&self) -> Result<(), SurrogateError> {
        if self.layers.is_empty() {
            return Err(SurrogateError::Network("network has no layers".into()));
        }
        let mut width = self.input_dim();
        if width == 0 {
            return Err(SurrogateError::Network("first layer has no inputs".into()));
        }
        for (i, l) in self.layers.iter().enumerate() {
            if l.weights.len() != l.biases.len() || l.biases.is_empty() {
                return Err(SurrogateError::Network(format!("layer {i}: {} weight rows for {} biases", l.weights.len(), l.biases.len())));
            }
            if let Some(row) = l.weights.iter().find(|r| r.len() != width) {
                return Err(SurrogateError::Network(format!("layer {i}: row of length {} but {width} inputs", row.len())));
            }
            if l.weights.iter().flatten().chain(&l.biases).any(|v| !v.is_finite()) {
                return Err(SurrogateError::Network(format!("layer {i}: non-finite parameter")));
            }
            width = l.biases.len();
        }
        Ok(())
    }

    /// Full forward pass returning every output.
    pub fn forward_all(&self, input: &[f64]) -> Result<Vec<f64>, SurrogateError> {
        if input.len() != self.input_dim() {
            return Err(SurrogateError::DimensionMismatch { expected: self.input_dim(), got: input.len() });
        }
        let mut x = input.to_vec();
        let last = self.layers.len() - 1;
        for (i, l) in self.layers.iter().enumerate() {
            x = l
                .weights
                .iter()
                .zip(&l.biases)
                .map(|(row, b)| {
                    let a = row.iter().zip(&x).map(|(w, v)| w * v).sum::<f64>() + b;
                    if i < last {
                        a.max(0.0)
                    } else {
                        a
                    }
                })
                .collect();
        }
        Ok(x)
    }

    /// Forward pass of a single-output network.
    pub fn forward(&self, input: &[f64]) -> Result<f64, SurrogateError> {
        let out = self.forward_all(input)?;
        match out.as_slice() {
            [v] => Ok(*v),
            _ => Err(SurrogateError::DimensionMismatch { expected: 1, got: out.len() }),
        }
    }

    /// Pre-activation interval of every node, layer by layer.
    pub fn interval_bounds(&self, input_bounds: &[(f64, f64)]) -> Result<Vec<Vec<(f64, f64)>>, SurrogateError> {
        if input_bounds.len() != self.input_dim() {
            return Err(SurrogateError::DimensionMismatch { expected: self.input_dim(), got: input_bounds.len() });
        }
        if let Some(i) = input_bounds.iter().position(|(lo, hi)| !lo.is_finite() || !hi.is_finite()) {
            return Err(SurrogateError::UnboundedInput(i));
        }
        let mut cur = input_bounds.to_vec();
        let mut all = Vec::with_capacity(self.layers.len());
        for l in &self.layers {
            let pre: Vec<(f64, f64)> = l
                .weights
                .iter()
                .zip(&l.biases)
                .map(|(row, &b)| {
                    row.iter().zip(&cur).fold((b, b), |(lo, hi), (&w, &(xl, xh))| {
                        if w >= 0.0 {
                            (lo + w * xl, hi + w * xh)
                        } else {
                            (lo + w * xh, hi + w * xl)
                        }
                    })
                })
                .collect();
            cur = pre.iter().map(|&(lo, hi)| (lo.max(0.0), hi.max(0.0))).collect();
            all.push(pre);
        }
        Ok(all)
    }
}

/// Free function form of [`ReluNetwork::forward`].
pub fn relu_forward(net: &ReluNetwork, input: &[f64]) -> Result<f64, SurrogateError> {
    net.forward(input)
}

/// Big-M constants of one hidden node.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NodeBigM {
    pub pre_lower: f64,
    pub pre_upper: f64,
    /// Bound used in `y ≤ M⁺·z`.
    pub m_plus: f64,
    /// Bound used in `y ≤ a + M⁻·(1 − z)`.
    pub m_minus: f64,
}

impl NodeBigM {
    pub fn from_interval(lo: f64, hi: f64) -> Self {
        Self { pre_lower: lo, pre_upper: hi, m_plus: hi.max(0.0), m_minus: (-lo).max(0.0) }
    }
}

/// Handles of an encoded network.
#[derive(Debug, Clone, PartialEq)]
pub struct ReluFragment {
    /// Post-activation variable per hidden node, layer-major.
    pub hidden: Vec<VarId>,
    /// Activation binary per hidden node, same order.
    pub binaries: Vec<VarId>,
    pub big_m: Vec<NodeBigM>,
    pub outputs: Vec<VarId>,
}

impl ReluFragment {
    pub fn output(&self) -> VarId {
        self.outputs[0]
    }
}

/// Encodes `net` applied to the affine `inputs` into `model`.
///
/// Each hidden node gets `y ≥ a`, `y ≤ a + M⁻(1−z)`, `y ≤ M⁺z`, `y ≥ 0` with
/// node-specific constants from interval propagation of `input_bounds`.
/// Binaries of nodes whose sign is fixed by the bounds are fixed as well.
/// Every name is prefixed with `prefix`.
pub fn encode_relu_milp(
    model: &mut MilpModel,
    net: &ReluNetwork,
    inputs: &[LinExpr],
    input_bounds: &[(f64, f64)],
    prefix: &str,
) -> Result<ReluFragment, SurrogateError> {
    net.check()?;
    if inputs.len() != net.input_dim() {
        return Err(SurrogateError::DimensionMismatch { expected: net.input_dim(), got: inputs.len() });
    }
    let bounds = net.interval_bounds(input_bounds)?;
    let mut frag = ReluFragment { hidden: Vec::new(), binaries: Vec::new(), big_m: Vec::new(), outputs: Vec::new() };
    let mut cur: Vec<LinExpr> = inputs.to_vec();
    let last = net.layers.len() - 1;
    for (li, (layer, pre)) in net.layers.iter().zip(&bounds).enumerate() {
        let mut next = Vec::with_capacity(layer.biases.len());
        for (ni, ((row, &b), &(lo, hi))) in layer.weights.iter().zip(&layer.biases).zip(pre).enumerate() {
            let mut a = LinExpr::constant(b);
            for (w, x) in row.iter().zip(&cur) {
                a = a.add_scaled(x, *w);
            }
            let tag = format!("{prefix}_l{}n{}", li + 1, ni + 1);
            if li == last {
                let out = model.add_variable(VarSpec::continuous(format!("{tag}_out"), lo, hi))?;
                model.add_constraint(&LinExpr::term(out, 1.0).add_scaled(&a, -1.0), Sense::Eq, 0.0, format!("{tag}_def"))?;
                frag.outputs.push(out);
                continue;
            }
            let m = NodeBigM::from_interval(lo, hi);
            let y = model.add_variable(VarSpec::continuous(format!("{tag}_y"), 0.0, m.m_plus))?;
            let z = model.add_variable(VarSpec::binary(format!("{tag}_z")))?;
            if lo >= 0.0 {
                model.set_bounds(z, 1.0, 1.0)?;
            } else if hi <= 0.0 {
                model.set_bounds(z, 0.0, 0.0)?;
            }
            let y_minus_a = LinExpr::term(y, 1.0).add_scaled(&a, -1.0);
            model.add_constraint(&y_minus_a, Sense::Ge, 0.0, format!("{tag}_lo"))?;
            model.add_constraint(&y_minus_a.clone().add(z, m.m_minus), Sense::Le, m.m_minus, format!("{tag}_act"))?;
            model.add_constraint(&LinExpr::term(y, 1.0).add(z, -m.m_plus), Sense::Le, 0.0, format!("{tag}_off"))?;
            frag.hidden.push(y);
            frag.binaries.push(z);
            frag.big_m.push(m);
            next.push(LinExpr::term(y, 1.0));
        }
        cur = next;
    }
    Ok(frag)
}

/// Encodes `net` over fresh input variables boxed by `input_bounds` in a new
/// model. Returns the model, the input variables and the fragment.
pub fn encode_relu_standalone(
    net: &ReluNetwork,
    input_bounds: &[(f64, f64)],
) -> Result<(MilpModel, Vec<VarId>, ReluFragment), SurrogateError> {
    let mut model = MilpModel::new("relu");
    let mut xs = Vec::with_capacity(input_bounds.len());
    for (i, &(lo, hi)) in input_bounds.iter().enumerate() {
        if !lo.is_finite() || !hi.is_finite() {
            return Err(SurrogateError::UnboundedInput(i));
        }
        xs.push(model.add_variable(VarSpec::continuous(format!("x{}", i + 1), lo, hi))?);
    }
    let inputs: Vec<LinExpr> = xs.iter().map(|&x| LinExpr::term(x, 1.0)).collect();
    let frag = encode_relu_milp(&mut model, net, &inputs, input_bounds, "nn")?;
    Ok((model, xs, frag))
}
