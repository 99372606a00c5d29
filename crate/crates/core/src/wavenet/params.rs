use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::config::{ModelConfig, DILATED_TAPS};
use super::ops::{ConvKernel, ResidualLayer};
use crate::error::{AncError, Result};

/// One named tensor inside the flat parameter vector.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TensorSpec {
    pub name: String,
    pub shape: Vec<usize>,
    pub offset: usize,
}

impl TensorSpec {
    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Offsets of a convolution's weights (`[out][in][tap]`) and bias.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct ConvSlot {
    pub w: usize,
    pub b: Option<usize>,
    pub cout: usize,
    pub cin: usize,
    pub taps: usize,
}

impl ConvSlot {
    pub fn wlen(&self) -> usize {
        self.cout * self.cin * self.taps
    }

    pub fn kernel<'a, T>(&self, data: &'a [T]) -> ConvKernel<'a, T> {
        ConvKernel {
            weights: &data[self.w..self.w + self.wlen()],
            bias: self.b.map(|b| &data[b..b + self.cout]),
            out_channels: self.cout,
            in_channels: self.cin,
            taps: self.taps,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct LayerSlot {
    pub filter: ConvSlot,
    pub gate: ConvSlot,
    pub residual: ConvSlot,
    pub skip: ConvSlot,
    pub dilation: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct Layout {
    pub input: ConvSlot,
    pub layers: Vec<LayerSlot>,
    pub post: [ConvSlot; 3],
    pub linear: ConvSlot,
    pub quadratic: Vec<(ConvSlot, ConvSlot)>,
    pub tensors: Vec<TensorSpec>,
    pub total: usize,
}

struct Builder {
    tensors: Vec<TensorSpec>,
    total: usize,
}

impl Builder {
    fn tensor(&mut self, name: String, shape: Vec<usize>) -> usize {
        let offset = self.total;
        self.total += shape.iter().product::<usize>();
        self.tensors.push(TensorSpec { name, shape, offset });
        offset
    }

    fn conv(&mut self, name: &str, cout: usize, cin: usize, taps: usize, bias: bool) -> ConvSlot {
        let w = self.tensor(format!("{name}.w"), vec![cout, cin, taps]);
        let b = bias.then(|| self.tensor(format!("{name}.b"), vec![cout]));
        ConvSlot { w, b, cout, cin, taps }
    }
}

impl Layout {
    pub fn new(cfg: &ModelConfig) -> Layout {
        let (r, s) = (cfg.residual_channels, cfg.skip_channels);
        let mut b = Builder {
            tensors: Vec::new(),
            total: 0,
        };
        let input = b.conv("input", r, 1, cfg.input_taps, true);
        let layers = cfg
            .dilations()
            .into_iter()
            .enumerate()
            .map(|(i, dilation)| LayerSlot {
                filter: b.conv(&format!("layer{i}.filter"), r, r, DILATED_TAPS, true),
                gate: b.conv(&format!("layer{i}.gate"), r, r, DILATED_TAPS, true),
                residual: b.conv(&format!("layer{i}.residual"), r, r, 1, true),
                skip: b.conv(&format!("layer{i}.skip"), s, r, 1, true),
                dilation,
            })
            .collect();
        let post = [
            b.conv("post0", s, s, cfg.post_taps, true),
            b.conv("post1", s, s, cfg.post_taps, true),
            b.conv("post2", 1, s, cfg.post_taps, true),
        ];
        let linear = b.conv("vnn.linear", 1, 1, cfg.vnn_taps, true);
        let quadratic = (0..cfg.quadratic_units)
            .map(|q| {
                (
                    b.conv(&format!("vnn.q{q}.a"), 1, 1, cfg.vnn_taps, false),
                    b.conv(&format!("vnn.q{q}.b"), 1, 1, cfg.vnn_taps, false),
                )
            })
            .collect();
        Layout {
            input,
            layers,
            post,
            linear,
            quadratic,
            tensors: b.tensors,
            total: b.total,
        }
    }
}

/// All trainable parameters of the controller, stored as one flat vector.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveNetVnnParams {
    config: ModelConfig,
    layout: Layout,
    data: Vec<f64>,
}

impl WaveNetVnnParams {
    pub fn zeros(config: &ModelConfig) -> Result<Self> {
        config.validate()?;
        let layout = Layout::new(config);
        Ok(WaveNetVnnParams {
            config: config.clone(),
            data: vec![0.0; layout.total],
            layout,
        })
    }

    /// Uniform fan-in initialization with zero biases. The first-order
    /// output kernel and the second factor of every quadratic unit start at
    /// zero, so a fresh model emits no control signal.
    pub fn init(config: &ModelConfig, seed: u64) -> Result<Self> {
        let mut p = Self::zeros(config)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let fill = |data: &mut [f64], slot: &ConvSlot, rng: &mut ChaCha8Rng| {
            let bound = 1.0 / ((slot.cin * slot.taps) as f64).sqrt();
            for w in &mut data[slot.w..slot.w + slot.wlen()] {
                *w = rng.gen_range(-bound..bound);
            }
        };
        let layout = p.layout.clone();
        fill(&mut p.data, &layout.input, &mut rng);
        for l in &layout.layers {
            for slot in [&l.filter, &l.gate, &l.residual, &l.skip] {
                fill(&mut p.data, slot, &mut rng);
            }
        }
        for slot in &layout.post {
            fill(&mut p.data, slot, &mut rng);
        }
        for (a, _) in &layout.quadratic {
            fill(&mut p.data, a, &mut rng);
        }
        Ok(p)
    }

    /// Rebuilds parameters from a flat vector in layout order.
    pub fn from_flat(config: &ModelConfig, data: Vec<f64>) -> Result<Self> {
        let mut p = Self::zeros(config)?;
        if data.len() != p.data.len() {
            return Err(AncError::Shape(format!(
                "parameter vector has {} values, geometry needs {}",
                data.len(),
                p.data.len()
            )));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(AncError::Numerical(format!("parameter {} is not finite", p.name_of(i))));
        }
        p.data = data;
        Ok(p)
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn tensors(&self) -> &[TensorSpec] {
        &self.layout.tensors
    }

    pub fn tensor(&self, name: &str) -> Option<&[f64]> {
        self.layout
            .tensors
            .iter()
            .find(|t| t.name == name)
            .map(|t| &self.data[t.offset..t.offset + t.len()])
    }

    pub fn tensor_mut(&mut self, name: &str) -> Option<&mut [f64]> {
        let t = self.layout.tensors.iter().find(|t| t.name == name)?.clone();
        Some(&mut self.data[t.offset..t.offset + t.len()])
    }

    /// `tensor[index]` name for a flat position, for error messages.
    pub fn name_of(&self, flat: usize) -> String {
        self.layout
            .tensors
            .iter()
            .find(|t| flat >= t.offset && flat < t.offset + t.len())
            .map(|t| format!("{}[{}]", t.name, flat - t.offset))
            .unwrap_or_else(|| format!("#{flat}"))
    }

    pub fn residual_layer(&self, index: usize) -> Option<ResidualLayer<'_, f64>> {
        self.layout.layers.get(index).map(|l| ResidualLayer {
            filter: l.filter.kernel(&self.data),
            gate: l.gate.kernel(&self.data),
            residual: l.residual.kernel(&self.data),
            skip: l.skip.kernel(&self.data),
            dilation: l.dilation,
        })
    }

    pub(crate) fn layout(&self) -> &Layout {
        &self.layout
    }
}
