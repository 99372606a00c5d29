use serde::{Deserialize, Serialize};

use crate::error::{AncError, Result};

/// Taps of every dilated convolution in the residual stack.
pub const DILATED_TAPS: usize = 2;

/// Network geometry. The residual stack has `stacks × layers_per_stack`
/// layers with dilations 1, 2, 4, … restarting at each stack.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelConfig {
    pub stacks: usize,
    pub layers_per_stack: usize,
    pub residual_channels: usize,
    pub skip_channels: usize,
    pub input_taps: usize,
    pub post_taps: usize,
    pub vnn_taps: usize,
    pub quadratic_units: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            stacks: 3,
            layers_per_stack: 10,
            residual_channels: 16,
            skip_channels: 16,
            input_taps: 1,
            post_taps: 1,
            vnn_taps: 1,
            quadratic_units: 4,
        }
    }
}

impl ModelConfig {
    /// Small enough for finite-difference checks.
    pub fn tiny() -> Self {
        ModelConfig {
            stacks: 2,
            layers_per_stack: 3,
            residual_channels: 2,
            skip_channels: 2,
            ..Default::default()
        }
    }

    /// Desk-scale training geometry.
    pub fn toy() -> Self {
        ModelConfig {
            stacks: 2,
            layers_per_stack: 10,
            residual_channels: 8,
            skip_channels: 8,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("stacks", self.stacks),
            ("layers_per_stack", self.layers_per_stack),
            ("residual_channels", self.residual_channels),
            ("skip_channels", self.skip_channels),
            ("input_taps", self.input_taps),
            ("post_taps", self.post_taps),
            ("vnn_taps", self.vnn_taps),
        ];
        for (name, v) in fields {
            if v == 0 {
                return Err(AncError::Config(format!("model {name} must be at least 1")));
            }
        }
        if self.layers_per_stack > 20 {
            return Err(AncError::Config(format!("{} layers per stack is too deep", self.layers_per_stack)));
        }
        Ok(())
    }

    pub fn num_layers(&self) -> usize {
        self.stacks * self.layers_per_stack
    }

    pub fn dilations(&self) -> Vec<usize> {
        (0..self.stacks).flat_map(|_| (0..self.layers_per_stack).map(|l| 1usize << l)).collect()
    }

    /// Number of input samples (current one included) that can affect an output.
    pub fn receptive_field(&self) -> usize {
        let residual: usize = self.dilations().iter().map(|d| d * (DILATED_TAPS - 1)).sum();
        1 + (self.input_taps - 1) + residual + 3 * (self.post_taps - 1) + (self.vnn_taps - 1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_geometry() {
        let c = ModelConfig::default();
        assert_eq!(c.num_layers(), 30);
        assert_eq!(c.dilations()[..11], [1, 2, 4, 8, 16, 32, 64, 128, 256, 512, 1]);
        assert_eq!(c.receptive_field(), 3070);
        assert!(ModelConfig { skip_channels: 0, ..c }.validate().is_err());
    }
}
