//! Analytic per-frame operation counts for a configured model.
//!
//! Convention: one multiply-accumulate counts as one fused operation
//! (`k^2 * Cin * Cout * Hout * Wout` per convolution); bias adds,
//! activations, pooling, upsampling, and broadcasting count once per
//! output element. Channel concatenation moves memory and counts as zero.

use serde::Serialize;

use crate::error::Result;
use crate::model::{conv_defs, ModelConfig, Spatial, ENCODER_PLAN};

#[derive(Clone, Debug, Serialize)]
pub struct LayerFlops {
    pub name: String,
    /// Multiply-accumulate count (zero for non-convolution layers).
    pub macs: u64,
    /// Per-element operations (bias, activation, pooling, upsampling).
    pub elementwise: u64,
}

impl LayerFlops {
    pub fn total(&self) -> u64 {
        self.macs + self.elementwise
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct FlopReport {
    pub input_size: (usize, usize),
    pub channel_scale: f64,
    pub layers: Vec<LayerFlops>,
}

impl FlopReport {
    pub fn total_macs(&self) -> u64 {
        self.layers.iter().map(|l| l.macs).sum()
    }

    pub fn total_flops(&self) -> u64 {
        self.layers.iter().map(|l| l.total()).sum()
    }
}

/// Counts one forward pass of the configured model on `input` (rows, cols).
pub fn analyze(config: &ModelConfig, input: (usize, usize)) -> Result<FlopReport> {
    let sized = ModelConfig {
        input_size: input,
        ..config.clone()
    };
    sized.validate()?;
    let (rows, cols) = input;
    let area = |divisor: usize| ((rows / divisor) * (cols / divisor)) as u64;
    let mut layers = Vec::new();

    for def in conv_defs(&sized) {
        let out_elems = match def.spatial {
            Spatial::Grid(d) => def.out_c as u64 * area(d),
            Spatial::One => def.out_c as u64,
        };
        let spatial = match def.spatial {
            Spatial::Grid(d) => area(d),
            Spatial::One => 1,
        };
        let macs = (def.k * def.k * def.in_c * def.out_c) as u64 * spatial;
        // bias once per output element, plus the activation when present
        let elementwise = out_elems * if def.relu { 2 } else { 1 };
        layers.push(LayerFlops {
            name: def.name.clone(),
            macs,
            elementwise,
        });
    }

    // Encoder pools: outputs at 1/2, 1/4, then three on the 1/8 grid.
    let pool_channels = [
        sized.scaled(ENCODER_PLAN[1]),
        sized.scaled(ENCODER_PLAN[3]),
        sized.scaled(ENCODER_PLAN[6]),
        sized.scaled(ENCODER_PLAN[9]),
        sized.scaled(ENCODER_PLAN[12]),
    ];
    for (i, (&c, d)) in pool_channels.iter().zip([2, 4, 8, 8, 8]).enumerate() {
        layers.push(LayerFlops {
            name: format!("encoder.pool{}", i + 1),
            macs: 0,
            elementwise: c as u64 * area(d),
        });
    }

    if sized.use_aspp {
        // image-level branch: global pool (per input element read counted
        // as one output write per channel) and the broadcast back.
        let in_c = sized.concat_channels() as u64;
        let branch_c = sized.scaled(sized.aspp_branch_channels) as u64;
        layers.push(LayerFlops {
            name: "aspp.image_pool".into(),
            macs: 0,
            elementwise: in_c,
        });
        layers.push(LayerFlops {
            name: "aspp.image_broadcast".into(),
            macs: 0,
            elementwise: branch_c * area(8),
        });
    }

    // Decoder upsamplings double each spatial dimension: outputs at 1/4,
    // 1/2, and full resolution with the incoming channel count.
    let mut up_in = sized.scaled(sized.aspp_branch_channels);
    for (i, d) in [4usize, 2, 1].iter().enumerate() {
        layers.push(LayerFlops {
            name: format!("decoder.upsample{}", i + 1),
            macs: 0,
            elementwise: up_in as u64 * area(*d),
        });
        up_in = sized.scaled(sized.decoder_channels[i]);
    }

    Ok(FlopReport {
        input_size: input,
        channel_scale: sized.channel_scale,
        layers,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn total_equals_sum_of_layer_entries() {
        let report = analyze(&ModelConfig::default(), (240, 320)).unwrap();
        let by_hand: u64 = report.layers.iter().map(|l| l.macs + l.elementwise).sum();
        assert_eq!(report.total_flops(), by_hand);
        assert!(report.total_macs() < report.total_flops());
    }

    #[test]
    fn conv_macs_match_closed_form_spot_checks() {
        let report = analyze(&ModelConfig::default(), (360, 360)).unwrap();
        let find = |name: &str| {
            report
                .layers
                .iter()
                .find(|l| l.name == name)
                .unwrap_or_else(|| panic!("no layer {name}"))
        };
        // conv1_1: 9 * 3 * 64 MACs per pixel of the full grid
        assert_eq!(find("encoder.conv1_1").macs, 9 * 3 * 64 * 360 * 360);
        // dilated branch: 9 * 1280 * 256 on the 1/8 grid
        assert_eq!(find("aspp.branch_rate8").macs, 9 * 1280 * 256 * 45 * 45);
        // image-level 1x1 conv runs on a single pixel
        assert_eq!(find("aspp.branch_image").macs, 1280 * 256);
    }

    #[test]
    fn flops_scale_linearly_with_pixels() {
        let cfg = ModelConfig::default();
        let a = analyze(&cfg, (240, 320)).unwrap().total_flops() as f64;
        let b = analyze(&cfg, (480, 640)).unwrap().total_flops() as f64;
        // the one-pixel image branch breaks exact linearity by ~1e-6
        assert!((b / a - 4.0).abs() < 1e-3, "ratio {}", b / a);
    }
}
