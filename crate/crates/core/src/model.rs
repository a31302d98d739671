//! The saliency network: a 13-layer dilated encoder, multi-level feature
//! concatenation, a contextual module (pyramid pooling or its single-conv
//! ablation), and a three-block upsampling decoder ending in a linear 3x3
//! convolution.
//!
//! Widths can be scaled down uniformly for desk-scale experiments; at
//! `channel_scale = 1` with both ablation flags on, the full model counts
//! 24,934,209 trainable parameters.

use indexmap::IndexMap;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Graph, VarId};
use crate::tensor::Tensor;

/// Encoder channel plan at full width (thirteen 3x3 conv layers).
pub(crate) const ENCODER_PLAN: [usize; 13] =
    [64, 64, 128, 128, 256, 256, 256, 512, 512, 512, 512, 512, 512];

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ModelConfig {
    /// Uniform width multiplier in (0, 1]; 1 is the full architecture.
    pub channel_scale: f64,
    /// Input (rows, cols); both must be divisible by 8 and at least 16.
    pub input_size: (usize, usize),
    pub use_aspp: bool,
    pub use_multilevel_concat: bool,
    /// Dilation rates of the parallel 3x3 context branches.
    pub aspp_rates: Vec<usize>,
    /// Filters per context branch (and of the fused context output).
    pub aspp_branch_channels: usize,
    /// Channels of the three decoder blocks.
    pub decoder_channels: Vec<usize>,
    pub seed: u64,
}

impl Default for ModelConfig {
    fn default() -> ModelConfig {
        ModelConfig {
            channel_scale: 1.0,
            input_size: (240, 320),
            use_aspp: true,
            use_multilevel_concat: true,
            aspp_rates: vec![4, 8, 12],
            aspp_branch_channels: 256,
            decoder_channels: vec![128, 64, 32],
            seed: 0,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.channel_scale > 0.0 && self.channel_scale <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "channel_scale {} outside (0, 1]",
                self.channel_scale
            )));
        }
        let mut widths: Vec<usize> = vec![64, 128, 256, 512, self.aspp_branch_channels];
        widths.extend(&self.decoder_channels);
        for &w in &widths {
            let scaled = self.channel_scale * w as f64;
            if scaled.fract() != 0.0 || scaled < 1.0 {
                return Err(Error::InvalidConfig(format!(
                    "channel_scale {} times width {} is not a positive integer",
                    self.channel_scale, w
                )));
            }
        }
        let (rows, cols) = self.input_size;
        if rows % 8 != 0 || cols % 8 != 0 {
            return Err(Error::InvalidConfig(format!(
                "input size {}x{} not divisible by 8",
                rows, cols
            )));
        }
        if rows < 16 || cols < 16 {
            return Err(Error::InvalidConfig(format!(
                "input size {}x{} too small: the 1/8 grid must keep extent >= 2",
                rows, cols
            )));
        }
        if self.aspp_rates.is_empty() || self.aspp_rates.iter().any(|&r| r == 0) {
            return Err(Error::InvalidConfig("aspp_rates must be positive".into()));
        }
        if self.decoder_channels.len() != 3 {
            return Err(Error::InvalidConfig(
                "decoder needs exactly three upsampling blocks".into(),
            ));
        }
        Ok(())
    }

    pub fn scaled(&self, width: usize) -> usize {
        (self.channel_scale * width as f64).round() as usize
    }

    /// Channels entering the contextual module: the three encoder taps
    /// concatenated, or the last tap alone when concatenation is ablated.
    pub fn concat_channels(&self) -> usize {
        if self.use_multilevel_concat {
            self.scaled(256) + self.scaled(512) + self.scaled(512)
        } else {
            self.scaled(512)
        }
    }

    /// Number of parallel context branches (1x1 + dilated + image-level).
    pub fn context_branches(&self) -> usize {
        self.aspp_rates.len() + 2
    }
}

/// Where a convolution runs, for operation accounting.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum Spatial {
    /// On the input grid divided by this factor.
    Grid(usize),
    /// On a single pooled pixel.
    One,
}

/// One convolution of the architecture: its parameter shapes and placement.
#[derive(Clone, Debug)]
pub(crate) struct ConvDef {
    pub name: String,
    pub in_c: usize,
    pub out_c: usize,
    pub k: usize,
    pub dilation: usize,
    pub spatial: Spatial,
    pub relu: bool,
}

impl ConvDef {
    pub fn parameter_count(&self) -> usize {
        self.k * self.k * self.in_c * self.out_c + self.out_c
    }
}

/// Every convolution of the configured variant, in forward order.
pub(crate) fn conv_defs(config: &ModelConfig) -> Vec<ConvDef> {
    let s = |w| config.scaled(w);
    let mut defs = Vec::new();
    let mut push = |name: &str, in_c, out_c, k, dilation, spatial, relu| {
        defs.push(ConvDef {
            name: name.to_string(),
            in_c,
            out_c,
            k,
            dilation,
            spatial,
            relu,
        })
    };

    // Encoder: blocks of (2, 2, 3, 3, 3) convs with pools in between. The
    // last two pools keep stride 1, so blocks 4 and 5 stay on the 1/8 grid
    // and block 5 dilates by 2 to compensate.
    let mut in_c = 3;
    let block_of = |layer: usize| match layer {
        0 | 1 => 1,
        2 | 3 => 2,
        4..=6 => 3,
        7..=9 => 4,
        _ => 5,
    };
    let mut index_in_block = 0;
    let mut prev_block = 1;
    for (layer, &width) in ENCODER_PLAN.iter().enumerate() {
        let block = block_of(layer);
        if block != prev_block {
            index_in_block = 0;
            prev_block = block;
        }
        index_in_block += 1;
        let divisor = [1, 2, 4, 8, 8][block - 1];
        let dilation = if block == 5 { 2 } else { 1 };
        let out_c = s(width);
        push(
            &format!("encoder.conv{}_{}", block, index_in_block),
            in_c,
            out_c,
            3,
            dilation,
            Spatial::Grid(divisor),
            true,
        );
        in_c = out_c;
    }

    let concat_c = config.concat_channels();
    let branch_c = s(config.aspp_branch_channels);
    if config.use_aspp {
        push("aspp.branch_1x1", concat_c, branch_c, 1, 1, Spatial::Grid(8), true);
        for &rate in &config.aspp_rates {
            push(
                &format!("aspp.branch_rate{rate}"),
                concat_c,
                branch_c,
                3,
                rate,
                Spatial::Grid(8),
                true,
            );
        }
        push("aspp.branch_image", concat_c, branch_c, 1, 1, Spatial::One, true);
        push(
            "aspp.fuse",
            config.context_branches() * branch_c,
            branch_c,
            1,
            1,
            Spatial::Grid(8),
            true,
        );
    } else {
        // Ablation: a single 3x3 convolution producing as many maps as all
        // parallel branches combined, then the same 1x1 fusion.
        let wide = config.context_branches() * branch_c;
        push("context.conv", concat_c, wide, 3, 1, Spatial::Grid(8), true);
        push("context.fuse", wide, branch_c, 1, 1, Spatial::Grid(8), true);
    }

    let mut in_c = branch_c;
    for (i, &width) in config.decoder_channels.iter().enumerate() {
        let out_c = s(width);
        let divisor = [4, 2, 1][i];
        push(
            &format!("decoder.block{}.conv", i + 1),
            in_c,
            out_c,
            3,
            1,
            Spatial::Grid(divisor),
            true,
        );
        in_c = out_c;
    }
    // Final linear layer: the only convolution without an activation.
    push("decoder.output", in_c, 1, 3, 1, Spatial::Grid(1), false);

    defs
}

/// A built network: named parameter tensors plus the configuration that
/// wires them together. Immutable models are cheap to clone and safe to
/// share across threads for inference.
#[derive(Clone)]
pub struct Model {
    config: ModelConfig,
    params: IndexMap<String, Tensor>,
}

/// A recorded forward run: the graph, the raw (pre-normalization) output,
/// and the ids under which the parameters were registered.
pub struct ForwardPass {
    pub graph: Graph,
    pub input: VarId,
    pub output: VarId,
    pub param_ids: IndexMap<String, VarId>,
}

impl Model {
    /// Builds the parameter set with zeroed tensors.
    pub fn build(config: ModelConfig) -> Result<Model> {
        config.validate()?;
        let mut params = IndexMap::new();
        for def in conv_defs(&config) {
            params.insert(
                format!("{}.weight", def.name),
                Tensor::zeros(&[def.out_c, def.in_c, def.k, def.k]),
            );
            params.insert(format!("{}.bias", def.name), Tensor::zeros(&[def.out_c]));
        }
        Ok(Model { config, params })
    }

    /// Builds and initializes with the config seed.
    pub fn new(config: ModelConfig) -> Result<Model> {
        let seed = config.seed;
        let mut model = Model::build(config)?;
        model.xavier_init(seed);
        Ok(model)
    }

    /// Uniform initialization on +-sqrt(6 / (fan_in + fan_out)) for every
    /// weight, zero biases. Deterministic per seed.
    pub fn xavier_init(&mut self, seed: u64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for def in conv_defs(&self.config) {
            let fan_in = (def.in_c * def.k * def.k) as f64;
            let fan_out = (def.out_c * def.k * def.k) as f64;
            let bound = (6.0 / (fan_in + fan_out)).sqrt();
            let weight = self.params.get_mut(&format!("{}.weight", def.name)).unwrap();
            for v in weight.data_mut() {
                *v = rng.random_range(-bound..bound);
            }
            let bias = self.params.get_mut(&format!("{}.bias", def.name)).unwrap();
            bias.data_mut().fill(0.0);
        }
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn params(&self) -> &IndexMap<String, Tensor> {
        &self.params
    }

    pub fn param_mut(&mut self, name: &str) -> Option<&mut Tensor> {
        self.params.get_mut(name)
    }

    pub(crate) fn set_params(&mut self, params: IndexMap<String, Tensor>) {
        debug_assert_eq!(params.len(), self.params.len());
        self.params = params;
    }

    pub fn count_parameters(&self) -> usize {
        self.params.values().map(Tensor::numel).sum()
    }

    /// Parameter subtotals keyed by the first name component
    /// (encoder / aspp or context / decoder), in definition order.
    pub fn parameter_groups(&self) -> Vec<(String, usize)> {
        let mut groups: Vec<(String, usize)> = Vec::new();
        for (name, tensor) in &self.params {
            let group = name.split('.').next().unwrap().to_string();
            match groups.last_mut() {
                Some((g, n)) if *g == group => *n += tensor.numel(),
                _ => groups.push((group, tensor.numel())),
            }
        }
        groups
    }

    /// Runs the network on `image` (batch x 3 x rows x cols) and returns the
    /// raw one-channel map at input resolution.
    pub fn forward(&self, image: &Tensor) -> Result<Tensor> {
        let mut pass = self.forward_pass(image, false)?;
        Ok(pass.graph.take(pass.output))
    }

    /// Records a forward run, optionally registering every parameter for
    /// gradient tracking.
    pub fn forward_pass(&self, image: &Tensor, track_grads: bool) -> Result<ForwardPass> {
        let [_, c, h, w] = image.dims4()?;
        if c != 3 || (h, w) != self.config.input_size {
            return Err(Error::ShapeMismatch {
                op: "forward",
                detail: format!(
                    "image shape {:?} does not match configured 3x{}x{}",
                    image.shape(),
                    self.config.input_size.0,
                    self.config.input_size.1
                ),
            });
        }
        let mut graph = Graph::new();
        let mut param_ids = IndexMap::new();
        for (name, tensor) in &self.params {
            let mut t = tensor.clone();
            t.requires_grad = track_grads;
            t.zero_grad();
            param_ids.insert(name.clone(), graph.leaf(t));
        }
        let input = graph.leaf(image.clone());
        let output = self.wire(&mut graph, input, &param_ids)?;
        Ok(ForwardPass {
            graph,
            input,
            output,
            param_ids,
        })
    }

    fn conv(
        &self,
        g: &mut Graph,
        ids: &IndexMap<String, VarId>,
        name: &str,
        x: VarId,
        dilation: usize,
        relu: bool,
    ) -> Result<VarId> {
        let w = ids[&format!("{name}.weight")];
        let b = ids[&format!("{name}.bias")];
        let y = g.conv2d(x, w, b, 1, dilation)?;
        if relu {
            g.relu(y)
        } else {
            Ok(y)
        }
    }

    fn wire(&self, g: &mut Graph, image: VarId, ids: &IndexMap<String, VarId>) -> Result<VarId> {
        let (tap3, tap4, tap5) = self.wire_encoder(g, image, ids)?;
        let features = if self.config.use_multilevel_concat {
            g.concat_channels(&[tap3, tap4, tap5])?
        } else {
            tap5
        };
        let context = if self.config.use_aspp {
            self.wire_aspp(g, features, ids)?
        } else {
            let wide = self.conv(g, ids, "context.conv", features, 1, true)?;
            self.conv(g, ids, "context.fuse", wide, 1, true)?
        };
        self.wire_decoder(g, context, ids)
    }

    /// Encoder with stride removed from the last two pools: taps come out at
    /// 1/8 of the input resolution in channels scale*(256, 512, 512).
    fn wire_encoder(
        &self,
        g: &mut Graph,
        image: VarId,
        ids: &IndexMap<String, VarId>,
    ) -> Result<(VarId, VarId, VarId)> {
        let mut x = image;
        x = self.conv(g, ids, "encoder.conv1_1", x, 1, true)?;
        x = self.conv(g, ids, "encoder.conv1_2", x, 1, true)?;
        x = g.max_pool(x, 2, 2)?;
        x = self.conv(g, ids, "encoder.conv2_1", x, 1, true)?;
        x = self.conv(g, ids, "encoder.conv2_2", x, 1, true)?;
        x = g.max_pool(x, 2, 2)?;
        x = self.conv(g, ids, "encoder.conv3_1", x, 1, true)?;
        x = self.conv(g, ids, "encoder.conv3_2", x, 1, true)?;
        x = self.conv(g, ids, "encoder.conv3_3", x, 1, true)?;
        let tap3 = g.max_pool(x, 2, 2)?;
        x = tap3;
        x = self.conv(g, ids, "encoder.conv4_1", x, 1, true)?;
        x = self.conv(g, ids, "encoder.conv4_2", x, 1, true)?;
        x = self.conv(g, ids, "encoder.conv4_3", x, 1, true)?;
        let tap4 = g.max_pool(x, 2, 1)?;
        x = tap4;
        x = self.conv(g, ids, "encoder.conv5_1", x, 2, true)?;
        x = self.conv(g, ids, "encoder.conv5_2", x, 2, true)?;
        x = self.conv(g, ids, "encoder.conv5_3", x, 2, true)?;
        let tap5 = g.max_pool(x, 2, 1)?;
        Ok((tap3, tap4, tap5))
    }

    /// Parallel context branches: a 1x1 conv, one 3x3 conv per dilation
    /// rate, and a global-average image branch broadcast back to the grid;
    /// concatenated and fused down by a 1x1 convolution.
    fn wire_aspp(
        &self,
        g: &mut Graph,
        features: VarId,
        ids: &IndexMap<String, VarId>,
    ) -> Result<VarId> {
        let [_, _, h, w] = g.tensor(features).dims4()?;
        let mut branches = Vec::new();
        branches.push(self.conv(g, ids, "aspp.branch_1x1", features, 1, true)?);
        for &rate in &self.config.aspp_rates {
            branches.push(self.conv(
                g,
                ids,
                &format!("aspp.branch_rate{rate}"),
                features,
                rate,
                true,
            )?);
        }
        let pooled = g.global_avg_pool(features)?;
        let image = self.conv(g, ids, "aspp.branch_image", pooled, 1, true)?;
        branches.push(g.broadcast_spatial(image, h, w)?);
        let cat = g.concat_channels(&branches)?;
        self.conv(g, ids, "aspp.fuse", cat, 1, true)
    }

    /// Three (bilinear x2, 3x3 conv, relu) blocks, then the linear 3x3
    /// output convolution. Restores the input resolution.
    fn wire_decoder(
        &self,
        g: &mut Graph,
        context: VarId,
        ids: &IndexMap<String, VarId>,
    ) -> Result<VarId> {
        let mut x = context;
        for i in 1..=self.config.decoder_channels.len() {
            x = g.bilinear_upsample_x2(x)?;
            x = self.conv(g, ids, &format!("decoder.block{i}.conv"), x, 1, true)?;
        }
        self.conv(g, ids, "decoder.output", x, 1, false)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_config() -> ModelConfig {
        ModelConfig {
            channel_scale: 0.125,
            input_size: (24, 32),
            seed: 7,
            ..ModelConfig::default()
        }
    }

    #[test]
    fn full_scale_parameter_count_is_exact() {
        let model = Model::build(ModelConfig::default()).unwrap();
        assert_eq!(model.count_parameters(), 24_934_209);
        let groups = model.parameter_groups();
        assert_eq!(
            groups,
            vec![
                ("encoder".to_string(), 14_714_688),
                ("aspp".to_string(), 9_831_936),
                ("decoder".to_string(), 387_585),
            ]
        );
    }

    #[test]
    fn ablation_counts_match_closed_form() {
        // Per branch: k^2 * Cin * Cout + Cout.
        let aspp: usize = 327_936 + 3 * 2_949_376 + 327_936 + 327_936;
        assert_eq!(aspp, 9_831_936);
        let no_aspp = Model::build(ModelConfig {
            use_aspp: false,
            ..ModelConfig::default()
        })
        .unwrap();
        assert_eq!(no_aspp.count_parameters(), 30_177_089);
        let context: usize = 14_746_880 + 327_936;
        assert_eq!(context, 15_074_816);
        assert!(no_aspp.count_parameters() > 24_934_209);

        let no_concat = Model::build(ModelConfig {
            use_multilevel_concat: false,
            ..ModelConfig::default()
        })
        .unwrap();
        assert!(no_concat.count_parameters() < 24_934_209);
    }

    #[test]
    fn layer_plan_agrees_with_instantiated_parameters() {
        for cfg in [
            ModelConfig::default(),
            ModelConfig {
                use_aspp: false,
                ..ModelConfig::default()
            },
            ModelConfig {
                use_multilevel_concat: false,
                channel_scale: 0.25,
                ..ModelConfig::default()
            },
        ] {
            let model = Model::build(cfg.clone()).unwrap();
            let defs = conv_defs(&cfg);
            let closed_form: usize = defs.iter().map(ConvDef::parameter_count).sum();
            assert_eq!(closed_form, model.count_parameters());
            for def in &defs {
                let w = &model.params()[&format!("{}.weight", def.name)];
                assert_eq!(w.shape(), &[def.out_c, def.in_c, def.k, def.k]);
                // encoder block 5 is the only dilated part outside the
                // context branches
                if def.name.starts_with("encoder.conv5") {
                    assert_eq!(def.dilation, 2);
                } else if def.name.starts_with("encoder") {
                    assert_eq!(def.dilation, 1);
                }
            }
        }
    }

    #[test]
    fn encoder_alone_matches_vgg_conv_stack() {
        let model = Model::build(ModelConfig::default()).unwrap();
        let encoder: usize = model
            .params()
            .iter()
            .filter(|(n, _)| n.starts_with("encoder."))
            .map(|(_, t)| t.numel())
            .sum();
        assert_eq!(encoder, 14_714_688);
        let decoder: usize = 295_040 + 73_792 + 18_464 + 289;
        assert_eq!(decoder, 387_585);
    }

    #[test]
    fn variant_changes_only_the_context_subgraph() {
        let base = Model::build(ModelConfig::default()).unwrap();
        let no_aspp = Model::build(ModelConfig {
            use_aspp: false,
            ..ModelConfig::default()
        })
        .unwrap();
        let outside = |m: &Model| {
            m.params()
                .iter()
                .filter(|(n, _)| !n.starts_with("aspp.") && !n.starts_with("context."))
                .map(|(n, t)| (n.clone(), t.shape().to_vec()))
                .collect::<Vec<_>>()
        };
        assert_eq!(outside(&base), outside(&no_aspp));

        let no_concat = Model::build(ModelConfig {
            use_multilevel_concat: false,
            ..ModelConfig::default()
        })
        .unwrap();
        let names = |m: &Model| m.params().keys().cloned().collect::<Vec<_>>();
        assert_eq!(names(&base), names(&no_concat));
    }

    #[test]
    fn scaled_tap_channels() {
        let cfg = tiny_config();
        assert_eq!(cfg.scaled(256), 32);
        assert_eq!(cfg.scaled(512), 64);
        assert_eq!(cfg.concat_channels(), 160);
    }

    #[test]
    fn config_validation_rejects_bad_sizes() {
        let mut cfg = ModelConfig::default();
        cfg.input_size = (241, 320);
        assert!(cfg.validate().is_err());
        cfg.input_size = (8, 8);
        assert!(cfg.validate().is_err());
        cfg.input_size = (16, 16);
        assert!(cfg.validate().is_ok());
        cfg.channel_scale = 0.3; // 0.3 * 64 = 19.2
        assert!(cfg.validate().is_err());
        cfg.channel_scale = 0.0;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn taps_share_the_eighth_grid_and_output_restores_input() {
        let model = Model::new(tiny_config()).unwrap();
        let image = Tensor::zeros(&[1, 3, 24, 32]);
        let out = model.forward(&image).unwrap();
        assert_eq!(out.shape(), &[1, 1, 24, 32]);
    }

    #[test]
    fn forward_is_deterministic() {
        let model = Model::new(tiny_config()).unwrap();
        let data: Vec<f64> = (0..3 * 24 * 32).map(|i| (i % 17) as f64 / 17.0).collect();
        let image = Tensor::from_vec(&[1, 3, 24, 32], data).unwrap();
        let a = model.forward(&image).unwrap();
        let b = model.forward(&image).unwrap();
        assert_eq!(a.data(), b.data());
    }

    #[test]
    fn xavier_respects_bound_variance_and_seed() {
        let mut model = Model::build(ModelConfig {
            channel_scale: 1.0,
            ..ModelConfig::default()
        })
        .unwrap();
        model.xavier_init(13);
        // 3x3 x 256 -> 256 weight: variance should be near 2/(fan_in+fan_out)
        let w = &model.params()["encoder.conv3_2.weight"];
        let fan = (9 * 256 + 9 * 256) as f64;
        let bound = (6.0 / fan).sqrt();
        assert!(w.data().iter().all(|v| v.abs() < bound));
        let n = w.numel() as f64;
        let mean: f64 = w.data().iter().sum::<f64>() / n;
        let var: f64 = w.data().iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        let expect = 2.0 / fan;
        assert!((var - expect).abs() < 0.05 * expect, "var {var} vs {expect}");

        let mut same = Model::build(model.config.clone()).unwrap();
        same.xavier_init(13);
        assert_eq!(
            same.params()["decoder.output.weight"].data(),
            model.params()["decoder.output.weight"].data()
        );
        let mut other = Model::build(model.config.clone()).unwrap();
        other.xavier_init(14);
        assert_ne!(
            other.params()["decoder.output.weight"].data(),
            model.params()["decoder.output.weight"].data()
        );
    }

    #[test]
    fn perturbation_footprint_bounded_without_aspp_global_with() {
        // The encoder's receptive field is roughly 230 pixels wide, so the
        // map must be larger than that for the footprint to be visible.
        // A 1/32-width model keeps the 240x320 forward cheap.
        let (h, w) = (240, 320);
        let run = |use_aspp: bool, poke: bool| {
            let cfg = ModelConfig {
                channel_scale: 1.0 / 32.0,
                input_size: (h, w),
                use_aspp,
                seed: 3,
                ..ModelConfig::default()
            };
            let model = Model::new(cfg).unwrap();
            let mut data = vec![0.1; 3 * h * w];
            if poke {
                data[0] = 1.7; // top-left corner pixel, channel 0
            }
            let image = Tensor::from_vec(&[1, 3, h, w], data).unwrap();
            model.forward(&image).unwrap().data().to_vec()
        };
        // Without global pooling the footprint stays strictly inside the map
        // and in particular never reaches the opposite corner.
        let (clean, dirty) = (run(false, false), run(false, true));
        let changed = clean.iter().zip(&dirty).filter(|(a, b)| a != b).count();
        assert!(changed > 0);
        assert!(changed < h * w, "footprint covered the whole map: {changed}");
        assert_eq!(clean[h * w - 1], dirty[h * w - 1]);

        // The image-level pooling branch makes every output depend on every
        // input: the far corner moves too.
        let (clean, dirty) = (run(true, false), run(true, true));
        assert_ne!(clean[h * w - 1], dirty[h * w - 1]);
    }
}
