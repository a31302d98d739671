//! Reverse-mode autodiff over a flat operation tape.
//!
//! A [`Graph`] owns every tensor produced during a forward pass. Ops append
//! nodes in topological order (inputs always precede outputs), so backward
//! is a single reverse sweep. Gradients accumulate into each requires-grad
//! tensor and persist across `backward` calls until cleared.

use crate::error::{Error, Result};
use crate::ops;
use crate::tensor::Tensor;

/// Handle to a tensor stored in a [`Graph`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct VarId(usize);

enum Op {
    Leaf,
    Conv2d {
        input: VarId,
        weight: VarId,
        bias: VarId,
        stride: usize,
        dilation: usize,
    },
    MaxPool {
        input: VarId,
        argmax: Vec<u32>,
    },
    Relu {
        input: VarId,
    },
    BilinearUpsampleX2 {
        input: VarId,
    },
    GlobalAvgPool {
        input: VarId,
    },
    BroadcastSpatial {
        input: VarId,
    },
    ConcatChannels {
        inputs: Vec<VarId>,
    },
    Sum {
        input: VarId,
    },
    SoftmaxNorm {
        input: VarId,
    },
    KldLoss {
        prediction: VarId,
        target: VarId,
        eps: f64,
    },
}

struct Node {
    tensor: Tensor,
    op: Op,
}

#[derive(Default)]
pub struct Graph {
    nodes: Vec<Node>,
}

impl Graph {
    pub fn new() -> Graph {
        Graph::default()
    }

    /// Inserts a tensor as a leaf node. Cheap for shared-storage tensors.
    pub fn leaf(&mut self, tensor: Tensor) -> VarId {
        self.push(tensor, Op::Leaf)
    }

    pub fn tensor(&self, id: VarId) -> &Tensor {
        &self.nodes[id.0].tensor
    }

    /// Gradient accumulated on a node, if any backward pass reached it.
    pub fn grad(&self, id: VarId) -> Option<&[f64]> {
        self.nodes[id.0].tensor.grad()
    }

    /// Moves a tensor out of the graph (with its accumulated gradient).
    pub fn take(&mut self, id: VarId) -> Tensor {
        std::mem::take(&mut self.nodes[id.0].tensor)
    }

    pub fn clear_grads(&mut self) {
        for node in &mut self.nodes {
            node.tensor.zero_grad();
        }
    }

    fn push(&mut self, tensor: Tensor, op: Op) -> VarId {
        self.nodes.push(Node { tensor, op });
        VarId(self.nodes.len() - 1)
    }

    fn check_edge(&self, input: VarId) -> Result<()> {
        if input.0 >= self.nodes.len() {
            return Err(Error::GraphCycle { node: input.0 });
        }
        Ok(())
    }

    pub fn conv2d(
        &mut self,
        input: VarId,
        weight: VarId,
        bias: VarId,
        stride: usize,
        dilation: usize,
    ) -> Result<VarId> {
        for id in [input, weight, bias] {
            self.check_edge(id)?;
        }
        assert!(stride >= 1 && dilation >= 1, "stride/dilation must be positive");
        let ishape = self.tensor(input).dims4()?;
        let wshape = self.tensor(weight).dims4()?;
        if ishape[1] != wshape[1] {
            return Err(Error::ShapeMismatch {
                op: "conv2d",
                detail: format!(
                    "input channels {} != weight in-channels {} (input {:?}, weight {:?})",
                    ishape[1], wshape[1], ishape, wshape
                ),
            });
        }
        let bias_t = self.tensor(bias);
        if bias_t.shape() != [wshape[0]] {
            return Err(Error::ShapeMismatch {
                op: "conv2d",
                detail: format!(
                    "bias shape {:?} != out-channels [{}]",
                    bias_t.shape(),
                    wshape[0]
                ),
            });
        }
        let (out, oshape) = ops::conv2d_forward(
            self.tensor(input).data(),
            ishape,
            self.tensor(weight).data(),
            wshape,
            self.tensor(bias).data(),
            stride,
            dilation,
        );
        let tensor = Tensor::from_vec(&oshape, out)?;
        Ok(self.push(
            tensor,
            Op::Conv2d {
                input,
                weight,
                bias,
                stride,
                dilation,
            },
        ))
    }

    pub fn max_pool(&mut self, input: VarId, window: usize, stride: usize) -> Result<VarId> {
        self.check_edge(input)?;
        let ishape = self.tensor(input).dims4()?;
        let [_, _, h, w] = ishape;
        if h < window || w < window {
            return Err(Error::WindowTooLarge {
                window,
                extent: h.min(w),
            });
        }
        let (out, oshape, argmax) =
            ops::max_pool_forward(self.tensor(input).data(), ishape, window, stride);
        let tensor = Tensor::from_vec(&oshape, out)?;
        Ok(self.push(tensor, Op::MaxPool { input, argmax }))
    }

    pub fn relu(&mut self, input: VarId) -> Result<VarId> {
        self.check_edge(input)?;
        let out = ops::relu_forward(self.tensor(input).data());
        let tensor = Tensor::from_vec(self.tensor(input).shape(), out)?;
        Ok(self.push(tensor, Op::Relu { input }))
    }

    pub fn bilinear_upsample_x2(&mut self, input: VarId) -> Result<VarId> {
        self.check_edge(input)?;
        let ishape = self.tensor(input).dims4()?;
        let (out, oshape) = ops::bilinear_x2_forward(self.tensor(input).data(), ishape);
        let tensor = Tensor::from_vec(&oshape, out)?;
        Ok(self.push(tensor, Op::BilinearUpsampleX2 { input }))
    }

    pub fn global_avg_pool(&mut self, input: VarId) -> Result<VarId> {
        self.check_edge(input)?;
        let ishape = self.tensor(input).dims4()?;
        let (out, oshape) = ops::global_avg_pool_forward(self.tensor(input).data(), ishape);
        let tensor = Tensor::from_vec(&oshape, out)?;
        Ok(self.push(tensor, Op::GlobalAvgPool { input }))
    }

    /// Tiles a pooled `[B, C, 1, 1]` tensor out to `[B, C, h, w]`. This is
    /// how the image-level context branch rejoins the feature grid; for a
    /// one-pixel source, constant broadcast and bilinear scaling coincide.
    pub fn broadcast_spatial(&mut self, input: VarId, h: usize, w: usize) -> Result<VarId> {
        self.check_edge(input)?;
        let [b, c, ih, iw] = self.tensor(input).dims4()?;
        if (ih, iw) != (1, 1) {
            return Err(Error::ShapeMismatch {
                op: "broadcast_spatial",
                detail: format!("source spatial size {}x{} must be 1x1", ih, iw),
            });
        }
        let src = self.tensor(input).data();
        let mut out = vec![0.0; b * c * h * w];
        for bc in 0..b * c {
            out[bc * h * w..(bc + 1) * h * w].fill(src[bc]);
        }
        let tensor = Tensor::from_vec(&[b, c, h, w], out)?;
        Ok(self.push(tensor, Op::BroadcastSpatial { input }))
    }

    pub fn concat_channels(&mut self, inputs: &[VarId]) -> Result<VarId> {
        assert!(!inputs.is_empty(), "concat of zero tensors");
        let mut shapes = Vec::with_capacity(inputs.len());
        for &id in inputs {
            self.check_edge(id)?;
            shapes.push(self.tensor(id).dims4()?);
        }
        let [b, _, h, w] = shapes[0];
        for (k, s) in shapes.iter().enumerate() {
            if s[0] != b || s[2] != h || s[3] != w {
                return Err(Error::ShapeMismatch {
                    op: "concat_channels",
                    detail: format!(
                        "tensor {} has shape {:?}, expected batch {} and spatial {}x{} \
                         (first tensor {:?})",
                        k, s, b, h, w, shapes[0]
                    ),
                });
            }
        }
        let ctotal: usize = shapes.iter().map(|s| s[1]).sum();
        let mut out = vec![0.0; b * ctotal * h * w];
        for bi in 0..b {
            let mut offset = 0;
            for (&id, s) in inputs.iter().zip(&shapes) {
                let block = s[1] * h * w;
                let src = &self.tensor(id).data()[bi * block..(bi + 1) * block];
                let dst_start = (bi * ctotal + offset) * h * w;
                out[dst_start..dst_start + block].copy_from_slice(src);
                offset += s[1];
            }
        }
        let tensor = Tensor::from_vec(&[b, ctotal, h, w], out)?;
        Ok(self.push(
            tensor,
            Op::ConcatChannels {
                inputs: inputs.to_vec(),
            },
        ))
    }

    /// Reduces a tensor to the scalar sum of its elements.
    pub fn sum(&mut self, input: VarId) -> Result<VarId> {
        self.check_edge(input)?;
        let total: f64 = self.tensor(input).data().iter().sum();
        Ok(self.push(Tensor::scalar(total), Op::Sum { input }))
    }

    /// Per-image spatial softmax: non-negative output with unit sum.
    pub fn softmax_norm(&mut self, input: VarId) -> Result<VarId> {
        self.check_edge(input)?;
        let [b, _, _, _] = self.tensor(input).dims4()?;
        let out = ops::softmax_forward(self.tensor(input).data(), b);
        let tensor = Tensor::from_vec(self.tensor(input).shape(), out)?;
        Ok(self.push(tensor, Op::SoftmaxNorm { input }))
    }

    /// Divergence loss of a predicted distribution against a target
    /// distribution, averaged over the batch. Differentiable in the
    /// prediction only; the target acts as a constant.
    pub fn kld_loss(&mut self, prediction: VarId, target: VarId, eps: f64) -> Result<VarId> {
        self.check_edge(prediction)?;
        self.check_edge(target)?;
        let pshape = self.tensor(prediction).shape().to_vec();
        let qshape = self.tensor(target).shape();
        if pshape != qshape {
            return Err(Error::ShapeMismatch {
                op: "kld_loss",
                detail: format!("prediction {:?} vs target {:?}", pshape, qshape),
            });
        }
        let [b, _, _, _] = self.tensor(prediction).dims4()?;
        let loss = ops::kld_loss_forward(
            self.tensor(prediction).data(),
            self.tensor(target).data(),
            eps,
            b,
        );
        Ok(self.push(
            Tensor::scalar(loss),
            Op::KldLoss {
                prediction,
                target,
                eps,
            },
        ))
    }

    /// Reverse sweep from a scalar loss. Every requires-grad tensor reachable
    /// from the loss receives `d loss / d tensor`, added on top of whatever
    /// gradient it already holds.
    pub fn backward(&mut self, loss: VarId) -> Result<()> {
        self.check_edge(loss)?;
        if self.tensor(loss).numel() != 1 {
            return Err(Error::NonScalarLoss {
                shape: self.tensor(loss).shape().to_vec(),
            });
        }
        // Scratch gradients per node for this sweep.
        let mut grads: Vec<Option<Vec<f64>>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[loss.0] = Some(vec![1.0]);

        for idx in (0..=loss.0).rev() {
            let Some(gout) = grads[idx].take() else {
                continue;
            };
            // Reverse topological order: every consumer has contributed by
            // now, so the scratch gradient is final for this node.
            if self.nodes[idx].tensor.requires_grad {
                self.nodes[idx].tensor.accumulate_grad(&gout);
            }
            match &self.nodes[idx].op {
                Op::Leaf => {}
                Op::Conv2d {
                    input,
                    weight,
                    bias,
                    stride,
                    dilation,
                } => {
                    let (input, weight, bias) = (*input, *weight, *bias);
                    self.check_topological(idx, &[input, weight, bias])?;
                    let (gi, gw, gb) = ops::conv2d_backward(
                        &gout,
                        self.nodes[idx].tensor.dims4()?,
                        self.tensor(input).data(),
                        self.tensor(input).dims4()?,
                        self.tensor(weight).data(),
                        self.tensor(weight).dims4()?,
                        *stride,
                        *dilation,
                    );
                    accumulate(&mut grads, input, gi);
                    accumulate(&mut grads, weight, gw);
                    accumulate(&mut grads, bias, gb);
                }
                Op::MaxPool { input, argmax } => {
                    let input = *input;
                    let gi = ops::max_pool_backward(&gout, argmax, self.tensor(input).numel());
                    self.check_topological(idx, &[input])?;
                    accumulate(&mut grads, input, gi);
                }
                Op::Relu { input } => {
                    let input = *input;
                    self.check_topological(idx, &[input])?;
                    let gi = ops::relu_backward(&gout, self.tensor(input).data());
                    accumulate(&mut grads, input, gi);
                }
                Op::BilinearUpsampleX2 { input } => {
                    let input = *input;
                    self.check_topological(idx, &[input])?;
                    let gi = ops::bilinear_x2_backward(&gout, self.tensor(input).dims4()?);
                    accumulate(&mut grads, input, gi);
                }
                Op::GlobalAvgPool { input } => {
                    let input = *input;
                    self.check_topological(idx, &[input])?;
                    let gi = ops::global_avg_pool_backward(&gout, self.tensor(input).dims4()?);
                    accumulate(&mut grads, input, gi);
                }
                Op::BroadcastSpatial { input } => {
                    let input = *input;
                    self.check_topological(idx, &[input])?;
                    let [b, c, h, w] = self.nodes[idx].tensor.dims4()?;
                    let gi = (0..b * c)
                        .map(|bc| gout[bc * h * w..(bc + 1) * h * w].iter().sum())
                        .collect();
                    accumulate(&mut grads, input, gi);
                }
                Op::ConcatChannels { inputs } => {
                    let inputs = inputs.clone();
                    self.check_topological(idx, &inputs)?;
                    let [b, ctotal, h, w] = self.nodes[idx].tensor.dims4()?;
                    let mut offset = 0;
                    for &id in &inputs {
                        let [_, ci, _, _] = self.tensor(id).dims4()?;
                        let block = ci * h * w;
                        let mut gi = vec![0.0; b * block];
                        for bi in 0..b {
                            let src = (bi * ctotal + offset) * h * w;
                            gi[bi * block..(bi + 1) * block]
                                .copy_from_slice(&gout[src..src + block]);
                        }
                        accumulate(&mut grads, id, gi);
                        offset += ci;
                    }
                }
                Op::Sum { input } => {
                    let input = *input;
                    self.check_topological(idx, &[input])?;
                    let gi = vec![gout[0]; self.tensor(input).numel()];
                    accumulate(&mut grads, input, gi);
                }
                Op::SoftmaxNorm { input } => {
                    let input = *input;
                    self.check_topological(idx, &[input])?;
                    let [b, _, _, _] = self.nodes[idx].tensor.dims4()?;
                    let gi = ops::softmax_backward(&gout, self.nodes[idx].tensor.data(), b);
                    accumulate(&mut grads, input, gi);
                }
                Op::KldLoss {
                    prediction,
                    target,
                    eps,
                } => {
                    let (prediction, target) = (*prediction, *target);
                    self.check_topological(idx, &[prediction, target])?;
                    let [b, _, _, _] = self.tensor(prediction).dims4()?;
                    let gi = ops::kld_loss_backward(
                        gout[0],
                        self.tensor(prediction).data(),
                        self.tensor(target).data(),
                        *eps,
                        b,
                    );
                    accumulate(&mut grads, prediction, gi);
                }
            }
        }
        Ok(())
    }

    /// Inputs must strictly precede their consumer on the tape; anything
    /// else means the tape was corrupted into a cycle.
    fn check_topological(&self, node: usize, inputs: &[VarId]) -> Result<()> {
        for id in inputs {
            if id.0 >= node {
                return Err(Error::GraphCycle { node });
            }
        }
        Ok(())
    }
}

fn accumulate(grads: &mut [Option<Vec<f64>>], id: VarId, delta: Vec<f64>) {
    match &mut grads[id.0] {
        Some(existing) => {
            for (e, d) in existing.iter_mut().zip(&delta) {
                *e += d;
            }
        }
        slot @ None => *slot = Some(delta),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn leaf_grad(shape: &[usize], data: Vec<f64>) -> Tensor {
        Tensor::from_vec(shape, data).unwrap().with_requires_grad()
    }

    #[test]
    fn sum_gradient_is_all_ones() {
        let mut g = Graph::new();
        let x = g.leaf(leaf_grad(&[1, 1, 2, 3], vec![1.0, -2.0, 3.0, 0.5, 0.0, 9.0]));
        let loss = g.sum(x).unwrap();
        g.backward(loss).unwrap();
        assert_eq!(g.grad(x).unwrap(), &[1.0; 6]);
    }

    #[test]
    fn backward_twice_doubles_gradients() {
        let mut g = Graph::new();
        let x = g.leaf(leaf_grad(&[1, 1, 2, 2], vec![0.5, -1.0, 2.0, 3.0]));
        let r = g.relu(x).unwrap();
        let loss = g.sum(r).unwrap();
        g.backward(loss).unwrap();
        let once: Vec<f64> = g.grad(x).unwrap().to_vec();
        g.backward(loss).unwrap();
        let twice: Vec<f64> = g.grad(x).unwrap().to_vec();
        for (a, b) in once.iter().zip(&twice) {
            assert_eq!(2.0 * a, *b);
        }
    }

    #[test]
    fn backward_rejects_non_scalar_loss() {
        let mut g = Graph::new();
        let x = g.leaf(leaf_grad(&[1, 1, 2, 2], vec![1.0; 4]));
        let err = g.backward(x).unwrap_err();
        assert!(matches!(err, Error::NonScalarLoss { .. }));
    }

    #[test]
    fn conv_shape_errors_name_the_dimension() {
        let mut g = Graph::new();
        let x = g.leaf(Tensor::zeros(&[1, 3, 4, 4]));
        let w = g.leaf(Tensor::zeros(&[2, 4, 3, 3]));
        let b = g.leaf(Tensor::zeros(&[2]));
        let err = g.conv2d(x, w, b, 1, 1).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("input channels 3"), "{msg}");
        assert!(msg.contains("in-channels 4"), "{msg}");
    }

    #[test]
    fn concat_round_trips_through_backward_slices() {
        let mut g = Graph::new();
        let a = g.leaf(leaf_grad(&[1, 2, 2, 2], (0..8).map(f64::from).collect()));
        let b = g.leaf(leaf_grad(&[1, 1, 2, 2], (8..12).map(f64::from).collect()));
        let cat = g.concat_channels(&[a, b]).unwrap();
        assert_eq!(g.tensor(cat).shape(), &[1, 3, 2, 2]);
        assert_eq!(
            g.tensor(cat).data(),
            (0..12).map(f64::from).collect::<Vec<_>>()
        );
        // single input concat is the identity
        let single = g.concat_channels(&[a]).unwrap();
        assert_eq!(g.tensor(single).data(), g.tensor(a).data());

        let loss = g.sum(cat).unwrap();
        g.backward(loss).unwrap();
        assert_eq!(g.grad(a).unwrap(), &[1.0; 8]);
        assert_eq!(g.grad(b).unwrap(), &[1.0; 4]);
    }

    #[test]
    fn concat_spatial_mismatch_names_shapes() {
        let mut g = Graph::new();
        let a = g.leaf(Tensor::zeros(&[1, 2, 4, 4]));
        let b = g.leaf(Tensor::zeros(&[1, 2, 4, 5]));
        let err = g.concat_channels(&[a, b]).unwrap_err();
        assert!(err.to_string().contains("[1, 2, 4, 5]"), "{err}");
    }

    #[test]
    fn pool_window_exceeding_extent_errors() {
        let mut g = Graph::new();
        let x = g.leaf(Tensor::zeros(&[1, 1, 1, 4]));
        assert!(matches!(
            g.max_pool(x, 2, 2).unwrap_err(),
            Error::WindowTooLarge { .. }
        ));
    }

    #[test]
    fn forward_ops_are_pure() {
        use rand::prelude::*;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(21);
        let data: Vec<f64> = (0..96).map(|_| rng.random_range(-1.0..1.0)).collect();
        let wdata: Vec<f64> = (0..36).map(|_| rng.random_range(-1.0..1.0)).collect();
        let run = || {
            let mut g = Graph::new();
            let x = g.leaf(Tensor::from_vec(&[1, 2, 6, 8], data.clone()).unwrap());
            let w = g.leaf(Tensor::from_vec(&[2, 2, 3, 3], wdata.clone()).unwrap());
            let b = g.leaf(Tensor::zeros(&[2]));
            let c = g.conv2d(x, w, b, 1, 2).unwrap();
            let r = g.relu(c).unwrap();
            let p = g.max_pool(r, 2, 2).unwrap();
            let u = g.bilinear_upsample_x2(p).unwrap();
            let s = g.softmax_norm(u).unwrap();
            g.tensor(s).data().to_vec()
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn dilated_conv_receptive_field_is_5x5() {
        // 3x3 kernel at dilation 2: perturbing one pixel must move outputs
        // only within a 5x5 footprint.
        let h = 11;
        let base = vec![0.0; h * h];
        let weight = vec![1.0; 9];
        let run = |input: &[f64]| {
            let mut g = Graph::new();
            let x = g.leaf(Tensor::from_vec(&[1, 1, h, h], input.to_vec()).unwrap());
            let w = g.leaf(Tensor::from_vec(&[1, 1, 3, 3], weight.clone()).unwrap());
            let b = g.leaf(Tensor::zeros(&[1]));
            let c = g.conv2d(x, w, b, 1, 2).unwrap();
            g.tensor(c).data().to_vec()
        };
        let clean = run(&base);
        let mut poked = base.clone();
        poked[5 * h + 5] = 1.0;
        let dirty = run(&poked);
        let mut rows = (h, 0);
        let mut cols = (h, 0);
        for y in 0..h {
            for x in 0..h {
                if clean[y * h + x] != dirty[y * h + x] {
                    rows = (rows.0.min(y), rows.1.max(y));
                    cols = (cols.0.min(x), cols.1.max(x));
                    // nothing moves outside the 5x5 box around the poke
                    assert!((y as isize - 5).abs() <= 2 && (x as isize - 5).abs() <= 2);
                }
            }
        }
        // ... and the affected bounding box spans the full 5x5 field
        assert_eq!((rows, cols), ((3, 7), (3, 7)));
    }
}
