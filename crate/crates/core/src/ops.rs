//! Forward/backward kernels behind the graph ops.
//!
//! Shape and precondition checks live in [`crate::graph`]; kernels assume
//! valid inputs. All kernels are single-threaded and evaluate reductions in
//! a fixed order, so results are bit-reproducible.
//!
//! Conventions fixed here:
//! - conv2d "same" padding: total pad per axis is `dilation * (k - 1)`,
//!   split floor/ceil between begin/end; output extent is `ceil(extent/stride)`.
//! - max-pool "same" padding: `max((out-1)*stride + window - extent, 0)`,
//!   same split; padded taps never win (treated as -inf). Ties go to the
//!   first tap in row-major scan order.
//! - bilinear x2 uses half-pixel centers with edge clamping.
//! - relu backward passes zero at exactly 0.

/// Begin/end padding for a convolution axis under the "same" rule.
pub fn conv_same_pad(k: usize, dilation: usize) -> (usize, usize) {
    let total = dilation * (k - 1);
    (total / 2, total - total / 2)
}

/// Output extent of a same-padded convolution along one axis.
pub fn conv_out_extent(extent: usize, stride: usize) -> usize {
    (extent - 1) / stride + 1
}

/// Output extent and begin/end padding of a same-padded pooling axis.
pub fn pool_out_extent(extent: usize, window: usize, stride: usize) -> (usize, usize, usize) {
    let out = extent.div_ceil(stride);
    let total = ((out - 1) * stride + window).saturating_sub(extent);
    (out, total / 2, total - total / 2)
}

fn pad_input(
    input: &[f64],
    [b, c, h, w]: [usize; 4],
    (pt, pb): (usize, usize),
    (pl, pr): (usize, usize),
) -> (Vec<f64>, usize, usize) {
    let hp = h + pt + pb;
    let wp = w + pl + pr;
    let mut padded = vec![0.0; b * c * hp * wp];
    for bc in 0..b * c {
        let src = &input[bc * h * w..(bc + 1) * h * w];
        let dst = &mut padded[bc * hp * wp..(bc + 1) * hp * wp];
        for y in 0..h {
            let drow = (y + pt) * wp + pl;
            dst[drow..drow + w].copy_from_slice(&src[y * w..(y + 1) * w]);
        }
    }
    (padded, hp, wp)
}

pub fn conv2d_forward(
    input: &[f64],
    ishape: [usize; 4],
    weight: &[f64],
    [cout, cin, kh, kw]: [usize; 4],
    bias: &[f64],
    stride: usize,
    dilation: usize,
) -> (Vec<f64>, [usize; 4]) {
    let [b, _, h, w] = ishape;
    let (pt, pb) = conv_same_pad(kh, dilation);
    let (pl, pr) = conv_same_pad(kw, dilation);
    let (padded, _hp, wp) = pad_input(input, ishape, (pt, pb), (pl, pr));
    let ho = conv_out_extent(h, stride);
    let wo = conv_out_extent(w, stride);

    let mut out = vec![0.0; b * cout * ho * wo];
    let hp = h + pt + pb;
    for bi in 0..b {
        for o in 0..cout {
            let obase = (bi * cout + o) * ho * wo;
            out[obase..obase + ho * wo].fill(bias[o]);
            for c in 0..cin {
                let pbase = (bi * cin + c) * hp * wp;
                for i in 0..kh {
                    for j in 0..kw {
                        let wv = weight[((o * cin + c) * kh + i) * kw + j];
                        for y in 0..ho {
                            let prow = pbase + (y * stride + i * dilation) * wp + j * dilation;
                            let orow = obase + y * wo;
                            if stride == 1 {
                                let src = &padded[prow..prow + wo];
                                let dst = &mut out[orow..orow + wo];
                                for x in 0..wo {
                                    dst[x] += wv * src[x];
                                }
                            } else {
                                for x in 0..wo {
                                    out[orow + x] += wv * padded[prow + x * stride];
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    (out, [b, cout, ho, wo])
}

/// Gradients w.r.t. (input, weight, bias) of [`conv2d_forward`].
pub fn conv2d_backward(
    gout: &[f64],
    [b, cout, ho, wo]: [usize; 4],
    input: &[f64],
    ishape: [usize; 4],
    weight: &[f64],
    [_, cin, kh, kw]: [usize; 4],
    stride: usize,
    dilation: usize,
) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let [_, _, h, w] = ishape;
    let (pt, pb) = conv_same_pad(kh, dilation);
    let (pl, pr) = conv_same_pad(kw, dilation);
    let (padded, hp, wp) = pad_input(input, ishape, (pt, pb), (pl, pr));

    let mut gpad = vec![0.0; padded.len()];
    let mut gweight = vec![0.0; weight.len()];
    let mut gbias = vec![0.0; cout];

    for bi in 0..b {
        for o in 0..cout {
            let obase = (bi * cout + o) * ho * wo;
            gbias[o] += gout[obase..obase + ho * wo].iter().sum::<f64>();
            for c in 0..cin {
                let pbase = (bi * cin + c) * hp * wp;
                for i in 0..kh {
                    for j in 0..kw {
                        let widx = ((o * cin + c) * kh + i) * kw + j;
                        let wv = weight[widx];
                        let mut gw = 0.0;
                        for y in 0..ho {
                            let prow = pbase + (y * stride + i * dilation) * wp + j * dilation;
                            let orow = obase + y * wo;
                            for x in 0..wo {
                                let g = gout[orow + x];
                                gpad[prow + x * stride] += wv * g;
                                gw += g * padded[prow + x * stride];
                            }
                        }
                        gweight[widx] += gw;
                    }
                }
            }
        }
    }

    // Crop the padding frame back off the input gradient.
    let mut ginput = vec![0.0; input.len()];
    for bc in 0..b * cin {
        let src = &gpad[bc * hp * wp..(bc + 1) * hp * wp];
        let dst = &mut ginput[bc * h * w..(bc + 1) * h * w];
        for y in 0..h {
            let srow = (y + pt) * wp + pl;
            dst[y * w..(y + 1) * w].copy_from_slice(&src[srow..srow + w]);
        }
    }
    (ginput, gweight, gbias)
}

/// Returns (output, output shape, flat argmax index per output element).
pub fn max_pool_forward(
    input: &[f64],
    [b, c, h, w]: [usize; 4],
    window: usize,
    stride: usize,
) -> (Vec<f64>, [usize; 4], Vec<u32>) {
    let (ho, pt, _) = pool_out_extent(h, window, stride);
    let (wo, pl, _) = pool_out_extent(w, window, stride);
    let mut out = vec![0.0; b * c * ho * wo];
    let mut argmax = vec![0u32; out.len()];
    for bc in 0..b * c {
        let src = &input[bc * h * w..(bc + 1) * h * w];
        for oy in 0..ho {
            for ox in 0..wo {
                let mut best = f64::NEG_INFINITY;
                let mut best_idx = 0usize;
                for dy in 0..window {
                    let y = (oy * stride + dy) as isize - pt as isize;
                    if y < 0 || y >= h as isize {
                        continue;
                    }
                    for dx in 0..window {
                        let x = (ox * stride + dx) as isize - pl as isize;
                        if x < 0 || x >= w as isize {
                            continue;
                        }
                        let idx = y as usize * w + x as usize;
                        if src[idx] > best {
                            best = src[idx];
                            best_idx = idx;
                        }
                    }
                }
                let oidx = (bc * ho + oy) * wo + ox;
                out[oidx] = best;
                argmax[oidx] = (bc * h * w + best_idx) as u32;
            }
        }
    }
    (out, [b, c, ho, wo], argmax)
}

pub fn max_pool_backward(gout: &[f64], argmax: &[u32], input_len: usize) -> Vec<f64> {
    let mut ginput = vec![0.0; input_len];
    for (g, &idx) in gout.iter().zip(argmax) {
        ginput[idx as usize] += g;
    }
    ginput
}

pub fn relu_forward(input: &[f64]) -> Vec<f64> {
    input.iter().map(|&v| v.max(0.0)).collect()
}

pub fn relu_backward(gout: &[f64], input: &[f64]) -> Vec<f64> {
    gout.iter()
        .zip(input)
        .map(|(&g, &v)| if v > 0.0 { g } else { 0.0 })
        .collect()
}

/// Sample positions for one axis of the x2 upsampling: (low index, high
/// index, high weight) per output position, half-pixel convention.
fn upsample_axis(extent: usize) -> Vec<(usize, usize, f64)> {
    (0..2 * extent)
        .map(|o| {
            let pos = (o as f64 + 0.5) / 2.0 - 0.5;
            let low = pos.floor();
            let t = pos - low;
            let clamp = |v: f64| (v.max(0.0) as usize).min(extent - 1);
            (clamp(low), clamp(low + 1.0), t)
        })
        .collect()
}

pub fn bilinear_x2_forward(input: &[f64], [b, c, h, w]: [usize; 4]) -> (Vec<f64>, [usize; 4]) {
    let rows = upsample_axis(h);
    let cols = upsample_axis(w);
    let mut out = vec![0.0; b * c * 4 * h * w];
    for bc in 0..b * c {
        let src = &input[bc * h * w..(bc + 1) * h * w];
        let dst = &mut out[bc * 4 * h * w..(bc + 1) * 4 * h * w];
        for (oy, &(r0, r1, t)) in rows.iter().enumerate() {
            for (ox, &(c0, c1, u)) in cols.iter().enumerate() {
                dst[oy * 2 * w + ox] = (1.0 - t) * (1.0 - u) * src[r0 * w + c0]
                    + (1.0 - t) * u * src[r0 * w + c1]
                    + t * (1.0 - u) * src[r1 * w + c0]
                    + t * u * src[r1 * w + c1];
            }
        }
    }
    (out, [b, c, 2 * h, 2 * w])
}

pub fn bilinear_x2_backward(gout: &[f64], [b, c, h, w]: [usize; 4]) -> Vec<f64> {
    let rows = upsample_axis(h);
    let cols = upsample_axis(w);
    let mut ginput = vec![0.0; b * c * h * w];
    for bc in 0..b * c {
        let src = &gout[bc * 4 * h * w..(bc + 1) * 4 * h * w];
        let dst = &mut ginput[bc * h * w..(bc + 1) * h * w];
        for (oy, &(r0, r1, t)) in rows.iter().enumerate() {
            for (ox, &(c0, c1, u)) in cols.iter().enumerate() {
                let g = src[oy * 2 * w + ox];
                dst[r0 * w + c0] += (1.0 - t) * (1.0 - u) * g;
                dst[r0 * w + c1] += (1.0 - t) * u * g;
                dst[r1 * w + c0] += t * (1.0 - u) * g;
                dst[r1 * w + c1] += t * u * g;
            }
        }
    }
    ginput
}

pub fn global_avg_pool_forward(input: &[f64], [b, c, h, w]: [usize; 4]) -> (Vec<f64>, [usize; 4]) {
    let area = (h * w) as f64;
    let out = (0..b * c)
        .map(|bc| input[bc * h * w..(bc + 1) * h * w].iter().sum::<f64>() / area)
        .collect();
    (out, [b, c, 1, 1])
}

pub fn global_avg_pool_backward(gout: &[f64], [b, c, h, w]: [usize; 4]) -> Vec<f64> {
    let area = (h * w) as f64;
    let mut ginput = vec![0.0; b * c * h * w];
    for bc in 0..b * c {
        let g = gout[bc] / area;
        ginput[bc * h * w..(bc + 1) * h * w].fill(g);
    }
    ginput
}

/// Per-image softmax over everything but the batch axis.
pub fn softmax_forward(input: &[f64], batch: usize) -> Vec<f64> {
    let n = input.len() / batch;
    let mut out = vec![0.0; input.len()];
    for bi in 0..batch {
        let src = &input[bi * n..(bi + 1) * n];
        let dst = &mut out[bi * n..(bi + 1) * n];
        let max = src.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut z = 0.0;
        for (d, &v) in dst.iter_mut().zip(src) {
            *d = (v - max).exp();
            z += *d;
        }
        for d in dst.iter_mut() {
            *d /= z;
        }
    }
    out
}

pub fn softmax_backward(gout: &[f64], output: &[f64], batch: usize) -> Vec<f64> {
    let n = gout.len() / batch;
    let mut ginput = vec![0.0; gout.len()];
    for bi in 0..batch {
        let g = &gout[bi * n..(bi + 1) * n];
        let p = &output[bi * n..(bi + 1) * n];
        let dot: f64 = g.iter().zip(p).map(|(&gv, &pv)| gv * pv).sum();
        for ((gi, &gv), &pv) in ginput[bi * n..(bi + 1) * n].iter_mut().zip(g).zip(p) {
            *gi = pv * (gv - dot);
        }
    }
    ginput
}

/// Divergence of one flattened image pair. Terms with `q == 0` contribute
/// nothing (their limit), which also makes `eps = 0` usable in tests.
pub fn kld_sum(p: &[f64], q: &[f64], eps: f64) -> f64 {
    p.iter()
        .zip(q)
        .filter(|(_, &qv)| qv > 0.0)
        .map(|(&pv, &qv)| qv * (eps + qv / (eps + pv)).ln())
        .sum()
}

/// Mean over batch images of the per-image divergence.
pub fn kld_loss_forward(p: &[f64], q: &[f64], eps: f64, batch: usize) -> f64 {
    let n = p.len() / batch;
    (0..batch)
        .map(|bi| kld_sum(&p[bi * n..(bi + 1) * n], &q[bi * n..(bi + 1) * n], eps))
        .sum::<f64>()
        / batch as f64
}

pub fn kld_loss_backward(gout: f64, p: &[f64], q: &[f64], eps: f64, batch: usize) -> Vec<f64> {
    let scale = gout / batch as f64;
    p.iter()
        .zip(q)
        .map(|(&pv, &qv)| {
            if qv > 0.0 {
                let s = eps + pv;
                -scale * qv * qv / (eps * s * s + qv * s)
            } else {
                0.0
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    // Independent convolution oracle: literal sum over all kernel taps with
    // explicit bounds checks, no padding buffer.
    fn conv_oracle(
        input: &[f64],
        [b, cin, h, w]: [usize; 4],
        weight: &[f64],
        [cout, _, kh, kw]: [usize; 4],
        bias: &[f64],
        stride: usize,
        dilation: usize,
    ) -> Vec<f64> {
        let (pt, _) = conv_same_pad(kh, dilation);
        let (pl, _) = conv_same_pad(kw, dilation);
        let ho = conv_out_extent(h, stride);
        let wo = conv_out_extent(w, stride);
        let mut out = vec![0.0; b * cout * ho * wo];
        for bi in 0..b {
            for o in 0..cout {
                for y in 0..ho {
                    for x in 0..wo {
                        let mut acc = bias[o];
                        for c in 0..cin {
                            for i in 0..kh {
                                for j in 0..kw {
                                    let yy = (y * stride + i * dilation) as isize - pt as isize;
                                    let xx = (x * stride + j * dilation) as isize - pl as isize;
                                    if yy < 0 || yy >= h as isize || xx < 0 || xx >= w as isize {
                                        continue;
                                    }
                                    acc += weight[((o * cin + c) * kh + i) * kw + j]
                                        * input[((bi * cin + c) * h + yy as usize) * w
                                            + xx as usize];
                                }
                            }
                        }
                        out[((bi * cout + o) * ho + y) * wo + x] = acc;
                    }
                }
            }
        }
        out
    }

    #[test]
    fn conv_identity_kernel_preserves_input() {
        let input: Vec<f64> = (0..2 * 3 * 4 * 5).map(|i| i as f64 * 0.1).collect();
        // 1x1 kernel, weight[o][c] = delta_oc
        let mut weight = vec![0.0; 9];
        for o in 0..3 {
            weight[o * 3 + o] = 1.0;
        }
        let (out, oshape) =
            conv2d_forward(&input, [2, 3, 4, 5], &weight, [3, 3, 1, 1], &[0.0; 3], 1, 1);
        assert_eq!(oshape, [2, 3, 4, 5]);
        assert_eq!(out, input);
    }

    #[test]
    fn conv_dilated_matches_spec_example_and_oracle() {
        // 4x4 ramp 1..16, 3x3 all-ones kernel at dilation 2.
        let input: Vec<f64> = (1..=16).map(|i| i as f64).collect();
        let weight = vec![1.0; 9];
        let (out, oshape) =
            conv2d_forward(&input, [1, 1, 4, 4], &weight, [1, 1, 3, 3], &[0.0], 1, 2);
        assert_eq!(oshape, [1, 1, 4, 4]);
        assert_eq!(out[0], 24.0); // 1 + 3 + 9 + 11
        let oracle = conv_oracle(&input, [1, 1, 4, 4], &weight, [1, 1, 3, 3], &[0.0], 1, 2);
        assert_eq!(out, oracle);
    }

    #[test]
    fn conv_matches_oracle_on_random_cases() {
        use rand::prelude::*;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for &(shape, wshape, stride, dilation) in &[
            ([1, 2, 6, 7], [3, 2, 3, 3], 1, 1),
            ([2, 3, 5, 5], [2, 3, 3, 3], 1, 2),
            ([1, 1, 8, 6], [2, 1, 3, 3], 2, 1),
            ([1, 2, 5, 9], [1, 2, 1, 1], 1, 1),
            ([1, 2, 7, 7], [2, 2, 3, 3], 2, 2),
        ] {
            let n: usize = shape.iter().product();
            let m: usize = wshape.iter().product();
            let input: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            let weight: Vec<f64> = (0..m).map(|_| rng.random_range(-1.0..1.0)).collect();
            let bias: Vec<f64> = (0..wshape[0]).map(|_| rng.random_range(-1.0..1.0)).collect();
            let (out, _) = conv2d_forward(&input, shape, &weight, wshape, &bias, stride, dilation);
            let oracle = conv_oracle(&input, shape, &weight, wshape, &bias, stride, dilation);
            for (a, b) in out.iter().zip(&oracle) {
                assert!((a - b).abs() < 1e-12, "{a} vs {b}");
            }
        }
    }

    #[test]
    fn conv_stride2_halves_extent_by_ceil() {
        for h in 1..=9usize {
            assert_eq!(conv_out_extent(h, 2), h.div_ceil(2));
            assert_eq!(conv_out_extent(h, 1), h);
        }
    }

    #[test]
    fn pool_constant_input_stays_constant() {
        let input = vec![3.25; 1 * 1 * 5 * 5];
        for stride in [1, 2] {
            let (out, _, _) = max_pool_forward(&input, [1, 1, 5, 5], 2, stride);
            assert!(out.iter().all(|&v| v == 3.25));
        }
    }

    #[test]
    fn pool_single_window() {
        let (out, oshape, _) = max_pool_forward(&[1.0, 2.0, 3.0, 4.0], [1, 1, 2, 2], 2, 2);
        assert_eq!(oshape, [1, 1, 1, 1]);
        assert_eq!(out, vec![4.0]);
    }

    #[test]
    fn pool_stride1_matches_window_scan_oracle() {
        let input: Vec<f64> = (0..25).map(|i| ((i * 7) % 13) as f64).collect();
        let (out, oshape, _) = max_pool_forward(&input, [1, 1, 5, 5], 2, 1);
        assert_eq!(oshape, [1, 1, 5, 5]);
        // Oracle: exhaustive scan over the same-padded window (pad right/bottom).
        for oy in 0..5usize {
            for ox in 0..5usize {
                let mut best = f64::NEG_INFINITY;
                for dy in 0..2 {
                    for dx in 0..2 {
                        let (y, x) = (oy + dy, ox + dx);
                        if y < 5 && x < 5 {
                            best = best.max(input[y * 5 + x]);
                        }
                    }
                }
                assert_eq!(out[oy * 5 + ox], best);
            }
        }
    }

    #[test]
    fn pool_backward_routes_to_first_argmax_on_ties() {
        let input = vec![7.0, 7.0, 7.0, 7.0];
        let (_, _, argmax) = max_pool_forward(&input, [1, 1, 2, 2], 2, 2);
        assert_eq!(argmax, vec![0]);
        let ginput = max_pool_backward(&[5.0], &argmax, 4);
        assert_eq!(ginput, vec![5.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn relu_definition_and_dead_region() {
        assert_eq!(relu_forward(&[-1.0, 0.0, 2.0]), vec![0.0, 0.0, 2.0]);
        let input = vec![-3.0, -0.5, -1e-9];
        assert!(relu_forward(&input).iter().all(|&v| v == 0.0));
        assert!(relu_backward(&[1.0, 1.0, 1.0], &input).iter().all(|&g| g == 0.0));
        // subgradient at exactly 0 is 0
        assert_eq!(relu_backward(&[1.0], &[0.0]), vec![0.0]);
    }

    #[test]
    fn upsample_constant_and_monotone() {
        let (out, oshape) = bilinear_x2_forward(&vec![3.5; 12], [1, 1, 3, 4]);
        assert_eq!(oshape, [1, 1, 6, 8]);
        assert!(out.iter().all(|&v| (v - 3.5).abs() < 1e-15));

        // 1x2 input [0, 1] doubles to two identical rows of four values,
        // each monotonically nondecreasing from 0 to 1.
        let (out, oshape) = bilinear_x2_forward(&[0.0, 1.0], [1, 1, 1, 2]);
        assert_eq!(oshape, [1, 1, 2, 4]);
        for row in out.chunks(4) {
            for pair in row.windows(2) {
                assert!(pair[1] >= pair[0]);
            }
            assert_eq!(row[0], 0.0);
            assert_eq!(row[3], 1.0);
        }
    }

    #[test]
    fn upsample_2x2_matches_closed_form() {
        let input = vec![1.0, 2.0, 3.0, 5.0];
        let (out, _) = bilinear_x2_forward(&input, [1, 1, 2, 2]);
        // Direct evaluation at each target coordinate, half-pixel centers.
        for oy in 0..4usize {
            for ox in 0..4usize {
                let fy = ((oy as f64 + 0.5) / 2.0 - 0.5).clamp(0.0, 1.0);
                let fx = ((ox as f64 + 0.5) / 2.0 - 0.5).clamp(0.0, 1.0);
                let (y0, x0) = (fy.floor() as usize, fx.floor() as usize);
                let (y1, x1) = ((y0 + 1).min(1), (x0 + 1).min(1));
                let (t, u) = (fy - y0 as f64, fx - x0 as f64);
                let expect = (1.0 - t) * (1.0 - u) * input[y0 * 2 + x0]
                    + (1.0 - t) * u * input[y0 * 2 + x1]
                    + t * (1.0 - u) * input[y1 * 2 + x0]
                    + t * u * input[y1 * 2 + x1];
                assert!((out[oy * 4 + ox] - expect).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn upsample_backward_conserves_mass() {
        use rand::prelude::*;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let gout: Vec<f64> = (0..2 * 3 * 10 * 14).map(|_| rng.random_range(-1.0..1.0)).collect();
        let ginput = bilinear_x2_backward(&gout, [2, 3, 5, 7]);
        let (si, so): (f64, f64) = (ginput.iter().sum(), gout.iter().sum());
        assert!((si - so).abs() <= 1e-10 * so.abs().max(1.0));
    }

    #[test]
    fn global_pool_mean_and_backward() {
        let (out, oshape) = global_avg_pool_forward(&[1.0, 2.0, 3.0, 4.0], [1, 1, 2, 2]);
        assert_eq!(oshape, [1, 1, 1, 1]);
        assert_eq!(out, vec![2.5]);

        // random tensor against a scalar-loop oracle
        use rand::prelude::*;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let input: Vec<f64> = (0..2 * 4 * 3 * 6).map(|_| rng.random_range(-2.0..2.0)).collect();
        let (out, _) = global_avg_pool_forward(&input, [2, 4, 3, 6]);
        for bc in 0..8 {
            let mut sum = 0.0;
            for k in 0..18 {
                sum += input[bc * 18 + k];
            }
            assert!((out[bc] - sum / 18.0).abs() < 1e-12);
        }

        let ginput = global_avg_pool_backward(&out, [2, 4, 3, 6]);
        assert!((ginput[0] - out[0] / 18.0).abs() < 1e-15);
    }

    #[test]
    fn softmax_shift_invariant_and_exact_values() {
        // flattened 2x2 raw [0, ln2, ln3, ln4] -> [0.1, 0.2, 0.3, 0.4]
        let raw = vec![0.0, 2f64.ln(), 3f64.ln(), 4f64.ln()];
        let p = softmax_forward(&raw, 1);
        for (got, want) in p.iter().zip(&[0.1, 0.2, 0.3, 0.4]) {
            assert!((got - want).abs() < 1e-12);
        }
        let shifted: Vec<f64> = raw.iter().map(|v| v + 17.25).collect();
        let p2 = softmax_forward(&shifted, 1);
        for (a, b) in p.iter().zip(&p2) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn kld_hand_example_and_identity() {
        // Q = [1, 0], P = [0.5, 0.5], eps = 0 -> ln 2
        let v = kld_sum(&[0.5, 0.5], &[1.0, 0.0], 0.0);
        assert!((v - std::f64::consts::LN_2).abs() < 1e-12);
        // P = Q, eps = 0 -> exactly 0
        let q = [0.25, 0.25, 0.5, 0.0];
        assert_eq!(kld_sum(&q, &q, 0.0), 0.0);
        // with the default eps the residual stays below 10*eps*N
        let eps = 1e-7;
        assert!(kld_sum(&q, &q, eps).abs() < 10.0 * eps * q.len() as f64);
    }
}
