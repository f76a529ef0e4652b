use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Head, LocHead, Loss, Parameters};
use crate::{Error, Result};

/// 3×3 convolution, stride 2, "same" padding (output `ceil(in/2)`, the odd
/// pixel of padding goes to the bottom/right).
#[derive(Debug, Clone, PartialEq)]
pub struct Conv2d {
    pub in_channels: usize,
    pub out_channels: usize,
    /// `[out][in][3][3]`, flattened.
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

const K: usize = 3;
const STRIDE: usize = 2;

fn out_len(n: usize) -> usize {
    n.div_ceil(STRIDE)
}

fn pad_before(n: usize) -> usize {
    let total = ((out_len(n) - 1) * STRIDE + K).saturating_sub(n);
    total / 2
}

impl Conv2d {
    pub fn zeros(in_channels: usize, out_channels: usize) -> Self {
        Conv2d {
            in_channels,
            out_channels,
            weights: vec![0.0; out_channels * in_channels * K * K],
            bias: vec![0.0; out_channels],
        }
    }

    pub fn glorot<R: Rng>(in_channels: usize, out_channels: usize, rng: &mut R) -> Self {
        let fan = (K * K * (in_channels + out_channels)) as f64;
        let limit = (6.0 / fan).sqrt();
        let mut c = Self::zeros(in_channels, out_channels);
        c.weights.iter_mut().for_each(|w| *w = rng.random_range(-limit..=limit));
        c
    }

    fn w(&self, o: usize, i: usize, ky: usize, kx: usize) -> f64 {
        self.weights[((o * self.in_channels + i) * K + ky) * K + kx]
    }

    /// Pre-activation output for input `[in][h][w]`; returns `(out, oh, ow)`.
    fn forward(&self, x: &[f64], h: usize, w: usize) -> (Vec<f64>, usize, usize) {
        let (oh, ow) = (out_len(h), out_len(w));
        let (ph, pw) = (pad_before(h), pad_before(w));
        let mut out = vec![0.0; self.out_channels * oh * ow];
        for o in 0..self.out_channels {
            let plane = &mut out[o * oh * ow..(o + 1) * oh * ow];
            plane.iter_mut().for_each(|v| *v = self.bias[o]);
            for i in 0..self.in_channels {
                let src = &x[i * h * w..(i + 1) * h * w];
                for ky in 0..K {
                    for kx in 0..K {
                        let wt = self.w(o, i, ky, kx);
                        for y in 0..oh {
                            let sy = (y * STRIDE + ky) as isize - ph as isize;
                            if sy < 0 || sy >= h as isize {
                                continue;
                            }
                            let row = &src[sy as usize * w..(sy as usize + 1) * w];
                            for xo in 0..ow {
                                let sx = (xo * STRIDE + kx) as isize - pw as isize;
                                if sx >= 0 && sx < w as isize {
                                    plane[y * ow + xo] += wt * row[sx as usize];
                                }
                            }
                        }
                    }
                }
            }
        }
        (out, oh, ow)
    }

    /// Accumulates parameter gradients and optionally the input gradient.
    fn backward(&self, x: &[f64], h: usize, w: usize, dout: &[f64], grad: &mut Conv2d, dx: Option<&mut [f64]>) {
        let (oh, ow) = (out_len(h), out_len(w));
        let (ph, pw) = (pad_before(h), pad_before(w));
        let mut dx = dx;
        if let Some(d) = dx.as_deref_mut() {
            d.iter_mut().for_each(|v| *v = 0.0);
        }
        for o in 0..self.out_channels {
            let dplane = &dout[o * oh * ow..(o + 1) * oh * ow];
            grad.bias[o] += dplane.iter().sum::<f64>();
            for i in 0..self.in_channels {
                let src = &x[i * h * w..(i + 1) * h * w];
                for ky in 0..K {
                    for kx in 0..K {
                        let widx = ((o * self.in_channels + i) * K + ky) * K + kx;
                        let wt = self.weights[widx];
                        let mut gw = 0.0;
                        for y in 0..oh {
                            let sy = (y * STRIDE + ky) as isize - ph as isize;
                            if sy < 0 || sy >= h as isize {
                                continue;
                            }
                            let base = sy as usize * w;
                            for xo in 0..ow {
                                let sx = (xo * STRIDE + kx) as isize - pw as isize;
                                if sx >= 0 && sx < w as isize {
                                    let d = dplane[y * ow + xo];
                                    gw += d * src[base + sx as usize];
                                    if let Some(dxs) = dx.as_deref_mut() {
                                        dxs[i * h * w + base + sx as usize] += d * wt;
                                    }
                                }
                            }
                        }
                        grad.weights[widx] += gw;
                    }
                }
            }
        }
    }
}

/// Baseline that learns its own convolutional extractor: three stride-2
/// conv layers with ReLU, global average pooling, then a [`LocHead`].
#[derive(Debug, Clone, PartialEq)]
pub struct ConvFeatExt {
    pub input_shape: (usize, usize, usize),
    pub convs: [Conv2d; 3],
    pub head: LocHead,
}

/// Channel-major image plus power and target.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvSample {
    pub image: Vec<f64>,
    pub power: f64,
    pub target: [f64; 2],
}

impl ConvFeatExt {
    /// `input_shape` is `(channels, height, width)`.
    pub fn init(input_shape: (usize, usize, usize), filters: [usize; 3], seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let c0 = input_shape.0;
        let convs = [
            Conv2d::glorot(c0, filters[0], &mut rng),
            Conv2d::glorot(filters[0], filters[1], &mut rng),
            Conv2d::glorot(filters[1], filters[2], &mut rng),
        ];
        let head = LocHead::init(filters[2], rng.random());
        ConvFeatExt {
            input_shape,
            convs,
            head,
        }
    }

    fn check(&self, image: &[f64]) -> Result<()> {
        let (c, h, w) = self.input_shape;
        if image.len() != c * h * w {
            return Err(Error::domain(format!("image has {} values, expected {c}x{h}x{w}", image.len())));
        }
        Ok(())
    }

    /// Activations after each conv+ReLU stage, with their spatial sizes.
    fn stages(&self, image: &[f64]) -> Vec<(Vec<f64>, usize, usize)> {
        let (_, mut h, mut w) = self.input_shape;
        let mut acts = vec![(image.to_vec(), h, w)];
        for conv in &self.convs {
            let (mut y, oh, ow) = conv.forward(&acts.last().expect("non-empty").0, h, w);
            y.iter_mut().for_each(|v| *v = v.max(0.0));
            acts.push((y, oh, ow));
            (h, w) = (oh, ow);
        }
        acts
    }

    fn pooled(act: &(Vec<f64>, usize, usize), channels: usize) -> Vec<f64> {
        let area = act.1 * act.2;
        (0..channels)
            .map(|c| act.0[c * area..(c + 1) * area].iter().sum::<f64>() / area as f64)
            .collect()
    }

    pub fn forward(&self, image: &[f64], power: f64) -> Result<[f64; 2]> {
        self.check(image)?;
        let acts = self.stages(image);
        let feat = Self::pooled(acts.last().expect("stages"), self.convs[2].out_channels);
        super::loc_head_forward(&self.head, &feat, power)
    }
}

impl Parameters for ConvFeatExt {
    fn slices(&self) -> Vec<&[f64]> {
        let mut v: Vec<&[f64]> = self.convs.iter().flat_map(|c| [c.weights.as_slice(), c.bias.as_slice()]).collect();
        v.extend(self.head.slices());
        v
    }

    fn slices_mut(&mut self) -> Vec<&mut [f64]> {
        let mut v: Vec<&mut [f64]> = self
            .convs
            .iter_mut()
            .flat_map(|c| [c.weights.as_mut_slice(), c.bias.as_mut_slice()])
            .collect();
        v.extend(self.head.slices_mut());
        v
    }

    fn zeros_like(&self) -> Self {
        ConvFeatExt {
            input_shape: self.input_shape,
            convs: [
                Conv2d::zeros(self.convs[0].in_channels, self.convs[0].out_channels),
                Conv2d::zeros(self.convs[1].in_channels, self.convs[1].out_channels),
                Conv2d::zeros(self.convs[2].in_channels, self.convs[2].out_channels),
            ],
            head: self.head.zeros_like(),
        }
    }
}

impl Head for ConvFeatExt {
    type Sample = ConvSample;

    fn sample_loss(&self, s: &ConvSample, loss: Loss, weight: f64, grad: Option<&mut Self>) -> Result<f64> {
        if loss != Loss::MeanSquaredError {
            return Err(Error::domain("the convolutional baseline is trained with mean squared error"));
        }
        self.check(&s.image)?;
        let acts = self.stages(&s.image);
        let channels = self.convs[2].out_channels;
        let last = acts.last().expect("stages");
        let feat = Self::pooled(last, channels);
        let Some(g) = grad else {
            return self.head.mse_backward(&feat, s.power, s.target, weight, None, None);
        };
        let mut dfeat = vec![0.0; channels];
        let value = self
            .head
            .mse_backward(&feat, s.power, s.target, weight, Some(&mut g.head), Some(&mut dfeat))?;
        // Average-pool backward, then through each ReLU + conv.
        let area = last.1 * last.2;
        let mut dact: Vec<f64> = (0..channels * area).map(|i| dfeat[i / area] / area as f64).collect();
        for stage in (0..3).rev() {
            let out = &acts[stage + 1].0;
            dact.iter_mut().zip(out).for_each(|(d, a)| {
                if *a <= 0.0 {
                    *d = 0.0
                }
            });
            let (inp, h, w) = &acts[stage];
            let mut dx = if stage > 0 { Some(vec![0.0; inp.len()]) } else { None };
            self.convs[stage].backward(inp, *h, *w, &dact, &mut g.convs[stage], dx.as_deref_mut());
            if let Some(d) = dx {
                dact = d;
            }
        }
        Ok(value)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::heads::{param_count, HeadDescriptor};

    #[test]
    fn same_padding_geometry() {
        assert_eq!((out_len(56), pad_before(56)), (28, 0));
        assert_eq!((out_len(7), pad_before(7)), (4, 1));
        assert_eq!((out_len(1), pad_before(1)), (1, 1));
    }

    #[test]
    fn conv_matches_direct_formula() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let conv = Conv2d::glorot(2, 3, &mut rng);
        let (h, w) = (5, 6);
        let x: Vec<f64> = (0..2 * h * w).map(|_| rng.random_range(-1.0..1.0)).collect();
        let (y, oh, ow) = conv.forward(&x, h, w);
        assert_eq!((oh, ow), (3, 3));
        let (ph, pw) = (pad_before(h) as isize, pad_before(w) as isize);
        for o in 0..3 {
            for yy in 0..oh {
                for xx in 0..ow {
                    let mut want = conv.bias[o];
                    for i in 0..2 {
                        for ky in 0..3 {
                            for kx in 0..3 {
                                let sy = (2 * yy + ky) as isize - ph;
                                let sx = (2 * xx + kx) as isize - pw;
                                if (0..h as isize).contains(&sy) && (0..w as isize).contains(&sx) {
                                    want += conv.w(o, i, ky, kx) * x[i * h * w + sy as usize * w + sx as usize];
                                }
                            }
                        }
                    }
                    assert!((y[(o * oh + yy) * ow + xx] - want).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn full_size_parameter_count() {
        let m = ConvFeatExt::init((2, 56, 56), [8, 32, 1024], 0);
        assert_eq!(
            m.num_params(),
            param_count(HeadDescriptor::ConvFeatExt { in_channels: 2, filters: [8, 32, 1024] })
        );
    }
}
