//! Dense rank-3 feature volumes and the numerical kernels on them.
//!
//! Layout is channel-major: `data[(c * height + y) * width + x]`, 32-bit
//! floats. Rows are contiguous, which is what the convolution inner loops
//! want. All kernels are pure and keep a fixed per-element summation order,
//! so outputs do not depend on how work is split across threads.

use crate::error::{Error, Result};
use crate::parallel;

/// Dense C x H x W feature or image volume.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    channels: usize,
    height: usize,
    width: usize,
    data: Vec<f32>,
}

impl Tensor {
    /// All-zero tensor. Dimensions must be positive.
    pub fn zeros(channels: usize, height: usize, width: usize) -> Tensor {
        assert!(channels > 0 && height > 0 && width > 0, "dims must be positive");
        Tensor {
            channels,
            height,
            width,
            data: vec![0.0; channels * height * width],
        }
    }

    pub fn filled(channels: usize, height: usize, width: usize, value: f32) -> Tensor {
        let mut t = Tensor::zeros(channels, height, width);
        t.data.fill(value);
        t
    }

    /// Wraps an existing channel-major buffer; the length must be exactly C*H*W.
    pub fn from_vec(channels: usize, height: usize, width: usize, data: Vec<f32>) -> Result<Tensor> {
        if channels == 0 || height == 0 || width == 0 {
            return Err(Error::Dimension("tensor dims must be positive".into()));
        }
        if data.len() != channels * height * width {
            return Err(Error::Dimension(format!(
                "tensor data length {} does not match {}x{}x{}",
                data.len(),
                channels,
                height,
                width
            )));
        }
        Ok(Tensor { channels, height, width, data })
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    /// (channels, height, width)
    pub fn dims(&self) -> (usize, usize, usize) {
        (self.channels, self.height, self.width)
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    fn index(&self, c: usize, y: usize, x: usize) -> usize {
        (c * self.height + y) * self.width + x
    }

    #[inline]
    pub fn get(&self, c: usize, y: usize, x: usize) -> f32 {
        self.data[self.index(c, y, x)]
    }

    #[inline]
    pub fn set(&mut self, c: usize, y: usize, x: usize, v: f32) {
        let i = self.index(c, y, x);
        self.data[i] = v;
    }

    /// One channel plane as a contiguous slice.
    pub fn channel(&self, c: usize) -> &[f32] {
        let plane = self.height * self.width;
        &self.data[c * plane..(c + 1) * plane]
    }

    pub fn channel_mut(&mut self, c: usize) -> &mut [f32] {
        let plane = self.height * self.width;
        &mut self.data[c * plane..(c + 1) * plane]
    }

    #[inline]
    pub fn row(&self, c: usize, y: usize) -> &[f32] {
        let start = self.index(c, y, 0);
        &self.data[start..start + self.width]
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    /// Errors if any stored value is NaN or infinite.
    pub fn check_finite(&self, what: &str) -> Result<()> {
        if self.data.iter().all(|v| v.is_finite()) {
            Ok(())
        } else {
            Err(Error::Numerical(format!("{what}: non-finite values")))
        }
    }

    pub fn map<F: Fn(f32) -> f32>(&self, f: F) -> Tensor {
        Tensor {
            channels: self.channels,
            height: self.height,
            width: self.width,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }
}

/// 4-axis convolution weight block, `[out_ch][in_ch][kh][kw]` row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvWeight {
    pub out_channels: usize,
    pub in_channels: usize,
    pub kh: usize,
    pub kw: usize,
    pub data: Vec<f32>,
}

impl ConvWeight {
    pub fn new(out_channels: usize, in_channels: usize, kh: usize, kw: usize, data: Vec<f32>) -> Result<ConvWeight> {
        if data.len() != out_channels * in_channels * kh * kw {
            return Err(Error::Dimension(format!(
                "kernel data length {} does not match {}x{}x{}x{}",
                data.len(),
                out_channels,
                in_channels,
                kh,
                kw
            )));
        }
        Ok(ConvWeight { out_channels, in_channels, kh, kw, data })
    }

    #[inline]
    pub fn at(&self, oc: usize, ic: usize, ky: usize, kx: usize) -> f32 {
        self.data[((oc * self.in_channels + ic) * self.kh + ky) * self.kw + kx]
    }
}

/// Spatial padding mode for [`conv2d`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Padding {
    /// Mirror across the border without repeating the edge sample; output
    /// keeps the input size at stride 1.
    ReflectSame,
    /// Zero fill; output keeps the input size at stride 1.
    ZeroSame,
    /// No padding; output shrinks by kernel-1.
    Valid,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Relu,
    None,
}

/// Mirror-fold an index into `[0, n)` (edge sample not repeated).
#[inline]
pub(crate) fn reflect_index(i: isize, n: usize) -> usize {
    debug_assert!(n > 0);
    if n == 1 {
        return 0;
    }
    let period = 2 * (n as isize - 1);
    let mut k = i.rem_euclid(period);
    if k >= n as isize {
        k = period - k;
    }
    k as usize
}

fn padded_copy(input: &Tensor, pad_y: usize, pad_x: usize, zero_fill: bool) -> Tensor {
    let (c, h, w) = input.dims();
    let (ph, pw) = (h + 2 * pad_y, w + 2 * pad_x);
    let mut out = Tensor::zeros(c, ph, pw);
    let out_w = pw;
    parallel::for_each_chunk(out.data_mut(), out_w, |row_idx, row| {
        let ch = row_idx / ph;
        let py = row_idx % ph;
        let sy = py as isize - pad_y as isize;
        if zero_fill && (sy < 0 || sy >= h as isize) {
            return;
        }
        let iy = if zero_fill { sy as usize } else { reflect_index(sy, h) };
        let src = input.row(ch, iy);
        for (px, slot) in row.iter_mut().enumerate() {
            let sx = px as isize - pad_x as isize;
            if zero_fill {
                if sx >= 0 && (sx as usize) < w {
                    *slot = src[sx as usize];
                }
            } else {
                *slot = src[reflect_index(sx, w)];
            }
        }
    });
    out
}

/// 2-D cross-correlation with optional bias and ReLU.
///
/// Per output element the accumulation order is fixed as (in channel, kernel
/// row, kernel column), so the result is independent of thread count.
pub fn conv2d(
    input: &Tensor,
    kernel: &ConvWeight,
    bias: Option<&[f32]>,
    stride: usize,
    padding: Padding,
    activation: Activation,
) -> Result<Tensor> {
    if kernel.in_channels != input.channels() {
        return Err(Error::Dimension(format!(
            "kernel expects {} input channels, tensor has {}",
            kernel.in_channels,
            input.channels()
        )));
    }
    if stride == 0 {
        return Err(Error::Config("stride must be positive".into()));
    }
    if let Some(b) = bias {
        if b.len() != kernel.out_channels {
            return Err(Error::Dimension(format!(
                "bias length {} does not match {} output channels",
                b.len(),
                kernel.out_channels
            )));
        }
    }
    let same = matches!(padding, Padding::ReflectSame | Padding::ZeroSame);
    if same && (kernel.kh % 2 == 0 || kernel.kw % 2 == 0) {
        return Err(Error::Config(format!(
            "same padding requires odd kernel dims, got {}x{}",
            kernel.kh, kernel.kw
        )));
    }

    let padded_owned;
    let padded = match padding {
        Padding::Valid => input,
        Padding::ReflectSame | Padding::ZeroSame => {
            let zero_fill = padding == Padding::ZeroSame;
            padded_owned = padded_copy(input, (kernel.kh - 1) / 2, (kernel.kw - 1) / 2, zero_fill);
            &padded_owned
        }
    };

    let (_, ph, pw) = padded.dims();
    if ph < kernel.kh || pw < kernel.kw {
        return Err(Error::Dimension(format!(
            "input {}x{} smaller than kernel {}x{}",
            ph, pw, kernel.kh, kernel.kw
        )));
    }
    let out_h = (ph - kernel.kh) / stride + 1;
    let out_w = (pw - kernel.kw) / stride + 1;

    let in_c = kernel.in_channels;
    let mut out = Tensor::zeros(kernel.out_channels, out_h, out_w);
    parallel::for_each_chunk(out.data_mut(), out_w, |row_idx, acc| {
        let oc = row_idx / out_h;
        let oy = row_idx % out_h;
        acc.fill(bias.map_or(0.0, |b| b[oc]));
        for ic in 0..in_c {
            for ky in 0..kernel.kh {
                let src = padded.row(ic, oy * stride + ky);
                for kx in 0..kernel.kw {
                    let w = kernel.at(oc, ic, ky, kx);
                    if w == 0.0 {
                        continue;
                    }
                    if stride == 1 {
                        let src = &src[kx..kx + out_w];
                        for (a, &v) in acc.iter_mut().zip(src) {
                            *a += w * v;
                        }
                    } else {
                        for (ox, a) in acc.iter_mut().enumerate() {
                            *a += w * src[ox * stride + kx];
                        }
                    }
                }
            }
        }
        if activation == Activation::Relu {
            for a in acc.iter_mut() {
                if *a < 0.0 {
                    *a = 0.0;
                }
            }
        }
    });
    Ok(out)
}

/// 2x2 stride-2 mean pooling. Spatial dims must be even.
pub fn avg_pool2d(input: &Tensor) -> Result<Tensor> {
    let (c, h, w) = input.dims();
    if h % 2 != 0 || w % 2 != 0 {
        return Err(Error::Dimension(format!("avg_pool2d needs even dims, got {h}x{w}")));
    }
    let (oh, ow) = (h / 2, w / 2);
    let mut out = Tensor::zeros(c, oh, ow);
    parallel::for_each_chunk(out.data_mut(), ow, |row_idx, row| {
        let ch = row_idx / oh;
        let oy = row_idx % oh;
        let top = input.row(ch, 2 * oy);
        let bot = input.row(ch, 2 * oy + 1);
        for (ox, slot) in row.iter_mut().enumerate() {
            let x = 2 * ox;
            *slot = (top[x] + top[x + 1] + bot[x] + bot[x + 1]) * 0.25;
        }
    });
    Ok(out)
}

/// Nearest-neighbour upsampling by an integer factor.
pub fn upsample_nearest(input: &Tensor, factor: usize) -> Tensor {
    assert!(factor >= 1, "factor must be positive");
    let (c, h, w) = input.dims();
    let (oh, ow) = (h * factor, w * factor);
    let mut out = Tensor::zeros(c, oh, ow);
    parallel::for_each_chunk(out.data_mut(), ow, |row_idx, row| {
        let ch = row_idx / oh;
        let oy = row_idx % oh;
        let src = input.row(ch, oy / factor);
        for (ox, slot) in row.iter_mut().enumerate() {
            *slot = src[ox / factor];
        }
    });
    out
}

/// Bilinear resize by a scale factor, half-pixel center convention.
/// Output dims are `round(scale * dim)` and must be at least 1.
pub fn resize_bilinear(input: &Tensor, scale: f32) -> Result<Tensor> {
    if !(scale > 0.0) || !scale.is_finite() {
        return Err(Error::Config(format!("scale must be a positive real, got {scale}")));
    }
    let (c, h, w) = input.dims();
    let oh = (scale as f64 * h as f64).round() as usize;
    let ow = (scale as f64 * w as f64).round() as usize;
    if oh == 0 || ow == 0 {
        return Err(Error::Config(format!(
            "scale {scale} collapses {h}x{w} to {oh}x{ow}"
        )));
    }
    if oh == h && ow == w && scale == 1.0 {
        return Ok(input.clone());
    }

    let ry = h as f64 / oh as f64;
    let rx = w as f64 / ow as f64;
    let mut out = Tensor::zeros(c, oh, ow);
    parallel::for_each_chunk(out.data_mut(), ow, |row_idx, row| {
        let ch = row_idx / oh;
        let oy = row_idx % oh;
        let sy = ((oy as f64 + 0.5) * ry - 0.5).clamp(0.0, (h - 1) as f64);
        let y0 = sy.floor() as usize;
        let y1 = (y0 + 1).min(h - 1);
        let fy = sy - y0 as f64;
        let top = input.row(ch, y0);
        let bot = input.row(ch, y1);
        for (ox, slot) in row.iter_mut().enumerate() {
            let sx = ((ox as f64 + 0.5) * rx - 0.5).clamp(0.0, (w - 1) as f64);
            let x0 = sx.floor() as usize;
            let x1 = (x0 + 1).min(w - 1);
            let fx = sx - x0 as f64;
            let a = top[x0] as f64 * (1.0 - fx) + top[x1] as f64 * fx;
            let b = bot[x0] as f64 * (1.0 - fx) + bot[x1] as f64 * fx;
            *slot = (a * (1.0 - fy) + b * fy) as f32;
        }
    });
    Ok(out)
}

fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    let radius = (3.0 * sigma).ceil() as usize;
    let mut k: Vec<f64> = (0..=2 * radius)
        .map(|i| {
            let d = i as f64 - radius as f64;
            (-d * d / (2.0 * sigma * sigma)).exp()
        })
        .collect();
    let sum: f64 = k.iter().sum();
    for v in k.iter_mut() {
        *v /= sum;
    }
    k
}

/// Separable Gaussian smoothing with reflection padding; kernel radius is
/// `ceil(3*sigma)` and the kernel is normalized to sum 1. `sigma <= 0` is the
/// identity.
pub fn gaussian_blur(map: &Tensor, sigma: f32) -> Tensor {
    if sigma <= 0.0 {
        return map.clone();
    }
    let (c, h, w) = map.dims();
    let kernel = gaussian_kernel(sigma as f64);
    let radius = kernel.len() / 2;

    // Horizontal pass into an f64 buffer, then vertical pass back to f32.
    let mut tmp = vec![0.0f64; c * h * w];
    parallel::for_each_chunk(&mut tmp, w, |row_idx, row| {
        let ch = row_idx / h;
        let y = row_idx % h;
        let src = map.row(ch, y);
        for (x, slot) in row.iter_mut().enumerate() {
            let mut acc = 0.0f64;
            for (t, &kv) in kernel.iter().enumerate() {
                let sx = x as isize + t as isize - radius as isize;
                acc += kv * src[reflect_index(sx, w)] as f64;
            }
            *slot = acc;
        }
    });

    let mut out = Tensor::zeros(c, h, w);
    parallel::for_each_chunk(out.data_mut(), w, |row_idx, row| {
        let ch = row_idx / h;
        let y = row_idx % h;
        let plane = &tmp[ch * h * w..(ch + 1) * h * w];
        for (x, slot) in row.iter_mut().enumerate() {
            let mut acc = 0.0f64;
            for (t, &kv) in kernel.iter().enumerate() {
                let sy = y as isize + t as isize - radius as isize;
                acc += kv * plane[reflect_index(sy, h) * w + x];
            }
            *slot = acc as f32;
        }
    });
    out
}
