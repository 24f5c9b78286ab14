//! The convolutional encoder (VGG-style, through the fourth block's first
//! layer) and its mirror decoder.
//!
//! Encoder: reflection-padded 3x3 convolutions with ReLU, 2x2 stride-2 mean
//! pooling after conv1_2, conv2_2, and conv3_4. The decoder replaces pooling
//! with nearest 2x upsampling and can renormalize its in-flight features to
//! style statistics (AdaIN) at three skip points on the way up.

use crate::error::{Error, Result};
use crate::tensor::{avg_pool2d, conv2d, upsample_nearest, Activation, Padding, Tensor};
use crate::transforms::adain;
use crate::weights::WeightBundle;

/// Features captured at the first layer of each encoder block, i.e. right
/// after the ReLU of conv1_1, conv2_1, conv3_1, and conv4_1.
#[derive(Debug, Clone)]
pub struct EncoderTaps {
    pub relu1_1: Tensor,
    pub relu2_1: Tensor,
    pub relu3_1: Tensor,
    pub relu4_1: Tensor,
}

fn conv_layer(x: &Tensor, bundle: &WeightBundle, name: &str) -> Result<Tensor> {
    let kernel = bundle.conv(&format!("{name}.weight"))?;
    let bias = bundle.bias(&format!("{name}.bias"))?;
    conv2d(x, &kernel, Some(bias), 1, Padding::ReflectSame, Activation::Relu)
}

/// Runs the encoder over an RGB image in [0,1] whose sides are multiples
/// of 8, returning the four block taps.
pub fn encode(image: &Tensor, bundle: &WeightBundle) -> Result<EncoderTaps> {
    let (c, h, w) = image.dims();
    if c != 3 {
        return Err(Error::Dimension(format!("encoder expects 3 channels, got {c}")));
    }
    if h % 8 != 0 || w % 8 != 0 {
        return Err(Error::Dimension(format!(
            "encoder needs dims divisible by 8, got {h}x{w}"
        )));
    }
    if image.data().iter().any(|&v| !(0.0..=1.0).contains(&v)) {
        return Err(Error::Validation("image values outside [0,1]".into()));
    }

    let relu1_1 = conv_layer(image, bundle, "conv1_1")?;
    let x = conv_layer(&relu1_1, bundle, "conv1_2")?;
    let x = avg_pool2d(&x)?;

    let relu2_1 = conv_layer(&x, bundle, "conv2_1")?;
    let x = conv_layer(&relu2_1, bundle, "conv2_2")?;
    let x = avg_pool2d(&x)?;

    let relu3_1 = conv_layer(&x, bundle, "conv3_1")?;
    let x = conv_layer(&relu3_1, bundle, "conv3_2")?;
    let x = conv_layer(&x, bundle, "conv3_3")?;
    let x = conv_layer(&x, bundle, "conv3_4")?;
    let x = avg_pool2d(&x)?;

    let relu4_1 = conv_layer(&x, bundle, "conv4_1")?;
    Ok(EncoderTaps { relu1_1, relu2_1, relu3_1, relu4_1 })
}

/// Decoder core. `enhance` is called with the in-flight feature just before
/// inv_conv3_2, inv_conv2_2, and inv_conv1_2 (levels 3, 2, 1) and may replace
/// it; the plain reconstruction path passes features through untouched.
fn run_decoder(
    feature: &Tensor,
    bundle: &WeightBundle,
    mut enhance: impl FnMut(u8, Tensor) -> Result<Tensor>,
) -> Result<Tensor> {
    let x = conv_layer(feature, bundle, "inv_conv4_1")?;
    let x = upsample_nearest(&x, 2);

    let x = conv_layer(&x, bundle, "inv_conv3_4")?;
    let x = conv_layer(&x, bundle, "inv_conv3_3")?;
    let x = enhance(3, x)?;
    let x = conv_layer(&x, bundle, "inv_conv3_2")?;
    let x = conv_layer(&x, bundle, "inv_conv3_1")?;
    let x = upsample_nearest(&x, 2);

    let x = enhance(2, x)?;
    let x = conv_layer(&x, bundle, "inv_conv2_2")?;
    let x = conv_layer(&x, bundle, "inv_conv2_1")?;
    let x = upsample_nearest(&x, 2);

    let x = enhance(1, x)?;
    let x = conv_layer(&x, bundle, "inv_conv1_2")?;
    let x = conv_layer(&x, bundle, "inv_conv1_1")?;
    Ok(x.map(|v| v.clamp(0.0, 1.0)))
}

/// Decodes a 512-channel bottleneck feature back to an RGB image in [0,1].
///
/// With `style_taps` present, the in-flight feature is renormalized (AdaIN)
/// to the statistics of the matching-depth style tap at each skip point.
/// Tap spatial dims are free — only their statistics are consumed — so taps
/// from a differently sized style image are fine.
pub fn decode(
    feature: &Tensor,
    bundle: &WeightBundle,
    style_taps: Option<&EncoderTaps>,
) -> Result<Tensor> {
    if feature.channels() != 512 {
        return Err(Error::Dimension(format!(
            "decoder expects 512 channels, got {}",
            feature.channels()
        )));
    }
    match style_taps {
        None => run_decoder(feature, bundle, |_, x| Ok(x)),
        Some(taps) => run_decoder(feature, bundle, |level, x| {
            let tap = match level {
                3 => &taps.relu3_1,
                2 => &taps.relu2_1,
                _ => &taps.relu1_1,
            };
            adain(&x, tap)
        }),
    }
}
