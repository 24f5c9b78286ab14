//! Self-attention over a feature map: every spatial location attends to all
//! others through learned 1x1 projections, yielding a feature that highlights
//! what the network keeps looking at.
//!
//! The energy between locations i and j is the dot product of their projected
//! vectors; a row softmax turns energies into weights; the attended output is
//! the weighted sum of value projections, reshaped back onto the grid.

use crate::error::{Error, Result};
use crate::matrix::{softmax_rows, Matrix};
use crate::tensor::{conv2d, Activation, ConvWeight, Padding, Tensor};
use crate::weights::WeightBundle;

/// Dense attention materializes an N x N energy matrix; inputs with more
/// spatial locations than this are refused rather than silently tiled.
pub const DEFAULT_ENERGY_CAP: usize = 4096;

/// The three bias-free 1x1 projections: `theta_h` (values, C -> C) and
/// `theta_u` / `theta_g` (queries/keys, C -> C/2).
#[derive(Debug, Clone)]
pub struct AttentionParams {
    pub theta_h: ConvWeight,
    pub theta_u: ConvWeight,
    pub theta_g: ConvWeight,
    /// Multiplier on the raw dot-product energies. The reference formulation
    /// applies none; 1/sqrt(C/2) slots in here if foreign weights need it.
    pub energy_scale: f64,
    /// Maximum HW for which the dense energy matrix may be built.
    pub energy_cap: usize,
}

impl AttentionParams {
    pub fn new(theta_h: ConvWeight, theta_u: ConvWeight, theta_g: ConvWeight) -> Result<AttentionParams> {
        if theta_u.out_channels != theta_g.out_channels {
            return Err(Error::Dimension(format!(
                "query/key projections disagree: {} vs {} output channels",
                theta_u.out_channels, theta_g.out_channels
            )));
        }
        for (name, t) in [("theta_h", &theta_h), ("theta_u", &theta_u), ("theta_g", &theta_g)] {
            if t.kh != 1 || t.kw != 1 {
                return Err(Error::Dimension(format!(
                    "{name} must be a 1x1 projection, got {}x{}",
                    t.kh, t.kw
                )));
            }
        }
        if theta_h.out_channels != theta_h.in_channels {
            return Err(Error::Dimension(format!(
                "theta_h must preserve channel count, got {} -> {}",
                theta_h.in_channels, theta_h.out_channels
            )));
        }
        Ok(AttentionParams {
            theta_h,
            theta_u,
            theta_g,
            energy_scale: 1.0,
            energy_cap: DEFAULT_ENERGY_CAP,
        })
    }

    pub fn from_bundle(bundle: &WeightBundle) -> Result<AttentionParams> {
        AttentionParams::new(
            bundle.conv("theta_h.weight")?,
            bundle.conv("theta_u.weight")?,
            bundle.conv("theta_g.weight")?,
        )
    }

    fn check_input(&self, f: &Tensor) -> Result<()> {
        let c = f.channels();
        if self.theta_u.in_channels != c || self.theta_h.in_channels != c {
            return Err(Error::Dimension(format!(
                "attention projections expect {} channels, feature has {c}",
                self.theta_u.in_channels
            )));
        }
        let n = f.height() * f.width();
        if n > self.energy_cap {
            return Err(Error::Validation(format!(
                "attention energy for {n} locations exceeds the {} cap; reduce the input size",
                self.energy_cap
            )));
        }
        Ok(())
    }
}

/// The attended feature, same dims as the input it was computed from.
#[derive(Debug, Clone)]
pub struct AttentionFeature {
    pub a: Tensor,
}

fn project(f: &Tensor, theta: &ConvWeight) -> Result<Tensor> {
    conv2d(f, theta, None, 1, Padding::Valid, Activation::None)
}

/// Rows of the flattened map: location i (row-major over the grid) becomes
/// the i-th row with one column per channel.
fn flatten_locations(t: &Tensor) -> Matrix {
    let (c, h, w) = t.dims();
    let n = h * w;
    let mut m = Matrix::zeros(n, c);
    for ch in 0..c {
        for (i, &v) in t.channel(ch).iter().enumerate() {
            m.set(i, ch, v as f64);
        }
    }
    m
}

/// Pairwise location energies: dot products of query and key projections.
pub fn attention_energy(f: &Tensor, params: &AttentionParams) -> Result<Matrix> {
    params.check_input(f)?;
    let q = flatten_locations(&project(f, &params.theta_u)?);
    let k = flatten_locations(&project(f, &params.theta_g)?);
    let mut e = q.matmul(&k.transpose())?;
    if params.energy_scale != 1.0 {
        let scaled: Vec<f64> = e.data().iter().map(|&v| v * params.energy_scale).collect();
        e = Matrix::from_vec(e.rows(), e.cols(), scaled)?;
    }
    Ok(e)
}

/// The attended feature: softmax-weighted mixture of value projections at
/// every location, reshaped to the input's dims.
pub fn attention_feature(f: &Tensor, params: &AttentionParams) -> Result<AttentionFeature> {
    let e = attention_energy(f, params)?;
    let alpha = softmax_rows(&e);
    let values = flatten_locations(&project(f, &params.theta_h)?);
    let mixed = alpha.matmul(&values)?;

    let (c, h, w) = f.dims();
    let mut a = Tensor::zeros(c, h, w);
    for ch in 0..c {
        for (i, slot) in a.channel_mut(ch).iter_mut().enumerate() {
            *slot = mixed.get(i, ch) as f32;
        }
    }
    Ok(AttentionFeature { a })
}

/// Residual application: `r = a ⊙ f` element-wise, `o = r + f`.
pub fn attention_output(f: &Tensor, a: &AttentionFeature) -> Result<(Tensor, Tensor)> {
    if f.dims() != a.a.dims() {
        return Err(Error::Dimension(format!(
            "attention feature dims {:?} do not match input {:?}",
            a.a.dims(),
            f.dims()
        )));
    }
    let r_data: Vec<f32> = a.a.data().iter().zip(f.data()).map(|(&av, &fv)| av * fv).collect();
    let o_data: Vec<f32> = r_data.iter().zip(f.data()).map(|(&rv, &fv)| rv + fv).collect();
    let (c, h, w) = f.dims();
    let r = Tensor::from_vec(c, h, w, r_data)?;
    let o = Tensor::from_vec(c, h, w, o_data)?;
    Ok((o, r))
}
