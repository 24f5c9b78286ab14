//! Feature-statistics transforms: whitening, coloring, and adaptive
//! instance normalization.
//!
//! Whitening strips a feature map's channel covariance (leaving structure),
//! coloring imposes another map's covariance and mean, and AdaIN is the
//! cheaper per-channel mean/std variant used on the decoder skip path.

use crate::error::{Error, Result};
use crate::matrix::{sym_eig, Matrix, SymEig};
use crate::tensor::Tensor;

/// Eigenvalues below this are treated as null directions and dropped from
/// the whitening/coloring transforms instead of being floored.
pub const EIGEN_FLOOR: f64 = 1e-8;

/// Std-denominator guard for AdaIN on near-constant channels.
pub const ADAIN_EPS: f64 = 1e-5;

/// Channel statistics of a feature map: per-channel mean, channel covariance
/// (centered, divided by N-1), its eigendecomposition, and the retained rank
/// after dropping near-null eigenvalues.
#[derive(Debug, Clone)]
pub struct FeatureStats {
    pub mean: Vec<f64>,
    pub covariance: Matrix,
    pub eig: SymEig,
    pub rank: usize,
}

/// Flatten to a C x N f64 matrix and subtract per-channel means.
fn centered(f: &Tensor) -> (Matrix, Vec<f64>) {
    let (c, h, w) = f.dims();
    let n = h * w;
    let mut mean = vec![0.0f64; c];
    for (ch, m) in mean.iter_mut().enumerate() {
        let mut sum = 0.0;
        for &v in f.channel(ch) {
            sum += v as f64;
        }
        *m = sum / n as f64;
    }
    let mut x = Matrix::zeros(c, n);
    for ch in 0..c {
        let m = mean[ch];
        for (i, &v) in f.channel(ch).iter().enumerate() {
            x.set(ch, i, v as f64 - m);
        }
    }
    (x, mean)
}

/// `E_r * diag(g(lambda_r)) * E_r^T` over the retained eigenpairs.
fn eig_apply(eig: &SymEig, rank: usize, g: impl Fn(f64) -> f64) -> Result<Matrix> {
    let c = eig.vectors.rows();
    if rank == 0 {
        // no retained directions: the transform is the zero map
        return Ok(Matrix::zeros(c, c));
    }
    let mut scaled = Matrix::zeros(c, rank);
    for j in 0..rank {
        let s = g(eig.values[j]);
        for i in 0..c {
            scaled.set(i, j, eig.vectors.get(i, j) * s);
        }
    }
    let mut basis = Matrix::zeros(rank, c);
    for j in 0..rank {
        for i in 0..c {
            basis.set(j, i, eig.vectors.get(i, j));
        }
    }
    scaled.matmul(&basis)
}

fn matrix_to_tensor(m: &Matrix, h: usize, w: usize) -> Tensor {
    let c = m.rows();
    let mut out = Tensor::zeros(c, h, w);
    for ch in 0..c {
        let row = m.row(ch);
        for (slot, &v) in out.channel_mut(ch).iter_mut().zip(row) {
            *slot = v as f32;
        }
    }
    out
}

/// Eigenpairs of the channel covariance `X·X^T/(n-1)` for a wide problem
/// (more channels than locations), via the small `n x n` Gram matrix
/// `X^T·X/(n-1)`: its nonzero spectrum is the same, and each Gram eigenvector
/// `v` lifts to a covariance eigenvector `X·v/|X·v|`. Null directions get
/// zero columns — the transforms never touch them past the retained rank.
fn gram_eig(x: &Matrix, c: usize, n: usize) -> Result<SymEig> {
    let mut gram = x.transpose().matmul(x)?;
    let scale = 1.0 / (n as f64 - 1.0);
    for r in 0..n {
        for col in 0..n {
            gram.set(r, col, gram.get(r, col) * scale);
        }
    }
    let ge = sym_eig(&gram)?;
    let mut values = vec![0.0f64; c];
    let mut vectors = Matrix::zeros(c, c);
    for (j, &l) in ge.values.iter().enumerate() {
        values[j] = l;
        if l >= EIGEN_FLOOR {
            let norm = (l * (n as f64 - 1.0)).sqrt();
            for i in 0..c {
                let mut acc = 0.0;
                for k in 0..n {
                    acc += x.get(i, k) * ge.vectors.get(k, j);
                }
                vectors.set(i, j, acc / norm);
            }
        }
    }
    Ok(SymEig { values, vectors })
}

/// Removes the channel covariance of `f`: output is mean-free and, over the
/// retained rank, has identity covariance. Also returns the statistics needed
/// to color another feature with `f`'s look.
pub fn whiten(f: &Tensor) -> Result<(Tensor, FeatureStats)> {
    let (_, h, w) = f.dims();
    let n = h * w;
    if n < 2 {
        return Err(Error::Validation(format!(
            "whitening needs at least 2 spatial locations, got {n}"
        )));
    }
    let (x, mean) = centered(f);
    let mut covariance = x.matmul(&x.transpose())?;
    let scale = 1.0 / (n as f64 - 1.0);
    for r in 0..covariance.rows() {
        for c in 0..covariance.cols() {
            covariance.set(r, c, covariance.get(r, c) * scale);
        }
    }
    let channels = covariance.rows();
    let eig = if channels <= n {
        sym_eig(&covariance)?
    } else {
        gram_eig(&x, channels, n)?
    };
    let rank = eig.values.iter().take_while(|&&v| v >= EIGEN_FLOOR).count();

    let wmat = eig_apply(&eig, rank, |l| 1.0 / l.sqrt())?;
    let white = wmat.matmul(&x)?;
    let stats = FeatureStats { mean, covariance, eig, rank };
    Ok((matrix_to_tensor(&white, h, w), stats))
}

/// Imposes `style_stats`'s covariance and mean onto a whitened feature.
pub fn color(f_hat: &Tensor, style_stats: &FeatureStats) -> Result<Tensor> {
    let (c, h, w) = f_hat.dims();
    if c != style_stats.mean.len() {
        return Err(Error::Dimension(format!(
            "coloring stats cover {} channels, feature has {c}",
            style_stats.mean.len()
        )));
    }
    // flatten without centering: a whitened input is already mean-free
    let mut x = Matrix::zeros(c, h * w);
    for ch in 0..c {
        for (i, &v) in f_hat.channel(ch).iter().enumerate() {
            x.set(ch, i, v as f64);
        }
    }
    let cmat = eig_apply(&style_stats.eig, style_stats.rank, f64::sqrt)?;
    let mut colored = cmat.matmul(&x)?;
    for ch in 0..c {
        let m = style_stats.mean[ch];
        for i in 0..h * w {
            colored.set(ch, i, colored.get(ch, i) + m);
        }
    }
    Ok(matrix_to_tensor(&colored, h, w))
}

fn channel_mean_std(f: &Tensor, ch: usize) -> (f64, f64) {
    let plane = f.channel(ch);
    let n = plane.len() as f64;
    let mut sum = 0.0f64;
    for &v in plane {
        sum += v as f64;
    }
    let mean = sum / n;
    let mut var = 0.0f64;
    for &v in plane {
        let d = v as f64 - mean;
        var += d * d;
    }
    (mean, (var / n).sqrt())
}

/// Per-channel renormalization of `content_feat` to the mean/std of
/// `style_feat`. Spatial dims may differ; only channel counts must match.
pub fn adain(content_feat: &Tensor, style_feat: &Tensor) -> Result<Tensor> {
    let (c, h, w) = content_feat.dims();
    if style_feat.channels() != c {
        return Err(Error::Dimension(format!(
            "adain channels differ: content {c}, style {}",
            style_feat.channels()
        )));
    }
    let mut out = Tensor::zeros(c, h, w);
    for ch in 0..c {
        let (mu_c, sd_c) = channel_mean_std(content_feat, ch);
        let (mu_s, sd_s) = channel_mean_std(style_feat, ch);
        let gain = sd_s / (sd_c + ADAIN_EPS);
        for (slot, &v) in out.channel_mut(ch).iter_mut().zip(content_feat.channel(ch)) {
            *slot = (gain * (v as f64 - mu_c) + mu_s) as f32;
        }
    }
    Ok(out)
}
