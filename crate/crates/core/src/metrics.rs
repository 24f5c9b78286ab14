//! Forward-only evaluation: the reconstruction/sparsity/smoothness losses the
//! network was trained under, and five agreement scores between two saliency
//! maps (used to judge how well stylization preserves where a viewer looks).

use std::fmt;

use crate::attention::AttentionFeature;
use crate::codec::{encode, EncoderTaps};
use crate::error::{Error, Result};
use crate::tensor::Tensor;
use crate::weights::WeightBundle;

/// Balancing factors for the combined loss. `pixel` weights the pixel term
/// inside the content loss; the other three weight whole parts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossWeights {
    pub content: f64,
    pub pixel: f64,
    pub attention: f64,
    pub tv: f64,
}

impl Default for LossWeights {
    fn default() -> LossWeights {
        LossWeights { content: 1.0, pixel: 10.0, attention: 6.0, tv: 10.0 }
    }
}

/// The three parts entering [`total_loss`], before balancing.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossParts {
    pub content: f64,
    pub attention: f64,
    pub tv: f64,
}

fn mean_sq_diff(a: &[f32], b: &[f32]) -> f64 {
    let mut sum = 0.0f64;
    for (&x, &y) in a.iter().zip(b) {
        let d = x as f64 - y as f64;
        sum += d * d;
    }
    sum / a.len() as f64
}

/// Perceptual + pixel reconstruction loss: mean squared activation difference
/// summed over the four encoder taps, plus `weights.pixel` times the mean
/// squared pixel difference.
pub fn content_loss(
    reconstruction: &Tensor,
    original: &Tensor,
    bundle: &WeightBundle,
    weights: &LossWeights,
) -> Result<f64> {
    if reconstruction.dims() != original.dims() {
        return Err(Error::Dimension(format!(
            "reconstruction {:?} vs original {:?}",
            reconstruction.dims(),
            original.dims()
        )));
    }
    let taps_r = encode(reconstruction, bundle)?;
    let taps_o = encode(original, bundle)?;
    Ok(content_loss_from_taps(&taps_r, &taps_o, reconstruction, original, weights))
}

/// Same loss, from taps already in hand (the reconstruction pipeline reuses
/// its own intermediates instead of encoding twice).
pub fn content_loss_from_taps(
    taps_r: &EncoderTaps,
    taps_o: &EncoderTaps,
    reconstruction: &Tensor,
    original: &Tensor,
    weights: &LossWeights,
) -> f64 {
    let perceptual = mean_sq_diff(taps_r.relu1_1.data(), taps_o.relu1_1.data())
        + mean_sq_diff(taps_r.relu2_1.data(), taps_o.relu2_1.data())
        + mean_sq_diff(taps_r.relu3_1.data(), taps_o.relu3_1.data())
        + mean_sq_diff(taps_r.relu4_1.data(), taps_o.relu4_1.data());
    perceptual + weights.pixel * mean_sq_diff(reconstruction.data(), original.data())
}

/// Mean absolute value of the attention feature. Normalizing by element count
/// keeps the term comparable across resolutions; multiply by the element
/// count to recover the raw L1 norm.
pub fn attention_sparse_loss(a: &AttentionFeature) -> f64 {
    let n = a.a.data().len();
    let sum: f64 = a.a.data().iter().map(|&v| v.abs() as f64).sum();
    sum / n as f64
}

/// Smoothness penalty: mean of squared horizontal and vertical neighbor
/// differences. The normalizer is the number of difference terms, so a
/// single-row or single-column image is still well-defined.
pub fn tv_loss(image: &Tensor) -> Result<f64> {
    let (c, h, w) = image.dims();
    let terms = c * ((h - 1) * w + h * (w - 1));
    if terms == 0 {
        return Err(Error::Validation(
            "total-variation loss needs at least two pixels along some axis".into(),
        ));
    }
    let mut sum = 0.0f64;
    for ch in 0..c {
        let plane = image.channel(ch);
        for y in 0..h {
            for x in 0..w {
                let v = plane[y * w + x] as f64;
                if y + 1 < h {
                    let d = plane[(y + 1) * w + x] as f64 - v;
                    sum += d * d;
                }
                if x + 1 < w {
                    let d = plane[y * w + x + 1] as f64 - v;
                    sum += d * d;
                }
            }
        }
    }
    Ok(sum / terms as f64)
}

/// Balanced combination of the three parts. Linear in each.
pub fn total_loss(parts: &LossParts, weights: &LossWeights) -> f64 {
    weights.content * parts.content + weights.attention * parts.attention + weights.tv * parts.tv
}

/// A pair of saliency maps to compare, with an optional set of fixation
/// pixels. Maps come from an external predictor; this module only scores
/// their agreement.
#[derive(Debug, Clone)]
pub struct SaliencyPair {
    content: Tensor,
    stylized: Tensor,
    fixations: Option<Vec<bool>>,
}

impl SaliencyPair {
    /// `fixations`, when given, is a single-channel mask of 0/1 values with
    /// at least one 1. When absent, the top decile of the content map serves
    /// as the fixation set.
    pub fn new(content: Tensor, stylized: Tensor, fixations: Option<&Tensor>) -> Result<SaliencyPair> {
        if content.channels() != 1 || stylized.channels() != 1 {
            return Err(Error::Dimension("saliency maps must be single-channel".into()));
        }
        if content.dims() != stylized.dims() {
            return Err(Error::Dimension(format!(
                "saliency maps disagree: {:?} vs {:?}",
                content.dims(),
                stylized.dims()
            )));
        }
        for t in [&content, &stylized] {
            if t.data().iter().any(|v| !v.is_finite() || *v < 0.0) {
                return Err(Error::Validation(
                    "saliency maps must be finite and non-negative".into(),
                ));
            }
        }
        let fixations = match fixations {
            None => None,
            Some(mask) => {
                if mask.dims() != content.dims() {
                    return Err(Error::Dimension(format!(
                        "fixation mask {:?} does not match maps {:?}",
                        mask.dims(),
                        content.dims()
                    )));
                }
                if mask.data().iter().any(|&v| v != 0.0 && v != 1.0) {
                    return Err(Error::Validation("fixation mask must be 0/1 valued".into()));
                }
                let flags: Vec<bool> = mask.data().iter().map(|&v| v == 1.0).collect();
                if !flags.iter().any(|&f| f) {
                    return Err(Error::Validation("fixation mask selects no pixels".into()));
                }
                Some(flags)
            }
        };
        Ok(SaliencyPair { content, stylized, fixations })
    }

    pub fn content(&self) -> &Tensor {
        &self.content
    }

    pub fn stylized(&self) -> &Tensor {
        &self.stylized
    }

    /// The effective fixation set: the provided mask, or the pixels at or
    /// above the content map's 90th percentile.
    pub fn fixation_flags(&self) -> Vec<bool> {
        if let Some(f) = &self.fixations {
            return f.clone();
        }
        let vals = self.content.data();
        let mut sorted: Vec<f32> = vals.to_vec();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let threshold = sorted[(0.9 * (sorted.len() - 1) as f64).floor() as usize];
        vals.iter().map(|&v| v >= threshold).collect()
    }
}

/// The five agreement scores. Higher is better for all but `kl`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SaliencyScores {
    pub auc_judd: f64,
    pub sim: f64,
    pub nss: f64,
    pub cc: f64,
    pub kl: f64,
}

impl SaliencyScores {
    pub const CSV_HEADER: &'static str = "auc_judd,sim,nss,cc,kl";

    pub fn csv_row(&self) -> String {
        format!("{},{},{},{},{}", self.auc_judd, self.sim, self.nss, self.cc, self.kl)
    }
}

impl fmt::Display for SaliencyScores {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "auc_judd={} sim={} nss={} cc={} kl={}",
            self.auc_judd, self.sim, self.nss, self.cc, self.kl
        )
    }
}

fn sum_normalized(t: &Tensor) -> Option<Vec<f64>> {
    let total: f64 = t.data().iter().map(|&v| v as f64).sum();
    if total <= 0.0 {
        return None;
    }
    Some(t.data().iter().map(|&v| v as f64 / total).collect())
}

fn pearson(a: &[f32], b: &[f32]) -> f64 {
    let n = a.len() as f64;
    let ma: f64 = a.iter().map(|&v| v as f64).sum::<f64>() / n;
    let mb: f64 = b.iter().map(|&v| v as f64).sum::<f64>() / n;
    let mut cov = 0.0;
    let mut va = 0.0;
    let mut vb = 0.0;
    for (&x, &y) in a.iter().zip(b) {
        let dx = x as f64 - ma;
        let dy = y as f64 - mb;
        cov += dx * dy;
        va += dx * dx;
        vb += dy * dy;
    }
    if va == 0.0 || vb == 0.0 {
        return 0.0; // correlation undefined for a constant map
    }
    cov / (va.sqrt() * vb.sqrt())
}

/// ROC area with the map as classifier score for fixation vs. non-fixation
/// pixels, computed from average ranks so ties contribute half credit.
fn auc_judd(scores: &[f32], fixation: &[bool]) -> f64 {
    let n = scores.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| scores[i].partial_cmp(&scores[j]).unwrap());
    let mut ranks = vec![0.0f64; n];
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0; // 1-based average rank of the tie run
        for &idx in &order[i..=j] {
            ranks[idx] = avg;
        }
        i = j + 1;
    }
    let n_pos = fixation.iter().filter(|&&f| f).count();
    let n_neg = n - n_pos;
    if n_neg == 0 {
        return 1.0; // every pixel fixated: nothing to rank against
    }
    let rank_sum: f64 = (0..n).filter(|&i| fixation[i]).map(|i| ranks[i]).sum();
    (rank_sum - (n_pos * (n_pos + 1)) as f64 / 2.0) / (n_pos * n_neg) as f64
}

/// Computes all five scores. Degenerate inputs (constant or all-zero maps)
/// score 0 on the affected metrics instead of propagating NaN.
pub fn saliency_metrics(pair: &SaliencyPair) -> SaliencyScores {
    let content = pair.content().data();
    let stylized = pair.stylized().data();
    let fixation = pair.fixation_flags();

    let cc = pearson(stylized, content);

    let p = sum_normalized(pair.stylized());
    let q = sum_normalized(pair.content());
    let (sim, kl) = match (&p, &q) {
        (Some(p), Some(q)) => {
            let sim = p.iter().zip(q).map(|(&a, &b)| a.min(b)).sum();
            let kl = q
                .iter()
                .zip(p)
                .filter(|&(&qi, _)| qi > 0.0)
                .map(|(&qi, &pi)| qi * (qi / (pi + 1e-12)).ln())
                .sum();
            (sim, kl)
        }
        _ => (0.0, 0.0),
    };

    let n = stylized.len() as f64;
    let mean: f64 = stylized.iter().map(|&v| v as f64).sum::<f64>() / n;
    let var: f64 = stylized.iter().map(|&v| (v as f64 - mean).powi(2)).sum::<f64>() / n;
    let nss = if var == 0.0 {
        0.0
    } else {
        let sd = var.sqrt();
        let (mut acc, mut cnt) = (0.0f64, 0usize);
        for (i, &fix) in fixation.iter().enumerate() {
            if fix {
                acc += (stylized[i] as f64 - mean) / sd;
                cnt += 1;
            }
        }
        acc / cnt as f64
    };

    SaliencyScores { auc_judd: auc_judd(stylized, &fixation), sim, nss, cc, kl }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::weights::WeightBundle;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn image(seed: u64, c: usize, h: usize, w: usize) -> Tensor {
        let mut r = ChaCha8Rng::seed_from_u64(seed);
        let data = (0..c * h * w).map(|_| r.gen_range(0.0..=1.0)).collect();
        Tensor::from_vec(c, h, w, data).unwrap()
    }

    fn grid(seed: u64) -> Tensor {
        image(seed, 1, 4, 4)
    }

    #[test]
    fn content_loss_zero_on_identical_images() {
        let bundle = WeightBundle::random(7);
        let img = image(1, 3, 16, 16);
        let loss = content_loss(&img, &img, &bundle, &LossWeights::default()).unwrap();
        assert_eq!(loss, 0.0);
    }

    #[test]
    fn content_loss_zero_with_dead_encoder() {
        let mut entries = WeightBundle::random(0).entries().to_vec();
        for e in &mut entries {
            e.data.iter_mut().for_each(|v| *v = 0.0);
        }
        let bundle = WeightBundle::from_entries(entries, "rgb01").unwrap();
        let weights = LossWeights { pixel: 0.0, ..LossWeights::default() };
        let a = image(2, 3, 8, 8);
        let b = image(3, 3, 8, 8);
        assert_eq!(content_loss(&a, &b, &bundle, &weights).unwrap(), 0.0);
    }

    #[test]
    fn content_loss_matches_per_tap_oracle() {
        let bundle = WeightBundle::random(8);
        let a = image(4, 3, 16, 16);
        let b = image(5, 3, 16, 16);
        let weights = LossWeights::default();
        let got = content_loss(&a, &b, &bundle, &weights).unwrap();

        let ta = encode(&a, &bundle).unwrap();
        let tb = encode(&b, &bundle).unwrap();
        let mse = |x: &[f32], y: &[f32]| -> f64 {
            x.iter()
                .zip(y)
                .map(|(&p, &q)| (p as f64 - q as f64).powi(2))
                .sum::<f64>()
                / x.len() as f64
        };
        let want = mse(ta.relu1_1.data(), tb.relu1_1.data())
            + mse(ta.relu2_1.data(), tb.relu2_1.data())
            + mse(ta.relu3_1.data(), tb.relu3_1.data())
            + mse(ta.relu4_1.data(), tb.relu4_1.data())
            + 10.0 * mse(a.data(), b.data());
        assert!((got - want).abs() < 1e-6 * want.max(1.0));
    }

    #[test]
    fn content_loss_rejects_mismatched_dims() {
        let bundle = WeightBundle::random(9);
        let a = image(6, 3, 16, 16);
        let b = image(7, 3, 8, 8);
        assert!(matches!(
            content_loss(&a, &b, &bundle, &LossWeights::default()),
            Err(Error::Dimension(_))
        ));
    }

    #[test]
    fn sparse_loss_zero_and_constant() {
        let zero = AttentionFeature { a: Tensor::zeros(4, 3, 3) };
        assert_eq!(attention_sparse_loss(&zero), 0.0);
        let constant = AttentionFeature { a: Tensor::filled(4, 3, 3, -0.75) };
        assert!((attention_sparse_loss(&constant) - 0.75).abs() < 1e-12);
    }

    #[test]
    fn sparse_loss_matches_mean_abs_oracle() {
        let mut r = ChaCha8Rng::seed_from_u64(10);
        let data: Vec<f32> = (0..4 * 5 * 5).map(|_| r.gen_range(-3.0..3.0)).collect();
        let want =
            data.iter().map(|&v| v.abs() as f64).sum::<f64>() / data.len() as f64;
        let a = AttentionFeature { a: Tensor::from_vec(4, 5, 5, data).unwrap() };
        assert!((attention_sparse_loss(&a) - want).abs() < 1e-7);
    }

    #[test]
    fn tv_loss_constant_is_zero() {
        assert_eq!(tv_loss(&Tensor::filled(3, 4, 4, 0.3)).unwrap(), 0.0);
    }

    #[test]
    fn tv_loss_single_difference() {
        let img = Tensor::from_vec(1, 1, 2, vec![0.2, 0.9]).unwrap();
        let d = 0.9f32 as f64 - 0.2f32 as f64;
        assert!((tv_loss(&img).unwrap() - d * d).abs() < 1e-12);
    }

    #[test]
    fn tv_loss_matches_nested_loop_oracle() {
        let img = image(11, 3, 5, 6);
        let got = tv_loss(&img).unwrap();
        let mut sum = 0.0f64;
        let mut count = 0usize;
        for c in 0..3 {
            for y in 0..5 {
                for x in 0..6 {
                    if y + 1 < 5 {
                        let d = img.get(c, y + 1, x) as f64 - img.get(c, y, x) as f64;
                        sum += d * d;
                        count += 1;
                    }
                    if x + 1 < 6 {
                        let d = img.get(c, y, x + 1) as f64 - img.get(c, y, x) as f64;
                        sum += d * d;
                        count += 1;
                    }
                }
            }
        }
        assert!((got - sum / count as f64).abs() < 1e-6);
    }

    #[test]
    fn tv_loss_rejects_single_pixel() {
        assert!(matches!(tv_loss(&Tensor::zeros(3, 1, 1)), Err(Error::Validation(_))));
    }

    #[test]
    fn total_loss_identities() {
        let w = LossWeights::default();
        assert_eq!(total_loss(&LossParts { content: 0.0, attention: 0.0, tv: 0.0 }, &w), 0.0);
        let unit = LossParts { content: 1.0, attention: 1.0, tv: 1.0 };
        assert_eq!(total_loss(&unit, &w), 17.0);
    }

    #[test]
    fn total_loss_is_linear() {
        let mut r = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..20 {
            let w = LossWeights {
                content: r.gen_range(0.0..5.0),
                pixel: r.gen_range(0.0..5.0),
                attention: r.gen_range(0.0..5.0),
                tv: r.gen_range(0.0..5.0),
            };
            let p = LossParts {
                content: r.gen_range(0.0..5.0),
                attention: r.gen_range(0.0..5.0),
                tv: r.gen_range(0.0..5.0),
            };
            let want = w.content * p.content + w.attention * p.attention + w.tv * p.tv;
            assert_eq!(total_loss(&p, &w), want);
            let doubled = LossParts { content: 2.0 * p.content, ..p };
            assert!(
                (total_loss(&doubled, &w) - (want + w.content * p.content)).abs()
                    < 1e-12 * want.max(1.0)
            );
        }
    }

    #[test]
    fn identical_maps_agree_perfectly() {
        let m = grid(20);
        let pair = SaliencyPair::new(m.clone(), m, None).unwrap();
        let s = saliency_metrics(&pair);
        assert!((s.cc - 1.0).abs() < 1e-9);
        assert!((s.sim - 1.0).abs() < 1e-9);
        assert!(s.kl <= 1e-9);
    }

    #[test]
    fn constant_stylized_map_scores_zero() {
        let pair =
            SaliencyPair::new(grid(21), Tensor::filled(1, 4, 4, 0.5), None).unwrap();
        let s = saliency_metrics(&pair);
        assert_eq!(s.nss, 0.0);
        assert_eq!(s.cc, 0.0);
    }

    #[test]
    fn hand_built_case_matches_direct_formula_oracle() {
        #[rustfmt::skip]
        let content = Tensor::from_vec(1, 4, 4, vec![
            0.10, 0.20, 0.30, 0.40,
            0.50, 0.60, 0.70, 0.80,
            0.05, 0.15, 0.25, 0.35,
            0.45, 0.55, 0.65, 0.90,
        ]).unwrap();
        #[rustfmt::skip]
        let stylized = Tensor::from_vec(1, 4, 4, vec![
            0.15, 0.25, 0.20, 0.50,
            0.40, 0.70, 0.60, 0.75,
            0.10, 0.10, 0.30, 0.30,
            0.50, 0.45, 0.70, 0.80,
        ]).unwrap();
        let mut mask = Tensor::zeros(1, 4, 4);
        mask.set(0, 1, 3, 1.0);
        mask.set(0, 3, 3, 1.0);
        mask.set(0, 1, 1, 1.0);

        let pair = SaliencyPair::new(content.clone(), stylized.clone(), Some(&mask)).unwrap();
        let s = saliency_metrics(&pair);

        let c: Vec<f64> = content.data().iter().map(|&v| v as f64).collect();
        let p: Vec<f64> = stylized.data().iter().map(|&v| v as f64).collect();
        let fix = [7usize, 15, 5];

        // Pearson, from the textbook definition
        let mc = c.iter().sum::<f64>() / 16.0;
        let mp = p.iter().sum::<f64>() / 16.0;
        let cov: f64 = c.iter().zip(&p).map(|(a, b)| (a - mc) * (b - mp)).sum();
        let vc: f64 = c.iter().map(|a| (a - mc) * (a - mc)).sum();
        let vp: f64 = p.iter().map(|b| (b - mp) * (b - mp)).sum();
        let cc = cov / (vc.sqrt() * vp.sqrt());
        assert!((s.cc - cc).abs() < 1e-6);

        // SIM and KL on sum-normalized maps
        let sc: f64 = c.iter().sum();
        let sp: f64 = p.iter().sum();
        let sim: f64 = c.iter().zip(&p).map(|(a, b)| (a / sc).min(b / sp)).sum();
        assert!((s.sim - sim).abs() < 1e-6);
        let kl: f64 = c
            .iter()
            .zip(&p)
            .map(|(a, b)| {
                let q = a / sc;
                let pp = b / sp;
                q * (q / (pp + 1e-12)).ln()
            })
            .sum();
        assert!((s.kl - kl).abs() < 1e-6);

        // NSS: z-score then average over fixations
        let var = p.iter().map(|b| (b - mp) * (b - mp)).sum::<f64>() / 16.0;
        let nss: f64 =
            fix.iter().map(|&i| (p[i] - mp) / var.sqrt()).sum::<f64>() / fix.len() as f64;
        assert!((s.nss - nss).abs() < 1e-6);

        // AUC by explicit pairwise comparison, ties at half credit
        let mut wins = 0.0f64;
        let mut pairs = 0.0f64;
        for &i in &fix {
            for j in 0..16 {
                if fix.contains(&j) {
                    continue;
                }
                pairs += 1.0;
                if p[i] > p[j] {
                    wins += 1.0;
                } else if p[i] == p[j] {
                    wins += 0.5;
                }
            }
        }
        assert!((s.auc_judd - wins / pairs).abs() < 1e-6);
    }

    #[test]
    fn auc_is_one_when_fixations_are_top_scored() {
        let mut stylized = Tensor::zeros(1, 4, 4);
        let mut mask = Tensor::zeros(1, 4, 4);
        for (i, &(y, x)) in [(0usize, 1usize), (2, 2), (3, 0)].iter().enumerate() {
            stylized.set(0, y, x, 0.9 + i as f32 * 0.01);
            mask.set(0, y, x, 1.0);
        }
        let pair = SaliencyPair::new(grid(22), stylized, Some(&mask)).unwrap();
        assert_eq!(saliency_metrics(&pair).auc_judd, 1.0);
    }

    #[test]
    fn cc_is_symmetric() {
        let a = grid(23);
        let b = grid(24);
        let ab = saliency_metrics(&SaliencyPair::new(a.clone(), b.clone(), None).unwrap());
        let ba = saliency_metrics(&SaliencyPair::new(b, a, None).unwrap());
        assert!((ab.cc - ba.cc).abs() < 1e-12);
    }

    #[test]
    fn derived_fixations_cover_top_decile() {
        let m = grid(25);
        let pair = SaliencyPair::new(m.clone(), grid(26), None).unwrap();
        let flags = pair.fixation_flags();
        assert!(flags.iter().any(|&f| f));
        // every selected pixel scores at least as high as every unselected one
        let lo = flags
            .iter()
            .zip(m.data())
            .filter(|(&f, _)| f)
            .map(|(_, &v)| v)
            .fold(f32::INFINITY, f32::min);
        let hi = flags
            .iter()
            .zip(m.data())
            .filter(|(&f, _)| !f)
            .map(|(_, &v)| v)
            .fold(f32::NEG_INFINITY, f32::max);
        assert!(lo >= hi);
    }

    #[test]
    fn pair_construction_rejects_bad_inputs() {
        let a = grid(27);
        let wrong = image(28, 1, 3, 3);
        assert!(matches!(
            SaliencyPair::new(a.clone(), wrong, None),
            Err(Error::Dimension(_))
        ));
        let two_channel = image(29, 2, 4, 4);
        assert!(matches!(
            SaliencyPair::new(a.clone(), two_channel, None),
            Err(Error::Dimension(_))
        ));
        let negative = a.map(|v| v - 0.5);
        assert!(matches!(
            SaliencyPair::new(a.clone(), negative, None),
            Err(Error::Validation(_))
        ));
        let empty_mask = Tensor::zeros(1, 4, 4);
        assert!(matches!(
            SaliencyPair::new(a.clone(), grid(30), Some(&empty_mask)),
            Err(Error::Validation(_))
        ));
        let soft_mask = Tensor::filled(1, 4, 4, 0.5);
        assert!(matches!(
            SaliencyPair::new(a, grid(31), Some(&soft_mask)),
            Err(Error::Validation(_))
        ));
    }

    #[test]
    fn score_formatting() {
        let s = SaliencyScores { auc_judd: 1.0, sim: 0.5, nss: 2.0, cc: 0.25, kl: 0.125 };
        assert_eq!(SaliencyScores::CSV_HEADER, "auc_judd,sim,nss,cc,kl");
        assert_eq!(s.csv_row(), "1,0.5,2,0.25,0.125");
        assert_eq!(s.to_string(), "auc_judd=1 sim=0.5 nss=2 cc=0.25 kl=0.125");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        /// Range invariants: SIM and AUC live in [0,1], KL is bounded below
        /// by the tiny slack the epsilon introduces, CC in [-1,1].
        #[test]
        fn metric_ranges(seed in 0u64..10_000) {
            let pair = SaliencyPair::new(grid(seed), grid(seed.wrapping_add(1)), None).unwrap();
            let s = saliency_metrics(&pair);
            prop_assert!((0.0..=1.0).contains(&s.sim));
            prop_assert!((0.0..=1.0).contains(&s.auc_judd));
            prop_assert!((-1.0..=1.0).contains(&s.cc));
            prop_assert!(s.kl >= -1e-8);
            prop_assert!(s.nss.is_finite());
        }
    }
}
