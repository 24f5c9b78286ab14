//! Patch-level style substitution: every stride-1 patch of the (whitened)
//! content feature is replaced by its best-matching style patch under
//! normalized cross-correlation, and overlapping placements are averaged.
//!
//! Matching normalizes style patches only — a content patch's own norm is a
//! positive per-location constant and cannot change its argmax. Scores are
//! accumulated in f64 in a fixed (channel, row, column) order so the winning
//! index is reproducible bit-for-bit, and the overlap average divides an f64
//! sum by an integer count, which makes a self-swap return its input exactly.

use crate::error::{Error, Result};
use crate::parallel;
use crate::tensor::{resize_bilinear, Tensor};

/// All stride-1 patches of one feature map, with per-patch Frobenius norms.
/// Patch index j = grid_y * grid_w + grid_x (row-major over valid offsets).
/// Each patch is stored as one contiguous row so the scoring loop runs over
/// dense slices instead of strided gathers from the source feature.
pub struct PatchBank {
    rows: Vec<f32>,
    row_len: usize,
    patch: usize,
    grid_h: usize,
    grid_w: usize,
    norms: Vec<f64>,
}

impl PatchBank {
    pub fn build(style: &Tensor, patch: usize) -> Result<PatchBank> {
        check_patch_size(patch)?;
        let (c, h, w) = style.dims();
        if h < patch || w < patch {
            return Err(Error::Validation(format!(
                "style feature {h}x{w} is smaller than the {patch}x{patch} patch"
            )));
        }
        let (grid_h, grid_w) = (h - patch + 1, w - patch + 1);
        let row_len = c * patch * patch;
        let data = style.data();
        let mut rows = vec![0.0f32; grid_h * grid_w * row_len];
        for j in 0..grid_h * grid_w {
            let (gy, gx) = (j / grid_w, j % grid_w);
            let dst = &mut rows[j * row_len..(j + 1) * row_len];
            let mut t = 0;
            for ch in 0..c {
                for dy in 0..patch {
                    let base = (ch * h + gy + dy) * w + gx;
                    dst[t..t + patch].copy_from_slice(&data[base..base + patch]);
                    t += patch;
                }
            }
        }
        let norms = rows
            .chunks_exact(row_len)
            .map(|row| row.iter().map(|&v| v as f64 * v as f64).sum::<f64>().sqrt())
            .collect();
        Ok(PatchBank {
            rows,
            row_len,
            patch,
            grid_h,
            grid_w,
            norms,
        })
    }

    pub fn len(&self) -> usize {
        self.grid_h * self.grid_w
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_zero_norm(&self, j: usize) -> bool {
        self.norms[j] == 0.0
    }

    /// Raw patch values in (channel, row, column) order.
    pub fn patch_values(&self, j: usize) -> Vec<f64> {
        self.row(j).iter().map(|&v| v as f64).collect()
    }

    /// Unit-norm patch values, or None for a zero-norm patch.
    pub fn normalized_patch(&self, j: usize) -> Option<Vec<f64>> {
        if self.is_zero_norm(j) {
            return None;
        }
        let n = self.norms[j];
        Some(self.row(j).iter().map(|&v| v as f64 / n).collect())
    }

    #[inline]
    fn row(&self, j: usize) -> &[f32] {
        &self.rows[j * self.row_len..(j + 1) * self.row_len]
    }

    /// Value at (c, gy+dy, gx+dx) for patch j.
    #[inline]
    fn at(&self, j: usize, c: usize, dy: usize, dx: usize) -> f64 {
        self.row(j)[(c * self.patch + dy) * self.patch + dx] as f64
    }
}

/// The fusion inputs: stroke 0 is the plain whitened content feature, strokes
/// 1..=K are swapped variants ordered by ascending style scale.
#[derive(Debug, Clone)]
pub struct StrokeSet {
    pub strokes: Vec<Tensor>,
    pub betas: Vec<f32>,
}

impl StrokeSet {
    pub fn len(&self) -> usize {
        self.strokes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.strokes.is_empty()
    }
}

fn check_patch_size(patch: usize) -> Result<()> {
    if patch == 0 || patch % 2 == 0 {
        return Err(Error::Config(format!(
            "patch size must be odd and positive, got {patch}"
        )));
    }
    Ok(())
}

/// For every content location, the index of the style patch with the highest
/// normalized cross-correlation (ties -> lowest index; zero-norm style
/// patches are not candidates).
///
/// Content locations are scored in blocks so one pass over the style rows
/// serves the whole block; each dot product still accumulates in f64 in
/// (channel, row, column) order, so scores — and therefore winners — do not
/// depend on the blocking or the thread count.
fn best_match_indices(content: &Tensor, bank: &PatchBank) -> Vec<usize> {
    const BLOCK: usize = 8;
    let (c_n, h, w) = content.dims();
    let p = bank.patch;
    let (grid_h, grid_w) = (h - p + 1, w - p + 1);
    let n = grid_h * grid_w;
    let d = bank.row_len;
    let data = content.data();

    let blocks = parallel::map_collect(n.div_ceil(BLOCK), |b| {
        let lo = b * BLOCK;
        let hi = (lo + BLOCK).min(n);
        let nb = hi - lo;
        // interleaved gather: value t of block slot s lands at [t * nb + s],
        // so the scoring loop reads one contiguous group per t
        let mut patches = vec![0.0f32; nb * d];
        for (slot, i) in (lo..hi).enumerate() {
            let (cy, cx) = (i / grid_w, i % grid_w);
            let mut t = 0;
            for c in 0..c_n {
                for dy in 0..p {
                    let base = (c * h + cy + dy) * w + cx;
                    for dx in 0..p {
                        patches[(t + dx) * nb + slot] = data[base + dx];
                    }
                    t += p;
                }
            }
        }
        let mut best = vec![usize::MAX; nb];
        let mut best_score = vec![f64::NEG_INFINITY; nb];
        for j in 0..bank.len() {
            if bank.is_zero_norm(j) {
                continue;
            }
            let row = bank.row(j);
            let norm = bank.norms[j];
            let mut acc = [0.0f64; BLOCK];
            // one frozen accumulation chain per slot; all advance in lock
            // step so they fill the latency of each other's f64 adds
            if nb == BLOCK {
                for (t, &rv) in row.iter().enumerate() {
                    let s = rv as f64;
                    let group = &patches[t * BLOCK..(t + 1) * BLOCK];
                    for k in 0..BLOCK {
                        acc[k] += group[k] as f64 * s;
                    }
                }
            } else {
                for (t, &rv) in row.iter().enumerate() {
                    let s = rv as f64;
                    let group = &patches[t * nb..t * nb + nb];
                    for k in 0..nb {
                        acc[k] += group[k] as f64 * s;
                    }
                }
            }
            for k in 0..nb {
                let score = acc[k] / norm;
                if score > best_score[k] {
                    best_score[k] = score;
                    best[k] = j;
                }
            }
        }
        best
    });
    blocks.into_iter().flatten().collect()
}

/// Shared validation for the swap entry points: checks shapes, builds the
/// style patch bank, and refuses a bank with no usable patch.
fn validated_bank(content_white: &Tensor, style_white: &Tensor, patch: usize) -> Result<PatchBank> {
    check_patch_size(patch)?;
    let (c_n, h, w) = content_white.dims();
    if style_white.channels() != c_n {
        return Err(Error::Dimension(format!(
            "content has {c_n} channels, style has {}",
            style_white.channels()
        )));
    }
    if h < patch || w < patch {
        return Err(Error::Validation(format!(
            "content feature {h}x{w} is smaller than the {patch}x{patch} patch"
        )));
    }
    let bank = PatchBank::build(style_white, patch)?;
    if (0..bank.len()).all(|j| bank.is_zero_norm(j)) {
        return Err(Error::Validation("every style patch has zero norm".into()));
    }
    Ok(bank)
}

/// The chosen style-patch index for every content patch location, row-major
/// over the valid patch grid. Exposed so callers can inspect or verify the
/// matching independently of the reconstruction.
pub fn matched_patch_indices(
    content_white: &Tensor,
    style_white: &Tensor,
    patch: usize,
) -> Result<Vec<usize>> {
    let bank = validated_bank(content_white, style_white, patch)?;
    Ok(best_match_indices(content_white, &bank))
}

/// Replaces every content patch by its best style match and averages the
/// overlapping placements. Output dims equal content dims.
pub fn style_swap(content_white: &Tensor, style_white: &Tensor, patch: usize) -> Result<Tensor> {
    let bank = validated_bank(content_white, style_white, patch)?;
    let (c_n, h, w) = content_white.dims();
    let best = best_match_indices(content_white, &bank);

    let (grid_h, grid_w) = (h - patch + 1, w - patch + 1);
    let mut out = Tensor::zeros(c_n, h, w);
    parallel::for_each_chunk(out.data_mut(), w, |row_idx, row| {
        let c = row_idx / h;
        let y = row_idx % h;
        let gy_lo = (y + 1).saturating_sub(patch);
        let gy_hi = y.min(grid_h - 1);
        for (x, slot) in row.iter_mut().enumerate() {
            let gx_lo = (x + 1).saturating_sub(patch);
            let gx_hi = x.min(grid_w - 1);
            let mut sum = 0.0f64;
            let mut count = 0u32;
            for gy in gy_lo..=gy_hi {
                for gx in gx_lo..=gx_hi {
                    let j = best[gy * grid_w + gx];
                    sum += bank.at(j, c, y - gy, x - gx);
                    count += 1;
                }
            }
            *slot = (sum / count as f64) as f32;
        }
    });
    Ok(out)
}

/// Swaps against the style feature resized to each scale in `betas`, in the
/// order given. Every result has the content feature's dims.
pub fn multi_scale_swap(
    content_white: &Tensor,
    style_white: &Tensor,
    betas: &[f32],
    patch: usize,
) -> Result<Vec<Tensor>> {
    check_patch_size(patch)?;
    betas
        .iter()
        .map(|&beta| {
            if !(beta > 0.0) || !beta.is_finite() {
                return Err(Error::Config(format!("scale {beta} is not a positive real")));
            }
            let resized = resize_bilinear(style_white, beta)?;
            if resized.height() < patch || resized.width() < patch {
                return Err(Error::Config(format!(
                    "beta {beta} shrinks the style feature to {}x{}, smaller than the {patch}x{patch} patch",
                    resized.height(),
                    resized.width()
                )));
            }
            style_swap(content_white, &resized, patch)
        })
        .collect()
}

/// Assembles fusion inputs: the whitened content feature first, then the
/// swapped features sorted by ascending scale.
pub fn build_stroke_set(
    content_white: &Tensor,
    swapped: &[Tensor],
    betas: &[f32],
) -> Result<StrokeSet> {
    if swapped.len() != betas.len() {
        return Err(Error::Dimension(format!(
            "{} swapped features but {} scale coefficients",
            swapped.len(),
            betas.len()
        )));
    }
    for (i, s) in swapped.iter().enumerate() {
        if s.dims() != content_white.dims() {
            return Err(Error::Dimension(format!(
                "swapped feature {i} has dims {:?}, content has {:?}",
                s.dims(),
                content_white.dims()
            )));
        }
    }
    let mut order: Vec<usize> = (0..betas.len()).collect();
    order.sort_by(|&a, &b| betas[a].partial_cmp(&betas[b]).unwrap());

    let mut strokes = Vec::with_capacity(swapped.len() + 1);
    strokes.push(content_white.clone());
    let mut sorted_betas = Vec::with_capacity(betas.len());
    for &i in &order {
        strokes.push(swapped[i].clone());
        sorted_betas.push(betas[i]);
    }
    Ok(StrokeSet { strokes, betas: sorted_betas })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_feature(seed: u64, c: usize, h: usize, w: usize) -> Tensor {
        let mut r = ChaCha8Rng::seed_from_u64(seed);
        let data = (0..c * h * w).map(|_| r.gen_range(-1.0..1.0)).collect();
        Tensor::from_vec(c, h, w, data).unwrap()
    }

    /// Exhaustive matcher and reconstructor working from explicit patch
    /// lists; shares no code with the production path beyond the bank's
    /// accessors.
    fn oracle_swap(content: &Tensor, style: &Tensor, p: usize) -> (Vec<usize>, Tensor) {
        let (c_n, h, w) = content.dims();
        let bank = PatchBank::build(style, p).unwrap();
        let (grid_h, grid_w) = (h - p + 1, w - p + 1);

        let content_patch = |cy: usize, cx: usize| -> Vec<f64> {
            let mut out = Vec::new();
            for c in 0..c_n {
                for dy in 0..p {
                    for dx in 0..p {
                        out.push(content.get(c, cy + dy, cx + dx) as f64);
                    }
                }
            }
            out
        };

        let mut best = Vec::new();
        for cy in 0..grid_h {
            for cx in 0..grid_w {
                let cp = content_patch(cy, cx);
                let mut best_j = usize::MAX;
                let mut best_score = f64::NEG_INFINITY;
                for j in 0..bank.len() {
                    let Some(np) = bank.normalized_patch(j) else { continue };
                    let score: f64 = cp.iter().zip(&np).map(|(a, b)| a * b).sum();
                    if score > best_score {
                        best_score = score;
                        best_j = j;
                    }
                }
                best.push(best_j);
            }
        }

        let mut sums = vec![0.0f64; c_n * h * w];
        let mut counts = vec![0u32; c_n * h * w];
        for cy in 0..grid_h {
            for cx in 0..grid_w {
                let j = best[cy * grid_w + cx];
                let pv = bank.patch_values(j);
                let mut k = 0;
                for c in 0..c_n {
                    for dy in 0..p {
                        for dx in 0..p {
                            let idx = (c * h + cy + dy) * w + cx + dx;
                            sums[idx] += pv[k];
                            counts[idx] += 1;
                            k += 1;
                        }
                    }
                }
            }
        }
        let data: Vec<f32> = sums
            .iter()
            .zip(&counts)
            .map(|(&s, &m)| (s / m as f64) as f32)
            .collect();
        (best, Tensor::from_vec(c_n, h, w, data).unwrap())
    }

    #[test]
    fn self_swap_returns_the_input_exactly() {
        for seed in 0..5 {
            let f = random_feature(seed, 4, 8, 8);
            let out = style_swap(&f, &f, 3).unwrap();
            assert_eq!(out, f, "seed {seed}");
        }
    }

    #[test]
    fn single_style_patch_is_tiled_everywhere() {
        let content = random_feature(10, 3, 6, 6);
        let style = random_feature(11, 3, 3, 3); // exactly one patch
        let out = style_swap(&content, &style, 3).unwrap();
        let (oracle_best, oracle_out) = oracle_swap(&content, &style, 3);
        assert!(oracle_best.iter().all(|&j| j == 0));
        assert_eq!(out, oracle_out);
    }

    #[test]
    fn matches_exhaustive_oracle() {
        for seed in 0..20 {
            let content = random_feature(100 + seed, 4, 8, 8);
            let style = random_feature(200 + seed, 4, 7, 7);
            let out = style_swap(&content, &style, 3).unwrap();

            let bank = PatchBank::build(&style, 3).unwrap();
            let got_best = best_match_indices(&content, &bank);
            let (want_best, want_out) = oracle_swap(&content, &style, 3);
            assert_eq!(got_best, want_best, "seed {seed}");
            for (&a, &b) in out.data().iter().zip(want_out.data()) {
                assert!((a - b).abs() < 1e-5);
            }
        }
    }

    #[test]
    fn patch_bank_counts_and_norms() {
        let style = random_feature(30, 2, 5, 6);
        let bank = PatchBank::build(&style, 3).unwrap();
        assert_eq!(bank.len(), 3 * 4);
        for j in 0..bank.len() {
            let np = bank.normalized_patch(j).unwrap();
            let norm: f64 = np.iter().map(|v| v * v).sum::<f64>().sqrt();
            assert!((norm - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn zero_norm_patches_are_not_candidates() {
        // style patch 0 (top-left 3x3) is all zeros; the rest are not
        let mut style = random_feature(31, 1, 4, 4);
        for y in 0..3 {
            for x in 0..3 {
                style.set(0, y, x, 0.0);
            }
        }
        let bank = PatchBank::build(&style, 3).unwrap();
        assert!(bank.is_zero_norm(0));
        assert!(bank.normalized_patch(0).is_none());

        // a zero content patch scores 0 against everything, so the winner is
        // the lowest *eligible* index, not the zero-norm patch 0
        let content = Tensor::zeros(1, 3, 3);
        let best = best_match_indices(&content, &bank);
        assert_ne!(best[0], 0);
        assert!(!bank.is_zero_norm(best[0]));
    }

    #[test]
    fn all_zero_style_is_rejected() {
        let content = random_feature(32, 2, 5, 5);
        let style = Tensor::zeros(2, 4, 4);
        assert!(matches!(
            style_swap(&content, &style, 3),
            Err(Error::Validation(_))
        ));
    }

    #[test]
    fn size_and_shape_errors() {
        let content = random_feature(33, 2, 6, 6);
        let tiny = random_feature(34, 2, 2, 2);
        assert!(matches!(style_swap(&content, &tiny, 3), Err(Error::Validation(_))));
        assert!(matches!(style_swap(&tiny, &content, 3), Err(Error::Validation(_))));

        let wrong_c = random_feature(35, 3, 6, 6);
        assert!(matches!(style_swap(&content, &wrong_c, 3), Err(Error::Dimension(_))));

        assert!(matches!(style_swap(&content, &content, 2), Err(Error::Config(_))));
        assert!(matches!(style_swap(&content, &content, 0), Err(Error::Config(_))));
    }

    #[test]
    fn multi_scale_single_beta_equals_plain_swap() {
        let content = random_feature(36, 3, 6, 6);
        let style = random_feature(37, 3, 6, 6);
        let multi = multi_scale_swap(&content, &style, &[1.0], 3).unwrap();
        assert_eq!(multi.len(), 1);
        assert_eq!(multi[0], style_swap(&content, &style, 3).unwrap());
    }

    #[test]
    fn multi_scale_composes_resize_then_swap() {
        let content = random_feature(38, 3, 8, 8);
        let style = random_feature(39, 3, 8, 8);
        let multi = multi_scale_swap(&content, &style, &[0.5], 3).unwrap();
        let resized = resize_bilinear(&style, 0.5).unwrap();
        assert_eq!(multi[0], style_swap(&content, &resized, 3).unwrap());
    }

    #[test]
    fn multi_scale_is_order_independent() {
        let content = random_feature(40, 2, 8, 8);
        let style = random_feature(41, 2, 8, 8);
        let ab = multi_scale_swap(&content, &style, &[0.5, 1.0], 3).unwrap();
        let ba = multi_scale_swap(&content, &style, &[1.0, 0.5], 3).unwrap();
        assert_eq!(ab[0], ba[1]);
        assert_eq!(ab[1], ba[0]);
    }

    #[test]
    fn multi_scale_rejects_collapsing_beta() {
        let content = random_feature(42, 2, 8, 8);
        let style = random_feature(43, 2, 8, 8);
        match multi_scale_swap(&content, &style, &[1.0, 0.25], 3) {
            Err(Error::Config(msg)) => assert!(msg.contains("0.25"), "{msg}"),
            other => panic!("expected config error, got {other:?}"),
        }
    }

    #[test]
    fn stroke_set_orders_by_scale() {
        let content = random_feature(44, 2, 6, 6);
        let a = random_feature(45, 2, 6, 6);
        let b = random_feature(46, 2, 6, 6);

        let set = build_stroke_set(&content, &[], &[]).unwrap();
        assert_eq!(set.len(), 1);
        assert_eq!(set.strokes[0], content);

        let set = build_stroke_set(&content, &[a.clone(), b.clone()], &[1.0, 0.5]).unwrap();
        assert_eq!(set.len(), 3);
        assert_eq!(set.betas, vec![0.5, 1.0]);
        assert_eq!(set.strokes[1], b);
        assert_eq!(set.strokes[2], a);
    }

    #[test]
    fn stroke_set_rejects_mismatches() {
        let content = random_feature(47, 2, 6, 6);
        let odd = random_feature(48, 2, 5, 5);
        assert!(matches!(
            build_stroke_set(&content, &[odd], &[1.0]),
            Err(Error::Dimension(_))
        ));
        assert!(matches!(
            build_stroke_set(&content, &[content.clone()], &[]),
            Err(Error::Dimension(_))
        ));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        /// Normalizing the content side too cannot change any winner: the
        /// content norm is a positive constant per location.
        #[test]
        fn both_sides_normalized_agrees(seed in 0u64..5000) {
            let content = random_feature(seed, 2, 5, 5);
            let style = random_feature(seed.wrapping_add(9999), 2, 5, 5);
            let bank = PatchBank::build(&style, 3).unwrap();
            let got = best_match_indices(&content, &bank);

            let (c_n, h, w) = content.dims();
            let (grid_h, grid_w) = (h - 2, w - 2);
            for cy in 0..grid_h {
                for cx in 0..grid_w {
                    let mut cp = Vec::new();
                    for c in 0..c_n {
                        for dy in 0..3 {
                            for dx in 0..3 {
                                cp.push(content.get(c, cy + dy, cx + dx) as f64);
                            }
                        }
                    }
                    let cnorm: f64 = cp.iter().map(|v| v * v).sum::<f64>().sqrt();
                    if cnorm == 0.0 {
                        continue; // argmax over constant-zero scores is init-dependent
                    }
                    let mut best_j = usize::MAX;
                    let mut best_score = f64::NEG_INFINITY;
                    for j in 0..bank.len() {
                        let Some(np) = bank.normalized_patch(j) else { continue };
                        let score: f64 =
                            cp.iter().zip(&np).map(|(a, b)| a / cnorm * b).sum();
                        if score > best_score {
                            best_score = score;
                            best_j = j;
                        }
                    }
                    prop_assert_eq!(got[cy * grid_w + cx], best_j);
                }
            }
        }
    }
}
