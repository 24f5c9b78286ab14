//! From attention feature to stroke fusion: distill the attended feature into
//! a normalized scalar map, cluster its intensities, convert cluster

//! distances into per-pixel stroke weights, and blend the stroke features.

use crate::error::{Error, Result};
use crate::matrix::softmax_rows;
use crate::swap::StrokeSet;
use crate::tensor::{gaussian_blur, Tensor};
use crate::{attention::AttentionFeature, matrix::Matrix};

/// Single-channel grid in [0,1]. Non-degenerate maps touch both 0 and 1
/// exactly (min-max normalization); a constant input collapses to all zeros.
#[derive(Debug, Clone)]
pub struct AttentionMap {
    grid: Tensor,
}

impl AttentionMap {
    pub fn new(grid: Tensor) -> Result<AttentionMap> {
        if grid.channels() != 1 {
            return Err(Error::Dimension(format!(
                "attention map must be single-channel, got {}",
                grid.channels()
            )));
        }
        if grid.data().iter().any(|&v| !(0.0..=1.0).contains(&v)) {
            return Err(Error::Validation("attention map values outside [0,1]".into()));
        }
        Ok(AttentionMap { grid })
    }

    pub fn grid(&self) -> &Tensor {
        &self.grid
    }

    pub fn values(&self) -> &[f32] {
        self.grid.data()
    }

    pub fn height(&self) -> usize {
        self.grid.height()
    }

    pub fn width(&self) -> usize {
        self.grid.width()
    }
}

/// Collapses an attended feature to the guidance map: absolute value, channel
/// mean, Gaussian smoothing, then min-max normalization to [0,1].
pub fn attention_filter(a: &AttentionFeature, sigma: f32) -> AttentionMap {
    let (c, h, w) = a.a.dims();
    let mut flat = Tensor::zeros(1, h, w);
    for (i, slot) in flat.channel_mut(0).iter_mut().enumerate() {
        let mut sum = 0.0f64;
        for ch in 0..c {
            sum += a.a.channel(ch)[i].abs() as f64;
        }
        *slot = (sum / c as f64) as f32;
    }
    let smoothed = gaussian_blur(&flat, sigma);

    let min = smoothed.data().iter().copied().fold(f32::INFINITY, f32::min);
    let max = smoothed.data().iter().copied().fold(f32::NEG_INFINITY, f32::max);
    let grid = if max > min {
        smoothed.map(|v| ((v - min) / (max - min)).clamp(0.0, 1.0))
    } else {
        Tensor::zeros(1, h, w)
    };
    AttentionMap { grid }
}

/// Intensity centers, sorted descending, with the final clustering objective
/// (sum of squared distances to assigned centers) and iteration count.
#[derive(Debug, Clone)]
pub struct ClusterResult {
    pub centers: Vec<f64>,
    pub objective: f64,
    pub iterations: usize,
}

/// Largest value count for which initial centers come from the exact
/// dynamic-programming partition; beyond it, evenly spaced quantiles seed
/// the iteration instead.
const EXACT_INIT_LIMIT: usize = 20_000;

fn sse_objective(values: &[f64], centers: &[f64]) -> f64 {
    values
        .iter()
        .map(|&v| {
            centers
                .iter()
                .map(|&c| (v - c) * (v - c))
                .fold(f64::INFINITY, f64::min)
        })
        .sum()
}

/// Exact optimal clustering of sorted 1-D values into k contiguous segments,
/// by dynamic programming over prefix sums. Returns segment means, ascending.
fn optimal_segment_means(sorted: &[f64], k: usize) -> Vec<f64> {
    let n = sorted.len();
    let mut prefix = vec![0.0f64; n + 1];
    let mut prefix_sq = vec![0.0f64; n + 1];
    for (i, &v) in sorted.iter().enumerate() {
        prefix[i + 1] = prefix[i] + v;
        prefix_sq[i + 1] = prefix_sq[i] + v * v;
    }
    // sum of squared deviations from the mean over the half-open range [i, j)
    let cost = |i: usize, j: usize| -> f64 {
        let len = (j - i) as f64;
        let s = prefix[j] - prefix[i];
        (prefix_sq[j] - prefix_sq[i] - s * s / len).max(0.0)
    };

    let mut dp = vec![f64::INFINITY; n + 1];
    let mut cut = vec![vec![0usize; n + 1]; k + 1];
    for j in 1..=n {
        dp[j] = cost(0, j);
    }
    for c in 2..=k {
        let mut next = vec![f64::INFINITY; n + 1];
        for j in c..=n {
            for i in c - 1..j {
                let candidate = dp[i] + cost(i, j);
                if candidate < next[j] {
                    next[j] = candidate;
                    cut[c][j] = i;
                }
            }
        }
        dp = next;
    }

    let mut bounds = vec![n];
    let mut j = n;
    for c in (2..=k).rev() {
        j = cut[c][j];
        bounds.push(j);
    }
    bounds.push(0);
    bounds.reverse();
    bounds
        .windows(2)
        .map(|w| (prefix[w[1]] - prefix[w[0]]) / (w[1] - w[0]) as f64)
        .collect()
}

fn quantile_seeds(sorted: &[f64], k: usize) -> Vec<f64> {
    let n = sorted.len();
    let mut seeds: Vec<f64> = (0..k)
        .map(|j| {
            let q = (2 * j + 1) as f64 / (2 * k) as f64;
            sorted[((q * (n - 1) as f64).round() as usize).min(n - 1)]
        })
        .collect();
    seeds.dedup();
    if seeds.len() < k {
        // heavy duplicates collapsed some seeds; spread over distinct values
        let mut uniq = sorted.to_vec();
        uniq.dedup();
        let d = uniq.len();
        seeds = (0..k)
            .map(|j| uniq[j * (d - 1) / (k - 1).max(1)])
            .collect();
    }
    seeds
}

/// Scalar k-means on the map's intensities. Seeding is deterministic (the
/// exact optimal partition for inputs up to [`EXACT_INIT_LIMIT`] values,
/// quantiles beyond); Lloyd iterations then run until centers move less than
/// `tol` or `max_iters` is hit. The objective never increases; a float-level
/// violation reports a numerical error.
pub fn kmeans_1d(
    map: &AttentionMap,
    clusters: usize,
    max_iters: usize,
    tol: f64,
) -> Result<ClusterResult> {
    if clusters == 0 {
        return Err(Error::Config("cluster count must be at least 1".into()));
    }
    let values: Vec<f64> = map.values().iter().map(|&v| v as f64).collect();
    let mut sorted = values.clone();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let distinct = {
        let mut uniq = sorted.clone();
        uniq.dedup();
        uniq.len()
    };
    if clusters > distinct {
        return Err(Error::Validation(format!(
            "cannot split {distinct} distinct attention values into {clusters} clusters"
        )));
    }

    let mut centers = if sorted.len() <= EXACT_INIT_LIMIT {
        optimal_segment_means(&sorted, clusters)
    } else {
        quantile_seeds(&sorted, clusters)
    };
    let mut objective = sse_objective(&values, &centers);
    let mut iterations = 0;

    for _ in 0..max_iters {
        iterations += 1;
        // assignment + accumulation in one pass
        let mut sums = vec![0.0f64; clusters];
        let mut counts = vec![0usize; clusters];
        for &v in &values {
            let mut best = 0;
            let mut best_d = f64::INFINITY;
            for (ci, &c) in centers.iter().enumerate() {
                let d = (v - c).abs();
                if d < best_d {
                    best_d = d;
                    best = ci;
                }
            }
            sums[best] += v;
            counts[best] += 1;
        }
        let mut next: Vec<f64> = centers.clone();
        for ci in 0..clusters {
            if counts[ci] > 0 {
                next[ci] = sums[ci] / counts[ci] as f64;
            }
        }
        // an empty cluster is re-seated at the value farthest from every
        // occupied center, keeping all clusters meaningful
        for ci in 0..clusters {
            if counts[ci] == 0 {
                let far = values
                    .iter()
                    .copied()
                    .max_by(|&a, &b| {
                        let da = nearest_distance(a, &next, ci);
                        let db = nearest_distance(b, &next, ci);
                        da.partial_cmp(&db).unwrap()
                    })
                    .unwrap();
                next[ci] = far;
            }
        }

        let movement = centers
            .iter()
            .zip(&next)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        let next_objective = sse_objective(&values, &next);
        if next_objective > objective + 1e-12 * objective.max(1.0) {
            return Err(Error::Numerical(format!(
                "clustering objective rose from {objective} to {next_objective}"
            )));
        }
        centers = next;
        objective = next_objective;
        if movement < tol {
            break;
        }
    }

    centers.sort_by(|a, b| b.partial_cmp(a).unwrap());
    Ok(ClusterResult { centers, objective, iterations })
}

fn nearest_distance(v: f64, centers: &[f64], skip: usize) -> f64 {
    centers
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != skip)
        .map(|(_, &c)| (v - c).abs())
        .fold(f64::INFINITY, f64::min)
}

/// One map per stroke; at every pixel the maps form a softmax distribution.
#[derive(Debug, Clone)]
pub struct WeightMaps {
    pub maps: Vec<Tensor>,
}

/// Per-pixel stroke weights: distance of the attention value to each center,
/// pushed through a temperature-`gamma` softmax on (1 - distance). Map k
/// pairs with center k (centers descending -> strokes fine to coarse).
pub fn stroke_weight_maps(map: &AttentionMap, centers: &ClusterResult, gamma: f32) -> WeightMaps {
    let (h, w) = (map.height(), map.width());
    let k = centers.centers.len();
    let g = gamma as f64;
    let mut maps = vec![Tensor::zeros(1, h, w); k];
    for (i, &v) in map.values().iter().enumerate() {
        let logits: Vec<f64> = centers
            .centers
            .iter()
            .map(|&m| g * (1.0 - (v as f64 - m).abs()))
            .collect();
        let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = logits.iter().map(|&l| (l - max).exp()).collect();
        let z: f64 = exps.iter().sum();
        for (mk, &e) in maps.iter_mut().zip(&exps) {
            mk.channel_mut(0)[i] = (e / z) as f32;
        }
    }
    WeightMaps { maps }
}

/// Blends the strokes: per pixel, the weighted sum of stroke features with
/// the scalar weights broadcast across channels.
pub fn fuse(strokes: &StrokeSet, weights: &WeightMaps) -> Result<Tensor> {
    if strokes.len() != weights.maps.len() {
        return Err(Error::Dimension(format!(
            "{} strokes but {} weight maps",
            strokes.len(),
            weights.maps.len()
        )));
    }
    if strokes.is_empty() {
        return Err(Error::Dimension("no strokes to fuse".into()));
    }
    let (c, h, w) = strokes.strokes[0].dims();
    for m in &weights.maps {
        if (m.height(), m.width()) != (h, w) {
            return Err(Error::Dimension(format!(
                "weight map is {}x{}, strokes are {h}x{w}",
                m.height(),
                m.width()
            )));
        }
    }

    let mut out = Tensor::zeros(c, h, w);
    let plane = h * w;
    for (k, stroke) in strokes.strokes.iter().enumerate() {
        let wm = weights.maps[k].channel(0);
        for ch in 0..c {
            let src = stroke.channel(ch);
            let dst = out.channel_mut(ch);
            for i in 0..plane {
                dst[i] += wm[i] * src[i];
            }
        }
    }
    Ok(out)
}

/// Softmax-based fusion weights for one scalar value against the centers;
/// mirrors [`stroke_weight_maps`] for single points (used by tests and the
/// parameter-sweep report).
pub fn point_weights(value: f64, centers: &[f64], gamma: f64) -> Vec<f64> {
    let logits: Vec<f64> = centers.iter().map(|&m| gamma * (1.0 - (value - m).abs())).collect();
    let m = Matrix::from_vec(1, logits.len(), logits).unwrap();
    softmax_rows(&m).row(0).to_vec()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::swap::build_stroke_set;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_map(seed: u64, h: usize, w: usize) -> AttentionMap {
        let mut r = ChaCha8Rng::seed_from_u64(seed);
        let data = (0..h * w).map(|_| r.gen_range(0.0..=1.0)).collect();
        AttentionMap::new(Tensor::from_vec(1, h, w, data).unwrap()).unwrap()
    }

    fn feature(seed: u64, c: usize, h: usize, w: usize) -> AttentionFeature {
        let mut r = ChaCha8Rng::seed_from_u64(seed);
        let data = (0..c * h * w).map(|_| r.gen_range(-2.0..2.0)).collect();
        AttentionFeature { a: Tensor::from_vec(c, h, w, data).unwrap() }
    }

    #[test]
    fn filter_zero_feature_gives_zero_map() {
        let a = AttentionFeature { a: Tensor::zeros(4, 5, 5) };
        let m = attention_filter(&a, 1.0);
        assert!(m.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn filter_impulse_no_smoothing() {
        let mut t = Tensor::zeros(3, 5, 5);
        t.set(1, 2, 3, -4.0); // negative: the absolute-value stage must flip it
        let m = attention_filter(&AttentionFeature { a: t }, 0.0);
        for y in 0..5 {
            for x in 0..5 {
                let want = if (y, x) == (2, 3) { 1.0 } else { 0.0 };
                assert_eq!(m.grid().get(0, y, x), want);
            }
        }
    }

    #[test]
    fn filter_matches_four_stage_oracle() {
        let a = feature(50, 4, 6, 6);
        let sigma = 1.0f64;
        let m = attention_filter(&a, sigma as f32);

        // independent pipeline: abs -> channel mean -> direct 2-D Gaussian
        // with reflected sampling -> min-max
        let mut mean = vec![0.0f64; 36];
        for (i, slot) in mean.iter_mut().enumerate() {
            for ch in 0..4 {
                *slot += a.a.channel(ch)[i].abs() as f64;
            }
            *slot /= 4.0;
        }
        let radius = (3.0 * sigma).ceil() as isize;
        let kernel: Vec<f64> = (-radius..=radius)
            .flat_map(|dy| {
                (-radius..=radius)
                    .map(move |dx| (-((dy * dy + dx * dx) as f64) / (2.0 * sigma * sigma)).exp())
            })
            .collect();
        let ksum: f64 = kernel.iter().sum();
        let reflect = |i: isize, n: isize| -> usize {
            let period = 2 * (n - 1);
            let mut k = i.rem_euclid(period);
            if k >= n {
                k = period - k;
            }
            k as usize
        };
        let mut blurred = vec![0.0f64; 36];
        for y in 0..6isize {
            for x in 0..6isize {
                let mut acc = 0.0;
                let mut ki = 0;
                for dy in -radius..=radius {
                    for dx in -radius..=radius {
                        let sy = reflect(y + dy, 6);
                        let sx = reflect(x + dx, 6);
                        acc += kernel[ki] / ksum * mean[sy * 6 + sx];
                        ki += 1;
                    }
                }
                blurred[(y * 6 + x) as usize] = acc;
            }
        }
        let lo = blurred.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = blurred.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        for (i, &got) in m.values().iter().enumerate() {
            let want = (blurred[i] - lo) / (hi - lo);
            assert!((got as f64 - want).abs() < 1e-5, "pixel {i}");
        }
    }

    #[test]
    fn filter_range_invariant_on_negative_features() {
        let a = feature(51, 3, 7, 7);
        let negated = AttentionFeature { a: a.a.map(|v| -v.abs()) };
        let m = attention_filter(&negated, 0.7);
        let lo = m.values().iter().copied().fold(f32::INFINITY, f32::min);
        let hi = m.values().iter().copied().fold(f32::NEG_INFINITY, f32::max);
        assert_eq!(lo, 0.0);
        assert_eq!(hi, 1.0);
    }

    #[test]
    fn kmeans_one_cluster_is_the_mean() {
        let m = random_map(60, 4, 5);
        let r = kmeans_1d(&m, 1, 100, 1e-6).unwrap();
        let mean = m.values().iter().map(|&v| v as f64).sum::<f64>() / 20.0;
        assert!((r.centers[0] - mean).abs() < 1e-9);
    }

    #[test]
    fn kmeans_separates_two_point_masses() {
        let mut data = vec![0.1f32; 50];
        data.extend(vec![0.9f32; 50]);
        let m = AttentionMap::new(Tensor::from_vec(1, 10, 10, data).unwrap()).unwrap();
        let r = kmeans_1d(&m, 2, 100, 1e-6).unwrap();
        assert!((r.centers[0] - 0.9f32 as f64).abs() < 1e-9);
        assert!((r.centers[1] - 0.1f32 as f64).abs() < 1e-9);
    }

    #[test]
    fn kmeans_rejects_more_clusters_than_distinct_values() {
        let data = vec![0.25f32, 0.25, 0.75, 0.75];
        let m = AttentionMap::new(Tensor::from_vec(1, 2, 2, data).unwrap()).unwrap();
        assert!(matches!(kmeans_1d(&m, 3, 100, 1e-6), Err(Error::Validation(_))));
        assert!(kmeans_1d(&m, 2, 100, 1e-6).is_ok());
    }

    /// Brute force over every contiguous partition of the sorted values —
    /// an independent check that the result is globally optimal.
    fn brute_force_optimum(values: &[f64], k: usize) -> f64 {
        fn seg_cost(v: &[f64]) -> f64 {
            let mean = v.iter().sum::<f64>() / v.len() as f64;
            v.iter().map(|x| (x - mean) * (x - mean)).sum()
        }
        fn rec(v: &[f64], k: usize) -> f64 {
            if k == 1 {
                return seg_cost(v);
            }
            let mut best = f64::INFINITY;
            // first segment takes i values; k-1 segments need at least k-1
            for i in 1..=v.len() - (k - 1) {
                let c = seg_cost(&v[..i]) + rec(&v[i..], k - 1);
                if c < best {
                    best = c;
                }
            }
            best
        }
        let mut sorted = values.to_vec();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        rec(&sorted, k)
    }

    #[test]
    fn kmeans_objective_is_globally_optimal_on_small_inputs() {
        for seed in 0..30u64 {
            let mut r = ChaCha8Rng::seed_from_u64(seed);
            let n = r.gen_range(5..13);
            let data: Vec<f32> = (0..n).map(|_| r.gen_range(0.0..=1.0)).collect();
            let values: Vec<f64> = data.iter().map(|&v| v as f64).collect();
            let m = AttentionMap::new(Tensor::from_vec(1, 1, n, data).unwrap()).unwrap();
            for k in 1..=3usize {
                let res = kmeans_1d(&m, k, 100, 1e-9).unwrap();
                let want = brute_force_optimum(&values, k);
                assert!(
                    (res.objective - want).abs() <= 1e-9,
                    "seed {seed} k {k}: {} vs {want}",
                    res.objective
                );
            }
        }
    }

    #[test]
    fn weight_maps_one_center_is_all_ones() {
        let m = random_map(61, 3, 3);
        let centers = ClusterResult { centers: vec![0.5], objective: 0.0, iterations: 0 };
        let wm = stroke_weight_maps(&m, &centers, 50.0);
        assert_eq!(wm.maps.len(), 1);
        assert!(wm.maps[0].data().iter().all(|&v| v == 1.0));
    }

    #[test]
    fn weight_maps_zero_gamma_is_uniform() {
        let m = random_map(62, 4, 4);
        let centers = ClusterResult {
            centers: vec![0.9, 0.5, 0.1],
            objective: 0.0,
            iterations: 0,
        };
        let wm = stroke_weight_maps(&m, &centers, 0.0);
        for map in &wm.maps {
            for &v in map.data() {
                assert!((v - 1.0 / 3.0).abs() < 1e-7);
            }
        }
    }

    #[test]
    fn weight_at_a_center_dominates_under_strong_gamma() {
        let data = vec![0.9f32, 0.5, 0.1, 0.5];
        let m = AttentionMap::new(Tensor::from_vec(1, 2, 2, data).unwrap()).unwrap();
        let centers = ClusterResult {
            centers: vec![0.9, 0.5, 0.1],
            objective: 0.0,
            iterations: 0,
        };
        let wm = stroke_weight_maps(&m, &centers, 50.0);
        // pixel 0 sits exactly on center 0; the nearest rival is 0.4 away
        assert!(wm.maps[0].data()[0] > 0.999);
        // direct formula for the same pixel
        let direct = point_weights(0.9, &centers.centers, 50.0);
        assert!((wm.maps[0].data()[0] as f64 - direct[0]).abs() < 1e-6);
    }

    #[test]
    fn fuse_one_hot_selects_strokes() {
        let content = Tensor::filled(2, 2, 2, 1.0);
        let coarse = Tensor::filled(2, 2, 2, 5.0);
        let set = build_stroke_set(&content, &[coarse], &[1.0]).unwrap();

        let mut w0 = Tensor::zeros(1, 2, 2);
        let mut w1 = Tensor::zeros(1, 2, 2);
        for i in 0..4 {
            if i % 2 == 0 {
                w0.channel_mut(0)[i] = 1.0;
            } else {
                w1.channel_mut(0)[i] = 1.0;
            }
        }
        let out = fuse(&set, &WeightMaps { maps: vec![w0, w1] }).unwrap();
        for ch in 0..2 {
            assert_eq!(out.channel(ch), &[1.0, 5.0, 1.0, 5.0]);
        }
    }

    #[test]
    fn fuse_identical_strokes_ignores_weights() {
        let s = Tensor::filled(2, 3, 3, 2.5);
        let set = build_stroke_set(&s, &[s.clone(), s.clone()], &[0.5, 1.0]).unwrap();
        let m = random_map(63, 3, 3);
        let centers = kmeans_1d(&m, 3, 100, 1e-6).unwrap();
        let wm = stroke_weight_maps(&m, &centers, 50.0);
        let out = fuse(&set, &wm).unwrap();
        for &v in out.data() {
            assert!((v - 2.5).abs() < 1e-5);
        }
    }

    #[test]
    fn fuse_matches_per_pixel_oracle() {
        let mut r = ChaCha8Rng::seed_from_u64(64);
        let mk = |r: &mut ChaCha8Rng| {
            let data = (0..2 * 3 * 3).map(|_| r.gen_range(-1.0..1.0)).collect();
            Tensor::from_vec(2, 3, 3, data).unwrap()
        };
        let content = mk(&mut r);
        let s1 = mk(&mut r);
        let s2 = mk(&mut r);
        let set = build_stroke_set(&content, &[s1, s2], &[0.5, 1.0]).unwrap();
        let m = random_map(65, 3, 3);
        let centers = kmeans_1d(&m, 3, 100, 1e-6).unwrap();
        let wm = stroke_weight_maps(&m, &centers, 50.0);
        let out = fuse(&set, &wm).unwrap();
        for ch in 0..2 {
            for i in 0..9 {
                let want: f32 = (0..3)
                    .map(|k| wm.maps[k].channel(0)[i] * set.strokes[k].channel(ch)[i])
                    .sum();
                assert!((out.channel(ch)[i] - want).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn fuse_rejects_mismatches() {
        let content = Tensor::zeros(2, 3, 3);
        let set = build_stroke_set(&content, &[], &[]).unwrap();
        let wrong_count = WeightMaps { maps: vec![] };
        assert!(matches!(fuse(&set, &wrong_count), Err(Error::Dimension(_))));
        let wrong_dims = WeightMaps { maps: vec![Tensor::zeros(1, 2, 2)] };
        assert!(matches!(fuse(&set, &wrong_dims), Err(Error::Dimension(_))));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        /// Weight maps are a softmax: they sum to one everywhere, for every
        /// stroke count and temperature combination in use.
        #[test]
        fn weight_maps_sum_to_one(seed in 0u64..10_000, k in 0usize..8, gi in 0usize..4) {
            let gamma = [0.0f32, 1.0, 50.0, 500.0][gi];
            let m = random_map(seed, 4, 4);
            let centers = match kmeans_1d(&m, k + 1, 100, 1e-6) {
                Ok(c) => c,
                Err(_) => return Ok(()), // fewer distinct values than clusters
            };
            let wm = stroke_weight_maps(&m, &centers, gamma);
            for i in 0..16 {
                let total: f64 = wm.maps.iter().map(|t| t.channel(0)[i] as f64).sum();
                prop_assert!((total - 1.0).abs() < 1e-6);
                // weights are non-negative; distant strokes may underflow
                // to exactly 0 in f32 at extreme gamma
                for t in &wm.maps {
                    prop_assert!(t.channel(0)[i] >= 0.0);
                }
            }
        }

        /// Raising the temperature never softens the strongest weight.
        #[test]
        fn sharpening_is_monotone_in_gamma(seed in 0u64..10_000) {
            let m = random_map(seed, 3, 3);
            let centers = kmeans_1d(&m, 3, 100, 1e-6).unwrap();
            let gammas = [0.0f32, 1.0, 10.0, 50.0, 200.0, 500.0];
            for i in 0..9 {
                let mut prev = 0.0f32;
                for &g in &gammas {
                    let wm = stroke_weight_maps(&m, &centers, g);
                    let max = wm.maps.iter().map(|t| t.channel(0)[i]).fold(0.0f32, f32::max);
                    prop_assert!(max >= prev - 1e-6);
                    prev = max;
                }
            }
        }
    }
}
