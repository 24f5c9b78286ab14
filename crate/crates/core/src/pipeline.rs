//! End-to-end flows: content/style stylization with stroke fusion, input
//! reconstruction with loss reporting, attention-map extraction, and a
//! parameter sweep that renders a montage plus per-cell timing rows.

use std::time::Instant;

use crate::attention::{attention_feature, attention_output, AttentionParams};
use crate::codec::{decode, encode, EncoderTaps};
use crate::error::{Error, Result};
use crate::fusion::{attention_filter, kmeans_1d, stroke_weight_maps, fuse, AttentionMap};
use crate::metrics::{
    attention_sparse_loss, content_loss, total_loss, tv_loss, LossParts, LossWeights,
};
use crate::swap::{build_stroke_set, multi_scale_swap};
use crate::tensor::{resize_bilinear, Tensor};
use crate::transforms::{color, whiten, FeatureStats};
use crate::weights::WeightBundle;

const KMEANS_MAX_ITERS: usize = 100;
const KMEANS_TOL: f64 = 1e-6;

/// Rendering knobs. `strokes` is the number of swapped stroke features; the
/// whitened content feature always joins as the finest stroke, so the total
/// stroke count is `strokes + 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct StylizeConfig {
    pub strokes: usize,
    /// Style-scale coefficient per swapped stroke; must have `strokes` entries.
    pub betas: Vec<f32>,
    /// Softmax temperature of the stroke weights; higher = harder boundaries.
    pub gamma: f32,
    /// Gaussian smoothing of the attention map.
    pub sigma: f32,
    /// Patch side for the swap; odd.
    pub patch: usize,
    /// Inputs are proportionally shrunk until their long side fits this.
    pub max_side: usize,
}

impl Default for StylizeConfig {
    fn default() -> StylizeConfig {
        StylizeConfig {
            strokes: 2,
            betas: vec![0.5, 1.0],
            gamma: 50.0,
            sigma: 1.0,
            patch: 3,
            max_side: 512,
        }
    }
}

/// The scale coefficients used when only a stroke count is given: a single
/// full-scale stroke, or `k` scales evenly spaced over [0.5, 1].
pub fn default_betas(k: usize) -> Vec<f32> {
    match k {
        0 => Vec::new(),
        1 => vec![1.0],
        _ => (0..k).map(|i| 0.5 + 0.5 * i as f32 / (k - 1) as f32).collect(),
    }
}

impl StylizeConfig {
    pub fn validate(&self) -> Result<()> {
        if self.betas.len() != self.strokes {
            return Err(Error::Config(format!(
                "{} scale coefficients for {} strokes",
                self.betas.len(),
                self.strokes
            )));
        }
        if self.betas.iter().any(|b| !b.is_finite() || *b <= 0.0) {
            return Err(Error::Config("scale coefficients must be positive reals".into()));
        }
        if !self.gamma.is_finite() || self.gamma < 0.0 {
            return Err(Error::Config(format!("smoothing factor {} must be >= 0", self.gamma)));
        }
        if !self.sigma.is_finite() || self.sigma < 0.0 {
            return Err(Error::Config(format!("blur sigma {} must be >= 0", self.sigma)));
        }
        if self.patch == 0 || self.patch % 2 == 0 {
            return Err(Error::Config(format!("patch size {} must be odd", self.patch)));
        }
        if self.max_side < 8 {
            return Err(Error::Config(format!("max side {} is below the 8-pixel minimum", self.max_side)));
        }
        Ok(())
    }
}

/// Wall-clock seconds per stage of one stylize call, plus what was rendered.
/// `strokes` is the effective swapped-stroke count: it drops to 0 when the
/// attention map could not support the requested clustering (see
/// `fallback_single_stroke`).
#[derive(Debug, Clone, PartialEq)]
pub struct RenderReport {
    pub encode_s: f64,
    pub attention_s: f64,
    pub whiten_s: f64,
    pub swap_s: f64,
    pub fusion_s: f64,
    pub color_s: f64,
    pub decode_s: f64,
    pub total_s: f64,
    pub strokes: usize,
    pub width: usize,
    pub height: usize,
    pub fallback_single_stroke: bool,
}

impl RenderReport {
    pub const CSV_HEADER: &'static str =
        "width,height,encode_s,attention_s,whiten_s,swap_s,fusion_s,color_s,decode_s,total_s,fallback";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{}",
            self.width,
            self.height,
            self.encode_s,
            self.attention_s,
            self.whiten_s,
            self.swap_s,
            self.fusion_s,
            self.color_s,
            self.decode_s,
            self.total_s,
            self.fallback_single_stroke
        )
    }

    pub fn stage_sum(&self) -> f64 {
        self.encode_s
            + self.attention_s
            + self.whiten_s
            + self.swap_s
            + self.fusion_s
            + self.color_s
            + self.decode_s
    }
}

/// Everything derived from a style image that stylize needs; compute once and
/// reuse across many content images (the eigendecomposition is the expensive
/// part).
#[derive(Debug, Clone)]
pub struct PreparedStyle {
    pub taps: EncoderTaps,
    pub stats: FeatureStats,
    pub whitened: Tensor,
    encode_seconds: f64,
    whiten_seconds: f64,
}

/// Sizes an image for the encoder: proportionally shrinks until the long side
/// fits `max_side`, then center-crops each side down to a multiple of 8.
/// Conforming images pass through unchanged.
pub fn prepare_image(image: &Tensor, max_side: usize) -> Result<Tensor> {
    if max_side < 8 {
        return Err(Error::Config(format!("max side {max_side} is below the 8-pixel minimum")));
    }
    let (c, h, w) = image.dims();
    if c != 3 {
        return Err(Error::Dimension(format!("expected an RGB image, got {c} channels")));
    }
    let long = h.max(w);
    let scaled = if long > max_side {
        resize_bilinear(image, max_side as f32 / long as f32)?
    } else {
        image.clone()
    };
    let (sh, sw) = (scaled.height(), scaled.width());
    let (th, tw) = (sh / 8 * 8, sw / 8 * 8);
    if th == 0 || tw == 0 {
        return Err(Error::Config(format!(
            "image is {sh}x{sw} after scaling; the encoder needs at least 8x8"
        )));
    }
    if (th, tw) == (sh, sw) {
        return Ok(scaled);
    }
    let (oy, ox) = ((sh - th) / 2, (sw - tw) / 2);
    let mut out = Tensor::zeros(3, th, tw);
    for ch in 0..3 {
        for y in 0..th {
            let src = &scaled.row(ch, y + oy)[ox..ox + tw];
            out.channel_mut(ch)[y * tw..(y + 1) * tw].copy_from_slice(src);
        }
    }
    Ok(out)
}

/// Encodes and whitens a style image (after sizing) for reuse across calls.
pub fn prepare_style(style: &Tensor, bundle: &WeightBundle, max_side: usize) -> Result<PreparedStyle> {
    let sized = prepare_image(style, max_side).map_err(|e| e.with_stage("prepare style"))?;
    let t = Instant::now();
    let taps = encode(&sized, bundle).map_err(|e| e.with_stage("encode style"))?;
    let encode_seconds = t.elapsed().as_secs_f64();
    let t = Instant::now();
    let (whitened, stats) = whiten(&taps.relu4_1).map_err(|e| e.with_stage("whiten style"))?;
    let whiten_seconds = t.elapsed().as_secs_f64();
    Ok(PreparedStyle { taps, stats, whitened, encode_seconds, whiten_seconds })
}

/// One-shot stylization. Prepares the style internally; use [`prepare_style`]
/// plus [`stylize_prepared`] to amortize that cost over many content images.
pub fn stylize(
    content: &Tensor,
    style: &Tensor,
    bundle: &WeightBundle,
    cfg: &StylizeConfig,
) -> Result<(Tensor, RenderReport, AttentionMap)> {
    cfg.validate()?;
    let start = Instant::now();
    let prepared = prepare_style(style, bundle, cfg.max_side)?;
    let (image, mut report, map) = stylize_prepared(content, &prepared, bundle, cfg)?;
    report.encode_s += prepared.encode_seconds;
    report.whiten_s += prepared.whiten_seconds;
    report.total_s = start.elapsed().as_secs_f64();
    Ok((image, report, map))
}

/// Stylizes one content image against an already-prepared style.
///
/// Stages, in order: encode content; attention feature and map; whiten the
/// bottleneck feature; swap it against the style at each scale; cluster the
/// attention map and fuse the strokes under the resulting weights; color with
/// the style statistics; decode with the style's skip taps. If the attention
/// map has too few distinct values to cut into `strokes + 1` clusters, the
/// call falls back to the single-stroke path and flags it in the report.
pub fn stylize_prepared(
    content: &Tensor,
    style: &PreparedStyle,
    bundle: &WeightBundle,
    cfg: &StylizeConfig,
) -> Result<(Tensor, RenderReport, AttentionMap)> {
    cfg.validate()?;
    let start = Instant::now();
    let sized = prepare_image(content, cfg.max_side).map_err(|e| e.with_stage("prepare content"))?;
    let (height, width) = (sized.height(), sized.width());

    let t = Instant::now();
    let taps = encode(&sized, bundle).map_err(|e| e.with_stage("encode content"))?;
    let encode_s = t.elapsed().as_secs_f64();
    let f_c = &taps.relu4_1;

    let t = Instant::now();
    let params = AttentionParams::from_bundle(bundle).map_err(|e| e.with_stage("attention"))?;
    let a_c = attention_feature(f_c, &params).map_err(|e| e.with_stage("attention"))?;
    let map = attention_filter(&a_c, cfg.sigma);
    let attention_s = t.elapsed().as_secs_f64();

    let t = Instant::now();
    let (white_c, _) = whiten(f_c).map_err(|e| e.with_stage("whiten content"))?;
    let whiten_s = t.elapsed().as_secs_f64();

    let t = Instant::now();
    let swapped = if cfg.strokes > 0 {
        multi_scale_swap(&white_c, &style.whitened, &cfg.betas, cfg.patch)
            .map_err(|e| e.with_stage("style swap"))?
    } else {
        Vec::new()
    };
    let swap_s = t.elapsed().as_secs_f64();

    let t = Instant::now();
    let mut fallback = false;
    let clusters = match kmeans_1d(&map, cfg.strokes + 1, KMEANS_MAX_ITERS, KMEANS_TOL) {
        Ok(c) => c,
        Err(Error::Validation(_)) if cfg.strokes > 0 => {
            // flat attention map: render single-stroke rather than fail
            fallback = true;
            kmeans_1d(&map, 1, KMEANS_MAX_ITERS, KMEANS_TOL)
                .map_err(|e| e.with_stage("attention clustering"))?
        }
        Err(e) => return Err(e.with_stage("attention clustering")),
    };
    let (strokes, betas, swapped) = if fallback {
        (0, &[] as &[f32], Vec::new())
    } else {
        (cfg.strokes, cfg.betas.as_slice(), swapped)
    };
    let set = build_stroke_set(&white_c, &swapped, betas).map_err(|e| e.with_stage("stroke set"))?;
    let weights = stroke_weight_maps(&map, &clusters, cfg.gamma);
    let fused = fuse(&set, &weights).map_err(|e| e.with_stage("fusion"))?;
    let fusion_s = t.elapsed().as_secs_f64();

    let t = Instant::now();
    let colored = color(&fused, &style.stats).map_err(|e| e.with_stage("color"))?;
    let color_s = t.elapsed().as_secs_f64();

    let t = Instant::now();
    let image = decode(&colored, bundle, Some(&style.taps)).map_err(|e| e.with_stage("decode"))?;
    let decode_s = t.elapsed().as_secs_f64();

    let report = RenderReport {
        encode_s,
        attention_s,
        whiten_s,
        swap_s,
        fusion_s,
        color_s,
        decode_s,
        total_s: start.elapsed().as_secs_f64(),
        strokes,
        width,
        height,
        fallback_single_stroke: fallback,
    };
    Ok((image, report, map))
}

/// The loss record `reconstruct` reports: the three balanced parts and their
/// weighted total, under the default weights.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossRecord {
    pub content: f64,
    pub attention: f64,
    pub tv: f64,
    pub total: f64,
}

impl LossRecord {
    pub const CSV_HEADER: &'static str = "content,attention,tv,total";

    pub fn csv_row(&self) -> String {
        format!("{},{},{},{}", self.content, self.attention, self.tv, self.total)
    }
}

/// Runs the autoencoder round trip the network was trained on: encode, apply
/// self-attention (output = attended + identity), decode without any style.
/// The input must already satisfy the encoder's size contract; see
/// [`prepare_image`]. Returns the reconstruction and its losses.
pub fn reconstruct(image: &Tensor, bundle: &WeightBundle) -> Result<(Tensor, LossRecord)> {
    let taps = encode(image, bundle).map_err(|e| e.with_stage("encode"))?;
    let params = AttentionParams::from_bundle(bundle).map_err(|e| e.with_stage("attention"))?;
    let a = attention_feature(&taps.relu4_1, &params).map_err(|e| e.with_stage("attention"))?;
    let (o, _) = attention_output(&taps.relu4_1, &a).map_err(|e| e.with_stage("attention"))?;
    let recon = decode(&o, bundle, None).map_err(|e| e.with_stage("decode"))?;

    let weights = LossWeights::default();
    let parts = LossParts {
        content: content_loss(&recon, image, bundle, &weights).map_err(|e| e.with_stage("loss"))?,
        attention: attention_sparse_loss(&a),
        tv: tv_loss(&recon).map_err(|e| e.with_stage("loss"))?,
    };
    let record = LossRecord {
        content: parts.content,
        attention: parts.attention,
        tv: parts.tv,
        total: total_loss(&parts, &weights),
    };
    Ok((recon, record))
}

/// The attention map of an image on its own: encode, attention feature,
/// filter. The input must already satisfy the encoder's size contract.
pub fn compute_attention_map(image: &Tensor, bundle: &WeightBundle, sigma: f32) -> Result<AttentionMap> {
    let taps = encode(image, bundle).map_err(|e| e.with_stage("encode"))?;
    let params = AttentionParams::from_bundle(bundle).map_err(|e| e.with_stage("attention"))?;
    let a = attention_feature(&taps.relu4_1, &params).map_err(|e| e.with_stage("attention"))?;
    Ok(attention_filter(&a, sigma))
}

/// Tiles images row-major into one image. All tiles must share dims.
pub fn montage(rows: usize, cols: usize, tiles: &[Tensor]) -> Result<Tensor> {
    if tiles.len() != rows * cols || tiles.is_empty() {
        return Err(Error::Dimension(format!(
            "{} tiles for a {rows}x{cols} montage",
            tiles.len()
        )));
    }
    let (c, h, w) = tiles[0].dims();
    for t in tiles {
        if t.dims() != (c, h, w) {
            return Err(Error::Dimension("montage tiles must share dims".into()));
        }
    }
    let mut out = Tensor::zeros(c, rows * h, cols * w);
    for (i, tile) in tiles.iter().enumerate() {
        let (r, col) = (i / cols, i % cols);
        for ch in 0..c {
            for y in 0..h {
                let dst_y = r * h + y;
                let dst_x = col * w;
                let row = tile.row(ch, y);
                out.channel_mut(ch)[dst_y * cols * w + dst_x..dst_y * cols * w + dst_x + w]
                    .copy_from_slice(row);
            }
        }
    }
    Ok(out)
}

/// One rendered cell of a parameter sweep: the grid coordinates plus the
/// render's timing report (whose `strokes` field is the effective count).
#[derive(Debug, Clone)]
pub struct SweepCell {
    pub gamma: f32,
    pub sigma: f32,
    pub strokes: usize,
    pub report: RenderReport,
}

/// Montage plus per-cell reports. Rows iterate the gamma values; columns
/// iterate stroke counts, then sigmas within each stroke count.
#[derive(Debug, Clone)]
pub struct SweepResult {
    pub montage: Tensor,
    pub rows: usize,
    pub cols: usize,
    pub cells: Vec<SweepCell>,
}

/// CSV with one row per sweep cell.
pub fn sweep_csv(cells: &[SweepCell]) -> String {
    let mut out = format!("gamma,sigma,strokes,{}\n", RenderReport::CSV_HEADER);
    for c in cells {
        out.push_str(&format!("{},{},{},{}\n", c.gamma, c.sigma, c.strokes, c.report.csv_row()));
    }
    out
}

/// Renders the cartesian grid of gammas x stroke counts x sigmas over one
/// content/style pair. The style is prepared once and shared by every cell,
/// so per-cell timings cover only per-render work.
pub fn sweep(
    content: &Tensor,
    style: &Tensor,
    bundle: &WeightBundle,
    base: &StylizeConfig,
    gammas: &[f32],
    strokes_list: &[usize],
    sigmas: &[f32],
) -> Result<SweepResult> {
    if gammas.is_empty() || strokes_list.is_empty() || sigmas.is_empty() {
        return Err(Error::Config("sweep grid must not be empty".into()));
    }
    let prepared = prepare_style(style, bundle, base.max_side)?;
    let rows = gammas.len();
    let cols = strokes_list.len() * sigmas.len();
    let mut tiles = Vec::with_capacity(rows * cols);
    let mut cells = Vec::with_capacity(rows * cols);
    for &gamma in gammas {
        for &k in strokes_list {
            for &sigma in sigmas {
                let betas =
                    if k == base.strokes { base.betas.clone() } else { default_betas(k) };
                let cfg = StylizeConfig { strokes: k, betas, gamma, sigma, ..base.clone() };
                let (image, report, _) = stylize_prepared(content, &prepared, bundle, &cfg)?;
                cells.push(SweepCell { gamma, sigma, strokes: k, report });
                tiles.push(image);
            }
        }
    }
    let montage = montage(rows, cols, &tiles)?;
    Ok(SweepResult { montage, rows, cols, cells })
}
