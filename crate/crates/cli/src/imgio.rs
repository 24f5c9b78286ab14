//! PNG on disk <-> planar [0,1] tensors in memory.
//!
//! Reading converts whatever the file holds to 8-bit RGB first, so grayscale
//! or paletted inputs work. Writing always encodes PNG regardless of the
//! path's extension: RGB for images, 8-bit grayscale for attention maps.
//! Values map per channel as u8 = round(255 * clamp(v, 0, 1)).

use std::path::Path;

use aams_core::{Error, Result, Tensor};
use image::{GrayImage, ImageFormat, ImageReader, RgbImage};

fn file_error(path: &Path, err: impl std::fmt::Display) -> Error {
    Error::Format(format!("{}: {err}", path.display()))
}

pub fn read_rgb(path: &Path) -> Result<Tensor> {
    let img = ImageReader::open(path)
        .map_err(|e| file_error(path, e))?
        .decode()
        .map_err(|e| file_error(path, e))?
        .to_rgb8();
    let (w, h) = (img.width() as usize, img.height() as usize);
    let mut data = vec![0.0f32; 3 * h * w];
    for (x, y, px) in img.enumerate_pixels() {
        for c in 0..3 {
            data[(c * h + y as usize) * w + x as usize] = px.0[c] as f32 / 255.0;
        }
    }
    Tensor::from_vec(3, h, w, data)
}

fn quantize(v: f32) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

pub fn write_rgb(path: &Path, t: &Tensor) -> Result<()> {
    let (c, h, w) = t.dims();
    if c != 3 {
        return Err(Error::Dimension(format!("expected 3 channels to write RGB, got {c}")));
    }
    let mut img = RgbImage::new(w as u32, h as u32);
    for y in 0..h {
        for x in 0..w {
            let px = [
                quantize(t.get(0, y, x)),
                quantize(t.get(1, y, x)),
                quantize(t.get(2, y, x)),
            ];
            img.put_pixel(x as u32, y as u32, image::Rgb(px));
        }
    }
    img.save_with_format(path, ImageFormat::Png)
        .map_err(|e| file_error(path, e))
}

pub fn write_gray(path: &Path, values: &[f32], height: usize, width: usize) -> Result<()> {
    if values.len() != height * width {
        return Err(Error::Dimension(format!(
            "{} values cannot fill a {height}x{width} grayscale image",
            values.len()
        )));
    }
    let mut img = GrayImage::new(width as u32, height as u32);
    for y in 0..height {
        for x in 0..width {
            img.put_pixel(x as u32, y as u32, image::Luma([quantize(values[y * width + x])]));
        }
    }
    img.save_with_format(path, ImageFormat::Png)
        .map_err(|e| file_error(path, e))
}
