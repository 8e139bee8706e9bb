//! PNG-backed image reading and writing.
//!
//! Saliency values quantize as round(255 * v) with round-half-up, so a 0.5
//! map lands exactly on pixel 128 and a write/load round trip moves any
//! value by at most 1/510.

use std::path::Path;

use image::{DynamicImage, GrayImage, ImageReader, RgbImage};

use crate::error::{Error, Result};

fn decode(path: &Path) -> Result<DynamicImage> {
    let reader = ImageReader::open(path).map_err(|e| Error::io(path, e))?;
    reader
        .decode()
        .map_err(|e| Error::Image { path: path.to_path_buf(), message: e.to_string() })
}

/// Load an RGB image as channel-major values in `[0,1]`: `(h, w, data[3*h*w])`.
pub fn load_rgb(path: &Path) -> Result<(usize, usize, Vec<f64>)> {
    let img = decode(path)?.to_rgb8();
    let (w, h) = (img.width() as usize, img.height() as usize);
    let mut data = vec![0.0; 3 * h * w];
    for (x, y, px) in img.enumerate_pixels() {
        let (x, y) = (x as usize, y as usize);
        for ch in 0..3 {
            data[ch * h * w + y * w + x] = px.0[ch] as f64 / 255.0;
        }
    }
    Ok((h, w, data))
}

/// Load a grayscale image as raw 8-bit values: `(h, w, data[h*w])`.
pub fn load_gray(path: &Path) -> Result<(usize, usize, Vec<u8>)> {
    let img = decode(path)?.to_luma8();
    let (w, h) = (img.width() as usize, img.height() as usize);
    Ok((h, w, img.into_raw()))
}

pub fn quantize(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0 + 0.5).floor() as u8
}

/// Write values in `[0,1]` as an 8-bit grayscale PNG.
pub fn save_gray(path: &Path, h: usize, w: usize, values: &[f64]) -> Result<()> {
    if values.len() != h * w {
        return Err(Error::Shape(format!(
            "save_gray: {} values for {h}x{w}",
            values.len()
        )));
    }
    let raw: Vec<u8> = values.iter().map(|&v| quantize(v)).collect();
    let img = GrayImage::from_raw(w as u32, h as u32, raw).expect("sized buffer");
    img.save(path).map_err(|e| Error::Image { path: path.to_path_buf(), message: e.to_string() })
}

/// Write channel-major RGB values in `[0,1]` as an 8-bit PNG.
pub fn save_rgb(path: &Path, h: usize, w: usize, values: &[f64]) -> Result<()> {
    if values.len() != 3 * h * w {
        return Err(Error::Shape(format!(
            "save_rgb: {} values for 3x{h}x{w}",
            values.len()
        )));
    }
    let mut img = RgbImage::new(w as u32, h as u32);
    for y in 0..h {
        for x in 0..w {
            let px = [
                quantize(values[y * w + x]),
                quantize(values[h * w + y * w + x]),
                quantize(values[2 * h * w + y * w + x]),
            ];
            img.put_pixel(x as u32, y as u32, image::Rgb(px));
        }
    }
    img.save(path).map_err(|e| Error::Image { path: path.to_path_buf(), message: e.to_string() })
}
