//! Raster types shared by every stage, plus PNG/JPEG file I/O.
//!
//! Images are 8-bit, row-major, interleaved, with either one (gray) or three
//! (RGB) channels. Alpha is dropped on load. Saliency maps are stored on disk
//! as 16-bit single-channel PNGs where 65535 maps to 1.0.

use std::path::Path;

use image::{DynamicImage, ImageBuffer, ImageFormat, Luma};

use crate::error::{Error, Result};
use crate::saliency::normalize_minmax;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Image {
    width: usize,
    height: usize,
    channels: usize,
    data: Vec<u8>,
}

impl Image {
    pub fn new(width: usize, height: usize, channels: usize, data: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidImage(format!(
                "zero-sized image {width}x{height}"
            )));
        }
        if channels != 1 && channels != 3 {
            return Err(Error::InvalidImage(format!(
                "unsupported channel count {channels}"
            )));
        }
        let expected = width * height * channels;
        if data.len() != expected {
            return Err(Error::InvalidImage(format!(
                "data length {} does not match {width}x{height}x{channels} = {expected}",
                data.len()
            )));
        }
        Ok(Self {
            width,
            height,
            channels,
            data,
        })
    }

    /// Solid-color image; `color.len()` sets the channel count.
    pub fn filled(width: usize, height: usize, color: &[u8]) -> Result<Self> {
        let data = color
            .iter()
            .copied()
            .cycle()
            .take(width * height * color.len())
            .collect();
        Self::new(width, height, color.len(), data)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn into_data(self) -> Vec<u8> {
        self.data
    }

    pub fn pixel_count(&self) -> usize {
        self.width * self.height
    }

    pub fn pixel(&self, x: usize, y: usize) -> &[u8] {
        let start = (y * self.width + x) * self.channels;
        &self.data[start..start + self.channels]
    }

    pub fn same_shape(&self, other: &Image) -> bool {
        self.width == other.width && self.height == other.height && self.channels == other.channels
    }

    /// Luma plane in [0, 255] using 0.299/0.587/0.114 weights.
    pub fn luma(&self) -> Vec<f64> {
        match self.channels {
            1 => self.data.iter().map(|&v| f64::from(v)).collect(),
            _ => self
                .data
                .chunks_exact(3)
                .map(|p| {
                    0.299 * f64::from(p[0]) + 0.587 * f64::from(p[1]) + 0.114 * f64::from(p[2])
                })
                .collect(),
        }
    }

    /// Converts between gray and RGB. Gray is replicated; RGB is reduced by luma.
    pub fn with_channels(&self, channels: usize) -> Result<Image> {
        match (self.channels, channels) {
            (a, b) if a == b => Ok(self.clone()),
            (1, 3) => {
                let data = self.data.iter().flat_map(|&v| [v, v, v]).collect();
                Image::new(self.width, self.height, 3, data)
            }
            (3, 1) => {
                let data = self
                    .luma()
                    .into_iter()
                    .map(|v| v.round().clamp(0.0, 255.0) as u8)
                    .collect();
                Image::new(self.width, self.height, 1, data)
            }
            (_, c) => Err(Error::InvalidParam(format!("unsupported channel count {c}"))),
        }
    }

    /// Bilinear resample of every channel, rounded back to 8 bits.
    pub fn resize_bilinear(&self, width: usize, height: usize) -> Result<Image> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidParam(format!(
                "resize target {width}x{height} must be non-empty"
            )));
        }
        if width == self.width && height == self.height {
            return Ok(self.clone());
        }
        let mut out = vec![0u8; width * height * self.channels];
        for c in 0..self.channels {
            let plane: Vec<f64> = self
                .data
                .iter()
                .skip(c)
                .step_by(self.channels)
                .map(|&v| f64::from(v))
                .collect();
            let resized = resample_bilinear(&plane, self.width, self.height, width, height);
            for (i, v) in resized.into_iter().enumerate() {
                out[i * self.channels + c] = v.round().clamp(0.0, 255.0) as u8;
            }
        }
        Image::new(width, height, self.channels, out)
    }
}

/// Per-pixel saliency in [0, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct SaliencyMap {
    width: usize,
    height: usize,
    values: Vec<f64>,
}

impl SaliencyMap {
    /// Builds a map, rejecting values outside [0, 1] or NaN.
    pub fn new(width: usize, height: usize, values: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidParam(format!(
                "zero-sized saliency map {width}x{height}"
            )));
        }
        if values.len() != width * height {
            return Err(Error::InvalidParam(format!(
                "saliency length {} does not match {width}x{height}",
                values.len()
            )));
        }
        if let Some(bad) = values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::InvalidParam(format!(
                "saliency value {bad} outside [0, 1]"
            )));
        }
        Ok(Self {
            width,
            height,
            values,
        })
    }

    pub fn constant(width: usize, height: usize, value: f64) -> Result<Self> {
        Self::new(width, height, vec![value; width * height])
    }

    pub(crate) fn from_values_unchecked(width: usize, height: usize, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), width * height);
        Self {
            width,
            height,
            values,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.values[y * self.width + x]
    }

    /// Bilinear resample with half-pixel centers and edge clamping.
    /// The output is clamped to [0, 1].
    pub fn resize_bilinear(&self, width: usize, height: usize) -> Result<SaliencyMap> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidParam(format!(
                "resize target {width}x{height} must be non-empty"
            )));
        }
        if width == self.width && height == self.height {
            return Ok(self.clone());
        }
        let values = resample_bilinear(&self.values, self.width, self.height, width, height)
            .into_iter()
            .map(|v| v.clamp(0.0, 1.0))
            .collect();
        Ok(SaliencyMap::from_values_unchecked(width, height, values))
    }
}

/// Free-function form of [`SaliencyMap::resize_bilinear`].
pub fn resize_bilinear(map: &SaliencyMap, width: usize, height: usize) -> Result<SaliencyMap> {
    map.resize_bilinear(width, height)
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BinaryMask {
    width: usize,
    height: usize,
    bits: Vec<bool>,
}

impl BinaryMask {
    pub fn new(width: usize, height: usize, bits: Vec<bool>) -> Result<Self> {
        if bits.len() != width * height {
            return Err(Error::InvalidParam(format!(
                "mask length {} does not match {width}x{height}",
                bits.len()
            )));
        }
        Ok(Self {
            width,
            height,
            bits,
        })
    }

    pub fn filled(width: usize, height: usize, value: bool) -> Self {
        Self {
            width,
            height,
            bits: vec![value; width * height],
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn get(&self, x: usize, y: usize) -> bool {
        self.bits[y * self.width + x]
    }

    pub fn count_foreground(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    /// Renders the mask as a gray image (255 = foreground).
    pub fn to_image(&self) -> Image {
        let data = self.bits.iter().map(|&b| if b { 255 } else { 0 }).collect();
        Image {
            width: self.width,
            height: self.height,
            channels: 1,
            data,
        }
    }
}

/// Bilinear interpolation over a single row-major plane.
pub(crate) fn resample_bilinear(
    src: &[f64],
    src_w: usize,
    src_h: usize,
    dst_w: usize,
    dst_h: usize,
) -> Vec<f64> {
    let axis = |dst: usize, src_len: usize, dst_len: usize| -> (usize, usize, f64) {
        let scale = src_len as f64 / dst_len as f64;
        let pos = ((dst as f64 + 0.5) * scale - 0.5).clamp(0.0, (src_len - 1) as f64);
        let lo = pos.floor() as usize;
        let hi = (lo + 1).min(src_len - 1);
        (lo, hi, pos - lo as f64)
    };
    let cols: Vec<_> = (0..dst_w).map(|x| axis(x, src_w, dst_w)).collect();
    let mut out = Vec::with_capacity(dst_w * dst_h);
    for y in 0..dst_h {
        let (y0, y1, fy) = axis(y, src_h, dst_h);
        let row0 = &src[y0 * src_w..(y0 + 1) * src_w];
        let row1 = &src[y1 * src_w..(y1 + 1) * src_w];
        for &(x0, x1, fx) in &cols {
            // lerp form keeps constant regions bit-exact
            let top = row0[x0] + (row0[x1] - row0[x0]) * fx;
            let bottom = row1[x0] + (row1[x1] - row1[x0]) * fx;
            out.push(top + (bottom - top) * fy);
        }
    }
    out
}

pub fn load_image(path: impl AsRef<Path>) -> Result<Image> {
    let path = path.as_ref();
    let decoded = image::ImageReader::open(path)
        .map_err(|e| Error::io(path, e))?
        .with_guessed_format()
        .map_err(|e| Error::io(path, e))?;
    match decoded.format() {
        Some(ImageFormat::Png) | Some(ImageFormat::Jpeg) => {}
        other => {
            return Err(Error::Decode {
                path: path.to_path_buf(),
                reason: format!("unsupported encoding {other:?}"),
            })
        }
    }
    let dynamic = decoded.decode().map_err(|e| Error::Decode {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })?;
    let (width, height) = (dynamic.width() as usize, dynamic.height() as usize);
    if width == 0 || height == 0 {
        return Err(Error::Decode {
            path: path.to_path_buf(),
            reason: "zero-dimension image".into(),
        });
    }
    let image = match dynamic {
        DynamicImage::ImageLuma8(_)
        | DynamicImage::ImageLumaA8(_)
        | DynamicImage::ImageLuma16(_)
        | DynamicImage::ImageLumaA16(_) => {
            Image::new(width, height, 1, dynamic.to_luma8().into_raw())?
        }
        other => Image::new(width, height, 3, other.to_rgb8().into_raw())?,
    };
    Ok(image)
}

/// Writes `img` as an 8-bit PNG.
pub fn save_image(img: &Image, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let color = match img.channels {
        1 => image::ExtendedColorType::L8,
        _ => image::ExtendedColorType::Rgb8,
    };
    image::save_buffer_with_format(
        path,
        &img.data,
        img.width as u32,
        img.height as u32,
        color,
        ImageFormat::Png,
    )
    .map_err(|e| match e {
        image::ImageError::IoError(io) => Error::io(path, io),
        other => Error::Encode {
            path: path.to_path_buf(),
            reason: other.to_string(),
        },
    })
}

/// Reads a 16-bit gray PNG as `raw / 65535`, then MinMax-normalizes it.
pub fn load_saliency(path: impl AsRef<Path>) -> Result<SaliencyMap> {
    let path = path.as_ref();
    let dynamic = image::ImageReader::open(path)
        .map_err(|e| Error::io(path, e))?
        .with_guessed_format()
        .map_err(|e| Error::io(path, e))?
        .decode()
        .map_err(|e| Error::Decode {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })?;
    let buffer = match dynamic {
        DynamicImage::ImageLuma16(buf) => buf,
        other => {
            return Err(Error::SaliencyFormat {
                path: path.to_path_buf(),
                found: format!("{:?}", other.color()),
            })
        }
    };
    let (width, height) = (buffer.width() as usize, buffer.height() as usize);
    if width == 0 || height == 0 {
        return Err(Error::Decode {
            path: path.to_path_buf(),
            reason: "zero-dimension saliency map".into(),
        });
    }
    let values = buffer
        .into_raw()
        .into_iter()
        .map(|raw| f64::from(raw) / 65535.0)
        .collect();
    Ok(normalize_minmax(&SaliencyMap::from_values_unchecked(
        width, height, values,
    )))
}

/// Writes a saliency map as a 16-bit gray PNG (1.0 becomes 65535).
pub fn save_saliency(map: &SaliencyMap, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let raw: Vec<u16> = map
        .values
        .iter()
        .map(|v| (v * 65535.0).round().clamp(0.0, 65535.0) as u16)
        .collect();
    let buffer: ImageBuffer<Luma<u16>, Vec<u16>> =
        ImageBuffer::from_raw(map.width as u32, map.height as u32, raw)
            .expect("buffer length matches dimensions");
    buffer
        .save_with_format(path, ImageFormat::Png)
        .map_err(|e| match e {
            image::ImageError::IoError(io) => Error::io(path, io),
            other => Error::Encode {
                path: path.to_path_buf(),
                reason: other.to_string(),
            },
        })
}
