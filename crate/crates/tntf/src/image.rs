//! Grayscale image container, file I/O, and synthetic test images.
//!
//! Pixels are stored row-major as `f64` in the nominal range `[0, 1]`.
//! Files are 8-bit: reads divide by the file's maxval, writes clamp to
//! `[0, 1]`, scale by 255 and round half away from zero.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::rng;

/// 2D real-valued pixel grid, row-major, nominal range `[0, 1]`.
///
/// Invariant: `data.len() == width * height`. Library-produced images hold
/// only finite values.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl Image {
    /// All-zero image. Panics on zero dimensions.
    pub fn new(width: usize, height: usize) -> Image {
        assert!(width > 0 && height > 0, "image dimensions must be positive");
        Image {
            width,
            height,
            data: vec![0.0; width * height],
        }
    }

    pub fn constant(width: usize, height: usize, value: f64) -> Image {
        let mut img = Image::new(width, height);
        img.data.fill(value);
        img
    }

    pub fn from_vec(width: usize, height: usize, data: Vec<f64>) -> Result<Image> {
        if width == 0 || height == 0 {
            return Err(Error::ZeroDimensions);
        }
        if data.len() != width * height {
            return Err(Error::ShapeMismatch(format!(
                "data length {} != {}x{}",
                data.len(),
                width,
                height
            )));
        }
        Ok(Image {
            width,
            height,
            data,
        })
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.data.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    /// Mutable pixel access; the caller must keep values finite.
    #[inline]
    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        debug_assert!(row < self.height && col < self.width);
        self.data[row * self.width + col]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, value: f64) {
        debug_assert!(row < self.height && col < self.width);
        self.data[row * self.width + col] = value;
    }

    /// Pixel with periodic (torus) indexing.
    #[inline]
    pub fn get_wrapped(&self, row: isize, col: isize) -> f64 {
        let r = row.rem_euclid(self.height as isize) as usize;
        let c = col.rem_euclid(self.width as isize) as usize;
        self.data[r * self.width + c]
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn same_shape(&self, other: &Image) -> bool {
        self.width == other.width && self.height == other.height
    }
}

/// Output format for [`write_image`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ImageFormat {
    PgmAscii,
    PgmBinary,
    Png,
}

/// Clamp to `[0, 1]`, scale by 255, round half away from zero.
#[inline]
pub fn quantize_u8(value: f64) -> u8 {
    (value.clamp(0.0, 1.0) * 255.0).round() as u8
}

/// Read a PGM (P2/P5) or 8-bit grayscale PNG file; pixel values are divided
/// by the file's maxval so the result lies in `[0, 1]`.
pub fn read_image(path: &Path) -> Result<Image> {
    let bytes = fs::read(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    if bytes.starts_with(b"P2") || bytes.starts_with(b"P5") {
        parse_pgm(&bytes)
    } else if bytes.starts_with(&[0x89, b'P', b'N', b'G']) {
        parse_png(&bytes)
    } else if bytes.starts_with(b"P1")
        || bytes.starts_with(b"P3")
        || bytes.starts_with(b"P4")
        || bytes.starts_with(b"P6")
    {
        Err(Error::UnsupportedFormat(
            "only grayscale PGM (P2/P5) is supported in the PNM family".into(),
        ))
    } else {
        Err(Error::UnsupportedFormat(
            "file is neither PGM (P2/P5) nor PNG".into(),
        ))
    }
}

/// Write an image; format is independent of the path's extension.
pub fn write_image(img: &Image, path: &Path, format: ImageFormat) -> Result<()> {
    let io_err = |source| Error::Io {
        path: path.to_path_buf(),
        source,
    };
    let file = fs::File::create(path).map_err(io_err)?;
    let mut out = BufWriter::new(file);
    match format {
        ImageFormat::PgmAscii => {
            write!(out, "P2\n{} {}\n255\n", img.width, img.height).map_err(io_err)?;
            for (i, v) in img.data.iter().enumerate() {
                let sep = if i % 16 == 15 { '\n' } else { ' ' };
                write!(out, "{}{}", quantize_u8(*v), sep).map_err(io_err)?;
            }
            writeln!(out).map_err(io_err)?;
        }
        ImageFormat::PgmBinary => {
            write!(out, "P5\n{} {}\n255\n", img.width, img.height).map_err(io_err)?;
            let raster: Vec<u8> = img.data.iter().map(|v| quantize_u8(*v)).collect();
            out.write_all(&raster).map_err(io_err)?;
        }
        ImageFormat::Png => {
            let mut encoder =
                png::Encoder::new(&mut out, img.width as u32, img.height as u32);
            encoder.set_color(png::ColorType::Grayscale);
            encoder.set_depth(png::BitDepth::Eight);
            let mut writer = encoder
                .write_header()
                .map_err(|e| Error::MalformedImage(format!("png encode: {e}")))?;
            let raster: Vec<u8> = img.data.iter().map(|v| quantize_u8(*v)).collect();
            writer
                .write_image_data(&raster)
                .map_err(|e| Error::MalformedImage(format!("png encode: {e}")))?;
        }
    }
    out.flush().map_err(io_err)
}

/// Token scanner for PGM headers: skips whitespace and `#` comments.
struct PgmScanner<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> PgmScanner<'a> {
    fn new(bytes: &'a [u8]) -> Self {
        PgmScanner { bytes, pos: 0 }
    }

    fn skip_separators(&mut self) {
        while self.pos < self.bytes.len() {
            let b = self.bytes[self.pos];
            if b.is_ascii_whitespace() {
                self.pos += 1;
            } else if b == b'#' {
                while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                    self.pos += 1;
                }
            } else {
                break;
            }
        }
    }

    fn token(&mut self) -> Result<&'a [u8]> {
        self.skip_separators();
        let start = self.pos;
        while self.pos < self.bytes.len() && !self.bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(Error::MalformedImage("unexpected end of header".into()));
        }
        Ok(&self.bytes[start..self.pos])
    }

    fn unsigned(&mut self) -> Result<u32> {
        let tok = self.token()?;
        let s = std::str::from_utf8(tok)
            .map_err(|_| Error::MalformedImage("non-ASCII header token".into()))?;
        s.parse::<u32>()
            .map_err(|_| Error::MalformedImage(format!("expected unsigned integer, got {s:?}")))
    }
}

fn parse_pgm(bytes: &[u8]) -> Result<Image> {
    let binary = bytes.starts_with(b"P5");
    let mut scan = PgmScanner::new(&bytes[2..]);
    let width = scan.unsigned()? as usize;
    let height = scan.unsigned()? as usize;
    let maxval = scan.unsigned()?;
    if width == 0 || height == 0 {
        return Err(Error::ZeroDimensions);
    }
    if maxval == 0 {
        return Err(Error::MalformedImage("maxval must be positive".into()));
    }
    if maxval > 255 {
        return Err(Error::UnsupportedFormat(format!(
            "maxval {maxval} > 255 (16-bit depth not supported)"
        )));
    }
    let n = width * height;
    let max = maxval as f64;
    let mut data = Vec::with_capacity(n);
    if binary {
        // Exactly one whitespace byte separates the maxval from the raster.
        let raster_start = scan.pos + 1 + 2;
        let raster = bytes
            .get(raster_start..raster_start + n)
            .ok_or_else(|| Error::MalformedImage("P5 raster truncated".into()))?;
        for &b in raster {
            if b as u32 > maxval {
                return Err(Error::MalformedImage(format!(
                    "sample {b} exceeds maxval {maxval}"
                )));
            }
            data.push(b as f64 / max);
        }
    } else {
        for _ in 0..n {
            let v = scan.unsigned()?;
            if v > maxval {
                return Err(Error::MalformedImage(format!(
                    "sample {v} exceeds maxval {maxval}"
                )));
            }
            data.push(v as f64 / max);
        }
    }
    Image::from_vec(width, height, data)
}

fn parse_png(bytes: &[u8]) -> Result<Image> {
    let decoder = png::Decoder::new(std::io::Cursor::new(bytes));
    let mut reader = decoder
        .read_info()
        .map_err(|e| Error::MalformedImage(format!("png decode: {e}")))?;
    let info = reader.info();
    if info.color_type != png::ColorType::Grayscale {
        return Err(Error::UnsupportedFormat(
            "PNG must be grayscale (color images are rejected)".into(),
        ));
    }
    if info.bit_depth != png::BitDepth::Eight {
        return Err(Error::UnsupportedFormat(
            "PNG must be 8-bit grayscale".into(),
        ));
    }
    let (width, height) = (info.width as usize, info.height as usize);
    if width == 0 || height == 0 {
        return Err(Error::ZeroDimensions);
    }
    let mut buf = vec![0u8; reader.output_buffer_size().unwrap_or(width * height)];
    let frame = reader
        .next_frame(&mut buf)
        .map_err(|e| Error::MalformedImage(format!("png decode: {e}")))?;
    let raster = &buf[..frame.buffer_size()];
    if raster.len() != width * height {
        return Err(Error::MalformedImage("png raster size mismatch".into()));
    }
    let data = raster.iter().map(|&b| b as f64 / 255.0).collect();
    Image::from_vec(width, height, data)
}

/// Kind selector for [`make_synthetic`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SyntheticKind {
    /// Piecewise-constant scene: dark background 0.1, one rectangle 0.9,
    /// one disk 0.6, one 1-pixel-wide horizontal line 1.0.
    SquareCircle,
    /// Same flavor plus a horizontal linear ramp region with exactly
    /// representable dyadic increments, for second-order structure.
    RampDisk,
}

impl std::str::FromStr for SyntheticKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "square-circle" => Ok(SyntheticKind::SquareCircle),
            "ramp-disk" => Ok(SyntheticKind::RampDisk),
            other => Err(Error::InvalidParameter(format!(
                "unknown synthetic kind {other:?}"
            ))),
        }
    }
}

fn fill_rect(img: &mut Image, r0: usize, c0: usize, rows: usize, cols: usize, value: f64) {
    for r in r0..(r0 + rows).min(img.height()) {
        for c in c0..(c0 + cols).min(img.width()) {
            img.set(r, c, value);
        }
    }
}

fn fill_disk(img: &mut Image, cr: usize, cc: usize, radius: usize, value: f64) {
    let rad2 = (radius * radius) as isize;
    for r in cr.saturating_sub(radius)..(cr + radius + 1).min(img.height()) {
        for c in cc.saturating_sub(radius)..(cc + radius + 1).min(img.width()) {
            let dr = r as isize - cr as isize;
            let dc = c as isize - cc as isize;
            if dr * dr + dc * dc <= rad2 {
                img.set(r, c, value);
            }
        }
    }
}

/// Deterministic synthetic test image; the seed jitters shape placement.
pub fn make_synthetic(kind: SyntheticKind, size: usize, seed: u64) -> Result<Image> {
    if size < 32 {
        return Err(Error::InvalidParameter(format!(
            "synthetic size {size} < 32"
        )));
    }
    let s = size;
    let jitter = |k: u64| (rng::stream(seed ^ 0x5EED_1347, k) % (s as u64 / 16)) as usize;
    let (j0, j1, j2, j3) = (jitter(0), jitter(1), jitter(2), jitter(3));
    match kind {
        SyntheticKind::SquareCircle => {
            let mut img = Image::constant(s, s, 0.1);
            fill_rect(&mut img, s / 8 + j0, s / 8 + j1, s / 4, s / 3, 0.9);
            fill_disk(&mut img, 5 * s / 8 + j2, 5 * s / 8 + j3, s / 6, 0.6);
            let line_row = 15 * s / 16 - j0;
            fill_rect(&mut img, line_row, s / 16, 1, s / 2, 1.0);
            Ok(img)
        }
        SyntheticKind::RampDisk => {
            let mut img = Image::constant(s, s, 0.2);
            // Dyadic ramp: values (16+k)/128 are exact, so first differences
            // are exactly 1/128 and second differences exactly zero.
            let ramp_cols = (s / 2).min(96);
            let (r0, c0) = (s / 8 + j0, s / 16 + j1);
            for r in r0..r0 + s / 4 {
                for k in 0..ramp_cols {
                    img.set(r, c0 + k, 0.125 + k as f64 / 128.0);
                }
            }
            fill_disk(&mut img, 11 * s / 16 + j2, 3 * s / 8 + j3, s / 8, 0.7);
            fill_rect(&mut img, 11 * s / 16, 3 * s / 4, s / 8, s / 8, 0.9);
            Ok(img)
        }
    }
}
