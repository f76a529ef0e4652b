//! Angular-delay transform and the CSI-to-image encodings.
//!
//! Axis convention for every real-valued map and image produced here: rows
//! index the delay axis (`h`, `γN` bins) and columns index the angle axis
//! (`w`, `βM` bins). [`AngularDelayMap`] itself keeps the transform's natural
//! `βM × γN` layout.

use std::f64::consts::PI;
use std::io::Write;
use std::path::Path;

use nalgebra::DMatrix;

use crate::channel::{ChannelMatrix, PilotObservation};
use crate::{CMatrix, Complex64, Error, Result};

/// Anything holding an `M × N` spatial-frequency matrix.
pub trait SpatialFrequency {
    fn matrix(&self) -> &CMatrix;
}

impl SpatialFrequency for CMatrix {
    fn matrix(&self) -> &CMatrix {
        self
    }
}

impl SpatialFrequency for ChannelMatrix {
    fn matrix(&self) -> &CMatrix {
        self.entries()
    }
}

impl SpatialFrequency for PilotObservation {
    fn matrix(&self) -> &CMatrix {
        &self.entries
    }
}

/// Oversampled complex map `Ỹ` of size `βM × γN`.
#[derive(Debug, Clone, PartialEq)]
pub struct AngularDelayMap {
    pub entries: CMatrix,
    pub beta: usize,
    pub gamma: usize,
    pub base_m: usize,
    pub base_n: usize,
}

impl AngularDelayMap {
    /// Number of angle bins, `βM`.
    pub fn angle_bins(&self) -> usize {
        self.beta * self.base_m
    }

    /// Number of delay bins, `γN`.
    pub fn delay_bins(&self) -> usize {
        self.gamma * self.base_n
    }

    /// `|Ỹ|` in image orientation (`delay × angle`).
    pub fn modulus_image(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.delay_bins(), self.angle_bins(), |h, w| {
            self.entries[(w, h)].norm()
        })
    }

    /// `Ỹ · c` for a real scalar.
    pub fn scaled(&self, c: f64) -> Self {
        AngularDelayMap {
            entries: self.entries.map(|z| z * c),
            ..self.clone()
        }
    }
}

/// First `size` rows of the `oversample·size`-point DFT matrix, unnormalised:
/// entry `(r, c) = exp(−j2π·r·c/(oversample·size))`.
pub fn dft_basis(size: usize, oversample: usize) -> Result<CMatrix> {
    if size == 0 || oversample == 0 {
        return Err(Error::domain("DFT basis dimensions must be positive"));
    }
    let cols = size * oversample;
    Ok(CMatrix::from_fn(size, cols, |r, c| {
        // r·c reduced modulo the DFT length keeps the phase argument small.
        let k = (r * c) % cols;
        if k == 0 {
            Complex64::new(1.0, 0.0)
        } else {
            Complex64::from_polar(1.0, -2.0 * PI * k as f64 / cols as f64)
        }
    }))
}

/// `Ỹ = F_aᵀ · Y · F̄_d` with `F_a = dft_basis(M, β)` and `F_d = dft_basis(N, γ)`.
///
/// The delay basis enters conjugated so that a path at delay `q/(γN)` peaks
/// in delay bin `q`, while a path at angle `k/(βM)` peaks in angle bin
/// `(βM − k) mod βM`.
pub fn to_angular_delay<Y: SpatialFrequency + ?Sized>(y: &Y, beta: usize, gamma: usize) -> Result<AngularDelayMap> {
    let y = y.matrix();
    let (m, n) = y.shape();
    if m == 0 || n == 0 {
        return Err(Error::domain("observation must be non-empty"));
    }
    let fa = dft_basis(m, beta)?;
    let fd = dft_basis(n, gamma)?.map(|z| z.conj());
    let entries = fa.transpose() * y * fd;
    Ok(AngularDelayMap {
        entries,
        beta,
        gamma,
        base_m: m,
        base_n: n,
    })
}

/// `(min, max)` used to map values into `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormRecord {
    pub min: f64,
    pub max: f64,
}

impl NormRecord {
    fn of<'a>(values: impl IntoIterator<Item = &'a f64>) -> Option<Self> {
        let mut it = values.into_iter();
        let first = *it.next()?;
        let (min, max) = it.fold((first, first), |(lo, hi), &v| (lo.min(v), hi.max(v)));
        Some(NormRecord { min, max })
    }

    pub fn is_degenerate(&self) -> bool {
        self.max <= self.min
    }

    pub fn apply(&self, v: f64) -> f64 {
        if self.is_degenerate() {
            0.0
        } else {
            (v - self.min) / (self.max - self.min)
        }
    }

    pub fn invert(&self, x: f64) -> f64 {
        self.min + x * (self.max - self.min)
    }
}

/// Real map scaled into `[0, 1]` plus the record that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedMap {
    pub values: DMatrix<f64>,
    pub record: NormRecord,
}

fn min_max_normalize(values: &DMatrix<f64>) -> Result<NormalizedMap> {
    let record = NormRecord::of(values.iter()).ok_or_else(|| Error::domain("map must be non-empty"))?;
    Ok(NormalizedMap {
        values: values.map(|v| record.apply(v)),
        record,
    })
}

/// `(|Ỹ| − min)/(max − min)` in image orientation; all zeros when the modulus
/// is constant.
pub fn modulus_normalize(map: &AngularDelayMap) -> Result<NormalizedMap> {
    min_max_normalize(&map.modulus_image())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Encoding {
    Colormap,
    GrayscaleRgb,
    TwoChannelZero,
}

/// 8-bit RGB image, row-major, three bytes per pixel.
#[derive(Debug, Clone, PartialEq)]
pub struct CsiImage {
    pub height: usize,
    pub width: usize,
    pub pixels: Vec<u8>,
    pub norm_record: NormRecord,
    pub encoding: Encoding,
}

impl CsiImage {
    pub fn pixel(&self, h: usize, w: usize) -> [u8; 3] {
        let i = 3 * (h * self.width + w);
        [self.pixels[i], self.pixels[i + 1], self.pixels[i + 2]]
    }

    /// One colour plane as a `height × width` matrix of raw byte values.
    pub fn channel(&self, c: usize) -> DMatrix<f64> {
        DMatrix::from_fn(self.height, self.width, |h, w| self.pixels[3 * (h * self.width + w) + c] as f64)
    }

    pub fn to_png(&self) -> Result<Vec<u8>> {
        let mut out = Vec::new();
        {
            let mut enc = png::Encoder::new(&mut out, self.width as u32, self.height as u32);
            enc.set_color(png::ColorType::Rgb);
            enc.set_depth(png::BitDepth::Eight);
            let mut writer = enc.write_header().map_err(|e| Error::Image(e.to_string()))?;
            writer
                .write_image_data(&self.pixels)
                .map_err(|e| Error::Image(e.to_string()))?;
        }
        Ok(out)
    }

    pub fn write_png(&self, path: &Path) -> Result<()> {
        let bytes = self.to_png()?;
        let mut f = std::fs::File::create(path).map_err(|e| Error::file(path, e))?;
        f.write_all(&bytes).map_err(|e| Error::file(path, e))?;
        Ok(())
    }

    /// Decodes an 8-bit PNG into RGB. Grayscale and alpha variants are
    /// expanded or dropped. The normalisation record is not stored in PNG and
    /// comes back as `(0, 1)`.
    pub fn from_png(bytes: &[u8]) -> Result<Self> {
        let mut decoder = png::Decoder::new(std::io::Cursor::new(bytes));
        decoder.set_transformations(png::Transformations::EXPAND | png::Transformations::STRIP_16);
        let mut reader = decoder.read_info().map_err(|e| Error::Image(e.to_string()))?;
        let size = reader
            .output_buffer_size()
            .ok_or_else(|| Error::Image("image too large".into()))?;
        let mut buf = vec![0u8; size];
        let info = reader.next_frame(&mut buf).map_err(|e| Error::Image(e.to_string()))?;
        let (w, h) = (info.width as usize, info.height as usize);
        let src = &buf[..info.buffer_size()];
        let pixels: Vec<u8> = match info.color_type {
            png::ColorType::Rgb => src.to_vec(),
            png::ColorType::Rgba => src.chunks_exact(4).flat_map(|p| [p[0], p[1], p[2]]).collect(),
            png::ColorType::Grayscale => src.iter().flat_map(|&g| [g, g, g]).collect(),
            png::ColorType::GrayscaleAlpha => src.chunks_exact(2).flat_map(|p| [p[0], p[0], p[0]]).collect(),
            png::ColorType::Indexed => return Err(Error::Image("unexpanded palette image".into())),
        };
        Ok(CsiImage {
            height: h,
            width: w,
            pixels,
            norm_record: NormRecord { min: 0.0, max: 1.0 },
            encoding: Encoding::Colormap,
        })
    }

    pub fn read_png(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::file(path, e))?;
        Self::from_png(&bytes)
    }
}

fn quantize(x: f64) -> u8 {
    (x.clamp(0.0, 1.0) * 255.0).round() as u8
}

/// Closed-form jet-style colour for `x ∈ [0, 1]`.
pub fn jet(x: f64) -> [u8; 3] {
    let ch = |c: f64| quantize((1.5 - (4.0 * x - c).abs()).clamp(0.0, 1.0));
    [ch(3.0), ch(2.0), ch(1.0)]
}

/// Jet-style RGB rendering of a normalised map.
pub fn encode_rgb_colormap(norm: &NormalizedMap) -> Result<CsiImage> {
    let v = &norm.values;
    let (height, width) = v.shape();
    let mut pixels = Vec::with_capacity(height * width * 3);
    for h in 0..height {
        for w in 0..width {
            let x = v[(h, w)];
            if !(0.0..=1.0).contains(&x) {
                return Err(Error::domain(format!("value {x} at ({h}, {w}) outside [0, 1]")));
            }
            pixels.extend_from_slice(&jet(x));
        }
    }
    Ok(CsiImage {
        height,
        width,
        pixels,
        norm_record: norm.record,
        encoding: Encoding::Colormap,
    })
}

/// Bilinear resize with corner-aligned sampling.
pub fn resize_bilinear(src: &DMatrix<f64>, out_h: usize, out_w: usize) -> DMatrix<f64> {
    let (in_h, in_w) = src.shape();
    if (in_h, in_w) == (out_h, out_w) {
        return src.clone();
    }
    let coord = |i: usize, out: usize, inp: usize| -> (usize, usize, f64) {
        if out <= 1 || inp <= 1 {
            return (0, 0, 0.0);
        }
        let s = i as f64 * (inp - 1) as f64 / (out - 1) as f64;
        let i0 = (s.floor() as usize).min(inp - 1);
        let i1 = (i0 + 1).min(inp - 1);
        (i0, i1, s - i0 as f64)
    };
    let rows: Vec<_> = (0..out_h).map(|i| coord(i, out_h, in_h)).collect();
    let cols: Vec<_> = (0..out_w).map(|j| coord(j, out_w, in_w)).collect();
    DMatrix::from_fn(out_h, out_w, |i, j| {
        let (r0, r1, fr) = rows[i];
        let (c0, c1, fc) = cols[j];
        let top = src[(r0, c0)] * (1.0 - fc) + src[(r0, c1)] * fc;
        let bot = src[(r1, c0)] * (1.0 - fc) + src[(r1, c1)] * fc;
        top * (1.0 - fr) + bot * fr
    })
}

/// Stack of modulus snapshots, `t × m × n`, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ModulusTensor {
    pub t: usize,
    pub m: usize,
    pub n: usize,
    pub data: Vec<f64>,
}

impl ModulusTensor {
    pub fn new(t: usize, m: usize, n: usize, data: Vec<f64>) -> Result<Self> {
        if t == 0 || m == 0 || n == 0 {
            return Err(Error::domain("tensor dimensions must be positive"));
        }
        if data.len() != t * m * n {
            return Err(Error::domain(format!(
                "tensor data has {} values, expected {}",
                data.len(),
                t * m * n
            )));
        }
        Ok(ModulusTensor { t, m, n, data })
    }

    pub fn get(&self, t: usize, m: usize, n: usize) -> f64 {
        self.data[(t * self.m + m) * self.n + n]
    }

    /// `t × (m·n)` view, columns ordered antenna-major.
    pub fn as_grayscale(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.t, self.m * self.n, &self.data)
    }
}

fn gray_image(values: &DMatrix<f64>, record: NormRecord, encoding: Encoding) -> CsiImage {
    let (height, width) = values.shape();
    let mut pixels = Vec::with_capacity(height * width * 3);
    for h in 0..height {
        for w in 0..width {
            let q = quantize(values[(h, w)]);
            pixels.extend_from_slice(&[q, q, q]);
        }
    }
    CsiImage {
        height,
        width,
        pixels,
        norm_record: record,
        encoding,
    }
}

/// Temporal modulus stack as a grayscale picture replicated into RGB.
pub fn grayscale_reshape_resize(stack: &ModulusTensor, out_h: usize, out_w: usize) -> Result<CsiImage> {
    if out_h == 0 || out_w == 0 {
        return Err(Error::domain("output size must be positive"));
    }
    let norm = min_max_normalize(&stack.as_grayscale())?;
    let resized = resize_bilinear(&norm.values, out_h, out_w);
    Ok(gray_image(&resized, norm.record, Encoding::GrayscaleRgb))
}

/// Real and imaginary parts in the first two channels (shared normalisation),
/// zeros in the third. Also returns the mean per-entry power of `Ỹ`, which the
/// normalisation otherwise discards.
pub fn encode_two_channel_zero(map: &AngularDelayMap, out_h: usize, out_w: usize) -> Result<(CsiImage, f64)> {
    if out_h == 0 || out_w == 0 {
        return Err(Error::domain("output size must be positive"));
    }
    let e = &map.entries;
    if e.is_empty() {
        return Err(Error::domain("map must be non-empty"));
    }
    let power = e.iter().map(|z| z.norm_sqr()).sum::<f64>() / e.len() as f64;
    let (dh, aw) = (map.delay_bins(), map.angle_bins());
    let re = DMatrix::from_fn(dh, aw, |h, w| e[(w, h)].re);
    let im = DMatrix::from_fn(dh, aw, |h, w| e[(w, h)].im);
    let record = NormRecord::of(re.iter().chain(im.iter())).expect("non-empty");
    let re = resize_bilinear(&re.map(|v| record.apply(v)), out_h, out_w);
    let im = resize_bilinear(&im.map(|v| record.apply(v)), out_h, out_w);
    let mut pixels = Vec::with_capacity(out_h * out_w * 3);
    for h in 0..out_h {
        for w in 0..out_w {
            pixels.extend_from_slice(&[quantize(re[(h, w)]), quantize(im[(h, w)]), 0]);
        }
    }
    Ok((
        CsiImage {
            height: out_h,
            width: out_w,
            pixels,
            norm_record: record,
            encoding: Encoding::TwoChannelZero,
        },
        power,
    ))
}
