//! 8-bit RGB rasters and binary netpbm (P5/P6) encoding.

use std::fmt;

use crate::error::{contract, Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub struct Rgb(pub [u8; 3]);

impl fmt::Display for Rgb {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let [r, g, b] = self.0;
        write!(f, "#{r:02x}{g:02x}{b:02x}")
    }
}

/// Row-major RGB raster, three bytes per pixel.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RgbImage {
    width: usize,
    height: usize,
    data: Vec<u8>,
}

impl RgbImage {
    pub fn new(width: usize, height: usize, data: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return contract(format!("image dimensions must be positive, got {width}x{height}"));
        }
        if data.len() != width * height * 3 {
            return contract(format!(
                "image buffer has {} bytes, expected {} for {width}x{height} RGB",
                data.len(),
                width * height * 3
            ));
        }
        Ok(Self { width, height, data })
    }

    pub fn filled(width: usize, height: usize, color: Rgb) -> Result<Self> {
        let data = color.0.repeat(width * height);
        Self::new(width, height, data)
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> Rgb) -> Result<Self> {
        let mut data = Vec::with_capacity(width * height * 3);
        for y in 0..height {
            for x in 0..width {
                data.extend_from_slice(&f(x, y).0);
            }
        }
        Self::new(width, height, data)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixel_count(&self) -> usize {
        self.width * self.height
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.data
    }

    #[inline]
    pub fn pixel(&self, index: usize) -> Rgb {
        let o = index * 3;
        Rgb([self.data[o], self.data[o + 1], self.data[o + 2]])
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> Rgb {
        self.pixel(y * self.width + x)
    }

    #[inline]
    pub fn set_pixel(&mut self, index: usize, color: Rgb) {
        let o = index * 3;
        self.data[o..o + 3].copy_from_slice(&color.0);
    }

    pub fn pixels(&self) -> impl Iterator<Item = Rgb> + '_ {
        self.data.chunks_exact(3).map(|c| Rgb([c[0], c[1], c[2]]))
    }

    /// Per-channel mean, rounded to nearest.
    pub fn mean_color(&self) -> Rgb {
        let mut sum = [0u64; 3];
        for px in self.pixels() {
            for (s, v) in sum.iter_mut().zip(px.0) {
                *s += u64::from(v);
            }
        }
        let n = self.pixel_count() as u64;
        Rgb(sum.map(|s| ((s + n / 2) / n) as u8))
    }

    pub fn to_ppm(&self) -> Vec<u8> {
        let mut out = format!("P6\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.extend_from_slice(&self.data);
        out
    }

    pub fn from_ppm(bytes: &[u8]) -> Result<Self> {
        let (header, body) = parse_header(bytes, b"P6")?;
        let expected = header.width * header.height * 3;
        if body.len() < expected {
            return Err(Error::Parse(format!(
                "PPM raster truncated: {} of {expected} bytes",
                body.len()
            )));
        }
        Self::new(header.width, header.height, body[..expected].to_vec())
    }
}

/// Single-channel 8-bit raster, as stored in a binary PGM.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GrayImage {
    pub width: usize,
    pub height: usize,
    pub data: Vec<u8>,
}

impl GrayImage {
    pub fn to_pgm(&self) -> Vec<u8> {
        let mut out = format!("P5\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.extend_from_slice(&self.data);
        out
    }

    pub fn from_pgm(bytes: &[u8]) -> Result<Self> {
        let (header, body) = parse_header(bytes, b"P5")?;
        let expected = header.width * header.height;
        if body.len() < expected {
            return Err(Error::Parse(format!(
                "PGM raster truncated: {} of {expected} bytes",
                body.len()
            )));
        }
        Ok(Self {
            width: header.width,
            height: header.height,
            data: body[..expected].to_vec(),
        })
    }
}

struct Header {
    width: usize,
    height: usize,
}

fn parse_header<'a>(bytes: &'a [u8], magic: &[u8]) -> Result<(Header, &'a [u8])> {
    if !bytes.starts_with(magic) {
        return Err(Error::Parse(format!(
            "expected netpbm magic {}",
            String::from_utf8_lossy(magic)
        )));
    }
    let mut pos = magic.len();
    let mut fields = [0usize; 3];
    for field in fields.iter_mut() {
        // whitespace and '#' comments may separate header tokens
        loop {
            match bytes.get(pos) {
                Some(b) if b.is_ascii_whitespace() => pos += 1,
                Some(b'#') => {
                    while bytes.get(pos).is_some_and(|&b| b != b'\n') {
                        pos += 1;
                    }
                }
                _ => break,
            }
        }
        let start = pos;
        while bytes.get(pos).is_some_and(u8::is_ascii_digit) {
            pos += 1;
        }
        if start == pos {
            return Err(Error::Parse("malformed netpbm header".into()));
        }
        *field = std::str::from_utf8(&bytes[start..pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::Parse("netpbm header value out of range".into()))?;
    }
    let [width, height, maxval] = fields;
    if maxval != 255 {
        return Err(Error::Parse(format!("only maxval 255 is supported, got {maxval}")));
    }
    if width == 0 || height == 0 {
        return Err(Error::Parse(format!("zero-sized raster {width}x{height}")));
    }
    // exactly one whitespace byte separates the header from the raster
    if !bytes.get(pos).is_some_and(u8::is_ascii_whitespace) {
        return Err(Error::Parse("missing separator after netpbm header".into()));
    }
    Ok((Header { width, height }, &bytes[pos + 1..]))
}
