//! Hyperspectral image cubes and their file loaders.
//!
//! Two input formats are supported:
//!
//! * ENVI: a text header (`samples`, `lines`, `bands`, `data type`,
//!   `interleave`, optional `byte order` and `header offset`) next to a flat
//!   binary file. Data types 1, 2, 3, 4, 5, 12 are read; interleave may be
//!   `bsq`, `bil` or `bip`.
//! * CSV: a first line `H,W,B`, then `H·W` lines of `B` values, pixels in
//!   row-major order.
//!
//! Values are kept as read; [`ImageCube::normalized`] rescales to `[0, 1]`.

use std::collections::HashMap;
use std::fs;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::{Path, PathBuf};

use crate::error::{MgspError, Result};

/// `H×W×B` cube stored band-sequentially (one contiguous frame per band).
#[derive(Clone, Debug, PartialEq)]
pub struct ImageCube {
    height: usize,
    width: usize,
    bands: usize,
    data: Vec<f64>,
}

impl ImageCube {
    pub fn new(height: usize, width: usize, bands: usize, data: Vec<f64>) -> Result<Self> {
        if height == 0 || width == 0 || bands == 0 {
            return Err(MgspError::param("cube dimensions must be positive"));
        }
        if data.len() != height * width * bands {
            return Err(MgspError::shape(
                "image cube",
                height * width * bands,
                data.len(),
            ));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(MgspError::param("image cube has non-finite values"));
        }
        Ok(ImageCube {
            height,
            width,
            bands,
            data,
        })
    }

    /// Builds a cube from `f(row, col, band)`.
    pub fn from_fn(height: usize, width: usize, bands: usize, mut f: impl FnMut(usize, usize, usize) -> f64) -> Result<Self> {
        let mut data = Vec::with_capacity(height * width * bands);
        for b in 0..bands {
            for r in 0..height {
                for c in 0..width {
                    data.push(f(r, c, b));
                }
            }
        }
        ImageCube::new(height, width, bands, data)
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn bands(&self) -> usize {
        self.bands
    }

    pub fn pixels(&self) -> usize {
        self.height * self.width
    }

    pub fn get(&self, row: usize, col: usize, band: usize) -> f64 {
        self.data[band * self.pixels() + row * self.width + col]
    }

    /// Band `b` as a row-major `H·W` slice.
    pub fn frame(&self, band: usize) -> &[f64] {
        let p = self.pixels();
        &self.data[band * p..(band + 1) * p]
    }

    /// Spectrum of pixel `p` (row-major index).
    pub fn spectrum(&self, pixel: usize) -> Vec<f64> {
        (0..self.bands).map(|b| self.data[b * self.pixels() + pixel]).collect()
    }

    /// Global min-max rescale to `[0, 1]` (constant cubes map to 0).
    pub fn normalized(&self) -> ImageCube {
        let lo = self.data.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = self.data.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let span = hi - lo;
        let data = self
            .data
            .iter()
            .map(|v| if span > 0.0 { (v - lo) / span } else { 0.0 })
            .collect();
        ImageCube { data, ..*self }
    }

    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut lines = BufReader::new(r).lines();
        let head = lines.next().ok_or_else(|| MgspError::Parse("empty cube file".into()))??;
        let dims: Vec<usize> = head
            .split(',')
            .map(|t| t.trim().parse::<usize>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| MgspError::Parse(format!("cube header `{head}` is not `H,W,B`")))?;
        let [h, w, b] = dims[..] else {
            return Err(MgspError::Parse(format!("cube header `{head}` is not `H,W,B`")));
        };
        let mut data = vec![0.0; h * w * b];
        let mut pixel = 0;
        for line in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            if pixel >= h * w {
                return Err(MgspError::Parse("cube file has extra rows".into()));
            }
            let mut count = 0;
            for (band, tok) in line.split(',').enumerate() {
                let v: f64 = tok
                    .trim()
                    .parse()
                    .map_err(|_| MgspError::Parse(format!("cube row {}: bad value `{tok}`", pixel + 1)))?;
                if band < b {
                    data[band * h * w + pixel] = v;
                }
                count += 1;
            }
            if count != b {
                return Err(MgspError::Parse(format!(
                    "cube row {} has {count} values, expected {b}",
                    pixel + 1
                )));
            }
            pixel += 1;
        }
        if pixel != h * w {
            return Err(MgspError::Parse(format!("cube file has {pixel} rows, expected {}", h * w)));
        }
        ImageCube::new(h, w, b, data).map_err(|e| MgspError::Parse(e.to_string()))
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let mut out = format!("{},{},{}\n", self.height, self.width, self.bands);
        for p in 0..self.pixels() {
            let row: Vec<String> = self.spectrum(p).iter().map(|v| v.to_string()).collect();
            out.push_str(&row.join(","));
            out.push('\n');
        }
        w.write_all(out.as_bytes())?;
        Ok(())
    }

    /// Reads an ENVI header and its binary file. The data file is looked up
    /// next to the header (same stem, then `.img`, `.raw`, `.dat`, `.bsq`,
    /// `.bil`, `.bip`) unless given explicitly.
    pub fn read_envi(header: &Path, data: Option<&Path>) -> Result<Self> {
        let text = fs::read_to_string(header)?;
        let hdr = EnviHeader::parse(&text)?;
        let data_path = match data {
            Some(p) => p.to_path_buf(),
            None => find_envi_data(header)?,
        };
        let bytes = fs::read(&data_path)?;
        hdr.decode(&bytes)
    }

    /// Writes a little-endian `f64` BSQ ENVI pair (`<stem>.hdr`, `<stem>.img`).
    pub fn write_envi(&self, stem: &Path) -> Result<()> {
        let header = format!(
            "ENVI\nsamples = {}\nlines = {}\nbands = {}\nheader offset = 0\nfile type = ENVI Standard\ndata type = 5\ninterleave = bsq\nbyte order = 0\n",
            self.width, self.height, self.bands
        );
        fs::write(stem.with_extension("hdr"), header)?;
        let mut bytes = Vec::with_capacity(self.data.len() * 8);
        for v in &self.data {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        fs::write(stem.with_extension("img"), bytes)?;
        Ok(())
    }
}

fn find_envi_data(header: &Path) -> Result<PathBuf> {
    let stem = header.with_extension("");
    let mut candidates = vec![stem.clone()];
    for ext in ["img", "raw", "dat", "bsq", "bil", "bip"] {
        candidates.push(stem.with_extension(ext));
    }
    candidates
        .into_iter()
        .find(|p| p != header && p.is_file())
        .ok_or_else(|| {
            MgspError::Io(std::io::Error::new(
                std::io::ErrorKind::NotFound,
                format!("no data file found next to {}", header.display()),
            ))
        })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Interleave {
    Bsq,
    Bil,
    Bip,
}

#[derive(Clone, Debug, PartialEq)]
struct EnviHeader {
    samples: usize,
    lines: usize,
    bands: usize,
    data_type: u32,
    interleave: Interleave,
    big_endian: bool,
    offset: usize,
}

impl EnviHeader {
    fn parse(text: &str) -> Result<Self> {
        let mut fields = HashMap::new();
        let mut pending: Option<(String, String)> = None;
        for line in text.lines() {
            if let Some((key, mut value)) = pending.take() {
                value.push(' ');
                value.push_str(line.trim());
                if line.contains('}') {
                    fields.insert(key, value);
                } else {
                    pending = Some((key, value));
                }
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                continue;
            };
            let key = key.trim().to_ascii_lowercase();
            let value = value.trim().to_string();
            if value.starts_with('{') && !value.contains('}') {
                pending = Some((key, value));
            } else {
                fields.insert(key, value);
            }
        }
        let get = |k: &str| {
            fields
                .get(k)
                .ok_or_else(|| MgspError::Parse(format!("ENVI header is missing `{k}`")))
        };
        let num = |k: &str| -> Result<usize> {
            get(k)?
                .parse()
                .map_err(|_| MgspError::Parse(format!("ENVI header field `{k}` is not an integer")))
        };
        let interleave = match get("interleave")?.to_ascii_lowercase().as_str() {
            "bsq" => Interleave::Bsq,
            "bil" => Interleave::Bil,
            "bip" => Interleave::Bip,
            other => return Err(MgspError::Parse(format!("unknown interleave `{other}`"))),
        };
        let data_type = num("data type")? as u32;
        if !matches!(data_type, 1 | 2 | 3 | 4 | 5 | 12) {
            return Err(MgspError::Parse(format!("unsupported ENVI data type {data_type}")));
        }
        let big_endian = match fields.get("byte order") {
            Some(v) => v.trim() == "1",
            None => false,
        };
        let offset = match fields.get("header offset") {
            Some(_) => num("header offset")?,
            None => 0,
        };
        Ok(EnviHeader {
            samples: num("samples")?,
            lines: num("lines")?,
            bands: num("bands")?,
            data_type,
            interleave,
            big_endian,
            offset,
        })
    }

    fn width(&self) -> usize {
        match self.data_type {
            1 => 1,
            2 | 12 => 2,
            3 | 4 => 4,
            _ => 8,
        }
    }

    fn value(&self, raw: &[u8]) -> f64 {
        macro_rules! read {
            ($t:ty, $n:expr) => {{
                let mut buf = [0u8; $n];
                buf.copy_from_slice(raw);
                if self.big_endian {
                    <$t>::from_be_bytes(buf) as f64
                } else {
                    <$t>::from_le_bytes(buf) as f64
                }
            }};
        }
        match self.data_type {
            1 => raw[0] as f64,
            2 => read!(i16, 2),
            3 => read!(i32, 4),
            4 => read!(f32, 4),
            5 => read!(f64, 8),
            _ => read!(u16, 2),
        }
    }

    fn decode(&self, bytes: &[u8]) -> Result<ImageCube> {
        let (h, w, b) = (self.lines, self.samples, self.bands);
        let size = self.width();
        let need = self.offset + h * w * b * size;
        if bytes.len() < need {
            return Err(MgspError::Parse(format!(
                "ENVI data holds {} bytes, header needs {need}",
                bytes.len()
            )));
        }
        let body = &bytes[self.offset..need];
        let mut data = vec![0.0; h * w * b];
        for r in 0..h {
            for c in 0..w {
                for band in 0..b {
                    let k = match self.interleave {
                        Interleave::Bsq => (band * h + r) * w + c,
                        Interleave::Bil => (r * b + band) * w + c,
                        Interleave::Bip => (r * w + c) * b + band,
                    };
                    data[band * h * w + r * w + c] = self.value(&body[k * size..(k + 1) * size]);
                }
            }
        }
        ImageCube::new(h, w, b, data).map_err(|e| MgspError::Parse(e.to_string()))
    }
}

/// Reads an integer label map: `H` lines of `W` comma-separated labels.
pub fn read_label_csv<R: Read>(r: R) -> Result<(usize, usize, Vec<usize>)> {
    let mut labels = Vec::new();
    let mut width = None;
    let mut height = 0;
    for (k, line) in BufReader::new(r).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let row: Vec<usize> = line
            .split(',')
            .map(|t| t.trim().parse::<usize>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| MgspError::Parse(format!("label row {}: not an integer list", k + 1)))?;
        match width {
            None => width = Some(row.len()),
            Some(w) if w != row.len() => {
                return Err(MgspError::Parse(format!("label row {} has {} entries, expected {w}", k + 1, row.len())))
            }
            _ => {}
        }
        labels.extend(row);
        height += 1;
    }
    let width = width.ok_or_else(|| MgspError::Parse("empty label file".into()))?;
    Ok((height, width, labels))
}

pub fn write_label_csv<W: Write>(mut w: W, width: usize, labels: &[usize]) -> Result<()> {
    let mut out = String::new();
    for row in labels.chunks(width.max(1)) {
        let cells: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    w.write_all(out.as_bytes())?;
    Ok(())
}
