//! Binary PGM (P5) and PPM (P6) images with maxval 255.
//!
//! The header is `magic width height maxval` separated by whitespace, with
//! optional `#` comments between tokens, followed by exactly one whitespace
//! byte and the raw samples.

use std::fs;
use std::path::Path;

use crate::datamodel::{Dataset, DatasetKind, ImageTensor, Label, Sample};
use crate::error::{Error, Result};
use crate::fsutil::write_atomic;
use crate::scalar::Scalar;

fn decode_err(offset: usize, message: impl Into<String>) -> Error {
    Error::Decode {
        offset,
        message: message.into(),
    }
}

struct HeaderReader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> HeaderReader<'a> {
    fn skip_whitespace_and_comments(&mut self) {
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

    fn number(&mut self, what: &str) -> Result<usize> {
        self.skip_whitespace_and_comments();
        let start = self.pos;
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(decode_err(start, format!("expected {what}")));
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| decode_err(start, format!("{what} is out of range")))
    }
}

/// Decodes a P5/P6 file into a `[0,1]`-normalised channel-last tensor.
pub fn decode_image<T: Scalar>(bytes: &[u8]) -> Result<ImageTensor<T>> {
    if bytes.len() < 2 {
        return Err(decode_err(0, "file too short for magic number"));
    }
    let channels = match &bytes[..2] {
        b"P5" => 1,
        b"P6" => 3,
        _ => return Err(decode_err(0, "bad magic number, expected P5 or P6")),
    };
    let mut rd = HeaderReader { bytes, pos: 2 };
    if rd.pos < bytes.len() && !bytes[rd.pos].is_ascii_whitespace() && bytes[rd.pos] != b'#' {
        return Err(decode_err(2, "missing whitespace after magic number"));
    }
    let width = rd.number("width")?;
    let height = rd.number("height")?;
    let maxval_at = {
        rd.skip_whitespace_and_comments();
        rd.pos
    };
    let maxval = rd.number("maxval")?;
    if maxval != 255 {
        return Err(decode_err(maxval_at, format!("maxval {maxval} unsupported, expected 255")));
    }
    if width == 0 || height == 0 {
        return Err(decode_err(3, "image dimensions must be positive"));
    }
    if rd.pos >= bytes.len() || !bytes[rd.pos].is_ascii_whitespace() {
        return Err(decode_err(rd.pos, "expected a single whitespace byte after maxval"));
    }
    let data_start = rd.pos + 1;
    let expected = width
        .checked_mul(height)
        .and_then(|v| v.checked_mul(channels))
        .ok_or_else(|| decode_err(3, "image dimensions overflow"))?;
    let payload = &bytes[data_start..];
    if payload.len() < expected {
        return Err(decode_err(
            bytes.len(),
            format!("truncated payload: {} bytes, {expected} expected", payload.len()),
        ));
    }
    if payload.len() > expected {
        return Err(decode_err(
            data_start + expected,
            format!("{} trailing bytes after payload", payload.len() - expected),
        ));
    }
    let scale = T::lit(255.0);
    let data = payload.iter().map(|&b| T::from_count(b as usize) / scale).collect();
    ImageTensor::new(height, width, channels, data)
}

/// Encodes a 1- or 3-channel tensor, rounding to the nearest 8-bit level.
pub fn encode_image<T: Scalar>(img: &ImageTensor<T>) -> Result<Vec<u8>> {
    let magic = match img.channels() {
        1 => "P5",
        3 => "P6",
        c => return Err(Error::validation(format!("cannot encode {c}-channel image as PGM/PPM"))),
    };
    let mut out = format!("{magic}\n{} {}\n255\n", img.width(), img.height()).into_bytes();
    out.extend(img.data().iter().map(|v| (v.as_f64() * 255.0).round().clamp(0.0, 255.0) as u8));
    Ok(out)
}

fn extension(channels: usize) -> &'static str {
    if channels == 1 {
        "pgm"
    } else {
        "ppm"
    }
}

/// Writes `labels.csv` (`id,label,file`) plus one image file per sample.
pub fn write_image_dataset<T: Scalar>(dir: &Path, d: &Dataset<T>) -> Result<()> {
    fs::create_dir_all(dir)?;
    let mut index = String::from("id,label,file\n");
    for s in d.samples() {
        let img = s
            .image_tensor()
            .ok_or_else(|| Error::validation("write_image_dataset needs an image dataset"))?;
        let file = format!("{}.{}", s.subject_id, extension(img.channels()));
        write_atomic(&dir.join(&file), &encode_image(img)?)?;
        let label = s.label.map(Label::as_str).unwrap_or("");
        index.push_str(&format!("{},{},{}\n", s.subject_id, label, file));
    }
    write_atomic(&dir.join("labels.csv"), index.as_bytes())?;
    Ok(())
}

/// Reads a directory written by [`write_image_dataset`], in index order.
pub fn read_image_dataset<T: Scalar>(dir: &Path) -> Result<Dataset<T>> {
    let index = fs::read_to_string(dir.join("labels.csv"))?;
    let mut lines = index.lines();
    let header = lines.next().unwrap_or("").trim_end_matches('\r');
    if header != "id,label,file" {
        return Err(Error::Schema(format!("unexpected image index header {header:?}")));
    }
    let mut samples = Vec::new();
    for (row, line) in lines.enumerate().map(|(i, l)| (i + 1, l.trim_end_matches('\r'))) {
        if line.is_empty() {
            continue;
        }
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() != 3 {
            return Err(Error::Row {
                row,
                message: format!("expected 3 cells, found {}", cells.len()),
            });
        }
        let label = match cells[1] {
            "ASD" => Some(Label::Asd),
            "NonASD" => Some(Label::NonAsd),
            "" => None,
            other => {
                return Err(Error::Row {
                    row,
                    message: format!("unknown label token {other:?}"),
                })
            }
        };
        let bytes = fs::read(dir.join(cells[2]))?;
        let img = decode_image(&bytes).map_err(|e| Error::Row {
            row,
            message: format!("{}: {e}", cells[2]),
        })?;
        samples.push(Sample::image(cells[0], img, label));
    }
    Dataset::new(DatasetKind::Image, samples)
}
