//! Binary PPM (P6) and PGM (P5) with maxval 255.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Raster {
    pub width: usize,
    pub height: usize,
    pub channels: usize,
    pub data: Vec<u8>,
}

pub fn encode(magic: &str, width: usize, height: usize, data: &[u8]) -> Vec<u8> {
    let mut out = format!("{magic}\n{width} {height}\n255\n").into_bytes();
    out.extend_from_slice(data);
    out
}

pub fn write_ppm(path: &Path, width: usize, height: usize, rgb: &[u8]) -> Result<()> {
    assert_eq!(rgb.len(), width * height * 3);
    fs::write(path, encode("P6", width, height, rgb)).map_err(|e| Error::io(path, e))
}

pub fn write_pgm(path: &Path, width: usize, height: usize, gray: &[u8]) -> Result<()> {
    assert_eq!(gray.len(), width * height);
    fs::write(path, encode("P5", width, height, gray)).map_err(|e| Error::io(path, e))
}

pub fn read_ppm(path: &Path) -> Result<Raster> {
    read(path, "P6", 3)
}

pub fn read_pgm(path: &Path) -> Result<Raster> {
    read(path, "P5", 1)
}

fn read(path: &Path, magic: &str, channels: usize) -> Result<Raster> {
    let bytes = match fs::read(path) {
        Ok(b) => b,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
            return Err(Error::MissingFile(path.to_path_buf()))
        }
        Err(e) => return Err(Error::io(path, e)),
    };
    decode(&bytes, magic, channels).map_err(|(offset, msg)| {
        Error::parse(path, format!("byte {offset}"), msg)
    })
}

/// Parses an in-memory image; errors carry the byte offset.
pub fn decode(bytes: &[u8], magic: &str, channels: usize) -> std::result::Result<Raster, (usize, String)> {
    if !bytes.starts_with(magic.as_bytes()) {
        return Err((0, format!("expected magic {magic}")));
    }
    let mut pos = magic.len();
    let mut fields = [0usize; 3];
    for (i, field) in fields.iter_mut().enumerate() {
        // Whitespace and comments may precede each header field.
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
        let name = ["width", "height", "maxval"][i];
        *field = std::str::from_utf8(&bytes[start..pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or((start, format!("invalid {name}")))?;
    }
    let [width, height, maxval] = fields;
    if maxval != 255 {
        return Err((pos, format!("maxval must be 255, got {maxval}")));
    }
    if !bytes.get(pos).is_some_and(u8::is_ascii_whitespace) {
        return Err((pos, "expected whitespace after maxval".into()));
    }
    pos += 1;
    let need = width * height * channels;
    if bytes.len() - pos != need {
        return Err((
            pos,
            format!("expected {need} bytes of pixel data, found {}", bytes.len() - pos),
        ));
    }
    Ok(Raster {
        width,
        height,
        channels,
        data: bytes[pos..].to_vec(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn decode_with_comments() {
        let mut b = b"P5\n# made by hand\n2 3\n255\n".to_vec();
        b.extend_from_slice(&[0, 1, 2, 3, 4, 5]);
        let r = decode(&b, "P5", 1).unwrap();
        assert_eq!((r.width, r.height), (2, 3));
        assert_eq!(r.data, vec![0, 1, 2, 3, 4, 5]);
    }

    #[test]
    fn decode_errors_report_offsets() {
        assert_eq!(decode(b"P6\n1 1\n255\n", "P5", 1).unwrap_err().0, 0);
        let err = decode(b"P5\n2 2\n255\n\x01", "P5", 1).unwrap_err();
        assert_eq!(err.0, 11);
        assert!(decode(b"P5\n2 2\n65535\n", "P5", 1).is_err());
    }

    #[test]
    fn encode_decode() {
        let data: Vec<u8> = (0..24).collect();
        let bytes = encode("P6", 4, 2, &data);
        let r = decode(&bytes, "P6", 3).unwrap();
        assert_eq!(r.data, data);
    }
}
