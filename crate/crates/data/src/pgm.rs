//! Shot clips stored as concatenated binary PGM (P5) images, one per frame.

use std::path::Path;

use crate::error::{write, DataError};

/// 8-bit grayscale frames of one shot.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Clip {
    pub width: usize,
    pub height: usize,
    pub frames: Vec<Vec<u8>>,
}

impl Clip {
    pub fn new(width: usize, height: usize, frames: Vec<Vec<u8>>) -> Result<Self, DataError> {
        if width == 0 || height == 0 {
            return Err(DataError::Config("clip dimensions must be positive".into()));
        }
        if let Some(i) = frames.iter().position(|f| f.len() != width * height) {
            return Err(DataError::Contract(format!(
                "frame {i} has {} pixels, expected {}x{}",
                frames[i].len(),
                width,
                height
            )));
        }
        Ok(Clip { width, height, frames })
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    /// Mean pixel value of each frame.
    pub fn frame_means(&self) -> Vec<f64> {
        self.frames
            .iter()
            .map(|f| f.iter().map(|&p| p as u64).sum::<u64>() as f64 / f.len() as f64)
            .collect()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.frames.len() * (self.width * self.height + 16));
        for f in &self.frames {
            out.extend_from_slice(format!("P5\n{} {}\n255\n", self.width, self.height).as_bytes());
            out.extend_from_slice(f);
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, DataError> {
        let mut pos = 0;
        let mut frames = Vec::new();
        let mut dims = None;
        loop {
            skip_space(bytes, &mut pos);
            if pos >= bytes.len() {
                break;
            }
            let image = frames.len();
            let bad = |m: String| DataError::Contract(format!("PGM image {image}: {m}"));
            if bytes.get(pos..pos + 2) != Some(b"P5") {
                return Err(bad("missing P5 magic".into()));
            }
            pos += 2;
            let w = read_number(bytes, &mut pos).map_err(&bad)?;
            let h = read_number(bytes, &mut pos).map_err(&bad)?;
            let maxval = read_number(bytes, &mut pos).map_err(&bad)?;
            if maxval != 255 {
                return Err(bad(format!("maxval {maxval} unsupported, only 8-bit")));
            }
            // Exactly one whitespace byte separates the header from the raster.
            pos += 1;
            if *dims.get_or_insert((w, h)) != (w, h) {
                return Err(bad(format!("size {w}x{h} differs from the first image")));
            }
            let end = pos + w * h;
            let raster = bytes
                .get(pos..end)
                .ok_or_else(|| bad(format!("truncated raster, {} of {} bytes", bytes.len().saturating_sub(pos), w * h)))?;
            frames.push(raster.to_vec());
            pos = end;
        }
        let (w, h) = dims.ok_or_else(|| DataError::Contract("PGM file holds no images".into()))?;
        Clip::new(w, h, frames)
    }

    pub fn write(&self, path: &Path) -> Result<(), DataError> {
        write(path, self.to_bytes())
    }

    pub fn read(path: &Path) -> Result<Self, DataError> {
        let bytes = std::fs::read(path).map_err(|e| DataError::io(path, e))?;
        Self::from_bytes(&bytes).map_err(|e| match e {
            DataError::Contract(m) => DataError::Contract(format!("{}: {m}", path.display())),
            other => other,
        })
    }
}

fn skip_space(bytes: &[u8], pos: &mut usize) {
    while *pos < bytes.len() {
        match bytes[*pos] {
            b'#' => {
                while *pos < bytes.len() && bytes[*pos] != b'\n' {
                    *pos += 1;
                }
            }
            c if c.is_ascii_whitespace() => *pos += 1,
            _ => return,
        }
    }
}

fn read_number(bytes: &[u8], pos: &mut usize) -> Result<usize, String> {
    skip_space(bytes, pos);
    let start = *pos;
    while *pos < bytes.len() && bytes[*pos].is_ascii_digit() {
        *pos += 1;
    }
    std::str::from_utf8(&bytes[start..*pos])
        .ok()
        .and_then(|s| s.parse().ok())
        .filter(|&n| n > 0)
        .ok_or_else(|| "malformed header number".to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let clip = Clip::new(3, 2, vec![vec![0, 1, 2, 3, 4, 255], vec![9; 6], vec![b'\n'; 6]]).unwrap();
        let bytes = clip.to_bytes();
        assert_eq!(Clip::from_bytes(&bytes).unwrap(), clip);
        assert_eq!(clip.frame_means()[1], 9.0);
    }

    #[test]
    fn header_comments_and_errors() {
        let mut bytes = b"P5 # a comment\n2 1\n255\n".to_vec();
        bytes.extend([7, 8]);
        assert_eq!(Clip::from_bytes(&bytes).unwrap().frames, [vec![7, 8]]);
        assert!(Clip::from_bytes(b"P5\n2 2\n255\n\x01").is_err());
        assert!(Clip::from_bytes(b"P2\n1 1\n255\n1").is_err());
        assert!(Clip::from_bytes(b"P5\n1 1\n65535\n\x00\x00").is_err());
        assert!(Clip::from_bytes(b"").is_err());
    }
}
