//! Writing observation frames to image files.

use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use raymaze_core::render::to_interleaved;
use raymaze_core::{OBS_CHANNELS, OBS_HEIGHT, OBS_WIDTH};

use crate::error::CliResult;

/// Writes interleaved RGB bytes as an 8-bit PNG.
pub fn write_png_rgb(rgb: &[u8], width: usize, height: usize, path: &Path) -> CliResult<()> {
    let file = BufWriter::new(File::create(path)?);
    let mut enc = png::Encoder::new(file, width as u32, height as u32);
    enc.set_color(png::ColorType::Rgb);
    enc.set_depth(png::BitDepth::Eight);
    let mut w = enc.write_header().map_err(|e| crate::error::CliError::Runtime(e.to_string()))?;
    w.write_image_data(rgb).map_err(|e| crate::error::CliError::Runtime(e.to_string()))?;
    Ok(())
}

/// Writes a channel-first observation as PNG.
pub fn write_frame_png(frame: &[u8], path: &Path) -> CliResult<()> {
    write_png_rgb(&to_interleaved(frame), OBS_WIDTH, OBS_HEIGHT, path)
}

/// Box-filtered `factor`x downsample of a channel-first observation, returned
/// as interleaved RGB of size `(OBS_WIDTH / factor) x (OBS_HEIGHT / factor)`.
pub fn thumbnail(frame: &[u8], factor: usize) -> Vec<u8> {
    let (w, h) = (OBS_WIDTH / factor, OBS_HEIGHT / factor);
    let plane = OBS_WIDTH * OBS_HEIGHT;
    let mut out = vec![0u8; w * h * OBS_CHANNELS];
    for y in 0..h {
        for x in 0..w {
            for c in 0..OBS_CHANNELS {
                let mut acc = 0u32;
                for dy in 0..factor {
                    for dx in 0..factor {
                        acc += frame[c * plane + (y * factor + dy) * OBS_WIDTH + x * factor + dx] as u32;
                    }
                }
                out[(y * w + x) * OBS_CHANNELS + c] = (acc / (factor * factor) as u32) as u8;
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn thumbnail_averages_blocks() {
        let mut frame = vec![0u8; raymaze_core::FRAME_LEN];
        // Red channel: top-left 2x2 block = 10, 20, 30, 40.
        frame[0] = 10;
        frame[1] = 20;
        frame[OBS_WIDTH] = 30;
        frame[OBS_WIDTH + 1] = 40;
        let t = thumbnail(&frame, 2);
        assert_eq!(t.len(), 56 * 32 * 3);
        assert_eq!(&t[..3], &[25, 0, 0]);
    }

    #[test]
    fn png_roundtrip_header() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("f.png");
        write_frame_png(&vec![128u8; raymaze_core::FRAME_LEN], &p).unwrap();
        let bytes = std::fs::read(&p).unwrap();
        assert_eq!(&bytes[1..4], b"PNG");
    }
}
