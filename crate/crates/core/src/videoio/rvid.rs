//! Clip storage.
//!
//! The RVID container is a fixed little-endian header followed by raw
//! interleaved RGB frames:
//!
//! ```text
//! "RVID" | version u8 = 1 | width u32 | height u32 | fps_num u32 | fps_den u32 | frame_count u32
//! frame_count × (width · height · 3) bytes, row-major
//! ```
//!
//! A clip may also be stored as a directory of binary PPM (`P6`, maxval 255)
//! frames, taken in lexicographic file-name order, next to a `clip.meta` file
//! holding a line `fps=<num>/<den>`.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use super::frame::{Fps, FrameSequence, RgbImage};
use crate::error::{Error, Result};

pub const RVID_MAGIC: &[u8; 4] = b"RVID";
pub const RVID_VERSION: u8 = 1;
pub const RVID_HEADER_LEN: usize = 4 + 1 + 5 * 4;
pub const CLIP_META_FILE: &str = "clip.meta";

pub fn read_clip(path: impl AsRef<Path>) -> Result<FrameSequence> {
    let path = path.as_ref();
    if path.is_dir() {
        return read_ppm_dir(path);
    }
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_rvid(&bytes)
}

pub fn write_clip(seq: &FrameSequence, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    w.write_all(&encode_header(seq)?)
        .and_then(|_| {
            seq.frames()
                .iter()
                .try_for_each(|f| w.write_all(f.as_raw()))
        })
        .and_then(|_| w.flush())
        .map_err(|e| Error::io(path, e))
}

fn encode_header(seq: &FrameSequence) -> Result<Vec<u8>> {
    let as_u32 = |v: usize, what: &str| {
        u32::try_from(v).map_err(|_| Error::Invariant(format!("{what} {v} exceeds u32")))
    };
    let mut header = Vec::with_capacity(RVID_HEADER_LEN);
    header.extend_from_slice(RVID_MAGIC);
    header.push(RVID_VERSION);
    header.extend_from_slice(&as_u32(seq.width(), "width")?.to_le_bytes());
    header.extend_from_slice(&as_u32(seq.height(), "height")?.to_le_bytes());
    header.extend_from_slice(&seq.fps().num.to_le_bytes());
    header.extend_from_slice(&seq.fps().den.to_le_bytes());
    header.extend_from_slice(&as_u32(seq.len(), "frame count")?.to_le_bytes());
    Ok(header)
}

/// Full in-memory encoding of a clip.
pub fn encode_rvid(seq: &FrameSequence) -> Result<Vec<u8>> {
    let mut out = encode_header(seq)?;
    for f in seq.frames() {
        out.extend_from_slice(f.as_raw());
    }
    Ok(out)
}

pub fn decode_rvid(bytes: &[u8]) -> Result<FrameSequence> {
    if bytes.len() < RVID_HEADER_LEN {
        return Err(Error::Format(format!(
            "RVID header needs {RVID_HEADER_LEN} bytes, found {}",
            bytes.len()
        )));
    }
    if &bytes[..4] != RVID_MAGIC {
        return Err(Error::Format("missing RVID magic".into()));
    }
    if bytes[4] != RVID_VERSION {
        return Err(Error::Format(format!(
            "unsupported RVID version {}",
            bytes[4]
        )));
    }
    let field = |i: usize| {
        let at = 5 + 4 * i;
        u32::from_le_bytes([bytes[at], bytes[at + 1], bytes[at + 2], bytes[at + 3]])
    };
    let (width, height) = (field(0) as usize, field(1) as usize);
    let (fps_num, fps_den, count) = (field(2), field(3), field(4) as usize);
    if width == 0 || height == 0 {
        return Err(Error::Format(format!(
            "invalid frame size {width}x{height}"
        )));
    }
    if count == 0 {
        return Err(Error::Format("RVID declares zero frames".into()));
    }
    let fps = Fps::new(fps_num, fps_den).map_err(|e| Error::Format(e.to_string()))?;
    let frame_len = width
        .checked_mul(height)
        .and_then(|n| n.checked_mul(3))
        .ok_or_else(|| Error::Format("frame size overflows".into()))?;
    let payload = &bytes[RVID_HEADER_LEN..];
    let expected = frame_len
        .checked_mul(count)
        .ok_or_else(|| Error::Format("payload size overflows".into()))?;
    if payload.len() != expected {
        return Err(Error::Format(format!(
            "RVID payload holds {} bytes, header implies {expected}",
            payload.len()
        )));
    }
    let frames = payload
        .chunks_exact(frame_len)
        .map(|chunk| RgbImage::from_raw(width, height, chunk.to_vec()))
        .collect::<Result<Vec<_>>>()?;
    FrameSequence::new(fps, frames)
}

fn read_ppm_dir(dir: &Path) -> Result<FrameSequence> {
    let meta_path = dir.join(CLIP_META_FILE);
    let meta = fs::read_to_string(&meta_path).map_err(|e| Error::io(&meta_path, e))?;
    let fps = parse_meta_fps(&meta)?;

    let mut names = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| {
            p.extension()
                .is_some_and(|ext| ext.eq_ignore_ascii_case("ppm"))
        })
        .collect::<Vec<_>>();
    names.sort();
    if names.is_empty() {
        return Err(Error::Format(format!("no PPM frames in {}", dir.display())));
    }
    let frames = names
        .iter()
        .map(|p| {
            let bytes = fs::read(p).map_err(|e| Error::io(p, e))?;
            decode_ppm(&bytes)
        })
        .collect::<Result<Vec<_>>>()?;
    FrameSequence::new(fps, frames)
}

fn parse_meta_fps(meta: &str) -> Result<Fps> {
    let value = meta
        .lines()
        .filter_map(|l| l.split_once('='))
        .find(|(k, _)| k.trim() == "fps")
        .map(|(_, v)| v.trim())
        .ok_or_else(|| Error::Format("clip.meta lacks an fps entry".into()))?;
    let (num, den) = value.split_once('/').unwrap_or((value, "1"));
    let parse = |s: &str| {
        s.trim()
            .parse::<u32>()
            .map_err(|_| Error::Format(format!("bad fps value {value:?}")))
    };
    Fps::new(parse(num)?, parse(den)?).map_err(|e| Error::Format(e.to_string()))
}

/// Writes a clip as a PPM frame directory (`frame_00000.ppm`, ...).
pub fn write_ppm_dir(seq: &FrameSequence, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let meta_path = dir.join(CLIP_META_FILE);
    fs::write(
        &meta_path,
        format!("fps={}/{}\n", seq.fps().num, seq.fps().den),
    )
    .map_err(|e| Error::io(&meta_path, e))?;
    for (i, frame) in seq.frames().iter().enumerate() {
        let p = dir.join(format!("frame_{i:05}.ppm"));
        fs::write(&p, encode_ppm(frame)).map_err(|e| Error::io(&p, e))?;
    }
    Ok(())
}

pub fn encode_ppm(img: &RgbImage) -> Vec<u8> {
    let mut out = format!("P6\n{} {}\n255\n", img.width(), img.height()).into_bytes();
    out.extend_from_slice(img.as_raw());
    out
}

pub fn decode_ppm(bytes: &[u8]) -> Result<RgbImage> {
    let mut pos = 0usize;
    let mut tokens = Vec::with_capacity(4);
    while tokens.len() < 4 {
        // whitespace and comments
        while pos < bytes.len() {
            if bytes[pos].is_ascii_whitespace() {
                pos += 1;
            } else if bytes[pos] == b'#' {
                while pos < bytes.len() && bytes[pos] != b'\n' {
                    pos += 1;
                }
            } else {
                break;
            }
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(Error::Format("truncated PPM header".into()));
        }
        tokens.push(String::from_utf8_lossy(&bytes[start..pos]).into_owned());
    }
    if tokens[0] != "P6" {
        return Err(Error::Format(format!(
            "unsupported PPM magic {:?}",
            tokens[0]
        )));
    }
    let num = |s: &str| {
        s.parse::<usize>()
            .map_err(|_| Error::Format(format!("bad PPM header field {s:?}")))
    };
    let (width, height, maxval) = (num(&tokens[1])?, num(&tokens[2])?, num(&tokens[3])?);
    if maxval != 255 {
        return Err(Error::Format(format!("PPM maxval {maxval} unsupported")));
    }
    // exactly one whitespace byte separates header and raster
    pos += 1;
    let need = width * height * 3;
    if bytes.len() < pos + need {
        return Err(Error::Format("truncated PPM raster".into()));
    }
    RgbImage::from_raw(width, height, bytes[pos..pos + need].to_vec())
}
