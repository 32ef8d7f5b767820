//! Portable float map (PFM) reading and writing. Color maps use the `PF`
//! header, grayscale the `Pf` header; rows are stored bottom-up; a negative
//! scale marks little-endian payloads. Writing always emits little-endian
//! with scale -1.0, so round trips are bit-exact.

use crate::error::{Error, Result};
use crate::image::Image;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

#[derive(Debug, Clone)]
pub struct PfmImage {
    pub width: usize,
    pub height: usize,
    pub channels: usize,
    pub data: Vec<f32>,
}

impl PfmImage {
    pub fn into_image(self) -> Image {
        Image {
            width: self.width,
            height: self.height,
            channels: self.channels,
            data: self.data,
        }
    }
}

fn parse_err(path: &Path, offset: u64, message: impl Into<String>) -> Error {
    Error::PfmParse {
        path: path.to_path_buf(),
        offset,
        message: message.into(),
    }
}

/// Read one whitespace-terminated token, returning it with the stream offset
/// at which it started.
fn read_token(reader: &mut impl Read, offset: &mut u64) -> std::io::Result<(String, u64)> {
    let mut buf = [0u8; 1];
    // Skip leading whitespace.
    loop {
        reader.read_exact(&mut buf)?;
        *offset += 1;
        if !buf[0].is_ascii_whitespace() {
            break;
        }
    }
    let start = *offset - 1;
    let mut token = vec![buf[0]];
    loop {
        reader.read_exact(&mut buf)?;
        *offset += 1;
        if buf[0].is_ascii_whitespace() {
            break;
        }
        token.push(buf[0]);
    }
    Ok((String::from_utf8_lossy(&token).into_owned(), start))
}

pub fn read_pfm(path: impl AsRef<Path>) -> Result<PfmImage> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = BufReader::new(file);
    let mut offset = 0u64;

    let io_as_parse = |offset: u64| move |e: std::io::Error| {
        if e.kind() == std::io::ErrorKind::UnexpectedEof {
            parse_err(path, offset, "unexpected end of file")
        } else {
            Error::io(path, e)
        }
    };

    let (magic, magic_at) = read_token(&mut reader, &mut offset).map_err(io_as_parse(offset))?;
    let channels = match magic.as_str() {
        "PF" => 3,
        "Pf" => 1,
        other => {
            return Err(parse_err(
                path,
                magic_at,
                format!("bad magic '{other}', expected PF or Pf"),
            ))
        }
    };
    let (w_tok, w_at) = read_token(&mut reader, &mut offset).map_err(io_as_parse(offset))?;
    let width: usize = w_tok
        .parse()
        .map_err(|_| parse_err(path, w_at, format!("bad width '{w_tok}'")))?;
    let (h_tok, h_at) = read_token(&mut reader, &mut offset).map_err(io_as_parse(offset))?;
    let height: usize = h_tok
        .parse()
        .map_err(|_| parse_err(path, h_at, format!("bad height '{h_tok}'")))?;
    let (s_tok, s_at) = read_token(&mut reader, &mut offset).map_err(io_as_parse(offset))?;
    let scale: f32 = s_tok
        .parse()
        .map_err(|_| parse_err(path, s_at, format!("bad scale '{s_tok}'")))?;
    if scale == 0.0 {
        return Err(parse_err(path, s_at, "scale must be nonzero"));
    }
    let little_endian = scale < 0.0;
    if width == 0 || height == 0 || width.saturating_mul(height) > (1 << 28) {
        return Err(parse_err(
            path,
            w_at,
            format!("unreasonable dimensions {width}x{height}"),
        ));
    }

    let count = width * height * channels;
    let mut payload = vec![0u8; count * 4];
    reader
        .read_exact(&mut payload)
        .map_err(io_as_parse(offset))?;
    let payload_start = offset;

    let mut data = vec![0.0f32; count];
    for (i, chunk) in payload.chunks_exact(4).enumerate() {
        let bytes = [chunk[0], chunk[1], chunk[2], chunk[3]];
        let v = if little_endian {
            f32::from_le_bytes(bytes)
        } else {
            f32::from_be_bytes(bytes)
        };
        if !v.is_finite() {
            return Err(parse_err(
                path,
                payload_start + (i as u64) * 4,
                format!("non-finite sample {v} at element {i}"),
            ));
        }
        data[i] = v;
    }

    // Rows are stored bottom-up; flip to top-down in memory.
    let row_len = width * channels;
    let mut flipped = vec![0.0f32; count];
    for y in 0..height {
        let src = (height - 1 - y) * row_len;
        flipped[y * row_len..(y + 1) * row_len].copy_from_slice(&data[src..src + row_len]);
    }

    Ok(PfmImage {
        width,
        height,
        channels,
        data: flipped,
    })
}

pub fn write_pfm(
    path: impl AsRef<Path>,
    width: usize,
    height: usize,
    channels: usize,
    data: &[f32],
) -> Result<()> {
    let path = path.as_ref();
    if channels != 1 && channels != 3 {
        return Err(Error::contract("PFM supports 1 or 3 channels"));
    }
    if data.len() != width * height * channels {
        return Err(Error::contract(format!(
            "PFM payload length {} does not match {}x{}x{}",
            data.len(),
            width,
            height,
            channels
        )));
    }
    for (i, &v) in data.iter().enumerate() {
        if !v.is_finite() {
            return Err(Error::NonFinite {
                value: v,
                index: i,
                context: format!("PFM payload for {}", path.display()),
            });
        }
    }
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut writer = BufWriter::new(file);
    let magic = if channels == 3 { "PF" } else { "Pf" };
    write!(writer, "{magic}\n{width} {height}\n-1.0\n").map_err(|e| Error::io(path, e))?;
    let row_len = width * channels;
    for y in (0..height).rev() {
        for &v in &data[y * row_len..(y + 1) * row_len] {
            writer
                .write_all(&v.to_le_bytes())
                .map_err(|e| Error::io(path, e))?;
        }
    }
    writer.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

/// Read an HDR environment map, enforcing the lat-long invariants.
pub fn read_env(path: impl AsRef<Path>) -> Result<crate::radiometry::LatLongMap> {
    let pfm = read_pfm(&path)?;
    if pfm.channels != 3 {
        return Err(Error::contract(format!(
            "environment map {} must be 3-channel, got {}",
            path.as_ref().display(),
            pfm.channels
        )));
    }
    crate::radiometry::LatLongMap::from_data(pfm.width, pfm.height, pfm.data)
}

pub fn write_env(path: impl AsRef<Path>, env: &crate::radiometry::LatLongMap) -> Result<()> {
    write_pfm(path, env.width, env.height, 3, &env.data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.pfm");
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let data: Vec<f32> = (0..24 * 12 * 3).map(|_| rng.gen_range(-5.0..5.0)).collect();
        write_pfm(&path, 24, 12, 3, &data).unwrap();
        let back = read_pfm(&path).unwrap();
        assert_eq!(back.width, 24);
        assert_eq!(back.height, 12);
        assert_eq!(back.channels, 3);
        assert!(back
            .data
            .iter()
            .zip(data.iter())
            .all(|(a, b)| a.to_bits() == b.to_bits()));
    }

    #[test]
    fn grayscale_header_is_single_channel() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.pfm");
        let data: Vec<f32> = (0..16).map(|i| i as f32 / 4.0).collect();
        write_pfm(&path, 4, 4, 1, &data).unwrap();
        let raw = std::fs::read(&path).unwrap();
        assert!(raw.starts_with(b"Pf\n4 4\n-1.0\n"));
        let back = read_pfm(&path).unwrap();
        assert_eq!(back.channels, 1);
        assert_eq!(back.data, data);
    }

    #[test]
    fn accepts_big_endian_scale() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("be.pfm");
        let mut bytes = b"PF\n2 1\n1.0\n".to_vec();
        for v in [0.5f32, 1.0, 1.5, 0.25, 0.75, 2.0] {
            bytes.extend_from_slice(&v.to_be_bytes());
        }
        std::fs::write(&path, bytes).unwrap();
        let img = read_pfm(&path).unwrap();
        assert_eq!(img.data, vec![0.5, 1.0, 1.5, 0.25, 0.75, 2.0]);
    }

    #[test]
    fn rows_are_stored_bottom_up() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("rows.pfm");
        // 1x2 grayscale: top row 1.0, bottom row 2.0.
        write_pfm(&path, 1, 2, 1, &[1.0, 2.0]).unwrap();
        let raw = std::fs::read(&path).unwrap();
        let payload = &raw[raw.len() - 8..];
        // File stores the bottom row first.
        assert_eq!(f32::from_le_bytes(payload[0..4].try_into().unwrap()), 2.0);
        assert_eq!(f32::from_le_bytes(payload[4..8].try_into().unwrap()), 1.0);
    }

    #[test]
    fn truncated_payload_reports_offset() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("short.pfm");
        let mut bytes = b"PF\n4 4\n-1.0\n".to_vec();
        bytes.extend_from_slice(&[0u8; 10]); // far too short
        std::fs::write(&path, bytes).unwrap();
        match read_pfm(&path) {
            Err(Error::PfmParse { message, .. }) => {
                assert!(message.contains("end of file"), "{message}");
            }
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn bad_magic_reports_offset_zero() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.pfm");
        std::fs::write(&path, b"P6\n1 1\n-1.0\n\0\0\0\0").unwrap();
        match read_pfm(&path) {
            Err(Error::PfmParse { offset, .. }) => assert_eq!(offset, 0),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn nan_payload_is_rejected_with_diagnostic() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("nan.pfm");
        let mut bytes = b"Pf\n2 1\n-1.0\n".to_vec();
        bytes.extend_from_slice(&1.0f32.to_le_bytes());
        bytes.extend_from_slice(&f32::NAN.to_le_bytes());
        std::fs::write(&path, bytes).unwrap();
        match read_pfm(&path) {
            Err(Error::PfmParse {
                offset, message, ..
            }) => {
                assert!(message.contains("non-finite"), "{message}");
                assert!(offset > 0);
            }
            other => panic!("expected parse error, got {other:?}"),
        }
        // Writing NaN is refused as well.
        assert!(write_pfm(dir.path().join("w.pfm"), 1, 1, 1, &[f32::NAN]).is_err());
    }

    #[test]
    fn env_reader_enforces_latlong_invariants() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("env.pfm");
        // 4x4 is not 2:1.
        write_pfm(&path, 4, 4, 3, &vec![0.5; 48]).unwrap();
        assert!(read_env(&path).is_err());
        let path2 = dir.path().join("env2.pfm");
        write_pfm(&path2, 4, 2, 3, &vec![0.5; 24]).unwrap();
        assert!(read_env(&path2).is_ok());
    }
}
