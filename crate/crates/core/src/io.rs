//! File formats.
//!
//! The native `.sgrid` layout, all little-endian:
//!
//! | offset | size | field                  |
//! |--------|------|------------------------|
//! | 0      | 4    | magic `b"SGRD"`        |
//! | 4      | 2    | version (`u16`, 1)     |
//! | 6      | 2    | reserved, zero        |
//! | 8      | 4    | rows `M` (`u32`)       |
//! | 12     | 4    | cols `N` (`u32`)       |
//! | 16     | 8    | spacing_x (`f64`)      |
//! | 24     | 8    | spacing_y (`f64`)      |
//! | 32     | 4·MN | heights, row-major `f32` |
//!
//! 8- and 16-bit grayscale PNG/TIFF images are read as heights `0..=255` or
//! `0..=65535` with unit spacing. Profiles are CSV with a
//! `position,height` header.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use image::DynamicImage;

use crate::error::{Error, Result};
use crate::grid::{Profile, SurfaceGrid};

pub const MAGIC: [u8; 4] = *b"SGRD";
pub const VERSION: u16 = 1;
pub const HEADER_LEN: usize = 32;

fn format_err(path: &Path, offset: u64, message: impl Into<String>) -> Error {
    Error::Format {
        path: path.to_path_buf(),
        offset,
        message: message.into(),
    }
}

fn extension(path: &Path) -> String {
    path.extension()
        .and_then(|e| e.to_str())
        .unwrap_or("")
        .to_ascii_lowercase()
}

/// Reads a `.sgrid` file or a grayscale image, chosen by extension.
pub fn read_grid(path: impl AsRef<Path>) -> Result<SurfaceGrid> {
    let path = path.as_ref();
    match extension(path).as_str() {
        "sgrid" => {
            let mut bytes = Vec::new();
            File::open(path)?.read_to_end(&mut bytes)?;
            decode_sgrid(path, &bytes)
        }
        "png" | "tif" | "tiff" => read_gray_image(path),
        _ => Err(Error::UnknownExtension(path.to_path_buf())),
    }
}

pub fn write_grid(grid: &SurfaceGrid, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    if extension(path) != "sgrid" {
        return Err(Error::UnknownExtension(path.to_path_buf()));
    }
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(&encode_sgrid(grid))?;
    w.flush()?;
    Ok(())
}

pub fn encode_sgrid(grid: &SurfaceGrid) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + 4 * grid.heights().len());
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&0u16.to_le_bytes());
    out.extend_from_slice(&(grid.rows() as u32).to_le_bytes());
    out.extend_from_slice(&(grid.cols() as u32).to_le_bytes());
    out.extend_from_slice(&grid.spacing_x().to_le_bytes());
    out.extend_from_slice(&grid.spacing_y().to_le_bytes());
    for &h in grid.heights() {
        out.extend_from_slice(&(h as f32).to_le_bytes());
    }
    out
}

pub fn decode_sgrid(path: &Path, bytes: &[u8]) -> Result<SurfaceGrid> {
    if bytes.len() < HEADER_LEN {
        return Err(format_err(
            path,
            bytes.len() as u64,
            format!(
                "truncated header: missing {} bytes",
                HEADER_LEN - bytes.len()
            ),
        ));
    }
    if bytes[0..4] != MAGIC {
        return Err(format_err(path, 0, "bad magic, not an sgrid file"));
    }
    let u16_at = |o: usize| u16::from_le_bytes([bytes[o], bytes[o + 1]]);
    let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
    let f64_at = |o: usize| f64::from_le_bytes(bytes[o..o + 8].try_into().unwrap());
    let version = u16_at(4);
    if version != VERSION {
        return Err(format_err(path, 4, format!("unsupported version {version}")));
    }
    let rows = u32_at(8) as usize;
    let cols = u32_at(12) as usize;
    let (sx, sy) = (f64_at(16), f64_at(24));
    let expected = HEADER_LEN + 4 * rows * cols;
    if bytes.len() < expected {
        return Err(format_err(
            path,
            bytes.len() as u64,
            format!(
                "truncated data: {rows}x{cols} grid needs {expected} bytes, missing {}",
                expected - bytes.len()
            ),
        ));
    }
    if bytes.len() > expected {
        return Err(format_err(
            path,
            expected as u64,
            format!(
                "dimension mismatch: {} trailing bytes after {rows}x{cols} grid",
                bytes.len() - expected
            ),
        ));
    }
    let heights = bytes[HEADER_LEN..]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
        .collect();
    SurfaceGrid::with_spacing(rows, cols, heights, sx, sy)
        .map_err(|e| format_err(path, 8, e.to_string()))
}

fn read_gray_image(path: &Path) -> Result<SurfaceGrid> {
    let img = image::ImageReader::open(path)?
        .with_guessed_format()?
        .decode()?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    let heights: Vec<f64> = match img {
        DynamicImage::ImageLuma8(buf) => buf.into_raw().into_iter().map(f64::from).collect(),
        DynamicImage::ImageLuma16(buf) => buf.into_raw().into_iter().map(f64::from).collect(),
        other => {
            return Err(format_err(
                path,
                0,
                format!("expected 8/16-bit grayscale, found {:?}", other.color()),
            ))
        }
    };
    SurfaceGrid::new(h, w, heights).map_err(|e| format_err(path, 0, e.to_string()))
}

/// Writes `position,height` rows with `position = i · spacing`.
pub fn write_profile_csv(profile: &Profile, path: impl AsRef<Path>) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["position", "height"])?;
    for (i, v) in profile.values().iter().enumerate() {
        w.write_record([(i as f64 * profile.spacing()).to_string(), v.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a two-column profile CSV. Spacing is taken from the first two
/// positions.
pub fn read_profile_csv(path: impl AsRef<Path>) -> Result<Profile> {
    let path = path.as_ref();
    let mut r = csv::Reader::from_reader(BufReader::new(File::open(path)?));
    let mut pos = Vec::new();
    let mut vals = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec?;
        let lineno = line as u64 + 2;
        if rec.len() != 2 {
            return Err(format_err(
                path,
                lineno,
                format!("expected 2 columns, found {}", rec.len()),
            ));
        }
        let parse = |s: &str| {
            s.trim()
                .parse::<f64>()
                .map_err(|e| format_err(path, lineno, format!("{s:?}: {e}")))
        };
        pos.push(parse(&rec[0])?);
        vals.push(parse(&rec[1])?);
    }
    if pos.len() < 2 {
        return Err(format_err(path, 1, "profile needs at least 2 rows"));
    }
    let spacing = pos[1] - pos[0];
    Profile::new(vals, spacing).map_err(|e| format_err(path, 2, e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_grid(rows: usize, cols: usize, seed: u64) -> SurfaceGrid {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let h = (0..rows * cols)
            .map(|_| rng.random_range(-10.0f32..10.0) as f64)
            .collect();
        SurfaceGrid::with_spacing(rows, cols, h, 0.25, 0.5).unwrap()
    }

    #[test]
    fn sgrid_round_trip_is_bitwise() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("g.sgrid");
        let g = random_grid(64, 64, 3);
        write_grid(&g, &path).unwrap();
        let back = read_grid(&path).unwrap();
        assert_eq!(back.shape(), g.shape());
        assert_eq!(back.spacing_x(), 0.25);
        assert_eq!(back.spacing_y(), 0.5);
        for (a, b) in g.heights().iter().zip(back.heights()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn truncated_file_reports_missing_bytes() {
        let g = random_grid(4, 4, 1);
        let mut bytes = encode_sgrid(&g);
        bytes.truncate(bytes.len() - 10);
        let err = decode_sgrid(Path::new("t.sgrid"), &bytes).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("missing 10"), "{msg}");

        let err = decode_sgrid(Path::new("t.sgrid"), &bytes[..20]).unwrap_err();
        assert!(err.to_string().contains("missing 12"), "{err}");
    }

    #[test]
    fn bad_magic_and_extension() {
        let mut bytes = encode_sgrid(&random_grid(2, 2, 0));
        bytes[0] = b'X';
        assert!(matches!(
            decode_sgrid(Path::new("a.sgrid"), &bytes),
            Err(Error::Format { offset: 0, .. })
        ));
        assert!(matches!(
            read_grid("whatever.xyz"),
            Err(Error::UnknownExtension(_))
        ));
    }

    #[test]
    fn trailing_bytes_are_rejected() {
        let mut bytes = encode_sgrid(&random_grid(2, 3, 0));
        bytes.extend_from_slice(&[0, 0, 0, 0]);
        assert!(decode_sgrid(Path::new("a.sgrid"), &bytes).is_err());
    }

    #[test]
    fn white_png_is_constant_255() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("w.png");
        image::GrayImage::from_pixel(5, 3, image::Luma([255u8]))
            .save(&path)
            .unwrap();
        let g = read_grid(&path).unwrap();
        assert_eq!(g.shape(), (3, 5));
        assert!(g.heights().iter().all(|&h| h == 255.0));
    }

    #[test]
    fn sixteen_bit_png_keeps_range() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("w16.png");
        let mut img = image::ImageBuffer::<image::Luma<u16>, Vec<u16>>::new(2, 2);
        img.put_pixel(1, 1, image::Luma([65535]));
        img.save(&path).unwrap();
        let g = read_grid(&path).unwrap();
        assert_eq!(g.get(1, 1), 65535.0);
        assert_eq!(g.get(0, 0), 0.0);
    }

    #[test]
    fn profile_csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.csv");
        let p = Profile::new(vec![0.5, -1.25, 3.0, 1e-9], 0.5).unwrap();
        write_profile_csv(&p, &path).unwrap();
        let back = read_profile_csv(&path).unwrap();
        assert_eq!(back.values(), p.values());
        assert_eq!(back.spacing(), 0.5);
    }
}
