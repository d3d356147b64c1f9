//! Dataset file formats and atomic file writes.
//!
//! Two formats are supported:
//!
//! * **CSV** — one frame per line: 512 floats then an integer label,
//!   comma-separated, no header.
//! * **raw-f32** — header of `count: u32 LE`, `dim: u32 LE`, then per frame
//!   `dim` little-endian f32 values followed by one label byte.

use std::fs;
use std::path::Path;

use crate::data::{Dataset, Frame, FEATURE_DIM, NUM_CLASSES};
use crate::error::{Error, Result};

/// On-disk dataset encoding.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DataFormat {
    Csv,
    RawF32,
}

impl DataFormat {
    /// Picks the format from the file extension: `.csv` means CSV, anything
    /// else is treated as raw-f32.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("csv") => Self::Csv,
            _ => Self::RawF32,
        }
    }
}

/// Loads a dataset, preserving frame order.
pub fn load(path: &Path, format: DataFormat) -> Result<Dataset> {
    match format {
        DataFormat::Csv => load_csv(path),
        DataFormat::RawF32 => load_raw_f32(path),
    }
}

fn csv_error(path: &Path, line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        path: path.display().to_string(),
        line,
        msg: msg.into(),
    }
}

fn load_csv(path: &Path) -> Result<Dataset> {
    let content = fs::read_to_string(path)?;
    let mut frames = Vec::new();
    for (idx, line) in content.lines().enumerate() {
        let lineno = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != FEATURE_DIM + 1 {
            return Err(csv_error(
                path,
                lineno,
                format!(
                    "expected {} comma-separated fields ({FEATURE_DIM} features + label), got {}",
                    FEATURE_DIM + 1,
                    fields.len()
                ),
            ));
        }
        let mut features = Vec::with_capacity(FEATURE_DIM);
        for (col, field) in fields[..FEATURE_DIM].iter().enumerate() {
            let v: f32 = field.trim().parse().map_err(|e| {
                csv_error(path, lineno, format!("column {}: {e}", col + 1))
            })?;
            if !v.is_finite() {
                return Err(csv_error(
                    path,
                    lineno,
                    format!("column {}: non-finite feature {v}", col + 1),
                ));
            }
            features.push(v);
        }
        let label: u8 = fields[FEATURE_DIM].trim().parse().map_err(|e| {
            csv_error(path, lineno, format!("label field: {e}"))
        })?;
        if usize::from(label) >= NUM_CLASSES {
            return Err(csv_error(
                path,
                lineno,
                format!("label {label} out of range [0, {NUM_CLASSES})"),
            ));
        }
        frames.push(Frame { features, label });
    }
    if frames.is_empty() {
        return Err(csv_error(path, 1, "file contains no frames"));
    }
    Dataset::new(frames, path.display().to_string())
}

fn bin_error(path: &Path, offset: usize, msg: impl Into<String>) -> Error {
    Error::ParseBinary {
        path: path.display().to_string(),
        offset,
        msg: msg.into(),
    }
}

fn load_raw_f32(path: &Path) -> Result<Dataset> {
    let bytes = fs::read(path)?;
    if bytes.len() < 8 {
        return Err(bin_error(
            path,
            bytes.len(),
            format!("truncated header: need 8 bytes, have {}", bytes.len()),
        ));
    }
    let count = u32::from_le_bytes(bytes[0..4].try_into().unwrap());
    let dim = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
    if dim as usize != FEATURE_DIM {
        return Err(bin_error(
            path,
            4,
            format!("frame dim {dim} unsupported, expected {FEATURE_DIM}"),
        ));
    }
    if count == 0 {
        return Err(bin_error(path, 0, "file contains no frames"));
    }
    // Validate the total length before allocating anything sized by `count`,
    // so a corrupt header cannot request an absurd allocation.
    let frame_bytes = FEATURE_DIM as u64 * 4 + 1;
    let expected = 8 + u64::from(count) * frame_bytes;
    if (bytes.len() as u64) < expected {
        return Err(bin_error(
            path,
            bytes.len(),
            format!("truncated: expected {expected} bytes, have {}", bytes.len()),
        ));
    }
    if (bytes.len() as u64) > expected {
        return Err(bin_error(
            path,
            expected as usize,
            format!("{} trailing bytes after the last frame", bytes.len() as u64 - expected),
        ));
    }

    let mut frames = Vec::with_capacity(count as usize);
    let mut offset = 8usize;
    for _ in 0..count {
        let mut features = Vec::with_capacity(FEATURE_DIM);
        for _ in 0..FEATURE_DIM {
            let v = f32::from_le_bytes(bytes[offset..offset + 4].try_into().unwrap());
            if !v.is_finite() {
                return Err(bin_error(path, offset, format!("non-finite feature {v}")));
            }
            features.push(v);
            offset += 4;
        }
        let label = bytes[offset];
        if usize::from(label) >= NUM_CLASSES {
            return Err(bin_error(
                path,
                offset,
                format!("label {label} out of range [0, {NUM_CLASSES})"),
            ));
        }
        offset += 1;
        frames.push(Frame { features, label });
    }
    Dataset::new(frames, path.display().to_string())
}

/// Serializes a dataset in raw-f32 format and writes it atomically.
pub fn save_raw_f32(data: &Dataset, path: &Path) -> Result<()> {
    if data.feature_dim() != FEATURE_DIM {
        return Err(Error::InvalidArgument(format!(
            "raw-f32 files carry {FEATURE_DIM}-point frames, dataset has {}",
            data.feature_dim()
        )));
    }
    let mut bytes =
        Vec::with_capacity(8 + data.len() * (data.feature_dim() * 4 + 1));
    bytes.extend_from_slice(&(data.len() as u32).to_le_bytes());
    bytes.extend_from_slice(&(data.feature_dim() as u32).to_le_bytes());
    for frame in data.frames() {
        for v in &frame.features {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        bytes.push(frame.label);
    }
    atomic_write(path, &bytes)
}

/// Serializes a dataset as CSV (shortest round-trippable float formatting)
/// and writes it atomically.
pub fn save_csv(data: &Dataset, path: &Path) -> Result<()> {
    if data.feature_dim() != FEATURE_DIM {
        return Err(Error::InvalidArgument(format!(
            "CSV files carry {FEATURE_DIM}-point frames, dataset has {}",
            data.feature_dim()
        )));
    }
    let mut out = String::new();
    for frame in data.frames() {
        for v in &frame.features {
            out.push_str(&v.to_string());
            out.push(',');
        }
        out.push_str(&frame.label.to_string());
        out.push('\n');
    }
    atomic_write(path, out.as_bytes())
}

/// Writes a file atomically: the bytes go to a sibling temp file which is
/// renamed over the destination, so readers never observe a torn file and a
/// failed write leaves nothing behind at `path`.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<()> {
    let file_name = path
        .file_name()
        .ok_or_else(|| Error::InvalidArgument(format!("{} has no file name", path.display())))?;
    let mut tmp_name = file_name.to_os_string();
    tmp_name.push(".tmp");
    let tmp = path.with_file_name(tmp_name);
    let write_and_rename = (|| {
        fs::write(&tmp, bytes)?;
        fs::rename(&tmp, path)
    })();
    if write_and_rename.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    write_and_rename.map_err(Error::from)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::synth::synth_generate;
    use std::path::PathBuf;
    use tempfile::tempdir;

    fn sample_dataset(n: usize) -> Dataset {
        synth_generate(n, 1234, 0.05).unwrap()
    }

    fn write_lines(dir: &Path, name: &str, lines: &[String]) -> PathBuf {
        let path = dir.join(name);
        fs::write(&path, lines.join("\n")).unwrap();
        path
    }

    fn csv_line(features: usize, label: u8) -> String {
        let mut fields: Vec<String> = (0..features).map(|i| format!("{}.5", i % 7)).collect();
        fields.push(label.to_string());
        fields.join(",")
    }

    #[test]
    fn format_follows_extension() {
        assert_eq!(DataFormat::from_path(Path::new("a.csv")), DataFormat::Csv);
        assert_eq!(DataFormat::from_path(Path::new("a.CSV")), DataFormat::Csv);
        assert_eq!(DataFormat::from_path(Path::new("a.bin")), DataFormat::RawF32);
        assert_eq!(DataFormat::from_path(Path::new("data")), DataFormat::RawF32);
    }

    #[test]
    fn csv_roundtrip_preserves_frames() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("d.csv");
        let data = sample_dataset(20);
        save_csv(&data, &path).unwrap();
        let loaded = load(&path, DataFormat::Csv).unwrap();
        assert_eq!(loaded.len(), 20);
        for (a, b) in data.frames().iter().zip(loaded.frames()) {
            assert_eq!(a.label, b.label);
            for (x, y) in a.features.iter().zip(&b.features) {
                assert_eq!(x.to_bits(), y.to_bits());
            }
        }
    }

    #[test]
    fn csv_parses_three_lines_in_order() {
        let dir = tempdir().unwrap();
        let lines: Vec<String> = (0..3).map(|i| csv_line(FEATURE_DIM, i as u8)).collect();
        let path = write_lines(dir.path(), "d.csv", &lines);
        let data = load(&path, DataFormat::Csv).unwrap();
        assert_eq!(data.len(), 3);
        let labels: Vec<u8> = data.frames().iter().map(|f| f.label).collect();
        assert_eq!(labels, vec![0, 1, 2]);
    }

    #[test]
    fn csv_wrong_column_count_names_the_line() {
        let dir = tempdir().unwrap();
        let lines = vec![
            csv_line(FEATURE_DIM, 0),
            csv_line(FEATURE_DIM, 1),
            csv_line(FEATURE_DIM - 1, 2), // 511 floats
        ];
        let path = write_lines(dir.path(), "d.csv", &lines);
        match load(&path, DataFormat::Csv) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn csv_rejects_non_numeric_and_bad_labels() {
        let dir = tempdir().unwrap();
        let mut bad_field = csv_line(FEATURE_DIM, 0);
        bad_field = bad_field.replacen("0.5", "zero", 1);
        let path = write_lines(dir.path(), "a.csv", &[bad_field]);
        assert!(matches!(
            load(&path, DataFormat::Csv),
            Err(Error::Parse { line: 1, .. })
        ));

        let path = write_lines(dir.path(), "b.csv", &[csv_line(FEATURE_DIM, 9)]);
        assert!(matches!(
            load(&path, DataFormat::Csv),
            Err(Error::Parse { line: 1, .. })
        ));
    }

    #[test]
    fn raw_roundtrip_is_bit_identical() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("d.bin");
        let data = sample_dataset(17);
        save_raw_f32(&data, &path).unwrap();
        let loaded = load(&path, DataFormat::RawF32).unwrap();
        assert_eq!(loaded.len(), data.len());
        for (a, b) in data.frames().iter().zip(loaded.frames()) {
            assert_eq!(a.label, b.label);
            for (x, y) in a.features.iter().zip(&b.features) {
                assert_eq!(x.to_bits(), y.to_bits());
            }
        }
    }

    #[test]
    fn raw_truncation_reports_offset() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("d.bin");
        let data = sample_dataset(4);
        save_raw_f32(&data, &path).unwrap();
        let mut bytes = fs::read(&path).unwrap();
        bytes.truncate(bytes.len() - 10);
        fs::write(&path, &bytes).unwrap();
        assert!(matches!(
            load(&path, DataFormat::RawF32),
            Err(Error::ParseBinary { .. })
        ));
    }

    #[test]
    fn raw_rejects_trailing_bytes_bad_dim_and_bad_label() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("d.bin");
        let data = sample_dataset(2);
        save_raw_f32(&data, &path).unwrap();
        let good = fs::read(&path).unwrap();

        let mut trailing = good.clone();
        trailing.push(0);
        fs::write(&path, &trailing).unwrap();
        assert!(matches!(
            load(&path, DataFormat::RawF32),
            Err(Error::ParseBinary { .. })
        ));

        let mut bad_dim = good.clone();
        bad_dim[4..8].copy_from_slice(&100u32.to_le_bytes());
        fs::write(&path, &bad_dim).unwrap();
        assert!(matches!(
            load(&path, DataFormat::RawF32),
            Err(Error::ParseBinary { offset: 4, .. })
        ));

        let mut bad_label = good;
        let last = bad_label.len() - 1;
        bad_label[last] = 8;
        fs::write(&path, &bad_label).unwrap();
        assert!(matches!(
            load(&path, DataFormat::RawF32),
            Err(Error::ParseBinary { .. })
        ));
    }

    #[test]
    fn huge_count_in_header_fails_before_allocating() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("d.bin");
        let mut bytes = Vec::new();
        bytes.extend_from_slice(&u32::MAX.to_le_bytes());
        bytes.extend_from_slice(&(FEATURE_DIM as u32).to_le_bytes());
        bytes.extend_from_slice(&[0u8; 64]);
        fs::write(&path, &bytes).unwrap();
        assert!(matches!(
            load(&path, DataFormat::RawF32),
            Err(Error::ParseBinary { .. })
        ));
    }

    #[test]
    fn empty_and_missing_files_error() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("empty.bin");
        fs::write(&path, b"").unwrap();
        assert!(load(&path, DataFormat::RawF32).is_err());

        let empty_csv = dir.path().join("empty.csv");
        fs::write(&empty_csv, "").unwrap();
        assert!(load(&empty_csv, DataFormat::Csv).is_err());

        assert!(matches!(
            load(&dir.path().join("missing.bin"), DataFormat::RawF32),
            Err(Error::Io(_))
        ));
    }

    #[test]
    fn atomic_write_leaves_no_temp_file() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("out.txt");
        atomic_write(&path, b"hello").unwrap();
        assert_eq!(fs::read(&path).unwrap(), b"hello");
        let names: Vec<String> = fs::read_dir(dir.path())
            .unwrap()
            .map(|e| e.unwrap().file_name().into_string().unwrap())
            .collect();
        assert_eq!(names, vec!["out.txt".to_string()]);
    }
}
