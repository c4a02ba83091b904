//! Minimal NIfTI-1 single-file reader and writer.
//!
//! Supported subset: little-endian `.nii` / `.nii.gz`, uint8 label volumes
//! (3D) and float32 probability volumes (3D, or 4D with channels along the
//! fourth axis). Orientation matrices are written for viewers but ignored on
//! read; only `pixdim[1..=3]` is used for spacing.
//!
//! Layout conventions carried through the header:
//! - `descrip` holds the case id (at most 79 bytes).
//! - label volumes set `intent_code = NIFTI_INTENT_LABEL` and store the class
//!   count in `intent_p1`, so a round trip restores it exactly.
//!
//! Probability values are stored as float32; values that are not exactly
//! representable in f32 are rounded on write.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use flate2::read::MultiGzDecoder;
use flate2::write::GzEncoder;
use flate2::Compression;

use crate::error::{Error, Result};
use crate::volume::{Dims, LabelVolume, ProbVolume, VolumeMeta, BRATS_CLASSES};

pub const HEADER_SIZE: usize = 348;
/// Header plus the 4-byte extension flag.
pub const DATA_OFFSET: usize = 352;

const MAGIC_SINGLE_FILE: &[u8; 4] = b"n+1\0";
const DT_UINT8: i16 = 2;
const DT_FLOAT32: i16 = 16;
const INTENT_LABEL: i16 = 1002;
const UNITS_MM: u8 = 2;
const DESCRIP_LEN: usize = 80;

/// A volume as stored on disk.
#[derive(Clone, Debug, PartialEq)]
pub enum Volume {
    Labels(LabelVolume),
    Probs(ProbVolume),
}

impl Volume {
    pub fn meta(&self) -> &VolumeMeta {
        match self {
            Volume::Labels(l) => l.meta(),
            Volume::Probs(p) => p.meta(),
        }
    }

    pub fn into_labels(self) -> Result<LabelVolume> {
        match self {
            Volume::Labels(l) => Ok(l),
            Volume::Probs(_) => Err(Error::Unsupported(
                "expected a uint8 label volume, found float32 probabilities".into(),
            )),
        }
    }

    pub fn into_probs(self) -> Result<ProbVolume> {
        match self {
            Volume::Probs(p) => Ok(p),
            Volume::Labels(_) => Err(Error::Unsupported(
                "expected a float32 probability volume, found uint8 labels".into(),
            )),
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub enum VolumeRef<'a> {
    Labels(&'a LabelVolume),
    Probs(&'a ProbVolume),
}

impl<'a> From<&'a LabelVolume> for VolumeRef<'a> {
    fn from(v: &'a LabelVolume) -> Self {
        VolumeRef::Labels(v)
    }
}

impl<'a> From<&'a ProbVolume> for VolumeRef<'a> {
    fn from(v: &'a ProbVolume) -> Self {
        VolumeRef::Probs(v)
    }
}

impl<'a> From<&'a Volume> for VolumeRef<'a> {
    fn from(v: &'a Volume) -> Self {
        match v {
            Volume::Labels(l) => VolumeRef::Labels(l),
            Volume::Probs(p) => VolumeRef::Probs(p),
        }
    }
}

/// Reads a `.nii` or gzip-compressed `.nii.gz` file (detected by content).
///
/// When the header carries no description, the case id falls back to the
/// file name with its NIfTI extension stripped.
pub fn read_nifti(path: impl AsRef<Path>) -> Result<Volume> {
    let path = path.as_ref();
    let raw = fs::read(path).map_err(|e| Error::io(path, e))?;
    let bytes = if raw.starts_with(&[0x1f, 0x8b]) {
        let mut out = Vec::with_capacity(raw.len() * 4);
        MultiGzDecoder::new(raw.as_slice())
            .read_to_end(&mut out)
            .map_err(|e| Error::Format(format!("gzip stream: {e}")))?;
        out
    } else {
        raw
    };
    decode(&bytes, &case_stem(path))
}

/// Writes a volume, gzip-compressing when the path ends in `.gz`.
///
/// The file is written to a temporary sibling and renamed into place.
pub fn write_nifti<'a>(volume: impl Into<VolumeRef<'a>>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let encoded = encode(volume.into())?;
    let gz = path
        .extension()
        .map(|e| e.eq_ignore_ascii_case("gz"))
        .unwrap_or(false);
    let payload = if gz {
        let mut enc = GzEncoder::new(Vec::new(), Compression::fast());
        enc.write_all(&encoded).map_err(|e| Error::io(path, e))?;
        enc.finish().map_err(|e| Error::io(path, e))?
    } else {
        encoded
    };
    atomic_write(path, &payload)
}

/// Writes `bytes` to a temporary file next to `path`, then renames it into place.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(path, e))?;
    tmp.write_all(bytes).map_err(|e| Error::io(path, e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

/// File name without `.nii` / `.nii.gz`.
pub fn case_stem(path: &Path) -> String {
    let name = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    for ext in [".nii.gz", ".nii"] {
        if let Some(stem) = name.strip_suffix(ext) {
            return stem.to_string();
        }
    }
    name
}

/// True for file names ending in `.nii` or `.nii.gz`.
pub fn is_nifti_path(path: &Path) -> bool {
    let name = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    name.ends_with(".nii") || name.ends_with(".nii.gz")
}

/// Serializes a volume to uncompressed single-file NIfTI-1 bytes.
pub fn encode(volume: VolumeRef<'_>) -> Result<Vec<u8>> {
    let meta = match volume {
        VolumeRef::Labels(l) => l.meta(),
        VolumeRef::Probs(p) => p.meta(),
    };
    if meta.case_id.len() >= DESCRIP_LEN {
        return Err(Error::Data(format!(
            "case id `{}` exceeds {} bytes",
            meta.case_id,
            DESCRIP_LEN - 1
        )));
    }
    if let VolumeRef::Probs(p) = volume {
        if let Some(i) = p.probs().iter().position(|v| !v.is_finite()) {
            return Err(Error::Data(format!(
                "non-finite probability at flat index {i}; refusing to write"
            )));
        }
    }

    let d = meta.dims;
    let mut h = vec![0u8; DATA_OFFSET];
    put_i32(&mut h, 0, HEADER_SIZE as i32);
    h[38] = b'r';

    let (datatype, bitpix, channels) = match volume {
        VolumeRef::Labels(_) => (DT_UINT8, 8i16, 1usize),
        VolumeRef::Probs(p) => (DT_FLOAT32, 32i16, p.channels()),
    };
    let ndim: i16 = if channels > 1 { 4 } else { 3 };
    let mut dim = [1i16; 8];
    dim[0] = ndim;
    for (k, n) in d.as_array().iter().enumerate() {
        dim[k + 1] = i16::try_from(*n)
            .map_err(|_| Error::Unsupported(format!("dimension {n} exceeds NIfTI-1 limits")))?;
    }
    dim[4] = i16::try_from(channels)
        .map_err(|_| Error::Unsupported(format!("{channels} channels exceed NIfTI-1 limits")))?;
    for (k, v) in dim.iter().enumerate() {
        put_i16(&mut h, 40 + 2 * k, *v);
    }

    if let VolumeRef::Labels(l) = volume {
        put_f32(&mut h, 56, l.num_classes() as f32);
        put_i16(&mut h, 68, INTENT_LABEL);
    }
    put_i16(&mut h, 70, datatype);
    put_i16(&mut h, 72, bitpix);

    let mut pixdim = [1.0f32; 8];
    for k in 0..3 {
        pixdim[k + 1] = meta.spacing[k] as f32;
    }
    for (k, v) in pixdim.iter().enumerate() {
        put_f32(&mut h, 76 + 4 * k, *v);
    }
    put_f32(&mut h, 108, DATA_OFFSET as f32);
    put_f32(&mut h, 112, 1.0);
    h[123] = UNITS_MM;
    if let VolumeRef::Labels(l) = volume {
        put_f32(&mut h, 124, (l.num_classes() - 1) as f32);
    } else {
        put_f32(&mut h, 124, 1.0);
    }
    h[148..148 + meta.case_id.len()].copy_from_slice(meta.case_id.as_bytes());

    // sform: scaled identity so viewers get the voxel size right.
    put_i16(&mut h, 254, 1);
    put_f32(&mut h, 280, meta.spacing[0] as f32);
    put_f32(&mut h, 296 + 4, meta.spacing[1] as f32);
    put_f32(&mut h, 312 + 8, meta.spacing[2] as f32);
    h[344..348].copy_from_slice(MAGIC_SINGLE_FILE);

    match volume {
        VolumeRef::Labels(l) => h.extend_from_slice(l.voxels()),
        VolumeRef::Probs(p) => {
            h.reserve(p.probs().len() * 4);
            for v in p.probs() {
                h.extend_from_slice(&(*v as f32).to_le_bytes());
            }
        }
    }
    Ok(h)
}

/// Parses uncompressed single-file NIfTI-1 bytes.
pub fn decode(bytes: &[u8], fallback_case_id: &str) -> Result<Volume> {
    if bytes.len() < HEADER_SIZE {
        return Err(Error::Format(format!(
            "file is {} bytes, shorter than the {HEADER_SIZE}-byte header",
            bytes.len()
        )));
    }
    if &bytes[344..348] != MAGIC_SINGLE_FILE {
        return Err(Error::Format(format!(
            "bad magic {:?}, expected \"n+1\"",
            &bytes[344..348]
        )));
    }
    let sizeof_hdr = get_i32(bytes, 0);
    if sizeof_hdr != HEADER_SIZE as i32 {
        if sizeof_hdr.swap_bytes() == HEADER_SIZE as i32 {
            return Err(Error::Unsupported("big-endian files".into()));
        }
        return Err(Error::Format(format!(
            "sizeof_hdr is {sizeof_hdr}, expected 348"
        )));
    }

    let dim: Vec<i16> = (0..8).map(|k| get_i16(bytes, 40 + 2 * k)).collect();
    let ndim = dim[0];
    if !(1..=7).contains(&ndim) {
        return Err(Error::Format(format!("dim[0] = {ndim} outside 1..=7")));
    }
    let extent = |k: usize| -> Result<usize> {
        if (k as i16) > ndim {
            return Ok(1);
        }
        let v = dim[k];
        if v < 1 {
            return Err(Error::Format(format!("dim[{k}] = {v} is not positive")));
        }
        Ok(v as usize)
    };
    let dims = Dims::new(extent(1)?, extent(2)?, extent(3)?);
    let channels = extent(4)?;
    for k in 5..=7 {
        let e = extent(k)?;
        if e != 1 {
            return Err(Error::Unsupported(format!("dimension {k} has extent {e}")));
        }
    }

    let datatype = get_i16(bytes, 70);
    let elem = match datatype {
        DT_UINT8 => 1,
        DT_FLOAT32 => 4,
        other => {
            return Err(Error::Unsupported(format!(
                "datatype code {other}; only uint8 (2) and float32 (16) are read"
            )))
        }
    };
    if datatype == DT_UINT8 && channels != 1 {
        return Err(Error::Unsupported("4D uint8 volumes".into()));
    }

    let slope = get_f32(bytes, 112);
    let inter = get_f32(bytes, 116);
    if !(slope == 0.0 || (slope == 1.0 && inter == 0.0)) {
        return Err(Error::Unsupported(format!(
            "intensity scaling (slope {slope}, intercept {inter})"
        )));
    }

    let spacing = [1, 2, 3].map(|k| get_f32(bytes, 76 + 4 * k) as f64);
    let case_id = {
        let raw = &bytes[148..148 + DESCRIP_LEN];
        let end = raw.iter().position(|b| *b == 0).unwrap_or(DESCRIP_LEN);
        let s = String::from_utf8_lossy(&raw[..end]).into_owned();
        if s.is_empty() {
            fallback_case_id.to_string()
        } else {
            s
        }
    };
    let meta = VolumeMeta::new(dims, spacing, case_id)
        .map_err(|e| Error::Format(format!("header geometry: {e}")))?;

    let vox_offset = get_f32(bytes, 108);
    if !(vox_offset.is_finite() && vox_offset >= HEADER_SIZE as f32) {
        return Err(Error::Format(format!("vox_offset {vox_offset} is invalid")));
    }
    let start = vox_offset as usize;
    let count = dims.len() * channels;
    let end = start + count * elem;
    if bytes.len() < end {
        return Err(Error::Format(format!(
            "truncated payload: need {end} bytes, file has {}",
            bytes.len()
        )));
    }
    let payload = &bytes[start..end];

    match datatype {
        DT_UINT8 => {
            let voxels = payload.to_vec();
            let max_label = voxels.iter().copied().max().unwrap_or(0) as usize;
            let intent_code = get_i16(bytes, 68);
            let declared = get_f32(bytes, 56);
            let declared = if intent_code == INTENT_LABEL
                && (1.0..=256.0).contains(&declared)
                && declared.fract() == 0.0
            {
                declared as usize
            } else {
                BRATS_CLASSES as usize
            };
            let classes = declared.max(max_label + 1);
            if classes > u8::MAX as usize {
                return Err(Error::Unsupported(format!("{classes} label classes")));
            }
            Ok(Volume::Labels(LabelVolume::new(
                meta,
                classes as u8,
                voxels,
            )?))
        }
        _ => {
            let mut probs = Vec::with_capacity(count);
            for (i, chunk) in payload.chunks_exact(4).enumerate() {
                let v = f32::from_le_bytes([chunk[0], chunk[1], chunk[2], chunk[3]]);
                if !v.is_finite() {
                    return Err(Error::Data(format!(
                        "non-finite value {v} at flat index {i}"
                    )));
                }
                probs.push(v as f64);
            }
            Ok(Volume::Probs(ProbVolume::new(meta, channels, probs)?))
        }
    }
}

fn put_i16(b: &mut [u8], at: usize, v: i16) {
    b[at..at + 2].copy_from_slice(&v.to_le_bytes());
}

fn put_i32(b: &mut [u8], at: usize, v: i32) {
    b[at..at + 4].copy_from_slice(&v.to_le_bytes());
}

fn put_f32(b: &mut [u8], at: usize, v: f32) {
    b[at..at + 4].copy_from_slice(&v.to_le_bytes());
}

fn get_i16(b: &[u8], at: usize) -> i16 {
    i16::from_le_bytes([b[at], b[at + 1]])
}

fn get_i32(b: &[u8], at: usize) -> i32 {
    i32::from_le_bytes([b[at], b[at + 1], b[at + 2], b[at + 3]])
}

fn get_f32(b: &[u8], at: usize) -> f32 {
    f32::from_le_bytes([b[at], b[at + 1], b[at + 2], b[at + 3]])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn labels(n: usize) -> LabelVolume {
        let meta = VolumeMeta::new(Dims::cube(n), [1.0, 1.0, 1.0], "case-1").unwrap();
        let voxels = (0..n * n * n).map(|i| (i % 4) as u8).collect();
        LabelVolume::new(meta, 4, voxels).unwrap()
    }

    #[test]
    fn label_round_trip_plain_and_gz() {
        let dir = tempfile::tempdir().unwrap();
        let l = labels(4);
        for name in ["a.nii", "a.nii.gz"] {
            let path = dir.path().join(name);
            write_nifti(&l, &path).unwrap();
            assert_eq!(read_nifti(&path).unwrap(), Volume::Labels(l.clone()));
        }
    }

    #[test]
    fn gz_file_starts_with_gzip_magic() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.nii.gz");
        write_nifti(&labels(3), &path).unwrap();
        let raw = fs::read(&path).unwrap();
        assert_eq!(&raw[..2], &[0x1f, 0x8b]);
    }

    #[test]
    fn four_d_float_reads_as_probs_with_channels() {
        let meta = VolumeMeta::new(Dims::new(2, 3, 4), [0.5, 1.0, 2.0], "p").unwrap();
        let probs = (0..24 * 4).map(|i| ((i % 4) as f64) * 0.25).collect();
        let p = ProbVolume::new(meta, 4, probs).unwrap();
        let bytes = encode((&p).into()).unwrap();
        assert_eq!(get_i16(&bytes, 40), 4);
        assert_eq!(get_i16(&bytes, 48), 4);
        match decode(&bytes, "x").unwrap() {
            Volume::Probs(q) => {
                assert_eq!(q.channels(), 4);
                assert_eq!(q, p);
            }
            other => panic!("expected probabilities, got {other:?}"),
        }
    }

    #[test]
    fn payload_size_for_64_cubed_four_channels() {
        let meta = VolumeMeta::unit(Dims::cube(64), "big").unwrap();
        let n = 64 * 64 * 64;
        let p = ProbVolume::new(meta, 4, vec![0.25; n * 4]).unwrap();
        let bytes = encode((&p).into()).unwrap();
        assert_eq!(bytes.len(), 64 * 64 * 64 * 4 * 4 + 352);
    }

    #[test]
    fn int16_datatype_is_unsupported() {
        let mut bytes = encode((&labels(2)).into()).unwrap();
        put_i16(&mut bytes, 70, 4);
        put_i16(&mut bytes, 72, 16);
        bytes.extend_from_slice(&[0u8; 8]);
        assert!(matches!(decode(&bytes, "x"), Err(Error::Unsupported(_))));
    }

    #[test]
    fn bad_magic_is_format_error() {
        let mut bytes = encode((&labels(2)).into()).unwrap();
        bytes[344..348].copy_from_slice(b"ni1\0");
        assert!(matches!(decode(&bytes, "x"), Err(Error::Format(_))));
        assert!(matches!(decode(&bytes[..100], "x"), Err(Error::Format(_))));
    }

    #[test]
    fn non_finite_float_is_data_error() {
        let meta = VolumeMeta::unit(Dims::cube(2), "p").unwrap();
        let p = ProbVolume::new(meta, 1, vec![0.5; 8]).unwrap();
        let mut bytes = encode((&p).into()).unwrap();
        bytes[DATA_OFFSET + 4..DATA_OFFSET + 8].copy_from_slice(&f32::NAN.to_le_bytes());
        assert!(matches!(decode(&bytes, "x"), Err(Error::Data(_))));
    }

    #[test]
    fn nan_probability_refused_before_writing() {
        let meta = VolumeMeta::unit(Dims::cube(2), "p").unwrap();
        let mut v = vec![0.5; 8];
        v[2] = f64::NAN;
        let p = ProbVolume::from_parts_unchecked(meta, 1, v);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("nan.nii");
        assert!(matches!(write_nifti(&p, &path), Err(Error::Data(_))));
        assert!(!path.exists());
    }

    #[test]
    fn truncated_payload_is_format_error() {
        let bytes = encode((&labels(3)).into()).unwrap();
        assert!(matches!(
            decode(&bytes[..bytes.len() - 1], "x"),
            Err(Error::Format(_))
        ));
    }

    #[test]
    fn missing_descrip_falls_back_to_file_stem() {
        let l = labels(2).with_case_id("");
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("BraTS-SSA-00001-000.nii.gz");
        write_nifti(&l, &path).unwrap();
        assert_eq!(
            read_nifti(&path).unwrap().meta().case_id,
            "BraTS-SSA-00001-000"
        );
    }

    #[test]
    fn unwritable_path_is_io_error() {
        let err = write_nifti(&labels(2), "/nonexistent-dir/x/y.nii").unwrap_err();
        assert!(matches!(err, Error::Io { .. }));
    }

    #[test]
    fn class_count_survives_round_trip() {
        let meta = VolumeMeta::unit(Dims::cube(2), "c").unwrap();
        for classes in [1u8, 2, 4, 7] {
            let l = LabelVolume::background(meta.clone(), classes);
            let back = decode(&encode((&l).into()).unwrap(), "x").unwrap();
            assert_eq!(back, Volume::Labels(l));
        }
    }
}
