//! Binary control-track container ("S2SC").
//!
//! Layout, all little-endian:
//!   magic "S2SC" | u32 version=1 | f32 frame_rate_hz | u32 n_frames |
//!   u32 n_channels | per channel { u16 name_len, UTF-8 name } |
//!   f32 data, row-major [frame][channel]
//!
//! Channels are written in a canonical order (loudness, centroid,
//! periodicity, pitch_000..pitch_359) so write -> read -> write is
//! byte-identical. External pitch matrices ingest through the same format.

use std::io::{Cursor, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use ndarray::Array2;

use crate::controls::{
    pitch_channel_name, ControlSet, ControlTrack, PitchProbMatrix, CENTROID_NAME, LOUDNESS_NAME,
    PERIODICITY_NAME, PITCH_BINS,
};
use crate::error::{Error, Result};
use crate::ioutil::atomic_write;

const MAGIC: &[u8; 4] = b"S2SC";
const VERSION: u32 = 1;

fn channel_order(set: &ControlSet) -> Vec<String> {
    let mut names = Vec::new();
    if set.loudness.is_some() {
        names.push(LOUDNESS_NAME.to_string());
    }
    if set.centroid.is_some() {
        names.push(CENTROID_NAME.to_string());
    }
    if set.periodicity.is_some() {
        names.push(PERIODICITY_NAME.to_string());
    }
    if set.pitch.is_some() {
        for i in 0..PITCH_BINS {
            names.push(pitch_channel_name(i));
        }
    }
    names
}

fn channel_value(set: &ControlSet, name: &str, frame: usize) -> f64 {
    match name {
        LOUDNESS_NAME => set.loudness.as_ref().unwrap().values[frame],
        CENTROID_NAME => set.centroid.as_ref().unwrap().values[frame],
        PERIODICITY_NAME => set.periodicity.as_ref().unwrap().values[frame],
        _ => {
            let i: usize = name["pitch_".len()..].parse().unwrap();
            set.pitch.as_ref().unwrap().probs()[(i, frame)]
        }
    }
}

/// Serialize a control set to container bytes.
pub fn to_bytes(set: &ControlSet) -> Result<Vec<u8>> {
    set.validate()?;
    let n_frames = set
        .n_frames()
        .ok_or_else(|| Error::invalid("cannot serialize an empty control set"))?;
    let frame_rate = set.frame_rate().unwrap();
    let names = channel_order(set);
    let mut buf = Vec::new();
    buf.write_all(MAGIC)?;
    buf.write_u32::<LittleEndian>(VERSION)?;
    buf.write_f32::<LittleEndian>(frame_rate as f32)?;
    buf.write_u32::<LittleEndian>(n_frames as u32)?;
    buf.write_u32::<LittleEndian>(names.len() as u32)?;
    for name in &names {
        let bytes = name.as_bytes();
        buf.write_u16::<LittleEndian>(bytes.len() as u16)?;
        buf.write_all(bytes)?;
    }
    for frame in 0..n_frames {
        for name in &names {
            buf.write_f32::<LittleEndian>(channel_value(set, name, frame) as f32)?;
        }
    }
    Ok(buf)
}

/// Parse container bytes into a control set.
pub fn from_bytes(bytes: &[u8]) -> Result<ControlSet> {
    let mut r = Cursor::new(bytes);
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::format("bad magic (expected S2SC)"));
    }
    let version = r.read_u32::<LittleEndian>()?;
    if version != VERSION {
        return Err(Error::format(format!("unsupported S2SC version {version}")));
    }
    let frame_rate = r.read_f32::<LittleEndian>()? as f64;
    if !(frame_rate > 0.0) {
        return Err(Error::format("non-positive frame rate"));
    }
    let n_frames = r.read_u32::<LittleEndian>()? as usize;
    let n_channels = r.read_u32::<LittleEndian>()? as usize;
    let mut names = Vec::with_capacity(n_channels);
    for _ in 0..n_channels {
        let len = r.read_u16::<LittleEndian>()? as usize;
        let mut name = vec![0u8; len];
        r.read_exact(&mut name)?;
        names.push(
            String::from_utf8(name).map_err(|_| Error::format("channel name is not UTF-8"))?,
        );
    }
    let mut data = vec![0.0f64; n_frames * n_channels];
    for v in data.iter_mut() {
        *v = r.read_f32::<LittleEndian>()? as f64;
    }
    if r.position() != bytes.len() as u64 {
        return Err(Error::format("trailing bytes after S2SC payload"));
    }

    let mut loudness = None;
    let mut centroid = None;
    let mut periodicity = None;
    let mut pitch_rows: Vec<Option<Vec<f64>>> = vec![None; PITCH_BINS];
    let mut any_pitch = false;
    for (c, name) in names.iter().enumerate() {
        let column: Vec<f64> = (0..n_frames).map(|f| data[f * n_channels + c]).collect();
        match name.as_str() {
            LOUDNESS_NAME => loudness = Some(ControlTrack::new(LOUDNESS_NAME, frame_rate, column)?),
            CENTROID_NAME => centroid = Some(ControlTrack::new(CENTROID_NAME, frame_rate, column)?),
            PERIODICITY_NAME => {
                periodicity = Some(ControlTrack::new(PERIODICITY_NAME, frame_rate, column)?)
            }
            other => {
                let idx: usize = other
                    .strip_prefix("pitch_")
                    .and_then(|s| s.parse().ok())
                    .filter(|&i| i < PITCH_BINS)
                    .ok_or_else(|| Error::format(format!("unknown channel '{other}'")))?;
                pitch_rows[idx] = Some(column);
                any_pitch = true;
            }
        }
    }
    let pitch = if any_pitch {
        let mut probs = Array2::zeros((PITCH_BINS, n_frames));
        for (i, row) in pitch_rows.into_iter().enumerate() {
            let row = row.ok_or_else(|| {
                Error::format(format!("pitch channels incomplete (missing pitch_{i:03})"))
            })?;
            for (n, v) in row.into_iter().enumerate() {
                probs[(i, n)] = v;
            }
        }
        Some(PitchProbMatrix::new(probs, frame_rate)?)
    } else {
        None
    };
    ControlSet::new(loudness, centroid, pitch, periodicity)
}

/// Write a control set to a container file (atomically).
pub fn write_s2sc(path: impl AsRef<Path>, set: &ControlSet) -> Result<()> {
    atomic_write(path, &to_bytes(set)?)
}

/// Read a control set from a container file.
pub fn read_s2sc(path: impl AsRef<Path>) -> Result<ControlSet> {
    let bytes = std::fs::read(path.as_ref())?;
    from_bytes(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::controls::PITCH_PROB_THRESHOLD;

    fn sample_set() -> ControlSet {
        let n = 17;
        let loud = ControlTrack::new(
            LOUDNESS_NAME,
            40.0,
            (0..n).map(|i| -60.0 + i as f64).collect(),
        )
        .unwrap();
        let cen = ControlTrack::new(
            CENTROID_NAME,
            40.0,
            (0..n).map(|i| 0.3 + 0.01 * i as f64).collect(),
        )
        .unwrap();
        let mut probs = Array2::zeros((PITCH_BINS, n));
        for f in 0..n {
            probs[(100 + f, f)] = 0.9;
            probs[(99 + f, f)] = 0.4;
        }
        let pitch = PitchProbMatrix::new(probs, 40.0).unwrap();
        let per =
            ControlTrack::new(PERIODICITY_NAME, 40.0, (0..n).map(|_| 0.9).collect()).unwrap();
        ControlSet::new(Some(loud), Some(cen), Some(pitch), Some(per)).unwrap()
    }

    #[test]
    fn write_read_write_is_byte_identical() {
        let set = sample_set();
        let bytes = to_bytes(&set).unwrap();
        let back = from_bytes(&bytes).unwrap();
        let bytes2 = to_bytes(&back).unwrap();
        assert_eq!(bytes, bytes2);
    }

    #[test]
    fn channel_count_matches_members() {
        let set = sample_set();
        let bytes = to_bytes(&set).unwrap();
        // n_channels field sits after magic+version+rate+n_frames
        let n_channels = u32::from_le_bytes(bytes[16..20].try_into().unwrap());
        assert_eq!(n_channels, 363);
    }

    #[test]
    fn rejects_bad_magic_and_truncation() {
        let set = sample_set();
        let mut bytes = to_bytes(&set).unwrap();
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(from_bytes(&bad).is_err());
        bytes.truncate(bytes.len() - 3);
        assert!(from_bytes(&bytes).is_err());
    }

    #[test]
    fn rejects_unknown_channel() {
        let mut buf = Vec::new();
        buf.extend_from_slice(b"S2SC");
        buf.extend_from_slice(&1u32.to_le_bytes());
        buf.extend_from_slice(&40.0f32.to_le_bytes());
        buf.extend_from_slice(&1u32.to_le_bytes());
        buf.extend_from_slice(&1u32.to_le_bytes());
        let name = b"mystery";
        buf.extend_from_slice(&(name.len() as u16).to_le_bytes());
        buf.extend_from_slice(name);
        buf.extend_from_slice(&0.5f32.to_le_bytes());
        assert!(from_bytes(&buf).is_err());
    }

    #[test]
    fn read_rethresholds_pitch() {
        // hand-build a file whose pitch values dip below the threshold
        let mut probs = Array2::zeros((PITCH_BINS, 2));
        probs[(5, 0)] = 0.5;
        let pitch = PitchProbMatrix::new(probs, 40.0).unwrap();
        let set = ControlSet::new(None, None, Some(pitch), None).unwrap();
        let mut bytes = to_bytes(&set).unwrap();
        // poke a sub-threshold value directly into the payload
        let header = bytes.len() - 2 * PITCH_BINS * 4;
        let off = header + 6 * 4; // frame 0, channel pitch_006
        bytes[off..off + 4].copy_from_slice(&0.05f32.to_le_bytes());
        let back = from_bytes(&bytes).unwrap();
        let p = back.pitch.unwrap();
        assert_eq!(p.probs()[(6, 0)], 0.0);
        assert!(p
            .probs()
            .iter()
            .all(|&v| v == 0.0 || v >= PITCH_PROB_THRESHOLD));
    }

    #[test]
    fn file_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.s2sc");
        let set = sample_set();
        write_s2sc(&path, &set).unwrap();
        let back = read_s2sc(&path).unwrap();
        assert_eq!(to_bytes(&set).unwrap(), to_bytes(&back).unwrap());
    }
}
