use std::collections::HashMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::ops::{CanonicalClip, ChannelStats, ProvenanceStep};
use super::{FrameStack, CHANNELS};

/// Environment variable naming the external transcoder binary.
pub const TRANSCODER_ENV: &str = "CYCLIST_COLLISION_FFMPEG";

const RAW_MAGIC: &[u8; 4] = b"RGBV";
const FRAMES_MAGIC: &[u8; 4] = b"CCFT";
/// Extension of the native uncompressed container.
pub const RAW_EXTENSION: &str = "rgbv";

/// Decoded source video, pixel values in `[0, 255]`.
#[derive(Clone, Debug, PartialEq)]
pub struct RawVideo {
    pub fps: f64,
    pub frames: FrameStack,
}

fn read_u32(r: &mut impl Read) -> std::io::Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_f64(r: &mut impl Read) -> std::io::Result<f64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(f64::from_le_bytes(b))
}

/// Write `video` in the native `.rgbv` layout: magic, width, height, fps,
/// frame count, then interleaved RGB bytes.
pub fn write_raw_video(path: &Path, video: &RawVideo) -> Result<()> {
    let io = |e| Error::io(path, e);
    let mut w = BufWriter::new(File::create(path).map_err(io)?);
    let f = &video.frames;
    w.write_all(RAW_MAGIC).map_err(io)?;
    w.write_all(&(f.w as u32).to_le_bytes()).map_err(io)?;
    w.write_all(&(f.h as u32).to_le_bytes()).map_err(io)?;
    w.write_all(&video.fps.to_le_bytes()).map_err(io)?;
    w.write_all(&(f.t as u32).to_le_bytes()).map_err(io)?;
    let bytes: Vec<u8> = f.data.iter().map(|v| v.round().clamp(0.0, 255.0) as u8).collect();
    w.write_all(&bytes).map_err(io)?;
    w.flush().map_err(io)
}

pub fn read_raw_video(path: &Path) -> Result<RawVideo> {
    let io = |e| Error::io(path, e);
    let mut r = BufReader::new(File::open(path).map_err(io)?);
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic).map_err(io)?;
    if &magic != RAW_MAGIC {
        return Err(Error::Invalid(format!("{}: not an rgbv file", path.display())));
    }
    let w = read_u32(&mut r).map_err(io)? as usize;
    let h = read_u32(&mut r).map_err(io)? as usize;
    let fps = read_f64(&mut r).map_err(io)?;
    let t = read_u32(&mut r).map_err(io)? as usize;
    let mut bytes = vec![0u8; t * h * w * CHANNELS];
    r.read_exact(&mut bytes).map_err(|e| Error::Invalid(format!("{}: truncated frame data: {e}", path.display())))?;
    let frames = FrameStack::new(t, h, w, bytes.into_iter().map(f32::from).collect())?;
    Ok(RawVideo { fps, frames })
}

/// External decoder/encoder for container formats other than `.rgbv`.
#[derive(Clone, Debug)]
pub struct Transcoder {
    pub ffmpeg: PathBuf,
    pub ffprobe: PathBuf,
}

impl Transcoder {
    /// Locate the transcoder from `CYCLIST_COLLISION_FFMPEG`, falling back to
    /// `ffmpeg` on `PATH`.
    pub fn locate() -> Result<Self> {
        let ffmpeg = std::env::var_os(TRANSCODER_ENV).map(PathBuf::from).unwrap_or_else(|| PathBuf::from("ffmpeg"));
        let ffprobe = ffmpeg.with_file_name(if cfg!(windows) { "ffprobe.exe" } else { "ffprobe" });
        let ok = Command::new(&ffmpeg)
            .arg("-version")
            .stdout(Stdio::null())
            .stderr(Stdio::null())
            .status()
            .map(|s| s.success())
            .unwrap_or(false);
        if !ok {
            return Err(Error::Transcoder(format!(
                "{} not runnable; set {TRANSCODER_ENV} or use .{RAW_EXTENSION} inputs",
                ffmpeg.display()
            )));
        }
        Ok(Self { ffmpeg, ffprobe })
    }

    fn probe(&self, path: &Path) -> Result<(usize, usize, f64)> {
        let out = Command::new(&self.ffprobe)
            .args(["-v", "error", "-select_streams", "v:0", "-show_entries", "stream=width,height,r_frame_rate"])
            .args(["-of", "csv=p=0"])
            .arg(path)
            .output()
            .map_err(|e| Error::Transcoder(format!("ffprobe: {e}")))?;
        if !out.status.success() {
            return Err(Error::Invalid(format!("{}: cannot probe video stream", path.display())));
        }
        let text = String::from_utf8_lossy(&out.stdout);
        let parts: Vec<&str> = text.trim().split(',').collect();
        let bad = || Error::Invalid(format!("{}: unexpected probe output {text:?}", path.display()));
        if parts.len() < 3 {
            return Err(bad());
        }
        let w = parts[0].parse().map_err(|_| bad())?;
        let h = parts[1].parse().map_err(|_| bad())?;
        let fps = match parts[2].split_once('/') {
            Some((n, d)) => n.parse::<f64>().map_err(|_| bad())? / d.parse::<f64>().map_err(|_| bad())?,
            None => parts[2].parse().map_err(|_| bad())?,
        };
        Ok((w, h, fps))
    }

    pub fn decode(&self, path: &Path) -> Result<RawVideo> {
        let (w, h, fps) = self.probe(path)?;
        let out = Command::new(&self.ffmpeg)
            .args(["-v", "error", "-i"])
            .arg(path)
            .args(["-f", "rawvideo", "-pix_fmt", "rgb24", "-"])
            .output()
            .map_err(|e| Error::Transcoder(format!("ffmpeg: {e}")))?;
        if !out.status.success() {
            return Err(Error::Invalid(format!("{}: decode failed", path.display())));
        }
        let per = w * h * CHANNELS;
        let t = out.stdout.len() / per.max(1);
        let frames = FrameStack::new(t, h, w, out.stdout[..t * per].iter().map(|&b| f32::from(b)).collect())?;
        Ok(RawVideo { fps, frames })
    }

    /// Encode frames with values in `[0, 255]` to an H.264 mp4.
    pub fn encode_mp4(&self, frames: &FrameStack, fps: f64, path: &Path) -> Result<()> {
        let mut child = Command::new(&self.ffmpeg)
            .args(["-v", "error", "-y", "-f", "rawvideo", "-pix_fmt", "rgb24"])
            .args(["-s", &format!("{}x{}", frames.w, frames.h), "-r", &fps.to_string(), "-i", "-"])
            .args(["-c:v", "libx264", "-pix_fmt", "yuv420p"])
            .arg(path)
            .stdin(Stdio::piped())
            .spawn()
            .map_err(|e| Error::Transcoder(format!("ffmpeg: {e}")))?;
        let bytes: Vec<u8> = frames.data.iter().map(|v| v.round().clamp(0.0, 255.0) as u8).collect();
        child
            .stdin
            .take()
            .expect("piped stdin")
            .write_all(&bytes)
            .map_err(|e| Error::Transcoder(format!("ffmpeg stdin: {e}")))?;
        let status = child.wait().map_err(|e| Error::Transcoder(format!("ffmpeg: {e}")))?;
        if !status.success() {
            return Err(Error::Transcoder(format!("encoding {} failed", path.display())));
        }
        Ok(())
    }
}

/// Decode any supported source: `.rgbv` natively, anything else through the
/// external transcoder.
pub fn decode_video(path: &Path) -> Result<RawVideo> {
    if path.extension().and_then(|e| e.to_str()) == Some(RAW_EXTENSION) {
        read_raw_video(path)
    } else {
        Transcoder::locate()?.decode(path)
    }
}

/// Sidecar metadata for a stored canonical clip.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClipMeta {
    pub video_id: String,
    pub duration: f64,
    pub n_frames: usize,
    pub height: usize,
    pub width: usize,
    pub fps: f64,
    pub zscore_scope: String,
    pub zscore_stats: [ChannelStats; 3],
    pub provenance: Vec<ProvenanceStep>,
}

/// Directory of canonical clips: `<id>.frames` holds f32 pixels, `<id>.json`
/// the metadata. Loaded clips are cached in memory.
#[derive(Debug)]
pub struct CanonicalStore {
    root: PathBuf,
    cache: Mutex<HashMap<String, Arc<FrameStack>>>,
}

impl CanonicalStore {
    pub fn open(root: impl Into<PathBuf>) -> Result<Self> {
        let root = root.into();
        std::fs::create_dir_all(&root).map_err(|e| Error::io(&root, e))?;
        Ok(Self { root, cache: Mutex::new(HashMap::new()) })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn frames_path(&self, id: &str) -> PathBuf {
        self.root.join(format!("{id}.frames"))
    }

    fn meta_path(&self, id: &str) -> PathBuf {
        self.root.join(format!("{id}.json"))
    }

    pub fn contains(&self, id: &str) -> bool {
        self.frames_path(id).exists() && self.meta_path(id).exists()
    }

    pub fn save(&self, clip: &CanonicalClip) -> Result<()> {
        let f = &clip.frames;
        let path = self.frames_path(&clip.video_id);
        let io = |e| Error::io(&path, e);
        let mut w = BufWriter::new(File::create(&path).map_err(io)?);
        w.write_all(FRAMES_MAGIC).map_err(io)?;
        for d in [f.t, f.h, f.w, CHANNELS] {
            w.write_all(&(d as u32).to_le_bytes()).map_err(io)?;
        }
        let mut bytes = Vec::with_capacity(f.data.len() * 4);
        for v in &f.data {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        w.write_all(&bytes).map_err(io)?;
        w.flush().map_err(io)?;

        let meta = ClipMeta {
            video_id: clip.video_id.clone(),
            duration: clip.duration,
            n_frames: f.t,
            height: f.h,
            width: f.w,
            fps: clip.fps,
            zscore_scope: "per_clip".into(),
            zscore_stats: clip.zscore_stats,
            provenance: clip.provenance.clone(),
        };
        let mp = self.meta_path(&clip.video_id);
        std::fs::write(&mp, serde_json::to_vec_pretty(&meta)?).map_err(|e| Error::io(&mp, e))?;
        self.cache.lock().expect("cache lock").remove(&clip.video_id);
        Ok(())
    }

    pub fn meta(&self, id: &str) -> Result<ClipMeta> {
        let mp = self.meta_path(id);
        let text = std::fs::read(&mp).map_err(|e| Error::io(&mp, e))?;
        Ok(serde_json::from_slice(&text)?)
    }

    /// All stored clip ids, sorted.
    pub fn ids(&self) -> Result<Vec<String>> {
        let mut ids = Vec::new();
        for entry in std::fs::read_dir(&self.root).map_err(|e| Error::io(&self.root, e))? {
            let p = entry.map_err(|e| Error::io(&self.root, e))?.path();
            if p.extension().and_then(|e| e.to_str()) == Some("frames") {
                if let Some(stem) = p.file_stem().and_then(|s| s.to_str()) {
                    ids.push(stem.to_string());
                }
            }
        }
        ids.sort();
        Ok(ids)
    }

    /// Frame count of every stored clip.
    pub fn frame_counts(&self) -> Result<std::collections::BTreeMap<String, usize>> {
        self.ids()?.into_iter().map(|id| Ok((id.clone(), self.meta(&id)?.n_frames))).collect()
    }

    pub fn frames(&self, id: &str) -> Result<Arc<FrameStack>> {
        if let Some(f) = self.cache.lock().expect("cache lock").get(id) {
            return Ok(f.clone());
        }
        let path = self.frames_path(id);
        let bytes = std::fs::read(&path).map_err(|e| Error::io(&path, e))?;
        let bad = |m: &str| Error::Invalid(format!("{}: {m}", path.display()));
        if bytes.len() < 20 || &bytes[..4] != FRAMES_MAGIC {
            return Err(bad("not a canonical frame file"));
        }
        let dim = |i: usize| u32::from_le_bytes(bytes[4 + 4 * i..8 + 4 * i].try_into().expect("4 bytes")) as usize;
        let (t, h, w, c) = (dim(0), dim(1), dim(2), dim(3));
        if c != CHANNELS || bytes.len() != 20 + t * h * w * c * 4 {
            return Err(bad("size does not match header"));
        }
        let data = bytes[20..].chunks_exact(4).map(|b| f32::from_le_bytes(b.try_into().expect("4 bytes"))).collect();
        let frames = Arc::new(FrameStack::new(t, h, w, data)?);
        self.cache.lock().expect("cache lock").insert(id.to_string(), frames.clone());
        Ok(frames)
    }

    pub fn load(&self, id: &str) -> Result<CanonicalClip> {
        let meta = self.meta(id)?;
        let frames = (*self.frames(id)?).clone();
        Ok(CanonicalClip {
            video_id: meta.video_id,
            frames,
            fps: meta.fps,
            zscore_stats: meta.zscore_stats,
            duration: meta.duration,
            provenance: meta.provenance,
        })
    }

    /// Frames `start..start + len` of clip `id`.
    pub fn window(&self, id: &str, start: usize, len: usize) -> Result<FrameStack> {
        self.frames(id)?.slice(start, len)
    }

    pub fn clear_cache(&self) {
        self.cache.lock().expect("cache lock").clear();
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn raw_video_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.rgbv");
        let frames = FrameStack::new(2, 3, 4, (0..72).map(|v| (v * 3) as f32).collect()).unwrap();
        let v = RawVideo { fps: 24.0, frames };
        write_raw_video(&p, &v).unwrap();
        assert_eq!(read_raw_video(&p).unwrap(), v);
        assert_eq!(decode_video(&p).unwrap(), v);
    }

    #[test]
    fn truncated_raw_video_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.rgbv");
        let v = RawVideo { fps: 30.0, frames: FrameStack::zeros(2, 2, 2) };
        write_raw_video(&p, &v).unwrap();
        let bytes = std::fs::read(&p).unwrap();
        std::fs::write(&p, &bytes[..bytes.len() - 3]).unwrap();
        assert!(read_raw_video(&p).unwrap_err().is_validation());
    }

    #[test]
    fn missing_transcoder_reports_clearly() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.mp4");
        std::fs::write(&p, b"").unwrap();
        std::env::set_var(TRANSCODER_ENV, dir.path().join("no-such-ffmpeg"));
        match decode_video(&p) {
            Err(Error::Transcoder(m)) => assert!(m.contains(TRANSCODER_ENV)),
            other => panic!("expected transcoder error, got {other:?}"),
        }
    }

    #[test]
    fn canonical_store_round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let store = CanonicalStore::open(dir.path().join("canonical")).unwrap();
        let frames = FrameStack::new(3, 2, 2, (0..36).map(|v| (v as f32).sin() * 1.7).collect()).unwrap();
        let clip = CanonicalClip {
            video_id: "v1".into(),
            frames,
            fps: 30.0,
            zscore_stats: [ChannelStats { mean: 0.1, std: 1.0 }; 3],
            duration: 0.1,
            provenance: vec![ProvenanceStep { step: "temporal_crop".into(), detail: "x".into() }],
        };
        store.save(&clip).unwrap();
        assert!(store.contains("v1"));
        assert_eq!(store.ids().unwrap(), vec!["v1".to_string()]);
        assert_eq!(store.load("v1").unwrap(), clip);
        assert_eq!(store.meta("v1").unwrap().zscore_scope, "per_clip");
        assert_eq!(store.window("v1", 1, 2).unwrap(), clip.frames.slice(1, 2).unwrap());
        assert!(store.window("v1", 2, 2).is_err());
    }
}
