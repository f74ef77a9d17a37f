use std::collections::HashSet;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MIN_DURATION: f64 = 1.5;
pub const MAX_DURATION: f64 = 21.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Platform {
    Youtube,
    Vimeo,
    Dailymotion,
    Facebook,
    Instagram,
    X,
    Tiktok,
    /// Local files, including synthetic corpora.
    Local,
}

impl Platform {
    pub fn parse(s: &str) -> Option<Self> {
        Some(match s.trim().to_ascii_lowercase().as_str() {
            "youtube" => Self::Youtube,
            "vimeo" => Self::Vimeo,
            "dailymotion" => Self::Dailymotion,
            "facebook" => Self::Facebook,
            "instagram" => Self::Instagram,
            "x" | "twitter" => Self::X,
            "tiktok" => Self::Tiktok,
            "local" => Self::Local,
            _ => return None,
        })
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Youtube => "youtube",
            Self::Vimeo => "vimeo",
            Self::Dailymotion => "dailymotion",
            Self::Facebook => "facebook",
            Self::Instagram => "instagram",
            Self::X => "x",
            Self::Tiktok => "tiktok",
            Self::Local => "local",
        }
    }
}

impl fmt::Display for Platform {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Which half of the corpus a video belongs to: collision / near-miss clips
/// or accident-free riding.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Pool {
    Collision,
    Safe,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VideoManifestEntry {
    pub video_id: String,
    pub source_url: String,
    pub start_time: f64,
    pub end_time: f64,
    pub source_platform: Platform,
    /// Optional trailing `pool` column; `None` lets the annotation decide.
    #[serde(default)]
    pub pool: Option<Pool>,
}

impl VideoManifestEntry {
    pub fn duration(&self) -> f64 {
        self.end_time - self.start_time
    }

    fn check(&self) -> std::result::Result<(), String> {
        if self.video_id.is_empty() {
            return Err("empty video_id".into());
        }
        if self.start_time < 0.0 {
            return Err(format!("negative start_time {}", self.start_time));
        }
        let d = self.duration();
        if d <= 0.0 {
            return Err(format!("negative duration ({} - {} = {d})", self.end_time, self.start_time));
        }
        if !(MIN_DURATION..=MAX_DURATION).contains(&d) {
            return Err(format!("duration outside [{MIN_DURATION}, {MAX_DURATION}]: {d}"));
        }
        Ok(())
    }
}

const HEADER: [&str; 5] = ["video_id", "source_url", "start_time", "end_time", "source_platform"];

/// Read and validate a manifest. Row numbers in errors count the header as row 1.
pub fn parse_manifest(path: &Path) -> Result<Vec<VideoManifestEntry>> {
    let display = path.display().to_string();
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .flexible(true)
        .from_path(path)
        .map_err(|e| Error::Invalid(format!("{display}: {e}")))?;
    let headers: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    if headers.len() < 5 || headers[..5] != HEADER {
        return Err(Error::Row {
            path: display,
            row: 1,
            message: format!("expected header {}", HEADER.join(",")),
        });
    }
    let has_pool = headers.get(5).map(String::as_str) == Some("pool");
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let row = i + 2;
        let err = |message: String| Error::Row { path: display.clone(), row, message };
        let rec = rec.map_err(|e| err(e.to_string()))?;
        if rec.len() < 5 {
            return Err(err(format!("expected 5 columns, found {}", rec.len())));
        }
        let num = |j: usize| rec[j].parse::<f64>().map_err(|_| err(format!("{}: not a number: {:?}", HEADER[j], &rec[j])));
        let pool = match (has_pool, rec.get(5)) {
            (true, Some("collision")) => Some(Pool::Collision),
            (true, Some("safe")) => Some(Pool::Safe),
            (true, Some("")) | (true, None) | (false, _) => None,
            (true, Some(other)) => return Err(err(format!("pool: unrecognised value {other:?}"))),
        };
        let entry = VideoManifestEntry {
            video_id: rec[0].to_string(),
            source_url: rec[1].to_string(),
            start_time: num(2)?,
            end_time: num(3)?,
            source_platform: Platform::parse(&rec[4])
                .ok_or_else(|| err(format!("source_platform: unrecognised value {:?}", &rec[4])))?,
            pool,
        };
        entry.check().map_err(err)?;
        if !seen.insert(entry.video_id.clone()) {
            return Err(err(format!("duplicate video_id {:?}", entry.video_id)));
        }
        out.push(entry);
    }
    Ok(out)
}

pub fn write_manifest(path: &Path, entries: &[VideoManifestEntry]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::Invalid(format!("{}: {e}", path.display())))?;
    let with_pool = entries.iter().any(|e| e.pool.is_some());
    let mut header = HEADER.to_vec();
    if with_pool {
        header.push("pool");
    }
    w.write_record(&header)?;
    for e in entries {
        let mut row = vec![
            e.video_id.clone(),
            e.source_url.clone(),
            e.start_time.to_string(),
            e.end_time.to_string(),
            e.source_platform.to_string(),
        ];
        if with_pool {
            row.push(match e.pool {
                Some(Pool::Collision) => "collision".into(),
                Some(Pool::Safe) => "safe".into(),
                None => String::new(),
            });
        }
        w.write_record(&row)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn manifest(rows: &str) -> (tempfile::TempDir, std::path::PathBuf) {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("manifest.csv");
        std::fs::write(&p, format!("video_id,source_url,start_time,end_time,source_platform\n{rows}")).unwrap();
        (dir, p)
    }

    #[test]
    fn simple_row() {
        let (_d, p) = manifest("v0001,https://example.org/watch?v=1,3.0,8.5,youtube\n");
        let m = parse_manifest(&p).unwrap();
        assert_eq!(m.len(), 1);
        assert_eq!(m[0].duration(), 5.5);
        assert_eq!(m[0].source_platform, Platform::Youtube);
    }

    #[test]
    fn negative_duration() {
        let (_d, p) = manifest("v0001,u,8.5,3.0,youtube\n");
        let e = parse_manifest(&p).unwrap_err().to_string();
        assert!(e.contains("negative duration") && e.contains("row 2"), "{e}");
    }

    #[test]
    fn duration_too_long() {
        let (_d, p) = manifest("v0001,u,0,10,vimeo\nv0002,u,0.0,25.0,youtube\n");
        let e = parse_manifest(&p).unwrap_err().to_string();
        assert!(e.contains("duration outside [1.5, 21]") && e.contains("row 3"), "{e}");
    }

    #[test]
    fn duplicate_ids() {
        let (_d, p) = manifest("a,u,0,2,x\na,u,0,3,x\n");
        assert!(parse_manifest(&p).unwrap_err().to_string().contains("duplicate"));
    }

    #[test]
    fn order_and_pool_preserved() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.csv");
        let entries = vec![
            VideoManifestEntry {
                video_id: "b".into(),
                source_url: "u".into(),
                start_time: 0.0,
                end_time: 3.0,
                source_platform: Platform::Local,
                pool: Some(Pool::Safe),
            },
            VideoManifestEntry {
                video_id: "a".into(),
                source_url: "u".into(),
                start_time: 1.0,
                end_time: 4.5,
                source_platform: Platform::Tiktok,
                pool: Some(Pool::Collision),
            },
        ];
        write_manifest(&p, &entries).unwrap();
        assert_eq!(parse_manifest(&p).unwrap(), entries);
    }
}
