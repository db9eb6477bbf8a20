//! Run artifact persistence: content-addressed run directories, RFC-4180
//! CSV emission with byte-stable float formatting, and the crash-safe
//! manifest written last.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde_json::json;
use sha2::{Digest, Sha256};

use crate::error::HarnessError;

pub const CODE_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Shortest round-trip decimal for a float; infinities serialize as the
/// literal "inf" / "-inf".
pub fn fmt_f64(v: f64) -> String {
    if v.is_nan() {
        "nan".to_string()
    } else if v == f64::INFINITY {
        "inf".to_string()
    } else if v == f64::NEG_INFINITY {
        "-inf".to_string()
    } else {
        format!("{v}")
    }
}

fn csv_escape(field: &str) -> String {
    if field.contains(',') || field.contains('"') || field.contains('\n') || field.contains('\r') {
        format!("\"{}\"", field.replace('"', "\"\""))
    } else {
        field.to_string()
    }
}

fn sha256_hex(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    let digest = hasher.finalize();
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Clone)]
struct ArtifactEntry {
    path: String,
    sha256: String,
}

/// One run's output directory. The manifest is written by `finish`; a
/// directory without a manifest is a detectable partial run and is cleared
/// on the next attempt with the same id.
#[derive(Debug)]
pub struct ResultStore {
    pub dir: PathBuf,
    pub run_id: String,
    config_json: String,
    started: u64,
    artifacts: Vec<ArtifactEntry>,
    finished: bool,
}

impl ResultStore {
    pub fn open(out_root: &Path, config_json: &str) -> Result<Self, HarnessError> {
        let run_id = sha256_hex(format!("{config_json}\n{CODE_VERSION}").as_bytes())[..16].to_string();
        let dir = out_root.join(&run_id);
        let lock = dir.join(".lock");
        if lock.exists() {
            return Err(HarnessError::Runtime(format!(
                "run {run_id} already in progress (lock file present at {})",
                lock.display()
            )));
        }
        if dir.exists() {
            fs::remove_dir_all(&dir)?;
        }
        fs::create_dir_all(&dir)?;
        fs::write(&lock, b"")?;
        let started = SystemTime::now().duration_since(UNIX_EPOCH).unwrap().as_secs();
        Ok(ResultStore {
            dir,
            run_id,
            config_json: config_json.to_string(),
            started,
            artifacts: Vec::new(),
            finished: false,
        })
    }

    pub fn write_bytes(&mut self, name: &str, bytes: &[u8]) -> Result<PathBuf, HarnessError> {
        let path = self.dir.join(name);
        fs::write(&path, bytes)?;
        self.artifacts.push(ArtifactEntry {
            path: name.to_string(),
            sha256: sha256_hex(bytes),
        });
        Ok(path)
    }

    /// Rows must already be in deterministic (trial-sorted) order.
    pub fn write_csv(&mut self, name: &str, header: &[&str], rows: &[Vec<String>]) -> Result<PathBuf, HarnessError> {
        let mut out = String::new();
        out.push_str(&header.iter().map(|h| csv_escape(h)).collect::<Vec<_>>().join(","));
        out.push_str("\r\n");
        for row in rows {
            debug_assert_eq!(row.len(), header.len());
            out.push_str(&row.iter().map(|f| csv_escape(f)).collect::<Vec<_>>().join(","));
            out.push_str("\r\n");
        }
        self.write_bytes(name, out.as_bytes())
    }

    pub fn write_json(&mut self, name: &str, value: &serde_json::Value) -> Result<PathBuf, HarnessError> {
        let text = serde_json::to_string_pretty(value)
            .map_err(|e| HarnessError::Runtime(e.to_string()))?;
        self.write_bytes(name, text.as_bytes())
    }

    /// Register a file written by someone else (e.g. field dumps).
    pub fn register_file(&mut self, name: &str) -> Result<(), HarnessError> {
        let bytes = fs::read(self.dir.join(name))?;
        self.artifacts.push(ArtifactEntry {
            path: name.to_string(),
            sha256: sha256_hex(&bytes),
        });
        Ok(())
    }

    /// Write the manifest (last, for crash safety) and release the lock.
    pub fn finish(mut self) -> Result<PathBuf, HarnessError> {
        let finished = SystemTime::now().duration_since(UNIX_EPOCH).unwrap().as_secs();
        let config: serde_json::Value = serde_json::from_str(&self.config_json)
            .map_err(|e| HarnessError::Runtime(e.to_string()))?;
        let manifest = json!({
            "run_id": self.run_id,
            "config": config,
            "code_version": CODE_VERSION,
            "started": self.started,
            "finished": finished,
            "artifacts": self.artifacts.iter().map(|a| json!({"path": a.path, "sha256": a.sha256})).collect::<Vec<_>>(),
        });
        let path = self.dir.join("manifest.json");
        fs::write(
            &path,
            serde_json::to_string_pretty(&manifest).map_err(|e| HarnessError::Runtime(e.to_string()))?,
        )?;
        fs::remove_file(self.dir.join(".lock"))?;
        self.finished = true;
        Ok(path)
    }
}

impl Drop for ResultStore {
    fn drop(&mut self) {
        if !self.finished {
            // partial run: release the lock but leave no manifest
            let _ = fs::remove_file(self.dir.join(".lock"));
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_formatting() {
        assert_eq!(fmt_f64(0.1), "0.1");
        assert_eq!(fmt_f64(f64::INFINITY), "inf");
        assert_eq!(fmt_f64(f64::NEG_INFINITY), "-inf");
        assert_eq!(fmt_f64(2.0), "2");
        // shortest round-trip: parse back equals input
        for v in [1.0 / 3.0, 1e-17, 123456.789] {
            assert_eq!(fmt_f64(v).parse::<f64>().unwrap(), v);
        }
    }

    #[test]
    fn csv_escaping() {
        assert_eq!(csv_escape("plain"), "plain");
        assert_eq!(csv_escape("a,b"), "\"a,b\"");
        assert_eq!(csv_escape("say \"hi\""), "\"say \"\"hi\"\"\"");
    }

    #[test]
    fn manifest_written_last_and_reproducible() {
        let tmp = tempfile::tempdir().unwrap();
        let cfg = r#"{"experiment":"sample","seed":7}"#;
        let mut store = ResultStore::open(tmp.path(), cfg).unwrap();
        let run_dir = store.dir.clone();
        store
            .write_csv("rows.csv", &["trial", "value"], &[vec!["0".into(), fmt_f64(0.5)]])
            .unwrap();
        assert!(!run_dir.join("manifest.json").exists());
        assert!(run_dir.join(".lock").exists());
        store.finish().unwrap();
        assert!(run_dir.join("manifest.json").exists());
        assert!(!run_dir.join(".lock").exists());
        let first_csv = fs::read(run_dir.join("rows.csv")).unwrap();

        // identical config reproduces identical CSV bytes in the same dir
        let mut store = ResultStore::open(tmp.path(), cfg).unwrap();
        assert_eq!(store.dir, run_dir);
        store
            .write_csv("rows.csv", &["trial", "value"], &[vec!["0".into(), fmt_f64(0.5)]])
            .unwrap();
        store.finish().unwrap();
        assert_eq!(fs::read(run_dir.join("rows.csv")).unwrap(), first_csv);
    }

    #[test]
    fn partial_run_leaves_no_manifest() {
        let tmp = tempfile::tempdir().unwrap();
        let cfg = r#"{"experiment":"events"}"#;
        let dir;
        {
            let mut store = ResultStore::open(tmp.path(), cfg).unwrap();
            dir = store.dir.clone();
            store.write_bytes("partial.txt", b"half").unwrap();
            // dropped without finish()
        }
        assert!(!dir.join("manifest.json").exists());
        assert!(dir.join("partial.txt").exists());
        // next run with the same id starts clean
        let store = ResultStore::open(tmp.path(), cfg).unwrap();
        assert!(!dir.join("partial.txt").exists());
        store.finish().unwrap();
    }

    #[test]
    fn manifest_lists_artifacts_with_checksums() {
        let tmp = tempfile::tempdir().unwrap();
        let cfg = r#"{"experiment":"sample"}"#;
        let mut store = ResultStore::open(tmp.path(), cfg).unwrap();
        let dir = store.dir.clone();
        store.write_bytes("a.txt", b"alpha").unwrap();
        store.write_bytes("b.txt", b"beta").unwrap();
        store.finish().unwrap();
        let manifest: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap();
        let arts = manifest["artifacts"].as_array().unwrap();
        assert_eq!(arts.len(), 2);
        assert_eq!(arts[0]["path"], "a.txt");
        assert_eq!(arts[0]["sha256"].as_str().unwrap().len(), 64);
        assert!(manifest["run_id"].as_str().unwrap().len() == 16);
        assert!(manifest["config"]["experiment"] == "sample");
    }
}
