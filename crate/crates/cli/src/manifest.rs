//! Sub-seeds, output collection and the run manifest.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use sha2::{Digest, Sha256};

pub const MANIFEST: &str = "manifest.txt";

/// First eight bytes (little endian) of
/// `sha256(master seed LE || experiment || 0x00 || index LE)`.
pub fn sub_seed(master: u64, experiment: &str, index: u64) -> u64 {
    let mut h = Sha256::new();
    h.update(master.to_le_bytes());
    h.update(experiment.as_bytes());
    h.update([0u8]);
    h.update(index.to_le_bytes());
    let digest = h.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("sha256 has 32 bytes"))
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .fold(String::with_capacity(64), |mut s, b| {
            write!(s, "{b:02x}").unwrap();
            s
        })
}

/// Output files of one run, kept in memory and written once at the end so
/// that each file has exactly one writer.
#[derive(Debug, Default)]
pub struct Outputs {
    files: Vec<(String, Vec<u8>)>,
}

impl Outputs {
    pub fn add(&mut self, name: &str, contents: impl Into<Vec<u8>>) {
        assert!(
            name != MANIFEST && self.files.iter().all(|(n, _)| n != name),
            "output `{name}` written twice"
        );
        self.files.push((name.into(), contents.into()));
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.files.iter().map(|(n, _)| n.as_str())
    }

    pub fn get(&self, name: &str) -> Option<&[u8]> {
        self.files.iter().find(|(n, _)| n == name).map(|(_, b)| b.as_slice())
    }

    /// Writes every file into `dir` and returns `(name, sha256)` pairs.
    pub fn write_all(&self, dir: &Path) -> std::io::Result<Vec<(String, String)>> {
        std::fs::create_dir_all(dir)?;
        let mut sums = Vec::new();
        for (name, bytes) in &self.files {
            std::fs::write(dir.join(name), bytes)?;
            sums.push((name.clone(), sha256_hex(bytes)));
        }
        Ok(sums)
    }
}

pub fn unix_now() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

#[derive(Clone, Debug)]
pub struct RunManifest {
    pub experiment: String,
    pub config_echo: String,
    pub version: &'static str,
    pub started: u64,
    pub finished: u64,
    /// `(file name, sha256)` per output.
    pub checksums: Vec<(String, String)>,
}

impl RunManifest {
    pub fn render(&self) -> String {
        let mut s = String::new();
        writeln!(s, "# polyperc run manifest").unwrap();
        writeln!(s, "version = {}", self.version).unwrap();
        writeln!(s, "experiment = {}", self.experiment).unwrap();
        writeln!(s, "started_unix = {}", self.started).unwrap();
        writeln!(s, "finished_unix = {}", self.finished).unwrap();
        writeln!(s, "[config]").unwrap();
        s.push_str(&self.config_echo);
        writeln!(s, "[outputs]").unwrap();
        for (name, sum) in &self.checksums {
            writeln!(s, "{name} sha256 = {sum}").unwrap();
        }
        s
    }

    pub fn write(&self, dir: &Path) -> std::io::Result<PathBuf> {
        let path = dir.join(MANIFEST);
        std::fs::write(&path, self.render())?;
        Ok(path)
    }
}

/// `(file name, sha256)` pairs from the `[outputs]` section of a manifest.
pub fn parse_checksums(manifest: &str) -> Vec<(String, String)> {
    manifest
        .lines()
        .skip_while(|l| *l != "[outputs]")
        .skip(1)
        .filter_map(|l| {
            let (name, sum) = l.split_once(" sha256 = ")?;
            Some((name.to_string(), sum.to_string()))
        })
        .collect()
}

/// Checks every listed file against its checksum; returns the mismatches.
pub fn verify(dir: &Path) -> std::io::Result<Vec<String>> {
    let manifest = std::fs::read_to_string(dir.join(MANIFEST))?;
    let mut bad = Vec::new();
    for (name, sum) in parse_checksums(&manifest) {
        match std::fs::read(dir.join(&name)) {
            Ok(bytes) if sha256_hex(&bytes) == sum => {}
            _ => bad.push(name),
        }
    }
    Ok(bad)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sha256_known_vector() {
        assert_eq!(
            sha256_hex(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }

    #[test]
    fn sub_seeds_are_pure_and_distinct() {
        assert_eq!(sub_seed(1, "walk", 3), sub_seed(1, "walk", 3));
        let seeds = [
            sub_seed(1, "walk", 3),
            sub_seed(2, "walk", 3),
            sub_seed(1, "tubes", 3),
            sub_seed(1, "walk", 4),
        ];
        for i in 0..seeds.len() {
            for j in i + 1..seeds.len() {
                assert_ne!(seeds[i], seeds[j]);
            }
        }
    }

    #[test]
    fn manifest_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let mut out = Outputs::default();
        out.add("a.csv", "x,y\n1,2\n");
        out.add("b.txt", "hello\n");
        let sums = out.write_all(dir.path()).unwrap();
        let m = RunManifest {
            experiment: "percolate".into(),
            config_echo: "d = 3\n".into(),
            version: "0",
            started: 1,
            finished: 2,
            checksums: sums.clone(),
        };
        m.write(dir.path()).unwrap();
        let text = std::fs::read_to_string(dir.path().join(MANIFEST)).unwrap();
        assert_eq!(parse_checksums(&text), sums);
        assert!(verify(dir.path()).unwrap().is_empty());
        std::fs::write(dir.path().join("b.txt"), "tampered\n").unwrap();
        assert_eq!(verify(dir.path()).unwrap(), vec!["b.txt".to_string()]);
    }

    #[test]
    #[should_panic(expected = "written twice")]
    fn duplicate_output_panics() {
        let mut out = Outputs::default();
        out.add("a.csv", "");
        out.add("a.csv", "");
    }
}
