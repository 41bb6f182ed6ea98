//! Resume bookkeeping: which stages of a case already produced artifacts.

use std::io;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const CHECKPOINT_FILE: &str = "checkpoint.json";

/// Stage ledger for one case directory. The digests pin the inputs: a
/// checkpoint only resumes a run over the identical schema and table,
/// otherwise the case restarts from scratch.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub schema_sha256: String,
    pub table_sha256: String,
    pub completed: Vec<String>,
}

impl Checkpoint {
    pub fn for_inputs<S: Serialize, T: Serialize>(schema: &S, table: &T) -> Checkpoint {
        Checkpoint {
            schema_sha256: sha256_json(schema),
            table_sha256: sha256_json(table),
            completed: Vec::new(),
        }
    }

    /// Loads the checkpoint from a case directory; any unreadable or
    /// unparseable file counts as no checkpoint.
    pub fn load(dir: &Path) -> Option<Checkpoint> {
        let bytes = std::fs::read(dir.join(CHECKPOINT_FILE)).ok()?;
        serde_json::from_slice(&bytes).ok()
    }

    pub fn save(&self, dir: &Path) -> io::Result<()> {
        let mut bytes = serde_json::to_vec_pretty(self).expect("checkpoint serializes");
        bytes.push(b'\n');
        std::fs::write(dir.join(CHECKPOINT_FILE), bytes)
    }

    pub fn same_inputs(&self, other: &Checkpoint) -> bool {
        self.schema_sha256 == other.schema_sha256 && self.table_sha256 == other.table_sha256
    }

    pub fn done(&self, stage: &str) -> bool {
        self.completed.iter().any(|s| s == stage)
    }

    pub fn mark(&mut self, stage: &str, dir: &Path) -> io::Result<()> {
        if !self.done(stage) {
            self.completed.push(stage.to_string());
        }
        self.save(dir)
    }
}

/// Hex SHA-256 of a value's canonical JSON bytes.
pub fn sha256_json<T: Serialize>(value: &T) -> String {
    let bytes = serde_json::to_vec(value).expect("value serializes");
    let digest = Sha256::digest(&bytes);
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trips_through_the_case_directory() {
        let dir = tempfile::tempdir().unwrap();
        let mut cp = Checkpoint::for_inputs(&"schema", &"table");
        cp.mark("annotation", dir.path()).unwrap();
        cp.mark("evidence", dir.path()).unwrap();
        let loaded = Checkpoint::load(dir.path()).unwrap();
        assert_eq!(loaded, cp);
        assert!(loaded.done("annotation"));
        assert!(!loaded.done("plan"));
    }

    #[test]
    fn different_inputs_do_not_resume() {
        let a = Checkpoint::for_inputs(&"schema", &"table");
        let b = Checkpoint::for_inputs(&"schema", &"other table");
        assert!(!a.same_inputs(&b));
        assert!(a.same_inputs(&a.clone()));
    }

    #[test]
    fn missing_or_corrupt_file_loads_as_none() {
        let dir = tempfile::tempdir().unwrap();
        assert!(Checkpoint::load(dir.path()).is_none());
        std::fs::write(dir.path().join(CHECKPOINT_FILE), "not json").unwrap();
        assert!(Checkpoint::load(dir.path()).is_none());
    }

    #[test]
    fn digest_is_stable_and_input_sensitive() {
        let a = sha256_json(&serde_json::json!({"k": 1}));
        let b = sha256_json(&serde_json::json!({"k": 1}));
        let c = sha256_json(&serde_json::json!({"k": 2}));
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_eq!(a.len(), 64);
    }

    #[test]
    fn mark_is_idempotent() {
        let dir = tempfile::tempdir().unwrap();
        let mut cp = Checkpoint::for_inputs(&1, &2);
        cp.mark("plan", dir.path()).unwrap();
        cp.mark("plan", dir.path()).unwrap();
        assert_eq!(cp.completed, vec!["plan"]);
    }
}
