//! Versioned binary checkpoints and CSV benchmark reports.

use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const MAGIC: &[u8; 8] = b"FACTANN\0";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Envelope<T> {
    version: u32,
    kind: String,
    model: T,
}

/// `kind` names the model type and is checked on load.
pub fn save_checkpoint<T: Serialize>(path: impl AsRef<Path>, kind: &str, model: &T) -> Result<()> {
    let env = Envelope {
        version: CHECKPOINT_VERSION,
        kind: kind.to_string(),
        model,
    };
    let mut bytes = MAGIC.to_vec();
    bincode::serialize_into(&mut bytes, &env).map_err(|e| Error::Checkpoint(e.to_string()))?;
    fs::write(path, bytes)?;
    Ok(())
}

pub fn load_checkpoint<T: DeserializeOwned>(path: impl AsRef<Path>, kind: &str) -> Result<T> {
    let bytes = fs::read(path)?;
    let body = bytes
        .strip_prefix(MAGIC.as_slice())
        .ok_or_else(|| Error::Checkpoint("not a model checkpoint".into()))?;
    let env: Envelope<T> = bincode::deserialize(body).map_err(|e| Error::Checkpoint(e.to_string()))?;
    if env.version != CHECKPOINT_VERSION {
        return Err(Error::Checkpoint(format!(
            "version {}, expected {CHECKPOINT_VERSION}",
            env.version
        )));
    }
    if env.kind != kind {
        return Err(Error::Checkpoint(format!("holds a {} model, expected {kind}", env.kind)));
    }
    Ok(env.model)
}

/// One row of a benchmark table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub name: String,
    pub examples: usize,
    pub loss: f64,
    pub accuracy: f64,
}

/// CSV with a header; `first` names the first column (type or variant).
pub fn report_csv(first: &str, rows: &[ReportRow]) -> String {
    let mut out = format!("{first},examples,loss,accuracy\n");
    for r in rows {
        out.push_str(&format!("{},{},{:.3},{:.3}\n", r.name, r.examples, r.loss, r.accuracy));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dense::Mlp;

    #[test]
    fn round_trip_and_kind_check() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.bin");
        let m = Mlp::new(4, &[3], 2, 9);
        save_checkpoint(&path, "mlp", &m).unwrap();
        assert_eq!(load_checkpoint::<Mlp>(&path, "mlp").unwrap(), m);
        assert!(matches!(load_checkpoint::<Mlp>(&path, "gnn"), Err(Error::Checkpoint(_))));
        fs::write(&path, b"junk").unwrap();
        assert!(load_checkpoint::<Mlp>(&path, "mlp").is_err());
    }

    #[test]
    fn csv_shape() {
        let rows = [ReportRow { name: "ENTENT".into(), examples: 20, loss: 0.0771, accuracy: 0.98751 }];
        assert_eq!(report_csv("type", &rows), "type,examples,loss,accuracy\nENTENT,20,0.077,0.988\n");
    }
}
