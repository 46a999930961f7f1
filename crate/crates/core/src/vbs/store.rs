use std::path::Path;

use super::VbsStore;
use crate::error::{Error, Result};

/// Writes `store` as pretty JSON.
pub fn save_store(store: &VbsStore, path: &Path) -> Result<()> {
    let text = serde_json::to_string_pretty(store).map_err(|e| Error::json(path, e))?;
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Reads and validates a store.
pub fn load_store(path: &Path) -> Result<VbsStore> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let store: VbsStore = serde_json::from_str(&text).map_err(|e| Error::json(path, e))?;
    store.validate().map_err(|(field, msg)| Error::invalid(path, &field, msg))?;
    Ok(store)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::Vec3;
    use crate::vbs::{CoverageGrid, VbsRecord};

    fn minimal() -> VbsStore {
        let bs = Vec3::new(1.0, 2.0, 3.0);
        VbsStore {
            bs_location: bs,
            records: vec![
                VbsRecord::bs(bs),
                VbsRecord { order: 1, index: 1, location: Vec3::new(1.0, 2.0, -3.0), triangle_ids: [4, 5].into() },
            ],
            grid: CoverageGrid { dx: 2, dy: 1, bounds: [0.0, 0.0, 2.0, 1.0], ue_height: 1.5, cells: vec![vec![0, 1], vec![]] },
        }
    }

    #[test]
    fn round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("vbs.json");
        let s = minimal();
        save_store(&s, &path).unwrap();
        assert_eq!(load_store(&path).unwrap(), s);
    }

    #[test]
    fn truncated_file_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("vbs.json");
        save_store(&minimal(), &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        std::fs::write(&path, &text[..text.len() / 2]).unwrap();
        assert!(matches!(load_store(&path), Err(Error::Parse { .. })));
        assert!(matches!(load_store(&dir.path().join("missing.json")), Err(Error::Io { .. })));
    }

    #[test]
    fn invalid_store_names_field() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("vbs.json");
        let mut s = minimal();
        s.grid.cells[1].push(7);
        save_store(&s, &path).unwrap();
        match load_store(&path) {
            Err(Error::Invalid { field, .. }) => assert_eq!(field, "grid.cells[1]"),
            other => panic!("unexpected {other:?}"),
        }
        let mut s = minimal();
        s.grid.cells.pop();
        save_store(&s, &path).unwrap();
        assert!(load_store(&path).is_err());
    }
}
