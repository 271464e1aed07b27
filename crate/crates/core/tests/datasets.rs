//! Bundled dataset ingestion.

use std::path::PathBuf;

use mtgnn::chem::{parse_smiles_all, SmilesError};
use mtgnn::data::{filter_freesolv, load_dataset, BUNDLED};

fn data_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data")
}

#[test]
fn every_bundled_row_parses_or_fails_cleanly() {
    for (task, file) in BUNDLED {
        let text = std::fs::read_to_string(data_dir().join(file)).unwrap();
        let mut failures = 0;
        for line in text.lines().skip(1) {
            let smiles = line.rsplit_once(',').unwrap().0;
            match parse_smiles_all(smiles) {
                Ok(g) => {
                    let degree: usize = g.atoms.iter().map(|a| a.degree as usize).sum();
                    assert_eq!(degree, 2 * g.bonds.len());
                }
                Err(SmilesError::Syntax { .. } | SmilesError::Valence { .. }) => failures += 1,
            }
        }
        println!("{task}: {failures} rows rejected");
    }
}

#[test]
fn bundled_sizes() {
    let esol = load_dataset(&data_dir().join("esol.csv"), "esol").unwrap();
    assert_eq!(esol.report.rows_read, 1128);
    assert_eq!(esol.len() + esol.report.duplicates + esol.report.unparseable, 1128);

    let fs = load_dataset(&data_dir().join("freesolv.csv"), "freesolv").unwrap();
    let (filtered, removed) = filter_freesolv(&fs);
    assert!(filtered.entries.iter().all(|e| e.value >= -10.0));
    assert_eq!(removed, fs.entries.iter().filter(|e| e.value < -10.0).count());

    for (task, file) in BUNDLED {
        let d = load_dataset(&data_dir().join(file), task).unwrap();
        println!("{task}: {} molecules {:?}", d.len(), d.report);
    }
}
