//! Bank directories and prediction CSVs.
//!
//! A bank directory holds one `class_<id>.snrm` model per class and a
//! `manifest.json` listing each class with its selected feature indices.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{ClassModel, ClassifierBank, Prediction};
use crate::error::{Error, Result};
use crate::estimators::{read_model, write_model};
use crate::scalar::Real;
use crate::snr::{compute_snr, SnrRanking};

pub const MANIFEST_FILE: &str = "manifest.json";
const MANIFEST_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub class_id: u32,
    pub file: String,
    pub m: usize,
    pub selected: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BankManifest {
    pub version: u32,
    pub tool_version: String,
    pub seed: Option<u64>,
    pub d: usize,
    pub classes: Vec<ManifestEntry>,
}

pub fn model_file_name(class_id: u32) -> String {
    format!("class_{class_id}.snrm")
}

/// Writes every class model plus the manifest into `dir`, creating it if needed.
pub fn write_bank<T: Real>(
    bank: &ClassifierBank<T>,
    dir: impl AsRef<Path>,
    seed: Option<u64>,
) -> Result<BankManifest> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;
    let mut classes = Vec::with_capacity(bank.len());
    for c in bank.classes() {
        let file = model_file_name(c.class_id());
        write_model(c.model(), dir.join(&file))?;
        classes.push(ManifestEntry {
            class_id: c.class_id(),
            file,
            m: c.m(),
            selected: c.ranking().selected().to_vec(),
        });
    }
    let manifest = BankManifest {
        version: MANIFEST_VERSION,
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        seed,
        d: bank.d().unwrap_or(0),
        classes,
    };
    let mut json = serde_json::to_vec_pretty(&manifest)?;
    json.push(b'\n');
    fs::write(dir.join(MANIFEST_FILE), json)?;
    Ok(manifest)
}

pub fn read_manifest(dir: impl AsRef<Path>) -> Result<BankManifest> {
    let manifest: BankManifest =
        serde_json::from_slice(&fs::read(dir.as_ref().join(MANIFEST_FILE))?)?;
    if manifest.version != MANIFEST_VERSION {
        return Err(Error::Format(format!(
            "unsupported manifest version {}",
            manifest.version
        )));
    }
    Ok(manifest)
}

pub fn read_bank<T: Real>(dir: impl AsRef<Path>) -> Result<ClassifierBank<T>> {
    let dir = dir.as_ref();
    let manifest = read_manifest(dir)?;
    let mut bank = ClassifierBank::new();
    for entry in &manifest.classes {
        let model = read_model::<T>(dir.join(&entry.file))?;
        if model.d() != manifest.d {
            return Err(Error::Format(format!(
                "{} has {} features, manifest says {}",
                entry.file,
                model.d(),
                manifest.d
            )));
        }
        let ranking = SnrRanking::with_selection(compute_snr(&model), entry.selected.clone())?;
        if ranking.m() != entry.m {
            return Err(Error::Format(format!(
                "class {}: m = {} but {} distinct indices selected",
                entry.class_id,
                entry.m,
                ranking.m()
            )));
        }
        bank.add_class(ClassModel::build(entry.class_id, model, ranking)?)?;
    }
    Ok(bank)
}

/// CSV with `row_index,predicted_class` and, if `scores`, one `score_<id>`
/// column per class.
pub fn write_predictions<T: Real, W: Write>(
    predictions: &[Prediction<T>],
    scores: bool,
    mut out: W,
) -> std::io::Result<()> {
    write!(out, "row_index,predicted_class")?;
    if scores {
        if let Some(first) = predictions.first() {
            for (id, _) in &first.scores {
                write!(out, ",score_{id}")?;
            }
        }
    }
    writeln!(out)?;
    for (i, p) in predictions.iter().enumerate() {
        write!(out, "{i},{}", p.class_id)?;
        if scores {
            for (_, s) in &p.scores {
                write!(out, ",{:?}", s.as_f64())?;
            }
        }
        writeln!(out)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimators::{Estimator, LowRankModel};
    use crate::snr::select_top_m;
    use nalgebra::{DMatrix, DVector};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn bank() -> ClassifierBank<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let classes = [4u32, 1, 9].map(|id| {
            let model = LowRankModel::new(
                DVector::from_fn(12, |_, _| rng.random::<f64>()),
                DMatrix::from_fn(12, 2, |_, _| rng.random::<f64>() - 0.5),
                DVector::from_fn(12, |_, _| rng.random::<f64>() + 0.2),
                Estimator::Elf,
            )
            .unwrap();
            let ranking = select_top_m(&compute_snr(&model), 3 + id as usize % 4).unwrap();
            ClassModel::build(id, model, ranking).unwrap()
        });
        ClassifierBank::from_classes(classes).unwrap()
    }

    #[test]
    fn round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let b = bank();
        let manifest = write_bank(&b, dir.path(), Some(5)).unwrap();
        assert_eq!(
            manifest
                .classes
                .iter()
                .map(|c| c.class_id)
                .collect::<Vec<_>>(),
            vec![1, 4, 9]
        );
        assert!(dir.path().join("class_4.snrm").exists());
        let back: ClassifierBank<f64> = read_bank(dir.path()).unwrap();
        assert_eq!(back, b);
    }

    #[test]
    fn rejects_bad_manifest() {
        let dir = tempfile::tempdir().unwrap();
        write_bank(&bank(), dir.path(), None).unwrap();
        let path = dir.path().join(MANIFEST_FILE);
        let text = fs::read_to_string(&path)
            .unwrap()
            .replace("\"d\": 12", "\"d\": 13");
        fs::write(&path, text).unwrap();
        assert!(read_bank::<f64>(dir.path()).is_err());
        fs::remove_file(&path).unwrap();
        assert!(read_bank::<f64>(dir.path()).is_err());
    }

    #[test]
    fn prediction_csv() {
        let p = vec![
            Prediction {
                class_id: 2,
                scores: vec![(1, 3.0), (2, 0.5)],
            },
            Prediction {
                class_id: 1,
                scores: vec![(1, 1.0), (2, 2.0)],
            },
        ];
        let mut buf = Vec::new();
        write_predictions(&p, false, &mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "row_index,predicted_class\n0,2\n1,1\n"
        );
        let mut buf = Vec::new();
        write_predictions(&p, true, &mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "row_index,predicted_class,score_1,score_2\n0,2,3.0,0.5\n1,1,1.0,2.0\n"
        );
    }
}
