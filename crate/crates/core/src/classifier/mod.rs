//! Minimum-Mahalanobis-distance classification over per-class low-rank
//! models restricted to each class's selected features.
//!
//! Each class scores only its own selected coordinates, so classes can be
//! added or removed without touching the others.

mod score;
mod store;

use nalgebra::{DMatrix, DVector};

use crate::error::{precondition, Error, Result};
use crate::estimators::LowRankModel;
use crate::linalg::thin_svd;
use crate::scalar::Real;
use crate::snr::SnrRanking;

pub use score::{general_r_score, mahalanobis_direct, r_score};
pub use store::{
    model_file_name, read_bank, read_manifest, write_bank, write_predictions, BankManifest,
    ManifestEntry, MANIFEST_FILE,
};

/// Whitened spectral factors of `psi_S^{-1/2} Sigma_S psi_S^{-1/2} - I`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralFactors<T: Real> {
    /// Restricted mean `mu_S`.
    pub mean: DVector<T>,
    /// Restricted noise variances `psi_S`.
    pub psi: DVector<T>,
    /// `L'`, `m x k` with orthonormal columns, `k = min(m, r)`.
    pub basis: DMatrix<T>,
    /// `D'`, squared singular values of `psi_S^{-1/2} W_S`.
    pub spectrum: DVector<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassModel<T: Real> {
    class_id: u32,
    model: LowRankModel<T>,
    ranking: SnrRanking<T>,
    spectral: SpectralFactors<T>,
}

impl<T: Real> ClassModel<T> {
    /// Restricts the model to the selected features and caches the whitened
    /// factors from the thin SVD of `psi_S^{-1/2} W_S`.
    pub fn build(class_id: u32, model: LowRankModel<T>, ranking: SnrRanking<T>) -> Result<Self> {
        if ranking.d() != model.d() {
            return Err(precondition(format!(
                "ranking covers {} features, model has {}",
                ranking.d(),
                model.d()
            )));
        }
        let sel = ranking.selected();
        let mean = DVector::from_iterator(sel.len(), sel.iter().map(|&i| model.mean()[i]));
        let psi =
            DVector::from_iterator(sel.len(), sel.iter().map(|&i| model.noise_variances()[i]));
        let mut whitened = model.loadings().select_rows(sel.iter());
        for (row_idx, mut row) in whitened.row_iter_mut().enumerate() {
            row /= psi[row_idx].sqrt();
        }
        let svd = thin_svd(&whitened)?;
        let spectral = SpectralFactors {
            mean,
            psi,
            basis: svd.u,
            spectrum: svd.s.map(|s| s * s),
        };
        Ok(Self {
            class_id,
            model,
            ranking,
            spectral,
        })
    }

    pub fn class_id(&self) -> u32 {
        self.class_id
    }

    pub fn model(&self) -> &LowRankModel<T> {
        &self.model
    }

    pub fn ranking(&self) -> &SnrRanking<T> {
        &self.ranking
    }

    pub fn spectral(&self) -> &SpectralFactors<T> {
        &self.spectral
    }

    pub fn m(&self) -> usize {
        self.ranking.m()
    }

    /// Model covariance on the selected features, `W_S W_S^T + psi_S`.
    pub fn restricted_covariance(&self) -> DMatrix<T> {
        let sel = self.ranking.selected();
        let w = self.model.loadings().select_rows(sel.iter());
        let mut c = &w * w.transpose();
        for k in 0..sel.len() {
            c[(k, k)] += self.spectral.psi[k];
        }
        c
    }

    /// Selected coordinates of a full-length observation.
    pub fn gather(&self, x: &DVector<T>) -> DVector<T> {
        let sel = self.ranking.selected();
        DVector::from_iterator(sel.len(), sel.iter().map(|&i| x[i]))
    }

    /// Mahalanobis distance of `x` (full dimension `d`) to this class.
    pub fn score(&self, x: &DVector<T>) -> Result<T> {
        if x.len() != self.model.d() {
            return Err(precondition(format!(
                "observation has {} features, class {} expects {}",
                x.len(),
                self.class_id,
                self.model.d()
            )));
        }
        let s = &self.spectral;
        let sel = self.ranking.selected();
        let z = DVector::from_iterator(
            sel.len(),
            sel.iter()
                .enumerate()
                .map(|(k, &i)| (x[i] - s.mean[k]) / s.psi[k].sqrt()),
        );
        Ok(score::r_score_unchecked(
            &z,
            &s.basis,
            &s.spectrum,
            T::one(),
        ))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction<T: Real> {
    pub class_id: u32,
    /// `(class_id, score)` for every class in bank order.
    pub scores: Vec<(u32, T)>,
}

/// Per-class models ordered by class id.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassifierBank<T: Real> {
    classes: Vec<ClassModel<T>>,
}

impl<T: Real> Default for ClassifierBank<T> {
    fn default() -> Self {
        Self {
            classes: Vec::new(),
        }
    }
}

impl<T: Real> ClassifierBank<T> {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_classes(classes: impl IntoIterator<Item = ClassModel<T>>) -> Result<Self> {
        let mut bank = Self::new();
        for c in classes {
            bank.add_class(c)?;
        }
        Ok(bank)
    }

    pub fn classes(&self) -> &[ClassModel<T>] {
        &self.classes
    }

    pub fn len(&self) -> usize {
        self.classes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.classes.is_empty()
    }

    pub fn d(&self) -> Option<usize> {
        self.classes.first().map(|c| c.model.d())
    }

    pub fn get(&self, class_id: u32) -> Option<&ClassModel<T>> {
        self.position(class_id).ok().map(|i| &self.classes[i])
    }

    fn position(&self, class_id: u32) -> std::result::Result<usize, usize> {
        self.classes.binary_search_by_key(&class_id, |c| c.class_id)
    }

    pub fn add_class(&mut self, class: ClassModel<T>) -> Result<()> {
        if let Some(d) = self.d() {
            if class.model.d() != d {
                return Err(precondition(format!(
                    "class {} has {} features, bank has {d}",
                    class.class_id,
                    class.model.d()
                )));
            }
        }
        match self.position(class.class_id) {
            Ok(_) => Err(Error::DuplicateClass(class.class_id)),
            Err(at) => {
                self.classes.insert(at, class);
                Ok(())
            }
        }
    }

    pub fn remove_class(&mut self, class_id: u32) -> Result<ClassModel<T>> {
        match self.position(class_id) {
            Ok(at) => Ok(self.classes.remove(at)),
            Err(_) => Err(Error::UnknownClass(class_id)),
        }
    }

    /// Class with the smallest score; ties go to the lowest class id.
    pub fn predict(&self, x: &DVector<T>) -> Result<Prediction<T>> {
        if self.classes.is_empty() {
            return Err(precondition("classifier bank is empty"));
        }
        let scores = self
            .classes
            .iter()
            .map(|c| c.score(x).map(|s| (c.class_id, s)))
            .collect::<Result<Vec<_>>>()?;
        let mut best = scores[0];
        for &(id, s) in &scores[1..] {
            if s < best.1 {
                best = (id, s);
            }
        }
        Ok(Prediction {
            class_id: best.0,
            scores,
        })
    }

    /// Predicts every row of an `n x d` matrix.
    pub fn predict_rows(&self, x: &DMatrix<T>) -> Result<Vec<Prediction<T>>> {
        (0..x.nrows())
            .map(|i| self.predict(&x.row(i).transpose()))
            .collect()
    }
}
