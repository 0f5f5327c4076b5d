//! Per-feature signal-to-noise ratios and top-`m` selection.

use std::cmp::Ordering;
use std::collections::HashSet;
use std::io::Write;

use nalgebra::DVector;

use crate::error::{precondition, Result};
use crate::estimators::LowRankModel;
use crate::scalar::Real;

/// `snr[i] = sum_j W[i, j]^2 / psi[i]`.
pub fn compute_snr<T: Real>(model: &LowRankModel<T>) -> DVector<T> {
    model
        .signal_variances()
        .component_div(model.noise_variances())
}

/// SNR vector with the indices of the `m` largest entries.
#[derive(Debug, Clone, PartialEq)]
pub struct SnrRanking<T: Real> {
    snr: DVector<T>,
    selected: Vec<usize>,
}

impl<T: Real> SnrRanking<T> {
    /// Ranking with an explicit selection, e.g. one restored from disk.
    pub fn with_selection(snr: DVector<T>, mut selected: Vec<usize>) -> Result<Self> {
        selected.sort_unstable();
        selected.dedup();
        if selected.is_empty() || selected.last().is_some_and(|&i| i >= snr.len()) {
            return Err(precondition(format!(
                "selection must be a non-empty subset of 0..{}",
                snr.len()
            )));
        }
        Ok(Self { snr, selected })
    }

    pub fn snr(&self) -> &DVector<T> {
        &self.snr
    }

    /// Selected feature indices in ascending order.
    pub fn selected(&self) -> &[usize] {
        &self.selected
    }

    pub fn m(&self) -> usize {
        self.selected.len()
    }

    pub fn d(&self) -> usize {
        self.snr.len()
    }

    pub fn is_selected(&self, i: usize) -> bool {
        self.selected.binary_search(&i).is_ok()
    }

    /// Re-selects with a different `m` from the same SNR vector.
    pub fn reselect(&self, m: usize) -> Result<Self> {
        select_top_m(&self.snr, m)
    }

    /// CSV with columns `feature_index,snr,selected`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "feature_index,snr,selected")?;
        for i in 0..self.d() {
            writeln!(
                out,
                "{i},{:?},{}",
                self.snr[i].as_f64(),
                u8::from(self.is_selected(i))
            )?;
        }
        Ok(())
    }
}

/// Feature indices ordered by decreasing SNR; ties keep the lower index first.
pub fn rank_features<T: Real>(snr: &DVector<T>) -> Vec<usize> {
    let mut order: Vec<usize> = (0..snr.len()).collect();
    order.sort_by(|&a, &b| {
        snr[b]
            .partial_cmp(&snr[a])
            .unwrap_or(Ordering::Equal)
            .then(a.cmp(&b))
    });
    order
}

/// Keeps the `m` features with the largest SNR. At the threshold, lower
/// feature indices win so exactly `m` features are returned.
pub fn select_top_m<T: Real>(snr: &DVector<T>, m: usize) -> Result<SnrRanking<T>> {
    let d = snr.len();
    if m == 0 || m > d {
        return Err(precondition(format!("m = {m} must be in 1..={d}")));
    }
    let mut selected = rank_features(snr);
    selected.truncate(m);
    selected.sort_unstable();
    Ok(SnrRanking {
        snr: snr.clone(),
        selected,
    })
}

/// `|true ∩ pred| / |true|`.
pub fn recovery_accuracy(true_set: &[usize], pred_set: &[usize]) -> Result<f64> {
    if true_set.is_empty() {
        return Err(precondition("true feature set is empty"));
    }
    let truth: HashSet<usize> = true_set.iter().copied().collect();
    let pred: HashSet<usize> = pred_set.iter().copied().collect();
    Ok(truth.intersection(&pred).count() as f64 / truth.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimators::Estimator;
    use nalgebra::DMatrix;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn model(w: DMatrix<f64>, psi: Vec<f64>) -> LowRankModel<f64> {
        let d = w.nrows();
        LowRankModel::new(DVector::zeros(d), w, DVector::from_vec(psi), Estimator::Lfa).unwrap()
    }

    #[test]
    fn zero_row_has_zero_snr() {
        let m = model(
            DMatrix::from_row_slice(3, 1, &[0.0, 1.0, 2.0]),
            vec![5.0, 1.0, 1.0],
        );
        assert_eq!(compute_snr(&m)[0], 0.0);
    }

    #[test]
    fn hand_example() {
        let m = model(
            DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 2.0, 0.0, 0.0]),
            vec![1.0, 2.0, 1.0],
        );
        assert_eq!(compute_snr(&m).as_slice(), &[1.0, 2.0, 0.0]);
    }

    #[test]
    fn matches_double_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let (d, r) = (30, 4);
        let w = DMatrix::from_fn(d, r, |_, _| rng.random::<f64>() - 0.5);
        let psi: Vec<f64> = (0..d).map(|_| rng.random::<f64>() + 0.01).collect();
        let snr = compute_snr(&model(w.clone(), psi.clone()));
        for i in 0..d {
            let mut s = 0.0;
            for j in 0..r {
                s += w[(i, j)] * w[(i, j)];
            }
            assert!((s / psi[i] - snr[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn select_small() {
        let s = DVector::from_vec(vec![0.5, 3.0, 1.0]);
        assert_eq!(select_top_m(&s, 2).unwrap().selected(), &[1, 2]);
        assert_eq!(select_top_m(&s, 3).unwrap().selected(), &[0, 1, 2]);
        assert!(select_top_m(&s, 0).is_err());
        assert!(select_top_m(&s, 4).is_err());
    }

    #[test]
    fn ties_prefer_lower_index() {
        let s = DVector::from_vec(vec![1.0, 2.0, 1.0, 1.0]);
        assert_eq!(select_top_m(&s, 2).unwrap().selected(), &[0, 1]);
    }

    #[test]
    fn matches_full_sort() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let v: Vec<f64> = (0..1000).map(|_| rng.random()).collect();
        let sel = select_top_m(&DVector::from_vec(v.clone()), 100).unwrap();
        let mut sorted: Vec<(f64, usize)> = v.iter().copied().zip(0..).collect();
        sorted.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap());
        let mut expect: Vec<usize> = sorted[..100].iter().map(|p| p.1).collect();
        expect.sort_unstable();
        assert_eq!(sel.selected(), &expect[..]);
    }

    #[test]
    fn accuracy_counts() {
        let t: Vec<usize> = (0..10).collect();
        assert_eq!(recovery_accuracy(&t, &t).unwrap(), 1.0);
        assert_eq!(recovery_accuracy(&t, &[20, 30]).unwrap(), 0.0);
        let pred: Vec<usize> = (0..5).chain(50..55).collect();
        assert_eq!(recovery_accuracy(&t, &pred).unwrap(), 0.5);
        assert!(recovery_accuracy(&[], &pred).is_err());
    }

    #[test]
    fn csv_export() {
        let r = select_top_m(&DVector::from_vec(vec![0.5, 3.0]), 1).unwrap();
        let mut buf = Vec::new();
        r.write_csv(&mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "feature_index,snr,selected\n0,0.5,0\n1,3.0,1\n"
        );
    }

    proptest! {
        #[test]
        fn selections_are_nested(v in proptest::collection::vec(0u8..5, 2..40), m in 1usize..39) {
            let snr = DVector::from_iterator(v.len(), v.iter().map(|&x| x as f64));
            let m = m.min(v.len() - 1);
            let a = select_top_m(&snr, m).unwrap();
            let b = select_top_m(&snr, m + 1).unwrap();
            prop_assert!(a.selected().iter().all(|i| b.is_selected(*i)));
            let min_sel = a.selected().iter().map(|&i| snr[i]).fold(f64::INFINITY, f64::min);
            let max_unsel = (0..v.len()).filter(|i| !a.is_selected(*i)).map(|i| snr[i]).fold(f64::NEG_INFINITY, f64::max);
            prop_assert!(min_sel >= max_unsel);
        }

        #[test]
        fn scale_invariant(seed in any::<u64>(), c in 0.01f64..100.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let w = DMatrix::from_fn(6, 2, |_, _| rng.random::<f64>() - 0.5);
            let psi: Vec<f64> = (0..6).map(|_| rng.random::<f64>() + 0.1).collect();
            let base = compute_snr(&model(w.clone(), psi.clone()));
            let mut w2 = w;
            w2.row_mut(3).scale_mut(c);
            let mut psi2 = psi;
            psi2[3] *= c * c;
            let scaled = compute_snr(&model(w2, psi2));
            prop_assert!((scaled[3] - base[3]).abs() <= 1e-10 * base[3].max(1.0));
        }

        #[test]
        fn more_noise_less_snr(seed in any::<u64>(), bump in 0.01f64..10.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let w = DMatrix::from_fn(4, 2, |_, _| rng.random::<f64>() + 0.1);
            let psi = vec![1.0; 4];
            let base = compute_snr(&model(w.clone(), psi.clone()));
            let mut psi2 = psi;
            psi2[1] += bump;
            prop_assert!(compute_snr(&model(w, psi2))[1] < base[1]);
        }
    }
}
