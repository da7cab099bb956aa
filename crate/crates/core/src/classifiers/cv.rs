use std::collections::HashMap;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::dtw::{self, DtwParams};
use crate::error::{Error, Result};
use crate::evaluation::ConfusionCounts;
use crate::history::{LossCurve, OverfitLabel};
use crate::seed;

use super::{
    check_training_labels, fit_prepared, knn, CanonicalLen, ClassifierParams, ClassifierSpec,
    Normalization,
};

pub const N_FOLDS: usize = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateScore {
    pub spec: ClassifierSpec,
    /// Macro F-score of each held-out fold.
    pub fold_f: Vec<f64>,
    pub mean_f: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub seed: u64,
    pub candidates: Vec<CandidateScore>,
    /// Index into `candidates` of the selected configuration.
    pub chosen: usize,
    /// Fold id of every training example, in input order.
    pub folds: Vec<usize>,
}

impl CvReport {
    pub fn best(&self) -> &CandidateScore {
        &self.candidates[self.chosen]
    }
}

/// Stratified assignment of examples to `N_FOLDS` folds. Within each class
/// the examples are shuffled by a seeded stream and dealt round-robin.
pub fn stratified_folds(labels: &[OverfitLabel], seed: u64) -> Result<Vec<usize>> {
    let mut folds = vec![0; labels.len()];
    for class in [OverfitLabel::Overfit, OverfitLabel::NonOverfit] {
        let mut members: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        if members.len() < N_FOLDS {
            return Err(Error::StratificationError {
                class: class.as_str(),
                count: members.len(),
                needed: N_FOLDS,
            });
        }
        let mut rng = seed::substream(seed, &format!("cv-folds-{}", class.as_str()));
        members.shuffle(&mut rng);
        for (pos, i) in members.into_iter().enumerate() {
            folds[i] = pos % N_FOLDS;
        }
    }
    Ok(folds)
}

type PrepKey = (CanonicalLen, Normalization);

/// Evaluates every candidate with stratified 3-fold cross-validation and
/// picks the highest mean macro F; ties go to the earliest candidate.
pub fn grid_search_cv(
    grid: &[ClassifierSpec],
    data: &[(LossCurve, OverfitLabel)],
    seed: u64,
) -> Result<CvReport> {
    if grid.is_empty() {
        return Err(Error::ConfigError("empty hyperparameter grid".into()));
    }
    check_training_labels(data)?;
    let labels: Vec<OverfitLabel> = data.iter().map(|(_, l)| *l).collect();
    let folds = stratified_folds(&labels, seed)?;

    let mut prepared: HashMap<PrepKey, Vec<Vec<f64>>> = HashMap::new();
    let mut distances: HashMap<(PrepKey, DtwParams), Vec<Vec<f64>>> = HashMap::new();

    let mut candidates = Vec::with_capacity(grid.len());
    for spec in grid {
        let key = (spec.canonical_len, spec.normalization);
        if let std::collections::hash_map::Entry::Vacant(e) = prepared.entry(key) {
            let pre = spec.preprocessor();
            let xs = data
                .iter()
                .map(|(c, _)| pre.apply(c))
                .collect::<Result<Vec<_>>>()?;
            e.insert(xs);
        }
        let xs = &prepared[&key];

        let mut fold_f = Vec::with_capacity(N_FOLDS);
        for fold in 0..N_FOLDS {
            let train: Vec<usize> = (0..data.len()).filter(|&i| folds[i] != fold).collect();
            let test: Vec<usize> = (0..data.len()).filter(|&i| folds[i] == fold).collect();
            spec.validate(train.len())?;

            let predicted: Vec<OverfitLabel> = match &spec.params {
                ClassifierParams::KnnDtw(p) => {
                    let matrix = match distances.entry((key, p.dtw)) {
                        std::collections::hash_map::Entry::Occupied(e) => e.into_mut(),
                        std::collections::hash_map::Entry::Vacant(e) => {
                            e.insert(cross_fold_distances(xs, &folds, &p.dtw)?)
                        }
                    };
                    test.iter()
                        .map(|&q| {
                            let neighbours =
                                train.iter().map(|&t| (matrix[q][t], labels[t])).collect();
                            knn::vote(neighbours, p.k).label
                        })
                        .collect()
                }
                _ => {
                    let model = fit_prepared(
                        spec,
                        train.iter().map(|&i| xs[i].clone()).collect(),
                        train.iter().map(|&i| labels[i]).collect(),
                    )?;
                    test.iter()
                        .map(|&q| model.predict_prepared(&xs[q]).map(|p| p.label))
                        .collect::<Result<_>>()?
                }
            };
            let truth = test.iter().map(|&i| labels[i]);
            let counts = ConfusionCounts::from_pairs(truth.zip(predicted.iter().copied()));
            fold_f.push(counts.macro_f());
        }
        let mean_f = fold_f.iter().sum::<f64>() / fold_f.len() as f64;
        candidates.push(CandidateScore {
            spec: spec.clone(),
            fold_f,
            mean_f,
        });
    }

    let mut chosen = 0;
    for (i, c) in candidates.iter().enumerate() {
        if c.mean_f > candidates[chosen].mean_f {
            chosen = i;
        }
    }
    Ok(CvReport {
        seed,
        candidates,
        chosen,
        folds,
    })
}

/// `matrix[q][t]` = distance from query `q` to training curve `t`, filled only
/// for pairs in different folds.
fn cross_fold_distances(xs: &[Vec<f64>], folds: &[usize], params: &DtwParams) -> Result<Vec<Vec<f64>>> {
    let n = xs.len();
    let mut matrix = vec![vec![f64::NAN; n]; n];
    for q in 0..n {
        for t in 0..n {
            if folds[q] != folds[t] {
                matrix[q][t] = dtw::distance(&xs[q], &xs[t], params)?;
            }
        }
    }
    Ok(matrix)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classifiers::{fit, KnnDtwParams};

    fn toy_data() -> Vec<(LossCurve, OverfitLabel)> {
        (0..12)
            .map(|i| {
                let overfit = i % 2 == 0;
                let values: Vec<f64> = (0..30)
                    .map(|t| {
                        let t = t as f64;
                        let base = (-t / 8.0).exp();
                        if overfit && t > 15.0 {
                            base + 0.03 * (t - 15.0) + 0.001 * i as f64
                        } else {
                            base + 0.001 * i as f64
                        }
                    })
                    .collect();
                let label = if overfit {
                    OverfitLabel::Overfit
                } else {
                    OverfitLabel::NonOverfit
                };
                (LossCurve::from_values(values).unwrap(), label)
            })
            .collect()
    }

    fn knn(k: usize) -> ClassifierSpec {
        ClassifierSpec::new(ClassifierParams::KnnDtw(KnnDtwParams {
            k,
            dtw: DtwParams::fast(5),
        }))
        .with_canonical_len(CanonicalLen::Fixed(30))
    }

    #[test]
    fn folds_are_stratified_and_reproducible() {
        let labels: Vec<OverfitLabel> = toy_data().into_iter().map(|(_, l)| l).collect();
        let a = stratified_folds(&labels, 11).unwrap();
        assert_eq!(a, stratified_folds(&labels, 11).unwrap());
        for fold in 0..N_FOLDS {
            let over = (0..labels.len())
                .filter(|&i| a[i] == fold && labels[i].is_overfit())
                .count();
            assert_eq!(over, 2);
        }
    }

    #[test]
    fn too_few_examples_per_class() {
        let mut data = toy_data();
        data.retain(|(_, l)| !l.is_overfit());
        data.extend(toy_data().into_iter().filter(|(_, l)| l.is_overfit()).take(2));
        assert!(matches!(
            grid_search_cv(&[knn(1)], &data, 0),
            Err(Error::StratificationError { class: "overfit", count: 2, .. })
        ));
    }

    #[test]
    fn singleton_and_duplicate_grids() {
        let data = toy_data();
        let report = grid_search_cv(&[knn(3)], &data, 5).unwrap();
        assert_eq!(report.chosen, 0);
        let report = grid_search_cv(&[knn(1), knn(1), knn(1)], &data, 5).unwrap();
        assert_eq!(report.chosen, 0);
        assert_eq!(report.candidates[0].mean_f, report.candidates[2].mean_f);
    }

    #[test]
    fn cached_knn_matches_explicit_fit() {
        let data = toy_data();
        let spec = knn(3);
        let report = grid_search_cv(std::slice::from_ref(&spec), &data, 2).unwrap();
        for fold in 0..N_FOLDS {
            let train: Vec<_> = (0..data.len())
                .filter(|&i| report.folds[i] != fold)
                .map(|i| data[i].clone())
                .collect();
            let model = fit(&spec, &train).unwrap();
            let pairs = (0..data.len())
                .filter(|&i| report.folds[i] == fold)
                .map(|i| (data[i].1, model.predict(&data[i].0).unwrap().label));
            let f = ConfusionCounts::from_pairs(pairs).macro_f();
            assert_eq!(f, report.candidates[0].fold_f[fold]);
        }
    }
}
