use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{train, ClassicError, ClassifierSpec, Dataset, FeatureSubsample, ForestParams, MaxDepth, MlpParams};
use crate::evaluation::stratified_kfold;
use crate::rng;

/// Cartesian forest grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ForestGrid {
    pub n_trees: Vec<usize>,
    pub max_depth: Vec<MaxDepth>,
    pub min_leaf: Vec<usize>,
    pub feature_subsample: Vec<FeatureSubsample>,
}

impl Default for ForestGrid {
    fn default() -> Self {
        ForestGrid {
            n_trees: vec![100, 300],
            max_depth: vec![MaxDepth(None), MaxDepth(Some(10)), MaxDepth(Some(20))],
            min_leaf: vec![1],
            feature_subsample: vec![FeatureSubsample::Sqrt],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MlpGrid {
    pub hidden: Vec<Vec<usize>>,
    pub base: MlpParams,
}

impl Default for MlpGrid {
    fn default() -> Self {
        MlpGrid {
            hidden: vec![vec![50], vec![100]],
            base: MlpParams::default(),
        }
    }
}

/// A hyperparameter grid; expanded in declaration order, which is also the
/// tie-breaking order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Grid {
    Forest(ForestGrid),
    Mlp(MlpGrid),
    Points { points: Vec<ClassifierSpec> },
}

impl Grid {
    pub fn expand(&self) -> Vec<ClassifierSpec> {
        match self {
            Grid::Forest(g) => {
                let mut out = Vec::new();
                for &n_trees in &g.n_trees {
                    for &max_depth in &g.max_depth {
                        for &min_leaf in &g.min_leaf {
                            for &feature_subsample in &g.feature_subsample {
                                out.push(ClassifierSpec::Forest(ForestParams {
                                    n_trees,
                                    max_depth,
                                    min_leaf,
                                    feature_subsample,
                                    ..ForestParams::default()
                                }));
                            }
                        }
                    }
                }
                out
            }
            Grid::Mlp(g) => g
                .hidden
                .iter()
                .map(|h| {
                    ClassifierSpec::Mlp(MlpParams {
                        hidden: h.clone(),
                        ..g.base.clone()
                    })
                })
                .collect(),
            Grid::Points { points } => points.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridPoint {
    pub spec: ClassifierSpec,
    pub fold_accuracy: Vec<f64>,
    pub mean_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridResult {
    pub points: Vec<GridPoint>,
    pub best: usize,
}

impl GridResult {
    pub fn best_spec(&self) -> &ClassifierSpec {
        &self.points[self.best].spec
    }
}

/// Scores every grid point by stratified k-fold accuracy on `data`. The
/// highest mean wins; ties go to the earlier point. Points run in parallel,
/// each with seeds derived from `seed` and the fold index only.
pub fn grid_search(data: &Dataset, grid: &[ClassifierSpec], k: usize, seed: u64) -> Result<GridResult, ClassicError> {
    if grid.is_empty() {
        return Err(ClassicError::EmptyGrid);
    }
    let folds = stratified_kfold(&data.y, k, seed)?;
    let points = grid
        .par_iter()
        .map(|spec| {
            let fold_accuracy = folds
                .iter()
                .enumerate()
                .map(|(f, test)| {
                    let train_idx: Vec<usize> = folds
                        .iter()
                        .enumerate()
                        .filter(|(g, _)| *g != f)
                        .flat_map(|(_, v)| v.iter().copied())
                        .collect();
                    let model = train(&spec.with_seed(rng::derive(seed, &[f as u64])), &data.subset(&train_idx))?;
                    let rows: Vec<Vec<f64>> = test.iter().map(|&i| data.x[i].clone()).collect();
                    let preds = model.predict_rows(&rows);
                    let ok = preds.iter().zip(test).filter(|(p, &i)| p.label == data.y[i]).count();
                    Ok(ok as f64 / test.len() as f64)
                })
                .collect::<Result<Vec<f64>, ClassicError>>()?;
            let mean_accuracy = fold_accuracy.iter().sum::<f64>() / fold_accuracy.len() as f64;
            Ok(GridPoint {
                spec: spec.clone(),
                fold_accuracy,
                mean_accuracy,
            })
        })
        .collect::<Result<Vec<_>, ClassicError>>()?;
    let mut best = 0;
    for (i, p) in points.iter().enumerate() {
        if p.mean_accuracy > points[best].mean_accuracy {
            best = i;
        }
    }
    Ok(GridResult { points, best })
}

#[cfg(test)]
mod tests {
    use super::super::testdata::*;
    use super::*;

    fn forest(depth: Option<usize>) -> ClassifierSpec {
        ClassifierSpec::Forest(ForestParams {
            n_trees: 5,
            max_depth: MaxDepth(depth),
            ..Default::default()
        })
    }

    #[test]
    fn single_point() {
        let d = separable(40, 1);
        let r = grid_search(&d, &[forest(Some(3))], 3, 0).unwrap();
        assert_eq!(r.best, 0);
        assert_eq!(r.points[0].fold_accuracy.len(), 3);
    }

    #[test]
    fn deeper_trees_win_on_checkerboard() {
        // 4x4 checkerboard: depth 1 cannot beat chance, depth 8 fits it
        let mut x = Vec::new();
        let mut y = Vec::new();
        for i in 0..24 {
            for j in 0..24 {
                let (a, b) = (i as f64 / 24.0, j as f64 / 24.0);
                x.push(vec![a, b]);
                y.push(((a * 4.0) as usize + (b * 4.0) as usize) % 2);
            }
        }
        let d = dataset(x, y, 2);
        let r = grid_search(&d, &[forest(Some(1)), forest(Some(8))], 5, 3).unwrap();
        assert_eq!(r.best, 1);
        assert!(r.points[1].mean_accuracy > 0.9);
        assert!(r.points[0].mean_accuracy < 0.7);
    }

    #[test]
    fn ties_keep_first() {
        let d = separable(40, 2);
        let same = ClassifierSpec::Dummy { seed: 0 };
        let r = grid_search(&d, &[same.clone(), same], 4, 1).unwrap();
        assert_eq!(r.points[0].mean_accuracy, r.points[1].mean_accuracy);
        assert_eq!(r.best, 0);
    }

    #[test]
    fn default_grids_expand() {
        assert_eq!(Grid::Forest(ForestGrid::default()).expand().len(), 6);
        assert_eq!(Grid::Mlp(MlpGrid::default()).expand().len(), 2);
        let g: Grid = toml::from_str("kind = \"forest\"\nn_trees = [10]\nmax_depth = [\"none\", 4]\n").unwrap();
        assert_eq!(g.expand().len(), 2);
    }
}
