use rand::seq::SliceRandom;
use thiserror::Error;

use crate::rng;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum FoldError {
    #[error("k must be at least 2, got {0}")]
    BadK(usize),
    #[error("class {class} has {count} instances, fewer than k = {k}")]
    ClassTooSmall { class: usize, count: usize, k: usize },
}

/// Splits row indices into `k` disjoint folds that preserve class
/// proportions. Each class's rows are shuffled with a stream derived from
/// `seed` and the class, then dealt round-robin; the starting fold rotates
/// from class to class so fold sizes stay within one of each other. Fold
/// contents are sorted.
pub fn stratified_kfold(labels: &[usize], k: usize, seed: u64) -> Result<Vec<Vec<usize>>, FoldError> {
    if k < 2 {
        return Err(FoldError::BadK(k));
    }
    let n_classes = labels.iter().copied().max().map_or(0, |m| m + 1);
    let mut by_class = vec![Vec::new(); n_classes];
    for (i, &y) in labels.iter().enumerate() {
        by_class[y].push(i);
    }
    for (class, rows) in by_class.iter().enumerate() {
        if !rows.is_empty() && rows.len() < k {
            return Err(FoldError::ClassTooSmall {
                class,
                count: rows.len(),
                k,
            });
        }
    }
    let mut folds = vec![Vec::new(); k];
    let mut offset = 0;
    for (class, mut rows) in by_class.into_iter().enumerate() {
        rows.shuffle(&mut rng::stream(seed, &[class as u64]));
        for (j, i) in rows.iter().enumerate() {
            folds[(offset + j) % k].push(*i);
        }
        offset = (offset + rows.len()) % k;
    }
    folds.iter_mut().for_each(|f| f.sort_unstable());
    Ok(folds)
}

/// Training rows for fold `f`: every row not in it, ascending.
pub fn train_indices(folds: &[Vec<usize>], f: usize) -> Vec<usize> {
    let mut v: Vec<usize> = folds
        .iter()
        .enumerate()
        .filter(|(g, _)| *g != f)
        .flat_map(|(_, v)| v.iter().copied())
        .collect();
    v.sort_unstable();
    v
}

#[cfg(test)]
mod tests {
    use super::*;

    fn per_class(folds: &[Vec<usize>], labels: &[usize], c: usize) -> Vec<usize> {
        folds.iter().map(|f| f.iter().filter(|&&i| labels[i] == c).count()).collect()
    }

    #[test]
    fn exact_division() {
        let labels: Vec<usize> = (0..20).map(|i| i / 10).collect();
        let f = stratified_kfold(&labels, 5, 1).unwrap();
        for c in 0..2 {
            assert_eq!(per_class(&f, &labels, c), vec![2; 5]);
        }
    }

    #[test]
    fn eleven_of_one_class() {
        let labels = vec![0; 11];
        let f = stratified_kfold(&labels, 5, 1).unwrap();
        assert_eq!(per_class(&f, &labels, 0), vec![3, 2, 2, 2, 2]);
    }

    #[test]
    fn too_small_class() {
        let labels = vec![0, 0, 0, 0, 0, 1, 1, 1, 1];
        assert_eq!(
            stratified_kfold(&labels, 5, 0).unwrap_err(),
            FoldError::ClassTooSmall { class: 1, count: 4, k: 5 }
        );
    }

    #[test]
    fn partition_and_determinism() {
        let labels: Vec<usize> = (0..37).map(|i| i % 3).collect();
        let f = stratified_kfold(&labels, 4, 9).unwrap();
        let mut all: Vec<usize> = f.concat();
        all.sort_unstable();
        assert_eq!(all, (0..37).collect::<Vec<_>>());
        assert_eq!(f, stratified_kfold(&labels, 4, 9).unwrap());
        assert_ne!(f, stratified_kfold(&labels, 4, 10).unwrap());
        assert_eq!(train_indices(&f, 0).len() + f[0].len(), 37);
    }
}
