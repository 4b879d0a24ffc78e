//! Accuracy, confusion matrices and per-class precision/recall.

use std::fmt::Write as _;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct EvalResult {
    pub accuracy: f64,
    /// Counts indexed `[gold][pred]`.
    pub confusion: Vec<Vec<usize>>,
    /// `None` for a class that was never predicted.
    pub precision: Vec<Option<f64>>,
    /// `None` for a class with no gold documents.
    pub recall: Vec<Option<f64>>,
    pub count: usize,
}

pub fn evaluate(predictions: &[usize], golds: &[usize], num_classes: usize) -> Result<EvalResult> {
    if predictions.len() != golds.len() {
        return Err(Error::Shape(format!(
            "{} predictions for {} gold labels",
            predictions.len(),
            golds.len()
        )));
    }
    if predictions.is_empty() || num_classes == 0 {
        return Err(Error::Shape("nothing to evaluate".into()));
    }
    let mut confusion = vec![vec![0usize; num_classes]; num_classes];
    for (i, (&p, &g)) in predictions.iter().zip(golds).enumerate() {
        if p >= num_classes || g >= num_classes {
            return Err(Error::Shape(format!(
                "entry {i}: class index out of range for {num_classes} classes"
            )));
        }
        confusion[g][p] += 1;
    }
    let count = predictions.len();
    let correct: usize = (0..num_classes).map(|c| confusion[c][c]).sum();
    let ratio = |num: usize, den: usize| (den > 0).then(|| num as f64 / den as f64);
    let precision = (0..num_classes)
        .map(|c| ratio(confusion[c][c], (0..num_classes).map(|g| confusion[g][c]).sum()))
        .collect();
    let recall = (0..num_classes)
        .map(|c| ratio(confusion[c][c], confusion[c].iter().sum()))
        .collect();
    Ok(EvalResult {
        accuracy: correct as f64 / count as f64,
        confusion,
        precision,
        recall,
        count,
    })
}

impl EvalResult {
    pub fn num_classes(&self) -> usize {
        self.confusion.len()
    }

    /// `key=value` lines: overall figures first, then one line per class.
    pub fn to_records(&self) -> String {
        let fmt = |v: Option<f64>| v.map_or_else(|| "nan".to_string(), |x| format!("{x:.6}"));
        let mut out = format!("count={} accuracy={:.6}\n", self.count, self.accuracy);
        for c in 0..self.num_classes() {
            let _ = writeln!(
                out,
                "class={c} precision={} recall={} support={}",
                fmt(self.precision[c]),
                fmt(self.recall[c]),
                self.confusion[c].iter().sum::<usize>()
            );
        }
        out
    }

    /// Plain-text confusion table, gold classes as rows.
    pub fn confusion_table(&self) -> String {
        let l = self.num_classes();
        let width = self
            .confusion
            .iter()
            .flatten()
            .map(|n| n.to_string().len())
            .chain([format!("p{}", l - 1).len()])
            .max()
            .unwrap_or(1);
        let mut out = format!("{:>width$}", "gold\\pred", width = width.max(9));
        for p in 0..l {
            let _ = write!(out, " {:>width$}", format!("p{p}"));
        }
        out.push('\n');
        for (g, row) in self.confusion.iter().enumerate() {
            let _ = write!(out, "{:>width$}", format!("g{g}"), width = width.max(9));
            for n in row {
                let _ = write!(out, " {n:>width$}");
            }
            out.push('\n');
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn identity_is_perfect() {
        let r = evaluate(&[0, 1, 2, 1], &[0, 1, 2, 1], 3).unwrap();
        assert_eq!(r.accuracy, 1.0);
        assert_eq!(r.confusion, vec![vec![1, 0, 0], vec![0, 2, 0], vec![0, 0, 1]]);
        assert!(r.precision.iter().all(|p| *p == Some(1.0)));
    }

    #[test]
    fn confusion_is_gold_by_pred() {
        let r = evaluate(&[0, 0], &[0, 1], 2).unwrap();
        assert_eq!(r.accuracy, 0.5);
        assert_eq!(r.confusion, vec![vec![1, 0], vec![1, 0]]);
        assert_eq!(r.precision, vec![Some(0.5), None]);
        assert_eq!(r.recall, vec![Some(1.0), Some(0.0)]);
    }

    #[test]
    fn shape_errors() {
        assert!(matches!(evaluate(&[0], &[0, 1], 2), Err(Error::Shape(_))));
        assert!(matches!(evaluate(&[], &[], 2), Err(Error::Shape(_))));
        assert!(matches!(evaluate(&[2], &[0], 2), Err(Error::Shape(_))));
    }

    #[test]
    fn random_labels_near_chance() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let p: Vec<usize> = (0..10_000).map(|_| rng.gen_range(0..4)).collect();
        let g: Vec<usize> = (0..10_000).map(|_| rng.gen_range(0..4)).collect();
        let r = evaluate(&p, &g, 4).unwrap();
        assert!((r.accuracy - 0.25).abs() <= 0.02, "{}", r.accuracy);
    }

    #[test]
    fn report_formats() {
        let r = evaluate(&[0, 0], &[0, 1], 2).unwrap();
        let rec = r.to_records();
        assert!(rec.starts_with("count=2 accuracy=0.500000\n"));
        assert!(rec.contains("class=1 precision=nan recall=0.000000 support=1"));
        let table = r.confusion_table();
        assert_eq!(table.lines().count(), 3);
        assert!(table.lines().nth(2).unwrap().trim_start().starts_with("g1"));
    }

    proptest! {
        #[test]
        fn counts_and_relabeling(
            pairs in proptest::collection::vec((0usize..4, 0usize..4), 1..60),
            perm in Just(vec![0usize, 1, 2, 3]).prop_shuffle(),
        ) {
            let (p, g): (Vec<usize>, Vec<usize>) = pairs.iter().copied().unzip();
            let r = evaluate(&p, &g, 4).unwrap();
            let total: usize = r.confusion.iter().flatten().sum();
            prop_assert_eq!(total, r.count);
            let trace: usize = (0..4).map(|c| r.confusion[c][c]).sum();
            prop_assert_eq!(r.accuracy, trace as f64 / r.count as f64);
            for c in 0..4 {
                let support = g.iter().filter(|&&x| x == c).count();
                prop_assert_eq!(r.confusion[c].iter().sum::<usize>(), support);
            }
            let pp: Vec<usize> = p.iter().map(|&x| perm[x]).collect();
            let gp: Vec<usize> = g.iter().map(|&x| perm[x]).collect();
            prop_assert_eq!(evaluate(&pp, &gp, 4).unwrap().accuracy, r.accuracy);
        }
    }
}
