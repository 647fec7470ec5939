//! Confusion matrices and the accuracy / macro F1 / weighted F1 report.

use std::fmt::Write as _;

use crate::error::{Error, Result};

/// Rows are actual classes, columns predicted classes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfusionMatrix {
    classes: usize,
    counts: Vec<u64>,
}

impl ConfusionMatrix {
    pub fn new(classes: usize) -> Self {
        ConfusionMatrix {
            classes,
            counts: vec![0; classes * classes],
        }
    }

    /// Row-major square matrix.
    pub fn from_rows(rows: &[Vec<u64>]) -> Result<Self> {
        let k = rows.len();
        if rows.iter().any(|r| r.len() != k) {
            return Err(Error::usage("confusion matrix must be square"));
        }
        Ok(ConfusionMatrix {
            classes: k,
            counts: rows.concat(),
        })
    }

    pub fn from_predictions(classes: usize, actual: &[usize], predicted: &[usize]) -> Result<Self> {
        if actual.len() != predicted.len() {
            return Err(Error::usage("actual and predicted label counts differ"));
        }
        let mut m = ConfusionMatrix::new(classes);
        for (&a, &p) in actual.iter().zip(predicted) {
            m.add(a, p)?;
        }
        Ok(m)
    }

    pub fn add(&mut self, actual: usize, predicted: usize) -> Result<()> {
        if actual >= self.classes || predicted >= self.classes {
            return Err(Error::usage(format!(
                "label pair ({actual}, {predicted}) outside {} classes",
                self.classes
            )));
        }
        self.counts[actual * self.classes + predicted] += 1;
        Ok(())
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn get(&self, actual: usize, predicted: usize) -> u64 {
        self.counts[actual * self.classes + predicted]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.classes).map(|i| self.get(i, i)).sum()
    }

    pub fn row_sum(&self, i: usize) -> u64 {
        (0..self.classes).map(|j| self.get(i, j)).sum()
    }

    pub fn col_sum(&self, j: usize) -> u64 {
        (0..self.classes).map(|i| self.get(i, j)).sum()
    }

    /// Raw counts with a header row of class names.
    pub fn to_csv(&self, names: &[String]) -> String {
        let mut s = String::from("actual\\predicted");
        for j in 0..self.classes {
            write!(s, ",{}", class_name(names, j)).unwrap();
        }
        s.push('\n');
        for i in 0..self.classes {
            s.push_str(&class_name(names, i));
            for j in 0..self.classes {
                write!(s, ",{}", self.get(i, j)).unwrap();
            }
            s.push('\n');
        }
        s
    }
}

fn class_name(names: &[String], i: usize) -> String {
    names.get(i).cloned().unwrap_or_else(|| i.to_string())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub matrix: ConfusionMatrix,
    /// Fraction in [0, 1].
    pub accuracy: f64,
    pub macro_f1: f64,
    pub weighted_f1: f64,
    pub per_class: Vec<ClassMetrics>,
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

impl EvalReport {
    /// Classes with neither predictions nor samples get F1 = 0 and still count
    /// towards the macro average.
    pub fn from_matrix(matrix: ConfusionMatrix) -> Result<Self> {
        let total = matrix.total();
        if matrix.classes() == 0 || total == 0 {
            return Err(Error::usage("cannot compute metrics of an empty confusion matrix"));
        }
        let per_class: Vec<ClassMetrics> = (0..matrix.classes())
            .map(|c| {
                let tp = matrix.get(c, c);
                let support = matrix.row_sum(c);
                let predicted = matrix.col_sum(c);
                ClassMetrics {
                    precision: ratio(tp, predicted),
                    recall: ratio(tp, support),
                    f1: ratio(2 * tp, support + predicted),
                    support,
                }
            })
            .collect();
        let k = per_class.len() as f64;
        let macro_f1 = per_class.iter().map(|m| m.f1).sum::<f64>() / k;
        let weighted_f1 = per_class.iter().map(|m| m.f1 * m.support as f64).sum::<f64>() / total as f64;
        Ok(EvalReport {
            accuracy: ratio(matrix.trace(), total),
            matrix,
            macro_f1,
            weighted_f1,
            per_class,
        })
    }

    pub fn from_predictions(classes: usize, actual: &[usize], predicted: &[usize]) -> Result<Self> {
        Self::from_matrix(ConfusionMatrix::from_predictions(classes, actual, predicted)?)
    }

    /// `key = value` lines followed by a per-class table.
    pub fn to_text(&self, names: &[String]) -> String {
        let mut s = String::new();
        writeln!(s, "samples = {}", self.matrix.total()).unwrap();
        writeln!(s, "acc = {:.2}", 100.0 * self.accuracy).unwrap();
        writeln!(s, "mf1 = {:.4}", self.macro_f1).unwrap();
        writeln!(s, "wf1 = {:.4}", self.weighted_f1).unwrap();
        writeln!(s).unwrap();
        writeln!(s, "{:<24} {:>9} {:>9} {:>9} {:>8}", "class", "precision", "recall", "f1", "support").unwrap();
        for (c, m) in self.per_class.iter().enumerate() {
            writeln!(
                s,
                "{:<24} {:>9.4} {:>9.4} {:>9.4} {:>8}",
                class_name(names, c),
                m.precision,
                m.recall,
                m.f1,
                m.support
            )
            .unwrap();
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_diagonal() {
        let r = EvalReport::from_predictions(3, &[0, 1, 2, 2], &[0, 1, 2, 2]).unwrap();
        assert_eq!(r.accuracy, 1.0);
        assert_eq!(r.macro_f1, 1.0);
        assert_eq!(r.weighted_f1, 1.0);
    }

    #[test]
    fn single_class_answer_halves_macro_f1() {
        let actual: Vec<usize> = (0..100).map(|i| usize::from(i >= 90)).collect();
        let r = EvalReport::from_predictions(2, &actual, &[0; 100]).unwrap();
        assert!((r.accuracy - 0.9).abs() < 1e-12);
        assert!((r.macro_f1 - (2.0 * 90.0 / 190.0) / 2.0).abs() < 1e-12);
        assert_eq!(r.per_class[1].f1, 0.0);
    }

    #[test]
    fn empty_and_bad_inputs() {
        assert!(matches!(EvalReport::from_matrix(ConfusionMatrix::new(0)), Err(Error::Usage(_))));
        assert!(matches!(EvalReport::from_matrix(ConfusionMatrix::new(2)), Err(Error::Usage(_))));
        assert!(ConfusionMatrix::from_rows(&[vec![1, 2], vec![3]]).is_err());
        assert!(ConfusionMatrix::new(2).add(2, 0).is_err());
    }

    #[test]
    fn csv_has_raw_counts() {
        let m = ConfusionMatrix::from_rows(&[vec![5, 1], vec![0, 7]]).unwrap();
        let names = vec!["a".to_string(), "b".to_string()];
        assert_eq!(m.to_csv(&names), "actual\\predicted,a,b\na,5,1\nb,0,7\n");
    }
}
