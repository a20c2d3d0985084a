//! Per-class accuracy, confusion matrices, repeat statistics and timing.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::data::{ClassId, ZslDataset};
use crate::error::{Error, Result};
use crate::io::fmt_f64;
use crate::pipeline::{train, FusionWeights, TrainOptions};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub fit_seconds: f64,
    pub test_total_ms: f64,
    pub per_image_ms: f64,
    pub test_instances: usize,
    pub repeats: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    /// Class ids in confusion-matrix order.
    pub classes: Vec<ClassId>,
    /// `confusion[t][p]` counts instances of `classes[t]` predicted as
    /// `classes[p]`.
    pub confusion: Vec<Vec<usize>>,
    pub per_class_accuracy: Vec<f64>,
    pub mean_per_class_top1: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub std_over_repeats: Option<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub repeat_accuracies: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timing: Option<Timing>,
}

impl EvaluationReport {
    pub fn total(&self) -> usize {
        self.confusion.iter().flatten().sum()
    }

    /// Records repeated-run accuracies; the headline mean becomes their
    /// average.
    pub fn with_repeats(mut self, accuracies: Vec<f64>) -> Result<Self> {
        let (mean, std) = aggregate_repeats(&accuracies)?;
        self.mean_per_class_top1 = mean;
        self.std_over_repeats = Some(std);
        self.repeat_accuracies = accuracies;
        Ok(self)
    }

    /// The confusion matrix as CSV with class names labelling rows (true
    /// class) and columns (predicted class).
    pub fn confusion_csv(&self, class_names: &[String]) -> String {
        let name = |c: ClassId| class_names.get(c).cloned().unwrap_or_else(|| c.to_string());
        let mut out = String::from("true\\predicted");
        for &c in &self.classes {
            out.push(',');
            out.push_str(&name(c));
        }
        out.push('\n');
        for (t, row) in self.confusion.iter().enumerate() {
            out.push_str(&name(self.classes[t]));
            for count in row {
                out.push_str(&format!(",{count}"));
            }
            out.push('\n');
        }
        out
    }

    pub fn summary(&self) -> String {
        match self.std_over_repeats {
            Some(std) => format!(
                "mean per-class top-1 accuracy {} ± {} over {} repeats",
                fmt_f64(self.mean_per_class_top1),
                fmt_f64(std),
                self.repeat_accuracies.len()
            ),
            None => format!("mean per-class top-1 accuracy {}", fmt_f64(self.mean_per_class_top1)),
        }
    }
}

/// Scores predictions against the truth with per-class (macro) averaging.
pub fn evaluate(predicted: &[ClassId], truth: &[ClassId], classes: &[ClassId]) -> Result<EvaluationReport> {
    if predicted.len() != truth.len() {
        return Err(Error::mismatch("evaluate", truth.len(), predicted.len()));
    }
    let index_of = |c: ClassId, what: &str| {
        classes
            .iter()
            .position(|&k| k == c)
            .ok_or_else(|| Error::InvalidInput(format!("{what} class {c} is not among the evaluated classes")))
    };
    let n = classes.len();
    let mut confusion = vec![vec![0usize; n]; n];
    for (&p, &t) in predicted.iter().zip(truth) {
        confusion[index_of(t, "true")?][index_of(p, "predicted")?] += 1;
    }
    let per_class_accuracy = confusion
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let total: usize = row.iter().sum();
            if total == 0 {
                return Err(Error::InvalidInput(format!(
                    "class {} has no test instances",
                    classes[i]
                )));
            }
            Ok(row[i] as f64 / total as f64)
        })
        .collect::<Result<Vec<_>>>()?;
    let mean_per_class_top1 = per_class_accuracy.iter().sum::<f64>() / n as f64;
    Ok(EvaluationReport {
        classes: classes.to_vec(),
        confusion,
        per_class_accuracy,
        mean_per_class_top1,
        std_over_repeats: None,
        repeat_accuracies: Vec::new(),
        timing: None,
    })
}

/// Mean and sample standard deviation (`n − 1` denominator, 0 for a single
/// value).
pub fn aggregate_repeats(values: &[f64]) -> Result<(f64, f64)> {
    if values.is_empty() {
        return Err(Error::InvalidInput("no repeat values to aggregate".into()));
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() == 1 {
        return Ok((mean, 0.0));
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    Ok((mean, var.sqrt()))
}

/// Times `repeats` full fits on the seen classes and inference over every
/// unseen instance.
pub fn benchmark(
    dataset: &ZslDataset,
    selection: &[usize],
    opts: &TrainOptions,
    weights: &FusionWeights,
    repeats: usize,
) -> Result<Timing> {
    if repeats == 0 {
        return Err(Error::InvalidInput("repeats must be >= 1".into()));
    }
    let instances = dataset.instances_of(dataset.unseen());
    let mut fit_seconds = 0.0;
    let mut test_ms = 0.0;
    for _ in 0..repeats {
        let start = Instant::now();
        let model = train(dataset, selection, opts)?;
        fit_seconds += start.elapsed().as_secs_f64();

        let start = Instant::now();
        let predictions = model.predict_instances(dataset, &instances, weights)?;
        test_ms += start.elapsed().as_secs_f64() * 1e3;
        std::hint::black_box(predictions);
    }
    let r = repeats as f64;
    let test_total_ms = test_ms / r;
    Ok(Timing {
        fit_seconds: fit_seconds / r,
        test_total_ms,
        per_image_ms: test_total_ms / instances.len() as f64,
        test_instances: instances.len(),
        repeats,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_correct() {
        let truth = [3, 3, 5, 7];
        let report = evaluate(&truth, &truth, &[3, 5, 7]).unwrap();
        assert_eq!(report.mean_per_class_top1, 1.0);
        assert_eq!(report.confusion, vec![vec![2, 0, 0], vec![0, 1, 0], vec![0, 0, 1]]);
    }

    #[test]
    fn macro_not_micro() {
        let truth = [0, 0, 1, 1, 1];
        let predicted = [0, 0, 0, 0, 0];
        let report = evaluate(&predicted, &truth, &[0, 1]).unwrap();
        assert_eq!(report.per_class_accuracy, vec![1.0, 0.0]);
        assert_eq!(report.mean_per_class_top1, 0.5);
        assert_eq!(report.total(), 5);
    }

    #[test]
    fn rejects_foreign_labels() {
        assert!(evaluate(&[0], &[9], &[0, 1]).is_err());
        assert!(evaluate(&[9], &[0], &[0, 1]).is_err());
        assert!(evaluate(&[0], &[0, 1], &[0, 1]).is_err());
        assert!(evaluate(&[0], &[0], &[0, 1]).is_err());
    }

    #[test]
    fn repeat_statistics() {
        assert_eq!(aggregate_repeats(&[0.8]).unwrap(), (0.8, 0.0));
        let (m, s) = aggregate_repeats(&[0.7, 0.9]).unwrap();
        assert!((m - 0.8).abs() < 1e-15);
        assert!((s - 0.14142135623730953).abs() < 1e-12);
        assert!(aggregate_repeats(&[]).is_err());
    }

    #[test]
    fn confusion_csv_layout() {
        let report = evaluate(&[1, 0, 1], &[0, 0, 1], &[0, 1]).unwrap();
        let names = vec!["cat".to_string(), "dog".to_string()];
        assert_eq!(
            report.confusion_csv(&names),
            "true\\predicted,cat,dog\ncat,1,1\ndog,0,1\n"
        );
    }
}
