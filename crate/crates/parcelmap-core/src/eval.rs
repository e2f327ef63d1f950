//! Accuracy assessment: confusion matrices with overall accuracy, kappa, and
//! per-class user/producer accuracy, plus stratified sampling of validation
//! parcels.
//!
//! Matrix layout: rows are predictions, columns are reference labels. Row
//! totals are therefore prediction totals (user's accuracy lives on rows) and
//! column totals are reference totals (producer's accuracy on columns).

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::SplitMix64;
use crate::scheme::{CategoryScheme, ClassId};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    classes: Vec<ClassId>,
    /// Row-major counts; counts[p * k + r] = pairs predicted p, reference r.
    counts: Vec<u64>,
}

/// Per-class accuracy pair; `None` marks an undefined value (empty row or
/// column), reported as "n/a" rather than zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassAccuracy {
    pub class: ClassId,
    pub user: Option<f64>,
    pub producer: Option<f64>,
}

/// Count (predicted, reference) pairs into a square matrix over `classes`.
pub fn build_confusion(
    pairs: &[(ClassId, ClassId)],
    classes: &[ClassId],
) -> Result<ConfusionMatrix> {
    let mut matrix = ConfusionMatrix::zero(classes)?;
    for &(pred, reference) in pairs {
        matrix.add(pred, reference, 1)?;
    }
    Ok(matrix)
}

impl ConfusionMatrix {
    pub fn zero(classes: &[ClassId]) -> Result<Self> {
        let mut sorted = classes.to_vec();
        sorted.dedup();
        if sorted.len() != classes.len() {
            return Err(Error::Eval("duplicate class in confusion matrix".into()));
        }
        if classes.is_empty() {
            return Err(Error::Eval("empty class set".into()));
        }
        Ok(Self { classes: classes.to_vec(), counts: vec![0; classes.len() * classes.len()] })
    }

    pub fn from_counts(classes: &[ClassId], counts: Vec<u64>) -> Result<Self> {
        let mut m = Self::zero(classes)?;
        if counts.len() != m.counts.len() {
            return Err(Error::Eval(format!(
                "count matrix size {} does not match {} classes",
                counts.len(),
                classes.len()
            )));
        }
        m.counts = counts;
        Ok(m)
    }

    pub fn add(&mut self, predicted: ClassId, reference: ClassId, n: u64) -> Result<()> {
        let p = self.position(predicted)?;
        let r = self.position(reference)?;
        self.counts[p * self.classes.len() + r] += n;
        Ok(())
    }

    fn position(&self, class: ClassId) -> Result<usize> {
        self.classes
            .iter()
            .position(|&c| c == class)
            .ok_or(Error::UnknownClass(class.0))
    }

    pub fn classes(&self) -> &[ClassId] {
        &self.classes
    }

    pub fn count(&self, predicted: usize, reference: usize) -> u64 {
        self.counts[predicted * self.classes.len() + reference]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn row_total(&self, predicted: usize) -> u64 {
        let k = self.classes.len();
        self.counts[predicted * k..(predicted + 1) * k].iter().sum()
    }

    pub fn col_total(&self, reference: usize) -> u64 {
        let k = self.classes.len();
        (0..k).map(|p| self.counts[p * k + reference]).sum()
    }

    /// Trace over total.
    pub fn overall_accuracy(&self) -> Result<f64> {
        let total = self.total();
        if total == 0 {
            return Err(Error::Eval("empty confusion matrix".into()));
        }
        let trace: u64 = (0..self.classes.len()).map(|i| self.count(i, i)).sum();
        Ok(trace as f64 / total as f64)
    }

    /// Cohen's kappa: (p_o - p_e) / (1 - p_e). When chance agreement p_e is 1
    /// the coefficient is defined as 1 for perfect agreement, else 0.
    pub fn kappa(&self) -> Result<f64> {
        let total = self.total();
        if total == 0 {
            return Err(Error::Eval("empty confusion matrix".into()));
        }
        let p_o = self.overall_accuracy()?;
        let t = total as f64;
        let p_e: f64 = (0..self.classes.len())
            .map(|i| (self.row_total(i) as f64 / t) * (self.col_total(i) as f64 / t))
            .sum();
        if p_e >= 1.0 {
            return Ok(if p_o >= 1.0 { 1.0 } else { 0.0 });
        }
        Ok((p_o - p_e) / (1.0 - p_e))
    }

    /// Per-class user accuracy (diagonal over prediction row) and producer
    /// accuracy (diagonal over reference column).
    pub fn user_producer_accuracy(&self) -> Vec<ClassAccuracy> {
        (0..self.classes.len())
            .map(|i| {
                let diag = self.count(i, i) as f64;
                let row = self.row_total(i);
                let col = self.col_total(i);
                ClassAccuracy {
                    class: self.classes[i],
                    user: (row > 0).then(|| diag / row as f64),
                    producer: (col > 0).then(|| diag / col as f64),
                }
            })
            .collect()
    }

    /// Unweighted mean producer accuracy over classes where it is defined.
    pub fn macro_producer_accuracy(&self) -> Option<f64> {
        let defined: Vec<f64> = self
            .user_producer_accuracy()
            .into_iter()
            .filter_map(|a| a.producer)
            .collect();
        (!defined.is_empty()).then(|| defined.iter().sum::<f64>() / defined.len() as f64)
    }

    /// Aligned plain-text table: class rows with totals and user accuracy,
    /// then reference totals, producer accuracy, and an OA/kappa footer.
    pub fn to_text(&self, scheme: &CategoryScheme) -> String {
        let k = self.classes.len();
        let code = |c: ClassId| {
            scheme
                .class(c)
                .map(|x| x.code.clone())
                .unwrap_or_else(|_| c.to_string())
        };
        let fmt_pct = |v: Option<f64>| match v {
            Some(x) => format!("{:.1}%", x * 100.0),
            None => "n/a".to_string(),
        };
        let acc = self.user_producer_accuracy();

        let mut head = vec!["pred\\ref".to_string()];
        head.extend(self.classes.iter().map(|&c| code(c)));
        head.push("Total".into());
        head.push("UA".into());
        let mut rows: Vec<Vec<String>> = vec![head];
        for (p, class_acc) in acc.iter().enumerate() {
            let mut row = vec![code(self.classes[p])];
            for r in 0..k {
                row.push(self.count(p, r).to_string());
            }
            row.push(self.row_total(p).to_string());
            row.push(fmt_pct(class_acc.user));
            rows.push(row);
        }
        let mut totals = vec!["Total".to_string()];
        for r in 0..k {
            totals.push(self.col_total(r).to_string());
        }
        totals.push(self.total().to_string());
        totals.push(String::new());
        rows.push(totals);
        let mut pa = vec!["PA".to_string()];
        for a in &acc {
            pa.push(fmt_pct(a.producer));
        }
        pa.push(String::new());
        pa.push(String::new());
        rows.push(pa);

        let widths: Vec<usize> = (0..rows[0].len())
            .map(|c| rows.iter().map(|r| r[c].len()).max().unwrap_or(0))
            .collect();
        let mut out = String::new();
        for row in &rows {
            let line: Vec<String> = row
                .iter()
                .enumerate()
                .map(|(c, cell)| format!("{:>width$}", cell, width = widths[c]))
                .collect();
            out.push_str(line.join("  ").trim_end());
            out.push('\n');
        }
        let oa = self.overall_accuracy().map(|v| format!("{v:.4}")).unwrap_or("n/a".into());
        let kp = self.kappa().map(|v| format!("{v:.4}")).unwrap_or("n/a".into());
        out.push_str(&format!("OA = {oa}  kappa = {kp}\n"));
        out
    }
}

/// Draw the requested number of parcels per stratum, uniformly without
/// replacement, with one seeded generator shared across strata in ascending
/// stratum order. Output is sorted by parcel id.
pub fn stratified_sample(
    parcels: &[(u32, ClassId)],
    requests: &BTreeMap<ClassId, usize>,
    seed: u64,
) -> Result<Vec<u32>> {
    let mut rng = SplitMix64::new(seed);
    let mut chosen: Vec<u32> = Vec::new();
    for (&stratum, &want) in requests {
        let mut ids: Vec<u32> = parcels
            .iter()
            .filter(|(_, s)| *s == stratum)
            .map(|(id, _)| *id)
            .collect();
        ids.sort_unstable();
        if want > ids.len() {
            return Err(Error::StratumTooSmall {
                stratum: stratum.to_string(),
                size: ids.len(),
                requested: want,
            });
        }
        for picked in rng.sample_indices(ids.len(), want) {
            chosen.push(ids[picked]);
        }
    }
    chosen.sort_unstable();
    Ok(chosen)
}
