use serde::Serialize;

use super::{fingerprint, ExperimentError, ExperimentReport, Summary};
use crate::gnn::Model;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct WeightHistogram {
    pub label: String,
    pub layer: String,
    /// `bins + 1` edges spanning `[min, max]`.
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
    pub mean: f64,
    /// Population standard deviation.
    pub std: f64,
    pub min: f64,
    pub max: f64,
}

impl WeightHistogram {
    pub fn total(&self) -> usize {
        self.counts.iter().sum()
    }

    /// `bin_lo,bin_hi,count`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("bin_lo,bin_hi,count\n");
        for (i, c) in self.counts.iter().enumerate() {
            out.push_str(&format!("{},{},{}\n", self.edges[i], self.edges[i + 1], c));
        }
        out
    }
}

/// Accepts a full parameter name or a head layer shorthand such as `fc1`.
pub fn resolve_layer(model: &Model, layer: &str) -> Result<String, ExperimentError> {
    if model.param(layer).is_some() {
        return Ok(layer.to_string());
    }
    let long = format!("head.{layer}.weight");
    if model.param(&long).is_some() {
        return Ok(long);
    }
    Err(ExperimentError::UnknownLayer(layer.to_string()))
}

pub fn weight_histogram(
    model: &Model,
    label: &str,
    layer: &str,
    bins: usize,
) -> Result<WeightHistogram, ExperimentError> {
    if bins == 0 {
        return Err(ExperimentError::Invalid("bins must be at least 1".into()));
    }
    let name = resolve_layer(model, layer)?;
    let w = model.param(&name).expect("resolved").value.data();
    let n = w.len() as f64;
    let mean = w.iter().sum::<f64>() / n;
    let std = (w.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n).sqrt();
    let min = w.iter().copied().fold(f64::INFINITY, f64::min);
    let max = w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let width = (max - min) / bins as f64;
    let edges: Vec<f64> = (0..=bins)
        .map(|i| if i == bins { max } else { min + width * i as f64 })
        .collect();
    let mut counts = vec![0; bins];
    for &v in w {
        let i = if width > 0.0 {
            (((v - min) / width) as usize).min(bins - 1)
        } else {
            0
        };
        counts[i] += 1;
    }
    Ok(WeightHistogram {
        label: label.to_string(),
        layer: name,
        edges,
        counts,
        mean,
        std,
        min,
        max,
    })
}

/// One histogram per labelled model; artifacts are `fig5_<label>.csv` and
/// `weights_summary.csv`.
pub fn export_weight_histograms(
    models: &[(String, &Model)],
    layer: &str,
    bins: usize,
) -> Result<(ExperimentReport, Vec<WeightHistogram>), ExperimentError> {
    let mut report = ExperimentReport::new("weight-histograms", fingerprint(&(layer, bins)));
    let mut hists = Vec::new();
    let mut summary = String::from("label,layer,count,mean,std,min,max\n");
    for (label, model) in models {
        let h = weight_histogram(model, label, layer, bins)?;
        summary.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            h.label,
            h.layer,
            h.total(),
            h.mean,
            h.std,
            h.min,
            h.max
        ));
        report.push(label, &h.layer, "std", Summary::new(vec![h.std], vec![]));
        report.files.insert(format!("fig5_{label}.csv"), h.to_csv());
        hists.push(h);
    }
    report.files.insert("weights_summary.csv".into(), summary);
    Ok((report, hists))
}
