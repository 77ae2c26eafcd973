//! Nonmonotone convergence of the pure added-damping iteration.
//!
//! Iterates `eps_k = alpha_d L_d eps_{k-1}` from `eps_0(s) = s^2` and records
//! the curves together with the `H^1` norm ratios `||eps_k|| / ||eps_0||`.

use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::output;
use crate::volterra::{
    GridFunction, OperatorConfig, VolterraError, VolterraOperators, DEFAULT_NODES,
};

#[derive(Debug, Error)]
pub enum Figure3Error {
    #[error("at least one alpha_d value is required")]
    NoValues,
    #[error("alpha_d = {0} must be finite")]
    AlphaD(f64),
    #[error(transparent)]
    Volterra(#[from] VolterraError),
    #[error("output: {0}")]
    Csv(#[from] csv::Error),
    #[error("output: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Figure3Spec {
    pub alpha_d: Vec<f64>,
    pub omega: f64,
    pub n: usize,
    pub k_max: usize,
}

impl Default for Figure3Spec {
    fn default() -> Self {
        Figure3Spec {
            alpha_d: vec![2.0, 5.0],
            omega: 1.0,
            n: DEFAULT_NODES,
            k_max: 10,
        }
    }
}

/// Iterates and norm ratios for one `alpha_d`.
#[derive(Debug, Clone, PartialEq)]
pub struct Figure3Series {
    pub alpha_d: f64,
    pub iterates: Vec<GridFunction<f64>>,
    pub ratios: Vec<f64>,
}

impl Figure3Series {
    /// Index of the largest norm ratio.
    pub fn peak(&self) -> usize {
        self.ratios
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |(bi, bv), (i, &v)| {
                if v > bv {
                    (i, v)
                } else {
                    (bi, bv)
                }
            })
            .0
    }

    pub fn is_strictly_decreasing(&self) -> bool {
        self.ratios.windows(2).all(|w| w[1] < w[0])
    }
}

pub fn compute(spec: &Figure3Spec) -> Result<Vec<Figure3Series>, Figure3Error> {
    if spec.alpha_d.is_empty() {
        return Err(Figure3Error::NoValues);
    }
    if let Some(&a) = spec.alpha_d.iter().find(|a| !a.is_finite()) {
        return Err(Figure3Error::AlphaD(a));
    }
    let ops = VolterraOperators::new(OperatorConfig::new(spec.omega, spec.n)?);
    let eps0 = GridFunction::from_fn(spec.n, |s: f64| s * s)?;
    spec.alpha_d
        .iter()
        .map(|&alpha_d| {
            let iterates = ops.apply_mixture(0.0, alpha_d, &eps0, spec.k_max)?;
            let ratios = ops.norm_history(0.0, alpha_d, &eps0, spec.k_max)?;
            Ok(Figure3Series {
                alpha_d,
                iterates,
                ratios,
            })
        })
        .collect()
}

/// File name of the curve table for one `alpha_d`.
pub fn curves_file_name(alpha_d: f64) -> String {
    format!("figure3_curves_alpha_d_{alpha_d}.csv")
}

pub const RATIOS_FILE: &str = "figure3_norm_ratios.csv";

/// Writes one curve table per series (`s, eps_0, ..., eps_kmax`) and the table
/// of `log10` norm ratios (`k, alpha_d=<a>, ...`).
pub fn write(series: &[Figure3Series], dir: &Path) -> Result<Vec<PathBuf>, Figure3Error> {
    let mut written = Vec::new();
    for sr in series {
        let path = dir.join(curves_file_name(sr.alpha_d));
        let mut wtr = csv::Writer::from_writer(output::create(&path)?);
        let mut header = vec!["s".to_string()];
        header.extend((0..sr.iterates.len()).map(|k| format!("eps_{k}")));
        wtr.write_record(&header)?;
        let nodes: Vec<f64> = sr.iterates[0].nodes().collect();
        for (i, s) in nodes.iter().enumerate() {
            let mut row = vec![s.to_string()];
            row.extend(sr.iterates.iter().map(|e| e.values()[i].to_string()));
            wtr.write_record(&row)?;
        }
        wtr.flush()?;
        written.push(path);
    }
    let path = dir.join(RATIOS_FILE);
    let mut wtr = csv::Writer::from_writer(output::create(&path)?);
    let mut header = vec!["k".to_string()];
    header.extend(
        series
            .iter()
            .map(|s| format!("log10_ratio_alpha_d_{}", s.alpha_d)),
    );
    wtr.write_record(&header)?;
    let k_len = series.iter().map(|s| s.ratios.len()).max().unwrap_or(0);
    for k in 0..k_len {
        let mut row = vec![k.to_string()];
        row.extend(series.iter().map(|s| s.ratios[k].log10().to_string()));
        wtr.write_record(&row)?;
    }
    wtr.flush()?;
    written.push(path);
    Ok(written)
}
