//! CSV plot data.

use std::path::Path;

use serde::Serialize;

use crate::analysis::{ChshEstimate, SiReport};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepPoint {
    /// `β − α` in radians.
    pub delta: f64,
    pub n: u64,
    pub e: f64,
    pub se: f64,
    /// Quantum prediction at `delta` for the run's convention.
    pub quantum_e: f64,
}

pub enum PlotData<'a> {
    Si(&'a SiReport),
    Chsh(&'a ChshEstimate),
    Sweep(&'a [SweepPoint]),
}

/// `label,n,tv,chi_square,df,p_value`, one row per label.
pub fn si_rows_csv(report: &SiReport) -> String {
    let mut s = String::from("label,n,tv,chi_square,df,p_value\n");
    for r in &report.per_label {
        s.push_str(&format!("{},{},{},{},{},{}\n", r.label, r.n, r.tv, r.chi_square, r.df, r.p_value));
    }
    s
}

/// Four correlator rows and one `S` row.
pub fn chsh_csv(est: &ChshEstimate) -> String {
    let mut s = String::from("row,value,se,n\n");
    for c in &est.correlators {
        s.push_str(&format!("{},{},{},{}\n", c.label, c.e, c.se, c.n));
    }
    let n: u64 = est.correlators.iter().map(|c| c.n).sum();
    s.push_str(&format!("S,{},{},{}\n", est.s, est.s_se, n));
    s
}

pub fn sweep_csv(points: &[SweepPoint]) -> String {
    let mut s = String::from("delta_rad,delta_deg,n,e,se,quantum_e\n");
    for p in points {
        s.push_str(&format!(
            "{},{},{},{},{},{}\n",
            p.delta,
            p.delta.to_degrees(),
            p.n,
            p.e,
            p.se,
            p.quantum_e
        ));
    }
    s
}

pub fn emit_plot_data(data: PlotData<'_>, path: &Path) -> Result<()> {
    let text = match data {
        PlotData::Si(r) => si_rows_csv(r),
        PlotData::Chsh(e) => chsh_csv(e),
        PlotData::Sweep(p) => sweep_csv(p),
    };
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::{chsh_from_counts, OutcomeCounts};

    #[test]
    fn chsh_csv_has_five_rows() {
        let counts: OutcomeCounts = [[[10, 5, 5, 10]; 2]; 2];
        let csv = chsh_csv(&chsh_from_counts(&counts, 1).unwrap());
        let lines: Vec<_> = csv.lines().collect();
        assert_eq!(lines.len(), 6);
        assert!(lines[5].starts_with("S,"));
    }
}
