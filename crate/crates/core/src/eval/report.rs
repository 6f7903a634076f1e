//! Human- and machine-readable summaries of an evaluation run.

use super::cv::CvOutcome;
use super::metrics::PcaSummary;
use super::SweepPoint;
use crate::error::{Error, Result};
use std::fmt::Write;

/// Summary of one protocol run, ready to print or export.
#[derive(Debug, Clone)]
pub struct EvalReport {
    pub protocol: String,
    pub joint_names: Vec<String>,
    pub outcome: CvOutcome,
    /// Echo of the configuration that produced the run.
    pub config_echo: String,
}

impl EvalReport {
    pub fn new(
        protocol: &str,
        joint_names: Vec<String>,
        outcome: CvOutcome,
        config_echo: String,
    ) -> Result<Self> {
        if joint_names.len() != outcome.predictions.ncols() {
            return Err(Error::ShapeMismatch(format!(
                "{} joint names for {} predicted joints",
                joint_names.len(),
                outcome.predictions.ncols()
            )));
        }
        Ok(Self { protocol: protocol.into(), joint_names, outcome, config_echo })
    }

    /// Mean pooled absolute error per finger, grouping joints by the name
    /// prefix before the first underscore.
    pub fn per_finger_abs(&self) -> Vec<(String, f64)> {
        let mut order: Vec<String> = Vec::new();
        let mut sums: std::collections::HashMap<String, (f64, usize)> = Default::default();
        for (name, &ae) in self.joint_names.iter().zip(&self.outcome.pooled_abs.per_joint) {
            let finger = name.split('_').next().unwrap_or(name).to_string();
            if !sums.contains_key(&finger) {
                order.push(finger.clone());
            }
            let e = sums.entry(finger).or_insert((0.0, 0));
            e.0 += ae;
            e.1 += 1;
        }
        order
            .into_iter()
            .map(|f| {
                let (s, n) = sums[&f];
                (f, s / n as f64)
            })
            .collect()
    }

    /// One row per fold: fold, subject, n_test, mean NMSE, mean abs error.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("fold,subject,n_test,nmse_mean,abs_error_mean_deg\n");
        for f in &self.outcome.folds {
            let _ = writeln!(
                s,
                "{},{},{},{:.6},{:.6}",
                f.fold, f.subject, f.n_test, f.nmse.mean, f.abs.mean
            );
        }
        s
    }

    /// One row per joint with pooled test-set metrics.
    pub fn per_joint_csv(&self) -> String {
        let mut s = String::from("joint,nmse,abs_error_deg\n");
        for (i, name) in self.joint_names.iter().enumerate() {
            let _ = writeln!(
                s,
                "{},{:.6},{:.6}",
                name,
                self.outcome.pooled_nmse.per_joint[i],
                self.outcome.pooled_abs.per_joint[i]
            );
        }
        s
    }

    pub fn to_human(&self) -> String {
        let o = &self.outcome;
        let (nm, ns) = o.nmse_mean_std();
        let (am, as_) = o.abs_mean_std();
        let mut s = String::new();
        let _ = writeln!(s, "protocol: {} ({} folds)", self.protocol, o.folds.len());
        let _ = writeln!(s, "NMSE is normalized by the test set's per-joint variance");
        let _ = writeln!(s, "NMSE  mean over folds: {nm:.4} +/- {ns:.4} (pooled {:.4})", o.pooled_nmse.mean);
        let _ = writeln!(s, "|err| mean over folds: {am:.3} +/- {as_:.3} deg (pooled {:.3})", o.pooled_abs.mean);
        if !o.pooled_nmse.excluded.is_empty() {
            let names: Vec<&str> = o
                .pooled_nmse
                .excluded
                .iter()
                .map(|&j| self.joint_names[j].as_str())
                .collect();
            let _ = writeln!(s, "excluded zero-variance joints: {}", names.join(", "));
        }
        let _ = writeln!(s, "per finger |err| (deg):");
        for (finger, ae) in self.per_finger_abs() {
            let _ = writeln!(s, "  {finger:<8} {ae:.3}");
        }
        for f in &o.folds {
            let _ = writeln!(
                s,
                "  fold {:>2} [{}] n={:<5} NMSE {:.4}  |err| {:.3} deg",
                f.fold, f.subject, f.n_test, f.nmse.mean, f.abs.mean
            );
        }
        if !self.config_echo.is_empty() {
            let _ = writeln!(s, "config: {}", self.config_echo);
        }
        s
    }
}

/// CSV of a training-duration sweep: fraction, per-fold NMSE mean/std,
/// pooled NMSE, pooled abs error.
pub fn sweep_csv(points: &[SweepPoint]) -> String {
    let mut s = String::from("fraction,nmse_mean,nmse_std,pooled_nmse,pooled_abs_error_deg\n");
    for p in points {
        let (m, sd) = p.outcome.nmse_mean_std();
        let _ = writeln!(
            s,
            "{:.4},{:.6},{:.6},{:.6},{:.6}",
            p.fraction, m, sd, p.outcome.pooled_nmse.mean, p.outcome.pooled_abs.mean
        );
    }
    s
}

/// CSV of a PCA spectrum: component, eigenvalue, cumulative variance ratio.
pub fn pca_csv(p: &PcaSummary) -> String {
    let mut s = String::from("component,eigenvalue,cumulative_ratio\n");
    for (i, (ev, cr)) in p.eigenvalues.iter().zip(&p.cumulative_ratio).enumerate() {
        let _ = writeln!(s, "{},{:.6e},{:.6}", i + 1, ev, cr);
    }
    let _ = writeln!(
        s,
        "# {} components reach {:.0}% explained variance",
        p.n_components,
        p.threshold * 100.0
    );
    s
}

/// CSV of timing statistics.
pub fn timing_csv(r: &super::TimingReport) -> String {
    let mut s = String::from("stage,mean_ms,std_ms,n\n");
    let _ = writeln!(
        s,
        "features,{:.4},{:.4},{}",
        r.feature.mean_ms, r.feature.std_ms, r.feature.n
    );
    if let Some(inf) = &r.inference {
        let _ = writeln!(s, "inference,{:.4},{:.4},{}", inf.mean_ms, inf.std_ms, inf.n);
        let _ = writeln!(s, "total,{:.4},,", r.total_mean_ms());
    }
    s
}
