//! Per-window flow features: the five base features (ACD, FFV, IBF, MFF,
//! HIAD) and the two fused features (SFV, CDF) fed to the classifier.
//!
//! Every feature is a weighted count over the window's flow classes, with
//! rate gates that zero a term out unless it exceeds a per-second
//! threshold. All outputs are finite and non-negative.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{self, BufRead, BufReader, Write};
use std::net::Ipv4Addr;
use std::path::Path;

use thiserror::Error;

use crate::flow::{classify_flows, distinct_ports, FlowClasses, FlowWindow};

/// Window class label: `+1` normal, `-1` attack.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Label {
    Normal,
    Attack,
}

impl Label {
    pub fn to_f64(self) -> f64 {
        match self {
            Label::Normal => 1.0,
            Label::Attack => -1.0,
        }
    }

    pub fn to_i8(self) -> i8 {
        match self {
            Label::Normal => 1,
            Label::Attack => -1,
        }
    }

    pub fn from_i8(v: i8) -> Option<Label> {
        match v {
            1 => Some(Label::Normal),
            -1 => Some(Label::Attack),
            _ => None,
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_i8())
    }
}

#[derive(Debug, Error)]
pub enum ThresholdError {
    #[error("theta1 must lie strictly inside (0, 1), got {0}")]
    Theta1OutOfRange(f64),
    #[error("theta2 must lie in [0, 1], got {0}")]
    Theta2OutOfRange(f64),
    #[error("theta{index} must be a non-negative rate, got {value}")]
    NegativeRate { index: usize, value: f64 },
    #[error("window length dt must be positive, got {0}")]
    NonPositiveDt(f64),
}

/// Feature weights and rate gates.
///
/// `theta1` weighs ports against packets inside ACD, `theta2` weighs the
/// two gated terms inside FFV. `theta3`..`theta9` are events-per-second
/// gate thresholds; a gated value `x` survives only when `x / dt`
/// exceeds the corresponding threshold.
#[derive(Debug, Clone, PartialEq)]
pub struct Thresholds {
    pub theta1: f64,
    pub theta2: f64,
    pub theta3: f64,
    pub theta4: f64,
    pub theta5: f64,
    pub theta6: f64,
    pub theta7: f64,
    pub theta8: f64,
    pub theta9: f64,
    /// Window length in seconds.
    pub dt: f64,
    /// Use the literal packet-weight recurrence, which collapses to the
    /// SD weight alone, instead of the corrected form that mixes in the
    /// SH weight. Kept for auditability; off by default.
    pub literal_weight_packet: bool,
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds {
            theta1: 0.5,
            theta2: 0.5,
            theta3: 10.0,
            theta4: 5.0,
            theta5: 10.0,
            theta6: 10.0,
            theta7: 10.0,
            theta8: 10.0,
            theta9: 10.0,
            dt: 1.0,
            literal_weight_packet: false,
        }
    }
}

impl Thresholds {
    pub fn validate(&self) -> Result<(), ThresholdError> {
        if !(self.theta1 > 0.0 && self.theta1 < 1.0) {
            return Err(ThresholdError::Theta1OutOfRange(self.theta1));
        }
        if !(0.0..=1.0).contains(&self.theta2) {
            return Err(ThresholdError::Theta2OutOfRange(self.theta2));
        }
        for (index, value) in [
            (3, self.theta3),
            (4, self.theta4),
            (5, self.theta5),
            (6, self.theta6),
            (7, self.theta7),
            (8, self.theta8),
            (9, self.theta9),
        ] {
            if !(value >= 0.0) {
                return Err(ThresholdError::NegativeRate { index, value });
            }
        }
        if !(self.dt > 0.0) {
            return Err(ThresholdError::NonPositiveDt(self.dt));
        }
        Ok(())
    }
}

/// Rate gate: keep `x` when its per-second rate exceeds `theta`.
fn gate(x: f64, dt: f64, theta: f64) -> f64 {
    if x / dt > theta {
        x
    } else {
        0.0
    }
}

/// `flag(x)`: 0 when x > 0, 1 when x = 0.
fn flag(x: f64) -> f64 {
    if x > 0.0 {
        0.0
    } else {
        1.0
    }
}

/// Address correlation degree: port/packet-weighted size of the
/// single-destination classes.
pub fn acd(classes: &FlowClasses, th: &Thresholds) -> f64 {
    classes
        .acs
        .values()
        .map(|pkts| {
            let ports = distinct_ports(pkts) as f64;
            let packets = pkts.len() as f64;
            th.theta1 * ports + (1.0 - th.theta1) * packets
        })
        .sum()
}

/// Flow features value over merged multi-source destination classes.
pub fn ffv(classes: &FlowClasses, th: &Thresholds) -> f64 {
    let m = classes.sdd.len() as f64;
    let total: f64 = classes
        .sdd
        .values()
        .map(|pkts| {
            let mut per_source: BTreeMap<Ipv4Addr, usize> = BTreeMap::new();
            for p in pkts {
                *per_source.entry(p.src).or_insert(0) += 1;
            }
            let num = per_source.len() as f64;
            let packet_term: f64 = per_source
                .values()
                .map(|&n| gate(n as f64, th.dt, th.theta3))
                .sum();
            let port_term = gate(distinct_ports(pkts) as f64 - 1.0, th.dt, th.theta4);
            num + th.theta2 * packet_term + (1.0 - th.theta2) * port_term
        })
        .sum();
    total - m
}

/// Interaction behavior feature: half-flow asymmetry plus gated half-flow
/// port diversity, normalized by the interactive population.
pub fn ibf(classes: &FlowClasses, th: &Thresholds) -> f64 {
    let s = classes.sh.len() as f64;
    let d = classes.dh.len() as f64;
    let m = classes.if_set.len() as f64;
    let sh_ports: f64 = classes
        .sh
        .values()
        .map(|pkts| gate(distinct_ports(pkts) as f64, th.dt, th.theta5))
        .sum();
    let dh_ports: f64 = classes
        .dh
        .values()
        .map(|pkts| gate(distinct_ports(pkts) as f64, th.dt, th.theta5))
        .sum();
    ((s - d).abs() + sh_ports + dh_ports) / (m + 1.0)
}

/// Multi-feature fusion: half-flow count plus gated port and packet
/// weights, normalized by the interactive population.
pub fn mff(classes: &FlowClasses, th: &Thresholds) -> f64 {
    let s = classes.sh.len() as f64;
    let m = classes.if_set.len() as f64;

    let weight_sh: f64 = classes
        .sh
        .values()
        .map(|pkts| gate(pkts.len() as f64, th.dt, th.theta6))
        .sum();
    let weight_sd: f64 = classes
        .sd
        .values()
        .map(|pkts| gate(pkts.len() as f64, th.dt, th.theta7))
        .sum();
    let weight_port: f64 = classes
        .sh
        .values()
        .chain(classes.dh.values())
        .map(|pkts| gate(distinct_ports(pkts) as f64, th.dt, th.theta8))
        .sum();
    let weight_packet = if th.literal_weight_packet {
        flag(weight_sd) * weight_sd + weight_sd
    } else {
        flag(weight_sd) * weight_sh + weight_sd
    };

    (s + weight_port + weight_packet) / (m + 1.0)
}

/// Half-interaction anomaly degree: source fan-in plus gated port
/// diversity of each half-interaction destination group.
pub fn hiad(classes: &FlowClasses, th: &Thresholds) -> f64 {
    classes
        .hsd
        .values()
        .map(|c| c.hn as f64 + gate(c.port_count as f64, th.dt, th.theta9))
        .sum()
}

/// Super-fusion feature value.
pub fn sfv(hiad: f64, ffv: f64) -> f64 {
    (hiad / (ffv + 1.0)).sqrt() * (hiad + ffv)
}

/// Comprehensive degree of feature.
pub fn cdf(acd: f64, mff: f64, ibf: f64) -> f64 {
    (acd + mff).sqrt() / 2.0 + (ibf + 1.0).ln()
}

/// Per-window features, plus the optional ground-truth label.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub window: usize,
    pub acd: f64,
    pub ffv: f64,
    pub ibf: f64,
    pub mff: f64,
    pub hiad: f64,
    pub sfv: f64,
    pub cdf: f64,
    pub label: Option<Label>,
}

/// Compute the full feature series, one vector per window in window order.
pub fn extract_series(windows: &[FlowWindow], th: &Thresholds) -> Vec<FeatureVector> {
    windows
        .iter()
        .enumerate()
        .map(|(k, w)| {
            let classes = classify_flows(w);
            let acd_v = acd(&classes, th);
            let ffv_v = ffv(&classes, th);
            let ibf_v = ibf(&classes, th);
            let mff_v = mff(&classes, th);
            let hiad_v = hiad(&classes, th);
            FeatureVector {
                window: k,
                acd: acd_v,
                ffv: ffv_v,
                ibf: ibf_v,
                mff: mff_v,
                hiad: hiad_v,
                sfv: sfv(hiad_v, ffv_v),
                cdf: cdf(acd_v, mff_v, ibf_v),
                label: None,
            }
        })
        .collect()
}

/// Attach ground-truth labels to a feature series, by window position.
///
/// Returns an error on length mismatch.
pub fn attach_labels(series: &mut [FeatureVector], labels: &[Label]) -> Result<(), FeatureCsvError> {
    if series.len() != labels.len() {
        return Err(FeatureCsvError::LabelLengthMismatch {
            series: series.len(),
            labels: labels.len(),
        });
    }
    for (fv, &label) in series.iter_mut().zip(labels) {
        fv.label = Some(label);
    }
    Ok(())
}

pub const FEATURE_CSV_HEADER: &str = "window,acd,ffv,ibf,mff,hiad,sfv,cdf,label";

#[derive(Debug, Error)]
pub enum FeatureCsvError {
    #[error("io error: {0}")]
    Io(#[from] io::Error),
    #[error("missing or wrong header, expected `{FEATURE_CSV_HEADER}`")]
    BadHeader,
    #[error("line {line}: {reason}")]
    BadRow { line: usize, reason: String },
    #[error("series has {series} windows but {labels} labels were supplied")]
    LabelLengthMismatch { series: usize, labels: usize },
}

/// Write a feature series as CSV. The label column is blank for windows
/// without a known label.
pub fn write_features_csv<W: Write>(mut out: W, series: &[FeatureVector]) -> io::Result<()> {
    writeln!(out, "{FEATURE_CSV_HEADER}")?;
    for fv in series {
        let label = fv.label.map(|l| l.to_string()).unwrap_or_default();
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            fv.window, fv.acd, fv.ffv, fv.ibf, fv.mff, fv.hiad, fv.sfv, fv.cdf, label
        )?;
    }
    Ok(())
}

pub fn write_features_csv_path(path: &Path, series: &[FeatureVector]) -> io::Result<()> {
    let file = std::fs::File::create(path)?;
    write_features_csv(io::BufWriter::new(file), series)
}

/// Read a feature series written by [`write_features_csv`].
pub fn read_features_csv<R: io::Read>(reader: R) -> Result<Vec<FeatureVector>, FeatureCsvError> {
    let mut lines = BufReader::new(reader).lines();
    let header = lines
        .next()
        .ok_or(FeatureCsvError::BadHeader)?
        .map_err(FeatureCsvError::Io)?;
    if header.trim_end() != FEATURE_CSV_HEADER {
        return Err(FeatureCsvError::BadHeader);
    }
    let mut series = Vec::new();
    for (idx, line) in lines.enumerate() {
        let line = line.map_err(FeatureCsvError::Io)?;
        let lineno = idx + 2;
        let row = line.trim_end();
        if row.is_empty() {
            continue;
        }
        let fields: Vec<&str> = row.split(',').collect();
        if fields.len() != 9 {
            return Err(FeatureCsvError::BadRow {
                line: lineno,
                reason: format!("expected 9 fields, got {}", fields.len()),
            });
        }
        let bad = |reason: String| FeatureCsvError::BadRow { line: lineno, reason };
        let window = fields[0]
            .parse::<usize>()
            .map_err(|e| bad(format!("window index: {e}")))?;
        let mut values = [0.0f64; 7];
        for (slot, raw) in values.iter_mut().zip(&fields[1..8]) {
            *slot = raw
                .parse::<f64>()
                .map_err(|e| bad(format!("feature value `{raw}`: {e}")))?;
        }
        let label = match fields[8] {
            "" => None,
            raw => {
                let v = raw
                    .parse::<i8>()
                    .map_err(|e| bad(format!("label `{raw}`: {e}")))?;
                Some(Label::from_i8(v).ok_or_else(|| bad(format!("label must be 1 or -1, got {v}")))?)
            }
        };
        series.push(FeatureVector {
            window,
            acd: values[0],
            ffv: values[1],
            ibf: values[2],
            mff: values[3],
            hiad: values[4],
            sfv: values[5],
            cdf: values[6],
            label,
        });
    }
    Ok(series)
}

pub fn read_features_csv_path(path: &Path) -> Result<Vec<FeatureVector>, FeatureCsvError> {
    let file = std::fs::File::open(path)?;
    read_features_csv(file)
}
