use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Pearson R, or `Undefined` when either side has zero variance or there are
/// fewer than two samples. Serialised as a number or `null`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Correlation {
    Defined(f64),
    Undefined,
}

impl Correlation {
    pub fn value(self) -> Option<f64> {
        match self {
            Correlation::Defined(r) => Some(r),
            Correlation::Undefined => None,
        }
    }

    /// Larger R first, undefined last.
    pub fn rank_cmp(self, other: Correlation) -> Ordering {
        match (self, other) {
            (Correlation::Defined(a), Correlation::Defined(b)) => b.total_cmp(&a),
            (Correlation::Defined(_), Correlation::Undefined) => Ordering::Less,
            (Correlation::Undefined, Correlation::Defined(_)) => Ordering::Greater,
            (Correlation::Undefined, Correlation::Undefined) => Ordering::Equal,
        }
    }
}

impl fmt::Display for Correlation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Correlation::Defined(r) => write!(f, "{r:.5}"),
            Correlation::Undefined => f.write_str("undefined"),
        }
    }
}

impl Serialize for Correlation {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.value().serialize(s)
    }
}

impl<'de> Deserialize<'de> for Correlation {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        Ok(match Option::<f64>::deserialize(d)? {
            Some(r) => Correlation::Defined(r),
            None => Correlation::Undefined,
        })
    }
}

fn check_pair(pred: &[f64], gt: &[f64]) -> Result<()> {
    if pred.len() != gt.len() {
        return Err(Error::Parameter(format!(
            "{} predictions for {} ground-truth values",
            pred.len(),
            gt.len()
        )));
    }
    if pred.is_empty() {
        return Err(Error::Parameter("metrics need at least one sample".into()));
    }
    Ok(())
}

pub fn mae(pred: &[f64], gt: &[f64]) -> Result<f64> {
    check_pair(pred, gt)?;
    Ok(pred.iter().zip(gt).map(|(p, g)| (p - g).abs()).sum::<f64>() / pred.len() as f64)
}

pub fn rmse(pred: &[f64], gt: &[f64]) -> Result<f64> {
    check_pair(pred, gt)?;
    Ok((pred
        .iter()
        .zip(gt)
        .map(|(p, g)| (p - g).powi(2))
        .sum::<f64>()
        / pred.len() as f64)
        .sqrt())
}

pub fn pearson_r(pred: &[f64], gt: &[f64]) -> Result<Correlation> {
    check_pair(pred, gt)?;
    if pred.len() < 2 {
        return Ok(Correlation::Undefined);
    }
    let n = pred.len() as f64;
    let mp = pred.iter().sum::<f64>() / n;
    let mg = gt.iter().sum::<f64>() / n;
    let (mut spg, mut spp, mut sgg) = (0.0, 0.0, 0.0);
    for (p, g) in pred.iter().zip(gt) {
        let (dp, dg) = (p - mp, g - mg);
        spg += dp * dg;
        spp += dp * dp;
        sgg += dg * dg;
    }
    if !(spp > 0.0 && sgg > 0.0) {
        return Ok(Correlation::Undefined);
    }
    Ok(Correlation::Defined(
        (spg / (spp.sqrt() * sgg.sqrt())).clamp(-1.0, 1.0),
    ))
}

/// MAE / RMSE / R over one stratum.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub mae: f64,
    pub rmse: f64,
    pub r: Correlation,
    pub n: usize,
}

impl Metrics {
    pub fn compute(pred: &[f64], gt: &[f64]) -> Result<Metrics> {
        Ok(Metrics {
            mae: mae(pred, gt)?,
            rmse: rmse(pred, gt)?,
            r: pearson_r(pred, gt)?,
            n: pred.len(),
        })
    }
}
