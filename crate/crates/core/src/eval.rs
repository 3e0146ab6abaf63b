//! Threshold-swept success rates over registration trials.
//!
//! "mAP" throughout means the fraction of trials whose error is at most the
//! threshold, not detection-style average precision. Failed registrations
//! count as infinite error.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::registration::RegistrationResult;

pub const ROTATION_THRESHOLDS_DEG: [f64; 3] = [5.0, 10.0, 15.0];
pub const TRANSLATION_THRESHOLDS: [f64; 3] = [1e-3, 5e-3, 1e-2];
pub const LOW_INLIER_RATE: f64 = 0.05;

/// Which translation error the translation thresholds are meant for in
/// plots. Both are always computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormConvention {
    #[default]
    Squared,
    Unsquared,
}

impl NormConvention {
    pub fn as_str(self) -> &'static str {
        match self {
            NormConvention::Squared => "squared",
            NormConvention::Unsquared => "unsquared",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "squared" => Ok(NormConvention::Squared),
            "unsquared" => Ok(NormConvention::Unsquared),
            _ => Err(Error::invalid("norm convention must be squared or unsquared")),
        }
    }
}

/// One method's result on one trial. `error` holds the failure message when
/// registration failed; the error fields are then `None`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodOutcome {
    pub method: String,
    /// Radians.
    pub rotation_error: Option<f64>,
    /// Squared translation norm.
    pub translation_error: Option<f64>,
    pub translation_distance: Option<f64>,
    pub wall_time: Option<f64>,
    pub diagnostics: BTreeMap<String, f64>,
    pub error: Option<String>,
}

impl MethodOutcome {
    pub fn from_result(result: &RegistrationResult) -> Self {
        Self {
            method: result.method.clone(),
            rotation_error: result.rotation_error,
            translation_error: result.translation_error,
            translation_distance: result.translation_distance,
            wall_time: result.wall_time,
            diagnostics: result.diagnostics.clone(),
            error: None,
        }
    }

    pub fn failure(method: &str, err: &Error) -> Self {
        Self {
            method: String::from(method),
            rotation_error: None,
            translation_error: None,
            translation_distance: None,
            wall_time: None,
            diagnostics: BTreeMap::new(),
            error: Some(err.to_string()),
        }
    }

    fn rotation_deg(&self) -> f64 {
        self.rotation_error.map_or(f64::INFINITY, f64::to_degrees)
    }

    fn translation(&self, norm: NormConvention) -> f64 {
        match norm {
            NormConvention::Squared => self.translation_error,
            NormConvention::Unsquared => self.translation_distance,
        }
        .unwrap_or(f64::INFINITY)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial: usize,
    pub seed: u64,
    pub object_id: String,
    pub category: Option<String>,
    /// Object pixels over valid depth pixels; absent for clean scenes.
    pub inlier_rate: Option<f64>,
    pub target_points: usize,
    pub elevation_deg: Option<f64>,
    pub azimuth_deg: Option<f64>,
    /// Some cloud had fewer points than the sampler asked for and was
    /// drawn with replacement.
    #[serde(default)]
    pub upsampled: bool,
    pub outcomes: Vec<MethodOutcome>,
}

impl TrialRecord {
    pub fn outcome(&self, method: &str) -> Option<&MethodOutcome> {
        self.outcomes.iter().find(|o| o.method == method)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    RotationDeg,
    TranslationSquared,
    TranslationUnsquared,
}

impl Metric {
    pub fn as_str(self) -> &'static str {
        match self {
            Metric::RotationDeg => "rotation_deg",
            Metric::TranslationSquared => "translation_squared",
            Metric::TranslationUnsquared => "translation_unsquared",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "rotation_deg" => Ok(Metric::RotationDeg),
            "translation_squared" => Ok(Metric::TranslationSquared),
            "translation_unsquared" => Ok(Metric::TranslationUnsquared),
            _ => Err(Error::invalid("unknown metric")),
        }
    }
}

/// `Pooled` counts every trial once; `CategoryMean` averages per-category
/// rates and only appears when every record has a category.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Aggregation {
    Pooled,
    CategoryMean,
}

impl Aggregation {
    pub fn as_str(self) -> &'static str {
        match self {
            Aggregation::Pooled => "pooled",
            Aggregation::CategoryMean => "category_mean",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "pooled" => Ok(Aggregation::Pooled),
            "category_mean" => Ok(Aggregation::CategoryMean),
            _ => Err(Error::invalid("unknown aggregation")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapRow {
    pub method: String,
    pub metric: Metric,
    pub aggregation: Aggregation,
    pub threshold: f64,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapReport {
    pub trials: usize,
    pub norm: NormConvention,
    pub rows: Vec<MapRow>,
}

impl MapReport {
    pub fn methods(&self) -> Vec<&str> {
        let mut out: Vec<&str> = Vec::new();
        for r in &self.rows {
            if !out.contains(&r.method.as_str()) {
                out.push(&r.method);
            }
        }
        out
    }

    /// `(threshold, value)` pairs in row order.
    pub fn curve(&self, method: &str, metric: Metric, aggregation: Aggregation) -> Vec<(f64, f64)> {
        self.rows
            .iter()
            .filter(|r| r.method == method && r.metric == metric && r.aggregation == aggregation)
            .map(|r| (r.threshold, r.value))
            .collect()
    }

    pub fn value(&self, method: &str, metric: Metric, threshold: f64) -> Option<f64> {
        self.rows
            .iter()
            .find(|r| {
                r.method == method
                    && r.metric == metric
                    && r.aggregation == Aggregation::Pooled
                    && r.threshold == threshold
            })
            .map(|r| r.value)
    }

    /// Every curve is nondecreasing in the threshold.
    pub fn is_monotone(&self) -> bool {
        let mut keys = BTreeSet::new();
        for r in &self.rows {
            keys.insert((r.method.as_str(), r.metric, r.aggregation));
        }
        keys.into_iter().all(|(m, metric, agg)| {
            let mut c = self.curve(m, metric, agg);
            c.sort_by(|a, b| a.0.total_cmp(&b.0));
            c.windows(2).all(|w| w[0].1 <= w[1].1)
        })
    }
}

fn success_rate(errors: &[f64], threshold: f64) -> f64 {
    errors.iter().filter(|&&e| e <= threshold).count() as f64 / errors.len() as f64
}

/// Success fractions per method and threshold. Methods appear in order of
/// first occurrence; a method missing from a record counts as a failure
/// there.
pub fn compute_map(
    records: &[TrialRecord],
    rot_thresholds_deg: &[f64],
    trans_thresholds: &[f64],
    norm: NormConvention,
) -> Result<MapReport> {
    if records.is_empty() {
        return Err(Error::EmptyRecords);
    }
    let mut methods: Vec<&str> = Vec::new();
    for o in records.iter().flat_map(|r| &r.outcomes) {
        if !methods.contains(&o.method.as_str()) {
            methods.push(&o.method);
        }
    }
    let categories: Option<Vec<&str>> = records.iter().map(|r| r.category.as_deref()).collect();

    let mut rows = Vec::new();
    for &method in &methods {
        let error_of = |r: &TrialRecord, metric: Metric| -> f64 {
            r.outcome(method).map_or(f64::INFINITY, |o| match metric {
                Metric::RotationDeg => o.rotation_deg(),
                Metric::TranslationSquared => o.translation(NormConvention::Squared),
                Metric::TranslationUnsquared => o.translation(NormConvention::Unsquared),
            })
        };
        let sweeps = [
            (Metric::RotationDeg, rot_thresholds_deg),
            (Metric::TranslationSquared, trans_thresholds),
            (Metric::TranslationUnsquared, trans_thresholds),
        ];
        for (metric, thresholds) in sweeps {
            let errors: Vec<f64> = records.iter().map(|r| error_of(r, metric)).collect();
            for &t in thresholds {
                let value = success_rate(&errors, t);
                rows.push(MapRow {
                    method: String::from(method),
                    metric,
                    aggregation: Aggregation::Pooled,
                    threshold: t,
                    value,
                });
            }
            let Some(cats) = &categories else { continue };
            let mut groups: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
            for (c, e) in cats.iter().zip(&errors) {
                groups.entry(c).or_default().push(*e);
            }
            for &t in thresholds {
                let value = groups.values().map(|g| success_rate(g, t)).sum::<f64>() / groups.len() as f64;
                rows.push(MapRow {
                    method: String::from(method),
                    metric,
                    aggregation: Aggregation::CategoryMean,
                    threshold: t,
                    value,
                });
            }
        }
    }
    Ok(MapReport { trials: records.len(), norm, rows })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InlierRateStats {
    pub count: usize,
    pub min: f64,
    pub max: f64,
    /// Fraction of records with rate strictly below [`LOW_INLIER_RATE`].
    pub fraction_below: f64,
}

pub fn inlier_rate_stats(records: &[TrialRecord]) -> Result<InlierRateStats> {
    if records.is_empty() {
        return Err(Error::EmptyRecords);
    }
    let rates: Vec<f64> =
        records.iter().map(|r| r.inlier_rate.ok_or(Error::MissingField("inlier_rate"))).collect::<Result<_>>()?;
    let min = rates.iter().copied().fold(f64::INFINITY, f64::min);
    let max = rates.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let below = rates.iter().filter(|&&r| r < LOW_INLIER_RATE).count();
    Ok(InlierRateStats { count: rates.len(), min, max, fraction_below: below as f64 / rates.len() as f64 })
}
