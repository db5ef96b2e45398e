//! Pose error estimates from pairwise trial diversity.
//!
//! Each uncertainty setting is a [`UncertaintyStatistic`] registered by name
//! in a [`StatisticRegistry`]. The built-in registry holds the seven settings
//! `mean`, `median`, `trim_mean_{10,20,30,40}` and `mean_inliers`; callers may
//! register their own statistics and select any of them by name at runtime.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::sync::{Arc, LazyLock};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rpe::{ErrorSeries, PairwiseErrorSet, SeriesRole};
use crate::stats;

/// Reduces one window's multiset of pairwise errors to a single estimate.
pub trait UncertaintyStatistic: Send + Sync {
    fn name(&self) -> &str;

    fn compute(&self, values: &[f64]) -> Result<f64>;
}

pub struct Mean;

impl UncertaintyStatistic for Mean {
    fn name(&self) -> &str {
        "mean"
    }

    fn compute(&self, values: &[f64]) -> Result<f64> {
        stats::mean(values)
    }
}

pub struct Median;

impl UncertaintyStatistic for Median {
    fn name(&self) -> &str {
        "median"
    }

    fn compute(&self, values: &[f64]) -> Result<f64> {
        stats::median(values)
    }
}

pub struct TrimmedMean {
    percent: u32,
    name: String,
}

impl TrimmedMean {
    pub fn new(percent: u32) -> Result<Self> {
        if !(1..50).contains(&percent) {
            return Err(Error::validation(format!("trim percentage {percent} outside 1..50")));
        }
        Ok(TrimmedMean {
            percent,
            name: format!("trim_mean_{percent}"),
        })
    }
}

impl UncertaintyStatistic for TrimmedMean {
    fn name(&self) -> &str {
        &self.name
    }

    fn compute(&self, values: &[f64]) -> Result<f64> {
        stats::trimmed_mean(values, self.percent)
    }
}

pub struct MeanInliers;

impl UncertaintyStatistic for MeanInliers {
    fn name(&self) -> &str {
        "mean_inliers"
    }

    fn compute(&self, values: &[f64]) -> Result<f64> {
        stats::mean_inliers(values)
    }
}

#[derive(Clone, Default)]
pub struct StatisticRegistry {
    entries: BTreeMap<String, Arc<dyn UncertaintyStatistic>>,
}

impl StatisticRegistry {
    pub fn empty() -> Self {
        Self::default()
    }

    /// Registry holding the seven built-in settings.
    pub fn builtin() -> Self {
        let mut reg = Self::empty();
        reg.register(Mean);
        reg.register(Median);
        for p in UncertaintySetting::TRIM_PERCENTAGES {
            reg.register(TrimmedMean::new(p).expect("built-in percentages are valid"));
        }
        reg.register(MeanInliers);
        reg
    }

    /// Adds `stat` under its own name, replacing any previous entry.
    pub fn register(&mut self, stat: impl UncertaintyStatistic + 'static) {
        self.entries.insert(stat.name().to_string(), Arc::new(stat));
    }

    pub fn get(&self, name: &str) -> Result<Arc<dyn UncertaintyStatistic>> {
        self.entries.get(name).cloned().ok_or_else(|| Error::UnknownName {
            kind: "uncertainty setting",
            name: name.to_string(),
        })
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }
}

impl fmt::Debug for StatisticRegistry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.names()).finish()
    }
}

static BUILTIN: LazyLock<StatisticRegistry> = LazyLock::new(StatisticRegistry::builtin);

pub fn builtin_registry() -> &'static StatisticRegistry {
    &BUILTIN
}

/// The seven built-in uncertainty calculation settings.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum UncertaintySetting {
    Mean,
    Median,
    TrimMean10,
    TrimMean20,
    #[default]
    TrimMean30,
    TrimMean40,
    MeanInliers,
}

impl UncertaintySetting {
    pub const ALL: [UncertaintySetting; 7] = [
        UncertaintySetting::Mean,
        UncertaintySetting::Median,
        UncertaintySetting::TrimMean10,
        UncertaintySetting::TrimMean20,
        UncertaintySetting::TrimMean30,
        UncertaintySetting::TrimMean40,
        UncertaintySetting::MeanInliers,
    ];

    pub const TRIM_PERCENTAGES: [u32; 4] = [10, 20, 30, 40];

    pub fn name(self) -> &'static str {
        match self {
            UncertaintySetting::Mean => "mean",
            UncertaintySetting::Median => "median",
            UncertaintySetting::TrimMean10 => "trim_mean_10",
            UncertaintySetting::TrimMean20 => "trim_mean_20",
            UncertaintySetting::TrimMean30 => "trim_mean_30",
            UncertaintySetting::TrimMean40 => "trim_mean_40",
            UncertaintySetting::MeanInliers => "mean_inliers",
        }
    }

    pub fn statistic(self) -> Arc<dyn UncertaintyStatistic> {
        builtin_registry().get(self.name()).expect("built-in setting registered")
    }
}

impl fmt::Display for UncertaintySetting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for UncertaintySetting {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::UnknownName {
                kind: "uncertainty setting",
                name: s.to_string(),
            })
    }
}

impl Serialize for UncertaintySetting {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(self.name())
    }
}

impl<'de> Deserialize<'de> for UncertaintySetting {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UncertaintyEstimate {
    pub series: ErrorSeries,
    /// Name of the statistic that produced the series.
    pub setting: String,
    pub n_trials: usize,
}

/// Applies `stat` to every window's pairwise error set.
pub fn estimate_with(pairwise: &[PairwiseErrorSet], stat: &dyn UncertaintyStatistic) -> Result<UncertaintyEstimate> {
    let first = pairwise.first().ok_or(Error::EmptyInput)?;
    let n_trials = first.n_trials;
    if n_trials < 2 {
        return Err(Error::validation(format!("estimate needs at least 2 trials, got {n_trials}")));
    }
    let values = pairwise
        .iter()
        .map(|set| {
            if set.values.is_empty() {
                return Err(Error::EmptyWindow {
                    window: set.window_index,
                });
            }
            stat.compute(&set.values)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(UncertaintyEstimate {
        series: ErrorSeries::new(values, SeriesRole::Estimate),
        setting: stat.name().to_string(),
        n_trials,
    })
}

pub fn estimate(pairwise: &[PairwiseErrorSet], setting: UncertaintySetting) -> Result<UncertaintyEstimate> {
    estimate_with(pairwise, setting.statistic().as_ref())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InfluenceMode {
    GtBased,
    Pairwise,
}

/// Share of all error values that a single trial affects.
pub fn influence_ratio(n: usize, mode: InfluenceMode) -> Result<f64> {
    if n < 2 {
        return Err(Error::validation(format!("influence ratio needs n >= 2, got {n}")));
    }
    let n = n as f64;
    Ok(match mode {
        InfluenceMode::GtBased => 1.0 / n,
        // (n - 1) affected values out of n (n - 1) / 2
        InfluenceMode::Pairwise => (n - 1.0) / (n * (n - 1.0) / 2.0),
    })
}
