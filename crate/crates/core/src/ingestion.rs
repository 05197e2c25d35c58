//! Loading price panels, repairing gaps, filtering sparse assets and turning
//! prices into log returns.
//!
//! The input file is a delimited table with a header `date,<asset_1>,...`,
//! ISO-8601 dates in strictly increasing order and empty cells for missing
//! prices. Lines starting with `#` are ignored.

use std::io::{Read, Write};
use std::path::Path;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::{self, SummaryStats};

pub const DEFAULT_MISSING_THRESHOLD: f64 = 0.10;

#[derive(Debug, Clone, PartialEq)]
pub struct PriceSeries {
    pub asset_id: String,
    pub dates: Vec<NaiveDate>,
    pub prices: Vec<Option<f64>>,
}

impl PriceSeries {
    pub fn new(asset_id: impl Into<String>, dates: Vec<NaiveDate>, prices: Vec<Option<f64>>) -> Result<Self> {
        let asset_id = asset_id.into();
        if dates.len() != prices.len() {
            return Err(Error::InvalidParameters(format!(
                "`{asset_id}`: {} dates but {} prices",
                dates.len(),
                prices.len()
            )));
        }
        if dates.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidParameters(format!("`{asset_id}`: dates are not strictly increasing")));
        }
        for (index, p) in prices.iter().enumerate() {
            if let Some(v) = *p {
                if !(v > 0.0) || !v.is_finite() {
                    return Err(Error::InvalidPrice { asset: asset_id, index, value: v });
                }
            }
        }
        Ok(PriceSeries { asset_id, dates, prices })
    }

    pub fn len(&self) -> usize {
        self.prices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.prices.is_empty()
    }

    pub fn missing_count(&self) -> usize {
        self.prices.iter().filter(|p| p.is_none()).count()
    }

    pub fn missing_fraction(&self) -> f64 {
        if self.prices.is_empty() {
            return 1.0;
        }
        self.missing_count() as f64 / self.prices.len() as f64
    }

    fn first_present(&self) -> Option<usize> {
        self.prices.iter().position(|p| p.is_some())
    }

    fn slice(&self, start: usize, end: usize) -> PriceSeries {
        PriceSeries {
            asset_id: self.asset_id.clone(),
            dates: self.dates[start..end].to_vec(),
            prices: self.prices[start..end].to_vec(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReturnSeries {
    pub asset_id: String,
    /// Date of each return's closing observation.
    pub dates: Vec<NaiveDate>,
    pub returns: Vec<f64>,
}

/// Return series for N ≥ 2 assets on one shared date index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssetPanel {
    pub dates: Vec<NaiveDate>,
    pub assets: Vec<ReturnSeries>,
}

impl AssetPanel {
    pub fn new(assets: Vec<ReturnSeries>) -> Result<Self> {
        if assets.len() < 2 {
            return Err(Error::InsufficientAssets { needed: 2, found: assets.len() });
        }
        let dates = assets[0].dates.clone();
        if let Some(bad) = assets.iter().find(|a| a.dates != dates) {
            return Err(Error::InvalidParameters(format!("`{}` is not aligned with the panel dates", bad.asset_id)));
        }
        Ok(AssetPanel { dates, assets })
    }

    pub fn n_assets(&self) -> usize {
        self.assets.len()
    }

    pub fn n_obs(&self) -> usize {
        self.dates.len()
    }

    pub fn asset_ids(&self) -> Vec<String> {
        self.assets.iter().map(|a| a.asset_id.clone()).collect()
    }

    /// Row-major `T × N` matrix of returns.
    pub fn rows(&self) -> Vec<Vec<f64>> {
        (0..self.n_obs()).map(|t| self.assets.iter().map(|a| a.returns[t]).collect()).collect()
    }

    /// Keeps the first `n` observations.
    pub fn head(&self, n: usize) -> AssetPanel {
        let n = n.min(self.n_obs());
        AssetPanel {
            dates: self.dates[..n].to_vec(),
            assets: self
                .assets
                .iter()
                .map(|a| ReturnSeries {
                    asset_id: a.asset_id.clone(),
                    dates: a.dates[..n].to_vec(),
                    returns: a.returns[..n].to_vec(),
                })
                .collect(),
        }
    }
}

/// Raw price table as read from disk, one [`PriceSeries`] per column.
#[derive(Debug, Clone, PartialEq)]
pub struct PricePanel {
    pub dates: Vec<NaiveDate>,
    pub assets: Vec<PriceSeries>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExclusionEntry {
    pub asset_id: String,
    pub missing_fraction: f64,
    pub excluded: bool,
}

/// Fills interior gaps by linear interpolation between the nearest present
/// neighbours. Present values are never touched.
pub fn interpolate_missing(series: &PriceSeries) -> Result<PriceSeries> {
    let n = series.len();
    if n == 0 {
        return Err(Error::UnrepairableSeries {
            asset: series.asset_id.clone(),
            reason: "series is empty".into(),
        });
    }
    if series.prices[0].is_none() || series.prices[n - 1].is_none() {
        return Err(Error::UnrepairableSeries {
            asset: series.asset_id.clone(),
            reason: "leading or trailing observations are missing".into(),
        });
    }
    let mut out = series.prices.clone();
    let mut last = 0usize;
    for i in 1..n {
        if let Some(right) = series.prices[i] {
            if i > last + 1 {
                let left = series.prices[last].expect("anchor is present");
                let span = (i - last) as f64;
                for (k, slot) in out.iter_mut().enumerate().take(i).skip(last + 1) {
                    let w = (k - last) as f64 / span;
                    *slot = Some(left + w * (right - left));
                }
            }
            last = i;
        }
    }
    Ok(PriceSeries {
        asset_id: series.asset_id.clone(),
        dates: series.dates.clone(),
        prices: out,
    })
}

/// Drops assets whose missing fraction strictly exceeds `threshold`.
pub fn filter_by_missing_fraction(panel: &PricePanel, threshold: f64) -> Result<(PricePanel, Vec<ExclusionEntry>)> {
    if !(threshold > 0.0 && threshold <= 1.0) {
        return Err(Error::InvalidParameters(format!("missing threshold {threshold} outside (0, 1]")));
    }
    let mut kept = Vec::new();
    let mut report = Vec::new();
    for s in &panel.assets {
        let fraction = s.missing_fraction();
        let excluded = fraction > threshold;
        report.push(ExclusionEntry {
            asset_id: s.asset_id.clone(),
            missing_fraction: fraction,
            excluded,
        });
        if !excluded {
            kept.push(s.clone());
        }
    }
    if kept.is_empty() {
        return Err(Error::EmptyPanel);
    }
    Ok((
        PricePanel {
            dates: panel.dates.clone(),
            assets: kept,
        },
        report,
    ))
}

/// `r_t = ln(p_t / p_{t-1})`.
pub fn log_returns(series: &PriceSeries) -> Result<ReturnSeries> {
    let mut prices = Vec::with_capacity(series.len());
    for (index, p) in series.prices.iter().enumerate() {
        match *p {
            None => {
                return Err(Error::UnrepairableSeries {
                    asset: series.asset_id.clone(),
                    reason: format!("missing value at index {index}; interpolate first"),
                })
            }
            Some(v) if !(v > 0.0) => {
                return Err(Error::InvalidPrice {
                    asset: series.asset_id.clone(),
                    index,
                    value: v,
                })
            }
            Some(v) => prices.push(v),
        }
    }
    let returns = prices.windows(2).map(|w| (w[1] / w[0]).ln()).collect();
    Ok(ReturnSeries {
        asset_id: series.asset_id.clone(),
        dates: series.dates.iter().skip(1).copied().collect(),
        returns,
    })
}

pub fn summary_stats(returns: &ReturnSeries) -> Result<SummaryStats> {
    stats::summary_stats(&returns.returns)
}

/// Result of the full ingestion pipeline.
#[derive(Debug, Clone)]
pub struct PreparedPanel {
    pub prices: PricePanel,
    pub returns: AssetPanel,
    pub exclusions: Vec<ExclusionEntry>,
}

/// Filter, trim to the rows every retained asset covers, interpolate and
/// difference. Missing fractions are measured before any repair.
pub fn prepare_panel(raw: &PricePanel, threshold: f64) -> Result<PreparedPanel> {
    let (filtered, exclusions) = filter_by_missing_fraction(raw, threshold)?;
    for s in &filtered.assets {
        if s.first_present().is_none() {
            return Err(Error::UnrepairableSeries {
                asset: s.asset_id.clone(),
                reason: "no observations".into(),
            });
        }
    }
    // Trim to the first and last rows on which every retained asset is observed.
    let complete = |t: &usize| filtered.assets.iter().all(|s| s.prices[*t].is_some());
    let n = filtered.dates.len();
    let start = (0..n).find(complete).ok_or(Error::EmptyPanel)?;
    let end = (0..n).rev().find(complete).map_or(0, |t| t + 1);
    if end <= start + 1 {
        return Err(Error::EmptyPanel);
    }
    let repaired = filtered
        .assets
        .iter()
        .map(|s| interpolate_missing(&s.slice(start, end)))
        .collect::<Result<Vec<_>>>()?;
    let returns = repaired.iter().map(log_returns).collect::<Result<Vec<_>>>()?;
    let panel = AssetPanel::new(returns)?;
    Ok(PreparedPanel {
        prices: PricePanel {
            dates: filtered.dates[start..end].to_vec(),
            assets: repaired,
        },
        returns: panel,
        exclusions,
    })
}

pub fn read_price_panel_from<R: Read>(reader: R, source: &str) -> Result<PricePanel> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header = rdr.headers()?.clone();
    if header.len() < 2 || !header[0].eq_ignore_ascii_case("date") {
        return Err(Error::Parse {
            location: format!("{source}: header"),
            message: "expected `date,<asset_1>,...,<asset_N>`".into(),
        });
    }
    let ids: Vec<String> = header.iter().skip(1).map(str::to_string).collect();
    let mut dates = Vec::new();
    let mut columns: Vec<Vec<Option<f64>>> = vec![Vec::new(); ids.len()];
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let line = rec.position().map_or(row + 2, |p| p.line() as usize);
        let location = format!("{source}: line {line}");
        if rec.len() != ids.len() + 1 {
            return Err(Error::Parse {
                location,
                message: format!("expected {} fields, found {}", ids.len() + 1, rec.len()),
            });
        }
        let date = NaiveDate::parse_from_str(&rec[0], "%Y-%m-%d").map_err(|e| Error::Parse {
            location: location.clone(),
            message: format!("bad date `{}`: {e}", &rec[0]),
        })?;
        if let Some(prev) = dates.last() {
            if date <= *prev {
                return Err(Error::Parse {
                    location,
                    message: format!("date {date} does not follow {prev}"),
                });
            }
        }
        dates.push(date);
        for (c, cell) in rec.iter().skip(1).enumerate() {
            let value = if cell.is_empty() {
                None
            } else {
                let v: f64 = cell.parse().map_err(|_| Error::Parse {
                    location: location.clone(),
                    message: format!("bad price `{cell}` for `{}`", ids[c]),
                })?;
                if !(v > 0.0) || !v.is_finite() {
                    return Err(Error::InvalidPrice {
                        asset: ids[c].clone(),
                        index: dates.len() - 1,
                        value: v,
                    });
                }
                Some(v)
            };
            columns[c].push(value);
        }
    }
    let assets = ids
        .into_iter()
        .zip(columns)
        .map(|(id, prices)| PriceSeries::new(id, dates.clone(), prices))
        .collect::<Result<Vec<_>>>()?;
    Ok(PricePanel { dates, assets })
}

pub fn read_price_panel(path: &Path) -> Result<PricePanel> {
    let file = std::fs::File::open(path)?;
    read_price_panel_from(file, &path.display().to_string())
}

/// Writes the panel in the input format (empty cell = missing).
pub fn write_price_panel<W: Write>(writer: W, panel: &PricePanel) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["date".to_string()];
    header.extend(panel.assets.iter().map(|a| a.asset_id.clone()));
    w.write_record(&header)?;
    for (t, d) in panel.dates.iter().enumerate() {
        let mut rec = vec![d.format("%Y-%m-%d").to_string()];
        for a in &panel.assets {
            rec.push(a.prices[t].map(|v| format!("{v}")).unwrap_or_default());
        }
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}
