//! Per-block fair prices: synthetic GBM paths and historical CSV files.
//!
//! Historical files are UTF-8 CSV with a header. The joint format is
//! `timestamp,p_a,p_b`; the two-file format is one `timestamp,price` file
//! per asset, joined on equal timestamps. Timestamps are integer epoch
//! milliseconds and must strictly increase. Each row becomes one block.
//!
//! The price column is whatever the user extracted (kline close, bid/ask
//! mid, ...); nothing here depends on which.

use std::collections::HashMap;
use std::fs::File;
use std::io::Write;
use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::amm::PriceTick;
use crate::error::{Error, Result};

/// GBM parameters of one asset, per block.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GbmParams {
    pub p0: f64,
    pub mu: f64,
    pub sigma: f64,
}

/// Labelled parameter presets for synthetic runs.
///
/// These are placeholders with plausible per-minute magnitudes for a
/// volatile large-cap token (A) against a more volatile small-cap token
/// (B). Regenerate real ones with [`gbm_estimate`] on a matching segment
/// of historical data.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    HighVol,
    LowVol,
    Bull,
    Bear,
    Custom,
}

impl Regime {
    pub fn label(self) -> &'static str {
        match self {
            Regime::HighVol => "high_vol",
            Regime::LowVol => "low_vol",
            Regime::Bull => "bull",
            Regime::Bear => "bear",
            Regime::Custom => "custom",
        }
    }

    /// `(asset_a, asset_b)` preset, or `None` for [`Regime::Custom`].
    pub fn preset(self) -> Option<(GbmParams, GbmParams)> {
        let gbm = |p0, mu, sigma| GbmParams { p0, mu, sigma };
        let (a, b) = match self {
            Regime::HighVol => (gbm(3000.0, 0.0, 0.0015), gbm(2.0e-5, 0.0, 0.0025)),
            Regime::LowVol => (gbm(3000.0, 0.0, 0.0004), gbm(2.0e-5, 0.0, 0.0007)),
            Regime::Bull => (gbm(3000.0, 1.0e-5, 0.0008), gbm(2.0e-5, 1.5e-5, 0.0012)),
            Regime::Bear => (gbm(3000.0, -1.0e-5, 0.0008), gbm(2.0e-5, -1.5e-5, 0.0012)),
            Regime::Custom => return None,
        };
        Some((a, b))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PricePath {
    pub ticks: Vec<PriceTick>,
    pub source_label: String,
    pub gbm_params: Option<(GbmParams, GbmParams)>,
    /// Epoch-millisecond timestamp per tick, when the source had them.
    pub timestamps: Option<Vec<i64>>,
}

impl PricePath {
    pub fn len(&self) -> usize {
        self.ticks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ticks.is_empty()
    }

    /// Writes the path in the joint `timestamp,p_a,p_b` format. Paths
    /// without timestamps get one per minute starting at 0.
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut out = String::from("timestamp,p_a,p_b\n");
        for (i, tick) in self.ticks.iter().enumerate() {
            let ts = match &self.timestamps {
                Some(ts) => ts[i],
                None => i as i64 * 60_000,
            };
            out.push_str(&format!("{ts},{},{}\n", tick.p_a, tick.p_b));
        }
        let mut file = File::create(path).map_err(|e| Error::io(path, e))?;
        file.write_all(out.as_bytes()).map_err(|e| Error::io(path, e))
    }
}

/// Generates `n_blocks` prices following `p0`:
/// `p_{t+1} = p_t · exp((mu − sigma²/2) + sigma·z_t)`, with one standard
/// normal `z_t` drawn from `rng` per block, in order. `p0` itself is not
/// part of the output; element `t` is `p_{t+1}`.
pub fn gbm_generate<R: Rng + ?Sized>(
    p0: f64,
    mu: f64,
    sigma: f64,
    n_blocks: usize,
    rng: &mut R,
) -> Result<Vec<f64>> {
    if !(p0.is_finite() && p0 > 0.0) {
        return Err(Error::InvalidArgument(format!("GBM p0 must be positive, got {p0}")));
    }
    if !(sigma.is_finite() && sigma >= 0.0) || !mu.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "GBM needs finite mu and sigma >= 0, got mu={mu} sigma={sigma}"
        )));
    }
    if n_blocks == 0 {
        return Err(Error::InvalidArgument("GBM path needs at least one block".to_string()));
    }
    let drift = mu - 0.5 * sigma * sigma;
    let mut log_p = p0.ln();
    let mut series = Vec::with_capacity(n_blocks);
    for _ in 0..n_blocks {
        let z: f64 = StandardNormal.sample(rng);
        log_p += drift + sigma * z;
        series.push(log_p.exp());
    }
    Ok(series)
}

/// Per-block `(mu, sigma)` from a price series: `sigma` is the sample
/// standard deviation of log-returns (0 for a single return) and
/// `mu = mean + sigma²/2`.
pub fn gbm_estimate(series: &[f64]) -> Result<(f64, f64)> {
    if series.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "GBM estimation needs at least 2 prices, got {}",
            series.len()
        )));
    }
    if let Some(bad) = series.iter().find(|p| !(p.is_finite() && **p > 0.0)) {
        return Err(Error::InvalidArgument(format!("GBM estimation got non-positive price {bad}")));
    }
    let returns: Vec<f64> = series.windows(2).map(|w| (w[1] / w[0]).ln()).collect();
    let n = returns.len() as f64;
    let mean = returns.iter().sum::<f64>() / n;
    let sigma = if returns.len() < 2 {
        0.0
    } else {
        let var = returns.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (n - 1.0);
        var.sqrt()
    };
    Ok((mean + 0.5 * sigma * sigma, sigma))
}

/// Pairs two per-asset series into ticks numbered from 0.
pub fn make_path(series_a: &[f64], series_b: &[f64], label: impl Into<String>) -> Result<PricePath> {
    if series_a.len() != series_b.len() {
        return Err(Error::InvalidArgument(format!(
            "series lengths differ: {} vs {}",
            series_a.len(),
            series_b.len()
        )));
    }
    let ticks = series_a
        .iter()
        .zip(series_b)
        .enumerate()
        .map(|(i, (&a, &b))| PriceTick::new(i as u64, a, b))
        .collect::<Result<Vec<_>>>()?;
    Ok(PricePath {
        ticks,
        source_label: label.into(),
        gbm_params: None,
        timestamps: None,
    })
}

/// Two GBM series (asset A first, then asset B, from the same stream)
/// joined into a path.
pub fn synthetic_path<R: Rng + ?Sized>(
    a: &GbmParams,
    b: &GbmParams,
    n_blocks: usize,
    label: &str,
    rng: &mut R,
) -> Result<PricePath> {
    let series_a = gbm_generate(a.p0, a.mu, a.sigma, n_blocks, rng)?;
    let series_b = gbm_generate(b.p0, b.mu, b.sigma, n_blocks, rng)?;
    let mut path = make_path(&series_a, &series_b, label)?;
    path.gbm_params = Some((*a, *b));
    Ok(path)
}

fn open_csv(path: &Path) -> Result<csv::Reader<File>> {
    let file = File::open(path).map_err(|e| Error::data(path, None, format!("cannot open: {e}")))?;
    Ok(csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(file))
}

fn check_header(path: &Path, reader: &mut csv::Reader<File>, expected: &[&str]) -> Result<()> {
    let headers = reader
        .headers()
        .map_err(|e| Error::data(path, None, format!("cannot read header: {e}")))?;
    let got: Vec<&str> = headers.iter().collect();
    if got != expected {
        return Err(Error::data(
            path,
            None,
            format!("expected header `{}`, found `{}`", expected.join(","), got.join(",")),
        ));
    }
    Ok(())
}

fn parse_field<T: std::str::FromStr>(path: &Path, row: usize, record: &csv::StringRecord, idx: usize, name: &str) -> Result<T> {
    let raw = record
        .get(idx)
        .ok_or_else(|| Error::data(path, Some(row), format!("missing column `{name}`")))?;
    raw.parse()
        .map_err(|_| Error::data(path, Some(row), format!("cannot parse `{name}` value `{raw}`")))
}

fn parse_price(path: &Path, row: usize, record: &csv::StringRecord, idx: usize, name: &str) -> Result<f64> {
    let v: f64 = parse_field(path, row, record, idx, name)?;
    if !(v.is_finite() && v > 0.0) {
        return Err(Error::data(path, Some(row), format!("`{name}` must be finite and positive, got {v}")));
    }
    Ok(v)
}

/// Rows of `(timestamp, prices...)` with strictly increasing timestamps.
fn read_rows(path: &Path, columns: &[&str]) -> Result<Vec<(i64, Vec<f64>)>> {
    let mut reader = open_csv(path)?;
    check_header(path, &mut reader, columns)?;
    let mut rows: Vec<(i64, Vec<f64>)> = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let row = i + 1;
        let record = record.map_err(|e| Error::data(path, Some(row), e.to_string()))?;
        if record.len() != columns.len() {
            return Err(Error::data(
                path,
                Some(row),
                format!("expected {} fields, found {}", columns.len(), record.len()),
            ));
        }
        let ts: i64 = parse_field(path, row, &record, 0, columns[0])?;
        if let Some((prev, _)) = rows.last() {
            if ts <= *prev {
                return Err(Error::data(
                    path,
                    Some(row),
                    format!("timestamp {ts} does not increase (previous {prev})"),
                ));
            }
        }
        let prices = (1..columns.len())
            .map(|c| parse_price(path, row, &record, c, columns[c]))
            .collect::<Result<Vec<_>>>()?;
        rows.push((ts, prices));
    }
    if rows.is_empty() {
        return Err(Error::data(path, None, "file has no data rows"));
    }
    Ok(rows)
}

fn label_of(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

/// Loads a joint `timestamp,p_a,p_b` file.
pub fn load_historical(path: &Path) -> Result<PricePath> {
    let rows = read_rows(path, &["timestamp", "p_a", "p_b"])?;
    let mut ticks = Vec::with_capacity(rows.len());
    let mut stamps = Vec::with_capacity(rows.len());
    for (i, (ts, prices)) in rows.into_iter().enumerate() {
        ticks.push(PriceTick::new(i as u64, prices[0], prices[1])?);
        stamps.push(ts);
    }
    Ok(PricePath {
        ticks,
        source_label: label_of(path),
        gbm_params: None,
        timestamps: Some(stamps),
    })
}

/// Loads two `timestamp,price` files and keeps the timestamps present in
/// both.
pub fn load_historical_pair(path_a: &Path, path_b: &Path) -> Result<PricePath> {
    let rows_a = read_rows(path_a, &["timestamp", "price"])?;
    let rows_b: HashMap<i64, f64> = read_rows(path_b, &["timestamp", "price"])?
        .into_iter()
        .map(|(ts, p)| (ts, p[0]))
        .collect();
    let mut ticks = Vec::new();
    let mut stamps = Vec::new();
    for (ts, pa) in rows_a {
        if let Some(&pb) = rows_b.get(&ts) {
            ticks.push(PriceTick::new(ticks.len() as u64, pa[0], pb)?);
            stamps.push(ts);
        }
    }
    if ticks.is_empty() {
        return Err(Error::data(path_b, None, "no timestamps in common with the asset-A file"));
    }
    Ok(PricePath {
        ticks,
        source_label: format!("{}-{}", label_of(path_a), label_of(path_b)),
        gbm_params: None,
        timestamps: Some(stamps),
    })
}

/// Estimates GBM parameters for both assets of a historical path; `p0` is
/// the path's first price.
pub fn estimate_path_params(path: &PricePath) -> Result<(GbmParams, GbmParams)> {
    let a: Vec<f64> = path.ticks.iter().map(|t| t.p_a).collect();
    let b: Vec<f64> = path.ticks.iter().map(|t| t.p_b).collect();
    let (mu_a, sigma_a) = gbm_estimate(&a)?;
    let (mu_b, sigma_b) = gbm_estimate(&b)?;
    Ok((
        GbmParams { p0: a[0], mu: mu_a, sigma: sigma_a },
        GbmParams { p0: b[0], mu: mu_b, sigma: sigma_b },
    ))
}
