use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Estimator {
    Exact,
    MonteCarlo,
}

impl Estimator {
    fn as_str(self) -> &'static str {
        match self {
            Estimator::Exact => "exact",
            Estimator::MonteCarlo => "monte-carlo",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub r: f64,
    pub value: f64,
    pub stderr: f64,
}

/// `(r, value, stderr)` triples with their provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailCurve {
    pub points: Vec<CurvePoint>,
    pub estimator: Estimator,
    pub law: String,
    pub d: usize,
    pub trials: u64,
    pub seed: u64,
}

pub const CSV_HEADER: &str = "r,value,stderr,estimator,law,d,trials,seed";

impl TailCurve {
    pub fn new(estimator: Estimator, law: &str, d: usize, trials: u64, seed: u64) -> Self {
        TailCurve { points: Vec::new(), estimator, law: law.to_string(), d, trials, seed }
    }

    /// Append a point; `r` must increase strictly.
    pub fn push(&mut self, r: f64, value: f64, stderr: f64) -> Result<()> {
        if let Some(last) = self.points.last() {
            if r <= last.r {
                return Err(Error::InvalidParameter(format!("curve abscissae must increase: {r} after {}", last.r)));
            }
        }
        self.points.push(CurvePoint { r, value, stderr });
        Ok(())
    }

    pub fn rs(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.r).collect()
    }

    pub fn values(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.value).collect()
    }

    /// CSV with the fixed schema; floats carry 17 significant digits so
    /// parsing reproduces them bit for bit. An optional config hash is
    /// written as a leading comment line.
    pub fn to_csv(&self, config_hash: Option<&str>) -> String {
        let mut out = String::new();
        if let Some(h) = config_hash {
            writeln!(out, "# config_sha256={h}").unwrap();
        }
        writeln!(out, "{CSV_HEADER}").unwrap();
        let law = csv_field(&self.law);
        for p in &self.points {
            writeln!(
                out,
                "{:.16e},{:.16e},{:.16e},{},{},{},{},{}",
                p.r,
                p.value,
                p.stderr,
                self.estimator.as_str(),
                law,
                self.d,
                self.trials,
                self.seed
            )
            .unwrap();
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let body: String = text.lines().filter(|l| !l.starts_with('#')).map(|l| format!("{l}\n")).collect();
        let mut rdr = csv::Reader::from_reader(body.as_bytes());
        let header = rdr.headers()?.iter().collect::<Vec<_>>().join(",");
        if header != CSV_HEADER {
            return Err(Error::InvalidParameter(format!("unexpected header `{header}`")));
        }
        let mut curve: Option<TailCurve> = None;
        for rec in rdr.records() {
            let rec = rec?;
            let num = |i: usize| -> Result<f64> {
                rec[i].parse::<f64>().map_err(|_| Error::InvalidParameter(format!("bad number `{}`", &rec[i])))
            };
            let int = |i: usize| -> Result<u64> {
                rec[i].parse::<u64>().map_err(|_| Error::InvalidParameter(format!("bad integer `{}`", &rec[i])))
            };
            let estimator = match &rec[3] {
                "exact" => Estimator::Exact,
                "monte-carlo" => Estimator::MonteCarlo,
                other => return Err(Error::InvalidParameter(format!("unknown estimator `{other}`"))),
            };
            let c = curve.get_or_insert_with(|| TailCurve::new(estimator, &rec[4], 0, 0, 0));
            c.d = int(5)? as usize;
            c.trials = int(6)?;
            c.seed = int(7)?;
            c.push(num(0)?, num(1)?, num(2)?)?;
        }
        curve.ok_or_else(|| Error::InvalidParameter("curve has no rows".into()))
    }
}

fn csv_field(s: &str) -> String {
    if s.contains(',') || s.contains('"') {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// How curve values are mapped before the straight-line fit against `ln r`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Transform {
    /// `ln value`.
    LogLog,
    /// `ln(-ln value)`, for probabilities in `(0, 1)`.
    LogNegLog,
    /// `ln(-value)`, for curves that already hold a (negative) logarithm.
    LogNeg,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Fit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub slope_stderr: f64,
    pub points: usize,
}

/// Ordinary least squares of the transformed values against `ln r`;
/// points whose transform is undefined are skipped.
pub fn fit_loglog(curve: &TailCurve, transform: Transform) -> Result<Fit> {
    let pts: Vec<(f64, f64)> = curve
        .points
        .iter()
        .filter(|p| p.r > 0.0)
        .filter_map(|p| {
            let y = match transform {
                Transform::LogLog if p.value > 0.0 => p.value.ln(),
                Transform::LogNegLog if p.value > 0.0 && p.value < 1.0 => (-p.value.ln()).ln(),
                Transform::LogNeg if p.value < 0.0 => (-p.value).ln(),
                _ => return None,
            };
            y.is_finite().then_some((p.r.ln(), y))
        })
        .collect();
    ols(&pts)
}

/// Least-squares line through `(x, y)` pairs.
pub fn ols(pts: &[(f64, f64)]) -> Result<Fit> {
    let n = pts.len();
    if n < 3 {
        return Err(Error::DegenerateFit { usable: n });
    }
    let nf = n as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / nf;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / nf;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::DegenerateFit { usable: 1 });
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = pts.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum();
    let r_squared = if syy > 0.0 { 1.0 - sse / syy } else { 1.0 };
    let slope_stderr = (sse / (nf - 2.0) / sxx).sqrt();
    Ok(Fit { slope, intercept, r_squared, slope_stderr, points: n })
}
