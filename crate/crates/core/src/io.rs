//! CSV datasets, synthetic generators, seeded splits and the JSON model file.

use std::f64::consts::PI;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Normal;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Task};
use crate::ensemble::{Rule, RuleEnsemble};
use crate::error::{Error, Result};
use crate::losses::LossKind;
use crate::query::{Proposition, Query, Sign};

pub const FORMAT_VERSION: u32 = 1;

/// Reads a headered CSV file; every column except `target` is a feature.
pub fn load_csv(path: impl AsRef<Path>, target: &str, task: Task) -> Result<Dataset> {
    let path = path.as_ref();
    let (headers, mut columns) = read_columns(path)?;
    let target_idx = headers
        .iter()
        .position(|h| h == target)
        .ok_or_else(|| Error::MissingColumn {
            path: path.to_path_buf(),
            column: target.to_string(),
        })?;
    let y = columns.remove(target_idx);
    let mut names = headers;
    names.remove(target_idx);
    Dataset::new(columns, y, task, names)
}

/// Reads feature columns only, dropping `target` if the file has it.
/// The returned dataset carries an all-zero regression target.
pub fn load_features(path: impl AsRef<Path>, target: Option<&str>) -> Result<Dataset> {
    let (mut names, mut columns) = read_columns(path.as_ref())?;
    if let Some(idx) = target.and_then(|t| names.iter().position(|h| h == t)) {
        names.remove(idx);
        columns.remove(idx);
    }
    let n = columns.first().map_or(0, Vec::len);
    Dataset::new(columns, vec![0.0; n], Task::Regression, names)
}

fn read_columns(path: &Path) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_path(path)?;
    let headers: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    let mut columns: Vec<Vec<f64>> = vec![Vec::new(); headers.len()];
    for (row, record) in reader.records().enumerate() {
        let record = record?;
        for (j, cell) in record.iter().enumerate() {
            let v: f64 = cell.parse().map_err(|_| Error::ParseCell {
                path: path.to_path_buf(),
                row: row + 1,
                column: headers[j].clone(),
                cell: cell.to_string(),
            })?;
            columns[j].push(v);
        }
    }
    if columns.first().is_none_or(Vec::is_empty) {
        return Err(Error::EmptyFile {
            path: path.to_path_buf(),
        });
    }
    Ok((headers, columns))
}

/// Writes features followed by the target column named `target`.
pub fn save_csv(ds: &Dataset, path: impl AsRef<Path>, target: &str) -> Result<()> {
    let mut buf = Vec::new();
    {
        let mut w = csv::Writer::from_writer(&mut buf);
        let mut header: Vec<&str> = ds.feature_names().iter().map(String::as_str).collect();
        header.push(target);
        w.write_record(&header)?;
        for i in 0..ds.n() {
            let mut rec: Vec<String> = (0..ds.d()).map(|j| ds.value(i, j).to_string()).collect();
            rec.push(ds.target()[i].to_string());
            w.write_record(&rec)?;
        }
        w.flush()?;
    }
    write_atomic(path, &buf)
}

/// Writes `bytes` to a temporary sibling file and renames it over `path`.
pub fn write_atomic(path: impl AsRef<Path>, bytes: &[u8]) -> Result<()> {
    let path = path.as_ref();
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    let name = path.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let tmp = dir.join(format!(".{name}.tmp{}", std::process::id()));
    let result = (|| -> std::io::Result<()> {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    })();
    if result.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    Ok(result?)
}

/// Parameters of the synthetic generators; unset sizes use each generator's default.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenParams {
    pub n: Option<usize>,
    /// `alpha` of the `prop2` family.
    pub alpha: f64,
    /// `epsilon` of the `prop2` family.
    pub epsilon: f64,
}

impl Default for GenParams {
    fn default() -> Self {
        Self {
            n: None,
            alpha: 1.0,
            epsilon: 0.1,
        }
    }
}

pub const GENERATORS: [&str; 5] = ["friedman1", "friedman2", "friedman3", "prop2", "fig2"];

/// Generates one of [`GENERATORS`].
pub fn gen_synthetic(name: &str, params: &GenParams, seed: u64) -> Result<Dataset> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    match name {
        "fig2" => Dataset::from_columns(vec![vec![1.0, 2.0, 3.0]], vec![-10.0, -6.0, 5.0], Task::Regression),
        "prop2" => {
            let (a, e) = (params.alpha, params.epsilon);
            Dataset::from_columns(
                vec![vec![1.0, 2.0, 3.0, 4.0, 5.0]],
                vec![-a - e, a, -3.0 * a - e, a + e, 2.0 * a + e],
                Task::Regression,
            )
        }
        "friedman1" => {
            let n = params.n.unwrap_or(2000);
            let noise = Normal::new(0.0, 1.0).expect("valid sd");
            let mut cols: Vec<Vec<f64>> = (0..10).map(|_| Vec::with_capacity(n)).collect();
            let mut y = Vec::with_capacity(n);
            for _ in 0..n {
                let x: Vec<f64> = (0..10).map(|_| rng.random::<f64>()).collect();
                let v = 10.0 * (PI * x[0] * x[1]).sin() + 20.0 * (x[2] - 0.5).powi(2) + 10.0 * x[3] + 5.0 * x[4];
                y.push(v + rng.sample(noise));
                for (c, xi) in cols.iter_mut().zip(x) {
                    c.push(xi);
                }
            }
            Dataset::from_columns(cols, y, Task::Regression)
        }
        "friedman2" | "friedman3" => {
            let second = name == "friedman2";
            let n = params.n.unwrap_or(if second { 10000 } else { 5000 });
            let noise = Normal::new(0.0, if second { 125.0 } else { 0.1 }).expect("valid sd");
            let mut cols: Vec<Vec<f64>> = (0..4).map(|_| Vec::with_capacity(n)).collect();
            let mut y = Vec::with_capacity(n);
            for _ in 0..n {
                let x1 = rng.random_range(0.0..100.0);
                let x2 = rng.random_range(40.0 * PI..560.0 * PI);
                let x3 = rng.random::<f64>();
                let x4 = rng.random_range(1.0..11.0);
                let inner = x2 * x3 - 1.0 / (x2 * x4);
                let v = if second {
                    (x1 * x1 + inner * inner).sqrt()
                } else {
                    (inner / x1).atan()
                };
                y.push(v + rng.sample(noise));
                for (c, xi) in cols.iter_mut().zip([x1, x2, x3, x4]) {
                    c.push(xi);
                }
            }
            Dataset::from_columns(cols, y, Task::Regression)
        }
        other => Err(Error::UnknownGenerator(other.to_string())),
    }
}

/// Seeded shuffle, then the first `round(n * fraction)` rows train. Both
/// parts keep the original row order.
pub fn split(ds: &Dataset, fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::Config(format!("split fraction must be in (0, 1), got {fraction}")));
    }
    let n = ds.n();
    let n_train = (n as f64 * fraction).round() as usize;
    if n_train == 0 || n_train == n {
        return Err(Error::Config(format!(
            "splitting {n} rows at {fraction} leaves one side empty"
        )));
    }
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let (a, b) = perm.split_at_mut(n_train);
    a.sort_unstable();
    b.sort_unstable();
    Ok((ds.subset(a), ds.subset(b)))
}

/// Training settings stored with a model.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ModelMetadata {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub objective: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub update: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub search: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PropositionRecord {
    feature: String,
    sign: i8,
    threshold: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RuleRecord {
    weight: f64,
    propositions: Vec<PropositionRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFile {
    format_version: u32,
    loss: LossKind,
    offset: f64,
    feature_names: Vec<String>,
    rules: Vec<RuleRecord>,
    #[serde(default)]
    metadata: ModelMetadata,
}

/// Pretty-printed JSON; reals are written in shortest round-trip form.
pub fn serialize_model(ens: &RuleEnsemble, meta: &ModelMetadata) -> Result<String> {
    let bad = |what: &str| Error::Config(format!("cannot serialize non-finite {what}"));
    if !ens.offset.is_finite() {
        return Err(bad("offset"));
    }
    let rules = ens
        .rules
        .iter()
        .map(|r| {
            if !r.weight.is_finite() {
                return Err(bad("rule weight"));
            }
            Ok(RuleRecord {
                weight: r.weight,
                propositions: r
                    .query
                    .propositions()
                    .iter()
                    .map(|p| PropositionRecord {
                        feature: ens.feature_names[p.feature].clone(),
                        sign: p.sign.as_i8(),
                        threshold: p.threshold,
                    })
                    .collect(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let file = ModelFile {
        format_version: FORMAT_VERSION,
        loss: ens.loss,
        offset: ens.offset,
        feature_names: ens.feature_names.clone(),
        rules,
        metadata: meta.clone(),
    };
    let mut s = serde_json::to_string_pretty(&file).map_err(|e| Error::Config(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

/// Parses a model file; the version is checked before anything else.
pub fn parse_model(text: &str) -> Result<(RuleEnsemble, ModelMetadata)> {
    let malformed = |path: &str, message: String| Error::MalformedModel {
        path: path.to_string(),
        message,
    };
    let value: serde_json::Value = serde_json::from_str(text).map_err(|e| malformed("", e.to_string()))?;
    let version = value
        .get("format_version")
        .ok_or_else(|| malformed("format_version", "missing field".into()))?
        .as_u64()
        .ok_or_else(|| malformed("format_version", "expected an unsigned integer".into()))?;
    if version != u64::from(FORMAT_VERSION) {
        return Err(Error::VersionMismatch {
            found: u32::try_from(version).unwrap_or(u32::MAX),
            expected: FORMAT_VERSION,
        });
    }
    let mut de = serde_json::Deserializer::from_str(text);
    let file: ModelFile =
        serde_path_to_error::deserialize(&mut de).map_err(|e| malformed(&e.path().to_string(), e.inner().to_string()))?;

    let mut rules = Vec::with_capacity(file.rules.len());
    for (i, r) in file.rules.iter().enumerate() {
        let mut props = Vec::with_capacity(r.propositions.len());
        for (k, p) in r.propositions.iter().enumerate() {
            let at = |field: &str| format!("rules[{i}].propositions[{k}].{field}");
            let feature = file
                .feature_names
                .iter()
                .position(|f| *f == p.feature)
                .ok_or_else(|| malformed(&at("feature"), format!("unknown feature `{}`", p.feature)))?;
            let sign = Sign::from_i8(p.sign).ok_or_else(|| malformed(&at("sign"), format!("expected 1 or -1, got {}", p.sign)))?;
            props.push(Proposition::new(feature, sign, p.threshold));
        }
        rules.push(Rule {
            query: Query::from_propositions(props),
            weight: r.weight,
        });
    }
    Ok((
        RuleEnsemble {
            offset: file.offset,
            rules,
            loss: file.loss,
            feature_names: file.feature_names,
        },
        file.metadata,
    ))
}

pub fn save_model(path: impl AsRef<Path>, ens: &RuleEnsemble, meta: &ModelMetadata) -> Result<()> {
    write_atomic(path, serialize_model(ens, meta)?.as_bytes())
}

pub fn load_model(path: impl AsRef<Path>) -> Result<(RuleEnsemble, ModelMetadata)> {
    parse_model(&fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generators() {
        let p = gen_synthetic("prop2", &GenParams::default(), 0).unwrap();
        assert_eq!(p.target(), &[-1.1, 1.0, -3.1, 1.1, 2.1]);
        let f = gen_synthetic("fig2", &GenParams::default(), 0).unwrap();
        assert_eq!(f.target(), &[-10.0, -6.0, 5.0]);
        let a = gen_synthetic("friedman1", &GenParams::default(), 4).unwrap();
        let b = gen_synthetic("friedman1", &GenParams::default(), 4).unwrap();
        assert_eq!((a.n(), a.d()), (2000, 10));
        assert_eq!(a, b);
        let f2 = gen_synthetic("friedman2", &GenParams::default(), 1).unwrap();
        assert_eq!((f2.n(), f2.d()), (10000, 4));
        let f3 = gen_synthetic("friedman3", &GenParams::default(), 1).unwrap();
        assert_eq!((f3.n(), f3.d()), (5000, 4));
        assert!(matches!(
            gen_synthetic("nope", &GenParams::default(), 0),
            Err(Error::UnknownGenerator(_))
        ));
    }

    #[test]
    fn splits() {
        let ds = Dataset::from_columns(vec![(0..10).map(f64::from).collect()], vec![0.0; 10], Task::Regression).unwrap();
        let (tr, te) = split(&ds, 0.8, 1).unwrap();
        assert_eq!((tr.n(), te.n()), (8, 2));
        let (tr2, _) = split(&ds, 0.8, 1).unwrap();
        assert_eq!(tr, tr2);
        let p = gen_synthetic("prop2", &GenParams::default(), 0).unwrap();
        let (tr, te) = split(&p, 0.8, 3).unwrap();
        assert_eq!((tr.n(), te.n()), (4, 1));
        assert!(split(&p, 0.01, 0).is_err());
    }

    #[test]
    fn version_mismatch() {
        let text = r#"{"format_version": 999, "loss": "squared", "offset": 0, "feature_names": [], "rules": []}"#;
        assert!(matches!(
            parse_model(text),
            Err(Error::VersionMismatch { found: 999, .. })
        ));
    }

    #[test]
    fn malformed_field_reports_path() {
        let text = r#"{"format_version": 1, "loss": "squared", "offset": 0, "feature_names": ["x1"],
            "rules": [{"weight": 1, "propositions": [{"feature": "x1", "sign": 1, "threshold": "a"}]}]}"#;
        match parse_model(text) {
            Err(Error::MalformedModel { path, .. }) => assert_eq!(path, "rules[0].propositions[0].threshold"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn empty_model_round_trip() {
        let ens = RuleEnsemble::offset_only(0.1 + 0.2, LossKind::Squared, vec!["x1".into()]);
        let text = serialize_model(&ens, &ModelMetadata::default()).unwrap();
        let (back, _) = parse_model(&text).unwrap();
        assert_eq!(back, ens);
        assert_eq!(back.offset.to_bits(), ens.offset.to_bits());
    }
}
