//! CSV ingestion and export.
//!
//! Two on-disk layouts are supported:
//! - long: one CSV with a member-id column, an integer step column and one
//!   column per variable; rows are sorted by (member, t) on load.
//! - directory: one CSV per member, filename = member id, header =
//!   variable names, row index = time step.
//!
//! Missing data is not supported; any non-finite cell is rejected with its
//! exact location.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::float::Float;
use crate::series::{EnsembleTimeSeries, Role, VariableMeta};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum IngestFormat {
    Long,
    Directory,
}

/// Ingestion configuration; serializes as the schema JSON document.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IngestSchema {
    pub format: IngestFormat,
    /// Member-id column (long format only).
    #[serde(default = "default_member_column")]
    pub member_column: String,
    /// Integer step column (long format only).
    #[serde(default = "default_time_column")]
    pub time_column: String,
    /// Variables to predict; they get `Role::Both` unless
    /// `targets_as_predictors` is false.
    #[serde(default)]
    pub targets: Vec<String>,
    #[serde(default = "default_true")]
    pub targets_as_predictors: bool,
    /// Time units per step.
    #[serde(default = "default_step")]
    pub step_duration: f64,
}

fn default_member_column() -> String {
    "member".to_string()
}

fn default_time_column() -> String {
    "t".to_string()
}

fn default_true() -> bool {
    true
}

fn default_step() -> f64 {
    1.0
}

impl IngestSchema {
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }

    fn role_for(&self, name: &str) -> Role {
        if self.targets.iter().any(|t| t == name) {
            if self.targets_as_predictors {
                Role::Both
            } else {
                Role::Target
            }
        } else {
            Role::Predictor
        }
    }
}

/// Load and validate an ensemble. Member ordering is deterministic
/// (lexicographic by member id) regardless of on-disk order.
pub fn load_ensemble<F: Float>(source: &Path, schema: &IngestSchema) -> Result<EnsembleTimeSeries<F>> {
    if !source.exists() {
        return Err(Error::Schema(format!(
            "source '{}' does not exist",
            source.display()
        )));
    }
    let (member_ids, members, var_names) = match schema.format {
        IngestFormat::Long => load_long(source, schema)?,
        IngestFormat::Directory => load_directory(source)?,
    };
    for t in &schema.targets {
        if !var_names.iter().any(|v| v == t) {
            return Err(Error::Schema(format!(
                "target '{t}' is not a data column"
            )));
        }
    }
    let variables: Vec<VariableMeta> = var_names
        .iter()
        .map(|n| VariableMeta::new(n.clone(), schema.role_for(n), ""))
        .collect();
    EnsembleTimeSeries::new(member_ids, members, variables, schema.step_duration)
}

type RawMembers<F> = (Vec<String>, Vec<Array2<F>>, Vec<String>);

fn load_long<F: Float>(path: &Path, schema: &IngestSchema) -> Result<RawMembers<F>> {
    let mut reader = csv::Reader::from_path(path)?;
    let headers: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();

    let member_col = headers
        .iter()
        .position(|h| *h == schema.member_column)
        .ok_or_else(|| {
            Error::Schema(format!(
                "missing member column '{}' in '{}'",
                schema.member_column,
                path.display()
            ))
        })?;
    let time_col = headers
        .iter()
        .position(|h| *h == schema.time_column)
        .ok_or_else(|| {
            Error::Schema(format!(
                "missing time column '{}' in '{}'",
                schema.time_column,
                path.display()
            ))
        })?;
    let var_cols: Vec<usize> = (0..headers.len())
        .filter(|&i| i != member_col && i != time_col)
        .collect();
    if var_cols.is_empty() {
        return Err(Error::Schema("long CSV has no variable columns".to_string()));
    }
    let var_names: Vec<String> = var_cols.iter().map(|&i| headers[i].clone()).collect();

    // member id → list of (t, values), in file order.
    let mut groups: BTreeMap<String, Vec<(i64, Vec<F>)>> = BTreeMap::new();
    for (row_idx, record) in reader.records().enumerate() {
        let record = record?;
        let row = row_idx + 1; // 1-based data row
        let member = record.get(member_col).unwrap_or("").to_string();
        let t: i64 = record
            .get(time_col)
            .unwrap_or("")
            .trim()
            .parse()
            .map_err(|_| Error::Ingestion {
                member: member.clone(),
                row,
                column: schema.time_column.clone(),
                reason: "not an integer time step".to_string(),
            })?;
        let mut values = Vec::with_capacity(var_cols.len());
        for (&ci, name) in var_cols.iter().zip(&var_names) {
            let cell = record.get(ci).unwrap_or("").trim();
            let v: f64 = cell.parse().map_err(|_| Error::Ingestion {
                member: member.clone(),
                row,
                column: name.clone(),
                reason: format!("cannot parse '{cell}' as a number"),
            })?;
            if !v.is_finite() {
                return Err(Error::Ingestion {
                    member,
                    row,
                    column: name.clone(),
                    reason: format!("non-finite value '{cell}'"),
                });
            }
            values.push(F::cast(v));
        }
        groups.entry(member).or_default().push((t, values));
    }

    let mut member_ids = Vec::with_capacity(groups.len());
    let mut members = Vec::with_capacity(groups.len());
    for (id, mut rows) in groups {
        rows.sort_by_key(|(t, _)| *t);
        for pair in rows.windows(2) {
            let (a, b) = (pair[0].0, pair[1].0);
            if b == a {
                return Err(Error::Shape(format!(
                    "member '{id}' has duplicate time step {a}"
                )));
            }
            if b != a + 1 {
                return Err(Error::Shape(format!(
                    "member '{id}' has a gap between time steps {a} and {b}"
                )));
            }
        }
        let t_len = rows.len();
        let mut data = Array2::zeros((t_len, var_names.len()));
        for (r, (_, values)) in rows.into_iter().enumerate() {
            for (c, v) in values.into_iter().enumerate() {
                data[[r, c]] = v;
            }
        }
        member_ids.push(id);
        members.push(data);
    }
    Ok((member_ids, members, var_names))
}

fn load_directory<F: Float>(dir: &Path) -> Result<RawMembers<F>> {
    if !dir.is_dir() {
        return Err(Error::Schema(format!(
            "'{}' is not a directory",
            dir.display()
        )));
    }
    let mut files: Vec<(String, std::path::PathBuf)> = Vec::new();
    for entry in fs::read_dir(dir)? {
        let path = entry?.path();
        if path.extension().and_then(|e| e.to_str()) == Some("csv") {
            let stem = path
                .file_stem()
                .and_then(|s| s.to_str())
                .unwrap_or_default()
                .to_string();
            files.push((stem, path));
        }
    }
    if files.is_empty() {
        return Err(Error::Schema(format!(
            "no .csv member files in '{}'",
            dir.display()
        )));
    }
    files.sort_by(|a, b| a.0.cmp(&b.0));

    let mut var_names: Option<Vec<String>> = None;
    let mut member_ids = Vec::with_capacity(files.len());
    let mut members = Vec::with_capacity(files.len());
    for (id, path) in files {
        let mut reader = csv::Reader::from_path(&path)?;
        let headers: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
        match &var_names {
            None => var_names = Some(headers.clone()),
            Some(expected) => {
                if *expected != headers {
                    return Err(Error::Shape(format!(
                        "member '{id}' columns {headers:?} differ from {expected:?}"
                    )));
                }
            }
        }
        let names = var_names.as_ref().expect("headers recorded");
        let mut rows: Vec<Vec<F>> = Vec::new();
        for (row_idx, record) in reader.records().enumerate() {
            let record = record?;
            let row = row_idx + 1;
            let mut values = Vec::with_capacity(names.len());
            for (ci, name) in names.iter().enumerate() {
                let cell = record.get(ci).unwrap_or("").trim();
                let v: f64 = cell.parse().map_err(|_| Error::Ingestion {
                    member: id.clone(),
                    row,
                    column: name.clone(),
                    reason: format!("cannot parse '{cell}' as a number"),
                })?;
                if !v.is_finite() {
                    return Err(Error::Ingestion {
                        member: id.clone(),
                        row,
                        column: name.clone(),
                        reason: format!("non-finite value '{cell}'"),
                    });
                }
                values.push(F::cast(v));
            }
            rows.push(values);
        }
        let mut data = Array2::zeros((rows.len(), names.len()));
        for (r, values) in rows.into_iter().enumerate() {
            for (c, v) in values.into_iter().enumerate() {
                data[[r, c]] = v;
            }
        }
        member_ids.push(id);
        members.push(data);
    }
    Ok((member_ids, members, var_names.expect("at least one member")))
}

/// Write an ensemble in the directory format (one CSV per member).
pub fn write_directory_csv<F: Float>(ens: &EnsembleTimeSeries<F>, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    let header: Vec<&str> = ens.variables().iter().map(|v| v.name.as_str()).collect();
    for m in 0..ens.n_members() {
        let path = dir.join(format!("{}.csv", ens.member_ids()[m]));
        let mut file = fs::File::create(&path)?;
        writeln!(file, "{}", header.join(","))?;
        let data = ens.member(m);
        for t in 0..data.nrows() {
            let row: Vec<String> = (0..data.ncols()).map(|c| format!("{}", data[[t, c]])).collect();
            writeln!(file, "{}", row.join(","))?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn schema_long() -> IngestSchema {
        IngestSchema {
            format: IngestFormat::Long,
            member_column: "member".into(),
            time_column: "t".into(),
            targets: vec!["y".into()],
            targets_as_predictors: true,
            step_duration: 1.0,
        }
    }

    #[test]
    fn long_format_orders_members_lexicographically() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("data.csv");
        let mut f = std::fs::File::create(&path).unwrap();
        writeln!(f, "member,t,u,y").unwrap();
        for t in 0..10 {
            writeln!(f, "b,{t},{},{}", t as f64, (t * 2) as f64).unwrap();
        }
        for t in 0..10 {
            writeln!(f, "a,{t},{},{}", t as f64 + 0.5, (t * 3) as f64).unwrap();
        }
        let ens = load_ensemble::<f64>(&path, &schema_long()).unwrap();
        assert_eq!(ens.member_ids(), &["a".to_string(), "b".to_string()]);
        assert_eq!(ens.n_members(), 2);
        assert_eq!(ens.member_len(0), 10);
        assert_eq!(ens.member(0)[[0, 0]], 0.5);
        assert_eq!(ens.variables()[1].role, Role::Both);
    }

    #[test]
    fn directory_format_shapes() {
        let dir = tempfile::tempdir().unwrap();
        for name in ["one", "two", "three"] {
            let mut f = std::fs::File::create(dir.path().join(format!("{name}.csv"))).unwrap();
            writeln!(f, "a,b,c,d,e").unwrap();
            for t in 0..100 {
                let vals: Vec<String> = (0..5).map(|v| format!("{}", (t * 5 + v) as f64)).collect();
                writeln!(f, "{}", vals.join(",")).unwrap();
            }
        }
        let schema = IngestSchema {
            format: IngestFormat::Directory,
            targets: vec!["e".into()],
            ..schema_long()
        };
        let ens = load_ensemble::<f64>(dir.path(), &schema).unwrap();
        assert_eq!(ens.n_members(), 3);
        assert_eq!(ens.n_vars(), 5);
        assert_eq!(ens.member_ids(), &["one".to_string(), "three".into(), "two".into()]);
        for m in 0..3 {
            assert_eq!(ens.member_len(m), 100);
        }
    }

    #[test]
    fn nan_cell_reports_exact_location() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("data.csv");
        let mut f = std::fs::File::create(&path).unwrap();
        writeln!(f, "member,t,u,y").unwrap();
        writeln!(f, "a,0,1.0,2.0").unwrap();
        writeln!(f, "a,1,NaN,2.0").unwrap();
        match load_ensemble::<f64>(&path, &schema_long()) {
            Err(Error::Ingestion { member, row, column, .. }) => {
                assert_eq!(member, "a");
                assert_eq!(row, 2);
                assert_eq!(column, "u");
            }
            other => panic!("expected ingestion error, got {other:?}"),
        }
    }

    #[test]
    fn missing_member_column_is_schema_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("data.csv");
        let mut f = std::fs::File::create(&path).unwrap();
        writeln!(f, "id,t,y").unwrap();
        writeln!(f, "a,0,1.0").unwrap();
        assert!(matches!(
            load_ensemble::<f64>(&path, &schema_long()),
            Err(Error::Schema(_))
        ));
    }

    #[test]
    fn inconsistent_directory_headers_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let mut f = std::fs::File::create(dir.path().join("a.csv")).unwrap();
        writeln!(f, "u,y\n1.0,2.0").unwrap();
        let mut g = std::fs::File::create(dir.path().join("b.csv")).unwrap();
        writeln!(g, "u,z\n1.0,2.0").unwrap();
        let schema = IngestSchema {
            format: IngestFormat::Directory,
            targets: vec![],
            ..schema_long()
        };
        assert!(matches!(
            load_ensemble::<f64>(dir.path(), &schema),
            Err(Error::Shape(_))
        ));
    }

    #[test]
    fn directory_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let src = dir.path().join("src");
        std::fs::create_dir(&src).unwrap();
        let mut f = std::fs::File::create(src.join("m0.csv")).unwrap();
        writeln!(f, "u,y").unwrap();
        for t in 0..30 {
            writeln!(f, "{},{}", t as f64 * 0.25, (t * t) as f64 * 0.1).unwrap();
        }
        let schema = IngestSchema {
            format: IngestFormat::Directory,
            targets: vec!["y".into()],
            ..schema_long()
        };
        let ens = load_ensemble::<f64>(&src, &schema).unwrap();
        let out = dir.path().join("out");
        write_directory_csv(&ens, &out).unwrap();
        let back = load_ensemble::<f64>(&out, &schema).unwrap();
        assert_eq!(back.member(0), ens.member(0));
    }

    #[test]
    fn gap_in_time_steps_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("data.csv");
        let mut f = std::fs::File::create(&path).unwrap();
        writeln!(f, "member,t,y").unwrap();
        writeln!(f, "a,0,1.0").unwrap();
        writeln!(f, "a,2,1.0").unwrap();
        assert!(matches!(
            load_ensemble::<f64>(&path, &schema_long()),
            Err(Error::Shape(_))
        ));
    }
}
