use std::collections::HashMap;
use std::fs::File;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::data::{FieldSchema, GroundTruth, RecordTable};
use crate::error::{Error, Result};

use super::{read_json, write_json, IngestSpec};

/// Category labels of one field; a value's code is its index.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FieldDictionary {
    pub name: String,
    pub values: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dictionary {
    pub fields: Vec<FieldDictionary>,
}

impl Dictionary {
    /// Labels `"0"`, `"1"`, ... matching the schema's level counts.
    pub fn numeric(schema: &FieldSchema) -> Self {
        Self {
            fields: schema
                .names()
                .iter()
                .zip(schema.levels())
                .map(|(name, &m)| FieldDictionary { name: name.clone(), values: (0..m).map(|v| v.to_string()).collect() })
                .collect(),
        }
    }

    pub fn label(&self, field: usize, code: u32) -> &str {
        &self.fields[field].values[code as usize]
    }
}

/// Parsed lists ready for the sampler.
#[derive(Clone, Debug)]
pub struct Ingested {
    pub table: RecordTable,
    pub truth: Option<GroundTruth>,
    pub dictionary: Dictionary,
    /// Field indices of the declared block keys.
    pub block_keys: Vec<usize>,
}

/// Read the lists, honouring the spec's dictionary settings.
pub fn ingest(spec: &IngestSpec) -> Result<Ingested> {
    spec.validate()?;
    let frozen = match (&spec.dictionary, spec.freeze_dictionary) {
        (Some(path), true) => Some(read_json::<Dictionary>(path)?),
        _ => None,
    };
    let out = ingest_with(spec, frozen.as_ref())?;
    if let (Some(path), false) = (&spec.dictionary, spec.freeze_dictionary) {
        write_json(path, &out.dictionary)?;
    }
    Ok(out)
}

/// Read the lists. With a `frozen` dictionary codes and level counts come
/// from it and unseen values fail; otherwise codes follow first appearance
/// across all files in order.
pub fn ingest_with(spec: &IngestSpec, frozen: Option<&Dictionary>) -> Result<Ingested> {
    let p = spec.fields.len();
    let mut dicts: Vec<(Vec<String>, HashMap<String, u32>)> = match frozen {
        Some(d) => spec
            .fields
            .iter()
            .map(|name| {
                let f = d
                    .fields
                    .iter()
                    .find(|f| &f.name == name)
                    .ok_or_else(|| Error::Config(format!("dictionary has no field {name:?}")))?;
                let index = f.values.iter().enumerate().map(|(i, v)| (v.clone(), i as u32)).collect();
                Ok((f.values.clone(), index))
            })
            .collect::<Result<_>>()?,
        None => vec![Default::default(); p],
    };

    let mut files = Vec::with_capacity(spec.files.len());
    let mut labels: Vec<Option<String>> = Vec::new();
    for path in &spec.files {
        let name = path.display().to_string();
        let err = |line: u64, message: String| Error::Ingest { file: name.clone(), line, message };
        let file = File::open(path).map_err(|e| err(0, e.to_string()))?;
        let mut reader = csv::ReaderBuilder::new()
            .delimiter(spec.delimiter as u8)
            .flexible(true)
            .trim(csv::Trim::All)
            .from_reader(file);
        let header = reader.headers().map_err(|e| err(1, e.to_string()))?.clone();
        if header.is_empty() {
            return Err(err(1, "missing header".into()));
        }
        let column = |want: &str| header.iter().position(|h| h == want);
        let columns = spec
            .fields
            .iter()
            .map(|f| column(f).ok_or_else(|| err(1, format!("no column {f:?}"))))
            .collect::<Result<Vec<_>>>()?;
        let truth_col = match &spec.truth_column {
            Some(t) => Some(column(t).ok_or_else(|| err(1, format!("no truth column {t:?}")))?),
            None => None,
        };

        let mut rows = Vec::new();
        for row in reader.records() {
            let row = row.map_err(|e| err(e.position().map_or(0, |p| p.line()), e.to_string()))?;
            let line = row.position().map_or(0, |p| p.line());
            if row.len() != header.len() {
                return Err(err(line, format!("{} values for {} columns", row.len(), header.len())));
            }
            let mut record = Vec::with_capacity(p);
            for (l, &c) in columns.iter().enumerate() {
                let value = &row[c];
                let (values, index) = &mut dicts[l];
                let code = match index.get(value) {
                    Some(&code) => code,
                    None if frozen.is_some() => {
                        return Err(err(line, format!("value {value:?} of field {:?} is not in the dictionary", spec.fields[l])))
                    }
                    None => {
                        let code = values.len() as u32;
                        values.push(value.to_string());
                        index.insert(value.to_string(), code);
                        code
                    }
                };
                record.push(code);
            }
            if let Some(c) = truth_col {
                labels.push(Some(row[c].to_string()).filter(|s| !s.is_empty()));
            }
            rows.push(record);
        }
        if rows.is_empty() {
            return Err(err(1, "file has no records".into()));
        }
        files.push(rows);
    }

    let levels = dicts.iter().map(|(values, _)| (values.len() as u32).max(2)).collect();
    let schema = FieldSchema::new(spec.fields.clone(), levels)?;
    let table = RecordTable::new(schema, files)?;
    let block_keys = spec
        .block_keys
        .iter()
        .map(|k| spec.fields.iter().position(|f| f == k).expect("validated"))
        .collect();
    let dictionary = Dictionary {
        fields: spec
            .fields
            .iter()
            .zip(dicts)
            .map(|(name, (values, _))| FieldDictionary { name: name.clone(), values })
            .collect(),
    };
    Ok(Ingested {
        table,
        truth: spec.truth_column.as_ref().map(|_| GroundTruth::from_labels(&labels)),
        dictionary,
        block_keys,
    })
}

/// Write one CSV per file into `dir` as `list1.csv`, `list2.csv`, ...
/// with an `id` column when `truth` is given. Returns the paths.
pub fn write_lists(
    dir: &Path,
    table: &RecordTable,
    truth: Option<&GroundTruth>,
    dictionary: &Dictionary,
) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let mut paths = Vec::with_capacity(table.k());
    for i in 0..table.k() {
        let path = dir.join(format!("list{}.csv", i + 1));
        let mut w = csv::Writer::from_path(&path)?;
        let mut header: Vec<&str> = Vec::new();
        if truth.is_some() {
            header.push("id");
        }
        header.extend(table.schema().names().iter().map(String::as_str));
        w.write_record(&header)?;
        for r in table.file_range(i) {
            let mut row: Vec<String> = Vec::with_capacity(header.len());
            if let Some(t) = truth {
                row.push(t.id(r).map(|v| v.to_string()).unwrap_or_default());
            }
            row.extend((0..table.p()).map(|l| dictionary.label(l, table.value(r, l)).to_string()));
            w.write_record(&row)?;
        }
        w.flush()?;
        paths.push(path);
    }
    Ok(paths)
}
