use std::collections::HashMap;
use std::io::Read;
use std::path::Path;

use log::{debug, warn};

use super::DataError;
use crate::chem::{connected_components, parse_smiles_all, MolGraph};

/// One molecule with a measured value.
#[derive(Clone, Debug, PartialEq)]
pub struct Entry {
    /// SMILES of the kept component; the merge key.
    pub smiles: String,
    pub value: f64,
    pub graph: MolGraph,
    /// 1-based line of the source row.
    pub line: u64,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct LoadReport {
    pub rows_read: usize,
    pub unparseable: usize,
    pub duplicates: usize,
    pub salts_stripped: usize,
}

/// A single-task dataset.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub task: String,
    pub entries: Vec<Entry>,
    pub report: LoadReport,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn values(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.value).collect()
    }
}

pub fn load_dataset(path: &Path, task: &str) -> Result<Dataset, DataError> {
    let file = std::fs::File::open(path).map_err(|source| DataError::FileUnreadable {
        path: path.to_path_buf(),
        source,
    })?;
    parse_dataset(file, task).map_err(|e| e.with_path(path))
}

/// Reads `smiles,value` CSV text. Rows whose SMILES fail to parse are
/// dropped and counted; repeated structures keep their first value.
pub fn parse_dataset<R: Read>(reader: R, task: &str) -> Result<Dataset, DataError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header = rdr.headers().map_err(|e| DataError::MalformedRow {
        path: None,
        line: 1,
        reason: e.to_string(),
    })?;
    let cols: Vec<String> = header
        .iter()
        .map(|h| h.trim_start_matches('\u{feff}').to_ascii_lowercase())
        .collect();
    if cols != ["smiles", "value"] {
        return Err(DataError::MalformedRow {
            path: None,
            line: 1,
            reason: format!("expected header smiles,value, found {}", cols.join(",")),
        });
    }

    let mut report = LoadReport::default();
    let mut entries: Vec<Entry> = Vec::new();
    let mut seen: HashMap<String, usize> = HashMap::new();
    for record in rdr.records() {
        let record = record.map_err(|e| DataError::MalformedRow {
            path: None,
            line: e.position().map_or(0, |p| p.line()),
            reason: e.to_string(),
        })?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() == 1 && record[0].is_empty() {
            continue;
        }
        if record.len() != 2 {
            return Err(DataError::MalformedRow {
                path: None,
                line,
                reason: format!("expected 2 fields, found {}", record.len()),
            });
        }
        report.rows_read += 1;
        let value: f64 = record[1].parse().map_err(|_| DataError::MalformedRow {
            path: None,
            line,
            reason: format!("value {:?} is not a number", &record[1]),
        })?;
        if !value.is_finite() {
            return Err(DataError::MalformedRow {
                path: None,
                line,
                reason: format!("value {value} is not finite"),
            });
        }
        let raw = match parse_smiles_all(&record[0]) {
            Ok(g) => g,
            Err(e) => {
                debug!("{task} line {line}: dropping {:?}: {e}", &record[0]);
                report.unparseable += 1;
                continue;
            }
        };
        let mut comps = connected_components(&raw);
        if comps.len() > 1 {
            report.salts_stripped += 1;
        }
        let graph = comps.swap_remove(0);
        let smiles = graph.component_smiles.clone();
        if let Some(&first) = seen.get(&smiles) {
            debug!("{task} line {line}: {smiles} repeats line {}", entries[first].line);
            report.duplicates += 1;
            continue;
        }
        seen.insert(smiles.clone(), entries.len());
        entries.push(Entry {
            smiles,
            value,
            graph,
            line,
        });
    }
    if report.unparseable > 0 {
        warn!("{task}: dropped {} unparseable SMILES", report.unparseable);
    }
    if report.duplicates > 0 {
        warn!("{task}: {} duplicate structures kept their first value", report.duplicates);
    }
    if report.salts_stripped > 0 {
        warn!("{task}: kept the largest component of {} multi-component SMILES", report.salts_stripped);
    }
    if entries.is_empty() {
        return Err(DataError::EmptyDataset {
            path: None,
            task: task.to_string(),
        });
    }
    Ok(Dataset {
        task: task.to_string(),
        entries,
        report,
    })
}

/// Removes entries whose value is below `threshold`; returns the count removed.
pub fn filter_below(dataset: &Dataset, threshold: f64) -> (Dataset, usize) {
    let entries: Vec<Entry> = dataset
        .entries
        .iter()
        .filter(|e| e.value >= threshold)
        .cloned()
        .collect();
    let removed = dataset.entries.len() - entries.len();
    (
        Dataset {
            task: dataset.task.clone(),
            entries,
            report: dataset.report.clone(),
        },
        removed,
    )
}

pub const FREESOLV_THRESHOLD: f64 = -10.0;

/// Drops hydration free energies below −10.
pub fn filter_freesolv(dataset: &Dataset) -> (Dataset, usize) {
    filter_below(dataset, FREESOLV_THRESHOLD)
}

/// Sparse molecules × tasks target matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct TaskTable {
    pub smiles: Vec<String>,
    pub graphs: Vec<MolGraph>,
    pub task_names: Vec<String>,
    /// Row-major `n × K`; cells with a false mask hold NaN.
    pub values: Vec<f64>,
    pub mask: Vec<bool>,
}

/// Unions datasets by SMILES. Rows appear in order of first sighting.
pub fn merge_tasks(datasets: &[Dataset]) -> Result<TaskTable, DataError> {
    if datasets.is_empty() {
        return Err(DataError::NoTasks);
    }
    let k = datasets.len();
    let mut names: Vec<String> = Vec::with_capacity(k);
    for d in datasets {
        if names.contains(&d.task) {
            return Err(DataError::DuplicateTask(d.task.clone()));
        }
        names.push(d.task.clone());
    }
    let mut row_of: HashMap<&str, usize> = HashMap::new();
    let mut smiles = Vec::new();
    let mut graphs = Vec::new();
    let mut values: Vec<f64> = Vec::new();
    let mut mask: Vec<bool> = Vec::new();
    for (t, d) in datasets.iter().enumerate() {
        for e in &d.entries {
            let row = *row_of.entry(e.smiles.as_str()).or_insert_with(|| {
                smiles.push(e.smiles.clone());
                graphs.push(e.graph.clone());
                values.extend(std::iter::repeat_n(f64::NAN, k));
                mask.extend(std::iter::repeat_n(false, k));
                smiles.len() - 1
            });
            values[row * k + t] = e.value;
            mask[row * k + t] = true;
        }
    }
    Ok(TaskTable {
        smiles,
        graphs,
        task_names: names,
        values,
        mask,
    })
}

impl TaskTable {
    pub fn len(&self) -> usize {
        self.smiles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.smiles.is_empty()
    }

    pub fn task_count(&self) -> usize {
        self.task_names.len()
    }

    pub fn task_index(&self, name: &str) -> Option<usize> {
        self.task_names.iter().position(|n| n == name)
    }

    pub fn value(&self, row: usize, task: usize) -> Option<f64> {
        let i = row * self.task_count() + task;
        self.mask[i].then(|| self.values[i])
    }

    pub fn present(&self, row: usize, task: usize) -> bool {
        self.mask[row * self.task_count() + task]
    }

    pub fn present_count(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }

    /// Rows that carry a value for `task`.
    pub fn rows_with(&self, task: usize) -> Vec<usize> {
        (0..self.len()).filter(|&r| self.present(r, task)).collect()
    }

    /// Restricts to `names` (in that order) and drops rows left without values.
    pub fn select_tasks(&self, names: &[String]) -> Result<TaskTable, DataError> {
        let cols: Vec<usize> = names
            .iter()
            .map(|n| self.task_index(n).ok_or_else(|| DataError::UnknownTask(n.clone())))
            .collect::<Result<_, _>>()?;
        if cols.is_empty() {
            return Err(DataError::NoTasks);
        }
        let mut out = TaskTable {
            smiles: Vec::new(),
            graphs: Vec::new(),
            task_names: names.to_vec(),
            values: Vec::new(),
            mask: Vec::new(),
        };
        for r in 0..self.len() {
            if !cols.iter().any(|&c| self.present(r, c)) {
                continue;
            }
            out.smiles.push(self.smiles[r].clone());
            out.graphs.push(self.graphs[r].clone());
            for &c in &cols {
                let i = r * self.task_count() + c;
                out.values.push(self.values[i]);
                out.mask.push(self.mask[i]);
            }
        }
        Ok(out)
    }

    /// Restricts to the columns `names`, keeping every row (and its index).
    pub fn project(&self, names: &[String]) -> Result<TaskTable, DataError> {
        let cols: Vec<usize> = names
            .iter()
            .map(|n| self.task_index(n).ok_or_else(|| DataError::UnknownTask(n.clone())))
            .collect::<Result<_, _>>()?;
        if cols.is_empty() {
            return Err(DataError::NoTasks);
        }
        let k = self.task_count();
        let mut values = Vec::with_capacity(self.len() * cols.len());
        let mut mask = Vec::with_capacity(self.len() * cols.len());
        for r in 0..self.len() {
            for &c in &cols {
                values.push(self.values[r * k + c]);
                mask.push(self.mask[r * k + c]);
            }
        }
        Ok(TaskTable {
            smiles: self.smiles.clone(),
            graphs: self.graphs.clone(),
            task_names: names.to_vec(),
            values,
            mask,
        })
    }

    /// The rows of `rows` that carry at least one value.
    pub fn rows_with_any(&self, rows: &[usize]) -> Vec<usize> {
        let k = self.task_count();
        rows.iter()
            .copied()
            .filter(|&r| self.mask[r * k..(r + 1) * k].iter().any(|&m| m))
            .collect()
    }

    /// The rows at `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> TaskTable {
        let k = self.task_count();
        let mut out = TaskTable {
            smiles: Vec::with_capacity(indices.len()),
            graphs: Vec::with_capacity(indices.len()),
            task_names: self.task_names.clone(),
            values: Vec::with_capacity(indices.len() * k),
            mask: Vec::with_capacity(indices.len() * k),
        };
        for &r in indices {
            out.smiles.push(self.smiles[r].clone());
            out.graphs.push(self.graphs[r].clone());
            out.values.extend_from_slice(&self.values[r * k..(r + 1) * k]);
            out.mask.extend_from_slice(&self.mask[r * k..(r + 1) * k]);
        }
        out
    }

    /// `smiles,<task1>,...` with empty fields for missing values.
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["smiles".to_string()];
        header.extend(self.task_names.iter().cloned());
        w.write_record(&header).expect("write to memory");
        for r in 0..self.len() {
            let mut rec = vec![self.smiles[r].clone()];
            for t in 0..self.task_count() {
                rec.push(self.value(r, t).map(|v| v.to_string()).unwrap_or_default());
            }
            w.write_record(&rec).expect("write to memory");
        }
        String::from_utf8(w.into_inner().expect("flush to memory")).expect("utf-8")
    }
}
