use serde::Serialize;

use super::TaskTable;

pub const DEFAULT_MIN_OVERLAP: usize = 20;

/// Pearson correlations between task columns over shared molecules.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CorrelationMatrix {
    pub task_names: Vec<String>,
    /// Row-major `K × K`; `None` where the correlation is undefined.
    pub r: Vec<Option<f64>>,
    /// Row-major `K × K` count of molecules present in both tasks.
    pub overlap: Vec<usize>,
    pub min_overlap: usize,
}

impl CorrelationMatrix {
    pub fn size(&self) -> usize {
        self.task_names.len()
    }

    pub fn get(&self, a: usize, b: usize) -> Option<f64> {
        self.r[a * self.size() + b]
    }

    pub fn overlap(&self, a: usize, b: usize) -> usize {
        self.overlap[a * self.size() + b]
    }

    /// A matrix from explicit coefficients, for fixtures and overrides.
    pub fn from_values(task_names: Vec<String>, r: Vec<Option<f64>>) -> CorrelationMatrix {
        let k = task_names.len();
        assert_eq!(r.len(), k * k, "matrix must be K x K");
        CorrelationMatrix {
            task_names,
            r,
            overlap: vec![usize::MAX; k * k],
            min_overlap: 0,
        }
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("task");
        for n in &self.task_names {
            out.push(',');
            out.push_str(n);
        }
        out.push('\n');
        for a in 0..self.size() {
            out.push_str(&self.task_names[a]);
            for b in 0..self.size() {
                out.push(',');
                if let Some(v) = self.get(a, b) {
                    out.push_str(&format!("{v:.6}"));
                }
            }
            out.push('\n');
        }
        out
    }
}

/// Pearson r, or `None` with fewer than two points or zero variance.
pub fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    assert_eq!(x.len(), y.len());
    let n = x.len();
    if n < 2 {
        return None;
    }
    let mx = x.iter().sum::<f64>() / n as f64;
    let my = y.iter().sum::<f64>() / n as f64;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

pub fn correlation_matrix(table: &TaskTable, min_overlap: usize) -> CorrelationMatrix {
    let k = table.task_count();
    let mut r = vec![None; k * k];
    let mut overlap = vec![0; k * k];
    for a in 0..k {
        for b in a..k {
            let (mut xs, mut ys) = (Vec::new(), Vec::new());
            for row in 0..table.len() {
                if let (Some(x), Some(y)) = (table.value(row, a), table.value(row, b)) {
                    xs.push(x);
                    ys.push(y);
                }
            }
            overlap[a * k + b] = xs.len();
            overlap[b * k + a] = xs.len();
            let value = if a == b {
                pearson(&xs, &ys).map(|_| 1.0)
            } else if xs.len() >= min_overlap {
                pearson(&xs, &ys)
            } else {
                None
            };
            r[a * k + b] = value;
            r[b * k + a] = value;
        }
    }
    CorrelationMatrix {
        task_names: table.task_names.clone(),
        r,
        overlap,
        min_overlap,
    }
}
