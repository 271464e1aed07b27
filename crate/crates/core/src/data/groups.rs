use super::{CorrelationMatrix, DataError};

pub const DEFAULT_THRESHOLD: f64 = 0.5;

/// How to treat task pairs whose correlation is undefined.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum UndefinedPolicy {
    /// Fail with [`DataError::UndefinedCorrelation`].
    #[default]
    Error,
    /// Treat the pair as uncorrelated.
    Skip,
}

/// Groups tasks joined by chains of pairs with `|r| ≥ threshold`.
///
/// Groups are ordered by their first task and list tasks in matrix order;
/// every task lands in exactly one group.
pub fn select_target_groups(
    corr: &CorrelationMatrix,
    threshold: f64,
    policy: UndefinedPolicy,
) -> Result<Vec<Vec<String>>, DataError> {
    let k = corr.size();
    let mut parent: Vec<usize> = (0..k).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    for a in 0..k {
        for b in a + 1..k {
            let r = match corr.get(a, b) {
                Some(r) => r,
                None if policy == UndefinedPolicy::Skip => continue,
                None => {
                    return Err(DataError::UndefinedCorrelation {
                        a: corr.task_names[a].clone(),
                        b: corr.task_names[b].clone(),
                        overlap: corr.overlap(a, b),
                    })
                }
            };
            if r.abs() >= threshold {
                let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
                if ra != rb {
                    parent[ra.max(rb)] = ra.min(rb);
                }
            }
        }
    }
    let mut groups: Vec<(usize, Vec<String>)> = Vec::new();
    for t in 0..k {
        let root = find(&mut parent, t);
        match groups.iter_mut().find(|(r, _)| *r == root) {
            Some((_, g)) => g.push(corr.task_names[t].clone()),
            None => groups.push((root, vec![corr.task_names[t].clone()])),
        }
    }
    Ok(groups.into_iter().map(|(_, g)| g).collect())
}

/// Reads bucket lines: one comma-separated group per line; blank lines and
/// lines starting with `#` are ignored.
pub fn parse_override(text: &str) -> Result<Vec<Vec<String>>, DataError> {
    let mut buckets = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let names: Vec<String> = line.split(',').map(|s| s.trim().to_string()).collect();
        if names.iter().any(|n| n.is_empty()) {
            return Err(DataError::Override {
                line: i + 1,
                reason: "empty task name".into(),
            });
        }
        let mut sorted = names.clone();
        sorted.sort();
        sorted.dedup();
        if sorted.len() != names.len() {
            return Err(DataError::Override {
                line: i + 1,
                reason: "task repeated within a bucket".into(),
            });
        }
        buckets.push(names);
    }
    Ok(buckets)
}

/// Replaces each correlation group that has buckets with those buckets.
///
/// A bucket must name known tasks from a single group, and the buckets of a
/// group must together cover it. Buckets may share tasks, so a task can be
/// trained in more than one group. Groups without buckets are kept.
pub fn apply_override(
    groups: &[Vec<String>],
    buckets: &[Vec<String>],
) -> Result<Vec<Vec<String>>, DataError> {
    let owner = |task: &str| groups.iter().position(|g| g.iter().any(|t| t == task));
    let mut per_group: Vec<Vec<Vec<String>>> = vec![Vec::new(); groups.len()];
    for (bi, bucket) in buckets.iter().enumerate() {
        let mut home = None;
        for t in bucket {
            let g = owner(t).ok_or_else(|| DataError::UnknownTask(t.clone()))?;
            if home.is_some_and(|h| h != g) {
                return Err(DataError::Override {
                    line: bi + 1,
                    reason: format!("bucket {} spans several correlation groups", bucket.join(",")),
                });
            }
            home = Some(g);
        }
        if let Some(g) = home {
            per_group[g].push(bucket.clone());
        }
    }
    let mut out = Vec::new();
    for (g, group) in groups.iter().enumerate() {
        if per_group[g].is_empty() {
            out.push(group.clone());
            continue;
        }
        if let Some(missing) = group
            .iter()
            .find(|t| !per_group[g].iter().any(|b| b.contains(t)))
        {
            return Err(DataError::Override {
                line: 0,
                reason: format!("buckets for group {} leave out {missing}", group.join(",")),
            });
        }
        out.extend(per_group[g].iter().cloned());
    }
    Ok(out)
}
