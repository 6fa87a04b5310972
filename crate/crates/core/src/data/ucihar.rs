use std::collections::BTreeMap;
use std::path::Path;

use crate::error::{Error, Result};
use crate::model::TaskData;

pub const UCIHAR_FEATURES: usize = 561;

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::Io { path: path.display().to_string(), msg: e.to_string() })
}

fn records(path: &Path) -> Result<Vec<(usize, String)>> {
    Ok(read(path)?
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| (i + 1, l.to_string()))
        .collect())
}

fn parse_int(path: &Path, line: usize, text: &str) -> Result<i64> {
    let mut fields = text.split_whitespace();
    let value = fields.next().and_then(|f| f.parse::<i64>().ok());
    match (value, fields.next()) {
        (Some(v), None) => Ok(v),
        _ => Err(Error::Parse {
            path: path.display().to_string(),
            line,
            msg: format!("expected one integer, found {text:?}"),
        }),
    }
}

/// Loads the published UCI HAR text layout and returns one task per
/// subject, ordered by subject id (the task id is the subject id). Labels
/// are `+1` for `positive_class_id` and `-1` otherwise.
pub fn load_ucihar(
    features_path: impl AsRef<Path>,
    labels_path: impl AsRef<Path>,
    subject_path: impl AsRef<Path>,
    positive_class_id: i64,
) -> Result<Vec<TaskData>> {
    let (fp, lp, sp) = (features_path.as_ref(), labels_path.as_ref(), subject_path.as_ref());
    let rows = records(fp)?;
    let labels = records(lp)?;
    let subjects = records(sp)?;
    if rows.len() != labels.len() || rows.len() != subjects.len() {
        return Err(Error::InvalidInput(format!(
            "record counts differ: {} feature rows, {} labels, {} subjects",
            rows.len(),
            labels.len(),
            subjects.len()
        )));
    }
    let mut grouped: BTreeMap<i64, (Vec<f64>, Vec<f64>)> = BTreeMap::new();
    for ((row, label), subject) in rows.iter().zip(&labels).zip(&subjects) {
        let mut values = Vec::with_capacity(UCIHAR_FEATURES);
        for field in row.1.split_whitespace() {
            let v: f64 = field.parse().map_err(|_| Error::Parse {
                path: fp.display().to_string(),
                line: row.0,
                msg: format!("not a number: {field:?}"),
            })?;
            values.push(v);
        }
        if values.len() != UCIHAR_FEATURES {
            return Err(Error::Parse {
                path: fp.display().to_string(),
                line: row.0,
                msg: format!("expected {UCIHAR_FEATURES} columns, found {}", values.len()),
            });
        }
        let activity = parse_int(lp, label.0, &label.1)?;
        let subject = parse_int(sp, subject.0, &subject.1)?;
        let entry = grouped.entry(subject).or_default();
        entry.0.extend(values);
        entry.1.push(if activity == positive_class_id { 1.0 } else { -1.0 });
    }
    grouped
        .into_iter()
        .map(|(subject, (features, labels))| {
            let id = usize::try_from(subject)
                .map_err(|_| Error::InvalidInput(format!("negative subject id {subject}")))?;
            TaskData::new(id, UCIHAR_FEATURES, features, labels)
        })
        .collect()
}

/// Keeps the first `n` samples of every task.
pub fn truncate_per_task(tasks: &[TaskData], n: usize) -> Vec<TaskData> {
    tasks.iter().map(|t| t.truncate(n)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::fmt::Write as _;
    use std::fs;

    fn write_dataset(dir: &Path, rows: usize, cols: usize) -> (std::path::PathBuf, std::path::PathBuf, std::path::PathBuf) {
        let mut x = String::new();
        let mut y = String::new();
        let mut s = String::new();
        for i in 0..rows {
            for j in 0..cols {
                write!(x, " {:.7e}", (i * cols + j) as f64 * 1e-4 - 0.5).unwrap();
            }
            x.push('\n');
            writeln!(y, "{}", 1 + i % 6).unwrap();
            writeln!(s, "{}", 1 + i % 3).unwrap();
        }
        let paths = (dir.join("X.txt"), dir.join("y.txt"), dir.join("subject.txt"));
        fs::write(&paths.0, x).unwrap();
        fs::write(&paths.1, y).unwrap();
        fs::write(&paths.2, s).unwrap();
        paths
    }

    #[test]
    fn loads_one_task_per_subject() {
        let dir = tempfile::tempdir().unwrap();
        let (x, y, s) = write_dataset(dir.path(), 240, UCIHAR_FEATURES);
        let tasks = load_ucihar(&x, &y, &s, 4).unwrap();
        assert_eq!(tasks.len(), 3);
        assert_eq!(tasks.iter().map(|t| t.task_id()).collect::<Vec<_>>(), vec![1, 2, 3]);
        for t in &tasks {
            assert_eq!(t.d(), 561);
            assert_eq!(t.n(), 80);
        }
        let positives: usize = tasks.iter().map(|t| t.labels().iter().filter(|&&l| l > 0.0).count()).sum();
        assert_eq!(positives, 40);
        let light = truncate_per_task(&tasks, 10);
        assert!(light.iter().all(|t| t.n() == 10));
    }

    #[test]
    fn rejects_wrong_column_count() {
        let dir = tempfile::tempdir().unwrap();
        let (x, y, s) = write_dataset(dir.path(), 4, 560);
        match load_ucihar(&x, &y, &s, 4) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 1),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn rejects_malformed_and_missing_files() {
        let dir = tempfile::tempdir().unwrap();
        let (x, y, s) = write_dataset(dir.path(), 3, UCIHAR_FEATURES);
        fs::write(&y, "1\nsitting\n2\n").unwrap();
        match load_ucihar(&x, &y, &s, 4) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
        let missing = dir.path().join("nope.txt");
        assert!(matches!(load_ucihar(&missing, &y, &s, 4), Err(Error::Io { .. })));
    }
}
