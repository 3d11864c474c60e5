//! Synthetic task-suite generation and CSV ingestion.
//!
//! Randomness is ChaCha12 seeded from the suite seed, with one counter-mode
//! stream per task index (`set_stream(i)`), so suites are reproducible and
//! tasks can be generated independently in parallel. The initial iterate uses
//! the reserved stream `u64::MAX`.

use std::path::Path;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::losses::{quadratic_from_regression, smoothed_hinge, QuadraticLoss};
use crate::task_model::{Loss, Matrix, TaskPool, Vector};

fn task_rng(seed: u64, task_index: u64) -> ChaCha12Rng {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    rng.set_stream(task_index);
    rng
}

fn standard_normal_vector(rng: &mut ChaCha12Rng, d: usize) -> Vector {
    Vector::from_fn(d, |_, _| rng.sample::<f64, _>(StandardNormal))
}

/// Deterministic standard-normal initial iterate (stream `u64::MAX`).
pub fn initial_point(d: usize, seed: u64) -> Vector {
    let mut rng = task_rng(seed, u64::MAX);
    standard_normal_vector(&mut rng, d)
}

/// Parameters of a synthetic linear-regression suite.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegressionSuiteSpec {
    /// Number of tasks.
    pub m: usize,
    /// Parameter dimension.
    pub d: usize,
    /// Samples per task.
    pub n: usize,
    /// Standard deviation of the label noise.
    pub noise: f64,
    pub seed: u64,
}

impl RegressionSuiteSpec {
    fn validate(&self) -> Result<()> {
        for (name, v) in [("m", self.m), ("d", self.d), ("n", self.n)] {
            if v == 0 {
                return Err(Error::InvalidArgument {
                    name: name.to_string(),
                    reason: "must be positive".to_string(),
                });
            }
        }
        if !self.noise.is_finite() || self.noise < 0.0 {
            return Err(Error::InvalidArgument {
                name: "noise".to_string(),
                reason: format!("must be finite and non-negative (got {})", self.noise),
            });
        }
        Ok(())
    }
}

/// Generates `m` regression tasks: per task a ground-truth vector with
/// standard-normal coordinates, a standard-normal design, and labels
/// `y = Xγ + noise·Z`, wrapped into mean-squared quadratics with uniform
/// weights.
pub fn gen_regression_suite(spec: &RegressionSuiteSpec) -> Result<TaskPool> {
    spec.validate()?;
    let kernels: Vec<Result<Arc<dyn Loss>>> = crate::parallel::map_range(spec.m, |i| {
        let mut rng = task_rng(spec.seed, i as u64);
        let gamma = standard_normal_vector(&mut rng, spec.d);
        let x = Matrix::from_fn(spec.n, spec.d, |_, _| rng.sample::<f64, _>(StandardNormal));
        let noise = standard_normal_vector(&mut rng, spec.n) * spec.noise;
        let y = &x * &gamma + noise;
        let q = quadratic_from_regression(&x, &y)?;
        Ok(Arc::new(q) as Arc<dyn Loss>)
    });
    TaskPool::uniform(kernels.into_iter().collect::<Result<Vec<_>>>()?)
}

/// Parameters of a synthetic binary-classification suite.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassificationSuiteSpec {
    pub m: usize,
    pub d: usize,
    /// Samples per task; `n·balance` must be an integer.
    pub n: usize,
    /// Fraction of positive samples (0.5 gives an even split).
    pub balance: f64,
    /// Distance of each class cluster from the origin along a random unit
    /// direction.
    pub separation: f64,
    /// Smoothing width of the hinge.
    pub delta: f64,
    pub seed: u64,
}

impl ClassificationSuiteSpec {
    /// Even-split suite with the default smoothing width 0.1.
    pub fn even(m: usize, d: usize, n: usize, separation: f64, seed: u64) -> Self {
        ClassificationSuiteSpec {
            m,
            d,
            n,
            balance: 0.5,
            separation,
            delta: 0.1,
            seed,
        }
    }

    fn positives(&self) -> Result<usize> {
        let raw = self.n as f64 * self.balance;
        let rounded = raw.round();
        if (raw - rounded).abs() > 1e-9 {
            return Err(Error::InvalidArgument {
                name: "balance".to_string(),
                reason: format!("n·balance = {raw} must be an integer"),
            });
        }
        Ok(rounded as usize)
    }

    fn validate(&self) -> Result<()> {
        for (name, v) in [("m", self.m), ("d", self.d), ("n", self.n)] {
            if v == 0 {
                return Err(Error::InvalidArgument {
                    name: name.to_string(),
                    reason: "must be positive".to_string(),
                });
            }
        }
        if !(0.0..=1.0).contains(&self.balance) {
            return Err(Error::InvalidArgument {
                name: "balance".to_string(),
                reason: format!("must lie in [0, 1] (got {})", self.balance),
            });
        }
        if self.balance == 0.5 && !self.n.is_multiple_of(2) {
            return Err(Error::InvalidArgument {
                name: "n".to_string(),
                reason: "must be even for an even class split".to_string(),
            });
        }
        self.positives()?;
        Ok(())
    }
}

/// Generates `m` classification tasks: per task a random unit direction `u`,
/// Gaussian clusters at `±separation·u`, labels `±1`, smoothed-hinge losses,
/// uniform weights.
pub fn gen_classification_suite(spec: &ClassificationSuiteSpec) -> Result<TaskPool> {
    spec.validate()?;
    let n_pos = spec.positives()?;
    let kernels: Vec<Result<Arc<dyn Loss>>> = crate::parallel::map_range(spec.m, |i| {
        let mut rng = task_rng(spec.seed, i as u64);
        let mut u = standard_normal_vector(&mut rng, spec.d);
        let norm = u.norm();
        if norm > 0.0 {
            u /= norm;
        }
        let mut x = Matrix::zeros(spec.n, spec.d);
        let mut y = Vec::with_capacity(spec.n);
        for j in 0..spec.n {
            let label = if j < n_pos { 1.0 } else { -1.0 };
            let center = &u * (spec.separation * label);
            let sample = center + standard_normal_vector(&mut rng, spec.d);
            x.row_mut(j).copy_from(&sample.transpose());
            y.push(label);
        }
        let hinge = smoothed_hinge(x, y, spec.delta)?;
        Ok(Arc::new(hinge) as Arc<dyn Loss>)
    });
    TaskPool::uniform(kernels.into_iter().collect::<Result<Vec<_>>>()?)
}

/// Seeded pool of `m` random `d`-dimensional quadratics with eigenvalues in
/// `[eig_lo, eig_hi]` (random orthogonal bases) and standard-normal linear
/// terms. Handy as a strongly convex fixture with heterogeneous curvature.
pub fn gen_random_quadratic_pool(
    m: usize,
    d: usize,
    eig_lo: f64,
    eig_hi: f64,
    seed: u64,
) -> Result<TaskPool> {
    if m == 0 || d == 0 {
        return Err(Error::InvalidArgument {
            name: "m/d".to_string(),
            reason: "must be positive".to_string(),
        });
    }
    if !(eig_lo.is_finite() && eig_hi.is_finite() && 0.0 < eig_lo && eig_lo <= eig_hi) {
        return Err(Error::InvalidArgument {
            name: "eig_lo/eig_hi".to_string(),
            reason: "need 0 < eig_lo <= eig_hi".to_string(),
        });
    }
    let kernels: Vec<Result<Arc<dyn Loss>>> = crate::parallel::map_range(m, |i| {
        let mut rng = task_rng(seed, i as u64);
        let gauss = Matrix::from_fn(d, d, |_, _| rng.sample::<f64, _>(StandardNormal));
        let q = gauss.qr().q();
        let eigs = Vector::from_fn(d, |_, _| rng.random_range(eig_lo..=eig_hi));
        let h = &q * Matrix::from_diagonal(&eigs) * q.transpose();
        // Orthogonal conjugation keeps symmetry only up to roundoff.
        let h = (&h + h.transpose()) * 0.5;
        let b = standard_normal_vector(&mut rng, d);
        Ok(Arc::new(QuadraticLoss::new(h, b, 0.0)?) as Arc<dyn Loss>)
    });
    TaskPool::uniform(kernels.into_iter().collect::<Result<Vec<_>>>()?)
}

/// Which loss a CSV ingestion builds per task.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CsvLossKind {
    Quadratic,
    Hinge,
}

/// One boolean predicate on a column; the cross product of all predicates
/// partitions the rows into tasks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SplitPredicate {
    /// True when the cell equals `value`.
    Equals { column: String, value: f64 },
    /// True when the cell exceeds `value`.
    GreaterThan { column: String, value: f64 },
    /// True when the cell exceeds the column mean over the whole file.
    AboveMean { column: String },
}

impl SplitPredicate {
    fn column(&self) -> &str {
        match self {
            SplitPredicate::Equals { column, .. }
            | SplitPredicate::GreaterThan { column, .. }
            | SplitPredicate::AboveMean { column } => column,
        }
    }
}

/// CSV ingestion description: which columns are features, which is the label,
/// and how to partition rows into tasks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CsvTaskSpec {
    pub path: String,
    pub feature_columns: Vec<String>,
    pub label_column: String,
    pub splits: Vec<SplitPredicate>,
    pub loss: CsvLossKind,
    /// Smoothing width for hinge losses.
    #[serde(default = "default_delta")]
    pub delta: f64,
}

fn default_delta() -> f64 {
    0.1
}

/// A loaded CSV pool plus the warnings produced while splitting.
#[derive(Debug)]
pub struct CsvPool {
    pub pool: TaskPool,
    pub warnings: Vec<String>,
}

struct ParsedCsv {
    headers: Vec<String>,
    rows: Vec<Vec<f64>>,
}

fn parse_numeric_csv(path: &Path) -> Result<ParsedCsv> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::Csv {
            row: None,
            column: None,
            reason: format!("cannot open {}: {e}", path.display()),
        })?;
    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| Error::Csv {
            row: None,
            column: None,
            reason: e.to_string(),
        })?
        .iter()
        .map(|h| h.to_string())
        .collect();
    let mut rows = Vec::new();
    for (idx, record) in reader.records().enumerate() {
        // Header is line 1; data starts at line 2.
        let line = idx as u64 + 2;
        let record = record.map_err(|e| Error::Csv {
            row: Some(line),
            column: None,
            reason: e.to_string(),
        })?;
        let mut row = Vec::with_capacity(headers.len());
        for (j, cell) in record.iter().enumerate() {
            let v: f64 = cell.parse().map_err(|_| Error::Csv {
                row: Some(line),
                column: headers.get(j).cloned(),
                reason: format!("unparsable numeric cell `{cell}`"),
            })?;
            row.push(v);
        }
        if row.len() != headers.len() {
            return Err(Error::Csv {
                row: Some(line),
                column: None,
                reason: format!("expected {} fields, got {}", headers.len(), row.len()),
            });
        }
        rows.push(row);
    }
    Ok(ParsedCsv { headers, rows })
}

fn column_index(headers: &[String], name: &str) -> Result<usize> {
    headers
        .iter()
        .position(|h| h == name)
        .ok_or_else(|| Error::Csv {
            row: None,
            column: Some(name.to_string()),
            reason: "missing column".to_string(),
        })
}

/// Standardizes each column of `m` to zero mean and unit variance in place.
/// Constant columns are centered and left unscaled.
pub fn standardize_columns(m: &mut Matrix) {
    let n = m.nrows();
    if n == 0 {
        return;
    }
    for j in 0..m.ncols() {
        let mean = m.column(j).sum() / n as f64;
        let mut var = 0.0;
        for i in 0..n {
            let dev = m[(i, j)] - mean;
            var += dev * dev;
        }
        let std = (var / n as f64).sqrt();
        let scale = if std > 0.0 { 1.0 / std } else { 1.0 };
        for i in 0..n {
            m[(i, j)] = (m[(i, j)] - mean) * scale;
        }
    }
}

/// Loads a CSV into one task per split cell. Features are standardized
/// (zero mean, unit variance per column over the whole file) before
/// splitting; empty cells are dropped with a warning; quadratic tasks use the
/// mean-squared regression form and hinge tasks require `±1` labels.
pub fn load_csv_tasks(spec: &CsvTaskSpec) -> Result<CsvPool> {
    let parsed = parse_numeric_csv(Path::new(&spec.path))?;
    if parsed.rows.is_empty() {
        return Err(Error::Csv {
            row: None,
            column: None,
            reason: "file has no data rows".to_string(),
        });
    }
    if spec.feature_columns.is_empty() {
        return Err(Error::InvalidArgument {
            name: "feature_columns".to_string(),
            reason: "need at least one feature".to_string(),
        });
    }
    let feature_idx: Vec<usize> = spec
        .feature_columns
        .iter()
        .map(|c| column_index(&parsed.headers, c))
        .collect::<Result<_>>()?;
    let label_idx = column_index(&parsed.headers, &spec.label_column)?;
    let split_idx: Vec<usize> = spec
        .splits
        .iter()
        .map(|s| column_index(&parsed.headers, s.column()))
        .collect::<Result<_>>()?;

    let n = parsed.rows.len();
    let d = feature_idx.len();
    let mut features = Matrix::from_fn(n, d, |i, j| parsed.rows[i][feature_idx[j]]);
    standardize_columns(&mut features);
    let labels: Vec<f64> = parsed.rows.iter().map(|r| r[label_idx]).collect();

    // Column means for AboveMean predicates, over the whole file.
    let means: Vec<f64> = split_idx
        .iter()
        .map(|&j| parsed.rows.iter().map(|r| r[j]).sum::<f64>() / n as f64)
        .collect();

    // Cell index of a row: bit k set iff predicate k holds.
    let cell_of = |row: &[f64]| -> usize {
        let mut cell = 0usize;
        for (k, pred) in spec.splits.iter().enumerate() {
            let v = row[split_idx[k]];
            let hit = match pred {
                SplitPredicate::Equals { value, .. } => v == *value,
                SplitPredicate::GreaterThan { value, .. } => v > *value,
                SplitPredicate::AboveMean { .. } => v > means[k],
            };
            if hit {
                cell |= 1 << k;
            }
        }
        cell
    };

    let n_cells = 1usize << spec.splits.len();
    let mut cells: Vec<Vec<usize>> = vec![Vec::new(); n_cells];
    for (i, row) in parsed.rows.iter().enumerate() {
        cells[cell_of(row)].push(i);
    }

    let mut warnings = Vec::new();
    let mut kernels: Vec<Arc<dyn Loss>> = Vec::new();
    for (cell, members) in cells.iter().enumerate() {
        if members.is_empty() {
            warnings.push(format!("split cell {cell} matched no rows; task dropped"));
            continue;
        }
        let x = Matrix::from_fn(members.len(), d, |i, j| features[(members[i], j)]);
        let y_vals: Vec<f64> = members.iter().map(|&i| labels[i]).collect();
        let kernel: Arc<dyn Loss> = match spec.loss {
            CsvLossKind::Quadratic => {
                let y = Vector::from_vec(y_vals);
                Arc::new(quadratic_from_regression(&x, &y)?)
            }
            CsvLossKind::Hinge => Arc::new(smoothed_hinge(x, y_vals, spec.delta)?),
        };
        kernels.push(kernel);
    }
    if kernels.is_empty() {
        return Err(Error::Csv {
            row: None,
            column: None,
            reason: "every split cell is empty".to_string(),
        });
    }
    Ok(CsvPool {
        pool: TaskPool::uniform(kernels)?,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    #[test]
    fn regression_suite_is_deterministic() {
        let spec = RegressionSuiteSpec {
            m: 10,
            d: 20,
            n: 100,
            noise: 1.0,
            seed: 42,
        };
        let a = gen_regression_suite(&spec).unwrap();
        let b = gen_regression_suite(&spec).unwrap();
        assert_eq!(a.num_tasks(), 10);
        for (ta, tb) in a.tasks().iter().zip(b.tasks()) {
            let qa = ta.kernel().as_quadratic().unwrap();
            let qb = tb.kernel().as_quadratic().unwrap();
            assert_eq!(qa.hessian(), qb.hessian(), "suites must agree bitwise");
            assert_eq!(qa.linear(), qb.linear());
        }
    }

    #[test]
    fn regression_suite_is_strongly_convex_for_tall_designs() {
        let spec = RegressionSuiteSpec {
            m: 10,
            d: 20,
            n: 100,
            noise: 1.0,
            seed: 7,
        };
        let pool = gen_regression_suite(&spec).unwrap();
        assert!(crate::task_model::validate_pool(&pool).is_ok());
        for t in pool.tasks() {
            let (lo, _) = t.kernel().as_quadratic().unwrap().eigen_range();
            assert!(lo > 0.0, "n > d design should be full rank");
        }
    }

    #[test]
    fn regression_noise_free_shared_truth_interpolates() {
        // One task, no noise: the ground truth minimizes with value 0.
        let spec = RegressionSuiteSpec {
            m: 1,
            d: 5,
            n: 40,
            noise: 0.0,
            seed: 3,
        };
        let pool = gen_regression_suite(&spec).unwrap();
        let q = pool.task(0).kernel().as_quadratic().unwrap();
        let min = q.minimizer().unwrap();
        assert!(q.value(&min).abs() < 1e-12);
    }

    #[test]
    fn classification_suite_shape_and_determinism() {
        let spec = ClassificationSuiteSpec::even(5, 4, 30, 2.0, 11);
        let a = gen_classification_suite(&spec).unwrap();
        let b = gen_classification_suite(&spec).unwrap();
        assert_eq!(a.num_tasks(), 5);
        assert_eq!(a.dim(), 4);
        let w = initial_point(4, 11);
        for (ta, tb) in a.tasks().iter().zip(b.tasks()) {
            assert_eq!(ta.probe_value(&w), tb.probe_value(&w));
        }
    }

    #[test]
    fn classification_reference_config_splits_evenly() {
        let spec = ClassificationSuiteSpec::even(50, 20, 300, 2.0, 1);
        let pool = gen_classification_suite(&spec).unwrap();
        assert_eq!(pool.num_tasks(), 50);
        for t in pool.tasks() {
            let hinge = t.kernel().as_hinge().expect("suite builds hinge tasks");
            assert_eq!(hinge.label_counts(), (150, 150));
        }
    }

    #[test]
    fn classification_zero_separation_is_uninformative() {
        let spec = ClassificationSuiteSpec::even(3, 6, 50, 0.0, 5);
        let pool = gen_classification_suite(&spec).unwrap();
        let v = pool.probe_expected_loss(&Vector::zeros(6)).unwrap();
        // At w = 0 every margin is z = 1, so the smoothed hinge reports
        // 1 − δ/2 regardless of the data.
        assert!((v - (1.0 - 0.05)).abs() < 1e-12);
    }

    #[test]
    fn classification_odd_n_even_split_rejected() {
        let spec = ClassificationSuiteSpec::even(2, 3, 31, 1.0, 1);
        assert!(gen_classification_suite(&spec).is_err());
    }

    #[test]
    fn random_quadratic_pool_respects_eigen_range() {
        let pool = gen_random_quadratic_pool(4, 6, 0.5, 2.0, 9).unwrap();
        for t in pool.tasks() {
            let (lo, hi) = t.kernel().as_quadratic().unwrap().eigen_range();
            assert!(
                lo >= 0.5 - 1e-9 && hi <= 2.0 + 1e-9,
                "eigen range [{lo}, {hi}]"
            );
        }
    }

    #[test]
    fn initial_point_deterministic() {
        assert_eq!(initial_point(8, 1), initial_point(8, 1));
        assert_ne!(initial_point(8, 1), initial_point(8, 2));
    }

    #[test]
    fn standardize_is_idempotent() {
        let mut m = Matrix::from_fn(50, 3, |i, j| (i * 3 + j) as f64 * 0.37 - 5.0);
        standardize_columns(&mut m);
        let once = m.clone();
        standardize_columns(&mut m);
        for (a, b) in once.iter().zip(m.iter()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    fn write_demo_csv(dir: &std::path::Path) -> std::path::PathBuf {
        let path = dir.join("demo.csv");
        let mut f = std::fs::File::create(&path).unwrap();
        writeln!(f, "age,sex,bmi,target").unwrap();
        let rows = [
            (25.0, 0.0, 21.0, 3.1),
            (31.0, 1.0, 24.0, 4.2),
            (47.0, 0.0, 28.0, 5.5),
            (52.0, 1.0, 26.0, 6.0),
            (61.0, 0.0, 30.0, 7.2),
            (44.0, 1.0, 22.0, 5.0),
            (38.0, 0.0, 25.0, 4.4),
            (29.0, 1.0, 27.0, 3.9),
        ];
        for (age, sex, bmi, target) in rows {
            writeln!(f, "{age},{sex},{bmi},{target}").unwrap();
        }
        path
    }

    #[test]
    fn csv_four_way_split() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_demo_csv(dir.path());
        let spec = CsvTaskSpec {
            path: path.to_string_lossy().to_string(),
            feature_columns: vec!["age".into(), "bmi".into()],
            label_column: "target".into(),
            splits: vec![
                SplitPredicate::Equals {
                    column: "sex".into(),
                    value: 1.0,
                },
                SplitPredicate::AboveMean {
                    column: "age".into(),
                },
            ],
            loss: CsvLossKind::Quadratic,
            delta: 0.1,
        };
        let loaded = load_csv_tasks(&spec).unwrap();
        assert_eq!(loaded.pool.num_tasks(), 4);
        assert!(loaded.warnings.is_empty());
        assert_eq!(loaded.pool.dim(), 2);
    }

    #[test]
    fn csv_empty_cell_dropped_with_warning() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_demo_csv(dir.path());
        let spec = CsvTaskSpec {
            path: path.to_string_lossy().to_string(),
            feature_columns: vec!["bmi".into()],
            label_column: "target".into(),
            splits: vec![SplitPredicate::GreaterThan {
                column: "age".into(),
                value: 1000.0,
            }],
            loss: CsvLossKind::Quadratic,
            delta: 0.1,
        };
        let loaded = load_csv_tasks(&spec).unwrap();
        assert_eq!(loaded.pool.num_tasks(), 1, "the impossible cell is dropped");
        assert_eq!(loaded.warnings.len(), 1);
    }

    #[test]
    fn csv_malformed_cell_names_row_and_column() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.csv");
        std::fs::write(&path, "a,b\n1.0,2.0\n1.5,abc\n").unwrap();
        let spec = CsvTaskSpec {
            path: path.to_string_lossy().to_string(),
            feature_columns: vec!["a".into()],
            label_column: "b".into(),
            splits: vec![],
            loss: CsvLossKind::Quadratic,
            delta: 0.1,
        };
        match load_csv_tasks(&spec) {
            Err(Error::Csv { row, column, .. }) => {
                assert_eq!(row, Some(3));
                assert_eq!(column.as_deref(), Some("b"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn csv_quoted_fields_parse() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("quoted.csv");
        std::fs::write(&path, "\"a\",b\n\"1.5\",2.0\n2.5,\"3.0\"\n").unwrap();
        let spec = CsvTaskSpec {
            path: path.to_string_lossy().to_string(),
            feature_columns: vec!["a".into()],
            label_column: "b".into(),
            splits: vec![],
            loss: CsvLossKind::Quadratic,
            delta: 0.1,
        };
        let loaded = load_csv_tasks(&spec).unwrap();
        assert_eq!(loaded.pool.num_tasks(), 1);
    }

    #[test]
    fn csv_missing_column_is_reported() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_demo_csv(dir.path());
        let spec = CsvTaskSpec {
            path: path.to_string_lossy().to_string(),
            feature_columns: vec!["nope".into()],
            label_column: "target".into(),
            splits: vec![],
            loss: CsvLossKind::Quadratic,
            delta: 0.1,
        };
        match load_csv_tasks(&spec) {
            Err(Error::Csv { column, .. }) => assert_eq!(column.as_deref(), Some("nope")),
            other => panic!("unexpected {other:?}"),
        }
    }
}
