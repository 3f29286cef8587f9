//! Embedding files and stratified cross-validation folds.
//!
//! An embedding file is CSV with a version line, a column header and one row
//! per example:
//!
//! ```text
//! frustlab-embeddings,v1,n=2,r=3,k=2
//! a_0,a_1,a_2,c_0,c_1,y
//! 0.1,0.2,0.3,1.5,-0.5,1
//! 0.4,0.5,0.6,0.0,2.0,0
//! ```

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::numerics::{Matrix, RngStream};

pub const MAGIC: &str = "frustlab-embeddings";
pub const VERSION: &str = "v1";

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct EmbeddingHeader {
    pub n: usize,
    pub r: usize,
    pub k: usize,
}

fn parse_header(fields: &[&str], path: &Path) -> Result<EmbeddingHeader> {
    let bad = |reason: String| Error::MalformedHeader {
        path: path.to_path_buf(),
        line: 1,
        reason,
    };
    if fields.len() != 5 || fields[0] != MAGIC || fields[1] != VERSION {
        return Err(bad(format!(
            "expected `{MAGIC},{VERSION},n=<N>,r=<R>,k=<K>`"
        )));
    }
    let mut dims = [0usize; 3];
    for (slot, (field, key)) in dims.iter_mut().zip(fields[2..].iter().zip(["n", "r", "k"])) {
        let value = field
            .strip_prefix(key)
            .and_then(|s| s.strip_prefix('='))
            .ok_or_else(|| bad(format!("expected `{key}=<count>`, found `{field}`")))?;
        *slot = value
            .trim()
            .parse()
            .map_err(|_| bad(format!("`{value}` is not a count")))?;
    }
    Ok(EmbeddingHeader {
        n: dims[0],
        r: dims[1],
        k: dims[2],
    })
}

fn column_names(h: &EmbeddingHeader) -> Vec<String> {
    (0..h.r)
        .map(|i| format!("a_{i}"))
        .chain((0..h.k).map(|j| format!("c_{j}")))
        .chain(std::iter::once("y".to_string()))
        .collect()
}

/// Parses an embedding file already held in memory. `path` is only used in
/// error messages.
pub fn parse_embeddings<R: Read>(reader: R, path: &Path) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(reader);
    let mut records = rdr.records();
    let line_of = |rec: &csv::StringRecord| rec.position().map_or(0, |p| p.line() as usize);

    let first = records
        .next()
        .transpose()?
        .ok_or_else(|| Error::MalformedHeader {
            path: path.to_path_buf(),
            line: 1,
            reason: "empty file".into(),
        })?;
    let header = parse_header(&first.iter().collect::<Vec<_>>(), path)?;

    let names = records
        .next()
        .transpose()?
        .ok_or_else(|| Error::MalformedHeader {
            path: path.to_path_buf(),
            line: 2,
            reason: "missing column header".into(),
        })?;
    let expected = column_names(&header);
    if names
        .iter()
        .map(str::trim)
        .ne(expected.iter().map(String::as_str))
    {
        return Err(Error::MalformedHeader {
            path: path.to_path_buf(),
            line: line_of(&names),
            reason: format!("column header does not match r={} k={}", header.r, header.k),
        });
    }

    let (r, k) = (header.r, header.k);
    let width = r + k + 1;
    let mut a = Vec::with_capacity(header.n * r);
    let mut c = Vec::with_capacity(header.n * k);
    let mut y = Vec::with_capacity(header.n);
    let mut last_line = line_of(&names);
    for rec in records {
        let rec = rec?;
        let line = line_of(&rec);
        last_line = line;
        if y.len() == header.n {
            return Err(Error::dims(format!(
                "{}:{line}: header declares n={} but more rows follow",
                path.display(),
                header.n
            )));
        }
        if rec.len() != width {
            return Err(Error::dims(format!(
                "{}:{line}: {} fields, expected {width}",
                path.display(),
                rec.len()
            )));
        }
        for (j, field) in rec.iter().take(r + k).enumerate() {
            let v: f64 = field.trim().parse().map_err(|_| Error::MalformedRow {
                path: path.to_path_buf(),
                line,
                reason: format!("field {j} `{field}` is not a number"),
            })?;
            if !v.is_finite() {
                return Err(Error::MalformedRow {
                    path: path.to_path_buf(),
                    line,
                    reason: format!("field {j} is not finite"),
                });
            }
            if j < r {
                a.push(v);
            } else {
                c.push(v);
            }
        }
        let label = rec[r + k].trim();
        y.push(match label {
            "0" => 0,
            "1" => 1,
            _ => {
                return Err(Error::NonBinaryLabel {
                    path: path.to_path_buf(),
                    line,
                    value: label.to_string(),
                });
            }
        });
    }
    if y.len() != header.n {
        return Err(Error::dims(format!(
            "{}:{}: header declares n={} but the body has {} rows",
            path.display(),
            last_line,
            header.n,
            y.len()
        )));
    }
    let n = header.n;
    Dataset::new(
        Matrix::from_vec(n, r, a)?,
        Matrix::from_vec(n, k, c)?,
        (0..k).collect(),
        y,
    )
}

/// Loads an embedding file. Every concept column is marked as known; callers
/// choose the supervised subset with [`Dataset::with_known`].
pub fn load_embedding_file(path: impl AsRef<Path>) -> Result<Dataset> {
    let path = path.as_ref();
    parse_embeddings(File::open(path)?, path)
}

/// Writes all concept columns of `data`, each value with ten significant digits.
pub fn write_embeddings<W: Write>(data: &Dataset, out: W) -> Result<()> {
    let h = EmbeddingHeader {
        n: data.len(),
        r: data.dim(),
        k: data.n_concepts(),
    };
    let mut w = csv::WriterBuilder::new().flexible(true).from_writer(out);
    w.write_record([
        MAGIC.to_string(),
        VERSION.to_string(),
        format!("n={}", h.n),
        format!("r={}", h.r),
        format!("k={}", h.k),
    ])?;
    w.write_record(column_names(&h))?;
    let mut row = Vec::with_capacity(h.r + h.k + 1);
    for i in 0..h.n {
        row.clear();
        row.extend(
            data.activations
                .row(i)
                .iter()
                .chain(data.concepts.row(i))
                .map(|v| format!("{v:.9e}")),
        );
        row.push(data.labels[i].to_string());
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_embedding_file(data: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    write_embeddings(data, BufWriter::new(File::create(path)?))
}

/// Stratified assignment of examples to cross-validation folds.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FoldPlan {
    pub assignment: Vec<usize>,
    pub folds: usize,
    pub seed: u64,
}

impl FoldPlan {
    /// `(train, test)` row indices for one fold, both ascending.
    pub fn split(&self, fold: usize) -> (Vec<usize>, Vec<usize>) {
        let (test, train): (Vec<usize>, Vec<usize>) =
            (0..self.assignment.len()).partition(|&i| self.assignment[i] == fold);
        (train, test)
    }

    pub fn fold_size(&self, fold: usize) -> usize {
        self.assignment.iter().filter(|&&f| f == fold).count()
    }
}

/// Shuffles each class with a seeded stream and deals its members round-robin
/// over the folds. The dealing position carries over from the negatives to the
/// positives so overall fold sizes differ by at most one.
pub fn stratified_folds(y: &[u8], folds: usize, seed: u64) -> Result<FoldPlan> {
    if folds < 2 {
        return Err(Error::InvalidArgument(format!(
            "need at least 2 folds, got {folds}"
        )));
    }
    if let Some(&bad) = y.iter().find(|&&v| v > 1) {
        return Err(Error::InvalidArgument(format!("label {bad} is not binary")));
    }
    let mut rng = RngStream::new(seed);
    let mut assignment = vec![0; y.len()];
    let mut next = 0;
    for class in [0u8, 1] {
        let mut members: Vec<usize> = (0..y.len()).filter(|&i| y[i] == class).collect();
        if members.len() < folds {
            return Err(Error::TooFewPerClass {
                class,
                count: members.len(),
                folds,
            });
        }
        rng.shuffle(&mut members);
        for i in members {
            assignment[i] = next % folds;
            next += 1;
        }
    }
    Ok(FoldPlan {
        assignment,
        folds,
        seed,
    })
}

/// Per-column affine map to zero mean and unit variance, fitted on training
/// rows. Constant columns are centred only.
#[derive(Clone, Debug, PartialEq)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Standardizer {
    pub fn fit(x: &Matrix) -> Result<Self> {
        let n = x.rows();
        if n < 2 {
            return Err(Error::InvalidArgument(
                "standardisation needs at least two rows".into(),
            ));
        }
        let mean = x.column_means();
        let mut var = vec![0.0; x.cols()];
        for row in x.row_iter() {
            for ((v, m), s) in row.iter().zip(&mean).zip(var.iter_mut()) {
                *s += (v - m) * (v - m);
            }
        }
        let scale = var
            .into_iter()
            .map(|s| (s / (n - 1) as f64).sqrt())
            .map(|s| if s > 0.0 { s } else { 1.0 })
            .collect();
        Ok(Standardizer { mean, scale })
    }

    pub fn apply(&self, x: &Matrix) -> Result<Matrix> {
        if x.cols() != self.mean.len() {
            return Err(Error::dims(format!(
                "{} columns, standardiser fitted on {}",
                x.cols(),
                self.mean.len()
            )));
        }
        let mut out = x.clone();
        for i in 0..out.rows() {
            for (j, v) in out.row_mut(i).iter_mut().enumerate() {
                *v = (*v - self.mean[j]) / self.scale[j];
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<Dataset> {
        parse_embeddings(text.as_bytes(), Path::new("fixture.csv"))
    }

    const FIXTURE: &str = "frustlab-embeddings,v1,n=2,r=3,k=2\na_0,a_1,a_2,c_0,c_1,y\n0.1,0.2,0.3,1.5,-0.5,1\n0.4,0.5,0.6,0,2e-3,0\n";

    #[test]
    fn parses_fixture_literals() {
        let d = parse(FIXTURE).unwrap();
        assert_eq!(
            d.activations,
            Matrix::from_rows(&[[0.1, 0.2, 0.3], [0.4, 0.5, 0.6]])
        );
        assert_eq!(d.concepts, Matrix::from_rows(&[[1.5, -0.5], [0.0, 2e-3]]));
        assert_eq!(d.labels, vec![1, 0]);
        assert_eq!(d.known, vec![0, 1]);
    }

    #[test]
    fn row_count_mismatch() {
        let short = FIXTURE.replace("n=2", "n=3");
        let err = parse(&short).unwrap_err();
        assert!(matches!(err, Error::DimensionMismatch(_)));
        assert!(err.to_string().contains("fixture.csv:4"), "{err}");
        assert!(matches!(
            parse(&FIXTURE.replace("n=2", "n=1")),
            Err(Error::DimensionMismatch(_))
        ));
    }

    #[test]
    fn label_two_names_its_line() {
        let err = parse(&FIXTURE.replace("-0.5,1", "-0.5,2")).unwrap_err();
        match err {
            Error::NonBinaryLabel { line, value, .. } => {
                assert_eq!((line, value.as_str()), (3, "2"))
            }
            other => panic!("{other}"),
        }
    }

    #[test]
    fn header_errors() {
        assert!(matches!(
            parse(""),
            Err(Error::MalformedHeader { line: 1, .. })
        ));
        assert!(matches!(
            parse(&FIXTURE.replace("v1", "v2")),
            Err(Error::MalformedHeader { line: 1, .. })
        ));
        assert!(matches!(
            parse(&FIXTURE.replace("r=3", "r=x")),
            Err(Error::MalformedHeader { line: 1, .. })
        ));
        assert!(matches!(
            parse(&FIXTURE.replace("c_1", "c_9")),
            Err(Error::MalformedHeader { line: 2, .. })
        ));
        assert!(matches!(
            parse(&FIXTURE.replace("0.5,0.6", "0.5,nan")),
            Err(Error::MalformedRow { line: 4, .. })
        ));
        assert!(matches!(
            parse(&FIXTURE.replace(",0.6,", ",")),
            Err(Error::DimensionMismatch(_))
        ));
    }

    #[test]
    fn write_then_read() {
        let mut rng = RngStream::new(4);
        let a = rng.normal_matrix(7, 4, 3.0);
        let c = rng.normal_matrix(7, 3, 1e3);
        let d = Dataset::new(a, c, vec![0, 1], vec![0, 1, 1, 0, 1, 0, 0]).unwrap();
        let mut buf = Vec::new();
        write_embeddings(&d, &mut buf).unwrap();
        let back = parse_embeddings(buf.as_slice(), Path::new("mem")).unwrap();
        assert_eq!(back.labels, d.labels);
        for (x, y) in back
            .activations
            .as_slice()
            .iter()
            .chain(back.concepts.as_slice())
            .zip(d.activations.as_slice().iter().chain(d.concepts.as_slice()))
        {
            assert!((x - y).abs() <= 1e-9 * y.abs(), "{x} vs {y}");
        }
    }

    #[test]
    fn one_of_each_class_per_fold() {
        let y: Vec<u8> = (0..20).map(|i| (i % 2) as u8).collect();
        let plan = stratified_folds(&y, 10, 3).unwrap();
        for f in 0..10 {
            let (_, test) = plan.split(f);
            assert_eq!(test.len(), 2);
            assert_eq!(test.iter().map(|&i| y[i] as usize).sum::<usize>(), 1);
        }
        assert_eq!(plan, stratified_folds(&y, 10, 3).unwrap());
        assert_ne!(plan, stratified_folds(&y, 10, 4).unwrap());
    }

    #[test]
    fn too_few_per_class() {
        let y = [0, 0, 0, 1, 1];
        assert!(matches!(
            stratified_folds(&y, 3, 0),
            Err(Error::TooFewPerClass {
                class: 1,
                count: 2,
                folds: 3
            })
        ));
        assert!(stratified_folds(&y, 1, 0).is_err());
    }

    #[test]
    fn standardiser_uses_training_statistics() {
        let train = Matrix::from_rows(&[[1.0, 5.0], [3.0, 5.0]]);
        let s = Standardizer::fit(&train).unwrap();
        let z = s.apply(&Matrix::from_rows(&[[2.0, 6.0]])).unwrap();
        assert_eq!(z.row(0), &[0.0, 1.0]);
        let t = s.apply(&train).unwrap();
        assert!((t[(0, 0)] + std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-15);
    }
}
